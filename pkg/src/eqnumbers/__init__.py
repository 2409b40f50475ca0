"""Poisson and negative-binomial modelling of earthquake count series."""

__version__ = "0.1.0"

from .catalog import (CatalogFilter, CountSeries, Event, Region, bin_counts,  # noqa: E402
                      filter_events, magnitude_to_moment, moment_to_magnitude,
                      parse_catalog, read_catalog)
from .dist import (NbdParams, PoissonParams, cdf, nbd_pmf, poisson_pmf,  # noqa: E402
                   quantile, theoretical_moments)
from .estimate import (chi2_pvalue, fit_nbd_mle, fit_nbd_moments,  # noqa: E402
                       fit_poisson, lr_test, sample_moments)
from .ntest import (confidence_band, empirical_distribution, number_test,  # noqa: E402
                    smooth)
from .simulate import (SimConfig, draw_geometric, draw_nbd,  # noqa: E402
                       run_replication_study, z_statistic)

__all__ = [
    "CatalogFilter", "CountSeries", "Event", "Region", "bin_counts",
    "filter_events", "magnitude_to_moment", "moment_to_magnitude",
    "parse_catalog", "read_catalog", "NbdParams", "PoissonParams", "cdf",
    "nbd_pmf", "poisson_pmf", "quantile", "theoretical_moments", "chi2_pvalue",
    "fit_nbd_mle", "fit_nbd_moments", "fit_poisson", "lr_test",
    "sample_moments", "confidence_band", "empirical_distribution",
    "number_test", "smooth", "SimConfig", "draw_geometric", "draw_nbd",
    "run_replication_study", "z_statistic",
]
