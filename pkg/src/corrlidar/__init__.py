"""Intensity-correlation ranging with arrays of thermal sources.

Higher-order intensity correlations of N independent thermal emitters
form steep interference fringes; measuring them on two detector planes
turns fringe phase into a distance estimate. The package provides the
analytic correlation curves, speckle Monte Carlo, Fisher-information
calculators with their scaling fits, and a Poisson maximum-likelihood
range estimator, plus a CLI that renders figures next to the data.
"""

__version__ = "0.1.0"

from .correlation import (CorrelationCurve, correlation_slope,
                          curve_over_phases, curve_over_pixels,
                          fringe_visibility, grating_ratio,
                          normalized_correlation, spatial_average)
from .errors import (CampaignError, ConfigError, CorrLidarError,
                     InitializationError, IterationLimitError,
                     NumericalError, RankDeficiencyError)
from .estimation import (CampaignReport, RangeEstimate, cramer_rao_bound,
                         estimate_range, fourier_initializer, run_campaign)
from .fisher import (FisherGrid, FisherResult, fisher_discrete,
                     fisher_integral, fisher_integrand, fisher_lower_bound,
                     fisher_three_sources, fisher_two_sources, grid_scan,
                     prefactor_from_geometry, relative_difference)
from .fitkit import (FitModelParams, FitPipelineResult, PowerLawParams,
                     fit_m_dependence, fit_model_fisher, fit_pipeline,
                     fit_power_law, gauss_newton, least_squares)
from .geometry import (DetectorPlane, SetupGeometry, SourceArray,
                       far_field_distance, phase_difference,
                       spatial_frequency, whole_period_check)
from .speckle import (CountMap, FrameBatch, empirical_correlation,
                      empirical_curve, expected_counts, intensity,
                      load_counts_binary, load_counts_csv, sample_frames,
                      save_counts_binary, save_counts_csv, synthesize_counts)

__all__ = [name for name in dir() if not name.startswith("_")]
