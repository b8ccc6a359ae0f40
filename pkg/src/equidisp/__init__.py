"""Equi-dispersed normal conditionals models.

Bivariate densities whose conditionals are N(m, m) laws, together with
their univariate and general normal-conditionals relatives: density
evaluation, normalization, sampling, likelihood and pseudo-likelihood
estimation, AIC comparison and Monte-Carlo studies.
"""

__version__ = "0.1.0"

from .equidisp_model import (
    EquiDispParams,
    GridSpec,
    Margin,
    NormalizedModel,
    Sample2D,
    conditional_law,
    density_grid,
    local_maxima,
    log_normalizer,
    log_unnorm_density,
    logpdf,
    marginal_logpdf,
    model_moments,
    normalize,
    sample,
)
from .estimation import (
    FitReport,
    compare_models,
    fit_bivariate_normal,
    fit_independent_equidisp,
    fit_mle,
    fit_pmle,
)
from .normal_conditionals import (
    Axis,
    NCMatrix,
    nc_check_var_eq_meansq,
    nc_conditional_moments,
    nc_equidisp_reduce,
    nc_mean_variance_order,
    validate_nc,
)
from .numerics import OptimConfig, QuadConfig, RandomStream
from .pseudo_model import (
    PseudoParams,
    VarMeanSqParam,
    pseudo_fit,
    pseudo_logpdf,
    pseudo_sample,
    vms_logpdf,
    vms_mle,
)
from .study_harness import StudyConfig, StudySummary, run_study, summary_table
from .univariate_equidisp import ueq_logpdf, ueq_lrt, ueq_mle, ueq_sample
