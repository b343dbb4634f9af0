"""qsdlab: quasi-stationary analysis of killed reversible Markov models.

Three layers: exact spectral linear algebra on finite reversible chains
(`spectral`), one-dimensional killed diffusions with certified boundary
classification and finite-volume discretization (`diffusion`, `feller`),
and path-level Monte Carlo verification (`montecarlo`).  The `qsd-lab`
command drives batch runs from JSON configs.
"""

from . import errors
from .backend import available_backends, default_backend
from .spectral import (
    ReversibleGenerator,
    PrincipalEigenpair,
    QsdVector,
    DoobGenerator,
    UniquenessReport,
    validate_generator,
    principal_eigenpair,
    spectral_gap,
    semigroup_apply,
    resolvent,
    feynman_kac_resolvent,
    perturbed_principal_eigenvalue,
    exp_lifetime_moment,
    qsd,
    conditional_law,
    survival_probability,
    doob_transform,
    doob_spectral_gap,
    semigroup_intertwining_check,
    ergodic_limit,
    uniqueness_check,
)
from .sweeps import random_reversible_generator
from .feller import BoundaryClass, BoundaryReport, IntegralResult
from .diffusion import (
    Diffusion1D,
    ScaleSpeed,
    ClassTReport,
    Grid,
    TightnessProfile,
    QsdDensity,
    scale_speed_from_drift,
    classify_boundary,
    endpoint_report,
    is_class_T,
    build_grid,
    discretize,
    tightness_profile,
    qsd_density,
)
from .montecarlo import (
    PathConfig,
    PathEnsemble,
    ConditionalLaw,
    RateEstimate,
    YaglomEstimate,
    OccupationHistogram,
    MomentEstimate,
    simulate_killed_paths,
    empirical_conditional_law,
    survival_rate_estimate,
    yaglom_estimate,
    doob_paths,
    exp_zeta_moment_estimate,
    CENSORED,
    KILLED,
    ABSORBED,
)
from .reports import ToleranceProfile, write_report, write_series, config_digest

__version__ = "0.1.0"
