"""Refined asymptotics of rate-distortion with spherical and i.i.d. Gaussian codebooks."""

from .asymptotics import (
    ExponentPoint, SecondOrderPoint, companion_beta, dispersion, exponent, exponent_curve, h_func, kappa,
    md_constant, r_iid, r_iid_star, r_sp, rd_function, s_star, second_order_logM, solve_alpha, tilted_variance,
)
from .distortion import CodebookKind, DistortionSetup
from .ensemble import (
    EnsembleEstimate, EstimateMethod, MDPoint, SimPlan, md_probe, pe_conditional, pe_direct, pe_quadrature,
    spherical_floor,
)
from .errors import (
    CapabilityError, ConfigurationError, DegenerateSourceError, DomainError, GaussRDError, PreconditionError,
    ResourceError, ValidationError,
)
from .shellprob import (
    ShellMethod, ShellProbability, g_lower, g_upper, psi_spherical, upsilon_bahadur_rao, upsilon_iid,
)
from .sources import (
    CustomSource, DiscreteSource, GaussianSource, LegendrePoint, MomentSummary, PowerLaw, RayleighSource,
    cgf_x2, legendre_x2, make_rng, moments, power_density, sample_block, sample_power, sample_powers,
    source_from_config, ternary_source,
)

__version__ = "0.1.0"
