"""Sample average approximation for bang-bang control of random elliptic PDEs."""

__version__ = "0.1.0"

from .bounds import BoundInputs, RateFit, fit_rate, sample_size_bound
from .composite import CompositeProblem, GapCertificate, gap, lmo, saa_gradient, saa_objective
from .condgrad import LineSearch, SolverConfig, SolveTrace, exact_linesearch_quadratic, solve
from .mesh import Mesh, build_mesh
from .models import PdeKind, ProblemData
from .random_field import (
    KLFieldSpec,
    SampleSet,
    default_kl_spec,
    evaluate_kappa,
    iid_samples,
    qmc_samples,
    truncnorm_inverse_cdf,
)

__all__ = [
    "BoundInputs",
    "CompositeProblem",
    "GapCertificate",
    "KLFieldSpec",
    "LineSearch",
    "Mesh",
    "PdeKind",
    "ProblemData",
    "RateFit",
    "SampleSet",
    "SolveTrace",
    "SolverConfig",
    "build_mesh",
    "default_kl_spec",
    "evaluate_kappa",
    "exact_linesearch_quadratic",
    "fit_rate",
    "gap",
    "iid_samples",
    "lmo",
    "qmc_samples",
    "saa_gradient",
    "saa_objective",
    "sample_size_bound",
    "solve",
    "truncnorm_inverse_cdf",
]
