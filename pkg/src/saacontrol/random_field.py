"""Random diffusion coefficient and parameter samples.

The coefficient is a truncated Karhunen-Loeve expansion of a separable
exponential covariance ``exp(-|x1-x1'|/l - |x2-x2'|/l)`` on the unit
square,

    kappa(x, xi) = kappa0 + amplitude * sum_j sqrt(lambda_j) phi_j(x) xi_j,

driven by independent standard normals truncated to [-3, 3].  The mean
``kappa0`` is chosen so that ``kappa >= kappa_floor`` for every admissible
``xi``.
"""
import csv
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import bisect
from scipy.special import ndtr, ndtri
from scipy.stats import qmc

from .errors import (
    EigenSolverError,
    InvalidArgument,
    InvariantViolation,
    UnsupportedDimension,
)

TRUNCATION = 3.0
MAX_SOBOL_DIM = 21201

_PHI_LO = ndtr(-TRUNCATION)
_MASS = ndtr(TRUNCATION) - ndtr(-TRUNCATION)


def exponential_eigenpairs_1d(count, corr_len, half_width=0.5, xtol=1e-12):
    """Leading eigenpairs of ``exp(-|s-t|/corr_len)`` on ``[-a, a]``.

    Returns ``(lambdas, omegas, is_cos, norms)`` sorted by decreasing
    eigenvalue.  Cosine modes solve ``omega sin(omega a) = cos(omega a)/l``,
    sine modes ``sin(omega a) + l omega cos(omega a) = 0``; each bracket
    contains exactly one root and is resolved by bisection.
    """
    a, l = half_width, corr_len

    def cos_eq(w):
        return w * np.sin(w * a) - np.cos(w * a) / l

    def sin_eq(w):
        return np.sin(w * a) + l * w * np.cos(w * a)

    roots = []
    for k in range(count):
        lo, hi = k * np.pi / a, (k + 0.5) * np.pi / a
        try:
            roots.append((bisect(cos_eq, lo, hi, xtol=xtol, maxiter=500), True))
            lo, hi = (k + 0.5) * np.pi / a, (k + 1) * np.pi / a
            roots.append((bisect(sin_eq, lo, hi, xtol=xtol, maxiter=500), False))
        except (ValueError, RuntimeError) as exc:
            raise EigenSolverError(f"bisection failed for mode {k}: {exc}") from exc
    roots.sort(key=lambda r: r[0])
    roots = roots[:count]
    omegas = np.array([r[0] for r in roots])
    is_cos = np.array([r[1] for r in roots])
    lambdas = 2.0 * l / (1.0 + (l * omegas) ** 2)
    s = np.sin(2.0 * omegas * a) / (2.0 * omegas)
    norms = np.sqrt(np.where(is_cos, a + s, a - s))
    return lambdas, omegas, is_cos, norms


def _eval_1d(t, omegas, is_cos, norms):
    arg = np.multiply.outer(t, omegas)
    return np.where(is_cos, np.cos(arg), np.sin(arg)) / norms


@dataclass(frozen=True, eq=False)
class KLFieldSpec:
    mean: float
    M: int
    correlation_length: float
    amplitude: float
    kappa_floor: float
    lambdas: np.ndarray
    # 1D mode index per direction for each 2D term
    modes: np.ndarray
    omegas: np.ndarray = field(repr=False)
    is_cos: np.ndarray = field(repr=False)
    norms: np.ndarray = field(repr=False)

    def eigenfunctions(self, points):
        """Values ``phi_j(x)`` at ``points`` (shape ``(P, 2)``), shape ``(P, M)``."""
        points = np.asarray(points, dtype=float)
        phi1 = _eval_1d(points[:, 0] - 0.5, self.omegas, self.is_cos, self.norms)
        phi2 = _eval_1d(points[:, 1] - 0.5, self.omegas, self.is_cos, self.norms)
        return phi1[:, self.modes[:, 0]] * phi2[:, self.modes[:, 1]]

    def sup_eigenfunctions(self):
        # |cos| peaks at 0, |sin| reaches 1 since every sine frequency exceeds pi/(2a)
        inv = 1.0 / self.norms
        return inv[self.modes[:, 0]] * inv[self.modes[:, 1]]

    def lower_bound(self):
        """Guaranteed minimum of kappa over the domain and the parameter box."""
        spread = np.sum(np.sqrt(self.lambdas) * self.sup_eigenfunctions())
        return self.mean - self.amplitude * TRUNCATION * spread


def default_kl_spec(M=100, corr_len=1.0, amplitude=0.04, kappa_floor=0.1):
    if int(M) != M or M < 1:
        raise InvalidArgument(f"M must be a positive integer, got {M!r}")
    if corr_len <= 0 or kappa_floor <= 0 or amplitude < 0:
        raise InvalidArgument("corr_len and kappa_floor must be positive, amplitude nonnegative")
    M = int(M)
    lam1, omegas, is_cos, norms = exponential_eigenpairs_1d(M, corr_len)
    # the top M products lambda_i * lambda_j only involve the first M 1D modes
    i, j = np.meshgrid(np.arange(M), np.arange(M), indexing="ij")
    i, j = i.ravel(), j.ravel()
    prod = lam1[i] * lam1[j]
    order = np.lexsort((j, i, -prod))[:M]
    modes = np.column_stack([i[order], j[order]])
    lambdas = prod[order]
    sup = (1.0 / norms)[modes[:, 0]] * (1.0 / norms)[modes[:, 1]]
    mean = kappa_floor + amplitude * TRUNCATION * np.sum(np.sqrt(lambdas) * sup)
    return KLFieldSpec(
        mean=float(mean),
        M=M,
        correlation_length=float(corr_len),
        amplitude=float(amplitude),
        kappa_floor=float(kappa_floor),
        lambdas=lambdas,
        modes=modes,
        omegas=omegas,
        is_cos=is_cos,
        norms=norms,
    )


def kl_basis(spec, mesh):
    """Scaled eigenfunctions at cell centroids, shape ``(n_cells, M)``."""
    return spec.amplitude * spec.eigenfunctions(mesh.centroids) * np.sqrt(spec.lambdas)


def evaluate_kappa(spec, xi, mesh, basis=None):
    """Per-cell coefficient for one sample (1D ``xi``) or many (rows of ``xi``)."""
    xi = np.asarray(xi, dtype=float)
    if xi.shape[-1] != spec.M:
        raise InvalidArgument(f"sample has {xi.shape[-1]} entries, field expects {spec.M}")
    if basis is None:
        basis = kl_basis(spec, mesh)
    kappa = spec.mean + xi @ basis.T
    if kappa.size and kappa.min() < spec.kappa_floor * (1 - 1e-12):
        raise InvariantViolation(
            f"kappa={kappa.min():.6g} below floor {spec.kappa_floor}; sample outside [-3, 3]?"
        )
    return kappa


def _truncnorm_ppf(p):
    # centred evaluation keeps F^-1(p) = -F^-1(1-p) to rounding level
    p = np.asarray(p, dtype=float)
    q = p - 0.5
    x = ndtri(0.5 + np.abs(q) * _MASS)
    return np.clip(np.copysign(x, q), -TRUNCATION, TRUNCATION)


def truncnorm_inverse_cdf(p):
    """Quantile function of the standard normal conditioned on [-3, 3]."""
    arr = np.asarray(p, dtype=float)
    if not np.all((arr > 0) & (arr < 1)):
        raise InvalidArgument("probabilities must lie strictly inside (0, 1)")
    out = _truncnorm_ppf(arr)
    return float(out) if np.ndim(p) == 0 else out


def truncnorm_cdf(x):
    x = np.clip(np.asarray(x, dtype=float), -TRUNCATION, TRUNCATION)
    return (ndtr(x) - _PHI_LO) / _MASS


@dataclass(frozen=True, eq=False)
class SampleSet:
    xi: np.ndarray
    provenance: str

    def __post_init__(self):
        self.xi.setflags(write=False)

    @property
    def count(self):
        return self.xi.shape[0]

    @property
    def M(self):
        return self.xi.shape[1]

    def __len__(self):
        return self.count

    def subset(self, idx):
        return SampleSet(np.array(self.xi[idx]), f"{self.provenance}[subset]")


def _seed_entropy(seed):
    if np.ndim(seed) == 0:
        return int(seed)
    return [int(s) for s in seed]


def iid_samples(spec, count, seed):
    """Independent truncated-normal draws from a Philox stream keyed by ``seed``.

    ``seed`` may be an integer or a tuple of integers (e.g. ``(base, N, rep)``).
    """
    if count < 1:
        raise InvalidArgument("count must be at least 1")
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(_seed_entropy(seed))))
    u = rng.random((count, spec.M))
    # Generator.random draws from [0, 1); 0 maps to the lower truncation point
    xi = _truncnorm_ppf(u)
    return SampleSet(xi, f"iid:seed={_seed_entropy(seed)}")


def qmc_samples(spec, count, scramble_seed=0):
    """Sobol' points mapped through the truncated-normal quantile function.

    With ``scramble_seed=None`` the unscrambled sequence is used and its
    first point (the origin) is skipped.
    """
    if count < 1:
        raise InvalidArgument("count must be at least 1")
    if spec.M > MAX_SOBOL_DIM:
        raise UnsupportedDimension(f"Sobol' engine supports at most {MAX_SOBOL_DIM} dimensions")
    scramble = scramble_seed is not None
    engine = qmc.Sobol(d=spec.M, scramble=scramble, rng=scramble_seed if scramble else None)
    if not scramble:
        engine.fast_forward(1)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        u = engine.random(count)
    xi = _truncnorm_ppf(u)
    tag = f"qmc:sobol:scramble_seed={scramble_seed}" if scramble else "qmc:sobol:unscrambled"
    return SampleSet(xi, tag)


def write_samples(path, samples):
    with open(path, "w", newline="") as fh:
        fh.write(f"# M={samples.M}\n# count={samples.count}\n# provenance={samples.provenance}\n")
        w = csv.writer(fh)
        for row in samples.xi:
            w.writerow([repr(float(v)) for v in row])


def read_samples(path):
    header = {}
    rows = []
    with open(path, newline="") as fh:
        for line in fh:
            if line.startswith("#"):
                key, _, val = line[1:].strip().partition("=")
                header[key.strip()] = val.strip()
            elif line.strip():
                rows.append([float(v) for v in line.strip().split(",")])
    xi = np.array(rows, dtype=float).reshape(-1, int(header["M"]))
    if xi.shape[0] != int(header["count"]):
        raise InvalidArgument(f"{path}: expected {header['count']} rows, found {xi.shape[0]}")
    return SampleSet(xi, header.get("provenance", ""))
