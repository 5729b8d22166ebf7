"""State, adjoint and gradient computations for the two elliptic models.

Affine-linear model (control enters as a source, no further forcing)::

    (kappa grad y, grad v) - (u, v) = 0

Bilinear model (control enters as a reaction coefficient)::

    (kappa grad y, grad v) + (u y, v) = (b, v)

Both use the tracking objective ``J(y) = 0.5 ||y - y_d||^2`` evaluated with
the P1 mass matrix.  Gradients are discrete adjoints of that objective with
respect to the per-cell control values, divided by the cell area so that
``sum(area * grad * du)`` is the directional derivative.

:class:`BatchModel` evaluates many samples at once and is what the SAA
layer uses; the module-level functions are single-sample conveniences.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import AdmissibilityError, CoefficientError, InvalidArgument
from .mesh import band_cholesky, band_solve, fe_operators, interpolate

CACHE_BYTES = 768 * 2**20


class PdeKind(str, Enum):
    AFFINE_LINEAR = "affine-linear"
    BILINEAR = "bilinear"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("_", "-")
        aliases = {"affine": cls.AFFINE_LINEAR, "linear": cls.AFFINE_LINEAR}
        if key in aliases:
            return aliases[key]
        try:
            return cls(key)
        except ValueError:
            raise InvalidArgument(f"unknown PDE kind {value!r}") from None


def desired_state(x1, x2):
    return np.sin(2 * np.pi * x1) * np.sin(2 * np.pi * x2) * np.exp(2 * x1) / 6.0


def bilinear_source(x1, x2):
    return 10.0 * np.sin(2 * np.pi * x1 - x2) * np.cos(2 * np.pi * x2)


_DEFAULTS = {
    PdeKind.AFFINE_LINEAR: dict(beta=0.0075, lower=-1.0, upper=1.0),
    PdeKind.BILINEAR: dict(beta=0.00055, lower=0.0, upper=1.0),
}


@dataclass(frozen=True)
class ProblemData:
    """Desired state, forcing, L1 weight and constant control bounds."""

    y_d: object
    b: object
    beta: float
    lower: float
    upper: float

    def __post_init__(self):
        if self.beta < 0:
            raise InvalidArgument(f"beta must be nonnegative, got {self.beta}")
        if not self.lower <= 0 <= self.upper:
            raise InvalidArgument(f"bounds must satisfy lower <= 0 <= upper, got [{self.lower}, {self.upper}]")

    @classmethod
    def for_kind(cls, kind, beta=None, lower=None, upper=None, y_d=None, b=None):
        kind = PdeKind.parse(kind)
        d = _DEFAULTS[kind]
        if b is None:
            b = 0.0 if kind is PdeKind.AFFINE_LINEAR else bilinear_source
        return cls(
            y_d=desired_state if y_d is None else y_d,
            b=b,
            beta=d["beta"] if beta is None else float(beta),
            lower=d["lower"] if lower is None else float(lower),
            upper=d["upper"] if upper is None else float(upper),
        )


def check_kind_data(kind, data):
    if PdeKind.parse(kind) is PdeKind.BILINEAR and data.lower < 0:
        raise AdmissibilityError("the bilinear model requires a nonnegative lower bound")


@dataclass
class SampleStates:
    """States of every sample at one control.

    ``Y`` holds interior-node values, one row per sample; ``factors`` keeps
    the per-sample band Cholesky factors when they fit the cache budget.
    """

    u: np.ndarray
    Y: np.ndarray
    J: np.ndarray
    factors: list = None

    @property
    def smooth_value(self):
        return float(np.mean(self.J))


class BatchModel:
    """All per-sample PDE work for one mesh, coefficient batch and model."""

    def __init__(self, kind, mesh, kappa, data, workers=1, chunk=64):
        self.kind = PdeKind.parse(kind)
        check_kind_data(self.kind, data)
        kappa = np.atleast_2d(np.asarray(kappa, dtype=float))
        if kappa.shape[1] != mesh.n_cells:
            raise InvalidArgument(f"kappa has {kappa.shape[1]} cells, mesh has {mesh.n_cells}")
        if not np.all(kappa > 0):
            raise CoefficientError(f"diffusion coefficient must be positive, min={kappa.min()}")
        self.mesh = mesh
        self.data = data
        self.kappa = kappa
        self.ops = fe_operators(mesh)
        self.workers = max(1, int(workers))
        self.chunk = chunk
        self.yd = interpolate(mesh, data.y_d)
        load = self.ops.mass @ interpolate(mesh, data.b)
        self.load = load[self.ops.interior]
        lay = self.ops.layout
        self._factor_bytes = 8 * (lay.bw + 1) * lay.dim * self.n_samples
        self._fixed_factors = None

    @property
    def n_samples(self):
        return self.kappa.shape[0]

    def _cacheable(self):
        return self._factor_bytes <= CACHE_BYTES

    # -- chunked execution ------------------------------------------------
    def _chunks(self):
        N = self.n_samples
        return [slice(i, min(i + self.chunk, N)) for i in range(0, N, self.chunk)]

    def _map(self, fn, items):
        if self.workers == 1 or len(items) == 1:
            return [fn(it) for it in items]
        with ThreadPoolExecutor(self.workers) as ex:
            return list(ex.map(fn, items))

    def _factorize(self, sl, u=None):
        bands = self.ops.layout.stiffness_bands(self.kappa[sl])
        if self.kind is PdeKind.BILINEAR:
            bands = bands + self.ops.layout.mass_bands(u)
        return [band_cholesky(ab) for ab in bands]

    def _check_control(self, u):
        u = np.asarray(u, dtype=float)
        if u.shape != (self.mesh.n_cells,):
            raise InvalidArgument(f"control must have {self.mesh.n_cells} cell values, got {u.shape}")
        if not np.all(np.isfinite(u)):
            raise InvalidArgument("control has non-finite entries")
        if self.kind is PdeKind.BILINEAR and np.any(u < 0):
            raise AdmissibilityError("bilinear model needs a nonnegative control")
        return u

    def fixed_factors(self):
        """Cached stiffness factors (affine-linear model only)."""
        if self._fixed_factors is None:
            parts = self._map(self._factorize, self._chunks())
            self._fixed_factors = [c for part in parts for c in part]
        return self._fixed_factors

    # -- state / objective ------------------------------------------------
    def objective_values(self, Y):
        E = self.ops.to_full(Y) - self.yd
        ME = (self.ops.mass @ E.T).T
        return 0.5 * np.einsum("ij,ij->i", E, ME)

    def states(self, u):
        u = self._check_control(u)
        keep = self._cacheable()
        if self.kind is PdeKind.AFFINE_LINEAR:
            rhs = self.ops.mixed_interior @ u
            if keep:
                facs = self.fixed_factors()
                Y = np.array([band_solve(c, rhs) for c in facs])
                return SampleStates(u.copy(), Y, self.objective_values(Y))

            def work(sl):
                return np.array([band_solve(c, rhs) for c in self._factorize(sl)]), None
        else:
            def work(sl):
                facs = self._factorize(sl, u)
                return np.array([band_solve(c, self.load) for c in facs]), facs
        parts = self._map(work, self._chunks())
        Y = np.concatenate([p[0] for p in parts])
        facs = [c for p in parts for c in p[1]] if (keep and parts[0][1] is not None) else None
        return SampleStates(u.copy(), Y, self.objective_values(Y), facs)

    def combine(self, st_u, st_v, s, u_new):
        """States at ``(1-s) u + s v`` by linearity (affine-linear model)."""
        Y = (1.0 - s) * st_u.Y + s * st_v.Y
        return SampleStates(u_new, Y, self.objective_values(Y))

    # -- adjoint / gradient -----------------------------------------------
    def adjoints(self, st):
        E = self.ops.to_full(st.Y) - self.yd
        R = (self.ops.mass @ E.T).T[:, self.ops.interior]
        if self.kind is PdeKind.AFFINE_LINEAR and self._cacheable():
            facs = self.fixed_factors()
            return np.array([band_solve(c, r) for c, r in zip(facs, R)])
        if st.factors is not None:
            return np.array([band_solve(c, r) for c, r in zip(st.factors, R)])

        def work(sl):
            facs = self._factorize(sl, st.u)
            return np.array([band_solve(c, r) for c, r in zip(facs, R[sl])])

        return np.concatenate(self._map(work, self._chunks()))

    def per_sample_gradients(self, st, P=None):
        """Gradients of every sample, shape ``(N, n_cells)``."""
        if P is None:
            P = self.adjoints(st)
        Pf = self.ops.to_full(P)
        if self.kind is PdeKind.AFFINE_LINEAR:
            return (self.ops.mixed.T @ Pf.T).T / self.mesh.cell_area
        Yf = self.ops.to_full(st.Y)
        pc = Pf[:, self.mesh.cells]
        yc = Yf[:, self.mesh.cells]
        # exact P1 x P1 integral over a cell divided by its area
        return -(np.einsum("ncj,ncj->nc", pc, yc) + pc.sum(-1) * yc.sum(-1)) / 12.0

    def mean_gradient(self, st, P=None):
        if P is None:
            P = self.adjoints(st)
        if self.kind is PdeKind.AFFINE_LINEAR:
            pbar = self.ops.to_full(np.mean(P, axis=0))
            return self.ops.mixed.T @ pbar / self.mesh.cell_area
        return np.mean(self.per_sample_gradients(st, P), axis=0)


def _single(kind, mesh, kappa_cell, data):
    kappa_cell = np.asarray(kappa_cell, dtype=float)
    if kappa_cell.ndim != 1:
        raise InvalidArgument("kappa_cell must be a per-cell vector")
    return BatchModel(kind, mesh, kappa_cell[None], data)


def solve_state(kind, mesh, kappa_cell, u, data):
    """Nodal state (boundary values included) for one coefficient field."""
    model = _single(kind, mesh, kappa_cell, data)
    return model.ops.to_full(model.states(u).Y[0])


def objective_sample(kind, mesh, kappa_cell, u, data):
    model = _single(kind, mesh, kappa_cell, data)
    return float(model.states(u).J[0])


def gradient_sample(kind, mesh, kappa_cell, u, data):
    model = _single(kind, mesh, kappa_cell, data)
    return model.per_sample_gradients(model.states(u))[0]


def adjoint_sample(kind, mesh, kappa_cell, u, data):
    model = _single(kind, mesh, kappa_cell, data)
    return model.ops.to_full(model.adjoints(model.states(u))[0])
