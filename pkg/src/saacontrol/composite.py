"""Sample average approximation of the composite control problem.

``G_N(u) = (1/N) sum_i J(y_i(u)) + psi(u)`` with
``psi(u) = beta ||u||_L1 + indicator(lower <= u <= upper)``.
"""
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgument
from .models import BatchModel, PdeKind, SampleStates, check_kind_data
from .random_field import evaluate_kappa, kl_basis


def lmo(grad, beta, lower, upper):
    """Cellwise minimizer of ``grad * v + beta * |v|`` over ``[lower, upper]``.

    The function is piecewise linear in ``v`` so one of ``0, lower, upper``
    is optimal; ties resolve in that order.
    """
    if not lower <= 0 <= upper:
        raise InvalidArgument(f"bounds must satisfy lower <= 0 <= upper, got [{lower}, {upper}]")
    if beta < 0:
        raise InvalidArgument("beta must be nonnegative")
    grad = np.asarray(grad, dtype=float)
    cand = np.array([0.0, lower, upper])
    scores = np.multiply.outer(grad, cand) + beta * np.abs(cand)
    return cand[np.argmin(scores, axis=-1)]


@dataclass
class GapCertificate:
    gap: float
    minimizer: np.ndarray
    inner_term: float
    psi_diff: float
    gradient: np.ndarray = field(default=None, repr=False)


class CompositeProblem:
    """One discrete SAA instance: model, data, field, samples and mesh."""

    def __init__(self, kind, data, spec, samples, mesh, workers=1):
        self.kind = PdeKind.parse(kind)
        check_kind_data(self.kind, data)
        if samples.M != spec.M:
            raise InvalidArgument(f"samples have dimension {samples.M}, field has M={spec.M}")
        self.data = data
        self.spec = spec
        self.samples = samples
        self.mesh = mesh
        kappa = evaluate_kappa(spec, samples.xi, mesh, kl_basis(spec, mesh))
        self.model = BatchModel(self.kind, mesh, kappa, data, workers=workers)

    @property
    def N(self):
        return self.samples.count

    @property
    def area(self):
        return self.mesh.cell_area

    def zero_control(self):
        return np.zeros(self.mesh.n_cells)

    def feasible(self, u):
        u = np.asarray(u)
        return bool(np.all((u >= self.data.lower) & (u <= self.data.upper)))

    def _check_shape(self, u):
        u = np.asarray(u, dtype=float)
        if u.shape != (self.mesh.n_cells,):
            raise InvalidArgument(f"control must have {self.mesh.n_cells} entries, got {u.shape}")
        return u

    def l1_term(self, u):
        return self.data.beta * self.area * float(np.sum(np.abs(u)))

    def psi(self, u):
        u = self._check_shape(u)
        return self.l1_term(u) if self.feasible(u) else np.inf

    def evaluate(self, u):
        u = self._check_shape(u)
        if not self.feasible(u):
            raise InvalidArgument("control violates the bounds")
        return self.model.states(u)

    def _states(self, u):
        return u if isinstance(u, SampleStates) else self.evaluate(u)

    def objective(self, u):
        if not isinstance(u, SampleStates):
            u = self._check_shape(u)
            if not self.feasible(u):
                return np.inf
        st = self._states(u)
        return st.smooth_value + self.l1_term(st.u)

    def gradient(self, u):
        return self.model.mean_gradient(self._states(u))

    def inner(self, a, b):
        """Discrete L2 inner product of two per-cell fields."""
        return self.area * float(np.dot(a, b))

    def gap(self, u, grad=None):
        st = self._states(u)
        if grad is None:
            grad = self.model.mean_gradient(st)
        v = lmo(grad, self.data.beta, self.data.lower, self.data.upper)
        inner_term = self.inner(grad, st.u - v)
        psi_diff = self.l1_term(st.u) - self.l1_term(v)
        return GapCertificate(inner_term + psi_diff, v, inner_term, psi_diff, grad)


def saa_objective(p, u):
    return p.objective(u)


def saa_gradient(p, u):
    return p.gradient(u)


def gap(p, u):
    return p.gap(u)
