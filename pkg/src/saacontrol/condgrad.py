"""Generalized conditional gradient (Frank-Wolfe) solver.

Each iteration computes the gap certificate at the current control, stops
if the gap is below tolerance, and otherwise moves toward the oracle point
``v``: ``u <- u + s (v - u)`` with ``s`` in [0, 1].  The affine-linear
model uses an exact line search (the objective along the segment is a
convex quadratic plus a piecewise-linear L1 term); the bilinear model uses
Armijo backtracking.
"""
import csv
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import InvalidArgument, ModelInconsistency, StagnationError
from .models import PdeKind


class LineSearch(str, Enum):
    EXACT = "exact"
    ARMIJO = "armijo"


@dataclass(frozen=True)
class SolverConfig:
    gap_tol: float = 1e-10
    max_iters: int = 100
    # None picks EXACT for the affine-linear model and ARMIJO otherwise
    line_search: LineSearch = None
    armijo_c: float = 1e-4
    armijo_shrink: float = 0.5
    armijo_s0: float = 1.0
    max_halvings: int = 50

    def __post_init__(self):
        if not self.gap_tol > 0:
            raise InvalidArgument("gap_tol must be positive")
        if self.max_iters < 1:
            raise InvalidArgument("max_iters must be at least 1")
        if self.line_search is not None:
            object.__setattr__(self, "line_search", LineSearch(self.line_search))


@dataclass
class SolveTrace:
    objectives: list = field(default_factory=list)
    gaps: list = field(default_factory=list)
    steps: list = field(default_factory=list)
    final_u: np.ndarray = None
    status: str = None

    @property
    def iterations(self):
        return len(self.gaps)

    @property
    def final_objective(self):
        return self.objectives[-1]

    @property
    def final_gap(self):
        return self.gaps[-1]

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "objective", "gap"])
            for k, (obj, g) in enumerate(zip(self.objectives, self.gaps)):
                w.writerow([k, repr(obj), repr(g)])


def minimize_on_segment(a, b, u, d, weight):
    """Minimize ``b s + a s^2 / 2 + weight * sum|u + s d|`` over ``s`` in [0, 1].

    The L1 term is linear between the zero crossings of ``u + s d``, so the
    minimum is either a crossing, an endpoint, or the stationary point of
    the quadratic on one of the linear pieces.
    """
    if a < -1e-12:
        raise ModelInconsistency(f"negative curvature {a:.3e} along the search direction")
    a = max(a, 0.0)
    u = np.asarray(u, dtype=float)
    d = np.asarray(d, dtype=float)
    nz = d != 0
    if not np.any(nz):
        return 0.0
    un, dn = u[nz], d[nz]
    t = -un / dn
    cross = (t > 0) & (t < 1)
    sigma = np.where(un != 0, np.sign(un), np.sign(dn))
    slope0 = weight * float(np.sum(sigma * dn))

    order = np.argsort(t[cross], kind="stable")
    tc = t[cross][order]
    jumps = 2.0 * weight * np.abs(dn[cross][order])
    knots, first = np.unique(tc, return_index=True)
    # slope change accumulated at each distinct crossing
    csum = np.concatenate([[0.0], np.cumsum(jumps)])
    last = np.append(first[1:], tc.size) if tc.size else first
    knots = np.concatenate([[0.0], knots, [1.0]])
    slopes = slope0 + csum[np.concatenate([[0], last])]

    l1 = np.empty(knots.size)
    l1[0] = weight * float(np.sum(np.abs(u)))
    l1[1:] = l1[0] + np.cumsum(slopes * np.diff(knots))

    cands_s = [knots]
    cands_v = [b * knots + 0.5 * a * knots**2 + l1]
    if a > 0:
        lo, hi = knots[:-1], knots[1:]
        # a tiny curvature sends the stationary point to +-inf; clipping handles it
        with np.errstate(over="ignore"):
            s = np.clip(-(b + slopes) / a, lo, hi)
        cands_s.append(s)
        cands_v.append(b * s + 0.5 * a * s**2 + l1[:-1] + slopes * (s - lo))
    cs = np.concatenate(cands_s)
    cv = np.concatenate(cands_v)
    best = np.flatnonzero(cv == cv.min())
    return float(np.min(cs[best]))


def _quadratic_coefficients(p, st_u, st_v):
    ops = p.model.ops
    D = ops.to_full(st_v.Y - st_u.Y)
    E = ops.to_full(st_u.Y) - p.model.yd
    MD = (ops.mass @ D.T).T
    a = float(np.mean(np.einsum("ij,ij->i", D, MD)))
    b = float(np.mean(np.einsum("ij,ij->i", E, MD)))
    return a, b


def exact_linesearch_quadratic(p, u, d, states=None):
    """Exact step along ``d`` for the affine-linear (convex quadratic) model."""
    if p.kind is not PdeKind.AFFINE_LINEAR:
        raise InvalidArgument("exact line search requires the affine-linear model")
    d = np.asarray(d, dtype=float)
    if not np.any(d):
        return 0.0
    st_u = states if states is not None else p.evaluate(u)
    st_d = p.model.states(d)
    ops = p.model.ops
    D = ops.to_full(st_d.Y)
    E = ops.to_full(st_u.Y) - p.model.yd
    MD = (ops.mass @ D.T).T
    a = float(np.mean(np.einsum("ij,ij->i", D, MD)))
    b = float(np.mean(np.einsum("ij,ij->i", E, MD)))
    return minimize_on_segment(a, b, st_u.u, d, p.data.beta * p.area)


def _clip(p, u):
    return np.clip(u, p.data.lower, p.data.upper)


def solve(p, u0=None, cfg=None, callback=None):
    """Run conditional gradients on the composite problem ``p``.

    Returns a :class:`SolveTrace` with one objective and gap value per gap
    evaluation; ``status`` is ``"GapMet"`` or ``"IterCap"``.
    """
    cfg = cfg or SolverConfig()
    if u0 is None:
        u0 = p.zero_control()
    u0 = np.asarray(u0, dtype=float)
    if u0.shape != (p.mesh.n_cells,) or not p.feasible(u0):
        raise InvalidArgument("initial control must be feasible")
    search = cfg.line_search or (
        LineSearch.EXACT if p.kind is PdeKind.AFFINE_LINEAR else LineSearch.ARMIJO
    )
    if search is LineSearch.EXACT and p.kind is not PdeKind.AFFINE_LINEAR:
        raise InvalidArgument("exact line search requires the affine-linear model")

    trace = SolveTrace()
    u = u0.copy()
    st = p.evaluate(u)
    G = p.objective(st)
    for k in range(cfg.max_iters + 1):
        cert = p.gap(st)
        trace.objectives.append(G)
        trace.gaps.append(cert.gap)
        if callback is not None:
            callback(k, G, cert.gap)
        if cert.gap <= cfg.gap_tol:
            trace.status = "GapMet"
            break
        if k == cfg.max_iters:
            trace.status = "IterCap"
            break
        v = cert.minimizer
        d = v - u
        if search is LineSearch.EXACT:
            st_v = p.evaluate(v)
            a, b = _quadratic_coefficients(p, st, st_v)
            s = minimize_on_segment(a, b, u, d, p.data.beta * p.area)
            u_new = _clip(p, (1.0 - s) * u + s * v)
            st_new = p.model.combine(st, st_v, s, u_new)
            G_new = p.objective(st_new)
        else:
            s = cfg.armijo_s0
            for _ in range(cfg.max_halvings + 1):
                u_new = _clip(p, (1.0 - s) * u + s * v)
                st_new = p.evaluate(u_new)
                G_new = p.objective(st_new)
                if G_new <= G - cfg.armijo_c * s * cert.gap:
                    break
                s *= cfg.armijo_shrink
            else:
                trace.final_u = u
                trace.status = "Stagnated"
                raise StagnationError(
                    f"no sufficient decrease after {cfg.max_halvings} step reductions "
                    f"(iteration {k}, gap {cert.gap:.3e})",
                    trace,
                )
        trace.steps.append(s)
        u, st, G = u_new, st_new, G_new
    trace.final_u = u
    return trace
