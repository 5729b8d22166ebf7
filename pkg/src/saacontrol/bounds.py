"""Sample-size estimate for the gap functional and log-log rate fitting."""
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import InvalidArgument


@dataclass(frozen=True)
class BoundInputs:
    """Constants of the sample-size estimate.

    ``r_ad`` is the diameter of the feasible set, ``tau`` the sub-Gaussian
    constant of the gradients, ``L`` their Lipschitz constant and
    ``covering(nu)`` the nu-covering number of the image of the feasible set.
    """

    r_ad: float
    tau: float
    L: float
    covering: Callable[[float], float]

    def __post_init__(self):
        for name in ("r_ad", "tau", "L"):
            if not getattr(self, name) > 0:
                raise InvalidArgument(f"{name} must be positive")


def sample_size_bound(inp, eps):
    """Smallest ``N`` with ``N >= 12 r^2 tau^2 / eps^2 * covering(eps / (4 r L))``."""
    if not eps > 0:
        raise InvalidArgument(f"eps must be positive, got {eps}")
    cover = inp.covering(eps / (4.0 * inp.r_ad * inp.L))
    if not cover >= 1:
        raise InvalidArgument(f"covering number must be at least 1, got {cover}")
    raw = 12.0 * inp.r_ad**2 * inp.tau**2 / eps**2 * cover
    # absorb rounding noise so exact integers are not bumped up by one
    return max(1, math.ceil(raw * (1.0 - 1e-12)))


def parse_covering(text):
    """Covering-number model from ``const:c`` or ``poly:C,s`` (``ceil(C * nu**-s)``)."""
    kind, _, args = text.partition(":")
    try:
        vals = [float(a) for a in args.split(",") if a.strip()]
    except ValueError:
        raise InvalidArgument(f"bad covering model {text!r}") from None
    if kind == "const" and len(vals) == 1 and vals[0] >= 1:
        c = vals[0]
        return lambda nu: c
    if kind == "poly" and len(vals) == 2 and vals[0] > 0 and vals[1] >= 0:
        C, s = vals
        return lambda nu: max(1, math.ceil(C * nu ** (-s)))
    raise InvalidArgument(f"bad covering model {text!r}; use const:c or poly:C,s")


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    r_squared: float


def fit_rate(points):
    """Least-squares line through ``(log N, log value)``."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 3 or pts.shape[1] != 2:
        raise InvalidArgument("need at least 3 (N, value) points")
    N, val = pts[:, 0], pts[:, 1]
    if np.unique(N).size != N.size:
        raise InvalidArgument("sample sizes must be distinct")
    if not (np.all(val > 0) and np.all(N > 0)):
        raise InvalidArgument("sample sizes and values must be positive for a log-log fit")
    x, y = np.log(N), np.log(val)
    X = np.column_stack([x, np.ones_like(x)])
    (slope, intercept), *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - (slope * x + intercept)
    ss_tot = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - np.sum(resid**2) / ss_tot if ss_tot > 0 else 1.0
    return RateFit(float(slope), float(intercept), float(min(max(r2, 0.0), 1.0)))
