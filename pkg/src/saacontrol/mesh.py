"""P1/P0 finite elements on a regular triangulation of the unit square.

Nodes are numbered row by row (x fastest), each grid square is split into
two triangles along its lower-left to upper-right diagonal, and Dirichlet
conditions are imposed by eliminating boundary rows and columns.  Besides
generic scipy.sparse assembly, the module provides a banded layout of the
interior-node operators so that many coefficient fields can be assembled
with a single sparse product and factorized by LAPACK band Cholesky.
"""
from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np
import scipy.sparse as sp
from scipy.linalg import lapack
from scipy.sparse.linalg import cg

from .errors import CoefficientError, InvalidArgument, SolverFailure

__all__ = [
    "Mesh",
    "build_mesh",
    "assemble_stiffness",
    "assemble_mass_p1",
    "assemble_mixed_p0_p1",
    "assemble_reaction",
    "restrict_interior",
    "interpolate",
    "solve_spd",
    "BandedLayout",
    "fe_operators",
]


@dataclass(frozen=True, eq=False)
class Mesh:
    """Regular triangulation of (0, 1)^2 with ``n`` squares per direction."""

    n: int
    nodes: np.ndarray
    cells: np.ndarray
    boundary_mask: np.ndarray

    @property
    def h(self):
        return 1.0 / self.n

    @property
    def cell_area(self):
        return 0.5 * self.h**2

    @property
    def n_nodes(self):
        return self.nodes.shape[0]

    @property
    def n_cells(self):
        return self.cells.shape[0]

    @cached_property
    def interior(self):
        return np.flatnonzero(~self.boundary_mask)

    @cached_property
    def centroids(self):
        return self.nodes[self.cells].mean(axis=1)

    def signed_areas(self):
        p = self.nodes[self.cells]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])


def build_mesh(n):
    if int(n) != n or n < 1:
        raise InvalidArgument(f"mesh resolution must be a positive integer, got {n!r}")
    n = int(n)
    t = np.linspace(0.0, 1.0, n + 1)
    xx, yy = np.meshgrid(t, t)
    nodes = np.column_stack([xx.ravel(), yy.ravel()])

    j, i = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    ll = (j * (n + 1) + i).ravel()
    lr = ll + 1
    ul = ll + n + 1
    ur = ul + 1
    cells = np.empty((2 * n * n, 3), dtype=np.int64)
    cells[0::2] = np.column_stack([ll, lr, ur])
    cells[1::2] = np.column_stack([ll, ur, ul])

    ix = np.tile(np.arange(n + 1), n + 1)
    iy = np.repeat(np.arange(n + 1), n + 1)
    boundary = (ix == 0) | (ix == n) | (iy == 0) | (iy == n)
    return Mesh(n=n, nodes=nodes, cells=cells, boundary_mask=boundary)


def _gradients(mesh):
    """Gradients of the three barycentric basis functions on every cell."""
    p = mesh.nodes[mesh.cells]
    # rows of inv([[x1-x0, x2-x0], [y1-y0, y2-y0]]) give grad(phi1), grad(phi2)
    jac = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=2)
    inv = np.linalg.inv(jac)
    g12 = inv
    g0 = -g12.sum(axis=1, keepdims=True)
    return np.concatenate([g0, g12], axis=1)


def local_stiffness(mesh):
    g = _gradients(mesh)
    area = np.abs(mesh.signed_areas())
    return area[:, None, None] * np.einsum("cak,cbk->cab", g, g)


def local_mass(mesh):
    area = np.abs(mesh.signed_areas())
    ref = (np.ones((3, 3)) + np.eye(3)) / 12.0
    return area[:, None, None] * ref[None]


def _assemble(mesh, local, weights=None):
    vals = local if weights is None else weights[:, None, None] * local
    rows = np.repeat(mesh.cells, 3, axis=1).ravel()
    cols = np.tile(mesh.cells, (1, 3)).ravel()
    nn = mesh.n_nodes
    return sp.coo_matrix((vals.ravel(), (rows, cols)), shape=(nn, nn)).tocsr()


def _cell_vector(mesh, values, name):
    values = np.asarray(values, dtype=float)
    if values.shape != (mesh.n_cells,):
        raise InvalidArgument(
            f"{name} must have one entry per cell ({mesh.n_cells}), got shape {values.shape}"
        )
    return values


def restrict_interior(mesh, A):
    idx = mesh.interior
    A = sp.csr_matrix(A)
    return A[idx][:, idx] if A.shape[1] == mesh.n_nodes else A[idx]


def assemble_stiffness(mesh, kappa_cell, reduced=True):
    """Stiffness matrix of ``-div(kappa grad y)`` with piecewise-constant kappa.

    With ``reduced`` (default) the boundary rows and columns are eliminated
    and the matrix acts on interior nodes only.
    """
    kappa_cell = _cell_vector(mesh, kappa_cell, "kappa_cell")
    if not np.all(kappa_cell > 0):
        raise CoefficientError(f"diffusion coefficient must be positive, min={kappa_cell.min()}")
    A = _assemble(mesh, local_stiffness(mesh), kappa_cell)
    return restrict_interior(mesh, A) if reduced else A


def assemble_mass_p1(mesh):
    return _assemble(mesh, local_mass(mesh))


def assemble_mixed_p0_p1(mesh):
    """Matrix with entries ``int_D phi_i chi_c``: P1 test functions (rows), P0 cells (columns)."""
    area = np.abs(mesh.signed_areas())
    rows = mesh.cells.ravel()
    cols = np.repeat(np.arange(mesh.n_cells), 3)
    vals = np.repeat(area / 3.0, 3)
    return sp.coo_matrix((vals, (rows, cols)), shape=(mesh.n_nodes, mesh.n_cells)).tocsr()


def assemble_reaction(mesh, u):
    """P1 mass matrix weighted by the per-cell values of ``u``."""
    u = _cell_vector(mesh, u, "u")
    return _assemble(mesh, local_mass(mesh), u)


def interpolate(mesh, f):
    """Nodal interpolant of ``f(x1, x2)``; scalars are broadcast."""
    vals = f(mesh.nodes[:, 0], mesh.nodes[:, 1]) if callable(f) else f
    return np.broadcast_to(np.asarray(vals, dtype=float), (mesh.n_nodes,)).copy()


def _bandwidth(A):
    A = A.tocoo()
    if A.nnz == 0:
        return 0
    return int(np.max(np.abs(A.row - A.col)))


def to_upper_band(A, bw):
    """LAPACK upper band storage ``ab[bw + i - j, j] = A[i, j]``."""
    A = A.tocoo()
    keep = A.row <= A.col
    ab = np.zeros((bw + 1, A.shape[0]))
    np.add.at(ab, (bw + A.row[keep] - A.col[keep], A.col[keep]), A.data[keep])
    return ab


def band_cholesky(ab):
    c, info = lapack.dpbtrf(ab, lower=0)
    if info != 0:
        raise SolverFailure(f"band Cholesky failed (dpbtrf info={info}); matrix is not SPD")
    return c


def band_solve(c, rhs):
    x, info = lapack.dpbtrs(c, rhs, lower=0)
    if info != 0:
        raise SolverFailure(f"dpbtrs info={info}")
    return x


def _rel_residual(A, x, rhs):
    nb = np.linalg.norm(rhs)
    r = np.linalg.norm(A @ x - rhs)
    return r / nb if nb > 0 else r


def solve_spd(A, rhs, rtol=1e-12):
    """Solve ``A x = rhs`` for sparse symmetric positive-definite ``A``.

    Band Cholesky with up to three steps of iterative refinement; if the
    factorization breaks down, conjugate gradients (tolerance ``rtol``,
    at most ``10 * dim`` iterations) are tried instead.
    """
    A = sp.csr_matrix(A)
    rhs = np.asarray(rhs, dtype=float)
    if A.shape[0] != A.shape[1] or A.shape[0] != rhs.shape[0]:
        raise InvalidArgument(f"shape mismatch: A {A.shape}, rhs {rhs.shape}")
    if not np.any(rhs):
        return np.zeros_like(rhs)
    dim = A.shape[0]
    bw = _bandwidth(A)
    x = None
    if (bw + 1) * dim <= 5e7:
        try:
            c = band_cholesky(to_upper_band(A, bw))
        except SolverFailure:
            c = None
        if c is not None:
            x = band_solve(c, rhs)
            for _ in range(3):
                if _rel_residual(A, x, rhs) <= rtol:
                    break
                x = x + band_solve(c, rhs - A @ x)
    if x is None or _rel_residual(A, x, rhs) > rtol:
        with np.errstate(all="ignore"):
            x, info = cg(A, rhs, rtol=rtol, atol=0.0, maxiter=10 * dim)
            res = _rel_residual(A, x, rhs)
        if info != 0 or not res <= rtol:
            raise SolverFailure(f"conjugate gradients stopped at relative residual {res:.3e}", res)
    return x


class BandedLayout:
    """Affine maps from per-cell coefficients to interior-node band storage.

    ``stiffness_bands(K)`` returns the band storage of the reduced stiffness
    matrix for every row of ``K`` (shape ``(N, n_cells)``) in one sparse
    product; ``mass_bands`` does the same for the cell-weighted P1 mass.
    """

    def __init__(self, mesh):
        self.mesh = mesh
        n_int = mesh.interior.size
        self.dim = n_int
        gidx = np.full(mesh.n_nodes, -1, dtype=np.int64)
        gidx[mesh.interior] = np.arange(n_int)
        self._local_idx = gidx[mesh.cells]
        I = np.repeat(self._local_idx, 3, axis=1)
        J = np.tile(self._local_idx, (1, 3))
        mask = (I >= 0) & (J >= 0)
        self.bw = int(np.max(np.abs(I[mask] - J[mask]))) if mask.any() else 0
        self._stiff = self._coefficient_map(local_stiffness(mesh))
        self._mass = self._coefficient_map(local_mass(mesh))

    def _coefficient_map(self, local):
        li = self._local_idx
        I = np.repeat(li, 3, axis=1)
        J = np.tile(li, (1, 3))
        cell = np.repeat(np.arange(li.shape[0]), 9).reshape(-1, 9)
        keep = (I >= 0) & (J >= 0) & (I <= J)
        flat = (self.bw + I[keep] - J[keep]) * self.dim + J[keep]
        vals = local.reshape(-1, 9)[keep]
        shape = ((self.bw + 1) * self.dim, li.shape[0])
        return sp.coo_matrix((vals, (flat, cell[keep])), shape=shape).tocsr()

    def _bands(self, mapping, coeffs):
        coeffs = np.atleast_2d(np.asarray(coeffs, dtype=float))
        out = np.asarray((mapping @ coeffs.T).T)
        return out.reshape(coeffs.shape[0], self.bw + 1, self.dim)

    def stiffness_bands(self, kappa):
        return self._bands(self._stiff, kappa)

    def mass_bands(self, weights):
        return self._bands(self._mass, weights)


class FEOperators:
    """Mesh-level matrices shared by every sample of a problem."""

    def __init__(self, mesh):
        self.mesh = mesh
        self.layout = BandedLayout(mesh)
        self.mass = assemble_mass_p1(mesh)
        self.mixed = assemble_mixed_p0_p1(mesh)
        self.mixed_interior = restrict_interior(mesh, self.mixed)
        self.interior = mesh.interior

    def to_full(self, y_interior):
        """Pad interior-node values (last axis) with zero boundary values."""
        y_interior = np.asarray(y_interior)
        out = np.zeros(y_interior.shape[:-1] + (self.mesh.n_nodes,))
        out[..., self.interior] = y_interior
        return out


@lru_cache(maxsize=8)
def fe_operators(mesh):
    return FEOperators(mesh)
