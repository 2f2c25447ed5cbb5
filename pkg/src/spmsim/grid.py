"""Finite-difference grids on (0,1)^d with homogeneous Dirichlet data.

Only interior nodes are stored: with n nodes per axis the spacing is
h = 1/(n+1) and the boundary values are pinned to zero, so a field is a
flat float64 array of length n^d in row-major node order.  The discrete
Laplacian is the standard 3-point (d=1) / 5-point (d=2) stencil scaled
by 1/h^2, whose 1-D eigenpairs are

    mu_k = (2/h^2) (1 - cos(k pi h)),   v_k(i) = sin(k pi i h).

Norms carry the quadrature weight h^d:

    |u|_p      = (h^d sum |u_i|^p)^(1/p)
    ||u||_{-1} = sqrt(h^d u . (-Delta_h)^{-1} u)

and the H^1 seminorm uses forward differences including the boundary
faces, so |grad u|_2^2 = h^d u . (-Delta_h u) holds exactly.

Second-order operators in divergence form div(A grad u) are assembled
conservatively: flux averaging on faces for the diagonal entries of A
(which reproduces the Laplacian exactly for A = I) and symmetrized
centered differences for the off-diagonal entries, so the assembled
matrix is symmetric for any symmetric nodal A.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

__all__ = ["GridSpec", "GridOperators"]


@dataclass(frozen=True)
class GridSpec:
    """Geometry of the interior grid.

    Attributes:
        dimension: spatial dimension, 1 or 2.
        cells_per_axis: interior node count n per axis (n >= 4); the mesh
            spacing is h = 1/(n+1).
    """

    dimension: int
    cells_per_axis: int

    def __post_init__(self):
        if self.dimension not in (1, 2):
            raise ValueError(f"dimension must be 1 or 2, got {self.dimension}")
        if self.cells_per_axis < 4:
            raise ValueError(f"cells_per_axis must be >= 4, got {self.cells_per_axis}")

    @property
    def spacing(self) -> float:
        return 1.0 / (self.cells_per_axis + 1)

    @property
    def shape(self) -> tuple:
        return (self.cells_per_axis,) * self.dimension

    @property
    def n_nodes(self) -> int:
        return self.cells_per_axis**self.dimension

    def interior_axis(self) -> np.ndarray:
        """Interior coordinates i*h, i = 1..n, along one axis."""
        n = self.cells_per_axis
        return np.arange(1, n + 1) * self.spacing

    def closed_axis(self) -> np.ndarray:
        """Closed coordinates i*h, i = 0..n+1, along one axis (boundary included)."""
        n = self.cells_per_axis
        return np.arange(0, n + 2) * self.spacing

    def interior_mesh(self) -> list:
        """Coordinate arrays of shape `shape`, one per axis."""
        axes = [self.interior_axis()] * self.dimension
        return list(np.meshgrid(*axes, indexing="ij"))

    def closed_mesh(self) -> list:
        axes = [self.closed_axis()] * self.dimension
        return list(np.meshgrid(*axes, indexing="ij"))


def _forward_diff_block(n: int) -> sp.csr_matrix:
    # Unscaled face-difference pattern, shape (n+1, n): row f is u_f - u_{f-1}
    # with the Dirichlet ghosts u_0 = u_{n+1} = 0.
    rows = np.concatenate([np.arange(n), np.arange(1, n + 1)])
    cols = np.concatenate([np.arange(n), np.arange(n)])
    vals = np.concatenate([np.ones(n), -np.ones(n)])
    return sp.csr_matrix((vals, (rows, cols)), shape=(n + 1, n))


def _centered_diff_block(n: int) -> sp.csr_matrix:
    # Unscaled centered pattern, shape (n, n): row i is u_{i+1} - u_{i-1}
    # with Dirichlet ghosts; divide by 2h for the derivative.
    rows = np.concatenate([np.arange(n - 1), np.arange(1, n)])
    cols = np.concatenate([np.arange(1, n), np.arange(n - 1)])
    vals = np.concatenate([np.ones(n - 1), -np.ones(n - 1)])
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


class GridOperators:
    """Discrete operators, norms, and solves bound to one GridSpec.

    The factorization of -Delta_h is computed once at construction and
    shared by all Poisson solves; instances are immutable after init and
    safe to share across threads.
    """

    def __init__(self, spec: GridSpec):
        self.spec = spec
        n = spec.cells_per_axis
        d = spec.dimension
        self._forward_1d = _forward_diff_block(n)
        self._centered_1d = _centered_diff_block(n)
        eye = sp.identity(n, format="csr")
        if d == 1:
            self._forward = [self._forward_1d]
            self._centered = [(1.0 / (2.0 * spec.spacing)) * self._centered_1d]
        else:
            self._forward = [
                sp.kron(self._forward_1d, eye, format="csr"),
                sp.kron(eye, self._forward_1d, format="csr"),
            ]
            self._centered = [
                (1.0 / (2.0 * spec.spacing)) * sp.kron(self._centered_1d, eye, format="csr"),
                (1.0 / (2.0 * spec.spacing)) * sp.kron(eye, self._centered_1d, format="csr"),
            ]
        ident = np.zeros((d, d) + tuple(n + 2 for _ in range(d)))
        for k in range(d):
            ident[k, k] = 1.0
        self.laplacian = self.divergence_form_matrix(ident, _check_symmetry=False)
        try:
            self._neg_lap_lu = splu(sp.csc_matrix(-self.laplacian))
        except RuntimeError as exc:  # pragma: no cover - assembly bug guard
            raise RuntimeError(f"factorization of -Delta_h failed: {exc}") from exc

    # -- basic checks -------------------------------------------------------

    def _check_field(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if u.shape != (self.spec.n_nodes,):
            raise ValueError(
                f"field has shape {u.shape}, expected ({self.spec.n_nodes},) "
                f"for a {self.spec.dimension}-d grid with n={self.spec.cells_per_axis}"
            )
        return u

    # -- Laplacian and Poisson ---------------------------------------------

    def laplacian_apply(self, u: np.ndarray) -> np.ndarray:
        """Apply Delta_h (negative semidefinite) to a field."""
        return self.laplacian @ self._check_field(u)

    def poisson_solve(self, f) -> np.ndarray:
        """Solve -Delta_h z = f.

        Accepts a single field of shape (n_nodes,) or a matrix of
        right-hand sides with shape (n_nodes, m), solved column-wise.
        """
        f = np.asarray(f, dtype=float)
        if f.shape[0] != self.spec.n_nodes or f.ndim > 2:
            raise ValueError(f"right-hand side has shape {f.shape}")
        return self._neg_lap_lu.solve(f)

    # -- norms ---------------------------------------------------------------

    def l2_inner(self, u: np.ndarray, v: np.ndarray) -> float:
        w = self.spec.spacing**self.spec.dimension
        return w * float(np.dot(u, v))

    def lp_norm(self, u: np.ndarray, p: float) -> float:
        """Discrete L^p norm (h^d sum |u_i|^p)^(1/p), p >= 1."""
        if p < 1:
            raise ValueError(f"p must be >= 1, got {p}")
        u = self._check_field(u)
        w = self.spec.spacing**self.spec.dimension
        return float((w * np.sum(np.abs(u) ** p)) ** (1.0 / p))

    def inner_h_minus1(self, u: np.ndarray, v: np.ndarray) -> float:
        """Bilinear form h^d u . (-Delta_h)^{-1} v inducing the H^-1 norm."""
        u = self._check_field(u)
        v = self._check_field(v)
        w = self.spec.spacing**self.spec.dimension
        return w * float(np.dot(u, self._neg_lap_lu.solve(v)))

    def h_minus1_norm(self, u: np.ndarray) -> float:
        return float(self.h_minus1_norms(self._check_field(u)[None, :])[0])

    def h_minus1_norms(self, rows: np.ndarray) -> np.ndarray:
        """Row-wise H^-1 norms of a (m, n_nodes) stack of fields.

        Reductions run over the contiguous last axis so a row's value is
        bitwise independent of how many rows accompany it.
        """
        rows = np.ascontiguousarray(np.atleast_2d(np.asarray(rows, dtype=float)))
        w = self.spec.spacing**self.spec.dimension
        sol = self._neg_lap_lu.solve(rows.T)
        vals = w * np.sum(rows * sol.T, axis=1)
        return np.sqrt(np.maximum(vals, 0.0))

    # -- first-order operators -----------------------------------------------

    def gradient(self, u: np.ndarray) -> list:
        """Centered-difference gradient, one interior-node array per axis."""
        u = self._check_field(u)
        return [c @ u for c in self._centered]

    def forward_differences(self, u: np.ndarray) -> list:
        """Forward differences on faces (boundary faces included), per axis."""
        u = self._check_field(u)
        h = self.spec.spacing
        return [(g @ u) / h for g in self._forward]

    def h1_seminorm(self, u: np.ndarray) -> float:
        """Forward-difference |grad u|_2; satisfies |grad u|_2^2 = h^d u.(-Delta_h u)."""
        return float(self.h1_seminorms(self._check_field(u)[None, :])[0])

    def h1_seminorms(self, rows: np.ndarray) -> np.ndarray:
        """Row-wise forward-difference H^1 seminorms of a (m, n_nodes) stack.

        Reductions run over the contiguous last axis so a row's value is
        bitwise independent of how many rows accompany it.
        """
        rows = np.ascontiguousarray(np.atleast_2d(np.asarray(rows, dtype=float)))
        w = self.spec.spacing**self.spec.dimension
        h = self.spec.spacing
        total = np.zeros(rows.shape[0])
        for g in self._forward:
            df = np.ascontiguousarray((g @ rows.T).T) / h
            total += np.sum(df * df, axis=1)
        return np.sqrt(w * total)

    # -- divergence form ------------------------------------------------------

    def divergence_form_matrix(self, a_closed: np.ndarray, _check_symmetry: bool = True) -> sp.csr_matrix:
        """Assemble div(A grad .) for nodal coefficients A on the closed grid.

        Args:
            a_closed: array of shape (d, d) + closed_shape with A_kj sampled
                at all nodes including the boundary; must be symmetric in
                (k, j) at every node to 1e-12.

        The diagonal terms D_k(A_kk D_k u) use face-averaged coefficients
        (exactly the Laplacian stencil when A = I); the off-diagonal terms
        use symmetrized centered differences, so the result is symmetric.
        """
        n = self.spec.cells_per_axis
        d = self.spec.dimension
        h = self.spec.spacing
        closed_shape = tuple(n + 2 for _ in range(d))
        a_closed = np.asarray(a_closed, dtype=float)
        if a_closed.shape != (d, d) + closed_shape:
            raise ValueError(
                f"coefficient array has shape {a_closed.shape}, expected {(d, d) + closed_shape}"
            )
        if _check_symmetry and d > 1:
            asym = np.max(np.abs(a_closed[0, 1] - a_closed[1, 0]))
            scale = max(1.0, float(np.max(np.abs(a_closed))))
            if asym > 1e-12 * scale:
                raise ValueError(f"coefficient tensor is not symmetric: max |A_01 - A_10| = {asym}")

        terms = []
        for k in range(d):
            w_face = self._face_average(a_closed[k, k], axis=k)
            g = self._forward[k]
            terms.append((-1.0 / (h * h)) * (g.T @ sp.diags(w_face.ravel()) @ g))
        if d == 2:
            a01 = a_closed[0, 1][1:-1, 1:-1].ravel()
            p = self._centered[0] @ sp.diags(a01) @ self._centered[1]
            terms.append((p + p.T).tocsr())
        out = terms[0]
        for t in terms[1:]:
            out = out + t
        return out.tocsr()

    def _face_average(self, a_kk: np.ndarray, axis: int) -> np.ndarray:
        # Average the closed-grid samples of A_kk onto the (n+1) faces along
        # `axis`, restricted to interior positions of the other axes.
        if self.spec.dimension == 1:
            return 0.5 * (a_kk[:-1] + a_kk[1:])
        if axis == 0:
            return 0.5 * (a_kk[:-1, 1:-1] + a_kk[1:, 1:-1])
        return 0.5 * (a_kk[1:-1, :-1] + a_kk[1:-1, 1:])

    def divergence_form_apply(self, a_closed: np.ndarray, u: np.ndarray) -> np.ndarray:
        """Apply div(A grad .) to a field; assembles the matrix on each call.

        Hot loops should hold the matrix from divergence_form_matrix instead.
        """
        return self.divergence_form_matrix(a_closed) @ self._check_field(u)

    # -- spectrum --------------------------------------------------------------

    def eigenvalue(self, k) -> float:
        """Eigenvalue of -Delta_h for mode index k (int in 1-D, pair in 2-D)."""
        h = self.spec.spacing
        n = self.spec.cells_per_axis
        ks = (k,) if np.isscalar(k) else tuple(k)
        if len(ks) != self.spec.dimension:
            raise ValueError(f"mode index {k} does not match dimension {self.spec.dimension}")
        total = 0.0
        for ka in ks:
            if not 1 <= ka <= n:
                raise ValueError(f"mode index {ka} out of range 1..{n}")
            total += (2.0 / (h * h)) * (1.0 - np.cos(ka * np.pi * h))
        return float(total)

    @property
    def mu1(self) -> float:
        """Smallest eigenvalue of -Delta_h (discrete Poincare constant is 1/sqrt(mu1))."""
        return self.eigenvalue((1,) * self.spec.dimension)

    def eigenmode(self, k) -> np.ndarray:
        """Product-of-sines eigenvector for mode index k, as a flat field."""
        h = self.spec.spacing
        ks = (k,) if np.isscalar(k) else tuple(k)
        if len(ks) != self.spec.dimension:
            raise ValueError(f"mode index {k} does not match dimension {self.spec.dimension}")
        axes = [np.sin(ka * np.pi * self.spec.interior_axis()) for ka in ks]
        if self.spec.dimension == 1:
            return axes[0].copy()
        return np.multiply.outer(axes[0], axes[1]).ravel()
