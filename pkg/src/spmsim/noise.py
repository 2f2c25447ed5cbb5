"""Gradient transport noise: coefficient fields and the admissibility gate.

The noise sum_i (b_i . grad X) dbeta_i enters the scheme through the
interior nodal samples of the N vector fields b_i : [0,1]^d -> R^d and
through the Ito correction 1/2 div(A grad X) with A_kj = sum_i b_ik b_ij.
Well-posedness of the regularized equation requires

    Ctilde gamma(b) + |b|_inf^2 <= 2 nu,
    gamma(b) = max_{k,j} ( |A_kj|_inf + |D_k A_kj|_inf ),

where Ctilde is the operator norm of u |-> (-Delta_h)^{-1} div(A grad u)
on L^2 divided by gamma (estimated by power iteration on the discrete
operator).  The report also carries

    C1 = nu - (Ctilde gamma + |b|_inf^2) / 2,
    C2 = |(div b_j)_j|_inf^2,

the constants driving the energy and extinction estimates.  The case
nu = 0 forces b identically zero, so nonpositive viscosity with nonzero
fields is rejected outright.

Fields are sampled on the closed grid (boundary included); sup norms are
exact maxima over the stored samples, and derivatives of the samples use
centered differences with second-order one-sided stencils at the boundary.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import AdmissibilityError
from .grid import GridOperators, GridSpec
from . import rng as _rng

__all__ = [
    "VectorFieldSet",
    "AdmissibilityReport",
    "CtildeEstimate",
    "build_fields",
    "gamma_of_b",
    "estimate_ctilde",
    "check_admissibility",
    "stratonovich_correction",
    "noise_increment",
    "brownian_increments",
]


def _diff_closed(values: np.ndarray, axis: int, h: float) -> np.ndarray:
    """Differentiate closed-grid samples along one axis.

    Centered differences at interior positions, second-order one-sided
    stencils at the two boundary positions.
    """
    g = np.moveaxis(values, axis, 0)
    out = np.empty_like(g)
    out[1:-1] = (g[2:] - g[:-2]) / (2.0 * h)
    out[0] = (-3.0 * g[0] + 4.0 * g[1] - g[2]) / (2.0 * h)
    out[-1] = (3.0 * g[-1] - 4.0 * g[-2] + g[-3]) / (2.0 * h)
    return np.moveaxis(out, 0, axis)


def _evaluate_component(component, mesh):
    """Evaluate one scalar component spec on the closed mesh.

    Accepts a callable of the coordinate arrays, a scalar constant, or
    ascending polynomial coefficients (flat for 1-D, nested rows c[i][j]
    multiplying xi_0^i xi_1^j for 2-D).
    """
    if callable(component):
        vals = component(*mesh)
        return np.broadcast_to(np.asarray(vals, dtype=float), mesh[0].shape).copy()
    if np.isscalar(component):
        return np.full(mesh[0].shape, float(component))
    coeffs = np.asarray(component, dtype=float)
    if len(mesh) == 1:
        if coeffs.ndim != 1:
            raise ValueError("1-d polynomial coefficients must be a flat ascending list")
        return np.polynomial.polynomial.polyval(mesh[0], coeffs)
    if coeffs.ndim != 2:
        raise ValueError("2-d polynomial coefficients must be a nested list c[i][j]")
    return np.polynomial.polynomial.polyval2d(mesh[0], mesh[1], coeffs)


class VectorFieldSet:
    """Nodal samples of the noise fields and everything derived from them.

    Attributes:
        spec: the grid the samples live on.
        b_closed: (N, d) + closed_shape samples of b_ik (boundary included).
        a_closed: (d, d) + closed_shape samples of A = b^T b.
        da_closed: entry [k, j] holds D_k A_kj on the closed grid.
        div_b_closed: (N,) + closed_shape samples of div b_i.
    """

    def __init__(self, spec: GridSpec, b_closed: np.ndarray):
        d = spec.dimension
        closed_shape = tuple(spec.cells_per_axis + 2 for _ in range(d))
        b_closed = np.asarray(b_closed, dtype=float)
        if b_closed.ndim != 2 + d or b_closed.shape[1] != d or b_closed.shape[2:] != closed_shape:
            raise ValueError(
                f"field samples have shape {b_closed.shape}, expected (N, {d}) + {closed_shape}"
            )
        if not np.all(np.isfinite(b_closed)):
            raise ValueError("field samples must be finite")
        self.spec = spec
        self.b_closed = b_closed
        h = spec.spacing

        self.a_closed = np.einsum("ik...,ij...->kj...", b_closed, b_closed)
        self.da_closed = np.empty_like(self.a_closed)
        for k in range(d):
            for j in range(d):
                self.da_closed[k, j] = _diff_closed(self.a_closed[k, j], k, h)
        self.div_b_closed = np.zeros((b_closed.shape[0],) + closed_shape)
        for i in range(b_closed.shape[0]):
            for k in range(d):
                self.div_b_closed[i] += _diff_closed(b_closed[i, k], k, h)

        flat = (-1,)
        self.a_sup = np.max(np.abs(self.a_closed.reshape((d, d) + flat)), axis=-1)
        self.da_sup = np.max(np.abs(self.da_closed.reshape((d, d) + flat)), axis=-1)
        # |b|_inf: sup over nodes of the Frobenius norm of the N x d matrix b(xi)
        if b_closed.shape[0]:
            frob = np.sqrt(np.einsum("ik...,ik...->...", b_closed, b_closed))
            self.b_sup = float(np.max(frob))
            divnorm = np.sqrt(np.einsum("i...,i...->...", self.div_b_closed, self.div_b_closed))
            self.div_b_sup = float(np.max(divnorm))
        else:
            self.b_sup = 0.0
            self.div_b_sup = 0.0

        interior = (slice(None), slice(None)) + (slice(1, -1),) * d
        self._b_interior = b_closed[interior].reshape(b_closed.shape[0], d, spec.n_nodes)
        self._div_matrix = None

    @property
    def n_components(self) -> int:
        return self.b_closed.shape[0]

    @property
    def gamma(self) -> float:
        return float(np.max(self.a_sup + self.da_sup)) if self.a_sup.size else 0.0

    @property
    def b_interior(self) -> np.ndarray:
        """(N, d, n_nodes) interior samples used by the noise increment."""
        return self._b_interior

    def divergence_matrix(self, ops: GridOperators) -> sp.csr_matrix:
        """div(A grad .) assembled once and cached on the field set."""
        if ops.spec != self.spec:
            raise ValueError("operators were built for a different grid")
        if self._div_matrix is None:
            if self.n_components == 0:
                n = self.spec.n_nodes
                self._div_matrix = sp.csr_matrix((n, n))
            else:
                self._div_matrix = ops.divergence_form_matrix(self.a_closed)
        return self._div_matrix


def build_fields(components, spec: GridSpec) -> VectorFieldSet:
    """Sample N noise fields on the closed grid.

    Args:
        components: sequence of N entries, one per field b_i; each entry is
            a sequence of d scalar component specs (callable, constant, or
            ascending polynomial coefficients).
        spec: target grid.
    """
    d = spec.dimension
    mesh = spec.closed_mesh()
    closed_shape = mesh[0].shape
    n_fields = len(components)
    b = np.zeros((n_fields, d) + closed_shape)
    for i, entry in enumerate(components):
        if len(entry) != d:
            raise ValueError(f"field {i} has {len(entry)} components, expected {d}")
        for k, comp in enumerate(entry):
            b[i, k] = _evaluate_component(comp, mesh)
    return VectorFieldSet(spec, b)


def gamma_of_b(fields: VectorFieldSet) -> float:
    """gamma(b) = max_{k,j} (|A_kj|_inf + |D_k A_kj|_inf) over stored samples."""
    return fields.gamma


@dataclass(frozen=True)
class CtildeEstimate:
    """Largest singular value of (-Delta_h)^{-1} div(A grad .) divided by gamma."""

    value: float
    iterations: int
    converged: bool


def estimate_ctilde(
    ops: GridOperators,
    fields: VectorFieldSet,
    max_iters: int = 100,
    tol: float = 1e-8,
    seed: int = 0,
) -> CtildeEstimate:
    """Power iteration for Ctilde on the assembled discrete operator.

    Iterates T^* T with T = (-Delta_h)^{-1} M, M = div(A grad .), from a
    seeded random start; stops on relative stagnation of the singular-value
    estimate.  Stagnation without convergence is reported, not fatal.
    """
    gamma = fields.gamma
    if gamma == 0.0:
        return CtildeEstimate(0.0, 0, True)
    m = fields.divergence_matrix(ops)
    gen = _rng.stream(seed, "ctilde-power-iteration")
    v = gen.standard_normal(ops.spec.n_nodes)
    v /= np.linalg.norm(v)
    sigma = 0.0
    for it in range(1, max_iters + 1):
        w = ops.poisson_solve(m @ v)
        sigma_new = float(np.linalg.norm(w))
        z = m @ ops.poisson_solve(w)
        nz = np.linalg.norm(z)
        if nz == 0.0:
            return CtildeEstimate(0.0, it, True)
        v = z / nz
        if sigma > 0.0 and abs(sigma_new - sigma) <= tol * sigma_new:
            return CtildeEstimate(sigma_new / gamma, it, True)
        sigma = sigma_new
    return CtildeEstimate(sigma / gamma, max_iters, False)


@dataclass(frozen=True)
class AdmissibilityReport:
    """Outcome of the noise admissibility check for given viscosity nu."""

    nu: float
    gamma: float
    ctilde: float
    ctilde_converged: bool
    b_sup_sq: float
    lhs: float
    passes: bool
    c1: float
    c2: float

    def to_dict(self) -> dict:
        return {
            "nu": self.nu,
            "gamma": self.gamma,
            "ctilde": self.ctilde,
            "ctilde_converged": self.ctilde_converged,
            "b_sup_sq": self.b_sup_sq,
            "lhs": self.lhs,
            "passes": self.passes,
            "c1": self.c1,
            "c2": self.c2,
        }


def check_admissibility(nu: float, fields: VectorFieldSet, ops: GridOperators) -> AdmissibilityReport:
    """Evaluate Ctilde gamma + |b|_inf^2 <= 2 nu and the derived constants."""
    if nu <= 0.0:
        if fields.b_sup > 0.0:
            raise AdmissibilityError(
                f"nu = {nu} with nonzero noise fields is not admissible: "
                "zero viscosity forces b identically zero"
            )
        raise ValueError(f"viscosity must be positive, got {nu}")
    est = estimate_ctilde(ops, fields)
    gamma = fields.gamma
    b_sup_sq = fields.b_sup**2
    lhs = est.value * gamma + b_sup_sq
    return AdmissibilityReport(
        nu=float(nu),
        gamma=gamma,
        ctilde=est.value,
        ctilde_converged=est.converged,
        b_sup_sq=b_sup_sq,
        lhs=lhs,
        passes=bool(lhs <= 2.0 * nu),
        c1=float(nu - 0.5 * lhs),
        c2=fields.div_b_sup**2,
    )


def stratonovich_correction(ops: GridOperators, fields: VectorFieldSet, u: np.ndarray) -> np.ndarray:
    """The Ito correction field 1/2 div(A grad u)."""
    return 0.5 * (fields.divergence_matrix(ops) @ np.asarray(u, dtype=float))


def noise_increment(ops: GridOperators, fields: VectorFieldSet, u: np.ndarray, dw: np.ndarray) -> np.ndarray:
    """sum_i (b_i . grad u) dW_i with centered interior differences.

    Linear in dw; returns the zero field for N = 0.
    """
    dw = np.asarray(dw, dtype=float)
    if dw.shape != (fields.n_components,):
        raise ValueError(
            f"increment has shape {dw.shape}, expected ({fields.n_components},) "
            "to match the number of noise components"
        )
    if fields.n_components == 0:
        return np.zeros(ops.spec.n_nodes)
    grads = np.stack(ops.gradient(u))
    return np.einsum("i,ikn,kn->n", dw, fields.b_interior, grads)


def brownian_increments(stream: np.random.Generator, n_components: int, dt: float) -> np.ndarray:
    """N independent Gaussian increments with mean 0 and variance dt."""
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    return stream.standard_normal(n_components) * np.sqrt(dt)
