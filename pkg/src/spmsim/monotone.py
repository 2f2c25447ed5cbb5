"""Maximal monotone graphs and their Yosida calculus.

For a maximal monotone graph psi on R the resolvent and the Yosida
approximation are

    J_lambda(r)   = (I + lambda psi)^{-1}(r),
    psi_lambda(r) = (r - J_lambda(r)) / lambda,

with J_lambda non-expansive, psi_lambda monotone and 1/lambda-Lipschitz,
psi_lambda(r) in psi(J_lambda(r)), and |psi_lambda(r)| <= C (1 + |r|^m)
for the power-type graphs treated here (C = rho, or the slope for the
linear graph).

Graph variants:

    FastDiffusion: psi(r) = rho |r|^{m-1} r, 0 < m < 1  (porous fast diffusion)
    Sign:          psi(r) = rho sign(r), multivalued [-rho, rho] at 0
    Linear:        psi(r) = slope r  (slope 0 gives the pure heat case)
    PowerLaw:      psi(r) = rho |r|^{m-1} r, m >= 1  (testing only)

Resolvents of the power graphs solve y + lambda rho |y|^{m-1} y = r.  The
scalar solve is a sign-reduced bisection: on [0, |r|] directly when the
identity part dominates, and in the substituted variable w = y^m on
[0, |r|^m] when the graph part dominates (only possible for m < 1), which
keeps the residual derivative bounded so the iteration count stays well
under the cap for desk-scale inputs.  m = 1/2 uses the stable quadratic
closed form.  All entry points are vectorized over r (and lambda).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "FastDiffusion",
    "Sign",
    "Linear",
    "PowerLaw",
    "YosidaParams",
    "GrowthReport",
    "resolvent",
    "yosida",
    "yosida_derivative",
    "yosida_with_derivative",
    "minimal_section",
    "growth_check",
]


@dataclass(frozen=True)
class YosidaParams:
    """Tolerances for the scalar resolvent solves.

    scalar_solver_tol is an absolute residual tolerance for |r| <= 1 and
    scales with |r| above that; max_bisection_iters caps the bisection
    (non-convergence within the cap signals misconfigured tolerances).
    """

    scalar_solver_tol: float = 1e-14
    max_bisection_iters: int = 200

    def __post_init__(self):
        if self.scalar_solver_tol <= 0:
            raise ValueError("scalar_solver_tol must be positive")
        if self.max_bisection_iters < 1:
            raise ValueError("max_bisection_iters must be >= 1")


_DEFAULT_PARAMS = YosidaParams()


@dataclass(frozen=True)
class FastDiffusion:
    """psi(r) = rho |r|^{m-1} r with 0 < m < 1."""

    rho: float
    m: float

    def __post_init__(self):
        if self.rho <= 0:
            raise ValueError(f"rho must be positive, got {self.rho}")
        if not 0.0 < self.m < 1.0:
            raise ValueError(f"m must lie in (0, 1), got {self.m}")

    kind = "fast_diffusion"

    @property
    def growth_c(self) -> float:
        return self.rho

    @property
    def growth_m(self) -> float:
        return self.m


@dataclass(frozen=True)
class Sign:
    """psi(r) = rho sign(r), with psi(0) = [-rho, rho]."""

    rho: float

    def __post_init__(self):
        if self.rho <= 0:
            raise ValueError(f"rho must be positive, got {self.rho}")

    kind = "sign"

    @property
    def growth_c(self) -> float:
        return self.rho

    @property
    def growth_m(self) -> float:
        return 0.0


@dataclass(frozen=True)
class Linear:
    """psi(r) = slope r with slope >= 0 (slope 0 switches psi off)."""

    slope: float

    def __post_init__(self):
        if self.slope < 0:
            raise ValueError(f"slope must be >= 0, got {self.slope}")

    kind = "linear"

    @property
    def growth_c(self) -> float:
        return self.slope

    @property
    def growth_m(self) -> float:
        return 1.0


@dataclass(frozen=True)
class PowerLaw:
    """psi(r) = rho |r|^{m-1} r with m >= 1; exercises the m >= 1 code paths in tests."""

    rho: float
    m: float

    def __post_init__(self):
        if self.rho <= 0:
            raise ValueError(f"rho must be positive, got {self.rho}")
        if self.m < 1.0:
            raise ValueError(f"m must be >= 1, got {self.m}")

    kind = "power_law"

    @property
    def growth_c(self) -> float:
        return self.rho

    @property
    def growth_m(self) -> float:
        return self.m


def _as_float_array(x):
    arr = np.asarray(x, dtype=float)
    return arr, arr.ndim == 0


def _check_lambda(lam):
    lam_arr = np.asarray(lam, dtype=float)
    if np.any(lam_arr <= 0.0):
        raise ValueError("lambda must be positive")
    return lam_arr


def _bisect_increasing(eval_fn, hi, tol_res, max_iters):
    """Elementwise bisection of an increasing function on [0, hi].

    Requires eval_fn(0) <= 0 <= eval_fn(hi).  An element converges when its
    residual drops below tol_res or its bracket reaches floating-point
    resolution (no representable midpoint).
    """
    lo = np.zeros_like(hi)
    hi = np.array(hi, dtype=float, copy=True)
    out = np.zeros_like(hi)
    active = np.ones(hi.shape, dtype=bool)
    for _ in range(max_iters):
        mid = 0.5 * (lo + hi)
        val = eval_fn(mid)
        stuck = (mid == lo) | (mid == hi)
        done = active & ((np.abs(val) <= tol_res) | stuck)
        out[done] = mid[done]
        active &= ~done
        if not active.any():
            return out
        go_up = val < 0.0
        lo = np.where(active & go_up, mid, lo)
        hi = np.where(active & ~go_up, mid, hi)
    raise RuntimeError(
        f"resolvent bisection did not converge within {max_iters} iterations "
        "(scalar_solver_tol is likely misconfigured for the input scale)"
    )


def _power_resolvent_abs(q, m, a, params):
    """Solve y + q y^m = a for y >= 0, elementwise; q > 0, m > 0, a >= 0."""
    q = np.broadcast_to(np.asarray(q, dtype=float), a.shape)
    m = np.broadcast_to(np.asarray(m, dtype=float), a.shape)
    out = np.zeros_like(a)
    pos = a > 0.0
    if not pos.any():
        return out
    tol = params.scalar_solver_tol * np.maximum(1.0, a)

    half = pos & (m == 0.5)
    if half.any():
        qh, ah = q[half], a[half]
        s = 2.0 * ah / (qh + np.sqrt(qh * qh + 4.0 * ah))
        out[half] = s * s

    rest = pos & ~half
    if rest.any():
        qr, mr, ar, tr = q[rest], m[rest], a[rest], tol[rest]
        sub = np.zeros_like(ar)
        with np.errstate(over="ignore"):
            graph_dominated = (mr < 1.0) & (qr * ar ** (mr - 1.0) > 1.0)
        if graph_dominated.any():
            qg, mg, ag, tg = (x[graph_dominated] for x in (qr, mr, ar, tr))
            inv_m = 1.0 / mg
            w = _bisect_increasing(
                lambda w: w**inv_m + qg * w - ag, ag**mg, tg, params.max_bisection_iters
            )
            sub[graph_dominated] = w**inv_m
        direct = ~graph_dominated
        if direct.any():
            qd, md, ad, td = (x[direct] for x in (qr, mr, ar, tr))
            sub[direct] = _bisect_increasing(
                lambda y: y + qd * y**md - ad, ad.copy(), td, params.max_bisection_iters
            )
        out[rest] = sub
    return out


def resolvent(graph, lam, r, params: YosidaParams = _DEFAULT_PARAMS):
    """J_lambda(r) = (I + lambda psi)^{-1}(r), vectorized over r (and lambda).

    Odd in r for every variant; satisfies |J(r) - J(s)| <= |r - s| and the
    identity J + lambda psi(J) = r to the residual tolerance in params.
    """
    lam = _check_lambda(lam)
    r, scalar = _as_float_array(r)
    if isinstance(graph, Linear):
        out = r / (1.0 + lam * graph.slope)
    elif isinstance(graph, Sign):
        out = np.sign(r) * np.maximum(np.abs(r) - lam * graph.rho, 0.0)
    elif isinstance(graph, (FastDiffusion, PowerLaw)):
        q = lam * graph.rho
        a = np.abs(r)
        q, a = np.broadcast_arrays(q, a)
        y = _power_resolvent_abs(q, graph.m, np.array(a, dtype=float), params)
        out = np.sign(r) * y
    else:
        raise TypeError(f"unsupported graph type {type(graph).__name__}")
    return float(out) if scalar and np.ndim(out) == 0 else out


def yosida(graph, lam, r, params: YosidaParams = _DEFAULT_PARAMS):
    """psi_lambda(r) = (r - J_lambda(r)) / lambda."""
    value, _ = yosida_with_derivative(graph, lam, r, params)
    return value


def yosida_with_derivative(graph, lam, r, params: YosidaParams = _DEFAULT_PARAMS):
    """Return (psi_lambda(r), psi_lambda'(r)) sharing one resolvent evaluation.

    The derivative comes from the implicit-function closed form
    psi_lambda' = (1 - J') / lambda with J'(r) = 1 / (1 + lambda psi'(J(r))),
    clamped to [0, 1/lambda]; at kinks the 1/lambda limit is used.
    """
    lam = _check_lambda(lam)
    r, scalar = _as_float_array(r)
    inv_lam = 1.0 / lam
    if isinstance(graph, Linear):
        value = graph.slope * r / (1.0 + lam * graph.slope)
        deriv = np.broadcast_to(graph.slope / (1.0 + lam * graph.slope), r.shape).copy()
    elif isinstance(graph, Sign):
        j = np.sign(r) * np.maximum(np.abs(r) - lam * graph.rho, 0.0)
        value = (r - j) * inv_lam
        deriv = np.where(np.abs(r) <= lam * graph.rho, inv_lam, 0.0)
        deriv = np.broadcast_to(deriv, r.shape).copy()
    elif isinstance(graph, (FastDiffusion, PowerLaw)):
        j = resolvent(graph, lam, r, params)
        value = (r - j) * inv_lam
        aj = np.abs(j)
        q = np.broadcast_to(lam * graph.rho, np.shape(value)) if np.ndim(value) else lam * graph.rho
        with np.errstate(divide="ignore", over="ignore"):
            jp = 1.0 / (1.0 + q * graph.m * aj ** (graph.m - 1.0))
        if graph.m < 1.0:
            # psi'(y) -> inf as y -> 0, so J' -> 0 and psi_lambda' -> 1/lambda
            jp = np.where(aj == 0.0, 0.0, jp)
        value = np.asarray(value, dtype=float)
        deriv = (1.0 - jp) * np.broadcast_to(inv_lam, np.shape(jp))
    else:
        raise TypeError(f"unsupported graph type {type(graph).__name__}")
    deriv = np.clip(deriv, 0.0, inv_lam)
    if scalar and np.ndim(value) == 0:
        return float(value), float(deriv)
    return np.asarray(value, dtype=float), np.asarray(deriv, dtype=float)


def yosida_derivative(graph, lam, r, params: YosidaParams = _DEFAULT_PARAMS):
    """psi_lambda'(r), clamped to [0, 1/lambda]."""
    _, deriv = yosida_with_derivative(graph, lam, r, params)
    return deriv


def minimal_section(graph, y):
    """The minimal-norm element psi_degree(y) of psi(y) (0 at the origin for Sign)."""
    y, scalar = _as_float_array(y)
    if isinstance(graph, Linear):
        out = graph.slope * y
    elif isinstance(graph, Sign):
        out = graph.rho * np.sign(y)
    elif isinstance(graph, (FastDiffusion, PowerLaw)):
        ay = np.abs(y)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = graph.rho * ay ** (graph.m - 1.0) * y
        out = np.where(ay == 0.0, 0.0, out)
    else:
        raise TypeError(f"unsupported graph type {type(graph).__name__}")
    return float(out) if scalar and np.ndim(out) == 0 else out


@dataclass(frozen=True)
class GrowthReport:
    """Result of sweeping |psi_lambda(r)| <= C (1 + |r|^m) over (lambda, r) grids."""

    c: float
    m: float
    max_ratio: float
    passes: bool
    worst_lambda: float
    worst_r: float


def growth_check(graph, lambdas, rs, params: YosidaParams = _DEFAULT_PARAMS) -> GrowthReport:
    """Evaluate the uniform growth bound of the Yosida approximation on grids.

    Returns the worst ratio |psi_lambda(r)| / (C (1 + |r|^m)) over the grid
    together with the (lambda, r) attaining it; passes means no violation.
    """
    lambdas = np.asarray(lambdas, dtype=float)
    rs = np.asarray(rs, dtype=float)
    c, m = graph.growth_c, graph.growth_m
    if c == 0.0:
        # psi identically zero (Linear slope 0): bound trivially holds
        return GrowthReport(c, m, 0.0, True, float(lambdas[0]), float(rs[0]))
    ll, rr = np.meshgrid(lambdas, rs, indexing="ij")
    values = yosida(graph, ll, rr, params)
    ratios = np.abs(values) / (c * (1.0 + np.abs(rr) ** m))
    idx = np.unravel_index(int(np.argmax(ratios)), ratios.shape)
    max_ratio = float(ratios[idx])
    return GrowthReport(c, m, max_ratio, max_ratio <= 1.0, float(ll[idx]), float(rr[idx]))
