"""Extinction-time statistics for fast-diffusion and sign-nonlinearity runs.

The H^-1 contraction argument gives, for psi(r) = rho |r|^{m-1} r with
m in [0,1) and admissible noise, the survival bound

    P(tau_x > t) <= K_m ||x0||_{-1}^{1-m} / (rho C_m (1-m)(1 - e^{-K_m t})),

with K_m = C2 (1-m)/2 from the admissibility report and C_m the smallest
value of |y|_{1+m}^{1+m} / ||y||_{-1}^{1+m} over nonzero grid functions,
the discrete analogue of the Sobolev-type inequality behind the bound.
The bound requires the dimension condition 1 <= d < 2(1+m)/(1-m); for
m = 0 it imposes d = 1.

Everything here is post-processing over recorded norm series: extinction
times are first crossings of ||X(t)||_{-1} below a threshold, so survival
curves for any threshold at or above the run's absorbing threshold can be
recomputed from a single ensemble.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import GridOperators
from . import rng as _rng

__all__ = [
    "ExtinctionSetup",
    "ExtinctionReport",
    "CmEstimate",
    "dimension_condition",
    "build_setup",
    "estimate_cm",
    "theoretical_bound",
    "survival_curve",
    "supermartingale_check",
    "verify_extinction_bound",
    "extinction_integrand",
]


def dimension_condition(dimension: int, m: float) -> bool:
    """1 <= d < 2(1+m)/(1-m); the m -> 1 limit admits every d."""
    if not 0.0 <= m <= 1.0:
        raise ValueError(f"m must lie in [0, 1], got {m}")
    if m == 1.0:
        return dimension >= 1
    return 1 <= dimension < 2.0 * (1.0 + m) / (1.0 - m)


@dataclass(frozen=True)
class ExtinctionSetup:
    """Constants entering the survival bound for one experiment.

    k_m is exactly c2 * (1-m) / 2 for the run's admissibility constant C2;
    c_m is the safety-factored discrete constant used in verdicts.
    """

    m: float
    rho: float
    k_m: float
    c_m: float
    dimension_ok: bool
    extinction_eps: float

    def __post_init__(self):
        if not 0.0 <= self.m < 1.0:
            raise ValueError(f"m must lie in [0, 1), got {self.m}")
        if self.rho <= 0:
            raise ValueError(f"rho must be positive, got {self.rho}")
        if self.k_m < 0:
            raise ValueError(f"K_m must be nonnegative, got {self.k_m}")
        if self.c_m <= 0:
            raise ValueError(f"C_m must be positive, got {self.c_m}")
        if self.extinction_eps < 0:
            raise ValueError("extinction_eps must be nonnegative")

    @property
    def c2(self) -> float:
        return 2.0 * self.k_m / (1.0 - self.m)


def build_setup(
    m: float, rho: float, c2: float, c_m: float, dimension: int, x0_hminus1: float,
    extinction_eps: float | None = None,
) -> ExtinctionSetup:
    """Assemble the setup; rejects dimensions outside the validity range."""
    ok = dimension_condition(dimension, m)
    if not ok:
        detail = "m = 0 imposes d = 1" if m == 0.0 else f"d = {dimension} is out of range for m = {m}"
        raise ValueError(
            f"the dimension condition 1 <= d < 2(1+m)/(1-m) fails: {detail}"
        )
    if extinction_eps is None:
        extinction_eps = 1e-8 * x0_hminus1
    return ExtinctionSetup(
        m=m, rho=rho, k_m=c2 * (1.0 - m) / 2.0, c_m=c_m,
        dimension_ok=ok, extinction_eps=extinction_eps,
    )


@dataclass(frozen=True)
class CmEstimate:
    """Discrete constant inf |y|_{1+m}^{1+m} / ||y||_{-1}^{1+m}.

    raw is the smallest ratio found; safe = 0.9 * raw is what verdicts use,
    so an optimistic search can only make the bound check stricter.
    """

    raw: float
    safe: float
    source: str
    n_evaluated: int


def _ratio_rows(ops: GridOperators, rows: np.ndarray, m: float) -> np.ndarray:
    """|y|_{1+m}^{1+m} / ||y||_{-1}^{1+m} per row, zero-homogeneous by construction.

    Rows are rescaled by a power of two before evaluation, so scaling an
    input by any power of two reproduces the ratio bitwise.
    """
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    amax = np.max(np.abs(rows), axis=1)
    if np.any(amax == 0.0):
        raise ValueError("ratio undefined for the zero field")
    scale = np.exp2(np.floor(np.log2(amax)))
    rows = rows / scale[:, None]
    p = 1.0 + m
    w = ops.spec.spacing**ops.spec.dimension
    lp_p = w * np.sum(np.abs(rows) ** p, axis=1)
    hm1 = ops.h_minus1_norms(rows)
    return lp_p / hm1**p


def estimate_cm(
    ops: GridOperators, m: float, n_random: int = 10_000, n_descent: int = 400, seed: int = 0,
) -> CmEstimate:
    """Search for the smallest ratio over eigenmodes, random fields, and descent.

    The returned value is a true minimum over every field evaluated, so the
    inequality |y|_{1+m}^{1+m} >= raw * ||y||_{-1}^{1+m} holds exactly for
    each of them; raw can only overestimate the infimum, which the 0.9
    safety factor absorbs.
    """
    if not dimension_condition(ops.spec.dimension, m):
        detail = "m = 0 imposes d = 1" if m == 0.0 else f"d = {ops.spec.dimension} is out of range"
        raise ValueError(f"the dimension condition 1 <= d < 2(1+m)/(1-m) fails: {detail}")
    n = ops.spec.cells_per_axis
    d = ops.spec.dimension
    if d == 1:
        modes = [(k,) for k in range(1, n + 1)]
    else:
        modes = [(i, j) for i in range(1, n + 1) for j in range(1, n + 1)]
    best_val = math.inf
    best_field = None
    source = ""
    n_eval = 0
    chunk = max(1, 2_000_000 // ops.spec.n_nodes)
    for lo in range(0, len(modes), chunk):
        block = np.stack([ops.eigenmode(k if d > 1 else k[0]) for k in modes[lo : lo + chunk]])
        vals = _ratio_rows(ops, block, m)
        n_eval += len(vals)
        j = int(np.argmin(vals))
        if vals[j] < best_val:
            best_val = float(vals[j])
            best_field = block[j].copy()
            source = f"eigenmode {modes[lo + j]}"
    gen = _rng.stream(seed, "cm-random-search")
    done = 0
    while done < n_random:
        take = min(chunk, n_random - done)
        block = gen.standard_normal((take, ops.spec.n_nodes))
        vals = _ratio_rows(ops, block, m)
        n_eval += take
        j = int(np.argmin(vals))
        if vals[j] < best_val:
            best_val = float(vals[j])
            best_field = block[j].copy()
            source = "random field"
        done += take
    gen = _rng.stream(seed, "cm-descent")
    y = best_field.copy()
    eta = 0.25
    for it in range(n_descent):
        factor = np.exp(eta * gen.standard_normal(y.size))  # positive: signs preserved
        trial = y * factor
        val = float(_ratio_rows(ops, trial[None, :], m)[0])
        n_eval += 1
        if val < best_val:
            best_val = val
            y = trial
            source = "multiplicative descent"
        else:
            eta *= 0.99
    return CmEstimate(raw=best_val, safe=0.9 * best_val, source=source, n_evaluated=n_eval)


def theoretical_bound(x0_hminus1: float, setup: ExtinctionSetup, t: float) -> float:
    """Survival bound at time t, clamped to [0, 1].

    K_m / (1 - e^{-K_m t}) is evaluated with expm1 and degrades smoothly to
    the K_m = 0 limit 1/t.
    """
    if t <= 0:
        raise ValueError(f"t must be positive, got {t}")
    if x0_hminus1 < 0:
        raise ValueError("||x0||_{-1} must be nonnegative")
    if x0_hminus1 == 0.0:
        return 0.0
    m = setup.m
    if setup.k_m == 0.0:
        rate = 1.0 / t
    else:
        rate = setup.k_m / -math.expm1(-setup.k_m * t)
    value = x0_hminus1 ** (1.0 - m) * rate / (setup.rho * setup.c_m * (1.0 - m))
    return float(min(max(value, 0.0), 1.0))


def _first_crossings(ensemble, extinction_eps: float) -> np.ndarray:
    """First recorded time each path's ||X||_{-1} falls to the threshold (inf if never)."""
    taus = np.full(len(ensemble.paths), np.inf)
    for i, p in enumerate(ensemble.paths):
        below = p.hminus1 <= extinction_eps
        if below.any():
            taus[i] = p.times[int(np.argmax(below))]
    return taus


@dataclass(frozen=True)
class SurvivalCurve:
    times: np.ndarray
    survival: np.ndarray
    stderr: np.ndarray
    n_paths: int


def survival_curve(ensemble, extinction_eps: float, time_grid) -> SurvivalCurve:
    """Empirical P(tau > t) with binomial standard errors.

    Thresholds at or above the run's absorbing threshold are exact: crossing
    happens while the recorded series still evolves.  The curve is
    non-increasing because absorbed paths stay at zero.
    """
    if not ensemble.paths:
        raise ValueError("ensemble has no paths")
    times = np.asarray(time_grid, dtype=float)
    taus = _first_crossings(ensemble, extinction_eps)
    n = taus.size
    surv = (taus[None, :] > times[:, None]).mean(axis=1)
    se = np.sqrt(surv * (1.0 - surv) / n)
    return SurvivalCurve(times=times, survival=surv, stderr=se, n_paths=n)


@dataclass(frozen=True)
class SupermartingaleSeries:
    times: np.ndarray
    values: np.ndarray
    stderr: np.ndarray
    passes: bool


def supermartingale_check(ensemble, m: float, c2: float, time_grid=None) -> SupermartingaleSeries:
    """Monitor M(t) = E (e^{-C2 t / 2} ||X(t)||_{-1})^{1-m} for monotone decay.

    Passes when M(t_{k+1}) <= M(t_k) + 2 (stderr_k + stderr_{k+1}) at every
    consecutive pair of checkpoints.
    """
    if not ensemble.paths:
        raise ValueError("ensemble has no paths")
    rec_times = ensemble.paths[0].times
    if time_grid is None:
        idx = np.arange(rec_times.size)
    else:
        idx = np.unique([int(np.argmin(np.abs(rec_times - t))) for t in np.asarray(time_grid)])
    times = rec_times[idx]
    rows = np.stack([(np.exp(-0.5 * c2 * times) * p.hminus1[idx]) ** (1.0 - m) for p in ensemble.paths])
    values = rows.mean(axis=0)
    if rows.shape[0] > 1:
        se = rows.std(axis=0, ddof=1) / math.sqrt(rows.shape[0])
    else:
        se = np.zeros_like(values)
    gaps = values[1:] - values[:-1]
    allowance = 2.0 * (se[1:] + se[:-1])
    passes = bool(np.all(gaps <= allowance))
    return SupermartingaleSeries(times=times, values=values, stderr=se, passes=passes)


@dataclass(frozen=True)
class ExtinctionReport:
    """Survival statistics against the theoretical bound on one time grid."""

    time_grid: np.ndarray
    empirical_survival: np.ndarray
    survival_stderr: np.ndarray
    theoretical_bound: np.ndarray
    supermartingale: np.ndarray
    supermartingale_stderr: np.ndarray
    verdicts: dict

    def to_dict(self) -> dict:
        return {
            "time_grid": [float(t) for t in self.time_grid],
            "empirical_survival": [float(v) for v in self.empirical_survival],
            "survival_stderr": [float(v) for v in self.survival_stderr],
            "theoretical_bound": [float(v) for v in self.theoretical_bound],
            "supermartingale": [float(v) for v in self.supermartingale],
            "supermartingale_stderr": [float(v) for v in self.supermartingale_stderr],
            "verdicts": dict(self.verdicts),
        }


def verify_extinction_bound(ensemble, setup: ExtinctionSetup, x0_hminus1: float) -> ExtinctionReport:
    """Compare empirical survival with the bound wherever the bound is informative.

    The bound verdict passes iff survival(t) <= bound(t) + 3 stderr(t) at
    every recorded t > 0 with bound(t) < 1; instants with bound >= 1 are
    vacuous, and a grid that is vacuous everywhere is flagged uninformative.
    """
    if not setup.dimension_ok:
        raise ValueError("the dimension condition 1 <= d < 2(1+m)/(1-m) fails")
    rec_times = ensemble.paths[0].times
    positive = rec_times > 0.0
    times = rec_times[positive]
    curve = survival_curve(ensemble, setup.extinction_eps, times)
    bound = np.array([theoretical_bound(x0_hminus1, setup, t) for t in times])
    sm = supermartingale_check(ensemble, setup.m, setup.c2)
    informative = bound < 1.0
    ok = np.all(curve.survival[informative] <= bound[informative] + 3.0 * curve.stderr[informative])
    taus = _first_crossings(ensemble, setup.extinction_eps)
    verdicts = {
        "bound": bool(ok),
        "supermartingale": bool(sm.passes),
        "extinction_observed": bool(np.isfinite(taus).any()),
        "informative": bool(informative.any()),
        "extinct_fraction": float(np.isfinite(taus).mean()),
    }
    return ExtinctionReport(
        time_grid=times,
        empirical_survival=curve.survival,
        survival_stderr=curve.stderr,
        theoretical_bound=bound,
        supermartingale=sm.values[positive],
        supermartingale_stderr=sm.stderr[positive],
        verdicts=verdicts,
    )


def extinction_integrand(path, setup: ExtinctionSetup, t_end: float) -> np.ndarray:
    """e^{K_m (t_end - s)} ||X(s)||_{-1}^{-m-1} |X(s)|_{1+m}^{1+m} at recorded s <= t_end.

    The integrand of the drift term in the H^-1 contraction estimate;
    nonnegative wherever ||X||_{-1} > 0 and set to zero after absorption.
    """
    mask = path.times <= t_end
    s = path.times[mask]
    hm1 = path.hminus1[mask]
    lp = path.l1pm[mask] ** (1.0 + setup.m)
    out = np.zeros_like(s)
    alive = hm1 > 0.0
    out[alive] = np.exp(setup.k_m * (t_end - s[alive])) * hm1[alive] ** (-setup.m - 1.0) * lp[alive]
    return out
