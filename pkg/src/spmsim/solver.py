"""Semi-implicit Euler-Maruyama stepping for the regularized equation.

One step solves the implicit drift relation

    X+ - dt [ nu Delta_h X+ + Delta_h psi_lambda(X+) + 1/2 div(A grad X+) ]
        = X + sum_i (b_i . grad X) dW_i,

i.e. the Ito form of the Stratonovich gradient-noise equation with the
explicit transport increment on the right and every dissipative term,
including the Ito correction, treated implicitly.  The nonlinear system
is solved by Newton iteration with the exact Jacobian

    J = I - dt [ nu Delta_h + Delta_h diag(psi_lambda') + 1/2 div(A grad .) ],

refreshed at every iteration (an optional freeze after iteration 3 exists
for experiments), converged when the H^-1 norm of the residual drops
below newton_tol.  Paths are absorbed at zero: once ||X||_{-1} falls to
extinction_eps the state is pinned to exact zeros and never reactivates.

Ensembles are driven by counter-based streams keyed (seed, path, step),
so a path's Brownian increments depend only on its index, never on the
batch composition, the lambda value, or the execution order.  Internally
all paths of an ensemble are stepped in lockstep with the per-path
tridiagonal Newton systems merged into one banded solve (d = 1); Newton
updates are masked per path after convergence, which keeps trajectories
bitwise identical whether a path runs alone or inside a batch.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.linalg import solve_banded
from scipy.sparse.linalg import splu

from .errors import MonteCarloError, PathError, StepError
from .grid import GridOperators, GridSpec
from .monotone import yosida_with_derivative
from .noise import VectorFieldSet, brownian_increments
from . import rng as _rng

__all__ = [
    "SolverConfig",
    "SimulationPath",
    "Ensemble",
    "CauchyReport",
    "step",
    "simulate_path",
    "monte_carlo",
    "yosida_continuation",
]

_SERIES = ("l2", "hminus1", "l1pm", "h1semi", "cumulative_h1")


@dataclass(frozen=True)
class SolverConfig:
    """Time discretization and Newton controls.

    Attributes:
        dt: time step (> 0).
        t_end: final time; the run takes ceil(t_end / dt) steps.
        lam: Yosida regularization parameter lambda (> 0).
        newton_tol: H^-1 norm of the step residual at convergence.
        newton_max_iters: Newton budget per step before the step fails.
        record_every: record norms every this many steps (plus t=0 and
            the final step).
        extinction_eps: absolute absorbing threshold on ||X||_{-1};
            0 pins only an exactly zero state.
        store_snapshots: keep the state at recorded instants.
        freeze_jacobian_after: refresh the Jacobian only up to this Newton
            iteration (None refreshes every iteration).
    """

    dt: float
    t_end: float
    lam: float
    newton_tol: float = 1e-10
    newton_max_iters: int = 50
    record_every: int = 1
    extinction_eps: float = 0.0
    store_snapshots: bool = False
    freeze_jacobian_after: int | None = None

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.t_end < self.dt:
            raise ValueError(f"t_end must be at least dt, got {self.t_end}")
        if self.lam <= 0:
            raise ValueError(f"lam must be positive, got {self.lam}")
        if self.newton_tol <= 0:
            raise ValueError("newton_tol must be positive")
        if self.newton_max_iters < 1:
            raise ValueError("newton_max_iters must be >= 1")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")
        if self.extinction_eps < 0:
            raise ValueError("extinction_eps must be >= 0")

    @property
    def n_steps(self) -> int:
        ratio = self.t_end / self.dt
        nearest = round(ratio)
        if abs(ratio - nearest) < 1e-9 and nearest >= 1:
            return int(nearest)
        return int(math.ceil(ratio))


@dataclass
class SimulationPath:
    """Recorded norm series of one sample path.

    cumulative_h1 is the trapezoidal running integral of |grad X|_2^2
    accumulated at every step regardless of record_every; l1pm is the
    L^{1+m} norm for the graph's growth exponent m.
    """

    times: np.ndarray
    l2: np.ndarray
    hminus1: np.ndarray
    l1pm: np.ndarray
    h1semi: np.ndarray
    cumulative_h1: np.ndarray
    extinction_time: float | None
    seed: int
    path_index: int
    snapshots: list | None = None

    def series(self, name: str) -> np.ndarray:
        if name not in _SERIES:
            raise KeyError(f"unknown series {name!r}, expected one of {_SERIES}")
        return getattr(self, name)


@dataclass
class Ensemble:
    """A Monte Carlo ensemble with per-series mean and standard error attached."""

    times: np.ndarray
    paths: list
    mean: dict
    stderr: dict
    failures: list
    seed: int
    n_paths: int

    def series_rows(self, name: str) -> np.ndarray:
        """Stack one series across paths into a (n_paths, n_recorded) matrix."""
        return np.stack([p.series(name) for p in self.paths])


@dataclass(frozen=True)
class CauchyReport:
    """Coupled continuation diagnostic D_k = E sup_t ||X_{l_k} - X_{l_{k+1}}||_{-1}^2."""

    lambdas: np.ndarray
    d_sup_sq: np.ndarray
    stderr: np.ndarray
    ratios: np.ndarray
    n_paths: int
    seed: int


class _Engine:
    """Precomputed operators for lockstep stepping of R rows.

    Each row carries its own lambda (rows of a coupled continuation run
    differ only in lambda); the drift matrices are shared.
    """

    def __init__(self, ops, fields, graph, nu, row_lams):
        self.ops = ops
        self.fields = fields
        self.graph = graph
        self.nu = nu
        self.row_lams = np.asarray(row_lams, dtype=float)
        self.lam_col = self.row_lams[:, None]
        lap = ops.laplacian
        self.drift = (nu * lap + 0.5 * fields.divergence_matrix(ops)).tocsr()
        self.lap = lap
        if ops.spec.dimension == 1:
            self._dd = self.drift.diagonal()
            self._du = self.drift.diagonal(1)
            self._dl = self.drift.diagonal(-1)
            self._ld = lap.diagonal()
            self._lu = lap.diagonal(1)
            self._ll = lap.diagonal(-1)
        self._eye = sp.identity(ops.spec.n_nodes, format="csr")

    def noise_increments(self, x_rows, dw_rows):
        # fixed loop order over the tiny (component, axis) dims keeps the
        # accumulation bitwise independent of batch layout
        if self.fields.n_components == 0:
            return np.zeros_like(x_rows)
        grads = [np.ascontiguousarray((c @ x_rows.T).T) for c in self.ops._centered]  # (R, n) each
        out = np.zeros_like(x_rows)
        for i in range(self.fields.n_components):
            acc = np.zeros_like(x_rows)
            for k, g in enumerate(grads):
                acc += self.fields.b_interior[i, k][None, :] * g
            out += dw_rows[:, i][:, None] * acc
        return out

    def _solve_newton_1d(self, dpsi, f_rows, dt):
        r, n = f_rows.shape
        diag = 1.0 - dt * (self._dd[None, :] + self._ld[None, :] * dpsi)
        upper = np.zeros((r, n))
        lower = np.zeros((r, n))
        upper[:, 1:] = -dt * (self._du[None, :] + self._lu[None, :] * dpsi[:, 1:])
        lower[:, : n - 1] = -dt * (self._dl[None, :] + self._ll[None, :] * dpsi[:, : n - 1])
        ab = np.empty((3, r * n))
        ab[0] = upper.ravel()
        ab[1] = diag.ravel()
        ab[2] = lower.ravel()
        sol = solve_banded(
            (1, 1), ab, f_rows.ravel(), overwrite_ab=True, overwrite_b=False, check_finite=False
        )
        return sol.reshape(r, n)

    def _solve_newton_2d(self, dpsi, f_rows, dt, lam_rows):
        out = np.empty_like(f_rows)
        for i in range(f_rows.shape[0]):
            jac = self._eye - dt * (self.drift + self.lap @ sp.diags(dpsi[i]))
            out[i] = splu(jac.tocsc()).solve(f_rows[i])
        return out

    def _residual(self, y, rhs, dt, lam_rows):
        psi, dpsi = yosida_with_derivative(self.graph, lam_rows, y)
        f = y - dt * ((self.drift @ y.T).T + (self.lap @ psi.T).T) - rhs
        return f, dpsi, self.ops.h_minus1_norms(f)

    def implicit_step(self, rhs, dt, lam_rows, cfg):
        """Solve the implicit relation for every row of rhs.

        Damped Newton: an update is accepted per row once the H^-1 residual
        strictly decreases, halving the step otherwise.  Piecewise-linear
        graphs (Sign) need the damping: the generalized Jacobian is blind to
        the kink when every node sits outside the band |r| <= lam*rho, and
        the undamped iteration two-cycles across it.  For smooth graphs the
        full step is accepted immediately and nothing is evaluated twice.

        Returns (solution, converged_mask, iterations, final_residuals,
        residual_trace); rows that exhaust the Newton budget are reported,
        not raised, so callers can retry with a halved step.
        """
        y = rhs.copy()
        r = y.shape[0]
        iters = np.zeros(r, dtype=int)
        f, dpsi, res = self._residual(y, rhs, dt, lam_rows)
        trace = [res.copy()]
        converged = res <= cfg.newton_tol
        dpsi_frozen = None
        for it in range(cfg.newton_max_iters):
            if converged.all():
                break
            act = np.flatnonzero(~converged)
            iters[act] += 1
            if cfg.freeze_jacobian_after is not None and it >= cfg.freeze_jacobian_after:
                if dpsi_frozen is None:
                    dpsi_frozen = dpsi.copy()
                dpsi_step = dpsi_frozen
            else:
                dpsi_step = dpsi
            if self.ops.spec.dimension == 1:
                delta = self._solve_newton_1d(dpsi_step[act], f[act], dt)
            else:
                delta = self._solve_newton_2d(dpsi_step[act], f[act], dt, lam_rows)
            alpha = np.ones(act.size)
            pend = np.arange(act.size)
            while pend.size:
                rows = act[pend]
                yt = y[rows] - alpha[pend, None] * delta[pend]
                ft, dpsi_t, rest = self._residual(yt, rhs[rows], dt, lam_rows[rows])
                ok = (rest < res[rows]) | (rest <= cfg.newton_tol) | (alpha[pend] <= 2.0**-30)
                took = pend[ok]
                y[act[took]] = yt[ok]
                f[act[took]] = ft[ok]
                dpsi[act[took]] = dpsi_t[ok]
                res[act[took]] = rest[ok]
                alpha[pend[~ok]] *= 0.5
                pend = pend[~ok]
            trace.append(res.copy())
            converged = res <= cfg.newton_tol
        return y, converged, iters, res, trace

    def step_rows(self, x_rows, dw_rows, dt, cfg):
        """One time step for all rows: explicit noise, implicit drift.

        Failed rows are retried once as two half steps sharing the split
        increment dW/2 + dW/2; rows still failing are returned in the
        fail mask with their residual traces.
        """
        rhs = x_rows + self.noise_increments(x_rows, dw_rows)
        y, converged, _, _, trace = self.implicit_step(rhs, dt, self.lam_col, cfg)
        if converged.all():
            return y, np.zeros(x_rows.shape[0], dtype=bool), trace
        bad = ~converged
        xb = x_rows[bad]
        dwb = 0.5 * dw_rows[bad]
        lamb = self.lam_col[bad]
        rhs1 = xb + self.noise_increments(xb, dwb)
        y1, conv1, _, _, _ = self.implicit_step(rhs1, 0.5 * dt, lamb, cfg)
        rhs2 = y1 + self.noise_increments(y1, dwb)
        y2, conv2, _, _, _ = self.implicit_step(rhs2, 0.5 * dt, lamb, cfg)
        ok = conv1 & conv2
        y[np.flatnonzero(bad)[ok]] = y2[ok]
        fail = np.zeros(x_rows.shape[0], dtype=bool)
        fail[np.flatnonzero(bad)[~ok]] = True
        return y, fail, trace


def _norm_rows(ops, x_rows, p_norm):
    w = ops.spec.spacing**ops.spec.dimension
    x_rows = np.ascontiguousarray(x_rows)
    l2 = np.sqrt(w * np.sum(x_rows * x_rows, axis=1))
    l1pm = (w * np.sum(np.abs(x_rows) ** p_norm, axis=1)) ** (1.0 / p_norm)
    return l2, l1pm


def step(state, dw, cfg: SolverConfig, ops: GridOperators, fields: VectorFieldSet, graph, nu: float):
    """Advance a single state by one step; raises StepError on Newton failure."""
    state = np.asarray(state, dtype=float)
    engine = _Engine(ops, fields, graph, nu, [cfg.lam])
    rhs = state[None, :] + engine.noise_increments(state[None, :], np.asarray(dw, dtype=float)[None, :])
    y, converged, _, res, trace = engine.implicit_step(rhs, cfg.dt, engine.lam_col, cfg)
    if not converged[0]:
        raise StepError(
            f"Newton did not reach tol {cfg.newton_tol} within "
            f"{cfg.newton_max_iters} iterations (last residual {res[0]:.3e})",
            residuals=[float(t[0]) for t in trace],
        )
    return y[0]


class _LockstepRun:
    """Shared driver: advances rows in lockstep, records norms, pins extinct rows."""

    def __init__(self, x0, cfg, ops, fields, graph, nu, seed, row_paths, row_lams):
        self.cfg = cfg
        self.ops = ops
        self.fields = fields
        self.graph = graph
        self.seed = seed
        self.row_paths = list(row_paths)
        self.engine = _Engine(ops, fields, graph, nu, row_lams)
        self.n_rows = len(self.row_paths)
        self.x = np.tile(np.asarray(x0, dtype=float), (self.n_rows, 1))
        self.p_norm = 1.0 + graph.growth_m
        self.alive = np.ones(self.n_rows, dtype=bool)   # not failed
        self.active = np.ones(self.n_rows, dtype=bool)  # not pinned at zero
        self.extinction = np.full(self.n_rows, np.nan)
        self.failures = []
        self.cum_h1 = np.zeros(self.n_rows)
        self.g_sq = self.ops.h1_seminorms(self.x) ** 2
        self.rec_times = []
        self.rec = {name: [] for name in _SERIES}
        self.snapshots = [] if cfg.store_snapshots else None
        self._pin(0.0)
        self._record(0.0)

    def _pin(self, t):
        if not self.active.any():
            return
        idx = np.flatnonzero(self.active)
        hm1 = self.ops.h_minus1_norms(self.x[idx])
        hit = hm1 <= self.cfg.extinction_eps
        if hit.any():
            rows = idx[hit]
            self.x[rows] = 0.0
            self.extinction[rows] = t
            self.active[rows] = False
            self.g_sq[rows] = 0.0

    def _record(self, t):
        self.rec_times.append(t)
        l2, l1pm = _norm_rows(self.ops, self.x, self.p_norm)
        self.rec["l2"].append(l2)
        self.rec["l1pm"].append(l1pm)
        self.rec["hminus1"].append(self.ops.h_minus1_norms(self.x))
        self.rec["h1semi"].append(np.sqrt(self.g_sq))
        self.rec["cumulative_h1"].append(self.cum_h1.copy())
        if self.snapshots is not None:
            self.snapshots.append(self.x.copy())

    def run(self):
        cfg = self.cfg
        n_comp = self.fields.n_components
        row_path_arr = np.asarray(self.row_paths)
        for k in range(1, cfg.n_steps + 1):
            t = k * cfg.dt
            todo = self.alive & self.active
            if todo.any():
                idx = np.flatnonzero(todo)
                dw = np.zeros((len(idx), n_comp))
                if n_comp:
                    live_paths = np.unique(row_path_arr[idx])
                    draws = np.empty((live_paths.size, n_comp))
                    for s, p in enumerate(live_paths):
                        gen = _rng.stream(self.seed, "brownian", int(p), k)
                        draws[s] = brownian_increments(gen, n_comp, cfg.dt)
                    dw = draws[np.searchsorted(live_paths, row_path_arr[idx])]
                sub_engine_lams = self.engine.lam_col[idx]
                rhs = self.x[idx] + self.engine.noise_increments(self.x[idx], dw)
                y, converged, _, _, _ = self.engine.implicit_step(rhs, cfg.dt, sub_engine_lams, cfg)
                if not converged.all():
                    bad = ~converged
                    xb = self.x[idx][bad]
                    dwb = 0.5 * dw[bad]
                    lamb = sub_engine_lams[bad]
                    rhs1 = xb + self.engine.noise_increments(xb, dwb)
                    y1, c1, _, _, _ = self.engine.implicit_step(rhs1, 0.5 * cfg.dt, lamb, cfg)
                    rhs2 = y1 + self.engine.noise_increments(y1, dwb)
                    y2, c2, _, _, _ = self.engine.implicit_step(rhs2, 0.5 * cfg.dt, lamb, cfg)
                    ok = c1 & c2
                    y[np.flatnonzero(bad)[ok]] = y2[ok]
                    still = np.flatnonzero(bad)[~ok]
                    for j in still:
                        row = idx[j]
                        self.alive[row] = False
                        self.failures.append((self.row_paths[row], k))
                y[~self.alive[idx]] = self.x[idx][~self.alive[idx]]
                self.x[idx] = y
                self._pin(t)
            live = self.alive
            g_new = np.zeros(self.n_rows)
            todo_norm = live & self.active
            if todo_norm.any():
                g_new[todo_norm] = self.ops.h1_seminorms(self.x[todo_norm]) ** 2
            self.cum_h1[live] += cfg.dt * 0.5 * (self.g_sq[live] + g_new[live])
            self.g_sq = g_new
            if k % cfg.record_every == 0 or k == cfg.n_steps:
                self._record(t)
            self.after_step(k, t)
        return self

    def after_step(self, k, t):  # hook for coupled diagnostics
        pass

    def build_paths(self):
        times = np.asarray(self.rec_times)
        series = {name: np.stack(vals, axis=1) for name, vals in self.rec.items()}  # (R, n_rec)
        paths = []
        for r in range(self.n_rows):
            if not self.alive[r]:
                paths.append(None)
                continue
            ext = self.extinction[r]
            snaps = None
            if self.snapshots is not None:
                snaps = [s[r].copy() for s in self.snapshots]
            paths.append(
                SimulationPath(
                    times=times,
                    l2=series["l2"][r],
                    hminus1=series["hminus1"][r],
                    l1pm=series["l1pm"][r],
                    h1semi=series["h1semi"][r],
                    cumulative_h1=series["cumulative_h1"][r],
                    extinction_time=None if np.isnan(ext) else float(ext),
                    seed=self.seed,
                    path_index=self.row_paths[r],
                    snapshots=snaps,
                )
            )
        return times, paths


def simulate_path(
    x0, cfg: SolverConfig, ops: GridOperators, fields: VectorFieldSet, graph, nu: float,
    seed: int, path_index: int = 0,
) -> SimulationPath:
    """Run one sample path driven by the stream (seed, path_index)."""
    run = _LockstepRun(x0, cfg, ops, fields, graph, nu, seed, [path_index], [cfg.lam]).run()
    _, paths = run.build_paths()
    if paths[0] is None:
        p, k = run.failures[0]
        raise PathError(f"path {p} aborted at step {k} after the halved-step retry failed", k)
    return paths[0]


def _run_path_block(args):
    x0, cfg, spec, fields, graph, nu, seed, block = args
    ops = GridOperators(spec)  # per-worker factorization, no shared mutable state
    run = _LockstepRun(x0, cfg, ops, fields, graph, nu, seed, block, [cfg.lam] * len(block)).run()
    _, paths = run.build_paths()
    return paths, run.failures


def monte_carlo(
    x0, cfg: SolverConfig, ops: GridOperators, fields: VectorFieldSet, graph, nu: float,
    n_paths: int, seed: int, threads: int = 1,
) -> Ensemble:
    """Run an ensemble of paths with per-path streams (seed, 0..n_paths-1).

    Results do not depend on `threads`; path order and reductions are fixed
    by path index.  Fails if more than 1% of paths abort.
    """
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    indices = list(range(n_paths))
    if threads <= 1 or n_paths == 1:
        run = _LockstepRun(x0, cfg, ops, fields, graph, nu, seed, indices, [cfg.lam] * n_paths).run()
        times, paths = run.build_paths()
        failures = run.failures
    else:
        blocks = [list(b) for b in np.array_split(indices, min(threads, n_paths))]
        jobs = [(np.asarray(x0, float), cfg, ops.spec, fields, graph, nu, seed, b) for b in blocks if b]
        with ThreadPoolExecutor(max_workers=len(jobs)) as pool:
            results = list(pool.map(_run_path_block, jobs))
        paths = [p for block_paths, _ in results for p in block_paths]
        failures = [f for _, block_failures in results for f in block_failures]
        times = next(p for p in paths if p is not None).times
    good = [p for p in paths if p is not None]
    if len(failures) > 0.01 * n_paths:
        raise MonteCarloError(
            f"{len(failures)} of {n_paths} paths failed, above the 1% budget",
            [p for p, _ in failures],
        )
    mean, stderr = {}, {}
    for name in _SERIES:
        rows = np.stack([p.series(name) for p in good])
        mean[name] = rows.mean(axis=0)
        if rows.shape[0] > 1:
            stderr[name] = rows.std(axis=0, ddof=1) / math.sqrt(rows.shape[0])
        else:
            stderr[name] = np.zeros(rows.shape[1])
    return Ensemble(
        times=times, paths=good, mean=mean, stderr=stderr,
        failures=failures, seed=seed, n_paths=n_paths,
    )


class _CoupledRun(_LockstepRun):
    """Lockstep rows (path, lambda_j) tracking sup_t of adjacent-lambda gaps."""

    def __init__(self, x0, cfg, ops, fields, graph, nu, seed, n_paths, lambdas):
        row_paths = [p for p in range(n_paths) for _ in lambdas]
        row_lams = [l for _ in range(n_paths) for l in lambdas]
        self.n_paths_coupled = n_paths
        self.n_lams = len(lambdas)
        self.sup_gap = np.zeros((n_paths, len(lambdas) - 1))
        super().__init__(x0, cfg, ops, fields, graph, nu, seed, row_paths, row_lams)
        self._update_gaps()

    def _update_gaps(self):
        x3 = self.x.reshape(self.n_paths_coupled, self.n_lams, -1)
        diffs = (x3[:, :-1, :] - x3[:, 1:, :]).reshape(-1, self.x.shape[1])
        gaps = self.ops.h_minus1_norms(diffs).reshape(self.n_paths_coupled, self.n_lams - 1)
        np.maximum(self.sup_gap, gaps, out=self.sup_gap)

    def after_step(self, k, t):
        self._update_gaps()


def yosida_continuation(
    x0, cfg: SolverConfig, lambdas, ops: GridOperators, fields: VectorFieldSet, graph, nu: float,
    n_paths: int, seed: int,
) -> CauchyReport:
    """Coupled runs across a decreasing lambda sequence with common noise.

    All lambda values of one path share the same Brownian increments, so
    D_k = E sup_t ||X_{lambda_k} - X_{lambda_{k+1}}||_{-1}^2 isolates the
    regularization error.  The sup is taken over every step (record_every
    is forced to 1 for this diagnostic).
    """
    lambdas = np.asarray(lambdas, dtype=float)
    if lambdas.size < 2:
        raise ValueError("need at least two lambda values")
    if np.any(lambdas <= 0):
        raise ValueError("lambda values must be positive")
    if np.any(np.diff(lambdas) > 0):
        raise ValueError("lambda sequence must be non-increasing")
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    cfg = SolverConfig(
        dt=cfg.dt, t_end=cfg.t_end, lam=cfg.lam, newton_tol=cfg.newton_tol,
        newton_max_iters=cfg.newton_max_iters, record_every=1,
        extinction_eps=cfg.extinction_eps, store_snapshots=False,
        freeze_jacobian_after=cfg.freeze_jacobian_after,
    )
    run = _CoupledRun(x0, cfg, ops, fields, graph, nu, seed, n_paths, lambdas).run()
    bad_paths = {p for p, _ in run.failures}
    keep = np.array([p not in bad_paths for p in range(n_paths)])
    if (~keep).sum() > 0.01 * n_paths:
        raise MonteCarloError(
            f"{(~keep).sum()} of {n_paths} coupled paths failed, above the 1% budget",
            sorted(bad_paths),
        )
    sup_sq = run.sup_gap[keep] ** 2
    d_sup = sup_sq.mean(axis=0)
    if sup_sq.shape[0] > 1:
        se = sup_sq.std(axis=0, ddof=1) / math.sqrt(sup_sq.shape[0])
    else:
        se = np.zeros_like(d_sup)
    ratios = d_sup / (lambdas[:-1] + lambdas[1:])
    return CauchyReport(
        lambdas=lambdas, d_sup_sq=d_sup, stderr=se, ratios=ratios,
        n_paths=int(keep.sum()), seed=seed,
    )
