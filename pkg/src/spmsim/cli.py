"""Experiment runner: one JSON config in, CSV/JSON artifacts out.

A config names an experiment kind (heat_check | fast_diffusion | soc_spde |
sandpile | admissibility | yosida_continuation) and the ingredients the kind
needs: grid, psi graph, noise fields (polynomial coefficients or constants),
viscosity nu, solver controls, and Monte Carlo settings with an explicit
seed.  `run` validates, simulates, and writes a manifest plus series CSVs
and report JSONs into the output directory; `validate` dry-runs the checks
and constants without simulating and emits diagnostics JSON.

Exit codes: 0 success, 2 invalid config, 3 admissibility rejection,
4 numerical failure.  Failures print a machine-readable error JSON line.

Outputs are deterministic: all randomness flows from the config seed
through named streams, floats are written with shortest round-trip repr,
and every CSV has a header and a fixed column order.  Reruns of the same
config produce byte-identical CSVs (the manifest records wall time, so it
alone differs between reruns).

The thread count for Monte Carlo comes from --threads, else the
SPMSIM_THREADS environment variable, else 1; it never affects results.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
import time
from contextlib import contextmanager

import numpy as np

from . import __version__
from .errors import (
    AdmissibilityError,
    ConfigError,
    MonteCarloError,
    PathError,
    SpmsimError,
    StepError,
)
from .extinction import build_setup, estimate_cm, verify_extinction_bound
from .grid import GridOperators, GridSpec
from .monotone import FastDiffusion, Linear, PowerLaw, Sign
from .noise import _evaluate_component, build_fields, check_admissibility
from .sandpile import run_soc
from .solver import SolverConfig, monte_carlo, simulate_path, yosida_continuation

__all__ = ["main"]

KINDS = (
    "heat_check",
    "fast_diffusion",
    "soc_spde",
    "sandpile",
    "admissibility",
    "yosida_continuation",
)

_SERIES = ("l2", "hminus1", "l1pm", "h1semi", "cumulative_h1")
_MISSING = object()


# ---------------------------------------------------------------------------
# config access with dotted-key errors


def _path(parent: str, key: str) -> str:
    return f"{parent}.{key}" if parent else key


@contextmanager
def _reject(key: str):
    """Turn library ValueErrors into ConfigErrors naming the offending key."""
    try:
        yield
    except ValueError as exc:
        raise ConfigError(str(exc), key=key) from exc


def _mapping(cfg: dict, key: str, parent: str, default=_MISSING) -> dict:
    if key not in cfg:
        if default is _MISSING:
            raise ConfigError("required key is missing", key=_path(parent, key))
        return default
    val = cfg[key]
    if not isinstance(val, dict):
        raise ConfigError("expected a JSON object", key=_path(parent, key))
    return val


def _number(cfg: dict, key: str, parent: str, default=_MISSING) -> float:
    if key not in cfg:
        if default is _MISSING:
            raise ConfigError("required key is missing", key=_path(parent, key))
        return default
    val = cfg[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(f"expected a number, got {val!r}", key=_path(parent, key))
    return float(val)


def _integer(cfg: dict, key: str, parent: str, default=_MISSING) -> int:
    if key not in cfg:
        if default is _MISSING:
            raise ConfigError("required key is missing", key=_path(parent, key))
        return default
    val = cfg[key]
    if isinstance(val, bool) or not isinstance(val, int):
        raise ConfigError(f"expected an integer, got {val!r}", key=_path(parent, key))
    return val


def _string(cfg: dict, key: str, parent: str) -> str:
    if key not in cfg:
        raise ConfigError("required key is missing", key=_path(parent, key))
    val = cfg[key]
    if not isinstance(val, str):
        raise ConfigError(f"expected a string, got {val!r}", key=_path(parent, key))
    return val


def _load_config(path: str) -> tuple:
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from exc
    try:
        cfg = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    return cfg, raw


# ---------------------------------------------------------------------------
# builders shared by run and validate


def _build_grid(cfg: dict) -> GridSpec:
    g = _mapping(cfg, "grid", "")
    dimension = _integer(g, "dimension", "grid")
    cells = _integer(g, "cells_per_axis", "grid")
    with _reject("grid"):
        return GridSpec(dimension=dimension, cells_per_axis=cells)


def _build_graph(cfg: dict, kind: str):
    if "psi" not in cfg:
        if kind == "heat_check":
            return Linear(0.0)
        raise ConfigError("required key is missing", key="psi")
    psi = _mapping(cfg, "psi", "")
    typ = _string(psi, "type", "psi")
    with _reject("psi"):
        if typ == "fast_diffusion":
            return FastDiffusion(rho=_number(psi, "rho", "psi"), m=_number(psi, "m", "psi"))
        if typ == "sign":
            return Sign(rho=_number(psi, "rho", "psi"))
        if typ == "linear":
            return Linear(slope=_number(psi, "slope", "psi"))
        if typ == "power_law":
            return PowerLaw(rho=_number(psi, "rho", "psi"), m=_number(psi, "m", "psi"))
    raise ConfigError(
        f"unknown type {typ!r}, expected fast_diffusion | sign | linear | power_law",
        key="psi.type",
    )


def _build_noise(cfg: dict, spec: GridSpec):
    components = []
    if "noise" in cfg:
        noise = _mapping(cfg, "noise", "")
        components = noise.get("fields", [])
        if not isinstance(components, list):
            raise ConfigError("expected a list of field entries", key="noise.fields")
    with _reject("noise.fields"):
        return build_fields(components, spec)


def _build_x0(cfg: dict, ops: GridOperators) -> np.ndarray:
    x0 = _mapping(cfg, "x0", "")
    typ = _string(x0, "type", "x0")
    amplitude = _number(x0, "amplitude", "x0", default=1.0)
    spec = ops.spec
    if typ == "eigenmode":
        k = x0.get("k", 1)
        with _reject("x0.k"):
            mode = ops.eigenmode(k if np.isscalar(k) else tuple(k))
        return amplitude * mode
    if typ == "sine_squared":
        k = _integer(x0, "k", "x0", default=1)
        out = np.full(spec.shape, amplitude, dtype=float)
        for xi in spec.interior_mesh():
            out = out * np.sin(k * np.pi * xi) ** 2
        return out.reshape(-1)
    if typ == "polynomial":
        if "coeffs" not in x0:
            raise ConfigError("required key is missing", key="x0.coeffs")
        with _reject("x0.coeffs"):
            vals = _evaluate_component(x0["coeffs"], spec.interior_mesh())
        return np.asarray(vals, dtype=float).reshape(-1)
    raise ConfigError(
        f"unknown type {typ!r}, expected eigenmode | sine_squared | polynomial",
        key="x0.type",
    )


def _build_solver(cfg: dict, extinction_eps: float = 0.0, lam_default=_MISSING) -> SolverConfig:
    s = _mapping(cfg, "solver", "")
    lam = _number(s, "lam", "solver", default=lam_default)
    with _reject("solver"):
        return SolverConfig(
            dt=_number(s, "dt", "solver"),
            t_end=_number(s, "t_end", "solver"),
            lam=lam,
            newton_tol=_number(s, "newton_tol", "solver", default=1e-10),
            newton_max_iters=_integer(s, "newton_max_iters", "solver", default=50),
            record_every=_integer(s, "record_every", "solver", default=1),
            extinction_eps=extinction_eps,
        )


def _monte_carlo_group(cfg: dict) -> tuple:
    mc = _mapping(cfg, "monte_carlo", "")
    n_paths = _integer(mc, "n_paths", "monte_carlo")
    seed = _integer(mc, "seed", "monte_carlo")
    if seed < 0:
        raise ConfigError("seed must be nonnegative", key="monte_carlo.seed")
    return n_paths, seed


def _dimension_gate(graph, dimension: int) -> None:
    """Reject dimensions outside the extinction validity range up front."""
    try:
        build_setup(graph.growth_m, graph.growth_c, 0.0, 1.0, dimension, 1.0)
    except ValueError as exc:
        raise ConfigError(str(exc), key="grid.dimension") from exc


def _admissibility_gate(nu: float, fields, ops: GridOperators):
    """Hard gate for noisy runs; returns the report when the config passes."""
    with _reject("nu"):
        report = check_admissibility(nu, fields, ops)
    if fields.n_components and not report.passes:
        exc = AdmissibilityError(
            "noise admissibility fails: Ctilde*gamma + |b|_inf^2 = "
            f"{report.lhs:.6g} exceeds 2*nu = {2.0 * nu:.6g}"
        )
        exc.report = report.to_dict()
        raise exc
    return report


# ---------------------------------------------------------------------------
# deterministic artifact writers


def _format_cell(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def _write_csv(path: str, header: list, columns: list) -> None:
    rows = zip(*columns) if columns else []
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_format_cell(v) for v in row])


def _write_json(path: str, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_series_csv(out_dir: str, name: str, times, series: dict) -> str:
    header = ["t"]
    columns = [times]
    for series_name, cols in series.items():
        for suffix, col in cols:
            header.append(f"{suffix}{series_name}" if suffix else series_name)
            columns.append(col)
    _write_csv(os.path.join(out_dir, name), header, columns)
    return name


def _write_path_csv(out_dir: str, path) -> str:
    series = {name: [("", path.series(name))] for name in _SERIES}
    return _write_series_csv(out_dir, "path.csv", path.times, series)


def _write_ensemble_csv(out_dir: str, ensemble) -> str:
    series = {
        name: [("mean_", ensemble.mean[name]), ("stderr_", ensemble.stderr[name])]
        for name in _SERIES
    }
    return _write_series_csv(out_dir, "series.csv", ensemble.times, series)


def _write_survival_csv(out_dir: str, report) -> str:
    _write_csv(
        os.path.join(out_dir, "survival.csv"),
        ["t", "survival", "stderr", "bound", "supermartingale", "sm_stderr"],
        [
            report.time_grid,
            report.empirical_survival,
            report.survival_stderr,
            report.theoretical_bound,
            report.supermartingale,
            report.supermartingale_stderr,
        ],
    )
    return "survival.csv"


def _write_histogram_csv(out_dir: str, name: str, hist) -> str:
    _write_csv(
        os.path.join(out_dir, name),
        ["bin_lo", "bin_hi", "count"],
        [hist.bin_lo, hist.bin_hi, hist.count],
    )
    return name


def _constants(report=None, mu1=None, k_m=None, c_m=None) -> dict:
    return {
        "gamma": None if report is None else report.gamma,
        "ctilde": None if report is None else report.ctilde,
        "c1": None if report is None else report.c1,
        "c2": None if report is None else report.c2,
        "k_m": k_m,
        "c_m": c_m,
        "mu1": mu1,
    }


# ---------------------------------------------------------------------------
# per-kind runners: return (written files, admissibility dict or None, constants)


def _run_heat_check(cfg: dict, out_dir: str, threads: int) -> tuple:
    spec = _build_grid(cfg)
    ops = GridOperators(spec)
    fields = _build_noise(cfg, spec)
    graph = _build_graph(cfg, "heat_check")
    nu = _number(cfg, "nu", "")
    x0 = _build_x0(cfg, ops)
    report = _admissibility_gate(nu, fields, ops)
    scfg = _build_solver(cfg, lam_default=1.0)
    mc = _mapping(cfg, "monte_carlo", "")
    if _integer(mc, "n_paths", "monte_carlo", default=1) != 1:
        raise ConfigError("heat_check runs a single deterministic path", key="monte_carlo.n_paths")
    seed = _integer(mc, "seed", "monte_carlo")
    path = simulate_path(x0, scfg, ops, fields, graph, nu, seed=seed)
    ratio = float(path.l2[-1] / path.l2[0])
    expected = math.exp(-nu * ops.mu1 * float(path.times[-1]))
    heat_report = {
        "mu1": ops.mu1,
        "t_end": float(path.times[-1]),
        "l2_ratio": ratio,
        "expected_decay": expected,
        "rel_error": abs(ratio - expected) / expected,
    }
    outputs = [_write_path_csv(out_dir, path)]
    _write_json(os.path.join(out_dir, "heat_report.json"), heat_report)
    outputs.append("heat_report.json")
    return outputs, report.to_dict(), _constants(report, mu1=ops.mu1)


def _run_extinction_kind(cfg: dict, out_dir: str, threads: int, kind: str) -> tuple:
    spec = _build_grid(cfg)
    ops = GridOperators(spec)
    fields = _build_noise(cfg, spec)
    graph = _build_graph(cfg, kind)
    expected_type = "fast_diffusion" if kind == "fast_diffusion" else "sign"
    if graph.kind != expected_type:
        raise ConfigError(f"kind {kind} requires a psi of type {expected_type}", key="psi.type")
    nu = _number(cfg, "nu", "")
    x0 = _build_x0(cfg, ops)
    _dimension_gate(graph, spec.dimension)
    report = _admissibility_gate(nu, fields, ops)

    ext = _mapping(cfg, "extinction", "", default={})
    eps_rel = _number(ext, "eps_rel", "extinction", default=1e-8)
    if eps_rel < 0:
        raise ConfigError("eps_rel must be nonnegative", key="extinction.eps_rel")
    x0_hminus1 = ops.h_minus1_norm(x0)
    eps = eps_rel * x0_hminus1
    scfg = _build_solver(cfg, extinction_eps=eps)
    n_paths, seed = _monte_carlo_group(cfg)

    m = graph.growth_m
    cm = estimate_cm(ops, m)
    setup = build_setup(m, graph.growth_c, report.c2, cm.safe, spec.dimension, x0_hminus1, extinction_eps=eps)
    ensemble = monte_carlo(x0, scfg, ops, fields, graph, nu, n_paths=n_paths, seed=seed, threads=threads)
    ext_report = verify_extinction_bound(ensemble, setup, x0_hminus1)

    outputs = [
        _write_ensemble_csv(out_dir, ensemble),
        _write_survival_csv(out_dir, ext_report),
    ]
    _write_json(
        os.path.join(out_dir, "extinction_report.json"),
        {
            "setup": {
                "m": setup.m,
                "rho": setup.rho,
                "k_m": setup.k_m,
                "c_m": setup.c_m,
                "extinction_eps": setup.extinction_eps,
                "x0_hminus1": x0_hminus1,
            },
            "cm_estimate": {
                "raw": cm.raw,
                "safe": cm.safe,
                "source": cm.source,
                "n_evaluated": cm.n_evaluated,
            },
            "report": ext_report.to_dict(),
        },
    )
    outputs.append("extinction_report.json")
    constants = _constants(report, mu1=ops.mu1, k_m=setup.k_m, c_m=setup.c_m)
    return outputs, report.to_dict(), constants


def _run_yosida_continuation(cfg: dict, out_dir: str, threads: int) -> tuple:
    spec = _build_grid(cfg)
    ops = GridOperators(spec)
    fields = _build_noise(cfg, spec)
    graph = _build_graph(cfg, "yosida_continuation")
    nu = _number(cfg, "nu", "")
    x0 = _build_x0(cfg, ops)
    report = _admissibility_gate(nu, fields, ops)
    lambdas = cfg.get("lambdas")
    if not isinstance(lambdas, list) or not lambdas:
        raise ConfigError("expected a non-empty list of lambda values", key="lambdas")
    for i, lam in enumerate(lambdas):
        if isinstance(lam, bool) or not isinstance(lam, (int, float)):
            raise ConfigError(f"expected a number, got {lam!r}", key=f"lambdas[{i}]")
    scfg = _build_solver(cfg, lam_default=float(lambdas[0]))
    n_paths, seed = _monte_carlo_group(cfg)
    with _reject("lambdas"):
        cauchy = yosida_continuation(x0, scfg, lambdas, ops, fields, graph, nu, n_paths=n_paths, seed=seed)
    ks = np.arange(cauchy.d_sup_sq.size)
    _write_csv(
        os.path.join(out_dir, "cauchy.csv"),
        ["k", "lambda_k", "lambda_k1", "d_sup_sq", "stderr", "ratio"],
        [ks, cauchy.lambdas[:-1], cauchy.lambdas[1:], cauchy.d_sup_sq, cauchy.stderr, cauchy.ratios],
    )
    return ["cauchy.csv"], report.to_dict(), _constants(report, mu1=ops.mu1)


def _run_admissibility(cfg: dict, out_dir: str, threads: int) -> tuple:
    spec = _build_grid(cfg)
    ops = GridOperators(spec)
    fields = _build_noise(cfg, spec)
    nu = _number(cfg, "nu", "")
    with _reject("nu"):
        report = check_admissibility(nu, fields, ops)
    _write_json(os.path.join(out_dir, "admissibility.json"), report.to_dict())
    return ["admissibility.json"], report.to_dict(), _constants(report, mu1=ops.mu1)


def _run_sandpile(cfg: dict, out_dir: str, threads: int) -> tuple:
    sp = _mapping(cfg, "sandpile", "")
    side = _integer(sp, "side", "sandpile")
    x_c = _integer(sp, "x_c", "sandpile", default=4)
    n_drives = _integer(sp, "n_drives", "sandpile")
    seed = _integer(sp, "seed", "sandpile")
    if seed < 0:
        raise ConfigError("seed must be nonnegative", key="sandpile.seed")
    with _reject("sandpile"):
        stats = run_soc(side, x_c, n_drives, seed)
    outputs = [
        _write_histogram_csv(out_dir, "size_hist.csv", stats.size_hist),
        _write_histogram_csv(out_dir, "duration_hist.csv", stats.duration_hist),
    ]
    _write_json(os.path.join(out_dir, "audit.json"), stats.audit)
    outputs.append("audit.json")
    return outputs, None, _constants()


_RUNNERS = {
    "heat_check": _run_heat_check,
    "fast_diffusion": lambda cfg, out, threads: _run_extinction_kind(cfg, out, threads, "fast_diffusion"),
    "soc_spde": lambda cfg, out, threads: _run_extinction_kind(cfg, out, threads, "soc_spde"),
    "yosida_continuation": _run_yosida_continuation,
    "admissibility": _run_admissibility,
    "sandpile": _run_sandpile,
}


# ---------------------------------------------------------------------------
# commands


def _resolve_threads(arg) -> int:
    if arg is None:
        env = os.environ.get("SPMSIM_THREADS", "").strip()
        if not env:
            return 1
        try:
            arg = int(env)
        except ValueError as exc:
            raise ConfigError(f"SPMSIM_THREADS must be an integer, got {env!r}") from exc
    if arg < 1:
        raise ConfigError(f"thread count must be >= 1, got {arg}")
    return arg


def _require_kind(cfg: dict) -> str:
    kind = _string(cfg, "kind", "")
    if kind not in KINDS:
        raise ConfigError(f"unknown kind {kind!r}, expected one of {', '.join(KINDS)}", key="kind")
    return kind


def _cmd_run(args) -> int:
    cfg, raw = _load_config(args.config)
    kind = _require_kind(cfg)
    out_dir = args.out if args.out is not None else cfg.get("output_dir")
    if not isinstance(out_dir, str) or not out_dir:
        raise ConfigError("an output directory is required (config output_dir or --out)", key="output_dir")
    threads = _resolve_threads(args.threads)
    os.makedirs(out_dir, exist_ok=True)
    start = time.perf_counter()
    outputs, admissibility, constants = _RUNNERS[kind](cfg, out_dir, threads)
    manifest = {
        "config_sha256": hashlib.sha256(raw).hexdigest(),
        "version": __version__,
        "kind": kind,
        "admissibility": admissibility,
        "constants": constants,
        "outputs": sorted(outputs),
        "wall_time_seconds": time.perf_counter() - start,
    }
    _write_json(os.path.join(out_dir, "manifest.json"), manifest)
    print(json.dumps({"status": "ok", "kind": kind, "output_dir": out_dir, "outputs": sorted(outputs) + ["manifest.json"]}))
    return 0


def _validate_spde(cfg: dict, kind: str, diagnostics: list, constants: dict) -> None:
    state = {}

    def run_check(name: str, key: str, fn) -> None:
        try:
            message = fn()
        except (ConfigError, ValueError, AdmissibilityError) as exc:
            diagnostics.append({"check": name, "key": key, "passes": False, "message": str(exc)})
        else:
            diagnostics.append({"check": name, "key": key, "passes": True, "message": message})

    def need(*keys):
        missing = [k for k in keys if k not in state]
        if missing:
            raise ValueError(f"not evaluated: {missing[0]} configuration failed")

    def check_grid():
        state["spec"] = _build_grid(cfg)
        state["ops"] = GridOperators(state["spec"])
        return f"d = {state['spec'].dimension}, n = {state['spec'].cells_per_axis}"

    def check_psi():
        state["graph"] = _build_graph(cfg, kind)
        m = state["graph"].growth_m
        return f"{state['graph'].kind} graph, growth exponent m = {m:g}"

    def check_dimension():
        need("spec", "graph")
        _dimension_gate(state["graph"], state["spec"].dimension)
        m = state["graph"].growth_m
        bound = math.inf if m >= 1.0 else 2.0 * (1.0 + m) / (1.0 - m)
        return f"1 <= d < {bound:g} holds for d = {state['spec'].dimension}"

    def check_noise():
        need("spec")
        state["fields"] = _build_noise(cfg, state["spec"])
        return f"{state['fields'].n_components} noise field(s), gamma = {state['fields'].gamma:.6g}"

    def check_x0():
        need("ops")
        state["x0"] = _build_x0(cfg, state["ops"])
        return "initial state accepted"

    def check_solver():
        _build_solver(cfg, lam_default=1.0)
        return "solver controls accepted"

    def check_monte_carlo():
        _monte_carlo_group(cfg)
        return "explicit seed and path count present"

    def check_admissibility_diag():
        need("ops", "fields")
        nu = _number(cfg, "nu", "")
        with _reject("nu"):
            report = check_admissibility(nu, state["fields"], state["ops"])
        constants.update(_constants(report, mu1=state["ops"].mu1))
        if not report.passes:
            raise ValueError(
                "noise admissibility fails: Ctilde*gamma + |b|_inf^2 = "
                f"{report.lhs:.6g} exceeds 2*nu = {2.0 * nu:.6g}"
            )
        return f"Ctilde*gamma + |b|_inf^2 = {report.lhs:.6g} <= 2*nu = {2.0 * nu:.6g}"

    def check_extinction_constants():
        need("ops", "graph")
        m = state["graph"].growth_m
        cm = estimate_cm(state["ops"], m)
        constants["c_m"] = cm.safe
        c2 = constants.get("c2")
        if c2 is not None:
            constants["k_m"] = c2 * (1.0 - m) / 2.0
        return f"C_m = {cm.safe:.6g} from {cm.source}"

    run_check("grid", "grid", check_grid)
    run_check("psi", "psi", check_psi)
    if kind in ("fast_diffusion", "soc_spde"):
        run_check("dimension_condition", "grid.dimension", check_dimension)
    run_check("noise_fields", "noise.fields", check_noise)
    run_check("initial_state", "x0", check_x0)
    run_check("solver", "solver", check_solver)
    if kind != "heat_check":
        run_check("monte_carlo", "monte_carlo", check_monte_carlo)
    run_check("admissibility", "nu", check_admissibility_diag)
    if kind in ("fast_diffusion", "soc_spde"):
        run_check("extinction_constants", "extinction", check_extinction_constants)


def _cmd_validate(args) -> int:
    cfg, _ = _load_config(args.config)
    kind = _require_kind(cfg)
    diagnostics: list = []
    constants = _constants()
    if kind == "sandpile":
        try:
            sp = _mapping(cfg, "sandpile", "")
            side = _integer(sp, "side", "sandpile")
            x_c = _integer(sp, "x_c", "sandpile", default=4)
            n_drives = _integer(sp, "n_drives", "sandpile")
            seed = _integer(sp, "seed", "sandpile")
            with _reject("sandpile"):
                from .sandpile import SandpileLattice

                SandpileLattice(side, x_c)
                if n_drives < 1:
                    raise ValueError(f"n_drives must be at least 1, got {n_drives}")
                if seed < 0:
                    raise ValueError("seed must be nonnegative")
            diagnostics.append(
                {"check": "sandpile", "key": "sandpile", "passes": True,
                 "message": f"{side}x{side} lattice, X_c = {x_c}, {n_drives} drives"}
            )
        except (ConfigError, ValueError) as exc:
            diagnostics.append({"check": "sandpile", "key": "sandpile", "passes": False, "message": str(exc)})
    elif kind == "admissibility":
        _validate_admissibility_kind(cfg, diagnostics, constants)
    else:
        _validate_spde(cfg, kind, diagnostics, constants)
    payload = {
        "kind": kind,
        "valid": all(d["passes"] for d in diagnostics),
        "diagnostics": diagnostics,
        "constants": constants,
    }
    print(json.dumps(payload, indent=2, sort_keys=True))
    return 0


def _validate_admissibility_kind(cfg: dict, diagnostics: list, constants: dict) -> None:
    state = {}
    try:
        state["spec"] = _build_grid(cfg)
        state["ops"] = GridOperators(state["spec"])
        diagnostics.append({"check": "grid", "key": "grid", "passes": True,
                            "message": f"d = {state['spec'].dimension}, n = {state['spec'].cells_per_axis}"})
    except (ConfigError, ValueError) as exc:
        diagnostics.append({"check": "grid", "key": "grid", "passes": False, "message": str(exc)})
    try:
        if "ops" not in state:
            raise ValueError("not evaluated: grid configuration failed")
        fields = _build_noise(cfg, state["spec"])
        nu = _number(cfg, "nu", "")
        with _reject("nu"):
            report = check_admissibility(nu, fields, state["ops"])
        constants.update(_constants(report, mu1=state["ops"].mu1))
        message = (
            f"Ctilde*gamma + |b|_inf^2 = {report.lhs:.6g} "
            f"{'<=' if report.passes else 'exceeds'} 2*nu = {2.0 * nu:.6g}"
        )
        diagnostics.append({"check": "admissibility", "key": "nu", "passes": report.passes, "message": message})
    except (ConfigError, ValueError, AdmissibilityError) as exc:
        diagnostics.append({"check": "admissibility", "key": "nu", "passes": False, "message": str(exc)})


def _emit_error(category: str, message: str, exit_code: int, **extra) -> None:
    payload = {"error": {"category": category, "message": message, "exit_code": exit_code}}
    payload["error"].update({k: v for k, v in extra.items() if v is not None})
    print(json.dumps(payload, sort_keys=True))


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="spmsim",
        description="Run or validate simulation experiments described by JSON configs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run an experiment and write its artifacts")
    p_run.add_argument("config", help="path to the experiment config JSON")
    p_run.add_argument("--out", default=None, help="output directory (overrides config output_dir)")
    p_run.add_argument("--threads", type=int, default=None,
                       help="Monte Carlo worker threads (default: SPMSIM_THREADS or 1)")
    p_val = sub.add_parser("validate", help="check a config and dry-run its derived constants")
    p_val.add_argument("config", help="path to the experiment config JSON")
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        return _cmd_validate(args)
    except ConfigError as exc:
        _emit_error("config", str(exc), 2, key=exc.key)
        return 2
    except AdmissibilityError as exc:
        _emit_error("admissibility", str(exc), 3, report=getattr(exc, "report", None))
        return 3
    except StepError as exc:
        _emit_error("numerical", str(exc), 4, residuals=exc.residuals)
        return 4
    except PathError as exc:
        _emit_error("numerical", str(exc), 4, step_index=exc.step_index)
        return 4
    except MonteCarloError as exc:
        _emit_error("numerical", str(exc), 4, failed_indices=exc.failed_indices)
        return 4
    except SpmsimError as exc:
        _emit_error("numerical", str(exc), 4)
        return 4


if __name__ == "__main__":
    sys.exit(main())
