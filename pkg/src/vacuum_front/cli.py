"""Command-line scenario runner.

    vacuum-front <mode> --config <path> [--out <dir>] [--seed <u64>] [--grid-scale <f>]

Exit codes: 0 success, 2 configuration, 3 physics/admissibility, 4 divergence,
5 I/O. On failure a JSON report goes to stderr and to ``error.json`` in the
output directory.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from contextlib import nullcontext

import numpy as np
from threadpoolctl import threadpool_limits

from . import compat, diagnostics, nashmoser, presets
from .artifacts import OutputDir
from .config import MODES, ScenarioConfig, load_config
from .errors import ConfigError, DivergenceError, PhysicsError, SnapshotIOError, VacuumFrontError
from .geometry import ShiftProfile
from .grid import Grid
from .problem import FreeBoundaryProblem
from .thermo import FluidModel, make_eos

log = logging.getLogger("vacuum_front")

AXES_FIELD = ("t", "x1", "x2", "x3", "component")
AXES_FRONT = ("t", "x2", "x3", "component")
ORACLE_EXACT = 1e-12  # below this the oracle agrees to roundoff and no slope is fitted


# -- building blocks from the config ------------------------------------------------

def build_model(cfg: ScenarioConfig) -> FluidModel:
    ph = cfg.physics
    eos = make_eos(ph.eos, **ph.constants.model_dump())
    return FluidModel(eos, G=ph.G, relativistic=ph.relativistic, q_sign=float(ph.q_sign))


def build_grid(cfg: ScenarioConfig, scale: float = 1.0) -> Grid:
    d = cfg.domain
    steps = d.nt - d.ghost - 1
    return Grid(nt=max(1, round(steps * scale)) + d.ghost + 1, n1=round((d.n1 - 1) * scale) + 1,
                n2=d.n2, n3=d.n3, T=d.T, X1=d.X1, L2=d.L2, L3=d.L3, ghost=d.ghost)


def build_problem(cfg: ScenarioConfig, scale: float = 1.0, T: float | None = None) -> FreeBoundaryProblem:
    g = build_grid(cfg, scale)
    if T is not None:
        g = g.with_time(g.nt, T)
    return FreeBoundaryProblem(build_model(cfg), ShiftProfile(cfg.physics.eps, cfg.physics.G), g)


def nm_config(cfg: ScenarioConfig) -> nashmoser.NashMoserConfig:
    s = cfg.nashmoser
    return nashmoser.NashMoserConfig(alpha=s.alpha, delta=s.delta, theta0=s.theta0, max_iter=s.max_iter,
                                     tol=s.tol, s_max=s.s_max, theta_identity=s.theta_identity,
                                     max_halvings=s.max_halvings, telescoping_tol=s.telescoping_tol)


def _public(summary: dict) -> dict:
    """Drop wall-clock entries so artifacts stay byte-reproducible."""
    return {k: v for k, v in summary.items() if k != "seconds"}


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n"


def _jsonable(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.bool_):
        return bool(v)
    if isinstance(v, np.ndarray):
        return v.tolist()
    return str(v)


# -- modes ---------------------------------------------------------------------------

def mode_check_matrices(cfg, out: OutputDir, rng, scale):
    rows, summary = [], {}
    for rel in (False, True):
        st = diagnostics.matrix_sweep(diagnostics.reference_model(rel, cfg.physics.G), 1000, rng)
        rows += st.rows
        summary["matrices_" + diagnostics.model_name(diagnostics.reference_model(rel))] = _public(st.summary)
    out.write_csv("matrices.csv", rows)
    st = diagnostics.straightening_sweep(100, rng)
    out.write_csv("straightening.csv", st.rows)
    summary["straightening"] = _public(st.summary)
    theta = [diagnostics.theta_bracket(t0) for t0 in (1.0, 4.0, 100.0)]
    out.write_csv("theta_schedule.csv", theta)
    summary["theta_bracket"] = all(r["bracket"] for r in theta)
    summary["passed"] = (all(v["passed"] for k, v in summary.items() if isinstance(v, dict))
                         and summary["theta_bracket"])
    return summary


def mode_compat(cfg, out: OutputDir, rng, scale):
    P = build_problem(cfg, scale)
    names = presets.PRESETS if cfg.preset == "manufactured" else (cfg.preset,)
    level_rows, oracle_rows, summary = [], [], {}
    for name in names:
        U0, phi0 = presets.preset_initial_data(name, P)
        stack = compat.compute_traces(P, U0, phi0, 4)
        rep = compat.check_compatibility(stack)
        for r in rep.rows():
            level_rows.append({"preset": name, **r})
        errs = []
        for dt in (1e-3, 1e-4, 1e-5):
            dU, dphi = compat.one_step_oracle(P, U0, phi0, dt)
            e = max(float(np.max(np.abs(dU - stack.U[1]))), float(np.max(np.abs(dphi - stack.phi[1]))))
            errs.append(e)
            oracle_rows.append({"preset": name, "dt": dt, "error": e})
        slope = (float(np.polyfit(np.log10([1e-3, 1e-4, 1e-5]), np.log10(errs), 1)[0])
                 if min(errs) > ORACLE_EXACT else None)
        summary[name] = {"compatible": rep.passed, "failing_level": rep.failing_level,
                         "oracle_slope": slope, "slope_margin": presets.boundary_slope_margin(P, U0)}
        if cfg.outputs.snapshots:
            traces = np.stack(stack.U)  # (levels, n1, n2, n3, 5)
            out.write_snapshot(f"traces_{name}.vfs", traces, ("level", "x1", "x2", "x3", "component"),
                               P.model.components, P.grid.describe())
    out.write_csv("compat_levels.csv", level_rows)
    out.write_csv("compat_oracle.csv", oracle_rows)
    summary["passed"] = (all(v["oracle_slope"] is None or v["oracle_slope"] >= 0.9
                             for v in summary.values())
                         and ("rest" not in summary or summary["rest"]["compatible"]))
    return summary


def mode_linear_solve(cfg, out: OutputDir, rng, scale):
    rel = cfg.physics.relativistic
    mms = diagnostics.linear_mms_study(rel, scale=scale, G=cfg.physics.G, eps=cfg.physics.eps)
    out.write_csv("linear_mms.csv", mms.rows)
    energy = diagnostics.energy_study(rel)
    out.write_csv("energy.csv", energy.rows)
    corpus = diagnostics.estimate_corpus(rng, 30, rel)
    out.write_csv("l2_estimate.csv", corpus.rows)
    sanity = diagnostics.linear_sanity(rel)
    summary = {"mms": _public(mms.summary), "energy": energy.summary, "l2_estimate": corpus.summary,
               "sanity": sanity}
    summary["passed"] = (mms.passed and energy.passed and corpus.passed
                         and sanity["zero_solution_sup"] == 0.0 and sanity["pre_onset_sup"] == 0.0)
    return summary


def mode_smoothing_audit(cfg, out: OutputDir, rng, scale):
    st = diagnostics.smoothing_audit(rng, scale)
    out.write_csv("smoothing_audit.csv", st.rows)
    return _public(st.summary)


def mode_relativistic_audit(cfg, out: OutputDir, rng, scale):
    summary = {"lorentz": diagnostics.lorentz_checks(rng)}
    summary["lorentz"]["passed"] = (summary["lorentz"]["max_abs"] <= 1e-15
                                    and summary["lorentz"]["roundtrip_rel"] <= 1e-14)
    lim = diagnostics.nonrelativistic_limit()
    out.write_csv("nonrelativistic_limit.csv", lim.rows)
    summary["limit"] = lim.summary
    caus = diagnostics.causality_sweep(rng)
    out.write_csv("causality.csv", caus.rows)
    summary["causality"] = caus.summary
    mat = diagnostics.matrix_sweep(diagnostics.reference_model(True, cfg.physics.G), 1000, rng)
    out.write_csv("matrices_relativistic.csv", mat.rows)
    summary["matrices"] = _public(mat.summary)
    mms = diagnostics.linear_mms_study(True, scale=scale, G=cfg.physics.G, eps=cfg.physics.eps)
    out.write_csv("linear_mms_relativistic.csv", mms.rows)
    summary["mms"] = _public(mms.summary)
    summary["passed"] = all(v["passed"] for v in summary.values())
    return summary


def mode_nashmoser_run(cfg, out: OutputDir, rng, scale):
    ncfg = nm_config(cfg)

    def make(T):
        P = build_problem(cfg, scale, T)
        if cfg.preset == "manufactured":
            return nashmoser.manufactured_reference(P)
        U0, phi0 = presets.preset_initial_data(cfg.preset, P)
        return nashmoser.approximation_from_data(P, U0, phi0)

    cadence = cfg.outputs.snapshot_cadence if cfg.outputs.snapshots else 0
    comps = build_model(cfg).components

    def on_iterate(st):
        if cadence and st.n % cadence == 0:
            out.write_snapshot(f"iterate_{st.n:03d}.vfs", st.U, AXES_FIELD, comps,
                               build_grid(cfg, scale).describe())

    try:
        res = nashmoser.run(make, cfg.domain.T, ncfg, on_iterate)
    except DivergenceError as exc:
        if exc.table:
            out.write_csv("iterations.csv", exc.table)
        raise
    out.write_csv("iterations.csv", res.rows if res.rows else [{"n": 0, "res_H3": 0.0, "bres_H3": 0.0}])
    if res.monitor is not None:
        out.write_csv("hn_monitor.csv", res.monitor.rows)
    grid = build_grid(cfg, scale).with_time(build_grid(cfg, scale).nt, res.T)
    if cfg.outputs.snapshots:
        out.write_snapshot("solution_U.vfs", res.U, AXES_FIELD, comps, grid.describe(), time=res.T)
        out.write_snapshot("solution_phi.vfs", res.phi[..., None], AXES_FRONT, ("phi",), grid.describe(),
                           time=res.T)
    summary = {
        "iterations": res.iterations, "converged": res.converged, "T": res.T, "halvings": res.halvings,
        "max_telescoping": res.max_telescoping, "max_decomposition": res.max_decomposition,
        "max_incremental_gap": res.max_incremental_gap,
        "final_res_H3": res.rows[-1]["res_H3"] if res.rows else 0.0,
        "final_bres_H3": res.rows[-1]["bres_H3"] if res.rows else 0.0,
    }
    if res.monitor is not None:
        summary["monotone_from"] = res.monitor.monotone_from
        summary["slope_b3"] = res.monitor.slope_b3
        summary["hn_delta_min"] = res.monitor.delta_min
    summary["passed"] = res.converged
    return summary


DISPATCH = {
    "check-matrices": mode_check_matrices,
    "compat": mode_compat,
    "linear-solve": mode_linear_solve,
    "smoothing-audit": mode_smoothing_audit,
    "nashmoser-run": mode_nashmoser_run,
    "relativistic-audit": mode_relativistic_audit,
}


# -- entry point ---------------------------------------------------------------------

def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vacuum-front", description=__doc__.split("\n\n")[0])
    p.add_argument("mode", choices=MODES)
    p.add_argument("--config", required=True, help="scenario JSON file")
    p.add_argument("--out", help="output directory (overrides outputs.directory)")
    p.add_argument("--seed", type=int, help="RNG seed (unsigned 64-bit)")
    p.add_argument("--grid-scale", type=float, default=1.0, help="refine (>1) or coarsen (<1) grids")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _thread_limit():
    raw = os.environ.get("VF_THREADS")
    if raw is None or raw == "":
        return nullcontext()
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"VF_THREADS must be a positive integer, got '{raw}'", module="cli",
                          operation="run_scenario") from None
    if n < 1:
        raise ConfigError("VF_THREADS must be a positive integer", module="cli", operation="run_scenario")
    return threadpool_limits(limits=n)


def run_scenario(cfg: ScenarioConfig, out: OutputDir, scale: float = 1.0) -> dict:
    rng = np.random.default_rng(cfg.seed)
    out.write_text("config.json", cfg.to_json())
    t0 = time.perf_counter()
    summary = DISPATCH[cfg.mode](cfg, out, rng, scale)
    log.info("%s finished in %.1f s", cfg.mode, time.perf_counter() - t0)
    summary = {"mode": cfg.mode, **summary}
    out.write_text("summary.json", _json(summary))
    if not summary.get("passed", False):
        cls = DivergenceError if cfg.mode == "nashmoser-run" else PhysicsError
        raise cls(f"{cfg.mode}: acceptance checks failed (see summary.json)", module="cli",
                  operation="run_scenario")
    return summary


def _report(exc: VacuumFrontError, out: OutputDir | None) -> int:
    rep = exc.report()
    sys.stderr.write(_json(rep))
    if out is not None and not isinstance(exc, SnapshotIOError):
        try:
            out.write_text("error.json", _json(rep))
        except VacuumFrontError:
            pass
    return exc.exit_code


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    out = None
    try:
        cfg = load_config(args.config)
        updates = {"mode": args.mode}
        if args.seed is not None:
            if not 0 <= args.seed < 2**64:
                raise ConfigError("seed must be an unsigned 64-bit integer", module="cli",
                                  operation="load_config")
            updates["seed"] = args.seed
        if cfg.mode != args.mode:
            log.warning("config mode '%s' overridden by command line '%s'", cfg.mode, args.mode)
        cfg = cfg.model_copy(update=updates)
        if not args.grid_scale > 0:
            raise ConfigError("--grid-scale must be positive", module="cli", operation="load_config")
        out = OutputDir(args.out if args.out else cfg.outputs.directory)
        with _thread_limit():
            summary = run_scenario(cfg, out, args.grid_scale)
    except VacuumFrontError as exc:
        return _report(exc, out)
    print(_json(summary), end="")
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
