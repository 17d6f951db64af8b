"""Acceptance criteria 1-10, each reported as one PASS/FAIL line at the end of the run."""

import time

import numpy as np
import pytest

from vacuum_front import compat, diagnostics, nashmoser, presets
from vacuum_front.cli import build_problem, nm_config
from vacuum_front.config import ScenarioConfig
from vacuum_front.geometry import make_cutoff

RESULTS: dict[int, str] = {}


def record(n: int, ok: bool, detail: str):
    RESULTS[n] = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    assert ok, RESULTS[n]


@pytest.fixture(scope="module")
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="module")
def nm_manufactured():
    cfg = ScenarioConfig(mode="nashmoser-run")
    t0 = time.perf_counter()
    res = nashmoser.run(lambda T: nashmoser.manufactured_reference(build_problem(cfg, 1.0, T)),
                        cfg.domain.T, nm_config(cfg))
    return res, time.perf_counter() - t0


@pytest.fixture(scope="module")
def nm_rest():
    cfg = ScenarioConfig(mode="nashmoser-run", preset="rest")

    def make(T):
        P = build_problem(cfg, 1.0, T)
        return nashmoser.approximation_from_data(P, *presets.rest_state(P))

    return nashmoser.run(make, cfg.domain.T, nm_config(cfg))


def test_criterion_01_matrix_suite(rng):
    t0 = time.perf_counter()
    studies = [diagnostics.matrix_sweep(diagnostics.reference_model(rel), 1000, rng)
               for rel in (False, True)]
    dt = time.perf_counter() - t0
    s = [st.summary for st in studies]
    ok = all(st.passed for st in studies) and dt < 10
    record(1, ok, f"2x1000 states, max asym {max(x['max_asymmetry'] for x in s):.1e}, "
                  f"min eig(A0) {min(x['min_A0_eig'] for x in s):.3g}, "
                  f"max s3/s1 {max(x['max_sigma3_ratio'] for x in s):.1e}, {dt:.1f} s")


def test_criterion_02_straightening(rng):
    t0 = time.perf_counter()
    st = diagnostics.straightening_sweep(100, rng)
    dt = time.perf_counter() - t0
    s = st.summary
    ok = st.passed and dt < 5 and make_cutoff(4.0).max_slope < 0.5
    record(2, ok, f"|chi'| {s['chi_max_slope']:.3f}, min d1Phi {s['min_d1Phi']:.3f}, "
                  f"trace error {s['max_trace_error']:.1e}, {dt:.1f} s")


def test_criterion_03_smoothing_audit(rng):
    t0 = time.perf_counter()
    st = diagnostics.smoothing_audit(rng, 1.0)
    dt = time.perf_counter() - t0
    fits = st.summary["fits"]
    p72 = fits["p72_alpha2_beta2"]["slope"]
    p73 = fits["p73_alpha2_beta0"]["slope"]
    p74 = {k: v["slope"] for k, v in fits.items() if k.startswith("p74")}
    ok = (st.passed and abs(p72) <= 0.1 and p73 <= -1.8 and dt < 60
          and st.summary["grid_points"] >= 64**3)
    record(3, ok, f"p72 slope {p72:+.3f}, p73(0,2) slope {p73:.3f}, "
                  f"p74 slopes {', '.join(f'{v:.2f}' for v in p74.values())}, {dt:.1f} s")


def test_criterion_04_theta_schedule():
    rows = [diagnostics.theta_bracket(t0) for t0 in (1.0, 4.0, 100.0)]
    err = abs(rows[0]["theta1"] - np.sqrt(2.0))
    ok = all(r["bracket"] for r in rows) and err <= 1e-15
    record(4, ok, f"bracket holds to n=1e6 for theta0 in {{1,4,100}}, |theta1 - sqrt2| = {err:.1e}")


def test_criterion_05_linear_mms():
    t0 = time.perf_counter()
    mms = diagnostics.linear_mms_study(False, levels=3, scheme="rk4")
    sanity = diagnostics.linear_sanity(False)
    dt = time.perf_counter() - t0
    order = mms.summary["min_order"]
    ok = (mms.passed and order >= 1.8 and sanity["zero_solution_sup"] == 0.0
          and sanity["pre_onset_sup"] == 0.0 and sanity["post_onset_sup"] > 0 and dt < 300)
    record(5, ok, f"observed order {order:.3f}, zero data sup {sanity['zero_solution_sup']:.1e}, "
                  f"pre-onset sup {sanity['pre_onset_sup']:.1e}, {dt:.1f} s")


def test_criterion_06_energy(rng):
    energy = diagnostics.energy_study(False)
    corpus = diagnostics.estimate_corpus(rng, 30)
    s = corpus.summary
    ok = energy.passed and corpus.passed and np.isfinite(s["max_ratio_n"])
    record(6, ok, f"Gronwall C spread {energy.summary['relative_spread']:.3f}, "
                  f"L2 ratio {s['max_ratio_n']:.3f} -> {s['max_ratio_2n']:.3f} (x{s['growth']:.2f})")


def test_criterion_07_compat_oracle():
    cfg = ScenarioConfig(mode="compat")
    P = build_problem(cfg)
    dts = (1e-3, 1e-4, 1e-5)
    slopes = {}
    for name in ("bump", "wavefront"):
        U0, phi0 = presets.preset_initial_data(name, P)
        stack = compat.compute_traces(P, U0, phi0, 1)
        errs = []
        for dt in dts:
            dU, dphi = compat.one_step_oracle(P, U0, phi0, dt)
            errs.append(max(np.abs(dU - stack.U[1]).max(), np.abs(dphi - stack.phi[1]).max()))
        slopes[name] = float(np.polyfit(np.log10(dts), np.log10(errs), 1)[0])
    U0, phi0 = presets.rest_state(P)
    rest = compat.check_compatibility(compat.compute_traces(P, U0, phi0, 4))
    ok = all(s >= 0.9 for s in slopes.values()) and rest.passed and max(rest.residuals) == 0.0
    record(7, ok, f"oracle slopes {', '.join(f'{k} {v:.3f}' for k, v in slopes.items())}, "
                  f"rest residuals max {max(rest.residuals):.1e} over levels 0-4")


def test_criterion_08_telescoping(nm_manufactured, nm_rest):
    res, _ = nm_manufactured
    tele = max(res.max_telescoping, nm_rest.max_telescoping)
    dec = max(res.max_decomposition, nm_rest.max_decomposition)
    per_step = max(max(r["telescoping"], r["decomposition"]) for r in res.rows)
    ok = tele < 1e-10 and dec < 1e-10 and per_step < 1e-10
    record(8, ok, f"max telescoping {tele:.1e}, max decomposition {dec:.1e} over {len(res.rows)} steps")


def test_criterion_09_nash_moser(nm_manufactured, nm_rest):
    res, dt = nm_manufactured
    mon = res.monitor
    alpha = nm_config(ScenarioConfig(mode="nashmoser-run")).alpha
    bound = 3 - alpha - 1 + 0.5
    ok = (res.converged and res.iterations <= 40 and mon.monotone_from is not None
          and mon.monotone_from <= 3 and mon.slope_b3 is not None and mon.slope_b3 <= bound
          and nm_rest.iterations == 0 and dt < 900)
    record(9, ok, f"{res.iterations} iterations, monotone from step {mon.monotone_from}, "
                  f"slope b3 {mon.slope_b3:.2f} (bound {bound}), halvings {res.halvings}, "
                  f"rest iterations {nm_rest.iterations}, {dt:.0f} s")


def test_criterion_10_relativistic(rng):
    lor = diagnostics.lorentz_checks(rng)
    lim = diagnostics.nonrelativistic_limit()
    caus = diagnostics.causality_sweep(rng, 100)
    mms = diagnostics.linear_mms_study(True, levels=3, scheme="rk4")
    sanity = diagnostics.linear_sanity(True)
    ok = (lor["max_abs"] <= 1e-15 and lim.passed and caus.passed and mms.passed
          and mms.summary["min_order"] >= 1.8 and sanity["zero_solution_sup"] == 0.0
          and sanity["pre_onset_sup"] == 0.0)
    record(10, ok, f"Lorentz identities {lor['max_abs']:.1e}, limit slope {lim.summary['slope']:.3f}, "
                   f"causality agrees on 100 states: {caus.passed}, "
                   f"relativistic MMS order {mms.summary['min_order']:.3f}")
