"""End-to-end acceptance checks.  Each test records one PASS/FAIL line, also
listed in the terminal summary."""
import math
import time

import numpy as np
import pytest

from jcscoop import presets
from jcscoop.channel import LinkGeometry, pr_los
from jcscoop.cli import recommend
from jcscoop.comm import pr_succ_c
from jcscoop.coop import (DeploymentPlan, complexity_bound, coop_profile, coverage_from_profile,
                          coverage_sweep, pr_coop, sweep_complexity_check)
from jcscoop.errors import ApproximationError
from jcscoop.fitting import fit_gmm, simulate_distances
from jcscoop.interference import h_function_numeric, h_los_closed, h_nlos_closed
from jcscoop.mc import (TrialConfig, estimate_pr_los, estimate_success, interferer_tables,
                        null_stderr, sinr_ordering_probability)
from jcscoop.scene import realize_scene, table_ii_classes
from jcscoop.sensing import (closed_form_z, detection_range, detection_range_expectation,
                             expected_prs_los_closed_form, expected_prs_los_quadrature,
                             radar_echo_power, pr_succ_s, sensing_link, sinr_s)

GAMMAS = (0.80, 0.85, 0.90, 0.95)
HEIGHTS = tuple(float(h) for h in range(1, 11))


def _violations(values, tol=1e-12):
    return sum(b > a + tol for a, b in zip(values, values[1:]))


def test_1_los_oracle(radio, blockers, acceptance):
    t0 = time.perf_counter()
    grid = list(zip(np.linspace(10.0, 150.0, 10), np.linspace(1.0, 10.0, 10)))
    trial = TrialConfig(n_trials=100_000, root_seed=11)
    worst = 0.0
    for i, (d, h) in enumerate(grid):
        link = LinkGeometry(float(d), float(h), radio.target_height)
        pt = estimate_pr_los(trial, link, blockers=blockers, point=i)
        p = pr_los(link, blockers)
        se = max(null_stderr(p, pt.n), 1.0 / pt.n)
        worst = max(worst, abs(pt.p_hat - p) / se)
    elapsed = time.perf_counter() - t0
    acceptance("acceptance 1 (LoS oracle)", worst <= 3.0 and elapsed < 120.0,
               f"worst |mc - analytic| = {worst:.2f} SE over 10 points, {elapsed:.1f} s")


def test_2_success_oracle(radio, blockers, sensing_field, comm_field, acceptance):
    trial = TrialConfig(n_trials=10_000, root_seed=12, workers=2)
    distances = (10.0, 30.0, 60.0, 100.0, 150.0)
    bad, worst = [], 0.0
    for j, h in enumerate((1.0, 3.0, 5.0, 7.0, 10.0)):
        tables = interferer_tables(radio, h, blockers, sensing_field, comm_field, trial.root_seed)
        for kind, fn, fld in (("detect", pr_succ_s, sensing_field),
                              ("comm", pr_succ_c, comm_field)):
            curve = estimate_success(trial, kind, radio, distances, h, blockers, sensing_field,
                                     comm_field, tables=tables, point_offset=10 * j)
            for pt in curve.points:
                err = abs(pt.p_hat - fn(radio, pt.d, h, blockers, fld))
                worst = max(worst, err)
                if err > max(0.05, 3 * pt.stderr):
                    bad.append(f"{kind} h={h} d={pt.d}")
    acceptance("acceptance 2 (detection/comm oracle)", not bad,
               f"max |mc - analytic| = {worst:.4f} on 2 x 5 x 5 points; outside: {bad or 'none'}")


def test_3_closed_form_mean_echo(radio, blockers, acceptance):
    worst, n = 0.0, 0
    for h in np.arange(2.0, 10.5, 0.5):
        for d in np.arange(5.0, 150.0, 5.0):
            try:
                z = closed_form_z(blockers, float(h), float(d))
            except ApproximationError:
                continue
            if abs(z) >= 1:
                continue
            n += 1
            cf = expected_prs_los_closed_form(radio, blockers, float(h), float(d))
            q = expected_prs_los_quadrature(radio, blockers, float(h), radio.target_height,
                                            float(d))
            worst = max(worst, abs(cf / q - 1))
    acceptance("acceptance 3 (closed-form mean LoS echo)", n > 0 and worst <= 0.10,
               f"worst relative error {worst:.3g} over {n} points with |z| < 1")


def test_3_h_function_discrepancy_report(blockers, acceptance):
    # informational: closed-form H against quadrature, no verdict
    parts = []
    for d in (1.0, 20.0, 100.0):
        link = LinkGeometry(d, 6.0, 6.0)
        for beta in (0.1, 5.0):
            num = h_function_numeric(beta, link, blockers, "los")
            closed = h_los_closed(beta, link, blockers)
            try:
                nl = f"{h_nlos_closed(beta, link, blockers) / h_function_numeric(beta, link, blockers, 'nlos'):.3g}"
            except ApproximationError:
                nl = "undefined"
            parts.append(f"d={d:g} beta={beta:g} LoS ratio {closed / num:.3g} NLoS ratio {nl}")
    acceptance("acceptance 3 (H-function closed vs quadrature)", True, "; ".join(parts),
               verdict=False)


def test_4_nlos_snr_anchor(radio, acceptance):
    best = 0.0
    for h in HEIGHTS:
        for d in np.arange(10.0, 100.5, 0.5):
            r = math.hypot(d, h - radio.target_height)
            best = max(best, radio.eta * radio.n_p * radar_echo_power(radio, r) / radio.N)
    acceptance("acceptance 4 (NLoS SNR < 2.06)", best < 2.06,
               f"max pure-NLoS SNR {best:.4f} for d in [10, 100] m, h in 1..10 m")


def test_5_low_mount_failure(radio, blockers, sensing_field, acceptance):
    ds = np.arange(1.0, 40.0, 0.5)
    below = [d for d in ds
             if sinr_s(radio, sensing_link(radio, float(d), 1.0), blockers, sensing_field)
             < radio.beta_s]
    acceptance("acceptance 5 (h=1 m fails before 40 m)", bool(below),
               f"SINR_s first below beta_s at d = {below[0] if below else 'never'} m")


def test_6_diminishing_returns(radio, blockers, sensing_field, acceptance):
    r7 = detection_range(radio, 7.0, blockers, sensing_field)
    r10 = detection_range(radio, 10.0, blockers, sensing_field)
    gain = r10 / r7 - 1
    e7 = detection_range_expectation(radio, 7.0, blockers, sensing_field)
    e10 = detection_range_expectation(radio, 10.0, blockers, sensing_field)
    acceptance("acceptance 6 (range gain 7 -> 10 m < 15%)", 0 <= gain < 0.15,
               f"{r7:.2f} m -> {r10:.2f} m, gain {100 * gain:.1f}% "
               f"(fourth-root range {e7:.2f} -> {e10:.2f} m)")


@pytest.fixture(scope="module")
def coverage_grid():
    res = coverage_sweep(presets.radio(), HEIGHTS, GAMMAS, presets.blockers(),
                         presets.sensing_field(), presets.comm_field(), n_points=100, workers=4)
    return {(r.h, r.gamma_co): r for r in res}, res


def test_7_coverage_knee(coverage_grid, acceptance):
    table, res = coverage_grid
    cov = [table[(h, 0.80)].coverage for h in HEIGHTS]
    best = max(cov)
    knee_ok = any(c >= best - 0.01 for h, c in zip(HEIGHTS, cov) if h <= 7.0)
    tail = [c for h, c in zip(HEIGHTS, cov) if h >= 7.0]
    flat_ok = _violations(tail) == 0
    ordered = all(table[(h, a)].coverage >= table[(h, b)].coverage
                  for h in HEIGHTS for a, b in zip(GAMMAS, GAMMAS[1:]))
    plan = DeploymentPlan()
    rec = recommend(res, 0.80, plan.height_bounds, plan.spacing_bounds)
    acceptance("acceptance 7 (coverage knee at 7 m)", knee_ok and flat_ok and ordered,
               "coverage@0.80 " + " ".join(f"h{h:g}={c:.2f}" for h, c in zip(HEIGHTS, cov))
               + f"; thresholds ordered {ordered}; recommended h={rec['h']:g} m")


def test_8_monotonicity(radio, sensing_field, comm_field, coverage_grid, acceptance):
    ds = np.arange(10.0, 151.0, 10.0)
    lams = (0.01, 0.03, 0.05, 0.07, 0.1, 0.2, 0.3, 0.5)
    trial = TrialConfig(n_trials=2000, root_seed=0, estimator="coop")
    fails = {}

    def check(name, values):
        v = _violations(values)
        if v:
            fails[name] = fails.get(name, 0) + v

    for h in (3.0, 6.0, 10.0):
        b = presets.blockers()
        tables = interferer_tables(radio, h, b, sensing_field, comm_field, 0)
        check("pr_los/d", [pr_los(LinkGeometry(d, h, radio.target_height), b) for d in ds])
        check("pr_succ_s/d", [pr_succ_s(radio, d, h, b, sensing_field) for d in ds])
        check("pr_succ_c/d", [pr_succ_c(radio, d, h, b, comm_field) for d in ds])
        check("pr_coop/d", [pr_coop(radio, d, d, h, b, sensing_field, comm_field, trial, tables)
                            for d in ds])
        for d in (20.0, 50.0, 100.0):
            bl = [presets.blockers(lam) for lam in lams]
            check("pr_los/lambda", [pr_los(LinkGeometry(d, h, radio.target_height), x)
                                    for x in bl])
            check("pr_succ_s/lambda", [pr_succ_s(radio, d, h, x, sensing_field) for x in bl])
            check("pr_succ_c/lambda", [pr_succ_c(radio, d, h, x, comm_field) for x in bl])
            check("pr_coop/lambda", [pr_coop(radio, d, d, h, x, sensing_field, comm_field, trial)
                                     for x in bl])
    table, _ = coverage_grid
    for h in HEIGHTS:
        check("coverage/gamma", [table[(h, g)].coverage for g in GAMMAS])
    prof = coop_profile(radio, 7.0, presets.blockers(), sensing_field, comm_field, n_points=40)
    check("coverage/gamma", [coverage_from_profile(prof, g).coverage
                             for g in np.linspace(0, 1, 101)])
    acceptance("acceptance 8 (monotonicity suite)", not fails,
               f"violations {fails or 'none'}")


def test_9_complexity(acceptance):
    ns = (100, 1_000, 10_000)
    ratios = [sweep_complexity_check(n) / complexity_bound(n) for n in ns]
    c = max(ratios)
    ok = all(r <= c for r in ratios) and min(ratios) >= 0.99 * c
    acceptance("acceptance 9 (Algorithm-1 cost n^2 + 5n)", ok,
               "ops / (n^2 + 5n) = " + ", ".join(f"{r:.4f}" for r in ratios)
               + f"; fitted constant {c:.4f}")


def test_10_determinism(radio, blockers, sensing_field, comm_field, acceptance):
    link = LinkGeometry(40.0, 6.0, radio.target_height)
    same = {}
    one, three = (TrialConfig(n_trials=6000, root_seed=21, workers=w) for w in (1, 3))
    same["los"] = (estimate_pr_los(one, link, blockers=blockers)
                   == estimate_pr_los(three, link, blockers=blockers))
    for kind in ("detect", "comm", "coop"):
        a, b = (estimate_success(t, kind, radio, [20.0, 60.0], 6.0, blockers, sensing_field,
                                 comm_field) for t in (one, three))
        same[kind] = a.to_json() == b.to_json()
    same["ordering"] = (sinr_ordering_probability(one, radio, 30.0, 6.0, blockers, sensing_field,
                                                  comm_field)
                        == sinr_ordering_probability(three, radio, 30.0, 6.0, blockers,
                                                     sensing_field, comm_field))
    quick = TrialConfig(n_trials=500, root_seed=3, estimator="coop")
    cov = [coverage_sweep(radio, (5.0, 7.0), (0.8,), blockers, sensing_field, comm_field,
                          n_points=10, trial=quick, workers=w) for w in (1, 2)]
    same["coverage"] = cov[0] == cov[1]
    same["scene"] = (realize_scene(table_ii_classes(), presets.ppp(), 200.0, 5).arrays()[3].tobytes()
                     == realize_scene(table_ii_classes(), presets.ppp(), 200.0, 5).arrays()[3].tobytes())
    same["ppp"] = np.array_equal(simulate_distances(presets.ppp(), 500.0, seed=4),
                                 simulate_distances(presets.ppp(), 500.0, seed=4))
    x = np.random.default_rng(0).normal(0, 1, 500)
    same["gmm"] = fit_gmm(x, k=2, seed=5) == fit_gmm(x, k=2, seed=5)
    acceptance("acceptance 10 (determinism)", all(same.values()),
               ", ".join(f"{k}={'same' if v else 'DIFFERENT'}" for k, v in same.items()))
