import math

import numpy as np
import pytest

from jcscoop import presets
from jcscoop.channel import LinkGeometry, pr_los
from jcscoop.errors import DomainError
from jcscoop.interference import InterfererField
from jcscoop.mc import (EmpiricalCurve, TrialConfig, binomial_ci, chunk_rng, estimate_pr_los,
                        estimate_success, null_stderr, point_from_outcomes, run_trials)
from jcscoop.scene import Obstacle, SceneRealization, table_ii_classes
from jcscoop.sensing import detection_range_expectation


def test_trial_config_validation():
    with pytest.raises(DomainError):
        TrialConfig(n_trials=99)
    with pytest.raises(DomainError):
        TrialConfig(estimator="rate")
    with pytest.raises(DomainError):
        TrialConfig(root_seed=-1)


def test_zero_density_always_clear():
    link = LinkGeometry(50.0, 6.0, 1.5)
    trial = TrialConfig(n_trials=500)
    assert estimate_pr_los(trial, link, blockers=presets.blockers(0.0)).p_hat == 1.0
    empty = table_ii_classes({})
    assert estimate_pr_los(trial, link, classes=empty, ppp=presets.ppp()).p_hat == 1.0


def test_deterministic_blocker():
    link = LinkGeometry(50.0, 6.0, 1.5)
    wall = SceneRealization((Obstacle(25.0, 0.0, 1.0, 20.0, "bus"),), 100.0)
    pt = estimate_pr_los(TrialConfig(n_trials=200), link, scene_factory=lambda rng: wall)
    assert pt.p_hat == 0.0 and pt.stderr == 0.0


def test_los_matches_analytic_at_default():
    link = LinkGeometry(50.0, 6.0, 1.5)
    b = presets.blockers()
    pt = estimate_pr_los(TrialConfig(n_trials=100_000, root_seed=3), link, blockers=b)
    p = pr_los(link, b)
    assert abs(pt.p_hat - p) <= 3 * null_stderr(p, pt.n)


def test_road_scene_estimator_runs():
    link = LinkGeometry(30.0, 6.0, 1.5)
    pt = estimate_pr_los(TrialConfig(n_trials=200, region=60.0), link,
                         classes=table_ii_classes(), ppp=presets.ppp())
    assert 0.0 <= pt.p_hat <= 1.0 and pt.n == 200


def test_worker_count_does_not_change_results(radio, blockers, sensing_field, comm_field):
    link = LinkGeometry(40.0, 6.0, 1.5)
    one = estimate_pr_los(TrialConfig(n_trials=6000, root_seed=5), link, blockers=blockers)
    three = estimate_pr_los(TrialConfig(n_trials=6000, root_seed=5, workers=3), link,
                            blockers=blockers)
    assert one == three
    a = estimate_success(TrialConfig(n_trials=6000, root_seed=5), "coop", radio, [30.0], 6.0,
                         blockers, sensing_field, comm_field)
    b = estimate_success(TrialConfig(n_trials=6000, root_seed=5, workers=3), "coop", radio,
                         [30.0], 6.0, blockers, sensing_field, comm_field)
    assert a == b


def _bernoulli(root, point, chunk, n, p=0.3):
    return chunk_rng(root, point, chunk, 0).random(n) < p


def test_ci_coverage():
    hits = 0
    for rep in range(100):
        pt = point_from_outcomes(0.0, run_trials(TrialConfig(n_trials=1000, root_seed=rep),
                                                 _bernoulli))
        lo, hi = binomial_ci(pt)
        hits += lo <= 0.3 <= hi
    assert hits >= 90


def test_stderr_scales_as_inverse_sqrt():
    small = point_from_outcomes(0.0, run_trials(TrialConfig(n_trials=10_000, root_seed=1),
                                                _bernoulli))
    large = point_from_outcomes(0.0, run_trials(TrialConfig(n_trials=40_000, root_seed=2),
                                                _bernoulli))
    assert small.stderr / large.stderr == pytest.approx(2.0, rel=0.1)


def test_sharp_threshold(radio):
    cfg = radio.replace(eta=0.0)
    clear, quiet = presets.blockers(0.0), InterfererField(density=0.0)
    r = detection_range_expectation(cfg, 6.0, clear, quiet)
    edge = math.sqrt(r * r - (6.0 - cfg.target_height) ** 2)
    trial = TrialConfig(n_trials=500, fading=False)
    curve = estimate_success(trial, "detect", cfg, [0.5 * edge, 0.999 * edge, 1.001 * edge,
                                                    2.0 * edge], 6.0, clear, quiet, quiet)
    assert list(curve.p_hat) == [1.0, 1.0, 0.0, 0.0]


def test_obstacle_density_ordering(radio, sensing_field, comm_field):
    trial = TrialConfig(n_trials=10_000, root_seed=1, workers=2)
    curves = [estimate_success(trial, "detect", radio, [20.0, 30.0], 6.0, presets.blockers(lam),
                               sensing_field, comm_field) for lam in (0.1, 0.2, 0.3, 0.5)]
    for a, b in zip(curves, curves[1:]):
        for pa, pb in zip(a.points, b.points):
            assert binomial_ci(pb)[1] < binomial_ci(pa)[0]


def test_coop_below_factors(radio, blockers, sensing_field, comm_field):
    trial = TrialConfig(n_trials=4000, root_seed=7)
    d = [10.0, 30.0, 60.0]
    det, com, coop = (estimate_success(trial, k, radio, d, 6.0, blockers, sensing_field,
                                       comm_field).p_hat for k in ("detect", "comm", "coop"))
    assert np.all(coop <= np.minimum(det, com))


def test_curve_round_trips(tmp_path):
    pts = tuple(point_from_outcomes(d, np.arange(200) % k == 0) for d, k in ((10.0, 2), (20.0, 3)))
    curve = EmpiricalCurve(pts, "demo")
    assert EmpiricalCurve.from_json(curve.to_json()) == curve
    text = curve.to_csv(tmp_path / "c.csv")
    assert (tmp_path / "c.csv").read_text() == text
    rows = [line.split(",") for line in text.strip().splitlines()[1:]]
    assert [float(r[1]) for r in rows] == list(curve.p_hat)
    assert all(p.stderr == pytest.approx(math.sqrt(p.p_hat * (1 - p.p_hat) / p.n)) for p in pts)
