import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial.distance import pdist

from jcscoop import presets
from jcscoop.channel import LinkGeometry, pr_los, pr_los_array
from jcscoop.comm import pr_succ_c
from jcscoop.mc import EmpiricalCurve, point_from_outcomes
from jcscoop.scene import GaussianMixture, Obstacle, blocks, matern2_thin
from jcscoop.sensing import pr_succ_s

FAST = settings(max_examples=40, deadline=None)
heights = st.floats(0.5, 12.0)
densities = st.floats(0.0, 0.5)


@FAST
@given(h1=heights, h2=heights, lam=densities, d1=st.floats(0.1, 200), d2=st.floats(0.1, 200))
def test_pr_los_bounded_and_monotone(h1, h2, lam, d1, d2):
    b = presets.blockers(lam)
    lo, hi = sorted((d1, d2))
    p_lo = pr_los(LinkGeometry(lo, h1, h2), b)
    p_hi = pr_los(LinkGeometry(hi, h1, h2), b)
    assert 0.0 <= p_hi <= p_lo + 1e-12 <= 1.0 + 1e-12


@FAST
@given(h1=heights, h2=heights, lam=densities, d=st.floats(0.1, 200))
def test_vectorised_los_matches_scalar(h1, h2, lam, d):
    b = presets.blockers(lam)
    assert np.isclose(pr_los_array([d], h1, h2, b)[0], pr_los(LinkGeometry(d, h1, h2), b),
                      rtol=1e-7, atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(h=st.floats(1.0, 10.0), d=st.floats(1.0, 150.0), lam=st.floats(0.0, 0.3))
def test_success_probabilities_in_unit_interval(h, d, lam):
    b = presets.blockers(lam)
    r = presets.radio()
    assert 0.0 <= pr_succ_s(r, d, h, b, presets.sensing_field()) <= 1.0
    assert 0.0 <= pr_succ_c(r, d, h, b, presets.comm_field()) <= 1.0


coords = st.floats(-50, 50)


@FAST
@given(ox=coords, oy=coords, r=st.floats(0.1, 5), oh=st.floats(0.1, 15),
       tx=st.tuples(coords, coords, st.floats(0, 12)),
       rx=st.tuples(coords, coords, st.floats(0, 12)))
def test_blocks_symmetric(ox, oy, r, oh, tx, rx):
    if tx == rx:
        return
    o = Obstacle(ox, oy, r, oh, "sedan")
    assert blocks(o, tx, rx) == blocks(o, rx, tx)


@FAST
@given(n=st.integers(0, 300), delta=st.floats(0.0, 5.0), seed=st.integers(0, 2**32 - 1))
def test_matern_thinning_is_hard_core(n, delta, seed):
    rng = np.random.default_rng(seed)
    pts = rng.uniform(0, 60, size=(n, 2))
    kept = pts[matern2_thin(pts, delta, rng)]
    if len(kept) > 1 and delta > 0:
        assert pdist(kept).min() >= delta


comp = st.tuples(st.floats(0.01, 10), st.floats(-5, 50), st.floats(0.01, 10))


@FAST
@given(st.lists(comp, min_size=1, max_size=4))
def test_mixture_dict_round_trip(components):
    gm = GaussianMixture(tuple(components))
    assert GaussianMixture.from_dict(gm.to_dict()) == gm
    assert np.isclose(gm.weights.sum(), 1.0)


@FAST
@given(st.lists(st.tuples(st.floats(0.1, 500), st.lists(st.booleans(), min_size=1,
                                                         max_size=50)), max_size=5))
def test_curve_json_round_trip(spec):
    pts = tuple(point_from_outcomes(d, np.array(o)) for d, o in spec)
    curve = EmpiricalCurve(pts, "p")
    back = EmpiricalCurve.from_json(curve.to_json())
    assert back == curve
    assert all(0.0 <= p.p_hat <= 1.0 for p in back.points)
