import math

import numpy as np
import pytest

from jcscoop import presets
from jcscoop.channel import pr_los
from jcscoop.comm import (comm_link, comm_range_analytic, comm_range_expectation, i_ref,
                          link_budget, p_rc, pr_succ_c)
from jcscoop.interference import InterfererField
from jcscoop.sensing import echo_power_split, pr_succ_s, radar_echo_power
from scipy import optimize

# mpmath: defaults at d=50, h=6 (lambda0=0.07)
P_RC_D50_H6 = 0.169717061682355900


def test_p_rc_eta_one_ignores_blockage(radio, blockers):
    cfg = radio.replace(eta=1.0)
    link = comm_link(cfg, 40.0, 6.0)
    hand = cfg.P_t * cfg.G_t * cfg.G_rv / link.slant**2
    assert p_rc(cfg, link, blockers, p_los=0.0) == pytest.approx(hand, rel=1e-14)
    assert p_rc(cfg, link, blockers, p_los=0.7) == pytest.approx(hand, rel=1e-14)


def test_p_rc_array_ratio(radio, blockers):
    link = comm_link(radio, 30.0, 6.0)
    small = p_rc(radio.replace(G_rv=32.0), link, blockers)
    big = p_rc(radio.replace(G_rv=128.0), link, blockers)
    assert small / big == 32.0 / 128.0


def test_p_rc_defaults(radio, blockers):
    assert p_rc(radio, comm_link(radio, 50.0, 6.0), blockers) == pytest.approx(
        P_RC_D50_H6, rel=1e-9)


def test_i_ref_identities(radio, blockers):
    link = comm_link(radio, 45.0, 7.0)
    full = radio.n_p * radar_echo_power(radio, link.slant)
    assert i_ref(radio.replace(eta=1.0), link, blockers) == pytest.approx(full, rel=1e-14)
    assert i_ref(radio, link, blockers, p_los=1.0) == pytest.approx(full, rel=1e-14)
    # same mixture as the detection echo when the NLoS branch counts fully
    assert i_ref(radio, link, blockers) == pytest.approx(
        sum(echo_power_split(radio, link, blockers)), rel=1e-14)


def test_budget_fields(radio, blockers, comm_field):
    b = link_budget(radio, comm_link(radio, 60.0, 6.0), blockers, comm_field)
    assert min(b.P_rc, b.I_ref, b.I_c, b.N) >= 0
    assert b.sinr_c == pytest.approx(b.P_rc / (b.N + b.I_c + b.I_ref))


def test_trivial_success(radio, blockers):
    # no noise, interferers or echo leakage (RCS 0)
    cfg = radio.replace(N=0.0, S_ref=0.0)
    assert pr_succ_c(cfg, 70.0, 6.0, blockers, InterfererField(density=0.0)) == 1.0


def test_log_terms_are_additive(radio, blockers, comm_field):
    for d in (10.0, 50.0, 120.0):
        p, parts = pr_succ_c(radio, d, 6.0, blockers, comm_field, detail=True)
        total = sum(math.log(parts[k]) for k in ("noise", "ref", "laplace"))
        assert math.log(p) == pytest.approx(total, rel=1e-12, abs=1e-12)


def test_monotone_in_distance(radio, blockers, comm_field):
    for h in (3.0, 6.0, 9.0):
        vals = [pr_succ_c(radio, d, h, blockers, comm_field) for d in np.linspace(5, 200, 40)]
        assert all(0.0 <= v <= 1.0 for v in vals)
        assert all(b <= a for a, b in zip(vals, vals[1:]))


def test_monotone_in_obstacle_density(radio, comm_field):
    for d in (10.0, 30.0, 50.0, 80.0):
        vals = [pr_succ_c(radio, d, 6.0, presets.blockers(lam), comm_field)
                for lam in (0.1, 0.2, 0.3, 0.5)]
        assert all(b <= a for a, b in zip(vals, vals[1:])), (d, vals)


def test_comm_declines_slower_than_detection(radio, blockers, sensing_field, comm_field):
    def crossing(f):
        return optimize.brentq(lambda d: f(d) - 0.9, 1.0, 500.0, xtol=1e-9)

    def slope(f, d, e=1e-3):
        return (f(d + e) - f(d - e)) / (2 * e)

    fc = lambda d: pr_succ_c(radio, d, 6.0, blockers, comm_field)
    fs = lambda d: pr_succ_s(radio, d, 6.0, blockers, sensing_field)
    assert abs(slope(fc, crossing(fc))) < abs(slope(fs, crossing(fs)))


def test_threshold_one_gives_zero(radio, blockers, comm_field):
    r, ok = comm_range_expectation(radio, 6.0, blockers, comm_field, threshold=1.0)
    assert r == 0.0 and not ok


def test_operational_range_threshold_met(radio, blockers, comm_field):
    r, ok = comm_range_expectation(radio, 6.0, blockers, comm_field)
    assert ok
    assert pr_succ_c(radio, r, 6.0, blockers, comm_field) >= 0.8
    assert pr_succ_c(radio, r + 0.01, 6.0, blockers, comm_field) < 0.8


def test_operational_range_non_decreasing_in_height(radio, blockers, comm_field):
    r = [comm_range_expectation(radio, float(h), blockers, comm_field)[0] for h in range(1, 11)]
    assert all(b >= a - 1e-3 for a, b in zip(r, r[1:])), r


def test_analytic_range_solves_mean_power_inequality(radio, blockers, comm_field):
    h = 6.0
    r = comm_range_analytic(radio, h, blockers, comm_field)
    from jcscoop.interference import expected_interference
    link = comm_link(radio, r, h)
    p = pr_los(link, blockers)
    den = radio.beta_c * (radio.N + expected_interference(comm_field, link, blockers)
                          + i_ref(radio, link, blockers, p))
    assert r**2 == pytest.approx((radio.eta + (1 - radio.eta) * p) / den, rel=1e-8)


def test_analytic_and_operational_agree(radio, blockers, comm_field):
    analytic, _ = comm_range_expectation(radio, 6.0, blockers, comm_field, mode="analytic")
    operational, _ = comm_range_expectation(radio, 6.0, blockers, comm_field)
    print(f"comm range at h=6: analytic {analytic:.2f} m, operational {operational:.2f} m")
    assert analytic == pytest.approx(operational, rel=0.2)


def test_unknown_mode(radio, blockers, comm_field):
    with pytest.raises(ValueError):
        comm_range_expectation(radio, 6.0, blockers, comm_field, mode="bogus")
