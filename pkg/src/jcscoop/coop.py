"""Cooperative detection: joint probability, cooperation range, and
coverage between neighbouring gantries."""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from functools import partial

import numpy as np

from .channel import BlockerStats, pr_los_array
from .comm import comm_link, comm_range_expectation, pr_succ_c
from .errors import DomainError
from .interference import InterfererField, expected_interference
from .mc import TrialConfig, interferer_tables, sinr_ordering_probability
from .sensing import (RadioConfig, interferer_link_sensing, pr_succ_s, radar_echo_power,
                      sensing_link, sinr_s)
from . import comm as _comm


@dataclass(frozen=True)
class DeploymentPlan:
    h: float = 7.0
    spacing: float | None = None
    gamma_co: float = 0.8
    height_bounds: tuple[float, float] = (4.0, 10.0)
    spacing_bounds: tuple[float, float] = (150.0, 300.0)

    def __post_init__(self):
        if not 0 <= self.gamma_co <= 1:
            raise DomainError("gamma_co must lie in [0, 1]")
        lo, hi = self.height_bounds
        if not 0 < lo <= hi:
            raise DomainError("invalid height bounds")
        if not lo <= self.h <= hi:
            raise DomainError(f"h={self.h} outside height bounds {self.height_bounds}")
        slo, shi = self.spacing_bounds
        if not 0 < slo <= shi:
            raise DomainError("invalid spacing bounds")
        if self.spacing is not None and self.spacing <= 0:
            raise DomainError("spacing must be > 0")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class CoverageResult:
    h: float
    gamma_co: float
    coverage: float
    d_v_max: float
    d_T_max: float
    spacing: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)


def results_to_json(results) -> str:
    return json.dumps([r.to_dict() for r in results], indent=2)


DEFAULT_COOP_TRIALS = TrialConfig(n_trials=2000, root_seed=0, estimator="coop")


def pr_coop(config: RadioConfig, d_T: float, d_v: float, h: float, blockers: BlockerStats,
            sensing_field: InterfererField, comm_field: InterfererField,
            trial: TrialConfig | None = None, tables=None, detail: bool = False):
    """Joint cooperative-detection probability.

    ``[P(SINR_c >= tau SINR_s) Ps(v) + P(tau SINR_s >= SINR_c) Pc(v)] * Ps(T)``
    with ``tau = beta_s / beta_c``.  The ordering probability comes from
    shared-scene Monte Carlo; the same seed is used at every distance so
    sweeps share random numbers.
    """
    if not (d_T > 0 and d_v > 0):
        raise DomainError("d_T and d_v must be > 0")
    ps_t = pr_succ_s(config, d_T, h, blockers, sensing_field)
    ps_v = ps_t if d_v == d_T else pr_succ_s(config, d_v, h, blockers, sensing_field)
    pc_v = pr_succ_c(config, d_v, h, blockers, comm_field)
    if ps_t == 0 or (ps_v == 0 and pc_v == 0):
        val, order = 0.0, float("nan")
    else:
        trial = DEFAULT_COOP_TRIALS if trial is None else trial
        order = sinr_ordering_probability(trial, config, d_v, h, blockers, sensing_field,
                                          comm_field, tables=tables).p_hat
        val = (order * ps_v + (1.0 - order) * pc_v) * ps_t
    if detail:
        return val, {"ps_T": ps_t, "ps_v": ps_v, "pc_v": pc_v, "ordering": order}
    return val


def _mean_sinr_s(config, h, d, blockers, sensing_field):
    return sinr_s(config, sensing_link(config, d, h), blockers, sensing_field)


def _mean_sinr_c(config, h, d, blockers, comm_field):
    return _comm.sinr_c(config, comm_link(config, d, h), blockers, comm_field)


def solve_cooperation_range(config: RadioConfig, h: float, d_T: float, blockers: BlockerStats,
                            sensing_field: InterfererField, comm_field: InterfererField,
                            tol: float = 1e-2, d_min: float = 0.1,
                            d_max: float = 5000.0) -> float:
    """Largest ``d_v`` with ``min(SINR_s(d_v), SINR_c(d_v) beta_s/beta_c,
    SINR_s(d_T)) >= beta_s``, by bisection.  0 if the target leg or the
    shortest vehicle distance already fails."""
    bs, ratio = config.beta_s, config.beta_c / config.beta_s
    if _mean_sinr_s(config, h, d_T, blockers, sensing_field) < bs:
        return 0.0

    def ok(d):
        return (_mean_sinr_s(config, h, d, blockers, sensing_field) >= bs
                and _mean_sinr_c(config, h, d, blockers, comm_field) / ratio >= bs)

    if not ok(d_min):
        return 0.0
    lo, hi = d_min, d_min
    while True:
        hi = min(2.0 * hi, d_max)
        if not ok(hi):
            break
        lo = hi
        if hi >= d_max:
            return d_max
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if ok(mid) else (lo, mid)
    return lo


@dataclass(frozen=True)
class CoopProfile:
    """Pr_coop at the distinct serving distances of one gantry spacing."""
    h: float
    spacing: float
    positions: np.ndarray
    serving: np.ndarray
    pr: np.ndarray


def coop_profile(config: RadioConfig, h: float, blockers: BlockerStats,
                 sensing_field: InterfererField, comm_field: InterfererField,
                 n_points: int = 100, spacing: float | None = None, comm_threshold: float = 0.8,
                 trial: TrialConfig | None = None) -> CoopProfile:
    if n_points < 10:
        raise DomainError("n_points must be >= 10")
    if spacing is None:
        spacing, _ = comm_range_expectation(config, h, blockers, comm_field,
                                            threshold=comm_threshold, tol=1e-2)
    pos = (np.arange(n_points) + 0.5) * spacing / n_points if spacing > 0 else np.zeros(n_points)
    serving = np.minimum(pos, spacing - pos)
    pr = np.zeros(n_points)
    if spacing > 0:
        trial = DEFAULT_COOP_TRIALS if trial is None else trial
        tables = interferer_tables(config, h, blockers, sensing_field, comm_field, trial.root_seed)
        uniq, inv = np.unique(np.round(serving, 9), return_inverse=True)
        vals = np.array([pr_coop(config, t, t, h, blockers, sensing_field, comm_field, trial,
                                 tables) for t in uniq])
        pr = vals[inv]
    return CoopProfile(h, float(spacing), pos, serving, pr)


def coverage_from_profile(profile: CoopProfile, gamma_co: float) -> CoverageResult:
    ok = profile.pr >= gamma_co
    cov = float(ok.mean())
    dmax = float(profile.serving[ok].max()) if ok.any() else 0.0
    return CoverageResult(profile.h, gamma_co, cov, dmax, dmax, profile.spacing)


def coverage_probability(config: RadioConfig, plan: DeploymentPlan, blockers: BlockerStats,
                         sensing_field: InterfererField, comm_field: InterfererField,
                         n_points: int = 100, trial: TrialConfig | None = None) -> CoverageResult:
    """Fraction of positions between two gantries, each served by the nearer
    one at ``d_T = d_v``, whose cooperative probability reaches ``gamma_co``.
    Spacing defaults to the operational communication range."""
    prof = coop_profile(config, plan.h, blockers, sensing_field, comm_field, n_points,
                        plan.spacing, trial=trial)
    return coverage_from_profile(prof, plan.gamma_co)


def _profile_job(h, config, blockers, sensing_field, comm_field, n_points, trial):
    return coop_profile(config, h, blockers, sensing_field, comm_field, n_points, trial=trial)


def coverage_sweep(config: RadioConfig, heights, gammas, blockers: BlockerStats,
                   sensing_field: InterfererField, comm_field: InterfererField,
                   n_points: int = 100, trial: TrialConfig | None = None,
                   workers: int = 1) -> list[CoverageResult]:
    """Coverage for every (h, gamma_co) pair; one profile per height."""
    job = partial(_profile_job, config=config, blockers=blockers, sensing_field=sensing_field,
                  comm_field=comm_field, n_points=n_points, trial=trial)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            profiles = list(ex.map(job, heights))
    else:
        profiles = [job(h) for h in heights]
    return [coverage_from_profile(p, g) for p in profiles for g in gammas]


# ---------------------------------------------------------------- Algorithm 1

class OpCounter:
    """Counts element-level operations."""

    def __init__(self):
        self.count = 0

    def add(self, k: int):
        self.count += int(k)


def mean_sinr_arrays(config: RadioConfig, h: float, d, blockers: BlockerStats,
                     sensing_field: InterfererField, comm_field: InterfererField):
    """Vectorised mean SINR_s and SINR_c at ground distances ``d``."""
    c = config
    d = np.asarray(d, dtype=float)
    x = np.hypot(d, h - c.target_height)
    p = pr_los_array(d, h, c.target_height, blockers)
    per_beam = np.array([radar_echo_power(c, v) for v in np.atleast_1d(x)]).reshape(x.shape)
    i_s = expected_interference(sensing_field, interferer_link_sensing(1.0, h), blockers)
    i_c = expected_interference(comm_field, comm_link(c, 1.0, h), blockers)
    s = c.n_p * per_beam * p / (c.N + i_s + c.eta * c.n_p * per_beam * (1 - p))
    mix = p + c.eta * (1 - p)
    prc = c.P_t * c.G_t * x ** (-c.alpha) * c.symbol_gain * c.G_rv * mix
    sc = prc / (c.N + i_c + c.n_p * per_beam * mix)
    return s, sc


@dataclass(frozen=True)
class Algorithm1Result:
    success: np.ndarray
    cover_fraction: np.ndarray
    d_v_max: float
    ops: int


def algorithm1(sinr_s_v, sinr_c_v, sinr_s_t, d_v, beta_s: float, beta_c: float,
               gamma_co: float, counter: OpCounter | None = None) -> Algorithm1Result:
    """Cooperation test per datapoint, then coverage by traversal.

    Each datapoint carries ``SINR_s`` and ``SINR_c`` at its vehicle distance
    and ``SINR_s`` at its target distance.  The first pass takes the minimum
    of the three (scaled) legs and thresholds it; the second pass computes,
    for every datapoint, the success fraction among datapoints no farther
    than it.
    """
    counter = OpCounter() if counter is None else counter
    sv, sc, st = (np.asarray(a, dtype=float) for a in (sinr_s_v, sinr_c_v, sinr_s_t))
    d_v = np.asarray(d_v, dtype=float)
    n = d_v.size
    legs = np.stack([sv, sc * beta_s / beta_c, st])
    counter.add(n)                   # gather the SINR triple
    m = legs.min(axis=0)
    counter.add(3 * n)               # minimum of three legs
    ok = m >= beta_s
    counter.add(n)                   # threshold count
    frac = np.empty(n)
    for i in range(n):
        within = d_v <= d_v[i]
        frac[i] = np.count_nonzero(ok & within) / np.count_nonzero(within)
        counter.add(n)               # traversal of all datapoints
    good = frac >= gamma_co
    d_max = float(d_v[good].max()) if good.any() else 0.0
    return Algorithm1Result(ok, frac, d_max, counter.count)


def synthetic_datapoints(n: int, seed=None, d_range=(1.0, 300.0)):
    rng = np.random.default_rng(seed)
    return rng.uniform(*d_range, n), rng.uniform(*d_range, n)


def sweep_complexity_check(n_data: int, config: RadioConfig | None = None, h: float = 7.0,
                           blockers: BlockerStats | None = None,
                           sensing_field: InterfererField | None = None,
                           comm_field: InterfererField | None = None, seed: int = 0) -> int:
    """Operation count of one instrumented Algorithm-1 run on ``n_data``
    synthetic datapoints."""
    if n_data < 1:
        raise DomainError("n_data must be >= 1")
    from . import presets
    config = presets.radio() if config is None else config
    blockers = presets.blockers() if blockers is None else blockers
    sensing_field = presets.sensing_field() if sensing_field is None else sensing_field
    comm_field = presets.comm_field() if comm_field is None else comm_field
    d_t, d_v = synthetic_datapoints(n_data, seed)
    sv, sc = mean_sinr_arrays(config, h, d_v, blockers, sensing_field, comm_field)
    st, _ = mean_sinr_arrays(config, h, d_t, blockers, sensing_field, comm_field)
    return algorithm1(sv, sc, st, d_v, config.beta_s, config.beta_c, 0.8).ops


def complexity_bound(n: int) -> int:
    return n * n + 5 * n
