"""Monte-Carlo oracle: realize blocker scenes and interferer fields, test
blockage geometrically and count SINR threshold exceedances.

Seeding: trials are grouped in fixed-size chunks.  Chunk ``c`` of grid
point ``i`` for purpose ``k`` draws from
``SeedSequence(root_seed, spawn_key=(i, c, k))``.  The chunk layout does not
depend on the worker count, so results are bit-identical for any ``workers``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace
from functools import partial
from pathlib import Path

import numpy as np

from .channel import BlockerStats, LinkGeometry
from .comm import comm_link
from .errors import DomainError
from .interference import InterfererField
from .scene import SceneRealization, blocked_mask, realize_scene
from .sensing import RadioConfig, interferer_link_sensing, radar_echo_power

ESTIMATORS = ("los", "detect", "comm", "coop")
MODES = ("mean_field", "geometric")
# scenes used for the LoS fraction behind the mean-field desired-link power
MEAN_FIELD_LOS_TRIALS = 200_000
# substream codes
_LOS, _SCENE, _DETECT, _COMM, _TARGET, _TABLE = range(6)


@dataclass(frozen=True)
class TrialConfig:
    n_trials: int = 10_000
    root_seed: int = 0
    region: float = 200.0
    estimator: str = "los"
    chunk_size: int = 2500
    workers: int = 1
    # Rayleigh fading on the desired link; off gives a deterministic SINR
    fading: bool = True

    def __post_init__(self):
        if self.n_trials < 100:
            raise DomainError("n_trials must be >= 100")
        if self.estimator not in ESTIMATORS:
            raise DomainError(f"estimator must be one of {ESTIMATORS}")
        if self.chunk_size < 1 or self.workers < 1:
            raise DomainError("chunk_size and workers must be >= 1")
        if not 0 <= self.root_seed < 2**64:
            raise DomainError("root_seed must be a 64-bit unsigned integer")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class CurvePoint:
    d: float
    p_hat: float
    stderr: float
    n: int


@dataclass(frozen=True)
class EmpiricalCurve:
    points: tuple[CurvePoint, ...]
    label: str = ""

    @property
    def d(self) -> np.ndarray:
        return np.array([p.d for p in self.points])

    @property
    def p_hat(self) -> np.ndarray:
        return np.array([p.p_hat for p in self.points])

    @property
    def stderr(self) -> np.ndarray:
        return np.array([p.stderr for p in self.points])

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["d", "p_hat", "stderr", "n"])
        for p in self.points:
            w.writerow([repr(p.d), repr(p.p_hat), repr(p.stderr), p.n])
        if path is not None:
            Path(path).write_text(buf.getvalue())
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps({"label": self.label, "points": [asdict(p) for p in self.points]})

    @classmethod
    def from_json(cls, text: str) -> "EmpiricalCurve":
        d = json.loads(text)
        return cls(tuple(CurvePoint(**p) for p in d["points"]), d.get("label", ""))


def point_from_outcomes(d: float, outcomes: np.ndarray) -> CurvePoint:
    n = int(outcomes.size)
    p = float(np.count_nonzero(outcomes)) / n
    return CurvePoint(float(d), p, math.sqrt(p * (1.0 - p) / n), n)


def null_stderr(p: float, n: int) -> float:
    """Binomial standard error under a hypothesised probability ``p``."""
    return math.sqrt(p * (1.0 - p) / n)


def binomial_ci(point: CurvePoint, z: float = 1.96) -> tuple[float, float]:
    return max(0.0, point.p_hat - z * point.stderr), min(1.0, point.p_hat + z * point.stderr)


def chunk_rng(root_seed: int, point: int, chunk: int, purpose: int) -> np.random.Generator:
    ss = np.random.SeedSequence(root_seed, spawn_key=(point, chunk, purpose))
    return np.random.Generator(np.random.PCG64(ss))


def _chunks(n: int, size: int):
    return [min(size, n - s) for s in range(0, n, size)]


def _run_job(job):
    fn, root, point, chunk, n = job
    return fn(root, point, chunk, n)


def run_trials(trial: TrialConfig, fn, point: int = 0) -> np.ndarray:
    """Evaluate ``fn(root_seed, point, chunk, n) -> bool array`` over all chunks
    and concatenate in chunk order."""
    jobs = [(fn, trial.root_seed, point, c, n)
            for c, n in enumerate(_chunks(trial.n_trials, trial.chunk_size))]
    if trial.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=trial.workers) as ex:
            parts = list(ex.map(_run_job, jobs))
    else:
        parts = [_run_job(j) for j in jobs]
    return np.concatenate(parts)


# ---------------------------------------------------------------- blockage

def sample_blocked(rng, n: int, d: float, h1: float, h2: float,
                   blockers: BlockerStats) -> np.ndarray:
    """Blockage outcome of ``n`` independent scenes for one link.

    Cylinders of radius ``r0`` with lognormal heights are scattered as a PPP
    of density ``lambda0``; the receiver (height ``h2``) sits at the origin,
    the transmitter (height ``h1``) at ``(d, 0)``.  Centres closer than
    ``r0`` to either terminal are excluded.  Only cylinders whose centre lies
    within ``r0`` of the segment can block, so only that strip is sampled.
    """
    r0, lam = blockers.r0, blockers.lambda0
    if lam == 0 or d <= 0 or n == 0:
        return np.zeros(n, dtype=bool)
    counts = rng.poisson(lam * 2.0 * r0 * d, size=n)
    tot = int(counts.sum())
    x = rng.uniform(0.0, d, tot)
    y = rng.uniform(-r0, r0, tot)
    heights = blockers.heights.sample(tot, rng)
    excluded = (x * x + y * y < r0 * r0) | ((d - x) ** 2 + y * y < r0 * r0)
    hit = ~excluded & (heights > h2 + (x / d) * (h1 - h2))
    owner = np.repeat(np.arange(n), counts)
    return np.bincount(owner[hit], minlength=n) > 0


def blocker_scene(blockers: BlockerStats, link: LinkGeometry, rng) -> SceneRealization:
    """Explicit scene of blocker cylinders around a link on the x-axis
    (receiver at the origin), for inspection and JSON dumps."""
    from .scene import Obstacle
    r0, d = blockers.r0, link.d
    area = (d + 2 * r0) * 2 * r0
    k = rng.poisson(blockers.lambda0 * area)
    x = rng.uniform(-r0, d + r0, k)
    y = rng.uniform(-r0, r0, k)
    keep = (np.hypot(x, y) >= r0) & (np.hypot(d - x, y) >= r0)
    h = blockers.heights.sample(int(keep.sum()), rng)
    obs = tuple(Obstacle(float(a), float(b), r0, float(c), "stationary")
                for a, b, c in zip(x[keep], y[keep], h))
    return SceneRealization(obs, d + r0)


def _los_chunk(root, point, chunk, n, *, d, h1, h2, blockers):
    rng = chunk_rng(root, point, chunk, _LOS)
    return ~sample_blocked(rng, n, d, h1, h2, blockers)


def _scene_los_chunk(root, point, chunk, n, *, link, classes, ppp, extent, factory):
    rng = chunk_rng(root, point, chunk, _LOS)
    tx = (0.5 * link.d, 0.0, link.h1)
    rx = (-0.5 * link.d, 0.0, link.h2)
    out = np.empty(n, dtype=bool)
    for i in range(n):
        scene = factory(rng) if factory is not None else realize_scene(classes, ppp, extent, rng)
        x, y, r, h = scene.arrays()
        out[i] = not (len(x) and blocked_mask(x, y, r, h, tx, rx).any())
    return out


def estimate_pr_los(trial: TrialConfig, link: LinkGeometry, classes=None, ppp=None,
                    blockers: BlockerStats | None = None, scene_factory=None,
                    point: int = 0) -> CurvePoint:
    """Fraction of realized scenes in which nothing blocks the link.

    Scenes come from ``blockers`` (cylinder PPP), from ``classes``/``ppp``
    (full road scenes, link centred on the road axis), or from
    ``scene_factory(rng)``.
    """
    if blockers is not None:
        fn = partial(_los_chunk, d=link.d, h1=link.h1, h2=link.h2, blockers=blockers)
    elif scene_factory is not None or (classes is not None and ppp is not None):
        fn = partial(_scene_los_chunk, link=link, classes=classes, ppp=ppp,
                     extent=max(trial.region, link.d), factory=scene_factory)
    else:
        raise DomainError("need blockers, classes+ppp or a scene factory")
    return point_from_outcomes(link.d, run_trials(trial, fn, point))


def estimate_pr_los_curve(trial: TrialConfig, distances, h1: float, h2: float,
                          blockers: BlockerStats) -> EmpiricalCurve:
    pts = tuple(estimate_pr_los(trial, LinkGeometry(float(d), h1, h2), blockers=blockers,
                                point=i) for i, d in enumerate(distances))
    return EmpiricalCurve(pts, f"los h1={h1} h2={h2}")


def los_table(h1: float, h2: float, blockers: BlockerStats, r_max: float, root_seed: int = 0,
              n_scenes: int = 4000, n_grid: int = 40):
    """Geometric LoS probability on a log-spaced distance grid, used for the
    interferer links."""
    grid = np.geomspace(0.5, max(r_max, 1.0), n_grid)
    p = np.empty(n_grid)
    for i, d in enumerate(grid):
        rng = chunk_rng(root_seed, i, 0, _TABLE)
        p[i] = 1.0 - sample_blocked(rng, n_scenes, float(d), h1, h2, blockers).mean()
    # enforce the monotone shape of the true curve
    return grid, np.minimum.accumulate(p)


def _table_eval(table, x):
    grid, p = table
    return np.interp(np.log(np.maximum(x, grid[0])), np.log(grid), p)


def sample_interference(rng, n: int, field: InterfererField, table, mode: str) -> np.ndarray:
    """Aggregate interference of ``n`` independent field realizations.

    Devices form a radial PPP of intensity ``angular_factor * density`` per
    metre on ``(0, r_max]`` with unit-mean exponential fading.  In
    ``mean_field`` mode the LoS and NLoS contributions come from two
    independent copies weighted by ``Pr_LoS(x)`` and ``eta (1 - Pr_LoS(x))``;
    in ``geometric`` mode each device draws its own LoS state.
    """
    if field.density == 0 or n == 0:
        return np.zeros(n)
    mu = field.angular_factor * field.density * field.r_max

    def ppp():
        counts = rng.poisson(mu, size=n)
        x = np.maximum(rng.uniform(0.0, field.r_max, int(counts.sum())), 1e-12)
        return np.repeat(np.arange(n), counts), x

    def total(owner, x, w):
        power = field.per_device_power * x ** (-field.alpha) * rng.exponential(size=x.size) * w
        return np.bincount(owner, weights=power, minlength=n)

    if mode == "mean_field":
        o1, x1 = ppp()
        o2, x2 = ppp()
        return (total(o1, x1, _table_eval(table, x1))
                + total(o2, x2, field.eta * (1.0 - _table_eval(table, x2))))
    owner, x = ppp()
    los = rng.random(x.size) < _table_eval(table, x)
    return total(owner, x, np.where(los, 1.0, field.eta))


# ---------------------------------------------------------------- success

@dataclass(frozen=True)
class _PointSpec:
    config: RadioConfig
    d: float
    h: float
    blockers: BlockerStats
    sensing_field: InterfererField
    comm_field: InterfererField
    mode: str
    p_hat: float
    table_s: tuple
    table_c: tuple
    fading: bool = True


def _fade(rng, n, spec: _PointSpec) -> np.ndarray:
    return rng.exponential(size=n) if spec.fading else np.ones(n)


def _los_state(rng, n, spec: _PointSpec, d: float):
    if spec.mode == "mean_field":
        return np.full(n, spec.p_hat)
    link = LinkGeometry(d, spec.h, spec.config.target_height)
    return (~sample_blocked(rng, n, d, link.h1, link.h2, spec.blockers)).astype(float)


def _detect(rng, n, spec: _PointSpec, q: np.ndarray, d: float) -> np.ndarray:
    c = spec.config
    per_beam = radar_echo_power(c, math.hypot(d, spec.h - c.target_height))
    S = c.n_p * per_beam * q
    nlos = c.eta * c.n_p * per_beam * (1.0 - q)
    g = _fade(rng, n, spec)
    I = sample_interference(rng, n, spec.sensing_field, spec.table_s, spec.mode)
    beta = c.beta_s
    ok = S > 0
    safe = np.where(ok, S, 1.0)
    s = beta / safe if c.laplace_mode == "signal" else np.full(n, beta / c.P_t)
    return ok & (g >= beta * (c.N + nlos) / safe + s * I)


def _comm(rng, n, spec: _PointSpec, q: np.ndarray, d: float) -> np.ndarray:
    c = spec.config
    x = math.hypot(d, spec.h - c.target_height)
    mix = q + c.eta * (1.0 - q)
    S = c.P_t * c.G_t * x ** (-c.alpha) * c.symbol_gain * c.G_rv * mix
    i_ref = c.n_p * radar_echo_power(c, x) * mix
    g = _fade(rng, n, spec)
    I = sample_interference(rng, n, spec.comm_field, spec.table_c, spec.mode)
    beta = c.beta_c
    s = beta / S if c.laplace_mode == "signal" else np.full(n, beta / c.P_t)
    return g >= beta * (c.N + i_ref) / S + s * I


def _success_chunk(root, point, chunk, n, *, kind, spec: _PointSpec):
    q = _los_state(chunk_rng(root, point, chunk, _SCENE), n, spec, spec.d)
    if kind == "detect":
        return _detect(chunk_rng(root, point, chunk, _DETECT), n, spec, q, spec.d)
    if kind == "comm":
        return _comm(chunk_rng(root, point, chunk, _COMM), n, spec, q, spec.d)
    # coop: the vehicle is detected and served on the same scene, and the
    # target at the same distance is detected on its own scene
    det_v = _detect(chunk_rng(root, point, chunk, _DETECT), n, spec, q, spec.d)
    com_v = _comm(chunk_rng(root, point, chunk, _COMM), n, spec, q, spec.d)
    rt = chunk_rng(root, point, chunk, _TARGET)
    det_t = _detect(rt, n, spec, _los_state(rt, n, spec, spec.d), spec.d)
    return det_v & com_v & det_t


def interferer_tables(config: RadioConfig, h: float, blockers: BlockerStats,
                      sensing_field: InterfererField, comm_field: InterfererField,
                      root_seed: int = 0, n_scenes: int = 4000):
    s_link = interferer_link_sensing(1.0, h)
    c_link = comm_link(config, 1.0, h)
    ts = los_table(s_link.h1, s_link.h2, blockers, sensing_field.r_max, root_seed, n_scenes)
    tc = los_table(c_link.h1, c_link.h2, blockers, comm_field.r_max, root_seed + 1, n_scenes)
    return ts, tc


def estimate_success(trial: TrialConfig, kind: str, config: RadioConfig, distances, h: float,
                     blockers: BlockerStats, sensing_field: InterfererField,
                     comm_field: InterfererField, mode: str = "mean_field",
                     tables=None, point_offset: int = 0) -> EmpiricalCurve:
    """Empirical success fraction over a grid of ground distances.

    ``mode="mean_field"`` draws the desired-link power with the scene-averaged
    LoS fraction (estimated geometrically at each distance), which is the
    model behind the analytic success probabilities.  ``mode="geometric"``
    branches each trial on its own blockage outcome.
    """
    if kind not in ("detect", "comm", "coop"):
        raise DomainError("kind must be detect, comm or coop")
    if mode not in MODES:
        raise DomainError(f"mode must be one of {MODES}")
    if tables is None:
        tables = interferer_tables(config, h, blockers, sensing_field, comm_field,
                                   trial.root_seed)
    pts = []
    for i, d in enumerate(distances):
        point = point_offset + i
        d = float(d)
        p_hat = 1.0
        if mode == "mean_field":
            # small LoS fractions still dominate the eta floor, so resolve them
            los_trial = replace(trial, n_trials=max(trial.n_trials, MEAN_FIELD_LOS_TRIALS))
            p_hat = float(run_trials(los_trial, partial(
                _los_chunk, d=d, h1=h, h2=config.target_height, blockers=blockers),
                point).mean())
        spec = _PointSpec(config, d, h, blockers, sensing_field, comm_field, mode, p_hat,
                          tables[0], tables[1], trial.fading)
        out = run_trials(trial, partial(_success_chunk, kind=kind, spec=spec), point)
        pts.append(point_from_outcomes(d, out))
    return EmpiricalCurve(tuple(pts), f"{kind} {mode} h={h}")


def _ordering_chunk(root, point, chunk, n, *, spec: _PointSpec, tau: float):
    c = spec.config
    q = _los_state(chunk_rng(root, point, chunk, _SCENE), n, spec, spec.d)
    x = math.hypot(spec.d, spec.h - c.target_height)
    per_beam = radar_echo_power(c, x)
    rs = chunk_rng(root, point, chunk, _DETECT)
    S = c.n_p * per_beam * q
    I_s = sample_interference(rs, n, spec.sensing_field, spec.table_s, spec.mode)
    g_s = rs.exponential(size=n)
    rc = chunk_rng(root, point, chunk, _COMM)
    mix = q + c.eta * (1.0 - q)
    P = c.P_t * c.G_t * x ** (-c.alpha) * c.symbol_gain * c.G_rv * mix
    I_c = sample_interference(rc, n, spec.comm_field, spec.table_c, spec.mode)
    g_c = rc.exponential(size=n)
    # a noiseless, interference-free leg has infinite SINR; inf compares fine
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        sinr_s = g_s * S / (c.N + c.eta * c.n_p * per_beam * (1 - q) + I_s)
        sinr_c = g_c * P / (c.N + c.n_p * per_beam * mix + I_c)
        return sinr_c >= tau * sinr_s


def sinr_ordering_probability(trial: TrialConfig, config: RadioConfig, d_v: float, h: float,
                              blockers: BlockerStats, sensing_field: InterfererField,
                              comm_field: InterfererField, tau: float | None = None,
                              tables=None, point: int = 0) -> CurvePoint:
    """Pr{SINR_c >= tau SINR_s} with both SINRs drawn on the same blocker scene."""
    tau = config.beta_s / config.beta_c if tau is None else tau
    if tables is None:
        tables = interferer_tables(config, h, blockers, sensing_field, comm_field,
                                   trial.root_seed)
    spec = _PointSpec(config, float(d_v), h, blockers, sensing_field, comm_field, "geometric",
                      1.0, tables[0], tables[1])
    out = run_trials(trial, partial(_ordering_chunk, spec=spec, tau=tau), point)
    return point_from_outcomes(d_v, out)


def sample_annulus_interference(rng, n: int, field: InterfererField, h1: float, h2: float,
                                blockers: BlockerStats) -> np.ndarray:
    """Unfaded aggregate power from a planar PPP of devices in the annulus
    ``r_coop <= x <= r_max``, each with its own geometric LoS outcome."""
    if math.isinf(field.r_max):
        raise DomainError("annulus sampling needs a finite r_max")
    area = math.pi * (field.r_max**2 - field.r_coop**2)
    counts = rng.poisson(field.density * area, size=n)
    tot = int(counts.sum())
    # radius with density proportional to x on [r_coop, r_max]
    x = np.sqrt(rng.uniform(field.r_coop**2, field.r_max**2, tot))
    los = np.array([not sample_blocked(rng, 1, float(v), h1, h2, blockers)[0] for v in x],
                   dtype=bool)
    power = field.per_device_power * x ** (-field.alpha) * np.where(los, 1.0, field.eta)
    return np.bincount(np.repeat(np.arange(n), counts), weights=power, minlength=n)
