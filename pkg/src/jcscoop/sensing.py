"""Radar-equation echo power, detection SINR and detection probability."""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, replace

from scipy import special

from .channel import (DEFAULT_ALPHA, DEFAULT_ETA, SQRT2, BlockerStats, LinkGeometry,
                      pr_los)
from .errors import ApproximationError, DomainError, NumericalError
from .interference import InterfererField, expected_interference, laplace_interference

log = logging.getLogger(__name__)

SPEED_OF_LIGHT = 299_792_458.0
LAPLACE_MODES = ("signal", "transmit")


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


@dataclass(frozen=True)
class RadioConfig:
    """Transceiver and threshold parameters.  Gains and losses are linear,
    thresholds are given in dB and exposed linear via ``beta_s``/``beta_c``.

    ``laplace_mode`` selects the Laplace argument of the interference term:
    ``"signal"`` uses ``beta / P_signal``, ``"transmit"`` uses ``beta / P_t``
    (the transform written in terms of the bare threshold).
    """

    P_t: float = 1.0
    G_t: float = 128.0
    G_r: float = 128.0
    G_rv: float = 32.0
    f_c: float = 24e9
    alpha: float = DEFAULT_ALPHA
    eta: float = DEFAULT_ETA
    N: float = 1e-11
    L_s: float = 1.0
    n_p: int = 16
    S_ref: float = 1.0
    beta_s_db: float = 7.0
    beta_c_db: float = 13.0
    target_height: float = 1.5
    nlos_conditional: float = 0.0
    laplace_mode: str = "signal"
    symbol_gain: float = 1.0

    def __post_init__(self):
        if self.P_t <= 0 or self.f_c <= 0 or self.N < 0:
            raise DomainError("require P_t > 0, f_c > 0, N >= 0")
        if self.L_s < 1:
            raise DomainError("scattering loss L_s must be >= 1")
        if self.n_p < 1:
            raise DomainError("beam count n_p must be >= 1")
        if not 0 <= self.eta <= 1:
            raise DomainError("eta must lie in [0, 1]")
        if not 0 <= self.nlos_conditional <= 1:
            raise DomainError("nlos_conditional must lie in [0, 1]")
        if self.laplace_mode not in LAPLACE_MODES:
            raise DomainError(f"laplace_mode must be one of {LAPLACE_MODES}")

    @property
    def lambda_w(self) -> float:
        return SPEED_OF_LIGHT / self.f_c

    @property
    def beta_s(self) -> float:
        return db_to_linear(self.beta_s_db)

    @property
    def beta_c(self) -> float:
        return db_to_linear(self.beta_c_db)

    def replace(self, **kw) -> "RadioConfig":
        return replace(self, **kw)

    def to_dict(self) -> dict:
        return asdict(self)


def radar_echo_power(config: RadioConfig, r: float) -> float:
    """Single-beam echo power from the radar range equation at range ``r``."""
    if not r > 0:
        raise DomainError("radar range must be > 0")
    c = config
    return (c.P_t * c.G_t * c.S_ref / (4.0 * math.pi * r * r) ** 2
            * c.G_r * c.lambda_w**2 / (4.0 * math.pi) / c.L_s)


def sensing_link(config: RadioConfig, d: float, h: float) -> LinkGeometry:
    return LinkGeometry(d, h, config.target_height)


def echo_power_split(config: RadioConfig, link: LinkGeometry, blockers: BlockerStats,
                     p_los: float | None = None) -> tuple[float, float]:
    """(P_rs_LoS, P_rs_NLoS) summed over the ``n_p`` beams."""
    p = pr_los(link, blockers) if p_los is None else p_los
    per_beam = radar_echo_power(config, link.slant)
    los = config.n_p * p * per_beam
    nlos = config.eta * config.n_p * (1.0 - p) * per_beam
    return los, nlos


def received_echo_power(config: RadioConfig, link: LinkGeometry, blockers: BlockerStats) -> float:
    """Total useful echo power; NLoS echoes count with ``nlos_conditional``."""
    los, nlos = echo_power_split(config, link, blockers)
    return los + config.nlos_conditional * nlos


def expected_prs_los_quadrature(config: RadioConfig, blockers: BlockerStats, h1: float,
                                h2: float, d: float) -> float:
    link = LinkGeometry(d, h1, h2)
    return config.n_p * radar_echo_power(config, link.slant) * pr_los(link, blockers)


def closed_form_z(blockers: BlockerStats, h: float, d: float) -> float:
    hm = blockers.heights
    arg = h * (d - 0.5 * math.pi * blockers.r0) / d - hm.mu0
    if not arg > 0:
        raise ApproximationError(
            f"closed form undefined: log argument h(1 - pi r0 / 2d) - mu0 = {arg:.4g} <= 0")
    if hm.sigma0 == 0:
        raise ApproximationError("closed form undefined for sigma0 = 0")
    return math.log(arg) / (SQRT2 * hm.sigma0)


def expected_prs_los_closed_form(config: RadioConfig, blockers: BlockerStats, h: float,
                                 d: float) -> float:
    """Truncated-series closed form of the mean LoS echo power, transcribed
    term by term.  Only trustworthy (if at all) for ``|z| < 1``."""
    z = closed_form_z(blockers, h, d)
    lam, r0 = blockers.lambda0, blockers.r0
    mu, sg = blockers.heights.mu0, blockers.heights.sigma0
    p_res = radar_echo_power(config, math.hypot(d, h - config.target_height))
    sp = math.sqrt(math.pi)
    bracket = (3 * math.pi * lam * r0 * special.erf(z)
               - lam * r0 * (6 * z**2 - 8 * sp * z + 3 * math.pi) * z**2
               + 6 * lam * r0 * math.exp(-z * z)
               - 2 * sp * z**2 * (6 * mu + SQRT2 * sg * (4 * z - 3 * sp) + 3)
               + 6 * math.pi * (2 * mu + 1) * z)
    pre = d**2 * config.eta * lam * config.n_p * p_res * r0 * sg / (3 * SQRT2 * math.pi * h**2)
    return pre * bracket


def interferer_link_sensing(d: float, h: float) -> LinkGeometry:
    # interference at the infrastructure receiver comes from peer infrastructure
    return LinkGeometry(d, h, h)


def sinr_s(config: RadioConfig, link: LinkGeometry, blockers: BlockerStats,
           field: InterfererField) -> float:
    los, nlos = echo_power_split(config, link, blockers)
    i_c = expected_interference(field, interferer_link_sensing(link.d, link.h1), blockers)
    return los / (config.N + i_c + nlos)


def laplace_argument(config: RadioConfig, beta: float, signal: float) -> float:
    if config.laplace_mode == "signal":
        return beta / signal
    return beta / config.P_t


def pr_succ_s(config: RadioConfig, d: float, h: float, blockers: BlockerStats,
              field: InterfererField, beta: float | None = None, detail: bool = False):
    """Probability that the detection SINR clears ``beta`` (default ``beta_s``)."""
    if not d > 0:
        raise DomainError("distance must be > 0")
    beta = config.beta_s if beta is None else beta
    link = sensing_link(config, d, h)
    los, nlos = echo_power_split(config, link, blockers)
    if los <= 0:
        log.debug("zero LoS echo power at d=%s h=%s; detection probability is 0", d, h)
        return (0.0, {"noise": 0.0, "laplace": 0.0}) if detail else 0.0
    noise_term = math.exp(-beta * (config.N + nlos) / los)
    s = laplace_argument(config, beta, los)
    lt = laplace_interference(s, field, interferer_link_sensing(d, h), blockers).value
    p = noise_term * lt
    return (p, {"noise": noise_term, "laplace": lt}) if detail else p


def _radar_constant(config: RadioConfig) -> float:
    c = config
    return c.n_p * c.P_t * c.G_t * c.G_r * c.lambda_w**2 * c.S_ref / (c.L_s * (4 * math.pi) ** 3)


def detection_range_expectation(config: RadioConfig, h: float, blockers: BlockerStats,
                                field: InterfererField, max_iter: int = 100,
                                tol: float = 1e-6) -> float:
    """Fourth-root range bound at SINR = beta_s, solved by fixed-point iteration.

    The NLoS echo term is re-evaluated at the current range estimate.
    """
    k = _radar_constant(config)
    dh = h - config.target_height
    r = (k / (config.beta_s * max(config.N, 1e-300))) ** 0.25
    i_c = None
    for _ in range(max_iter):
        d = math.sqrt(max(r * r - dh * dh, 1e-6))
        if i_c is None:
            i_c = expected_interference(field, interferer_link_sensing(d, h), blockers)
        p = pr_los(LinkGeometry(d, h, config.target_height), blockers)
        nlos = config.eta * radar_echo_power(config, r) * config.n_p * (1.0 - p)
        denom = config.beta_s * (config.N + nlos + i_c)
        if denom <= 0:
            raise DomainError("detection range is unbounded with zero noise and interference")
        r_new = (k / denom) ** 0.25
        if abs(r_new - r) < tol:
            return r_new
        r = r_new
    raise NumericalError(f"detection range fixed point did not converge (last r={r})")


def largest_distance(prob, threshold: float, d_min: float = 0.5, d_max: float = 5000.0,
                     tol: float = 1e-3) -> float:
    """Largest ``d`` with ``prob(d) >= threshold`` for a non-increasing ``prob``.

    Returns 0 when even ``d_min`` fails.
    """
    if prob(d_min) < threshold:
        return 0.0
    lo, hi = d_min, d_min
    while True:
        hi = min(2.0 * hi, d_max)
        if prob(hi) < threshold:
            break
        lo = hi
        if hi >= d_max:
            return d_max
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if prob(mid) >= threshold:
            lo = mid
        else:
            hi = mid
    return lo


def detection_range(config: RadioConfig, h: float, blockers: BlockerStats,
                    field: InterfererField, threshold: float = 0.8, tol: float = 1e-3) -> float:
    """Largest ground distance at which the detection probability stays above
    ``threshold``."""
    return largest_distance(lambda d: pr_succ_s(config, d, h, blockers, field), threshold,
                            tol=tol)
