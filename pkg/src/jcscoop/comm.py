"""Infrastructure-to-vehicle communication: received power, echo
interference, success probability and range."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .channel import BlockerStats, LinkGeometry, pr_los
from .errors import DomainError, NumericalError
from .interference import InterfererField, expected_interference, laplace_interference
from .sensing import RadioConfig, laplace_argument, largest_distance, radar_echo_power

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class CommLinkBudget:
    P_rc: float
    I_ref: float
    I_c: float
    N: float

    @property
    def sinr_c(self) -> float:
        return self.P_rc / (self.N + self.I_c + self.I_ref)


def comm_link(config: RadioConfig, d: float, h: float) -> LinkGeometry:
    return LinkGeometry(d, h, config.target_height)


def _mixture(p: float, eta: float) -> float:
    return p + eta * (1.0 - p)


def p_rc(config: RadioConfig, link: LinkGeometry, blockers: BlockerStats,
         p_los: float | None = None) -> float:
    p = pr_los(link, blockers) if p_los is None else p_los
    c = config
    return c.P_t * c.G_t * link.slant ** (-c.alpha) * c.symbol_gain * c.G_rv * _mixture(p, c.eta)


def i_ref(config: RadioConfig, link: LinkGeometry, blockers: BlockerStats,
          p_los: float | None = None) -> float:
    """Scattered and reflected echo power reaching the vehicle."""
    p = pr_los(link, blockers) if p_los is None else p_los
    return config.n_p * radar_echo_power(config, link.slant) * _mixture(p, config.eta)


def link_budget(config: RadioConfig, link: LinkGeometry, blockers: BlockerStats,
                field: InterfererField) -> CommLinkBudget:
    p = pr_los(link, blockers)
    i_c = expected_interference(field, link, blockers)
    return CommLinkBudget(p_rc(config, link, blockers, p), i_ref(config, link, blockers, p),
                          i_c, config.N)


def sinr_c(config: RadioConfig, link: LinkGeometry, blockers: BlockerStats,
           field: InterfererField) -> float:
    return link_budget(config, link, blockers, field).sinr_c


def pr_succ_c(config: RadioConfig, d: float, h: float, blockers: BlockerStats,
              field: InterfererField, beta: float | None = None, detail: bool = False):
    """Probability that the I2V SINR clears ``beta`` (default ``beta_c``).

    Product of a noise term, an echo-interference term and the Laplace
    transform of the co-channel interference.
    """
    beta = config.beta_c if beta is None else beta
    link = comm_link(config, d, h)
    p = pr_los(link, blockers)
    prc = p_rc(config, link, blockers, p)
    if prc <= 0:
        log.debug("zero communication power at d=%s h=%s", d, h)
        return (0.0, {}) if detail else 0.0
    noise_term = math.exp(-beta * config.N / prc)
    ref_term = math.exp(-beta * i_ref(config, link, blockers, p) / prc)
    s = laplace_argument(config, beta, prc)
    lt = laplace_interference(s, field, link, blockers).value
    val = noise_term * ref_term * lt
    if detail:
        return val, {"noise": noise_term, "ref": ref_term, "laplace": lt}
    return val


def comm_range_analytic(config: RadioConfig, h: float, blockers: BlockerStats,
                        field: InterfererField, r_max: float = 5000.0, n_scan: int = 400) -> float:
    """Range from the mean-power inequality ``r^alpha <= P_t g (eta + (1-eta) Pr_LoS) /
    (beta_c (N + E[I_c] + E[I_ref]))``.

    The right-hand side depends on ``r`` and is steep, so plain fixed-point
    iteration oscillates.  We scan ``r - F(r)`` on a log grid and polish the
    largest sign change with brentq.  Returns 0 if the inequality never holds.
    """
    c = config

    def excess(r):
        link = comm_link(c, r, h)
        p = pr_los(link, blockers)
        i_c = expected_interference(field, link, blockers)
        num = c.P_t * c.symbol_gain * (c.eta + (1.0 - c.eta) * p)
        den = c.beta_c * (c.N + i_c + i_ref(c, link, blockers, p))
        if den <= 0:
            raise DomainError("communication range is unbounded with zero noise and interference")
        return r - (num / den) ** (1.0 / c.alpha)

    grid = np.geomspace(1e-2, r_max, n_scan)
    vals = np.array([excess(r) for r in grid])
    neg = np.nonzero(vals < 0)[0]
    if neg.size == 0:
        return 0.0
    i = int(neg[-1])
    if i == grid.size - 1:
        return float(r_max)
    r = optimize.brentq(excess, grid[i], grid[i + 1], xtol=1e-9, rtol=1e-12)
    if not np.isfinite(r):
        raise NumericalError(f"communication range root is not finite at h={h}")
    return float(r)


def comm_range_expectation(config: RadioConfig, h: float, blockers: BlockerStats,
                           field: InterfererField, mode: str = "operational",
                           threshold: float = 0.8, tol: float = 1e-3) -> tuple[float, bool]:
    """Communication range and a flag telling whether the threshold was met
    anywhere.  ``mode="operational"`` returns the largest distance with
    success probability >= ``threshold``; ``mode="analytic"`` inverts the
    mean-power inequality."""
    if mode == "analytic":
        r = comm_range_analytic(config, h, blockers, field)
        return r, r > 0
    if mode != "operational":
        raise ValueError(f"unknown mode {mode!r}")
    r = largest_distance(lambda d: pr_succ_c(config, d, h, blockers, field), threshold, tol=tol)
    return r, r > 0
