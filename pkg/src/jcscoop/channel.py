"""LoS/NLoS blockage probability and single-link power formulas.

Blockers are modelled as vertical cylinders whose centres form a planar
Poisson process of density ``lambda0`` with common radius ``r0`` and
log-normally distributed heights.  A link is blocked when a cylinder
intersects the ground projection of the ray and is taller than the ray
at the point of closest approach.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .errors import DomainError, NumericalError

SQRT2 = math.sqrt(2.0)

DEFAULT_ALPHA = 2.0
DEFAULT_ETA = 1e-5


@dataclass(frozen=True)
class LognormalHeightModel:
    mu0: float
    sigma0: float
    m0: float | None = None
    nu0: float | None = None

    def __post_init__(self):
        if not (math.isfinite(self.mu0) and math.isfinite(self.sigma0)):
            raise DomainError("mu0 and sigma0 must be finite")
        if self.sigma0 < 0:
            raise DomainError(f"sigma0 must be >= 0, got {self.sigma0}")

    @property
    def median(self) -> float:
        return math.exp(self.mu0)

    @property
    def mean(self) -> float:
        return math.exp(self.mu0 + 0.5 * self.sigma0**2)

    def sample(self, n, rng):
        return np.exp(self.mu0 + self.sigma0 * rng.standard_normal(n))


@dataclass(frozen=True)
class LinkGeometry:
    """Ground distance ``d`` between a transmitter at height ``h1`` and a
    receiver at height ``h2``."""

    d: float
    h1: float
    h2: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.d) and self.d > 0):
            raise DomainError(f"link distance must be finite and > 0, got {self.d}")
        if not (math.isfinite(self.h1) and self.h1 > 0):
            raise DomainError(f"transmitter height must be finite and > 0, got {self.h1}")
        if not (math.isfinite(self.h2) and self.h2 >= 0):
            raise DomainError(f"receiver height must be >= 0, got {self.h2}")

    @property
    def slant(self) -> float:
        return math.hypot(self.d, self.h1 - self.h2)

    def with_distance(self, d: float) -> "LinkGeometry":
        return LinkGeometry(d, self.h1, self.h2)


@dataclass(frozen=True)
class BlockerStats:
    r0: float
    lambda0: float
    heights: LognormalHeightModel

    def __post_init__(self):
        if not self.r0 > 0:
            raise DomainError(f"blocker radius r0 must be > 0, got {self.r0}")
        if not self.lambda0 >= 0:
            raise DomainError(f"blocker density must be >= 0, got {self.lambda0}")

    def with_density(self, lambda0: float) -> "BlockerStats":
        return BlockerStats(self.r0, lambda0, self.heights)


def lognormal_from_moments(m0: float, nu0: float) -> LognormalHeightModel:
    """Log-normal parameters matching a height mean ``m0`` and variance ``nu0``."""
    if not (math.isfinite(m0) and m0 > 0):
        raise DomainError(f"mean height must be > 0, got {m0}")
    if not (math.isfinite(nu0) and nu0 >= 0):
        raise DomainError(f"height variance must be >= 0, got {nu0}")
    ratio = 1.0 + nu0 / m0**2
    sigma2 = math.log1p(nu0 / m0**2)
    mu0 = math.log(m0 / math.sqrt(ratio))
    return LognormalHeightModel(mu0=mu0, sigma0=math.sqrt(sigma2), m0=m0, nu0=nu0)


def _ccdf(h, model: LognormalHeightModel):
    # complementary CDF, defined for h >= 0 (G(0) = 1)
    h = np.asarray(h, dtype=float)
    with np.errstate(divide="ignore"):
        logh = np.log(h)
    if model.sigma0 == 0:
        return np.where(h < math.exp(model.mu0), 1.0, 0.0)
    return 0.5 * special.erfc((logh - model.mu0) / (SQRT2 * model.sigma0))


def height_cdf(h, model: LognormalHeightModel):
    """Log-normal height CDF ``F(h)``.  With ``sigma0 == 0`` this is a unit
    step at ``exp(mu0)``."""
    arr = np.asarray(h, dtype=float)
    if np.any(~(arr > 0)):
        raise DomainError("height_cdf requires h > 0")
    out = 1.0 - _ccdf(arr, model)
    return float(out) if out.ndim == 0 else out


def ray_height(x, link: LinkGeometry):
    """Height of the straight ray at ground offset ``x`` from the receiver."""
    arr = np.asarray(x, dtype=float)
    if np.any(arr < 0) or np.any(arr > link.d):
        raise DomainError(f"x must lie in [0, {link.d}]")
    out = link.h2 + (arr / link.d) * (link.h1 - link.h2)
    return float(out) if out.ndim == 0 else out


def _ccdf_primitive(u, model: LognormalHeightModel):
    """Psi(u) = int_0^u G(v) dv = E[min(H, u)] for u >= 0."""
    u = np.asarray(u, dtype=float)
    if model.sigma0 == 0:
        return np.minimum(u, math.exp(model.mu0))
    mu, s = model.mu0, model.sigma0
    with np.errstate(divide="ignore"):
        logu = np.log(u)
    partial = math.exp(mu + 0.5 * s * s) * special.ndtr((logu - mu - s * s) / s)
    return u * _ccdf(u, model) + partial


def blockage_interval(d, r0: float):
    """Effective (centred) integration interval of the blockage exponent.

    Terminals cannot sit inside a blocker, so discs of radius ``r0`` around
    both ends are excluded.  That removes ``pi*r0**2`` of strip area, i.e. a
    length of ``pi*r0/2`` split evenly between the two ends.
    """
    d = np.asarray(d, dtype=float)
    length = np.maximum(0.0, d - 0.5 * math.pi * r0)
    offset = np.minimum(0.25 * math.pi * r0, 0.5 * d)
    return offset, length


def blockage_integral(link: LinkGeometry, heights: LognormalHeightModel, r0: float,
                      method: str = "quad") -> float:
    """int G(ray height) dx over the effective interval of the link."""
    offset, length = (float(v) for v in blockage_interval(link.d, r0))
    if length <= 0:
        return 0.0
    slope = (link.h1 - link.h2) / link.d
    if method == "exact":
        a = link.h2 + slope * offset
        if slope == 0:
            return float(length * _ccdf(a, heights))
        b = a + slope * length
        return float((_ccdf_primitive(b, heights) - _ccdf_primitive(a, heights)) / slope)
    if method != "quad":
        raise ValueError(f"unknown method {method!r}")

    def integrand(x):
        return float(_ccdf(link.h2 + slope * (x + offset), heights))

    points = None
    if slope != 0:
        knee = (heights.median - link.h2) / slope - offset
        if 0 < knee < length:
            points = [knee]
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, err = integrate.quad(integrand, 0.0, length, epsabs=1e-9, epsrel=1e-10,
                                      limit=500, points=points)
        except integrate.IntegrationWarning as exc:
            raise NumericalError(
                f"blockage integral did not converge for {link} ({exc})") from exc
    return val


def pr_los(link: LinkGeometry, blockers: BlockerStats, method: str = "quad") -> float:
    """Probability that no blocker obstructs the link.

    ``method="quad"`` integrates the height CCDF along the ray with adaptive
    quadrature; ``method="exact"`` uses the log-normal partial-expectation
    primitive instead (same value, much cheaper).
    """
    if blockers.lambda0 == 0:
        return 1.0
    integral = blockage_integral(link, blockers.heights, blockers.r0, method=method)
    return math.exp(-2.0 * blockers.r0 * blockers.lambda0 * integral)


def pr_los_array(d, h1: float, h2: float, blockers: BlockerStats):
    """Vectorised ``pr_los`` over ground distances (exact primitive)."""
    d = np.atleast_1d(np.asarray(d, dtype=float))
    if np.any(d <= 0):
        raise DomainError("distances must be > 0")
    if blockers.lambda0 == 0:
        return np.ones_like(d)
    offset, length = blockage_interval(d, blockers.r0)
    slope = (h1 - h2) / d
    a = h2 + slope * offset
    if h1 == h2:
        integral = length * _ccdf(a, blockers.heights)
    else:
        b = a + slope * length
        integral = (_ccdf_primitive(b, blockers.heights)
                    - _ccdf_primitive(a, blockers.heights)) / slope
    integral = np.where(length > 0, integral, 0.0)
    return np.exp(-2.0 * blockers.r0 * blockers.lambda0 * integral)


def path_power(P_t: float, x: float, alpha: float = DEFAULT_ALPHA,
               eta: float = DEFAULT_ETA, los: bool = True) -> float:
    if x <= 0:
        raise DomainError("path_power is singular at x <= 0")
    if P_t <= 0 or alpha <= 0 or not (0 < eta <= 1):
        raise DomainError("require P_t > 0, alpha > 0, 0 < eta <= 1")
    p = P_t * x ** (-alpha)
    return p if los else eta * p


def expected_comm_power(link: LinkGeometry, blockers: BlockerStats, P_t: float,
                        alpha: float = DEFAULT_ALPHA, eta: float = DEFAULT_ETA) -> float:
    """LoS/NLoS mixture of received power over the slant distance."""
    p = pr_los(link, blockers)
    base = P_t * link.slant ** (-alpha)
    return base * p + eta * base * (1.0 - p)
