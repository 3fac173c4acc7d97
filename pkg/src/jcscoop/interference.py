"""Stochastic-geometry interference: H-functions, Laplace transform of the
aggregate interference and its Campbell-theorem mean."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy import integrate, special

from .channel import (DEFAULT_ALPHA, DEFAULT_ETA, SQRT2, BlockerStats, LinkGeometry,
                      pr_los_array)
from .errors import ApproximationError, DomainError, NumericalError

GEOMETRIES = ("annulus", "line")


@dataclass(frozen=True)
class InterfererField:
    """Co-channel transmitters around a receiver.

    ``density`` is the device intensity.  In ``annulus`` geometry the mean
    interference integrates over the plane ring ``r_coop <= x <= r_max``;
    in ``line`` geometry devices sit on the road line on both sides.
    """

    density: float = 1e-8
    r_coop: float = 100.0
    r_max: float = 2000.0
    per_device_power: float = 1.0
    alpha: float = DEFAULT_ALPHA
    eta: float = DEFAULT_ETA
    geometry: str = "annulus"

    def __post_init__(self):
        if self.density < 0:
            raise DomainError("interferer density must be >= 0")
        if not 0 <= self.r_coop < self.r_max:
            raise DomainError("require 0 <= r_coop < r_max")
        if self.geometry not in GEOMETRIES:
            raise DomainError(f"geometry must be one of {GEOMETRIES}")

    @property
    def angular_factor(self) -> float:
        return 2.0 * math.pi if self.geometry == "annulus" else 2.0

    def with_density(self, density: float) -> "InterfererField":
        return replace(self, density=density)


@dataclass(frozen=True)
class LaplaceEval:
    s: float
    value: float
    h_los: float
    h_nlos: float


def _channel_weight(x, link: LinkGeometry, blockers: BlockerStats, channel: str, eta: float,
                    los_fn=None):
    p = los_fn(x) if los_fn is not None else pr_los_array(x, link.h1, link.h2, blockers)
    if channel == "los":
        return p
    if channel == "nlos":
        return eta * (1.0 - p)
    raise DomainError(f"channel must be 'los' or 'nlos', got {channel!r}")


def _power_tail(w: float, alpha: float, x0: float) -> float:
    """int_x0^inf w / (x^alpha + w) dx for alpha > 1."""
    a = (alpha - 1.0) / alpha
    u = w * x0 ** (-alpha)
    return w * x0 ** (1.0 - alpha) / (alpha - 1.0) * float(special.hyp2f1(1.0, a, a + 1.0, -u))


def h_function_numeric(beta: float, link: LinkGeometry, blockers: BlockerStats,
                       channel: str = "los", alpha: float = DEFAULT_ALPHA,
                       eta: float = DEFAULT_ETA, los_fn=None) -> float:
    """H_ch(beta) = int_0^inf [1 - 1/(1 + beta x^-alpha Pr_ch(x))] dx.

    ``Pr_ch`` is evaluated at the integration distance ``x`` using the
    heights of ``link``.  ``los_fn`` overrides the LoS probability (used by
    tests and by the Monte-Carlo engine with tabulated estimates).
    """
    if beta < 0:
        raise DomainError("beta must be >= 0")
    if beta == 0:
        return 0.0

    def q(x):
        return _channel_weight(np.maximum(x, 1e-12), link, blockers, channel, eta, los_fn)

    # Pr_LoS is non-increasing in distance, so both channel weights are monotone
    # and approach their value at infinity; that bounds the neglected tail.
    q_far = float(np.atleast_1d(q(np.array([1e30])))[0])
    q_max = float(np.max(np.atleast_1d(q(np.geomspace(1e-3, 1e6, 400)))))
    q_max = max(q_max, q_far)
    if q_max == 0:
        return 0.0
    if alpha <= 1 and q_far > 0:
        raise DomainError(
            f"H integral diverges: requires alpha > 1 when Pr_ch does not vanish (alpha={alpha})")

    def integrand(x):
        if x == 0:
            return 1.0
        w = beta * float(np.atleast_1d(q(np.array([x])))[0])
        return w / (x**alpha + w)

    # start the doubling segments at the width of the integrand's peak
    scale = min(1.0, (beta * q_max) ** (1.0 / alpha)) if alpha > 0 else 1.0
    total, lo, hi = 0.0, 0.0, scale
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        for _ in range(400):
            epsabs = 1e-13 * max(total, scale)
            piece, err = integrate.quad(integrand, lo, hi, epsabs=epsabs, epsrel=1e-10,
                                        limit=400)
            if not np.isfinite(piece) or piece < 0 or err > max(10 * epsabs, 1e-6 * piece):
                raise NumericalError(
                    f"H quadrature failed on [{lo}, {hi}]: value {piece}, error estimate {err}")
            total += piece
            q_hi = float(np.atleast_1d(q(np.array([hi])))[0])
            if q_far > 0 and abs(q_hi - q_far) <= 1e-10 * q_far:
                total += _power_tail(beta * q_far, alpha, hi)
                break
            if alpha > 1:
                bound = beta * max(q_hi, q_far) * hi ** (1.0 - alpha) / (alpha - 1.0)
                if bound <= 1e-12 * total:
                    break
            elif hi > 1e3 and piece <= 1e-12 * total:
                break
            lo, hi = hi, 2.0 * hi
        else:
            raise NumericalError("H quadrature tail did not converge")
    return total


def _erfc_term(link: LinkGeometry, blockers: BlockerStats) -> float:
    hm = blockers.heights
    # the unbound x of the printed form is read as the link distance: log(x h / d) = log(h1)
    return float(special.erfc((math.log(link.h1) - hm.mu0) / (SQRT2 * hm.sigma0)))


def h_los_closed(beta: float, link: LinkGeometry, blockers: BlockerStats) -> float:
    """Closed-form LoS H-function as printed (erfc at the link's own height)."""
    if beta <= 0:
        raise DomainError("beta must be > 0")
    lam, r0, d = blockers.lambda0, blockers.r0, link.d
    e = _erfc_term(link, blockers)
    inner = math.exp(-0.5 * lam * r0 * (math.pi * r0 - 2.0 * d) * e) / beta
    return math.pi / (2.0 * SQRT2 * inner**0.25)


def h_nlos_closed(beta: float, link: LinkGeometry, blockers: BlockerStats) -> float:
    """Closed-form NLoS H-function as printed.

    Raises :class:`ApproximationError` when the base of the 3/4 power is
    negative, which happens whenever ``d > pi*r0/2`` and ``lambda0 > 0``.
    """
    if beta <= 0:
        raise DomainError("beta must be > 0")
    lam, r0, d = blockers.lambda0, blockers.r0, link.d
    e = _erfc_term(link, blockers)
    lead = -0.25 * math.pi * beta * math.exp(-d * lam * r0 * e)
    diff = math.exp(d * lam * r0 * e) - math.exp(0.5 * lam * math.pi * r0**2 * e)
    base = beta * (math.exp(0.5 * lam * r0 * (math.pi * r0 - 2.0 * d) * e) - 1.0)
    if base < 0:
        raise ApproximationError(
            f"closed-form H_NLoS breaks down: negative base {base:.3e} under the 3/4 power")
    if base == 0:
        if lead * diff == 0:
            return 0.0
        raise ApproximationError("closed-form H_NLoS breaks down: zero denominator")
    return lead * diff / base**0.75


def laplace_interference(s: float, field: InterfererField, link: LinkGeometry,
                         blockers: BlockerStats, mode: str = "numeric") -> LaplaceEval:
    """E[exp(-s I)] for unit-mean exponential fading on every interferer.

    The H-functions are evaluated at ``beta = s * per_device_power``, so the
    printed ``beta``-only form corresponds to ``s = beta / P_t``.
    """
    if s < 0:
        raise DomainError("Laplace argument must be >= 0")
    if s == 0 or field.density == 0:
        return LaplaceEval(s, 1.0, 0.0, 0.0)
    beta = s * field.per_device_power
    if mode == "numeric":
        h_l = h_function_numeric(beta, link, blockers, "los", field.alpha, field.eta)
        h_n = h_function_numeric(beta, link, blockers, "nlos", field.alpha, field.eta)
    elif mode == "closed":
        h_l = h_los_closed(beta, link, blockers)
        h_n = h_nlos_closed(beta, link, blockers)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    value = math.exp(-field.angular_factor * field.density * (h_l + h_n))
    return LaplaceEval(s, value, h_l, h_n)


def expected_interference(field: InterfererField, link: LinkGeometry,
                          blockers: BlockerStats) -> float:
    """Mean aggregate interference by Campbell's theorem.

    Each device at distance ``x`` contributes ``P x^-alpha`` through LoS and
    ``eta P x^-alpha`` through NLoS, weighted by the LoS probability at
    ``x``.  Annulus geometry includes the area element ``x dx dtheta``.
    """
    if field.density == 0:
        return 0.0
    annulus = field.geometry == "annulus"
    if math.isinf(field.r_max):
        if (annulus and field.alpha <= 2) or (not annulus and field.alpha <= 1):
            raise DomainError("mean interference diverges for an unbounded field at this alpha")
    if field.r_coop == 0 and field.alpha >= (2 if annulus else 1):
        raise DomainError("mean interference diverges at r_coop = 0")

    P, a, eta = field.per_device_power, field.alpha, field.eta

    def radial(x):
        p = float(pr_los_array(np.array([x]), link.h1, link.h2, blockers)[0])
        g = P * x ** (-a) * (p + eta * (1.0 - p))
        return g * x if annulus else g

    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            if math.isinf(field.r_max):
                val, _ = integrate.quad(radial, field.r_coop, np.inf, epsabs=0, epsrel=1e-10,
                                        limit=500)
            else:
                edges = np.geomspace(max(field.r_coop, 1e-9), field.r_max, 9)
                if field.r_coop == 0:
                    edges[0] = 0.0
                val = sum(integrate.quad(radial, lo, hi, epsabs=0, epsrel=1e-10, limit=500)[0]
                          for lo, hi in zip(edges[:-1], edges[1:]))
        except integrate.IntegrationWarning as exc:
            raise NumericalError(f"Campbell integral did not converge: {exc}") from exc
    return field.density * field.angular_factor * val
