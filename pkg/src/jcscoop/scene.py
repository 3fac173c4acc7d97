"""Obstacle and vehicle populations, and concrete scene realizations.

Object positions follow a superimposed Poisson model: a road-bound process
(``lambda1`` objects per km of road, uniform across the carriageway) plus a
planar roadside process (``lambda2`` objects per km^2), followed by a
Matérn type-II hard-core pass that removes objects closer than the
protection interval to an object with a smaller random mark.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import optimize

from .errors import DomainError, NumericalError

CLASS_LABELS = ("sedan", "suv", "bus", "truck", "stationary")


@dataclass(frozen=True)
class GaussianMixture:
    """Unnormalised Gaussian mixture ``f(x) = sum A_i exp(-(x-B_i)^2 / 2 C_i^2)``.

    ``components`` holds ``(A_i, B_i, C_i)`` triples.  For sampling, the
    weights are rescaled to sum to one.
    """

    components: tuple[tuple[float, float, float], ...]

    def __post_init__(self):
        comps = tuple(tuple(float(v) for v in c) for c in self.components)
        object.__setattr__(self, "components", comps)
        if not comps:
            raise DomainError("a mixture needs at least one component")
        for a, _, c in comps:
            if not (math.isfinite(a) and a >= 0):
                raise DomainError(f"mixture weights must be finite and >= 0, got {a}")
            if not c > 0:
                raise DomainError(f"mixture std must be > 0, got {c}")
        if sum(a for a, _, _ in comps) <= 0:
            raise DomainError("mixture weights sum to zero")

    @classmethod
    def single(cls, mean: float, std: float) -> "GaussianMixture":
        return cls(((1.0, mean, std),))

    @property
    def weights(self) -> np.ndarray:
        w = np.array([a for a, _, _ in self.components])
        return w / w.sum()

    @property
    def means(self) -> np.ndarray:
        return np.array([b for _, b, _ in self.components])

    @property
    def stds(self) -> np.ndarray:
        return np.array([c for _, _, c in self.components])

    @property
    def mean(self) -> float:
        return float(self.weights @ self.means)

    def cdf(self, x, truncate: bool = False):
        """Mixture CDF.  With ``truncate`` each component is cut at 0, which
        is the law :func:`sample_mixture` draws from."""
        from scipy.stats import norm
        x = np.asarray(x, dtype=float)[..., None]
        c = norm.cdf(x, self.means, self.stds)
        if truncate:
            c0 = norm.cdf(0.0, self.means, self.stds)
            c = np.clip((c - c0) / (1.0 - c0), 0.0, 1.0)
        return (self.weights * c).sum(-1)

    def to_dict(self) -> dict:
        return {"components": [list(c) for c in self.components]}

    @classmethod
    def from_dict(cls, d: dict) -> "GaussianMixture":
        return cls(tuple(tuple(c) for c in d["components"]))


@dataclass(frozen=True)
class ObstacleClass:
    name: str
    height: GaussianMixture
    radius: GaussianMixture
    density: float = 1.0

    def __post_init__(self):
        if self.name not in CLASS_LABELS:
            raise DomainError(f"unknown obstacle class {self.name!r}")
        if self.density < 0:
            raise DomainError("class density must be >= 0")

    def to_dict(self) -> dict:
        return {"name": self.name, "height": self.height.to_dict(),
                "radius": self.radius.to_dict(), "density": self.density}

    @classmethod
    def from_dict(cls, d: dict) -> "ObstacleClass":
        return cls(d["name"], GaussianMixture.from_dict(d["height"]),
                   GaussianMixture.from_dict(d["radius"]), d.get("density", 1.0))


# Table of fitted (mean, std) pairs, height then radius, in metres
TABLE_II = {
    "sedan": ((1.3750, 0.0250), (4.5001, 0.1657)),
    "suv": ((1.6998, 0.0336), (4.7494, 0.0829)),
    "bus": ((2.6498, 0.0169), (6.8995, 0.0333)),
    "truck": ((2.5670, 1.8144), (8.6676, 6.1307)),
    "stationary": ((2.9951, 0.1003), (0.9953, 0.1000)),
}

# relative class frequencies; not part of the measured table
DEFAULT_CLASS_DENSITY = {"sedan": 0.50, "suv": 0.25, "bus": 0.05, "truck": 0.05,
                         "stationary": 0.15}


def table_ii_classes(densities: dict | None = None) -> list[ObstacleClass]:
    densities = DEFAULT_CLASS_DENSITY if densities is None else densities
    return [ObstacleClass(name, GaussianMixture.single(*h), GaussianMixture.single(*r),
                          densities.get(name, 0.0))
            for name, (h, r) in TABLE_II.items()]


def matern2_retention(mu: float) -> float:
    """Retention probability of Matérn type-II thinning when a point has on
    average ``mu`` neighbours within the protection interval."""
    if mu < 1e-8:
        return 1.0 - 0.5 * mu
    return -math.expm1(-mu) / mu


@dataclass(frozen=True)
class SuperimposedPPPModel:
    """``lambda1`` per km of road, ``lambda2`` per km^2, ``lambda_thin`` is the
    (signed) intensity removed by thinning, per km of road."""

    lambda1: float = 150.0
    lambda2: float = 5.0
    lambda_thin: float = -3.65
    protection_interval: float | None = None
    road_width: float = 20.0

    def __post_init__(self):
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise DomainError("component intensities must be >= 0")
        if self.road_width <= 0:
            raise DomainError("road width must be > 0")
        if self.protection_interval is not None and self.protection_interval < 0:
            raise DomainError("protection interval must be >= 0")

    @property
    def road_density(self) -> float:
        """Points per m^2 on the carriageway before thinning."""
        return self.lambda1 / (1000.0 * self.road_width) + self.lambda2 / 1e6

    @property
    def area_density(self) -> float:
        return self.lambda2 / 1e6

    def removed_intensity(self, delta: float) -> float:
        """Expected points removed per km of road for protection interval ``delta``."""
        rho = self.road_density
        return rho * 1000.0 * self.road_width * (1.0 - matern2_retention(rho * math.pi * delta**2))

    @property
    def delta(self) -> float:
        """Protection interval, calibrated from ``lambda_thin`` when not given."""
        if self.protection_interval is not None:
            return self.protection_interval
        return calibrate_protection_interval(self)


def calibrate_protection_interval(model: SuperimposedPPPModel) -> float:
    """Protection interval whose expected removal matches ``|lambda_thin|``."""
    target = abs(model.lambda_thin)
    if target == 0 or model.road_density == 0:
        return 0.0
    total = model.road_density * 1000.0 * model.road_width
    if target >= total:
        raise DomainError("thinning intensity exceeds the superposed intensity")
    hi = 1.0
    while model.removed_intensity(hi) < target:
        hi *= 2.0
        if hi > 1e6:
            raise NumericalError("cannot calibrate the protection interval")
    return optimize.brentq(lambda d: model.removed_intensity(d) - target, 0.0, hi, xtol=1e-12)


@dataclass(frozen=True)
class Obstacle:
    x: float
    y: float
    radius: float
    height: float
    cls: str


@dataclass(frozen=True)
class SceneRealization:
    obstacles: tuple[Obstacle, ...]
    extent: float

    def __len__(self):
        return len(self.obstacles)

    def arrays(self):
        if not self.obstacles:
            z = np.zeros(0)
            return z, z, z, z
        a = np.array([(o.x, o.y, o.radius, o.height) for o in self.obstacles])
        return a[:, 0], a[:, 1], a[:, 2], a[:, 3]

    def to_json(self) -> str:
        return json.dumps({"extent": self.extent,
                           "obstacles": [{"class": o.cls, "x": o.x, "y": o.y,
                                          "radius": o.radius, "height": o.height}
                                         for o in self.obstacles]})

    @classmethod
    def from_json(cls, text: str) -> "SceneRealization":
        d = json.loads(text)
        obs = tuple(Obstacle(o["x"], o["y"], o["radius"], o["height"], o["class"])
                    for o in d["obstacles"])
        return cls(obs, d["extent"])

    def save(self, path):
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path) -> "SceneRealization":
        return cls.from_json(Path(path).read_text())


def _rng(seed):
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def sample_mixture(model: GaussianMixture, n: int, seed=None, max_rounds: int = 1000) -> np.ndarray:
    """``n`` positive draws.  Each draw keeps its component and non-positive
    values are re-drawn from it, so the weights are not distorted."""
    if n < 0:
        raise DomainError("n must be >= 0")
    rng = _rng(seed)
    out = np.empty(n)
    todo = np.arange(n)
    w, m, s = model.weights, model.means, model.stds
    k = rng.choice(len(w), size=n, p=w)
    for _ in range(max_rounds):
        if todo.size == 0:
            return out
        kk = k[todo]
        draw = m[kk] + s[kk] * rng.standard_normal(todo.size)
        ok = draw > 0
        out[todo[ok]] = draw[ok]
        todo = todo[~ok]
    raise NumericalError(f"truncated sampling did not finish after {max_rounds} rounds")


def matern2_thin(points: np.ndarray, delta: float, rng) -> np.ndarray:
    """Boolean mask of retained points under Matérn type-II thinning."""
    n = len(points)
    keep = np.ones(n, dtype=bool)
    if n < 2 or delta <= 0:
        return keep
    from scipy.spatial import cKDTree
    marks = rng.random(n)
    pairs = cKDTree(points).query_pairs(delta, output_type="ndarray")
    if len(pairs):
        i, j = pairs[:, 0], pairs[:, 1]
        loser = np.where(marks[i] > marks[j], i, j)
        keep[loser] = False
    return keep


def sample_positions(model: SuperimposedPPPModel, road_length: float, seed=None,
                     area_half_width: float | None = None) -> np.ndarray:
    """Object positions as an ``(n, 2)`` array.

    The road runs along ``x`` over ``[-road_length/2, road_length/2]`` with
    the carriageway ``|y| <= road_width/2``.  Roadside objects fill the square
    of half-width ``area_half_width`` (default ``road_length/2``).
    """
    if not road_length > 0:
        raise DomainError("road length must be > 0")
    rng = _rng(seed)
    half = 0.5 * road_length
    ahw = half if area_half_width is None else area_half_width
    n1 = rng.poisson(model.lambda1 * road_length / 1000.0)
    n2 = rng.poisson(model.area_density * (2 * ahw) ** 2)
    p1 = np.column_stack([rng.uniform(-half, half, n1),
                          rng.uniform(-0.5 * model.road_width, 0.5 * model.road_width, n1)])
    p2 = rng.uniform(-ahw, ahw, size=(n2, 2))
    pts = np.vstack([p1, p2])
    return pts[matern2_thin(pts, model.delta, rng)]


def realize_scene(classes: list[ObstacleClass], ppp: SuperimposedPPPModel, extent: float,
                  seed=None) -> SceneRealization:
    """Sample positions over ``[-extent, extent]`` and attach class, height and radius."""
    rng = _rng(seed)
    dens = np.array([c.density for c in classes], dtype=float)
    if dens.sum() == 0:
        return SceneRealization((), extent)
    pts = sample_positions(ppp, 2.0 * extent, rng)
    k = rng.choice(len(classes), size=len(pts), p=dens / dens.sum())
    heights = np.empty(len(pts))
    radii = np.empty(len(pts))
    for i, c in enumerate(classes):
        sel = np.flatnonzero(k == i)
        heights[sel] = sample_mixture(c.height, sel.size, rng)
        radii[sel] = sample_mixture(c.radius, sel.size, rng)
    obs = tuple(Obstacle(float(x), float(y), float(r), float(h), classes[i].name)
                for (x, y), r, h, i in zip(pts, radii, heights, k))
    return SceneRealization(obs, extent)


def _closest_ray_point(cx, cy, tx, rx):
    """Ground distance from cylinder centres to the link and the ray height
    there.  A vertical link (same ground point) is tested at its lower end."""
    cx, cy = np.asarray(cx, dtype=float), np.asarray(cy, dtype=float)
    vx, vy = tx[0] - rx[0], tx[1] - rx[1]
    L2 = vx * vx + vy * vy
    if L2 == 0:
        return np.hypot(cx - rx[0], cy - rx[1]), min(tx[2], rx[2])
    u = np.clip(((cx - rx[0]) * vx + (cy - rx[1]) * vy) / L2, 0.0, 1.0)
    dist = np.hypot(rx[0] + u * vx - cx, rx[1] + u * vy - cy)
    return dist, rx[2] + u * (tx[2] - rx[2])


def blocks(obstacle, tx, rx) -> bool:
    """True if the cylinder ``obstacle`` cuts the ray between ``tx`` and ``rx``.

    ``tx``/``rx`` are ``(x, y, h)``; ``obstacle`` has ``x, y, radius, height``.
    """
    if tuple(tx) == tuple(rx):
        raise DomainError("tx and rx coincide")
    dist, ray_h = _closest_ray_point(obstacle.x, obstacle.y, tx, rx)
    return bool(dist <= obstacle.radius and obstacle.height > ray_h)


def blocked_mask(x, y, radius, height, tx, rx) -> np.ndarray:
    """Vectorised :func:`blocks` over arrays of cylinders."""
    dist, ray_h = _closest_ray_point(x, y, tx, rx)
    return (dist <= radius) & (np.asarray(height) > ray_h)


def scene_blocks_link(scene: SceneRealization, tx, rx) -> bool:
    x, y, r, h = scene.arrays()
    return bool(blocked_mask(x, y, r, h, tx, rx).any()) if len(x) else False
