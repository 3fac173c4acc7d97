"""Fit the statistical object models to measured samples: Gaussian mixtures
for class heights/radii, a lognormal for blocker heights, and the intensities
of the superimposed Poisson model from infrastructure-to-object distances."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import optimize
from scipy.cluster.vq import kmeans2
from scipy.special import logsumexp

from .channel import LognormalHeightModel, lognormal_from_moments
from .errors import DomainError, NumericalError
from .scene import (CLASS_LABELS, GaussianMixture, SuperimposedPPPModel, matern2_retention,
                    sample_positions)

HEADER = ("class", "height", "radius", "distance")


class SampleFormatError(ValueError):
    """Malformed sample file.  ``problems`` lists ``(line, message)`` pairs."""

    def __init__(self, path, problems):
        self.problems = list(problems)
        lines = "; ".join(f"line {ln}: {msg}" for ln, msg in self.problems[:20])
        more = f" (+{len(self.problems) - 20} more)" if len(self.problems) > 20 else ""
        super().__init__(f"{path}: {lines}{more}")


@dataclass(frozen=True)
class SampleRow:
    cls: str
    height: float
    radius: float
    distance: float


@dataclass(frozen=True)
class SampleTable:
    rows: tuple[SampleRow, ...]
    source: str = ""

    def __len__(self):
        return len(self.rows)

    def column(self, name: str, cls: str | None = None) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows if cls is None or r.cls == cls])

    def classes(self) -> list[str]:
        return sorted({r.cls for r in self.rows})

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(HEADER)
            for r in self.rows:
                w.writerow([r.cls] + [repr(float(v)) for v in (r.height, r.radius, r.distance)])


def load_samples(path, format: str = "csv") -> SampleTable:
    """Read and validate a ``class,height,radius,distance`` CSV file."""
    if format != "csv":
        raise DomainError(f"unsupported sample format {format!r}")
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"sample file not found: {path}")
    rows, problems = [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip().lower() for h in header) != HEADER:
            raise SampleFormatError(path, [(1, f"expected header {','.join(HEADER)}, got {header}")])
        for ln, rec in enumerate(reader, start=2):
            if not rec or all(not f.strip() for f in rec):
                continue
            if len(rec) != 4:
                problems.append((ln, f"expected 4 fields, got {len(rec)}"))
                continue
            label = rec[0].strip().lower()
            if label not in CLASS_LABELS:
                problems.append((ln, f"unknown class {rec[0]!r}"))
                continue
            vals = []
            for name, raw in zip(HEADER[1:], rec[1:]):
                try:
                    v = float(raw)
                except ValueError:
                    problems.append((ln, f"{name} is not numeric: {raw!r}"))
                    break
                if not (math.isfinite(v) and v > 0):
                    problems.append((ln, f"{name} must be finite and > 0, got {raw.strip()}"))
                    break
                vals.append(v)
            else:
                rows.append(SampleRow(label, *vals))
    if problems:
        raise SampleFormatError(path, problems)
    return SampleTable(tuple(rows), str(path))


def _data_floor(x: np.ndarray) -> float:
    span = float(np.ptp(x))
    return 1e-6 * span if span > 0 else 1e-6 * max(abs(float(x.mean())), 1.0)


def _log_components(x, w, m, s):
    return (np.log(w) - np.log(s) - 0.5 * math.log(2 * math.pi)
            - 0.5 * ((x[:, None] - m) / s) ** 2)


def fit_gmm(samples, k: int = 1, seed=None, max_iter: int = 500, tol: float = 1e-8,
            max_restarts: int = 5, return_trace: bool = False):
    """EM fit of a ``k``-component 1-D Gaussian mixture, k-means initialised.

    Components come back sorted by mean, weights normalised.  With
    ``return_trace`` the per-iteration log-likelihoods are returned too.
    """
    x = np.asarray(samples, dtype=float).ravel()
    if k < 1 or x.size < k:
        raise DomainError(f"need n >= k >= 1 (n={x.size}, k={k})")
    if not np.all(np.isfinite(x)):
        raise DomainError("samples must be finite")
    floor = _data_floor(x)

    if k == 1:
        m, s = float(x.mean()), max(float(x.std()), floor)
        ll = float(_log_components(x, np.ones(1), np.array([m]), np.array([s])).sum())
        gm = GaussianMixture(((1.0, m, s),))
        return (gm, [ll]) if return_trace else gm

    rng = np.random.default_rng(seed)
    for _ in range(max_restarts + 1):
        centers, labels = kmeans2(x, k, minit="++", seed=rng)
        w = np.array([(labels == j).mean() for j in range(k)])
        if np.any(w == 0):
            continue
        m = centers.astype(float)
        s = np.array([x[labels == j].std() for j in range(k)])
        if np.any(s < floor):
            continue
        trace = []
        degenerate = False
        for _ in range(max_iter):
            lc = _log_components(x, w, m, s)
            tot = logsumexp(lc, axis=1)
            ll = float(tot.sum())
            if trace and ll < trace[-1] - 1e-9 * abs(trace[-1]):
                raise NumericalError(f"EM log-likelihood decreased ({trace[-1]} -> {ll})")
            trace.append(ll)
            if len(trace) > 1 and ll - trace[-2] < tol:
                break
            r = np.exp(lc - tot[:, None])
            nk = r.sum(0)
            if np.any(nk <= 0):
                degenerate = True
                break
            w = nk / x.size
            m = (r * x[:, None]).sum(0) / nk
            s = np.sqrt((r * (x[:, None] - m) ** 2).sum(0) / nk)
            if np.any(s < floor):
                degenerate = True
                break
        if degenerate:
            continue
        order = np.argsort(m)
        gm = GaussianMixture(tuple((float(w[j]), float(m[j]), float(s[j])) for j in order))
        return (gm, trace) if return_trace else gm
    raise NumericalError(f"EM produced a degenerate component after {max_restarts} restarts")


def fit_lognormal(samples) -> LognormalHeightModel:
    """Moment-matched lognormal: sample mean and (unbiased) sample variance."""
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < 2:
        raise DomainError("need at least 2 samples")
    if not np.all(np.isfinite(x)) or np.any(x <= 0):
        raise DomainError("all samples must be finite and > 0")
    return lognormal_from_moments(float(x.mean()), float(x.var(ddof=1)))


def _strip_disc_area(d, width):
    # area of the disc of radius d intersected with the strip |y| <= width/2
    d = np.asarray(d, dtype=float)
    a = np.minimum(0.5 * width, d)
    with np.errstate(invalid="ignore", divide="ignore"):
        ang = np.where(d > 0, np.arcsin(np.clip(a / np.where(d > 0, d, 1.0), 0, 1)), 0.0)
    return 2 * a * np.sqrt(np.maximum(d * d - a * a, 0.0)) + 2 * d * d * ang


def expected_count_within(d, lambda1: float, lambda2: float, delta: float,
                          road_width: float = 20.0):
    """Expected number of retained objects within distance ``d`` of a
    roadside unit on the road axis."""
    rho1, rho2 = lambda1 / (1000.0 * road_width), lambda2 / 1e6
    p_in = matern2_retention((rho1 + rho2) * math.pi * delta**2)
    p_out = matern2_retention(rho2 * math.pi * delta**2)
    a = _strip_disc_area(d, road_width)
    return p_in * (rho1 + rho2) * a + p_out * rho2 * (math.pi * np.asarray(d) ** 2 - a)


def simulate_distances(model: SuperimposedPPPModel, radius: float, n_snapshots: int = 1,
                       seed=None) -> np.ndarray:
    """Distances to all retained objects within ``radius`` over independent snapshots."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n_snapshots):
        pts = sample_positions(model, 2.0 * radius, rng, area_half_width=radius)
        r = np.hypot(pts[:, 0], pts[:, 1])
        out.append(r[r <= radius])
    return np.concatenate(out) if out else np.zeros(0)


def fit_ppp_intensities(distances, protection_interval: float, radius: float | None = None,
                        n_snapshots: int = 1, road_width: float = 20.0,
                        n_grid: int = 200) -> SuperimposedPPPModel:
    """Least-squares fit of the empirical distance count curve.

    The road-bound component grows linearly with distance and the planar
    component quadratically, which separates ``lambda1`` from ``lambda2``.
    ``lambda_thin`` is the removal implied by the fitted intensities and
    ``protection_interval``.
    """
    d = np.sort(np.asarray(distances, dtype=float).ravel())
    if d.size < 10:
        raise DomainError("need at least 10 distances")
    if not np.all(np.isfinite(d)) or np.any(d < 0):
        raise DomainError("distances must be finite and >= 0")
    if protection_interval < 0 or n_snapshots < 1:
        raise DomainError("protection interval must be >= 0 and n_snapshots >= 1")
    R = float(d[-1]) if radius is None else float(radius)
    if not R > 0:
        raise DomainError("observation radius must be > 0")
    grid = np.linspace(R / n_grid, R, n_grid)
    emp = np.searchsorted(d, grid, side="right") / n_snapshots
    scale = math.sqrt(max(d.size, 1)) / n_snapshots

    # initial guess from the two-term moment balance at R/2 and R
    n_half, n_full = emp[n_grid // 2 - 1], emp[-1]
    lam1_0 = max(1000.0 * (4 * n_half - n_full) / R, 1.0)
    lam2_0 = max(1e6 * (n_full - 2 * n_half) / (math.pi * R * R / 2), 1e-3)

    def resid(theta):
        return (expected_count_within(grid, theta[0], theta[1], protection_interval,
                                      road_width) - emp) / scale

    res = optimize.least_squares(resid, [lam1_0, lam2_0], bounds=([0, 0], [np.inf, np.inf]),
                                 x_scale=[max(lam1_0, 1.0), max(lam2_0, 1.0)],
                                 xtol=1e-12, ftol=1e-12, gtol=1e-12)
    if not res.success or not np.all(np.isfinite(res.x)):
        raise NumericalError(f"intensity fit did not converge: {res.message}; "
                             f"residual norm {np.linalg.norm(res.fun):.3g}")
    lam1, lam2 = (float(v) for v in res.x)
    probe = SuperimposedPPPModel(lam1, lam2, 0.0, protection_interval, road_width)
    removed = probe.removed_intensity(protection_interval)
    return SuperimposedPPPModel(lam1, lam2, -removed, protection_interval, road_width)


def mixture_report(gm: GaussianMixture, label: str) -> dict:
    """JSON-ready fit summary; flags components whose spread is large next
    to their mean."""
    comps = [{"weight": a, "mean": b, "std": c} for a, b, c in gm.components]
    flags = [f"component {i}: std/mean = {c / b:.2f}" for i, (_, b, c) in
             enumerate(gm.components) if b > 0 and c / b > 0.5]
    return {"label": label, "components": comps, "flags": flags}


def fit_table(table: SampleTable, k: int = 1, seed=None) -> dict:
    """Per-class height/radius mixtures plus a pooled lognormal height fit."""
    out = {"classes": {}, "source": table.source}
    for cls in table.classes():
        h, r = table.column("height", cls), table.column("radius", cls)
        kk = min(k, len(h))
        out["classes"][cls] = {
            "height": mixture_report(fit_gmm(h, kk, seed), f"{cls} height"),
            "radius": mixture_report(fit_gmm(r, kk, seed), f"{cls} radius"),
            "n": int(len(h)),
        }
    heights = table.column("height")
    if heights.size >= 2:
        ln = fit_lognormal(heights)
        out["lognormal"] = {"mu0": ln.mu0, "sigma0": ln.sigma0, "m0": ln.m0, "nu0": ln.nu0}
    return out


def dump_json(obj, path):
    Path(path).write_text(json.dumps(obj, indent=2))
