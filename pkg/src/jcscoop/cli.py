"""Command-line interface: ``jcscoop {fit,sweep,validate,coverage,report}``.

Exit codes: 0 success, 1 usage error, 2 validation failure, 3 numerical failure.
The output directory is ``--out``, else ``$JCSCOOP_OUTPUT_DIR``, else ``./results``.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import presets
from .channel import BlockerStats, LinkGeometry, LognormalHeightModel, pr_los
from .comm import pr_succ_c
from .coop import (CoverageResult, DeploymentPlan, coverage_sweep, pr_coop, results_to_json)
from .errors import DomainError, NumericalError
from .fitting import SampleFormatError, dump_json, fit_table, load_samples
from .interference import InterfererField
from .mc import (TrialConfig, estimate_pr_los, estimate_success, interferer_tables,
                 null_stderr)
from .scene import ObstacleClass, SuperimposedPPPModel
from .sensing import RadioConfig, pr_succ_s

EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 1, 2, 3
OUTPUT_ENV = "JCSCOOP_OUTPUT_DIR"
PRESETS = ("default",)
REPORT_FLOOR = 0.8

log = logging.getLogger("jcscoop")


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    radio: RadioConfig = field(default_factory=presets.radio)
    blockers: BlockerStats = field(default_factory=presets.blockers)
    classes: tuple[ObstacleClass, ...] = field(default_factory=lambda: tuple(presets.classes()))
    ppp: SuperimposedPPPModel = field(default_factory=presets.ppp)
    sensing_field: InterfererField = field(default_factory=presets.sensing_field)
    comm_field: InterfererField = field(default_factory=presets.comm_field)
    plan: DeploymentPlan = field(default_factory=DeploymentPlan)
    mc: TrialConfig = field(default_factory=lambda: TrialConfig(n_trials=2000))
    output_dir: str = "results"

    def to_dict(self) -> dict:
        return {
            "radio": self.radio.to_dict(),
            "blockers": asdict(self.blockers),
            "classes": [c.to_dict() for c in self.classes],
            "ppp": asdict(self.ppp),
            "sensing_field": asdict(self.sensing_field),
            "comm_field": asdict(self.comm_field),
            "plan": self.plan.to_dict(),
            "mc": self.mc.to_dict(),
            "output_dir": self.output_dir,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        base = cls()
        kw = {}
        if "radio" in d:
            kw["radio"] = RadioConfig(**d["radio"])
        if "blockers" in d:
            b = dict(d["blockers"])
            b["heights"] = LognormalHeightModel(**b["heights"])
            kw["blockers"] = BlockerStats(**b)
        if "classes" in d:
            kw["classes"] = tuple(ObstacleClass.from_dict(c) for c in d["classes"])
        if "ppp" in d:
            kw["ppp"] = SuperimposedPPPModel(**d["ppp"])
        for name in ("sensing_field", "comm_field"):
            if name in d:
                kw[name] = InterfererField(**d[name])
        if "plan" in d:
            p = dict(d["plan"])
            for k in ("height_bounds", "spacing_bounds"):
                if k in p:
                    p[k] = tuple(p[k])
            kw["plan"] = DeploymentPlan(**p)
        if "mc" in d:
            kw["mc"] = TrialConfig(**d["mc"])
        if "output_dir" in d:
            kw["output_dir"] = d["output_dir"]
        return replace(base, **kw)

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            data = json.loads(Path(path).read_text())
        except FileNotFoundError:
            raise
        except json.JSONDecodeError as exc:
            raise DomainError(f"config {path} is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise DomainError("config root must be a JSON object")
        try:
            return cls.from_dict(data)
        except TypeError as exc:
            raise DomainError(f"config {path}: {exc}") from exc


def _load_config(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    if getattr(args, "lambda0", None) is not None:
        cfg = replace(cfg, blockers=cfg.blockers.with_density(args.lambda0))
    if getattr(args, "interferer_density", None) is not None:
        cfg = replace(cfg, sensing_field=cfg.sensing_field.with_density(args.interferer_density),
                      comm_field=cfg.comm_field.with_density(args.interferer_density))
    seed = getattr(args, "seed", None)
    if seed is None and getattr(args, "needs_seed", False):
        seed = int(time.time_ns() % 2**32)
        print(f"no --seed given; using seed {seed}")
    if seed is not None:
        cfg = replace(cfg, mc=replace(cfg.mc, root_seed=seed))
    if getattr(args, "workers", None):
        cfg = replace(cfg, mc=replace(cfg.mc, workers=args.workers))
    if getattr(args, "trials", None):
        cfg = replace(cfg, mc=replace(cfg.mc, n_trials=args.trials))
    return cfg


def _out_dir(args, cfg: RunConfig | None = None) -> Path:
    out = args.out or os.environ.get(OUTPUT_ENV) or (cfg.output_dir if cfg else "results")
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


# ---------------------------------------------------------------- fit

def cmd_fit(args) -> int:
    table = load_samples(args.input)
    if len(table) == 0:
        raise DomainError(f"{args.input}: no sample rows")
    report = fit_table(table, k=args.k, seed=args.seed)
    out = Path(args.output) if args.output else _out_dir(args) / "fit.json"
    dump_json(report, out)
    print(f"{'class':<11}{'h mean':>9}{'h std':>9}{'r mean':>9}{'r std':>9}{'n':>7}")
    for cls, v in report["classes"].items():
        h = v["height"]["components"][0]
        r = v["radius"]["components"][0]
        print(f"{cls:<11}{h['mean']:9.4f}{h['std']:9.4f}{r['mean']:9.4f}{r['std']:9.4f}"
              f"{v['n']:7d}")
        for flag in v["height"]["flags"] + v["radius"]["flags"]:
            print(f"  flag: {cls} {flag}")
    print(f"wrote {out}")
    return EXIT_OK


# ---------------------------------------------------------------- sweep

def _axis_values(args):
    if args.steps < 1:
        raise UsageError("--steps must be >= 1")
    if args.steps == 1:
        return np.array([args.start])
    return np.linspace(args.start, args.stop, args.steps)


def _point(cfg: RunConfig, axis: str, v: float, h: float, d: float):
    blockers = cfg.blockers
    if axis == "h":
        h = v
    elif axis == "d":
        d = v
    else:
        blockers = blockers.with_density(v)
    return h, d, blockers


def cmd_sweep(args) -> int:
    cfg = _load_config(args)
    out = _out_dir(args, cfg)
    if args.axis not in ("h", "d", "lambda_obs"):
        raise UsageError(f"invalid axis {args.axis!r}")
    values = _axis_values(args)
    r = cfg.radio
    rows = []
    for v in values:
        h, d, blockers = _point(cfg, args.axis, float(v), args.h, args.d)
        ps = pr_succ_s(r, d, h, blockers, cfg.sensing_field)
        pc = pr_succ_c(r, d, h, blockers, cfg.comm_field)
        pco = pr_coop(r, d, d, h, blockers, cfg.sensing_field, cfg.comm_field, cfg.mc)
        plos = pr_los(LinkGeometry(d, h, r.target_height), blockers)
        rows.append([float(v), plos, ps, pc, pco])
    header = [args.axis, "pr_los", "pr_succ_s", "pr_succ_c", "pr_coop"]
    if args.gammas:
        if args.axis != "h":
            raise UsageError("--gammas (coverage columns) needs --axis h")
        gammas = _float_list(args.gammas)
        cov = coverage_sweep(r, [float(v) for v in values], gammas, cfg.blockers,
                             cfg.sensing_field, cfg.comm_field, n_points=args.n_points,
                             trial=replace(cfg.mc, workers=1), workers=cfg.mc.workers)
        for row, v in zip(rows, values):
            row += [c.coverage for g in gammas for c in cov
                    if c.h == float(v) and c.gamma_co == g]
        header += [f"coverage_{g:.2f}" for g in gammas]
    _write_csv(out / f"sweep_{args.axis}.csv", header, rows)
    # the floor applies to the probability curves, not to coverage columns
    view = [[row[0]] + [x if x >= REPORT_FLOOR else "" for x in row[1:5]] + row[5:]
            for row in rows]
    _write_csv(out / f"sweep_{args.axis}_view.csv", header, view)
    print(f"wrote {len(rows)} rows to {out / f'sweep_{args.axis}.csv'}")
    return EXIT_OK


# ---------------------------------------------------------------- coverage

def _float_list(text: str):
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise UsageError(f"expected a comma-separated list of numbers, got {text!r}") from exc


def cmd_coverage(args) -> int:
    cfg = _load_config(args)
    out = _out_dir(args, cfg)
    heights = _float_list(args.heights)
    gammas = _float_list(args.gammas)
    if not heights or not gammas:
        raise UsageError("need at least one height and one threshold")
    results = coverage_sweep(cfg.radio, heights, gammas, cfg.blockers, cfg.sensing_field,
                             cfg.comm_field, n_points=args.n_points,
                             trial=replace(cfg.mc, workers=1), workers=cfg.mc.workers)
    (out / "coverage.json").write_text(results_to_json(results))
    for g in gammas:
        rows = [[r.h, r.coverage, r.d_v_max, r.spacing] for r in results if r.gamma_co == g]
        _write_csv(out / f"coverage_gamma{g:.2f}.csv", ["h", "coverage", "d_v_max", "spacing"],
                   rows)
    print(f"{'h':>6}" + "".join(f"{g:>9.2f}" for g in gammas))
    for h in heights:
        covs = [r.coverage for r in results if r.h == h]
        print(f"{h:6.2f}" + "".join(f"{c:9.3f}" for c in covs))
    print(f"root seed {cfg.mc.root_seed}; wrote {out / 'coverage.json'}")
    return EXIT_OK


# ---------------------------------------------------------------- validate

def _check(name, ok, detail):
    print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    return ok


def cmd_validate(args) -> int:
    cfg = _load_config(args)
    r, B = cfg.radio, cfg.blockers
    trial = replace(cfg.mc, n_trials=max(cfg.mc.n_trials, 100))
    scale = 0.5 if args.corrupt_analytic else 1.0
    ok = True
    heights = (3.0, 7.0)
    distances = (20.0, 60.0, 120.0)
    for i, (h, d) in enumerate((h, d) for h in heights for d in distances):
        link = LinkGeometry(d, h, r.target_height)
        pt = estimate_pr_los(trial, link, blockers=B, point=i)
        an = scale * pr_los(link, B)
        se = null_stderr(an, pt.n)
        ok &= _check(f"los h={h} d={d}", abs(pt.p_hat - an) <= 3 * se,
                     f"mc {pt.p_hat:.4f} analytic {an:.4f} se {se:.4f}")
    for h in heights:
        tables = interferer_tables(r, h, B, cfg.sensing_field, cfg.comm_field, trial.root_seed)
        for kind, fn, fld in (("detect", pr_succ_s, cfg.sensing_field),
                              ("comm", pr_succ_c, cfg.comm_field)):
            curve = estimate_success(trial, kind, r, distances, h, B, cfg.sensing_field,
                                     cfg.comm_field, tables=tables)
            for pt in curve.points:
                an = scale * fn(r, pt.d, h, B, fld)
                tol = max(0.05, 3 * pt.stderr)
                ok &= _check(f"{kind} h={h} d={pt.d}", abs(pt.p_hat - an) <= tol,
                             f"mc {pt.p_hat:.4f} analytic {an:.4f} tol {tol:.4f}")
    print("validation " + ("passed" if ok else "FAILED"))
    return EXIT_OK if ok else EXIT_VALIDATION


# ---------------------------------------------------------------- report

def recommend(results, gamma_co: float, height_bounds, spacing_bounds, tie_tol: float = 0.01):
    """Highest mount among those within ``tie_tol`` of the best coverage;
    taller gantries reach farther, so ties favour fewer gantries."""
    cand = [r for r in results if math.isclose(r.gamma_co, gamma_co)
            and height_bounds[0] <= r.h <= height_bounds[1]]
    if not cand:
        raise DomainError(f"no coverage results at gamma_co={gamma_co} within height bounds")
    best = max(r.coverage for r in cand)
    pick = max((r for r in cand if r.coverage >= best - tie_tol), key=lambda r: r.h)
    spacing = float(np.clip(pick.spacing, *spacing_bounds))
    return {"h": pick.h, "coverage": pick.coverage, "gamma_co": gamma_co,
            "spacing": spacing, "comm_range": pick.spacing}


def cmd_report(args) -> int:
    src = Path(args.results)
    f = src / "coverage.json"
    if not f.is_file():
        raise DomainError(f"missing input: {f}")
    raw = json.loads(f.read_text())
    if not raw:
        raise DomainError(f"{f} holds no results")
    results = [CoverageResult(**r) for r in raw]
    plan = DeploymentPlan()
    gamma = args.gamma if args.gamma is not None else plan.gamma_co
    rec = recommend(results, gamma, plan.height_bounds, plan.spacing_bounds)
    lines = [f"Recommended mounting height: {rec['h']:g} m",
             f"Coverage at gamma_co={gamma:.2f}: {rec['coverage']:.3f}",
             f"Gantry spacing: {rec['spacing']:.1f} m (communication range {rec['comm_range']:.1f} m,"
             f" clipped to {plan.spacing_bounds[0]:g}-{plan.spacing_bounds[1]:g} m)",
             "", f"{'h':>6}{'coverage':>10}"]
    lines += [f"{r.h:6.2f}{r.coverage:10.3f}" for r in results if math.isclose(r.gamma_co, gamma)]
    text = "\n".join(lines) + "\n"
    out = _out_dir(args) if args.out else src
    (out / "report.txt").write_text(text)
    (out / "report.json").write_text(json.dumps(rec, indent=2))
    print(text, end="")
    return EXIT_OK


# ---------------------------------------------------------------- plumbing

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="jcscoop", description=__doc__,
                formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def common(sp, seed=True):
        sp.add_argument("--config", help="RunConfig JSON (omit for the default preset)")
        sp.add_argument("--out", help=f"output directory (else ${OUTPUT_ENV})")
        sp.add_argument("--lambda0", type=float, help="override blocker density per m^2")
        sp.add_argument("--interferer-density", type=float, help="override device density")
        sp.add_argument("--workers", type=int, default=None)
        if seed:
            sp.add_argument("--seed", type=int, default=None)
            sp.add_argument("--trials", type=int, default=None)

    fit = sub.add_parser("fit", help="fit class models to a sample CSV",
                         description="Input CSV schema: header 'class,height,radius,distance'; "
                                     "class in sedan|suv|bus|truck|stationary; metres, all > 0.")
    fit.add_argument("input")
    fit.add_argument("-o", "--output")
    fit.add_argument("--out", help=f"output directory (else ${OUTPUT_ENV})")
    fit.add_argument("-k", type=int, default=1, help="mixture components per class")
    fit.add_argument("--seed", type=int, default=0)
    fit.set_defaults(func=cmd_fit)

    sw = sub.add_parser("sweep", help="analytic curves along one axis")
    common(sw)
    sw.add_argument("--axis", required=True, choices=("h", "d", "lambda_obs"))
    sw.add_argument("--start", type=float, required=True)
    sw.add_argument("--stop", type=float, default=None)
    sw.add_argument("--steps", type=int, default=10)
    sw.add_argument("--h", type=float, default=7.0, help="height when not swept")
    sw.add_argument("--d", type=float, default=50.0, help="distance when not swept")
    sw.add_argument("--gammas", default=None,
                    help="with --axis h: add coverage columns for these thresholds")
    sw.add_argument("--n-points", type=int, default=100)
    sw.set_defaults(func=cmd_sweep, needs_seed=True)

    va = sub.add_parser("validate", help="Monte-Carlo check of the analytic curves")
    common(va)
    va.add_argument("--corrupt-analytic", action="store_true", help=argparse.SUPPRESS)
    va.set_defaults(func=cmd_validate, needs_seed=True)

    co = sub.add_parser("coverage", help="coverage probability over heights and thresholds")
    common(co)
    co.add_argument("--heights", default="4,5,6,7,8,9,10")
    co.add_argument("--gammas", default="0.8,0.85,0.9,0.95")
    co.add_argument("--n-points", type=int, default=100)
    co.set_defaults(func=cmd_coverage, needs_seed=True)

    rp = sub.add_parser("report", help="deployment recommendation from coverage results")
    rp.add_argument("results")
    rp.add_argument("--out")
    rp.add_argument("--gamma", type=float, default=None)
    rp.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    if not getattr(args, "func", None):
        parser.print_help()
        return EXIT_USAGE
    if getattr(args, "stop", 0) is None:
        args.stop = args.start
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DomainError, SampleFormatError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (NumericalError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
