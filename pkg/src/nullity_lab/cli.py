"""Command-line front end.

Exit status: 0 all hard checks pass, 1 a check failed, 2 bad configuration,
3 a point is not admissible.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .catalog import run_example
from .dsl import DomainError, ExprSyntaxError, FieldSpec, UnknownVariableError, parse_energy
from .geometry import CONVENTIONS, ChartPoint, NonAdmissiblePoint, Pipeline, bundle_from_pipeline, bundle_to_dict
from .nullity import (
    FrameFailure,
    NonConstantNullity,
    classify_space,
    integrability_check,
    lie_bracket,
    nullity_space,
    verify_identities,
)
from .oracle import Constraint, SamplerConfig, SamplingFailure, fd_bracket, sample_points

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_ADMISSIBLE = 0, 1, 2, 3
CHECKS = ("identities", "deep-checks", "nullity:R", "nullity:P", "nullity:Q", "nullity:barthel", "bracket", "classify")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    energy: str | None = None
    dim: int | None = None
    points: list[str] = field(default_factory=list)
    tol: float | None = None
    seed: int = 0
    samples: int = 0
    box: list[str] = field(default_factory=list)
    constraints: list[str] = field(default_factory=list)
    checks: list[str] = field(default_factory=list)
    deep_checks: bool = False
    fields: list[str] = field(default_factory=list)
    which: str = "R"
    format: str = "text"
    out: str | None = None


_LIST_KEYS = {"point": "points", "box": "box", "constraint": "constraints", "field": "fields", "checks": "checks"}
_SCALAR_KEYS = {"energy": str, "dim": int, "tol": float, "seed": int, "samples": int, "which": str,
                "format": str, "out": str}


def read_config(path: str) -> RunConfig:
    """Flat 'key = value' file; repeated keys build lists; '#' starts a comment."""
    cfg = RunConfig()
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
    for num, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip().replace("_", "-"), value.strip()
        if not sep:
            raise ConfigError(f"{path}:{num}: expected 'key = value'")
        if key in _LIST_KEYS:
            items = [v.strip() for v in value.split(",")] if key == "checks" else [value]
            getattr(cfg, _LIST_KEYS[key]).extend(i for i in items if i)
        elif key == "deep-checks":
            cfg.deep_checks = value.lower() in ("1", "true", "yes", "on")
        elif key in _SCALAR_KEYS:
            try:
                setattr(cfg, key, _SCALAR_KEYS[key](value))
            except ValueError as exc:
                raise ConfigError(f"{path}:{num}: bad value for {key}: {value!r}") from exc
        else:
            raise ConfigError(f"{path}:{num}: unknown key {key!r}")
    return cfg


def _merge(args: argparse.Namespace) -> RunConfig:
    cfg = read_config(args.config) if getattr(args, "config", None) else RunConfig()
    for name in ("energy", "dim", "tol", "seed", "samples", "format", "out", "which"):
        val = getattr(args, name, None)
        if val is not None:
            setattr(cfg, name, val)
    # repeatable flags replace the file's list when given
    for name, attr in (("point", "points"), ("field", "fields"), ("box", "box"), ("constraint", "constraints")):
        val = getattr(args, name, None)
        if val:
            setattr(cfg, attr, list(val))
    if getattr(args, "checks", None):
        cfg.checks = [c.strip() for c in args.checks.split(",") if c.strip()]
    if getattr(args, "deep_checks", False):
        cfg.deep_checks = True
    if cfg.format not in ("text", "json", "csv"):
        raise ConfigError(f"unknown format {cfg.format!r}")
    for c in cfg.checks:
        if c not in CHECKS:
            raise ConfigError(f"unknown check {c!r}; choose from {', '.join(CHECKS)}")
    return cfg


# ---------------------------------------------------------------------------
# Inputs


def _energy(cfg: RunConfig):
    if not cfg.energy or cfg.dim is None:
        raise ConfigError("--energy and --dim are required")
    if cfg.dim < 1:
        raise ConfigError("--dim must be positive")
    return parse_energy(cfg.energy, cfg.dim)


def _points(cfg: RunConfig, E) -> list[ChartPoint]:
    pts = []
    for text in cfg.points:
        try:
            p = ChartPoint.parse(text)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if p.dim != E.dim:
            raise ConfigError(f"point {text!r} has dim {p.dim}, energy has dim {E.dim}")
        pts.append(p)
    if cfg.samples:
        if not cfg.box:
            raise ConfigError("sampling needs box entries 'lo..hi', one per coordinate")
        box = []
        for b in cfg.box:
            for part in b.split(","):
                lo, sep, hi = part.partition("..")
                if not sep:
                    raise ConfigError(f"bad box interval {part!r}; use lo..hi")
                box.append((float(lo), float(hi)))
        try:
            sc = SamplerConfig(cfg.seed, tuple(box), tuple(Constraint.parse(c) for c in cfg.constraints))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        pts.extend(sample_points(E, sc, cfg.samples))
    if not pts:
        raise ConfigError("no points: give --point or --samples with --box")
    return pts


def _fields(cfg: RunConfig, dim: int) -> dict[str, FieldSpec]:
    out = {}
    for text in cfg.fields:
        name, sep, body = text.partition("=")
        if not sep:
            raise ConfigError(f"bad field {text!r}; use name=expr1,..,exprn")
        out[name.strip()] = FieldSpec.parse(body, dim, name.strip())
    return out


def _tol(cfg: RunConfig, default: float) -> float:
    return default if cfg.tol is None else cfg.tol


# ---------------------------------------------------------------------------
# Commands; each returns (report, passed, csv rows)


def cmd_analyze(cfg: RunConfig):
    E = _energy(cfg)
    pts = _points(cfg, E)
    checks = cfg.checks or ["identities"]
    if cfg.deep_checks and "deep-checks" not in checks:
        checks.append("deep-checks")
    report = {"energy": cfg.energy, "dim": E.dim, "checks": checks, "points": []}
    rows = []
    passed = True
    for z in pts:
        b = bundle_from_pipeline(Pipeline(E, z, 5))
        entry = {"bundle": bundle_to_dict(b)}
        entry["bundle"].pop("convention_ledger")
        for c in checks:
            if c.startswith("nullity:"):
                rep = nullity_space(b, c.split(":")[1], _tol(cfg, 1e-8))
                entry[c] = rep.to_dict()
                rows += [{"point": str(z), "check": c, "index": i, "value": s}
                         for i, s in enumerate(rep.singular_values)]
        if "identities" in checks or "deep-checks" in checks:
            suite = verify_identities(E, [z], _tol(cfg, 1e-6), deep="deep-checks" in checks)
            entry["identities"] = suite.to_dict()
            passed &= suite.passed
            rows += [{"point": str(z), "check": k, "index": "", "value": r.max_residual}
                     for k, r in suite.results.items()]
        else:
            entry["identities"] = "skipped"
        report["points"].append(entry)
    if "classify" in checks:
        report["classification"] = classify_space(E, pts, _tol(cfg, 1e-7)).to_dict()
    if "bracket" in checks:
        fields = _fields(cfg, E.dim)
        if len(fields) < 2:
            raise ConfigError("check 'bracket' needs two --field entries")
        report["bracket"] = _bracket_report(E, fields, pts, _tol(cfg, 1e-9))
    return report, passed, rows


def _bracket_report(E, fields: dict[str, FieldSpec], pts, tol) -> list[dict]:
    names = list(fields)
    out = []
    for z in pts:
        for i in range(len(names)):
            for j in range(i + 1, len(names)):
                A, B = fields[names[i]], fields[names[j]]
                br = lie_bracket(E, A, B, z, tol)
                fd = fd_bracket(E, A, B, z)
                out.append({"point": str(z), "pair": [names[i], names[j]], **br.to_dict(),
                            "oracle_coordinate": [float(v) for v in fd]})
    return out


def cmd_nullity(cfg: RunConfig):
    E = _energy(cfg)
    pts = _points(cfg, E)
    tol = _tol(cfg, 1e-8)
    reps = [nullity_space(bundle_from_pipeline(Pipeline(E, z, 5)), cfg.which, tol) for z in pts]
    rows = [{"point": str(r.point), "which": r.which, "index": i, "singular_value": s, "mu": r.mu}
            for r in reps for i, s in enumerate(r.singular_values)]
    report = {"energy": cfg.energy, "which": cfg.which, "reports": [r.to_dict() for r in reps]}
    fields = _fields(cfg, E.dim)
    if fields:
        try:
            report["integrability"] = integrability_check(E, cfg.which, pts, 1e-6, fields=list(fields.values())).to_dict()
        except (NonConstantNullity, FrameFailure) as exc:
            report["integrability"] = {"error": str(exc)}
    return report, True, rows


def cmd_bracket(cfg: RunConfig):
    E = _energy(cfg)
    pts = _points(cfg, E)
    fields = _fields(cfg, E.dim)
    if len(fields) < 2:
        raise ConfigError("bracket needs two --field entries")
    out = _bracket_report(E, fields, pts, _tol(cfg, 1e-9))
    rows = [{"point": r["point"], "pair": "/".join(r["pair"]), "component": k, "value": v}
            for r in out for k, v in enumerate(r["coordinate"])]
    return {"energy": cfg.energy, "brackets": out}, True, rows


def cmd_classify(cfg: RunConfig):
    E = _energy(cfg)
    pts = _points(cfg, E)
    rep = classify_space(E, pts, _tol(cfg, 1e-7))
    rows = [{"property": k, "residual": v.residual, "holds": v.holds, "fit": "" if v.fit is None else v.fit}
            for k, v in rep.properties.items()]
    return {"energy": cfg.energy, "classification": rep.to_dict()}, True, rows


def cmd_verify(cfg: RunConfig):
    E = _energy(cfg)
    pts = _points(cfg, E)
    suite = verify_identities(E, pts, _tol(cfg, 1e-6), deep=cfg.deep_checks)
    rows = [{"identity": k, "status": r.status, "max_residual": r.max_residual, "passed": r.passed}
            for k, r in suite.results.items()]
    return {"energy": cfg.energy, "points": len(pts), "suite": suite.to_dict()}, suite.passed, rows


def cmd_example(cfg: RunConfig, k: int):
    rep = run_example(k, seed=cfg.seed, samples=cfg.samples or 10, tol=_tol(cfg, 1e-8))
    checks = _example_checks(rep)
    rep["checks"] = checks
    rows = [{"table": name, "index": "".join(map(str, e["index"])), "printed": e["printed"],
             "computed": e["computed"], "match": e["match"]}
            for name, t in rep["tables"].items() for e in t["entries"]]
    return rep, all(c["passed"] for c in checks), rows


def _example_checks(rep: dict) -> list[dict]:
    checks = []
    for stratum, rows in rep["strata"].items():
        for which in ("barthel", "R", "P", "Q"):
            exp = [r[which] for r in rows if "expected_mu" in r[which]]
            if exp:
                ok = all(e["mu"] == e["expected_mu"] and e["principal_angle"] < 1e-6 for e in exp)
                checks.append({"name": f"{stratum}:nullity:{which}", "passed": ok})
    if "bracket" in rep:
        checks.append({"name": "bracket_vertical", "passed": not rep["bracket"]["is_horizontal"]})
    if rep["example"] == 1:
        ok = any("not contained in N_R" in c for c in rep["conclusions"])
        checks.append({"name": "N_barthel_not_in_N_R", "passed": ok})
    return checks


# ---------------------------------------------------------------------------
# Output


def _finite(obj):
    if isinstance(obj, float):
        if math.isnan(obj):
            return "nan"
        if math.isinf(obj):
            return "inf" if obj > 0 else "-inf"
        return obj + 0.0
    if isinstance(obj, dict):
        return {str(k): _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _finite(obj.tolist())
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return _finite(obj.item())
    return obj


def render(report: dict, fmt: str, rows: list[dict]) -> str:
    if fmt == "json":
        return json.dumps(_finite(report), indent=2, sort_keys=True) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        if rows:
            keys = list(rows[0])
            w = csv.DictWriter(buf, fieldnames=keys, lineterminator="\n")
            w.writeheader()
            for r in rows:
                w.writerow({k: _finite(v) for k, v in r.items()})
        return buf.getvalue()
    return _text(report)


def _text(report: dict, indent: int = 0) -> str:
    lines = []
    pad = "  " * indent
    for k, v in report.items():
        if k == "convention_ledger":
            continue
        if isinstance(v, dict):
            lines.append(f"{pad}{k}:")
            lines.append(_text(v, indent + 1))
        elif isinstance(v, list) and v and isinstance(v[0], dict):
            lines.append(f"{pad}{k}: [{len(v)} entries]")
            for item in v:
                lines.append(_text(item, indent + 1))
                lines.append(f"{pad}  --")
        else:
            lines.append(f"{pad}{k}: {_finite(v)}")
    return "\n".join(line for line in lines if line)


# ---------------------------------------------------------------------------
# Entry point


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value config file")
    common.add_argument("--energy")
    common.add_argument("--dim", type=int)
    common.add_argument("--point", action="append", help="x1,..,xn;y1,..,yn (repeatable)")
    common.add_argument("--tol", type=float)
    common.add_argument("--seed", type=int)
    common.add_argument("--samples", type=int, help="number of sampled points")
    common.add_argument("--box", action="append", help="lo..hi intervals, comma separated (repeatable)")
    common.add_argument("--constraint", action="append", help="e.g. 'y2^3+y3^3+5*y4^3 == 0; solve y4 = ...'")
    common.add_argument("--format", choices=("text", "json", "csv"))
    common.add_argument("--out")
    common.add_argument("--field", action="append", help="name=expr1,..,exprn (repeatable)")
    common.add_argument("--checks", help="comma separated subset of: " + ", ".join(CHECKS))
    common.add_argument("--deep-checks", action="store_true")

    parser = argparse.ArgumentParser(prog="nullity-lab", description="Finsler curvature nullity toolkit")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("analyze", parents=[common], help="full pipeline at points plus requested checks")
    p = sub.add_parser("nullity", parents=[common], help="nullity spaces of one curvature")
    p.add_argument("--which", choices=("R", "P", "Q", "barthel"))
    sub.add_parser("bracket", parents=[common], help="brackets of horizontal fields")
    sub.add_parser("classify", parents=[common], help="special-space classification over points")
    sub.add_parser("verify", parents=[common], help="identity suite")
    p = sub.add_parser("example", parents=[common], help="reproduce a worked example")
    p.add_argument("id", type=int, choices=(1, 2, 3))
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse reports usage errors with status 2
        return int(exc.code or 0)
    try:
        cfg = _merge(args)
        if args.command == "example":
            report, passed, rows = cmd_example(cfg, args.id)
        else:
            report, passed, rows = {
                "analyze": cmd_analyze, "nullity": cmd_nullity, "bracket": cmd_bracket,
                "classify": cmd_classify, "verify": cmd_verify,
            }[args.command](cfg)
    except (ConfigError, ExprSyntaxError, UnknownVariableError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NonAdmissiblePoint, DomainError, SamplingFailure) as exc:
        print(f"not admissible: {exc}", file=sys.stderr)
        return EXIT_ADMISSIBLE
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    report.setdefault("convention_ledger", dict(CONVENTIONS))
    report.setdefault("version", __version__)
    report["passed"] = passed
    text = render(report, cfg.format, rows)
    if cfg.out:
        with open(cfg.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    return EXIT_OK if passed else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
