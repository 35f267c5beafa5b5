"""Command-line front end.

Exit codes: 0 success, 1 domain-level failure (invalid metric, failed
certificate or precondition), 2 usage or parse error.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
import time
from typing import Any, Optional, Sequence

import numpy as np

from lipfree import __version__
from lipfree import c0_embed, documents, separator, ultra_ops
from lipfree.errors import (
    CertificateError,
    ConstructionError,
    DegenerateInputError,
    PreconditionError,
    StructuralInputError,
)
from lipfree.free_norm import FreeVector, free_norm
from lipfree.lipschitz import LipFunction
from lipfree.metric_core import (
    PointedMetricSpace,
    four_point_property,
    is_ultrametric,
    validate_metric,
)
from lipfree.random_spaces import random_function

TOOL = "lipfree"


class UsageError(Exception):
    """Bad command-line input; maps to exit code 2."""


class DomainFailure(Exception):
    """Computation ran but a check failed; maps to exit code 1."""

    def __init__(self, message: str, results: Optional[dict] = None):
        super().__init__(message)
        self.results = results


def _jsonable(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isfinite(v):
            return v
        return "inf" if v > 0 else ("-inf" if v < 0 else "nan")
    return obj


# -- argument parsing helpers ------------------------------------------------


def parse_pairs(text: str, what: str) -> list:
    """Parse "label:value,label:value" into [(label, float)]."""
    out = []
    if not text.strip():
        return out
    for item in text.split(","):
        label, sep, value = item.strip().rpartition(":")
        if not sep or not label:
            raise UsageError(f"bad {what} entry {item!r}; expected label:value")
        try:
            out.append((label, float(value)))
        except ValueError:
            raise UsageError(f"bad {what} value {value!r}") from None
    return out


def parse_schedule(text: str) -> list:
    """Parse "r:n,r:n" into [(r, n)]."""
    rows = []
    for item in text.split(","):
        r, sep, n = item.strip().partition(":")
        try:
            r, n = float(r), float(n)
        except ValueError:
            raise UsageError(f"bad schedule entry {item!r}; expected r:n") from None
        if not sep or not (r > 0 and n > 0 and math.isfinite(r) and math.isfinite(n)):
            raise UsageError(f"bad schedule entry {item!r}; r and n must be positive")
        rows.append((r, n))
    return rows


def masses_vector(space: PointedMetricSpace, text: str) -> FreeVector:
    out: dict = {}
    for label, a in parse_pairs(text, "mass"):
        i = space.index(label)
        out[i] = out.get(i, 0.0) + a
    return FreeVector(space, out)


def parse_function(space: PointedMetricSpace, text: str) -> LipFunction:
    """Either "label:value,..." (missing labels are 0) or n comma-separated values."""
    if ":" in text:
        v = np.zeros(space.n)
        for label, a in parse_pairs(text, "function"):
            v[space.index(label)] = a
    else:
        try:
            v = np.array([float(t) for t in text.split(",")])
        except ValueError:
            raise UsageError(f"bad function values {text!r}") from None
        if v.shape != (space.n,):
            raise UsageError(f"function needs {space.n} values, got {v.size}")
    if v[0] != 0.0:
        raise UsageError("function must vanish at the base point")
    return LipFunction(space, v)


def _require_metric(space: PointedMetricSpace):
    rep = validate_metric(space)
    if not rep.valid:
        raise DomainFailure("input is not a metric", {"metric_valid": False, "witnesses": _witnesses(space, rep)})


def _witnesses(space: PointedMetricSpace, rep) -> list:
    return [
        {"kind": kind, "points": [space.labels[i] for i in idx], "slack": slack}
        for kind, idx, slack in rep.witnesses
    ]


def _labels(space: PointedMetricSpace, idx) -> list:
    return [space.labels[i] for i in idx]


def _by_label(space: PointedMetricSpace, values) -> dict:
    return {space.labels[i]: float(v) for i, v in enumerate(values)}


# -- commands ----------------------------------------------------------------


def cmd_validate(space: PointedMetricSpace, args) -> dict:
    rep = validate_metric(space)
    ultra, uw = is_ultrametric(space)
    four, fw = four_point_property(space)
    results = {
        "n": space.n,
        "labels": list(space.labels),
        "metric_valid": rep.valid,
        "witnesses": _witnesses(space, rep),
        "ultrametric": ultra,
        "ultrametric_witness": None if uw is None else {"points": _labels(space, uw[0]), "slack": uw[1]},
        "four_point": four,
        "four_point_witness": None if fw is None else {"points": _labels(space, fw[0]), "slack": fw[1]},
    }
    if not rep.valid:
        raise DomainFailure("input is not a metric", results)
    return results


def cmd_norm(space: PointedMetricSpace, args) -> dict:
    _require_metric(space)
    mu = masses_vector(space, args.masses)
    cert = free_norm(mu)
    return {
        "masses": {space.labels[i]: a for i, a in mu.masses.items()},
        "value": cert.value,
        "dual_value": cert.dual_value,
        "gap": cert.gap,
        "potential_lip": cert.potential_lip,
        "plan": [
            {"from": space.labels[s], "to": space.labels[t], "mass": m} for s, t, m in cert.plan
        ],
        "potential": _by_label(space, cert.potential.values),
    }


def cmd_separate(space: PointedMetricSpace, args) -> dict:
    _require_metric(space)
    x, y = space.index(args.x), space.index(args.y)
    if args.ultra or args.proper:
        method = "ultrametric" if args.ultra else "proper"
    else:
        method = "ultrametric" if is_ultrametric(space)[0] else "proper"
    kw = {}
    if method == "proper":
        kw["stop_size"] = args.stop_size
        if args.resolution is not None:
            kw["resolution"] = args.resolution
    res = separator.separate(space, x, y, method=method, **kw)
    chk = separator.check_separator(res)
    results = {
        "x": space.labels[x],
        "y": space.labels[y],
        "distance": space.d(x, y),
        "method": res.method,
        "h": _by_label(space, res.h.values),
        "lip": chk["lip"],
        "lip_bound": res.lip_bound,
        "flat_radius": res.flat_radius,
        "flat_inclusive": res.flat_inclusive,
        "iterations": res.iterations,
        "c_bound": res.c_bound,
        "equality_residual": res.equality_residual,
        "checks": {k: v for k, v in chk.items() if k.endswith("_ok")},
        "off_plateau_sizes": list(res.off_plateau_sizes),
    }
    if res.phi is not None:
        results["phi"] = {
            "breakpoints": [float(b) for b in res.phi.breakpoints],
            "values": [float(v) for v in res.phi.values],
            "lipschitz": res.phi.lipschitz(),
        }
        results["level_gaps"] = [float(lv.u_gap) for lv in res.levels]
    if not all(results["checks"].values()):
        raise DomainFailure("separator certificate failed", results)
    return results


def cmd_project(space: PointedMetricSpace, args) -> dict:
    _require_metric(space)
    mu = masses_vector(space, args.masses)
    schedule = parse_schedule(args.schedule) if args.schedule else ultra_ops.coupled_schedule()
    rows = ultra_ops.convergence_experiment(space, mu, schedule)
    return {
        "masses": {space.labels[i]: a for i, a in mu.masses.items()},
        "rows": [{"r": r, "n": n, "err": err, "bound": bound} for r, n, err, bound in rows],
    }


def cmd_embed(space: PointedMetricSpace, args) -> dict:
    _require_metric(space)
    net = c0_embed.build_net_index(space, args.epsilon)
    if args.function is not None:
        fs = [parse_function(space, args.function)]
    else:
        rng = np.random.default_rng(args.seed)
        fs = [random_function(rng, space) for _ in range(args.random)]
    geo_ok, geo_count, geo_worst = c0_embed.geometric_check(net)
    reports = []
    for f in fs:
        r = c0_embed.verify_sandwich(f, net)
        reports.append(
            {
                "function": _by_label(space, f.values),
                "sup_norm": r.sup_norm,
                "lip": r.lip,
                "lower_ok": r.lower_ok,
                "upper_ok": r.upper_ok,
                "lower_slack": r.lower_slack,
                "upper_slack": r.upper_slack,
                "chain": None
                if r.chain is None
                else {
                    **r.chain,
                    "lip_pair": _labels(space, r.chain["lip_pair"]),
                    "net_pair": _labels(space, r.chain["net_pair"]),
                },
                "cell_maxima": [
                    {"j": j, "k": k, "max_abs": v} for (j, k), v in sorted(c0_embed.cell_maxima(f, net).items())
                ],
            }
        )
    results = {
        "epsilon": net.epsilon,
        "seed": args.seed if args.function is None else None,
        "net_size": len(net.entries),
        "cells": [
            {"j": j, "k": k, "pairs": len(net.cells[(j, k)]), "net": size}
            for (j, k), size in sorted(net.cell_sizes().items())
        ],
        "geometric_check": {"ok": geo_ok, "pairs": geo_count, "worst_slack": geo_worst if geo_count else None},
        "reports": reports,
    }
    ok = geo_ok and all(r["lower_ok"] and r["upper_ok"] for r in reports)
    if not ok:
        raise DomainFailure("sandwich inequality failed", results)
    return results


COMMANDS = {
    "validate": cmd_validate,
    "norm": cmd_norm,
    "separate": cmd_separate,
    "project": cmd_project,
    "embed": cmd_embed,
}


# -- parser and output -------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _epsilon(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid float {text!r}") from None
    if not 0 < v < 1:
        raise argparse.ArgumentTypeError("epsilon must lie in (0, 1)")
    return v


def _nonneg_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid integer {text!r}") from None
    if v < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--input", "-i", required=True, help="space document (JSON)")
    common.add_argument("--output", "-o", help="report file (default: standard output)")
    common.add_argument("--seed", type=int, default=0, help="seed for random draws (default 0)")
    common.add_argument("--timing", action="store_true", help="add wall-clock timing to the report")

    p = _Parser(prog=TOOL, description="Lipschitz-free space computations on finite pointed metric spaces.")
    p.add_argument("--version", action="version", version=f"{TOOL} {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sub.add_parser("validate", parents=[common], help="check metric, ultrametric and 4-point properties")

    s = sub.add_parser("norm", parents=[common], help="free-space norm with duality certificate")
    s.add_argument("--masses", required=True, help='point masses, e.g. "a:1,b:-1"')

    s = sub.add_parser("separate", parents=[common], help="separating function for two points")
    s.add_argument("x")
    s.add_argument("y")
    g = s.add_mutually_exclusive_group()
    g.add_argument("--ultra", action="store_true", help="ultrametric ball separator")
    g.add_argument("--proper", action="store_true", help="iterated plateau separator")
    s.add_argument("--stop-size", type=_nonneg_int, default=0, help="stop refining at this many off-plateau points")
    s.add_argument("--resolution", type=float, default=None, help="candidate clustering scale (default d(x,y)/4)")

    s = sub.add_parser("project", parents=[common], help="ball-partition projection convergence table")
    s.add_argument("--masses", default="", help='point masses, e.g. "b:1"')
    s.add_argument("--schedule", default=None, help='"r:n,r:n,..." (default r = 1/n for n = 1..8)')
    s.add_argument("--format", choices=("csv", "json"), default="csv")

    s = sub.add_parser("embed", parents=[common], help="epsilon-net embedding into c0 with sandwich check")
    s.add_argument("--epsilon", type=_epsilon, default=0.5)
    g = s.add_mutually_exclusive_group()
    g.add_argument("--function", help='values "v0,v1,..." or "label:value,..."')
    g.add_argument("--random", type=_nonneg_int, default=10, help="number of random functions (default 10)")
    return p


def _report(args, digest: str, results: dict, status: str, error: Optional[str], elapsed: float) -> dict:
    echo = {k: v for k, v in sorted(vars(args).items()) if k not in ("command", "output", "timing")}
    report = {
        "tool": TOOL,
        "version": __version__,
        "command": args.command,
        "args": echo,
        "input_sha256": digest,
        "status": status,
        "error": error,
        "results": results,
    }
    if args.timing:
        report["timing"] = {"seconds": elapsed}
    return _jsonable(report)


def _csv(report: dict) -> str:
    buf = io.StringIO()
    buf.write(f"# {report['tool']} {report['version']} project input_sha256={report['input_sha256']}\n")
    if report["status"] != "ok":
        buf.write(f"# error: {report['error']}\n")
    rows = (report.get("results") or {}).get("rows")
    if rows is not None:
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["r", "n", "err", "bound"])
        for row in rows:
            w.writerow([repr(row["r"]), repr(row["n"]), repr(row["err"]), "" if row["bound"] is None else repr(row["bound"])])
    return buf.getvalue()


def _emit(text: str, path: Optional[str]):
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"{TOOL}: error: {exc}", file=sys.stderr)
        return 2

    try:
        with open(args.input, "rb") as fh:
            raw = fh.read()
        space = documents.loads(raw.decode("utf-8"))
    except (OSError, UnicodeDecodeError, StructuralInputError) as exc:
        print(f"{TOOL}: error: cannot read {args.input}: {exc}", file=sys.stderr)
        return 2
    digest = hashlib.sha256(raw).hexdigest()

    start = time.perf_counter()
    status, error, code, results = "ok", None, 0, {}
    try:
        results = COMMANDS[args.command](space, args)
    except DomainFailure as exc:
        status, error, code, results = "failed", str(exc), 1, exc.results or {}
    except (PreconditionError, CertificateError, ConstructionError) as exc:
        status, error, code = "failed", str(exc), 1
    except (UsageError, StructuralInputError, DegenerateInputError) as exc:
        print(f"{TOOL}: error: {exc}", file=sys.stderr)
        return 2
    elapsed = time.perf_counter() - start

    report = _report(args, digest, results, status, error, elapsed)
    if args.command == "project" and args.format == "csv":
        text = _csv(report)
    else:
        text = json.dumps(report, indent=2, allow_nan=False) + "\n"
    _emit(text, args.output)
    if error:
        print(f"{TOOL}: {error}", file=sys.stderr)
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
