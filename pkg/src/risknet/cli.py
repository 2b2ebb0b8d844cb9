"""Batch front end: ``risknet <subcommand> [flags]``.

Exit codes: 0 success, 1 failed validation or runtime error, 2 usage error,
3 model-file schema violation, 4 domain error (parameters outside a formula's range).
"""
from __future__ import annotations

import argparse
import csv
import io as _io
import itertools
import json
import logging
import math
import sys
import time
from importlib import metadata
from pathlib import Path

import numpy as np

from . import io
from .cb_network import (
    build_cb_map,
    dividend_barrier_scan,
    reduce_deterministic_cb,
)
from .compendium import Compendium
from .efficiency import Criterion, barrier_influence, classify, optimal_barrier, slg_barrier
from .ladder import approximation_report
from .levy_core import DomainError, ScaleEval
from .map_scale import MatrixScaleSet, matrix_passage_suite

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_SCHEMA, EXIT_DOMAIN = 0, 1, 2, 3, 4

log = logging.getLogger("risknet")


def fmt(x) -> str:
    """17 significant digits, locale independent."""
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
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
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        if math.isnan(v):
            return "nan"
        return float(fmt(v))
    return obj


def parse_grid(spec: str) -> np.ndarray:
    """``start:stop:step`` inclusive of stop (within half a step)."""
    try:
        a, b, h = (float(v) for v in spec.split(":"))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"grid must be start:stop:step, got {spec!r}") from exc
    if h <= 0 or b < a:
        raise argparse.ArgumentTypeError("grid needs step > 0 and stop >= start")
    n = int(math.floor((b - a) / h + 0.5))
    return a + h * np.arange(n + 1)


def _float_or_inf(s: str) -> float:
    return math.inf if s.strip().lower() in ("inf", "infinity") else float(s)


def _float_list(s: str) -> list[float]:
    try:
        return [_float_or_inf(v) for v in s.split(",")]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {s!r}") from exc


# --------------------------------------------------------------------------
# output


class Output:
    def __init__(self, path: str | None):
        self.path = path
        self.buffer = _io.StringIO()

    def csv(self, header, rows):
        w = csv.writer(self.buffer, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(v) for v in r])

    def json(self, obj):
        self.buffer.write(json.dumps(_jsonable(obj), indent=2))
        self.buffer.write("\n")

    def flush(self):
        text = self.buffer.getvalue()
        if self.path:
            Path(self.path).write_text(text)
        else:
            sys.stdout.write(text)


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0+unknown"


def write_manifest(args, argv, inputs, elapsed):
    target = args.manifest or (f"{args.out}.manifest.json" if args.out else None)
    if not target:
        return
    flags = {k: v for k, v in vars(args).items() if k not in ("func",)}
    manifest = {
        "subcommand": args.command,
        "argv": list(argv),
        "inputs": [str(Path(p).resolve()) for p in inputs],
        "output": str(Path(args.out).resolve()) if args.out else None,
        "flags": flags,
        "version": _version(),
        "seed": flags.get("seed"),
        "elapsed_seconds": elapsed,
    }
    Path(target).write_text(json.dumps(_jsonable(manifest), indent=2) + "\n")


# --------------------------------------------------------------------------
# subcommands


def cmd_scale(args, out):
    model = io.model_from_dict(io.load(args.model, "model"))
    ev = ScaleEval(model, args.q)
    x = args.grid
    rows = zip(x, ev.W(x), ev.dW(x), ev.Zq(x), ev.Z(x, args.theta))
    out.csv(["x", "W", "dW", "Zq", "Z_theta"], rows)
    return [args.model]


COMPENDIUM_FORMULAS = {
    "two_sided_exit": (Compendium.two_sided_exit, ("q", "x", "b")),
    "severity": (Compendium.severity_of_ruin, ("q", "x", "b", "theta")),
    "ruin_probability": (Compendium.ruin_probability, ("x",)),
    "definetti_dividends": (Compendium.definetti_dividends, ("q", "x", "b")),
    "poisson_dividends": (Compendium.poisson_dividends, ("q", "nu", "x", "b")),
    "reflected_bailout_lt": (Compendium.reflected_bailout_lt, ("q", "theta", "x", "b")),
    "dividends_with_bailout_killing": (Compendium.dividends_with_bailout_killing, ("q", "theta", "x", "b")),
    "regulated_ruin": (Compendium.regulated_ruin_lt, ("q", "x", "b")),
    "regulated_severity": (Compendium.regulated_severity, ("q", "theta", "x", "b")),
    "dividends_ruin_joint": (Compendium.dividends_ruin_joint_lt, ("q", "theta", "vartheta", "x", "b")),
    "total_dividends_law": (Compendium.total_dividends_law, ("q", "b", "vartheta")),
    "parisian_severity": (Compendium.parisian_severity, ("q", "r", "theta", "x", "b")),
    "upper_poisson_killing": (Compendium.severity_with_upper_poisson_killing, ("q", "varpi", "theta", "x", "b")),
    "resolvent": (Compendium.resolvent, ("q", "x", "y", "a", "b")),
    "reflected_resolvent": (Compendium.reflected_resolvent, ("q", "x", "y", "b")),
}


def cmd_compendium(args, out):
    model = io.model_from_dict(io.load(args.model, "model"))
    C = Compendium(model)
    func, names = COMPENDIUM_FORMULAS[args.formula]
    rows = []
    for values in itertools.product(*(getattr(args, n) for n in names)):
        res = func(C, *values)
        rows.append([*values, *np.atleast_1d(np.asarray(res, dtype=float))])
    width = len(rows[0]) - len(names)
    value_cols = ["value"] if width == 1 else [f"value{i}" for i in range(width)]
    out.csv([*names, *value_cols], rows)
    return [args.model]


def cmd_ladder(args, out):
    rep = approximation_report(args.rho, args.grid)
    out.csv(["t", "exact", "cf3", "tp3"], zip(rep["t"], rep["exact"], rep["cf3"], rep["tp3"]))
    log.info("fraction of grid with exact density between the approximations: %s",
             fmt(rep["fraction_between"]))
    return []


def cmd_efficiency(args, out):
    sub = io.subsidiary_from_dict(io.load(args.subsidiary, "subsidiary"))
    verdict = classify(sub, Criterion(args.criterion))
    result = verdict.to_dict()
    if sub.model.rho < 1:
        if verdict.criterion is Criterion.SLG:
            result["barrier"] = slg_barrier(sub)
        else:
            b = optimal_barrier(sub)
            G, H = barrier_influence(sub, b)
            result.update({"barrier": b, "G": float(G), "H": float(H)})
    out.json(result)
    return [args.subsidiary]


def cmd_map(args, out):
    mm = io.map_from_dict(io.load(args.model, "map"))
    ss = MatrixScaleSet(mm)
    res: dict = {"mode": ss.mode}
    f = args.formula
    if f == "G":
        res.update(G=ss.G, residual=ss.g_residual())
    elif f == "W":
        res.update(W=ss.W(args.x), dW=ss.dW(args.x), condition=float(np.linalg.cond(ss.W(args.x))))
    elif f == "Z":
        res.update(Z=ss.Z(args.x, args.theta))
    elif f in ("H", "R"):
        ss.compute_H()
        res.update(H=ss.H, R=ss.R)
    elif f == "excursion":
        res.update(Lambda=ss.excursion_generator(args.a))
    else:
        res.update({k: v for k, v in matrix_passage_suite(ss, args.x, args.b, args.theta, args.vartheta).items()})
    out.json(res)
    return [args.model]


def cmd_reduce(args, out):
    net = io.network_from_dict(io.load(args.network, "network"))
    red = reduce_deterministic_cb(net)
    res = {"u": red.u, "c": red.c, "exact": red.exact,
           "bound": "exact" if red.exact else "upper bound on ruin time"}
    try:
        res["ruin_probability"] = red.ruin_probability(args.horizon)
    except DomainError as exc:
        res["ruin_probability"] = None
        res["note"] = str(exc)
    out.json(res)
    return [args.network]


def _cb_from_args(args):
    doc = io.load(args.model, "cb")
    sub = io.cb_subsidiary_from_dict(doc)
    quiet = doc.get("quiet_state", True) and not getattr(args, "defective", False)
    return build_cb_map(sub, doc["c0"], K=doc.get("K", 0.0), quiet_state=quiet)


def cmd_cb_approx(args, out):
    cb = _cb_from_args(args)
    m = cb.map
    out.json({
        "phases": m.n,
        "ladder_rates": cb.ladder_rates,
        "ladder_weights": cb.ladder_weights,
        "jump_rate": cb.jump_rate,
        "initial": cb.initial,
        "Q": m.Q,
        "kill": m.kill,
        "claim_rates": m.lam,
        "quiet_state": cb.quiet_state,
    })
    return [args.model]


def cmd_dividends_scan(args, out):
    cb = _cb_from_args(args)
    grid = np.linspace(args.bmin, args.bmax, args.steps)
    scan = dividend_barrier_scan(cb, args.q, grid)
    out.csv(["b", "V"], zip(scan.b, scan.value))
    edge = "  (maximizer on the grid edge; widen --bmin/--bmax)" if scan.b_star in (grid[0], grid[-1]) else ""
    print(f"b* = {fmt(scan.b_star)}  V(b*) = {fmt(scan.v_star)}  unimodal = {fmt(scan.unimodal)}{edge}",
          file=sys.stderr)
    return [args.model]


def cmd_simulate(args, out):
    from . import mc

    model = io.model_from_dict(io.load(args.model, "model"))
    C = Compendium(model)
    cfg = mc.SimConfig(n_paths=args.paths, seed=args.seed, horizon=args.horizon, q=args.q)
    f = args.formula_to_check
    if f == "ruin_probability":
        est = mc.simulate_ruin(model, args.x, cfg)
        analytic = C.ruin_probability(args.x) if math.isinf(args.horizon) and args.q == 0 else None
    elif f == "two_sided_exit":
        est, analytic = mc.simulate_two_sided_exit(model, args.x, args.b, cfg), C.two_sided_exit(args.q, args.x, args.b)
    elif f == "severity":
        est = mc.simulate_severity(model, args.x, args.b, args.theta, cfg)
        analytic = C.severity_of_ruin(args.q, args.x, args.b, args.theta)
    elif f == "definetti_dividends":
        est = mc.simulate_dividends(model, args.b, cfg, x=args.x)
        analytic = C.definetti_dividends(args.q, args.x, args.b)
    elif f == "poisson_dividends":
        est = mc.simulate_dividends(model, args.b, cfg, x=args.x, observation_rate=args.nu)
        analytic = C.poisson_dividends(args.q, args.nu, args.x, args.b)
    elif f == "regulated_ruin":
        est = mc.simulate_regulated_ruin(model, args.x, args.b, 0.0, cfg)
        analytic = C.regulated_ruin_lt(args.q, args.x, args.b)
    else:  # parisian_severity
        est = mc.simulate_parisian_severity(model, args.r, args.x, args.b, args.theta, cfg)
        analytic = C.parisian_severity(args.q, args.r, args.theta, args.x, args.b)
    res = est.to_dict()
    if analytic is not None:
        res.update(analytic=float(analytic), z=est.z_score(float(analytic)))
    out.json(res)
    return [args.model]


def cmd_validate(args, out):
    from .validation import validation_suite

    n = args.paths or (100_000 if args.quick else 1_000_000)
    pairs = validation_suite(n, args.seed)
    for p in pairs:
        print(p.row(), file=sys.stderr)
    out.json([{"name": p.name, "analytic": p.analytic, "mean": p.estimate.mean,
               "stderr": p.estimate.stderr, "z": p.z, "passed": p.passed} for p in pairs])
    return [] if all(p.passed for p in pairs) else None


# --------------------------------------------------------------------------
# parser


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="risknet", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=_version())
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--out", help="output file (default: standard output)")
        sp.add_argument("--manifest", help="manifest path (default: <out>.manifest.json)")
        sp.add_argument("-v", "--verbose", action="store_true")

    def point(sp, b_default=2.0):
        sp.add_argument("--q", type=float, default=0.0)
        sp.add_argument("--x", type=float, default=1.0)
        sp.add_argument("--b", type=_float_or_inf, default=b_default)
        sp.add_argument("--theta", type=float, default=0.0)

    s = sub.add_parser("scale", help="W, W', Z on a grid")
    s.add_argument("--model", required=True)
    s.add_argument("--q", type=float, default=0.0)
    s.add_argument("--theta", type=float, default=0.0)
    s.add_argument("--grid", type=parse_grid, default=parse_grid("0:5:0.5"))
    common(s)
    s.set_defaults(func=cmd_scale)

    s = sub.add_parser("compendium", help="one first-passage formula over a parameter product")
    s.add_argument("--model", required=True)
    s.add_argument("--formula", required=True, choices=sorted(COMPENDIUM_FORMULAS))
    for name, default in (("q", "0"), ("x", "1"), ("b", "2"), ("theta", "0"), ("vartheta", "0"),
                          ("nu", "1"), ("r", "1"), ("varpi", "1"), ("y", "0.5"), ("a", "0")):
        s.add_argument(f"--{name}", type=_float_list, default=_float_list(default),
                       help="comma-separated values; one CSV row per combination")
    common(s)
    s.set_defaults(func=cmd_compendium)

    s = sub.add_parser("ladder", help="exact and approximate ladder densities")
    s.add_argument("--rho", type=float, required=True)
    s.add_argument("--order", type=int, choices=[3], default=3,
                   help="order of both rational approximations (only 3 has closed-form weights)")
    s.add_argument("--grid", type=parse_grid, default=parse_grid("0:10:0.05"))
    common(s)
    s.set_defaults(func=cmd_ladder)

    s = sub.add_parser("efficiency", help="classify a subsidiary")
    s.add_argument("--subsidiary", required=True)
    s.add_argument("--criterion", choices=[c.value for c in Criterion], default=Criterion.DEFINETTI.value)
    common(s)
    s.set_defaults(func=cmd_efficiency)

    s = sub.add_parser("map", help="matrix scale machinery")
    s.add_argument("--model", required=True)
    s.add_argument("--formula", choices=["G", "W", "Z", "H", "R", "excursion", "suite"], default="suite")
    point(s)
    s.add_argument("--vartheta", type=float, default=0.0)
    s.add_argument("--a", type=float, default=1.0)
    common(s)
    s.set_defaults(func=cmd_map)

    s = sub.add_parser("reduce", help="deterministic-CB reduction")
    s.add_argument("--network", required=True)
    s.add_argument("--horizon", type=_float_or_inf, default=math.inf)
    common(s)
    s.set_defaults(func=cmd_reduce)

    s = sub.add_parser("cb-approx", help="MAP approximation of a central branch")
    s.add_argument("--model", required=True)
    s.add_argument("--defective", action="store_true", help="kill instead of a quiet phase")
    common(s)
    s.set_defaults(func=cmd_cb_approx)

    s = sub.add_parser("dividends-scan", help="CB dividends over a barrier grid")
    s.add_argument("--model", required=True)
    s.add_argument("--q", type=float, required=True)
    s.add_argument("--bmin", type=float, default=0.01)
    s.add_argument("--bmax", type=float, default=2.0)
    s.add_argument("--steps", type=int, default=200)
    s.add_argument("--defective", action="store_true", help="kill instead of a quiet phase")
    common(s)
    s.set_defaults(func=cmd_dividends_scan)

    s = sub.add_parser("simulate", help="Monte-Carlo estimate of one formula")
    s.add_argument("--model", required=True)
    s.add_argument("--formula-to-check", default="ruin_probability",
                   choices=["ruin_probability", "two_sided_exit", "severity", "definetti_dividends",
                            "poisson_dividends", "regulated_ruin", "parisian_severity"])
    s.add_argument("--paths", type=int, default=100_000)
    s.add_argument("--seed", type=int, default=1)
    s.add_argument("--horizon", type=_float_or_inf, default=math.inf)
    point(s)
    s.add_argument("--nu", type=float, default=1.0)
    s.add_argument("--r", type=float, default=1.0)
    common(s)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("validate", help="analytic vs Monte-Carlo table")
    s.add_argument("--quick", action="store_true", help="1e5 paths per pair instead of 1e6")
    s.add_argument("--paths", type=int)
    s.add_argument("--seed", type=int, default=1)
    common(s)
    s.set_defaults(func=cmd_validate)
    return p


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    out = Output(args.out)
    t0 = time.perf_counter()
    try:
        inputs = args.func(args, out)
    except io.SchemaViolation as exc:
        print(f"schema error at {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except DomainError as exc:
        print(f"domain error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except (OSError, json.JSONDecodeError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    out.flush()
    write_manifest(args, argv, inputs or [], time.perf_counter() - t0)
    return EXIT_OK if inputs is not None else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
