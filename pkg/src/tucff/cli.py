"""Command-line entry point: ``tucff {gains,simulate,metrics,compare,make-example}``.

Exit codes: 0 success, 1 runtime/model error, 2 usage or configuration error.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__, bundled
from .controller import VARIANTS
from .estimator import EstimatorError
from .metrics import MetricsReport, compare_table, evaluate, read_trace_csv
from .network import NetworkError, build_bg, load_network, validate_network, dumps_network
from .scenario import ScenarioError, dumps_scenario, load_scenario, parse_scenario
from .simulator import ModelError, run_scenario
from .synthesis import COND_MAX, DARE_TOL, RANK_RTOL, SynthesisError, controllability_rank, synthesize

log = logging.getLogger("tucff")

OUT_ENV = "TUCFF_OUT"


class UsageError(Exception):
    pass


def _write(path: Path, text: str) -> None:
    """Write atomically: temp file in the same directory, then rename."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def _out_dir(args) -> Path:
    if args.out:
        return Path(args.out)
    return Path(os.environ.get(OUT_ENV, "."))


def _tolerances() -> dict:
    return {"rank_rtol": RANK_RTOL, "dare_tol": DARE_TOL, "cond_max": COND_MAX}


def _rank_diagnostics(net) -> str:
    B_g = build_bg(net)
    _, sv, Vt = np.linalg.svd(B_g)
    tol = max(B_g.shape) * (sv[0] if sv.size else 0.0) * RANK_RTOL
    null = Vt[np.sum(sv > tol):]
    stages = sorted({int(s) + 1 for v in null for s in np.flatnonzero(np.abs(v) > 1e-8)})
    zero_links = np.flatnonzero(np.abs(B_g).sum(axis=1) == 0) + 1
    msg = f"stages with linearly dependent effect: {stages}"
    if zero_links.size:
        msg += f"; links unaffected by any stage: {zero_links.tolist()}"
    return msg


def cmd_gains(args) -> int:
    if not args.R > 0:
        raise UsageError("R weight must be positive")
    net = load_network(args.network)
    rank = controllability_rank(build_bg(net))
    log.info("rank(B_g) = %d, stages = %d, links = %d", rank, net.n_stages, net.n_links)
    try:
        gs = synthesize(net, args.R)
    except SynthesisError as exc:
        raise SynthesisError(f"{exc} ({_rank_diagnostics(net)})") from exc
    log.info("DARE residual %.3e after %d iterations", gs.dare_residual, gs.dare_iterations)
    doc = {
        "W": gs.W.tolist(),
        "B_g1": gs.B_g1.tolist(),
        "Q1": gs.Q1.tolist(),
        "P": gs.P.tolist(),
        "K1": gs.K1.tolist(),
        "Ke1": gs.Ke1.tolist(),
        "K": gs.K.tolist(),
        "Ke": gs.Ke.tolist(),
        "metadata": {
            "tool_version": __version__,
            "network": str(args.network),
            "R_weight": args.R,
            "n_links": net.n_links,
            "n_stages": net.n_stages,
            "rank_B_g": rank,
            "dare_residual": gs.dare_residual,
            "dare_iterations": gs.dare_iterations,
            "tolerances": _tolerances(),
        },
    }
    out = Path(args.out) if args.out else _out_dir(args) / "gains.json"
    _write(out, json.dumps(doc, indent=2) + "\n")
    print(f"wrote {out} (residual {gs.dare_residual:.3e})")
    return 0


def _simulate_one(net, scenario, out: Path, args) -> MetricsReport:
    trace = run_scenario(net, scenario)
    report = evaluate(scenario.variant, trace.x, trace.x_b, net.x_max, trace.T)
    manifest = {
        "tool_version": __version__,
        "network": str(args.network),
        "scenario": str(args.scenario),
        "controller": scenario.variant,
        "output_dir": str(out),
        "seeds": scenario.raw["seeds"],
        "tolerances": _tolerances(),
        "scenario_resolved": scenario.raw,
    }
    _write(out / "trace.csv", trace.to_csv())
    _write(out / "greens.csv", trace.greens_csv())
    _write(out / "metrics.json", report.to_json())
    _write(out / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return report


def cmd_simulate(args) -> int:
    net = load_network(args.network)
    base = load_scenario(args.scenario)
    out = _out_dir(args)
    if args.controller == "all":
        variants = list(VARIANTS)
    else:
        variants = [args.controller or base.variant]
    reports = []
    for v in variants:
        sc = base.with_overrides(variant=v, horizon_s=args.horizon, seed=args.seed)
        target = out / v if args.controller == "all" else out
        reports.append(_simulate_one(net, sc, target, args))
    sys.stdout.write(compare_table(reports))
    return 0


def cmd_metrics(args) -> int:
    net = load_network(args.network)
    time, x, x_b = read_trace_csv(args.trace)
    if x.shape[1] not in (0, net.n_links):
        raise UsageError(f"trace has {x.shape[1]} links, network has {net.n_links}")
    T = float(time[1] - time[0]) if time.size > 1 else float(args.dt)
    report = evaluate(args.method or Path(args.trace).stem, x, x_b, net.x_max, T)
    if args.out:
        _write(Path(args.out), report.to_json())
    else:
        sys.stdout.write(report.to_json())
    return 0


def cmd_compare(args) -> int:
    if len(args.reports) < 2:
        raise UsageError("compare needs at least two metrics files")
    reports = [MetricsReport.from_json(Path(p).read_text(encoding="utf-8")) for p in args.reports]
    horizons = {r.horizon_s for r in reports}
    if len(horizons) > 1:
        print(f"warning: reports cover different horizons {sorted(horizons)}", file=sys.stderr)
    sys.stdout.write(compare_table(reports, args.format))
    return 0


def cmd_make_example(args) -> int:
    make_net, make_sc = bundled.EXAMPLES[args.kind]
    out = _out_dir(args)
    net = validate_network(make_net())
    _write(out / f"{args.kind}.network.json", dumps_network(net))
    written = [f"{args.kind}.network.json"]
    if make_sc is not None:
        _write(out / f"{args.kind}.scenario.json", dumps_scenario(parse_scenario(make_sc())))
        written.append(f"{args.kind}.scenario.json")
    print("wrote " + ", ".join(str(out / w) for w in written))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tucff", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gains", help="synthesise feedback/feedforward gains")
    g.add_argument("--network", required=True)
    g.add_argument("--R", type=float, default=1e-4, help="input weight, R = r I (default 1e-4)")
    g.add_argument("--out", help="output JSON file")
    g.set_defaults(func=cmd_gains)

    s = sub.add_parser("simulate", help="closed-loop simulation of one or all controller variants")
    s.add_argument("--network", required=True)
    s.add_argument("--scenario", required=True)
    s.add_argument("--controller", choices=sorted(VARIANTS) + ["all"])
    s.add_argument("--out", help=f"output directory (default ${OUT_ENV} or .)")
    s.add_argument("--seed", type=int)
    s.add_argument("--horizon", type=float, help="horizon in seconds")
    s.set_defaults(func=cmd_simulate)

    m = sub.add_parser("metrics", help="TTS/RQB/TTB from a trace CSV")
    m.add_argument("--trace", required=True)
    m.add_argument("--network", required=True)
    m.add_argument("--method")
    m.add_argument("--dt", type=float, default=5.0, help="tick if the trace has one row per link")
    m.add_argument("--out")
    m.set_defaults(func=cmd_metrics)

    c = sub.add_parser("compare", help="table of several metrics reports")
    c.add_argument("reports", nargs="+")
    c.add_argument("--format", choices=["text", "csv"], default="text")
    c.set_defaults(func=cmd_compare)

    e = sub.add_parser("make-example", help="write a bundled network (and scenario)")
    e.add_argument("kind", choices=sorted(bundled.EXAMPLES))
    e.add_argument("--out", help="output directory")
    e.set_defaults(func=cmd_make_example)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, NetworkError, ScenarioError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (SynthesisError, ModelError, EstimatorError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
