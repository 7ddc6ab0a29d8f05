"""Command-line entry point (installed as ``nqs``).

Exit codes: 0 success, 1 usage error, 2 domain error. Domain errors are
reported as a JSON envelope on stderr. Every run echoes its fully-resolved
configuration on stdout so artifacts can be reproduced byte-for-byte.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import analytic
from .approx import full_bound_report
from .core import Subregion, check_n
from .errors import NqsError
from .experiments import (
    ExperimentConfig,
    preset_configs,
    run_cosnet_k_sweep,
    run_sweep,
    SweepResult,
    benchmark_reduction,
    write_aggregates,
    write_csv,
)
from .graph import feature_reduce, load_graph, to_json
from .statevector import load_nqsv, materialize, save_nqsv
from .entanglement import subregion_entropy


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _emit(doc: dict, out: str | None = None) -> None:
    text = json.dumps(doc, indent=1, default=_json_default) + "\n"
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def _parse_mask(text: str) -> int:
    return int(text, 16)


def _echo_config(args, extra: dict | None = None) -> None:
    doc = {"schema_version": 1, "resolved_config": {k: v for k, v in vars(args).items() if k != "func"}}
    if extra:
        doc["resolved_config"].update(extra)
    sys.stdout.write(json.dumps(doc, default=_json_default) + "\n")


# -- subcommand handlers -----------------------------------------------------


def _cmd_validate(args) -> int:
    g = load_graph(args.graph)
    _echo_config(args)
    _emit(
        {
            "schema_version": 1,
            "valid": True,
            "n": g.n,
            "k": g.k,
            "nodes": len(g.nodes),
            "dead_nodes": sorted(g.dead),
        },
        args.out,
    )
    return 0


def _cmd_reduce(args) -> int:
    g = load_graph(args.graph)
    r = feature_reduce(g)
    _echo_config(args)
    doc = {
        "schema_version": 1,
        "mu": r.mu,
        "k": r.k,
        "n": r.n,
        "features": [
            {"weights": f.weights.tolist(), "bias": f.bias, "supnorm": float(np.abs(f.weights).sum() + abs(f.bias))}
            for f in r.features
        ],
        "residual_graph": to_json(r.residual),
    }
    _emit(doc, args.out)
    return 0


def _cmd_statevector(args) -> int:
    g = load_graph(args.graph)
    check_n(g.n, args.max_n)
    psi = materialize(g, threads=args.threads, max_n=args.max_n)
    save_nqsv(psi, args.out)
    _echo_config(args)
    _emit({"schema_version": 1, "n": psi.n, "norm_was": psi.norm_was, "out": args.out})
    return 0


def _cmd_entropy(args) -> int:
    psi = load_nqsv(args.state)
    region = Subregion(_parse_mask(args.region), psi.n)
    result = subregion_entropy(psi, region).converted(args.log_base)
    _echo_config(args)
    _emit(
        {
            "schema_version": 1,
            "eigenvalues": result.eigenvalues.tolist(),
            "entropy": result.entropy,
            "schmidt_rank": result.schmidt_rank,
            "log_base": result.log_base,
            "region_mask_hex": f"{region.mask:x}",
            "subsystem_size": region.size,
        },
        args.out,
    )
    return 0


def _cmd_bound(args) -> int:
    g = load_graph(args.graph)
    region = Subregion(_parse_mask(args.region), g.n)
    degree = args.degree if args.degree == "auto" else int(args.degree)
    report = full_bound_report(g, region, degree=degree, threads=args.threads)
    _echo_config(args)
    _emit(report.to_json(), args.out)
    return 0


def _cmd_dicke(args) -> int:
    ms = [args.m] if args.m is not None else list(range(1, args.n))
    entries = []
    for m in ms:
        spec = analytic.dicke_spectrum(args.n, m)
        entries.append(
            {
                "m": m,
                "eigenvalues": spec.sorted_desc().tolist(),
                "entropy_nats": analytic.dicke_entropy(args.n, m),
                "gaussian_form_nats": analytic.dicke_entropy_asymptotic(args.n, m / args.n),
            }
        )
    _echo_config(args)
    _emit({"schema_version": 1, "n": args.n, "entries": entries}, args.out)
    return 0


def _cmd_page(args) -> int:
    _echo_config(args)
    lines = ["m,page_nats"]
    for m in range(1, args.n):
        lines.append(f"{m},{analytic.page_value(m, args.n)!r}")
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def _cmd_run(args) -> int:
    if bool(args.config) == bool(args.preset):
        raise _UsageError("pass exactly one of --config or --preset")
    if args.config:
        with open(args.config) as fh:
            cfg = ExperimentConfig.from_json(json.load(fh))
        if args.seed is not None:
            cfg.seed = args.seed
        configs = [cfg]
    else:
        configs = preset_configs(args.preset)
        if args.seed is not None:
            for cfg in configs:
                cfg.seed = args.seed
    _echo_config(args, {"experiments": [c.to_json() for c in configs]})
    rows, excluded, page_ref = [], [], None
    for cfg in configs:
        runner = run_cosnet_k_sweep if cfg.k_grid and cfg.ansatz.get("family") == "cosnet" else run_sweep
        res = runner(cfg, threads=args.threads)
        rows.extend(res.rows)
        excluded.extend(res.excluded)
        if res.page_reference:
            page_ref = (page_ref or {}) | res.page_reference
    merged = SweepResult(rows=rows, excluded=excluded, page_reference=page_ref)
    write_csv(merged, args.out)
    write_aggregates(merged, str(args.out) + ".agg.json")
    _emit({"schema_version": 1, "rows": len(rows), "excluded": len(excluded), "out": args.out})
    return 0


def _cmd_bench(args) -> int:
    g = load_graph(args.graph)
    report = benchmark_reduction(g, args.samples, seed=args.seed or 0, threads=args.threads)
    _echo_config(args)
    _emit(report, args.out)
    return 0


# -- parser -------------------------------------------------------------------


def build_parser() -> _Parser:
    parser = _Parser(prog="nqs", description="Exact entanglement analysis of feed-forward network states")
    parser.add_argument("--seed", type=int, default=None, help="override experiment seed")
    parser.add_argument(
        "--threads",
        type=int,
        default=os.cpu_count() or 1,
        help="worker threads for statevector evaluation (results do not depend on this)",
    )
    parser.add_argument("--log-base", choices=["e", "2"], default="e", dest="log_base")
    parser.add_argument("--max-n", type=int, default=None, dest="max_n", help="raise the spin cap (hard max 26)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="validate a graph JSON file")
    p.add_argument("--graph", required=True)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("reduce", help="feature-reduce a graph")
    p.add_argument("--graph", required=True)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_reduce)

    p = sub.add_parser("statevector", help="materialize all amplitudes to a binary dump")
    p.add_argument("--graph", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_statevector)

    p = sub.add_parser("entropy", help="subregion entropy of a statevector dump")
    p.add_argument("--state", required=True)
    p.add_argument("--region", required=True, help="subregion bit mask in hex")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_entropy)

    p = sub.add_parser("bound", help="full entropy-bound report for a graph and subregion")
    p.add_argument("--graph", required=True)
    p.add_argument("--region", required=True, help="subregion bit mask in hex")
    p.add_argument("--degree", default="auto", help="polynomial degree per variable, or 'auto'")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_bound)

    p = sub.add_parser("dicke", help="closed-form half-filling spectra and entropies")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, default=None)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_dicke)

    p = sub.add_parser("page", help="Haar-average entropy curve as CSV")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_page)

    p = sub.add_parser("run", help="run an ensemble experiment to CSV + aggregate JSON")
    p.add_argument("--config", help="experiment config JSON")
    p.add_argument("--preset", help="named preset (e.g. fig1a, fig2b, supp_sn_phase)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("bench", help="compare full vs reduced forward-pass cost")
    p.add_argument("--graph", required=True)
    p.add_argument("--samples", type=int, default=1 << 16)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_bench)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        sys.stderr.write(json.dumps({"schema_version": 1, "error": {"type": "usage", "message": str(exc)}}) + "\n")
        return 1
    try:
        return args.func(args)
    except _UsageError as exc:
        sys.stderr.write(json.dumps({"schema_version": 1, "error": {"type": "usage", "message": str(exc)}}) + "\n")
        return 1
    except NqsError as exc:
        payload = {"type": type(exc).__name__, "message": str(exc)}
        if hasattr(exc, "cycle"):
            payload["cycle"] = exc.cycle
        sys.stderr.write(json.dumps({"schema_version": 1, "error": payload}) + "\n")
        return 2
    except (OSError, json.JSONDecodeError) as exc:
        sys.stderr.write(json.dumps({"schema_version": 1, "error": {"type": "io", "message": str(exc)}}) + "\n")
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
