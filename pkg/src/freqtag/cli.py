"""Command-line entry points: analyze, report, prune, inspect-model.

Failures print a single machine-parseable JSON line to stderr and exit
nonzero.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

from . import __version__
from .engine import REDUCTIONS, load_model
from .errors import FreqtagError
from .graph import load_graph, required_tensors, validate_graph
from .pipeline import run_analyze, run_prune, run_report
from .tensorstore import TensorStore


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="freqtag",
        description="Frequency-tag images, probe a CNN, score filters by spectral SNR.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    analyze = sub.add_parser("analyze", help="tag images, run the model, "
                             "write spectra/SNR/importance artifacts")
    analyze.add_argument("--config", help="JSON config (defaults used if omitted)")
    analyze.add_argument("--model-graph", required=True)
    analyze.add_argument("--weights", required=True)
    analyze.add_argument("--data", required=True, help="CIFAR-10 binary batch")
    analyze.add_argument("--out", required=True)
    analyze.add_argument("--images", default=None,
                         help="comma-separated record ids (trailing comma for a "
                              "single id), or a bare integer sample count")
    analyze.add_argument("--reduction", default="mean_excluding_zeros",
                         choices=REDUCTIONS)
    analyze.add_argument("--threads", type=int, default=1)
    analyze.add_argument("--seed", type=int, default=0,
                         help="governs image sampling only")
    analyze.add_argument("--split-spectra", action="store_true",
                         help="one CSV per filter instead of one per image")

    report = sub.add_parser("report", help="re-score cached traces with new "
                            "importance settings")
    report.add_argument("--from", dest="from_dir", required=True,
                        help="output directory of a previous analyze run")
    report.add_argument("--out", required=True)
    report.add_argument("--snr-threshold", type=float, default=None)
    report.add_argument("--vote-fraction", type=float, default=None)
    report.add_argument("--statistic", default=None)
    report.add_argument("--max-order", type=int, default=None)

    prune = sub.add_parser("prune", help="apply an importance report as a "
                           "filter mask and evaluate the delta")
    prune.add_argument("--report", required=True)
    prune.add_argument("--model-graph", required=True)
    prune.add_argument("--weights", required=True)
    prune.add_argument("--data", required=True)
    prune.add_argument("--out", required=True)
    prune.add_argument("--images", default=None)
    prune.add_argument("--seed", type=int, default=0)

    inspect = sub.add_parser("inspect-model", help="validate a graph/weights "
                             "pair and print a summary")
    inspect.add_argument("--model-graph", required=True)
    inspect.add_argument("--weights", default=None)
    return parser


def _cmd_analyze(args) -> int:
    manifest = run_analyze(args.config, args.model_graph, args.weights,
                           args.data, args.out, images=args.images,
                           reduction=args.reduction, threads=args.threads,
                           seed=args.seed, split_spectra=args.split_spectra)
    print(f"analyzed {len(manifest['image_ids'])} images -> {args.out}")
    return 0


def _cmd_report(args) -> int:
    run_report(args.from_dir, args.out, snr_threshold=args.snr_threshold,
               vote_fraction=args.vote_fraction, statistic=args.statistic,
               max_order=args.max_order)
    print(f"report written -> {args.out}")
    return 0


def _cmd_prune(args) -> int:
    run_prune(args.report, args.model_graph, args.weights, args.data,
              args.out, images=args.images, seed=args.seed)
    print(f"prune summary written -> {args.out}")
    return 0


def _cmd_inspect(args) -> int:
    doc = load_graph(args.model_graph)
    if args.weights:
        store = TensorStore.load(args.weights)
        model = load_model(doc, store)
        info = model.info
        print(f"fingerprint: {model.fingerprint}")
    else:
        info = validate_graph(doc)
    c, h, w = info.input_shape
    print(f"input: {c}x{h}x{w}")
    ops: dict[str, int] = {}
    for node in info.nodes.values():
        ops[node["op"]] = ops.get(node["op"], 0) + 1
    for op in sorted(ops):
        print(f"nodes[{op}]: {ops[op]}")
    tensors = required_tensors(info)
    n_params = sum(int(math.prod(s)) if s else 1 for s in tensors.values())
    print(f"tensors: {len(tensors)} ({n_params} parameters)")
    print(f"taps: {len(info.taps)}")
    for i, tap in enumerate(info.taps, start=1):
        print(f"  layer {i}: {tap} {info.shapes[tap]}")
    print(f"output: {info.output} {info.shapes[info.output]}")
    return 0


_HANDLERS = {
    "analyze": _cmd_analyze,
    "report": _cmd_report,
    "prune": _cmd_prune,
    "inspect-model": _cmd_inspect,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _HANDLERS[args.command](args)
    except (FreqtagError, ValueError, OSError, KeyError,
            json.JSONDecodeError) as exc:
        line = json.dumps({"error": type(exc).__name__, "message": str(exc)})
        print(line, file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
