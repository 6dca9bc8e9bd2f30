"""freqtag-export command line: `export` converts a checkpoint."""

from __future__ import annotations

import argparse
import json
import sys

from .export import ExportError, export
from .templates import template_ids


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="freqtag-export",
        description="Convert a PyTorch checkpoint of a templated architecture "
                    "into a freqtag model graph + tensor container.")
    sub = parser.add_subparsers(dest="command", required=True)
    exp = sub.add_parser("export", help="convert a checkpoint")
    exp.add_argument("--checkpoint", required=True)
    exp.add_argument("--template", required=True, choices=template_ids())
    exp.add_argument("--out-graph", required=True)
    exp.add_argument("--out-weights", required=True)
    exp.add_argument("--no-verify", action="store_true",
                     help="skip the torch-vs-engine logit comparison")
    exp.add_argument("--seed", type=int, default=0,
                     help="seed for the verification inputs")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        summary = export(args.checkpoint, args.template, args.out_graph,
                         args.out_weights, verify=not args.no_verify,
                         seed=args.seed)
    except (ExportError, ValueError, OSError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return 1
    print(f"exported {summary.n_tensors} tensors "
          f"(fingerprint {summary.fingerprint[:16]})")
    if summary.max_logit_diff is not None:
        print(f"round-trip max logit difference: {summary.max_logit_diff:.3e}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
