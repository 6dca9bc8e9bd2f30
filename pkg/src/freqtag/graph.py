"""Model graph documents: schema, validation, shape inference.

A graph is a JSON document:

    {
      "format_version": 1,
      "input": {"channels": 3, "height": 32, "width": 32},
      "normalization": {"mean": [...], "std": [...]},   # optional, per channel
      "nodes": [ {"id": ..., "op": ..., ...}, ... ],
      "taps": ["node_id", ...],
      "output": "node_id"
    }

Node fields by op (single-input ops name their predecessor via "input", which
may be the reserved id "input" for the graph input):

    conv2d          input, in_ch, out_ch, kernel, stride, pad, weight, bias? (null for none)
    batchnorm       input, ch, eps, gamma, beta, mean, var
    relu            input
    add             lhs_node, rhs_node   (lhs is the main/maskable branch)
    global_avg_pool input
    fc              input, in_dim, out_dim, weight, bias? (null for none)

Taps must name nodes that produce spatial feature maps (C, H, W).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .errors import GraphError
from .textio import canonical_json

INPUT_ID = "input"
FORMAT_VERSION = 1

OPS = ("conv2d", "batchnorm", "relu", "add", "global_avg_pool", "fc")

_REQUIRED_FIELDS = {
    "conv2d": ("input", "in_ch", "out_ch", "kernel", "stride", "pad", "weight"),
    "batchnorm": ("input", "ch", "eps", "gamma", "beta", "mean", "var"),
    "relu": ("input",),
    "add": ("lhs_node", "rhs_node"),
    "global_avg_pool": ("input",),
    "fc": ("input", "in_dim", "out_dim", "weight"),
}


def node_inputs(node: dict) -> tuple[str, ...]:
    if node["op"] == "add":
        return (node["lhs_node"], node["rhs_node"])
    return (node["input"],)


@dataclass(frozen=True)
class GraphInfo:
    """Validated graph: topological order plus inferred shapes."""

    nodes: dict            # id -> node dict
    order: tuple           # node ids, topologically sorted
    shapes: dict           # id -> shape tuple ((C,H,W) or (D,)), incl. "input"
    taps: tuple            # tap node ids, document order
    output: str
    input_shape: tuple     # (C, H, W)
    normalization: tuple   # (mean list, std list), length C each


def _positive_int(node: dict, field: str):
    value = node[field]
    if not isinstance(value, int) or isinstance(value, bool) or value < 1:
        raise GraphError(f"node '{node['id']}': {field} must be a positive integer")
    return value


def _check_fields(node: dict) -> None:
    nid = node.get("id")
    op = node.get("op")
    if not isinstance(nid, str) or not nid:
        raise GraphError(f"node with missing or empty id: {node!r}")
    if nid == INPUT_ID:
        raise GraphError(f"node id '{INPUT_ID}' is reserved for the graph input")
    if op not in OPS:
        raise GraphError(f"node '{nid}': unknown op {op!r}")
    for field in _REQUIRED_FIELDS[op]:
        if field not in node:
            raise GraphError(f"node '{nid}' ({op}): missing field '{field}'")
    if op == "conv2d":
        for field in ("in_ch", "out_ch", "kernel", "stride"):
            _positive_int(node, field)
        if not isinstance(node["pad"], int) or node["pad"] < 0:
            raise GraphError(f"node '{nid}': pad must be a non-negative integer")
    if op == "batchnorm":
        _positive_int(node, "ch")
        if not isinstance(node["eps"], (int, float)) or node["eps"] <= 0:
            raise GraphError(f"node '{nid}': eps must be positive")
    if op == "fc":
        _positive_int(node, "in_dim")
        _positive_int(node, "out_dim")


def validate_graph(doc: dict, store=None) -> GraphInfo:
    """Validate a graph document; optionally check weights against a store.

    Raises GraphError naming the offending node on any structural problem:
    duplicate/unknown ids, cycles, channel or shape mismatches, bad taps,
    missing or mis-shaped tensors.
    """
    if not isinstance(doc, dict):
        raise GraphError("graph document must be a JSON object")
    if doc.get("format_version") != FORMAT_VERSION:
        raise GraphError(f"unsupported graph format_version {doc.get('format_version')!r}")

    spec = doc.get("input")
    if (not isinstance(spec, dict)
            or any(k not in spec for k in ("channels", "height", "width"))):
        raise GraphError("graph input must declare channels, height and width")
    input_shape = (int(spec["channels"]), int(spec["height"]), int(spec["width"]))
    if min(input_shape) < 1:
        raise GraphError("graph input dimensions must be positive")

    norm = doc.get("normalization")
    channels = input_shape[0]
    if norm is None:
        mean = [0.0] * channels
        std = [1.0] * channels
    else:
        mean = [float(v) for v in norm.get("mean", [])]
        std = [float(v) for v in norm.get("std", [])]
        if len(mean) != channels or len(std) != channels:
            raise GraphError(
                f"normalization mean/std must have {channels} entries")
        if any(s == 0 for s in std):
            raise GraphError("normalization std entries must be nonzero")

    raw_nodes = doc.get("nodes")
    if not isinstance(raw_nodes, list) or not raw_nodes:
        raise GraphError("graph must contain a non-empty node list")
    nodes: dict[str, dict] = {}
    for node in raw_nodes:
        _check_fields(node)
        nid = node["id"]
        if nid in nodes:
            raise GraphError(f"duplicate node id '{nid}'")
        nodes[nid] = node

    for node in nodes.values():
        for ref in node_inputs(node):
            if ref != INPUT_ID and ref not in nodes:
                raise GraphError(
                    f"node '{node['id']}': references unknown node '{ref}'")

    # Kahn topological sort; leftovers mean a cycle.
    pending = {nid: sum(1 for r in node_inputs(n) if r != INPUT_ID)
               for nid, n in nodes.items()}
    consumers: dict[str, list[str]] = {nid: [] for nid in nodes}
    for nid, node in nodes.items():
        for ref in node_inputs(node):
            if ref != INPUT_ID:
                consumers[ref].append(nid)
    ready = [nid for nid in nodes if pending[nid] == 0]  # document order
    order = []
    while ready:
        nid = ready.pop(0)
        order.append(nid)
        for consumer in consumers[nid]:
            pending[consumer] -= 1
            if pending[consumer] == 0:
                ready.append(consumer)
    if len(order) != len(nodes):
        stuck = sorted(set(nodes) - set(order))[0]
        raise GraphError(f"cycle detected involving node '{stuck}'")

    shapes: dict[str, tuple] = {INPUT_ID: input_shape}
    for nid in order:
        node = nodes[nid]
        op = node["op"]
        if op == "add":
            lhs, rhs = shapes[node["lhs_node"]], shapes[node["rhs_node"]]
            if lhs != rhs:
                raise GraphError(
                    f"node '{nid}': add operands disagree ({lhs} vs {rhs})")
            shapes[nid] = lhs
            continue
        src = shapes[node["input"]]
        if op == "conv2d":
            if len(src) != 3:
                raise GraphError(f"node '{nid}': conv2d needs a (C,H,W) input, got {src}")
            c, h, w = src
            if c != node["in_ch"]:
                raise GraphError(
                    f"node '{nid}': in_ch={node['in_ch']} but input has {c} channels")
            k, s, p = node["kernel"], node["stride"], node["pad"]
            ho = (h + 2 * p - k) // s + 1
            wo = (w + 2 * p - k) // s + 1
            if h + 2 * p < k or w + 2 * p < k or ho < 1 or wo < 1:
                raise GraphError(f"node '{nid}': kernel {k} does not fit {h}x{w} input")
            shapes[nid] = (node["out_ch"], ho, wo)
        elif op == "batchnorm":
            if len(src) != 3 or src[0] != node["ch"]:
                raise GraphError(
                    f"node '{nid}': batchnorm over {node['ch']} channels got input {src}")
            shapes[nid] = src
        elif op == "relu":
            shapes[nid] = src
        elif op == "global_avg_pool":
            if len(src) != 3:
                raise GraphError(f"node '{nid}': pooling needs a (C,H,W) input, got {src}")
            shapes[nid] = (src[0],)
        elif op == "fc":
            if len(src) != 1 or src[0] != node["in_dim"]:
                raise GraphError(
                    f"node '{nid}': fc expects a vector of {node['in_dim']}, got {src}")
            shapes[nid] = (node["out_dim"],)

    taps = doc.get("taps", [])
    if not isinstance(taps, list):
        raise GraphError("taps must be a list of node ids")
    seen = set()
    for tap in taps:
        if tap not in nodes:
            raise GraphError(f"tap '{tap}' names an unknown node")
        if tap in seen:
            raise GraphError(f"tap '{tap}' listed twice")
        seen.add(tap)
        if len(shapes[tap]) != 3:
            raise GraphError(f"tap '{tap}' does not produce a spatial feature map")

    output = doc.get("output")
    if output not in nodes:
        raise GraphError(f"output '{output}' names an unknown node")
    if len(shapes[output]) != 1:
        raise GraphError(f"output '{output}' must produce a vector of logits")

    info = GraphInfo(nodes=nodes, order=tuple(order), shapes=shapes,
                     taps=tuple(taps), output=output, input_shape=input_shape,
                     normalization=(mean, std))
    if store is not None:
        check_tensors(info, store)
    return info


def required_tensors(info: GraphInfo) -> dict[str, tuple]:
    """Names and shapes of every tensor the graph references."""
    out: dict[str, tuple] = {}

    def put(nid, name, shape):
        if name in out and out[name] != shape:
            raise GraphError(
                f"node '{nid}': tensor '{name}' reused with shape {shape}, "
                f"previously {out[name]}")
        out[name] = shape

    for nid in info.order:
        node = info.nodes[nid]
        op = node["op"]
        if op == "conv2d":
            k = node["kernel"]
            put(nid, node["weight"], (node["out_ch"], node["in_ch"], k, k))
            if node.get("bias"):
                put(nid, node["bias"], (node["out_ch"],))
        elif op == "batchnorm":
            for field in ("gamma", "beta", "mean", "var"):
                put(nid, node[field], (node["ch"],))
        elif op == "fc":
            put(nid, node["weight"], (node["out_dim"], node["in_dim"]))
            if node.get("bias"):
                put(nid, node["bias"], (node["out_dim"],))
    return out


def check_tensors(info: GraphInfo, store) -> None:
    for nid in info.order:
        node = info.nodes[nid]
        op = node["op"]
        names = []
        if op == "conv2d" or op == "fc":
            names.append(node["weight"])
            if node.get("bias"):
                names.append(node["bias"])
        elif op == "batchnorm":
            names.extend(node[f] for f in ("gamma", "beta", "mean", "var"))
        for name in names:
            if name not in store:
                raise GraphError(f"node '{nid}': tensor '{name}' missing from store")
    for name, shape in required_tensors(info).items():
        actual = tuple(store[name].shape)
        if actual != shape:
            raise GraphError(
                f"tensor '{name}': expected shape {shape}, store has {actual}")


def graph_fingerprint_payload(doc: dict) -> bytes:
    """Canonical bytes of a graph document, for content hashing."""
    return canonical_json(doc).encode("utf-8")


def load_graph(path) -> dict:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise GraphError(f"{path}: not valid JSON ({exc})") from exc
    return doc


def save_graph(path, doc: dict) -> None:
    Path(path).write_text(
        json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
