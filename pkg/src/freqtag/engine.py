"""Forward-only CNN inference with per-filter activation taps.

The engine evaluates validated graph documents over float64 arithmetic
(weights are upcast from the float32 container at load). conv2d is
cross-correlation with zero padding, batchnorm uses stored running statistics,
and every tapped node's feature map can be reduced to one scalar per frame to
form activation traces.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from . import graph as graphmod
from .errors import GraphError, NumericError
from .stimulus import FrameSequence
from .tensorstore import TensorStore

REDUCTIONS = ("mean_excluding_zeros", "mean", "max")

# frames per forward chunk when sweeping a sequence; affects memory use only
TRACE_CHUNK = 32


@dataclass(frozen=True)
class ActivationTrace:
    """One filter's scalar response across a tagged frame sequence."""

    layer: int
    channel: int
    values: np.ndarray
    reduction: str
    node_id: str

    @property
    def filter_id(self) -> tuple[int, int]:
        return (self.layer, self.channel)


class Model:
    """Immutable, evaluable model; build via load_model()."""

    def __init__(self, doc: dict, store: TensorStore, info: graphmod.GraphInfo):
        self.doc = doc
        self.store = store
        self.info = info
        self.fingerprint = hashlib.sha256(
            graphmod.graph_fingerprint_payload(doc) + store.tobytes()).hexdigest()
        self._weights: dict[str, np.ndarray] = {}
        for name in graphmod.required_tensors(info):
            w = store[name].astype(np.float64)
            w.flags.writeable = False
            self._weights[name] = w
        mean, std = info.normalization
        self._norm_mean = np.asarray(mean, dtype=np.float64).reshape(1, -1, 1, 1)
        self._norm_std = np.asarray(std, dtype=np.float64).reshape(1, -1, 1, 1)
        # tap node -> 1-based layer index, in tap-list order
        self.tap_layers = {tap: i for i, tap in enumerate(info.taps, start=1)}
        self.mask_targets = {
            self.tap_layers[tap]: _resolve_filter_nodes(info.nodes, tap)
            for tap in info.taps
        }

    @property
    def input_shape(self) -> tuple:
        return self.info.input_shape

    @property
    def taps(self) -> tuple:
        return self.info.taps

    def filter_inventory(self) -> list[tuple[int, int]]:
        """All assessable (layer, channel) pairs, sorted."""
        out = []
        for tap in self.info.taps:
            layer = self.tap_layers[tap]
            channels = self.info.shapes[tap][0]
            out.extend((layer, c) for c in range(channels))
        return sorted(out)

    def layer_channels(self) -> dict[int, int]:
        return {self.tap_layers[tap]: self.info.shapes[tap][0]
                for tap in self.info.taps}

    # -- evaluation ---------------------------------------------------------

    def forward_batch(self, frames: np.ndarray, want_taps: bool = False):
        """Evaluate (N, H, W, C) frames; returns (logits, taps dict)."""
        frames = np.asarray(frames, dtype=np.float64)
        c, h, w = self.info.input_shape
        if frames.ndim != 4 or frames.shape[1:] != (h, w, c):
            raise ValueError(
                f"expected frames of shape (N, {h}, {w}, {c}), got {frames.shape}")
        x = frames.transpose(0, 3, 1, 2)
        x = (x - self._norm_mean) / self._norm_std

        info = self.info
        keep = set(info.taps) if want_taps else set()
        keep.add(info.output)
        remaining = {nid: 0 for nid in info.nodes}
        for node in info.nodes.values():
            for ref in graphmod.node_inputs(node):
                if ref != graphmod.INPUT_ID:
                    remaining[ref] += 1

        values: dict[str, np.ndarray] = {graphmod.INPUT_ID: x}
        taps: dict[str, np.ndarray] = {}
        for nid in info.order:
            node = info.nodes[nid]
            # overflow/invalid surface as NumericError via the finiteness check
            with np.errstate(over="ignore", invalid="ignore"):
                out = self._eval_node(node, values)
            if not np.isfinite(out).all():
                raise NumericError(f"non-finite values produced by node '{nid}'")
            values[nid] = out
            if want_taps and nid in self.tap_layers:
                out.flags.writeable = False
                taps[nid] = out
            for ref in graphmod.node_inputs(node):
                if ref != graphmod.INPUT_ID:
                    remaining[ref] -= 1
                    if remaining[ref] == 0 and ref not in keep:
                        del values[ref]
        logits = values[info.output]
        logits.flags.writeable = False
        return logits, taps

    def forward(self, frame: np.ndarray, want_taps: bool = True):
        """Evaluate a single (H, W, C) frame."""
        frame = np.asarray(frame, dtype=np.float64)
        if frame.ndim != 3:
            raise ValueError(f"expected a (H, W, C) frame, got {frame.shape}")
        logits, taps = self.forward_batch(frame[None], want_taps=want_taps)
        return logits[0], {nid: fmap[0] for nid, fmap in taps.items()}

    def _eval_node(self, node: dict, values: dict) -> np.ndarray:
        op = node["op"]
        if op == "add":
            return values[node["lhs_node"]] + values[node["rhs_node"]]
        x = values[node["input"]]
        if op == "conv2d":
            bias = self._weights[node["bias"]] if node.get("bias") else None
            return _conv2d(x, self._weights[node["weight"]], bias,
                           node["stride"], node["pad"])
        if op == "batchnorm":
            w = self._weights
            return _batchnorm(x, w[node["gamma"]], w[node["beta"]],
                              w[node["mean"]], w[node["var"]], node["eps"])
        if op == "relu":
            return np.maximum(x, 0.0)
        if op == "global_avg_pool":
            return x.mean(axis=(2, 3))
        if op == "fc":
            out = x @ self._weights[node["weight"]].T
            if node.get("bias"):
                out = out + self._weights[node["bias"]]
            return out
        raise GraphError(f"node '{node['id']}': unknown op {op!r}")


def load_model(graph_doc: dict, store: TensorStore) -> Model:
    """Validate a graph against a tensor store and bind it for evaluation."""
    info = graphmod.validate_graph(graph_doc, store=store)
    return Model(graph_doc, store.copy(), info)


def forward_with_taps(model: Model, frame: np.ndarray):
    """Logits plus the feature map of every tap node, for one frame."""
    return model.forward(frame, want_taps=True)


# ---------------------------------------------------------------------------
# operators

def _conv2d(x, w, b, stride, pad):
    n = x.shape[0]
    out_ch, _, kh, kw = w.shape
    if pad:
        x = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    win = sliding_window_view(x, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
    ho, wo = win.shape[2], win.shape[3]
    cols = win.transpose(0, 2, 3, 1, 4, 5).reshape(n * ho * wo, -1)
    out = cols @ w.reshape(out_ch, -1).T
    if b is not None:
        out = out + b
    return out.reshape(n, ho, wo, out_ch).transpose(0, 3, 1, 2)


def _batchnorm(x, gamma, beta, mean, var, eps):
    shape = (1, -1, 1, 1)
    denom = np.sqrt(var + eps).reshape(shape)
    return (x - mean.reshape(shape)) / denom * gamma.reshape(shape) + beta.reshape(shape)


# ---------------------------------------------------------------------------
# feature-map reduction and trace collection

def reduce_feature_map(fmap: np.ndarray, mode: str) -> float:
    """Collapse one spatial feature map to a scalar."""
    fmap = np.asarray(fmap, dtype=np.float64)
    if fmap.size == 0:
        raise ValueError("cannot reduce an empty feature map")
    if mode == "mean":
        return float(fmap.mean())
    if mode == "max":
        return float(fmap.max())
    if mode == "mean_excluding_zeros":
        count = np.count_nonzero(fmap)
        if count == 0:
            return 0.0
        return float(fmap.sum() / count)
    raise ValueError(f"unknown reduction mode {mode!r}; choose from {REDUCTIONS}")


def _reduce_batch(fmaps: np.ndarray, mode: str) -> np.ndarray:
    """(N, C, H, W) -> (N, C), same semantics as reduce_feature_map."""
    if mode == "mean":
        return fmaps.mean(axis=(2, 3))
    if mode == "max":
        return fmaps.max(axis=(2, 3))
    if mode == "mean_excluding_zeros":
        count = np.count_nonzero(fmaps, axis=(2, 3))
        total = fmaps.sum(axis=(2, 3))
        return np.where(count == 0, 0.0, total / np.maximum(count, 1))
    raise ValueError(f"unknown reduction mode {mode!r}; choose from {REDUCTIONS}")


def collect_traces(model: Model, seq: FrameSequence,
                   mode: str = "mean_excluding_zeros",
                   chunk: int = TRACE_CHUNK) -> list[ActivationTrace]:
    """One ActivationTrace per (tapped layer, channel), frame order preserved."""
    if mode not in REDUCTIONS:
        raise ValueError(f"unknown reduction mode {mode!r}; choose from {REDUCTIONS}")
    total = len(seq)
    reduced: dict[str, list[np.ndarray]] = {tap: [] for tap in model.taps}
    for start in range(0, total, chunk):
        stop = min(start + chunk, total)
        frames = np.stack([seq[i] for i in range(start, stop)])
        _, taps = model.forward_batch(frames, want_taps=True)
        for tap in model.taps:
            reduced[tap].append(_reduce_batch(taps[tap], mode))
    traces = []
    for tap in model.taps:
        block = np.concatenate(reduced[tap], axis=0)  # (T, C)
        layer = model.tap_layers[tap]
        for channel in range(block.shape[1]):
            values = np.ascontiguousarray(block[:, channel])
            values.flags.writeable = False
            traces.append(ActivationTrace(layer=layer, channel=channel,
                                          values=values, reduction=mode,
                                          node_id=tap))
    traces.sort(key=lambda t: (t.layer, t.channel))
    return traces


def _resolve_filter_nodes(nodes: dict, tap_id: str):
    """Walk a tap back to the conv/batchnorm pair that produces its channels.

    relu follows its input, add follows its lhs (main) branch. Returns
    (conv_id or None, batchnorm_id or None).
    """
    conv_id = None
    bn_id = None
    nid = tap_id
    for _ in range(len(nodes) + 1):
        node = nodes[nid]
        op = node["op"]
        if op == "relu":
            nid = node["input"]
        elif op == "add":
            nid = node["lhs_node"]
        elif op == "batchnorm":
            bn_id = nid
            nid = node["input"]
        elif op == "conv2d":
            conv_id = nid
            break
        else:
            break
        if nid == graphmod.INPUT_ID:
            break
    return conv_id, bn_id
