"""Deterministic desk-scale fixtures: tiny models and synthetic CIFAR batches."""

from __future__ import annotations

import numpy as np

from . import cifar
from .resnet import resnet_graph, random_weights
from .tensorstore import TensorStore


def two_filter_model() -> tuple[dict, TensorStore]:
    """conv2d(3->2, k3, s1, p1) + relu with both channels tapped.

    Filter 0 averages its 3x3x3 neighborhood (weights sum to 1), filter 1 is a
    horizontal edge detector; weights are fixed constants, not random.
    """
    doc = {
        "format_version": 1,
        "input": {"channels": 3, "height": 32, "width": 32},
        "nodes": [
            {"id": "conv1", "op": "conv2d", "input": "input",
             "in_ch": 3, "out_ch": 2, "kernel": 3, "stride": 1, "pad": 1,
             "weight": "conv1.weight", "bias": "conv1.bias"},
            {"id": "relu1", "op": "relu", "input": "conv1"},
            {"id": "pool", "op": "global_avg_pool", "input": "relu1"},
            {"id": "fc", "op": "fc", "input": "pool", "in_dim": 2, "out_dim": 10,
             "weight": "fc.weight", "bias": "fc.bias"},
        ],
        "taps": ["relu1"],
        "output": "fc",
    }
    weight = np.zeros((2, 3, 3, 3), dtype=np.float32)
    weight[0] = 1.0 / 27.0
    edge = np.array([[-1.0, 0.0, 1.0]] * 3, dtype=np.float32) / 6.0
    weight[1] = edge[None, :, :]
    bias = np.array([0.0, 0.05], dtype=np.float32)
    fc_w = np.linspace(-0.5, 0.5, 20, dtype=np.float32).reshape(10, 2)
    fc_b = np.zeros(10, dtype=np.float32)
    store = TensorStore([("conv1.weight", weight), ("conv1.bias", bias),
                         ("fc.weight", fc_w), ("fc.bias", fc_b)])
    return doc, store


def conv_stack_model(channels=(4, 4), num_classes: int = 10,
                     seed: int = 11) -> tuple[dict, TensorStore]:
    """Sequential conv/bn/relu stack (no shortcuts), every stage tapped."""
    nodes = []
    taps = []
    prev = "input"
    in_ch = 3
    rng = np.random.default_rng(seed)
    store = TensorStore()
    for i, out_ch in enumerate(channels, start=1):
        cid, bid, rid = f"conv{i}", f"bn{i}", f"relu{i}"
        nodes.append({"id": cid, "op": "conv2d", "input": prev,
                      "in_ch": in_ch, "out_ch": out_ch, "kernel": 3,
                      "stride": 1, "pad": 1, "weight": f"{cid}.weight",
                      "bias": f"{cid}.bias"})
        nodes.append({"id": bid, "op": "batchnorm", "input": cid, "ch": out_ch,
                      "eps": 1e-5, "gamma": f"{bid}.gamma", "beta": f"{bid}.beta",
                      "mean": f"{bid}.mean", "var": f"{bid}.var"})
        nodes.append({"id": rid, "op": "relu", "input": bid})
        taps.append(rid)
        fan_in = in_ch * 9
        store[f"{cid}.weight"] = rng.normal(
            0.0, np.sqrt(2.0 / fan_in), (out_ch, in_ch, 3, 3)).astype(np.float32)
        store[f"{cid}.bias"] = np.zeros(out_ch, dtype=np.float32)
        store[f"{bid}.gamma"] = np.ones(out_ch, dtype=np.float32)
        store[f"{bid}.beta"] = np.zeros(out_ch, dtype=np.float32)
        store[f"{bid}.mean"] = np.zeros(out_ch, dtype=np.float32)
        store[f"{bid}.var"] = np.ones(out_ch, dtype=np.float32)
        prev = rid
        in_ch = out_ch
    nodes.append({"id": "pool", "op": "global_avg_pool", "input": prev})
    nodes.append({"id": "fc", "op": "fc", "input": "pool", "in_dim": in_ch,
                  "out_dim": num_classes, "weight": "fc.weight", "bias": "fc.bias"})
    store["fc.weight"] = rng.normal(0.0, 0.2, (num_classes, in_ch)).astype(np.float32)
    store["fc.bias"] = rng.normal(0.0, 0.5, (num_classes,)).astype(np.float32)
    doc = {
        "format_version": 1,
        "input": {"channels": 3, "height": 32, "width": 32},
        "nodes": nodes,
        "taps": taps,
        "output": "fc",
    }
    return doc, store


def resnet32_random(seed: int = 7) -> tuple[dict, TensorStore]:
    """The CIFAR-style 3-stage (16/32/64) residual fixture with random weights."""
    doc = resnet_graph(blocks_per_stage=5, widths=(16, 32, 64))
    return doc, random_weights(doc, seed=seed)


def synthetic_cifar_batch(path, count: int, seed: int = 0) -> None:
    """Write `count` pseudo-random records in CIFAR-10 batch format."""
    rng = np.random.default_rng(seed)
    images = rng.integers(0, 256, size=(count, 32, 32, 3), dtype=np.uint8)
    # mild smoothing so images have spatial structure rather than pure noise
    smoothed = images.astype(np.float64)
    for axis in (0, 1):
        smoothed = (smoothed + np.roll(smoothed, 1, axis=axis + 1)) / 2.0
    labels = rng.integers(0, 10, size=count)
    cifar.write_cifar10(path, np.floor(smoothed).astype(np.uint8),
                        [int(v) for v in labels])


def gradient_image(height: int = 32, width: int = 32,
                   low: float = 0.4, high: float = 1.0) -> np.ndarray:
    """Deterministic vertical luminance ramp, equal across channels."""
    ramp = np.linspace(low, high, height)[:, None]
    return np.repeat(np.repeat(ramp[:, :, None], width, axis=1), 3, axis=2)
