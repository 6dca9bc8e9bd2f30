"""CIFAR-style residual network graphs (16/32/64 widths, post-activation).

The reference layout is a 3x3 stem conv followed by 3 stages of basic blocks
(two 3x3 convs each); stage transitions halve the spatial size with stride-2
convs and 1x1 projection shortcuts. With 5 blocks per stage this yields 31
main-path convolutions plus the classifier, and the taps are the 31 post-ReLU
feature maps numbered in main-path order, so tapped layer i is conv i.
"""

from __future__ import annotations

import numpy as np

from .tensorstore import TensorStore


def resnet_graph(blocks_per_stage: int = 5, widths=(16, 32, 64),
                 num_classes: int = 10, height: int = 32, width: int = 32,
                 eps: float = 1e-5) -> dict:
    nodes = []
    taps = []
    conv_index = 0

    def conv_bn(prev, in_ch, out_ch, kernel, stride, pad):
        nonlocal conv_index
        conv_index += 1
        cid, bid = f"conv{conv_index}", f"bn{conv_index}"
        nodes.append({"id": cid, "op": "conv2d", "input": prev,
                      "in_ch": in_ch, "out_ch": out_ch, "kernel": kernel,
                      "stride": stride, "pad": pad,
                      "weight": f"{cid}.weight", "bias": None})
        nodes.append({"id": bid, "op": "batchnorm", "input": cid,
                      "ch": out_ch, "eps": eps,
                      "gamma": f"{bid}.gamma", "beta": f"{bid}.beta",
                      "mean": f"{bid}.mean", "var": f"{bid}.var"})
        return bid, conv_index

    prev, idx = conv_bn("input", 3, widths[0], 3, 1, 1)
    nodes.append({"id": f"relu{idx}", "op": "relu", "input": prev})
    prev = f"relu{idx}"
    taps.append(prev)

    in_ch = widths[0]
    for stage, out_ch in enumerate(widths):
        for block in range(blocks_per_stage):
            downsample = stage > 0 and block == 0
            stride = 2 if downsample else 1
            shortcut = prev
            bn_a, idx_a = conv_bn(prev, in_ch, out_ch, 3, stride, 1)
            nodes.append({"id": f"relu{idx_a}", "op": "relu", "input": bn_a})
            taps.append(f"relu{idx_a}")
            bn_b, idx_b = conv_bn(f"relu{idx_a}", out_ch, out_ch, 3, 1, 1)
            if downsample or in_ch != out_ch:
                pid = f"proj{stage}"
                nodes.append({"id": pid, "op": "conv2d", "input": shortcut,
                              "in_ch": in_ch, "out_ch": out_ch, "kernel": 1,
                              "stride": stride, "pad": 0,
                              "weight": f"{pid}.weight", "bias": None})
                nodes.append({"id": f"{pid}_bn", "op": "batchnorm", "input": pid,
                              "ch": out_ch, "eps": eps,
                              "gamma": f"{pid}_bn.gamma", "beta": f"{pid}_bn.beta",
                              "mean": f"{pid}_bn.mean", "var": f"{pid}_bn.var"})
                shortcut = f"{pid}_bn"
            add_id = f"add{idx_b}"
            nodes.append({"id": add_id, "op": "add",
                          "lhs_node": bn_b, "rhs_node": shortcut})
            nodes.append({"id": f"relu{idx_b}", "op": "relu", "input": add_id})
            taps.append(f"relu{idx_b}")
            prev = f"relu{idx_b}"
            in_ch = out_ch

    nodes.append({"id": "pool", "op": "global_avg_pool", "input": prev})
    nodes.append({"id": "fc", "op": "fc", "input": "pool",
                  "in_dim": widths[-1], "out_dim": num_classes,
                  "weight": "fc.weight", "bias": "fc.bias"})
    return {
        "format_version": 1,
        "input": {"channels": 3, "height": height, "width": width},
        "normalization": {"mean": [0.0, 0.0, 0.0], "std": [1.0, 1.0, 1.0]},
        "nodes": nodes,
        "taps": taps,
        "output": "fc",
    }


def random_weights(doc: dict, seed: int = 0) -> TensorStore:
    """He-initialized convs, identity batchnorm statistics, small-scale fc."""
    from . import graph as graphmod

    info = graphmod.validate_graph(doc)
    rng = np.random.default_rng(seed)
    store = TensorStore()
    for name, shape in sorted(graphmod.required_tensors(info).items()):
        if name.endswith(".gamma") or name.endswith(".var"):
            array = np.ones(shape, dtype=np.float32)
        elif name.endswith(".beta") or name.endswith(".mean") or name.endswith(".bias"):
            array = np.zeros(shape, dtype=np.float32)
        elif name.endswith(".weight") and len(shape) == 4:
            fan_in = shape[1] * shape[2] * shape[3]
            array = rng.normal(0.0, np.sqrt(2.0 / fan_in), shape).astype(np.float32)
        elif name.endswith(".weight") and len(shape) == 2:
            array = rng.normal(0.0, 0.05, shape).astype(np.float32)
        else:
            array = np.zeros(shape, dtype=np.float32)
        store[name] = array
    return store
