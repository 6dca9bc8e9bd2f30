"""Architecture templates: graph documents, parameter maps, torch mirrors.

A template pins a graph document and the total mapping from the source
framework's state-dict keys to the graph's tensor names, including the layout
rule per tensor (a permutation of axes, or None for identity; torch shares the
engine's row-major (out, in, kh, kw) convention, so its rules are identity).
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from freqtag.graph import node_inputs, validate_graph
from freqtag.resnet import resnet_graph

# state-dict entries that carry no parameters worth exporting
IGNORED_KEY_SUFFIXES = ("num_batches_tracked",)


@dataclass(frozen=True)
class ExportMapping:
    """Total map from source parameter names to target tensors."""

    template_id: str
    graph: dict
    parameters: dict      # source key -> (tensor name, permute axes or None)


def parameter_mapping(graph_doc: dict) -> dict:
    mapping = {}
    for node in graph_doc["nodes"]:
        nid, op = node["id"], node["op"]
        if op == "conv2d" or op == "fc":
            mapping[f"{nid}.weight"] = (node["weight"], None)
            if node.get("bias"):
                mapping[f"{nid}.bias"] = (node["bias"], None)
        elif op == "batchnorm":
            mapping[f"{nid}.weight"] = (node["gamma"], None)
            mapping[f"{nid}.bias"] = (node["beta"], None)
            mapping[f"{nid}.running_mean"] = (node["mean"], None)
            mapping[f"{nid}.running_var"] = (node["var"], None)
    return mapping


def _resnet_template(template_id, blocks_per_stage):
    graph = resnet_graph(blocks_per_stage=blocks_per_stage, widths=(16, 32, 64))
    return ExportMapping(template_id=template_id, graph=graph,
                         parameters=parameter_mapping(graph))


_BUILDERS = {
    "resnet32-cifar": lambda: _resnet_template("resnet32-cifar", 5),
    "resnet20-cifar": lambda: _resnet_template("resnet20-cifar", 3),
}


def template_ids() -> list[str]:
    return sorted(_BUILDERS)


def get_template(template_id: str) -> ExportMapping:
    try:
        return _BUILDERS[template_id]()
    except KeyError:
        raise ValueError(
            f"unknown template {template_id!r}; available: {template_ids()}"
        ) from None


class GraphModule(torch.nn.Module):
    """A torch mirror of a graph document, used to produce reference logits.

    Submodules are registered under their node ids, so the state dict keys
    line up with parameter_mapping() of the same graph.
    """

    def __init__(self, graph_doc: dict):
        super().__init__()
        info = validate_graph(graph_doc)
        self._order = info.order
        self._nodes = info.nodes
        self._output = info.output
        mean, std = info.normalization
        # normalization constants travel in the graph document, not checkpoints
        self.register_buffer("_norm_mean",
                             torch.tensor(mean).view(1, -1, 1, 1).float(),
                             persistent=False)
        self.register_buffer("_norm_std",
                             torch.tensor(std).view(1, -1, 1, 1).float(),
                             persistent=False)
        for nid in self._order:
            node = self._nodes[nid]
            if node["op"] == "conv2d":
                self.add_module(nid, torch.nn.Conv2d(
                    node["in_ch"], node["out_ch"], node["kernel"],
                    stride=node["stride"], padding=node["pad"],
                    bias=bool(node.get("bias"))))
            elif node["op"] == "batchnorm":
                self.add_module(nid, torch.nn.BatchNorm2d(node["ch"],
                                                          eps=node["eps"]))
            elif node["op"] == "fc":
                self.add_module(nid, torch.nn.Linear(
                    node["in_dim"], node["out_dim"], bias=bool(node.get("bias"))))

    def forward(self, x):
        values = {"input": (x - self._norm_mean) / self._norm_std}
        for nid in self._order:
            node = self._nodes[nid]
            op = node["op"]
            if op == "add":
                out = values[node["lhs_node"]] + values[node["rhs_node"]]
            else:
                src = values[node["input"]]
                if op == "relu":
                    out = torch.relu(src)
                elif op == "global_avg_pool":
                    out = src.mean(dim=(2, 3))
                else:
                    out = getattr(self, nid)(src)
            values[nid] = out
        return values[self._output]

    @staticmethod
    def inputs_of(node):
        return node_inputs(node)
