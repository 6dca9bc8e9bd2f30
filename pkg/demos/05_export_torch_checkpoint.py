"""
Exporting a PyTorch checkpoint
==============================

Convert a torch checkpoint of a templated architecture into the engine's
graph + tensor-container formats, with a logit round-trip check against the
source framework. Needs the companion package: pip install -e exporter/.
"""

from pathlib import Path

import torch

from freqtag import TensorStore, load_model
from freqtag.graph import load_graph
from freqtag_export import GraphModule, export, get_template

out_dir = Path(__file__).parent / "_out" / "05"
out_dir.mkdir(parents=True, exist_ok=True)

# %%
# Stand-in for a real training run: a randomly initialized torch mirror of the
# resnet20 template, saved the usual way.
torch.manual_seed(0)
template = get_template("resnet20-cifar")
net = GraphModule(template.graph)
ckpt_path = out_dir / "resnet20.pt"
torch.save(net.state_dict(), ckpt_path)
print(f"saved checkpoint: {ckpt_path}")

# %%
# Export converts parameter names and layouts, writes the graph document and
# the tensor container, and (by default) compares torch logits against the
# engine's on five random inputs.
summary = export(ckpt_path, "resnet20-cifar", out_dir / "resnet20.json",
                 out_dir / "resnet20.fts")
print(f"exported {summary.n_tensors} tensors, "
      f"max logit difference {summary.max_logit_diff:.2e}")

# %%
# The exported pair loads straight into the engine.
model = load_model(load_graph(out_dir / "resnet20.json"),
                   TensorStore.load(out_dir / "resnet20.fts"))
print(f"engine model ready: {len(model.taps)} tapped layers, "
      f"fingerprint {model.fingerprint[:16]}...")
