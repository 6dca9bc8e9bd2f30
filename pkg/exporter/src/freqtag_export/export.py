"""Checkpoint conversion: torch state dict -> graph document + tensor container.

float32 parameters pass through bit-exactly (a layout rule, when present,
permutes axes without touching values). An optional verification step compares
torch logits against the freqtag engine on random inputs.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from freqtag import TensorStore, load_model
from freqtag.graph import save_graph

from .templates import (GraphModule, IGNORED_KEY_SUFFIXES, get_template)

VERIFY_INPUTS = 5
VERIFY_TOLERANCE = 1e-4


class ExportError(Exception):
    """Checkpoint does not match the template; the message lists each name."""


@dataclass
class ExportSummary:
    template_id: str
    n_tensors: int
    n_ignored: int
    graph_path: str
    weights_path: str
    fingerprint: str
    verified: bool = False
    max_logit_diff: float | None = None


def load_state_dict(checkpoint_path) -> dict:
    blob = torch.load(checkpoint_path, map_location="cpu", weights_only=True)
    if isinstance(blob, dict) and "state_dict" in blob:
        blob = blob["state_dict"]
    if not isinstance(blob, dict):
        raise ExportError(f"{checkpoint_path}: not a state dict checkpoint")
    return blob


def _convert(state: dict, mapping) -> TensorStore:
    problems = []
    ignored = 0
    tensors = {}
    for key, value in state.items():
        if key.endswith(IGNORED_KEY_SUFFIXES):
            ignored += 1
            continue
        if key not in mapping.parameters:
            problems.append(f"unexpected parameter: {key}")
    for key, (target, permute) in mapping.parameters.items():
        if key not in state:
            problems.append(f"missing parameter: {key}")
            continue
        tensor = state[key]
        if tensor.dtype != torch.float32:
            problems.append(f"{key}: dtype {tensor.dtype} is not float32")
            continue
        array = tensor.detach().cpu().numpy()
        if permute is not None:
            array = np.ascontiguousarray(array.transpose(permute))
        tensors[target] = array
    if problems:
        raise ExportError("checkpoint does not match template:\n  "
                          + "\n  ".join(sorted(problems)))
    store = TensorStore()
    for name in sorted(tensors):
        store[name] = tensors[name]
    return store, ignored


def verify_roundtrip(state: dict, mapping, store: TensorStore,
                     n_inputs: int = VERIFY_INPUTS, seed: int = 0) -> float:
    """Max |torch logits - engine logits| over random inputs."""
    torch_model = GraphModule(mapping.graph)
    missing, unexpected = torch_model.load_state_dict(state, strict=False)
    if missing:
        raise ExportError(f"torch mirror missing parameters: {sorted(missing)}")
    torch_model.eval()
    engine_model = load_model(mapping.graph, store)
    c, h, w = engine_model.input_shape
    rng = np.random.default_rng(seed)
    worst = 0.0
    with torch.no_grad():
        for _ in range(n_inputs):
            frame = rng.uniform(0, 1, size=(h, w, c))
            torch_in = torch.from_numpy(
                frame.transpose(2, 0, 1)[None]).to(torch.float32)
            reference = torch_model(torch_in).numpy()[0]
            logits, _ = engine_model.forward(frame, want_taps=False)
            worst = max(worst, float(np.abs(logits - reference).max()))
    return worst


def export(checkpoint_path, template_id, out_graph, out_weights,
           verify: bool = True, seed: int = 0) -> ExportSummary:
    """Convert a checkpoint; optionally verify logits against the engine."""
    mapping = get_template(template_id)
    state = load_state_dict(checkpoint_path)
    store, ignored = _convert(state, mapping)
    save_graph(out_graph, mapping.graph)
    store.save(out_weights)
    summary = ExportSummary(template_id=template_id, n_tensors=len(store),
                            n_ignored=ignored, graph_path=str(out_graph),
                            weights_path=str(out_weights),
                            fingerprint=store.fingerprint())
    if verify:
        diff = verify_roundtrip(state, mapping, store, seed=seed)
        summary.verified = diff <= VERIFY_TOLERANCE
        summary.max_logit_diff = diff
        if not summary.verified:
            raise ExportError(
                f"round-trip check failed: max logit difference {diff:.3e} "
                f"exceeds {VERIFY_TOLERANCE}")
    return summary
