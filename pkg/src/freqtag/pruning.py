"""Structural filter masks derived from importance reports, plus evaluation.

Masking zeroes a filter's convolution weights (and bias) together with its
batchnorm gamma/beta, so the filter's own output channel is identically zero;
tensor shapes stay intact, keeping original-vs-masked comparisons bit-honest.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .engine import Model, load_model
from .importance import ImportanceReport


@dataclass(frozen=True)
class FilterMask:
    """Keep/zero decision for every assessable (layer, channel)."""

    filters: tuple                  # full inventory, sorted
    zeroed: frozenset               # subset of filters
    source: str = ""
    model_fingerprint: str = ""
    snr_threshold: float | None = None
    vote_fraction: float | None = None
    guard_kept: tuple = ()          # filters kept only by the min-keep guard

    def __post_init__(self):
        inventory = set(self.filters)
        stray = set(self.zeroed) - inventory
        if stray:
            raise ValueError(f"mask zeroes filters outside the inventory: {sorted(stray)}")
        kept_per_layer: dict[int, int] = {}
        for layer, _ in self.filters:
            kept_per_layer[layer] = 0
        for layer, ch in self.filters:
            if (layer, ch) not in self.zeroed:
                kept_per_layer[layer] += 1
        empty = sorted(l for l, kept in kept_per_layer.items() if kept == 0)
        if empty:
            raise ValueError(f"mask would zero every filter of layers {empty}")

    def keeps(self, layer: int, channel: int) -> bool:
        return (layer, channel) not in self.zeroed

    @classmethod
    def from_report(cls, report: ImportanceReport, min_keep: int = 1) -> "FilterMask":
        """Zero every non-important filter; a per-layer guard keeps at least
        min_keep filters (highest votes, ties to the lowest channel)."""
        filters = tuple(sorted((f.layer, f.channel) for f in report.filters))
        by_layer: dict[int, list] = {}
        for f in report.filters:
            by_layer.setdefault(f.layer, []).append(f)
        zeroed = set()
        guard_kept = []
        for layer, scores in sorted(by_layer.items()):
            keep = {(f.layer, f.channel) for f in scores if f.important}
            if len(keep) < min_keep:
                ranked = sorted(scores, key=lambda f: (-f.votes, f.channel))
                for f in ranked:
                    if len(keep) >= min_keep:
                        break
                    if (f.layer, f.channel) not in keep:
                        keep.add((f.layer, f.channel))
                        guard_kept.append((f.layer, f.channel))
            for f in scores:
                if (f.layer, f.channel) not in keep:
                    zeroed.add((f.layer, f.channel))
        return cls(filters=filters, zeroed=frozenset(zeroed),
                   source="importance_report",
                   model_fingerprint=report.model_fingerprint,
                   snr_threshold=report.config.snr_threshold,
                   vote_fraction=report.config.vote_fraction,
                   guard_kept=tuple(sorted(guard_kept)))

    def to_json_dict(self) -> dict:
        return {
            "version": 1,
            "source": self.source,
            "model_fingerprint": self.model_fingerprint,
            "snr_threshold": self.snr_threshold,
            "vote_fraction": self.vote_fraction,
            "filters": [list(f) for f in self.filters],
            "zeroed": [list(f) for f in sorted(self.zeroed)],
            "kept_by_guard": [list(f) for f in self.guard_kept],
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "FilterMask":
        return cls(filters=tuple(tuple(f) for f in d["filters"]),
                   zeroed=frozenset(tuple(f) for f in d["zeroed"]),
                   source=d.get("source", ""),
                   model_fingerprint=d.get("model_fingerprint", ""),
                   snr_threshold=d.get("snr_threshold"),
                   vote_fraction=d.get("vote_fraction"),
                   guard_kept=tuple(tuple(f) for f in d.get("kept_by_guard", [])))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json_dict(), indent=2,
                                         sort_keys=True) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "FilterMask":
        return cls.from_json_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def apply_mask(model: Model, mask: FilterMask) -> Model:
    """Zero the masked filters' parameters and rebuild the model."""
    inventory = tuple(sorted(model.filter_inventory()))
    if tuple(sorted(mask.filters)) != inventory:
        raise ValueError("mask inventory does not match the model's filters")
    store = model.store.copy()
    arrays = {name: np.array(store[name]) for name in store.names()}
    for layer, channel in sorted(mask.zeroed):
        conv_id, bn_id = model.mask_targets[layer]
        if conv_id is None:
            raise ValueError(f"layer {layer} has no maskable convolution")
        conv = model.info.nodes[conv_id]
        arrays[conv["weight"]][channel] = 0.0
        if conv.get("bias"):
            arrays[conv["bias"]][channel] = 0.0
        if bn_id is not None:
            bn = model.info.nodes[bn_id]
            arrays[bn["gamma"]][channel] = 0.0
            arrays[bn["beta"]][channel] = 0.0
    from .tensorstore import TensorStore
    masked_store = TensorStore((name, arrays[name]) for name in store.names())
    return load_model(model.doc, masked_store)


@dataclass
class EvalResult:
    accuracy: float
    n_images: int
    per_class_total: tuple
    per_class_correct: tuple


def evaluate(model: Model, dataset, batch: int = 64) -> EvalResult:
    """Top-1 accuracy over (image, label) pairs; argmax ties -> lowest index."""
    dataset = list(dataset)
    if not dataset:
        raise ValueError("dataset must be non-empty")
    n_classes = model.info.shapes[model.info.output][0]
    total = np.zeros(n_classes, dtype=np.int64)
    correct = np.zeros(n_classes, dtype=np.int64)
    for start in range(0, len(dataset), batch):
        chunk = dataset[start:start + batch]
        frames = np.stack([img for img, _ in chunk])
        labels = np.array([label for _, label in chunk])
        logits, _ = model.forward_batch(frames, want_taps=False)
        pred = np.argmax(logits, axis=1)
        for label, hit in zip(labels, pred == labels):
            total[label] += 1
            if hit:
                correct[label] += 1
    return EvalResult(accuracy=float(correct.sum() / len(dataset)),
                      n_images=len(dataset),
                      per_class_total=tuple(int(v) for v in total),
                      per_class_correct=tuple(int(v) for v in correct))
