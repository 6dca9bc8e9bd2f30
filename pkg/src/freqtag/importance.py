"""Filter importance from component-frequency SNR: threshold, vote, summarize.

A filter is responsive on an image when its responsiveness statistic (by
default the max SNR over all target components) reaches the threshold; it is
important when it is responsive on at least ceil(vote_fraction * image_count)
images. Invalid-baseline entries count as non-responsive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BaselineError
from .spectra import (ComponentSet, Component, Spectrum, default_exclusion,
                      enumerate_components, snr_at_bin, sns_at_bin,
                      DEFAULT_BASELINE_OFFSETS)

STATISTICS = ("max_over_components", "max_over_fundamentals")


@dataclass(frozen=True)
class ImportanceConfig:
    """Thresholding and voting parameters plus the component-set definition."""

    f1: float = 6.0
    f2: float = 7.5
    max_order: int = 4
    snr_threshold: float = 150.0
    vote_fraction: float = 0.5
    statistic: str = "max_over_components"
    baseline_offsets: tuple[int, ...] = DEFAULT_BASELINE_OFFSETS

    def __post_init__(self):
        object.__setattr__(self, "baseline_offsets",
                           tuple(int(o) for o in self.baseline_offsets))
        if self.snr_threshold <= 0:
            raise ValueError("snr_threshold must be positive")
        if not 0.0 < self.vote_fraction <= 1.0:
            raise ValueError("vote_fraction must be in (0, 1]")
        if self.statistic not in STATISTICS:
            raise ValueError(
                f"unknown statistic {self.statistic!r}; choose from {STATISTICS}")
        if len(self.baseline_offsets) < 2 or any(o == 0 for o in self.baseline_offsets):
            raise ValueError("need at least two nonzero baseline offsets")

    def components_for(self, delta_f: float, nyquist: float) -> ComponentSet:
        return enumerate_components(self.f1, self.f2, self.max_order,
                                    delta_f, nyquist)

    def to_dict(self) -> dict:
        return {
            "f1": self.f1,
            "f2": self.f2,
            "max_order": self.max_order,
            "snr_threshold": self.snr_threshold,
            "vote_fraction": self.vote_fraction,
            "statistic": self.statistic,
            "baseline_offsets": list(self.baseline_offsets),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ImportanceConfig":
        kwargs = dict(d)
        if "baseline_offsets" in kwargs:
            kwargs["baseline_offsets"] = tuple(kwargs["baseline_offsets"])
        return cls(**kwargs)


@dataclass
class SnrTable:
    """Per-image table: filters x components -> (snr, sns, valid)."""

    filters: tuple            # ((layer, channel), ...) sorted
    components: ComponentSet
    snr: np.ndarray           # (F, K)
    sns: np.ndarray           # (F, K)
    valid: np.ndarray         # (F, K) bool
    image_id: object = None


def component_snr_table(spectra, components: ComponentSet,
                        cfg: ImportanceConfig | None = None,
                        image_id=None) -> SnrTable:
    """Score every filter's spectrum at every component bin.

    spectra: mapping or iterable of ((layer, channel), Spectrum). All spectra
    must share bin width and bin count. Invalid baselines are recorded per
    entry (valid=False, NaN scores) rather than raised.
    """
    if hasattr(spectra, "items"):
        spectra = spectra.items()
    pairs = sorted(spectra, key=lambda p: p[0])
    if not pairs:
        raise ValueError("no spectra supplied")
    offsets = cfg.baseline_offsets if cfg is not None else DEFAULT_BASELINE_OFFSETS
    first = pairs[0][1]
    for _, spec in pairs:
        if spec.nbins != first.nbins or spec.delta_f != first.delta_f:
            raise ValueError("all spectra must share bin width and bin count")
    exclusion = default_exclusion(components)
    comps = list(components)
    n_f, n_k = len(pairs), len(comps)
    snr = np.full((n_f, n_k), np.nan)
    sns = np.full((n_f, n_k), np.nan)
    valid = np.zeros((n_f, n_k), dtype=bool)
    for k, comp in enumerate(comps):
        per_target_exclusion = exclusion - {comp.bin}
        for i, (_, spec) in enumerate(pairs):
            try:
                snr[i, k] = snr_at_bin(spec, comp.bin, offsets, per_target_exclusion)
                sns[i, k] = sns_at_bin(spec, comp.bin, offsets, per_target_exclusion)
                valid[i, k] = True
            except BaselineError:
                pass
    return SnrTable(filters=tuple(fid for fid, _ in pairs),
                    components=components, snr=snr, sns=sns, valid=valid,
                    image_id=image_id)


@dataclass
class FilterScore:
    layer: int
    channel: int
    votes: int
    responsive_fraction: float
    important: bool
    mean_snr: tuple          # per component, NaN when never valid
    mean_sns: tuple


@dataclass
class ImportanceReport:
    """Votes, flags and per-layer counts, with full provenance."""

    filters: list            # FilterScore, sorted by (layer, channel)
    components: ComponentSet
    config: ImportanceConfig
    image_ids: tuple
    image_count: int
    votes_needed: int
    model_fingerprint: str = ""
    tagging: dict = field(default_factory=dict)

    def layer_counts(self) -> list[tuple[int, int, int]]:
        """(layer, n_filters, n_important) in ascending layer order."""
        layers: dict[int, list[int]] = {}
        for f in self.filters:
            layers.setdefault(f.layer, [0, 0])
        for f in self.filters:
            layers[f.layer][0] += 1
            layers[f.layer][1] += int(f.important)
        return [(layer, n, k) for layer, (n, k) in sorted(layers.items())]

    def important_set(self) -> frozenset:
        return frozenset((f.layer, f.channel) for f in self.filters if f.important)

    def to_json_dict(self) -> dict:
        return {
            "version": 1,
            "config": self.config.to_dict(),
            "tagging": self.tagging,
            "model_fingerprint": self.model_fingerprint,
            "image_ids": list(self.image_ids),
            "image_count": self.image_count,
            "votes_needed": self.votes_needed,
            "components": [
                {"frequency_hz": c.frequency, "bin": c.bin, "kind": c.kind,
                 "order": c.order, "n": c.n, "m": c.m}
                for c in self.components
            ],
            "filters": [
                {"layer": f.layer, "channel": f.channel, "votes": f.votes,
                 "responsive_fraction": f.responsive_fraction,
                 "important": f.important,
                 "mean_snr": [None if math.isnan(v) else v for v in f.mean_snr],
                 "mean_sns": [None if math.isnan(v) else v for v in f.mean_sns]}
                for f in self.filters
            ],
            "layers": [
                {"layer": layer, "n_filters": n, "n_important": k}
                for layer, n, k in self.layer_counts()
            ],
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "ImportanceReport":
        cfg = ImportanceConfig.from_dict(d["config"])
        comp_entries = [Component(frequency=c["frequency_hz"], bin=c["bin"],
                                  kind=c["kind"], order=c["order"],
                                  n=c["n"], m=c["m"])
                        for c in d["components"]]
        nyq = max((c.frequency for c in comp_entries), default=cfg.f2) * 2
        components = ComponentSet(comp_entries, f1=cfg.f1, f2=cfg.f2,
                                  max_order=cfg.max_order,
                                  delta_f=d.get("delta_f", 0.5), nyquist=nyq)
        filters = [
            FilterScore(layer=f["layer"], channel=f["channel"], votes=f["votes"],
                        responsive_fraction=f["responsive_fraction"],
                        important=f["important"],
                        mean_snr=tuple(math.nan if v is None else v
                                       for v in f["mean_snr"]),
                        mean_sns=tuple(math.nan if v is None else v
                                       for v in f["mean_sns"]))
            for f in d["filters"]
        ]
        return cls(filters=filters, components=components, config=cfg,
                   image_ids=tuple(d["image_ids"]),
                   image_count=d["image_count"],
                   votes_needed=d["votes_needed"],
                   model_fingerprint=d.get("model_fingerprint", ""),
                   tagging=d.get("tagging", {}))


def _statistic_columns(components: ComponentSet, statistic: str) -> list[int]:
    if statistic == "max_over_components":
        return list(range(len(components)))
    fundamentals = {c.bin for c in components.fundamentals()}
    return [k for k, c in enumerate(components) if c.bin in fundamentals]


def assess(tables, cfg: ImportanceConfig, image_ids=None,
           model_fingerprint: str = "", tagging: dict | None = None) -> ImportanceReport:
    """Fold per-image SNR tables into votes and importance flags."""
    tables = list(tables)
    if not tables:
        raise ValueError("need at least one per-image table")
    filters = tables[0].filters
    components = tables[0].components
    for t in tables[1:]:
        if t.filters != filters:
            raise ValueError("tables cover different filter sets")
        if t.components.bins() != components.bins():
            raise ValueError("tables cover different component sets")

    cols = _statistic_columns(components, cfg.statistic)
    n_images = len(tables)
    votes_needed = math.ceil(cfg.vote_fraction * n_images)

    snr_stack = np.stack([t.snr for t in tables])       # (I, F, K)
    sns_stack = np.stack([t.sns for t in tables])
    valid_stack = np.stack([t.valid for t in tables])

    stat_input = np.where(valid_stack[:, :, cols], snr_stack[:, :, cols], -np.inf)
    stats = stat_input.max(axis=2, initial=-np.inf)     # (I, F)
    responsive = stats >= cfg.snr_threshold
    votes = responsive.sum(axis=0)                      # (F,)

    with np.errstate(invalid="ignore"):
        valid_counts = valid_stack.sum(axis=0)          # (F, K)
        snr_sum = np.where(valid_stack, snr_stack, 0.0).sum(axis=0)
        sns_sum = np.where(valid_stack, sns_stack, 0.0).sum(axis=0)
        mean_snr = np.where(valid_counts > 0, snr_sum / np.maximum(valid_counts, 1),
                            np.nan)
        mean_sns = np.where(valid_counts > 0, sns_sum / np.maximum(valid_counts, 1),
                            np.nan)

    if image_ids is None:
        image_ids = tuple(t.image_id for t in tables)
    scores = []
    for i, (layer, channel) in enumerate(filters):
        v = int(votes[i])
        scores.append(FilterScore(
            layer=layer, channel=channel, votes=v,
            responsive_fraction=v / n_images,
            important=v >= votes_needed,
            mean_snr=tuple(mean_snr[i]), mean_sns=tuple(mean_sns[i])))
    return ImportanceReport(filters=scores, components=components, config=cfg,
                            image_ids=tuple(image_ids), image_count=n_images,
                            votes_needed=votes_needed,
                            model_fingerprint=model_fingerprint,
                            tagging=dict(tagging or {}))


def layer_histogram(report: ImportanceReport) -> list[tuple[int, int]]:
    """(layer, important_count) in ascending layer order, zeros included."""
    if not report.filters:
        raise ValueError("report contains no filters")
    return [(layer, k) for layer, _, k in report.layer_counts()]
