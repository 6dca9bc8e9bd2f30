"""End-to-end runs: tag -> infer -> analyze -> report -> prune.

Every run writes a manifest describing its inputs (config snapshot, model
fingerprint, image ids) and every artifact it produced. Outputs are
byte-reproducible: identical inputs give identical files regardless of worker
count. Traces are cached per (model fingerprint, tagging hash, reduction,
image), so re-reporting with new thresholds skips inference.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .cifar import load_cifar10, record_count
from .engine import Model, collect_traces, load_model, REDUCTIONS
from .graph import load_graph
from .importance import (ImportanceConfig, ImportanceReport, assess,
                         component_snr_table, layer_histogram)
from .pruning import FilterMask, apply_mask, evaluate
from .spectra import Spectrum, amplitude_spectra, default_exclusion
from .stimulus import TaggingConfig, default_half_mask, tag_image_sequence
from .tensorstore import TensorStore
from .textio import canonical_json, fmt_float, write_csv, write_json

SPECTRUM_COLUMNS = ("frequency_hz", "amplitude", "is_component",
                    "component_kind", "component_order", "snr", "sns")


def default_config() -> dict:
    return {
        "tagging": TaggingConfig().to_dict(),
        "importance": {
            "max_order": 4,
            "snr_threshold": 150.0,
            "vote_fraction": 0.5,
            "statistic": "max_over_components",
            "baseline_offsets": [-2, -1, 1, 2],
        },
    }


def parse_config(doc: dict) -> tuple[TaggingConfig, ImportanceConfig]:
    """Split a config document into tagging and importance configs.

    The importance component frequencies f1/f2 are the first two region
    frequencies (by region id) unless given explicitly.
    """
    merged = default_config()
    for section in ("tagging", "importance"):
        merged[section].update(doc.get(section, {}))
    tagging = TaggingConfig.from_dict(merged["tagging"])
    imp = dict(merged["importance"])
    if "f1" not in imp or "f2" not in imp:
        if len(tagging.region_freqs) < 2:
            raise ValueError(
                "importance analysis needs two tagged regions (f1, f2)")
        ordered = sorted(tagging.region_freqs)
        imp.setdefault("f1", ordered[0][1])
        imp.setdefault("f2", ordered[1][1])
    return tagging, ImportanceConfig.from_dict(imp)


def load_config(path) -> tuple[TaggingConfig, ImportanceConfig]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    return parse_config(doc)


def select_images(data_path, images_spec, seed: int) -> list[int]:
    """Resolve an --images value.

    None selects every record; "3,17,40" (comma form, trailing comma allowed
    for a single id) selects explicit record ids; a bare integer N samples N
    records without replacement, driven solely by the seed.
    """
    n = record_count(data_path)
    if images_spec is None:
        return list(range(n))
    spec = str(images_spec)
    if "," in spec:
        ids = sorted({int(s) for s in spec.split(",") if s.strip() != ""})
        if not ids:
            raise ValueError("empty image id list")
        return ids
    count = int(spec)
    if count < 1:
        raise ValueError(f"image count must be >= 1, got {count}")
    if count >= n:
        return list(range(n))
    rng = np.random.default_rng(seed)
    return sorted(int(i) for i in rng.choice(n, size=count, replace=False))


def _tagging_hash(tagging: TaggingConfig) -> str:
    return hashlib.sha256(
        canonical_json(tagging.to_dict()).encode("utf-8")).hexdigest()


@dataclass
class RunManifest:
    payload: dict

    def save(self, path) -> None:
        write_json(path, self.payload)

    @classmethod
    def load(cls, path) -> "RunManifest":
        return cls(json.loads(Path(path).read_text(encoding="utf-8")))

    def __getitem__(self, key):
        return self.payload[key]


def _spectrum_rows(amps: np.ndarray, delta_f: float, comp_info: dict,
                   filter_id=None):
    rows = []
    for b in range(amps.size):
        comp = comp_info.get(b)
        cells = [
            fmt_float(b * delta_f),
            fmt_float(amps[b]),
            "1" if comp else "0",
            comp["kind"] if comp else "",
            str(comp["order"]) if comp else "",
            comp["snr"] if comp else "",
            comp["sns"] if comp else "",
        ]
        if filter_id is not None:
            cells = [str(filter_id[0]), str(filter_id[1])] + cells
        rows.append(cells)
    return rows


def _analyze_image(model: Model, image, tagging: TaggingConfig,
                   icfg: ImportanceConfig, components, reduction: str,
                   image_id: int):
    mask = default_half_mask(image.shape[1], image.shape[0])
    seq = tag_image_sequence(image, mask, tagging)
    traces = collect_traces(model, seq, mode=reduction)
    matrix = np.stack([t.values for t in traces])
    amps = amplitude_spectra(matrix, tagging.fps)
    delta_f = tagging.fps / matrix.shape[1]
    spectra = {
        t.filter_id: Spectrum(amplitudes=amps[i], delta_f=delta_f,
                              sample_rate=tagging.fps)
        for i, t in enumerate(traces)
    }
    table = component_snr_table(spectra, components, icfg, image_id=image_id)
    return {
        "image_id": image_id,
        "traces": matrix,
        "filters": [t.filter_id for t in traces],
        "nodes": [t.node_id for t in traces],
        "amps": amps,
        "delta_f": delta_f,
        "table": table,
    }


def run_analyze(config, graph_path, weights_path, data_path, out_dir,
                images=None, reduction: str = "mean_excluding_zeros",
                threads: int = 1, seed: int = 0,
                split_spectra: bool = False) -> RunManifest:
    """Full analysis; writes spectra/SNR CSVs, the report, histogram, manifest."""
    if reduction not in REDUCTIONS:
        raise ValueError(f"unknown reduction {reduction!r}; choose from {REDUCTIONS}")
    if isinstance(config, (str, Path)):
        tagging, icfg = load_config(config)
    else:
        tagging, icfg = parse_config(config or {})
    doc = load_graph(graph_path)
    store = TensorStore.load(weights_path)
    model = load_model(doc, store)

    image_ids = select_images(data_path, images, seed)
    if not image_ids:
        raise ValueError("no images selected")
    records = load_cifar10(data_path, image_ids)

    delta_f = tagging.delta_f
    nyquist = tagging.fps / 2.0
    components = icfg.components_for(delta_f, nyquist)

    out = Path(out_dir)
    (out / "spectra").mkdir(parents=True, exist_ok=True)
    (out / "snr").mkdir(exist_ok=True)
    cache_dir = out / "cache" / "traces"
    cache_dir.mkdir(parents=True, exist_ok=True)

    def job(arg):
        image_id, (image, _) = arg
        return _analyze_image(model, image, tagging, icfg, components,
                              reduction, image_id)

    jobs = list(zip(image_ids, records))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(job, jobs))
    else:
        results = [job(j) for j in jobs]
    results.sort(key=lambda r: r["image_id"])

    # precompute SNR/SNS strings for component bins, per image
    artifacts = {"spectra": [], "snr_tables": [], "traces": []}
    comp_list = list(components)
    for res in results:
        image_id = res["image_id"]
        table = res["table"]
        comp_info_per_filter = []
        for i, fid in enumerate(res["filters"]):
            info = {}
            for k, comp in enumerate(comp_list):
                info[comp.bin] = {
                    "kind": comp.kind,
                    "order": comp.order,
                    "snr": fmt_float(table.snr[i, k]) if table.valid[i, k] else "",
                    "sns": fmt_float(table.sns[i, k]) if table.valid[i, k] else "",
                }
            comp_info_per_filter.append(info)

        if split_spectra:
            img_dir = out / "spectra" / f"image_{image_id:05d}"
            img_dir.mkdir(parents=True, exist_ok=True)
            for i, fid in enumerate(res["filters"]):
                rows = _spectrum_rows(res["amps"][i], res["delta_f"],
                                      comp_info_per_filter[i])
                rel = (f"spectra/image_{image_id:05d}/"
                       f"filter_{fid[0]:02d}_{fid[1]:03d}.csv")
                write_csv(out / rel, SPECTRUM_COLUMNS, rows)
                artifacts["spectra"].append(rel)
        else:
            rows = []
            for i, fid in enumerate(res["filters"]):
                rows.extend(_spectrum_rows(res["amps"][i], res["delta_f"],
                                           comp_info_per_filter[i], filter_id=fid))
            rel = f"spectra/image_{image_id:05d}.csv"
            write_csv(out / rel, ("layer", "channel") + SPECTRUM_COLUMNS, rows)
            artifacts["spectra"].append(rel)

        snr_rows = []
        for i, fid in enumerate(res["filters"]):
            for k, comp in enumerate(comp_list):
                snr_rows.append([
                    str(fid[0]), str(fid[1]), fmt_float(comp.frequency),
                    comp.kind, str(comp.order),
                    fmt_float(table.snr[i, k]) if table.valid[i, k] else "",
                    fmt_float(table.sns[i, k]) if table.valid[i, k] else "",
                    "1" if table.valid[i, k] else "0",
                ])
        rel = f"snr/image_{image_id:05d}.csv"
        write_csv(out / rel, ("layer", "channel", "frequency_hz", "kind",
                              "order", "snr", "sns", "valid"), snr_rows)
        artifacts["snr_tables"].append(rel)

        rel = f"cache/traces/image_{image_id:05d}.npy"
        np.save(out / rel, res["traces"])
        artifacts["traces"].append(rel)

    cache_meta = {
        "model_fingerprint": model.fingerprint,
        "tagging_hash": _tagging_hash(tagging),
        "reduction": reduction,
        "sample_rate": tagging.fps,
        "filters": [list(f) for f in results[0]["filters"]],
        "nodes": results[0]["nodes"],
        "image_ids": image_ids,
    }
    write_json(cache_dir / "meta.json", cache_meta)

    report = assess([r["table"] for r in results], icfg, image_ids=image_ids,
                    model_fingerprint=model.fingerprint,
                    tagging=tagging.to_dict())
    write_json(out / "importance_report.json", report.to_json_dict())
    _write_layer_csv(out / "layer_histogram.csv", report)

    manifest = RunManifest({
        "tool": "freqtag",
        "version": __version__,
        "command": "analyze",
        "config": {"tagging": tagging.to_dict(), "importance": icfg.to_dict()},
        "model_fingerprint": model.fingerprint,
        "graph_path": str(graph_path),
        "weights_path": str(weights_path),
        "data_path": str(data_path),
        "image_ids": image_ids,
        "reduction": reduction,
        "seed": seed,
        "artifacts": {
            "report": "importance_report.json",
            "layer_histogram": "layer_histogram.csv",
            "cache_meta": "cache/traces/meta.json",
            **artifacts,
        },
    })
    manifest.save(out / "manifest.json")
    return manifest


def _write_layer_csv(path, report: ImportanceReport) -> None:
    rows = [[str(layer), str(n), str(k)] for layer, n, k in report.layer_counts()]
    write_csv(path, ("layer_index", "n_filters", "n_important"), rows)


def run_report(from_dir, out_dir, snr_threshold=None, vote_fraction=None,
               statistic=None, max_order=None) -> RunManifest:
    """Re-score cached traces with (possibly) new importance settings."""
    from_dir = Path(from_dir)
    manifest = RunManifest.load(from_dir / "manifest.json")
    tagging = TaggingConfig.from_dict(manifest["config"]["tagging"])
    imp_kwargs = dict(manifest["config"]["importance"])
    if snr_threshold is not None:
        imp_kwargs["snr_threshold"] = snr_threshold
    if vote_fraction is not None:
        imp_kwargs["vote_fraction"] = vote_fraction
    if statistic is not None:
        imp_kwargs["statistic"] = statistic
    if max_order is not None:
        imp_kwargs["max_order"] = max_order
    icfg = ImportanceConfig.from_dict(imp_kwargs)

    meta = json.loads((from_dir / "cache" / "traces" / "meta.json")
                      .read_text(encoding="utf-8"))
    filters = [tuple(f) for f in meta["filters"]]
    sample_rate = meta["sample_rate"]
    components = icfg.components_for(tagging.delta_f, sample_rate / 2.0)

    tables = []
    for image_id, rel in zip(manifest["image_ids"], manifest["artifacts"]["traces"]):
        matrix = np.load(from_dir / rel)
        amps = amplitude_spectra(matrix, sample_rate)
        delta_f = sample_rate / matrix.shape[1]
        spectra = {
            fid: Spectrum(amplitudes=amps[i], delta_f=delta_f,
                          sample_rate=sample_rate)
            for i, fid in enumerate(filters)
        }
        tables.append(component_snr_table(spectra, components, icfg,
                                          image_id=image_id))

    report = assess(tables, icfg, image_ids=manifest["image_ids"],
                    model_fingerprint=meta["model_fingerprint"],
                    tagging=tagging.to_dict())
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "importance_report.json", report.to_json_dict())
    _write_layer_csv(out / "layer_histogram.csv", report)
    new_manifest = RunManifest({
        "tool": "freqtag",
        "version": __version__,
        "command": "report",
        "config": {"tagging": tagging.to_dict(), "importance": icfg.to_dict()},
        "model_fingerprint": meta["model_fingerprint"],
        "source_run": str(from_dir),
        "image_ids": manifest["image_ids"],
        "artifacts": {
            "report": "importance_report.json",
            "layer_histogram": "layer_histogram.csv",
        },
    })
    new_manifest.save(out / "manifest.json")
    return new_manifest


def run_prune(report_path, graph_path, weights_path, data_path, out_dir,
              images=None, seed: int = 0) -> RunManifest:
    """Mask unimportant filters and measure the accuracy delta."""
    report = ImportanceReport.from_json_dict(
        json.loads(Path(report_path).read_text(encoding="utf-8")))
    doc = load_graph(graph_path)
    store = TensorStore.load(weights_path)
    model = load_model(doc, store)
    if report.model_fingerprint != model.fingerprint:
        raise ValueError(
            f"report was produced for model {report.model_fingerprint[:16]}..., "
            f"refusing to prune model {model.fingerprint[:16]}...")

    mask = FilterMask.from_report(report)
    masked = apply_mask(model, mask)

    image_ids = select_images(data_path, images, seed)
    dataset = load_cifar10(data_path, image_ids)
    before = evaluate(model, dataset)
    after = evaluate(masked, dataset)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    mask.save(out / "mask.json")
    summary = {
        "n_filters": len(mask.filters),
        "n_zeroed": len(mask.zeroed),
        "kept_by_guard": [list(f) for f in mask.guard_kept],
        "guard_engaged": bool(mask.guard_kept),
        "images": len(dataset),
        "original_accuracy": before.accuracy,
        "masked_accuracy": after.accuracy,
        "original_per_class_correct": list(before.per_class_correct),
        "masked_per_class_correct": list(after.per_class_correct),
        "per_class_total": list(before.per_class_total),
        "masked_model_fingerprint": masked.fingerprint,
    }
    write_json(out / "prune_summary.json", summary)
    manifest = RunManifest({
        "tool": "freqtag",
        "version": __version__,
        "command": "prune",
        "report_path": str(report_path),
        "graph_path": str(graph_path),
        "weights_path": str(weights_path),
        "data_path": str(data_path),
        "model_fingerprint": model.fingerprint,
        "image_ids": image_ids,
        "seed": seed,
        "artifacts": {
            "mask": "mask.json",
            "summary": "prune_summary.json",
        },
    })
    manifest.save(out / "manifest.json")
    return manifest
