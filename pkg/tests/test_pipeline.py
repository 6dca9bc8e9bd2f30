import json
from pathlib import Path

import numpy as np
import pytest

from freqtag.cli import main
from freqtag.fixtures import synthetic_cifar_batch, two_filter_model
from freqtag.graph import save_graph
from freqtag.pipeline import (default_config, parse_config, run_analyze,
                              run_prune, run_report, select_images)


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    """Graph, weights and a 3-image batch shared by the module's tests."""
    root = tmp_path_factory.mktemp("fixture")
    doc, store = two_filter_model()
    save_graph(root / "graph.json", doc)
    store.save(root / "weights.fts")
    synthetic_cifar_batch(root / "batch.bin", count=3, seed=5)
    return root


def tree_bytes(root):
    """path -> bytes for every file under root, with relative keys."""
    root = Path(root)
    return {str(p.relative_to(root)): p.read_bytes()
            for p in sorted(root.rglob("*")) if p.is_file()}


class TestConfig:
    def test_defaults_parse(self):
        tagging, icfg = parse_config(default_config())
        assert tagging.frame_count == 240
        assert (icfg.f1, icfg.f2) == (6.0, 7.5)

    def test_incoherent_frequency_fails(self):
        doc = default_config()
        doc["tagging"]["region_freqs"] = [[1, 6.3], [2, 7.5]]
        with pytest.raises(ValueError, match="coherent"):
            parse_config(doc)

    def test_importance_frequencies_follow_regions(self):
        doc = default_config()
        doc["tagging"]["region_freqs"] = [[1, 4.0], [2, 5.5]]
        _, icfg = parse_config(doc)
        assert (icfg.f1, icfg.f2) == (4.0, 5.5)


class TestSelectImages:
    def test_explicit_ids(self, workdir):
        assert select_images(workdir / "batch.bin", "2,0", seed=0) == [0, 2]

    def test_count_with_seed(self, workdir):
        a = select_images(workdir / "batch.bin", "2", seed=42)
        b = select_images(workdir / "batch.bin", "2", seed=42)
        assert a == b and len(a) == 2

    def test_all_by_default(self, workdir):
        assert select_images(workdir / "batch.bin", None, seed=0) == [0, 1, 2]

    def test_count_capped_at_total(self, workdir):
        assert select_images(workdir / "batch.bin", "99", seed=0) == [0, 1, 2]


class TestAnalyze:
    def test_smoke_outputs(self, workdir, tmp_path):
        out = tmp_path / "run"
        manifest = run_analyze(None, workdir / "graph.json",
                               workdir / "weights.fts", workdir / "batch.bin",
                               out, images="0,1")
        assert (out / "manifest.json").is_file()
        assert (out / "importance_report.json").is_file()
        assert (out / "layer_histogram.csv").is_file()
        spectra = list((out / "spectra").glob("*.csv"))
        assert len(spectra) == 2
        header = spectra[0].read_text().splitlines()[0]
        assert header == ("layer,channel,frequency_hz,amplitude,is_component,"
                          "component_kind,component_order,snr,sns")
        assert manifest["image_ids"] == [0, 1]
        # the manifest references every output file exactly once, and
        # everything it references exists
        arts = manifest["artifacts"]
        referenced = []
        for value in arts.values():
            referenced.extend(value if isinstance(value, list) else [value])
        assert len(referenced) == len(set(referenced))
        for rel in referenced:
            assert (out / rel).is_file()
        on_disk = {str(p.relative_to(out)) for p in out.rglob("*") if p.is_file()}
        assert on_disk == set(referenced) | {"manifest.json"}

    def test_rerun_byte_identical(self, workdir, tmp_path):
        kwargs = dict(images="0,2", seed=3)
        run_analyze(None, workdir / "graph.json", workdir / "weights.fts",
                    workdir / "batch.bin", tmp_path / "a", **kwargs)
        run_analyze(None, workdir / "graph.json", workdir / "weights.fts",
                    workdir / "batch.bin", tmp_path / "b", **kwargs)
        assert tree_bytes(tmp_path / "a") == tree_bytes(tmp_path / "b")

    def test_workers_do_not_change_bytes(self, workdir, tmp_path):
        run_analyze(None, workdir / "graph.json", workdir / "weights.fts",
                    workdir / "batch.bin", tmp_path / "w1", threads=1)
        run_analyze(None, workdir / "graph.json", workdir / "weights.fts",
                    workdir / "batch.bin", tmp_path / "w4", threads=4)
        assert tree_bytes(tmp_path / "w1") == tree_bytes(tmp_path / "w4")

    def test_split_spectra_mode(self, workdir, tmp_path):
        out = tmp_path / "split"
        run_analyze(None, workdir / "graph.json", workdir / "weights.fts",
                    workdir / "batch.bin", out, images="0,", split_spectra=True)
        files = sorted((out / "spectra" / "image_00000").glob("*.csv"))
        assert [f.name for f in files] == ["filter_01_000.csv", "filter_01_001.csv"]
        header = files[0].read_text().splitlines()[0]
        assert header == ("frequency_hz,amplitude,is_component,component_kind,"
                          "component_order,snr,sns")

    def test_incoherent_config_rejected(self, workdir, tmp_path):
        cfg = default_config()
        cfg["tagging"]["region_freqs"] = [[1, 6.3], [2, 7.5]]
        with pytest.raises(ValueError, match="coherent"):
            run_analyze(cfg, workdir / "graph.json", workdir / "weights.fts",
                        workdir / "batch.bin", tmp_path / "x")


class TestReport:
    def test_recompute_from_cache_matches(self, workdir, tmp_path):
        out = tmp_path / "first"
        run_analyze(None, workdir / "graph.json", workdir / "weights.fts",
                    workdir / "batch.bin", out)
        rerun = tmp_path / "second"
        run_report(out, rerun)
        original = (out / "importance_report.json").read_bytes()
        recomputed = (rerun / "importance_report.json").read_bytes()
        assert original == recomputed

    def test_override_threshold_changes_flags(self, workdir, tmp_path):
        out = tmp_path / "first"
        run_analyze(None, workdir / "graph.json", workdir / "weights.fts",
                    workdir / "batch.bin", out)
        low = tmp_path / "low"
        run_report(out, low, snr_threshold=1e-9)
        doc = json.loads((low / "importance_report.json").read_text())
        assert all(f["important"] for f in doc["filters"])


class TestPrune:
    def _analyze(self, workdir, tmp_path, **overrides):
        out = tmp_path / "analysis"
        cfg = default_config()
        cfg["importance"].update(overrides)
        run_analyze(cfg, workdir / "graph.json", workdir / "weights.fts",
                    workdir / "batch.bin", out)
        return out

    def test_all_important_keeps_accuracy(self, workdir, tmp_path):
        out = self._analyze(workdir, tmp_path, snr_threshold=1e-9)
        prune_out = tmp_path / "prune"
        run_prune(out / "importance_report.json", workdir / "graph.json",
                  workdir / "weights.fts", workdir / "batch.bin", prune_out)
        summary = json.loads((prune_out / "prune_summary.json").read_text())
        assert summary["n_zeroed"] == 0
        assert summary["masked_accuracy"] == summary["original_accuracy"]

    def test_guard_noted_when_layer_empty(self, workdir, tmp_path):
        out = self._analyze(workdir, tmp_path, snr_threshold=1e12)
        prune_out = tmp_path / "prune_guard"
        run_prune(out / "importance_report.json", workdir / "graph.json",
                  workdir / "weights.fts", workdir / "batch.bin", prune_out)
        summary = json.loads((prune_out / "prune_summary.json").read_text())
        assert summary["guard_engaged"]
        assert summary["kept_by_guard"]
        mask = json.loads((prune_out / "mask.json").read_text())
        assert mask["kept_by_guard"] == summary["kept_by_guard"]

    def test_fingerprint_mismatch_refused(self, workdir, tmp_path):
        out = self._analyze(workdir, tmp_path)
        report_path = out / "importance_report.json"
        doc = json.loads(report_path.read_text())
        doc["model_fingerprint"] = "0" * 64
        tampered = tmp_path / "tampered.json"
        tampered.write_text(json.dumps(doc))
        with pytest.raises(ValueError, match="refusing"):
            run_prune(tampered, workdir / "graph.json", workdir / "weights.fts",
                      workdir / "batch.bin", tmp_path / "nope")


class TestCli:
    def test_analyze_and_inspect(self, workdir, tmp_path, capsys):
        rc = main(["analyze", "--model-graph", str(workdir / "graph.json"),
                   "--weights", str(workdir / "weights.fts"),
                   "--data", str(workdir / "batch.bin"),
                   "--out", str(tmp_path / "cli_run"), "--images", "0,1"])
        assert rc == 0
        assert "analyzed 2 images" in capsys.readouterr().out
        rc = main(["inspect-model", "--model-graph", str(workdir / "graph.json"),
                   "--weights", str(workdir / "weights.fts")])
        out = capsys.readouterr().out
        assert rc == 0
        assert "fingerprint:" in out and "taps: 1" in out

    def test_error_is_single_json_line_on_stderr(self, workdir, tmp_path, capsys):
        cfg_path = tmp_path / "bad.json"
        cfg = default_config()
        cfg["tagging"]["region_freqs"] = [[1, 6.3], [2, 7.5]]
        cfg_path.write_text(json.dumps(cfg))
        rc = main(["analyze", "--config", str(cfg_path),
                   "--model-graph", str(workdir / "graph.json"),
                   "--weights", str(workdir / "weights.fts"),
                   "--data", str(workdir / "batch.bin"),
                   "--out", str(tmp_path / "bad_run")])
        captured = capsys.readouterr()
        assert rc == 1
        lines = captured.err.strip().splitlines()
        assert len(lines) == 1
        parsed = json.loads(lines[0])
        assert parsed["error"] == "ValueError"
        assert "coherent" in parsed["message"]

    def test_report_and_prune_commands(self, workdir, tmp_path, capsys):
        run_dir = tmp_path / "r"
        main(["analyze", "--model-graph", str(workdir / "graph.json"),
              "--weights", str(workdir / "weights.fts"),
              "--data", str(workdir / "batch.bin"), "--out", str(run_dir)])
        rc = main(["report", "--from", str(run_dir),
                   "--out", str(tmp_path / "r2"),
                   "--snr-threshold", "1e-9"])
        assert rc == 0
        rc = main(["prune", "--report", str(tmp_path / "r2" / "importance_report.json"),
                   "--model-graph", str(workdir / "graph.json"),
                   "--weights", str(workdir / "weights.fts"),
                   "--data", str(workdir / "batch.bin"),
                   "--out", str(tmp_path / "p")])
        assert rc == 0
        assert (tmp_path / "p" / "prune_summary.json").is_file()
