import numpy as np
import pytest

from freqtag import (FilterMask, ImportanceConfig, apply_mask, assess, evaluate,
                     forward_with_taps, load_model)
from freqtag.fixtures import conv_stack_model, resnet32_random

from test_importance import table_with_stats


@pytest.fixture(scope="module")
def stack():
    doc, store = conv_stack_model(channels=(4, 3))
    return load_model(doc, store)


def all_keep_mask(model):
    return FilterMask(filters=tuple(model.filter_inventory()), zeroed=frozenset())


def report_for(model, important):
    filters = model.filter_inventory()
    tables = [table_with_stats(filters,
                               {fid: (1e4 if fid in important else 0.0)
                                for fid in filters})]
    return assess(tables, ImportanceConfig(vote_fraction=1.0),
                  model_fingerprint=model.fingerprint)


class TestApplyMask:
    def test_all_keep_is_identity(self, stack, rng):
        masked = apply_mask(stack, all_keep_mask(stack))
        for _ in range(3):
            frame = rng.uniform(0, 1, size=(32, 32, 3))
            a, _ = forward_with_taps(stack, frame)
            b, _ = forward_with_taps(masked, frame)
            assert np.array_equal(a, b)

    def test_zeroed_channel_tap_is_exactly_zero(self, stack, rng):
        # non-residual stack: the tap IS the filter's own relu(bn(conv)) chain
        mask = FilterMask(filters=tuple(stack.filter_inventory()),
                          zeroed=frozenset({(1, 2), (2, 0)}))
        masked = apply_mask(stack, mask)
        for _ in range(3):
            frame = rng.uniform(0, 1, size=(32, 32, 3))
            _, taps = forward_with_taps(masked, frame)
            assert not taps["relu1"][2].any()
            assert not taps["relu2"][0].any()
            assert taps["relu1"][0].any()  # unmasked channels still fire

    def test_upstream_of_first_mask_bit_identical(self, stack, rng):
        mask = FilterMask(filters=tuple(stack.filter_inventory()),
                          zeroed=frozenset({(2, 1)}))
        masked = apply_mask(stack, mask)
        frame = rng.uniform(0, 1, size=(32, 32, 3))
        _, taps_orig = forward_with_taps(stack, frame)
        _, taps_masked = forward_with_taps(masked, frame)
        assert np.array_equal(taps_orig["relu1"], taps_masked["relu1"])

    def test_residual_mask_zeroes_branch_not_tap(self, rng):
        # on a residual fixture the masked conv/bn branch dies but the tap
        # still carries the shortcut
        doc, store = resnet32_random(seed=3)
        doc = dict(doc)
        model = load_model(doc, store)
        inventory = tuple(model.filter_inventory())
        target = (3, 5)  # second conv of the first block: tap is post-add
        masked = apply_mask(model, FilterMask(filters=inventory,
                                              zeroed=frozenset({target})))
        conv_id, bn_id = masked.mask_targets[3]
        assert not masked.store[masked.info.nodes[conv_id]["weight"]][5].any()
        assert masked.store[masked.info.nodes[bn_id]["gamma"]][5] == 0.0
        frame = rng.uniform(0, 1, size=(32, 32, 3))
        _, taps = forward_with_taps(masked, frame)
        assert taps["relu3"][5].any()  # shortcut survives, per the add semantics

    def test_idempotent(self, stack, rng):
        mask = FilterMask(filters=tuple(stack.filter_inventory()),
                          zeroed=frozenset({(1, 0), (2, 2)}))
        once = apply_mask(stack, mask)
        twice = apply_mask(once, mask)
        assert once.fingerprint == twice.fingerprint

    def test_inventory_mismatch_rejected(self, stack):
        with pytest.raises(ValueError, match="inventory"):
            apply_mask(stack, FilterMask(filters=((1, 0), (1, 1)),
                                         zeroed=frozenset()))

    def test_zeroing_last_layer_leaves_fc_bias(self):
        # sequential fixture: killing every final-stage filter except none is
        # forbidden, so compare against a model whose last conv output is all
        # zero by masking all but asserting the guard blocks it first
        doc, store = conv_stack_model(channels=(4, 3))
        model = load_model(doc, store)
        inventory = tuple(model.filter_inventory())
        with pytest.raises(ValueError, match="every filter"):
            FilterMask(filters=inventory,
                       zeroed=frozenset(f for f in inventory if f[0] == 2))

    def test_fc_bias_pathway_when_last_stage_silent(self, rng):
        # drive the no-signal case directly: an input of zeros with identity
        # normalization gives an all-zero last feature map in this fixture
        # (bias and bn shift are zero), so logits equal the fc bias exactly
        doc, store = conv_stack_model(channels=(4, 3))
        model = load_model(doc, store)
        logits, taps = forward_with_taps(model, np.zeros((32, 32, 3)))
        assert not taps["relu2"].any()
        assert logits == pytest.approx(store["fc.bias"].astype(np.float64),
                                       abs=1e-12)

    def test_fc_bias_pathway_zeroing_whole_last_layer(self, rng):
        # zero every last-layer filter parameter directly (the FilterMask
        # keep-guard forbids this via the mask path) on the sequential
        # fixture: the last feature map dies, so logits ride the fc bias only
        from freqtag.tensorstore import TensorStore
        doc, store = conv_stack_model(channels=(4, 3))
        items = []
        for name, arr in store.items():
            if name.startswith(("conv2.", "bn2.gamma", "bn2.beta")):
                arr = np.zeros_like(arr)
            items.append((name, arr.copy()))
        silenced = load_model(doc, TensorStore(items))
        fc_bias = store["fc.bias"].astype(np.float64)
        for _ in range(5):
            frame = rng.uniform(0, 1, size=(32, 32, 3))
            logits, taps = forward_with_taps(silenced, frame)
            assert not taps["relu2"].any()
            assert logits == pytest.approx(fc_bias, abs=1e-12)


class TestMaskConstruction:
    def test_from_report_zeroes_unimportant(self, stack):
        report = report_for(stack, important={(1, 0), (1, 3), (2, 1)})
        mask = FilterMask.from_report(report)
        assert mask.zeroed == {(1, 1), (1, 2), (2, 0), (2, 2)}
        assert not mask.guard_kept

    def test_guard_keeps_best_votes(self, stack):
        filters = stack.filter_inventory()
        tables = [table_with_stats(filters, {fid: 0.0 for fid in filters})]
        # layer 2 channel 1 gets one high-SNR image of three -> most votes
        tables.append(table_with_stats(filters,
                                       {fid: (1e4 if fid == (2, 1) else 0.0)
                                        for fid in filters}))
        tables.append(table_with_stats(filters, {fid: 0.0 for fid in filters}))
        report = assess(tables, ImportanceConfig(vote_fraction=1.0),
                        model_fingerprint=stack.fingerprint)
        mask = FilterMask.from_report(report)
        assert (2, 1) in mask.guard_kept
        assert (1, 0) in mask.guard_kept  # vote tie in layer 1 -> lowest channel
        assert mask.keeps(2, 1) and mask.keeps(1, 0)

    def test_mask_file_roundtrip(self, stack, tmp_path):
        report = report_for(stack, important={(1, 0)})
        mask = FilterMask.from_report(report)
        path = tmp_path / "mask.json"
        mask.save(path)
        back = FilterMask.load(path)
        assert back.zeroed == mask.zeroed
        assert back.filters == mask.filters
        assert back.model_fingerprint == stack.fingerprint


class TestEvaluate:
    def test_single_correct_image(self, stack, rng):
        frame = rng.uniform(0, 1, size=(32, 32, 3))
        logits, _ = forward_with_taps(stack, frame)
        label = int(np.argmax(logits))
        result = evaluate(stack, [(frame, label)])
        assert result.accuracy == 1.0
        assert result.per_class_correct[label] == 1

    def test_constant_logits_tie_to_class_zero(self):
        doc, store = conv_stack_model(channels=(2,))
        # zero the fc weights/bias -> identical logits -> argmax = class 0
        from freqtag.tensorstore import TensorStore
        items = []
        for name, arr in store.items():
            if name.startswith("fc."):
                arr = np.zeros_like(arr)
            items.append((name, arr.copy()))
        model = load_model(doc, TensorStore(items))
        rng = np.random.default_rng(0)
        data = [(rng.uniform(0, 1, (32, 32, 3)), int(l))
                for l in rng.integers(0, 10, size=12)]
        result = evaluate(model, data)
        freq0 = sum(1 for _, l in data if l == 0) / len(data)
        assert result.accuracy == pytest.approx(freq0)

    def test_masked_identity_evaluates_identically(self, stack, rng):
        data = [(rng.uniform(0, 1, (32, 32, 3)), int(l))
                for l in rng.integers(0, 10, size=8)]
        masked = apply_mask(stack, all_keep_mask(stack))
        assert evaluate(masked, data).accuracy == evaluate(stack, data).accuracy

    def test_empty_dataset_rejected(self, stack):
        with pytest.raises(ValueError):
            evaluate(stack, [])
