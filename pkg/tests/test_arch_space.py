"""Search-space tests: enumeration, encoding, sampling, costs, scaling."""

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from joulenas import arch_space as A


def test_block_choice_enumeration_order():
    choices = A.enumerate_block_choices()
    assert len(choices) == 18
    assert choices[0] == A.BlockChoice(0.25, 1, A.Attention.LITE)
    assert choices[-1] == A.BlockChoice(1.0, 5, A.Attention.FULL)
    # stable across calls
    assert choices == A.enumerate_block_choices()
    # lexicographic on (ratio, kernel, attention)
    keys = [(b.ratio, b.kernel, b.attention.value != "lite") for b in choices]
    assert keys == sorted(keys)


def test_block_choice_rejects_out_of_domain_values():
    with pytest.raises(ValueError):
        A.BlockChoice(0.3, 1, A.Attention.LITE)
    with pytest.raises(ValueError):
        A.BlockChoice(0.25, 2, A.Attention.LITE)
    with pytest.raises(ValueError):
        A.BlockChoice(0.25, 1, "lite")


def test_stage_sizes():
    assert A.stage_space_size(A.StageKind.BACKBONE) == 324
    assert A.stage_space_size(A.StageKind.FPN) == 104976
    assert A.stage_space_size(A.StageKind.PAN) == 104976
    assert A.search_space_size() == 324 * 104976 * 104976


def test_stage_block_count_enforced():
    three = (A.BLOCK_CHOICES[0],) * 3
    with pytest.raises(ValueError):
        A.StageArchitecture(A.StageKind.BACKBONE, three)
    with pytest.raises(ValueError):
        A.StageArchitecture(A.StageKind.FPN, three)


def test_detector_architecture_stage_kinds_must_match():
    fpn_stage = A.StageArchitecture(A.StageKind.FPN, (A.BLOCK_CHOICES[0],) * 4)
    pan_stage = A.StageArchitecture(A.StageKind.PAN, (A.BLOCK_CHOICES[0],) * 4)
    back = A.StageArchitecture(A.StageKind.BACKBONE, (A.BLOCK_CHOICES[0],) * 2)
    with pytest.raises(ValueError):
        A.DetectorArchitecture(backbone=back, fpn=pan_stage, pan=fpn_stage)


def test_backbone_exhaustive_enumeration_is_324_unique():
    stages = list(A.enumerate_stage(A.StageKind.BACKBONE))
    assert len(stages) == 324
    assert len(set(stages)) == 324


def test_encoding_shape_and_sparsity():
    for a in A.sample_uniform(3, 25):
        enc = A.encode_architecture(a)
        assert enc.shape == (80,)
        assert int((enc == 1.0).sum()) == 30
        assert int((enc == 0.0).sum()) == 50


def test_encoding_roundtrip_1000_sampled():
    for a in A.sample_uniform(123, 1000):
        assert A.decode_architecture(A.encode_architecture(a)) == a


def test_encoding_injective_on_sample():
    archs = A.sample_uniform(9, 300)
    encs = {A.encode_architecture(a).tobytes() for a in archs}
    assert len(encs) == len(set(archs))


def test_decode_rejects_non_onehot():
    enc = A.encode_architecture(A.DEFAULT_INIT_ARCHITECTURE)
    bad = enc.copy()
    bad[0] = 0.5
    with pytest.raises(ValueError):
        A.decode_architecture(bad)
    with pytest.raises(ValueError):
        A.decode_architecture(enc[:40])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(0, 17), min_size=10, max_size=10))
def test_encoding_roundtrip_property(idx):
    a = A.architecture_from_indices(idx)
    assert A.decode_architecture(A.encode_architecture(a)) == a


def test_sample_uniform_deterministic_and_valid():
    xs = A.sample_uniform(7, 50)
    ys = A.sample_uniform(7, 50)
    assert xs == ys
    assert A.sample_uniform(7, 1)[0].blocks is not None
    with pytest.raises(ValueError):
        A.sample_uniform(7, 0)


def test_sample_uniform_per_slot_frequencies():
    archs = A.sample_uniform(7, 1000)
    idx = np.array([A.architecture_indices(a) for a in archs])
    for slot in range(10):
        freqs = np.bincount(idx[:, slot], minlength=18) / 1000.0
        assert np.all(np.abs(freqs - 1.0 / 18.0) <= 0.05)


def test_block_cost_monotonicities_exhaustive():
    for r in A.RATIOS:
        for t in A.ATTENTIONS:
            for c in (1, 64, 128):
                assert (
                    A.analytic_block_cost(A.BlockChoice(r, 5, t), c)
                    > A.analytic_block_cost(A.BlockChoice(r, 3, t), c)
                    > A.analytic_block_cost(A.BlockChoice(r, 1, t), c)
                )
    for k in A.KERNELS:
        for t in A.ATTENTIONS:
            for c in (1, 64, 128):
                assert (
                    A.analytic_block_cost(A.BlockChoice(0.25, k, t), c)
                    > A.analytic_block_cost(A.BlockChoice(0.5, k, t), c)
                    > A.analytic_block_cost(A.BlockChoice(1.0, k, t), c)
                )
    for r in A.RATIOS:
        for k in A.KERNELS:
            for c in (1, 64, 128):
                assert A.analytic_block_cost(
                    A.BlockChoice(r, k, A.Attention.FULL), c
                ) > A.analytic_block_cost(A.BlockChoice(r, k, A.Attention.LITE), c)


def test_block_cost_rejects_nonpositive_channels():
    with pytest.raises(ValueError):
        A.analytic_block_cost(A.BLOCK_CHOICES[0], 0)


def test_cost_separability_total_equals_sum_of_blocks():
    channels = A.flat_reference_channels()
    for a in A.sample_uniform(11, 20):
        total = A.architecture_cost(a)
        per_block = sum(A.analytic_block_cost(b, channels[p]) for p, b in enumerate(a.blocks))
        assert total == pytest.approx(per_block, rel=1e-12)


def test_min_cost_architecture_is_per_slot_argmin():
    # Separability: the global argmin is the per-slot argmin, computed
    # independently here by scanning all 18 choices at every slot.
    channels = A.flat_reference_channels()
    for p in range(A.NUM_BLOCKS):
        costs = [A.analytic_block_cost(b, channels[p]) for b in A.BLOCK_CHOICES]
        best = A.BLOCK_CHOICES[int(np.argmin(costs))]
        assert best == A.BlockChoice(1.0, 1, A.Attention.LITE)
        worst = A.BLOCK_CHOICES[int(np.argmax(costs))]
        assert worst == A.BlockChoice(0.25, 5, A.Attention.FULL)
    lo, hi = A.cost_bounds()
    assert A.architecture_cost(A.MIN_COST_ARCHITECTURE) == pytest.approx(lo)
    assert A.architecture_cost(A.MAX_COST_ARCHITECTURE) == pytest.approx(hi)


def test_normalized_costs_batch_matches_scalar_path():
    archs = A.sample_uniform(5, 40)
    idx = np.array([A.architecture_indices(a) for a in archs])
    batch = A.normalized_costs_batch(idx)
    single = np.array([A.normalized_cost(a) for a in archs])
    assert np.allclose(batch, single, rtol=1e-12)
    assert np.all(batch >= 0.0) and np.all(batch <= 1.0)


def test_scaling_identity():
    base = A.sample_uniform(2, 1)[0]
    sd = A.scale_architecture(base, A.ScalingFactor(A.ScaleLabel.NANO, 1.0, 1.0))
    assert sd.derived_channels == A.flat_reference_channels()
    assert sd.derived_repeats == A.flat_reference_repeats()
    assert sd.base == base


def test_scaling_monotone_nano_small_medium():
    for a in A.sample_uniform(21, 5):
        costs = [
            A.scaled_cost(A.scale_architecture(a, A.DEFAULT_SCALING_FACTORS[lab]))
            for lab in (A.ScaleLabel.NANO, A.ScaleLabel.SMALL, A.ScaleLabel.MEDIUM)
        ]
        assert costs[0] < costs[1] < costs[2]


def test_scaling_width_increases_cost():
    a = A.sample_uniform(4, 1)[0]
    c1 = A.scaled_cost(A.scale_architecture(a, A.ScalingFactor(A.ScaleLabel.NANO, 1.0, 1.0)))
    c2 = A.scaled_cost(A.scale_architecture(a, A.ScalingFactor(A.ScaleLabel.NANO, 2.0, 1.0)))
    assert c2 > c1


def test_scaling_derived_fields_valid_and_deterministic():
    a = A.sample_uniform(6, 1)[0]
    f = A.DEFAULT_SCALING_FACTORS[A.ScaleLabel.MEDIUM]
    sd1 = A.scale_architecture(a, f)
    sd2 = A.scale_architecture(a, f)
    assert sd1 == sd2
    assert all(c % A.CHANNEL_GRANULARITY == 0 and c > 0 for c in sd1.derived_channels)
    assert all(r >= 1 for r in sd1.derived_repeats)


def test_default_factors_ordered_componentwise():
    n = A.DEFAULT_SCALING_FACTORS[A.ScaleLabel.NANO]
    s = A.DEFAULT_SCALING_FACTORS[A.ScaleLabel.SMALL]
    m = A.DEFAULT_SCALING_FACTORS[A.ScaleLabel.MEDIUM]
    assert n.width_mult <= s.width_mult <= m.width_mult
    assert n.depth_mult <= s.depth_mult <= m.depth_mult


def test_scaling_factor_requires_positive_multipliers():
    with pytest.raises(ValueError):
        A.ScalingFactor(A.ScaleLabel.NANO, 0.0, 1.0)
    with pytest.raises(ValueError):
        A.ScalingFactor(A.ScaleLabel.NANO, 1.0, -0.5)


def test_architecture_json_roundtrip(tmp_path):
    for a in A.sample_uniform(33, 10):
        d = A.architecture_to_json_dict(a)
        assert A.architecture_from_json_dict(d) == a
        # JSON numbers for the ratios are exact decimals
        text = json.dumps(d)
        assert A.architecture_from_json_dict(json.loads(text)) == a
    path = tmp_path / "arch.json"
    A.save_architecture(a, path)
    assert A.load_architecture(path) == a


def test_architecture_json_accepts_string_ratios():
    a = A.DEFAULT_INIT_ARCHITECTURE
    d = A.architecture_to_json_dict(a)
    d["backbone"][0][0] = "0.5"
    assert A.architecture_from_json_dict(d) == a


def test_scaled_json_roundtrip(tmp_path):
    base = A.sample_uniform(8, 1)[0]
    sd = A.scale_architecture(base, A.DEFAULT_SCALING_FACTORS[A.ScaleLabel.SMALL])
    path = tmp_path / "scaled.json"
    A.save_architecture(sd, path)
    loaded = A.load_architecture(path)
    assert isinstance(loaded, A.ScaledDetector)
    assert loaded == sd
    d = json.loads(path.read_text())
    assert set(d) == {"backbone", "fpn", "pan", "factor"}
