"""Two-stage estimator tests: normalization, freeze, decomposition, few-shot."""

import numpy as np
import pytest

from joulenas import arch_space as A
from joulenas import data_io as D
from joulenas import energy_estimator as E
from joulenas import mlp_core as M
from joulenas.devices import DeviceRegistry

OFFSETS = {"cpu": 0.0, "gpu": 0.35, "npu": 0.8}
FAST_PRETRAIN = M.TrainConfig(learning_rate=0.05, epochs=60, batch_size=32, rng_seed=1)
FAST_ADAPT = M.TrainConfig(learning_rate=0.01, epochs=300, batch_size=1024, rng_seed=2)


def make_dataset(n_archs=120, noise_sd=0.01, seed=11, offsets=OFFSETS):
    cfg = D.SyntheticOracleConfig(
        D.OracleFamily.CONSTANT_OFFSET, offsets, noise_sd=noise_sd, rng_seed=seed
    )
    return D.generate_synthetic(cfg, A.sample_uniform(42, n_archs), list(offsets))


@pytest.fixture(scope="module")
def fitted_setup():
    """Pretrained base + residual fit with N_h=10 on the npu target."""
    ds = make_dataset()
    target = ds.registry.device("npu")
    split = D.split_fewshot(ds, target, 10, seed=5)
    stats = E.dataset_stats(ds)
    pre = E.pretrain_base(split.source_pool, FAST_PRETRAIN, hidden_size=64)
    fitted = E.fit_residual(pre, split.target_train, FAST_ADAPT, stats=stats["npu"])
    return ds, target, split, stats, pre, fitted


def test_normalize_endpoints_and_midpoint():
    dev = DeviceRegistry(["d"]).device("d")
    st = E.NormalizationStats(dev, 2.0, 6.0)
    assert E.normalize(2.0, st) == 0.0
    assert E.normalize(6.0, st) == 1.0
    assert E.normalize(4.0, st) == 0.5
    # out-of-range passes through, no clipping
    assert E.normalize(8.0, st) == 1.5
    assert st.denormalize(0.25) == 3.0


def test_stats_reject_degenerate_range():
    dev = DeviceRegistry(["d"]).device("d")
    with pytest.raises(ValueError):
        E.NormalizationStats(dev, 3.0, 3.0)
    with pytest.raises(ValueError):
        E.stats_from_values(dev, [1.0, 1.0, 1.0])


def test_fresh_estimator_equals_base(fitted_setup):
    ds, target, split, stats, pre, _ = fitted_setup
    for a in A.sample_uniform(0, 5):
        base_out = M.forward(pre.base, A.encode_architecture(a))
        for dev in ds.registry:
            assert E.predict(pre, a, dev) == base_out


def test_base_frozen_bit_identical(fitted_setup):
    _, _, _, _, pre, fitted = fitted_setup
    assert fitted.base_frozen
    assert np.array_equal(pre.base.params, fitted.base.params)
    assert pre.base.params.tobytes() == fitted.base.params.tobytes()


def test_predict_additivity_and_h_invariant_decomposition(fitted_setup):
    ds, _, _, _, _, fitted = fitted_setup
    for a in A.sample_uniform(1, 10):
        base_part = E.base_component(fitted, a)
        for dev in ds.registry:
            res_part = E.residual_component(fitted, a, dev)
            # additive decomposition holds exactly; the base term never sees h
            assert E.predict(fitted, a, dev) == base_part + res_part


def test_predict_rejects_unregistered_device(fitted_setup):
    _, _, _, _, _, fitted = fitted_setup
    from joulenas.devices import DeviceId

    with pytest.raises(ValueError):
        E.predict(fitted, A.DEFAULT_INIT_ARCHITECTURE, DeviceId("rogue", 0))


def test_base_pretrain_accuracy_device_independent_energy():
    # two source devices with identical energies: the base must learn g alone
    ds = make_dataset(n_archs=150, offsets={"a": 0.0, "b": 0.0, "c": 0.0}, noise_sd=0.0)
    target = ds.registry.device("c")
    split = D.split_fewshot(ds, target, 10, seed=1)
    est = E.pretrain_base(split.source_pool, M.TrainConfig(epochs=150, rng_seed=3))
    stats = E.dataset_stats(ds)
    test_y = stats["c"].normalize(split.target_test.energies)
    pred = M.forward_batch(est.base, split.target_test.encodings)
    assert float(np.sqrt(np.mean((pred - test_y) ** 2))) < 0.05


def test_constant_offset_recovery_mae(fitted_setup):
    ds, target, split, stats, _, fitted = fitted_setup
    test_y = stats["npu"].normalize(split.target_test.energies)
    preds = E.predict_batch(fitted, split.target_test.encodings, target)
    assert float(np.mean(np.abs(preds - test_y))) < 0.05


def test_fit_residual_accepts_two_samples(fitted_setup):
    ds, target, split, stats, pre, _ = fitted_setup
    tiny = split.target_train.subset([0, 1])
    fitted = E.fit_residual(pre, tiny, FAST_ADAPT, stats=stats["npu"])
    assert isinstance(fitted, E.TwoStageEstimator)
    val = E.predict(fitted, A.DEFAULT_INIT_ARCHITECTURE, target)
    assert np.isfinite(val)


def test_fit_residual_accepts_triples(fitted_setup):
    ds, target, split, stats, pre, _ = fitted_setup
    triples = [
        (r.arch, r.device, r.energy) for r in split.target_train.records[:4]
    ]
    fitted = E.fit_residual(pre, triples, FAST_ADAPT, stats=stats["npu"])
    assert isinstance(fitted, E.TwoStageEstimator)


def test_fit_residual_rejects_mixed_devices(fitted_setup):
    ds, target, split, stats, pre, _ = fitted_setup
    mixed = [
        (r.arch, r.device, r.energy)
        for r in (split.target_train.records[0], split.source_pool.records[0])
    ]
    with pytest.raises(ValueError):
        E.fit_residual(pre, mixed, FAST_ADAPT)
    with pytest.raises(ValueError):
        E.fit_residual(pre, [], FAST_ADAPT)


def test_pretrain_rejects_empty_source():
    reg = DeviceRegistry(["x"])
    empty = D.EnergyDataset([], np.empty((0, 80)), reg)
    with pytest.raises(ValueError):
        E.pretrain_base(empty, FAST_PRETRAIN)


def test_duplicate_source_device_equivalence_at_convergence():
    # identical energies on both source devices; a linear (convex) base
    # converges to the same predictor as training on either device alone
    archs = A.sample_uniform(13, 60)
    cfg0 = D.SyntheticOracleConfig(
        D.OracleFamily.CONSTANT_OFFSET, {"a": 0.0, "b": 0.0}, noise_sd=0.0, rng_seed=0
    )
    both = D.generate_synthetic(cfg0, archs, ["a", "b"])
    one = both.subset(both.device_rows(both.registry.device("a")))
    cfg = M.TrainConfig(learning_rate=0.05, epochs=3000, batch_size=10**6, rng_seed=4)
    est_both = E.pretrain_base(both, cfg, hidden_size=0)
    est_one = E.pretrain_base(one, cfg, hidden_size=0)
    probe = A.encode_architectures(A.sample_uniform(99, 50))
    p_both = M.forward_batch(est_both.base, probe)
    p_one = M.forward_batch(est_one.base, probe)
    assert float(np.max(np.abs(p_both - p_one))) < 1e-3


def test_joint_pipeline_high_data_sanity():
    ds = make_dataset(n_archs=100)
    target = ds.registry.device("npu")
    n_train = int(0.8 * ds.device_count(target))
    split = D.split_fewshot(ds, target, n_train, seed=9)
    stats = E.dataset_stats(ds)
    est = E.pretrain_and_finetune_joint(
        split.source_pool,
        split.target_train,
        FAST_PRETRAIN,
        FAST_ADAPT,
        hidden_size=64,
        stats=stats["npu"],
    )
    test_y = stats["npu"].normalize(split.target_test.energies)
    preds = E.predict_joint_batch(est, split.target_test.encodings, target)
    assert float(np.sqrt(np.mean((preds - test_y) ** 2))) < 0.1


def test_joint_requires_at_least_one_sample():
    ds = make_dataset(n_archs=30)
    split = D.split_fewshot(ds, ds.registry.device("npu"), 2, seed=0)
    pre = E.pretrain_joint(split.source_pool, FAST_PRETRAIN, hidden_size=16)
    with pytest.raises(ValueError):
        E.finetune_joint(pre, [], FAST_ADAPT)
    tiny = split.target_train.subset([0, 1])
    assert isinstance(E.finetune_joint(pre, tiny, FAST_ADAPT), E.JointEstimator)


def test_joint_deterministic():
    ds = make_dataset(n_archs=30)
    split = D.split_fewshot(ds, ds.registry.device("npu"), 4, seed=3)
    stats = E.dataset_stats(ds)
    kw = dict(hidden_size=16, stats=stats["npu"])
    e1 = E.pretrain_and_finetune_joint(split.source_pool, split.target_train, FAST_PRETRAIN, FAST_ADAPT, **kw)
    e2 = E.pretrain_and_finetune_joint(split.source_pool, split.target_train, FAST_PRETRAIN, FAST_ADAPT, **kw)
    assert np.array_equal(e1.net.params, e2.net.params)


def test_deployment_mode_stats_from_samples():
    # no stats argument and none registered: range comes from the samples
    ds = make_dataset(n_archs=60, noise_sd=0.0)
    target = ds.registry.device("npu")
    split = D.split_fewshot(ds, target, 10, seed=8)
    pre = E.pretrain_base(split.source_pool, FAST_PRETRAIN, hidden_size=16)
    assert "npu" not in pre.stats
    fitted = E.fit_residual(pre, split.target_train, FAST_ADAPT)
    st = fitted.stats["npu"]
    energies = split.target_train.energies
    assert st.min_energy == energies.min() and st.max_energy == energies.max()


def test_normalized_dataset_skips_stats():
    reg = DeviceRegistry(["a", "b"])
    rng = np.random.default_rng(0)
    enc = rng.normal(size=(20, 6))
    records = [
        D.EnergyRecord(f"r{i}", reg.device("a" if i % 2 else "b"), float(0.1 + 0.8 * rng.random()))
        for i in range(20)
    ]
    ds = D.EnergyDataset(records, enc, reg, normalized=True)
    est = E.pretrain_base(ds, M.TrainConfig(epochs=5, rng_seed=0), hidden_size=8)
    assert est.stats == {}
    assert est.arch_dim == 6  # opaque encodings pass straight through


def test_bundle_roundtrip(tmp_path, fitted_setup):
    ds, target, _, _, _, fitted = fitted_setup
    path = tmp_path / "bundle.json"
    E.save_estimator_bundle(fitted, path, provenance={"dataset_hash": "abc", "seed": 1})
    loaded = E.load_estimator_bundle(path)
    assert isinstance(loaded, E.TwoStageEstimator)
    assert np.array_equal(loaded.base.params, fitted.base.params)
    assert np.array_equal(loaded.residual.params, fitted.residual.params)
    assert loaded.registry == fitted.registry
    a = A.DEFAULT_INIT_ARCHITECTURE
    assert E.predict(loaded, a, loaded.registry.device("npu")) == E.predict(
        fitted, a, target
    )
    # joules mapping round-trips through the stored stats
    assert E.predict_joules(loaded, a, loaded.registry.device("npu")) == pytest.approx(
        fitted.stats["npu"].denormalize(E.predict(fitted, a, target))
    )


def test_joint_bundle_roundtrip(tmp_path):
    ds = make_dataset(n_archs=30)
    split = D.split_fewshot(ds, ds.registry.device("npu"), 3, seed=1)
    est = E.pretrain_and_finetune_joint(
        split.source_pool, split.target_train, FAST_PRETRAIN, FAST_ADAPT, hidden_size=8
    )
    path = tmp_path / "joint.json"
    E.save_estimator_bundle(est, path)
    loaded = E.load_estimator_bundle(path)
    assert isinstance(loaded, E.JointEstimator)
    dev = loaded.registry.device("npu")
    a = A.DEFAULT_INIT_ARCHITECTURE
    assert E.predict_joint(loaded, a, dev) == E.predict_joint(est, a, dev)
