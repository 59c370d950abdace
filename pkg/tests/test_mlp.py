"""MLP engine tests: forward, exact gradients, training, checkpoints, backends."""

import json

import numpy as np
import pytest

from joulenas import mlp_core as M


def _rand_batch(rng, n, d):
    return rng.normal(size=(n, d)), rng.normal(size=n)


def total_weight_sq(net):
    return sum(float((w**2).sum()) for w in net.weights)


def full_loss(net, X, y, l2):
    """Independent loss oracle built only on the public forward pass."""
    pred = M.forward_batch(net, X)
    return float(np.mean((pred - y) ** 2)) + l2 * total_weight_sq(net)


def fd_gradient_entries(net, X, y, l2, entries, step=1e-5):
    out = {}
    for idx in entries:
        p_hi = net.params.copy()
        p_lo = net.params.copy()
        p_hi[idx] += step
        p_lo[idx] -= step
        hi = full_loss(M.Network(net.layer_sizes, p_hi), X, y, l2)
        lo = full_loss(M.Network(net.layer_sizes, p_lo), X, y, l2)
        out[idx] = (hi - lo) / (2 * step)
    return out


def test_forward_zero_network_is_zero():
    net = M.Network((5, 7, 1), np.zeros(M.param_count((5, 7, 1))))
    assert M.forward(net, np.ones(5)) == 0.0


def test_forward_single_linear_layer_is_affine():
    w = np.array([0.5, -1.5, 2.0])
    b = 0.25
    net = M.Network((3, 1), np.concatenate([w, [b]]))
    x = np.array([1.0, 2.0, -0.5])
    assert M.forward(net, x) == pytest.approx(float(w @ x + b), rel=1e-15)


def test_forward_deterministic():
    net = M.init_network((6, 20, 1), rng_seed=5)
    x = np.linspace(-1, 1, 6)
    assert M.forward(net, x) == M.forward(net, x)


def test_forward_rejects_dimension_mismatch():
    net = M.init_network((4, 3, 1), rng_seed=0)
    with pytest.raises(ValueError):
        M.forward(net, np.zeros(5))
    with pytest.raises(ValueError):
        M.forward_batch(net, np.zeros((2, 5)))


def test_network_params_are_immutable():
    net = M.init_network((3, 4, 1), rng_seed=1)
    with pytest.raises(ValueError):
        net.params[0] = 1.0


def test_gradient_zero_at_perfect_fit():
    # linear net fitting its own outputs exactly
    net = M.Network((2, 1), np.array([1.0, -2.0, 0.5]))
    X = np.array([[1.0, 0.0], [0.0, 1.0], [2.0, 3.0]])
    y = M.forward_batch(net, X)
    g = M.gradient(net, (X, y))
    assert np.allclose(g, 0.0, atol=1e-15)


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(77)
    for trial in range(10):
        sizes = (4, int(rng.integers(2, 9)), 1) if trial % 2 else (4, 1)
        # continuous random params keep preactivations off the ReLU kink,
        # where the FD oracle is not a valid derivative
        net = M.Network(sizes, 0.5 * rng.normal(size=M.param_count(sizes)))
        X, y = _rand_batch(rng, int(rng.integers(1, 6)), 4)
        l2 = float(rng.choice([0.0, 0.01]))
        g = M.gradient(net, (X, y), l2_penalty=l2)
        entries = rng.choice(len(net.params), size=min(10, len(net.params)), replace=False)
        fd = fd_gradient_entries(net, X, y, l2, entries)
        for idx, fd_val in fd.items():
            denom = max(abs(fd_val), abs(g[idx]), 1e-6)
            assert abs(fd_val - g[idx]) / denom < 1e-4


def test_gradient_accepts_pair_list():
    net = M.init_network((3, 5, 1), rng_seed=2)
    rng = np.random.default_rng(0)
    X, y = _rand_batch(rng, 4, 3)
    pairs = [(X[i], y[i]) for i in range(4)]
    assert np.allclose(M.gradient(net, pairs), M.gradient(net, (X, y)), rtol=1e-12)


def test_gradient_rejects_empty_batch():
    net = M.init_network((3, 5, 1), rng_seed=2)
    with pytest.raises(ValueError):
        M.gradient(net, [])


def test_residual_doubling_doubles_output_bias_gradient():
    net = M.init_network((3, 6, 1), rng_seed=4)
    rng = np.random.default_rng(1)
    X, _ = _rand_batch(rng, 5, 3)
    pred = M.forward_batch(net, X)
    r = rng.normal(size=5)
    g1 = M.gradient(net, (X, pred - r))
    g2 = M.gradient(net, (X, pred - 2 * r))
    # output bias is the last parameter
    assert g2[-1] == pytest.approx(2 * g1[-1], rel=1e-9)


def test_train_fits_line():
    xs = np.linspace(-1, 1, 50)[:, None]
    ys = 2 * xs[:, 0] + 1
    net = M.init_network((1, 8, 1), rng_seed=0)
    cfg = M.TrainConfig(learning_rate=0.05, epochs=800, batch_size=50, rng_seed=0)
    trained, trace = M.train(net, (xs, ys), cfg)
    assert len(trace) == 800
    assert M.rmse(trained, (xs, ys)) < 0.05


def test_train_zero_epochs_returns_initialization():
    net = M.init_network((2, 4, 1), rng_seed=9)
    trained, trace = M.train(
        net, (np.zeros((3, 2)), np.zeros(3)), M.TrainConfig(epochs=0)
    )
    assert trace == []
    assert trained.layer_sizes == net.layer_sizes
    assert np.array_equal(trained.params, net.params)


def test_train_is_bitwise_deterministic():
    rng = np.random.default_rng(3)
    X, y = _rand_batch(rng, 40, 5)
    net = M.init_network((5, 16, 1), rng_seed=10)
    cfg = M.TrainConfig(learning_rate=0.02, epochs=30, batch_size=8, rng_seed=42)
    t1, trace1 = M.train(net, (X, y), cfg)
    t2, trace2 = M.train(net, (X, y), cfg)
    assert trace1 == trace2
    assert np.array_equal(t1.params, t2.params)


def test_train_loss_monotone_on_convex_case():
    # pure linear network + full batch + small lr on a realizable dataset:
    # plain gradient descent on a convex quadratic must not increase the loss
    rng = np.random.default_rng(8)
    X = rng.normal(size=(30, 3))
    y = X @ np.array([1.0, -2.0, 0.5]) + 0.3
    net = M.init_network((3, 1), rng_seed=1)
    cfg = M.TrainConfig(learning_rate=0.01, epochs=200, batch_size=30, rng_seed=0)
    _, trace = M.train(net, (X, y), cfg)
    diffs = np.diff(np.array(trace))
    assert np.all(diffs <= 1e-12)


def test_train_rejects_empty_data():
    net = M.init_network((2, 4, 1), rng_seed=9)
    with pytest.raises(ValueError):
        M.train(net, [], M.TrainConfig())


def test_train_config_validation():
    with pytest.raises(ValueError):
        M.TrainConfig(learning_rate=0.0)
    with pytest.raises(ValueError):
        M.TrainConfig(batch_size=0)
    with pytest.raises(ValueError):
        M.TrainConfig(l2_penalty=-1.0)


def test_rmse_examples():
    net = M.Network((1, 1), np.array([1.0, 0.0]))  # identity on scalars
    X = np.array([[1.0], [2.0]])
    assert M.rmse(net, (X, np.array([1.0, 2.0]))) == 0.0
    # errors 3 and 4 -> sqrt(25/2)
    assert M.rmse(net, (X, np.array([4.0, 6.0]))) == pytest.approx(np.sqrt(25 / 2))
    with pytest.raises(ValueError):
        M.rmse(net, [])


def test_checkpoint_roundtrip_exact(tmp_path):
    net = M.init_network((7, 11, 1), rng_seed=123)
    path = tmp_path / "net.json"
    M.save_network(net, path)
    loaded = M.load_network(path)
    assert loaded.layer_sizes == net.layer_sizes
    assert np.array_equal(loaded.params, net.params)
    d = json.loads(path.read_text())
    assert d["format_version"] == 1
    with pytest.raises(ValueError):
        M.from_checkpoint_dict({**d, "format_version": 99})


def test_zero_output_layer():
    net = M.init_network((4, 6, 1), rng_seed=3)
    z = M.zero_output_layer(net)
    assert np.allclose(M.forward_batch(z, np.random.default_rng(0).normal(size=(5, 4))), 0.0)
    # hidden layer untouched
    assert np.array_equal(z.weights[0], net.weights[0])


@pytest.mark.skipif(
    len(M.available_backends()) < 2, reason="compiled kernels not built"
)
def test_backends_agree():
    np_mod = M.available_backends()["numpy"]
    cy_mod = M.available_backends()["cython"]
    rng = np.random.default_rng(5)
    net = M.init_network((6, 24, 1), rng_seed=2)
    sizes = np.array(net.layer_sizes, dtype=np.int64)
    X = np.ascontiguousarray(rng.normal(size=(17, 6)))
    y = rng.normal(size=17)

    mse_a, g_a = np_mod.grad_batch(sizes, np.asarray(net.params), X, y, 0.01)
    mse_b, g_b = cy_mod.grad_batch(sizes, np.asarray(net.params), X, y, 0.01)
    assert mse_a == pytest.approx(mse_b, rel=1e-10)
    assert np.allclose(g_a, g_b, rtol=1e-9, atol=1e-12)

    order = np.ascontiguousarray(rng.permutation(17), dtype=np.int64)
    p_a = net.params.copy()
    p_b = net.params.copy()
    sse_a = np_mod.train_epoch(sizes, p_a, X, y, order, 4, 0.01, 0.001)
    sse_b = cy_mod.train_epoch(sizes, p_b, X, y, order, 4, 0.01, 0.001)
    assert sse_a == pytest.approx(sse_b, rel=1e-9)
    assert np.allclose(p_a, p_b, rtol=1e-8, atol=1e-12)
