import json
import struct

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from relroute.nn import (
    FORMAT_VERSION,
    MAGIC,
    DivergenceError,
    Mlp,
    ModelFormatError,
    ModelVersionError,
    default_sizes,
    load_with_metadata,
)


def finite_difference_grad(mlp, X, y, h=1e-6):
    base = mlp.params.copy()
    grad = np.empty_like(base)
    for i in range(base.size):
        mlp.params[i] = base[i] + h
        up = mlp.loss_and_grad(X, y)[0]
        mlp.params[i] = base[i] - h
        down = mlp.loss_and_grad(X, y)[0]
        mlp.params[i] = base[i]
        grad[i] = (up - down) / (2 * h)
    return grad


def max_rel_error(a, b):
    return float(np.max(np.abs(a - b) / np.maximum(1e-8, np.abs(a) + np.abs(b))))


def test_default_shape():
    mlp = Mlp(default_sizes(22), rng=0)
    assert mlp.sizes == [22, 220, 11, 1]
    assert [w.shape for w in mlp.weights] == [(22, 220), (220, 11), (11, 1)]
    assert mlp.n_params == 22 * 220 + 220 + 220 * 11 + 11 + 11 + 1


def test_same_seed_same_weights():
    assert np.array_equal(Mlp(rng=5).params, Mlp(rng=5).params)
    assert not np.array_equal(Mlp(rng=5).params, Mlp(rng=6).params)


def test_init_bounds_and_zero_biases():
    mlp = Mlp(rng=1)
    for w in mlp.weights:
        lim = np.sqrt(6.0 / sum(w.shape))
        assert np.abs(w).max() <= lim
    assert all((b == 0).all() for b in mlp.biases)
    out = mlp.forward(np.random.default_rng(0).random((50, 22)))
    assert np.isfinite(out).all()


def test_zero_weights_output_zero():
    mlp = Mlp()
    assert mlp.forward(np.ones(22)) == 0.0


def test_forward_matches_matrix_chain():
    rng = np.random.default_rng(2)
    mlp = Mlp(rng=3)
    mlp.params += rng.normal(0, 0.1, mlp.n_params)  # non-zero biases too
    X = rng.random((40, 22))
    h = X
    for i, (w, b) in enumerate(zip(mlp.weights, mlp.biases)):
        h = h @ w + b
        if i < 2:
            h = np.where(h > 0, h, 0.0)
    assert np.allclose(mlp.forward(X), h[:, 0], atol=1e-12, rtol=0)
    singles = np.array([mlp.forward(x) for x in X])
    assert np.allclose(singles, mlp.forward(X), atol=1e-12, rtol=0)
    assert isinstance(mlp.forward(X[0]), float)
    assert np.allclose(mlp.predict(X, chunk=7), mlp.forward(X), atol=1e-12, rtol=0)


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        Mlp(rng=0).forward(np.ones(21))
    with pytest.raises(ValueError):
        Mlp([4, 3, 2])


def test_gradient_full_shape():
    rng = np.random.default_rng(4)
    mlp = Mlp(rng=4)
    mlp.params += rng.normal(0, 0.05, mlp.n_params)
    X = rng.random((6, 22))
    y = rng.normal(size=6)
    _, g = mlp.loss_and_grad(X, y)
    # spot-check a random subset of the ~7.5k parameters; full sweep runs in the acceptance suite
    idx = rng.choice(mlp.n_params, 300, replace=False)
    fd = np.empty(idx.size)
    base = mlp.params.copy()
    for k, i in enumerate(idx):
        mlp.params[i] = base[i] + 1e-6
        up = mlp.loss_and_grad(X, y)[0]
        mlp.params[i] = base[i] - 1e-6
        down = mlp.loss_and_grad(X, y)[0]
        mlp.params[i] = base[i]
        fd[k] = (up - down) / 2e-6
    assert max_rel_error(g[idx], fd) < 1e-4


@settings(max_examples=20, deadline=None)
@given(st.lists(st.integers(1, 6), min_size=1, max_size=3), st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_gradient_small_networks(hidden, n_in, seed):
    rng = np.random.default_rng(seed)
    mlp = Mlp([n_in, *hidden, 1], rng=seed)
    mlp.params += rng.normal(0, 0.1, mlp.n_params)
    X = rng.normal(size=(5, n_in))
    y = rng.normal(size=5)
    _, g = mlp.loss_and_grad(X, y)
    assert max_rel_error(g, finite_difference_grad(mlp, X, y)) < 1e-4


def test_fit_constant_target():
    rng = np.random.default_rng(0)
    X = rng.random((128, 22))
    y = np.full(128, -3.5)
    mlp = Mlp(rng=0, learning_rate=1e-3)
    trace = mlp.fit(X, y, epochs=1200, batch_size=32, rng=1)
    assert trace[-1] < 1e-3
    assert np.abs(mlp.predict(X) + 3.5).max() < 1e-2


def test_single_sample_descent():
    mlp = Mlp([3, 4, 1], rng=2, learning_rate=1e-4, optimizer="sgd")
    x = np.array([[0.3, 0.5, 0.9]])
    y = np.array([2.0])
    before = (mlp.forward(x)[0] - 2.0) ** 2
    mlp.fit(x, y, epochs=1, batch_size=1, rng=0)
    assert (mlp.forward(x)[0] - 2.0) ** 2 < before


def test_fit_does_not_mutate_inputs():
    rng = np.random.default_rng(1)
    X = rng.random((64, 22))
    y = rng.random(64)
    Xc, yc = X.copy(), y.copy()
    Mlp(rng=0).fit(X, y, epochs=2, rng=0)
    assert np.array_equal(X, Xc) and np.array_equal(y, yc)


def test_fit_same_seed_same_result():
    rng = np.random.default_rng(1)
    X, y = rng.random((100, 22)), rng.random(100)
    a, b = Mlp(rng=0), Mlp(rng=0)
    assert a.fit(X, y, epochs=3, rng=9) == b.fit(X, y, epochs=3, rng=9)
    assert np.array_equal(a.params, b.params)


def test_fit_rejects_bad_shapes():
    with pytest.raises(ValueError):
        Mlp(rng=0).fit(np.empty((0, 22)), np.empty(0))
    with pytest.raises(ValueError):
        Mlp(rng=0).fit(np.ones((3, 22)), np.ones(2))


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_divergence_detected():
    X = np.ones((8, 22))
    y = np.full(8, 1e300)
    mlp = Mlp(rng=0, learning_rate=1e3, optimizer="sgd")
    with pytest.raises(DivergenceError):
        mlp.fit(X, y, epochs=3, rng=0)


def test_save_load_roundtrip(tmp_path):
    rng = np.random.default_rng(3)
    mlp = Mlp(rng=3)
    mlp.params += rng.normal(0, 0.1, mlp.n_params)
    path = mlp.save(tmp_path / "m.model", metadata={"seed": 3, "scenario": "toy"})
    back, meta = load_with_metadata(path)
    X = rng.random((100, 22))
    assert np.array_equal(back.forward(X), mlp.forward(X))
    assert back.sizes == mlp.sizes
    assert meta["seed"] == 3 and meta["scenario"] == "toy" and meta["activation"] == "relu"
    raw = path.read_bytes()
    assert raw.startswith(MAGIC)


def test_truncated_file(tmp_path):
    path = Mlp(rng=0).save(tmp_path / "m.model")
    raw = path.read_bytes()
    for cut in (5, 30, len(raw) - 8):
        (tmp_path / "t.model").write_bytes(raw[:cut])
        with pytest.raises(ModelFormatError):
            Mlp.load(tmp_path / "t.model")
    (tmp_path / "t.model").write_bytes(raw[: len(raw) - 8])
    with pytest.raises(ModelFormatError, match="layer sizes"):
        Mlp.load(tmp_path / "t.model")


def test_version_mismatch(tmp_path):
    path = Mlp(rng=0).save(tmp_path / "m.model")
    raw = bytearray(path.read_bytes())
    struct.pack_into("<I", raw, len(MAGIC), FORMAT_VERSION + 1)
    path.write_bytes(bytes(raw))
    with pytest.raises(ModelVersionError):
        Mlp.load(path)


def test_bad_magic(tmp_path):
    path = tmp_path / "junk.model"
    path.write_bytes(b"not a model file at all, just text" * 3)
    with pytest.raises(ModelFormatError):
        Mlp.load(path)


def test_text_dump():
    mlp = Mlp([2, 3, 1], rng=0)
    text = mlp.dump_text()
    assert text.startswith("sizes 2 3 1\n")
    assert "layer 0 weights 2x3" in text and "layer 1 bias 1" in text
    assert json.dumps(text)  # plain text


def test_copy_is_independent():
    a = Mlp(rng=0)
    b = a.copy()
    b.params[0] += 1.0
    assert a.params[0] != b.params[0]
