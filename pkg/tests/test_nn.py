import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tcwvnet import nn
from tcwvnet.errors import InsufficientDataError, ShapeError
from tcwvnet.nn import GradientSet, Layer, LayerSpec, MlpParams

from conftest import fd_gradients, one_one, random_params

finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)


@pytest.mark.parametrize("x, expected", [(-1.0, 0.0), (0.0, 0.0), (2.5, 2.5)])
def test_relu(x, expected):
    assert nn.relu(x) == expected


@pytest.mark.parametrize("x, expected", [(3.0, 1.0), (-0.5, 0.0), (0.0, 0.0)])
def test_relu_derivative(x, expected):
    assert nn.relu_derivative(x) == expected


def test_layer_spec_validation():
    with pytest.raises(ShapeError):
        LayerSpec(0, 3)
    with pytest.raises(ShapeError):
        LayerSpec(3, 3, "tanh")
    with pytest.raises(ShapeError):
        nn.check_chain([LayerSpec(9, 64), LayerSpec(32, 1)])


def test_default_architecture():
    specs = nn.default_architecture()
    assert [(s.input_dim, s.output_dim, s.activation) for s in specs] == [
        (9, 64, "relu"), (64, 32, "relu"), (32, 1, "linear")]
    assert nn.default_architecture(output_relu=True)[-1].activation == "relu"


def test_layer_shape_checked():
    with pytest.raises(ShapeError):
        Layer(np.zeros((2, 3)), np.zeros(2), LayerSpec(2, 3))


def test_he_uniform_init_bounds_and_seed():
    specs = nn.default_architecture()
    a = MlpParams.initialize(specs, seed=3)
    b = MlpParams.initialize(specs, seed=3)
    for la, lb in zip(a.layers, b.layers):
        assert np.array_equal(la.weights, lb.weights)
        limit = np.sqrt(6.0 / la.spec.input_dim)
        assert np.all(np.abs(la.weights) <= limit)
        assert np.all(la.biases == 0)


def test_forward_zero_network():
    params = MlpParams.zeros(nn.default_architecture())
    assert nn.forward(params, np.arange(9.0))[0] == 0.0


def test_forward_affine():
    assert nn.forward(one_one(2.0, 1.0), [3.0])[0] == 7.0


def test_forward_two_layer_hand_composed():
    params = MlpParams([Layer([[1.0]], [-2.0], LayerSpec(1, 1, "relu")),
                        Layer([[3.0]], [0.0], LayerSpec(1, 1, "linear"))])
    pred, trace = nn.forward(params, [5.0])
    assert pred == 9.0
    assert trace.pre_activations[0][0] == 3.0 and trace.activations[0][0] == 3.0


def test_forward_trace_consistency(rng):
    params = random_params(nn.default_architecture(), rng)
    x = rng.normal(size=9)
    pred, trace = nn.forward(params, x)
    for spec, v, y in zip(params.specs, trace.pre_activations, trace.activations):
        expect = np.maximum(v, 0) if spec.activation == "relu" else v
        assert np.array_equal(y, expect)
    assert trace.activations[-1].shape == (1,)
    assert nn.forward(params, trace.input)[0] == pred


def test_forward_rejects_bad_input():
    params = MlpParams.zeros(nn.default_architecture())
    with pytest.raises(ShapeError):
        nn.forward(params, np.zeros(8))


def test_forward_batch_matches_forward(rng):
    params = random_params(nn.default_architecture(), rng)
    X = rng.normal(size=(17, 9))
    batch = nn.predict(params, X)
    single = np.array([nn.forward(params, x)[0] for x in X])
    np.testing.assert_allclose(batch, single, rtol=1e-12, atol=1e-12)


def test_linearity_at_zero(rng):
    params = random_params(nn.default_architecture(), rng)
    for layer in params.layers:
        layer.biases[:] = 0
    _, trace = nn.forward(params, np.zeros(9))
    assert all(np.all(a == 0) for a in trace.activations)


@settings(max_examples=50, deadline=None)
@given(c=st.floats(1e-3, 1e3), seed=st.integers(0, 2**32 - 1))
def test_relu_layer_homogeneity(c, seed):
    r = np.random.default_rng(seed)
    params = MlpParams([Layer(r.normal(size=(1, 4)), [0.0], LayerSpec(4, 1, "relu"))])
    x = r.normal(size=4)
    np.testing.assert_allclose(nn.forward(params, c * x)[0], c * nn.forward(params, x)[0],
                               rtol=1e-12, atol=1e-300)


def test_forward_deterministic(rng):
    params = random_params(nn.default_architecture(), rng)
    x = rng.normal(size=9)
    assert len({nn.forward(params, x)[0] for _ in range(5)}) == 1


@pytest.mark.parametrize("pred, target, expected", [
    ([1.0, 2.0], [1.0, 2.0], 0.0),
    ([1.0], [3.0], 4.0),
    ([0.0, 2.0], [1.0, 2.0], 0.5),
])
def test_batch_loss(pred, target, expected):
    assert nn.batch_loss(pred, target) == expected


def test_batch_loss_errors():
    with pytest.raises(InsufficientDataError):
        nn.batch_loss([], [])
    with pytest.raises(ShapeError):
        nn.batch_loss([1.0], [1.0, 2.0])


@given(st.lists(st.tuples(finite, finite), min_size=1, max_size=20))
def test_batch_loss_nonnegative(pairs):
    p, t = zip(*pairs)
    assert nn.batch_loss(p, t) >= 0


# dyadic values keep squared residuals exact, so zero loss <=> exact fit
dyadic = st.integers(-10_000, 10_000).map(lambda k: k / 8)


@given(st.lists(st.tuples(dyadic, dyadic), min_size=1, max_size=20))
def test_batch_loss_zero_iff_equal(pairs):
    p, t = zip(*pairs)
    assert (nn.batch_loss(p, t) == 0) == all(a == b for a, b in pairs)


@pytest.mark.parametrize("y, Y, b, expected", [(5.0, 5.0, 1, 0.0), (5.0, 3.0, 1, -4.0), (5.0, 3.0, 2, -2.0)])
def test_output_gradient(y, Y, b, expected):
    assert nn.output_gradient(y, Y, b) == expected


def test_backward_zero_upstream(rng):
    params = random_params(nn.default_architecture(), rng)
    _, trace = nn.forward(params, rng.normal(size=9))
    grads = nn.backward(params, trace, 0.0)
    assert all(np.all(g == 0) for g in grads.arrays())


def test_backward_single_linear_layer():
    params = one_one(2.0, 1.0)
    _, trace = nn.forward(params, [3.0])
    g = nn.backward(params, trace, 1.0)
    assert g.weight_grads[0][0, 0] == 3.0
    assert g.bias_grads[0][0] == 1.0


def test_backward_shape_mismatch(rng):
    params = random_params(nn.default_architecture(), rng)
    _, trace = nn.forward(params, rng.normal(size=9))
    other = random_params(nn.default_architecture(9, (16, 8)), rng)
    with pytest.raises(ShapeError):
        nn.backward(other, trace, 1.0)


def test_backward_matches_finite_differences(rng):
    specs = nn.default_architecture()
    for _ in range(3):
        params = random_params(specs, rng)
        x, y = rng.normal(size=9), rng.normal()
        Y, trace = nn.forward(params, x)
        analytic = list(nn.backward(params, trace, nn.output_gradient(y, Y, 1)).arrays())
        numeric = fd_gradients(params, x, y)
        for a, n in zip(analytic, numeric):
            err = np.abs(a - n)
            rel = err / np.maximum(np.maximum(np.abs(a), np.abs(n)), 1e-300)
            assert np.all((rel < 1e-5) | (err < 1e-8))


def test_accumulate_singleton_equals_backward(rng):
    params = random_params(nn.default_architecture(), rng)
    x, y = rng.normal(size=9), 1.5
    total, loss = nn.accumulate_batch_gradients(params, [(x, y)])
    Y, trace = nn.forward(params, x)
    single = nn.backward(params, trace, nn.output_gradient(y, Y, 1))
    for a, b in zip(total.arrays(), single.arrays()):
        assert np.array_equal(a, b)
    assert loss == (y - Y) ** 2


def test_accumulate_perfect_fit_is_zero(rng):
    params = random_params(nn.default_architecture(), rng)
    xs = rng.normal(size=(4, 9))
    batch = [(x, nn.forward(params, x)[0]) for x in xs]
    grads, loss = nn.accumulate_batch_gradients(params, batch)
    assert loss == 0.0
    assert all(np.all(g == 0) for g in grads.arrays())


def test_accumulate_two_samples_by_hand():
    # F = w x + b with w=2, b=1; per-sample dJ/dw = -2 (y - F) x / B, dJ/db = -2 (y - F) / B
    params = one_one(2.0, 1.0)
    batch = [([3.0], 10.0), ([1.0], 0.0)]           # F = 7, F = 3
    grads, loss = nn.accumulate_batch_gradients(params, batch)
    assert grads.weight_grads[0][0, 0] == pytest.approx(-2 * 3 * 3 / 2 + -2 * -3 * 1 / 2)   # -9 + 3
    assert grads.bias_grads[0][0] == pytest.approx(-2 * 3 / 2 + -2 * -3 / 2)               # 0
    assert loss == pytest.approx((9 + 9) / 2)


def test_accumulate_empty_batch():
    with pytest.raises(InsufficientDataError):
        nn.accumulate_batch_gradients(one_one(1.0, 0.0), [])


def test_batch_gradients_matches_sequential(rng):
    params = random_params(nn.default_architecture(), rng)
    X, y = rng.normal(size=(64, 9)), rng.normal(size=64) * 5
    seq, seq_loss = nn.accumulate_batch_gradients(params, list(zip(X, y)))
    vec, vec_loss = nn.batch_gradients(params, X, y)
    for a, b in zip(seq.arrays(), vec.arrays()):
        np.testing.assert_allclose(a, b, rtol=1e-10, atol=1e-12)
    assert vec_loss == pytest.approx(seq_loss, rel=1e-12)


def test_gradient_set_check_matches(rng):
    params = random_params(nn.default_architecture(), rng)
    GradientSet.zeros_like(params).check_matches(params)
    bad = GradientSet.zeros_like(params)
    bad.bias_grads[0] = np.zeros(3)
    with pytest.raises(ShapeError):
        bad.check_matches(params)
