import numpy as np
import pytest

from conftest import FIXTURES
from rmppi.errors import BadMagicError, BadVersionError, ContractError, NonFiniteError, TruncatedError
from rmppi.nn import AdamState, Mlp, adam_step, load_mlp, mlp_backward, mlp_deserialize, mlp_forward, mlp_serialize, save_mlp


def test_reference_weight_file():
    net = load_mlp(FIXTURES / "reference_mlp.rmnn")
    assert net.layer_dims == (2, 2, 1)
    assert net.activation == "relu"
    np.testing.assert_allclose(mlp_forward(net, np.array([1.0, 0.5])), [2.75], atol=1e-12)


def test_forward_batches_over_leading_dims(rng):
    net = Mlp.init((3, 5, 2), "tanh", rng)
    x = rng.normal(size=(4, 6, 3))
    out = net.forward(x)
    assert out.shape == (4, 6, 2)
    np.testing.assert_allclose(out[2, 3], net.forward(x[2, 3]))


def test_forward_rejects_wrong_input_dim(rng):
    net = Mlp.init((3, 4, 1), rng=rng)
    with pytest.raises(ContractError):
        net.forward(np.zeros(2))


@pytest.mark.parametrize("activation", ["mish", "relu", "tanh"])
def test_backward_matches_finite_differences(activation, rng):
    net = Mlp.init((3, 6, 2), activation, rng)
    # keep relu pre-activations away from the kink
    net.biases[0] += 0.05
    x = rng.normal(size=(5, 3))
    probe = rng.normal(size=(5, 2))

    def loss(params):
        trial = net.copy()
        trial.set_params(params)
        return float(np.sum(trial.forward(x) * probe))

    _, cache = net.forward_cached(x)
    grads, input_grad = net.backward(cache, probe)
    params = net.params()
    eps = 1e-6
    for i, p in enumerate(params):
        for idx in [(0,) * p.ndim, tuple(s - 1 for s in p.shape)]:
            plus = [q.copy() for q in params]
            minus = [q.copy() for q in params]
            plus[i][idx] += eps
            minus[i][idx] -= eps
            numeric = (loss(plus) - loss(minus)) / (2 * eps)
            assert grads[i][idx] == pytest.approx(numeric, rel=1e-5, abs=1e-7)

    xp = x.copy()
    xp[1, 2] += eps
    xm = x.copy()
    xm[1, 2] -= eps
    numeric = (np.sum(net.forward(xp) * probe) - np.sum(net.forward(xm) * probe)) / (2 * eps)
    assert input_grad[1, 2] == pytest.approx(numeric, rel=1e-5, abs=1e-7)


def test_backward_on_random_networks():
    for seed in range(50):
        rng = np.random.default_rng(seed)
        dims = tuple(int(d) for d in rng.integers(1, 5, size=rng.integers(2, 5)))
        net = Mlp.init(dims, ("mish", "tanh")[seed % 2], rng)
        x = rng.normal(size=(3, dims[0]))
        probe = rng.normal(size=(3, dims[-1]))
        grads, _ = mlp_backward(net, x, probe)
        params = net.params()
        for i, p in enumerate(params):
            for idx in np.ndindex(p.shape):
                shifted = []
                for delta in (1e-6, -1e-6):
                    trial = [q.copy() for q in params]
                    trial[i][idx] += delta
                    probe_net = net.copy()
                    probe_net.set_params(trial)
                    shifted.append(np.sum(probe_net.forward(x) * probe))
                numeric = (shifted[0] - shifted[1]) / 2e-6
                assert grads[i][idx] == pytest.approx(numeric, rel=1e-4, abs=1e-7), (seed, i, idx)


def test_weight_file_survives_disk(tmp_path, rng):
    net = Mlp.init((4, 3, 2), "mish", rng)
    save_mlp(net, tmp_path / "net.rmnn")
    loaded = load_mlp(tmp_path / "net.rmnn")
    x = rng.normal(size=(7, 4))
    np.testing.assert_array_equal(loaded.forward(x), net.forward(x))


def test_weight_file_errors(rng):
    blob = mlp_serialize(Mlp.init((2, 2, 1), rng=rng))
    with pytest.raises(BadMagicError):
        mlp_deserialize(b"XXXX" + blob[4:])
    with pytest.raises(BadVersionError):
        mlp_deserialize(blob[:4] + b"\x02\x00" + blob[6:])
    with pytest.raises(TruncatedError):
        mlp_deserialize(blob[:-3])


def test_adam_moves_against_gradient():
    params = [np.array([1.0, -1.0])]
    state = AdamState.for_params(params, learning_rate=0.1)
    updated = adam_step(state, params, [np.array([2.0, -3.0])])
    # first bias-corrected step has magnitude learning_rate
    np.testing.assert_allclose(updated[0], [0.9, -0.9], atol=1e-6)
    assert state.step == 1


def test_adam_rejects_non_finite_gradient():
    params = [np.zeros(2), np.zeros(1)]
    state = AdamState.for_params(params)
    with pytest.raises(NonFiniteError) as info:
        adam_step(state, params, [np.zeros(2), np.array([np.nan])])
    assert info.value.index == 0
    assert state.step == 0


def test_zero_network_outputs_zero():
    net = Mlp.zeros((3, 5, 5, 2), "mish")
    np.testing.assert_array_equal(net.forward(np.ones((4, 3))), np.zeros((4, 2)))


def test_linear_layer_gradient_closed_form(rng):
    net = Mlp.init((3, 2), rng=rng)
    x = rng.normal(size=3)
    out = net.forward(x)
    # loss 0.5 * |W x + b|^2
    (dw, db), input_grad = mlp_backward(net, x, out)
    np.testing.assert_allclose(dw, np.outer(out, x), atol=1e-12)
    np.testing.assert_allclose(db, out, atol=1e-12)
    np.testing.assert_allclose(input_grad, net.weights[0].T @ out, atol=1e-12)


def test_adam_zero_gradient_keeps_parameters():
    params = [np.array([0.3, -2.0])]
    state = AdamState.for_params(params, learning_rate=0.1)
    updated = adam_step(state, params, [np.zeros(2)])
    np.testing.assert_array_equal(updated[0], params[0])


def test_adam_settles_in_a_quadratic_bowl():
    params = [np.array([1.0])]
    state = AdamState.for_params(params, learning_rate=0.1)
    for _ in range(200):
        params = adam_step(state, params, [params[0].copy()])
    assert abs(params[0][0]) < 0.01
