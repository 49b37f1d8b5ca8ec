import numpy as np
import pytest

from entalign.adapter import AdapterParams, adapt, init_adapter
from entalign.errors import InvalidInputError
from entalign.util import sigmoid


def random_params(rng, dim=8, m=4, gate_raw=0.3):
    return AdapterParams(
        down=rng.normal(size=(dim, m)),
        up=rng.normal(size=(m, dim)),
        gate_raw=gate_raw,
    )


def test_closed_gate_is_identity():
    rng = np.random.default_rng(0)
    params = random_params(rng, gate_raw=-30.0)
    f = rng.normal(size=8)
    assert np.allclose(adapt(f, params), f, atol=1e-9)


def test_zero_matrices_pass_scaled_residual():
    params = AdapterParams(down=np.zeros((6, 3)), up=np.zeros((3, 6)), gate_raw=0.7)
    f = np.arange(6.0)
    g = sigmoid(0.7)
    assert np.array_equal(adapt(f, params), (1.0 - g) * f)


def test_zero_vector_maps_to_zero():
    rng = np.random.default_rng(1)
    params = random_params(rng)
    assert np.all(adapt(np.zeros(8), params) == 0.0)


def test_identity_at_init_with_zero_up():
    rng = np.random.default_rng(2)
    params = init_adapter(8, rng)
    f = rng.normal(size=8)
    g = params.gate
    assert np.array_equal(adapt(f, params), (1.0 - g) * f)


def test_lipschitz_bound_sampled():
    rng = np.random.default_rng(3)
    params = random_params(rng)
    lip = 1.0 + np.linalg.norm(params.up, ord=2) * np.linalg.norm(params.down, ord=2)
    for _ in range(200):
        f1, f2 = rng.normal(size=(2, 8))
        lhs = np.linalg.norm(adapt(f1, params) - adapt(f2, params))
        assert lhs <= lip * np.linalg.norm(f1 - f2) + 1e-12


def test_dimension_mismatch_rejected():
    rng = np.random.default_rng(4)
    params = random_params(rng, dim=8)
    with pytest.raises(InvalidInputError):
        adapt(np.zeros(5), params)


def test_inconsistent_shapes_rejected():
    with pytest.raises(InvalidInputError):
        AdapterParams(down=np.zeros((8, 4)), up=np.zeros((4, 6)), gate_raw=0.0)


def test_init_shapes_and_gate():
    rng = np.random.default_rng(5)
    params = init_adapter(16, rng, ratio=4)
    assert params.down.shape == (16, 4)
    assert params.up.shape == (4, 16)
    assert np.all(params.up == 0.0)
    assert params.gate_raw == -4.0
    assert params.gate == pytest.approx(0.01798620996209156, abs=1e-12)


def test_non_finite_feature_rejected():
    rng = np.random.default_rng(6)
    params = random_params(rng)
    with pytest.raises(InvalidInputError):
        adapt(np.array([np.inf] + [0.0] * 7), params)
