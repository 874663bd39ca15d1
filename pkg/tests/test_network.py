import math

import numpy as np
import pytest

from spinsc.errors import DomainError, ShapeError
from spinsc.mtj import SigmoidFit
from spinsc.network import (DETERMINISTIC, STOCHASTIC, Layer, NetworkModel,
                            fire, forward, forward_rate, forward_trace,
                            load_model, save_model, sigmoid, weighted_sum)
from spinsc.rngtools import derive_rng


def two_layer_model():
    return NetworkModel(layers=[
        Layer(np.array([[0.7, -1.2], [0.3, 0.8]]), np.array([0.1, -0.4])),
        Layer(np.array([[1.5, -0.6]]), np.array([0.2])),
    ])


class TestWeightedSum:
    def test_identity(self):
        x = np.array([0.3, -0.7, 2.0])
        out = weighted_sum(x, np.eye(3), np.zeros(3))
        assert np.array_equal(out, x)

    def test_zero_weights_give_bias(self):
        out = weighted_sum(np.array([5.0, 6.0]), np.zeros((3, 2)),
                           np.array([1.0, 2.0, 3.0]))
        assert np.array_equal(out, [1.0, 2.0, 3.0])

    def test_hand_arithmetic(self):
        out = weighted_sum(np.array([1.0, 2.0]),
                           np.array([[1.0, -1.0], [0.5, 0.5]]),
                           np.array([0.0, 1.0]))
        assert np.allclose(out, [-1.0, 2.5])

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            weighted_sum(np.ones(3), np.ones((2, 2)), np.zeros(2))


class TestFire:
    def test_deterministic_midpoint(self):
        assert fire(0.0, DETERMINISTIC) == 0.5

    def test_stochastic_tail_always_fires(self):
        rng = derive_rng(0, "f")
        assert all(fire(40.0, STOCHASTIC, rng=rng) == 1 for _ in range(200))

    def test_stochastic_rate_at_midpoint(self):
        rng = derive_rng(1, "f")
        n = 100_000
        rate = sum(fire(0.0, STOCHASTIC, rng=rng) for _ in range(n)) / n
        assert abs(rate - 0.5) <= 3 * math.sqrt(0.25 / n)

    def test_stochastic_requires_rng(self):
        with pytest.raises(DomainError):
            fire(0.0, STOCHASTIC)


class TestForward:
    def test_single_layer_zero_input(self):
        model = NetworkModel(layers=[Layer(np.eye(4), np.zeros(4))])
        out = forward(model, np.zeros(4))
        assert np.array_equal(out, np.full(4, 0.5))

    def test_matches_hand_computation(self):
        model = two_layer_model()
        x = np.array([0.5, -1.0])
        # independent step-by-step computation
        h1 = 1 / (1 + math.exp(-(0.7 * 0.5 - 1.2 * -1.0 + 0.1)))
        h2 = 1 / (1 + math.exp(-(0.3 * 0.5 + 0.8 * -1.0 - 0.4)))
        y = 1 / (1 + math.exp(-(1.5 * h1 - 0.6 * h2 + 0.2)))
        out = forward(model, x)
        assert out[0] == pytest.approx(y, abs=1e-12)

    def test_outputs_strictly_inside_unit_interval(self):
        model = two_layer_model()
        rng = derive_rng(3, "x")
        for _ in range(50):
            out = forward(model, rng.standard_normal(2) * 5)
            assert np.all((out > 0) & (out < 1))

    def test_input_dimension_checked(self):
        with pytest.raises(ShapeError):
            forward(two_layer_model(), np.zeros(3))

    def test_single_layer_rate_equivalence(self):
        layer = Layer(np.array([[0.8, -0.3], [0.2, 0.9]]), np.array([0.1, -0.2]))
        det = NetworkModel(layers=[Layer(layer.weights.copy(), layer.bias.copy())])
        sto = NetworkModel(layers=[layer], activation_mode=STOCHASTIC)
        x = np.array([0.4, -0.9])
        expected = forward(det, x)
        window = 40_000
        rate = forward_rate(sto, x, window, seed=5)
        se = np.sqrt(expected * (1 - expected) / window)
        assert np.all(np.abs(rate - expected) <= 3 * se)

    def test_stochastic_forward_deterministic_given_seed(self):
        model = NetworkModel(layers=two_layer_model().layers,
                             activation_mode=STOCHASTIC)
        a = forward(model, np.array([0.1, 0.2]), seed=8)
        b = forward(model, np.array([0.1, 0.2]), seed=8)
        assert np.array_equal(a, b)

    def test_hidden_unit_permutation_invariance(self):
        model = two_layer_model()
        perm = [1, 0]
        permuted = NetworkModel(layers=[
            Layer(model.layers[0].weights[perm], model.layers[0].bias[perm]),
            Layer(model.layers[1].weights[:, perm], model.layers[1].bias),
        ])
        x = np.array([0.3, 0.7])
        # re-canonicalize before summation: un-permute rows/columns back
        inv = np.argsort(perm)
        restored = NetworkModel(layers=[
            Layer(permuted.layers[0].weights[inv], permuted.layers[0].bias[inv]),
            Layer(permuted.layers[1].weights[:, inv], permuted.layers[1].bias),
        ])
        assert np.array_equal(forward(model, x), forward(restored, x))


class TestModelStructure:
    def test_incompatible_layers_rejected(self):
        with pytest.raises(ShapeError):
            NetworkModel(layers=[Layer(np.ones((3, 2)), np.zeros(3)),
                                 Layer(np.ones((1, 4)), np.zeros(1))])

    def test_non_finite_weights_rejected(self):
        with pytest.raises(DomainError):
            Layer(np.array([[np.inf]]), np.zeros(1))

    def test_device_fit_scaling(self):
        fit = SigmoidFit(a=2e4, b=1e-3, r_squared=1.0)
        model = NetworkModel(layers=[Layer(np.eye(1), np.zeros(1))],
                             activation_mode=STOCHASTIC, neuron_fit=fit,
                             unit_current=1e-3)
        # pre-activation 1.0 maps to 1 mA, the fit midpoint: rate 0.5
        rate = forward_rate(model, np.array([1.0]), 40_000, seed=2)
        assert abs(rate[0] - 0.5) <= 3 * math.sqrt(0.25 / 40_000)


class TestSerialization:
    def test_round_trip_bit_exact(self, tmp_path):
        model = two_layer_model()
        path = tmp_path / "model.json"
        save_model(model, path)
        back = load_model(path)
        for a, b in zip(model.layers, back.layers):
            assert np.array_equal(a.weights, b.weights)
            assert np.array_equal(a.bias, b.bias)
        assert back.activation_mode == model.activation_mode

    def test_forward_trace_shapes(self):
        model = two_layer_model()
        acts, pres = forward_trace(model, np.array([0.1, 0.2]))
        assert len(acts) == 3 and len(pres) == 2
        assert np.array_equal(acts[-1], forward(model, np.array([0.1, 0.2])))
