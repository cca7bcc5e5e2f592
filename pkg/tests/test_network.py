import numpy as np
import pytest

from layeropt.linalg import SeededRng
from layeropt.network import (Architecture, NetworkWeights, StaleCacheError,
                              forward, forward_partial, init_weights,
                              parse_architecture, sigmoid, sigmoid_prime)


def random_net(widths, seed, input_dim=None, P=6):
    arch = Architecture(input_dim or widths[0], tuple(widths))
    rng = SeededRng(seed)
    w = init_weights(arch, rng)
    X = rng.child(99).uniform(0.0, 1.0, size=(P, arch.input_dim))
    return arch, w, X


class TestArchitecture:
    def test_parse_repeated_form(self):
        arch = parse_architecture("13-[10x50]-1")
        assert arch.input_dim == 13
        assert arch.layer_widths == tuple([50] * 10 + [1])
        assert arch.num_layers == 11

    def test_parse_list_form(self):
        arch = parse_architecture("59-[200,50,200]-1")
        assert arch.layer_widths == (200, 50, 200, 1)

    def test_parse_rejects_garbage(self):
        with pytest.raises(ValueError):
            parse_architecture("not-an-arch")

    def test_variable_count(self):
        arch = parse_architecture("13-[1x50]-1")
        assert arch.num_variables == 13 * 50 + 50 * 1 == 700

    def test_block_shapes(self):
        arch = parse_architecture("3-[4,5]-2")
        assert arch.block_shape(1) == (3, 4)
        assert arch.block_shape(2) == (4, 5)
        assert arch.block_shape(3) == (5, 2)


class TestSigmoid:
    def test_symmetry_point(self):
        assert sigmoid(0.0) == 0.5
        assert sigmoid_prime(0.0) == 0.25

    def test_symmetry_identity(self):
        for a in (1.0, 10.0, 100.0):
            assert sigmoid(-a) == pytest.approx(1.0 - sigmoid(a), abs=1e-15)

    def test_no_overflow_large_inputs(self):
        for a in (-1e3, 1e3):
            v = sigmoid(a)
            assert np.isfinite(v) and 0.0 <= v <= 1.0

    def test_prime_matches_central_difference(self):
        h = 1e-6
        for a in (-2.0, 0.3, 5.0):
            fd = (sigmoid(a + h) - sigmoid(a - h)) / (2 * h)
            assert sigmoid_prime(a) == pytest.approx(fd, rel=1e-7)


class TestInitWeights:
    def test_deterministic_per_seed(self):
        arch = parse_architecture("4-[2x5]-1")
        w1 = init_weights(arch, SeededRng(42))
        w2 = init_weights(arch, SeededRng(42))
        for l in range(1, arch.num_layers + 1):
            assert np.array_equal(w1.block(l), w2.block(l))

    def test_fan_in_bound(self):
        arch = parse_architecture("9-[3x7]-2")
        w = init_weights(arch, SeededRng(0))
        for l in range(1, arch.num_layers + 1):
            fan_in = w.block(l).shape[0]
            assert np.all(np.abs(w.block(l)) <= 1.0 / np.sqrt(fan_in))

    def test_seeds_differ(self):
        arch = parse_architecture("4-[1x3]-1")
        w1 = init_weights(arch, SeededRng(1))
        w2 = init_weights(arch, SeededRng(2))
        assert not np.array_equal(w1.block(1), w2.block(1))


class TestForward:
    def test_identity_linear_network(self):
        arch = Architecture(3, (3,))  # L=1: linear output only
        w = NetworkWeights(arch, [np.eye(3)])
        X = np.arange(12.0).reshape(4, 3)
        out, _ = forward(w, X)
        assert np.array_equal(out, X)

    def test_zero_inputs_give_half_hidden(self):
        arch, w, _ = random_net([5, 5, 1], seed=3, input_dim=4)
        X = np.zeros((3, 4))
        _, cache = forward(w, X)
        assert np.all(cache.z[1] == 0.5)

    def test_1_1_1_hand_evaluation(self):
        arch = Architecture(1, (1, 1))
        w = NetworkWeights(arch, [np.array([[1.0]]), np.array([[2.0]])])
        out, _ = forward(w, np.array([[0.0]]))
        assert out[0, 0] == 2.0 * sigmoid(0.0) == 1.0

    def test_output_layer_is_linear(self):
        arch, w, X = random_net([6, 2], seed=5, input_dim=4)
        out1, _ = forward(w, X)
        w.set_block(2, 2.0 * w.block(2))
        out2, _ = forward(w, X)
        assert np.array_equal(out2, 2.0 * out1)

    def test_shape_mismatch(self):
        arch, w, _ = random_net([3, 1], seed=0, input_dim=5)
        with pytest.raises(Exception):
            forward(w, np.ones((2, 4)))


class TestForwardPartial:
    @pytest.mark.parametrize("widths,input_dim", [
        ([8, 8, 8, 1], 4), ([5, 3, 2], 6), ([4], 3)])
    def test_matches_full_forward_for_all_layers(self, widths, input_dim):
        arch, w, X = random_net(widths, seed=11, input_dim=input_dim)
        rng = SeededRng(77)
        for l in range(1, arch.num_layers + 1):
            _, cache = forward(w, X)
            r, c = arch.block_shape(l)
            w.set_block(l, rng.uniform(-0.5, 0.5, size=(r, c)))
            out_partial, _ = forward_partial(w, cache, l)
            out_full, full_cache = forward(w, X)
            assert np.array_equal(out_partial, out_full)
            for j in range(l, arch.num_layers + 1):
                assert np.array_equal(cache.a[j], full_cache.a[j])
                assert np.array_equal(cache.z[j], full_cache.z[j])

    def test_from_layer_one_is_full_recompute(self):
        arch, w, X = random_net([4, 4, 1], seed=2, input_dim=3)
        _, cache = forward(w, X)
        out, _ = forward_partial(w, cache, 1)
        full, _ = forward(w, X)
        assert np.array_equal(out, full)

    def test_noop_when_unchanged(self):
        arch, w, X = random_net([4, 2], seed=8, input_dim=3)
        out0, cache = forward(w, X)
        for l in range(1, arch.num_layers + 1):
            out, _ = forward_partial(w, cache, l)
            assert np.array_equal(out, out0)

    def test_stale_cache_detected(self):
        arch, w, X = random_net([4, 4, 1], seed=4, input_dim=3)
        _, cache = forward(w, X)
        w.set_block(1, w.block(1) * 1.5)  # below from_layer=2
        with pytest.raises(StaleCacheError):
            forward_partial(w, cache, 2)
