import numpy as np
import pytest

from wavesim.network import (DX, DXX, DZ, DZZ, VALUE, Architecture,
                             NetworkParams, backprop_params, encode_jet,
                             encoded_dim, forward_jet, forward_values,
                             init_params, output_apply)


def _net(K=1, hidden=(6, 5), seed=3):
    params = init_params(Architecture(K, hidden), seed)
    rng = np.random.default_rng(seed + 100)
    for b in params.biases:
        b[:] = rng.normal(scale=0.5, size=b.shape)
    return params


def _fd_planes(fn, pts, h=1e-4):
    """Central differences of ``fn(points)`` along x and z."""
    ex = np.array([h, 0.0])
    ez = np.array([0.0, h])
    f0 = fn(pts)
    fxp, fxm = fn(pts + ex), fn(pts - ex)
    fzp, fzm = fn(pts + ez), fn(pts - ez)
    return ((fxp - fxm) / (2 * h), (fzp - fzm) / (2 * h),
            (fxp - 2 * f0 + fxm) / h ** 2, (fzp - 2 * f0 + fzm) / h ** 2)


class TestEncoder:
    def test_dimension(self):
        assert encoded_dim(3) == 18
        assert encode_jet(np.zeros((4, 2)), 3).shape == (5, 4, 18)

    def test_identity_feature(self):
        jet = encode_jet([[0.7, -0.2]], 0)
        np.testing.assert_array_equal(jet[:, 0, 0], [0.7, 1, 0, 0, 0])
        np.testing.assert_array_equal(jet[:, 0, 1], [-0.2, 0, 1, 0, 0])

    def test_sin_at_origin(self):
        jet = encode_jet([[0.0, 0.0]], 0)
        np.testing.assert_array_equal(jet[:, 0, 2], [0, 1, 0, 0, 0])

    def test_cos_level_two(self):
        jet = encode_jet([[np.pi / 8, 0.0]], 2)
        # columns per level: sin x, cos x, sin z, cos z
        col = 2 + 4 * 2 + 1
        assert jet[VALUE, 0, col] == pytest.approx(0.0, abs=1e-15)
        assert jet[DX, 0, col] == pytest.approx(-4.0)
        assert jet[DXX, 0, col] == pytest.approx(0.0, abs=1e-14)

    def test_axis_separation(self):
        jet = encode_jet(np.random.default_rng(0).normal(size=(20, 2)), 3)
        z_cols = [1] + [2 + 4 * k + j for k in range(4) for j in (2, 3)]
        x_cols = [0] + [2 + 4 * k + j for k in range(4) for j in (0, 1)]
        assert not jet[DX][:, z_cols].any() and not jet[DXX][:, z_cols].any()
        assert not jet[DZ][:, x_cols].any() and not jet[DZZ][:, x_cols].any()

    def test_matches_finite_differences(self):
        pts = np.random.default_rng(1).uniform(-1, 1, size=(30, 2))
        jet = encode_jet(pts, 3)
        fd = _fd_planes(lambda p: encode_jet(p, 3)[VALUE], pts)
        for plane, approx in zip((DX, DZ, DXX, DZZ), fd):
            np.testing.assert_allclose(jet[plane], approx, atol=2e-6)


class TestInit:
    def test_deterministic(self):
        a = init_params(Architecture(2, (8, 4)), 11)
        b = init_params(Architecture(2, (8, 4)), 11)
        for x, y in zip(a.hidden() + [a.W_out], b.hidden() + [b.W_out]):
            np.testing.assert_array_equal(x, y)

    def test_zero_bias_and_output(self):
        p = init_params(Architecture(), 0)
        assert all(not b.any() for b in p.biases)
        assert p.W_out.shape == (64, 2) and not p.W_out.any()

    def test_variance(self):
        p = init_params(Architecture(3, (10000,)), 0)
        w = p.weights[0]
        assert w.var() == pytest.approx((1 / 3) * 6 / w.shape[0], rel=0.05)
        assert np.abs(w).max() <= np.sqrt(6 / w.shape[0])

    def test_shapes(self):
        arch = Architecture(1, (7, 3))
        p = init_params(arch, 0)
        assert [w.shape for w in p.weights] == [(10, 7), (7, 3)]
        assert arch.P == 3

    @pytest.mark.parametrize("kw", [dict(K=-1), dict(hidden_sizes=()),
                                    dict(hidden_sizes=(4, 0)), dict(out_dim=3)])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            Architecture(**kw)


class TestForward:
    def test_zero_network(self):
        p = init_params(Architecture(1, (4, 3)), 0)
        for w in p.weights:
            w[:] = 0.0
        H = forward_jet(p, encode_jet(np.ones((5, 2)), 1))
        assert not H.any()

    def test_single_neuron_hand_value(self):
        w = np.zeros((encoded_dim(0), 1))
        w[0, 0] = 1.0
        p = NetworkParams([w], [np.zeros(1)], np.zeros((1, 2)), Architecture(0, (1,)))
        H = forward_jet(p, encode_jet([[np.pi / 2, 0.3]], 0))
        assert H[VALUE, 0, 0] == pytest.approx(1.0)
        assert H[DX, 0, 0] == pytest.approx(0.0, abs=1e-15)
        assert H[DXX, 0, 0] == pytest.approx(-1.0)
        assert H[DZ, 0, 0] == 0.0 and H[DZZ, 0, 0] == 0.0

    def test_value_plane_is_plain_forward(self):
        p = _net()
        pts = np.random.default_rng(2).uniform(-1, 1, (40, 2))
        jet = encode_jet(pts, 1)
        np.testing.assert_allclose(forward_jet(p, jet)[VALUE],
                                   forward_values(p, jet[VALUE]), rtol=1e-14)

    def test_jets_match_finite_differences(self):
        p = _net(K=2, hidden=(16, 8))
        pts = np.random.default_rng(4).uniform(-1, 1, (50, 2))
        H = forward_jet(p, encode_jet(pts, 2))
        fd = _fd_planes(lambda q: forward_values(p, encode_jet(q, 2)[VALUE]), pts)
        for plane, approx in zip((DX, DZ, DXX, DZZ), fd):
            scale = np.abs(H[plane]).max()
            assert np.abs(H[plane] - approx).max() <= 1e-5 * scale

    def test_shape_mismatch(self):
        p = _net(K=1)
        with pytest.raises(ValueError):
            forward_jet(p, encode_jet(np.zeros((2, 2)), 2))


class TestOutput:
    def test_zero(self):
        assert not output_apply(np.ones((3, 4)), np.zeros((4, 2))).any()

    def test_rank_one(self):
        np.testing.assert_array_equal(output_apply(np.ones((3, 1)), [[2.0, -1.0]]),
                                      [[2, -1]] * 3)

    def test_hand_product(self):
        H = np.array([[1.0, 2.0], [0.0, 1.0], [3.0, -1.0]])
        W = np.array([[1.0, 4.0], [2.0, 0.5]])
        np.testing.assert_array_equal(output_apply(H, W),
                                      [[5.0, 5.0], [2.0, 0.5], [1.0, 11.5]])


class TestBackprop:
    def _objective(self, p, jet, U):
        return float(np.sum(forward_jet(p, jet) * U))

    def test_zero_upstream(self):
        p = _net()
        jet = encode_jet(np.ones((3, 2)), 1)
        gws, gbs = backprop_params(p, jet, np.zeros((5, 3, 5)))
        assert all(not g.any() for g in gws + gbs)

    def test_linear_in_upstream(self):
        p = _net()
        rng = np.random.default_rng(0)
        jet = encode_jet(rng.normal(size=(7, 2)), 1)
        U = rng.normal(size=(5, 7, 5))
        g1 = backprop_params(p, jet, U)
        g2 = backprop_params(p, jet, 2.5 * U)
        for a, b in zip(g1[0] + g1[1], g2[0] + g2[1]):
            np.testing.assert_allclose(b, 2.5 * a, rtol=1e-13)

    def test_matches_finite_differences(self):
        # seeded 8-neuron network, random upstream weighting of all planes
        p = _net(K=1, hidden=(5, 3))
        rng = np.random.default_rng(9)
        jet = encode_jet(rng.uniform(-1, 1, (12, 2)), 1)
        U = rng.normal(size=(5, 12, 3))
        gws, gbs = backprop_params(p, jet, U)
        h = 1e-6
        for arrays, grads in ((p.weights, gws), (p.biases, gbs)):
            for arr, g in zip(arrays, grads):
                for idx in np.ndindex(arr.shape):
                    old = arr[idx]
                    arr[idx] = old + h
                    fp = self._objective(p, jet, U)
                    arr[idx] = old - h
                    fm = self._objective(p, jet, U)
                    arr[idx] = old
                    fd = (fp - fm) / (2 * h)
                    assert abs(g[idx] - fd) <= 1e-4 * abs(fd) + 1e-7
