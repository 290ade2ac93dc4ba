import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dtactive import learning
from dtactive.learning import (
    FEATURE_LEN,
    OUT_SCALE,
    POOL_H,
    POOL_W,
    Sample,
    TrainConfig,
    featurize,
    forward,
    grad_check,
    init_model,
    load_model,
    loss_and_grad,
    save_model,
    train,
)
from dtactive.world import DepthMap


def make_map(values, pitch=0.4, d_max=1.5):
    values = np.asarray(values, dtype=float)
    return DepthMap(width=values.shape[1], height=values.shape[0],
                    pitch=pitch, d_max=d_max, values=values)


def numeric_gradient(model, sample, eps=1e-5):
    """Independent central-difference oracle over every parameter."""
    grads = []
    for arrs in zip(model.weights, model.biases):
        for arr in arrs:
            g = np.zeros_like(arr)
            flat = arr.ravel()
            gflat = g.ravel()
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + eps
                lp, _ = loss_and_grad(model, [sample])
                flat[i] = orig - eps
                lm, _ = loss_and_grad(model, [sample])
                flat[i] = orig
                gflat[i] = (lp - lm) / (2 * eps)
            grads.append(g)
    return grads


class TestFeaturize:
    def test_zero_maps_zero_vector(self):
        z = np.zeros((86, 115))
        f = featurize(make_map(z), make_map(z), omega=0.0)
        assert f.shape == (FEATURE_LEN,)
        assert not f.any()

    def test_uniform_full_depth_pools_to_one(self):
        full = np.full((86, 115), 1.5)
        f = featurize(make_map(full), make_map(full), omega=0.0, d_max=1.5)
        assert np.allclose(f[:-1], 1.0)

    def test_delta_pixel_lands_in_one_cell(self):
        # hand-computed: 48x64 map pools in 4x4-pixel cells; a single pixel of
        # depth d contributes d / (16 * d_max) to exactly one cell
        left = np.zeros((48, 64))
        left[5, 9] = 1.2
        f = featurize(make_map(left), make_map(np.zeros((48, 64))), omega=0.0, d_max=1.5)
        blocks = f[: POOL_H * POOL_W].reshape(POOL_H, POOL_W)
        expect = 1.2 / (16 * 1.5)
        assert blocks[1, 2] == pytest.approx(expect, rel=1e-12)
        blocks[1, 2] = 0.0
        assert not blocks.any()
        assert not f[POOL_H * POOL_W: -1].any()

    def test_scalar_channel_scaling(self):
        z = np.zeros((24, 32))
        f = featurize(make_map(z), make_map(z), omega=0.5, omega_max=2.0)
        assert f[-1] == pytest.approx(0.25)

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(ValueError):
            featurize(make_map(np.zeros((24, 32))), make_map(np.zeros((24, 30))), 0.0)


class TestForward:
    def test_zero_weights_give_mid_output(self):
        m = init_model(learning.ROLE_RECTIFY, seed=0)
        for w in m.weights:
            w[:] = 0.0
        assert forward(m, np.zeros(FEATURE_LEN)) == pytest.approx(0.6, rel=1e-12)

    @given(st.integers(0, 2 ** 31 - 1))
    @settings(max_examples=25, deadline=None)
    def test_output_in_range(self, seed):
        rng = np.random.default_rng(seed)
        m = init_model(learning.ROLE_RECTIFY, seed=seed % 1000)
        f = rng.uniform(-5, 5, FEATURE_LEN)
        out = forward(m, f)
        assert 0.0 < out <= OUT_SCALE

    def test_deterministic(self):
        m = init_model(learning.ROLE_POLICY, seed=7)
        f = np.linspace(0, 1, FEATURE_LEN)
        assert forward(m, f) == forward(m, f)

    def test_wrong_length_rejected(self):
        m = init_model(learning.ROLE_RECTIFY, seed=0)
        with pytest.raises(ValueError):
            forward(m, np.zeros(10))


class TestLossAndGrad:
    def test_perfect_predictions_zero_loss_zero_grad(self):
        # identity-head linear model with zero weights predicts 0 exactly
        m = init_model(learning.ROLE_RECTIFY, seed=0, in_dim=6, hidden=(4,),
                       hidden_act="identity", output_act="identity")
        for w in m.weights:
            w[:] = 0.0
        batch = [Sample(np.ones(6), 0.0), Sample(np.full(6, -2.0), 0.0)]
        loss, grads = loss_and_grad(m, batch)
        assert loss == 0.0
        assert all(not g.any() for g in grads["weights"])
        assert all(not g.any() for g in grads["biases"])

    def test_loss_nonnegative(self):
        m = init_model(learning.ROLE_RECTIFY, seed=1, in_dim=8, hidden=(5, 3))
        rng = np.random.default_rng(0)
        batch = [Sample(rng.normal(size=8), rng.uniform(0, 1.2)) for _ in range(16)]
        loss, _ = loss_and_grad(m, batch)
        assert loss >= 0.0

    def test_gradient_matches_numeric_oracle(self):
        m = init_model(learning.ROLE_RECTIFY, seed=5, in_dim=7, hidden=(6, 4))
        rng = np.random.default_rng(2)
        sample = Sample(rng.normal(size=7), 0.8)
        _, grads = loss_and_grad(m, [sample])
        numeric = numeric_gradient(m, sample)
        analytic = []
        for gw, gb in zip(grads["weights"], grads["biases"]):
            analytic.extend([gw, gb])
        for a, n in zip(analytic, numeric):
            denom = np.maximum(1e-8, np.abs(a) + np.abs(n))
            assert np.max(np.abs(a - n) / denom) < 1e-4

    def test_empty_batch_rejected(self):
        m = init_model(learning.ROLE_RECTIFY, seed=0, in_dim=4, hidden=(3,))
        with pytest.raises(ValueError):
            loss_and_grad(m, [])


class TestGradCheck:
    def test_random_small_models(self):
        rng = np.random.default_rng(10)
        for trial in range(10):
            m = init_model(learning.ROLE_RECTIFY, seed=trial, in_dim=9, hidden=(6, 3))
            s = Sample(rng.normal(size=9), rng.uniform(0.1, 1.1))
            assert grad_check(m, s, eps=1e-5) < 1e-4

    def test_linear_model_nearly_exact(self):
        # identity activations: the loss is quadratic in each parameter, so the
        # central difference is exact up to rounding
        m = init_model(learning.ROLE_RECTIFY, seed=2, in_dim=5, hidden=(4,),
                       hidden_act="identity", output_act="identity")
        s = Sample(np.array([0.3, -0.1, 0.7, 0.2, -0.5]), 0.4)
        assert grad_check(m, s, eps=1e-4) < 1e-10

    def test_zero_eps_rejected(self):
        m = init_model(learning.ROLE_RECTIFY, seed=0, in_dim=4, hidden=(3,))
        with pytest.raises(ValueError):
            grad_check(m, Sample(np.zeros(4), 0.5), eps=0.0)

    def test_subset_indices(self):
        m = init_model(learning.ROLE_RECTIFY, seed=3)
        s = Sample(np.random.default_rng(0).uniform(0, 1, FEATURE_LEN), 0.9)
        err = grad_check(m, s, eps=1e-5, param_indices=np.arange(0, 200, 7))
        assert err < 1e-4


class TestTrain:
    def toy_dataset(self, label, n=128, dim=10, seed=0):
        rng = np.random.default_rng(seed)
        return [Sample(rng.uniform(0, 1, dim), label) for _ in range(n)]

    def test_constant_label_convergence(self):
        data = self.toy_dataset(0.85)
        cfg = TrainConfig(lr=0.05, epochs=300, batch=32, momentum=0.9, seed=1)
        m = train(data, cfg, learning.ROLE_RECTIFY)
        preds = [forward(m, s.features) for s in data[:32]]
        assert np.mean(np.abs(np.array(preds) - 0.85)) < 0.02

    def test_seeded_training_bit_identical(self):
        data = self.toy_dataset(0.5, n=64)
        cfg = TrainConfig(lr=1e-2, epochs=5, batch=16, seed=42)
        m1 = train(data, cfg, learning.ROLE_RECTIFY)
        m2 = train(data, cfg, learning.ROLE_RECTIFY)
        for w1, w2 in zip(m1.weights, m2.weights):
            assert np.array_equal(w1, w2)
        for b1, b2 in zip(m1.biases, m2.biases):
            assert np.array_equal(b1, b2)

    def test_loss_decreases(self):
        rng = np.random.default_rng(3)
        data = [Sample(rng.uniform(0, 1, 12), float(np.clip(0.5 + 0.4 * f[0] - 0.2 * f[3], 0.05, 1.1)))
                for f in [rng.uniform(0, 1, 12) for _ in range(256)]]
        cfg = TrainConfig(lr=1e-2, epochs=40, batch=32, seed=7)
        m0 = init_model(learning.ROLE_RECTIFY, cfg.seed, in_dim=12)
        before = learning.dataset_loss(m0, data)
        m = train(data, cfg, learning.ROLE_RECTIFY)
        after = learning.dataset_loss(m, data)
        assert after < before

    def test_empty_dataset_rejected(self):
        with pytest.raises(ValueError):
            train([], TrainConfig(), learning.ROLE_RECTIFY)
        with pytest.raises(ValueError):
            train([Sample(np.zeros(4), math.nan)], TrainConfig(), learning.ROLE_RECTIFY)

    def test_bad_role_rejected(self):
        with pytest.raises(ValueError):
            train(self.toy_dataset(0.5, n=4), TrainConfig(epochs=1), "bogus")


class TestCheckpoint:
    def test_round_trip_bit_exact(self, tmp_path):
        m = init_model(learning.ROLE_POLICY, seed=11)
        m.weights[0][3, 7] = 1.0 / 3.0  # repr round-trip stress value
        path = tmp_path / "policy.model"
        save_model(m, path, extra_comment="config_sha256=deadbeef seed=7")
        m2 = load_model(path)
        assert m2.role == learning.ROLE_POLICY
        assert m2.dims == m.dims
        for w1, w2 in zip(m.weights, m2.weights):
            assert np.array_equal(w1, w2)
        for b1, b2 in zip(m.biases, m2.biases):
            assert np.array_equal(b1, b2)

    def test_magic_line(self, tmp_path):
        m = init_model(learning.ROLE_RECTIFY, seed=0)
        path = tmp_path / "n.model"
        save_model(m, path)
        first = open(path).readline().strip()
        assert first == "DTACTIVE-MODEL v1 N"

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "junk.model"
        path.write_text("NOT-A-MODEL v9 X\n1 1\n0.0\n0.0\n")
        with pytest.raises(ValueError):
            load_model(path)
