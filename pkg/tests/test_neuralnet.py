import hashlib
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import conv1d_loops, matvec_loops
from slris import neuralnet as nn
from slris.dataset import build_dataset, split
from slris.errors import BadMagicError, PayloadSizeError, TruncatedFileError, VersionMismatchError
from slris.signalgen import SignalClass, make_window


class TestConv1d:
    def test_identity_kernel(self, rng):
        x = rng.standard_normal((1, 10))
        out = nn.conv1d_forward(x, np.ones((1, 1, 1)), np.zeros(1), "identity")
        np.testing.assert_array_equal(out, x)

    @pytest.mark.parametrize("b", [-0.7, 0.0, 1.3])
    def test_zero_input_gives_relu_bias(self, b):
        out = nn.conv1d_forward(np.zeros((2, 8)), np.ones((3, 2, 3)), np.full(3, b), "relu")
        assert out.shape == (3, 6)
        assert np.all(out == max(b, 0.0))

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_loop_oracle(self, seed):
        rng = np.random.default_rng(seed)
        x, w, b = rng.standard_normal((2, 8)), rng.standard_normal((3, 2, 3)), rng.standard_normal(3)
        ref = np.array(conv1d_loops(x.tolist(), w.tolist(), b.tolist()))
        np.testing.assert_allclose(nn.conv1d_forward(x, w, b, "identity"), ref, rtol=0, atol=1e-12)
        np.testing.assert_allclose(nn.conv1d_forward(x, w, b, "relu"), np.maximum(ref, 0), rtol=0, atol=1e-12)

    def test_batch_equals_per_sample(self, rng):
        x, w, b = rng.standard_normal((4, 2, 16)), rng.standard_normal((5, 2, 3)), rng.standard_normal(5)
        batched = nn.conv1d_forward(x, w, b)
        for i in range(4):
            np.testing.assert_allclose(batched[i], nn.conv1d_forward(x[i], w, b), atol=1e-13)

    def test_too_short(self):
        with pytest.raises(ValueError):
            nn.conv1d_forward(np.zeros((1, 2)), np.zeros((1, 1, 3)), np.zeros(1))


class TestDense:
    def test_identity(self, rng):
        x = rng.standard_normal(6)
        np.testing.assert_array_equal(nn.dense_forward(x, np.eye(6), np.zeros(6)), x)

    def test_zero_weights(self, rng):
        b = rng.standard_normal(3)
        np.testing.assert_array_equal(nn.dense_forward(rng.standard_normal(5), np.zeros((3, 5)), b), b)

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_loop_oracle(self, seed):
        rng = np.random.default_rng(seed)
        W, x, b = rng.standard_normal((7, 11)), rng.standard_normal(11), rng.standard_normal(7)
        np.testing.assert_allclose(nn.dense_forward(x, W, b), matvec_loops(W.tolist(), x.tolist(), b.tolist()),
                                   rtol=0, atol=1e-12)

    def test_mismatch(self):
        with pytest.raises(ValueError):
            nn.dense_forward(np.zeros(3), np.zeros((2, 4)), np.zeros(2))


class TestSoftmaxAndLoss:
    def test_uniform(self):
        np.testing.assert_allclose(nn.softmax(np.zeros(4)), 0.25, atol=1e-15)

    @pytest.mark.parametrize("c", [-1e3, -3.0, 0.0, 7.5, 1e3])
    def test_constant_logits_are_uniform(self, c):
        np.testing.assert_allclose(nn.softmax(np.full(4, c)), 0.25, atol=1e-15)

    def test_dominant_logit(self):
        p = nn.softmax(np.array([10.0, 0, 0, 0]))
        # e^10 / (e^10 + 3) = 0.99986382
        assert p[0] == pytest.approx(0.9998638187585689, abs=1e-15)
        assert p[0] > 0.9998

    def test_cross_entropy_values(self):
        assert nn.cross_entropy(np.full(4, 0.25), 2) == pytest.approx(math.log(4), abs=1e-12)
        assert nn.cross_entropy(np.array([1.0, 0, 0, 0]), 0) == 0.0
        assert nn.cross_entropy_logits(np.array([10.0, 0, 0, 0]), 0) == pytest.approx(1.3619051493829723e-4, rel=1e-9)

    def test_cross_entropy_extreme_logits_stay_finite(self):
        assert math.isfinite(nn.cross_entropy_logits(np.array([1e4, -1e4, 0, 0]), 1))

    @settings(max_examples=200, deadline=None)
    @given(logits=arrays(np.float64, 4, elements=st.floats(-50, 50)), shift=st.floats(-100, 100))
    def test_softmax_properties(self, logits, shift):
        p = nn.softmax(logits)
        assert np.all(p > 0)
        assert abs(p.sum() - 1.0) <= 1e-12
        np.testing.assert_allclose(nn.softmax(logits + shift), p, rtol=0, atol=1e-12)
        assert np.argmax(nn.softmax(logits + shift)) == np.argmax(p)


class TestAdam:
    def test_zero_gradient_keeps_params(self):
        params = {"w": np.array([1.0, -2.0])}
        nn.adam_step(params, {"w": np.zeros(2)}, nn.AdamState(), nn.TrainConfig())
        np.testing.assert_array_equal(params["w"], [1.0, -2.0])

    @pytest.mark.parametrize("g", [1e-3, 0.5, -7.0])
    def test_first_step_has_lr_magnitude(self, g):
        cfg = nn.TrainConfig(learning_rate=0.01)
        params = {"w": np.zeros(3)}
        nn.adam_step(params, {"w": np.full(3, g)}, nn.AdamState(), cfg)
        # m_hat / sqrt(v_hat) = g / |g|, so the step is lr * |g| / (|g| + eps)
        np.testing.assert_allclose(params["w"], -0.01 * np.sign(g) * abs(g) / (abs(g) + cfg.epsilon), rtol=1e-12)

    def test_first_step_is_scale_invariant(self):
        params = {"a": np.zeros(1), "b": np.zeros(1)}
        nn.adam_step(params, {"a": np.array([0.3]), "b": np.array([0.6])}, nn.AdamState(), nn.TrainConfig())
        assert params["a"][0] == pytest.approx(params["b"][0], rel=1e-7)

    def test_matches_hand_rolled_two_steps(self):
        cfg = nn.TrainConfig(learning_rate=0.1, beta1=0.8, beta2=0.9, epsilon=1e-8)
        params, state = {"w": np.array([0.5])}, nn.AdamState()
        g1, g2 = 0.2, -0.4
        nn.adam_step(params, {"w": np.array([g1])}, state, cfg)
        nn.adam_step(params, {"w": np.array([g2])}, state, cfg)
        m1, v1 = 0.2 * g1, 0.1 * g1**2
        w = 0.5 - 0.1 * (m1 / 0.2) / (math.sqrt(v1 / 0.1) + 1e-8)
        m2, v2 = 0.8 * m1 + 0.2 * g2, 0.9 * v1 + 0.1 * g2**2
        w -= 0.1 * (m2 / (1 - 0.8**2)) / (math.sqrt(v2 / (1 - 0.9**2)) + 1e-8)
        assert params["w"][0] == pytest.approx(w, rel=1e-12)
        assert state.t == 2

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            nn.adam_step({"w": np.zeros(2)}, {"w": np.zeros(3)}, nn.AdamState(), nn.TrainConfig())

    @pytest.mark.parametrize("kw", [dict(learning_rate=0), dict(beta1=1.0), dict(beta2=0.0)])
    def test_config_validation(self, kw):
        with pytest.raises(ValueError):
            nn.TrainConfig(**kw)


class TestModel:
    def test_default_architecture(self):
        m = nn.init_model(512)
        assert (m.F1, m.k1, m.F2, m.k2, m.H) == (16, 5, 32, 5, 64)
        assert m.params["dense1_w"].shape == (64, 32 * 504)
        expected = 16 * 2 * 5 + 16 + 32 * 16 * 5 + 32 + 64 * 32 * 504 + 64 + 4 * 64 + 4
        assert m.n_params == expected

    def test_init_scales(self):
        m = nn.init_model(128, seed=0)
        assert np.abs(m.params["conv1_w"]).max() <= math.sqrt(6 / 10)
        assert np.abs(m.params["out_w"]).max() <= math.sqrt(1 / 64)
        assert all(np.all(m.params[n] == 0) for n in nn.PARAM_ORDER if n.endswith("_b"))

    def test_predict_sums_to_one(self, rng):
        m = nn.init_model(128, seed=1)
        for cls in SignalClass:
            p = nn.predict(m, make_window(cls, 128, 10.0, rng=rng))
            assert abs(p.sum() - 1.0) <= 1e-12

    def test_zero_model_is_uniform(self, rng):
        p = nn.predict(nn.zero_model(32), make_window(SignalClass.BOTH, 32, 5.0, rng=rng))
        np.testing.assert_allclose(p, 0.25, atol=1e-15)

    def test_predict_length_mismatch(self, rng):
        with pytest.raises(ValueError):
            nn.predict(nn.init_model(32), make_window(SignalClass.BOTH, 128, 5.0, rng=rng))

    def test_predict_accepts_channel_array(self, rng):
        m = nn.init_model(32, seed=3)
        w = make_window(SignalClass.I_ONLY, 32, 5.0, rng=rng)
        np.testing.assert_array_equal(nn.predict(m, w), nn.predict(m, w.as_channels()))


class TestTraining:
    @pytest.fixture(scope="class")
    @staticmethod
    def tiny_split():
        ds = build_dataset(10, 32, seed=11)
        return split(ds, 0.8, seed=0)

    def test_overfits_tiny_set(self, tiny_split):
        model, report = nn.train(nn.init_model(32, seed=0), tiny_split, nn.TrainConfig(epochs=200, batch_size=8))
        assert len(tiny_split.train) == 32
        train_pred = nn.predict_classes(model, tiny_split.train.iq)
        assert np.mean(train_pred == tiny_split.train.labels) >= 0.99
        assert report.epoch_loss[-1] < report.epoch_loss[0]

    def test_initial_loss_near_ln4(self):
        sp = split(build_dataset(100, 128, seed=1), 0.8, seed=0)
        _, report = nn.train(nn.init_model(128, seed=0), sp, nn.TrainConfig(epochs=0))
        assert report.initial_loss == pytest.approx(math.log(4), abs=0.1)

    def test_deterministic(self, tiny_split):
        cfg = nn.TrainConfig(epochs=3, batch_size=8, seed=5)
        a, ra = nn.train(nn.init_model(32, seed=1), tiny_split, cfg)
        b, rb = nn.train(nn.init_model(32, seed=1), tiny_split, cfg)
        assert nn.model_to_bytes(a) == nn.model_to_bytes(b)
        assert ra.epoch_loss == rb.epoch_loss

    def test_report_consistency(self, tiny_split):
        _, report = nn.train(nn.init_model(32, seed=0), tiny_split, nn.TrainConfig(epochs=2, batch_size=8))
        assert len(report.epoch_loss) == len(report.epoch_accuracy) == 2
        assert report.confusion.sum(axis=1).tolist() == tiny_split.test.class_counts.tolist()

    def test_input_model_untouched(self, tiny_split):
        init = nn.init_model(32, seed=0)
        before = nn.model_to_bytes(init)
        nn.train(init, tiny_split, nn.TrainConfig(epochs=1, batch_size=8))
        assert nn.model_to_bytes(init) == before

    def test_errors(self, tiny_split):
        with pytest.raises(ValueError):
            nn.train(nn.init_model(128), tiny_split, nn.TrainConfig(epochs=1))
        empty = split(build_dataset(1, 32, seed=0), 0.5, seed=0)
        empty.train = empty.train.subset(slice(0, 0))
        with pytest.raises(ValueError):
            nn.train(nn.init_model(32), empty, nn.TrainConfig(epochs=1))


class TestCheckpoint:
    def test_round_trip_predictions(self, tmp_path, rng):
        m = nn.init_model(128, seed=4)
        path = tmp_path / "m.rism"
        nn.save_model(m, path)
        back = nn.load_model(path)
        probe = make_window(SignalClass.BOTH, 128, 7.0, rng=rng)
        assert nn.predict(back, probe).tobytes() == nn.predict(m, probe).tobytes()

    def test_digest_stable(self):
        digest = lambda: hashlib.sha256(nn.model_to_bytes(nn.init_model(32, seed=8))).hexdigest()  # noqa: E731
        assert digest() == digest()

    def test_header(self):
        buf = nn.model_to_bytes(nn.init_model(32, seed=0))
        assert buf[:4] == b"RISM"
        assert int.from_bytes(buf[4:6], "little") == nn.MODEL_VERSION

    def test_bad_magic(self):
        buf = bytearray(nn.model_to_bytes(nn.init_model(32)))
        buf[0] = ord("X")
        with pytest.raises(BadMagicError):
            nn.model_from_bytes(bytes(buf))

    def test_version(self):
        buf = bytearray(nn.model_to_bytes(nn.init_model(32)))
        buf[4] = 99
        with pytest.raises(VersionMismatchError):
            nn.model_from_bytes(bytes(buf))

    def test_truncated(self):
        buf = nn.model_to_bytes(nn.init_model(32))
        with pytest.raises(TruncatedFileError):
            nn.model_from_bytes(buf[:-8])
        with pytest.raises(TruncatedFileError):
            nn.model_from_bytes(buf[:12])

    def test_header_inconsistent_with_payload(self):
        buf = bytearray(nn.model_to_bytes(nn.init_model(32)))
        buf[6:10] = (128).to_bytes(4, "little")  # claim L=128 but keep the L=32 payload
        with pytest.raises(TruncatedFileError):
            nn.model_from_bytes(bytes(buf))
        buf = bytearray(nn.model_to_bytes(nn.init_model(128)))
        buf[6:10] = (32).to_bytes(4, "little")
        with pytest.raises(PayloadSizeError):
            nn.model_from_bytes(bytes(buf))
