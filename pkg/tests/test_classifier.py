import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import cross_entropy_loss, finite_difference_grads
from uasw.classifier import (
    ALL_LABELS,
    MAGIC,
    Classification,
    MlpModel,
    ObstacleLabel,
    TrainConfig,
    classify,
    ensemble_classify,
    forward,
    init_model,
    label_targets,
    logits,
    loss_and_grads,
    macro_f1,
    model_from_bytes,
    model_to_bytes,
    train,
)


def rel_err(a, b):
    return np.linalg.norm(a - b) / max(np.linalg.norm(a), np.linalg.norm(b), 1e-12)


def random_batch(rng, n, n_in=15):
    x = rng.normal(size=(n, n_in))
    t = np.stack([rng.integers(0, k, n) for k in (4, 2, 2)], axis=1)
    return x, t


class TestForward:
    def test_zero_model_uniform(self, rng):
        m = init_model(zero=True)
        pm, ps, pv = forward(rng.normal(size=15), m)
        np.testing.assert_allclose(pm, [0.25] * 4)
        np.testing.assert_allclose(ps, [0.5, 0.5])
        np.testing.assert_allclose(pv, [0.5, 0.5])

    @settings(max_examples=100)
    @given(st.lists(st.floats(-1e3, 1e3), min_size=15, max_size=15), st.integers(0, 1000))
    def test_heads_sum_to_one(self, x, seed):
        m = init_model(rng=np.random.default_rng(seed))
        for p in forward(np.array(x), m):
            assert abs(p.sum() - 1) < 1e-9
            assert np.all(p >= 0)

    def test_feature_length_checked(self):
        with pytest.raises(ValueError):
            forward(np.zeros(14), init_model())

    def test_batch_shape(self, rng):
        probs = forward(rng.normal(size=(5, 15)), init_model())
        assert [p.shape for p in probs] == [(5, 4), (5, 2), (5, 2)]


class TestGradients:
    def test_loss_matches_loop_oracle(self, rng):
        m = init_model(rng=rng)
        x, t = random_batch(rng, 3)
        assert loss_and_grads(m, x, t)[0] == pytest.approx(cross_entropy_loss(m, x, t), rel=1e-12)

    @pytest.mark.parametrize("hidden", [(12, 12), (12,), ()])
    def test_against_central_differences(self, hidden):
        rng = np.random.default_rng(len(hidden))
        m = init_model(hidden=hidden, rng=rng)
        for b in m.biases + m.head_biases:
            b += rng.normal(scale=0.1, size=b.shape)
        x, t = random_batch(rng, 3)
        _, analytic = loss_and_grads(m, x, t)
        numeric = finite_difference_grads(m, x, t, lambda mm, xx, tt: loss_and_grads(mm, xx, tt)[0])
        for a, n in zip(analytic, numeric):
            assert rel_err(a, n) < 1e-4


def two_cluster_set(rng, n=200):
    centers = np.stack([np.full(15, -2.0), np.full(15, 2.0)])
    labels_for = [ObstacleLabel("glass", "dry", "static"), ObstacleLabel("concrete", "wet", "mobile")]
    xs, ys = [], []
    for i in range(n):
        c = i % 2
        xs.append(centers[c] + rng.normal(scale=0.3, size=15))
        ys.append(labels_for[c])
    return np.array(xs), ys, centers, labels_for


class TestTraining:
    def test_separable_clusters(self, rng):
        x, y, centers, labs = two_cluster_set(rng)
        # every class must exist in the training split: one far-off sample each
        extra_x = 10.0 * np.eye(15)[np.arange(len(ALL_LABELS)) % 15] * np.where(np.arange(16) < 8, 1, -1)[:, None]
        m, _ = train(
            np.vstack([x, extra_x]), y + list(ALL_LABELS), x, y,
            config=TrainConfig(max_epochs=300, seed=1),
        )
        for c, lab in zip(centers, labs):
            p_mat = forward(c, m)[0]
            assert p_mat[lab.indices()[0]] >= 0.99

    def test_loss_decreases(self, small_dataset):
        xt, yt, xv, yv = small_dataset
        _, hist = train(xt, yt, xv, yv, config=TrainConfig(max_epochs=5, patience=100))
        assert hist.train_loss[5] < hist.train_loss[0]

    def test_deterministic(self, small_dataset):
        xt, yt, xv, yv = small_dataset
        cfg = TrainConfig(max_epochs=8, seed=3)
        a, _ = train(xt, yt, xv, yv, config=cfg)
        b, _ = train(xt, yt, xv, yv, config=cfg)
        assert all(p.tobytes() == q.tobytes() for p, q in zip(a.params(), b.params()))

    def test_missing_class_rejected(self, rng):
        x = rng.normal(size=(10, 15))
        y = [ObstacleLabel("glass", "dry", "static")] * 10
        with pytest.raises(ValueError, match="absent"):
            train(x, y, x, y)

    def test_best_validation_model_returned(self, small_dataset):
        xt, yt, xv, yv = small_dataset
        m, hist = train(xt, yt, xv, yv, config=TrainConfig(max_epochs=30, patience=5))
        best = min(hist.val_loss)
        assert hist.val_loss[hist.best_epoch] == best
        xs = (np.asarray(xv) - m.scaler_mean) / m.scaler_std
        assert loss_and_grads(m, xs, label_targets(yv))[0] == pytest.approx(best)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            TrainConfig(learning_rate=0)
        with pytest.raises(ValueError):
            TrainConfig(batch_size=0)


@pytest.fixture(scope="module")
def small_dataset():
    from uasw.datastore import CorpusSpec, build_dataset, generate_corpus

    ds = build_dataset(generate_corpus(CorpusSpec(per_combination=20), seed=11), seed=0)
    xt, yt = ds.split("train")
    xv, yv = ds.split("val")
    return xt, yt, xv, yv


class TestClassify:
    def test_uniform_tie_breaks_low(self, rng):
        c = classify(rng.normal(size=15), init_model(zero=True))
        assert c.label == ObstacleLabel("glass", "dry", "static")
        assert c.confidence == (0.25, 0.5, 0.5)

    def test_scaler_folding(self, rng):
        m = init_model(rng=rng)
        m.scaler_mean = rng.normal(size=15)
        m.scaler_std = rng.uniform(0.5, 2.0, 15)
        a, c = rng.uniform(0.5, 3.0), rng.normal(size=15)
        folded = m.copy()
        folded.scaler_mean = a * m.scaler_mean + c
        folded.scaler_std = a * m.scaler_std
        for _ in range(20):
            x = rng.normal(size=15) * 3
            assert classify(x, m).label == classify(a * x + c, folded).label

    def test_monotone_logit_transform(self, rng):
        m = init_model(rng=rng)
        for k in range(3):
            warped = m.copy()
            warped.head_weights[k] *= 3.7
            warped.head_biases[k] = warped.head_biases[k] * 3.7 + 11.0
            for _ in range(20):
                x = rng.normal(size=15)
                assert classify(x, m).label == classify(x, warped).label


class TestEnsemble:
    G, W, C = (ObstacleLabel(m, "dry", "static") for m in ("glass", "wood", "concrete"))

    def test_majority(self):
        assert ensemble_classify([self.G, self.G, self.W]).material == "glass"

    def test_single(self):
        assert ensemble_classify([self.W]) == self.W

    def test_three_way_tie_most_recent(self):
        assert ensemble_classify([self.G, self.W, self.C]).material == "concrete"

    def test_unanimous_equals_single(self, rng):
        m = init_model(rng=rng)
        x = rng.normal(size=15)
        c = classify(x, m)
        assert ensemble_classify([c, c, c]) == c.label

    def test_per_head(self):
        a = ObstacleLabel("glass", "wet", "static")
        b = ObstacleLabel("wood", "wet", "mobile")
        c = ObstacleLabel("glass", "dry", "mobile")
        assert ensemble_classify([a, b, c]) == ObstacleLabel("glass", "wet", "mobile")

    def test_uses_last_three(self):
        assert ensemble_classify([self.C, self.C, self.G, self.G, self.W]).material == "glass"

    def test_empty(self):
        with pytest.raises(ValueError):
            ensemble_classify([])


def f32_model(rng, hidden=(12, 12), n_in=15):
    m = init_model(n_in, hidden, rng=rng)
    for p in m.params():
        p[...] = rng.normal(size=p.shape).astype(np.float32)
    m.scaler_mean = rng.normal(size=n_in).astype(np.float32).astype(float)
    m.scaler_std = rng.uniform(0.1, 5, n_in).astype(np.float32).astype(float)
    return m


class TestModelFile:
    def test_roundtrip(self, rng):
        m = f32_model(rng)
        assert model_from_bytes(model_to_bytes(m)) == m

    def test_layout(self, rng):
        m = f32_model(rng)
        data = model_to_bytes(m)
        assert data[:8] == MAGIC
        header = np.frombuffer(data[8:8 + 4 * 8], dtype="<u4").tolist()
        assert header == [15, 2, 12, 12, 3, 4, 2, 2]
        n_params = sum(p.size for p in m.params()) + 30
        assert len(data) == 8 + 4 * 8 + 4 * n_params
        first_w = np.frombuffer(data[40:40 + 4 * 180], dtype="<f4").reshape(15, 12)
        np.testing.assert_array_equal(first_w, m.weights[0])

    def test_no_hidden_layer(self, rng):
        m = f32_model(rng, hidden=())
        assert model_from_bytes(model_to_bytes(m)) == m

    def test_bad_magic(self, rng):
        data = bytearray(model_to_bytes(f32_model(rng)))
        data[0:8] = b"NOTMODEL"
        with pytest.raises(ValueError):
            model_from_bytes(bytes(data))

    def test_truncated(self, rng):
        data = model_to_bytes(f32_model(rng))
        for cut in (10, 30, len(data) - 1):
            with pytest.raises(ValueError):
                model_from_bytes(data[:cut])
        with pytest.raises(ValueError):
            model_from_bytes(data + b"\0")

    def test_file_io(self, rng, tmp_path):
        from uasw.classifier import load_model, save_model

        m = f32_model(rng)
        save_model(m, tmp_path / "m.bin")
        assert load_model(tmp_path / "m.bin") == m


def test_macro_f1_hand_computed():
    # no hidden layer, identity-like heads: prediction is argmax of chosen inputs
    model = init_model(4, (), zero=True)
    model.head_weights[0][:] = np.eye(4)
    model.head_weights[1][:2] = np.eye(2)
    model.head_weights[2][:2] = np.eye(2)
    pred_material = np.array([0, 0, 1, 2, 3, 3])
    x = np.eye(4)[pred_material]
    true = np.zeros((6, 3), dtype=np.int64)
    true[:, 0] = [0, 1, 1, 2, 3, 0]
    f1 = macro_f1(model, x, true)
    # class 0: tp1 fp1 fn1 -> 0.5; class 1: tp1 fn1 -> 2/3; class 2: 1; class 3: tp1 fp1 -> 2/3
    assert f1[0] == pytest.approx((0.5 + 2 / 3 + 1 + 2 / 3) / 4)
    # surface head predicts class 0 whenever x[0] >= x[1]; all true labels are 0
    pred_surface = (x[:, 1] > x[:, 0]).astype(int)
    tp0 = np.sum(pred_surface == 0)
    assert f1[1] == pytest.approx((2 * tp0 / (tp0 + 6) + 0.0) / 2)
