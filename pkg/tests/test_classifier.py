import numpy as np
import pytest

from oppeval import ValidationError
from oppeval.classifier import (
    LOG_EPS,
    BaselineModel,
    PredictionSeries,
    export_predictions,
    extract_features,
    import_predictions,
    predict,
    train_baseline,
)


def tone(freq_hz, amp=1.0, seconds=5.0, rate=256.0, phase=0.0):
    t = np.arange(int(seconds * rate)) / rate
    return amp * np.sin(2 * np.pi * freq_hz * t + phase)


class TestExtractFeatures:
    def test_output_length(self):
        rng = np.random.default_rng(0)
        feats = extract_features(rng.normal(size=(1280, 23)))
        assert feats.shape == (115,)

    def test_alpha_tone_power(self):
        # 10 Hz sits on a periodogram bin; band power equals amp^2/2 exactly
        feats = extract_features(tone(10.0)[:, None])
        assert feats[2] == pytest.approx(np.log(0.5 + LOG_EPS), abs=1e-9)

    def test_alpha_tone_dominates(self):
        feats = extract_features(tone(10.0)[:, None])
        others = np.delete(feats, 2)
        assert np.all(feats[2] >= others + 2.0)

    def test_silent_channel_floors_at_eps(self):
        feats = extract_features(np.zeros((1280, 2)))
        assert np.allclose(feats, np.log(LOG_EPS), atol=1e-12)

    def test_amplitude_doubling_adds_log_four(self):
        f1 = extract_features(tone(10.0)[:, None])
        f2 = extract_features(tone(10.0, amp=2.0)[:, None])
        assert f2[2] - f1[2] == pytest.approx(np.log(4.0), abs=1e-9)

    def test_band_edges_half_open(self):
        # 4 Hz belongs to theta, not delta
        feats = extract_features(tone(4.0)[:, None])
        assert feats[1] > feats[0] + 2.0

    def test_channel_major_ordering(self):
        x = np.stack([tone(10.0), tone(2.0)], axis=1)
        feats = extract_features(x)
        assert feats[2] > feats[0] + 2.0   # channel 0: alpha loud
        assert feats[5] > feats[7] + 2.0   # channel 1: delta loud

    def test_dc_offset_invisible(self):
        x = tone(10.0)[:, None]
        assert np.allclose(extract_features(x), extract_features(x + 5.0), atol=1e-9)


def separable_set(n_per_class, rng, gap=2.0):
    pos = rng.normal(size=(n_per_class, 4)) * 0.3
    neg = rng.normal(size=(n_per_class, 4)) * 0.3
    pos[:, 0] += gap
    neg[:, 0] -= gap
    x = np.vstack([pos, neg])
    y = np.concatenate([np.ones(n_per_class), np.zeros(n_per_class)])
    return x, y


class TestTrainBaseline:
    def test_separable_data_learned(self):
        rng = np.random.default_rng(1)
        x, y = separable_set(200, rng)
        vx, vy = separable_set(40, rng)
        model = train_baseline(x, y, vx, vy, lr=0.1, max_epochs=50, seed=0)
        acc = np.mean((model.scores(x) >= 0.5) == y)
        assert acc >= 0.99

    def test_checkpoint_is_running_minimum(self):
        rng = np.random.default_rng(2)
        x, y = separable_set(100, rng)
        vx, vy = separable_set(30, rng)
        full = train_baseline(x, y, vx, vy, lr=0.05, max_epochs=30,
                              patience=100, seed=5)
        for m in (1, 3, 10):
            prefix = train_baseline(x, y, vx, vy, lr=0.05, max_epochs=m,
                                    patience=100, seed=5)
            assert full.meta["best_val_loss"] <= prefix.meta["best_val_loss"] + 1e-12

    def test_checkpoint_loss_reproducible_from_weights(self):
        rng = np.random.default_rng(3)
        x, y = separable_set(80, rng)
        vx, vy = separable_set(20, rng)
        model = train_baseline(x, y, vx, vy, lr=0.05, max_epochs=20, seed=1)
        p = np.clip(model.scores(vx), 1e-12, 1 - 1e-12)
        loss = float(-(vy * np.log(p) + (1 - vy) * np.log(1 - p)).mean())
        assert loss == pytest.approx(model.meta["best_val_loss"], abs=1e-12)

    def test_flipped_labels_negate_weights(self):
        rng = np.random.default_rng(4)
        x, y = separable_set(100, rng)
        vx, vy = separable_set(30, rng)
        m1 = train_baseline(x, y, vx, vy, lr=0.05, max_epochs=15,
                            patience=100, seed=7)
        m2 = train_baseline(x, 1 - y, vx, 1 - vy, lr=0.05, max_epochs=15,
                            patience=100, seed=7)
        assert np.allclose(m1.weights, -m2.weights, atol=1e-10)

    def test_deterministic(self):
        rng = np.random.default_rng(5)
        x, y = separable_set(60, rng)
        vx, vy = separable_set(20, rng)
        m1 = train_baseline(x, y, vx, vy, max_epochs=5, seed=3)
        m2 = train_baseline(x, y, vx, vy, max_epochs=5, seed=3)
        assert np.array_equal(m1.weights, m2.weights)

    def test_patience_stops_early(self):
        rng = np.random.default_rng(6)
        x, y = separable_set(60, rng)
        # validation set answers are flipped: val loss only worsens
        vx, vy = separable_set(20, rng)
        model = train_baseline(x, y, vx, 1 - vy, lr=0.5, max_epochs=100,
                               patience=3, seed=0)
        assert model.meta["epochs_run"] < 100

    def test_single_class_rejected(self):
        rng = np.random.default_rng(7)
        x, _ = separable_set(10, rng)
        with pytest.raises(ValidationError, match="both classes"):
            train_baseline(x, np.ones(20), x, np.ones(20))

    def test_bad_epoch_budget_rejected(self):
        rng = np.random.default_rng(8)
        x, y = separable_set(10, rng)
        with pytest.raises(ValidationError):
            train_baseline(x, y, x, y, max_epochs=0)

    def test_save_load_round_trip(self, tmp_path):
        rng = np.random.default_rng(9)
        x, y = separable_set(30, rng)
        model = train_baseline(x, y, x, y, max_epochs=3, seed=0)
        path = tmp_path / "model.npz"
        model.save(path)
        back = BaselineModel.load(path)
        assert np.array_equal(back.weights, model.weights)
        probe = rng.normal(size=(5, 4))
        assert np.allclose(back.scores(probe), model.scores(probe), atol=1e-15)


class TestPredictionSeries:
    def test_window_is_first_timestamp(self):
        s = PredictionSeries(t_onset_min=np.array([30.0, 20.0, 10.0]),
                             y=np.array([0.1, 0.5, 0.9]))
        assert s.window_min == 30.0
        assert len(s) == 3

    def test_non_decreasing_rejected(self):
        with pytest.raises(ValidationError, match="decreasing"):
            PredictionSeries(t_onset_min=np.array([10.0, 10.0]),
                             y=np.array([0.1, 0.2]))

    def test_out_of_range_y_rejected(self):
        with pytest.raises(ValidationError, match="row 1"):
            PredictionSeries(t_onset_min=np.array([20.0, 10.0]),
                             y=np.array([0.5, 1.2]))

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValidationError):
            PredictionSeries(t_onset_min=np.array([20.0, 10.0]),
                             y=np.array([0.5]))


class TestPredict:
    def _model(self):
        return BaselineModel(weights=np.array([1.0, 0.0, 0.0, 0.0, 0.0]),
                             feature_mean=np.zeros(4), feature_std=np.ones(4))

    def test_orders_by_time(self):
        feats = np.eye(4)
        t = np.array([5.0, 20.0, 10.0, 15.0])
        series = predict(self._model(), feats, t)
        assert list(series.t_onset_min) == [20.0, 15.0, 10.0, 5.0]

    def test_scores_are_sigmoid_of_logit(self):
        feats = np.array([[2.0, 0, 0, 0], [-2.0, 0, 0, 0]])
        series = predict(self._model(), feats, np.array([10.0, 5.0]))
        assert series.y[0] == pytest.approx(1 / (1 + np.exp(-2.0)))
        assert series.y[1] == pytest.approx(1 / (1 + np.exp(2.0)))

    def test_feature_width_mismatch_rejected(self):
        with pytest.raises(ValidationError, match="feature length"):
            predict(self._model(), np.zeros((2, 7)), np.array([10.0, 5.0]))


class TestExchangeFormat:
    def _series(self):
        t = np.arange(600, 0, -5) / 10.0
        rng = np.random.default_rng(12)
        return PredictionSeries(t_onset_min=t, y=rng.uniform(size=t.size))

    def test_header_and_precision(self, tmp_path):
        path = tmp_path / "p.csv"
        export_predictions(self._series(), path)
        lines = path.read_text().splitlines()
        assert lines[0] == "t_onset_min,y"
        assert all(len(part.split(".")[1]) == 6
                   for part in lines[1].split(","))

    def test_round_trip_values(self, tmp_path):
        path = tmp_path / "p.csv"
        series = self._series()
        export_predictions(series, path)
        back = import_predictions(path)
        assert np.allclose(back.t_onset_min, series.t_onset_min, atol=5e-7)
        assert np.allclose(back.y, series.y, atol=5e-7)

    def test_reexport_is_stable(self, tmp_path):
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        export_predictions(self._series(), p1)
        export_predictions(import_predictions(p1), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_unsorted_input_sorted_on_import(self, tmp_path):
        path = tmp_path / "p.csv"
        path.write_text("t_onset_min,y\n5.000000,0.9\n15.000000,0.1\n")
        back = import_predictions(path)
        assert list(back.t_onset_min) == [15.0, 5.0]

    def test_bad_header_rejected(self, tmp_path):
        path = tmp_path / "p.csv"
        path.write_text("time,prob\n5,0.5\n")
        with pytest.raises(ValidationError, match="header"):
            import_predictions(path)

    def test_wrong_field_count_names_row(self, tmp_path):
        path = tmp_path / "p.csv"
        path.write_text("t_onset_min,y\n5.0,0.5,9\n")
        with pytest.raises(ValidationError, match="row 2"):
            import_predictions(path)

    def test_non_numeric_names_row(self, tmp_path):
        path = tmp_path / "p.csv"
        path.write_text("t_onset_min,y\n5.0,0.5\nx,0.5\n")
        with pytest.raises(ValidationError, match="row 3"):
            import_predictions(path)

    def test_out_of_range_y_rejected(self, tmp_path):
        path = tmp_path / "p.csv"
        path.write_text("t_onset_min,y\n5.0,1.2\n")
        with pytest.raises(ValidationError, match="\\[0,1\\]"):
            import_predictions(path)

    def test_duplicate_timestamps_rejected(self, tmp_path):
        path = tmp_path / "p.csv"
        path.write_text("t_onset_min,y\n5.0,0.5\n5.0,0.6\n")
        with pytest.raises(ValidationError, match="duplicate"):
            import_predictions(path)

    def test_empty_body_rejected(self, tmp_path):
        path = tmp_path / "p.csv"
        path.write_text("t_onset_min,y\n")
        with pytest.raises(ValidationError, match="no data"):
            import_predictions(path)
