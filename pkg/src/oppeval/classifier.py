"""Per-segment probability predictors.

The built-in baseline is a logistic regression on log band powers, trained
with the same protocol as the reference deep model (mini-batch gradient
descent, early stopping on validation loss, best-epoch checkpoint). It
exists so the evaluation machinery can run self-contained; externally
produced prediction series are imported through the same exchange format.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import ValidationError

LOG_EPS = 1e-12
BANDS_HZ = (
    ("delta", 0.5, 4.0),
    ("theta", 4.0, 8.0),
    ("alpha", 8.0, 13.0),
    ("beta", 13.0, 30.0),
    ("gamma", 30.0, 45.0),
)


def extract_features(samples: np.ndarray, sample_rate_hz: float = 256.0) -> np.ndarray:
    """Log band power per channel via periodogram integration.

    Bands are half-open [low, high) in Hz; powers get a 1e-12 floor before
    the log so silent synthetic channels stay finite. Output length is
    5 * n_channels, band-major within channel.
    """
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    n = x.shape[0]
    spec = np.abs(np.fft.rfft(x, axis=0)) ** 2 / (sample_rate_hz * n)
    spec[1:-1] *= 2.0  # one-sided density
    freqs = np.fft.rfftfreq(n, d=1.0 / sample_rate_hz)
    df = freqs[1] - freqs[0]

    feats = np.empty((x.shape[1], len(BANDS_HZ)))
    for b, (_, lo, hi) in enumerate(BANDS_HZ):
        mask = (freqs >= lo) & (freqs < hi)
        feats[:, b] = spec[mask].sum(axis=0) * df
    return np.log(feats + LOG_EPS).ravel()


@dataclass
class BaselineModel:
    weights: np.ndarray  # [n_features + 1], bias last
    feature_mean: np.ndarray
    feature_std: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def n_features(self) -> int:
        return self.weights.size - 1

    def scores(self, features: np.ndarray) -> np.ndarray:
        features = np.atleast_2d(features)
        if features.shape[1] != self.n_features:
            raise ValidationError(
                f"feature length {features.shape[1]} != model {self.n_features}")
        z = (features - self.feature_mean) / self.feature_std
        logits = z @ self.weights[:-1] + self.weights[-1]
        return 1.0 / (1.0 + np.exp(-logits))

    def save(self, path):
        np.savez(path, weights=self.weights, feature_mean=self.feature_mean,
                 feature_std=self.feature_std,
                 meta_keys=np.array(list(self.meta)),
                 meta_values=np.array([str(v) for v in self.meta.values()]))

    @classmethod
    def load(cls, path) -> "BaselineModel":
        with np.load(path, allow_pickle=False) as data:
            meta = dict(zip(data["meta_keys"].tolist(), data["meta_values"].tolist()))
            return cls(weights=data["weights"], feature_mean=data["feature_mean"],
                       feature_std=data["feature_std"], meta=meta)


def _bce(p: np.ndarray, y: np.ndarray) -> float:
    p = np.clip(p, 1e-12, 1 - 1e-12)
    return float(-(y * np.log(p) + (1 - y) * np.log(1 - p)).mean())


def train_baseline(train_x: np.ndarray, train_y: np.ndarray,
                   val_x: np.ndarray, val_y: np.ndarray,
                   lr: float = 0.001, batch_size: int = 64, max_epochs: int = 100,
                   patience: int = 20, seed: int = 0) -> BaselineModel:
    """Fit the logistic baseline with mini-batch gradient descent.

    Training runs for at most `max_epochs`, stops early when validation
    loss has not improved for `patience` consecutive epochs, and returns
    the checkpoint with the lowest validation loss seen. Deterministic
    for a fixed seed (shuffle order is the only randomness; weights start
    at zero).
    """
    train_x = np.asarray(train_x, dtype=np.float64)
    train_y = np.asarray(train_y, dtype=np.float64)
    val_x = np.asarray(val_x, dtype=np.float64)
    val_y = np.asarray(val_y, dtype=np.float64)
    if max_epochs < 1:
        raise ValidationError(f"max_epochs must be >= 1, got {max_epochs}")
    classes = np.unique(train_y)
    if classes.size < 2:
        raise ValidationError("training set must contain both classes")

    mean = train_x.mean(axis=0)
    std = train_x.std(axis=0)
    std[std < 1e-8] = 1.0
    xs = (train_x - mean) / std
    vs = (val_x - mean) / std

    rng = np.random.default_rng(seed)
    w = np.zeros(xs.shape[1] + 1)
    n = xs.shape[0]

    best_w = w.copy()
    best_val = np.inf
    best_epoch = -1
    val_losses = []
    train_losses = []
    stale = 0

    for epoch_i in range(max_epochs):
        order = rng.permutation(n)
        for lo in range(0, n, batch_size):
            idx = order[lo:lo + batch_size]
            xb, yb = xs[idx], train_y[idx]
            p = 1.0 / (1.0 + np.exp(-(xb @ w[:-1] + w[-1])))
            err = p - yb
            w[:-1] -= lr * (xb.T @ err) / idx.size
            w[-1] -= lr * err.mean()

        train_losses.append(_bce(1.0 / (1.0 + np.exp(-(xs @ w[:-1] + w[-1]))), train_y))
        val_p = 1.0 / (1.0 + np.exp(-(vs @ w[:-1] + w[-1])))
        val_loss = _bce(val_p, val_y)
        val_losses.append(val_loss)
        if val_loss < best_val:
            best_val = val_loss
            best_w = w.copy()
            best_epoch = epoch_i
            stale = 0
        else:
            stale += 1
            if stale >= patience:
                break

    return BaselineModel(
        weights=best_w, feature_mean=mean, feature_std=std,
        meta={
            "epochs_run": len(val_losses), "best_epoch": best_epoch,
            "best_val_loss": best_val, "final_train_loss": train_losses[-1],
            "seed": seed,
        },
    )


# ---------------------------------------------------------------------------
# prediction series
# ---------------------------------------------------------------------------

@dataclass
class PredictionSeries:
    """Classifier output over time, ordered from earliest to latest.

    t_onset_min is minutes before seizure onset, strictly decreasing toward
    zero along the series; y is the raw probability output, untouched by
    any threshold.
    """

    t_onset_min: np.ndarray
    y: np.ndarray
    segment_spacing_s: float = 5.0
    source: str = ""

    def __post_init__(self):
        self.t_onset_min = np.asarray(self.t_onset_min, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.float64)
        if self.t_onset_min.shape != self.y.shape or self.t_onset_min.ndim != 1:
            raise ValidationError("t_onset_min and y must be equal-length vectors")
        if np.any(np.diff(self.t_onset_min) >= 0):
            raise ValidationError("t_onset_min must be strictly decreasing")
        if np.any((self.y < 0) | (self.y > 1)):
            bad = int(np.argmax((self.y < 0) | (self.y > 1)))
            raise ValidationError(f"y out of [0,1] at row {bad}: {self.y[bad]}")

    def __len__(self) -> int:
        return self.y.size

    @property
    def window_min(self) -> float:
        """Span from the start of the first segment to onset."""
        return float(self.t_onset_min[0])


def predict(model: BaselineModel, features: np.ndarray,
            t_onset_min: np.ndarray, source: str = "") -> PredictionSeries:
    """Score a time-ordered block of segments into a PredictionSeries."""
    scores = model.scores(features)
    order = np.argsort(-np.asarray(t_onset_min))
    return PredictionSeries(
        t_onset_min=np.asarray(t_onset_min)[order], y=scores[order], source=source)


def export_predictions(series: PredictionSeries, path) -> None:
    """Write the exchange CSV: header t_onset_min,y; 6-decimal fixed precision."""
    with open(path, "w") as fh:
        fh.write("t_onset_min,y\n")
        for t, y in zip(series.t_onset_min, series.y):
            fh.write(f"{t:.6f},{y:.6f}\n")


def import_predictions(path) -> PredictionSeries:
    """Read and validate an exchange CSV; rows get sorted by decreasing t_onset_min."""
    path = Path(path)
    ts, ys = [], []
    with open(path) as fh:
        header = fh.readline().strip()
        if header.replace(" ", "") != "t_onset_min,y":
            raise ValidationError(f"{path}: expected header 't_onset_min,y', got {header!r}")
        for i, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise ValidationError(f"{path}: row {i} has {len(parts)} fields")
            try:
                t, y = float(parts[0]), float(parts[1])
            except ValueError as exc:
                raise ValidationError(f"{path}: row {i} not numeric: {line!r}") from exc
            if not 0.0 <= y <= 1.0:
                raise ValidationError(f"{path}: row {i}: y={y} outside [0,1]")
            ts.append(t)
            ys.append(y)
    if not ts:
        raise ValidationError(f"{path}: no data rows")
    t_arr = np.array(ts)
    if np.unique(t_arr).size != t_arr.size:
        raise ValidationError(f"{path}: duplicate t_onset_min values")
    order = np.argsort(-t_arr)
    return PredictionSeries(t_onset_min=t_arr[order], y=np.array(ys)[order],
                            source=str(path))
