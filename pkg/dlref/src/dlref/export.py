"""Prediction-series exchange files.

The engine consumes classifier output as a two-column CSV, header
``t_onset_min,y``, both columns at 6-decimal fixed precision, rows
ordered from earliest segment (largest distance to onset) to latest.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np
import torch

from . import DataError
from .model import CnnTransformer


def predict_segments(model: CnnTransformer, x: torch.Tensor,
                     batch_size: int = 256) -> np.ndarray:
    """Probability per segment, dropout off, gradient-free."""
    model.eval()
    outs = []
    with torch.no_grad():
        for lo in range(0, x.shape[0], batch_size):
            outs.append(model(x[lo:lo + batch_size]))
    return torch.cat(outs).numpy().astype(np.float64)


def export_predictions(model: CnnTransformer, x: torch.Tensor,
                       t_onset_min: np.ndarray, path: str | Path,
                       batch_size: int = 256) -> Path:
    """Score a continuous block of segments and write the exchange CSV."""
    t = np.asarray(t_onset_min, dtype=np.float64)
    if t.ndim != 1 or t.shape[0] != x.shape[0]:
        raise DataError(
            f"{t.shape} onset distances for {x.shape[0]} segments")
    if not np.all(np.isfinite(t)):
        raise DataError("non-finite t_onset_min values")
    if np.unique(t).size != t.size:
        raise DataError("duplicate t_onset_min values")
    y = predict_segments(model, x, batch_size=batch_size)
    order = np.argsort(-t)
    path = Path(path)
    with open(path, "w") as fh:
        fh.write("t_onset_min,y\n")
        for i in order:
            fh.write(f"{t[i]:.6f},{y[i]:.6f}\n")
    return path
