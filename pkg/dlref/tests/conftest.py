import numpy as np
import pytest
import torch

from dlref import ModelConfig
from dlref.data import SegmentBatch, SplitData

# small geometry for shape and gradient tests
TINY = ModelConfig(time_points=64, channels=8, conv_filters=(2, 3, 4),
                   model_dim=8, heads=2, dense_dim=8)

# geometry large enough for the separable toy task to be learnable
TOY_FS = 64.0
TOY = ModelConfig(time_points=320, channels=8, conv_filters=(4, 8, 16),
                  model_dim=16, heads=4, dense_dim=16,
                  batch_size=16, max_epochs=12, patience=5)


def toy_segments(n: int, preictal: bool, rng: np.random.Generator,
                 config: ModelConfig = TOY) -> np.ndarray:
    """Noise segments; the positive class carries a 6 Hz tone on top."""
    t = np.arange(config.time_points) / TOY_FS
    xs = []
    for _ in range(n):
        base = rng.normal(0.0, 1.0, size=(config.time_points, config.channels))
        if preictal:
            base += 2.0 * np.sin(
                2 * np.pi * 6.0 * t + rng.uniform(0, 2 * np.pi))[:, None]
        xs.append(base)
    return np.stack(xs).astype(np.float32)


def toy_batch(n: int, rng: np.random.Generator,
              config: ModelConfig = TOY) -> SegmentBatch:
    half = n // 2
    x = np.concatenate([toy_segments(half, False, rng, config),
                        toy_segments(n - half, True, rng, config)])
    y = np.array([0.0] * half + [1.0] * (n - half), dtype=np.float32)
    return SegmentBatch(x=torch.from_numpy(x).unsqueeze(1),
                        y=torch.from_numpy(y),
                        t_onset_min=np.full(n, np.nan))


def toy_split(rng: np.random.Generator, seizure: int = 1,
              run: int = 0) -> SplitData:
    return SplitData(patient="p01", seizure=seizure, run=run,
                     train=toy_batch(96, rng), validation=toy_batch(32, rng),
                     test=toy_batch(16, rng))


@pytest.fixture(scope="session")
def separable_split():
    return toy_split(np.random.default_rng(7))
