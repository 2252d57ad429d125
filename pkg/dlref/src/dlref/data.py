"""Readers for the evaluation engine's on-disk interfaces.

Three formats cross the package boundary: the split manifest CSV (one
row per segment and role), the continuous pre-onset window CSV (one row
per segment of the profile the engine scores), and recording containers
(npz with embedded metadata, or a bare CSV of samples under a
channel-label header). Files named by a manifest live in
``<root>/<patient>/<file>``.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd
import torch

from . import DataError

MANIFEST_COLUMNS = ["patient", "seizure", "run", "role", "file", "offset_s",
                    "label", "t_onset_min"]
WINDOW_COLUMNS = ["patient", "seizure", "file", "offset_s", "t_onset_min"]
ROLES = ("train", "validation", "test")


def read_manifest(path: str | Path) -> pd.DataFrame:
    path = Path(path)
    try:
        frame = pd.read_csv(path, dtype={"file": str, "role": str})
    except (FileNotFoundError, pd.errors.EmptyDataError) as exc:
        raise DataError(f"unreadable manifest: {path}") from exc
    missing = set(MANIFEST_COLUMNS) - set(frame.columns)
    if missing:
        raise DataError(f"manifest {path} missing columns: {sorted(missing)}")
    bad_roles = set(frame["role"]) - set(ROLES)
    if bad_roles:
        raise DataError(f"manifest {path} has unknown roles: {sorted(bad_roles)}")
    return frame


def load_recording(path: str | Path,
                   sample_rate_hz: float | None = None) -> tuple[np.ndarray, float]:
    """Load samples [n, channels] plus rate from an npz or CSV container.

    npz carries its own rate; CSV stores only a label header and sample
    rows, so the caller must supply the rate.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"recording not found: {path}")
    if path.suffix.lower() == ".npz":
        with np.load(path, allow_pickle=False) as data:
            try:
                samples = data["samples"].astype(np.float32)
                rate = float(data["sample_rate_hz"])
            except KeyError as exc:
                raise DataError(f"{path}: not a recording container") from exc
        if sample_rate_hz is not None and abs(rate - sample_rate_hz) > 1e-9:
            raise DataError(
                f"{path}: rate {rate} Hz does not match expected {sample_rate_hz}")
        return samples, rate
    if path.suffix.lower() == ".csv":
        if sample_rate_hz is None:
            raise DataError(f"{path}: CSV container needs an explicit sample rate")
        frame = pd.read_csv(path)
        if frame.shape[0] == 0:
            raise DataError(f"{path}: no sample rows")
        return frame.to_numpy(dtype=np.float32), float(sample_rate_hz)
    raise DataError(f"unsupported recording format: {path}")


@dataclass
class SegmentBatch:
    """Tensors for one manifest role within one split."""

    x: torch.Tensor           # (n, 1, time_points, channels) float32
    y: torch.Tensor           # (n,) float32 labels in {0, 1}
    t_onset_min: np.ndarray   # (n,) minutes before onset, NaN for interictal

    def __len__(self) -> int:
        return self.x.shape[0]


@dataclass
class SplitData:
    patient: str
    seizure: int
    run: int
    train: SegmentBatch
    validation: SegmentBatch
    test: SegmentBatch


class _RecordingCache:
    def __init__(self, root: Path, sample_rate_hz: float | None):
        self.root = root
        self.rate = sample_rate_hz
        self._store: dict[tuple[str, str], tuple[np.ndarray, float]] = {}

    def get(self, patient: str, file_name: str) -> tuple[np.ndarray, float]:
        key = (patient, file_name)
        if key not in self._store:
            self._store[key] = load_recording(self.root / patient / file_name,
                                              self.rate)
        return self._store[key]


def _cut(samples: np.ndarray, rate: float, offset_s: float, epoch_s: float,
         where: str) -> np.ndarray:
    start = int(round(offset_s * rate))
    length = int(round(epoch_s * rate))
    if start < 0 or start + length > samples.shape[0]:
        raise DataError(
            f"{where}: segment at {offset_s}s overruns the recording "
            f"({samples.shape[0]} samples at {rate} Hz)")
    return samples[start:start + length]


def _batch(rows: pd.DataFrame, cache: _RecordingCache, epoch_s: float,
           manifest: str) -> SegmentBatch:
    slices, labels, onsets = [], [], []
    n_channels = None
    for row in rows.itertuples(index=False):
        samples, rate = cache.get(row.patient, row.file)
        if n_channels is None:
            n_channels = samples.shape[1]
        elif samples.shape[1] != n_channels:
            raise DataError(
                f"{manifest}: {row.file} has {samples.shape[1]} channels, "
                f"expected {n_channels}")
        slices.append(_cut(samples, rate, float(row.offset_s), epoch_s,
                           f"{manifest}: {row.file}"))
        labels.append(float(row.label))
        onsets.append(float(row.t_onset_min) if pd.notna(row.t_onset_min)
                      else np.nan)
    if slices:
        x = torch.from_numpy(np.stack(slices)).unsqueeze(1)
    else:
        x = torch.empty((0, 1, 0, 0), dtype=torch.float32)
    return SegmentBatch(x=x, y=torch.tensor(labels, dtype=torch.float32),
                        t_onset_min=np.array(onsets, dtype=np.float64))


@dataclass
class WindowBlock:
    """Continuous pre-onset segments for one seizure, earliest first."""

    patient: str
    seizure: int
    x: torch.Tensor           # (n, 1, time_points, channels) float32
    t_onset_min: np.ndarray   # (n,) minutes before onset, decreasing

    def __len__(self) -> int:
        return self.x.shape[0]


def load_windows(windows_path: str | Path, data_root: str | Path,
                 epoch_s: float = 5.0,
                 sample_rate_hz: float | None = None
                 ) -> dict[int, WindowBlock]:
    """Materialise the engine's per-seizure scoring windows as tensors.

    Returns seizure id -> block, rows ordered from farthest to closest
    to onset, ready for export_predictions.
    """
    windows_path = Path(windows_path)
    try:
        frame = pd.read_csv(windows_path, dtype={"file": str})
    except (FileNotFoundError, pd.errors.EmptyDataError) as exc:
        raise DataError(f"unreadable window table: {windows_path}") from exc
    missing = set(WINDOW_COLUMNS) - set(frame.columns)
    if missing:
        raise DataError(
            f"window table {windows_path} missing columns: {sorted(missing)}")
    cache = _RecordingCache(Path(data_root), sample_rate_hz)
    blocks = {}
    for seizure, group in frame.groupby("seizure", sort=True):
        group = group.sort_values("t_onset_min", ascending=False)
        slices = [
            _cut(*cache.get(row.patient, row.file), float(row.offset_s),
                 epoch_s, f"{windows_path.name}: {row.file}")
            for row in group.itertuples(index=False)]
        blocks[int(seizure)] = WindowBlock(
            patient=str(group["patient"].iloc[0]), seizure=int(seizure),
            x=torch.from_numpy(np.stack(slices)).unsqueeze(1),
            t_onset_min=group["t_onset_min"].to_numpy(dtype=np.float64))
    return blocks


def load_splits(manifest_path: str | Path, data_root: str | Path,
                epoch_s: float = 5.0,
                sample_rate_hz: float | None = None) -> list[SplitData]:
    """Materialise every (seizure, run) split in a manifest as tensors.

    Recordings are loaded once each and sliced per manifest row; label and
    onset-distance columns pass through untouched.
    """
    manifest_path = Path(manifest_path)
    frame = read_manifest(manifest_path)
    cache = _RecordingCache(Path(data_root), sample_rate_hz)
    splits = []
    for (seizure, run), group in frame.groupby(["seizure", "run"], sort=True):
        parts = {role: _batch(group[group["role"] == role], cache, epoch_s,
                              manifest_path.name)
                 for role in ROLES}
        splits.append(SplitData(
            patient=str(group["patient"].iloc[0]), seizure=int(seizure),
            run=int(run), train=parts["train"], validation=parts["validation"],
            test=parts["test"]))
    return splits
