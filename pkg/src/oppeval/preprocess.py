"""EEG preprocessing: common average reference, FIR bandpass, epoching.

The chain is deliberately minimal: re-reference, one zero-phase bandpass,
fixed-length non-overlapping epochs. No artifact rejection or resampling.
"""
from __future__ import annotations

from dataclasses import dataclass, replace, field

import numpy as np
from scipy.signal import fftconvolve

from . import ValidationError
from .signal_io import Recording


@dataclass(frozen=True)
class FilterKernel:
    taps: np.ndarray
    order: int
    low_hz: float
    high_hz: float
    window_kind: str
    sample_rate_hz: float

    def frequency_response(self, freqs_hz) -> np.ndarray:
        """Complex response H(f) evaluated at the given frequencies."""
        freqs = np.atleast_1d(np.asarray(freqs_hz, dtype=np.float64))
        n = np.arange(self.taps.size)
        phase = -2j * np.pi * np.outer(freqs / self.sample_rate_hz, n)
        return np.exp(phase) @ self.taps


@dataclass
class Segment:
    """One fixed-length epoch. ``samples`` may be None for manifest-level refs."""

    patient_id: str
    file: str
    offset_s: float  # seconds from file start, sample-aligned
    label: int | None = None  # 0 interictal, 1 preictal, None unlabeled
    t_onset_min: float | None = None  # minutes from segment start to seizure onset
    samples: np.ndarray | None = field(default=None, repr=False)

    def key(self) -> tuple[str, float]:
        return (self.file, self.offset_s)


def common_average_reference(rec: Recording) -> Recording:
    """Subtract the instantaneous cross-channel mean from every channel."""
    if rec.n_channels < 2:
        raise ValidationError("common average reference needs at least 2 channels")
    referenced = rec.samples - rec.samples.mean(axis=1, keepdims=True)
    return replace(rec, samples=referenced)


def _windowed_lowpass(cutoff_hz: float, order: int, sample_rate_hz: float) -> np.ndarray:
    # unit-DC-gain windowed sinc; symmetric because sinc and the window are
    n = np.arange(order + 1) - order / 2
    taps = 2 * cutoff_hz / sample_rate_hz * np.sinc(2 * cutoff_hz / sample_rate_hz * n)
    taps *= np.hamming(order + 1)
    return taps / taps.sum()


def design_fir_bandpass(sample_rate_hz: float, low_hz: float = 0.5, high_hz: float = 45.0,
                        order: int = 1690) -> FilterKernel:
    """Design a linear-phase windowed-sinc bandpass (Hamming window).

    The kernel is the difference of two unit-gain low-pass kernels, which
    pins DC gain to zero and puts the −6 dB points at the band edges.
    """
    if not 0 < low_hz < high_hz < sample_rate_hz / 2:
        raise ValidationError(
            f"band edges must satisfy 0 < low < high < Nyquist, got "
            f"({low_hz}, {high_hz}) at {sample_rate_hz} Hz"
        )
    if order % 2 != 0 or order < 2:
        raise ValidationError(f"order must be even and positive, got {order}")
    taps = _windowed_lowpass(high_hz, order, sample_rate_hz) \
        - _windowed_lowpass(low_hz, order, sample_rate_hz)
    return FilterKernel(
        taps=taps, order=order, low_hz=low_hz, high_hz=high_hz,
        window_kind="hamming", sample_rate_hz=sample_rate_hz,
    )


def apply_filter(rec: Recording, kernel: FilterKernel) -> Recording:
    """Zero-phase filtering: reflect-pad, convolve, trim. Length preserved.

    The kernel is symmetric, so convolving once and trimming the group
    delay from both ends compensates the phase exactly. Reflection padding
    keeps the edges from ringing against implicit zeros.
    """
    half = kernel.order // 2
    if rec.n_samples <= kernel.taps.size:
        raise ValidationError(
            f"recording ({rec.n_samples} samples) shorter than filter kernel "
            f"({kernel.taps.size} taps)"
        )
    padded = np.pad(rec.samples, ((half, half), (0, 0)), mode="reflect")
    out = fftconvolve(padded, kernel.taps[:, None], mode="valid")
    assert out.shape == rec.samples.shape
    return replace(rec, samples=out)


def epoch(rec: Recording, epoch_s: float = 5.0) -> list[Segment]:
    """Cut a recording into non-overlapping epochs; trailing remainder dropped."""
    n_per = int(round(epoch_s * rec.sample_rate_hz))
    n_segments = rec.n_samples // n_per
    segments = []
    for k in range(n_segments):
        segments.append(Segment(
            patient_id=rec.patient_id,
            file=rec.source,
            offset_s=k * n_per / rec.sample_rate_hz,
            samples=rec.samples[k * n_per:(k + 1) * n_per],
        ))
    return segments


def preprocess_recording(rec: Recording, kernel: FilterKernel) -> Recording:
    return apply_filter(common_average_reference(rec), kernel)
