"""Synthetic EEG corpus with a planted, separable preictal signature.

Interictal background is pink noise. Over the final minutes before each
planted onset a beta-band sinusoid ramps linearly from zero to its peak
amplitude, so band-power features become separable and the ramp length
acts as a known ground-truth optimal preictal period. Channel gains
differ per channel so common-average referencing attenuates but cannot
cancel the tone.

Each patient gets interictal-only recordings followed by one recording
per seizure, spaced so the interictal files sit entirely outside every
seizure's exclusion zone and each seizure carries an uninterrupted
pre-onset stretch long enough for output-profile evaluation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import ValidationError
from .config import EngineConfig
from .signal_io import Recording, save_npz


def pink_noise(n_samples: int, rng: np.random.Generator) -> np.ndarray:
    """Unit-variance noise with 1/f power shaping; DC removed."""
    white = rng.standard_normal(n_samples)
    spec = np.fft.rfft(white)
    freqs = np.fft.rfftfreq(n_samples)
    spec[0] = 0.0
    spec[1:] /= np.sqrt(freqs[1:])
    out = np.fft.irfft(spec, n_samples)
    return out / out.std()


@dataclass(frozen=True)
class CorpusSpec:
    """Knobs for the generated corpus; defaults give a 2-patient study."""

    n_patients: int = 2
    n_seizures: int = 3
    ramp_min: float = 45.0          # planted ground-truth preictal length
    ramp_hz: float = 19.0           # tone inside the beta band
    ramp_peak_uv: float = 180.0
    ictal_hz: float = 7.0
    noise_uv: float = 30.0
    channel_gains: tuple[float, ...] = (1.0, 0.3)
    pre_onset_s: float = 9720.0     # 2.7 h of continuous EEG before onset
    ictal_s: float = 60.0
    post_ictal_s: float = 120.0
    interictal_file_s: float = 10800.0
    file_gap_s: float = 60.0
    onset_spacing_s: float = 14400.0
    start_clock: str = "08:00:00"


def _validate(spec: CorpusSpec, config: EngineConfig) -> None:
    if spec.n_patients < 1:
        raise ValidationError("need at least one patient")
    if spec.n_seizures < 2:
        raise ValidationError("need at least two seizures per patient for LOOCV")
    if len(spec.channel_gains) != len(config.channels):
        raise ValidationError(
            f"{len(spec.channel_gains)} channel gains for {len(config.channels)} channels")
    if spec.ramp_min * 60.0 > spec.pre_onset_s:
        raise ValidationError("ramp longer than the recorded pre-onset stretch")
    if spec.pre_onset_s <= config.ciopr.min_continuous_h * 3600.0:
        raise ValidationError("pre-onset stretch too short for output-profile evaluation")
    for name in ("pre_onset_s", "interictal_file_s"):
        if getattr(spec, name) % config.epoch_s != 0:
            raise ValidationError(f"{name} must be a multiple of the epoch length")
    min_spacing = spec.pre_onset_s + spec.ictal_s + spec.post_ictal_s + spec.file_gap_s
    if spec.onset_spacing_s < min_spacing:
        raise ValidationError(
            f"onset spacing {spec.onset_spacing_s} s < minimum {min_spacing} s")


def interictal_files_needed(spec: CorpusSpec, config: EngineConfig) -> int:
    """Files required so every split can draw its interictal match in full.

    The largest draw happens under the longest preictal definition: one
    augmented set per seizure (test match plus training match combined).
    """
    stride = config.epoch_s * (1.0 - config.oversample_overlap)
    horizon = max(config.preictal_definitions_min) * 60.0
    augmented = math.floor((horizon - config.epoch_s) / stride) + 1
    need_s = spec.n_seizures * augmented * config.epoch_s
    return max(1, math.ceil(need_s / spec.interictal_file_s))


def _clock_to_s(text: str) -> float:
    h, m, s = (int(part) for part in text.split(":"))
    return h * 3600.0 + m * 60.0 + s


def _fmt_clock(seconds: float) -> str:
    s = int(round(seconds))
    return f"{s // 3600:02d}:{s % 3600 // 60:02d}:{s % 60:02d}"


def _render_recording(file_name: str, pid: str, start_s: float, dur_s: float,
                      events: list[tuple[float, float]], spec: CorpusSpec,
                      config: EngineConfig, rng: np.random.Generator) -> Recording:
    fs = config.sample_rate_hz
    n = int(round(dur_s * fs))
    t = np.arange(n) / fs
    gains = np.asarray(spec.channel_gains, dtype=np.float64)
    data = np.empty((n, gains.size))
    for ch in range(gains.size):
        data[:, ch] = spec.noise_uv * pink_noise(n, rng)
    if events:
        tone = np.zeros(n)
        ramp_s = spec.ramp_min * 60.0
        for onset_f, offset_f in events:
            phase = rng.uniform(0.0, 2.0 * math.pi)
            factor = np.clip(1.0 - (onset_f - t) / ramp_s, 0.0, 1.0)
            factor[t >= onset_f] = 0.0
            tone += spec.ramp_peak_uv * factor * np.sin(
                2.0 * np.pi * spec.ramp_hz * t + phase)
            ictal = (t >= onset_f) & (t < offset_f)
            tone[ictal] += 4.0 * spec.noise_uv * np.sin(
                2.0 * np.pi * spec.ictal_hz * t[ictal] + phase)
        data += tone[:, None] * gains[None, :]
    return Recording(
        patient_id=pid, channel_labels=list(config.channels), sample_rate_hz=fs,
        samples=data, start_time=start_s, source=file_name,
    )


def generate_corpus(out_dir: str | Path, spec: CorpusSpec = CorpusSpec(),
                    config: EngineConfig = EngineConfig(),
                    seed: int | None = None) -> list[Path]:
    """Write per-patient recordings plus summary annotations; returns patient dirs."""
    _validate(spec, config)
    seed = config.seed if seed is None else seed
    out_dir = Path(out_dir)
    base_clock = _clock_to_s(spec.start_clock)
    n_int = interictal_files_needed(spec, config)
    seizure_dur = spec.pre_onset_s + spec.ictal_s + spec.post_ictal_s
    patient_dirs = []

    for p in range(spec.n_patients):
        pid = f"p{p + 1:02d}"
        pdir = out_dir / pid
        pdir.mkdir(parents=True, exist_ok=True)

        files: list[tuple[str, float, float, list[tuple[float, float]]]] = []
        cursor = 0.0
        for i in range(n_int):
            files.append((f"{pid}_{i + 1:02d}", cursor, spec.interictal_file_s, []))
            cursor += spec.interictal_file_s + spec.file_gap_s
        last_interictal_end = cursor - spec.file_gap_s
        onset = (last_interictal_end + config.interictal_gap_pre_h * 3600.0
                 + spec.file_gap_s)
        for j in range(spec.n_seizures):
            files.append((
                f"{pid}_{n_int + j + 1:02d}", onset - spec.pre_onset_s, seizure_dur,
                [(spec.pre_onset_s, spec.pre_onset_s + spec.ictal_s)],
            ))
            onset += spec.onset_spacing_s

        lines = [f"Data Sampling Rate: {config.sample_rate_hz:g} Hz", "*" * 25, ""]
        for idx, (name, start, dur_s, events) in enumerate(files):
            rng = np.random.default_rng(np.random.SeedSequence([seed, 101, p, idx]))
            rec = _render_recording(f"{name}.npz", pid, start, dur_s, events,
                                    spec, config, rng)
            save_npz(rec, pdir / f"{name}.npz")
            lines += [
                f"File Name: {name}.npz",
                f"File Start Time: {_fmt_clock(base_clock + start)}",
                f"File End Time: {_fmt_clock(base_clock + start + dur_s)}",
                f"Number of Seizures in File: {len(events)}",
            ]
            for onset_f, offset_f in events:
                lines.append(f"Seizure Start Time: {onset_f:g} seconds")
                lines.append(f"Seizure End Time: {offset_f:g} seconds")
            lines.append("")
        (pdir / f"{pid}-summary.txt").write_text("\n".join(lines))
        patient_dirs.append(pdir)
    return patient_dirs
