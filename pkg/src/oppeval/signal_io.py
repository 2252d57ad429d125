"""Recording and annotation ingestion: EDF, summary text, CSV and NPZ containers."""
from __future__ import annotations

import io
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from . import ValidationError


class EdfError(ValidationError):
    """Malformed or unsupported EDF content, with the offending byte offset."""

    def __init__(self, message: str, byte_offset: int | None = None):
        if byte_offset is not None:
            message = f"{message} (byte offset {byte_offset})"
        super().__init__(message)
        self.byte_offset = byte_offset


@dataclass
class Recording:
    """One continuous multichannel recording in physical units (microvolts).

    ``start_time`` is seconds since the session origin, letting files from
    one patient share a single timeline for annotation arithmetic.
    """

    patient_id: str
    channel_labels: list[str]
    sample_rate_hz: float
    samples: np.ndarray  # [n_samples, n_channels], float64
    start_time: float = 0.0
    source: str = ""

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 2:
            raise ValidationError("samples must be a 2-D [n_samples, n_channels] array")
        n, c = self.samples.shape
        if n < 1 or c < 1:
            raise ValidationError("recording needs at least one sample and one channel")
        if c != len(self.channel_labels):
            raise ValidationError(
                f"{c} channels but {len(self.channel_labels)} labels"
            )
        if self.sample_rate_hz <= 0:
            raise ValidationError("sample rate must be positive")

    @property
    def n_samples(self) -> int:
        return self.samples.shape[0]

    @property
    def n_channels(self) -> int:
        return self.samples.shape[1]

    @property
    def duration_s(self) -> float:
        return self.n_samples / self.sample_rate_hz


@dataclass
class AnnotationSet:
    """Seizure intervals for one recording file, seconds from file start."""

    file_name: str
    events: list[tuple[float, float]] = field(default_factory=list)
    start_clock_s: float | None = None  # wall-clock seconds, may exceed 24 h
    end_clock_s: float | None = None

    def __post_init__(self):
        self.events = sorted(self.events)
        last_end = -1.0
        for onset, offset in self.events:
            if not 0 <= onset < offset:
                raise ValidationError(
                    f"{self.file_name}: bad seizure interval ({onset}, {offset})"
                )
            if onset < last_end:
                raise ValidationError(f"{self.file_name}: overlapping seizures")
            last_end = offset


# ---------------------------------------------------------------------------
# EDF
# ---------------------------------------------------------------------------

_HEADER_FIELDS = (
    ("version", 8),
    ("patient", 80),
    ("recording", 80),
    ("startdate", 8),
    ("starttime", 8),
    ("header_bytes", 8),
    ("reserved", 44),
    ("n_records", 8),
    ("record_duration_s", 8),
    ("n_signals", 4),
)

_SIGNAL_FIELDS = (
    ("label", 16),
    ("transducer", 80),
    ("physical_dim", 8),
    ("physical_min", 8),
    ("physical_max", 8),
    ("digital_min", 8),
    ("digital_max", 8),
    ("prefilter", 80),
    ("samples_per_record", 8),
    ("reserved", 32),
)


def _ascii(raw: bytes, offset: int) -> str:
    try:
        return raw.decode("ascii").strip()
    except UnicodeDecodeError as exc:
        raise EdfError("non-ASCII bytes in header", offset) from exc


def _number(text: str, offset: int, kind=float):
    try:
        return kind(text)
    except ValueError as exc:
        raise EdfError(f"expected a number, got {text!r}", offset) from exc


def parse_edf(data: bytes | str | Path, patient_id: str = "", source: str = "") -> Recording:
    """Parse a continuous EDF file into a Recording in physical units.

    Only the plain-EDF subset used by scalp EEG archives is accepted:
    uniform sampling rate across signals, known record count, 16-bit
    little-endian samples, no embedded annotation signal. Anything else is
    rejected with an EdfError naming the byte offset.
    """
    if isinstance(data, (str, Path)):
        source = source or str(data)
        data = Path(data).read_bytes()

    buf = io.BytesIO(data)
    header: dict[str, str] = {}
    pos = 0
    for name, width in _HEADER_FIELDS:
        raw = buf.read(width)
        if len(raw) != width:
            raise EdfError("truncated fixed header", pos)
        header[name] = _ascii(raw, pos)
        pos += width

    n_signals = int(_number(header["n_signals"], 0, float))
    if n_signals < 1:
        raise EdfError("no signals declared", 252)
    n_records = int(_number(header["n_records"], 236, float))
    if n_records < 0:
        raise EdfError("unknown record count (-1) is not supported", 236)
    record_duration = _number(header["record_duration_s"], 244)
    if record_duration <= 0:
        raise EdfError("non-positive record duration", 244)

    per_signal: dict[str, list[str]] = {}
    for name, width in _SIGNAL_FIELDS:
        values = []
        for _ in range(n_signals):
            raw = buf.read(width)
            if len(raw) != width:
                raise EdfError(f"truncated signal header field {name!r}", pos)
            values.append(_ascii(raw, pos))
            pos += width
        per_signal[name] = values

    labels = per_signal["label"]
    if any(lbl.startswith("EDF Annotations") for lbl in labels):
        raise EdfError("EDF+ annotation signals are not supported", 256)

    spr = [int(_number(v, pos, float)) for v in per_signal["samples_per_record"]]
    if len(set(spr)) != 1:
        raise EdfError(f"signals disagree on samples per record: {sorted(set(spr))}", pos)
    samples_per_record = spr[0]
    if samples_per_record < 1:
        raise EdfError("non-positive samples per record", pos)
    sample_rate = samples_per_record / record_duration

    phys_min = np.array([_number(v, pos) for v in per_signal["physical_min"]])
    phys_max = np.array([_number(v, pos) for v in per_signal["physical_max"]])
    dig_min = np.array([_number(v, pos) for v in per_signal["digital_min"]])
    dig_max = np.array([_number(v, pos) for v in per_signal["digital_max"]])
    if np.any(dig_max == dig_min):
        raise EdfError("digital_min equals digital_max for a signal", pos)

    expected = n_records * n_signals * samples_per_record * 2
    payload = buf.read()
    if len(payload) < expected:
        raise EdfError(
            f"data shorter than header promises ({len(payload)} < {expected} bytes)",
            pos + len(payload),
        )
    raw = np.frombuffer(payload[:expected], dtype="<i2")
    # record-major layout: [record][signal][sample]
    raw = raw.reshape(n_records, n_signals, samples_per_record)
    digital = raw.transpose(0, 2, 1).reshape(n_records * samples_per_record, n_signals)

    gain = (phys_max - phys_min) / (dig_max - dig_min)
    physical = (digital - dig_min) * gain + phys_min

    return Recording(
        patient_id=patient_id,
        channel_labels=labels,
        sample_rate_hz=sample_rate,
        samples=physical,
        source=source,
    )


# ---------------------------------------------------------------------------
# Summary annotation text (chbXX-summary.txt grammar)
# ---------------------------------------------------------------------------

_CLOCK_RE = re.compile(r"(\d+):(\d{1,2}):(\d{1,2})")


def _clock_seconds(text: str) -> float | None:
    m = _CLOCK_RE.search(text)
    if not m:
        return None
    h, mi, s = (int(g) for g in m.groups())
    return h * 3600.0 + mi * 60.0 + s


def parse_summary(text: str | Path) -> dict[str, AnnotationSet]:
    """Parse a summary annotation file into per-file AnnotationSets.

    Follows the scalp-EEG archive summary grammar: blocks introduced by
    "File Name:", a declared seizure count, then "Seizure Start Time" /
    "Seizure End Time" pairs (the numbered "Seizure N Start Time" variant
    is accepted too). Blank-line layout between blocks is ignored. A block
    whose declared count disagrees with the parsed events is an error.
    """
    if isinstance(text, Path) or (isinstance(text, str) and "\n" not in text and text.endswith(".txt")):
        text = Path(text).read_text()

    out: dict[str, AnnotationSet] = {}
    current: AnnotationSet | None = None
    declared: int | None = None
    starts: list[float] = []
    ends: list[float] = []

    def close_block():
        nonlocal current, declared, starts, ends
        if current is None:
            return
        if declared is None or len(starts) != declared or len(ends) != declared:
            raise ValidationError(
                f"summary block {current.file_name!r}: declared "
                f"{declared} seizures, parsed {len(starts)} starts / {len(ends)} ends"
            )
        current.events = sorted(zip(starts, ends))
        current.__post_init__()
        out[current.file_name] = current
        current, declared, starts, ends = None, None, [], []

    for line in str(text).splitlines():
        line = line.strip()
        if line.startswith("File Name:"):
            close_block()
            current = AnnotationSet(file_name=line.split(":", 1)[1].strip())
        elif current is not None and line.startswith("File Start Time:"):
            current.start_clock_s = _clock_seconds(line.split(":", 1)[1])
        elif current is not None and line.startswith("File End Time:"):
            current.end_clock_s = _clock_seconds(line.split(":", 1)[1])
        elif current is not None and line.startswith("Number of Seizures in File:"):
            declared = int(re.findall(r"\d+", line)[-1])
        elif current is not None and re.match(r"Seizure \d* *Start Time", line):
            starts.append(float(re.findall(r"[\d.]+", line.split(":", 1)[1])[0]))
        elif current is not None and re.match(r"Seizure \d* *End Time", line):
            ends.append(float(re.findall(r"[\d.]+", line.split(":", 1)[1])[0]))
    close_block()
    return out


def session_timeline(annotations: dict[str, AnnotationSet]) -> dict[str, float]:
    """Place files on one session timeline from their summary clock times.

    Clock times may wrap past midnight (and some archives write hours ≥ 24
    directly); starts are unwrapped so the sequence is monotone in file
    order. Returns file name → start seconds since the session origin.
    """
    timeline: dict[str, float] = {}
    prev = None
    carry = 0.0
    for name, ann in annotations.items():
        if ann.start_clock_s is None:
            raise ValidationError(f"{name}: summary has no File Start Time")
        t = ann.start_clock_s + carry
        while prev is not None and t < prev:
            carry += 86400.0
            t += 86400.0
        timeline[name] = t
        prev = t
    return timeline


# ---------------------------------------------------------------------------
# CSV / NPZ containers
# ---------------------------------------------------------------------------

def load_csv(path: str | Path, sample_rate_hz: float, labels: list[str] | None = None,
             patient_id: str = "", start_time: float = 0.0) -> Recording:
    """Load a recording from CSV: header row of channel labels, one sample per row."""
    path = Path(path)
    try:
        # round_trip parsing: the default tokenizer can be off by one ulp
        frame = pd.read_csv(path, float_precision="round_trip")
    except pd.errors.EmptyDataError as exc:
        raise ValidationError(f"empty recording CSV: {path}") from exc
    if frame.shape[0] == 0:
        raise ValidationError(f"recording CSV has no sample rows: {path}")
    if not all(np.issubdtype(dt, np.number) for dt in frame.dtypes):
        raise ValidationError(f"non-numeric cells in recording CSV: {path}")
    if labels is None:
        labels = [str(c) for c in frame.columns]
    return Recording(
        patient_id=patient_id,
        channel_labels=labels,
        sample_rate_hz=sample_rate_hz,
        samples=frame.to_numpy(dtype=np.float64),
        start_time=start_time,
        source=str(path),
    )


def save_csv(rec: Recording, path: str | Path) -> None:
    """Write a recording as CSV with full float precision (lossless round-trip)."""
    header = ",".join(rec.channel_labels)
    np.savetxt(path, rec.samples, delimiter=",", header=header, comments="", fmt="%.17g")


def save_npz(rec: Recording, path: str | Path) -> None:
    # uncompressed on purpose: EEG-like noise barely deflates, and hour-long
    # recordings make zlib the bottleneck of a whole pipeline run
    np.savez(
        path,
        samples=rec.samples.astype(np.float32),
        sample_rate_hz=rec.sample_rate_hz,
        channel_labels=np.array(rec.channel_labels),
        start_time=rec.start_time,
        patient_id=rec.patient_id,
    )


def load_npz(path: str | Path) -> Recording:
    path = Path(path)
    with np.load(path, allow_pickle=False) as data:
        return Recording(
            patient_id=str(data["patient_id"]),
            channel_labels=[str(x) for x in data["channel_labels"]],
            sample_rate_hz=float(data["sample_rate_hz"]),
            samples=data["samples"].astype(np.float64),
            start_time=float(data["start_time"]),
            source=str(path),
        )


def load_recording(path: str | Path, **kwargs) -> Recording:
    """Dispatch on extension: .edf, .csv or .npz."""
    path = Path(path)
    ext = path.suffix.lower()
    if ext == ".edf":
        return parse_edf(path, patient_id=kwargs.get("patient_id", ""))
    if ext == ".csv":
        return load_csv(path, **kwargs)
    if ext == ".npz":
        return load_npz(path)
    raise ValidationError(f"unsupported recording format: {path}")
