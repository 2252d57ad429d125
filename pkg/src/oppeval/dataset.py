"""Eligibility rules, preictal extraction, oversampling and LOOCV splits.

Time bookkeeping happens on a per-patient session timeline in seconds.
Interval sets are lists of half-open (start, end) ranges; segments are
5-second epochs addressed by (file, offset) so that manifests stay small
and sample data can be materialized lazily.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from . import ValidationError
from .config import EngineConfig
from .preprocess import Segment

Range = tuple[float, float]


# ---------------------------------------------------------------------------
# interval arithmetic
# ---------------------------------------------------------------------------

def merge_ranges(ranges: list[Range], tolerance: float = 0.0) -> list[Range]:
    """Union of ranges; gaps up to `tolerance` seconds are bridged."""
    out: list[Range] = []
    for start, end in sorted(r for r in ranges if r[1] > r[0]):
        if out and start <= out[-1][1] + tolerance:
            out[-1] = (out[-1][0], max(out[-1][1], end))
        else:
            out.append((start, end))
    return out


def intersect_ranges(a: list[Range], b: list[Range]) -> list[Range]:
    out = []
    for s1, e1 in a:
        for s2, e2 in b:
            lo, hi = max(s1, s2), min(e1, e2)
            if hi > lo:
                out.append((lo, hi))
    return merge_ranges(out)


def subtract_ranges(a: list[Range], b: list[Range]) -> list[Range]:
    out = list(merge_ranges(a))
    for s2, e2 in merge_ranges(b):
        nxt = []
        for s1, e1 in out:
            if e2 <= s1 or s2 >= e1:
                nxt.append((s1, e1))
                continue
            if s1 < s2:
                nxt.append((s1, s2))
            if e2 < e1:
                nxt.append((e2, e1))
        out = nxt
    return out


def total_duration(ranges: list[Range]) -> float:
    return sum(e - s for s, e in ranges)


# ---------------------------------------------------------------------------
# session model
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RecordingExtent:
    """Placement of one recording file on the session timeline."""

    file: str
    start_s: float
    duration_s: float

    @property
    def end_s(self) -> float:
        return self.start_s + self.duration_s


@dataclass(frozen=True)
class SeizureEvent:
    seizure_id: int
    onset_s: float  # session time
    offset_s: float


@dataclass
class SeizureRanges:
    seizure: SeizureEvent
    preictal: list[Range]  # candidate preictal ranges (up to the 60-min cap)
    eligible: bool
    exclusion_reason: str | None
    ciopr_eligible: bool
    continuous_window: Range | None  # pre-onset continuous stretch, capped


@dataclass
class PatientRanges:
    patient_id: str
    interictal: list[Range]
    seizures: list[SeizureRanges]
    eligible: bool
    exclusion_reason: str | None


@dataclass
class EligibilityReport:
    patients: dict[str, PatientRanges] = field(default_factory=dict)

    def eligible_patients(self) -> list[str]:
        return [p for p, r in self.patients.items() if r.eligible]


def classify_time_ranges(seizures: list[SeizureEvent], extents: list[RecordingExtent],
                         config: EngineConfig = EngineConfig(),
                         patient_id: str = "") -> PatientRanges:
    """Apply the timing rules that label recorded data per seizure.

    Interictal data must sit outside [onset − 4 h, offset + 1 h] of every
    seizure. A seizure's candidate preictal window covers at most the 60
    minutes before onset and may start no earlier than one hour after the
    previous seizure's offset, so data preceding that boundary (including
    everything before the previous seizure) never counts. Only recorded
    samples count. Seizures with under a minute of candidate data are
    dropped, and a patient needs at least two surviving seizures plus a
    non-empty interictal pool to stay in the study.
    """
    recorded = merge_ranges([(x.start_s, x.end_s) for x in extents])
    continuous = merge_ranges([(x.start_s, x.end_s) for x in extents],
                              tolerance=config.continuity_tolerance_s)
    seizures = sorted(seizures, key=lambda s: s.onset_s)

    exclusion = [(s.onset_s - config.interictal_gap_pre_h * 3600.0,
                  s.offset_s + config.interictal_gap_post_h * 3600.0) for s in seizures]
    interictal = subtract_ranges(recorded, exclusion)

    out: list[SeizureRanges] = []
    for i, seiz in enumerate(seizures):
        start = seiz.onset_s - config.preictal_max_min * 60.0
        if i:
            boundary = max(p.offset_s for p in seizures[:i]) \
                + config.interictal_gap_post_h * 3600.0
            start = max(start, boundary)
        if start >= seiz.onset_s:
            candidate = []
        else:
            candidate = intersect_ranges([(start, seiz.onset_s)], recorded)

        reason = None
        if total_duration(candidate) < config.min_preictal_min * 60.0:
            reason = "under one minute of preictal data"

        cont_window = None
        run = next(((s, e) for s, e in continuous if s < seiz.onset_s <= e + 1e-9), None)
        pre_len = (seiz.onset_s - run[0]) if run else 0.0
        ciopr_ok = pre_len > config.ciopr.min_continuous_h * 3600.0
        if run:
            start = max(run[0], seiz.onset_s - config.ciopr.max_continuous_h * 3600.0)
            cont_window = (start, seiz.onset_s)

        out.append(SeizureRanges(
            seizure=seiz, preictal=candidate, eligible=reason is None,
            exclusion_reason=reason, ciopr_eligible=ciopr_ok and reason is None,
            continuous_window=cont_window,
        ))

    n_eligible = sum(1 for s in out if s.eligible)
    patient_reason = None
    if n_eligible < 2:
        patient_reason = f"only {n_eligible} eligible seizure(s)"
    elif not interictal:
        patient_reason = "no interictal data"
    return PatientRanges(
        patient_id=patient_id, interictal=interictal, seizures=out,
        eligible=patient_reason is None, exclusion_reason=patient_reason,
    )


# ---------------------------------------------------------------------------
# segment construction
# ---------------------------------------------------------------------------

def _file_for(t: float, extents: list[RecordingExtent]) -> RecordingExtent | None:
    for x in extents:
        if x.start_s - 1e-9 <= t and t + 1e-9 < x.end_s:
            return x
    return None


def grid_segments(ranges: list[Range], extents: list[RecordingExtent],
                  config: EngineConfig, patient_id: str, label: int | None,
                  onset_s: float | None = None) -> list[Segment]:
    """Non-overlapping epochs on each file's 5-second grid, fully inside `ranges`.

    Anchoring every segment to its file grid keeps segment identities stable
    across preictal definitions, which is what makes the extraction sets nest.
    """
    segs: list[Segment] = []
    epoch_len = config.epoch_s
    for ext in extents:
        clipped = intersect_ranges(ranges, [(ext.start_s, ext.end_s)])
        for lo, hi in clipped:
            k0 = int(np.ceil((lo - ext.start_s) / epoch_len - 1e-9))
            k1 = int(np.floor((hi - ext.start_s) / epoch_len + 1e-9))
            for k in range(k0, k1):
                start = ext.start_s + k * epoch_len
                t_onset = (onset_s - start) / 60.0 if onset_s is not None else None
                segs.append(Segment(
                    patient_id=patient_id, file=ext.file,
                    offset_s=k * epoch_len, label=label, t_onset_min=t_onset,
                ))
    segs.sort(key=lambda s: (s.file, s.offset_s))
    return segs


def extract_preictal(patient: PatientRanges, extents: list[RecordingExtent],
                     definition_min: int, config: EngineConfig = EngineConfig()
                     ) -> dict[int, list[Segment]]:
    """Per eligible seizure, keep candidate preictal data within D minutes of onset.

    When less than D minutes survive the candidate rules, everything left is
    kept. Returns seizure_id → labeled segments (5-s grid, non-overlapped).
    """
    out: dict[int, list[Segment]] = {}
    for sr in patient.seizures:
        if not sr.eligible:
            continue
        onset = sr.seizure.onset_s
        window = [(onset - definition_min * 60.0, onset)]
        ranges = intersect_ranges(sr.preictal, window)
        out[sr.seizure.seizure_id] = grid_segments(
            ranges, extents, config, patient.patient_id, label=1, onset_s=onset)
    return out


def oversample(segments: list[Segment], overlap: float = 0.66,
               config: EngineConfig = EngineConfig(),
               onset_s: float | None = None,
               extents: list[RecordingExtent] | None = None) -> list[Segment]:
    """Re-segment contiguous epoch runs with a fractional-overlap stride.

    overlap 0.66 on 5-s epochs gives a 1.7-s stride and roughly 3x the
    segment count. Start times snap to the nearest sample. overlap=0
    reproduces the input grid.
    """
    if not segments:
        return []
    if not 0 <= overlap < 1:
        raise ValidationError(f"overlap must be in [0, 1), got {overlap}")
    epoch_len = config.epoch_s
    stride = epoch_len * (1.0 - overlap)
    rate = config.sample_rate_hz
    ext_by_file = {x.file: x for x in (extents or [])}

    runs: list[tuple[Segment, float, float]] = []  # (first segment, start, end)
    for seg in sorted(segments, key=lambda s: (s.file, s.offset_s)):
        if runs and runs[-1][0].file == seg.file and abs(runs[-1][2] - seg.offset_s) < 1e-9:
            first, start, _ = runs[-1]
            runs[-1] = (first, start, seg.offset_s + epoch_len)
        else:
            runs.append((seg, seg.offset_s, seg.offset_s + epoch_len))

    out: list[Segment] = []
    for first, start, end in runs:
        if end - start < epoch_len - 1e-9:
            raise ValidationError("stretch shorter than one epoch")
        n_per = int(round(epoch_len * rate))
        base = int(round(start * rate))
        limit = int(round(end * rate))
        k = 0
        while True:
            s0 = base + int(round(k * stride * rate))
            if s0 + n_per > limit:
                break
            offset = s0 / rate
            t_onset = None
            if onset_s is not None and first.file in ext_by_file:
                t_onset = (onset_s - (ext_by_file[first.file].start_s + offset)) / 60.0
            elif first.t_onset_min is not None:
                # shift the run-leading value by the in-run offset
                t_onset = first.t_onset_min - (offset - first.offset_s) / 60.0
            out.append(Segment(
                patient_id=first.patient_id, file=first.file, offset_s=offset,
                label=first.label, t_onset_min=t_onset,
            ))
            k += 1
    return out


def sample_interictal(pool: list[Segment], n: int, rng_seed) -> list[Segment]:
    """Uniform draw without replacement; short pools are returned whole with a warning."""
    if not pool:
        raise ValidationError("empty interictal pool")
    rng = np.random.default_rng(rng_seed)
    if len(pool) < n:
        warnings.warn(
            f"interictal pool ({len(pool)}) smaller than requested ({n}); using all",
            stacklevel=2,
        )
        return list(pool)
    idx = rng.choice(len(pool), size=n, replace=False)
    return [pool[i] for i in sorted(idx)]


# ---------------------------------------------------------------------------
# LOOCV splits
# ---------------------------------------------------------------------------

@dataclass
class SplitSpec:
    patient_id: str
    test_seizure_id: int
    preictal_def: int
    run_index: int
    train: list[Segment]
    validation: list[Segment]
    test: list[Segment]


def loocv_splits(preictal_by_seizure: dict[int, list[Segment]],
                 interictal_pool: list[Segment],
                 definition_min: int, n_runs: int = 4, seed: int = 0,
                 val_fraction: float = 0.1, patient_id: str = "") -> list[SplitSpec]:
    """Leave-one-seizure-out splits, repeated for n_runs shuffles.

    Each split isolates one seizure's (augmented) preictal segments plus an
    equal count of interictal segments as the test set; interictal test and
    train draws are partitioned before sampling so they never overlap. The
    remaining data is shuffled into a 90/10 train/validation split,
    stratified by class so early stopping always sees both.
    """
    sids = sorted(preictal_by_seizure)
    if len(sids) < 2:
        raise ValidationError(f"LOOCV needs at least 2 seizures, got {len(sids)}")
    if not interictal_pool:
        raise ValidationError("empty interictal pool")

    splits = []
    for run in range(n_runs):
        for sid in sids:
            rng = np.random.default_rng(
                np.random.SeedSequence([seed, definition_min, run, sid]))
            test_pre = list(preictal_by_seizure[sid])
            test_int = _draw(interictal_pool, len(test_pre), rng, "test interictal")
            taken = {s.key() for s in test_int}
            remainder = [s for s in interictal_pool if s.key() not in taken]

            train_pre = [s for other in sids if other != sid
                         for s in preictal_by_seizure[other]]
            train_int = _draw(remainder, len(train_pre), rng, "train interictal")

            tr_pre, val_pre = _stratified_split(train_pre, val_fraction, rng)
            tr_int, val_int = _stratified_split(train_int, val_fraction, rng)
            train = tr_pre + tr_int
            val = val_pre + val_int
            rng.shuffle(train)
            rng.shuffle(val)

            splits.append(SplitSpec(
                patient_id=patient_id, test_seizure_id=sid,
                preictal_def=definition_min, run_index=run,
                train=train, validation=val, test=test_pre + test_int,
            ))
    return splits


def _draw(pool: list[Segment], n: int, rng, what: str) -> list[Segment]:
    if len(pool) < n:
        warnings.warn(f"{what}: pool ({len(pool)}) smaller than requested ({n}); using all",
                      stacklevel=3)
        return list(pool)
    idx = rng.choice(len(pool), size=n, replace=False)
    return [pool[i] for i in sorted(idx)]


def _stratified_split(items: list[Segment], frac: float, rng):
    items = list(items)
    order = rng.permutation(len(items))
    n_val = int(round(len(items) * frac))
    val_idx = set(order[:n_val].tolist())
    train = [s for i, s in enumerate(items) if i not in val_idx]
    val = [s for i, s in enumerate(items) if i in val_idx]
    return train, val


# ---------------------------------------------------------------------------
# manifest IO
# ---------------------------------------------------------------------------

MANIFEST_COLUMNS = ["patient", "seizure", "run", "role", "file", "offset_s", "label",
                    "t_onset_min"]


def write_manifest(splits: list[SplitSpec], path) -> None:
    rows = []
    for sp in splits:
        for role, segs in (("train", sp.train), ("validation", sp.validation),
                           ("test", sp.test)):
            for seg in segs:
                rows.append((
                    sp.patient_id, sp.test_seizure_id, sp.run_index, role, seg.file,
                    f"{seg.offset_s:.8f}", seg.label,
                    "" if seg.t_onset_min is None else f"{seg.t_onset_min:.6f}",
                ))
    frame = pd.DataFrame(rows, columns=MANIFEST_COLUMNS)
    frame.to_csv(path, index=False)


def read_manifest(path) -> pd.DataFrame:
    frame = pd.read_csv(path, dtype={"file": str, "role": str})
    missing = set(MANIFEST_COLUMNS) - set(frame.columns)
    if missing:
        raise ValidationError(f"manifest {path} missing columns: {sorted(missing)}")
    return frame
