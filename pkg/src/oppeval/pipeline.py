"""Stage orchestration from raw corpus to final report artifacts.

Every stage reads only earlier stages' on-disk artifacts, so each can be
re-run in isolation; missing upstream artifacts are built on demand (a
missing corpus is an error instead, since data cannot be invented).
Layout under the output root:

    corpus/      recordings + summary annotations (from `synth` or external)
    preproc/     referenced + bandpassed recordings, same file names
    dataset/     eligibility table, split manifests, evaluation-window manifests
    models/      trained baseline weights per (definition, run, held-out seizure)
    evaluate/    per-split and pooled classification metrics
    ciopr/       sigmoid-fit dumps, timing measures, prediction-series exports
    opp/         per-patient optimal-preictal-period decisions
    stats/       Friedman omnibus + pairwise comparison table
    report/      final CSV tables and SVG output-profile plots
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
import pandas as pd

from . import ValidationError
from .ciopr import ciopc, ciopc_terms, ciopr_normalize, measure
from .classifier import (BaselineModel, export_predictions, extract_features,
                         import_predictions, predict, train_baseline)
from .config import EngineConfig
from .curvefit import fit_4pl, smooth
from .dataset import (RecordingExtent, SeizureEvent, SeizureRanges,
                      classify_time_ranges, extract_preictal, grid_segments,
                      loocv_splits, oversample, read_manifest, write_manifest)
from .metrics import auc, confusion_metrics, far_epoch
from .preprocess import Segment, design_fir_bandpass, preprocess_recording
from .signal_io import (AnnotationSet, load_npz, load_recording, parse_summary,
                        session_timeline, save_npz)
from .stats import friedman
from .synth import CorpusSpec, generate_corpus

WINDOW_COLUMNS = ["patient", "seizure", "file", "offset_s", "t_onset_min"]
ELIGIBILITY_COLUMNS = [
    "patient", "patient_eligible", "patient_reason", "seizure", "onset_s",
    "offset_s", "seizure_eligible", "seizure_reason", "profile_eligible",
    "window_start_s", "window_end_s", "interictal_s",
]
METRIC_COLUMNS = [
    "patient", "definition_min", "run", "seizure", "scope", "tp", "fp", "tn",
    "fn", "sen", "spe", "acc", "f1", "auc", "far_per_hour", "n_segments",
]
FIT_COLUMNS = [
    "patient", "seizure", "definition_min", "run", "a", "b", "c", "d", "rho",
    "converged", "residual_norm", "window_min", "n_blocks",
]
CIOPR_COLUMNS = [
    "patient", "seizure", "definition_min", "n_runs_used", "spc_min", "nd_min",
    "tp_min", "spc_err", "nd_err", "spc_eff", "nd_eff", "infl_comp", "eta",
    "ciopc", "ciopr", "n_spc", "n_nd", "transition_start_min",
    "transition_end_min", "inflection_min", "rho",
]
STATS_COLUMNS = [
    "metric", "kind", "pair", "statistic", "df", "p_value", "z", "p_raw",
    "p_adjusted", "reject", "rank_60", "rank_45", "rank_30", "rank_15",
]


@dataclass(frozen=True)
class Layout:
    root: Path

    def __init__(self, root: str | Path):
        object.__setattr__(self, "root", Path(root))

    @property
    def corpus(self) -> Path:
        return self.root / "corpus"

    @property
    def preproc(self) -> Path:
        return self.root / "preproc"

    @property
    def dataset(self) -> Path:
        return self.root / "dataset"

    @property
    def models(self) -> Path:
        return self.root / "models"

    @property
    def evaluate(self) -> Path:
        return self.root / "evaluate"

    @property
    def ciopr(self) -> Path:
        return self.root / "ciopr"

    @property
    def opp(self) -> Path:
        return self.root / "opp"

    @property
    def stats(self) -> Path:
        return self.root / "stats"

    @property
    def report(self) -> Path:
        return self.root / "report"


# ---------------------------------------------------------------------------
# session loading
# ---------------------------------------------------------------------------

@dataclass
class Session:
    patient_id: str
    annotations: dict[str, AnnotationSet]
    extents: list[RecordingExtent]
    seizures: list[SeizureEvent]


def list_patients(corpus_dir: Path) -> list[str]:
    if not corpus_dir.is_dir():
        return []
    return sorted(
        child.name for child in corpus_dir.iterdir()
        if child.is_dir() and list(child.glob("*-summary.txt"))
    )


def load_session(corpus_dir: Path, pid: str, config: EngineConfig) -> Session:
    pdir = corpus_dir / pid
    summary = sorted(pdir.glob("*-summary.txt"))[0]
    annotations = parse_summary(summary)
    timeline = session_timeline(annotations)
    origin = min(timeline.values())
    extents: list[RecordingExtent] = []
    raw_events: list[tuple[float, float]] = []
    for name, ann in annotations.items():
        path = pdir / name
        if not path.exists():
            raise FileNotFoundError(f"recording listed in {summary.name} not found: {path}")
        if ann.start_clock_s is not None and ann.end_clock_s is not None:
            duration = ann.end_clock_s - ann.start_clock_s
            if duration <= 0:  # end clock wrapped past midnight
                duration += 86400.0
        else:
            duration = load_recording(path, sample_rate_hz=config.sample_rate_hz,
                                      patient_id=pid).duration_s
        start = timeline[name] - origin
        extents.append(RecordingExtent(file=name, start_s=start, duration_s=duration))
        raw_events += [(start + onset, start + offset) for onset, offset in ann.events]
    raw_events.sort()
    seizures = [SeizureEvent(seizure_id=i + 1, onset_s=onset, offset_s=offset)
                for i, (onset, offset) in enumerate(raw_events)]
    return Session(patient_id=pid, annotations=annotations, extents=extents,
                   seizures=seizures)


def ciopr_window_segments(sr: SeizureRanges, extents: list[RecordingExtent],
                          config: EngineConfig, patient_id: str) -> list[Segment]:
    """Non-overlapping epochs tiling the continuous pre-onset window.

    The grid is anchored at the onset (not the file grid) so the last
    epoch always ends exactly at onset and block averaging sees gapless,
    complete blocks.
    """
    lo, hi = sr.continuous_window
    fs = config.sample_rate_hz
    n = int(math.floor((hi - lo) / config.epoch_s + 1e-9))
    segments = []
    for j in range(n, 0, -1):
        start = hi - j * config.epoch_s
        ext = next(
            (x for x in extents
             if x.start_s - 1e-9 <= start and start + config.epoch_s <= x.end_s + 1e-9),
            None)
        if ext is None:
            raise ValidationError(
                f"{patient_id} seizure {sr.seizure.seizure_id}: evaluation window "
                f"epoch at {start:.2f}s is not covered by a single recording")
        offset = round((start - ext.start_s) * fs) / fs
        segments.append(Segment(
            patient_id=patient_id, file=ext.file, offset_s=offset, label=None,
            t_onset_min=(hi - start) / 60.0))
    return segments


# ---------------------------------------------------------------------------
# ensure-chain
# ---------------------------------------------------------------------------

def ensure_corpus(lay: Layout) -> list[str]:
    patients = list_patients(lay.corpus)
    if not patients:
        raise FileNotFoundError(
            f"no corpus at {lay.corpus} (no patient directory with a "
            "*-summary.txt); run the synth stage or point --out at existing data")
    return patients


def ensure_preprocess(lay: Layout, config: EngineConfig) -> None:
    for pid in ensure_corpus(lay):
        n_rec = len(_recording_paths(lay.corpus / pid))
        done = lay.preproc / pid
        if not done.is_dir() or len(list(done.glob("*.npz"))) != n_rec:
            stage_preprocess(lay.root, config)
            return


def ensure_dataset(lay: Layout, config: EngineConfig) -> None:
    if not (lay.dataset / "eligibility.csv").exists():
        stage_dataset(lay.root, config)


def ensure_train(lay: Layout, config: EngineConfig) -> None:
    if not (lay.models / ".done").exists():
        stage_train(lay.root, config)


def ensure_evaluate(lay: Layout, config: EngineConfig) -> None:
    if not (lay.evaluate / "metrics.csv").exists():
        stage_evaluate(lay.root, config)


def ensure_ciopr(lay: Layout, config: EngineConfig) -> None:
    if not (lay.ciopr / "ciopr.csv").exists():
        stage_ciopr(lay.root, config)


def ensure_opp(lay: Layout, config: EngineConfig) -> None:
    if not (lay.opp / "opp_summary.csv").exists():
        stage_opp(lay.root, config)


def ensure_stats(lay: Layout, config: EngineConfig) -> None:
    if not (lay.stats / "stats.csv").exists():
        stage_stats(lay.root, config)


# ---------------------------------------------------------------------------
# stages
# ---------------------------------------------------------------------------

def stage_synth(out: str | Path, config: EngineConfig,
                spec: CorpusSpec = CorpusSpec(), seed: int | None = None) -> None:
    lay = Layout(out)
    generate_corpus(lay.corpus, spec, config, seed=seed)


def _recording_paths(patient_dir: Path) -> list[Path]:
    paths: list[Path] = []
    for pattern in ("*.npz", "*.csv", "*.edf"):
        paths += patient_dir.glob(pattern)
    return sorted(paths)


def _select_channels(rec, config: EngineConfig):
    if list(rec.channel_labels) == list(config.channels):
        return rec
    index = {label: i for i, label in enumerate(rec.channel_labels)}
    missing = [c for c in config.channels if c not in index]
    if missing:
        raise ValidationError(
            f"{rec.source}: configured channels missing from recording: {missing}")
    cols = [index[c] for c in config.channels]
    return replace(rec, samples=rec.samples[:, cols],
                   channel_labels=list(config.channels))


def stage_preprocess(out: str | Path, config: EngineConfig) -> None:
    lay = Layout(out)
    patients = ensure_corpus(lay)
    kernel = design_fir_bandpass(config.sample_rate_hz, config.filter.low_hz,
                                 config.filter.high_hz, config.filter.order)
    for pid in patients:
        dst = lay.preproc / pid
        dst.mkdir(parents=True, exist_ok=True)
        for path in _recording_paths(lay.corpus / pid):
            rec = load_recording(path, sample_rate_hz=config.sample_rate_hz,
                                 patient_id=pid)
            rec = _select_channels(rec, config)
            save_npz(preprocess_recording(rec, kernel), dst / (path.stem + ".npz"))


def stage_dataset(out: str | Path, config: EngineConfig) -> None:
    lay = Layout(out)
    patients = ensure_corpus(lay)
    lay.dataset.mkdir(parents=True, exist_ok=True)
    elig_rows = []
    for pid in patients:
        sess = load_session(lay.corpus, pid, config)
        patient = classify_time_ranges(sess.seizures, sess.extents, config, pid)
        interictal_s = sum(hi - lo for lo, hi in patient.interictal)
        if not patient.seizures:
            elig_rows.append((pid, patient.eligible, patient.exclusion_reason or "",
                              "", "", "", "", "", "", "", "", f"{interictal_s:.1f}"))
        for sr in patient.seizures:
            win = sr.continuous_window or ("", "")
            elig_rows.append((
                pid, patient.eligible, patient.exclusion_reason or "",
                sr.seizure.seizure_id, f"{sr.seizure.onset_s:.1f}",
                f"{sr.seizure.offset_s:.1f}", sr.eligible,
                sr.exclusion_reason or "", sr.ciopr_eligible,
                win[0] if win[0] == "" else f"{win[0]:.1f}",
                win[1] if win[1] == "" else f"{win[1]:.1f}",
                f"{interictal_s:.1f}",
            ))
        if not patient.eligible:
            continue

        onset_by_sid = {sr.seizure.seizure_id: sr.seizure.onset_s
                        for sr in patient.seizures}
        pool = grid_segments(patient.interictal, sess.extents, config, pid, label=0)
        for definition in config.preictal_definitions_min:
            preictal = extract_preictal(patient, sess.extents, definition, config)
            augmented = {
                sid: oversample(segs, config.oversample_overlap, config,
                                onset_s=onset_by_sid[sid], extents=sess.extents)
                for sid, segs in preictal.items()
            }
            splits = loocv_splits(
                augmented, pool, definition, n_runs=config.loocv_runs,
                seed=config.seed, val_fraction=config.val_fraction, patient_id=pid)
            write_manifest(splits, lay.dataset / f"manifest_{pid}_def{definition}.csv")

        window_rows = []
        for sr in patient.seizures:
            if sr.eligible and sr.ciopr_eligible:
                for seg in ciopr_window_segments(sr, sess.extents, config, pid):
                    window_rows.append((pid, sr.seizure.seizure_id, seg.file,
                                        f"{seg.offset_s:.8f}",
                                        f"{seg.t_onset_min:.6f}"))
        pd.DataFrame(window_rows, columns=WINDOW_COLUMNS).to_csv(
            lay.dataset / f"ciopr_windows_{pid}.csv", index=False)
    pd.DataFrame(elig_rows, columns=ELIGIBILITY_COLUMNS).to_csv(
        lay.dataset / "eligibility.csv", index=False)


# ---------------------------------------------------------------------------
# feature store
# ---------------------------------------------------------------------------

def _sample_key(offset_s: float, fs: float) -> int:
    return int(round(float(offset_s) * fs))

def _manifest_paths(lay: Layout, pid: str) -> list[Path]:
    return sorted(lay.dataset.glob(f"manifest_{pid}_def*.csv"))


def ensure_features(lay: Layout, pid: str, config: EngineConfig
                    ) -> dict[tuple[str, int], np.ndarray]:
    """Per-patient feature vectors for every segment any stage will touch.

    Keyed by (file, start-sample) so float formatting differences in the
    manifests can never split identities. Built once, then memoized on disk.
    """
    path = lay.models / f"features_{pid}.npz"
    if not path.exists():
        needed: dict[str, set[int]] = {}
        fs = config.sample_rate_hz
        for mpath in _manifest_paths(lay, pid):
            frame = read_manifest(mpath)
            for file, off in zip(frame["file"], frame["offset_s"]):
                needed.setdefault(file, set()).add(_sample_key(off, fs))
        wpath = lay.dataset / f"ciopr_windows_{pid}.csv"
        if wpath.exists() and wpath.stat().st_size > 0:
            wf = pd.read_csv(wpath, dtype={"file": str})
            for file, off in zip(wf["file"], wf["offset_s"]):
                needed.setdefault(file, set()).add(_sample_key(off, fs))
        files, samples, vectors = [], [], []
        n_epoch = int(round(config.epoch_s * fs))
        for file in sorted(needed):
            rec = load_npz((lay.preproc / pid / file).with_suffix(".npz"))
            for s0 in sorted(needed[file]):
                seg = rec.samples[s0:s0 + n_epoch]
                if seg.shape[0] != n_epoch:
                    raise ValidationError(
                        f"{pid}/{file}: segment at sample {s0} runs past the recording")
                files.append(file)
                samples.append(s0)
                vectors.append(extract_features(seg, fs))
        lay.models.mkdir(parents=True, exist_ok=True)
        np.savez(path, files=np.array(files),
                 samples=np.array(samples, dtype=np.int64),
                 x=np.stack(vectors) if vectors else np.empty((0, 0)))
    with np.load(path, allow_pickle=False) as data:
        return {(str(f), int(s)): x
                for f, s, x in zip(data["files"], data["samples"], data["x"])}


def _matrix(rows: pd.DataFrame, feats: dict, fs: float) -> np.ndarray:
    return np.stack([feats[(file, _sample_key(off, fs))]
                     for file, off in zip(rows["file"], rows["offset_s"])])


# ---------------------------------------------------------------------------
# training / evaluation
# ---------------------------------------------------------------------------

def _model_name(definition: int, run: int, sid: int) -> str:
    return f"def{definition}_run{run}_sid{sid}.npz"


def _definition_of(manifest_path: Path) -> int:
    return int(manifest_path.stem.rsplit("def", 1)[1])


def stage_train(out: str | Path, config: EngineConfig) -> None:
    lay = Layout(out)
    ensure_dataset(lay, config)
    ensure_preprocess(lay, config)
    lay.models.mkdir(parents=True, exist_ok=True)
    n_trained = 0
    for pid in list_patients(lay.corpus):
        manifests = _manifest_paths(lay, pid)
        if not manifests:
            continue
        feats = ensure_features(lay, pid, config)
        mdir = lay.models / pid
        mdir.mkdir(parents=True, exist_ok=True)
        fs = config.sample_rate_hz
        for mpath in manifests:
            definition = _definition_of(mpath)
            frame = read_manifest(mpath)
            for (sid, run), group in frame.groupby(["seizure", "run"], sort=True):
                train_rows = group[group["role"] == "train"]
                val_rows = group[group["role"] == "validation"]
                seed = int(np.random.SeedSequence(
                    [config.seed, 7, definition, int(run), int(sid)]
                ).generate_state(1)[0])
                model = train_baseline(
                    _matrix(train_rows, feats, fs),
                    train_rows["label"].to_numpy(dtype=np.float64),
                    _matrix(val_rows, feats, fs),
                    val_rows["label"].to_numpy(dtype=np.float64),
                    lr=config.train.lr, batch_size=config.train.batch_size,
                    max_epochs=config.train.max_epochs,
                    patience=config.train.patience, seed=seed)
                model.save(mdir / _model_name(definition, int(run), int(sid)))
                n_trained += 1
    (lay.models / ".done").write_text(f"{n_trained}\n")


def _metric_row(pid: str, definition: int, run, sid, scope: str,
                scores: np.ndarray, labels: np.ndarray,
                config: EngineConfig) -> tuple:
    rep = confusion_metrics(scores, labels)
    return (pid, definition, "" if run is None else int(run),
            "" if sid is None else int(sid), scope, rep.tp, rep.fp, rep.tn,
            rep.fn, rep.sen, rep.spe, rep.acc, rep.f1, auc(scores, labels),
            far_epoch(scores, labels, config.epoch_s), rep.n_segments)


def stage_evaluate(out: str | Path, config: EngineConfig) -> None:
    lay = Layout(out)
    ensure_train(lay, config)
    lay.evaluate.mkdir(parents=True, exist_ok=True)
    rows = []
    global_pool: dict[int, list[tuple[np.ndarray, np.ndarray]]] = {}
    for pid in list_patients(lay.corpus):
        manifests = _manifest_paths(lay, pid)
        if not manifests:
            continue
        feats = ensure_features(lay, pid, config)
        fs = config.sample_rate_hz
        for mpath in manifests:
            definition = _definition_of(mpath)
            frame = read_manifest(mpath)
            patient_pool: list[tuple[np.ndarray, np.ndarray]] = []
            for (sid, run), group in frame.groupby(["seizure", "run"], sort=True):
                test_rows = group[group["role"] == "test"]
                labels = test_rows["label"].to_numpy(dtype=np.float64)
                model = BaselineModel.load(
                    lay.models / pid / _model_name(definition, int(run), int(sid)))
                scores = model.scores(_matrix(test_rows, feats, fs))
                rows.append(_metric_row(pid, definition, run, sid, "split",
                                        scores, labels, config))
                patient_pool.append((scores, labels))
            pooled_s = np.concatenate([s for s, _ in patient_pool])
            pooled_y = np.concatenate([y for _, y in patient_pool])
            rows.append(_metric_row(pid, definition, None, None, "patient",
                                    pooled_s, pooled_y, config))
            global_pool.setdefault(definition, []).append((pooled_s, pooled_y))
    for definition in sorted(global_pool, reverse=True):
        pooled_s = np.concatenate([s for s, _ in global_pool[definition]])
        pooled_y = np.concatenate([y for _, y in global_pool[definition]])
        rows.append(_metric_row("ALL", definition, None, None, "global",
                                pooled_s, pooled_y, config))
    pd.DataFrame(rows, columns=METRIC_COLUMNS).to_csv(
        lay.evaluate / "metrics.csv", index=False, float_format="%.6f")


# ---------------------------------------------------------------------------
# output-profile scoring
# ---------------------------------------------------------------------------

def stage_ciopr(out: str | Path, config: EngineConfig,
                predictions_dir: str | Path | None = None) -> None:
    lay = Layout(out)
    ensure_dataset(lay, config)
    if predictions_dir is None:
        ensure_train(lay, config)
    lay.ciopr.mkdir(parents=True, exist_ok=True)
    fit_rows: list[tuple] = []
    ciopr_rows: list[tuple] = []
    definitions = config.preictal_definitions_min
    runs = range(config.loocv_runs)

    for pid in list_patients(lay.corpus):
        wpath = lay.dataset / f"ciopr_windows_{pid}.csv"
        if not wpath.exists():
            continue
        wf = pd.read_csv(wpath, dtype={"file": str})
        if wf.empty:
            continue
        feats = None
        if predictions_dir is None:
            feats = ensure_features(lay, pid, config)
            pred_dir = lay.ciopr / "predictions" / pid
            pred_dir.mkdir(parents=True, exist_ok=True)
        profiles: dict[str, np.ndarray] = {}
        fs = config.sample_rate_hz

        for sid, group in wf.groupby("seizure", sort=True):
            sid = int(sid)
            group = group.sort_values("t_onset_min", ascending=False)
            t_onset = group["t_onset_min"].to_numpy(dtype=np.float64)
            fits, smoothed = {}, {}
            for definition in definitions:
                for run in runs:
                    tag = f"s{sid}_def{definition}_run{run}"
                    if predictions_dir is not None:
                        series = import_predictions(
                            Path(predictions_dir) / pid / f"{tag}.csv")
                    else:
                        model = BaselineModel.load(
                            lay.models / pid / _model_name(definition, run, sid))
                        series = predict(model, _matrix(group, feats, fs), t_onset,
                                         source=f"{pid}/{tag}")
                        export_predictions(series, pred_dir / f"{tag}.csv")
                    sm = smooth(series, config.ciopr.smooth_block_min)
                    fit = fit_4pl(sm)
                    fits[(definition, run)] = fit
                    smoothed[(definition, run)] = sm
                    fit_rows.append((pid, sid, definition, run, fit.a, fit.b,
                                     fit.c, fit.d, fit.rho, fit.converged,
                                     fit.residual_norm, fit.window_min,
                                     fit.n_blocks))
            valid_runs = [run for run in runs
                          if all(fits[(d, run)].converged for d in definitions)]
            if not valid_runs:
                continue

            acc: dict[int, dict[str, list[float]]] = {
                d: {k: [] for k in ("spc_min", "nd_min", "tp_min", "spc_err",
                                    "nd_err", "spc_eff", "nd_eff", "infl_comp",
                                    "eta", "ciopc", "n_spc", "n_nd",
                                    "transition_start_min", "transition_end_min",
                                    "inflection_min", "rho")}
                for d in definitions}
            for run in valid_runs:
                ms = {d: measure(smoothed[(d, run)], fits[(d, run)], d)
                      for d in definitions}
                scores = ciopc(list(ms.values()))
                latest_inflection = min(m.inflection_min for m in ms.values())
                for d in definitions:
                    terms = ciopc_terms(ms[d], latest_inflection)
                    bucket = acc[d]
                    for key in ("spc_min", "nd_min", "tp_min", "spc_err",
                                "nd_err", "n_spc", "n_nd",
                                "transition_start_min", "transition_end_min",
                                "inflection_min", "rho"):
                        bucket[key].append(getattr(ms[d], key))
                    for key in ("spc_eff", "nd_eff", "infl_comp", "eta"):
                        bucket[key].append(terms[key])
                    bucket["ciopc"].append(scores[d])

            mean_ciopc = {d: float(np.mean(acc[d]["ciopc"])) for d in definitions}
            ratios = ciopr_normalize(mean_ciopc)
            for d in definitions:
                bucket = acc[d]
                ciopr_rows.append((
                    pid, sid, d, len(valid_runs),
                    *(float(np.mean(bucket[k])) for k in
                      ("spc_min", "nd_min", "tp_min", "spc_err", "nd_err",
                       "spc_eff", "nd_eff", "infl_comp", "eta")),
                    mean_ciopc[d], ratios[d],
                    float(np.mean(bucket["n_spc"])), float(np.mean(bucket["n_nd"])),
                    *(float(np.mean(bucket[k])) for k in
                      ("transition_start_min", "transition_end_min",
                       "inflection_min", "rho")),
                ))

            run0 = valid_runs[0]
            for d in definitions:
                sm = smoothed[(d, run0)]
                fit = fits[(d, run0)]
                m0 = measure(sm, fit, d)
                profiles[f"s{sid}_def{d}_t"] = sm.t_onset_min
                profiles[f"s{sid}_def{d}_y"] = sm.y
                profiles[f"s{sid}_def{d}_fit"] = np.array([
                    fit.a, fit.b, fit.c, fit.d, fit.window_min,
                    m0.transition_start_min, m0.transition_end_min, m0.spc_min,
                    sm.block_min])
        if profiles:
            np.savez(lay.ciopr / f"profiles_{pid}.npz", **profiles)

    pd.DataFrame(fit_rows, columns=FIT_COLUMNS).to_csv(
        lay.ciopr / "fits.csv", index=False, float_format="%.6f")
    pd.DataFrame(ciopr_rows, columns=CIOPR_COLUMNS).to_csv(
        lay.ciopr / "ciopr.csv", index=False, float_format="%.6f")


def stage_opp(out: str | Path, config: EngineConfig) -> None:
    from .report import opp_summary_rows

    lay = Layout(out)
    ensure_ciopr(lay, config)
    ensure_evaluate(lay, config)
    lay.opp.mkdir(parents=True, exist_ok=True)
    ciopr_table = pd.read_csv(lay.ciopr / "ciopr.csv")
    metrics_table = pd.read_csv(lay.evaluate / "metrics.csv")
    frame = opp_summary_rows(ciopr_table, metrics_table)
    frame.to_csv(lay.opp / "opp_summary.csv", index=False, float_format="%.6f")


def stage_stats(out: str | Path, config: EngineConfig) -> None:
    lay = Layout(out)
    ensure_evaluate(lay, config)
    lay.stats.mkdir(parents=True, exist_ok=True)
    metrics_table = pd.read_csv(lay.evaluate / "metrics.csv")
    pooled = metrics_table[metrics_table["scope"] == "patient"]
    definitions = list(config.preictal_definitions_min)
    patients = sorted(pooled["patient"].unique())
    rows: list[tuple] = []
    if len(patients) >= 2:
        for metric in ("sen", "spe", "acc", "f1", "auc", "far_per_hour"):
            matrix = np.array([
                [float(pooled[(pooled["patient"] == pid)
                              & (pooled["definition_min"] == d)][metric].iloc[0])
                 for d in definitions]
                for pid in patients])
            if not np.all(np.isfinite(matrix)):
                continue
            report = friedman(matrix, group_labels=definitions)
            # mixed blank/number columns dodge float_format, so format here
            rows.append((metric, "omnibus", "", f"{report.statistic:.6f}",
                         report.df, f"{report.p_value:.6f}", "", "", "", "",
                         *(("" if d not in report.mean_ranks
                            else f"{report.mean_ranks[d]:.6f}")
                           for d in (60, 45, 30, 15))))
            for cmp in report.pairwise:
                rows.append((metric, "pairwise", f"{cmp.group_a}v{cmp.group_b}",
                             "", "", "", f"{cmp.z:.6f}", f"{cmp.p_raw:.6f}",
                             f"{cmp.p_adjusted:.6f}", cmp.reject,
                             "", "", "", ""))
    pd.DataFrame(rows, columns=STATS_COLUMNS).to_csv(
        lay.stats / "stats.csv", index=False)


def stage_report(out: str | Path, config: EngineConfig) -> None:
    from .report import emit_report

    lay = Layout(out)
    ensure_opp(lay, config)
    ensure_stats(lay, config)
    emit_report(lay, config)


def run_pipeline(out: str | Path, config: EngineConfig,
                 spec: CorpusSpec | None = None, seed: int | None = None) -> None:
    """Full chain for one call: synth (if requested) through report."""
    if spec is not None:
        stage_synth(out, config, spec, seed=seed)
    stage_report(out, config)
