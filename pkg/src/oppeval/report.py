"""Per-patient period selection and final report artifacts (tables + plots)."""
from __future__ import annotations

import shutil
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np
import pandas as pd

from .config import EngineConfig
from .curvefit import SigmoidFit

REPORT_DEFS = (60, 45, 30, 15)
OPP_COLUMNS = ["patient", "opp_min", "criterion",
               *(f"ciopr_{d}" for d in REPORT_DEFS),
               *(f"f1_{d}" for d in REPORT_DEFS)]

# stable ids inside the SVGs so plots stay bytewise reproducible
plt.rcParams["svg.hashsalt"] = "oppeval"


@dataclass(frozen=True)
class OppDecision:
    patient: str
    opp_min: int
    criterion: str  # "ciopr" when any seizure was scorable, else "f1"
    ciopr_means: dict[int, float]
    f1_means: dict[int, float]


def select_opp(score_by_def: dict[int, float]) -> int:
    """Definition with the highest score; ties go to the shorter period."""
    best = None
    for definition in sorted(score_by_def):
        score = score_by_def[definition]
        if np.isnan(score):
            continue
        if best is None or score > score_by_def[best]:
            best = definition
    if best is None:
        raise ValueError("no finite scores to select from")
    return best


def decide_opp(ciopr_table: pd.DataFrame, metrics_table: pd.DataFrame
               ) -> list[OppDecision]:
    pooled = metrics_table[metrics_table["scope"] == "patient"]
    patients = sorted(set(pooled["patient"]).union(ciopr_table["patient"])
                      if len(ciopr_table) else set(pooled["patient"]))
    decisions = []
    for pid in patients:
        crows = ciopr_table[ciopr_table["patient"] == pid] if len(ciopr_table) \
            else ciopr_table
        mrows = pooled[pooled["patient"] == pid]
        ciopr_means, f1_means = {}, {}
        for _, row in mrows.iterrows():
            f1_means[int(row["definition_min"])] = float(row["f1"])
        if len(crows):
            for definition, sub in crows.groupby("definition_min"):
                ciopr_means[int(definition)] = float(sub["ciopr"].mean())
        if ciopr_means:
            criterion, scores = "ciopr", ciopr_means
        else:
            # no seizure produced four converged fits in any run, so the
            # profile-timing score is unavailable and the classification
            # F1 across definitions decides instead
            criterion, scores = "f1", f1_means
        decisions.append(OppDecision(
            patient=pid, opp_min=select_opp(scores), criterion=criterion,
            ciopr_means=ciopr_means, f1_means=f1_means))
    return decisions


def opp_summary_rows(ciopr_table: pd.DataFrame, metrics_table: pd.DataFrame
                     ) -> pd.DataFrame:
    rows = []
    for dec in decide_opp(ciopr_table, metrics_table):
        rows.append((
            dec.patient, dec.opp_min, dec.criterion,
            *(dec.ciopr_means.get(d, float("nan")) for d in REPORT_DEFS),
            *(dec.f1_means.get(d, float("nan")) for d in REPORT_DEFS)))
    return pd.DataFrame(rows, columns=OPP_COLUMNS)


# ---------------------------------------------------------------------------
# plots
# ---------------------------------------------------------------------------

def plot_profile(path: Path, t_onset_min: np.ndarray, y: np.ndarray,
                 fit: SigmoidFit, transition_start_min: float,
                 transition_end_min: float, convergence_min: float,
                 title: str) -> None:
    """One seizure/definition output profile with its fitted sigmoid.

    The two transition boundaries and the convergence point are drawn as
    vertical lines carrying stable SVG gids so downstream tooling can find
    them without parsing coordinates.
    """
    fig, ax = plt.subplots(figsize=(6.4, 3.6))
    ax.plot(t_onset_min, y, "o", ms=4, color="#36618e", label="block mean")
    dense = np.linspace(float(t_onset_min[0]) + fit.window_min / 50.0, 0.0, 400)
    ax.plot(dense, fit.evaluate_at_onset_minutes(dense), "-",
            color="#b2452c", lw=1.5, label="4PL fit")
    start = ax.axvline(transition_start_min, color="#555555", lw=1.0,
                       linestyle="--", label="transition boundary")
    end = ax.axvline(transition_end_min, color="#555555", lw=1.0, linestyle="--")
    conv = ax.axvline(convergence_min, color="#2c7a3f", lw=1.2, linestyle=":",
                      label="convergence")
    start.set_gid("transition-boundary-start")
    end.set_gid("transition-boundary-end")
    conv.set_gid("convergence-marker")
    ax.set_xlabel("minutes before onset")
    ax.set_ylabel("smoothed classifier output")
    ax.set_ylim(-0.05, 1.1)
    ax.invert_xaxis()
    ax.set_title(title, fontsize=10)
    ax.legend(loc="upper left", fontsize=8, framealpha=0.9)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def _copy_table(src: Path, dst: Path, columns: list[str]) -> None:
    if src.exists():
        shutil.copyfile(src, dst)
    else:
        dst.write_text(",".join(columns) + "\n")


def emit_report(lay, config: EngineConfig) -> None:
    from .pipeline import (CIOPR_COLUMNS, METRIC_COLUMNS, STATS_COLUMNS,
                           list_patients)

    rdir = lay.report
    plots = rdir / "plots"
    plots.mkdir(parents=True, exist_ok=True)

    _copy_table(lay.ciopr / "ciopr.csv", rdir / "ciopr_seizures.csv", CIOPR_COLUMNS)
    _copy_table(lay.opp / "opp_summary.csv", rdir / "opp_summary.csv", OPP_COLUMNS)
    _copy_table(lay.stats / "stats.csv", rdir / "stats.csv", STATS_COLUMNS)

    metrics_path = lay.evaluate / "metrics.csv"
    if metrics_path.exists():
        # string-typed round trip: a filtered copy must not reformat numbers
        table = pd.read_csv(metrics_path, dtype=str, keep_default_na=False)
    else:
        table = pd.DataFrame(columns=METRIC_COLUMNS)
    for pid in list_patients(lay.corpus):
        table[table["patient"] == pid].to_csv(rdir / f"metrics_{pid}.csv",
                                              index=False)

    for profile_path in sorted(lay.ciopr.glob("profiles_*.npz")):
        pid = profile_path.stem.split("_", 1)[1]
        with np.load(profile_path) as data:
            tags = sorted({k.rsplit("_", 1)[0] for k in data.files},
                          key=lambda s: (int(s.split("_")[0][1:]),
                                         -int(s.split("def")[1])))
            for tag in tags:
                t = data[f"{tag}_t"]
                y = data[f"{tag}_y"]
                a, b, c, d, window, ts, te, spc, block = data[f"{tag}_fit"]
                fit = SigmoidFit(a=a, b=b, c=c, d=d, rho=float("nan"),
                                 converged=True, residual_norm=float("nan"),
                                 window_min=window, n_blocks=len(t))
                sid, definition = tag.split("_def")
                plot_profile(
                    plots / f"{pid}_{sid}_def{definition}.svg", t, y, fit,
                    transition_start_min=ts, transition_end_min=te,
                    convergence_min=spc,
                    title=f"{pid} seizure {sid[1:]}, {definition}-minute period")
