import numpy as np
import pandas as pd
import pytest

from oppeval.curvefit import SigmoidFit
from oppeval.report import (OPP_COLUMNS, decide_opp, opp_summary_rows,
                            plot_profile, select_opp)


def metrics_frame(rows):
    frame = pd.DataFrame(rows, columns=["patient", "definition_min", "f1"])
    frame["scope"] = "patient"
    return frame


def ciopr_frame(rows):
    return pd.DataFrame(rows, columns=["patient", "seizure", "definition_min",
                                       "ciopr"])


class TestSelectOpp:
    def test_plain_argmax(self):
        assert select_opp({60: 0.8, 45: 0.9, 30: 0.7, 15: 0.2}) == 45

    def test_tie_prefers_shorter(self):
        assert select_opp({60: 0.9, 45: 0.9, 30: 0.1, 15: 0.1}) == 45
        assert select_opp({60: 0.5, 15: 0.5}) == 15

    def test_nan_entries_skipped(self):
        assert select_opp({60: float("nan"), 45: 0.3}) == 45

    def test_all_nan_raises(self):
        with pytest.raises(ValueError):
            select_opp({60: float("nan")})


class TestDecideOpp:
    def test_ciopr_criterion_when_scored(self):
        ciopr = ciopr_frame([("p01", 1, 60, 0.9), ("p01", 1, 45, 1.0),
                             ("p01", 2, 60, 1.0), ("p01", 2, 45, 0.8)])
        metrics = metrics_frame([("p01", 60, 0.5), ("p01", 45, 0.99)])
        (dec,) = decide_opp(ciopr, metrics)
        assert dec.criterion == "ciopr"
        # means: 60 -> 0.95, 45 -> 0.90
        assert dec.opp_min == 60

    def test_f1_fallback_without_scored_seizures(self):
        metrics = metrics_frame([("p01", 60, 0.5), ("p01", 45, 0.99),
                                 ("p01", 30, 0.7), ("p01", 15, 0.6)])
        (dec,) = decide_opp(ciopr_frame([]), metrics)
        assert dec.criterion == "f1"
        assert dec.opp_min == 45
        assert dec.ciopr_means == {}

    def test_mixed_patients(self):
        ciopr = ciopr_frame([("p02", 1, 60, 0.4), ("p02", 1, 15, 1.0)])
        metrics = metrics_frame([("p01", 60, 0.3), ("p01", 15, 0.8),
                                 ("p02", 60, 0.9), ("p02", 15, 0.2)])
        decisions = decide_opp(ciopr, metrics)
        by_pid = {d.patient: d for d in decisions}
        assert by_pid["p01"].criterion == "f1"
        assert by_pid["p01"].opp_min == 15
        assert by_pid["p02"].criterion == "ciopr"
        assert by_pid["p02"].opp_min == 15

    def test_summary_frame_schema(self):
        metrics = metrics_frame([("p01", 60, 0.5)])
        frame = opp_summary_rows(ciopr_frame([]), metrics)
        assert list(frame.columns) == OPP_COLUMNS
        assert frame["opp_min"].iloc[0] == 60


class TestPlot:
    def test_markers_present_once(self, tmp_path):
        t = np.linspace(156, 4, 20)
        fit = SigmoidFit(a=0.9, b=0.3, c=40.0, d=0.05, rho=0.99,
                         converged=True, residual_norm=0.01,
                         window_min=160.0, n_blocks=20)
        y = fit.evaluate_at_onset_minutes(t)
        path = tmp_path / "profile.svg"
        plot_profile(path, t, y, fit, transition_start_min=55.0,
                     transition_end_min=25.0, convergence_min=20.0,
                     title="demo")
        text = path.read_text()
        for gid in ("transition-boundary-start", "transition-boundary-end",
                    "convergence-marker"):
            assert text.count(f'id="{gid}"') == 1

    def test_same_input_same_bytes(self, tmp_path):
        t = np.linspace(156, 4, 20)
        fit = SigmoidFit(a=0.8, b=0.2, c=50.0, d=0.1, rho=0.99,
                         converged=True, residual_norm=0.01,
                         window_min=160.0, n_blocks=20)
        y = fit.evaluate_at_onset_minutes(t)
        plot_profile(tmp_path / "a.svg", t, y, fit, 55.0, 25.0, 20.0, "demo")
        plot_profile(tmp_path / "b.svg", t, y, fit, 55.0, 25.0, 20.0, "demo")
        assert (tmp_path / "a.svg").read_bytes() == (tmp_path / "b.svg").read_bytes()
