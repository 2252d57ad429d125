"""Continuous-output timing measures and the CIOPR score.

From a smoothed prediction series and its sigmoid fit this module derives:

* TP   - transition period: time between the 5% and 95% amplitude points
         of the fitted curve, 2*ln(19)/b in closed form;
* ND   - negative duration: interictal-style output before the transition;
* SPC  - seizure prediction convergence: earliest sustained time before
         onset at which the 3-block output mean stays at >= 99% of its
         maximum through onset;
* error terms over the SPC and ND regions, their effective products, an
  inflection compensation term, and the combined CIOPC score whose
  group-normalized ratio (CIOPR) compares preictal definitions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import ValidationError
from .curvefit import SigmoidFit, SmoothedSeries

LN19 = math.log(19.0)
ETA_EPS = 1e-9
SPC_THRESHOLD = 0.99
SPC_RUN_BLOCKS = 3


@dataclass
class CioprReport:
    seizure_id: int
    definition_min: int
    nd_min: float
    tp_min: float
    spc_min: float
    spc_err: float
    nd_err: float
    spc_eff: float
    nd_eff: float
    infl_comp: float
    eta: float
    ciopc: float
    ciopr: float
    n_spc: int
    n_nd: int
    transition_start_min: float
    transition_end_min: float
    inflection_min: float
    rho: float


def transition_period(fit: SigmoidFit) -> tuple[float, float, float]:
    """Transition boundaries and length from the fitted sigmoid.

    The boundaries solve f(x) = d + 0.05a and f(x) = d + 0.95a, which for a
    logistic are x = c -/+ ln(19)/b; both are returned in minutes before
    onset (start = earlier = larger value). TP = 2*ln(19)/b.
    """
    if not fit.converged:
        raise ValidationError("transition period requires a converged fit")
    if fit.b <= 0:
        raise ValidationError(f"transition period requires b > 0, got {fit.b}")
    half = LN19 / fit.b
    start_min = fit.c + half
    end_min = fit.c - half
    return start_min, end_min, 2.0 * half


def negative_duration(sm: SmoothedSeries, transition_start_min: float) -> float:
    """Minutes between the first prediction and the transition start, floored at 0."""
    return max(0.0, sm.window_min - transition_start_min)


def spc(sm: SmoothedSeries, threshold: float = SPC_THRESHOLD,
        run_blocks: int = SPC_RUN_BLOCKS) -> tuple[float, int]:
    """Seizure prediction convergence time and its block count.

    Means over `run_blocks` consecutive smoothed predictions are scanned;
    with M their maximum, the convergence region is the longest run of
    windows ending at onset whose mean stays >= threshold*M. SPC is the
    start time (minutes before onset) of the earliest block covered by
    that run; n_spc counts the smoothed blocks from there to onset.
    Output that dips back below the threshold right before onset never
    converged, giving SPC = 0.
    """
    n = len(sm)
    if n < run_blocks:
        raise ValidationError(f"need at least {run_blocks} blocks, got {n}")
    y = sm.y
    means = np.array([y[j:j + run_blocks].mean() for j in range(n - run_blocks + 1)])
    peak = means.max()
    ok = means >= threshold * peak

    if not ok[-1]:
        return 0.0, 0
    j = ok.size - 1
    while j > 0 and ok[j - 1]:
        j -= 1
    spc_min = float(sm.block_start_min[j])
    return spc_min, n - j


def region_errors(sm: SmoothedSeries, spc_start_min: float,
                  nd_end_min: float) -> tuple[float, float, int, int]:
    """Mean error terms over the convergence and interictal-style regions.

    The SPC region holds smoothed blocks lying within spc_start_min of
    onset (error |1 - y|); the ND region holds blocks earlier than
    nd_end_min before onset (error |y|). Block membership is decided at
    midpoints. Empty regions contribute a zero error with n = 0.
    """
    mids = sm.t_onset_min
    spc_sel = mids <= spc_start_min
    nd_sel = mids > nd_end_min
    spc_err = float(np.abs(1.0 - sm.y[spc_sel]).mean()) if spc_sel.any() else 0.0
    nd_err = float(np.abs(sm.y[nd_sel]).mean()) if nd_sel.any() else 0.0
    return spc_err, nd_err, int(spc_sel.sum()), int(nd_sel.sum())


@dataclass
class TimingMeasures:
    """Raw per-definition measures feeding the group-level CIOPC computation."""

    definition_min: int
    spc_min: float
    nd_min: float
    tp_min: float
    spc_err: float
    nd_err: float
    inflection_min: float
    n_spc: int = 0
    n_nd: int = 0
    transition_start_min: float = float("nan")
    transition_end_min: float = float("nan")
    rho: float = float("nan")


def measure(sm: SmoothedSeries, fit: SigmoidFit, definition_min: int) -> TimingMeasures:
    """Derive all timing measures for one (seizure, definition) evaluation."""
    start_min, end_min, tp_min = transition_period(fit)
    nd_min = negative_duration(sm, start_min)
    spc_min, _ = spc(sm)
    spc_err, nd_err, n_spc, n_nd = region_errors(sm, spc_min, start_min)
    return TimingMeasures(
        definition_min=definition_min, spc_min=spc_min, nd_min=nd_min, tp_min=tp_min,
        spc_err=spc_err, nd_err=nd_err, inflection_min=fit.c, n_spc=n_spc, n_nd=n_nd,
        transition_start_min=start_min, transition_end_min=end_min, rho=fit.rho,
    )


def ciopc(group: list[TimingMeasures]) -> dict[int, float]:
    """Combined score per definition for one seizure's comparison group.

    SPC_eff = SPC*(1 - SPC_err) and ND_eff = ND*(1 - ND_err). The
    inflection compensation restores the ND lost by a definition whose
    fitted inflection sits earlier than the group's latest one, discounted
    by the same error weighting as ND_eff. The weighting
    eta = min(1, SPC_eff / (ND_eff + Infl_comp)) caps the second term so
    hours of clean interictal output can never outweigh the convergence
    term:

        CIOPC = SPC_eff + eta * (ND_eff + Infl_comp)
    """
    if not group:
        raise ValidationError("empty comparison group")
    latest_inflection = min(m.inflection_min for m in group)
    out = {}
    for m in group:
        spc_eff = m.spc_min * (1.0 - m.spc_err)
        nd_eff = m.nd_min * (1.0 - m.nd_err)
        infl_comp = max(0.0, m.inflection_min - latest_inflection) * (1.0 - m.nd_err)
        second = nd_eff + infl_comp
        eta = min(1.0, spc_eff / max(second, ETA_EPS))
        out[m.definition_min] = spc_eff + eta * second
    return out


def ciopc_terms(m: TimingMeasures, latest_inflection: float) -> dict[str, float]:
    """Expanded intermediate terms for reporting; mirrors ciopc()."""
    spc_eff = m.spc_min * (1.0 - m.spc_err)
    nd_eff = m.nd_min * (1.0 - m.nd_err)
    infl_comp = max(0.0, m.inflection_min - latest_inflection) * (1.0 - m.nd_err)
    second = nd_eff + infl_comp
    eta = min(1.0, spc_eff / max(second, ETA_EPS))
    return {
        "spc_eff": spc_eff, "nd_eff": nd_eff, "infl_comp": infl_comp,
        "eta": eta, "ciopc": spc_eff + eta * second,
    }


def ciopr_normalize(ciopc_by_def: dict[int, float]) -> dict[int, float]:
    """Normalize a seizure's CIOPC values by their maximum.

    The best definition scores exactly 1. If every CIOPC is <= 0 the ratio
    is undefined and every definition maps to NaN.
    """
    if not ciopc_by_def:
        raise ValidationError("no definitions evaluated")
    top = max(ciopc_by_def.values())
    if top <= 0.0:
        return {k: float("nan") for k in ciopc_by_def}
    return {k: v / top for k, v in ciopc_by_def.items()}


def score_seizure_group(measures: list[TimingMeasures],
                        seizure_id: int) -> list[CioprReport]:
    """Full CIOPC -> CIOPR chain for one seizure across its definitions."""
    scores = ciopc(measures)
    ratios = ciopr_normalize(scores)
    latest_inflection = min(m.inflection_min for m in measures)
    reports = []
    for m in measures:
        terms = ciopc_terms(m, latest_inflection)
        reports.append(CioprReport(
            seizure_id=seizure_id, definition_min=m.definition_min,
            nd_min=m.nd_min, tp_min=m.tp_min, spc_min=m.spc_min,
            spc_err=m.spc_err, nd_err=m.nd_err,
            spc_eff=terms["spc_eff"], nd_eff=terms["nd_eff"],
            infl_comp=terms["infl_comp"], eta=terms["eta"],
            ciopc=scores[m.definition_min], ciopr=ratios[m.definition_min],
            n_spc=m.n_spc, n_nd=m.n_nd,
            transition_start_min=m.transition_start_min,
            transition_end_min=m.transition_end_min,
            inflection_min=m.inflection_min, rho=m.rho,
        ))
    return reports
