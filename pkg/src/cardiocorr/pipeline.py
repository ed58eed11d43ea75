"""End-to-end analysis: delineate a record pair, pair cycles, run the
parallel monitors, and evaluate the six correlation observations.

The report structure is schema-stable: every key is present even when a
value could not be computed (absent values are None, with reasons where
available).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import delineate, events, monitor, stats
from .errors import CardiocorrError, EmptyVerdicts
from .ingest import SyncedRecord


@dataclass(frozen=True)
class PolicyPair:
    """One policy per signal, composed per cycle."""

    name: str
    ecg: monitor.TimedAutomaton
    ppg: monitor.TimedAutomaton


def default_policy_pair(guard_bound_ms: float = 210.0) -> PolicyPair:
    """The PR-interval vs systole-period pairing under a shared guard."""
    return PolicyPair(
        name=f"pr_vs_systole_{guard_bound_ms:g}ms",
        ecg=monitor.build_interval_policy("p", "r", guard_bound_ms),
        ppg=monitor.build_interval_policy("F", "P", guard_bound_ms),
    )


@dataclass(frozen=True)
class ObservationThresholds:
    """Pass/fail gates for the six observations; all overridable."""

    obs1_min_r: float = 0.95
    obs2_min_r_squared: float = 0.90
    obs3_min_r: float = 0.90
    obs4_min_r: float = 0.60
    lag_lo_ms: float = 600.0
    lag_hi_ms: float = 700.0
    min_agreement: float = 0.90


@dataclass(frozen=True)
class AnalysisConfig:
    guard_bound_ms: float = 210.0
    lag_window_ms: tuple[float, float] = events.DEFAULT_LAG_WINDOW_MS
    thresholds: ObservationThresholds = field(default_factory=ObservationThresholds)
    policies: tuple[PolicyPair, ...] = ()
    ppg_band: tuple[float, float] | None = None
    ecg_band: tuple[float, float] | None = None
    expected_rate_hint: float | None = None
    listwise: bool = False

    def policy_pairs(self) -> tuple[PolicyPair, ...]:
        return self.policies or (default_policy_pair(self.guard_bound_ms),)


@dataclass(frozen=True)
class MonitorOutcome:
    policy_name: str
    verdicts: monitor.ComposedVerdicts
    agreement: float | None
    composed_true: float | None


@dataclass(frozen=True)
class Observation:
    key: str
    description: str
    value: float | None
    threshold: str
    passed: bool | None


@dataclass(frozen=True)
class RecordAnalysis:
    record_id: str
    fs: float
    n_cycles: int
    n_paired: int
    ambiguous_pairings: int
    series: events.CycleSeries
    table: stats.CorrelationTable
    regression_p_onset: stats.RegressionResult | None
    regression_r_systolic: stats.RegressionResult | None
    monitors: tuple[MonitorOutcome, ...]
    observations: tuple[Observation, ...]


def _regress(series: events.CycleSeries, ecg_attr: str, ppg_attr: str):
    xs, ys = [], []
    for c in series:
        a = getattr(c, ecg_attr)
        b = getattr(c, ppg_attr)
        if a is not None and b is not None:
            xs.append(a)
            ys.append(b)
    if len(xs) < 2:
        return None
    try:
        return stats.ols_lag(np.array(xs), np.array(ys))
    except CardiocorrError:
        return None


def _run_policy_pair(pair: PolicyPair, ecg_trace: events.TimedTrace,
                     ppg_trace: events.TimedTrace) -> MonitorOutcome:
    composed = monitor.compose(
        monitor.run_monitor(pair.ecg, ecg_trace),
        monitor.run_monitor(pair.ppg, ppg_trace),
    )
    try:
        agreement = monitor.agreement_rate(composed)
        composed_true = monitor.composed_true_rate(composed)
    except EmptyVerdicts:
        agreement = None
        composed_true = None
    return MonitorOutcome(pair.name, composed, agreement, composed_true)


def _evaluate_observations(table: stats.CorrelationTable,
                           reg_p_onset: stats.RegressionResult | None,
                           reg_r_systolic: stats.RegressionResult | None,
                           agreement: float | None,
                           th: ObservationThresholds) -> tuple[Observation, ...]:
    def cell_r(res) -> float | None:
        return res.r if res is not None else None

    rr_r = cell_r(table.rr_peak_to_peak)
    pr_sys_r = cell_r(table.cells[("pr_ms", "systole_ms")])
    rp_dia_r = cell_r(table.cells[("rp_ms", "diastole_ms")])
    obs = [
        Observation(
            "obs1", "RR interval correlates with PPG peak-to-peak interval",
            rr_r, f"r >= {th.obs1_min_r}",
            None if rr_r is None else rr_r >= th.obs1_min_r,
        ),
        Observation(
            "obs2", "P-peak stream maps linearly onto PPG onset stream",
            reg_p_onset.r_squared if reg_p_onset else None,
            f"r_squared >= {th.obs2_min_r_squared}",
            None if reg_p_onset is None
            else reg_p_onset.r_squared >= th.obs2_min_r_squared,
        ),
        Observation(
            "obs3", "PR interval correlates with PPG systole period",
            pr_sys_r, f"r >= {th.obs3_min_r}",
            None if pr_sys_r is None else pr_sys_r >= th.obs3_min_r,
        ),
        Observation(
            "obs4", "RP interval correlates with PPG diastole period",
            rp_dia_r, f"r >= {th.obs4_min_r}",
            None if rp_dia_r is None else rp_dia_r >= th.obs4_min_r,
        ),
        Observation(
            "obs5", "PPG onset lags the P-peak by the pulse arrival time",
            reg_p_onset.lag_time_ms if reg_p_onset else None,
            f"lag in [{th.lag_lo_ms}, {th.lag_hi_ms}] ms",
            None if reg_p_onset is None
            else th.lag_lo_ms <= reg_p_onset.lag_time_ms <= th.lag_hi_ms,
        ),
        Observation(
            "obs6", "PPG systolic peak lags the R-peak by the pulse arrival time",
            reg_r_systolic.lag_time_ms if reg_r_systolic else None,
            f"lag in [{th.lag_lo_ms}, {th.lag_hi_ms}] ms",
            None if reg_r_systolic is None
            else th.lag_lo_ms <= reg_r_systolic.lag_time_ms <= th.lag_hi_ms,
        ),
        Observation(
            "monitor_agreement", "parallel monitors agree across cycles",
            agreement, f"agreement > {th.min_agreement}",
            None if agreement is None else agreement > th.min_agreement,
        ),
    ]
    return tuple(obs)


def analyze_record(record: SyncedRecord, cfg: AnalysisConfig | None = None) -> RecordAnalysis:
    """Run the full pipeline on one synchronized record pair."""
    cfg = cfg or AnalysisConfig()
    ecg_w = record.ecg
    ppg_w = record.ppg
    if cfg.ecg_band is not None:
        ecg_w = delineate.bandpass(ecg_w, *cfg.ecg_band)
    if cfg.ppg_band is not None:
        ppg_w = delineate.bandpass(ppg_w, *cfg.ppg_band)

    r_peaks = delineate.detect_r_peaks(ecg_w)
    ecg_ev = delineate.delineate_ecg(ecg_w, r_peaks)
    ppg_ev = delineate.detect_ppg_events(ppg_w, cfg.expected_rate_hint)

    fs = record.fs
    series = events.compute_intervals(
        events.pair_cycles(ecg_ev, ppg_ev, fs, cfg.lag_window_ms)
    )
    table = stats.correlation_table(series, listwise=cfg.listwise)
    reg_p_onset = _regress(series, "p_ms", "onset_ms")
    reg_r_systolic = _regress(series, "r_ms", "systolic_ms")

    ecg_trace = events.to_timed_trace(ecg_ev, fs)
    ppg_trace = events.to_timed_trace(ppg_ev, fs)
    outcomes = tuple(
        _run_policy_pair(pair, ecg_trace, ppg_trace) for pair in cfg.policy_pairs()
    )
    agreement = outcomes[0].agreement if outcomes else None

    return RecordAnalysis(
        record_id=record.record_id,
        fs=fs,
        n_cycles=len(series),
        n_paired=series.n_paired,
        ambiguous_pairings=series.ambiguous_pairings,
        series=series,
        table=table,
        regression_p_onset=reg_p_onset,
        regression_r_systolic=reg_r_systolic,
        monitors=outcomes,
        observations=_evaluate_observations(
            table, reg_p_onset, reg_r_systolic, agreement, cfg.thresholds
        ),
    )


@dataclass(frozen=True)
class PooledAnalysis:
    """Cross-record statistics over the concatenated cycle series."""

    n_records: int
    n_cycles: int
    table: stats.CorrelationTable
    regression_p_onset: stats.RegressionResult | None
    regression_r_systolic: stats.RegressionResult | None
    agreement: float | None
    observations: tuple[Observation, ...]


def pool_records(analyses: list[RecordAnalysis], cfg: AnalysisConfig) -> PooledAnalysis:
    all_cycles: list[events.CardiacCycle] = []
    fs = analyses[0].fs if analyses else 0.0
    for a in analyses:
        all_cycles.extend(a.series.cycles)
    pooled_series = events.CycleSeries(cycles=tuple(all_cycles), fs=fs or 1.0)
    table = stats.correlation_table(pooled_series, listwise=cfg.listwise)

    # Regressions on event streams need within-record time axes, so pool the
    # per-record pairs rather than re-deriving them from the merged series.
    def pooled_regress(attr_a: str, attr_b: str):
        xs, ys = [], []
        for a in analyses:
            for c in a.series:
                va, vb = getattr(c, attr_a), getattr(c, attr_b)
                if va is not None and vb is not None:
                    xs.append(va)
                    ys.append(vb)
        if len(xs) < 2:
            return None
        try:
            return stats.ols_lag(np.array(xs), np.array(ys))
        except CardiocorrError:
            return None

    reg_p_onset = pooled_regress("p_ms", "onset_ms")
    reg_r_systolic = pooled_regress("r_ms", "systolic_ms")

    agree_n = 0
    agree_total = 0
    for a in analyses:
        for outcome in a.monitors[:1]:
            agree_total += len(outcome.verdicts)
            agree_n += sum(1 for r in outcome.verdicts if r.ecg == r.ppg)
    agreement = agree_n / agree_total if agree_total else None

    return PooledAnalysis(
        n_records=len(analyses),
        n_cycles=len(pooled_series),
        table=table,
        regression_p_onset=reg_p_onset,
        regression_r_systolic=reg_r_systolic,
        agreement=agreement,
        observations=_evaluate_observations(
            table, reg_p_onset, reg_r_systolic, agreement, cfg.thresholds
        ),
    )


def regression_dict(res: stats.RegressionResult | None) -> dict:
    if res is None:
        return {"slope_b1": None, "lag_time_ms": None, "r_squared": None, "n": None}
    return {"slope_b1": res.slope_b1, "lag_time_ms": res.lag_time_ms,
            "r_squared": res.r_squared, "n": res.n}


def observations_dict(obs: tuple[Observation, ...]) -> list[dict]:
    return [
        {"key": o.key, "description": o.description, "value": o.value,
         "threshold": o.threshold, "passed": o.passed}
        for o in obs
    ]


def record_report_dict(a: RecordAnalysis) -> dict:
    return {
        "record_id": a.record_id,
        "fs_hz": a.fs,
        "n_cycles": a.n_cycles,
        "n_paired": a.n_paired,
        "ambiguous_pairings": a.ambiguous_pairings,
        "correlation": stats.correlation_table_dict(a.table),
        "regression": {
            "p_peak_to_onset": regression_dict(a.regression_p_onset),
            "r_peak_to_systolic": regression_dict(a.regression_r_systolic),
        },
        "monitors": [
            {
                "policy": m.policy_name,
                "agreement_rate": m.agreement,
                "composed_true_rate": m.composed_true,
                "dropped_cycles": m.verdicts.dropped,
                "verdicts": [
                    {"cycle_index": r.cycle_index, "ecg": r.ecg, "ppg": r.ppg,
                     "composed": r.composed}
                    for r in m.verdicts
                ],
            }
            for m in a.monitors
        ],
        "observations": observations_dict(a.observations),
    }


def full_report_dict(analyses: list[RecordAnalysis], pooled: PooledAnalysis) -> dict:
    return {
        "records": [record_report_dict(a) for a in analyses],
        "pooled": {
            "n_records": pooled.n_records,
            "n_cycles": pooled.n_cycles,
            "correlation": stats.correlation_table_dict(pooled.table),
            "regression": {
                "p_peak_to_onset": regression_dict(pooled.regression_p_onset),
                "r_peak_to_systolic": regression_dict(pooled.regression_r_systolic),
            },
            "agreement_rate": pooled.agreement,
            "observations": observations_dict(pooled.observations),
        },
    }
