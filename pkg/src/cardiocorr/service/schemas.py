"""Pydantic request/response models for the analysis service."""

from __future__ import annotations

from pydantic import BaseModel, Field


class TimedEventModel(BaseModel):
    label: str
    time_ms: float = Field(ge=0)


class IntervalPolicyModel(BaseModel):
    name: str | None = None
    start_event: str
    end_event: str
    bound_ms: float = Field(gt=0)


class ThresholdsModel(BaseModel):
    obs1_min_r: float = 0.95
    obs2_min_r_squared: float = 0.90
    obs3_min_r: float = 0.90
    obs4_min_r: float = 0.60
    lag_lo_ms: float = 600.0
    lag_hi_ms: float = 700.0
    min_agreement: float = 0.90


class AnalyzeConfigModel(BaseModel):
    guard_bound_ms: float = Field(default=210.0, gt=0)
    lag_window_ms: tuple[float, float] = (200.0, 1200.0)
    thresholds: ThresholdsModel = ThresholdsModel()
    ppg_band: tuple[float, float] | None = None
    ecg_band: tuple[float, float] | None = None
    expected_rate_hint: float | None = None
    listwise: bool = False


class RecordPayload(BaseModel):
    record_id: str
    fs_hz: float = Field(gt=0)
    ecg: list[float]
    ppg: list[float]


class AnalyzeRequest(BaseModel):
    records: list[RecordPayload] = Field(min_length=1)
    config: AnalyzeConfigModel = AnalyzeConfigModel()


class CorrelationCellModel(BaseModel):
    r: float | None = None
    t_stat: float | None = None
    p_two_sided: float | None = None
    n: int | None = None
    failure: str | None = None


class RegressionModel(BaseModel):
    slope_b1: float | None = None
    lag_time_ms: float | None = None
    r_squared: float | None = None
    n: int | None = None


class DescriptivesModel(BaseModel):
    interval: str
    n: int
    mean_ms: float
    sd_ms: float
    skewness: float
    kurtosis_excess: float


class CorrelationSectionModel(BaseModel):
    grid: dict[str, dict[str, CorrelationCellModel]]
    rr_vs_peak_to_peak: CorrelationCellModel
    descriptives: list[DescriptivesModel]


class RegressionSectionModel(BaseModel):
    p_peak_to_onset: RegressionModel
    r_peak_to_systolic: RegressionModel


class VerdictRowModel(BaseModel):
    cycle_index: int
    ecg: bool
    ppg: bool
    composed: bool


class MonitorSectionModel(BaseModel):
    policy: str
    agreement_rate: float | None
    composed_true_rate: float | None
    dropped_cycles: int
    verdicts: list[VerdictRowModel]


class ObservationModel(BaseModel):
    key: str
    description: str
    value: float | None
    threshold: str
    passed: bool | None


class CycleRowModel(BaseModel):
    cycle_index: int
    pr_ms: float | None = None
    qr_ms: float | None = None
    rp_ms: float | None = None
    rt_ms: float | None = None
    qt_ms: float | None = None
    rr_ms: float | None = None
    systole_ms: float | None = None
    diastole_ms: float | None = None
    peak_to_peak_ms: float | None = None
    pulse_interval_ms: float | None = None
    delta_t_ms: float | None = None


class RecordReportModel(BaseModel):
    record_id: str
    fs_hz: float
    n_cycles: int
    n_paired: int
    ambiguous_pairings: int
    correlation: CorrelationSectionModel
    regression: RegressionSectionModel
    monitors: list[MonitorSectionModel]
    observations: list[ObservationModel]
    cycles: list[CycleRowModel]


class PooledReportModel(BaseModel):
    n_records: int
    n_cycles: int
    correlation: CorrelationSectionModel
    regression: RegressionSectionModel
    agreement_rate: float | None
    observations: list[ObservationModel]


class AnalyzeResponse(BaseModel):
    records: list[RecordReportModel]
    pooled: PooledReportModel


class MonitorRequest(BaseModel):
    ecg_trace: list[TimedEventModel]
    ppg_trace: list[TimedEventModel]
    guard_bound_ms: float = Field(default=210.0, gt=0)
    ecg_policy: IntervalPolicyModel | None = None
    ppg_policy: IntervalPolicyModel | None = None


class MonitorResponse(BaseModel):
    policy: str
    rows: list[VerdictRowModel]
    agreement_rate: float | None
    composed_true_rate: float | None
    dropped_cycles: int
    n_ecg_verdicts: int
    n_ppg_verdicts: int


class SynthRequest(BaseModel):
    n_cycles: int = Field(ge=0)
    rr_mean_ms: float = 800.0
    rr_jitter_ms: float = 0.0
    pr_mean_ms: float = 160.0
    pr_jitter_ms: float = 0.0
    pat_ms: float = 650.0
    pat_jitter_ms: float = 0.0
    delta_t_ms: float = 250.0
    fs: float = 125.0
    noise_sigma: float = 0.0
    seed: int = 0


class GroundTruthModel(BaseModel):
    times_ms: dict[str, list[float]]
    indices: dict[str, list[int]] | None = None


class SynthEventsResponse(BaseModel):
    ecg_trace: list[TimedEventModel]
    ppg_trace: list[TimedEventModel]
    ground_truth: GroundTruthModel


class SynthWaveformsResponse(BaseModel):
    record: RecordPayload
    ground_truth: GroundTruthModel


class ErrorResponse(BaseModel):
    error: str
    detail: str
