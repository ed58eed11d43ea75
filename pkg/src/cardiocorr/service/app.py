"""FastAPI service wrapping the analysis pipeline.

Endpoints take waveform or trace data inline and return report structures;
file handling stays with the clients (see the bundled CLI).  Pipeline
errors map to HTTP 400 with the exception class name in the body.
"""

from __future__ import annotations

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import monitor, pipeline, synth
from ..errors import CardiocorrError
from ..events import TimedEvent, TimedTrace
from ..ingest import SyncedRecord, Waveform
from . import schemas

API_PREFIX = "/api/v1"


def _to_trace(items: list[schemas.TimedEventModel]) -> TimedTrace:
    return TimedTrace(tuple(TimedEvent(e.label, e.time_ms) for e in items))


def _trace_models(trace: TimedTrace) -> list[schemas.TimedEventModel]:
    return [schemas.TimedEventModel(label=e.label, time_ms=e.time_ms) for e in trace]


def _policy(model: schemas.IntervalPolicyModel | None, start: str, end: str,
            bound_ms: float) -> monitor.TimedAutomaton:
    if model is None:
        return monitor.build_interval_policy(start, end, bound_ms)
    return monitor.build_interval_policy(
        model.start_event, model.end_event, model.bound_ms, name=model.name
    )


def _record_from_payload(payload: schemas.RecordPayload) -> SyncedRecord:
    n = min(len(payload.ecg), len(payload.ppg))
    return SyncedRecord(
        ecg=Waveform(np.asarray(payload.ecg[:n]), fs=payload.fs_hz, label="ecg"),
        ppg=Waveform(np.asarray(payload.ppg[:n]), fs=payload.fs_hz, label="ppg"),
        record_id=payload.record_id,
    )


def _config_from_model(cfg: schemas.AnalyzeConfigModel) -> pipeline.AnalysisConfig:
    return pipeline.AnalysisConfig(
        guard_bound_ms=cfg.guard_bound_ms,
        lag_window_ms=tuple(cfg.lag_window_ms),
        thresholds=pipeline.ObservationThresholds(**cfg.thresholds.model_dump()),
        ppg_band=tuple(cfg.ppg_band) if cfg.ppg_band else None,
        ecg_band=tuple(cfg.ecg_band) if cfg.ecg_band else None,
        expected_rate_hint=cfg.expected_rate_hint,
        listwise=cfg.listwise,
    )


def _cycle_rows(analysis: pipeline.RecordAnalysis) -> list[schemas.CycleRowModel]:
    rows = []
    for i, c in enumerate(analysis.series):
        kwargs = {"cycle_index": i}
        for name in ("pr_ms", "qr_ms", "rp_ms", "rt_ms", "qt_ms", "rr_ms"):
            kwargs[name] = getattr(c.ecg_intervals, name) if c.ecg_intervals else None
        for name in ("systole_ms", "diastole_ms", "peak_to_peak_ms",
                     "pulse_interval_ms", "delta_t_ms"):
            kwargs[name] = getattr(c.ppg_intervals, name) if c.ppg_intervals else None
        rows.append(schemas.CycleRowModel(**kwargs))
    return rows


def _record_report(analysis: pipeline.RecordAnalysis) -> schemas.RecordReportModel:
    doc = pipeline.record_report_dict(analysis)
    doc["cycles"] = [r.model_dump() for r in _cycle_rows(analysis)]
    return schemas.RecordReportModel.model_validate(doc)


def analyze(req: schemas.AnalyzeRequest) -> schemas.AnalyzeResponse:
    cfg = _config_from_model(req.config)
    analyses = [
        pipeline.analyze_record(_record_from_payload(p), cfg) for p in req.records
    ]
    pooled = pipeline.pool_records(analyses, cfg)
    pooled_doc = pipeline.full_report_dict(analyses, pooled)["pooled"]
    return schemas.AnalyzeResponse(
        records=[_record_report(a) for a in analyses],
        pooled=schemas.PooledReportModel.model_validate(pooled_doc),
    )


def run_monitors(req: schemas.MonitorRequest) -> schemas.MonitorResponse:
    ecg_policy = _policy(req.ecg_policy, "p", "r", req.guard_bound_ms)
    ppg_policy = _policy(req.ppg_policy, "F", "P", req.guard_bound_ms)
    ecg_verdicts = monitor.run_monitor(ecg_policy, _to_trace(req.ecg_trace))
    ppg_verdicts = monitor.run_monitor(ppg_policy, _to_trace(req.ppg_trace))
    composed = monitor.compose(ecg_verdicts, ppg_verdicts)
    agreement = monitor.agreement_rate(composed) if composed.rows else None
    composed_true = monitor.composed_true_rate(composed) if composed.rows else None
    return schemas.MonitorResponse(
        policy=f"{ecg_policy.name} || {ppg_policy.name}",
        rows=[
            schemas.VerdictRowModel(cycle_index=r.cycle_index, ecg=r.ecg,
                                    ppg=r.ppg, composed=r.composed)
            for r in composed
        ],
        agreement_rate=agreement,
        composed_true_rate=composed_true,
        dropped_cycles=composed.dropped,
        n_ecg_verdicts=len(ecg_verdicts),
        n_ppg_verdicts=len(ppg_verdicts),
    )


def _spec_from_request(req: schemas.SynthRequest) -> synth.SynthSpec:
    return synth.SynthSpec(
        n_cycles=req.n_cycles,
        rr_mean_ms=req.rr_mean_ms,
        rr_jitter_ms=req.rr_jitter_ms,
        pr_mean_ms=req.pr_mean_ms,
        pr_jitter_ms=req.pr_jitter_ms,
        pat_ms=req.pat_ms,
        pat_jitter_ms=req.pat_jitter_ms,
        delta_t_ms=req.delta_t_ms,
        fs=req.fs,
        noise_sigma=req.noise_sigma,
        seed=req.seed,
    )


def synth_events(req: schemas.SynthRequest) -> schemas.SynthEventsResponse:
    ecg_trace, ppg_trace, truth = synth.gen_event_streams(_spec_from_request(req))
    return schemas.SynthEventsResponse(
        ecg_trace=_trace_models(ecg_trace),
        ppg_trace=_trace_models(ppg_trace),
        ground_truth=schemas.GroundTruthModel.model_validate(truth.to_dict()),
    )


def synth_waveforms(req: schemas.SynthRequest) -> schemas.SynthWaveformsResponse:
    record, truth = synth.gen_waveforms(_spec_from_request(req))
    return schemas.SynthWaveformsResponse(
        record=schemas.RecordPayload(
            record_id=record.record_id,
            fs_hz=record.fs,
            ecg=record.ecg.samples.tolist(),
            ppg=record.ppg.samples.tolist(),
        ),
        ground_truth=schemas.GroundTruthModel.model_validate(truth.to_dict()),
    )


def default_policies(guard_bound_ms: float = 210.0) -> dict:
    pair = pipeline.default_policy_pair(guard_bound_ms)
    return {"name": pair.name, "ecg": pair.ecg.to_dict(), "ppg": pair.ppg.to_dict()}


def create_app() -> FastAPI:
    app = FastAPI(
        title="cardiocorr",
        description="ECG/PPG event correlation: delineation, timed runtime "
                    "monitors and interval statistics.",
        version="0.1.0",
    )

    @app.exception_handler(CardiocorrError)
    async def pipeline_error(request: Request, exc: CardiocorrError):
        return JSONResponse(
            status_code=400,
            content=schemas.ErrorResponse(
                error=type(exc).__name__, detail=str(exc)
            ).model_dump(),
        )

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok", "service": "cardiocorr", "version": "0.1.0"}

    @app.post(f"{API_PREFIX}/analyze", response_model=schemas.AnalyzeResponse)
    def analyze_endpoint(req: schemas.AnalyzeRequest) -> schemas.AnalyzeResponse:
        return analyze(req)

    @app.post(f"{API_PREFIX}/monitor/run", response_model=schemas.MonitorResponse)
    def monitor_endpoint(req: schemas.MonitorRequest) -> schemas.MonitorResponse:
        return run_monitors(req)

    @app.post(f"{API_PREFIX}/synth/events", response_model=schemas.SynthEventsResponse)
    def synth_events_endpoint(req: schemas.SynthRequest) -> schemas.SynthEventsResponse:
        return synth_events(req)

    @app.post(f"{API_PREFIX}/synth/waveforms", response_model=schemas.SynthWaveformsResponse)
    def synth_waveforms_endpoint(req: schemas.SynthRequest) -> schemas.SynthWaveformsResponse:
        return synth_waveforms(req)

    @app.get(f"{API_PREFIX}/policies/default")
    def default_policies_endpoint(guard_bound_ms: float = 210.0) -> dict:
        return default_policies(guard_bound_ms)

    return app


app = create_app()
