"""Command-line client for the analysis service.

All computation happens behind the service API; the CLI reads and writes
local files and forwards data as request models.  By default the service
runs in-process; pass ``--server http://host:port`` to talk to a remote
instance instead.

Exit codes: 0 success, 2 input/validation errors, 3 signal too short,
4 no verdicts produced, 1 anything else.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import events, ingest, stats
from .errors import (
    BadSpec,
    CardiocorrError,
    EmptyVerdicts,
    SignalTooShort,
    TimeRegression,
)
from .service import app as service
from .service import schemas

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_TOO_SHORT = 3
EXIT_EMPTY = 4


class ServiceClient:
    """In-process by default; HTTP when a base URL is given."""

    def __init__(self, base_url: str | None = None):
        self.base_url = base_url.rstrip("/") if base_url else None

    def _post(self, path: str, payload: dict) -> dict:
        import httpx

        resp = httpx.post(f"{self.base_url}{path}", json=payload, timeout=300.0)
        if resp.status_code == 400:
            doc = resp.json()
            raise_service_error(doc.get("error", ""), doc.get("detail", ""))
        resp.raise_for_status()
        return resp.json()

    def analyze(self, req: schemas.AnalyzeRequest) -> schemas.AnalyzeResponse:
        if self.base_url:
            doc = self._post(f"{service.API_PREFIX}/analyze", req.model_dump())
            return schemas.AnalyzeResponse.model_validate(doc)
        return service.analyze(req)

    def monitor(self, req: schemas.MonitorRequest) -> schemas.MonitorResponse:
        if self.base_url:
            doc = self._post(f"{service.API_PREFIX}/monitor/run", req.model_dump())
            return schemas.MonitorResponse.model_validate(doc)
        return service.run_monitors(req)

    def synth_waveforms(self, req: schemas.SynthRequest) -> schemas.SynthWaveformsResponse:
        if self.base_url:
            doc = self._post(f"{service.API_PREFIX}/synth/waveforms", req.model_dump())
            return schemas.SynthWaveformsResponse.model_validate(doc)
        return service.synth_waveforms(req)

    def synth_events(self, req: schemas.SynthRequest) -> schemas.SynthEventsResponse:
        if self.base_url:
            doc = self._post(f"{service.API_PREFIX}/synth/events", req.model_dump())
            return schemas.SynthEventsResponse.model_validate(doc)
        return service.synth_events(req)


_ERROR_CLASSES = {
    cls.__name__: cls for cls in CardiocorrError.__subclasses__()
}


def raise_service_error(name: str, detail: str):
    raise _ERROR_CLASSES.get(name, CardiocorrError)(detail)


def _exit_code_for(exc: CardiocorrError) -> int:
    if isinstance(exc, SignalTooShort):
        return EXIT_TOO_SHORT
    if isinstance(exc, EmptyVerdicts):
        return EXIT_EMPTY
    return EXIT_INPUT


def _write_scatters(report: schemas.RecordReportModel | schemas.PooledReportModel,
                    cycles: list[schemas.CycleRowModel], out: Path, prefix: str) -> None:
    pairs = [
        ("pr_ms", "systole_ms"),
        ("rr_ms", "peak_to_peak_ms"),
        ("rp_ms", "diastole_ms"),
    ]
    for x_name, y_name in pairs:
        xs, ys = [], []
        for row in cycles:
            x = getattr(row, x_name)
            y = getattr(row, y_name)
            if x is not None and y is not None:
                xs.append(x)
                ys.append(y)
        stats.scatter_export(xs, ys, out / f"{prefix}scatter_{x_name}_vs_{y_name}.csv")


def _write_intervals_csv(cycles: list[schemas.CycleRowModel], path: Path) -> None:
    names = list(events.ECG_INTERVAL_NAMES) + list(events.PPG_INTERVAL_NAMES)
    with path.open("w", newline="", encoding="utf-8") as fh:
        fh.write("cycle_index," + ",".join(names) + "\n")
        for row in cycles:
            cells = ["" if getattr(row, n) is None else repr(getattr(row, n)) for n in names]
            fh.write(f"{row.cycle_index}," + ",".join(cells) + "\n")


def _write_verdicts_csv(section: schemas.MonitorSectionModel, path: Path) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        fh.write("cycle_index,ecg_verdict,ppg_verdict,composed\n")
        for r in section.verdicts:
            fh.write(f"{r.cycle_index},{r.ecg},{r.ppg},{r.composed}\n")
        if section.agreement_rate is not None:
            fh.write(f"# agreement_rate={section.agreement_rate:.4f} "
                     f"dropped={section.dropped_cycles}\n")


def cmd_analyze(args: argparse.Namespace) -> int:
    client = ServiceClient(args.server)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    entries = ingest.load_manifest(args.manifest)
    payloads = []
    for entry in entries:
        if args.fs is not None:
            entry = ingest.ManifestEntry(
                record_id=entry.record_id, ecg_path=entry.ecg_path,
                ppg_path=entry.ppg_path, fs_hz=args.fs,
                ecg_fs_hz=entry.ecg_fs_hz, ppg_fs_hz=entry.ppg_fs_hz,
            )
        record = entry.load()
        payloads.append(schemas.RecordPayload(
            record_id=record.record_id,
            fs_hz=record.fs,
            ecg=record.ecg.samples.tolist(),
            ppg=record.ppg.samples.tolist(),
        ))

    thresholds = schemas.ThresholdsModel()
    if args.thresholds:
        thresholds = schemas.ThresholdsModel.model_validate(json.loads(args.thresholds))
    config = schemas.AnalyzeConfigModel(
        guard_bound_ms=args.guard_ms,
        lag_window_ms=tuple(args.lag_window),
        thresholds=thresholds,
        ppg_band=tuple(args.ppg_band) if args.ppg_band else None,
        ecg_band=tuple(args.ecg_band) if args.ecg_band else None,
        listwise=args.listwise,
    )
    response = client.analyze(schemas.AnalyzeRequest(records=payloads, config=config))

    (out / "report.json").write_text(
        json.dumps(response.model_dump(), indent=2) + "\n", encoding="utf-8"
    )
    for rec in response.records:
        prefix = f"{rec.record_id}_" if len(response.records) > 1 else ""
        _write_intervals_csv(rec.cycles, out / f"{prefix}intervals.csv")
        for m in rec.monitors:
            _write_verdicts_csv(m, out / f"{prefix}verdicts.csv")
        _write_scatters(rec, rec.cycles, out, prefix)
        _write_correlation_csv(rec.correlation, out / f"{prefix}correlation_table.csv")

    print(f"report written to {out / 'report.json'}")
    _print_observations(response.pooled.observations)
    return EXIT_OK


def _write_correlation_csv(section: schemas.CorrelationSectionModel, path: Path) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        fh.write("ecg_interval,ppg_interval,r,t_stat,p_two_sided,n,failure\n")
        for row_name, cols in section.grid.items():
            for col_name, cell in cols.items():
                if cell.r is None:
                    fh.write(f"{row_name},{col_name},,,,,{cell.failure or ''}\n")
                else:
                    fh.write(
                        f"{row_name},{col_name},{cell.r!r},{cell.t_stat!r},"
                        f"{cell.p_two_sided!r},{cell.n},\n"
                    )
        cell = section.rr_vs_peak_to_peak
        if cell.r is None:
            fh.write(f"rr_ms,peak_to_peak_ms,,,,,{cell.failure or ''}\n")
        else:
            fh.write(
                f"rr_ms,peak_to_peak_ms,{cell.r!r},{cell.t_stat!r},"
                f"{cell.p_two_sided!r},{cell.n},\n"
            )


def _print_observations(observations: list[schemas.ObservationModel]) -> None:
    for o in observations:
        status = "PASS" if o.passed else ("FAIL" if o.passed is not None else "N/A")
        value = "n/a" if o.value is None else f"{o.value:.4f}"
        print(f"  {o.key:<18} {status:<4} value={value} ({o.threshold})")


def cmd_monitor(args: argparse.Namespace) -> int:
    client = ServiceClient(args.server)
    ecg_trace = events.read_trace_csv(args.ecg_trace)
    ppg_trace = events.read_trace_csv(args.ppg_trace)

    def policy_model(path: str | None) -> schemas.IntervalPolicyModel | None:
        if path is None:
            return None
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        return schemas.IntervalPolicyModel.model_validate(doc)

    req = schemas.MonitorRequest(
        ecg_trace=[schemas.TimedEventModel(label=e.label, time_ms=e.time_ms) for e in ecg_trace],
        ppg_trace=[schemas.TimedEventModel(label=e.label, time_ms=e.time_ms) for e in ppg_trace],
        guard_bound_ms=args.guard_ms,
        ecg_policy=policy_model(args.ecg_policy),
        ppg_policy=policy_model(args.ppg_policy),
    )
    response = client.monitor(req)
    if not response.rows:
        print("error: no completed cycles in the traces", file=sys.stderr)
        return EXIT_EMPTY

    out = Path(args.out) if args.out else None
    lines = ["cycle_index,ecg_verdict,ppg_verdict,composed"]
    lines += [f"{r.cycle_index},{r.ecg},{r.ppg},{r.composed}" for r in response.rows]
    lines.append(f"# agreement_rate={response.agreement_rate:.4f} "
                 f"dropped={response.dropped_cycles}")
    text = "\n".join(lines) + "\n"
    if out:
        out.write_text(text, encoding="utf-8")
        print(f"verdict log written to {out}")
    else:
        print(text, end="")
    return EXIT_OK


def cmd_synth(args: argparse.Namespace) -> int:
    client = ServiceClient(args.server)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    req = schemas.SynthRequest(
        n_cycles=args.n_cycles,
        rr_mean_ms=args.rr_mean,
        rr_jitter_ms=args.rr_jitter,
        pr_mean_ms=args.pr_mean,
        pr_jitter_ms=args.pr_jitter,
        pat_ms=args.pat,
        pat_jitter_ms=args.pat_jitter,
        delta_t_ms=args.delta_t,
        fs=args.fs,
        noise_sigma=0.0 if args.no_noise else args.noise_sigma,
        seed=args.seed,
    )
    response = client.synth_waveforms(req)
    record = response.record

    ecg_path = out / "ecg.csv"
    ppg_path = out / "ppg.csv"
    ingest.write_waveform_csv(
        ingest.Waveform(record.ecg, fs=record.fs_hz, label="ecg"), ecg_path
    )
    ingest.write_waveform_csv(
        ingest.Waveform(record.ppg, fs=record.fs_hz, label="ppg"), ppg_path
    )
    ingest.write_manifest(
        [ingest.ManifestEntry(record_id=record.record_id, ecg_path=ecg_path,
                              ppg_path=ppg_path, fs_hz=record.fs_hz)],
        out / "manifest.json",
    )
    (out / "ground_truth.json").write_text(
        json.dumps(response.ground_truth.model_dump(), indent=2) + "\n",
        encoding="utf-8",
    )

    if args.traces:
        trace_resp = client.synth_events(req)
        for name, items in (("ecg_trace.csv", trace_resp.ecg_trace),
                            ("ppg_trace.csv", trace_resp.ppg_trace)):
            trace = events.TimedTrace(tuple(
                events.TimedEvent(e.label, e.time_ms) for e in items
            ))
            events.write_trace_csv(trace, out / name)

    print(f"synthetic dataset written to {out}")
    return EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    doc = json.loads(Path(args.report).read_text(encoding="utf-8"))
    pooled = doc["pooled"]
    print(f"records: {pooled['n_records']}, cycles: {pooled['n_cycles']}")
    print("correlation grid (r, p):")
    for row, cols in pooled["correlation"]["grid"].items():
        cells = []
        for col, cell in cols.items():
            if cell["r"] is None:
                cells.append(f"{col}: n/a")
            else:
                cells.append(f"{col}: {cell['r']:.3f}, {stats.format_p(cell['p_two_sided'])}")
        print(f"  {row:<8} " + "  ".join(cells))
    rrcell = pooled["correlation"]["rr_vs_peak_to_peak"]
    if rrcell["r"] is not None:
        print(f"  rr_ms vs peak_to_peak_ms: r={rrcell['r']:.4f}, "
              f"p {stats.format_p(rrcell['p_two_sided'])}, n={rrcell['n']}")
    for key, reg in pooled["regression"].items():
        if reg["slope_b1"] is None:
            print(f"regression {key}: n/a")
        else:
            print(f"regression {key}: slope={reg['slope_b1']:.4f}, "
                  f"lag={reg['lag_time_ms']:.3f} ms, r2={reg['r_squared']:.4f}, n={reg['n']}")
    agreement = pooled.get("agreement_rate")
    print(f"monitor agreement: {'n/a' if agreement is None else f'{agreement:.4f}'}")
    print("observations:")
    _print_observations([schemas.ObservationModel.model_validate(o)
                         for o in pooled["observations"]])
    return EXIT_OK


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    uvicorn.run("cardiocorr.service.app:app", host=args.host, port=args.port)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cardiocorr",
        description="ECG/PPG correlation analysis: delineation, timed runtime "
                    "monitors, interval statistics and lag regression.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="run the full pipeline over a record manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--fs", type=float, default=None,
                   help="override the manifest sampling rate (Hz)")
    p.add_argument("--guard-ms", type=float, default=210.0)
    p.add_argument("--lag-window", type=float, nargs=2, default=[200.0, 1200.0],
                   metavar=("LO", "HI"))
    p.add_argument("--thresholds", default=None,
                   help="JSON object overriding observation thresholds")
    p.add_argument("--ecg-band", type=float, nargs=2, default=None, metavar=("LO", "HI"))
    p.add_argument("--ppg-band", type=float, nargs=2, default=None, metavar=("LO", "HI"))
    p.add_argument("--listwise", action="store_true")
    p.add_argument("--server", default=None)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("monitor", help="run the parallel monitors over trace CSVs")
    p.add_argument("--ecg-trace", required=True)
    p.add_argument("--ppg-trace", required=True)
    p.add_argument("--guard-ms", type=float, default=210.0)
    p.add_argument("--ecg-policy", default=None, help="JSON interval policy file")
    p.add_argument("--ppg-policy", default=None, help="JSON interval policy file")
    p.add_argument("--out", default=None)
    p.add_argument("--server", default=None)
    p.set_defaults(func=cmd_monitor)

    p = sub.add_parser("synth", help="generate a synthetic dataset with ground truth")
    p.add_argument("--out", required=True)
    p.add_argument("--n-cycles", type=int, default=100)
    p.add_argument("--rr-mean", type=float, default=800.0)
    p.add_argument("--rr-jitter", type=float, default=30.0)
    p.add_argument("--pr-mean", type=float, default=160.0)
    p.add_argument("--pr-jitter", type=float, default=0.0)
    p.add_argument("--pat", type=float, default=650.0)
    p.add_argument("--pat-jitter", type=float, default=0.0)
    p.add_argument("--delta-t", type=float, default=250.0)
    p.add_argument("--fs", type=float, default=125.0)
    p.add_argument("--noise-sigma", type=float, default=0.05)
    p.add_argument("--no-noise", action="store_true")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--traces", action="store_true",
                   help="also write the event-stream trace CSVs")
    p.add_argument("--server", default=None)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("report", help="render a report.json human-readably")
    p.add_argument("--report", required=True)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except (BadSpec, TimeRegression) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except CardiocorrError as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return _exit_code_for(e)
    except (ValueError, json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
