"""Pearson correlation with exact significance, OLS lag regression, and the
interval correlation grid.

Significance uses the exact Student-t distribution: for r over n samples,
t = r * sqrt(n-2) / sqrt(1 - r^2) with n-2 degrees of freedom, and the
two-sided p-value comes from the regularized incomplete beta function
evaluated by a Lentz continued fraction.  No normal approximation is used,
so small-n results are exact to numerical precision.  Reported p-values
are floored at 1e-300.

The regression model is t_out = slope * t_in + lag, solved in closed form;
the intercept is the recovered lag time between correlated event streams.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.stats import kurtosis, skew

from .errors import LengthMismatch, TooFewSamples, ZeroVariance
from .events import CycleSeries

P_FLOOR = 1e-300

ECG_TABLE_ROWS = ("pr_ms", "qr_ms", "rp_ms", "rt_ms", "qt_ms")
PPG_TABLE_COLS = ("systole_ms", "diastole_ms")


@dataclass(frozen=True)
class CorrelationResult:
    r: float
    t_stat: float
    p_two_sided: float
    n: int


@dataclass(frozen=True)
class RegressionResult:
    slope_b1: float
    lag_time_ms: float
    r_squared: float
    n: int

    def predict(self, t_in: np.ndarray) -> np.ndarray:
        return self.slope_b1 * np.asarray(t_in, dtype=np.float64) + self.lag_time_ms


@dataclass(frozen=True)
class Descriptives:
    name: str
    n: int
    mean: float
    sd: float
    skewness: float
    kurtosis_excess: float


@dataclass(frozen=True)
class CorrelationTable:
    """Grid of ECG intervals against PPG systole/diastole periods.

    ``cells[(row, col)]`` is a CorrelationResult, or None with the reason in
    ``failures[(row, col)]``.  The RR against peak-to-peak pairing is kept
    out of the grid and reported alongside it.
    """

    cells: dict[tuple[str, str], CorrelationResult | None]
    failures: dict[tuple[str, str], str]
    rr_peak_to_peak: CorrelationResult | None
    rr_peak_to_peak_failure: str | None
    descriptives: tuple[Descriptives, ...]

    def cell(self, row: str, col: str) -> CorrelationResult | None:
        return self.cells[(row, col)]


def _betacf(a: float, b: float, x: float, max_iter: int = 300, eps: float = 1e-15) -> float:
    """Continued fraction for the incomplete beta function (modified Lentz)."""
    tiny = 1e-300
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            return h
    raise ArithmeticError(f"incomplete beta did not converge for a={a}, b={b}, x={x}")


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b) for a, b > 0 and x in [0, 1]."""
    if not (a > 0 and b > 0):
        raise ValueError("shape parameters must be positive")
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    log_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def student_t_sf(t: float, df: float) -> float:
    """P(T > t) for Student's t with ``df`` degrees of freedom."""
    if df <= 0:
        raise ValueError("degrees of freedom must be positive")
    if math.isinf(t):
        return 0.0 if t > 0 else 1.0
    x = df / (df + t * t)
    tail = 0.5 * regularized_incomplete_beta(df / 2.0, 0.5, x)
    return tail if t >= 0 else 1.0 - tail


def student_t_cdf(t: float, df: float) -> float:
    return 1.0 - student_t_sf(t, df)


def pearson(x, y) -> CorrelationResult:
    """Sample Pearson correlation with an exact two-sided significance test."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise LengthMismatch(f"series shapes differ: {x.shape} vs {y.shape}")
    n = len(x)
    if n < 3:
        raise TooFewSamples(f"need n >= 3, got {n}")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        raise ZeroVariance("correlation undefined for a constant series")
    r = float(dx @ dy) / math.sqrt(sxx * syy)
    r = max(-1.0, min(1.0, r))
    if abs(r) == 1.0:
        t_stat = math.copysign(math.inf, r)
        p = P_FLOOR
    else:
        t_stat = r * math.sqrt((n - 2) / (1.0 - r * r))
        p = max(min(2.0 * student_t_sf(abs(t_stat), n - 2), 1.0), P_FLOOR)
    return CorrelationResult(r=r, t_stat=t_stat, p_two_sided=p, n=n)


def ols_lag(t_in, t_out) -> RegressionResult:
    """Closed-form least squares for t_out = slope * t_in + lag."""
    x = np.asarray(t_in, dtype=np.float64)
    y = np.asarray(t_out, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise LengthMismatch(f"series shapes differ: {x.shape} vs {y.shape}")
    n = len(x)
    if n < 2:
        raise TooFewSamples(f"need n >= 2, got {n}")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(dx @ dx)
    if sxx == 0.0:
        raise ZeroVariance("regressor has no variance")
    slope = float(dx @ dy) / sxx
    lag = float(y.mean() - slope * x.mean())
    residuals = y - (slope * x + lag)
    ss_res = float(residuals @ residuals)
    ss_tot = float(dy @ dy)
    if ss_tot == 0.0:
        r_squared = 1.0 if ss_res <= 1e-12 * max(1.0, abs(float(y.mean()))) else 0.0
    else:
        r_squared = max(0.0, min(1.0, 1.0 - ss_res / ss_tot))
    return RegressionResult(slope_b1=slope, lag_time_ms=lag, r_squared=r_squared, n=n)


def _paired(xs: list[float | None], ys: list[float | None]) -> tuple[np.ndarray, np.ndarray]:
    pairs = [(a, b) for a, b in zip(xs, ys) if a is not None and b is not None]
    if not pairs:
        return np.array([]), np.array([])
    ax, ay = zip(*pairs)
    return np.array(ax, dtype=np.float64), np.array(ay, dtype=np.float64)


def correlation_table(series: CycleSeries, listwise: bool = False) -> CorrelationTable:
    """Correlate each ECG interval with the PPG systole/diastole periods.

    Missing intervals are dropped pairwise per cell by default; with
    ``listwise`` only cycles carrying every grid interval contribute.
    Cells with fewer than 3 pairs are recorded as failures, and the table
    is still emitted.
    """
    all_names = list(ECG_TABLE_ROWS) + list(PPG_TABLE_COLS)
    columns = {name: series.interval_series(name) for name in all_names}
    columns["rr_ms"] = series.interval_series("rr_ms")
    columns["peak_to_peak_ms"] = series.interval_series("peak_to_peak_ms")

    if listwise:
        keep = [
            i for i in range(len(series))
            if all(columns[name][i] is not None for name in all_names)
        ]
        columns = {name: [vals[i] for i in keep] for name, vals in columns.items()}

    cells: dict[tuple[str, str], CorrelationResult | None] = {}
    failures: dict[tuple[str, str], str] = {}
    for row in ECG_TABLE_ROWS:
        for col in PPG_TABLE_COLS:
            x, y = _paired(columns[row], columns[col])
            try:
                if len(x) < 3:
                    raise TooFewSamples(f"{len(x)} complete pairs")
                cells[(row, col)] = pearson(x, y)
            except (TooFewSamples, ZeroVariance) as e:
                cells[(row, col)] = None
                failures[(row, col)] = f"{type(e).__name__}: {e}"

    x, y = _paired(columns["rr_ms"], columns["peak_to_peak_ms"])
    rr_ptp: CorrelationResult | None
    rr_ptp_failure: str | None = None
    try:
        if len(x) < 3:
            raise TooFewSamples(f"{len(x)} complete pairs")
        rr_ptp = pearson(x, y)
    except (TooFewSamples, ZeroVariance) as e:
        rr_ptp = None
        rr_ptp_failure = f"{type(e).__name__}: {e}"

    descriptives = []
    for name in all_names + ["rr_ms", "peak_to_peak_ms"]:
        vals = np.array([v for v in columns[name] if v is not None], dtype=np.float64)
        if vals.size >= 2:
            descriptives.append(Descriptives(
                name=name,
                n=int(vals.size),
                mean=float(vals.mean()),
                sd=float(vals.std(ddof=1)),
                skewness=float(skew(vals)) if vals.size >= 3 else 0.0,
                kurtosis_excess=float(kurtosis(vals)) if vals.size >= 4 else 0.0,
            ))
    return CorrelationTable(
        cells=cells,
        failures=failures,
        rr_peak_to_peak=rr_ptp,
        rr_peak_to_peak_failure=rr_ptp_failure,
        descriptives=tuple(descriptives),
    )


def format_p(p: float) -> str:
    """Human-readable p-value; very small values print as a bound."""
    return "< 0.0001" if p < 1e-4 else f"{p:.4f}"


def correlation_table_text(table: CorrelationTable) -> str:
    lines = [f"{'ECG interval':<10} {'systole r':>10} {'p':>10} {'diastole r':>11} {'p':>10}"]
    for row in ECG_TABLE_ROWS:
        cells = []
        for col in PPG_TABLE_COLS:
            res = table.cells[(row, col)]
            if res is None:
                cells += ["n/a", "n/a"]
            else:
                cells += [f"{res.r:.3f}", format_p(res.p_two_sided)]
        lines.append(f"{row:<10} {cells[0]:>10} {cells[1]:>10} {cells[2]:>11} {cells[3]:>10}")
    if table.rr_peak_to_peak is not None:
        res = table.rr_peak_to_peak
        lines.append(
            f"rr_ms vs peak_to_peak_ms: r={res.r:.4f}, p {format_p(res.p_two_sided)}, n={res.n}"
        )
    else:
        lines.append(f"rr_ms vs peak_to_peak_ms: {table.rr_peak_to_peak_failure}")
    return "\n".join(lines)


def correlation_table_csv(table: CorrelationTable, path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        fh.write("ecg_interval,ppg_interval,r,t_stat,p_two_sided,n,failure\n")
        pairs = [(row, col) for row in ECG_TABLE_ROWS for col in PPG_TABLE_COLS]
        pairs.append(("rr_ms", "peak_to_peak_ms"))
        for row, col in pairs:
            if (row, col) in table.cells:
                res = table.cells[(row, col)]
                failure = table.failures.get((row, col), "")
            else:
                res = table.rr_peak_to_peak
                failure = table.rr_peak_to_peak_failure or ""
            if res is None:
                fh.write(f"{row},{col},,,,,{failure}\n")
            else:
                fh.write(
                    f"{row},{col},{res.r!r},{res.t_stat!r},{res.p_two_sided!r},{res.n},\n"
                )


def correlation_table_dict(table: CorrelationTable) -> dict:
    def cell_dict(res: CorrelationResult | None, failure: str | None) -> dict:
        if res is None:
            return {"r": None, "t_stat": None, "p_two_sided": None, "n": None,
                    "failure": failure}
        return {"r": res.r, "t_stat": res.t_stat, "p_two_sided": res.p_two_sided,
                "n": res.n, "failure": None}

    return {
        "grid": {
            row: {
                col: cell_dict(table.cells[(row, col)], table.failures.get((row, col)))
                for col in PPG_TABLE_COLS
            }
            for row in ECG_TABLE_ROWS
        },
        "rr_vs_peak_to_peak": cell_dict(table.rr_peak_to_peak, table.rr_peak_to_peak_failure),
        "descriptives": [
            {
                "interval": d.name, "n": d.n, "mean_ms": d.mean, "sd_ms": d.sd,
                "skewness": d.skewness, "kurtosis_excess": d.kurtosis_excess,
            }
            for d in table.descriptives
        ],
    }


def scatter_export(x, y, path: str | Path) -> None:
    """Two-column CSV (header ``x_ms,y_ms``) for external plotting."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise LengthMismatch(f"series shapes differ: {x.shape} vs {y.shape}")
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        fh.write("x_ms,y_ms\n")
        for a, b in zip(x, y):
            fh.write(f"{a!r},{b!r}\n")
