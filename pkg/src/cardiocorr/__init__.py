"""ECG/PPG event correlation toolkit.

Delineates cardiac events from paired ECG/PPG recordings, computes the
named interval set, validates event correlations with parallel timed
runtime monitors, Pearson correlation with exact significance, and
lag-recovering linear regression.  A FastAPI service wraps the pipeline;
the ``cardiocorr`` CLI is a thin client over it.
"""

from . import delineate, errors, events, ingest, monitor, pipeline, stats, synth

__version__ = "0.1.0"

__all__ = [
    "delineate",
    "errors",
    "events",
    "ingest",
    "monitor",
    "pipeline",
    "stats",
    "synth",
    "__version__",
]
