"""Timed-automaton policies and online monitors over timed event traces.

A policy is a deterministic timed automaton: locations with one initial
location and one violation sink, real-valued millisecond clocks, and
transitions guarded by conjunctions of clock comparisons.  A monitor steps
the automaton over a chronological trace; entering an accepting location
emits the verdict ``True`` for the current cycle, entering the sink emits
``False``.  After a verdict the monitor re-arms at the next restart event,
so one automaton checks every cardiac cycle of a recording in a loop.

Symbols outside the automaton's alphabet self-loop silently.  An alphabet
symbol that arrives in a location with no enabled transition falls to the
sink.  The interval-bound policy template used throughout this package
covers all alphabet symbols explicitly, making its behaviour equal to a
direct scan for (start, next end) pairs against the bound.

Two monitors run in parallel, one per signal; their per-cycle verdicts are
composed conjunctively and scored for agreement.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import BadPolicy, EmptyVerdicts, TimeRegression
from .events import TimedEvent, TimedTrace

_OPS = {
    "<": lambda v, k: v < k,
    "<=": lambda v, k: v <= k,
    "==": lambda v, k: v == k,
    ">=": lambda v, k: v >= k,
    ">": lambda v, k: v > k,
}


@dataclass(frozen=True)
class ClockConstraint:
    """Single comparison ``clock <op> bound_ms``."""

    clock: str
    op: str
    bound_ms: float

    def __post_init__(self):
        if self.op not in _OPS:
            raise BadPolicy(f"unknown comparison operator {self.op!r}")
        if self.bound_ms < 0:
            raise BadPolicy(f"guard constant must be >= 0, got {self.bound_ms}")

    def satisfied(self, value: float) -> bool:
        return _OPS[self.op](value, self.bound_ms)

    def interval(self) -> tuple[float, float]:
        """Closed value interval allowed by this constraint (for overlap checks)."""
        if self.op == "<" or self.op == "<=":
            return (0.0, self.bound_ms)
        if self.op == "==":
            return (self.bound_ms, self.bound_ms)
        return (self.bound_ms, float("inf"))


@dataclass(frozen=True)
class Transition:
    source: str
    event: str
    target: str
    guard: tuple[ClockConstraint, ...] = ()
    resets: frozenset[str] = frozenset()

    def enabled(self, valuation: dict[str, float]) -> bool:
        return all(g.satisfied(valuation[g.clock]) for g in self.guard)


def _guards_may_overlap(a: tuple[ClockConstraint, ...], b: tuple[ClockConstraint, ...]) -> bool:
    """Conservative box-intersection test on the per-clock allowed intervals.

    Strictness of bounds is ignored, so touching intervals count as overlap;
    a strict/non-strict pair sharing only a boundary point is rejected even
    though it is actually disjoint.  Safe direction for a determinism check.
    """
    by_clock: dict[str, list[tuple[float, float]]] = {}
    for g in list(a) + list(b):
        by_clock.setdefault(g.clock, []).append(g.interval())
    strict_pair = {("<", ">"), (">", "<"), ("<", ">="), (">=", "<"), ("<=", ">"), (">", "<=")}
    for clock, intervals in by_clock.items():
        lo = max(i[0] for i in intervals)
        hi = min(i[1] for i in intervals)
        if lo > hi:
            return False
        if lo == hi:
            ops_a = {g.op for g in a if g.clock == clock}
            ops_b = {g.op for g in b if g.clock == clock}
            if any((oa, ob) in strict_pair for oa in ops_a for ob in ops_b):
                return False
    return True


@dataclass(frozen=True)
class TimedAutomaton:
    name: str
    locations: frozenset[str]
    initial: str
    sink: str
    accepting: frozenset[str]
    clocks: frozenset[str]
    alphabet: frozenset[str]
    transitions: tuple[Transition, ...]
    restart_events: frozenset[str] = frozenset()

    def __post_init__(self):
        if self.initial not in self.locations or self.sink not in self.locations:
            raise BadPolicy("initial and sink must be locations")
        if not self.accepting <= self.locations:
            raise BadPolicy("accepting locations must be locations")
        groups: dict[tuple[str, str], list[Transition]] = {}
        for t in self.transitions:
            if t.source not in self.locations or t.target not in self.locations:
                raise BadPolicy(f"transition endpoints unknown: {t.source} -> {t.target}")
            if t.source == self.sink:
                raise BadPolicy("the violation sink has no outgoing transitions")
            for g in t.guard:
                if g.clock not in self.clocks:
                    raise BadPolicy(f"guard references unknown clock {g.clock!r}")
            groups.setdefault((t.source, t.event), []).append(t)
        for (source, event), ts in groups.items():
            for i in range(len(ts)):
                for j in range(i + 1, len(ts)):
                    if _guards_may_overlap(ts[i].guard, ts[j].guard):
                        raise BadPolicy(
                            f"nondeterministic transitions from {source!r} on {event!r}"
                        )

    def transitions_from(self, location: str, event: str) -> list[Transition]:
        return [t for t in self.transitions if t.source == location and t.event == event]

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "locations": sorted(self.locations),
            "initial": self.initial,
            "sink": self.sink,
            "accepting": sorted(self.accepting),
            "clocks": sorted(self.clocks),
            "alphabet": sorted(self.alphabet),
            "restart_events": sorted(self.restart_events),
            "transitions": [
                {
                    "source": t.source,
                    "event": t.event,
                    "target": t.target,
                    "guard": [
                        {"clock": g.clock, "op": g.op, "bound_ms": g.bound_ms}
                        for g in t.guard
                    ],
                    "resets": sorted(t.resets),
                }
                for t in self.transitions
            ],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "TimedAutomaton":
        transitions = tuple(
            Transition(
                source=t["source"],
                event=t["event"],
                target=t["target"],
                guard=tuple(
                    ClockConstraint(g["clock"], g["op"], float(g["bound_ms"]))
                    for g in t.get("guard", ())
                ),
                resets=frozenset(t.get("resets", ())),
            )
            for t in doc["transitions"]
        )
        return cls(
            name=doc.get("name", "policy"),
            locations=frozenset(doc["locations"]),
            initial=doc["initial"],
            sink=doc["sink"],
            accepting=frozenset(doc["accepting"]),
            clocks=frozenset(doc.get("clocks", ())),
            alphabet=frozenset(doc.get("alphabet") or _symbols_of(transitions)),
            transitions=transitions,
            restart_events=frozenset(doc.get("restart_events", ())),
        )


def _symbols_of(transitions: tuple[Transition, ...]) -> set[str]:
    return {t.event for t in transitions}


@dataclass(frozen=True)
class MonitorState:
    location: str
    valuation: dict[str, float]
    last_time_ms: float


@dataclass(frozen=True)
class CycleVerdict:
    cycle_index: int
    ecg: bool
    ppg: bool
    composed: bool


@dataclass(frozen=True)
class ComposedVerdicts:
    rows: tuple[CycleVerdict, ...]
    dropped: int = 0

    def __len__(self) -> int:
        return len(self.rows)

    def __iter__(self):
        return iter(self.rows)


def build_interval_policy(start_event: str, end_event: str, bound_ms: float,
                          name: str | None = None) -> TimedAutomaton:
    """Automaton for "end follows start within ``bound_ms``", looped per cycle.

    idle --start/reset x--> armed; armed --end[x <= bound]--> satisfied
    (verdict True) or --end[x > bound]--> violated (verdict False).  A
    repeated start while armed self-loops without reset, so elapsed time is
    measured from the first start of the cycle; a stray end with no open
    cycle self-loops.  From either terminal the next start opens a new cycle.
    """
    if start_event == end_event:
        raise BadPolicy("start and end events must differ")
    if not bound_ms > 0:
        raise BadPolicy(f"bound must be positive, got {bound_ms}")
    x = "x"
    within = ClockConstraint(x, "<=", bound_ms)
    beyond = ClockConstraint(x, ">", bound_ms)
    transitions = (
        Transition("idle", start_event, "armed", resets=frozenset({x})),
        Transition("idle", end_event, "idle"),
        Transition("armed", end_event, "satisfied", guard=(within,)),
        Transition("armed", end_event, "violated", guard=(beyond,)),
        Transition("armed", start_event, "armed"),
        Transition("satisfied", start_event, "armed", resets=frozenset({x})),
        Transition("satisfied", end_event, "satisfied"),
    )
    return TimedAutomaton(
        name=name or f"{start_event}_to_{end_event}_within_{bound_ms:g}ms",
        locations=frozenset({"idle", "armed", "satisfied", "violated"}),
        initial="idle",
        sink="violated",
        accepting=frozenset({"satisfied"}),
        clocks=frozenset({x}),
        alphabet=frozenset({start_event, end_event}),
        transitions=transitions,
        restart_events=frozenset({start_event}),
    )


def initial_state(a: TimedAutomaton) -> MonitorState:
    return MonitorState(a.initial, {c: 0.0 for c in a.clocks}, 0.0)


def step(a: TimedAutomaton, s: MonitorState, e: TimedEvent) -> tuple[MonitorState, bool | None]:
    """Advance the monitor by one event; returns the new state and a verdict
    when this event completes a cycle (True on accept, False on violation)."""
    if e.time_ms < s.last_time_ms:
        raise TimeRegression(f"event time {e.time_ms} precedes {s.last_time_ms}")
    dt = e.time_ms - s.last_time_ms
    valuation = {c: v + dt for c, v in s.valuation.items()}
    location = s.location

    if location == a.sink:
        if e.label not in a.restart_events:
            return MonitorState(a.sink, valuation, e.time_ms), None
        # Re-arm: a fresh cycle begins, clocks restart before the event fires.
        location = a.initial
        valuation = {c: 0.0 for c in a.clocks}

    enabled = [t for t in a.transitions_from(location, e.label) if t.enabled(valuation)]
    if len(enabled) > 1:
        raise BadPolicy(f"nondeterministic step from {location!r} on {e.label!r}")
    if enabled:
        t = enabled[0]
        new_valuation = {c: (0.0 if c in t.resets else v) for c, v in valuation.items()}
        verdict: bool | None = None
        if t.target in a.accepting and location not in a.accepting:
            verdict = True
        elif t.target == a.sink and location != a.sink:
            verdict = False
        return MonitorState(t.target, new_valuation, e.time_ms), verdict

    if e.label in a.alphabet:
        # Alphabet symbol with no enabled transition: implicit fall to sink.
        verdict = False if location != a.sink else None
        return MonitorState(a.sink, valuation, e.time_ms), verdict
    return MonitorState(location, valuation, e.time_ms), None


def run_monitor(a: TimedAutomaton, trace: TimedTrace) -> list[bool]:
    """One verdict per completed policy cycle; a trailing open cycle yields none."""
    state = initial_state(a)
    verdicts: list[bool] = []
    for event in trace:
        state, verdict = step(a, state, event)
        if verdict is not None:
            verdicts.append(verdict)
    return verdicts


def compose(ecg_verdicts: list[bool], ppg_verdicts: list[bool]) -> ComposedVerdicts:
    """Conjoin cycle-aligned verdicts; surplus cycles on either side are dropped."""
    n = min(len(ecg_verdicts), len(ppg_verdicts))
    dropped = abs(len(ecg_verdicts) - len(ppg_verdicts))
    rows = tuple(
        CycleVerdict(i, ecg_verdicts[i], ppg_verdicts[i], ecg_verdicts[i] and ppg_verdicts[i])
        for i in range(n)
    )
    return ComposedVerdicts(rows=rows, dropped=dropped)


def agreement_rate(c: ComposedVerdicts) -> float:
    """Fraction of cycles on which the two monitors emit the same verdict."""
    if not c.rows:
        raise EmptyVerdicts("no composed cycles to score")
    return sum(1 for r in c.rows if r.ecg == r.ppg) / len(c.rows)


def composed_true_rate(c: ComposedVerdicts) -> float:
    """Fraction of cycles whose composed verdict is True."""
    if not c.rows:
        raise EmptyVerdicts("no composed cycles to score")
    return sum(1 for r in c.rows if r.composed) / len(c.rows)


def load_policy(doc: dict) -> TimedAutomaton:
    """Build a policy from JSON: the interval template or a full automaton."""
    if "start_event" in doc:
        return build_interval_policy(
            doc["start_event"], doc["end_event"], float(doc["bound_ms"]),
            name=doc.get("name"),
        )
    return TimedAutomaton.from_dict(doc)


def load_policy_file(path: str | Path) -> TimedAutomaton:
    with Path(path).open(encoding="utf-8") as fh:
        return load_policy(json.load(fh))


def write_verdict_csv(c: ComposedVerdicts, path: str | Path,
                      footer: bool = True) -> None:
    """Verdict log CSV with an agreement-rate footer comment."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        fh.write("cycle_index,ecg_verdict,ppg_verdict,composed\n")
        for r in c.rows:
            fh.write(f"{r.cycle_index},{r.ecg},{r.ppg},{r.composed}\n")
        if footer and c.rows:
            fh.write(f"# agreement_rate={agreement_rate(c):.4f} dropped={c.dropped}\n")
