"""Sparse per-pair / per-node / whole-network counting-process tracking.

Each period the tracker scores every tracked subject's increment (implicit
zeros included) against its posterior predictive *before* folding the period
in, then updates all models.  Memory stays proportional to the number of
pairs ever active plus the number of nodes seen; pairs that never
communicate are represented implicitly.

Sequential mode streams with O(1) per-subject state.  Retrospective mode
additionally retains per-period increment logs so any period can be rescored
against the leave-one-out history.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Optional

from .diagnostics import DiagnosticPath, accumulate, compensator_increment, variation_increment
from .ingest import EdgeEvent
from .models import (
    BetaBernoulli,
    CountModel,
    Hurdle,
    MarkovBernoulli,
    build_model,
    predictive_pvalue,
)

__all__ = [
    "PairKey",
    "PValueRecord",
    "TrackerConfig",
    "NetworkTracker",
    "HistoryNotRetainedError",
    "aggregate_counts",
    "flag_anomalies",
    "canonical_pair",
    "subject_text",
]

TOTAL_SUBJECT = "__network__"


class HistoryNotRetainedError(RuntimeError):
    """Retrospective analysis requested from a streaming-only tracker."""


class PValueRecord(NamedTuple):
    mode: str  # "sequential" | "retrospective"
    scope: str  # "pair" | "node_out" | "node_in" | "total"
    subject: object  # PairKey, node id, or TOTAL_SUBJECT
    period: int
    p: float
    direction: str
    model: str


PairKey = tuple


def canonical_pair(a, b, directed: bool) -> PairKey:
    """Undirected pairs are stored with their endpoints sorted."""
    if directed:
        return (a, b)
    return (a, b) if str(a) <= str(b) else (b, a)


def subject_text(scope: str, subject) -> str:
    if scope == "pair":
        return f"{subject[0]}--{subject[1]}"
    return str(subject)


def aggregate_counts(
    events: Iterable[EdgeEvent], *, directed: bool, binary_pairs: bool = False
) -> tuple[dict, dict, dict, int]:
    """Per-subject increments for one period of events.

    Returns (pair, node_out, node_in, total) increments.  node_in is left
    empty for undirected graphs; in binary mode each communicating pair
    contributes one unit regardless of how many events it produced, and node
    and total increments are sums over the (binarized) pair increments.
    """
    pair: dict = {}
    for ev in events:
        key = canonical_pair(ev.src, ev.dst, directed)
        pair[key] = pair.get(key, 0) + 1
    if binary_pairs:
        pair = {k: 1 for k in pair}
    node_out: dict = {}
    node_in: dict = {}
    total = 0
    for (a, b), dn in pair.items():
        total += dn
        node_out[a] = node_out.get(a, 0) + dn
        if directed:
            node_in[b] = node_in.get(b, 0) + dn
        else:
            node_out[b] = node_out.get(b, 0) + dn
    return pair, node_out, node_in, total


def flag_anomalies(records: Iterable[PValueRecord], threshold: float) -> dict[int, set]:
    """Per-period sets of anomalous nodes from records at or below threshold.

    A pair record contributes both endpoints; a node record contributes its
    node; whole-network records name no node and are skipped.
    """
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"threshold must lie in (0, 1): {threshold}")
    flagged: dict[int, set] = {}
    for rec in records:
        if rec.p > threshold or rec.scope == "total":
            continue
        nodes = flagged.setdefault(rec.period, set())
        if rec.scope == "pair":
            nodes.add(rec.subject[0])
            nodes.add(rec.subject[1])
        else:
            nodes.add(rec.subject)
    return flagged


@dataclass(frozen=True)
class TrackerConfig:
    directed: bool = False
    binary_pairs: bool = False
    scopes: frozenset = frozenset({"pair", "node", "total"})
    pair_model: str = "hurdle-pg"
    node_model: str = "hurdle-pg"
    total_model: str = "hurdle-pg"
    pair_priors: dict = field(default_factory=dict)
    node_priors: dict = field(default_factory=dict)
    total_priors: dict = field(default_factory=dict)
    retain_history: bool = False
    backdate_new_subjects: bool = True
    threads: int = 1
    diagnostics: tuple = ("total",)

    def make_model(self, scope: str) -> CountModel:
        if scope == "pair":
            return build_model(self.pair_model, **self.pair_priors)
        if scope == "total":
            kwargs = dict(self.total_priors)
            kwargs.setdefault("magnitude_prior", (0.1, 0.01))
            return build_model(self.total_model, **kwargs)
        return build_model(self.node_model, **self.node_priors)


class _Track:
    """State of one monitored counting process."""

    __slots__ = ("state", "first_period", "nonzero", "cumulative")

    def __init__(self, state: CountModel, first_period: int, keep_history: bool):
        self.state = state
        self.first_period = first_period
        self.nonzero: Optional[dict[int, int]] = {} if keep_history else None
        self.cumulative = 0

    def record(self, period: int, increment: int) -> None:
        self.cumulative += increment
        if self.nonzero is not None and increment:
            self.nonzero[period] = increment


def _binarize_for(state: CountModel, increment: int) -> int:
    """Pure activity models consume the on/off view of the increment."""
    if isinstance(state, (BetaBernoulli, MarkovBernoulli)):
        return 1 if increment > 0 else 0
    return increment


class NetworkTracker:
    """Streaming scorer over pair, node and whole-network processes."""

    def __init__(self, config: TrackerConfig = TrackerConfig()):
        self.config = config
        self.period = 0
        self.pairs: dict[PairKey, _Track] = {}
        self.node_out: dict[object, _Track] = {}
        self.node_in: dict[object, _Track] = {}
        self.total: Optional[_Track] = None
        self.self_loop_count = 0
        self.diagnostics: dict[str, DiagnosticPath] = {}
        self._model_labels = {
            "pair": config.make_model("pair").label,
            "node": config.make_model("node").label,
            "total": config.make_model("total").label,
        }

    # -- sequential sweep ---------------------------------------------------

    def ingest_period(
        self, events: Iterable[EdgeEvent], period: Optional[int] = None
    ) -> list[PValueRecord]:
        """Score and fold in one period of events.

        ``period`` must be exactly one past the last ingested period when
        given.  Self-loop events are dropped with a counted warning.  Returns
        the sequential p-value records for every tracked subject, including
        implicit zero increments on quiet subjects.
        """
        t = self.period + 1
        if period is not None and period != t:
            raise ValueError(f"events for period {period} cannot follow period {self.period}")
        kept = []
        for ev in events:
            if ev.src == ev.dst:
                self.self_loop_count += 1
                continue
            kept.append(ev)
        cfg = self.config
        pair_inc, out_inc, in_inc, total_inc = aggregate_counts(
            kept, directed=cfg.directed, binary_pairs=cfg.binary_pairs
        )

        jobs: list[tuple[str, object, _Track, int]] = []
        if "pair" in cfg.scopes:
            self._admit(self.pairs, pair_inc, "pair", t)
            jobs.extend(("pair", k, tr, pair_inc.get(k, 0)) for k, tr in self.pairs.items())
        if "node" in cfg.scopes:
            self._admit(self.node_out, out_inc, "node", t)
            jobs.extend(
                ("node_out", k, tr, out_inc.get(k, 0)) for k, tr in self.node_out.items()
            )
            if cfg.directed:
                self._admit(self.node_in, in_inc, "node", t)
                jobs.extend(
                    ("node_in", k, tr, in_inc.get(k, 0)) for k, tr in self.node_in.items()
                )
        if "total" in cfg.scopes:
            if self.total is None:
                self.total = _Track(cfg.make_model("total"), 1, cfg.retain_history)
            jobs.append(("total", TOTAL_SUBJECT, self.total, total_inc))

        records = self._score(jobs, t)

        for scope, _subject, track, inc in jobs:
            if scope == "total" and "total" in cfg.diagnostics:
                path = self.diagnostics.setdefault(TOTAL_SUBJECT, DiagnosticPath())
                accumulate(
                    path,
                    t,
                    inc,
                    compensator_increment(track.state),
                    variation_increment(track.state),
                )
            track.state = track.state.update(_binarize_for(track.state, inc))
            track.record(t, inc)
        self.period = t
        return records

    def _admit(self, table: dict, increments: dict, scope: str, t: int) -> None:
        cfg = self.config
        for key in increments:
            if key in table:
                continue
            state = cfg.make_model(scope)
            first = 1 if cfg.backdate_new_subjects else t
            if first < t:
                state = state.absorb_zeros(t - first)
            table[key] = _Track(state, first, cfg.retain_history)

    def _score(self, jobs, t: int) -> list[PValueRecord]:
        def one(job) -> PValueRecord:
            scope, subject, track, inc = job
            obs = _binarize_for(track.state, inc)
            pv = predictive_pvalue(track.state, obs)
            label = self._model_labels["node" if scope.startswith("node") else scope]
            return PValueRecord("sequential", scope, subject, t, pv.p, pv.direction, label)

        if self.config.threads > 1 and len(jobs) > 1:
            with ThreadPoolExecutor(max_workers=self.config.threads) as pool:
                return list(pool.map(one, jobs, chunksize=64))
        return [one(job) for job in jobs]

    # -- retrospective analysis ----------------------------------------------

    def _iter_tracks(self):
        for key, tr in self.pairs.items():
            yield "pair", key, tr
        for key, tr in self.node_out.items():
            yield "node_out", key, tr
        for key, tr in self.node_in.items():
            yield "node_in", key, tr
        if self.total is not None:
            yield "total", TOTAL_SUBJECT, self.total

    def _find_track(self, scope: str, subject) -> _Track:
        table = {
            "pair": self.pairs,
            "node_out": self.node_out,
            "node_in": self.node_in,
        }
        if scope == "total":
            if self.total is None:
                raise KeyError("total process not tracked")
            return self.total
        return table[scope][subject]

    def analyze_retrospective(self, scope: str, subject, period: int) -> PValueRecord:
        """Rescore period ``period`` against the leave-one-out history.

        Equivalent to the sequential p-value that would arise had the
        period's data been observed last.  Requires retain_history.
        """
        track = self._find_track(scope, subject)
        if track.nonzero is None:
            raise HistoryNotRetainedError(
                "retrospective analysis needs a tracker built with retain_history=True"
            )
        if not 1 <= period <= self.period:
            raise ValueError(f"period {period} outside 1..{self.period}")
        first = track.first_period
        if period < first:
            raise ValueError(f"subject only tracked from period {first}")
        inc = track.nonzero.get(period, 0)
        state = _leave_one_out(track, period, self.period)
        obs = _binarize_for(state, inc)
        pv = predictive_pvalue(state, obs)
        label = self._model_labels["node" if scope.startswith("node") else scope]
        return PValueRecord("retrospective", scope, subject, period, pv.p, pv.direction, label)

    def retrospective_all(self) -> list[PValueRecord]:
        """Leave-one-out records for every tracked subject and period."""
        out = []
        for scope, subject, track in self._iter_tracks():
            for u in range(track.first_period, self.period + 1):
                out.append(self.analyze_retrospective(scope, subject, u))
        return out

    # -- inspection -----------------------------------------------------------

    def pair_totals(self) -> dict[PairKey, int]:
        return {k: tr.cumulative for k, tr in self.pairs.items()}

    def pair_counts_in_window(self, start: int, end: int) -> dict[PairKey, int]:
        """Cumulative pair counts over periods start..end (needs history)."""
        out: dict[PairKey, int] = {}
        for key, tr in self.pairs.items():
            if tr.nonzero is None:
                raise HistoryNotRetainedError(
                    "windowed pair counts need a tracker built with retain_history=True"
                )
            w = sum(v for u, v in tr.nonzero.items() if start <= u <= end)
            if w:
                out[key] = w
        return out


def _activity_sequence(track: _Track, period: int) -> int:
    return 1 if track.nonzero.get(period, 0) > 0 else 0


def _markov_leave_one_out(
    model: MarkovBernoulli, track: _Track, u: int, horizon: int
) -> MarkovBernoulli:
    """Remove period u from a Markov activity chain and re-link its neighbors."""
    s = lambda v: _activity_sequence(track, v)
    first = track.first_period
    out = model
    if u > first:
        out = out.untally(s(u - 1), s(u))
    if u < horizon:
        out = out.untally(s(u), s(u + 1))
        if u > first:
            out = out.tally(s(u - 1), s(u + 1))
    prev = s(u - 1) if u > first else None
    return out.conditioned_on(prev)


def _leave_one_out(track: _Track, u: int, horizon: int) -> CountModel:
    state = track.state
    inc = track.nonzero.get(u, 0)
    if isinstance(state, Hurdle):
        act = state.activity
        if isinstance(act, MarkovBernoulli):
            act = _markov_leave_one_out(act, track, u, horizon)
        else:
            act = act.downdate(1 if inc > 0 else 0)
        mag = state.magnitude.downdate(inc - 1) if inc > 0 else state.magnitude
        return Hurdle(act, mag)
    if isinstance(state, MarkovBernoulli):
        return _markov_leave_one_out(state, track, u, horizon)
    if isinstance(state, BetaBernoulli):
        return state.downdate(1 if inc > 0 else 0)
    return state.downdate(inc)
