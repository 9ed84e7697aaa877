"""Synthetic dynamic-network generator with known ground truth.

Normal traffic is drawn independently per pair from a configured activity /
magnitude law; anomalies are injected over explicit windows: rate bursts on
a pair, whole-network downtime, a clique that starts communicating, and a
group whose categorical labels shift to new support.  Every pair owns an RNG
stream derived from the scenario seed and the pair key, so output never
depends on scheduling or worker count.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict
from typing import Optional

import numpy as np

from .ingest import DAY_SECONDS, EdgeEvent

__all__ = ["Injection", "ScenarioConfig", "GroundTruth", "simulate"]

INJECTION_KINDS = ("burst", "downtime", "clique", "category_shift")


@dataclass(frozen=True)
class Injection:
    kind: str
    start: int  # first affected period, 1-based
    end: int  # last affected period, inclusive
    pair: Optional[tuple] = None  # burst
    factor: float = 1.0  # burst
    nodes: tuple = ()  # clique / category_shift
    rate: float = 1.0  # clique: mean events per pair-period
    categories: tuple = ()  # category_shift target labels

    def __post_init__(self):
        if self.kind not in INJECTION_KINDS:
            raise ValueError(f"unknown injection kind {self.kind!r}")
        if self.start < 1 or self.end < self.start:
            raise ValueError(f"bad injection window [{self.start}, {self.end}]")

    def window(self) -> range:
        return range(self.start, self.end + 1)


@dataclass(frozen=True)
class ScenarioConfig:
    nodes: int
    periods: int
    activity: Optional[tuple] = ("bernoulli", 0.1)  # or ("markov", phi, psi); None = plain counts
    magnitude: tuple = ("poisson", 1.0)  # or ("geometric", q)
    pairs: object = "all"  # "all" or an explicit list of (a, b) index pairs
    directed: bool = False
    towers: int = 0  # label events with categories 0..towers-1 when > 0
    seed: int = 0
    injections: tuple = ()

    def __post_init__(self):
        if self.nodes < 2 or self.periods < 1:
            raise ValueError("need at least two nodes and one period")
        if self.activity is not None:
            kind = self.activity[0]
            if kind == "bernoulli":
                if not 0.0 <= self.activity[1] <= 1.0:
                    raise ValueError("activity probability outside [0, 1]")
            elif kind == "markov":
                if not all(0.0 <= p <= 1.0 for p in self.activity[1:3]):
                    raise ValueError("markov probabilities outside [0, 1]")
            else:
                raise ValueError(f"unknown activity law {kind!r}")
        mk = self.magnitude[0]
        if mk == "poisson":
            if not self.magnitude[1] > 0.0:
                raise ValueError("poisson rate must be positive")
        elif mk == "geometric":
            if not 0.0 < self.magnitude[1] <= 1.0:
                raise ValueError("geometric parameter outside (0, 1]")
        else:
            raise ValueError(f"unknown magnitude law {mk!r}")
        for inj in self.injections:
            if inj.end > self.periods:
                raise ValueError("injection window extends past the scenario")
        self._check_conflicts()

    def _check_conflicts(self):
        # Downtime silences everything; a burst or clique inside a downtime
        # window on an overlapping subject is contradictory.
        downtimes = [i for i in self.injections if i.kind == "downtime"]
        for inj in self.injections:
            if inj.kind not in ("burst", "clique"):
                continue
            for dt in downtimes:
                if inj.start <= dt.end and dt.start <= inj.end:
                    raise ValueError(
                        f"{inj.kind} window [{inj.start}, {inj.end}] contradicts "
                        f"downtime [{dt.start}, {dt.end}]"
                    )

    def pair_universe(self) -> list[tuple]:
        if self.pairs == "all":
            return [(a, b) for a in range(self.nodes) for b in range(a + 1, self.nodes)]
        pairs = []
        for a, b in self.pairs:
            if a == b:
                raise ValueError("self-loop pair in scenario")
            if not (0 <= a < self.nodes and 0 <= b < self.nodes):
                raise ValueError(f"pair ({a}, {b}) outside the node range")
            pairs.append((min(a, b), max(a, b)) if not self.directed else (a, b))
        return pairs


@dataclass
class GroundTruth:
    anomalous: dict[int, set] = field(default_factory=dict)  # period -> node ids
    network_anomalous: list[int] = field(default_factory=list)  # downtime periods
    injections: list[dict] = field(default_factory=list)

    def mark(self, period: int, nodes) -> None:
        self.anomalous.setdefault(period, set()).update(nodes)

    def to_json_dict(self) -> dict:
        return {
            "anomalous": {str(t): sorted(map(str, s)) for t, s in sorted(self.anomalous.items())},
            "network_anomalous": sorted(self.network_anomalous),
            "injections": self.injections,
        }


def _pair_rng(seed: int, a: int, b: int, lane: int = 0) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((seed, a, b, lane)))


def _magnitude_counts(rng, magnitude, periods: int) -> np.ndarray:
    kind = magnitude[0]
    if kind == "poisson":
        return rng.poisson(magnitude[1], periods)
    q = magnitude[1]
    return rng.geometric(q, periods) - 1


def _base_counts(cfg: ScenarioConfig, a: int, b: int) -> np.ndarray:
    """Per-period counts for one pair under the configured normal law."""
    rng = _pair_rng(cfg.seed, a, b)
    mags = _magnitude_counts(rng, cfg.magnitude, cfg.periods)
    if cfg.activity is None:
        return mags
    if cfg.activity[0] == "bernoulli":
        active = rng.random(cfg.periods) < cfg.activity[1]
    else:
        _, phi, psi = cfg.activity
        draws = rng.random(cfg.periods)
        active = np.zeros(cfg.periods, dtype=bool)
        prev = draws[0] < markov_start(phi, psi)
        active[0] = prev
        for t in range(1, cfg.periods):
            p = phi if prev else psi
            prev = draws[t] < p
            active[t] = prev
    return np.where(active, mags + 1, 0)


def markov_start(phi: float, psi: float) -> float:
    """Initial activity probability: the chain's stationary point."""
    from .models import markov_equilibrium

    return markov_equilibrium(phi, psi)


def simulate(cfg: ScenarioConfig) -> tuple[list[EdgeEvent], GroundTruth]:
    """Generate one scenario: (event stream, ground truth).

    Deterministic given the config; events are ordered by period, then pair.
    Timestamps place each period in its own day so a fixed one-day scheme
    recovers the period structure.
    """
    truth = GroundTruth(injections=[asdict(i) for i in cfg.injections])
    pair_list = cfg.pair_universe()
    counts: dict[tuple, np.ndarray] = {}
    for a, b in pair_list:
        counts[(a, b)] = _base_counts(cfg, a, b)

    clique_members: set = set()
    for inj in cfg.injections:
        if inj.kind == "burst":
            a, b = inj.pair
            key = (min(a, b), max(a, b)) if not cfg.directed else (a, b)
            if key not in counts:
                counts[key] = _base_counts(cfg, *key)
            rng = _pair_rng(cfg.seed, key[0], key[1], lane=1)
            base_mean = _conditional_mean(cfg)
            target = max(inj.factor * base_mean, 0.0)
            for t in inj.window():
                if cfg.activity is None:
                    counts[key][t - 1] = rng.poisson(target)
                else:
                    counts[key][t - 1] = 1 + rng.poisson(max(target - 1.0, 0.0))
                truth.mark(t, key)
        elif inj.kind == "clique":
            clique_members.update(inj.nodes)
            members = sorted(inj.nodes)
            for i, a in enumerate(members):
                for b in members[i + 1 :]:
                    key = (a, b) if not cfg.directed else (a, b)
                    if key not in counts:
                        counts[key] = np.zeros(cfg.periods, dtype=int)
                    rng = _pair_rng(cfg.seed, key[0], key[1], lane=2)
                    extra = rng.poisson(max(inj.rate - 1.0, 0.0), cfg.periods)
                    for t in inj.window():
                        counts[key][t - 1] = max(counts[key][t - 1], 1 + extra[t - 1])
                        truth.mark(t, key)
        elif inj.kind == "downtime":
            for key in counts:
                for t in inj.window():
                    counts[key][t - 1] = 0
            truth.network_anomalous.extend(inj.window())

    shift_lookup: dict[int, Injection] = {}
    for inj in cfg.injections:
        if inj.kind == "category_shift":
            for node in inj.nodes:
                shift_lookup[node] = inj
            for t in inj.window():
                truth.mark(t, inj.nodes)

    events: list[EdgeEvent] = []
    order = sorted(counts)
    for t in range(1, cfg.periods + 1):
        for key in order:
            c = int(counts[key][t - 1])
            if c <= 0:
                continue
            a, b = key
            tower_rng = _pair_rng(cfg.seed, a, b, lane=3 + t) if cfg.towers else None
            base_ts = (t - 1) * DAY_SECONDS
            for j in range(c):
                ts = base_ts + (j + 1) * DAY_SECONDS / (c + 1)
                category = None
                if cfg.towers:
                    inj = shift_lookup.get(a) or shift_lookup.get(b)
                    if inj is not None and inj.start <= t <= inj.end and inj.categories:
                        category = str(inj.categories[int(tower_rng.integers(len(inj.categories)))])
                    else:
                        category = str(int(tower_rng.integers(cfg.towers)))
                events.append(
                    EdgeEvent(
                        ts,
                        str(a),
                        str(b),
                        directed=cfg.directed,
                        duration=60.0,
                        category=category,
                    )
                )
    return events, truth


def _conditional_mean(cfg: ScenarioConfig) -> float:
    """Mean count of an active (or plain) period under the base law."""
    kind, value = cfg.magnitude[0], cfg.magnitude[1]
    mag_mean = value if kind == "poisson" else (1.0 - value) / value
    if cfg.activity is None:
        return mag_mean
    return mag_mean + 1.0
