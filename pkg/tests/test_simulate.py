"""Scenario generator: determinism, base laws, injections, ground truth."""

import numpy as np
import pytest

from graphwatch.ingest import DAY_SECONDS, fixed_width_scheme, discretize
from graphwatch.models import markov_equilibrium
from graphwatch.simulate import GroundTruth, Injection, ScenarioConfig, simulate


def pair_counts(events, periods):
    counts = {}
    scheme = fixed_width_scheme(DAY_SECONDS)
    for event in events:
        t = scheme.period_of(event.timestamp) + 1
        key = (int(event.src), int(event.dst))
        counts.setdefault(key, np.zeros(periods, dtype=int))[t - 1] += 1
    return counts


def test_zero_activity_yields_empty_stream():
    cfg = ScenarioConfig(nodes=4, periods=10, activity=("bernoulli", 0.0), seed=1)
    events, truth = simulate(cfg)
    assert events == []
    assert truth.anomalous == {}


def test_identical_seed_identical_stream():
    cfg = ScenarioConfig(nodes=8, periods=20, activity=("bernoulli", 0.3), seed=42)
    first, _ = simulate(cfg)
    second, _ = simulate(cfg)
    assert first == second
    third, _ = simulate(ScenarioConfig(nodes=8, periods=20, activity=("bernoulli", 0.3), seed=43))
    assert third != first


def test_burst_injection_scales_the_window():
    pair = (0, 1)
    cfg = ScenarioConfig(
        nodes=4,
        periods=400,
        activity=None,
        magnitude=("poisson", 1.0),
        pairs=[pair],
        seed=5,
        injections=(Injection("burst", start=301, end=400, pair=pair, factor=10.0),),
    )
    events, truth = simulate(cfg)
    counts = pair_counts(events, 400)[pair]
    base_mean = counts[:300].mean()
    burst_mean = counts[300:].mean()
    assert base_mean == pytest.approx(1.0, abs=0.25)
    assert burst_mean == pytest.approx(10.0, abs=1.5)
    assert 301 in truth.anomalous and truth.anomalous[301] == {0, 1}


def test_downtime_silences_everything():
    cfg = ScenarioConfig(
        nodes=6,
        periods=30,
        activity=("bernoulli", 0.9),
        seed=9,
        injections=(Injection("downtime", start=10, end=13),),
    )
    events, truth = simulate(cfg)
    scheme = fixed_width_scheme(DAY_SECONDS)
    periods = {scheme.period_of(e.timestamp) + 1 for e in events}
    assert periods.isdisjoint({10, 11, 12, 13})
    assert truth.network_anomalous == [10, 11, 12, 13]


def test_clique_begins_mutual_communication():
    cfg = ScenarioConfig(
        nodes=10,
        periods=12,
        activity=("bernoulli", 0.0),
        seed=3,
        injections=(Injection("clique", start=8, end=12, nodes=(2, 5, 7)),),
    )
    events, truth = simulate(cfg)
    counts = pair_counts(events, 12)
    for key in ((2, 5), (2, 7), (5, 7)):
        assert key in counts
        assert counts[key][:7].sum() == 0
        assert (counts[key][7:] >= 1).all()
    assert truth.anomalous[8] == {2, 5, 7}


def test_category_shift_moves_labels():
    cfg = ScenarioConfig(
        nodes=4,
        periods=10,
        activity=("bernoulli", 1.0),
        magnitude=("poisson", 2.0),
        towers=10,
        seed=11,
        injections=(
            Injection("category_shift", start=6, end=10, nodes=(0, 1), categories=("90", "91")),
        ),
    )
    events, _ = simulate(cfg)
    scheme = fixed_width_scheme(DAY_SECONDS)
    for event to_check in ():
        pass
    for event in events:
        t = scheme.period_of(event.timestamp) + 1
        touched = {int(event.src), int(event.dst)} & {0, 1}
        if touched and t >= 6:
            assert event.category in ("90", "91")
        else:
            assert int(event.category) < 10


def test_contradictory_injections_rejected():
    with pytest.raises(ValueError):
        ScenarioConfig(
            nodes=4,
            periods=20,
            pairs=[(0, 1)],
            injections=(
                Injection("burst", start=5, end=8, pair=(0, 1), factor=2.0),
                Injection("downtime", start=6, end=7),
            ),
        )
    with pytest.raises(ValueError):
        Injection("nonsense", start=1, end=2)
    with pytest.raises(ValueError):
        ScenarioConfig(nodes=4, periods=5, injections=(Injection("downtime", start=1, end=9),))


def test_markov_long_run_active_fraction():
    phi, psi = 0.63, 0.48
    cfg = ScenarioConfig(
        nodes=2,
        periods=10_000,
        activity=("markov", phi, psi),
        magnitude=("poisson", 0.5),
        pairs=[(0, 1)],
        seed=1234,
    )
    events, _ = simulate(cfg)
    counts = pair_counts(events, 10_000).get((0, 1), np.zeros(10_000, dtype=int))
    fraction = (counts > 0).mean()
    target = markov_equilibrium(phi, psi)
    sigma = np.sqrt(target * (1 - target) / 10_000)
    assert abs(fraction - target) <= 3 * sigma


def test_ground_truth_json_round_trip():
    truth = GroundTruth()
    truth.mark(3, {1, 2})
    truth.network_anomalous.append(7)
    payload = truth.to_json_dict()
    assert payload["anomalous"] == {"3": ["1", "2"]}
    assert payload["network_anomalous"] == [7]
