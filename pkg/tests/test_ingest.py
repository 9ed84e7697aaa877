"""Event parsing and period discretization."""

import numpy as np
import pytest

from graphwatch.ingest import (
    DAY_SECONDS,
    EdgeEvent,
    MalformedInputError,
    discretize,
    equalized_day_bins,
    fixed_width_scheme,
    parse_events,
)

HOUR = 3600.0


def tod_events(hours, day=0):
    return [
        EdgeEvent(day * DAY_SECONDS + h * HOUR, "a", "b", directed=False) for h in hours
    ]


# -- parsing -------------------------------------------------------------------


def test_parse_undirected_list(tmp_path):
    path = tmp_path / "events.csv"
    path.write_text("2005-01-03,Alice,Bob\n2005-01-10,Bob,Carol\n")
    result = parse_events(path, "undirected-list")
    assert not result.errors
    first = result.events[0]
    assert first.src == "Alice" and first.dst == "Bob"
    assert first.directed is False
    # 2005-01-03 relative to the epoch, at date resolution
    assert first.timestamp % DAY_SECONDS == 0
    assert (result.events[1].timestamp - first.timestamp) == 7 * DAY_SECONDS


def test_parse_call_record(tmp_path):
    path = tmp_path / "calls.csv"
    path.write_text("86400,17,203,120,30\n")
    result = parse_events(path, "call-record")
    event = result.events[0]
    assert event.timestamp == 86400.0
    assert (event.src, event.dst) == ("17", "203")
    assert event.directed is True
    assert event.duration == 120.0
    assert event.category == "30"
    assert fixed_width_scheme(DAY_SECONDS).period_of(event.timestamp) == 1


def test_malformed_rows_collected_with_line_numbers(tmp_path):
    path = tmp_path / "calls.csv"
    rows = ["0,1,2,60,5"] * 120
    rows.insert(3, "only,two")
    path.write_text("\n".join(rows) + "\n")
    result = parse_events(path, "call-record")
    assert len(result.events) == 120
    assert len(result.errors) == 1
    assert result.errors[0].line == 4


def test_malformed_fraction_aborts(tmp_path):
    path = tmp_path / "calls.csv"
    path.write_text("bad,row\n0,1,2,60,5\n")
    with pytest.raises(MalformedInputError):
        parse_events(path, "call-record")
    # a looser limit tolerates it
    result = parse_events(path, "call-record", max_bad_fraction=0.6)
    assert len(result.events) == 1


def test_header_flag_and_missing_file(tmp_path):
    path = tmp_path / "x.csv"
    path.write_text("timestamp,caller,callee,duration,tower\n5,1,2,60,3\n")
    result = parse_events(path, "call-record", header=True)
    assert len(result.events) == 1
    with pytest.raises(OSError):
        parse_events(tmp_path / "nope.csv", "call-record")


# -- equalized bins ---------------------------------------------------------------


def test_equalized_bins_worked_example():
    events = tod_events([1, 2, 3, 10, 11, 12, 20, 21, 22, 23])
    scheme = equalized_day_bins(events, 5)
    assert scheme.boundaries == (3 * HOUR, 11 * HOUR, 20 * HOUR, 22 * HOUR)
    counts = [0] * 5
    for event in events:
        counts[scheme.period_of(event.timestamp) % 5] += 1
    assert counts == [2, 2, 2, 2, 2]


def test_equalized_bins_uniform_times_near_even_cuts():
    hours = [0.5 + i for i in range(24)]  # one event per hour
    scheme = equalized_day_bins(tod_events(hours), 4)
    for boundary, target in zip(scheme.boundaries, (6, 12, 18)):
        # the cut lands on an event, within one inter-event gap of the ideal
        assert abs(boundary - target * HOUR) <= HOUR


def test_equalized_single_bin_and_degenerate():
    events = tod_events([1, 5, 9])
    scheme = equalized_day_bins(events, 1)
    assert scheme.boundaries == ()
    assert scheme.period_of(events[0].timestamp) == 0
    with pytest.raises(ValueError):
        equalized_day_bins(events, 4)
    # with every timestamp tied, two cuts would coincide
    with pytest.raises(ValueError):
        equalized_day_bins(tod_events([7] * 20), 3)
    # a single cut through the tie block is still well defined; ties all fall
    # on one side of the boundary
    scheme = equalized_day_bins(tod_events([7] * 20), 2)
    assert scheme.boundaries == (7 * HOUR,)


def test_boundary_event_goes_right():
    events = tod_events([1, 2, 3, 10, 11, 12, 20, 21, 22, 23])
    scheme = equalized_day_bins(events, 5)
    # 3h is a boundary: left-closed bins put it in the second bin
    assert scheme.period_of(3 * HOUR) == 1
    assert scheme.period_of(3 * HOUR - 1e-6) == 0


# -- discretization ----------------------------------------------------------------


def test_ten_days_by_five_bins_gives_fifty_periods():
    rng = np.random.default_rng(1)
    events = []
    for day in range(10):
        hours = sorted(rng.uniform(0, 24, 40))
        events.extend(tod_events(hours, day=day))
    scheme = equalized_day_bins(events, 5)
    groups = discretize(events, scheme)
    assert len(groups) == 50
    assert sum(len(g) for g in groups) == len(events)
    indices = sorted({scheme.period_of(e.timestamp) for e in events})
    assert indices[0] == 0 and indices[-1] == 49


def test_weekly_widths_cover_131_weeks():
    events = [
        EdgeEvent(week * 7 * DAY_SECONDS + 3 * DAY_SECONDS, "a", "b", directed=False)
        for week in range(131)
    ]
    scheme = fixed_width_scheme(7 * DAY_SECONDS)
    groups = discretize(events, scheme)
    assert len(groups) == 131
    assert all(len(g) == 1 for g in groups)


def test_every_event_lands_in_exactly_one_period():
    rng = np.random.default_rng(7)
    events = [
        EdgeEvent(float(ts), "a", "b", directed=False)
        for ts in rng.uniform(0, 20 * DAY_SECONDS, 500)
    ]
    scheme = equalized_day_bins(events, 3)
    groups = discretize(events, scheme)
    assert sum(len(g) for g in groups) == 500
    for idx, group in enumerate(groups):
        for event in group:
            assert scheme.period_of(event.timestamp) == idx


def test_empty_periods_materialized():
    events = [
        EdgeEvent(0.5 * DAY_SECONDS, "a", "b", directed=False),
        EdgeEvent(4.5 * DAY_SECONDS, "a", "b", directed=False),
    ]
    groups = discretize(events, fixed_width_scheme(DAY_SECONDS))
    assert len(groups) == 5
    assert [len(g) for g in groups] == [1, 0, 0, 0, 1]


def test_event_before_origin_rejected():
    scheme = fixed_width_scheme(DAY_SECONDS, origin=100.0)
    with pytest.raises(ValueError):
        discretize([EdgeEvent(50.0, "a", "b", directed=False)], scheme)
