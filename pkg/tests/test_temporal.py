import random

from copilot.model import Status, TaskGraph
from copilot.temporal import check_consistency
from helpers import link, make_graph, make_task, random_instance
from oracles import enumerate_starts


def test_empty_graph_consistent():
    assert check_consistency(make_graph([])).consistent


def test_duration_exceeding_window_with_witness():
    graph = make_graph([make_task("r.a", duration=10, earliest=0, latest=5)])
    res = check_consistency(graph)
    assert not res.consistent
    text = " ".join(res.witness)
    assert "duration(r.a) = 10" in text
    assert "latest_end(r.a) = 5" in text


def test_chain_fits_exactly():
    a = make_task("r.a", duration=10, earliest=0, latest=30)
    b = make_task("r.b", duration=20, earliest=0, latest=30)
    graph = make_graph([a, b])
    link(graph, "r.a", "r.b")
    assert check_consistency(graph).consistent


def test_chain_overflows_shared_deadline():
    a = make_task("r.a", duration=10, earliest=0, latest=29)
    b = make_task("r.b", duration=20, earliest=0, latest=29)
    graph = make_graph([a, b])
    link(graph, "r.a", "r.b")
    res = check_consistency(graph)
    assert not res.consistent
    assert any("precedes" in w for w in res.witness)


def test_now_floor_applies_to_unstarted_tasks():
    graph = make_graph([make_task("r.a", duration=10, earliest=0, latest=15)])
    assert check_consistency(graph, now=5).consistent
    assert not check_consistency(graph, now=6).consistent


def test_started_task_pinned_before_now():
    graph = make_graph([make_task("r.a", duration=10, earliest=0, latest=15)])
    # dispatched at t=2; still fine at now=6 because its start is pinned
    res = check_consistency(graph, now=6, started={"r.a": 2.0})
    assert res.consistent


def test_terminal_tasks_do_not_constrain():
    a = make_task("r.a", duration=50, earliest=0, latest=10)  # window can't hold it
    a.status = Status.SUCCEEDED
    b = make_task("r.b", duration=5, earliest=0, latest=10)
    graph = make_graph([a, b])
    link(graph, "r.a", "r.b")
    assert check_consistency(graph).consistent


def test_matches_enumeration_without_resources():
    rng = random.Random(0xC0FFEE)
    checked = disagreements = 0
    for _ in range(250):
        graph, _caps = random_instance(rng)
        expected = enumerate_starts(graph, operator_capacity=None, pit_crew_capacity=None)
        got = check_consistency(graph)
        checked += 1
        if got.consistent != (expected is not None):
            disagreements += 1
    assert checked == 250
    assert disagreements == 0
