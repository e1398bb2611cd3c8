import random

from copilot.model import Gate, Phase
from copilot.planner import Capacities, relax_and_schedule, validate_schedule
from helpers import link, make_graph, make_task


def window_extensions(outcome):
    return {r.instance_id: r.relaxed - r.original for r in outcome.relaxed}


class TestWorkedExamples:
    def test_single_step_slip(self):
        # task can only start at now=1750, so it must end at 1850; one 60 s
        # step moves latest_end from 1800 to 1860
        graph = make_graph([make_task("r.a", 100, 0, 1800)])
        out = relax_and_schedule(graph, now=1750, max_slip=3600)
        assert out.feasible and not out.hard_infeasible
        assert out.total_slip == 60
        assert out.notify_operator
        assert len(out.relaxed) == 1
        r = out.relaxed[0]
        assert (r.instance_id, r.original, r.relaxed) == ("r.a", 1800, 1860)
        assert out.entries["r.a"].start == 1750

    def test_max_slip_budget_hard_fails(self):
        graph = make_graph([make_task("r.a", 100, 0, 1800)])
        out = relax_and_schedule(graph, now=1750, max_slip=30)
        assert out.hard_infeasible
        assert not out.feasible
        assert out.witness

    def test_feasible_mission_no_slip_no_notification(self):
        graph = make_graph([make_task("r.a", 100, 0, 1800)])
        out = relax_and_schedule(graph, now=0, max_slip=3600)
        assert out.feasible
        assert out.total_slip == 0
        assert not out.notify_operator
        assert out.relaxed == ()

    def test_exploration_tasks_not_relaxable(self):
        t = make_task("r.a", 100, 0, 1800, phase=Phase.EXPLORATION)
        out = relax_and_schedule(make_graph([t]), now=1750, max_slip=3600)
        assert out.hard_infeasible
        assert "not relaxable" in " ".join(out.witness)


class TestMinimality:
    def _scripted_instances(self):
        """50 deterministic infeasible-but-relaxable instances."""
        rng = random.Random(1337)
        instances = []
        while len(instances) < 50:
            n = rng.randint(2, 5)
            tasks = []
            for i in range(n):
                dur = rng.randint(30, 120)
                es = rng.randint(0, 60)
                # windows deliberately too tight for the serialized load
                le = es + dur + rng.randint(0, 45)
                gate = Gate.PRE_OPERATOR if rng.random() < 0.8 else Gate.NONE
                tasks.append(
                    make_task(f"r{i}.t{i}", dur, es, le, gate=gate, phase=Phase.SETUP)
                )
            graph = make_graph(tasks)
            for i in range(1, n):
                if rng.random() < 0.4:
                    link(graph, tasks[i - 1].instance_id, tasks[i].instance_id)
            out = relax_and_schedule(graph, now=0, max_slip=100000)
            if out.feasible and out.total_slip > 0:
                instances.append(graph)
        return instances

    def test_fifty_scripted_instances_minimal_slip(self):
        instances = self._scripted_instances()
        assert len(instances) == 50
        for graph in instances:
            out = relax_and_schedule(graph, now=0, max_slip=100000)
            assert out.feasible
            assert out.total_slip > 0
            assert out.total_slip % 60 == 0
            assert out.notify_operator
            # entries respect the widened windows and everything else
            assert (
                validate_schedule(
                    graph, out.entries, window_extensions=window_extensions(out)
                )
                == []
            )
            # one step less must hard-fail
            tighter = relax_and_schedule(graph, now=0, max_slip=out.total_slip - 60)
            assert tighter.hard_infeasible

    def test_relaxation_is_deterministic(self):
        graph = self._scripted_instances()[7]
        a = relax_and_schedule(graph, now=0, max_slip=100000)
        b = relax_and_schedule(graph, now=0, max_slip=100000)
        assert a == b


class TestRelaxationShape:
    def test_slip_lands_on_failing_task_only(self):
        # two operator tasks forced through a one-wide window: the second
        # one placed takes all the slip
        a = make_task("r1.a", 50, 0, 50, gate=Gate.PRE_OPERATOR)
        b = make_task("r2.b", 50, 0, 50, gate=Gate.PRE_OPERATOR)
        out = relax_and_schedule(make_graph([a, b]), max_slip=600)
        assert out.feasible
        assert out.total_slip == 60
        assert [r.instance_id for r in out.relaxed] == ["r2.b"]
        assert out.entries["r2.b"].start == 50

    def test_jump_matches_repeated_steps(self):
        # needs 500 s of slip on one task: one jump of ceil(500/60)*60 = 540
        graph = make_graph([make_task("r.a", 100, 0, 600)])
        out = relax_and_schedule(graph, now=1000, max_slip=10000)
        assert out.feasible
        assert out.total_slip == 540
        assert out.relaxed[0].relaxed == 1140
        tighter = relax_and_schedule(graph, now=1000, max_slip=480)
        assert tighter.hard_infeasible

    def test_capacity_respected_after_relaxation(self):
        tasks = [
            make_task(f"r{i}.t", 40, 0, 60, gate=Gate.PRE_OPERATOR) for i in range(3)
        ]
        out = relax_and_schedule(make_graph(tasks), max_slip=6000)
        assert out.feasible
        assert (
            validate_schedule(
                make_graph(tasks),
                out.entries,
                capacities=Capacities(),
                window_extensions=window_extensions(out),
            )
            == []
        )
