from pathlib import Path

import pytest

from copilot.model import Status, generate_tasks
from copilot.pddl import (
    PddlSyntaxError,
    check_domain,
    check_problem,
    export_pddl,
)

FIXTURES = Path(__file__).parent / "fixtures"


def export_for(template, robots, **kw):
    graph = generate_tasks(template, robots)
    return export_pddl(graph, horizon=template.exploration_window[1], **kw)


class TestExportStructure:
    def test_one_durative_action_per_def(self, template):
        domain, _ = export_for(template, ["spot1"])
        assert domain.count("(:durative-action ") == 21
        check_domain(domain)

    def test_problem_objects_match_roster(self, template):
        _, problem = export_for(template, ["spot1", "spot2"])
        assert "(:objects spot1 spot2 - robot)" in problem
        check_problem(problem)

    def test_window_timed_initial_literals(self, template):
        _, problem = export_for(template, ["spot1"])
        # setup tasks open at once and close at 1800
        assert "(window-stage-robot spot1)" in problem
        assert "(at 1800 (not (window-stage-robot spot1)))" in problem
        # course opens at 1800 for deployment tasks
        assert "(at 1800 (window-go-no-go spot1))" in problem
        assert "(at 5400 (not (window-go-no-go spot1)))" in problem

    def test_operator_resource_on_gated_actions_only(self, template):
        domain, _ = export_for(template, ["spot1"])
        blocks = domain.split("(:durative-action ")
        by_name = {b.split("\n", 1)[0].strip(): b for b in blocks[1:]}
        assert "(at start (operator-free))" in by_name["do-go-no-go"]
        assert "(at start (operator-free))" in by_name["do-launch-base-software"]
        assert "(operator-free)" not in by_name["do-boot-computers"]

    def test_dependencies_become_conditions(self, template):
        domain, _ = export_for(template, ["spot1"])
        blocks = domain.split("(:durative-action ")
        deploy = next(b for b in blocks if b.startswith("do-deploy-into-course"))
        assert "(at start (done-go-no-go ?a))" in deploy
        launch = next(b for b in blocks if b.startswith("do-launch-robot-software"))
        assert "(at start (done-launch-base-software base))" in launch
        begin = next(b for b in blocks if b.startswith("do-begin-exploration-phase"))
        assert "(forall (?x - robot) (done-start-exploration ?x))" in begin

    def test_ongoing_task_remaining_duration(self, template):
        graph = generate_tasks(template, ["spot1"])
        iid = "base.launch_base_software"
        graph.tasks[iid].status = Status.ACTIVE
        _, problem = export_pddl(
            graph, 5400, now=100.0, started={iid: 80.0}
        )
        # 20 s elapsed of the nominal 60
        assert "(ongoing-launch-base-software base)" in problem
        assert "(= (remaining-launch-base-software base) 40)" in problem
        check_problem(problem)

    def test_succeeded_tasks_exported_as_done(self, template):
        graph = generate_tasks(template, ["spot1"])
        graph.tasks["base.mission_clock_sync"].status = Status.SUCCEEDED
        _, problem = export_pddl(graph, 5400, now=500.0)
        assert "(done-mission-clock-sync base)" in problem
        assert "(pending-mission-clock-sync base)" not in problem

    def test_goal_covers_every_instance(self, template):
        graph = generate_tasks(template, ["spot1", "spot2"])
        _, problem = export_pddl(graph, 5400)
        goal = problem.split("(:goal", 1)[1]
        assert goal.count("(done-") == 34

    def test_empty_graph_still_valid(self, template):
        graph = generate_tasks(template, [])
        domain, problem = export_pddl(graph, 5400)
        check_domain(domain)
        check_problem(problem)
        assert domain.count("(:durative-action ") == 8

    def test_export_is_deterministic(self, template):
        assert export_for(template, ["spot2", "spot1"]) == export_for(
            template, ["spot1", "spot2"]
        )


class TestGoldenFiles:
    @pytest.mark.parametrize("n", [1, 4])
    def test_matches_frozen_export(self, template, n):
        robots = [f"spot{i}" for i in range(1, n + 1)]
        domain, problem = export_for(template, robots)
        dom_path = FIXTURES / f"mission_{n}robot.domain.pddl"
        prob_path = FIXTURES / f"mission_{n}robot.problem.pddl"
        assert domain == dom_path.read_text()
        assert problem == prob_path.read_text()
        check_domain(domain)
        check_problem(problem)


class TestGrammarChecker:
    def test_rejects_unbalanced_parens(self):
        with pytest.raises(PddlSyntaxError):
            check_domain("(define (domain d) (:predicates (p)")

    def test_rejects_unknown_requirement(self):
        with pytest.raises(PddlSyntaxError) as e:
            check_domain("(define (domain d) (:requirements :telepathy))")
        assert "telepathy" in str(e.value)

    def test_rejects_action_without_duration(self):
        text = (
            "(define (domain d) (:durative-action go :parameters (?a - agent) "
            ":condition (at start (p ?a)) :effect (at end (q ?a))))"
        )
        with pytest.raises(PddlSyntaxError) as e:
            check_domain(text)
        assert ":duration" in str(e.value)

    def test_rejects_untimed_durative_condition(self):
        text = (
            "(define (domain d) (:durative-action go :parameters (?a - agent) "
            ":duration (= ?duration 5) :condition (p ?a) :effect (at end (q ?a))))"
        )
        with pytest.raises(PddlSyntaxError):
            check_domain(text)

    def test_rejects_bad_til(self):
        text = (
            "(define (problem p) (:domain d) (:objects a - agent) "
            "(:init (at soon (opened a))) (:goal (and (done a))))"
        )
        with pytest.raises(PddlSyntaxError):
            check_problem(text)

    def test_rejects_variable_in_init(self):
        text = (
            "(define (problem p) (:domain d) (:objects a - agent) "
            "(:init (opened ?x)) (:goal (and (done a))))"
        )
        with pytest.raises(PddlSyntaxError):
            check_problem(text)

    def test_comments_are_ignored(self):
        check_domain("(define (domain d) ; a comment\n (:predicates (p ?x - agent)))")
