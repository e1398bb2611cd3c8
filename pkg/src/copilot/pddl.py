"""PDDL 2.1 export of a mission graph, plus a small grammar checker.

The export is an interoperability surface for external temporal planners:
one durative action per task definition, per-instance window predicates
driven by timed initial literals, and a unit operator resource.  Tasks that
are already running are marked ongoing and keep only their remaining
duration (durations live in numeric fluents, so this needs no extra action).
The pit crew pool is not modeled here; the native scheduler owns it.
"""

from __future__ import annotations

import re
from typing import Any, Mapping

from .model import BASE, Gate, Scope, Status, TaskGraph

DOMAIN_NAME = "mission-orchestration"

_OPERATOR_GATES = (Gate.PRE_OPERATOR, Gate.SIGNOFF_OPERATOR, Gate.GONOGO)


class PddlSyntaxError(ValueError):
    pass


def _sym(name: str) -> str:
    # task ids use snake_case; PDDL tradition is kebab-case
    return name.replace("_", "-")


def _num(x: float) -> str:
    if float(x) == int(x):
        return str(int(x))
    return repr(float(x))


def _collect_defs(graph: TaskGraph):
    base_defs: dict[str, Any] = {}
    robot_defs: dict[str, Any] = {}
    robots: set[str] = set()
    for task in graph.tasks.values():
        if task.robot == BASE:
            base_defs[task.def_.id] = task.def_
        else:
            robot_defs[task.def_.id] = task.def_
            robots.add(task.robot)
    return (
        dict(sorted(base_defs.items())),
        dict(sorted(robot_defs.items())),
        sorted(robots),
    )


def export_domain(graph: TaskGraph) -> str:
    base_defs, robot_defs, _ = _collect_defs(graph)
    all_defs = {**base_defs, **robot_defs}
    needs_forall = any(
        dep.scope == Scope.ALL_ROBOTS for d in all_defs.values() for dep in d.deps
    )
    reqs = [":typing", ":durative-actions", ":timed-initial-literals"]
    if needs_forall:
        reqs.append(":universal-preconditions")
    lines: list[str] = []
    lines.append(f"(define (domain {DOMAIN_NAME})")
    lines.append(f"  (:requirements {' '.join(reqs)})")
    lines.append("  (:types robot - agent)")
    lines.append("  (:constants base - agent)")
    lines.append("  (:predicates")
    lines.append("    (operator-free)")
    for def_id in sorted(all_defs):
        s = _sym(def_id)
        lines.append(f"    (pending-{s} ?a - agent)")
        lines.append(f"    (done-{s} ?a - agent)")
        lines.append(f"    (ongoing-{s} ?a - agent)")
        lines.append(f"    (window-{s} ?a - agent)")
    lines.append("  )")
    lines.append("  (:functions")
    for def_id in sorted(all_defs):
        lines.append(f"    (remaining-{_sym(def_id)} ?a - agent)")
    lines.append("  )")
    for def_id in sorted(all_defs):
        d = all_defs[def_id]
        s = _sym(def_id)
        param_type = "agent" if def_id in base_defs else "robot"
        conds = [f"(at start (pending-{s} ?a))"]
        for dep in d.deps:
            ds = _sym(dep.task)
            if dep.scope == Scope.SAME_ROBOT:
                conds.append(f"(at start (done-{ds} ?a))")
            elif dep.scope == Scope.BASE:
                conds.append(f"(at start (done-{ds} base))")
            else:
                conds.append(f"(at start (forall (?x - robot) (done-{ds} ?x)))")
        conds.append(f"(over all (window-{s} ?a))")
        gated = d.gate in _OPERATOR_GATES
        if gated:
            conds.append("(at start (operator-free))")
        effects = [f"(at start (not (pending-{s} ?a)))"]
        if gated:
            effects.append("(at start (not (operator-free)))")
            effects.append("(at end (operator-free))")
        effects.append(f"(at end (done-{s} ?a))")
        lines.append(f"  (:durative-action do-{s}")
        lines.append(f"    :parameters (?a - {param_type})")
        lines.append(f"    :duration (= ?duration (remaining-{s} ?a))")
        lines.append("    :condition (and")
        for c in conds:
            lines.append(f"      {c}")
        lines.append("    )")
        lines.append("    :effect (and")
        for e in effects:
            lines.append(f"      {e}")
        lines.append("    )")
        lines.append("  )")
    lines.append(")")
    return "\n".join(lines) + "\n"


def export_problem(
    graph: TaskGraph,
    horizon: float,
    now: float = 0.0,
    started: Mapping[str, float] | None = None,
    name: str = "mission",
) -> str:
    """Ground the graph at `now`.

    `started` maps active instance ids to their execution start; remaining
    duration is nominal minus elapsed.  Window literals open/close via timed
    initial literals relative to `now` (PDDL time 0 == mission clock `now`).
    """
    started = started or {}
    _, _, robots = _collect_defs(graph)
    lines: list[str] = []
    lines.append(f"(define (problem {name})")
    lines.append(f"  (:domain {DOMAIN_NAME})")
    if robots:
        lines.append(f"  (:objects {' '.join(robots)} - robot)")
    else:
        lines.append("  (:objects )")
    lines.append("  (:init")
    lines.append("    (operator-free)")
    goal: list[str] = []
    for iid in sorted(graph.tasks):
        task = graph.tasks[iid]
        s = _sym(task.def_.id)
        agent = task.robot
        goal.append(f"(done-{s} {agent})")
        if task.status == Status.SUCCEEDED:
            lines.append(f"    (done-{s} {agent})")
            continue
        remaining = task.def_.duration
        if iid in started:
            elapsed = max(0.0, now - started[iid])
            remaining = max(0.0, task.def_.duration - elapsed)
            lines.append(f"    (ongoing-{s} {agent})")
        lines.append(f"    (pending-{s} {agent})")
        lines.append(f"    (= (remaining-{s} {agent}) {_num(remaining)})")
        opens = max(0.0, task.def_.earliest_start - now)
        closes = max(0.0, task.latest_end - now)
        if opens <= 0:
            lines.append(f"    (window-{s} {agent})")
        else:
            lines.append(f"    (at {_num(opens)} (window-{s} {agent}))")
        lines.append(f"    (at {_num(closes)} (not (window-{s} {agent})))")
    lines.append("  )")
    lines.append("  (:goal (and")
    for g in goal:
        lines.append(f"    {g}")
    lines.append("  ))")
    lines.append("  (:metric minimize (total-time))")
    lines.append(")")
    _ = horizon  # documented upper bound; windows already encode deadlines
    return "\n".join(lines) + "\n"


def export_pddl(
    graph: TaskGraph,
    horizon: float,
    now: float = 0.0,
    started: Mapping[str, float] | None = None,
    name: str = "mission",
) -> tuple[str, str]:
    return export_domain(graph), export_problem(graph, horizon, now, started, name)


# ---------------------------------------------------------------------------
# grammar checker

_TOKEN = re.compile(r"\(|\)|[^\s()]+")
_NAME = re.compile(r"^[A-Za-z][A-Za-z0-9_-]*$")
_VAR = re.compile(r"^\?[A-Za-z][A-Za-z0-9_-]*$")

KNOWN_REQUIREMENTS = {
    ":strips", ":typing", ":negative-preconditions", ":disjunctive-preconditions",
    ":equality", ":existential-preconditions", ":universal-preconditions",
    ":quantified-preconditions", ":conditional-effects", ":fluents",
    ":numeric-fluents", ":adl", ":durative-actions", ":duration-inequalities",
    ":continuous-effects", ":timed-initial-literals",
}


def _tokenize(text: str) -> list[str]:
    out: list[str] = []
    for line in text.splitlines():
        if ";" in line:
            line = line[: line.index(";")]
        out.extend(_TOKEN.findall(line))
    return out


def _parse(tokens: list[str]):
    pos = [0]

    def read():
        if pos[0] >= len(tokens):
            raise PddlSyntaxError("unexpected end of input")
        tok = tokens[pos[0]]
        pos[0] += 1
        if tok == "(":
            items = []
            while True:
                if pos[0] >= len(tokens):
                    raise PddlSyntaxError("unbalanced parenthesis")
                if tokens[pos[0]] == ")":
                    pos[0] += 1
                    return items
                items.append(read())
        if tok == ")":
            raise PddlSyntaxError("unexpected ')'")
        return tok

    tree = read()
    if pos[0] != len(tokens):
        raise PddlSyntaxError(f"trailing tokens after form: {tokens[pos[0]]!r}")
    return tree


def _is_number(tok: Any) -> bool:
    if not isinstance(tok, str):
        return False
    try:
        float(tok)
        return True
    except ValueError:
        return False


def _check_name(tok: Any, what: str) -> None:
    if not isinstance(tok, str) or not _NAME.match(tok):
        raise PddlSyntaxError(f"bad {what}: {tok!r}")


def _check_typed_list(items: list, what: str, var: bool) -> None:
    """<x>+ - <type> groups; variables or constant names per `var`."""
    i = 0
    while i < len(items):
        saw = 0
        while i < len(items) and items[i] != "-":
            tok = items[i]
            if var:
                if not isinstance(tok, str) or not _VAR.match(tok):
                    raise PddlSyntaxError(f"bad variable in {what}: {tok!r}")
            else:
                _check_name(tok, f"name in {what}")
            saw += 1
            i += 1
        if i < len(items):  # consume "- type"
            if saw == 0:
                raise PddlSyntaxError(f"dangling type marker in {what}")
            i += 1
            if i >= len(items):
                raise PddlSyntaxError(f"missing type after '-' in {what}")
            _check_name(items[i], f"type in {what}")
            i += 1


def _check_term(tok: Any) -> None:
    if isinstance(tok, list):
        raise PddlSyntaxError(f"nested term not allowed: {tok!r}")
    if not (_NAME.match(tok) or _VAR.match(tok)):
        raise PddlSyntaxError(f"bad term: {tok!r}")


def _check_atom(form: Any) -> None:
    if not isinstance(form, list) or not form:
        raise PddlSyntaxError(f"bad atom: {form!r}")
    _check_name(form[0], "predicate name")
    for arg in form[1:]:
        _check_term(arg)


def _check_fexp(form: Any) -> None:
    if isinstance(form, str):
        if not _is_number(form):
            raise PddlSyntaxError(f"bad numeric expression: {form!r}")
        return
    if not isinstance(form, list) or not form:
        raise PddlSyntaxError(f"bad numeric expression: {form!r}")
    if form[0] in ("+", "-", "*", "/"):
        for sub in form[1:]:
            _check_fexp(sub)
        return
    _check_atom(form)  # fluent head


def _check_gd(form: Any) -> None:
    if not isinstance(form, list) or not form:
        raise PddlSyntaxError(f"bad condition: {form!r}")
    head = form[0]
    if head == "and":
        for sub in form[1:]:
            _check_gd(sub)
    elif head == "not":
        if len(form) != 2:
            raise PddlSyntaxError("not takes one argument")
        _check_gd(form[1])
    elif head in ("forall", "exists"):
        if len(form) != 3 or not isinstance(form[1], list):
            raise PddlSyntaxError(f"bad quantifier: {form!r}")
        _check_typed_list(form[1], "quantifier", var=True)
        _check_gd(form[2])
    elif head in ("=", "<", ">", "<=", ">="):
        if len(form) != 3:
            raise PddlSyntaxError(f"comparison takes two arguments: {form!r}")
        _check_fexp(form[1])
        _check_fexp(form[2])
    else:
        _check_atom(form)


def _check_timed_gd(form: Any) -> None:
    if not isinstance(form, list) or not form:
        raise PddlSyntaxError(f"bad durative condition: {form!r}")
    if form[0] == "and":
        for sub in form[1:]:
            _check_timed_gd(sub)
        return
    if form[0] == "at" and len(form) == 3 and form[1] in ("start", "end"):
        _check_gd(form[2])
        return
    if form[0] == "over" and len(form) == 3 and form[1] == "all":
        _check_gd(form[2])
        return
    raise PddlSyntaxError(f"durative condition must be timed: {form!r}")


def _check_effect(form: Any) -> None:
    if not isinstance(form, list) or not form:
        raise PddlSyntaxError(f"bad effect: {form!r}")
    head = form[0]
    if head == "and":
        for sub in form[1:]:
            _check_effect(sub)
    elif head == "not":
        if len(form) != 2:
            raise PddlSyntaxError("not takes one literal")
        _check_atom(form[1])
    elif head in ("assign", "increase", "decrease", "scale-up", "scale-down"):
        if len(form) != 3:
            raise PddlSyntaxError(f"bad numeric effect: {form!r}")
        _check_atom(form[1])
        _check_fexp(form[2])
    else:
        _check_atom(form)


def _check_timed_effect(form: Any) -> None:
    if not isinstance(form, list) or not form:
        raise PddlSyntaxError(f"bad durative effect: {form!r}")
    if form[0] == "and":
        for sub in form[1:]:
            _check_timed_effect(sub)
        return
    if form[0] == "at" and len(form) == 3 and form[1] in ("start", "end"):
        _check_effect(form[2])
        return
    raise PddlSyntaxError(f"durative effect must be timed: {form!r}")


def _sections(forms: list) -> dict[str, list]:
    out: dict[str, list] = {}
    for form in forms:
        if not isinstance(form, list) or not form or not isinstance(form[0], str):
            raise PddlSyntaxError(f"bad section: {form!r}")
        out.setdefault(form[0], []).append(form)
    return out


def _check_durative_action(form: list) -> None:
    if len(form) < 2:
        raise PddlSyntaxError("durative action needs a name")
    _check_name(form[1], "action name")
    body = form[2:]
    if len(body) % 2 != 0:
        raise PddlSyntaxError(f"odd keyword/value pairing in action {form[1]}")
    fields = {body[i]: body[i + 1] for i in range(0, len(body), 2)}
    for required in (":parameters", ":duration", ":condition", ":effect"):
        if required not in fields:
            raise PddlSyntaxError(f"action {form[1]} missing {required}")
    if not isinstance(fields[":parameters"], list):
        raise PddlSyntaxError("parameters must be a typed variable list")
    _check_typed_list(fields[":parameters"], "parameters", var=True)
    dur = fields[":duration"]
    if (
        not isinstance(dur, list)
        or len(dur) != 3
        or dur[0] not in ("=", "<=", ">=")
        or dur[1] != "?duration"
    ):
        raise PddlSyntaxError(f"bad duration constraint: {dur!r}")
    _check_fexp(dur[2])
    _check_timed_gd(fields[":condition"])
    _check_timed_effect(fields[":effect"])


def check_domain(text: str) -> None:
    tree = _parse(_tokenize(text))
    if not isinstance(tree, list) or not tree or tree[0] != "define":
        raise PddlSyntaxError("domain must be a (define ...) form")
    if len(tree) < 2 or not isinstance(tree[1], list) or tree[1][:1] != ["domain"]:
        raise PddlSyntaxError("missing (domain <name>)")
    _check_name(tree[1][1], "domain name")
    sections = _sections(tree[2:])
    for reqs in sections.get(":requirements", []):
        for r in reqs[1:]:
            if r not in KNOWN_REQUIREMENTS:
                raise PddlSyntaxError(f"unknown requirement {r!r}")
    for types in sections.get(":types", []):
        _check_typed_list(types[1:], "types", var=False)
    for consts in sections.get(":constants", []):
        _check_typed_list(consts[1:], "constants", var=False)
    for preds in sections.get(":predicates", []):
        for p in preds[1:]:
            if not isinstance(p, list) or not p:
                raise PddlSyntaxError(f"bad predicate declaration: {p!r}")
            _check_name(p[0], "predicate name")
            _check_typed_list(p[1:], f"predicate {p[0]}", var=True)
    for funcs in sections.get(":functions", []):
        for f in funcs[1:]:
            if not isinstance(f, list) or not f:
                raise PddlSyntaxError(f"bad function declaration: {f!r}")
            _check_name(f[0], "function name")
            _check_typed_list(f[1:], f"function {f[0]}", var=True)
    actions = sections.get(":durative-action", [])
    for a in actions:
        _check_durative_action(a)
    known = {":requirements", ":types", ":constants", ":predicates", ":functions",
             ":durative-action", ":action"}
    for key in sections:
        if key not in known:
            raise PddlSyntaxError(f"unknown domain section {key!r}")


def _check_init_element(form: Any) -> None:
    if not isinstance(form, list) or not form:
        raise PddlSyntaxError(f"bad init element: {form!r}")
    if form[0] == "at" and len(form) == 3 and _is_number(form[1]):
        # timed initial literal
        lit = form[2]
        if isinstance(lit, list) and lit and lit[0] == "not":
            if len(lit) != 2:
                raise PddlSyntaxError("not takes one literal")
            _check_atom(lit[1])
        else:
            _check_atom(lit)
        return
    if form[0] == "=" and len(form) == 3:
        _check_atom(form[1])
        if not _is_number(form[2]):
            raise PddlSyntaxError(f"fluent init must be numeric: {form!r}")
        return
    if form[0] == "not":
        raise PddlSyntaxError("negative literals are not allowed in :init")
    _check_atom(form)
    for arg in form[1:]:
        if isinstance(arg, str) and _VAR.match(arg):
            raise PddlSyntaxError(f"variable in :init: {arg!r}")


def check_problem(text: str) -> None:
    tree = _parse(_tokenize(text))
    if not isinstance(tree, list) or not tree or tree[0] != "define":
        raise PddlSyntaxError("problem must be a (define ...) form")
    if len(tree) < 2 or not isinstance(tree[1], list) or tree[1][:1] != ["problem"]:
        raise PddlSyntaxError("missing (problem <name>)")
    _check_name(tree[1][1], "problem name")
    sections = _sections(tree[2:])
    if ":domain" not in sections:
        raise PddlSyntaxError("problem missing (:domain ...)")
    _check_name(sections[":domain"][0][1], "domain reference")
    for objs in sections.get(":objects", []):
        _check_typed_list(objs[1:], "objects", var=False)
    if ":init" not in sections:
        raise PddlSyntaxError("problem missing (:init ...)")
    for init in sections[":init"]:
        for el in init[1:]:
            _check_init_element(el)
    if ":goal" not in sections:
        raise PddlSyntaxError("problem missing (:goal ...)")
    for goal in sections[":goal"]:
        if len(goal) != 2:
            raise PddlSyntaxError("goal takes one condition")
        _check_gd(goal[1])
    for metric in sections.get(":metric", []):
        if len(metric) != 3 or metric[1] not in ("minimize", "maximize"):
            raise PddlSyntaxError(f"bad metric: {metric!r}")
        if isinstance(metric[2], list) and metric[2] and metric[2][0] == "total-time":
            pass
        else:
            _check_fexp(metric[2])
    known = {":domain", ":objects", ":init", ":goal", ":metric", ":requirements"}
    for key in sections:
        if key not in known:
            raise PddlSyntaxError(f"unknown problem section {key!r}")
