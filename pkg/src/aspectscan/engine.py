"""Traversal engine: ordering, branch-duplicating visits, loop fixpoints, alarms."""

from __future__ import annotations

import copy
from collections import Counter
from dataclasses import dataclass, field

from .advice import AdviceRuntime
from .errors import (AdviceError, CyclicDependencyError, DivergenceError,
                     MergeConflictError, UnknownStateError)
from .frontend import LOOP_LABELS, parse_procedure
from .sable import SableProgram, SourceAnnotation, TraversalDef, traversal_dependencies
from .scfg import Scfg, SymbolicState, build_scfg

CONFLICT_MESSAGE = ("Conflict of values: for non-Boolean, non-set values, values for both "
                    "traversal maps are expected to be the same.")
DEFAULT_MAX_LOOP_ITERS = 1000


# -- value helpers -----------------------------------------------------------


def deep_equal(a, b) -> bool:
    """Structural equality that also compares types (``True`` differs from ``1``)."""
    if type(a) is not type(b):
        return False
    if isinstance(a, dict):
        return a.keys() == b.keys() and all(deep_equal(a[k], b[k]) for k in a)
    if isinstance(a, (list, tuple)):
        return len(a) == len(b) and all(deep_equal(x, y) for x, y in zip(a, b))
    if isinstance(a, (set, frozenset)):
        if len(a) != len(b):
            return False
        rest = list(b)
        for x in a:
            for i, y in enumerate(rest):
                if deep_equal(x, y):
                    del rest[i]
                    break
            else:
                return False
        return True
    return a == b


def is_fixpoint(old: dict, travmap: dict) -> bool:
    return all(name in old and deep_equal(old[name], value) for name, value in travmap.items())


def merge_default(m1: dict, m2: dict) -> dict:
    out = {}
    for name in m1:
        if name not in m2:
            out[name] = copy.deepcopy(m1[name])
            continue
        v1 = copy.deepcopy(m1[name])
        v2 = copy.deepcopy(m2[name])
        if type(v1) is bool and type(v2) is bool:
            out[name] = v1 or v2
        elif type(v1) is set and type(v2) is set:
            out[name] = v1 | v2
        elif deep_equal(v1, v2):
            out[name] = v1
        else:
            raise MergeConflictError(CONFLICT_MESSAGE)
    for name in m2:
        if name not in m1:
            out[name] = copy.deepcopy(m2[name])
    return out


def order_traversals(names, deps) -> list:
    """Dependency order: repeatedly take every traversal whose imports are done."""
    done: list = []
    remaining = set(names)
    while remaining:
        valid = sorted(t for t in remaining if set(deps.get(t, ())) <= set(done))
        if not valid:
            raise CyclicDependencyError(remaining)
        done.extend(valid)
        remaining -= set(valid)
    return done


def program_order(program: SableProgram) -> list:
    deps = {t.name: traversal_dependencies(t) for t in program.traversals}
    return order_traversals(deps.keys(), deps)


# -- alarms ------------------------------------------------------------------


@dataclass(frozen=True)
class Alarm:
    line: int
    step: int
    aspect: str
    value: object
    point: int
    label: str
    traversal: str


class AlarmLedger:
    """Per state, per step, the trigger-matching aspect values."""

    def __init__(self):
        self.entries: dict = {}
        self._states: dict = {}
        self._traversal: dict = {}

    def record(self, state: SymbolicState, step: int, aspect: str, value, traversal: str = "") -> None:
        self._states[state.key] = state
        self.entries.setdefault(state.key, {}).setdefault(step, {})[aspect] = copy.deepcopy(value)
        self._traversal[(step, aspect)] = traversal

    def alarms(self) -> list:
        out = []
        for key, steps in self.entries.items():
            state = self._states[key]
            for step, values in steps.items():
                for aspect, value in values.items():
                    out.append(Alarm(state.loc, step, aspect, value, state.point, state.label.value,
                                     self._traversal.get((step, aspect), "")))
        return sorted(out, key=lambda a: (a.line, a.step, a.aspect))

    def __len__(self) -> int:
        return sum(len(v) for steps in self.entries.values() for v in steps.values())


@dataclass
class StepCounter:
    step: int = 0


# -- one traversal ---------------------------------------------------------------


class TraversalRun:
    """Executes one traversal definition over an SCFG."""

    def __init__(self, scfg: Scfg, trav: TraversalDef, annotation: dict | None,
                 counter: StepCounter, ledger: AlarmLedger, *,
                 max_loop_iters: int = DEFAULT_MAX_LOOP_ITERS):
        self.scfg = scfg
        self.trav = trav
        self.counter = counter
        self.ledger = ledger
        self.max_loop_iters = max_loop_iters
        self.runtime = AdviceRuntime(trav, annotation)
        # how many times each loop body was entered
        self.body_entries: Counter = Counter()

    def run(self) -> dict:
        g = self.scfg
        for s in g.vertices:
            s.enter_loop = s.label in LOOP_LABELS
        travmap = {name: None for name in self.trav.aspects}
        self.visit(g.start, None, travmap)
        end = g.end
        final = {k: copy.deepcopy(v) for k, v in end.annotation.items() if k in self.trav.aspects}
        final = self.weave(end, final)
        self.annotate(end, final)
        return final

    def merge(self, m1: dict, m2: dict) -> dict:
        if self.trav.merge is not None:
            return self.runtime.call_merge(copy.deepcopy(m1), copy.deepcopy(m2))
        return merge_default(m1, m2)

    def annotate(self, state: SymbolicState, travmap: dict) -> None:
        new = dict(state.annotation)
        new.update(copy.deepcopy(travmap))
        state.annotation = new

    def weave(self, state: SymbolicState, travmap: dict) -> dict:
        self.counter.step += 1
        step = self.counter.step
        pointcut = self.trav.pointcuts.get(state.label)
        if pointcut is not None:
            try:
                travmap = self.runtime.exec_pointcut(pointcut, state, travmap)
            except AdviceError as exc:
                raise type(exc)(f"traversal {self.trav.name}, {state.label.value} at line {state.loc} "
                                f"(point {state.point}, step {step}): {exc}") from None
        for name, value in travmap.items():
            if any(deep_equal(value, t) for t in self.trav.triggers.get(name, ())):
                self.ledger.record(state, step, name, value, self.trav.name)
        return travmap

    def visit(self, state: SymbolicState, join: SymbolicState | None, travmap: dict) -> tuple:
        g = self.scfg
        while True:
            if join is not None and state == join:
                return state, travmap
            old = state.annotation
            if state == g.end:
                prior = {k: v for k, v in old.items() if k in self.trav.aspects}
                if prior:
                    try:
                        travmap = self.merge(prior, travmap)
                    except MergeConflictError as exc:
                        raise MergeConflictError(f"{exc} (merging at {state!r})") from None
            else:
                travmap = self.weave(state, travmap)
            self.annotate(state, travmap)
            children = g.children(state)
            if not children:
                return state, travmap
            if len(children) == 1:
                state = children[0]
            elif state.label in LOOP_LABELS:
                state = self.loop_branching(state, old, travmap, children)
            else:
                result = self.cond_branching(state, travmap, children)
                if result is None:
                    return state, travmap
                state, travmap = result

    def loop_branching(self, state, old: dict, travmap: dict, children) -> SymbolicState:
        ending = self.scfg.ending_state(state)
        if is_fixpoint(old, travmap):
            state.enter_loop = True
            return ending
        state.enter_loop = False
        self.body_entries[state.point] += 1
        if self.body_entries[state.point] > self.max_loop_iters:
            raise DivergenceError(
                f"traversal {self.trav.name}: loop at line {state.loc} revisited more than "
                f"{self.max_loop_iters} times without reaching a fixpoint")
        return next(c for c in children if c != ending)

    def cond_branching(self, state, travmap: dict, children):
        """Visit each branch on its own copy; returns the join state and merged map."""
        try:
            ending = self.scfg.ending_state(state)
        except UnknownStateError:
            ending = None       # pruned: no branch falls through
        maps = []
        for child in children:
            last, m = self.visit(child, ending, copy.deepcopy(travmap))
            if ending is not None and last == ending:
                maps.append(m)
        if not maps:
            return None
        merged = maps[0]
        for m in maps[1:]:
            try:
                merged = self.merge(merged, m)
            except MergeConflictError as exc:
                raise MergeConflictError(f"{exc} (merging at {ending!r})") from None
        return ending, merged


# -- whole analysis --------------------------------------------------------------


@dataclass
class AnalysisResult:
    qualifier: str
    annotation_name: str
    definition_name: str
    alarms: list
    order: list
    body_entries: dict = field(default_factory=dict)
    steps: int = 0


def run_program(scfg: Scfg, program: SableProgram, annotation: dict | None, *,
                max_loop_iters: int = DEFAULT_MAX_LOOP_ITERS) -> tuple:
    """Run every traversal in dependency order; returns (ledger, order, loop counts, steps)."""
    scfg.reset()
    counter = StepCounter()
    ledger = AlarmLedger()
    order = program_order(program)
    body_entries = {}
    for name in order:
        run = TraversalRun(scfg, program[name], annotation, counter, ledger,
                           max_loop_iters=max_loop_iters)
        run.run()
        body_entries[name] = dict(run.body_entries)
    return ledger, order, body_entries, counter.step


def analyze(source_text: str, qualifier: str, program: SableProgram,
            annotation: SourceAnnotation | dict | None, *, annotation_name: str = "",
            definition_name: str = "", max_loop_iters: int = DEFAULT_MAX_LOOP_ITERS) -> AnalysisResult:
    proc = parse_procedure(source_text, qualifier)
    scfg = build_scfg(proc)
    if isinstance(annotation, SourceAnnotation):
        entry = annotation.entry_for(qualifier)
    else:
        entry = annotation or {}
    ledger, order, entries, steps = run_program(scfg, program, entry, max_loop_iters=max_loop_iters)
    return AnalysisResult(qualifier, annotation_name, definition_name, ledger.alarms(), order,
                          entries, steps)

