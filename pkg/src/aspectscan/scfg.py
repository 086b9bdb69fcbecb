"""Symbolic control-flow graphs: one vertex per statement."""

from __future__ import annotations

from collections import deque

from .errors import NotBranchingError, ScfgError, UnknownStateError
from .frontend import (BRANCH_LABELS, ENDING_LABEL, ENDING_LABELS, ExprUsage, Label,
                       ProcedureIR, StatementIR)


class SymbolicState:
    """A statement vertex. Identity is the (point, label) pair."""

    __slots__ = ("point", "loc", "label", "exprs", "end_loc", "enter_loop", "annotation")

    def __init__(self, point: int, loc: int, label: Label, exprs=(), end_loc: int | None = None):
        self.point = point
        self.loc = loc
        self.label = label
        self.exprs = tuple(exprs)
        self.end_loc = end_loc
        self.enter_loop = False
        self.annotation: dict = {}

    @property
    def key(self) -> tuple:
        return (self.point, self.label.value)

    def __eq__(self, other):
        return isinstance(other, SymbolicState) and self.key == other.key

    def __hash__(self):
        return hash(self.key)

    def __lt__(self, other):
        return _order(self) < _order(other)

    def __deepcopy__(self, memo):
        # states are graph vertices, never values to duplicate
        return self

    def __repr__(self):
        return f"<{self.label.value}@{self.point} line {self.loc}>"

    def location(self) -> str:
        if self.end_loc is None:
            return str(self.loc)
        return f"{self.loc}-{self.end_loc}"


def _order(state: SymbolicState) -> tuple:
    # an ending state sorts before other states sharing its point
    return (state.point, 0 if state.label in ENDING_LABELS else 1, state.label.value)


class Scfg:
    def __init__(self, qualifier: str, start: SymbolicState, end: SymbolicState):
        self.qualifier = qualifier
        self.start = start
        self.end = end
        self._states: dict = {}
        self._succ: dict = {}
        self._endings: dict = {}

    # construction helpers
    def _add(self, state: SymbolicState) -> SymbolicState:
        if state.key in self._states:
            raise ScfgError(f"duplicate state {state!r}")
        self._states[state.key] = state
        self._succ[state.key] = set()
        return state

    def _edge(self, a: SymbolicState, b: SymbolicState) -> None:
        self._succ[a.key].add(b.key)

    # queries
    @property
    def vertices(self) -> list:
        return sorted(self._states.values())

    @property
    def edges(self) -> list:
        out = []
        for key, succ in self._succ.items():
            a = self._states[key]
            out.extend((a, self._states[k]) for k in succ)
        return sorted(out)

    def state(self, point: int, label) -> SymbolicState:
        key = (point, Label(label).value)
        if key not in self._states:
            raise UnknownStateError(f"no state {label}@{point} in {self.qualifier}")
        return self._states[key]

    def __contains__(self, state) -> bool:
        return isinstance(state, SymbolicState) and state.key in self._states

    def __len__(self) -> int:
        return len(self._states)

    def children(self, state: SymbolicState) -> list:
        """Successors of ``state``, in ascending program-point order."""
        if state not in self:
            raise UnknownStateError(f"unknown state {state!r}")
        return sorted(self._states[k] for k in self._succ[state.key])

    def ending_state(self, state: SymbolicState) -> SymbolicState:
        if state.label not in BRANCH_LABELS:
            raise NotBranchingError(f"{state.label.value} has no ending state")
        return self.state(state.point, ENDING_LABEL[state.label])

    def reset(self) -> None:
        """Clear annotations and loop flags left by a previous analysis."""
        for s in self._states.values():
            s.annotation = {}
            s.enter_loop = False

    def dump(self) -> str:
        lines = [f"# scfg {self.qualifier}"]
        for s in self.vertices:
            exprs = ";".join(e.render() for e in s.exprs)
            lines.append(f"{s.point}|{s.label.value}|{s.location()}|{exprs}")
        lines.append("edges:")
        for a, b in self.edges:
            lines.append(f"{a.point}:{a.label.value} -> {b.point}:{b.label.value}")
        return "\n".join(lines) + "\n"

    def to_dot(self) -> str:
        def node_id(s):
            return f'"{s.point}:{s.label.value}"'

        lines = [f'digraph "{self.qualifier}" {{', "  node [shape=box];"]
        for s in self.vertices:
            lines.append(f'  {node_id(s)} [label="{s.label.value} {s.point}\\nline {s.location()}"];')
        for a, b in self.edges:
            lines.append(f"  {node_id(a)} -> {node_id(b)};")
        lines.append("}")
        return "\n".join(lines) + "\n"


class _Builder:
    def __init__(self, proc: ProcedureIR):
        n = proc.size
        if proc.is_container:
            enter, leave = Label.ENTER_CONTAINER, Label.EXIT_CONTAINER
        else:
            enter, leave = Label.ENTER_PROCEDURE, Label.EXIT_PROCEDURE
        start = SymbolicState(0, proc.line_start, enter, [ExprUsage(proc.inputs)])
        end = SymbolicState(n + 1, proc.line_end, leave, [])
        self.g = Scfg(proc.qualifier, start, end)
        self.g._add(start)
        self.g._add(end)
        self.states: dict = {}
        for ir in proc.walk():
            s = self.g._add(SymbolicState(ir.point, ir.loc, ir.label, ir.exprs, ir.end_loc))
            self.states[ir.point] = s
            if ir.label in BRANCH_LABELS:
                ending = SymbolicState(ir.point, ir.end_loc, ENDING_LABEL[ir.label], [])
                self.g._endings[s.key] = self.g._add(ending)
        # innermost enclosing finally, for return/raise redirection
        self.finally_stack: list = []

    def s(self, ir: StatementIR) -> SymbolicState:
        return self.states[ir.point]

    def end_of(self, ir: StatementIR) -> SymbolicState:
        return self.g._endings[self.s(ir).key]

    def edge(self, a, b) -> None:
        self.g._edge(a, b)

    def seq(self, stmts, loop, nxt) -> None:
        for i, ir in enumerate(stmts):
            follow = self.s(stmts[i + 1]) if i + 1 < len(stmts) else nxt
            self.stmt(ir, loop, follow)

    def block_into(self, head, stmts, loop, nxt) -> None:
        if stmts:
            self.edge(head, self.s(stmts[0]))
            self.seq(stmts, loop, nxt)
        else:
            self.edge(head, nxt)

    def stmt(self, ir: StatementIR, loop, nxt) -> None:
        s = self.s(ir)
        label = ir.label
        if label == Label.IF:
            end = self.end_of(ir)
            self.block_into(s, ir.body, loop, end)
            if ir.orelse:
                self.block_into(s, ir.orelse, loop, end)
            else:
                self.edge(s, end)
            self.edge(end, nxt)
        elif label == Label.ELSE:
            end = self.end_of(ir)
            self.block_into(s, ir.body, loop, end)
            self.edge(s, end)
            self.edge(end, nxt)
        elif label == Label.WITH:
            end = self.end_of(ir)
            self.block_into(s, ir.body, loop, end)
            self.edge(end, nxt)
        elif label == Label.MATCH:
            end = self.end_of(ir)
            for case in ir.cases:
                c = self.s(case)
                self.edge(s, c)
                self.block_into(c, case.body, loop, end)
            self.edge(s, end)
            self.edge(end, nxt)
        elif label == Label.TRY:
            self.try_stmt(ir, loop, nxt)
        elif label in (Label.WHILE, Label.FOR):
            end = self.end_of(ir)
            self.block_into(s, ir.body, s, s)
            self.edge(s, end)
            if ir.else_clause is not None:
                self.edge(end, self.s(ir.else_clause))
                self.stmt(ir.else_clause, loop, nxt)
            else:
                self.edge(end, nxt)
        elif label == Label.CONTINUE:
            if loop is self.g.start:
                raise ScfgError(f"continue outside a loop at line {ir.loc}")
            self.edge(s, loop)
        elif label == Label.BREAK:
            if loop is self.g.start:
                raise ScfgError(f"break outside a loop at line {ir.loc}")
            self.edge(s, self.g._endings[loop.key])
        elif label in (Label.RETURN, Label.RAISE):
            target = self.finally_stack[-1] if self.finally_stack else self.g.end
            self.edge(s, target)
        else:
            self.edge(s, nxt)

    def try_stmt(self, ir: StatementIR, loop, nxt) -> None:
        s = self.s(ir)
        end = self.end_of(ir)
        final = self.s(ir.final) if ir.final is not None else None
        end_except = final if final is not None else end
        if final is not None:
            self.finally_stack.append(final)
        for handler in ir.handlers:
            h = self.s(handler)
            self.edge(s, h)
            self.block_into(h, handler.body, loop, end_except)
        body = list(ir.body)
        if ir.else_clause is not None:
            body.append(ir.else_clause)
        self.block_into(s, body, loop, end_except)
        if final is not None:
            self.finally_stack.pop()
            self.block_into(final, ir.final.body, loop, end)
        self.edge(end, nxt)

    def prune(self) -> None:
        g = self.g
        seen = {g.start.key}
        queue = deque([g.start.key])
        while queue:
            key = queue.popleft()
            for k in g._succ[key]:
                if k not in seen:
                    seen.add(k)
                    queue.append(k)
        for key in list(g._states):
            if key not in seen:
                del g._states[key]
                del g._succ[key]
        for key in list(g._endings):
            if key not in seen or g._endings[key].key not in seen:
                del g._endings[key]


def build_scfg(proc: ProcedureIR) -> Scfg:
    b = _Builder(proc)
    g = b.g
    if proc.statements:
        g._edge(g.start, b.s(proc.statements[0]))
        b.seq(proc.statements, g.start, g.end)
    else:
        g._edge(g.start, g.end)
    b.prune()
    for key, succ in g._succ.items():
        state = g._states[key]
        if len(succ) > 1 and state.label not in BRANCH_LABELS:
            raise ScfgError(f"{state!r} has {len(succ)} successors but is not a branching state")
    return g


def edges_rec(stmts, loop: SymbolicState, nxt: SymbolicState, proc: ProcedureIR) -> set:
    """Edge set (as key pairs) that the inductive rules give for ``stmts`` alone."""
    b = _Builder(proc)
    loop = b.g._states.get(loop.key, loop)
    nxt = b.g._states.get(nxt.key, nxt)
    b.seq(list(stmts), loop, nxt)
    return {(k, s) for k, succ in b.g._succ.items() for s in succ}
