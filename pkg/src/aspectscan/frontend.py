"""Python source frontend: procedures become sequences of labelled statements.

Each statement gets a program point (pre-order, starting at 1), a line,
an optional scope end line and a list of def/use/call usages.
"""

from __future__ import annotations

import ast
import io
import tokenize
from dataclasses import dataclass, field
from enum import Enum

from .errors import ProcedureNotFoundError, SourceSyntaxError, UnsupportedConstructError


class Label(str, Enum):
    ENTER_PROCEDURE = "EnterProcedure"
    EXIT_PROCEDURE = "ExitProcedure"
    ENTER_CONTAINER = "EnterContainer"
    EXIT_CONTAINER = "ExitContainer"
    ASSIGN = "Assign"
    EXP = "Exp"
    IF = "If"
    ELSE = "Else"
    WHILE = "While"
    FOR = "For"
    WITH = "With"
    TRY = "Try"
    EXCEPT = "Except"
    FINALLY = "Finally"
    MATCH = "Match"
    CASE = "Case"
    RETURN = "Return"
    RAISE = "Raise"
    PASS = "Pass"
    BREAK = "Break"
    CONTINUE = "Continue"
    IMPORT = "Import"
    END_IF = "EndIf"
    END_ELSE = "EndElse"
    END_WHILE = "EndWhile"
    END_FOR = "EndFor"
    END_WITH = "EndWith"
    END_TRY = "EndTry"
    END_MATCH = "EndMatch"

    def __str__(self) -> str:
        return self.value


BRANCH_LABELS = frozenset(
    {Label.IF, Label.TRY, Label.ELSE, Label.MATCH, Label.WITH, Label.WHILE, Label.FOR}
)
LOOP_LABELS = frozenset({Label.WHILE, Label.FOR})
ENDING_LABEL = {lab: Label("End" + lab.value) for lab in BRANCH_LABELS}
ENDING_LABELS = frozenset(ENDING_LABEL.values())


@dataclass(frozen=True)
class ExprUsage:
    defs: frozenset = frozenset()
    uses: frozenset = frozenset()
    calls: frozenset = frozenset()

    def symbols(self, kind: str) -> frozenset:
        if kind == "def":
            return self.defs
        if kind == "use":
            return self.uses
        if kind == "call":
            return self.calls
        if kind == "all":
            return self.defs | self.uses | self.calls
        raise ValueError(f"unknown symbol label {kind!r}")

    def render(self) -> str:
        return "/".join(",".join(sorted(s)) for s in (self.defs, self.uses, self.calls))


@dataclass(frozen=True)
class StatementIR:
    point: int
    loc: int
    label: Label
    exprs: tuple = ()
    end_loc: int | None = None
    body: tuple = ()
    orelse: tuple = ()        # else branch of an if (no Else state)
    handlers: tuple = ()      # Except statements of a try
    else_clause: "StatementIR | None" = None   # Else state of a loop or try
    final: "StatementIR | None" = None         # Finally state of a try
    cases: tuple = ()         # Case statements of a match

    def walk(self):
        yield self
        for block in (self.body, self.orelse, self.handlers, self.cases):
            for s in block:
                yield from s.walk()
        for s in (self.else_clause, self.final):
            if s is not None:
                yield from s.walk()


@dataclass(frozen=True)
class ProcedureIR:
    qualifier: str
    name: str
    inputs: frozenset
    line_start: int
    line_end: int
    statements: tuple
    is_container: bool = False

    def walk(self):
        for s in self.statements:
            yield from s.walk()

    @property
    def size(self) -> int:
        return sum(1 for _ in self.walk())


# -- usage extraction ------------------------------------------------------


def _dotted(node: ast.AST) -> str | None:
    parts = []
    while isinstance(node, ast.Attribute):
        parts.append(node.attr)
        node = node.value
    if not isinstance(node, ast.Name):
        return None
    parts.append(node.id)
    return ".".join(reversed(parts))


@dataclass
class _Usage:
    source: str | None
    defs: set = field(default_factory=set)
    uses: set = field(default_factory=set)
    calls: set = field(default_factory=set)

    def freeze(self) -> ExprUsage:
        return ExprUsage(frozenset(self.defs), frozenset(self.uses - self.defs), frozenset(self.calls))

    def literal(self, node: ast.Constant) -> str:
        text = ast.get_source_segment(self.source, node) if self.source else None
        return text if text is not None else repr(node.value)

    def load(self, node: ast.AST | None) -> None:
        if node is None:
            return
        if isinstance(node, ast.Name):
            self.uses.add(node.id)
        elif isinstance(node, ast.Constant):
            self.uses.add(self.literal(node))
        elif isinstance(node, ast.Attribute):
            dotted = _dotted(node)
            if dotted is None:
                self.load(node.value)
            else:
                self._load_chain(dotted)
        elif isinstance(node, ast.Call):
            self._call(node)
        elif isinstance(node, ast.NamedExpr):
            self.store(node.target)
            self.load(node.value)
        elif isinstance(node, ast.Lambda):
            self._arguments(node.args)
            self.load(node.body)
        elif isinstance(node, (ast.ListComp, ast.SetComp, ast.GeneratorExp)):
            self.load(node.elt)
            self._generators(node.generators)
        elif isinstance(node, ast.DictComp):
            self.load(node.key)
            self.load(node.value)
            self._generators(node.generators)
        elif isinstance(node, ast.JoinedStr):
            for part in node.values:
                if isinstance(part, ast.FormattedValue):
                    self.load(part.value)
                    self.load(part.format_spec)
        else:
            # conservative fallback: every nested name counts as a use
            for child in ast.iter_child_nodes(node):
                if isinstance(child, (ast.expr_context, ast.operator, ast.boolop,
                                      ast.cmpop, ast.unaryop)):
                    continue
                self.load(child)

    def _load_chain(self, dotted: str) -> None:
        pieces = dotted.split(".")
        self.uses.add(pieces[0])
        self.uses.add(dotted)

    def _call(self, node: ast.Call) -> None:
        func = node.func
        if isinstance(func, ast.Name):
            self.calls.add(func.id)
        elif isinstance(func, ast.Attribute):
            dotted = _dotted(func)
            self.calls.add("." + func.attr)
            if dotted is not None:
                self.calls.add(dotted)
                receiver = dotted.rsplit(".", 1)[0]
                pieces = receiver.split(".")
                for i in range(1, len(pieces) + 1):
                    self.uses.add(".".join(pieces[:i]))
            else:
                self.load(func.value)
        else:
            self.load(func)
        for arg in node.args:
            self.load(arg)
        for kw in node.keywords:
            self.load(kw.value)

    def _arguments(self, args: ast.arguments) -> None:
        for default in list(args.defaults) + [d for d in args.kw_defaults if d is not None]:
            self.load(default)

    def _generators(self, generators) -> None:
        for gen in generators:
            self.load(gen.iter)
            for cond in gen.ifs:
                self.load(cond)

    def store(self, node: ast.AST | None) -> None:
        if node is None:
            return
        if isinstance(node, ast.Name):
            self.defs.add(node.id)
        elif isinstance(node, (ast.Tuple, ast.List)):
            for elt in node.elts:
                self.store(elt)
        elif isinstance(node, ast.Starred):
            self.store(node.value)
        elif isinstance(node, ast.Attribute):
            dotted = _dotted(node)
            if dotted is None:
                self.load(node.value)
            else:
                self.defs.add(dotted)
        elif isinstance(node, ast.Subscript):
            base = _dotted(node.value)
            if base is None:
                self.load(node.value)
            else:
                self.defs.add(base)
            self.load(node.slice)
        else:
            self.load(node)

    def pattern(self, node: ast.AST) -> None:
        if isinstance(node, ast.MatchAs):
            if node.name:
                self.defs.add(node.name)
            if node.pattern is not None:
                self.pattern(node.pattern)
        elif isinstance(node, ast.MatchStar):
            if node.name:
                self.defs.add(node.name)
        elif isinstance(node, ast.MatchValue):
            self.load(node.value)
        elif isinstance(node, ast.MatchSingleton):
            self.uses.add(repr(node.value))
        elif isinstance(node, ast.MatchSequence):
            for p in node.patterns:
                self.pattern(p)
        elif isinstance(node, ast.MatchMapping):
            for k in node.keys:
                self.load(k)
            for p in node.patterns:
                self.pattern(p)
            if node.rest:
                self.defs.add(node.rest)
        elif isinstance(node, ast.MatchClass):
            self.load(node.cls)
            for p in list(node.patterns) + list(node.kwd_patterns):
                self.pattern(p)
        elif isinstance(node, ast.MatchOr):
            for p in node.patterns:
                self.pattern(p)


def extract_usage(node: ast.AST | None, source: str | None = None, *, store: bool = False) -> ExprUsage:
    """Def/use/call symbols of one expression node.

    With ``store=True`` the node is read as an assignment target.
    """
    usage = _Usage(source)
    if store:
        usage.store(node)
    else:
        usage.load(node)
    return usage.freeze()


def _combined(source, loads=(), stores=()) -> ExprUsage:
    usage = _Usage(source)
    for node in stores:
        usage.store(node)
    for node in loads:
        usage.load(node)
    return usage.freeze()


_FUNCTION_NODES = (ast.FunctionDef, ast.AsyncFunctionDef)
_DEF_NODES = _FUNCTION_NODES + (ast.ClassDef,)


def statement_expressions(node: ast.stmt, source: str | None = None) -> list:
    """Ordered usages for one statement node (children are not included)."""
    if isinstance(node, ast.Assign):
        return [_combined(source, stores=node.targets), extract_usage(node.value, source)]
    if isinstance(node, ast.AnnAssign):
        return [extract_usage(node.target, source, store=True), extract_usage(node.value, source)]
    if isinstance(node, ast.AugAssign):
        rhs = _Usage(source)
        rhs.load(node.value)
        target = _Usage(source)
        target.store(node.target)
        rhs.uses |= target.defs | target.uses
        return [ExprUsage(frozenset(target.defs)), ExprUsage(uses=frozenset(rhs.uses), calls=frozenset(rhs.calls))]
    if isinstance(node, _DEF_NODES):
        extra = list(node.decorator_list)
        if isinstance(node, ast.ClassDef):
            extra += list(node.bases) + [kw.value for kw in node.keywords]
        else:
            extra += list(node.args.defaults) + [d for d in node.args.kw_defaults if d is not None]
        return [ExprUsage(frozenset({node.name})), _combined(source, loads=extra)]
    if isinstance(node, ast.Expr):
        return [extract_usage(node.value, source)]
    if isinstance(node, ast.Delete):
        return [_combined(source, loads=node.targets)]
    if isinstance(node, ast.Assert):
        return [_combined(source, loads=[node.test, node.msg])]
    if isinstance(node, (ast.If, ast.While)):
        return [extract_usage(node.test, source)]
    if isinstance(node, (ast.For, ast.AsyncFor)):
        return [extract_usage(node.target, source, store=True), extract_usage(node.iter, source)]
    if isinstance(node, (ast.With, ast.AsyncWith)):
        return [_combined(source, loads=[i.context_expr for i in node.items],
                          stores=[i.optional_vars for i in node.items])]
    if isinstance(node, ast.Return):
        return [extract_usage(node.value, source)]
    if isinstance(node, ast.Raise):
        return [_combined(source, loads=[node.exc, node.cause])]
    if isinstance(node, ast.ExceptHandler):
        usage = _Usage(source)
        usage.load(node.type)
        if node.name:
            usage.defs.add(node.name)
        return [usage.freeze()]
    if isinstance(node, ast.Match):
        return [extract_usage(node.subject, source)]
    if isinstance(node, ast.match_case):
        usage = _Usage(source)
        usage.pattern(node.pattern)
        usage.load(node.guard)
        return [usage.freeze()]
    if isinstance(node, (ast.Import, ast.ImportFrom)):
        names = {a.asname or a.name.split(".")[0] for a in node.names}
        return [ExprUsage(frozenset(names))]
    if isinstance(node, (ast.Pass, ast.Break, ast.Continue, ast.Global, ast.Nonlocal, ast.Try)):
        return []
    if _TRY_STAR is not None and isinstance(node, _TRY_STAR):
        return []
    raise UnsupportedConstructError(f"unsupported statement {type(node).__name__} at line {getattr(node, 'lineno', '?')}")


_TRY_STAR = getattr(ast, "TryStar", None)
_TYPE_ALIAS = getattr(ast, "TypeAlias", None)

_SIMPLE_LABELS = {
    ast.Assign: Label.ASSIGN,
    ast.AnnAssign: Label.ASSIGN,
    ast.AugAssign: Label.ASSIGN,
    ast.FunctionDef: Label.ASSIGN,
    ast.AsyncFunctionDef: Label.ASSIGN,
    ast.ClassDef: Label.ASSIGN,
    ast.Expr: Label.EXP,
    ast.Delete: Label.EXP,
    ast.Assert: Label.EXP,
    ast.Return: Label.RETURN,
    ast.Raise: Label.RAISE,
    ast.Pass: Label.PASS,
    ast.Global: Label.PASS,
    ast.Nonlocal: Label.PASS,
    ast.Break: Label.BREAK,
    ast.Continue: Label.CONTINUE,
    ast.Import: Label.IMPORT,
    ast.ImportFrom: Label.IMPORT,
}


# -- statement conversion --------------------------------------------------


def _keyword_positions(source: str) -> dict:
    found = {"else": [], "finally": []}
    try:
        for tok in tokenize.generate_tokens(io.StringIO(source).readline):
            if tok.type == tokenize.NAME and tok.string in found:
                found[tok.string].append(tok.start)
    except (tokenize.TokenError, IndentationError):
        pass
    return found


def _end_pos(node: ast.AST) -> tuple:
    return (node.end_lineno, node.end_col_offset)


class _Converter:
    def __init__(self, source: str):
        self.source = source
        self.next_point = 1
        self.keywords = _keyword_positions(source)

    def take(self) -> int:
        point = self.next_point
        self.next_point += 1
        return point

    def keyword_line(self, word: str, after, before) -> int:
        """Line of the last ``word`` keyword between two source positions."""
        best = None
        for pos in self.keywords[word]:
            if after < pos < before:
                best = pos
        return best[0] if best else before[0]

    def block(self, nodes) -> tuple:
        return tuple(self.stmt(n) for n in nodes)

    def stmt(self, node: ast.stmt) -> StatementIR:
        point = self.take()
        src = self.source
        loc = node.lineno
        exprs = tuple(statement_expressions(node, src))
        kind = type(node)
        if kind in _SIMPLE_LABELS or (_TYPE_ALIAS is not None and kind is _TYPE_ALIAS):
            if _TYPE_ALIAS is not None and kind is _TYPE_ALIAS:
                exprs = (extract_usage(node.name, src, store=True), extract_usage(node.value, src))
            return StatementIR(point, loc, _SIMPLE_LABELS.get(kind, Label.ASSIGN), exprs)
        if isinstance(node, ast.If):
            body = self.block(node.body)
            orelse = self.block(node.orelse)
            return StatementIR(point, loc, Label.IF, exprs, node.end_lineno, body=body, orelse=orelse)
        if isinstance(node, (ast.While, ast.For, ast.AsyncFor)):
            label = Label.WHILE if isinstance(node, ast.While) else Label.FOR
            body = self.block(node.body)
            else_clause = self.else_state(node.orelse, node.body[-1])
            return StatementIR(point, loc, label, exprs, node.end_lineno, body=body, else_clause=else_clause)
        if isinstance(node, (ast.With, ast.AsyncWith)):
            return StatementIR(point, loc, Label.WITH, exprs, node.end_lineno, body=self.block(node.body))
        if isinstance(node, ast.Try) or (_TRY_STAR is not None and isinstance(node, _TRY_STAR)):
            return self.try_stmt(node, point)
        if isinstance(node, ast.Match):
            cases = []
            for case in node.cases:
                case_point = self.take()
                cases.append(StatementIR(
                    case_point, case.pattern.lineno, Label.CASE,
                    tuple(statement_expressions(case, src)), body=self.block(case.body)))
            return StatementIR(point, loc, Label.MATCH, exprs, node.end_lineno, cases=tuple(cases))
        raise UnsupportedConstructError(f"unsupported statement {kind.__name__} at line {loc}")

    def else_state(self, nodes, previous: ast.AST) -> StatementIR | None:
        if not nodes:
            return None
        point = self.take()
        line = self.keyword_line("else", _end_pos(previous), (nodes[0].lineno, nodes[0].col_offset))
        body = self.block(nodes)
        return StatementIR(point, line, Label.ELSE, (), nodes[-1].end_lineno, body=body)

    def try_stmt(self, node, point: int) -> StatementIR:
        body = self.block(node.body)
        handlers = []
        for h in node.handlers:
            h_point = self.take()
            handlers.append(StatementIR(
                h_point, h.lineno, Label.EXCEPT,
                tuple(statement_expressions(h, self.source)), body=self.block(h.body)))
        previous = node.handlers[-1] if node.handlers else node.body[-1]
        else_clause = self.else_state(node.orelse, previous)
        final = None
        if node.finalbody:
            if node.orelse:
                previous = node.orelse[-1]
            f_point = self.take()
            first = node.finalbody[0]
            line = self.keyword_line("finally", _end_pos(previous), (first.lineno, first.col_offset))
            final = StatementIR(f_point, line, Label.FINALLY, (), body=self.block(node.finalbody))
        return StatementIR(point, node.lineno, Label.TRY, (), node.end_lineno, body=body,
                           handlers=tuple(handlers), else_clause=else_clause, final=final)


# -- procedure lookup --------------------------------------------------------


def _definitions(tree: ast.Module):
    """Yield (dotted name, node) for every def/class, pre-order."""
    stack = [("", n) for n in reversed(tree.body)]
    while stack:
        prefix, node = stack.pop()
        if isinstance(node, _DEF_NODES):
            name = f"{prefix}{node.name}"
            yield name, node
            inner = [(name + ".", n) for n in node.body]
        else:
            inner = [(prefix, n) for n in ast.iter_child_nodes(node) if isinstance(n, ast.stmt)]
        stack.extend(reversed(inner))


def split_qualifier(qualifier: str) -> tuple:
    if ":" in qualifier:
        path, name = qualifier.rsplit(":", 1)
        return path, name
    return "", qualifier


def parse_source(source_text: str) -> ast.Module:
    try:
        return ast.parse(source_text)
    except SyntaxError as exc:
        raise SourceSyntaxError(exc.msg, exc.lineno, exc.offset) from None


def list_procedures(source_text: str) -> list:
    return [name for name, _ in _definitions(parse_source(source_text))]


def parse_procedure(source_text: str, qualifier: str) -> ProcedureIR:
    """IR of the procedure or class named by ``qualifier`` (``file:Name`` or ``file:A.b``)."""
    tree = parse_source(source_text)
    _, name = split_qualifier(qualifier)
    if not name:
        raise ProcedureNotFoundError(f"empty procedure name in {qualifier!r}")
    defs = list(_definitions(tree))
    target = next((n for full, n in defs if full == name), None)
    if target is None and "." not in name:
        target = next((n for full, n in defs if full.rsplit(".", 1)[-1] == name), None)
    if target is None:
        raise ProcedureNotFoundError(f"procedure {name!r} not found for qualifier {qualifier!r}")
    converter = _Converter(source_text)
    statements = converter.block(target.body)
    is_container = isinstance(target, ast.ClassDef)
    if is_container:
        inputs = frozenset()
    else:
        a = target.args
        params = list(a.posonlyargs) + list(a.args) + list(a.kwonlyargs)
        params += [p for p in (a.vararg, a.kwarg) if p is not None]
        inputs = frozenset(p.arg for p in params)
    return ProcedureIR(qualifier, target.name, inputs, target.lineno, target.end_lineno,
                       statements, is_container)
