"""Parser and validator for ``.sable`` static-aspect definition files.

A file holds one or more ``traversal NAME:`` blocks. Inside a traversal,
declarations are one line each, while ``utility``, ``pointcut`` and
``mergeAspects`` open an indented block of advice code written in a
small Python subset (see :mod:`aspectscan.advice`).
"""

from __future__ import annotations

import ast
import json
import re
import textwrap
from dataclasses import dataclass, field

from .errors import AnnotationFormatError, SableSyntaxError, SableValidationError
from .frontend import Label

ASPECT_TYPES = {
    "bool": bool,
    "int": int,
    "str": str,
    "string": str,
    "set": set,
    "list": list,
    "dict": dict,
    "map": dict,
}
TYPE_NAMES = {bool: "bool", int: "int", str: "str", set: "set", list: "list", dict: "dict"}

PRIMITIVES = frozenset({"getExprSymbs", "getDescrSymbs", "getAspect", "enterLoop", "currentPoint"})
BUILTINS = frozenset({"len", "set", "deepcopy", "type", "bool", "int", "str", "list", "dict",
                      "ValueError"})


@dataclass(frozen=True)
class AdviceFunction:
    name: str
    params: tuple
    body: tuple = field(compare=False, repr=False)
    code: str = ""
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Pointcut:
    label: Label
    params: tuple
    body: tuple = field(compare=False, repr=False)
    code: str = ""
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class TraversalDef:
    name: str
    imports: dict
    annotation_var: str | None
    annotation_path: str | None
    aspects: dict           # name -> python type
    triggers: dict          # name -> tuple of literal values
    utilities: dict         # name -> AdviceFunction
    pointcuts: dict         # Label -> Pointcut
    merge: AdviceFunction | None
    line: int = field(default=0, compare=False)

    @property
    def imported_aspects(self) -> frozenset:
        return frozenset(a for names in self.imports.values() for a in names)


@dataclass(frozen=True)
class SableProgram:
    traversals: tuple

    def __getitem__(self, name: str) -> TraversalDef:
        for t in self.traversals:
            if t.name == name:
                return t
        raise KeyError(name)

    @property
    def names(self) -> list:
        return [t.name for t in self.traversals]

    def combined(self, other: "SableProgram") -> "SableProgram":
        merged = SableProgram(self.traversals + other.traversals)
        _check_program(merged)
        return merged


def traversal_dependencies(trav: TraversalDef) -> set:
    return set(trav.imports)


# -- line handling ---------------------------------------------------------


def _strip_comment(text: str) -> str:
    quote = None
    i = 0
    while i < len(text):
        ch = text[i]
        if quote:
            if ch == "\\":
                i += 1
            elif ch == quote:
                quote = None
        elif ch in "'\"":
            quote = ch
        elif ch == "#":
            return text[:i]
        i += 1
    return text


def _normalize(line: str) -> str:
    body = line.lstrip(" \t")
    lead = line[: len(line) - len(body)]
    return lead.replace("\t", "    ") + body.rstrip()


def _indent(line: str) -> int:
    return len(line) - len(line.lstrip(" "))


def _blank(line: str) -> bool:
    return not _strip_comment(line).strip()


_NAME = r"[A-Za-z_][A-Za-z_0-9]*"
_TRAVERSAL = re.compile(rf"^traversal\s+({_NAME})\s*:\s*$")
_IMPORT = re.compile(rf"^fromTraversal\s+({_NAME})\s+importAspect\s+({_NAME}(?:\s*,\s*{_NAME})*)\s*$")
_ANNOT = re.compile(rf"^sourceAnnotation\s+({_NAME})(?:\s+(\S+))?\s*$")
_ASPECT = re.compile(rf"^aspect\s+({_NAME})\s+aspectType\s+({_NAME})\s*$")
_TRIGGER = re.compile(rf"^triggerFrom\s+({_NAME})\s+atValue\s+(.+?)\s*$")
_POINTCUT = re.compile(rf"^pointcut\s*\(\s*({_NAME})\s*((?:,\s*{_NAME}\s*)*)\)\s*:(.*)$")
_MERGE = re.compile(rf"^mergeAspects\s*\(\s*({_NAME})\s*,\s*({_NAME})\s*\)\s*:(.*)$")
_UTILITY = re.compile(r"^utility\s*:(.*)$")


class _Parser:
    def __init__(self, text: str):
        self.lines = [_normalize(l) for l in text.splitlines()]

    def error(self, message: str, index: int, col: int | None = None):
        return SableSyntaxError(message, index + 1, col)

    def parse(self) -> SableProgram:
        travs = []
        i = 0
        n = len(self.lines)
        while i < n:
            line = self.lines[i]
            if _blank(line):
                i += 1
                continue
            if _indent(line):
                raise self.error("unexpected indentation", i, 1)
            m = _TRAVERSAL.match(_strip_comment(line).strip())
            if not m:
                raise self.error("expected 'traversal NAME:'", i, 1)
            j = i + 1
            while j < n and (_blank(self.lines[j]) or _indent(self.lines[j]) > 0):
                j += 1
            travs.append(self.traversal(m.group(1), i, i + 1, j))
            i = j
        program = SableProgram(tuple(travs))
        _check_program(program)
        return program

    def block(self, start: int, stop: int, base: int) -> tuple:
        """Indices [start, k) of the lines indented deeper than ``base``."""
        k = start
        while k < stop and (_blank(self.lines[k]) or _indent(self.lines[k]) > base):
            k += 1
        return k

    def code(self, header_index: int, inline: str, start: int, end: int) -> tuple:
        """Advice source text and the file line where it starts."""
        inline = _strip_comment(inline).strip()
        body_lines = self.lines[start:end]
        has_block = any(not _blank(l) for l in body_lines)
        if inline and has_block:
            raise self.error("block given both inline and indented", header_index)
        if inline:
            if inline.startswith("{") and inline.endswith("}"):
                inline = inline[1:-1].strip()
            return inline, header_index + 1
        while body_lines and _blank(body_lines[-1]):
            body_lines.pop()
        return textwrap.dedent("\n".join(body_lines)), start + 1

    def parse_code(self, text: str, first_line: int, what: str) -> list:
        if not text.strip():
            return []
        try:
            tree = ast.parse(text)
        except SyntaxError as exc:
            line = first_line + (exc.lineno or 1) - 1
            raise SableSyntaxError(f"invalid advice code in {what}: {exc.msg}", line, exc.offset) from None
        ast.increment_lineno(tree, first_line - 1)
        return tree.body

    def traversal(self, name: str, header: int, start: int, stop: int) -> TraversalDef:
        imports: dict = {}
        annotation_var = annotation_path = None
        aspects: dict = {}
        triggers: dict = {}
        utilities: dict = {}
        pointcuts: dict = {}
        merge = None
        i = start
        base = None
        while i < stop:
            raw = self.lines[i]
            if _blank(raw):
                i += 1
                continue
            if base is None:
                base = _indent(raw)
            if _indent(raw) != base:
                raise self.error("inconsistent indentation", i, 1)
            text = _strip_comment(raw).strip()
            where = f"traversal {name}"
            if m := _UTILITY.match(raw.strip()):
                end = self.block(i + 1, stop, base)
                code, first = self.code(i, m.group(1), i + 1, end)
                for node in self.parse_code(code, first, f"utility of {where}"):
                    if isinstance(node, (ast.Import, ast.ImportFrom)):
                        raise SableValidationError(
                            f"{where}: imports are not supported in utility blocks (line {node.lineno})")
                    if not isinstance(node, ast.FunctionDef):
                        raise SableValidationError(
                            f"{where}: utility blocks may only define functions (line {node.lineno})")
                    if node.name in utilities:
                        raise SableValidationError(f"{where}: duplicate utility function {node.name!r}")
                    utilities[node.name] = _function(node)
                i = end
            elif m := _POINTCUT.match(raw.strip()):
                label_name = m.group(1)
                try:
                    label = Label(label_name)
                except ValueError:
                    raise SableValidationError(f"{where}: unknown statement label {label_name!r} in pointcut") from None
                if label in pointcuts:
                    raise SableValidationError(
                        f"{where}: pointcut for label {label_name} is used more than once per traversal")
                params = tuple(p.strip() for p in m.group(2).split(",") if p.strip())
                end = self.block(i + 1, stop, base)
                code, first = self.code(i, m.group(3), i + 1, end)
                body = tuple(self.parse_code(code, first, f"pointcut {label_name} of {where}"))
                pointcuts[label] = Pointcut(label, params, body, _unparse(body), i + 1)
                i = end
            elif m := _MERGE.match(raw.strip()):
                if merge is not None:
                    raise SableValidationError(f"{where}: at most one merge function may be defined")
                end = self.block(i + 1, stop, base)
                code, first = self.code(i, m.group(3), i + 1, end)
                body = tuple(self.parse_code(code, first, f"mergeAspects of {where}"))
                merge = AdviceFunction("mergeAspects", (m.group(1), m.group(2)), body, _unparse(body), i + 1)
                i = end
            else:
                nested = self.block(i + 1, stop, base)
                for k in range(i + 1, nested):
                    if not _blank(self.lines[k]):
                        raise self.error("unexpected indented block", k, 1)
                if m := _IMPORT.match(text):
                    names = tuple(a.strip() for a in m.group(2).split(","))
                    imports[m.group(1)] = imports.get(m.group(1), ()) + names
                elif m := _ANNOT.match(text):
                    if annotation_var is not None:
                        raise SableValidationError(f"{where}: sourceAnnotation declared more than once")
                    annotation_var, annotation_path = m.group(1), m.group(2)
                elif m := _ASPECT.match(text):
                    aname, tname = m.groups()
                    if aname in aspects:
                        raise SableValidationError(f"{where}: duplicate aspect name {aname!r}")
                    if tname not in ASPECT_TYPES:
                        raise SableValidationError(f"{where}: unknown aspect type {tname!r} for {aname}")
                    aspects[aname] = ASPECT_TYPES[tname]
                elif m := _TRIGGER.match(text):
                    try:
                        value = ast.literal_eval(m.group(2))
                    except (ValueError, SyntaxError):
                        raise self.error(f"trigger value {m.group(2)!r} is not a literal", i) from None
                    triggers[m.group(1)] = triggers.get(m.group(1), ()) + (value,)
                else:
                    raise self.error(f"unrecognized statement {text.split()[0]!r}", i, base + 1)
                i += 1
        trav = TraversalDef(name, imports, annotation_var, annotation_path, aspects, triggers,
                            utilities, pointcuts, merge, header + 1)
        _check_traversal(trav)
        return trav


def _unparse(body) -> str:
    return "\n".join(ast.unparse(s) for s in body)


def _function(node: ast.FunctionDef) -> AdviceFunction:
    a = node.args
    if a.vararg or a.kwarg or a.kwonlyargs or a.posonlyargs or a.defaults or node.decorator_list:
        raise SableValidationError(f"utility {node.name!r}: only plain positional parameters are supported")
    return AdviceFunction(node.name, tuple(p.arg for p in a.args), tuple(node.body),
                          _unparse(node.body), node.lineno)


# -- validation --------------------------------------------------------------

_ALLOWED_STMTS = (ast.Assign, ast.AugAssign, ast.If, ast.For, ast.Return, ast.Expr, ast.Pass,
                  ast.Raise, ast.Break, ast.Continue)
_ALLOWED_EXPRS = (ast.Name, ast.Constant, ast.Set, ast.List, ast.Dict, ast.Tuple, ast.BinOp,
                  ast.UnaryOp, ast.BoolOp, ast.Compare, ast.Call, ast.Attribute, ast.Subscript)
_ALLOWED_OPS = (ast.BitOr, ast.BitAnd, ast.Sub, ast.Add, ast.Mult, ast.Mod, ast.FloorDiv,
                ast.Not, ast.USub, ast.And, ast.Or, ast.Eq, ast.NotEq, ast.Lt, ast.LtE, ast.Gt,
                ast.GtE, ast.In, ast.NotIn, ast.Is, ast.IsNot)
_AUG_OPS = (ast.BitOr, ast.BitAnd, ast.Sub, ast.Add)


def _targets(node) -> list:
    if isinstance(node, ast.Name):
        return [node.id]
    if isinstance(node, ast.Tuple):
        return [n for e in node.elts for n in _targets(e)]
    return []


def _assigned_names(body) -> set:
    names = set()
    for stmt in body:
        for node in ast.walk(stmt):
            if isinstance(node, ast.Assign):
                for t in node.targets:
                    names.update(_targets(t))
            elif isinstance(node, (ast.AugAssign, ast.For)):
                names.update(_targets(node.target))
    return names


class _Checker:
    def __init__(self, where: str, visible: set, readonly: set):
        self.where = where
        self.visible = visible
        self.readonly = readonly

    def fail(self, node, message: str):
        return SableValidationError(f"{self.where}, line {getattr(node, 'lineno', '?')}: {message}")

    def stmts(self, body) -> None:
        for s in body:
            self.stmt(s)

    def stmt(self, node) -> None:
        if isinstance(node, (ast.Import, ast.ImportFrom)):
            raise self.fail(node, "import statements are not supported; advice code is self-contained")
        if not isinstance(node, _ALLOWED_STMTS):
            raise self.fail(node, f"statement {type(node).__name__} is not allowed in advice code")
        if isinstance(node, ast.Assign):
            for t in node.targets:
                self.target(t)
            self.expr(node.value)
        elif isinstance(node, ast.AugAssign):
            if not isinstance(node.op, _AUG_OPS):
                raise self.fail(node, f"augmented operator {type(node.op).__name__} is not allowed")
            if not isinstance(node.target, ast.Name):
                raise self.fail(node, "augmented assignment target must be a name")
            self.target(node.target)
            self.expr(node.target)
            self.expr(node.value)
        elif isinstance(node, ast.If):
            self.expr(node.test)
            self.stmts(node.body)
            self.stmts(node.orelse)
        elif isinstance(node, ast.For):
            if node.orelse:
                raise self.fail(node, "for/else is not allowed in advice code")
            self.target(node.target)
            self.expr(node.iter)
            self.stmts(node.body)
        elif isinstance(node, ast.Return):
            if node.value is not None:
                self.expr(node.value)
        elif isinstance(node, ast.Expr):
            self.expr(node.value)
        elif isinstance(node, ast.Raise):
            if node.cause is not None or node.exc is None:
                raise self.fail(node, "only 'raise ValueError(message)' is allowed")
            self.expr(node.exc)

    def target(self, node) -> None:
        if isinstance(node, ast.Name):
            if node.id in self.readonly:
                raise self.fail(node, f"cannot assign to read-only name {node.id!r}")
        elif isinstance(node, ast.Tuple):
            for e in node.elts:
                self.target(e)
        elif isinstance(node, ast.Subscript):
            self.expr(node.value)
            self.expr(node.slice)
        else:
            raise self.fail(node, f"cannot assign to {type(node).__name__}")

    def expr(self, node) -> None:
        if not isinstance(node, _ALLOWED_EXPRS):
            raise self.fail(node, f"expression {type(node).__name__} is not allowed in advice code")
        if isinstance(node, ast.Name):
            if node.id not in self.visible:
                raise self.fail(node, f"unresolved name {node.id!r}")
            return
        if isinstance(node, ast.Attribute):
            raise self.fail(node, "attribute access is only allowed as a method call")
        if isinstance(node, ast.Call):
            if node.keywords:
                raise self.fail(node, "keyword arguments are not allowed")
            if isinstance(node.func, ast.Attribute):
                self.expr(node.func.value)
            elif isinstance(node.func, ast.Name):
                self.expr(node.func)
            else:
                raise self.fail(node, "only named functions and methods can be called")
            for a in node.args:
                if isinstance(a, ast.Starred):
                    raise self.fail(a, "starred arguments are not allowed")
                self.expr(a)
            return
        if isinstance(node, ast.Constant) and not isinstance(node.value, (bool, int, str, type(None))):
            raise self.fail(node, f"literal {node.value!r} is not allowed")
        for op in (getattr(node, "op", None),) + tuple(getattr(node, "ops", ())):
            if op is not None and not isinstance(op, _ALLOWED_OPS):
                raise self.fail(node, f"operator {type(op).__name__} is not allowed")
        for child in ast.iter_child_nodes(node):
            if isinstance(child, (ast.expr_context, ast.operator, ast.boolop, ast.cmpop, ast.unaryop)):
                continue
            if child is None:
                continue
            self.expr(child)


def _check_traversal(t: TraversalDef) -> None:
    where = f"traversal {t.name}"
    imported = t.imported_aspects
    clash = imported & set(t.aspects)
    if clash:
        raise SableValidationError(f"{where}: aspect {sorted(clash)[0]!r} is both declared and imported")
    for name in t.triggers:
        if name not in t.aspects and name not in imported:
            raise SableValidationError(f"{where}: trigger refers to undeclared aspect {name!r}")
    reserved = PRIMITIVES | BUILTINS
    ctx = {t.annotation_var} if t.annotation_var else set()
    for name in t.utilities:
        if name in reserved or name in t.aspects or name in imported or name in ctx:
            raise SableValidationError(f"{where}: utility name {name!r} shadows another name")
    shared = set(t.utilities) | reserved | imported | ctx
    readonly = set(t.utilities) | reserved | imported | ctx
    for fn in t.utilities.values():
        local = set(fn.params) | _assigned_names(fn.body)
        visible = (shared - {"currentPoint"}) | local
        _Checker(f"{where}, utility {fn.name}", visible, readonly | {"currentPoint"}).stmts(fn.body)
    for pc in t.pointcuts.values():
        bad = set(pc.params) & (set(t.aspects) | shared)
        if bad:
            raise SableValidationError(
                f"{where}: pointcut {pc.label.value} parameter {sorted(bad)[0]!r} shadows another name")
        local = _assigned_names(pc.body)
        visible = shared | set(t.aspects) | set(pc.params) | local
        _Checker(f"{where}, pointcut {pc.label.value}", visible,
                 readonly | set(pc.params)).stmts(pc.body)
    if t.merge is not None:
        local = set(t.merge.params) | _assigned_names(t.merge.body)
        visible = (set(t.utilities) | reserved | local) - {"currentPoint"}
        _Checker(f"{where}, mergeAspects", visible, readonly).stmts(t.merge.body)


def _check_program(program: SableProgram) -> None:
    seen = set()
    for t in program.traversals:
        if t.name in seen:
            raise SableValidationError(f"duplicate traversal name {t.name!r}")
        seen.add(t.name)
    by_name = {t.name: t for t in program.traversals}
    for t in program.traversals:
        for source, names in t.imports.items():
            if source not in by_name:
                raise SableValidationError(f"traversal {t.name}: imports from unknown traversal {source!r}")
            missing = [a for a in names if a not in by_name[source].aspects]
            if missing:
                raise SableValidationError(
                    f"traversal {t.name}: traversal {source} declares no aspect {missing[0]!r}")


def parse_sable(text: str) -> SableProgram:
    return _Parser(text).parse()


# -- printing --------------------------------------------------------------


def _indented(code: str, prefix: str) -> list:
    return [prefix + l if l.strip() else "" for l in code.splitlines()]


def format_program(program: SableProgram) -> str:
    """Canonical text of a program; parsing it gives back an equal program."""
    out = []
    for t in program.traversals:
        out.append(f"traversal {t.name}:")
        for source, names in t.imports.items():
            out.append(f"    fromTraversal {source} importAspect {', '.join(names)}")
        if t.annotation_var:
            path = f" {t.annotation_path}" if t.annotation_path else ""
            out.append(f"    sourceAnnotation {t.annotation_var}{path}")
        for name, typ in t.aspects.items():
            out.append(f"    aspect {name} aspectType {TYPE_NAMES[typ]}")
        for name, values in t.triggers.items():
            for v in values:
                out.append(f"    triggerFrom {name} atValue {v!r}")
        if t.utilities:
            out.append("    utility:")
            for fn in t.utilities.values():
                out.append(f"        def {fn.name}({', '.join(fn.params)}):")
                out.extend(_indented(fn.code or "pass", " " * 12))
        for pc in t.pointcuts.values():
            out.append(f"    pointcut({', '.join((pc.label.value,) + pc.params)}):")
            out.extend(_indented(pc.code or "pass", " " * 8))
        if t.merge is not None:
            out.append(f"    mergeAspects({', '.join(t.merge.params)}):")
            out.extend(_indented(t.merge.code or "pass", " " * 8))
        out.append("")
    return "\n".join(out)


# -- source annotations ----------------------------------------------------


class SourceAnnotation(dict):
    """Map from ``file:proc`` keys to ``label -> list of symbols``."""

    def entry_for(self, qualifier: str) -> dict:
        if qualifier in self:
            return self[qualifier]
        path, _, name = qualifier.rpartition(":")
        base = path.replace("\\", "/").rsplit("/", 1)[-1]
        for key, entry in self.items():
            kpath, _, kname = key.rpartition(":")
            if kname == name and kpath.replace("\\", "/").rsplit("/", 1)[-1] == base:
                return entry
        return {}


def parse_source_annotation(text: str) -> SourceAnnotation:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise AnnotationFormatError(f"annotation is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise AnnotationFormatError("annotation must be an object keyed by 'file:procedure'")
    out = SourceAnnotation()
    for key, entry in doc.items():
        if not isinstance(entry, dict):
            raise AnnotationFormatError(f"entry {key!r} must map labels to symbol lists")
        labels = {}
        for label, symbols in entry.items():
            if not isinstance(symbols, list) or not all(isinstance(s, str) for s in symbols):
                raise AnnotationFormatError(f"label {label!r} of {key!r} must map to a list of strings")
            labels[label] = list(symbols)
        out[key] = labels
    return out
