"""Interpreter for advice code: pointcut bodies, utilities and merge functions.

Advice is parsed with :mod:`ast` and checked by :mod:`aspectscan.sable`;
here it is evaluated node by node, never handed to ``exec``.
"""

from __future__ import annotations

import ast
import copy
import operator
from dataclasses import dataclass

from .errors import AdviceError, AdviceTypeError
from .frontend import LOOP_LABELS, ExprUsage
from .sable import AdviceFunction, Pointcut, TraversalDef
from .scfg import SymbolicState

SYMBOL_LABELS = ("def", "use", "call", "all")


@dataclass(frozen=True)
class AspectRef:
    """Value of an imported aspect name inside advice: a handle for getAspect."""

    name: str


class AdviceRaisedError(AdviceError, ValueError):
    pass


class _Return(Exception):
    def __init__(self, value):
        self.value = value


class _Break(Exception):
    pass


class _Continue(Exception):
    pass


@dataclass
class _Frame:
    locals: dict
    aspects: dict | None = None    # the traversal map, for pointcut frames only
    state: SymbolicState | None = None
    depth: int = 0


_BINOPS = {
    ast.BitOr: operator.or_,
    ast.BitAnd: operator.and_,
    ast.Sub: operator.sub,
    ast.Add: operator.add,
    ast.Mult: operator.mul,
    ast.Mod: operator.mod,
    ast.FloorDiv: operator.floordiv,
}
_CMPOPS = {
    ast.Eq: operator.eq,
    ast.NotEq: operator.ne,
    ast.Lt: operator.lt,
    ast.LtE: operator.le,
    ast.Gt: operator.gt,
    ast.GtE: operator.ge,
    ast.In: lambda a, b: a in b,
    ast.NotIn: lambda a, b: a not in b,
    ast.Is: operator.is_,
    ast.IsNot: operator.is_not,
}
_METHODS = {
    list: {"append", "pop", "copy", "index", "count", "extend", "insert", "remove"},
    set: {"add", "discard", "remove", "copy", "union", "intersection", "difference",
          "issubset", "issuperset"},
    dict: {"keys", "values", "items", "get", "copy", "pop"},
    str: {"startswith", "endswith", "lower", "upper", "strip"},
}
_BUILTINS = {
    "len": len,
    "set": set,
    "deepcopy": copy.deepcopy,
    "type": type,
    "bool": bool,
    "int": int,
    "str": str,
    "list": list,
    "dict": dict,
    "ValueError": ValueError,
}


def conforms(value, typ) -> bool:
    return value is None or type(value) is typ


class AdviceRuntime:
    """Executes the advice of one traversal for one procedure."""

    def __init__(self, trav: TraversalDef, annotation: dict | None = None, *, max_depth: int = 64):
        self.trav = trav
        self.annotation = annotation if annotation is not None else {}
        self.max_depth = max_depth
        self.imported = trav.imported_aspects
        self._primitives = {
            "getExprSymbs": self.get_expr_symbs,
            "getDescrSymbs": self.get_descr_symbs,
            "getAspect": self.get_aspect,
            "enterLoop": self.enter_loop,
        }

    # -- primitives --------------------------------------------------------

    @staticmethod
    def get_expr_symbs(label, expr) -> set:
        if label not in SYMBOL_LABELS:
            raise AdviceError(f"getExprSymbs: unknown symbol label {label!r}")
        if not isinstance(expr, ExprUsage):
            raise AdviceTypeError(f"getExprSymbs expects a statement expression, got {type(expr).__name__}")
        return set(expr.symbols(label))

    @staticmethod
    def get_descr_symbs(label, annot) -> set:
        if not isinstance(annot, dict):
            raise AdviceTypeError("getDescrSymbs expects the source annotation")
        if label not in annot:
            raise AdviceError(f"getDescrSymbs: label {label!r} is not in the source annotation")
        return set(annot[label])

    def get_aspect(self, state, aspect):
        name = aspect.name if isinstance(aspect, AspectRef) else aspect
        if not isinstance(state, SymbolicState):
            raise AdviceTypeError("getAspect expects a symbolic state")
        if name not in self.imported:
            raise AdviceError(f"getAspect: aspect {name!r} is not imported by traversal {self.trav.name}")
        if name not in state.annotation:
            raise AdviceError(f"getAspect: aspect {name!r} is not annotated on {state!r}")
        return copy.deepcopy(state.annotation[name])

    @staticmethod
    def enter_loop(state) -> bool:
        if not isinstance(state, SymbolicState):
            raise AdviceTypeError("enterLoop expects a symbolic state")
        return state.enter_loop if state.label in LOOP_LABELS else False

    # -- entry points ------------------------------------------------------

    def exec_pointcut(self, pointcut: Pointcut, state: SymbolicState, travmap: dict) -> dict:
        if len(pointcut.params) != len(state.exprs):
            raise AdviceError(
                f"pointcut {pointcut.label.value} declares {len(pointcut.params)} parameters "
                f"but {state!r} has {len(state.exprs)} statement expressions")
        frame = _Frame(dict(zip(pointcut.params, state.exprs)), travmap, state)
        try:
            self.block(pointcut.body, frame)
        except _Return:
            pass
        except (_Break, _Continue):
            raise AdviceError("break/continue outside a loop") from None
        self.check_types(travmap, state)
        return travmap

    def exec_block(self, body, state: SymbolicState | None, travmap: dict, params: dict | None = None) -> dict:
        frame = _Frame(dict(params or {}), travmap, state)
        try:
            self.block(body, frame)
        except _Return:
            pass
        self.check_types(travmap, state)
        return travmap

    def call_merge(self, m1: dict, m2: dict) -> dict:
        fn = self.trav.merge
        result = self.call_function(fn, [m1, m2], 0)
        if not isinstance(result, dict):
            raise AdviceTypeError(f"mergeAspects of {self.trav.name} must return a map")
        self.check_types(result, None)
        return result

    def check_types(self, travmap: dict, state) -> None:
        for name, typ in self.trav.aspects.items():
            if name in travmap and not conforms(travmap[name], typ):
                where = f" at {state!r}" if state is not None else ""
                raise AdviceTypeError(
                    f"aspect {name} = {travmap[name]!r}{where} does not satisfy the type {typ.__name__}")

    # -- statements --------------------------------------------------------

    def block(self, body, frame: _Frame) -> None:
        for stmt in body:
            self.stmt(stmt, frame)

    def stmt(self, node, frame: _Frame) -> None:
        if isinstance(node, ast.Assign):
            value = self.eval(node.value, frame)
            for target in node.targets:
                self.assign(target, value, frame)
        elif isinstance(node, ast.AugAssign):
            current = self.eval(node.target, frame)
            value = self.binop(node.op, current, self.eval(node.value, frame))
            self.assign(node.target, value, frame)
        elif isinstance(node, ast.Expr):
            self.eval(node.value, frame)
        elif isinstance(node, ast.If):
            test = self.truth(self.eval(node.test, frame), node)
            self.block(node.body if test else node.orelse, frame)
        elif isinstance(node, ast.For):
            items = self.eval(node.iter, frame)
            if isinstance(items, set):
                items = sorted(items, key=repr)
            elif not isinstance(items, (list, tuple, dict, str)):
                raise AdviceTypeError(f"line {node.lineno}: cannot iterate over {type(items).__name__}")
            for item in list(items):
                self.assign(node.target, item, frame)
                try:
                    self.block(node.body, frame)
                except _Break:
                    break
                except _Continue:
                    continue
        elif isinstance(node, ast.Return):
            raise _Return(None if node.value is None else self.eval(node.value, frame))
        elif isinstance(node, ast.Pass):
            pass
        elif isinstance(node, ast.Break):
            raise _Break()
        elif isinstance(node, ast.Continue):
            raise _Continue()
        elif isinstance(node, ast.Raise):
            exc = self.eval(node.exc, frame)
            raise AdviceRaisedError(str(exc.args[0]) if isinstance(exc, ValueError) and exc.args else str(exc))
        else:
            raise AdviceError(f"line {node.lineno}: unsupported statement {type(node).__name__}")

    def assign(self, target, value, frame: _Frame) -> None:
        if isinstance(target, ast.Name):
            if frame.aspects is not None and target.id in self.trav.aspects:
                frame.aspects[target.id] = value
            else:
                frame.locals[target.id] = value
        elif isinstance(target, ast.Tuple):
            if not isinstance(value, (tuple, list)) or len(value) != len(target.elts):
                raise AdviceTypeError(f"line {target.lineno}: cannot unpack {type(value).__name__}")
            for t, v in zip(target.elts, value):
                self.assign(t, v, frame)
        elif isinstance(target, ast.Subscript):
            container = self.eval(target.value, frame)
            key = self.eval(target.slice, frame)
            try:
                container[key] = value
            except (TypeError, IndexError) as exc:
                raise AdviceTypeError(f"line {target.lineno}: {exc}") from None
        else:
            raise AdviceError(f"cannot assign to {type(target).__name__}")

    # -- expressions -------------------------------------------------------

    def lookup(self, name: str, frame: _Frame, node=None):
        if name in frame.locals:
            return frame.locals[name]
        if frame.aspects is not None and name in self.trav.aspects:
            return frame.aspects.get(name)
        if name in self.imported:
            return AspectRef(name)
        if name == self.trav.annotation_var:
            return copy.deepcopy(self.annotation)
        if name in self.trav.utilities:
            return self.trav.utilities[name]
        if name == "currentPoint":
            if frame.state is None:
                raise AdviceError("currentPoint is only available inside a pointcut")
            return frame.state
        if name in self._primitives:
            return self._primitives[name]
        if name in _BUILTINS:
            return _BUILTINS[name]
        line = getattr(node, "lineno", "?")
        raise AdviceError(f"line {line}: unresolved name {name!r}")

    @staticmethod
    def truth(value, node) -> bool:
        if type(value) is not bool:
            raise AdviceTypeError(
                f"line {getattr(node, 'lineno', '?')}: condition must be a boolean, got {type(value).__name__}")
        return value

    def binop(self, op, left, right):
        if left is None or right is None:
            raise AdviceTypeError("uninitialized aspect value used with an operator")
        fn = _BINOPS.get(type(op))
        if fn is None:
            raise AdviceError(f"operator {type(op).__name__} is not supported")
        try:
            return fn(left, right)
        except (TypeError, ZeroDivisionError) as exc:
            raise AdviceTypeError(f"operator {type(op).__name__}: {exc}") from None

    def eval(self, node, frame: _Frame):
        if isinstance(node, ast.Constant):
            return node.value
        if isinstance(node, ast.Name):
            return self.lookup(node.id, frame, node)
        if isinstance(node, ast.Set):
            try:
                return {self.eval(e, frame) for e in node.elts}
            except TypeError as exc:
                raise AdviceTypeError(f"line {node.lineno}: {exc}") from None
        if isinstance(node, ast.List):
            return [self.eval(e, frame) for e in node.elts]
        if isinstance(node, ast.Tuple):
            return tuple(self.eval(e, frame) for e in node.elts)
        if isinstance(node, ast.Dict):
            try:
                return {self.eval(k, frame): self.eval(v, frame) for k, v in zip(node.keys, node.values)}
            except TypeError as exc:
                raise AdviceTypeError(f"line {node.lineno}: {exc}") from None
        if isinstance(node, ast.BinOp):
            return self.binop(node.op, self.eval(node.left, frame), self.eval(node.right, frame))
        if isinstance(node, ast.UnaryOp):
            value = self.eval(node.operand, frame)
            if isinstance(node.op, ast.Not):
                return not self.truth(value, node)
            if isinstance(node.op, ast.USub) and type(value) is int:
                return -value
            raise AdviceTypeError(f"line {node.lineno}: bad operand for unary {type(node.op).__name__}")
        if isinstance(node, ast.BoolOp):
            is_and = isinstance(node.op, ast.And)
            for operand in node.values:
                value = self.truth(self.eval(operand, frame), operand)
                if value is not is_and:
                    return value
            return is_and
        if isinstance(node, ast.Compare):
            return self.compare(node, frame)
        if isinstance(node, ast.Call):
            return self.call(node, frame)
        if isinstance(node, ast.Subscript):
            container = self.eval(node.value, frame)
            key = self.eval(node.slice, frame)
            try:
                return container[key]
            except (TypeError, KeyError, IndexError) as exc:
                raise AdviceError(f"line {node.lineno}: bad subscript {key!r}: {exc}") from None
        raise AdviceError(f"line {getattr(node, 'lineno', '?')}: unsupported expression {type(node).__name__}")

    def compare(self, node: ast.Compare, frame: _Frame) -> bool:
        left = self.eval(node.left, frame)
        for op, right_node in zip(node.ops, node.comparators):
            right = self.eval(right_node, frame)
            if not isinstance(op, (ast.Is, ast.IsNot)) and (left is None or right is None):
                raise AdviceTypeError(f"line {node.lineno}: uninitialized aspect value used in a comparison")
            try:
                ok = _CMPOPS[type(op)](left, right)
            except TypeError as exc:
                raise AdviceTypeError(f"line {node.lineno}: {exc}") from None
            if not ok:
                return False
            left = right
        return True

    def call(self, node: ast.Call, frame: _Frame):
        args = [self.eval(a, frame) for a in node.args]
        func = node.func
        if isinstance(func, ast.Attribute):
            receiver = self.eval(func.value, frame)
            allowed = _METHODS.get(type(receiver), set())
            if func.attr not in allowed:
                raise AdviceError(
                    f"line {node.lineno}: method {func.attr!r} is not available on {type(receiver).__name__}")
            try:
                result = getattr(receiver, func.attr)(*args)
            except (TypeError, KeyError, IndexError, ValueError) as exc:
                raise AdviceError(f"line {node.lineno}: {func.attr}() failed: {exc}") from None
            if isinstance(receiver, dict) and func.attr == "keys":
                return set(result)
            if isinstance(receiver, dict) and func.attr in ("values", "items"):
                return list(result)
            return result
        callee = self.lookup(func.id, frame, node)
        if isinstance(callee, AdviceFunction):
            return self.call_function(callee, args, frame.depth + 1)
        if not callable(callee):
            raise AdviceTypeError(f"line {node.lineno}: {func.id!r} is not callable")
        try:
            return callee(*args)
        except AdviceError:
            raise
        except (TypeError, ValueError) as exc:
            raise AdviceTypeError(f"line {node.lineno}: {func.id}() failed: {exc}") from None

    def call_function(self, fn: AdviceFunction, args: list, depth: int):
        if depth > self.max_depth:
            raise AdviceError(f"call depth limit {self.max_depth} exceeded in {fn.name}")
        if len(args) != len(fn.params):
            raise AdviceError(f"{fn.name} expects {len(fn.params)} arguments, got {len(args)}")
        frame = _Frame(dict(zip(fn.params, args)), None, None, depth)
        try:
            self.block(fn.body, frame)
        except _Return as ret:
            return ret.value
        except (_Break, _Continue):
            raise AdviceError(f"break/continue outside a loop in {fn.name}") from None
        return None
