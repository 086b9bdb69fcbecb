import textwrap

import pytest

from aspectscan.errors import NotBranchingError, ScfgError, UnknownStateError
from aspectscan.frontend import Label, parse_procedure
from aspectscan.scfg import build_scfg


def graph(code, name="f"):
    return build_scfg(parse_procedure(textwrap.dedent(code), f"m.py:{name}"))


def edge_names(g):
    return {(f"{a.label.value}{a.point}", f"{b.label.value}{b.point}") for a, b in g.edges}


def test_running_example_matches_golden(running_paths):
    g = build_scfg(parse_procedure(running_paths["source"].read_text(),
                                   "source_code.py:runningExample"))
    assert g.dump() == running_paths["golden"].read_text()


def test_running_example_loop_body_edges(running_paths):
    g = build_scfg(parse_procedure(running_paths["source"].read_text(),
                                   "source_code.py:runningExample"))
    body = {5, 6, 7, 8, 9}
    inner = {(a.key, b.key) for a, b in g.edges
             if a.point in body and b.point in body and a.label != Label.END_FOR
             and (a.label, b.label) != (Label.FOR, Label.END_FOR)}
    assert inner == {
        ((5, "For"), (6, "Assign")),
        ((6, "Assign"), (7, "If")),
        ((7, "If"), (8, "Assign")),
        ((7, "If"), (9, "Assign")),
        ((8, "Assign"), (7, "EndIf")),
        ((9, "Assign"), (7, "EndIf")),
        ((7, "EndIf"), (5, "For")),
    }


def test_trivial_procedure():
    g = graph("def f():\n    pass\n")
    assert [(s.point, s.label) for s in g.vertices] == [
        (0, Label.ENTER_PROCEDURE), (1, Label.PASS), (2, Label.EXIT_PROCEDURE)]
    assert edge_names(g) == {("EnterProcedure0", "Pass1"), ("Pass1", "ExitProcedure2")}


def test_unreachable_after_return_is_pruned():
    g = graph("""
        def f():
            return 1
            x = 2
    """)
    assert [s.label for s in g.vertices] == [Label.ENTER_PROCEDURE, Label.RETURN, Label.EXIT_PROCEDURE]


def test_break_and_continue():
    g = graph("""
        def f(c):
            while c:
                break
            while c:
                continue
    """)
    e = edge_names(g)
    assert ("Break2", "EndWhile1") in e
    assert ("Continue4", "While3") in e


def test_return_goes_to_exit_from_anywhere():
    g = graph("""
        def f(c):
            for x in c:
                if x:
                    return x
    """)
    assert ("Return3", "ExitProcedure4") in edge_names(g)


def test_if_without_else_falls_through():
    g = graph("""
        def f(c):
            if c:
                a = 1
            b = 2
    """)
    e = edge_names(g)
    assert {("If1", "Assign2"), ("If1", "EndIf1"), ("Assign2", "EndIf1"), ("EndIf1", "Assign3")} <= e


def test_try_except_else_finally():
    g = graph("""
        def f():
            try:
                a()
            except E:
                b()
            else:
                c()
            finally:
                d()
            e()
    """)
    e = edge_names(g)
    # handler and else both flow into finally, which flows to EndTry
    assert ("Try1", "Except3") in e
    assert ("Try1", "Exp2") in e
    assert ("Exp2", "Else5") in e
    assert ("Exp4", "Finally7") in e
    assert ("Exp8", "EndTry1") in e
    assert ("EndTry1", "Exp9") in e


def test_return_inside_try_finally_runs_finally():
    g = graph("""
        def f():
            try:
                return 1
            finally:
                d()
    """)
    e = edge_names(g)
    assert ("Return2", "Finally3") in e
    assert ("Return2", "ExitProcedure6") not in e


def test_match_cases():
    g = graph("""
        def f(v):
            match v:
                case 1:
                    a()
                case _:
                    b()
    """)
    e = edge_names(g)
    assert {("Match1", "Case2"), ("Match1", "Case4"), ("Exp3", "EndMatch1"),
            ("Exp5", "EndMatch1"), ("Match1", "EndMatch1")} <= e


def test_loop_else():
    g = graph("""
        def f(xs):
            for x in xs:
                pass
            else:
                done()
            after()
    """)
    e = edge_names(g)
    assert {("EndFor1", "Else3"), ("Else3", "Exp4"), ("Exp4", "EndElse3"),
            ("EndElse3", "Exp5")} <= e


def test_ending_state_queries(running_paths):
    g = build_scfg(parse_procedure(running_paths["source"].read_text(),
                                   "source_code.py:runningExample"))
    end_if = g.ending_state(g.state(7, "If"))
    assert (end_if.point, end_if.label, end_if.loc) == (7, Label.END_IF, 12)
    end_for = g.ending_state(g.state(5, "For"))
    assert (end_for.point, end_for.loc) == (5, 12)
    with pytest.raises(NotBranchingError):
        g.ending_state(g.state(1, "Assign"))
    with pytest.raises(UnknownStateError):
        g.state(99, "Assign")


def test_children_sorted_ascending(running_paths):
    g = build_scfg(parse_procedure(running_paths["source"].read_text(),
                                   "source_code.py:runningExample"))
    kids = g.children(g.state(7, "If"))
    assert [k.point for k in kids] == [8, 9]


def test_break_outside_loop_is_an_error():
    # ast.parse accepts a stray break; only compilation would reject it
    with pytest.raises(ScfgError, match="outside a loop"):
        graph("def f():\n    break\n")


def test_construction_is_deterministic(running_paths):
    text = running_paths["source"].read_text()
    a = build_scfg(parse_procedure(text, "source_code.py:runningExample"))
    b = build_scfg(parse_procedure(text, "source_code.py:runningExample"))
    assert a.dump() == b.dump()
    assert a.to_dot() == b.to_dot()


def test_only_branches_have_several_successors():
    g = graph("""
        def f(a, b):
            while a:
                if b:
                    continue
                try:
                    g()
                except E:
                    raise
            return 0
    """)
    for s in g.vertices:
        if s.label not in (Label.WHILE, Label.IF, Label.TRY):
            assert len(g.children(s)) <= 1
