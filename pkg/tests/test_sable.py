import dataclasses
import textwrap

import pytest

from aspectscan.errors import AnnotationFormatError, SableSyntaxError, SableValidationError
from aspectscan.frontend import Label
from aspectscan.library import ENTRIES, EXAMPLES, entry_path
from aspectscan.sable import (format_program, parse_sable, parse_source_annotation,
                              traversal_dependencies)


def sable(text):
    return parse_sable(textwrap.dedent(text))


@pytest.fixture(scope="module")
def running():
    return parse_sable(entry_path("running_example").read_text())


def test_running_example_contents(running):
    assert running.names == ["travSensitive", "travConfidentiality"]
    t = running["travSensitive"]
    assert list(t.aspects) == ["Sensitive", "ScopeSensitiveBranches", "SensitiveBranching"]
    assert t.aspects["Sensitive"] is set
    assert t.triggers == {"SensitiveBranching": (True,)}
    assert list(t.utilities) == ["isSensitExpr", "infoFlow", "append_ScopeSensitiveBranches"]
    assert len(t.pointcuts) == 10
    assert t.pointcuts[Label.FOR].params == ("index", "bound")
    assert t.annotation_var == "labeled_symbols"


def test_dependencies(running):
    assert traversal_dependencies(running["travConfidentiality"]) == {"travSensitive"}
    assert traversal_dependencies(running["travSensitive"]) == set()


def test_self_import_is_a_dependency(running):
    t = dataclasses.replace(running["travSensitive"], imports={"travSensitive": ("Sensitive",)})
    assert traversal_dependencies(t) == {"travSensitive"}


def test_self_import_rejected_in_files():
    with pytest.raises(SableValidationError):
        sable("""
            traversal X:
                fromTraversal X importAspect A
                aspect A aspectType bool
        """)


def test_empty_file():
    assert parse_sable("").traversals == ()
    assert parse_sable("# nothing\n\n").traversals == ()


def test_duplicate_pointcut():
    with pytest.raises(SableValidationError, match="Assign"):
        sable("""
            traversal T:
                aspect A aspectType bool
                pointcut(Assign, l, r):
                    A = True
                pointcut(Assign, l, r):
                    A = False
        """)


@pytest.mark.parametrize("body", [
    "aspect A aspectType bool\n    aspect A aspectType set",
    "aspect A aspectType bool\n    mergeAspects(a, b):\n        return a\n    mergeAspects(a, b):\n        return b",
])
def test_duplicate_declarations(body):
    with pytest.raises(SableValidationError):
        parse_sable(f"traversal T:\n    {body}\n")


def test_duplicate_traversal():
    with pytest.raises(SableValidationError, match="duplicate traversal"):
        sable("""
            traversal T:
                aspect A aspectType bool
            traversal T:
                aspect B aspectType bool
        """)


def test_syntax_error_is_positioned():
    with pytest.raises(SableSyntaxError) as info:
        sable("""
            traversal T:
                aspect A aspectType
        """)
    assert info.value.line == 3


def test_unknown_label_and_type():
    with pytest.raises((SableSyntaxError, SableValidationError)):
        sable("""
            traversal T:
                aspect A aspectType float
        """)
    with pytest.raises((SableSyntaxError, SableValidationError)):
        sable("""
            traversal T:
                aspect A aspectType bool
                pointcut(Sometimes, x):
                    A = True
        """)


def test_imports_in_utilities_rejected():
    with pytest.raises(SableValidationError, match="import"):
        sable("""
            traversal T:
                aspect A aspectType bool
                utility:
                    def f():
                        import os
                        return True
        """)


def test_unresolved_name_rejected():
    with pytest.raises(SableValidationError, match="undefined_thing"):
        sable("""
            traversal T:
                aspect A aspectType bool
                pointcut(Pass):
                    A = undefined_thing
        """)


def test_import_of_undeclared_aspect():
    with pytest.raises(SableValidationError, match="declares no aspect"):
        sable("""
            traversal S:
                aspect A aspectType bool
            traversal T:
                fromTraversal S importAspect B
                aspect C aspectType bool
        """)


def test_blank_lines_between_declarations():
    p = sable("""
        traversal T:

            aspect A aspectType bool

            triggerFrom A atValue True

            pointcut(Pass):
                A = True
    """)
    assert p["T"].triggers == {"A": (True,)}


@pytest.mark.parametrize("name", sorted({**ENTRIES, **EXAMPLES}))
def test_format_round_trip(name):
    prog = parse_sable(entry_path(name).read_text())
    again = parse_sable(format_program(prog))
    assert again == prog
    assert format_program(again) == format_program(prog)


def test_source_annotation():
    a = parse_source_annotation('{"source_code.py:runningExample": '
                                '{"source": ["genPrivate"], "sink": ["broadcast"]}}')
    assert a["source_code.py:runningExample"] == {"source": ["genPrivate"], "sink": ["broadcast"]}
    assert a.entry_for("some/dir/source_code.py:runningExample")["sink"] == ["broadcast"]
    assert a.entry_for("other.py:runningExample") == {}
    assert parse_source_annotation("{}") == {}


@pytest.mark.parametrize("text", ['{"f.py:g": {"source": "x"}}', "[1]", "{", '{"f.py:g": 3}'])
def test_bad_annotations(text):
    with pytest.raises(AnnotationFormatError):
        parse_source_annotation(text)
