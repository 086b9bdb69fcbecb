"""Acceptance gate: one test per criterion, each reported as a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py`` (lines appear in the terminal
summary) or ``python tests/test_acceptance.py``.
"""

import random
import re
import sys
import time
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from aspectscan.engine import analyze, deep_equal, merge_default, run_program  # noqa: E402
from aspectscan.errors import MergeConflictError  # noqa: E402
from aspectscan.frontend import parse_procedure  # noqa: E402
from aspectscan.library import library_dir, load_fixture_corpus  # noqa: E402
from aspectscan.metrics import ConfusionMatrix, metrics, wilcoxon_signed_rank  # noqa: E402
from aspectscan.report import render_report  # noqa: E402
from aspectscan.sable import parse_sable, parse_source_annotation  # noqa: E402
from aspectscan.scfg import build_scfg  # noqa: E402
from oracles import wilcoxon_by_enumeration  # noqa: E402

RUNNING = library_dir() / "fixtures" / "running_example"
GOLDEN = Path(__file__).parent / "golden" / "running_example.scfg.txt"
QUALIFIER = "source_code.py:runningExample"

RESULTS: dict = {}

# Expected report for the 14-line source file shipped with the fixture; the id
# is left open.
EXPECTED_REPORT = """\
<StaticAspectAnalysis (id ID):
   - procedure = source_code.py:runningExample
   - source_annotation = source_annotation.json
   - static_aspect_definition = static_aspect_definition.sable
   - alarms:
      - line 9
         SensitiveBranching = True at step 8
         SensitiveBranching = True at step 14
      - line 14
         ConfidentialityViolation = True at step 35
>
"""


def criterion(number: int, title: str):
    def wrap(fn):
        def test():
            try:
                fn()
            except BaseException as exc:
                if isinstance(exc, pytest.skip.Exception):
                    RESULTS[number] = ("SKIP", title, str(exc))
                else:
                    RESULTS[number] = ("FAIL", title, f"{type(exc).__name__}: {exc}".splitlines()[0])
                raise
            RESULTS[number] = ("PASS", title, "")
        test.__name__ = fn.__name__
        test.__doc__ = title
        return test
    return wrap


def summary_lines() -> list:
    out = []
    for n in sorted(RESULTS):
        status, title, detail = RESULTS[n]
        line = f"criterion {n}: {status} - {title}"
        out.append(line + (f" ({detail})" if detail else ""))
    return out


def running_scfg():
    return build_scfg(parse_procedure((RUNNING / "source_code.py").read_text(), QUALIFIER))


def running_inputs():
    program = parse_sable((RUNNING / "static_aspect_definition.sable").read_text())
    annotation = parse_source_annotation((RUNNING / "source_annotation.json").read_text())
    return program, annotation


@criterion(1, "running example: three alarms, report shape, under 1 s")
def test_criterion_1_running_example():
    t0 = time.perf_counter()
    program, annotation = running_inputs()
    result = analyze((RUNNING / "source_code.py").read_text(), QUALIFIER, program, annotation,
                     annotation_name="source_annotation.json",
                     definition_name="static_aspect_definition.sable")
    text = render_report(result)
    elapsed = time.perf_counter() - t0
    assert [(a.line, a.step, a.aspect, a.value) for a in result.alarms] == [
        (9, 8, "SensitiveBranching", True),
        (9, 14, "SensitiveBranching", True),
        (14, 35, "ConfidentialityViolation", True),
    ]
    m = re.match(r"<StaticAspectAnalysis \(id (\d+)\):\n", text)
    assert m, text
    assert text == EXPECTED_REPORT.replace("ID", m.group(1))
    assert elapsed < 1.0, f"took {elapsed:.3f} s"


@criterion(2, "SCFG: 7 loop-body edges and golden dump")
def test_criterion_2_scfg():
    g = running_scfg()
    by_key = {(a.key, b.key) for a, b in g.edges}
    expected_body = {
        ((5, "For"), (6, "Assign")),
        ((6, "Assign"), (7, "If")),
        ((7, "If"), (8, "Assign")),
        ((7, "If"), (9, "Assign")),
        ((8, "Assign"), (7, "EndIf")),
        ((9, "Assign"), (7, "EndIf")),
        ((7, "EndIf"), (5, "For")),
    }
    body_points = {6, 7, 8, 9}
    inside = {(a, b) for a, b in by_key
              if (a[0] in body_points or b[0] in body_points)}
    assert inside == expected_body
    assert g.dump() == GOLDEN.read_text()


@criterion(3, "fixpoint: loop body traversed 2 times (travSensitive), 1 time (travConfidentiality)")
def test_criterion_3_fixpoint():
    program, annotation = running_inputs()
    _, _, entries, _ = run_program(running_scfg(), program, annotation.entry_for(QUALIFIER))
    assert entries["travSensitive"] == {5: 2}
    assert entries["travConfidentiality"] == {5: 1}


def _random_map(rng: random.Random) -> dict:
    # fixed value kind per name so that shared names are always mergeable
    out = {}
    for name in ("A", "B", "C"):
        if rng.random() < 0.7:
            out[name] = rng.random() < 0.5
    for name in ("S", "T", "U"):
        if rng.random() < 0.7:
            out[name] = set(rng.sample("abcdefgh", rng.randint(0, 4)))
    return out


@criterion(4, "merge: commutative, associative, conflict on unequal scalars (10,000 maps)")
def test_criterion_4_merge():
    rng = random.Random(20240501)
    maps = [_random_map(rng) for _ in range(10_000)]
    bad = 0
    for i in range(len(maps)):
        a, b, c = maps[i], maps[(i + 1) % len(maps)], maps[(i + 7) % len(maps)]
        if not deep_equal(merge_default(a, b), merge_default(b, a)):
            bad += 1
        if not deep_equal(merge_default(merge_default(a, b), c),
                          merge_default(a, merge_default(b, c))):
            bad += 1
    scalars = [0, 1, 7, "x", "y", [1], [2], {"k": 1}, {"k": 2}]
    for _ in range(2_000):
        v1, v2 = rng.sample(scalars, 2)
        if type(v1) is bool or deep_equal(v1, v2):
            continue
        try:
            merge_default({"N": v1}, {"N": v2})
            bad += 1
        except MergeConflictError as exc:
            if not str(exc).startswith("Conflict of values"):
                bad += 1
    assert bad == 0, f"{bad} counterexamples"


@criterion(5, "metric arithmetic within 0.5 percentage point")
def test_criterion_5_metrics():
    def pct(x):
        return 100 * x

    m = metrics(ConfusionMatrix(tp=9, fn=1, tn=8, fp=2))
    assert abs(pct(m.sensitivity) - 90) <= 0.5
    assert abs(pct(m.specificity) - 80) <= 0.5
    assert abs(pct(m.precision) - 82) <= 0.5
    m = metrics(ConfusionMatrix(tp=9, fn=1, tn=72, fp=18))
    assert abs(pct(m.precision) - 33) <= 0.5
    assert abs(pct(m.sensitivity) - 90) <= 0.5
    assert abs(pct(m.specificity) - 80) <= 0.5


@criterion(6, "Wilcoxon: E(X,X)=0.5, all-positive E=1, exact p within 1e-12 of enumeration")
def test_criterion_6_wilcoxon():
    rng = random.Random(7)
    grid = [0.0, 0.1, 0.2, 0.25, 0.5, 0.6, 0.75, 0.9, 1.0]
    for _ in range(300):
        n = rng.randint(1, 12)
        x = [rng.choice(grid) for _ in range(n)]
        assert wilcoxon_signed_rank(x, x).effect_size == 0.5
        lo = [rng.random() for _ in range(n)]
        hi = [v + rng.choice([0.01, 0.1, 0.5]) for v in lo]
        assert wilcoxon_signed_rank(hi, lo).effect_size == 1.0
        y = [rng.choice(grid) for _ in range(n)]
        _, _, p = wilcoxon_by_enumeration(x, y)
        assert abs(wilcoxon_signed_rank(x, y).p_value - p) <= 1e-12


@criterion(7, "library corpus: exact alarm sets, fixed variants clean, CVE-2014-1829 false positive")
def test_criterion_7_corpus():
    corpus = [f for f in load_fixture_corpus() if f.name.startswith("cve_")]
    entries = {f.entry for f in corpus}
    assert len(entries) == 5
    vulnerable_entries = set()
    for fx in corpus:
        program = parse_sable(fx.definition_path.read_text())
        res = analyze(fx.source_text, fx.qualifier, program, fx.annotation)
        got = tuple(sorted((a.line, a.aspect) for a in res.alarms))
        assert got == fx.expected, f"{fx.name}: {got} != {fx.expected}"
        if fx.variant == "vulnerable":
            assert len(got) == 1, fx.name
            vulnerable_entries.add(fx.entry)
        elif fx.known_false_positive:
            assert fx.name == "cve_2014_1829/fixed" and len(got) == 1
        else:
            assert got == (), fx.name
    assert vulnerable_entries == entries


@criterion(8, "full-dataset results")
def test_criterion_8_full_dataset():
    pytest.skip("not reproducible here: the 108-CVE dataset and its annotations are external; "
                "criteria 1-7 stand in for it")


def main() -> int:
    for name, fn in sorted(globals().items()):
        if name.startswith("test_criterion_"):
            try:
                fn()
            except BaseException:
                pass
    for line in summary_lines():
        print(line)
    return 0 if all(s != "FAIL" for s, _, _ in RESULTS.values()) else 1


if __name__ == "__main__":
    sys.exit(main())
