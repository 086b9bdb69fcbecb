import json

from aspectscan.engine import Alarm, AnalysisResult, analyze
from aspectscan.library import entry_path
from aspectscan.report import render_machine, render_report, render_value
from aspectscan.sable import parse_sable, parse_source_annotation


def running_result(paths):
    return analyze(paths["source"].read_text(), "source_code.py:runningExample",
                   parse_sable(entry_path("running_example").read_text()),
                   parse_source_annotation(paths["annotation"].read_text()),
                   annotation_name="source_annotation.json",
                   definition_name="static_aspect_definition.sable")


def test_empty_report():
    res = AnalysisResult("m.py:f", "a.json", "d.sable", [], ["T"])
    text = render_report(res)
    assert text.splitlines()[1:] == [
        "   - procedure = m.py:f",
        "   - source_annotation = a.json",
        "   - static_aspect_definition = d.sable",
        "   - alarms:",
        ">",
    ]


def test_values_render_with_aspect_name():
    res = AnalysisResult("m.py:f", "a.json", "d.sable",
                         [Alarm(3, 2, "Leaked", {"b", "a"}, 1, "Assign", "T")], ["T"])
    assert "         Leaked = {'a', 'b'} at step 2" in render_report(res)
    assert render_value(set()) == "set()"


def test_report_is_byte_stable(running_paths):
    assert render_report(running_result(running_paths)) == render_report(running_result(running_paths))


def test_machine_output(running_paths):
    doc = json.loads(render_machine([running_result(running_paths)]))
    assert [(a["line"], a["step"]) for a in doc[0]["alarms"]] == [(9, 8), (9, 14), (14, 35)]
    assert doc[0]["traversal_order"] == ["travSensitive", "travConfidentiality"]
