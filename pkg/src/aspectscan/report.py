"""Text and machine-readable renderings of analysis results."""

from __future__ import annotations

import json
import zlib
from pathlib import PurePath

from .engine import AnalysisResult


def render_value(value) -> str:
    if isinstance(value, (set, frozenset)):
        if not value:
            return "set()"
        return "{" + ", ".join(sorted(render_value(v) for v in value)) + "}"
    if isinstance(value, list):
        return "[" + ", ".join(render_value(v) for v in value) + "]"
    if isinstance(value, dict):
        return "{" + ", ".join(f"{render_value(k)}: {render_value(v)}" for k, v in value.items()) + "}"
    return repr(value)


def report_id(result: AnalysisResult) -> int:
    key = "\0".join([result.qualifier, result.annotation_name, result.definition_name])
    return zlib.crc32(key.encode("utf-8"))


def display_name(path) -> str:
    if not path:
        return ""
    if isinstance(path, (list, tuple)):
        return ", ".join(display_name(p) for p in path)
    return PurePath(str(path)).name


def render_report(result: AnalysisResult) -> str:
    lines = [
        f"<StaticAspectAnalysis (id {report_id(result)}):",
        f"   - procedure = {result.qualifier}",
        f"   - source_annotation = {result.annotation_name}",
        f"   - static_aspect_definition = {result.definition_name}",
        "   - alarms:",
    ]
    current = None
    for alarm in sorted(result.alarms, key=lambda a: (a.line, a.step, a.aspect)):
        if alarm.line != current:
            current = alarm.line
            lines.append(f"      - line {alarm.line}")
        lines.append(f"         {alarm.aspect} = {render_value(alarm.value)} at step {alarm.step}")
    lines.append(">")
    return "\n".join(lines) + "\n"


def result_document(result: AnalysisResult) -> dict:
    return {
        "procedure": result.qualifier,
        "source_annotation": result.annotation_name,
        "static_aspect_definition": result.definition_name,
        "traversal_order": result.order,
        "alarms": [
            {"line": a.line, "step": a.step, "aspect": a.aspect, "value": render_value(a.value),
             "point": a.point, "label": a.label, "traversal": a.traversal}
            for a in result.alarms
        ],
    }


def render_machine(results) -> str:
    return json.dumps([result_document(r) for r in results], indent=2, sort_keys=True) + "\n"
