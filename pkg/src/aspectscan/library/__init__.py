"""Shipped static-aspect definitions, their annotation labels and fixtures."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import AspectScanError
from ..sable import SableProgram, SourceAnnotation, parse_sable, parse_source_annotation

ENV_VAR = "ASPECTSCAN_LIBRARY"

# name -> (file, annotation labels)
ENTRIES = {
    "source_tainting": ("source_tainting.sable",
                        frozenset({"source", "sink", "sanitize", "updUse", "safe", "options"})),
    "check_endproc": ("check_endproc.sable", frozenset({"checks", "calls", "source"})),
    "check_calls": ("check_calls.sable",
                    frozenset({"checks", "conditions", "events", "safeOutputs"})),
    "involved_symbols": ("involved_symbols.sable", frozenset({"expected", "forbidden"})),
    "contextual_value": ("contextual_value.sable",
                         frozenset({"checks", "setFunctions", "expectedValues"})),
}
EXAMPLES = {
    "running_example": ("running_example.sable", frozenset({"source", "sink"})),
}


class LibraryError(AspectScanError):
    pass


def library_dir(override: str | os.PathLike | None = None) -> Path:
    if override:
        return Path(override)
    env = os.environ.get(ENV_VAR)
    if env:
        return Path(env)
    return Path(__file__).parent


@dataclass(frozen=True)
class Fixture:
    name: str
    entry: str
    source_path: Path
    qualifier: str
    annotation_path: Path
    definition_path: Path
    expected: tuple          # ((line, aspect), ...) sorted
    variant: str
    note: str = ""
    known_false_positive: bool = False
    steps: tuple = ()

    @property
    def source_text(self) -> str:
        return self.source_path.read_text(encoding="utf-8")

    @property
    def annotation(self) -> SourceAnnotation:
        return parse_source_annotation(self.annotation_path.read_text(encoding="utf-8"))


@dataclass(frozen=True)
class LibraryEntry:
    name: str
    path: Path
    sable_text: str
    annotation_schema: frozenset
    fixtures: tuple = field(default=())

    @property
    def program(self) -> SableProgram:
        return parse_sable(self.sable_text)


def _entry_table() -> dict:
    return {**ENTRIES, **EXAMPLES}


def entry_path(name: str, directory=None) -> Path:
    table = _entry_table()
    if name not in table:
        raise LibraryError(f"unknown library entry {name!r}; known: {', '.join(sorted(table))}")
    return library_dir(directory) / table[name][0]


def load_entry(name: str, directory=None) -> LibraryEntry:
    path = entry_path(name, directory)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise LibraryError(f"cannot read library entry {name!r}: {exc}") from None
    fixtures = tuple(f for f in load_fixture_corpus(directory) if f.entry == name)
    return LibraryEntry(name, path, text, _entry_table()[name][1], fixtures)


def load_program(name: str, directory=None) -> SableProgram:
    entry = load_entry(name, directory)
    try:
        return entry.program
    except AspectScanError as exc:
        raise LibraryError(f"library entry {name!r} is corrupt: {exc}") from None


def load_library(directory=None) -> dict:
    """The five shipped definitions, parsed."""
    return {name: load_program(name, directory) for name in ENTRIES}


def load_fixture_corpus(directory=None) -> list:
    root = library_dir(directory) / "fixtures"
    out = []
    if not root.is_dir():
        return out
    for sub in sorted(p for p in root.iterdir() if p.is_dir()):
        manifest_path = sub / "fixture.json"
        if not manifest_path.exists():
            continue
        m = json.loads(manifest_path.read_text(encoding="utf-8"))
        if "definition" in m:
            definition = sub / m["definition"]
        else:
            definition = library_dir(directory) / _entry_table()[m["entry"]][0]
        for case in m["cases"]:
            expected = tuple(sorted((a["line"], a["aspect"]) for a in case["alarms"]))
            steps = tuple(sorted(a["step"] for a in case["alarms"] if "step" in a))
            out.append(Fixture(
                name=f"{sub.name}/{case['variant']}",
                entry=m["entry"],
                source_path=sub / case["source"],
                qualifier=f"{case['source']}:{m['procedure']}",
                annotation_path=sub / m["annotation"],
                definition_path=definition,
                expected=expected,
                variant=case["variant"],
                note=m.get("note", ""),
                known_false_positive=bool(case.get("known_false_positive")),
                steps=steps,
            ))
    return out
