import sys
from pathlib import Path

import pytest

from aspectscan.library import library_dir

TESTS = Path(__file__).parent
RUNNING = library_dir() / "fixtures" / "running_example"


@pytest.fixture
def running_paths():
    return {
        "source": RUNNING / "source_code.py",
        "annotation": RUNNING / "source_annotation.json",
        "sable": RUNNING / "static_aspect_definition.sable",
        "golden": TESTS / "golden" / "running_example.scfg.txt",
    }


def pytest_terminal_summary(terminalreporter):
    acceptance = sys.modules.get("test_acceptance")
    if acceptance is None or not acceptance.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in acceptance.summary_lines():
        terminalreporter.write_line(line)
