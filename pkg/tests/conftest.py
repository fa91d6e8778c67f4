from pathlib import Path

import pytest

from pmlang.lowering import lower
from pmlang.pipeline import compile_file, compile_source

ROOT = Path(__file__).resolve().parent.parent
PROGRAMS = ROOT / "programs"
CORPUS = Path(__file__).resolve().parent / "corpus"


def program(name: str):
    comp = compile_file(PROGRAMS / f"{name}.pm")
    assert comp.ok, comp.diagnostics
    return comp


def plan_of(name: str):
    return lower(program(name).checked)


def check_text(text: str, base_dir=PROGRAMS):
    return compile_source(text, base_dir)


def errors(comp):
    return [d for d in comp.diagnostics if d.is_error]


@pytest.fixture
def programs_dir():
    return PROGRAMS
