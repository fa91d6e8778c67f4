"""Glue for the common source -> checked module -> plan path."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .checker import CheckResult, check_module
from .diagnostics import CompileError, Diagnostic, sort_diagnostics
from .frontend import parse_module, tokenize
from .frontend import nodes as N


@dataclass
class Compiled:
    module: Optional[N.SourceModule]
    checked: Optional[CheckResult]
    diagnostics: list

    @property
    def ok(self) -> bool:
        return self.checked is not None and self.checked.ok


def parse_source(text: str) -> N.SourceModule:
    return parse_module(tokenize(text))


def compile_source(text: str, base_dir: Path | None = None) -> Compiled:
    """Parse and check; lexical and syntax errors come back as a single diagnostic."""
    try:
        module = parse_source(text)
    except CompileError as e:
        return Compiled(None, None, [e.diagnostic()])
    return check_parsed(module, base_dir)


def check_parsed(module: N.SourceModule, base_dir: Path | None = None) -> Compiled:
    try:
        res = check_module(module, base_dir=base_dir)
    except CompileError as e:
        return Compiled(module, None, [e.diagnostic()])
    return Compiled(module, res, sort_diagnostics(res.diagnostics))


def compile_file(path: str | Path) -> Compiled:
    """Read and check a source file. Raises OSError when it cannot be read."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    return compile_source(text, path.parent)


def first_error(diags) -> Optional[Diagnostic]:
    errs = [d for d in diags if d.is_error]
    return errs[0] if errs else None
