"""Command-line entry point: ``pm check|ir|run|opt <file.pm>``.

Exit codes: 0 ok, 1 diagnostics, 2 I/O or internal error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .diagnostics import CompileError, Diagnostic, sort_diagnostics

EXIT_OK = 0
EXIT_DIAGNOSTICS = 1
EXIT_INTERNAL = 2
EXIT_RUNTIME = 3


@dataclass
class RunConfig:
    source: Path
    command: str
    params: dict = field(default_factory=dict)
    out_dir: Optional[Path] = None
    seed: int = 0
    every: int = 100
    threads: int = 1
    fmt: str = "text"
    apply: bool = False
    samples: int = 256


def parse_param_file(path: Path) -> dict:
    """``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for n, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise ValueError(f"{path}:{n}: expected 'name = value'")
        out[key.strip()] = value.strip()
    return out


def _kv(text: str) -> tuple[str, str]:
    key, sep, value = text.partition("=")
    if not sep or not key.strip():
        raise argparse.ArgumentTypeError(f"expected name=value, got '{text}'")
    return key.strip(), value.strip()


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pm", description="Check, lower, run and optimize particle programs.")
    ap.add_argument("command", choices=("check", "ir", "run", "opt"))
    ap.add_argument("source", type=Path)
    ap.add_argument("-p", "--param", action="append", type=_kv, default=[], metavar="NAME=VALUE")
    ap.add_argument("--params", type=Path, help="file of 'name = value' lines")
    ap.add_argument("--out", type=Path, help="output directory (run: snapshots, opt: annotations)")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--every", type=int, default=100, help="snapshot cadence in steps")
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--format", dest="fmt", choices=("text", "json-lines"), default="text")
    ap.add_argument("--apply", action="store_true", help="opt: also write the rewritten source")
    ap.add_argument("--samples", type=int, default=256, help="opt: sample points per expression")
    return ap


def config_from_args(argv=None) -> RunConfig:
    ns = build_parser().parse_args(argv)
    params = parse_param_file(ns.params) if ns.params else {}
    params.update(dict(ns.param))
    return RunConfig(ns.source, ns.command, params, ns.out, ns.seed, ns.every, ns.threads, ns.fmt, ns.apply, ns.samples)


class _Reporter:
    def __init__(self, cfg: RunConfig, stream=None):
        self.fmt = cfg.fmt
        self.name = str(cfg.source)
        self.stream = stream if stream is not None else sys.stderr

    def diagnostics(self, diags):
        for d in sort_diagnostics(diags):
            self.emit(d)

    def emit(self, d: Diagnostic):
        text = d.to_json(self.name) if self.fmt == "json-lines" else d.format(self.name)
        print(text, file=self.stream)

    def message(self, text: str):
        print(text, file=self.stream)


def _compile(cfg: RunConfig, rep: _Reporter):
    from .pipeline import compile_file

    try:
        comp = compile_file(cfg.source)
    except OSError as e:
        rep.message(f"pm: cannot read {cfg.source}: {e.strerror or e}")
        return None, EXIT_INTERNAL
    rep.diagnostics(comp.diagnostics)
    if not comp.ok:
        return None, EXIT_DIAGNOSTICS
    return comp, EXIT_OK


def cmd_check(cfg: RunConfig, rep: _Reporter) -> int:
    _, code = _compile(cfg, rep)
    return code


def _lower(comp, rep):
    from .lowering import lower

    try:
        return lower(comp.checked), EXIT_OK
    except CompileError as e:
        rep.emit(e.diagnostic())
        return None, EXIT_DIAGNOSTICS


def cmd_ir(cfg: RunConfig, rep: _Reporter, out=None) -> int:
    from .lowering import emit_ir

    comp, code = _compile(cfg, rep)
    if comp is None:
        return code
    plan, code = _lower(comp, rep)
    if plan is None:
        return code
    print(emit_ir(plan), end="", file=out if out is not None else sys.stdout)
    return EXIT_OK


def cmd_run(cfg: RunConfig, rep: _Reporter) -> int:
    from .runtime import RunOptions, RuntimeFault, run

    comp, code = _compile(cfg, rep)
    if comp is None:
        return code
    plan, code = _lower(comp, rep)
    if plan is None:
        return code
    opts = RunOptions(
        out_dir=cfg.out_dir, every=cfg.every, seed=cfg.seed, threads=cfg.threads, base_dir=cfg.source.parent
    )
    try:
        res = run(plan, cfg.params, opts)
    except CompileError as e:  # parameter binding
        rep.emit(e.diagnostic())
        return EXIT_DIAGNOSTICS
    except RuntimeFault as e:
        span = e.span if e.span is not None else comp.module.span
        step = f" (step {e.step})" if e.step is not None else ""
        rep.emit(Diagnostic(e.code, f"{e.message}{step}", span))
        return EXIT_RUNTIME
    rep.message(f"pm: {res.steps} steps, t = {res.t:g}, {res.stats.get('total', 0.0):.3f} s")
    return EXIT_OK


def cmd_opt(cfg: RunConfig, rep: _Reporter) -> int:
    from .fpopt import NoValidSamples, Unsupported, analyse_module, apply_all, collect_marked, write_annotations
    from .fpopt.marks import RecheckFailed
    from .frontend import format_module
    from .pipeline import check_parsed, parse_source

    comp, code = _compile(cfg, rep)
    if comp is None:
        return code
    module = comp.module
    base = cfg.source.parent
    try:
        if not collect_marked(module):
            rep.message(f"pm: {cfg.source} has no @optimize marks; put '@optimize' on the line before a statement")
            return EXIT_DIAGNOSTICS
        results = analyse_module(module, samples=cfg.samples, seed=cfg.seed, base_dir=base)
    except Unsupported as e:
        rep.message(f"pm: cannot analyse marked expression: {e}")
        return EXIT_DIAGNOSTICS
    except NoValidSamples as e:
        rep.message(f"pm: {e}")
        return EXIT_DIAGNOSTICS
    out_dir = cfg.out_dir if cfg.out_dir is not None else base
    stem = cfg.source.stem
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        path = write_annotations(out_dir / f"{stem}.fpopt.txt", module.name, results)
        rep.message(f"pm: wrote {path}")
        if cfg.apply:
            try:
                text = format_module(apply_all(module, results, base))
            except RecheckFailed as e:
                rep.emit(e.diagnostic())
                return EXIT_INTERNAL
            # the written text must itself check
            again = check_parsed(parse_source(text), base)
            if not again.ok:
                rep.diagnostics(again.diagnostics)
                return EXIT_INTERNAL
            target = out_dir / f"{stem}.opt.pm"
            target.write_text(text, encoding="utf-8")
            rep.message(f"pm: wrote {target}")
    except OSError as e:
        rep.message(f"pm: cannot write output: {e}")
        return EXIT_INTERNAL
    return EXIT_OK


COMMANDS = {"check": cmd_check, "ir": cmd_ir, "run": cmd_run, "opt": cmd_opt}


def main(argv=None) -> int:
    try:
        cfg = config_from_args(argv)
    except (OSError, ValueError) as e:
        print(f"pm: {e}", file=sys.stderr)
        return EXIT_INTERNAL
    rep = _Reporter(cfg)
    try:
        return COMMANDS[cfg.command](cfg, rep)
    except Exception as e:  # noqa: BLE001  last-resort contract: internal errors exit 2
        rep.message(f"pm: internal error: {type(e).__name__}: {e}")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
