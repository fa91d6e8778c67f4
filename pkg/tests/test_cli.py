import json
import shutil

import pytest

from pmlang.cli import EXIT_DIAGNOSTICS, EXIT_INTERNAL, EXIT_OK, EXIT_RUNTIME, main, parse_param_file
from pmlang.pipeline import compile_file

from conftest import CORPUS, PROGRAMS


@pytest.fixture
def workdir(tmp_path):
    for name in ("gray_scott.pm", "lennard_jones.pm", "md.dim"):
        shutil.copy(PROGRAMS / name, tmp_path / name)
    return tmp_path


def test_check_ok_and_diagnostics(capsys):
    assert main(["check", str(PROGRAMS / "gray_scott.pm")]) == EXIT_OK
    bad = sorted((CORPUS / "errors").glob("*.pm"))[0]
    assert main(["check", str(bad)]) == EXIT_DIAGNOSTICS
    err = capsys.readouterr().err
    line = [ln for ln in err.splitlines() if " E" in ln][0]
    assert line.startswith(str(bad) + ":")


def test_json_lines_format(capsys):
    bad = sorted((CORPUS / "errors").glob("*.pm"))[0]
    assert main(["check", "--format", "json-lines", str(bad)]) == EXIT_DIAGNOSTICS
    rows = [json.loads(ln) for ln in capsys.readouterr().err.splitlines()]
    pos, code = bad.with_suffix(".golden").read_text().split()
    errs = [r for r in rows if r["severity"] == "error"]
    assert f"{errs[0]['line']}:{errs[0]['col']} {errs[0]['code']}" == f"{pos} {code}"


def test_missing_file_is_io_error(tmp_path):
    assert main(["check", str(tmp_path / "absent.pm")]) == EXIT_INTERNAL


def test_ir_prints_plan(capsys):
    assert main(["ir", str(PROGRAMS / "gray_scott.pm")]) == EXIT_OK
    assert capsys.readouterr().out.strip()


def test_run_writes_snapshots(workdir):
    out = workdir / "out"
    code = main(["run", str(workdir / "gray_scott.pm"), "-p", "n=32", "-p", "t_end=50", "--every", "25", "--out", str(out)])
    assert code == EXIT_OK
    snaps = sorted(p.name for p in out.glob("*.csv"))
    assert snaps == ["gray_scott_100.csv", "gray_scott_25.csv", "gray_scott_50.csv", "gray_scott_75.csv"]
    stats = json.loads((out / "gray_scott.stats.json").read_text())
    assert stats["steps"] == 100


def test_param_overrides_and_file(workdir):
    pf = workdir / "gs.params"
    pf.write_text("# control file\nn = 16\nt_end = 5.0  # short\n")
    assert parse_param_file(pf) == {"n": "16", "t_end": "5.0"}
    out = workdir / "o"
    assert main(["run", str(workdir / "gray_scott.pm"), "--params", str(pf), "-p", "t_end=2", "--every", "1", "--out", str(out)]) == 0
    stats = json.loads((out / "gray_scott.stats.json").read_text())
    assert stats["steps"] == 4  # the flag wins over the file
    assert stats["params"]["F"] == 0.015 and stats["params"]["n"] == 16


def test_bad_param_is_a_diagnostic(workdir, capsys):
    assert main(["run", str(workdir / "gray_scott.pm"), "-p", "F=7"]) == EXIT_DIAGNOSTICS
    assert "E5001" in capsys.readouterr().err
    assert main(["run", str(workdir / "gray_scott.pm"), "-p", "bogus=1"]) == EXIT_DIAGNOSTICS


def test_overlapping_pair_is_a_runtime_fault(workdir, capsys):
    src = (workdir / "lennard_jones.pm").read_text()
    src = src.replace("create_particles(topo, grid, n_side)", 'load_particles(topo, "pair.dat", pos[0], pos[1])')
    (workdir / "overlap.pm").write_text(src)
    (workdir / "pair.dat").write_text("5.0 5.0\n5.0 5.0\n8.0 8.0\n")
    assert main(["run", str(workdir / "overlap.pm"), "-p", "t_end=0.01"]) == EXIT_RUNTIME
    err = capsys.readouterr().err
    assert "E6001" in err and "overlap.pm:" in err


def test_opt_writes_annotations_and_applies(workdir):
    out = workdir / "ann"
    assert main(["opt", str(workdir / "gray_scott.pm"), "--samples", "64", "--apply", "--out", str(out)]) == EXIT_OK
    text = (out / "gray_scott.fpopt.txt").read_text()
    assert "[1] line 34" in text and "improved" in text
    # the dimensions file is resolved next to the rewritten source
    shutil.copy(workdir / "md.dim", out / "md.dim")
    assert compile_file(out / "gray_scott.opt.pm").ok
    assert main(["check", str(out / "gray_scott.opt.pm")]) == EXIT_OK


def test_opt_without_marks(capsys):
    assert main(["opt", str(PROGRAMS / "nbody.pm")]) == EXIT_DIAGNOSTICS
    assert "@optimize" in capsys.readouterr().err
