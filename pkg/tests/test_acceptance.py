"""One check per acceptance criterion; each prints a PASS/FAIL line."""

import filecmp
import itertools
import statistics
import time

import numpy as np
import pytest

from pmlang import typesys as T
from pmlang.fpopt import SamplePlan, VarRange, apply_all, analyse_module, build_samples, collect_marked, optimize
from pmlang.fpopt.search import _Evaluator
from pmlang.lowering import lower
from pmlang.pipeline import check_parsed, compile_file, compile_source
from pmlang.runtime import (
    DomainBox,
    RunOptions,
    brute_force_neighbors,
    build_cell_list,
    create_grid,
    create_random,
    lj_energy,
    lj_force,
    pse_laplacian,
    run,
)

from conftest import CORPUS, PROGRAMS, errors, plan_of
from deduction import ACC, REAL, TT, VEL, annotated, deduce
from table_oracle import KINDS, TABLES, instances


@pytest.fixture
def report(capsys):
    def emit(n, name, ok, detail=""):
        with capsys.disabled():
            print(f"\n[criterion {n}] {'PASS' if ok else 'FAIL'} {name}: {detail}")
        assert ok, detail

    return emit


def _plan_of_text(text):
    comp = compile_source(text, PROGRAMS)
    assert comp.ok, comp.diagnostics
    return lower(comp.checked)


# ------------------------------------------------------------------ 1

def test_1_type_tables(report):
    cells = deviations = 0
    for op, (row, col) in itertools.product(TABLES, itertools.product(KINDS, KINDS)):
        cell = TABLES[op][(row, col)]
        cells += 1
        for t1, t2, X, Y, n, m in instances(row, col):
            if T.binary_result(op, t1, t2) != cell(X, Y, n, m):
                deviations += 1
    report(1, "type inference tables", cells == 5 * 16 and deviations == 0,
           f"{cells} cells, {deviations} deviations")


# ------------------------------------------------------------------ 2

def test_2_dimension_deduction(report):
    comp, outer, steps = deduce(2)
    got = [annotated(comp, s) for s in steps]
    errs = errors(comp)
    ok2 = (
        [g.type for g in got] == [REAL] * 4
        and [g.dim for g in got] == [ACC, ACC, ACC, ACC * TT**2]
        and annotated(comp, outer).is_error
        and len(errs) == 1 and errs[0].code == "E4001" and errs[0].span == outer.span
    )
    comp1, outer1, _ = deduce(1)
    at = annotated(comp1, outer1)
    ok1 = comp1.ok and at.type == REAL and at.dim == VEL
    report(2, "dimension deduction", ok2 and ok1,
           f"steps {[str(g.dim) for g in got]}, outer error {errs[0].code if errs else None}, exponent 1 gives {at.dim}")


# ------------------------------------------------------------------ 3

def _pse_error(n):
    ps = create_grid(DomainBox.cube(2, 0.0, 1.0, True), n)
    nl = build_cell_list(ps, 4.0 * ps.h)
    f = np.sin(2 * np.pi * ps.pos[:, 0])
    exact = -(2 * np.pi) ** 2 * f
    lap = pse_laplacian(ps, f, nl, eps=ps.h)
    return float(np.linalg.norm(lap - exact) / np.linalg.norm(exact))


def test_3_pse_laplacian(report):
    t0 = time.perf_counter()
    e64, e128 = _pse_error(64), _pse_error(128)
    dt = time.perf_counter() - t0
    ratio = e64 / e128
    report(3, "PSE Laplacian", e128 <= 5e-2 and ratio >= 3.5 and dt < 10.0,
           f"err(64)={e64:.3e} err(128)={e128:.3e} ratio={ratio:.2f} time={dt:.2f}s")


# ------------------------------------------------------------------ 4

def test_4_gray_scott(report):
    sd = {}
    bounds = [np.inf, -np.inf]

    def on_step(step, t, it):
        ps = it.particles["c"]
        U, V = ps.get("U"), ps.get("V")
        bounds[0] = min(bounds[0], U.min(), V.min())
        bounds[1] = max(bounds[1], U.max(), V.max())
        if step == 10:
            sd[10] = float(U.std())

    t0 = time.perf_counter()
    res = run(plan_of("gray_scott"), {"n": 64, "dt": 0.5, "t_end": 2000.0},
              RunOptions(on_step=on_step, write_stats=False))
    dt = time.perf_counter() - t0
    sd_end = float(res.particles["c"].get("U").std())
    growth = sd_end / sd[10]
    ok_a = bounds[0] >= -0.05 and bounds[1] <= 1.2

    totals = []
    diff = run(plan_of("gray_scott_diffusion"), {},
               RunOptions(on_step=lambda s, t, it: totals.append(float(it.particles["c"].get("U").sum())),
                          write_stats=False))
    drift = max(abs(x - totals[0]) for x in totals) / abs(totals[0])
    report(4, "Gray-Scott", res.steps == 4000 and ok_a and growth >= 10.0 and drift <= 1e-8 and dt < 120,
           f"steps={res.steps} range=[{bounds[0]:.3f}, {bounds[1]:.3f}] sd growth={growth:.1f}x "
           f"diffusion drift={drift:.1e} over {diff.steps} steps, time={dt:.1f}s")


# ------------------------------------------------------------------ 5

def _lj_run(t_end):
    rec = []

    def on_step(step, t, it):
        ps = it.particles["parts"]
        v = ps.get("vel")
        rec.append((v.sum(axis=0).copy(), float(np.abs(v).sum()), float(0.5 * (v * v).sum() + ps.get("Epot").sum())))

    res = run(plan_of("lennard_jones"), {"t_end": t_end, "delta_t": 1e-4},
              RunOptions(on_step=on_step, write_stats=False))
    return res, rec


def test_5_lennard_jones(report):
    res, rec = _lj_run(1.0)
    n = res.particles["parts"].n
    P = np.array([r[0] for r in rec[:1000]])
    mom = float(np.abs(P - P[0]).max() / rec[0][1])
    E = np.array([r[2] for r in rec])
    drift = float(np.abs(E - E[0]).max() / abs(E[0]))
    rmin = 2.0 ** (1.0 / 6.0)
    f0 = float(abs(lj_force(np.array([[rmin, 0.0]]), 1.0, 1.0)).max())
    e_sigma = float(lj_energy(np.array([1.0]), 1.0, 1.0)[0])
    same = True
    for seed in range(10):
        rng = np.random.default_rng(seed)
        ps = create_random(DomainBox.cube(2, 0.0, 10.0, True), 500, rng)
        nl = build_cell_list(ps, 2.5)
        ref = brute_force_neighbors(ps, 2.5)
        same &= all(set(nl.neighbors(p).tolist()) == ref[p] for p in range(ps.n))
    ok = n == 400 and res.steps == 10000 and mom <= 1e-10 and drift <= 1e-3 and f0 <= 1e-12 and e_sigma == 0.0 and same
    report(5, "Lennard-Jones", ok,
           f"N={n} momentum={mom:.1e} energy drift={drift:.1e} over {res.steps} steps, "
           f"|F(r_min)|={f0:.1e} E(sigma)={e_sigma} neighbor sets identical={same}")


# ------------------------------------------------------------------ 6

def test_6a_sqrt_cancellation(report):
    from pmlang.fpopt.expr import to_text
    from pmlang.frontend.parser import parse_expression
    from pmlang.fpopt import from_ast

    t = from_ast(parse_expression("sqrt(x + 1.0) - sqrt(x)"))[0]
    res = optimize(t, SamplePlan({"x": VarRange(1e12, 1e16)}, 256, 0))
    report("6a", "fpopt cancellation", res.input_bits >= 20 and res.output_bits <= 1,
           f"{res.input_bits:.2f} -> {res.output_bits:.3f} bits, winner {to_text(res.winner)}")


LJ_RANGES = {
    "sigma": VarRange(1e-2, 1e-1),
    "eps": VarRange(1e-14, 1e-13),
    "r_s_pq2": VarRange(0.0, VarRange().hi, lo_open=True),
}


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_6b_range_sensitivity(report, seed):
    comp = compile_file(PROGRAMS / "lennard_jones.pm")
    me = collect_marked(comp.module)[0]
    ranged = SamplePlan(LJ_RANGES, 256, seed)
    in_range = build_samples(me.tree, ranged)
    r = optimize(me.tree, ranged)
    u = optimize(me.tree, SamplePlan({}, 256, seed))
    ev = _Evaluator(in_range)
    br, bu, b0 = ev.error(r.winner).mean, ev.error(u.winner).mean, ev.error(me.tree).mean
    report("6b", f"fpopt range sensitivity (seed {seed})", br <= bu,
           f"in-range bits: original {b0:.2f}, range-aware winner {br:.2f}, unrestricted winner {bu:.2f}")


# ------------------------------------------------------------------ 7

def test_7_optimized_runtime(report):
    comp = compile_file(PROGRAMS / "gray_scott.pm")
    res = analyse_module(comp.module, samples=128, base_dir=PROGRAMS)
    new = check_parsed(apply_all(comp.module, res, PROGRAMS), PROGRAMS)
    assert new.ok and res[1].improved
    plans = {"original": plan_of("gray_scott"), "optimized": lower(new.checked)}
    params = {"n": 64, "t_end": 50.0}
    run(plans["original"], params, RunOptions(write_stats=False))  # warm-up
    times = {k: [] for k in plans}
    for _ in range(10):
        for k, p in plans.items():
            t0 = time.perf_counter()
            run(p, params, RunOptions(write_stats=False))
            times[k].append(time.perf_counter() - t0)
    mo, mn = statistics.median(times["original"]), statistics.median(times["optimized"])
    rel = mn / mo - 1.0
    report(7, "optimized vs original runtime", abs(rel) <= 0.10,
           f"median original {mo * 1e3:.1f} ms, optimized {mn * 1e3:.1f} ms, difference {rel:+.1%}")


# ------------------------------------------------------------------ 8

def test_8_diagnostics_corpus(report):
    cases = sorted((CORPUS / "errors").glob("*.pm"))
    bad = []
    for path in cases:
        errs = errors(compile_file(path))
        pos, code = path.with_suffix(".golden").read_text().split()
        got = [f"{e.span.line}:{e.span.col} {e.code}" for e in errs]
        if got != [f"{pos} {code}"]:
            bad.append((path.stem, got))
    report(8, "diagnostics corpus", len(cases) == 25 and not bad, f"{len(cases)} programs, mismatches {bad}")


# ------------------------------------------------------------------ 9

def test_9_determinism(report, tmp_path):
    dirs = []
    for i in range(3):
        out = tmp_path / f"run{i}"
        run(plan_of("lennard_jones"), {"n_side": 10, "box": 11.225, "t_end": 0.05},
            RunOptions(out_dir=out, every=100, seed=5, threads=1, write_stats=False))
        dirs.append(out)
    names = sorted(p.name for p in dirs[0].iterdir())
    same = bool(names) and all(
        sorted(p.name for p in d.iterdir()) == names and not filecmp.cmpfiles(dirs[0], d, names, shallow=False)[1]
        and not filecmp.cmpfiles(dirs[0], d, names, shallow=False)[2]
        for d in dirs[1:]
    )
    report(9, "determinism", same, f"{len(names)} snapshot files identical across 3 runs")
