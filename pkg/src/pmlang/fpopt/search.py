"""Candidate search and winner selection."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .evaluate import ErrorEstimate, SamplePlan, SampleSet, bits_of_error, build_samples, eval_double
from .expr import positions, replace_at, size, to_text
from .rules import RULES, simplify

ITERATIONS = 3
CANDIDATE_CAP = 64
EXPAND_PER_ITERATION = 8


@dataclass
class RewriteCandidate:
    tree: tuple
    rules: tuple  # names of the rules applied, in order
    error: ErrorEstimate

    @property
    def ops(self) -> int:
        return size(self.tree)

    @property
    def text(self) -> str:
        return to_text(self.tree)

    def rank(self):
        return (self.error.mean, self.ops, self.text)


class _Evaluator:
    def __init__(self, samples: SampleSet):
        self.samples = samples
        self.cache: dict = {}

    def values(self, t) -> np.ndarray:
        return np.broadcast_to(eval_double(t, self.samples.points, self.cache), self.samples.exact.shape)

    def error(self, t) -> ErrorEstimate:
        return ErrorEstimate.of(bits_of_error(self.values(t), self.samples.exact))

    def holds(self, conds) -> bool:
        for pred, sub in conds:
            v = self.values(sub)
            if pred == "nonzero" and not np.all(v != 0):
                return False
            if pred == "nonneg" and not np.all(v >= 0):
                return False
        return True


def _prune(pool: dict, keep, cap: int) -> dict:
    """Keep candidates that are best on at least one sample, then the best ``cap`` by rank."""
    cands = list(pool.values())
    bits = np.stack([c.error.bits for c in cands])
    best = bits.min(axis=0)
    winners = [c for c, row in zip(cands, bits) if np.any(row <= best)]
    winners.sort(key=RewriteCandidate.rank)
    out = {c.tree: c for c in winners[:cap]}
    out.setdefault(keep.tree, keep)
    return out


def search_rewrites(
    tree,
    plan: SamplePlan,
    samples: Optional[SampleSet] = None,
    iterations: int = ITERATIONS,
    cap: int = CANDIDATE_CAP,
) -> list[RewriteCandidate]:
    """Candidates other than the input, best first."""
    samples = samples if samples is not None else build_samples(tree, plan)
    ev = _Evaluator(samples)
    start = RewriteCandidate(tree, (), ev.error(tree))
    pool = {tree: start}
    expanded: set = set()
    seen = {tree}
    for _ in range(iterations):
        frontier = [c for c in sorted(pool.values(), key=RewriteCandidate.rank) if c.tree not in expanded]
        frontier = frontier[:EXPAND_PER_ITERATION]
        if not frontier:
            break
        fresh = {}
        for cand in frontier:
            expanded.add(cand.tree)
            for path, sub in positions(cand.tree):
                for rule in RULES:
                    for rep, conds in rule.apply(sub):
                        new, sconds = simplify(replace_at(cand.tree, path, rep))
                        if new in seen:
                            continue
                        seen.add(new)
                        if not ev.holds(conds + sconds):
                            continue
                        fresh[new] = RewriteCandidate(new, cand.rules + (rule.name,), ev.error(new))
        if not fresh:
            break
        pool.update(fresh)
        pool = _prune(pool, start, cap)
    return sorted((c for c in pool.values() if c.tree != tree), key=RewriteCandidate.rank)


@dataclass
class AnalysisResult:
    id: int
    original: tuple
    winner: tuple
    input_bits: float
    output_bits: float
    rules: tuple
    samples: int
    seed: int
    label: str = ""
    ranges: dict = field(default_factory=dict)
    line: int = 0
    original_text: str = ""
    winner_text: str = ""

    @property
    def improved(self) -> bool:
        return self.winner != self.original and self.output_bits < self.input_bits

    @property
    def note(self) -> str:
        return "improved" if self.improved else "no improvement found"


def select_and_annotate(
    original,
    candidates: list[RewriteCandidate],
    plan: SamplePlan,
    samples: Optional[SampleSet] = None,
    ident: int = 0,
    admissible: Optional[Callable[[tuple], bool]] = None,
) -> AnalysisResult:
    """Lowest mean bits wins; ties go to fewer operations, then to the printed form.

    ``admissible`` can veto a candidate (for example one that no longer
    type-checks in its context); the original is always admissible.
    """
    samples = samples if samples is not None else build_samples(original, plan)
    ev = _Evaluator(samples)
    base = RewriteCandidate(original, (), ev.error(original))
    ranked = [RewriteCandidate(c.tree, c.rules, ev.error(c.tree)) for c in candidates]
    ranked.append(base)
    ranked.sort(key=RewriteCandidate.rank)
    win = base
    for c in ranked:
        if c.tree == original or admissible is None or admissible(c.tree):
            win = c
            break
    assert win.error.mean <= base.error.mean
    if win.tree != original and not win.error.mean < base.error.mean:
        win = base  # equal accuracy: keep the user's expression
    return AnalysisResult(
        ident, original, win.tree, base.error.mean, win.error.mean, win.rules, samples.size, plan.seed,
        ranges={k: str(v) for k, v in plan.ranges.items()},
    )


def optimize(tree, plan: SamplePlan, ident: int = 0, admissible=None, **kw) -> AnalysisResult:
    samples = build_samples(tree, plan)
    cands = search_rewrites(tree, plan, samples, **kw)
    return select_and_annotate(tree, cands, plan, samples, ident, admissible)
