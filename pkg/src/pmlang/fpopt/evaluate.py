"""Sampling, double-precision evaluation, the extended-precision oracle and bits of error."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import mpmath
import numpy as np

from .expr import free_vars

ORACLE_PRECISIONS = (64, 128, 256, 512, 1024, 2048, 4096)
MAX_BITS = 64.0
DBL_MAX = np.finfo(np.float64).max


class NoValidSamples(Exception):
    pass


# --------------------------------------------------------------- sampling

def ordinal(x: np.ndarray) -> np.ndarray:
    """Map doubles to integers preserving order, adjacent doubles differing by one."""
    i = np.asarray(x, dtype=np.float64).view(np.int64)
    return np.where(i < 0, np.int64(-0x8000000000000000) - i, i)


def from_ordinal(o: np.ndarray) -> np.ndarray:
    o = np.asarray(o, dtype=np.int64)
    i = np.where(o < 0, np.int64(-0x8000000000000000) - o, o)
    return i.view(np.float64)


@dataclass(frozen=True)
class VarRange:
    lo: float = -DBL_MAX
    hi: float = DBL_MAX
    lo_open: bool = False
    hi_open: bool = False

    @property
    def bounded(self) -> bool:
        return math.isfinite(self.lo) and math.isfinite(self.hi) and self.lo > -DBL_MAX and self.hi < DBL_MAX

    def contains(self, x: np.ndarray) -> np.ndarray:
        ok = (x > self.lo) if self.lo_open else (x >= self.lo)
        return ok & ((x < self.hi) if self.hi_open else (x <= self.hi))

    @classmethod
    def from_node(cls, r) -> "VarRange":
        lo = -DBL_MAX if r.lo is None or r.lo == -math.inf else float(r.lo)
        hi = DBL_MAX if r.hi is None or r.hi == math.inf else float(r.hi)
        return cls(lo, hi, r.lo_open, r.hi_open)

    def __str__(self):
        lo = "-inf" if self.lo <= -DBL_MAX else f"{self.lo:g}"
        hi = "inf" if self.hi >= DBL_MAX else f"{self.hi:g}"
        return f"{'(' if self.lo_open else '['}{lo}, {hi}{')' if self.hi_open else ']'}"


FULL = VarRange()


@dataclass
class SamplePlan:
    ranges: dict = field(default_factory=dict)  # variable -> VarRange; missing means FULL
    samples: int = 256
    seed: int = 0

    def range_of(self, name: str) -> VarRange:
        return self.ranges.get(name, FULL)


def _draw(rng: np.random.Generator, r: VarRange, n: int) -> np.ndarray:
    if r.bounded:
        x = r.lo + (r.hi - r.lo) * rng.random(n)
    else:
        # uniform over the doubles in the interval: exponent-uniform in value
        lo, hi = ordinal(np.array([r.lo]))[0], ordinal(np.array([r.hi]))[0]
        x = from_ordinal(rng.integers(lo, hi, size=n, endpoint=True))
    return x[np.isfinite(x) & r.contains(x)]


def draw_points(plan: SamplePlan, names, n: int, stream: int) -> dict:
    """``n`` candidate points; each variable has its own counter-based stream."""
    out = {}
    for j, name in enumerate(sorted(names)):
        rng = np.random.Generator(np.random.Philox(key=plan.seed, counter=[stream, j, 0, 0]))
        vals = np.empty(0)
        while vals.size < n:
            vals = np.concatenate([vals, _draw(rng, plan.range_of(name), n)])
        out[name] = vals[:n]
    return out


# ------------------------------------------------------------- evaluation

def fpow(a: np.ndarray, k: int) -> np.ndarray:
    """Integer power with the same operation sequence as the runtime."""
    if k == 1:
        return np.array(a, copy=True)
    if k == 2:
        return a * a
    return np.power(a, float(k))


def eval_double(t, env: dict, cache: Optional[dict] = None) -> np.ndarray:
    if cache is not None:
        hit = cache.get(t)
        if hit is not None:
            return hit
    op = t[0]
    if op == "num":
        v = np.float64(float(t[1]))
    elif op == "var":
        v = env[t[1]]
    else:
        with np.errstate(all="ignore"):
            if op == "neg":
                v = np.negative(eval_double(t[1], env, cache))
            elif op == "sqrt":
                v = np.sqrt(eval_double(t[1], env, cache))
            elif op == "pow":
                v = fpow(eval_double(t[1], env, cache), t[2])
            elif op == "powr":
                v = np.power(eval_double(t[1], env, cache), eval_double(t[2], env, cache))
            else:
                a = eval_double(t[1], env, cache)
                b = eval_double(t[2], env, cache)
                v = {"+": np.add, "-": np.subtract, "*": np.multiply, "/": np.true_divide}[op](a, b)
    if cache is not None:
        cache[t] = v
    return v


class _Undefined(Exception):
    pass


class _Unresolved(Exception):
    """The interval straddles a point where the operation is undefined."""


def _iv_sign(x) -> int:
    """-1, 0 or 1 when the interval decides the sign; raises _Unresolved otherwise."""
    if x.a > 0:
        return 1
    if x.b < 0:
        return -1
    if x.a == 0 and x.b == 0:
        return 0
    raise _Unresolved


def _oracle(t, point: dict):
    iv = mpmath.iv
    op = t[0]
    if op == "num":
        q: Fraction = t[1]
        return iv.mpf(q.numerator) / q.denominator
    if op == "var":
        return iv.mpf(point[t[1]])
    if op == "neg":
        return -_oracle(t[1], point)
    if op == "sqrt":
        a = _oracle(t[1], point)
        if a.b < 0:
            raise _Undefined
        if a.a < 0:
            _iv_sign(a)
        return iv.sqrt(a)
    if op == "pow":
        a = _oracle(t[1], point)
        if t[2] < 0 and _iv_sign(a) == 0:
            raise _Undefined
        return a ** t[2]
    a = _oracle(t[1], point)
    b = _oracle(t[2], point)
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if op == "/":
        if _iv_sign(b) == 0:
            raise _Undefined
        return a / b
    if op == "powr":
        sa = _iv_sign(a)
        if sa < 0 or (sa == 0 and _iv_sign(b) <= 0):
            raise _Undefined
        return a**b
    raise ValueError(op)


def oracle_value(t, point: dict) -> Optional[float]:
    """Correctly rounded double of the exact value, or None where undefined.

    Evaluates in interval arithmetic, doubling the precision until both
    ends of the enclosure round to the same double.
    """
    iv = mpmath.iv
    saved = iv.prec
    try:
        for prec in ORACLE_PRECISIONS:
            iv.prec = prec
            try:
                v = _oracle(t, point)
            except _Undefined:
                return None
            except _Unresolved:
                continue
            lo, hi = float(v.a), float(v.b)
            if lo == hi:
                return lo
        return None
    finally:
        iv.prec = saved


def bits_of_error(computed: np.ndarray, exact: np.ndarray) -> np.ndarray:
    """log2(1 + ulps between computed and exact), capped at 64."""
    computed = np.broadcast_to(np.asarray(computed, dtype=np.float64), np.shape(exact))
    exact = np.asarray(exact, dtype=np.float64)
    out = np.full(exact.shape, MAX_BITS)
    both = ~np.isnan(computed) & ~np.isnan(exact)
    a = ordinal(computed[both])
    b = ordinal(exact[both])
    same = (a >= 0) == (b >= 0)
    # ordinals of opposite sign can differ by more than int64 holds
    d = np.where(
        same,
        np.abs(np.where(same, a - b, 0)).astype(np.float64),
        np.abs(a).astype(np.float64) + np.abs(b).astype(np.float64),
    )
    out[both] = np.minimum(np.log2(1.0 + d), MAX_BITS)
    return out


# ---------------------------------------------------------------- samples

@dataclass
class SampleSet:
    points: dict  # variable -> ndarray of S values
    exact: np.ndarray  # correctly rounded oracle values

    @property
    def size(self) -> int:
        return self.exact.size


def build_samples(t, plan: SamplePlan) -> SampleSet:
    """S valid points with oracle values; undefined points are redrawn."""
    names = sorted(free_vars(t))
    S = plan.samples
    pts = {n: [] for n in names}
    exact = []
    attempts = 0
    stream = 0
    while len(exact) < S and attempts < 100 * S:
        batch = draw_points(plan, names, S, stream)
        stream += 1
        for i in range(S):
            attempts += 1
            point = {n: float(batch[n][i]) for n in names}
            v = oracle_value(t, point)
            if v is None:
                continue
            for n in names:
                pts[n].append(point[n])
            exact.append(v)
            if len(exact) == S or attempts >= 100 * S:
                break
    if len(exact) < max(1, S // 10):
        raise NoValidSamples(f"only {len(exact)} valid samples found in {attempts} attempts")
    return SampleSet({n: np.array(v) for n, v in pts.items()}, np.array(exact))


@dataclass
class ErrorEstimate:
    bits: np.ndarray
    mean: float
    count: int

    @classmethod
    def of(cls, bits: np.ndarray) -> "ErrorEstimate":
        return cls(bits, float(np.mean(bits)) if bits.size else 0.0, int(bits.size))


def error_on(t, samples: SampleSet, cache: Optional[dict] = None) -> ErrorEstimate:
    got = eval_double(t, samples.points, cache)
    return ErrorEstimate.of(bits_of_error(got, samples.exact))


def estimate_error(t, plan: SamplePlan) -> ErrorEstimate:
    return error_on(t, build_samples(t, plan))
