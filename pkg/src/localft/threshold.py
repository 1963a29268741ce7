"""Level recursion ``P_{k+1} = C r^{k+1} P_k^2``, its closed form, fits and overheads."""

from __future__ import annotations

import decimal
import math
from dataclasses import dataclass, field
from decimal import Decimal
from typing import Optional, Sequence

import numpy as np


class FitError(ValueError):
    """Samples cannot identify the recursion parameters."""


@dataclass(frozen=True)
class RecursionParams:
    C: float
    r: float = 1.0

    def __post_init__(self) -> None:
        if not self.C > 0:
            raise ValueError("C must be positive")
        if not self.r >= 1:
            raise ValueError("r must be >= 1")


@dataclass(frozen=True)
class LevelRateSample:
    level: int
    p: float
    rate: float
    ci_lo: float = 0.0
    ci_hi: float = 1.0
    trials: int = 1
    mode: str = "baseline"
    dim: int = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.rate <= 1.0:
            raise ValueError("rate must be in [0, 1]")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")


def _wide() -> decimal.Context:
    # each level squares the previous rate, so rounding grows like 2**L; 50 digits leave plenty spare
    return decimal.Context(prec=50, Emin=decimal.MIN_EMIN, Emax=decimal.MAX_EMAX)


def iterate_recursion(params: RecursionParams, P0: float, L: int) -> list[float]:
    out = []
    with decimal.localcontext(_wide()):
        C, r, p = Decimal(params.C), Decimal(params.r), Decimal(P0)
        for k in range(L):
            p = C * r ** (k + 1) * p * p
            out.append(float(p))
    return out


def log_closed_form(params: RecursionParams, P0: float, L: int) -> float:
    """Natural log of ``P_L``; ``-inf`` when ``P0 == 0``."""
    if P0 == 0:
        return -math.inf
    lc, lr = math.log(params.C), math.log(params.r)
    return 2**L * (lc + 2 * lr + math.log(P0)) - lc - (L + 2) * lr


def closed_form(params: RecursionParams, P0: float, L: int) -> float:
    """``P_L = (C r^2 P0)^(2^L) / (C r^(L+2))``; reduces to ``(C P0)^(2^L) / C`` at ``r = 1``."""
    if P0 == 0:
        return 0.0
    with decimal.localcontext(_wide()):
        C, r = Decimal(params.C), Decimal(params.r)
        return float((C * r * r * Decimal(P0)) ** (2**L) / (C * r ** (L + 2)))


def threshold(params: RecursionParams) -> float:
    return 1.0 / params.C if params.r == 1 else 1.0 / (params.C * params.r**2)


@dataclass
class FitResult:
    params: RecursionParams
    exponent: float
    residuals: np.ndarray = field(repr=False)
    n_pairs: int = 0

    @property
    def threshold(self) -> float:
        return threshold(self.params)


def fit_recursion(samples: Sequence[LevelRateSample], fix_exponent: Optional[float] = None) -> FitResult:
    """Least squares of ``log P_{k+1} = log C + (k+1) log r + a log P_k`` over matched points.

    Samples at consecutive levels sharing the same ``p`` form one pair; the
    physical rate stands in for level 0 where no level-0 sample is given.  The
    exponent ``a`` is free unless ``fix_exponent`` is given.
    """
    by = {(s.level, s.p): s for s in samples}
    for s in samples:
        if s.level == 1 and (0, s.p) not in by:
            by[(0, s.p)] = LevelRateSample(0, s.p, s.p)
    levels = sorted({s.level for s in samples})
    if len(levels) < 2:
        raise FitError("need samples at two or more levels to separate C from r")
    rows, ys = [], []
    for (k, p), s in sorted(by.items()):
        nxt = by.get((k + 1, p))
        if nxt is None or s.rate <= 0 or nxt.rate <= 0:
            continue
        lp = math.log(s.rate)
        if fix_exponent is None:
            rows.append([1.0, k + 1.0, lp])
            ys.append(math.log(nxt.rate))
        else:
            rows.append([1.0, k + 1.0])
            ys.append(math.log(nxt.rate) - fix_exponent * lp)
    A, y = np.array(rows), np.array(ys)
    need = A.shape[1] if len(rows) else 3
    if len(rows) < need or np.linalg.matrix_rank(A) < need:
        raise FitError(f"{len(rows)} usable level pairs cannot identify {need} parameters "
                       "(need nonzero rates at several p and at least two level transitions)")
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    if coef[1] < 0:
        # r is bounded below by 1: refit the remaining parameters at log r = 0
        keep = [0] + list(range(2, A.shape[1]))
        sub, *_ = np.linalg.lstsq(A[:, keep], y, rcond=None)
        coef = np.zeros(A.shape[1])
        coef[keep] = sub
    a = float(coef[2]) if fix_exponent is None else float(fix_exponent)
    res = y - A @ coef
    return FitResult(RecursionParams(math.exp(coef[0]), math.exp(coef[1])), a, res, len(rows))


def fit_effective_C(samples: Sequence[LevelRateSample], level: int = 1) -> float:
    """``C`` from ``P_level = C P_{level-1}^2`` with ``P_0 = p``, averaged in log space."""
    vals = [math.log(s.rate) - 2 * math.log(s.p) for s in samples if s.level == level and s.rate > 0 and s.p > 0]
    if not vals:
        raise FitError(f"no nonzero level-{level} rates")
    return math.exp(float(np.mean(vals)))


@dataclass(frozen=True)
class Overhead:
    slowdown: float
    ancillas: float
    footprint: float


def overhead(L: int, N: float, N_a: float, T: float = 1.0, dim: int = 3) -> Overhead:
    slow = float(N) ** L * (float(T) ** L if dim == 1 else 1.0)
    return Overhead(slow, float(N_a) ** L, float(T) ** L)


def wilson(successes: int, trials: int, z: float = 1.959963984540054) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials <= 0:
        return 0.0, 1.0
    ph = successes / trials
    den = 1 + z * z / trials
    centre = (ph + z * z / (2 * trials)) / den
    half = z * math.sqrt(ph * (1 - ph) / trials + z * z / (4 * trials * trials)) / den
    return max(0.0, centre - half), min(1.0, centre + half)
