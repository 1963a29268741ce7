import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from localft.threshold import (FitError, LevelRateSample, RecursionParams, closed_form, fit_effective_C,
                               fit_recursion, iterate_recursion, log_closed_form, overhead, threshold, wilson)


def brute_log_recursion(C, r, P0, L):
    # iterate in the log domain so deep levels do not underflow
    lp = math.log(P0)
    for k in range(1, L + 1):
        lp = math.log(C) + k * math.log(r) + 2 * lp
    return lp


@given(st.floats(1.0, 1e4), st.floats(1.0, 3.0), st.floats(1e-9, 1e-3), st.integers(0, 20))
@settings(max_examples=300, deadline=None)
def test_closed_form_matches_iteration(C, r, P0, L):
    params = RecursionParams(C, r)
    ref = brute_log_recursion(C, r, P0, L)
    assert log_closed_form(params, P0, L) == pytest.approx(ref, rel=1e-12, abs=1e-12)
    it = iterate_recursion(params, P0, L)
    last = it[-1] if L else P0
    if 1e-300 < last < 1e300:
        assert math.log(last) == pytest.approx(ref, rel=1e-12, abs=1e-12)
        assert closed_form(params, P0, L) == pytest.approx(last, rel=1e-12)


@given(st.floats(1.0, 1e4), st.floats(1e-9, 1e-3), st.integers(0, 12))
@settings(max_examples=200, deadline=None)
def test_unit_r_reduces_to_plain_doubling(C, P0, L):
    got = log_closed_form(RecursionParams(C, 1.0), P0, L)
    assert got == pytest.approx(2**L * math.log(C * P0) - math.log(C), rel=1e-12, abs=1e-12)


def test_threshold_values():
    assert threshold(RecursionParams(100.0)) == pytest.approx(0.01)
    assert threshold(RecursionParams(100.0, 2.0)) == pytest.approx(0.0025)
    # below threshold the recursion contracts, above it grows
    p = RecursionParams(100.0, 2.0)
    assert iterate_recursion(p, 0.5 * threshold(p), 4)[-1] < 0.5 * threshold(p)
    assert closed_form(p, 0.0, 3) == 0.0


def test_params_validation():
    with pytest.raises(ValueError):
        RecursionParams(0.0)
    with pytest.raises(ValueError):
        RecursionParams(1.0, 0.5)
    with pytest.raises(ValueError):
        LevelRateSample(1, 1e-3, 1.5)


def _samples(C, r, ps, levels):
    out = []
    for p in ps:
        rate = p
        for k in range(levels + 1):
            if k:
                rate = C * r**k * rate * rate
            out.append(LevelRateSample(k, p, rate))
    return out


def test_fit_recovers_synthetic_parameters():
    s = _samples(300.0, 1.7, [1e-4, 3e-4, 6e-4, 1e-3], 3)
    fit = fit_recursion(s)
    assert fit.params.C == pytest.approx(300.0, rel=1e-8)
    assert fit.params.r == pytest.approx(1.7, rel=1e-8)
    assert fit.exponent == pytest.approx(2.0, rel=1e-10)
    fixed = fit_recursion(s, fix_exponent=2.0)
    assert fixed.params.C == pytest.approx(300.0, rel=1e-8)
    assert fixed.threshold == pytest.approx(1 / (300 * 1.7**2))


def test_fit_rejects_underdetermined_input():
    with pytest.raises(FitError):
        fit_recursion(_samples(300.0, 1.0, [1e-4], 0))
    with pytest.raises(FitError):
        fit_recursion(_samples(300.0, 1.0, [1e-4], 1))  # one pair cannot fix three unknowns
    with pytest.raises(FitError):
        fit_effective_C([LevelRateSample(1, 1e-3, 0.0)])


def test_effective_C():
    s = [LevelRateSample(1, p, 250 * p * p) for p in (1e-4, 5e-4)]
    assert fit_effective_C(s) == pytest.approx(250)


def test_overhead():
    o3 = overhead(3, 5, 6, 8, dim=3)
    assert o3.slowdown == 125 and o3.ancillas == 216 and o3.footprint == 512
    o1 = overhead(2, 5, 6, 8, dim=1)
    assert o1.slowdown == 25 * 64


def test_wilson_interval():
    lo, hi = wilson(0, 100)
    assert lo == pytest.approx(0, abs=1e-12) and 0.03 < hi < 0.04
    lo, hi = wilson(50, 100)
    assert lo < 0.5 < hi and hi - lo == pytest.approx(2 * 0.0961, abs=0.01)
    assert wilson(0, 0) == (0.0, 1.0)


def test_fit_uses_physical_rate_as_level_zero():
    s = [x for x in _samples(300.0, 1.7, [1e-4, 3e-4, 6e-4], 2) if x.level > 0]
    fit = fit_recursion(s, fix_exponent=2.0)
    assert fit.params.C == pytest.approx(300.0, rel=1e-8)
    assert fit.params.r == pytest.approx(1.7, rel=1e-8)


def test_fit_pins_r_at_one_when_levels_improve_faster():
    # level-2 constant far below level 1: unconstrained r < 1, so C is refit with r = 1
    s = []
    for p in (1e-4, 3e-4):
        p1 = 1000 * p * p
        s += [LevelRateSample(1, p, p1), LevelRateSample(2, p, 10 * p1 * p1)]
    fit = fit_recursion(s, fix_exponent=2.0)
    assert fit.params.r == 1.0
    assert fit.params.C == pytest.approx(100.0, rel=1e-9)  # geometric mean of 1000 and 10
