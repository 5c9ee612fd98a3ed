import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ibpscopf import cost_curves as cc
from ibpscopf.errors import CurveShapeError, DomainError
from ibpscopf.grid_model import BENEFIT, COST, PwlCurve
from ibpscopf.interval_engine import IntervalVec
from ibpscopf.oracle import segment_walk


def curve(kind, segs):
    return PwlCurve(tuple((float(a), float(w)) for a, w in segs), kind)


def random_curve(rng, kind, n_seg=None):
    n_seg = n_seg or int(rng.integers(1, 6))
    slopes = np.sort(rng.uniform(0, 100, n_seg))
    if kind == BENEFIT:
        slopes = slopes[::-1]
    widths = rng.uniform(0.05, 2.0, n_seg)
    return curve(kind, zip(slopes, widths))


def test_single_segment_benefit():
    c = cc.compile_curve(curve(BENEFIT, [(10, 2)]), 0.0)
    assert cc.eval_concrete(c, 1.5) == 15.0
    # the cap holds past the domain
    assert c.cascade(3.0) == 20.0
    np.testing.assert_array_equal(c.caps, [20.0])


def test_two_segment_cost():
    c = cc.compile_curve(curve(COST, [(5, 1), (20, 1)]), 0.0)
    assert cc.eval_concrete(c, 1.5) == pytest.approx(15.0, abs=1e-12)
    np.testing.assert_array_equal(c.slopes, [5.0, 15.0])
    np.testing.assert_array_equal(c.shifts, [0.0, 1.0])
    assert c.caps is None


def test_two_segment_benefit_terms():
    c = cc.compile(curve(BENEFIT, [(300, 1), (150, 0.5)]), 0.0)
    assert c.relu_terms == [(300.0, 0.0), (150.0, 1.0)]
    np.testing.assert_array_equal(c.caps, [300.0, 375.0])
    assert c.domain_max == 1.5


def test_nonzero_p_min_shifts_breakpoints():
    c = cc.compile_curve(curve(COST, [(10, 0.5), (30, 0.5)]), 2.0)
    np.testing.assert_array_equal(c.shifts, [2.0, 2.5])
    assert cc.eval_concrete(c, 2.0) == 0.0
    assert cc.eval_concrete(c, 3.0) == pytest.approx(20.0)


@pytest.mark.parametrize("kind, segs", [
    (COST, [(30, 1), (10, 1)]),
    (BENEFIT, [(10, 1), (30, 1)]),
    (COST, [(10, 0), (20, 1)]),
])
def test_shape_errors(kind, segs):
    with pytest.raises(CurveShapeError):
        cc.compile_curve(curve(kind, segs), 0.0)


def test_domain_error():
    c = cc.compile_curve(curve(COST, [(5, 1)]), 0.0)
    with pytest.raises(DomainError):
        cc.eval_concrete(c, 1.5)
    with pytest.raises(DomainError):
        cc.eval_interval(c, IntervalVec(np.array([-0.1]), np.array([0.5])))
    # round-off at the boundary is tolerated
    cc.eval_concrete(c, 1.0 + 1e-15)


@pytest.mark.parametrize("kind", [COST, BENEFIT])
def test_matches_segment_walk(kind):
    rng = np.random.default_rng(11 if kind == COST else 12)
    for _ in range(200):
        pc = random_curve(rng, kind)
        p_min = float(rng.uniform(0, 2))
        c = cc.compile_curve(pc, p_min)
        x = p_min + pc.total_width * rng.random(200)
        x = np.concatenate([x, c.shifts, [c.domain_max]])
        ref = segment_walk(pc, p_min, x)
        np.testing.assert_allclose(cc.eval_concrete(c, x), ref, rtol=1e-12, atol=1e-12 * ref.max())


@pytest.mark.parametrize("kind, sign", [(COST, 1), (BENEFIT, -1)])
def test_second_differences(kind, sign):
    rng = np.random.default_rng(3)
    for _ in range(50):
        pc = random_curve(rng, kind)
        c = cc.compile_curve(pc, 0.0)
        x = np.linspace(0, c.domain_max, 401)
        v = c.cascade(x)
        d2 = np.diff(v, 2)
        assert np.all(sign * d2 >= -1e-9 * max(1.0, v.max()))
        assert np.all(np.diff(v) >= -1e-12 * max(1.0, v.max()))


@pytest.mark.parametrize("kind", [COST, BENEFIT])
def test_interval_is_exact_and_strict_matches(kind):
    rng = np.random.default_rng(21)
    for _ in range(100):
        pc = random_curve(rng, kind)
        c = cc.compile_curve(pc, 0.0)
        a, b = np.sort(rng.uniform(0, c.domain_max, 2))
        x = IntervalVec(np.array([a]), np.array([b]))
        y = cc.eval_interval(c, x)
        assert y.lower[0] == pytest.approx(float(segment_walk(pc, 0.0, a)), rel=1e-12, abs=1e-12)
        assert y.upper[0] == pytest.approx(float(segment_walk(pc, 0.0, b)), rel=1e-12, abs=1e-12)
        s = cc.eval_interval(c, x, strict_cascade=True)
        np.testing.assert_allclose([s.lower, s.upper], [y.lower, y.upper], rtol=1e-9, atol=1e-9)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.floats(0, 100), st.floats(0.01, 5)), min_size=1, max_size=5),
       st.floats(0, 1), st.floats(0, 1))
def test_strict_cascade_is_sound(segs, t0, t1):
    segs = sorted(segs, key=lambda s: -s[0])
    pc = curve(BENEFIT, segs)
    c = cc.compile_curve(pc, 0.0)
    a, b = sorted((t0 * c.domain_max, t1 * c.domain_max))
    s = cc.eval_interval(c, IntervalVec(np.array([a]), np.array([b])), strict_cascade=True)
    pts = np.linspace(a, b, 50)
    v = segment_walk(pc, 0.0, pts)
    tol = 1e-9 * max(1.0, v.max())
    assert np.all(v >= s.lower - tol) and np.all(v <= s.upper + tol)


def test_degenerate_interval_collapses():
    c = cc.compile_curve(curve(BENEFIT, [(300, 1), (150, 0.5)]), 0.0)
    for strict in (False, True):
        y = cc.eval_interval(c, IntervalVec.point([1.25]), strict_cascade=strict)
        assert y.lower[0] == y.upper[0] == pytest.approx(337.5)


@pytest.mark.parametrize("kind", [COST, BENEFIT])
def test_curve_bank_matches_single_curves(kind):
    rng = np.random.default_rng(8)
    pcs = [random_curve(rng, kind) for _ in range(6)]
    p_min = rng.uniform(0, 1, 6)
    compiled = [cc.compile_curve(pc, p) for pc, p in zip(pcs, p_min)]
    bank = cc.CurveBank(compiled, kind)
    dmax = np.array([c.domain_max for c in compiled])
    x = p_min + (dmax - p_min) * rng.random((30, 6))
    expect = np.stack([segment_walk(pc, p, x[:, i]) for i, (pc, p) in enumerate(zip(pcs, p_min))], -1)
    np.testing.assert_allclose(bank.concrete(x), expect, rtol=1e-12, atol=1e-10)
    box = IntervalVec(np.minimum(x[0], x[1]), np.maximum(x[0], x[1]))
    a, b = bank.interval(box), bank.interval(box, strict_cascade=True)
    np.testing.assert_allclose(a.lower, b.lower, atol=1e-9)
    np.testing.assert_allclose(a.upper, b.upper, atol=1e-9)
    with pytest.raises(DomainError):
        bank.concrete(dmax + 1.0)
