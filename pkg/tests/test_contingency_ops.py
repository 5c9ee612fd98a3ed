import numpy as np
import pytest

from ibpscopf.contingency_ops import (ISLANDING_TOL, contingency_flows, direct_recompute_oracle,
                                      non_islanding_lines, precompute)
from ibpscopf.errors import DimensionError, DisconnectedError, IslandingError
from ibpscopf.grid_model import Bus, GridCase, Line
from ibpscopf.network_matrices import build_ptdf
from ibpscopf.oracle import random_case


def balanced(rng, n):
    p = rng.normal(size=n)
    return p - p.mean()


def test_bridge_outage_islands():
    case = GridCase((Bus(0, True), Bus(1)), (Line(0, 0, 1, 2.0, 1.0, 1.0),), (), (), (0,), 1.0)
    with pytest.raises(IslandingError) as err:
        precompute(build_ptdf(case), case)
    assert err.value.line_id == 0
    assert abs(err.value.denominator) < ISLANDING_TOL


def test_skip_islanding_drops_and_records():
    # triangle plus a pendant bus hanging off bus 2 through line 3
    lines = (Line(0, 0, 1, 1.0, 1, 1), Line(1, 1, 2, 1.0, 1, 1), Line(2, 0, 2, 1.0, 1, 1),
             Line(3, 2, 3, 1.0, 1, 1))
    case = GridCase(tuple(Bus(i, i == 0) for i in range(4)), lines, (), (), (0, 3, 1), 1.0)
    ops = precompute(build_ptdf(case), case, skip_islanding=True)
    assert ops.ctg_line_ids == (0, 1)
    assert ops.skipped == (3,)
    assert non_islanding_lines(case) == [0, 1, 2]


def test_ring3_denominator_line2(ring3):
    # Y_B,r = y [[2,-1],[-1,2]], e = [0,-1]  =>  1 + e^T Y^-1 e (-y) = 1 - 2/3
    ops = precompute(build_ptdf(ring3), ring3)
    k = ops.ctg_line_ids.index(2)
    assert ops.denominators[k] == pytest.approx(1.0 / 3.0, abs=1e-14)
    assert 0 < ops.denominators[k] < 1
    assert np.isfinite(ops.B).all() and np.isfinite(ops.U).all()


def test_mask_rows(ring3):
    ops = precompute(build_ptdf(ring3), ring3)
    np.testing.assert_array_equal(ops.M[0], [1, 0, 1])
    for k, line in enumerate(ops.ctg_line_ids):
        assert ops.M[k].sum() == ring3.n_lines - 1
        assert ops.M[k, line] == 0
        assert ops.B[k, line] == 0
    assert np.all(ops.U[:, ring3.slack] == 0)


def test_zero_injection(ring3):
    nm = build_ptdf(ring3)
    assert np.all(contingency_flows(precompute(nm, ring3), nm, np.zeros(3)) == 0)


def test_dimension_error(ring3):
    nm = build_ptdf(ring3)
    with pytest.raises(DimensionError):
        contingency_flows(precompute(nm, ring3), nm, np.zeros(2))


def test_ring3_radial_hand_flows(ring3):
    # line 0 out: 1 -> 2 is the only path from bus 1 to bus 2
    np.testing.assert_allclose(direct_recompute_oracle(ring3, 0, [0.0, 1.0, -1.0]),
                               [0.0, 1.0, 0.0], atol=1e-14)


def test_ring3_matches_direct_recompute(ring3):
    nm = build_ptdf(ring3)
    ops = precompute(nm, ring3)
    rng = np.random.default_rng(0)
    for _ in range(50):
        p = balanced(rng, 3)
        P = contingency_flows(ops, nm, p)
        for k, line in enumerate(ops.ctg_line_ids):
            assert np.abs(P[k] - direct_recompute_oracle(ring3, line, p)).max() < 1e-8
            assert P[k, line] == 0.0


def test_direct_recompute_bridge():
    case = GridCase((Bus(0, True), Bus(1)), (Line(0, 0, 1, 2.0, 1.0, 1.0),), (), (), (), 1.0)
    with pytest.raises(DisconnectedError):
        direct_recompute_oracle(case, 0, [0.0, 0.0])


@pytest.mark.parametrize("seed", range(100))
def test_sherman_morrison_random_10_bus(seed):
    case = random_case(10, 1.6, seed)
    nm = build_ptdf(case)
    ops = precompute(nm, case)
    rng = np.random.default_rng(seed)
    p = np.stack([balanced(rng, 10) for _ in range(5)])
    P = contingency_flows(ops, nm, p)
    for k, line in enumerate(ops.ctg_line_ids):
        assert np.abs(P[:, k] - direct_recompute_oracle(case, line, p)).max() < 1e-8


@pytest.mark.parametrize("seed", range(6))
def test_post_outage_kirchhoff(seed):
    case = random_case(30, 1.5, seed)
    nm = build_ptdf(case)
    ops = precompute(nm, case)
    rng = np.random.default_rng(seed)
    p = balanced(rng, case.n_buses)
    P = contingency_flows(ops, nm, p)
    keep = nm.nonslack
    for k, line in enumerate(ops.ctg_line_ids):
        E_post = np.delete(nm.E, line, axis=0)
        resid = E_post.T @ np.delete(P[k], line) - p
        assert np.abs(resid[keep]).max() < 1e-8
        assert set(np.flatnonzero(ops.M[k] == 0)) == {line}
        assert P[k, line] == 0.0


def test_u_symmetry(ring3):
    # e_i^T u_i computed through the factorization equals u_i^T e_i
    case = random_case(12, 1.7, 2)
    nm = build_ptdf(case)
    ops = precompute(nm, case)
    for k, line in enumerate(ops.ctg_line_ids):
        e = nm.E_r[line]
        u = nm.solve_reduced(e)
        v = np.linalg.solve(nm.E_r.T @ np.diag(nm.y) @ nm.E_r, e)
        np.testing.assert_allclose(u, v, atol=1e-10)
        np.testing.assert_allclose(np.delete(ops.U[k], nm.slack), u, atol=1e-12)


def test_parallel_circuits_are_independent():
    # two circuits between buses 0 and 1, then a radial line to bus 2
    lines = (Line(0, 0, 1, 2.0, 1, 1), Line(1, 0, 1, 3.0, 1, 1), Line(2, 1, 2, 1.0, 1, 1))
    case = GridCase(tuple(Bus(i, i == 0) for i in range(3)), lines, (), (), (0, 1), 1.0)
    assert non_islanding_lines(case) == [0, 1]
    nm = build_ptdf(case)
    ops = precompute(nm, case)
    p = np.array([1.0, -0.4, -0.6])
    P = contingency_flows(ops, nm, p)
    np.testing.assert_allclose(P[0], [0.0, 1.0, 0.6], atol=1e-12)
    np.testing.assert_allclose(P[1], [1.0, 0.0, 0.6], atol=1e-12)
    for k, line in enumerate(ops.ctg_line_ids):
        np.testing.assert_allclose(P[k], direct_recompute_oracle(case, line, p), atol=1e-12)
