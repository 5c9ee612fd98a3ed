import numpy as np
import pytest

from ibpscopf.errors import DimensionError, SingularMatrixError
from ibpscopf.grid_model import Bus, GridCase, Line
from ibpscopf.network_matrices import base_flows, build_incidence, build_ptdf, factorize_reduced
from ibpscopf.oracle import random_case


def two_bus(y=3.7):
    return GridCase((Bus(0, True), Bus(1)), (Line(0, 0, 1, y, 1.0, 1.0),), (), (), (), 1.0)


def angle_solve_ptdf(case):
    """PTDF column by column: unit injection at bus k, angles, then line flows."""
    nb = case.n_buses
    Y = np.zeros((nb, nb))
    for ln in case.lines:
        for a, b, s in ((ln.from_bus, ln.from_bus, 1), (ln.to_bus, ln.to_bus, 1),
                        (ln.from_bus, ln.to_bus, -1), (ln.to_bus, ln.from_bus, -1)):
            Y[a, b] += s * ln.susceptance
    keep = [b for b in range(nb) if b != case.slack]
    Phi = np.zeros((case.n_lines, nb))
    for k in keep:
        theta = np.zeros(nb)
        rhs = np.zeros(nb)
        rhs[k] = 1.0
        theta[keep] = np.linalg.solve(Y[np.ix_(keep, keep)], rhs[keep])
        for ln in case.lines:
            Phi[ln.id, k] = ln.susceptance * (theta[ln.from_bus] - theta[ln.to_bus])
    return Phi


def test_two_bus_incidence():
    E, E_r = build_incidence(two_bus())
    np.testing.assert_array_equal(E, [[1, -1]])
    np.testing.assert_array_equal(E_r, [[-1]])


def test_ring3_reduced_incidence(ring3):
    E, E_r = build_incidence(ring3)
    np.testing.assert_array_equal(E_r, [[-1, 0], [1, -1], [0, -1]])
    assert np.all(E.sum(axis=1) == 0)


@pytest.mark.parametrize("y", [0.5, 3.7, 100.0])
def test_two_bus_ptdf(y):
    nm = build_ptdf(two_bus(y))
    np.testing.assert_allclose(nm.Phi, [[0.0, -1.0]], atol=1e-15)
    np.testing.assert_allclose(base_flows(nm, [-0.7, 0.7]), [-0.7])


def test_ring3_ptdf_hand_values(ring3):
    # equal susceptances: 2/3 of a bus-1 injection takes the direct path to the slack
    expect = np.array([[0, -2, -1], [0, 1, -1], [0, -1, -2]]) / 3.0
    np.testing.assert_allclose(build_ptdf(ring3).Phi, expect, atol=1e-14)


@pytest.mark.parametrize("seed", range(10))
def test_ptdf_matches_angle_solve(seed):
    case = random_case(4 + seed, 1.7, seed)
    nm = build_ptdf(case)
    assert np.abs(nm.Phi - angle_solve_ptdf(case)).max() < 1e-10
    assert np.all(nm.Phi[:, nm.slack] == 0)


def test_slack_column_follows_bus_index(ring3):
    from dataclasses import replace

    buses = (Bus(0), Bus(1), Bus(2, True))
    case = replace(ring3, buses=buses)
    nm = build_ptdf(case)
    assert np.all(nm.Phi[:, 2] == 0)
    assert np.abs(nm.Phi - angle_solve_ptdf(case)).max() < 1e-12


def test_zero_injection_zero_flow(ring3):
    assert np.all(base_flows(build_ptdf(ring3), np.zeros(3)) == 0)


def test_base_flows_dimension_error(ring3):
    with pytest.raises(DimensionError):
        base_flows(build_ptdf(ring3), np.zeros(4))


@pytest.mark.parametrize("seed", range(8))
def test_kirchhoff_residual_on_balanced_injection(seed):
    case = random_case(12, 1.5, seed)
    nm = build_ptdf(case)
    rng = np.random.default_rng(seed)
    R = nm.balance_residual_operator()
    for _ in range(20):
        p = rng.normal(size=case.n_buses)
        p -= p.mean()
        flows = base_flows(nm, p)
        assert np.abs(nm.E.T @ flows - p).max() < 1e-10
        assert np.abs(R @ p).max() < 1e-8


@pytest.mark.parametrize("c", [0.1, 10.0])
def test_ptdf_invariant_under_susceptance_scaling(c):
    from dataclasses import replace

    case = random_case(10, 1.6, 4)
    scaled = replace(case, lines=tuple(replace(ln, susceptance=c * ln.susceptance)
                                       for ln in case.lines))
    assert np.abs(build_ptdf(scaled).Phi - build_ptdf(case).Phi).max() < 1e-10


def test_factorization_solve_is_symmetric():
    case = random_case(9, 1.8, 7)
    nm = build_ptdf(case)
    inv = nm.solve_reduced(np.eye(case.n_buses - 1))
    np.testing.assert_allclose(inv, inv.T, atol=1e-12)
    YBr = nm.E_r.T @ np.diag(nm.y) @ nm.E_r
    np.testing.assert_allclose(YBr @ inv, np.eye(case.n_buses - 1), atol=1e-10)


def test_singular_reduced_admittance_detected():
    # two buses without any line between them
    E_r = np.zeros((1, 2))
    E_r[0, 0] = -1.0
    with pytest.raises(SingularMatrixError):
        factorize_reduced(E_r, np.array([1.0]))
