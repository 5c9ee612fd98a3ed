"""Incidence/admittance assembly, reduced-admittance factorization and PTDF."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import DimensionError, SingularMatrixError
from .grid_model import GridCase

# smallest admissible Cholesky pivot (squared), relative to max |Y_B,r|
PIVOT_RTOL = 1e-12


@dataclass(frozen=True, eq=False)
class NetworkMatrices:
    E: np.ndarray  # (n_l, n_b), +1 at from bus, -1 at to bus
    E_r: np.ndarray  # E with the slack column dropped
    y: np.ndarray  # line susceptances, diagonal of Y_D
    YBr_factor: tuple = field(repr=False)  # scipy cho_factor handle of E_r^T Y_D E_r
    Phi: np.ndarray  # (n_l, n_b), zero column at the slack bus
    slack: int

    @property
    def Y_D(self) -> np.ndarray:
        return np.diag(self.y)

    @property
    def n_buses(self) -> int:
        return self.E.shape[1]

    @property
    def n_lines(self) -> int:
        return self.E.shape[0]

    @property
    def nonslack(self) -> np.ndarray:
        return np.delete(np.arange(self.n_buses), self.slack)

    def solve_reduced(self, rhs) -> np.ndarray:
        """Apply ``Y_B,r^{-1}`` through the stored factorization."""
        return sla.cho_solve(self.YBr_factor, rhs)

    def balance_residual_operator(self) -> np.ndarray:
        """``E^T Phi - I``; maps injections to nodal KCL mismatch."""
        return self.E.T @ self.Phi - np.eye(self.n_buses)


def build_incidence(case: GridCase) -> tuple[np.ndarray, np.ndarray]:
    E = np.zeros((case.n_lines, case.n_buses))
    rows = np.arange(case.n_lines)
    E[rows, [ln.from_bus for ln in case.lines]] = 1.0
    E[rows, [ln.to_bus for ln in case.lines]] = -1.0
    E_r = np.delete(E, case.slack, axis=1)
    return E, E_r


def factorize_reduced(E_r: np.ndarray, y: np.ndarray):
    YBr = E_r.T @ (y[:, None] * E_r)
    if YBr.size == 0:
        return sla.cho_factor(np.ones((0, 0)))
    scale = np.abs(YBr).max()
    try:
        factor = sla.cho_factor(YBr, lower=True, check_finite=True)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError("reduced admittance matrix is not positive definite") from exc
    pivots = np.diag(factor[0]) ** 2
    if pivots.min() < PIVOT_RTOL * scale:
        raise SingularMatrixError(
            f"reduced admittance matrix is singular (pivot {pivots.min():.3e}, max {scale:.3e})"
        )
    return factor


def build_ptdf(case: GridCase) -> NetworkMatrices:
    E, E_r = build_incidence(case)
    y = np.array([ln.susceptance for ln in case.lines], dtype=float)
    factor = factorize_reduced(E_r, y)
    # Phi_r^T = Y_B,r^{-1} E_r^T Y_D, using symmetry of Y_B,r
    Phi_r = sla.cho_solve(factor, E_r.T * y[None, :]).T if E_r.shape[1] else E_r.copy()
    Phi = np.insert(Phi_r, case.slack, 0.0, axis=1)
    return NetworkMatrices(E=E, E_r=E_r, y=y, YBr_factor=factor, Phi=Phi, slack=case.slack)


def base_flows(nm: NetworkMatrices, p_inj) -> np.ndarray:
    p_inj = np.asarray(p_inj, dtype=float)
    if p_inj.shape[-1] != nm.n_buses:
        raise DimensionError(f"injection has length {p_inj.shape[-1]}, expected {nm.n_buses}")
    return p_inj @ nm.Phi.T
