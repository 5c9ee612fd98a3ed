"""Loop-free N-1 line-outage operators built from Sherman-Morrison updates.

For an outage of line ``i`` the post-contingency flows are

    p_fc^i = M_i Phi p_inj - b_i (u'_i . p_inj)

with ``u_i = Y_B,r^{-1} e_i`` (``e_i`` the i-th row of ``E_r``),
``g_i = y_i / (1 + e_i^T u_i y_i)``, ``y_i = -(Y_D)_ii`` and
``b_i = M_i Y_D E_r u_i g_i``. Stacking the rows gives ``M``, ``B`` and
``U`` so that all contingencies are evaluated with two mat-vecs.
"""
from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field

import networkx as nx
import numpy as np

from .errors import DimensionError, DisconnectedError, IslandingError
from .grid_model import GridCase, is_connected
from .network_matrices import NetworkMatrices

log = logging.getLogger(__name__)

ISLANDING_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class ContingencyOperators:
    M: np.ndarray  # (n_c, n_l) ones with a zero at the outaged line
    B: np.ndarray  # (n_c, n_l)
    U: np.ndarray  # (n_c, n_b), zero column at the slack bus
    denominators: np.ndarray  # 1 + e_i^T u_i y_i
    g: np.ndarray
    ctg_line_ids: tuple[int, ...]
    skipped: tuple[int, ...] = field(default=())

    @property
    def n_contingencies(self) -> int:
        return len(self.ctg_line_ids)


def precompute(nm: NetworkMatrices, case: GridCase, skip_islanding: bool = False,
               contingencies=None) -> ContingencyOperators:
    """Build ``M``, ``B``, ``U`` for every contingency of ``case``.

    Islanding outages raise :class:`IslandingError` unless
    ``skip_islanding`` is set, in which case they are dropped with a
    warning and listed in ``skipped``.
    """
    ctg = np.array(case.contingencies if contingencies is None else contingencies, dtype=int)
    n_l, n_b = nm.n_lines, nm.n_buses
    if ctg.size == 0:
        return ContingencyOperators(
            M=np.zeros((0, n_l)), B=np.zeros((0, n_l)), U=np.zeros((0, n_b)),
            denominators=np.zeros(0), g=np.zeros(0), ctg_line_ids=(),
        )

    e = nm.E_r[ctg]  # (n_c, n_b - 1)
    u = nm.solve_reduced(e.T)  # columns u_i
    y_neg = -nm.y[ctg]
    denom = 1.0 + np.einsum("ij,ji->i", e, u) * y_neg

    bad = np.abs(denom) < ISLANDING_TOL
    skipped = ()
    if bad.any():
        if not skip_islanding:
            k = int(np.flatnonzero(bad)[0])
            raise IslandingError(int(ctg[k]), float(denom[k]))
        skipped = tuple(int(c) for c in ctg[bad])
        log.warning("dropping islanding contingencies on lines %s", list(skipped))
        keep = ~bad
        ctg, u, y_neg, denom = ctg[keep], u[:, keep], y_neg[keep], denom[keep]

    n_c = ctg.size
    g = y_neg / denom
    rows = np.arange(n_c)
    M = np.ones((n_c, n_l))
    M[rows, ctg] = 0.0
    B = ((nm.y[:, None] * (nm.E_r @ u)) * g[None, :]).T
    B *= M
    U = np.insert(u.T, nm.slack, 0.0, axis=1) if n_c else np.zeros((0, n_b))
    return ContingencyOperators(
        M=M, B=B, U=U, denominators=denom, g=g,
        ctg_line_ids=tuple(int(c) for c in ctg), skipped=skipped,
    )


def contingency_flows(ops: ContingencyOperators, nm: NetworkMatrices, p_inj) -> np.ndarray:
    """Post-outage flows, one row per contingency (leading batch axes allowed)."""
    p_inj = np.asarray(p_inj, dtype=float)
    if p_inj.shape[-1] != nm.n_buses:
        raise DimensionError(f"injection has length {p_inj.shape[-1]}, expected {nm.n_buses}")
    base = p_inj @ nm.Phi.T
    w = p_inj @ ops.U.T
    return ops.M * base[..., None, :] - ops.B * w[..., :, None]


def _angle_flows(n_buses, slack, lines, p_inj):
    """Flows by explicit reduced-Laplacian angle solve (no PTDF)."""
    L = np.zeros((n_buses, n_buses))
    for f, t, y in lines:
        L[f, f] += y
        L[t, t] += y
        L[f, t] -= y
        L[t, f] -= y
    keep = [b for b in range(n_buses) if b != slack]
    p_inj = np.asarray(p_inj, dtype=float)
    theta = np.zeros(p_inj.shape)
    if keep:
        rhs = np.moveaxis(p_inj[..., keep], -1, 0).reshape(len(keep), -1)
        sol = np.linalg.solve(L[np.ix_(keep, keep)], rhs)
        theta[..., keep] = np.moveaxis(sol.reshape((len(keep),) + p_inj.shape[:-1]), 0, -1)
    return np.stack([y * (theta[..., f] - theta[..., t]) for f, t, y in lines], axis=-1)


def direct_recompute_oracle(case: GridCase, ctg_line: int, p_inj) -> np.ndarray:
    """Post-outage flows computed on a rebuilt network with ``ctg_line`` deleted.

    The outaged line's entry is reported as 0. Accepts a batch of
    injections along leading axes.
    """
    survivors = [ln for ln in case.lines if ln.id != ctg_line]
    if not is_connected(case.n_buses, [(ln.from_bus, ln.to_bus) for ln in survivors]):
        raise DisconnectedError(f"outage of line {ctg_line} disconnects the network")
    flows = _angle_flows(case.n_buses, case.slack,
                         [(ln.from_bus, ln.to_bus, ln.susceptance) for ln in survivors], p_inj)
    return np.insert(flows, ctg_line, 0.0, axis=-1)


def intact_flows_oracle(case: GridCase, p_inj) -> np.ndarray:
    """Base-case flows by angle solve on the intact network."""
    return _angle_flows(case.n_buses, case.slack,
                        [(ln.from_bus, ln.to_bus, ln.susceptance) for ln in case.lines], p_inj)


def non_islanding_lines(case: GridCase) -> list[int]:
    """Lines whose single outage leaves the network connected."""
    pairs = Counter(frozenset((ln.from_bus, ln.to_bus)) for ln in case.lines)
    graph = nx.Graph()
    graph.add_nodes_from(range(case.n_buses))
    graph.add_edges_from(tuple(p) for p in pairs)
    bridges = {frozenset(e) for e in nx.bridges(graph)}
    return [ln.id for ln in case.lines
            if not ((key := frozenset((ln.from_bus, ln.to_bus))) in bridges and pairs[key] == 1)]
