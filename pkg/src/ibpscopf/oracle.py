"""Independent ground truth for the bounding pipeline.

Nothing here reuses the compute graph, PTDF factorization or compiled
curves: flows come from explicit angle solves on rebuilt networks, curves
are walked segment by segment, and contingencies are looped over.
"""
from __future__ import annotations

import itertools

import numpy as np

from .contingency_ops import direct_recompute_oracle, intact_flows_oracle, non_islanding_lines
from .errors import DimensionTooLargeError, DomainError
from .grid_model import (BENEFIT, COST, Bus, Demand, Generator, GridCase, Line, PwlCurve)

MAX_GRID_DIMS = 6
MAX_CORNER_DIMS = 12
_CHUNK = 50_000


def segment_walk(curve: PwlCurve, p_min: float, x) -> np.ndarray:
    """Curve value by accumulating ``slope * covered width`` segment by segment."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    start = p_min
    for slope, width in curve.segments:
        out = out + slope * np.clip(x - start, 0.0, width)
        start = start + width
    return out


def _check_inside(case: GridCase, p_g, p_d):
    lo, hi = case.input_limits()
    x = np.concatenate([p_g, p_d], axis=-1)
    tol = 1e-12 * np.maximum(1.0, np.abs(hi))
    if np.any(x < lo - tol) or np.any(x > hi + tol):
        raise DomainError("dispatch outside device limits")


def flat_objective(case: GridCase, p_g, p_d, contingencies=None):
    """Market surplus ($) by straight-line evaluation; batches along leading axes.

    ``contingencies`` defaults to the case's list; pass a subset to mirror
    a pipeline that skipped islanding outages.
    """
    p_g = np.asarray(p_g, dtype=float)
    p_d = np.asarray(p_d, dtype=float)
    _check_inside(case, p_g, p_d)
    batch = p_g.shape[:-1]

    benefit = np.zeros(batch)
    for j, d in enumerate(case.demands):
        benefit = benefit + segment_walk(d.benefit_curve, d.p_min, p_d[..., j])
    cost = np.zeros(batch)
    for i, g in enumerate(case.generators):
        cost = cost + segment_walk(g.cost_curve, g.p_min, p_g[..., i])

    p_inj = np.zeros(batch + (case.n_buses,))
    for i, g in enumerate(case.generators):
        p_inj[..., g.bus] += p_g[..., i]
    for j, d in enumerate(case.demands):
        p_inj[..., d.bus] -= p_d[..., j]

    flows = intact_flows_oracle(case, p_inj)
    kcl = -p_inj.copy()
    for k, ln in enumerate(case.lines):
        kcl[..., ln.from_bus] += flows[..., k]
        kcl[..., ln.to_bus] -= flows[..., k]
    s_inj = np.abs(kcl).sum(axis=-1)

    limit_b = np.array([ln.flow_limit_base for ln in case.lines])
    limit_c = np.array([ln.flow_limit_ctg for ln in case.lines])
    s_fb = np.maximum(np.abs(flows) - limit_b, 0.0).sum(axis=-1)

    s_agg = np.zeros(batch)
    for line in case.contingencies if contingencies is None else contingencies:
        post = direct_recompute_oracle(case, line, p_inj)
        s_agg = s_agg + np.maximum(np.abs(post) - limit_c, 0.0).sum(axis=-1)

    value = case.tau * (benefit - cost - case.penalty_inj * s_inj
                        - case.penalty_flow * s_fb - case.penalty_flow * s_agg)
    return float(value) if value.ndim == 0 else value


def _axes(case: GridCase, resolution: int):
    lo, hi = case.input_limits()
    if resolution == 1:
        return [np.array([0.5 * (a + b)]) for a, b in zip(lo, hi)]
    return [np.array([a]) if a == b else np.linspace(a, b, resolution) for a, b in zip(lo, hi)]


def grid_search_max(case: GridCase, resolution: int = 50, contingencies=None):
    """Exhaustive maximum of :func:`flat_objective` over a tensor grid.

    ``resolution`` points per dimension span each device box end to end;
    ``resolution == 1`` evaluates only the box midpoint. Returns
    ``(value, (p_g, p_d))``.
    """
    n = case.n_inputs
    if n > MAX_GRID_DIMS:
        raise DimensionTooLargeError(f"{n} input dimensions exceed the grid-search limit {MAX_GRID_DIMS}")
    if resolution < 1:
        raise ValueError("resolution must be >= 1")
    axes = _axes(case, resolution)
    shape = tuple(len(a) for a in axes)
    total = int(np.prod(shape))
    best_val, best_x = -np.inf, None
    for start in range(0, total, _CHUNK):
        idx = np.unravel_index(np.arange(start, min(total, start + _CHUNK)), shape)
        x = np.stack([ax[i] for ax, i in zip(axes, idx)], axis=-1)
        vals = flat_objective(case, x[:, :case.n_gens], x[:, case.n_gens:], contingencies)
        k = int(np.argmax(vals))
        if vals[k] > best_val:
            best_val, best_x = float(vals[k]), x[k].copy()
    return best_val, (best_x[:case.n_gens], best_x[case.n_gens:])


def sample_dispatch(case: GridCase, n_samples: int, seed: int, corners: bool = True) -> np.ndarray:
    """Uniform samples in the device box, plus every corner for small dimensions."""
    rng = np.random.default_rng(seed)
    lo, hi = case.input_limits()
    x = lo + (hi - lo) * rng.random((n_samples, lo.size))
    if corners and lo.size <= MAX_CORNER_DIMS:
        pts = np.array(list(itertools.product(*zip(lo, hi))), dtype=float)
        x = np.vstack([x, pts])
    return x


def sample_soundness(case: GridCase, graph, n_samples: int, seed: int = 0,
                     report=None, corners: bool = True) -> int:
    """Count sampled objective values falling outside the certified interval.

    ``report`` defaults to the bounds of ``graph`` over its full box; pass a
    doctored report to self-test the harness.
    """
    from .bound_engine import compute_bounds

    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    if report is None:
        report = compute_bounds(graph)
    ctg = [c for c in case.contingencies if c not in set(graph.skipped_contingencies)]
    x = sample_dispatch(case, n_samples, seed, corners)
    violations = 0
    for start in range(0, len(x), _CHUNK):
        chunk = x[start:start + _CHUNK]
        vals = flat_objective(case, chunk[:, :case.n_gens], chunk[:, case.n_gens:], ctg)
        violations += int(np.count_nonzero((vals < report.objective_lower)
                                           | (vals > report.objective_upper)))
    return violations


def _curve(rng, kind, n_seg, lo_slope, hi_slope):
    slopes = np.sort(rng.uniform(lo_slope, hi_slope, n_seg))
    if kind == BENEFIT:
        slopes = slopes[::-1]
    widths = rng.uniform(0.1, 0.6, n_seg)
    return PwlCurve(tuple((float(s), float(w)) for s, w in zip(slopes, widths)), kind)


def random_case(n_buses: int, density: float = 1.5, seed: int = 0, tau: float = 1.0,
                penalty: float = 1e6, name: str | None = None) -> GridCase:
    """Random connected case with ``floor(density * (n_buses - 1))`` lines.

    The network is a random spanning tree plus extra distinct bus pairs.
    Contingencies are every line whose outage keeps the network connected.
    """
    if n_buses < 2:
        raise ValueError("n_buses must be >= 2")
    rng = np.random.default_rng(seed)
    order = rng.permutation(n_buses)
    edges = [(int(order[k]), int(order[rng.integers(k)])) for k in range(1, n_buses)]
    max_edges = n_buses * (n_buses - 1) // 2
    target = min(max(n_buses - 1, int(density * (n_buses - 1))), max_edges)
    present = {frozenset(e) for e in edges}
    while len(edges) < target:
        a, b = (int(v) for v in rng.choice(n_buses, 2, replace=False))
        if frozenset((a, b)) not in present:
            present.add(frozenset((a, b)))
            edges.append((a, b))

    lines = []
    for k, (a, b) in enumerate(edges):
        limit = float(rng.uniform(0.3, 1.5))
        lines.append(Line(k, a, b, float(rng.uniform(1.0, 10.0)), limit,
                          limit * float(rng.uniform(1.0, 1.5))))

    gen_buses = [b for b in range(n_buses) if rng.random() < 0.5] or [int(rng.integers(n_buses))]
    dem_buses = [b for b in range(n_buses) if rng.random() < 0.6] or [int(rng.integers(n_buses))]
    gens = []
    for k, b in enumerate(gen_buses):
        curve = _curve(rng, COST, int(rng.integers(1, 4)), 5.0, 50.0)
        p_min = float(rng.uniform(0.0, 0.3))
        gens.append(Generator(k, b, p_min, p_min + curve.total_width, curve))
    dems = []
    for k, b in enumerate(dem_buses):
        curve = _curve(rng, BENEFIT, int(rng.integers(1, 4)), 30.0, 120.0)
        p_min = float(rng.uniform(0.0, 0.2))
        dems.append(Demand(k, b, p_min, p_min + curve.total_width, curve))

    buses = tuple(Bus(b, b == 0) for b in range(n_buses))
    base = GridCase(buses, tuple(lines), tuple(gens), tuple(dems), (), tau, penalty, penalty,
                    name or f"random_{n_buses}_{seed}")
    return base.replace(contingencies=tuple(non_islanding_lines(base)))
