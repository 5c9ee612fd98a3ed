"""Certified interval bounds on security-constrained DC-OPF market surplus."""
from .bound_engine import (BoundReport, ScDcopfGraph, build_graph, build_pipeline,
                           compute_bounds, compute_bounds_batch, evaluate_concrete, gap)
from .contingency_ops import (ContingencyOperators, contingency_flows, direct_recompute_oracle,
                              precompute)
from .cost_curves import CompiledCurve, CurveBank, compile_curve, eval_concrete, eval_interval
from .grid_model import (Bus, Demand, Generator, GridCase, Line, PwlCurve, load_case,
                         net_injection_map, parse_case, serialize)
from .interval_engine import IntervalVec
from .network_matrices import NetworkMatrices, base_flows, build_incidence, build_ptdf
from .oracle import flat_objective, grid_search_max, random_case, sample_soundness

__version__ = "0.1.0"
