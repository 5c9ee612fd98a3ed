"""Grid case data model, JSON case-file format and validation.

Everything downstream consumes a :class:`GridCase`. Quantities are per unit;
curves are stored as ``(slope, width)`` segments anchored at the owning
device's ``p_min``.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .errors import DisconnectedError, SchemaError, ValidationError

COST = "cost"
BENEFIT = "benefit"

DEFAULT_PENALTY = 1e6

# relative slack allowed when comparing a curve's total width with its device span
_WIDTH_RTOL = 1e-12


@dataclass(frozen=True)
class Bus:
    id: int
    is_slack: bool = False


@dataclass(frozen=True)
class Line:
    id: int
    from_bus: int
    to_bus: int
    susceptance: float
    flow_limit_base: float
    flow_limit_ctg: float


@dataclass(frozen=True)
class PwlCurve:
    """Piecewise-linear curve as ordered ``(slope, width)`` segments.

    ``kind`` is ``"cost"`` (convex, slopes nondecreasing) or ``"benefit"``
    (concave, slopes nonincreasing).
    """

    segments: tuple[tuple[float, float], ...]
    kind: str

    @property
    def slopes(self) -> np.ndarray:
        return np.array([s for s, _ in self.segments], dtype=float)

    @property
    def widths(self) -> np.ndarray:
        return np.array([w for _, w in self.segments], dtype=float)

    @property
    def total_width(self) -> float:
        return float(math.fsum(w for _, w in self.segments))


@dataclass(frozen=True)
class Generator:
    id: int
    bus: int
    p_min: float
    p_max: float
    cost_curve: PwlCurve


@dataclass(frozen=True)
class Demand:
    id: int
    bus: int
    p_min: float
    p_max: float
    benefit_curve: PwlCurve


@dataclass(frozen=True)
class GridCase:
    buses: tuple[Bus, ...]
    lines: tuple[Line, ...]
    generators: tuple[Generator, ...]
    demands: tuple[Demand, ...]
    contingencies: tuple[int, ...]
    tau: float
    penalty_inj: float = DEFAULT_PENALTY
    penalty_flow: float = DEFAULT_PENALTY
    name: str = "case"
    base_mva: float | None = None

    def __post_init__(self):
        validate_case(self)

    @property
    def n_buses(self) -> int:
        return len(self.buses)

    @property
    def n_lines(self) -> int:
        return len(self.lines)

    @property
    def n_gens(self) -> int:
        return len(self.generators)

    @property
    def n_demands(self) -> int:
        return len(self.demands)

    @property
    def n_inputs(self) -> int:
        return self.n_gens + self.n_demands

    @property
    def slack(self) -> int:
        return next(b.id for b in self.buses if b.is_slack)

    def input_limits(self) -> tuple[np.ndarray, np.ndarray]:
        """Hard box of the concatenated ``(p_g, p_d)`` input."""
        lo = [g.p_min for g in self.generators] + [d.p_min for d in self.demands]
        hi = [g.p_max for g in self.generators] + [d.p_max for d in self.demands]
        return np.array(lo, dtype=float), np.array(hi, dtype=float)

    def replace(self, **changes) -> "GridCase":
        from dataclasses import replace

        return replace(self, **changes)


# --------------------------------------------------------------------------
# validation


def _check_curve(curve: PwlCurve, span: float, where: str) -> None:
    if not curve.segments:
        raise ValidationError(f"{where}: curve has no segments")
    for k, (slope, width) in enumerate(curve.segments):
        if not (math.isfinite(slope) and math.isfinite(width)):
            raise ValidationError(f"{where}.segments[{k}]: non-finite value")
        if width <= 0:
            raise ValidationError(f"{where}.segments[{k}]: width must be > 0, got {width}")
        if slope < 0:
            raise ValidationError(f"{where}.segments[{k}]: slope must be >= 0, got {slope}")
    slopes = curve.slopes
    if curve.kind == COST:
        if np.any(np.diff(slopes) < 0):
            raise ValidationError(f"{where}: cost curve slopes must be nondecreasing")
    elif curve.kind == BENEFIT:
        if np.any(np.diff(slopes) > 0):
            raise ValidationError(f"{where}: benefit curve slopes must be nonincreasing")
    else:
        raise ValidationError(f"{where}: unknown curve kind {curve.kind!r}")
    if curve.total_width < span * (1.0 - _WIDTH_RTOL) - _WIDTH_RTOL:
        raise ValidationError(
            f"{where}: total width {curve.total_width} shorter than p_max - p_min = {span}"
        )


def _check_dense_ids(items, label: str) -> None:
    for pos, item in enumerate(items):
        if item.id != pos:
            raise ValidationError(f"{label} {item.id}: ids must be contiguous 0..{len(items) - 1}")


def validate_case(case: GridCase) -> None:
    """Check every model invariant, raising with the offending entity id."""
    nb = len(case.buses)
    if nb < 1:
        raise ValidationError("case has no buses")
    _check_dense_ids(case.buses, "bus")
    _check_dense_ids(case.lines, "line")
    _check_dense_ids(case.generators, "generator")
    _check_dense_ids(case.demands, "demand")

    slacks = [b.id for b in case.buses if b.is_slack]
    if len(slacks) != 1:
        raise ValidationError(f"exactly one slack bus required, found {slacks}")

    for ln in case.lines:
        where = f"line {ln.id}"
        for b in (ln.from_bus, ln.to_bus):
            if not 0 <= b < nb:
                raise ValidationError(f"{where}: bus {b} does not exist")
        if ln.from_bus == ln.to_bus:
            raise ValidationError(f"{where}: from_bus equals to_bus ({ln.from_bus})")
        for attr in ("susceptance", "flow_limit_base", "flow_limit_ctg"):
            val = getattr(ln, attr)
            if not (math.isfinite(val) and val > 0):
                raise ValidationError(f"{where}: {attr} must be finite and > 0, got {val}")

    for label, devices, curve_attr in (
        ("generator", case.generators, "cost_curve"),
        ("demand", case.demands, "benefit_curve"),
    ):
        want = COST if curve_attr == "cost_curve" else BENEFIT
        for dev in devices:
            where = f"{label} {dev.id}"
            if not 0 <= dev.bus < nb:
                raise ValidationError(f"{where}: bus {dev.bus} does not exist")
            if not (math.isfinite(dev.p_min) and math.isfinite(dev.p_max)):
                raise ValidationError(f"{where}: non-finite limits")
            if dev.p_min > dev.p_max:
                raise ValidationError(f"{where}: p_min {dev.p_min} > p_max {dev.p_max}")
            curve = getattr(dev, curve_attr)
            if curve.kind != want:
                raise ValidationError(f"{where}: curve kind must be {want!r}")
            _check_curve(curve, dev.p_max - dev.p_min, where)

    seen = set()
    for c in case.contingencies:
        if not 0 <= c < len(case.lines):
            raise ValidationError(f"contingency line {c} does not exist")
        if c in seen:
            raise ValidationError(f"contingency line {c} listed twice")
        seen.add(c)

    for attr in ("tau", "penalty_inj", "penalty_flow"):
        val = getattr(case, attr)
        if not (math.isfinite(val) and val > 0):
            raise ValidationError(f"{attr} must be finite and > 0, got {val}")

    if not is_connected(nb, [(ln.from_bus, ln.to_bus) for ln in case.lines]):
        raise DisconnectedError(f"case {case.name!r}: network is not connected")


def is_connected(n_buses: int, edges) -> bool:
    edges = list(edges)
    if n_buses <= 1:
        return True
    if not edges:
        return False
    rows, cols = zip(*edges)
    adj = sp.coo_matrix((np.ones(len(edges)), (rows, cols)), shape=(n_buses, n_buses))
    n_comp, _ = connected_components(adj, directed=False)
    return n_comp == 1


# --------------------------------------------------------------------------
# JSON case files

_TOP_KEYS = {"buses", "lines", "generators", "demands", "contingencies", "tau",
             "penalty_inj", "penalty_flow", "name", "base_mva"}
_REQUIRED_TOP = {"buses", "lines", "generators", "demands", "tau"}
_BUS_KEYS = ({"id"}, {"slack"})
_LINE_KEYS = ({"id", "from", "to", "susceptance", "limit_base"}, {"limit_ctg"})
_GEN_KEYS = ({"id", "bus", "p_min", "p_max", "cost"}, set())
_DEM_KEYS = ({"id", "bus", "p_min", "p_max", "benefit"}, set())


def _keys(obj, schema, where):
    required, optional = schema
    if not isinstance(obj, dict):
        raise SchemaError(f"{where}: expected an object")
    missing = required - obj.keys()
    if missing:
        raise SchemaError(f"{where}: missing keys {sorted(missing)}")
    unknown = obj.keys() - required - optional
    if unknown:
        raise SchemaError(f"{where}: unknown keys {sorted(unknown)}")


def _num(val, where) -> float:
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise SchemaError(f"{where}: expected a number, got {val!r}")
    return float(val)


def _int(val, where) -> int:
    if isinstance(val, bool) or not isinstance(val, int):
        raise SchemaError(f"{where}: expected an integer, got {val!r}")
    return val


def _list(val, where) -> list:
    if not isinstance(val, list):
        raise SchemaError(f"{where}: expected an array")
    return val


def _curve(val, kind, where) -> PwlCurve:
    segs = []
    for k, seg in enumerate(_list(val, where)):
        if not isinstance(seg, list) or len(seg) != 2:
            raise SchemaError(f"{where}[{k}]: expected [slope, width]")
        segs.append((_num(seg[0], f"{where}[{k}][0]"), _num(seg[1], f"{where}[{k}][1]")))
    return PwlCurve(tuple(segs), kind)


def case_from_dict(data: dict) -> GridCase:
    """Build a validated :class:`GridCase` from decoded case-file JSON."""
    if not isinstance(data, dict):
        raise SchemaError("case: top level must be an object")
    missing = _REQUIRED_TOP - data.keys()
    if missing:
        raise SchemaError(f"case: missing keys {sorted(missing)}")
    unknown = data.keys() - _TOP_KEYS
    if unknown:
        raise SchemaError(f"case: unknown keys {sorted(unknown)}")

    buses = []
    for k, b in enumerate(_list(data["buses"], "buses")):
        _keys(b, _BUS_KEYS, f"buses[{k}]")
        slack = b.get("slack", False)
        if not isinstance(slack, bool):
            raise SchemaError(f"buses[{k}].slack: expected a boolean")
        buses.append(Bus(_int(b["id"], f"buses[{k}].id"), slack))

    lines = []
    for k, ln in enumerate(_list(data["lines"], "lines")):
        where = f"lines[{k}]"
        _keys(ln, _LINE_KEYS, where)
        limit_base = _num(ln["limit_base"], f"{where}.limit_base")
        if "limit_ctg" in ln:
            limit_ctg = _num(ln["limit_ctg"], f"{where}.limit_ctg")
        else:
            warnings.warn(f"line {ln['id']}: limit_ctg missing, using limit_base", stacklevel=2)
            limit_ctg = limit_base
        lines.append(Line(
            _int(ln["id"], f"{where}.id"),
            _int(ln["from"], f"{where}.from"),
            _int(ln["to"], f"{where}.to"),
            _num(ln["susceptance"], f"{where}.susceptance"),
            limit_base,
            limit_ctg,
        ))

    gens = []
    for k, g in enumerate(_list(data["generators"], "generators")):
        where = f"generators[{k}]"
        _keys(g, _GEN_KEYS, where)
        gens.append(Generator(
            _int(g["id"], f"{where}.id"), _int(g["bus"], f"{where}.bus"),
            _num(g["p_min"], f"{where}.p_min"), _num(g["p_max"], f"{where}.p_max"),
            _curve(g["cost"], COST, f"{where}.cost"),
        ))

    dems = []
    for k, d in enumerate(_list(data["demands"], "demands")):
        where = f"demands[{k}]"
        _keys(d, _DEM_KEYS, where)
        dems.append(Demand(
            _int(d["id"], f"{where}.id"), _int(d["bus"], f"{where}.bus"),
            _num(d["p_min"], f"{where}.p_min"), _num(d["p_max"], f"{where}.p_max"),
            _curve(d["benefit"], BENEFIT, f"{where}.benefit"),
        ))

    ctgs = tuple(_int(c, f"contingencies[{k}]")
                 for k, c in enumerate(_list(data.get("contingencies", []), "contingencies")))

    name = data.get("name", "case")
    if not isinstance(name, str):
        raise SchemaError("name: expected a string")
    base_mva = data.get("base_mva")
    if base_mva is not None:
        base_mva = _num(base_mva, "base_mva")

    # sort by id so positional indexing matches ids; duplicates surface in validation
    key = lambda item: item.id  # noqa: E731
    return GridCase(
        buses=tuple(sorted(buses, key=key)),
        lines=tuple(sorted(lines, key=key)),
        generators=tuple(sorted(gens, key=key)),
        demands=tuple(sorted(dems, key=key)),
        contingencies=ctgs,
        tau=_num(data["tau"], "tau"),
        penalty_inj=_num(data.get("penalty_inj", DEFAULT_PENALTY), "penalty_inj"),
        penalty_flow=_num(data.get("penalty_flow", DEFAULT_PENALTY), "penalty_flow"),
        name=name,
        base_mva=base_mva,
    )


def parse_case(text: str) -> GridCase:
    """Parse case-file text (UTF-8 JSON) into a validated :class:`GridCase`."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"case file is not valid JSON: {exc}") from exc
    return case_from_dict(data)


def load_case(path) -> GridCase:
    return parse_case(Path(path).read_text(encoding="utf-8"))


def case_to_dict(case: GridCase) -> dict:
    out = {
        "name": case.name,
        "buses": [{"id": b.id, "slack": True} if b.is_slack else {"id": b.id}
                  for b in case.buses],
        "lines": [{"id": ln.id, "from": ln.from_bus, "to": ln.to_bus,
                   "susceptance": ln.susceptance, "limit_base": ln.flow_limit_base,
                   "limit_ctg": ln.flow_limit_ctg} for ln in case.lines],
        "generators": [{"id": g.id, "bus": g.bus, "p_min": g.p_min, "p_max": g.p_max,
                        "cost": [list(s) for s in g.cost_curve.segments]}
                       for g in case.generators],
        "demands": [{"id": d.id, "bus": d.bus, "p_min": d.p_min, "p_max": d.p_max,
                     "benefit": [list(s) for s in d.benefit_curve.segments]}
                    for d in case.demands],
        "contingencies": list(case.contingencies),
        "tau": case.tau,
        "penalty_inj": case.penalty_inj,
        "penalty_flow": case.penalty_flow,
    }
    if case.base_mva is not None:
        out["base_mva"] = case.base_mva
    return out


def serialize(case: GridCase) -> str:
    return json.dumps(case_to_dict(case), indent=1)


# --------------------------------------------------------------------------
# injection assembly


@dataclass(frozen=True)
class InjectionMap:
    """Bus aggregation maps with ``p_inj = A_g @ p_g - A_d @ p_d``."""

    A_g: sp.csr_matrix
    A_d: sp.csr_matrix
    stacked: sp.csr_matrix = field(repr=False)  # [A_g, -A_d], acts on the (p_g, p_d) input

    def apply(self, p_g, p_d) -> np.ndarray:
        return self.A_g @ np.asarray(p_g, dtype=float) - self.A_d @ np.asarray(p_d, dtype=float)


def net_injection_map(case: GridCase) -> InjectionMap:
    nb = case.n_buses
    A_g = sp.csr_matrix(
        (np.ones(case.n_gens), ([g.bus for g in case.generators], np.arange(case.n_gens))),
        shape=(nb, case.n_gens),
    )
    A_d = sp.csr_matrix(
        (np.ones(case.n_demands), ([d.bus for d in case.demands], np.arange(case.n_demands))),
        shape=(nb, case.n_demands),
    )
    stacked = sp.hstack([A_g, -A_d], format="csr")
    return InjectionMap(A_g, A_d, stacked)
