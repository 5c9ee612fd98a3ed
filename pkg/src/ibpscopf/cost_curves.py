"""Piecewise-linear cost/benefit curves compiled to ReLU cascades.

A convex cost curve is a plain sum of shifted ReLUs whose weights are the
slope increments. A concave benefit curve uses the capped recursion

    F*_i(x) = min(F*_{i-1}(x) + a_i ReLU(x - b_i), U_i),   F*_0 = 0,

with ``a_i`` the raw segment slopes, ``b_i`` the segment start points and
``U_i`` the cumulative value at the end of segment ``i``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import interval_engine as ie
from .errors import CurveShapeError, DomainError
from .grid_model import BENEFIT, COST, PwlCurve
from .interval_engine import IntervalVec

_DOMAIN_RTOL = 1e-12


@dataclass(frozen=True, eq=False)
class CompiledCurve:
    kind: str
    slopes: np.ndarray  # ReLU weights: increments (cost) or raw slopes (benefit)
    shifts: np.ndarray  # segment start points, strictly increasing, shifts[0] = p_min
    caps: np.ndarray | None  # cumulative values U_i, benefit curves only
    domain_max: float

    @property
    def p_min(self) -> float:
        return float(self.shifts[0])

    @property
    def relu_terms(self) -> list[tuple[float, float]]:
        return list(zip(self.slopes.tolist(), self.shifts.tolist()))

    def cascade(self, x) -> np.ndarray:
        """Evaluate the compiled ReLU form at any real ``x`` (no domain check)."""
        x = np.asarray(x, dtype=float)
        if self.kind == COST:
            return sum(a * np.maximum(x - b, 0.0) for a, b in zip(self.slopes, self.shifts))
        out = np.zeros_like(x)
        for a, b, cap in zip(self.slopes, self.shifts, self.caps):
            out = np.minimum(out + a * np.maximum(x - b, 0.0), cap)
        return out

    def check_domain(self, lo, hi) -> None:
        tol = _DOMAIN_RTOL * max(1.0, abs(self.p_min), abs(self.domain_max))
        if np.any(np.asarray(lo) < self.p_min - tol) or np.any(np.asarray(hi) > self.domain_max + tol):
            raise DomainError(
                f"evaluation outside curve domain [{self.p_min}, {self.domain_max}]"
            )


def compile_curve(curve: PwlCurve, p_min: float) -> CompiledCurve:
    slopes = curve.slopes
    widths = curve.widths
    if curve.kind == COST and np.any(np.diff(slopes) < 0):
        raise CurveShapeError("convex cost curve has a decreasing slope")
    if curve.kind == BENEFIT and np.any(np.diff(slopes) > 0):
        raise CurveShapeError("concave benefit curve has an increasing slope")
    if curve.kind not in (COST, BENEFIT):
        raise CurveShapeError(f"unknown curve kind {curve.kind!r}")
    if np.any(widths <= 0) or np.any(slopes < 0):
        raise CurveShapeError("curve widths must be > 0 and slopes >= 0")

    shifts = p_min + np.concatenate(([0.0], np.cumsum(widths)[:-1]))
    domain_max = p_min + curve.total_width
    if curve.kind == COST:
        return CompiledCurve(COST, np.diff(slopes, prepend=0.0), shifts, None, domain_max)
    return CompiledCurve(BENEFIT, slopes.copy(), shifts, np.cumsum(slopes * widths), domain_max)


# short alias
compile = compile_curve  # noqa: A001


def eval_concrete(cc: CompiledCurve, x) -> np.ndarray:
    cc.check_domain(x, x)
    return cc.cascade(x)


def eval_interval(cc: CompiledCurve, x: IntervalVec, strict_cascade: bool = False) -> IntervalVec:
    """Interval image of the curve over ``x``.

    Both curve kinds are nondecreasing, so the default evaluates the two
    endpoints. ``strict_cascade`` instead pushes the interval through every
    ReLU/add/min node.
    """
    cc.check_domain(x.lower, x.upper)
    if not strict_cascade:
        return IntervalVec(cc.cascade(x.lower), cc.cascade(x.upper))
    return _cascade_interval(cc.kind, cc.slopes, cc.shifts, cc.caps, x)


def _cascade_interval(kind, slopes, shifts, caps, x: IntervalVec) -> IntervalVec:
    acc = IntervalVec.point(np.zeros(x.shape))
    for k in range(len(slopes) if np.ndim(slopes) == 1 else slopes.shape[-1]):
        a = slopes[..., k]
        term = ie.hadamard_const(a, ie.relu_iv(ie.shift(x, -shifts[..., k])))
        acc = ie.add(acc, term)
        if kind == BENEFIT:
            acc = ie.minimum_const(acc, caps[..., k])
    return acc


class CurveBank:
    """All curves of one kind stacked for vectorized evaluation.

    Devices with fewer segments are padded with zero-weight terms (and a
    repeated final cap), which leaves their values unchanged.
    """

    def __init__(self, compiled: list[CompiledCurve], kind: str):
        self.kind = kind
        self.n = len(compiled)
        width = max((len(c.slopes) for c in compiled), default=1)
        self.slopes = np.zeros((self.n, width))
        self.shifts = np.zeros((self.n, width))
        self.caps = np.zeros((self.n, width))
        for i, c in enumerate(compiled):
            k = len(c.slopes)
            self.slopes[i, :k] = c.slopes
            self.shifts[i, :k] = c.shifts
            self.shifts[i, k:] = c.shifts[-1]
            if kind == BENEFIT:
                self.caps[i, :k] = c.caps
                self.caps[i, k:] = c.caps[-1]
        self.p_min = np.array([c.p_min for c in compiled])
        self.domain_max = np.array([c.domain_max for c in compiled])

    @classmethod
    def from_devices(cls, devices, kind: str) -> "CurveBank":
        attr = "cost_curve" if kind == COST else "benefit_curve"
        return cls([compile_curve(getattr(d, attr), d.p_min) for d in devices], kind)

    def check_domain(self, lo, hi) -> None:
        tol = _DOMAIN_RTOL * np.maximum(1.0, np.maximum(np.abs(self.p_min), np.abs(self.domain_max)))
        if np.any(lo < self.p_min - tol) or np.any(hi > self.domain_max + tol):
            raise DomainError(f"{self.kind} curve evaluated outside its device box")

    def cascade(self, x) -> np.ndarray:
        """Per-device values for ``x`` of shape ``(..., n)``."""
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for k in range(self.slopes.shape[1]):
            term = self.slopes[:, k] * np.maximum(x - self.shifts[:, k], 0.0)
            out = out + term
            if self.kind == BENEFIT:
                out = np.minimum(out, self.caps[:, k])
        return out

    def concrete(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        self.check_domain(x, x)
        return self.cascade(x)

    def interval(self, x: IntervalVec, strict_cascade: bool = False) -> IntervalVec:
        self.check_domain(x.lower, x.upper)
        if not strict_cascade:
            return IntervalVec(self.cascade(x.lower), self.cascade(x.upper))
        return _cascade_interval(self.kind, self.slopes, self.shifts, self.caps, x)
