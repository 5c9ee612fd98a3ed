"""Closed interval arrays and sound propagation rules (interval bound propagation).

Intervals are stored as two dense arrays of equal shape. No outward rounding
is applied; bounds are sound in real arithmetic. Leading axes are treated as
batch axes by :func:`affine`, so a stack of input boxes propagates in one pass.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .errors import DimensionError, NegativeRadiusError, NonFiniteError


@dataclass(frozen=True, eq=False)
class IntervalVec:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float)
        hi = np.asarray(self.upper, dtype=float)
        if lo.shape != hi.shape:
            raise DimensionError(f"bound shapes differ: {lo.shape} vs {hi.shape}")
        if not (np.isfinite(lo).all() and np.isfinite(hi).all()):
            raise NonFiniteError("interval contains NaN or infinite entries")
        if np.any(lo > hi):
            k = int(np.flatnonzero(lo > hi)[0])
            raise ValueError(f"lower > upper at flat index {k}: {lo.flat[k]} > {hi.flat[k]}")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def _trusted(cls, lower, upper) -> "IntervalVec":
        # op outputs built from validated operands; non-finite values propagate
        # to the graph outputs, which are checked there
        obj = object.__new__(cls)
        object.__setattr__(obj, "lower", lower)
        object.__setattr__(obj, "upper", upper)
        return obj

    def check_finite(self) -> "IntervalVec":
        if not (np.isfinite(self.lower).all() and np.isfinite(self.upper).all()):
            raise NonFiniteError("interval contains NaN or infinite entries")
        return self

    @classmethod
    def point(cls, x) -> "IntervalVec":
        x = np.asarray(x, dtype=float)
        return cls(x, x.copy())

    @property
    def shape(self):
        return self.lower.shape

    @property
    def mid(self) -> np.ndarray:
        return 0.5 * (self.upper + self.lower)

    @property
    def radius(self) -> np.ndarray:
        return 0.5 * (self.upper - self.lower)

    def __len__(self):
        return self.lower.shape[-1]

    def __getitem__(self, key) -> "IntervalVec":
        return IntervalVec(self.lower[key], self.upper[key])

    def contains(self, x, atol: float = 0.0) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return (x >= self.lower - atol) & (x <= self.upper + atol)

    def subset_of(self, other: "IntervalVec") -> bool:
        return bool(np.all(self.lower >= other.lower) and np.all(self.upper <= other.upper))

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return add(self, neg(other))

    def __neg__(self):
        return neg(self)

    def __repr__(self):
        return f"IntervalVec(lower={self.lower!r}, upper={self.upper!r})"


def from_box(center, radius) -> IntervalVec:
    center = np.asarray(center, dtype=float)
    radius = np.asarray(radius, dtype=float)
    if np.any(radius < 0):
        raise NegativeRadiusError("box radius must be nonnegative")
    return IntervalVec(center - radius, center + radius)


def from_limits(lower, upper) -> IntervalVec:
    return IntervalVec(np.asarray(lower, dtype=float), np.asarray(upper, dtype=float))


def _matvec(W, x: np.ndarray) -> np.ndarray:
    """``W @ x`` along the last axis of ``x``."""
    if sp.issparse(W):
        flat = x.reshape(-1, x.shape[-1])
        return np.asarray(W @ flat.T).T.reshape(x.shape[:-1] + (W.shape[0],))
    return x @ W.T


class Affine:
    """Affine map ``x -> W x + b`` with a lazily cached ``|W|``."""

    def __init__(self, W, b=None):
        self.W = W if sp.issparse(W) else np.asarray(W, dtype=float)
        if self.W.ndim != 2:
            raise DimensionError("weight must be a matrix")
        self.b = np.zeros(self.W.shape[0]) if b is None else np.asarray(b, dtype=float)
        if self.b.shape != (self.W.shape[0],):
            raise DimensionError(f"bias shape {self.b.shape} does not match {self.W.shape[0]} rows")

    @cached_property
    def abs_W(self):
        return abs(self.W)

    @property
    def shape(self):
        return self.W.shape

    def _check(self, n):
        if n != self.W.shape[1]:
            raise DimensionError(f"input length {n} does not match {self.W.shape[1]} columns")

    def concrete(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        self._check(x.shape[-1])
        return _matvec(self.W, x) + self.b

    def interval(self, x: IntervalVec) -> IntervalVec:
        self._check(x.shape[-1])
        mu = _matvec(self.W, x.mid) + self.b
        sigma = _matvec(self.abs_W, x.radius)
        return IntervalVec._trusted(mu - sigma, mu + sigma)


def affine(W, b, x: IntervalVec) -> IntervalVec:
    """Interval image of ``W x + b`` via the centre/radius rule."""
    return Affine(W, b).interval(x)


def abs_iv(x: IntervalVec) -> IntervalVec:
    lo, hi = x.lower, x.upper
    a, b = np.abs(lo), np.abs(hi)
    straddle = (lo < 0) & (hi > 0)
    return IntervalVec._trusted(np.where(straddle, 0.0, np.minimum(a, b)), np.maximum(a, b))


def relu_iv(x: IntervalVec) -> IntervalVec:
    return IntervalVec._trusted(np.maximum(x.lower, 0.0), np.maximum(x.upper, 0.0))


def minimum_const(x: IntervalVec, c) -> IntervalVec:
    """Image of ``min(x, c)``: caps the interval from above."""
    return IntervalVec._trusted(np.minimum(x.lower, c), np.minimum(x.upper, c))


def maximum_const(x: IntervalVec, c) -> IntervalVec:
    """Image of ``max(x, c)``: floors the interval from below."""
    return IntervalVec._trusted(np.maximum(x.lower, c), np.maximum(x.upper, c))


# clip aliases named after which side gets clipped
clip_max_const = minimum_const
clip_min_const = maximum_const


def hadamard_const(A, x: IntervalVec) -> IntervalVec:
    """Element-wise product of a constant array with an interval (broadcasting)."""
    A = np.asarray(A, dtype=float)
    try:
        p, q = A * x.lower, A * x.upper
    except ValueError as exc:
        raise DimensionError(str(exc)) from exc
    return IntervalVec._trusted(np.minimum(p, q), np.maximum(p, q))


def scale(c: float, x: IntervalVec) -> IntervalVec:
    if c >= 0:
        return IntervalVec._trusted(c * x.lower, c * x.upper)
    return IntervalVec._trusted(c * x.upper, c * x.lower)


def add(x: IntervalVec, y: IntervalVec) -> IntervalVec:
    try:
        lo, hi = x.lower + y.lower, x.upper + y.upper
    except ValueError as exc:
        raise DimensionError(str(exc)) from exc
    return IntervalVec._trusted(lo, hi)


def neg(x: IntervalVec) -> IntervalVec:
    return IntervalVec._trusted(-x.upper, -x.lower)


def shift(x: IntervalVec, c) -> IntervalVec:
    """``x + c`` for a constant array ``c``."""
    return IntervalVec._trusted(x.lower + c, x.upper + c)


def sum_all(x: IntervalVec, axis=None) -> IntervalVec:
    return IntervalVec._trusted(np.sum(x.lower, axis=axis), np.sum(x.upper, axis=axis))


def broadcast_rows(x: IntervalVec, n_rows: int) -> IntervalVec:
    """Replicate the last-axis vector across ``n_rows`` rows (``1 x^T``)."""
    shape = x.shape[:-1] + (n_rows, x.shape[-1])
    return IntervalVec._trusted(np.broadcast_to(x.lower[..., None, :], shape),
                       np.broadcast_to(x.upper[..., None, :], shape))


def broadcast_cols(x: IntervalVec, n_cols: int) -> IntervalVec:
    """Replicate the last-axis vector across ``n_cols`` columns (``x 1^T``)."""
    shape = x.shape + (n_cols,)
    return IntervalVec._trusted(np.broadcast_to(x.lower[..., None], shape),
                       np.broadcast_to(x.upper[..., None], shape))


def masked_rank_combine(M, B, f: IntervalVec, w: IntervalVec, abs_B=None) -> IntervalVec:
    """Interval of ``M * (1 f^T) - B * (w 1^T)`` for constant ``M``, ``B``.

    Standard interval arithmetic in centre/radius form; ``f`` is broadcast
    across rows and ``w`` across columns.
    """
    M = np.asarray(M, dtype=float)
    abs_B = np.abs(B) if abs_B is None else abs_B
    fm, fr = f.mid[..., None, :], f.radius[..., None, :]
    wm, wr = w.mid[..., :, None], w.radius[..., :, None]
    try:
        centre = M * fm - B * wm
        radius = np.abs(M) * fr + abs_B * wr
    except ValueError as exc:
        raise DimensionError(str(exc)) from exc
    return IntervalVec._trusted(centre - radius, centre + radius)
