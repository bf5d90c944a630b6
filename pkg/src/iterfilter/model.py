"""Immutable data types shared by the solver, ingest and attack modules.

Ratings are stored in coordinate form (one row per evaluation), sorted by
``(rater, item)``. Every per-evaluation quantity, trust included, is an array
aligned with that canonical order, so reductions over raters or items are plain
``np.bincount`` calls with a fixed summation order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

TRUST_KINDS = ("linear", "exponential", "reciprocal")


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class SparseRatings:
    """Sparse ``n_raters x n_items`` matrix of evaluations normalized to [0, 1].

    Build instances with :func:`build_sparse_ratings` rather than calling the
    constructor directly.

    Attributes
    ----------
    rater, item : ndarray of int64
        Coordinates of each evaluation, sorted by ``(rater, item)``.
    value : ndarray of float64
        Normalized evaluation in [0, 1].
    scale : tuple of float
        ``(min_raw, max_raw)`` of the raw rating scale.
    rater_ids, item_ids : tuple, optional
        Original identifiers indexed by dense position.
    """

    n_raters: int
    n_items: int
    rater: np.ndarray
    item: np.ndarray
    value: np.ndarray
    scale: tuple = (0.0, 1.0)
    rater_ids: Optional[tuple] = None
    item_ids: Optional[tuple] = None
    _rater_ptr: np.ndarray = field(init=False, repr=False)
    _item_order: np.ndarray = field(init=False, repr=False)
    _item_ptr: np.ndarray = field(init=False, repr=False)
    _item_range: tuple = field(init=False, repr=False)

    def __post_init__(self):
        for name in ("rater", "item"):
            object.__setattr__(self, name, _frozen(np.asarray(getattr(self, name), dtype=np.int64)))
        object.__setattr__(self, "value", _frozen(np.asarray(self.value, dtype=np.float64)))
        ptr = np.zeros(self.n_raters + 1, dtype=np.int64)
        np.cumsum(np.bincount(self.rater, minlength=self.n_raters), out=ptr[1:])
        object.__setattr__(self, "_rater_ptr", _frozen(ptr))
        order = np.lexsort((self.rater, self.item))
        object.__setattr__(self, "_item_order", _frozen(order))
        iptr = np.zeros(self.n_items + 1, dtype=np.int64)
        np.cumsum(np.bincount(self.item, minlength=self.n_items), out=iptr[1:])
        object.__setattr__(self, "_item_ptr", _frozen(iptr))
        lo = np.full(self.n_items, np.nan)
        hi = np.full(self.n_items, np.nan)
        if self.value.size:
            np.fmin.at(lo, self.item, self.value)
            np.fmax.at(hi, self.item, self.value)
        object.__setattr__(self, "_item_range", (_frozen(lo), _frozen(hi)))

    @property
    def nnz(self) -> int:
        return int(self.value.size)

    @property
    def shape(self) -> tuple:
        return (self.n_raters, self.n_items)

    @property
    def m(self) -> np.ndarray:
        """Number of items rated by each rater (``m_i``)."""
        return np.diff(self._rater_ptr)

    @property
    def item_counts(self) -> np.ndarray:
        """Number of ratings received by each item."""
        return np.diff(self._item_ptr)

    @property
    def item_min(self) -> np.ndarray:
        return self._item_range[0]

    @property
    def item_max(self) -> np.ndarray:
        return self._item_range[1]

    @property
    def rater_present(self) -> np.ndarray:
        return self.m > 0

    @property
    def item_present(self) -> np.ndarray:
        return self.item_counts > 0

    def rater_slice(self, i: int) -> slice:
        """Slice of the entry arrays holding rater ``i``'s evaluations."""
        return slice(int(self._rater_ptr[i]), int(self._rater_ptr[i + 1]))

    def rater_index(self, i: int) -> list:
        """``[(item, value), ...]`` rated by rater ``i``."""
        s = self.rater_slice(i)
        return list(zip(self.item[s].tolist(), self.value[s].tolist()))

    def item_entries(self, j: int) -> np.ndarray:
        """Entry positions of the evaluations received by item ``j``."""
        return self._item_order[self._item_ptr[j]:self._item_ptr[j + 1]]

    def item_index(self, j: int) -> list:
        """``[(rater, value), ...]`` evaluating item ``j``."""
        pos = self.item_entries(j)
        return list(zip(self.rater[pos].tolist(), self.value[pos].tolist()))

    def triples(self) -> list:
        return list(zip(self.rater.tolist(), self.item.tolist(), self.value.tolist()))

    def denormalize(self, x):
        lo, hi = self.scale
        return lo + np.asarray(x, dtype=np.float64) * (hi - lo)

    def rater_id(self, i: int):
        return self.rater_ids[i] if self.rater_ids is not None else i

    def item_id(self, j: int):
        return self.item_ids[j] if self.item_ids is not None else j

    def to_dense(self, fill: float = np.nan) -> np.ndarray:
        out = np.full(self.shape, fill)
        out[self.rater, self.item] = self.value
        return out

    def keys(self) -> np.ndarray:
        """Linear index ``rater * n_items + item`` of every entry (sorted)."""
        return self.rater * self.n_items + self.item

    def __eq__(self, other):
        if not isinstance(other, SparseRatings):
            return NotImplemented
        return (
            self.shape == other.shape
            and tuple(self.scale) == tuple(other.scale)
            and np.array_equal(self.rater, other.rater)
            and np.array_equal(self.item, other.item)
            and np.array_equal(self.value, other.value)
            and self.rater_ids == other.rater_ids
            and self.item_ids == other.item_ids
        )

    __hash__ = None


def from_arrays(rater, item, value, n_raters=None, n_items=None, scale=(0.0, 1.0),
                rater_ids=None, item_ids=None) -> SparseRatings:
    """Build :class:`SparseRatings` from already-normalized coordinate arrays.

    Entries are sorted into canonical order; duplicates and values outside
    [0, 1] raise ``ValueError``.
    """
    rater = np.asarray(rater, dtype=np.int64).ravel()
    item = np.asarray(item, dtype=np.int64).ravel()
    value = np.asarray(value, dtype=np.float64).ravel()
    if not (rater.size == item.size == value.size):
        raise ValueError("rater, item and value must have equal lengths")
    if rater.size and (rater.min() < 0 or item.min() < 0):
        raise ValueError("indices must be nonnegative")
    if n_raters is None:
        n_raters = int(rater.max()) + 1 if rater.size else 0
    if n_items is None:
        n_items = int(item.max()) + 1 if item.size else 0
    if rater.size and (rater.max() >= n_raters or item.max() >= n_items):
        raise ValueError("index out of bounds for the given dimensions")
    bad = ~((value >= 0.0) & (value <= 1.0))
    if bad.any():
        k = int(np.flatnonzero(bad)[0])
        raise ValueError(f"value {value[k]!r} at position {k} is outside [0, 1]")
    order = np.lexsort((item, rater))
    rater, item, value = rater[order], item[order], value[order]
    dup = (np.diff(rater) == 0) & (np.diff(item) == 0)
    if dup.any():
        k = int(np.flatnonzero(dup)[0])
        raise ValueError(f"duplicate rating for pair (rater={rater[k]}, item={item[k]})")
    return SparseRatings(int(n_raters), int(n_items), rater, item, value, tuple(map(float, scale)),
                         None if rater_ids is None else tuple(rater_ids),
                         None if item_ids is None else tuple(item_ids))


def build_sparse_ratings(triples: Iterable[Sequence], scale=(0.0, 1.0), n_raters=None,
                         n_items=None) -> SparseRatings:
    """Normalize raw ``(rater, item, value)`` triples onto [0, 1].

    Values map affinely: ``(raw - min_raw) / (max_raw - min_raw)``.

    Raises
    ------
    ValueError
        On a degenerate scale, a raw value outside the scale (the message names
        the row number) or a duplicated ``(rater, item)`` pair (the message
        names the pair and both rows).
    """
    lo, hi = float(scale[0]), float(scale[1])
    if not hi > lo:
        raise ValueError(f"scale max must exceed min, got {scale!r}")
    raters, items, values = [], [], []
    seen = {}
    for row, (i, j, raw) in enumerate(triples):
        raw = float(raw)
        if not lo <= raw <= hi:
            raise ValueError(f"row {row}: raw value {raw!r} outside scale [{lo}, {hi}]")
        key = (int(i), int(j))
        if key in seen:
            raise ValueError(f"duplicate rating for pair (rater={key[0]}, item={key[1]}) "
                             f"at rows {seen[key]} and {row}")
        seen[key] = row
        raters.append(key[0])
        items.append(key[1])
        values.append((raw - lo) / (hi - lo))
    return from_arrays(raters, items, values, n_raters, n_items, (lo, hi))


@dataclass(frozen=True, eq=False)
class TrustState:
    """Per-evaluation trust aligned with a :class:`SparseRatings` entry order,
    plus the per-rater belief divergence it was computed from."""

    trust: np.ndarray
    divergence: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "trust", _frozen(np.asarray(self.trust, dtype=np.float64)))
        object.__setattr__(self, "divergence", _frozen(np.asarray(self.divergence, dtype=np.float64)))


@dataclass(frozen=True)
class TrustFunctionSpec:
    """Trust as a decreasing function of belief divergence.

    ``linear``: ``c_j - d_i``; ``exponential``: ``exp(-c_j d_i)``;
    ``reciprocal``: ``1 / (c_j + d_i)``. ``c`` is a scalar or a per-item
    vector.
    """

    kind: str = "linear"
    c: object = 1.0

    def __post_init__(self):
        if self.kind not in TRUST_KINDS:
            raise ValueError(f"unknown trust function {self.kind!r}; expected one of {TRUST_KINDS}")
        c = np.asarray(self.c, dtype=np.float64)
        if c.ndim > 1:
            raise ValueError("c must be a scalar or a 1-d per-item vector")
        if not np.all(np.isfinite(c)) or np.any(c < 0):
            raise ValueError("c must be finite and nonnegative")
        if c.ndim == 1:
            c = _frozen(c.copy())
            object.__setattr__(self, "c", c)
        else:
            object.__setattr__(self, "c", float(c))

    @property
    def uniform(self) -> bool:
        return np.ndim(self.c) == 0

    @property
    def c0(self) -> Optional[float]:
        """The common constant, or ``None`` for per-item parameters."""
        return float(self.c) if self.uniform else None

    def per_item(self, n_items: int) -> np.ndarray:
        if self.uniform:
            return np.full(n_items, float(self.c))
        if self.c.size != n_items:
            raise ValueError(f"per-item c has length {self.c.size}, expected {n_items}")
        return np.asarray(self.c)

    @property
    def nonnegative_guaranteed(self) -> bool:
        """True when trust cannot go negative for ratings in [0, 1]."""
        return self.kind != "linear" or float(np.min(self.c)) >= 1.0

    @property
    def unique_fixed_point(self) -> bool:
        """False for ``reciprocal`` with some ``c_j == 0``: several fixed points may exist."""
        return not (self.kind == "reciprocal" and float(np.min(self.c)) == 0.0)


@dataclass(frozen=True)
class SolveConfig:
    """Solver settings.

    ``steps=None`` iterates to convergence; an integer applies exactly that many
    passes (streaming mode).
    """

    trust_fn: TrustFunctionSpec = field(default_factory=TrustFunctionSpec)
    tol: float = 1e-9
    max_iter: int = 200
    steps: Optional[int] = None
    newton: bool = False
    newton_trigger: float = 1e-4

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if self.steps is not None and self.steps < 1:
            raise ValueError("steps must be at least 1")
        if not self.newton_trigger > 0:
            raise ValueError("newton_trigger must be positive")

    @property
    def mode(self) -> str:
        return "to_convergence" if self.steps is None else "fixed_steps"


@dataclass(frozen=True)
class TraceRecord:
    """One iteration of the solver.

    ``step_norm`` is the infinity norm between this iteration's reputation
    and the previous one (``inf`` on the first pass). ``psi_gain`` is the
    increase of the objective since the previous iterate, evaluated from the
    differences directly so that it stays accurate once the change in ``psi``
    drops below the rounding level of ``psi`` itself.
    """

    iteration: int
    step_norm: float
    psi: float = math.nan
    psi_gain: float = math.nan
    event: str = ""


@dataclass(frozen=True, eq=False)
class ReputationReport:
    r: np.ndarray
    t: np.ndarray
    final_trust: TrustState
    trace: tuple
    iterations_used: int
    converged: bool
    scale: tuple = (0.0, 1.0)

    @property
    def d(self) -> np.ndarray:
        return self.final_trust.divergence

    @property
    def r_raw(self) -> np.ndarray:
        lo, hi = self.scale
        return lo + self.r * (hi - lo)

    @property
    def step_norms(self) -> np.ndarray:
        return np.array([rec.step_norm for rec in self.trace])

    @property
    def psi_trace(self) -> np.ndarray:
        return np.array([rec.psi for rec in self.trace])

    @property
    def events(self) -> list:
        return [(rec.iteration, rec.event) for rec in self.trace if rec.event]
