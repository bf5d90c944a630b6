"""Stateless formulas of the filtering iteration.

All reductions go through ``np.bincount`` over the canonical entry order, so
results are bitwise reproducible and each call costs O(number of evaluations).
Items nobody rated get reputation ``nan``; raters with no evaluations get
divergence ``nan``.
"""

from __future__ import annotations

import numpy as np

from .model import SparseRatings, TrustFunctionSpec, TrustState


class NegativeTrustError(ValueError):
    """Linear trust went negative because ``c_j`` is smaller than some ``d_i``."""


class ZeroTrustColumnError(ValueError):
    """An item's evaluations all carry zero trust, so its weights are undefined."""


def init_trust(ratings: SparseRatings) -> TrustState:
    """Every evaluation trusted equally (trust 1); divergence placeholder 0."""
    return TrustState(np.ones(ratings.nnz), np.zeros(ratings.n_raters))


def column_trust_sums(ratings: SparseRatings, trust) -> np.ndarray:
    trust = trust.trust if isinstance(trust, TrustState) else trust
    return np.bincount(ratings.item, weights=trust, minlength=ratings.n_items)


def weights(ratings: SparseRatings, trust: TrustState) -> np.ndarray:
    """Per-evaluation weights: trust normalized to sum to one over each item."""
    sums = column_trust_sums(ratings, trust)
    _check_columns(ratings, sums)
    return trust.trust / sums[ratings.item]


def _check_columns(ratings, sums):
    bad = ratings.item_present & ~(sums > 0)
    if bad.any():
        j = int(np.flatnonzero(bad)[0])
        raise ZeroTrustColumnError(
            f"item {ratings.item_id(j)!r} has zero total trust; apply the zero-row rule first")


def reputation_from_trust(ratings: SparseRatings, trust: TrustState) -> np.ndarray:
    """Trust-weighted mean of each item's evaluations."""
    sums = column_trust_sums(ratings, trust)
    _check_columns(ratings, sums)
    num = np.bincount(ratings.item, weights=trust.trust * ratings.value, minlength=ratings.n_items)
    with np.errstate(invalid="ignore", divide="ignore"):
        r = num / sums
    r[~ratings.item_present] = np.nan
    # Rounding can push a weighted mean one ulp outside the rated range.
    return np.clip(r, ratings.item_min, ratings.item_max)


def divergence(ratings: SparseRatings, r) -> np.ndarray:
    """Mean squared deviation of each rater's evaluations from ``r``."""
    r = np.asarray(r, dtype=np.float64)
    resid = ratings.value - r[ratings.item]
    sq = np.bincount(ratings.rater, weights=resid * resid, minlength=ratings.n_raters)
    with np.errstate(invalid="ignore", divide="ignore"):
        return sq / ratings.m


def trust_update(ratings: SparseRatings, d, spec: TrustFunctionSpec) -> TrustState:
    """Trust of every evaluation from its rater's divergence.

    Raises
    ------
    NegativeTrustError
        Linear trust with ``c_j < d_i`` for some evaluation ``(i, j)``.
    ZeroDivisionError
        Reciprocal trust with ``c_j = 0`` and ``d_i = 0``.
    """
    d = np.asarray(d, dtype=np.float64)
    c = spec.per_item(ratings.n_items)[ratings.item]
    de = d[ratings.rater]
    if spec.kind == "linear":
        T = c - de
        neg = T < 0
        if neg.any():
            k = int(np.flatnonzero(neg)[0])
            i, j = int(ratings.rater[k]), int(ratings.item[k])
            raise NegativeTrustError(
                f"negative trust {T[k]:.6g} for rater {ratings.rater_id(i)!r} on item "
                f"{ratings.item_id(j)!r}: c_j = {c[k]:.6g} < d_i = {de[k]:.6g}; increase c")
    elif spec.kind == "exponential":
        T = np.exp(-c * de)
    else:
        den = c + de
        zero = den == 0
        if zero.any():
            k = int(np.flatnonzero(zero)[0])
            raise ZeroDivisionError(
                f"reciprocal trust undefined for rater {ratings.rater_id(int(ratings.rater[k]))!r} "
                f"on item {ratings.item_id(int(ratings.item[k]))!r}: c_j = 0 and d_i = 0")
        T = 1.0 / den
    return TrustState(T, d)


def zero_rows(ratings: SparseRatings, trust: TrustState) -> np.ndarray:
    """Indices of raters whose every trust entry is exactly zero."""
    nonzero = np.bincount(ratings.rater, weights=(trust.trust != 0), minlength=ratings.n_raters)
    return np.flatnonzero(ratings.rater_present & (nonzero == 0))


def zero_row_fixup(ratings: SparseRatings, trust: TrustState) -> TrustState:
    """Replace each all-zero rater row of the trust matrix by a row of ones."""
    rows = zero_rows(ratings, trust)
    if rows.size == 0:
        return trust
    T = trust.trust.copy()
    T[np.isin(ratings.rater, rows)] = 1.0
    return TrustState(T, trust.divergence)


def trust_vector(d) -> np.ndarray:
    """Rater trust ``max_k d_k - d_i``: zero for the most divergent rater."""
    d = np.asarray(d, dtype=np.float64)
    if d.size == 0:
        raise ValueError("divergence vector is empty")
    return np.nanmax(d) - d


def _require_uniform(c0):
    if np.ndim(c0) != 0:
        raise ValueError("psi is defined for a uniform trust constant only")
    return float(c0)


def psi(ratings: SparseRatings, r, c0: float) -> float:
    """Squared Frobenius norm of the linear trust matrix at reputation ``r``.

    Equals ``sum_i m_i (c0 - d_i(r))**2``.
    """
    c0 = _require_uniform(c0)
    d = divergence(ratings, r)
    present = ratings.rater_present
    m = ratings.m[present]
    return float(np.sum(m * (c0 - d[present]) ** 2))


def psi_gain(ratings: SparseRatings, r_from, r_to, c0: float) -> float:
    """``psi(r_to) - psi(r_from)`` computed from the differences.

    Subtracting two ``psi`` values loses every digit once the iterates agree to
    about ``sqrt(eps)``; this form keeps full relative accuracy.
    """
    c0 = _require_uniform(c0)
    r_from = np.asarray(r_from, dtype=np.float64)
    r_to = np.asarray(r_to, dtype=np.float64)
    a, b = r_from[ratings.item], r_to[ratings.item]
    # (E - a)^2 - (E - b)^2 = (b - a)(2E - a - b)
    per_entry = (b - a) * (2.0 * ratings.value - a - b)
    m = ratings.m
    with np.errstate(invalid="ignore", divide="ignore"):
        drop = np.bincount(ratings.rater, weights=per_entry, minlength=ratings.n_raters) / m
        d_from = divergence(ratings, r_from)
        d_to = d_from - drop
        terms = m * drop * (2.0 * c0 - d_from - d_to)
    return float(np.sum(terms[ratings.rater_present]))


def grad_psi(ratings: SparseRatings, r, c0: float) -> np.ndarray:
    """Gradient of :func:`psi`: component ``j`` is ``4 sum_i (c0 - d_i)(E_ij - r_j)``."""
    c0 = _require_uniform(c0)
    r = np.asarray(r, dtype=np.float64)
    d = divergence(ratings, r)
    T = c0 - d[ratings.rater]
    resid = ratings.value - r[ratings.item]
    return 4.0 * np.bincount(ratings.item, weights=T * resid, minlength=ratings.n_items)


def hess_psi(ratings: SparseRatings, r, c0: float):
    """Hessian of :func:`psi` as a sparse ``n_items x n_items`` matrix.

    ``H_jl = 8 sum_i (1/m_i)(E_ij - r_j)(E_il - r_l) - 4 delta_jl sum_i T_ij``.
    """
    from scipy import sparse

    c0 = _require_uniform(c0)
    r = np.asarray(r, dtype=np.float64)
    d = divergence(ratings, r)
    resid = ratings.value - r[ratings.item]
    scaled = resid * np.sqrt(8.0 / ratings.m[ratings.rater])
    R = sparse.csr_matrix((scaled, (ratings.rater, ratings.item)), shape=ratings.shape)
    S = np.bincount(ratings.item, weights=c0 - d[ratings.rater], minlength=ratings.n_items)
    return (R.T @ R - sparse.diags(4.0 * S)).tocsc()


def one_pass(ratings: SparseRatings, r, spec: TrustFunctionSpec):
    """Steps (iii) then (ii): trust from ``r``, zero-row rule, next reputation.

    Returns ``(r_next, trust, fixed_rows)``.
    """
    d = divergence(ratings, r)
    T = trust_update(ratings, d, spec)
    rows = zero_rows(ratings, T)
    if rows.size:
        T = zero_row_fixup(ratings, T)
    return reputation_from_trust(ratings, T), T, rows
