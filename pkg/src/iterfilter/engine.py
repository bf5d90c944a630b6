"""Fixed-point driver: full solves, streaming epochs and Newton refinement."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import linalg, sparse
from scipy.sparse.linalg import spsolve

from . import kernel
from .model import (ReputationReport, SolveConfig, SparseRatings, TraceRecord,
                    TrustFunctionSpec, TrustState)

log = logging.getLogger(__name__)

# Dense Cholesky is cheap and gives a definiteness test up to this many items.
_DENSE_NEWTON_MAX = 4000


def inf_norm(a, b) -> float:
    diff = np.abs(np.asarray(a) - np.asarray(b))
    if diff.size == 0 or np.all(np.isnan(diff)):
        return 0.0
    return float(np.nanmax(diff))


def fixed_point_residual(ratings: SparseRatings, r, spec: TrustFunctionSpec) -> float:
    """Infinity norm of ``one_pass(r) - r`` over rated items."""
    r_next, _, _ = kernel.one_pass(ratings, r, spec)
    return inf_norm(r_next, r)


def _run(ratings, config, trust, n_passes, stop_on_tol, callback, newton):
    spec = config.trust_fn
    c0 = spec.c0 if spec.kind == "linear" else None
    trace = []
    r_prev = None
    converged = False
    newton_done = False
    pending = ""
    k = 0
    while k < n_passes:
        k += 1
        r = kernel.reputation_from_trust(ratings, trust)
        step = math.inf if r_prev is None else inf_norm(r, r_prev)
        d = kernel.divergence(ratings, r)
        new_trust = kernel.trust_update(ratings, d, spec)
        rows = kernel.zero_rows(ratings, new_trust)
        event, pending = pending, ""
        if rows.size:
            new_trust = kernel.zero_row_fixup(ratings, new_trust)
            event = ";".join(filter(None, [event, f"zero_row:{rows.size}"]))
            log.info("iteration %d: reset %d all-zero trust rows", k, rows.size)
        psi_val = gain = math.nan
        if c0 is not None:
            psi_val = kernel.psi(ratings, r, c0)
            if r_prev is not None:
                gain = kernel.psi_gain(ratings, r_prev, r, c0)
        trace.append(TraceRecord(k, step, psi_val, gain, event))
        trust = new_trust
        if callback is not None:
            callback(k, r, d, trust)
        if step < config.tol:
            converged = True
            if stop_on_tol:
                break
        if (newton and not newton_done and c0 is not None and step < config.newton_trigger
                and k < n_passes):
            newton_done = True
            r_new, info = _newton(ratings, r, c0, config.tol)
            for rec_step, rec_psi, rec_gain in info["records"]:
                k += 1
                trace.append(TraceRecord(k, rec_step, rec_psi, rec_gain, "newton"))
            if info["fallback"]:
                pending = f"newton_fallback({info['fallback']})"
                log.info("iteration %d: Newton refinement stopped (%s), continuing fixed-point",
                         k, info["fallback"])
            if info["steps"]:
                # Re-enter the fixed-point cycle from the refined reputation.
                d = kernel.divergence(ratings, r_new)
                trust = kernel.zero_row_fixup(ratings, kernel.trust_update(ratings, d, spec))
                r = r_new
        r_prev = r
    d = kernel.divergence(ratings, r)
    return ReputationReport(r=r, t=kernel.trust_vector(d), final_trust=trust, trace=tuple(trace),
                            iterations_used=k, converged=converged, scale=ratings.scale)


def solve(ratings: SparseRatings, config: SolveConfig = SolveConfig(),
          initial_trust: Optional[TrustState] = None,
          callback: Optional[Callable] = None) -> ReputationReport:
    """Iterate reputation and trust updates to the fixed point.

    Each pass computes the reputation from the current trust, then the belief
    divergence and the next trust from that reputation. Convergence is declared
    when successive reputations differ by less than ``config.tol`` in the
    infinity norm; running out of ``max_iter`` passes returns a report with
    ``converged=False``. In fixed-step mode (``config.steps``) exactly that
    many passes are applied.

    Parameters
    ----------
    initial_trust : TrustState, optional
        Starting trust; all ones when omitted.
    callback : callable(k, r, d, trust), optional
        Invoked after every pass with the pass number, the reputation it
        produced, the divergence of that reputation and the updated trust.
    """
    if ratings.nnz == 0:
        raise ValueError("cannot solve an empty rating matrix")
    trust = kernel.init_trust(ratings) if initial_trust is None else initial_trust
    if trust.trust.shape != (ratings.nnz,):
        raise ValueError("initial trust is not aligned with the rating entries")
    if config.steps is not None:
        return _run(ratings, config, trust, config.steps, False, callback, False)
    return _run(ratings, config, trust, config.max_iter, True, callback, config.newton)


def _newton(ratings, r, c0, tol, max_steps=20):
    """Newton iteration on ``grad psi = 0``. Returns ``(r, info)``."""
    r = np.array(r, dtype=np.float64)
    present = ratings.item_present
    idx = np.flatnonzero(present)
    records = []
    fallback = ""
    r0 = r.copy()
    for _ in range(max_steps):
        g = kernel.grad_psi(ratings, r, c0)[idx]
        H = kernel.hess_psi(ratings, r, c0)[idx][:, idx]
        try:
            delta = _newton_direction(H, g)
        except (linalg.LinAlgError, np.linalg.LinAlgError, RuntimeError) as exc:
            fallback = f"hessian: {exc}"
            break
        r_try = r.copy()
        r_try[idx] = np.clip(r[idx] + delta, 0.0, 1.0)
        gain = kernel.psi_gain(ratings, r, r_try, c0)
        step = inf_norm(r_try, r)
        if gain < 0 and step > 0:
            fallback = "psi decreased"
            break
        records.append((step, kernel.psi(ratings, r_try, c0), gain))
        r = r_try
        if step < tol:
            break
    spec = TrustFunctionSpec("linear", c0)
    if records and fixed_point_residual(ratings, r, spec) > fixed_point_residual(ratings, r0, spec):
        fallback = fallback or "residual increased"
        r, records = r0, []
    return r, {"steps": len(records), "records": records, "fallback": fallback}


def _newton_direction(H, g):
    n = H.shape[0]
    if n <= _DENSE_NEWTON_MAX:
        # psi is maximized: -H must be positive definite near the solution.
        chol = linalg.cho_factor(-H.toarray(), check_finite=True)
        return linalg.cho_solve(chol, g)
    delta = spsolve(sparse.csc_matrix(-H), g)
    if not np.all(np.isfinite(delta)) or float(g @ delta) <= 0:
        raise RuntimeError("singular or indefinite Hessian")
    return delta


def newton_refine(ratings: SparseRatings, r, c0: float, tol: float) -> np.ndarray:
    """Polish a near-fixed-point reputation with Newton steps on ``grad psi``.

    Uses the analytic Hessian. Reputations are clamped to [0, 1]. If the
    Hessian is not negative definite, or a step would decrease ``psi`` or the
    fixed-point residual, the input is returned unchanged and the caller should
    continue with ordinary passes.
    """
    r_new, _ = _newton(ratings, r, c0, tol)
    return r_new


def newton_refine_info(ratings: SparseRatings, r, c0: float, tol: float):
    """Like :func:`newton_refine` but also returns step records and the fallback reason."""
    return _newton(ratings, r, c0, tol)


@dataclass(frozen=True, eq=False)
class StreamEpoch:
    """One epoch of streaming evaluation: the current ratings, trust carried
    over from the previous epoch (already reconciled to this pattern) and the
    number of passes to apply."""

    ratings: SparseRatings
    warm_trust: TrustState
    steps: int = 3

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("steps must be at least 1")
        if self.warm_trust.trust.shape != (self.ratings.nnz,):
            raise ValueError("warm trust is not aligned with the epoch's ratings")


def reconcile_trust(previous: SparseRatings, trust: TrustState, current: SparseRatings) -> TrustState:
    """Carry trust of surviving entries over to ``current``; new entries get 1."""
    if previous.shape != current.shape:
        raise ValueError(f"epoch dimensions differ: {previous.shape} vs {current.shape}")
    old_keys = previous.keys()
    new_keys = current.keys()
    T = np.ones(current.nnz)
    if old_keys.size:
        pos = np.minimum(np.searchsorted(old_keys, new_keys), old_keys.size - 1)
        hit = old_keys[pos] == new_keys
        T[hit] = trust.trust[pos[hit]]
    d = np.full(current.n_raters, np.nan)
    d[: trust.divergence.size] = trust.divergence
    return TrustState(T, d)


def make_epoch(ratings: SparseRatings, previous: Optional[SparseRatings] = None,
               previous_trust: Optional[TrustState] = None, steps: int = 3) -> StreamEpoch:
    if previous is None or previous_trust is None:
        return StreamEpoch(ratings, kernel.init_trust(ratings), steps)
    return StreamEpoch(ratings, reconcile_trust(previous, previous_trust, ratings), steps)


def stream_update(epoch: StreamEpoch, config: SolveConfig = SolveConfig()) -> ReputationReport:
    """Apply exactly ``epoch.steps`` passes starting from the warm trust."""
    cfg = SolveConfig(config.trust_fn, config.tol, config.max_iter, epoch.steps, False,
                      config.newton_trigger)
    return solve(epoch.ratings, cfg, initial_trust=epoch.warm_trust)
