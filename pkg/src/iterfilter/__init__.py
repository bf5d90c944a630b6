"""Iterative filtering reputation engine."""

from .model import (ReputationReport, SolveConfig, SparseRatings, TraceRecord,
                    TrustFunctionSpec, TrustState, build_sparse_ratings, from_arrays)
from .kernel import (NegativeTrustError, ZeroTrustColumnError, divergence, grad_psi,
                     hess_psi, init_trust, psi, psi_gain, reputation_from_trust,
                     trust_update, trust_vector, zero_row_fixup)
from .engine import (StreamEpoch, fixed_point_residual, make_epoch, newton_refine,
                     reconcile_trust, solve, stream_update)

__version__ = "0.1.0"
