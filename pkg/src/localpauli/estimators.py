"""scikit-learn style wrappers around the functional API.

The estimators hold configuration in ``__init__`` (so ``get_params`` and
``clone`` work) and learned state in trailing-underscore attributes.  Inputs
are generator sets or frame fields rather than 2-D feature matrices, so they
do not plug into ``Pipeline`` column machinery; they exist for a familiar
fit/transform workflow and parameter handling.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from . import algebra as ga
from ._validation import check_frame, check_generator_set, check_rng, check_signature, check_tolerance
from .fields import ConnectionField, FrameField, spin_connection_general, spin_connection_grade1
from .pauli import RELATION_TOL, GeneratorSet, intertwiner, intertwiner_to_standard
from .transport import CLOSED_RTOL, DEFAULT_TOL_FINAL, DEFAULT_TOL_PATH, conjugated_frame, solve_global


class PauliIntertwiner(BaseEstimator, TransformerMixin):
    """Learn ``T`` with ``g^a = lam T^{-1} h^a T``.

    ``fit(h, g)`` takes two generator sets (``g`` defaults to the standard
    generators); ``transform(x)`` maps any generator set or multivector
    array by ``x -> lam T^{-1} x T``.
    """

    def __init__(self, signature=(3, 0), field="R", tol=RELATION_TOL):
        self.signature = signature
        self.field = field
        self.tol = tol

    def fit(self, X, y=None):
        sig = check_signature(self.signature, self.field)
        tol = check_tolerance(self.tol, "tol")
        h = check_generator_set(X, sig)
        if y is None:
            res = intertwiner_to_standard(h, tol)
        else:
            res = intertwiner(h, check_generator_set(y, sig), tol)
        self.sig_ = h.sig
        self.result_ = res
        self.T_ = res.T
        self.T_inv_ = res.T_inv
        self.case_ = res.case
        self.factor_ = res.factor
        self.residual_ = res.residual
        return self

    def transform(self, X):
        check_is_fitted(self, "T_")
        if isinstance(X, GeneratorSet):
            arr = X.array
        else:
            arr = np.asarray(X)
        sig = self.sig_
        out = ga.gp_array(ga.gp_array(self.T_inv_.coeffs, arr, sig), self.T_.coeffs, sig)
        out = ga.gp_array(self.factor_.coeffs, out, sig)
        if isinstance(X, GeneratorSet):
            return GeneratorSet.from_array(sig, out)
        return out


class SpinConnection(BaseEstimator, TransformerMixin):
    """Stateless transformer ``FrameField -> ConnectionField``."""

    def __init__(self, kind="general"):
        self.kind = kind

    def fit(self, X, y=None):
        if self.kind not in ("general", "grade1"):
            raise ValueError(f"kind must be 'general' or 'grade1', got {self.kind!r}")
        check_frame(X)
        self.n_generators_ = X.sig.n
        return self

    def transform(self, X) -> ConnectionField:
        check_is_fitted(self, "n_generators_")
        h = check_frame(X)
        if self.kind == "grade1":
            return spin_connection_grade1(h)
        return spin_connection_general(h)


class LocalPauliSolver(BaseEstimator, TransformerMixin):
    """Global intertwiner field for a frame.

    After ``fit(h)`` the attributes ``S_``, ``K_``, ``T_``, ``connection_``,
    ``method_`` and ``diagnostics_`` hold the solution.  ``transform(h)``
    returns ``lam T^{-1} h^a T`` per node, which is the standard generator
    set up to discretization error; ``score(h)`` is minus its largest defect.
    """

    def __init__(
        self,
        method="auto",
        tol_final=DEFAULT_TOL_FINAL,
        tol_path=DEFAULT_TOL_PATH,
        closed_rtol=CLOSED_RTOL,
        base=None,
        random_state=None,
    ):
        self.method = method
        self.tol_final = tol_final
        self.tol_path = tol_path
        self.closed_rtol = closed_rtol
        self.base = base
        self.random_state = random_state

    def fit(self, X, y=None):
        h = check_frame(X)
        result = solve_global(
            h,
            method=self.method,
            base=self.base,
            tol_final=check_tolerance(self.tol_final, "tol_final", allow_none=True),
            tol_path=check_tolerance(self.tol_path, "tol_path", allow_none=True),
            closed_rtol=check_tolerance(self.closed_rtol, "closed_rtol"),
            rng=check_rng(self.random_state),
        )
        self.result_ = result
        self.S_ = result.S
        self.K_ = result.K
        self.T_ = result.T
        self.connection_ = result.connection
        self.method_ = result.method
        self.case_ = result.case
        self.diagnostics_ = dict(result.diagnostics)
        return self

    def transform(self, X) -> FrameField:
        check_is_fitted(self, "T_")
        h = check_frame(X)
        if h.grid != self.T_.grid:
            raise ValueError("frame grid differs from the fitted grid")
        from .pauli import _relation_factor

        conj = conjugated_frame(h, self.T_)
        lam = _relation_factor(h.data, h.sig)
        return h.with_data(ga.gp_array(lam[..., None, :], conj, h.sig))

    def score(self, X, y=None) -> float:
        out = self.transform(X)
        targets = np.eye(out.sig.dim)[[1 << a for a in range(out.sig.n)]]
        return -float(np.max(ga.norm_array(out.data - targets)))
