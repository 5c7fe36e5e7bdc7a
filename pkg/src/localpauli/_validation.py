"""Input coercion shared by the estimator layer."""

from __future__ import annotations

import math
from typing import Any

import numpy as np

from .algebra import Signature
from .exceptions import ShapeMismatch
from .fields import FrameField
from .pauli import GeneratorSet


def check_signature(signature: Any, field: str = "R") -> Signature:
    """Accept a :class:`Signature`, a ``(p, q)`` pair or a ``"p,q"`` string."""
    if isinstance(signature, Signature):
        return signature
    if isinstance(signature, str):
        p, q = (int(v) for v in signature.split(","))
        return Signature(p, q, field)
    try:
        p, q = signature
    except (TypeError, ValueError):
        raise ValueError(f"cannot read a signature from {signature!r}") from None
    return Signature(int(p), int(q), field)


def check_tolerance(value: float | None, name: str, allow_none: bool = False) -> float | None:
    if value is None and allow_none:
        return None
    if value is None or not isinstance(value, (int, float)) or not math.isfinite(value) or value <= 0:
        raise ValueError(f"{name} must be a positive finite number, got {value!r}")
    return float(value)


def check_generator_set(X: Any, sig: Signature | None = None) -> GeneratorSet:
    """Generator set from a :class:`GeneratorSet` or an ``(n, 2**n)`` array."""
    if isinstance(X, GeneratorSet):
        if sig is not None and (X.sig.p, X.sig.q) != (sig.p, sig.q):
            raise ShapeMismatch(f"generator set lives in {X.sig}, expected {sig}")
        return X
    if sig is None:
        raise ValueError("a signature is needed to read generator arrays")
    arr = np.asarray(X)
    if arr.shape != (sig.n, sig.dim):
        raise ShapeMismatch(f"generator array must have shape {(sig.n, sig.dim)}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("generator array contains non-finite values")
    if np.iscomplexobj(arr) and not sig.is_complex:
        sig = sig.with_field("C")
    return GeneratorSet.from_array(sig, arr)


def check_frame(h: Any) -> FrameField:
    if not isinstance(h, FrameField):
        raise TypeError(f"expected a FrameField, got {type(h).__name__}")
    if not np.all(np.isfinite(h.data)):
        raise ValueError("frame contains non-finite values")
    return h


def check_rng(random_state: Any) -> np.random.Generator:
    """``None``, an integer seed or a ``Generator``."""
    if isinstance(random_state, np.random.Generator):
        return random_state
    return np.random.default_rng(random_state)
