"""Dense real and complexified Clifford algebras Cl(p, q).

Basis blades are encoded as integer bitmasks: bit ``i`` set means generator
``e^{i+1}`` is present, and the blade is the product of its generators in
ascending index order.  A multivector is a length ``2**n`` coefficient vector
indexed by these masks.

Two layers live here.  The array kernels (``gp_array``, ``inverse_array``,
``exp_array``, ...) work on stacks of coefficient vectors with arbitrary
leading batch axes and are what the field code uses.  :class:`Multivector`
wraps a single coefficient vector and gives the operator-style interface.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .exceptions import GradeOutOfRange, SignatureMismatch, SingularElement

N_MAX = 8
COND_LIMIT = 1e12
EXP_SCALED_NORM = 0.5
EXP_TERMS = 20


@dataclass(frozen=True)
class Signature:
    """Metric signature ``(p, q)`` and scalar field ``"R"`` or ``"C"``."""

    p: int
    q: int = 0
    field: str = "R"

    def __post_init__(self) -> None:
        if self.p < 0 or self.q < 0:
            raise ValueError(f"p and q must be non-negative, got ({self.p}, {self.q})")
        if not 1 <= self.p + self.q <= N_MAX:
            raise ValueError(f"n = p + q must lie in [1, {N_MAX}], got {self.p + self.q}")
        if self.field not in ("R", "C"):
            raise ValueError(f"field must be 'R' or 'C', got {self.field!r}")

    @property
    def n(self) -> int:
        return self.p + self.q

    @property
    def dim(self) -> int:
        return 1 << self.n

    @property
    def is_complex(self) -> bool:
        return self.field == "C"

    @property
    def dtype(self) -> type:
        return np.complex128 if self.is_complex else np.float64

    @property
    def eta(self) -> np.ndarray:
        return np.diag(self.metric.astype(float))

    @property
    def metric(self) -> np.ndarray:
        """Diagonal of the metric, as integers +-1."""
        return _tables(self.p, self.q).metric

    @property
    def pseudoscalar_mask(self) -> int:
        return self.dim - 1

    def with_field(self, field: str) -> Signature:
        return Signature(self.p, self.q, field)

    # constructors -------------------------------------------------------

    def zero(self) -> Multivector:
        return Multivector(self, np.zeros(self.dim, dtype=self.dtype))

    def scalar(self, value: complex = 1.0) -> Multivector:
        coeffs = np.zeros(self.dim, dtype=self.dtype)
        coeffs[0] = value
        return Multivector(self, coeffs)

    def identity(self) -> Multivector:
        return self.scalar(1.0)

    def blade(self, *indices: int) -> Multivector:
        """Basis blade ``e^{i1 i2 ...}`` from 1-based strictly increasing indices."""
        coeffs = np.zeros(self.dim, dtype=self.dtype)
        coeffs[mask_from_indices(indices, self.n)] = 1.0
        return Multivector(self, coeffs)

    def generators(self) -> list[Multivector]:
        return [self.blade(a) for a in range(1, self.n + 1)]

    def pseudoscalar(self) -> Multivector:
        return self.blade(*range(1, self.n + 1))

    def __str__(self) -> str:
        return f"Cl{'^C' if self.is_complex else ''}({self.p},{self.q})"


# ---------------------------------------------------------------------------
# blade bookkeeping


def mask_from_indices(indices: Iterable[int], n: int) -> int:
    mask = 0
    last = 0
    for a in indices:
        if not 1 <= a <= n:
            raise ValueError(f"generator index {a} outside 1..{n}")
        if a <= last:
            raise ValueError("blade indices must be strictly increasing")
        mask |= 1 << (a - 1)
        last = a
    return mask


def indices_from_mask(mask: int) -> tuple[int, ...]:
    return tuple(i + 1 for i in range(mask.bit_length()) if mask >> i & 1)


def blade_name(mask: int) -> str:
    """JSON key of a blade: concatenated ascending indices, ``""`` for ``e``."""
    return "".join(str(i) for i in indices_from_mask(mask))


def parse_blade_name(name: str, n: int) -> int:
    """Inverse of :func:`blade_name`; a leading ``e`` is accepted (``"e12"``)."""
    if name in ("", "e", "0"):
        return 0
    digits = name[1:] if name.startswith("e") else name
    if not digits.isdigit():
        raise ValueError(f"not a blade name: {name!r}")
    return mask_from_indices([int(ch) for ch in digits], n)


def grade_of(mask: int) -> int:
    return bin(mask).count("1")


def _reorder_sign(a: int, b: int) -> int:
    """Sign from sorting the word ``e^A e^B`` into ascending order."""
    swaps = 0
    a >>= 1
    while a:
        swaps += bin(a & b).count("1")
        a >>= 1
    return -1 if swaps & 1 else 1


@dataclass(frozen=True)
class _Tables:
    metric: np.ndarray  # (n,) ints +-1
    sign: np.ndarray  # (D, D) int8: e^i e^j = sign[i, j] e^{i ^ j}
    grades: np.ndarray  # (D,)
    reverse_sign: np.ndarray  # (D,)
    involute_sign: np.ndarray  # (D,)
    square_sign: np.ndarray  # (D,): (e^A)^2 = square_sign[A] e
    # gather tables for products, see gp_array
    xor: np.ndarray  # (D, D): i ^ k
    left_sign: np.ndarray  # (D, D) float: sign[i, i ^ k], float so einsum never casts
    col_sign: np.ndarray  # (D, D): sign[k ^ j, j]


@lru_cache(maxsize=None)
def _tables(p: int, q: int) -> _Tables:
    n = p + q
    dim = 1 << n
    metric = np.array([1] * p + [-1] * q, dtype=np.int8)
    idx = np.arange(dim)
    sign = np.empty((dim, dim), dtype=np.int8)
    for i in range(dim):
        for j in range(dim):
            s = _reorder_sign(i, j)
            common = i & j
            b = 0
            while common:
                if common & 1 and metric[b] < 0:
                    s = -s
                common >>= 1
                b += 1
            sign[i, j] = s
    grades = np.array([grade_of(i) for i in range(dim)], dtype=np.int64)
    reverse_sign = np.where((grades * (grades - 1) // 2) % 2 == 0, 1, -1).astype(np.int8)
    involute_sign = np.where(grades % 2 == 0, 1, -1).astype(np.int8)
    square_sign = sign[idx, idx].copy()
    xor = idx[:, None] ^ idx[None, :]
    left_sign = sign[idx[:, None], xor].astype(np.float64)
    col_sign = sign[xor, idx[None, :]]
    for arr in (metric, sign, grades, reverse_sign, involute_sign, square_sign, xor, left_sign, col_sign):
        arr.setflags(write=False)
    return _Tables(metric, sign, grades, reverse_sign, involute_sign, square_sign, xor, left_sign, col_sign)


def tables(sig: Signature) -> _Tables:
    return _tables(sig.p, sig.q)


def blade_product(a: int, b: int, sig: Signature) -> tuple[int, int]:
    """``e^A e^B = sign * e^C``; returns ``(sign, C)`` with ``C = A xor B``."""
    return int(tables(sig).sign[a, b]), a ^ b


def blade_inverse_sign(mask: int, sig: Signature) -> int:
    """``s`` with ``(e^A)^{-1} = s e^A``."""
    return int(tables(sig).square_sign[mask])


# ---------------------------------------------------------------------------
# array kernels; the last axis is the blade axis


def gp_array(a: np.ndarray, b: np.ndarray, sig: Signature) -> np.ndarray:
    """Geometric product of broadcastable stacks of coefficient vectors."""
    t = tables(sig)
    a = np.asarray(a)
    b = np.asarray(b)
    # c[k] = sum_i a[i] sign[i, i^k] b[i^k]
    gathered = np.take(b, t.xor, axis=-1)
    return np.einsum("...i,ik,...ik->...k", a, t.left_sign, gathered)


def left_matrix(a: np.ndarray, sig: Signature) -> np.ndarray:
    """Matrix ``L`` of ``x -> a x`` acting on coefficient vectors."""
    t = tables(sig)
    # L[k, j] = a[k^j] sign[k^j, j]
    return np.asarray(a)[..., t.xor] * t.col_sign


def right_blade_array(x: np.ndarray, mask: int, sig: Signature) -> np.ndarray:
    """``x e^B`` for a single basis blade ``B``."""
    t = tables(sig)
    src = np.arange(sig.dim) ^ mask
    return np.asarray(x)[..., src] * t.sign[src, mask]


def reverse_array(a: np.ndarray, sig: Signature) -> np.ndarray:
    return np.asarray(a) * tables(sig).reverse_sign


def involute_array(a: np.ndarray, sig: Signature) -> np.ndarray:
    return np.asarray(a) * tables(sig).involute_sign


def hermitian_array(a: np.ndarray, sig: Signature) -> np.ndarray:
    return np.conj(a) * tables(sig).square_sign


def grade_mask(sig: Signature, k: int) -> np.ndarray:
    return tables(sig).grades == k


def center_mask(sig: Signature) -> np.ndarray:
    """Blades spanning the center: grade 0, plus grade n when n is odd."""
    grades = tables(sig).grades
    if sig.n % 2:
        return (grades == 0) | (grades == sig.n)
    return grades == 0


def commutator_array(a: np.ndarray, b: np.ndarray, sig: Signature) -> np.ndarray:
    return gp_array(a, b, sig) - gp_array(b, a, sig)


def norm_array(a: np.ndarray) -> np.ndarray:
    return np.sqrt(np.sum(np.abs(a) ** 2, axis=-1))


def identity_array(sig: Signature, batch_shape: tuple[int, ...] = ()) -> np.ndarray:
    out = np.zeros(batch_shape + (sig.dim,), dtype=sig.dtype)
    out[..., 0] = 1.0
    return out


def inverse_array(a: np.ndarray, sig: Signature, cond_limit: float = COND_LIMIT) -> np.ndarray:
    """Batched inverse by dense solve of ``a x = e``.

    Raises :class:`SingularElement` for the first batch entry whose
    multiplication matrix has condition number above ``cond_limit``.
    """
    a = np.asarray(a)
    batch = a.shape[:-1]
    mats = left_matrix(a, sig).reshape((-1, sig.dim, sig.dim))
    # LU with partial pivoting; condition estimate in the 1-norm
    with np.errstate(all="ignore"):
        try:
            inv = np.linalg.inv(mats)
            cond = np.abs(mats).sum(axis=-2).max(axis=-1) * np.abs(inv).sum(axis=-2).max(axis=-1)
        except np.linalg.LinAlgError:
            inv = None
    if inv is None:
        with np.errstate(all="ignore"):
            cond = np.abs(np.linalg.cond(mats, 1))
        cond = np.where(np.isfinite(cond), cond, np.inf)
    bad = ~np.isfinite(cond) | (cond > cond_limit)
    if np.any(bad):
        first = int(np.flatnonzero(bad)[0])
        node = tuple(int(i) for i in np.unravel_index(first, batch)) if batch else ()
        raise SingularElement(
            "element is not invertible",
            condition_number=float(cond[first]),
            node=list(node),
        )
    # first column of the inverse solves a x = e
    return inv[..., 0].reshape(batch + (sig.dim,))


_EXP_COEFFS = [1.0 / math.factorial(k) for k in range(EXP_TERMS + 1)]
_EXP_BLOCK = 4


def _exp_series(x: np.ndarray, sig: Signature) -> np.ndarray:
    """``sum_{k <= EXP_TERMS} x^k / k!`` by Paterson-Stockmeyer (8 products instead of 20)."""
    x = x.astype(np.result_type(x.dtype, np.float64))
    powers = [identity_array(sig, x.shape[:-1]).astype(x.dtype), x]
    for _ in range(2, _EXP_BLOCK + 1):
        powers.append(gp_array(powers[-1], x, sig))
    step = powers[_EXP_BLOCK]
    chunks = [_EXP_COEFFS[i : i + _EXP_BLOCK] for i in range(0, EXP_TERMS + 1, _EXP_BLOCK)]
    total = None
    for chunk in reversed(chunks):
        block = sum(c * powers[i] for i, c in enumerate(chunk))
        total = block if total is None else block + gp_array(total, step, sig)
    return total


def exp_array(a: np.ndarray, sig: Signature) -> np.ndarray:
    """Scaling-and-squaring exponential, applied per batch entry.

    Each entry is scaled by its own ``2**-m`` so that its norm is at most
    0.5, a 20-term series is summed, and the result is squared ``m`` times.
    The series runs once over the whole batch and each squaring touches only
    the entries that still need it, so a result never depends on its batch
    neighbours.
    """
    a = np.asarray(a)
    if not np.issubdtype(a.dtype, np.complexfloating):
        a = a.astype(np.float64)
    batch = a.shape[:-1]
    flat = a.reshape((-1, sig.dim))
    norms = norm_array(flat)
    with np.errstate(divide="ignore"):
        m = np.where(norms > EXP_SCALED_NORM, np.ceil(np.log2(norms / EXP_SCALED_NORM)), 0).astype(int)
    out = _exp_series(flat / (2.0 ** m)[:, None], sig)
    for step in range(1, int(m.max(initial=0)) + 1):
        sel = m >= step
        out[sel] = gp_array(out[sel], out[sel], sig)
    return out.reshape(batch + (sig.dim,))


# ---------------------------------------------------------------------------
# single multivectors


class Multivector:
    """Immutable element of Cl(p, q) with dense coefficients."""

    __slots__ = ("sig", "coeffs")

    def __init__(self, sig: Signature, coeffs: Sequence[complex] | np.ndarray) -> None:
        arr = np.array(coeffs, dtype=np.complex128 if sig.is_complex else None)
        if arr.shape != (sig.dim,):
            raise ValueError(f"expected {sig.dim} coefficients, got shape {arr.shape}")
        if not sig.is_complex:
            if np.iscomplexobj(arr):
                if np.any(arr.imag != 0):
                    raise ValueError("complex coefficients in a real algebra")
                arr = arr.real
            arr = arr.astype(np.float64)
        arr.setflags(write=False)
        object.__setattr__(self, "sig", sig)
        object.__setattr__(self, "coeffs", arr)

    def __setattr__(self, name, value):
        raise AttributeError("Multivector is immutable")

    # arithmetic -------------------------------------------------------

    def _check(self, other: Multivector) -> None:
        if other.sig.p != self.sig.p or other.sig.q != self.sig.q:
            raise SignatureMismatch(f"cannot combine {self.sig} with {other.sig}")

    def _promote(self, other: Multivector) -> Signature:
        self._check(other)
        return self.sig if self.sig.is_complex or not other.sig.is_complex else other.sig

    def __add__(self, other):
        if isinstance(other, Multivector):
            return Multivector(self._promote(other), self.coeffs + other.coeffs)
        return self + self.sig.scalar(other)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Multivector):
            return Multivector(self._promote(other), self.coeffs - other.coeffs)
        return self - self.sig.scalar(other)

    def __rsub__(self, other):
        return (-self) + other

    def __neg__(self):
        return Multivector(self.sig, -self.coeffs)

    def __mul__(self, other):
        if isinstance(other, Multivector):
            return geometric_product(self, other)
        return Multivector(self._scalar_sig(other), self.coeffs * other)

    def __rmul__(self, other):
        return Multivector(self._scalar_sig(other), other * self.coeffs)

    def __truediv__(self, other):
        return Multivector(self._scalar_sig(other), self.coeffs / other)

    def _scalar_sig(self, value) -> Signature:
        if np.iscomplexobj(value) and np.imag(value) != 0 and not self.sig.is_complex:
            raise ValueError("complex scalar in a real algebra; use a complex signature")
        return self.sig

    # views --------------------------------------------------------------

    def __getitem__(self, blade: int | str) -> complex:
        mask = parse_blade_name(blade, self.sig.n) if isinstance(blade, str) else blade
        return self.coeffs[mask].item()

    def grade(self, k: int) -> Multivector:
        return grade_project(self, k)

    def allclose(self, other: Multivector, atol: float = 1e-12) -> bool:
        self._check(other)
        return bool(norm_array(self.coeffs - other.coeffs) <= atol)

    def _terms(self) -> str:
        terms = []
        for mask in np.flatnonzero(self.coeffs):
            c = self.coeffs[mask]
            name = "e" if mask == 0 else "e" + blade_name(int(mask))
            terms.append(f"{c:+.6g}*{name}" if not self.sig.is_complex else f"({c:.6g})*{name}")
        return " ".join(terms) if terms else "0"

    def __repr__(self) -> str:
        return f"Multivector<{self.sig}>({self._terms()})"

    def __hash__(self):
        return hash((self.sig, self.coeffs.tobytes()))

    def __eq__(self, other):
        if not isinstance(other, Multivector):
            return NotImplemented
        return self.sig == other.sig and bool(np.array_equal(self.coeffs, other.coeffs))


def _unify(a: Multivector, b: Multivector) -> Signature:
    return a._promote(b)


def geometric_product(a: Multivector, b: Multivector) -> Multivector:
    sig = _unify(a, b)
    return Multivector(sig, gp_array(a.coeffs, b.coeffs, sig))


def grade_project(a: Multivector, k: int) -> Multivector:
    if not 0 <= k <= a.sig.n:
        raise GradeOutOfRange(f"grade {k} outside 0..{a.sig.n}", grade=k)
    return Multivector(a.sig, np.where(grade_mask(a.sig, k), a.coeffs, 0))


def trace(a: Multivector) -> complex:
    """Scalar coefficient of ``a`` (the projection onto grade 0)."""
    return a.coeffs[0].item()


def reverse(a: Multivector) -> Multivector:
    return Multivector(a.sig, reverse_array(a.coeffs, a.sig))


def grade_involute(a: Multivector) -> Multivector:
    return Multivector(a.sig, involute_array(a.coeffs, a.sig))


def blade_inverse(mask: int, sig: Signature) -> Multivector:
    """``e_A = (e^A)^{-1}``, a signed copy of ``e^A``."""
    coeffs = np.zeros(sig.dim, dtype=sig.dtype)
    coeffs[mask] = blade_inverse_sign(mask, sig)
    return Multivector(sig, coeffs)


def hermitian_conjugate(a: Multivector) -> Multivector:
    """Antilinear anti-automorphism with ``(e^A)^dagger = (e^A)^{-1}``."""
    return Multivector(a.sig, hermitian_array(a.coeffs, a.sig))


def norm(a: Multivector) -> float:
    """``sqrt(Tr(a^dagger a))``."""
    value = trace(geometric_product(hermitian_conjugate(a), a))
    return math.sqrt(max(float(np.real(value)), 0.0))


def inverse(a: Multivector) -> Multivector:
    x = inverse_array(a.coeffs, a.sig)
    # the solve only enforces a x = e; check the other side too
    check = gp_array(x, a.coeffs, a.sig)
    check[0] -= 1.0
    if norm_array(check) > 1e-8 * max(1.0, float(norm_array(x) * norm_array(a.coeffs))):
        raise SingularElement("left and right inverses disagree", residual=float(norm_array(check)))
    return Multivector(a.sig, x)


def exp(a: Multivector) -> Multivector:
    return Multivector(a.sig, exp_array(a.coeffs, a.sig))


def commutator(a: Multivector, b: Multivector) -> Multivector:
    sig = _unify(a, b)
    return Multivector(sig, commutator_array(a.coeffs, b.coeffs, sig))


def is_central(a: Multivector, atol: float = 1e-10) -> bool:
    """True when ``a`` commutes with every generator."""
    gens = np.eye(a.sig.dim, dtype=a.sig.dtype)[[1 << i for i in range(a.sig.n)]]
    return bool(np.all(norm_array(commutator_array(a.coeffs, gens, a.sig)) <= atol))


def random_multivector(sig: Signature, rng: np.random.Generator, scale: float = 1.0) -> Multivector:
    coeffs = rng.standard_normal(sig.dim)
    if sig.is_complex:
        coeffs = coeffs + 1j * rng.standard_normal(sig.dim)
    return Multivector(sig, scale * coeffs)
