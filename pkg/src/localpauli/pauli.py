"""Constructive generalized Pauli theorem for constant generator sets.

Given generators ``h^1..h^n`` obeying ``h^a h^b + h^b h^a = 2 eta^{ab} e`` we
build an invertible ``T`` with ``e^a = lam T^{-1} h^a T``.  For even ``n`` the
factor ``lam`` is ``e``; for odd ``n`` it is the central element
``h^{1..n} e_{1..n}``.

``T`` comes from the averaging sum ``sum_A h^A F e_A`` (restricted to even
``|A|`` when ``n`` is odd).  Every candidate ``F`` is evaluated and the
largest-norm candidate that inverts and verifies wins, so the result does not
depend on a particular selection rule for ``F``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from . import algebra as ga
from .algebra import Multivector, Signature
from .exceptions import (
    CaseMismatch,
    NoCandidateFound,
    NotAdmissible,
    SignatureMismatch,
    SingularElement,
    VerificationFailed,
)

RELATION_TOL = 1e-9
CANDIDATE_RTOL = 1e-6
REFINE_BELOW = 1e-3


class Case(str, enum.Enum):
    """How two generator sets are related; the value is the JSON tag."""

    EVEN = "even"
    PLUS = "plus"
    MINUS = "minus"
    PSEUDO_PLUS = "pseudo_plus"
    PSEUDO_MINUS = "pseudo_minus"
    I_PSEUDO_PLUS = "i_pseudo_plus"
    I_PSEUDO_MINUS = "i_pseudo_minus"


@dataclass(frozen=True)
class GeneratorSet:
    sig: Signature
    gens: tuple[Multivector, ...]

    def __post_init__(self) -> None:
        if len(self.gens) != self.sig.n:
            raise ValueError(f"{self.sig} needs {self.sig.n} generators, got {len(self.gens)}")
        for g in self.gens:
            if (g.sig.p, g.sig.q) != (self.sig.p, self.sig.q):
                raise SignatureMismatch(f"generator in {g.sig} does not belong to {self.sig}")

    @classmethod
    def standard(cls, sig: Signature) -> GeneratorSet:
        return cls(sig, tuple(sig.generators()))

    @classmethod
    def from_array(cls, sig: Signature, arr: np.ndarray) -> GeneratorSet:
        return cls(sig, tuple(Multivector(sig, row) for row in np.asarray(arr)))

    @property
    def array(self) -> np.ndarray:
        return np.stack([g.coeffs for g in self.gens]).astype(self.sig.dtype)

    def conjugate_by(self, P: Multivector) -> GeneratorSet:
        """The set ``P^{-1} h^a P``."""
        P_inv = ga.inverse(P)
        return GeneratorSet(self.sig, tuple(P_inv * g * P for g in self.gens))

    def __neg__(self) -> GeneratorSet:
        return GeneratorSet(self.sig, tuple(-g for g in self.gens))

    def __len__(self) -> int:
        return len(self.gens)


@dataclass(frozen=True)
class GeneratorReport:
    max_relation_residual: float
    pseudoscalar_trace: complex | None
    trace_condition_ok: bool
    tol: float

    @property
    def ok(self) -> bool:
        return self.max_relation_residual <= self.tol

    def to_dict(self) -> dict[str, Any]:
        tr = self.pseudoscalar_trace
        return {
            "max_relation_residual": self.max_relation_residual,
            "pseudoscalar_trace": None if tr is None else abs(tr),
            "trace_condition_ok": self.trace_condition_ok,
            "relations_ok": self.ok,
            "tol": self.tol,
        }


@dataclass(frozen=True)
class IntertwinerResult:
    T: Multivector
    T_inv: Multivector
    case: Case
    factor: Multivector
    residual: float
    chosen_F: str
    candidates_tried: int = field(default=1, compare=False)

    def to_dict(self) -> dict[str, Any]:
        from .io import multivector_to_json

        return {
            "T": multivector_to_json(self.T),
            "T_inv": multivector_to_json(self.T_inv),
            "case": self.case.value,
            "factor": multivector_to_json(self.factor),
            "residual": self.residual,
            "chosen_F": self.chosen_F,
        }


# ---------------------------------------------------------------------------
# array helpers shared with the field code


def relation_residual_array(h: np.ndarray, sig: Signature) -> np.ndarray:
    """Per-entry ``max_{a<=b} |h^a h^b + h^b h^a - 2 eta^{ab} e|`` for ``h`` of shape (..., n, D)."""
    n = sig.n
    worst = np.zeros(h.shape[:-2])
    eta = sig.metric
    for a in range(n):
        for b in range(a, n):
            s = ga.gp_array(h[..., a, :], h[..., b, :], sig) + ga.gp_array(h[..., b, :], h[..., a, :], sig)
            if a == b:
                s[..., 0] -= 2.0 * eta[a]
            worst = np.maximum(worst, ga.norm_array(s))
    return worst


def blade_products_array(h: np.ndarray, sig: Signature) -> np.ndarray:
    """All ``h^A`` (ascending-index products) as an array of shape (..., D, D)."""
    h = np.asarray(h)
    out = np.zeros(h.shape[:-2] + (sig.dim, sig.dim), dtype=np.result_type(h.dtype, np.float64))
    out[..., 0, 0] = 1.0
    for mask in range(1, sig.dim):
        top = mask.bit_length() - 1
        out[..., mask, :] = ga.gp_array(out[..., mask ^ (1 << top), :], h[..., top, :], sig)
    return out


def _pseudoscalar_array(h: np.ndarray, sig: Signature) -> np.ndarray:
    prod = h[..., 0, :]
    for a in range(1, sig.n):
        prod = ga.gp_array(prod, h[..., a, :], sig)
    return prod


# ---------------------------------------------------------------------------
# operations


def check_generators(h: GeneratorSet, tol: float = RELATION_TOL) -> GeneratorReport:
    arr = h.array
    residual = float(relation_residual_array(arr, h.sig))
    tr = None
    trace_ok = True
    if h.sig.n % 2:
        tr = _pseudoscalar_array(arr, h.sig)[0].item()
        trace_ok = abs(tr) <= tol
    return GeneratorReport(residual, tr, trace_ok, tol)


def blade_products(h: GeneratorSet) -> dict[int, Multivector]:
    """``{A: h^A}`` keyed by blade mask; ``h^0 = e``."""
    arr = blade_products_array(h.array, h.sig)
    return {mask: Multivector(h.sig, arr[mask]) for mask in range(h.sig.dim)}


def pseudoscalar_of(h: GeneratorSet) -> Multivector:
    return Multivector(h.sig, _pseudoscalar_array(h.array, h.sig))


def admissible_pseudoscalars(sig: Signature) -> dict[str, Multivector]:
    """Values ``h^{1..n}`` may take for a valid odd-``n`` set, by label."""
    if sig.n % 2 == 0:
        raise ValueError("pseudoscalar classification needs odd n")
    E = sig.pseudoscalar()
    e = sig.identity()
    out = {"+e1..n": E, "-e1..n": -E}
    if (sig.p - sig.q) % 4 == 1:
        out.update({"+e": e, "-e": -e})
    if sig.is_complex and (sig.p - sig.q) % 4 == 3:
        out.update({"+ie": 1j * e, "-ie": -1j * e})
    return out


def classify_pseudoscalar(h: GeneratorSet, tol: float = RELATION_TOL) -> Multivector:
    """``h^{1..n}`` for odd ``n``, checked against the admissible values."""
    value = pseudoscalar_of(h)
    label = _nearest(value, admissible_pseudoscalars(h.sig), tol)
    if label is None:
        raise NotAdmissible(
            "h^{1..n} is not one of the admissible values",
            value={ga.blade_name(int(m)) or "e": abs(value.coeffs[m]) for m in np.flatnonzero(value.coeffs)},
        )
    return value


def _nearest(value: Multivector, table: dict[str, Multivector], tol: float) -> str | None:
    for label, ref in table.items():
        if ga.norm_array(value.coeffs - ref.coeffs) <= tol:
            return label
    return None


def _factor_table(sig: Signature) -> dict[Case, Multivector]:
    e = sig.identity()
    if sig.n % 2 == 0:
        return {Case.EVEN: e}
    E = sig.pseudoscalar()
    out = {Case.PLUS: e, Case.MINUS: -e, Case.PSEUDO_PLUS: E, Case.PSEUDO_MINUS: -E}
    if sig.is_complex:
        out[Case.I_PSEUDO_PLUS] = 1j * E
        out[Case.I_PSEUDO_MINUS] = -1j * E
    return out


def classify_factor(factor: Multivector, tol: float = RELATION_TOL) -> Case:
    for case, ref in _factor_table(factor.sig).items():
        if ga.norm_array(factor.coeffs - ref.coeffs) <= tol:
            return case
    raise CaseMismatch(
        "relation factor is outside the admissible set",
        factor={ga.blade_name(int(m)) or "e": abs(factor.coeffs[m]) for m in np.flatnonzero(factor.coeffs)},
    )


def _relation_factor(h_arr: np.ndarray, sig: Signature) -> np.ndarray:
    """``h^{1..n} e_{1..n}`` (odd n) or ``e`` (even n)."""
    if sig.n % 2 == 0:
        return ga.identity_array(sig)
    top = sig.pseudoscalar_mask
    return ga.right_blade_array(_pseudoscalar_array(h_arr, sig), top, sig) * ga.blade_inverse_sign(top, sig)


def _candidate_sums(hA: np.ndarray, sig: Signature) -> np.ndarray:
    """Column ``F`` holds ``sum_A h^A e^F e_A`` for every basis blade ``F``."""
    t = ga.tables(sig)
    dim = sig.dim
    masks = np.arange(dim)
    weight = t.square_sign.astype(float)
    if sig.n % 2:
        weight = weight * (t.grades % 2 == 0)
    out = np.zeros((dim, dim), dtype=hA.dtype)
    k = masks[None, :]
    for F in range(dim):
        B = F ^ masks  # e^F e^A = sign[F, A] e^{F^A}
        w = weight * t.sign[F, masks]
        src = k ^ B[:, None]
        right = hA[masks[:, None], src] * t.sign[src, B[:, None]]
        out[:, F] = w @ right
    return out


def _verify(T_inv: np.ndarray, T: np.ndarray, h: np.ndarray, targets: np.ndarray, lam: np.ndarray, sig: Signature) -> float:
    conj = ga.gp_array(ga.gp_array(T_inv, h, sig), T, sig)
    conj = ga.gp_array(lam, conj, sig)
    return float(np.max(ga.norm_array(conj - targets)))


def _refine(T, T_inv, residual, h, targets, lam, sig, passes: int = 3):
    """Polish a nearly valid ``T`` against round-off.

    For badly conditioned sets the blade sum cancels terms of size
    ``|h|^n``.  Conjugating by the current ``T`` first gives a set close to
    the standard generators, whose blade sum is well conditioned; composing the
    two intertwiners recovers accuracy.
    """
    weight_odd = sig.n % 2 == 1
    for _ in range(passes):
        near = ga.gp_array(lam, ga.gp_array(ga.gp_array(T_inv, h, sig), T, sig), sig)
        hA = blade_products_array(near, sig)
        keep = ga.tables(sig).grades % 2 == 0 if weight_odd else np.ones(sig.dim, bool)
        # F = e: sum_A h~^A e_A
        corr = np.einsum("a,ak->k", ga.tables(sig).square_sign * keep, hA)
        corr = ga.right_blade_array(corr, 0, sig)
        T_new = ga.gp_array(T, corr, sig)
        T_new = T_new / ga.norm_array(T_new)
        try:
            T_new_inv = ga.inverse_array(T_new, sig)
        except SingularElement:
            break
        res_new = _verify(T_new_inv, T_new, h, targets, lam, sig)
        if not res_new < residual:
            break
        T, T_inv, residual = T_new, T_new_inv, res_new
    return T, T_inv, residual


def _candidate_list(sums: np.ndarray, sig: Signature) -> list[tuple[str, np.ndarray]]:
    names = ["e" + ga.blade_name(m) if m else "e" for m in range(sig.dim)]
    out = [(names[F], sums[:, F]) for F in range(sig.dim)]
    if sig.n % 2:
        for B in range(sig.dim):
            for C in range(B + 1, sig.dim):
                out.append((f"{names[B]}+{names[C]}", sums[:, B] + sums[:, C]))
    return out


def intertwiner_to_standard(h: GeneratorSet, tol: float = RELATION_TOL) -> IntertwinerResult:
    """Find ``T`` with ``e^a = lam T^{-1} h^a T``, ``lam = h^{1..n} e_{1..n}`` for odd n."""
    sig = h.sig
    arr = h.array
    scale = max(1.0, float(np.max(ga.norm_array(arr)))) ** 2
    report = check_generators(h, tol * scale)
    if not report.ok:
        raise VerificationFailed(
            "generators violate the anticommutation relations",
            residual=report.max_relation_residual,
        )

    lam = _relation_factor(arr, sig)
    case = classify_factor(Multivector(sig, lam), tol * scale)

    hA = blade_products_array(arr, sig)
    sums = _candidate_sums(hA, sig)
    candidates = _candidate_list(sums, sig)
    norms = np.array([ga.norm_array(c) for _, c in candidates])
    order = np.argsort(-norms, kind="stable")
    floor = CANDIDATE_RTOL * norms[order[0]]
    targets = np.eye(sig.dim, dtype=sig.dtype)[[1 << a for a in range(sig.n)]]

    best = np.inf
    tried = 0
    for i in order:
        if norms[i] <= floor or norms[i] == 0:
            break
        tried += 1
        name, vec = candidates[i]
        T = vec / norms[i]
        try:
            T_inv = ga.inverse_array(T, sig)
        except SingularElement:
            continue
        residual = _verify(T_inv, T, arr, targets, lam, sig)
        if tol < residual <= REFINE_BELOW:
            T, T_inv, residual = _refine(T, T_inv, residual, arr, targets, lam, sig)
        best = min(best, residual)
        if residual <= tol:
            return IntertwinerResult(
                Multivector(sig, T), Multivector(sig, T_inv), case, Multivector(sig, lam), residual, name, tried
            )
    if tried == 0:
        raise NoCandidateFound("every candidate sum vanished", max_norm=float(norms[order[0]]))
    raise VerificationFailed("no candidate satisfied the relation", best_residual=float(best), tried=tried)


def intertwiner(h: GeneratorSet, g: GeneratorSet, tol: float = RELATION_TOL) -> IntertwinerResult:
    """Find ``T`` with ``g^a = lam T^{-1} h^a T``, ``lam = h^{1..n} g_{1..n}`` (``e`` for even n)."""
    if (h.sig.p, h.sig.q) != (g.sig.p, g.sig.q):
        raise SignatureMismatch(f"cannot relate {h.sig} to {g.sig}")
    sig = h.sig if h.sig.is_complex or not g.sig.is_complex else g.sig
    res_h = intertwiner_to_standard(h, tol)
    res_g = intertwiner_to_standard(g, tol)

    if sig.n % 2:
        g_top = _pseudoscalar_array(g.array, sig)
        lam = ga.gp_array(_pseudoscalar_array(h.array, sig), ga.inverse_array(g_top, sig), sig)
    else:
        lam = ga.identity_array(sig)
    case = classify_factor(Multivector(sig, lam), tol)

    T = ga.gp_array(res_h.T.coeffs, res_g.T_inv.coeffs, sig)
    T = T / ga.norm_array(T)
    T_inv = ga.inverse_array(T, sig)
    residual = _verify(T_inv, T, h.array, g.array, lam, sig)
    scale = max(1.0, float(np.max(ga.norm_array(g.array))))
    if residual > tol * scale:
        raise VerificationFailed("composed intertwiner failed verification", residual=residual)
    return IntertwinerResult(
        Multivector(sig, T),
        Multivector(sig, T_inv),
        case,
        Multivector(sig, lam),
        residual,
        f"{res_h.chosen_F} | {res_g.chosen_F}",
    )


def random_conjugator(sig: Signature, rng: np.random.Generator, scale: float = 1.0) -> Multivector:
    """Random invertible ``P = e^B exp(X)``.

    ``B`` is a uniformly chosen basis blade and ``X`` a Gaussian multivector
    of norm about ``scale``, so ``P`` is always invertible and its
    conditioning stays bounded.
    """
    X = ga.random_multivector(sig, rng, scale / np.sqrt(sig.dim * (2 if sig.is_complex else 1)))
    coeffs = np.zeros(sig.dim, dtype=sig.dtype)
    coeffs[int(rng.integers(sig.dim))] = 1.0
    return Multivector(sig, coeffs) * ga.exp(X)


def random_conjugated_set(
    sig: Signature, rng: np.random.Generator, scale: float = 1.0, max_tries: int = 100
) -> tuple[GeneratorSet, Multivector]:
    """``(P^{-1} e^a P, P)`` for a random invertible ``P`` (rejection sampled)."""
    for _ in range(max_tries):
        P = random_conjugator(sig, rng, scale)
        try:
            return GeneratorSet.standard(sig).conjugate_by(P), P
        except SingularElement:
            continue
    raise SingularElement("could not sample an invertible conjugator", tries=max_tries)


def generator_set_to_json(h: GeneratorSet) -> dict[str, Any]:
    from .io import coeffs_to_json, signature_to_json

    return {
        "signature": signature_to_json(h.sig),
        "generators": [coeffs_to_json(g.coeffs, h.sig) for g in h.gens],
    }


def generator_set_from_json(obj: dict[str, Any]) -> GeneratorSet:
    from .io import coeffs_from_json, signature_from_json

    sig = signature_from_json(obj["signature"])
    gens = []
    for item in obj["generators"]:
        coeffs = item["coeffs"] if isinstance(item, dict) and "coeffs" in item else item
        gens.append(Multivector(sig, coeffs_from_json(coeffs, sig)))
    return GeneratorSet(sig, tuple(gens))


def generator_set(sig: Signature, gens: Sequence[Multivector]) -> GeneratorSet:
    return GeneratorSet(sig, tuple(gens))
