"""Global solutions of ``d_mu S = C_mu S`` and the assembled intertwiner field.

Three integrators are provided: classical RK4 along a line (one grid axis),
exponentiating a potential when the connection is closed and commuting, and
a path-ordered product of midpoint exponentials along axis-ordered staircases
for the general flat case.  :func:`solve_global` chains them with the spin
connection and the algebraic intertwiner into ``T(x) = S(x) K``.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import algebra as ga
from .algebra import Multivector
from .exceptions import (
    CliffordError,
    NotClosed,
    PathDependent,
    ShapeMismatch,
    SingularElement,
    SingularityDetected,
    VerificationFailed,
)
from .fields import (
    ConnectionField,
    FrameField,
    MultivectorField,
    _check_axis,
    curvature,
    derivative_array,
    max_commutator,
    spin_connection_general,
)
from .pauli import (
    RELATION_TOL,
    Case,
    GeneratorSet,
    IntertwinerResult,
    _relation_factor,
    admissible_pseudoscalars,
    intertwiner_to_standard,
    relation_residual_array,
)

METHODS = ("ode_r1", "potential", "path_ordered")
CLOSED_RTOL = 1e-3
COMMUTE_RTOL = 1e-8
DEFAULT_TOL_FINAL = 1e-3
DEFAULT_TOL_PATH = 1e-2


# ---------------------------------------------------------------------------
# small helpers


def _midpoints(f: np.ndarray) -> np.ndarray:
    """Values halfway between consecutive entries along axis 0 (cubic interpolation)."""
    n = f.shape[0]
    if n < 4:
        return 0.5 * (f[:-1] + f[1:])
    mid = np.empty((n - 1,) + f.shape[1:], dtype=f.dtype)
    mid[1 : n - 2] = (-f[0 : n - 3] + 9.0 * f[1 : n - 2] + 9.0 * f[2 : n - 1] - f[3:n]) / 16.0
    mid[0] = (5.0 * f[0] + 15.0 * f[1] - 5.0 * f[2] + f[3]) / 16.0
    mid[n - 2] = (5.0 * f[n - 1] + 15.0 * f[n - 2] - 5.0 * f[n - 3] + f[n - 4]) / 16.0
    return mid


def _cumulative_integral(f: np.ndarray, step: float) -> np.ndarray:
    """Running integral from node 0 along axis 0 (fourth-order per cell)."""
    n = f.shape[0]
    cells = np.empty((n - 1,) + f.shape[1:], dtype=f.dtype)
    if n < 4:
        cells[:] = 0.5 * step * (f[:-1] + f[1:])
    else:
        cells[1 : n - 2] = step / 24.0 * (-f[0 : n - 3] + 13.0 * f[1 : n - 2] + 13.0 * f[2 : n - 1] - f[3:n])
        cells[0] = step / 24.0 * (9.0 * f[0] + 19.0 * f[1] - 5.0 * f[2] + f[3])
        cells[n - 2] = step / 24.0 * (9.0 * f[n - 1] + 19.0 * f[n - 2] - 5.0 * f[n - 3] + f[n - 4])
    out = np.zeros_like(f)
    np.cumsum(cells, axis=0, out=out[1:])
    return out


def _base_node(grid, base) -> tuple[int, ...]:
    if base is None:
        return (0,) * grid.r
    base = tuple(int(b) for b in base)
    if len(base) != grid.r or any(not 0 <= b < s for b, s in zip(base, grid.shape)):
        raise ShapeMismatch(f"base node {base} outside grid {grid.shape}")
    return base


def _initial(sig, S0: Multivector | None) -> np.ndarray:
    if S0 is None:
        return ga.identity_array(sig)
    try:
        ga.inverse_array(S0.coeffs, sig)
    except SingularElement as exc:
        raise SingularityDetected("initial value is not invertible", **exc.details) from exc
    return S0.coeffs.astype(np.result_type(S0.coeffs.dtype, sig.dtype))


def _check_invertible(S: np.ndarray, sig) -> None:
    try:
        ga.inverse_array(S, sig)
    except SingularElement as exc:
        raise SingularityDetected("transported element lost invertibility", **exc.details) from exc


# ---------------------------------------------------------------------------
# r = 1


def _rk4_sweep(C: np.ndarray, step: float, S0: np.ndarray, sig) -> np.ndarray:
    mid = _midpoints(C)
    out = np.empty((C.shape[0],) + S0.shape, dtype=np.result_type(C.dtype, S0.dtype))
    out[0] = S0
    S = S0
    for j in range(C.shape[0] - 1):
        k1 = ga.gp_array(C[j], S, sig)
        k2 = ga.gp_array(mid[j], S + 0.5 * step * k1, sig)
        k3 = ga.gp_array(mid[j], S + 0.5 * step * k2, sig)
        k4 = ga.gp_array(C[j + 1], S + step * k3, sig)
        S = S + step / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[j + 1] = S
    return out


def solve_ode_line(C: ConnectionField, S0: Multivector | None = None, base: int = 0) -> MultivectorField:
    """Classical RK4 for ``dS/dx = C_1(x) S`` on a one-dimensional grid.

    Midpoint values of ``C_1`` come from cubic interpolation of the node
    samples, so the scheme keeps fourth order.  The solution equals ``S0`` at
    node ``base`` and is integrated outward in both directions.
    """
    grid, sig = C.grid, C.sig
    if grid.r != 1:
        raise ShapeMismatch(f"line integration needs r = 1, got r = {grid.r}")
    (base,) = _base_node(grid, (base,))
    start = _initial(sig, S0)
    C1 = C.data[:, 0, :]
    step = grid.spacing[0]
    fwd = _rk4_sweep(C1[base:], step, start, sig)
    bwd = _rk4_sweep(-C1[: base + 1][::-1], step, start, sig)[::-1]
    S = np.concatenate([bwd[:-1], fwd], axis=0)
    _check_invertible(S, sig)
    return MultivectorField(sig, grid, S)


# ---------------------------------------------------------------------------
# potentials


@dataclass(frozen=True)
class PotentialReport:
    potential: MultivectorField
    max_asymmetry: float
    path_independence_residual: float


def closedness_defect(C: ConnectionField) -> tuple[float, float]:
    """Largest ``|d_mu C_nu - d_nu C_mu|`` on interior nodes, and the derivative scale."""
    grid = C.grid
    if grid.r < 2:
        return 0.0, 0.0
    for axis in range(grid.r):
        _check_axis(grid, axis)
    mask = grid.interior_mask(2)
    dC = [derivative_array(C.data, mu, grid.spacing[mu]) for mu in range(grid.r)]
    worst = 0.0
    for mu, nu in itertools.combinations(range(grid.r), 2):
        asym = ga.norm_array(dC[mu][..., nu, :] - dC[nu][..., mu, :])[mask]
        worst = max(worst, float(np.max(asym, initial=0.0)))
    scale = max(float(np.max(ga.norm_array(d)[mask], initial=0.0)) for d in dC)
    return worst, scale


def _staircase(Q: list[np.ndarray], base: tuple[int, ...], order: Sequence[int]) -> np.ndarray:
    """Sum of per-axis running integrals along a staircase visiting ``order``.

    ``Q[k]`` integrates direction ``k`` from the base coordinate along axis
    ``k`` at every node; the leg along ``order[i]`` runs with the axes visited
    later still held at the base.
    """
    total = None
    r = len(base)
    for i, axis in enumerate(order):
        later = set(order[i + 1 :])
        idx = tuple(base[a] if a in later else slice(None) for a in range(r))
        part = Q[axis][idx]
        # reinsert the pinned axes so the leg broadcasts over them
        shape = list(Q[axis].shape)
        for a in later:
            shape[a] = 1
        part = part.reshape(shape)
        total = part if total is None else total + part
    return np.broadcast_to(total, Q[0].shape).copy()


def _running_integrals(C: ConnectionField, base: tuple[int, ...]) -> list[np.ndarray]:
    grid = C.grid
    out = []
    for axis in range(grid.r):
        f = np.moveaxis(C.data[..., axis, :], axis, 0)
        Q = _cumulative_integral(f, grid.spacing[axis])
        Q = Q - Q[base[axis]]
        out.append(np.moveaxis(Q, 0, axis))
    return out


def potential_report(
    C: ConnectionField,
    base=None,
    rtol: float = CLOSED_RTOL,
    rng: np.random.Generator | None = None,
    extra_orders: int = 2,
) -> PotentialReport:
    """:func:`find_potential` plus its closedness and path diagnostics."""
    grid = C.grid
    base = _base_node(grid, base)
    asym, scale = closedness_defect(C)
    if asym > rtol * max(scale, 1.0):
        raise NotClosed("connection is not closed", max_asymmetry=asym, derivative_scale=scale)
    Q = _running_integrals(C, base)
    order = list(range(grid.r))
    P = _staircase(Q, base, order)
    residual = 0.0
    for alt in _alternative_orders(grid.r, rng, extra_orders):
        residual = max(residual, float(np.max(ga.norm_array(_staircase(Q, base, alt) - P))))
    return PotentialReport(MultivectorField(C.sig, grid, P), asym, residual)


def find_potential(C: ConnectionField, base=None, rtol: float = CLOSED_RTOL) -> MultivectorField:
    """0-form ``C(x)`` with ``dC = C_mu dx^mu`` and ``C(base) = 0``.

    Each coordinate leg is integrated with a fourth-order composite rule and
    legs are visited in increasing axis order from ``base``.  Raises
    :class:`NotClosed` when the interior asymmetry of ``d_mu C_nu`` exceeds
    ``rtol`` relative to the derivative scale.
    """
    return potential_report(C, base, rtol).potential


def transport_potential(potential: MultivectorField) -> MultivectorField:
    """``S(x) = exp(C(x))``."""
    return potential.with_data(ga.exp_array(potential.data, potential.sig))


def _alternative_orders(r: int, rng: np.random.Generator | None, extra: int) -> list[list[int]]:
    if r < 2:
        return []
    orders = [list(reversed(range(r)))]
    if r >= 3:
        rng = rng if rng is not None else np.random.default_rng(0)
        perms = [list(p) for p in itertools.permutations(range(r)) if list(p) not in (list(range(r)), orders[0])]
        pick = rng.choice(len(perms), size=min(extra, len(perms)), replace=False)
        orders.extend(perms[int(i)] for i in sorted(pick))
    return orders


# ---------------------------------------------------------------------------
# path-ordered products


def _sweep_axis(S: np.ndarray, C: np.ndarray, axis: int, step: float, b: int, sig) -> None:
    """Propagate ``S`` (already correct at index ``b`` along ``axis``) outward in place."""
    Sv = np.moveaxis(S, axis, 0)
    Cv = np.moveaxis(C, axis, 0)
    mid = _midpoints(Cv) * step
    fwd = ga.exp_array(mid[b:], sig)
    bwd = ga.exp_array(-mid[:b], sig)
    for j in range(b, Sv.shape[0] - 1):
        Sv[j + 1] = ga.gp_array(fwd[j - b], Sv[j], sig)
    for j in range(b, 0, -1):
        Sv[j - 1] = ga.gp_array(bwd[j - 1], Sv[j], sig)


def _path_ordered(C: ConnectionField, base: tuple[int, ...], start: np.ndarray, order: Sequence[int]) -> np.ndarray:
    grid, sig = C.grid, C.sig
    dtype = np.result_type(C.data.dtype, start.dtype)
    S = np.zeros(grid.shape + (sig.dim,), dtype=dtype)
    S[base] = start
    r = grid.r
    for i, axis in enumerate(order):
        later = set(order[i + 1 :])
        idx = tuple(base[a] if a in later else slice(None) for a in range(r))
        # views: axes in `later` are pinned, so `axis` shifts left by the pinned axes before it
        sub_axis = axis - sum(1 for a in later if a < axis)
        _sweep_axis(S[idx], C.data[idx + (axis,)], sub_axis, grid.spacing[axis], base[axis], sig)
    return S


@dataclass(frozen=True)
class PathOrderedReport:
    S: MultivectorField
    path_independence_residual: float


def path_ordered_report(
    C: ConnectionField,
    base=None,
    S0: Multivector | None = None,
    tol: float | None = DEFAULT_TOL_PATH,
    rng: np.random.Generator | None = None,
    extra_orders: int = 2,
) -> PathOrderedReport:
    """:func:`transport_path_ordered` plus the path-independence residual.

    The residual is the largest difference, relative to ``max |S|``, between
    the default staircase and the reversed (and for ``r >= 3`` randomly
    permuted) axis orders.
    """
    grid, sig = C.grid, C.sig
    base = _base_node(grid, base)
    start = _initial(sig, S0)
    S = _path_ordered(C, base, start, list(range(grid.r)))
    scale = max(float(np.max(ga.norm_array(S))), 1e-300)
    residual = 0.0
    for alt in _alternative_orders(grid.r, rng, extra_orders):
        other = _path_ordered(C, base, start, alt)
        residual = max(residual, float(np.max(ga.norm_array(other - S))) / scale)
    if tol is not None and residual > tol:
        raise PathDependent("transport depends on the path", residual=residual, tol=tol)
    _check_invertible(S, sig)
    return PathOrderedReport(MultivectorField(sig, grid, S), residual)


def transport_path_ordered(
    C: ConnectionField,
    base=None,
    S0: Multivector | None = None,
    tol: float | None = DEFAULT_TOL_PATH,
    rng: np.random.Generator | None = None,
) -> MultivectorField:
    """Ordered product of midpoint exponentials along axis-ordered staircases.

    Each grid step contributes ``exp(C_mu(midpoint) dx)`` on the left
    (``exp(-C_mu dx)`` when walking backwards), which is second-order Magnus.
    Raises :class:`PathDependent` if reversing or permuting the axis order
    changes ``S`` by more than ``tol`` (relative).
    """
    return path_ordered_report(C, base, S0, tol, rng).S


# ---------------------------------------------------------------------------
# full pipeline


def commuting_defect(C: ConnectionField, rtol: float = 1e-10) -> float:
    """Largest commutator among an orthonormal basis of the span of all ``C_mu(x)``."""
    flat = C.data.reshape((-1, C.sig.dim))
    if not flat.size:
        return 0.0
    _, s, vh = np.linalg.svd(flat, full_matrices=False)
    if s[0] == 0:
        return 0.0
    basis = vh[s > rtol * s[0]]
    worst = 0.0
    for i, j in itertools.combinations(range(basis.shape[0]), 2):
        worst = max(worst, float(ga.norm_array(ga.commutator_array(basis[i], basis[j], C.sig))))
    return worst


@dataclass
class TransportResult:
    S: MultivectorField
    K: Multivector
    T: MultivectorField
    method: str
    diagnostics: dict[str, Any]
    connection: ConnectionField | None = None
    f_mean: GeneratorSet | None = None
    case: Case | None = None
    intertwiner: IntertwinerResult | None = field(default=None, repr=False)

    def diagnostics_json(self) -> dict[str, Any]:
        out = {"method": self.method, **self.diagnostics}
        if self.case is not None:
            out["case"] = self.case.value
        return out

    def to_dict(self, include_fields: bool = True) -> dict[str, Any]:
        from .io import field_to_json, multivector_to_json

        out: dict[str, Any] = {"method": self.method, "K": multivector_to_json(self.K), "diagnostics": self.diagnostics_json()}
        if include_fields:
            out["S"] = field_to_json(self.S)
            out["T"] = field_to_json(self.T)
        return out

    def save(self, directory: str | Path, fmt: str = "json") -> dict[str, Path]:
        """Write ``S`` and ``T`` field containers, ``K.json`` and ``diagnostics.json``."""
        from .io import dumps, multivector_to_json, save_field

        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        suffix = ".field.bin" if fmt == "bin" else ".field.json"
        paths = {
            "S": save_field(self.S, directory / f"S{suffix}"),
            "T": save_field(self.T, directory / f"T{suffix}"),
        }
        paths["K"] = directory / "K.json"
        paths["K"].write_text(dumps(multivector_to_json(self.K)))
        paths["diagnostics"] = directory / "diagnostics.json"
        paths["diagnostics"].write_text(dumps(self.diagnostics_json()))
        return paths

    @classmethod
    def load(cls, directory: str | Path) -> TransportResult:
        from .io import load_field, multivector_from_json

        directory = Path(directory)
        def pick(name):
            for suffix in (".field.bin", ".field.json"):
                if (directory / f"{name}{suffix}").exists():
                    return load_field(directory / f"{name}{suffix}")
            raise FileNotFoundError(directory / name)

        diag = json.loads((directory / "diagnostics.json").read_text())
        method = diag.pop("method")
        case = diag.pop("case", None)
        K = multivector_from_json(json.loads((directory / "K.json").read_text()))
        return cls(pick("S"), K, pick("T"), method, diag, case=Case(case) if case else None)


def _staged(stage: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except CliffordError as exc:
        if exc.stage is None:
            exc.stage = stage
        raise


def conjugated_frame(h: FrameField, S: MultivectorField) -> np.ndarray:
    """``S^{-1} h^a S`` per node, shape ``(*grid, n, D)``."""
    sig = h.sig if h.sig.is_complex or not S.sig.is_complex else S.sig
    S_inv = ga.inverse_array(S.data, sig)
    return ga.gp_array(ga.gp_array(S_inv[..., None, :], h.data, sig), S.data[..., None, :], sig)


def relation_defect(h: FrameField, T: MultivectorField) -> np.ndarray:
    """Per-node ``max_a |lam T^{-1} h^a T - e^a|`` (``lam = h^{1..n} e_{1..n}`` for odd n)."""
    sig = h.sig if h.sig.is_complex or not T.sig.is_complex else T.sig
    conj = conjugated_frame(h, T)
    lam = _relation_factor(h.data, sig)
    conj = ga.gp_array(lam[..., None, :], conj, sig)
    targets = np.eye(sig.dim)[[1 << a for a in range(sig.n)]]
    return ga.norm_array(conj - targets).max(axis=-1)


def _odd_factor_residual(h_data: np.ndarray, sig) -> float:
    """Largest distance of ``h^{1..n} e_{1..n}`` from its admissible values over all nodes."""
    if sig.n % 2 == 0:
        return 0.0
    lam = _relation_factor(h_data, sig)
    top = sig.pseudoscalar_mask
    allowed = [
        ga.right_blade_array(v.coeffs, top, sig) * ga.blade_inverse_sign(top, sig)
        for v in admissible_pseudoscalars(sig).values()
    ]
    dist = np.min(np.stack([ga.norm_array(lam - a) for a in allowed]), axis=0)
    return float(np.max(dist))


def _select_method(C: ConnectionField, closed_rtol: float) -> str:
    if C.grid.r == 1:
        return "ode_r1"
    asym, scale = closedness_defect(C)
    if asym > closed_rtol * max(scale, 1.0):
        return "path_ordered"
    cmax = max(1.0, float(np.max(ga.norm_array(C.data), initial=0.0)))
    if commuting_defect(C) > COMMUTE_RTOL * cmax:
        return "path_ordered"
    return "potential"


def solve_global(
    h: FrameField,
    method: str = "auto",
    base=None,
    tol_final: float | None = DEFAULT_TOL_FINAL,
    tol_path: float | None = DEFAULT_TOL_PATH,
    closed_rtol: float = CLOSED_RTOL,
    rng: np.random.Generator | None = None,
    connection: ConnectionField | None = None,
) -> TransportResult:
    """Intertwiner field ``T(x) = S(x) K`` with ``e^a = lam T^{-1} h^a T``.

    Stages: ``connection`` (general spin connection), ``curvature``,
    ``transport`` (``ode_r1`` for one axis, ``potential`` for closed
    commuting connections, ``path_ordered`` otherwise; ``method`` forces a
    choice), ``constancy`` (node average of ``S^{-1} h^a S``),
    ``intertwiner`` (constant ``K``) and ``verify``.  Any failure carries its
    stage in ``exc.stage``.
    """
    sig, grid = h.sig, h.grid
    if method not in ("auto",) + METHODS:
        raise ValueError(f"unknown method {method!r}")
    base = _base_node(grid, base)

    C = connection if connection is not None else _staged("connection", spin_connection_general, h)
    if grid.r >= 2:
        R = _staged("curvature", curvature, C)
        max_curv = R.max_norm(grid.interior_mask(4))
        max_curv_all = R.max_norm()
    else:
        max_curv = max_curv_all = 0.0
    comm = max_commutator(C)

    chosen = _select_method(C, closed_rtol) if method == "auto" else method
    path_res = 0.0
    asym = None
    if chosen == "ode_r1":
        S = _staged("transport", solve_ode_line, C, None, base[0])
    elif chosen == "potential":
        rep = _staged("transport", potential_report, C, base, closed_rtol, rng)
        S = _staged("transport", transport_potential, rep.potential)
        path_res, asym = rep.path_independence_residual, rep.max_asymmetry
    elif chosen == "path_ordered":
        rep = _staged("transport", path_ordered_report, C, base, None, tol_path, rng)
        S, path_res = rep.S, rep.path_independence_residual
    else:
        raise ValueError(f"unknown method {chosen!r}")

    f = _staged("constancy", conjugated_frame, h, S)
    f_mean = f.reshape((-1,) + f.shape[-2:]).mean(axis=0)
    spread = f - f_mean
    constancy = float(np.max(np.abs(spread)))
    parts = [f.real, f.imag] if np.iscomplexobj(f) else [f]
    constancy_std = max(float(np.max(p.reshape((-1,) + f.shape[-2:]).std(axis=0))) for p in parts)
    mean_rel = float(np.max(relation_residual_array(f_mean, sig)))

    f_set = GeneratorSet.from_array(sig, f_mean)
    k_tol = max(RELATION_TOL, 10.0 * mean_rel, 10.0 * constancy)
    inter = _staged("intertwiner", intertwiner_to_standard, f_set, k_tol)
    K = inter.T
    T = S.with_data(ga.gp_array(S.data, K.coeffs, sig))

    defect = _staged("verify", relation_defect, h, T)
    final = float(np.max(defect))
    diagnostics = {
        "max_curvature": max_curv,
        "max_curvature_all_nodes": max_curv_all,
        "max_commutator": comm,
        "path_independence_residual": path_res,
        "constancy_residual": constancy,
        "constancy_std": constancy_std,
        "mean_relation_residual": mean_rel,
        "intertwiner_residual": inter.residual,
        "odd_factor_residual": _odd_factor_residual(h.data, sig),
        "final_residual": final,
    }
    if asym is not None:
        diagnostics["max_asymmetry"] = asym
    result = TransportResult(S, K, T, chosen, diagnostics, C, f_set, inter.case, inter)
    if tol_final is not None and final > tol_final:
        exc = VerificationFailed("global relation defect above tolerance", final_residual=final, tol=tol_final)
        exc.stage = "verify"
        exc.result = result
        raise exc
    return result
