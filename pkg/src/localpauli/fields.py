"""Fields of Clifford-algebra elements sampled on regular grids over R^r.

Field data are plain numpy arrays whose leading axes are the grid axes,
followed by a component axis (generators, connection directions or curvature
pairs) and the blade axis.  Grid axes are 0-based here; the expression
language and reports call them ``x1 .. xr``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import ClassVar, NamedTuple

import numpy as np

from . import algebra as ga
from .algebra import Multivector, Signature
from .exceptions import (
    AxisOutOfRange,
    DegenerateHBasis,
    GradeOutOfRange,
    NotGrade1,
    OrthogonalityViolated,
    ShapeMismatch,
)
from .pauli import GeneratorSet, blade_products_array, relation_residual_array

MIN_STENCIL_POINTS = 5


@dataclass(frozen=True)
class Grid:
    """Regular Cartesian grid: node ``i`` sits at ``origin + i * spacing``."""

    shape: tuple[int, ...]
    origin: tuple[float, ...]
    spacing: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "shape", tuple(int(s) for s in self.shape))
        object.__setattr__(self, "origin", tuple(float(x) for x in self.origin))
        object.__setattr__(self, "spacing", tuple(float(x) for x in self.spacing))
        if not (len(self.shape) == len(self.origin) == len(self.spacing)) or not self.shape:
            raise ShapeMismatch("shape, origin and spacing must have the same positive length")
        if any(s < 1 for s in self.shape):
            raise ShapeMismatch(f"grid shape must be positive, got {self.shape}")
        if any(not h > 0 for h in self.spacing):
            raise ShapeMismatch(f"grid spacing must be positive, got {self.spacing}")

    @classmethod
    def from_bounds(cls, shape, lower, upper) -> Grid:
        """Grid whose first and last nodes sit on ``lower`` and ``upper``."""
        shape = tuple(int(s) for s in shape)
        spacing = tuple((hi - lo) / (s - 1) for s, lo, hi in zip(shape, lower, upper))
        return cls(shape, tuple(lower), spacing)

    @property
    def r(self) -> int:
        return len(self.shape)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    def axis_coords(self, axis: int) -> np.ndarray:
        return self.origin[axis] + self.spacing[axis] * np.arange(self.shape[axis])

    def coords(self) -> list[np.ndarray]:
        """Coordinate arrays of shape ``self.shape`` (``ij`` indexing)."""
        return list(np.meshgrid(*[self.axis_coords(a) for a in range(self.r)], indexing="ij"))

    def refine(self, factor: int = 2) -> Grid:
        """Same box, ``factor`` times finer."""
        shape = tuple((s - 1) * factor + 1 for s in self.shape)
        return Grid(shape, self.origin, tuple(h / factor for h in self.spacing))

    def interior_mask(self, depth: int) -> np.ndarray:
        """Nodes at least ``depth`` nodes away from every boundary."""
        mask = np.ones(self.shape, dtype=bool)
        for axis, n in enumerate(self.shape):
            idx = np.arange(n)
            keep = (idx >= depth) & (idx <= n - 1 - depth)
            shape = [1] * self.r
            shape[axis] = n
            mask &= keep.reshape(shape)
        return mask


@dataclass(frozen=True)
class _Field:
    sig: Signature
    grid: Grid
    data: np.ndarray

    kind: ClassVar[str] = ""
    has_components: ClassVar[bool] = True

    def __post_init__(self) -> None:
        data = np.asarray(self.data)
        if not self.sig.is_complex and np.iscomplexobj(data):
            if np.any(data.imag != 0):
                raise ValueError("complex data for a real algebra")
            data = data.real
        data = data.astype(self.sig.dtype, copy=False)
        lead = self.grid.shape
        if data.shape[: len(lead)] != lead or data.shape[-1] != self.sig.dim:
            raise ShapeMismatch(
                f"{self.kind} data of shape {data.shape} does not fit grid {lead} and blade count {self.sig.dim}"
            )
        expected_ndim = len(lead) + (2 if self.has_components else 1)
        if data.ndim != expected_ndim:
            raise ShapeMismatch(f"{self.kind} data must have {expected_ndim} axes, got {data.ndim}")
        self._check_components(data)
        object.__setattr__(self, "data", data)

    def _check_components(self, data: np.ndarray) -> None:
        pass

    @property
    def components(self) -> int | None:
        return self.data.shape[-2] if self.has_components else None

    def at(self, node) -> Multivector | list[Multivector]:
        value = self.data[tuple(node)]
        if self.has_components:
            return [Multivector(self.sig, v) for v in value]
        return Multivector(self.sig, value)

    def with_data(self, data: np.ndarray):
        return type(self)(self.sig, self.grid, data)


@dataclass(frozen=True)
class FrameField(_Field):
    """Generators ``h^a(x)``; data shape ``(*grid.shape, n, 2**n)``."""

    kind: ClassVar[str] = "frame"

    def _check_components(self, data):
        if data.shape[-2] != self.sig.n:
            raise ShapeMismatch(f"frame needs {self.sig.n} generators per node, got {data.shape[-2]}")

    def generator_set(self, node) -> GeneratorSet:
        return GeneratorSet.from_array(self.sig, self.data[tuple(node)])

    @classmethod
    def constant(cls, h: GeneratorSet, grid: Grid) -> FrameField:
        data = np.broadcast_to(h.array, grid.shape + h.array.shape).copy()
        return cls(h.sig, grid, data)

    def relation_residual(self) -> np.ndarray:
        return relation_residual_array(self.data, self.sig)


@dataclass(frozen=True)
class ConnectionField(_Field):
    """Components ``C_mu(x)``; data shape ``(*grid.shape, r, 2**n)``."""

    kind: ClassVar[str] = "connection"

    def _check_components(self, data):
        if data.shape[-2] != self.grid.r:
            raise ShapeMismatch(f"connection needs {self.grid.r} components per node, got {data.shape[-2]}")

    def center_part(self) -> np.ndarray:
        """Largest central component over all nodes and directions."""
        return float(np.max(ga.norm_array(self.data * ga.center_mask(self.sig)), initial=0.0))


@dataclass(frozen=True)
class MultivectorField(_Field):
    """One multivector per node; data shape ``(*grid.shape, 2**n)``."""

    kind: ClassVar[str] = "multivector"
    has_components: ClassVar[bool] = False

    @classmethod
    def constant(cls, value: Multivector, grid: Grid) -> MultivectorField:
        return cls(value.sig, grid, np.broadcast_to(value.coeffs, grid.shape + (value.sig.dim,)).copy())


@dataclass(frozen=True)
class CurvatureField(_Field):
    """``R_{mu nu}`` for ``mu < nu`` in :attr:`pairs` order."""

    kind: ClassVar[str] = "curvature"

    @property
    def pairs(self) -> list[tuple[int, int]]:
        return list(itertools.combinations(range(self.grid.r), 2))

    def _check_components(self, data):
        npairs = self.grid.r * (self.grid.r - 1) // 2
        if data.shape[-2] != npairs:
            raise ShapeMismatch(f"curvature needs {npairs} pairs per node, got {data.shape[-2]}")

    def max_norm(self, mask: np.ndarray | None = None) -> float:
        norms = ga.norm_array(self.data).max(axis=-1, initial=0.0)
        if mask is not None:
            norms = norms[mask]
        return float(np.max(norms, initial=0.0))


FIELD_KINDS = {cls.kind: cls for cls in (FrameField, ConnectionField, MultivectorField, CurvatureField)}


@dataclass(frozen=True)
class FrameMatrixField:
    """Matrices ``Y = (y^a_b)`` per node; row ``a`` holds the components of ``h^a``."""

    sig: Signature
    grid: Grid
    data: np.ndarray

    def __post_init__(self) -> None:
        data = np.asarray(self.data)
        n = self.sig.n
        if data.shape != self.grid.shape + (n, n):
            raise ShapeMismatch(f"frame matrix data must have shape {self.grid.shape + (n, n)}, got {data.shape}")
        object.__setattr__(self, "data", data)

    def orthogonality_residual(self) -> np.ndarray:
        eta = self.sig.eta
        prod = np.einsum("...ab,bc,...dc->...ad", self.data, eta, self.data)
        return np.max(np.abs(prod - eta), axis=(-2, -1))


# ---------------------------------------------------------------------------
# operations


def frame_from_matrix(Y: FrameMatrixField, tol: float = 1e-9) -> FrameField:
    """Grade-1 frame ``h^a = y^a_b e^b``."""
    residual = Y.orthogonality_residual()
    worst = int(np.argmax(residual))
    if residual.size and residual.flat[worst] > tol:
        node = [int(i) for i in np.unravel_index(worst, residual.shape)]
        raise OrthogonalityViolated(
            "frame matrix is not (pseudo-)orthogonal", node=node, residual=float(residual.flat[worst])
        )
    sig = Y.sig
    data = np.zeros(Y.grid.shape + (sig.n, sig.dim), dtype=np.result_type(Y.data.dtype, sig.dtype))
    for b in range(sig.n):
        data[..., :, 1 << b] = Y.data[..., :, b]
    return FrameField(sig, Y.grid, data)


def _check_axis(grid: Grid, axis: int) -> None:
    if not 0 <= axis < grid.r:
        raise AxisOutOfRange(f"axis {axis} outside 0..{grid.r - 1}", axis=axis)
    if grid.shape[axis] < MIN_STENCIL_POINTS:
        raise ShapeMismatch(
            f"axis {axis} has {grid.shape[axis]} nodes; derivatives need at least {MIN_STENCIL_POINTS}",
            axis=axis,
        )


def derivative_array(data: np.ndarray, axis: int, step: float) -> np.ndarray:
    """First derivative along ``axis``.

    Fourth-order central differences where the five-point stencil fits,
    second-order central differences one node in from each boundary and
    second-order one-sided differences on the boundary itself.
    """
    f = np.moveaxis(np.asarray(data), axis, 0)
    n = f.shape[0]
    out = np.empty(f.shape, dtype=np.result_type(f.dtype, np.float64))
    # written as differences so constants give exactly zero
    out[2 : n - 2] = (8.0 * (f[3 : n - 1] - f[1 : n - 3]) - (f[4:n] - f[0 : n - 4])) / (12.0 * step)
    out[1] = (f[2] - f[0]) / (2.0 * step)
    out[n - 2] = (f[n - 1] - f[n - 3]) / (2.0 * step)
    out[0] = (3.0 * (f[1] - f[0]) - (f[2] - f[1])) / (2.0 * step)
    out[n - 1] = (3.0 * (f[n - 1] - f[n - 2]) - (f[n - 2] - f[n - 3])) / (2.0 * step)
    return np.moveaxis(out, 0, axis)


def partial_derivative(f, axis: int):
    """Coefficientwise derivative of any grid field along grid ``axis``."""
    _check_axis(f.grid, axis)
    return f.with_data(derivative_array(f.data, axis, f.grid.spacing[axis]))


def mu_coefficient(n: int, k: int) -> Fraction:
    """Weight of the grade-``k`` h-projection in the general spin connection."""
    if n < 1 or not 1 <= k <= 2 * (n // 2):
        raise GradeOutOfRange(f"k={k} outside 1..{2 * (n // 2)} for n={n}", n=n, k=k)
    return Fraction(1, n - (-1) ** k * (n - 2 * k))


def _hbasis(h_arr: np.ndarray, sig: Signature, cond_limit: float = ga.COND_LIMIT) -> np.ndarray:
    """Matrices whose columns are the coefficient vectors of ``h^A``."""
    M = np.swapaxes(blade_products_array(h_arr, sig), -1, -2)
    with np.errstate(all="ignore"):
        cond = np.linalg.cond(M.reshape((-1, sig.dim, sig.dim)))
    bad = ~np.isfinite(cond) | (cond > cond_limit)
    if np.any(bad):
        first = int(np.flatnonzero(bad)[0])
        node = [int(i) for i in np.unravel_index(first, M.shape[:-2])] if M.ndim > 2 else []
        raise DegenerateHBasis(
            "the products h^A do not form a basis", node=node, condition_number=float(cond[first])
        )
    return M


def hbasis_project(x: Multivector, h: GeneratorSet, k: int) -> Multivector:
    """Grade-``k`` part of ``x`` with respect to the basis ``{h^A}``."""
    sig = h.sig
    if not 0 <= k <= sig.n:
        raise GradeOutOfRange(f"grade {k} outside 0..{sig.n}", grade=k)
    M = _hbasis(h.array, sig)
    c = np.linalg.solve(M, x.coeffs.astype(M.dtype))
    c = np.where(ga.grade_mask(sig, k), c, 0)
    return Multivector(sig, M @ c)


def _mu_weights(sig: Signature) -> np.ndarray:
    grades = ga.tables(sig).grades
    top = 2 * (sig.n // 2)
    return np.array([float(mu_coefficient(sig.n, int(g))) if 1 <= g <= top else 0.0 for g in grades])


def _frame_derivatives(h: FrameField, derivatives: np.ndarray | None) -> np.ndarray:
    """Stack of ``d_mu h^a`` with shape ``(*grid, r, n, D)``."""
    if derivatives is not None:
        d = np.asarray(derivatives)
        want = h.grid.shape + (h.grid.r,) + h.data.shape[-2:]
        if d.shape != want:
            raise ShapeMismatch(f"derivatives must have shape {want}, got {d.shape}")
        return d
    for axis in range(h.grid.r):
        _check_axis(h.grid, axis)
    return np.stack([derivative_array(h.data, mu, h.grid.spacing[mu]) for mu in range(h.grid.r)], axis=-3)


def _contracted_derivative(h: FrameField, dh: np.ndarray) -> np.ndarray:
    """``sum_a (d_mu h^a) h_a`` with ``h_a = eta_{ab} h^b``; shape ``(*grid, r, D)``."""
    lowered = h.data * h.sig.metric[:, None]
    prods = ga.gp_array(dh, lowered[..., None, :, :], h.sig)
    return prods.sum(axis=-2)


def spin_connection_general(h: FrameField, derivatives: np.ndarray | None = None) -> ConnectionField:
    """Unique center-free solution ``C_mu`` of ``d_mu h^a = [C_mu, h^a]``.

    ``C_mu = sum_k mu_k pi[h]_k((d_mu h^a) h_a)`` for ``k = 1 .. 2*floor(n/2)``.
    The change to the ``h^A`` basis is solved once per node for all
    directions.  ``derivatives`` may supply exact ``d_mu h^a`` with shape
    ``(*grid, r, n, D)``; otherwise finite differences are used.
    """
    sig = h.sig
    dh = _frame_derivatives(h, derivatives)
    rhs = _contracted_derivative(h, dh)  # (*grid, r, D)
    M = _hbasis(h.data, sig)
    coeffs = np.linalg.solve(M, np.swapaxes(rhs, -1, -2).astype(M.dtype))  # (*grid, D, r)
    coeffs = coeffs * _mu_weights(sig)[:, None]
    C = np.swapaxes(M @ coeffs, -1, -2)
    # the projections already exclude the center; drop its round-off
    C[..., ga.center_mask(sig)] = 0
    return ConnectionField(sig, h.grid, C)


def spin_connection_grade1(h: FrameField, derivatives: np.ndarray | None = None, tol: float = 1e-12) -> ConnectionField:
    """``C_mu = 1/4 (d_mu h^a) h_a`` for frames with values in grade 1.

    The scalar part of the product vanishes for exact derivatives; it is
    dropped here since the connection is only defined modulo the center.
    """
    sig = h.sig
    outside = np.abs(h.data[..., ~ga.grade_mask(sig, 1)])
    scale = max(1.0, float(np.max(np.abs(h.data), initial=0.0)))
    if outside.size and float(outside.max()) > tol * scale:
        node = [int(i) for i in np.unravel_index(int(np.argmax(outside)), outside.shape)[: h.grid.r]]
        raise NotGrade1("frame has components outside grade 1", node=node, value=float(outside.max()))
    dh = _frame_derivatives(h, derivatives)
    C = 0.25 * _contracted_derivative(h, dh)
    C = np.where(ga.grade_mask(sig, 2), C, 0)
    return ConnectionField(sig, h.grid, C)


def _check_same(h: FrameField, C: ConnectionField) -> None:
    if h.grid != C.grid or (h.sig.p, h.sig.q) != (C.sig.p, C.sig.q):
        raise ShapeMismatch("frame and connection live on different grids or algebras")


def field_equation_residual(
    h: FrameField, C: ConnectionField, derivatives: np.ndarray | None = None
) -> np.ndarray:
    """Per-node ``max_{a, mu} |d_mu h^a - [C_mu, h^a]|``."""
    _check_same(h, C)
    dh = _frame_derivatives(h, derivatives)  # (*grid, r, n, D)
    Cmu = C.data[..., :, None, :]
    hh = h.data[..., None, :, :]
    defect = dh - ga.commutator_array(Cmu, hh, h.sig)
    return ga.norm_array(defect).max(axis=(-2, -1))


def curvature(C: ConnectionField) -> CurvatureField:
    """``R_{mu nu} = d_mu C_nu - d_nu C_mu - [C_mu, C_nu]`` for ``mu < nu``."""
    sig, grid = C.sig, C.grid
    pairs = list(itertools.combinations(range(grid.r), 2))
    if not pairs:
        return CurvatureField(sig, grid, np.zeros(grid.shape + (0, sig.dim), dtype=sig.dtype))
    for axis in range(grid.r):
        _check_axis(grid, axis)
    dC = [derivative_array(C.data, mu, grid.spacing[mu]) for mu in range(grid.r)]
    out = []
    for mu, nu in pairs:
        R = dC[mu][..., nu, :] - dC[nu][..., mu, :]
        R = R - ga.commutator_array(C.data[..., mu, :], C.data[..., nu, :], sig)
        out.append(R)
    return CurvatureField(sig, grid, np.stack(out, axis=-2))


def max_commutator(C: ConnectionField) -> float:
    """Largest ``|[C_mu, C_nu]|`` over nodes and pairs."""
    worst = 0.0
    for mu, nu in itertools.combinations(range(C.grid.r), 2):
        br = ga.commutator_array(C.data[..., mu, :], C.data[..., nu, :], C.sig)
        worst = max(worst, float(np.max(ga.norm_array(br), initial=0.0)))
    return worst


class GaugeTransformed(NamedTuple):
    frame: FrameField
    connection: ConnectionField
    center_residual: float
    """Largest central part of ``S^{-1} d_mu S`` (should be zero)."""


def gauge_transform(h: FrameField, C: ConnectionField, S: MultivectorField) -> GaugeTransformed:
    """``h' = S^{-1} h S`` and ``C'_mu = S^{-1} C_mu S - S^{-1} d_mu S``."""
    _check_same(h, C)
    if S.grid != h.grid:
        raise ShapeMismatch("gauge field lives on a different grid")
    sig = h.sig if h.sig.is_complex or not S.sig.is_complex else S.sig
    S_inv = ga.inverse_array(S.data, sig)
    Sx = S.data[..., None, :]
    Sx_inv = S_inv[..., None, :]
    h_new = ga.gp_array(ga.gp_array(Sx_inv, h.data, sig), Sx, sig)
    dS = np.stack([derivative_array(S.data, mu, h.grid.spacing[mu]) for mu in range(h.grid.r)], axis=-2)
    inhom = ga.gp_array(Sx_inv, dS, sig)
    C_new = ga.gp_array(ga.gp_array(Sx_inv, C.data, sig), Sx, sig) - inhom
    center = float(np.max(ga.norm_array(inhom * ga.center_mask(sig)), initial=0.0))
    return GaugeTransformed(FrameField(sig, h.grid, h_new), ConnectionField(sig, h.grid, C_new), center)


def sample_frame(sig: Signature, grid: Grid, func) -> FrameField:
    """Frame from ``func(coords) -> array (*grid.shape, n, D)``."""
    return FrameField(sig, grid, func(grid.coords()))
