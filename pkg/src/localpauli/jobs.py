"""Job descriptions shared by the command-line tool and the fixtures.

A job names a signature, a grid and a frame.  Frames come as a matrix of
expressions ``y^a_b`` (grade-1 frames), as per-generator blade expressions,
or as a sampled field file.  Expressions may use the coordinates ``x1 ..
xr``, ``pi`` and named parameters, which are themselves expressions and are
substituted before anything is evaluated or differentiated.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from .algebra import Signature, parse_blade_name
from .exceptions import CliffordError, ShapeMismatch
from .expr import Expr, diff, evaluate, parse_expr, substitute, variables
from .fields import FrameField, FrameMatrixField, Grid, frame_from_matrix
from .io import load_field

DEFAULT_TOLERANCES = {
    "alg": 1e-9,
    "final": 1e-3,
    "path": 1e-2,
    "field": 1e-3,
    "closed": 1e-3,
}


def parse_signature(text: str) -> tuple[int, int]:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 2:
        raise ValueError(f"signature must look like 'p,q', got {text!r}")
    return int(parts[0]), int(parts[1])


def _number(text: str) -> float:
    tree = parse_expr(text)
    return float(evaluate(tree, {}, text))


def parse_grid(text: str) -> Grid:
    """``"shape;origin;spacing"`` with comma-separated entries, e.g. ``"65,65;0,0;2*pi/64,2*pi/64"``."""
    parts = text.split(";")
    if len(parts) != 3:
        raise ValueError(f"grid must be 'shape;origin;spacing', got {text!r}")
    shape = tuple(int(s) for s in parts[0].split(","))
    origin = tuple(_number(s) for s in parts[1].split(","))
    spacing = tuple(_number(s) for s in parts[2].split(","))
    return Grid(shape, origin, spacing)


def grid_text(grid: Grid) -> str:
    return ";".join(",".join(repr(v) for v in vals) for vals in (grid.shape, grid.origin, grid.spacing))


def resolve_parameters(params: Mapping[str, str]) -> dict[str, Expr]:
    """Parse parameters in order; later ones may refer to earlier ones."""
    out: dict[str, Expr] = {}
    for name, src in params.items():
        out[name] = substitute(parse_expr(src), out)
    return out


def coordinate_env(grid: Grid) -> dict[str, np.ndarray]:
    return {f"x{i + 1}": c for i, c in enumerate(grid.coords())}


def _eval_on(tree: Expr, src: str, env: Mapping[str, Any], shape: tuple[int, ...]) -> np.ndarray:
    value = evaluate(tree, env, src)
    return np.broadcast_to(np.asarray(value, dtype=float), shape)


@dataclass
class FrameSpec:
    """One of ``matrix`` (rows of expressions), ``generators`` (blade maps) or ``file``."""

    kind: str
    matrix: list[list[str]] | None = None
    generators: list[dict[str, str]] | None = None
    file: str | None = None

    def to_dict(self) -> dict[str, Any]:
        return {k: v for k, v in asdict(self).items() if v is not None}

    @classmethod
    def from_dict(cls, obj: Mapping[str, Any]) -> FrameSpec:
        if "matrix" in obj:
            return cls("matrix", matrix=[list(row) for row in obj["matrix"]])
        if "generators" in obj:
            return cls("generators", generators=[dict(g) for g in obj["generators"]])
        if "file" in obj:
            return cls("file", file=str(obj["file"]))
        raise ValueError("frame needs one of 'matrix', 'generators' or 'file'")


@dataclass
class JobSpec:
    command: str
    signature: Signature
    grid: Grid | None = None
    frame: FrameSpec | None = None
    parameters: dict[str, str] = field(default_factory=dict)
    tolerances: dict[str, float] = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    options: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        merged = dict(DEFAULT_TOLERANCES)
        merged.update(self.tolerances)
        self.tolerances = merged
        if self.frame is not None and self.frame.kind == "matrix":
            n = self.signature.n
            if len(self.frame.matrix) != n or any(len(row) != n for row in self.frame.matrix):
                raise ShapeMismatch(f"frame matrix must be {n}x{n} for {self.signature}")
        if self.frame is not None and self.frame.kind == "generators" and len(self.frame.generators) != self.signature.n:
            raise ShapeMismatch(f"need {self.signature.n} generator definitions")
        if self.grid is not None:
            allowed = {f"x{i + 1}" for i in range(self.grid.r)} | set(self.parameters)
            for src in self._expressions():
                extra = variables(parse_expr(src)) - allowed
                if extra:
                    raise ShapeMismatch(
                        f"expression {src!r} uses {sorted(extra)} but the grid has r = {self.grid.r}",
                        names=sorted(extra),
                    )

    def _expressions(self) -> list[str]:
        out = list(self.parameters.values())
        if self.frame is not None and self.frame.kind == "matrix":
            out += [s for row in self.frame.matrix for s in row]
        if self.frame is not None and self.frame.kind == "generators":
            out += [s for g in self.frame.generators for s in g.values()]
        return out

    def to_dict(self) -> dict[str, Any]:
        return {
            "command": self.command,
            "signature": {"p": self.signature.p, "q": self.signature.q, "field": self.signature.field},
            "grid": None if self.grid is None else grid_text(self.grid),
            "frame": None if self.frame is None else self.frame.to_dict(),
            "parameters": dict(self.parameters),
            "tolerances": dict(self.tolerances),
            "options": dict(self.options),
        }

    @classmethod
    def from_dict(cls, obj: Mapping[str, Any], command: str | None = None) -> JobSpec:
        sig_obj = obj.get("signature", {})
        sig = Signature(int(sig_obj.get("p", 0)), int(sig_obj.get("q", 0)), sig_obj.get("field", "R"))
        grid = obj.get("grid")
        return cls(
            command=command or obj.get("command", "solve"),
            signature=sig,
            grid=parse_grid(grid) if isinstance(grid, str) else None,
            frame=FrameSpec.from_dict(obj["frame"]) if obj.get("frame") else None,
            parameters=dict(obj.get("parameters", {})),
            tolerances=dict(obj.get("tolerances", {})),
            options=dict(obj.get("options", {})),
        )

    # sampling ---------------------------------------------------------

    def build_frame(self, base_dir: Path | None = None) -> FrameField:
        if self.frame is None:
            raise ValueError("job has no frame definition")
        if self.frame.kind == "file":
            path = Path(self.frame.file)
            if base_dir is not None and not path.is_absolute():
                path = base_dir / path
            h = load_field(path)
            if not isinstance(h, FrameField):
                raise ShapeMismatch(f"{path} holds a {h.kind} field, not a frame")
            return h
        if self.grid is None:
            raise ValueError("job has no grid")
        grid, sig = self.grid, self.signature
        params = resolve_parameters(self.parameters)
        env = coordinate_env(grid)
        if self.frame.kind == "matrix":
            Y = np.empty(grid.shape + (sig.n, sig.n))
            for a, row in enumerate(self.frame.matrix):
                for b, src in enumerate(row):
                    Y[..., a, b] = _eval_on(substitute(parse_expr(src), params), src, env, grid.shape)
            return frame_from_matrix(FrameMatrixField(sig, grid, Y), tol=self.tolerances["alg"])
        data = np.zeros(grid.shape + (sig.n, sig.dim), dtype=sig.dtype)
        for a, gen in enumerate(self.frame.generators):
            for blade, src in gen.items():
                data[..., a, parse_blade_name(blade, sig.n)] = _eval_on(
                    substitute(parse_expr(src), params), src, env, grid.shape
                )
        return FrameField(sig, grid, data)


def parameter_derivatives(params: Mapping[str, str], grid: Grid) -> list[dict[str, np.ndarray]]:
    """Per axis ``mu``: values of every parameter and of ``d_<name>`` (exact derivatives)."""
    trees = resolve_parameters(params)
    env = coordinate_env(grid)
    values = {name: _eval_on(t, params[name], env, grid.shape) for name, t in trees.items()}
    out = []
    for mu in range(grid.r):
        d = dict(values)
        for name, t in trees.items():
            d[f"d_{name}"] = _eval_on(diff(t, f"x{mu + 1}"), params[name], env, grid.shape)
        out.append(d)
    return out


def evaluate_blades(
    blades: Mapping[str, str], env: Mapping[str, Any], sig: Signature, shape: tuple[int, ...]
) -> np.ndarray:
    """Multivector field from a blade-to-expression map."""
    out = np.zeros(shape + (sig.dim,), dtype=sig.dtype)
    for blade, src in blades.items():
        out[..., parse_blade_name(blade, sig.n)] = _eval_on(parse_expr(src), src, env, shape)
    return out


# ---------------------------------------------------------------------------
# fixtures

FIXTURES = ("1", "2", "3", "4")


def load_fixture(name: str) -> dict[str, Any]:
    if name not in FIXTURES:
        raise CliffordError(f"unknown example {name!r}; choose one of {', '.join(FIXTURES)}")
    text = resources.files("localpauli").joinpath("fixtures").joinpath(f"example{name}.json").read_text()
    return json.loads(text)
