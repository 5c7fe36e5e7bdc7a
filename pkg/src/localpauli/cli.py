"""Command-line entry point ``localpauli``.

Every command prints a JSON report to stdout that echoes the resolved job
(defaults filled in) and a ``checks`` table; the exit status is 0 only when
every check passes, 1 when a residual misses its tolerance, and 2 when the
job fails outright (the error object goes to stderr).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import algebra as ga
from . import transport as tr
from .algebra import Signature
from .exceptions import CliffordError, NotClosed
from .fields import (
    ConnectionField,
    FrameField,
    curvature,
    field_equation_residual,
    max_commutator,
    spin_connection_general,
    spin_connection_grade1,
)
from .io import dumps, load_field, save_field
from .jobs import (
    DEFAULT_TOLERANCES,
    FrameSpec,
    JobSpec,
    evaluate_blades,
    load_fixture,
    parameter_derivatives,
    parse_grid,
    parse_signature,
)
from .pauli import (
    GeneratorSet,
    check_generators,
    generator_set_from_json,
    intertwiner,
    intertwiner_to_standard,
)

EXIT_OK, EXIT_TOLERANCE, EXIT_ERROR = 0, 1, 2
COMMUTATOR_FLAG = 1e-3


class Report:
    def __init__(self, command: str, job: dict[str, Any] | None) -> None:
        self.data: dict[str, Any] = {"command": command, "job": job, "results": {}, "checks": {}}

    def check(self, name: str, value: float, tol: float, mode: str = "<=") -> None:
        ok = value <= tol if mode == "<=" else value > tol
        self.data["checks"][name] = {"value": float(value), "tol": float(tol), "mode": mode, "ok": bool(ok)}

    def require(self, name: str, ok: bool, detail: Any = None) -> None:
        self.data["checks"][name] = {"ok": bool(ok), "detail": detail}

    @property
    def ok(self) -> bool:
        return all(c["ok"] for c in self.data["checks"].values())

    def finish(self) -> dict[str, Any]:
        self.data["ok"] = self.ok
        return self.data


# ---------------------------------------------------------------------------
# argument handling


def _json_arg(value: str) -> Any:
    text = value.strip()
    if text.startswith(("{", "[")):
        return json.loads(text)
    return json.loads(Path(value).read_text())


def _tolerances(args) -> dict[str, float]:
    tol = dict(DEFAULT_TOLERANCES)
    for key in tol:
        value = getattr(args, f"tol_{key}", None)
        if value is not None:
            tol[key] = value
    return tol


def _signature(args, default: Signature | None = None) -> Signature:
    if args.signature is None:
        if default is None:
            raise ValueError("--signature is required")
        return default if args.field is None else default.with_field(args.field)
    p, q = parse_signature(args.signature)
    return Signature(p, q, args.field or (default.field if default else "R"))


def _params(args) -> dict[str, str]:
    out = {}
    for item in args.param or []:
        name, sep, src = item.partition("=")
        if not sep or not name.strip():
            raise ValueError(f"--param needs NAME=EXPR, got {item!r}")
        out[name.strip()] = src.strip()
    return out


def _options(args, **extra) -> dict[str, Any]:
    opts = {"seed": args.seed, "threads": args.threads, "format": args.format, "out": args.out}
    opts.update(extra)
    return opts


def _job(args, command: str, **extra) -> JobSpec:
    base_obj: dict[str, Any] = _json_arg(args.job) if args.job else {}
    spec = JobSpec.from_dict(base_obj, command) if base_obj else None
    sig = _signature(args, spec.signature if spec else None)
    grid = parse_grid(args.grid) if args.grid else (spec.grid if spec else None)
    frame = spec.frame if spec else None
    if args.matrix:
        frame = FrameSpec("matrix", matrix=_json_arg(args.matrix))
    elif args.generators:
        frame = FrameSpec("generators", generators=_json_arg(args.generators))
    elif args.frame_file:
        frame = FrameSpec("file", file=args.frame_file)
    params = dict(spec.parameters) if spec else {}
    params.update(_params(args))
    tol = dict(spec.tolerances) if spec else {}
    tol.update({k: v for k, v in _tolerances(args).items() if getattr(args, f"tol_{k}", None) is not None})
    options = dict(spec.options) if spec else {}
    options.update(_options(args, **extra))
    return JobSpec(command, sig, grid, frame, params, tol, options)


def _base(text: str | None):
    return None if text is None else tuple(int(v) for v in text.split(","))


def _rng(args) -> np.random.Generator:
    return np.random.default_rng(args.seed)


def _write(args, name: str, payload: Any) -> None:
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / name).write_text(dumps(payload))


def _save_field(args, field, stem: str) -> str | None:
    if not args.out:
        return None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    suffix = ".field.bin" if args.format == "bin" else ".field.json"
    return str(save_field(field, out / f"{stem}{suffix}"))


def _frame_checks(report: Report, h: FrameField, tol: float) -> None:
    rel = float(np.max(h.relation_residual()))
    report.data["results"]["frame_relation_residual"] = rel
    report.check("frame_relations", rel, tol * max(1.0, float(np.max(np.abs(h.data)))) ** 1)


# ---------------------------------------------------------------------------
# commands


def cmd_check(args) -> Report:
    if args.set:
        h = generator_set_from_json(_json_arg(args.set))
        report = Report("check", {"set": args.set, "tolerances": {"alg": args.tol_alg or DEFAULT_TOLERANCES["alg"]}})
        tol = args.tol_alg or DEFAULT_TOLERANCES["alg"]
        res = check_generators(h, tol)
        report.data["results"] = res.to_dict()
        report.check("relations", res.max_relation_residual, tol)
        if res.trace_condition_ok is not None:
            report.require("trace_condition", res.trace_condition_ok, res.pseudoscalar_trace)
        return report
    job = _job(args, "check")
    report = Report("check", job.to_dict())
    h = job.build_frame()
    tol = job.tolerances["alg"]
    rel = h.relation_residual()
    report.data["results"]["max_relation_residual"] = float(np.max(rel))
    report.check("relations", float(np.max(rel)), tol)
    if h.sig.n % 2:
        from .pauli import _pseudoscalar_array

        top = _pseudoscalar_array(h.data, h.sig)
        trace = float(np.max(np.abs(top[..., 0])))
        report.data["results"]["max_pseudoscalar_trace"] = trace
        report.check("trace_condition", trace, tol)
    return report


def cmd_intertwine(args) -> Report:
    h = generator_set_from_json(_json_arg(args.h))
    g = generator_set_from_json(_json_arg(args.g)) if args.g else GeneratorSet.standard(h.sig)
    tol = args.tol_alg or DEFAULT_TOLERANCES["alg"]
    report = Report("intertwine", {"h": args.h, "g": args.g, "tolerances": {"alg": tol}})
    res = intertwiner(h, g, tol) if args.g else intertwiner_to_standard(h, tol)
    report.data["results"] = res.to_dict()
    report.data["results"]["T_is_central"] = bool(ga.is_central(res.T))
    report.check("residual", res.residual, tol * max(1.0, float(np.max(np.abs(g.array)))))
    _write(args, "intertwiner.json", res.to_dict())
    return report


def _connection(h: FrameField, kind: str) -> ConnectionField:
    if kind == "grade1":
        return spin_connection_grade1(h)
    return spin_connection_general(h)


def cmd_connection(args) -> Report:
    job = _job(args, "connection", kind=args.kind)
    report = Report("connection", job.to_dict())
    h = job.build_frame()
    _frame_checks(report, h, job.tolerances["alg"])
    C = _connection(h, args.kind)
    res = report.data["results"]
    resid = field_equation_residual(h, C)
    res["field_equation_residual"] = float(np.max(resid[h.grid.interior_mask(2)], initial=0.0))
    res["center_part"] = C.center_part()
    report.check("field_equation", res["field_equation_residual"], job.tolerances["field"])
    if h.grid.r >= 2:
        R = curvature(C)
        res["max_curvature"] = R.max_norm(h.grid.interior_mask(4))
        res["max_curvature_all_nodes"] = R.max_norm()
        res["max_commutator"] = max_commutator(C)
        report.check("curvature", res["max_curvature"], job.tolerances["field"])
        res["curvature_file"] = _save_field(args, R, "curvature")
    res["connection_file"] = _save_field(args, C, "connection")
    return report


def cmd_transport(args) -> Report:
    C = load_field(args.connection)
    if not isinstance(C, ConnectionField):
        raise ValueError(f"{args.connection} holds a {C.kind} field, not a connection")
    tol = _tolerances(args)
    job = {
        "connection": args.connection,
        "method": args.method,
        "base": _base(args.base),
        "tolerances": tol,
        "options": {"seed": args.seed, "threads": args.threads, "format": args.format, "out": args.out},
    }
    report = Report("transport", job)
    method = args.method
    if method == "auto":
        method = tr._select_method(C, tol["closed"])
    res = report.data["results"]
    res["method"] = method
    base = _base(args.base)
    if method == "ode_r1":
        S = tr.solve_ode_line(C, None, base[0] if base else 0)
    elif method == "potential":
        rep = tr.potential_report(C, base, tol["closed"], _rng(args))
        S = tr.transport_potential(rep.potential)
        res["path_independence_residual"] = rep.path_independence_residual
        res["max_asymmetry"] = rep.max_asymmetry
    else:
        rep = tr.path_ordered_report(C, base, None, None, _rng(args))
        S = rep.S
        res["path_independence_residual"] = rep.path_independence_residual
        report.check("path_independence", rep.path_independence_residual, tol["path"])
    res["S_file"] = _save_field(args, S, "S")
    return report


def _solve(job: JobSpec, h: FrameField, args, report: Report) -> tr.TransportResult:
    tol = job.tolerances
    result = tr.solve_global(
        h,
        method=job.options.get("method", "auto"),
        base=job.options.get("base"),
        tol_final=None,
        tol_path=None,
        closed_rtol=tol["closed"],
        rng=np.random.default_rng(job.options.get("seed", 0)),
    )
    d = result.diagnostics
    report.check("final_residual", d["final_residual"], tol["final"])
    if result.method == "path_ordered":
        report.check("path_independence", d["path_independence_residual"], tol["path"])
    if h.sig.n % 2:
        report.check("odd_factor", d["odd_factor_residual"], tol["alg"] * 1e3)
    return result


def cmd_solve(args) -> Report:
    job = _job(args, "solve", method=args.method, base=_base(args.base))
    report = Report("solve", job.to_dict())
    h = job.build_frame()
    _frame_checks(report, h, job.tolerances["alg"])
    result = _solve(job, h, args, report)
    report.data["results"] = {
        **report.data["results"],
        **result.diagnostics_json(),
        "K": result.to_dict(include_fields=False)["K"],
    }
    if args.out:
        paths = result.save(args.out, args.format)
        report.data["results"]["files"] = {k: str(v) for k, v in paths.items()}
    return report


def _expected_connection(blades, params, h: FrameField) -> np.ndarray:
    per_axis = parameter_derivatives(params, h.grid)
    return np.stack([evaluate_blades(blades, env, h.sig, h.grid.shape) for env in per_axis], axis=-2)


def cmd_example(args) -> Report:
    fx = load_fixture(args.number)
    params = dict(fx["parameters"])
    params.update(_params(args))
    sig = Signature(**fx["signature"])
    grid = parse_grid(args.grid or fx["grid"])
    tol = _tolerances(args)
    options = _options(args, method=args.method, base=_base(args.base), example=args.number)
    job = JobSpec("example", sig, grid, None, params, tol, options)
    report = Report("example", {**job.to_dict(), "title": fx["title"], "frames": fx["frames"]})
    res = report.data["results"]
    interior = grid.interior_mask(2)
    for label, matrix in fx["frames"].items():
        frame_job = JobSpec("solve", sig, grid, FrameSpec("matrix", matrix=matrix), params, tol, options)
        h = frame_job.build_frame()
        entry: dict[str, Any] = {}
        C = spin_connection_general(h)
        expected = fx["expected"]
        exp_C = _expected_connection(expected["connection"], params, h)
        entry["connection_deviation"] = float(np.max(ga.norm_array(C.data - exp_C)[..., :].max(axis=-1)[interior]))
        report.check(f"{label}/connection", entry["connection_deviation"], tol["field"])
        for name, blades in fx.get("reference_variants", {}).items():
            alt = _expected_connection(blades, params, h)
            entry.setdefault("reference_variant_deviation", {})[name] = float(
                np.max(ga.norm_array(C.data - alt).max(axis=-1)[interior])
            )
        entry["max_commutator"] = max_commutator(C)
        entry["noncommuting"] = entry["max_commutator"] > COMMUTATOR_FLAG
        try:
            tr.find_potential(C, rtol=tol["closed"])
            entry["potential"] = "closed"
        except NotClosed as exc:
            entry["potential"] = {"error": exc.code, **exc.details}

        result = _solve(frame_job, h, args, _Scoped(report, label))
        entry.update(result.diagnostics_json())
        if "method" in expected and args.method == "auto":
            report.require(f"{label}/method", result.method == expected["method"], result.method)

        if "transport" in expected:
            env = parameter_derivatives(params, grid)[0]
            S_exp = evaluate_blades(expected["transport"], env, sig, grid.shape)
            base = result.S.data[(0,) * grid.r]  # identity by construction
            ref = ga.gp_array(S_exp, ga.inverse_array(S_exp[(0,) * grid.r], sig), sig)
            ref = ga.gp_array(ref, base, sig)
            entry["transport_deviation"] = float(np.max(ga.norm_array(result.S.data - ref)))
            report.check(f"{label}/transport", entry["transport_deviation"], tol["final"])
        res[label] = entry
        if args.out:
            result.save(Path(args.out) / label.replace("/", "_"), args.format)
    return report


class _Scoped:
    """Prefixes check names so several frames can share one report."""

    def __init__(self, report: Report, prefix: str) -> None:
        self.report = report
        self.prefix = prefix

    def check(self, name, value, tol, mode="<="):
        self.report.check(f"{self.prefix}/{name}", value, tol, mode)


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--signature", help="p,q")
    common.add_argument("--field", choices=["R", "C"])
    common.add_argument("--grid", help='"shape;origin;spacing", e.g. "65,65;0,0;2*pi/64,2*pi/64"')
    for key, value in DEFAULT_TOLERANCES.items():
        common.add_argument(f"--tol-{key}", type=float, default=None, help=f"default {value:g}")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--threads", type=int, default=None)
    common.add_argument("--out", help="directory for artifacts and report.json")
    common.add_argument("--format", choices=["json", "bin"], default="json")

    frame = argparse.ArgumentParser(add_help=False)
    frame.add_argument("--job", help="job JSON (file or inline)")
    frame.add_argument("--matrix", help="JSON rows of expressions y^a_b")
    frame.add_argument("--generators", help="JSON list of {blade: expression}")
    frame.add_argument("--frame-file", help="sampled frame field container")
    frame.add_argument("--param", action="append", help="NAME=EXPR (repeatable)")

    parser = argparse.ArgumentParser(prog="localpauli", description="Local and global Pauli intertwiners.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", parents=[common, frame], help="generator relations and trace condition")
    p.add_argument("--set", help="generator set JSON (file or inline)")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("intertwine", parents=[common], help="algebraic intertwiner between two sets")
    p.add_argument("--h", required=True, help="generator set JSON")
    p.add_argument("--g", help="generator set JSON (default: standard generators)")
    p.set_defaults(func=cmd_intertwine)

    p = sub.add_parser("connection", parents=[common, frame], help="spin connection and curvature")
    p.add_argument("--kind", choices=["general", "grade1"], default="general")
    p.set_defaults(func=cmd_connection)

    p = sub.add_parser("transport", parents=[common], help="integrate d_mu S = C_mu S")
    p.add_argument("--connection", required=True, help="connection field container")
    p.add_argument("--method", choices=["auto", *tr.METHODS], default="auto")
    p.add_argument("--base", help="base node i,j,...")
    p.set_defaults(func=cmd_transport)

    p = sub.add_parser("solve", parents=[common, frame], help="full global pipeline")
    p.add_argument("--method", choices=["auto", *tr.METHODS], default="auto")
    p.add_argument("--base", help="base node i,j,...")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("example", parents=[common], help="built-in example fixtures")
    p.add_argument("number", choices=["1", "2", "3", "4"])
    p.add_argument("--param", action="append", help="NAME=EXPR override")
    p.add_argument("--method", choices=["auto", *tr.METHODS], default="auto")
    p.add_argument("--base", help="base node i,j,...")
    p.set_defaults(func=cmd_example)
    return parser


def _error_payload(exc: BaseException) -> dict[str, Any]:
    if isinstance(exc, CliffordError):
        return exc.to_dict()
    return {"error": "invalid_input", "type": type(exc).__name__, "message": str(exc)}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.threads:
            from threadpoolctl import threadpool_limits

            with threadpool_limits(limits=args.threads):
                report = args.func(args)
        else:
            report = args.func(args)
    except (CliffordError, ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        print(json.dumps(_error_payload(exc)), file=sys.stderr)
        return EXIT_ERROR
    payload = report.finish()
    _write(args, "report.json", payload)
    print(dumps(payload))
    return EXIT_OK if report.ok else EXIT_TOLERANCE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
