"""JSON and binary containers for multivectors, generator sets and fields.

Multivector JSON::

    {"p": 2, "q": 0, "field": "R", "coeffs": {"": 1.0, "1": 0.5, "12": -0.25}}

Keys are concatenated ascending generator indices, ``""`` is the identity
blade, complex coefficients are ``[re, im]``.  Floats go through ``repr`` so
decoding gives back the same bits.

Field containers share one header ``{"kind", "signature", "grid",
"components"}``.  ``.field.json`` carries the payload as nested lists in
row-major node order; ``.field.bin`` is the magic ``LPFIELD1``, an 8-byte
little-endian header length, the header JSON, then raw little-endian float64
(complex interleaved).
"""

from __future__ import annotations

import json
import math
import struct
from pathlib import Path
from typing import Any

import numpy as np

from .algebra import Multivector, Signature, blade_name, parse_blade_name

BIN_MAGIC = b"LPFIELD1"


def _is_negzero(x: float) -> bool:
    return x == 0.0 and math.copysign(1.0, x) < 0


def _keep(c: complex) -> bool:
    if isinstance(c, complex):
        return c != 0 or _is_negzero(c.real) or _is_negzero(c.imag)
    return c != 0 or _is_negzero(c)


def signature_to_json(sig: Signature) -> dict[str, Any]:
    return {"p": sig.p, "q": sig.q, "field": sig.field}


def signature_from_json(obj: dict[str, Any]) -> Signature:
    return Signature(int(obj["p"]), int(obj.get("q", 0)), str(obj.get("field", "R")))


def coeffs_to_json(coeffs: np.ndarray, sig: Signature) -> dict[str, Any]:
    out: dict[str, Any] = {}
    for mask in range(sig.dim):
        c = coeffs[mask].item()
        if not _keep(c):
            continue
        out[blade_name(mask)] = [c.real, c.imag] if sig.is_complex else float(c)
    return out


def coeffs_from_json(obj: dict[str, Any], sig: Signature) -> np.ndarray:
    coeffs = np.zeros(sig.dim, dtype=sig.dtype)
    for key, value in obj.items():
        mask = parse_blade_name(key, sig.n)
        if isinstance(value, (list, tuple)):
            re, im = value
            if not sig.is_complex and im != 0:
                raise ValueError(f"complex coefficient for blade {key!r} in a real algebra")
            coeffs[mask] = complex(re, im) if sig.is_complex else re
        else:
            coeffs[mask] = value
    return coeffs


def multivector_to_json(mv: Multivector) -> dict[str, Any]:
    return {**signature_to_json(mv.sig), "coeffs": coeffs_to_json(mv.coeffs, mv.sig)}


def multivector_from_json(obj: dict[str, Any], sig: Signature | None = None) -> Multivector:
    if sig is None:
        sig = signature_from_json(obj)
    return Multivector(sig, coeffs_from_json(obj.get("coeffs", {}), sig))


def dumps(obj: Any, **kwargs: Any) -> str:
    kwargs.setdefault("indent", 2)
    return json.dumps(obj, allow_nan=True, **kwargs)


# ---------------------------------------------------------------------------
# fields


def grid_to_json(grid) -> dict[str, Any]:
    return {
        "r": grid.r,
        "shape": list(grid.shape),
        "origin": [float(x) for x in grid.origin],
        "spacing": [float(x) for x in grid.spacing],
    }


def grid_from_json(obj: dict[str, Any]):
    from .fields import Grid

    return Grid(tuple(obj["shape"]), tuple(obj["origin"]), tuple(obj["spacing"]))


def _field_header(field) -> dict[str, Any]:
    return {
        "kind": field.kind,
        "signature": signature_to_json(field.sig),
        "grid": grid_to_json(field.grid),
        "components": field.components,
    }


def _field_from_parts(header: dict[str, Any], data: np.ndarray):
    from .fields import FIELD_KINDS

    cls = FIELD_KINDS[header["kind"]]
    sig = signature_from_json(header["signature"])
    grid = grid_from_json(header["grid"])
    return cls(sig, grid, data)


def _payload_shape(header: dict[str, Any]) -> tuple[int, ...]:
    sig = signature_from_json(header["signature"])
    comps = header["components"]
    shape = tuple(header["grid"]["shape"])
    return shape + ((comps,) if comps is not None else ()) + (sig.dim,)


def field_to_json(field) -> dict[str, Any]:
    header = _field_header(field)
    flat = field.data.reshape((-1,) + field.data.shape[len(field.grid.shape):])
    if field.sig.is_complex:
        payload = np.stack([flat.real, flat.imag], axis=-1).tolist()
    else:
        payload = flat.tolist()
    return {**header, "data": payload}


def field_from_json(obj: dict[str, Any]):
    shape = _payload_shape(obj)
    sig = signature_from_json(obj["signature"])
    raw = np.asarray(obj["data"], dtype=np.float64)
    if sig.is_complex:
        raw = raw[..., 0] + 1j * raw[..., 1]
    return _field_from_parts(obj, raw.reshape(shape))


def field_to_bytes(field) -> bytes:
    header = json.dumps(_field_header(field)).encode("utf-8")
    data = np.ascontiguousarray(field.data)
    if field.sig.is_complex:
        body = np.ascontiguousarray(data.astype("<c16")).tobytes()
    else:
        body = np.ascontiguousarray(data.astype("<f8")).tobytes()
    return BIN_MAGIC + struct.pack("<Q", len(header)) + header + body


def field_from_bytes(blob: bytes):
    if blob[:8] != BIN_MAGIC:
        raise ValueError("not a field container (bad magic)")
    (hlen,) = struct.unpack("<Q", blob[8:16])
    header = json.loads(blob[16 : 16 + hlen].decode("utf-8"))
    sig = signature_from_json(header["signature"])
    dtype = "<c16" if sig.is_complex else "<f8"
    data = np.frombuffer(blob[16 + hlen :], dtype=dtype).astype(sig.dtype)
    return _field_from_parts(header, data.reshape(_payload_shape(header)))


def save_field(field, path: str | Path) -> Path:
    path = Path(path)
    if path.name.endswith(".bin"):
        path.write_bytes(field_to_bytes(field))
    else:
        path.write_text(json.dumps(field_to_json(field)))
    return path


def load_field(path: str | Path):
    path = Path(path)
    if path.name.endswith(".bin"):
        return field_from_bytes(path.read_bytes())
    return field_from_json(json.loads(path.read_text()))
