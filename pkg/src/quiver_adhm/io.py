"""JSON serialization of diagrams, parameters, ADHM data and forms.

Floats are written by ``json`` with ``repr`` precision, so every double
round-trips bit for bit; complex entries are ``[re, im]`` pairs.
"""
from __future__ import annotations

import json
import math
from typing import Any

import numpy as np

from .adhm import ADHMData, block_shapes
from .diagram import build_affine_diagram
from .weyl import Parameter


class SchemaError(ValueError):
    """Input file does not match the expected layout; ``paths`` lists the offending fields."""

    def __init__(self, paths: list[str]):
        super().__init__("invalid input at " + ", ".join(paths))
        self.paths = paths


def _cmat(m: np.ndarray) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


def dumps(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, indent=1, allow_nan=False) + "\n"


def adhm_to_json(data: ADHMData) -> dict:
    d = data.diagram
    return {
        "diagram": {"kind": d.kind.value, "rank": d.rank},
        "v": list(data.v),
        "w": list(data.w),
        "arrows": [[d.vout(h), d.vin(h)] for h in range(d.n_arrows)],
        "B": {str(h): _cmat(m) for h, m in enumerate(data.B)},
        "a": {str(i): _cmat(m) for i, m in enumerate(data.a)},
        "b": {str(i): _cmat(m) for i, m in enumerate(data.b)},
    }


def _read_cmat(obj, shape, path, errors) -> np.ndarray:
    out = np.zeros(shape, dtype=complex)
    if not isinstance(obj, list) or len(obj) != shape[0]:
        errors.append(f"{path}: expected {shape[0]} rows")
        return out
    for r, row in enumerate(obj):
        if not isinstance(row, list) or len(row) != shape[1]:
            errors.append(f"{path}[{r}]: expected {shape[1]} entries")
            continue
        for c, z in enumerate(row):
            ok = (isinstance(z, list) and len(z) == 2
                  and all(isinstance(t, (int, float)) and not isinstance(t, bool) and math.isfinite(t) for t in z))
            if not ok:
                errors.append(f"{path}[{r}][{c}]: expected finite [re, im]")
                continue
            out[r, c] = complex(float(z[0]), float(z[1]))
    return out


def _int_list(obj, n, path, errors) -> tuple[int, ...]:
    if (not isinstance(obj, list) or len(obj) != n
            or not all(isinstance(x, int) and not isinstance(x, bool) and x >= 0 for x in obj)):
        errors.append(f"{path}: expected {n} nonnegative integers")
        return (0,) * n
    return tuple(obj)


def adhm_from_json(obj: dict) -> ADHMData:
    errors: list[str] = []
    if not isinstance(obj, dict):
        raise SchemaError(["<root>: expected an object"])
    for key in ("diagram", "v", "w", "B", "a", "b"):
        if key not in obj:
            errors.append(f"{key}: missing")
    if errors:
        raise SchemaError(errors)
    dg = obj["diagram"]
    if not isinstance(dg, dict) or "kind" not in dg or "rank" not in dg:
        raise SchemaError(["diagram: expected {kind, rank}"])
    diagram = build_affine_diagram(dg["kind"], dg["rank"])
    n = diagram.n_vertices
    v = _int_list(obj["v"], n, "v", errors)
    w = _int_list(obj["w"], n, "w", errors)
    if errors:
        raise SchemaError(errors)
    if "arrows" in obj and obj["arrows"] != [[diagram.vout(h), diagram.vin(h)] for h in range(diagram.n_arrows)]:
        errors.append("arrows: enumeration does not match the diagram")
    shapes = block_shapes(diagram, v, w)
    m = diagram.n_arrows
    groups = [("B", range(m), shapes[:m]), ("a", range(n), shapes[m : m + n]), ("b", range(n), shapes[m + n :])]
    blocks = {}
    for name, keys, shp in groups:
        table = obj[name]
        if not isinstance(table, dict):
            errors.append(f"{name}: expected an object keyed by index")
            continue
        extra = set(table) - {str(k) for k in keys}
        for k in sorted(extra):
            errors.append(f"{name}.{k}: unexpected key")
        mats = []
        for k, s in zip(keys, shp):
            if str(k) not in table:
                errors.append(f"{name}.{k}: missing")
                mats.append(np.zeros(s, dtype=complex))
            else:
                mats.append(_read_cmat(table[str(k)], s, f"{name}.{k}", errors))
        blocks[name] = tuple(mats)
    if errors:
        raise SchemaError(errors)
    return ADHMData(diagram, v, w, blocks["B"], blocks["a"], blocks["b"])


def param_to_json(zeta: Parameter) -> dict:
    return {"zeta_re": [float(x) for x in zeta.re], "zeta_c": [[float(z.real), float(z.imag)] for z in zeta.c]}


def param_from_json(obj: dict, n: int | None = None) -> Parameter:
    errors = []
    if not isinstance(obj, dict):
        raise SchemaError(["<root>: expected an object"])
    re = obj.get("zeta_re")
    c = obj.get("zeta_c")
    if not isinstance(re, list) or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in re):
        errors.append("zeta_re: expected a list of numbers")
    if not isinstance(c, list) or not all(
        isinstance(z, list) and len(z) == 2 and all(isinstance(t, (int, float)) and not isinstance(t, bool) for t in z)
        for z in c
    ):
        errors.append("zeta_c: expected a list of [re, im] pairs")
    if errors:
        raise SchemaError(errors)
    if len(re) != len(c):
        raise SchemaError(["zeta_c: length differs from zeta_re"])
    if n is not None and len(re) != n:
        raise SchemaError([f"zeta_re: expected {n} entries, got {len(re)}"])
    vals = [float(x) for x in re] + [float(t) for z in c for t in z]
    if not all(math.isfinite(x) for x in vals):
        raise SchemaError(["zeta: entries must be finite"])
    return Parameter(np.array(re, dtype=float), np.array([complex(float(a), float(b)) for a, b in c], dtype=complex))


def read_json(path: str) -> Any:
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise SchemaError([f"{path}: not valid JSON ({exc.msg} at line {exc.lineno})"]) from None


def write_text(path: str, text: str) -> None:
    with open(path, "w") as fh:
        fh.write(text)
