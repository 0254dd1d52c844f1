"""Bit-exact snapshot format for fields and canonical JSON helpers.

A snapshot is a single JSON document: a plain header (problem name and
parameters, grid spec, residual, guess label) plus the node values as
base64-encoded little-endian float64 bytes in the canonical DOF order
(component-major, then radial-major, then angular).  Byte storage makes the
round trip bit-exact; the header is for humans and provenance.

All JSON written by this package goes through canonical_json so that runs
with the same seed produce byte-identical report files.
"""

from __future__ import annotations

import base64
import hashlib
import json

import numpy as np

from .fields import VectorField
from .grid import Grid
from .problems import make_problem
from .solver import Solution

SNAPSHOT_FORMAT = "coopsym-field-v1"


def canonical_json(obj) -> str:
    """Deterministic JSON text: sorted keys, no float mangling, newline at end."""
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n"


def config_hash(obj) -> str:
    return hashlib.sha256(canonical_json(obj).encode()).hexdigest()[:16]


def _encode_values(values: np.ndarray) -> str:
    buf = np.ascontiguousarray(values, dtype="<f8").tobytes()
    return base64.b64encode(buf).decode("ascii")


def _decode_values(data: str, shape: tuple) -> np.ndarray:
    raw = base64.b64decode(data.encode("ascii"))
    return np.frombuffer(raw, dtype="<f8").reshape(shape).copy()


def field_to_dict(field: VectorField, header: dict | None = None) -> dict:
    doc = {
        "format": SNAPSHOT_FORMAT,
        "grid": field.grid.to_json_dict(),
        "m": field.m,
        "dtype": "<f8",
        "data_b64": _encode_values(field.values),
    }
    if header:
        doc.update(header)
    return doc


def field_from_dict(doc: dict) -> VectorField:
    if doc.get("format") != SNAPSHOT_FORMAT:
        raise ValueError(f"not a field snapshot: format={doc.get('format')!r}")
    grid = Grid.from_json_dict(doc["grid"])
    m = int(doc["m"])
    values = _decode_values(doc["data_b64"], (m, grid.nr, grid.ntheta))
    return VectorField(grid, values)


def solution_to_dict(solution: Solution) -> dict:
    return field_to_dict(solution.field, {
        "problem": solution.problem.to_json_dict(),
        "residual_inf": solution.residual_inf,
        "newton_iters": solution.newton_iters,
        "guess_label": solution.guess_label,
        "diverged_to_zero": solution.diverged_to_zero,
    })


def solution_from_dict(doc: dict) -> Solution:
    field = field_from_dict(doc)
    prob_spec = doc["problem"]
    problem = make_problem(prob_spec["name"], **prob_spec["params"])
    return Solution(field, problem,
                    residual_inf=float(doc["residual_inf"]),
                    newton_iters=int(doc["newton_iters"]),
                    guess_label=str(doc.get("guess_label", "")),
                    diverged_to_zero=bool(doc.get("diverged_to_zero", False)))


def write_json(path, obj):
    with open(path, "w") as fh:
        fh.write(canonical_json(obj))


def read_json(path) -> dict:
    with open(path) as fh:
        return json.load(fh)
