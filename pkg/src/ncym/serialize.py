"""JSON snapshots of manifolds and fields, plus canonical report emission.

Layout
------
Arrays serialize row-major (C order) under their shape: real arrays as flat
float lists, complex arrays as flat lists of ``[re, im]`` pairs.  A manifold
serializes to its chart metadata (name, shape, spacing, periodicity,
orientation) plus the constructor kind and parameters, which is enough to
rebuild the shipped manifolds exactly.  Reports are emitted through
:func:`dumps_canonical`, which fixes key order and separators so identical
results produce bytewise-identical files.
"""

import csv
import json
from pathlib import Path

import numpy as np

from .connections import NCConnection, OrdinaryConnection
from .errors import ShapeError

__all__ = [
    "array_to_json",
    "json_to_array",
    "manifold_meta",
    "connection_snapshot",
    "state_snapshot",
    "dumps_canonical",
    "save_report",
    "save_trace_csv",
]


def array_to_json(arr: np.ndarray) -> dict:
    """Row-major encoding: real values flat, complex values as [re, im]."""
    arr = np.asarray(arr)
    if np.iscomplexobj(arr):
        flat = arr.ravel(order="C")
        values = [[float(v.real), float(v.imag)] for v in flat]
        kind = "complex"
    else:
        values = [float(v) for v in arr.ravel(order="C")]
        kind = "real"
    return {"shape": list(arr.shape), "kind": kind, "values": values}


def json_to_array(obj: dict) -> np.ndarray:
    shape = tuple(obj["shape"])
    if obj["kind"] == "complex":
        vals = np.array(
            [complex(re, im) for re, im in obj["values"]], dtype=complex
        )
    elif obj["kind"] == "real":
        vals = np.array(obj["values"], dtype=float)
    else:
        raise ShapeError(f"unknown array kind {obj['kind']!r}")
    if vals.size != int(np.prod(shape)):
        raise ShapeError("array payload does not match its declared shape")
    return vals.reshape(shape, order="C")


def manifold_meta(man) -> dict:
    return {
        "kind": man.kind,
        "dim": man.dim,
        "params": {k: _plain(v) for k, v in man.params.items()},
        "charts": [
            {
                "name": ch.name,
                "shape": list(ch.shape),
                "spacing": [float(h) for h in ch.spacing],
                "periodic": [bool(p) for p in ch.periodic],
                "orientation": int(ch.orientation),
            }
            for ch in man.charts
        ],
    }


def _plain(v):
    if isinstance(v, (np.floating, float)):
        return float(v)
    if isinstance(v, (np.integer, int)):
        return int(v)
    return v


def connection_snapshot(conn: OrdinaryConnection) -> dict:
    """Serializable form of an ordinary reference connection."""
    return {
        "manifold": manifold_meta(conn.man),
        "algebra_dim": conn.basis.dim,
        "fiber_dim": conn.rep.k,
        "potential": {name: array_to_json(A) for name, A in conn.A.items()},
    }


def state_snapshot(ncc: NCConnection) -> dict:
    """Serializable form of a field pair (a, phi) over its reference."""
    return {
        "reference": connection_snapshot(ncc.ref),
        "a": {name: array_to_json(v) for name, v in ncc.a.items()},
        "phi": {name: array_to_json(v) for name, v in ncc.phi.items()},
    }


def dumps_canonical(obj) -> str:
    """Deterministic JSON text: sorted keys, fixed separators, newline end."""
    return json.dumps(obj, sort_keys=True, indent=2, separators=(",", ": ")) + "\n"


def save_report(path, obj) -> None:
    Path(path).write_text(dumps_canonical(obj))


def save_trace_csv(path, trace) -> None:
    """Solver trace as columns (iteration, action, grad_norm)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "action", "grad_norm"])
        for i, (s, gn) in enumerate(trace):
            writer.writerow([i, repr(float(s)), repr(float(gn))])
