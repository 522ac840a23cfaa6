"""JSON model files.

Schema::

    {
      "subsystems": [
        {"A_TT": [[...]], "A_TS": [[...]], ..., "D_w": [[...]],
         "dims": {"m_S": 1, "m_w": 2}},            # optional
        ...
      ],
      "phi": {"rows": M_S, "cols": M_z, "entries": [[row, col, value], ...]}
    }

Matrices are row-major arrays of arrays.  Omitted matrices are zero; the
optional ``dims`` object fixes sizes that no given matrix determines (for
example ``m_d`` of a subsystem whose ``B_T`` is omitted).  ``phi`` indices
are 0-based.  Subsystems are numbered from 1 in file order.
"""
from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .core_model import MATRIX_NAMES, ConnectionMatrix, NetworkedSystem, Subsystem

DIM_KEYS = ("m_S", "m_z", "m_y", "m_d", "m_w")


class ModelFormatError(ValueError):
    """The model file does not follow the schema; the message names the field."""


def _matrix(value, where: str) -> np.ndarray:
    if not isinstance(value, list):
        raise ModelFormatError(f"{where}: expected an array of rows")
    if not value:
        return np.zeros((0, 0))
    width = None
    for r, row in enumerate(value):
        if not isinstance(row, list):
            raise ModelFormatError(f"{where}: row {r} is not an array")
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise ModelFormatError(f"{where}: ragged rows (row 0 has {width} entries, row {r} has {len(row)})")
        for c, x in enumerate(row):
            if isinstance(x, bool) or not isinstance(x, (int, float)):
                raise ModelFormatError(f"{where}[{r}][{c}]: not a number")
    return np.array(value, dtype=float).reshape(len(value), width)


def system_from_dict(doc: dict) -> NetworkedSystem:
    """Parse a decoded model document.

    Raises
    ------
    ModelFormatError
        On any schema violation, naming the offending field.
    """
    if not isinstance(doc, dict):
        raise ModelFormatError("top level: expected an object")
    subs_doc = doc.get("subsystems")
    if not isinstance(subs_doc, list) or not subs_doc:
        raise ModelFormatError("subsystems: expected a non-empty array")
    subs = []
    for k, sd in enumerate(subs_doc):
        where = f"subsystems[{k}]"
        if not isinstance(sd, dict):
            raise ModelFormatError(f"{where}: expected an object")
        unknown = set(sd) - set(MATRIX_NAMES) - {"dims", "name"}
        if unknown:
            raise ModelFormatError(f"{where}: unknown keys {sorted(unknown)}")
        if "A_TT" not in sd:
            raise ModelFormatError(f"{where}.A_TT: missing")
        mats = {name: _matrix(sd[name], f"{where}.{name}") for name in MATRIX_NAMES if name in sd}
        dims = sd.get("dims", {})
        if not isinstance(dims, dict) or set(dims) - set(DIM_KEYS):
            raise ModelFormatError(f"{where}.dims: expected an object with keys among {DIM_KEYS}")
        A_TT = mats.pop("A_TT")
        if A_TT.ndim != 2 or A_TT.shape[0] != A_TT.shape[1] or A_TT.shape[0] < 1:
            raise ModelFormatError(f"{where}.A_TT: must be square with at least one row, got {A_TT.shape}")
        # Empty matrices carry no shape; let make() size them from dims.
        mats = {n: m for n, m in mats.items() if m.size}
        try:
            s = Subsystem.make(k + 1, A_TT, **{d: int(v) for d, v in dims.items()}, **mats)
        except (ValueError, TypeError) as exc:
            raise ModelFormatError(f"{where}: {exc}") from None
        bad = s.shape_violations()
        if bad:
            raise ModelFormatError("; ".join(bad))
        subs.append(s)
    M_S = sum(s.m_S for s in subs)
    M_z = sum(s.m_z for s in subs)
    pd = doc.get("phi", {"rows": M_S, "cols": M_z, "entries": []})
    if not isinstance(pd, dict):
        raise ModelFormatError("phi: expected an object")
    rows, cols = pd.get("rows", M_S), pd.get("cols", M_z)
    if rows != M_S or cols != M_z:
        raise ModelFormatError(f"phi: declared {rows}x{cols}, subsystems need {M_S}x{M_z}")
    ents = pd.get("entries", [])
    if not isinstance(ents, list):
        raise ModelFormatError("phi.entries: expected an array")
    triples = []
    for k, e in enumerate(ents):
        if (not isinstance(e, list) or len(e) != 3 or not all(isinstance(x, (int, float)) for x in e)
                or isinstance(e[0], bool) or float(e[0]) != int(e[0]) or float(e[1]) != int(e[1])):
            raise ModelFormatError(f"phi.entries[{k}]: expected [row, col, value] with integer indices")
        triples.append((int(e[0]), int(e[1]), float(e[2])))
    return NetworkedSystem(tuple(subs), ConnectionMatrix(M_S, M_z, tuple(triples)))


def system_to_dict(sys: NetworkedSystem) -> dict:
    subs = []
    for s in sys.subsystems:
        d = {name: getattr(s, name).tolist() for name in MATRIX_NAMES}
        d["dims"] = {k: getattr(s, k) for k in DIM_KEYS}
        subs.append(d)
    phi = {"rows": sys.phi.rows, "cols": sys.phi.cols, "entries": [[r, c, v] for r, c, v in sys.phi.entries]}
    return {"subsystems": subs, "phi": phi}


def load_model(path: str | Path) -> tuple[NetworkedSystem, str]:
    """Read a model file and return it with the sha256 digest of its bytes."""
    raw = Path(path).read_bytes()
    digest = hashlib.sha256(raw).hexdigest()
    try:
        doc = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ModelFormatError(f"{path}: not valid JSON ({exc})") from None
    return system_from_dict(doc), digest


def save_model(sys: NetworkedSystem, path: str | Path) -> None:
    Path(path).write_text(json.dumps(system_to_dict(sys), indent=1) + "\n")
