"""Networked LTI system representation, well-posedness and lumped assembly.

Each subsystem ``i`` obeys::

    x(t+1,i) = A_TT x + A_TS v + B_T d
    z(t,i)   = A_ST x + A_SS v + B_S d
    y(t,i)   = C_T  x + C_S  v + D_d d + D_w w

and the subsystems are coupled by ``v = Phi z``.  Subsystem indices are
1-based everywhere in the public API; entries of ``Phi`` are 0-based
(row, col) pairs into the stacked ``v`` / ``z`` vectors.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse

from .config import DEFAULT_TOL, Tolerances
from .errors import NotWellPosedError, StructuralError
from .linalg import singular_values

MATRIX_NAMES = ("A_TT", "A_TS", "A_ST", "A_SS", "B_T", "B_S", "C_T", "C_S", "D_d", "D_w")

# Above this many total states Phi is handed out as a CSR matrix.
DENSE_PHI_LIMIT = 64


def _frozen(a, shape=None) -> np.ndarray:
    arr = np.array(a, dtype=float)
    if shape is not None:
        arr = arr.reshape(shape)
    if arr.ndim != 2:
        raise StructuralError(f"expected a 2-D matrix, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Subsystem:
    """The ten matrices of one subsystem.

    ``noise_dual`` only exists so that taking the dual twice restores
    ``D_w``; the dual of a noise feedthrough has no role of its own.
    """

    index: int
    A_TT: np.ndarray
    A_TS: np.ndarray
    A_ST: np.ndarray
    A_SS: np.ndarray
    B_T: np.ndarray
    B_S: np.ndarray
    C_T: np.ndarray
    C_S: np.ndarray
    D_d: np.ndarray
    D_w: np.ndarray
    noise_dual: np.ndarray | None = None

    def __post_init__(self):
        for name in MATRIX_NAMES:
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        if self.noise_dual is not None:
            object.__setattr__(self, "noise_dual", _frozen(self.noise_dual))

    @classmethod
    def make(cls, index: int, A_TT, *, m_S=None, m_z=None, m_y=None, m_d=None, m_w=None, **mats) -> "Subsystem":
        """Build a subsystem, filling omitted matrices with zeros.

        Dimensions are taken from the matrices that are given; the keyword
        dimensions are only needed when nothing else pins them down.
        """
        unknown = set(mats) - set(MATRIX_NAMES)
        if unknown:
            raise StructuralError(f"unknown matrix names {sorted(unknown)}")
        A_TT = np.atleast_2d(np.asarray(A_TT, dtype=float))
        m_T = A_TT.shape[0]
        arrs = {k: np.asarray(v, dtype=float) for k, v in mats.items() if v is not None}

        def dim(given, *probes):
            if given is not None:
                return int(given)
            for name, axis in probes:
                if name in arrs and arrs[name].ndim == 2:
                    return arrs[name].shape[axis]
            return 0

        m_S = dim(m_S, ("A_TS", 1), ("A_SS", 1), ("C_S", 1))
        m_z = dim(m_z, ("A_ST", 0), ("A_SS", 0), ("B_S", 0))
        m_y = dim(m_y, ("C_T", 0), ("C_S", 0), ("D_d", 0), ("D_w", 0))
        m_d = dim(m_d, ("B_T", 1), ("B_S", 1), ("D_d", 1))
        m_w = dim(m_w, ("D_w", 1))
        shapes = {
            "A_TS": (m_T, m_S), "A_ST": (m_z, m_T), "A_SS": (m_z, m_S),
            "B_T": (m_T, m_d), "B_S": (m_z, m_d), "C_T": (m_y, m_T),
            "C_S": (m_y, m_S), "D_d": (m_y, m_d), "D_w": (m_y, m_w),
        }
        full = {"A_TT": A_TT}
        for name, shape in shapes.items():
            if name in arrs:
                a = arrs[name]
                full[name] = a.reshape(shape) if a.size == 0 else np.atleast_2d(a)
            else:
                full[name] = np.zeros(shape)
        return cls(index=index, **full)

    @property
    def m_T(self) -> int:
        return self.A_TT.shape[0]

    @property
    def m_S(self) -> int:
        return self.A_TS.shape[1]

    @property
    def m_z(self) -> int:
        return self.A_ST.shape[0]

    @property
    def m_y(self) -> int:
        return self.C_T.shape[0]

    @property
    def m_d(self) -> int:
        return self.B_T.shape[1]

    @property
    def m_w(self) -> int:
        return self.D_w.shape[1]

    def matrices(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in MATRIX_NAMES}

    def equals(self, other: "Subsystem") -> bool:
        return self.index == other.index and all(
            a.shape == b.shape and np.array_equal(a, b)
            for a, b in zip(self.matrices().values(), other.matrices().values())
        )

    def shape_violations(self) -> list[str]:
        i = self.index
        out = []
        if self.A_TT.shape[0] < 1:
            out.append(f"subsystem {i}: m_T must be >= 1")
        if self.A_TT.shape[0] != self.A_TT.shape[1]:
            out.append(f"subsystem {i}: A_TT must be square, got {self.A_TT.shape}")
        m_T, m_S, m_z = self.A_TT.shape[0], self.A_TS.shape[1], self.A_ST.shape[0]
        m_y, m_d, m_w = self.C_T.shape[0], self.B_T.shape[1], self.D_w.shape[1]
        expected = {
            "A_TS": (m_T, m_S), "A_ST": (m_z, m_T), "A_SS": (m_z, m_S),
            "B_T": (m_T, m_d), "B_S": (m_z, m_d), "C_T": (m_y, m_T),
            "C_S": (m_y, m_S), "D_d": (m_y, m_d), "D_w": (m_y, m_w),
        }
        for name, shape in expected.items():
            got = getattr(self, name).shape
            if got != shape:
                out.append(f"subsystem {i}: {name} has shape {got}, expected {shape}")
        for name in MATRIX_NAMES:
            if not np.all(np.isfinite(getattr(self, name))):
                out.append(f"subsystem {i}: {name} has non-finite entries")
        return out


@dataclass(frozen=True)
class ConnectionMatrix:
    """Coordinate-list interconnection matrix ``Phi`` (``M_S x M_z``)."""

    rows: int
    cols: int
    entries: tuple[tuple[int, int, float], ...] = ()

    def __post_init__(self):
        object.__setattr__(
            self, "entries", tuple((int(r), int(c), float(v)) for r, c, v in self.entries)
        )

    @classmethod
    def from_dense(cls, M) -> "ConnectionMatrix":
        M = np.atleast_2d(np.asarray(M, dtype=float))
        r, c = np.nonzero(M)
        return cls(M.shape[0], M.shape[1], tuple(zip(r.tolist(), c.tolist(), M[r, c].tolist())))

    @classmethod
    def selection(cls, targets: Sequence[int], cols: int) -> "ConnectionMatrix":
        """Strict ``Phi`` whose row ``r`` picks internal output ``targets[r]``."""
        return cls(len(targets), cols, tuple((r, int(c), 1.0) for r, c in enumerate(targets)))

    def dense(self) -> np.ndarray:
        M = np.zeros((self.rows, self.cols))
        for r, c, v in self.entries:
            M[r, c] += v
        return M

    def sparse(self) -> scipy.sparse.csr_matrix:
        if not self.entries:
            return scipy.sparse.csr_matrix((self.rows, self.cols))
        r, c, v = zip(*self.entries)
        return scipy.sparse.csr_matrix((v, (r, c)), shape=(self.rows, self.cols))

    def transpose(self) -> "ConnectionMatrix":
        return ConnectionMatrix(self.cols, self.rows, tuple((c, r, v) for r, c, v in self.entries))

    @property
    def T(self) -> "ConnectionMatrix":
        return self.transpose()

    def violations(self, strict: bool) -> list[str]:
        out = []
        seen = set()
        per_row: dict[int, list[float]] = {}
        for r, c, v in self.entries:
            if not (0 <= r < self.rows and 0 <= c < self.cols):
                out.append(f"phi: entry ({r}, {c}) outside {self.rows}x{self.cols}")
                continue
            if (r, c) in seen:
                out.append(f"phi: duplicate entry ({r}, {c})")
            seen.add((r, c))
            if not np.isfinite(v):
                out.append(f"phi: non-finite entry at ({r}, {c})")
            if v != 0.0:
                per_row.setdefault(r, []).append(v)
        if strict:
            for r in range(self.rows):
                vals = per_row.get(r, [])
                if len(vals) != 1:
                    out.append(f"phi row {r}: {len(vals)} nonzero entries (strict mode needs exactly one)")
                elif vals[0] != 1.0:
                    out.append(f"phi row {r}: nonzero entry {vals[0]!r} is not 1 (strict mode)")
        return out


@dataclass(frozen=True, eq=False)
class NetworkedSystem:
    subsystems: tuple[Subsystem, ...]
    phi: ConnectionMatrix

    def __post_init__(self):
        object.__setattr__(self, "subsystems", tuple(self.subsystems))

    @property
    def N(self) -> int:
        return len(self.subsystems)

    def sub(self, i: int) -> Subsystem:
        """Subsystem by 1-based index."""
        return self.subsystems[i - 1]

    def _dims(self, attr: str) -> np.ndarray:
        return np.array([getattr(s, attr) for s in self.subsystems], dtype=int)

    def _offsets(self, attr: str) -> np.ndarray:
        d = self._dims(attr)
        return np.concatenate([[0], np.cumsum(d)]).astype(int)

    @cached_property
    def offsets(self) -> dict[str, np.ndarray]:
        """Prefix sums per partition; ``offsets['T'][i-1]`` is ``M_Ti``."""
        return {k: self._offsets("m_" + k) for k in ("T", "S", "z", "y", "d", "w")}

    @property
    def M_T(self) -> int:
        return int(self.offsets["T"][-1])

    @property
    def M_S(self) -> int:
        return int(self.offsets["S"][-1])

    @property
    def M_z(self) -> int:
        return int(self.offsets["z"][-1])

    @property
    def M_y(self) -> int:
        return int(self.offsets["y"][-1])

    @property
    def M_d(self) -> int:
        return int(self.offsets["d"][-1])

    @property
    def M_w(self) -> int:
        return int(self.offsets["w"][-1])

    def span(self, part: str, i: int) -> slice:
        """Index range of subsystem ``i`` (1-based) inside partition ``part``."""
        off = self.offsets[part]
        return slice(int(off[i - 1]), int(off[i]))

    @cached_property
    def blocks(self) -> dict[str, np.ndarray]:
        """Block-diagonal stackings ``A_TT``, ``A_TS``, ... of all subsystems."""
        out = {}
        for name in MATRIX_NAMES:
            out[name] = block_diag([getattr(s, name) for s in self.subsystems])
        return out

    @cached_property
    def phi_dense(self) -> np.ndarray:
        return self.phi.dense()

    @property
    def phi_op(self):
        """``Phi`` as a dense array for small systems, CSR otherwise."""
        if self.M_T <= DENSE_PHI_LIMIT:
            return self.phi_dense
        return self.phi.sparse()


def block_diag(mats: Sequence[np.ndarray]) -> np.ndarray:
    """Block-diagonal stack that keeps zero-sized blocks' shapes."""
    rows = sum(m.shape[0] for m in mats)
    cols = sum(m.shape[1] for m in mats)
    out = np.zeros((rows, cols), dtype=np.result_type(*mats) if mats else float)
    r = c = 0
    for m in mats:
        out[r:r + m.shape[0], c:c + m.shape[1]] = m
        r += m.shape[0]
        c += m.shape[1]
    return out


@dataclass(frozen=True)
class LumpedModel:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray

    @property
    def n(self) -> int:
        return self.A.shape[0]


@dataclass(frozen=True)
class WellPosedness:
    well_posed: bool
    condition_estimate: float


def validate_system(sys: NetworkedSystem, strict_phi: bool = True) -> list[str]:
    """Return a list of human-readable violations (empty when valid)."""
    out: list[str] = []
    for k, s in enumerate(sys.subsystems, start=1):
        if s.index != k:
            out.append(f"subsystem at position {k} carries index {s.index}")
        out.extend(s.shape_violations())
    if out:
        return out
    if sys.phi.rows != sys.M_S:
        out.append(f"phi has {sys.phi.rows} rows, expected M_S = {sys.M_S}")
    if sys.phi.cols != sys.M_z:
        out.append(f"phi has {sys.phi.cols} columns, expected M_z = {sys.M_z}")
    out.extend(sys.phi.violations(strict_phi))
    return out


def require_valid(sys: NetworkedSystem, strict_phi: bool = False) -> None:
    problems = validate_system(sys, strict_phi=strict_phi)
    if problems:
        raise StructuralError("; ".join(problems))


def loop_matrix(sys: NetworkedSystem) -> np.ndarray:
    """``I - A_SS Phi`` (``M_z x M_z``)."""
    return np.eye(sys.M_z) - sys.blocks["A_SS"] @ sys.phi_dense


def check_well_posedness(sys: NetworkedSystem, tol: Tolerances = DEFAULT_TOL) -> WellPosedness:
    require_valid(sys)
    L = loop_matrix(sys)
    s = singular_values(L)
    if s.size == 0:
        return WellPosedness(True, 1.0)
    if s[-1] <= tol.rel_tol * s[0] or s[0] == 0.0:
        cond = float("inf") if s[-1] == 0.0 else float(s[0] / s[-1])
        return WellPosedness(False, cond)
    return WellPosedness(True, float(s[0] / s[-1]))


def interconnection_gain(sys: NetworkedSystem, tol: Tolerances = DEFAULT_TOL) -> np.ndarray:
    """``Phi (I - A_SS Phi)^{-1}`` (``M_S x M_z``); raises when not well-posed."""
    wp = check_well_posedness(sys, tol)
    if not wp.well_posed:
        raise NotWellPosedError(
            f"I - A_SS Phi is singular (condition estimate {wp.condition_estimate:.3e})"
        )
    L = loop_matrix(sys)
    if L.size == 0:
        return np.zeros((sys.M_S, 0))
    # Phi L^{-1} = (L^{-T} Phi^T)^T
    return np.linalg.solve(L.T, sys.phi_dense.T).T


def assemble_lumped(sys: NetworkedSystem, tol: Tolerances = DEFAULT_TOL) -> LumpedModel:
    b = sys.blocks
    G = interconnection_gain(sys, tol)
    A = b["A_TT"] + b["A_TS"] @ G @ b["A_ST"]
    B = b["B_T"] + b["A_TS"] @ G @ b["B_S"]
    C = b["C_T"] + b["C_S"] @ G @ b["A_ST"]
    D = np.hstack([b["D_d"] + b["C_S"] @ G @ b["B_S"], b["D_w"]])
    return LumpedModel(A=A, B=B, C=C, D=D)


def dual_subsystem(s: Subsystem) -> Subsystem:
    noise = s.noise_dual if s.noise_dual is not None else np.zeros((s.m_d, 0))
    return Subsystem(
        index=s.index,
        A_TT=s.A_TT.T, A_TS=s.A_ST.T, A_ST=s.A_TS.T, A_SS=s.A_SS.T,
        B_T=s.C_T.T, B_S=s.C_S.T, C_T=s.B_T.T, C_S=s.B_S.T, D_d=s.D_d.T,
        D_w=noise, noise_dual=s.D_w,
    )


def dual_system(sys: NetworkedSystem) -> NetworkedSystem:
    """Networked system whose lumped pair is ``(A^T, C^T)`` / ``(A^T, B^T)``."""
    require_valid(sys)
    return NetworkedSystem(tuple(dual_subsystem(s) for s in sys.subsystems), sys.phi.T)


def systems_equal(a: NetworkedSystem, b: NetworkedSystem) -> bool:
    return (
        a.N == b.N
        and all(x.equals(y) for x, y in zip(a.subsystems, b.subsystems))
        and np.array_equal(a.phi.dense(), b.phi.dense())
    )


def build_system(subsystems: Iterable[Subsystem], phi) -> NetworkedSystem:
    """Convenience constructor accepting a dense array or a ConnectionMatrix."""
    subs = tuple(subsystems)
    if not isinstance(phi, ConnectionMatrix):
        phi = np.asarray(phi, dtype=float)
        if phi.size == 0:
            M_S = sum(s.m_S for s in subs)
            M_z = sum(s.m_z for s in subs)
            phi = ConnectionMatrix(M_S, M_z, ())
        else:
            phi = ConnectionMatrix.from_dense(phi)
    return NetworkedSystem(subs, phi)
