"""Subsystem transfer functions, their transmission zeros and zero certificates.

For subsystem ``i`` the two transfer functions used by the structured
observability test are::

    G1_i(lam) = C_S + C_T (lam I - A_TT)^{-1} A_TS      (internal input -> y)
    G2_i(lam) = A_SS + A_ST (lam I - A_TT)^{-1} A_TS    (internal input -> z)

and their controllability counterparts are built from the transposed
matrices.  Zeros are found from the Rosenbrock pencil
``[lam I - A, -B; C, D]`` so that they stay well defined where ``lam`` is an
eigenvalue of ``A``.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
import scipy.linalg

from .config import DEFAULT_TOL, Tolerances
from .core_model import NetworkedSystem, Subsystem
from .errors import ResolventSingularError, StructuralError, ZeroConsistencyError
from .linalg import null_space, numerical_rank, singular_values

FAMILIES = ("G1", "G2", "G1_dual", "G2_dual")

# Fixed seeds keep zero computation a pure function of its input.
_COMPRESSION_SEED = 0x5EED
_PROBE_SEED = 0xC0FFEE


@dataclass(frozen=True, eq=False)
class SubsystemTfm:
    """``D + C (lam I - A)^{-1} B`` for one subsystem."""

    which: str
    index: int
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.D.shape


def subsystem_tfm(sub: Subsystem, which: str) -> SubsystemTfm:
    if which == "G1":
        parts = (sub.A_TT, sub.A_TS, sub.C_T, sub.C_S)
    elif which == "G2":
        parts = (sub.A_TT, sub.A_TS, sub.A_ST, sub.A_SS)
    elif which == "G1_dual":
        parts = (sub.A_TT.T, sub.A_ST.T, sub.B_T.T, sub.B_S.T)
    elif which == "G2_dual":
        parts = (sub.A_TT.T, sub.A_ST.T, sub.A_TS.T, sub.A_SS.T)
    else:
        raise ValueError(f"unknown transfer function family {which!r}; expected one of {FAMILIES}")
    return SubsystemTfm(which, sub.index, *parts)


def rosenbrock(tfm: SubsystemTfm, lam: complex) -> np.ndarray:
    """System matrix ``[lam I - A, -B; C, D]``."""
    n = tfm.A.shape[0]
    top = np.hstack([lam * np.eye(n) - tfm.A, -tfm.B])
    bottom = np.hstack([tfm.C, tfm.D]).astype(complex)
    return np.vstack([top, bottom])


def _near_eigenvalue(A: np.ndarray, lam: complex, guard: float) -> bool:
    if A.shape[0] == 0:
        return False
    ev = np.linalg.eigvals(A)
    return bool(np.min(np.abs(ev - lam)) <= guard * max(1.0, abs(lam)))


def eval_tfm(tfm: SubsystemTfm, lam: complex, tol: Tolerances = DEFAULT_TOL) -> np.ndarray:
    """Evaluate the transfer function at ``lam``.

    Raises
    ------
    ResolventSingularError
        If ``lam`` lies within ``eig_guard_tol`` of an eigenvalue of the
        A-part.  Use :func:`eval_tfm_generalized` there.
    """
    if _near_eigenvalue(tfm.A, lam, tol.eig_guard_tol):
        raise ResolventSingularError(f"resolvent singular at lambda = {lam}")
    n = tfm.A.shape[0]
    X = np.linalg.solve(lam * np.eye(n) - tfm.A, tfm.B.astype(complex))
    return tfm.D + tfm.C @ X


def eval_tfm_generalized(tfm: SubsystemTfm, lam: complex, tol: Tolerances = DEFAULT_TOL) -> tuple[np.ndarray, float]:
    """Evaluate with a minimum-norm least-squares resolvent.

    Valid when ``A_TS``-type columns lie in the range of ``lam I - A``; the
    residual ``||(lam I - A) X - B||`` is returned so callers can judge that.

    Raises
    ------
    ResolventSingularError
        If the residual exceeds ``footnote_tol * max(1, ||B||)``.
    """
    n = tfm.A.shape[0]
    L = lam * np.eye(n) - tfm.A
    B = tfm.B.astype(complex)
    X = scipy.linalg.pinv(L, rtol=max(tol.eig_guard_tol, 1e-12)) @ B
    resid = float(np.linalg.norm(L @ X - B)) if B.size else 0.0
    if resid > tol.footnote_tol * max(1.0, float(np.linalg.norm(B)) if B.size else 1.0):
        raise ResolventSingularError(
            f"resolvent singular at lambda = {lam} and B is not in its range (residual {resid:.3e})"
        )
    return tfm.D + tfm.C @ X, resid


def _eval_any(tfm: SubsystemTfm, lam: complex, tol: Tolerances) -> np.ndarray:
    try:
        return eval_tfm(tfm, lam, tol)
    except ResolventSingularError:
        return eval_tfm_generalized(tfm, lam, tol)[0]


@dataclass(frozen=True)
class ZeroSet:
    zeros: tuple[complex, ...]
    normal_rank: int
    full_column_normal_rank: bool

    def distinct(self) -> list[complex]:
        seen: list[complex] = []
        for z in self.zeros:
            if not seen or z != seen[-1]:
                seen.append(z)
        return seen


def _close(a: complex, b: complex, tol: float) -> bool:
    return abs(a - b) <= tol * max(1.0, abs(a), abs(b))


def _clusters(values: Sequence[complex], tol: float) -> list[list[int]]:
    """Single-linkage grouping of ``values`` (indices), deterministic order."""
    n = len(values)
    parent = list(range(n))

    def find(k):
        while parent[k] != k:
            parent[k] = parent[parent[k]]
            k = parent[k]
        return k

    for a in range(n):
        for b in range(a + 1, n):
            if _close(values[a], values[b], tol):
                ra, rb = find(a), find(b)
                if ra != rb:
                    parent[max(ra, rb)] = min(ra, rb)
    groups: dict[int, list[int]] = {}
    for k in range(n):
        groups.setdefault(find(k), []).append(k)
    return list(groups.values())


def _snap(lam: complex, tol: float) -> complex:
    if abs(lam.imag) <= tol * max(1.0, abs(lam)):
        return complex(lam.real, 0.0)
    return complex(lam)


def _sort_key(lam: complex):
    return (round(abs(lam), 12), round(lam.real, 12), lam.imag)


def normal_rank(tfm: SubsystemTfm, tol: Tolerances = DEFAULT_TOL) -> int:
    """Normal rank from the pencil rank at three random points of ``|lam| = 2``."""
    rng = np.random.default_rng(_PROBE_SEED)
    n = tfm.A.shape[0]
    probes = 2.0 * np.exp(2j * np.pi * rng.random(3))
    return max(numerical_rank(rosenbrock(tfm, lam), tol.rel_tol) for lam in probes) - n


def transmission_zeros(tfm: SubsystemTfm, tol: Tolerances = DEFAULT_TOL) -> ZeroSet:
    """Finite transmission zeros of a transfer function, with multiplicity.

    Candidates are finite generalized eigenvalues of the (row-compressed)
    Rosenbrock pencil; each candidate cluster is kept only if the true,
    uncompressed pencil loses column rank at the cluster mean.  Zeros are
    reported only when the transfer function has full column normal rank.
    """
    n = tfm.A.shape[0]
    p, m = tfm.D.shape
    nrank = normal_rank(tfm, tol)
    full = nrank == m
    if not full:
        return ZeroSet((), nrank, False)
    if p > m:
        # Tall pencil: squeeze the output rows with a random map.  True zeros
        # survive; spurious ones are removed by the rank check below.
        R = np.random.default_rng(_COMPRESSION_SEED).standard_normal((m, p))
        Cc, Dc = R @ tfm.C, R @ tfm.D
    else:
        Cc, Dc = tfm.C, tfm.D
    M = np.block([[tfm.A, tfm.B], [-Cc, -Dc]])
    E = np.zeros((n + m, n + m))
    E[:n, :n] = np.eye(n)
    ab = scipy.linalg.eig(M, E, right=False, homogeneous_eigvals=True)
    alpha, beta = ab[0], ab[1]
    finite = np.abs(beta) > 1e-12 * np.maximum(np.abs(alpha), np.abs(beta))
    cands = [complex(a / b) for a, b in zip(alpha[finite], beta[finite])]
    cands = [c for c in cands if np.isfinite(c) and abs(c) < 1e10]

    accepted: list[tuple[complex, int]] = []
    for group in _clusters(cands, tol.zero_cluster_tol):
        lam = _snap(complex(np.mean([cands[k] for k in group])), tol.zero_cluster_tol)
        s = singular_values(rosenbrock(tfm, lam))
        if s.size < n + m or s[-1] <= tol.zero_cluster_tol * max(1.0, s[0]):
            accepted.append((lam, len(group)))
    accepted.sort(key=lambda t: _sort_key(t[0]))
    zeros = tuple(lam for lam, mult in accepted for _ in range(mult))
    return ZeroSet(zeros, nrank, True)


def null_basis(tfm: SubsystemTfm, lambda0: complex, tol: Tolerances = DEFAULT_TOL) -> np.ndarray:
    """Orthonormal basis of the null space of ``G(lambda0)``.

    Falls back to the least-squares resolvent when ``lambda0`` is an
    eigenvalue of the A-part.

    Raises
    ------
    ZeroConsistencyError
        If ``G(lambda0)`` has no numerical null space.
    """
    G = _eval_any(tfm, lambda0, tol)
    Y = null_space(G, tol.zero_residual_tol, scale=1.0)
    if Y.shape[1] == 0:
        raise ZeroConsistencyError(
            f"G{tfm.which[1:]} of subsystem {tfm.index} has trivial null space at {lambda0}"
        )
    return Y


def pencil_kernel(tfm: SubsystemTfm, lambda0: complex, tol: Tolerances = DEFAULT_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Kernel of the Rosenbrock pencil at a zero, split as (state part, input part).

    The stacked columns are orthonormal.  When ``lambda0`` is not an
    eigenvalue of the A-part the input part spans the null space of
    ``G(lambda0)`` and the state part equals ``(lambda0 I - A)^{-1} B``
    applied to it.  At least one direction is returned because the caller
    has already established that ``lambda0`` is a zero.
    """
    n = tfm.A.shape[0]
    K = null_space(rosenbrock(tfm, lambda0), tol.zero_residual_tol, min_dim=1, scale=1.0)
    X, U = K[:n], K[n:]
    if U.shape[0] >= U.shape[1]:
        su = singular_values(U)
        if su.size and su[-1] > 1e-6:
            # Re-base so the input part is orthonormal; same column span.
            W, s, Vh = np.linalg.svd(U, full_matrices=False)
            T = Vh.conj().T / s
            X, U = X @ T, W
    return X, U


@dataclass(frozen=True, eq=False)
class ZeroCertificate:
    """One distinct zero shared by the G1-type transfer functions of ``participants``.

    ``Y_blocks[s]`` spans the zero directions of participant ``s`` (its
    internal-input part), ``Z_blocks[s]`` their images through the matching
    G2-type map and ``X_blocks[s]`` the accompanying state directions.  The
    aggregates ``Y`` (internal-input rows), ``Z`` (internal-output rows) and
    ``X`` (state rows) are filled in by :func:`build_aggregates`.
    """

    lambda0: complex
    participants: tuple[int, ...]
    Y_blocks: tuple[np.ndarray, ...] = ()
    Z_blocks: tuple[np.ndarray, ...] = ()
    X_blocks: tuple[np.ndarray, ...] = ()
    Y: np.ndarray | None = None
    Z: np.ndarray | None = None
    X: np.ndarray | None = None
    dual: bool = False

    @property
    def p(self) -> tuple[int, ...]:
        return tuple(b.shape[1] for b in self.Y_blocks)

    @property
    def n_columns(self) -> int:
        return sum(self.p)


def cluster_distinct_zeros(per_subsystem: Sequence[Sequence[complex]], tol: Tolerances = DEFAULT_TOL) -> list[ZeroCertificate]:
    """Merge zeros of all subsystems into distinct values.

    ``per_subsystem[i-1]`` holds the zeros of subsystem ``i``.  Each returned
    certificate carries the cluster mean and every contributing subsystem.
    """
    vals: list[complex] = []
    owner: list[int] = []
    for i, zs in enumerate(per_subsystem, start=1):
        for z in zs:
            vals.append(complex(z))
            owner.append(i)
    certs = []
    for group in _clusters(vals, tol.zero_cluster_tol):
        lam = _snap(complex(np.mean([vals[k] for k in group])), tol.zero_cluster_tol)
        certs.append(ZeroCertificate(lam, tuple(sorted({owner[k] for k in group}))))
    certs.sort(key=lambda c: _sort_key(c.lambda0))
    return certs


def _family(dual: bool) -> tuple[str, str, str, str]:
    """(G1 family, G2 family, input partition, output partition)."""
    return ("G1_dual", "G2_dual", "z", "S") if dual else ("G1", "G2", "S", "z")


def attach_bases(cert: ZeroCertificate, sys: NetworkedSystem, dual: bool = False, tol: Tolerances = DEFAULT_TOL) -> ZeroCertificate:
    """Compute per-participant zero directions and their G2-type images."""
    g1_name, g2_name, _, _ = _family(dual)
    Ys, Zs, Xs = [], [], []
    for i in cert.participants:
        sub = sys.sub(i)
        g1 = subsystem_tfm(sub, g1_name)
        g2 = subsystem_tfm(sub, g2_name)
        X, U = pencil_kernel(g1, cert.lambda0, tol)
        Ys.append(U)
        Xs.append(X)
        Zs.append(g2.C @ X + g2.D @ U)
    return replace(cert, Y_blocks=tuple(Ys), Z_blocks=tuple(Zs), X_blocks=tuple(Xs), dual=dual)


def build_aggregates(cert: ZeroCertificate, sys: NetworkedSystem) -> ZeroCertificate:
    """Zero-pad the participant blocks into ``Y``, ``Z`` and ``X``.

    Raises
    ------
    StructuralError
        If a block does not fit its subsystem's slot.
    """
    if len(cert.Y_blocks) != len(cert.participants):
        raise StructuralError("participant bases have not been computed")
    _, _, in_part, out_part = _family(cert.dual)
    rows_in = int(sys.offsets[in_part][-1])
    rows_out = int(sys.offsets[out_part][-1])
    ncol = cert.n_columns
    Y = np.zeros((rows_in, ncol), dtype=complex)
    Z = np.zeros((rows_out, ncol), dtype=complex)
    X = np.zeros((sys.M_T, ncol), dtype=complex)
    c = 0
    for i, Yb, Zb, Xb in zip(cert.participants, cert.Y_blocks, cert.Z_blocks, cert.X_blocks):
        k = Yb.shape[1]
        for M, Mb, part in ((Y, Yb, in_part), (Z, Zb, out_part), (X, Xb, "T")):
            sl = sys.span(part, i)
            if Mb.shape[0] != sl.stop - sl.start or sl.stop > M.shape[0]:
                raise StructuralError(
                    f"block of subsystem {i} has {Mb.shape[0]} rows, slot {part} holds {sl.stop - sl.start}"
                )
            M[sl, c:c + k] = Mb
        c += k
    return replace(cert, Y=Y, Z=Z, X=X)


@dataclass(frozen=True, eq=False)
class CertificateSet:
    certificates: tuple[ZeroCertificate, ...]
    zero_sets: tuple[ZeroSet, ...]
    dual: bool

    @property
    def deficient(self) -> list[int]:
        """Subsystems whose G1-type transfer function lacks full column normal rank."""
        return [i for i, zs in enumerate(self.zero_sets, start=1) if not zs.full_column_normal_rank]

    @property
    def m(self) -> int:
        return len(self.certificates)


def zero_certificates(sys: NetworkedSystem, dual: bool = False, tol: Tolerances = DEFAULT_TOL) -> CertificateSet:
    """Run the zero stage of the structured test for every subsystem."""
    g1_name = _family(dual)[0]
    zero_sets = tuple(transmission_zeros(subsystem_tfm(s, g1_name), tol) for s in sys.subsystems)
    if any(not zs.full_column_normal_rank for zs in zero_sets):
        return CertificateSet((), zero_sets, dual)
    certs = cluster_distinct_zeros([zs.zeros for zs in zero_sets], tol)
    certs = [build_aggregates(attach_bases(c, sys, dual, tol), sys) for c in certs]
    return CertificateSet(tuple(certs), zero_sets, dual)
