"""Observability, controllability and Kalman-convergence verdicts.

The structured tests only look at subsystem zeros and the interconnection
matrix.  The PBH functions work on the assembled lumped model and serve as
independent ground truth.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import DEFAULT_TOL, Tolerances
from .core_model import LumpedModel, NetworkedSystem, assemble_lumped, check_well_posedness
from .errors import NotWellPosedError, PreconditionError
from .linalg import null_space, numerical_rank
from .zeros import CertificateSet, ZeroCertificate, _clusters, _snap, zero_certificates

PROPERTIES = ("observable", "controllable", "kalman_convergent")
RESULTS = ("holds", "fails", "indeterminate")


@dataclass(frozen=True)
class Witness:
    lambda0: complex
    subsystems: tuple[int, ...]
    deficiency: int

    def as_dict(self) -> dict:
        return {
            "lambda0": [float(self.lambda0.real), float(self.lambda0.imag)],
            "subsystems": list(self.subsystems),
            "deficiency": int(self.deficiency),
        }


@dataclass(frozen=True)
class Verdict:
    property: str
    result: str
    witnesses: tuple[Witness, ...] = ()
    method: str = "structured"
    diagnostics: str = ""
    n_zeros: int | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.result == "fails" and not self.witnesses:
            raise ValueError("a failing verdict needs at least one witness")
        if self.result == "holds" and self.witnesses:
            raise ValueError("a holding verdict cannot carry witnesses")

    @property
    def holds(self) -> bool:
        return self.result == "holds"

    def as_dict(self) -> dict:
        out = {
            "property": self.property,
            "result": self.result,
            "method": self.method,
            "witnesses": [w.as_dict() for w in self.witnesses],
            "diagnostics": self.diagnostics,
        }
        if self.n_zeros is not None:
            out["distinct_zeros"] = self.n_zeros
        return out


def _require_well_posed(sys: NetworkedSystem, tol: Tolerances) -> None:
    wp = check_well_posedness(sys, tol)
    if not wp.well_posed:
        raise NotWellPosedError(
            f"I - A_SS Phi is numerically singular (condition estimate {wp.condition_estimate:.3e})"
        )


def rank_test(cert: ZeroCertificate, phi: np.ndarray, tol: Tolerances = DEFAULT_TOL) -> int:
    """Column-rank deficiency of ``phi @ Z - Y`` for one certificate."""
    M = phi @ cert.Z - cert.Y
    return cert.n_columns - numerical_rank(M, tol.rel_tol, scale=1.0)


def _run_rank_tests(prop: str, cs: CertificateSet, phi: np.ndarray, keep, tol: Tolerances) -> Verdict:
    if cs.deficient:
        return Verdict(
            prop,
            "indeterminate",
            diagnostics=(
                "subsystem transfer functions without full column normal rank: "
                f"{cs.deficient}; use the PBH oracle"
            ),
        )
    tested = 0
    for cert in cs.certificates:
        if not keep(cert.lambda0):
            continue
        tested += 1
        deficiency = rank_test(cert, phi, tol)
        if deficiency > 0:
            w = Witness(cert.lambda0, cert.participants, deficiency)
            return Verdict(prop, "fails", (w,), diagnostics=f"rank test failed at zero {tested}", n_zeros=cs.m)
    return Verdict(prop, "holds", diagnostics=f"{tested} of {cs.m} distinct zeros tested", n_zeros=cs.m)


def verify_observability(sys: NetworkedSystem, tol: Tolerances = DEFAULT_TOL) -> Verdict:
    """Structured observability test from subsystem zeros.

    Returns ``indeterminate`` when some subsystem transfer function from
    internal input to measurement lacks full column normal rank.
    """
    _require_well_posed(sys, tol)
    cs = zero_certificates(sys, dual=False, tol=tol)
    return _run_rank_tests("observable", cs, sys.phi_dense, lambda lam: True, tol)


def verify_controllability(sys: NetworkedSystem, tol: Tolerances = DEFAULT_TOL) -> Verdict:
    """Structured controllability test on the transposed transfer functions and ``Phi^T``.

    Cross-check with ``verify_observability(dual_system(sys))``.
    """
    _require_well_posed(sys, tol)
    cs = zero_certificates(sys, dual=True, tol=tol)
    return _run_rank_tests("controllable", cs, sys.phi_dense.T, lambda lam: True, tol)


def _require_kalman_hypothesis(sys: NetworkedSystem) -> None:
    bad = [s.index for s in sys.subsystems if np.any(s.B_S != 0) or np.any(s.D_d != 0)]
    if bad:
        raise PreconditionError(f"B_S and D_d must vanish for the convergence test; nonzero in subsystems {bad}")


def check_kalman_convergence(sys: NetworkedSystem, tol: Tolerances = DEFAULT_TOL) -> Verdict:
    """Sufficient test for convergence of the lumped Kalman filter.

    Observability is only checked at zeros with ``|lam| >= 1`` and
    controllability from the process noise only at zeros on the unit
    circle, both with a ``unit_band`` margin that includes borderline zeros.
    A failure means convergence is not guaranteed, not that it diverges.

    Raises
    ------
    PreconditionError
        If any ``B_S`` or ``D_d`` is nonzero.
    """
    _require_kalman_hypothesis(sys)
    _require_well_posed(sys, tol)
    band = tol.unit_band
    obs = _run_rank_tests(
        "kalman_convergent", zero_certificates(sys, False, tol), sys.phi_dense,
        lambda lam: abs(lam) >= 1.0 - band, tol,
    )
    if obs.result != "holds":
        return _kalman_wrap(obs, "observability")
    ctr = _run_rank_tests(
        "kalman_convergent", zero_certificates(sys, True, tol), sys.phi_dense.T,
        lambda lam: abs(abs(lam) - 1.0) <= band, tol,
    )
    if ctr.result != "holds":
        return _kalman_wrap(ctr, "controllability")
    return Verdict("kalman_convergent", "holds", diagnostics=f"observability: {obs.diagnostics}; controllability: {ctr.diagnostics}")


def _kalman_wrap(v: Verdict, part: str) -> Verdict:
    if v.result == "fails":
        msg = f"convergence not guaranteed: restricted {part} test failed"
    else:
        msg = f"restricted {part} test indeterminate: {v.diagnostics}"
    return Verdict("kalman_convergent", v.result, v.witnesses, "structured", msg, v.n_zeros)


# ---------------------------------------------------------------- oracles


def _distinct_eigenvalues(A: np.ndarray, tol: Tolerances) -> list[complex]:
    if A.shape[0] == 0:
        return []
    ev = [complex(x) for x in np.linalg.eigvals(A)]
    out = []
    for g in _clusters(ev, tol.zero_cluster_tol):
        out.append(_snap(complex(np.mean([ev[k] for k in g])), tol.zero_cluster_tol))
    return out


def _support(vecs: np.ndarray, offsets: np.ndarray | None) -> tuple[int, ...]:
    if offsets is None or vecs.size == 0:
        return ()
    w = np.linalg.norm(vecs, axis=1)
    ref = max(float(w.max()), 1e-300)
    return tuple(
        i + 1 for i in range(len(offsets) - 1)
        if offsets[i + 1] > offsets[i] and w[offsets[i]:offsets[i + 1]].max() > 1e-8 * ref
    )


def _pbh(prop: str, A: np.ndarray, C: np.ndarray, keep, tol: Tolerances, offsets=None) -> Verdict:
    n = A.shape[0]
    witnesses = []
    for lam in _distinct_eigenvalues(A, tol):
        if not keep(lam):
            continue
        M = np.vstack([lam * np.eye(n) - A, C.astype(complex)])
        rank = numerical_rank(M, tol.rel_tol, scale=1.0)
        if rank < n:
            vecs = null_space(M, tol.rel_tol, min_dim=n - rank)
            witnesses.append(Witness(lam, _support(vecs, offsets), n - rank))
    if witnesses:
        return Verdict(prop, "fails", tuple(witnesses), "oracle", "PBH rank test failed")
    return Verdict(prop, "holds", (), "oracle", "PBH rank test passed")


def pbh_observability_oracle(lumped: LumpedModel, tol: Tolerances = DEFAULT_TOL, offsets=None) -> Verdict:
    """Check ``rank [lam I - A; C] = n`` at every eigenvalue of ``A``.

    ``offsets`` (state prefix sums) lets witnesses name the subsystems that
    carry the unobservable eigenvector.
    """
    return _pbh("observable", lumped.A, lumped.C, lambda lam: True, tol, offsets)


def pbh_controllability_oracle(lumped: LumpedModel, tol: Tolerances = DEFAULT_TOL, offsets=None) -> Verdict:
    """Mirror of :func:`pbh_observability_oracle` on ``(A^T, B^T)``."""
    return _pbh("controllable", lumped.A.T, lumped.B.T, lambda lam: True, tol, offsets)


def pbh_kalman_oracle(lumped: LumpedModel, tol: Tolerances = DEFAULT_TOL, offsets=None) -> Verdict:
    """Detectability of ``(A, C)`` plus no uncontrollable modes of ``(A, B)`` on the unit circle."""
    band = tol.unit_band
    obs = _pbh("kalman_convergent", lumped.A, lumped.C, lambda lam: abs(lam) >= 1.0 - band, tol, offsets)
    if obs.result == "fails":
        return obs
    return _pbh("kalman_convergent", lumped.A.T, lumped.B.T, lambda lam: abs(abs(lam) - 1.0) <= band, tol, offsets)


def oracle_for(prop: str, sys: NetworkedSystem, tol: Tolerances = DEFAULT_TOL) -> Verdict:
    lumped = assemble_lumped(sys, tol)
    off = sys.offsets["T"]
    fn = {
        "observable": pbh_observability_oracle,
        "controllable": pbh_controllability_oracle,
        "kalman_convergent": pbh_kalman_oracle,
    }[prop]
    return fn(lumped, tol, off)


def mvp_matrix(sys: NetworkedSystem, lam: complex) -> np.ndarray:
    """``[lam I - A_TT, -A_TS; -C_T, -C_S; -Phi A_ST, I - Phi A_SS]``."""
    b = sys.blocks
    phi = sys.phi_dense
    MT, MS = sys.M_T, sys.M_S
    top = np.hstack([lam * np.eye(MT) - b["A_TT"], -b["A_TS"]])
    mid = np.hstack([-b["C_T"], -b["C_S"]]).astype(complex)
    bot = np.hstack([-phi @ b["A_ST"], np.eye(MS) - phi @ b["A_SS"]]).astype(complex)
    return np.vstack([top, mid, bot])


def mvp_rank_probe(sys: NetworkedSystem, lam: complex, tol: Tolerances = DEFAULT_TOL) -> dict:
    M = mvp_matrix(sys, lam)
    rank = numerical_rank(M, tol.rel_tol, scale=1.0)
    return {"rank": rank, "full_column": rank == M.shape[1]}
