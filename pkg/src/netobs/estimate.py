"""Distributed one-step predictor (CDOSSP) and lumped Kalman covariance recursions.

Covariances are plain symmetric ``M_T x M_T`` arrays; :func:`block` reads
the ``(i, j)`` subsystem block.  Subsystem indices are 1-based.

Measurement noise enters as ``D_w w`` with ``w`` of identity covariance, so
``R_i = D_w(i) D_w(i)^T``.  ``Cbar`` is the measurement matrix whitened by
``R^{-1/2}``; Kalman gains are returned for whitened measurements and
:attr:`KalmanStep.K_raw` converts them back.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .config import DEFAULT_TOL, Tolerances
from .core_model import LumpedModel, NetworkedSystem, assemble_lumped, block_diag, interconnection_gain
from .errors import NumericalError, PreconditionError
from .linalg import inv_sqrt_psd, min_eig_sym, sym


@dataclass(frozen=True, eq=False)
class EstimationSetup:
    """Matrices shared by every estimator step.

    Attributes
    ----------
    W : list of ndarray
        ``W_i`` maps the full state to ``col(x_i, v_i)`` (``(m_Ti + m_Si) x M_T``).
    AT, Ci : list of ndarray
        ``[A_TT(i), A_TS(i)]`` and ``[C_T(i), C_S(i)]``.
    Rinv : list of ndarray
        ``(D_w(i) D_w(i)^T)^{-1}``.
    Cbar : ndarray
        Whitened lumped measurement matrix.
    """

    sys: NetworkedSystem
    lumped: LumpedModel
    W: tuple[np.ndarray, ...]
    AT: tuple[np.ndarray, ...]
    Ci: tuple[np.ndarray, ...]
    Rinv: tuple[np.ndarray, ...]
    R_isqrt: np.ndarray
    Cbar: np.ndarray
    tol: Tolerances = field(default=DEFAULT_TOL)

    @classmethod
    def from_system(cls, sys: NetworkedSystem, tol: Tolerances = DEFAULT_TOL) -> "EstimationSetup":
        """Build the setup, checking ``B_S = 0``, ``D_d = 0`` and full-row-rank ``D_w``.

        Raises
        ------
        PreconditionError
            If a hypothesis of the estimator fails.
        """
        bad = [s.index for s in sys.subsystems if np.any(s.B_S != 0) or np.any(s.D_d != 0)]
        if bad:
            raise PreconditionError(f"estimation needs B_S = 0 and D_d = 0; violated in subsystems {bad}")
        lumped = assemble_lumped(sys, tol)
        G = interconnection_gain(sys, tol)
        GA = G @ sys.blocks["A_ST"]
        W, AT, Ci, Rinv, isq = [], [], [], [], []
        for s in sys.subsystems:
            i = s.index
            JT = np.zeros((s.m_T, sys.M_T))
            JT[:, sys.span("T", i)] = np.eye(s.m_T)
            W.append(np.vstack([JT, GA[sys.span("S", i)]]))
            AT.append(np.hstack([s.A_TT, s.A_TS]))
            Ci.append(np.hstack([s.C_T, s.C_S]))
            R = s.D_w @ s.D_w.T
            try:
                r_isq = inv_sqrt_psd(R, tol.dw_floor)
            except np.linalg.LinAlgError as exc:
                raise PreconditionError(f"D_w of subsystem {i} is not of full row rank ({exc})") from None
            isq.append(r_isq)
            Rinv.append(r_isq @ r_isq)
        R_isqrt = block_diag(isq) if isq else np.zeros((0, 0))
        Cbar = R_isqrt @ lumped.C
        return cls(sys, lumped, tuple(W), tuple(AT), tuple(Ci), tuple(Rinv), R_isqrt, Cbar, tol)

    @property
    def N(self) -> int:
        return self.sys.N

    @property
    def n(self) -> int:
        return self.sys.M_T

    def A_i(self, i: int) -> np.ndarray:
        return self.lumped.A[self.sys.span("T", i)]

    def Cbar_i(self, i: int) -> np.ndarray:
        return self.Cbar[self.sys.span("y", i)]

    def B_T(self, i: int) -> np.ndarray:
        return self.sys.sub(i).B_T


def block(setup: EstimationSetup, P: np.ndarray, i: int, j: int) -> np.ndarray:
    return P[setup.sys.span("T", i), setup.sys.span("T", j)]


def _solve(M: np.ndarray, rhs: np.ndarray, what: str) -> np.ndarray:
    if M.shape[0] == 0:
        return rhs
    if np.linalg.cond(M) > 1e14:
        raise NumericalError(f"{what} is numerically singular")
    return np.linalg.solve(M, rhs)


def _inv_pd(P: np.ndarray, what: str = "P") -> np.ndarray:
    """Inverse of a positive definite matrix, or an explicit error."""
    try:
        L = np.linalg.cholesky(sym(P))
    except np.linalg.LinAlgError:
        raise NumericalError(f"{what} is not positive definite; the information form needs its inverse") from None
    Li = np.linalg.solve(L, np.eye(P.shape[0]))
    return Li.T @ Li


def _factors(setup: EstimationSetup, P: np.ndarray, i: int) -> tuple[np.ndarray, np.ndarray]:
    """``F_i = {I + S C^T R^-1 C}^{-1}`` and ``S = W P W^T`` for subsystem ``i``."""
    k = i - 1
    W, C, Rinv = setup.W[k], setup.Ci[k], setup.Rinv[k]
    S = W @ P @ W.T
    Q = C.T @ Rinv @ C
    F = _solve(np.eye(S.shape[0]) + S @ Q, np.eye(S.shape[0]), f"I + W P W^T C^T R^-1 C of subsystem {i}")
    return F, S


def cdossp_gain(setup: EstimationSetup, P: np.ndarray, i: int) -> np.ndarray:
    """Optimal local gain ``K_T(i)`` (``m_Ti x m_yi``) for raw measurements."""
    k = i - 1
    F, S = _factors(setup, P, i)
    return setup.AT[k] @ F @ S @ setup.Ci[k].T @ setup.Rinv[k]


def cdossp_gains(setup: EstimationSetup, P: np.ndarray) -> np.ndarray:
    """Block-diagonal gain (``M_T x M_y``) collecting every local gain."""
    K = np.zeros((setup.n, setup.sys.M_y))
    for i in range(1, setup.N + 1):
        K[setup.sys.span("T", i), setup.sys.span("y", i)] = cdossp_gain(setup, P, i)
    return K


def cdossp_step(setup: EstimationSetup, P: np.ndarray) -> np.ndarray:
    """Next CDOSSP error covariance, assembled block by block.

    Accepts singular (PSD) ``P``.
    """
    sys = setup.sys
    left, right = [], []
    for i in range(1, setup.N + 1):
        k = i - 1
        F, S = _factors(setup, P, i)
        Q = setup.Ci[k].T @ setup.Rinv[k] @ setup.Ci[k]
        # A_T(i) F_i W_i P  and  W_j^T {I + Q_j S_j}^{-1} A_T(j)^T
        left.append(setup.AT[k] @ F @ setup.W[k] @ P)
        G = _solve(np.eye(S.shape[0]) + Q @ S, setup.AT[k].T, f"I + C^T R^-1 C W P W^T of subsystem {i}")
        right.append(setup.W[k].T @ G)
    out = np.zeros_like(P)
    for i in range(1, setup.N + 1):
        ri = sys.span("T", i)
        for j in range(1, setup.N + 1):
            if i == j:
                Bi = setup.B_T(i)
                out[ri, ri] = left[i - 1] @ setup.W[i - 1].T @ setup.AT[i - 1].T + Bi @ Bi.T
            else:
                out[ri, sys.span("T", j)] = left[i - 1] @ right[j - 1]
    return sym(out)


def cdossp_step_infoform(setup: EstimationSetup, P: np.ndarray) -> np.ndarray:
    """Information-form CDOSSP update; needs ``P`` positive definite.

    Raises
    ------
    NumericalError
        If ``P`` is not positive definite.
    """
    sys = setup.sys
    Pinv = _inv_pd(P)
    H = []
    for i in range(1, setup.N + 1):
        Cb = setup.Cbar_i(i)
        H.append(setup.A_i(i) @ _inv_pd(Pinv + Cb.T @ Cb, "P^-1 + Cbar_i^T Cbar_i"))
    out = np.zeros_like(P)
    for i in range(1, setup.N + 1):
        ri = sys.span("T", i)
        for j in range(1, setup.N + 1):
            if i == j:
                Bi = setup.B_T(i)
                out[ri, ri] = H[i - 1] @ setup.A_i(i).T + Bi @ Bi.T
            else:
                out[ri, sys.span("T", j)] = H[i - 1] @ Pinv @ H[j - 1].T
    return sym(out)


def error_covariance_step(setup: EstimationSetup, P: np.ndarray, K: np.ndarray) -> np.ndarray:
    """Error covariance after one step of ``xhat+ = A xhat + K (y - C xhat)`` for any gain ``K``."""
    A, C = setup.lumped.A, setup.lumped.C
    B = setup.sys.blocks["B_T"]
    Dw = setup.sys.blocks["D_w"]
    F = A - K @ C
    KD = K @ Dw
    return sym(F @ P @ F.T + B @ B.T + KD @ KD.T)


@dataclass(frozen=True, eq=False)
class KalmanStep:
    P_next: np.ndarray
    K: np.ndarray
    R_isqrt: np.ndarray

    @property
    def K_raw(self) -> np.ndarray:
        """Gain acting on unwhitened measurements."""
        return self.K @ self.R_isqrt

    def block(self, setup: EstimationSetup, i: int, j: int) -> np.ndarray:
        return self.K[setup.sys.span("T", i), setup.sys.span("y", j)]


def kalman_gain(setup: EstimationSetup, P: np.ndarray) -> np.ndarray:
    """Whitened gain ``A P Cbar^T (I + Cbar P Cbar^T)^{-1}``."""
    Cb = setup.Cbar
    S = np.eye(Cb.shape[0]) + Cb @ P @ Cb.T
    return np.linalg.solve(S, Cb @ P @ setup.lumped.A.T).T if S.size else np.zeros((setup.n, 0))


def kalman_step(setup: EstimationSetup, P: np.ndarray, form: str = "covariance") -> KalmanStep:
    """One lumped Riccati update.

    ``form="info"`` uses ``A (P^{-1} + Cbar^T Cbar)^{-1} A^T + B B^T`` and
    needs ``P`` positive definite; ``form="covariance"`` works for any PSD ``P``.
    """
    A = setup.lumped.A
    B = setup.sys.blocks["B_T"]
    Cb = setup.Cbar
    K = kalman_gain(setup, P)
    if form == "info":
        H = _inv_pd(_inv_pd(P) + Cb.T @ Cb, "P^-1 + Cbar^T Cbar")
        Pn = A @ H @ A.T + B @ B.T
    elif form == "covariance":
        Pn = A @ P @ A.T - K @ (Cb @ P @ A.T) + B @ B.T
    else:
        raise ValueError(f"unknown form {form!r}")
    return KalmanStep(sym(Pn), K, setup.R_isqrt)


@dataclass(frozen=True, eq=False)
class SteadyState:
    P: np.ndarray
    converged: bool
    iters: int
    status: str
    residual: float

    def as_dict(self) -> dict:
        return {"converged": self.converged, "iters": self.iters, "status": self.status, "residual": self.residual}


def _stepper(setup: EstimationSetup, which: str):
    if which == "kalman":
        return lambda P: kalman_step(setup, P).P_next
    if which == "cdossp":
        return lambda P: cdossp_step(setup, P)
    raise ValueError(f"unknown estimator {which!r}; expected 'kalman' or 'cdossp'")


def steady_state(setup: EstimationSetup, which: str, P0: np.ndarray | None = None, max_iters: int | None = None,
                 tol: float | None = None) -> SteadyState:
    """Fixed-point iteration of one estimator's covariance recursion.

    Stops when ``||P+ - P||_F <= tol * max(1, ||P||_F)``.  Reports status
    ``converged``, ``max_iters`` or ``diverged`` (``||P||`` past the overflow
    guard or non-finite).
    """
    step = _stepper(setup, which)
    max_iters = setup.tol.max_iters if max_iters is None else int(max_iters)
    tol = setup.tol.steady_tol if tol is None else float(tol)
    P = np.eye(setup.n) if P0 is None else sym(np.asarray(P0, dtype=float))
    res = np.inf
    for k in range(1, max_iters + 1):
        try:
            Pn = step(P)
        except NumericalError:
            return SteadyState(P, False, k, "diverged", float("inf"))
        nrm = float(np.linalg.norm(P))
        if not np.all(np.isfinite(Pn)) or np.linalg.norm(Pn) > setup.tol.overflow_guard:
            return SteadyState(Pn, False, k, "diverged", float("inf"))
        res = float(np.linalg.norm(Pn - P)) / max(1.0, nrm)
        P = Pn
        if res <= tol:
            return SteadyState(P, True, k, "converged", res)
    return SteadyState(P, False, max_iters, "max_iters", res)


def run_recursion(setup: EstimationSetup, which: str, P0: np.ndarray | None, steps: int) -> list[np.ndarray]:
    """``[P(0), ..., P(steps)]`` for one estimator."""
    step = _stepper(setup, which)
    P = np.eye(setup.n) if P0 is None else sym(np.asarray(P0, dtype=float))
    out = [P]
    for _ in range(steps):
        P = step(P)
        out.append(P)
    return out


def covariance_gap(setup: EstimationSetup, P: np.ndarray, P_kal: np.ndarray, i: int) -> np.ndarray:
    """Closed-form ``P_ii(t+1) - P_ii^kal(t+1)`` from the two current covariances.

    Both arguments must be positive definite.
    """
    Cb = setup.Cbar
    Ci = setup.Cbar_i(i)
    Pinv = _inv_pd(P)
    Pkinv = _inv_pd(P_kal, "P_kal")
    others = Cb.T @ Cb - Ci.T @ Ci
    Ai = setup.A_i(i)
    left = Ai @ _inv_pd(Pkinv + Cb.T @ Cb, "P_kal^-1 + Cbar^T Cbar")
    right = _inv_pd(Pinv + Ci.T @ Ci, "P^-1 + Cbar_i^T Cbar_i") @ Ai.T
    return left @ (Pkinv - Pinv + others) @ right


@dataclass(frozen=True)
class BlockResidual:
    i: int
    holds: bool
    residual: float
    worst_j: int | None
    scale: float

    def as_dict(self) -> dict:
        return {"i": self.i, "holds": self.holds, "residual": self.residual, "worst_j": self.worst_j, "scale": self.scale}


@dataclass(frozen=True)
class StepEquivalence:
    per_i: tuple[BlockResidual, ...]
    gain_offdiag_norm: float

    @property
    def all_hold(self) -> bool:
        return all(b.holds for b in self.per_i)


def equivalence_check_step(setup: EstimationSetup, P: np.ndarray) -> StepEquivalence:
    """Per-subsystem size of the off-diagonal Kalman gain blocks at ``P``.

    Block ``i`` holds when ``max_{j != i} ||K_ij||_F <= equiv_tol * ||A_i|| ||P||``.
    """
    K = kalman_gain(setup, P)
    sys = setup.sys
    nP = float(np.linalg.norm(P, 2)) if P.size else 0.0
    per, off2 = [], 0.0
    for i in range(1, setup.N + 1):
        worst, wj = 0.0, None
        for j in range(1, setup.N + 1):
            if j == i:
                continue
            r = float(np.linalg.norm(K[sys.span("T", i), sys.span("y", j)]))
            off2 += r * r
            if r > worst or wj is None:
                worst, wj = r, j
        scale = float(np.linalg.norm(setup.A_i(i), 2)) * nP if setup.A_i(i).size else 0.0
        per.append(BlockResidual(i, worst <= setup.tol.equiv_tol * scale, worst, wj, scale))
    return StepEquivalence(tuple(per), float(np.sqrt(off2)))


@dataclass(frozen=True, eq=False)
class SteadyEquivalence:
    """Outcome of the steady-state equivalence test.

    ``status`` is ``equivalent``, ``not_equivalent`` or ``hypothesis_unmet``
    (the Kalman recursion did not settle at a positive definite matrix).
    """

    status: str
    kalman: SteadyState
    residuals: tuple[BlockResidual, ...] = ()
    cdossp_fixed: bool | None = None
    cdossp: SteadyState | None = None
    diagnostics: str = ""

    @property
    def P_star(self) -> np.ndarray:
        return self.kalman.P

    @property
    def equivalent(self) -> bool:
        return self.status == "equivalent"

    def worst(self) -> BlockResidual | None:
        if not self.residuals:
            return None
        return max(self.residuals, key=lambda b: b.residual / b.scale if b.scale > 0 else b.residual)


def equivalence_check_steady(setup: EstimationSetup, P0: np.ndarray | None = None, hold_steps: int = 100) -> SteadyEquivalence:
    """Decide whether the CDOSSP can match the Kalman steady-state accuracy.

    When the test passes, the CDOSSP recursion is also run for ``hold_steps``
    steps from the Kalman steady covariance to confirm it stays there.  The
    CDOSSP recursion from ``P0`` is reported alongside.
    """
    kal = steady_state(setup, "kalman", P0)
    if not kal.converged:
        return SteadyEquivalence("hypothesis_unmet", kal, diagnostics=f"Kalman recursion {kal.status} after {kal.iters} iterations")
    if setup.n and min_eig_sym(kal.P) <= setup.tol.psd_slack * max(1.0, float(np.linalg.norm(kal.P, 2))):
        return SteadyEquivalence("hypothesis_unmet", kal, diagnostics="Kalman steady covariance is not positive definite")
    chk = equivalence_check_step(setup, kal.P)
    cd = steady_state(setup, "cdossp", P0)
    if not chk.all_hold:
        return SteadyEquivalence("not_equivalent", kal, chk.per_i, None, cd)
    P = kal.P
    ref = max(1.0, float(np.linalg.norm(kal.P)))
    drift = 0.0
    for _ in range(hold_steps):
        P = cdossp_step(setup, P)
        drift = max(drift, float(np.linalg.norm(P - kal.P)) / ref)
    fixed = drift <= 1e-8
    diag = f"CDOSSP started at the Kalman steady covariance drifts by {drift:.3e} (relative) over {hold_steps} steps"
    return SteadyEquivalence("equivalent", kal, chk.per_i, fixed, cd, diag)


# ---------------------------------------------------------------- traces

TRACE_COLUMNS = "t, estimator, trace, then one Frobenius norm column per diagonal block P_ii"


def trace_rows(setup: EstimationSetup, Ps: Sequence[np.ndarray], estimator: str, t0: int = 0) -> list[list]:
    rows = []
    for k, P in enumerate(Ps):
        norms = [float(np.linalg.norm(block(setup, P, i, i))) for i in range(1, setup.N + 1)]
        rows.append([t0 + k, estimator, float(np.trace(P))] + norms)
    return rows


def trace_header(setup: EstimationSetup) -> list[str]:
    return ["t", "estimator", "trace"] + [f"P{i}{i}_fro" for i in range(1, setup.N + 1)]


def to_csv(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(x) if isinstance(x, float) else x for x in r])
    return buf.getvalue()
