"""Numerical tolerance policy shared by every module.

All rank, regularity and clustering decisions in the package go through one
:class:`Tolerances` instance so that a report can echo exactly which knobs
produced it.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, replace


@dataclass(frozen=True)
class Tolerances:
    """Tolerance knobs with their documented defaults.

    Attributes
    ----------
    rel_tol : float
        A matrix is numerically singular / rank deficient when a singular value
        is ``<= rel_tol * sigma_max``.
    zero_residual_tol : float
        Null-space threshold (relative) used when extracting zero directions.
    zero_cluster_tol : float
        Two zeros are the same when ``|a - b| <= zero_cluster_tol * max(1, |a|)``.
        Also the acceptance threshold for a candidate transmission zero.
    eig_guard_tol : float
        Minimum distance from an eigenvalue of the A-part before a resolvent
        is considered singular.
    footnote_tol : float
        Accepted residual of the least-squares resolvent at an eigenvalue.
    unit_band : float
        Half-width of the band around ``|lambda| = 1`` used for Kalman
        convergence restrictions.
    equiv_tol : float
        Relative threshold for the block-diagonal Kalman gain tests.
    steady_tol : float
        Relative Frobenius stopping tolerance of fixed-point iterations.
    max_iters : int
        Iteration cap for fixed-point iterations.
    psd_slack : float
        Allowed negative eigenvalue, relative to ``||P||``, for PSD checks.
    dw_floor : float
        Smallest admissible eigenvalue of ``D_w D_w^T``.
    overflow_guard : float
        ``||P||`` above this is reported as divergence.
    """

    rel_tol: float = 1e-9
    zero_residual_tol: float = 1e-8
    zero_cluster_tol: float = 1e-7
    eig_guard_tol: float = 1e-10
    footnote_tol: float = 1e-8
    unit_band: float = 1e-7
    equiv_tol: float = 1e-7
    steady_tol: float = 1e-10
    max_iters: int = 100_000
    psd_slack: float = 1e-10
    dw_floor: float = 1e-12
    overflow_guard: float = 1e12

    def as_dict(self) -> dict:
        return asdict(self)

    def with_(self, **changes) -> "Tolerances":
        return replace(self, **changes)


DEFAULT_TOL = Tolerances()
