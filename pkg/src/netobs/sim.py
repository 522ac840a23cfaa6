"""Monte Carlo simulation of the plant and both predictors.

The interconnection is resolved through the lumped model, which is exact for
a well-posed system.  Every trial owns three random streams keyed by
``(seed, trial, k)`` (``k = 0`` initial state, ``1`` process noise, ``2``
measurement noise), so results do not depend on how trials are batched.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import DEFAULT_TOL, Tolerances
from .core_model import NetworkedSystem
from .estimate import EstimationSetup, cdossp_gains, cdossp_step, kalman_gain, kalman_step, to_csv

_X0, _D, _W = 0, 1, 2


@dataclass(frozen=True)
class SimConfig:
    """Monte Carlo settings.

    Attributes
    ----------
    horizon : int
        Number of steps ``T``; states are recorded for ``t = 0..T``.
    trials : int
        Independent realizations.
    seed : int
        Root seed.
    P0 : ndarray or None
        Initial error covariance (identity when omitted); ``x(0) ~ N(0, P0)``
        and both predictors start from ``xhat(0) = 0``.
    record : tuple of int or None
        Steps at which covariances are stored (all steps when omitted).
    """

    horizon: int = 20
    trials: int = 1000
    seed: int = 0
    P0: np.ndarray | None = None
    record: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")

    def steps(self) -> tuple[int, ...]:
        if self.record is None:
            return tuple(range(self.horizon + 1))
        return tuple(sorted(set(int(t) for t in self.record if 0 <= t <= self.horizon)))


@dataclass(frozen=True, eq=False)
class Noise:
    x0: np.ndarray  # trials x M_T (standard normal, before shaping by P0)
    d: np.ndarray   # trials x T x M_d
    w: np.ndarray   # trials x (T + 1) x M_w


def draw_noise(n: int, m_d: int, m_w: int, cfg: SimConfig) -> Noise:
    x0 = np.empty((cfg.trials, n))
    d = np.empty((cfg.trials, cfg.horizon, m_d))
    w = np.empty((cfg.trials, cfg.horizon + 1, m_w))
    for k in range(cfg.trials):
        x0[k] = np.random.default_rng([cfg.seed, k, _X0]).standard_normal(n)
        d[k] = np.random.default_rng([cfg.seed, k, _D]).standard_normal((cfg.horizon, m_d))
        w[k] = np.random.default_rng([cfg.seed, k, _W]).standard_normal((cfg.horizon + 1, m_w))
    return Noise(x0, d, w)


def _sqrt_psd(P: np.ndarray) -> np.ndarray:
    w, V = np.linalg.eigh(0.5 * (P + P.T))
    return V * np.sqrt(np.clip(w, 0.0, None))


@dataclass(frozen=True, eq=False)
class Trajectories:
    x: np.ndarray  # trials x (T + 1) x M_T
    y: np.ndarray  # trials x (T + 1) x M_y


def simulate_plant(sys: NetworkedSystem, cfg: SimConfig, tol: Tolerances = DEFAULT_TOL,
                   noise: Noise | None = None) -> Trajectories:
    """Draw state and measurement trajectories for every trial."""
    setup = EstimationSetup.from_system(sys, tol)
    return _simulate(setup, cfg, noise)


def _simulate(setup: EstimationSetup, cfg: SimConfig, noise: Noise | None) -> Trajectories:
    sys = setup.sys
    A, C = setup.lumped.A, setup.lumped.C
    B, Dw = sys.blocks["B_T"], sys.blocks["D_w"]
    n = sys.M_T
    if noise is None:
        noise = draw_noise(n, sys.M_d, sys.M_w, cfg)
    P0 = np.eye(n) if cfg.P0 is None else np.asarray(cfg.P0, dtype=float)
    x = np.empty((cfg.trials, cfg.horizon + 1, n))
    y = np.empty((cfg.trials, cfg.horizon + 1, sys.M_y))
    x[:, 0] = noise.x0 @ _sqrt_psd(P0).T
    for t in range(cfg.horizon + 1):
        y[:, t] = x[:, t] @ C.T + noise.w[:, t] @ Dw.T
        if t < cfg.horizon:
            x[:, t + 1] = x[:, t] @ A.T + noise.d[:, t] @ B.T
    return Trajectories(x, y)


@dataclass(frozen=True, eq=False)
class SimResult:
    """Empirical and analytic error covariances at the recorded steps.

    ``empirical[name]`` and ``analytic[name]`` are arrays of shape
    ``(len(steps), M_T, M_T)`` for ``name`` in ``("cdossp", "kalman")``.
    ``rms[name]`` has one row per recorded step and one column per subsystem.
    """

    steps: tuple[int, ...]
    empirical: dict
    analytic: dict
    rms: dict
    mean_error: dict
    trials: int

    def rel_error(self, name: str) -> np.ndarray:
        """Frobenius-relative gap between empirical and analytic covariance per recorded step."""
        E, P = self.empirical[name], self.analytic[name]
        return np.array([np.linalg.norm(e - p) / max(np.linalg.norm(p), 1e-300) for e, p in zip(E, P)])

    def csv(self) -> str:
        header = ["t"]
        for name in ("cdossp", "kalman"):
            header += [f"{name}_trace_analytic", f"{name}_trace_empirical", f"{name}_rel_error"]
        rows = []
        rel = {name: self.rel_error(name) for name in ("cdossp", "kalman")}
        for k, t in enumerate(self.steps):
            row = [t]
            for name in ("cdossp", "kalman"):
                row += [float(np.trace(self.analytic[name][k])), float(np.trace(self.empirical[name][k])),
                        float(rel[name][k])]
            rows.append(row)
        return to_csv(header, rows)


def analytic_gains(setup: EstimationSetup, P0: np.ndarray, horizon: int) -> dict:
    """Per-step raw gains and covariances from the analytic recursions."""
    out = {"cdossp": ([], []), "kalman": ([], [])}
    Pc = Pk = P0
    for _ in range(horizon + 1):
        Kc = cdossp_gains(setup, Pc)
        Kk = kalman_gain(setup, Pk) @ setup.R_isqrt
        out["cdossp"][0].append(Kc)
        out["cdossp"][1].append(Pc)
        out["kalman"][0].append(Kk)
        out["kalman"][1].append(Pk)
        Pc = cdossp_step(setup, Pc)
        Pk = kalman_step(setup, Pk).P_next
    return out


def run_estimators(sys: NetworkedSystem, cfg: SimConfig, tol: Tolerances = DEFAULT_TOL) -> SimResult:
    """Run both predictors on the same realizations and compare error covariances."""
    setup = EstimationSetup.from_system(sys, tol)
    n = sys.M_T
    P0 = np.eye(n) if cfg.P0 is None else np.asarray(cfg.P0, dtype=float)
    traj = _simulate(setup, cfg, None)
    gains = analytic_gains(setup, P0, cfg.horizon)
    A = setup.lumped.A
    steps = cfg.steps()
    idx = {t: k for k, t in enumerate(steps)}
    emp, ana, rms, mean = {}, {}, {}, {}
    T_off = sys.offsets["T"]
    for name, (Ks, Ps) in gains.items():
        xhat = np.zeros((cfg.trials, n))
        E = np.empty((len(steps), n, n))
        R = np.empty((len(steps), sys.N))
        mu = np.empty(len(steps))
        for t in range(cfg.horizon + 1):
            e = traj.x[:, t] - xhat
            if t in idx:
                k = idx[t]
                E[k] = e.T @ e / cfg.trials
                sq = np.mean(e * e, axis=0)
                R[k] = [np.sqrt(np.sum(sq[T_off[i]:T_off[i + 1]])) for i in range(sys.N)]
                mu[k] = float(np.linalg.norm(e.mean(axis=0)))
            if t < cfg.horizon:
                innov = traj.y[:, t] - xhat @ setup.lumped.C.T
                xhat = xhat @ A.T + innov @ Ks[t].T
        emp[name] = E
        ana[name] = np.array([Ps[t] for t in steps])
        rms[name] = R
        mean[name] = mu
    return SimResult(steps, emp, ana, rms, mean, cfg.trials)
