"""Random networked systems for tests, scripts and the acceptance corpus.

Generic Gaussian systems are almost always observable and controllable, so
a share of the corpus gets defects planted on purpose:

``hidden``
    a state mode that neither the measurement nor the internal output sees
    (its dual plants a mode that neither input reaches);
``isolated``
    a subsystem with no internal signals and no measurement;
``loop``
    a subsystem fed back to itself so that a zero of its measurement map is
    cancelled by the loop, which only the ``Phi Z - Y`` rank test can catch.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core_model import (
    ConnectionMatrix, NetworkedSystem, Subsystem, assemble_lumped, build_system, check_well_posedness,
)
from .zeros import subsystem_tfm, transmission_zeros

DEFECTS = ("none", "hidden", "hidden_dual", "isolated", "loop", "loop_dual")


@dataclass(frozen=True)
class CorpusConfig:
    """Dimension limits and defect mix of the random corpus."""

    n_range: tuple[int, ...] = (2, 3, 4)
    max_T: int = 3
    max_S: int = 2
    radius: tuple[float, float] = (0.3, 1.3)
    ss_gain: float = 0.4
    defect_rate: float = 0.35
    deficient_rate: float = 0.1
    strict_phi: bool = True


def _scaled(rng: np.random.Generator, n: int, radius: float) -> np.ndarray:
    A = rng.standard_normal((n, n))
    rho = max(abs(np.linalg.eigvals(A)))
    return A * (radius / rho) if rho > 0 else A


def _safe_mode(rng: np.random.Generator) -> float:
    """A real eigenvalue kept clear of the unit circle band."""
    mag = rng.choice([rng.uniform(0.1, 0.9), rng.uniform(1.1, 1.4)])
    return float(mag * rng.choice([-1.0, 1.0]))


def random_subsystem(rng: np.random.Generator, index: int, cfg: CorpusConfig, deficient: bool = False,
                     isolated: bool = False) -> Subsystem:
    m_T = int(rng.integers(1, cfg.max_T + 1))
    if isolated:
        m_S = m_y = 0
        m_d = int(rng.integers(1, 3))
    else:
        m_S = int(rng.integers(1, cfg.max_S + 1))
        if m_T < m_S and not deficient:
            m_T = m_S
        if deficient and m_S > 0:
            m_y = int(rng.integers(0, m_S))
        else:
            m_y = int(rng.integers(m_S, m_S + 2))
        m_d = int(rng.integers(m_S, m_S + 2)) if not deficient else int(rng.integers(0, m_S + 1))
        m_d = max(m_d, 1)
    m_z = m_S
    g = rng.standard_normal
    radius = rng.uniform(*cfg.radius)
    return Subsystem.make(
        index,
        _scaled(rng, m_T, radius),
        m_S=m_S, m_z=m_z, m_y=m_y, m_d=m_d, m_w=m_y,
        A_TS=g((m_T, m_S)),
        A_ST=g((m_z, m_T)),
        A_SS=cfg.ss_gain * g((m_z, m_S)) / max(1, m_S),
        B_T=g((m_T, m_d)),
        C_T=g((m_y, m_T)),
        C_S=g((m_y, m_S)),
        D_w=g((m_y, m_y)) + 2.0 * np.eye(m_y),
    )


def random_phi(rng: np.random.Generator, M_S: int, M_z: int, strict: bool = True) -> ConnectionMatrix:
    if M_S == 0 or M_z == 0:
        return ConnectionMatrix(M_S, M_z, ())
    targets = rng.integers(0, M_z, size=M_S)
    if strict:
        return ConnectionMatrix.selection(targets.tolist(), M_z)
    vals = rng.standard_normal(M_S)
    return ConnectionMatrix(M_S, M_z, tuple((r, int(c), float(v)) for r, (c, v) in enumerate(zip(targets, vals))))


def _plant_hidden(rng: np.random.Generator, s: Subsystem, dual: bool) -> Subsystem:
    """Make state 0 an eigen-mode invisible (or unreachable) from the rest."""
    m = {k: np.array(v) for k, v in s.matrices().items()}
    lam = _safe_mode(rng)
    if not dual:
        m["A_TT"][1:, 0] = 0.0
        m["A_TT"][0, 0] = lam
        m["C_T"][:, 0] = 0.0
        m["A_ST"][:, 0] = 0.0
    else:
        m["A_TT"][0, 1:] = 0.0
        m["A_TT"][0, 0] = lam
        m["B_T"][0, :] = 0.0
        m["A_TS"][0, :] = 0.0
    return Subsystem(index=s.index, **m)


def _plant_loop(rng: np.random.Generator, s: Subsystem, dual: bool) -> Subsystem | None:
    """Tune ``A_SS`` of a single-channel subsystem so its self loop cancels a real zero.

    Returns ``None`` when no suitable real zero exists.
    """
    if s.m_S != 1:
        return None
    tfm = subsystem_tfm(s, "G1_dual" if dual else "G1")
    zs = [z for z in transmission_zeros(tfm).distinct()
          if abs(z.imag) == 0.0 and abs(abs(z) - 1.0) > 0.05 and 0.05 < abs(z) < 5.0]
    ev = np.linalg.eigvals(s.A_TT)
    zs = [z for z in zs if np.min(np.abs(ev - z)) > 1e-3]
    if not zs:
        return None
    lam = zs[int(rng.integers(len(zs)))].real
    # self loop v = z needs G2(lam) = 1 at the zero direction (scalar channel)
    g2 = s.A_ST @ np.linalg.solve(lam * np.eye(s.m_T) - s.A_TT, s.A_TS)
    A_SS = 1.0 - g2
    if abs(1.0 - A_SS[0, 0]) < 1e-3:
        return None
    m = {k: np.array(v) for k, v in s.matrices().items()}
    m["A_SS"] = A_SS
    return Subsystem(index=s.index, **m)


def random_system(rng: np.random.Generator, cfg: CorpusConfig = CorpusConfig(), N: int | None = None,
                  defect: str | None = None) -> tuple[NetworkedSystem, str]:
    """Draw one well-posed networked system and report which defect was planted."""
    for _ in range(100):
        n = int(N if N is not None else rng.choice(cfg.n_range))
        kind = defect
        if kind is None:
            kind = str(rng.choice(DEFECTS[1:])) if rng.random() < cfg.defect_rate else "none"
        target = int(rng.integers(n))
        deficient = [rng.random() < cfg.deficient_rate for _ in range(n)]
        subs = []
        for k in range(n):
            s = random_subsystem(rng, k + 1, cfg, deficient=deficient[k] and kind == "none",
                                 isolated=(kind == "isolated" and k == target))
            subs.append(s)
        loop_row = None
        if kind in ("hidden", "hidden_dual"):
            subs[target] = _plant_hidden(rng, subs[target], kind == "hidden_dual")
        elif kind in ("loop", "loop_dual"):
            s = subs[target]
            if s.m_S != 1:
                s = random_subsystem(rng, target + 1, CorpusConfig(max_T=cfg.max_T, max_S=1))
            tuned = _plant_loop(rng, s, kind == "loop_dual")
            if tuned is None:
                continue
            subs[target] = tuned
            loop_row = target
        M_S = sum(s.m_S for s in subs)
        M_z = sum(s.m_z for s in subs)
        phi = random_phi(rng, M_S, M_z, cfg.strict_phi)
        if loop_row is not None:
            # the tuned channel reads its own internal output
            off = int(np.sum([s.m_S for s in subs[:loop_row]]))
            # and nobody else reads it, so the cancelled mode stays hidden
            others = [c for c in range(M_z) if c != off] or [off]
            ents = [(r, c if c != off else int(rng.choice(others)), v) for r, c, v in phi.entries if r != off]
            ents.append((off, off, 1.0))
            phi = ConnectionMatrix(M_S, M_z, tuple(sorted(ents)))
        sys = build_system(subs, phi)
        if check_well_posedness(sys).condition_estimate < 1e6:
            return sys, kind
    raise RuntimeError("could not draw a well-posed system")


def random_corpus(seed: int, count: int, cfg: CorpusConfig = CorpusConfig()) -> list[tuple[NetworkedSystem, str]]:
    rng = np.random.default_rng(seed)
    return [random_system(rng, cfg) for _ in range(count)]


def random_estimation_system(rng: np.random.Generator, N: int = 3, max_T: int = 2, max_S: int = 1,
                             coupled: bool = True, one_way: bool = False, stable: bool = True) -> NetworkedSystem:
    """A system satisfying the estimation hypotheses (``B_S = 0``, ``D_d = 0``, ``D_w`` full row rank).

    ``coupled=False`` gives ``A_TS = 0`` and ``C_S = 0``.  ``one_way`` keeps
    ``C_S = 0`` and routes internal signals only from higher to lower
    subsystem indices, so subsystem ``N`` receives nothing.
    """
    g = rng.standard_normal
    subs = []
    for k in range(N):
        m_T = int(rng.integers(1, max_T + 1))
        m_S = int(rng.integers(1, max_S + 1))
        m_y = int(rng.integers(1, m_T + 1))
        m_d = int(rng.integers(1, m_T + 1))
        A_TT = _scaled(rng, m_T, rng.uniform(0.2, 0.8) if stable else rng.uniform(0.5, 1.3))
        A_TS = g((m_T, m_S)) * 0.5 if coupled else np.zeros((m_T, m_S))
        C_S = g((m_y, m_S)) * 0.5 if (coupled and not one_way) else np.zeros((m_y, m_S))
        if one_way and k == N - 1:
            A_TS = np.zeros((m_T, m_S))
        subs.append(Subsystem.make(
            k + 1, A_TT, m_S=m_S, m_z=m_S, m_y=m_y, m_d=m_d, m_w=m_y,
            A_TS=A_TS, A_ST=g((m_S, m_T)) * 0.5, A_SS=0.2 * g((m_S, m_S)),
            B_T=g((m_T, m_d)) * 0.5, C_T=g((m_y, m_T)), C_S=C_S,
            D_w=0.3 * g((m_y, m_y)) + np.eye(m_y),
        ))
    M_S = sum(s.m_S for s in subs)
    offs = np.concatenate([[0], np.cumsum([s.m_S for s in subs])])
    if one_way:
        targets = []
        for k, s in enumerate(subs):
            for _ in range(s.m_S):
                lo = offs[k + 1] if k + 1 < N else 0
                targets.append(int(rng.integers(lo, M_S)) if lo < M_S else int(rng.integers(0, M_S)))
        phi = ConnectionMatrix.selection(targets, M_S)
    else:
        # every channel reads another subsystem, otherwise self loops can leave it decoupled
        targets = []
        for k, s in enumerate(subs):
            pool = [c for c in range(M_S) if not offs[k] <= c < offs[k + 1]] or list(range(M_S))
            targets += [int(rng.choice(pool)) for _ in range(s.m_S)]
        phi = ConnectionMatrix.selection(targets, M_S)
    sys = build_system(subs, phi)
    wp = check_well_posedness(sys)
    if not wp.well_posed or wp.condition_estimate > 1e6:
        return random_estimation_system(rng, N, max_T, max_S, coupled, one_way, stable)
    if stable and max(abs(np.linalg.eigvals(assemble_lumped(sys).A))) >= 0.95:
        return random_estimation_system(rng, N, max_T, max_S, coupled, one_way, stable)
    return sys
