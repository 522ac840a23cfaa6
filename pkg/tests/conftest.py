from pathlib import Path

import numpy as np
import pytest

from netobs.core_model import ConnectionMatrix, Subsystem, build_system

MODELS = Path(__file__).resolve().parent.parent / "models"


@pytest.fixture
def models_dir() -> Path:
    return MODELS


@pytest.fixture
def ring2():
    """Two scalar subsystems feeding each other."""
    s1 = Subsystem.make(1, [[0.5]], A_TS=[[1.0]], A_ST=[[1.0]], A_SS=[[0.2]], B_T=[[1.0]], C_T=[[1.0]], D_w=[[1.0]])
    s2 = Subsystem.make(2, [[0.3]], A_TS=[[0.5]], A_ST=[[2.0]], A_SS=[[-0.4]], B_T=[[1.0]], C_T=[[0.0]], D_w=[[1.0]])
    return build_system([s1, s2], ConnectionMatrix.from_dense([[0, 1], [1, 0]]))


def rand_system(rng, N=3, dim=3, strict=True):
    """Generic random system, all dimensions at most ``dim``."""
    g = rng.standard_normal
    subs = []
    for i in range(N):
        m_T = int(rng.integers(1, dim + 1))
        m_S = int(rng.integers(0, dim + 1))
        m_z = int(rng.integers(0, dim + 1))
        m_y = int(rng.integers(0, dim + 1))
        m_d = int(rng.integers(0, dim + 1))
        subs.append(Subsystem.make(
            i + 1, g((m_T, m_T)), m_S=m_S, m_z=m_z, m_y=m_y, m_d=m_d, m_w=m_y,
            A_TS=g((m_T, m_S)), A_ST=g((m_z, m_T)), A_SS=0.3 * g((m_z, m_S)) / max(1, m_S + m_z),
            B_T=g((m_T, m_d)), B_S=g((m_z, m_d)), C_T=g((m_y, m_T)), C_S=g((m_y, m_S)), D_d=g((m_y, m_d)),
            D_w=np.eye(m_y),
        ))
    M_S = sum(s.m_S for s in subs)
    M_z = sum(s.m_z for s in subs)
    if M_z == 0:
        phi = np.zeros((M_S, 0))
    elif strict:
        phi = np.zeros((M_S, M_z))
        phi[np.arange(M_S), rng.integers(0, M_z, size=M_S)] = 1.0
    else:
        phi = g((M_S, M_z)) * (rng.random((M_S, M_z)) < 0.4)
    return build_system(subs, ConnectionMatrix(M_S, M_z, tuple(
        (int(r), int(c), float(phi[r, c])) for r, c in zip(*np.nonzero(phi))
    )))
