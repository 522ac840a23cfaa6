import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from netobs.core_model import LumpedModel, Subsystem, assemble_lumped, build_system, dual_system
from netobs.errors import PreconditionError
from netobs.estimate import EstimationSetup, steady_state
from netobs.io import load_model
from netobs.linalg import singular_values
from netobs.random_systems import CorpusConfig, random_corpus, random_system
from netobs.verify import (
    Verdict, Witness, check_kalman_convergence, mvp_rank_probe, oracle_for, pbh_controllability_oracle,
    pbh_observability_oracle, verify_controllability, verify_observability,
)
from netobs.zeros import zero_certificates


def lm(A, B=None, C=None):
    A = np.atleast_2d(np.asarray(A, dtype=float))
    n = A.shape[0]
    B = np.zeros((n, 0)) if B is None else np.atleast_2d(np.asarray(B, dtype=float))
    C = np.zeros((0, n)) if C is None else np.atleast_2d(np.asarray(C, dtype=float))
    return LumpedModel(A, B, C, np.zeros((C.shape[0], B.shape[1])))


def test_verdict_invariants():
    with pytest.raises(ValueError):
        Verdict("observable", "fails")
    with pytest.raises(ValueError):
        Verdict("observable", "holds", (Witness(0.5, (1,), 1),))


# ------------------------------------------------------------ PBH oracles


def test_pbh_examples():
    assert pbh_observability_oracle(lm([[0.0]], C=[[1.0]])).holds
    v = pbh_observability_oracle(lm(np.diag([0.5, 0.5]), C=[[1.0, 0.0]]))
    assert v.result == "fails" and v.witnesses[0].lambda0 == pytest.approx(0.5)
    assert pbh_controllability_oracle(lm([[0.0]], B=[[1.0]])).holds
    assert pbh_controllability_oracle(lm([[0.3, 1.0], [0.0, -0.2]], B=np.zeros((2, 1)))).result == "fails"


def _obsv_rank(A, C):
    n = A.shape[0]
    O = np.vstack([C @ np.linalg.matrix_power(A, k) for k in range(n)])
    s = singular_values(O)
    return int(np.sum(s > 1e-9 * max(1.0, s[0] if s.size else 0.0)))


def _random_pair(rng):
    n = int(rng.integers(1, 5))
    p = int(rng.integers(1, 3))
    A = rng.integers(-2, 3, (n, n)).astype(float)
    C = rng.integers(-1, 2, (p, n)).astype(float)
    if rng.random() < 0.4 and n > 1:
        # block triangular with an unobserved block
        k = int(rng.integers(1, n))
        A[:k, k:] = 0.0
        C[:, :k] = 0.0
    return A, C


def test_pbh_agrees_with_observability_matrix():
    rng = np.random.default_rng(11)
    n_fail = 0
    for _ in range(200):
        A, C = _random_pair(rng)
        pbh = pbh_observability_oracle(lm(A, C=C)).holds
        assert pbh == (_obsv_rank(A, C) == A.shape[0])
        n_fail += not pbh
    assert n_fail > 20


def test_pbh_agrees_with_controllability_matrix():
    rng = np.random.default_rng(12)
    for _ in range(200):
        A, C = _random_pair(rng)
        A, B = A.T, C.T
        assert pbh_controllability_oracle(lm(A, B=B)).holds == (_obsv_rank(A.T, B.T) == A.shape[0])


# ------------------------------------------------------- structured tests


def test_no_zeros_holds_vacuously():
    s = Subsystem.make(1, [[0.4]], A_TS=[[1.0]], A_ST=[[1.0]], C_T=[[1.0], [0.0]], C_S=[[0.0], [1.0]])
    sys = build_system([s, Subsystem(index=2, **s.matrices())], [[0, 1], [1, 0]])
    assert zero_certificates(sys).m == 0
    v = verify_observability(sys)
    assert v.holds and v.n_zeros == 0


def test_engineered_loop_fails(models_dir):
    sys, _ = load_model(models_dir / "loop_cancel.json")
    v = verify_observability(sys)
    assert v.result == "fails"
    assert v.witnesses[0].lambda0 == pytest.approx(-0.1) and v.witnesses[0].subsystems == (1,)
    assert oracle_for("observable", sys).result == "fails"
    assert not mvp_rank_probe(sys, v.witnesses[0].lambda0)["full_column"]


def test_hidden_mode_names_subsystem(models_dir):
    sys, _ = load_model(models_dir / "hidden_mode.json")
    v = verify_observability(sys)
    assert v.result == "fails" and v.witnesses[0].subsystems == (2,)
    assert v.witnesses[0].lambda0 == pytest.approx(0.5)
    o = oracle_for("observable", sys)
    assert o.result == "fails" and o.witnesses[0].subsystems == (2,)


def test_full_noise_input_is_controllable():
    rng = np.random.default_rng(5)
    subs = [Subsystem.make(i, 0.5 * rng.standard_normal((2, 2)), A_TS=rng.standard_normal((2, 1)),
                           A_ST=rng.standard_normal((1, 2)), B_T=np.eye(2), C_T=np.ones((1, 2)), D_w=[[1.0]])
            for i in (1, 2)]
    sys = build_system(subs, [[0, 1], [1, 0]])
    assert verify_controllability(sys).holds
    assert oracle_for("controllable", sys).holds


def test_decoupled_uncontrollable_subsystem_is_named():
    s1 = Subsystem.make(1, [[0.5]], m_S=1, m_z=1, A_ST=[[1.0]], B_T=[[1.0]], C_T=[[1.0]], D_w=[[1.0]])
    s2 = Subsystem.make(2, [[0.3, 0.0], [0.0, 0.6]], m_S=1, m_z=1, A_ST=[[1.0, 0.0]], B_T=[[1.0], [0.0]],
                        C_T=[[1.0, 1.0]], D_w=[[1.0]])
    sys = build_system([s1, s2], [[0, 1], [1, 0]])
    v = verify_controllability(sys)
    assert v.result == "fails" and v.witnesses[0].subsystems == (2,)
    assert v.witnesses[0].lambda0 == pytest.approx(0.6)
    only2 = build_system([Subsystem(index=1, **s2.matrices())], [[0]])
    assert pbh_controllability_oracle(assemble_lumped(only2)).result == "fails"


def small_corpus(seed, count):
    return random_corpus(seed, count, CorpusConfig(n_range=(1, 2, 3)))


def test_structured_agrees_with_pbh_on_small_systems():
    decided = 0
    for sys, _ in small_corpus(21, 200):
        v = verify_observability(sys)
        if v.result == "indeterminate":
            continue
        decided += 1
        assert v.result == oracle_for("observable", sys).result
    assert decided >= 150


def test_dual_path_on_small_systems():
    for sys, _ in small_corpus(22, 200):
        assert verify_controllability(sys).result == verify_observability(dual_system(sys)).result


def test_witness_validity_and_mvp_link():
    seen = 0
    for sys, _ in random_corpus(23, 150):
        cs = zero_certificates(sys)
        v = verify_observability(sys)
        if v.result != "fails":
            continue
        seen += 1
        cert = next(c for c in cs.certificates if c.lambda0 == v.witnesses[0].lambda0)
        M = sys.phi_dense @ cert.Z - cert.Y
        # smallest ||M a|| over unit a is the last right singular value
        _, sv, Vh = np.linalg.svd(M)
        a = Vh[-1].conj()
        assert np.linalg.norm(M @ a) <= 1e-6
        assert not mvp_rank_probe(sys, cert.lambda0)["full_column"]
    assert seen > 10


def test_observable_system_mvp_full_at_eigenvalues():
    checked = 0
    for sys, _ in random_corpus(24, 60):
        if not verify_observability(sys).holds:
            continue
        checked += 1
        for lam in np.linalg.eigvals(assemble_lumped(sys).A):
            assert mvp_rank_probe(sys, lam)["full_column"]
    assert checked > 10


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_kalman_restriction_monotone(seed):
    sys, _ = random_system(np.random.default_rng(seed))
    if verify_observability(sys).holds and verify_controllability(sys).holds:
        assert check_kalman_convergence(sys).result == "holds"


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_duality_property(seed):
    sys, _ = random_system(np.random.default_rng(seed))
    assert verify_controllability(sys).result == verify_observability(dual_system(sys)).result


# ------------------------------------------------------- Kalman convergence


def test_kalman_vacuous_and_hidden_stable_mode(models_dir):
    sys, _ = load_model(models_dir / "coupled3.json")
    assert check_kalman_convergence(sys).holds
    sys, _ = load_model(models_dir / "hidden_mode.json")
    assert verify_observability(sys).result == "fails"
    assert check_kalman_convergence(sys).holds
    ss = steady_state(EstimationSetup.from_system(sys), "kalman")
    assert ss.converged


def test_kalman_unstable_hidden_mode(models_dir):
    sys, _ = load_model(models_dir / "unstable_hidden.json")
    v = check_kalman_convergence(sys)
    assert v.result == "fails" and "not guaranteed" in v.diagnostics
    assert v.witnesses[0].lambda0 == pytest.approx(1.2)
    ss = steady_state(EstimationSetup.from_system(sys), "kalman", max_iters=10_000)
    assert not ss.converged


def test_kalman_precondition():
    s = Subsystem.make(1, [[0.5]], B_T=[[1.0]], D_d=[[1.0]], C_T=[[1.0]], D_w=[[1.0]])
    with pytest.raises(PreconditionError, match="D_d"):
        check_kalman_convergence(build_system([s], np.zeros((0, 0))))
