from fractions import Fraction as F

import numpy as np
import pytest

from fusedstrip.errors import InvalidParams, SingularParameter
from fusedstrip.vertex_weights import (ModelParams, check_stochastic,
                                       fused_K_braided, fused_K_composed,
                                       fused_Kbar_braided, fused_Kbar_composed,
                                       fused_R_braided, fused_R_composed,
                                       fused_R_explicit, model_weights,
                                       model_weights_unchecked, projection_pair,
                                       q_exchangeable_commutation_check,
                                       reflection_residual, reflection_residual_bar,
                                       unfused_K, unfused_Kbar, unfused_R,
                                       unfused_R_inv, yang_baxter_residual)

ADMISSIBLE_2 = ModelParams(I=2, q=0.5, kappa=0.5, aa=3.0, bb=3.0, cc=0.05, dd=0.05)


def test_unfused_R_values():
    R = unfused_R(F(1, 4), F(1, 2))
    assert sorted(R[1:3, 1:3].ravel()) == [F(1, 7), F(3, 7), F(4, 7), F(6, 7)]
    assert R[0, 0] == R[3, 3] == 1
    assert (R.sum(axis=0) == 1).all()


def test_unfused_R_pass_through_at_one():
    R = unfused_R(F(1), F(1, 3))
    assert R[1, 1] == 0 and R[2, 2] == 0
    assert R[1, 2] == 1 and R[2, 1] == 1


def test_unfused_R_inverse():
    u, q = F(3), F(1, 2)
    Ri = unfused_R_inv(u, q)
    assert (Ri.dot(unfused_R(u, q)) == np.eye(4, dtype=int)).all()
    assert (Ri == unfused_R(u, F(2))).all()
    assert sorted(Ri[1:3, 1:3].ravel()) == [F(1, 5), F(2, 5), F(3, 5), F(4, 5)]
    with pytest.raises(SingularParameter):
        unfused_R_inv(F(1, 2), F(1, 2))
    with pytest.raises(SingularParameter):
        unfused_R(F(2), F(1, 2))


def test_unfused_K_values():
    K = unfused_K(F(1, 2), F(5), F(1))
    assert K[0, 0] == F(2, 17) and K[1, 0] == F(15, 17)
    assert (K.sum(axis=0) == 1).all()
    assert (unfused_K(F(1), F(5), F(1)) == np.eye(2, dtype=int)).all()
    assert np.allclose(unfused_Kbar(2.0, 3.0, 0.1).astype(float),
                       unfused_K(2.0, -0.1, -3.0).astype(float), atol=1e-15)


def test_projection_pair():
    assert (projection_pair(1, F(1, 2)).pi == np.eye(2, dtype=int)).all()
    pp = projection_pair(2, F(1, 2))
    assert list(pp.pi_hat[:, 1]) == [0, F(2, 3), F(1, 3), 0]
    for I in range(1, 5):
        pp = projection_pair(I, F(1, 3))
        assert (pp.pi.dot(pp.pi_hat) == np.eye(I + 1, dtype=int)).all()
        F2 = pp.F.dot(pp.F)
        assert (F2 == pp.F).all()


def test_fused_reductions_at_spin_half():
    u, q = F(1, 3), F(1, 2)
    op = unfused_R(u, q)
    assert (fused_R_composed(u, q, 1).op == op).all()
    assert (fused_R_explicit(u, q, 1).op == op).all()
    assert (fused_R_braided(u, q, 1).op == op).all()
    assert (fused_K_composed(u, q, F(3), F(1, 10), 1).op == unfused_K(u, F(3), F(1, 10))).all()
    assert (fused_Kbar_composed(u, q, F(3), F(1, 10), 1).op == unfused_Kbar(u, F(3), F(1, 10))).all()


def test_conservation_exact():
    R = fused_R_composed(F(1, 3), F(1, 2), 2).entries
    for idx in np.ndindex(R.shape):
        a, b, c, d = idx
        if a + b != c + d:
            assert R[idx] == 0


@pytest.mark.parametrize("I,u", [(2, F(1, 3)), (3, F(1, 3)), (3, F(1, 5))])
def test_explicit_matches_composed(I, u):
    q = F(1, 2)
    assert (fused_R_explicit(u, q, I).entries == fused_R_composed(u, q, I).entries).all()


def test_explicit_removable_singularity():
    # at I=3, u=1/4, q=1/2 single terms of the closed form divide by zero;
    # the limit u -> 1/4 still matches the composed tensor
    q, u0 = F(1, 2), F(1, 4)
    with pytest.raises(SingularParameter):
        fused_R_explicit(u0, q, 3)
    C = fused_R_composed(u0, q, 3).entries
    gaps = []
    for eps in (F(1, 10 ** 6), F(1, 10 ** 9)):
        E = fused_R_explicit(u0 + eps, q, 3).entries
        gaps.append(max(abs(float(x - y)) for x, y in zip(E.ravel(), C.ravel())))
    assert gaps[1] < 1e-8 and gaps[1] < gaps[0] / 100


def test_braided_matches_composed():
    q = F(1, 2)
    assert (fused_R_braided(F(1, 3), q, 2).entries == fused_R_composed(F(1, 3), q, 2).entries).all()
    for I in (1, 2, 3):
        a = fused_K_braided(0.5, 0.5, 3.0, 0.1, I).entries.astype(float)
        b = fused_K_composed(0.5, 0.5, 3.0, 0.1, I).entries.astype(float)
        assert np.abs(a - b).max() < 1e-12
        a = fused_Kbar_braided(2.0, 0.5, 3.0, 0.1, I).entries.astype(float)
        b = fused_Kbar_composed(2.0, 0.5, 3.0, 0.1, I).entries.astype(float)
        assert np.abs(a - b).max() < 1e-12


def test_kbar_parameter_swap():
    # Kbar(u; q, bb, dd) = K(u; 1/q, aa=-dd, cc=-bb)
    u, q, bb, dd = F(1, 3), F(1, 4), F(3), F(1, 10)
    a = fused_Kbar_composed(u, q, bb, dd, 2).entries
    b = fused_K_composed(u, 1 / q, -dd, -bb, 2).entries
    assert (a == b).all()


def test_fused_K_column_sums():
    K = fused_K_composed(0.5, 0.5, 3.0, 0.1, 2)
    assert np.abs(K.entries.astype(float).sum(axis=1) - 1).max() < 1e-12


def test_model_weights_admissible():
    for params in (ModelParams(1, 0.5, 0.5, 3.0, 3.0, 0.1, 0.1), ADMISSIBLE_2):
        rep = check_stochastic(model_weights(params))
        assert rep["ok"], rep["failures"]
        assert rep["max_conservation_violation"] == 0.0


def test_model_weights_rejects_bad_params():
    bad = ModelParams(2, 0.5, 0.9, 3.0, 3.0, 0.05, 0.05)
    with pytest.raises(InvalidParams):
        model_weights(bad)
    rep = check_stochastic(model_weights_unchecked(bad))
    assert not rep["ok"] and not rep["nonnegative_ok"]


def test_commutation_invariance():
    r = q_exchangeable_commutation_check(1, 0.5, 0.3, 3.0, 0.1, 3.0, 0.1)
    assert r["R"] == r["K"] == r["Kbar"] == 0
    r = q_exchangeable_commutation_check(2, 0.5, 0.3, 3.0, 0.1, 3.0, 0.1)
    assert max(r["R"], r["K"], r["Kbar"]) < 1e-12
    r = q_exchangeable_commutation_check(2, F(1, 4), F(1, 9), F(3), F(1, 10), F(3), F(1, 10))
    assert r["R"] == r["K"] == r["Kbar"] == 0


def test_yang_baxter_and_reflection():
    rng = np.random.default_rng(7)
    for _ in range(10):
        x, y = rng.uniform(0.2, 0.9, 2)
        assert yang_baxter_residual(x, y, 0.5) < 1e-12
        assert reflection_residual(x, y, 0.5, 3.0, 0.1) < 1e-12
        # Kbar enters the model at 1/kappa > 1, away from its poles
        assert reflection_residual_bar(1 / x, 1 / y, 0.5, 3.0, 0.1) < 1e-12
