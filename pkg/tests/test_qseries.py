from fractions import Fraction as F

import numpy as np
import pytest

from fusedstrip.errors import NonConvergence, SingularParameter
from fusedstrip.qseries import (binary_words, inv_count, phi_qinv, q_binomial,
                                q_binomial_words, q_pochhammer, q_pochhammer_inf,
                                tinv_count)


def test_pochhammer_examples():
    assert q_pochhammer(F(7, 3), F(5), 0) == 1
    assert q_pochhammer(F(1, 2), F(1, 2), 2) == F(3, 8)
    assert q_pochhammer(1, F(1, 3), 3) == 0


def test_pochhammer_recursion():
    rng = np.random.default_rng(1)
    for _ in range(20):
        x, s = rng.uniform(-2, 2, 2)
        n = int(rng.integers(0, 8))
        assert q_pochhammer(x, s, n + 1) == pytest.approx(q_pochhammer(x, s, n) * (1 - x * s ** n), rel=1e-13)


def test_infinite_pochhammer():
    assert q_pochhammer_inf(0.0, 0.5) == 1.0
    brute = np.prod(1 - 0.5 * 0.5 ** np.arange(10_000))
    assert q_pochhammer_inf(0.5, 0.5) == pytest.approx(brute, rel=1e-15)
    assert abs(q_pochhammer_inf(0.5, 0.5) - 0.2887880950866) < 1e-12


def test_infinite_pochhammer_cap():
    with pytest.raises(NonConvergence):
        q_pochhammer_inf(2.0, 0.99)
    val = q_pochhammer_inf(2.0, 0.99, cap=5000)
    assert np.isfinite(val)


def test_q_binomial_examples():
    q = F(1, 2)
    assert q_binomial(2, 1, q) == F(3, 2)
    assert q_binomial(3, 0, q) == 1
    assert q_binomial(3, 2, q) == F(7, 4)
    assert q_binomial_words(3, 2, q) == F(7, 4)


def test_q_binomial_routes_agree_exactly():
    q = F(2, 7)
    for I in range(1, 7):
        for a in range(I + 1):
            closed = q_binomial(I, a, q)
            assert closed == q_binomial_words(I, a, q, inv_count)
            assert closed == q_binomial_words(I, a, q, tinv_count)


def test_inversion_counts():
    assert (inv_count((1, 0)), tinv_count((1, 0))) == (1, 0)
    assert (inv_count((0, 1, 0)), tinv_count((0, 1, 0))) == (1, 1)
    assert (inv_count((0,) * 5), tinv_count((0,) * 5)) == (0, 0)


def test_binary_words_order():
    assert list(binary_words(2)) == [(0, 0), (0, 1), (1, 0), (1, 1)]
    assert list(binary_words(3, 2)) == [(1, 1, 0), (1, 0, 1), (0, 1, 1)] or \
        sorted(binary_words(3, 2)) == [(0, 1, 1), (1, 0, 1), (1, 1, 0)]


def test_phi_examples():
    x, y, q = F(1, 3), F(1, 9), F(1, 2)
    assert phi_qinv(0, 0, x, y, q) == 1
    assert phi_qinv(1, 1, x, y, q) == (y / x) * (1 - x) / (1 - y)
    val = phi_qinv(1, 2, x, y, q)
    assert isinstance(val, F) and val == F(9, 14)


def test_phi_singular():
    with pytest.raises(SingularParameter):
        phi_qinv(0, 1, F(1, 2), F(1), F(1, 2))
