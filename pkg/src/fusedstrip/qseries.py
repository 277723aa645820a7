"""q-Pochhammer symbols, q-binomials and inversion statistics.

Every function works for two scalar backends: ``fractions.Fraction`` (exact)
and ``float`` (double precision).  Mixing an int with either is fine.
"""
from __future__ import annotations

from fractions import Fraction
from itertools import combinations
from typing import Sequence, Union

from .errors import NonConvergence, SingularParameter

Scalar = Union[int, float, Fraction]

POLE_TOL = 1e-10
INF_PRODUCT_TOL = 1e-16
INF_PRODUCT_CAP = 500


def is_exact(*values) -> bool:
    """True when every value is an int or a Fraction."""
    return all(isinstance(v, (int, Fraction)) for v in values)


def exact(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(x)


def div(a: Scalar, b: Scalar) -> Scalar:
    """a / b, staying exact when both operands are exact."""
    if is_exact(a, b):
        return Fraction(a) / Fraction(b)
    return a / b


def check_nonzero(x: Scalar, what: str = "denominator") -> Scalar:
    """Raise SingularParameter if x vanishes (exact) or is within POLE_TOL of 0."""
    if isinstance(x, (int, Fraction)):
        if x == 0:
            raise SingularParameter(f"{what} vanishes")
    elif abs(x) < POLE_TOL:
        raise SingularParameter(f"{what} = {x!r} is within {POLE_TOL} of a pole")
    return x


def q_pochhammer(x: Scalar, s: Scalar, n: int) -> Scalar:
    """(x; s)_n = prod_{j<n} (1 - x s^j)."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    out = 1
    term = x
    for _ in range(n):
        out *= 1 - term
        term *= s
    return out


def q_pochhammer_inf(x, q: float, tol: float = INF_PRODUCT_TOL, cap: int = INF_PRODUCT_CAP):
    """(x; q)_inf, truncated once |x q^k| < tol.

    Works for real or complex x.  Raises NonConvergence if ``cap`` factors are
    used before the factor deviation drops below ``tol``.
    """
    if not abs(q) < 1:
        raise ValueError("need |q| < 1")
    out = 1.0
    term = x
    for _ in range(cap):
        if abs(term) < tol:
            return out
        out *= 1 - term
        term *= q
    if abs(term) < tol:
        return out
    raise NonConvergence(f"(x;q)_inf with x={x!r}, q={q!r} did not converge in {cap} factors")


def q_pochhammer_inf_many(xs: Sequence, q: float, tol: float = INF_PRODUCT_TOL,
                          cap: int = INF_PRODUCT_CAP):
    """Product of (x; q)_inf over several x."""
    out = 1.0
    for x in xs:
        out *= q_pochhammer_inf(x, q, tol, cap)
    return out


def q_binomial(I: int, a: int, q: Scalar) -> Scalar:
    """Z_q(I; a) = (q;q)_I / ((q;q)_a (q;q)_{I-a}), via the closed form."""
    if not 0 <= a <= I:
        raise ValueError("need 0 <= a <= I")
    num = q_pochhammer(q, q, I)
    den = q_pochhammer(q, q, a) * q_pochhammer(q, q, I - a)
    check_nonzero(den, "(q;q)_a (q;q)_{I-a}")
    return div(num, den)


def binary_words(I: int, weight: int | None = None):
    """Binary words of length I in lexicographic order, optionally of fixed weight."""
    if weight is None:
        for k in range(2 ** I):
            yield tuple((k >> (I - 1 - j)) & 1 for j in range(I))
        return
    for ones in combinations(range(I), weight):
        w = [0] * I
        for j in ones:
            w[j] = 1
        yield tuple(w)


def inv_count(word: Sequence[int]) -> int:
    """Number of pairs i<j with word[i] > word[j]."""
    zeros_seen = 0
    total = 0
    for v in reversed(word):
        if v:
            total += zeros_seen
        else:
            zeros_seen += 1
    return total


def tinv_count(word: Sequence[int]) -> int:
    """Number of pairs i<j with word[i] < word[j]."""
    ones_seen = 0
    total = 0
    for v in reversed(word):
        if v:
            ones_seen += 1
        else:
            total += ones_seen
    return total


def q_binomial_words(I: int, a: int, q: Scalar, stat=inv_count) -> Scalar:
    """Z_q(I; a) as a sum of q^stat(w) over words of weight a."""
    return sum(q ** stat(w) for w in binary_words(I, a))


def phi_qinv(i: int, j: int, x: Scalar, y: Scalar, q: Scalar) -> Scalar:
    """Coefficient Phi_{1/q}(i, j; x, y) entering the closed form of the fused R matrix.

    (y/x)^i (x;1/q)_i (y/x;1/q)_{j-i} / (y;1/q)_j
      * (1/q;1/q)_j / ((1/q;1/q)_i (1/q;1/q)_{j-i})
    """
    if not 0 <= i <= j:
        raise ValueError("need 0 <= i <= j")
    check_nonzero(x, "x")
    p = div(1, q)
    ratio = div(y, x)
    den = q_pochhammer(y, p, j) * q_pochhammer(p, p, i) * q_pochhammer(p, p, j - i)
    check_nonzero(den, "Phi denominator")
    num = ratio ** i * q_pochhammer(x, p, i) * q_pochhammer(ratio, p, j - i) * q_pochhammer(p, p, j)
    return div(num, den)
