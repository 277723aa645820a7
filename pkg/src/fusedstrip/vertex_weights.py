"""Unfused and fused R/K matrices and the stochastic weights of the strip model.

Conventions
-----------
Operators act on column vectors.  A two-site operator on C^n (x) C^n is an
(n*n, n*n) matrix ``op[(c, d), (a, b)]``: the first tensor factor carries the
vertical line (a in, c out), the second the horizontal line (b in, d out).
``RTensor.entries[a, b, c, d]`` is the same number, i.e. the probability of
outgoing (c, d) given incoming (a, b).  A one-site operator ``op[out, in]`` is
stored in ``KMatrix.entries[in, out]``.

Spaces (C^2)^{(x)n} are flattened row-major with leg 1 slowest.  All builders
accept exact ``Fraction`` scalars (object arrays) or floats.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import InvalidParams
from .qseries import (binary_words, check_nonzero, div, inv_count, is_exact,
                      phi_qinv, q_binomial)


# ---------------------------------------------------------------- helpers

def _array(rows, exact: bool) -> np.ndarray:
    if exact:
        return np.array([[Fraction(v) for v in r] for r in rows], dtype=object)
    return np.array(rows, dtype=float)


def _zeros(shape, exact: bool) -> np.ndarray:
    if exact:
        out = np.empty(shape, dtype=object)
        out.fill(Fraction(0))
        return out
    return np.zeros(shape)


def _eye(n: int, exact: bool) -> np.ndarray:
    out = _zeros((n, n), exact)
    for i in range(n):
        out[i, i] = Fraction(1) if exact else 1.0
    return out


def qpow_half(q, k2: int):
    """q**(k2/2).  Exact only if q is a square of a rational when k2 is odd."""
    if k2 % 2 == 0:
        return q ** (k2 // 2) if not is_exact(q) else Fraction(q) ** (k2 // 2)
    if is_exact(q):
        fq = Fraction(q)
        rn, rd = math.isqrt(fq.numerator), math.isqrt(fq.denominator)
        if rn * rn != fq.numerator or rd * rd != fq.denominator:
            raise ValueError(f"q={q} has no rational square root; use floats")
        return Fraction(rn, rd) ** k2
    return q ** (k2 / 2)


def apply_local(op: np.ndarray, legs: Sequence[int], nlegs: int, mat: np.ndarray) -> np.ndarray:
    """Left-multiply ``mat`` (2^nlegs rows) by ``op`` acting on the given 1-based legs."""
    k = len(legs)
    m = mat.shape[1]
    t = mat.reshape((2,) * nlegs + (m,))
    src = [l - 1 for l in legs]
    t = np.moveaxis(t, src, list(range(k)))
    shape = t.shape
    t = (op @ t.reshape(2 ** k, -1)).reshape(shape)
    t = np.moveaxis(t, list(range(k)), src)
    return t.reshape(2 ** nlegs, m)


def permute_legs(perm: Sequence[int], nlegs: int, mat: np.ndarray) -> np.ndarray:
    """Apply the operator sending leg i to position perm[i] (1-based) to ``mat``."""
    m = mat.shape[1]
    t = mat.reshape((2,) * nlegs + (m,))
    t = np.moveaxis(t, list(range(nlegs)), [p - 1 for p in perm])
    return t.reshape(2 ** nlegs, m)


def swap_blocks(n: int, exact: bool) -> np.ndarray:
    """P on C^n (x) C^n."""
    p = _zeros((n * n, n * n), exact)
    one = Fraction(1) if exact else 1.0
    for i in range(n):
        for j in range(n):
            p[j * n + i, i * n + j] = one
    return p


# ---------------------------------------------------------------- types

@dataclass(frozen=True)
class RTensor:
    I: int
    entries: np.ndarray  # (I+1,)*4, [a, b, c, d]

    @property
    def op(self) -> np.ndarray:
        n = self.I + 1
        return self.entries.transpose(2, 3, 0, 1).reshape(n * n, n * n)

    @classmethod
    def from_op(cls, op: np.ndarray, I: int) -> "RTensor":
        n = I + 1
        return cls(I, np.ascontiguousarray(op.reshape(n, n, n, n).transpose(2, 3, 0, 1)))


@dataclass(frozen=True)
class KMatrix:
    I: int
    entries: np.ndarray  # (I+1, I+1), [in, out]
    side: str = "left"

    @property
    def op(self) -> np.ndarray:
        return self.entries.T

    @classmethod
    def from_op(cls, op: np.ndarray, I: int, side: str = "left") -> "KMatrix":
        return cls(I, np.ascontiguousarray(op.T), side)


@dataclass(frozen=True)
class ProjectionPair:
    I: int
    q: object
    pi: np.ndarray       # (I+1, 2^I)
    pi_hat: np.ndarray   # (2^I, I+1)

    @property
    def F(self) -> np.ndarray:
        return self.pi_hat @ self.pi


@dataclass(frozen=True)
class ModelParams:
    I: int
    q: float
    kappa: float
    aa: float
    bb: float
    cc: float
    dd: float

    def violations(self) -> list[str]:
        I, q, k = self.I, self.q, self.kappa
        out = []
        if not (isinstance(I, (int, np.integer)) and I >= 1):
            out.append("I must be a positive integer")
            return out
        if not 0 < q < 1:
            out.append("need 0 < q < 1")
            return out
        if not 0 < k < q ** ((I - 1) / 2):
            out.append(f"need 0 < kappa < q^((I-1)/2) = {q ** ((I - 1) / 2):.6g}")
        for name in ("aa", "bb", "cc", "dd"):
            if not getattr(self, name) > 0:
                out.append(f"need {name} > 0")
        bound = q ** ((1 - I) / 2) / k if k > 0 else math.inf
        if not self.aa - self.cc > bound:
            out.append(f"need aa - cc > q^((1-I)/2)/kappa = {bound:.6g}")
        if not self.bb - self.dd > bound:
            out.append(f"need bb - dd > q^((1-I)/2)/kappa = {bound:.6g}")
        return out

    def validate(self) -> "ModelParams":
        bad = self.violations()
        if bad:
            raise InvalidParams("; ".join(bad))
        return self


@dataclass(frozen=True)
class FusedWeights:
    I: int
    R: RTensor
    left: KMatrix
    right: KMatrix
    params: ModelParams | None = field(default=None, compare=False)


# ---------------------------------------------------------------- unfused

def unfused_R(u, q) -> np.ndarray:
    """Spin-1/2 stochastic R(u) as a 4x4 operator on basis 00, 01, 10, 11."""
    den = check_nonzero(1 - q * u, "1 - q u")
    ex = is_exact(u, q)
    z, o = 0, 1
    return _array([
        [o, z, z, z],
        [z, div(q * (1 - u), den), div(u * (1 - q), den), z],
        [z, div(1 - q, den), div(1 - u, den), z],
        [z, z, z, o],
    ], ex)


def unfused_R_inv(u, q) -> np.ndarray:
    """Inverse of R(u); equals R(u) with q replaced by 1/q."""
    den = check_nonzero(q - u, "q - u")
    ex = is_exact(u, q)
    z, o = 0, 1
    return _array([
        [o, z, z, z],
        [z, div(1 - u, den), div(u * (q - 1), den), z],
        [z, div(q - 1, den), div(q * (1 - u), den), z],
        [z, z, z, o],
    ], ex)


def unfused_K(u, aa, cc) -> np.ndarray:
    """Left boundary K(u) as a 2x2 operator [out, in]."""
    den = check_nonzero(cc * u * u + u - aa, "cc u^2 + u - aa")
    ex = is_exact(u, aa, cc)
    return _array([
        [div((cc - aa) * u * u + u, den), div(cc * (u * u - 1), den)],
        [div(aa * (u * u - 1), den), div(cc - aa + u, den)],
    ], ex)


def unfused_Kbar(u, bb, dd) -> np.ndarray:
    """Right boundary Kbar(u) as a 2x2 operator [out, in]."""
    den = check_nonzero(bb * u * u - u - dd, "bb u^2 - u - dd")
    ex = is_exact(u, bb, dd)
    return _array([
        [div((bb - dd) * u * u - u, den), div(bb * (u * u - 1), den)],
        [div(dd * (u * u - 1), den), div(bb - dd - u, den)],
    ], ex)


# ---------------------------------------------------------------- projections

def projection_pair(I: int, q) -> ProjectionPair:
    ex = is_exact(q)
    n = I + 1
    pi = _zeros((n, 2 ** I), ex)
    pi_hat = _zeros((2 ** I, n), ex)
    one = Fraction(1) if ex else 1.0
    Z = [q_binomial(I, a, q) for a in range(n)]
    for k, w in enumerate(binary_words(I)):
        a = sum(w)
        pi[a, k] = one
        pi_hat[k, a] = div(q ** inv_count(w), Z[a]) if ex else q ** inv_count(w) / Z[a]
    return ProjectionPair(I, q, pi, pi_hat)


def _reverse_perm(I: int) -> list[int]:
    return [I + 1 - i for i in range(1, I + 1)]


def _run(factors: Sequence[tuple[np.ndarray, Sequence[int]]], nlegs: int, mat: np.ndarray) -> np.ndarray:
    """Apply a product written left-to-right; the rightmost factor acts first."""
    for op, legs in reversed(factors):
        if op is None:  # leg permutation
            mat = permute_legs(legs, nlegs, mat)
        else:
            mat = apply_local(op, legs, nlegs, mat)
    return mat


def _spectral(u, q, k2: int):
    """u * q^(k2/2)."""
    return u * qpow_half(q, k2)


# ---------------------------------------------------------------- composed fusion

def _R_factors(u, q, I):
    out = []
    for a in range(I, 0, -1):
        for b in range(1, I + 1):
            out.append((unfused_R(_spectral(u, q, 2 * (b - a)), q), (b, a + I)))
    return out


def _K_factors(u, q, aa, cc, I):
    out = [(None, _reverse_perm(I))]
    for a in range(I, 0, -1):
        out.append((unfused_K(_spectral(u, q, I + 1 - 2 * a), aa, cc), (a,)))
        for b in range(a - 1, 0, -1):
            out.append((unfused_R(_spectral(u * u, q, 2 * (I + 1 - a - b)), q), (b, a)))
    return out


def _Kbar_factors(u, q, bb, dd, I):
    out = [(None, _reverse_perm(I))]
    for a in range(1, I + 1):
        out.append((unfused_Kbar(_spectral(u, q, I + 1 - 2 * a), bb, dd), (a,)))
        for b in range(a + 1, I + 1):
            out.append((unfused_R_inv(_spectral(u * u, q, 2 * (I + 1 - a - b)), q), (b, a)))
    return out


def _fuse_two_site(factors, q, I, post: np.ndarray | None = None) -> np.ndarray:
    ex = is_exact(q) and all(op is None or op.dtype == object for op, _ in factors)
    pp = projection_pair(I, q)
    n = I + 1
    start = np.kron(pp.pi_hat, pp.pi_hat) if not ex else _kron_obj(pp.pi_hat, pp.pi_hat)
    mat = _run(factors, 2 * I, start)
    proj = np.kron(pp.pi, pp.pi) if not ex else _kron_obj(pp.pi, pp.pi)
    op = proj @ mat
    if post is not None:
        op = post @ op
    return op.reshape(n * n, n * n)


def _fuse_one_site(factors, q, I) -> np.ndarray:
    pp = projection_pair(I, q)
    mat = _run(factors, I, pp.pi_hat)
    return pp.pi @ mat


def _kron_obj(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = np.empty((a.shape[0] * b.shape[0], a.shape[1] * b.shape[1]), dtype=object)
    for i in range(a.shape[0]):
        for j in range(a.shape[1]):
            out[i * b.shape[0]:(i + 1) * b.shape[0], j * b.shape[1]:(j + 1) * b.shape[1]] = a[i, j] * b
    return out


def _coerce(u, q):
    """Promote to float if the pair is not fully exact."""
    if is_exact(u, q):
        return Fraction(u), Fraction(q)
    return float(u), float(q)


def fused_R_composed(u, q, I: int) -> RTensor:
    """Fused R^I(u) from the I x I grid of spin-1/2 R factors."""
    u, q = _coerce(u, q)
    return RTensor.from_op(_fuse_two_site(_R_factors(u, q, I), q, I), I)


def fused_K_composed(u, q, aa, cc, I: int) -> KMatrix:
    vals = (u, q, aa, cc)
    if not is_exact(*vals):
        u, q, aa, cc = map(float, vals)
    return KMatrix.from_op(_fuse_one_site(_K_factors(u, q, aa, cc, I), q, I), I, "left")


def fused_Kbar_composed(u, q, bb, dd, I: int) -> KMatrix:
    vals = (u, q, bb, dd)
    if not is_exact(*vals):
        u, q, bb, dd = map(float, vals)
    return KMatrix.from_op(_fuse_one_site(_Kbar_factors(u, q, bb, dd, I), q, I), I, "right")


# ---------------------------------------------------------------- explicit formula

def fused_R_explicit(u, q, I: int) -> RTensor:
    """Closed-form fused R^I(u) built from the Phi_{1/q} coefficients."""
    u, q = _coerce(u, q)
    ex = is_exact(u, q)
    n = I + 1
    t = _zeros((n, n, n, n), ex)
    qI = q ** I
    for a in range(n):
        for b in range(n):
            for c in range(n):
                d = a + b - c
                if not 0 <= d <= I:
                    continue
                s = sum(phi_qinv(c - p, c + d - p, u, qI * u, q) * phi_qinv(p, b, div(qI, u), qI, q)
                        for p in range(min(b, c) + 1))
                t[a, b, c, d] = u ** (d - b) * q ** ((d - a) * I) * s
    return RTensor(I, t)


# ---------------------------------------------------------------- braided forms

def fused_R_braided(u, q, I: int) -> RTensor:
    """Fused R^I(u) from nearest-neighbour braid factors; returns P times the braided operator."""
    u, q = _coerce(u, q)
    ex = is_exact(u, q)
    P2 = swap_blocks(2, ex)
    factors = []
    for a in range(I, 0, -1):
        for b in range(a, a + I):
            factors.append((P2 @ unfused_R(_spectral(u, q, 2 * (b + 1 - 2 * a)), q), (b, b + 1)))
    op = _fuse_two_site(factors, q, I, post=swap_blocks(I + 1, ex))
    return RTensor.from_op(op, I)


def fused_K_braided(u, q, aa, cc, I: int) -> KMatrix:
    vals = (u, q, aa, cc)
    if not is_exact(*vals):
        u, q, aa, cc = map(float, vals)
    ex = is_exact(*vals)
    P2 = swap_blocks(2, ex)
    factors = []
    for a in range(I, 0, -1):
        factors.append((unfused_K(_spectral(u, q, I + 1 - 2 * a), aa, cc), (1,)))
        for b in range(a - 1, 0, -1):
            x = _spectral(u * u, q, 2 * (I + 1 - a - b))
            factors.append((P2 @ unfused_R(x, q), (a - b, a - b + 1)))
    return KMatrix.from_op(_fuse_one_site(factors, q, I), I, "left")


def fused_Kbar_braided(u, q, bb, dd, I: int) -> KMatrix:
    vals = (u, q, bb, dd)
    if not is_exact(*vals):
        u, q, bb, dd = map(float, vals)
    ex = is_exact(*vals)
    P2 = swap_blocks(2, ex)
    factors = []
    for a in range(1, I + 1):
        factors.append((unfused_Kbar(_spectral(u, q, I + 1 - 2 * a), bb, dd), (I,)))
        for b in range(a + 1, I + 1):
            x = _spectral(u * u, q, 2 * (I + 1 - a - b))
            # (P R)^{-1} = R^{-1} P
            factors.append((unfused_R_inv(x, q) @ P2, (I + a - b, I + a - b + 1)))
    return KMatrix.from_op(_fuse_one_site(factors, q, I), I, "right")


# ---------------------------------------------------------------- model weights

def model_weights(params: ModelParams, builder: str = "composed") -> FusedWeights:
    """Stochastic weights of the fused strip model.

    Bulk: R^{c,d}_{a,b} = R^I(kappa^2)^{d,c}_{b,a}; left: K^I(kappa); right: Kbar^I(1/kappa).
    """
    params.validate()
    return model_weights_unchecked(params, builder)


def model_weights_unchecked(params: ModelParams, builder: str = "composed") -> FusedWeights:
    """Same as model_weights but without the admissibility check (for probing)."""
    I, q, k = params.I, float(params.q), float(params.kappa)
    if builder == "explicit":
        Rf = fused_R_explicit(k * k, q, I)
    else:
        Rf = fused_R_composed(k * k, q, I)
    R = RTensor(I, np.ascontiguousarray(Rf.entries.transpose(1, 0, 3, 2)))
    left = fused_K_composed(k, q, params.aa, params.cc, I)
    right = fused_Kbar_composed(1.0 / k, q, params.bb, params.dd, I)
    return FusedWeights(I, R, left, KMatrix(I, right.entries, "right"), params)


def check_stochastic(weights: FusedWeights, tol: float = 1e-12) -> dict:
    """Nonnegativity, row sums, conservation zeros and strict positivity of allowed entries."""
    I = weights.I
    n = I + 1
    R = np.asarray(weights.R.entries, dtype=float)
    KL = np.asarray(weights.left.entries, dtype=float)
    KR = np.asarray(weights.right.entries, dtype=float)
    allowed = np.zeros((n,) * 4, dtype=bool)
    for a in range(n):
        for b in range(n):
            for c in range(n):
                d = a + b - c
                if 0 <= d <= I:
                    allowed[a, b, c, d] = True
    report = {"I": I, "failures": []}

    def worst(arr, mask, key):
        vals = np.where(mask, arr, np.inf)
        idx = np.unravel_index(np.argmin(vals), arr.shape)
        return {"object": key, "index": [int(i) for i in idx], "value": float(arr[idx])}

    row_err = max(np.max(np.abs(R.sum(axis=(2, 3)) - 1)),
                  np.max(np.abs(KL.sum(axis=1) - 1)),
                  np.max(np.abs(KR.sum(axis=1) - 1)))
    report["max_row_sum_error"] = float(row_err)
    report["row_sums_ok"] = bool(row_err <= tol)
    cons = float(np.max(np.abs(R[~allowed]))) if (~allowed).any() else 0.0
    report["max_conservation_violation"] = cons
    report["conservation_ok"] = cons == 0.0
    # rows with a single allowed outcome are forced to 1
    forced = allowed & (allowed.sum(axis=(2, 3), keepdims=True) == 1)
    free = allowed & ~forced
    mins = {"R": float(R[allowed].min()), "left": float(KL.min()), "right": float(KR.min())}
    maxs = {"R": float(R[free].max()) if free.any() else 0.0,
            "left": float(KL.max()), "right": float(KR.max())}
    report["min_allowed_entry"] = mins
    report["max_unforced_entry"] = maxs
    report["forced_entries_exact"] = bool(np.all(R[forced] == 1.0))
    report["nonnegative_ok"] = min(mins.values()) >= -tol
    report["positive_ok"] = min(mins.values()) > 0 and max(maxs.values()) < 1
    if not report["row_sums_ok"]:
        report["failures"].append({"check": "row_sums", "error": float(row_err)})
    if not report["conservation_ok"]:
        report["failures"].append({"check": "conservation", "error": cons})
    if not report["nonnegative_ok"] or not report["positive_ok"]:
        for key, arr, mask in (("R", R, allowed), ("left", KL, np.ones_like(KL, bool)),
                               ("right", KR, np.ones_like(KR, bool))):
            w = worst(arr, mask, key)
            upper = arr[free].max() if key == "R" and free.any() else arr[mask].max()
            if w["value"] <= 0:
                report["failures"].append({"check": "negativity" if w["value"] < 0 else "positivity", **w})
            elif upper >= 1:
                report["failures"].append({"check": "positivity", "object": key, "value": float(upper)})
    report["ok"] = not report["failures"]
    return report


# ---------------------------------------------------------------- invariance check

def composed_operator_R(u, q, I: int) -> np.ndarray:
    """The unprojected operator on (C^2)^{(x)2I}."""
    u, q = _coerce(u, q)
    return _run(_R_factors(u, q, I), 2 * I, _eye(4 ** I, is_exact(u, q)))


def composed_operator_K(u, q, aa, cc, I: int) -> np.ndarray:
    return _run(_K_factors(u, q, aa, cc, I), I, _eye(2 ** I, is_exact(u, q, aa, cc)))


def composed_operator_Kbar(u, q, bb, dd, I: int) -> np.ndarray:
    return _run(_Kbar_factors(u, q, bb, dd, I), I, _eye(2 ** I, is_exact(u, q, bb, dd)))


def _maxabs(m: np.ndarray):
    if m.dtype == object:
        return max((abs(v) for v in m.flat), default=Fraction(0))
    return float(np.max(np.abs(m))) if m.size else 0.0


def q_exchangeable_commutation_check(I: int, q, u, aa, cc, bb, dd) -> dict:
    """Invariance of the q-exchangeable subspace under the unprojected fused operators.

    The keys ``R``, ``K``, ``Kbar`` hold max |X F - F X F| (zero iff X maps the
    image of F into itself).  The raw commutators max |X F - F X| are returned
    under ``commutator_*``; they do not vanish in general.
    """
    if not is_exact(q, u, aa, cc, bb, dd):
        q, u, aa, cc, bb, dd = map(float, (q, u, aa, cc, bb, dd))
    pp = projection_pair(I, q)
    F = pp.F
    FF = _kron_obj(F, F) if F.dtype == object else np.kron(F, F)
    ops = {
        "R": (composed_operator_R(u, q, I), FF),
        "K": (composed_operator_K(u, q, aa, cc, I), F),
        "Kbar": (composed_operator_Kbar(u, q, bb, dd, I), F),
    }
    out = {}
    for key, (X, P) in ops.items():
        XP = X @ P
        out[key] = _maxabs(XP - P @ XP)
        out["commutator_" + key] = _maxabs(XP - P @ X)
    return out


# ---------------------------------------------------------------- Yang-Baxter / reflection

def _embed3(op4: np.ndarray, i: int, j: int) -> np.ndarray:
    return apply_local(op4, (i, j), 3, np.eye(8))


def yang_baxter_residual(x: float, y: float, q: float) -> float:
    """max |R12(x) R13(xy) R23(y) - R23(y) R13(xy) R12(x)| for the spin-1/2 R."""
    R12 = _embed3(unfused_R(x, q), 1, 2)
    R13 = _embed3(unfused_R(x * y, q), 1, 3)
    R23 = _embed3(unfused_R(y, q), 2, 3)
    return float(np.max(np.abs(R12 @ R13 @ R23 - R23 @ R13 @ R12)))


def _residual(lhs: np.ndarray, rhs: np.ndarray, relative: bool) -> float:
    r = float(np.max(np.abs(lhs - rhs)))
    return r / max(float(np.max(np.abs(lhs))), 1e-300) if relative else r


def reflection_residual(x: float, y: float, q: float, aa: float, cc: float, relative: bool = False) -> float:
    """max |K2(y) R12(xy) K1(x) R21(x/y) - R12(x/y) K1(x) R21(xy) K2(y)|."""
    def two(op, legs):
        return apply_local(op, legs, 2, np.eye(4))
    K1 = two(unfused_K(x, aa, cc), (1,))
    K2 = two(unfused_K(y, aa, cc), (2,))
    R12 = lambda z: two(unfused_R(z, q), (1, 2))
    R21 = lambda z: two(unfused_R(z, q), (2, 1))
    lhs = K2 @ R12(x * y) @ K1 @ R21(x / y)
    rhs = R12(x / y) @ K1 @ R21(x * y) @ K2
    return _residual(lhs, rhs, relative)


def reflection_residual_bar(x: float, y: float, q: float, bb: float, dd: float, relative: bool = False) -> float:
    """Same reflection equation for Kbar."""
    def two(op, legs):
        return apply_local(op, legs, 2, np.eye(4))
    K1 = two(unfused_Kbar(x, bb, dd), (1,))
    K2 = two(unfused_Kbar(y, bb, dd), (2,))
    R12 = lambda z: two(unfused_R(z, q), (1, 2))
    R21 = lambda z: two(unfused_R(z, q), (2, 1))
    lhs = K2 @ R12(x * y) @ K1 @ R21(x / y)
    rhs = R12(x / y) @ K1 @ R21(x * y) @ K2
    return _residual(lhs, rhs, relative)
