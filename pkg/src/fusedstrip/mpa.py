"""Matrix product ansatz for the stationary measure of the fused strip model.

The quadratic algebra is represented by tridiagonal matrices built from the
Jacobi matrix of Askey-Wilson polynomials (Koekoek-Swarttouw normalization).
With parameters (a, b, c, d) = (C sqrt(t), D sqrt(t), A / sqrt(t), B / sqrt(t))
the matrix sqrt(t) * J is affine in t, and

    sqrt(1-q) * (x + t y) = sqrt(t) * J(t),

gives x (constant part) and y (slope) with xy - q yx = Id and both boundary
vectors equal to the first coordinate vector.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (DegenerateBoundary, OutOfRange, RepConstructionFailure,
                     WindowTooSmall, ZeroNormalizer)
from .qseries import binary_words, check_nonzero
from .strip_model import UP_LABEL, DownRightPath, outgoing_labels
from .vertex_weights import (FusedWeights, ModelParams, fused_K_composed,
                             fused_Kbar_composed, fused_R_composed,
                             model_weights)

REP_TOL = 1e-10


# ---------------------------------------------------------------- parameters

@dataclass(frozen=True)
class DEHPParams:
    alpha: float
    beta: float
    gamma: float
    delta: float
    q: float

    def violations(self) -> list[str]:
        out = []
        if not self.alpha > 0:
            out.append("alpha > 0")
        if not self.beta > 0:
            out.append("beta > 0")
        if not self.gamma >= 0:
            out.append("gamma >= 0")
        if not self.delta >= 0:
            out.append("delta >= 0")
        if not 0 <= self.q < 1:
            out.append("0 <= q < 1")
        return out


@dataclass(frozen=True)
class ABCDParams:
    A: float
    B: float
    C: float
    D: float
    q: float

    def violations(self) -> list[str]:
        out = []
        if not self.A > 0:
            out.append("A > 0")
        if not self.C > 0:
            out.append("C > 0")
        if not -1 < self.B <= 0:
            out.append("-1 < B <= 0")
        if not -1 < self.D <= 0:
            out.append("-1 < D <= 0")
        if not 0 <= self.q < 1:
            out.append("0 <= q < 1")
        return out

    @property
    def fan(self) -> bool:
        """True when AC < 1."""
        return self.A * self.C < 1


def dehp_from_boundary(aa, bb, cc, dd, q) -> DEHPParams:
    """Rates (alpha, beta, gamma, delta) of the boundary relations in D, E form."""
    sl, sr = aa - cc - 1, bb - dd - 1
    if sl == 0 or sr == 0:
        raise DegenerateBoundary("aa - cc = 1 or bb - dd = 1")
    return DEHPParams((1 - q) * aa / sl, (1 - q) * bb / sr,
                      (1 - q) * cc / sl, (1 - q) * dd / sr, q)


def boundary_from_dehp(p: DEHPParams) -> tuple[float, float, float, float]:
    """Inverse of dehp_from_boundary: returns (aa, bb, cc, dd)."""
    def side(u, v):
        r = (u - v) / (1 - p.q)
        if r == 1:
            raise DegenerateBoundary("boundary rates give an infinite difference")
        s = r / (r - 1)
        return u * (s - 1) / (1 - p.q), v * (s - 1) / (1 - p.q)
    aa, cc = side(p.alpha, p.gamma)
    bb, dd = side(p.beta, p.delta)
    return aa, bb, cc, dd


def kappa_pm(u, v, q) -> tuple[float, float]:
    s = 1 - q - u + v
    root = math.sqrt(s * s + 4 * u * v)
    return (s + root) / (2 * u), (s - root) / (2 * u)


def abcd_from_rates(p: DEHPParams) -> ABCDParams:
    bad = p.violations()
    if bad:
        raise OutOfRange("rates violate " + ", ".join(bad))
    A, B = kappa_pm(p.beta, p.delta, p.q)
    C, D = kappa_pm(p.alpha, p.gamma, p.q)
    return ABCDParams(A, B, C, D, p.q)


def rates_from_abcd(p: ABCDParams) -> DEHPParams:
    bad = p.violations()
    if bad:
        raise OutOfRange("ABCD parameters violate " + ", ".join(bad))
    beta = (1 - p.q) / ((1 + p.A) * (1 + p.B))
    alpha = (1 - p.q) / ((1 + p.C) * (1 + p.D))
    return DEHPParams(alpha, beta, -p.C * p.D * alpha, -p.A * p.B * beta, p.q)


def abcd_from_params(params: ModelParams) -> ABCDParams:
    q = float(params.q)
    return abcd_from_rates(dehp_from_boundary(float(params.aa), float(params.bb),
                                              float(params.cc), float(params.dd), q))


# ---------------------------------------------------------------- representation

@dataclass(frozen=True)
class BandedRep:
    dim: int
    q: float
    x: np.ndarray
    y: np.ndarray
    abcd: ABCDParams
    dehp: DEHPParams

    @property
    def D(self) -> np.ndarray:
        return np.eye(self.dim) / (1 - self.q) + self.x / math.sqrt(1 - self.q)

    @property
    def E(self) -> np.ndarray:
        return np.eye(self.dim) / (1 - self.q) + self.y / math.sqrt(1 - self.q)

    @property
    def d(self) -> np.ndarray:
        return math.sqrt(1 - self.q) * self.x

    @property
    def e(self) -> np.ndarray:
        return math.sqrt(1 - self.q) * self.y

    @property
    def W(self) -> np.ndarray:
        w = np.zeros(self.dim)
        w[0] = 1.0
        return w

    @property
    def V(self) -> np.ndarray:
        return self.W

    def boundary(self) -> tuple[float, float, float, float]:
        return boundary_from_dehp(self.dehp)


def _jacobi_affine(a, b, c, d, q, M):
    """Return (J0, J1) with sqrt(t) J(a sqrt(t), b sqrt(t), c/sqrt(t), d/sqrt(t)) = J0 + t J1."""
    abcd = a * b * c * d
    J0, J1 = np.zeros((M, M)), np.zeros((M, M))
    for n in range(M):
        if n == 0:
            k = (1 - a * c) * (1 - a * d) / (1 - abcd)
        else:
            num = (1 - a * c * q ** n) * (1 - a * d * q ** n) * (1 - abcd * q ** (n - 1))
            den = (1 - abcd * q ** (2 * n - 1)) * (1 - abcd * q ** (2 * n))
            k = num / check_nonzero(den, "Askey-Wilson recurrence denominator")
        up0, up1 = k / a, -b * q ** n * k
        lo0 = lo1 = 0.0
        if n >= 1:
            num = a * (1 - q ** n) * (1 - b * c * q ** (n - 1)) * (1 - b * d * q ** (n - 1))
            den = (1 - abcd * q ** (2 * n - 2)) * (1 - abcd * q ** (2 * n - 1))
            g = num / check_nonzero(den, "Askey-Wilson recurrence denominator")
            lo0, lo1 = -c * d * q ** (n - 1) * g, g
            J0[n, n - 1], J1[n, n - 1] = lo0, lo1
        if n + 1 < M:
            J0[n, n + 1], J1[n, n + 1] = up0, up1
        J0[n, n] = 1 / a - up0 - lo0
        J1[n, n] = a - up1 - lo1
    return J0, J1


def _balance(x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Diagonal similarity equalizing off-diagonal magnitudes; first basis vector unscaled."""
    M = x.shape[0]
    s = np.ones(M)
    for n in range(M - 1):
        up = abs(x[n, n + 1]) + abs(y[n, n + 1])
        lo = abs(x[n + 1, n]) + abs(y[n + 1, n])
        s[n + 1] = s[n] * (math.sqrt(up / lo) if up > 0 and lo > 0 else 1.0)
    S, Si = s[:, None], 1.0 / s[None, :]
    return x * S * Si, y * S * Si


def usw_rep(abcd: ABCDParams, dim: int, tol: float = REP_TOL, balance: bool = True) -> BandedRep:
    """Tridiagonal representation of xy - q yx = Id with both boundary vectors e_0."""
    if dim < 3:
        raise ValueError("dim must be at least 3")
    bad = abcd.violations()
    if bad:
        raise OutOfRange("ABCD parameters violate " + ", ".join(bad))
    q = abcd.q
    J0, J1 = _jacobi_affine(abcd.C, abcd.D, abcd.A, abcd.B, q, dim)
    s = math.sqrt(1 - q)
    x, y = J0 / s, J1 / s
    if balance:
        x, y = _balance(x, y)
    rep = BandedRep(dim, q, x, y, abcd, rates_from_abcd(abcd))
    res = dehp_residuals(rep)
    worst = max(res.values())
    if not np.isfinite(worst) or worst > tol:
        raise RepConstructionFailure(f"representation residual {worst:.3e} exceeds {tol:.1e}")
    return rep


def usw_rep_for(params: ModelParams, dim: int, tol: float = REP_TOL) -> BandedRep:
    return usw_rep(abcd_from_params(params), dim, tol)


def _window(rep: BandedRep) -> int:
    return rep.dim - 2


def dehp_residuals(rep: BandedRep) -> dict:
    """Residuals of DE - qED = D + E and the boundary relations, on rows/cols 0..dim-3."""
    w = _window(rep)
    D, E, p = rep.D, rep.E, rep.dehp
    bulk = D @ E - rep.q * E @ D - D - E
    left = rep.W @ (p.alpha * E - p.gamma * D) - rep.W
    right = (p.beta * D - p.delta * E) @ rep.V - rep.V
    return {"bulk": float(np.abs(bulk[:w, :w]).max()),
            "left": float(np.abs(left[:w]).max()),
            "right": float(np.abs(right[:w]).max())}


def algebra_residuals(rep: BandedRep, boundary: Sequence[float] | None = None) -> dict:
    """Residuals of de - q ed = (1-q) Id, <W|(aa e - cc d + Id) = 0, (bb d - dd e + Id)|V> = 0."""
    aa, bb, cc, dd = rep.boundary() if boundary is None else boundary
    w = _window(rep)
    d, e, I = rep.d, rep.e, np.eye(rep.dim)
    bulk = d @ e - rep.q * e @ d - (1 - rep.q) * I
    left = rep.W @ (aa * e - cc * d + I)
    right = (bb * d - dd * e + I) @ rep.V
    return {"bulk": float(np.abs(bulk[:w, :w]).max()),
            "left": float(np.abs(left[:w]).max()),
            "right": float(np.abs(right[:w]).max())}


def default_dim(N: int, I: int) -> int:
    return N * I + 8


# ---------------------------------------------------------------- fused solution

def _spectral_points(u: float, q: float, I: int) -> list[float]:
    return [u * q ** (-(I + 1) / 2 + a) for a in range(1, I + 1)]


def fused_M(u: float, zeta: int, I: int, rep: BandedRep) -> np.ndarray:
    """Sum over binary words of weight zeta of ordered products of M_0(v) = v + e, M_1(v) = 1/v + d."""
    if not 0 <= zeta <= I:
        raise ValueError("need 0 <= zeta <= I")
    check_nonzero(u, "u")
    Id = np.eye(rep.dim)
    pts = _spectral_points(u, rep.q, I)
    single = [(v * Id + rep.e, Id / v + rep.d) for v in pts]
    out = np.zeros((rep.dim, rep.dim))
    for word in binary_words(I, zeta):
        m = Id
        for a, bit in enumerate(word):
            m = m @ single[a][bit]
        out += m
    return out


def fused_M_family(u: float, I: int, rep: BandedRep) -> list[np.ndarray]:
    return [fused_M(u, j, I, rep) for j in range(I + 1)]


def _check_window(rep: BandedRep, N: int, I: int):
    if rep.dim < N * I + 2:
        raise WindowTooSmall(f"dim {rep.dim} < N*I + 2 = {N * I + 2}")


def mps_value(labels: Sequence[str], taus: Sequence[int], kappa: float, I: int, rep: BandedRep) -> float:
    """<W| prod_i M^{p_i}_{tau_i} |V>, with M^up = M(1/kappa), M^right = M(kappa)."""
    if len(labels) != len(taus):
        raise ValueError("labels and taus differ in length")
    _check_window(rep, len(labels), I)
    up, right = fused_M_family(1 / kappa, I, rep), fused_M_family(kappa, I, rep)
    v = rep.W
    for p, t in zip(labels, taus):
        v = v @ (up if p == UP_LABEL else right)[t]
    return float(v @ rep.V)


def mps_values(labels: Sequence[str], kappa: float, I: int, rep: BandedRep) -> np.ndarray:
    """All unnormalized weights over [[0, I]]^N in big-endian order."""
    N = len(labels)
    _check_window(rep, N, I)
    up, right = np.array(fused_M_family(1 / kappa, I, rep)), np.array(fused_M_family(kappa, I, rep))
    vecs = rep.W[None, :]
    for p in labels:
        mats = up if p == UP_LABEL else right
        vecs = np.einsum("sm,jmk->sjk", vecs, mats).reshape(-1, rep.dim)
    return vecs @ rep.V


def stationary_mpa(path: DownRightPath, params: ModelParams, rep: BandedRep | None = None) -> np.ndarray:
    """Stationary distribution from the matrix product ansatz, big-endian state indexing."""
    I, N, k = params.I, path.N, float(params.kappa)
    if rep is None:
        rep = usw_rep_for(params, default_dim(N, I))
    labels = outgoing_labels(path)
    vals = mps_values(labels, k, I, rep)
    up, right = sum(fused_M_family(1 / k, I, rep)), sum(fused_M_family(k, I, rep))
    v = rep.W
    for p in labels:
        v = v @ (up if p == UP_LABEL else right)
    Z = float(v @ rep.V)
    if not np.isfinite(Z) or abs(Z) <= 1e-300 or abs(Z) < 1e-14 * np.abs(vals).sum():
        raise ZeroNormalizer("matrix product normalizer vanishes")
    return vals / Z


# ---------------------------------------------------------------- relation checks

def _inner(rep: BandedRep, I: int) -> int:
    return rep.dim - 2 * I - 1


def consistency_residual(params: ModelParams, rep: BandedRep,
                         weights: FusedWeights | None = None) -> dict:
    """Max-norm residuals of the bulk, left and right local stationarity relations."""
    I, k = params.I, float(params.kappa)
    w = model_weights(params) if weights is None else weights
    R = np.asarray(w.R.entries, dtype=float)
    KL = np.asarray(w.left.entries, dtype=float)
    KR = np.asarray(w.right.entries, dtype=float)
    up, right = fused_M_family(1 / k, I, rep), fused_M_family(k, I, rep)
    win = _inner(rep, I)
    n = I + 1
    bulk = 0.0
    for c in range(n):
        for d in range(n):
            lhs = up[c] @ right[d]
            rhs = sum(R[a, b, c, d] * right[b] @ up[a] for a in range(n) for b in range(n))
            bulk = max(bulk, float(np.abs((lhs - rhs)[:win, :win]).max()))
    left = right_res = 0.0
    for d in range(n):
        r = rep.W @ right[d] - sum(KL[a, d] * (rep.W @ up[a]) for a in range(n))
        left = max(left, float(np.abs(r[:win]).max()))
    for c in range(n):
        r = up[c] @ rep.V - sum(KR[b, c] * (right[b] @ rep.V) for b in range(n))
        right_res = max(right_res, float(np.abs(r[:win]).max()))
    return {"bulk": bulk, "left": left, "right": right_res}


def zf_gz_residual(rep: BandedRep, x: float, y: float, u: float, I: int,
                   boundary: Sequence[float] | None = None) -> dict:
    """Residuals of the fused exchange relation at (x, y) and both boundary relations at u."""
    aa, bb, cc, dd = rep.boundary() if boundary is None else boundary
    q = rep.q
    check_nonzero(y, "y")
    n = I + 1
    R = np.asarray(fused_R_composed(x / y, q, I).entries, dtype=float)
    K = np.asarray(fused_K_composed(u, q, aa, cc, I).entries, dtype=float)
    Kb = np.asarray(fused_Kbar_composed(u, q, bb, dd, I).entries, dtype=float)
    Mx, My = fused_M_family(x, I, rep), fused_M_family(y, I, rep)
    Mu, Mui = fused_M_family(u, I, rep), fused_M_family(1 / u, I, rep)
    win = _inner(rep, I)
    zf = 0.0
    for c in range(n):
        for d in range(n):
            lhs = My[c] @ Mx[d]
            rhs = sum(R[b, a, d, c] * Mx[b] @ My[a] for a in range(n) for b in range(n))
            zf = max(zf, float(np.abs((lhs - rhs)[:win, :win]).max()))
    gz1 = gz2 = 0.0
    for d in range(n):
        r = rep.W @ Mu[d] - sum(K[a, d] * (rep.W @ Mui[a]) for a in range(n))
        gz1 = max(gz1, float(np.abs(r[:win]).max()))
    for c in range(n):
        r = Mu[c] @ rep.V - sum(Kb[b, c] * (Mui[b] @ rep.V) for b in range(n))
        gz2 = max(gz2, float(np.abs(r[:win]).max()))
    return {"zf": zf, "gz_left": gz1, "gz_right": gz2}
