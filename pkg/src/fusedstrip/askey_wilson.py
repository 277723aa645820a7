"""Askey-Wilson measures, the Askey-Wilson process, and the partition-function
route to the mean arrow density.

Quadrature is Gauss-Legendre in theta on [0, pi] with y = cos(theta); the
1/sqrt(1-y^2) factor of the density cancels against dy = sin(theta) dtheta.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss

from .errors import (AtomNearBoundary, InvalidParams, NegativeIntegrand,
                     NonConvergence, PhaseBoundary, TooManyTimes)
from .mpa import ABCDParams
from .strip_model import UP_LABEL

QUAD_NODES = 400
QUAD_TOL = 1e-9
QUAD_MAX_NODES = 1 << 14
MAX_DISTINCT_TIMES = 3
PHASE_TOL = 1e-9
_TAIL = 1e-17


# ---------------------------------------------------------------- parameters

@dataclass(frozen=True)
class AWParams:
    """Four parameters: real values plus complex-conjugate pairs stored as (modulus, angle)."""
    reals: tuple[float, ...]
    pairs: tuple[tuple[float, float], ...] = ()
    q: float = 0.5

    def __post_init__(self):
        if len(self.reals) + 2 * len(self.pairs) != 4:
            raise InvalidParams("need four parameters in total")
        if not -1 < self.q < 1:
            raise InvalidParams("need -1 < q < 1")

    @classmethod
    def real4(cls, a, b, c, d, q) -> "AWParams":
        return cls((float(a), float(b), float(c), float(d)), (), float(q))

    def values(self) -> list[complex]:
        out = [complex(v) for v in self.reals]
        for r, phi in self.pairs:
            out += [r * complex(math.cos(phi), math.sin(phi)), r * complex(math.cos(phi), -math.sin(phi))]
        return out

    def violations(self) -> list[str]:
        a, b, c, d = self.values()
        q = self.q
        prods = {"ac": a * c, "ad": a * d, "bc": b * c, "bd": b * d, "abcd": a * b * c * d}
        out = []
        for name, z in prods.items():
            for scale, tag in ((1, ""), (q, "q")):
                w = scale * z
                if abs(w.imag) < 1e-14 and w.real >= 1:
                    out.append(f"{tag}{name} = {w.real:.6g} lies in [1, inf)")
        return out

    def validate(self) -> "AWParams":
        bad = self.violations()
        if bad:
            raise InvalidParams("; ".join(bad))
        return self


def _q_powers(q: float, scale: float) -> np.ndarray:
    """q^k for k = 0.. until scale * |q|^k drops below the tail tolerance."""
    if q == 0:
        return np.array([1.0])
    s = max(scale, 1.0)
    K = int(math.ceil(math.log(_TAIL / s) / math.log(abs(q)))) + 1
    if K > 2000:
        raise NonConvergence("infinite product needs more than 2000 factors")
    return q ** np.arange(max(K, 1))


def _poch_inf(z, q: float):
    """(z; q)_inf for scalar or array z (real or complex)."""
    z = np.asarray(z)
    qk = _q_powers(q, float(np.max(np.abs(z))) if z.size else 1.0)
    return np.prod(1 - z[..., None] * qk, axis=-1)


def _abs2_poch(r, cosarg, q: float):
    """|(r e^{i psi}; q)_inf|^2 with cos(psi) = cosarg, for real r (broadcasting)."""
    r, cosarg = np.broadcast_arrays(np.asarray(r, dtype=float), np.asarray(cosarg, dtype=float))
    qk = _q_powers(q, float(np.max(np.abs(r))) if r.size else 1.0)
    rq = r[..., None] * qk
    return np.prod(1 - 2 * rq * cosarg[..., None] + rq * rq, axis=-1)


def _normalizer(params: AWParams) -> float:
    a, b, c, d = params.values()
    q = params.q
    num = _poch_inf(np.array([q, a * b, a * c, a * d, b * c, b * d, c * d]), q)
    den = _poch_inf(a * b * c * d, q)
    val = np.prod(num) / den
    return float(val.real)


def _theta_factor(theta, params: AWParams):
    """|(e^{2 i theta}; q)_inf|^2 / prod |(chi e^{i theta}; q)_inf|^2."""
    theta = np.asarray(theta, dtype=float)
    out = _abs2_poch(1.0, np.cos(2 * theta), params.q)
    for v in params.reals:
        out = out / _abs2_poch(v, np.cos(theta), params.q)
    for r, phi in params.pairs:
        out = out / (_abs2_poch(r, np.cos(theta + phi), params.q) * _abs2_poch(r, np.cos(theta - phi), params.q))
    return out


def aw_density(y, params: AWParams):
    """Density of the absolutely continuous part; zero for |y| >= 1."""
    y = np.asarray(y, dtype=float)
    inside = np.abs(y) < 1
    out = np.zeros_like(y)
    if inside.any():
        th = np.arccos(y[inside])
        out[inside] = _normalizer(params) / (2 * math.pi * np.sin(th)) * _theta_factor(th, params)
    return out if out.ndim else float(out)


# ---------------------------------------------------------------- atoms

def _first_slot_masses(a: float, others: Sequence[complex], q: float, count: int) -> list[float]:
    b, c, d = others
    p0 = np.prod(_poch_inf(np.array([1 / a ** 2, b * c, b * d, c * d]), q)) / \
        np.prod(_poch_inf(np.array([b / a, c / a, d / a, a * b * c * d]), q))
    masses = [float(np.real(p0))]
    for j in range(1, count):
        ks = np.arange(j)
        num = np.prod(1 - np.array([a * a, a * b, a * c, a * d])[:, None] * q ** ks)
        num *= (1 - a * a * q ** (2 * j)) * q ** j
        den = np.prod(1 - q ** (ks + 1)) * (1 - a * a) * a ** j
        for chi in (b, c, d):
            den *= np.prod(chi - q ** (ks + 1) * a)
        masses.append(float(np.real(p0 * num / den)))
    return masses


def aw_atoms(params: AWParams) -> list[tuple[float, float]]:
    """Atoms (position, mass) generated by real parameters of modulus > 1."""
    vals = params.values()
    q = params.q
    out = []
    for i, chi in enumerate(params.reals):
        if abs(chi) <= 1:
            continue
        count = 0
        while abs(chi * q ** count) > 1:
            if abs(abs(chi * q ** count) - 1) < 1e-12:
                warnings.warn(f"atom generator {chi * q ** count!r} within 1e-12 of modulus 1", AtomNearBoundary)
            count += 1
            if q == 0:
                break
        others = vals[:i] + vals[i + 1:]
        masses = _first_slot_masses(chi, others, q, count)
        for j, p in enumerate(masses):
            z = chi * q ** j
            out.append((0.5 * (z + 1 / z), p))
    return out


# ---------------------------------------------------------------- measures

@dataclass
class AWMeasure:
    params: AWParams
    atoms: list[tuple[float, float]] = field(default_factory=list)

    @classmethod
    def build(cls, params: AWParams) -> "AWMeasure":
        params.validate()
        return cls(params, aw_atoms(params))

    def density(self, y):
        return aw_density(y, self.params)

    def nodes(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        """Quadrature points y = cos(theta) and weights of the continuous part."""
        x, w = leggauss(n)
        theta = 0.5 * math.pi * (x + 1)
        wts = 0.5 * math.pi * w * _normalizer(self.params) / (2 * math.pi) * _theta_factor(theta, self.params)
        return np.cos(theta), wts

    def mass(self, n: int = QUAD_NODES) -> float:
        return expect(self, lambda y: np.ones_like(y), n)


def marginal(t: float, abcd: ABCDParams) -> AWMeasure:
    st = math.sqrt(t)
    return AWMeasure.build(AWParams.real4(abcd.A * st, abcd.B * st, abcd.C / st, abcd.D / st, abcd.q))


def transition(s: float, t: float, x: float, abcd: ABCDParams) -> AWMeasure:
    """Law of Y_t given Y_s = x, for s < t."""
    if not s < t:
        raise ValueError("need s < t")
    st, r = math.sqrt(t), math.sqrt(s / t)
    if abs(x) < 1:
        params = AWParams((abcd.A * st, abcd.B * st), ((r, math.acos(x)),), abcd.q)
    else:
        root = math.sqrt(x * x - 1)
        params = AWParams.real4(abcd.A * st, abcd.B * st, r * (x + root), r * (x - root), abcd.q)
    return AWMeasure.build(params)


def expect(measure: AWMeasure, f: Callable, nodes: int = QUAD_NODES, tol: float = QUAD_TOL,
           max_nodes: int = QUAD_MAX_NODES) -> float:
    """E[f(Y)]: Gauss-Legendre in theta, node count doubled until the relative change is below tol."""
    atoms = sum(p * float(f(np.array([y]))[0]) for y, p in measure.atoms)
    prev = None
    n = nodes
    while n <= max_nodes:
        y, w = measure.nodes(n)
        val = float(np.dot(w, f(y))) + atoms
        if prev is not None and abs(val - prev) <= tol * max(abs(val), 1e-300):
            return val
        prev = val
        n *= 2
    raise NonConvergence(f"quadrature did not reach relative change {tol} with {max_nodes} nodes")


def _logsumexp(v: np.ndarray) -> float:
    m = float(np.max(v))
    if not np.isfinite(m):
        return m
    return m + math.log(float(np.sum(np.exp(v - m))))


def log_expect_parts(measure: AWMeasure, logf: Callable, n: int) -> tuple[float, float]:
    """(log of continuous contribution, log of atomic contribution) of E[exp(logf(Y))]."""
    y, w = measure.nodes(n)
    pos = w > 0
    cont = _logsumexp(np.log(w[pos]) + logf(y[pos])) if pos.any() else -math.inf
    if measure.atoms:
        ya = np.array([a for a, _ in measure.atoms])
        pa = np.array([p for _, p in measure.atoms])
        if (pa < 0).any():
            raise NegativeIntegrand("negative atom mass")
        atom = _logsumexp(np.log(pa) + logf(ya))
    else:
        atom = -math.inf
    return cont, atom


def log_expect(measure: AWMeasure, logf: Callable, nodes: int = QUAD_NODES, tol: float = QUAD_TOL,
               max_nodes: int = QUAD_MAX_NODES, fixed: bool = False) -> tuple[float, int]:
    """log E[exp(logf(Y))] and the node count used."""
    n, prev = nodes, None
    while n <= max_nodes:
        val = float(np.logaddexp(*log_expect_parts(measure, logf, n)))
        if fixed:
            return val, n
        if prev is not None and abs(val - prev) <= tol:
            return val, n
        prev = val
        n *= 2
    raise NonConvergence(f"log-domain quadrature did not settle to {tol} with {max_nodes} nodes")


# ---------------------------------------------------------------- generating function

def _h_log(t: float, y, kappa: float, q: float, I: int, upsilon: int):
    """log prod_a (2 sqrt(t) y + t q^{(I+1)/2-a} kappa^u + q^{-(I+1)/2+a} kappa^-u)."""
    y = np.asarray(y, dtype=float)
    out = np.zeros_like(y)
    for a in range(1, I + 1):
        e = (I + 1) / 2 - a
        h = 2 * math.sqrt(t) * y + t * q ** e * kappa ** upsilon + q ** (-e) * kappa ** (-upsilon)
        if (h <= 0).any():
            raise NegativeIntegrand("h factor is not positive on the support")
        out = out + np.log(h)
    return out


def _upsilon(label: str) -> int:
    return 1 if label == UP_LABEL else -1


def _normal_log(N: int, kappa: float, I: int, abcd: ABCDParams, nodes: int, tol: float) -> float:
    return log_expect(marginal(1.0, abcd), lambda y: N * _h_log(1.0, y, kappa, abcd.q, I, 1), nodes, tol)[0]


def _chain_expect(times: Sequence[float], factors: Sequence[Callable], abcd: ABCDParams, n: int) -> float:
    """E[prod_k factors[k](Y_{times[k]})] for strictly increasing times, by nested quadrature."""
    m = len(times)
    x_gl, w_gl = leggauss(n)
    theta = 0.5 * math.pi * (x_gl + 1)
    grid = np.cos(theta)

    def cond(k: int, ys: np.ndarray) -> np.ndarray:
        """E[prod_{j>=k} factors[j] | Y_{times[k-1]} = y] for each y in ys."""
        if k == m:
            return np.ones_like(ys)
        need_grid = None
        out = np.empty(len(ys))
        for i, y in enumerate(ys):
            mu = transition(times[k - 1], times[k], float(y), abcd)
            w = 0.5 * w_gl * _normalizer(mu.params) / 2 * _theta_factor(theta, mu.params)
            if need_grid is None:
                need_grid = factors[k](grid) * cond(k + 1, grid)
            val = float(np.dot(w, need_grid))
            for ya, pa in mu.atoms:
                val += pa * float(factors[k](np.array([ya]))[0] * cond(k + 1, np.array([ya]))[0])
            out[i] = val
        return out

    mu0 = marginal(times[0], abcd)
    y0, w0 = mu0.nodes(n)
    val = float(np.dot(w0, factors[0](y0) * cond(1, y0)))
    for ya, pa in mu0.atoms:
        val += pa * float(factors[0](np.array([ya]))[0] * cond(1, np.array([ya]))[0])
    return val


def gen_fun_aw(labels: Sequence[str], kappa: float, I: int, abcd: ABCDParams, times: Sequence[float],
               nodes: int = QUAD_NODES, tol: float = QUAD_TOL) -> float:
    """E_mu[prod_i t_i^{tau_i}] through the Askey-Wilson process, t_1 <= ... <= t_N."""
    N = len(labels)
    if len(times) != N:
        raise ValueError("need one time per site")
    if any(t <= 0 for t in times) or any(b < a for a, b in zip(times, times[1:])):
        raise ValueError("need 0 < t_1 <= ... <= t_N")
    q = abcd.q
    distinct = sorted(set(times))
    if len(distinct) > MAX_DISTINCT_TIMES:
        raise TooManyTimes(f"{len(distinct)} distinct times, at most {MAX_DISTINCT_TIMES} supported")
    groups = [[lab for lab, t in zip(labels, times) if t == s] for s in distinct]
    log_den = _normal_log(N, kappa, I, abcd, nodes, tol)

    def make(s, labs):
        return lambda y: sum(_h_log(s, y, kappa, q, I, _upsilon(l)) for l in labs)

    if len(distinct) == 1:
        s = distinct[0]
        log_num = log_expect(marginal(s, abcd), make(s, groups[0]), nodes, tol)[0]
        return math.exp(log_num - log_den)
    scale = log_den / N
    factors = [(lambda f, L: (lambda y: np.exp(f(y) - L * scale)))(make(s, g), len(g))
               for s, g in zip(distinct, groups)]
    n, prev = nodes, None
    while n <= QUAD_MAX_NODES:
        val = _chain_expect(distinct, factors, abcd, n)
        if prev is not None and abs(val - prev) <= tol * abs(val):
            return val
        prev = val
        n *= 2
        if n > 4 * nodes:
            return val
    raise NonConvergence("nested quadrature did not converge")


# ---------------------------------------------------------------- partition function and density

@dataclass(frozen=True)
class PhasePoint:
    abcd: ABCDParams
    kappa: float
    I: int
    lam: float = 0.5

    def __post_init__(self):
        if not 0 <= self.lam <= 1:
            raise InvalidParams("need 0 <= lambda <= 1")
        if not self.abcd.A * self.abcd.C < 1:
            raise InvalidParams("need AC < 1")


def _logf_Z(N: int, phi: int, t: float, kappa: float, q: float, I: int):
    if not 0 <= phi <= N:
        raise ValueError("need 0 <= phi <= N")
    return lambda y: phi * _h_log(t, y, kappa, q, I, 1) + (N - phi) * _h_log(t, y, kappa, q, I, -1)


def partition_Z(N: int, phi: int, t: float, point: PhasePoint, nodes: int | None = None,
                tol: float = QUAD_TOL) -> float:
    """log Z_N(t) = log E[h_up(t, Y_t)^phi h_right(t, Y_t)^(N - phi)]; phi counts up-labelled edges."""
    logf = _logf_Z(N, phi, t, point.kappa, point.abcd.q, point.I)
    mu = marginal(t, point.abcd)
    if nodes is None:
        return log_expect(mu, logf, QUAD_NODES, tol)[0]
    return log_expect(mu, logf, nodes, fixed=True)[0]


def log_Z_parts(N: int, phi: int, t: float, point: PhasePoint, nodes: int | None = None) -> tuple[float, float]:
    """(continuous, atomic) contributions to Z_N(t), both as logs."""
    if nodes is None:
        nodes = _settled_nodes(N, phi, point)
    logf = _logf_Z(N, phi, t, point.kappa, point.abcd.q, point.I)
    return log_expect_parts(marginal(t, point.abcd), logf, nodes)


def _settled_nodes(N: int, phi: int, point: PhasePoint, tol: float = QUAD_TOL) -> int:
    logf = _logf_Z(N, phi, 1.0, point.kappa, point.abcd.q, point.I)
    return 2 * log_expect(marginal(1.0, point.abcd), logf, QUAD_NODES, tol)[1]


def dZdt_at_1(N: int, phi: int, point: PhasePoint, steps: tuple[float, float] = (1e-4, 5e-5)) -> float:
    """d/dt log Z_N(t) at t = 1 (= Z'/Z) by central differences and one Richardson step."""
    n = _settled_nodes(N, phi, point)

    def D(h):
        return (partition_Z(N, phi, 1 + h, point, n) - partition_Z(N, phi, 1 - h, point, n)) / (2 * h)

    h1, h2 = steps
    d1, d2 = D(h1), D(h2)
    ratio = (h1 / h2) ** 2
    return (ratio * d2 - d1) / (ratio - 1)


def mean_density_finite(N: int, phi: int, point: PhasePoint) -> float:
    """Mean arrow density (1/N) Z'(1)/Z(1) at width N with phi up-labelled edges."""
    return dZdt_at_1(N, phi, point) / N


def classify_phase(abcd: ABCDParams, tol: float = PHASE_TOL) -> str:
    if abs(abcd.A - 1) < tol or abs(abcd.C - 1) < tol:
        return "boundary"
    if abcd.A > 1:
        return "HD"
    if abcd.C > 1:
        return "LD"
    return "MC"


def G(x: float, phase: str, abcd: ABCDParams, I: int) -> float:
    q = abcd.q
    shifts = [q ** (-(I + 1) / 2 + a) for a in range(1, I + 1)]
    if phase == "MC":
        return sum(x / (x + s) for s in shifts)
    if phase == "HD":
        return sum(abcd.A * x / (abcd.A * x + s) for s in shifts)
    if phase == "LD":
        return sum(x / (x + abcd.C * s) for s in shifts)
    raise PhaseBoundary(f"no limit formula for phase {phase!r}")


def density_limit(point: PhasePoint) -> float:
    """lambda G(kappa) + (1 - lambda) G(1/kappa), lambda the up-labelled fraction."""
    phase = classify_phase(point.abcd)
    if phase == "boundary":
        raise PhaseBoundary("A or C within 1e-9 of 1")
    k = point.kappa
    return point.lam * G(k, phase, point.abcd, point.I) + (1 - point.lam) * G(1 / k, phase, point.abcd, point.I)
