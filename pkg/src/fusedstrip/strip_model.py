"""Markov chain of the fused vertex model on the strip {0 <= y <= x <= y + N}.

A down-right path of width N is a sequence of N steps, each Down or Right,
from a left boundary vertex (s, s) to a right boundary vertex.  Each step owns
one outgoing edge: a Down step from (x, y) owns the horizontal edge leaving
(x, y) to the right, a Right step into (x, y) owns the vertical edge leaving
(x, y) upwards.  Configurations tau in [[0, I]]^N live on these edges, and
states are indexed big-endian: tau -> sum_i tau_i (I+1)^(N-i).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import (EmptyRun, EvenWidth, NonConvergence, NotIrreducible,
                     PathOrder, StateSpaceTooLarge)
from .vertex_weights import FusedWeights

DOWN, RIGHT = "D", "R"
UP_LABEL, RIGHT_LABEL = "up", "right"
STATE_CAP = 4096


# ---------------------------------------------------------------- paths

@dataclass(frozen=True)
class DownRightPath:
    steps: tuple[str, ...]
    anchor: int | None = None

    def __post_init__(self):
        steps = tuple(s.upper() for s in self.steps)
        if any(s not in (DOWN, RIGHT) for s in steps):
            raise ValueError("steps must be 'D' or 'R'")
        object.__setattr__(self, "steps", steps)
        if self.anchor is None:
            object.__setattr__(self, "anchor", steps.count(DOWN))
        if self.anchor < steps.count(DOWN):
            raise ValueError("path leaves the strip (anchor below the number of Down steps)")

    @property
    def N(self) -> int:
        return len(self.steps)

    @classmethod
    def parse(cls, text: str, N: int | None = None) -> "DownRightPath":
        """'zigzag', 'zigzag-r', 'horizontal', 'vertical' (all Down) or a D/R string."""
        key = text.strip().lower()
        if key in ("zigzag", "zig-zag", "zigzag-d"):
            return zigzag(_need(N))
        if key == "zigzag-r":
            return zigzag(_need(N), first=RIGHT)
        if key == "horizontal":
            return cls((RIGHT,) * _need(N))
        if key == "vertical":
            return cls((DOWN,) * _need(N))
        path = cls(tuple(text.strip()))
        if N is not None and path.N != N:
            raise ValueError(f"path string has length {path.N}, expected {N}")
        return path

    def translate(self, k: int = 1) -> "DownRightPath":
        return DownRightPath(self.steps, self.anchor + k)

    def vertices(self) -> list[tuple[int, int]]:
        x = y = self.anchor
        out = [(x, y)]
        for s in self.steps:
            if s == DOWN:
                y -= 1
            else:
                x += 1
            out.append((x, y))
        return out

    def __str__(self) -> str:
        return "".join(self.steps)


def _need(N):
    if N is None:
        raise ValueError("width N required for this path shape")
    return N


def zigzag(N: int, first: str = DOWN) -> DownRightPath:
    other = RIGHT if first == DOWN else DOWN
    return DownRightPath(tuple(first if i % 2 == 0 else other for i in range(N)))


def outgoing_labels(path: DownRightPath) -> tuple[str, ...]:
    """Down step -> horizontal outgoing edge, Right step -> vertical outgoing edge."""
    return tuple(RIGHT_LABEL if s == DOWN else UP_LABEL for s in path.steps)


def horizontal_count(path: DownRightPath) -> int:
    """Number of horizontal outgoing edges (= number of Down steps)."""
    return path.steps.count(DOWN)


def horizontal_step_count(path: DownRightPath) -> int:
    """Number of horizontal edges of the path itself (= Right steps = vertical outgoing edges)."""
    return path.steps.count(RIGHT)


# ---------------------------------------------------------------- schedule

@dataclass(frozen=True)
class ScheduledVertex:
    x: int
    y: int
    kind: str  # "bulk" | "left" | "right"


def _below(path: DownRightPath) -> set[tuple[int, int]]:
    N = path.N
    verts = path.vertices()
    x0, x1 = verts[0][0], verts[-1][0]
    top: dict[int, int] = {}
    for x, y in verts:
        top[x] = max(top.get(x, y), y)
    out = set()
    for x in range(0, x1 + 1):
        for y in range(max(0, x - N), x + 1):
            if x < x0 or y <= top[x]:
                out.add((x, y))
    return out


def update_schedule(P: DownRightPath, Q: DownRightPath) -> list[ScheduledVertex]:
    """Vertices strictly above P and weakly below Q, by row then column."""
    if P.N != Q.N:
        raise PathOrder("paths have different widths")
    bp, bq = _below(P), _below(Q)
    if not bp <= bq:
        raise PathOrder("Q does not lie weakly above P")
    N = P.N
    out = []
    for x, y in sorted(bq - bp, key=lambda v: (v[1], v[0])):
        kind = "left" if x == y else ("right" if x == y + N else "bulk")
        out.append(ScheduledVertex(x, y, kind))
    return out


def compile_moves(P: DownRightPath, Q: DownRightPath | None = None) -> list[tuple[str, int]]:
    """Turn the schedule into frontier moves (kind, position).

    'bulk', i : positions (i, i+1) go from (right, up) to (up, right) labels
    'left', 0 : position 0 goes from up to right
    'right', N-1 : position N-1 goes from right to up
    """
    if Q is None:
        Q = P.translate(1)
    steps = list(P.steps)
    verts = P.vertices()
    N = P.N
    moves = []
    for v in update_schedule(P, Q):
        corner = (v.x - 1, v.y - 1)
        try:
            k = verts.index(corner)
        except ValueError:
            raise PathOrder(f"vertex {(v.x, v.y)} is not adjacent to the current frontier") from None
        if v.kind == "left":
            if k != 0 or steps[0] != RIGHT:
                raise PathOrder("left boundary move out of order")
            steps[0] = DOWN
            moves.append(("left", 0))
        elif v.kind == "right":
            if k != N or steps[N - 1] != DOWN:
                raise PathOrder("right boundary move out of order")
            steps[N - 1] = RIGHT
            moves.append(("right", N - 1))
        else:
            if not (0 < k < N and steps[k - 1] == DOWN and steps[k] == RIGHT):
                raise PathOrder("bulk move out of order")
            steps[k - 1], steps[k] = RIGHT, DOWN
            moves.append(("bulk", k - 1))
        verts[k] = (v.x, v.y)
    return moves


# ---------------------------------------------------------------- exact transition matrix

def _kernels(weights: FusedWeights):
    n = weights.I + 1
    R = np.asarray(weights.R.entries, dtype=float)
    # rows (b, a) with b on the horizontal incoming edge, columns (c, d)
    bulk = R.transpose(1, 0, 2, 3).reshape(n * n, n * n)
    left = np.asarray(weights.left.entries, dtype=float)
    right = np.asarray(weights.right.entries, dtype=float)
    return bulk, left, right


def _apply_move(T: np.ndarray, kind: str, pos: int, N: int, n: int, kern) -> np.ndarray:
    """Right-multiply the frontier distribution(s) T (shape (m, n, ..., n)) by a local kernel."""
    bulk, left, right = kern
    if kind == "bulk":
        axes = [1 + pos, 2 + pos]
        k = bulk
    else:
        axes = [1 + pos]
        k = left if kind == "left" else right
    t = np.moveaxis(T, axes, list(range(T.ndim - len(axes), T.ndim)))
    shape = t.shape
    t = (t.reshape(-1, k.shape[0]) @ k).reshape(shape)
    return np.moveaxis(t, list(range(T.ndim - len(axes), T.ndim)), axes)


def step_transition_matrix(path: DownRightPath, weights: FusedWeights, I: int | None = None,
                           cap: int = STATE_CAP) -> np.ndarray:
    """Exact one-step matrix P_{P, P+(1,1)} with big-endian state indexing."""
    I = weights.I if I is None else I
    n, N = I + 1, path.N
    S = n ** N
    if S > cap:
        raise StateSpaceTooLarge(f"{S} states exceed the cap {cap}")
    kern = _kernels(weights)
    T = np.eye(S).reshape((S,) + (n,) * N)
    for kind, pos in compile_moves(path):
        T = _apply_move(T, kind, pos, N, n, kern)
    return T.reshape(S, S)


# ---------------------------------------------------------------- sampling

def _cumulative_tables(weights: FusedWeights):
    bulk, left, right = _kernels(weights)
    return np.cumsum(bulk, axis=1), np.cumsum(left, axis=1), np.cumsum(right, axis=1)


def sample_steps(configs: np.ndarray, path: DownRightPath, weights: FusedWeights,
                 rng: np.random.Generator, moves=None, tables=None) -> np.ndarray:
    """One update of many independent configurations (rows of ``configs``)."""
    n = weights.I + 1
    moves = compile_moves(path) if moves is None else moves
    cb, cl, cr = _cumulative_tables(weights) if tables is None else tables
    out = np.array(configs, dtype=np.int64, copy=True)
    if out.ndim == 1:
        out = out[None, :]
    m = out.shape[0]
    for kind, pos in moves:
        u = rng.random(m)
        if kind == "bulk":
            row = out[:, pos] * n + out[:, pos + 1]
            k = np.minimum((u[:, None] >= cb[row]).sum(axis=1), n * n - 1)
            out[:, pos], out[:, pos + 1] = k // n, k % n
        else:
            table = cl if kind == "left" else cr
            k = np.minimum((u[:, None] >= table[out[:, pos]]).sum(axis=1), n - 1)
            out[:, pos] = k
    return out


def sample_step(config: Sequence[int], path: DownRightPath, weights: FusedWeights,
                rng: np.random.Generator) -> np.ndarray:
    return sample_steps(np.asarray(config)[None, :], path, weights, rng)[0]


def chain_rng(seed: int, chain_id: int = 0) -> np.random.Generator:
    """Independent reproducible stream per (seed, chain id)."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, chain_id])))


def state_index(tau: Sequence[int], I: int) -> int:
    idx = 0
    for t in tau:
        idx = idx * (I + 1) + int(t)
    return idx


def state_configs(N: int, I: int) -> np.ndarray:
    """All configurations in big-endian order, shape ((I+1)^N, N)."""
    n = I + 1
    idx = np.arange(n ** N)
    return np.stack([(idx // n ** (N - 1 - i)) % n for i in range(N)], axis=1)


@dataclass
class RunResult:
    seed: int
    chain_id: int
    steps: int
    burn_in: int
    histogram: np.ndarray | None   # empirical distribution over states
    density_trace: np.ndarray       # mean density after each recorded step
    mean_density: float


def empirical_run(path: DownRightPath, weights: FusedWeights, steps: int, burn_in: int = 0,
                  seed: int = 0, chain_id: int = 0, histogram: bool | None = None,
                  initial: Sequence[int] | None = None) -> RunResult:
    """Run one chain; record a histogram (small N) and the running mean density."""
    if steps <= 0:
        raise EmptyRun("zero recorded steps: empty histogram")
    I, N = weights.I, path.N
    n = I + 1
    if histogram is None:
        histogram = n ** N <= STATE_CAP
    rng = chain_rng(seed, chain_id)
    moves = compile_moves(path)
    cb, cl, cr = (t.tolist() for t in _cumulative_tables(weights))
    tau = [0] * N if initial is None else [int(t) for t in initial]
    counts = np.zeros(n ** N, dtype=np.int64) if histogram else None
    trace = np.empty(steps)
    total = 0
    nm = len(moves)
    for step in range(burn_in + steps):
        us = rng.random(nm).tolist()
        for (kind, pos), u in zip(moves, us):
            if kind == "bulk":
                row = cb[tau[pos] * n + tau[pos + 1]]
                k = 0
                while k < n * n - 1 and u >= row[k]:
                    k += 1
                tau[pos], tau[pos + 1] = divmod(k, n)
            else:
                row = (cl if kind == "left" else cr)[tau[pos]]
                k = 0
                while k < n - 1 and u >= row[k]:
                    k += 1
                tau[pos] = k
        if step >= burn_in:
            if counts is not None:
                counts[state_index(tau, I)] += 1
            total += sum(tau)
            trace[step - burn_in] = total / ((step - burn_in + 1) * N)
    hist = counts / steps if counts is not None else None
    return RunResult(seed, chain_id, steps, burn_in, hist, trace, float(trace[-1]))


# ---------------------------------------------------------------- stationary law

def _reachable(A: np.ndarray) -> bool:
    seen = np.zeros(A.shape[0], dtype=bool)
    seen[0] = True
    while True:
        new = seen | (A[seen].any(axis=0))
        if new.sum() == seen.sum():
            return bool(seen.all())
        seen = new


def is_irreducible(T: np.ndarray) -> bool:
    A = T > 0
    return _reachable(A) and _reachable(A.T)


def stationary_exact(T: np.ndarray, tol: float = 1e-13, max_iter: int = 1_000_000) -> np.ndarray:
    """Unique mu with mu T = mu: lazy power iteration from the uniform vector, linear-solve fallback."""
    S = T.shape[0]
    if not is_irreducible(T):
        raise NotIrreducible("transition matrix is not irreducible")
    mu = np.full(S, 1.0 / S)
    for _ in range(max_iter):
        nxt = mu @ T
        if np.abs(nxt - mu).sum() < tol:
            return nxt / nxt.sum()
        mu = 0.5 * (mu + nxt)
    A = T.T - np.eye(S)
    A[-1, :] = 1.0
    rhs = np.zeros(S)
    rhs[-1] = 1.0
    mu = np.linalg.solve(A, rhs)
    if np.abs(mu @ T - mu).sum() > 1e3 * tol:
        raise NonConvergence("stationary vector did not converge")
    return mu


def mean_density(dist: np.ndarray, N: int, I: int) -> float:
    """E[(1/N) sum_i tau_i] under a distribution in big-endian indexing."""
    totals = state_configs(N, I).sum(axis=1)
    return float(np.dot(dist, totals) / N)


# ---------------------------------------------------------------- Floquet form

def _apply_site_op(op: np.ndarray, positions: Sequence[int], N: int, n: int, mat: np.ndarray) -> np.ndarray:
    k = len(positions)
    m = mat.shape[1]
    t = mat.reshape((n,) * N + (m,))
    t = np.moveaxis(t, list(positions), list(range(k)))
    shape = t.shape
    t = (op @ t.reshape(n ** k, -1)).reshape(shape)
    t = np.moveaxis(t, list(range(k)), list(positions))
    return t.reshape(n ** N, m)


def floquet_transfer(weights: FusedWeights, N: int, cap: int = STATE_CAP) -> np.ndarray:
    """Row-stochastic matrix of the two-step product U^e U^o, U = R P, for odd N."""
    if N % 2 == 0:
        raise EvenWidth("two-step dynamics needs odd width")
    n = weights.I + 1
    S = n ** N
    if S > cap:
        raise StateSpaceTooLarge(f"{S} states exceed the cap {cap}")
    R_op = np.asarray(weights.R.op, dtype=float)
    P = np.zeros((n * n, n * n))
    for i in range(n):
        for j in range(n):
            P[j * n + i, i * n + j] = 1.0
    U = R_op @ P
    B = np.asarray(weights.left.op, dtype=float)
    Bbar = np.asarray(weights.right.op, dtype=float)
    op = np.eye(S)
    # U^o: pairs (1,2),(3,4),...,(N-2,N-1) and the right boundary on N
    op = _apply_site_op(Bbar, [N - 1], N, n, op)
    for i in range(0, N - 1, 2):
        op = _apply_site_op(U, [i, i + 1], N, n, op)
    # U^e: pairs (2,3),...,(N-1,N) and the left boundary on 1
    for i in range(1, N - 1, 2):
        op = _apply_site_op(U, [i, i + 1], N, n, op)
    op = _apply_site_op(B, [0], N, n, op)
    return op.T.copy()
