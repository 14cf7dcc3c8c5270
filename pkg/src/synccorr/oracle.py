"""Sampling oracles and constructive dimension changes for projection triples.

``S_d(n1, n2, n3)`` is the set of normalized trace triples of d x d
projections with ranks ``n_i``. This module samples such triples, reduces
them to smaller dimensions (splitting off a common kernel vector of two of
the projections), blows them up by one dimension, and checks sampled points
against explicit convex hulls of scaled elliptope images.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .hull import INCONCLUSIVE, MEMBER, NONMEMBER, DSet, hull_distance_bounds, hull_membership
from .matcore import (
    Projection,
    hermitian_eig,
    random_projections,
    rng_stream,
    trace_triple,
    trace_triples_batch,
)
from .slices import PAIRS

KERNEL_TOL = 1e-8
VIOLATION_EPS = 1e-6
PROPOSITIONS = ("typeI", "typeI-swap", "typeII", "typeII-swap", "typeIII", "two-exp")


@dataclass(frozen=True)
class RankedTriple:
    d: int
    ranks: tuple
    projections: tuple = field(repr=False)

    def __post_init__(self):
        if len(self.ranks) != 3 or len(self.projections) != 3:
            raise ValueError("a ranked triple has three ranks and three projections")
        mats = []
        for n, p in zip(self.ranks, self.projections):
            m = p.matrix if isinstance(p, Projection) else np.asarray(p, dtype=complex)
            if m.shape != (self.d, self.d):
                raise ValueError(f"projection of shape {m.shape} in dimension {self.d}")
            mats.append(Projection(m, int(n)).matrix)
        object.__setattr__(self, "ranks", tuple(int(n) for n in self.ranks))
        object.__setattr__(self, "projections", tuple(mats))

    @property
    def traces(self) -> np.ndarray:
        return trace_triple(*self.projections)


@dataclass(frozen=True)
class ReductionStep:
    """One application of the reduction: ``parent = s*t*left + s*(1-t)*right``.

    Here ``s = (d-1)/d``. ``left`` carries the projection of experiment
    ``target`` with its rank lowered by one, ``right`` keeps the rank. A side
    is ``None`` when that rank does not fit (its weight is then zero).
    """

    t: float
    left: RankedTriple | None
    right: RankedTriple | None
    pair: tuple
    target: int
    d: int

    def combined(self) -> np.ndarray:
        s = (self.d - 1) / self.d
        out = np.zeros(3)
        if self.left is not None:
            out += s * self.t * self.left.traces
        if self.right is not None:
            out += s * (1.0 - self.t) * self.right.traces
        return out


def _check_ranks(d: int, ranks) -> tuple:
    if d < 1:
        raise ValueError("dimension must be >= 1")
    ranks = tuple(int(n) for n in ranks)
    if len(ranks) != 3:
        raise ValueError("three ranks required")
    for n in ranks:
        if not 0 <= n <= d:
            raise ValueError(f"rank {n} outside [0, {d}]")
    return ranks


# ---------------------------------------------------------------------------
# sampling


def _perturbed_diagonal(d: int, rank: int, count: int, rng: np.random.Generator, spread: float) -> np.ndarray:
    """Coordinate projections on random subsets, rotated by exp(i s H) with small s."""
    out = np.zeros((count, d, d), dtype=complex)
    if rank == 0:
        return out
    if rank == d:
        out[:] = np.eye(d)
        return out
    subsets = np.argsort(rng.random((count, d)), axis=1)[:, :rank]
    diag = np.zeros((count, d))
    np.put_along_axis(diag, subsets, 1.0, axis=1)
    h = rng.standard_normal((count, d, d)) + 1j * rng.standard_normal((count, d, d))
    h = 0.5 * (h + np.conj(np.swapaxes(h, 1, 2)))
    lam, v = np.linalg.eigh(h)
    s = spread * rng.random(count) ** 2
    u = (v * np.exp(1j * s[:, None] * lam)[:, None, :]) @ np.conj(np.swapaxes(v, 1, 2))
    base = diag[:, :, None] * np.eye(d)
    return u @ base @ np.conj(np.swapaxes(u, 1, 2))


def sample_projection_stack(d: int, ranks, count: int, rng: np.random.Generator, mode: str = "haar"):
    """Three stacks of ``count`` projections each, shape (count, d, d).

    ``mode="haar"`` draws independent Haar-random projections. ``mode="mixed"``
    draws half of them that way and half as slightly rotated coordinate
    projections, which reach the extreme trace values that Haar samples
    almost never approach.
    """
    ranks = _check_ranks(d, ranks)
    if mode == "haar":
        return [random_projections(d, n, count, rng) for n in ranks]
    if mode != "mixed":
        raise ValueError(f"unknown sampling mode {mode!r}")
    half = count // 2
    haar = [random_projections(d, n, half, rng) for n in ranks]
    near = [_perturbed_diagonal(d, n, count - half, rng, spread=0.5) for n in ranks]
    return [np.concatenate([a, b]) for a, b in zip(haar, near)]


def sample_trace_triples(d: int, ranks, count: int, seed: int, mode: str = "haar", stream: int = 0) -> np.ndarray:
    rng = rng_stream(seed, d, *_check_ranks(d, ranks), stream)
    a, b, c = sample_projection_stack(d, ranks, count, rng, mode)
    return trace_triples_batch(a, b, c)


def sample_ranked_triple(d: int, ranks, seed: int, mode: str = "haar") -> RankedTriple:
    ranks = _check_ranks(d, ranks)
    rng = rng_stream(seed, d, *ranks)
    mats = [m[0] for m in sample_projection_stack(d, ranks, 1, rng, mode)]
    mats = [0.5 * (m + m.conj().T) for m in mats]
    return RankedTriple(d, ranks, tuple(mats))


def sample_pair_traces(d: int, n1: int, n2: int, count: int, seed: int, mode: str = "haar") -> np.ndarray:
    """``count`` samples of tr_d(P Q) for projections of ranks n1, n2."""
    rng = rng_stream(seed, d, n1, n2)
    a, b, _ = sample_projection_stack(d, (n1, n2, 0), count, rng, mode)
    return np.einsum("nij,nji->n", a, b).real / d


def two_projection_interval(n1: int, n2: int, d: int):
    return max(0.0, (n1 + n2 - d) / d), min(n1 / d, n2 / d)


# ---------------------------------------------------------------------------
# dimension changes


def _snap_projection(m: np.ndarray, rank: int) -> np.ndarray:
    """Nearest projection of the given rank (top eigenvectors)."""
    if rank == 0:
        return np.zeros_like(m)
    _, v = hermitian_eig(0.5 * (m + m.conj().T), tol=1e-8)
    cols = v[:, :rank]
    return cols @ cols.conj().T


def _basis_with_last(u: np.ndarray) -> np.ndarray:
    """Unitary whose last column is ``u``."""
    d = u.shape[0]
    q, _ = np.linalg.qr(np.column_stack([u, np.eye(d, dtype=complex)]))
    q = q[:, :d]
    return np.column_stack([q[:, 1:], u])


def reduce_dimension(rt: RankedTriple, pair, kernel_vector=None) -> ReductionStep:
    """Split off a common kernel vector of the two projections in ``pair``.

    In a basis ending with that vector the third projection reads
    ``[[B, v], [v^H, t]]``; with ``w = v / |v|`` the (d-1)-dimensional
    projections ``B - (1 - t) w w^H`` (rank lowered) and ``B + t w w^H``
    (rank kept) carry weights ``t`` and ``1 - t``.
    """
    a, b = sorted(int(i) for i in pair)
    if a == b or not {a, b} <= {0, 1, 2}:
        raise ValueError(f"bad experiment pair {pair}")
    c = 3 - a - b
    d = rt.d
    if rt.ranks[a] + rt.ranks[b] >= d and kernel_vector is None:
        raise ValueError(f"ranks {rt.ranks[a]} + {rt.ranks[b]} >= d = {d}: no common kernel guaranteed")
    if d < 2:
        raise ValueError("cannot reduce a one-dimensional triple")
    s = rt.projections[a] + rt.projections[b]
    if kernel_vector is None:
        lam, vecs = hermitian_eig(s, tol=1e-8)
        if lam[-1] > KERNEL_TOL:
            raise ValueError(f"smallest eigenvalue of P_a + P_b is {lam[-1]:.3e}: no common kernel")
        u = vecs[:, -1]
    else:
        u = np.asarray(kernel_vector, dtype=complex)
        u = u / np.linalg.norm(u)
        if np.linalg.norm(s @ u) > KERNEL_TOL:
            raise ValueError("kernel_vector is not annihilated by both projections")
    w_basis = _basis_with_last(u)
    rot = [w_basis.conj().T @ p @ w_basis for p in rt.projections]
    small = [0.5 * (m[:-1, :-1] + m[:-1, :-1].conj().T) for m in rot]
    n_c = rt.ranks[c]
    t = float(rot[c][-1, -1].real)
    v = rot[c][:-1, -1]
    blk = small[c]
    if t - t * t < 1e-12:
        t = 0.0 if t < 0.5 else 1.0
        keep_rank = n_c if t == 0.0 else n_c - 1
        blk = _snap_projection(blk, keep_rank)
        _, vecs = hermitian_eig(blk, tol=1e-8)
        if t == 0.0:
            # rank kept; the lowered one removes a vector of its range
            lowered = None if n_c == 0 else blk - np.outer(vecs[:, 0], vecs[:, 0].conj())
            kept = blk
        else:
            lowered = blk
            kept = None if n_c >= d else blk + np.outer(vecs[:, -1], vecs[:, -1].conj())
    else:
        w = v / np.linalg.norm(v)
        ww = np.outer(w, w.conj())
        lowered = blk - (1.0 - t) * ww
        kept = blk + t * ww

    def triple(pc, rank):
        if pc is None:
            return None
        mats = list(small)
        mats[c] = 0.5 * (pc + pc.conj().T)
        ranks = list(rt.ranks)
        ranks[c] = rank
        return RankedTriple(d - 1, tuple(ranks), tuple(mats))

    return ReductionStep(t, triple(lowered, n_c - 1), triple(kept, n_c), (a, b), c, d)


def blow_up(rt: RankedTriple, which: int) -> RankedTriple:
    """Append one dimension on which projection ``which`` is 1 and the others 0."""
    if which not in (0, 1, 2):
        raise ValueError("which must be 0, 1 or 2")
    mats = []
    for x, p in enumerate(rt.projections):
        m = np.zeros((rt.d + 1, rt.d + 1), dtype=complex)
        m[:-1, :-1] = p
        m[-1, -1] = 1.0 if x == which else 0.0
        mats.append(m)
    ranks = list(rt.ranks)
    ranks[which] += 1
    return RankedTriple(rt.d + 1, tuple(ranks), tuple(mats))


def reducible_pair(rt: RankedTriple):
    """Pair with the smallest rank sum below d (first in pair order on ties), else None."""
    best = None
    for pair in PAIRS:
        total = rt.ranks[pair[0]] + rt.ranks[pair[1]]
        if total < rt.d and (best is None or total < best[0]):
            best = (total, pair)
    return None if best is None else best[1]


def iterate_reduction(rt: RankedTriple):
    """Reduce greedily until no pair has rank sum below the dimension.

    Returns ``[(weight, terminal)]`` with
    ``rt.traces = sum weight * (terminal.d / rt.d) * terminal.traces``.
    """
    out = []
    stack = [(1.0, rt)]
    while stack:
        weight, cur = stack.pop()
        pair = reducible_pair(cur)
        if pair is None:
            out.append((weight, cur))
            continue
        if cur.d == 1:
            # both projections vanish on the only vector; nothing survives the reduction
            continue
        step = reduce_dimension(cur, pair)
        for child, share in ((step.right, 1.0 - step.t), (step.left, step.t)):
            if child is not None and share > 0:
                stack.append((weight * share, child))
    return out


def combine_terminals(terminals, d: int) -> np.ndarray:
    out = np.zeros(3)
    for weight, term in terminals:
        out += weight * (term.d / d) * term.traces
    return out


# ---------------------------------------------------------------------------
# inclusion checks


def _S(scale: float, offset=(0.0, 0.0, 0.0), seg: float = 0.0) -> DSet:
    """``scale * S2 + offset + (0, 0, [0, seg])`` as a DSet."""
    if seg > 0:
        off = (offset[0], offset[1], offset[2] + seg / 2.0)
        return DSet(scale, off, axis=2, half_length=seg / 2.0)
    return DSet(scale, tuple(offset))


def _need(cond: bool, msg: str):
    if not cond:
        raise ValueError(msg)


def proposition_case(prop: str, params: dict):
    """``(d, ranks, dsets)`` for an inclusion statement and its parameters."""
    p = {k: int(v) for k, v in params.items()}
    if prop in ("typeI", "typeI-swap"):
        n, d = p["n"], p["d"]
        _need(n >= 1 and 2 * n <= d, f"{prop} needs 1 <= n and 2n <= d")
        lo = max(0.0, (6 * n - 2 * d) / d)
        if prop == "typeI":
            return d, (n, n, n), (_S(lo), _S(2 * n / d))
        m = min(n, d - 2 * n)
        a = (m / d, m / d, (d - 2 * n) / d)
        b = (0.0, 0.0, (d - 2 * n) / d)
        return d, (n, d - n, d - n), (_S(lo, a), _S(2 * n / d, b))
    if prop in ("typeII", "typeII-swap"):
        n, k, d = p["n"], p["k"], p["d"]
        _need(n >= 1 and k >= 1 and 2 * (n + k) <= d, f"{prop} needs n, k >= 1 and 2(n + k) <= d")
        lo = max(0.0, (6 * n + 4 * k - 2 * d) / d)
        a2 = _S(2 * n / d, seg=k / d)
        if prop == "typeII":
            return d, (n, n + k, n + k), (_S(lo), a2)
        m = min(n, d - 2 * n - 2 * k)
        return d, (n, n + k, d - n - k), (_S(lo, (0.0, m / d, (m + k) / d)), a2)
    if prop == "typeIII":
        n, k, kp, d = p["n"], p["k"], p["kp"], p["d"]
        _need(min(n, k, kp) >= 1 and k <= kp and 2 * (n + kp) <= d, "typeIII needs n, k, k' >= 1, k <= k', 2(n + k') <= d")
        b1 = _S(max(0.0, (6 * n + 2 * k + 2 * kp - 2 * d) / d))
        b2 = _S(2 * n / d, seg=k / d)
        m = min(n, kp - k)
        b3 = _S(max(0.0, 2 * (n + k - kp) / d), (0.0, m / d, (m + k) / d))
        return d, (n, n + k, n + kp), (b1, b2, b3)
    raise ValueError(f"unknown proposition {prop!r}; choose from {PROPOSITIONS}")


def admissible_cases(max_d: int = 8):
    """All parameter sets of each hull statement with d <= max_d."""
    for d in range(2, max_d + 1):
        for n in range(1, d // 2 + 1):
            yield "typeI", {"n": n, "d": d}
            yield "typeI-swap", {"n": n, "d": d}
            for k in range(1, (d - 2 * n) // 2 + 1):
                yield "typeII", {"n": n, "k": k, "d": d}
                yield "typeII-swap", {"n": n, "k": k, "d": d}
                for kp in range(k, (d - 2 * n) // 2 + 1):
                    yield "typeIII", {"n": n, "k": k, "kp": kp, "d": d}


@dataclass
class InclusionReport:
    """Outcome of a sampling check.

    ``max_outward_distance`` is the largest certified upper bound on the
    distance of a sample to the hull. Screening stops refining a point once
    its bound drops below ``eps``, so values just under ``eps`` are expected.
    """

    proposition: str
    params: dict
    trials: int
    violations: int
    max_outward_distance: float
    inconclusive: int
    wall_time: float
    eps: float = VIOLATION_EPS
    extra: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.violations == 0 and self.inconclusive == 0


def _hull_violations(dsets, pts: np.ndarray, eps: float, max_iter: int):
    upper, _ = hull_distance_bounds(dsets, pts, eps, max_iter=300)
    dist = np.where(upper <= eps, upper, 0.0)
    violations = inconclusive = 0
    for i in np.flatnonzero(upper > eps):
        cert = hull_membership(dsets, pts[i], eps=eps, max_iter=max_iter)
        if cert.verdict == INCONCLUSIVE:
            cert = hull_membership(dsets, pts[i], eps=eps, max_iter=10 * max_iter)
        if cert.verdict == NONMEMBER:
            violations += 1
            dist[i] = cert.distance
        elif cert.verdict == INCONCLUSIVE:
            inconclusive += 1
            dist[i] = cert.distance
        else:
            assert cert.verdict == MEMBER
            dist[i] = cert.distance
    return violations, inconclusive, float(dist.max(initial=0.0))


def check_inclusion(prop: str, params: dict, trials: int, seed: int, mode: str = "haar",
                    eps: float = VIOLATION_EPS, max_iter: int = 20_000) -> InclusionReport:
    """Sample ``trials`` triples and count those farther than ``eps`` from the claimed hull."""
    if trials < 1:
        raise ValueError("trials must be positive")
    start = time.perf_counter()
    if prop == "two-exp":
        n1, n2, d = (int(params[k]) for k in ("n1", "n2", "d"))
        _need(d >= 1 and 0 <= n1 <= d and 0 <= n2 <= d, "two-exp needs 0 <= n1, n2 <= d")
        vals = sample_pair_traces(d, n1, n2, trials, seed, mode)
        lo, hi = two_projection_interval(n1, n2, d)
        outside = np.maximum(lo - vals, vals - hi)
        viol = int(np.sum(outside > 1e-12))
        extra = {"interval": [lo, hi], "observed": [float(vals.min()), float(vals.max())]}
        return InclusionReport(prop, dict(params), trials, viol, float(max(outside.max(), 0.0)), 0,
                               time.perf_counter() - start, 1e-12, extra)
    d, ranks, dsets = proposition_case(prop, params)
    pts = sample_trace_triples(d, ranks, trials, seed, mode)
    viol, inc, worst = _hull_violations(dsets, pts, eps, max_iter)
    return InclusionReport(prop, dict(params), trials, viol, worst, inc, time.perf_counter() - start, eps,
                           {"ranks": list(ranks)})


__all__ = [
    "RankedTriple", "ReductionStep", "InclusionReport", "PROPOSITIONS", "sample_ranked_triple",
    "sample_trace_triples", "sample_pair_traces", "sample_projection_stack", "two_projection_interval",
    "reduce_dimension", "blow_up", "reducible_pair", "iterate_reduction", "combine_terminals",
    "proposition_case", "admissible_cases", "check_inclusion",
]
