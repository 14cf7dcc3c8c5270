"""Slices of C_q^s(3,2) at a fixed marginal vector.

A correlation in C_q^s(3,2) is fixed by the marginals ``r = (r1, r2, r3)``
(probability of outcome 0 for each experiment) and the joint-zero
probabilities ``w = (w12, w13, w23)``. For a standard marginal vector
(``0 <= r1 <= r2 <= r3 <= 1/2``) the slice is the convex hull of three
affine copies of S2 built by :func:`build_D_sets`; every other slice is the
image of a standard one under outcome flips and experiment swaps
(:class:`SliceMap`).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .matcore import rng_stream
from .hull import (
    DEFAULT_EPS,
    MEMBER,
    NONMEMBER,
    DSet,
    HullCertificate,
    dset_membership,
    hull_membership,
    hull_support,
)

PAIRS = ((0, 1), (0, 2), (1, 2))
STANDARD_TOL = 1e-12


def pair_index(x: int, y: int) -> int:
    if x == y:
        raise ValueError("a pair needs two distinct experiments")
    return PAIRS.index((min(x, y), max(x, y)))


def _vec3(v, name: str) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape != (3,):
        raise ValueError(f"{name} must have three entries, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} has non-finite entries")
    return v


def check_marginals(r) -> np.ndarray:
    r = _vec3(r, "r")
    if np.any(r < 0) or np.any(r > 1):
        raise ValueError(f"marginals must lie in [0, 1], got {r}")
    return r


def is_standard(r, tol: float = STANDARD_TOL) -> bool:
    r = np.asarray(r, dtype=float)
    return bool(r[0] >= -tol and r[0] <= r[1] + tol and r[1] <= r[2] + tol and r[2] <= 0.5 + tol)


# ---------------------------------------------------------------------------
# generators: outcome flips and experiment swaps


def flip_experiment(r, w, x: int):
    """Reverse the outcomes of experiment ``x`` (P_x -> I - P_x)."""
    r = np.array(r, dtype=float)
    w = np.array(w, dtype=float)
    for y in range(3):
        if y != x:
            k = pair_index(x, y)
            w[k] = r[y] - w[k]
    r[x] = 1.0 - r[x]
    return r, w


def swap_experiments(r, w, x: int, y: int):
    """Interchange the labels of experiments ``x`` and ``y``."""
    perm = [0, 1, 2]
    perm[x], perm[y] = perm[y], perm[x]
    return permute_experiments(r, w, perm)


def permute_experiments(r, w, order):
    """New experiment ``k`` is old experiment ``order[k]``."""
    r = np.asarray(r, dtype=float)
    w = np.asarray(w, dtype=float)
    new_w = np.array([w[pair_index(order[a], order[b])] for a, b in PAIRS])
    return r[list(order)].copy(), new_w


@dataclass(frozen=True)
class SliceMap:
    """Affine map from a standard slice onto the slice of ``r``.

    ``order[k]`` is the original experiment playing the role of standard
    experiment ``k``; ``flips[x]`` says whether original experiment ``x``
    had its outcomes reversed. Going to the standard frame applies the flips
    first and then the permutation.
    """

    order: tuple = (0, 1, 2)
    flips: tuple = (False, False, False)

    def __post_init__(self):
        if sorted(self.order) != [0, 1, 2]:
            raise ValueError(f"order must be a permutation of (0, 1, 2), got {self.order}")
        object.__setattr__(self, "order", tuple(int(i) for i in self.order))
        object.__setattr__(self, "flips", tuple(bool(f) for f in self.flips))

    @property
    def is_identity(self) -> bool:
        return self.order == (0, 1, 2) and not any(self.flips)

    def _inverse_order(self):
        inv = [0, 0, 0]
        for k, x in enumerate(self.order):
            inv[x] = k
        return inv

    def to_standard(self, r, w=None):
        r = np.asarray(r, dtype=float)
        w = np.zeros(3) if w is None else np.asarray(w, dtype=float)
        for x in range(3):
            if self.flips[x]:
                r, w = flip_experiment(r, w, x)
        return permute_experiments(r, w, self.order)

    def from_standard(self, r_std, w_std=None):
        w_std = np.zeros(3) if w_std is None else np.asarray(w_std, dtype=float)
        r, w = permute_experiments(r_std, w_std, self._inverse_order())
        for x in range(3):
            if self.flips[x]:
                r, w = flip_experiment(r, w, x)
        return r, w

    def affine(self, r_std):
        """``(A, b)`` with ``w = A @ w_std + b`` on the slice of ``r_std``.

        ``A`` is a signed permutation matrix, hence orthogonal.
        """
        _, b = self.from_standard(r_std, np.zeros(3))
        a = np.empty((3, 3))
        for j in range(3):
            e = np.zeros(3)
            e[j] = 1.0
            a[:, j] = self.from_standard(r_std, e)[1] - b
        # entries are exactly 0 or +-1; remove the rounding left by the subtraction
        return np.rint(a), b

    def projections_from_standard(self, projections, identity):
        """Operator-level action: permute, then replace P by I - P on flipped experiments."""
        out = [None, None, None]
        for k, x in enumerate(self.order):
            out[x] = projections[k]
        return [identity - p if self.flips[x] else p for x, p in enumerate(out)]


def standardize(r):
    """Return ``(r_std, SliceMap)`` with ``map.from_standard(r_std)[0] == r``."""
    r = check_marginals(r)
    flips = tuple(bool(v > 0.5) for v in r)
    flipped = np.where(flips, 1.0 - r, r)
    order = tuple(int(i) for i in np.argsort(flipped, kind="stable"))
    smap = SliceMap(order, flips)
    return flipped[list(order)], smap


# ---------------------------------------------------------------------------
# the three bodies


def build_D_sets(r_std):
    """The three bodies whose convex hull is the standard slice of ``r_std``."""
    r = _vec3(r_std, "r_std")
    if not is_standard(r):
        raise ValueError(f"r = {r} is not standard (0 <= r1 <= r2 <= r3 <= 1/2); standardize first")
    r1, r2, r3 = (float(v) for v in np.clip(r, 0.0, 0.5))
    seg = max(r2 - r1, 0.0) / 2.0
    d1 = DSet(2.0 * max(0.0, r1 + r2 + r3 - 1.0), (0.0, 0.0, 0.0))
    d2 = DSet(2.0 * r1, (0.0, 0.0, seg), axis=2, half_length=seg)
    d3 = DSet(2.0 * max(0.0, r1 + r2 - r3), (0.0, min(r1, r3 - r2), min(r2, r3 - r1)))
    return d1, d2, d3


@dataclass
class SliceCertificate:
    """Membership certificate for a point of an arbitrary slice.

    The hull computation happens in the standard frame; ``direction`` and
    ``x`` are reported in the original frame.
    """

    r: np.ndarray
    p: np.ndarray
    r_std: np.ndarray
    slice_map: SliceMap
    dsets: tuple = field(repr=False)
    hull: HullCertificate = field(repr=False)

    @property
    def verdict(self) -> str:
        return self.hull.verdict

    @property
    def is_member(self) -> bool:
        return self.hull.verdict == MEMBER

    @property
    def distance(self) -> float:
        return self.hull.distance

    @property
    def margin(self) -> float:
        return self.hull.margin

    @property
    def p_std(self) -> np.ndarray:
        return self.hull.p

    @property
    def direction(self):
        if self.hull.direction is None:
            return None
        a, _ = self.slice_map.affine(self.r_std)
        return a @ self.hull.direction

    @property
    def x(self):
        if self.hull.x is None:
            return None
        return self.slice_map.from_standard(self.r_std, self.hull.x)[1]


def slice_membership(r, p, eps: float = DEFAULT_EPS, max_iter: int = 100_000) -> SliceCertificate:
    r = check_marginals(r)
    p = _vec3(p, "p")
    r_std, smap = standardize(r)
    _, p_std = smap.to_standard(r, p)
    dsets = build_D_sets(r_std)
    cert = hull_membership(dsets, p_std, eps=eps, max_iter=max_iter)
    return SliceCertificate(r, p, r_std, smap, dsets, cert)


def slice_support(r, c):
    """Support function of the slice of ``r``; accepts one or many directions."""
    r = check_marginals(r)
    c = np.asarray(c, dtype=float)
    single = c.ndim == 1
    c = np.atleast_2d(c)
    r_std, smap = standardize(r)
    a, b = smap.affine(r_std)
    vals, *_ = hull_support(build_D_sets(r_std), c @ a)
    vals = vals + c @ b
    vals[~np.any(c != 0, axis=1)] = 0.0
    return float(vals[0]) if single else vals


def slice_support_points(r, c):
    """Support values and touch points (original frame) for (N, 3) directions."""
    r = check_marginals(r)
    c = np.atleast_2d(np.asarray(c, dtype=float))
    r_std, smap = standardize(r)
    a, b = smap.affine(r_std)
    dsets = build_D_sets(r_std)
    vals, idx, q, s = hull_support(dsets, c @ a)
    pts_std = np.stack([dsets[i].point(q[j], s[j]) for j, i in enumerate(idx)])
    return vals + c @ b, pts_std @ a.T + b


def two_experiment_slice(r1: float, r2: float):
    """Closed interval of attainable w12 for marginals (r1, r2)."""
    for v in (r1, r2):
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"marginal {v} outside [0, 1]")
    return max(0.0, r1 + r2 - 1.0), min(r1, r2)


# ---------------------------------------------------------------------------
# full correlation tensor


@dataclass(frozen=True)
class CorrelationTensor:
    """``values[x, y, i, j] = p(i, j | x, y)`` plus any negative entries found."""

    values: np.ndarray
    negative: tuple

    @property
    def valid(self) -> bool:
        return not self.negative

    def flat(self) -> np.ndarray:
        return self.values.reshape(-1)


def correlation_tensor(r, w, tol: float = 1e-12) -> CorrelationTensor:
    r = _vec3(r, "r")
    w = _vec3(w, "w")
    t = np.zeros((3, 3, 2, 2))
    for x in range(3):
        t[x, x] = np.diag([r[x], 1.0 - r[x]])
    for k, (x, y) in enumerate(PAIRS):
        blk = np.array([[w[k], r[x] - w[k]], [r[y] - w[k], w[k] + 1.0 - r[x] - r[y]]])
        t[x, y] = blk
        t[y, x] = blk.T
    neg = tuple((x, y, i, j) for x, y, i, j in zip(*np.nonzero(t < -tol)))
    return CorrelationTensor(t, tuple(tuple(int(v) for v in n) for n in neg))


# ---------------------------------------------------------------------------
# meshes


def fibonacci_sphere(n: int) -> np.ndarray:
    i = np.arange(n) + 0.5
    phi = np.arccos(1.0 - 2.0 * i / n)
    theta = np.pi * (1.0 + 5.0**0.5) * i
    return np.stack([np.cos(theta) * np.sin(phi), np.sin(theta) * np.sin(phi), np.cos(phi)], axis=1)


@dataclass(frozen=True)
class SliceMesh:
    r: np.ndarray
    resolution: int
    directions: np.ndarray
    points: np.ndarray
    support: np.ndarray


def slice_mesh(r, resolution: int) -> SliceMesh:
    """Boundary touch points of the slice for ``resolution`` Fibonacci directions."""
    if resolution < 6:
        raise ValueError("resolution must be at least 6")
    r = check_marginals(r)
    dirs = fibonacci_sphere(resolution)
    vals, pts = slice_support_points(r, dirs)
    return SliceMesh(r, resolution, dirs, pts, vals)


def mesh_volume(points, samples: int, seed: int, box=(0.0, 0.5), eps: float = 1e-7, budget: int = 20_000_000):
    """Monte-Carlo volume of the convex hull of ``points`` by rejection sampling in a cube.

    A sample counts as inside when it is within ``eps`` of the hull's
    facet half-spaces. ``budget`` caps the size of the sample-by-facet
    table held in memory. Returns ``(volume, inside_fraction)``.
    """
    from scipy.spatial import ConvexHull

    hull = ConvexHull(np.asarray(points, dtype=float))
    lo, hi = box
    rng = rng_stream(seed, samples)
    hits = 0
    chunk = max(1, budget // len(hull.equations))
    for start in range(0, samples, chunk):
        n = min(chunk, samples - start)
        x = rng.uniform(lo, hi, (n, 3))
        off = x @ hull.equations[:, :3].T + hull.equations[:, 3]
        hits += int(np.count_nonzero(np.all(off <= eps, axis=1)))
    frac = hits / samples
    return frac * (hi - lo) ** 3, frac


__all__ = [
    "mesh_volume", "PAIRS", "SliceMap", "SliceCertificate", "CorrelationTensor", "SliceMesh",
    "pair_index", "check_marginals", "is_standard", "flip_experiment", "swap_experiments",
    "permute_experiments", "standardize", "build_D_sets", "slice_membership", "slice_support",
    "slice_support_points", "two_experiment_slice", "correlation_tensor", "fibonacci_sphere",
    "slice_mesh", "dset_membership", "MEMBER", "NONMEMBER",
]
