"""Convex hulls of affine copies of S2 and Frank-Wolfe membership.

A :class:`DSet` is ``offset + scale * S2 + [-half_length, half_length] * e_axis``.
Every set used here is of that form, so support functions and linear
minimization are closed form (see :func:`synccorr.elliptope.support_batch`).

:func:`hull_membership` decides ``p in conv(D_1 u ... u D_k)`` with a
fully-corrective Frank-Wolfe loop: each iteration calls the linear
minimization oracle once and then re-optimizes the weights over all atoms
collected so far (Wolfe's min-norm-point routine), which drops atoms that
are no longer needed. The result is tri-state and never wrong-signed:

* ``member``: explicit convex weights and per-set witness points whose
  combination is within ``eps`` of ``p``;
* ``nonmember``: a unit direction ``c`` with ``c.p - h(c) > eps``, where
  ``h`` is the exact support function of the hull;
* ``inconclusive``: neither bound was reached within the iteration cap.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .elliptope import members_batch, support_batch

MEMBER = "member"
NONMEMBER = "nonmember"
INCONCLUSIVE = "inconclusive"

DEFAULT_EPS = 1e-7
TIGHT = 1e-12


@dataclass(frozen=True)
class DSet:
    """``offset + scale * S2 + [-half_length, half_length] * e_axis``."""

    scale: float
    offset: tuple
    axis: int | None = None
    half_length: float = 0.0

    def __post_init__(self):
        if self.scale < 0:
            raise ValueError("scale must be non-negative")
        if self.half_length < 0:
            raise ValueError("half_length must be non-negative")
        if self.half_length > 0 and self.axis not in (0, 1, 2):
            raise ValueError("a positive half_length needs an axis in {0, 1, 2}")
        object.__setattr__(self, "offset", tuple(float(v) for v in self.offset))

    @property
    def offset_array(self) -> np.ndarray:
        return np.array(self.offset)

    @property
    def axis_vector(self) -> np.ndarray:
        e = np.zeros(3)
        if self.axis is not None:
            e[self.axis] = 1.0
        return e

    def point(self, q, s: float = 0.0) -> np.ndarray:
        """Position of the witness ``(q, s)``: elliptope point plus interval coordinate."""
        return self.offset_array + self.scale * (np.asarray(q, dtype=float) + 1.0) / 4.0 + s * self.axis_vector

    def center(self) -> np.ndarray:
        return self.point(np.zeros(3), 0.0)

    def support(self, c: np.ndarray):
        """Support values, elliptope argmax and interval argmax for (N, 3) directions."""
        c = np.atleast_2d(np.asarray(c, dtype=float))
        hq, q = support_batch(c)
        s = self.half_length * np.sign(c @ self.axis_vector) if self.half_length > 0 else np.zeros(len(c))
        vals = c @ self.offset_array + self.scale * (hq + c.sum(axis=1)) / 4.0 + self.half_length * np.abs(c @ self.axis_vector)
        return vals, q, s

    def points(self, q: np.ndarray, s: np.ndarray) -> np.ndarray:
        return self.offset_array + self.scale * (q + 1.0) / 4.0 + s[:, None] * self.axis_vector


@dataclass(frozen=True)
class DWitness:
    """Closed-form membership result for a single :class:`DSet`."""

    member: bool
    distance: float
    q: np.ndarray = field(repr=False)
    s: float

    def point(self, d: DSet) -> np.ndarray:
        return d.point(self.q, self.s)


def _feasible_q(u, w, zeta):
    """Snap (u, w, zeta) into the elliptope, ``zeta`` being the free coordinate."""
    u = np.clip(u, -1.0, 1.0)
    w = np.clip(w, -1.0, 1.0)
    rad = np.sqrt(np.maximum((1.0 - u * u) * (1.0 - w * w), 0.0))
    return u, w, np.clip(zeta, u * w - rad, u * w + rad), rad


def _dset_witness_batch(d: DSet, p: np.ndarray):
    """Best witness per point and its reconstruction distance."""
    p = np.atleast_2d(np.asarray(p, dtype=float))
    n = len(p)
    rel = p - d.offset_array
    if d.scale <= 1e-200:  # subnormal scales would overflow 1 / scale
        s = np.clip(rel @ d.axis_vector, -d.half_length, d.half_length) if d.half_length > 0 else np.zeros(n)
        q = np.zeros((n, 3))
        dist = np.linalg.norm(rel - s[:, None] * d.axis_vector, axis=1)
        return q, s, dist
    k = d.axis if d.axis is not None else 2
    others = [i for i in range(3) if i != k]
    q0 = 4.0 * rel / d.scale - 1.0
    u, w, zeta = q0[:, others[0]], q0[:, others[1]], q0[:, k]
    uc, wc, _, rad = _feasible_q(u, w, zeta)
    if d.half_length > 0:
        # zeta(s) = zeta - 4 s / scale must land in [uw - rad, uw + rad]
        lo = d.scale * (zeta - uc * wc - rad) / 4.0
        hi = d.scale * (zeta - uc * wc + rad) / 4.0
        mid = 0.5 * (np.maximum(lo, -d.half_length) + np.minimum(hi, d.half_length))
        s = np.clip(mid, -d.half_length, d.half_length)
    else:
        s = np.zeros(n)
    zeta_s = zeta - 4.0 * s / d.scale
    uc, wc, zc, _ = _feasible_q(u, w, zeta_s)
    q = np.empty((n, 3))
    q[:, others[0]] = uc
    q[:, others[1]] = wc
    q[:, k] = zc
    dist = np.linalg.norm(d.points(q, s) - p, axis=1)
    return q, s, dist


def dset_membership(d: DSet, p, tol: float = 1e-9) -> DWitness:
    """Closed-form test of ``p in d``; the witness is always an exact member of ``d``."""
    q, s, dist = _dset_witness_batch(d, np.asarray(p, dtype=float)[None, :])
    return DWitness(bool(dist[0] <= tol), float(dist[0]), q[0], float(s[0]))


def dset_contains_batch(d: DSet, p: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    return _dset_witness_batch(d, p)[2] <= tol


# ---------------------------------------------------------------------------
# hull support


def hull_support(dsets, c: np.ndarray):
    """Support of the hull for (N, 3) directions.

    Returns ``(values, set_index, q, s)`` where the argmax lies in
    ``dsets[set_index]`` with witness ``(q, s)``.
    """
    c = np.atleast_2d(np.asarray(c, dtype=float))
    vals, qs, ss = zip(*(d.support(c) for d in dsets))
    vals = np.stack(vals, axis=1)
    idx = np.argmax(vals, axis=1)
    rows = np.arange(len(c))
    q = np.stack(qs, axis=1)[rows, idx]
    s = np.stack(ss, axis=1)[rows, idx]
    return vals[rows, idx], idx, q, s


def support_points(dsets, c: np.ndarray) -> np.ndarray:
    vals, idx, q, s = hull_support(dsets, c)
    return np.stack([dsets[i].point(q[j], s[j]) for j, i in enumerate(idx)]) if len(idx) else np.zeros((0, 3))


# ---------------------------------------------------------------------------
# min-norm point over a finite atom set


def min_norm_weights(y: np.ndarray, lam: np.ndarray | None = None, max_iter: int = 500) -> np.ndarray:
    """Wolfe's algorithm: convex weights minimizing ``|| lam @ y ||``.

    ``lam`` warm-starts the corral (weights on the simplex).
    """
    m = len(y)
    if lam is None or len(lam) != m or lam.sum() <= 0:
        lam = np.zeros(m)
        lam[np.argmin(np.einsum("ij,ij->i", y, y))] = 1.0
    lam = lam / lam.sum()
    corral = list(np.flatnonzero(lam > 0))
    scale = max(float(np.max(np.abs(y))), 1e-300)
    for _ in range(max_iter):
        x = lam @ y
        dots = y @ x
        j = int(np.argmin(dots))
        if dots[j] >= x @ x - 1e-15 * scale * scale or j in corral:
            break
        corral.append(j)
        for _ in range(max_iter):
            ys = y[corral]
            # affine minimizer: y0 + mu @ (ys[1:] - y0), solved without forming the Gram matrix
            mu = np.linalg.lstsq((ys[1:] - ys[0]).T, -ys[0], rcond=1e-12)[0]
            alpha = np.concatenate([[1.0 - mu.sum()], mu])
            cur = lam[corral]
            if np.all(alpha > 1e-15):
                lam[:] = 0.0
                lam[corral] = alpha / alpha.sum()
                break
            neg = alpha <= 1e-15
            with np.errstate(divide="ignore", invalid="ignore"):
                ratios = np.where(neg, cur / (cur - alpha), np.inf)
            theta = float(np.clip(np.min(ratios), 0.0, 1.0))
            new = cur + theta * (alpha - cur)
            new[new < 1e-15] = 0.0
            lam[:] = 0.0
            lam[corral] = new
            corral = [c for c, v in zip(corral, new) if v > 0]
            if not corral:
                corral = [j]
                lam[j] = 1.0
            lam /= lam.sum()
    return lam


# ---------------------------------------------------------------------------
# Frank-Wolfe membership


@dataclass
class HullCertificate:
    """Outcome of a hull membership query.

    For ``member``: ``weights[i]`` and ``witnesses[i] = (q_i, s_i)`` for each
    set, with ``sum_i weights[i] * point_i`` equal to the reconstructed point
    ``x``. For ``nonmember``: unit ``direction`` with ``margin > 0``.
    """

    verdict: str
    p: np.ndarray
    distance: float
    margin: float
    gap: float
    iterations: int
    weights: np.ndarray | None = None
    witnesses: list | None = None
    x: np.ndarray | None = None
    direction: np.ndarray | None = None

    @property
    def is_member(self) -> bool:
        return self.verdict == MEMBER

    def points(self, dsets) -> np.ndarray:
        return np.stack([d.point(q, s) for d, (q, s) in zip(dsets, self.witnesses)])


def _member_from_single(dsets, i, wit: DWitness, p) -> HullCertificate:
    k = len(dsets)
    weights = np.zeros(k)
    weights[i] = 1.0
    witnesses = [(np.zeros(3), 0.0) for _ in range(k)]
    witnesses[i] = (wit.q.copy(), wit.s)
    x = wit.point(dsets[i])
    return HullCertificate(MEMBER, p, float(np.linalg.norm(x - p)), -np.inf, 0.0, 0, weights, witnesses, x)


def _aggregate(dsets, tags, lam, p):
    k = len(dsets)
    weights = np.zeros(k)
    qsum = np.zeros((k, 3))
    ssum = np.zeros(k)
    for (i, q, s), l in zip(tags, lam):
        if l <= 0:
            continue
        weights[i] += l
        qsum[i] += l * q
        ssum[i] += l * s
    witnesses = []
    for i in range(k):
        if weights[i] > 0:
            q = np.clip(qsum[i] / weights[i], -1.0, 1.0)
            s = float(np.clip(ssum[i] / weights[i], -dsets[i].half_length, dsets[i].half_length))
            witnesses.append((q, s))
        else:
            witnesses.append((np.zeros(3), 0.0))
    x = sum(w * d.point(q, s) for w, d, (q, s) in zip(weights, dsets, witnesses))
    return weights, witnesses, x


def _snap(dsets, weights, witnesses, x, p, tight):
    """Absorb a small residual ``p - x`` into one witness if it stays in its set."""
    delta = p - x
    for i in np.argsort(-weights):
        if weights[i] <= 1e-9:
            break
        d = dsets[i]
        target = d.point(*witnesses[i]) + delta / weights[i]
        wit = dset_membership(d, target, tol=tight)
        if wit.member:
            witnesses = list(witnesses)
            witnesses[i] = (wit.q.copy(), wit.s)
            x = sum(w * e.point(q, s) for w, e, (q, s) in zip(weights, dsets, witnesses))
            return witnesses, x
    return witnesses, x


def hull_membership(dsets, p, eps: float = DEFAULT_EPS, max_iter: int = 100_000, polish: int = 60,
                    tight: float = TIGHT) -> HullCertificate:
    """Fully-corrective Frank-Wolfe test of ``p in conv(dsets)``.

    Iterates until the distance drops below ``tight`` (then ``member``), a
    separating direction with margin above ``eps`` is found (``nonmember``),
    or the cap is hit. Once within ``eps``, at most ``polish`` further
    iterations are spent approaching ``tight``.
    """
    dsets = list(dsets)
    p = np.asarray(p, dtype=float)
    if not np.all(np.isfinite(p)):
        raise ValueError("non-finite point")
    best_single = None
    for i, d in enumerate(dsets):
        wit = dset_membership(d, p, tol=tight)
        if wit.member:
            return _member_from_single(dsets, i, wit, p)
        if best_single is None or wit.distance < best_single[1].distance:
            best_single = (i, wit)

    tags = [(i, np.zeros(3), 0.0) for i in range(len(dsets))]
    atoms = np.stack([d.center() for d in dsets])
    lam = None
    dist = np.inf
    margin = -np.inf
    gap = np.inf
    within = 0
    direction = None
    it = 0
    for it in range(1, max_iter + 1):
        lam = min_norm_weights(atoms - p, lam)
        keep = lam > 0
        atoms, lam = atoms[keep], lam[keep]
        tags = [t for t, k in zip(tags, keep) if k]
        x = lam @ atoms
        g = p - x
        dist = float(np.linalg.norm(g))
        if dist <= tight:
            break
        c = g / dist
        val, idx, q, s = hull_support(dsets, c[None, :])
        m = float(c @ p - val[0])
        if m > margin:
            margin, direction = m, c
        if margin > eps:
            break
        atom = dsets[idx[0]].point(q[0], s[0])
        gap = float(c @ (atom - x))
        if dist <= eps:
            within += 1
            if within > polish or gap <= 1e-15:
                break
        if np.min(np.linalg.norm(atoms - atom, axis=1)) <= 1e-15:
            # the oracle returned a known atom: no further progress possible
            break
        atoms = np.vstack([atoms, atom])
        lam = np.append(lam, 0.0)
        tags.append((int(idx[0]), q[0].copy(), float(s[0])))

    if margin > eps:
        return HullCertificate(NONMEMBER, p, dist, margin, gap, it, direction=direction)
    weights, witnesses, x = _aggregate(dsets, tags, lam, p)
    if np.linalg.norm(x - p) > tight:
        witnesses, x = _snap(dsets, weights, witnesses, x, p, tight)
    dist = float(np.linalg.norm(x - p))
    if dist <= eps:
        return HullCertificate(MEMBER, p, dist, margin, gap, it, weights, witnesses, x)
    i, wit = best_single
    if wit.distance <= eps:
        return _member_from_single(dsets, i, wit, p)
    return HullCertificate(INCONCLUSIVE, p, dist, margin, gap, it, direction=direction)


def hull_distance_bounds(dsets, p: np.ndarray, target: float, max_iter: int = 2000):
    """Vectorized plain Frank-Wolfe bounds on ``dist(p_i, hull)``.

    Returns ``(upper, lower)``; iteration stops for a point once either bound
    crosses ``target``. The lower bound is a certified separation margin.
    """
    dsets = list(dsets)
    p = np.atleast_2d(np.asarray(p, dtype=float))
    n = len(p)
    upper = np.full(n, np.inf)
    lower = np.full(n, -np.inf)
    inside = np.zeros(n, dtype=bool)
    for d in dsets:
        inside |= dset_contains_batch(d, p, tol=target)
    upper[inside] = 0.0
    centers = np.stack([d.center() for d in dsets])
    x = np.tile(centers.mean(axis=0), (n, 1))
    active = np.flatnonzero(~inside)
    for _ in range(max_iter):
        if active.size == 0:
            break
        g = p[active] - x[active]
        dist = np.linalg.norm(g, axis=1)
        upper[active] = dist
        zero = dist <= target
        c = g / np.where(dist > 0, dist, 1.0)[:, None]
        val, idx, q, s = hull_support(dsets, c)
        lower[active] = np.maximum(lower[active], np.einsum("ij,ij->i", c, p[active]) - val)
        s_pts = np.empty((len(active), 3))
        for i, d in enumerate(dsets):
            sel = idx == i
            if np.any(sel):
                s_pts[sel] = d.points(q[sel], s[sel])
        step = s_pts - x[active]
        den = np.einsum("ij,ij->i", step, step)
        gamma = np.clip(np.einsum("ij,ij->i", g, step) / np.where(den > 0, den, 1.0), 0.0, 1.0)
        x[active] += gamma[:, None] * step
        done = zero | (lower[active] > target)
        active = active[~done]
    if active.size:
        upper[active] = np.linalg.norm(p[active] - x[active], axis=1)
    return upper, lower


def members_mask(dsets, p: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """True where a point lies in a single set of ``dsets`` (no hull search)."""
    p = np.atleast_2d(p)
    out = np.zeros(len(p), dtype=bool)
    for d in dsets:
        out |= dset_contains_batch(d, p, tol)
    return out


__all__ = [
    "DSet", "DWitness", "HullCertificate", "MEMBER", "NONMEMBER", "INCONCLUSIVE",
    "dset_membership", "dset_contains_batch", "hull_support", "support_points",
    "hull_membership", "hull_distance_bounds", "members_mask", "min_norm_weights",
    "members_batch",
]
