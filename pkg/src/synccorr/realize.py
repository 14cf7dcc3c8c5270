"""Explicit traced-algebra realizations of slice points.

A realization is a direct sum of full matrix blocks ``M_{d_1} + ... + M_{d_k}``
with the trace ``tau = sum_k weight_k * tr_{d_k}`` (normalized block traces,
weights summing to one) and three block-diagonal projections ``P_x``. The
correlation is ``p(i, j | x, y) = tau(E_{x,i} E_{y,j})`` with ``E_{x,0} = P_x``
and ``E_{x,1} = I - P_x``.

Each body D_1, D_2, D_3 of a standard slice has a fixed block template
(at most 5, 6 and 5 dimensions); a hull point is the weighted direct sum of
up to three of them, so every realization has total dimension at most 16.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .elliptope import realize_s2
from .hull import DSet
from .matcore import projection_defect
from .slices import PAIRS, CorrelationTensor, SliceCertificate, build_D_sets, is_standard, standardize

MAX_DIMENSION = 16
DROP_WEIGHT = 1e-12


@dataclass(frozen=True)
class TracedAlgebra:
    dims: tuple
    weights: tuple

    def __post_init__(self):
        if len(self.dims) != len(self.weights):
            raise ValueError("one weight per block required")
        if any(int(d) < 1 for d in self.dims):
            raise ValueError("block dimensions must be >= 1")
        if any(w < 0 for w in self.weights):
            raise ValueError(f"negative block weight in {self.weights}")
        if abs(sum(self.weights) - 1.0) > 1e-12:
            raise ValueError(f"block weights sum to {sum(self.weights)!r}, not 1")
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))

    @property
    def total_dimension(self) -> int:
        return sum(self.dims)

    def trace(self, blocks) -> complex:
        return sum(w * np.trace(b) / d for w, d, b in zip(self.weights, self.dims, blocks))


@dataclass(frozen=True)
class Realization:
    """Three projections given block by block: ``projections[x][k]``."""

    algebra: TracedAlgebra
    projections: tuple = field(repr=False)

    def __post_init__(self):
        if len(self.projections) != 3:
            raise ValueError("a realization has exactly three projections")
        for blocks in self.projections:
            if len(blocks) != len(self.algebra.dims):
                raise ValueError("projection block count does not match the algebra")
            for b, d in zip(blocks, self.algebra.dims):
                if np.shape(b) != (d, d):
                    raise ValueError(f"block of shape {np.shape(b)} in a {d}-dimensional slot")

    @property
    def marginals(self) -> np.ndarray:
        return np.array([self.algebra.trace(bl).real for bl in self.projections])

    @property
    def correlation(self) -> np.ndarray:
        return np.array([self.tau_product(x, y).real for x, y in PAIRS])

    def tau_product(self, x: int, y: int, ix: int = 0, iy: int = 0) -> complex:
        total = 0.0
        for w, d, a, b in zip(self.algebra.weights, self.algebra.dims, self.projections[x], self.projections[y]):
            ea = a if ix == 0 else np.eye(d) - a
            eb = b if iy == 0 else np.eye(d) - b
            total += w * np.trace(ea @ eb) / d
        return total

    def full_matrices(self):
        from .matcore import direct_sum

        return [direct_sum(*[np.asarray(b, dtype=complex) for b in bl]) for bl in self.projections]


def _delta_blocks(pattern):
    return [np.array([[float(v)]], dtype=complex) for v in pattern]


def _pauli_blocks(q):
    return [p.matrix for p in realize_s2(q)]


def realize_D_point(r_std, which: int, q, s: float = 0.0, target=None, tol: float = 1e-10) -> Realization:
    """Realize the point of body ``which`` (1, 2 or 3) given by witness ``(q, s)``.

    ``q`` is the elliptope preimage and ``s`` the interval coordinate
    (measured from the interval center, D_2 only). When ``target`` is given
    it must match the witness position within ``tol``.
    """
    r = np.asarray(r_std, dtype=float)
    if not is_standard(r):
        raise ValueError(f"r = {r} is not standard")
    if which not in (1, 2, 3):
        raise ValueError("which must be 1, 2 or 3")
    r1, r2, r3 = (float(v) for v in np.clip(r, 0.0, 0.5))
    d = build_D_sets(r)[which - 1]
    if target is not None:
        err = float(np.max(np.abs(d.point(q, s) - np.asarray(target, dtype=float))))
        if err > tol:
            raise ValueError(f"witness does not reproduce the target (error {err:.3e})")
    if abs(s) > d.half_length + 1e-15:
        raise ValueError(f"interval coordinate {s} outside [-{d.half_length}, {d.half_length}]")

    if which == 1:
        total = r1 + r2 + r3
        if total <= 1.0:
            weights = (r1, r2, r3, 1.0 - total)
            projs = [_delta_blocks([x == 0, x == 1, x == 2, 0]) for x in range(3)]
        else:
            weights = (2.0 * (total - 1.0), 1.0 - r2 - r3, 1.0 - r1 - r3, 1.0 - r1 - r2)
            pauli = _pauli_blocks(q)
            projs = [[pauli[x]] + _delta_blocks([x == 0, x == 1, x == 2]) for x in range(3)]
    elif which == 2:
        length = r2 - r1
        weights = (2.0 * r1, 2.0 * length, r3 - r2, 1.0 - r3 - r2)
        pauli = _pauli_blocks(q)
        # tr_2(Q2 Q3) = cos^2(theta) / 2 carries the interval coordinate
        frac = 0.0 if length <= 0 else float(np.clip((0.5 * length + s) / length, 0.0, 1.0))
        c, sn = np.sqrt(frac), np.sqrt(1.0 - frac)
        q2 = np.array([[1, 0], [0, 0]], dtype=complex)
        q3 = np.array([[c * c, c * sn], [c * sn, sn * sn]], dtype=complex)
        second = [np.zeros((2, 2), dtype=complex), q2, q3]
        projs = [[pauli[x], second[x]] + _delta_blocks([x == 2, 0]) for x in range(3)]
    else:
        if r1 + r2 <= r3:
            weights = (r1, r2, r3 - r1 - r2, 1.0 - r3)
            patterns = ([1, 0, 0, 0], [0, 1, 0, 0], [1, 1, 1, 0])
            projs = [_delta_blocks(pt) for pt in patterns]
        else:
            weights = (2.0 * (r1 + r2 - r3), r3 - r2, r3 - r1, 1.0 - r1 - r2)
            pauli = _pauli_blocks(q)
            patterns = ([1, 0, 0], [0, 1, 0], [1, 1, 0])
            projs = [[pauli[x]] + _delta_blocks(patterns[x]) for x in range(3)]
    weights = tuple(max(w, 0.0) for w in weights)
    total_w = sum(weights)
    weights = tuple(w / total_w for w in weights)
    dims = tuple(b.shape[0] for b in projs[0])
    return Realization(TracedAlgebra(dims, weights), tuple(tuple(bl) for bl in projs))


def combine(parts, outer_weights) -> Realization:
    """Direct sum of realizations with outer convex weights folded into the trace."""
    dims, weights = [], []
    projs = ([], [], [])
    for part, t in zip(parts, outer_weights):
        dims.extend(part.algebra.dims)
        weights.extend(t * w for w in part.algebra.weights)
        for x in range(3):
            projs[x].extend(part.projections[x])
    total = sum(weights)
    return Realization(TracedAlgebra(tuple(dims), tuple(w / total for w in weights)), tuple(tuple(p) for p in projs))


def apply_slice_map(real: Realization, smap) -> Realization:
    """Transport a standard-frame realization to the original experiment labels."""
    out = [None, None, None]
    for k, x in enumerate(smap.order):
        out[x] = real.projections[k]
    blocks = tuple(
        tuple((np.eye(b.shape[0]) - b) if smap.flips[x] else b for b in out[x]) for x in range(3)
    )
    return Realization(real.algebra, blocks)


def realize_hull_point(r, cert: SliceCertificate) -> Realization:
    """Realization of a certified member point of the slice of ``r``."""
    if not isinstance(cert, SliceCertificate):
        raise TypeError("expected a SliceCertificate from slice_membership")
    if not cert.is_member:
        raise ValueError(f"cannot realize a {cert.verdict} certificate")
    r = np.asarray(r, dtype=float)
    r_std, smap = standardize(r)
    if not np.allclose(r_std, cert.r_std, atol=0, rtol=0):
        raise ValueError("certificate was issued for a different marginal vector")
    weights = np.asarray(cert.hull.weights, dtype=float)
    weights = np.where(weights < DROP_WEIGHT, 0.0, weights)
    weights = weights / weights.sum()
    parts, outer = [], []
    for i, (t, (q, s)) in enumerate(zip(weights, cert.hull.witnesses)):
        if t > 0:
            parts.append(realize_D_point(r_std, i + 1, q, s))
            outer.append(t)
    return apply_slice_map(combine(parts, outer), smap)


def evaluate_correlation(real: Realization) -> CorrelationTensor:
    # tau(AB) = sum_ij w_i A_ij B_ji with w the per-coordinate trace weight
    alg = real.algebra
    w = np.repeat(np.asarray(alg.weights) / np.asarray(alg.dims), alg.dims)
    eye = np.eye(alg.total_dimension)
    effects = []
    for m in real.full_matrices():
        effects += [m, eye - m]
    e = np.stack(effects)
    t = np.einsum("i,aij,bji->ab", w, e, e).real.reshape(3, 2, 3, 2).transpose(0, 2, 1, 3)
    neg = tuple((x, y, i, j) for x, y, i, j in zip(*np.nonzero(t < -1e-12)))
    return CorrelationTensor(t, tuple(tuple(int(v) for v in n) for n in neg))


@dataclass(frozen=True)
class VerificationReport:
    checks: dict
    details: dict

    @property
    def passed(self) -> bool:
        return all(self.checks.values())


def verify_realization(real: Realization, r, p, tol: float = 1e-9) -> VerificationReport:
    """Check projectionhood, PVMs, marginals, correlation, synchrony and the dimension bound."""
    r = np.asarray(r, dtype=float)
    p = np.asarray(p, dtype=float)
    proj_err = 0.0
    pvm_err = 0.0
    # block diagonal, so checking the assembled matrices covers every block
    for b in real.full_matrices():
        comp = np.eye(b.shape[0]) - b
        proj_err = max(proj_err, projection_defect(b), float(np.max(np.abs(b - b.conj().T))))
        pvm_err = max(pvm_err, projection_defect(comp), float(np.max(np.abs(b + comp - np.eye(b.shape[0])))))
    tensor = evaluate_correlation(real).values
    sync_err = max(max(abs(tensor[x, x, 0, 1]), abs(tensor[x, x, 1, 0])) for x in range(3))
    marg_err = float(np.max(np.abs(real.marginals - r)))
    corr_err = float(np.max(np.abs(real.correlation - p)))
    norm_err = float(np.max(np.abs(tensor.sum(axis=(2, 3)) - 1.0)))
    checks = {
        "projection": proj_err <= tol,
        "pvm": pvm_err <= tol and norm_err <= tol,
        "marginals": marg_err <= tol,
        "correlation": corr_err <= tol,
        "synchrony": sync_err <= tol and float(tensor.min()) >= -tol,
        "dimension": real.algebra.total_dimension <= MAX_DIMENSION,
    }
    details = {
        "projection_error": proj_err,
        "pvm_error": max(pvm_err, norm_err),
        "marginal_error": marg_err,
        "correlation_error": corr_err,
        "synchrony_error": sync_err,
        "min_entry": float(tensor.min()),
        "dimension": real.algebra.total_dimension,
    }
    return VerificationReport(checks, details)


__all__ = [
    "TracedAlgebra", "Realization", "VerificationReport", "realize_D_point", "realize_hull_point",
    "combine", "apply_slice_map", "evaluate_correlation", "verify_realization", "MAX_DIMENSION", "DSet",
]
