"""Dense Hermitian matrix kernel for small dimensions.

Everything here works on plain ``numpy.ndarray`` values of complex dtype.
The :class:`Projection` and :class:`Pvm` wrappers validate their invariants
on construction and are immutable afterwards.

Randomness goes through :func:`rng_stream`, a Philox (counter-based)
generator keyed by ``(seed, *stream)``. Two calls with the same key produce
the same numbers, and distinct task indices give independent streams, so
parallel or reordered sampling stays reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

HERM_TOL = 1e-12
IDEMPOTENT_TOL = 1e-10
RANK_TOL = 1e-9


class NotHermitianError(ValueError):
    """Raised when a matrix is not Hermitian within tolerance."""

    def __init__(self, asymmetry: float, tol: float):
        super().__init__(f"matrix is not Hermitian: max |M - M^H| = {asymmetry:.3e} > {tol:.1e}")
        self.asymmetry = asymmetry


def rng_stream(seed: int, *stream: int) -> np.random.Generator:
    """Return an independent Philox generator for ``(seed, *stream)``."""
    if seed < 0:
        raise ValueError("seed must be non-negative")
    ss = np.random.SeedSequence([int(seed) & (2**64 - 1), *[int(s) for s in stream]])
    return np.random.Generator(np.random.Philox(ss))


def asymmetry(m: np.ndarray) -> float:
    m = np.asarray(m)
    if m.size == 0:
        return 0.0
    return float(np.max(np.abs(m - m.conj().T)))


def check_hermitian(m: np.ndarray, tol: float = HERM_TOL) -> np.ndarray:
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    a = asymmetry(m)
    if a > tol:
        raise NotHermitianError(a, tol)
    return m


# ---------------------------------------------------------------------------
# eigendecomposition


def hermitian_eig(m: np.ndarray, tol: float = 1e-10, method: str = "lapack"):
    """Eigendecomposition of a Hermitian matrix.

    Returns ``(eigenvalues, eigenvectors)`` with eigenvalues in descending
    order and eigenvectors as orthonormal columns. ``method="jacobi"`` uses
    the cyclic Jacobi routine below instead of LAPACK.
    """
    m = check_hermitian(m, tol)
    if method == "jacobi":
        return jacobi_eigh(m)
    if method != "lapack":
        raise ValueError(f"unknown method {method!r}")
    h = 0.5 * (m + m.conj().T)
    vals, vecs = np.linalg.eigh(h)
    return vals[::-1].copy(), vecs[:, ::-1].copy()


def jacobi_eigh(m: np.ndarray, max_sweeps: int = 64, tol: float = 1e-15):
    """Cyclic complex Jacobi eigensolver (row-by-row sweep order).

    Each rotation annihilates one off-diagonal pair (p, q). Intended for
    dimensions up to a few dozen; returns descending eigenvalues.
    """
    a = np.array(m, dtype=complex)
    a = 0.5 * (a + a.conj().T)
    n = a.shape[0]
    v = np.eye(n, dtype=complex)
    scale = max(np.linalg.norm(a), 1e-300)
    for _ in range(max_sweeps):
        off = np.linalg.norm(a - np.diag(np.diag(a)))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                mag = abs(apq)
                if mag <= 1e-300:
                    continue
                phase = apq / mag
                app = a[p, p].real
                aqq = a[q, q].real
                # phase-correct the pair to a real symmetric 2x2, then rotate
                theta = 0.5 * (aqq - app) / mag
                t = 1.0 if theta == 0 else np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                g = np.array([[c, s], [-s * np.conj(phase), c * np.conj(phase)]], dtype=complex)
                a[:, [p, q]] = a[:, [p, q]] @ g
                a[[p, q], :] = g.conj().T @ a[[p, q], :]
                v[:, [p, q]] = v[:, [p, q]] @ g
                a[p, q] = 0.0
                a[q, p] = 0.0
    vals = np.real(np.diag(a))
    order = np.argsort(-vals, kind="stable")
    return vals[order], v[:, order]


# ---------------------------------------------------------------------------
# random matrices


def _haar_from_ginibre(z: np.ndarray) -> np.ndarray:
    q, r = np.linalg.qr(z)
    d = np.diagonal(r, axis1=-2, axis2=-1)
    ph = np.where(np.abs(d) > 0, d / np.where(np.abs(d) > 0, np.abs(d), 1.0), 1.0)
    return q * ph[..., None, :]


def haar_unitaries(dim: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """``count`` Haar-random unitaries of shape (count, dim, dim)."""
    if dim < 1:
        raise ValueError("dim must be >= 1")
    z = (rng.standard_normal((count, dim, dim)) + 1j * rng.standard_normal((count, dim, dim))) / np.sqrt(2.0)
    return _haar_from_ginibre(z)


def random_unitary(dim: int, seed: int) -> np.ndarray:
    """Haar-random unitary, deterministic in ``(dim, seed)``."""
    if dim < 1:
        raise ValueError("dim must be >= 1")
    return haar_unitaries(dim, 1, rng_stream(seed, dim))[0]


def projections_from_unitaries(u: np.ndarray, rank: int) -> np.ndarray:
    """Stacked ``U diag(1^rank, 0) U^H`` for a stack of unitaries."""
    cols = u[..., :, :rank]
    return cols @ np.conj(np.swapaxes(cols, -1, -2))


def random_projections(dim: int, rank: int, count: int, rng: np.random.Generator) -> np.ndarray:
    if not 0 <= rank <= dim:
        raise ValueError(f"rank {rank} outside [0, {dim}]")
    if rank == 0:
        return np.zeros((count, dim, dim), dtype=complex)
    if rank == dim:
        return np.broadcast_to(np.eye(dim, dtype=complex), (count, dim, dim)).copy()
    return projections_from_unitaries(haar_unitaries(dim, count, rng), rank)


def random_projection(dim: int, rank: int, seed: int) -> "Projection":
    if dim < 1:
        raise ValueError("dim must be >= 1")
    if not 0 <= rank <= dim:
        raise ValueError(f"rank {rank} outside [0, {dim}]")
    u = random_unitary(dim, seed)
    return Projection(projections_from_unitaries(u, rank), rank)


# ---------------------------------------------------------------------------
# projections and PVMs


def projection_defect(p: np.ndarray) -> float:
    """max-entry norm of P^2 - P."""
    return float(np.max(np.abs(p @ p - p))) if p.size else 0.0


@dataclass(frozen=True)
class Projection:
    """A Hermitian idempotent matrix together with its rank."""

    matrix: np.ndarray = field(repr=False)
    rank: int

    def __post_init__(self):
        m = check_hermitian(self.matrix)
        if projection_defect(m) > IDEMPOTENT_TOL:
            raise ValueError(f"not idempotent: max |P^2 - P| = {projection_defect(m):.3e}")
        tr = float(np.trace(m).real)
        if self.rank != round(tr) or abs(tr - self.rank) > RANK_TOL:
            raise ValueError(f"rank {self.rank} inconsistent with trace {tr!r}")
        m = m.copy()
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)

    @classmethod
    def from_matrix(cls, m) -> "Projection":
        m = np.asarray(m, dtype=complex)
        return cls(m, int(round(float(np.trace(m).real))))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def complement(self) -> "Projection":
        return Projection(np.eye(self.dim) - self.matrix, self.dim - self.rank)


@dataclass(frozen=True)
class Pvm:
    elements: tuple

    def __post_init__(self):
        els = tuple(self.elements)
        if not els:
            raise ValueError("empty PVM")
        dims = {e.dim for e in els}
        if len(dims) != 1:
            raise ValueError(f"PVM elements have different dims {sorted(dims)}")
        total = sum(e.matrix for e in els)
        err = float(np.max(np.abs(total - np.eye(els[0].dim))))
        if err > IDEMPOTENT_TOL:
            raise ValueError(f"PVM elements do not sum to identity (error {err:.3e})")
        object.__setattr__(self, "elements", els)


def normalized_trace(m: np.ndarray) -> complex:
    return np.trace(m) / m.shape[-1]


def trace_pair(p: np.ndarray, q: np.ndarray) -> float:
    """tr_d(PQ) for Hermitian P, Q; the imaginary residue is dropped."""
    val = np.sum(p * q.T) / p.shape[0]  # == Tr(P Q) / d
    if abs(val.imag) > 1e-12:
        raise ValueError(f"tr(PQ) has imaginary part {val.imag:.3e}")
    return float(val.real)


def _as_matrix(p) -> np.ndarray:
    return p.matrix if isinstance(p, Projection) else np.asarray(p, dtype=complex)


def trace_triple(p1, p2, p3) -> np.ndarray:
    """Normalized-trace correlation (tr(P1P2), tr(P1P3), tr(P2P3))."""
    a, b, c = (_as_matrix(p) for p in (p1, p2, p3))
    if not (a.shape == b.shape == c.shape):
        raise ValueError(f"dimension mismatch: {a.shape}, {b.shape}, {c.shape}")
    return np.array([trace_pair(a, b), trace_pair(a, c), trace_pair(b, c)])


def trace_triples_batch(a: np.ndarray, b: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Vectorized trace triples for stacks of shape (N, d, d)."""
    d = a.shape[-1]

    def tr(x, y):
        return np.einsum("nij,nji->n", x, y).real / d

    return np.stack([tr(a, b), tr(a, c), tr(b, c)], axis=-1)


def direct_sum(*blocks: np.ndarray) -> np.ndarray:
    n = sum(b.shape[0] for b in blocks)
    out = np.zeros((n, n), dtype=complex)
    i = 0
    for b in blocks:
        k = b.shape[0]
        out[i:i + k, i:i + k] = b
        i += k
    return out
