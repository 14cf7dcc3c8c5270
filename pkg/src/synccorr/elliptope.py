"""The 3x3 elliptope and its affine image S2 = (E + 1) / 4.

An elliptope point is stored as the above-diagonal triple ``q = (x', y', z')``
of the unit-diagonal matrix::

    [[1,  x', y'],
     [x', 1,  z'],
     [y', z', 1 ]]

and ``S2`` is the set of trace triples of three rank-one 2x2 projections,
``p = (q + 1) / 4``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .matcore import Projection, rng_stream

MEMBER_TOL = 1e-9

PAULI = (
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)


def completed_matrix(q) -> np.ndarray:
    x, y, z = np.asarray(q, dtype=float)
    return np.array([[1.0, x, y], [x, 1.0, z], [y, z, 1.0]])


def sylvester_determinant(q) -> float:
    x, y, z = np.asarray(q, dtype=float)
    return 1.0 + 2.0 * x * y * z - x * x - y * y - z * z


def sylvester_test(q, tol: float = 0.0) -> bool:
    """Principal-minor test: |x'|, |y'|, |z'| <= 1 and the determinant >= 0."""
    q = np.asarray(q, dtype=float)
    return bool(np.all(np.abs(q) <= 1.0 + tol) and sylvester_determinant(q) >= -tol)


@dataclass(frozen=True)
class Membership:
    member: bool
    min_eigenvalue: float
    sylvester: bool


def elliptope_membership(q, tol: float = MEMBER_TOL) -> Membership:
    """Decide membership by the smallest eigenvalue of the completed matrix."""
    q = np.asarray(q, dtype=float)
    lam = float(np.linalg.eigvalsh(completed_matrix(q))[0])
    return Membership(lam >= -tol, lam, sylvester_test(q))


def members_batch(q: np.ndarray, tol: float = MEMBER_TOL) -> np.ndarray:
    """Vectorized Sylvester membership for an (N, 3) array."""
    q = np.asarray(q, dtype=float)
    x, y, z = q[..., 0], q[..., 1], q[..., 2]
    det = 1.0 + 2.0 * x * y * z - x * x - y * y - z * z
    return np.all(np.abs(q) <= 1.0 + tol, axis=-1) & (det >= -tol)


# ---------------------------------------------------------------------------
# nearest point


class ProjectionNotConverged(RuntimeError):
    def __init__(self, residual: float, iterations: int):
        super().__init__(f"Dykstra projection did not converge: residual {residual:.3e} after {iterations} iterations")
        self.residual = residual
        self.iterations = iterations


def _psd_part(m: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(0.5 * (m + m.T))
    return (v * np.maximum(w, 0.0)) @ v.T


def _offdiag(m: np.ndarray) -> np.ndarray:
    return np.array([m[0, 1], m[0, 2], m[1, 2]])


def elliptope_project(v, max_iter: int = 10_000, tol: float = 1e-10) -> np.ndarray:
    """Euclidean projection of a 3-vector onto the elliptope (Dykstra).

    Alternates between the PSD cone and the unit-diagonal affine space. The
    returned point is rescaled to unit diagonal from the last PSD iterate, so
    it is always a member.
    """
    v = np.asarray(v, dtype=float)
    if not np.all(np.isfinite(v)):
        raise ValueError("non-finite input")
    if elliptope_membership(v, 0.0).member:
        return v.copy()
    y = completed_matrix(v)
    ds = np.zeros((3, 3))
    x = y
    for it in range(1, max_iter + 1):
        r = y - ds
        x = _psd_part(r)
        ds = x - r
        y_new = x.copy()
        np.fill_diagonal(y_new, 1.0)
        change = np.max(np.abs(y_new - y))
        y = y_new
        if change <= tol and np.max(np.abs(np.diag(x) - 1.0)) <= tol:
            break
    else:
        res = float(np.max(np.abs(np.diag(x) - 1.0)))
        if res > 1e-6:
            raise ProjectionNotConverged(res, max_iter)
    d = np.sqrt(np.clip(np.diag(x), 1e-300, None))
    out = _offdiag(x / np.outer(d, d))
    return np.clip(out, -1.0, 1.0)


# ---------------------------------------------------------------------------
# support function


def support_batch(c: np.ndarray):
    """Closed-form support function of the elliptope.

    A linear function attains its maximum at a rank <= 2 point, i.e. at the
    Gram matrix of three coplanar unit vectors with consecutive angles
    ``alpha`` and ``beta``, giving ``q = (cos a, cos(a + b), cos b)``.
    Maximizing over ``beta`` first leaves a concave function of
    ``tau = cos(alpha)``::

        c1 * tau + sqrt(c2^2 + c3^2 + 2 c2 c3 tau)

    whose maximum over [-1, 1] is at an endpoint or at its stationary point.

    Returns ``(values, argmax)`` for an (N, 3) array of directions.
    """
    c = np.atleast_2d(np.asarray(c, dtype=float))
    c1, c2, c3 = c[:, 0], c[:, 1], c[:, 2]
    a = c2 * c2 + c3 * c3
    b = 2.0 * c2 * c3

    def phi(tau):
        return c1 * tau + np.sqrt(np.maximum(a + b * tau, 0.0))

    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(c1 != 0, c2 * c3 / np.where(c1 != 0, c1, 1.0), 0.0)
        bden = np.where(b != 0, b, 1.0)
        # 1 - tau and 1 + tau of the stationary point, factored to avoid cancellation
        om_s = (c2 + c3 - ratio) * (c2 + c3 + ratio) / bden
        op_s = (ratio - c2 + c3) * (ratio + c2 - c3) / bden
    ok = (b != 0) & np.isfinite(om_s) & np.isfinite(op_s)
    om_s = np.where(ok, np.clip(om_s, 0.0, 2.0), 0.0)
    op_s = np.where(ok, np.clip(op_s, 0.0, 2.0), 2.0)
    tau_s = np.where(om_s <= op_s, 1.0 - om_s, op_s - 1.0)
    cands = np.stack([np.full_like(c1, -1.0), np.ones_like(c1), tau_s], axis=1)
    oms = np.stack([np.full_like(c1, 2.0), np.zeros_like(c1), om_s], axis=1)
    ops = np.stack([np.zeros_like(c1), np.full_like(c1, 2.0), op_s], axis=1)
    vals = np.stack([phi(cands[:, k]) for k in range(3)], axis=1)
    pick = np.argmax(vals, axis=1)
    rows = np.arange(len(c1))
    cos_a = cands[rows, pick]
    sin_a = np.sqrt(np.maximum(oms[rows, pick] * ops[rows, pick], 0.0))
    zc = c3 + c2 * (cos_a + 1j * sin_a)
    mag = np.abs(zc)
    safe = np.where(mag > 0, mag, 1.0)
    cos_b = np.where(mag > 0, zc.real / safe, 1.0)
    sin_b = np.where(mag > 0, -zc.imag / safe, 0.0)
    q = np.stack([cos_a, cos_a * cos_b - sin_a * sin_b, cos_b], axis=1)
    return np.einsum("ij,ij->i", c, q), q


def _bca_support(c: np.ndarray, restarts: int, seed: int, tol: float, max_iter: int = 10_000):
    c1, c2, c3 = c
    best_val, best_q = -np.inf, None
    for k in range(restarts):
        rng = rng_stream(seed, k)
        vecs = rng.standard_normal((3, 3))
        vecs /= np.linalg.norm(vecs, axis=1, keepdims=True)
        a, b, w = vecs
        val = c1 * a @ b + c2 * a @ w + c3 * b @ w
        for _ in range(max_iter):
            for which in range(3):
                if which == 0:
                    g = c1 * b + c2 * w
                elif which == 1:
                    g = c1 * a + c3 * w
                else:
                    g = c2 * a + c3 * b
                n = np.linalg.norm(g)
                if n > 1e-300:
                    if which == 0:
                        a = g / n
                    elif which == 1:
                        b = g / n
                    else:
                        w = g / n
            new = c1 * a @ b + c2 * a @ w + c3 * b @ w
            done = abs(new - val) <= tol
            val = new
            if done:
                break
        if val > best_val:
            best_val, best_q = val, np.array([a @ b, a @ w, b @ w])
    return float(best_val), np.clip(best_q, -1.0, 1.0)


def elliptope_support(c, tol: float = 1e-12, method: str = "closed_form", restarts: int = 8, seed: int = 0):
    """``max c . q`` over the elliptope; returns ``(value, argmax)``.

    ``method="bca"`` runs block-coordinate ascent over unit-vector triples
    (each vector replaced by the normalized weighted sum of the other two)
    from ``restarts`` seeded starts.
    """
    c = np.asarray(c, dtype=float)
    if not np.all(np.isfinite(c)):
        raise ValueError("non-finite direction")
    if not np.any(c):
        return 0.0, np.zeros(3)
    if method == "closed_form":
        vals, q = support_batch(c[None, :])
        return float(vals[0]), q[0]
    if method == "bca":
        if restarts < 8:
            raise ValueError("block-coordinate ascent needs at least 8 restarts")
        return _bca_support(c, restarts, seed, tol)
    raise ValueError(f"unknown method {method!r}")


# ---------------------------------------------------------------------------
# affine map to S2 and Pauli realizations


def s2_from_elliptope(q) -> np.ndarray:
    return (np.asarray(q, dtype=float) + 1.0) / 4.0


def elliptope_from_s2(p, tol: float = MEMBER_TOL):
    """Inverse affine map; returns ``(q, is_member)``."""
    q = 4.0 * np.asarray(p, dtype=float) - 1.0
    return q, elliptope_membership(q, tol).member


def unit_vectors(q, tol: float = MEMBER_TOL) -> np.ndarray:
    """Rows a, b, c of unit vectors in R^3 whose Gram matrix completes ``q``.

    Uses the rows of the PSD square root; tiny negative eigenvalues (within
    ``tol``) are clipped before the rows are renormalized.
    """
    m = completed_matrix(q)
    w, v = np.linalg.eigh(m)
    if w[0] < -tol:
        raise ValueError(f"not an elliptope point: min eigenvalue {w[0]:.3e}")
    root = (v * np.sqrt(np.maximum(w, 0.0))) @ v.T
    norms = np.linalg.norm(root, axis=1)
    return root / norms[:, None]


def pauli_projection(u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    return 0.5 * (np.eye(2, dtype=complex) + u[0] * PAULI[0] + u[1] * PAULI[1] + u[2] * PAULI[2])


def realize_s2(q=None, vectors=None, tol: float = MEMBER_TOL) -> tuple[Projection, Projection, Projection]:
    """Three rank-one 2x2 projections ``(I + u . sigma) / 2``.

    Pass either an elliptope point ``q`` or a (3, 3) array of unit vectors.
    """
    if (q is None) == (vectors is None):
        raise ValueError("give exactly one of q or vectors")
    if vectors is None:
        vectors = unit_vectors(q, tol)
    vectors = np.asarray(vectors, dtype=float)
    norms = np.linalg.norm(vectors, axis=1)
    if np.any(np.abs(norms - 1.0) > 1e-12):
        raise ValueError(f"vectors are not unit length: norms {norms}")
    return tuple(Projection(pauli_projection(u), 1) for u in vectors)


def random_unit_vectors(count: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.standard_normal((count, 3, 3))
    return g / np.linalg.norm(g, axis=-1, keepdims=True)


def gram_offdiag(vecs: np.ndarray) -> np.ndarray:
    a, b, c = vecs[..., 0, :], vecs[..., 1, :], vecs[..., 2, :]
    return np.stack([np.sum(a * b, -1), np.sum(a * c, -1), np.sum(b * c, -1)], axis=-1)


def sample_elliptope(count: int, rng: np.random.Generator) -> np.ndarray:
    """Elliptope points from independent uniform unit vectors."""
    return gram_offdiag(random_unit_vectors(count, rng))


def sample_s2(seed: int) -> np.ndarray:
    return s2_from_elliptope(sample_elliptope(1, rng_stream(seed))[0])


def sample_s2_batch(count: int, seed: int) -> np.ndarray:
    return s2_from_elliptope(sample_elliptope(count, rng_stream(seed)))
