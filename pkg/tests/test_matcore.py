import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from synccorr.matcore import (
    NotHermitianError,
    Projection,
    Pvm,
    direct_sum,
    hermitian_eig,
    jacobi_eigh,
    random_projection,
    random_projections,
    random_unitary,
    rng_stream,
    trace_triple,
)


def _random_hermitian(rng, d):
    a = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return 0.5 * (a + a.conj().T)


@pytest.mark.parametrize("method", ["lapack", "jacobi"])
def test_eig_examples(method):
    vals, _ = hermitian_eig(np.eye(2), method=method)
    assert np.allclose(vals, [1, 1])
    vals, vecs = hermitian_eig(np.diag([0.0, 1.0]), method=method)
    assert np.allclose(vals, [1, 0])
    assert np.allclose(np.abs(vecs), [[0, 1], [1, 0]])
    vals, _ = hermitian_eig(np.ones((3, 3)), method=method)
    assert np.allclose(vals, [3, 0, 0], atol=1e-12)


def test_eig_rejects_asymmetric():
    m = np.array([[1.0, 2.0], [0.0, 1.0]])
    with pytest.raises(NotHermitianError) as err:
        hermitian_eig(m)
    assert err.value.asymmetry == pytest.approx(2.0)


def test_eig_reconstruction_lapack_many():
    rng = rng_stream(11)
    worst = 0.0
    for k in range(10_000):
        d = 1 + k % 16
        m = _random_hermitian(rng, d)
        vals, v = hermitian_eig(m)
        assert np.all(np.diff(vals) <= 1e-12)
        worst = max(worst, np.linalg.norm(v @ np.diag(vals) @ v.conj().T - m))
        assert np.linalg.norm(v.conj().T @ v - np.eye(d)) <= 1e-10
    assert worst <= 1e-9


def test_jacobi_matches_lapack():
    rng = rng_stream(12)
    for d in (1, 2, 3, 7, 16):
        m = _random_hermitian(rng, d)
        vals, v = jacobi_eigh(m)
        ref = np.linalg.eigvalsh(m)[::-1]
        assert np.allclose(vals, ref, atol=1e-12)
        assert np.linalg.norm(v @ np.diag(vals) @ v.conj().T - m) <= 1e-12
        assert np.linalg.norm(v.conj().T @ v - np.eye(d)) <= 1e-12


def test_random_unitary_basics():
    u = random_unitary(1, 5)
    assert u.shape == (1, 1) and abs(abs(u[0, 0]) - 1) < 1e-12
    assert np.array_equal(random_unitary(4, 9), random_unitary(4, 9))
    assert not np.array_equal(random_unitary(4, 9), random_unitary(4, 10))
    u = random_unitary(6, 3)
    assert np.abs(u.conj().T @ u - np.eye(6)).max() <= 1e-10
    with pytest.raises(ValueError):
        random_unitary(0, 1)


def test_haar_first_moment():
    # E|U_00|^2 = 1/d under Haar measure
    vals = [abs(random_unitary(4, s)[0, 0]) ** 2 for s in range(10_000)]
    assert np.mean(vals) == pytest.approx(0.25, abs=0.01)


def test_random_projection_ranks():
    assert np.allclose(random_projection(3, 0, 1).matrix, 0)
    assert np.allclose(random_projection(3, 3, 1).matrix, np.eye(3))
    p = random_projection(5, 2, 7)
    assert p.rank == 2
    with pytest.raises(ValueError):
        random_projection(3, 4, 1)
    with pytest.raises(ValueError):
        random_projection(3, -1, 1)


def test_rank_one_pair_trace_mean():
    rng = rng_stream(3)
    a = random_projections(2, 1, 10_000, rng)
    b = random_projections(2, 1, 10_000, rng)
    tr = np.einsum("nij,nji->n", a, b).real / 2
    assert tr.mean() == pytest.approx(0.25, abs=0.01)


def test_projection_validation():
    with pytest.raises(ValueError):
        Projection(np.array([[1.0, 0.0], [0.0, 0.5]]), 1)
    with pytest.raises(ValueError):
        Projection(np.diag([1.0, 0.0]), 2)
    p = Projection(np.diag([1.0, 0.0]), 1)
    assert p.complement().rank == 1
    with pytest.raises(ValueError):
        p.matrix[0, 0] = 0.0


def test_pvm():
    p = Projection(np.diag([1.0, 0.0]), 1)
    Pvm([p, p.complement()])
    with pytest.raises(ValueError):
        Pvm([p, p])


def test_trace_triple_examples():
    i2 = np.eye(2)
    assert np.allclose(trace_triple(i2, i2, i2), [1, 1, 1])
    e1, e2 = np.diag([1.0, 0.0]), np.diag([0.0, 1.0])
    assert np.allclose(trace_triple(e1, e2, e1), [0, 0.5, 0])
    v = np.array([1.0, 1.0]) / np.sqrt(2)
    assert np.allclose(trace_triple(e1, e1, np.outer(v, v)), [0.5, 0.25, 0.25])
    with pytest.raises(ValueError):
        trace_triple(e1, e1, np.eye(3))


def test_pair_trace_within_integer_bounds():
    rng = rng_stream(21)
    for d in range(1, 7):
        for n1 in range(d + 1):
            for n2 in range(d + 1):
                a = random_projections(d, n1, 300, rng)
                b = random_projections(d, n2, 300, rng)
                tr = np.einsum("nij,nji->n", a, b).real / d
                assert tr.min() >= max(0, (n1 + n2 - d) / d) - 1e-10
                assert tr.max() <= min(n1, n2) / d + 1e-10


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 6), st.integers(0, 2**32))
def test_trace_triple_unitary_invariance(d, seed):
    rng = rng_stream(seed)
    ranks = rng.integers(0, d + 1, 3)
    ps = [random_projections(d, int(n), 1, rng)[0] for n in ranks]
    u = random_unitary(d, seed)
    moved = [u @ p @ u.conj().T for p in ps]
    assert np.allclose(trace_triple(*ps), trace_triple(*moved), atol=1e-10)


def test_direct_sum():
    m = direct_sum(np.eye(2), np.array([[5.0]]))
    assert m.shape == (3, 3) and m[2, 2] == 5 and m[0, 2] == 0


def test_streams_independent_and_reproducible():
    a = rng_stream(1, 0).random(4)
    assert np.array_equal(a, rng_stream(1, 0).random(4))
    assert not np.array_equal(a, rng_stream(1, 1).random(4))
