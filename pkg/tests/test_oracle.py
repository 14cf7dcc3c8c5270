import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from synccorr.elliptope import elliptope_from_s2
from synccorr.matcore import rng_stream
from synccorr.oracle import (
    RankedTriple,
    admissible_cases,
    blow_up,
    check_inclusion,
    combine_terminals,
    iterate_reduction,
    proposition_case,
    reduce_dimension,
    reducible_pair,
    sample_pair_traces,
    sample_ranked_triple,
    sample_trace_triples,
    two_projection_interval,
)


def _projector(v):
    v = np.asarray(v, dtype=complex)
    v = v / np.linalg.norm(v)
    return np.outer(v, v.conj())


def _hand_triple():
    p1 = np.diag([1.0, 0, 0])
    p2 = np.diag([0, 1.0, 0])
    p3 = _projector([1, 0, 1])
    return RankedTriple(3, (1, 1, 1), (p1, p2, p3))


def test_sample_examples():
    for seed in range(200):
        w = sample_ranked_triple(2, (1, 1, 1), seed).traces
        _, ok = elliptope_from_s2(w, tol=1e-9)
        assert ok
    rt = sample_ranked_triple(4, (0, 2, 3), 1)
    assert rt.traces[0] == 0 and rt.traces[1] == 0
    assert np.allclose(sample_ranked_triple(3, (3, 3, 3), 1).traces, 1)
    with pytest.raises(ValueError):
        sample_ranked_triple(3, (4, 1, 1), 1)


def test_sample_is_reproducible():
    a = sample_trace_triples(5, (1, 2, 2), 50, 9)
    assert np.array_equal(a, sample_trace_triples(5, (1, 2, 2), 50, 9))
    assert not np.array_equal(a, sample_trace_triples(5, (1, 2, 2), 50, 10))


def test_ranked_triple_validates_ranks():
    with pytest.raises(ValueError):
        RankedTriple(2, (1, 1, 1), (np.eye(2), np.eye(2), np.eye(2)))


def test_reduction_hand_example():
    rt = _hand_triple()
    assert np.allclose(rt.traces, (0, 1 / 6, 0))
    step = reduce_dimension(rt, (0, 1))
    assert step.target == 2
    assert step.t == pytest.approx(0.5)
    assert np.allclose(step.left.traces, (0, 0, 0), atol=1e-15)
    assert np.allclose(step.right.traces, (0, 0.5, 0))
    assert step.left.ranks == (1, 1, 0) and step.right.ranks == (1, 1, 1)
    assert np.allclose(step.combined(), rt.traces, atol=1e-15)


def test_reduction_kernel_aligned():
    p1 = np.diag([1.0, 0, 0])
    p2 = np.diag([0, 1.0, 0])
    p3 = np.diag([1.0, 0, 0])
    step = reduce_dimension(RankedTriple(3, (1, 1, 1), (p1, p2, p3)), (0, 1))
    assert step.t == 0.0
    assert np.allclose(step.right.projections[2], np.diag([1.0, 0]))
    assert np.allclose(step.combined(), (0, 1 / 3, 0))


def test_reduction_full_rank_third():
    p1 = np.diag([1.0, 0, 0])
    rt = RankedTriple(3, (1, 0, 3), (p1, np.zeros((3, 3)), np.eye(3)))
    step = reduce_dimension(rt, (0, 1))
    assert step.t == 1.0 and step.right is None
    assert np.allclose(step.combined(), rt.traces)


def test_reduction_precondition():
    rt = sample_ranked_triple(3, (2, 1, 1), 0)
    with pytest.raises(ValueError):
        reduce_dimension(rt, (0, 1))
    with pytest.raises(ValueError):
        reduce_dimension(rt, (0, 0))


def test_reduction_identity_random():
    worst = 0.0
    for seed in range(1000):
        step = reduce_dimension(sample_ranked_triple(4, (1, 1, 2), seed), (0, 1))
        worst = max(worst, np.abs(step.combined() - sample_ranked_triple(4, (1, 1, 2), seed).traces).max())
    assert worst <= 1e-10


@settings(max_examples=300, deadline=None)
@given(st.integers(2, 8), st.integers(0, 2**31))
def test_reduction_identity_any_reducible(d, seed):
    rng = rng_stream(seed)
    ranks = tuple(int(v) for v in rng.integers(0, d + 1, 3))
    rt = sample_ranked_triple(d, ranks, seed)
    pair = reducible_pair(rt)
    if pair is None:
        return
    step = reduce_dimension(rt, pair)
    assert 0.0 <= step.t <= 1.0
    assert np.abs(step.combined() - rt.traces).max() <= 1e-10
    for child in (step.left, step.right):
        if child is not None:
            assert child.d == d - 1


def test_blow_up_scaling():
    rt = sample_ranked_triple(4, (1, 2, 3), 5)
    for which in range(3):
        b = blow_up(rt, which)
        assert b.d == 5 and b.ranks[which] == rt.ranks[which] + 1
        assert np.abs(rt.traces - (5 / 4) * b.traces).max() <= 1e-14
    eye = RankedTriple(2, (2, 2, 2), (np.eye(2),) * 3)
    assert np.allclose(blow_up(eye, 0).traces, 2 / 3)
    twice_0 = blow_up(blow_up(rt, 1), 1).traces
    twice_1 = blow_up(blow_up(rt, 2), 2).traces
    assert np.allclose(twice_0, twice_1, atol=1e-15)


def test_blow_up_then_reduce_recovers():
    for seed in range(200):
        rng = rng_stream(seed)
        d = int(rng.integers(2, 7))
        ranks = tuple(int(v) for v in rng.integers(0, d + 1, 3))
        rt = sample_ranked_triple(d, ranks, seed)
        which = int(rng.integers(3))
        big = blow_up(rt, which)
        pair = tuple(k for k in range(3) if k != which)
        step = reduce_dimension(big, pair, kernel_vector=np.eye(d + 1)[-1])
        assert step.t == 1.0
        assert np.abs(step.left.traces - rt.traces).max() <= 1e-12


def test_iterate_examples():
    rt = sample_ranked_triple(2, (1, 1, 1), 3)
    out = iterate_reduction(rt)
    assert len(out) == 1 and out[0][0] == 1.0 and out[0][1] is rt
    rt = sample_ranked_triple(3, (1, 1, 1), 3)
    out = iterate_reduction(rt)
    assert all(term.d <= 2 for _, term in out)
    assert np.abs(combine_terminals(out, 3) - rt.traces).max() <= 1e-8


def test_iterate_random_six():
    for seed in range(100):
        rt = sample_ranked_triple(6, (2, 2, 2), seed)
        out = iterate_reduction(rt)
        assert np.abs(combine_terminals(out, 6) - rt.traces).max() <= 1e-8
        for _, term in out:
            assert reducible_pair(term) is None


def test_greedy_pair_order():
    rt = sample_ranked_triple(6, (1, 2, 1), 0)
    assert reducible_pair(rt) == (0, 2)
    rt = sample_ranked_triple(6, (1, 1, 1), 0)
    assert reducible_pair(rt) == (0, 1)
    assert reducible_pair(sample_ranked_triple(2, (1, 1, 1), 0)) is None


def test_pair_traces_inside_interval():
    for d in range(1, 7):
        for n1 in range(d + 1):
            for n2 in range(d + 1):
                lo, hi = two_projection_interval(n1, n2, d)
                vals = sample_pair_traces(d, n1, n2, 2000, 1, mode="mixed")
                assert vals.min() >= lo - 1e-12 and vals.max() <= hi + 1e-12


def test_case_table():
    cases = list(admissible_cases(8))
    assert len(cases) == 80
    d, ranks, dsets = proposition_case("typeI", {"n": 2, "d": 5})
    assert ranks == (2, 2, 2)
    assert dsets[0].scale == pytest.approx(2 / 5) and dsets[1].scale == pytest.approx(4 / 5)
    d, ranks, dsets = proposition_case("typeI-swap", {"n": 2, "d": 6})
    assert ranks == (2, 4, 4)
    assert np.allclose(dsets[0].offset, (2 / 6, 2 / 6, 2 / 6))
    assert np.allclose(dsets[1].offset, (0, 0, 2 / 6))
    with pytest.raises(ValueError):
        proposition_case("typeI", {"n": 3, "d": 5})
    with pytest.raises(ValueError):
        proposition_case("typeIII", {"n": 1, "k": 2, "kp": 1, "d": 8})
    with pytest.raises(ValueError):
        proposition_case("typeIV", {"n": 1, "d": 2})


def test_inclusion_examples():
    rep = check_inclusion("typeI", {"n": 1, "d": 2}, 10_000, 1)
    assert rep.violations == 0 and rep.inconclusive == 0
    rep = check_inclusion("typeI", {"n": 2, "d": 5}, 10_000, 1)
    assert rep.violations == 0 and rep.inconclusive == 0
    rep = check_inclusion("two-exp", {"n1": 2, "n2": 2, "d": 3}, 100_000, 1, mode="mixed")
    assert rep.violations == 0
    lo, hi = rep.extra["observed"]
    assert lo >= 1 / 3 - 1e-12 and hi <= 2 / 3 + 1e-12
    assert lo - 1 / 3 <= 5e-3 and 2 / 3 - hi <= 5e-3


def test_inclusion_detects_wrong_hull():
    # the rank (2, 2, 2) samples in dimension 5 do not fit inside S2 scaled by 2/5 alone
    from synccorr.oracle import _hull_violations

    _, ranks, _ = proposition_case("typeI", {"n": 2, "d": 5})
    pts = sample_trace_triples(5, ranks, 500, 2)
    d, _, dsets = proposition_case("typeI", {"n": 2, "d": 5})
    viol, inc, worst = _hull_violations(dsets[:1], pts, 1e-6, 20_000)
    assert viol > 0 and worst > 1e-6
