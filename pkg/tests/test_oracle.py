import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from l2stream.oracle import (
    chi2_stat,
    exact_kron_matvec,
    exact_l2_distribution,
    exact_matvec,
    exact_softmax_distribution,
    gen_disjointness_instance,
    gen_index_hard_instance,
    offline_exp_sample,
    tv_distance,
)

finite = st.floats(-50, 50, allow_nan=False)


def test_matvec_basics(rng):
    x = rng.normal(size=5)
    assert np.array_equal(exact_matvec(np.eye(5), x), x)
    assert np.all(exact_matvec(np.zeros((3, 5)), x) == 0)
    A = rng.integers(-9, 10, (7, 5)).astype(float)
    xi = rng.integers(-9, 10, 5).astype(float)
    loop = [sum(A[i, j] * xi[j] for j in range(5)) for i in range(7)]
    assert exact_matvec(A, xi).tolist() == loop
    with pytest.raises(ValueError):
        exact_matvec(A, np.ones(4))


def test_kron_two_paths(rng):
    for n, d in ((8, 3), (5, 2), (2, 8)):
        A1, A2 = rng.normal(size=(n, d)), rng.normal(size=(n, d))
        x = rng.normal(size=d * d)
        a = exact_kron_matvec(A1, A2, x)
        b = exact_kron_matvec(A1, A2, x, materialize=True)
        assert np.abs(a - b).max() <= 1e-12 * max(1, np.abs(b).max())
    assert exact_kron_matvec(np.eye(2), np.eye(2), [1, 0, 0, 0]).tolist() == [1, 0, 0, 0]
    assert np.all(exact_kron_matvec(np.ones((3, 2)), np.ones((3, 2)), np.zeros(4)) == 0)
    with pytest.raises(ValueError):
        exact_kron_matvec(np.ones((3, 2)), np.ones((3, 2)), np.zeros(5))


def test_l2_distribution():
    assert np.allclose(exact_l2_distribution([3, 4]), [0.36, 0.64], rtol=0, atol=1e-15)
    assert np.allclose(exact_l2_distribution([1, -1, 1, -1]), 0.25)
    assert exact_l2_distribution([1, 0, 0]).tolist() == [1, 0, 0]
    with pytest.raises(ValueError):
        exact_l2_distribution(np.zeros(3))
    tiny = exact_l2_distribution([1e-200, 1e-200])
    assert tiny.tolist() == [0.5, 0.5]


@given(hnp.arrays(np.float64, st.integers(1, 30), elements=finite))
def test_l2_normalized(y):
    if not np.any(y != 0):
        return
    p = exact_l2_distribution(y)
    assert abs(p.sum() - 1) <= 1e-12
    assert np.all(p[y == 0] == 0)


def test_softmax_examples():
    assert np.allclose(exact_softmax_distribution([0, 0, 0]), 1 / 3, atol=1e-15)
    p = exact_softmax_distribution(np.log([1.0, 2.0, 3.0]))
    assert np.allclose(p, [1 / 6, 2 / 6, 3 / 6], atol=1e-15)
    big = exact_softmax_distribution([1000.0, 1000.0])
    assert big.tolist() == [0.5, 0.5]


@given(hnp.arrays(np.float64, st.integers(1, 20), elements=finite), finite)
def test_softmax_shift_invariance(y, c):
    p, q = exact_softmax_distribution(y), exact_softmax_distribution(y + c)
    assert abs(p.sum() - 1) <= 1e-12
    assert np.allclose(p, q, rtol=1e-9, atol=1e-15)


def test_offline_sampler():
    y = np.log([1.0, 2.0, 3.0])
    draws = offline_exp_sample(y, 1, size=60000)
    freq = np.bincount(draws - 1, minlength=3) / 60000
    assert tv_distance(freq, [1 / 6, 2 / 6, 3 / 6]) <= 0.01
    assert offline_exp_sample(y, 5) == offline_exp_sample(y, 5)
    assert isinstance(offline_exp_sample(y, 5), int)


def test_tv_and_chi2():
    assert tv_distance([0.2, 0.8], [0.2, 0.8]) == 0
    assert tv_distance([1, 0], [0, 1]) == 1
    assert chi2_stat([25, 75], [0.25, 0.75]) == 0
    assert chi2_stat([1, 1], [1.0, 0.0]) == math.inf
    with pytest.raises(ValueError):
        tv_distance([1], [0.5, 0.5])


@settings(max_examples=50)
@given(st.integers(2, 12).flatmap(
    lambda k: st.tuples(*[hnp.arrays(np.float64, k, elements=st.floats(0, 1)) for _ in range(3)])))
def test_tv_symmetry_and_triangle(ps):
    p, q, r = (v / v.sum() if v.sum() > 0 else np.full(v.size, 1 / v.size) for v in ps)
    assert tv_distance(p, q) == pytest.approx(tv_distance(q, p))
    assert tv_distance(p, r) <= tv_distance(p, q) + tv_distance(q, r) + 1e-12


def test_index_instance():
    one = gen_index_hard_instance(32, 7, 1)
    assert one.A.shape == (33, 32)
    assert np.all(one.A[32] == 1e-10)
    assert one.A[6, 6] == 1 and one.answer == 7
    assert np.count_nonzero(one.A[:32] - np.diag(np.diag(one.A[:32]))) == 0
    assert exact_l2_distribution(one.y)[6] == pytest.approx(1 / (1 + 1e-20), abs=1e-18)
    zero = gen_index_hard_instance(32, 7, 0)
    assert zero.answer == 33
    assert exact_l2_distribution(zero.y)[32] == 1
    with pytest.raises(IndexError):
        gen_index_hard_instance(4, 5, 1)


def test_disjointness_instance():
    scale = 100 * 2 * math.log(16)
    dis = gen_disjointness_instance(16, {1, 2}, {3, 4}, 2)
    assert dis.answer is None and dis.y.max() == pytest.approx(scale)
    hit = gen_disjointness_instance(16, {1, 5}, {5, 9}, 2)
    assert hit.answer == 5 and hit.y[4] == pytest.approx(2 * scale)
    with pytest.raises(IndexError):
        gen_disjointness_instance(4, {5}, set(), 1)
