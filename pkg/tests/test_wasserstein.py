import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sgmw2.mixture import GaussianMixture, gmm_sample
from sgmw2.wasserstein import (
    MATCHING_CAP,
    w2_1d_exact,
    w2_exact_matching,
    w2_gaussian_closed_form,
    w2_sliced,
)


def brute_force_w2(A, B):
    n = len(A)
    best = min(sum(((A[i] - B[p[i]]) ** 2).sum() for i in range(n)) for p in itertools.permutations(range(n)))
    return math.sqrt(best / n)


class TestOneD:
    def test_identical(self):
        a = np.random.default_rng(0).normal(size=50)
        assert w2_1d_exact(a, a).value == 0.0

    @given(st.floats(-10, 10))
    def test_shift(self, c):
        a = np.random.default_rng(1).normal(size=30)
        assert w2_1d_exact(a, a + c).value == pytest.approx(abs(c), abs=1e-12)

    def test_gaussian_shift(self):
        r = np.random.default_rng(2)
        est = w2_1d_exact(r.normal(0, 1, 100_000), r.normal(3, 1, 100_000))
        assert abs(est.value - 3.0) < 0.05 and est.method == "exact_1d"

    def test_unequal_sizes(self):
        with pytest.raises(ValueError):
            w2_1d_exact(np.zeros(3), np.zeros(4))


class TestSliced:
    def test_identical(self):
        A = np.random.default_rng(0).normal(size=(100, 3))
        assert w2_sliced(A, A, 64, 1).value == 0.0

    def test_one_dim_matches_exact(self):
        r = np.random.default_rng(3)
        a, b = r.normal(size=(200, 1)), r.normal(1, 2, size=(200, 1))
        assert w2_sliced(a, b, 7, 4).value == pytest.approx(w2_1d_exact(a, b).value, abs=1e-12)

    def test_slicing_contraction_constant(self):
        # N(0, I) vs N(m, I) in d=2: sliced ~ |m| / sqrt(2)
        r = np.random.default_rng(5)
        m = np.array([3.0, 0.0])
        A, B = r.standard_normal((512, 2)), r.standard_normal((512, 2)) + m
        sl = w2_sliced(A, B, 512, 0).value
        ex = w2_exact_matching(A, B).value
        assert sl == pytest.approx(3.0 / math.sqrt(2), rel=0.05)
        assert sl / ex == pytest.approx(1 / math.sqrt(2), rel=0.05)

    def test_deterministic_and_seeded(self):
        r = np.random.default_rng(6)
        A, B = r.normal(size=(100, 3)), r.normal(size=(100, 3))
        assert w2_sliced(A, B, 32, 9, 10) == w2_sliced(A, B, 32, 9, 10)
        assert w2_sliced(A, B, 32, 9).value != w2_sliced(A, B, 32, 10).value

    def test_bootstrap_se(self):
        r = np.random.default_rng(7)
        est = w2_sliced(r.normal(size=(300, 2)), r.normal(1, 1, size=(300, 2)), 64, 0, 50)
        assert 0 < est.se < 0.5 and est.nproj == 64

    def test_errors(self):
        with pytest.raises(ValueError):
            w2_sliced(np.zeros((5, 2)), np.zeros((5, 3)))
        with pytest.raises(ValueError):
            w2_sliced(np.zeros((5, 2)), np.zeros((5, 2)), nproj=0)


class TestExactMatching:
    def test_single_point(self):
        est = w2_exact_matching(np.array([[0.0, 0.0]]), np.array([[3.0, 4.0]]))
        assert est.value == pytest.approx(5.0, abs=1e-15)

    def test_permuted_copy(self):
        A = np.random.default_rng(0).normal(size=(300, 3))
        B = A[np.random.default_rng(1).permutation(300)]
        assert w2_exact_matching(A, B).value == pytest.approx(0.0, abs=1e-12)

    @given(st.integers(0, 2**31))
    def test_one_dim_equals_sorting(self, seed):
        r = np.random.default_rng(seed)
        a, b = r.normal(size=(64, 1)), r.exponential(size=(64, 1))
        assert w2_exact_matching(a, b).value == pytest.approx(w2_1d_exact(a, b).value, abs=1e-12)

    @given(st.integers(0, 2**31))
    def test_brute_force(self, seed):
        r = np.random.default_rng(seed)
        A, B = r.normal(size=(6, 2)), r.normal(size=(6, 2))
        assert w2_exact_matching(A, B).value == pytest.approx(brute_force_w2(A, B), abs=1e-12)

    def test_cap(self):
        z = np.zeros((MATCHING_CAP + 1, 1))
        with pytest.raises(ValueError):
            w2_exact_matching(z, z)

    def test_symmetry(self):
        r = np.random.default_rng(4)
        A, B = r.normal(size=(200, 2)), r.normal(2, 1, size=(200, 2))
        assert w2_exact_matching(A, B).value == pytest.approx(w2_exact_matching(B, A).value, abs=1e-12)
        assert w2_sliced(A, B, 64, 0).value == pytest.approx(w2_sliced(B, A, 64, 0).value, abs=1e-12)

    @given(st.integers(0, 2**31))
    def test_triangle(self, seed):
        r = np.random.default_rng(seed)
        A, B, C = (r.normal(r.normal(), 1, size=(128, 2)) for _ in range(3))
        ab, bc, ac = (w2_exact_matching(*pair).value for pair in ((A, B), (B, C), (A, C)))
        assert ac <= ab + bc + 1e-12

    def test_dominates_sliced(self):
        r = np.random.default_rng(8)
        for i in range(50):
            g1 = GaussianMixture(np.array([0.5, 0.5]), r.normal(0, 2, (2, 2)), r.uniform(0.3, 1.5), 2)
            g2 = GaussianMixture(np.array([0.3, 0.7]), r.normal(0, 2, (2, 2)), r.uniform(0.3, 1.5), 2)
            A, B = gmm_sample(g1, 128, i).points, gmm_sample(g2, 128, 1000 + i).points
            assert w2_exact_matching(A, B).value >= w2_sliced(A, B, 64, i).value

    def test_consistency_across_sizes(self):
        r = np.random.default_rng(9)
        m = np.array([3.0, 0.0])
        big = w2_exact_matching(r.standard_normal((2048, 2)), r.standard_normal((2048, 2)) + m)
        small = w2_exact_matching(r.standard_normal((512, 2)), r.standard_normal((512, 2)) + m, 50, 1)
        assert abs(big.value - small.value) < 3 * small.se


class TestClosedForm:
    def test_identical(self):
        assert w2_gaussian_closed_form([1, 2], 0.5, [1, 2], 0.5, 2) == 0.0

    def test_scale_only(self):
        assert w2_gaussian_closed_form(np.zeros(4), 1.0, np.zeros(4), 2.0, 4) == pytest.approx(2.0)

    def test_matching_calibration(self):
        r = np.random.default_rng(10)
        cf = w2_gaussian_closed_form([0, 0], 1.0, [3, 0], 1.0, 2)
        assert cf == 3.0
        est = w2_exact_matching(r.standard_normal((2048, 2)), r.standard_normal((2048, 2)) + [3, 0])
        assert abs(est.value - cf) / cf < 0.05

    def test_negative_scale(self):
        with pytest.raises(ValueError):
            w2_gaussian_closed_form([0], -1.0, [0], 1.0, 1)
