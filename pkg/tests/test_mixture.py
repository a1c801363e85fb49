import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from oracles import fd_gradient, mixture_logpdf, two_mode_score
from sgmw2.constants import f_m
from sgmw2.errors import ConfigurationError
from sgmw2.mixture import (
    ConvexityParams,
    GaussianMixture,
    SampleBatch,
    gmm_lipschitz_proof_variant,
    gmm_log_density,
    gmm_m2,
    gmm_sample,
    gmm_score,
    gmm_weak_convexity_params,
    two_mode_params,
)

LOG_2PI = math.log(2 * math.pi)


@st.composite
def mixtures(draw, max_dim=3, max_modes=4):
    d = draw(st.integers(1, max_dim))
    m = draw(st.integers(1, max_modes))
    raw = np.array(draw(st.lists(st.floats(0.05, 1.0), min_size=m, max_size=m)))
    means = np.array(draw(st.lists(st.floats(-3, 3), min_size=m * d, max_size=m * d))).reshape(m, d)
    scale = draw(st.floats(0.3, 2.0))
    return GaussianMixture(raw / raw.sum(), means, scale, d)


def _g1(means, weights=None, scale=1.0):
    means = np.asarray(means, dtype=float).reshape(-1, 1)
    w = np.full(len(means), 1 / len(means)) if weights is None else np.asarray(weights)
    return GaussianMixture(w, means, scale, 1)


class TestValidation:
    def test_weights_must_sum_to_one(self):
        with pytest.raises(ConfigurationError):
            GaussianMixture(np.array([0.5, 0.4]), np.zeros((2, 1)), 1.0, 1)

    def test_weights_sum_tolerance(self):
        GaussianMixture(np.array([0.5, 0.5 + 5e-13]), np.zeros((2, 1)), 1.0, 1)

    def test_mean_length(self):
        with pytest.raises(ConfigurationError):
            GaussianMixture(np.array([1.0]), np.zeros((1, 3)), 1.0, 2)

    @pytest.mark.parametrize("scale", [0.0, -1.0])
    def test_scale_positive(self, scale):
        with pytest.raises(ConfigurationError):
            GaussianMixture(np.array([1.0]), np.zeros((1, 1)), scale, 1)

    def test_params_invariants(self):
        with pytest.raises(ConfigurationError):
            ConvexityParams(0.0, 1.0, 1.0)
        with pytest.raises(ConfigurationError):
            ConvexityParams(1.0, -1.0, 1.0)

    def test_sample_batch_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            SampleBatch(np.array([[0.0, np.nan]]), 0, "star")


class TestLogDensity:
    def test_standard_normal_at_mode(self):
        assert gmm_log_density(_g1([0.0]), np.array([0.0])) == pytest.approx(-0.5 * LOG_2PI, abs=1e-14)

    def test_quadratic_exponent(self):
        assert gmm_log_density(_g1([0.0]), np.array([3.0])) == pytest.approx(-0.5 * LOG_2PI - 4.5, abs=1e-13)

    def test_two_modes_at_zero(self):
        val = gmm_log_density(_g1([1.0, -1.0]), np.array([0.0]))
        assert val == pytest.approx(math.log(math.exp(-0.5) / math.sqrt(2 * math.pi)), abs=1e-13)
        assert val == pytest.approx(-1.4189385332, abs=1e-9)

    def test_dimension_mismatch(self, two_mode):
        with pytest.raises(ValueError):
            gmm_log_density(two_mode, np.zeros(3))

    def test_finite_far_away(self, two_mode):
        assert np.isfinite(gmm_log_density(two_mode, np.array([1e6, -1e6])))

    @given(mixtures())
    def test_matches_scipy(self, g):
        x = np.random.default_rng(0).normal(0, 3, (20, g.dim))
        ref = mixture_logpdf(g.weights, g.means, g.scale, x)
        np.testing.assert_allclose(gmm_log_density(g, x), ref, rtol=1e-11, atol=1e-11)

    @pytest.mark.parametrize("means,weights,scale", [([0.0], None, 1.0), ([2.0, -1.0], [0.3, 0.7], 0.5), ([5, 0, -3], None, 1.7)])
    def test_integrates_to_one(self, means, weights, scale):
        g = _g1(means, weights, scale)
        lo, hi = min(means) - 50 * scale, max(means) + 50 * scale
        pts = sorted(means)
        val, _ = quad(lambda t: math.exp(gmm_log_density(g, np.array([t]))), lo, hi, points=pts, limit=200)
        assert val == pytest.approx(1.0, abs=1e-8)


class TestScore:
    def test_standard_gaussian_is_minus_x(self, rng):
        g = GaussianMixture.standard_normal(3)
        x = rng.normal(0, 10, (100, 3))
        np.testing.assert_allclose(gmm_score(g, x), -x, atol=1e-12, rtol=0)

    def test_two_mode_tanh_form(self, rng):
        mu = np.array([1.5, -0.5])
        g = GaussianMixture.symmetric(mu, 0.8)
        x = rng.normal(0, 3, (200, 2))
        np.testing.assert_allclose(gmm_score(g, x), two_mode_score(mu, 0.8, x), rtol=1e-12, atol=1e-12)

    def test_no_overflow(self, two_mode):
        s = gmm_score(two_mode, np.array([[1e6, 1e6], [-1e6, 3.0]]))
        assert np.all(np.isfinite(s))

    def test_dimension_mismatch(self, two_mode):
        with pytest.raises(ValueError):
            gmm_score(two_mode, np.zeros((4, 5)))

    def test_single_vector_shape(self, two_mode):
        assert gmm_score(two_mode, np.array([0.3, 0.1])).shape == (2,)

    @given(mixtures(), st.integers(0, 2**31))
    def test_matches_fd_of_log_density(self, g, seed):
        r = np.random.default_rng(seed)
        for _ in range(5):
            x = r.uniform(-1, 1, g.dim) * r.uniform(0, 10)
            fd = fd_gradient(lambda z: gmm_log_density(g, z), x)
            sc = gmm_score(g, x)
            assert np.linalg.norm(sc - fd) <= 1e-5 * (1 + np.linalg.norm(sc))


class TestSample:
    def test_mean_concentration(self):
        n = 100_000
        pts = gmm_sample(_g1([0.0]), n, 7).points
        assert abs(pts.mean()) < 3 / math.sqrt(n)

    def test_mode_frequencies(self):
        n = 50_000
        g = GaussianMixture(np.array([0.3, 0.7]), np.array([[-5.0], [5.0]]), 1.0, 1)
        b = gmm_sample(g, n, 11)
        freq = np.bincount(b.labels, minlength=2) / n
        assert np.all(np.abs(freq - [0.3, 0.7]) < 3 * math.sqrt(0.21 / n))

    def test_deterministic(self, two_mode):
        a = gmm_sample(two_mode, 1000, 5).points
        b = gmm_sample(two_mode, 1000, 5).points
        assert a.tobytes() == b.tobytes()

    def test_seed_changes_output(self, two_mode):
        assert not np.array_equal(gmm_sample(two_mode, 10, 1).points, gmm_sample(two_mode, 10, 2).points)

    def test_n_must_be_positive(self, two_mode):
        with pytest.raises(ValueError):
            gmm_sample(two_mode, 0, 1)


class TestConstants:
    def test_standard_gaussian(self):
        p = gmm_weak_convexity_params(GaussianMixture.standard_normal(2))
        assert (p.alpha, p.big_m, p.l_u) == (1.0, 0.0, 1.0)

    def test_two_modes_unit(self):
        p = gmm_weak_convexity_params(GaussianMixture.symmetric(np.array([1.0, 0.0]), 1.0))
        assert p.alpha == 1.0
        assert math.sqrt(p.big_m) == pytest.approx(8.0, abs=1e-12)
        assert p.big_m == pytest.approx(64.0, abs=1e-12)
        assert p.l_u == pytest.approx(9.0)
        assert gmm_lipschitz_proof_variant(GaussianMixture.symmetric(np.array([1.0, 0.0]), 1.0)) == pytest.approx(65.0)

    def test_two_mode_general_variant(self):
        mu = np.array([0.6, 0.8])
        p = two_mode_params(GaussianMixture.symmetric(mu, 1.0), "general")
        assert math.sqrt(p.big_m) == pytest.approx(4 * math.sqrt(2), rel=1e-12)
        assert p.big_m < gmm_weak_convexity_params(GaussianMixture.symmetric(mu, 1.0)).big_m

    def test_two_mode_sharp_variant(self, two_mode):
        p = two_mode_params(two_mode, "sharp")
        assert (p.alpha, p.big_m, p.l_u) == (1.0, 4.0, 1.0)

    def test_two_mode_needs_two_equal_modes(self):
        with pytest.raises(ConfigurationError):
            two_mode_params(_g1([1.0, -1.0], [0.2, 0.8]))

    @given(mixtures(max_dim=2, max_modes=3), st.integers(0, 2**31))
    def test_profile_claim(self, g, seed):
        p = gmm_weak_convexity_params(g)
        r_ = np.random.default_rng(seed)
        x = r_.normal(0, 4, (500, g.dim))
        y = x + r_.normal(0, 1, (500, g.dim)) * np.exp(r_.uniform(-6, 3, (500, 1)))
        dx = x - y
        r = np.linalg.norm(dx, axis=1)
        q = -np.einsum("ij,ij->i", gmm_score(g, x) - gmm_score(g, y), dx) / r**2
        assert np.all(q >= p.alpha - f_m(p.big_m, r) / r - 1e-9)

    @staticmethod
    def _pairs(g, seed):
        r_ = np.random.default_rng(seed)
        x = r_.normal(0, 4, (500, g.dim))
        y = x + r_.normal(0, 1, (500, g.dim)) * np.exp(r_.uniform(-6, 3, (500, 1)))
        return x, y, np.linalg.norm(x - y, axis=1)

    @given(mixtures(max_dim=2, max_modes=3), st.integers(0, 2**31))
    def test_one_sided_lipschitz_claim(self, g, seed):
        # (grad U(x) - grad U(y)).(x - y) <= L_U |x - y|^2 with U = -log p
        p = gmm_weak_convexity_params(g)
        x, y, r = self._pairs(g, seed)
        q = -np.einsum("ij,ij->i", gmm_score(g, x) - gmm_score(g, y), x - y) / r**2
        assert np.all(q <= p.l_u + 1e-9)

    @given(mixtures(max_dim=2, max_modes=3), st.integers(0, 2**31))
    def test_two_sided_lipschitz_with_alpha_plus_m(self, g, seed):
        x, y, r = self._pairs(g, seed)
        ratio = np.linalg.norm(gmm_score(g, x) - gmm_score(g, y), axis=1) / r
        assert np.all(ratio <= gmm_lipschitz_proof_variant(g) + 1e-9)

    def test_two_sided_lipschitz_with_alpha_plus_sqrt_m_can_fail(self):
        # modes far apart relative to the scale: Hessian ~ |dmu|^2 / (4 s^4) outgrows alpha + sqrt(M)
        g = GaussianMixture(np.array([0.5, 0.5]), np.array([[0.0], [3.0]]), 0.375, 1)
        p = gmm_weak_convexity_params(g)
        eps = 1e-4
        x = np.array([[1.5 - eps], [1.5 + eps]])
        s = gmm_score(g, x)
        ratio = abs(s[1, 0] - s[0, 0]) / (2 * eps)
        assert ratio > p.l_u
        assert ratio < gmm_lipschitz_proof_variant(g)

    def test_sharp_profile_is_attained(self, two_mode):
        # along e1, symmetric about 0: the sharp profile holds with equality
        p = two_mode_params(two_mode, "sharp")
        for r in [0.01, 0.5, 2.0, 8.0]:
            x, y = np.array([r / 2, 0.0]), np.array([-r / 2, 0.0])
            q = -(gmm_score(two_mode, x) - gmm_score(two_mode, y)) @ (x - y) / r**2
            assert q == pytest.approx(p.alpha - f_m(p.big_m, r) / r, abs=1e-12)


class TestSecondMoment:
    def test_standard(self):
        assert gmm_m2(GaussianMixture.standard_normal(5)) == 5.0

    def test_two_mode_monte_carlo(self, two_mode):
        assert gmm_m2(two_mode) == 6.0
        x = gmm_sample(two_mode, 1_000_000, 3).points
        sq = (x * x).sum(axis=1)
        assert abs(sq.mean() - 6.0) < 3 * sq.std() / 1000

    def test_centered(self):
        g = GaussianMixture(np.array([0.2, 0.8]), np.zeros((2, 3)), 1.5, 3)
        assert gmm_m2(g) == pytest.approx(3 * 1.5**2, rel=1e-15)


class TestSerialization:
    def test_roundtrip(self, tmp_path, two_mode):
        path = tmp_path / "g.json"
        two_mode.save(path)
        assert set(json.loads(path.read_text())) == {"weights", "means", "scale", "dim"}
        g = GaussianMixture.load(path)
        assert np.array_equal(g.means, two_mode.means) and g.scale == two_mode.scale

    def test_missing_key(self):
        with pytest.raises(ConfigurationError):
            GaussianMixture.from_dict({"weights": [1.0], "means": [[0.0]], "dim": 1})
