import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from natgrad import distributions as dist
from natgrad.errors import DomainError, InvalidArgumentError

G = dist.gaussian_family()
GL = dist.gaussian_family(dist.LOG_SCALE)
C2 = dist.categorical_family(2)

mus = st.floats(-5, 5)
sigmas = st.floats(0.05, 5)


def fd_grad(f, x, h=1e-6):
    x = np.asarray(x, float)
    out = np.empty_like(x)
    for i in range(len(x)):
        e = np.zeros_like(x)
        e[i] = h
        out[i] = (f(x + e) - f(x - e)) / (2 * h)
    return out


def quad_kl(a, b):
    """KL between two normals by numerical integration."""
    (ma, sa), (mb, sb) = a, b

    def integrand(x):
        lp = -0.5 * ((x - ma) / sa) ** 2 - math.log(sa)
        lq = -0.5 * ((x - mb) / sb) ** 2 - math.log(sb)
        return math.exp(lp - 0.5 * math.log(2 * math.pi)) * (lp - lq)

    return integrate.quad(integrand, ma - 40 * sa, ma + 40 * sa, limit=200)[0]


class TestLogProb:
    def test_standard_normal_at_zero(self):
        assert dist.log_prob(G, dist.params([0, 1]), 0.0) == pytest.approx(-0.5 * math.log(2 * math.pi), abs=1e-15)

    def test_uniform_categorical(self):
        assert dist.log_prob(C2, dist.params([0, 0]), 0) == pytest.approx(math.log(0.5), abs=1e-15)

    def test_peak_density(self):
        # -ln(0.3 * sqrt(2 pi)) = 0.2850342...
        expected = -math.log(0.3 * math.sqrt(2 * math.pi))
        assert dist.log_prob(G, dist.params([1, 0.3]), 1.0) == pytest.approx(expected, abs=1e-14)
        assert expected == pytest.approx(0.285034, abs=1e-6)

    def test_log_chart_agrees(self):
        th = dist.params([0.4, 0.7])
        lth = dist.reparameterize(G, th, dist.LOG_SCALE)
        assert dist.log_prob(GL, lth, 1.3) == pytest.approx(dist.log_prob(G, th, 1.3), abs=1e-14)

    def test_chart_mismatch(self):
        with pytest.raises(InvalidArgumentError):
            dist.log_prob(G, dist.params([0, 0], dist.LOG_SCALE), 0.0)

    def test_nonpositive_sigma(self):
        with pytest.raises(DomainError):
            dist.log_prob(G, dist.params([0, 0]), 0.0)
        with pytest.raises(DomainError):
            dist.log_prob(G, dist.params([0, -1]), 0.0)

    def test_bad_category(self):
        with pytest.raises(InvalidArgumentError):
            dist.log_prob(C2, dist.params([0, 0]), 2)

    def test_nonfinite_params_rejected(self):
        with pytest.raises(InvalidArgumentError):
            dist.params([0, np.nan])


class TestScore:
    @pytest.mark.parametrize("x, expected", [(1.0, (1.0, 0.0)), (0.0, (0.0, -1.0))])
    def test_gaussian_examples(self, x, expected):
        s = dist.score(G, dist.params([0, 1]), x)
        np.testing.assert_allclose(s.values, expected, atol=1e-15)
        f = lambda v: dist.log_prob(G, dist.params(v), x)
        np.testing.assert_allclose(fd_grad(f, [0, 1]), expected, atol=1e-8)

    def test_categorical_example(self):
        s = dist.score(C2, dist.params([0, 0]), 0)
        np.testing.assert_allclose(s.values, [0.5, -0.5], atol=1e-15)
        f = lambda v: dist.log_prob(C2, dist.params(v), 0)
        np.testing.assert_allclose(fd_grad(f, [0, 0]), [0.5, -0.5], atol=1e-9)

    @pytest.mark.parametrize("family", [G, GL, dist.categorical_family(3), dist.categorical_family(5)],
                             ids=["gauss", "gauss-log", "cat3", "cat5"])
    def test_matches_finite_differences(self, family):
        rng = np.random.default_rng(11)
        for _ in range(100):
            if family.kind == dist.GAUSSIAN:
                v = [rng.uniform(-2, 2), rng.uniform(0.3, 3)]
                if family.chart == dist.LOG_SCALE:
                    v[1] = math.log(v[1])
                x = rng.normal(v[0], 1.5)
            else:
                v = rng.normal(size=family.dimension)
                x = int(rng.integers(family.dimension))
            th = dist.params(v, family.chart)
            f = lambda w: dist.log_prob(family, dist.params(w, family.chart), x)
            err = np.max(np.abs(dist.score(family, th, x).values - fd_grad(f, v)))
            assert err <= 1e-5

    def test_score_keeps_chart(self):
        assert dist.score(GL, dist.params([0, 0], dist.LOG_SCALE), 0.5).chart == dist.LOG_SCALE

    @pytest.mark.parametrize("family, theta", [
        (G, dist.params([0.3, 0.8])),
        (GL, dist.params([0.3, -0.2], dist.LOG_SCALE)),
        (dist.categorical_family(4), dist.params([0.1, -0.5, 1.0, 0.0])),
    ])
    def test_expected_score_is_zero(self, family, theta):
        n = 100_000
        xs = dist.sample_batch(family, theta, n, np.random.default_rng(5))
        mean = dist.score_batch(family, theta, xs).mean(axis=0)
        bound = 4 * math.sqrt(np.max(np.diag(dist.fisher_matrix(family, theta)))) / math.sqrt(n)
        assert np.max(np.abs(mean)) <= bound


class TestSample:
    def test_deterministic(self):
        th = dist.params([0.2, 1.1])
        assert dist.sample(G, th, 42) == dist.sample(G, th, 42)

    def test_zero_sigma_rejected(self):
        with pytest.raises(DomainError):
            dist.sample(G, dist.params([0, 0]), 0)

    def test_saturated_softmax(self):
        th = dist.params([1e9, 0])
        hits = sum(dist.sample(C2, th, s) == 0 for s in range(10_000))
        assert hits / 10_000 >= 0.999

    def test_gaussian_mean_over_seeds(self):
        th = dist.params([0, 1])
        xs = [dist.sample(G, th, s) for s in range(100_000)]
        assert -0.02 < np.mean(xs) < 0.02

    def test_categorical_frequencies(self):
        th = dist.params([0.0, 1.0, -1.0])
        fam = dist.categorical_family(3)
        xs = dist.sample_batch(fam, th, 200_000, np.random.default_rng(0))
        freq = np.bincount(xs, minlength=3) / len(xs)
        np.testing.assert_allclose(freq, dist.softmax_probs(th), atol=4e-3)


class TestKL:
    def test_self_is_zero(self):
        for fam, th in [(G, dist.params([0.3, 2.0])), (C2, dist.params([0.1, -2]))]:
            assert dist.kl_closed_form(fam, th, th) == 0.0

    @pytest.mark.parametrize("a, b, expected", [
        ((0, 0.3), (1, 0.3), 50 / 9),
        ((0, 3), (1, 3), 1 / 18),
    ])
    def test_unit_shift_pairs(self, a, b, expected):
        kl = dist.kl_closed_form(G, dist.params(a), dist.params(b))
        assert kl == pytest.approx(expected, rel=1e-12)
        assert kl == pytest.approx(quad_kl(a, b), rel=1e-8)

    def test_asymmetric(self):
        a, b = dist.params([0, 1]), dist.params([0.5, 2])
        assert abs(dist.kl_closed_form(G, a, b) - dist.kl_closed_form(G, b, a)) > 0.1

    def test_gaussian_matches_quadrature(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            a = (rng.uniform(-1, 1), rng.uniform(0.3, 2))
            b = (rng.uniform(-1, 1), rng.uniform(0.3, 2))
            assert dist.kl_closed_form(G, dist.params(a), dist.params(b)) == pytest.approx(quad_kl(a, b), rel=1e-7, abs=1e-12)

    def test_categorical_matches_sum(self):
        a, b = dist.params([0.2, -1.0, 0.5]), dist.params([1.0, 0.0, -0.3])
        pa, pb = dist.softmax_probs(a), dist.softmax_probs(b)
        expected = sum(p * math.log(p / q) for p, q in zip(pa, pb))
        assert dist.kl_closed_form(dist.categorical_family(3), a, b) == pytest.approx(expected, rel=1e-13)

    def test_chart_mismatch(self):
        with pytest.raises(InvalidArgumentError):
            dist.kl_closed_form(G, dist.params([0, 1]), dist.params([0, 0], dist.LOG_SCALE))

    @given(mus, sigmas, mus, sigmas)
    def test_nonnegative(self, m1, s1, m2, s2):
        assert dist.kl_closed_form(G, dist.params([m1, s1]), dist.params([m2, s2])) >= 0.0

    @given(mus, sigmas, mus, sigmas)
    def test_chart_covariance(self, m1, s1, m2, s2):
        a, b = dist.params([m1, s1]), dist.params([m2, s2])
        la = dist.reparameterize(G, a, dist.LOG_SCALE)
        lb = dist.reparameterize(G, b, dist.LOG_SCALE)
        kn = dist.kl_closed_form(G, a, b)
        kl = dist.kl_closed_form(GL, la, lb)
        assert abs(kn - kl) <= 1e-12 * max(1.0, kn)

    def test_local_symmetry(self):
        rng = np.random.default_rng(8)
        for fam, draw in [
            (G, lambda: [rng.uniform(-2, 2), rng.uniform(0.3, 3)]),
            (dist.categorical_family(3), lambda: rng.normal(size=3)),
        ]:
            for _ in range(100):
                a = np.array(draw())
                d = rng.normal(size=a.shape)
                d *= rng.uniform(1e-5, 1e-3) / np.linalg.norm(d)
                ta, tb = dist.params(a), dist.params(a + d)
                kab = dist.kl_closed_form(fam, ta, tb)
                kba = dist.kl_closed_form(fam, tb, ta)
                assert abs(kab - kba) <= 10 * kab * np.linalg.norm(d)


class TestFisher:
    @pytest.mark.parametrize("sigma, diag", [(1.0, (1.0, 2.0)), (3.0, (1 / 9, 2 / 9))])
    def test_gaussian(self, sigma, diag):
        f = dist.fisher_analytic(G, dist.params([0, sigma]))
        np.testing.assert_allclose(f.matrix, np.diag(diag), rtol=1e-15)
        assert f.provenance == "analytic"

    def test_categorical(self):
        f = dist.fisher_matrix(C2, dist.params([0, 0]))
        np.testing.assert_allclose(f, [[0.25, -0.25], [-0.25, 0.25]], atol=1e-16)

    def test_categorical_matches_sampled_outer_products(self):
        th = dist.params([0, 0])
        xs = dist.sample_batch(C2, th, 100_000, np.random.default_rng(1))
        s = dist.score_batch(C2, th, xs)
        np.testing.assert_allclose(s.T @ s / len(s), dist.fisher_matrix(C2, th), atol=5e-3)

    def test_gaussian_matches_quadrature(self):
        mu, sigma = 0.7, 1.4
        th = dist.params([mu, sigma])
        pdf = lambda x: math.exp(-0.5 * ((x - mu) / sigma) ** 2) / (sigma * math.sqrt(2 * math.pi))
        out = np.zeros((2, 2))
        for i in range(2):
            for j in range(2):
                f = lambda x: pdf(x) * dist.score(G, th, x).values[i] * dist.score(G, th, x).values[j]
                out[i, j] = integrate.quad(f, mu - 30 * sigma, mu + 30 * sigma, limit=200)[0]
        np.testing.assert_allclose(dist.fisher_matrix(G, th), out, atol=1e-9)

    def test_log_chart_is_pullback(self):
        th = dist.params([0.1, 0.6])
        j = np.diag([1.0, 0.6])  # d(mu, sigma)/d(mu, log sigma)
        expected = j.T @ dist.fisher_matrix(G, th) @ j
        lth = dist.reparameterize(G, th, dist.LOG_SCALE)
        np.testing.assert_allclose(dist.fisher_matrix(GL, lth), expected, rtol=1e-14)


class TestReparameterize:
    def test_examples(self):
        np.testing.assert_array_equal(dist.reparameterize(G, dist.params([0, 1]), dist.LOG_SCALE).values, [0, 0])
        out = dist.reparameterize(G, dist.params([2, 0.5]), dist.LOG_SCALE).values
        np.testing.assert_allclose(out, [2, -0.6931471805599453], rtol=1e-15)
        back = dist.reparameterize(GL, dist.params([0, 0], dist.LOG_SCALE), dist.NATURAL)
        assert back == dist.params([0, 1])

    def test_unknown_chart(self):
        with pytest.raises(InvalidArgumentError):
            dist.reparameterize(G, dist.params([0, 1]), "polar")

    @settings(max_examples=200)
    @given(mus, st.floats(1e-3, 1e3))
    def test_round_trip(self, mu, sigma):
        th = dist.params([mu, sigma])
        back = dist.reparameterize(GL, dist.reparameterize(G, th, dist.LOG_SCALE), dist.NATURAL)
        np.testing.assert_allclose(back.values, th.values, rtol=1e-12, atol=1e-12)


class TestFamilyAndParams:
    def test_categorical_has_no_log_chart(self):
        with pytest.raises(InvalidArgumentError):
            dist.PolicyFamily(dist.CATEGORICAL, 3, dist.LOG_SCALE)

    def test_gaussian_dimension_fixed(self):
        with pytest.raises(InvalidArgumentError):
            dist.PolicyFamily(dist.GAUSSIAN, 3)

    def test_wrong_length(self):
        with pytest.raises(InvalidArgumentError):
            dist.log_prob(G, dist.params([0, 1, 2]), 0.0)

    def test_param_vector_is_read_only(self):
        th = dist.params([0, 1])
        with pytest.raises(ValueError):
            th.values[0] = 3

    @given(st.lists(st.floats(-30, 30), min_size=2, max_size=8))
    def test_softmax_sums_to_one(self, logits):
        assert abs(dist.softmax_probs(dist.params(logits)).sum() - 1.0) <= 1e-12

    def test_tabular_kl_weights(self):
        fam = dist.categorical_family(2)
        a = dist.params([0, 0, 0, 0])
        b = dist.params([1, 0, 0, 0])
        k0 = dist.kl_closed_form(fam, dist.params([0, 0]), dist.params([1, 0]))
        assert dist.tabular_kl(fam, a, b, [3, 1]) == pytest.approx(0.75 * k0, rel=1e-14)
        assert dist.tabular_kl(fam, a, b) == pytest.approx(0.5 * k0, rel=1e-14)
