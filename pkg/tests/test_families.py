"""Exponential family maps, moments and correlation blocks."""

from itertools import product

import numpy as np
import pytest
from scipy import integrate

from bethezeta import families as fams
from bethezeta import hypergraph as hg

import oracles


def pair_factor():
    g = hg.path_graph(2)
    return fams.binary_family(g).factor_families[0]


def all_families():
    """(family, natural-parameter sampler) for each supported kind."""
    rng = np.random.default_rng(12)
    out = []
    bv = fams.binary_vertex()
    out.append((bv, lambda r=rng: r.normal(0, 1, 1)))
    m3 = fams.multinomial_vertex(3)
    out.append((m3, lambda r=rng: r.normal(0, 1, 2)))
    gv = fams.GaussianVertexFamily()
    out.append(
        (gv, lambda r=rng: np.array([r.normal(0, 1), -r.uniform(0.2, 2.0)]))
    )
    fv = fams.FixedMeanGaussianVertexFamily(0.3)
    out.append((fv, lambda r=rng: np.array([-r.uniform(0.2, 2.0)])))
    ff = pair_factor()
    out.append((ff, lambda r=rng: r.normal(0, 0.7, ff.dim)))
    g3 = hg.build_factor_graph([0, 1], [(0, 1)])
    fmix = fams.discrete_family(
        g3, [fams.binary_vertex(), fams.multinomial_vertex(3)]
    ).factor_families[0]
    out.append((fmix, lambda r=rng: r.normal(0, 0.7, fmix.dim)))
    gp = fams.GaussianPairFamily((0, 1), [gv, gv])
    def gp_theta(r=rng):
        a2, b2 = -r.uniform(0.4, 1.2, 2)
        td = r.uniform(-0.5, 0.5) * np.sqrt(4 * a2 * b2)
        return np.array([td, r.normal(0, 0.5), a2, r.normal(0, 0.5), b2])
    out.append((gp, gp_theta))
    fp = fams.FixedMeanGaussianPairFamily((0, 1), [fv, fv])
    def fp_theta(r=rng):
        a, b = -r.uniform(0.4, 1.2, 2)
        td = r.uniform(-0.5, 0.5) * np.sqrt(4 * a * b)
        return np.array([td, a, b])
    out.append((fp, fp_theta))
    return out


class TestPartitionFunctions:
    def test_binary_zero_is_log_two(self):
        assert fams.binary_vertex().log_partition([0.0]) == pytest.approx(
            np.log(2.0)
        )

    def test_uniform_multinomial_entropy(self):
        m3 = fams.multinomial_vertex(3)
        assert m3.legendre([1 / 3, 1 / 3]) == pytest.approx(-np.log(3.0))

    def test_fixed_mean_entropy_against_quadrature(self):
        fv = fams.FixedMeanGaussianVertexFamily(0.0)
        eta = 2.0
        theta = fv.to_natural([eta])[0]
        psi = fv.log_partition([theta])

        def neg_entropy_integrand(x):
            logp = theta * x * x - psi
            return np.exp(logp) * logp

        val, _ = integrate.quad(neg_entropy_integrand, -30, 30)
        assert fv.legendre([eta]) == pytest.approx(val, abs=1e-8)
        assert fv.legendre([eta]) == pytest.approx(
            -0.5 * np.log(2 * np.pi * np.e * eta)
        )


class TestParameterMaps:
    def test_binary_mean(self):
        bv = fams.binary_vertex()
        assert bv.to_expectation([0.0])[0] == pytest.approx(0.0)
        # two-state sum oracle
        expected = (np.exp(0.5) - np.exp(-0.5)) / (np.exp(0.5) + np.exp(-0.5))
        assert bv.to_expectation([0.5])[0] == pytest.approx(expected)

    def test_pair_factor_symmetry(self):
        ff = pair_factor()
        np.testing.assert_allclose(
            ff.to_expectation(np.zeros(3)), np.zeros(3), atol=1e-14
        )

    def test_round_trip_all_families(self):
        for fam, draw in all_families():
            for _ in range(100):
                theta = draw()
                eta = fam.to_expectation(theta)
                back = fam.to_natural(eta)
                assert np.max(np.abs(back - theta)) < 1e-10, fam

    def test_duality_all_families(self):
        for fam, draw in all_families():
            for _ in range(20):
                theta = draw()
                eta = fam.to_expectation(theta)
                lhs = fam.legendre(eta) + fam.log_partition(theta)
                assert lhs == pytest.approx(float(theta @ eta), abs=1e-10)

    def test_gradient_of_log_partition_is_mean_map(self):
        for fam, draw in all_families():
            for _ in range(5):
                theta = draw()
                grad = oracles.fd_gradient(fam.log_partition, theta, 1e-5)
                np.testing.assert_allclose(
                    grad, fam.to_expectation(theta), atol=1e-6
                )

    def test_hessian_of_log_partition_is_covariance(self):
        for fam, draw in all_families():
            for _ in range(3):
                theta = draw()
                hess = oracles.fd_hessian(fam.log_partition, theta, 1e-4)
                cov = fam.covariance(fam.to_expectation(theta))
                np.testing.assert_allclose(hess, cov, rtol=1e-5, atol=1e-5)

    def test_domain_errors(self):
        gv = fams.GaussianVertexFamily()
        with pytest.raises(fams.DomainError):
            gv.log_partition([0.0, 0.5])
        fv = fams.FixedMeanGaussianVertexFamily()
        with pytest.raises(fams.DomainError):
            fv.to_natural([-1.0])
        m3 = fams.multinomial_vertex(3)
        with pytest.raises(fams.DomainError):
            m3.to_natural([0.7, 0.4])  # implied third mass negative


class TestMoments:
    def test_binary_unit_variance(self):
        bv = fams.binary_vertex()
        assert bv.covariance([0.0])[0, 0] == pytest.approx(1.0)

    def test_fixed_mean_vertex_variance(self):
        fv = fams.FixedMeanGaussianVertexFamily()
        sigma2 = 1.7
        assert fv.covariance([sigma2])[0, 0] == pytest.approx(
            2.0 * sigma2**2
        )

    def test_fixed_mean_pair_determinant(self):
        fp = fams.FixedMeanGaussianPairFamily(
            (0, 1),
            [fams.FixedMeanGaussianVertexFamily()] * 2,
        )
        cov = fp.covariance(np.array([0.5, 1.0, 1.0]))
        assert np.linalg.det(cov) == pytest.approx(4 * (1 - 0.25) ** 3)

    def test_discrete_moments_match_enumeration(self):
        # independent path: explicit loops over the state grid
        rng = np.random.default_rng(4)
        g = hg.build_factor_graph([0, 1], [(0, 1)])
        ff = fams.discrete_family(
            g, [fams.multinomial_vertex(3), fams.binary_vertex()]
        ).factor_families[0]
        for _ in range(10):
            theta = rng.normal(0, 0.8, ff.dim)
            states = list(product(range(3), range(2)))
            logs = []
            for s in states:
                col = np.ravel_multi_index(s, ff.state_shape)
                logs.append(float(ff.stat_matrix[:, col] @ theta))
            w = np.exp(np.array(logs) - max(logs))
            w /= w.sum()
            mean = np.zeros(ff.dim)
            second = np.zeros((ff.dim, ff.dim))
            for k, s in enumerate(states):
                col = np.ravel_multi_index(s, ff.state_shape)
                phi = ff.stat_matrix[:, col]
                mean += w[k] * phi
                second += w[k] * np.outer(phi, phi)
            cov = second - np.outer(mean, mean)
            eta = ff.to_expectation(theta)
            np.testing.assert_allclose(eta, mean, atol=1e-12)
            np.testing.assert_allclose(ff.covariance(eta), cov, atol=1e-12)

    def test_gaussian_pair_moments_against_quadrature(self):
        gp = fams.GaussianPairFamily(
            (0, 1), [fams.GaussianVertexFamily()] * 2
        )
        theta = np.array([0.3, 0.2, -0.6, -0.1, -0.8])
        psi = gp.log_partition(theta)

        def density(y, x):
            return np.exp(
                theta[0] * x * y
                + theta[1] * x
                + theta[2] * x * x
                + theta[3] * y
                + theta[4] * y * y
                - psi
            )

        mass, _ = integrate.dblquad(density, -12, 12, -12, 12)
        assert mass == pytest.approx(1.0, abs=1e-8)
        ex, _ = integrate.dblquad(
            lambda y, x: x * density(y, x), -12, 12, -12, 12
        )
        exy, _ = integrate.dblquad(
            lambda y, x: x * y * density(y, x), -12, 12, -12, 12
        )
        eta = gp.to_expectation(theta)
        assert eta[1] == pytest.approx(ex, abs=1e-8)
        assert eta[0] == pytest.approx(exy, abs=1e-8)

    def test_marginalize_factor(self):
        ff = pair_factor()
        eta_i = fams.marginalize_factor(ff, np.array([0.0, 0.3, 0.0]), 0)
        assert eta_i[0] == pytest.approx(np.tanh(0.3))
        eta_u = fams.marginalize_factor(ff, np.zeros(3), 0)
        assert eta_u[0] == pytest.approx(0.0)


class TestCorrelationBlocks:
    def test_independent_factor_is_zero(self):
        ff = pair_factor()
        eta = ff.to_expectation(np.array([0.0, 0.4, -0.7]))
        c = fams.correlation_block(ff, eta, 0, 1)
        np.testing.assert_allclose(c, 0.0, atol=1e-12)

    def test_binary_pair_is_tanh(self):
        ff = pair_factor()
        j = 0.5
        eta = ff.to_expectation(np.array([j, 0.0, 0.0]))
        # four-state sum oracle
        states = [(1, 1), (1, -1), (-1, 1), (-1, -1)]
        w = np.array([np.exp(j * a * b) for a, b in states])
        w /= w.sum()
        exy = sum(wk * a * b for wk, (a, b) in zip(w, states))
        c = fams.correlation_block(ff, eta, 0, 1)
        assert c[0, 0] == pytest.approx(exy)
        assert c[0, 0] == pytest.approx(np.tanh(j))

    def test_fixed_mean_pair_is_rho_squared(self):
        fp = fams.FixedMeanGaussianPairFamily(
            (0, 1), [fams.FixedMeanGaussianVertexFamily()] * 2
        )
        for rho in (0.2, -0.5, 0.8):
            c = fams.correlation_block(fp, np.array([rho, 1.0, 1.0]), 0, 1)
            assert c[0, 0] == pytest.approx(rho * rho)

    def test_norm_below_one_and_transpose_symmetry(self):
        rng = np.random.default_rng(8)
        g = hg.build_factor_graph([0, 1, 2], [(0, 1, 2)])
        ff = fams.discrete_family(
            g,
            [
                fams.multinomial_vertex(3),
                fams.binary_vertex(),
                fams.multinomial_vertex(3),
            ],
        ).factor_families[0]
        for _ in range(20):
            eta = ff.to_expectation(rng.normal(0, 0.6, ff.dim))
            c01 = fams.correlation_block(ff, eta, 0, 1)
            c10 = fams.correlation_block(ff, eta, 1, 0)
            np.testing.assert_allclose(c01, c10.T, atol=1e-10)
            assert np.linalg.norm(c01, 2) < 1.0


class TestStatisticBases:
    def test_pure_dims(self):
        g = hg.build_factor_graph([0, 1, 2, 3], [(0, 1, 2, 3)])
        ff = fams.binary_family(g).factor_families[0]
        # subsets of size >= 2 of four binary vertices
        assert ff.pure_dim == 6 + 4 + 1
        assert ff.dim == ff.pure_dim + 4

    def test_degree_one_factor_has_no_pure_part(self):
        g = hg.build_factor_graph([0], [(0,)])
        ff = fams.binary_family(g).factor_families[0]
        assert ff.pure_dim == 0
        assert ff.dim == 1

    def test_indicator_det_binary(self):
        bv = fams.binary_vertex()
        assert bv.indicator_basis_det() == pytest.approx(2.0)
        ff = pair_factor()
        assert ff.indicator_basis_det() == pytest.approx(16.0)

    def test_indicator_det_converts_variance_products(self):
        # det Var = det(M)^2 prod p at arbitrary member densities
        rng = np.random.default_rng(2)
        ff = pair_factor()
        for _ in range(10):
            theta = rng.normal(0, 0.7, ff.dim)
            eta = ff.to_expectation(theta)
            p = ff.dist_from_expectation(eta)
            lhs = np.linalg.det(ff.covariance(eta))
            rhs = ff.indicator_basis_det() ** 2 * np.prod(p)
            assert lhs == pytest.approx(rhs, rel=1e-10)
