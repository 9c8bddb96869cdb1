"""Exponential families for vertices and factors of a factor hypergraph.

Vertex families carry a sufficient statistic ``phi_i`` of dimension
``r_i``; factor families carry ``phi_alpha = (pure part, phi_i for i in
alpha)`` so that the vertex statistics are literally components of the
factor statistic.  Every family exposes the same small surface:

* ``log_partition(theta)`` and its Legendre transform ``legendre(eta)``
* the mean map ``to_expectation`` and its inverse ``to_natural``
* ``covariance`` of the sufficient statistic at a member density

Supported kinds: multinomial on a finite alphabet (indicator statistics),
binary spins (+-1 monomials), Gaussian ``(x, x^2)`` and fixed-mean
Gaussian ``(x - mu)^2``.  Gaussian factor families are pairwise only.
All densities use counting measure (discrete) or Lebesgue measure.
"""

from itertools import combinations, product

import numpy as np

DOMAIN_SLACK = 1e-12
COND_LIMIT = 1e12


class DomainError(ValueError):
    """Parameter outside the natural/expectation domain."""


class SingularCovarianceError(ArithmeticError):
    """Covariance of the sufficient statistic is numerically singular."""


def _check_condition(mat, what):
    cond = np.linalg.cond(mat)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise SingularCovarianceError(
            "%s has condition number %.3g" % (what, cond)
        )


# ---------------------------------------------------------------------------
# discrete vertex families


class DiscreteVertexFamily:
    """Exponential family on a finite alphabet.

    ``stat_matrix`` has one row per statistic and one column per state;
    together with the constant row it must form a basis of functions on
    the alphabet, which holds for the two canonical constructions below.
    """

    kind = "discrete"

    def __init__(self, states, stat_matrix, stat_names):
        self.states = np.asarray(states, dtype=float)
        self.stat_matrix = np.asarray(stat_matrix, dtype=float)
        self.stat_names = tuple(stat_names)
        self.n_states = self.states.shape[0]
        self.dim = self.stat_matrix.shape[0]
        if self.stat_matrix.shape != (self.dim, self.n_states):
            raise ValueError("stat matrix shape mismatch")
        self._basis = np.vstack([np.ones(self.n_states), self.stat_matrix])
        if self.dim + 1 != self.n_states or (
            abs(np.linalg.det(self._basis)) < 1e-9
        ):
            raise ValueError("statistics + constant must form a state basis")
        self._is_spin = (
            self.dim == 1
            and self.n_states == 2
            and np.allclose(self.stat_matrix, [[1.0, -1.0]])
        )

    def dist_from_natural(self, theta):
        logits = self.stat_matrix.T @ np.asarray(theta, dtype=float)
        logits -= logits.max()
        p = np.exp(logits)
        return p / p.sum()

    def dist_from_expectation(self, eta):
        rhs = np.concatenate([[1.0], np.asarray(eta, dtype=float)])
        p = np.linalg.solve(self._basis, rhs)
        if np.any(p <= DOMAIN_SLACK):
            raise DomainError("expectation parameter implies nonpositive mass")
        return p

    def log_partition(self, theta):
        logits = self.stat_matrix.T @ np.asarray(theta, dtype=float)
        m = logits.max()
        return m + np.log(np.exp(logits - m).sum())

    def to_expectation(self, theta):
        return self.stat_matrix @ self.dist_from_natural(theta)

    def to_natural(self, eta):
        if self._is_spin:
            m = float(np.asarray(eta).reshape(-1)[0])
            if not -1.0 + DOMAIN_SLACK < m < 1.0 - DOMAIN_SLACK:
                raise DomainError("spin mean outside (-1, 1)")
            return np.array([np.arctanh(m)])
        p = self.dist_from_expectation(eta)
        coeffs = np.linalg.solve(self._basis.T, np.log(p))
        return coeffs[1:]

    def legendre(self, eta):
        p = self.dist_from_expectation(eta)
        return float(p @ np.log(p))

    def covariance(self, eta):
        p = self.dist_from_expectation(eta)
        a = self.stat_matrix
        mean = a @ p
        return (a * p) @ a.T - np.outer(mean, mean)

    def covariance_from_natural(self, theta):
        p = self.dist_from_natural(theta)
        a = self.stat_matrix
        mean = a @ p
        return (a * p) @ a.T - np.outer(mean, mean)

    def natural_ok(self, theta):
        return np.all(np.isfinite(theta))

    def expectation_ok(self, eta):
        try:
            self.dist_from_expectation(eta)
        except DomainError:
            return False
        return True

    def indicator_basis_det(self):
        """|det| of the map from indicator statistics to this statistic."""
        return abs(np.linalg.det(self._basis))


def binary_vertex():
    """Spin variable x in {+1, -1} with statistic x."""
    return DiscreteVertexFamily([1.0, -1.0], [[1.0, -1.0]], ("x",))


def multinomial_vertex(n_states):
    """Alphabet {0..N-1} with indicator statistics of states 0..N-2."""
    if n_states < 2:
        raise ValueError("need at least two states")
    stat = np.zeros((n_states - 1, n_states))
    for k in range(n_states - 1):
        stat[k, k] = 1.0
    names = tuple("ind%d" % k for k in range(n_states - 1))
    return DiscreteVertexFamily(np.arange(n_states, dtype=float), stat, names)


# ---------------------------------------------------------------------------
# Gaussian vertex families


class GaussianVertexFamily:
    """Statistics (x, x^2); natural domain requires a negative x^2 weight."""

    kind = "gaussian"
    dim = 2
    stat_names = ("x", "x2")

    def _params(self, theta):
        t1, t2 = float(theta[0]), float(theta[1])
        if t2 >= -DOMAIN_SLACK:
            raise DomainError("gaussian vertex needs theta2 < 0")
        prec = -2.0 * t2
        mean = t1 / prec
        return mean, 1.0 / prec

    def _from_eta(self, eta):
        m = float(eta[0])
        var = float(eta[1]) - m * m
        if var <= DOMAIN_SLACK:
            raise DomainError("gaussian vertex needs positive implied variance")
        return m, var

    def log_partition(self, theta):
        m, var = self._params(theta)
        return 0.5 * m * m / var + 0.5 * np.log(2.0 * np.pi * var)

    def to_expectation(self, theta):
        m, var = self._params(theta)
        return np.array([m, var + m * m])

    def to_natural(self, eta):
        m, var = self._from_eta(eta)
        return np.array([m / var, -0.5 / var])

    def legendre(self, eta):
        _, var = self._from_eta(eta)
        return -0.5 * np.log(2.0 * np.pi * np.e * var)

    def covariance(self, eta):
        m, var = self._from_eta(eta)
        return np.array(
            [
                [var, 2.0 * m * var],
                [2.0 * m * var, 2.0 * var * var + 4.0 * m * m * var],
            ]
        )

    def covariance_from_natural(self, theta):
        return self.covariance(self.to_expectation(theta))

    def natural_ok(self, theta):
        return float(theta[1]) < -DOMAIN_SLACK

    def expectation_ok(self, eta):
        return float(eta[1]) - float(eta[0]) ** 2 > DOMAIN_SLACK


class FixedMeanGaussianVertexFamily:
    """Statistic (x - mu)^2; the expectation parameter is the variance."""

    kind = "gaussian_fixed_mean"
    dim = 1
    stat_names = ("sq",)

    def __init__(self, mean=0.0):
        self.mean = float(mean)

    def log_partition(self, theta):
        t = float(theta[0])
        if t >= -DOMAIN_SLACK:
            raise DomainError("fixed-mean gaussian vertex needs theta < 0")
        return 0.5 * np.log(np.pi / (-t))

    def to_expectation(self, theta):
        t = float(theta[0])
        if t >= -DOMAIN_SLACK:
            raise DomainError("fixed-mean gaussian vertex needs theta < 0")
        return np.array([-0.5 / t])

    def to_natural(self, eta):
        v = float(eta[0])
        if v <= DOMAIN_SLACK:
            raise DomainError("variance must be positive")
        return np.array([-0.5 / v])

    def legendre(self, eta):
        v = float(eta[0])
        if v <= DOMAIN_SLACK:
            raise DomainError("variance must be positive")
        return -0.5 * np.log(2.0 * np.pi * np.e * v)

    def covariance(self, eta):
        v = float(eta[0])
        return np.array([[2.0 * v * v]])

    def covariance_from_natural(self, theta):
        return self.covariance(self.to_expectation(theta))

    def natural_ok(self, theta):
        return float(theta[0]) < -DOMAIN_SLACK

    def expectation_ok(self, eta):
        return float(eta[0]) > DOMAIN_SLACK


# ---------------------------------------------------------------------------
# factor families


class FactorFamilyBase:
    """Shared layout: statistic = (pure part, vertex parts in member order)."""

    def vertex_slice(self, pos):
        start = self.pure_dim + sum(
            vf.dim for vf in self.vertex_families[:pos]
        )
        return slice(start, start + self.vertex_families[pos].dim)

    @property
    def pure_slice(self):
        return slice(0, self.pure_dim)

    def covariance_block(self, cov, pos_a, pos_b):
        return cov[self.vertex_slice(pos_a), self.vertex_slice(pos_b)]

    def solve_vertex_naturals(self, pure_theta, vertex_etas, init=None,
                              tol=1e-10, max_steps=100):
        """Find vertex natural parts t with the pure natural part pinned.

        Solves ``to_expectation((pure_theta, t))[vertex parts] ==
        vertex_etas`` by damped Newton; the Jacobian is the vertex block
        of the statistic covariance, positive definite on the domain.
        Returns the full natural parameter vector.
        """
        target = np.concatenate([np.asarray(v, float) for v in vertex_etas])
        if init is None:
            t = np.concatenate(
                [
                    vf.to_natural(eta)
                    for vf, eta in zip(self.vertex_families, vertex_etas)
                ]
            )
        else:
            t = np.asarray(init, dtype=float).copy()
        nv = target.size

        def assemble(tv):
            return np.concatenate([np.asarray(pure_theta, float), tv])

        def resid(tv):
            eta = self.to_expectation(assemble(tv))
            return eta[self.pure_dim:] - target

        r = resid(t)
        for _ in range(max_steps):
            if np.max(np.abs(r)) < tol:
                return assemble(t)
            eta_full = self.to_expectation(assemble(t))
            cov = self.covariance(eta_full)
            jac = cov[self.pure_dim:, self.pure_dim:]
            step = np.linalg.solve(jac, r)
            lam = 1.0
            for _ in range(40):
                cand = t - lam * step
                try:
                    r_new = resid(cand)
                except DomainError:
                    lam *= 0.5
                    continue
                if np.max(np.abs(r_new)) < np.max(np.abs(r)) or lam < 1e-6:
                    t, r = cand, r_new
                    break
                lam *= 0.5
            else:
                break
        if np.max(np.abs(r)) >= tol * max(1.0, nv):
            raise ArithmeticError(
                "vertex-natural solve did not converge (residual %.3g)"
                % np.max(np.abs(r))
            )
        return assemble(t)


class DiscreteFactorFamily(FactorFamilyBase):
    """Discrete factor family over the product alphabet of its members.

    The pure statistics are all products of vertex statistic coordinates
    over member subsets of size >= 2.  Together with the member statistics
    and the constant they form a basis of functions on the product space,
    so the family is the full multinomial family on it.
    """

    kind = "discrete"

    def __init__(self, members, vertex_families):
        self.members = tuple(members)
        self.vertex_families = tuple(vertex_families)
        if len(self.members) != len(self.vertex_families):
            raise ValueError("one vertex family per member required")
        for vf in self.vertex_families:
            if vf.kind != "discrete":
                raise ValueError("discrete factor over non-discrete vertex")
        d = len(self.members)
        shapes = [vf.n_states for vf in self.vertex_families]
        self.state_shape = tuple(shapes)
        self.n_states = int(np.prod(shapes))
        grid = np.array(list(product(*[range(s) for s in shapes])), dtype=int)
        self.state_grid = grid  # (n_states, d) state index tuples

        # pure statistics: subsets of size >= 2, all coordinate choices
        pure_rows = []
        pure_names = []
        self.pure_terms = []
        for size in range(2, d + 1):
            for subset in combinations(range(d), size):
                coord_ranges = [
                    range(self.vertex_families[p].dim) for p in subset
                ]
                for coords in product(*coord_ranges):
                    row = np.ones(self.n_states)
                    for p, k in zip(subset, coords):
                        row = row * self.vertex_families[p].stat_matrix[
                            k, grid[:, p]
                        ]
                    pure_rows.append(row)
                    name = "prod(" + ",".join(
                        "%s:%s"
                        % (self.members[p], self.vertex_families[p].stat_names[k])
                        for p, k in zip(subset, coords)
                    ) + ")"
                    pure_names.append(name)
                    self.pure_terms.append(tuple(zip(subset, coords)))
        self.pure_dim = len(pure_rows)

        vertex_rows = []
        vertex_names = []
        for p, vf in enumerate(self.vertex_families):
            for k in range(vf.dim):
                vertex_rows.append(vf.stat_matrix[k, grid[:, p]])
                vertex_names.append(
                    "%s:%s" % (self.members[p], vf.stat_names[k])
                )
        rows = pure_rows + vertex_rows
        self.stat_matrix = (
            np.array(rows) if rows else np.zeros((0, self.n_states))
        )
        self.stat_names = tuple(pure_names + vertex_names)
        self.dim = self.stat_matrix.shape[0]
        self._basis = np.vstack([np.ones(self.n_states), self.stat_matrix])
        if self._basis.shape[0] != self.n_states:
            raise ValueError("statistic basis is not complete")

    # -- table <-> parameter maps -----------------------------------------
    def dist_from_natural(self, theta):
        logits = self.stat_matrix.T @ np.asarray(theta, dtype=float)
        logits -= logits.max()
        p = np.exp(logits)
        return p / p.sum()

    def dist_from_expectation(self, eta):
        rhs = np.concatenate([[1.0], np.asarray(eta, dtype=float)])
        p = np.linalg.solve(self._basis, rhs)
        if np.any(p <= DOMAIN_SLACK):
            raise DomainError("expectation parameter implies nonpositive mass")
        return p

    def eta_from_table(self, table):
        p = np.asarray(table, dtype=float).reshape(-1)
        return self.stat_matrix @ p

    def table(self, eta):
        """Member density as an ndarray over the member state grid."""
        return self.dist_from_expectation(eta).reshape(self.state_shape)

    # -- family surface ----------------------------------------------------
    def log_partition(self, theta):
        logits = self.stat_matrix.T @ np.asarray(theta, dtype=float)
        m = logits.max()
        return m + np.log(np.exp(logits - m).sum())

    def to_expectation(self, theta):
        return self.stat_matrix @ self.dist_from_natural(theta)

    def to_natural(self, eta):
        p = self.dist_from_expectation(eta)
        coeffs = np.linalg.solve(self._basis.T, np.log(p))
        return coeffs[1:]

    def legendre(self, eta):
        p = self.dist_from_expectation(eta)
        return float(p @ np.log(p))

    def covariance(self, eta):
        p = self.dist_from_expectation(eta)
        a = self.stat_matrix
        mean = a @ p
        cov = (a * p) @ a.T - np.outer(mean, mean)
        return cov

    def covariance_from_natural(self, theta):
        """Statistic covariance straight from theta; robust near the boundary."""
        p = self.dist_from_natural(theta)
        a = self.stat_matrix
        mean = a @ p
        return (a * p) @ a.T - np.outer(mean, mean)

    def natural_ok(self, theta):
        return np.all(np.isfinite(theta))

    def expectation_ok(self, eta):
        try:
            self.dist_from_expectation(eta)
        except DomainError:
            return False
        return True

    def indicator_basis_det(self):
        """|det| of the linear map from indicator statistics to phi.

        det Var[phi] = det(M)^2 * prod_x p(x) for every member density,
        so this constant converts determinant identities into products of
        belief values.  Equals 1 for indicator statistics themselves.
        """
        n = self.n_states
        ind = np.zeros((n, n))
        ind[0] = 1.0
        for k in range(1, n):
            ind[k, k] = 1.0
        return abs(np.linalg.det(self._basis) / np.linalg.det(ind))


def _gauss_quad_cov(mean, cov, terms):
    """Covariance of monomials of degree <= 2 of a Gaussian vector.

    ``terms`` lists each statistic as a tuple of variable indices, e.g.
    ``(i,)`` for x_i and ``(i, j)`` for x_i x_j (Wick/Isserlis forms).
    """
    m, s = np.asarray(mean, float), np.asarray(cov, float)
    n = len(terms)
    out = np.zeros((n, n))
    for a, ta in enumerate(terms):
        for b, tb in enumerate(terms):
            if len(ta) == 1 and len(tb) == 1:
                out[a, b] = s[ta[0], tb[0]]
            elif len(ta) == 1 and len(tb) == 2:
                i, (j, k) = ta[0], tb
                out[a, b] = s[i, j] * m[k] + s[i, k] * m[j]
            elif len(ta) == 2 and len(tb) == 1:
                (i, j), k = ta, tb[0]
                out[a, b] = s[k, i] * m[j] + s[k, j] * m[i]
            else:
                (i, j), (k, l) = ta, tb
                out[a, b] = (
                    s[i, k] * s[j, l]
                    + s[i, l] * s[j, k]
                    + m[i] * m[k] * s[j, l]
                    + m[i] * m[l] * s[j, k]
                    + m[j] * m[k] * s[i, l]
                    + m[j] * m[l] * s[i, k]
                )
    return out


class GaussianPairFamily(FactorFamilyBase):
    """Gaussian family on an edge: statistic (x_i x_j, x_i, x_i^2, x_j, x_j^2)."""

    kind = "gaussian"
    pure_dim = 1

    def __init__(self, members, vertex_families):
        if len(members) != 2:
            raise ValueError("gaussian factors are pairwise")
        self.members = tuple(members)
        self.vertex_families = tuple(vertex_families)
        self.dim = 5
        self.stat_names = (
            "cross",
            "%s:x" % (members[0],),
            "%s:x2" % (members[0],),
            "%s:x" % (members[1],),
            "%s:x2" % (members[1],),
        )

    def _precision(self, theta):
        td, a1, a2, b1, b2 = [float(x) for x in theta]
        prec = np.array([[-2.0 * a2, -td], [-td, -2.0 * b2]])
        if np.linalg.eigvalsh(prec).min() <= DOMAIN_SLACK:
            raise DomainError("pair density is not normalizable")
        h = np.array([a1, b1])
        return prec, h

    def _moments(self, theta):
        prec, h = self._precision(theta)
        cov = np.linalg.inv(prec)
        mean = cov @ h
        return mean, cov

    def _moments_from_eta(self, eta):
        cross, m1, q1, m2, q2 = [float(x) for x in eta]
        mean = np.array([m1, m2])
        cov = np.array(
            [[q1 - m1 * m1, cross - m1 * m2], [cross - m1 * m2, q2 - m2 * m2]]
        )
        if np.linalg.eigvalsh(cov).min() <= DOMAIN_SLACK:
            raise DomainError("pair expectation implies non-PD covariance")
        return mean, cov

    def log_partition(self, theta):
        prec, h = self._precision(theta)
        cov = np.linalg.inv(prec)
        return (
            0.5 * h @ cov @ h
            + np.log(2.0 * np.pi)
            - 0.5 * np.log(np.linalg.det(prec))
        )

    def to_expectation(self, theta):
        mean, cov = self._moments(theta)
        return np.array(
            [
                cov[0, 1] + mean[0] * mean[1],
                mean[0],
                cov[0, 0] + mean[0] ** 2,
                mean[1],
                cov[1, 1] + mean[1] ** 2,
            ]
        )

    def to_natural(self, eta):
        mean, cov = self._moments_from_eta(eta)
        prec = np.linalg.inv(cov)
        h = prec @ mean
        return np.array(
            [-prec[0, 1], h[0], -0.5 * prec[0, 0], h[1], -0.5 * prec[1, 1]]
        )

    def legendre(self, eta):
        _, cov = self._moments_from_eta(eta)
        return -np.log(2.0 * np.pi * np.e) - 0.5 * np.log(np.linalg.det(cov))

    def covariance(self, eta):
        mean, cov = self._moments_from_eta(eta)
        terms = [(0, 1), (0,), (0, 0), (1,), (1, 1)]
        return _gauss_quad_cov(mean, cov, terms)

    def covariance_from_natural(self, theta):
        mean, cov = self._moments(theta)
        terms = [(0, 1), (0,), (0, 0), (1,), (1, 1)]
        return _gauss_quad_cov(mean, cov, terms)

    def natural_ok(self, theta):
        try:
            self._precision(theta)
        except DomainError:
            return False
        return True

    def expectation_ok(self, eta):
        try:
            self._moments_from_eta(eta)
        except DomainError:
            return False
        return True


class FixedMeanGaussianPairFamily(FactorFamilyBase):
    """Fixed-mean Gaussian edge family: ((y_i y_j, y_i^2, y_j^2)), y = x - mu."""

    kind = "gaussian_fixed_mean"
    pure_dim = 1

    def __init__(self, members, vertex_families):
        if len(members) != 2:
            raise ValueError("gaussian factors are pairwise")
        self.members = tuple(members)
        self.vertex_families = tuple(vertex_families)
        self.dim = 3
        self.stat_names = (
            "cross",
            "%s:sq" % (members[0],),
            "%s:sq" % (members[1],),
        )

    def _precision(self, theta):
        td, a, b = [float(x) for x in theta]
        prec = np.array([[-2.0 * a, -td], [-td, -2.0 * b]])
        if np.linalg.eigvalsh(prec).min() <= DOMAIN_SLACK:
            raise DomainError("pair density is not normalizable")
        return prec

    def _cov_from_eta(self, eta):
        cross, vii, vjj = [float(x) for x in eta]
        cov = np.array([[vii, cross], [cross, vjj]])
        if np.linalg.eigvalsh(cov).min() <= DOMAIN_SLACK:
            raise DomainError("pair expectation implies non-PD covariance")
        return cov

    def log_partition(self, theta):
        prec = self._precision(theta)
        return np.log(2.0 * np.pi) - 0.5 * np.log(np.linalg.det(prec))

    def to_expectation(self, theta):
        cov = np.linalg.inv(self._precision(theta))
        return np.array([cov[0, 1], cov[0, 0], cov[1, 1]])

    def to_natural(self, eta):
        cov = self._cov_from_eta(eta)
        prec = np.linalg.inv(cov)
        return np.array([-prec[0, 1], -0.5 * prec[0, 0], -0.5 * prec[1, 1]])

    def legendre(self, eta):
        cov = self._cov_from_eta(eta)
        return -np.log(2.0 * np.pi * np.e) - 0.5 * np.log(np.linalg.det(cov))

    def covariance(self, eta):
        cov = self._cov_from_eta(eta)
        terms = [(0, 1), (0, 0), (1, 1)]
        return _gauss_quad_cov(np.zeros(2), cov, terms)

    def covariance_from_natural(self, theta):
        cov = np.linalg.inv(self._precision(theta))
        terms = [(0, 1), (0, 0), (1, 1)]
        return _gauss_quad_cov(np.zeros(2), cov, terms)

    def natural_ok(self, theta):
        try:
            self._precision(theta)
        except DomainError:
            return False
        return True

    def expectation_ok(self, eta):
        try:
            self._cov_from_eta(eta)
        except DomainError:
            return False
        return True

    def solve_vertex_naturals(self, pure_theta, vertex_etas, init=None,
                              tol=1e-10, max_steps=100):
        # Closed form: with variances fixed and the cross natural weight
        # pinned to c, the cross moment solves c*x^2 + x - c*vii*vjj = 0.
        c = float(np.asarray(pure_theta).reshape(-1)[0])
        vii = float(np.asarray(vertex_etas[0]).reshape(-1)[0])
        vjj = float(np.asarray(vertex_etas[1]).reshape(-1)[0])
        if abs(c) < 1e-14:
            cross = 0.0
        else:
            cross = (-1.0 + np.sqrt(1.0 + 4.0 * c * c * vii * vjj)) / (2.0 * c)
        return self.to_natural(np.array([cross, vii, vjj]))


# ---------------------------------------------------------------------------
# the per-model family assembly


class InferenceFamily:
    """Vertex and factor families attached to one factor graph."""

    def __init__(self, graph, vertex_families, factor_families):
        self.graph = graph
        self.vertex_families = tuple(vertex_families)
        self.factor_families = tuple(factor_families)
        if len(self.vertex_families) != graph.n_vertices:
            raise ValueError("one vertex family per vertex required")
        if len(self.factor_families) != graph.n_factors:
            raise ValueError("one factor family per factor required")

    def r(self, vi):
        return self.vertex_families[vi].dim

    @property
    def is_discrete(self):
        return all(vf.kind == "discrete" for vf in self.vertex_families)

    @property
    def is_gaussian(self):
        return all(
            vf.kind in ("gaussian", "gaussian_fixed_mean")
            for vf in self.vertex_families
        )


def discrete_family(graph, vertex_families):
    """Canonical discrete inference family over given vertex families."""
    facs = [
        DiscreteFactorFamily(
            graph.factors[fi],
            [vertex_families[vi] for vi in graph.factor_members[fi]],
        )
        for fi in range(graph.n_factors)
    ]
    return InferenceFamily(graph, vertex_families, facs)


def binary_family(graph):
    return discrete_family(graph, [binary_vertex() for _ in graph.vertices])


def multinomial_family(graph, n_states):
    """Multinomial family; ``n_states`` is an int or per-vertex list."""
    if np.isscalar(n_states):
        sizes = [int(n_states)] * graph.n_vertices
    else:
        sizes = [int(s) for s in n_states]
    return discrete_family(graph, [multinomial_vertex(s) for s in sizes])


def gaussian_family(graph):
    if not graph.is_pairwise():
        raise ValueError("gaussian families need a pairwise graph")
    verts = [GaussianVertexFamily() for _ in graph.vertices]
    facs = [
        GaussianPairFamily(
            graph.factors[fi],
            [verts[vi] for vi in graph.factor_members[fi]],
        )
        for fi in range(graph.n_factors)
    ]
    return InferenceFamily(graph, verts, facs)


def fixed_mean_gaussian_family(graph, means=0.0):
    if not graph.is_pairwise():
        raise ValueError("gaussian families need a pairwise graph")
    if np.isscalar(means):
        means = [float(means)] * graph.n_vertices
    verts = [FixedMeanGaussianVertexFamily(m) for m in means]
    facs = [
        FixedMeanGaussianPairFamily(
            graph.factors[fi],
            [verts[vi] for vi in graph.factor_members[fi]],
        )
        for fi in range(graph.n_factors)
    ]
    return InferenceFamily(graph, verts, facs)


# ---------------------------------------------------------------------------
# moment helpers shared by the zeta weights and the LBP linearization


def marginalize_factor(factor_family, theta, pos):
    """Expectation of the member statistic at ``pos`` under the factor density."""
    eta = factor_family.to_expectation(theta)
    return eta[factor_family.vertex_slice(pos)]


def _inv_sqrt_psd(mat):
    vals, vecs = np.linalg.eigh(np.atleast_2d(mat))
    vals = np.maximum(vals, 1e-14)
    return (vecs / np.sqrt(vals)) @ vecs.T


def correlation_block(factor_family, eta, pos_i, pos_j):
    """Correlation matrix Var[phi_j]^(-1/2) Cov[phi_j, phi_i] Var[phi_i]^(-1/2).

    Operator norm is below one whenever the factor covariance is
    nonsingular; the blocks transpose into each other when i and j swap.
    """
    if pos_i == pos_j:
        raise ValueError("correlation block needs two distinct members")
    cov = factor_family.covariance(eta)
    sj = factor_family.vertex_slice(pos_j)
    si = factor_family.vertex_slice(pos_i)
    _check_condition(cov[sj, sj], "vertex variance")
    _check_condition(cov[si, si], "vertex variance")
    return _inv_sqrt_psd(cov[sj, sj]) @ cov[sj, si] @ _inv_sqrt_psd(cov[si, si])
