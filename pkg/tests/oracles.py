"""Independent reference computations used to pin expected test values.

Everything here recomputes quantities from first principles (explicit
state enumeration, textbook formulas, finite differences, quadrature)
without going through the code paths under test.
"""

from itertools import combinations, product

import numpy as np


# ---------------------------------------------------------------------------
# graph-side oracles


def feed_adjacency(g):
    """0/1 matrix a[e, e2] = 1 iff e2 feeds e, straight from the definition."""
    n = g.n_edges
    a = np.zeros((n, n))
    for e, (fi, vi) in enumerate(g.directed_edges):
        for e2, (fj, vj) in enumerate(g.directed_edges):
            if fj != fi and vj != vi and vj in g.factor_members[fi]:
                a[e, e2] = 1.0
    return a


def closed_geodesic_counts(g, kmax):
    """Number of closed geodesics of each length via powers of the adjacency."""
    a = feed_adjacency(g)
    counts = []
    p = np.eye(g.n_edges)
    for _ in range(kmax):
        p = p @ a
        counts.append(int(round(np.trace(p))))
    return counts


def spanning_trees_bruteforce(n_nodes, edges):
    """Count spanning trees by enumerating edge subsets (small graphs only)."""

    def connected_tree(subset):
        parent = list(range(n_nodes))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for a, b in subset:
            ra, rb = find(a), find(b)
            if ra == rb:
                return False
            parent[ra] = rb
        return True

    count = 0
    for subset in combinations(edges, n_nodes - 1):
        if connected_tree(subset):
            count += 1
    return count


# ---------------------------------------------------------------------------
# discrete-model oracles (explicit state enumeration)


def state_tuples(model):
    sizes = [vf.n_states for vf in model.family.vertex_families]
    return list(product(*[range(s) for s in sizes]))


def log_unnormalized(model, state):
    """Sum of factor log-values at one global state, term by term."""
    total = 0.0
    for fi, ff in enumerate(model.family.factor_families):
        local = tuple(state[vi] for vi in model.graph.factor_members[fi])
        col = np.ravel_multi_index(local, ff.state_shape)
        total += float(ff.stat_matrix[:, col] @ model.thetabar[fi])
    return total


def joint_table(model):
    states = state_tuples(model)
    logs = np.array([log_unnormalized(model, s) for s in states])
    p = np.exp(logs - logs.max())
    p /= p.sum()
    shape = tuple(vf.n_states for vf in model.family.vertex_families)
    return p.reshape(shape)


def minus_log_z(model):
    states = state_tuples(model)
    logs = np.array([log_unnormalized(model, s) for s in states])
    m = logs.max()
    return -(m + np.log(np.exp(logs - m).sum()))


def vertex_marginal(model, table, vi):
    axes = tuple(a for a in range(model.graph.n_vertices) if a != vi)
    return table.sum(axis=axes)


def vertex_expectation(model, table, vi):
    marg = vertex_marginal(model, table, vi)
    return model.family.vertex_families[vi].stat_matrix @ marg


# ---------------------------------------------------------------------------
# Gaussian-model oracles


def gaussian_precision(model):
    """Joint precision/linear term read directly off the factor parameters."""
    n = model.graph.n_vertices
    prec = np.zeros((n, n))
    h = np.zeros(n)
    for fi, ff in enumerate(model.family.factor_families):
        i, j = model.graph.factor_members[fi]
        th = model.thetabar[fi]
        if ff.kind == "gaussian_fixed_mean":
            c, a, b = th
            lin = (0.0, 0.0)
        else:
            c, a1, a, b1, b = th
            lin = (a1, b1)
        prec[i, i] += -2.0 * a
        prec[j, j] += -2.0 * b
        prec[i, j] += -c
        prec[j, i] += -c
        h[i] += lin[0]
        h[j] += lin[1]
    return h, prec


def gaussian_vertex_moments(model):
    """Exact per-vertex expectation parameters of the joint density."""
    h, prec = gaussian_precision(model)
    cov = np.linalg.inv(prec)
    mean = cov @ h
    out = []
    for vi, vf in enumerate(model.family.vertex_families):
        if vf.kind == "gaussian_fixed_mean":
            out.append(np.array([cov[vi, vi]]))
        else:
            out.append(
                np.array([mean[vi], cov[vi, vi] + mean[vi] ** 2])
            )
    return out


def gaussian_minus_log_z(model):
    h, prec = gaussian_precision(model)
    n = prec.shape[0]
    cov = np.linalg.inv(prec)
    return -(
        0.5 * h @ cov @ h
        + 0.5 * n * np.log(2.0 * np.pi)
        - 0.5 * np.linalg.slogdet(prec)[1]
    )


# ---------------------------------------------------------------------------
# finite differences


def fd_gradient(f, x, step=1e-5):
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    for k in range(x.size):
        up = x.copy()
        up[k] += step
        dn = x.copy()
        dn[k] -= step
        out[k] = (f(up) - f(dn)) / (2.0 * step)
    return out


def fd_hessian(f, x, step=1e-4):
    x = np.asarray(x, dtype=float)
    n = x.size
    out = np.zeros((n, n))
    for a in range(n):
        for b in range(a, n):
            pp = x.copy(); pp[a] += step; pp[b] += step
            pm = x.copy(); pm[a] += step; pm[b] -= step
            mp = x.copy(); mp[a] -= step; mp[b] += step
            mm = x.copy(); mm[a] -= step; mm[b] -= step
            val = (f(pp) - f(pm) - f(mp) + f(mm)) / (4.0 * step * step)
            out[a, b] = out[b, a] = val
    return out


def fd_jacobian(f, x, step=1e-6):
    x = np.asarray(x, dtype=float)
    cols = []
    for k in range(x.size):
        up = x.copy()
        up[k] += step
        dn = x.copy()
        dn[k] -= step
        cols.append((f(up) - f(dn)) / (2.0 * step))
    return np.array(cols).T


# ---------------------------------------------------------------------------
# random model generators


def random_tree_graph(rng, n_vertices):
    """Uniform random labelled tree via incremental attachment."""
    from bethezeta import hypergraph as hg

    edges = []
    for v in range(1, n_vertices):
        edges.append((int(rng.integers(v)), v))
    return hg.build_factor_graph(list(range(n_vertices)), edges)


def random_discrete_tree_model(rng, n_vertices=None, max_states=3):
    from bethezeta import models as md
    from bethezeta.families import discrete_family, binary_vertex, multinomial_vertex

    if n_vertices is None:
        n_vertices = int(rng.integers(2, 7))
    g = random_tree_graph(rng, n_vertices)
    verts = []
    for _ in range(n_vertices):
        if max_states > 2 and rng.random() < 0.5:
            verts.append(multinomial_vertex(3))
        else:
            verts.append(binary_vertex())
    fam = discrete_family(g, verts)
    thetas = [
        rng.normal(0.0, 0.6, size=ff.dim) for ff in fam.factor_families
    ]
    return md.ModelSpec(g, fam, thetas)


def random_fixed_mean_tree_model(rng, n_vertices=None):
    from bethezeta import models as md

    if n_vertices is None:
        n_vertices = int(rng.integers(2, 7))
    g = random_tree_graph(rng, n_vertices)
    cross = {fi: float(rng.uniform(-0.3, 0.3)) for fi in range(g.n_factors)}
    diag = {fi: float(-rng.uniform(0.4, 0.8)) for fi in range(g.n_factors)}
    return md.fixed_mean_gaussian_model(g, cross, diag)


def random_hypergraph(rng, max_vertices=5, max_factors=4):
    from bethezeta import hypergraph as hg

    n = int(rng.integers(2, max_vertices + 1))
    n_fac = int(rng.integers(1, max_factors + 1))
    factors = []
    for _ in range(n_fac):
        size = int(rng.integers(1, min(n, 4) + 1))
        members = sorted(rng.choice(n, size=size, replace=False).tolist())
        factors.append(tuple(members))
    return hg.build_factor_graph(list(range(n)), factors)
