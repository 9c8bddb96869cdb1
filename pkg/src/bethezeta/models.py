"""Graphical models: compatibility-function parameters on an inference family."""

import numpy as np

from . import hypergraph as hg
from .families import (
    binary_family,
    fixed_mean_gaussian_family,
    gaussian_family,
)


class ModelValidationError(ValueError):
    pass


class EdgeLayout:
    """Stacked-vector layout for per-directed-edge blocks of size r_t(e)."""

    def __init__(self, graph, r_per_vertex):
        self.graph = graph
        self.r_edge = tuple(r_per_vertex[vi] for _, vi in graph.directed_edges)
        offs = np.zeros(len(self.r_edge) + 1, dtype=int)
        np.cumsum(self.r_edge, out=offs[1:])
        self.offsets = offs
        self.total = int(offs[-1])

    def sl(self, e):
        return slice(self.offsets[e], self.offsets[e + 1])


class VertexLayout:
    """Stacked-vector layout for per-vertex blocks of size r_i."""

    def __init__(self, r_per_vertex):
        self.r = tuple(r_per_vertex)
        offs = np.zeros(len(self.r) + 1, dtype=int)
        np.cumsum(self.r, out=offs[1:])
        self.offsets = offs
        self.total = int(offs[-1])

    def sl(self, vi):
        return slice(self.offsets[vi], self.offsets[vi + 1])


class ModelSpec:
    """A factor graph, an inference family, and natural parameters per factor.

    ``thetabar[fi]`` is the natural parameter of the compatibility
    function of factor ``fi`` in the factor family's coordinate order
    (pure part first, then member vertex parts).  For Gaussian kinds the
    implied joint density must be normalizable, which is checked here.
    """

    def __init__(self, graph, family, thetabar, factor_labels=None):
        self.graph = graph
        self.family = family
        if family.graph is not graph:
            raise ModelValidationError("family built for a different graph")
        tb = []
        for fi, ff in enumerate(family.factor_families):
            th = np.asarray(thetabar[fi], dtype=float).reshape(-1)
            if th.shape[0] != ff.dim:
                raise ModelValidationError(
                    "factor %d: expected %d natural parameters, got %d"
                    % (fi, ff.dim, th.shape[0])
                )
            tb.append(th)
        self.thetabar = tuple(tb)
        if factor_labels is None:
            factor_labels = tuple("f%d" % i for i in range(graph.n_factors))
        self.factor_labels = tuple(factor_labels)
        self.edge_layout = EdgeLayout(
            graph, [family.r(vi) for vi in range(graph.n_vertices)]
        )
        self.vertex_layout = VertexLayout(
            [family.r(vi) for vi in range(graph.n_vertices)]
        )
        if family.is_gaussian:
            prec = self.gaussian_joint()[1]
            if np.linalg.eigvalsh(prec).min() <= 0:
                raise ModelValidationError(
                    "gaussian model has a non-normalizable joint density"
                )

    @property
    def is_discrete(self):
        return self.family.is_discrete

    @property
    def is_gaussian(self):
        return self.family.is_gaussian

    def pure_theta(self, fi):
        return self.thetabar[fi][self.family.factor_families[fi].pure_slice]

    def vertex_part(self, fi, pos):
        ff = self.family.factor_families[fi]
        return self.thetabar[fi][ff.vertex_slice(pos)]

    # -- global density assembly -----------------------------------------
    def log_joint_table(self):
        """Unnormalized log density over the full discrete state grid."""
        if not self.is_discrete:
            raise ModelValidationError("joint table needs a discrete model")
        shape = tuple(
            vf.n_states for vf in self.family.vertex_families
        )
        if np.prod(shape) > 10**6:
            raise ModelValidationError("state space too large to enumerate")
        logp = np.zeros(shape)
        for fi, ff in enumerate(self.family.factor_families):
            vals = (ff.stat_matrix.T @ self.thetabar[fi]).reshape(
                ff.state_shape
            )
            axes = list(self.graph.factor_members[fi])
            full = vals.reshape(
                ff.state_shape + (1,) * (self.graph.n_vertices - len(axes))
            )
            dest = axes + [v for v in range(self.graph.n_vertices) if v not in axes]
            full = np.moveaxis(full, range(self.graph.n_vertices), dest)
            logp = logp + full
        return logp

    def gaussian_joint(self):
        """(h, P) of the joint density exp(-x'Px/2 + h'x) in y-coordinates.

        For fixed-mean kinds y = x - mu and h = 0; for free-mean kinds
        y = x.
        """
        if not self.is_gaussian:
            raise ModelValidationError("gaussian joint needs a gaussian model")
        n = self.graph.n_vertices
        prec = np.zeros((n, n))
        h = np.zeros(n)
        for fi, ff in enumerate(self.family.factor_families):
            i, j = self.graph.factor_members[fi]
            th = self.thetabar[fi]
            if ff.kind == "gaussian_fixed_mean":
                td, a, b = th
                prec[i, i] += -2.0 * a
                prec[j, j] += -2.0 * b
                prec[i, j] += -td
                prec[j, i] += -td
            else:
                td, a1, a2, b1, b2 = th
                prec[i, i] += -2.0 * a2
                prec[j, j] += -2.0 * b2
                prec[i, j] += -td
                prec[j, i] += -td
                h[i] += a1
                h[j] += b1
        return h, prec

    def minus_log_z(self):
        """Exact -log Z of the joint density."""
        if self.is_discrete:
            logp = self.log_joint_table().reshape(-1)
            m = logp.max()
            return -(m + np.log(np.exp(logp - m).sum()))
        h, prec = self.gaussian_joint()
        n = prec.shape[0]
        cov = np.linalg.inv(prec)
        logz = (
            0.5 * h @ cov @ h
            + 0.5 * n * np.log(2.0 * np.pi)
            - 0.5 * np.linalg.slogdet(prec)[1]
        )
        return -logz


# ---------------------------------------------------------------------------
# builders for the models used by the experiments


def _pairwise_binary_theta(ff, j_val, h_i=0.0, h_j=0.0):
    th = np.zeros(ff.dim)
    th[0] = j_val
    th[1] = h_i
    th[2] = h_j
    return th


def binary_pairwise_model(graph, couplings, fields=None):
    """Binary spin model on a pairwise graph.

    ``couplings`` maps factor index -> J (or a scalar for all); optional
    ``fields`` maps vertex index -> h, realized as degree-1 factors so the
    hypergraph matches the convention of splitting interactions and local
    evidence.
    """
    if not graph.is_pairwise():
        raise ModelValidationError("binary pairwise model needs degree-2 factors")
    if fields:
        verts = list(graph.vertices)
        facs = [tuple(f) for f in graph.factors]
        for vi, hval in sorted(fields.items()):
            if hval:
                facs.append((graph.vertices[vi],))
        graph = hg.FactorGraph(verts, facs)
    fam = binary_family(graph)
    thetas = []
    for fi, ff in enumerate(fam.factor_families):
        if graph.factor_degree[fi] == 2:
            j = couplings if np.isscalar(couplings) else couplings[fi]
            thetas.append(_pairwise_binary_theta(ff, j))
        else:
            vi = graph.factor_members[fi][0]
            thetas.append(np.array([fields[vi]]))
    return ModelSpec(graph, fam, thetas)


def cycle_ising_model(n, j_val, h=0.0):
    g = hg.cycle_graph(n)
    fields = {vi: h for vi in range(n)} if h else None
    return binary_pairwise_model(g, j_val, fields)


def torus_ising_model(rows, cols, j_val, h=0.0):
    g = hg.torus_graph(rows, cols)
    fields = {vi: h for vi in range(g.n_vertices)} if h else None
    return binary_pairwise_model(g, j_val, fields)


def complete_ising_model(n, j_val, h=0.0):
    g = hg.complete_graph(n)
    fields = {vi: h for vi in range(n)} if h else None
    return binary_pairwise_model(g, j_val, fields)


def grid_edge_torus_model(rows, cols, k_val, j_val):
    """Binary variables on torus grid edges, one degree-4 factor per site.

    Each site factor is exp(K * sum of triple products + J * sum of pair
    products) over its four incident edge variables.
    """
    g = hg.grid_edge_torus_graph(rows, cols)
    fam = binary_family(g)
    thetas = []
    for ff in fam.factor_families:
        th = np.zeros(ff.dim)
        for t, term in enumerate(ff.pure_terms):
            if len(term) == 2:
                th[t] = j_val
            elif len(term) == 3:
                th[t] = k_val
        thetas.append(th)
    return ModelSpec(g, fam, thetas)


def fixed_mean_gaussian_model(graph, cross, diag, means=0.0):
    """Fixed-mean Gaussian model on a pairwise graph.

    ``cross`` is the natural weight on y_i y_j per factor (scalar or map),
    ``diag`` the weight on each member's y^2 within the factor (negative).
    """
    fam = fixed_mean_gaussian_family(graph, means)
    thetas = []
    for fi in range(graph.n_factors):
        c = cross if np.isscalar(cross) else cross[fi]
        d = diag if np.isscalar(diag) else diag[fi]
        thetas.append(np.array([c, d, d]))
    return ModelSpec(graph, fam, thetas)


def gaussian_model(graph, cross, diag, linear=0.0):
    """Free-mean Gaussian model on a pairwise graph."""
    fam = gaussian_family(graph)
    thetas = []
    for fi in range(graph.n_factors):
        c = cross if np.isscalar(cross) else cross[fi]
        d = diag if np.isscalar(diag) else diag[fi]
        lin = linear if np.isscalar(linear) else linear[fi]
        thetas.append(np.array([c, lin, d, lin, d]))
    return ModelSpec(graph, fam, thetas)


def scaled_model(model, t):
    """Same family with every compatibility parameter multiplied by t."""
    return ModelSpec(
        model.graph,
        model.family,
        [t * th for th in model.thetabar],
        model.factor_labels,
    )
