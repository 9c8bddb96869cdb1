"""Loopy belief propagation as a dynamical system in natural parameters.

Messages are natural-parameter vectors mu_{alpha->i}, one per directed
edge, stacked into a single array.  The update map T rebuilds, per
factor, the density with the compatibility parameters plus all incoming
messages at every member, takes each member's expectation slice, pulls
it back through the vertex family and subtracts the cavity sum.  No
normalization constants ever appear in these coordinates.
"""

from dataclasses import dataclass, field

import numpy as np

from .families import DomainError
from .zeta import EdgeWeights, directed_edge_matrix


class UpdateRejected(RuntimeError):
    """An intermediate factor density left its domain."""

    def __init__(self, fi, vi, message):
        super().__init__(
            "update of edge (factor %s -> vertex %s) rejected: %s"
            % (fi, vi, message)
        )
        self.factor = fi
        self.vertex = vi


class MessageSet:
    """Stacked message vector with the model's edge layout."""

    def __init__(self, model, values=None):
        self.model = model
        self.layout = model.edge_layout
        if values is None:
            values = np.zeros(self.layout.total)
        self.values = np.asarray(values, dtype=float).copy()
        if self.values.shape != (self.layout.total,):
            raise ValueError("message vector has the wrong length")

    def copy(self):
        return MessageSet(self.model, self.values)

    def edge(self, e):
        return self.values[self.layout.sl(e)]

    def set_edge(self, e, vec):
        self.values[self.layout.sl(e)] = vec

    def vertex_theta(self, vi):
        """Belief natural parameter theta_i = sum of incoming messages."""
        g = self.model.graph
        out = np.zeros(self.model.family.r(vi))
        for e in g.edges_at_vertex(vi):
            out += self.edge(e)
        return out

    def beliefs_valid(self):
        """Whether every vertex belief parameter lies in its domain."""
        fam = self.model.family
        return all(
            fam.vertex_families[vi].natural_ok(self.vertex_theta(vi))
            for vi in range(self.model.graph.n_vertices)
        )


def init_messages(model, mode="zeros", seed=None, scale=1.0):
    """Initialize messages.

    ``zeros`` gives constant message functions.  For Gaussian kinds a
    zero start can make the very first factor densities non-normalizable
    (the compatibility function alone must be integrable); in that case
    the messages fall back to carrying a 0.9/d_i share of each vertex's
    joint precision, which keeps every subsequent density proper.
    ``random`` draws i.i.d. uniform coordinates in [-scale, scale].
    """
    if mode == "zeros":
        msgs = MessageSet(model)
        if model.is_gaussian and not _first_update_valid(model):
            msgs = _precision_split_messages(model)
        return msgs
    if mode == "random":
        rng = np.random.default_rng(seed)
        vals = rng.uniform(-scale, scale, size=model.edge_layout.total)
        return MessageSet(model, vals)
    raise ValueError("unknown init mode %r" % mode)


def _first_update_valid(model):
    for fi, ff in enumerate(model.family.factor_families):
        if not ff.natural_ok(model.thetabar[fi]):
            return False
    return True


def _precision_split_messages(model):
    _, prec = model.gaussian_joint()
    msgs = MessageSet(model)
    g = model.graph
    for e, (fi, vi) in enumerate(g.directed_edges):
        share = 0.9 * prec[vi, vi] / g.vertex_degree[vi]
        vf = model.family.vertex_families[vi]
        if vf.kind == "gaussian_fixed_mean":
            msgs.set_edge(e, np.array([-0.5 * share]))
        else:
            msgs.set_edge(e, np.array([0.0, -0.5 * share]))
    return msgs


def _factor_theta(model, msgs, fi, vertex_sums):
    """Factor natural parameter with cavity-augmented vertex parts."""
    ff = model.family.factor_families[fi]
    parts = [model.pure_theta(fi)]
    for pos, vi in enumerate(model.graph.factor_members[fi]):
        e = model.graph.edge_index[(fi, vi)]
        cavity = vertex_sums[vi] - msgs.edge(e)
        parts.append(model.vertex_part(fi, pos) + cavity)
    return np.concatenate(parts)


def _vertex_sums(model, msgs):
    return [
        msgs.vertex_theta(vi) for vi in range(model.graph.n_vertices)
    ]


def update_parallel(model, msgs):
    """One synchronous sweep of the update map T."""
    g = model.graph
    sums = _vertex_sums(model, msgs)
    out = MessageSet(model)
    for fi, ff in enumerate(model.family.factor_families):
        theta = _factor_theta(model, msgs, fi, sums)
        try:
            eta = ff.to_expectation(theta)
        except DomainError as err:
            raise UpdateRejected(
                model.factor_labels[fi], "*", str(err)
            ) from err
        for pos, vi in enumerate(g.factor_members[fi]):
            e = g.edge_index[(fi, vi)]
            vf = model.family.vertex_families[vi]
            try:
                new_theta = vf.to_natural(eta[ff.vertex_slice(pos)])
            except DomainError as err:
                raise UpdateRejected(
                    model.factor_labels[fi], g.vertices[vi], str(err)
                ) from err
            cavity = sums[vi] - msgs.edge(e)
            out.set_edge(e, new_theta - cavity)
    return out


def update_damped(model, msgs, eps):
    """(1 - eps) T + eps I with damping strength 0 <= eps < 1."""
    if not 0.0 <= eps < 1.0:
        raise ValueError("damping must be in [0, 1)")
    new = update_parallel(model, msgs)
    new.values = (1.0 - eps) * new.values + eps * msgs.values
    return new


def update_sequential(model, msgs, order=None):
    """Update one directed edge at a time in ``order`` (default: edge order)."""
    g = model.graph
    out = msgs.copy()
    if order is None:
        order = range(g.n_edges)
    for e in order:
        fi, vi = g.directed_edges[e]
        ff = model.family.factor_families[fi]
        sums = _vertex_sums(model, out)
        theta = _factor_theta(model, out, fi, sums)
        try:
            eta = ff.to_expectation(theta)
            pos = g.factor_members[fi].index(vi)
            vf = model.family.vertex_families[vi]
            new_theta = vf.to_natural(eta[ff.vertex_slice(pos)])
        except DomainError as err:
            raise UpdateRejected(
                model.factor_labels[fi], g.vertices[vi], str(err)
            ) from err
        cavity = sums[vi] - out.edge(e)
        out.set_edge(e, new_theta - cavity)
    return out


@dataclass
class RunResult:
    messages: MessageSet
    converged: bool
    iterations: int
    residuals: list = field(default_factory=list)

    @property
    def final_residual(self):
        return self.residuals[-1] if self.residuals else np.inf


def run(model, msgs, schedule="parallel", damping=0.0, tol=1e-10,
        max_iters=1000, order=None):
    """Iterate until the max-abs message change drops below tol."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    cur = msgs.copy()
    residuals = []
    for it in range(1, max_iters + 1):
        if schedule == "parallel":
            new = (
                update_damped(model, cur, damping)
                if damping
                else update_parallel(model, cur)
            )
        elif schedule == "sequential":
            new = update_sequential(model, cur, order)
            if damping:
                new.values = (
                    (1.0 - damping) * new.values + damping * cur.values
                )
        else:
            raise ValueError("unknown schedule %r" % schedule)
        res = float(np.max(np.abs(new.values - cur.values)))
        residuals.append(res)
        cur = new
        if res < tol:
            return RunResult(cur, True, it, residuals)
    return RunResult(cur, False, max_iters, residuals)


def fixed_point_residual(model, msgs):
    """||T(mu) - mu||_inf under the parallel map."""
    new = update_parallel(model, msgs)
    return float(np.max(np.abs(new.values - msgs.values)))


def beliefs(model, msgs):
    """Vertex and factor beliefs as a pseudomarginal point.

    The pure factor components come from the factor beliefs, the vertex
    components from the vertex beliefs; at a fixed point the factor
    beliefs marginalize onto the vertex ones, making the point locally
    consistent.
    """
    from .bethe import PseudomarginalPoint

    g = model.graph
    sums = _vertex_sums(model, msgs)
    eta_vertex = []
    for vi in range(g.n_vertices):
        vf = model.family.vertex_families[vi]
        if not vf.natural_ok(sums[vi]):
            raise DomainError(
                "belief parameter at vertex %r is out of domain"
                % (g.vertices[vi],)
            )
        eta_vertex.append(vf.to_expectation(sums[vi]))
    eta_pure = []
    for fi, ff in enumerate(model.family.factor_families):
        theta = _factor_theta(model, msgs, fi, sums)
        eta = ff.to_expectation(theta)
        eta_pure.append(eta[ff.pure_slice])
    return PseudomarginalPoint(model, eta_pure, eta_vertex)


def factor_belief_expectations(model, msgs):
    """Full expectation parameter of each factor belief (incl. vertex parts)."""
    sums = _vertex_sums(model, msgs)
    out = []
    for fi, ff in enumerate(model.family.factor_families):
        theta = _factor_theta(model, msgs, fi, sums)
        out.append(ff.to_expectation(theta))
    return out


def linearization(model, msgs):
    """Analytic Jacobian T' of the update map at (approximately) a fixed point.

    T' is the directed edge matrix with weights u^alpha_{j->i} =
    Var_{b_i}[phi_i]^-1 Cov_{b_alpha}[phi_i, phi_j] built from the current
    beliefs.  The formula is exact only at fixed points; the returned
    matrix carries ``fp_residual`` and a warning flag when the caller's
    messages are further than 1e-6 from fixed.
    """
    g = model.graph
    fam = model.family
    sums = _vertex_sums(model, msgs)
    var_inv = []
    for vi in range(g.n_vertices):
        vf = fam.vertex_families[vi]
        var = np.atleast_2d(vf.covariance_from_natural(sums[vi]))
        var_inv.append(np.linalg.inv(var))
    blocks = {}
    for fi, ff in enumerate(fam.factor_families):
        theta = _factor_theta(model, msgs, fi, sums)
        cov = ff.covariance_from_natural(theta)
        mem = g.factor_members[fi]
        for a, va in enumerate(mem):
            for b, vb in enumerate(mem):
                if va == vb:
                    continue
                # weight u^alpha_{vb -> va}: source vb, target va
                blocks[(fi, vb, va)] = var_inv[va] @ ff.covariance_block(
                    cov, a, b
                )
    weights = EdgeWeights(
        g, [fam.r(vi) for vi in range(g.n_vertices)], blocks
    )
    mat = directed_edge_matrix(weights)
    mat.fp_residual = fixed_point_residual(model, msgs)
    mat.at_fixed_point = mat.fp_residual < 1e-6
    return mat
