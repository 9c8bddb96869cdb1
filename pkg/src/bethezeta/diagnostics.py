"""Uniqueness certificates and stability analysis of BP fixed points.

Two scalar weights per (factor, member pair) drive the certificates:

* the correlation bound W: the supremum of the correlation norm between
  the pair's statistics over all positive reweightings of the factor's
  compatibility function by per-vertex functions, and
* the potential strength N: the maximal cross-ratio contraction factor
  tanh(1/4 |log ratio|) of the compatibility table.

A spectral radius below one of the scalar-weighted directed edge matrix
certifies a unique fixed point (W) or convergence of the parallel
update from any start (N).  Stability of a given fixed point is read off
the spectrum of the update Jacobian.
"""

from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .bethe import restricted_hessian
from .lbp import beliefs, fixed_point_residual, linearization
from .zeta import EdgeWeights, directed_edge_matrix, spectral_radius, spectrum

UNIT_BAND = 1e-9
W_SAFETY = 1e-3


class WeightComputationError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# potential strength (exact finite max over the factor table)


def potential_strength_weight(factor_family, thetabar, pos_i, pos_j):
    """Max cross-ratio strength of the compatibility table for one pair.

    max over x_i != x_i', x_j != x_j' and rest assignments (chosen
    independently for each of the four table lookups) of
    tanh( 1/4 log [Psi(x_i,x_j,.) Psi(x_i',x_j',.)]
                 / [Psi(x_i',x_j,.) Psi(x_i,x_j',.)] ).

    The maximum is exact and finite: per (x_i, x_j) slot only the max and
    min of log Psi over the remaining variables matter.
    """
    if factor_family.kind != "discrete":
        raise WeightComputationError(
            "potential strength needs a discrete factor"
        )
    ff = factor_family
    log_psi = (ff.stat_matrix.T @ np.asarray(thetabar, float)).reshape(
        ff.state_shape
    )
    d = len(ff.state_shape)
    rest = tuple(p for p in range(d) if p not in (pos_i, pos_j))
    moved = np.moveaxis(log_psi, (pos_i, pos_j), (0, 1))
    flat = moved.reshape(moved.shape[0], moved.shape[1], -1) if rest else (
        moved.reshape(moved.shape[0], moved.shape[1], 1)
    )
    hi = flat.max(axis=2)
    lo = flat.min(axis=2)
    best = 0.0
    ni, nj = ff.state_shape[pos_i], ff.state_shape[pos_j]
    for xi in range(ni):
        for xi2 in range(ni):
            if xi == xi2:
                continue
            for xj in range(nj):
                for xj2 in range(nj):
                    if xj == xj2:
                        continue
                    val = 0.25 * (
                        hi[xi, xj]
                        + hi[xi2, xj2]
                        - lo[xi2, xj]
                        - lo[xi, xj2]
                    )
                    best = max(best, val)
    return float(np.tanh(best))


# ---------------------------------------------------------------------------
# correlation bound (numerical sup over vertex reweightings)


def _correlation_objective(factor_family, thetabar, pos_i, pos_j):
    ff = factor_family
    log_psi = ff.stat_matrix.T @ np.asarray(thetabar, float)
    grid = ff.state_grid
    d = grid.shape[1]
    # one free log-weight per (member, non-reference state)
    coord_maps = []
    for p in range(d):
        n = ff.state_shape[p]
        rows = np.zeros((n - 1, grid.shape[0]))
        for k in range(1, n):
            rows[k - 1] = grid[:, p] == k
        coord_maps.append(rows)
    design_t = (
        np.vstack(coord_maps).T if coord_maps else np.zeros((grid.shape[0], 0))
    )
    design_t = np.ascontiguousarray(design_t)
    si = ff.vertex_slice(pos_i)
    sj = ff.vertex_slice(pos_j)
    a_i = ff.stat_matrix[si]
    a_j = ff.stat_matrix[sj]

    if a_i.shape[0] == 1 and a_j.shape[0] == 1:
        ai = np.ascontiguousarray(a_i[0])
        aj = np.ascontiguousarray(a_j[0])
        aii = ai * ai
        ajj = aj * aj
        aij = ai * aj

        def corr_norm(gvec):
            logits = log_psi + design_t @ gvec
            logits -= logits.max()
            p = np.exp(logits)
            p /= p.sum()
            m_i = ai @ p
            m_j = aj @ p
            var_i = aii @ p - m_i * m_i
            var_j = ajj @ p - m_j * m_j
            cov = aij @ p - m_i * m_j
            return abs(cov) / np.sqrt(max(var_i * var_j, 1e-28))

        return corr_norm, design_t.shape[1]

    def corr_norm(gvec):
        logits = log_psi + design_t @ gvec
        logits = logits - logits.max()
        p = np.exp(logits)
        p /= p.sum()
        m_i = a_i @ p
        m_j = a_j @ p
        cov_ij = (a_i * p) @ a_j.T - np.outer(m_i, m_j)
        var_i = (a_i * p) @ a_i.T - np.outer(m_i, m_i)
        var_j = (a_j * p) @ a_j.T - np.outer(m_j, m_j)
        vi_vals, vi_vecs = np.linalg.eigh(var_i)
        vj_vals, vj_vecs = np.linalg.eigh(var_j)
        vi_is = (vi_vecs / np.sqrt(np.maximum(vi_vals, 1e-14))) @ vi_vecs.T
        vj_is = (vj_vecs / np.sqrt(np.maximum(vj_vals, 1e-14))) @ vj_vecs.T
        return np.linalg.norm(vi_is @ cov_ij @ vj_is, 2)

    return corr_norm, design_t.shape[1]


def correlation_bound_weight(factor_family, thetabar, pos_i, pos_j,
                             rng=None, n_starts=20, budget=2000, tol=1e-6):
    """Numerical sup of the pair correlation norm over vertex reweightings.

    Multi-start Nelder-Mead on the free log-weight coordinates (one state
    per vertex pinned to zero).  The reported value can only undershoot
    the true supremum, so certificates built from it apply a safety
    factor.  Returns (value, converged_flag).
    """
    if factor_family.kind != "discrete":
        raise WeightComputationError("correlation bound needs a discrete factor")
    rng = np.random.default_rng(0) if rng is None else rng
    corr_norm, n_free = _correlation_objective(
        factor_family, thetabar, pos_i, pos_j
    )
    if n_free == 0:
        return corr_norm(np.zeros(0)), True
    best = 0.0
    any_ok = False
    for _ in range(n_starts):
        x0 = rng.uniform(-2.0, 2.0, size=n_free)
        res = optimize.minimize(
            lambda g: -corr_norm(g),
            x0,
            method="Nelder-Mead",
            options={
                "maxfev": budget,
                "xatol": tol,
                "fatol": tol,
            },
        )
        best = max(best, -res.fun)
        any_ok = any_ok or bool(res.success)
    if not any_ok:
        return best, False
    return best, True


# ---------------------------------------------------------------------------
# model-level weight tables and certificates


def model_pair_weights(model, kind, rng=None):
    """Scalar weight per (factor, unordered member pair).

    ``kind`` is "W" (correlation bound) or "N" (potential strength).
    Returns (weights dict, all_ok flag).
    """
    weights = {}
    all_ok = True
    rng = np.random.default_rng(0) if rng is None else rng
    for fi, ff in enumerate(model.family.factor_families):
        mem = model.graph.factor_members[fi]
        for a in range(len(mem)):
            for b in range(a + 1, len(mem)):
                key = (fi, frozenset((mem[a], mem[b])))
                if kind == "N":
                    weights[key] = potential_strength_weight(
                        ff, model.thetabar[fi], a, b
                    )
                elif kind == "W":
                    val, ok = correlation_bound_weight(
                        ff, model.thetabar[fi], a, b, rng=rng
                    )
                    weights[key] = val
                    all_ok = all_ok and ok
                else:
                    raise ValueError("kind must be 'W' or 'N'")
    return weights, all_ok


def uniqueness_certificate(model, kind, rng=None, pair_weights=None):
    """Spectral-radius certificate from scalar pair weights.

    kind "W": strict convexity of the restricted free energy, hence a
    unique fixed point; because the numerically maximized weight is only
    a lower bound of the true supremum, the test multiplies it by a
    safety factor before comparing to one.  kind "N": contraction of the
    parallel update, hence convergence and uniqueness.
    """
    ok = True
    if pair_weights is None:
        pair_weights, ok = model_pair_weights(model, kind, rng=rng)
    ew = EdgeWeights.from_pair_scalars(model.graph, pair_weights)
    rho = spectral_radius(directed_edge_matrix(ew))
    if kind == "W":
        certified = bool((1.0 + W_SAFETY) * rho < 1.0) and ok
    else:
        certified = bool(rho < 1.0) and ok
    return {
        "rho": rho,
        "certified": certified,
        "weights": pair_weights,
        "weights_ok": ok,
    }


# ---------------------------------------------------------------------------
# local stability of fixed points


@dataclass
class StabilityReport:
    spectrum: np.ndarray
    spectral_radius: float
    locally_stable: bool
    stable_with_damping: bool
    local_min_certified: bool
    marginal: bool
    fp_residual: float


def stability_classify(model, msgs):
    """Flags from the spectrum of the update Jacobian at a fixed point.

    locally_stable: all |lambda| < 1 (plain update attracts).
    stable_with_damping: all Re lambda < 1 (some damping attracts).
    local_min_certified: no eigenvalue on [1, inf), which certifies the
    point as a local minimum of the Bethe free energy.  ``marginal`` is
    set when an eigenvalue sits within 1e-9 of the unit circle, where the
    first two flags are not decisive.
    """
    res = fixed_point_residual(model, msgs)
    jac = linearization(model, msgs)
    eigs = spectrum(jac)
    mods = np.abs(eigs)
    marginal = bool(np.any(np.abs(mods - 1.0) < UNIT_BAND))
    on_real_ray = (np.abs(eigs.imag) < UNIT_BAND) & (
        eigs.real >= 1.0 - UNIT_BAND
    )
    return StabilityReport(
        spectrum=eigs,
        spectral_radius=float(mods.max()) if mods.size else 0.0,
        locally_stable=bool(np.all(mods < 1.0)),
        stable_with_damping=bool(np.all(eigs.real < 1.0)),
        local_min_certified=not bool(on_real_ray.any()),
        marginal=marginal,
        fp_residual=res,
    )


# ---------------------------------------------------------------------------
# belief trajectory continuation


@dataclass
class TrajectoryRow:
    t: float
    converged: bool
    rho: float
    min_eig_restricted: float
    locally_stable: bool


@dataclass
class TrajectoryResult:
    rows: list
    rho_onset_index: int  # first row with rho >= 1, -1 if none
    eig_onset_index: int  # first row with negative restricted Hessian eig
    truncated: bool


def trajectory(model_of_t, t_grid, damping=0.25, tol=1e-10, max_iters=500):
    """Continuation of a fixed point along a model path.

    At each t the damped parallel update starts from the previous fixed
    point.  Rows record the undamped Jacobian spectral radius and the
    smallest eigenvalue of the restricted Hessian at the beliefs; onset
    indices mark the first instability and the first Hessian sign change.
    If the update stops converging even with damping 0.5 the trajectory
    is truncated at that t.
    """
    from .lbp import MessageSet, run

    rows = []
    msgs = None
    truncated = False
    for t in t_grid:
        model = model_of_t(float(t))
        if msgs is None:
            start = MessageSet(model)
        else:
            start = MessageSet(model, msgs.values)
        result = run(
            model, start, schedule="parallel", damping=damping,
            tol=tol, max_iters=max_iters,
        )
        if not result.converged:
            result = run(
                model, start, schedule="parallel", damping=0.5,
                tol=tol, max_iters=max_iters,
            )
        if not result.converged:
            truncated = True
            break
        msgs = result.messages
        jac = linearization(model, msgs)
        rho = spectral_radius(jac)
        rep = restricted_hessian(model, beliefs(model, msgs))
        rows.append(
            TrajectoryRow(
                t=float(t),
                converged=True,
                rho=rho,
                min_eig_restricted=rep.min_eigenvalue,
                locally_stable=bool(rho < 1.0),
            )
        )
    rho_onset = next(
        (k for k, r in enumerate(rows) if r.rho >= 1.0), -1
    )
    eig_onset = next(
        (k for k, r in enumerate(rows) if r.min_eig_restricted < 0.0), -1
    )
    return TrajectoryResult(
        rows=rows,
        rho_onset_index=rho_onset,
        eig_onset_index=eig_onset,
        truncated=truncated,
    )
