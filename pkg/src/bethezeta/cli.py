"""Command line front end.

Subcommands: lbp-run, verify, zeta-info, experiment-grid, experiment-wn,
experiment-trajectory.  Experiments emit CSV (17 significant digits,
comma separated, LF endings) and, when writing to a file, a companion
PNG figure next to it unless --no-plot is given.

Exit codes: 0 success, 1 verification failure, 2 input error,
3 numerical failure.
"""

import argparse
import json
import sys

import numpy as np

from . import bethe, diagnostics, experiments, lbp, modelio
from . import hypergraph as hg
from . import zeta as zt
from .families import DomainError, SingularCovarianceError
from .lbp import UpdateRejected

EXIT_OK = 0
EXIT_VERIFY = 1
EXIT_INPUT = 2
EXIT_NUMERIC = 3

VERIFY_TOLERANCES = {
    "bethe-zeta": 1e-8,
    "ihara-bass": 1e-9,
    "linearization": 1e-5,
    "stationarity": 1e-6,
}


def _fmt(x):
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return "%.17g" % float(x)


def write_csv(path, header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    text = "\n".join(lines) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def _emit_json(doc, path):
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def _figure_path(out):
    if out is None:
        return None
    base = out[:-4] if out.endswith(".csv") else out
    return base + ".png"


# ---------------------------------------------------------------------------
# subcommand implementations


def cmd_lbp_run(args):
    model = modelio.load_model(args.model)
    msgs = lbp.init_messages(model, args.init, seed=args.seed)
    result = lbp.run(
        model,
        msgs,
        schedule=args.schedule,
        damping=args.damping,
        tol=args.tol,
        max_iters=args.max_iters,
    )
    doc = {
        "converged": bool(result.converged),
        "iterations": int(result.iterations),
        "final_residual": float(result.final_residual),
    }
    doc["fixed_point_residual"] = float(
        lbp.fixed_point_residual(model, result.messages)
    )
    try:
        point = lbp.beliefs(model, result.messages)
        g = model.graph
        doc["beliefs"] = {
            "vertices": {
                str(g.vertices[vi]): [float(v) for v in point.eta_vertex[vi]]
                for vi in range(g.n_vertices)
            },
            "factors": {
                model.factor_labels[fi]: [
                    float(v) for v in point.eta_pure[fi]
                ]
                for fi in range(g.n_factors)
            },
        }
        doc["stationarity_residual"] = float(
            bethe.stationarity_residual(model, point)
        )
        report = diagnostics.stability_classify(model, result.messages)
        doc["stability"] = {
            "spectral_radius": report.spectral_radius,
            "locally_stable": report.locally_stable,
            "stable_with_damping": report.stable_with_damping,
            "local_min_certified": report.local_min_certified,
            "marginal": report.marginal,
        }
    except DomainError as err:
        doc["beliefs_error"] = str(err)
    _emit_json(doc, args.out)
    return EXIT_OK


def cmd_verify(args):
    model = modelio.load_model(args.model)
    tol = VERIFY_TOLERANCES[args.which]
    rng = np.random.default_rng(args.seed)
    residuals = []
    if args.which == "bethe-zeta":
        for _ in range(args.samples):
            point = bethe.sample_interior_point(model, rng)
            residuals.append(bethe.bethe_zeta_residual(model, point))
    elif args.which == "ihara-bass":
        r = [model.family.r(vi) for vi in range(model.graph.n_vertices)]
        for _ in range(args.samples):
            w = zt.EdgeWeights.random(model.graph, r, rng, scale=0.3)
            fac = zt.ihara_bass_factorization(w)
            scale = max(abs(fac["edge_det"]), abs(fac["product"]), 1e-300)
            residuals.append(abs(fac["edge_det"] - fac["product"]) / scale)
    elif args.which == "linearization":
        for k in range(args.samples):
            result = _converged_from_random_start(model, rng)
            if result is None:
                continue
            jac = lbp.linearization(model, result.messages)
            residuals.append(
                _fd_jacobian_gap(model, result.messages, jac.mat)
            )
    elif args.which == "stationarity":
        for k in range(args.samples):
            result = _converged_from_random_start(model, rng)
            if result is None:
                continue
            point = lbp.beliefs(model, result.messages)
            residuals.append(bethe.stationarity_residual(model, point))
    if not residuals:
        print("no converged samples; nothing verified", file=sys.stderr)
        return EXIT_NUMERIC
    rows = [(k, r) for k, r in enumerate(residuals)]
    rows.append(("max", max(residuals)))
    write_csv(args.out, ("sample", "residual"), rows)
    return EXIT_OK if max(residuals) <= tol else EXIT_VERIFY


def _converged_from_random_start(model, rng):
    """One tightly converged run from a random start; None if it fails."""
    msgs = lbp.init_messages(
        model, "random", seed=int(rng.integers(2**31)), scale=0.3
    )
    try:
        result = lbp.run(model, msgs, tol=1e-11, max_iters=2000)
    except (UpdateRejected, DomainError):
        return None
    return result if result.converged else None


def _fd_jacobian_gap(model, msgs, analytic, step=1e-6):
    base = msgs.values
    n = base.size
    worst = 0.0
    for k in range(n):
        up = base.copy()
        up[k] += step
        dn = base.copy()
        dn[k] -= step
        col = (
            lbp.update_parallel(model, lbp.MessageSet(model, up)).values
            - lbp.update_parallel(model, lbp.MessageSet(model, dn)).values
        ) / (2.0 * step)
        worst = max(worst, float(np.max(np.abs(col - analytic[:, k]))))
    return worst


def cmd_zeta_info(args):
    model = modelio.load_model(args.model)
    g = model.graph
    cycles = hg.prime_cycles(g, args.max_cycle_len)
    by_len = {}
    for c in cycles:
        by_len[len(c)] = by_len.get(len(c), 0) + 1
    w = zt.EdgeWeights.scalar(g, args.u)
    mnb = zt.nonbacktracking_matrix(g)
    eigs = np.linalg.eigvals(mnb) if mnb.size else np.zeros(0)
    doc = {
        "n_vertices": g.n_vertices,
        "n_factors": g.n_factors,
        "n_directed_edges": g.n_edges,
        "nullity": hg.nullity(g),
        "euler_number": hg.euler_number(g),
        "prime_cycles_by_length": {
            str(k): v for k, v in sorted(by_len.items())
        },
        "pf_bounds": list(zt.pf_bounds(g)),
        "spectral_radius": zt.spectral_radius(mnb),
        "poles": sorted(
            (
                {"re": float((1.0 / lam).real), "im": float((1.0 / lam).imag)}
                for lam in eigs
                if abs(lam) > 1e-9
            ),
            key=lambda d: (d["re"] ** 2 + d["im"] ** 2, d["re"], d["im"]),
        ),
        "u": args.u,
    }
    try:
        doc["zeta_determinant"] = float(zt.zeta_determinant(w))
    except zt.ZetaPoleError as err:
        doc["zeta_determinant_error"] = "pole: %s" % err
    try:
        doc["zeta_euler_truncated"] = float(
            zt.zeta_euler_truncated(w, args.max_cycle_len)
        )
    except zt.ZetaPoleError as err:
        doc["zeta_euler_truncated_error"] = "pole: %s" % err
    tail = zt.euler_tail_bound(w, args.max_cycle_len)
    doc["euler_tail_bound"] = float(tail) if np.isfinite(tail) else "inf"
    if hg.connected_components(g) == 1 and not hg.is_tree(g):
        lim = zt.hashimoto_limit(g)
        doc["pole_limit"] = {
            k: float(v) for k, v in lim.items() if not isinstance(v, dict)
        }
    _emit_json(doc, args.out)
    return EXIT_OK


def cmd_experiment_grid(args):
    rows = experiments.grid_experiment(
        kmin=args.kmin,
        kmax=args.kmax,
        jmin=args.jmin,
        jmax=args.jmax,
        steps=args.steps,
        tol=args.tol,
        max_iters=args.max_iters,
        seed=args.seed,
    )
    write_csv(
        args.out,
        ("K", "J", "converged", "rho_W", "rho_N", "certified_W", "certified_N"),
        [
            (r.K, r.J, r.converged, r.rho_w, r.rho_n, r.certified_w,
             r.certified_n)
            for r in rows
        ],
    )
    if args.out and not args.no_plot:
        from .plots import render_grid

        render_grid(rows, _figure_path(args.out))
    return EXIT_OK


def cmd_experiment_wn(args):
    rows = experiments.wn_experiment(
        kmin=args.kmin, kmax=args.kmax, steps=args.steps, seed=args.seed
    )
    write_csv(
        args.out,
        ("K", "W", "N", "w_ok"),
        [(r.K, r.W, r.N, r.w_ok) for r in rows],
    )
    if args.out and not args.no_plot:
        from .plots import render_wn

        render_wn(rows, _figure_path(args.out))
    return EXIT_OK


def cmd_experiment_trajectory(args):
    model = modelio.load_model(args.model)
    rows, result = experiments.trajectory_experiment(
        model, tmax=args.tmax, steps=args.steps, damping=args.damping
    )
    write_csv(
        args.out,
        ("t", "rho_Tprime", "min_eig_restricted_hessian", "stable",
         "rho_onset", "eig_onset"),
        [
            (r.t, r.rho, r.min_eig_restricted, r.stable, r.rho_onset,
             r.eig_onset)
            for r in rows
        ],
    )
    if result.truncated:
        print(
            "trajectory truncated: continuation lost the fixed point",
            file=sys.stderr,
        )
    if args.out and not args.no_plot:
        from .plots import render_trajectory

        render_trajectory(rows, _figure_path(args.out))
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


def build_parser():
    parser = argparse.ArgumentParser(
        prog="bethezeta",
        description="Belief propagation, Bethe free energy and graph zeta "
        "diagnostics on factor hypergraphs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("lbp-run", help="run BP on a model file")
    p.add_argument("model")
    p.add_argument("--schedule", choices=("parallel", "sequential"),
                   default="parallel")
    p.add_argument("--damping", type=float, default=0.0)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--max-iters", type=int, default=1000)
    p.add_argument("--init", choices=("zeros", "random"), default="zeros")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_lbp_run)

    p = sub.add_parser("verify", help="sample-based identity verification")
    p.add_argument("model")
    p.add_argument("--which", required=True,
                   choices=tuple(VERIFY_TOLERANCES))
    p.add_argument("--samples", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("zeta-info", help="zeta function report for a model")
    p.add_argument("model")
    p.add_argument("--u", type=float, default=0.5)
    p.add_argument("--max-cycle-len", type=int, default=12)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_zeta_info)

    p = sub.add_parser("experiment-grid",
                       help="(K, J) certificate/convergence sweep")
    p.add_argument("--kmin", type=float, default=-1.0)
    p.add_argument("--kmax", type=float, default=1.0)
    p.add_argument("--jmin", type=float, default=-1.0)
    p.add_argument("--jmax", type=float, default=1.0)
    p.add_argument("--steps", type=int, default=41)
    p.add_argument("--tol", type=float, default=1e-3)
    p.add_argument("--max-iters", type=int, default=30)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.add_argument("--no-plot", action="store_true")
    p.set_defaults(func=cmd_experiment_grid)

    p = sub.add_parser("experiment-wn", help="W vs N sweep over K")
    p.add_argument("--kmin", type=float, default=-2.0)
    p.add_argument("--kmax", type=float, default=2.0)
    p.add_argument("--steps", type=int, default=41)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.add_argument("--no-plot", action="store_true")
    p.set_defaults(func=cmd_experiment_wn)

    p = sub.add_parser("experiment-trajectory",
                       help="inverse-temperature continuation of a model file")
    p.add_argument("model")
    p.add_argument("--tmax", type=float, default=0.4)
    p.add_argument("--steps", type=int, default=81)
    p.add_argument("--damping", type=float, default=0.25)
    p.add_argument("--out", default=None)
    p.add_argument("--no-plot", action="store_true")
    p.set_defaults(func=cmd_experiment_trajectory)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (modelio.ModelFormatError, FileNotFoundError,
            hg.GraphStructureError) as err:
        print("input error: %s" % err, file=sys.stderr)
        return EXIT_INPUT
    except (zt.ZetaPoleError, SingularCovarianceError, UpdateRejected,
            DomainError, ArithmeticError) as err:
        print("numerical failure: %s" % err, file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
