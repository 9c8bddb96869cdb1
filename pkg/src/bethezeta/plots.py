"""Figure rendering for the experiment commands.

Each experiment writes a delimited table; these helpers render the
companion figure next to it.  Rendering is headless (Agg backend).
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def render_wn(rows, path):
    ks = [r.K for r in rows]
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    ax.plot(ks, [r.W for r in rows], "-", color="tab:blue", label="W")
    ax.plot(ks, [r.N for r in rows], "--", color="tab:red", label="N")
    ax.set_xlabel("K")
    ax.set_ylabel("weight")
    ax.set_title("correlation bound W vs potential strength N")
    ax.legend()
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def render_grid(rows, path):
    ks = np.array(sorted({r.K for r in rows}))
    js = np.array(sorted({r.J for r in rows}))
    conv = np.zeros((js.size, ks.size))
    cert_w = np.zeros_like(conv)
    cert_n = np.zeros_like(conv)
    ki = {k: i for i, k in enumerate(ks)}
    ji = {j: i for i, j in enumerate(js)}
    for r in rows:
        conv[ji[r.J], ki[r.K]] = 1.0 if r.converged else 0.0
        cert_w[ji[r.J], ki[r.K]] = r.rho_w
        cert_n[ji[r.J], ki[r.K]] = r.rho_n
    fig, ax = plt.subplots(figsize=(5.2, 4.4))
    ax.pcolormesh(
        ks, js, 1.0 - conv, cmap="Greys", vmin=0.0, vmax=2.0, shading="nearest"
    )
    if (cert_w.min() < 1.0 < cert_w.max()):
        ax.contour(ks, js, cert_w, levels=[1.0], colors="tab:blue")
    if (cert_n.min() < 1.0 < cert_n.max()):
        ax.contour(
            ks, js, cert_n, levels=[1.0], colors="tab:red", linestyles="--"
        )
    ax.set_xlabel("K")
    ax.set_ylabel("J")
    ax.set_title(
        "shaded: no protocol convergence; solid: W bound, dashed: N bound"
    )
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def render_trajectory(rows, path):
    ts = [r.t for r in rows]
    fig, (ax1, ax2) = plt.subplots(2, 1, sharex=True, figsize=(5.2, 4.6))
    ax1.plot(ts, [r.rho for r in rows], color="tab:blue")
    ax1.axhline(1.0, color="k", lw=0.8, ls=":")
    ax1.set_ylabel("spectral radius of T'")
    ax2.plot(ts, [r.min_eig_restricted for r in rows], color="tab:green")
    ax2.axhline(0.0, color="k", lw=0.8, ls=":")
    ax2.set_ylabel("min eig restricted Hessian")
    ax2.set_xlabel("t")
    for r in rows:
        if r.rho_onset:
            ax1.axvline(r.t, color="tab:red", lw=0.8)
        if r.eig_onset:
            ax2.axvline(r.t, color="tab:red", lw=0.8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
