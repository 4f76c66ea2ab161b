"""PNG figures for the ``--figures`` option.  Uses the non-interactive Agg backend."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _save(fig, path: Path):
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)


def split_figures(outdir: Path, runs: dict, report, lines: dict) -> list:
    """Splitting potential on the observation line, mode magnitudes and KAM residual histories."""
    written = []
    for beta, line in lines.items():
        g = line.grid
        Sf = np.real(line.S_frak - line.S_frak.mean())
        M = g.M
        # first angle slice for n > 1
        Z = Sf.reshape((g.Nt + 1,) + (M,) * g.n)
        while Z.ndim > 2:
            Z = Z[..., 0]
        phi = 2 * np.pi * np.arange(M) / M
        fig, ax = plt.subplots(figsize=(6, 4))
        im = ax.pcolormesh(phi, g.t, Z, shading="auto", cmap="RdBu_r")
        fig.colorbar(im, ax=ax, label="Re S_u - S_s")
        ax.set_xlabel("phi_1")
        ax.set_ylabel("Re s")
        ax.set_title(f"splitting potential, branch {beta}")
        p = outdir / f"splitting_{'plus' if beta == '+' else 'minus'}.png"
        _save(fig, p)
        written.append(p)

    fig, ax = plt.subplots(figsize=(6, 4))
    for beta, co in report.coeffs.items():
        ks = sorted(k for k in co if k > tuple(0 for _ in k))
        if ks:
            ax.semilogy([sum(abs(v) for v in k) for k in ks], [abs(co[k]) for k in ks], "o-", label=f"branch {beta}")
    ax.set_xlabel("|k|")
    ax.set_ylabel("|F_k|")
    if ax.lines:
        ax.legend()
    p = outdir / "coefficients.png"
    _save(fig, p)
    written.append(p)

    fig, ax = plt.subplots(figsize=(6, 4))
    for beta, m in runs.items():
        for res in (m.unstable, m.stable):
            mus = [res.diag.mu0] + [r.mu for r in res.diag.records]
            ax.semilogy(range(len(mus)), np.maximum(mus, 1e-300), "o-", label=f"{beta}/{res.problem.chart}")
    ax.set_xlabel("Newton step")
    ax.set_ylabel("sup |H(dS) - c0|")
    ax.legend()
    p = outdir / "kam_residuals.png"
    _save(fig, p)
    written.append(p)
    return written


def sweep_figure(outdir: Path, x, logF, slope: float, predicted: float) -> Path:
    """``log |F_e1|`` against ``eps**-1/2`` with the fitted and predicted slopes."""
    x = np.asarray(x)
    logF = np.asarray(logF)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(x, logF, "o", label="measured")
    b = np.mean(logF + slope * x)
    ax.plot(x, b - slope * x, "-", label=f"fit, slope {slope:.4g}")
    bp = np.mean(logF + predicted * x)
    ax.plot(x, bp - predicted * x, "--", label=f"predicted, slope {predicted:.4g}")
    ax.set_xlabel("eps^(-1/2)")
    ax.set_ylabel("log |F_e1|")
    ax.legend()
    p = outdir / "sweep.png"
    _save(fig, p)
    return p
