"""Figures rendered next to the delimited output of each experiment."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

FIGSIZE = (6.4, 4.2)
DPI = 130


def _save(fig, out_dir: Path, name: str) -> str:
    fig.tight_layout()
    fig.savefig(Path(out_dir) / name, dpi=DPI)
    plt.close(fig)
    return name


def plot_audit(out_dir, audit) -> str:
    rows = np.array([(r[0], r[2]) for r in audit.rows])
    fig, ax = plt.subplots(figsize=FIGSIZE)
    ax.loglog(rows[:, 0], rows[:, 1], "o-", ms=3, label="psi*")
    ref = rows[:, 1][len(rows) // 2] * (rows[:, 0] / rows[len(rows) // 2, 0]) ** audit.alpha_hat
    ax.loglog(rows[:, 0], ref, "--", label=f"slope {audit.alpha_hat:.3f}")
    ax.set_xlabel("|xi|")
    ax.set_ylabel("psi*(|xi|)")
    ax.legend()
    ax.set_title("lower scaling audit")
    return _save(fig, out_dir, "audit.png")


def plot_heatkernel(out_dir, model, times, radii) -> str:
    from .heatkernel import heat_evaluator

    ev = heat_evaluator(model)
    rr = np.linspace(0.0, 6.0, 200)
    fig, ax = plt.subplots(figsize=FIGSIZE)
    for t in times:
        ax.plot(rr, ev(t, rr), label=f"t={t}")
    ax.set_xlabel("|x|")
    ax.set_ylabel("p_t(|x|)")
    ax.legend()
    ax.set_title("heat kernel radial profiles")
    return _save(fig, out_dir, "heatkernel.png")


def plot_potential(out_dir, model, pk, radii) -> str:
    fig, ax = plt.subplots(figsize=FIGSIZE)
    rr = np.geomspace(radii[0], radii[-1], 200)
    if pk.branch == "Transient":
        ax.loglog(rr, pk.G(rr), label="G")
        ax.loglog(rr, np.abs(pk.Gp(rr)), "--", label="|G'|")
    else:
        ax.semilogx(rr, pk.G(rr), label="G (compensated)")
        ax.axhline(0.0, color="k", lw=0.5)
    ax.set_xlabel("|x|")
    ax.legend()
    ax.set_title(f"fundamental solution ({pk.branch})")
    return _save(fig, out_dir, "potential.png")


def plot_exit(out_dir, euler_batch, exact_batch) -> str:
    fig, ax = plt.subplots(figsize=FIGSIZE)
    re = np.linalg.norm(euler_batch.exits, axis=1)
    rx = np.linalg.norm(exact_batch.exits, axis=1)
    bins = np.geomspace(1.0 + 1e-6, 20.0, 80)
    ax.hist(np.clip(re, None, 20), bins=bins, histtype="step", density=True,
            label="jump-adapted Euler")
    ax.hist(np.clip(rx, None, 20), bins=bins, histtype="step", density=True,
            label="exact exit law")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("|exit|")
    ax.legend()
    ax.set_title("exit position law")
    return _save(fig, out_dir, "exit.png")


def plot_green(out_dir, model, dom, kappa, config) -> str:
    from . import killed as K

    d = model.dim
    x = np.zeros(d)
    ys = np.linspace(-0.98, 0.98, 99) if d == 1 else np.linspace(0.02, 0.98, 49)
    if d == 1:
        ynod = ys[:, None]
    else:
        ynod = np.zeros((len(ys), d))
        ynod[:, 0] = ys
    vals, cis, _, _ = K.green_values_shared_batch(model, dom, x, ynod, config)
    closed = [kappa * K.stable_ball_green_shape(model, dom, x, y) if np.linalg.norm(y) > 1e-9
              else np.nan for y in ynod]
    fig, ax = plt.subplots(figsize=FIGSIZE)
    ax.plot(ys, vals, ".", ms=3, label="Monte Carlo")
    ax.plot(ys, closed, "-", lw=1, label="calibrated closed form")
    ax.set_xlabel("y")
    ax.set_ylabel("G_B(0, y)")
    ax.legend()
    ax.set_title("ball Green function")
    return _save(fig, out_dir, "green.png")


def plot_poisson(out_dir, model, dom, exact_cfg, emp_cfg) -> str:
    from . import killed as K

    d = model.dim
    x = np.zeros(d)
    zs = np.linspace(1.05, 4.0, 40)
    rows = {"exact": [], "iw": [], "emp": []}
    for zq in zs:
        z = np.zeros(d)
        z[0] = zq
        rows["exact"].append(K.poisson_kernel(model, dom, x, z, exact_cfg, K.EXACT_STABLE).value)
        rows["emp"].append(K.poisson_kernel(model, dom, x, z, emp_cfg, K.EMPIRICAL).value)
    fig, ax = plt.subplots(figsize=FIGSIZE)
    ax.semilogy(zs, rows["exact"], "-", label="exact kernel")
    ax.semilogy(zs, rows["emp"], ".", ms=4, label="empirical (KDE)")
    ax.set_xlabel("|z|")
    ax.set_ylabel("P_B(0, z)")
    ax.legend()
    ax.set_title("Poisson kernel of the unit ball")
    return _save(fig, out_dir, "poisson.png")


def plot_gradient(out_dir, rows, d) -> str:
    rows = np.array([r for r in rows], dtype=float)
    delta = rows[:, d]
    ratio = rows[:, d + 4]
    fig, ax = plt.subplots(figsize=FIGSIZE)
    ax.semilogx(delta, ratio, "o", ms=4)
    ax.set_xlabel("boundary distance delta")
    ax.set_ylabel("|grad f| (delta ^ 1) / f")
    ax.set_title("gradient bound ratios")
    return _save(fig, out_dir, "gradient.png")


def plot_harnack(out_dir, rows, d) -> str:
    rows = np.array([r for r in rows], dtype=float)
    fig, ax = plt.subplots(figsize=FIGSIZE)
    ax.plot(rows[:, d], rows[:, d + 3], "o-")
    ax.set_xlabel("r")
    ax.set_ylabel("sup/inf over B(x0, r/2)")
    ax.set_title("Harnack ratios")
    return _save(fig, out_dir, "harnack.png")


def plot_green_grad(out_dir, rows, d) -> str:
    rows = [r for r in rows if np.isfinite(r[-2])]
    vals = np.array([r[-2] for r in rows])
    fig, ax = plt.subplots(figsize=FIGSIZE)
    ax.plot(np.arange(len(vals)), vals, "o")
    ax.set_xlabel("pair index")
    ax.set_ylabel("|grad G| (delta ^ |x-y| ^ 1) / G")
    ax.set_title("Green gradient corollary ratios")
    return _save(fig, out_dir, "green_grad.png")


def plot_split(out_dir, rows) -> str:
    rows = np.array(rows, dtype=float)
    fig, ax = plt.subplots(figsize=FIGSIZE)
    w = 0.35
    ax.bar(np.arange(len(rows)) - w / 2, rows[:, 2], w, label="inner annulus")
    ax.bar(np.arange(len(rows)) + w / 2, rows[:, 3], w, label="outer region")
    ax.set_xticks(np.arange(len(rows)), [f"r={r}" for r in rows[:, 0]])
    ax.set_ylabel("integral / (f(0)/r)")
    ax.legend()
    ax.set_title("annulus splitting integrals")
    return _save(fig, out_dir, "split.png")


def plot_appendix(out_dir, model, config) -> str:
    from . import killed as K

    d = model.dim
    zs = np.linspace(0.05, 3.0, 60)
    vals = []
    for zq in zs:
        z = np.zeros(d)
        z[0] = zq
        vals.append(K.regularized_poisson(model, 1.0, z, config).value)
    fig, ax = plt.subplots(figsize=FIGSIZE)
    ax.plot(zs, vals, "-")
    ax.axvline(0.25, color="k", lw=0.5, ls="--")
    ax.set_xlabel("|z|")
    ax.set_ylabel("regularised Poisson kernel")
    ax.set_title("P-bar_1 (vanishes below r/4)")
    return _save(fig, out_dir, "appendix.png")
