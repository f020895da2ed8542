"""Figure rendering for runs and sweeps, always through the file backend."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)


def _finish(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_run(result, path) -> None:
    """Per-round latency and convergence picture of a single run."""
    from .experiments import run_rows

    rows = run_rows(result)
    epochs = [r["epoch"] for r in rows]
    fig, (ax_lat, ax_conv) = plt.subplots(2, 1, figsize=(7, 6), sharex=True)

    bottoms = [0.0] * len(rows)
    for key, label in (("t_local_s", "local"), ("t_up_s", "upload"),
                       ("t_cross_s", "cross-verify"), ("t_bg_s", "mining"),
                       ("t_bp_s", "propagation"), ("t_dn_s", "download"),
                       ("t_global_s", "recombine")):
        # stack per-attempt means once; fork repetitions show in the total line
        heights = [r[key] for r in rows]
        ax_lat.bar(epochs, heights, bottom=bottoms, label=label)
        bottoms = [b + h for b, h in zip(bottoms, heights)]
    ax_lat.plot(epochs, [r["total_s"] for r in rows], "k.-", lw=1,
                label="round total (with forks)")
    ax_lat.set_ylabel("round latency [s]")
    ax_lat.legend(fontsize=7, ncol=2)
    ax_lat.set_title(f"{result.mode} run, seed {result.seed}")

    ax_conv.semilogy(epochs, [max(r["weight_movement"], 1e-12) for r in rows],
                     "o-", label="|w movement|")
    ax_conv.set_xlabel("round")
    ax_conv.set_ylabel("weight movement")
    ax_conv.legend(fontsize=8)
    _finish(fig, path)


def plot_sweep(result, path) -> None:
    """Mean completion latency over the sweep axis, one line per mode.

    Lambda sweeps add the analytic per-round latency with the closed-form
    optimal rate marked, next to the simulated per-round means.
    """
    axis = result.config.sweep_axis
    if axis == "overtake_z":
        plot_overtake(result, path)
        return
    rows = [r for r in result.rows if not r["failed"]]
    if not rows:
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.set_title("all sweep points failed")
        _finish(fig, path)
        return

    modes = sorted({r["mode"] for r in rows})
    if axis == "lambda":
        fig, (ax, ax_epoch) = plt.subplots(1, 2, figsize=(10, 4))
    else:
        fig, ax = plt.subplots(figsize=(6, 4))
        ax_epoch = None

    for mode in modes:
        mrows = [r for r in rows if r["mode"] == mode]
        xs = [r["sweep_value"] for r in mrows]
        ys = [r["mean_completion_latency_s"] for r in mrows]
        errs = [1.96 * r["se_completion_latency_s"] for r in mrows]
        ax.errorbar(xs, ys, yerr=errs, marker="o", capsize=3, label=mode)
    if axis == "lambda":
        ax.set_xscale("log")
    ax.set_xlabel(axis)
    ax.set_ylabel("completion latency [s]")
    ax.legend(fontsize=8)

    if ax_epoch is not None:
        mrows = [r for r in rows if r["mode"] == modes[0]]
        xs = [r["sweep_value"] for r in mrows]
        ax_epoch.plot(xs, [r["mean_epoch_latency_s"] for r in mrows], "o-",
                      label="simulated mean round")
        ax_epoch.plot(xs, [r["analytic_epoch_latency_s"] for r in mrows], "--",
                      label="analytic round latency")
        lam_star = mrows[0]["optimal_lambda_closed_form_per_s"]
        ax_epoch.axvline(lam_star, color="gray", ls=":",
                         label=f"closed-form optimum {lam_star:.3g}/s")
        ax_epoch.set_xscale("log")
        ax_epoch.set_xlabel("block generation rate [1/s]")
        ax_epoch.set_ylabel("round latency [s]")
        ax_epoch.legend(fontsize=8)
    _finish(fig, path)


def plot_overtake(result, path) -> None:
    """Overtake probability against the honest head start, log scale."""
    rows = [r for r in result.rows if not r["failed"]]
    fig, ax = plt.subplots(figsize=(6, 4))
    zs = [r["sweep_value"] for r in rows]
    floor = 0.5 / max((r["replications"] for r in rows), default=1)
    sim = [max(r["overtake_probability"], floor) for r in rows]
    exact = [r["exact_probability"] for r in rows]
    ax.semilogy(zs, sim, "o", label="simulated (floored at 1/2n)")
    ax.semilogy(zs, exact, "--", label="closed form")
    ax.set_xlabel("honest blocks already chained")
    ax.set_ylabel("overtake probability")
    ax.legend(fontsize=8)
    _finish(fig, path)
