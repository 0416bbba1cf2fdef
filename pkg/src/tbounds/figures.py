"""Figure rendering for envelope and study outputs.

Each function takes plot-ready rows (lists of plain dicts, matching the
delimited files the command line writes), renders one PNG to the given
path, and returns the path.  The Agg backend is forced so rendering works
headless.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_DPI = 150


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return path


def envelope_figure(lams, lowers, uppers, path, naive=None):
    """Bounds as a function of the sensitivity parameter."""
    lams = np.asarray(lams, dtype=float)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.fill_between(lams, lowers, uppers, alpha=0.25, color="tab:blue")
    ax.plot(lams, lowers, color="tab:blue", lw=1.5, label="lower bound")
    ax.plot(lams, uppers, color="tab:blue", lw=1.5, ls="--", label="upper bound")
    if naive is not None:
        ax.axhline(naive, color="tab:red", lw=1.0, label="point estimate")
    if lams[-1] / max(lams[0], 1e-12) > 3:
        ax.set_xscale("log")
    ax.set_xlabel("sensitivity parameter")
    ax.set_ylabel("target effect")
    ax.set_title("Sensitivity envelope")
    ax.legend(frameon=False)
    return _save(fig, path)


def sweep_figure(rows, path):
    """Coverage and mean width against the sensitivity grid."""
    lams = [r["lam"] for r in rows]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 4))
    cov = [r["coverage"] for r in rows]
    lo = [r["cov_low"] for r in rows]
    hi = [r["cov_high"] for r in rows]
    ax1.fill_between(lams, lo, hi, alpha=0.2, color="tab:blue")
    ax1.plot(lams, cov, marker="o", color="tab:blue")
    ax1.axhline(0.95, color="gray", lw=0.8, ls=":")
    ax1.set_xlabel("sensitivity parameter")
    ax1.set_ylabel("coverage")
    ax1.set_ylim(-0.02, 1.02)
    ax2.plot(lams, [r["mean_width"] for r in rows], marker="o", color="tab:blue",
             label="mean width")
    ow = [r.get("oracle_width", float("nan")) for r in rows]
    if np.any(np.isfinite(ow)):
        ax2.plot(lams, ow, marker="s", color="tab:orange", ls="--", label="oracle width")
        ax2.legend(frameon=False)
    ax2.set_xlabel("sensitivity parameter")
    ax2.set_ylabel("interval width")
    return _save(fig, path)


def breakeven_figure(rows, path):
    """Empirical breakeven level versus the analytic tail-trimmed level."""
    gam = [r["gamma_o"] for r in rows]
    fig, ax = plt.subplots(figsize=(6, 4))
    be = [(r["breakeven_lambda"] if r["breakeven_lambda"] is not None else np.nan)
          for r in rows]
    ax.plot(gam, be, marker="o", color="tab:blue", label="empirical breakeven")
    ax.plot(gam, [r["tail_trimmed_lambda"] for r in rows], marker="s",
            color="tab:orange", ls="--", label="tail-trimmed level")
    ax.set_xlabel("moderator shift strength")
    ax.set_ylabel("sensitivity parameter")
    ax.legend(frameon=False)
    return _save(fig, path)


def baselines_figure(rows, path):
    """Width of each interval procedure, with coverage annotated."""
    labels = [r["procedure"] if r["lam"] == "" else f"{r['procedure']} {r['lam']:g}"
              for r in rows]
    widths = [r["mean_width"] for r in rows]
    fig, ax = plt.subplots(figsize=(7, 4))
    bars = ax.bar(range(len(rows)), widths, color="tab:blue", alpha=0.8)
    for k, (bar, r) in enumerate(zip(bars, rows)):
        ax.annotate(f"cov {r['coverage']:.2f}", (k, bar.get_height()),
                    ha="center", va="bottom", fontsize=8)
    ax.set_xticks(range(len(rows)))
    ax.set_xticklabels(labels, rotation=20, ha="right")
    ax.set_ylabel("mean interval width")
    return _save(fig, path)


def scaling_figure(rows, path):
    """Bounds wall time per call against trial size, log-log."""
    n = [r["n_r"] for r in rows]
    ms = [r["bounds_ms_per_call"] for r in rows]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.loglog(n, ms, marker="o", color="tab:blue", label="measured")
    # linear reference anchored at the first point
    ref = [ms[0] * nk / n[0] for nk in n]
    ax.loglog(n, ref, color="gray", ls=":", label="linear reference")
    ax.set_xlabel("trial size")
    ax.set_ylabel("bounds time per call (ms)")
    ax.legend(frameon=False)
    return _save(fig, path)


def robustness_figure(rows, path):
    """Coverage and width per outcome family across sensitivity levels."""
    kinds = list(dict.fromkeys(r["kind"] for r in rows))
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 4))
    for kind in kinds:
        sub = [r for r in rows if r["kind"] == kind]
        lams = [r["lam"] for r in sub]
        ax1.plot(lams, [r["coverage"] for r in sub], marker="o", label=kind)
        ax2.plot(lams, [r["mean_width"] for r in sub], marker="o", label=kind)
    ax1.set_xlabel("sensitivity parameter")
    ax1.set_ylabel("coverage")
    ax1.set_ylim(-0.02, 1.02)
    ax1.legend(frameon=False, fontsize=8)
    ax2.set_xlabel("sensitivity parameter")
    ax2.set_ylabel("mean interval width")
    return _save(fig, path)


def weights_figure(rows, path):
    """Coverage and width per weighting strategy."""
    strategies = list(dict.fromkeys(r["strategy"] for r in rows))
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 4))
    for s in strategies:
        sub = [r for r in rows if r["strategy"] == s]
        lams = [r["lam"] for r in sub]
        ax1.plot(lams, [r["coverage"] for r in sub], marker="o", label=s)
        ax2.plot(lams, [r["mean_width"] for r in sub], marker="o", label=s)
    ax1.set_xlabel("sensitivity parameter")
    ax1.set_ylabel("coverage")
    ax1.set_ylim(-0.02, 1.02)
    ax1.legend(frameon=False, fontsize=8)
    ax2.set_xlabel("sensitivity parameter")
    ax2.set_ylabel("mean interval width")
    return _save(fig, path)


def id_vs_est_figure(rows, path):
    """Coverage against trial size: estimation error vs identification error."""
    fig, ax = plt.subplots(figsize=(6, 4))
    boot = [r for r in rows if r["procedure"] == "bootstrap"]
    ax.plot([r["n_r"] for r in boot], [r["coverage"] for r in boot],
            marker="o", color="tab:red", label="bootstrap CI")
    sharp_lams = sorted({r["lam"] for r in rows if r["procedure"] == "sharp"})
    for lam in sharp_lams:
        sub = [r for r in rows if r["procedure"] == "sharp" and r["lam"] == lam]
        ax.plot([r["n_r"] for r in sub], [r["coverage"] for r in sub],
                marker="s", label=f"sharp bounds {lam:g}")
    ax.set_xscale("log")
    ax.set_xlabel("trial size")
    ax.set_ylabel("coverage")
    ax.set_ylim(-0.02, 1.05)
    ax.legend(frameon=False, fontsize=8)
    return _save(fig, path)


def bangbang_figure(rows, path):
    """Multiplier profiles in sorted-outcome order, one panel per arm and
    direction; the bang-bang structure shows as a single step."""
    panels = []
    for arm in (-1, 1):
        for direction in ("lower", "upper"):
            sub = [r for r in rows if r["arm"] == arm and r["direction"] == direction]
            if sub:
                panels.append((arm, direction, sub))
    fig, axes = plt.subplots(2, 2, figsize=(9, 6), sharex=False)
    for ax, (arm, direction, sub) in zip(axes.ravel(), panels):
        idx = [r["index"] for r in sub]
        ax.step(idx, [r["multiplier"] for r in sub], where="mid", color="tab:blue")
        ax.set_title(f"arm {arm:+d}, {direction} bound", fontsize=9)
        ax.set_xlabel("sorted-outcome rank")
        ax.set_ylabel("multiplier")
    return _save(fig, path)
