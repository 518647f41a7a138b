"""Report figures rendered to files next to the delimited outputs."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def save_loss_curve(log, path):
    iters = [e["iter"] for e in log]
    losses = [e["loss"] for e in log]
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(iters, losses, lw=0.8, label="train L1")
    ax.set_xlabel("iteration")
    ax.set_ylabel("L1 loss")
    ax.set_yscale("log")
    val = [(e["iter"], e["val_psnr"]) for e in log if "val_psnr" in e]
    if val:
        ax2 = ax.twinx()
        ax2.plot(*zip(*val), "o-", color="tab:orange", ms=3, label="val PSNR")
        ax2.set_ylabel("val PSNR (dB)")
    ax.legend(loc="upper right")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_eval_figures(report, out_dir):
    out_dir = Path(out_dir)
    rows = report.per_image
    if not rows:
        return []
    isos = [r["iso"] for r in rows]
    written = []

    fig, axes = plt.subplots(1, 2, figsize=(10, 4))
    axes[0].scatter(isos, [r["psnr_noisy"] for r in rows], s=12, alpha=0.6, label="noisy input")
    axes[0].scatter(isos, [r["psnr"] for r in rows], s=12, alpha=0.6, label="denoised")
    axes[0].set_xscale("log")
    axes[0].set_xlabel("ISO")
    axes[0].set_ylabel("PSNR (dB)")
    axes[0].legend()
    axes[1].scatter(isos, [r["ssim_noisy"] for r in rows], s=12, alpha=0.6, label="noisy input")
    axes[1].scatter(isos, [r["ssim"] for r in rows], s=12, alpha=0.6, label="denoised")
    axes[1].set_xscale("log")
    axes[1].set_xlabel("ISO")
    axes[1].set_ylabel("SSIM")
    axes[1].legend()
    fig.tight_layout()
    p = out_dir / "metrics_vs_iso.png"
    fig.savefig(p, dpi=120)
    plt.close(fig)
    written.append(p)

    fig, ax = plt.subplots(figsize=(6, 4))
    gains = [r["psnr"] - r["psnr_noisy"] for r in rows]
    ax.hist(gains, bins=20, color="tab:blue", alpha=0.8)
    ax.set_xlabel("PSNR gain over noisy input (dB)")
    ax.set_ylabel("images")
    fig.tight_layout()
    p = out_dir / "psnr_gain_hist.png"
    fig.savefig(p, dpi=120)
    plt.close(fig)
    written.append(p)
    return written


def save_sweep_figure(records, path):
    values = [r.value for r in records]
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(values, [r.residual_energy for r in records], "o-", label="residual energy")
    ax.set_xscale("log")
    ax.set_xlabel(records[0].axis if records else "value")
    ax.set_ylabel("residual energy")
    ax2 = ax.twinx()
    ax2.plot(values, [r.tv for r in records], "s--", color="tab:green", label="total variation")
    ax2.set_ylabel("total variation")
    lines = ax.get_lines() + ax2.get_lines()
    ax.legend(lines, [ln.get_label() for ln in lines], loc="best")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
