"""Image-quality metrics, residual statistics, and controllability sweeps."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .camera import CameraParams, EncoderRanges, DEFAULT_RANGES

PSNR_CAP_DB = 99.0

SWEEP_AXES = ("iso", "shutter", "fnum")


def psnr(a, b, peak: float = 1.0, cap: float = PSNR_CAP_DB) -> float:
    """10 log10(peak^2 / MSE) in dB, double precision; identical images report the cap."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return cap
    return 10.0 * math.log10(peak * peak / mse)


def _gaussian_kernel(size: int, sigma: float) -> np.ndarray:
    r = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    k = np.exp(-(r ** 2) / (2.0 * sigma ** 2))
    k2 = np.outer(k, k)
    return k2 / k2.sum()


def ssim(
    a,
    b,
    peak: float = 1.0,
    k1: float = 0.01,
    k2: float = 0.03,
    win_size: int = 11,
    sigma: float = 1.5,
) -> float:
    """Single-scale structural similarity with a Gaussian window, valid-mode.

    Multi-channel images are averaged over channels.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    if a.ndim == 2:
        a = a[:, :, None]
        b = b[:, :, None]
    h, w, _ = a.shape
    if h < win_size or w < win_size:
        raise ValueError(f"image {h}x{w} smaller than the {win_size}x{win_size} window")

    kern = _gaussian_kernel(win_size, sigma)
    c1 = (k1 * peak) ** 2
    c2 = (k2 * peak) ** 2

    def filt(img):
        win = sliding_window_view(img, (win_size, win_size), axis=(0, 1))
        return np.einsum("hwcij,ij->hwc", win, kern, optimize=True)

    mu_a = filt(a)
    mu_b = filt(b)
    a2 = filt(a * a) - mu_a ** 2
    b2 = filt(b * b) - mu_b ** 2
    ab = filt(a * b) - mu_a * mu_b
    num = (2.0 * mu_a * mu_b + c1) * (2.0 * ab + c2)
    den = (mu_a ** 2 + mu_b ** 2 + c1) * (a2 + b2 + c2)
    return float(np.mean(num / den))


def total_variation(img) -> float:
    """Mean absolute forward difference over horizontal + vertical neighbors."""
    x = np.asarray(img, dtype=np.float64)
    if x.ndim == 2:
        x = x[:, :, None]
    dv = np.abs(x[1:, :, :] - x[:-1, :, :])
    dh = np.abs(x[:, 1:, :] - x[:, :-1, :])
    return float((dv.sum() + dh.sum()) / (dv.size + dh.size))


def residual_energy(out, ref) -> float:
    """Mean squared residual between the output and the (noisy) input."""
    out = np.asarray(out, dtype=np.float64)
    ref = np.asarray(ref, dtype=np.float64)
    return float(np.mean((out - ref) ** 2))


@dataclass
class SweepRecord:
    axis: str
    value: float
    tv: float
    residual_energy: float
    psnr: float | None = None

    def to_dict(self):
        d = {"axis": self.axis, "value": self.value, "tv": self.tv, "residual_energy": self.residual_energy}
        if self.psnr is not None:
            d["psnr"] = self.psnr
        return d


def _override(base: CameraParams, axis: str, value: float) -> CameraParams:
    if axis == "iso":
        return replace(base, iso=value)
    if axis == "shutter":
        return replace(base, shutter_speed=value)
    if axis == "fnum":
        if base.f_number is None:
            raise ValueError("cannot sweep fnum on device-code parameters")
        return replace(base, f_number=value)
    raise ValueError(f"axis must be one of {SWEEP_AXES}, got {axis!r}")


def sweep(
    model,
    noisy,
    base: CameraParams,
    axis: str,
    grid,
    ranges: EncoderRanges = DEFAULT_RANGES,
    clean=None,
    return_outputs: bool = False,
):
    """Re-denoise one image with a single parameter overridden along a grid.

    Records total variation of the output, residual energy against the noisy
    input, and PSNR against the clean reference when available.
    """
    from .net import denoise_image  # local import: net depends on camera only

    noisy = np.asarray(noisy, dtype=np.float64)
    records = []
    outputs = []
    for value in grid:
        p = _override(base, axis, float(value))
        out = denoise_image(model, noisy, params=p, ranges=ranges)
        rec = SweepRecord(
            axis=axis,
            value=float(value),
            tv=total_variation(out),
            residual_energy=residual_energy(out, noisy),
            psnr=psnr(out, clean) if clean is not None else None,
        )
        records.append(rec)
        outputs.append(out)
    if return_outputs:
        return records, outputs
    return records


@dataclass
class EvalReport:
    per_image: list
    aggregates: dict
    model_info: dict

    def to_dict(self):
        return {"per_image": self.per_image, "aggregates": self.aggregates, "model": self.model_info}


def evaluate(model, dataset, ranges: EncoderRanges = DEFAULT_RANGES, macs_resolution: int = 256) -> EvalReport:
    """Per-image and aggregate PSNR/SSIM of a model over a paired dataset."""
    from .net import count_macs, count_params, denoise_image
    from .train import _as_sample

    per_image = []
    for i, item in enumerate(dataset):
        s = _as_sample(item)
        out = denoise_image(model, s.noisy, params=s.params, ranges=ranges)
        rec = {
            "index": i,
            "iso": s.params.iso,
            "shutter_speed": s.params.shutter_speed,
            "psnr": psnr(out, s.clean),
            "ssim": ssim(out, s.clean),
            "psnr_noisy": psnr(s.noisy, s.clean),
            "ssim_noisy": ssim(s.noisy, s.clean),
            "tv_out": total_variation(out),
            "tv_noisy": total_variation(s.noisy),
            "residual_energy": residual_energy(out, s.noisy),
        }
        if s.params.f_number is not None:
            rec["f_number"] = s.params.f_number
        per_image.append(rec)

    keys = ("psnr", "ssim", "psnr_noisy", "ssim_noisy", "tv_out", "tv_noisy", "residual_energy")
    aggregates = {k: float(np.mean([r[k] for r in per_image])) for k in keys} if per_image else {}
    model_info = {
        "config": model.config.to_dict(),
        "n_params": count_params(model.config),
        "macs": count_macs(model.config, macs_resolution, macs_resolution),
        "macs_resolution": macs_resolution,
    }
    return EvalReport(per_image=per_image, aggregates=aggregates, model_info=model_info)
