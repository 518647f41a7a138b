"""Heteroscedastic sensor-noise synthesis and the desk-scale paired benchmark.

The noisy observation of a clean intensity x is drawn from
N(mu = x, sigma^2 = lambda_read + lambda_shot * x): a signal-independent
read-noise floor plus signal-dependent shot noise.  Both parameters grow
with sensor gain (ISO / base ISO); read noise grows faster because the
readout chain amplifies it twice.

All sampling uses the counter-based Philox generator keyed per image, so
datasets are bitwise reproducible regardless of generation order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .camera import CameraParams, ParamRange


@dataclass(frozen=True)
class NoiseParams:
    """(lambda_read, lambda_shot): variance floor and per-intensity slope."""

    lambda_read: float
    lambda_shot: float

    def __post_init__(self):
        if self.lambda_read < 0 or self.lambda_shot < 0:
            raise ValueError("noise parameters must be non-negative")

    def variance(self, x):
        return self.lambda_read + self.lambda_shot * np.asarray(x)


@dataclass(frozen=True)
class CalibConfig:
    """Sensor calibration constants plus sampling ranges for the benchmark.

    k_read / k_shot set the noise level at base ISO.  The light factor is
    normalized so the reference setting (shutter 30 s^-1, f/2.0) passes the
    scene through unscaled.  Sampling ranges are intentionally narrower than
    the encoder normalization ranges.
    """

    k_read: float = 1e-6
    k_shot: float = 1e-4
    base_iso: float = 100.0
    ref_shutter: float = 30.0
    ref_f_number: float = 2.0
    fallback_f_number: float = 2.0  # fixed-aperture devices (no F-number in params)
    iso: ParamRange = ParamRange(100.0, 6400.0)
    shutter: ParamRange = ParamRange(15.0, 120.0)
    f_number: ParamRange = ParamRange(1.8, 2.2)
    correlation: float = 0.7


DEFAULT_CALIB = CalibConfig()


@dataclass(frozen=True)
class SceneSpec:
    """A clean image plus the capture settings and the per-image noise seed."""

    clean_image: np.ndarray  # (H, W, C) in [0, 1]
    params: CameraParams
    seed: int

    def __post_init__(self):
        img = np.asarray(self.clean_image)
        if img.min() < 0.0 or img.max() > 1.0:
            raise ValueError("clean_image values must lie in [0, 1]")


def params_to_noise(params: CameraParams, calib: CalibConfig = DEFAULT_CALIB) -> NoiseParams:
    """Map camera parameters to (lambda_read, lambda_shot).

    With gain g = iso / base_iso: lambda_shot = k_shot * g and
    lambda_read = k_read * g^2, so both grow with ISO and the read floor
    grows faster.
    """
    g = params.iso / calib.base_iso
    return NoiseParams(lambda_read=calib.k_read * g * g, lambda_shot=calib.k_shot * g)


def light_factor(params: CameraParams, calib: CalibConfig = DEFAULT_CALIB) -> float:
    """Relative exposure: halve the shutter speed (expose longer) -> doubles;
    double the F-number (narrow the aperture) -> quarters."""
    f = params.f_number if params.f_number is not None else calib.fallback_f_number
    ref = calib.ref_shutter * calib.ref_f_number ** 2
    return ref / (params.shutter_speed * f * f)


def capture(
    scene: SceneSpec, calib: CalibConfig = DEFAULT_CALIB, clip: bool = True
) -> tuple[np.ndarray, np.ndarray]:
    """Simulate one exposure: returns (noisy, clean_reference).

    The scene is exposure-scaled by the light factor and clipped to [0, 1];
    noise is then drawn i.i.d. per pixel with variance
    lambda_read + lambda_shot * x.  clip=False skips the final clamp of the
    noisy image (used to verify the variance law without censoring bias).
    """
    x = np.asarray(scene.clean_image, dtype=np.float64)
    ell = light_factor(scene.params, calib)
    x_cap = np.clip(x * ell, 0.0, 1.0)
    noise = params_to_noise(scene.params, calib)
    sigma = np.sqrt(noise.variance(x_cap))
    rng = np.random.Generator(np.random.Philox(key=scene.seed))
    y = x_cap + sigma * rng.standard_normal(x_cap.shape)
    if clip:
        y = np.clip(y, 0.0, 1.0)
    return y, x_cap


def sample_params(
    rng: np.random.Generator, calib: CalibConfig = DEFAULT_CALIB, mode: str = "correlated"
) -> CameraParams:
    """Draw camera parameters from the calibration ranges.

    correlated: ISO is log-uniform and the shutter speed follows it (dim
    scenes get both high gain and short-as-possible exposure, bright scenes
    the opposite), giving a rank correlation well above 0.5.  independent:
    every parameter is its own log-uniform draw.
    """
    if mode not in ("correlated", "independent"):
        raise ValueError(f"unknown sampling mode {mode!r}")

    def log_interp(r: ParamRange, t: float) -> float:
        return math.exp(math.log(r.lo) + t * (math.log(r.hi) - math.log(r.lo)))

    t_iso = rng.uniform()
    u = rng.uniform()
    if mode == "correlated":
        a = calib.correlation
        t_shutter = a * t_iso + (1.0 - a) * u
    else:
        t_shutter = u
    return CameraParams(
        iso=log_interp(calib.iso, t_iso),
        shutter_speed=log_interp(calib.shutter, t_shutter),
        f_number=log_interp(calib.f_number, rng.uniform()),
    )


def item_seed(seed: int, index: int) -> int:
    """Stable per-item noise seed; parallel generation matches sequential."""
    ss = np.random.SeedSequence([seed, index, 0x5EED])
    return int(ss.generate_state(1, np.uint64)[0])


def generate_clean(rng: np.random.Generator, h: int, w: int, channels: int = 3) -> np.ndarray:
    """Procedural clean patch: smooth gradient + random rectangles + band-limited texture.

    Flat regions expose residual noise, edges and texture expose over-smoothing.
    """
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    yy /= max(h - 1, 1)
    xx /= max(w - 1, 1)

    theta = rng.uniform(0.0, 2.0 * math.pi)
    ramp = math.cos(theta) * xx + math.sin(theta) * yy
    ramp = (ramp - ramp.min()) / max(ramp.max() - ramp.min(), 1e-12)
    lo, hi = sorted(rng.uniform(0.05, 0.95, size=2))
    base = lo + (hi - lo) * ramp
    img = np.repeat(base[:, :, None], channels, axis=2)
    img += rng.uniform(-0.08, 0.08, size=channels)[None, None, :]

    for _ in range(int(rng.integers(1, 5))):
        y0 = int(rng.integers(0, h))
        x0 = int(rng.integers(0, w))
        rh = int(rng.integers(max(2, h // 8), max(3, h // 2)))
        rw = int(rng.integers(max(2, w // 8), max(3, w // 2)))
        color = rng.uniform(0.0, 1.0, size=channels)
        img[y0 : y0 + rh, x0 : x0 + rw, :] = color[None, None, :]

    white = rng.standard_normal((h, w))
    fy = np.fft.fftfreq(h)[:, None]
    fx = np.fft.fftfreq(w)[None, :]
    cutoff = rng.uniform(0.05, 0.25)
    mask = np.exp(-((fy ** 2 + fx ** 2) / cutoff ** 2))
    tex = np.fft.ifft2(np.fft.fft2(white) * mask).real
    tstd = tex.std()
    if tstd > 0:
        tex *= rng.uniform(0.02, 0.08) / tstd
    img += tex[:, :, None]

    return np.clip(img, 0.0, 1.0)


def make_dataset(
    n: int,
    patch: int = 32,
    calib: CalibConfig = DEFAULT_CALIB,
    seed: int = 0,
    mode: str = "correlated",
    channels: int = 3,
) -> list[tuple[np.ndarray, np.ndarray, CameraParams]]:
    """Generate n paired samples (noisy, clean, params), reproducible from seed.

    Each item derives its own Philox streams from (seed, index), so items are
    independent of generation order.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    out = []
    for i in range(n):
        gen_rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, i, 1])))
        clean = generate_clean(gen_rng, patch, patch, channels)
        params = sample_params(gen_rng, calib, mode)
        scene = SceneSpec(clean_image=clean, params=params, seed=item_seed(seed, i))
        noisy, x_cap = capture(scene, calib)
        out.append((noisy.astype(np.float32), x_cap.astype(np.float32), params))
    return out


def dataset_calib(iso_lo: float = 100.0, iso_hi: float = 6400.0, **kwargs) -> CalibConfig:
    """Convenience: the default calibration with a custom ISO span."""
    return replace(DEFAULT_CALIB, iso=ParamRange(iso_lo, iso_hi), **kwargs)
