"""Encoding of camera parameters into the normalized condition vector.

ISO, shutter speed (s^-1, the reciprocal of exposure time) and F-number
each pass through a fixed bank of nine non-linear maps, and each mapped
value is normalized into [0, 1].  The three 9-vectors are concatenated
into a 27-dimensional condition vector.  Smartphone-style inputs without
an F-number instead contribute a learned per-device embedding squashed
into [0, 1] by a logistic map.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

N_FUNCS = 9
COND_DIM = 27


@dataclass(frozen=True)
class ParamRange:
    """Normalization domain [lo, hi] for one camera parameter."""

    lo: float
    hi: float

    def __post_init__(self):
        if not (0.0 < self.lo < self.hi) or not math.isfinite(self.hi):
            raise ValueError(f"invalid parameter range [{self.lo}, {self.hi}]")

    def clamp(self, p: float) -> float:
        return min(max(p, self.lo), self.hi)


@dataclass(frozen=True)
class CameraParams:
    """Physical capture settings attached to one image.

    shutter_speed is in s^-1 (faster shutter -> larger value -> less light).
    Exactly one of f_number / device_code must be present: DSLR-style inputs
    carry an aperture, fixed-aperture smartphone inputs carry a device index.
    """

    iso: float
    shutter_speed: float
    f_number: float | None = None
    device_code: int | None = None

    def __post_init__(self):
        if not (self.iso > 0 and math.isfinite(self.iso)):
            raise ValueError(f"iso must be positive, got {self.iso}")
        if not (self.shutter_speed > 0 and math.isfinite(self.shutter_speed)):
            raise ValueError(f"shutter_speed must be positive, got {self.shutter_speed}")
        if (self.f_number is None) == (self.device_code is None):
            raise ValueError("exactly one of f_number / device_code must be set")
        if self.f_number is not None and not (self.f_number > 0 and math.isfinite(self.f_number)):
            raise ValueError(f"f_number must be positive, got {self.f_number}")
        if self.device_code is not None and self.device_code < 0:
            raise ValueError(f"device_code must be >= 0, got {self.device_code}")


@dataclass(frozen=True)
class EncoderRanges:
    iso: ParamRange = ParamRange(50.0, 25600.0)
    shutter: ParamRange = ParamRange(0.1, 8000.0)
    f_number: ParamRange = ParamRange(1.0, 22.0)


DEFAULT_RANGES = EncoderRanges()


class DeviceEmbedding:
    """Trainable n_devices x 9 table replacing the F-number block."""

    def __init__(self, weights):
        weights = np.asarray(weights, dtype=np.float64)
        if weights.ndim != 2 or weights.shape[1] != N_FUNCS:
            raise ValueError(f"embedding must be (n_devices, {N_FUNCS}), got {weights.shape}")
        self.weights = weights

    @property
    def n_devices(self) -> int:
        return self.weights.shape[0]

    @classmethod
    def zeros(cls, n_devices: int) -> "DeviceEmbedding":
        return cls(np.zeros((n_devices, N_FUNCS)))

    @classmethod
    def random(cls, n_devices: int, seed: int = 0) -> "DeviceEmbedding":
        rng = np.random.Generator(np.random.Philox(seed))
        return cls(rng.uniform(-1.0, 1.0, size=(n_devices, N_FUNCS)))


class ConditionVector:
    """27 values in [0, 1]: [ISO block | shutter block | F-number-or-device block]."""

    __slots__ = ("values",)

    def __init__(self, values):
        arr = np.asarray(values, dtype=np.float64)
        if arr.shape != (COND_DIM,):
            raise ValueError(f"condition vector must have {COND_DIM} values, got {arr.shape}")
        if np.any(arr < 0.0) or np.any(arr > 1.0):
            raise ValueError("condition vector components must lie in [0, 1]")
        self.values = arr

    @property
    def iso_block(self):
        return self.values[0:9]

    @property
    def shutter_block(self):
        return self.values[9:18]

    @property
    def aperture_block(self):
        return self.values[18:27]

    def __repr__(self):
        return f"ConditionVector({self.values.tolist()})"


def _func_values(p: float) -> np.ndarray:
    """The nine non-linear maps, in fixed order.  Natural logarithm throughout."""
    lp = math.log(p)
    return np.array(
        [
            p,
            1.0 / p,
            math.sqrt(p),
            p ** -0.5,
            p ** 0.25,
            p ** -0.25,
            lp,
            math.sin(lp),
            math.cos(lp),
        ],
        dtype=np.float64,
    )


# Index layout of _func_values: 0..6 are monotone in p, 7..8 oscillate in [-1, 1].
MONOTONE_INCREASING = (0, 2, 4, 6)
MONOTONE_DECREASING = (1, 3, 5)
OSCILLATORY = (7, 8)


def equalize(p: float, rng: ParamRange) -> np.ndarray:
    """Map one positive parameter to nine values in [0, 1].

    The parameter is clamped into [rng.lo, rng.hi] first.  Monotone maps are
    min-max normalized by their values at the range endpoints; the two
    oscillatory maps use their analytic range [-1, 1] via (f + 1) / 2.
    """
    if not (isinstance(p, (int, float)) and math.isfinite(p) and p > 0):
        raise ValueError(f"parameter must be a positive finite number, got {p!r}")
    pc = rng.clamp(float(p))
    f = _func_values(pc)
    f_lo = _func_values(rng.lo)
    f_hi = _func_values(rng.hi)
    out = np.empty(N_FUNCS, dtype=np.float64)
    for i in range(7):
        f_min, f_max = (f_lo[i], f_hi[i]) if f_lo[i] < f_hi[i] else (f_hi[i], f_lo[i])
        out[i] = (f[i] - f_min) / (f_max - f_min)
    for i in OSCILLATORY:
        out[i] = (f[i] + 1.0) / 2.0
    return np.clip(out, 0.0, 1.0)


def logistic(w: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-np.asarray(w, dtype=np.float64)))


def encode(
    params: CameraParams,
    ranges: EncoderRanges = DEFAULT_RANGES,
    embedding: DeviceEmbedding | None = None,
) -> ConditionVector:
    """Build the 27-dim condition vector for one set of camera parameters.

    Deterministic given (params, ranges, embedding weights).  The third block
    comes from the F-number when present, otherwise from the device embedding
    row squashed by a logistic map.
    """
    head = np.concatenate(
        [equalize(params.iso, ranges.iso), equalize(params.shutter_speed, ranges.shutter)]
    )
    if params.f_number is not None:
        if embedding is not None:
            raise ValueError("embedding given but params carry an F-number")
        tail = equalize(params.f_number, ranges.f_number)
    else:
        if embedding is None:
            raise ValueError("device_code params require a DeviceEmbedding")
        if not (0 <= params.device_code < embedding.n_devices):
            raise ValueError(
                f"device_code {params.device_code} out of range for "
                f"{embedding.n_devices} devices"
            )
        tail = logistic(embedding.weights[params.device_code])
    return ConditionVector(np.concatenate([head, tail]))
