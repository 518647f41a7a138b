"""The conditioned denoising network.

Building block: a gated conv block whose two layer norms receive per-channel
scale/shift modulation regressed from the 27-dim condition vector by a small
MLP (SiLU between the two linears, dropout 0.2 on the hidden activation, and
a zero-initialized output layer so modulation starts as the identity).  The
unconditioned baseline swaps the modulation for a learnable per-channel
affine initialized to (1, 0) and is otherwise identical.

The network is U-shaped: three stride-2 downsamplings with channel doubling,
additive encoder-decoder skips, pixel-shuffle upsampling, and a global
input->output residual.  Residual scales, modulation output layers and the
final conv are zero at init, so a fresh network is exactly the identity map.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

from . import camera
from .autodiff import Tensor, no_grad, ops

CHECKPOINT_MAGIC = b"CPAD1\n"


@dataclass(frozen=True)
class ModelConfig:
    width: int = 32
    enc_blocks: tuple[int, int, int] = (4, 4, 4)
    bottom_blocks: int = 8
    dec_blocks: tuple[int, int, int] | None = None  # default: bottom count per level
    in_channels: int = 3
    cond_dim: int = 27
    conditioned: bool = True
    n_devices: int | None = None
    dropout_p: float = 0.2

    def __post_init__(self):
        if len(self.enc_blocks) != 3 or any(b < 1 for b in self.enc_blocks):
            raise ValueError(f"enc_blocks must be 3 positive counts, got {self.enc_blocks}")
        if self.bottom_blocks < 1 or self.width < 2 or self.width % 2:
            raise ValueError("width must be even and >= 2, bottom_blocks >= 1")
        if self.dec_blocks is not None and (
            len(self.dec_blocks) != 3 or any(b < 1 for b in self.dec_blocks)
        ):
            raise ValueError(f"dec_blocks must be 3 positive counts, got {self.dec_blocks}")

    @property
    def decoder_blocks(self) -> tuple[int, int, int]:
        if self.dec_blocks is not None:
            return tuple(self.dec_blocks)
        return (self.bottom_blocks,) * 3

    @property
    def level_widths(self) -> tuple[int, int, int, int]:
        return tuple(self.width * 2 ** i for i in range(4))

    @staticmethod
    def mlp_hidden(width: int) -> int:
        return max(1, width // 2)

    @classmethod
    def paper(cls, **kw) -> "ModelConfig":
        return cls(width=32, enc_blocks=(4, 4, 4), bottom_blocks=8, **kw)

    @classmethod
    def desk(cls, **kw) -> "ModelConfig":
        return cls(width=8, enc_blocks=(1, 1, 1), bottom_blocks=1, **kw)

    @classmethod
    def tiny(cls, **kw) -> "ModelConfig":
        return cls(width=4, enc_blocks=(1, 1, 1), bottom_blocks=1, **kw)

    def to_dict(self) -> dict:
        return {
            "width": self.width,
            "enc_blocks": list(self.enc_blocks),
            "bottom_blocks": self.bottom_blocks,
            "dec_blocks": list(self.decoder_blocks),
            "in_channels": self.in_channels,
            "cond_dim": self.cond_dim,
            "conditioned": self.conditioned,
            "n_devices": self.n_devices,
            "dropout_p": self.dropout_p,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(
            width=d["width"],
            enc_blocks=tuple(d["enc_blocks"]),
            bottom_blocks=d["bottom_blocks"],
            dec_blocks=tuple(d["dec_blocks"]) if d.get("dec_blocks") else None,
            in_channels=d.get("in_channels", 3),
            cond_dim=d.get("cond_dim", 27),
            conditioned=d.get("conditioned", True),
            n_devices=d.get("n_devices"),
            dropout_p=d.get("dropout_p", 0.2),
        )


def _uniform(rng, fan_in, shape, dtype):
    bound = 1.0 / np.sqrt(fan_in)
    return Tensor(rng.uniform(-bound, bound, size=shape), requires_grad=True, dtype=dtype)


def _zeros(shape, dtype):
    return Tensor(np.zeros(shape), requires_grad=True, dtype=dtype)


class Conv:
    def __init__(self, rng, cin, cout, k, dtype, stride=1, padding=0, zero_init=False):
        self.stride, self.padding = stride, padding
        if zero_init:
            self.w = _zeros((cout, cin, k, k), dtype)
            self.b = _zeros((cout,), dtype)
        else:
            fan_in = cin * k * k
            self.w = _uniform(rng, fan_in, (cout, cin, k, k), dtype)
            self.b = _uniform(rng, fan_in, (cout,), dtype)

    def __call__(self, x):
        return ops.conv2d(x, self.w, self.b, stride=self.stride, padding=self.padding)

    def params(self, prefix):
        return [(prefix + ".w", self.w), (prefix + ".b", self.b)]


class DepthwiseConv:
    def __init__(self, rng, c, k, dtype, padding=1):
        self.padding = padding
        fan_in = k * k
        self.w = _uniform(rng, fan_in, (c, 1, k, k), dtype)
        self.b = _uniform(rng, fan_in, (c,), dtype)

    def __call__(self, x):
        return ops.depthwise_conv2d(x, self.w, self.b, padding=self.padding)

    def params(self, prefix):
        return [(prefix + ".w", self.w), (prefix + ".b", self.b)]


class ModulationHead:
    """cond vector -> (dgamma1, beta1, dgamma2, beta2), each (N, C, 1, 1).

    The output layer starts at zero, so the modulated norm equals the plain
    norm at init.
    """

    def __init__(self, rng, cond_dim, width, dropout_p, dtype):
        hidden = ModelConfig.mlp_hidden(width)
        self.width = width
        self.dropout_p = dropout_p
        self.w1 = _uniform(rng, cond_dim, (cond_dim, hidden), dtype)
        self.b1 = _uniform(rng, cond_dim, (hidden,), dtype)
        self.w2 = _zeros((hidden, 4 * width), dtype)
        self.b2 = _zeros((4 * width,), dtype)

    def __call__(self, v, training, seed):
        h = ops.silu(ops.linear(v, self.w1, self.b1))
        h = ops.dropout(h, self.dropout_p, training, seed)
        m = ops.linear(h, self.w2, self.b2)
        n = v.shape[0]
        c = self.width
        parts = []
        for i in range(4):
            parts.append(ops.reshape(ops.slice_channels(m, i * c, (i + 1) * c), (n, c, 1, 1)))
        return tuple(parts)

    def params(self, prefix):
        return [
            (prefix + ".w1", self.w1),
            (prefix + ".b1", self.b1),
            (prefix + ".w2", self.w2),
            (prefix + ".b2", self.b2),
        ]


class PlainAffine:
    """Per-channel (gamma, beta) for the unconditioned baseline; init (1, 0)."""

    def __init__(self, width, dtype):
        self.gamma = Tensor(np.ones((width, 1, 1)), requires_grad=True, dtype=dtype)
        self.beta = _zeros((width, 1, 1), dtype)

    def params(self, prefix):
        return [(prefix + ".gamma", self.gamma), (prefix + ".beta", self.beta)]


def modulated_layer_norm(x, dgamma, beta):
    """layer_norm(x) * (1 + dgamma) + beta with per-channel broadcast."""
    return ops.add(ops.mul(ops.layer_norm(x), ops.add_scalar(dgamma, 1.0)), beta)


class Block:
    """Gated conv block; conditioning enters through the two norms."""

    def __init__(self, rng, width, conditioned, cond_dim, dropout_p, dtype):
        c = width
        self.conditioned = conditioned
        if conditioned:
            self.head = ModulationHead(rng, cond_dim, c, dropout_p, dtype)
        else:
            self.affine1 = PlainAffine(c, dtype)
            self.affine2 = PlainAffine(c, dtype)
        self.conv1 = Conv(rng, c, 2 * c, 1, dtype)
        self.dw = DepthwiseConv(rng, 2 * c, 3, dtype, padding=1)
        self.sca = Conv(rng, c, c, 1, dtype)
        self.conv3 = Conv(rng, c, c, 1, dtype)
        self.conv4 = Conv(rng, c, 2 * c, 1, dtype)
        self.conv5 = Conv(rng, c, c, 1, dtype)
        self.s1 = _zeros((c, 1, 1), dtype)
        self.s2 = _zeros((c, 1, 1), dtype)

    def _norm(self, x, which, mods):
        if self.conditioned:
            dg1, be1, dg2, be2 = mods
            dg, be = (dg1, be1) if which == 1 else (dg2, be2)
            return modulated_layer_norm(x, dg, be)
        aff = self.affine1 if which == 1 else self.affine2
        return ops.add(ops.mul(ops.layer_norm(x), aff.gamma), aff.beta)

    def forward(self, x, v, training=False, seed=None):
        mods = self.head(v, training, seed) if self.conditioned else None

        t = self._norm(x, 1, mods)
        t = self.conv1(t)
        t = self.dw(t)
        a, b = ops.chunk2(t)
        t = ops.mul(a, b)
        att = self.sca(ops.global_avg_pool(t))
        t = ops.mul(t, att)
        t = self.conv3(t)
        x = ops.add(x, ops.mul(t, self.s1))

        u = self._norm(x, 2, mods)
        u = self.conv4(u)
        a, b = ops.chunk2(u)
        u = ops.mul(a, b)
        u = self.conv5(u)
        return ops.add(x, ops.mul(u, self.s2))

    def params(self, prefix):
        out = []
        if self.conditioned:
            out += self.head.params(prefix + ".head")
        else:
            out += self.affine1.params(prefix + ".affine1")
            out += self.affine2.params(prefix + ".affine2")
        for name, layer in (
            ("conv1", self.conv1),
            ("dw", self.dw),
            ("sca", self.sca),
            ("conv3", self.conv3),
            ("conv4", self.conv4),
            ("conv5", self.conv5),
        ):
            out += layer.params(f"{prefix}.{name}")
        out += [(prefix + ".s1", self.s1), (prefix + ".s2", self.s2)]
        return out


class CPADNet:
    """U-shaped conditioned denoiser; exact identity map at initialization."""

    def __init__(self, config: ModelConfig, seed: int = 0, dtype=np.float32):
        self.config = config
        self.dtype = dtype
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, 0xCAD])))
        w = config.level_widths
        mk_block = lambda width: Block(
            rng, width, config.conditioned, config.cond_dim, config.dropout_p, dtype
        )

        self.intro = Conv(rng, config.in_channels, w[0], 3, dtype, padding=1)
        self.enc = []
        self.downs = []
        for i in range(3):
            self.enc.append([mk_block(w[i]) for _ in range(config.enc_blocks[i])])
            self.downs.append(Conv(rng, w[i], w[i + 1], 2, dtype, stride=2))
        self.bottom = [mk_block(w[3]) for _ in range(config.bottom_blocks)]
        self.ups = []
        self.dec = []
        dec_counts = config.decoder_blocks
        for i in (2, 1, 0):
            self.ups.append(Conv(rng, w[i + 1], 2 * w[i + 1], 1, dtype))
            self.dec.append([mk_block(w[i]) for _ in range(dec_counts[i])])
        self.ending = Conv(rng, w[0], config.in_channels, 3, dtype, padding=1, zero_init=True)

        if config.conditioned and config.n_devices:
            self.device_embedding = Tensor(
                rng.uniform(-1.0, 1.0, size=(config.n_devices, 9)), requires_grad=True, dtype=dtype
            )
        else:
            self.device_embedding = None

        self._blocks = (
            [b for level in self.enc for b in level]
            + self.bottom
            + [b for level in self.dec for b in level]
        )

    def named_parameters(self):
        out = self.intro.params("intro")
        for i in range(3):
            for j, blk in enumerate(self.enc[i]):
                out += blk.params(f"enc{i}.blk{j}")
            out += self.downs[i].params(f"enc{i}.down")
        for j, blk in enumerate(self.bottom):
            out += blk.params(f"bottom.blk{j}")
        for k, i in enumerate((2, 1, 0)):
            out += self.ups[k].params(f"dec{i}.up")
            for j, blk in enumerate(self.dec[k]):
                out += blk.params(f"dec{i}.blk{j}")
        out += self.ending.params("ending")
        if self.device_embedding is not None:
            out.append(("device_embedding", self.device_embedding))
        return out

    def parameters(self):
        return [t for _, t in self.named_parameters()]

    def n_parameters(self):
        return sum(t.size for t in self.parameters())

    def forward(self, x: Tensor, v: Tensor | None = None, training: bool = False, dropout_seed: int | None = None):
        n, c, h, wid = x.shape
        if c != self.config.in_channels:
            raise ValueError(f"expected {self.config.in_channels} input channels, got {c}")
        if h % 8 or wid % 8:
            raise ValueError(f"spatial dims must be divisible by 8, got {h}x{wid} (pad the input)")
        if self.config.conditioned:
            if v is None:
                raise ValueError("conditioned model requires a condition tensor v")
            if v.shape != (n, self.config.cond_dim):
                raise ValueError(f"v must be ({n}, {self.config.cond_dim}), got {v.shape}")
        if training and self.config.conditioned and self.config.dropout_p > 0 and dropout_seed is None:
            raise ValueError("training forward requires dropout_seed")

        seeds = _block_seeds(dropout_seed, len(self._blocks))
        it = iter(seeds)

        feat = self.intro(x)
        skips = []
        for i in range(3):
            for blk in self.enc[i]:
                feat = blk.forward(feat, v, training, next(it))
            skips.append(feat)
            feat = self.downs[i](feat)
        for blk in self.bottom:
            feat = blk.forward(feat, v, training, next(it))
        for k, i in enumerate((2, 1, 0)):
            feat = ops.pixel_shuffle(self.ups[k](feat), 2)
            feat = ops.add(feat, skips[i])
            for blk in self.dec[k]:
                feat = blk.forward(feat, v, training, next(it))
        return ops.add(x, self.ending(feat))

    def encode_condition(self, params_list, ranges: camera.EncoderRanges = camera.DEFAULT_RANGES) -> Tensor:
        """Batch the condition vectors; device rows stay differentiable."""
        if not self.config.conditioned:
            raise ValueError("baseline model has no conditioning path")
        device_rows = [p.device_code is not None for p in params_list]
        if any(device_rows) and not all(device_rows):
            raise ValueError("batch mixes F-number and device-code parameters")
        head = np.stack(
            [
                np.concatenate(
                    [
                        camera.equalize(p.iso, ranges.iso),
                        camera.equalize(p.shutter_speed, ranges.shutter),
                    ]
                )
                for p in params_list
            ]
        ).astype(self.dtype)
        if not any(device_rows):
            tail = np.stack(
                [camera.equalize(p.f_number, ranges.f_number) for p in params_list]
            ).astype(self.dtype)
            return Tensor(np.concatenate([head, tail], axis=1), dtype=self.dtype)
        if self.device_embedding is None:
            raise ValueError("model has no device embedding (set n_devices)")
        idx = np.array([p.device_code for p in params_list], dtype=np.int64)
        tail_t = ops.sigmoid(ops.embedding_lookup(self.device_embedding, idx))
        return ops.concat(Tensor(head, dtype=self.dtype), tail_t, axis=1)


def _block_seeds(seed, count):
    if seed is None:
        return [None] * count
    return [(seed * 1000003 + i) % (2 ** 63) for i in range(count)]


def pad_to_multiple(img_chw: np.ndarray, multiple: int = 8):
    """Reflect-pad H and W up to the next multiple; returns (padded, (h, w))."""
    c, h, w = img_chw.shape
    ph = (-h) % multiple
    pw = (-w) % multiple
    if ph == 0 and pw == 0:
        return img_chw, (h, w)
    mode = "reflect" if min(h, w) > max(ph, pw) else "edge"
    return np.pad(img_chw, ((0, 0), (0, ph), (0, pw)), mode=mode), (h, w)


def denoise_image(
    model: CPADNet,
    img_hwc: np.ndarray,
    params: camera.CameraParams | None = None,
    v: np.ndarray | None = None,
    ranges: camera.EncoderRanges = camera.DEFAULT_RANGES,
) -> np.ndarray:
    """Denoise one HWC float image in [0, 1]; pads to /8 and crops back."""
    x = np.asarray(img_hwc, dtype=model.dtype).transpose(2, 0, 1)
    xp, (h, w) = pad_to_multiple(x)
    with no_grad():
        if model.config.conditioned:
            if v is not None:
                vt = Tensor(np.asarray(v, dtype=model.dtype)[None, :], dtype=model.dtype)
            elif params is not None:
                vt = model.encode_condition([params], ranges)
            else:
                raise ValueError("conditioned model needs params or v")
        else:
            vt = None
        out = model.forward(Tensor(xp[None]), vt, training=False)
    y = out.data[0, :, :h, :w].transpose(1, 2, 0)
    return np.clip(y, 0.0, 1.0)


# ---------------------------------------------------------------------------
# analytic accounting
# ---------------------------------------------------------------------------


def _block_param_count(width: int, conditioned: bool, cond_dim: int) -> int:
    c = width
    convs = (2 * c * c + 2 * c) + (2 * c * 9 + 2 * c) + (c * c + c) + (c * c + c)
    convs += (2 * c * c + 2 * c) + (c * c + c)
    scales = 2 * c
    if conditioned:
        h = ModelConfig.mlp_hidden(c)
        cond = (cond_dim * h + h) + (h * 4 * c + 4 * c)
    else:
        cond = 4 * c
    return convs + scales + cond


def count_params(config: ModelConfig) -> int:
    """Closed-form parameter count; must match the instantiated model exactly."""
    w = config.level_widths
    total = 3 * 3 * config.in_channels * w[0] + w[0]  # intro
    counts = list(config.enc_blocks) + [config.bottom_blocks] + list(config.decoder_blocks)
    widths = [w[0], w[1], w[2], w[3], w[2], w[1], w[0]]
    for n_blocks, width in zip(counts, widths):
        total += n_blocks * _block_param_count(width, config.conditioned, config.cond_dim)
    for i in range(3):
        total += 2 * 2 * w[i] * w[i + 1] + w[i + 1]  # downsample convs
        total += w[i + 1] * 2 * w[i + 1] + 2 * w[i + 1]  # upsample convs
    total += 3 * 3 * w[0] * config.in_channels + config.in_channels  # ending
    if config.conditioned and config.n_devices:
        total += config.n_devices * 9
    return total


def _conv_macs(cin: int, cout: int, k: int, oh: int, ow: int, groups: int = 1) -> int:
    return k * k * (cin // groups) * cout * oh * ow


def _block_macs(width: int, h: int, w: int, conditioned: bool, cond_dim: int) -> int:
    c = width
    total = _conv_macs(c, 2 * c, 1, h, w)
    total += _conv_macs(2 * c, 2 * c, 3, h, w, groups=2 * c)
    total += _conv_macs(c, c, 1, 1, 1)  # channel attention on pooled 1x1
    total += _conv_macs(c, c, 1, h, w)
    total += _conv_macs(c, 2 * c, 1, h, w)
    total += _conv_macs(c, c, 1, h, w)
    if conditioned:
        hid = ModelConfig.mlp_hidden(c)
        total += cond_dim * hid + hid * 4 * c  # modulation MLP, once per image
    return total


def count_macs(config: ModelConfig, h: int = 256, w: int = 256) -> int:
    """Multiply-accumulates of convs and linears for one forward at h x w.

    Norms, activations, and bias adds are excluded.
    """
    if h % 8 or w % 8:
        raise ValueError("counting resolution must be divisible by 8")
    cw = config.level_widths
    res = [(h >> i, w >> i) for i in range(4)]
    total = _conv_macs(config.in_channels, cw[0], 3, h, w)  # intro
    counts = list(config.enc_blocks) + [config.bottom_blocks] + list(config.decoder_blocks)
    levels = [0, 1, 2, 3, 2, 1, 0]
    for n_blocks, lvl in zip(counts, levels):
        rh, rw = res[lvl]
        total += n_blocks * _block_macs(cw[lvl], rh, rw, config.conditioned, config.cond_dim)
    for i in range(3):
        rh, rw = res[i + 1]
        total += _conv_macs(cw[i], cw[i + 1], 2, rh, rw)  # downsample
        uh, uw = res[i + 1]
        total += _conv_macs(cw[i + 1], 2 * cw[i + 1], 1, uh, uw)  # upsample
    total += _conv_macs(cw[0], config.in_channels, 3, h, w)  # ending
    return total


# ---------------------------------------------------------------------------
# checkpoint container: magic, JSON header, float32 little-endian data
# ---------------------------------------------------------------------------


def save_checkpoint(model: CPADNet, path, meta: dict | None = None):
    named = model.named_parameters()
    manifest = []
    offset = 0
    blobs = []
    for name, t in named:
        arr = np.ascontiguousarray(t.data, dtype="<f4")
        manifest.append({"name": name, "shape": list(t.shape), "offset": offset})
        blobs.append(arr.tobytes())
        offset += arr.nbytes
    header = json.dumps(
        {"config": model.config.to_dict(), "params": manifest, "meta": meta or {}}
    ).encode("utf-8")
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(struct.pack("<Q", len(header)))
        f.write(header)
        for b in blobs:
            f.write(b)


def load_checkpoint(path, dtype=np.float32) -> tuple[CPADNet, dict]:
    with open(path, "rb") as f:
        magic = f.read(len(CHECKPOINT_MAGIC))
        if magic != CHECKPOINT_MAGIC:
            raise ValueError(f"{path}: not a CPAD1 checkpoint")
        (hlen,) = struct.unpack("<Q", f.read(8))
        header = json.loads(f.read(hlen).decode("utf-8"))
        data = f.read()
    config = ModelConfig.from_dict(header["config"])
    model = CPADNet(config, seed=0, dtype=dtype)
    params = dict(model.named_parameters())
    if set(params) != {m["name"] for m in header["params"]}:
        raise ValueError(f"{path}: parameter manifest does not match architecture")
    for m in header["params"]:
        t = params[m["name"]]
        shape = tuple(m["shape"])
        if t.shape != shape:
            raise ValueError(f"{path}: shape mismatch for {m['name']}: {t.shape} vs {shape}")
        count = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(data, dtype="<f4", count=count, offset=m["offset"]).reshape(shape)
        t.data = arr.astype(dtype)
    return model, header.get("meta", {})
