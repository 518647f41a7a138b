"""Dataset ingestion, patch cropping, and the seeded training loop."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from PIL import Image

from . import camera, metrics
from .autodiff import Adam, Tensor, cosine_lr, no_grad, ops
from .camera import CameraParams
from .net import CPADNet, ModelConfig, save_checkpoint


@dataclass(frozen=True)
class TrainConfig:
    iters: int = 3000
    batch: int = 8
    patch: int = 32
    stride: int = 32
    lr0: float = 2e-4
    lr_min: float = 1e-6
    seed: int = 0
    conditioned: bool = True
    val_frac: float = 0.1
    val_interval: int = 250
    ckpt_interval: int = 1000
    augment: bool = True

    def __post_init__(self):
        if self.iters < 0 or self.batch < 1 or self.patch < 8:
            raise ValueError("iters >= 0, batch >= 1, patch >= 8 required")
        if not (0 < self.stride <= self.patch):
            raise ValueError("stride must satisfy 0 < stride <= patch")

    @classmethod
    def desk(cls, **kw) -> "TrainConfig":
        return cls(**kw)

    @classmethod
    def paper(cls, **kw) -> "TrainConfig":
        base = dict(iters=200_000, batch=8, patch=256, stride=196)
        base.update(kw)
        return cls(**base)


@dataclass
class PairedSample:
    noisy: np.ndarray  # (H, W, C) float32 in [0, 1]
    clean: np.ndarray
    params: CameraParams

    def __post_init__(self):
        if self.noisy.shape != self.clean.shape:
            raise ValueError(f"noisy {self.noisy.shape} != clean {self.clean.shape}")


class TrainingDiverged(RuntimeError):
    def __init__(self, iteration: int, lr: float, recent_losses):
        self.iteration = iteration
        self.lr = lr
        self.recent_losses = list(recent_losses)
        super().__init__(
            f"non-finite loss at iteration {iteration} (lr={lr:.3e}); "
            f"recent losses: {self.recent_losses}"
        )


def _as_sample(item) -> PairedSample:
    if isinstance(item, PairedSample):
        return item
    noisy, clean, params = item
    return PairedSample(np.asarray(noisy, np.float32), np.asarray(clean, np.float32), params)


def _origins(dim: int, patch: int, stride: int) -> list[int]:
    """Top-left origins {0, stride, 2*stride, ...} with the last patch flush."""
    if dim < patch:
        raise ValueError(f"image dim {dim} smaller than patch {patch}")
    out = list(range(0, dim - patch + 1, stride))
    if out[-1] != dim - patch:
        out.append(dim - patch)
    return out


def crop_patches(noisy: np.ndarray, clean: np.ndarray, patch: int, stride: int):
    """Aligned overlapping crops of a noisy/clean pair."""
    if noisy.shape != clean.shape:
        raise ValueError(f"pair shapes differ: {noisy.shape} vs {clean.shape}")
    h, w = noisy.shape[:2]
    pairs = []
    for y in _origins(h, patch, stride):
        for x in _origins(w, patch, stride):
            pairs.append((noisy[y : y + patch, x : x + patch], clean[y : y + patch, x : x + patch]))
    return pairs


def _load_image(path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.float32) / 255.0


def load_sid_style(root) -> list[PairedSample]:
    """DSLR-style layout: pairs.tsv with noisy/clean paths and capture settings.

    Columns: noisy_path, clean_path, iso, exposure_time_s, f_number.  The
    shutter speed is the reciprocal of the exposure time.
    """
    root = Path(root)
    tsv = root / "pairs.tsv"
    if not tsv.exists():
        return []
    samples = []
    with open(tsv, newline="") as f:
        for lineno, row in enumerate(csv.reader(f, delimiter="\t"), start=1):
            if not row or (lineno == 1 and row[0].strip().lower() == "noisy_path"):
                continue
            try:
                noisy_path, clean_path, iso, exposure, fnum = row
                params = CameraParams(
                    iso=float(iso),
                    shutter_speed=1.0 / float(exposure),
                    f_number=float(fnum),
                )
            except (ValueError, ZeroDivisionError) as e:
                raise ValueError(f"{tsv}: malformed row at line {lineno}: {e}") from None
            samples.append(
                PairedSample(_load_image(root / noisy_path), _load_image(root / clean_path), params)
            )
    return samples


DEFAULT_SIDD_FORMAT = "{scene}_{instance}_{camera}_{iso}_{shutter}_{temp}_{brightness}"


def parse_sidd_dirname(name: str, camera_codes: dict, fmt: str = DEFAULT_SIDD_FORMAT) -> CameraParams:
    fields = fmt.strip("{}").split("}_{")
    parts = name.split("_")
    if len(parts) != len(fields):
        raise ValueError(f"directory name {name!r} does not match format {fmt!r}")
    rec = dict(zip(fields, parts))
    cam = rec["camera"]
    if cam not in camera_codes:
        raise ValueError(f"unknown camera {cam!r}; known: {sorted(camera_codes)}")
    return CameraParams(
        iso=float(rec["iso"]),
        shutter_speed=float(rec["shutter"]),
        device_code=camera_codes[cam],
    )


def load_sidd_style(
    root,
    camera_codes: dict | None = None,
    fmt: str = DEFAULT_SIDD_FORMAT,
) -> list[PairedSample]:
    """Smartphone-style layout: one directory per scene instance, named with
    the capture settings; images inside match *NOISY*/*GT* (or noisy*/clean*).

    camera_codes maps camera names to device indices; when omitted, distinct
    camera tokens are enumerated in sorted order.
    """
    root = Path(root)
    dirs = sorted(d for d in root.iterdir() if d.is_dir()) if root.exists() else []
    if camera_codes is None:
        field_names = fmt.strip("{}").split("}_{")
        cam_pos = field_names.index("camera")
        cams = sorted({d.name.split("_")[cam_pos] for d in dirs if len(d.name.split("_")) == len(field_names)})
        camera_codes = {c: i for i, c in enumerate(cams)}
    samples = []
    for d in dirs:
        params = parse_sidd_dirname(d.name, camera_codes, fmt)
        noisy_files = sorted(p for p in d.iterdir() if "NOISY" in p.name.upper() or p.name.lower().startswith("noisy"))
        clean_files = sorted(
            p for p in d.iterdir() if "GT" in p.name.upper() or p.name.lower().startswith("clean")
        )
        if len(noisy_files) != len(clean_files):
            raise ValueError(f"{d}: {len(noisy_files)} noisy vs {len(clean_files)} clean images")
        for np_, cp in zip(noisy_files, clean_files):
            samples.append(PairedSample(_load_image(np_), _load_image(cp), params))
    return samples


def load_synth_style(root) -> list[PairedSample]:
    """The layout written by `cpad synth`: clean/, noisy/, meta.jsonl."""
    root = Path(root)
    meta = root / "meta.jsonl"
    if not meta.exists():
        return []
    samples = []
    with open(meta) as f:
        for line in f:
            rec = json.loads(line)
            idx = rec["index"]
            params = CameraParams(
                iso=rec["iso"],
                shutter_speed=rec["shutter_speed"],
                f_number=rec.get("f_number"),
                device_code=rec.get("device_code"),
            )
            noisy = _load_image(root / "noisy" / f"{idx:05d}.png")
            clean = _load_image(root / "clean" / f"{idx:05d}.png")
            samples.append(PairedSample(noisy, clean, params))
    return samples


def load_dataset(root) -> list[PairedSample]:
    """Detect the on-disk layout and load it."""
    root = Path(root)
    if (root / "meta.jsonl").exists():
        return load_synth_style(root)
    if (root / "pairs.tsv").exists():
        return load_sid_style(root)
    return load_sidd_style(root)


@dataclass
class TrainResult:
    model: CPADNet
    log: list
    checkpoint_path: str | None
    val_psnr: float | None


def _prepare_pool(dataset, patch, stride):
    pool = []
    for item in dataset:
        s = _as_sample(item)
        h, w = s.noisy.shape[:2]
        if (h, w) == (patch, patch):
            pool.append(s)
        else:
            for npatch, cpatch in crop_patches(s.noisy, s.clean, patch, stride):
                pool.append(PairedSample(npatch, cpatch, s.params))
    return pool


def _batch_tensors(samples, flips, dtype):
    xs, ys = [], []
    for s, (fh, fv) in zip(samples, flips):
        noisy, clean = s.noisy, s.clean
        if fh:
            noisy, clean = noisy[:, ::-1], clean[:, ::-1]
        if fv:
            noisy, clean = noisy[::-1], clean[::-1]
        xs.append(np.ascontiguousarray(noisy.transpose(2, 0, 1)))
        ys.append(np.ascontiguousarray(clean.transpose(2, 0, 1)))
    return (
        Tensor(np.stack(xs).astype(dtype)),
        Tensor(np.stack(ys).astype(dtype)),
    )


def _val_psnr(model, val_pool, ranges):
    if not val_pool:
        return None
    total = 0.0
    with no_grad():
        for s in val_pool:
            x = Tensor(s.noisy.transpose(2, 0, 1)[None].astype(model.dtype))
            v = model.encode_condition([s.params], ranges) if model.config.conditioned else None
            out = model.forward(x, v, training=False)
            total += metrics.psnr(out.data[0].transpose(1, 2, 0), s.clean)
    return total / len(val_pool)


def train(
    config: TrainConfig,
    model_config: ModelConfig,
    dataset,
    out_dir=None,
    ranges: camera.EncoderRanges = camera.DEFAULT_RANGES,
) -> TrainResult:
    """Run the seeded training loop; (seed, config, dataset) fix the result bitwise.

    Per iteration: sample a batch, encode the condition vectors (conditioned
    mode), forward, L1 loss, backward, Adam step at the cosine-annealed rate.
    Aborts with a diagnostic on non-finite loss.
    """
    model_config = replace(model_config, conditioned=config.conditioned)
    if not dataset:
        raise ValueError("dataset must be non-empty")
    pool = _prepare_pool(dataset, config.patch, config.stride)

    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([config.seed, 0x7A1])))
    order = rng.permutation(len(pool))
    n_val = int(len(pool) * config.val_frac)
    val_pool = [pool[i] for i in order[len(pool) - n_val :]] if n_val else []
    train_pool = [pool[i] for i in order[: len(pool) - n_val]]
    if not train_pool:
        raise ValueError("no training samples left after the validation split")

    model = CPADNet(model_config, seed=config.seed)
    optim = Adam(model.parameters(), lr=config.lr0)
    log = []
    out_dir = Path(out_dir) if out_dir is not None else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)

    recent = []
    final_val = None
    for it in range(config.iters):
        lr = cosine_lr(it, config.iters, config.lr0, config.lr_min)
        idx = rng.integers(0, len(train_pool), size=config.batch)
        batch = [train_pool[i] for i in idx]
        if config.augment:
            flips = [(bool(a), bool(b)) for a, b in rng.integers(0, 2, size=(config.batch, 2))]
        else:
            flips = [(False, False)] * config.batch
        x, target = _batch_tensors(batch, flips, model.dtype)
        v = model.encode_condition([s.params for s in batch], ranges) if config.conditioned else None

        out = model.forward(x, v, training=True, dropout_seed=config.seed * 2654435761 + it)
        loss = ops.l1_loss(out, target)
        loss_val = float(loss.data)
        if not math.isfinite(loss_val):
            raise TrainingDiverged(it, lr, recent[-10:])
        recent.append(loss_val)

        optim.zero_grad()
        loss.backward()
        optim.step(lr=lr)

        entry = {"iter": it, "lr": lr, "loss": loss_val}
        if val_pool and (it % config.val_interval == 0 or it == config.iters - 1):
            entry["val_psnr"] = _val_psnr(model, val_pool, ranges)
            final_val = entry["val_psnr"]
        log.append(entry)

        if out_dir is not None and config.ckpt_interval and (it + 1) % config.ckpt_interval == 0:
            save_checkpoint(model, out_dir / f"checkpoint_{it + 1:06d}.cpad", meta={"iter": it + 1})

    ckpt_path = None
    if out_dir is not None:
        ckpt_path = str(out_dir / "checkpoint_final.cpad")
        save_checkpoint(model, ckpt_path, meta={"iter": config.iters, "seed": config.seed})
        with open(out_dir / "metrics.jsonl", "w") as f:
            for entry in log:
                f.write(json.dumps(entry) + "\n")
    return TrainResult(model=model, log=log, checkpoint_path=ckpt_path, val_psnr=final_val)
