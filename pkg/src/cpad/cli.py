"""Command-line interface: encode / synth / gradcheck / train / eval / sweep / serve."""

from __future__ import annotations

import csv
import dataclasses
import json
from pathlib import Path

import click
import numpy as np
from PIL import Image

from . import camera, metrics, noise, plots
from .camera import CameraParams, EncoderRanges, ParamRange
from .net import ModelConfig, load_checkpoint
from .train import TrainConfig, load_dataset, train


def _load_ranges(path) -> EncoderRanges:
    if path is None:
        return camera.DEFAULT_RANGES
    with open(path) as f:
        d = json.load(f)
    return EncoderRanges(
        iso=ParamRange(*d.get("iso", (50.0, 25600.0))),
        shutter=ParamRange(*d.get("shutter", (0.1, 8000.0))),
        f_number=ParamRange(*d.get("fnum", (1.0, 22.0))),
    )


@click.group()
def main():
    """Controllable denoising steered by camera parameters."""


@main.command()
@click.option("--iso", type=float, required=True)
@click.option("--shutter", type=float, required=True, help="Shutter speed in s^-1.")
@click.option("--fnum", type=float, default=None, help="F-number (aperture ratio).")
@click.option("--device", type=int, default=None, help="Device code for fixed-aperture cameras.")
@click.option("--devices", type=int, default=None, help="Device count (defaults to device+1).")
@click.option("--ckpt", type=click.Path(exists=True), default=None, help="Pull the trained device embedding from a checkpoint.")
@click.option("--ranges", "ranges_path", type=click.Path(exists=True), default=None, help='JSON {"iso":[lo,hi],"shutter":[lo,hi],"fnum":[lo,hi]}.')
def encode(iso, shutter, fnum, device, devices, ckpt, ranges_path):
    """Print the 27-value condition vector as JSON."""
    ranges = _load_ranges(ranges_path)
    embedding = None
    if device is not None:
        if ckpt:
            model, _ = load_checkpoint(ckpt)
            if model.device_embedding is None:
                raise click.ClickException("checkpoint has no device embedding")
            embedding = camera.DeviceEmbedding(model.device_embedding.data)
        else:
            # untrained fallback: zero rows squash to a flat 0.5 block
            embedding = camera.DeviceEmbedding.zeros(devices if devices is not None else device + 1)
    try:
        params = CameraParams(iso=iso, shutter_speed=shutter, f_number=fnum, device_code=device)
        vec = camera.encode(params, ranges, embedding)
    except ValueError as e:
        raise click.ClickException(str(e))
    click.echo(json.dumps(vec.values.tolist()))


@main.command()
@click.option("--n", type=int, required=True)
@click.option("--patch", type=int, default=32)
@click.option("--seed", type=int, default=0)
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--mode", type=click.Choice(["correlated", "independent"]), default="correlated")
@click.option("--iso-lo", type=float, default=100.0)
@click.option("--iso-hi", type=float, default=6400.0)
def synth(n, patch, seed, out_dir, mode, iso_lo, iso_hi):
    """Write a synthetic paired dataset: clean/, noisy/, meta.jsonl."""
    out = Path(out_dir)
    (out / "clean").mkdir(parents=True, exist_ok=True)
    (out / "noisy").mkdir(parents=True, exist_ok=True)
    calib = noise.dataset_calib(iso_lo, iso_hi)
    items = noise.make_dataset(n, patch=patch, calib=calib, seed=seed, mode=mode)
    with open(out / "meta.jsonl", "w") as f:
        for i, (noisy_img, clean_img, params) in enumerate(items):
            for sub, img in (("clean", clean_img), ("noisy", noisy_img)):
                arr = np.round(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)
                Image.fromarray(arr).save(out / sub / f"{i:05d}.png")
            np_ = noise.params_to_noise(params, calib)
            f.write(
                json.dumps(
                    {
                        "index": i,
                        "iso": params.iso,
                        "shutter_speed": params.shutter_speed,
                        "f_number": params.f_number,
                        "lambda_read": np_.lambda_read,
                        "lambda_shot": np_.lambda_shot,
                        "seed": noise.item_seed(seed, i),
                    }
                )
                + "\n"
            )
    click.echo(f"wrote {n} pairs to {out}")


@main.command()
@click.option("--eps", type=float, default=1e-3)
@click.option("--rtol", type=float, default=1e-4)
@click.option("--net-sample", type=int, default=24, help="Coordinates checked per tensor in the network check.")
def gradcheck(eps, rtol, net_sample):
    """Finite-difference verification of every op and a tiny end-to-end network."""
    from .autodiff import format_table, op_suite
    from .testing import network_gradcheck

    results = op_suite(eps=eps)
    results += network_gradcheck(eps=eps, sample=net_sample)
    click.echo(format_table(results, rtol))
    worst = max(r.max_rel_err for r in results)
    if worst >= rtol:
        raise click.ClickException(f"gradcheck failed: max rel error {worst:.3e} >= {rtol:.1e}")
    click.echo(f"all {len(results)} checks passed (max rel error {worst:.3e})")


def _split_config(raw: dict) -> tuple[TrainConfig, ModelConfig]:
    raw = dict(raw)
    preset = raw.pop("preset", "desk")
    if preset == "desk":
        tc, mc = TrainConfig.desk(), ModelConfig.desk()
    elif preset == "paper":
        tc, mc = TrainConfig.paper(), ModelConfig.paper()
    else:
        raise click.ClickException(f"unknown preset {preset!r}")
    t_fields = {f.name for f in dataclasses.fields(TrainConfig)}
    m_fields = {f.name for f in dataclasses.fields(ModelConfig)}
    t_kw, m_kw = {}, {}
    for k, v in raw.items():
        if k in t_fields:
            t_kw[k] = v
        elif k in m_fields:
            m_kw[k] = v if not isinstance(v, list) else tuple(v)
        else:
            raise click.ClickException(f"unknown config field {k!r}")
    return dataclasses.replace(tc, **t_kw), dataclasses.replace(mc, **m_kw)


@main.command(name="train")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--data", "data_dir", type=click.Path(exists=True), required=True)
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--baseline", is_flag=True, help="Train the unconditioned baseline.")
def train_cmd(config_path, data_dir, out_dir, baseline):
    """Train on a dataset directory (synthetic, pairs.tsv, or scene-directory layout)."""
    raw = {}
    if config_path:
        with open(config_path) as f:
            raw = json.load(f)
    train_cfg, model_cfg = _split_config(raw)
    if baseline:
        train_cfg = dataclasses.replace(train_cfg, conditioned=False)
    dataset = load_dataset(data_dir)
    if not dataset:
        raise click.ClickException(f"no samples found under {data_dir}")
    result = train(train_cfg, model_cfg, dataset, out_dir=out_dir)
    plots.save_loss_curve(result.log, Path(out_dir) / "loss_curve.png")
    click.echo(
        f"trained {train_cfg.iters} iters on {len(dataset)} samples; "
        f"final loss {result.log[-1]['loss']:.5f}"
        + (f", val PSNR {result.val_psnr:.2f} dB" if result.val_psnr else "")
    )
    click.echo(f"checkpoint: {result.checkpoint_path}")


@main.command(name="eval")
@click.option("--ckpt", type=click.Path(exists=True), required=True)
@click.option("--data", "data_dir", type=click.Path(exists=True), required=True)
@click.option("--out", "out_path", type=click.Path(), required=True)
@click.option("--limit", type=int, default=None)
def eval_cmd(ckpt, data_dir, out_path, limit):
    """Evaluate a checkpoint; writes report.json, per-image CSV, and figures."""
    model, _ = load_checkpoint(ckpt)
    dataset = load_dataset(data_dir)
    if limit:
        dataset = dataset[:limit]
    report = metrics.evaluate(model, dataset)
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with open(out_path, "w") as f:
        json.dump(report.to_dict(), f, indent=2)
    csv_path = out_path.with_suffix(".csv")
    if report.per_image:
        with open(csv_path, "w", newline="") as f:
            writer = csv.DictWriter(f, fieldnames=list(report.per_image[0].keys()))
            writer.writeheader()
            writer.writerows(report.per_image)
    figures = plots.save_eval_figures(report, out_path.parent)
    click.echo(json.dumps(report.aggregates, indent=2))
    click.echo(f"report: {out_path}; csv: {csv_path}; figures: {[str(p) for p in figures]}")


@main.command(name="sweep")
@click.option("--ckpt", type=click.Path(exists=True), required=True)
@click.option("--image", "image_path", type=click.Path(exists=True), required=True)
@click.option("--axis", type=click.Choice(metrics.SWEEP_AXES), default="iso")
@click.option("--grid", type=str, default="100,400,1600,6400", help="Comma-separated values.")
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--iso", type=float, default=800.0, help="Base ISO (overridden by a sidecar JSON).")
@click.option("--shutter", type=float, default=30.0)
@click.option("--fnum", type=float, default=2.0)
def sweep_cmd(ckpt, image_path, axis, grid, out_dir, iso, shutter, fnum):
    """Sweep one parameter on one image; writes per-step PNGs, records, a figure."""
    model, _ = load_checkpoint(ckpt)
    img = np.asarray(Image.open(image_path).convert("RGB"), dtype=np.float32) / 255.0
    sidecar = Path(image_path).with_suffix(".json")
    if sidecar.exists():
        with open(sidecar) as f:
            side = json.load(f)
        iso = side.get("iso", iso)
        shutter = side.get("shutter_speed", shutter)
        fnum = side.get("f_number", fnum)
    base = CameraParams(iso=iso, shutter_speed=shutter, f_number=fnum)
    values = [float(v) for v in grid.split(",")]
    records, outputs = metrics.sweep(model, img, base, axis, values, return_outputs=True)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for rec, arr in zip(records, outputs):
        png = out / f"{axis}_{rec.value:g}.png"
        Image.fromarray(np.round(np.clip(arr, 0, 1) * 255).astype(np.uint8)).save(png)
        rows.append(rec.to_dict())
    with open(out / "records.json", "w") as f:
        json.dump(rows, f, indent=2)
    with open(out / "records.csv", "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)
    plots.save_sweep_figure(records, out / "sweep_metrics.png")
    click.echo(f"wrote {len(records)} steps to {out}")


@main.command(name="serve")
@click.option("--ckpt", type=click.Path(exists=True), required=True)
@click.option("--port", type=int, default=8700)
@click.option("--bind", type=str, default="127.0.0.1")
@click.option("--static", "static_dir", type=click.Path(exists=True), default=None, help="Static assets to serve at / (e.g. the control panel build).")
def serve_cmd(ckpt, port, bind, static_dir):
    """Serve the denoise/sweep API over HTTP."""
    from .service import serve

    serve(ckpt, port=port, bind=bind, static_dir=static_dir)


if __name__ == "__main__":
    main()
