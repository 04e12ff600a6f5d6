"""phasegen command line.

Every command accepts ``--config PATH``, ``--seed U64`` and ``--out DIR``;
any other schema key can be given as ``--key value`` and overrides the
config file. Exit codes: 0 success, 1 usage or validation error, 2 runtime
or data error.
"""

import argparse
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .checkpoint import load_checkpoint, save_checkpoint
from .core import from_polar, make_rng
from .kspace import load_mask, make_cartesian_mask, save_mask, zerofill_recon
from .metrics import MetricReport, circular_rmse, dice, hausdorff, image_report, laplacian_unwrap
from .phantom import FOREGROUND_THRESHOLD, PhantomRecord, load_dataset, phantom_dataset, save_dataset
from .pipelines import (
    get_preset,
    naive_phase,
    recon_forward,
    recon_masks,
    sample_phase,
    train_phasegen,
    train_recon,
    undersample,
)
from .tensorio import TensorFormatError, read_tensor, write_loss_csv, write_manifest, write_tensor

log = logging.getLogger("phasegen")

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2
COMMANDS = ("phantom", "train-phasegen", "sample", "naive-phase", "mask", "recon", "metrics",
            "unwrap", "export-png")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser():
    parser = _Parser(prog="phasegen", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", help="flat key = value config file")
    parser.add_argument("--seed", help="unsigned 64-bit seed")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def parse_overrides(tokens):
    """``--key value`` pairs validated against the config schema."""
    values = {}
    i = 0
    while i < len(tokens):
        tok = tokens[i]
        if not tok.startswith("--"):
            raise UsageError(f"unexpected argument {tok!r}")
        key, sep, inline = tok[2:].partition("=")
        key = cfgmod.normalize_key(key)
        if key not in cfgmod.SCHEMA:
            raise UsageError(f"unknown option --{tok[2:].partition('=')[0]}")
        if sep:
            text = inline
            i += 1
        else:
            if i + 1 >= len(tokens):
                raise UsageError(f"--{key} needs a value")
            text = tokens[i + 1]
            i += 2
        values[key] = cfgmod.parse_value(key, text)
    return values


def resolve_config(args, extra):
    file_values = cfgmod.load_config_file(args.config) if args.config else {}
    overrides = parse_overrides(extra)
    for key in ("seed", "out"):
        raw = getattr(args, key)
        if raw is not None:
            overrides[key] = cfgmod.parse_value(key, raw)
    return cfgmod.resolve(file_values, overrides)


def require(cfg, *keys):
    missing = [k for k in keys if cfg.get(k) is None]
    if missing:
        raise UsageError("missing required option(s): " + ", ".join("--" + k.replace("_", "-") for k in missing))


def make_run_dir(cfg, command):
    """Fresh ``<out>/<command>-<timestamp>-seed<seed>`` directory; never reuses an existing one."""
    base = Path(cfg["out"])
    stamp = time.strftime("%Y%m%d-%H%M%S")
    name = f"{command}-{stamp}-seed{cfg['seed']}"
    path = base / name
    suffix = 1
    while path.exists():
        path = base / f"{name}-{suffix}"
        suffix += 1
    path.mkdir(parents=True)
    (path / "config.txt").write_text(cfgmod.format_config(cfg))
    return path


def train_config(cfg, image_size):
    overrides = {k: cfg[k] for k in cfgmod.TRAIN_KEYS if cfg.get(k) is not None}
    return get_preset(cfg["preset"], seed=cfg["seed"], image_size=image_size, **overrides)


def load_image(path):
    """Complex image from a rank-2 tensor or a (3, H, W) phantom record."""
    arr = read_tensor(path)
    if arr.ndim == 3 and arr.shape[0] == 3:
        return PhantomRecord.from_tensor(arr).image
    if arr.ndim != 2:
        raise ValueError(f"{path}: expected an image or phantom record, got shape {arr.shape}")
    return arr


def load_records(directory):
    rows, records = load_dataset(directory)
    if not records:
        raise ValueError(f"{directory}: dataset is empty")
    return rows, records


def write_images(run_dir, sub, ids, images, role="synthetic"):
    target = run_dir / sub
    target.mkdir()
    rows = []
    for rid, img in zip(ids, images):
        write_tensor(target / f"{rid}.cxt", img)
        rows.append((rid, role, f"{rid}.cxt"))
    write_manifest(target / "manifest.tsv", rows)


# --- commands ---

def cmd_phantom(cfg):
    out = Path(cfg["out"])
    if (out / "manifest.tsv").exists():
        raise FileExistsError(f"{out} already holds a dataset; choose a new --out")
    if cfg["n"] < 0 or cfg["size"] < 16:
        raise UsageError("need n >= 0 and size >= 16")
    records, _ = phantom_dataset(cfg["n"], cfg["size"], cfg["seed"])
    save_dataset(out, records)
    print(out)


def cmd_train_phasegen(cfg):
    require(cfg, "data")
    _, records = load_records(cfg["data"])
    images = np.stack([r.image for r in records])
    config = train_config(cfg, images.shape[-1])
    run = make_run_dir(cfg, "train-phasegen")
    result = train_phasegen(images, config)
    write_loss_csv(run / "loss.csv", range(len(result.losses)), result.losses, result.lrs)
    config.diffusion.make_schedule().save(run / "schedule.csv")
    save_checkpoint(run / "checkpoint", result.net, config, {"in_channels": 3})
    print(run)


def cmd_sample(cfg):
    require(cfg, "checkpoint", "data")
    net, config, _ = load_checkpoint(Path(cfg["checkpoint"]) / "checkpoint")
    rows, records = load_records(cfg["data"])
    mags = np.stack([r.magnitude for r in records])
    run = make_run_dir(cfg, "sample")
    out = sample_phase(mags, net, config, make_rng(cfg["seed"], 2))
    ids = [r[0] for r in rows]
    write_images(run, "sampled", ids, from_polar(out))
    lines = ["id,circ_rmse"]
    for rid, rec, phase in zip(ids, records, out.phase):
        fg = rec.foreground
        lines.append(f"{rid},{circular_rmse(phase, rec.true_phase, fg)!r}" if fg.any() else f"{rid},")
    (run / "phase_metrics.csv").write_text("\n".join(lines) + "\n")
    print(run)


def cmd_naive_phase(cfg):
    require(cfg, "data")
    rows, records = load_records(cfg["data"])
    run = make_run_dir(cfg, "naive-phase")
    ids = [r[0] for r in rows]
    images = [naive_phase(rec.magnitude, cfg["sigma"], make_rng(cfg["seed"], 3, i)).to_complex()
              for i, rec in enumerate(records)]
    write_images(run, "naive", ids, images, role="naive")
    print(run)


def cmd_mask(cfg):
    width = cfg["width"] if cfg["width"] is not None else cfg["size"]
    mask = make_cartesian_mask(width, cfg["acceleration"], cfg["center_fraction"], rng=cfg["seed"])
    run = make_run_dir(cfg, "mask")
    save_mask(run / "mask.cxt", mask)
    print(run)


def cmd_recon(cfg):
    require(cfg, "test")
    test_rows, test_records = load_records(cfg["test"])
    images = np.stack([r.image for r in test_records])
    width = images.shape[-1]
    if cfg["sampling_mask"] is not None:
        shared = load_mask(cfg["sampling_mask"])
        masks = [shared] * len(images)
    else:
        masks = recon_masks(len(images), width, cfg["acceleration"], cfg["center_fraction"],
                            seed=cfg["seed"] + 1)
    masked, _ = undersample(images, masks)
    run = make_run_dir(cfg, "recon")
    if cfg["baseline"] == "zerofill":
        recon = from_polar(zerofill_recon(masked))
    else:
        require(cfg, "data")
        _, train_records = load_records(cfg["data"])
        train_images = np.stack([r.image for r in train_records])
        config = train_config(cfg, width)
        train_masks = recon_masks(len(train_images), width, cfg["acceleration"], cfg["center_fraction"],
                                  cfg["seed"])
        result = train_recon(train_images, train_masks, config, redraw_masks=cfg["redraw_masks"],
                             acceleration=cfg["acceleration"], center_fraction=cfg["center_fraction"])
        write_loss_csv(run / "loss.csv", range(len(result.losses)), result.losses, result.lrs)
        save_checkpoint(run / "checkpoint", result.net, config, {"in_channels": 1, "data_consistency": True})
        recon = recon_forward(result.net, masked, masks)
    ids = [r[0] for r in test_rows]
    write_images(run, "recon", ids, recon, role="recon")
    lines = ["id," + MetricReport.HEADER]
    for rid, ref, pred in zip(ids, images, recon):
        lines.append(f"{rid},{image_report(np.abs(ref), np.abs(pred)).to_csv_row()}")
    (run / "metrics.csv").write_text("\n".join(lines) + "\n")
    print(run)


def _load_mask_tensor(path):
    arr = read_tensor(path).real
    if not np.isin(arr, (0.0, 1.0)).all():
        raise ValueError(f"{path}: mask values must be 0 or 1")
    return arr > 0.5


def cmd_metrics(cfg):
    require(cfg, "ref", "pred")
    ref, pred = load_image(cfg["ref"]), load_image(cfg["pred"])
    if ref.shape != pred.shape:
        raise ValueError(f"shape mismatch: ref {ref.shape} vs pred {pred.shape}")
    report = image_report(np.abs(ref), np.abs(pred))
    fg = np.abs(ref) > FOREGROUND_THRESHOLD
    if fg.any():
        report.circ_rmse = circular_rmse(np.angle(ref), np.angle(pred), fg)
    if cfg["mask"] is not None:
        ref_mask = _load_mask_tensor(cfg["mask"])
        if cfg["pred_mask"] is not None:
            pred_mask = _load_mask_tensor(cfg["pred_mask"])
        else:
            pred_mask = np.abs(pred) > FOREGROUND_THRESHOLD
        report.dsc = dice(ref_mask, pred_mask)
        report.hd = hausdorff(ref_mask, pred_mask)
    print(MetricReport.HEADER)
    print(report.to_csv_row())


def cmd_unwrap(cfg):
    require(cfg, "input")
    img = load_image(cfg["input"])
    unwrapped = laplacian_unwrap(np.angle(img).astype(np.float64))
    run = make_run_dir(cfg, "unwrap")
    write_tensor(run / "unwrapped.cxt", unwrapped.astype(np.float32))
    print(run)


def render_png(img, kind):
    """8-bit RGB array: grayscale magnitude or a cyclic hue map of the phase."""
    from PIL import Image

    if kind == "magnitude":
        mag = np.abs(img).astype(np.float64)
        lo, hi = mag.min(), mag.max()
        # a constant image has no range to stretch; render it mid-gray
        gray = np.full_like(mag, 0.5) if hi == lo else (mag - lo) / (hi - lo)
        return Image.fromarray(np.round(gray * 255).astype(np.uint8), mode="L").convert("RGB")
    phase = np.angle(img).astype(np.float64)
    phase = np.where(phase > np.pi, np.pi, phase)
    # hue is periodic in the phase, so -pi and +pi get the same colour
    hue = np.mod((phase + np.pi) / (2 * np.pi), 1.0)
    hsv = np.stack([np.round(hue * 256) % 256, np.full_like(hue, 255), np.full_like(hue, 255)], axis=-1)
    return Image.fromarray(hsv.astype(np.uint8), mode="HSV").convert("RGB")


def cmd_export_png(cfg):
    require(cfg, "input", "kind")
    img = load_image(cfg["input"])
    out_dir = Path(cfg["out"])
    out_dir.mkdir(parents=True, exist_ok=True)
    target = out_dir / f"{Path(cfg['input']).stem}_{cfg['kind']}.png"
    if target.exists():
        raise FileExistsError(f"{target} exists; outputs are never overwritten")
    render_png(img, cfg["kind"]).save(target)
    print(target)


HANDLERS = {
    "phantom": cmd_phantom,
    "train-phasegen": cmd_train_phasegen,
    "sample": cmd_sample,
    "naive-phase": cmd_naive_phase,
    "mask": cmd_mask,
    "recon": cmd_recon,
    "metrics": cmd_metrics,
    "unwrap": cmd_unwrap,
    "export-png": cmd_export_png,
}


def _thread_limit():
    raw = os.environ.get("PHASEGEN_THREADS")
    if raw is None or raw == "":
        return None
    try:
        value = int(raw)
    except ValueError:
        raise UsageError(f"PHASEGEN_THREADS must be a positive integer, got {raw!r}") from None
    if value < 1:
        raise UsageError(f"PHASEGEN_THREADS must be a positive integer, got {raw!r}")
    return value


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args, extra = build_parser().parse_known_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        cfg = resolve_config(args, extra)
        limit = _thread_limit()
    except (UsageError, cfgmod.ConfigError) as exc:
        print(f"phasegen: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        from threadpoolctl import threadpool_limits

        with threadpool_limits(limits=limit):
            HANDLERS[args.command](cfg)
    except UsageError as exc:
        print(f"phasegen: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        name = exc.filename if exc.filename else exc
        print(f"phasegen: error: file not found: {name}", file=sys.stderr)
        return EXIT_RUNTIME
    except (OSError, TensorFormatError, ValueError, KeyError, FloatingPointError) as exc:
        print(f"phasegen: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
