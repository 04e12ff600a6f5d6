"""Network checkpoints: one CXT1 tensor per parameter plus a manifest.

Manifest lines are ``name<TAB>shape<TAB>file`` with the shape written as
comma-separated dims. Real parameters (PReLU slopes) are stored in the real
part, which is exact for float32.
"""

from dataclasses import fields
from pathlib import Path

from .cvnn import CvUNet
from .pipelines import TrainConfig
from .tensorio import read_tensor, write_tensor

MANIFEST = "manifest.tsv"
CONFIG = "train_config.txt"


def save_checkpoint(directory, net, config, extra=None):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=False)
    lines = []
    for name, p in net.named_params():
        fname = f"{name}.cxt"
        write_tensor(directory / fname, p)
        lines.append(f"{name}\t{','.join(map(str, p.shape))}\t{fname}\n")
    (directory / MANIFEST).write_text("".join(lines))
    cfg_lines = [f"{f.name} = {getattr(config, f.name)!r}\n" for f in fields(config)]
    for key, value in (extra or {}).items():
        cfg_lines.append(f"{key} = {value!r}\n")
    (directory / CONFIG).write_text("".join(cfg_lines))
    return directory


def _literal(text):
    text = text.strip()
    if text == "None":
        return None
    if text in ("True", "False"):
        return text == "True"
    if text[:1] in "'\"":
        return text[1:-1]
    try:
        return int(text)
    except ValueError:
        return float(text)


def read_checkpoint_config(directory):
    values = {}
    for line in (Path(directory) / CONFIG).read_text().splitlines():
        if line.strip():
            key, value = line.split("=", 1)
            values[key.strip()] = _literal(value)
    return values


def load_checkpoint(directory):
    """Rebuild the network saved in ``directory``; returns (net, TrainConfig, extra values)."""
    directory = Path(directory)
    if not (directory / MANIFEST).exists():
        raise FileNotFoundError(f"no checkpoint manifest at {directory / MANIFEST}")
    values = read_checkpoint_config(directory)
    names = {f.name for f in fields(TrainConfig)}
    config = TrainConfig(**{k: v for k, v in values.items() if k in names})
    extra = {k: v for k, v in values.items() if k not in names}
    in_channels = extra.get("in_channels", 3)
    dc = bool(extra.get("data_consistency", False))
    net = CvUNet(config.unet_config(in_channels=in_channels, residual_input=dc, data_consistency=dc))
    state = {}
    for line in (directory / MANIFEST).read_text().splitlines():
        if not line.strip():
            continue
        name, shape, fname = line.split("\t")
        arr = read_tensor(directory / fname)
        expected = tuple(int(d) for d in shape.split(",") if d)
        if arr.shape != expected:
            raise ValueError(f"{directory / fname}: shape {arr.shape} does not match manifest {expected}")
        state[name] = arr
    net.load_state_dict(state)
    return net, config, extra
