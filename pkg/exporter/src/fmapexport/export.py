"""Run a pretrained ResNet-50 trunk on images and write FMAP feature files.

The exporter consumes checkpoints from self-supervised pretraining (plain
``state_dict`` files as well as ``{"state_dict": ...}`` containers with
``module.`` / ``backbone.`` prefixes, the layout used by common dense
contrastive-learning releases). Only the convolutional trunk through the
final stage is executed, so projection heads and classifier weights in the
checkpoint are ignored; a checkpoint that does not cover the full trunk is
rejected outright.

Output files use the FMAP container::

    "FMAP" | version u32 | c u32 | h u32 | w u32 | float32 payload

all little-endian, payload channel-major. For a stride-32 backbone on a
size x size input the grid is (size/32) x (size/32): 21 x 21 at the default
672. Writes are atomic (temp file, then rename) and inference runs with a
fixed thread count so repeated exports are bit-identical.
"""

from __future__ import annotations

import logging
import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
import torchvision
from PIL import Image

log = logging.getLogger("fmapexport")

STRIDE = 32
FMAP_MAGIC = b"FMAP"
FMAP_VERSION = 1
_HEADER = struct.Struct("<4sIIII")

IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)

IMAGE_EXTENSIONS = (".png", ".jpg", ".jpeg", ".bmp")


class CheckpointMismatch(Exception):
    """Checkpoint does not provide every trunk parameter."""


@dataclass(frozen=True)
class ExportSpec:
    checkpoint: str
    input_size: int = 672
    batch_size: int = 8
    device: str = "cpu"
    threads: int = 1

    def __post_init__(self):
        if self.input_size % STRIDE != 0:
            raise ValueError(f"input_size must be divisible by {STRIDE}")
        if self.batch_size < 1 or self.threads < 1:
            raise ValueError("batch_size and threads must be >= 1")

    @property
    def grid(self) -> int:
        return self.input_size // STRIDE


def _strip_prefix(key: str) -> str:
    for prefix in ("module.", "backbone."):
        while key.startswith(prefix):
            key = key[len(prefix) :]
    return key


def load_backbone(checkpoint: str | Path, device: str = "cpu") -> torch.nn.Module:
    """ResNet-50 with trunk weights taken from the checkpoint."""
    state = torch.load(checkpoint, map_location="cpu", weights_only=True)
    if isinstance(state, dict) and "state_dict" in state:
        state = state["state_dict"]
    if not isinstance(state, dict):
        raise CheckpointMismatch(f"{checkpoint}: not a state dict")
    state = {_strip_prefix(k): v for k, v in state.items()}

    model = torchvision.models.resnet50(weights=None)
    trunk_keys = {k for k in model.state_dict() if not k.startswith("fc.")}
    missing = trunk_keys - set(state)
    if missing:
        raise CheckpointMismatch(
            f"{checkpoint}: {len(missing)} trunk parameters missing "
            f"(e.g. {sorted(missing)[:3]})"
        )
    usable = {k: v for k, v in state.items() if k in trunk_keys}
    result = model.load_state_dict(usable, strict=False)
    if any(not k.startswith("fc.") for k in result.missing_keys):
        raise CheckpointMismatch(f"{checkpoint}: trunk load left gaps")
    model.eval()
    model.requires_grad_(False)
    return model.to(device)


def _trunk_features(model: torch.nn.Module, batch: torch.Tensor) -> torch.Tensor:
    x = model.conv1(batch)
    x = model.bn1(x)
    x = model.relu(x)
    x = model.maxpool(x)
    x = model.layer1(x)
    x = model.layer2(x)
    x = model.layer3(x)
    return model.layer4(x)


def _load_batch(paths: list[Path], input_size: int) -> torch.Tensor:
    mean = torch.tensor(IMAGENET_MEAN).view(3, 1, 1)
    std = torch.tensor(IMAGENET_STD).view(3, 1, 1)
    tensors = []
    for path in paths:
        with Image.open(path) as img:
            resized = img.convert("RGB").resize(
                (input_size, input_size), Image.Resampling.BILINEAR
            )
        arr = torch.from_numpy(np.asarray(resized).copy()).permute(2, 0, 1).float() / 255.0
        tensors.append((arr - mean) / std)
    return torch.stack(tensors)


def write_fmap(data: np.ndarray, path: Path) -> None:
    """Atomic FMAP write of a (c, h, w) float32 array."""
    c, h, w = data.shape
    blob = _HEADER.pack(FMAP_MAGIC, FMAP_VERSION, c, h, w)
    blob += np.ascontiguousarray(data, dtype="<f4").tobytes()
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(blob)
    os.replace(tmp, path)


def export_features(image_dir: str | Path, out_dir: str | Path, spec: ExportSpec) -> dict:
    """Write one FMAP per readable image; returns a summary of the run."""
    image_dir = Path(image_dir)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    torch.set_num_threads(spec.threads)
    model = load_backbone(spec.checkpoint, spec.device)

    paths = [
        p
        for p in sorted(image_dir.iterdir())
        if p.suffix.lower() in IMAGE_EXTENSIONS and p.is_file()
    ]
    exported = 0
    skipped = []
    pending: list[Path] = []

    def flush(batch_paths: list[Path]) -> None:
        nonlocal exported
        if not batch_paths:
            return
        batch = _load_batch(batch_paths, spec.input_size).to(spec.device)
        with torch.no_grad():
            feats = _trunk_features(model, batch).cpu().numpy()
        for path, fmap in zip(batch_paths, feats):
            if not np.isfinite(fmap).all():
                skipped.append(path.stem)
                log.warning("non-finite features for %s, skipped", path.name)
                continue
            write_fmap(fmap.astype(np.float32), out_dir / f"{path.stem}.fmap")
            exported += 1

    for path in paths:
        try:
            with Image.open(path) as img:
                img.verify()
        except Exception as exc:
            skipped.append(path.stem)
            log.warning("cannot decode %s: %s", path.name, exc)
            continue
        pending.append(path)
        if len(pending) >= spec.batch_size:
            flush(pending)
            pending = []
    flush(pending)

    summary = {"images": len(paths), "exported": exported, "skipped": len(skipped)}
    log.info("export: %(images)d images, %(exported)d exported, %(skipped)d skipped", summary)
    return summary
