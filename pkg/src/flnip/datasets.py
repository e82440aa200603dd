"""Corpus loaders and a synthetic grating generator."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from flnip.errors import EmptyCorpus, FlnipError, UndecodableFile
from flnip.pixelgrid import GrayImage, decode_pgm, encode_pgm

log = logging.getLogger(__name__)

IMAGE_SUFFIXES = (".pgm",)
LABELINGS = ("folder", "prefix")


@dataclass(frozen=True)
class CorpusSpec:
    root: Path
    labeling: str = "folder"  # "folder" or "prefix"
    tile: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "root", Path(self.root))
        if self.labeling not in LABELINGS:
            raise ValueError(f"labeling must be one of {LABELINGS}, got {self.labeling!r}")
        if self.tile is not None and self.tile < 3:
            raise ValueError("tile size must be >= 3")


@dataclass(frozen=True)
class SynthSpec:
    class_count: int = 10
    samples_per_class: int = 20
    image_size: int = 64
    noise_sigma: float = 20.0
    rng_seed: int = 42

    def __post_init__(self):
        if self.class_count < 2:
            raise ValueError("class_count must be >= 2")
        if self.samples_per_class < 2:
            raise ValueError("samples_per_class must be >= 2")
        if self.image_size < 16:
            raise ValueError("image_size must be >= 16")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be nonnegative")


def category_for(rel: Path, labeling: str) -> str:
    if labeling == "folder":
        return rel.parts[0] if len(rel.parts) > 1 else ""
    return rel.stem.split("_", 1)[0]


def tiles(image: GrayImage, size: int) -> list[tuple[int, int, GrayImage]]:
    """Non-overlapping ``size`` x ``size`` tiles in row-major order; ragged edges are dropped."""
    px = image.pixels
    out = []
    for r in range(image.height // size):
        for c in range(image.width // size):
            out.append((r, c, GrayImage(px[r * size : (r + 1) * size, c * size : (c + 1) * size])))
    return out


def load_corpus(spec: CorpusSpec) -> list[tuple[str, str, GrayImage]]:
    """Scan ``spec.root`` for PGM files in lexicographic path order.

    Files that fail to decode are logged and skipped; the load only fails if
    nothing usable remains.
    """
    root = spec.root
    if not root.is_dir():
        raise EmptyCorpus(f"corpus root {root} is not a directory")
    paths = sorted(
        (p for p in root.rglob("*") if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES),
        key=lambda p: p.relative_to(root).as_posix(),
    )
    if not paths:
        raise EmptyCorpus(f"no .pgm files under {root}")

    items = []
    failures = []
    for path in paths:
        rel = path.relative_to(root)
        category = category_for(rel, spec.labeling)
        if not category:
            log.warning("skipping %s: no class folder", rel.as_posix())
            continue
        try:
            image = decode_pgm(path.read_bytes())
        except (FlnipError, OSError) as exc:
            log.warning("cannot decode %s: %s", rel.as_posix(), exc)
            failures.append(rel.as_posix())
            continue
        image_id = rel.as_posix()
        if spec.tile is None:
            items.append((image_id, category, image))
            continue
        pieces = tiles(image, spec.tile)
        if not pieces:
            log.warning("%s is smaller than one %d-pixel tile", image_id, spec.tile)
        for r, c, piece in pieces:
            items.append((f"{image_id}#{r}_{c}", category, piece))

    if not items:
        if failures:
            raise UndecodableFile(f"none of {len(failures)} files could be decoded, first: {failures[0]}")
        raise EmptyCorpus(f"no labeled images under {root}")
    return items


def grating(class_index: int, class_count: int, size: int) -> np.ndarray:
    """Unquantized sinusoidal grating in [0, 255] for one class."""
    theta = class_index * math.pi / class_count
    freq = 2 + class_index % 5
    y, x = np.mgrid[0:size, 0:size].astype(np.float64)
    phase = 2 * math.pi * freq * (x * math.cos(theta) + y * math.sin(theta)) / size
    return 127.5 + 127.5 * np.sin(phase)


def generate_synthetic(spec: SynthSpec) -> list[tuple[str, str, GrayImage]]:
    rng = np.random.default_rng(spec.rng_seed)
    cw = len(str(spec.class_count - 1))
    sw = len(str(spec.samples_per_class - 1))
    items = []
    for c in range(spec.class_count):
        base = grating(c, spec.class_count, spec.image_size)
        category = f"class_{c:0{cw}d}"
        for s in range(spec.samples_per_class):
            noisy = base
            if spec.noise_sigma > 0:
                noisy = base + rng.normal(0.0, spec.noise_sigma, base.shape)
            pixels = np.clip(np.rint(noisy), 0, 255).astype(np.uint8)
            items.append((f"synth_{c:0{cw}d}_{s:0{sw}d}", category, GrayImage(pixels)))
    return items


def write_corpus(items, out_dir) -> list[Path]:
    """Write ``(id, category, image)`` triples as ``out_dir/<category>/<id>.pgm``."""
    out_dir = Path(out_dir)
    written = []
    for image_id, category, image in items:
        path = out_dir / category / f"{image_id}.pgm"
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(encode_pgm(image))
        written.append(path)
    return written
