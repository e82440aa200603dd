"""Grayscale rasters, the PGM codec and color-to-gray conversion.

PGM (P2/P5) is the only on-disk format; other formats need external
conversion first.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from flnip.errors import (
    ImageTooSmall,
    MalformedHeader,
    MaxvalTooLarge,
    SizeMismatch,
    TruncatedPayload,
)

MIN_SIDE = 3
_WHITESPACE = b" \t\n\r\v\f"


@dataclass(frozen=True, eq=False)
class GrayImage:
    """Immutable 8-bit single-channel raster.

    ``pixels`` is a read-only ``uint8`` array of shape ``(height, width)``.
    """

    pixels: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.pixels)
        if arr.ndim != 2:
            raise SizeMismatch(f"expected a 2-D raster, got shape {arr.shape}")
        if arr.dtype != np.uint8:
            if arr.size and (arr.min() < 0 or arr.max() > 255):
                raise SizeMismatch("intensities must lie in [0, 255]")
            arr = arr.astype(np.uint8)
        h, w = arr.shape
        if w < MIN_SIDE or h < MIN_SIDE:
            raise ImageTooSmall(f"image is {w}x{h}; both sides must be >= {MIN_SIDE}")
        arr = np.array(arr, dtype=np.uint8, copy=True)
        arr.setflags(write=False)
        object.__setattr__(self, "pixels", arr)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @classmethod
    def from_rows(cls, width: int, height: int, values) -> GrayImage:
        """Build from a flat row-major sequence of intensities."""
        flat = np.asarray(list(values) if not isinstance(values, np.ndarray) else values)
        if flat.size != width * height:
            raise SizeMismatch(f"{flat.size} pixels for a {width}x{height} image")
        return cls(flat.reshape(height, width))

    def __eq__(self, other):
        if not isinstance(other, GrayImage):
            return NotImplemented
        return self.pixels.shape == other.pixels.shape and bool(
            np.array_equal(self.pixels, other.pixels)
        )

    def __hash__(self):
        return hash((self.pixels.shape, self.pixels.tobytes()))

    def __repr__(self):
        return f"GrayImage({self.width}x{self.height})"


class _HeaderReader:
    """Tokenizer for Netpbm headers with '#' comments between tokens."""

    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def _skip_space_and_comments(self):
        data = self.data
        while self.pos < len(data):
            ch = data[self.pos : self.pos + 1]
            if ch in _WHITESPACE and ch:
                self.pos += 1
            elif ch == b"#":
                end = data.find(b"\n", self.pos)
                self.pos = len(data) if end < 0 else end + 1
            else:
                break

    def token(self) -> bytes:
        self._skip_space_and_comments()
        start = self.pos
        data = self.data
        while self.pos < len(data) and data[self.pos : self.pos + 1] not in _WHITESPACE + b"#":
            self.pos += 1
        if start == self.pos:
            raise MalformedHeader("unexpected end of header")
        return data[start : self.pos]

    def integer(self, what: str) -> int:
        tok = self.token()
        if not tok.isdigit():
            raise MalformedHeader(f"bad {what}: {tok!r}")
        return int(tok)


def _read_header(data: bytes, magics: tuple[bytes, ...] = (b"P2", b"P5")):
    if not data:
        raise MalformedHeader("empty input")
    reader = _HeaderReader(data)
    magic = data[:2]
    if magic not in magics:
        raise MalformedHeader(f"bad magic {magic!r}")
    reader.pos = 2
    if len(data) > 2 and data[2:3] not in _WHITESPACE + b"#":
        raise MalformedHeader(f"bad magic {data[:3]!r}")
    width = reader.integer("width")
    height = reader.integer("height")
    if width == 0 or height == 0:
        raise MalformedHeader(f"bad dimensions {width}x{height}")
    maxval = reader.integer("maxval")
    if maxval == 0:
        raise MalformedHeader("maxval must be positive")
    if maxval > 255:
        raise MaxvalTooLarge(f"maxval {maxval} > 255")
    return magic, width, height, maxval, reader


def _read_samples(magic: bytes, reader: _HeaderReader, count: int, maxval: int) -> np.ndarray:
    data = reader.data
    if magic == b"P5":
        # exactly one whitespace byte separates maxval from the payload
        if reader.pos >= len(data) or data[reader.pos : reader.pos + 1] not in _WHITESPACE:
            raise TruncatedPayload("missing payload")
        start = reader.pos + 1
        payload = data[start : start + count]
        if len(payload) < count:
            raise TruncatedPayload(f"expected {count} payload bytes, got {len(payload)}")
        samples = np.frombuffer(payload, dtype=np.uint8)
    else:
        tokens = data[reader.pos :].split()
        if len(tokens) < count:
            raise TruncatedPayload(f"expected {count} samples, got {len(tokens)}")
        try:
            samples = np.array([int(t) for t in tokens[:count]], dtype=np.int64)
        except ValueError as exc:
            raise MalformedHeader(f"non-integer sample: {exc}") from None
    if samples.size and (samples.min() < 0 or samples.max() > maxval):
        raise MalformedHeader(f"sample outside [0, {maxval}]")
    return samples.astype(np.uint8)


def decode_pgm(data: bytes) -> GrayImage:
    """Parse a P2 or P5 PGM byte string.

    Samples are returned as stored; no rescaling is applied when maxval < 255.
    """
    magic, width, height, maxval, reader = _read_header(data, (b"P2", b"P5"))
    if width < MIN_SIDE or height < MIN_SIDE:
        raise ImageTooSmall(f"image is {width}x{height}; both sides must be >= {MIN_SIDE}")
    samples = _read_samples(magic, reader, width * height, maxval)
    return GrayImage(samples.reshape(height, width))


def encode_pgm(image: GrayImage) -> bytes:
    header = f"P5\n{image.width} {image.height}\n255\n".encode("ascii")
    return header + image.pixels.tobytes()


def rgb_to_gray(rgb, width: int, height: int) -> GrayImage:
    """BT.601 luma with round-half-up: ``round(0.299 R + 0.587 G + 0.114 B)``."""
    arr = np.asarray(rgb, dtype=np.int64)
    if arr.ndim != 2 or arr.shape[1] != 3 or arr.shape[0] != width * height:
        raise SizeMismatch(f"expected {width * height} RGB triplets, got shape {arr.shape}")
    if arr.size and (arr.min() < 0 or arr.max() > 255):
        raise SizeMismatch("RGB components must lie in [0, 255]")
    # integer weights in thousandths keep the rounding exact
    luma_x1000 = 299 * arr[:, 0] + 587 * arr[:, 1] + 114 * arr[:, 2]
    gray = np.clip((luma_x1000 + 500) // 1000, 0, 255)
    return GrayImage(gray.reshape(height, width))

