"""LBP and FLNIP pixel coders, pattern maps and 256-bin histograms.

Neighbor indexing around a center pixel ``c`` (k = 1..8)::

    I6 I7 I8
    I5 c  I1
    I4 I3 I2

Bit ``k - 1`` of a code belongs to neighbor ``I_k``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from flnip.errors import EmptyMap, IndexOutOfRange, LengthMismatch, ZeroReference
from flnip.gaussian import ScaleBank, scale_stack
from flnip.pixelgrid import GrayImage

BINS = 256
SIGNIFICANT_DIGITS = 9

# (row, col) offset of I_k for k = 1..8
NEIGHBOR_OFFSETS = (
    (0, 1),
    (1, 1),
    (1, 0),
    (1, -1),
    (0, -1),
    (-1, -1),
    (-1, 0),
    (-1, 1),
)


def _wrap(k: int) -> int:
    return (k - 1) % 8 + 1


def adjacent_set(k: int) -> list[int]:
    """Indices of the ring neighbors used when coding neighbor ``I_k``.

    Edge-midpoint neighbors (odd k) take the four ring positions within two
    steps; corners (even k) take the two positions one step away.
    """
    if not isinstance(k, (int, np.integer)) or not 1 <= k <= 8:
        raise IndexOutOfRange(f"neighbor index must be in 1..8, got {k!r}")
    k = int(k)
    if k % 2:
        return [_wrap(k - 2), _wrap(k - 1), _wrap(k + 1), _wrap(k + 2)]
    return [_wrap(k - 1), _wrap(k + 1)]


# zero-based adjacency used by the vectorized coder
_ADJ0 = tuple(tuple(a - 1 for a in adjacent_set(k)) for k in range(1, 9))


def fractional_change(adjacent_values, reference) -> float:
    """Mean absolute deviation of ``adjacent_values`` from ``reference``,
    divided by ``reference``. Inputs are expected in the shifted [1, 256] domain."""
    values = list(adjacent_values)
    if not values:
        raise LengthMismatch("adjacent set is empty")
    if reference <= 0:
        raise ZeroReference(f"reference must be positive after the domain shift, got {reference}")
    total = sum(abs(v - reference) for v in values)
    return float(total / (len(values) * reference))


def _as_window(window) -> np.ndarray:
    arr = np.asarray(window)
    if arr.shape == (9,):
        arr = arr.reshape(3, 3)
    if arr.shape != (3, 3):
        raise LengthMismatch(f"expected a 3x3 window, got shape {arr.shape}")
    return arr


def _ring(arr: np.ndarray) -> list[np.ndarray]:
    """Neighbors I_1..I_8 of every center in a batch of windows shaped (..., 3, 3)."""
    return [arr[..., 1 + dy, 1 + dx] for dy, dx in NEIGHBOR_OFFSETS]


def lbp_from_ring(center: np.ndarray, ring: list[np.ndarray]) -> np.ndarray:
    code = np.zeros(np.shape(center), dtype=np.int64)
    for k, neighbor in enumerate(ring):
        code |= (neighbor >= center).astype(np.int64) << k
    return code


def flnip_from_ring(center: np.ndarray, ring: list[np.ndarray]) -> np.ndarray:
    """Vectorized FLNIP code from already shifted (strictly positive) values.

    The bit for ``I_k`` compares ``S_k / I_k`` against ``S_c / I_c`` where
    ``S_x`` sums ``|a - x|`` over the adjacent set of ``k``; the common 1/M
    factor cancels, and cross-multiplying keeps integer inputs exact.
    """
    code = np.zeros(np.shape(center), dtype=np.int64)
    for k, adj in enumerate(_ADJ0):
        ref = ring[k]
        s_k = sum(np.abs(ring[a] - ref) for a in adj)
        s_c = sum(np.abs(ring[a] - center) for a in adj)
        code |= (s_k * center >= s_c * ref).astype(np.int64) << k
    return code


def lbp_code(window) -> int:
    arr = _as_window(window).astype(np.int64)
    return int(lbp_from_ring(arr[1, 1], _ring(arr)))


def flnip_code(window) -> int:
    arr = _as_window(window).astype(np.int64) + 1
    return int(flnip_from_ring(arr[1, 1], _ring(arr)))


def flnip_codes(windows) -> np.ndarray:
    """FLNIP codes for a batch of windows shaped (N, 3, 3)."""
    arr = np.asarray(windows).astype(np.int64) + 1
    return flnip_from_ring(arr[..., 1, 1], _ring(arr))


@dataclass(frozen=True, eq=False)
class PatternMap:
    codes: np.ndarray  # (height - 2, width - 2), values in [0, 255]

    @property
    def width(self) -> int:
        return self.codes.shape[1]

    @property
    def height(self) -> int:
        return self.codes.shape[0]


def pattern_map(image: GrayImage, coder: str = "flnip") -> PatternMap:
    """Code every interior pixel; the one-pixel border is excluded."""
    px = image.pixels.astype(np.int64)
    h, w = px.shape
    if coder == "flnip":
        px = px + 1
    center = px[1 : h - 1, 1 : w - 1]
    ring = [px[1 + dy : h - 1 + dy, 1 + dx : w - 1 + dx] for dy, dx in NEIGHBOR_OFFSETS]
    if coder == "flnip":
        codes = flnip_from_ring(center, ring)
    elif coder == "lbp":
        codes = lbp_from_ring(center, ring)
    else:
        raise ValueError(f"unknown coder {coder!r}; expected 'lbp' or 'flnip'")
    codes = codes.astype(np.uint8)
    codes.setflags(write=False)
    return PatternMap(codes)


@dataclass(frozen=True, eq=False)
class DescriptorHistogram:
    bins: np.ndarray
    normalized: bool


def histogram(pmap: PatternMap, normalize: bool = True) -> DescriptorHistogram:
    codes = np.asarray(pmap.codes).ravel()
    if codes.size == 0:
        raise EmptyMap("pattern map has no codes")
    counts = np.bincount(codes, minlength=BINS)
    if normalize:
        return DescriptorHistogram(counts / codes.size, True)
    return DescriptorHistogram(counts.astype(np.int64), False)


def canonicalize(values) -> np.ndarray:
    """Round each value to 9 significant digits, the precision the feature
    database stores, so in-memory and on-disk features compare bit-exactly."""
    return np.array([float(format_value(v)) for v in np.asarray(values).ravel()])


def format_value(v) -> str:
    return f"{float(v):.{SIGNIFICANT_DIGITS}g}"


@dataclass(eq=False)
class FeatureRecord:
    """Concatenated normalized FLNIP histograms: raw image first, then one
    block per Gaussian scale."""

    id: str
    category: str
    feature: np.ndarray = field(repr=False)

    @property
    def n_blocks(self) -> int:
        return len(self.feature) // BINS

    def block(self, j: int) -> np.ndarray:
        return self.feature[j * BINS : (j + 1) * BINS]

    def __eq__(self, other):
        if not isinstance(other, FeatureRecord):
            return NotImplemented
        return (
            self.id == other.id
            and self.category == other.category
            and np.array_equal(self.feature, other.feature)
        )


def feature_blocks(image: GrayImage, bank: ScaleBank) -> list[np.ndarray]:
    images = [image, *scale_stack(image, bank)]
    return [histogram(pattern_map(img, "flnip")).bins for img in images]


def extract_feature(
    image: GrayImage, bank: ScaleBank | None = None, id: str = "", category: str = ""
) -> FeatureRecord:
    bank = bank or ScaleBank()
    feature = canonicalize(np.concatenate(feature_blocks(image, bank)))
    feature.setflags(write=False)
    return FeatureRecord(id=id, category=category, feature=feature)
