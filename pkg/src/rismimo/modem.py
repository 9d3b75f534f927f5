"""Gray-labeled PSK and square QAM constellations, bit mapping, and the
nearest-point slicer and distance metric used by every detector."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


def gray_code(n: np.ndarray | int):
    """Binary-reflected Gray code of ``n``."""
    n = np.asarray(n)
    return n ^ (n >> 1)


def ints_to_bits(values, width: int) -> np.ndarray:
    """Expand integers into ``width`` bits, most significant first."""
    values = np.asarray(values)
    shifts = np.arange(width - 1, -1, -1)
    return ((values[..., None] >> shifts) & 1).astype(np.uint8)


def bits_to_ints(bits) -> np.ndarray:
    """Collapse a trailing axis of bits (MSB first) into integers."""
    bits = np.asarray(bits)
    width = bits.shape[-1]
    weights = 1 << np.arange(width - 1, -1, -1)
    return bits @ weights


@dataclass(frozen=True)
class Constellation:
    """An M-ary symbol set with unit average energy and its bit labels.

    ``points[k]`` carries the label ``labels[k]``; ``point_of_label``
    inverts that map so modulation is a table lookup.  ``label_bits`` is
    the (M, log2 M) bit expansion of the labels, kept around so slicing
    can emit bits without re-deriving them.
    """

    kind: str
    order: int
    points: np.ndarray
    labels: np.ndarray
    point_of_label: np.ndarray = field(repr=False)
    label_bits: np.ndarray = field(repr=False)

    @property
    def bits_per_symbol(self) -> int:
        return self.order.bit_length() - 1


def _finish(kind: str, order: int, points: np.ndarray, labels: np.ndarray) -> Constellation:
    bps = order.bit_length() - 1
    point_of_label = np.empty(order, dtype=np.intp)
    point_of_label[labels] = np.arange(order)
    return Constellation(
        kind=kind,
        order=order,
        points=points,
        labels=labels,
        point_of_label=point_of_label,
        label_bits=ints_to_bits(labels, bps),
    )


def make_psk(order: int) -> Constellation:
    """Phase-shift keying on the unit circle, Gray-labeled around it."""
    if order < 2 or order & (order - 1):
        raise ValueError(f"PSK order must be a power of two >= 2, got {order}")
    k = np.arange(order)
    points = np.exp(2j * np.pi * k / order)
    # Real BPSK/QPSK axes come out exact; kill the 1e-16 residue.
    points = np.round(points, 15)
    return _finish("psk", order, points, gray_code(k))


def make_qam(order: int) -> Constellation:
    """Square QAM with per-axis Gray labeling and unit average energy."""
    side = math.isqrt(order)
    if side * side != order or side < 2 or side & (side - 1):
        raise ValueError(f"QAM order must be an even power of two >= 4, got {order}")
    half_bits = side.bit_length() - 1
    levels = 2.0 * np.arange(side) - side + 1.0
    scale = math.sqrt(3.0 / (2.0 * (order - 1)))
    i_idx, q_idx = np.meshgrid(np.arange(side), np.arange(side), indexing="ij")
    i_idx, q_idx = i_idx.ravel(), q_idx.ravel()
    points = scale * (levels[i_idx] + 1j * levels[q_idx])
    labels = (gray_code(i_idx) << half_bits) | gray_code(q_idx)
    return _finish("qam", order, points, labels)


def constellation(kind: str, order: int) -> Constellation:
    if kind == "psk":
        return make_psk(order)
    if kind == "qam":
        return make_qam(order)
    raise ValueError(f"unknown constellation kind {kind!r}")


def modulate(bits, c: Constellation) -> np.ndarray:
    """Map a flat bit vector to symbols, log2(M) bits per symbol."""
    bits = np.asarray(bits)
    bps = c.bits_per_symbol
    if bits.ndim != 1 or bits.size % bps:
        raise ValueError(f"bit vector length must be a multiple of {bps}, got shape {bits.shape}")
    values = bits_to_ints(bits.reshape(-1, bps))
    return c.points[c.point_of_label[values]]


def slice_index(y, c: Constellation) -> np.ndarray:
    """Index of the nearest constellation point (ties to the lowest index)."""
    y = np.asarray(y)
    d = np.abs(y[..., None] - c.points) ** 2
    return np.argmin(d, axis=-1)


def slice_symbol(y, c: Constellation):
    """Nearest-point decision: returns (symbol, bits).

    Scalar in, scalar symbol and a (log2 M,) bit vector out; arrays get a
    matching leading shape with bits stacked on a trailing axis.
    """
    idx = slice_index(y, c)
    symbols = c.points[idx]
    bits = c.label_bits[idx]
    if np.ndim(y) == 0:
        return complex(symbols), bits
    return symbols, bits


def min_distance(y, c: Constellation):
    """Squared Euclidean distance from ``y`` to its nearest point."""
    y = np.asarray(y)
    d = np.abs(y[..., None] - c.points) ** 2
    out = d.min(axis=-1)
    return float(out) if np.ndim(y) == 0 else out
