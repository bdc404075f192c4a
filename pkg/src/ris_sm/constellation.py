"""Symbol-domain constellations and the joint antenna/symbol bit mapping.

Bit convention for one spatial-modulation slot carrying
``log2(M) + log2(n_tx)`` bits: the leading ``log2(M)`` bits are the Gray
label of the constellation point, the trailing ``log2(n_tx)`` bits are the
antenna index in natural binary, most significant bit first.

Antenna and point indices are 0-based throughout the package.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property

import numpy as np


class Kind(str, Enum):
    PSK = "psk"
    QAM = "qam"


def _log2_exact(value: int, name: str) -> int:
    if value < 1 or value & (value - 1):
        raise ValueError(f"{name} must be a power of two, got {value}")
    return value.bit_length() - 1


def gray(i: int) -> int:
    return i ^ (i >> 1)


@dataclass(frozen=True)
class Constellation:
    """Unit-average-power point set with one bit label per point.

    ``points[m]`` carries the label ``labels[m]`` (an integer whose
    ``bits_per_symbol`` low bits are the transmitted bits, MSB first).
    """

    kind: Kind
    order: int
    points: np.ndarray = field(repr=False)
    labels: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.points.setflags(write=False)
        self.labels.setflags(write=False)

    @property
    def bits_per_symbol(self) -> int:
        return self.order.bit_length() - 1

    @property
    def bit_labels(self) -> list[str]:
        k = self.bits_per_symbol
        return [format(int(v), f"0{k}b") if k else "" for v in self.labels]

    @cached_property
    def index_of_label(self) -> np.ndarray:
        inv = np.empty(self.order, dtype=np.int64)
        inv[self.labels] = np.arange(self.order)
        inv.setflags(write=False)
        return inv

    def __len__(self) -> int:
        return self.order


@dataclass(frozen=True)
class SmSymbol:
    """One spatial-modulation symbol: active antenna plus constellation point."""

    antenna: int
    point: int
    s: complex


def build_constellation(M: int, kind: Kind | str = Kind.PSK) -> Constellation:
    """Gray-labelled M-PSK or square M-QAM with E|s|^2 = 1.

    >>> build_constellation(2, "psk").points
    array([ 1.+0.j, -1.+0.j])
    """
    kind = Kind(kind.lower() if isinstance(kind, str) else kind)
    k = _log2_exact(M, "M")
    if kind is Kind.PSK:
        m = np.arange(M)
        points = np.exp(2j * np.pi * m / M)
        # clean up the +-1, +-j cases so exact comparisons behave
        points = np.round(points.real, 15) + 1j * np.round(points.imag, 15)
        labels = np.array([gray(i) for i in m], dtype=np.int64)
    else:
        side = int(round(np.sqrt(M)))
        if side * side != M or M < 4:
            raise ValueError(f"QAM order must be a perfect square of a power of two (4, 16, 64, ...), got {M}")
        half = k // 2
        levels = 2 * np.arange(side) - (side - 1)
        a, b = np.meshgrid(np.arange(side), np.arange(side), indexing="ij")
        a, b = a.ravel(), b.ravel()
        raw = levels[a] + 1j * levels[b]
        points = raw / np.sqrt(np.mean(np.abs(raw) ** 2))
        labels = np.array([(gray(int(i)) << half) | gray(int(q)) for i, q in zip(a, b)], dtype=np.int64)
    return Constellation(kind, M, points.astype(complex), labels)


def _bits_needed(n_tx: int, c: Constellation) -> tuple[int, int]:
    return c.bits_per_symbol, _log2_exact(n_tx, "n_tx")


def map_bits(bits: str, n_tx: int, c: Constellation) -> SmSymbol:
    """Map a bit string to an (antenna, point) pair."""
    kb, ka = _bits_needed(n_tx, c)
    if len(bits) != kb + ka or set(bits) - {"0", "1"}:
        raise ValueError(f"expected a {kb + ka}-character bit string, got {bits!r}")
    label = int(bits[:kb], 2) if kb else 0
    antenna = int(bits[kb:], 2) if ka else 0
    m = int(c.index_of_label[label])
    return SmSymbol(antenna, m, complex(c.points[m]))


def demap_symbol(sym: SmSymbol, n_tx: int, c: Constellation) -> str:
    kb, ka = _bits_needed(n_tx, c)
    if not (0 <= sym.antenna < n_tx and 0 <= sym.point < c.order):
        raise ValueError(f"symbol {sym} is out of range for n_tx={n_tx}, M={c.order}")
    sym_bits = format(int(c.labels[sym.point]), f"0{kb}b") if kb else ""
    ant_bits = format(sym.antenna, f"0{ka}b") if ka else ""
    return sym_bits + ant_bits


def hamming_distance(a: SmSymbol, b: SmSymbol, n_tx: int, c: Constellation) -> int:
    return sum(x != y for x, y in zip(demap_symbol(a, n_tx, c), demap_symbol(b, n_tx, c)))


def bit_error_table(n_tx: int, c: Constellation) -> np.ndarray:
    """Hamming distances between every pair of flat indices ``antenna * M + point``."""
    ant = np.repeat(np.arange(n_tx), c.order)
    lab = np.tile(c.labels, n_tx)
    table = np.bitwise_count(ant[:, None] ^ ant[None, :]) + np.bitwise_count(lab[:, None] ^ lab[None, :])
    return table.astype(np.int64)
