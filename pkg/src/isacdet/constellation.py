"""Unit-energy PSK/QAM alphabets and random OFDM payload generation."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache

import numpy as np


class ConstellationKind(str, enum.Enum):
    BPSK = "bpsk"
    QPSK = "qpsk"
    QAM16 = "qam16"
    QAM64 = "qam64"
    QAM256 = "qam256"
    QAM1024 = "qam1024"

    @property
    def order(self) -> int:
        return _ORDERS[self]

    @property
    def is_psk(self) -> bool:
        return self in (ConstellationKind.BPSK, ConstellationKind.QPSK)

    @classmethod
    def parse(cls, name: "str | ConstellationKind") -> "ConstellationKind":
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name).lower())
        except ValueError:
            valid = ", ".join(k.value for k in cls)
            raise ValueError(f"unknown constellation {name!r} (expected one of {valid})") from None


_ORDERS = {
    ConstellationKind.BPSK: 2,
    ConstellationKind.QPSK: 4,
    ConstellationKind.QAM16: 16,
    ConstellationKind.QAM64: 64,
    ConstellationKind.QAM256: 256,
    ConstellationKind.QAM1024: 1024,
}

ALL_KINDS: tuple[ConstellationKind, ...] = tuple(ConstellationKind)


@dataclass(frozen=True)
class Alphabet:
    kind: ConstellationKind
    points: np.ndarray

    @property
    def order(self) -> int:
        return len(self.points)

    def power_moment(self, k: int) -> float:
        """Mean of |point|**(2k) over the alphabet (uniform symbol prior)."""
        return float(np.mean(np.abs(self.points) ** (2 * k)))


def _psk_points(order: int) -> np.ndarray:
    if order == 4:
        # QPSK sits on the diagonals so that it coincides with 4-QAM
        angles = np.pi / 4 + 2 * np.pi * np.arange(4) / 4
    else:
        angles = 2 * np.pi * np.arange(order) / order
    pts = np.exp(1j * angles)
    pts.real[np.abs(pts.real) < 1e-15] = 0.0
    pts.imag[np.abs(pts.imag) < 1e-15] = 0.0
    return pts


def _qam_points(order: int) -> np.ndarray:
    side = int(round(np.sqrt(order)))
    levels = np.arange(-(side - 1), side, 2, dtype=float)
    scale = 1.0 / np.sqrt(2.0 * (side**2 - 1) / 3.0)
    # row-major: I level outer, Q level inner
    i, q = np.meshgrid(levels, levels, indexing="ij")
    return ((i + 1j * q) * scale).ravel()


@lru_cache(maxsize=None)
def _alphabet(kind: ConstellationKind) -> Alphabet:
    if kind.is_psk:
        pts = _psk_points(kind.order)
    else:
        pts = _qam_points(kind.order)
    pts.setflags(write=False)
    return Alphabet(kind, pts)


def alphabet(kind: "ConstellationKind | str") -> Alphabet:
    """Return the normalized alphabet for ``kind``.

    QAM alphabets are square grids with odd per-axis levels scaled by
    ``1/sqrt(2(L^2-1)/3)``; PSK points lie on the unit circle.
    """
    return _alphabet(ConstellationKind.parse(kind))


def draw_symbols(kind: "ConstellationKind | str", n: int, m: int,
                 rng: np.random.Generator) -> np.ndarray:
    """Draw an ``n x m`` matrix of i.i.d. uniform symbols from ``kind``."""
    if n < 1 or m < 1:
        raise ValueError(f"symbol matrix must be at least 1x1, got {n}x{m}")
    alph = alphabet(kind)
    idx = rng.integers(0, alph.order, size=(n, m))
    return alph.points[idx]
