"""QAM mapping, Hermitian subcarrier framing and real IFFT/FFT.

Transform convention (numpy's): forward FFT unscaled, inverse scaled by
``1/N``. A single tone ``X_1 = X_{N-1} = 1`` therefore gives
``x(n) = (2/N) cos(2 pi n / N)``.

Bit labelling
-------------
Square M-QAM splits each ``log2 M``-bit label into an in-phase half
(leading bits) and a quadrature half (trailing bits). Each half is a
reflected Gray code over the PAM levels, level index ``i`` carrying
amplitude ``L - 1 - 2 i``; bit pattern ``0...0`` is therefore the most
positive level and 4-QAM label ``00`` maps to ``(1 + 1j)/sqrt(2)``.

128-QAM is a cross constellation obtained from a 16x8 Gray rectangle
(4 in-phase bits, 3 quadrature bits) by folding the two outer columns
on each side (|I| in {13, 15}) onto the arms |Q| in {9, 11}; the
folding keeps single-bit differences inside the arms and along the
folds but not across the arm/body seam (quasi-Gray).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = [
    "Layout",
    "QamConstellation",
    "qam",
    "qam_map",
    "qam_demap_hard",
    "frame_full",
    "frame_odd",
    "check_frame",
    "ifft_real",
    "fft",
    "used_subcarriers",
]


def _gray(i):
    return i ^ (i >> 1)


def _gray_inverse(g):
    g = np.asarray(g).copy()
    shift = g >> 1
    while np.any(shift):
        g ^= shift
        shift >>= 1
    return g


def _bits_to_int(bits: np.ndarray) -> np.ndarray:
    """Rows of bits (MSB first) to integers; last axis is consumed."""
    k = bits.shape[-1]
    weights = 1 << np.arange(k - 1, -1, -1)
    return (bits.astype(np.int64) * weights).sum(axis=-1)


def _int_to_bits(vals: np.ndarray, k: int) -> np.ndarray:
    shifts = np.arange(k - 1, -1, -1)
    return ((np.asarray(vals)[..., None] >> shifts) & 1).astype(np.uint8)


@dataclass(frozen=True, eq=False)
class QamConstellation:
    """Unit-energy constellation; ``points[label]`` is the symbol for integer ``label``."""

    order: int
    points: np.ndarray
    square: bool

    @property
    def bits_per_symbol(self) -> int:
        return self.order.bit_length() - 1

    @property
    def labels(self) -> list[str]:
        k = self.bits_per_symbol
        return [format(i, f"0{k}b") for i in range(self.order)]

    @property
    def min_distance(self) -> float:
        d = np.abs(self.points[:, None] - self.points[None, :])
        return float(d[d > 0].min())

    def map(self, bits) -> np.ndarray:
        return qam_map(bits, self)

    def demap(self, symbols) -> np.ndarray:
        return qam_demap_hard(symbols, self)


def _square_points(order: int) -> np.ndarray:
    k = order.bit_length() - 1
    half = k // 2
    L = 1 << half
    labels = np.arange(order)
    i_bits, q_bits = labels >> half, labels & (L - 1)
    amp_i = L - 1 - 2 * _gray_inverse(i_bits)
    amp_q = L - 1 - 2 * _gray_inverse(q_bits)
    return amp_i + 1j * amp_q


def _cross128_points() -> np.ndarray:
    labels = np.arange(128)
    i_bits, q_bits = labels >> 3, labels & 7
    amp_i = 15 - 2 * _gray_inverse(i_bits)
    amp_q = 7 - 2 * _gray_inverse(q_bits)
    fold = np.abs(amp_i) > 11
    new_i = np.where(fold, np.sign(amp_i) * (8 - np.abs(amp_q)), amp_i)
    new_q = np.where(fold, np.sign(amp_q) * (np.abs(amp_i) - 4), amp_q)
    return new_i + 1j * new_q


QAM_ORDERS = (4, 16, 64, 128, 256, 1024)


@lru_cache(maxsize=None)
def qam(order: int) -> QamConstellation:
    """Unit-energy M-QAM for ``order`` a power of 4 (4..1024) or 128."""
    k = order.bit_length() - 1
    if order == 128:
        raw, square = _cross128_points(), False
    elif order in QAM_ORDERS:
        raw, square = _square_points(order), True
    else:
        raise ValueError(f"unsupported QAM order {order}")
    pts = raw / np.sqrt(np.mean(np.abs(raw) ** 2))
    pts.setflags(write=False)
    return QamConstellation(order, pts, square)


def qam_map(bits, const: QamConstellation | int) -> np.ndarray:
    """Map bits (last axis, MSB-first groups of ``log2 M``) to symbols."""
    const = qam(const) if isinstance(const, int) else const
    bits = np.asarray(bits, dtype=np.uint8)
    k = const.bits_per_symbol
    if bits.shape[-1] % k:
        raise ValueError(f"bit count {bits.shape[-1]} is not a multiple of {k}")
    groups = bits.reshape(*bits.shape[:-1], bits.shape[-1] // k, k)
    return const.points[_bits_to_int(groups)]


def _slice_pam(v: np.ndarray, L: int) -> np.ndarray:
    """Nearest level index for amplitudes ``L-1-2i``; exact ties go to the smaller Gray label."""
    t = (L - 1 - v) / 2.0
    lo = np.clip(np.floor(t), 0, L - 1).astype(np.int64)
    hi = np.minimum(lo + 1, L - 1)
    d_lo = np.abs(t - lo)
    d_hi = np.abs(t - hi)
    pick_hi = (d_hi < d_lo) | ((d_hi == d_lo) & (_gray(hi) < _gray(lo)))
    return np.where(pick_hi, hi, lo)


def qam_demap_hard(symbols, const: QamConstellation | int) -> np.ndarray:
    """Nearest-point hard decisions; returns bits along a new trailing axis.

    Exact distance ties resolve to the lexicographically smallest label.
    """
    const = qam(const) if isinstance(const, int) else const
    symbols = np.asarray(symbols, dtype=complex)
    k = const.bits_per_symbol
    if const.square:
        half = k // 2
        L = 1 << half
        scale = np.sqrt(np.mean(np.abs(_square_points(const.order)) ** 2))
        y = symbols * scale
        i_idx = _slice_pam(y.real, L)
        q_idx = _slice_pam(y.imag, L)
        labels = (_gray(i_idx) << half) | _gray(q_idx)
    else:
        flat = symbols.reshape(-1)
        labels = np.empty(flat.shape, dtype=np.int64)
        pts = const.points
        for start in range(0, flat.size, 8192):
            chunk = flat[start : start + 8192]
            d = np.abs(chunk[:, None] - pts[None, :]) ** 2
            labels[start : start + 8192] = np.argmin(d, axis=1)
        labels = labels.reshape(symbols.shape)
    bits = _int_to_bits(labels, k)
    return bits.reshape(*symbols.shape[:-1], symbols.shape[-1] * k) if symbols.ndim else bits


class Layout(enum.Enum):
    FULL_HERMITIAN = "full"
    ODD_ONLY_HERMITIAN = "odd"


def used_subcarriers(n: int, layout: Layout) -> np.ndarray:
    """Data-bearing bins in the lower half of the spectrum."""
    if layout is Layout.FULL_HERMITIAN:
        return np.arange(1, n // 2)
    return np.arange(1, n // 2, 2)


def _check_n(n: int):
    if n < 4 or n % 4:
        raise ValueError(f"FFT size must be a positive multiple of 4, got {n}")


def frame_full(symbols, n: int | None = None) -> np.ndarray:
    """Hermitian frame ``[0, X_1..X_{N/2-1}, 0, conj(X_{N/2-1})..conj(X_1)]``.

    Leading axes of ``symbols`` are batch axes.
    """
    symbols = np.asarray(symbols, dtype=complex)
    count = symbols.shape[-1]
    n = 2 * (count + 1) if n is None else n
    _check_n(n)
    if count != n // 2 - 1:
        raise ValueError(f"expected {n // 2 - 1} symbols for N={n}, got {count}")
    frame = np.zeros(symbols.shape[:-1] + (n,), dtype=complex)
    frame[..., 1 : n // 2] = symbols
    frame[..., n // 2 + 1 :] = np.conj(symbols[..., ::-1])
    return frame


def frame_odd(symbols, n: int | None = None) -> np.ndarray:
    """Odd-subcarrier Hermitian frame ``[0, X_1, 0, X_2, ..., 0, conj(X_1)]``."""
    symbols = np.asarray(symbols, dtype=complex)
    count = symbols.shape[-1]
    n = 4 * count if n is None else n
    _check_n(n)
    if count != n // 4:
        raise ValueError(f"expected {n // 4} symbols for N={n}, got {count}")
    frame = np.zeros(symbols.shape[:-1] + (n,), dtype=complex)
    odd = np.arange(1, n // 2, 2)
    frame[..., odd] = symbols
    frame[..., n - odd] = np.conj(symbols)
    return frame


def check_frame(frame, layout: Layout | None = None, atol: float = 0.0) -> bool:
    """True when ``frame`` obeys the Hermitian layout (exactly, by default)."""
    frame = np.asarray(frame)
    n = frame.shape[-1]
    if n < 4 or n % 4:
        return False
    k = np.arange(1, n // 2)
    ok = (
        np.all(np.abs(frame[..., 0]) <= atol)
        and np.all(np.abs(frame[..., n // 2]) <= atol)
        and np.all(np.abs(frame[..., n - k] - np.conj(frame[..., k])) <= atol)
    )
    if layout is Layout.ODD_ONLY_HERMITIAN:
        ok = ok and np.all(np.abs(frame[..., 0::2]) <= atol)
    return bool(ok)


def ifft_real(frame, check: bool = True) -> np.ndarray:
    """Real time signal of a Hermitian frame (inverse DFT scaled by 1/N)."""
    frame = np.asarray(frame, dtype=complex)
    if check:
        n = frame.shape[-1]
        # tolerance is relative to the frame magnitude so scaled frames pass
        tol = 1e-12 * max(1.0, float(np.max(np.abs(frame), initial=0.0)))
        if not check_frame(frame, atol=tol):
            raise ValueError(f"frame of length {n} violates Hermitian symmetry")
    x = np.fft.ifft(frame, axis=-1)
    return x.real.copy()


def fft(signal) -> np.ndarray:
    """Unscaled forward DFT along the last axis."""
    return np.fft.fft(np.asarray(signal, dtype=float), axis=-1)
