"""Unipolar OFDM transceivers for multi-LED links.

Every scheme works on batches of *frames*. A frame is the smallest unit
that carries a whole payload:

* DCO / ACO / FLIP: one OFDM symbol per parallel block (blocks run on
  separate LEDs with independent data);
* NDC / INDC: one OFDM symbol;
* CINDC: a super-frame of ``ceil(n_c / N)`` OFDM symbols carrying one
  LDPC codeword of index bits plus zero padding up to a whole symbol.

Transmitters return intensities shaped ``(frames, channel_uses, n_tx)``;
receivers take received samples shaped ``(frames, channel_uses, n_rx)``
together with the *effective* channel ``r * H``.

Bit ordering: modulation bits fill subcarriers in ascending index (block
0 first for parallel schemes, OFDM symbol 0 first for CINDC); index bits
are consumed one per channel use in time order.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import cached_property

import numpy as np

from . import ldpc
from .ofdm import (
    Layout,
    fft,
    frame_full,
    frame_odd,
    ifft_real,
    qam,
    qam_demap_hard,
    qam_map,
    used_subcarriers,
)

__all__ = [
    "Kind",
    "SchemeConfig",
    "SmDecision",
    "RxResult",
    "polarity_separate",
    "dco_bias_factor",
    "sm_detect_zf",
    "rate",
    "make_scheme",
    "Scheme",
    "DcoScheme",
    "AcoScheme",
    "FlipScheme",
    "NdcScheme",
    "IndcScheme",
    "CindcScheme",
]


class Kind(str, enum.Enum):
    DCO = "dco"
    ACO = "aco"
    FLIP = "flip"
    NDC = "ndc"
    INDC = "indc"
    CINDC = "cindc"


@dataclass(frozen=True)
class SchemeConfig:
    """Parameters of one transceiver.

    ``order`` is M (M_c for CINDC). ``parallel_blocks`` only applies to
    DCO/ACO/FLIP, ``n_pairs`` to INDC/CINDC, the ``code_*`` fields and
    ``soft_index`` to CINDC.
    """

    kind: Kind
    order: int
    n_fft: int = 64
    bias_db: float = 7.0
    parallel_blocks: int = 2
    n_pairs: int = 2
    code_n: int = 1008
    code_k: int = 504
    code_seed: int = 1
    ldpc_iters: int = 50
    soft_index: bool = True

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        qam(self.order)  # validates the order
        if self.n_fft < 8 or self.n_fft % 4:
            raise ValueError(f"n_fft must be a multiple of 4 and >= 8, got {self.n_fft}")
        if self.bias_db < 0:
            raise ValueError(f"bias_db must be >= 0, got {self.bias_db}")
        if self.parallel_blocks not in (1, 2):
            raise ValueError(f"parallel_blocks must be 1 or 2, got {self.parallel_blocks}")
        if self.n_pairs != 2:
            raise ValueError("only n_pairs = 2 (one index bit per channel use) is supported")
        if not 0 < self.code_k < self.code_n:
            raise ValueError(f"need 0 < code_k < code_n, got {self.code_k}, {self.code_n}")
        if self.ldpc_iters < 1:
            raise ValueError("ldpc_iters must be >= 1")

    @property
    def bits_per_symbol(self) -> int:
        return self.order.bit_length() - 1

    def with_(self, **kw) -> "SchemeConfig":
        return replace(self, **kw)


def rate(cfg: SchemeConfig) -> Fraction:
    """Spectral efficiency in bits per channel use (exact)."""
    N, k = cfg.n_fft, cfg.bits_per_symbol
    full = Fraction(N - 2, 2 * N) * k
    if cfg.kind is Kind.DCO:
        return cfg.parallel_blocks * full
    if cfg.kind is Kind.ACO:
        return cfg.parallel_blocks * Fraction(k, 4)
    if cfg.kind is Kind.FLIP:
        return cfg.parallel_blocks * Fraction(N // 2 - 1, 2 * N) * k
    if cfg.kind is Kind.NDC:
        return full
    index_bits = math.ceil(math.log2(cfg.n_pairs))
    if cfg.kind is Kind.INDC:
        return full + index_bits
    return Fraction(cfg.code_k, cfg.code_n) * math.floor(math.log2(cfg.n_pairs)) + full


def polarity_separate(x):
    """Split ``x`` into its nonnegative part and its flipped negative part.

    ``x(n) == 0`` goes to the positive branch. Both outputs are
    nonnegative and ``x_plus - x_minus_flipped == x``.
    """
    x = np.asarray(x, dtype=float)
    neg = x < 0
    x_plus = np.where(neg, 0.0, x)
    x_minus = np.where(neg, -x, 0.0)
    return x_plus, x_minus


def dco_bias_factor(bias_db: float) -> float:
    """``k`` such that the bias ``k * sigma_x`` equals ``10 log10(k^2 + 1)`` dB."""
    if bias_db < 0:
        raise ValueError("bias must be >= 0 dB")
    return math.sqrt(10.0 ** (bias_db / 10.0) - 1.0)


@dataclass(frozen=True)
class SmDecision:
    """Output of the spatial-modulation ZF detector.

    ``active_column`` is 0-based; columns 0, 2 (LED1, LED3) carry the
    positive polarity, columns 1, 3 the negative one.
    """

    magnitude: np.ndarray
    active_column: np.ndarray
    sign: np.ndarray
    z: np.ndarray

    @property
    def signed(self) -> np.ndarray:
        return self.sign * self.magnitude


def _zf_columns(H) -> np.ndarray:
    """Per-column least-squares projectors ``h_i / (h_i^T h_i)``."""
    H = np.asarray(getattr(H, "gains", H), dtype=float)
    norms = np.sum(H * H, axis=0)
    if np.any(norms == 0):
        raise ValueError("channel has an all-zero column; the ZF detector is undefined")
    return H / norms


def sm_detect_zf(H, y, columns=None) -> SmDecision:
    """Per-column ZF spatial-modulation detection.

    ``z_i = (h_i^T h_i)^-1 h_i^T y`` for every column; the largest ``|z_i|``
    names the active LED (lowest index on ties). ``y`` has the receive
    dimension last. ``columns`` optionally restricts the search per sample
    (integer array of shape ``y.shape[:-1] + (c,)``).
    """
    proj = _zf_columns(H)
    y = np.asarray(y, dtype=float)
    z = y @ proj
    if columns is None:
        mag = np.abs(z)
        active = np.argmax(mag, axis=-1)
    else:
        mag = np.abs(np.take_along_axis(z, columns, axis=-1))
        active = np.take_along_axis(columns, np.argmax(mag, axis=-1)[..., None], axis=-1)[..., 0]
    magnitude = np.take_along_axis(np.abs(z), active[..., None], axis=-1)[..., 0]
    sign = np.where(active % 2 == 0, 1.0, -1.0)
    return SmDecision(magnitude, active, sign, z)


@dataclass
class RxResult:
    """Receiver output for a batch of frames.

    ``index_bits`` are the hard per-channel-use index decisions (coded
    bits for CINDC, padding excluded); ``info_bits`` are the decoded
    index information bits (CINDC only).
    """

    mod_bits: np.ndarray
    index_bits: np.ndarray | None = None
    info_bits: np.ndarray | None = None
    decoder_failures: int = 0
    decoder_iterations: int = 0


def _phi(a):
    return math.exp(-a * a / 2.0) / math.sqrt(2.0 * math.pi)


def _Phi(a):
    return 0.5 * (1.0 + math.erf(a / math.sqrt(2.0)))


class Scheme:
    """Common machinery: constellation, framing, payload sizes."""

    layout = Layout.FULL_HERMITIAN
    uses_per_symbol = 1

    def __init__(self, cfg: SchemeConfig):
        self.cfg = cfg
        self.N = cfg.n_fft
        self.const = qam(cfg.order)
        self.k = cfg.bits_per_symbol
        self.bins = used_subcarriers(self.N, self.layout)

    # --- sizes ----------------------------------------------------------
    @property
    def n_tx(self) -> int:
        raise NotImplementedError

    @property
    def symbols_per_frame(self) -> int:
        return 1

    @property
    def streams(self) -> int:
        return 1

    @property
    def mod_bits_per_frame(self) -> int:
        return self.streams * self.symbols_per_frame * len(self.bins) * self.k

    @property
    def index_bits_per_frame(self) -> int:
        return 0

    @property
    def info_bits_per_frame(self) -> int:
        return 0

    @property
    def uses_per_frame(self) -> int:
        return self.symbols_per_frame * self.N * self.uses_per_symbol

    @property
    def rate(self) -> Fraction:
        return rate(self.cfg)

    @property
    def sigma_x(self) -> float:
        """RMS of the IFFT output for unit-energy QAM (exact expectation)."""
        return math.sqrt(2 * len(self.bins)) / self.N

    def second_moment(self) -> np.ndarray:
        """``E[x x^T]`` of the LED drive vector, averaged over channel uses."""
        raise NotImplementedError

    # --- shared helpers -------------------------------------------------
    def _check_bits(self, bits, expected, what="modulation"):
        bits = np.asarray(bits, dtype=np.uint8)
        if bits.ndim == 1:
            bits = bits[None]
        if bits.shape[-1] != expected:
            raise ValueError(f"{self.cfg.kind.value}: expected {expected} {what} bits per frame, got {bits.shape[-1]}")
        return bits

    def modulate(self, bits) -> np.ndarray:
        """Bits ``(..., n_sym * k)`` to bipolar time samples ``(..., N)``."""
        sym = qam_map(bits, self.const)
        if self.layout is Layout.FULL_HERMITIAN:
            return ifft_real(frame_full(sym, self.N), check=False)
        return ifft_real(frame_odd(sym, self.N), check=False)

    def demodulate(self, signal, gain: float = 1.0) -> np.ndarray:
        spec = fft(signal)[..., self.bins] * gain
        return qam_demap_hard(spec, self.const)

    def transmit(self, mod_bits, index_bits=None) -> np.ndarray:
        raise NotImplementedError

    def receive(self, y, H_eff, sigma: float = 0.0, genie_index=None) -> RxResult:
        raise NotImplementedError


class _ParallelScheme(Scheme):
    """DCO / ACO / FLIP: one independent OFDM stream per LED, ZF at the receiver."""

    @property
    def n_tx(self) -> int:
        return self.cfg.parallel_blocks

    @property
    def streams(self) -> int:
        return self.cfg.parallel_blocks

    def _streams_signal(self, mod_bits):
        bits = self._check_bits(mod_bits, self.mod_bits_per_frame)
        per = bits.reshape(bits.shape[0], self.streams, -1)
        return self.modulate(per)  # (B, P, N)

    def _zf(self, y, H_eff):
        G = np.asarray(H_eff, dtype=float)
        if G.shape[1] != self.n_tx:
            raise ValueError(f"channel has {G.shape[1]} columns, scheme drives {self.n_tx} LEDs")
        if np.linalg.matrix_rank(G) < self.n_tx:
            raise ValueError("channel matrix is rank deficient; ZF equalisation impossible")
        return np.asarray(y, dtype=float) @ np.linalg.pinv(G).T


class DcoScheme(_ParallelScheme):
    """DC-biased OFDM: bias ``k sigma_x`` then clip negatives at zero."""

    @property
    def bias(self) -> float:
        return dco_bias_factor(self.cfg.bias_db) * self.sigma_x

    def transmit(self, mod_bits, index_bits=None):
        x = self._streams_signal(mod_bits)
        return np.maximum(x + self.bias, 0.0).transpose(0, 2, 1)

    def receive(self, y, H_eff, sigma=0.0, genie_index=None):
        est = self._zf(y, H_eff) - self.bias  # (B, N, P)
        bits = self.demodulate(est.transpose(0, 2, 1))
        return RxResult(bits.reshape(bits.shape[0], -1))

    def second_moment(self):
        s, kb = self.sigma_x, dco_bias_factor(self.cfg.bias_db)
        mean = s * (kb * _Phi(kb) + _phi(kb))
        power = s * s * ((kb * kb + 1.0) * _Phi(kb) + kb * _phi(kb))
        S = np.full((self.n_tx, self.n_tx), mean * mean)
        np.fill_diagonal(S, power)
        return S


class AcoScheme(_ParallelScheme):
    """Odd-subcarrier OFDM clipped at zero; odd bins arrive halved."""

    layout = Layout.ODD_ONLY_HERMITIAN

    def transmit(self, mod_bits, index_bits=None):
        x = self._streams_signal(mod_bits)
        return np.maximum(x, 0.0).transpose(0, 2, 1)

    def receive(self, y, H_eff, sigma=0.0, genie_index=None):
        est = self._zf(y, H_eff)
        bits = self.demodulate(est.transpose(0, 2, 1), gain=2.0)
        return RxResult(bits.reshape(bits.shape[0], -1))

    def second_moment(self):
        s = self.sigma_x
        S = np.full((self.n_tx, self.n_tx), s * s / (2.0 * math.pi))
        np.fill_diagonal(S, s * s / 2.0)
        return S


class FlipScheme(_ParallelScheme):
    """Positive part then flipped negative part in two consecutive OFDM symbols."""

    uses_per_symbol = 2

    def transmit(self, mod_bits, index_bits=None):
        x = self._streams_signal(mod_bits)
        pos, neg = polarity_separate(x)
        return np.concatenate([pos, neg], axis=-1).transpose(0, 2, 1)

    def receive(self, y, H_eff, sigma=0.0, genie_index=None):
        est = self._zf(y, H_eff).transpose(0, 2, 1)  # (B, P, 2N)
        bipolar = est[..., : self.N] - est[..., self.N :]
        bits = self.demodulate(bipolar)
        return RxResult(bits.reshape(bits.shape[0], -1))

    def second_moment(self):
        s = self.sigma_x
        S = np.full((self.n_tx, self.n_tx), s * s / (2.0 * math.pi))
        np.fill_diagonal(S, s * s / 2.0)
        return S


def _route(x, blocks, n_tx):
    """One-hot LED drive: sample ``x`` goes to pair ``blocks``; sign picks the LED inside the pair."""
    out = np.zeros(x.shape + (n_tx,))
    col = 2 * np.asarray(blocks, dtype=np.int64) + (x < 0)
    np.put_along_axis(out, col[..., None], np.abs(x)[..., None], axis=-1)
    return out


class NdcScheme(Scheme):
    """Non-DC-biased OFDM: x+ on LED1, flipped x- on LED2."""

    @property
    def n_tx(self):
        return 2

    def transmit(self, mod_bits, index_bits=None):
        bits = self._check_bits(mod_bits, self.mod_bits_per_frame)
        x = self.modulate(bits)
        return _route(x, np.zeros(x.shape, dtype=np.int64), 2)

    def receive(self, y, H_eff, sigma=0.0, genie_index=None):
        dec = sm_detect_zf(H_eff, y)
        return RxResult(self.demodulate(dec.signed))

    def second_moment(self):
        return np.eye(2) * self.sigma_x**2 / 2.0


class IndcScheme(Scheme):
    """Indexed NDC: one index bit per channel use picks the LED pair."""

    @property
    def n_tx(self):
        return 2 * self.cfg.n_pairs

    @property
    def index_bits_per_frame(self):
        return self.uses_per_frame

    def transmit(self, mod_bits, index_bits=None):
        bits = self._check_bits(mod_bits, self.mod_bits_per_frame)
        if index_bits is None:
            raise ValueError("indc: index bits are required")
        idx = self._check_bits(index_bits, self.index_bits_per_frame, "index")
        if idx.shape[0] != bits.shape[0]:
            raise ValueError("indc: modulation and index batches differ in size")
        x = self.modulate(bits)
        return _route(x, idx, self.n_tx)

    def receive(self, y, H_eff, sigma=0.0, genie_index=None):
        dec = sm_detect_zf(H_eff, y)
        idx = (dec.active_column // 2).astype(np.uint8)
        if genie_index is not None:
            idx = np.asarray(genie_index, dtype=np.uint8).reshape(idx.shape).copy()
        return RxResult(self.demodulate(dec.signed), index_bits=idx)

    def second_moment(self):
        return np.eye(self.n_tx) * self.sigma_x**2 / self.n_tx


class CindcScheme(Scheme):
    """Indexed NDC whose index stream is an LDPC codeword.

    One codeword of ``n_c`` coded index bits spans ``ceil(n_c / N)`` OFDM
    symbols; the remaining channel uses of the last symbol carry index
    bit 0 and are not counted.
    """

    def __init__(self, cfg: SchemeConfig, code: ldpc.LdpcCode | None = None):
        super().__init__(cfg)
        self._code = code

    @cached_property
    def code(self) -> ldpc.LdpcCode:
        if self._code is not None:
            if (self._code.n, self._code.k) != (self.cfg.code_n, self.cfg.code_k):
                raise ValueError("supplied code does not match code_n/code_k")
            return self._code
        return ldpc.construct(self.cfg.code_n, self.cfg.code_k, self.cfg.code_seed)

    def __getstate__(self):
        state = self.__dict__.copy()
        state.pop("code", None)  # rebuilt (cached) in the worker
        return state

    @property
    def n_tx(self):
        return 2 * self.cfg.n_pairs

    @property
    def symbols_per_frame(self):
        return -(-self.cfg.code_n // self.N)

    @property
    def padding_uses(self) -> int:
        return self.uses_per_frame - self.cfg.code_n

    @property
    def index_bits_per_frame(self):
        return self.cfg.code_n

    @property
    def info_bits_per_frame(self):
        return self.cfg.code_k

    def transmit(self, mod_bits, index_bits=None):
        bits = self._check_bits(mod_bits, self.mod_bits_per_frame)
        if index_bits is None:
            raise ValueError("cindc: information index bits are required")
        info = self._check_bits(index_bits, self.cfg.code_k, "index information")
        coded = self.code.encode(info)
        idx = np.concatenate([coded, np.zeros((coded.shape[0], self.padding_uses), dtype=np.uint8)], axis=1)
        S = self.symbols_per_frame
        x = self.modulate(bits.reshape(bits.shape[0], S, -1)).reshape(bits.shape[0], -1)
        return _route(x, idx, self.n_tx)

    def index_llr(self, z, H_eff, sigma: float) -> np.ndarray:
        """Soft index metric per channel use, positive favouring pair 0.

        Generalised likelihood ratio with the unknown intensity maximised
        out: column ``i`` scores ``z_i^2 / (2 var_i)`` where ``var_i`` is its
        ZF output noise variance; each pair keeps its best column.
        """
        G = np.asarray(H_eff, dtype=float)
        col_energy = np.sum(G * G, axis=0)
        if sigma > 0:
            score = z * z * col_energy / (2.0 * sigma * sigma)
            llr = score[..., 0:2].max(axis=-1) - score[..., 2:4].max(axis=-1)
            return np.clip(llr, -ldpc.LLR_CLAMP, ldpc.LLR_CLAMP)
        mag = np.abs(z) * np.sqrt(col_energy)
        return ldpc.LLR_CLAMP * np.sign(mag[..., 0:2].max(axis=-1) - mag[..., 2:4].max(axis=-1))

    def receive(self, y, H_eff, sigma=0.0, genie_index=None):
        n_c = self.cfg.code_n
        dec = sm_detect_zf(H_eff, y)
        raw = (dec.active_column[:, :n_c] // 2).astype(np.uint8)
        llr = self.index_llr(dec.z[:, :n_c], H_eff, sigma)
        if not self.cfg.soft_index:
            p = np.clip(np.mean(1.0 / (1.0 + np.exp(np.abs(llr))), axis=1, keepdims=True), 1e-12, 0.49)
            llr = (1.0 - 2.0 * raw) * np.log((1.0 - p) / p)
        words, conv, iters = ldpc.decode(self.code, llr, self.cfg.ldpc_iters)
        blocks = np.concatenate([words, np.zeros((words.shape[0], self.padding_uses), dtype=np.uint8)], axis=1)
        cols = 2 * blocks.astype(np.int64)[..., None] + np.arange(2)
        redet = sm_detect_zf(H_eff, y, columns=cols)
        S = self.symbols_per_frame
        signed = redet.signed.reshape(y.shape[0], S, self.N)
        mod = self.demodulate(signed).reshape(y.shape[0], -1)
        return RxResult(
            mod,
            index_bits=raw,
            info_bits=self.code.extract_info(words),
            decoder_failures=int(np.count_nonzero(~conv)),
            decoder_iterations=int(np.sum(iters)),
        )

    def second_moment(self):
        n_c, uses = self.cfg.code_n, self.uses_per_frame
        p0 = (n_c / 2 + self.padding_uses) / uses
        p = np.array([p0, p0, 1 - p0, 1 - p0]) / 2.0
        return np.diag(p) * self.sigma_x**2


_SCHEMES = {
    Kind.DCO: DcoScheme,
    Kind.ACO: AcoScheme,
    Kind.FLIP: FlipScheme,
    Kind.NDC: NdcScheme,
    Kind.INDC: IndcScheme,
    Kind.CINDC: CindcScheme,
}


def make_scheme(cfg: SchemeConfig, **kw) -> Scheme:
    return _SCHEMES[cfg.kind](cfg, **kw)
