"""Deterministic Monte Carlo BER engine.

A point is a sequence of *trials*. Trial ``t`` at SNR ``s`` draws all of
its randomness (payload bits and noise) from
``SeedSequence([seed, key(s), t])``, so a point depends only on the
configuration and not on how trials are spread over worker processes.
Trials are consumed in index order and the point stops at the first
trial that satisfies the stopping rule; trials computed past that
point by parallel workers are discarded.
"""

from __future__ import annotations

import csv
import math
import struct
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Iterable

import numpy as np

from .channel import GeometryConfig, build_channel, received_power_sq, received_power_sq_moments, sigma_for_snr
from .schemes import Kind, Scheme, SchemeConfig, make_scheme

__all__ = [
    "SimConfig",
    "BerPoint",
    "Link",
    "run_point",
    "run_sweep",
    "sweep_dtx",
    "CSV_COLUMNS",
    "write_csv_header",
    "csv_row",
]

CSV_COLUMNS = (
    "scheme",
    "snr_db",
    "trials",
    "bits_mod",
    "errs_mod",
    "bits_idx",
    "errs_idx",
    "bits_idx_info",
    "errs_idx_info",
    "ber_total",
    "ci95_low",
    "ci95_high",
    "seed",
)

TRIAL_USES = 16384


@dataclass(frozen=True)
class SimConfig:
    """Everything that determines a BER sweep.

    ``snr_reference`` selects how the average received power behind the
    SNR axis is computed: ``"received"`` averages ``|H_i x|^2`` over the
    actual LED drive statistics of the scheme (DC bias and clipping
    included); ``"closed_form"`` uses ``sigma_x^2 / (2 N_r) sum h_ij^2``
    for every scheme.
    """

    scheme: SchemeConfig
    geometry: GeometryConfig = field(default_factory=GeometryConfig)
    snrs: tuple[float, ...] = ()
    min_errors: int = 200
    max_uses: int = 100_000_000
    seed: int = 1
    genie_index: bool = False
    sigma_override: float | None = None
    snr_reference: str = "received"
    trial_uses: int = TRIAL_USES
    workers: int = 1
    label: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "snrs", tuple(float(s) for s in self.snrs))
        if self.min_errors < 1:
            raise ValueError("min_errors must be >= 1")
        if self.max_uses < 1:
            raise ValueError("max_uses must be >= 1")
        if not all(math.isfinite(s) for s in self.snrs):
            raise ValueError("SNR list must be finite")
        if self.snr_reference not in ("received", "closed_form"):
            raise ValueError(f"unknown snr_reference {self.snr_reference!r}")
        if self.sigma_override is not None and self.sigma_override < 0:
            raise ValueError("sigma_override must be >= 0")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.genie_index and self.scheme.kind is not Kind.INDC:
            raise ValueError("genie index mode applies to INDC only")

    @property
    def name(self) -> str:
        return self.label or f"{self.scheme.kind.value}-M{self.scheme.order}"

    def with_(self, **kw) -> "SimConfig":
        return replace(self, **kw)


@dataclass
class BerPoint:
    scheme: str
    snr_db: float
    seed: int
    trials: int = 0
    frames: int = 0
    channel_uses: int = 0
    bits_mod: int = 0
    errs_mod: int = 0
    bits_idx: int = 0
    errs_idx: int = 0
    bits_idx_info: int = 0
    errs_idx_info: int = 0
    decoder_failures: int = 0
    decoder_iterations: int = 0
    total_class: str = "mod"
    stop_reason: str = ""
    sigma: float = 0.0
    elapsed: float = 0.0

    @property
    def bits_total(self) -> int:
        if self.total_class == "mod+idx":
            return self.bits_mod + self.bits_idx
        if self.total_class == "mod+info":
            return self.bits_mod + self.bits_idx_info
        return self.bits_mod

    @property
    def errs_total(self) -> int:
        if self.total_class == "mod+idx":
            return self.errs_mod + self.errs_idx
        if self.total_class == "mod+info":
            return self.errs_mod + self.errs_idx_info
        return self.errs_mod

    @property
    def ber_total(self) -> float:
        return self.errs_total / self.bits_total if self.bits_total else float("nan")

    @property
    def ber_mod(self) -> float:
        return self.errs_mod / self.bits_mod if self.bits_mod else float("nan")

    @property
    def ber_idx(self) -> float:
        return self.errs_idx / self.bits_idx if self.bits_idx else float("nan")

    @property
    def ber_info(self) -> float:
        return self.errs_idx_info / self.bits_idx_info if self.bits_idx_info else float("nan")

    @property
    def ci95(self) -> tuple[float, float]:
        """Normal-approximation 95% interval of the total BER, clipped to [0, 1]."""
        n = self.bits_total
        if not n:
            return (float("nan"), float("nan"))
        p = self.ber_total
        half = 1.959963984540054 * math.sqrt(p * (1.0 - p) / n)
        return (max(0.0, p - half), min(1.0, p + half))

    def add(self, other: "BerPoint") -> None:
        for name in (
            "trials",
            "frames",
            "channel_uses",
            "bits_mod",
            "errs_mod",
            "bits_idx",
            "errs_idx",
            "bits_idx_info",
            "errs_idx_info",
            "decoder_failures",
            "decoder_iterations",
        ):
            setattr(self, name, getattr(self, name) + getattr(other, name))

    def as_dict(self) -> dict:
        d = asdict(self)
        d.update(ber_total=self.ber_total, ci95=list(self.ci95))
        return d


def _snr_key(snr_db: float) -> int:
    return int.from_bytes(struct.pack("<d", float(snr_db)), "little")


def trial_rng(seed: int, snr_db: float, trial: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), _snr_key(snr_db), int(trial)]))


class Link:
    """A scheme wired to its channel at one noise level."""

    def __init__(self, cfg: SimConfig, snr_db: float):
        self.cfg = cfg
        self.snr_db = float(snr_db)
        self.scheme: Scheme = make_scheme(cfg.scheme)
        geom = cfg.geometry.build()
        if geom.n_tx != self.scheme.n_tx:
            raise ValueError(f"{cfg.name}: geometry has {geom.n_tx} LEDs, scheme drives {self.scheme.n_tx}")
        resp = {pd.responsivity for pd in geom.pds}
        if len(resp) != 1:
            raise ValueError("all photodetectors must share one responsivity")
        self.responsivity = resp.pop()
        self.H = build_channel(geom)
        self.H_eff = self.responsivity * self.H.gains
        if cfg.snr_reference == "received":
            self.pr_sq = received_power_sq_moments(self.H, self.scheme.second_moment())
        else:
            self.pr_sq = received_power_sq(self.H, self.scheme.sigma_x)
        if cfg.sigma_override is not None:
            self.sigma = float(cfg.sigma_override)
        else:
            self.sigma = sigma_for_snr(snr_db, self.responsivity, self.pr_sq)
        kind = cfg.scheme.kind
        self.total_class = {Kind.INDC: "mod+idx", Kind.CINDC: "mod+info"}.get(kind, "mod")
        self.frames_per_trial = max(1, cfg.trial_uses // self.scheme.uses_per_frame)

    def run_trial(self, trial: int) -> BerPoint:
        s = self.scheme
        rng = trial_rng(self.cfg.seed, self.snr_db, trial)
        F = self.frames_per_trial
        mod = rng.integers(0, 2, size=(F, s.mod_bits_per_frame), dtype=np.uint8)
        n_idx = s.info_bits_per_frame or s.index_bits_per_frame
        idx = rng.integers(0, 2, size=(F, n_idx), dtype=np.uint8) if n_idx else None
        x = s.transmit(mod, idx)
        y = x @ self.H_eff.T
        if self.sigma > 0:
            y = y + rng.normal(0.0, self.sigma, size=y.shape)
        genie = idx if self.cfg.genie_index else None
        rx = s.receive(y, self.H_eff, self.sigma, genie_index=genie)

        pt = BerPoint(self.cfg.name, self.snr_db, self.cfg.seed, total_class=self.total_class)
        pt.trials, pt.frames, pt.channel_uses = 1, F, F * s.uses_per_frame
        pt.bits_mod = mod.size
        pt.errs_mod = int(np.count_nonzero(rx.mod_bits != mod))
        if s.cfg.kind is Kind.INDC:
            pt.bits_idx = idx.size
            pt.errs_idx = int(np.count_nonzero(rx.index_bits != idx))
        elif s.cfg.kind is Kind.CINDC:
            coded = s.code.encode(idx)
            pt.bits_idx = coded.size
            pt.errs_idx = int(np.count_nonzero(rx.index_bits != coded))
            pt.bits_idx_info = idx.size
            pt.errs_idx_info = int(np.count_nonzero(rx.info_bits != idx))
            pt.decoder_failures = rx.decoder_failures
            pt.decoder_iterations = rx.decoder_iterations
        return pt


def _trial_worker(args):
    cfg, snr_db, trials = args
    link = Link(cfg, snr_db)
    return [link.run_trial(t) for t in trials]


def _accumulate(acc: BerPoint, pt: BerPoint, cfg: SimConfig) -> bool:
    acc.add(pt)
    if acc.errs_total >= cfg.min_errors:
        acc.stop_reason = "min_errors"
        return True
    if acc.channel_uses >= cfg.max_uses:
        acc.stop_reason = "max_uses"
        return True
    return False


def run_point(cfg: SimConfig, snr_db: float, pool: ProcessPoolExecutor | None = None) -> BerPoint:
    """Simulate one SNR until ``min_errors`` total errors or ``max_uses`` channel uses."""
    t0 = time.perf_counter()
    link = Link(cfg, snr_db)
    acc = BerPoint(cfg.name, float(snr_db), cfg.seed, total_class=link.total_class, sigma=link.sigma)
    if pool is None or cfg.workers == 1:
        trial = 0
        while not _accumulate(acc, link.run_trial(trial), cfg):
            trial += 1
    else:
        start, done = 0, False
        batch = cfg.workers
        while not done:
            jobs = [(cfg, snr_db, [t]) for t in range(start, start + batch)]
            for res in pool.map(_trial_worker, jobs):
                if _accumulate(acc, res[0], cfg):
                    done = True
                    break
            start += batch
    acc.elapsed = time.perf_counter() - t0
    return acc


def write_csv_header(fh) -> csv.writer:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    return w


def csv_row(pt: BerPoint) -> list[str]:
    lo, hi = pt.ci95
    return [
        pt.scheme,
        f"{pt.snr_db:.12g}",
        str(pt.trials),
        str(pt.bits_mod),
        str(pt.errs_mod),
        str(pt.bits_idx),
        str(pt.errs_idx),
        str(pt.bits_idx_info),
        str(pt.errs_idx_info),
        f"{pt.ber_total:.12g}",
        f"{lo:.12g}",
        f"{hi:.12g}",
        str(pt.seed),
    ]


def run_sweep(cfg: SimConfig, csv_path=None, progress=None) -> list[BerPoint]:
    """Run every SNR of ``cfg.snrs`` in order.

    With ``csv_path`` each point is appended and flushed as soon as it
    finishes, so an interrupted sweep keeps its completed rows.
    """
    points: list[BerPoint] = []
    fh = open(csv_path, "w", newline="") if csv_path is not None else None
    pool = ProcessPoolExecutor(cfg.workers) if cfg.workers > 1 else None
    try:
        writer = write_csv_header(fh) if fh else None
        if fh:
            fh.flush()
        for snr in cfg.snrs:
            pt = run_point(cfg, snr, pool)
            points.append(pt)
            if writer:
                writer.writerow(csv_row(pt))
                fh.flush()
            if progress:
                progress(pt)
    finally:
        if pool is not None:
            pool.shutdown(cancel_futures=True)
        if fh:
            fh.close()
    return points


def sweep_dtx(cfg: SimConfig, dtx_values: Iterable[float], snrs: Iterable[float] | None = None, progress=None):
    """BER against LED spacing at fixed SNRs.

    The channel and the noise level are rebuilt for every spacing so the
    SNR stays at its nominal value. Returns ``(d_tx, BerPoint)`` pairs
    ordered by SNR, then spacing.
    """
    if cfg.geometry.n_tx != 4:
        raise ValueError("the spacing sweep needs the 4-LED grid geometry")
    dtx_values = [float(d) for d in dtx_values]
    for d in dtx_values:
        replace(cfg.geometry, d_tx=d).build()  # reject bad spacings up front
    snrs = cfg.snrs if snrs is None else tuple(float(s) for s in snrs)
    out = []
    pool = ProcessPoolExecutor(cfg.workers) if cfg.workers > 1 else None
    try:
        for snr in snrs:
            for d in dtx_values:
                c = cfg.with_(geometry=replace(cfg.geometry, d_tx=d))
                pt = run_point(c, snr, pool)
                out.append((d, pt))
                if progress:
                    progress(d, pt)
    finally:
        if pool is not None:
            pool.shutdown(cancel_futures=True)
    return out
