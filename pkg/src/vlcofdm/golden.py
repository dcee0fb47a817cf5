"""Plain-text reference vectors for cross-implementation checks.

Three versioned files live in the package data directory:

``ifft_golden_v1.txt``
    Blocks of ``frame <name> N <n> layout <full|odd>``, then N lines
    ``k re im`` for the subcarrier frame and N lines ``n x`` for the
    time signal (numpy convention: inverse transform scaled by 1/N).
``qam128_v1.txt``
    One line per point, ``label re im``, for the unit-energy cross
    constellation.
``transcripts_v1.txt``
    Per vector: ``vector <name> kind <k> M <m> N <n> seed <s>``, the
    payload as ``mod_bits`` / ``index_bits`` lines, then one line per
    channel use ``use led intensity`` for every LED.

Numbers use 12 significant digits. Regenerate with
``python -m vlcofdm.golden``.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .ofdm import Layout, frame_full, frame_odd, ifft_real, qam, qam_map
from .schemes import SchemeConfig, make_scheme

DATA = Path(__file__).with_name("data")
IFFT_FILE = DATA / "ifft_golden_v1.txt"
QAM128_FILE = DATA / "qam128_v1.txt"
TRANSCRIPT_FILE = DATA / "transcripts_v1.txt"

_G = "{:.12g}"


def _fmt(v: float) -> str:
    s = _G.format(float(v))
    return "0" if s == "-0" else s


def ifft_vectors():
    """``(name, N, layout, frame, signal)`` tuples covering N = 8 and 64."""
    rng = np.random.default_rng(2024)
    out = []

    tone = np.zeros(3, complex)
    tone[0] = 1.0
    out.append(("tone1", 8, Layout.FULL_HERMITIAN, frame_full(tone, 8)))
    for n in (8, 64):
        sym = qam_map(rng.integers(0, 2, size=(n // 2 - 1) * 4), 16)
        out.append((f"full16_n{n}", n, Layout.FULL_HERMITIAN, frame_full(sym, n)))
        sym = qam_map(rng.integers(0, 2, size=(n // 4) * 2), 4)
        out.append((f"odd4_n{n}", n, Layout.ODD_ONLY_HERMITIAN, frame_odd(sym, n)))
    return [(name, n, lay, f, ifft_real(f)) for name, n, lay, f in out]


def format_ifft(vectors) -> str:
    lines = ["# ifft golden vectors v1"]
    for name, n, lay, frame, sig in vectors:
        tag = "full" if lay is Layout.FULL_HERMITIAN else "odd"
        lines.append(f"frame {name} N {n} layout {tag}")
        lines += [f"{k} {_fmt(v.real)} {_fmt(v.imag)}" for k, v in enumerate(frame)]
        lines += [f"{i} {_fmt(v)}" for i, v in enumerate(sig)]
    return "\n".join(lines) + "\n"


def parse_ifft(text: str):
    """Inverse of :func:`format_ifft`; returns ``(name, N, layout, frame, signal)``."""
    rows = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    out, i = [], 0
    while i < len(rows):
        head = rows[i]
        name, n, tag = head[1], int(head[3]), head[5]
        frame = np.array([complex(float(r[1]), float(r[2])) for r in rows[i + 1 : i + 1 + n]])
        sig = np.array([float(r[1]) for r in rows[i + 1 + n : i + 1 + 2 * n]])
        lay = Layout.FULL_HERMITIAN if tag == "full" else Layout.ODD_ONLY_HERMITIAN
        out.append((name, n, lay, frame, sig))
        i += 1 + 2 * n
    return out


def format_qam128() -> str:
    c = qam(128)
    lines = ["# 128-QAM cross constellation v1: label re im"]
    lines += [f"{lab} {_fmt(p.real)} {_fmt(p.imag)}" for lab, p in zip(c.labels, c.points)]
    return "\n".join(lines) + "\n"


def parse_qam128(text: str):
    rows = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    return [r[0] for r in rows], np.array([complex(float(r[1]), float(r[2])) for r in rows])


TRANSCRIPT_CASES = (
    ("dco4", SchemeConfig("dco", 4, n_fft=8, parallel_blocks=1, bias_db=7.0), 11),
    ("aco16", SchemeConfig("aco", 16, n_fft=8, parallel_blocks=1), 12),
    ("flip16", SchemeConfig("flip", 16, n_fft=8, parallel_blocks=1), 13),
    ("ndc4", SchemeConfig("ndc", 4, n_fft=8), 14),
    ("indc4", SchemeConfig("indc", 4, n_fft=8), 15),
)


def transcript(name: str, cfg: SchemeConfig, seed: int):
    """Payload and drive intensities for one frame of ``cfg``."""
    s = make_scheme(cfg)
    rng = np.random.default_rng(seed)
    mod = rng.integers(0, 2, size=s.mod_bits_per_frame, dtype=np.uint8)
    idx = rng.integers(0, 2, size=s.index_bits_per_frame, dtype=np.uint8) if s.index_bits_per_frame else None
    x = s.transmit(mod, idx)[0]
    return {"name": name, "cfg": cfg, "seed": seed, "mod": mod, "idx": idx, "x": x}


def format_transcripts(items) -> str:
    lines = ["# scheme transcripts v1"]
    for t in items:
        c = t["cfg"]
        lines.append(f"vector {t['name']} kind {c.kind.value} M {c.order} N {c.n_fft} seed {t['seed']}")
        lines.append("mod_bits " + "".join(map(str, t["mod"])))
        lines.append("index_bits " + ("".join(map(str, t["idx"])) if t["idx"] is not None else "-"))
        for u, row in enumerate(t["x"]):
            lines += [f"{u} {j + 1} {_fmt(v)}" for j, v in enumerate(row)]
    return "\n".join(lines) + "\n"


def parse_transcripts(text: str):
    out = []
    cur = None
    for ln in text.splitlines():
        p = ln.split()
        if not p or ln.startswith("#"):
            continue
        if p[0] == "vector":
            cur = {"name": p[1], "kind": p[3], "M": int(p[5]), "N": int(p[7]), "seed": int(p[9]), "rows": []}
            out.append(cur)
        elif p[0] == "mod_bits":
            cur["mod"] = np.array([int(b) for b in p[1]], dtype=np.uint8)
        elif p[0] == "index_bits":
            cur["idx"] = None if p[1] == "-" else np.array([int(b) for b in p[1]], dtype=np.uint8)
        else:
            cur["rows"].append((int(p[0]), int(p[1]), float(p[2])))
    for t in out:
        uses = max(r[0] for r in t["rows"]) + 1
        leds = max(r[1] for r in t["rows"])
        x = np.zeros((uses, leds))
        for u, j, v in t["rows"]:
            x[u, j - 1] = v
        t["x"] = x
    return out


def write_all(directory: Path = DATA) -> None:
    directory = Path(directory)
    (directory / IFFT_FILE.name).write_text(format_ifft(ifft_vectors()))
    (directory / QAM128_FILE.name).write_text(format_qam128())
    items = [transcript(*case) for case in TRANSCRIPT_CASES]
    (directory / TRANSCRIPT_FILE.name).write_text(format_transcripts(items))


if __name__ == "__main__":
    write_all()
