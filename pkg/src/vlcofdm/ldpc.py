"""Binary LDPC codes: PEG construction, systematic encoding, sum-product decoding.

LLR sign convention: positive favours bit 0.

Parity-check matrices round-trip through the MacKay "alist" text
layout::

    n m
    max_col_weight max_row_weight
    <n column weights>
    <m row weights>
    <n lines: 1-based row indices of each column, zero-padded>
    <m lines: 1-based column indices of each row, zero-padded>
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from . import kernels

__all__ = ["LdpcCode", "construct", "encode", "decode", "gf2_rank", "read_alist", "write_alist", "LLR_CLAMP"]

LLR_CLAMP = 30.0
_DATA = Path(__file__).with_name("data")


def _gf2_systematic(Hd: np.ndarray):
    """Gauss-Jordan over GF(2) with column pivoting.

    Returns ``(rank, perm, P)`` such that the rows of ``Hd[:, perm]`` span
    the same space as ``[I_rank | P]``.
    """
    A = (np.asarray(Hd) & 1).astype(np.uint8).copy()
    m, n = A.shape
    perm = np.arange(n)
    r = 0
    for col in range(n):
        if r == m:
            break
        # pick a pivot column at or after `col` with a 1 in some row >= r
        live = np.flatnonzero(A[r:, col:].any(axis=0))
        if live.size == 0:
            break
        pc = col + int(live[0])
        pr = r + int(np.argmax(A[r:, pc]))
        if pc != col:
            A[:, [col, pc]] = A[:, [pc, col]]
            perm[[col, pc]] = perm[[pc, col]]
        if pr != r:
            A[[r, pr]] = A[[pr, r]]
        rows = np.flatnonzero(A[:, col])
        rows = rows[rows != r]
        A[rows] ^= A[r]
        r += 1
    return r, perm, A[:r, r:].copy()


def gf2_rank(Hd) -> int:
    return _gf2_systematic(Hd)[0]


@dataclass(frozen=True, eq=False)
class LdpcCode:
    """Sparse parity-check code with a systematic encoder.

    ``info_positions`` lists where the ``k`` information bits appear
    verbatim in every codeword.
    """

    n: int
    k: int
    rows: tuple[tuple[int, ...], ...]
    seed: int | None = None

    def __post_init__(self):
        m = len(self.rows)
        if not 0 < self.k < self.n:
            raise ValueError(f"need 0 < k < n, got n={self.n}, k={self.k}")
        dense = np.zeros((m, self.n), dtype=np.uint8)
        for c, vs in enumerate(self.rows):
            if len(set(vs)) != len(vs) or any(not 0 <= v < self.n for v in vs):
                raise ValueError(f"check {c} has repeated or out-of-range variables")
            dense[c, list(vs)] = 1
        rank, perm, P = _gf2_systematic(dense)
        if rank != self.n - self.k:
            raise ValueError(f"parity-check rank {rank} does not match n - k = {self.n - self.k}")
        # CSR by check and by variable
        chk_ptr = np.zeros(m + 1, dtype=np.int64)
        chk_ptr[1:] = np.cumsum([len(vs) for vs in self.rows])
        edge_var = np.array([v for vs in self.rows for v in vs], dtype=np.int64)
        var_edges = np.argsort(edge_var, kind="stable").astype(np.int64)
        var_ptr = np.zeros(self.n + 1, dtype=np.int64)
        var_ptr[1:] = np.cumsum(np.bincount(edge_var, minlength=self.n))
        for name, arr in (
            ("dense", dense),
            ("perm", perm),
            ("parity_part", P),
            ("chk_ptr", chk_ptr),
            ("edge_var", edge_var),
            ("var_ptr", var_ptr),
            ("var_edges", var_edges),
        ):
            arr.setflags(write=False)
            object.__setattr__(self, "_" + name, arr)

    @property
    def m(self) -> int:
        return len(self.rows)

    @property
    def rate(self) -> float:
        return self.k / self.n

    @property
    def parity_check(self) -> np.ndarray:
        return self._dense

    @property
    def info_positions(self) -> np.ndarray:
        return self._perm[self.n - self.k :]

    @property
    def column_weights(self) -> np.ndarray:
        return self._dense.sum(axis=0)

    @property
    def row_weights(self) -> np.ndarray:
        return self._dense.sum(axis=1)

    def syndrome(self, words) -> np.ndarray:
        words = np.atleast_2d(np.asarray(words, dtype=np.int64))
        return (words @ self._dense.T.astype(np.int64)) & 1

    def is_codeword(self, words) -> np.ndarray:
        return ~self.syndrome(words).any(axis=1)

    def encode(self, info) -> np.ndarray:
        return encode(self, info)

    def decode(self, llrs, max_iter: int = 50):
        return decode(self, llrs, max_iter)

    def extract_info(self, words) -> np.ndarray:
        return np.asarray(words)[..., self.info_positions]


def encode(code: LdpcCode, info) -> np.ndarray:
    """Systematic encoding; ``info`` has shape ``(..., k)``."""
    u = np.asarray(info, dtype=np.int64)
    if u.shape[-1] != code.k:
        raise ValueError(f"expected {code.k} information bits, got {u.shape[-1]}")
    parity = (u @ code._parity_part.T.astype(np.int64)) & 1
    permuted = np.concatenate([parity, u], axis=-1)
    out = np.empty_like(permuted)
    out[..., code._perm] = permuted
    return out.astype(np.uint8)


def decode(code: LdpcCode, llrs, max_iter: int = 50, backend=None):
    """Sum-product decoding with syndrome early exit.

    Returns ``(bits, converged, iterations)``. A zero posterior LLR counts
    as undecided, so an all-zero input never reports convergence.
    Leading axes of ``llrs`` are batch axes; a 1-D input returns scalars
    for ``converged`` and ``iterations``.
    """
    llrs = np.asarray(llrs, dtype=np.float64)
    if llrs.shape[-1] != code.n:
        raise ValueError(f"expected {code.n} LLRs, got {llrs.shape[-1]}")
    single = llrs.ndim == 1
    flat = llrs.reshape(-1, code.n)
    fn = backend or kernels.bp_decode
    bits, conv, iters = fn(flat, code._chk_ptr, code._edge_var, code._var_ptr, code._var_edges, int(max_iter))
    if single:
        return bits[0], bool(conv[0]), int(iters[0])
    lead = llrs.shape[:-1]
    return bits.reshape(*lead, code.n), conv.reshape(lead), iters.reshape(lead)


def _peg_rows(n: int, m: int, col_weight: int, seed: int) -> list[list[int]]:
    """Progressive edge growth with a hard cap on check degrees.

    Each new edge of variable ``j`` goes to a check that is unreachable
    from ``j`` in the current graph when one exists, otherwise to a check
    first reached at the deepest level of the breadth-first expansion.
    Ties go to the lowest current check degree, then to the seeded RNG.
    """
    rng = np.random.default_rng(seed)
    cap = math.ceil(n * col_weight / m)
    chk_deg = np.zeros(m, dtype=np.int64)
    var_adj: list[list[int]] = [[] for _ in range(n)]
    chk_adj: list[list[int]] = [[] for _ in range(m)]

    def pick(cands: np.ndarray) -> int:
        d = chk_deg[cands]
        best = cands[d == d.min()]
        return int(best[rng.integers(best.size)])

    for j in range(n):
        for _ in range(col_weight):
            eligible = (chk_deg < cap)
            eligible[var_adj[j]] = False
            if not eligible.any():
                raise ValueError(f"degree distribution infeasible: no check left for variable {j}")
            if not var_adj[j]:
                c = pick(np.flatnonzero(eligible))
            else:
                reached = np.zeros(m, dtype=bool)
                seen_var = np.zeros(n, dtype=bool)
                seen_var[j] = True
                frontier = list(var_adj[j])
                reached[frontier] = True
                prev = reached.copy()
                while True:
                    nxt_vars = {v for c0 in frontier for v in chk_adj[c0] if not seen_var[v]}
                    seen_var[list(nxt_vars)] = True
                    new_chk = {c1 for v in nxt_vars for c1 in var_adj[v] if not reached[c1]}
                    if not new_chk:
                        break
                    prev = reached.copy()
                    reached[list(new_chk)] = True
                    if (eligible & ~reached).sum() == 0:
                        break
                    frontier = list(new_chk)
                unreached = eligible & ~reached
                if unreached.any():
                    c = pick(np.flatnonzero(unreached))
                else:
                    last_layer = eligible & ~prev
                    c = pick(np.flatnonzero(last_layer if last_layer.any() else eligible))
            var_adj[j].append(c)
            chk_adj[c].append(j)
            chk_deg[c] += 1
    return [sorted(vs) for vs in chk_adj]


def construct(n: int, k: int, seed: int = 1, col_weight: int = 3) -> LdpcCode:
    """Column-weight-3 PEG code of length ``n`` and dimension ``k``.

    For rate 1/2 the check degrees come out exactly 6. Construction is
    deterministic for a given seed. Codes shipped in the package data
    directory are loaded instead of rebuilt.
    """
    if not 0 < k < n:
        raise ValueError(f"need n > k > 0, got n={n}, k={k}")
    m = n - k
    if m < col_weight:
        raise ValueError(f"degree distribution infeasible: {m} checks cannot give column weight {col_weight}")
    if n * col_weight < 2 * m:
        raise ValueError("degree distribution infeasible: fewer than two edges per check")
    return _construct_cached(n, k, seed, col_weight)


@lru_cache(maxsize=16)
def _construct_cached(n, k, seed, col_weight):
    shipped = _DATA / f"peg_{n}_{k}_seed{seed}.alist"
    if col_weight == 3 and shipped.exists():
        return read_alist(shipped, k=k, seed=seed)
    rows = _peg_rows(n, n - k, col_weight, seed)
    return LdpcCode(n, k, tuple(tuple(r) for r in rows), seed)


def write_alist(code: LdpcCode, path) -> None:
    cols: list[list[int]] = [[] for _ in range(code.n)]
    for c, vs in enumerate(code.rows):
        for v in vs:
            cols[v].append(c)
    max_cw = max(len(c) for c in cols)
    max_rw = max(len(r) for r in code.rows)
    lines = [
        f"{code.n} {code.m}",
        f"{max_cw} {max_rw}",
        " ".join(str(len(c)) for c in cols),
        " ".join(str(len(r)) for r in code.rows),
    ]
    lines += [" ".join(str(i + 1) for i in c) + " 0" * (max_cw - len(c)) for c in cols]
    lines += [" ".join(str(i + 1) for i in r) + " 0" * (max_rw - len(r)) for r in code.rows]
    Path(path).write_text("\n".join(lines) + "\n")


def read_alist(path, k: int | None = None, seed: int | None = None) -> LdpcCode:
    """Load an alist file; ``k`` defaults to ``n - rank(H)``."""
    tok = [int(t) for t in Path(path).read_text().split()]
    n, m = tok[0], tok[1]
    pos = 4
    col_w = tok[pos : pos + n]
    pos += n
    row_w = tok[pos : pos + m]
    pos += m
    max_cw, max_rw = tok[2], tok[3]
    cols = []
    for j in range(n):
        cols.append([i - 1 for i in tok[pos : pos + max_cw] if i > 0])
        pos += max_cw
    rows = []
    for i in range(m):
        rows.append([j - 1 for j in tok[pos : pos + max_rw] if j > 0])
        pos += max_rw
    if [len(c) for c in cols] != col_w or [len(r) for r in rows] != row_w:
        raise ValueError(f"{path}: declared weights do not match adjacency lists")
    from_cols = sorted((i, j) for j, c in enumerate(cols) for i in c)
    from_rows = sorted((i, j) for i, r in enumerate(rows) for j in r)
    if from_cols != from_rows:
        raise ValueError(f"{path}: column and row lists disagree")
    if k is None:
        dense = np.zeros((m, n), dtype=np.uint8)
        for i, j in from_rows:
            dense[i, j] = 1
        k = n - gf2_rank(dense)
    return LdpcCode(n, k, tuple(tuple(sorted(r)) for r in rows), seed)
