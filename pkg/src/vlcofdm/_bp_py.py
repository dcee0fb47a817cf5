"""Pure-numpy sum-product decoder (fallback for the compiled kernel).

Messages live on edges sorted by check node. Check updates run in the
log-magnitude domain so that an exactly-zero incoming message removes
itself cleanly from the leave-one-out product.
"""

import numpy as np

LLR_CLAMP = 30.0
_TINY = 1e-300


def bp_decode(llr, chk_ptr, edge_var, var_ptr, var_edges, max_iter):
    """Flooding sum-product decode of a batch of LLR vectors.

    Parameters
    ----------
    llr : (B, n) float64
        Channel LLRs, positive favours bit 0.
    chk_ptr : (m+1,) int64
        Edge offsets per check; edges ``chk_ptr[c]:chk_ptr[c+1]`` belong to check ``c``.
    edge_var : (E,) int64
        Variable node of every edge.
    var_ptr, var_edges : int64
        CSR listing of edge ids per variable node.
    max_iter : int

    Returns
    -------
    bits : (B, n) uint8
    converged : (B,) bool
    iterations : (B,) int64
    """
    llr = np.clip(np.asarray(llr, dtype=np.float64), -LLR_CLAMP, LLR_CLAMP)
    B, n = llr.shape
    m = len(chk_ptr) - 1
    chk_start = chk_ptr[:-1]
    var_start = var_ptr[:-1]
    chk_of_edge = np.repeat(np.arange(m), np.diff(chk_ptr))

    bits = (llr < 0).astype(np.uint8)
    iterations = np.zeros(B, dtype=np.int64)
    converged = _is_codeword(bits, llr, edge_var, chk_start)

    active = np.flatnonzero(~converged)
    if active.size == 0 or max_iter <= 0:
        return bits, converged, iterations

    ch = llr[active]
    v2c = ch[:, edge_var]
    for it in range(1, max_iter + 1):
        t = np.tanh(v2c / 2.0)
        neg = t < 0
        la = np.log(np.maximum(np.abs(t), _TINY))
        la_sum = np.add.reduceat(la, chk_start, axis=1)
        neg_par = np.add.reduceat(neg.astype(np.int64), chk_start, axis=1) & 1
        excl = np.exp(la_sum[:, chk_of_edge] - la)
        sgn = np.where((neg_par[:, chk_of_edge] ^ neg) != 0, -1.0, 1.0)
        prod = np.minimum(excl, 1.0 - 1e-16) * sgn
        c2v = np.clip(2.0 * np.arctanh(prod), -LLR_CLAMP, LLR_CLAMP)

        total = ch + np.add.reduceat(c2v[:, var_edges], var_start, axis=1)
        v2c = np.clip(total[:, edge_var] - c2v, -LLR_CLAMP, LLR_CLAMP)

        hard = (total < 0).astype(np.uint8)
        done = _is_codeword(hard, total, edge_var, chk_start)
        bits[active] = hard
        iterations[active] = it
        if done.any():
            converged[active[done]] = True
            keep = ~done
            active, ch, v2c = active[keep], ch[keep], v2c[keep]
            if active.size == 0:
                break
    return bits, converged, iterations


def _is_codeword(hard, soft, edge_var, chk_start):
    syn = np.add.reduceat(hard[:, edge_var].astype(np.int64), chk_start, axis=1) & 1
    return ~syn.any(axis=1) & ~(soft == 0).any(axis=1)
