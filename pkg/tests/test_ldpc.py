import numpy as np
import pytest

import oracles
from vlcofdm import kernels, ldpc
from vlcofdm.ldpc import LdpcCode, construct, gf2_rank, read_alist, write_alist

TOY_ROWS = ((1, 2, 3, 4, 5, 6), (0, 1, 3, 4, 6, 7), (0, 2, 3, 5, 6, 7), (0, 1, 2, 4, 5, 7))

BACKENDS = [pytest.param(kernels.bp_decode_python, id="python")]
if kernels.bp_decode_compiled is not None:
    BACKENDS.append(pytest.param(kernels.bp_decode_compiled, id="compiled"))


@pytest.fixture(scope="module")
def toy():
    return LdpcCode(8, 4, TOY_ROWS)


@pytest.fixture(scope="module")
def big():
    return construct(1008, 504)


def bpsk_llrs(words, ebn0_db, rate, rng):
    snr = 10 ** (ebn0_db / 10) * rate
    sigma = np.sqrt(1 / (2 * snr))
    s = 1.0 - 2.0 * words
    y = s + rng.normal(scale=sigma, size=s.shape)
    return 2 * y / sigma**2


# --- toy code --------------------------------------------------------------

def test_toy_encoder_spans_codebook(toy):
    book = {tuple(w) for w in oracles.toy_codebook(TOY_ROWS, 8)}
    assert len(book) == 16
    infos = np.array([[(i >> b) & 1 for b in range(4)] for i in range(16)], dtype=np.uint8)
    words = toy.encode(infos)
    assert {tuple(int(v) for v in w) for w in words} == book
    np.testing.assert_array_equal(toy.extract_info(words), infos)
    assert toy.is_codeword(words).all()


def noisy_toy_instances(book, mean_llr, count, rng):
    """Consistent-Gaussian LLRs around random codewords, every |LLR| >= 2."""
    out = []
    while len(out) < count:
        w = np.array(book[rng.integers(len(book))])
        llr = mean_llr * (1 - 2 * w) + rng.normal(scale=np.sqrt(2 * mean_llr), size=w.size)
        if np.min(np.abs(llr)) >= 2.0:
            out.append(llr)
    return np.array(out)


@pytest.mark.parametrize("backend", BACKENDS)
def test_toy_decoder_agrees_with_ml(toy, backend):
    book = oracles.toy_codebook(TOY_ROWS, 8)
    llrs = noisy_toy_instances(book, 4.0, 1000, np.random.default_rng(11))
    bits, conv, _ = ldpc.decode(toy, llrs, backend=backend)
    agree = [tuple(int(b) for b in row) == oracles.ml_decode(book, l) for row, l in zip(bits, llrs)]
    assert np.mean(agree) >= 0.95


def test_toy_converged_decisions_are_ml(toy):
    # at weaker inputs BP on this loopy graph stalls more often, but whenever
    # it does settle on a codeword that codeword is the ML one
    book = oracles.toy_codebook(TOY_ROWS, 8)
    llrs = noisy_toy_instances(book, 2.0, 1000, np.random.default_rng(12))
    bits, conv, _ = toy.decode(llrs)
    agree = np.array([tuple(int(b) for b in row) == oracles.ml_decode(book, l) for row, l in zip(bits, llrs)])
    assert conv.mean() > 0.8
    assert agree[conv].mean() >= 0.99


def test_toy_single_flip_corrected(toy):
    w = toy.encode(np.array([1, 0, 1, 1], np.uint8))
    for pos in range(8):
        llr = np.where(w == 0, 4.0, -4.0)
        llr[pos] = -llr[pos] * 0.5
        bits, conv, _ = toy.decode(llr)
        assert conv
        np.testing.assert_array_equal(bits, w)


# --- shipped (1008, 504) code -----------------------------------------------

def test_big_code_structure(big):
    assert (big.n, big.k, big.m) == (1008, 504, 504)
    assert gf2_rank(big.parity_check) == 504
    assert np.all(big.column_weights == 3)
    assert np.all(big.row_weights == 6)
    assert len(set(big.info_positions.tolist())) == 504


def test_big_code_no_four_cycles(big):
    Hd = big.parity_check.astype(np.int64)
    overlap = Hd @ Hd.T
    np.fill_diagonal(overlap, 0)
    assert overlap.max() <= 1


def test_construction_is_deterministic():
    a = ldpc._peg_rows(96, 48, 3, 7)
    b = ldpc._peg_rows(96, 48, 3, 7)
    assert a == b
    c = ldpc._peg_rows(96, 48, 3, 8)
    assert a != c


def test_shipped_file_matches_fresh_construction(big):
    rows = ldpc._peg_rows(1008, 504, 3, 1)
    assert tuple(tuple(r) for r in rows) == big.rows


def test_alist_round_trip(tmp_path, big, toy):
    for code in (big, toy):
        p = tmp_path / "c.alist"
        write_alist(code, p)
        back = read_alist(p, k=code.k)
        assert back.rows == code.rows and back.n == code.n
    assert read_alist(tmp_path / "c.alist").k == 4


def test_encode_linearity_and_codewords(big):
    rng = np.random.default_rng(2)
    u = rng.integers(0, 2, size=(20, 504), dtype=np.uint8)
    v = rng.integers(0, 2, size=(20, 504), dtype=np.uint8)
    cu, cv = big.encode(u), big.encode(v)
    np.testing.assert_array_equal(big.encode(u ^ v), cu ^ cv)
    assert big.is_codeword(cu).all()
    np.testing.assert_array_equal(big.extract_info(cu), u)
    assert not big.encode(np.zeros(504, np.uint8)).any()


def test_construct_rejects_infeasible():
    with pytest.raises(ValueError):
        construct(10, 9)
    with pytest.raises(ValueError):
        construct(8, 8)
    with pytest.raises(ValueError):
        LdpcCode(4, 2, ((0, 1), (0, 1)))  # rank 1
    with pytest.raises(ValueError):
        LdpcCode(4, 2, ((0, 0), (1, 2)))


@pytest.mark.parametrize("backend", BACKENDS)
def test_confident_input_converges_immediately(big, backend):
    w = big.encode(np.random.default_rng(3).integers(0, 2, 504, dtype=np.uint8))
    llr = np.where(w == 0, 30.0, -30.0)
    bits, conv, it = ldpc.decode(big, llr, backend=backend)
    assert conv and it == 0
    np.testing.assert_array_equal(bits, w)


@pytest.mark.parametrize("backend", BACKENDS)
def test_zero_llrs_do_not_converge(big, backend):
    bits, conv, it = ldpc.decode(big, np.zeros(1008), max_iter=10, backend=backend)
    assert not conv and it == 10


@pytest.mark.parametrize("backend", BACKENDS)
def test_single_wrong_sign_corrected(big, backend):
    w = big.encode(np.random.default_rng(4).integers(0, 2, 504, dtype=np.uint8))
    llr = np.where(w == 0, 3.0, -3.0)
    llr[123] = -llr[123]
    bits, conv, _ = ldpc.decode(big, llr, backend=backend)
    assert conv
    np.testing.assert_array_equal(bits, w)


def test_decode_shapes(big):
    llr = np.full((2, 3, 1008), 5.0)
    bits, conv, it = big.decode(llr)
    assert bits.shape == (2, 3, 1008) and conv.shape == (2, 3) and it.shape == (2, 3)
    with pytest.raises(ValueError):
        big.decode(np.zeros(100))
    with pytest.raises(ValueError):
        big.encode(np.zeros(10))


def test_waterfall_at_two_and_a_half_db(big):
    rng = np.random.default_rng(5)
    frames = 200
    u = rng.integers(0, 2, size=(frames, 504), dtype=np.uint8)
    w = big.encode(u)
    bits, conv, _ = big.decode(bpsk_llrs(w, 2.5, 0.5, rng))
    ber = np.mean(big.extract_info(bits) != u)
    assert ber < 1e-4


@pytest.mark.skipif(kernels.bp_decode_compiled is None, reason="compiled extension not built")
def test_backends_bit_identical(big):
    rng = np.random.default_rng(6)
    w = big.encode(rng.integers(0, 2, size=(40, 504), dtype=np.uint8))
    llr = bpsk_llrs(w, 1.5, 0.5, rng)
    a = ldpc.decode(big, llr, backend=kernels.bp_decode_python)
    b = ldpc.decode(big, llr, backend=kernels.bp_decode_compiled)
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x, y)


def test_backend_name():
    assert kernels.BACKEND in ("cython", "python")
    assert (kernels.BACKEND == "cython") == (kernels.bp_decode_compiled is not None)


def test_pure_python_switch():
    import os
    import subprocess
    import sys

    env = dict(os.environ, VLCOFDM_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "from vlcofdm import kernels; print(kernels.BACKEND)"],
                         capture_output=True, text=True, env=env)
    assert out.stdout.strip() == "python"
