from fractions import Fraction

import numpy as np
import pytest

from vlcofdm import golden
from vlcofdm.channel import GeometryConfig, build_channel
from vlcofdm.ofdm import qam
from vlcofdm.schemes import (
    CindcScheme,
    Kind,
    SchemeConfig,
    _route,
    dco_bias_factor,
    make_scheme,
    polarity_separate,
    rate,
    sm_detect_zf,
)
from vlcofdm.sim import Link, SimConfig


def H_for(n_tx, n_rx=None, subset=None):
    n_rx = n_rx or n_tx
    return build_channel(GeometryConfig(n_tx=n_tx, n_rx=n_rx, led_subset=subset).build()).gains


def random_payload(s, frames, seed=0):
    rng = np.random.default_rng(seed)
    mod = rng.integers(0, 2, size=(frames, s.mod_bits_per_frame), dtype=np.uint8)
    n_idx = s.info_bits_per_frame or s.index_bits_per_frame
    idx = rng.integers(0, 2, size=(frames, n_idx), dtype=np.uint8) if n_idx else None
    return mod, idx


def loopback(cfg, H, frames=20, seed=0):
    s = make_scheme(cfg)
    mod, idx = random_payload(s, frames, seed)
    x = s.transmit(mod, idx)
    rx = s.receive(x @ H.T, H, 0.0)
    return s, mod, idx, x, rx


# --- helpers ---------------------------------------------------------------

def test_polarity_separate_examples():
    p, m = polarity_separate([1.0, -2.0, 0.0])
    np.testing.assert_array_equal(p, [1, 0, 0])
    np.testing.assert_array_equal(m, [0, 2, 0])
    x = np.array([0.5, 2.0, 3.0])
    p, m = polarity_separate(x)
    np.testing.assert_array_equal(p, x)
    assert not m.any()


def test_dco_bias_factor():
    assert dco_bias_factor(7.0) == pytest.approx(2.0030, abs=1e-4)
    assert 10 * np.log10(dco_bias_factor(7.0) ** 2 + 1) == pytest.approx(7.0, abs=1e-12)
    assert dco_bias_factor(0.0) == 0.0
    with pytest.raises(ValueError):
        dco_bias_factor(-1.0)


def test_dco_zero_signal_gives_constant_bias(monkeypatch):
    s = make_scheme(SchemeConfig("dco", 4, parallel_blocks=1))
    monkeypatch.setattr(s, "modulate", lambda bits: np.zeros(bits.shape[:-1] + (s.N,)))
    x = s.transmit(np.zeros((1, s.mod_bits_per_frame), np.uint8))
    np.testing.assert_allclose(x, dco_bias_factor(7.0) * s.sigma_x)


def test_sigma_x_matches_empirical_rms():
    for cfg in (SchemeConfig("ndc", 16), SchemeConfig("aco", 16, parallel_blocks=1)):
        s = make_scheme(cfg)
        mod, _ = random_payload(s, 4000, 1)
        x = s.modulate(mod)
        assert np.sqrt(np.mean(x**2)) == pytest.approx(s.sigma_x, rel=0.01)


# --- rates -----------------------------------------------------------------

@pytest.mark.parametrize(
    "cfg, expected",
    [
        (SchemeConfig("dco", 4, parallel_blocks=1), Fraction(31, 32)),
        (SchemeConfig("dco", 4, parallel_blocks=2), Fraction(31, 16)),
        (SchemeConfig("aco", 16, parallel_blocks=1), Fraction(1)),
        (SchemeConfig("aco", 16, parallel_blocks=2), Fraction(2)),
        (SchemeConfig("flip", 16, parallel_blocks=2), Fraction(31, 16)),
        (SchemeConfig("ndc", 16), Fraction(31, 16)),
        (SchemeConfig("ndc", 256), Fraction(31, 8)),
        (SchemeConfig("ndc", 1024), Fraction(155, 32)),
        (SchemeConfig("indc", 64), Fraction(125, 32)),
        (SchemeConfig("indc", 256), Fraction(39, 8)),
        (SchemeConfig("cindc", 128), Fraction(249, 64)),
    ],
)
def test_rates_exact(cfg, expected):
    assert rate(cfg) == expected
    s = make_scheme(cfg)
    total = s.mod_bits_per_frame + (s.info_bits_per_frame or s.index_bits_per_frame)
    assert Fraction(total, s.uses_per_frame) <= expected + Fraction(1, 10**9)


def test_rate_decimal_values():
    assert float(rate(SchemeConfig("ndc", 256))) == 3.875
    assert float(rate(SchemeConfig("cindc", 128))) == 3.890625
    assert float(rate(SchemeConfig("indc", 64))) == 3.90625
    assert float(rate(SchemeConfig("flip", 16, n_fft=4096, parallel_blocks=1))) == pytest.approx(1.0, abs=1e-3)


def test_rate_matches_payload_for_uncoded_schemes():
    for cfg in (SchemeConfig("dco", 4), SchemeConfig("aco", 16), SchemeConfig("flip", 16),
                SchemeConfig("ndc", 16), SchemeConfig("indc", 64)):
        s = make_scheme(cfg)
        bits = s.mod_bits_per_frame + s.index_bits_per_frame
        assert Fraction(bits, s.uses_per_frame) == rate(cfg)


def test_cindc_code_rate_half():
    s = make_scheme(SchemeConfig("cindc", 128))
    assert s.code.rate == 0.5
    assert (s.code.n, s.code.k) == (1008, 504)
    assert s.symbols_per_frame == 16 and s.padding_uses == 16


# --- detector --------------------------------------------------------------

def test_detector_examples():
    d = sm_detect_zf(np.eye(2), np.array([3.0, 0.0]))
    assert (int(d.active_column), d.sign, d.magnitude) == (0, 1.0, 3.0)
    d = sm_detect_zf(np.eye(4), np.array([0.0, 0.0, 0.0, 5.0]))
    assert (int(d.active_column), d.sign, d.magnitude) == (3, -1.0, 5.0)


def test_detector_random_channel_oracle():
    rng = np.random.default_rng(3)
    for _ in range(20):
        H = rng.uniform(0.1, 1.0, size=(2, 2))
        a = rng.uniform(0.5, 2.0)
        y = H @ np.array([0.0, a])
        d = sm_detect_zf(H, y)
        h1, h2 = H[:, 0], H[:, 1]
        z1 = float(h1 @ y) / float(h1 @ h1)
        assert d.z[0] == pytest.approx(z1, rel=1e-12)
        assert d.z[1] == pytest.approx(a, rel=1e-12)
        if a > abs(z1):
            assert int(d.active_column) == 1 and d.magnitude == pytest.approx(a)


def test_detector_tie_goes_to_lowest_column():
    d = sm_detect_zf(np.eye(4), np.array([0.0, 2.0, 2.0, -2.0]))
    assert int(d.active_column) == 1


def test_detector_scale_invariance():
    rng = np.random.default_rng(4)
    H = H_for(4)
    y = rng.uniform(size=(100, 4))
    a = sm_detect_zf(H, y)
    for c in (1e-6, 0.3, 7.0, 1e5):
        b = sm_detect_zf(H, c * y)
        np.testing.assert_array_equal(a.active_column, b.active_column)
        np.testing.assert_array_equal(a.sign, b.sign)


def test_detector_rejects_zero_column():
    with pytest.raises(ValueError):
        sm_detect_zf(np.array([[1.0, 0.0], [1.0, 0.0]]), np.ones(2))


# --- transmitters ----------------------------------------------------------

def test_ndc_route_example():
    out = _route(np.array([1.0, -2.0]), np.zeros(2, dtype=int), 2)
    np.testing.assert_array_equal(out, [[1, 0], [0, 2]])


def test_ndc_active_led_follows_sign():
    s = make_scheme(SchemeConfig("ndc", 16))
    mod, _ = random_payload(s, 5)
    x = s.transmit(mod)
    sig = s.modulate(mod)
    np.testing.assert_array_equal(np.argmax(x, axis=-1), (sig < 0).astype(int))
    np.testing.assert_allclose(x.sum(axis=-1), np.abs(sig))
    assert np.all(np.count_nonzero(x, axis=-1) <= 1)


def test_indc_routing_blocks():
    s = make_scheme(SchemeConfig("indc", 64))
    ndc = make_scheme(SchemeConfig("ndc", 64))
    mod, _ = random_payload(s, 3)
    zeros = np.zeros((3, s.index_bits_per_frame), np.uint8)
    x0 = s.transmit(mod, zeros)
    np.testing.assert_array_equal(x0[..., :2], ndc.transmit(mod))
    assert not x0[..., 2:].any()
    x1 = s.transmit(mod, 1 - zeros)
    np.testing.assert_array_equal(x1[..., 2:], ndc.transmit(mod))
    assert not x1[..., :2].any()


def test_indc_identity_channel_recovers_index():
    s = make_scheme(SchemeConfig("indc", 16))
    mod, idx = random_payload(s, 10, 2)
    x = s.transmit(mod, idx)
    rx = s.receive(x, np.eye(4))
    np.testing.assert_array_equal(rx.index_bits, idx)
    np.testing.assert_array_equal(rx.mod_bits, mod)


def test_flip_second_slot_zero_for_positive_signal(monkeypatch):
    s = make_scheme(SchemeConfig("flip", 16, parallel_blocks=1))
    monkeypatch.setattr(s, "modulate", lambda bits: np.ones(bits.shape[:-1] + (s.N,)))
    x = s.transmit(np.zeros((1, s.mod_bits_per_frame), np.uint8))
    assert x.shape == (1, 2 * s.N, 1)
    assert np.all(x[0, : s.N] == 1.0) and not x[0, s.N :].any()


def test_cindc_all_zero_info_uses_block_one():
    s = make_scheme(SchemeConfig("cindc", 128))
    mod, _ = random_payload(s, 2)
    x = s.transmit(mod, np.zeros((2, 504), np.uint8))
    assert not x[..., 2:].any()


@pytest.mark.parametrize("kind, order", [("dco", 4), ("aco", 16), ("flip", 16), ("ndc", 16), ("indc", 64)])
def test_bit_count_mismatch(kind, order):
    s = make_scheme(SchemeConfig(kind, order))
    with pytest.raises(ValueError):
        s.transmit(np.zeros((1, s.mod_bits_per_frame + 1), np.uint8),
                   np.zeros((1, s.index_bits_per_frame), np.uint8))


def test_indc_requires_index_bits():
    s = make_scheme(SchemeConfig("indc", 16))
    with pytest.raises(ValueError):
        s.transmit(np.zeros((1, s.mod_bits_per_frame), np.uint8))


def test_singular_channel_rejected_for_parallel_schemes():
    s = make_scheme(SchemeConfig("aco", 16))
    with pytest.raises(ValueError):
        s.receive(np.zeros((1, 64, 2)), np.ones((2, 2)))


def test_scheme_config_validation():
    with pytest.raises(ValueError):
        SchemeConfig("ndc", 32)
    with pytest.raises(ValueError):
        SchemeConfig("ndc", 16, n_fft=30)
    with pytest.raises(ValueError):
        SchemeConfig("dco", 4, bias_db=-1)
    with pytest.raises(ValueError):
        SchemeConfig("aco", 16, parallel_blocks=3)
    with pytest.raises(ValueError):
        SchemeConfig("ndx", 16)


# --- noiseless loopback over the reference channel ---------------------------

@pytest.mark.parametrize(
    "cfg, n_tx, subset",
    [
        (SchemeConfig("aco", 16), 2, None),
        (SchemeConfig("flip", 16), 2, None),
        (SchemeConfig("ndc", 16), 2, None),
        (SchemeConfig("ndc", 256), 4, (2, 3)),
        (SchemeConfig("ndc", 1024), 4, (2, 3)),
        (SchemeConfig("indc", 64), 4, None),
        (SchemeConfig("indc", 256), 4, None),
        (SchemeConfig("dco", 4, bias_db=13), 2, None),
        (SchemeConfig("dco", 4, bias_db=13, parallel_blocks=1), 1, None),
    ],
)
def test_noiseless_loopback_exact(cfg, n_tx, subset):
    H = H_for(n_tx, 2 if n_tx < 4 else 4, subset)
    s, mod, idx, x, rx = loopback(cfg, H)
    np.testing.assert_array_equal(rx.mod_bits, mod)
    if idx is not None:
        np.testing.assert_array_equal(rx.index_bits, idx)


def test_dco_seven_db_loopback_mostly_exact():
    s, mod, idx, x, rx = loopback(SchemeConfig("dco", 4, bias_db=7), H_for(2), frames=2000)
    assert np.mean(rx.mod_bits == mod) >= 0.999


def test_cindc_noiseless_loopback():
    s, mod, idx, x, rx = loopback(SchemeConfig("cindc", 128), H_for(4), frames=3)
    np.testing.assert_array_equal(rx.mod_bits, mod)
    np.testing.assert_array_equal(rx.info_bits, idx)
    np.testing.assert_array_equal(rx.index_bits, s.code.encode(idx))
    assert rx.decoder_failures == 0


def test_cindc_hard_mode_noiseless():
    s, mod, idx, x, rx = loopback(SchemeConfig("cindc", 128, soft_index=False), H_for(4), frames=2)
    np.testing.assert_array_equal(rx.info_bits, idx)
    np.testing.assert_array_equal(rx.mod_bits, mod)


def test_cindc_decoding_improves_index_reliability():
    link = Link(SimConfig(SchemeConfig("cindc", 128), GeometryConfig(n_tx=4, n_rx=4), (40.0,)), 40.0)
    acc = [link.run_trial(t) for t in range(2)]
    raw = sum(p.errs_idx for p in acc) / sum(p.bits_idx for p in acc)
    info = sum(p.errs_idx_info for p in acc) / sum(p.bits_idx_info for p in acc)
    assert raw > 0.01
    assert info < raw


def test_cindc_index_llr_sign_and_clamp():
    s = make_scheme(SchemeConfig("cindc", 128))
    H = np.eye(4)
    z = np.array([[3.0, 0.0, 0.1, 0.0], [0.0, 0.1, 0.0, -2.0]])
    llr = s.index_llr(z, H, 0.5)
    assert llr[0] > 0 > llr[1]
    assert np.all(np.abs(s.index_llr(z * 100, H, 0.5)) <= 30.0)
    np.testing.assert_array_equal(s.index_llr(z, H, 0.0), [30.0, -30.0])


def test_cindc_supplied_code_must_match():
    from vlcofdm import ldpc

    s = CindcScheme(SchemeConfig("cindc", 128), code=ldpc.construct(96, 48))
    with pytest.raises(ValueError):
        _ = s.code


def test_genie_replaces_only_index_bits():
    s = make_scheme(SchemeConfig("indc", 64))
    H = H_for(4)
    mod, idx = random_payload(s, 30, 9)
    x = s.transmit(mod, idx)
    y = x @ H.T + np.random.default_rng(1).normal(scale=2e-7, size=(30, 64, 4))
    plain = s.receive(y, H, 2e-7)
    genie = s.receive(y, H, 2e-7, genie_index=idx)
    np.testing.assert_array_equal(genie.index_bits, idx)
    np.testing.assert_array_equal(genie.mod_bits, plain.mod_bits)


# --- drive statistics ------------------------------------------------------

@pytest.mark.parametrize(
    "cfg",
    [SchemeConfig("dco", 4), SchemeConfig("dco", 16, bias_db=3), SchemeConfig("aco", 16), SchemeConfig("flip", 16),
     SchemeConfig("ndc", 16), SchemeConfig("indc", 64)],
)
def test_second_moment_matches_empirical(cfg):
    s = make_scheme(cfg)
    mod, idx = random_payload(s, 3000, 4)
    x = s.transmit(mod, idx).reshape(-1, s.n_tx)
    emp = x.T @ x / x.shape[0]
    np.testing.assert_allclose(emp, s.second_moment(), rtol=0.03, atol=0.03 * s.sigma_x**2)


def test_cindc_second_moment_accounts_for_padding():
    s = make_scheme(SchemeConfig("cindc", 128))
    mod, idx = random_payload(s, 60, 4)
    x = s.transmit(mod, idx).reshape(-1, 4)
    emp = x.T @ x / x.shape[0]
    np.testing.assert_allclose(emp, s.second_moment(), rtol=0.05, atol=0.02 * s.sigma_x**2)


# --- golden transcripts ----------------------------------------------------

def test_transcripts_match_golden_file():
    parsed = golden.parse_transcripts(golden.TRANSCRIPT_FILE.read_text())
    assert [t["name"] for t in parsed] == [c[0] for c in golden.TRANSCRIPT_CASES]
    for (name, cfg, seed), t in zip(golden.TRANSCRIPT_CASES, parsed):
        s = make_scheme(cfg)
        assert (t["kind"], t["M"], t["N"]) == (cfg.kind.value, cfg.order, cfg.n_fft)
        x = s.transmit(t["mod"], t["idx"])[0]
        np.testing.assert_allclose(x, t["x"], rtol=1e-11, atol=1e-13, err_msg=name)
        # the transcript decodes back to its own payload over an identity channel
        rx = s.receive(t["x"][None], np.eye(s.n_tx))
        np.testing.assert_array_equal(rx.mod_bits[0], t["mod"], err_msg=name)
        assert np.all(t["x"] >= 0)
