import csv
import math

import numpy as np
import pytest

import oracles
from vlcofdm.channel import GeometryConfig
from vlcofdm.schemes import SchemeConfig
from vlcofdm.sim import CSV_COLUMNS, BerPoint, Link, SimConfig, csv_row, run_point, run_sweep, sweep_dtx, trial_rng

G22 = GeometryConfig()
G44 = GeometryConfig(n_tx=4, n_rx=4)


def ndc16(**kw):
    kw.setdefault("trial_uses", 4096)
    return SimConfig(SchemeConfig("ndc", 16), G22, **kw)


def test_noiseless_link_is_error_free():
    cfg = ndc16(sigma_override=0.0, max_uses=52_000, min_errors=1)
    pt = run_point(cfg, 0.0)
    assert pt.bits_mod >= 100_000
    assert pt.errs_total == 0 and pt.stop_reason == "max_uses"


def test_genie_index_has_no_index_errors():
    cfg = SimConfig(SchemeConfig("indc", 64), G44, genie_index=True, min_errors=200, trial_uses=4096)
    pt = run_point(cfg, 30.0)
    assert pt.bits_idx > 0 and pt.errs_idx == 0
    assert pt.errs_mod >= 200


def test_genie_rejected_for_other_schemes():
    with pytest.raises(ValueError):
        ndc16(genie_index=True)


def test_trial_streams_are_independent_of_order():
    a = trial_rng(1, 30.0, 5).integers(0, 1 << 30, 8)
    b = trial_rng(1, 30.0, 5).integers(0, 1 << 30, 8)
    c = trial_rng(1, 30.0, 6).integers(0, 1 << 30, 8)
    d = trial_rng(1, 30.5, 5).integers(0, 1 << 30, 8)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c) and not np.array_equal(a, d)


def _counts(pt):
    return (pt.trials, pt.bits_mod, pt.errs_mod, pt.bits_idx, pt.errs_idx, pt.bits_idx_info, pt.errs_idx_info)


def test_worker_count_does_not_change_results():
    cfg = SimConfig(SchemeConfig("indc", 16), G44, snrs=(24.0, 28.0), min_errors=300, trial_uses=2048)
    one = run_sweep(cfg)
    three = run_sweep(cfg.with_(workers=3))
    assert [_counts(p) for p in one] == [_counts(p) for p in three]


def test_same_seed_same_result_and_seed_matters():
    cfg = ndc16(min_errors=100)
    a, b = run_point(cfg, 26.0), run_point(cfg, 26.0)
    assert _counts(a) == _counts(b)
    c = run_point(cfg.with_(seed=2), 26.0)
    assert _counts(c) != _counts(a)


def test_duplicate_snrs_identical_and_empty_sweep(tmp_path):
    pts = run_sweep(ndc16(snrs=(26.0, 26.0), min_errors=50))
    assert _counts(pts[0]) == _counts(pts[1])
    path = tmp_path / "empty.csv"
    assert run_sweep(ndc16(snrs=()), csv_path=path) == []
    assert path.read_text().strip() == ",".join(CSV_COLUMNS)


def test_ber_decreases_with_snr():
    pts = run_sweep(ndc16(snrs=(20.0, 26.0, 32.0), min_errors=400))
    bers = [p.ber_total for p in pts]
    assert bers[0] > bers[1] > bers[2] > 0


def test_indc_class_accounting():
    cfg = SimConfig(SchemeConfig("indc", 64), G44, min_errors=500, trial_uses=4096)
    pt = run_point(cfg, 34.0)
    assert pt.total_class == "mod+idx"
    assert pt.bits_total == pt.bits_mod + pt.bits_idx
    assert pt.errs_total == pt.errs_mod + pt.errs_idx
    # per frame: two blocks of 31 subcarriers at 6 bits, one index bit per use
    assert pt.bits_mod * 64 == pt.bits_idx * 31 * 6
    assert pt.ber_total == pytest.approx((pt.errs_mod + pt.errs_idx) / (pt.bits_mod + pt.bits_idx))


def test_cindc_class_accounting():
    cfg = SimConfig(SchemeConfig("cindc", 128), G44, min_errors=1, max_uses=1, trial_uses=4096)
    pt = run_point(cfg, 40.0)
    assert pt.total_class == "mod+info"
    assert pt.bits_idx == 1008 * pt.frames and pt.bits_idx_info == 504 * pt.frames
    assert pt.bits_total == pt.bits_mod + pt.bits_idx_info


def test_stopping_rules():
    pt = run_point(ndc16(min_errors=10), 20.0)
    assert pt.stop_reason == "min_errors" and pt.errs_total >= 10
    pt = run_point(ndc16(min_errors=10**9, max_uses=10_000), 40.0)
    assert pt.stop_reason == "max_uses" and pt.channel_uses >= 10_000


def test_ci95_brackets_estimate():
    pt = BerPoint("x", 0.0, 1, bits_mod=10_000, errs_mod=100)
    lo, hi = pt.ci95
    half = 1.96 * math.sqrt(0.01 * 0.99 / 10_000)
    assert lo == pytest.approx(0.01 - half, rel=1e-3) and hi == pytest.approx(0.01 + half, rel=1e-3)
    assert BerPoint("x", 0.0, 1, bits_mod=100).ci95 == (0.0, 0.0)
    assert all(math.isnan(v) for v in BerPoint("x", 0.0, 1).ci95)


def test_csv_output(tmp_path):
    path = tmp_path / "out.csv"
    pts = run_sweep(ndc16(snrs=(22.0, 24.0), min_errors=50, seed=7), csv_path=path)
    rows = list(csv.reader(path.open()))
    assert tuple(rows[0]) == CSV_COLUMNS
    assert rows[1:] == [csv_row(p) for p in pts]
    r = dict(zip(rows[0], rows[1]))
    assert r["scheme"] == "ndc-M16" and float(r["snr_db"]) == 22.0 and r["seed"] == "7"
    assert int(r["errs_mod"]) >= 50
    assert float(r["ci95_low"]) <= float(r["ber_total"]) <= float(r["ci95_high"])


def test_closed_form_noise_level_matches_oracle():
    cfg = SimConfig(SchemeConfig("ndc", 16), G22, snr_reference="closed_form")
    link = Link(cfg, 40.0)
    H = oracles.channel_matrix(2, 2)
    pr = link.scheme.sigma_x**2 / 4 * sum(h * h for row in H for h in row)
    assert link.sigma == pytest.approx(math.sqrt(pr / 1e4), rel=1e-10)


def test_received_reference_matches_empirical_power():
    cfg = SimConfig(SchemeConfig("dco", 4), G22)
    link = Link(cfg, 40.0)
    s = link.scheme
    rng = np.random.default_rng(0)
    x = s.transmit(rng.integers(0, 2, size=(2000, s.mod_bits_per_frame), dtype=np.uint8)).reshape(-1, 2)
    y = x @ link.H_eff.T
    emp = np.mean(np.sum(y**2, axis=1)) / 2
    assert emp == pytest.approx(link.pr_sq, rel=0.02)
    assert link.sigma == pytest.approx(math.sqrt(link.pr_sq / 1e4), rel=1e-12)


def test_geometry_must_match_scheme():
    with pytest.raises(ValueError):
        Link(SimConfig(SchemeConfig("indc", 16), G22), 20.0)


def test_single_spacing_gives_single_pair():
    cfg = SimConfig(SchemeConfig("indc", 16), G44, snrs=(30.0,), min_errors=20, trial_uses=2048)
    out = sweep_dtx(cfg, [1.5])
    assert len(out) == 1 and out[0][0] == 1.5 and out[0][1].errs_total >= 20


def test_spacing_sweep_order_and_validation():
    cfg = SimConfig(SchemeConfig("indc", 16), G44, snrs=(30.0, 32.0), min_errors=20, trial_uses=2048)
    out = sweep_dtx(cfg, [1.0, 2.0])
    assert [(d, p.snr_db) for d, p in out] == [(1.0, 30.0), (2.0, 30.0), (1.0, 32.0), (2.0, 32.0)]
    for bad in ([6.0], [-1.0], [0.0]):
        with pytest.raises(ValueError):
            sweep_dtx(cfg, bad)
    with pytest.raises(ValueError):
        sweep_dtx(ndc16(snrs=(30.0,)), [1.0])


def test_simconfig_validation():
    with pytest.raises(ValueError):
        ndc16(min_errors=0)
    with pytest.raises(ValueError):
        ndc16(snrs=(float("nan"),))
    with pytest.raises(ValueError):
        ndc16(snr_reference="other")
    with pytest.raises(ValueError):
        ndc16(workers=0)
    with pytest.raises(ValueError):
        ndc16(sigma_override=-1.0)
