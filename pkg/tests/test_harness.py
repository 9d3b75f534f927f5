"""Sweep harness: configuration, accumulation, stopping, analysis."""

import math

import numpy as np
import pytest

from rismimo import alamouti, vblast
from rismimo.harness import (
    SCHEMES,
    BerCurve,
    ConfigError,
    SchemeConfig,
    compare_theory,
    gain_at_ber,
    measure_cm_per_detection,
    run_sweep,
    snr_at_ber,
)

ALAMOUTI_GEOM = dict(r_s=1.0, r_d=9.0, r_direct=9.85)


def make_curve(snr_db, bers, bits=1_000_000):
    curve = BerCurve.empty(np.asarray(snr_db, dtype=float))
    for i, ber in enumerate(bers):
        errors = int(round(ber * bits))
        curve.add_point(i, trials=bits // 2, bits=bits, bit_errors=errors)
    return curve


# --- configuration ---------------------------------------------------------


def test_normalized_fills_scheme_dimensions():
    cfg = SchemeConfig("ris_alamouti", n_ris=32).normalized()
    assert (cfg.n_tx, cfg.n_rx, cfg.n_ris) == (1, 1, 32)
    vb = SchemeConfig("classical_vblast").normalized()
    assert (vb.n_tx, vb.n_rx, vb.n_ris) == (2, 2, 0)
    assert vb.normalized() == vb


def test_normalized_does_not_invent_surface_size():
    cfg = SchemeConfig("ris_im_vblast").normalized()
    assert cfg.n_ris is None
    with pytest.raises(ConfigError) as err:
        cfg.validate()
    assert err.value.field == "n_ris"


@pytest.mark.parametrize(
    "field,kwargs",
    [
        ("scheme", dict(scheme="mrc")),
        ("mod_kind", dict(scheme="ris_alamouti", n_ris=16, mod_kind="pam")),
        ("mod_order", dict(scheme="ris_alamouti", n_ris=16, mod_order=3)),
        ("n_ris", dict(scheme="ris_alamouti", n_ris=15)),
        ("n_tx", dict(scheme="classical_alamouti", n_tx=3, n_rx=1)),
        ("n_rx", dict(scheme="ris_im_vblast", n_ris=64, n_tx=2, n_rx=1)),
        ("im_mode", dict(scheme="ris_im_vblast", n_ris=64, im_mode="dual")),
        ("detector", dict(scheme="ris_im_vblast", n_ris=64, detector="ml")),
        ("quant_bits", dict(scheme="ris_im_vblast", n_ris=64, quant_bits=0)),
        ("k_factor_sr_db", dict(scheme="ris_im_vblast", n_ris=64, k_factor_sr_db=math.nan)),
        ("geometry", dict(scheme="ris_alamouti", n_ris=16, r_s=-1.0)),
        ("snr_db", dict(scheme="ris_alamouti", n_ris=16, snr_db=())),
        ("max_trials", dict(scheme="ris_alamouti", n_ris=16, max_trials=0)),
        ("min_bit_errors", dict(scheme="ris_alamouti", n_ris=16, min_bit_errors=0)),
    ],
)
def test_validate_names_offending_field(field, kwargs):
    kwargs.setdefault("snr_db", (60.0,))
    with pytest.raises(ConfigError) as err:
        SchemeConfig(**kwargs).validate()
    assert err.value.field == field
    assert field in str(err.value)


def test_full_im_needs_square_order_for_index_bits():
    cfg = SchemeConfig("ris_im_vblast", n_tx=2, n_rx=3, n_ris=32, snr_db=(60.0,))
    with pytest.raises(ConfigError) as err:
        cfg.validate()
    assert err.value.field == "im_mode"


@pytest.mark.parametrize(
    "kwargs,expected",
    [
        (dict(scheme="classical_alamouti"), 2),
        (dict(scheme="ris_alamouti", mod_order=8), 6),
        (dict(scheme="ris_ap_blind", mod_order=4), 2),
        (dict(scheme="classical_vblast"), 2),
        (dict(scheme="ris_im_vblast", im_mode="full"), 4),
        (dict(scheme="ris_im_vblast", im_mode="partial"), 3),
        (dict(scheme="ris_im_vblast", im_mode="enhancing"), 2),
        (dict(scheme="ris_im_vblast", im_mode="full", n_tx=4, n_rx=4, mod_kind="qam", mod_order=16), 20),
    ],
)
def test_bits_per_use(kwargs, expected):
    assert SchemeConfig(**kwargs).normalized().bits_per_use() == expected


def test_scheme_registry_matches_dimension_table():
    assert set(SCHEMES) == set(SchemeConfig._DIM_DEFAULTS)


# --- curve accumulation ----------------------------------------------------


def test_curve_accumulates_and_derives_rates():
    curve = BerCurve.empty([10.0, 20.0])
    curve.add_point(0, trials=100, bits=400, bit_errors=40,
                    symbol_errors=30, symbols=200, index_bits=100, index_bit_errors=10)
    curve.add_point(0, trials=100, bits=400, bit_errors=0,
                    symbol_errors=0, symbols=200, index_bits=100, index_bit_errors=0)
    assert curve.trials[0] == 200 and curve.bits[0] == 800
    assert curve.ber[0] == pytest.approx(40 / 800)
    assert curve.payload_ber[0] == pytest.approx(30 / 600)
    assert curve.ser[0] == pytest.approx(30 / 400)
    p = 40 / 800
    assert curve.ci95[0] == pytest.approx(1.96 * math.sqrt(p * (1 - p) / 800))
    assert math.isnan(curve.ber[1])


def test_curve_rows_schema():
    curve = make_curve([10.0], [1e-2])
    (row,) = curve.rows()
    assert list(row) == [
        "snr_db", "trials", "bits", "bit_errors", "ber", "ci95",
        "index_bit_errors", "cm_count",
    ]
    assert row["ber"] == pytest.approx(1e-2)


def test_curve_rows_payload_only_switch():
    curve = BerCurve.empty([10.0])
    curve.add_point(0, trials=10, bits=100, bit_errors=20, index_bits=50, index_bit_errors=20)
    (pooled,) = curve.rows()
    (payload,) = curve.rows(payload_only=True)
    assert pooled["ber"] == pytest.approx(0.2)
    assert payload["ber"] == pytest.approx(0.0)


# --- sweep execution -------------------------------------------------------


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(scheme="classical_alamouti", max_trials=2048),
        dict(scheme="ris_alamouti", n_ris=16, max_trials=2048),
        dict(scheme="ris_ap_blind", n_ris=16, max_trials=2048),
        dict(scheme="classical_vblast", max_trials=2048),
        dict(scheme="ris_im_vblast", n_ris=64, im_mode="full", detector="optimal", max_trials=1024),
    ],
)
def test_noise_free_sweep_is_error_free(kwargs):
    cfg = SchemeConfig(snr_db=(math.inf,), seed=3, **ALAMOUTI_GEOM, **kwargs)
    curve = run_sweep(cfg)
    assert curve.trials[0] == kwargs["max_trials"]
    assert curve.bit_errors[0] == 0
    assert curve.ber[0] == 0.0


def test_sweep_respects_max_trials_cap():
    cfg = SchemeConfig("ris_alamouti", n_ris=16, snr_db=(200.0,),
                       max_trials=1000, **ALAMOUTI_GEOM)
    curve = run_sweep(cfg)
    assert curve.trials[0] == 1000
    assert curve.bits[0] == 2000


def test_sweep_stops_on_wave_boundary_once_errors_suffice():
    # At 0 dB every frame errs, so the first eight-batch wave already
    # exceeds the target; the harness must still finish that whole wave.
    cfg = SchemeConfig("classical_alamouti", snr_db=(0.0,),
                       min_bit_errors=50, max_trials=10_000_000, **ALAMOUTI_GEOM)
    curve = run_sweep(cfg)
    assert curve.trials[0] == 8 * 8192
    assert curve.bit_errors[0] >= 50


def test_sweep_ledger_is_conserved():
    cfg = SchemeConfig("ris_im_vblast", n_ris=16, im_mode="full",
                       detector="suboptimal", snr_db=(40.0,),
                       max_trials=4096, min_bit_errors=10**9,
                       r_s=3.0, r_d=3.0, r_direct=5.91)
    curve = run_sweep(cfg)
    assert curve.trials[0] == 4096
    assert curve.bits[0] == 4096 * cfg.normalized().bits_per_use()
    assert curve.symbols[0] == 4096 * 2
    assert curve.index_bits[0] == 4096 * 2
    assert 0 < curve.index_bit_errors[0] <= curve.bit_errors[0]
    payload = (curve.bit_errors[0] - curve.index_bit_errors[0]) / (curve.bits[0] - curve.index_bits[0])
    assert curve.payload_ber[0] == pytest.approx(payload)


def test_sweep_identical_for_any_worker_count():
    cfg = SchemeConfig("ris_im_vblast", n_ris=8, im_mode="full",
                       detector="optimal", snr_db=(30.0, 40.0),
                       max_trials=20_000, min_bit_errors=10**9,
                       r_s=3.0, r_d=3.0, r_direct=5.91, seed=11)
    serial = run_sweep(cfg, workers=1)
    parallel = run_sweep(cfg, workers=2)
    for name in ("trials", "bits", "bit_errors", "symbol_errors", "index_bit_errors"):
        assert np.array_equal(getattr(serial, name), getattr(parallel, name)), name
    assert serial.cm_per_detection == parallel.cm_per_detection


# --- receiver cost probe ---------------------------------------------------


def expected_cost(cfg, *stages):
    cfg = cfg.normalized()
    return sum(vblast.count_complexity(cfg.dims, cfg.mod_order, s) for s in stages)


def test_cost_probe_classical_vblast():
    cfg = SchemeConfig("classical_vblast", n_tx=4, n_rx=4, mod_order=4, snr_db=(10.0,))
    cm, _ = measure_cm_per_detection(cfg)
    assert cm == expected_cost(cfg, "sic")


@pytest.mark.parametrize(
    "detector,stage",
    [("optimal", "index_joint"), ("suboptimal", "index_greedy")],
)
def test_cost_probe_index_detection(detector, stage):
    cfg = SchemeConfig("ris_im_vblast", n_ris=32, im_mode="full",
                       detector=detector, snr_db=(10.0,))
    cm, _ = measure_cm_per_detection(cfg)
    assert cm == expected_cost(cfg, stage, "sic")


def test_cost_probe_enhancing_charges_construction_only():
    cfg = SchemeConfig("ris_im_vblast", n_ris=32, im_mode="enhancing", snr_db=(10.0,))
    cm, _ = measure_cm_per_detection(cfg)
    dims = cfg.normalized().dims
    construct = dims.n_rx * dims.n_ris * (1 + dims.n_tx)
    assert cm == construct + expected_cost(cfg, "sic")


def test_cost_probe_zero_for_combiner_schemes():
    cfg = SchemeConfig("ris_alamouti", n_ris=16, snr_db=(10.0,))
    assert measure_cm_per_detection(cfg) == (0, 0)


# --- theory comparison -----------------------------------------------------


def theory_cfg(**overrides):
    base = dict(scheme="ris_alamouti", n_ris=16, snr_db=(78.0, 82.0, 86.0),
                min_bit_errors=500, max_trials=600_000, seed=21, **ALAMOUTI_GEOM)
    base.update(overrides)
    return SchemeConfig(**base)


def test_simulation_agrees_with_quadrature():
    cfg = theory_cfg()
    report = compare_theory(run_sweep(cfg), cfg)
    assert [r.status for r in report.rows] == ["ok", "ok", "ok"]
    assert not report.flagged
    assert "ok" in str(report)


def test_comparison_flags_a_broken_combiner(monkeypatch):
    # Sign-flip one combiner input; the quadrature check must notice.
    true_combine = alamouti.combine
    monkeypatch.setattr(
        alamouti, "combine",
        lambda r0, r1, a0, a1: true_combine(r0, r1, a0, -a1),
    )
    cfg = theory_cfg(snr_db=(82.0,), min_bit_errors=300)
    report = compare_theory(run_sweep(cfg), cfg)
    assert [r.status for r in report.rows] == ["flagged"]


def test_comparison_reports_starved_points_as_insufficient():
    cfg = theory_cfg(snr_db=(100.0,), max_trials=8192)
    report = compare_theory(run_sweep(cfg), cfg)
    assert [r.status for r in report.rows] == ["insufficient"]


def test_comparison_rejects_non_quadrature_schemes():
    cfg = SchemeConfig("classical_alamouti", snr_db=(80.0,))
    with pytest.raises(ValueError):
        compare_theory(BerCurve.empty([80.0]), cfg)


# --- crossings -------------------------------------------------------------


def test_snr_at_ber_interpolates_in_log_domain():
    curve = make_curve([80.0, 90.0, 100.0], [1e-2, 1e-3, 1e-4])
    assert snr_at_ber(curve, 1e-3) == pytest.approx(90.0)
    expected = 90.0 + 10.0 * (math.log10(1e-3) - math.log10(3e-4)) / 1.0
    assert snr_at_ber(curve, 3e-4) == pytest.approx(expected)


def test_snr_at_ber_needs_a_strict_bracket():
    flat_then_drop = make_curve([80.0, 90.0, 100.0], [1e-3, 1e-3, 1e-4])
    assert snr_at_ber(flat_then_drop, 5e-4) == pytest.approx(
        90.0 + 10.0 * (math.log10(1e-3) - math.log10(5e-4))
    )
    assert snr_at_ber(make_curve([80.0, 90.0], [1e-2, 1e-3]), 1e-5) is None
    with_zero_tail = make_curve([80.0, 90.0], [1e-3, 0.0])
    assert snr_at_ber(with_zero_tail, 1e-4) is None


def test_gain_at_ber_is_signed_shift():
    slow = make_curve([80.0, 90.0, 100.0], [1e-2, 1e-3, 1e-4])
    fast = make_curve([73.0, 83.0, 93.0], [1e-2, 1e-3, 1e-4])
    assert gain_at_ber(fast, slow, 1e-3) == pytest.approx(7.0)
    assert gain_at_ber(slow, fast, 1e-3) == pytest.approx(-7.0)
    with pytest.raises(ValueError, match="second"):
        gain_at_ber(slow, make_curve([80.0], [1e-2]), 1e-3)
    with pytest.raises(ValueError, match="first"):
        gain_at_ber(make_curve([80.0], [1e-2]), slow, 1e-3)
