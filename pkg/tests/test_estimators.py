import math

import numpy as np
import pytest

from conftest import small_cfg
from rasesim.errors import InvalidArgument, LowConfidencePhase, PairingError, UndefinedEfficiency
from rasesim.estimators import (
    QuadraturePair,
    SpectralWindow,
    VarianceEstimate,
    default_windows,
    efficiency_from_runs,
    estimate_phase,
    extract_quadratures,
    integrated_power,
    pair_by_shot,
    process_records,
    read_quadrature_table,
    sample_covariance,
    spectral_area,
    variance_of,
    write_quadrature_table,
)
from rasesim.model import ase_variance, lossy_tmsv_state
from rasesim.synth import NoiseModel, ShotRecord, layout, synthesize_run, synthesize_shot


def noiseless_record(cfg, theta, extra=None):
    """Hand-built trace: reference pulses only (plus optional content), no noise."""
    lay = layout(cfg)
    trace = np.zeros(lay.n_samples, dtype=complex)
    amp = cfg.ref_amplitude / math.sqrt(2)
    for s, n in lay.refs:
        t = np.arange(n) / cfg.sample_rate_hz
        trace[s : s + n] = amp / math.sqrt(n) * np.exp(1j * (2 * np.pi * cfg.ref_if_hz * t + theta))
    if extra is not None:
        trace += extra
    return ShotRecord(0, trace, cfg.sample_rate_hz)


def test_phase_noiseless_zero():
    cfg = small_cfg()
    assert estimate_phase(noiseless_record(cfg, 0.0), cfg) == pytest.approx(0.0, abs=1e-6)


def test_phase_noiseless_arbitrary():
    cfg = small_cfg()
    assert estimate_phase(noiseless_record(cfg, 2.0), cfg) == pytest.approx(2.0, abs=1e-9)


def test_phase_with_noise_pi_over_3():
    cfg = small_cfg(n_shots=300)
    errs = []
    for k in range(cfg.n_shots):
        rec = synthesize_shot(cfg, NoiseModel(), k, force_phase=math.pi / 3)
        d = estimate_phase(rec, cfg) - math.pi / 3
        errs.append((d + math.pi) % (2 * math.pi) - math.pi)
    errs = np.abs(errs)
    # two pulses of amplitude 50 give ~1/(50 sqrt 2) rad rms
    assert np.sqrt(np.mean(errs**2)) < 0.05
    assert errs.max() < 0.1


def test_phase_zero_reference_is_low_confidence():
    cfg = small_cfg(ref_amplitude=0.0)
    with pytest.raises(LowConfidencePhase):
        estimate_phase(synthesize_shot(cfg, NoiseModel(), 0), cfg)


def test_coherent_pulse_closed_form():
    # pulse of per-sample amplitude A at the ASE IF filling the ASE window:
    # <mode|trace> = A sqrt(N), so x = sqrt(2 N) A and p = 0
    cfg = small_cfg()
    A, N = 0.37, 200
    t = np.arange(N) / cfg.sample_rate_hz
    extra = np.zeros(layout(cfg).n_samples, dtype=complex)
    extra[:N] = A * np.exp(2j * np.pi * cfg.if_ase_hz * t)
    rec = noiseless_record(cfg, 0.0, extra)
    q = extract_quadratures(rec, default_windows(cfg)["ASE"], 0.0, "ASE")
    assert q.x == pytest.approx(math.sqrt(2 * N) * A, abs=1e-12)
    assert q.p == pytest.approx(0.0, abs=1e-12)


def test_rotation_by_quarter_turn_swaps():
    cfg = small_cfg(alpha_l=1.0)
    rec = synthesize_shot(cfg, NoiseModel(), 2)
    w = default_windows(cfg)["RASE"]
    q0 = extract_quadratures(rec, w, 0.0, "RASE")
    q1 = extract_quadratures(rec, w, math.pi / 2, "RASE")
    assert q1.x == pytest.approx(q0.p, abs=1e-12)
    assert q1.p == pytest.approx(-q0.x, abs=1e-12)


def test_window_outside_record():
    cfg = small_cfg()
    rec = synthesize_shot(cfg, NoiseModel(), 0)
    with pytest.raises(InvalidArgument):
        extract_quadratures(rec, SpectralWindow(2e6, 30.0, 10.0), 0.0, "ASE")


def test_spectral_window_validation():
    with pytest.raises(InvalidArgument):
        SpectralWindow(0.0, 0.0, 10.0, span_hz=0.0)
    with pytest.raises(InvalidArgument):
        SpectralWindow(0.0, 0.0, 10.0, window_function="kaiser")


def test_reduced_windows_anchor():
    w = default_windows(small_cfg(), window_us=4.0)
    assert w["ASE"].start_us == 0.0 and w["ASE"].time_window_us == 4.0
    # RASE window ends where the full RASE window ends (sample 584 -> 29.2 us)
    assert w["RASE"].start_us + w["RASE"].time_window_us == pytest.approx(29.2)


def test_variance_of_constant():
    pairs = [QuadraturePair("ASE", 1.5, -0.5, k) for k in range(10)]
    v = variance_of(pairs)
    assert v.mean_var == 0.0 and v.se == 0.0 and v.n_shots == 10


def test_variance_of_needs_two():
    with pytest.raises(InvalidArgument):
        variance_of([QuadraturePair("ASE", 0.0, 0.0, 0)])


def test_variance_se_formula():
    rng = np.random.default_rng(0)
    pairs = [QuadraturePair("ASE", x, p, k) for k, (x, p) in enumerate(rng.standard_normal((10_000, 2)))]
    v = variance_of(pairs)
    assert v.se == pytest.approx(v.mean_var * math.sqrt(2 / (2 * 10_000 - 1)), rel=1e-12)
    assert v.se == pytest.approx(0.01, abs=5e-4)
    assert abs(v.mean_var - 1) < 3 * v.se


def test_variance_bootstrap_agrees():
    rng = np.random.default_rng(1)
    pairs = [QuadraturePair("ASE", x, p, k) for k, (x, p) in enumerate(rng.standard_normal((4000, 2)))]
    a, b = variance_of(pairs), variance_of(pairs, bootstrap=True, n_boot=1000, seed=2)
    assert a.mean_var == b.mean_var
    assert b.se == pytest.approx(a.se, rel=0.15)


def test_variance_order_insensitive():
    rng = np.random.default_rng(3)
    pairs = [QuadraturePair("ASE", x, p, k) for k, (x, p) in enumerate(rng.standard_normal((500, 2)))]
    assert variance_of(pairs) == variance_of(pairs[::-1])


def test_efficiency_from_runs():
    assert efficiency_from_runs(VarianceEstimate(1.5, 0.01, 100), VarianceEstimate(1.0, 0.01, 100))[0] == 0.0
    eta, se = efficiency_from_runs(VarianceEstimate(1.672, 0.02, 100), VarianceEstimate(1.094, 0.015, 100))
    assert eta == pytest.approx(0.094 / 0.672, abs=1e-12)
    assert eta == pytest.approx(0.14, abs=0.001)
    assert se == pytest.approx(math.hypot(0.015 / 0.672, 0.094 * 0.02 / 0.672**2), rel=1e-12)
    with pytest.raises(UndefinedEfficiency):
        efficiency_from_runs(VarianceEstimate(1.0, 0.01, 100), VarianceEstimate(1.0, 0.01, 100))


def test_pairing_errors():
    a = [QuadraturePair("ASE", 0.0, 0.0, k) for k in range(3)]
    r = [QuadraturePair("RASE", 0.0, 0.0, k) for k in (0, 1, 5)]
    with pytest.raises(PairingError):
        pair_by_shot(a, r)


def test_quadrature_table_roundtrip(tmp_path):
    pairs = [QuadraturePair("ASE", 0.1 * k, -0.3 * k, k) for k in range(5)]
    write_quadrature_table(tmp_path / "q.csv", pairs)
    assert read_quadrature_table(tmp_path / "q.csv") == pairs


@pytest.fixture(scope="module")
def vacuum_records():
    cfg = small_cfg(alpha_l=0.0, n_shots=4000, rng_seed=21)
    return cfg, list(synthesize_run(cfg, NoiseModel()))


@pytest.mark.parametrize("window_function", ["rect", "hann"])
@pytest.mark.parametrize("window_us", [None, 4.0])
@pytest.mark.parametrize("span_hz", [None, 600e3])
def test_vacuum_normalization_every_window(vacuum_records, window_function, window_us, span_hz):
    cfg, records = vacuum_records
    windows = default_windows(cfg, window_us, window_function, span_hz)
    q = process_records(records, cfg, NoiseModel(), windows)
    for f in ("ASE", "RASE"):
        v = variance_of(q[f])
        assert abs(v.mean_var - 1.0) < 3 * v.se, (f, v)


def test_convergence_to_model_covariance():
    cfg = small_cfg(alpha_l=1.4, n_shots=10_000, rng_seed=5)
    q = process_records(synthesize_run(cfg, NoiseModel()), cfg)
    cov, se = sample_covariance(q["ASE"], q["RASE"])
    model = lossy_tmsv_state(cfg.gain).cov
    # phase-estimation error slightly rotates x into p; 4 se still holds
    assert np.all(np.abs(cov - model) < 4 * se), (cov - model) / se
    v = variance_of(q["ASE"])
    assert abs(v.mean_var - ase_variance(cfg.gain)) < 3 * v.se


def test_phase_correction_closure():
    cfg = small_cfg(alpha_l=1.0, n_shots=300)
    recs = list(synthesize_run(cfg, NoiseModel()))
    twins = [synthesize_shot(cfg, NoiseModel(), r.shot_id, force_phase=0.0) for r in recs]
    q = process_records(recs, cfg)
    q0 = process_records(twins, cfg, correct_phase=False)
    for f in ("ASE", "RASE"):
        a = np.array([[p.x, p.p] for p in q[f]])
        b = np.array([[p.x, p.p] for p in q0[f]])
        rel = np.sqrt(np.mean((a - b) ** 2) / np.mean(b**2))
        assert rel < 0.05


def test_integrated_power_vacuum(vacuum_records):
    cfg, records = vacuum_records
    w = default_windows(cfg)["ASE"]
    p = np.mean([integrated_power(r, w) for r in records])
    assert p == pytest.approx(1.0, abs=0.05)
    area, se, bg = spectral_area(records, w)
    assert abs(area) < 3 * se and bg is None
