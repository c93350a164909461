"""
Post-processing of shot records.

Quadratures are extracted with a window-weighted matched filter (see
:mod:`rasesim.dsp`), rotated by the phase recovered from the reference pulses
and scaled so that vacuum has unit variance.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Literal, Sequence

import numpy as np
from numpy.typing import NDArray

from rasesim.dsp import Mode, bin_modes, make_mode, power_spectrum, samples
from rasesim.errors import InvalidArgument, LowConfidencePhase, PairingError, UndefinedEfficiency
from rasesim.synth import NoiseModel, SequenceConfig, ShotRecord, layout, reference_modes

Field = Literal["ASE", "RASE"]
FIELDS: tuple[Field, Field] = ("ASE", "RASE")


@dataclass(frozen=True)
class QuadraturePair:
    field: Field
    x: float
    p: float
    shot_id: int

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.p)):
            raise InvalidArgument(f"non-finite quadrature in shot {self.shot_id}")


@dataclass(frozen=True)
class SpectralWindow:
    """Time segment plus spectral span defining one detection mode."""

    center_hz: float
    start_us: float
    time_window_us: float
    span_hz: float = 100e3
    window_function: Literal["rect", "hann"] = "rect"

    def __post_init__(self) -> None:
        if not self.span_hz > 0:
            raise InvalidArgument("span_hz must be > 0")
        if not self.time_window_us > 0 or self.start_us < 0:
            raise InvalidArgument("time window must be positive and start at t >= 0")
        if self.window_function not in ("rect", "hann"):
            raise InvalidArgument(f"unknown window function {self.window_function!r}")

    def bounds(self, sample_rate_hz: float, n_samples: int) -> tuple[int, int]:
        start = samples(self.start_us, sample_rate_hz)
        n = samples(self.time_window_us, sample_rate_hz)
        if n < 1 or start + n > n_samples:
            raise InvalidArgument(
                f"window [{self.start_us}, {self.start_us + self.time_window_us}] us lies outside the record"
            )
        return start, n

    def mode(self, sample_rate_hz: float, n_samples: int) -> Mode:
        start, n = self.bounds(sample_rate_hz, n_samples)
        return make_mode(start, n, sample_rate_hz, self.center_hz, self.span_hz, self.window_function)

    def bin_modes(self, sample_rate_hz: float, n_samples: int) -> list[Mode]:
        start, n = self.bounds(sample_rate_hz, n_samples)
        return bin_modes(start, n, sample_rate_hz, self.center_hz, self.span_hz, self.window_function)


@dataclass(frozen=True)
class VarianceEstimate:
    mean_var: float
    se: float
    n_shots: int


def default_windows(
    cfg: SequenceConfig,
    window_us: float | None = None,
    window_function: Literal["rect", "hann"] = "rect",
    span_hz: float | None = None,
) -> dict[Field, SpectralWindow]:
    """
    ASE and RASE windows for a sequence, optionally shortened to ``window_us``.

    A shortened ASE window keeps its start; a shortened RASE window keeps its
    end, because the rephased emission is time-reversed relative to the ASE.
    """
    fs = cfg.sample_rate_hz
    lay = layout(cfg)
    span = cfg.span_hz if span_hz is None else span_hz
    t_ase = min(window_us or cfg.ase_window_us, cfg.ase_window_us)
    t_rase = min(window_us or cfg.rase_window_us, cfg.rase_window_us)
    rase_end_us = (lay.rase[0] + lay.rase[1]) / fs * 1e6
    return {
        "ASE": SpectralWindow(cfg.if_ase_hz, 0.0, t_ase, span, window_function),
        "RASE": SpectralWindow(cfg.if_rase_hz, rase_end_us - t_rase, t_rase, span, window_function),
    }


def estimate_phase(rec: ShotRecord, ref_cfg: SequenceConfig, noise: NoiseModel | None = None, min_snr: float = 5.0) -> float:
    """Interferometer phase in [0, 2pi) from the two reference pulses."""
    noise = noise or NoiseModel()
    amps = np.array([m.project(rec.trace) for m in reference_modes(ref_cfg)])
    floor = noise.vacuum_psd * (1.0 + noise.excess_noise)
    if np.mean(np.abs(amps) ** 2) < min_snr * floor:
        raise LowConfidencePhase(
            f"shot {rec.shot_id}: reference power below {min_snr:g}x the noise floor"
        )
    return float((np.angle(amps.sum()) - ref_cfg.ref_phase_rad) % (2 * math.pi))


def extract_quadratures(
    rec: ShotRecord,
    w: SpectralWindow,
    phase_rad: float,
    field: Field,
    vacuum_psd: float = 1.0,
) -> QuadraturePair:
    a = w.mode(rec.sample_rate_hz, len(rec.trace)).project(rec.trace)
    a *= complex(math.cos(phase_rad), -math.sin(phase_rad))
    scale = math.sqrt(2.0 / vacuum_psd)
    return QuadraturePair(field, a.real * scale, a.imag * scale, rec.shot_id)


def process_records(
    records: Iterable[ShotRecord],
    cfg: SequenceConfig,
    noise: NoiseModel | None = None,
    windows: dict[Field, SpectralWindow] | None = None,
    correct_phase: bool = True,
) -> dict[str, list[QuadraturePair]]:
    """
    Extract phase-corrected ASE/RASE quadratures from every record.

    Returns lists keyed ``"ASE"``, ``"RASE"`` (signal shots) and
    ``"ASE_bg"``, ``"RASE_bg"`` (interleaved no-inversion shots).
    """
    noise = noise or NoiseModel()
    windows = windows or default_windows(cfg)
    out: dict[str, list[QuadraturePair]] = {"ASE": [], "RASE": [], "ASE_bg": [], "RASE_bg": []}
    modes: dict[Field, Mode] | None = None
    for rec in records:
        if modes is None:
            modes = {f: windows[f].mode(rec.sample_rate_hz, len(rec.trace)) for f in FIELDS}
        phase = estimate_phase(rec, cfg, noise) if correct_phase else 0.0
        rot = complex(math.cos(phase), -math.sin(phase))
        scale = math.sqrt(2.0 / noise.vacuum_psd)
        for f in FIELDS:
            a = modes[f].project(rec.trace) * rot
            key = f + "_bg" if rec.background else f
            out[key].append(QuadraturePair(f, a.real * scale, a.imag * scale, rec.shot_id))
    return out


def _xp(pairs: Sequence[QuadraturePair]) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    ordered = sorted(pairs, key=lambda q: q.shot_id)
    return np.array([q.x for q in ordered]), np.array([q.p for q in ordered])


def variance_of(
    pairs: Sequence[QuadraturePair],
    bootstrap: bool = False,
    n_boot: int = 1000,
    seed: int = 0,
) -> VarianceEstimate:
    """
    Mean of the unbiased x and p sample variances.

    The standard error treats x and p as 2n Gaussian samples:
    ``se = mean_var * sqrt(2 / (2n - 1))``. With ``bootstrap`` the standard
    error is the spread over ``n_boot`` resamples of the shots instead.
    """
    n = len(pairs)
    if n < 2:
        raise InvalidArgument("variance needs at least two shots")
    x, p = _xp(pairs)
    mean_var = 0.5 * (np.var(x, ddof=1) + np.var(p, ddof=1))
    if bootstrap:
        rng = np.random.default_rng(seed)
        idx = rng.integers(0, n, size=(n_boot, n))
        boot = 0.5 * (np.var(x[idx], axis=1, ddof=1) + np.var(p[idx], axis=1, ddof=1))
        se = float(np.std(boot, ddof=1))
    else:
        se = float(mean_var * math.sqrt(2.0 / (2 * n - 1)))
    return VarianceEstimate(float(mean_var), se, n)


def rescale_pairs(pairs: Sequence[QuadraturePair], vacuum: VarianceEstimate) -> list[QuadraturePair]:
    """Renormalise quadratures by an empirically measured vacuum variance."""
    if not vacuum.mean_var > 0:
        raise InvalidArgument("vacuum variance must be > 0")
    s = 1.0 / math.sqrt(vacuum.mean_var)
    return [QuadraturePair(q.field, q.x * s, q.p * s, q.shot_id) for q in pairs]


def efficiency_from_runs(ase: VarianceEstimate, rase: VarianceEstimate) -> tuple[float, float]:
    """Excess-variance ratio (V_R - 1)/(V_A - 1) with first-order error propagation."""
    da = ase.mean_var - 1.0
    if not da > 0:
        raise UndefinedEfficiency(f"ASE variance {ase.mean_var:.6g} shows no gain; efficiency undefined")
    dr = rase.mean_var - 1.0
    eta = dr / da
    se = math.hypot(rase.se / da, dr * ase.se / da**2)
    return eta, se


def pair_by_shot(
    pairs_a: Sequence[QuadraturePair], pairs_r: Sequence[QuadraturePair]
) -> tuple[NDArray[np.float64], ...]:
    """Align ASE and RASE quadratures by shot id; returns ``(x_A, p_A, x_R, p_R)``."""
    a = {q.shot_id: q for q in pairs_a}
    r = {q.shot_id: q for q in pairs_r}
    if len(a) != len(pairs_a) or len(r) != len(pairs_r):
        raise PairingError("duplicate shot ids")
    if a.keys() != r.keys():
        missing = sorted(a.keys() ^ r.keys())[:5]
        raise PairingError(f"ASE and RASE shots do not pair up (e.g. shot ids {missing})")
    ids = sorted(a)
    return (
        np.array([a[k].x for k in ids]),
        np.array([a[k].p for k in ids]),
        np.array([r[k].x for k in ids]),
        np.array([r[k].p for k in ids]),
    )


def sample_covariance(
    pairs_a: Sequence[QuadraturePair], pairs_r: Sequence[QuadraturePair]
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """4x4 sample covariance of (x_A, p_A, x_R, p_R) and its Gaussian standard errors."""
    data = np.vstack(pair_by_shot(pairs_a, pairs_r))
    n = data.shape[1]
    cov = np.cov(data, ddof=1)
    d = np.diag(cov)
    se = np.sqrt((cov**2 + np.outer(d, d)) / (n - 1))
    return cov, se


def integrated_power(rec: ShotRecord, w: SpectralWindow, vacuum_psd: float = 1.0) -> float:
    """Sum of per-bin matched-filter powers over the window's span, in vacuum units."""
    modes = w.bin_modes(rec.sample_rate_hz, len(rec.trace))
    return float(sum(abs(m.project(rec.trace)) ** 2 for m in modes) / vacuum_psd)


def spectral_area(
    records: Iterable[ShotRecord],
    w: SpectralWindow,
    vacuum_psd: float = 1.0,
) -> tuple[float, float, float | None]:
    """
    Mean integrated power over the span above the vacuum level.

    Returns ``(area, se, background)``. When interleaved background shots are
    present their mean power is subtracted; otherwise the vacuum expectation
    (one unit per bin) is.
    """
    sig, bg = [], []
    n_bins = None
    for rec in records:
        if n_bins is None:
            n_bins = len(w.bin_modes(rec.sample_rate_hz, len(rec.trace)))
        (bg if rec.background else sig).append(integrated_power(rec, w, vacuum_psd))
    if len(sig) < 2:
        raise InvalidArgument("spectral area needs at least two signal shots")
    s = np.array(sig)
    level = float(np.mean(bg)) if bg else float(n_bins)
    se = float(np.std(s, ddof=1) / math.sqrt(len(s)))
    if len(bg) >= 2:
        se = math.hypot(se, float(np.std(bg, ddof=1) / math.sqrt(len(bg))))
    return float(np.mean(s)) - level, se, (level if bg else None)


def average_spectrum(records: Iterable[ShotRecord], w: SpectralWindow) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Shot-averaged periodogram of a window, for plotting only."""
    acc = None
    count = 0
    freqs = None
    for rec in records:
        start, n = w.bounds(rec.sample_rate_hz, len(rec.trace))
        freqs, pw = power_spectrum(rec.trace[start : start + n], rec.sample_rate_hz, w.window_function)
        acc = pw if acc is None else acc + pw
        count += 1
    if acc is None:
        raise InvalidArgument("no records")
    return freqs, acc / count


def write_quadrature_table(path: str | Path, pairs: Iterable[QuadraturePair]) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["shot_id", "field", "x", "p"])
        for q in sorted(pairs, key=lambda q: (q.shot_id, q.field)):
            wr.writerow([q.shot_id, q.field, repr(q.x), repr(q.p)])


def read_quadrature_table(path: str | Path) -> list[QuadraturePair]:
    with open(path, newline="") as fh:
        return [
            QuadraturePair(row["field"], float(row["x"]), float(row["p"]), int(row["shot_id"]))
            for row in csv.DictReader(fh)
        ]


def write_variance_summary(path: str | Path, estimates: dict[str, VarianceEstimate]) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["field", "mean_var", "se", "n_shots"])
        for name, est in estimates.items():
            wr.writerow([name, repr(est.mean_var), repr(est.se), est.n_shots])
