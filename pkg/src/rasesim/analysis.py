"""
Curve-level analysis: loss fitting, optical-depth cross-checks, efficiency
curves and the weighted EPR-type inseparability estimate.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Literal, Sequence

import numpy as np

from rasesim.errors import DomainError, FitError, InvalidArgument, NoGainError
from rasesim.estimators import (
    QuadraturePair,
    VarianceEstimate,
    default_windows,
    efficiency_from_runs,
    pair_by_shot,
    process_records,
    rescale_pairs,
    spectral_area,
    variance_of,
)
from rasesim.model import (
    EFFICIENCY_NEGATIVE_BELOW,
    PROBE_SATURATION_ALPHA,
    DecayScaling,
    GainFeature,
    insep_curve,
    rase_efficiency,
    scale_efficiency,
)
from rasesim.synth import NoiseModel, SequenceConfig, ShotRecord

UNTRUSTED_ALPHA = "untrusted_alpha"
NEGATIVE_MODEL = "negative_model"
MODEL_UNDEFINED = "model_undefined"


@dataclass(frozen=True)
class EfficiencyCurvePoint:
    alpha_l: float
    eta_measured: float
    eta_se: float
    eta_model: float
    kind: Literal["RASE", "I4LE_scaled"]
    flags: tuple[str, ...] = ()


@dataclass(frozen=True)
class InsepEstimate:
    b: float
    total_variance: float
    se: float

    @property
    def sigma_violation(self) -> float:
        if self.se == 0:
            return math.copysign(math.inf, 2.0 - self.total_variance) if self.total_variance != 2.0 else 0.0
        return (2.0 - self.total_variance) / self.se


@dataclass(frozen=True)
class LossFit:
    l: float
    l_se: float
    chi2: float
    dof: int
    residuals: tuple[float, ...]


@dataclass(frozen=True)
class RunSummary:
    """What one run contributes to an efficiency curve.

    RASE runs carry quadrature variances; I4LE runs carry spectral areas
    ``(area, se)`` of the amplified input and of the echo.
    """

    alpha_l: float
    kind: Literal["RASE", "I4LE"] = "RASE"
    ase: VarianceEstimate | None = None
    rase: VarianceEstimate | None = None
    input_area: tuple[float, float] | None = None
    echo_area: tuple[float, float] | None = None
    alpha_source: Literal["probe", "ase", "model"] = "model"
    flags: tuple[str, ...] = field(default=())


# -- optical depth and loss -------------------------------------------------

def _design(alpha: np.ndarray) -> np.ndarray:
    # V - 1 = l * (2 e^aL - 2)
    return 2.0 * np.expm1(alpha)


def fit_loss_detailed(
    alpha_l: Sequence[float],
    variance: Sequence[float],
    se: Sequence[float] | None = None,
) -> LossFit:
    """
    Weighted least squares for the detection transmission ``l``.

    The ASE variance is linear in ``l``, so the fit is closed form. With
    ``se`` the error is the formal WLS error; without it, the residual scatter
    sets the error (zero for noiseless data).
    """
    a = np.asarray(alpha_l, dtype=float)
    y = np.asarray(variance, dtype=float) - 1.0
    if a.size < 2 or a.size != y.size:
        raise FitError("need at least two (alpha_l, variance) points of equal length")
    if np.any(a <= 0):
        raise FitError("every point needs alpha_l > 0")
    if np.unique(a).size < 2:
        raise FitError("degenerate design: all alpha_l values are equal")
    z = _design(a)
    if se is None:
        w = np.ones_like(z)
    else:
        s = np.asarray(se, dtype=float)
        if s.shape != z.shape or np.any(s <= 0):
            raise FitError("standard errors must be positive, one per point")
        w = 1.0 / s**2
    szz = float(np.sum(w * z * z))
    l = float(np.sum(w * z * y) / szz)
    resid = y - l * z
    chi2 = float(np.sum(w * resid**2))
    dof = a.size - 1
    if se is None:
        l_se = math.sqrt(float(np.sum(resid**2)) / dof / szz)
    else:
        l_se = 1.0 / math.sqrt(szz)
    if not math.isfinite(l):
        raise FitError(f"fit diverged; residuals {resid.tolist()}")
    return LossFit(l, l_se, chi2, dof, tuple(float(r) for r in resid))


def fit_loss(points: Iterable[Sequence[float]]) -> tuple[float, float]:
    """Fit ``l`` from ``(alpha_l, variance)`` or ``(alpha_l, variance, se)`` tuples."""
    pts = [tuple(p) for p in points]
    if len(pts) < 2:
        raise FitError("need at least two points")
    widths = {len(p) for p in pts}
    if widths not in ({2}, {3}):
        raise FitError("points must all be (alpha_l, variance) or all (alpha_l, variance, se)")
    cols = list(zip(*pts))
    fit = fit_loss_detailed(cols[0], cols[1], cols[2] if len(cols) == 3 else None)
    return fit.l, fit.l_se


def invert_ase_for_alpha(ase_variance: float, l: float, tol: float = 1e-12) -> float:
    """Optical depth implied by an ASE variance: ln((V - 1)/(2l) + 1)."""
    if not 0 < l <= 1:
        raise InvalidArgument(f"l must lie in (0, 1], got {l}")
    if ase_variance < 1.0 - tol:
        raise NoGainError(f"ASE variance {ase_variance:.6g} is below the vacuum level")
    return math.log1p(max(ase_variance - 1.0, 0.0) / (2.0 * l))


def resolve_alpha(probe_alpha: float, ase_variance: float | None, l: float) -> tuple[float, tuple[str, ...]]:
    """
    Choose the optical depth to report for a run.

    Probe-transmission values at or above the saturation threshold are
    replaced by the ASE-variance inversion (when available) and flagged.
    """
    if probe_alpha < PROBE_SATURATION_ALPHA:
        return probe_alpha, ()
    if ase_variance is None:
        return probe_alpha, (UNTRUSTED_ALPHA,)
    return invert_ase_for_alpha(ase_variance, l), (UNTRUSTED_ALPHA, "alpha_from_ase")


# -- efficiency ---------------------------------------------------------------

def _model_eta(alpha: float) -> tuple[float, tuple[str, ...]]:
    try:
        eta = rase_efficiency(alpha)
    except DomainError:
        return math.nan, (MODEL_UNDEFINED,)
    return eta, ((NEGATIVE_MODEL,) if alpha < EFFICIENCY_NEGATIVE_BELOW else ())


def build_efficiency_curve(runs: Iterable[RunSummary], d: DecayScaling) -> list[EfficiencyCurvePoint]:
    points = []
    for run in runs:
        model, flags = _model_eta(run.alpha_l)
        flags = tuple(run.flags) + flags
        if run.alpha_source == "probe" and run.alpha_l >= PROBE_SATURATION_ALPHA and UNTRUSTED_ALPHA not in flags:
            flags += (UNTRUSTED_ALPHA,)
        if run.kind == "RASE":
            if run.ase is None or run.rase is None:
                raise InvalidArgument("RASE run needs ASE and RASE variance estimates")
            eta, se = efficiency_from_runs(run.ase, run.rase)
            points.append(EfficiencyCurvePoint(run.alpha_l, eta, se, model, "RASE", flags))
        else:
            if run.input_area is None or run.echo_area is None:
                raise InvalidArgument("I4LE run needs input and echo spectral areas")
            (ai, si), (ae, sa) = run.input_area, run.echo_area
            if not ai > 0:
                raise InvalidArgument("amplified input area must be positive")
            eta = ae / ai
            se = math.hypot(sa / ai, ae * si / ai**2)
            k = scale_efficiency(1.0, d)
            points.append(
                EfficiencyCurvePoint(run.alpha_l, eta * k, se * k, model * k, "I4LE_scaled", flags)
            )
    return points


def summarize_records(
    records: Iterable[ShotRecord],
    cfg: SequenceConfig,
    noise: NoiseModel | None = None,
    window_us: float | None = None,
    empirical_vacuum: bool = True,
) -> tuple[RunSummary, dict[str, list[QuadraturePair]]]:
    """
    Reduce a run to a :class:`RunSummary` plus its quadrature tables.

    When the run contains interleaved background shots and
    ``empirical_vacuum`` is set, quadratures are renormalised by the measured
    background variance of each field.
    """
    noise = noise or NoiseModel()
    records = list(records)
    windows = default_windows(cfg, window_us)
    tables = process_records(records, cfg, noise, windows)
    if empirical_vacuum:
        for f in ("ASE", "RASE"):
            if len(tables[f + "_bg"]) >= 2:
                vac = variance_of(tables[f + "_bg"])
                tables[f] = rescale_pairs(tables[f], vac)
                tables[f + "_bg"] = rescale_pairs(tables[f + "_bg"], vac)
    ase, rase = variance_of(tables["ASE"]), variance_of(tables["RASE"])
    input_area = echo_area = None
    if cfg.kind == "I4LE":
        a, sa, _ = spectral_area(records, windows["ASE"], noise.vacuum_psd)
        e, se, _ = spectral_area(records, windows["RASE"], noise.vacuum_psd)
        input_area, echo_area = (a, sa), (e, se)
    run = RunSummary(cfg.alpha_l, cfg.kind, ase, rase, input_area, echo_area, "model")
    return run, tables


# -- inseparability -----------------------------------------------------------

def estimate_inseparability(
    pairs_a: Sequence[QuadraturePair],
    pairs_r: Sequence[QuadraturePair],
    b_grid: Iterable[float],
) -> list[InsepEstimate]:
    """
    Sample ``var(u) + var(v)`` with u = sqrt(b) x_A + sqrt(1-b) x_R and
    v = sqrt(b) p_A - sqrt(1-b) p_R formed shot by shot.

    The standard error combines the Gaussian variance errors of u and v,
    ``var * sqrt(2/(n-1))`` each.
    """
    xa, pa, xr, pr = pair_by_shot(pairs_a, pairs_r)
    n = xa.size
    if n < 2:
        raise InvalidArgument("need at least two paired shots")
    b = np.asarray(list(b_grid), dtype=float)
    if np.any(b < 0) or np.any(b > 1):
        raise InvalidArgument("weights b must lie in [0, 1]")
    cov = np.cov(np.vstack([xa, pa, xr, pr]), ddof=1)
    sb, sc = np.sqrt(b), np.sqrt(1.0 - b)
    var_u = b * cov[0, 0] + (1 - b) * cov[2, 2] + 2 * sb * sc * cov[0, 2]
    var_v = b * cov[1, 1] + (1 - b) * cov[3, 3] - 2 * sb * sc * cov[1, 3]
    # exact endpoints: b = 0 / 1 select a single field
    var_u = np.where(b == 0, cov[2, 2], np.where(b == 1, cov[0, 0], var_u))
    var_v = np.where(b == 0, cov[3, 3], np.where(b == 1, cov[1, 1], var_v))
    k = math.sqrt(2.0 / (n - 1))
    se = np.hypot(var_u, var_v) * k
    return [InsepEstimate(float(bi), float(t), float(s)) for bi, t, s in zip(b, var_u + var_v, se)]


def min_estimate(estimates: Sequence[InsepEstimate]) -> InsepEstimate:
    """Smallest total variance; ties go to the smaller ``b``."""
    if not estimates:
        raise InvalidArgument("no estimates")
    return min(estimates, key=lambda e: (e.total_variance, e.b))


def overlay_model(
    points: Sequence[InsepEstimate] | None,
    g: GainFeature,
    b_grid: Iterable[float] | None = None,
) -> list[dict[str, float]]:
    """Rows of measured and model inseparability on a shared ``b`` grid."""
    if points:
        grid = [p.b for p in points]
    elif b_grid is not None:
        grid = list(b_grid)
    else:
        grid = list(np.linspace(0.0, 1.0, 101))
    model = insep_curve(g, grid)
    rows = []
    for i, m in enumerate(model):
        row = {"b": m.b, "model": m.total_variance}
        if points:
            p = points[i]
            row.update(value=p.total_variance, se=p.se, sigma_violation=p.sigma_violation)
        rows.append(row)
    return rows


# -- tables -------------------------------------------------------------------

def write_table(path: str | Path, columns: Sequence[str], rows: Iterable[dict]) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(columns)
        for row in rows:
            out = []
            for c in columns:
                v = row.get(c, "")
                if isinstance(v, float):
                    v = repr(v)
                elif isinstance(v, (tuple, list)):
                    v = ";".join(v)
                out.append(v)
            wr.writerow(out)


def efficiency_rows(points: Iterable[EfficiencyCurvePoint]) -> list[dict]:
    return [
        {
            "alpha_l": p.alpha_l,
            "value": p.eta_measured,
            "se": p.eta_se,
            "model": p.eta_model,
            "kind": p.kind,
            "flags": p.flags,
        }
        for p in points
    ]


EFFICIENCY_COLUMNS = ("alpha_l", "value", "se", "model", "kind", "flags")
INSEP_COLUMNS = ("b", "value", "se", "sigma_violation", "model")
