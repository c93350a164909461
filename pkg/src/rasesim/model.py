"""
Closed-form RASE models.

* ASE quadrature variance versus optical depth with a single detection loss.
* Rephasing efficiency as a ratio of excess variances.
* The lossy two-mode squeezed vacuum (TMSV) used for the inseparability curve.
* Delay rescaling of echo efficiencies using an optical decay constant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Literal

import numpy as np

from rasesim.errors import DomainError, InvalidArgument
from rasesim.gaussian import (
    GaussianState,
    LossChannel,
    SqueezeParams,
    apply_loss,
    two_mode_squeeze,
    vacuum,
)

MODE_LABELS = ("ASE", "RASE")

#: Below this optical depth the efficiency formula has a negative numerator
#: (8 sinh^2(aL/2) - 1 < 0 exactly when aL < ln 2).
EFFICIENCY_NEGATIVE_BELOW = math.log(2.0)

#: Probe-transmission optical depths at or above this value saturate and are untrusted.
PROBE_SATURATION_ALPHA = 2.0


@dataclass(frozen=True)
class GainFeature:
    """Inverted spectral feature plus the losses seen by its two output fields.

    ``transmission_l`` is the detection-chain transmission applied to both
    fields; ``reph_transmission`` is the extra attenuation of the rephased
    field only.
    """

    alpha_l: float
    transmission_l: float = 1.0
    reph_transmission: float = 1.0
    linewidth_hz: float = 200e3

    def __post_init__(self) -> None:
        if not self.alpha_l >= 0:
            raise InvalidArgument(f"alpha_l must be >= 0, got {self.alpha_l}")
        for name in ("transmission_l", "reph_transmission"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise InvalidArgument(f"{name} must lie in [0, 1], got {v}")
        if self.linewidth_hz < 0:
            raise InvalidArgument("linewidth_hz must be >= 0")

    @property
    def squeeze_r(self) -> float:
        return squeeze_for_gain(self.alpha_l)


@dataclass(frozen=True)
class DecayScaling:
    tau_us: float = 59.2
    t_ref_us: float = 20.0
    t_target_us: float = 20.0
    kind: Literal["intensity", "amplitude"] = "intensity"

    def __post_init__(self) -> None:
        if not self.tau_us > 0:
            raise InvalidArgument(f"tau_us must be > 0, got {self.tau_us}")
        if self.t_ref_us < 0 or self.t_target_us < 0:
            raise InvalidArgument("delays must be >= 0")
        if self.kind not in ("intensity", "amplitude"):
            raise InvalidArgument(f"unknown decay kind {self.kind!r}")


@dataclass(frozen=True)
class InsepPoint:
    b: float
    total_variance: float


def squeeze_for_gain(alpha_l: float) -> float:
    """Squeeze parameter with cosh^2 r = exp(alpha_l)."""
    if alpha_l < 0:
        raise InvalidArgument("alpha_l must be >= 0")
    return float(np.arccosh(np.sqrt(np.exp(alpha_l))))


def ase_variance(g: GainFeature) -> float:
    l = g.transmission_l
    return l * (2.0 * math.exp(g.alpha_l) - 1.0) + (1.0 - l)


def rase_efficiency(alpha_l: float) -> float:
    """
    Ratio of rephased to amplified excess variance for an ideal echo,
    ``(1 + 8 sinh^2(aL/2) - 2) / (2 e^aL - 2)``.

    The numerator is negative for ``alpha_l < ln 2``; such values are returned
    unmodified, callers flag them using :data:`EFFICIENCY_NEGATIVE_BELOW`.
    """
    if not alpha_l > 0:
        raise DomainError(f"efficiency undefined for alpha_l <= 0 (got {alpha_l})")
    num = 1.0 + 8.0 * math.sinh(alpha_l / 2.0) ** 2 - 2.0
    return num / (2.0 * math.expm1(alpha_l))


def scale_efficiency(eta: float, d: DecayScaling) -> float:
    """Rescale an echo efficiency measured at ``t_ref_us`` to ``t_target_us``.

    With ``kind="amplitude"`` the constant describes the field decay, so the
    intensity efficiency decays twice as fast.
    """
    if not d.tau_us > 0:
        raise InvalidArgument("tau_us must be > 0")
    rate = 1.0 if d.kind == "intensity" else 2.0
    return eta * math.exp(-rate * (d.t_target_us - d.t_ref_us) / d.tau_us)


def lossy_tmsv_state(g: GainFeature) -> GaussianState:
    """Two-mode state (ASE, RASE): squeeze, common loss ``l``, extra RASE loss ``t_r``."""
    state = vacuum(2, MODE_LABELS)
    state = two_mode_squeeze(state, SqueezeParams(g.squeeze_r, 0, 1))
    state = apply_loss(state, LossChannel(g.transmission_l, 0))
    state = apply_loss(state, LossChannel(g.transmission_l, 1))
    return apply_loss(state, LossChannel(g.reph_transmission, 1))


def _total_variance(cov: np.ndarray, b: np.ndarray) -> np.ndarray:
    # u = sqrt(b) x_A + sqrt(1-b) x_R ; v = sqrt(b) p_A - sqrt(1-b) p_R
    sb, sc = np.sqrt(b), np.sqrt(1.0 - b)
    var_u = b * cov[0, 0] + (1 - b) * cov[2, 2] + 2 * sb * sc * cov[0, 2]
    var_v = b * cov[1, 1] + (1 - b) * cov[3, 3] - 2 * sb * sc * cov[1, 3]
    return var_u + var_v


def _check_b(b: np.ndarray) -> None:
    if np.any(~np.isfinite(b)) or np.any(b < 0) or np.any(b > 1):
        raise InvalidArgument("weights b must lie in [0, 1]")


def insep_curve(g: GainFeature, b_grid: Iterable[float]) -> list[InsepPoint]:
    b = np.asarray(list(b_grid), dtype=float)
    _check_b(b)
    totals = _total_variance(lossy_tmsv_state(g).cov, b)
    return [InsepPoint(float(bi), float(ti)) for bi, ti in zip(b, totals)]


def find_min_b(g: GainFeature, tol: float = 1e-5) -> InsepPoint:
    """
    Minimise the model inseparability total over ``b`` in [0, 1].

    A 1001-point grid picks the bracket (first minimum wins, so ties go to the
    smaller ``b``); golden-section search then refines inside it.
    """
    cov = lossy_tmsv_state(g).cov

    def f(x: float) -> float:
        return float(_total_variance(cov, np.asarray(x)))

    grid = np.linspace(0.0, 1.0, 1001)
    vals = _total_variance(cov, grid)
    i = int(np.flatnonzero(vals <= vals.min() + 1e-12)[0])
    best_b, best_v = float(grid[i]), float(vals[i])

    lo, hi = float(grid[max(i - 1, 0)]), float(grid[min(i + 1, 1000)])
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c, d = hi - invphi * (hi - lo), lo + invphi * (hi - lo)
    fc, fd = f(c), f(d)
    while hi - lo > tol:
        if fc <= fd:
            hi, d, fd = d, c, fc
            c = hi - invphi * (hi - lo)
            fc = f(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + invphi * (hi - lo)
            fd = f(d)
    xm = 0.5 * (lo + hi)
    fm = f(xm)
    if fm < best_v - 1e-15:
        best_b, best_v = xm, fm
    return InsepPoint(best_b, best_v)
