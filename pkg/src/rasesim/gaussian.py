"""
Gaussian-state engine for a handful of bosonic modes.

States are stored as a mean vector and a dense covariance matrix in
``(x_0, p_0, x_1, p_1, ...)`` ordering. The vacuum has covariance equal to the
identity. Every transform returns a new state; nothing is mutated in place.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.typing import NDArray

from rasesim.errors import InvalidArgument, PhysicalityError

SYMMETRY_RTOL = 1e-12
PHYSICALITY_TOL = 1e-9


def symplectic_form(n_modes: int) -> NDArray[np.float64]:
    """Return the block-diagonal symplectic form for ``n_modes`` modes."""
    return np.kron(np.eye(n_modes), np.array([[0.0, 1.0], [-1.0, 0.0]]))


def physicality_tolerance(cov: NDArray[np.float64]) -> float:
    """Allowed shortfall of the smallest symplectic eigenvalue below 1.

    Rounding in a strongly squeezed covariance grows with its condition
    number, so the floor widens from ``PHYSICALITY_TOL`` accordingly.
    """
    w = np.linalg.eigvalsh(cov)
    if w[0] <= 0:
        return PHYSICALITY_TOL
    return max(PHYSICALITY_TOL, 1e3 * np.finfo(float).eps * w[-1] / w[0])


def _check_symmetric(cov: NDArray[np.float64]) -> None:
    scale = max(float(np.max(np.abs(cov))), 1.0)
    if np.max(np.abs(cov - cov.T)) > SYMMETRY_RTOL * scale:
        raise PhysicalityError("covariance matrix is not symmetric")


def _symmetrize(cov: NDArray[np.float64]) -> NDArray[np.float64]:
    return 0.5 * (cov + cov.T)


@dataclass(frozen=True)
class GaussianState:
    """Mean vector and covariance of ``N`` modes, vacuum-normalised."""

    mean: NDArray[np.float64]
    cov: NDArray[np.float64]
    mode_labels: tuple[str, ...] = field(default=())

    def __post_init__(self) -> None:
        mean = np.array(self.mean, dtype=float)
        cov = np.array(self.cov, dtype=float)
        if cov.ndim != 2 or cov.shape[0] != cov.shape[1] or cov.shape[0] % 2:
            raise InvalidArgument(f"covariance must be 2N x 2N, got {cov.shape}")
        if mean.shape != (cov.shape[0],):
            raise InvalidArgument("mean length does not match covariance size")
        _check_symmetric(cov)
        n = cov.shape[0] // 2
        labels = tuple(self.mode_labels) or tuple(f"mode{k}" for k in range(n))
        if len(labels) != n:
            raise InvalidArgument(f"expected {n} mode labels, got {len(labels)}")
        mean.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "mode_labels", labels)
        nu = symplectic_eigenvalues(self)
        if nu.min() < 1.0 - physicality_tolerance(cov):
            raise PhysicalityError(
                f"unphysical covariance: smallest symplectic eigenvalue {nu.min():.12g}"
            )

    @property
    def n_modes(self) -> int:
        return self.cov.shape[0] // 2

    def mode_index(self, mode: int | str) -> int:
        if isinstance(mode, str):
            try:
                return self.mode_labels.index(mode)
            except ValueError:
                raise InvalidArgument(f"no mode labelled {mode!r}") from None
        if not 0 <= int(mode) < self.n_modes:
            raise InvalidArgument(f"mode index {mode} out of range for {self.n_modes} modes")
        return int(mode)


@dataclass(frozen=True)
class LossChannel:
    """Pure-loss beamsplitter of intensity transmission ``t`` on one mode."""

    t: float
    target_mode: int | str = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.t <= 1.0:
            raise InvalidArgument(f"transmission must lie in [0, 1], got {self.t}")


@dataclass(frozen=True)
class SqueezeParams:
    r: float
    mode_a: int | str = 0
    mode_b: int | str = 1

    def __post_init__(self) -> None:
        if self.r < 0:
            raise InvalidArgument(f"squeeze parameter must be >= 0, got {self.r}")
        if self.mode_a == self.mode_b:
            raise InvalidArgument("two-mode squeezing needs two distinct modes")


def vacuum(n_modes: int, labels: Sequence[str] = ()) -> GaussianState:
    if n_modes < 1:
        raise InvalidArgument("n_modes must be >= 1")
    return GaussianState(np.zeros(2 * n_modes), np.eye(2 * n_modes), tuple(labels))


def _transform(state: GaussianState, S: NDArray[np.float64], noise: NDArray[np.float64] | None = None) -> GaussianState:
    cov = S @ state.cov @ S.T
    if noise is not None:
        cov = cov + noise
    return GaussianState(S @ state.mean, _symmetrize(cov), state.mode_labels)


def two_mode_squeeze(state: GaussianState, p: SqueezeParams) -> GaussianState:
    """
    Apply a two-mode squeezer.

    The convention is ``x_a -> cosh(r) x_a - sinh(r) x_b`` and
    ``p_a -> cosh(r) p_a + sinh(r) p_b`` (symmetrically for ``b``), so on vacuum
    the x quadratures end up anticorrelated and the p quadratures correlated.
    With this choice ``u = sqrt(b) x_A + sqrt(1-b) x_R`` and
    ``v = sqrt(b) p_A - sqrt(1-b) p_R`` are the low-noise combinations.
    """
    a, b = state.mode_index(p.mode_a), state.mode_index(p.mode_b)
    if a == b:
        raise InvalidArgument("two-mode squeezing needs two distinct modes")
    c, s = np.cosh(p.r), np.sinh(p.r)
    S = np.eye(2 * state.n_modes)
    xa, pa, xb, pb = 2 * a, 2 * a + 1, 2 * b, 2 * b + 1
    S[xa, xa] = S[xb, xb] = S[pa, pa] = S[pb, pb] = c
    S[xa, xb] = S[xb, xa] = -s
    S[pa, pb] = S[pb, pa] = s
    return _transform(state, S)


def rotate(state: GaussianState, mode: int | str, phi: float) -> GaussianState:
    """Phase-rotate one mode by ``phi`` (x -> x cos + p sin)."""
    k = state.mode_index(mode)
    S = np.eye(2 * state.n_modes)
    c, s = np.cos(phi), np.sin(phi)
    S[2 * k : 2 * k + 2, 2 * k : 2 * k + 2] = [[c, s], [-s, c]]
    return _transform(state, S)


def apply_loss(state: GaussianState, ch: LossChannel) -> GaussianState:
    """Mix vacuum into ``ch.target_mode``: V -> t V + (1 - t), cross terms scale by sqrt(t)."""
    k = state.mode_index(ch.target_mode)
    X = np.eye(2 * state.n_modes)
    X[2 * k, 2 * k] = X[2 * k + 1, 2 * k + 1] = np.sqrt(ch.t)
    Y = np.zeros_like(X)
    Y[2 * k, 2 * k] = Y[2 * k + 1, 2 * k + 1] = 1.0 - ch.t
    return _transform(state, X, Y)


def quadrature_stats(state: GaussianState, mode: int | str) -> tuple[float, float, NDArray[np.float64]]:
    """
    Return ``(var_x, var_p, cross_terms)`` for one mode.

    ``cross_terms`` is the 2 x 2N slice of the covariance linking this mode's
    quadratures to every quadrature, with the mode's own 2 x 2 block zeroed.
    """
    k = state.mode_index(mode)
    rows = state.cov[2 * k : 2 * k + 2].copy()
    rows[:, 2 * k : 2 * k + 2] = 0.0
    return float(state.cov[2 * k, 2 * k]), float(state.cov[2 * k + 1, 2 * k + 1]), rows


def symplectic_eigenvalues(state: GaussianState | NDArray[np.float64]) -> NDArray[np.float64]:
    """Sorted symplectic eigenvalues (moduli of the eigenvalues of i Omega V)."""
    cov = state.cov if isinstance(state, GaussianState) else np.asarray(state, dtype=float)
    _check_symmetric(cov)
    n = cov.shape[0] // 2
    ev = np.abs(np.linalg.eigvals(1j * symplectic_form(n) @ cov))
    # eigenvalues come in +/- pairs; keep one of each
    return np.sort(ev)[::2]
