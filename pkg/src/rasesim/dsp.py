"""
Temporal/spectral mode functions for complex baseband heterodyne traces.

A detection mode is a unit-energy complex vector confined to a time segment of
the trace: a window function times the sum of the segment's DFT carriers lying
within ``span_hz/2`` of ``center_hz`` (at least the nearest one). With a 10 us
rectangular window at 20 MS/s the bin spacing is 100 kHz, so a 100 kHz span
keeps exactly one carrier and the mode is the plain matched filter.

Synthesis and estimation build their modes with the same function, which keeps
the injected field and the extracted quadrature referring to the same mode.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray
from scipy.signal import get_window

from rasesim.errors import InvalidArgument

_WINDOWS = {"rect": "boxcar", "hann": "hann"}


@dataclass(frozen=True)
class Mode:
    """Unit-energy mode occupying ``trace[start:start + len(values)]``."""

    start: int
    values: NDArray[np.complex128]

    @property
    def stop(self) -> int:
        return self.start + len(self.values)

    def project(self, trace: NDArray[np.complex128]) -> complex:
        """Complex amplitude ``<mode|trace>``."""
        return complex(np.vdot(self.values, trace[self.start : self.stop]))

    def project_many(self, traces: NDArray[np.complex128]) -> NDArray[np.complex128]:
        return traces[:, self.start : self.stop] @ self.values.conj()


def samples(duration_us: float, sample_rate_hz: float) -> int:
    return int(np.floor(duration_us * 1e-6 * sample_rate_hz + 1e-9))


def carrier_bins(n: int, sample_rate_hz: float, center_hz: float, span_hz: float | None) -> NDArray[np.float64]:
    """Frequencies of the segment DFT bins used for a mode centred at ``center_hz``."""
    freqs = np.fft.fftfreq(n, d=1.0 / sample_rate_hz)
    nearest = freqs[np.argmin(np.abs(freqs - center_hz))]
    if span_hz is None:
        return np.array([nearest])
    keep = freqs[np.abs(freqs - center_hz) <= span_hz / 2.0 + 1e-9 * sample_rate_hz / n]
    return keep if keep.size else np.array([nearest])


def make_mode(
    start: int,
    n: int,
    sample_rate_hz: float,
    center_hz: float,
    span_hz: float | None = None,
    window: str = "rect",
) -> Mode:
    if n < 1:
        raise InvalidArgument("mode segment must contain at least one sample")
    if window not in _WINDOWS:
        raise InvalidArgument(f"unknown window function {window!r}")
    t = np.arange(n) / sample_rate_hz
    w = get_window(_WINDOWS[window], n, fftbins=False) if n > 1 else np.ones(1)
    bins = carrier_bins(n, sample_rate_hz, center_hz, span_hz)
    shape = w * np.exp(2j * np.pi * np.outer(t, bins)).sum(axis=1)
    norm = np.linalg.norm(shape)
    if norm == 0:
        raise InvalidArgument("degenerate mode (zero energy)")
    return Mode(start, shape / norm)


def bin_modes(
    start: int,
    n: int,
    sample_rate_hz: float,
    center_hz: float,
    span_hz: float | None,
    window: str = "rect",
) -> list[Mode]:
    """One unit-energy mode per DFT bin in the span, for power integration."""
    return [
        make_mode(start, n, sample_rate_hz, f, None, window)
        for f in carrier_bins(n, sample_rate_hz, center_hz, span_hz)
    ]


def power_spectrum(segment: NDArray[np.complex128], sample_rate_hz: float, window: str = "rect") -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Windowed periodogram of one segment, normalised so white vacuum gives 1 per bin."""
    n = len(segment)
    w = get_window(_WINDOWS[window], n, fftbins=False) if n > 1 else np.ones(1)
    ft = np.fft.fft(segment * w) / np.linalg.norm(w)
    freqs = np.fft.fftfreq(n, d=1.0 / sample_rate_hz)
    order = np.argsort(freqs)
    return freqs[order], np.abs(ft[order]) ** 2
