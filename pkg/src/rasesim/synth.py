"""
Monte-Carlo synthesis of heterodyne shot records for RASE and I4LE sequences.

Each shot is a complex baseband trace at ``sample_rate_hz`` laid out as::

    | ASE window | pi1 | tau_s | pi2 | RASE window | gap | ref1 | gap | ref2 |

The pulse intervals carry detection noise only. Each detection window is one
effective temporal mode (see :mod:`rasesim.dsp`). Per shot, a quadrature
sample ``(x_A, p_A, x_R, p_R)`` is drawn from the lossy TMSV covariance and
written into the ASE and RASE modes, replacing the white vacuum noise's
projection onto them. A common interferometer phase, uniform on [0, 2pi) and
fixed within the shot, multiplies all signal and reference content.

Randomness for shot ``k`` comes from ``SeedSequence(rng_seed, spawn_key=(k,))``,
so records do not depend on generation order or on the number of workers.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Iterable, Iterator, Literal

import numpy as np
from numpy.typing import NDArray

from rasesim.dsp import Mode, make_mode, samples
from rasesim.errors import InvalidArgument
from rasesim.model import GainFeature, lossy_tmsv_state

Kind = Literal["RASE", "I4LE"]


@dataclass(frozen=True)
class SequenceConfig:
    """Shot timeline and the gain/loss parameters of the simulated feature.

    Times are in microseconds, frequencies in Hz. ``input_amplitude`` (I4LE
    only) and ``ref_amplitude`` are coherent amplitudes in vacuum quadrature
    units, i.e. the mean quadrature along the pulse phase.
    """

    kind: Kind = "RASE"
    alpha_l: float = 1.0
    transmission_l: float = 0.11
    reph_transmission: float = 1.0
    linewidth_hz: float = 200e3
    ase_window_us: float = 10.0
    rase_window_us: float = 10.0
    tau_s_us: float = 5.0
    pi1_len_us: float = 1.7
    pi2_len_us: float = 2.5
    if_ase_hz: float = 2e6
    if_rase_hz: float = -2e6
    span_hz: float = 100e3
    sample_rate_hz: float = 20e6
    input_amplitude: float = 10.0
    input_len_us: float = 1.0
    ref_amplitude: float = 50.0
    ref_len_us: float = 2.0
    ref_gap_us: float = 1.0
    ref_phase_rad: float = 0.0
    ref_if_hz: float = 0.0
    background_every: int = 0
    n_shots: int = 1000
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in ("RASE", "I4LE"):
            raise InvalidArgument(f"kind must be RASE or I4LE, got {self.kind!r}")
        for name in ("ase_window_us", "rase_window_us", "ref_len_us", "input_len_us", "sample_rate_hz", "span_hz"):
            if not getattr(self, name) > 0:
                raise InvalidArgument(f"{name} must be > 0")
        for name in ("tau_s_us", "pi1_len_us", "pi2_len_us", "ref_gap_us", "input_amplitude", "ref_amplitude"):
            if getattr(self, name) < 0:
                raise InvalidArgument(f"{name} must be >= 0")
        max_if = max(abs(self.if_ase_hz), abs(self.if_rase_hz), abs(self.ref_if_hz))
        if self.sample_rate_hz < 4 * max_if:
            raise InvalidArgument(
                f"sample rate {self.sample_rate_hz:g} Hz is below 4x the largest IF ({max_if:g} Hz)"
            )
        if self.input_len_us > min(self.ase_window_us, self.rase_window_us):
            raise InvalidArgument("input pulse longer than the detection windows")
        if self.n_shots < 1:
            raise InvalidArgument("n_shots must be >= 1")
        if self.background_every < 0:
            raise InvalidArgument("background_every must be >= 0")
        if self.rng_seed < 0:
            raise InvalidArgument("rng_seed must be >= 0")
        self.gain  # validates the gain/loss ranges

    @property
    def gain(self) -> GainFeature:
        return GainFeature(self.alpha_l, self.transmission_l, self.reph_transmission, self.linewidth_hz)

    @property
    def total_us(self) -> float:
        return (
            self.ase_window_us + self.pi1_len_us + self.tau_s_us + self.pi2_len_us
            + self.rase_window_us + 2 * (self.ref_gap_us + self.ref_len_us)
        )

    def is_background(self, shot_id: int) -> bool:
        return self.background_every > 0 and shot_id % self.background_every == 0


@dataclass(frozen=True)
class NoiseModel:
    """Detection noise.

    ``vacuum_psd`` is the per-sample vacuum noise power; demodulating with a
    unit-energy mode and dividing by it gives unit quadrature variance.
    ``visibility`` is folded into ``transmission_l`` unless
    ``apply_visibility`` is set, in which case the signal amplitude is
    additionally multiplied by it.
    """

    vacuum_psd: float = 1.0
    excess_noise: float = 0.0
    visibility: float = 0.90
    apply_visibility: bool = False

    def __post_init__(self) -> None:
        if not self.vacuum_psd > 0:
            raise InvalidArgument("vacuum_psd must be > 0")
        if self.excess_noise < 0:
            raise InvalidArgument("excess_noise must be >= 0")
        if not 0 < self.visibility <= 1:
            raise InvalidArgument("visibility must lie in (0, 1]")


@dataclass(frozen=True)
class ShotTruth:
    interferometer_phase_rad: float
    rng_stream_id: tuple[int, int]


@dataclass(frozen=True, eq=False)
class ShotRecord:
    shot_id: int
    trace: NDArray[np.complex128]
    sample_rate_hz: float
    background: bool = False
    truth: ShotTruth = field(default=ShotTruth(0.0, (0, 0)))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ShotRecord):
            return NotImplemented
        return (
            self.shot_id == other.shot_id
            and self.sample_rate_hz == other.sample_rate_hz
            and self.background == other.background
            and self.truth == other.truth
            and self.trace.tobytes() == other.trace.tobytes()
        )

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True)
class Layout:
    """Sample indices of every segment of a shot trace."""

    n_samples: int
    ase: tuple[int, int]
    rase: tuple[int, int]
    refs: tuple[tuple[int, int], ...]
    input_pulse: tuple[int, int] | None
    echo_pulse: tuple[int, int] | None


@lru_cache(maxsize=64)
def layout(cfg: SequenceConfig) -> Layout:
    fs = cfg.sample_rate_hz
    t_rase = cfg.ase_window_us + cfg.pi1_len_us + cfg.tau_s_us + cfg.pi2_len_us
    t_ref1 = t_rase + cfg.rase_window_us + cfg.ref_gap_us
    t_ref2 = t_ref1 + cfg.ref_len_us + cfg.ref_gap_us
    ase = (0, samples(cfg.ase_window_us, fs))
    rase = (samples(t_rase, fs), samples(cfg.rase_window_us, fs))
    refs = ((samples(t_ref1, fs), samples(cfg.ref_len_us, fs)), (samples(t_ref2, fs), samples(cfg.ref_len_us, fs)))
    n_total = samples(cfg.total_us, fs)
    if min(ase[1], rase[1], refs[0][1]) < 1:
        raise InvalidArgument("a window is shorter than one sample")
    if refs[1][0] + refs[1][1] > n_total:
        raise InvalidArgument("segments do not fit in the record")
    inp = echo = None
    if cfg.kind == "I4LE":
        n_in = max(samples(cfg.input_len_us, fs), 1)
        inp = (ase[0], n_in)
        # the echo is time-reversed relative to the input, so it closes the RASE window
        echo = (rase[0] + rase[1] - n_in, n_in)
    return Layout(n_total, ase, rase, refs, inp, echo)


@dataclass(frozen=True)
class _Plan:
    layout: Layout
    mode_a: Mode
    mode_r: Mode
    ref_modes: tuple[Mode, ...]
    input_mode: Mode | None
    echo_mode: Mode | None
    chol: NDArray[np.float64]
    chol_background: NDArray[np.float64]
    mean_a: complex
    mean_r: complex
    mean_a_background: complex


def field_modes(cfg: SequenceConfig) -> tuple[Mode, Mode]:
    lay = layout(cfg)
    fs = cfg.sample_rate_hz
    return (
        make_mode(*lay.ase, fs, cfg.if_ase_hz, cfg.span_hz),
        make_mode(*lay.rase, fs, cfg.if_rase_hz, cfg.span_hz),
    )


def reference_modes(cfg: SequenceConfig) -> tuple[Mode, ...]:
    return tuple(make_mode(s, n, cfg.sample_rate_hz, cfg.ref_if_hz) for s, n in layout(cfg).refs)


def effective_gain(cfg: SequenceConfig, noise: NoiseModel) -> GainFeature:
    g = cfg.gain
    if noise.apply_visibility:
        g = replace(g, transmission_l=g.transmission_l * noise.visibility**2)
    return g


@lru_cache(maxsize=64)
def _plan(cfg: SequenceConfig, noise: NoiseModel) -> _Plan:
    lay = layout(cfg)
    fs = cfg.sample_rate_hz
    mode_a, mode_r = field_modes(cfg)
    g = effective_gain(cfg, noise)
    chol = np.linalg.cholesky(lossy_tmsv_state(g).cov)
    inp = echo = None
    mean_a = mean_r = mean_a_bg = 0j
    if cfg.kind == "I4LE":
        inp = make_mode(*lay.input_pulse, fs, cfg.if_ase_hz)
        echo = make_mode(*lay.echo_pulse, fs, cfg.if_rase_hz)
        alpha = cfg.input_amplitude / math.sqrt(2.0)
        r = g.squeeze_r
        l, tr = g.transmission_l, g.reph_transmission
        # a_A -> cosh r a_A - sinh r a_R^dagger, and vice versa
        mean_a = math.sqrt(l) * math.cosh(r) * alpha
        mean_r = -math.sqrt(l * tr) * math.sinh(r) * np.conj(alpha)
        mean_a_bg = math.sqrt(l) * alpha
    return _Plan(
        lay, mode_a, mode_r, reference_modes(cfg), inp, echo,
        chol, np.eye(4), complex(mean_a), complex(mean_r), complex(mean_a_bg),
    )


def shot_rng(seed: int, shot_id: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(shot_id,))))


def synthesize_shot(
    cfg: SequenceConfig,
    noise: NoiseModel,
    shot_id: int,
    force_phase: float | None = None,
) -> ShotRecord:
    """
    Synthesise one shot.

    ``force_phase`` overrides the drawn interferometer phase while consuming
    the same random numbers, which yields the zero-phase twin of a record.
    """
    if shot_id < 0:
        raise InvalidArgument("shot_id must be >= 0")
    plan = _plan(cfg, noise)
    rng = shot_rng(cfg.rng_seed, shot_id)
    theta = float(rng.uniform(0.0, 2.0 * math.pi))
    background = cfg.is_background(shot_id)

    chol = plan.chol_background if background else plan.chol
    x_a, p_a, x_r, p_r = chol @ rng.standard_normal(4)
    white = rng.standard_normal((2, plan.layout.n_samples))
    trace = (white[0] + 1j * white[1]) * math.sqrt(noise.vacuum_psd / 2.0)

    phase = theta if force_phase is None else float(force_phase)
    rot = complex(math.cos(phase), math.sin(phase))
    amp = math.sqrt(noise.vacuum_psd)
    for mode, a in ((plan.mode_a, complex(x_a, p_a)), (plan.mode_r, complex(x_r, p_r))):
        seg = trace[mode.start : mode.stop]
        seg -= mode.values * np.vdot(mode.values, seg)
        seg += mode.values * (rot * amp * a / math.sqrt(2.0))

    if plan.input_mode is not None:
        mean_a = plan.mean_a_background if background else plan.mean_a
        mean_r = 0j if background else plan.mean_r
        for mode, m in ((plan.input_mode, mean_a), (plan.echo_mode, mean_r)):
            trace[mode.start : mode.stop] += mode.values * (rot * amp * m)

    ref = cfg.ref_amplitude / math.sqrt(2.0) * complex(math.cos(cfg.ref_phase_rad), math.sin(cfg.ref_phase_rad))
    for mode in plan.ref_modes:
        trace[mode.start : mode.stop] += mode.values * (rot * amp * ref)

    if noise.excess_noise > 0:
        extra = rng.standard_normal((2, plan.layout.n_samples))
        trace += (extra[0] + 1j * extra[1]) * math.sqrt(noise.excess_noise * noise.vacuum_psd / 2.0)

    return ShotRecord(
        shot_id=shot_id,
        trace=trace,
        sample_rate_hz=cfg.sample_rate_hz,
        background=background,
        truth=ShotTruth(theta, (cfg.rng_seed, shot_id)),
    )


def synthesize_run(
    cfg: SequenceConfig,
    noise: NoiseModel,
    workers: int = 1,
    shot_ids: Iterable[int] | None = None,
) -> Iterator[ShotRecord]:
    """Yield ``cfg.n_shots`` records (or the requested ``shot_ids``) in order."""
    ids = range(cfg.n_shots) if shot_ids is None else shot_ids
    if workers <= 1:
        for k in ids:
            yield synthesize_shot(cfg, noise, k)
        return
    with ThreadPoolExecutor(max_workers=workers) as pool:
        yield from pool.map(lambda k: synthesize_shot(cfg, noise, k), ids)
