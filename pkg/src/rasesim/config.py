"""
Experiment configuration.

The on-disk format is INI (one section per component) so that configs diff
cleanly; :meth:`ExperimentConfig.to_dict`/:meth:`from_dict` give the
equivalent JSON form. Every section and key is validated and unknown ones are
rejected with their location.
"""

from __future__ import annotations

import configparser
import hashlib
import io
import json
from dataclasses import asdict, dataclass, field, fields, replace
from importlib import resources
from pathlib import Path
from typing import Any, Literal

import numpy as np

from rasesim.errors import ConfigError, RaseError
from rasesim.model import DecayScaling, GainFeature
from rasesim.synth import NoiseModel, SequenceConfig

CONFIG_FORMAT_VERSION = 1


@dataclass(frozen=True)
class LevelScheme:
    """Hyperfine levels and relative oscillator strengths (labels only)."""

    ground: tuple[str, ...] = ("g1", "g2", "g3")
    excited: tuple[str, ...] = ("e1", "e2", "e3")
    strengths: tuple[tuple[str, float], ...] = (
        ("g1-e1", 0.05),
        ("g2-e1", 0.40),
        ("g3-e1", 0.55),
        ("g2-e2", 0.60),
        ("g3-e2", 0.38),
    )

    def __post_init__(self) -> None:
        object.__setattr__(self, "strengths", tuple(sorted((str(k), float(v)) for k, v in self.strengths)))
        labels = self.ground + self.excited
        if len(set(labels)) != len(labels):
            raise ConfigError("level labels must be unique")
        seen = set()
        for name, s in self.strengths:
            g, _, e = name.partition("-")
            if g not in self.ground or e not in self.excited:
                raise ConfigError(f"transition {name!r} refers to unknown levels")
            if name in seen:
                raise ConfigError(f"duplicate transition {name!r}")
            seen.add(name)
            if not 0 < s <= 1:
                raise ConfigError(f"strength of {name} must lie in (0, 1], got {s}")

    def strength(self, ground: str, excited: str) -> float:
        return dict(self.strengths)[f"{ground}-{excited}"]


@dataclass(frozen=True)
class AnalysisOptions:
    b_points: int = 101
    alpha_min: float = 0.0
    alpha_max: float = 2.5
    alpha_points: int = 26
    window_us: float | None = None
    window_function: Literal["rect", "hann"] = "rect"
    bootstrap: bool = False
    empirical_vacuum: bool = True
    workers: int = 1

    def __post_init__(self) -> None:
        if self.b_points < 2 or self.alpha_points < 1:
            raise ConfigError("grids need at least two b points and one alpha point")
        if self.alpha_min < 0 or self.alpha_max < self.alpha_min:
            raise ConfigError("alpha grid must satisfy 0 <= alpha_min <= alpha_max")
        if self.window_us is not None and not self.window_us > 0:
            raise ConfigError("window_us must be > 0")
        if self.window_function not in ("rect", "hann"):
            raise ConfigError(f"unknown window function {self.window_function!r}")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    @property
    def b_grid(self) -> np.ndarray:
        return np.round(np.linspace(0.0, 1.0, self.b_points), 12)

    @property
    def alpha_grid(self) -> np.ndarray:
        return np.round(np.linspace(self.alpha_min, self.alpha_max, self.alpha_points), 12)


_SECTIONS = {
    "sequence": SequenceConfig,
    "noise": NoiseModel,
    "decay": DecayScaling,
    "analysis": AnalysisOptions,
}


@dataclass(frozen=True)
class ExperimentConfig:
    sequence: SequenceConfig = field(default_factory=SequenceConfig)
    noise: NoiseModel = field(default_factory=NoiseModel)
    decay: DecayScaling = field(default_factory=DecayScaling)
    analysis: AnalysisOptions = field(default_factory=AnalysisOptions)
    level_scheme: LevelScheme = field(default_factory=LevelScheme)
    output_dir: str = "out"
    format_version: int = CONFIG_FORMAT_VERSION

    @property
    def gain(self) -> GainFeature:
        return self.sequence.gain

    # -- dict / JSON ---------------------------------------------------------

    def to_dict(self) -> dict[str, Any]:
        d = {name: asdict(getattr(self, name)) for name in _SECTIONS}
        d["level_scheme"] = {
            "ground": list(self.level_scheme.ground),
            "excited": list(self.level_scheme.excited),
            "strengths": dict(self.level_scheme.strengths),
        }
        d["output"] = {"dir": self.output_dir}
        d["meta"] = {"format_version": self.format_version}
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any], source: str = "<dict>") -> "ExperimentConfig":
        known = set(_SECTIONS) | {"level_scheme", "output", "meta"}
        for sec in d:
            if sec not in known:
                raise ConfigError(f"{source}: unknown section [{sec}]")
        meta = dict(d.get("meta", {}))
        version = int(meta.pop("format_version", CONFIG_FORMAT_VERSION))
        _reject_unknown(meta, set(), f"{source}: [meta]")
        if version != CONFIG_FORMAT_VERSION:
            raise ConfigError(f"{source}: config format version {version} is not supported")
        parts = {}
        for sec, typ in _SECTIONS.items():
            values = dict(d.get(sec, {}))
            names = {f.name for f in fields(typ)}
            _reject_unknown(values, names, f"{source}: [{sec}]")
            try:
                parts[sec] = typ(**{k: _coerce(typ, k, v, f"{source}: [{sec}] {k}") for k, v in values.items()})
            except (RaseError, TypeError, ValueError) as exc:
                if isinstance(exc, ConfigError):
                    raise
                raise ConfigError(f"{source}: [{sec}] {exc}") from exc
        ls = dict(d.get("level_scheme", {}))
        _reject_unknown(ls, {"ground", "excited", "strengths"}, f"{source}: [level_scheme]")
        scheme = LevelScheme()
        if ls:
            scheme = LevelScheme(
                tuple(ls.get("ground", scheme.ground)),
                tuple(ls.get("excited", scheme.excited)),
                tuple((k, float(v)) for k, v in ls.get("strengths", dict(scheme.strengths)).items()),
            )
        out = dict(d.get("output", {}))
        _reject_unknown(out, {"dir"}, f"{source}: [output]")
        return cls(output_dir=str(out.get("dir", "out")), level_scheme=scheme, format_version=version, **parts)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str, source: str = "<json>") -> "ExperimentConfig":
        try:
            return cls.from_dict(json.loads(text), source)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{source}: {exc}") from exc

    # -- INI -----------------------------------------------------------------

    def to_ini(self) -> str:
        d = self.to_dict()
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str  # keep key case
        cp["meta"] = {"format_version": str(self.format_version)}
        for sec in _SECTIONS:
            cp[sec] = {k: _fmt(v) for k, v in d[sec].items()}
        cp["level_scheme"] = {
            "ground": ", ".join(self.level_scheme.ground),
            "excited": ", ".join(self.level_scheme.excited),
            **{k: repr(v) for k, v in self.level_scheme.strengths},
        }
        cp["output"] = {"dir": self.output_dir}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    @classmethod
    def from_ini(cls, text: str, source: str = "<ini>") -> "ExperimentConfig":
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        try:
            cp.read_string(text, source=source)
        except configparser.Error as exc:
            raise ConfigError(f"{source}: {exc}") from exc
        d: dict[str, Any] = {}
        for sec in cp.sections():
            d[sec] = dict(cp[sec])
        if "level_scheme" in d:
            raw = d["level_scheme"]
            ls: dict[str, Any] = {"strengths": {}}
            for k, v in raw.items():
                if k in ("ground", "excited"):
                    ls[k] = [s.strip() for s in v.split(",") if s.strip()]
                else:
                    try:
                        ls["strengths"][k] = float(v)
                    except ValueError:
                        raise ConfigError(f"{source}: [level_scheme] {k}: not a number: {v!r}") from None
            d["level_scheme"] = ls
        return cls.from_dict(d, source)

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        path = Path(path)
        text = path.read_text()
        if path.suffix == ".json":
            return cls.from_json(text, str(path))
        return cls.from_ini(text, str(path))

    def save(self, path: str | Path) -> None:
        path = Path(path)
        path.write_text(self.to_json() if path.suffix == ".json" else self.to_ini())

    @classmethod
    def defaults(cls) -> "ExperimentConfig":
        """Configuration reproducing the reference Pr:YSO experiment parameters."""
        text = resources.files("rasesim.data").joinpath("defaults.ini").read_text()
        return cls.from_ini(text, "defaults.ini")

    def config_hash(self) -> str:
        """SHA-256 over everything that influences outputs (not the output dir)."""
        d = self.to_dict()
        d.pop("output")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()

    def with_overrides(self, **seq: Any) -> "ExperimentConfig":
        return replace(self, sequence=replace(self.sequence, **seq))


def _reject_unknown(values: dict, names: set[str], where: str) -> None:
    for k in values:
        if k not in names:
            raise ConfigError(f"{where}: unknown key {k!r}")


def _fmt(v: Any) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _coerce(typ: type, name: str, value: Any, where: str) -> Any:
    default = next(f.default for f in fields(typ) if f.name == name)
    if not isinstance(value, str):
        return value
    s = value.strip()
    try:
        if (typ is AnalysisOptions and name == "window_us") or default is None:
            return None if s == "" else float(s)
        if isinstance(default, bool):
            if s.lower() in _TRUE:
                return True
            if s.lower() in _FALSE:
                return False
            raise ValueError(f"not a boolean: {s!r}")
        if isinstance(default, int):
            return int(s)
        if isinstance(default, float):
            return float(s)
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from None
    return s
