"""
Binary record dumps.

Layout::

    8 bytes   magic  b"RASEDUMP"
    4 bytes   format version   (uint32, little-endian)
    4 bytes   header length H  (uint32, little-endian)
    H bytes   UTF-8 JSON header (sorted keys): format version, package
              version, sequence and noise config echo, n_shots, n_samples
    n_shots x block:
        int64   shot_id
        int64   background flag (0/1)
        float64 truth interferometer phase (rad)
        float64 x n_samples*2   trace, interleaved real/imag

All numbers are little-endian. The header contains no timestamps, so a dump is
a pure function of its configuration.
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict
from pathlib import Path
from typing import Any, Iterable, Iterator

import numpy as np

from rasesim import __version__
from rasesim.errors import DataFormatError, FormatVersionError
from rasesim.synth import NoiseModel, SequenceConfig, ShotRecord, ShotTruth

MAGIC = b"RASEDUMP"
FORMAT_VERSION = 1


def block_dtype(n_samples: int) -> np.dtype:
    return np.dtype(
        [("shot_id", "<i8"), ("background", "<i8"), ("phase", "<f8"), ("trace", "<f8", (2 * n_samples,))]
    )


def make_header(cfg: SequenceConfig, noise: NoiseModel, n_samples: int, n_shots: int) -> dict[str, Any]:
    return {
        "format_version": FORMAT_VERSION,
        "package_version": __version__,
        "sequence": asdict(cfg),
        "noise": asdict(noise),
        "n_shots": n_shots,
        "n_samples": n_samples,
    }


def write_dump(path: str | Path, cfg: SequenceConfig, noise: NoiseModel, records: Iterable[ShotRecord]) -> int:
    """Write ``records`` to ``path``; returns the number of shots written."""
    records = list(records)
    if not records:
        raise DataFormatError("refusing to write an empty dump")
    n_samples = len(records[0].trace)
    header = json.dumps(make_header(cfg, noise, n_samples, len(records)), sort_keys=True).encode()
    blocks = np.zeros(len(records), dtype=block_dtype(n_samples))
    for i, rec in enumerate(records):
        if len(rec.trace) != n_samples:
            raise DataFormatError("records of different lengths cannot share a dump")
        blocks[i]["shot_id"] = rec.shot_id
        blocks[i]["background"] = int(rec.background)
        blocks[i]["phase"] = rec.truth.interferometer_phase_rad
        blocks[i]["trace"] = rec.trace.view(np.float64)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", FORMAT_VERSION, len(header)))
        fh.write(header)
        fh.write(blocks.tobytes())
    return len(records)


def read_header(path: str | Path) -> tuple[dict[str, Any], int]:
    """Return ``(header, data_offset)``."""
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != MAGIC:
            raise DataFormatError(f"{path}: not a record dump (bad magic)")
        raw = fh.read(8)
        if len(raw) != 8:
            raise DataFormatError(f"{path}: truncated header")
        version, hlen = struct.unpack("<II", raw)
        if version != FORMAT_VERSION:
            raise FormatVersionError(
                f"{path}: dump format version {version} is not supported (expected "
                f"{FORMAT_VERSION}); regenerate it with `simulate` from the same config"
            )
        try:
            header = json.loads(fh.read(hlen).decode())
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise DataFormatError(f"{path}: corrupt header: {exc}") from exc
    return header, 16 + hlen


def configs_from_header(header: dict[str, Any]) -> tuple[SequenceConfig, NoiseModel]:
    return SequenceConfig(**header["sequence"]), NoiseModel(**header["noise"])


def read_dump(path: str | Path) -> tuple[dict[str, Any], Iterator[ShotRecord]]:
    header, offset = read_header(path)
    n_samples, n_shots = int(header["n_samples"]), int(header["n_shots"])
    dt = block_dtype(n_samples)
    blocks = np.fromfile(path, dtype=dt, offset=offset)
    if len(blocks) != n_shots:
        raise DataFormatError(f"{path}: expected {n_shots} shots, found {len(blocks)}")
    fs = float(header["sequence"]["sample_rate_hz"])
    seed = int(header["sequence"]["rng_seed"])

    def it() -> Iterator[ShotRecord]:
        for b in blocks:
            trace = np.ascontiguousarray(b["trace"]).view(np.complex128).copy()
            yield ShotRecord(
                shot_id=int(b["shot_id"]),
                trace=trace,
                sample_rate_hz=fs,
                background=bool(b["background"]),
                truth=ShotTruth(float(b["phase"]), (seed, int(b["shot_id"]))),
            )

    return header, it()
