"""Labeled dataset generation and the LSDE binary container format.

A dataset is a sequence of (trajectory, theta, seed) records generated from
an :class:`~penet.sde.SdeFamily`.  Record i is a pure function of
(master_seed, i, family, x0 policy): its stream seed is ``mix64(master_seed,
i)``, so records can be produced serially or by any number of workers with
byte-identical results, and any record can be regenerated from the seed
stored next to it.

File layout (little-endian), magic ``LSDE``:

    magic ``LSDE`` | version u32 | noise tag u8 | range count u8 |
    ranges (f64 lo, f64 hi) x count, order eta, epsilon, [alpha|nu], T, N |
    record count u64
    per record: seed u64 | N u32 | h f64 | x0 f64 | M u32 | theta f64 x M |
    values f32 x N
"""

from __future__ import annotations

import struct
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .noise import ALPHA_STABLE, GAUSSIAN, STUDENT_LEVY
from .rng import SeededRng, mix64
from .sde import (
    ParamVector,
    SdeFamily,
    SimulationDiverged,
    Trajectory,
    X0Policy,
    sample_parameters,
    simulate_ou,
)

MAGIC = b"LSDE"
FORMAT_VERSION = 1

_TAG_CODES = {GAUSSIAN: 0, ALPHA_STABLE: 1, STUDENT_LEVY: 2}
_TAG_NAMES = {code: tag for tag, code in _TAG_CODES.items()}


@dataclass(frozen=True)
class DatasetRecord:
    """One training/test triple (x, h, theta) plus its provenance seed."""

    trajectory: Trajectory
    theta: ParamVector
    seed: int


@dataclass(frozen=True)
class GenerationSummary:
    """Outcome bookkeeping for one generate_dataset call."""

    count: int
    resampled: tuple[int, ...] = ()
    failed: tuple[int, ...] = ()


def build_record(
    family: SdeFamily,
    record_seed: int,
    x0_policy: X0Policy = X0Policy(),
) -> tuple[DatasetRecord, bool]:
    """Build the record owned by ``record_seed``; returns (record, resampled).

    A diverged path is resampled once from a sibling stream; a second
    divergence propagates.
    """
    rng = SeededRng(record_seed)
    theta, n, h = sample_parameters(rng.derive(0), family)
    x0 = x0_policy.draw(rng.derive(1))
    kind = family.noise_kind(theta)
    try:
        trajectory = simulate_ou(rng.derive(2), theta, kind, n, h, x0)
        resampled = False
    except SimulationDiverged:
        trajectory = simulate_ou(rng.derive(3), theta, kind, n, h, x0)
        resampled = True
    return DatasetRecord(trajectory, theta, record_seed), resampled


def _build_range(args) -> list[tuple[int, DatasetRecord | None, bool]]:
    family, master_seed, lo, hi, x0_policy = args
    out = []
    for i in range(lo, hi):
        seed = mix64(master_seed, i)
        try:
            record, resampled = build_record(family, seed, x0_policy)
            out.append((i, record, resampled))
        except SimulationDiverged:
            out.append((i, None, True))
    return out


def generate_dataset(
    master_seed: int,
    family: SdeFamily,
    count: int,
    x0_policy: X0Policy = X0Policy(),
    workers: int = 1,
) -> tuple[list[DatasetRecord], GenerationSummary]:
    """Generate ``count`` independent records, ordered by index.

    Raises :class:`SimulationDiverged` after all records were attempted if
    any record failed twice; the summary of the completed run is attached
    to the exception as ``summary``.
    """
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    if workers < 1:
        raise ValueError(f"workers must be >= 1, got {workers}")
    chunks = [(family, master_seed, lo, min(lo + 512, count), x0_policy) for lo in range(0, count, 512)]
    if workers == 1 or count <= 512:
        results = [_build_range(chunk) for chunk in chunks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_build_range, chunks))
    records: list[DatasetRecord | None] = [None] * count
    resampled = []
    failed = []
    for chunk_result in results:
        for i, record, was_resampled in chunk_result:
            records[i] = record
            if record is None:
                failed.append(i)
            elif was_resampled:
                resampled.append(i)
    summary = GenerationSummary(count, tuple(resampled), tuple(failed))
    if failed:
        err = SimulationDiverged(failed[0], f"records {failed} diverged twice")
        err.summary = summary
        raise err
    return records, summary  # type: ignore[return-value]


def _family_ranges(family: SdeFamily) -> list[tuple[float, float]]:
    ranges = [family.eta_range, family.epsilon_range]
    if family.noise_param_range is not None:
        ranges.append(family.noise_param_range)
    ranges.append(family.t_range)
    ranges.append((float(family.n_range[0]), float(family.n_range[1])))
    return ranges


def write_dataset(path, family: SdeFamily, records: list[DatasetRecord]) -> None:
    ranges = _family_ranges(family)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IBB", FORMAT_VERSION, _TAG_CODES[family.noise_tag], len(ranges)))
        for lo, hi in ranges:
            fh.write(struct.pack("<dd", lo, hi))
        fh.write(struct.pack("<Q", len(records)))
        for record in records:
            theta = record.theta.as_array()
            traj = record.trajectory
            fh.write(struct.pack("<QIddI", record.seed, traj.n, traj.h, traj.x0, theta.shape[0]))
            fh.write(theta.astype("<f8").tobytes())
            fh.write(traj.values.astype("<f4").tobytes())


def _read_header(fh) -> tuple[SdeFamily, int]:
    magic = fh.read(4)
    if magic != MAGIC:
        raise ValueError(f"not a dataset file: bad magic {magic!r}")
    version, tag_code, n_ranges = struct.unpack("<IBB", fh.read(6))
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported dataset format version {version}")
    if tag_code not in _TAG_NAMES:
        raise ValueError(f"unknown noise tag code {tag_code}")
    tag = _TAG_NAMES[tag_code]
    expected = 4 if tag == GAUSSIAN else 5
    if n_ranges != expected:
        raise ValueError(f"expected {expected} ranges for {tag}, file has {n_ranges}")
    ranges = [struct.unpack("<dd", fh.read(16)) for _ in range(n_ranges)]
    noise_range = None
    if tag == GAUSSIAN:
        eta, epsilon, t, n = ranges
    else:
        eta, epsilon, noise_range, t, n = ranges
    family = SdeFamily(tag, eta, epsilon, t, (int(n[0]), int(n[1])), noise_range)
    (count,) = struct.unpack("<Q", fh.read(8))
    return family, count


def _read_record(fh) -> DatasetRecord:
    seed, n, h, x0, m = struct.unpack("<QIddI", fh.read(32))
    theta = np.frombuffer(fh.read(8 * m), dtype="<f8")
    values = np.frombuffer(fh.read(4 * n), dtype="<f4").astype(np.float64)
    noise_param = float(theta[2]) if m == 3 else None
    return DatasetRecord(
        Trajectory(values, h, x0),
        ParamVector(float(theta[0]), float(theta[1]), noise_param),
        seed,
    )


def read_dataset(path) -> tuple[SdeFamily, list[DatasetRecord]]:
    with open(path, "rb") as fh:
        family, count = _read_header(fh)
        records = [_read_record(fh) for _ in range(count)]
    return family, records


def inspect_dataset(path) -> list[dict]:
    """Header and per-field summary statistics, as JSON-ready dicts."""
    with open(path, "rb") as fh:
        family, count = _read_header(fh)
        names = family.param_names
        theta_stats = {name: [np.inf, 0.0, -np.inf] for name in names}
        n_min, n_max = np.inf, -np.inf
        h_min, h_max = np.inf, -np.inf
        x0_min, x0_max = np.inf, -np.inf
        for _ in range(count):
            record = _read_record(fh)
            for name, value in zip(names, record.theta.as_array()):
                stats = theta_stats[name]
                stats[0] = min(stats[0], value)
                stats[1] += value / count
                stats[2] = max(stats[2], value)
            n_min = min(n_min, record.trajectory.n)
            n_max = max(n_max, record.trajectory.n)
            h_min = min(h_min, record.trajectory.h)
            h_max = max(h_max, record.trajectory.h)
            x0_min = min(x0_min, record.trajectory.x0)
            x0_max = max(x0_max, record.trajectory.x0)
    header = {
        "type": "header",
        "format_version": FORMAT_VERSION,
        "noise": family.noise_tag,
        "records": count,
        "eta_range": list(family.eta_range),
        "epsilon_range": list(family.epsilon_range),
        "t_range": list(family.t_range),
        "n_range": [int(family.n_range[0]), int(family.n_range[1])],
    }
    if family.noise_param_range is not None:
        header["noise_param_range"] = list(family.noise_param_range)
    summary = {
        "type": "summary",
        "records": count,
        "n_min": int(n_min),
        "n_max": int(n_max),
        "h_min": h_min,
        "h_max": h_max,
        "x0_min": x0_min,
        "x0_max": x0_max,
    }
    for name in names:
        lo, mean, hi = theta_stats[name]
        summary[f"{name}_min"] = lo
        summary[f"{name}_mean"] = mean
        summary[f"{name}_max"] = hi
    return [header, summary]
