"""Batch execution: deterministic streams, settings sweeps, aggregation.

Every round's randomness comes from a counter-style stream keyed by
(seed, setting index, chunk index), with the round's offset inside its
chunk fixed by the layout constant CHUNK.  A worker that is handed chunk k
of setting i regenerates exactly those rows no matter which thread it runs
on or how many peers it has, and per-setting aggregation happens on exact
integer sums, so the report is a pure function of the config.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .geometry import (
    Completion,
    CompletionStrategy,
    as_unit_vector,
    sample_unit_sphere,
)
from .protocols import (
    PROTOCOL_IDS,
    UNIFORMS_PER_ROUND,
    RoundRandomness,
    run_batch,
)
from .quantum import EntanglementParam, JointDist, _joint_from_moments, joint_nl, joint_qm
from .verify import (
    BranchStat,
    ComparisonReport,
    SettingComparison,
    compare,
    estimate_joint_from_counts,
    report_csv_rows,
    report_to_json_dict,
    sign_mean_estimate,
)

__all__ = [
    "CHUNK",
    "ChunkStats",
    "ExperimentConfig",
    "load_settings_csv",
    "resolve_settings",
    "round_uniform_block",
    "run_experiment",
    "write_report",
]

# Rows per derived stream key.  Part of the stream layout: changing it
# changes which uniforms a given round sees, so it is fixed, not tunable.
CHUNK = 65536

SETTINGS_CSV_HEADER = ["ax", "ay", "az", "bx", "by", "bz"]


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything that determines a run.  Frozen: reports echo it verbatim.

    Exactly one settings source must be given: an explicit tuple of
    (a, b) pairs, or random_settings > 0 for a seeded draw.  workers only
    changes how the work is scheduled, never what is computed, so it is
    deliberately absent from the report echo.
    """

    protocol: str
    gamma: float
    rounds: int
    seed: int
    completion: str = Completion.NORMALIZE.value
    settings: tuple = ()
    random_settings: int = 0
    workers: int = 1
    out_path: str | None = None
    csv_path: str | None = None

    def __post_init__(self) -> None:
        if self.protocol not in PROTOCOL_IDS:
            raise ValueError(f"unknown protocol {self.protocol!r}")
        if self.rounds < 1:
            raise ValueError(f"rounds must be >= 1, got {self.rounds}")
        if not 0 <= self.seed < 2**64:
            raise ValueError(f"seed must fit in 64 bits, got {self.seed}")
        EntanglementParam(self.gamma)
        if self.protocol == "p2" and self.gamma <= 0.0:
            raise ValueError("protocol 2 requires gamma > 0")
        Completion(self.completion)
        if self.random_settings < 0:
            raise ValueError(f"random_settings must be >= 0, got {self.random_settings}")
        if (len(self.settings) > 0) == (self.random_settings > 0):
            raise ValueError("provide exactly one of explicit settings or random_settings")
        if self.workers < 1:
            raise ValueError(f"workers must be >= 1, got {self.workers}")
        frozen = tuple(
            (tuple(float(x) for x in a), tuple(float(x) for x in b))
            for a, b in self.settings
        )
        object.__setattr__(self, "settings", frozen)

    @property
    def settings_source(self) -> str:
        if self.random_settings:
            return f"random:{self.random_settings}"
        return f"explicit:{len(self.settings)}"

    def param(self) -> EntanglementParam:
        return EntanglementParam(self.gamma)

    def strategy(self) -> CompletionStrategy:
        return CompletionStrategy(Completion(self.completion))


def _chunk_key(seed: int, setting_index: int, chunk_index: int) -> np.ndarray:
    """128-bit stream key, unique per (seed, setting, chunk).

    The settings draw uses the bare seed (high word 0); setting_index + 1
    keeps every round-stream key's high word nonzero, so the two can never
    collide.
    """
    if not 0 <= setting_index < 2**32 - 1:
        raise ValueError(f"setting_index out of range: {setting_index}")
    if not 0 <= chunk_index < 2**32:
        raise ValueError(f"chunk_index out of range: {chunk_index}")
    hi = ((setting_index + 1) << 32) | chunk_index
    return np.array([seed, hi], dtype=np.uint64)


def round_uniform_block(seed: int, setting_index: int, start: int, count: int) -> np.ndarray:
    """Uniform rows for rounds [start, start + count) of one setting.

    Rows are addressed by absolute round index; any contiguous request
    returns the same values regardless of how other rounds were or will be
    generated.  Requests not aligned to the chunk layout pay for the
    skipped prefix rows.
    """
    if start < 0 or count < 0:
        raise ValueError("start and count must be nonnegative")
    out = np.empty((count, UNIFORMS_PER_ROUND))
    filled = 0
    while filled < count:
        chunk_index, offset = divmod(start + filled, CHUNK)
        take = min(CHUNK - offset, count - filled)
        g = np.random.Generator(np.random.Philox(key=_chunk_key(seed, setting_index, chunk_index)))
        block = g.random((offset + take, UNIFORMS_PER_ROUND))
        out[filled : filled + take] = block[offset:]
        filled += take
    return out


def resolve_settings(config: ExperimentConfig) -> tuple:
    """Materialize the settings list as unit-vector pairs."""
    if config.random_settings:
        g = np.random.Generator(np.random.Philox(key=np.uint64(config.seed)))
        return tuple(
            (sample_unit_sphere(g), sample_unit_sphere(g))
            for _ in range(config.random_settings)
        )
    return tuple(
        (as_unit_vector(np.array(a)), as_unit_vector(np.array(b)))
        for a, b in config.settings
    )


def load_settings_csv(path) -> tuple:
    """Read settings pairs; normalizes rows, warning past 1e-6 deviation."""
    pairs = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != SETTINGS_CSV_HEADER:
            raise ValueError(
                f"settings CSV must start with header {','.join(SETTINGS_CSV_HEADER)}, "
                f"got {header!r}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 6:
                raise ValueError(f"settings CSV line {lineno}: expected 6 fields, got {len(row)}")
            vals = [float(x) for x in row]
            vecs = []
            for name, v in (("a", np.array(vals[:3])), ("b", np.array(vals[3:]))):
                norm = float(np.linalg.norm(v))
                if not math.isfinite(norm) or norm <= 0.0:
                    raise ValueError(f"settings CSV line {lineno}: {name} is not a direction")
                if abs(norm - 1.0) > 1e-6:
                    warnings.warn(
                        f"settings CSV line {lineno}: |{name}| deviates from 1 "
                        f"by {abs(norm - 1.0):.2e}; normalizing"
                    )
                vecs.append(v / norm)
            pairs.append((vecs[0], vecs[1]))
    if not pairs:
        raise ValueError("settings CSV contains no setting rows")
    return tuple(pairs)


@dataclass
class ChunkStats:
    """Exact integer aggregates of a batch; merging is order-independent."""

    n: int = 0
    counts: np.ndarray = field(default_factory=lambda: np.zeros(4, dtype=np.int64))
    alpha0_sum: int = 0
    beta0_sum: int = 0
    branch: dict = field(default_factory=dict)
    budget_bad: int = 0

    def add(self, other: "ChunkStats") -> "ChunkStats":
        self.n += other.n
        self.counts += other.counts
        self.alpha0_sum += other.alpha0_sum
        self.beta0_sum += other.beta0_sum
        for key, (bn, bsum) in other.branch.items():
            acc = self.branch.setdefault(key, [0, 0])
            acc[0] += bn
            acc[1] += bsum
        self.budget_bad += other.budget_bad
        return self


def _stats_from_batch(out, expected: tuple[int, int, int]) -> ChunkStats:
    idx = (out.alpha < 0).astype(np.int64) * 2 + (out.beta < 0)
    stats = ChunkStats(
        n=out.n,
        counts=np.bincount(idx, minlength=4).astype(np.int64),
        alpha0_sum=int(out.alpha0.sum(dtype=np.int64)),
        beta0_sum=int(out.beta0.sum(dtype=np.int64)),
    )
    prod = out.alpha0.astype(np.int64) * out.beta0
    for pv in (1, -1):
        for qv in (1, -1):
            mask = (out.p == pv) & (out.q == qv)
            hits = int(np.count_nonzero(mask))
            if hits:
                stats.branch[(pv, qv)] = [hits, int(prod[mask].sum())]
    ok = (
        (out.cbits_a_to_b == expected[0])
        & (out.cbits_b_to_a == expected[1])
        & (out.mbox_calls == expected[2])
    )
    stats.budget_bad = int(out.n - np.count_nonzero(ok))
    return stats


def _target_joint(param: EntanglementParam, a, b, protocol: str) -> JointDist:
    if protocol == "p1":
        return joint_qm(param, a, b)
    if protocol == "p2":
        return joint_nl(param, a, b)
    # Kernel rounds reproduce zero marginals with correlation a.b.
    return _joint_from_moments(0.0, 0.0, float(np.asarray(a) @ np.asarray(b)))


def run_experiment(config: ExperimentConfig) -> ComparisonReport:
    """Run every (setting, round) cell and aggregate per setting.

    The work is split into fixed chunks whose randomness is addressed by
    (seed, setting, chunk); merging uses integer sums only, so worker count
    and completion order cannot change any reported value.
    """
    param = config.param()
    strategy = config.strategy()
    settings = resolve_settings(config)
    expected = (1, 0, 0) if config.protocol == "tb" else (1, 0, 1)

    tasks = []
    for si, (a, b) in enumerate(settings):
        for start in range(0, config.rounds, CHUNK):
            tasks.append((si, a, b, start, min(CHUNK, config.rounds - start)))

    def run_task(task):
        si, a, b, start, m = task
        rr = RoundRandomness.from_uniform_block(
            round_uniform_block(config.seed, si, start, m)
        )
        out = run_batch(param, a, b, rr, strategy, config.protocol)
        return si, _stats_from_batch(out, expected)

    agg = [ChunkStats() for _ in settings]
    if config.workers == 1:
        for task in tasks:
            si, stats = run_task(task)
            agg[si].add(stats)
    else:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            for si, stats in pool.map(run_task, tasks):
                agg[si].add(stats)

    records = []
    for si, (a, b) in enumerate(settings):
        stats = agg[si]
        est = estimate_joint_from_counts(stats.counts.tolist())
        row = compare(_target_joint(param, a, b, config.protocol), est)
        if stats.n >= 2:
            alpha0 = sign_mean_estimate(stats.alpha0_sum, stats.n)
            beta0 = sign_mean_estimate(stats.beta0_sum, stats.n)
        else:
            alpha0 = None
            beta0 = None
        branches = []
        for (pv, qv), (bn, bsum) in sorted(stats.branch.items()):
            mean = bsum / bn
            stderr = math.sqrt(max(0.0, 1.0 - mean * mean) / (bn - 1)) if bn > 1 else 0.0
            branches.append(BranchStat(p=pv, q=qv, n=bn, corr_mean=mean, corr_stderr=stderr))
        records.append(
            SettingComparison(
                a=tuple(float(x) for x in a),
                b=tuple(float(x) for x in b),
                row=row,
                alpha0=alpha0,
                beta0=beta0,
                branches=tuple(branches),
                budget_violations=stats.budget_bad,
            )
        )

    return ComparisonReport(
        protocol=config.protocol,
        gamma=config.gamma,
        completion=config.completion,
        seed=config.seed,
        rounds=config.rounds,
        settings_source=config.settings_source,
        records=tuple(records),
    )


def write_report(report: ComparisonReport, out_path, csv_path=None) -> dict:
    """Serialize the report to JSON (and optionally CSV); returns the dict.

    json.dumps with sorted keys and repr floats keeps the bytes a pure
    function of the report content.
    """
    payload = report_to_json_dict(report)
    text = json.dumps(payload, sort_keys=True, indent=2) + "\n"
    with open(out_path, "w") as fh:
        fh.write(text)
    if csv_path is not None:
        header, rows = report_csv_rows(report)
        with open(csv_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            writer.writerows(rows)
    return payload
