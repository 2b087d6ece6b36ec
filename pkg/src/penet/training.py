"""Training loop, evaluation protocol and grouped error reports.

Batches always contain equal-length sequences (length bucketing); every
piece of randomness (validation split, weight init, epoch shuffles) is
derived from the single TrainConfig seed, so a (dataset, config) pair fully
determines the trained weights at a fixed thread count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .autodiff import GradTape, Tensor, concat_batch, weighted_l1_loss, zero_grads
from .dataset import DatasetRecord, generate_dataset, read_dataset
from .model import PEnetConfig, PEnetModel, stack_batch
from .optim import AdamState, adam_step, clip_global_norm
from .rng import SeededRng, mix64
from .sde import SdeFamily, X0Policy


class ConfigError(ValueError):
    """Dataset and training configuration disagree."""


class ReportError(ValueError):
    """A requested report group matched no records."""


@dataclass(frozen=True)
class TrainConfig:
    dataset: str
    model: PEnetConfig
    batch_size: int = 64
    max_epochs: int = 60
    lr: float = 0.001
    clip_norm: float | None = 5.0
    val_fraction: float = 0.05
    patience: int = 8
    seed: int = 0
    # length groups drawn per optimizer step; >1 keeps the batch-norm batch
    # statistics representative of the whole length distribution
    buckets_per_batch: int = 2

    def __post_init__(self):
        if self.batch_size < 2:
            raise ValueError("batch_size must be >= 2 (batch normalization)")
        if not 0.0 < self.val_fraction <= 0.5:
            raise ValueError("val_fraction must lie in (0, 0.5]")
        if self.max_epochs < 1 or self.patience < 0:
            raise ValueError("max_epochs must be >= 1 and patience >= 0")
        if self.buckets_per_batch < 1:
            raise ValueError("buckets_per_batch must be >= 1")


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    val_loss: float


@dataclass
class TrainingLog:
    epochs: list[EpochStats] = field(default_factory=list)
    best_epoch: int = -1
    best_val_loss: float = math.inf
    stopped_early: bool = False


def _bucket_by_length(indices, records) -> dict[int, list[int]]:
    buckets: dict[int, list[int]] = {}
    for i in indices:
        buckets.setdefault(records[i].trajectory.n, []).append(i)
    return buckets


def _batches(buckets: dict[int, list[int]], batch_size: int,
             gen: np.random.Generator | None, min_size: int = 1) -> list[list[int]]:
    """Equal-length batches; a trailing singleton merges into its neighbor.

    ``min_size=2`` drops batches an unmergeable singleton bucket would
    produce (batch normalization cannot train on them).
    """
    batches = []
    for length in sorted(buckets):
        order = list(buckets[length])
        if gen is not None:
            order = [order[j] for j in gen.permutation(len(order))]
        chunks = [order[i:i + batch_size] for i in range(0, len(order), batch_size)]
        if len(chunks) > 1 and len(chunks[-1]) == 1:
            chunks[-2].extend(chunks.pop())
        batches.extend(chunk for chunk in chunks if len(chunk) >= min_size)
    if gen is not None:
        batches = [batches[j] for j in gen.permutation(len(batches))]
    return batches


def _composite_batches(buckets: dict[int, list[int]], batch_size: int,
                       buckets_per_batch: int, gen: np.random.Generator) -> list[list[list[int]]]:
    """Training steps drawing ``buckets_per_batch`` equal-length groups each."""
    group_size = max(2, batch_size // buckets_per_batch)
    groups = _batches(buckets, group_size, gen)
    steps = [groups[i:i + buckets_per_batch] for i in range(0, len(groups), buckets_per_batch)]
    return [step for step in steps if sum(len(g) for g in step) >= 2]


def _batch_arrays(records, indices):
    x = stack_batch([records[i].trajectory.values for i in indices])
    h = np.array([records[i].trajectory.h for i in indices])
    targets = np.stack([records[i].theta.as_array() for i in indices])
    return x, h, targets


def _dataset_loss(model: PEnetModel, records, indices, batch_size: int, weights) -> float:
    """Mean per-record weighted L1 over a fixed (unshuffled) batching."""
    total = 0.0
    for batch in _batches(_bucket_by_length(indices, records), batch_size, None):
        x, h, targets = _batch_arrays(records, batch)
        pred = model.forward(x, h, training=False)
        total += float((np.abs(pred.data - targets) * np.asarray(weights)).sum())
    return total / len(indices)


def train(
    config: TrainConfig,
    records: list[DatasetRecord] | None = None,
    family: SdeFamily | None = None,
    log_fn=None,
) -> tuple[PEnetModel, AdamState, TrainingLog]:
    """Train to the best-validation checkpoint with early stopping."""
    if records is None:
        family, records = read_dataset(config.dataset)
    if family is not None and family.n_params != config.model.n_outputs:
        raise ConfigError(
            f"dataset family has {family.n_params} parameters but the model"
            f" is configured for {config.model.n_outputs}"
        )
    if len(records) < 4:
        raise ConfigError(f"need at least 4 records to train, got {len(records)}")

    root = SeededRng(config.seed)
    perm = root.derive(0).generator.permutation(len(records))
    n_val = max(1, int(round(config.val_fraction * len(records))))
    val_idx = [int(i) for i in perm[:n_val]]
    train_idx = [int(i) for i in perm[n_val:]]
    train_buckets = _bucket_by_length(train_idx, records)

    model = PEnetModel(config.model, seed=root.derive(1).seed)
    params = model.parameters()
    adam = AdamState.for_params(params, lr=config.lr)
    weights = np.asarray(config.model.target_weights)
    log = TrainingLog()
    best_state: dict | None = None

    width = config.model.fc_width
    for epoch in range(config.max_epochs):
        model.train()
        shuffle_gen = root.derive(2 + epoch).generator
        epoch_loss = 0.0
        n_seen = 0
        stat_weight = 0
        stat_mean = np.zeros(width)
        stat_sq = np.zeros(width)
        for step in _composite_batches(train_buckets, config.batch_size,
                                       config.buckets_per_batch, shuffle_gen):
            batch = [i for group in step for i in group]
            arrays = [_batch_arrays(records, group) for group in step]
            targets = np.concatenate([a[2] for a in arrays])
            with GradTape() as tape:
                parts = [model.encode(x, h) for x, h, _ in arrays]
                z = parts[0] if len(parts) == 1 else concat_batch(parts)
                pred = model.head(z, training=True)
                loss = weighted_l1_loss(pred, Tensor(targets), weights)
                loss_value = loss.item()
                if not math.isfinite(loss_value):
                    seeds = [records[i].seed for i in batch]
                    raise RuntimeError(f"non-finite loss; batch record seeds: {seeds}")
                tape.backward(loss)
            if config.clip_norm is not None:
                clip_global_norm(params, config.clip_norm)
            adam_step(adam, params)
            zero_grads(params)
            epoch_loss += loss_value * len(batch)
            n_seen += len(batch)
            bn = model.bn_state
            stat_weight += bn.last_batch_size
            stat_mean += bn.last_batch_size * bn.last_batch_mean
            stat_sq += bn.last_batch_size * (bn.last_batch_var + bn.last_batch_mean ** 2)
        # precise inference statistics: equal-length batches make the momentum
        # average unrepresentative, so store the epoch-level aggregate instead
        if stat_weight > 0:
            epoch_mean = stat_mean / stat_weight
            model.bn_state.mean[:] = epoch_mean
            model.bn_state.var[:] = stat_sq / stat_weight - epoch_mean ** 2
        model.eval()
        val_loss = _dataset_loss(model, records, val_idx, config.batch_size, weights)
        stats = EpochStats(epoch, epoch_loss / n_seen, val_loss)
        log.epochs.append(stats)
        if log_fn is not None:
            log_fn(stats)
        if val_loss < log.best_val_loss:
            log.best_val_loss = val_loss
            log.best_epoch = epoch
            best_state = {
                "params": [p.data.copy() for p in params],
                "bn_mean": model.bn_state.mean.copy(),
                "bn_var": model.bn_state.var.copy(),
                "adam_m": [m.copy() for m in adam.m],
                "adam_v": [v.copy() for v in adam.v],
                "adam_step": adam.step,
            }
        elif epoch - log.best_epoch >= config.patience:
            log.stopped_early = True
            break

    if best_state is not None:
        for p, data in zip(params, best_state["params"]):
            p.data = data
        model.bn_state.mean[:] = best_state["bn_mean"]
        model.bn_state.var[:] = best_state["bn_var"]
        adam.m = best_state["adam_m"]
        adam.v = best_state["adam_v"]
        adam.step = best_state["adam_step"]
    model.eval()
    return model, adam, log


# ---------------------------------------------------------------------------
# evaluation


@dataclass(frozen=True)
class GroupSpec:
    """A report group: records whose named parameters equal the fixed values."""

    name: str
    fixed: dict

    def matches(self, theta_map: dict) -> bool:
        return all(theta_map.get(key) == value for key, value in self.fixed.items())


@dataclass
class GroupStats:
    name: str
    fixed: dict
    count: int
    stats: dict  # parameter -> {"mean", "sd", "mae"}


@dataclass
class EstimationReport:
    param_names: tuple[str, ...]
    groups: list[GroupStats]
    scatter: list[tuple]  # (group, parameter, truth, estimate)


def _column_stats(truth: np.ndarray, estimate: np.ndarray) -> dict:
    sd = float(estimate.std(ddof=1)) if estimate.shape[0] > 1 else 0.0
    return {
        "mean": float(estimate.mean()),
        "sd": sd,
        "mae": float(np.abs(estimate - truth).mean()),
    }


def build_report(
    param_names,
    truths: np.ndarray,
    estimates: np.ndarray,
    groups: list[GroupSpec] | None = None,
    collect_scatter: bool = True,
) -> EstimationReport:
    """Grouped Mean/SD/MAE of estimates against per-record truths."""
    param_names = tuple(param_names)
    truths = np.asarray(truths, dtype=np.float64)
    estimates = np.asarray(estimates, dtype=np.float64)
    if truths.shape != estimates.shape or truths.ndim != 2:
        raise ValueError(f"truths {truths.shape} and estimates {estimates.shape} must match")
    if truths.shape[1] != len(param_names):
        raise ValueError("parameter names do not match the value columns")
    specs = [GroupSpec("all", {})] + list(groups or [])
    out_groups = []
    scatter: list[tuple] = []
    for spec in specs:
        mask = np.ones(truths.shape[0], dtype=bool)
        for key, value in spec.fixed.items():
            column = param_names.index(key)
            mask &= truths[:, column] == value
        count = int(mask.sum())
        if count == 0:
            raise ReportError(f"group {spec.name!r} matched no records")
        stats = {
            name: _column_stats(truths[mask, j], estimates[mask, j])
            for j, name in enumerate(param_names)
        }
        out_groups.append(GroupStats(spec.name, dict(spec.fixed), count, stats))
        if collect_scatter and spec.fixed:
            for j, name in enumerate(param_names):
                scatter.extend(
                    (spec.name, name, float(t), float(e))
                    for t, e in zip(truths[mask, j], estimates[mask, j])
                )
    if collect_scatter and not (groups or []):
        for j, name in enumerate(param_names):
            scatter.extend(
                ("all", name, float(t), float(e))
                for t, e in zip(truths[:, j], estimates[:, j])
            )
    return EstimationReport(param_names, out_groups, scatter)


def evaluate(
    model: PEnetModel,
    family: SdeFamily,
    records: list[DatasetRecord],
    groups: list[GroupSpec] | None = None,
) -> EstimationReport:
    """Grouped Mean/SD/MAE of model estimates over a test set."""
    if not records:
        raise ReportError("empty test set")
    estimates = model.predict(
        [r.trajectory.values for r in records],
        [r.trajectory.h for r in records],
    )
    truths = np.stack([r.theta.as_array() for r in records])
    return build_report(family.param_names, truths, estimates, groups)


def generate_grouped_testset(
    master_seed: int,
    family: SdeFamily,
    groups: list[dict],
    per_group: int,
    x0_policy: X0Policy = X0Policy(),
    workers: int = 1,
) -> tuple[list[DatasetRecord], list[GroupSpec]]:
    """Fixed-parameter groups with (N, T) and free parameters randomized."""
    records: list[DatasetRecord] = []
    specs: list[GroupSpec] = []
    for g, fixed in enumerate(groups):
        sub_family = family.replace_ranges(**fixed)
        sub_records, _ = generate_dataset(
            mix64(master_seed, g), sub_family, per_group, x0_policy, workers
        )
        records.extend(sub_records)
        name = ",".join(f"{k}={v:g}" for k, v in sorted(fixed.items()))
        specs.append(GroupSpec(name or f"group{g}", dict(fixed)))
    return records, specs


# ---------------------------------------------------------------------------
# report serialization


def report_json_lines(report: EstimationReport) -> list[dict]:
    lines = []
    for group in report.groups:
        for name in report.param_names:
            entry = {
                "group": group.name,
                "parameter": name,
                "count": group.count,
                "truth": group.fixed.get(name),
                "mean": group.stats[name]["mean"],
                "sd": group.stats[name]["sd"],
                "mae": group.stats[name]["mae"],
            }
            lines.append(entry)
    return lines


def report_table(report: EstimationReport) -> str:
    header = f"{'group':<24} {'parameter':<10} {'count':>6} {'mean':>12} {'sd':>12} {'mae':>12}"
    rows = [header, "-" * len(header)]
    for group in report.groups:
        for name in report.param_names:
            s = group.stats[name]
            rows.append(
                f"{group.name:<24} {name:<10} {group.count:>6}"
                f" {s['mean']:>12.6g} {s['sd']:>12.6g} {s['mae']:>12.6g}"
            )
    return "\n".join(rows)
