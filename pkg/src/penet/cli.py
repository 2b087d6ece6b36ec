"""Command-line surface.

Subcommands: generate, train, evaluate, estimate, baseline, bench,
``dataset inspect`` and ``model describe``.  Config and group files are
flat ``key = value`` text; reports are JSON lines plus an aligned text
table; scatter data is CSV.
"""

from __future__ import annotations

import argparse
import json
import sys
import time

import numpy as np

from .baselines import cqmle_fit, lse_drift, midpoint_predictor
from .dataset import generate_dataset, inspect_dataset, read_dataset, write_dataset
from .model import PEnetConfig, PEnetModel
from .noise import STUDENT_LEVY
from .rng import SeededRng
from .sde import FAMILY_BUILDERS, SdeFamily, Trajectory, X0Policy
from .training import (
    GroupSpec,
    TrainConfig,
    build_report,
    evaluate,
    report_json_lines,
    report_table,
    train,
)
from .validation import check_frequency, check_series


def parse_kv_file(path) -> dict[str, str]:
    """Flat ``key = value`` file; blank lines and # comments are ignored."""
    out: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key = value, got {raw!r}")
            key, value = line.split("=", 1)
            out[key.strip()] = value.strip()
    return out


def _parse_bool(value: str) -> bool:
    lowered = value.lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {value!r}")


def parse_groups_file(path) -> list[dict]:
    """Group definitions: lines ``groupN.param = value``."""
    raw = parse_kv_file(path)
    groups: dict[int, dict] = {}
    for key, value in raw.items():
        prefix, _, param = key.partition(".")
        if not prefix.startswith("group") or not param:
            raise ValueError(f"bad group key {key!r}; expected groupN.param")
        index = int(prefix[len("group"):])
        groups.setdefault(index, {})[param] = float(value)
    return [groups[i] for i in sorted(groups)]


def _family_from_args(args) -> SdeFamily:
    family = FAMILY_BUILDERS[args.family]()
    kwargs = {
        "noise_tag": family.noise_tag,
        "eta_range": tuple(args.eta_range) if args.eta_range else family.eta_range,
        "epsilon_range": tuple(args.epsilon_range) if args.epsilon_range else family.epsilon_range,
        "t_range": tuple(args.t_range) if args.t_range else family.t_range,
        "n_range": tuple(int(v) for v in args.n_range) if args.n_range else family.n_range,
        "noise_param_range": tuple(args.noise_range) if args.noise_range else family.noise_param_range,
    }
    family = SdeFamily(**kwargs)
    for spec in args.fix or []:
        key, _, value = spec.partition("=")
        if not value:
            raise ValueError(f"--fix expects name=value, got {spec!r}")
        family = family.replace_ranges(**{key.strip(): float(value)})
    return family


def _cmd_generate(args) -> int:
    family = _family_from_args(args)
    policy = X0Policy.fixed(args.x0) if args.x0 is not None else X0Policy()
    records, summary = generate_dataset(args.seed, family, args.count, policy, args.workers)
    write_dataset(args.out, family, records)
    print(json.dumps({
        "written": args.out,
        "records": summary.count,
        "resampled": list(summary.resampled),
    }, sort_keys=True))
    return 0


_TRAIN_KEYS = {
    "dataset": str, "out": str, "batch_size": int, "max_epochs": int,
    "lr": float, "clip_norm": float, "val_fraction": float, "patience": int,
    "seed": int, "use_cnn": _parse_bool, "standardize_input": _parse_bool,
}


def _cmd_train(args) -> int:
    raw = parse_kv_file(args.config)
    unknown = set(raw) - set(_TRAIN_KEYS)
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    cfg = {key: _TRAIN_KEYS[key](value) for key, value in raw.items()}
    if args.dataset:
        cfg["dataset"] = args.dataset
    if args.out:
        cfg["out"] = args.out
    if "dataset" not in cfg or "out" not in cfg:
        raise ValueError("config must provide dataset and out (or use --dataset/--out)")
    out_path = cfg.pop("out")
    family, records = read_dataset(cfg["dataset"])
    model_config = PEnetConfig.for_family(
        family,
        use_cnn=cfg.pop("use_cnn", True),
        standardize_input=cfg.pop("standardize_input", True),
    )
    config = TrainConfig(model=model_config, **cfg)

    def log_fn(stats):
        print(json.dumps({
            "epoch": stats.epoch,
            "train_loss": stats.train_loss,
            "val_loss": stats.val_loss,
        }, sort_keys=True), file=sys.stderr)

    model, adam, log = train(config, records, family, log_fn=log_fn)
    model.save(out_path, adam)
    print(json.dumps({
        "checkpoint": out_path,
        "best_epoch": log.best_epoch,
        "best_val_loss": log.best_val_loss,
        "epochs_run": len(log.epochs),
    }, sort_keys=True))
    return 0


def _load_groups(args) -> list[GroupSpec] | None:
    if not args.groups:
        return None
    specs = []
    for fixed in parse_groups_file(args.groups):
        name = ",".join(f"{k}={v:g}" for k, v in sorted(fixed.items()))
        specs.append(GroupSpec(name, fixed))
    return specs


def _write_report(report, out_path, scatter_path, table: bool = True) -> None:
    lines = [json.dumps(line, sort_keys=True) for line in report_json_lines(report)]
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")
    else:
        for line in lines:
            print(line)
    if table:
        print(report_table(report))
    if scatter_path:
        with open(scatter_path, "w", encoding="utf-8") as fh:
            fh.write("truth,estimate,parameter,group\n")
            for group, parameter, truth, estimate in report.scatter:
                fh.write(f"{truth!r},{estimate!r},{parameter},{group}\n")


def _cmd_evaluate(args) -> int:
    model, _ = PEnetModel.load(args.checkpoint)
    family = None
    records = []
    for path in args.test:
        file_family, file_records = read_dataset(path)
        if family is None:
            family = file_family
        elif family.noise_tag != file_family.noise_tag:
            raise ValueError("test files come from different families")
        records.extend(file_records)
    if family.n_params != model.config.n_outputs:
        raise ValueError(
            f"model estimates {model.config.n_outputs} parameters,"
            f" test family has {family.n_params}"
        )
    report = evaluate(model, family, records, _load_groups(args))
    _write_report(report, args.out, args.scatter)
    return 0


def _cmd_estimate(args) -> int:
    model, _ = PEnetModel.load(args.checkpoint)
    if args.values:
        values = np.array([float(v) for v in args.values.split(",")])
    elif args.input:
        values = np.loadtxt(args.input, ndmin=1)
    else:
        raise ValueError("provide --values or --input")
    values = check_series(values)
    h = check_frequency(args.h)
    estimates = model.predict([values], [h])[0]
    names = ("eta", "epsilon", "nu" if model.config.n_outputs == 3 else None)
    params = {"eta": estimates[0], "epsilon": estimates[1]}
    if model.config.n_outputs == 3:
        params["noise_param"] = estimates[2]
    print(json.dumps({
        "length": int(values.shape[0]),
        "condensed_length": model.config.condensed_length(values.shape[0]),
        "h": h,
        "estimates": params,
    }, sort_keys=True))
    return 0


def _cmd_baseline(args) -> int:
    family, records = read_dataset(args.dataset)
    truths = np.stack([r.theta.as_array() for r in records])
    per_record = []
    if args.estimator == "lse":
        names = ("eta",)
        estimates = np.empty((len(records), 1))
        for i, record in enumerate(records):
            estimates[i, 0] = lse_drift(record.trajectory)
            per_record.append({"index": i, "eta_hat": estimates[i, 0]})
        truth_cols = truths[:, :1]
    elif args.estimator == "cqmle":
        include_nu = family.noise_tag == STUDENT_LEVY
        names = ("eta", "epsilon", "nu") if include_nu else ("eta", "epsilon")
        estimates = np.empty((len(records), len(names)))
        for i, record in enumerate(records):
            result = cqmle_fit(record.trajectory)
            row = [result.eta_hat, result.epsilon_hat]
            if include_nu:
                row.append(result.nu_hat)
            estimates[i] = row
            per_record.append({
                "index": i,
                "eta_hat": result.eta_hat,
                "epsilon_hat": result.epsilon_hat,
                "nu_hat": result.nu_hat,
                "converged": result.converged,
                "boundary": result.boundary,
                "iterations": result.iterations,
            })
        truth_cols = truths[:, :len(names)]
    else:
        names = family.param_names
        midpoint = midpoint_predictor(family).as_array()
        estimates = np.tile(midpoint, (len(records), 1))
        per_record = [{"index": i, "estimates": list(midpoint)} for i in range(len(records))]
        truth_cols = truths
    if args.records_out:
        with open(args.records_out, "w", encoding="utf-8") as fh:
            for entry in per_record:
                fh.write(json.dumps(entry, sort_keys=True) + "\n")
    groups = _load_groups(args)
    if groups:
        groups = [
            GroupSpec(g.name, {k: v for k, v in g.fixed.items() if k in names})
            for g in groups
        ]
    report = build_report(names, truth_cols, estimates, groups)
    _write_report(report, args.out, args.scatter)
    return 0


def _cmd_bench(args) -> int:
    lengths = [int(v) for v in args.lengths.split(",")]
    family = FAMILY_BUILDERS[args.family]()
    rows = []
    gen = SeededRng(args.seed).generator
    for use_cnn in (True, False):
        config = PEnetConfig.for_family(family, use_cnn=use_cnn)
        model = PEnetModel(config, seed=args.seed).eval()
        for n in lengths:
            x = gen.standard_normal(n)
            h = family.t_range[0] / n
            model.predict([x], [h])  # warm up
            t0 = time.perf_counter()
            for _ in range(args.reps):
                model.predict([x], [h])
            elapsed = (time.perf_counter() - t0) / args.reps
            rows.append({
                "use_cnn": use_cnn,
                "n": n,
                "condensed_length": config.condensed_length(n),
                "ms_per_forward": elapsed * 1e3,
            })
    by_key = {(row["use_cnn"], row["n"]): row["ms_per_forward"] for row in rows}
    print(f"{'n':>8} {'n_condensed':>12} {'cnn_ms':>10} {'no_cnn_ms':>10} {'ratio':>8}")
    for n in lengths:
        with_cnn = by_key[(True, n)]
        without = by_key[(False, n)]
        config = PEnetConfig.for_family(family, use_cnn=True)
        print(f"{n:>8} {config.condensed_length(n):>12} {with_cnn:>10.2f}"
              f" {without:>10.2f} {without / with_cnn:>8.2f}")
    return 0


def _cmd_dataset(args) -> int:
    if args.dataset_command == "inspect":
        for line in inspect_dataset(args.file):
            print(json.dumps(line, sort_keys=True))
        return 0
    raise ValueError(f"unknown dataset command {args.dataset_command!r}")


def _cmd_model(args) -> int:
    if args.model_command == "describe":
        model, adam = PEnetModel.load(args.checkpoint)
        info = model.describe()
        info["has_optimizer_state"] = adam is not None
        print(json.dumps(info, sort_keys=True))
        return 0
    raise ValueError(f"unknown model command {args.model_command!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="penet",
        description="Parameter estimation for Levy-driven OU processes",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate a labeled dataset file")
    p.add_argument("--family", required=True, choices=sorted(FAMILY_BUILDERS))
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--eta-range", nargs=2, type=float, metavar=("LO", "HI"))
    p.add_argument("--epsilon-range", nargs=2, type=float, metavar=("LO", "HI"))
    p.add_argument("--noise-range", nargs=2, type=float, metavar=("LO", "HI"))
    p.add_argument("--t-range", nargs=2, type=float, metavar=("LO", "HI"))
    p.add_argument("--n-range", nargs=2, type=int, metavar=("LO", "HI"))
    p.add_argument("--fix", action="append", metavar="NAME=VALUE",
                   help="pin a parameter range to a point (repeatable)")
    p.add_argument("--x0", type=float, default=None,
                   help="fixed initial value (default: uniform in [-1, 1])")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("train", help="train a model from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--dataset", help="override the config dataset path")
    p.add_argument("--out", help="override the config checkpoint path")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("evaluate", help="grouped error report for a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--test", nargs="+", required=True)
    p.add_argument("--groups")
    p.add_argument("--out", help="write the JSON-lines report here instead of stdout")
    p.add_argument("--scatter", help="write truth/estimate CSV here")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("estimate", help="single-shot inference")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--input", help="text file, one value per line")
    p.add_argument("--values", help="inline comma-separated series")
    p.add_argument("--h", type=float, required=True)
    p.set_defaults(func=_cmd_estimate)

    p = sub.add_parser("baseline", help="classical estimator report")
    p.add_argument("--estimator", required=True, choices=("lse", "cqmle", "midpoint"))
    p.add_argument("--dataset", required=True)
    p.add_argument("--groups")
    p.add_argument("--out")
    p.add_argument("--scatter")
    p.add_argument("--records-out", help="write per-record estimates JSONL here")
    p.set_defaults(func=_cmd_baseline)

    p = sub.add_parser("bench", help="forward throughput with and without the CNN stage")
    p.add_argument("--family", default="alpha-stable", choices=sorted(FAMILY_BUILDERS))
    p.add_argument("--lengths", default="800,1600,3200")
    p.add_argument("--reps", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("dataset", help="dataset file tools")
    dataset_sub = p.add_subparsers(dest="dataset_command", required=True)
    pi = dataset_sub.add_parser("inspect", help="print header and summary statistics")
    pi.add_argument("file")
    pi.set_defaults(func=_cmd_dataset)

    p = sub.add_parser("model", help="checkpoint tools")
    model_sub = p.add_subparsers(dest="model_command", required=True)
    pd = model_sub.add_parser("describe", help="print config and parameter count")
    pd.add_argument("--checkpoint", required=True)
    pd.set_defaults(func=_cmd_model)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
