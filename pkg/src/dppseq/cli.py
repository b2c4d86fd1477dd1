"""Command-line pipeline: raw CSV to metric tables comparing the four losses.

Subcommands: prepare, gen-sets, train-kernel, train, evaluate, report.
Every output file is stamped with the resolved-config hash and seed, and each
stage is resumable from the files the previous stage wrote.

Exit codes: 0 success, 2 usage/config error, 3 data error, 4 numerical
failure.
"""

from __future__ import annotations

import argparse
import hashlib
import logging
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import data as data_mod
from . import diverse_sets as ds_mod
from . import kernel_learning as kl_mod
from . import scorer as scorer_mod
from .data import SequenceInstance, SplitResult
from .kernels import SingularMatrixError
from .metrics import MetricRow, MetricTable

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4


@dataclass
class ExperimentConfig:
    dataset: str = ""
    T: int = 1
    L: int = 0  # 0 = derive from T
    Z: int = 0  # 0 = derive from T
    k_core: int = 10
    kernel_dim: int = 32
    kernel_lr: float = 0.05
    kernel_epochs: int = 100
    kernel_l2: float = 0.01
    decay: float = 0.5
    set_size: int = 5
    scorer_dim: int = 32
    scorer_lr: float = 0.05
    batch_size: int = 32
    max_epochs: int = 50
    patience: int = 10
    losses: tuple[str, ...] = ("ce", "bpr", "dsl", "cdsl")
    n_list: tuple[int, ...] = (3, 5, 10)
    seed: int = 0
    out: str = "out"
    threads: int = 1

    def resolve(self) -> "ExperimentConfig":
        L, Z = data_mod.default_lengths(self.T)
        if self.L == 0:
            self.L = L
        if self.Z == 0:
            self.Z = Z
        if "dsl" in self.losses and self.T <= 1:
            raise ValueError("dsl requires T > 1; drop it from `losses` or raise T")
        unknown = set(self.losses) - set(scorer_mod.LOSS_KINDS)
        if unknown:
            raise ValueError(f"unknown losses: {sorted(unknown)}")
        return self

    def dump(self) -> str:
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, tuple):
                value = ",".join(str(v) for v in value)
            lines.append(f"{f.name}={value}")
        return "\n".join(lines) + "\n"

    def config_hash(self) -> str:
        return hashlib.sha256(self.dump().encode()).hexdigest()[:16]


def load_config(path: str | None, overrides: dict) -> ExperimentConfig:
    """Parse a key=value config file; command-line overrides win."""
    values: dict = {}
    if path:
        for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value")
            key, _, value = line.partition("=")
            values[key.strip()] = value.strip()
    values.update({k: v for k, v in overrides.items() if v is not None})

    config = ExperimentConfig()
    casts = {f.name: f.type for f in fields(config)}
    for key, value in values.items():
        if key not in casts:
            raise ValueError(f"unknown config key {key!r}")
        current = getattr(config, key)
        if isinstance(current, tuple):
            parts = tuple(p for p in str(value).split(",") if p)
            value = tuple(int(p) for p in parts) if key == "n_list" else parts
        elif isinstance(current, bool):
            value = str(value).lower() in ("1", "true", "yes")
        elif isinstance(current, int):
            value = int(value)
        elif isinstance(current, float):
            value = float(value)
        setattr(config, key, value)
    return config.resolve()


def _stamp(config: ExperimentConfig) -> str:
    return f"# config_hash={config.config_hash()} seed={config.seed}\n"


def _write_stamped(path: Path, config: ExperimentConfig, body: str) -> None:
    path.write_text(_stamp(config) + body)


def _out_dir(config: ExperimentConfig) -> Path:
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_prepared(config: ExperimentConfig):
    out = _out_dir(config)
    filtered = out / "filtered.csv"
    if not filtered.exists():
        raise FileNotFoundError(f"{filtered} missing; run `prepare` first")
    log_ = data_mod.load_interactions(filtered)
    split = data_mod.temporal_split(log_, config.T)
    return log_, split


def _instances_path(config: ExperimentConfig) -> Path:
    return _out_dir(config) / "instances.tsv"


def _write_instances(path: Path, config: ExperimentConfig, instances) -> None:
    lines = ["user\tprevious\ttargets\tnegatives\ttime_step"]
    for inst in instances:
        lines.append(
            "\t".join(
                [
                    str(inst.user),
                    ",".join(map(str, inst.previous)),
                    ",".join(map(str, inst.targets)),
                    ",".join(map(str, inst.negatives)),
                    str(inst.time_step),
                ]
            )
        )
    _write_stamped(path, config, "\n".join(lines) + "\n")


def _read_instances(path: Path) -> list[SequenceInstance]:
    instances = []
    for line in path.read_text().splitlines():
        if line.startswith("#") or line.startswith("user\t") or not line:
            continue
        user, prev, targets, negs, step = line.split("\t")
        parse = lambda s: tuple(int(x) for x in s.split(",") if x)
        instances.append(
            SequenceInstance(
                user=int(user),
                previous=parse(prev),
                targets=parse(targets),
                negatives=parse(negs),
                time_step=int(step),
            )
        )
    return instances


def cmd_prepare(config: ExperimentConfig) -> None:
    out = _out_dir(config)
    log_ = data_mod.load_interactions(config.dataset)
    log_ = data_mod.k_core_filter(log_, config.k_core)
    data_mod.write_interactions(out / "filtered.csv", log_)
    split = data_mod.temporal_split(log_, config.T)
    data_mod.write_split_manifest(out / "split_manifest.tsv", split)
    instances = data_mod.make_instances(
        split, log_.n_items, config.L, config.T, config.Z, seed=config.seed
    )
    _write_instances(_instances_path(config), config, instances)
    (out / "config_resolved.txt").write_text(_stamp(config) + config.dump())
    print(f"prepared {len(instances)} instances over {log_.n_users} users, {log_.n_items} items")


def cmd_gen_sets(config: ExperimentConfig) -> None:
    log_, split = _load_prepared(config)
    histories = data_mod.user_histories(split)
    catalog_by_category: dict[int, list[int]] = {}
    for item, cats in enumerate(log_.item_categories):
        for c in cats:
            catalog_by_category.setdefault(c, []).append(item)
    all_items = list(range(log_.n_items))
    pairs = []
    for u, train_items in enumerate(split.train):
        if not train_items:
            continue
        user_items = [(i, log_.item_categories[i]) for i in dict.fromkeys(train_items)]
        pairs.append(
            ds_mod.build_paired_sets(
                u,
                user_items,
                histories[u],
                log_.item_categories,
                catalog_by_category,
                all_items,
                decay=config.decay,
                set_size=config.set_size,
                seed=config.seed ^ u,
            )
        )
    ds_mod.dump_paired_sets(pairs, _out_dir(config) / "diverse_sets.tsv")
    n_sets = sum(len(p.positive) for p in pairs)
    print(f"generated {n_sets} paired diverse sets for {len(pairs)} users")


def cmd_train_kernel(config: ExperimentConfig) -> None:
    out = _out_dir(config)
    log_, _ = _load_prepared(config)
    sets_path = out / "diverse_sets.tsv"
    if not sets_path.exists():
        raise FileNotFoundError(f"{sets_path} missing; run `gen-sets` first")
    pairs = ds_mod.load_paired_sets(sets_path)
    kcfg = kl_mod.KernelTrainConfig(
        latent_dim=config.kernel_dim,
        learning_rate=config.kernel_lr,
        epochs=config.kernel_epochs,
        l2_reg=config.kernel_l2,
        seed=config.seed,
    )
    kernel, history = kl_mod.train_kernel(pairs, log_.n_items, kcfg)
    kernel = kl_mod.normalize_kernel(kernel, seed=config.seed)
    kl_mod.save_kernel(out / "kernel.txt", kernel)
    body = "epoch,objective\n" + "\n".join(
        f"{e},{obj:.6f}" for e, obj in enumerate(history)
    )
    _write_stamped(out / "kernel_objective.csv", config, body + "\n")
    print(f"trained kernel over {kernel.n_items} items, D={kernel.latent_dim}")


def cmd_train(config: ExperimentConfig, loss_kind: str) -> None:
    out = _out_dir(config)
    log_, split = _load_prepared(config)
    instances = _read_instances(_instances_path(config))
    kernel = None
    if loss_kind in ("dsl", "cdsl"):
        kernel_path = out / "kernel.txt"
        if not kernel_path.exists():
            raise FileNotFoundError(f"{kernel_path} missing; run `train-kernel` first")
        kernel = kl_mod.load_kernel(kernel_path)
    params = scorer_mod.init_params(
        log_.n_users, log_.n_items, d=config.scorer_dim, seed=config.seed
    )
    tcfg = scorer_mod.TrainConfig(
        learning_rate=config.scorer_lr,
        batch_size=config.batch_size,
        max_epochs=config.max_epochs,
        patience=config.patience,
        seed=config.seed,
    )
    validate = lambda p: scorer_mod.validation_ndcg(p, split, log_.n_items, config.L)
    params, tlog = scorer_mod.train(params, instances, loss_kind, kernel, tcfg, validate)
    scorer_mod.save_params(out / f"scorer_{loss_kind}.txt", params)
    body = "epoch,train_loss,val_ndcg5,seconds\n" + "\n".join(
        f"{e},{l:.6f},{v:.6f},{s:.3f}"
        for e, (l, v, s) in enumerate(
            zip(tlog.epoch_loss, tlog.epoch_val_ndcg, tlog.epoch_seconds)
        )
    )
    _write_stamped(out / f"train_log_{loss_kind}.csv", config, body + "\n")
    print(
        f"trained {loss_kind}: {len(tlog.epoch_loss)} epochs, "
        f"best epoch {tlog.best_epoch}, val Nd@5 {max(tlog.epoch_val_ndcg):.4f}"
    )


def cmd_evaluate(config: ExperimentConfig, loss_kind: str) -> None:
    out = _out_dir(config)
    log_, split = _load_prepared(config)
    checkpoint = out / f"scorer_{loss_kind}.txt"
    if not checkpoint.exists():
        raise FileNotFoundError(f"{checkpoint} missing; run `train --loss {loss_kind}` first")
    params = scorer_mod.load_params(checkpoint)
    table = scorer_mod.evaluate_model(
        params,
        split,
        log_.n_items,
        config.L,
        log_.item_categories,
        log_.n_categories,
        N_list=config.n_list,
        loss_name=loss_kind,
        threads=config.threads,
    )
    path = out / f"metrics_{loss_kind}.csv"
    table.write_csv(path)
    stamped = _stamp(config) + path.read_text()
    path.write_text(stamped)
    print(f"wrote {path}")


def cmd_report(config: ExperimentConfig) -> None:
    out = _out_dir(config)
    rows: list[MetricRow] = []
    efficiency = ["loss,seconds_per_epoch,epochs_to_best,total_seconds"]
    curves = ["loss,epoch,val_ndcg5"]
    for loss_kind in config.losses:
        metrics_path = out / f"metrics_{loss_kind}.csv"
        if not metrics_path.exists():
            raise FileNotFoundError(f"{metrics_path} missing; run `evaluate` for {loss_kind}")
        for line in metrics_path.read_text().splitlines():
            if line.startswith("#") or line.startswith("loss,") or not line:
                continue
            loss, T, N, re, nd, cc, f = line.split(",")
            rows.append(
                MetricRow(loss, int(T), int(N), float(re), float(nd), float(cc), float(f))
            )
        tl_path = out / f"train_log_{loss_kind}.csv"
        if tl_path.exists():
            entries = [
                line.split(",")
                for line in tl_path.read_text().splitlines()
                if line and not line.startswith("#") and not line.startswith("epoch,")
            ]
            seconds = [float(e[3]) for e in entries]
            ndcgs = [float(e[2]) for e in entries]
            best_epoch = int(np.argmax(ndcgs))
            per_epoch = float(np.mean(seconds))
            efficiency.append(
                f"{loss_kind},{per_epoch:.3f},{best_epoch + 1},{per_epoch * (best_epoch + 1):.3f}"
            )
            curves.extend(f"{loss_kind},{e},{v:.6f}" for e, v in enumerate(ndcgs))
    body = "loss,T,N,recall,ndcg,cc,f\n" + "\n".join(
        f"{r.loss},{r.T},{r.N},{r.recall:.6f},{r.ndcg:.6f},{r.cc:.6f},{r.f:.6f}" for r in rows
    )
    _write_stamped(out / "report.csv", config, body + "\n")
    _write_stamped(out / "efficiency.csv", config, "\n".join(efficiency) + "\n")
    _write_stamped(out / "validation_curves.csv", config, "\n".join(curves) + "\n")
    print(f"wrote {out / 'report.csv'} ({len(rows)} rows)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dppseq", description="DPP set-likelihood loss experiments"
    )
    parser.add_argument("--config", help="key=value config file")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--threads", type=int)
    parser.add_argument("--out", help="output directory")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("prepare")
    sub.add_parser("gen-sets")
    sub.add_parser("train-kernel")
    train_p = sub.add_parser("train")
    train_p.add_argument("--loss", required=True, choices=scorer_mod.LOSS_KINDS)
    eval_p = sub.add_parser("evaluate")
    eval_p.add_argument("--loss", required=True, choices=scorer_mod.LOSS_KINDS)
    sub.add_parser("report")
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = load_config(
            args.config,
            {"seed": args.seed, "threads": args.threads, "out": args.out},
        )
    except (ValueError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        if args.command == "prepare":
            if not config.dataset:
                print("config error: no dataset path given", file=sys.stderr)
                return EXIT_CONFIG
            if not Path(config.dataset).exists():
                print(f"config error: dataset {config.dataset} not found", file=sys.stderr)
                return EXIT_CONFIG
            cmd_prepare(config)
        elif args.command == "gen-sets":
            cmd_gen_sets(config)
        elif args.command == "train-kernel":
            cmd_train_kernel(config)
        elif args.command == "train":
            cmd_train(config, args.loss)
        elif args.command == "evaluate":
            cmd_evaluate(config, args.loss)
        elif args.command == "report":
            cmd_report(config)
    except (FileNotFoundError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (SingularMatrixError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
