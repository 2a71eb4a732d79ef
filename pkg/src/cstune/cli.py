"""Command-line entry point.

Subcommands: synth, train, sweep, inspect, export-features. Every run
directory receives a frozen config snapshot, the seed, a version string
and the produced artifacts. Failures print one machine-parsable
``<error-class>: <message>`` line and exit nonzero.
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .config import RunConfig, load_config
from .data import (
    EmbeddingDataset,
    SyntheticSpec,
    generate_synthetic,
    label_ladder,
    read_embx,
    write_embx,
)
from .errors import CstuneError, ParameterError
from .evaluation import (
    SweepConfig,
    export_features,
    run_sweep,
    write_sweep_csv,
)
from .networks import build_bundle
from .rng import RngState
from .training import FitConfig, apply_parameters, fit, load_checkpoint

_OUT_ROOT_VAR = "CSTUNE_OUT_ROOT"


def version_string() -> str:
    base = f"cstune {__version__}"
    try:
        here = Path(__file__).resolve().parent
        desc = subprocess.run(
            ["git", "-C", str(here), "describe", "--always", "--dirty"],
            capture_output=True, text=True, timeout=5,
        )
        if desc.returncode == 0:
            return f"{base} ({desc.stdout.strip()})"
    except OSError:
        pass
    return base


def _resolve_out(arg: str | None, command: str) -> Path:
    if arg is not None:
        return Path(arg)
    root = os.environ.get(_OUT_ROOT_VAR)
    if root is None:
        raise ParameterError(f"--out missing and {_OUT_ROOT_VAR} is not set")
    return Path(root) / command


def _freeze_run(out: Path, cfg: RunConfig, extra: dict) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.ini").write_text(cfg.render())
    meta = {"seed": cfg.seed, "version": version_string(), **extra}
    (out / "run.json").write_text(json.dumps(meta, sort_keys=True, indent=1))


def _load_pair(train_path: str, test_path: str) -> tuple[EmbeddingDataset, EmbeddingDataset]:
    train = read_embx(train_path)
    test = read_embx(test_path)
    if train.embed_dim != test.embed_dim or train.num_classes != test.num_classes:
        raise ParameterError(
            f"train ({train.embed_dim}, K={train.num_classes}) and "
            f"test ({test.embed_dim}, K={test.num_classes}) disagree"
        )
    return train, test


def cmd_synth(args: argparse.Namespace) -> None:
    out = _resolve_out(args.out, "synth")
    out.mkdir(parents=True, exist_ok=True)
    spec = SyntheticSpec(
        num_classes=args.classes,
        embed_dim=args.dim,
        mean_scale=args.mean_scale,
        noise_scale=args.noise_scale,
        nuisance_dim=args.nuisance_dim,
        nuisance_scale=args.nuisance_scale,
        train_rows=args.train_rows,
        test_rows=args.test_rows,
        seed=args.seed,
    )
    train, test = generate_synthetic(spec)
    write_embx(out / "train.embx", train)
    write_embx(out / "test.embx", test)
    report = {
        "spec": {k: v for k, v in vars(spec).items()},
        "linear_probe_error": float(train.metadata["linear-probe-error"]),
        "version": version_string(),
    }
    (out / "generation-report.json").write_text(json.dumps(report, sort_keys=True, indent=1))
    print(f"wrote {out / 'train.embx'} ({len(train)} rows) and {out / 'test.embx'} ({len(test)} rows)")


def _method_name(flag: str) -> str:
    return {"sup": "supervised", "semi": "semi-supervised"}[flag]


def cmd_train(args: argparse.Namespace) -> None:
    overrides: dict[str, str] = {}
    if args.steps is not None:
        overrides["schedule.total_steps"] = str(args.steps)
    if args.seed is not None:
        overrides["run.seed"] = str(args.seed)
    cfg = load_config(args.config, overrides)
    train, test = _load_pair(args.train, args.test)
    out = _resolve_out(args.out, "train")
    _freeze_run(out, cfg, {
        "command": "train", "train": args.train, "test": args.test,
        "budget": args.budget, "method": _method_name(args.method),
    })
    schedule = cfg.schedule
    if args.method == "sup":
        schedule = replace(schedule, supervised_only=True)
    bundle, report = fit(
        train, test, args.budget, schedule,
        FitConfig(cfg.optimizer, cfg.weights, cfg.insert_disc_activations),
        seed=cfg.seed,
        checkpoint_path=out / "checkpoint.sfck",
    )
    (out / "report.json").write_text(report.to_json())
    (out / "timing.json").write_text(json.dumps({"wall_clock_s": report.wall_clock_s}))
    print(f"best error {report.best_error:.4f} at step {report.best_step} "
          f"({report.steps_run} steps run)")


def cmd_sweep(args: argparse.Namespace) -> None:
    overrides: dict[str, str] = {}
    if args.steps is not None:
        overrides["schedule.total_steps"] = str(args.steps)
    cfg = load_config(args.config, overrides)
    train, test = _load_pair(args.train, args.test)
    if args.budgets:
        budgets = tuple(sorted({int(b) for b in args.budgets.split(",")}, reverse=True))
        from .data import LabelBudget

        ladder = LabelBudget(budgets)
    else:
        ladder = label_ladder(len(train), train.num_classes)
    out = _resolve_out(args.out, "sweep")
    _freeze_run(out, cfg, {
        "command": "sweep", "train": args.train, "test": args.test,
        "ladder": list(ladder.ladder), "seeds": args.seeds, "jobs": args.jobs,
    })
    rows = run_sweep(
        train, test, ladder,
        methods=("supervised", "semi-supervised"),
        seeds=tuple(range(args.seeds)),
        config=SweepConfig(cfg.schedule, cfg.optimizer, cfg.weights),
        jobs=args.jobs,
    )
    write_sweep_csv(rows, out / "sweep.csv")
    print(f"wrote {out / 'sweep.csv'} ({len(rows)} rows)")


def cmd_inspect(args: argparse.Namespace) -> None:
    ds = read_embx(args.file)
    print(f"embed_dim: {ds.embed_dim}")
    print(f"num_classes: {ds.num_classes}")
    print(f"rows: {len(ds)}")
    print(f"labeled: {ds.n_labeled}")
    print(f"split: {ds.split}")
    for k in sorted(ds.metadata):
        if k != "split":
            print(f"metadata {k}: {ds.metadata[k]}")


def cmd_export_features(args: argparse.Namespace) -> None:
    state = load_checkpoint(args.checkpoint)
    ds = read_embx(args.data)
    if ds.embed_dim != state.embed_dim:
        raise ParameterError(
            f"checkpoint embed_dim {state.embed_dim} != dataset {ds.embed_dim}"
        )
    bundle = build_bundle(state.embed_dim, state.num_classes, RngState(state.seed))
    apply_parameters(bundle, state.params)
    export_features(bundle, ds, args.out)
    print(f"wrote {args.out}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cstune", description=__doc__)
    parser.add_argument("--version", action="version", version=version_string())
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic embedding dataset")
    p.add_argument("--out", default=None)
    p.add_argument("--classes", type=int, default=10)
    p.add_argument("--dim", type=int, default=64)
    p.add_argument("--train-rows", type=int, default=6000)
    p.add_argument("--test-rows", type=int, default=1000)
    p.add_argument("--mean-scale", type=float, default=4.0)
    p.add_argument("--noise-scale", type=float, default=1.0)
    p.add_argument("--nuisance-dim", type=int, default=8)
    p.add_argument("--nuisance-scale", type=float, default=3.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train one model at one label budget")
    p.add_argument("--train", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--budget", type=int, required=True)
    p.add_argument("--method", choices=("sup", "semi"), default="semi")
    p.add_argument("--config", default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sweep", help="label-budget sweep over both methods")
    p.add_argument("--train", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--seeds", type=int, default=1, help="number of seeds (0..S-1)")
    p.add_argument("--budgets", default=None, help="comma list; default: the full ladder")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--config", default=None)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("inspect", help="print an EMBX file's header and metadata")
    p.add_argument("--file", required=True)
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("export-features", help="dump classifier features + PCA to CSV")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export_features)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except CstuneError as exc:
        print(f"{exc.code}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"io-error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
