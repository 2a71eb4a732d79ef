"""Run configuration: defaults <- INI file <- command-line flags.

Sections mirror the library modules. Method-defining choices (generator
objective form, discriminator input representations, update order, ...)
appear as keys so every run snapshot documents them, but only their
shipped values are implemented; setting anything else raises.
"""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ParameterError
from .losses import LossWeights
from .optim import AdamWConfig
from .training import TrainingSchedule

DEFAULTS: dict[str, dict[str, str]] = {
    "schedule": {
        "total_steps": "300",
        "warmstart_steps": "20",
        "supervised_per_unsupervised": "2",
        "batch_supervised": "32",
        "batch_unsupervised": "512",
        "eval_every": "50",
        "patience": "20",
    },
    "optimizer": {
        "lr": "5e-05",
        "beta1": "0.9",
        "beta2": "0.999",
        "eps": "1e-08",
        "weight_decay": "0.01",
        "warmup_fraction": "0.0",
    },
    "losses": {
        "lambda_content": "1.0",
        "lambda_style": "1.0",
        "lambda_embedding": "1.0",
        "lambda_reconstruction": "1.0",
        "nonsaturating_generator": "true",
        "content_disc_input": "softmax",
        "embedding_disc_fake": "prior_decode",
        "learnable_priors": "false",
        "disc_updates_per_generator": "1",
    },
    "networks": {
        "insert_disc_activations": "true",
        "concat_order": "content_style",
    },
    "trainer": {
        "disc_before_generator": "true",
        "divergence_policy": "abort",
        "unpaired_includes_labeled": "true",
        "leaky_relu_kink_branch": "negative",
    },
    "run": {
        "seed": "0",
    },
}

# keys whose alternatives are not implemented; a snapshot records them,
# an override must match the shipped value
_FIXED = {
    ("losses", "nonsaturating_generator"): "true",
    ("losses", "content_disc_input"): "softmax",
    ("losses", "embedding_disc_fake"): "prior_decode",
    ("losses", "learnable_priors"): "false",
    ("losses", "disc_updates_per_generator"): "1",
    ("networks", "concat_order"): "content_style",
    ("trainer", "disc_before_generator"): "true",
    ("trainer", "divergence_policy"): "abort",
    ("trainer", "unpaired_includes_labeled"): "true",
    ("trainer", "leaky_relu_kink_branch"): "negative",
}


@dataclass
class RunConfig:
    schedule: TrainingSchedule
    optimizer: AdamWConfig
    weights: LossWeights
    insert_disc_activations: bool
    seed: int
    resolved: dict[str, dict[str, str]] = field(default_factory=dict)

    def render(self) -> str:
        """Deterministic INI snapshot of every resolved value."""
        cp = configparser.ConfigParser()
        for section in sorted(self.resolved):
            cp[section] = dict(sorted(self.resolved[section].items()))
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()


def _parse_bool(raw: str, where: str) -> bool:
    low = raw.strip().lower()
    if low in ("true", "1", "yes", "on"):
        return True
    if low in ("false", "0", "no", "off"):
        return False
    raise ParameterError(f"{where} must be a boolean, got {raw!r}")


def load_config(
    path: str | Path | None = None,
    overrides: dict[str, str] | None = None,
) -> RunConfig:
    """Resolve a config. `overrides` keys are dotted, e.g. 'schedule.total_steps'."""
    resolved = {section: dict(values) for section, values in DEFAULTS.items()}
    if path is not None:
        cp = configparser.ConfigParser()
        read = cp.read(str(path))
        if not read:
            raise ParameterError(f"config file not found: {path}")
        for section in cp.sections():
            if section not in resolved:
                raise ParameterError(f"unknown config section [{section}]")
            for key, value in cp[section].items():
                if key not in resolved[section]:
                    raise ParameterError(f"unknown config key {section}.{key}")
                resolved[section][key] = value
    for dotted, value in (overrides or {}).items():
        section, _, key = dotted.partition(".")
        if section not in resolved or key not in resolved[section]:
            raise ParameterError(f"unknown config key {dotted}")
        resolved[section][key] = str(value)

    for (section, key), required in _FIXED.items():
        got = resolved[section][key].strip().lower()
        if got != required:
            raise ParameterError(
                f"{section}.{key}={got!r} is not implemented; only {required!r} is"
            )

    sched = resolved["schedule"]
    schedule = TrainingSchedule(
        total_steps=int(sched["total_steps"]),
        warmstart_steps=int(sched["warmstart_steps"]),
        supervised_per_unsupervised=int(sched["supervised_per_unsupervised"]),
        batch_supervised=int(sched["batch_supervised"]),
        batch_unsupervised=int(sched["batch_unsupervised"]),
        eval_every=int(sched["eval_every"]),
        patience=int(sched["patience"]),
    )
    opt = resolved["optimizer"]
    optimizer = AdamWConfig(
        lr=float(opt["lr"]),
        beta1=float(opt["beta1"]),
        beta2=float(opt["beta2"]),
        eps=float(opt["eps"]),
        weight_decay=float(opt["weight_decay"]),
        warmup_fraction=float(opt["warmup_fraction"]),
    )
    lam = resolved["losses"]
    weights = LossWeights(
        content=float(lam["lambda_content"]),
        style=float(lam["lambda_style"]),
        embedding=float(lam["lambda_embedding"]),
        reconstruction=float(lam["lambda_reconstruction"]),
    )
    return RunConfig(
        schedule=schedule,
        optimizer=optimizer,
        weights=weights,
        insert_disc_activations=_parse_bool(
            resolved["networks"]["insert_disc_activations"], "networks.insert_disc_activations"
        ),
        seed=int(resolved["run"]["seed"]),
        resolved=resolved,
    )
