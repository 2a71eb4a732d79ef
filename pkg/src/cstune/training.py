"""Alternating supervised/unsupervised training loop.

The first ``warmstart_steps`` optimizer steps are purely supervised; after
that the phases repeat [S, S, U] (two supervised updates per unsupervised
one). A supervised step touches only the shared encoder and content head;
an unsupervised step first updates the three discriminators on detached
fakes, then the components on the adversarial + reconstruction total.
"""

from __future__ import annotations

import enum
import json
import pickle
import struct
import time
import zlib
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .data import BatchStream, Batch, EmbeddingDataset, select_labeled
from .errors import (
    ContractError,
    DimensionError,
    FormatError,
    NumericError,
    ParameterError,
    TrainingDiverged,
    TruncationError,
)
from .losses import (
    LossBreakdown,
    LossWeights,
    PriorSet,
    default_priors,
    discriminator_step,
    supervised_loss,
    unsupervised_losses,
)
from .networks import ComponentBundle, build_bundle
from .optim import AdamW, AdamWConfig, lr_at
from .autograd import Tape
from .rng import RngState

_CKPT_MAGIC = b"SFCK"
_CKPT_VERSION = 1


class Phase(enum.Enum):
    SUPERVISED = "supervised"
    UNSUPERVISED = "unsupervised"


@dataclass(frozen=True)
class TrainingSchedule:
    total_steps: int
    warmstart_steps: int = 20
    supervised_per_unsupervised: int = 2
    batch_supervised: int = 32
    batch_unsupervised: int = 512
    eval_every: int = 50
    patience: int = 20
    supervised_only: bool = False

    def __post_init__(self):
        if self.total_steps < 0:
            raise ParameterError(f"total_steps must be >= 0, got {self.total_steps}")
        if self.warmstart_steps < 0:
            raise ParameterError("warmstart_steps must be >= 0")
        if self.supervised_per_unsupervised < 1:
            raise ParameterError("supervised_per_unsupervised must be >= 1")
        if self.batch_supervised < 1 or self.batch_unsupervised < 1:
            raise ParameterError("batch sizes must be >= 1")
        if self.eval_every < 1:
            raise ParameterError("eval_every must be >= 1")


def plan(step: int, schedule: TrainingSchedule) -> Phase:
    """Phase of a 1-based step: warmstart, then repeating [S x ratio, U]."""
    if step < 1:
        raise ParameterError(f"step must be >= 1, got {step}")
    if schedule.supervised_only or step <= schedule.warmstart_steps:
        return Phase.SUPERVISED
    offset = (step - schedule.warmstart_steps - 1) % (schedule.supervised_per_unsupervised + 1)
    if offset < schedule.supervised_per_unsupervised:
        return Phase.SUPERVISED
    return Phase.UNSUPERVISED


@dataclass
class StepRecord:
    step: int
    phase: str
    losses: LossBreakdown


@dataclass
class TrainReport:
    steps: list[StepRecord] = field(default_factory=list)
    evals: list[tuple[int, float]] = field(default_factory=list)
    best_error: float = 1.0
    best_step: int = 0
    steps_run: int = 0
    aborted: bool = False
    wall_clock_s: float = 0.0

    def record_eval(self, step: int, error: float) -> bool:
        """Append an eval; returns True when it improves the running best."""
        self.evals.append((step, error))
        if error < self.best_error:
            self.best_error = error
            self.best_step = step
            return True
        return False

    def to_json(self) -> str:
        """Deterministic serialization: wall-clock is deliberately excluded."""
        payload = {
            "steps": [
                {"step": r.step, "phase": r.phase, "losses": asdict(r.losses)}
                for r in self.steps
            ],
            "evals": self.evals,
            "best_error": self.best_error,
            "best_step": self.best_step,
            "steps_run": self.steps_run,
            "aborted": self.aborted,
        }
        return json.dumps(payload, sort_keys=True, indent=1)


def supervised_step(
    bundle: ComponentBundle,
    batch: Batch,
    optimizer: AdamW,
    lr_t: float,
    rng: np.random.Generator,
) -> LossBreakdown:
    """One CE update on the classifier path only."""
    if batch.labels is None:
        raise ContractError("supervised step needs a labeled batch")
    tape = Tape()
    breakdown, loss = supervised_loss(bundle, tape, batch.x, batch.labels, rng=rng)
    tape.backward(loss)
    optimizer.step(bundle.supervised_parameters(), lr=lr_t)
    return breakdown


def unsupervised_step(
    bundle: ComponentBundle,
    batch: Batch,
    priors: PriorSet,
    weights: LossWeights,
    component_opt: AdamW,
    discriminator_opt: AdamW,
    lr_t: float,
    rng_disc: np.random.Generator,
    rng_gen: np.random.Generator,
) -> LossBreakdown:
    """Discriminators first (detached fakes), then the component total."""
    disc_tape = Tape()
    disc_breakdown, disc_total = discriminator_step(bundle, disc_tape, batch.x, priors, rng_disc)
    disc_tape.backward(disc_total)
    discriminator_opt.step(bundle.discriminator_parameters(), lr=lr_t)

    gen_tape = Tape()
    gen_breakdown, gen_total = unsupervised_losses(bundle, gen_tape, batch.x, priors, weights, rng_gen)
    gen_tape.backward(gen_total)
    component_opt.step(bundle.component_parameters(), lr=lr_t)
    return disc_breakdown.merged(gen_breakdown)


@dataclass
class CheckpointState:
    """Everything needed to resume a run bit-identically."""

    embed_dim: int
    num_classes: int
    seed: int
    step: int
    params: dict[str, np.ndarray]
    component_opt: dict[str, tuple[np.ndarray, np.ndarray, int]]
    discriminator_opt: dict[str, tuple[np.ndarray, np.ndarray, int]]
    paired_stream: tuple[int, int]
    unpaired_stream: tuple[int, int]
    report: TrainReport
    evals_since_best: int


def _opt_state(opt: AdamW) -> dict[str, tuple[np.ndarray, np.ndarray, int]]:
    return {name: (s.m.copy(), s.v.copy(), s.step) for name, s in opt.state.slots.items()}


def _restore_opt(opt: AdamW, saved: dict[str, tuple[np.ndarray, np.ndarray, int]]) -> None:
    for name, (m, v, step) in saved.items():
        slot = opt.state.slots[name]
        slot.m[...] = m
        slot.v[...] = v
        slot.step = step


def save_checkpoint(state: CheckpointState, path: str | Path) -> None:
    payload = pickle.dumps(state, protocol=4)
    body = _CKPT_MAGIC + struct.pack("<IQ", _CKPT_VERSION, len(payload)) + payload
    crc = zlib.crc32(body) & 0xFFFFFFFF
    Path(path).write_bytes(body + struct.pack("<I", crc))


def load_checkpoint(path: str | Path) -> CheckpointState:
    blob = Path(path).read_bytes()
    if len(blob) < 20:
        raise TruncationError(f"checkpoint is {len(blob)} bytes, shorter than the 20-byte minimum")
    if blob[:4] != _CKPT_MAGIC:
        raise FormatError(f"bad magic {blob[:4]!r} at offset 0 (expected {_CKPT_MAGIC!r})")
    version, plen = struct.unpack_from("<IQ", blob, 4)
    if version != _CKPT_VERSION:
        raise FormatError(f"unsupported checkpoint version {version} at offset 4")
    expected = 16 + plen + 4
    if len(blob) != expected:
        raise TruncationError(f"checkpoint is {len(blob)} bytes but header promises {expected}")
    stored = struct.unpack_from("<I", blob, expected - 4)[0]
    actual = zlib.crc32(blob[: expected - 4]) & 0xFFFFFFFF
    if stored != actual:
        raise FormatError(
            f"CRC mismatch at offset {expected - 4}: stored {stored:#010x}, computed {actual:#010x}"
        )
    return pickle.loads(blob[16 : expected - 4])


def apply_parameters(bundle: ComponentBundle, params: dict[str, np.ndarray]) -> None:
    for p in bundle.all_parameters():
        saved = params[p.name]
        if saved.shape != p.data.shape:
            raise DimensionError(
                f"checkpoint parameter {p.name} has shape {saved.shape}, bundle expects {p.data.shape}"
            )
        p.data[...] = saved


@dataclass
class FitConfig:
    optimizer: AdamWConfig = field(default_factory=AdamWConfig)
    weights: LossWeights = field(default_factory=LossWeights)
    insert_disc_activations: bool = True


def fit(
    train: EmbeddingDataset,
    eval_dataset: EmbeddingDataset,
    budget: int,
    schedule: TrainingSchedule,
    config: FitConfig | None = None,
    seed: int = 0,
    checkpoint_path: str | Path | None = None,
    checkpoint_every: int | None = None,
    resume_from: CheckpointState | None = None,
) -> tuple[ComponentBundle, TrainReport]:
    """Run the alternating schedule; deterministic for a fixed seed.

    The paired subset depends only on (train, budget, seed), so
    supervised-only and semi-supervised runs at the same seed train on
    identical labeled rows. Divergence aborts with the last checkpoint
    left on disk and raises :class:`TrainingDiverged`.
    """
    from .evaluation import error_rate  # local import: evaluation also imports us

    config = config or FitConfig()
    rng = RngState(seed)
    paired, unpaired = select_labeled(train, budget, seed=seed)
    bundle = build_bundle(
        train.embed_dim, train.num_classes, rng,
        insert_disc_activations=config.insert_disc_activations,
    )
    component_opt = AdamW(bundle.component_parameters(), config.optimizer)
    discriminator_opt = AdamW(bundle.discriminator_parameters(), config.optimizer)
    paired_stream = BatchStream(paired, schedule.batch_supervised, rng, "paired")
    unpaired_stream = BatchStream(unpaired, schedule.batch_unsupervised, rng, "unpaired")
    priors = default_priors(train.num_classes, unpaired.rows())

    report = TrainReport()
    start_step = 1
    evals_since_best = 0

    if resume_from is not None:
        if resume_from.embed_dim != train.embed_dim:
            raise DimensionError(
                f"checkpoint embed_dim {resume_from.embed_dim} != dataset {train.embed_dim}"
            )
        if resume_from.num_classes != train.num_classes:
            raise DimensionError(
                f"checkpoint num_classes {resume_from.num_classes} != dataset {train.num_classes}"
            )
        apply_parameters(bundle, resume_from.params)
        _restore_opt(component_opt, resume_from.component_opt)
        _restore_opt(discriminator_opt, resume_from.discriminator_opt)
        paired_stream.restore(resume_from.paired_stream)
        unpaired_stream.restore(resume_from.unpaired_stream)
        report = resume_from.report
        start_step = resume_from.step + 1
        evals_since_best = resume_from.evals_since_best
    else:
        report.record_eval(0, error_rate(bundle, eval_dataset))

    def snapshot(step: int) -> CheckpointState:
        return CheckpointState(
            embed_dim=train.embed_dim,
            num_classes=train.num_classes,
            seed=seed,
            step=step,
            params={p.name: p.data.copy() for p in bundle.all_parameters()},
            component_opt=_opt_state(component_opt),
            discriminator_opt=_opt_state(discriminator_opt),
            paired_stream=paired_stream.state(),
            unpaired_stream=unpaired_stream.state(),
            report=report,
            evals_since_best=evals_since_best,
        )

    t0 = time.perf_counter()
    for step in range(start_step, schedule.total_steps + 1):
        phase = plan(step, schedule)
        lr_t = lr_at(step, schedule.total_steps, config.optimizer)
        try:
            if phase is Phase.SUPERVISED:
                losses = supervised_step(
                    bundle, paired_stream.next(), component_opt, lr_t,
                    rng.stream("sup-dropout", step),
                )
            else:
                losses = unsupervised_step(
                    bundle, unpaired_stream.next(), priors, config.weights,
                    component_opt, discriminator_opt, lr_t,
                    rng.stream("disc-pass", step), rng.stream("gen-pass", step),
                )
        except NumericError as exc:
            report.aborted = True
            report.steps_run = step - 1
            report.wall_clock_s = time.perf_counter() - t0
            raise TrainingDiverged(
                f"step {step} diverged ({exc}); last checkpoint retained"
            ) from exc
        report.steps.append(StepRecord(step, phase.value, losses))
        report.steps_run = step

        if step % schedule.eval_every == 0 or step == schedule.total_steps:
            improved = report.record_eval(step, error_rate(bundle, eval_dataset))
            evals_since_best = 0 if improved else evals_since_best + 1
            if evals_since_best > schedule.patience:
                break
        if checkpoint_path is not None and checkpoint_every is not None:
            if step % checkpoint_every == 0:
                save_checkpoint(snapshot(step), checkpoint_path)

    report.wall_clock_s = time.perf_counter() - t0
    if checkpoint_path is not None and checkpoint_every is None:
        save_checkpoint(snapshot(report.steps_run), checkpoint_path)
    return bundle, report
