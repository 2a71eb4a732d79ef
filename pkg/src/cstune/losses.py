"""Loss system: supervised cross-entropy, cosine reconstruction, and the
three adversarial regularizers with their prior samplers.

The divergence constraints on the latent spaces are realized through
binary discriminators: prior draws are "real", component outputs are
"fake". Discriminator updates see detached fakes; component updates see
frozen discriminators (the non-saturating fake-toward-real objective).
"""

from __future__ import annotations

from contextlib import contextmanager
from dataclasses import dataclass, replace
from typing import Iterator

import numpy as np

from . import autograd as ag
from .autograd import Tape, Value, constant
from .errors import ContractError, DimensionError, NumericError
from .networks import STYLE_DIM, ComponentBundle, Net


@dataclass(frozen=True)
class LossWeights:
    """Coefficients of the unsupervised total; all default to 1."""

    content: float = 1.0
    style: float = 1.0
    embedding: float = 1.0
    reconstruction: float = 1.0

    def __post_init__(self):
        for name in ("content", "style", "embedding", "reconstruction"):
            if getattr(self, name) < 0:
                raise ContractError(f"loss weight {name} must be >= 0")


@dataclass
class LossBreakdown:
    ce: float = 0.0
    recon: float = 0.0
    adv_content: float = 0.0
    adv_style: float = 0.0
    adv_embed: float = 0.0
    disc_content: float = 0.0
    disc_style: float = 0.0
    disc_embed: float = 0.0
    total: float = 0.0

    def merged(self, other: "LossBreakdown") -> "LossBreakdown":
        return replace(
            other,
            disc_content=self.disc_content,
            disc_style=self.disc_style,
            disc_embed=self.disc_embed,
        )


class PriorSampler:
    """Reference distribution for one latent space.

    kinds: ``categorical`` (exact one-hot rows), ``gaussian`` (standard
    normal), ``empirical`` (rows drawn from a stored matrix).
    """

    def __init__(self, kind: str, *, num_classes: int = 0, dim: int = STYLE_DIM,
                 rows: np.ndarray | None = None):
        if kind not in ("categorical", "gaussian", "empirical"):
            raise ContractError(f"unknown prior kind {kind!r}")
        if kind == "categorical" and num_classes < 2:
            raise ContractError("categorical prior needs num_classes >= 2")
        if kind == "empirical":
            if rows is None or len(rows) == 0:
                raise ContractError("empirical prior needs a non-empty row matrix")
            rows = np.asarray(rows, dtype=np.float64)
        self.kind = kind
        self.num_classes = num_classes
        self.dim = dim
        self.rows = rows

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        if self.kind == "categorical":
            idx = rng.integers(0, self.num_classes, size=n)
            out = np.zeros((n, self.num_classes))
            out[np.arange(n), idx] = 1.0
            return out
        if self.kind == "gaussian":
            return rng.standard_normal((n, self.dim))
        idx = rng.integers(0, len(self.rows), size=n)
        return self.rows[idx]


@dataclass(frozen=True)
class PriorSet:
    content: PriorSampler
    style: PriorSampler
    embedding: PriorSampler


def default_priors(num_classes: int, unpaired_rows: np.ndarray) -> PriorSet:
    return PriorSet(
        content=PriorSampler("categorical", num_classes=num_classes),
        style=PriorSampler("gaussian", dim=STYLE_DIM),
        embedding=PriorSampler("empirical", rows=unpaired_rows),
    )


@contextmanager
def frozen(*nets: Net) -> Iterator[None]:
    """Temporarily exclude the given nets' parameters from gradient capture."""
    params = [p for net in nets for p in net.parameters()]
    saved = [p.trainable for p in params]
    for p in params:
        p.trainable = False
    try:
        yield
    finally:
        for p, s in zip(params, saved):
            p.trainable = s


def _check_bounds(breakdown: LossBreakdown) -> None:
    vals = vars(breakdown)
    for name, v in vals.items():
        if not np.isfinite(v):
            raise NumericError(f"loss component {name} is non-finite")
    if not (-1e-12 <= breakdown.recon <= 2.0 + 1e-12):
        raise NumericError(f"cosine reconstruction {breakdown.recon} outside [0, 2]")
    for name in ("ce", "adv_content", "adv_style", "adv_embed",
                 "disc_content", "disc_style", "disc_embed"):
        if vals[name] < -1e-12:
            raise NumericError(f"loss component {name} is negative: {vals[name]}")


def supervised_loss(
    bundle: ComponentBundle,
    tape: Tape,
    y: np.ndarray,
    labels: np.ndarray,
    training: bool = True,
    rng: np.random.Generator | None = None,
) -> tuple[LossBreakdown, Value]:
    """Cross-entropy on the classifier path; touches encoder + content head only."""
    labels = np.asarray(labels)
    if len(y) == 0:
        raise ContractError("supervised batch is empty")
    if (labels < 0).any():
        raise ContractError("supervised batch contains unlabeled rows")
    y_val = constant(ag.as_matrix(y, "embedding batch"))
    logits = bundle.content_logits(y_val, tape, training, rng)
    ce = ag.softmax_cross_entropy(tape, logits, labels)
    breakdown = LossBreakdown(ce=float(ce.data), total=float(ce.data))
    _check_bounds(breakdown)
    return breakdown, ce


def discriminator_loss(tape: Tape | None, disc: Net, real: np.ndarray, fake: np.ndarray) -> Value:
    """Mean of BCE(disc(real), 1) and BCE(disc(fake), 0); fakes arrive detached."""
    if real.shape[1] != fake.shape[1]:
        raise DimensionError(f"real width {real.shape[1]} != fake width {fake.shape[1]}")
    on_real = ag.sigmoid_bce(tape, disc.forward(constant(real), tape), 1.0)
    on_fake = ag.sigmoid_bce(tape, disc.forward(constant(fake), tape), 0.0)
    return ag.weighted_sum(tape, [on_real, on_fake], [0.5, 0.5])


def generator_adversarial_loss(tape: Tape | None, disc: Net, fake: Value) -> Value:
    """Non-saturating objective: push disc(fake) toward the real label."""
    with frozen(disc):
        logits = disc.forward(fake, tape)
        return ag.sigmoid_bce(tape, logits, 1.0)


def unsupervised_losses(
    bundle: ComponentBundle,
    tape: Tape,
    y: np.ndarray,
    priors: PriorSet,
    weights: LossWeights,
    rng: np.random.Generator,
) -> tuple[LossBreakdown, Value]:
    """Adversarial + reconstruction total for an unlabeled batch.

    Content predictions are softmaxed before meeting their discriminator
    (it judges points on the simplex), and the embedding discriminator
    sees decodes of prior draws, not reconstructions: the reconstruction
    path is held by the cosine term instead.
    """
    if len(y) == 0:
        raise ContractError("unsupervised batch is empty")
    b = len(y)
    y_val = constant(ag.as_matrix(y, "embedding batch"))
    c_logits, s = bundle.encode(y_val, tape, training=True, rng=rng)
    c_hat = ag.softmax(tape, c_logits)
    y_hat = bundle.decode(c_hat, s, tape, training=True, rng=rng)

    adv_c = generator_adversarial_loss(tape, bundle.content_disc, c_hat)
    adv_s = generator_adversarial_loss(tape, bundle.style_disc, s)
    prior_embed = bundle.decode(
        constant(priors.content.sample(b, rng)),
        constant(priors.style.sample(b, rng)),
        tape, training=True, rng=rng,
    )
    adv_y = generator_adversarial_loss(tape, bundle.embedding_disc, prior_embed)
    recon = ag.cosine_loss(tape, y_val, y_hat)

    total = ag.weighted_sum(
        tape,
        [adv_c, adv_s, adv_y, recon],
        [weights.content, weights.style, weights.embedding, weights.reconstruction],
    )
    breakdown = LossBreakdown(
        recon=float(recon.data),
        adv_content=float(adv_c.data),
        adv_style=float(adv_s.data),
        adv_embed=float(adv_y.data),
        total=float(total.data),
    )
    _check_bounds(breakdown)
    return breakdown, total


def discriminator_step(
    bundle: ComponentBundle,
    tape: Tape,
    y: np.ndarray,
    priors: PriorSet,
    rng: np.random.Generator,
) -> tuple[LossBreakdown, Value]:
    """Discriminator losses for one unlabeled batch; generator outputs detached."""
    if len(y) == 0:
        raise ContractError("unsupervised batch is empty")
    b = len(y)
    y_mat = ag.as_matrix(y, "embedding batch")

    # fakes computed off-tape: no gradient may flow past the disc inputs
    c_logits, s = bundle.encode(constant(y_mat), None, training=True, rng=rng)
    c_fake = ag.softmax(None, c_logits).data
    s_fake = s.data
    embed_fake = bundle.decode(
        constant(priors.content.sample(b, rng)),
        constant(priors.style.sample(b, rng)),
        None, training=True, rng=rng,
    ).data

    d_c = discriminator_loss(tape, bundle.content_disc, priors.content.sample(b, rng), c_fake)
    d_s = discriminator_loss(tape, bundle.style_disc, priors.style.sample(b, rng), s_fake)
    d_y = discriminator_loss(tape, bundle.embedding_disc, priors.embedding.sample(b, rng), embed_fake)
    total = ag.weighted_sum(tape, [d_c, d_s, d_y], [1.0, 1.0, 1.0])
    breakdown = LossBreakdown(
        disc_content=float(d_c.data),
        disc_style=float(d_s.data),
        disc_embed=float(d_y.data),
    )
    _check_bounds(breakdown)
    return breakdown, total
