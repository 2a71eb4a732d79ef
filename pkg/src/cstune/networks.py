"""The fixed MLP components: shared encoder, content/style heads, decoder,
and the three discriminators.

Widths, activation slopes and dropout rates are hard constants of the
method; `build_bundle` is the only constructor. The content and style
discriminators list no activations between their affine layers in the
method description; stacked affines would collapse to one, so leaky-ReLU
(slope 0.02, matching the embedding discriminator) is inserted between
them and the divergence is recorded in ``ComponentBundle.config``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from . import autograd as ag
from .autograd import Parameter, Tape, Value
from .errors import DimensionError, ParameterError
from .rng import RngState

ENCODER_WIDTH = 8000
CONTENT_FEATURE_WIDTH = 1024
DECODER_WIDTH = 2560
STYLE_DIM = 100
ENCODER_SLOPE = 0.01
DISC_SLOPE = 0.02
DROPOUT_P = 0.3


@dataclass(frozen=True)
class LinearSpec:
    in_dim: int
    out_dim: int


@dataclass(frozen=True)
class LeakyReluSpec:
    slope: float


@dataclass(frozen=True)
class DropoutSpec:
    p: float


LayerSpec = Union[LinearSpec, LeakyReluSpec, DropoutSpec]


@dataclass(frozen=True)
class NetSpec:
    input_dim: int
    layers: tuple[LayerSpec, ...]
    output_dim: int

    def __post_init__(self):
        dim = self.input_dim
        for layer in self.layers:
            if isinstance(layer, LinearSpec):
                if layer.in_dim != dim:
                    raise DimensionError(
                        f"layer expects width {layer.in_dim} but receives {dim}"
                    )
                dim = layer.out_dim
        if dim != self.output_dim:
            raise DimensionError(
                f"spec output_dim {self.output_dim} but layers end at {dim}"
            )


def encoder_spec(embed_dim: int) -> NetSpec:
    return NetSpec(embed_dim, (
        LinearSpec(embed_dim, ENCODER_WIDTH),
        LeakyReluSpec(ENCODER_SLOPE),
        DropoutSpec(DROPOUT_P),
    ), ENCODER_WIDTH)


def content_head_spec(num_classes: int) -> NetSpec:
    return NetSpec(ENCODER_WIDTH, (
        LinearSpec(ENCODER_WIDTH, CONTENT_FEATURE_WIDTH),
        LeakyReluSpec(ENCODER_SLOPE),
        LinearSpec(CONTENT_FEATURE_WIDTH, num_classes),
    ), num_classes)


def style_head_spec() -> NetSpec:
    return NetSpec(ENCODER_WIDTH, (
        LinearSpec(ENCODER_WIDTH, STYLE_DIM),
    ), STYLE_DIM)


def decoder_spec(embed_dim: int, num_classes: int) -> NetSpec:
    latent = num_classes + STYLE_DIM
    return NetSpec(latent, (
        LinearSpec(latent, DECODER_WIDTH),
        LeakyReluSpec(ENCODER_SLOPE),
        DropoutSpec(DROPOUT_P),
        LinearSpec(DECODER_WIDTH, DECODER_WIDTH),
        LeakyReluSpec(ENCODER_SLOPE),
        DropoutSpec(DROPOUT_P),
        LinearSpec(DECODER_WIDTH, embed_dim),
    ), embed_dim)


def _disc_spec(widths: tuple[int, ...], insert_activations: bool) -> NetSpec:
    layers: list[LayerSpec] = []
    for i in range(len(widths) - 1):
        layers.append(LinearSpec(widths[i], widths[i + 1]))
        if insert_activations and i < len(widths) - 2:
            layers.append(LeakyReluSpec(DISC_SLOPE))
    return NetSpec(widths[0], tuple(layers), widths[-1])


def content_disc_spec(num_classes: int, insert_activations: bool = True) -> NetSpec:
    return _disc_spec((num_classes, 500, 500, 1), insert_activations)


def style_disc_spec(insert_activations: bool = True) -> NetSpec:
    return _disc_spec((STYLE_DIM, 50, 500, 1), insert_activations)


def embedding_disc_spec(embed_dim: int) -> NetSpec:
    return NetSpec(embed_dim, (
        LinearSpec(embed_dim, 128),
        LeakyReluSpec(DISC_SLOPE),
        LinearSpec(128, 64),
        LeakyReluSpec(DISC_SLOPE),
        LinearSpec(64, 32),
        LeakyReluSpec(DISC_SLOPE),
        LinearSpec(32, 1),
    ), 1)


def init_parameters(spec: NetSpec, rng: np.random.Generator, prefix: str = "net") -> list[tuple[Parameter, Parameter]]:
    """Weights uniform in +-1/sqrt(fan_in), biases exactly zero.

    The gentle gain keeps an untrained classifier's logits near zero, so
    its cross-entropy starts at ~log(num_classes).
    """
    pairs = []
    idx = 0
    for layer in spec.layers:
        if isinstance(layer, LinearSpec):
            bound = 1.0 / np.sqrt(layer.in_dim)
            w = rng.uniform(-bound, bound, size=(layer.in_dim, layer.out_dim))
            pairs.append((
                Parameter(w, name=f"{prefix}/{idx}/w"),
                Parameter(np.zeros(layer.out_dim), name=f"{prefix}/{idx}/b"),
            ))
            idx += 1
    return pairs


class Net:
    """A parameterized NetSpec instance."""

    def __init__(self, spec: NetSpec, rng: np.random.Generator, name: str):
        self.spec = spec
        self.name = name
        self._pairs = init_parameters(spec, rng, prefix=name)

    def parameters(self) -> list[Parameter]:
        return [p for pair in self._pairs for p in pair]

    def parameter_count(self) -> int:
        return sum(p.data.size for p in self.parameters())

    def forward(
        self,
        x: Value,
        tape: Tape | None = None,
        training: bool = False,
        rng: np.random.Generator | None = None,
        upto: int | None = None,
    ) -> Value:
        """Run the layer stack; `upto` truncates after that many layers."""
        if x.data.shape[1] != self.spec.input_dim:
            raise DimensionError(
                f"{self.name} expects width {self.spec.input_dim}, got {x.data.shape}"
            )
        h = x
        lin = 0
        layers = self.spec.layers if upto is None else self.spec.layers[:upto]
        for layer in layers:
            if isinstance(layer, LinearSpec):
                w, b = self._pairs[lin]
                h = ag.linear(tape, h, w, b)
                lin += 1
            elif isinstance(layer, LeakyReluSpec):
                h = ag.leaky_relu(tape, h, layer.slope)
            else:
                h = ag.dropout(tape, h, layer.p, training, rng)
        return h


class ComponentBundle:
    """All trainable components plus the build-time configuration record."""

    def __init__(self, embed_dim: int, num_classes: int, rng: RngState,
                 insert_disc_activations: bool = True):
        if embed_dim < 1:
            raise ParameterError(f"embed_dim must be >= 1, got {embed_dim}")
        if num_classes < 2:
            raise ParameterError(f"num_classes must be >= 2, got {num_classes}")
        self.embed_dim = embed_dim
        self.num_classes = num_classes
        self.style_dim = STYLE_DIM
        g = rng.stream("init")
        self.shared_encoder = Net(encoder_spec(embed_dim), g, "shared_encoder")
        self.content_head = Net(content_head_spec(num_classes), g, "content_head")
        self.style_head = Net(style_head_spec(), g, "style_head")
        self.decoder = Net(decoder_spec(embed_dim, num_classes), g, "decoder")
        self.content_disc = Net(content_disc_spec(num_classes, insert_disc_activations), g, "content_disc")
        self.style_disc = Net(style_disc_spec(insert_disc_activations), g, "style_disc")
        self.embedding_disc = Net(embedding_disc_spec(embed_dim), g, "embedding_disc")
        self.config = {
            "embed_dim": embed_dim,
            "num_classes": num_classes,
            "style_dim": STYLE_DIM,
            "divergences": ["disc_content_activations_inserted", "disc_style_activations_inserted"]
            if insert_disc_activations else [],
        }

    # -- parameter groups ------------------------------------------------
    def component_nets(self) -> list[Net]:
        return [self.shared_encoder, self.content_head, self.style_head, self.decoder]

    def discriminator_nets(self) -> list[Net]:
        return [self.content_disc, self.style_disc, self.embedding_disc]

    def component_parameters(self) -> list[Parameter]:
        return [p for net in self.component_nets() for p in net.parameters()]

    def supervised_parameters(self) -> list[Parameter]:
        return self.shared_encoder.parameters() + self.content_head.parameters()

    def discriminator_parameters(self) -> list[Parameter]:
        return [p for net in self.discriminator_nets() for p in net.parameters()]

    def all_parameters(self) -> list[Parameter]:
        return self.component_parameters() + self.discriminator_parameters()

    # -- forward paths ---------------------------------------------------
    def encode(
        self,
        y: Value,
        tape: Tape | None = None,
        training: bool = False,
        rng: np.random.Generator | None = None,
    ) -> tuple[Value, Value]:
        """One shared-encoder pass feeding both heads: (content logits, style)."""
        h = self.shared_encoder.forward(y, tape, training, rng)
        c_logits = self.content_head.forward(h, tape, training, rng)
        s = self.style_head.forward(h, tape, training, rng)
        return c_logits, s

    def content_logits(
        self,
        y: Value,
        tape: Tape | None = None,
        training: bool = False,
        rng: np.random.Generator | None = None,
    ) -> Value:
        """Classifier path only (no style branch)."""
        h = self.shared_encoder.forward(y, tape, training, rng)
        return self.content_head.forward(h, tape, training, rng)

    def content_features(self, y: Value) -> Value:
        """Penultimate classifier activation (post leaky-ReLU), eval mode."""
        h = self.shared_encoder.forward(y)
        return self.content_head.forward(h, upto=2)

    def decode(
        self,
        c: Value,
        s: Value,
        tape: Tape | None = None,
        training: bool = False,
        rng: np.random.Generator | None = None,
    ) -> Value:
        """Reconstruct embeddings from [content | style]."""
        if c.data.shape[1] != self.num_classes:
            raise DimensionError(
                f"content width {c.data.shape[1]} != num_classes {self.num_classes}"
            )
        if s.data.shape[1] != self.style_dim:
            raise DimensionError(
                f"style width {s.data.shape[1]} != style_dim {self.style_dim}"
            )
        latent = ag.concat_cols(tape, c, s)
        return self.decoder.forward(latent, tape, training, rng)

    def discriminate(self, disc: Net, v: Value, tape: Tape | None = None) -> Value:
        """Raw single-logit output; the sigmoid lives inside the BCE loss."""
        return disc.forward(v, tape)


def build_bundle(
    embed_dim: int,
    num_classes: int,
    rng: RngState,
    insert_disc_activations: bool = True,
) -> ComponentBundle:
    return ComponentBundle(embed_dim, num_classes, rng, insert_disc_activations)
