import numpy as np
import pytest

from cstune.autograd import Tape, constant
from cstune.errors import DimensionError, ParameterError
from cstune.networks import (
    ComponentBundle,
    DropoutSpec,
    LeakyReluSpec,
    LinearSpec,
    build_bundle,
    content_disc_spec,
    content_head_spec,
    decoder_spec,
    embedding_disc_spec,
    encoder_spec,
    init_parameters,
    style_disc_spec,
    style_head_spec,
)
from cstune.rng import RngState


# Literal transcriptions of the published layer tables. The two divergence
# rows are the leaky-ReLUs inserted between the content/style
# discriminators' affine layers (they list none; stacked affines collapse).
def expected_encoder(d):
    return (LinearSpec(d, 8000), LeakyReluSpec(0.01), DropoutSpec(0.3))


def expected_content_head(k):
    return (LinearSpec(8000, 1024), LeakyReluSpec(0.01), LinearSpec(1024, k))


def expected_style_head():
    return (LinearSpec(8000, 100),)


def expected_decoder(d, k):
    return (
        LinearSpec(k + 100, 2560), LeakyReluSpec(0.01), DropoutSpec(0.3),
        LinearSpec(2560, 2560), LeakyReluSpec(0.01), DropoutSpec(0.3),
        LinearSpec(2560, d),
    )


def expected_content_disc(k):
    return (
        LinearSpec(k, 500), LeakyReluSpec(0.02),
        LinearSpec(500, 500), LeakyReluSpec(0.02),
        LinearSpec(500, 1),
    )


def expected_style_disc():
    return (
        LinearSpec(100, 50), LeakyReluSpec(0.02),
        LinearSpec(50, 500), LeakyReluSpec(0.02),
        LinearSpec(500, 1),
    )


def expected_embedding_disc(d):
    return (
        LinearSpec(d, 128), LeakyReluSpec(0.02),
        LinearSpec(128, 64), LeakyReluSpec(0.02),
        LinearSpec(64, 32), LeakyReluSpec(0.02),
        LinearSpec(32, 1),
    )


@pytest.mark.parametrize("d,k", [(768, 10), (64, 10), (384, 4)])
def test_specs_match_published_tables(d, k):
    assert encoder_spec(d).layers == expected_encoder(d)
    assert content_head_spec(k).layers == expected_content_head(k)
    assert style_head_spec().layers == expected_style_head()
    assert decoder_spec(d, k).layers == expected_decoder(d, k)
    assert content_disc_spec(k).layers == expected_content_disc(k)
    assert style_disc_spec().layers == expected_style_disc()
    assert embedding_disc_spec(d).layers == expected_embedding_disc(d)


def test_divergence_flags_recorded_in_config():
    bundle = build_bundle(32, 4, RngState(0))
    assert "disc_content_activations_inserted" in bundle.config["divergences"]
    assert "disc_style_activations_inserted" in bundle.config["divergences"]
    bare = build_bundle(32, 4, RngState(0), insert_disc_activations=False)
    assert bare.config["divergences"] == []
    assert all(
        not isinstance(layer, LeakyReluSpec) for layer in bare.content_disc.spec.layers
    )


def test_shared_encoder_parameter_count_768():
    bundle = build_bundle(768, 10, RngState(0))
    assert bundle.shared_encoder.parameter_count() == 768 * 8000 + 8000 == 6_152_000


def test_decoder_input_width_is_classes_plus_style():
    bundle = build_bundle(768, 10, RngState(0))
    assert bundle.decoder.spec.input_dim == 110


def test_four_class_content_head_width():
    bundle = build_bundle(768, 4, RngState(0))
    assert bundle.content_head.spec.output_dim == 4


def test_encode_shapes_and_determinism():
    bundle = build_bundle(48, 7, RngState(1))
    y = constant(np.random.default_rng(0).standard_normal((1, 48)))
    c, s = bundle.encode(y)
    assert c.data.shape == (1, 7)
    assert s.data.shape == (1, 100)
    c2, s2 = bundle.encode(y)
    np.testing.assert_array_equal(c.data, c2.data)
    np.testing.assert_array_equal(s.data, s2.data)
    assert np.isfinite(c.data).all() and np.isfinite(s.data).all()


def test_encode_runs_shared_encoder_once():
    bundle = build_bundle(16, 3, RngState(2))
    tape = Tape()
    bundle.encode(constant(np.zeros((2, 16))), tape)
    # eval mode records: shared linear+lrelu, content linear+lrelu+linear,
    # style linear = 6. A second encoder pass would add two more.
    assert len(tape) == 6


def test_decode_shape_and_determinism():
    bundle = build_bundle(384, 10, RngState(3))
    c = constant(np.random.default_rng(1).standard_normal((3, 10)))
    s = constant(np.random.default_rng(2).standard_normal((3, 100)))
    out = bundle.decode(c, s)
    assert out.data.shape == (3, 384)
    out2 = bundle.decode(c, s)
    np.testing.assert_array_equal(out.data, out2.data)


def test_decode_zero_latent_hits_bias_path():
    bundle = build_bundle(24, 5, RngState(4))
    out = bundle.decode(constant(np.zeros((2, 5))), constant(np.zeros((2, 100))))
    assert np.isfinite(out.data).all()
    np.testing.assert_array_equal(out.data[0], out.data[1])


def test_encode_decode_round_trip_shape():
    for d, k in [(8, 2), (64, 10), (200, 4)]:
        bundle = build_bundle(d, k, RngState(5))
        y = constant(np.random.default_rng(3).standard_normal((3, d)))
        c, s = bundle.encode(y)
        from cstune.autograd import softmax

        out = bundle.decode(softmax(None, c), s)
        assert out.data.shape == y.data.shape


def test_discriminators_emit_one_logit_per_row():
    bundle = build_bundle(768, 10, RngState(6))
    rng = np.random.default_rng(4)
    out = bundle.discriminate(bundle.content_disc, constant(rng.standard_normal((4, 10))))
    assert out.data.shape == (4, 1)
    out = bundle.discriminate(bundle.embedding_disc, constant(rng.standard_normal((5, 768))))
    assert out.data.shape == (5, 1)


def test_style_disc_rejects_wrong_width():
    bundle = build_bundle(32, 4, RngState(7))
    ok = bundle.discriminate(bundle.style_disc, constant(np.zeros((2, 100))))
    assert ok.data.shape == (2, 1)
    with pytest.raises(DimensionError, match="100"):
        bundle.discriminate(bundle.style_disc, constant(np.zeros((2, 99))))


def test_init_deterministic_and_bounded():
    spec = content_head_spec(10)
    a = init_parameters(spec, RngState(42).stream("init"), "x")
    b = init_parameters(spec, RngState(42).stream("init"), "x")
    for (wa, ba), (wb, bb) in zip(a, b):
        np.testing.assert_array_equal(wa.data, wb.data)
        np.testing.assert_array_equal(ba.data, bb.data)
    w0 = a[0][0].data  # Linear(8000 -> 1024)
    bound = 1.0 / np.sqrt(8000)
    assert np.abs(w0).max() <= bound
    assert np.abs(w0).max() > 0.99 * bound  # scaling actually uses fan-in
    for _, bias in a:
        np.testing.assert_array_equal(bias.data, 0.0)


def test_build_bundle_rejects_bad_dims():
    with pytest.raises(ParameterError):
        build_bundle(0, 10, RngState(0))
    with pytest.raises(ParameterError):
        build_bundle(10, 1, RngState(0))


def test_parameter_groups_are_disjoint_and_complete():
    bundle = build_bundle(16, 3, RngState(8))
    comp = {p.name for p in bundle.component_parameters()}
    disc = {p.name for p in bundle.discriminator_parameters()}
    assert not comp & disc
    assert comp | disc == {p.name for p in bundle.all_parameters()}
    sup = {p.name for p in bundle.supervised_parameters()}
    assert sup < comp
    assert all(n.startswith(("shared_encoder", "content_head")) for n in sup)
