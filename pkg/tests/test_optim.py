import numpy as np
import pytest

from cstune.autograd import Parameter
from cstune.errors import NumericError, ParameterError
from cstune.optim import AdamW, AdamWConfig, lr_at


def _param(value, name="p"):
    return Parameter(np.asarray(value, dtype=float), name)


def test_single_step_hand_computed():
    p = _param([[1.0]])
    p.grad[...] = 1.0
    opt = AdamW([p], AdamWConfig(weight_decay=0.0))
    opt.step()
    # m-hat = v-hat = 1 at step 1, so theta' = 1 - lr / (1 + eps)
    expected = 1.0 - 5e-5 * (1.0 / (1.0 + 1e-8))
    assert p.data[0, 0] == pytest.approx(expected, abs=1e-15)


def test_zero_gradient_leaves_parameter_unchanged():
    p = _param([[2.5, -1.0]])
    opt = AdamW([p], AdamWConfig(weight_decay=0.0))
    before = p.data.copy()
    for _ in range(10):
        opt.step()
    np.testing.assert_array_equal(p.data, before)


def test_pure_decay_is_geometric_and_beta_independent():
    cfg_a = AdamWConfig(lr=1e-3, weight_decay=0.1, beta1=0.9, beta2=0.999)
    cfg_b = AdamWConfig(lr=1e-3, weight_decay=0.1, beta1=0.5, beta2=0.8)
    traj = []
    for cfg in (cfg_a, cfg_b):
        p = _param([[1.0, -3.0]])
        opt = AdamW([p], cfg)
        states = []
        for _ in range(25):
            opt.step()
            states.append(p.data.copy())
        traj.append(states)
    factor = 1.0 - 1e-3 * 0.1
    expected = np.array([[1.0, -3.0]])
    for t, (a, b) in enumerate(zip(*traj), start=1):
        expected = expected * factor
        np.testing.assert_array_equal(a, b)
        np.testing.assert_allclose(a, expected, rtol=1e-14)


def test_converges_to_quadratic_minimizer():
    # curvature-varied quadratic: f = 0.5 * sum a_i (x_i - b_i)^2
    rng = np.random.default_rng(0)
    a = rng.uniform(0.5, 5.0, size=8)
    b = rng.standard_normal(8)
    p = _param((b + rng.uniform(-1e-3, 1e-3, size=8)).reshape(1, 8))
    opt = AdamW([p], AdamWConfig(lr=5e-7, weight_decay=0.0))
    for _ in range(5000):
        p.grad[...] = a * (p.data[0] - b)
        opt.step()
    assert np.abs(p.data[0] - b).max() < 1e-6


def test_nonfinite_gradient_aborts():
    p = _param([[1.0]])
    p.grad[...] = np.nan
    opt = AdamW([p], AdamWConfig())
    with pytest.raises(NumericError, match="p"):
        opt.step()


def test_subset_step_leaves_others_bit_identical():
    p1 = _param([[1.0]], "a")
    p2 = _param([[2.0]], "b")
    p1.grad[...] = 0.3
    p2.grad[...] = 0.7
    opt = AdamW([p1, p2], AdamWConfig(weight_decay=0.05))
    before = p2.data.copy()
    opt.step([p1])
    np.testing.assert_array_equal(p2.data, before)
    assert p2.grad[0, 0] == 0.7  # untouched, not consumed
    assert opt.state.slots["b"].step == 0


def test_lr_at_schedule():
    cfg = AdamWConfig(lr=1e-3, warmup_fraction=0.0)
    assert lr_at(1, 100, cfg) == 1e-3
    cfg = AdamWConfig(lr=1e-3, warmup_fraction=0.1)
    assert lr_at(50, 1000, cfg) == pytest.approx(0.5e-3)
    assert lr_at(100, 1000, cfg) == 1e-3
    assert lr_at(101, 1000, cfg) == 1e-3
    assert lr_at(999, 1000, cfg) == 1e-3
    ramp = [lr_at(s, 1000, cfg) for s in range(1, 1001)]
    assert all(x <= y + 1e-18 for x, y in zip(ramp, ramp[1:]))


def test_config_validation():
    with pytest.raises(ParameterError):
        AdamWConfig(lr=0.0)
    with pytest.raises(ParameterError):
        AdamWConfig(beta1=1.0)
    with pytest.raises(ParameterError):
        AdamWConfig(warmup_fraction=1.0)


def test_duplicate_parameter_names_rejected():
    with pytest.raises(ParameterError):
        AdamW([_param([[1.0]], "x"), _param([[2.0]], "x")], AdamWConfig())
