"""Autodiff core: conv/deconv against brute-force oracles, activations, dropout, Adam, gradient checks."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lhic.errors import GraphError, NonFiniteError, RangeError, ShapeError
from lhic.nn import functional as F
from lhic.nn.gradcheck import check_gradients
from lhic.nn.layers import Conv2d, ConvTranspose2d, Dropout, PReLU
from lhic.nn.optim import Adam, AdamState, adam_step
from lhic.nn.tensor import Parameter, Tensor


def direct_conv(x, w, b, stride):
    """Loop-by-loop 3x3 cross-correlation with zero padding 1."""
    n, cin, h, wd = x.shape
    cout = w.shape[0]
    ho, wo = (h - 1) // stride + 1, (wd - 1) // stride + 1
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    out = np.zeros((n, cout, ho, wo))
    for bi in range(n):
        for o in range(cout):
            for i in range(ho):
                for j in range(wo):
                    patch = xp[bi, :, i * stride : i * stride + 3, j * stride : j * stride + 3]
                    out[bi, o, i, j] = np.sum(patch * w[o]) + (b[o] if b is not None else 0.0)
    return out


def direct_deconv(x, w, b, stride):
    """Transposed conv by scattering each input pixel's kernel footprint (weights in x out x 3 x 3)."""
    n, cin, h, wd = x.shape
    cout = w.shape[1]
    H, W = h * stride, wd * stride
    out = np.zeros((n, cout, H + 2, W + 2))
    for bi in range(n):
        for c in range(cin):
            for i in range(h):
                for j in range(wd):
                    out[bi, :, i * stride : i * stride + 3, j * stride : j * stride + 3] += x[bi, c, i, j] * w[c]
    out = out[:, :, 1 : H + 1, 1 : W + 1]
    if b is not None:
        out += b[None, :, None, None]
    return out


def t64(a, grad=False):
    return Tensor(np.asarray(a, dtype=np.float64), requires_grad=grad, dtype=np.float64)


class TestConv:
    def test_all_ones_stride2_example(self):
        x = t64(np.ones((1, 1, 4, 4)))
        w = t64(np.ones((1, 1, 3, 3)))
        y = F.conv2d(x, w, stride=2).data[0, 0]
        np.testing.assert_array_equal(y, [[4, 6], [6, 9]])
        np.testing.assert_array_equal(y, direct_conv(x.data, w.data, None, 2)[0, 0])

    def test_identity_kernel(self, rng):
        x = rng.normal(size=(2, 3, 5, 7))
        w = np.zeros((3, 3, 3, 3))
        for c in range(3):
            w[c, c, 1, 1] = 1.0
        np.testing.assert_allclose(F.conv2d(t64(x), t64(w)).data, x, atol=1e-12)

    def test_zero_kernel_gives_bias(self, rng):
        x = t64(rng.normal(size=(1, 2, 6, 6)))
        b = t64([0.5, -1.0, 2.0])
        y = F.conv2d(x, t64(np.zeros((3, 2, 3, 3))), b).data
        np.testing.assert_array_equal(y, np.broadcast_to(b.data[None, :, None, None], y.shape))

    @pytest.mark.parametrize(("stride", "hw"), [(1, (4, 4)), (1, (5, 7)), (1, (1, 1)), (2, (4, 4)), (2, (6, 2)), (2, (2, 8))])
    def test_matches_direct_oracle(self, rng, stride, hw):
        x = rng.normal(size=(2, 3, *hw))
        w = rng.normal(size=(4, 3, 3, 3))
        b = rng.normal(size=4)
        np.testing.assert_allclose(F.conv2d(t64(x), t64(w), t64(b), stride).data, direct_conv(x, w, b, stride), atol=1e-10)

    def test_shape_errors_name_dims(self):
        with pytest.raises(ShapeError, match="channel"):
            F.conv2d(t64(np.zeros((1, 2, 4, 4))), t64(np.zeros((3, 3, 3, 3))))
        with pytest.raises(ShapeError):
            F.conv2d(t64(np.zeros((2, 4, 4))), t64(np.zeros((3, 2, 3, 3))))
        with pytest.raises(ShapeError, match="H=5, W=7"):
            F.conv2d(t64(np.zeros((1, 2, 5, 7))), t64(np.zeros((3, 2, 3, 3))), stride=2)


class TestDeconv:
    @pytest.mark.parametrize("hw", [(1, 1), (2, 3), (4, 4)])
    def test_matches_scatter_oracle(self, rng, hw):
        x = rng.normal(size=(2, 3, *hw))
        w = rng.normal(size=(3, 5, 3, 3))
        b = rng.normal(size=5)
        np.testing.assert_allclose(F.conv_transpose2d(t64(x), t64(w), t64(b)).data, direct_deconv(x, w, b, 2), atol=1e-10)

    def test_zero_input_gives_bias(self, rng):
        b = rng.normal(size=4)
        y = F.conv_transpose2d(t64(np.zeros((1, 2, 3, 5))), t64(rng.normal(size=(2, 4, 3, 3))), t64(b)).data
        assert y.shape == (1, 4, 6, 10)
        np.testing.assert_array_equal(y, np.broadcast_to(b[None, :, None, None], y.shape))

    @settings(max_examples=30, deadline=None)
    @given(
        h=st.integers(1, 6),
        w=st.integers(1, 6),
        cin=st.integers(1, 4),
        cout=st.integers(1, 4),
        seed=st.integers(0, 2**32 - 1),
    )
    def test_adjoint_of_strided_conv(self, h, w, cin, cout, seed):
        """<conv(x), y> == <x, deconv(y)> for a shared kernel."""
        r = np.random.default_rng(seed)
        kern = r.normal(size=(cout, cin, 3, 3))  # conv: out x in
        x = r.normal(size=(2, cin, 2 * h, 2 * w))
        y = r.normal(size=(2, cout, h, w))
        lhs = np.sum(F.conv2d(t64(x), t64(kern), stride=2).data * y)
        # the transposed op takes weights as in x out with "in" = conv's output channels
        rhs = np.sum(x * F.conv_transpose2d(t64(y), t64(kern)).data)
        assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(lhs))

    def test_shape_contract(self):
        layer = ConvTranspose2d(3, 5, rng=np.random.default_rng(0))
        assert layer(Tensor(np.zeros((2, 3, 4, 6)))).shape == (2, 5, 8, 12)
        conv = Conv2d(3, 5, stride=2, rng=np.random.default_rng(0))
        assert conv(Tensor(np.zeros((2, 3, 8, 12)))).shape == (2, 5, 4, 6)


class TestActivations:
    def test_prelu_examples(self):
        a = t64([0.25])
        y = F.prelu(t64(np.array([-2.0, 0.0, 3.0]).reshape(1, 1, 1, 3)), a).data.ravel()
        np.testing.assert_array_equal(y, [-0.5, 0.0, 3.0])

    def test_prelu_default_slope(self):
        assert np.all(PReLU(4).weight.data == np.float32(0.25))

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1))
    def test_prelu_zero_slope_is_relu(self, seed):
        x = np.random.default_rng(seed).normal(size=(2, 3, 4, 4))
        np.testing.assert_array_equal(F.prelu(t64(x), t64(np.zeros(3))).data, F.relu(t64(x)).data)

    def test_prelu_is_per_channel(self):
        x = -np.ones((1, 2, 1, 1))
        y = F.prelu(t64(x), t64([0.1, 0.5])).data.ravel()
        np.testing.assert_allclose(y, [-0.1, -0.5])

    def test_tanh_reference(self):
        y = F.tanh(t64([[1.0, -1.0, 0.0]])).data.ravel()
        np.testing.assert_allclose(y, [math.tanh(1.0), -math.tanh(1.0), 0.0], rtol=0, atol=1e-15)
        assert abs(y[0] - 0.7615941559557649) < 1e-15


class TestDropout:
    def test_p_zero_is_identity(self, rng):
        x = t64(rng.normal(size=(1, 2, 3, 3)))
        assert F.dropout(x, 0.0, True, 0) is x

    def test_eval_is_identity(self, rng):
        x = t64(rng.normal(size=(1, 2, 3, 3)))
        layer = Dropout(0.2, seed=0)
        layer.eval()
        np.testing.assert_array_equal(layer(x).data, x.data)

    def test_inverted_scaling_keeps_mean(self):
        x = t64(np.ones((1, 1, 1000, 100)))
        y = F.dropout(x, 0.5, True, 7).data
        assert abs(y.mean() - 1.0) < 0.05
        np.testing.assert_allclose(y[y != 0], 2.0)
        assert abs(np.mean(F.dropout(x, 0.2, True, 8).data) - 1.0) < 0.05

    @pytest.mark.parametrize("p", [1.0, 1.5, -0.1])
    def test_bad_probability_rejected(self, p):
        with pytest.raises(RangeError):
            F.dropout(t64(np.ones((1, 1, 2, 2))), p, True, 0)

    def test_same_seed_same_mask(self):
        x = t64(np.ones((1, 3, 8, 8)))
        np.testing.assert_array_equal(F.dropout(x, 0.5, True, 3).data, F.dropout(x, 0.5, True, 3).data)


class TestBackward:
    def test_sum_of_product_gradient(self, rng):
        xv = rng.normal(size=(2, 3))
        w = Parameter(rng.normal(size=(2, 3)), dtype=np.float64)
        (w * t64(xv)).sum().backward()
        np.testing.assert_allclose(w.grad, xv)

    def test_unused_parameter_gets_no_gradient(self, rng):
        used = Parameter(rng.normal(size=3), dtype=np.float64)
        unused = Parameter(rng.normal(size=3), dtype=np.float64)
        used.square().sum().backward()
        assert unused.grad is None or np.all(unused.grad == 0)

    def test_backward_without_graph(self):
        with pytest.raises(GraphError):
            Tensor(np.ones(3)).sum().backward()

    def test_nonscalar_backward_needs_grad(self):
        p = Parameter(np.ones(3))
        with pytest.raises(GraphError):
            (p * p).backward()

    def test_gradients_accumulate_over_shared_use(self):
        p = Parameter(np.array([3.0]), dtype=np.float64)
        (p * p + p).sum().backward()
        np.testing.assert_allclose(p.grad, [7.0])

    def test_broadcast_gradient_reduces(self):
        b = Parameter(np.zeros((1, 3, 1, 1)), dtype=np.float64)
        (t64(np.ones((2, 3, 4, 5))) + b).sum().backward()
        np.testing.assert_allclose(b.grad.ravel(), [40.0, 40.0, 40.0])


def _projected(out_fn, shape, seed=0):
    proj = t64(np.random.default_rng(seed).normal(size=shape))
    return lambda: (out_fn() * proj).sum()


class TestGradcheck:
    """Central differences at float64, rel. error <= 1e-4 per parameter tensor."""

    def test_conv_layer(self, rng):
        layer = Conv2d(3, 4, stride=2, rng=rng).to(np.float64)
        x = t64(rng.normal(size=(2, 3, 6, 6)), grad=True)
        errs = check_gradients(_projected(lambda: layer(x), (2, 4, 3, 3)), {"x": x, "w": layer.weight, "b": layer.bias})
        assert max(errs.values()) < 1e-4, errs

    def test_deconv_layer(self, rng):
        layer = ConvTranspose2d(3, 4, rng=rng).to(np.float64)
        x = t64(rng.normal(size=(2, 3, 3, 4)), grad=True)
        errs = check_gradients(_projected(lambda: layer(x), (2, 4, 6, 8)), {"x": x, "w": layer.weight, "b": layer.bias})
        assert max(errs.values()) < 1e-4, errs

    def test_prelu_and_tanh(self, rng):
        a = Parameter(np.array([0.25, 0.1, 0.4]), dtype=np.float64)
        x = t64(rng.normal(size=(2, 3, 4, 4)), grad=True)
        errs = check_gradients(_projected(lambda: F.tanh(F.prelu(x, a)), (2, 3, 4, 4)), {"x": x, "a": a}, max_entries=None)
        assert max(errs.values()) < 1e-4, errs

    def test_dropout_with_fixed_mask(self, rng):
        x = t64(rng.normal(size=(1, 2, 5, 5)), grad=True)
        errs = check_gradients(_projected(lambda: F.dropout(x, 0.3, True, 11), x.shape), {"x": x}, max_entries=None)
        assert errs["x"] < 1e-4


class TestAdam:
    def test_zero_gradient_leaves_params(self):
        p = {"w": np.array([1.0, -2.0])}
        state = AdamState(lr=1e-3)
        adam_step(p, {"w": np.zeros(2)}, state)
        np.testing.assert_array_equal(p["w"], [1.0, -2.0])

    def test_first_step_moves_by_lr(self):
        """Bias-corrected first step is lr * g / (|g| + eps)."""
        p = {"w": np.array([0.5, 0.5])}
        adam_step(p, {"w": np.array([1.0, -3.0])}, AdamState(lr=1e-3))
        np.testing.assert_allclose(p["w"], [0.5 - 1e-3, 0.5 + 1e-3], rtol=0, atol=1e-10)

    def test_hand_computed_two_steps(self):
        lr, b1, b2, eps = 0.01, 0.9, 0.999, 1e-8
        w, m, v = 1.0, 0.0, 0.0
        grads = [0.2, -0.5]
        for t, g in enumerate(grads, start=1):
            m = b1 * m + (1 - b1) * g
            v = b2 * v + (1 - b2) * g * g
            w -= lr * (m / (1 - b1**t)) / (math.sqrt(v / (1 - b2**t)) + eps)
        p = {"w": np.array([1.0])}
        state = AdamState(lr=lr)
        for g in grads:
            adam_step(p, {"w": np.array([g])}, state)
        assert abs(p["w"][0] - w) < 1e-12

    def test_sign_symmetry(self):
        a, b = {"w": np.array([0.0])}, {"w": np.array([0.0])}
        sa, sb = AdamState(lr=0.1), AdamState(lr=0.1)
        for g in (0.3, 1.2, -0.4):
            adam_step(a, {"w": np.array([g])}, sa)
            adam_step(b, {"w": np.array([-g])}, sb)
        assert a["w"][0] == -b["w"][0]

    def test_nonfinite_gradient_names_parameter(self):
        with pytest.raises(NonFiniteError, match="conv.weight"):
            adam_step({"conv.weight": np.zeros(2)}, {"conv.weight": np.array([np.nan, 0.0])}, AdamState())

    def test_optimizer_drives_quadratic_down(self):
        p = Parameter(np.array([3.0, -2.0]), dtype=np.float64)
        opt = Adam([("p", p)], lr=0.1)
        for _ in range(200):
            opt.zero_grad()
            p.square().sum().backward()
            opt.step()
        assert np.all(np.abs(p.data) < 0.1)


def test_forward_backward_deterministic():
    def run():
        r = np.random.default_rng(5)
        conv = Conv2d(3, 4, stride=2, rng=r)
        x = Tensor(r.normal(size=(2, 3, 8, 8)))
        loss = F.dropout(F.prelu(conv(x), Parameter(np.full(4, 0.25))), 0.2, True, 9).square().mean()
        loss.backward()
        return loss.data.tobytes() + conv.weight.grad.tobytes()

    assert run() == run()
