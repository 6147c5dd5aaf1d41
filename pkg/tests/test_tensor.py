import numpy as np
import pytest

from gradcheck import LAYERS, TOL, adjointness, check
from oracles import conv3d_loops, conv_transpose3d_zero_stuffed
from sdfgen.nn import GraphError, Parameter, Tensor, no_grad
from sdfgen.nn import tensor as T


@pytest.mark.parametrize("name", sorted(LAYERS))
def test_gradient_matches_finite_differences(name):
    rng = np.random.default_rng([7] + [ord(c) for c in name])
    for _ in range(20):
        fn, arrays = LAYERS[name](rng)
        assert check(fn, arrays, rng) < TOL


def test_conv_adjointness(rng):
    assert adjointness(rng, 20) < 1e-10


def test_conv_sum_of_ones():
    y = T.conv3d(Tensor(np.ones((1, 1, 3, 3, 3))), Tensor(np.ones((1, 1, 3, 3, 3))))
    assert y.shape == (1, 1, 1, 1, 1) and y.item() == 27.0


def test_conv_identity_kernel(rng):
    x = rng.normal(size=(2, 1, 5, 4, 6))
    w = np.zeros((1, 1, 3, 3, 3))
    w[0, 0, 1, 1, 1] = 1
    np.testing.assert_array_equal(T.conv3d(Tensor(x), Tensor(w), padding=1).data, x)


@pytest.mark.parametrize("stride, pad", [(1, 0), (1, 1), (2, 2), (2, 1)])
def test_conv_matches_loop_oracle(rng, stride, pad):
    x = rng.normal(size=(2, 3, 8, 8, 8))
    w = rng.normal(size=(2, 3, 5, 5, 5))
    b = rng.normal(size=2)
    np.testing.assert_allclose(T.conv3d(Tensor(x), Tensor(w), Tensor(b), stride, pad).data,
                               conv3d_loops(x, w, b, stride, pad), rtol=0, atol=1e-12)


def test_upconv_doubles_4_to_8(rng):
    y = T.conv_transpose3d(Tensor(rng.normal(size=(1, 3, 4, 4, 4))), Tensor(rng.normal(size=(3, 2, 5, 5, 5))))
    assert y.shape == (1, 2, 8, 8, 8)


def test_upconv_mass_conservation():
    v = 1.7
    y = T.conv_transpose3d(Tensor(np.full((1, 1, 1, 1, 1), v)), Tensor(np.ones((1, 1, 5, 5, 5))),
                           padding=0, output_padding=0)
    assert y.shape == (1, 1, 5, 5, 5)
    assert y.data.sum() == pytest.approx(v * 125)
    assert set(np.unique(y.data)) == {v}


@pytest.mark.parametrize("stride, pad, op, k", [(2, 2, 1, 5), (2, 1, 1, 3), (1, 1, 0, 3), (2, 0, 0, 3)])
def test_upconv_matches_zero_stuffing(rng, stride, pad, op, k):
    x = rng.normal(size=(2, 2, 3, 3, 3))
    w = rng.normal(size=(2, 3, k, k, k))
    b = rng.normal(size=3)
    got = T.conv_transpose3d(Tensor(x), Tensor(w), Tensor(b), stride, pad, op).data
    np.testing.assert_allclose(got, conv_transpose3d_zero_stuffed(x, w, b, stride, pad, op), rtol=0, atol=1e-12)


def test_batch_norm_statistics(rng):
    x = rng.normal(3.0, 5.0, size=(4, 3, 5, 5, 5))
    y, mu, var = T.batch_norm(Tensor(x), Tensor(np.ones(3)), Tensor(np.zeros(3)))
    assert np.abs(y.data.mean(axis=(0, 2, 3, 4))).max() < 1e-6
    assert np.abs(y.data.var(axis=(0, 2, 3, 4)) - 1).max() < 1e-4


def test_batch_norm_standard_input_unchanged(rng):
    x = rng.normal(size=(64, 2))
    x = (x - x.mean(0)) / x.std(0)
    y, _, _ = T.batch_norm(Tensor(x), Tensor(np.ones(2)), Tensor(np.zeros(2)))
    np.testing.assert_allclose(y.data, x, atol=1e-4)


def test_batch_norm_constant_channel():
    y, _, _ = T.batch_norm(Tensor(np.full((4, 1, 3), 2.5)), Tensor(np.ones(1)), Tensor(np.full(1, 0.3)))
    np.testing.assert_allclose(y.data, 0.3)


def test_activation_values():
    assert T.leaky_relu(Tensor(-1.0), 0.2).item() == pytest.approx(-0.2)
    assert T.relu(Tensor(-3.0)).item() == 0.0 and T.relu(Tensor(3.0)).item() == 3.0
    x = Tensor(np.array([-2.0]), requires_grad=True)
    T.sum_(T.leaky_relu(x, 0.2)).backward()
    assert x.grad[0] == pytest.approx(0.2)


def test_tanh_strictly_inside_unit_interval():
    y = T.tanh(Tensor(np.array([-1e3, -40.0, 0.0, 40.0, 1e3]))).data
    assert np.all(np.abs(y) < 1)


def test_sigmoid_extremes_are_finite():
    y = T.sigmoid(Tensor(np.array([-800.0, 800.0]))).data
    assert np.all(np.isfinite(y))


def test_sum_identity_grads_are_one(rng):
    x = Tensor(rng.normal(size=(3, 4)), requires_grad=True)
    T.sum_(x).backward()
    np.testing.assert_array_equal(x.grad, np.ones((3, 4)))


def test_shared_node_accumulates():
    x = Tensor(np.array(3.0), requires_grad=True)
    y = x * x + x
    y.backward()
    assert x.grad == pytest.approx(7.0)


def test_backward_twice_is_an_error():
    x = Tensor(np.array(2.0), requires_grad=True)
    y = x * x
    y.backward()
    with pytest.raises(GraphError):
        y.backward()


def test_backward_needs_scalar():
    x = Tensor(np.ones(3), requires_grad=True)
    with pytest.raises(GraphError):
        (x * x).backward()


def test_nan_is_caught_at_the_op():
    with pytest.raises(FloatingPointError):
        T.log(Tensor(np.array([-1.0])))


def test_no_grad_records_nothing():
    p = Parameter(np.ones(2))
    with no_grad():
        y = p * p
    assert not y.requires_grad and y._backward is None


def test_conv_shape_errors(rng):
    with pytest.raises(ValueError):
        T.conv3d(Tensor(rng.normal(size=(1, 2, 4, 4, 4))), Tensor(rng.normal(size=(1, 3, 3, 3, 3))))
    with pytest.raises(ValueError):
        T.conv3d(Tensor(rng.normal(size=(1, 1, 2, 2, 2))), Tensor(rng.normal(size=(1, 1, 3, 3, 3))))
