import math

import numpy as np
import pytest

import gabornet as gn


def test_eval_gabor_scalar():
    assert gn.eval_gabor(0, 0, 1.3, 0.4, 0.0, 2.0) == pytest.approx(1.0)
    assert gn.eval_gabor(2, 0, math.pi / 2, 0, 0, 2) == pytest.approx(-math.exp(-0.5), abs=1e-15)


def test_make_kernel_matches_formula():
    omega, theta, psi, sigma, k = 0.8, 0.6, 0.3, 2.5, 7
    kernel = gn.make_kernel(omega, theta, psi, sigma, k)
    ys, xs = np.mgrid[-3:4, -3:4].astype(float)
    xr = xs * np.cos(theta) + ys * np.sin(theta)
    yr = -xs * np.sin(theta) + ys * np.cos(theta)
    expected = np.exp(-(xr**2 + yr**2) / (2 * sigma**2)) * np.cos(omega * xr + psi)
    np.testing.assert_allclose(kernel, expected, atol=1e-14)


def test_kernel_grads_finite_difference():
    p = dict(omega=0.9, theta=0.2, psi=1.1, sigma=3.0)
    grads = gn.kernel_param_grads(k=5, **p)
    for name in p:
        hi = dict(p, **{name: p[name] + 1e-6})
        lo = dict(p, **{name: p[name] - 1e-6})
        numeric = (gn.make_kernel(k=5, **hi) - gn.make_kernel(k=5, **lo)) / 2e-6
        np.testing.assert_allclose(grads[name], numeric, atol=1e-8)


def test_filter_bank_and_init():
    bank = gn.build_filter_bank()
    assert bank.shape == (40, 2)
    assert bank[0, 0] == pytest.approx(math.pi / 2)
    assert bank[39, 1] == pytest.approx(7 * math.pi / 8)
    params = gn.init_param_set(40, 1, 11, 3)
    np.testing.assert_allclose(params[:, 0, 3], math.pi / params[:, 0, 0], rtol=0, atol=1e-12)
    assert np.all((params[..., 2] >= 0) & (params[..., 2] < math.pi))


def test_conv_paths_agree():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((2, 3, 9, 9))
    k = rng.standard_normal((4, 3, 3, 3))
    b = rng.standard_normal(4)
    fast = gn.conv2d_forward(x, k, b, stride=2, pad=1)
    slow = gn.conv2d_naive(x, k, b, stride=2, pad=1)
    assert fast.shape == (2, 4, 5, 5)
    np.testing.assert_allclose(fast, slow, atol=1e-10)


def test_maxpool_and_adam():
    out, argmax = gn.maxpool2d(np.array([[[[1.0, 2.0], [3.0, 4.0]]]]), 2, 2)
    assert out.item() == 4.0 and argmax == [3]
    z = np.zeros((1, 1, 1, 1))
    p, m, v, t = gn.adam_step(z, np.ones((1, 1, 1, 1)), z, z, 0)
    assert t == 1
    assert p.item() == pytest.approx(-0.001 / (1 + 1e-8), abs=1e-12)


def test_network_trains_on_textures():
    images, labels = gn.gen_texture_dataset(8, size=12, classes=2, seed=4)
    images = (images - images.mean()) / images.std()
    net = gn.Network(
        "gabor_conv(out=4,k=5,pad=2); relu; maxpool(window=2,stride=2); dense(out=classes); softmax_ce",
        classes=2,
        size=12,
        seed=5,
    )
    assert net.first_layer_counts() == ("gabor_conv", 20, 16)
    losses = net.fit(images, labels.tolist(), epochs=60, batch_size=16)
    assert losses[-1] < losses[0]
    _, accuracy = net.evaluate(images, labels.tolist())
    assert accuracy == 1.0


def test_default_pair_counts_and_filters():
    gcnn = gn.Network(classes=4)
    cnn = gn.Network(classes=4, cnn_twin=True)
    assert gcnn.first_layer_counts() == ("gabor_conv", 200, 160)
    assert cnn.first_layer_counts() == ("conv", 4880, 4840)
    assert gcnn.filters().shape == (5 * 11 + 4, 8 * 11 + 7)


def test_gradcheck_group():
    results = gn.gradcheck(seed=1, group="gabor")
    assert results and all(r["passed"] for r in results)


def test_errors_surface_as_python_exceptions():
    with pytest.raises(ValueError):
        gn.make_kernel(1, 0, 0, 1, 4)
    with pytest.raises(ValueError):
        gn.gen_texture_dataset(2, classes=9)
