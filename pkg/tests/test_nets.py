# -*- coding: utf-8 -*-
#
# Copyright 2019-2023 Marco Favorito, Roberto Cipollone, Luca Iocchi
#
# ------------------------------
#
# This file is part of gym-consensus.
#
# gym-consensus is free software: you can redistribute it and/or modify
# it under the terms of the GNU General Public License as published by
# the Free Software Foundation, either version 3 of the License, or
# (at your option) any later version.
#
# gym-consensus is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU General Public License for more details.
#
# You should have received a copy of the GNU General Public License
# along with gym-consensus.  If not, see <https://www.gnu.org/licenses/>.
#

"""Tests for the numpy networks, the Gumbel sampler and the optimizer."""
import numpy as np
import pytest
from scipy.special import softmax

from gym_consensus.algorithms.nets import (
    MANIFEST_HEADER,
    AdamState,
    DenseNet,
    DivergenceError,
    GumbelSampler,
    ParameterManifest,
    SetPoolNet,
    adam_step,
    canonical_order,
    check_finite,
    gumbel_st_sample,
    load_parameters,
    save_parameters,
    soft_update,
)

EPS = 1e-6


def numeric_gradient(fn, x: np.ndarray) -> np.ndarray:
    """Central differences of a scalar function."""
    grad = np.zeros_like(x)
    for k in range(x.size):
        step = np.zeros_like(x)
        step.flat[k] = EPS
        grad.flat[k] = (fn(x + step) - fn(x - step)) / (2 * EPS)
    return grad


def test_dense_gradients(rng):
    """Backward matches central differences."""
    net = DenseNet([3, 5, 2], "tanh", "tanh", rng)
    x = rng.normal(size=(4, 3))
    upstream = rng.normal(size=(4, 2))
    out, cache = net.forward_cache(x)
    grad_x, grad_params = net.backward(cache, upstream)

    def loss_of_params(flat):
        net.set_flat(flat)
        return float((net.forward(x) * upstream).sum())

    flat = net.get_flat()
    assert np.allclose(grad_params, numeric_gradient(loss_of_params, flat.copy()), atol=1e-6)
    net.set_flat(flat)
    assert np.allclose(
        grad_x, numeric_gradient(lambda v: float((net.forward(v) * upstream).sum()), x), atol=1e-6
    )


def test_dense_validation(rng):
    """Bad sizes, activations and inputs are refused."""
    with pytest.raises(ValueError):
        DenseNet([3])
    with pytest.raises(ValueError):
        DenseNet([3, 2], activation="sigmoid")
    net = DenseNet([3, 2], rng=rng)
    with pytest.raises(ValueError):
        net.forward(np.zeros((1, 4)))
    with pytest.raises(ValueError):
        net.set_flat(np.zeros(3))
    assert net.forward(np.zeros((5, 7, 3))).shape == (5, 7, 2)


def test_dense_copy_is_independent(rng):
    """Copies do not share parameters."""
    net = DenseNet([2, 3, 1], rng=rng)
    other = net.copy()
    other.set_flat(np.zeros(other.n_params))
    assert np.any(net.get_flat() != 0.0)


def test_non_finite_outputs():
    """NaN values raise DivergenceError."""
    with pytest.raises(DivergenceError):
        check_finite(np.array([1.0, np.nan]), "test")
    net = DenseNet([1, 1])
    net.set_flat(np.array([np.inf, 0.0]))
    with pytest.raises(DivergenceError):
        net.forward(np.ones((1, 1)))


def test_canonical_order_ties():
    """Equal elements are ordered by weight."""
    elements = np.array([[[1.0], [0.0], [1.0]]])
    weights = np.array([[0.9, 0.5, 0.1]])
    assert canonical_order(elements, weights).tolist() == [[1, 2, 0]]


@pytest.mark.parametrize("pooling", ["mean", "max"])
def test_set_pooling_is_permutation_invariant(rng, pooling):
    """Shuffling the elements and their weights leaves the output unchanged."""
    net = SetPoolNet(4, hidden=8, output_size=2, pooling=pooling, rng=rng)
    elements = rng.normal(size=(3, 5, 4))
    weights = rng.uniform(0.1, 1.0, size=(3, 5))
    out = net.forward(elements, weights)
    for _ in range(5):
        perm = rng.permutation(5)
        assert np.array_equal(net.forward(elements[:, perm], weights[:, perm]), out)


def test_mean_pooling_gradients(rng):
    """Gradients with respect to parameters, elements and weights."""
    net = SetPoolNet(3, hidden=6, output_size=1, rng=rng)
    elements = rng.normal(size=(2, 4, 3))
    weights = rng.uniform(0.2, 1.0, size=(2, 4))
    upstream = rng.normal(size=(2, 1))
    _, cache = net.forward_cache(elements, weights)
    grad_elements, grad_weights, grad_params = net.backward(cache, upstream)

    def loss(e, w):
        return float((net.forward(e, w) * upstream).sum())

    assert np.allclose(
        grad_weights, numeric_gradient(lambda w: loss(elements, w), weights), atol=1e-5
    )
    assert np.allclose(
        grad_elements, numeric_gradient(lambda e: loss(e, weights), elements), atol=1e-5
    )
    flat = net.get_flat()

    def loss_of_params(v):
        net.set_flat(v)
        return loss(elements, weights)

    assert np.allclose(grad_params, numeric_gradient(loss_of_params, flat.copy()), atol=1e-5)


def test_zero_weight_elements_are_ignored(rng):
    """An element with weight 0 does not change the mean."""
    net = SetPoolNet(2, hidden=4, rng=rng)
    elements = rng.normal(size=(3, 2))
    with_extra = np.vstack([elements, rng.normal(size=(1, 2))])
    assert np.allclose(
        net.forward(with_extra, np.array([1.0, 1.0, 1.0, 0.0])), net.forward(elements)
    )
    with pytest.raises(ValueError):
        net.forward(elements, np.zeros(3))
    with pytest.raises(ValueError):
        net.forward(np.zeros((1, 3, 5)))


def test_max_pooling_has_no_weight_gradient(rng):
    """Max pooling does not propagate into the weights."""
    net = SetPoolNet(2, hidden=4, pooling="max", rng=rng)
    _, cache = net.forward_cache(rng.normal(size=(2, 3, 2)))
    _, grad_weights, _ = net.backward(cache, np.ones((2, 1)))
    assert np.all(grad_weights == 0.0)


def test_soft_update(rng):
    """Targets move a fraction of the way."""
    source, target = DenseNet([2, 2], rng=rng), DenseNet([2, 2], rng=rng)
    expected = 0.75 * target.get_flat() + 0.25 * source.get_flat()
    soft_update(target, source, 0.25)
    assert np.allclose(target.get_flat(), expected)
    soft_update(target, source, 1.0)
    assert np.allclose(target.get_flat(), source.get_flat())


def test_gumbel_max_frequencies():
    """Hard samples follow softmax(logits)."""
    sampler = GumbelSampler(rng=np.random.default_rng(5))
    logits = np.tile(np.log([0.3, 0.7]), (20_000, 1))
    hard, _ = gumbel_st_sample(sampler, logits)
    assert np.all(hard.sum(axis=1) == 1.0)
    assert hard[:, 1].mean() == pytest.approx(0.7, abs=0.02)
    with pytest.raises(ValueError):
        GumbelSampler(temperature=0.0)
    with pytest.raises(ValueError):
        gumbel_st_sample(sampler, np.zeros((3, 1)))


def test_straight_through_jacobian(rng):
    """The hook applies the transposed Jacobian of the relaxed softmax."""
    sampler = GumbelSampler(temperature=0.5, rng=rng)
    logits = rng.normal(size=3)
    noise = sampler.noise((3,))
    hard, hook = gumbel_st_sample(sampler, logits, noise)
    assert hard.tolist() == np.eye(3)[np.argmax(logits + noise)].tolist()
    upstream = rng.normal(size=3)
    expected = numeric_gradient(
        lambda z: float(softmax((z + noise) / 0.5) @ upstream), logits.copy()
    )
    assert np.allclose(hook(upstream), expected, atol=1e-6)


def test_adam_minimizes_a_quadratic():
    """Adam finds the minimum of ||x - c||^2."""
    target = np.array([1.0, -2.0, 0.5])
    state = AdamState.zeros(3, learning_rate=0.05)
    x = np.zeros(3)
    first = adam_step(state, x, 2 * (x - target))
    assert np.allclose(np.abs(first), 0.05)
    x = first
    for _ in range(2000):
        x = adam_step(state, x, 2 * (x - target))
    assert np.allclose(x, target, atol=1e-2)
    with pytest.raises(ValueError):
        adam_step(state, x, np.zeros(2))


def test_save_and_load(tmp_path, rng):
    """Parameters are restored by name."""
    nets = {"actor": DenseNet([3, 4, 2], rng=rng), "critic": SetPoolNet(3, hidden=4, rng=rng)}
    save_parameters(tmp_path / "agent0", nets)
    assert (tmp_path / "agent0.npy").exists()
    manifest = (tmp_path / "agent0.manifest").read_text()
    assert manifest.startswith(MANIFEST_HEADER)

    fresh = {"actor": DenseNet([3, 4, 2], rng=rng), "critic": SetPoolNet(3, hidden=4, rng=rng)}
    load_parameters(tmp_path / "agent0", fresh)
    for name in nets:
        assert np.array_equal(fresh[name].get_flat(), nets[name].get_flat())

    with pytest.raises(ValueError):
        load_parameters(tmp_path / "agent0", {"gate": DenseNet([3, 2], rng=rng)})
    with pytest.raises(ValueError):
        load_parameters(tmp_path / "agent0", {"actor": DenseNet([3, 2], rng=rng)})


def test_manifest_version():
    """Unknown versions and headers are refused."""
    manifest = ParameterManifest([("actor", 0, 10)])
    assert ParameterManifest.loads(manifest.dumps()) == manifest
    with pytest.raises(ValueError):
        ParameterManifest.loads(f"{MANIFEST_HEADER} 99\n")
    with pytest.raises(ValueError):
        ParameterManifest.loads("something else\n")
