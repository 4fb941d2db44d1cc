"""Finite-difference certification of the adjoint parameter gradients."""

import numpy as np
import pytest

from qdtn.dynamics import (
    PropagatorCache,
    assemble_gradient,
    final_costate_target,
    propagate_costate,
    propagate_forward,
)
from qdtn.engine import batch_gradients, batch_losses
from qdtn.network import QuantumNetwork
from qdtn.objectives import MeasureTarget, TargetState
from qdtn.states import flat_state, make_rng, pauli_string


def central_diff_gradient(loss_fn, vec, h):
    g = np.zeros_like(vec)
    for i in range(vec.size):
        vp = vec.copy()
        vp[i] += h
        vm = vec.copy()
        vm[i] -= h
        g[i] = (loss_fn(vp) - loss_fn(vm)) / (2 * h)
    return g


def rel_inf_error(a, b):
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-12))


def random_target(rng, dim):
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    v /= np.linalg.norm(v)
    return np.outer(v, v.conj())


class TestPublicComposition:
    def test_zero_costate_gives_zero_gradient(self):
        net = QuantumNetwork.random(2, make_rng(0))
        fwd = propagate_forward(net, flat_state(2).mat)
        bwd = propagate_costate(net, fwd, np.zeros((4, 4), dtype=complex))
        assert np.allclose(assemble_gradient(net, fwd, bwd), 0.0)

    def test_frobenius_gradient_matches_fd_at_spec_step(self):
        rng = make_rng(1)
        net = QuantumNetwork.random(2, rng, scale=0.6)
        rho0 = flat_state(2).mat
        target = random_target(rng, 4)

        fwd = propagate_forward(net, rho0)
        bwd = propagate_costate(net, fwd, final_costate_target(target, fwd.final))
        adj = assemble_gradient(net, fwd, bwd)

        def loss(vec):
            final = propagate_forward(net.with_vector(vec), rho0).final
            return float(np.sum(np.abs(target - final) ** 2))

        fd = central_diff_gradient(loss, net.parameter_vector(), h=1e-6)
        assert rel_inf_error(adj, fd) <= 1e-6


class TestObjectivePipelines:
    @pytest.mark.parametrize("seed", [2, 3, 4])
    def test_frobenius_objective_unitary(self, seed):
        rng = make_rng(seed)
        net = QuantumNetwork.random(2, rng, scale=0.7)
        rho0s = flat_state(2).mat[None]
        objs = [TargetState(random_target(rng, 4))]
        _, grads = batch_gradients(net, rho0s, objs)

        def loss(vec):
            return batch_losses(net.with_vector(vec), rho0s, objs)[0]

        fd = central_diff_gradient(loss, net.parameter_vector(), h=1e-5)
        assert rel_inf_error(grads[0], fd) <= 1e-6

    @pytest.mark.parametrize("label", ["XX", "YY", "ZZ"])
    def test_measure_objective_unitary(self, label):
        rng = make_rng(5)
        net = QuantumNetwork.random(2, rng, scale=0.7)
        rho0s = flat_state(2).mat[None]
        objs = [MeasureTarget(pauli_string(label), target=0.3)]
        _, grads = batch_gradients(net, rho0s, objs)

        def loss(vec):
            return batch_losses(net.with_vector(vec), rho0s, objs)[0]

        fd = central_diff_gradient(loss, net.parameter_vector(), h=1e-5)
        assert rel_inf_error(grads[0], fd) <= 1e-6

    @pytest.mark.parametrize("kind", ["target", "measure"])
    def test_lindblad_gradients_include_gamma_rows(self, kind):
        rng = make_rng(6)
        net = QuantumNetwork.random(2, rng, scale=0.5, lindblad_enabled=True, gamma_floor=0.4)
        rho0s = flat_state(2).mat[None]
        if kind == "target":
            objs = [TargetState(random_target(rng, 4))]
        else:
            objs = [MeasureTarget(pauli_string("ZZ"), target=0.2)]
        _, grads = batch_gradients(net, rho0s, objs)

        def loss(vec):
            return batch_losses(net.with_vector(vec), rho0s, objs)[0]

        fd = central_diff_gradient(loss, net.parameter_vector(), h=1e-5)
        assert rel_inf_error(grads[0], fd) <= 1e-4
        gamma_rows = net.gamma_indices()
        assert np.max(np.abs(fd[gamma_rows])) > 1e-8  # Gamma genuinely participates

    def test_clamped_gamma_has_zero_gradient(self):
        net = QuantumNetwork.random(2, make_rng(7), scale=0.5, lindblad_enabled=True)
        coeffs = net.coeffs.copy()
        coeffs[-1, :] = 0.0
        coeffs[-1, 0] = -1.0  # raw Gamma stays negative: clamp closed everywhere
        net = net.with_vector(coeffs.reshape(-1))
        rho0s = flat_state(2).mat[None]
        objs = [TargetState(random_target(make_rng(8), 4))]
        _, grads = batch_gradients(net, rho0s, objs)
        assert np.allclose(grads[0][net.gamma_indices()], 0.0)


class TestCostateScaling:
    def test_weight_scales_gradient_linearly(self):
        rng = make_rng(9)
        net = QuantumNetwork.random(2, rng, scale=0.6)
        rho0s = flat_state(2).mat[None]
        m = pauli_string("ZZ")
        _, g1 = batch_gradients(net, rho0s, [MeasureTarget(m, 0.3, weight=1.0)])
        _, g5 = batch_gradients(net, rho0s, [MeasureTarget(m, 0.3, weight=5.0)])
        assert np.max(np.abs(g5 - 5.0 * g1)) <= 1e-12 * max(1.0, np.max(np.abs(g1)))


class TestInputGradient:
    def test_costate_at_initial_time_differentiates_the_input(self):
        # dL = -2 tr(g0 drho_in): check against entrywise Hermitian perturbations.
        rng = make_rng(10)
        net = QuantumNetwork.random(2, rng, scale=0.7)
        rho0 = random_target(rng, 4)
        obj = MeasureTarget(pauli_string("XX"), target=0.4)
        _, _, gamma0 = batch_gradients(net, rho0[None], [obj], want_input_grad=True)

        h = 1e-6
        for i, j in [(0, 0), (1, 2), (3, 1)]:
            de = np.zeros((4, 4), dtype=complex)
            de[i, j] += 1.0
            de[j, i] += 1.0  # keep the perturbation Hermitian
            lp = batch_losses(net, (rho0 + h * de)[None], [obj])[0]
            lm = batch_losses(net, (rho0 - h * de)[None], [obj])[0]
            fd = (lp - lm) / (2 * h)
            predicted = -2.0 * float(np.real(np.trace(gamma0[0] @ de)))
            assert predicted == pytest.approx(fd, abs=1e-6)
