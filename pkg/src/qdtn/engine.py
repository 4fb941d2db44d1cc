"""Batched loss/gradient drivers shared by every trainer.

Propagation and gradient assembly are pure functions of their inputs, so
examples are embarrassingly parallel: the batch is split into contiguous
chunks processed on a thread pool sized by the QDTN_THREADS environment
variable (default 1).  Chunk results are concatenated in batch order, so
output does not depend on scheduling.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .dynamics import PropagatorCache
from .network import QuantumNetwork


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get("QDTN_THREADS", "1")))
    except ValueError:
        return 1


def _chunks(total: int, parts: int) -> list[slice]:
    parts = min(parts, total) or 1
    bounds = np.linspace(0, total, parts + 1).astype(int)
    return [slice(a, b) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]


def _run_chunked(fn, batch_size: int):
    slices = _chunks(batch_size, worker_count())
    if len(slices) == 1:
        return [fn(slices[0])]
    with ThreadPoolExecutor(max_workers=len(slices)) as pool:
        return list(pool.map(fn, slices))


def _final_states(cache: PropagatorCache, rho0s: np.ndarray) -> np.ndarray:
    def job(sl):
        sub = cache if cache.coeff_stack is None else PropagatorCache(
            cache.net, cache.coeff_stack[sl]
        )
        return sub.forward(rho0s[sl])[-1]

    return np.concatenate(_run_chunked(job, rho0s.shape[0]))


def batch_losses(
    net: QuantumNetwork,
    rho0s: np.ndarray,
    objectives,
    coeff_stack: np.ndarray | None = None,
) -> np.ndarray:
    """Per-example losses for a stacked batch (B, d, d)."""
    cache = PropagatorCache(net, coeff_stack)
    finals = _final_states(cache, rho0s)
    return np.array([obj.loss(finals[i]) for i, obj in enumerate(objectives)])


def batch_gradients(
    net: QuantumNetwork,
    rho0s: np.ndarray,
    objectives,
    coeff_stack: np.ndarray | None = None,
    want_input_grad: bool = False,
):
    """Per-example losses, parameter gradients and (optionally) the gradient
    of each loss with respect to its own initial state.

    Returns (losses (B,), grads (B, n_params)[, gamma0 (B, d, d)]).  The
    input-state gradient is the backward-propagated costate at t=0, still in
    the engine pairing dL = -2 tr(g drho_in): exactly what a chained upstream
    network consumes as its final-time costate.
    """
    cache = PropagatorCache(net, coeff_stack)

    def job(sl):
        sub = cache if coeff_stack is None else PropagatorCache(net, coeff_stack[sl])
        states = sub.forward(rho0s[sl])
        finals = states[-1]
        objs = objectives[sl]
        losses = np.array([obj.loss(finals[i]) for i, obj in enumerate(objs)])
        gamma_f = np.stack([obj.engine_costate(finals[i]) for i, obj in enumerate(objs)])
        grads, costates = sub.gradient(states, gamma_f, store_costates=want_input_grad)
        gamma0 = costates[0] if want_input_grad else None
        return losses, grads, gamma0

    objectives = np.asarray(objectives, dtype=object)
    parts = _run_chunked(job, rho0s.shape[0])
    losses = np.concatenate([p[0] for p in parts])
    grads = np.concatenate([p[1] for p in parts])
    if want_input_grad:
        return losses, grads, np.concatenate([p[2] for p in parts])
    return losses, grads
