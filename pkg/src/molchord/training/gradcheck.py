"""Central finite-difference verification of analytic gradients."""

from __future__ import annotations

from typing import Callable

import numpy as np

from ..genmodel import ModelParams

_SUBSAMPLE_ABOVE = 10_000
_SUBSAMPLE_FRACTION = 0.01


class NonDeterministicLoss(RuntimeError):
    pass


def grad_check(
    loss_thunk: Callable[[ModelParams], tuple[float, dict[str, np.ndarray]]],
    params: ModelParams,
    epsilon: float = 1e-5,
    seed: int = 0,
    loss_fn: Callable[[ModelParams], float] | None = None,
    max_coords_per_field: int | None = None,
) -> float:
    """Max relative error between analytic gradients and central differences.

    Every coordinate of every field the thunk returns gradients for is
    checked; above ten thousand coordinates a random 1% subsample per field
    is used instead, and ``max_coords_per_field`` caps the sweep explicitly
    (spot checks at many parameter points). ``loss_fn`` is an optional
    gradient-free evaluation of the same loss used for the perturbed calls.
    The loss must be deterministic: it is invoked twice up front and must
    reproduce its value exactly.
    """
    if not 1e-6 <= epsilon <= 1e-3:
        raise ValueError("epsilon must be within [1e-6, 1e-3]")
    loss_a, grads = loss_thunk(params)
    loss_b, _ = loss_thunk(params)
    if loss_a != loss_b:
        raise NonDeterministicLoss(f"loss not reproducible: {loss_a} != {loss_b}")
    evaluate = loss_fn if loss_fn is not None else (lambda p: loss_thunk(p)[0])
    if loss_fn is not None and evaluate(params) != loss_a:
        raise NonDeterministicLoss("loss_fn disagrees with the gradient thunk")

    total = sum(g.size for g in grads.values())
    rng = np.random.default_rng(seed)
    worst = 0.0
    for name in sorted(grads):
        arr = getattr(params, name)
        flat = arr.reshape(-1)
        grad_flat = grads[name].reshape(-1)
        count = flat.size
        if total > _SUBSAMPLE_ABOVE:
            count = max(1, int(round(flat.size * _SUBSAMPLE_FRACTION)))
        if max_coords_per_field is not None:
            count = min(count, max_coords_per_field)
        if count < flat.size:
            indices = rng.choice(flat.size, size=count, replace=False)
        else:
            indices = range(flat.size)
        for idx in indices:
            original = flat[idx]
            flat[idx] = original + epsilon
            loss_plus = evaluate(params)
            flat[idx] = original - epsilon
            loss_minus = evaluate(params)
            flat[idx] = original
            numeric = (loss_plus - loss_minus) / (2.0 * epsilon)
            analytic = grad_flat[idx]
            rel = abs(analytic - numeric) / max(1.0, abs(analytic), abs(numeric))
            worst = max(worst, rel)
    return worst
