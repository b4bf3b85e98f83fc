"""Temperature + nucleus sampling from the windowed generator.

Each sample owns an rng stream seeded from (base seed, pocket id, sample
index), so results do not depend on batching or scheduling. The conditioning
noise is drawn from the standard normal once per sample before any token.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..hashutil import derive_seed
from .features import PocketFeatures
from .network import _lm_layers, _log_softmax, adapter_forward, vae_forward
from .params import ModelParams
from .vocab import Vocabulary


@dataclass(frozen=True)
class SampleResult:
    text: str
    logprob: float  # sum of log-masses of the drawn tokens under the truncated
    # per-step distributions (includes the EOS step when one was drawn)
    token_ids: tuple[int, ...]
    hit_max_len: bool
    conditioning_noise: tuple[float, ...]  # the standard-normal draw used


def sample_seed(base_seed: int, pocket_id: str, index: int) -> int:
    return derive_seed("sample", base_seed, pocket_id, index)


def nucleus_distribution(probs: np.ndarray, top_p: float) -> np.ndarray:
    """Keep the smallest probability-sorted prefix with cumulative mass >=
    top_p (ties by token id) and renormalize."""
    if not 0.0 < top_p <= 1.0:
        raise ValueError("top_p must be in (0, 1]")
    if top_p >= 1.0:
        return probs
    order = np.lexsort((np.arange(len(probs)), -probs))
    csum = np.cumsum(probs[order])
    keep_sorted = np.empty(len(probs), dtype=bool)
    keep_sorted[0] = True
    keep_sorted[1:] = csum[:-1] < top_p
    kept = order[keep_sorted]
    out = np.zeros_like(probs)
    out[kept] = probs[kept]
    return out / out.sum()


def _step_distributions(
    params: ModelParams, x: np.ndarray, temperature: float, top_p: float
) -> np.ndarray:
    _, _, logits = _lm_layers(params, x)
    probs = np.exp(_log_softmax(logits / temperature))
    return np.stack([nucleus_distribution(row, top_p) for row in probs])


def _initial_window(
    u_ctx: np.ndarray, pad_emb: np.ndarray, window: int
) -> np.ndarray:
    buf = np.tile(pad_emb, (window, 1))
    tail = min(window, u_ctx.shape[0])
    if tail:
        buf[window - tail :] = u_ctx[-tail:]
    return buf


def sample_many(
    params: ModelParams,
    features: PocketFeatures,
    vocab: Vocabulary,
    n: int,
    base_seed: int,
    temperature: float = 1.5,
    top_p: float = 0.95,
    max_len: int = 256,
    start_index: int = 0,
    epsilon: np.ndarray | None = None,
) -> list[SampleResult]:
    """n independent draws for one pocket, stepped as a batch.

    ``start_index`` offsets the per-sample stream keys so callers can extend
    a run (resampling duplicates) without repeating earlier draws; ``epsilon``
    fixes one shared conditioning noise instead of drawing one per sample.
    """
    if temperature <= 0:
        raise ValueError("temperature must be > 0")
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    cfg = params.config
    k, d = cfg.window, cfg.d

    rngs = [
        np.random.default_rng(sample_seed(base_seed, features.pocket_id, start_index + i))
        for i in range(n)
    ]
    u_ctx = adapter_forward(features.vectors, params)
    pad_emb = params.token_embedding[vocab.pad_id]
    base_window = _initial_window(u_ctx, pad_emb, k)

    u_cond = np.empty((n, d))
    noises = []
    if epsilon is not None:
        shared = adapter_forward(features.pooled + epsilon, params)
        u_cond[:] = shared
        noises = [tuple(np.asarray(epsilon).tolist())] * n
    else:
        for i, rng in enumerate(rngs):
            eps = vae_forward(None, params, mode="infer", rng=rng)
            noises.append(tuple(eps.sample.tolist()))
            u_cond[i] = adapter_forward(features.pooled + eps.sample, params)

    windows = np.tile(base_window[None, :, :], (n, 1, 1))
    alive = np.ones(n, dtype=bool)
    token_ids: list[list[int]] = [[] for _ in range(n)]
    logprobs = np.zeros(n)
    hit_cap = [False] * n

    for _ in range(max_len):
        if not alive.any():
            break
        idx = np.flatnonzero(alive)
        x = np.concatenate([windows[idx].reshape(len(idx), k * d), u_cond[idx]], axis=1)
        dists = _step_distributions(params, x, temperature, top_p)
        for row, i in enumerate(idx):
            u = rngs[i].random()
            csum = np.cumsum(dists[row])
            token = int(np.searchsorted(csum, u, side="right"))
            token = min(token, len(csum) - 1)  # guard the u ~= 1.0 edge
            logprobs[i] += float(np.log(dists[row, token]))
            token_ids[i].append(token)
            if token == vocab.eos_id:
                alive[i] = False
            else:
                windows[i, :-1] = windows[i, 1:]
                windows[i, -1] = params.token_embedding[token]

    results = []
    for i in range(n):
        if alive[i]:
            hit_cap[i] = True
        results.append(
            SampleResult(
                text=vocab.decode(token_ids[i]),
                logprob=float(logprobs[i]),
                token_ids=tuple(token_ids[i]),
                hit_max_len=hit_cap[i],
                conditioning_noise=noises[i],
            )
        )
    return results


def sample(
    params: ModelParams,
    features: PocketFeatures,
    vocab: Vocabulary,
    temperature: float = 1.5,
    top_p: float = 0.95,
    max_len: int = 256,
    rng: np.random.Generator | None = None,
    base_seed: int | None = None,
    index: int = 0,
    epsilon: np.ndarray | None = None,
) -> SampleResult:
    """One draw. Pass either an rng or (base_seed, index) for the stream key.

    ``epsilon`` fixes the conditioning noise instead of drawing it.
    """
    if rng is None:
        if base_seed is None:
            raise ValueError("sample needs an rng or a base_seed")
        rng = np.random.default_rng(sample_seed(base_seed, features.pocket_id, index))
    cfg = params.config
    k, d = cfg.window, cfg.d
    if temperature <= 0:
        raise ValueError("temperature must be > 0")

    eps = vae_forward(None, params, mode="infer", rng=rng, z=epsilon)
    u_cond = adapter_forward(features.pooled + eps.sample, params)
    u_ctx = adapter_forward(features.vectors, params)
    window = _initial_window(u_ctx, params.token_embedding[vocab.pad_id], k)

    ids: list[int] = []
    logprob = 0.0
    hit_cap = True
    for _ in range(max_len):
        x = np.concatenate([window.ravel(), u_cond])[None, :]
        dist = _step_distributions(params, x, temperature, top_p)[0]
        u = rng.random()
        csum = np.cumsum(dist)
        token = int(np.searchsorted(csum, u, side="right"))
        token = min(token, len(csum) - 1)
        logprob += float(np.log(dist[token]))
        ids.append(token)
        if token == vocab.eos_id:
            hit_cap = False
            break
        window = np.vstack([window[1:], params.token_embedding[token]])
    return SampleResult(
        text=vocab.decode(ids),
        logprob=logprob,
        token_ids=tuple(ids),
        hit_max_len=hit_cap,
        conditioning_noise=tuple(eps.sample.tolist()),
    )
