"""Training objectives and their exact gradients.

Three losses share the sequence forward/backward core:

  * alignment: masked next-token NLL, gradients restricted to the adapter;
  * supervised fine-tuning: masked NLL with reparameterized conditioning
    noise plus a weighted closed-form Gaussian KL, gradients for adapter,
    variational head, and predictor;
  * preference: -log sigmoid(beta * margin) on policy/reference log-ratio
    margins between a chosen and a rejected molecule, plus the same weighted
    KL. The conditioning noise is a recorded input shared by all four
    sequence evaluations, so the margin carries no sampling noise and the
    loss stays a deterministic function of the policy parameters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..genmodel import (
    ADAPTER_FIELDS,
    InterleavedSequence,
    ModelParams,
    SFT_TRAINABLE,
    Vocabulary,
    sequence_backward,
    sequence_forward,
    vae_forward,
)

DEFAULT_BETA_VAE = 0.1
DEFAULT_BETA_DPO = 0.1


class EmptyBatch(ValueError):
    pass


class MalformedSequence(ValueError):
    pass


class MissingReference(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class SftExample:
    seq: InterleavedSequence
    complex_vec: np.ndarray

    @property
    def pocket_id(self) -> str:
        return self.seq.features.pocket_id


@dataclass(frozen=True, eq=False)
class DpoExample:
    pocket_id: str
    chosen_seq: InterleavedSequence
    rejected_seq: InterleavedSequence
    complex_vec: np.ndarray
    epsilon: np.ndarray  # recorded conditioning noise, shared policy/reference


def kl_gaussian(mu: np.ndarray, log_var: np.ndarray) -> float:
    """KL(N(mu, diag(exp(log_var))) || N(0, I)) in closed form."""
    mu = np.asarray(mu, dtype=np.float64)
    log_var = np.asarray(log_var, dtype=np.float64)
    return float(0.5 * np.sum(mu * mu + np.exp(log_var) - log_var - 1.0))


def kl_gaussian_grads(mu: np.ndarray, log_var: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return np.asarray(mu, dtype=np.float64), 0.5 * (np.exp(np.asarray(log_var)) - 1.0)


def _check_batch(batch) -> None:
    if not batch:
        raise EmptyBatch("empty batch")


def alignment_loss(
    params: ModelParams,
    batch: list[InterleavedSequence],
    vocab: Vocabulary,
    compute_grads: bool = True,
) -> tuple[float, dict[str, np.ndarray]]:
    """Mean masked NLL; only the adapter is trainable at this stage."""
    _check_batch(batch)
    for seq in batch:
        if not seq.suffix_ids:
            raise MalformedSequence(f"sequence for {seq.features.pocket_id} has no targets")
    grads = params.zero_grads(ADAPTER_FIELDS) if compute_grads else {}
    total = 0.0
    coeff = -1.0 / len(batch)
    for seq in batch:
        logprob, cache = sequence_forward(params, seq, vocab)
        total -= logprob
        if compute_grads:
            sequence_backward(cache, params, coeff, grads, ADAPTER_FIELDS)
    return total / len(batch), grads


@dataclass(frozen=True, eq=False)
class SftAux:
    nll: float
    kl: float
    noises: tuple[np.ndarray, ...]


def sft_loss(
    params: ModelParams,
    batch: list[SftExample],
    vocab: Vocabulary,
    beta_vae: float = DEFAULT_BETA_VAE,
    rng: np.random.Generator | None = None,
    noises: tuple[np.ndarray, ...] | None = None,
    compute_grads: bool = True,
) -> tuple[float, dict[str, np.ndarray], SftAux]:
    """Mean masked NLL under noisy conditioning plus beta_vae * mean KL.

    The standard-normal draws come from ``rng`` and are returned in the aux
    record; pass them back through ``noises`` to re-evaluate the identical
    loss (gradient checks, validation).
    """
    _check_batch(batch)
    for ex in batch:
        if not ex.seq.suffix_ids:
            raise MalformedSequence(f"sequence for {ex.pocket_id} has no targets")
    if noises is None:
        if rng is None:
            raise ValueError("sft_loss needs an rng or recorded noises")
        d = params.vae_mu_b.shape[0]
        noises = tuple(rng.standard_normal(d) for _ in batch)
    if len(noises) != len(batch):
        raise ValueError("one noise vector per example required")

    grads = params.zero_grads(SFT_TRAINABLE) if compute_grads else {}
    b = len(batch)
    nll_total = 0.0
    kl_total = 0.0
    for ex, z in zip(batch, noises):
        eps = vae_forward(ex.complex_vec, params, mode="train", z=z)
        logprob, cache = sequence_forward(params, ex.seq, vocab, epsilon=eps.sample)
        nll_total -= logprob
        kl_total += kl_gaussian(eps.mu, eps.log_var)
        if not compute_grads:
            continue

        d_eps = sequence_backward(cache, params, -1.0 / b, grads, SFT_TRAINABLE)
        kl_mu, kl_lv = kl_gaussian_grads(eps.mu, eps.log_var)
        sigma = np.exp(0.5 * eps.log_var)
        d_mu = d_eps + (beta_vae / b) * kl_mu
        d_lv = 0.5 * d_eps * sigma * z + (beta_vae / b) * kl_lv
        grads["vae_mu_w"] += np.outer(d_mu, ex.complex_vec)
        grads["vae_mu_b"] += d_mu
        grads["vae_logvar_w"] += np.outer(d_lv, ex.complex_vec)
        grads["vae_logvar_b"] += d_lv

    loss = nll_total / b + beta_vae * kl_total / b
    return loss, grads, SftAux(nll=nll_total / b, kl=kl_total / b, noises=noises)


def _log_sigmoid(x: float) -> float:
    # -softplus(-x), stable on both tails
    if x >= 0:
        return -math.log1p(math.exp(-x))
    return x - math.log1p(math.exp(x))


def dpo_loss(
    params: ModelParams,
    ref_params: ModelParams | None,
    example: DpoExample,
    vocab: Vocabulary,
    beta_dpo: float = DEFAULT_BETA_DPO,
    beta_vae: float = DEFAULT_BETA_VAE,
    compute_grads: bool = True,
) -> tuple[float, dict[str, np.ndarray], float]:
    """Preference loss for one pair; returns (loss, grads, implied margin).

    The reference model is evaluated with the same recorded noise and
    contributes constants; gradients flow through the two policy evaluations
    and, via the KL term, the variational head.
    """
    if ref_params is None:
        raise MissingReference("preference loss needs the frozen reference parameters")
    eps = example.epsilon

    lp_chosen, cache_chosen = sequence_forward(params, example.chosen_seq, vocab, epsilon=eps)
    lp_rejected, cache_rejected = sequence_forward(params, example.rejected_seq, vocab, epsilon=eps)
    ref_chosen, _ = sequence_forward(ref_params, example.chosen_seq, vocab, epsilon=eps)
    ref_rejected, _ = sequence_forward(ref_params, example.rejected_seq, vocab, epsilon=eps)

    margin = beta_dpo * ((lp_chosen - ref_chosen) - (lp_rejected - ref_rejected))
    pref_loss = -_log_sigmoid(margin)

    mu = params.vae_mu_w @ example.complex_vec + params.vae_mu_b
    log_var = params.vae_logvar_w @ example.complex_vec + params.vae_logvar_b
    kl = kl_gaussian(mu, log_var)
    loss = pref_loss + beta_vae * kl
    if not compute_grads:
        return loss, {}, margin

    grads = params.zero_grads(SFT_TRAINABLE)
    # d(-log sigmoid(m))/dm = -(1 - sigmoid(m)) = -sigmoid(-m)
    d_margin = -1.0 / (1.0 + math.exp(margin)) if margin < 50 else -math.exp(-margin)
    sequence_backward(cache_chosen, params, d_margin * beta_dpo, grads, SFT_TRAINABLE)
    sequence_backward(cache_rejected, params, -d_margin * beta_dpo, grads, SFT_TRAINABLE)

    kl_mu, kl_lv = kl_gaussian_grads(mu, log_var)
    grads["vae_mu_w"] += beta_vae * np.outer(kl_mu, example.complex_vec)
    grads["vae_mu_b"] += beta_vae * kl_mu
    grads["vae_logvar_w"] += beta_vae * np.outer(kl_lv, example.complex_vec)
    grads["vae_logvar_b"] += beta_vae * kl_lv
    return loss, grads, margin
