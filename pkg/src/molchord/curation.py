"""Preference-data curation: dataset stratification, rewards, and pair building.

Pockets with more than two distinct ligands go to the supervised pool, the
rest to the preference pool. Preference pockets are kept only when the model's
own candidates are diverse enough, and each kept pocket contributes one
best-vs-worst pair under the fused-ring-penalized reward.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

from .metrics import TooFewItems, diversity
from .molgraph import (
    DEFAULT_NBITS,
    DEFAULT_RADIUS,
    canonical_smiles,
    morgan_fingerprint,
    parse_smiles,
    try_parse,
)

DEFAULT_DIVERSITY_THRESHOLD = 0.8
DEFAULT_FUSED_PENALTY_WEIGHT = 0.5
DEFAULT_FILTER_SAMPLES = 100
SFT_LIGAND_THRESHOLD = 2  # strictly more than this many distinct ligands


class DuplicatePocketId(ValueError):
    pass


class TooFewCandidates(ValueError):
    pass


class DegeneratePool(ValueError):
    pass


@dataclass(frozen=True)
class ComplexRecord:
    """One pocket with its ligands and optional side information."""

    pocket_id: str
    ligand_smiles: tuple[str, ...]
    reference_vina: float | None = None
    pocket_sequence: str | None = None
    homology: str | None = None


@dataclass(frozen=True)
class Partition:
    sft_pool: tuple[str, ...]
    dpo_pool: tuple[str, ...]


@dataclass(frozen=True)
class PreferencePair:
    pocket_id: str
    chosen: str
    rejected: str
    reward_chosen: float
    reward_rejected: float

    def __post_init__(self):
        if self.chosen == self.rejected:
            raise ValueError("chosen and rejected molecules must differ")
        if self.reward_chosen < self.reward_rejected:
            raise ValueError("chosen reward below rejected reward")


@dataclass(frozen=True)
class ScoredMolecule:
    smiles: str
    vina: float
    fused_count: int


@dataclass(frozen=True)
class FilterDecision:
    keep: bool
    diversity: float
    n_candidates: int


@dataclass(frozen=True)
class CurationAudit:
    pocket_id: str
    kept: bool
    diversity: float | None
    n_valid: int
    reason: str


@dataclass(frozen=True)
class CurationResult:
    selected: tuple[str, ...]
    audit: tuple[CurationAudit, ...]


def partition_dataset(records: Sequence[ComplexRecord]) -> Partition:
    """Split pockets by distinct-ligand multiplicity (duplicates collapse)."""
    seen: set[str] = set()
    sft: list[str] = []
    dpo: list[str] = []
    cache: dict[str, str] = {}
    for record in records:
        if record.pocket_id in seen:
            raise DuplicatePocketId(record.pocket_id)
        seen.add(record.pocket_id)
        distinct = set()
        for smiles in record.ligand_smiles:
            if smiles not in cache:
                cache[smiles] = canonical_smiles(parse_smiles(smiles))
            distinct.add(cache[smiles])
        (sft if len(distinct) > SFT_LIGAND_THRESHOLD else dpo).append(record.pocket_id)
    return Partition(sft_pool=tuple(sorted(sft)), dpo_pool=tuple(sorted(dpo)))


def diversity_filter(
    candidates: Sequence[str],
    threshold: float = DEFAULT_DIVERSITY_THRESHOLD,
    radius: int = DEFAULT_RADIUS,
    nbits: int = DEFAULT_NBITS,
) -> FilterDecision:
    """Keep a candidate set only when its diversity strictly exceeds the threshold."""
    if len(candidates) < 2:
        raise TooFewCandidates(f"{len(candidates)} candidates, need at least 2")
    fps = [morgan_fingerprint(parse_smiles(s), radius, nbits) for s in candidates]
    measured = diversity(fps)
    return FilterDecision(keep=measured > threshold, diversity=measured, n_candidates=len(candidates))


def reward(vina: float, fused_count: int, lam: float = DEFAULT_FUSED_PENALTY_WEIGHT) -> float:
    """Negated binding score with a penalty for every fused ring beyond two."""
    if not math.isfinite(vina):
        raise ValueError(f"non-finite binding score {vina}")
    if fused_count < 0:
        raise ValueError("fused ring count must be >= 0")
    if lam < 0:
        raise ValueError("penalty weight must be >= 0")
    return -(vina + lam * max(0, fused_count - 2))


def build_preference_pairs(
    pocket_id: str,
    scored: Sequence[ScoredMolecule],
    lam: float = DEFAULT_FUSED_PENALTY_WEIGHT,
) -> PreferencePair:
    """Best-vs-worst pair by reward; ties resolved by smaller canonical string.

    The rejected side never reuses the chosen molecule, so duplicate entries
    of a single molecule cannot produce a degenerate pair.
    """
    if len({s.smiles for s in scored}) < 2:
        raise DegeneratePool(f"pocket {pocket_id}: fewer than 2 distinct molecules")
    rewards = [(reward(s.vina, s.fused_count, lam), s) for s in scored]
    best_reward, chosen = min(rewards, key=lambda pair: (-pair[0], pair[1].smiles))
    worst_candidates = [(r, s) for r, s in rewards if s.smiles != chosen.smiles]
    worst_reward, rejected = min(worst_candidates, key=lambda pair: (pair[0], pair[1].smiles))
    return PreferencePair(
        pocket_id=pocket_id,
        chosen=chosen.smiles,
        rejected=rejected.smiles,
        reward_chosen=best_reward,
        reward_rejected=worst_reward,
    )


def curate_dpo_set(
    pockets: Sequence[str],
    sampler: Callable[[str, int], Sequence[str]],
    n_samples: int = DEFAULT_FILTER_SAMPLES,
    threshold: float = DEFAULT_DIVERSITY_THRESHOLD,
    radius: int = DEFAULT_RADIUS,
    nbits: int = DEFAULT_NBITS,
) -> CurationResult:
    """Diversity-filter preference pockets using the model's own candidates.

    The sampler may emit invalid strings; diversity is measured over the valid
    ones. Pockets whose sampler fails or yields fewer than two valid molecules
    are dropped with the reason recorded.
    """
    selected: list[str] = []
    audit: list[CurationAudit] = []
    for pocket_id in pockets:
        try:
            candidates = list(sampler(pocket_id, n_samples))
        except Exception as exc:  # sampler errors are per-pocket, not fatal
            audit.append(CurationAudit(pocket_id, False, None, 0, f"sampler error: {exc}"))
            continue
        valid = [s for s in candidates if try_parse(s) is not None]
        if len(valid) < 2:
            audit.append(
                CurationAudit(pocket_id, False, None, len(valid), "fewer than 2 valid molecules")
            )
            continue
        fps = [morgan_fingerprint(parse_smiles(s), radius, nbits) for s in valid]
        try:
            measured = diversity(fps)
        except TooFewItems:
            audit.append(CurationAudit(pocket_id, False, None, len(valid), "too few fingerprints"))
            continue
        kept = measured > threshold
        reason = "kept" if kept else f"diversity {measured:.4f} <= {threshold}"
        audit.append(CurationAudit(pocket_id, kept, measured, len(valid), reason))
        if kept:
            selected.append(pocket_id)
    return CurationResult(selected=tuple(selected), audit=tuple(audit))
