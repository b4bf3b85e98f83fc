"""Pocket featurization: a deterministic stand-in for a structure encoder.

Pockets with a residue sequence get per-residue one-hot + position features
pushed through a fixed random projection; pockets without one get a
pseudo-random feature block keyed by (pocket_id, seed). Either way the output
is a deterministic function of its inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..hashutil import derive_seed

_AMINO_ACIDS = "ACDEFGHIKLMNPQRSTVWY"
_AA_INDEX = {aa: i for i, aa in enumerate(_AMINO_ACIDS)}
DEFAULT_STRUCT_TOKENS = 8


@dataclass(frozen=True, eq=False)
class PocketFeatures:
    pocket_id: str
    vectors: np.ndarray  # (n_tokens, d_feat)
    pooled: np.ndarray  # (d_feat,)

    @property
    def n_tokens(self) -> int:
        return int(self.vectors.shape[0])

    @property
    def d_feat(self) -> int:
        return int(self.vectors.shape[1])


def _pool(vectors: np.ndarray) -> np.ndarray:
    return vectors.mean(axis=0)


def featurize_pocket(
    pocket_id: str,
    d_feat: int,
    seed: int,
    pocket_sequence: str | None = None,
    n_struct_tokens: int = DEFAULT_STRUCT_TOKENS,
) -> PocketFeatures:
    if pocket_sequence:
        raw = np.zeros((len(pocket_sequence), len(_AMINO_ACIDS) + 3))
        for i, aa in enumerate(pocket_sequence):
            raw[i, _AA_INDEX.get(aa, 0)] = 1.0
            if aa not in _AA_INDEX:
                raw[i, -3] = 1.0
            raw[i, -2] = np.sin(i / 8.0)
            raw[i, -1] = np.cos(i / 8.0)
        proj_rng = np.random.default_rng(derive_seed("feature-projection", seed))
        projection = proj_rng.standard_normal((raw.shape[1], d_feat)) / np.sqrt(raw.shape[1])
        vectors = raw @ projection
    else:
        rng = np.random.default_rng(derive_seed("pocket-features", pocket_id, seed))
        vectors = rng.standard_normal((n_struct_tokens, d_feat))
    return PocketFeatures(pocket_id=pocket_id, vectors=vectors, pooled=_pool(vectors))


def ligand_feature_vector(smiles: str, d_feat: int, seed: int) -> np.ndarray:
    """Deterministic feature vector standing in for an encoded reference ligand."""
    rng = np.random.default_rng(derive_seed("ligand-features", smiles, seed))
    return rng.standard_normal(d_feat)


def complex_feature_vector(pocket: PocketFeatures, ligand_smiles: str, seed: int) -> np.ndarray:
    """Pooled feature of a pocket together with one bound ligand."""
    ligand = ligand_feature_vector(ligand_smiles, pocket.d_feat, seed)
    return 0.5 * (pocket.pooled + ligand)
