"""SMILES parsing, molecular graphs, ring perception, and fingerprints."""

from .canon import canonical_ranks, canonical_signature, canonical_smiles
from .errors import (
    AromaticityError,
    EmptyInput,
    SmilesError,
    SmilesFeatureWarning,
    SmilesSyntaxError,
    UnclosedBranch,
    UnknownElement,
    UnmatchedRingBond,
    ValenceIssue,
    ValenceViolation,
)
from .fingerprint import (
    DEFAULT_NBITS,
    DEFAULT_RADIUS,
    Fingerprint,
    WidthMismatch,
    fingerprint_from_bits,
    morgan_fingerprint,
    tanimoto,
)
from .model import (
    AROMATIC_ORGANIC,
    ORGANIC_SUBSET,
    Atom,
    Bond,
    BondOrder,
    Molecule,
    make_molecule,
    max_valence,
    permute_atoms,
)
from .parser import parse_smiles, try_parse, validate_valence
from .rings import count_fused_rings, cycle_edges, normalize_cycle, perceive_rings

__all__ = [
    "AROMATIC_ORGANIC",
    "AromaticityError",
    "Atom",
    "Bond",
    "BondOrder",
    "DEFAULT_NBITS",
    "DEFAULT_RADIUS",
    "EmptyInput",
    "Fingerprint",
    "Molecule",
    "ORGANIC_SUBSET",
    "SmilesError",
    "SmilesFeatureWarning",
    "SmilesSyntaxError",
    "UnclosedBranch",
    "UnknownElement",
    "UnmatchedRingBond",
    "ValenceIssue",
    "ValenceViolation",
    "WidthMismatch",
    "canonical_ranks",
    "canonical_signature",
    "canonical_smiles",
    "count_fused_rings",
    "cycle_edges",
    "fingerprint_from_bits",
    "make_molecule",
    "max_valence",
    "morgan_fingerprint",
    "normalize_cycle",
    "parse_smiles",
    "try_parse",
    "permute_atoms",
    "perceive_rings",
    "tanimoto",
    "validate_valence",
]
