import itertools

import numpy as np

from molchord.molgraph import (
    canonical_signature,
    canonical_smiles,
    count_fused_rings,
    parse_smiles,
    perceive_rings,
    permute_atoms,
)

from .oracles import molecules_isomorphic


def test_same_graph_same_string():
    assert canonical_smiles(parse_smiles("OCC")) == canonical_smiles(parse_smiles("CCO"))
    assert canonical_smiles(parse_smiles("C(O)C")) == canonical_smiles(parse_smiles("CCO"))


def test_idempotent(small_corpus):
    for smiles in small_corpus[:60]:
        once = canonical_smiles(parse_smiles(smiles))
        assert canonical_smiles(parse_smiles(once)) == once


def test_permutation_invariance_twenty_atom_fixture(rng):
    fixture = "CCCCC(=O)Oc1ccc(CC(N)C(=O)O)cc1Cl"  # 20 heavy atoms
    mol = parse_smiles(fixture)
    assert len(mol.atoms) == 20
    reference = canonical_smiles(mol)
    seen = set()
    for _ in range(100):
        perm = list(rng.permutation(len(mol.atoms)))
        permuted = perceive_rings(permute_atoms(mol, perm))
        seen.add(canonical_smiles(permuted))
    assert seen == {reference}


def test_round_trip_preserves_counts(small_corpus):
    for smiles in small_corpus:
        mol = parse_smiles(smiles)
        back = parse_smiles(canonical_smiles(mol))
        assert len(back.atoms) == len(mol.atoms)
        assert len(back.bonds) == len(mol.bonds)
        assert len(back.rings) == len(mol.rings)
        assert count_fused_rings(back) == count_fused_rings(mol)
        assert molecules_isomorphic(mol, back)


def test_class_function_small_molecules():
    probes = [
        "CCO", "OCC", "CCN", "CC=O", "CC(C)C", "CCCC", "C1CC1", "C1CCC1",
        "c1ccccc1", "C1=CC=CC=C1", "CC(N)=O", "CNC=O", "[NH4+]", "N",
        "CC(=O)O", "OC(=O)C", "C1CC1C", "CC1CC1",
    ]
    mols = [parse_smiles(s) for s in probes]
    for (s1, m1), (s2, m2) in itertools.combinations(zip(probes, mols), 2):
        same_string = canonical_smiles(m1) == canonical_smiles(m2)
        assert same_string == molecules_isomorphic(m1, m2), (s1, s2)


def test_signature_tracks_string(small_corpus):
    for smiles in small_corpus[:40]:
        mol = parse_smiles(smiles)
        assert (canonical_signature(mol) == canonical_signature(parse_smiles(smiles))) is True


def test_charge_and_hydrogen_emission():
    for text in ["[NH4+]", "C[N+](C)(C)C", "[O-]c1ccccc1", "[Fe+2]", "[SiH4]"]:
        out = canonical_smiles(parse_smiles(text))
        back = parse_smiles(out)
        assert canonical_smiles(back) == out
        assert molecules_isomorphic(parse_smiles(text), back)


def test_biphenyl_single_bond_survives():
    out = canonical_smiles(parse_smiles("c1ccc(-c2ccccc2)cc1"))
    mol = parse_smiles(out)
    assert count_fused_rings(mol) == 0
    assert len(mol.rings) == 2


def test_disconnected_components_sorted():
    a = canonical_smiles(parse_smiles("CCO.[Na+]"))
    b = canonical_smiles(parse_smiles("[Na+].OCC"))
    assert a == b
    assert "." in a


def test_ring_closure_digit_reuse():
    # three separate rings reuse digit 1 after it closes
    out = canonical_smiles(parse_smiles("C1CC1C1CC1C1CC1"))
    back = parse_smiles(out)
    assert len(back.rings) == 3


def test_class_function_on_adversarial_graphs():
    """Random labeled graphs (valence ignored) plus classic regular near-twins:
    canonical strings must separate exactly the non-isomorphic ones."""
    from molchord.molgraph import Atom, Bond, BondOrder, make_molecule

    rng = np.random.default_rng(12345)
    elements = ["C", "N", "O", "S"]

    def random_graph(n, extra_edges):
        atoms = [Atom(element=elements[rng.integers(len(elements))]) for _ in range(n)]
        edges = set()
        order = list(rng.permutation(n))
        for i in range(1, n):
            a, b = order[i], order[int(rng.integers(i))]
            edges.add((min(a, b), max(a, b)))
        attempts = 0
        while len(edges) < n - 1 + extra_edges and attempts < 50:
            a, b = rng.integers(n), rng.integers(n)
            attempts += 1
            if a != b:
                edges.add((min(a, b), max(a, b)))
        bonds = [Bond(a, b, BondOrder(int(rng.choice([1, 1, 1, 2])))) for a, b in sorted(edges)]
        return perceive_rings(make_molecule(atoms, bonds))

    mols = [random_graph(int(rng.integers(2, 9)), int(rng.integers(0, 4))) for _ in range(150)]
    carbons = lambda n: [Atom(element="C") for _ in range(n)]
    for n in range(3, 8):  # plain cycles
        mols.append(perceive_rings(make_molecule(carbons(n), [Bond(i, (i + 1) % n) for i in range(n)])))
    # complete graph, 3-cube, and the K3,3 / prism pair (3-regular near-twins)
    mols.append(perceive_rings(make_molecule(carbons(4), [Bond(i, j) for i in range(4) for j in range(i + 1, 4)])))
    cube = [(0, 1), (0, 2), (0, 4), (1, 3), (1, 5), (2, 3), (2, 6), (3, 7), (4, 5), (4, 6), (5, 7), (6, 7)]
    mols.append(perceive_rings(make_molecule(carbons(8), [Bond(a, b) for a, b in cube])))
    k33 = [Bond(i, j) for i in range(3) for j in range(3, 6)]
    prism = [Bond(*e) for e in [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5), (0, 3), (1, 4), (2, 5)]]
    mols.append(perceive_rings(make_molecule(carbons(6), k33)))
    mols.append(perceive_rings(make_molecule(carbons(6), prism)))

    canon = [canonical_smiles(m) for m in mols]
    assert canon[-2] != canon[-1]  # K3,3 vs prism
    for mol, reference in zip(mols, canon):
        for _ in range(5):
            perm = list(rng.permutation(len(mol.atoms)))
            assert canonical_smiles(perceive_rings(permute_atoms(mol, perm))) == reference

    from collections import defaultdict

    by_profile = defaultdict(list)
    for i, mol in enumerate(mols):
        key = (
            len(mol.atoms),
            len(mol.bonds),
            tuple(sorted(a.label() for a in mol.atoms)),
            tuple(sorted(int(b.order) for b in mol.bonds)),
        )
        by_profile[key].append(i)
    for bucket in by_profile.values():
        for i, j in itertools.combinations(bucket, 2):
            assert (canon[i] == canon[j]) == molecules_isomorphic(mols[i], mols[j])


def test_symmetric_molecules():
    # highly symmetric inputs still produce one label
    for text in ["C1CCCCC1", "c1ccccc1", "C(C)(C)(C)C", "C1CC2CCC1CC2"]:
        mol = parse_smiles(text)
        reference = canonical_smiles(mol)
        rng = np.random.default_rng(7)
        for _ in range(20):
            perm = list(rng.permutation(len(mol.atoms)))
            assert canonical_smiles(perceive_rings(permute_atoms(mol, perm))) == reference
