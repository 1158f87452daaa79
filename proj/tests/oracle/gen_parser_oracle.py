#!/usr/bin/env python3
# SPDX-FileCopyrightText: Copyright (c) 2026 The molfusion authors. All rights reserved.
# SPDX-License-Identifier: Apache-2.0
"""Freeze RDKit reference values for the parser oracle and spelling-pair suites.

Requires rdkit. The generated TSV files are committed under tests/data and
read by the C++ tests; rerun only when the corpus changes.
"""
import os
import sys

from rdkit import Chem

CORPUS = [
    "C", "CC", "CCO", "OCC", "CC(C)C", "CC(C)(C)C", "C=C", "C#N", "CC=O",
    "CC(=O)O", "CC(=O)Oc1ccccc1C(=O)O", "CC(=O)Nc1ccc(O)cc1", "c1ccccc1",
    "C1CCCCC1", "C1CC1", "c1ccncc1", "c1ccoc1", "c1ccsc1", "c1cc[nH]c1",
    "Cn1cccc1", "c1ccc2ccccc2c1", "c1ccc2[nH]ccc2c1", "c1ccccc1-c1ccccc1",
    "C1CCC2CCCCC2C1", "C12CC1C2", "C1CC2CC1CC2", "O=C1CCCCC1", "OC1=CC=CC=C1",
    "ClC(Cl)(Cl)Cl", "BrCCBr", "FC(F)(F)c1ccccc1", "IC", "CCN(CC)CC",
    "C[N+](C)(C)C", "CC(=O)[O-]", "[NH4+]", "[O-][N+](=O)c1ccccc1", "C[S](=O)(=O)C",
    "CS(=O)C", "OP(=O)(O)O", "B(O)O", "CC[Se]CC", "C/C=C/C", "N[C@@H](C)C(=O)O",
    "C%10CCCCC%10", "CN1CCC[C@H]1c1cccnc1", "CN1C=NC2=C1C(=O)N(C(=O)N2C)C",
    "OC[C@H]1OC(O)[C@H](O)[C@@H](O)[C@@H]1O", "Cc1ccc(cc1)S(=O)(=O)N", "c1ccc2c(c1)oc1ccccc12",
]

PAIRS = [
    ("CCO", "OCC"), ("CC(=O)O", "OC(C)=O"), ("c1ccccc1O", "Oc1ccccc1"),
    ("CC(C)O", "OC(C)C"), ("c1ccncc1", "n1ccccc1"), ("C1CCCCC1N", "NC1CCCCC1"),
    ("CC(=O)Oc1ccccc1C(=O)O", "OC(=O)c1ccccc1OC(C)=O"), ("CCN(CC)CC", "N(CC)(CC)CC"),
    ("c1ccc2ccccc2c1", "c1cccc2c1cccc2"), ("ClCCl", "C(Cl)Cl"), ("C=CC=C", "C(=C)C=C"),
    ("CC#N", "N#CC"), ("Cc1ccccc1", "c1ccc(C)cc1"), ("OCC(O)CO", "C(O)C(O)CO"),
    ("CC(=O)Nc1ccc(O)cc1", "Oc1ccc(NC(C)=O)cc1"), ("c1ccoc1", "o1cccc1"),
    ("c1cc[nH]c1", "[nH]1cccc1"), ("C1CC1C", "CC1CC1"), ("FC(F)F", "C(F)(F)F"),
    ("CCCCBr", "BrCCCC"), ("CC(C)(C)O", "OC(C)(C)C"), ("c1ccccc1-c1ccccc1", "c1ccc(cc1)-c1ccccc1"),
    ("CS(=O)C", "O=S(C)C"), ("C[N+](C)(C)C", "[N+](C)(C)(C)C"), ("CC(=O)[O-]", "[O-]C(C)=O"),
    ("C1CCC2CCCCC2C1", "C1CCC2CCCCC2C1".replace("C1CCC2", "C2CCC1").replace("C2C1", "C1C2")),
    ("c1ccsc1C", "Cc1cccs1"), ("NCCc1ccc(O)c(O)c1", "Oc1ccc(CCN)cc1O"),
    ("OC(=O)CCC(=O)O", "O=C(O)CCC(O)=O"), ("C1=CC=CC=C1", "C=1C=CC=CC=1"),
]


def ring_flags(mol):
    info = mol.GetRingInfo()
    return "".join("1" if info.NumAtomRings(a.GetIdx()) > 0 else "0" for a in mol.GetAtoms())


def main(out_dir):
    rows = []
    for smi in CORPUS:
        mol = Chem.MolFromSmiles(smi)
        if mol is None:
            sys.exit(f"rdkit rejected {smi}")
        elems = ",".join(sorted(a.GetSymbol() for a in mol.GetAtoms()))
        hs = ",".join(str(a.GetTotalNumHs()) for a in mol.GetAtoms())
        rows.append("\t".join([smi, str(mol.GetNumAtoms()), str(mol.GetNumBonds()), elems,
                               ring_flags(mol), hs]))
    if len(rows) != 50:
        sys.exit(f"corpus must have 50 entries, has {len(rows)}")
    with open(os.path.join(out_dir, "parser_oracle.tsv"), "w") as fh:
        fh.write("# smiles\tn_atoms\tn_bonds\telements\tring_flags\ttotal_h\n")
        fh.write("\n".join(rows) + "\n")

    if len(PAIRS) != 30:
        sys.exit(f"need 30 pairs, have {len(PAIRS)}")
    with open(os.path.join(out_dir, "spelling_pairs.tsv"), "w") as fh:
        fh.write("# smiles_a\tsmiles_b\trdkit_canonical\n")
        for a, b in PAIRS:
            ca = Chem.MolToSmiles(Chem.MolFromSmiles(a))
            cb = Chem.MolToSmiles(Chem.MolFromSmiles(b))
            if ca != cb or a == b:
                sys.exit(f"pair is not two spellings of one molecule: {a} {b}")
            fh.write(f"{a}\t{b}\t{ca}\n")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else os.path.join(os.path.dirname(__file__), "..", "data"))
