"""Regenerates smiles_reference.json with RDKit.

Each source molecule contributes its RDKit canonical SMILES and one
randomized SMILES. For every string the table records per-atom
(atomic number, formal charge, total H, aromatic, in ring, degree) in
string order, and each bond as (begin, end, order).

    python3 make_reference.py > smiles_reference.json
"""
import json
import sys

from rdkit import Chem, rdBase

rdBase.DisableLog("rdApp.*")

SOURCES = """
CC(=O)Oc1ccccc1C(=O)O
CC(C)Cc1ccc(cc1)C(C)C(=O)O
CN1C=NC2=C1C(=O)N(C(=O)N2C)C
CC(=O)Nc1ccc(O)cc1
OC(=O)c1ccccc1O
C1CCCCC1
c1ccc2ccccc2c1
c1ccc2c(c1)ccc1ccccc12
c1ccncc1
c1cc[nH]c1
c1ccoc1
c1ccsc1
c1cnc[nH]1
c1ncncn1
c1ccc2[nH]ccc2c1
c1ccc2ncccc2c1
c1ccc2occc2c1
c1ccc2sccc2c1
O=c1cccc[nH]1
O=c1[nH]cnc2[nH]cnc12
Nc1ncnc2[nH]cnc12
O=C1NC(=O)C=C1
CC1=CC(=O)C=CC1=O
C1=CC=CC=C1
C=CC=C
C#CC
CC#N
N#Cc1ccccc1
C=C(C)C(=O)OC
CCOC(=O)C
CCN(CC)CC
C[N+](C)(C)C
C[N+](=O)[O-]
[O-][N+](=O)c1ccc(cc1)N
CS(=O)(=O)N
CS(C)=O
OP(=O)(O)O
COP(=O)(OC)OC
FC(F)(F)c1ccccc1
ClC(Cl)Cl
BrCCBr
IC
Fc1ccc(F)cc1
Clc1ccc(Cl)c(Cl)c1
OB(O)c1ccccc1
B(F)(F)F
C1CC1
C1CCC1
C1CCCC1
C1CCCCCC1
C1CCCCCCC1
C1CC2CCC1CC2
C1CC2CC1C=C2
C12CC3CC(C1)CC(C3)C2
C1CCC2(CC1)CCCC2
CC12CCC3C(CCC4=CC(=O)CCC34C)C1CCC2O
O=C1CCCN1
O=C1CCCCN1
C1COCCN1
C1CNCCN1
C1CCNCC1
C1CCOC1
C1CSCS1
O=S1(=O)CCCC1
CN1CCC[C@H]1c1cccnc1
N[C@@H](C)C(=O)O
N[C@@H](Cc1ccccc1)C(=O)O
N[C@@H](CO)C(=O)O
N[C@@H](CS)C(=O)O
NCC(=O)O
N[C@@H](CCCCN)C(=O)O
N[C@@H](CC(=O)O)C(=O)O
N[C@@H](Cc1c[nH]c2ccccc12)C(=O)O
N[C@@H](Cc1cnc[nH]1)C(=O)O
O=C(O)[C@@H]1CCCN1
C[C@H](O)[C@H](N)C(=O)O
CC[C@H](C)[C@H](N)C(=O)O
C/C=C/C
C/C=C\\C
F/C=C/F
CC/C=C\\C/C=C\\CC
O/N=C/c1ccccc1
C/C(=N/O)c1ccccc1
CC(C)(C)c1ccc(O)cc1
COc1ccc(CCN)cc1
CN(C)CCCN1c2ccccc2CCc2ccccc21
CN1C(=O)CN=C(c2ccccc2)c2cc(Cl)ccc21
CCN(CC)C(=O)C1C=C2c3cccc4[nH]cc(c34)CC2N(C)C1
COc1cc2c(cc1OC)CC(=O)C2
CC(C)NCC(O)COc1cccc2ccccc12
CC(C)NCC(O)c1ccc(O)c(O)c1
CNCC(O)c1ccc(O)c(O)c1
NCCc1ccc(O)c(O)c1
NCCc1c[nH]c2ccc(O)cc12
CN1CCc2cccc3c2C1Cc1ccc(O)c(O)c1-3
COc1ccc2[nH]cc(CCN(C)C)c2c1
CC(=O)OCC[N+](C)(C)C
C[C@]12CC[C@H]3[C@@H](CCc4cc(O)ccc43)[C@@H]1CC[C@@H]2O
OC[C@H]1OC(O)[C@H](O)[C@@H](O)[C@@H]1O
OC[C@H]1O[C@@H](O[C@]2(CO)O[C@H](CO)[C@@H](O)[C@@H]2O)[C@H](O)[C@@H](O)[C@@H]1O
O=C(O)CC(O)(CC(=O)O)C(=O)O
CC(O)C(=O)O
OCC(O)CO
C(=O)O
C=O
CO
CCO
CCCCCCCCCCCCCCCC(=O)O
CCCCC/C=C\\C/C=C\\CCCCCCCC(=O)O
Cc1ccccc1
Cc1ccccc1C
Cc1cccc(C)c1
Cc1ccc(C)cc1
Oc1ccccc1
Nc1ccccc1
O=Cc1ccccc1
O=C(c1ccccc1)c1ccccc1
c1ccc(cc1)-c1ccccc1
c1ccc(cc1)Cc1ccccc1
c1ccc(cc1)C=Cc1ccccc1
c1ccc(cc1)C#Cc1ccccc1
c1ccc(cc1)Oc1ccccc1
c1ccc(cc1)Sc1ccccc1
c1ccc(cc1)Nc1ccccc1
c1ccc(cc1)N=Nc1ccccc1
O=C(Nc1ccccc1)c1ccccc1
O=S(=O)(Nc1ccccc1)c1ccccc1
Cc1ccc(cc1)S(=O)(=O)N
Nc1ccc(cc1)S(=O)(=O)Nc1ncccn1
CC1(C)S[C@@H]2[C@H](NC(=O)Cc3ccccc3)C(=O)N2[C@H]1C(=O)O
CC1=C(C(=O)N2[C@H](SC1)[C@@H](NC(=O)[C@H](N)c1ccccc1)C2=O)C(=O)O
COC(=O)C1=C(C)NC(C)=C(C1c1ccccc1[N+](=O)[O-])C(=O)OC
CC(C)(C)NCC(O)c1ccc(O)c(CO)c1
Clc1ccc2c(c1)C(=NCC(=O)N2)c1ccccc1
CN1CCN(CC1)C1=Nc2cc(Cl)ccc2Nc2ccccc21
Fc1ccc(cc1)C(=O)CCCN1CCC(O)(CC1)c1ccc(Cl)cc1
OC(CCN1CCCCC1)(C1CCCCC1)c1ccccc1
CN1[C@H]2CC[C@@H]1C[C@@H](C2)OC(=O)C(CO)c1ccccc1
COc1ccc2cc(ccc2c1)[C@H](C)C(=O)O
CC(C)Cc1ccc(cc1)[C@@H](C)C(=O)O
OC(=O)Cc1ccccc1Nc1c(Cl)cccc1Cl
CN(C)C(=N)N=C(N)N
CC(=O)Nc1nnc(s1)S(N)(=O)=O
NC(=O)N
NC(=N)N
S=C(N)N
O=C=O
N#N
O=O
[H][H]
[2H]O[2H]
[NH4+]
[OH-]
[Na+]
[Cl-]
[O-]C(=O)C
C[S+](C)C
C[n+]1ccccc1
[O-][n+]1ccccc1
c1cc[n-]c1
[nH]1cccc1
Cn1cccc1
Cn1ccnc1
Cn1cncn1
c1cnnnc1
c1nnn[nH]1
c1csnn1
c1conc1
c1cscn1
c1ccc2[nH]ncc2c1
c1ccc2ncncc2c1
c1ccc2nc3ccccc3cc2c1
c1ccc2c(c1)[nH]c1ccccc12
c1ccc2cc3ccccc3cc2c1
c1cc2ccc3cccc4ccc(c1)c2c34
O=c1ccc2ccccc2o1
O=C1C=CC(=O)C=C1
O=C1c2ccccc2C(=O)c2ccccc12
C1=CCC=CC1
C1=CC=CC1
C1=CCCC1
C=C1CCCCC1
CC1=CCCCC1
C1CC=CC1
C1CCC=CC1
CC(C)=CCCC(C)=CCO
CC(=C)C1CCC(C)=CC1
CC1=CC[C@H](CC1)C(C)=C
CC(C)[C@@H]1CC[C@@H](C)C[C@H]1O
O=C1CC[C@@H]2[C@H]1CC=C2
C[Si](C)(C)C
C[Se]C
[Se]1C=CC=C1
C[As](C)C
[Fe+2]
[Cu+]
Cl[Pt](Cl)(N)N
O=[Mn](=O)(=O)[O-]
[O-][Cl+3]([O-])([O-])[O-]
F[P-](F)(F)(F)(F)F
F[B-](F)(F)F
C[C@@H](F)Cl
F[C@](Cl)(Br)I
F[C@@](Cl)(Br)I
C[C@@]1(O)CCCC[C@H]1O
C1C[C@H]2CC[C@@H]1C2
O[C@H]1CC[C@H](CC1)O
CC(C)(C)OC(=O)N[C@@H](C)C(=O)O
CCOC(=O)C(C)(C)Oc1ccc(Cl)cc1
CC(=O)OC1=CC=CC=C1C(=O)O
OC1=CC=CC=C1
N1C=CC=C1
C1=CSC=C1
C1=COC=C1
C1=CN=CC=C1
O=C1NC=CC=C1
CCCCCCCC
CC(C)C(C)C(C)C
CC(C)(C)C(C)(C)C
C%10CCCCC%10
C1CC2CC3CC4CC5CC6CC1C2C3C4C56
"""


def atoms_bonds(mol):
    atoms = [
        [a.GetAtomicNum(), a.GetFormalCharge(), a.GetTotalNumHs(), a.GetIsAromatic(), a.IsInRing(), a.GetDegree()]
        for a in mol.GetAtoms()
    ]
    names = {
        Chem.BondType.SINGLE: "S",
        Chem.BondType.DOUBLE: "D",
        Chem.BondType.TRIPLE: "T",
        Chem.BondType.AROMATIC: "A",
    }
    bonds = [[b.GetBeginAtomIdx(), b.GetEndAtomIdx(), names[b.GetBondType()]] for b in mol.GetBonds()]
    return atoms, bonds


def main():
    rows = []
    seen = set()
    for i, line in enumerate(SOURCES.split()):
        mol = Chem.MolFromSmiles(line)
        if mol is None:
            print(f"skipping unparsable {line}", file=sys.stderr)
            continue
        canonical = Chem.MolToSmiles(mol)
        variant = Chem.MolToRandomSmilesVect(mol, 1, randomSeed=1000 + i)[0]
        for s in (canonical, variant):
            if s in seen:
                continue
            m = Chem.MolFromSmiles(s)
            if m is None:
                continue
            seen.add(s)
            atoms, bonds = atoms_bonds(m)
            rows.append({"smiles": s, "atoms": atoms, "bonds": bonds})
    json.dump({"rdkit_version": rdBase.rdkitVersion, "molecules": rows}, sys.stdout, indent=None)
    print()
    print(f"{len(rows)} entries", file=sys.stderr)


if __name__ == "__main__":
    main()
