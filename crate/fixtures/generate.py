"""Regenerate the FCIDUMP fixtures shipped with the repository.

Requires PySCF. Each fixture is an RHF-canonical molecular-orbital Hamiltonian.
Reference energies (RHF, MP2, FCI) computed by PySCF are written to
reference.json for external cross-checks.
"""
import json
import os

import numpy as np
from pyscf import ao2mo, fci, gto, mp, scf
from pyscf.tools import fcidump

HERE = os.path.dirname(os.path.abspath(__file__))


def chain(n, r):
    return "; ".join(f"H 0 0 {i * r:.6f}" for i in range(n))


def build(name, atom, basis, keep=None, do_fci=True):
    mol = gto.M(atom=atom, basis=basis, unit="Angstrom", verbose=0)
    mf = scf.RHF(mol)
    mf.conv_tol = 1e-12
    mf.kernel()
    assert mf.converged, name
    c = mf.mo_coeff
    if keep is not None:
        c = c[:, :keep]
    norb = c.shape[1]
    h1 = c.T @ mf.get_hcore() @ c
    eri = ao2mo.restore(1, ao2mo.full(mol, c), norb)
    ecore = mol.energy_nuc()
    path = os.path.join(HERE, name + ".fcidump")
    fcidump.from_integrals(path, h1, eri, norb, mol.nelectron, ecore, ms=0, tol=1e-15)
    ref = {"norb": norb, "nelec": mol.nelectron, "e_rhf_full_basis": mf.e_tot}
    if keep is None:
        ref["e_mp2"] = mp.MP2(mf).kernel()[0]
    if do_fci:
        cis = fci.direct_spin1.FCI()
        cis.conv_tol = 1e-13
        e, _ = cis.kernel(h1, eri, norb, mol.nelectron, ecore=ecore)
        ref["e_fci"] = e
    return name, ref


def main():
    refs = {}
    jobs = [
        ("h2_sto3g_r0.74", chain(2, 0.74), "sto-3g", None, True),
        ("h2_631g3_r0.74", chain(2, 0.74), "6-31g", 3, True),
        ("h4_chain_sto3g_r0.70", chain(4, 0.70), "sto-3g", None, True),
        ("h4_chain_631g_r0.80", chain(4, 0.80), "6-31g", None, True),
        ("h6_chain_sto3g_r0.90", chain(6, 0.90), "sto-3g", None, True),
        ("h6_chain_631g_r1.00", chain(6, 1.00), "6-31g", None, False),
    ]
    for r in (1.0, 1.5, 2.0, 2.5, 3.0):
        jobs.append((f"scan/h4_chain_sto3g_r{r:.2f}", chain(4, r), "sto-3g", None, True))
    os.makedirs(os.path.join(HERE, "scan"), exist_ok=True)
    for name, atom, basis, keep, do_fci in jobs:
        key, ref = build(name, atom, basis, keep, do_fci)
        refs[key] = ref
    with open(os.path.join(HERE, "reference.json"), "w") as f:
        json.dump(refs, f, indent=2, sort_keys=True)


if __name__ == "__main__":
    main()
