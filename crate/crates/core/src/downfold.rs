//! Active-space Hamiltonians: the bare frozen-core CAS Hamiltonian and its
//! one-body downfolded (OBDF) correction from external MP2 amplitudes.

use std::collections::BTreeSet;

use ndarray::{Array2, Array4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrals::{closed_shell_occupations, sub_block, write_fcidump, IntegralSet};
use crate::obmp2::{reduce, Amplitudes, DoubleCommutator};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActivePartition {
    pub core: Vec<usize>,
    pub active: Vec<usize>,
    pub virtual_ext: Vec<usize>,
    pub n_act_elec: usize,
}

impl ActivePartition {
    /// Partition from explicit core and active lists; the rest is external virtual.
    pub fn from_lists(ints: &IntegralSet, core: Vec<usize>, active: Vec<usize>) -> Result<Self> {
        let n = ints.n_orb;
        let mut seen = BTreeSet::new();
        for &p in core.iter().chain(&active) {
            if p >= n || !seen.insert(p) {
                return Err(Error::InfeasibleActive(format!(
                    "orbital {p} out of range or repeated"
                )));
            }
        }
        if active.is_empty() {
            return Err(Error::InfeasibleActive("empty active space".into()));
        }
        let n_core_elec = 2 * core.len();
        if n_core_elec > ints.n_elec {
            return Err(Error::InfeasibleActive(format!(
                "{} core orbitals for {} electrons",
                core.len(),
                ints.n_elec
            )));
        }
        let n_act_elec = ints.n_elec - n_core_elec;
        if n_act_elec > 2 * active.len() {
            return Err(Error::InfeasibleActive(format!(
                "{n_act_elec} electrons do not fit in {} active orbitals",
                active.len()
            )));
        }
        let virtual_ext = (0..n).filter(|p| !seen.contains(p)).collect();
        Ok(ActivePartition {
            core,
            active,
            virtual_ext,
            n_act_elec,
        })
    }

    pub fn is_full_space(&self) -> bool {
        self.core.is_empty() && self.virtual_ext.is_empty()
    }

    pub fn n_act(&self) -> usize {
        self.active.len()
    }
}

/// `n_act` orbitals around the Fermi level of the current (canonical,
/// energy-ordered) basis, holding `n_act_elec` electrons.
pub fn select_active(
    ints: &IntegralSet,
    n_act: usize,
    n_act_elec: usize,
) -> Result<ActivePartition> {
    if n_act == 0 || n_act > ints.n_orb {
        return Err(Error::InfeasibleActive(format!(
            "n_act={n_act} with {} orbitals",
            ints.n_orb
        )));
    }
    if n_act_elec > ints.n_elec || !(ints.n_elec - n_act_elec).is_multiple_of(2) || n_act_elec > 2 * n_act {
        return Err(Error::InfeasibleActive(format!(
            "{n_act_elec} active electrons in {n_act} orbitals, {} electrons total",
            ints.n_elec
        )));
    }
    let n_core = (ints.n_elec - n_act_elec) / 2;
    if n_core + n_act > ints.n_orb {
        return Err(Error::InfeasibleActive(format!(
            "{n_core} core + {n_act} active > {} orbitals",
            ints.n_orb
        )));
    }
    ActivePartition::from_lists(
        ints,
        (0..n_core).collect(),
        (n_core..n_core + n_act).collect(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HamiltonianKind {
    Cas,
    Obdf,
}

/// Active-space Hamiltonian `e_scalar + sum h_eff E + 1/2 sum (uv|wx) ...`.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveHamiltonian {
    pub n_act: usize,
    pub n_alpha: usize,
    pub n_beta: usize,
    pub h_eff: Array2<f64>,
    pub g_act: Array4<f64>,
    pub e_scalar: f64,
    pub label: HamiltonianKind,
}

impl EffectiveHamiltonian {
    pub fn to_integral_set(&self) -> IntegralSet {
        IntegralSet {
            n_orb: self.n_act,
            n_elec: self.n_alpha + self.n_beta,
            ms2: self.n_alpha as i32 - self.n_beta as i32,
            h: self.h_eff.clone(),
            g: self.g_act.clone(),
            e_core: self.e_scalar,
        }
    }

    pub fn to_fcidump(&self) -> String {
        write_fcidump(&self.to_integral_set())
    }

    /// The closed-shell reference determinant energy within the active space.
    pub fn reference_energy(&self) -> f64 {
        let n_occ = self.n_alpha.min(self.n_beta);
        let mut e = self.e_scalar;
        for i in 0..n_occ {
            e += 2.0 * self.h_eff[[i, i]];
            for j in 0..n_occ {
                e += 2.0 * self.g_act[[i, i, j, j]] - self.g_act[[i, j, j, i]];
            }
        }
        e
    }
}

impl From<&IntegralSet> for EffectiveHamiltonian {
    fn from(ints: &IntegralSet) -> Self {
        EffectiveHamiltonian {
            n_act: ints.n_orb,
            n_alpha: ints.n_alpha(),
            n_beta: ints.n_beta(),
            h_eff: ints.h.clone(),
            g_act: ints.g.clone(),
            e_scalar: ints.e_core,
            label: HamiltonianKind::Cas,
        }
    }
}

fn check_partition(ints: &IntegralSet, part: &ActivePartition) -> Result<()> {
    let total = part.core.len() + part.active.len() + part.virtual_ext.len();
    if total != ints.n_orb
        || part
            .core
            .iter()
            .chain(&part.active)
            .chain(&part.virtual_ext)
            .any(|&p| p >= ints.n_orb)
    {
        return Err(Error::Dimension(format!(
            "partition covers {total} of {} orbitals",
            ints.n_orb
        )));
    }
    if ints.n_alpha() != ints.n_beta() {
        return Err(Error::Input(
            "active-space embedding needs a closed-shell system".into(),
        ));
    }
    Ok(())
}

/// Frozen-core embedding with Coulomb and exchange folding.
pub fn build_cas_hamiltonian(
    ints: &IntegralSet,
    part: &ActivePartition,
) -> Result<EffectiveHamiltonian> {
    check_partition(ints, part)?;
    let (h, g) = (&ints.h, &ints.g);
    let act = &part.active;
    let n_act = act.len();
    let mut h_eff = Array2::zeros((n_act, n_act));
    for (u, &p) in act.iter().enumerate() {
        for (v, &q) in act.iter().enumerate() {
            h_eff[[u, v]] = h[[p, q]]
                + part
                    .core
                    .iter()
                    .map(|&c| 2.0 * g[[p, q, c, c]] - g[[p, c, c, q]])
                    .sum::<f64>();
        }
    }
    let mut e_scalar = ints.e_core;
    for &c in &part.core {
        e_scalar += 2.0 * h[[c, c]];
        for &d in &part.core {
            e_scalar += 2.0 * g[[c, c, d, d]] - g[[c, d, d, c]];
        }
    }
    let n_half = part.n_act_elec / 2;
    Ok(EffectiveHamiltonian {
        n_act,
        n_alpha: part.n_act_elec - n_half,
        n_beta: n_half,
        h_eff,
        g_act: sub_block(g, act),
        e_scalar,
        label: HamiltonianKind::Cas,
    })
}

/// One-body correction over the active orbitals and the accompanying scalar.
#[derive(Debug, Clone, PartialEq)]
pub struct ExternalCorrection {
    pub v_act: Array2<f64>,
    pub scalar: f64,
}

/// Amplitudes with every all-active term removed.
pub fn external_amplitudes(t: &Amplitudes, part: &ActivePartition) -> Amplitudes {
    let active: BTreeSet<usize> = part.active.iter().copied().collect();
    t.masked(|i, j, a, b| [i, j, a, b].iter().all(|p| active.contains(p)))
}

/// External correlation potential restricted to the active block.
pub fn external_potential(
    ints: &IntegralSet,
    t: &Amplitudes,
    part: &ActivePartition,
) -> Result<Array2<f64>> {
    Ok(external_correction(ints, t, part, DoubleCommutator::Fock)?.v_act)
}

/// The external potential and the scalar that keeps the reference energy of
/// `H_CAS + v_ext + scalar` equal to that of the full transformed Hamiltonian.
pub fn external_correction(
    ints: &IntegralSet,
    t: &Amplitudes,
    part: &ActivePartition,
    variant: DoubleCommutator,
) -> Result<ExternalCorrection> {
    check_partition(ints, part)?;
    let n_act = part.n_act();
    let ext = external_amplitudes(t, part);
    if ext.is_zero() {
        return Ok(ExternalCorrection {
            v_act: Array2::zeros((n_act, n_act)),
            scalar: 0.0,
        });
    }
    let occ = closed_shell_occupations(ints)?;
    let r = reduce(ints, &ext, &occ, variant)?;
    let mut v_act = Array2::zeros((n_act, n_act));
    for (u, &p) in part.active.iter().enumerate() {
        for (w, &q) in part.active.iter().enumerate() {
            v_act[[u, w]] = 0.5 * ((r.x1[[p, q]] - r.f[[p, q]]) + (r.x1[[q, p]] - r.f[[q, p]]));
        }
    }
    let occupied_active: f64 = part
        .active
        .iter()
        .enumerate()
        .map(|(u, &p)| occ[p] * v_act[[u, u]])
        .sum();
    Ok(ExternalCorrection {
        v_act,
        scalar: (r.x0 - r.e_hf) - occupied_active,
    })
}

/// `H_CAS + v_ext`, with the external scalar folded into `e_scalar`. The
/// amplitudes must be expressed in the orbital basis of `ints`.
pub fn build_obdf_hamiltonian(
    ints: &IntegralSet,
    t: &Amplitudes,
    part: &ActivePartition,
) -> Result<EffectiveHamiltonian> {
    build_obdf_hamiltonian_with(ints, t, part, DoubleCommutator::Fock)
}

pub fn build_obdf_hamiltonian_with(
    ints: &IntegralSet,
    t: &Amplitudes,
    part: &ActivePartition,
    variant: DoubleCommutator,
) -> Result<EffectiveHamiltonian> {
    let mut heff = build_cas_hamiltonian(ints, part)?;
    let corr = external_correction(ints, t, part, variant)?;
    heff.h_eff += &corr.v_act;
    heff.e_scalar += corr.scalar;
    heff.label = HamiltonianKind::Obdf;
    Ok(heff)
}
