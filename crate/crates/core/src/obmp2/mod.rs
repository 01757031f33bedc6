//! MP2 amplitudes, the OBMP2 correlated one-body potential and the
//! self-consistent correlated-orbital loop.
//!
//! The potential is obtained by evaluating the second-order transformed
//! Hamiltonian `H + [H, A] + 1/2 [[F, A], A]` with `A = T - T†` in
//! spin-orbital normal-ordered form and keeping its scalar and one-body parts
//! with respect to the closed-shell reference.

pub mod algebra;

use ndarray::{Array1, Array2, Array4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrals::{build_fock, canonical_hf, rotate_integrals, IntegralSet, RotationMatrix};
use crate::linalg::eigh;
use algebra::{commutator, NormalOrderedOp, Rank};

/// Smallest accepted magnitude of an MP2 denominator.
pub const MIN_GAP: f64 = 1e-8;

/// Closed-shell doubles amplitudes `t[i,j,a,b]`, indexed by position in
/// `occ_list` and `virt_list`.
#[derive(Debug, Clone, PartialEq)]
pub struct Amplitudes {
    pub n_orb: usize,
    pub occ_list: Vec<usize>,
    pub virt_list: Vec<usize>,
    pub t: Array4<f64>,
}

impl Amplitudes {
    pub fn zeros(n_orb: usize, occ_list: Vec<usize>, virt_list: Vec<usize>) -> Self {
        let (no, nv) = (occ_list.len(), virt_list.len());
        Amplitudes {
            n_orb,
            occ_list,
            virt_list,
            t: Array4::zeros((no, no, nv, nv)),
        }
    }

    pub fn scaled(&self, lambda: f64) -> Self {
        Amplitudes {
            t: &self.t * lambda,
            ..self.clone()
        }
    }

    /// Zero every amplitude for which `drop(i, j, a, b)` holds (orbital indices).
    pub fn masked(&self, drop: impl Fn(usize, usize, usize, usize) -> bool) -> Self {
        let mut out = self.clone();
        for ((ii, jj, aa, bb), v) in out.t.indexed_iter_mut() {
            if drop(
                self.occ_list[ii],
                self.occ_list[jj],
                self.virt_list[aa],
                self.virt_list[bb],
            ) {
                *v = 0.0;
            }
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.t.iter().all(|&v| v == 0.0)
    }

    /// Closed-shell MP2 correlation energy `sum t (2 (ia|jb) - (ib|ja))`.
    pub fn mp2_energy(&self, ints: &IntegralSet) -> f64 {
        let g = &ints.g;
        let mut e = 0.0;
        for ((ii, jj, aa, bb), &t) in self.t.indexed_iter() {
            let (i, j, a, b) = (
                self.occ_list[ii],
                self.occ_list[jj],
                self.virt_list[aa],
                self.virt_list[bb],
            );
            e += t * (2.0 * g[[i, a, j, b]] - g[[i, b, j, a]]);
        }
        e
    }

    /// Spin-orbital anti-Hermitian generator `A = T - T†` as a two-body tensor.
    /// Spin orbital `p` is alpha for `p < n_orb`, beta otherwise.
    pub fn generator(&self) -> Array4<f64> {
        let n = self.n_orb;
        let mut a2 = Array4::zeros((2 * n, 2 * n, 2 * n, 2 * n));
        for ((ii, jj, aa, bb), &t) in self.t.indexed_iter() {
            if t == 0.0 {
                continue;
            }
            let (i, j, a, b) = (
                self.occ_list[ii],
                self.occ_list[jj],
                self.virt_list[aa],
                self.virt_list[bb],
            );
            for s1 in 0..2 {
                for s2 in 0..2 {
                    let (ia, ib, ii_, ij) = (a + s1 * n, b + s2 * n, i + s1 * n, j + s2 * n);
                    // t^{a s1, b s2}_{i s1, j s2} and its antisymmetric images.
                    a2[[ia, ib, ii_, ij]] += t;
                    a2[[ib, ia, ii_, ij]] -= t;
                    a2[[ia, ib, ij, ii_]] -= t;
                    a2[[ib, ia, ij, ii_]] += t;
                    a2[[ii_, ij, ia, ib]] -= t;
                    a2[[ij, ii_, ia, ib]] += t;
                    a2[[ii_, ij, ib, ia]] += t;
                    a2[[ij, ii_, ib, ia]] -= t;
                }
            }
        }
        // Every (i,j,a,b) term was added together with its (j,i,b,a) twin.
        a2 * 0.5
    }
}

/// `t[i,j,a,b] = (ia|jb) / (eps_i + eps_j - eps_a - eps_b)`.
pub fn mp2_amplitudes(
    eps: &[f64],
    ints: &IntegralSet,
    occ_list: &[usize],
    virt_list: &[usize],
) -> Result<Amplitudes> {
    mp2_amplitudes_shifted(eps, ints, occ_list, virt_list, 0.0)
}

/// As [`mp2_amplitudes`] with `shift` subtracted from every denominator.
pub fn mp2_amplitudes_shifted(
    eps: &[f64],
    ints: &IntegralSet,
    occ_list: &[usize],
    virt_list: &[usize],
    shift: f64,
) -> Result<Amplitudes> {
    let n = ints.n_orb;
    if eps.len() != n || occ_list.iter().chain(virt_list).any(|&p| p >= n) {
        return Err(Error::Dimension(format!(
            "{} orbital energies, {n} orbitals",
            eps.len()
        )));
    }
    if occ_list.iter().any(|p| virt_list.contains(p)) {
        return Err(Error::Input("occupied and virtual lists overlap".into()));
    }
    let mut amps = Amplitudes::zeros(n, occ_list.to_vec(), virt_list.to_vec());
    for (ii, &i) in occ_list.iter().enumerate() {
        for (jj, &j) in occ_list.iter().enumerate() {
            for (aa, &a) in virt_list.iter().enumerate() {
                for (bb, &b) in virt_list.iter().enumerate() {
                    let denom = eps[i] + eps[j] - eps[a] - eps[b] - shift;
                    if denom.abs() < MIN_GAP {
                        return Err(Error::DegenerateGap { i, j, a, b, denom });
                    }
                    amps.t[[ii, jj, aa, bb]] = ints.g[[i, a, j, b]] / denom;
                }
            }
        }
    }
    Ok(amps)
}

/// Which operator enters the double commutator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DoubleCommutator {
    /// `1/2 [[F, A], A]`.
    #[default]
    Fock,
    /// `1/2 [[H, A], A]` with the inner commutator truncated at two-body rank.
    Hamiltonian,
}

/// Correlated Fock matrix `f_bar = f + v` and scalar `c_bar`, so that the
/// one-body effective Hamiltonian is `c_bar + sum f_bar_pq E_pq`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelatedFock {
    pub f_bar: Array2<f64>,
    pub v: Array2<f64>,
    pub c_bar: f64,
    /// Reference expectation value of the transformed Hamiltonian.
    pub energy: f64,
}

/// Spin-orbital Hamiltonian normal ordered with respect to the closed-shell
/// determinant with spatial occupations `occ` (0 or 2), plus the spin-orbital
/// occupation vector.
pub(crate) fn normal_ordered_hamiltonian(
    ints: &IntegralSet,
    occ: &[f64],
) -> Result<(NormalOrderedOp, Vec<f64>)> {
    let n = ints.n_orb;
    let fock = build_fock(ints, occ)?;
    let nn = 2 * n;
    let mut op = NormalOrderedOp::zeros(nn);
    op.c0 = fock.e_hf;
    for s in 0..2 {
        for p in 0..n {
            for q in 0..n {
                op.c1[[p + s * n, q + s * n]] = fock.f[[p, q]];
            }
        }
    }
    let g = &ints.g;
    // <pq||rs> with <pq|rs> = (pr|qs) for matching spins.
    for s1 in 0..2 {
        for s2 in 0..2 {
            for p in 0..n {
                for q in 0..n {
                    for r in 0..n {
                        for u in 0..n {
                            let (pp, qq, rr, uu) = (p + s1 * n, q + s2 * n, r + s1 * n, u + s2 * n);
                            let v = g[[p, r, q, u]];
                            op.c2[[pp, qq, rr, uu]] += v;
                            op.c2[[pp, qq, uu, rr]] -= v;
                        }
                    }
                }
            }
        }
    }
    let so_occ = (0..nn).map(|k| occ[k % n] / 2.0).collect();
    Ok((op, so_occ))
}

/// Scalar and spin-orbital one-body parts of the second-order transformed
/// Hamiltonian, together with the bare pieces they started from.
pub(crate) struct Reduced {
    pub e_hf: f64,
    pub f: Array2<f64>,
    pub x0: f64,
    pub x1: Array2<f64>,
}

pub(crate) fn reduce(
    ints: &IntegralSet,
    t: &Amplitudes,
    occ: &[f64],
    variant: DoubleCommutator,
) -> Result<Reduced> {
    let n = ints.n_orb;
    if t.n_orb != n {
        return Err(Error::Dimension(format!(
            "amplitudes for {} orbitals, integrals for {n}",
            t.n_orb
        )));
    }
    if occ.len() != n {
        return Err(Error::Dimension(format!(
            "{} occupations for {n} orbitals",
            occ.len()
        )));
    }
    let (h, so_occ) = normal_ordered_hamiltonian(ints, occ)?;
    let e_hf = h.c0;
    let f = h.c1.clone();
    if t.is_zero() {
        return Ok(Reduced {
            e_hf,
            x0: e_hf,
            x1: f.clone(),
            f,
        });
    }
    let a = NormalOrderedOp {
        c0: 0.0,
        c1: Array2::zeros((2 * n, 2 * n)),
        c2: t.generator(),
    };
    let single = commutator(&h, &a, &so_occ, Rank::One);
    let inner = match variant {
        DoubleCommutator::Fock => {
            let fock = NormalOrderedOp {
                c0: 0.0,
                c1: f.clone(),
                c2: Array4::zeros((2 * n, 2 * n, 2 * n, 2 * n)),
            };
            commutator(&fock, &a, &so_occ, Rank::Two)
        }
        DoubleCommutator::Hamiltonian => commutator(&h, &a, &so_occ, Rank::Two),
    };
    let double = commutator(&inner, &a, &so_occ, Rank::One);
    let x0 = e_hf + single.c0 + 0.5 * double.c0;
    let x1 = &f + &single.c1 + &(&double.c1 * 0.5);
    Ok(Reduced { e_hf, f, x0, x1 })
}

fn alpha_block(m: &Array2<f64>, n: usize) -> Array2<f64> {
    let mut out = m.slice(ndarray::s![..n, ..n]).to_owned();
    // Exact symmetry; the asymmetry is rounding only.
    for p in 0..n {
        for q in 0..p {
            let v = 0.5 * (out[[p, q]] + out[[q, p]]);
            out[[p, q]] = v;
            out[[q, p]] = v;
        }
    }
    out
}

/// OBMP2 correlated Fock matrix with the Fock operator in the double commutator.
pub fn obmp2_potential(ints: &IntegralSet, t: &Amplitudes, occ: &[f64]) -> Result<CorrelatedFock> {
    obmp2_potential_with(ints, t, occ, DoubleCommutator::Fock)
}

pub fn obmp2_potential_with(
    ints: &IntegralSet,
    t: &Amplitudes,
    occ: &[f64],
    variant: DoubleCommutator,
) -> Result<CorrelatedFock> {
    let n = ints.n_orb;
    let r = reduce(ints, t, occ, variant)?;
    let f = alpha_block(&r.f, n);
    let f_bar = alpha_block(&r.x1, n);
    let v = &f_bar - &f;
    // Keep the reference expectation value: <0|c_bar + sum f_bar E|0> = x0.
    let trace: f64 = (0..n).map(|p| occ[p] * f_bar[[p, p]]).sum();
    Ok(CorrelatedFock {
        f_bar,
        v,
        c_bar: r.x0 - trace,
        energy: r.x0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Obmp2Options {
    pub max_iter: usize,
    pub tol: f64,
    /// Weight of the previous orbital energies mixed into `f_bar` before diagonalization.
    pub damping: f64,
    /// Subtracted from every MP2 denominator.
    pub level_shift: f64,
    pub variant: DoubleCommutator,
}

impl Default for Obmp2Options {
    fn default() -> Self {
        Obmp2Options {
            max_iter: 50,
            tol: 1e-8,
            damping: 0.0,
            level_shift: 0.0,
            variant: DoubleCommutator::Fock,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Obmp2Step {
    pub iteration: usize,
    pub energy: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Obmp2Result {
    pub energy: f64,
    /// Accumulated rotation from the input basis to the final orbitals.
    pub orbitals: RotationMatrix,
    /// Orbital energies used for the final amplitudes, ascending.
    pub eps_bar: Array1<f64>,
    pub n_iter: usize,
    pub converged: bool,
    /// Integrals in the final orbital basis.
    pub integrals: IntegralSet,
    pub trace: Vec<Obmp2Step>,
}

impl Obmp2Result {
    pub fn occ_list(&self) -> Vec<usize> {
        (0..self.integrals.n_elec / 2).collect()
    }

    pub fn virt_list(&self) -> Vec<usize> {
        (self.integrals.n_elec / 2..self.integrals.n_orb).collect()
    }

    /// Amplitudes in the final basis, from `eps_bar`.
    pub fn amplitudes(&self, level_shift: f64) -> Result<Amplitudes> {
        mp2_amplitudes_shifted(
            self.eps_bar.as_slice().expect("contiguous"),
            &self.integrals,
            &self.occ_list(),
            &self.virt_list(),
            level_shift,
        )
    }

    /// Plain-text iteration log: `iteration energy |dE|` per line.
    pub fn trace_text(&self) -> String {
        self.trace
            .iter()
            .map(|s| format!("{} {:.12} {:.3e}\n", s.iteration, s.energy, s.delta.abs()))
            .collect()
    }
}

pub fn obmp2_scf(ints: &IntegralSet, max_iter: usize, tol: f64) -> Result<Obmp2Result> {
    obmp2_scf_with(
        ints,
        &Obmp2Options {
            max_iter,
            tol,
            ..Obmp2Options::default()
        },
    )
}

/// Self-consistent OBMP2. The input orbitals are first brought to canonical
/// closed-shell HF form, so the first iteration is standard MP2.
/// Without convergence, the iterate with the smallest |dE| is returned.
pub fn obmp2_scf_with(ints: &IntegralSet, opts: &Obmp2Options) -> Result<Obmp2Result> {
    if opts.max_iter == 0 {
        return Err(Error::Input("max_iter must be at least 1".into()));
    }
    let n = ints.n_orb;
    let occ = crate::integrals::closed_shell_occupations(ints)?;
    let n_occ = ints.n_elec / 2;
    let occ_list: Vec<usize> = (0..n_occ).collect();
    let virt_list: Vec<usize> = (n_occ..n).collect();

    let hf = canonical_hf(ints)?;
    let mut eps = hf.eps;
    let mut rot = hf.rotation;
    let mut cur = hf.integrals;
    let mut e_prev = hf.e_hf;

    let mut trace = Vec::new();
    let mut best: Option<(f64, Obmp2Result)> = None;
    for iteration in 1..=opts.max_iter {
        let eps_slice = eps.as_slice().expect("contiguous");
        let t = mp2_amplitudes_shifted(eps_slice, &cur, &occ_list, &virt_list, opts.level_shift)?;
        let cf = obmp2_potential_with(&cur, &t, &occ, opts.variant)?;
        let delta = cf.energy - e_prev;
        e_prev = cf.energy;
        trace.push(Obmp2Step {
            iteration,
            energy: cf.energy,
            delta,
        });
        log::debug!(
            "obmp2 iteration {iteration}: E = {:.12}, dE = {delta:.3e}",
            cf.energy
        );
        let snapshot = |converged| Obmp2Result {
            energy: cf.energy,
            orbitals: rot.clone(),
            eps_bar: eps.clone(),
            n_iter: iteration,
            converged,
            integrals: cur.clone(),
            trace: trace.clone(),
        };
        if delta.abs() < opts.tol {
            return Ok(snapshot(true));
        }
        if best.as_ref().is_none_or(|(d, _)| delta.abs() < *d) {
            best = Some((delta.abs(), snapshot(false)));
        }
        let mut target = cf.f_bar;
        if opts.damping > 0.0 {
            target = target * (1.0 - opts.damping) + Array2::from_diag(&eps) * opts.damping;
        }
        let (w, u) = eigh(&target);
        let step = RotationMatrix::new(u)?;
        cur = rotate_integrals(&cur, &step)?;
        rot = rot.then(&step);
        eps = w;
    }
    let (_, mut out) = best.expect("at least one iteration");
    out.trace = trace;
    log::warn!("OBMP2 not converged after {} iterations", opts.max_iter);
    Ok(out)
}
