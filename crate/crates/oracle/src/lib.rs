//! Brute-force Fock-space constructions used to check the production code.
//!
//! Everything here works by applying explicit creation and annihilation
//! operators to occupation-number states, or by multiplying dense operator
//! matrices. Nothing scales and nothing is shared with the determinant engine
//! of the main crate; that independence is the only reason this crate exists.
//!
//! Mode ordering: spatial orbital `p` with alpha spin is mode `p`, with beta
//! spin mode `n_orb + p`. A state is the integer whose bit `k` is set when mode
//! `k` is occupied, and `|s> = a†_{k1} a†_{k2} ... |vac>` with `k1 < k2 < ...`.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use ndarray::{Array2, Array4};
use num_complex::Complex64;

/// `a†_mode |state>` as (new state, sign), or `None` when the mode is occupied.
pub fn create(state: u64, mode: usize) -> Option<(u64, f64)> {
    if state >> mode & 1 == 1 {
        return None;
    }
    let below = (state & ((1u64 << mode) - 1)).count_ones();
    let sign = if below.is_multiple_of(2) { 1.0 } else { -1.0 };
    Some((state | 1 << mode, sign))
}

/// `a_mode |state>` as (new state, sign), or `None` when the mode is empty.
pub fn annihilate(state: u64, mode: usize) -> Option<(u64, f64)> {
    if state >> mode & 1 == 0 {
        return None;
    }
    let below = (state & ((1u64 << mode) - 1)).count_ones();
    let sign = if below.is_multiple_of(2) { 1.0 } else { -1.0 };
    Some((state & !(1 << mode), sign))
}

/// Dense matrices over the complete Fock space of `n_modes` fermionic modes.
pub struct FockSpace {
    n_modes: usize,
    dim: usize,
}

impl FockSpace {
    pub fn new(n_modes: usize) -> Self {
        assert!(n_modes <= 12, "dense Fock space limited to 12 modes");
        FockSpace {
            n_modes,
            dim: 1 << n_modes,
        }
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn creation(&self, mode: usize) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for s in 0..self.dim as u64 {
            if let Some((t, sign)) = create(s, mode) {
                m[(t as usize, s as usize)] = sign;
            }
        }
        m
    }

    pub fn annihilation(&self, mode: usize) -> DMatrix<f64> {
        self.creation(mode).transpose()
    }

    pub fn basis_vector(&self, state: u64) -> DVector<f64> {
        let mut v = DVector::zeros(self.dim);
        v[state as usize] = 1.0;
        v
    }

    /// Spin-summed excitation operator `E_pq = sum_sigma a†_{p sigma} a_{q sigma}`.
    pub fn excitation(&self, p: usize, q: usize) -> DMatrix<f64> {
        let n_orb = self.n_modes / 2;
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for spin in 0..2 {
            m += self.creation(p + spin * n_orb) * self.annihilation(q + spin * n_orb);
        }
        m
    }

    /// `sum_pq m_pq E_pq`.
    pub fn one_body(&self, m: &Array2<f64>) -> DMatrix<f64> {
        let n = m.nrows();
        let mut out = DMatrix::zeros(self.dim, self.dim);
        for p in 0..n {
            for q in 0..n {
                if m[[p, q]] != 0.0 {
                    out += self.excitation(p, q) * m[[p, q]];
                }
            }
        }
        out
    }

    /// Molecular Hamiltonian from spatial integrals (chemists' notation),
    /// `H = sum h_pq E_pq + 1/2 sum (pq|rs) a†_{p s} a†_{r t} a_{s t} a_{q s} + e_core`,
    /// built from dense operator products.
    pub fn hamiltonian(&self, h: &Array2<f64>, g: &Array4<f64>, e_core: f64) -> DMatrix<f64> {
        let n = h.nrows();
        assert_eq!(2 * n, self.n_modes);
        let cre: Vec<_> = (0..self.n_modes).map(|k| self.creation(k)).collect();
        let ann: Vec<_> = (0..self.n_modes).map(|k| self.annihilation(k)).collect();
        let mut m = DMatrix::identity(self.dim, self.dim) * e_core;
        m += self.one_body(h);
        for p in 0..n {
            for q in 0..n {
                for r in 0..n {
                    for s in 0..n {
                        let v = g[[p, q, r, s]];
                        if v == 0.0 {
                            continue;
                        }
                        for sa in 0..2 {
                            for sb in 0..2 {
                                let (pp, qq) = (p + sa * n, q + sa * n);
                                let (rr, ss) = (r + sb * n, s + sb * n);
                                m += &cre[pp] * &cre[rr] * &ann[ss] * &ann[qq] * (0.5 * v);
                            }
                        }
                    }
                }
            }
        }
        m
    }

    /// `T = 1/2 sum_{ijab} t[i,j,a,b] E_ai E_bj` for closed-shell doubles amplitudes
    /// stored with local occupied/virtual indices.
    pub fn singlet_doubles(&self, t: &Array4<f64>, occ: &[usize], virt: &[usize]) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        let e: HashMap<(usize, usize), DMatrix<f64>> = occ
            .iter()
            .flat_map(|&i| virt.iter().map(move |&a| (a, i)))
            .map(|(a, i)| ((a, i), self.excitation(a, i)))
            .collect();
        for (ii, &i) in occ.iter().enumerate() {
            for (jj, &j) in occ.iter().enumerate() {
                for (aa, &a) in virt.iter().enumerate() {
                    for (bb, &b) in virt.iter().enumerate() {
                        let v = t[[ii, jj, aa, bb]];
                        if v != 0.0 {
                            m += &e[&(a, i)] * &e[&(b, j)] * (0.5 * v);
                        }
                    }
                }
            }
        }
        m
    }

    /// Scalar and one-body coefficients of the operator `x` after normal ordering
    /// with respect to the determinant `reference`, read off from matrix elements:
    ///
    /// * `x0 = <0|X|0>`
    /// * occupied p, q: `x_pq = x0 d_pq - <0|a†_q X a_p|0>`
    /// * virtual p, q: `x_pq = <0|a_p X a†_q|0> - x0 d_pq`
    /// * virtual p, occupied q: `x_pq = <0|a†_q a_p X|0>`
    /// * occupied p, virtual q: `x_pq = <0|X a†_q a_p|0>`
    ///
    /// Two- and higher-body normal-ordered pieces do not contribute to any of
    /// these elements, so this is exact for any operator.
    pub fn one_body_reduction(&self, x: &DMatrix<f64>, reference: u64) -> (f64, DMatrix<f64>) {
        let n = self.n_modes;
        let r0 = self.basis_vector(reference);
        let x0 = (r0.transpose() * x * &r0)[(0, 0)];
        let occ = |k: usize| reference >> k & 1 == 1;
        let hole = |k: usize| self.annihilation(k) * &r0;
        let particle = |k: usize| self.creation(k) * &r0;
        let single = |a: usize, i: usize| self.creation(a) * self.annihilation(i) * &r0;
        let mut out = DMatrix::zeros(n, n);
        for p in 0..n {
            for q in 0..n {
                let d = if p == q { 1.0 } else { 0.0 };
                out[(p, q)] = match (occ(p), occ(q)) {
                    (true, true) => x0 * d - (hole(q).transpose() * x * hole(p))[(0, 0)],
                    (false, false) => (particle(p).transpose() * x * particle(q))[(0, 0)] - x0 * d,
                    (false, true) => (single(p, q).transpose() * x * &r0)[(0, 0)],
                    (true, false) => (r0.transpose() * x * single(q, p))[(0, 0)],
                };
            }
        }
        (x0, out)
    }
}

/// Closed-shell determinant with the lowest `n_occ` orbitals doubly occupied.
pub fn closed_shell_reference(n_orb: usize, n_occ: usize) -> u64 {
    let half = (1u64 << n_occ) - 1;
    half | half << n_orb
}

/// All states with the given per-spin particle numbers, ascending.
pub fn sector_states(n_orb: usize, n_alpha: usize, n_beta: usize) -> Vec<u64> {
    let mask = (1u64 << n_orb) - 1;
    (0..1u64 << (2 * n_orb))
        .filter(|s| {
            (s & mask).count_ones() as usize == n_alpha
                && (s >> n_orb).count_ones() as usize == n_beta
        })
        .collect()
}

/// Hamiltonian restricted to `states`, built term by term by applying
/// `a†_{p s} a†_{r t} a_{s t} a_{q s}` to every state.
pub fn sector_hamiltonian(
    h: &Array2<f64>,
    g: &Array4<f64>,
    e_core: f64,
    states: &[u64],
) -> DMatrix<f64> {
    let n = h.nrows();
    let index: HashMap<u64, usize> = states.iter().enumerate().map(|(i, &s)| (s, i)).collect();
    let dim = states.len();
    let mut m = DMatrix::zeros(dim, dim);
    let chain = |s: u64, ops: &[(bool, usize)]| -> Option<(u64, f64)> {
        let mut state = s;
        let mut sign = 1.0;
        for &(is_create, k) in ops.iter().rev() {
            let (t, f) = if is_create {
                create(state, k)?
            } else {
                annihilate(state, k)?
            };
            state = t;
            sign *= f;
        }
        Some((state, sign))
    };
    for (col, &s) in states.iter().enumerate() {
        m[(col, col)] += e_core;
        for p in 0..n {
            for q in 0..n {
                for spin in 0..2 {
                    let ops = [(true, p + spin * n), (false, q + spin * n)];
                    if let Some((t, sign)) = chain(s, &ops) {
                        if let Some(&row) = index.get(&t) {
                            m[(row, col)] += sign * h[[p, q]];
                        }
                    }
                }
            }
        }
        for p in 0..n {
            for q in 0..n {
                for r in 0..n {
                    for u in 0..n {
                        let v = g[[p, q, r, u]];
                        if v == 0.0 {
                            continue;
                        }
                        for sa in 0..2 {
                            for sb in 0..2 {
                                let ops = [
                                    (true, p + sa * n),
                                    (true, r + sb * n),
                                    (false, u + sb * n),
                                    (false, q + sa * n),
                                ];
                                if let Some((t, sign)) = chain(s, &ops) {
                                    if let Some(&row) = index.get(&t) {
                                        m[(row, col)] += 0.5 * sign * v;
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    m
}

/// Lowest eigenpair of a dense symmetric matrix.
pub fn lowest_eigenpair(m: &DMatrix<f64>) -> (f64, DVector<f64>) {
    let eig = SymmetricEigen::new(m.clone());
    let (k, e) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("empty matrix");
    (*e, eig.eigenvectors.column(k).into_owned())
}

/// Exact ground-state energy in the (n_alpha, n_beta) sector.
pub fn fci_energy(
    h: &Array2<f64>,
    g: &Array4<f64>,
    e_core: f64,
    n_alpha: usize,
    n_beta: usize,
) -> f64 {
    let states = sector_states(h.nrows(), n_alpha, n_beta);
    lowest_eigenpair(&sector_hamiltonian(h, g, e_core, &states)).0
}

/// Rayleigh-Schrodinger second-order energy with the Moller-Plesset partition,
/// summed over every determinant of the closed-shell sector. `eps` must be the
/// diagonal of a diagonal Fock matrix.
pub fn mp2_rspt(h: &Array2<f64>, g: &Array4<f64>, eps: &[f64], n_occ: usize) -> f64 {
    let n = h.nrows();
    let states = sector_states(n, n_occ, n_occ);
    let m = sector_hamiltonian(h, g, 0.0, &states);
    let reference = closed_shell_reference(n, n_occ);
    let r = states.iter().position(|&s| s == reference).unwrap();
    let zeroth = |s: u64| -> f64 {
        (0..2 * n)
            .filter(|k| s >> k & 1 == 1)
            .map(|k| eps[k % n])
            .sum()
    };
    let e_ref = zeroth(reference);
    states
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != r)
        .map(|(k, &s)| m[(k, r)].powi(2) / (e_ref - zeroth(s)))
        .sum()
}

/// Spin-orbital one-particle density matrix `<psi|a†_p a_q|psi>` of a vector
/// over `states`, by direct operator application.
pub fn one_rdm(states: &[u64], coeffs: &DVector<f64>, n_modes: usize) -> DMatrix<f64> {
    let index: HashMap<u64, usize> = states.iter().enumerate().map(|(i, &s)| (s, i)).collect();
    let mut d = DMatrix::zeros(n_modes, n_modes);
    for (col, &s) in states.iter().enumerate() {
        for p in 0..n_modes {
            for q in 0..n_modes {
                let Some((t, s1)) = annihilate(s, q) else {
                    continue;
                };
                let Some((t, s2)) = create(t, p) else {
                    continue;
                };
                if let Some(&row) = index.get(&t) {
                    d[(p, q)] += coeffs[row] * coeffs[col] * s1 * s2;
                }
            }
        }
    }
    d
}

/// Dense matrix of the complex one-body operator `sum_pq k_pq E_pq` within `states`.
pub fn complex_one_body(k: &Array2<Complex64>, states: &[u64]) -> DMatrix<Complex64> {
    let n = k.nrows();
    let index: HashMap<u64, usize> = states.iter().enumerate().map(|(i, &s)| (s, i)).collect();
    let mut m = DMatrix::zeros(states.len(), states.len());
    for (col, &s) in states.iter().enumerate() {
        for p in 0..n {
            for q in 0..n {
                for spin in 0..2 {
                    let Some((t, s1)) = annihilate(s, q + spin * n) else {
                        continue;
                    };
                    let Some((t, s2)) = create(t, p + spin * n) else {
                        continue;
                    };
                    if let Some(&row) = index.get(&t) {
                        m[(row, col)] += k[[p, q]] * (s1 * s2);
                    }
                }
            }
        }
    }
    m
}

/// Diagonal matrix `exp(i sum_pq j_pq n_p n_q)` with spin-summed densities `n_p`.
pub fn density_phase(j: &Array2<f64>, states: &[u64]) -> DMatrix<Complex64> {
    let n = j.nrows();
    let mut m = DMatrix::zeros(states.len(), states.len());
    for (i, &s) in states.iter().enumerate() {
        let dens: Vec<f64> = (0..n)
            .map(|p| ((s >> p & 1) + (s >> (p + n) & 1)) as f64)
            .collect();
        let mut phase = 0.0;
        for p in 0..n {
            for q in 0..n {
                phase += j[[p, q]] * dens[p] * dens[q];
            }
        }
        m[(i, i)] = Complex64::from_polar(1.0, phase);
    }
    m
}

/// Principal submatrix of a full Fock-space operator on the given states.
pub fn restrict(full: &DMatrix<f64>, states: &[u64]) -> DMatrix<f64> {
    DMatrix::from_fn(states.len(), states.len(), |i, j| {
        full[(states[i] as usize, states[j] as usize)]
    })
}
