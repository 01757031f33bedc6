//! Determinant-basis CI engine: sector enumeration, Slater-Condon matrix
//! elements, sparse projected Hamiltonians, a Davidson eigensolver and
//! one-particle density matrices.
//!
//! Spin orbital `p` (alpha) is mode `p`, spin orbital `p` (beta) is mode
//! `n_orb + p`, so the single-string form of a determinant is
//! `beta << n_orb | alpha`. Fermionic signs follow this mode order.

use std::collections::HashMap;
use std::io::{Read, Write};

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array2, Array4};
use rayon::prelude::*;

use crate::downfold::EffectiveHamiltonian;
use crate::error::{Error, Result};
use crate::integrals::IntegralSet;

/// Largest supported number of spatial orbitals (both spins fit in a `u64`).
pub const MAX_ORB: usize = 32;
/// Default cap on the number of determinants in a sector.
pub const DEFAULT_SECTOR_CAP: u128 = 20_000_000;
/// Largest projected dimension for which connections are found by pair scan.
const PAIR_SCAN_LIMIT: usize = 2000;

/// Occupied spatial orbitals per spin. Ordering is by `(beta, alpha)`, which
/// is the numeric order of the combined bitstring.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Determinant {
    pub beta: u64,
    pub alpha: u64,
}

impl Determinant {
    pub fn new(alpha: u64, beta: u64) -> Self {
        Determinant { beta, alpha }
    }

    /// Lowest `n_alpha` alpha and `n_beta` beta orbitals occupied.
    pub fn hartree_fock(n_alpha: usize, n_beta: usize) -> Self {
        Determinant {
            alpha: low_bits(n_alpha),
            beta: low_bits(n_beta),
        }
    }

    /// Combined `(x_down, x_up)` bitstring.
    pub fn to_bitstring(self, n_orb: usize) -> u64 {
        self.beta << n_orb | self.alpha
    }

    pub fn from_bitstring(x: u64, n_orb: usize) -> Self {
        Determinant {
            alpha: x & low_bits(n_orb),
            beta: x >> n_orb,
        }
    }

    pub fn n_alpha(self) -> usize {
        self.alpha.count_ones() as usize
    }

    pub fn n_beta(self) -> usize {
        self.beta.count_ones() as usize
    }

    /// Number of spin orbitals that must move to turn `self` into `other`.
    pub fn excitation_degree(self, other: Determinant) -> usize {
        ((self.alpha ^ other.alpha).count_ones() + (self.beta ^ other.beta).count_ones()) as usize
            / 2
    }
}

pub(crate) fn low_bits(k: usize) -> u64 {
    if k >= 64 {
        u64::MAX
    } else {
        (1u64 << k) - 1
    }
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut r: u128 = 1;
    for i in 0..k {
        r = r * (n - i) as u128 / (i + 1) as u128;
    }
    r
}

/// All `n`-bit strings with `k` bits set, ascending (Gosper's hack).
pub(crate) fn strings(n: usize, k: usize) -> Vec<u64> {
    if k == 0 {
        return vec![0];
    }
    if k > n {
        return Vec::new();
    }
    let mut out = Vec::with_capacity(binomial(n, k) as usize);
    let mut x = low_bits(k);
    let limit = 1u64 << n;
    while x < limit {
        out.push(x);
        let c = x & x.wrapping_neg();
        let r = x + c;
        x = (((r ^ x) >> 2) / c) | r;
    }
    out
}

/// Every determinant with fixed per-spin particle numbers, in order.
#[derive(Debug, Clone, PartialEq)]
pub struct SectorBasis {
    pub n_orb: usize,
    pub n_alpha: usize,
    pub n_beta: usize,
    pub dets: Vec<Determinant>,
    index: HashMap<Determinant, usize>,
}

impl SectorBasis {
    pub fn len(&self) -> usize {
        self.dets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dets.is_empty()
    }

    pub fn index_of(&self, d: &Determinant) -> Option<usize> {
        self.index.get(d).copied()
    }
}

pub fn sector_dimension(n_orb: usize, n_alpha: usize, n_beta: usize) -> u128 {
    binomial(n_orb, n_alpha) * binomial(n_orb, n_beta)
}

pub fn enumerate_sector(n_orb: usize, n_alpha: usize, n_beta: usize) -> Result<SectorBasis> {
    enumerate_sector_capped(n_orb, n_alpha, n_beta, DEFAULT_SECTOR_CAP)
}

pub fn enumerate_sector_capped(
    n_orb: usize,
    n_alpha: usize,
    n_beta: usize,
    cap: u128,
) -> Result<SectorBasis> {
    if n_orb > MAX_ORB || n_alpha > n_orb || n_beta > n_orb {
        return Err(Error::Input(format!(
            "sector ({n_orb}, {n_alpha}, {n_beta}) is not valid"
        )));
    }
    let dim = sector_dimension(n_orb, n_alpha, n_beta);
    if dim > cap {
        return Err(Error::Capacity { dim, cap });
    }
    let alphas = strings(n_orb, n_alpha);
    let betas = strings(n_orb, n_beta);
    let dets: Vec<Determinant> = betas
        .iter()
        .flat_map(|&b| alphas.iter().map(move |&a| Determinant::new(a, b)))
        .collect();
    let index = dets.iter().enumerate().map(|(i, &d)| (d, i)).collect();
    Ok(SectorBasis {
        n_orb,
        n_alpha,
        n_beta,
        dets,
        index,
    })
}

/// Borrowed integrals of a Hamiltonian in chemists' notation.
#[derive(Debug, Clone, Copy)]
pub struct HamiltonianRef<'a> {
    pub h: &'a Array2<f64>,
    pub g: &'a Array4<f64>,
    pub e_core: f64,
}

impl HamiltonianRef<'_> {
    pub fn n_orb(&self) -> usize {
        self.h.nrows()
    }
}

impl<'a> From<&'a EffectiveHamiltonian> for HamiltonianRef<'a> {
    fn from(h: &'a EffectiveHamiltonian) -> Self {
        HamiltonianRef {
            h: &h.h_eff,
            g: &h.g_act,
            e_core: h.e_scalar,
        }
    }
}

impl<'a> From<&'a IntegralSet> for HamiltonianRef<'a> {
    fn from(i: &'a IntegralSet) -> Self {
        HamiltonianRef {
            h: &i.h,
            g: &i.g,
            e_core: i.e_core,
        }
    }
}

fn bits(mut m: u64) -> impl Iterator<Item = usize> {
    std::iter::from_fn(move || {
        if m == 0 {
            None
        } else {
            let p = m.trailing_zeros() as usize;
            m &= m - 1;
            Some(p)
        }
    })
}

/// Sign of `a†_a a_i` acting on the string `s` (i occupied, a empty).
fn single_sign(s: u64, i: usize, a: usize) -> f64 {
    let (lo, hi) = if i < a { (i, a) } else { (a, i) };
    let between = s & low_bits(hi) & !low_bits(lo + 1);
    if between.count_ones().is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// `<d1|H|d2>`. Evaluated with the determinants in canonical order so the
/// result is exactly symmetric in its arguments.
pub fn slater_condon(d1: Determinant, d2: Determinant, ham: HamiltonianRef<'_>) -> f64 {
    let (d1, d2) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
    let (h, g) = (ham.h, ham.g);
    let da = d1.alpha ^ d2.alpha;
    let db = d1.beta ^ d2.beta;
    let degree = (da.count_ones() + db.count_ones()) / 2;
    match degree {
        0 => {
            let mut e = ham.e_core;
            for p in bits(d1.alpha).chain(bits(d1.beta)) {
                e += h[[p, p]];
            }
            let mut two = 0.0;
            for (x, y) in [
                (d1.alpha, d1.alpha),
                (d1.alpha, d1.beta),
                (d1.beta, d1.alpha),
                (d1.beta, d1.beta),
            ] {
                for p in bits(x) {
                    for q in bits(y) {
                        two += g[[p, p, q, q]];
                    }
                }
            }
            for x in [d1.alpha, d1.beta] {
                for p in bits(x) {
                    for q in bits(x) {
                        two -= g[[p, q, q, p]];
                    }
                }
            }
            e + 0.5 * two
        }
        1 => {
            // d1 = a†_a a_i d2 within one spin.
            let (s1, s2, other) = if da != 0 {
                (d1.alpha, d2.alpha, d2.beta)
            } else {
                (d1.beta, d2.beta, d2.alpha)
            };
            let i = (s2 & !s1).trailing_zeros() as usize;
            let a = (s1 & !s2).trailing_zeros() as usize;
            let mut v = h[[a, i]];
            for k in bits(s2).chain(bits(other)) {
                v += g[[a, i, k, k]];
            }
            for k in bits(s2) {
                v -= g[[a, k, k, i]];
            }
            single_sign(s2, i, a) * v
        }
        2 => {
            if da != 0 && db != 0 {
                let i = (d2.alpha & !d1.alpha).trailing_zeros() as usize;
                let a = (d1.alpha & !d2.alpha).trailing_zeros() as usize;
                let j = (d2.beta & !d1.beta).trailing_zeros() as usize;
                let b = (d1.beta & !d2.beta).trailing_zeros() as usize;
                single_sign(d2.alpha, i, a) * single_sign(d2.beta, j, b) * g[[a, i, b, j]]
            } else {
                let (s1, s2) = if da != 0 {
                    (d1.alpha, d2.alpha)
                } else {
                    (d1.beta, d2.beta)
                };
                let mut holes = bits(s2 & !s1);
                let (i, j) = (holes.next().unwrap(), holes.next().unwrap());
                let mut parts = bits(s1 & !s2);
                let (a, b) = (parts.next().unwrap(), parts.next().unwrap());
                // a†_a a†_b a_j a_i applied to s2, one operator at a time.
                let mut sign = single_sign(s2, i, a);
                let mid = s2 & !(1 << i) | 1 << a;
                sign *= single_sign(mid, j, b);
                sign * (g[[a, i, b, j]] - g[[a, j, b, i]])
            }
        }
        _ => 0.0,
    }
}

/// Symmetric sparse matrix in compressed-row form with the diagonal stored
/// separately; rows hold off-diagonal entries only.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseHamiltonian {
    pub dim: usize,
    pub diag: Vec<f64>,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

const DUMP_MAGIC: &[u8; 4] = b"SPHM";
const DUMP_VERSION: u32 = 1;

impl SparseHamiltonian {
    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()]
            .iter()
            .copied()
            .zip(self.vals[r].iter().copied())
    }

    /// `y = H x`, parallel over rows.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.dim)
            .into_par_iter()
            .map(|i| self.diag[i] * x[i] + self.row(i).map(|(j, v)| v * x[j]).sum::<f64>())
            .collect()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for i in 0..self.dim {
            m[(i, i)] = self.diag[i];
            for (j, v) in self.row(i) {
                m[(i, j)] = v;
            }
        }
        m
    }

    /// Binary dump: magic `SPHM`, then little-endian `u32` version, `u64`
    /// dimension, `u64` off-diagonal count, `dim` diagonal `f64`s, `dim + 1`
    /// row offsets (`u64`), column indices (`u64`) and values (`f64`).
    pub fn write_binary(&self, mut w: impl Write) -> std::io::Result<()> {
        w.write_all(DUMP_MAGIC)?;
        w.write_all(&DUMP_VERSION.to_le_bytes())?;
        w.write_all(&(self.dim as u64).to_le_bytes())?;
        w.write_all(&(self.nnz() as u64).to_le_bytes())?;
        for v in &self.diag {
            w.write_all(&v.to_le_bytes())?;
        }
        for &p in &self.row_ptr {
            w.write_all(&(p as u64).to_le_bytes())?;
        }
        for &c in &self.cols {
            w.write_all(&(c as u64).to_le_bytes())?;
        }
        for v in &self.vals {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary(mut r: impl Read) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != DUMP_MAGIC {
            return Err(Error::Input("not a sparse Hamiltonian dump".into()));
        }
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4)?;
        let version = u32::from_le_bytes(b4);
        if version != DUMP_VERSION {
            return Err(Error::Input(format!("unsupported dump version {version}")));
        }
        let mut b8 = [0u8; 8];
        let mut next = |r: &mut dyn Read| -> Result<[u8; 8]> {
            r.read_exact(&mut b8)?;
            Ok(b8)
        };
        let dim = u64::from_le_bytes(next(&mut r)?) as usize;
        let nnz = u64::from_le_bytes(next(&mut r)?) as usize;
        let diag = (0..dim)
            .map(|_| next(&mut r).map(f64::from_le_bytes))
            .collect::<Result<_>>()?;
        let row_ptr = (0..=dim)
            .map(|_| next(&mut r).map(|b| u64::from_le_bytes(b) as usize))
            .collect::<Result<_>>()?;
        let cols = (0..nnz)
            .map(|_| next(&mut r).map(|b| u64::from_le_bytes(b) as usize))
            .collect::<Result<_>>()?;
        let vals = (0..nnz)
            .map(|_| next(&mut r).map(f64::from_le_bytes))
            .collect::<Result<_>>()?;
        Ok(SparseHamiltonian {
            dim,
            diag,
            row_ptr,
            cols,
            vals,
        })
    }
}

/// Determinants reachable from `d` by one or two same-sector excitations.
fn connected(d: Determinant, n_orb: usize) -> Vec<Determinant> {
    let full = low_bits(n_orb);
    let singles = |s: u64| -> Vec<u64> {
        let mut out = Vec::new();
        for i in bits(s) {
            for a in bits(full & !s) {
                out.push(s & !(1 << i) | 1 << a);
            }
        }
        out
    };
    let doubles = |s: u64| -> Vec<u64> {
        let mut out = Vec::new();
        let occ: Vec<usize> = bits(s).collect();
        let vir: Vec<usize> = bits(full & !s).collect();
        for (x, &i) in occ.iter().enumerate() {
            for &j in &occ[x + 1..] {
                for (y, &a) in vir.iter().enumerate() {
                    for &b in &vir[y + 1..] {
                        out.push(s & !(1 << i) & !(1 << j) | 1 << a | 1 << b);
                    }
                }
            }
        }
        out
    };
    let sa = singles(d.alpha);
    let sb = singles(d.beta);
    let mut out = Vec::new();
    out.extend(sa.iter().map(|&a| Determinant::new(a, d.beta)));
    out.extend(sb.iter().map(|&b| Determinant::new(d.alpha, b)));
    out.extend(
        doubles(d.alpha)
            .into_iter()
            .map(|a| Determinant::new(a, d.beta)),
    );
    out.extend(
        doubles(d.beta)
            .into_iter()
            .map(|b| Determinant::new(d.alpha, b)),
    );
    for &a in &sa {
        for &b in &sb {
            out.push(Determinant::new(a, b));
        }
    }
    out
}

/// Hamiltonian projected onto the span of `dets`.
pub fn build_projected_hamiltonian(
    dets: &[Determinant],
    ham: HamiltonianRef<'_>,
) -> Result<SparseHamiltonian> {
    let n_orb = ham.n_orb();
    if n_orb > MAX_ORB {
        return Err(Error::Input(format!(
            "{n_orb} orbitals exceed the supported {MAX_ORB}"
        )));
    }
    let Some(&first) = dets.first() else {
        return Err(Error::Input("empty determinant list".into()));
    };
    let mut index = HashMap::with_capacity(dets.len());
    for (k, &d) in dets.iter().enumerate() {
        if d.n_alpha() != first.n_alpha()
            || d.n_beta() != first.n_beta()
            || d.to_bitstring(n_orb) >> (2 * n_orb) != 0
        {
            return Err(Error::Input(format!(
                "determinant {k} is outside the sector of determinant 0"
            )));
        }
        if index.insert(d, k).is_some() {
            return Err(Error::DuplicateDeterminant(k));
        }
    }
    let dim = dets.len();
    let rows: Vec<(f64, Vec<(usize, f64)>)> = (0..dim)
        .into_par_iter()
        .map(|i| {
            let di = dets[i];
            let mut row = Vec::new();
            if dim <= PAIR_SCAN_LIMIT {
                for (j, &dj) in dets.iter().enumerate() {
                    if j != i && di.excitation_degree(dj) <= 2 {
                        row.push((j, slater_condon(di, dj, ham)));
                    }
                }
            } else {
                for dj in connected(di, n_orb) {
                    if let Some(&j) = index.get(&dj) {
                        row.push((j, slater_condon(di, dj, ham)));
                    }
                }
                row.sort_unstable_by_key(|e| e.0);
            }
            row.retain(|e| e.1 != 0.0);
            (slater_condon(di, di, ham), row)
        })
        .collect();
    let mut out = SparseHamiltonian {
        dim,
        diag: Vec::with_capacity(dim),
        row_ptr: vec![0],
        cols: Vec::new(),
        vals: Vec::new(),
    };
    for (d, row) in rows {
        out.diag.push(d);
        for (j, v) in row {
            out.cols.push(j);
            out.vals.push(v);
        }
        out.row_ptr.push(out.cols.len());
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DavidsonOptions {
    pub tol: f64,
    pub max_space: usize,
    pub max_iter: usize,
}

impl Default for DavidsonOptions {
    fn default() -> Self {
        DavidsonOptions {
            tol: 1e-8,
            max_space: 30,
            max_iter: 2000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Eigenpair {
    pub energy: f64,
    pub vector: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

fn normalize_sign(v: &mut [f64]) {
    let mut big = 0;
    for i in 0..v.len() {
        if v[i].abs() > v[big].abs() + 1e-12 {
            big = i;
        }
    }
    if v[big] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

fn dense_lowest(m: DMatrix<f64>) -> (f64, Vec<f64>, f64) {
    let eig = SymmetricEigen::new(m);
    let k = (0..eig.eigenvalues.len())
        .min_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]))
        .expect("nonempty");
    let second = (0..eig.eigenvalues.len())
        .filter(|&j| j != k)
        .map(|j| eig.eigenvalues[j])
        .fold(f64::INFINITY, f64::min);
    (
        eig.eigenvalues[k],
        eig.eigenvectors.column(k).iter().copied().collect(),
        second,
    )
}

/// Lowest eigenpair by Davidson iteration with a diagonal preconditioner,
/// starting from the unit vector on the lowest diagonal element. Problems
/// that fit in the subspace limit are solved densely.
pub fn davidson_ground(hmat: &SparseHamiltonian, opts: &DavidsonOptions) -> Result<Eigenpair> {
    let n = hmat.dim;
    if n == 0 {
        return Err(Error::Input("empty Hamiltonian".into()));
    }
    if n <= opts.max_space.max(2) {
        let (energy, mut vector, _) = dense_lowest(hmat.to_dense());
        normalize_sign(&mut vector);
        return Ok(Eigenpair {
            energy,
            vector,
            residual: 0.0,
            iterations: 0,
        });
    }
    let max_space = opts.max_space.max(3);
    let start = (0..n)
        .min_by(|&a, &b| hmat.diag[a].total_cmp(&hmat.diag[b]))
        .expect("nonempty");
    let mut basis: Vec<Vec<f64>> = vec![{
        let mut v = vec![0.0; n];
        v[start] = 1.0;
        v
    }];
    let mut images: Vec<Vec<f64>> = vec![hmat.matvec(&basis[0])];
    let mut residual = f64::INFINITY;
    for iteration in 1..=opts.max_iter {
        let k = basis.len();
        let small = DMatrix::from_fn(k, k, |i, j| {
            
            0.5 * (dot(&basis[i], &images[j]) + dot(&basis[j], &images[i]))
        });
        let eig = SymmetricEigen::new(small);
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let theta = eig.eigenvalues[order[0]];
        let combine = |vecs: &[Vec<f64>], col: usize| -> Vec<f64> {
            let mut out = vec![0.0; n];
            for (c, v) in eig.eigenvectors.column(col).iter().zip(vecs) {
                for (o, x) in out.iter_mut().zip(v) {
                    *o += c * x;
                }
            }
            out
        };
        let x = combine(&basis, order[0]);
        let hx = combine(&images, order[0]);
        let r: Vec<f64> = hx.iter().zip(&x).map(|(a, b)| a - theta * b).collect();
        residual = dot(&r, &r).sqrt();
        if residual < opts.tol {
            let norm = dot(&x, &x).sqrt();
            let mut vector: Vec<f64> = x.iter().map(|v| v / norm).collect();
            normalize_sign(&mut vector);
            return Ok(Eigenpair {
                energy: theta,
                vector,
                residual,
                iterations: iteration,
            });
        }
        if k >= max_space {
            let keep: Vec<Vec<f64>> = order.iter().take(2).map(|&c| combine(&basis, c)).collect();
            let keep_images: Vec<Vec<f64>> =
                order.iter().take(2).map(|&c| combine(&images, c)).collect();
            basis = keep;
            images = keep_images;
        }
        let mut t: Vec<f64> = r
            .iter()
            .zip(&hmat.diag)
            .map(|(ri, di)| {
                let mut denom = theta - di;
                if denom.abs() < 1e-8 {
                    denom = if denom < 0.0 { -1e-8 } else { 1e-8 };
                }
                ri / denom
            })
            .collect();
        let mut norm = 0.0;
        for _ in 0..2 {
            for b in &basis {
                let c = dot(b, &t) / dot(b, b);
                t.iter_mut().zip(b).for_each(|(ti, bi)| *ti -= c * bi);
            }
            norm = dot(&t, &t).sqrt();
        }
        if norm < 1e-12 {
            // Preconditioned direction lies in the subspace; fall back to the residual.
            t = r.clone();
            for _ in 0..2 {
                for b in &basis {
                    let c = dot(b, &t) / dot(b, b);
                    t.iter_mut().zip(b).for_each(|(ti, bi)| *ti -= c * bi);
                }
            }
            norm = dot(&t, &t).sqrt();
            if norm < 1e-14 {
                break;
            }
        }
        t.iter_mut().for_each(|v| *v /= norm);
        images.push(hmat.matvec(&t));
        basis.push(t);
    }
    Err(Error::NoConvergence {
        residual,
        iterations: opts.max_iter,
    })
}

/// Coefficients over an explicit determinant list.
#[derive(Debug, Clone, PartialEq)]
pub struct CiVector {
    pub n_orb: usize,
    pub dets: Vec<Determinant>,
    pub c: Vec<f64>,
}

impl CiVector {
    pub fn norm(&self) -> f64 {
        dot(&self.c, &self.c).sqrt()
    }
}

/// Ground state of the projection onto `dets`.
pub fn solve_subspace(
    dets: &[Determinant],
    ham: HamiltonianRef<'_>,
    opts: &DavidsonOptions,
) -> Result<(f64, CiVector)> {
    let hmat = build_projected_hamiltonian(dets, ham)?;
    let pair = davidson_ground(&hmat, opts)?;
    Ok((
        pair.energy,
        CiVector {
            n_orb: ham.n_orb(),
            dets: dets.to_vec(),
            c: pair.vector,
        },
    ))
}

/// Exact ground state in the `(n_alpha, n_beta)` sector.
pub fn fci_ground<'a>(
    ham: impl Into<HamiltonianRef<'a>>,
    n_alpha: usize,
    n_beta: usize,
) -> Result<(f64, CiVector)> {
    let ham = ham.into();
    let basis = enumerate_sector(ham.n_orb(), n_alpha, n_beta)?;
    solve_subspace(&basis.dets, ham, &DavidsonOptions::default())
}

/// Spin-orbital one-particle density matrix. Index `p` is alpha orbital `p`,
/// index `n_orb + p` beta orbital `p`.
#[derive(Debug, Clone, PartialEq)]
pub struct OneRdm {
    pub matrix: Array2<f64>,
    /// Diagonal of `matrix`.
    pub occupations: Vec<f64>,
    /// Set when the input vector was not normalized and had to be rescaled.
    pub renormalized: bool,
}

fn normalized(psi: &CiVector) -> (Vec<f64>, bool) {
    let norm = psi.norm();
    if (norm - 1.0).abs() > 1e-12 && norm > 0.0 {
        (psi.c.iter().map(|c| c / norm).collect(), true)
    } else {
        (psi.c.clone(), false)
    }
}

/// Mean spin-orbital occupations `<psi|n_p|psi>`.
pub fn occupations(psi: &CiVector) -> Vec<f64> {
    let (c, _) = normalized(psi);
    let n = psi.n_orb;
    let mut occ = vec![0.0; 2 * n];
    for (d, ci) in psi.dets.iter().zip(&c) {
        let w = ci * ci;
        for p in bits(d.alpha) {
            occ[p] += w;
        }
        for p in bits(d.beta) {
            occ[n + p] += w;
        }
    }
    occ.iter_mut().for_each(|x| *x = x.clamp(0.0, 1.0));
    occ
}

pub fn one_rdm(psi: &CiVector) -> OneRdm {
    let (c, renormalized) = normalized(psi);
    let n = psi.n_orb;
    let index: HashMap<Determinant, usize> =
        psi.dets.iter().enumerate().map(|(i, &d)| (d, i)).collect();
    let mut m = Array2::zeros((2 * n, 2 * n));
    let full = low_bits(n);
    for (col, d) in psi.dets.iter().enumerate() {
        if c[col] == 0.0 {
            continue;
        }
        for p in bits(d.alpha) {
            m[[p, p]] += c[col] * c[col];
        }
        for p in bits(d.beta) {
            m[[n + p, n + p]] += c[col] * c[col];
        }
        // <row| a†_a a_i |col> for a != i within one spin.
        for spin in 0..2 {
            let s = if spin == 0 { d.alpha } else { d.beta };
            for i in bits(s) {
                for a in bits(full & !s) {
                    let t = s & !(1 << i) | 1 << a;
                    let target = if spin == 0 {
                        Determinant::new(t, d.beta)
                    } else {
                        Determinant::new(d.alpha, t)
                    };
                    if let Some(&row) = index.get(&target) {
                        m[[a + spin * n, i + spin * n]] += single_sign(s, i, a) * c[row] * c[col];
                    }
                }
            }
        }
    }
    let occupations = (0..2 * n).map(|p| m[[p, p]]).collect();
    OneRdm {
        matrix: m,
        occupations,
        renormalized,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn string_enumeration_counts() {
        assert_eq!(strings(5, 2).len(), 10);
        assert_eq!(strings(4, 0), vec![0]);
        assert_eq!(strings(3, 3), vec![7]);
        let s = strings(6, 3);
        assert!(s.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn sector_sizes() {
        assert_eq!(enumerate_sector(2, 1, 1).unwrap().len(), 4);
        assert_eq!(enumerate_sector(6, 3, 3).unwrap().len(), 400);
        assert_eq!(enumerate_sector(12, 3, 3).unwrap().len(), 48_400);
    }

    #[test]
    fn sector_is_sorted_and_indexed() {
        let b = enumerate_sector(5, 2, 3).unwrap();
        assert!(b
            .dets
            .windows(2)
            .all(|w| w[0].to_bitstring(5) < w[1].to_bitstring(5)));
        for (i, d) in b.dets.iter().enumerate() {
            assert_eq!(b.index_of(d), Some(i));
        }
    }

    #[test]
    fn capacity_cap_is_enforced() {
        assert!(matches!(
            enumerate_sector_capped(10, 5, 5, 1000),
            Err(Error::Capacity { dim: 63_504, .. })
        ));
        assert!(matches!(
            enumerate_sector(32, 16, 16),
            Err(Error::Capacity { .. })
        ));
    }

    #[test]
    fn bitstring_layout_puts_beta_high() {
        let d = Determinant::new(0b01, 0b10);
        assert_eq!(d.to_bitstring(2), 0b1001);
        assert_eq!(Determinant::from_bitstring(0b1001, 2), d);
    }

    #[test]
    fn duplicate_determinants_are_rejected() {
        let h = Array2::eye(2);
        let g = Array4::zeros((2, 2, 2, 2));
        let ham = HamiltonianRef {
            h: &h,
            g: &g,
            e_core: 0.0,
        };
        let d = Determinant::new(1, 1);
        assert!(matches!(
            build_projected_hamiltonian(&[d, d], ham),
            Err(Error::DuplicateDeterminant(1))
        ));
    }

    #[test]
    fn diagonal_matrix_gives_min_diagonal() {
        let dim = 50;
        let diag: Vec<f64> = (0..dim)
            .map(|i| ((i * 37) % 50) as f64 * 0.1 - 1.0)
            .collect();
        let h = SparseHamiltonian {
            dim,
            diag: diag.clone(),
            row_ptr: vec![0; dim + 1],
            cols: vec![],
            vals: vec![],
        };
        let pair = davidson_ground(&h, &DavidsonOptions::default()).unwrap();
        let k = (0..dim)
            .min_by(|&a, &b| diag[a].total_cmp(&diag[b]))
            .unwrap();
        assert_eq!(pair.energy, diag[k]);
        assert_eq!(pair.vector[k], 1.0);
    }
}
