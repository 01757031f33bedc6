//! Simulated measurement: bitstring sample sets, exact sampling from CI
//! vectors, unitary cluster Jastrow state preparation and readout noise.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use ndarray::Array2;
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use crate::ci::{low_bits, CiVector, Determinant, SectorBasis};
use crate::error::{Error, Result};
use crate::linalg::{eigh, eigh_complex, log_unitary};
use crate::obmp2::Amplitudes;
use crate::rng::{domain, stream};

/// Measured bitstrings (`beta << n_orb | alpha`) with multiplicities.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SampleSet {
    pub n_orb: usize,
    pub shots: u64,
    pub counts: BTreeMap<u64, u64>,
}

impl SampleSet {
    pub fn new(n_orb: usize) -> Self {
        SampleSet {
            n_orb,
            shots: 0,
            counts: BTreeMap::new(),
        }
    }

    pub fn add(&mut self, bitstring: u64, count: u64) {
        if count > 0 {
            *self.counts.entry(bitstring).or_default() += count;
            self.shots += count;
        }
    }

    /// Every shot in key order, each bitstring repeated by its multiplicity.
    pub fn expand(&self) -> Vec<u64> {
        self.counts
            .iter()
            .flat_map(|(&x, &c)| std::iter::repeat_n(x, c as usize))
            .collect()
    }

    pub fn from_shots(n_orb: usize, shots: impl IntoIterator<Item = u64>) -> Self {
        let mut s = SampleSet::new(n_orb);
        for x in shots {
            s.add(x, 1);
        }
        s
    }

    /// Text form: a `norb shots` header, then `bitstring count` lines with the
    /// bitstring written most significant bit first.
    pub fn to_text(&self) -> String {
        let width = 2 * self.n_orb;
        let mut out = format!("{} {}\n", self.n_orb, self.shots);
        for (&x, &c) in &self.counts {
            let _ = writeln!(out, "{x:0width$b} {c}");
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or(Error::SampleFormat {
            line: 1,
            msg: "empty input".into(),
        })?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        let bad = |line: usize, msg: String| Error::SampleFormat { line, msg };
        if fields.len() != 2 {
            return Err(bad(1, "header must be `norb shots`".into()));
        }
        let n_orb: usize = fields[0]
            .parse()
            .map_err(|_| bad(1, format!("bad norb {:?}", fields[0])))?;
        let shots: u64 = fields[1]
            .parse()
            .map_err(|_| bad(1, format!("bad shots {:?}", fields[1])))?;
        if n_orb == 0 || n_orb > crate::ci::MAX_ORB {
            return Err(bad(1, format!("norb {n_orb} unsupported")));
        }
        let mut set = SampleSet::new(n_orb);
        for (k, line) in lines {
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 2 {
                return Err(bad(k + 1, "expected `bitstring count`".into()));
            }
            if f[0].len() != 2 * n_orb {
                return Err(Error::Width {
                    found: f[0].len(),
                    expected: 2 * n_orb,
                });
            }
            let x = u64::from_str_radix(f[0], 2)
                .map_err(|_| bad(k + 1, format!("bad bitstring {:?}", f[0])))?;
            let c: u64 = f[1]
                .parse()
                .map_err(|_| bad(k + 1, format!("bad count {:?}", f[1])))?;
            set.add(x, c);
        }
        if set.shots != shots {
            return Err(bad(
                1,
                format!("header says {shots} shots, counts sum to {}", set.shots),
            ));
        }
        Ok(set)
    }
}

/// Draw `shots` indices from `probs` (need not be normalized); shot `s` uses
/// its own counter-based stream.
fn draw(probs: &[f64], shots: u64, seed: u64) -> Vec<usize> {
    let mut cdf = Vec::with_capacity(probs.len());
    let mut acc = 0.0;
    for &p in probs {
        acc += p;
        cdf.push(acc);
    }
    let total = acc;
    (0..shots)
        .into_par_iter()
        .map(|s| {
            let u: f64 = stream(seed, domain::EXACT_SAMPLING, s).random::<f64>() * total;
            cdf.partition_point(|&c| c <= u).min(probs.len() - 1)
        })
        .collect()
}

/// Sample determinants with probabilities `probs`.
pub fn sample_distribution(
    dets: &[Determinant],
    probs: &[f64],
    n_orb: usize,
    shots: u64,
    seed: u64,
) -> SampleSet {
    if shots == 0 || dets.is_empty() {
        return SampleSet::new(n_orb);
    }
    SampleSet::from_shots(
        n_orb,
        draw(probs, shots, seed)
            .into_iter()
            .map(|k| dets[k].to_bitstring(n_orb)),
    )
}

/// Multinomial draw over `|c_x|^2`.
pub fn sample_exact(psi: &CiVector, shots: u64, seed: u64) -> SampleSet {
    let probs: Vec<f64> = psi.c.iter().map(|c| c * c).collect();
    sample_distribution(&psi.dets, &probs, psi.n_orb, shots, seed)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub p_flip: f64,
    pub seed: u64,
}

impl NoiseModel {
    pub fn new(p_flip: f64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p_flip) {
            return Err(Error::Input(format!("p_flip {p_flip} outside [0, 1]")));
        }
        Ok(NoiseModel { p_flip, seed })
    }
}

/// Flip each bit of each shot independently with probability `p_flip`.
pub fn apply_noise(s: &SampleSet, noise: &NoiseModel) -> SampleSet {
    let width = 2 * s.n_orb;
    let flipped: Vec<u64> = s
        .expand()
        .into_par_iter()
        .enumerate()
        .map(|(k, x)| {
            let mut rng = stream(noise.seed, domain::NOISE, k as u64);
            let mut y = x;
            for bit in 0..width {
                if rng.random::<f64>() < noise.p_flip {
                    y ^= 1 << bit;
                }
            }
            y
        })
        .collect();
    SampleSet::from_shots(s.n_orb, flipped)
}

/// One layer `exp(K) exp(i sum J_pq n_p n_q) exp(-K)`, with `K` a one-body
/// generator (spin-summed) and `n_p` spin-summed densities.
#[derive(Debug, Clone, PartialEq)]
pub struct UcjLayer {
    pub k: Array2<Complex64>,
    pub j: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UcjAnsatz {
    pub n_orb: usize,
    pub layers: Vec<UcjLayer>,
    pub reference: Determinant,
}

impl UcjAnsatz {
    /// Zero the Jastrow couplings outside `mask` (restricted connectivity).
    pub fn with_jastrow_mask(mut self, mask: &Array2<bool>) -> Self {
        for layer in &mut self.layers {
            for ((p, q), v) in layer.j.indexed_iter_mut() {
                if !mask[[p, q]] {
                    *v = 0.0;
                }
            }
        }
        self
    }
}

/// Build layers from the doubles amplitudes.
///
/// The amplitudes, read as a symmetric matrix over (occupied, virtual) pairs,
/// give modes `t = sum_m lambda_m x_m x_mᵀ`, so the cluster operator is
/// `sum_m lambda_m/2 O_m²` with `O_m = sum x_m[a,i] E_ai`. Each mode term of
/// `T - T†` equals `-(i lambda/8)(M+² - M-²)` with the Hermitian one-body
/// operators `M± = (1±i) O + (1∓i) O†`, and each square is an orbital rotation
/// of a density-density term. A mode therefore yields two layers.
pub fn ucj_from_t2(t: &Amplitudes, n_modes: usize) -> Result<UcjAnsatz> {
    let n = t.n_orb;
    let (no, nv) = (t.occ_list.len(), t.virt_list.len());
    let reference = Determinant::hartree_fock(no, no);
    if t.is_zero() {
        return Ok(UcjAnsatz {
            n_orb: n,
            layers: Vec::new(),
            reference,
        });
    }
    let dim = no * nv;
    let m = Array2::from_shape_fn((dim, dim), |(x, y)| {
        let (i, a) = (x / nv, x % nv);
        let (j, b) = (y / nv, y % nv);
        0.5 * (t.t[[i, j, a, b]] + t.t[[j, i, b, a]])
    });
    let (w, v) = eigh(&m);
    let scale = w.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    let mut modes: Vec<usize> = (0..dim).filter(|&k| w[k].abs() > 1e-10 * scale).collect();
    let rank = modes.len();
    if n_modes > rank {
        return Err(Error::Rank {
            requested: n_modes,
            rank,
        });
    }
    modes.sort_by(|&x, &y| w[y].abs().total_cmp(&w[x].abs()).then(x.cmp(&y)));
    let mut layers = Vec::with_capacity(2 * n_modes);
    for &k in modes.iter().take(n_modes) {
        let lambda = w[k];
        let mut x = DMatrix::<Complex64>::zeros(n, n);
        for (i, &oi) in t.occ_list.iter().enumerate() {
            for (a, &va) in t.virt_list.iter().enumerate() {
                x[(va, oi)] = Complex64::new(v[[i * nv + a, k]], 0.0);
            }
        }
        for (phase, sign) in [(1.0, -1.0), (-1.0, 1.0)] {
            let c = Complex64::new(1.0, phase);
            let herm = &x * c + x.transpose() * c.conj();
            let (kappa, u) = eigh_complex(&herm);
            let gen = log_unitary(&u);
            let j =
                Array2::from_shape_fn((n, n), |(p, q)| sign * lambda / 8.0 * kappa[p] * kappa[q]);
            let k = Array2::from_shape_fn((n, n), |(p, q)| gen[(p, q)]);
            layers.push(UcjLayer { k, j });
        }
    }
    Ok(UcjAnsatz {
        n_orb: n,
        layers,
        reference,
    })
}

/// Complex state over a sector basis.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedState {
    pub n_orb: usize,
    pub dets: Vec<Determinant>,
    pub amplitudes: Vec<Complex64>,
}

impl PreparedState {
    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|z| z.norm_sqr()).collect()
    }

    pub fn norm(&self) -> f64 {
        self.probabilities().iter().sum::<f64>().sqrt()
    }

    /// Real CI vector when the imaginary part is negligible.
    pub fn to_real(&self) -> Option<CiVector> {
        let imag: f64 = self
            .amplitudes
            .iter()
            .map(|z| z.im * z.im)
            .sum::<f64>()
            .sqrt();
        (imag < 1e-10).then(|| CiVector {
            n_orb: self.n_orb,
            dets: self.dets.clone(),
            c: self.amplitudes.iter().map(|z| z.re).collect(),
        })
    }

    pub fn sample(&self, shots: u64, seed: u64) -> SampleSet {
        sample_distribution(&self.dets, &self.probabilities(), self.n_orb, shots, seed)
    }
}

/// For every determinant, the determinants reached by `E_qp` for all `p != q`,
/// stored as `(source index, p, q, sign)` with `<row|E_pq|source> = sign`.
struct OneBodyTable {
    rows: Vec<Vec<(usize, u8, u8, f64)>>,
}

impl OneBodyTable {
    fn new(basis: &SectorBasis) -> Self {
        let n = basis.n_orb;
        let rows = basis
            .dets
            .par_iter()
            .map(|d| {
                let mut row = Vec::new();
                for spin in 0..2 {
                    let s = if spin == 0 { d.alpha } else { d.beta };
                    for p in (0..n).filter(|&p| s >> p & 1 == 1) {
                        for q in (0..n).filter(|&q| s >> q & 1 == 0) {
                            let t = s & !(1 << p) | 1 << q;
                            let below = |x: u64, k: usize| (x & low_bits(k)).count_ones();
                            let sign_bits = below(s, p) + below(s & !(1 << p), q);
                            let sign = if sign_bits % 2 == 0 { 1.0 } else { -1.0 };
                            let src = if spin == 0 {
                                Determinant::new(t, d.beta)
                            } else {
                                Determinant::new(d.alpha, t)
                            };
                            if let Some(k) = basis.index_of(&src) {
                                row.push((k, p as u8, q as u8, sign));
                            }
                        }
                    }
                }
                row
            })
            .collect();
        OneBodyTable { rows }
    }

    /// `y = K̂ x` for `K̂ = sum_pq k_pq E_pq`.
    fn apply(&self, basis: &SectorBasis, k: &Array2<Complex64>, x: &[Complex64]) -> Vec<Complex64> {
        let n = basis.n_orb;
        basis
            .dets
            .par_iter()
            .zip(&self.rows)
            .enumerate()
            .map(|(r, (d, row))| {
                let mut acc = Complex64::new(0.0, 0.0);
                for p in 0..n {
                    let occ = (d.alpha >> p & 1) + (d.beta >> p & 1);
                    if occ > 0 {
                        acc += k[[p, p]] * occ as f64;
                    }
                }
                acc *= x[r];
                for &(src, p, q, sign) in row {
                    acc += k[[p as usize, q as usize]] * sign * x[src];
                }
                acc
            })
            .collect()
    }

    /// `exp(K̂) x` by scaled Taylor steps.
    fn exp_apply(
        &self,
        basis: &SectorBasis,
        k: &Array2<Complex64>,
        x: Vec<Complex64>,
    ) -> Vec<Complex64> {
        let n_elec = (basis.n_alpha + basis.n_beta).max(1) as f64;
        let knorm = k.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let steps = (knorm * n_elec).ceil().max(1.0) as usize;
        let scaled = k.mapv(|z| z / steps as f64);
        let mut state = x;
        for _ in 0..steps {
            let mut term = state.clone();
            let mut out = state.clone();
            for order in 1..=60 {
                term = self.apply(basis, &scaled, &term);
                let inv = 1.0 / order as f64;
                term.iter_mut().for_each(|z| *z *= inv);
                let size: f64 = term.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                out.iter_mut().zip(&term).for_each(|(o, t)| *o += t);
                if size < 1e-16 {
                    break;
                }
            }
            state = out;
        }
        state
    }
}

/// Apply the ansatz layers to its reference determinant within `basis`.
pub fn prepare_ucj_state(ansatz: &UcjAnsatz, basis: &SectorBasis) -> Result<PreparedState> {
    let start = basis
        .index_of(&ansatz.reference)
        .ok_or_else(|| Error::Input("reference determinant outside the sector".into()))?;
    if ansatz.n_orb != basis.n_orb {
        return Err(Error::Dimension(format!(
            "ansatz for {} orbitals, basis for {}",
            ansatz.n_orb, basis.n_orb
        )));
    }
    let mut state = vec![Complex64::new(0.0, 0.0); basis.len()];
    state[start] = Complex64::new(1.0, 0.0);
    if ansatz.layers.is_empty() {
        return Ok(PreparedState {
            n_orb: basis.n_orb,
            dets: basis.dets.clone(),
            amplitudes: state,
        });
    }
    let table = OneBodyTable::new(basis);
    let n = basis.n_orb;
    for layer in &ansatz.layers {
        state = table.exp_apply(basis, &layer.k.mapv(|z| -z), state);
        for (amp, d) in state.iter_mut().zip(&basis.dets) {
            let dens: Vec<f64> = (0..n)
                .map(|p| ((d.alpha >> p & 1) + (d.beta >> p & 1)) as f64)
                .collect();
            let mut phase = 0.0;
            for p in 0..n {
                for q in 0..n {
                    phase += layer.j[[p, q]] * dens[p] * dens[q];
                }
            }
            *amp *= Complex64::from_polar(1.0, phase);
        }
        state = table.exp_apply(basis, &layer.k, state);
    }
    Ok(PreparedState {
        n_orb: basis.n_orb,
        dets: basis.dets.clone(),
        amplitudes: state,
    })
}
