//! Sample-based diagonalization: particle-number filtering, configuration
//! recovery, batched subspace diagonalization and the occupation fixed point.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::ci::{
    low_bits, occupations, solve_subspace, DavidsonOptions, Determinant, HamiltonianRef,
};
use crate::downfold::EffectiveHamiltonian;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, domain, stream};
use crate::sampler::SampleSet;

/// Mean spin-orbital occupations; index `p` is alpha orbital `p`, index
/// `n_orb + p` beta orbital `p` (the bit positions of a sample bitstring).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OccupationVector(pub Vec<f64>);

impl OccupationVector {
    pub fn new(values: Vec<f64>) -> Self {
        OccupationVector(values.into_iter().map(|x| x.clamp(0.0, 1.0)).collect())
    }

    /// Occupations of a single determinant.
    pub fn of_determinant(d: Determinant, n_orb: usize) -> Self {
        let x = d.to_bitstring(n_orb);
        OccupationVector((0..2 * n_orb).map(|k| (x >> k & 1) as f64).collect())
    }

    pub fn max_abs_diff(&self, other: &OccupationVector) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
#[serde(default)]
pub struct SqdConfig {
    pub k_batches: usize,
    pub batch_size: usize,
    pub max_outer_iter: usize,
    pub occ_tol: f64,
    pub seed: u64,
    pub delta: f64,
    pub include_reference: bool,
    /// Each batch keeps the determinants it held in the previous iteration.
    pub cumulative: bool,
    pub davidson_tol: f64,
}

impl Default for SqdConfig {
    fn default() -> Self {
        SqdConfig {
            k_batches: 5,
            batch_size: 50,
            max_outer_iter: 10,
            occ_tol: 1e-3,
            seed: 0,
            delta: 0.01,
            include_reference: false,
            cumulative: false,
            davidson_tol: 1e-8,
        }
    }
}

impl SqdConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_batches == 0 || self.batch_size == 0 {
            return Err(Error::Input(
                "k_batches and batch_size must be positive".into(),
            ));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::Input(format!("delta {} outside (0, 1)", self.delta)));
        }
        Ok(())
    }
}

pub type DeterminantMultiset = BTreeMap<Determinant, u64>;

/// Split samples by per-spin Hamming weight: valid determinants and the
/// remaining raw bitstrings.
pub fn filter_valid(
    s: &SampleSet,
    n_orb: usize,
    n_alpha: usize,
    n_beta: usize,
) -> Result<(DeterminantMultiset, BTreeMap<u64, u64>)> {
    if s.n_orb != n_orb {
        return Err(Error::Width {
            found: 2 * s.n_orb,
            expected: 2 * n_orb,
        });
    }
    let mut valid = BTreeMap::new();
    let mut invalid = BTreeMap::new();
    for (&x, &c) in &s.counts {
        if x >> (2 * n_orb) != 0 {
            return Err(Error::Width {
                found: 64 - x.leading_zeros() as usize,
                expected: 2 * n_orb,
            });
        }
        let d = Determinant::from_bitstring(x, n_orb);
        if d.n_alpha() == n_alpha && d.n_beta() == n_beta {
            *valid.entry(d).or_default() += c;
        } else {
            *invalid.entry(x).or_default() += c;
        }
    }
    Ok((valid, invalid))
}

/// Piecewise-linear flip weight: `delta * u / h` up to the filling `h`, then
/// linear from `delta` to 1. Returns `(w, degenerate)`; for `h` of 0 or 1 the
/// weight is `u` and `degenerate` is set.
pub fn relu_weight_checked(u: f64, h: f64, delta: f64) -> (f64, bool) {
    if h <= 0.0 || h >= 1.0 {
        return (u, true);
    }
    let w = if u <= h {
        delta * u / h
    } else {
        delta + (1.0 - delta) * (u - h) / (1.0 - h)
    };
    (w, false)
}

pub fn relu_weight(u: f64, h: f64, delta: f64) -> f64 {
    relu_weight_checked(u, h, delta).0
}

/// Recovered determinants and diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct Recovery {
    pub dets: DeterminantMultiset,
    /// Spin sectors in which every candidate bit had zero weight.
    pub uniform_fallbacks: usize,
    pub degenerate_filling: bool,
}

/// Choose `k` of `candidates` without replacement, probability proportional
/// to `weights`; uniform when all remaining weights vanish.
fn weighted_pick(
    rng: &mut impl Rng,
    candidates: &[usize],
    weights: &[f64],
    k: usize,
    fallback: &mut bool,
) -> Vec<usize> {
    let mut cand = candidates.to_vec();
    let mut w = weights.to_vec();
    let mut out = Vec::with_capacity(k);
    for _ in 0..k {
        let total: f64 = w.iter().sum();
        let pos = if total > 0.0 {
            let u = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pos = w.len() - 1;
            for (i, &wi) in w.iter().enumerate() {
                acc += wi;
                if u < acc && wi > 0.0 {
                    pos = i;
                    break;
                }
            }
            pos
        } else {
            *fallback = true;
            rng.random_range(0..cand.len())
        };
        out.push(cand.remove(pos));
        w.remove(pos);
    }
    out
}

/// Restore each string's per-spin particle numbers by flipping bits chosen
/// with probabilities given by the occupation-distance weights.
pub fn recover_configurations(
    invalid: &BTreeMap<u64, u64>,
    occ: &OccupationVector,
    n_orb: usize,
    n_alpha: usize,
    n_beta: usize,
    delta: f64,
    seed: u64,
) -> Recovery {
    let h = (n_alpha + n_beta) as f64 / (2 * n_orb) as f64;
    let degenerate_filling = relu_weight_checked(0.5, h, delta).1;
    let shots: Vec<u64> = invalid
        .iter()
        .flat_map(|(&x, &c)| std::iter::repeat_n(x, c as usize))
        .collect();
    let results: Vec<(Determinant, usize)> = shots
        .par_iter()
        .enumerate()
        .map(|(k, &x)| {
            let mut rng = stream(seed, domain::RECOVERY, k as u64);
            let mut fallbacks = 0;
            let mut halves = [x & low_bits(n_orb), x >> n_orb];
            for (spin, target) in [(0usize, n_alpha), (1, n_beta)] {
                let s = halves[spin];
                let have = s.count_ones() as usize;
                if have == target {
                    continue;
                }
                let surplus = have > target;
                let cand: Vec<usize> = (0..n_orb)
                    .filter(|&p| (s >> p & 1 == 1) == surplus)
                    .collect();
                let weights: Vec<f64> = cand
                    .iter()
                    .map(|&p| {
                        let bit = (s >> p & 1) as f64;
                        relu_weight((bit - occ.0[spin * n_orb + p]).abs(), h, delta)
                    })
                    .collect();
                let mut fallback = false;
                let flips = weighted_pick(
                    &mut rng,
                    &cand,
                    &weights,
                    have.abs_diff(target),
                    &mut fallback,
                );
                fallbacks += fallback as usize;
                for p in flips {
                    halves[spin] ^= 1 << p;
                }
            }
            (Determinant::new(halves[0], halves[1]), fallbacks)
        })
        .collect();
    let mut dets = BTreeMap::new();
    let mut uniform_fallbacks = 0;
    for (d, f) in results {
        *dets.entry(d).or_default() += 1;
        uniform_fallbacks += f;
    }
    Recovery {
        dets,
        uniform_fallbacks,
        degenerate_filling,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Batches {
    pub batches: Vec<Vec<Determinant>>,
    /// Set when the pool had fewer distinct configurations than the batch size.
    pub undersized: bool,
}

/// `k_batches` sorted lists of at most `batch_size` distinct determinants,
/// each drawn without replacement with weights equal to pool multiplicities.
pub fn make_batches(
    pool: &DeterminantMultiset,
    cfg: &SqdConfig,
    reference: Option<Determinant>,
    seed: u64,
) -> Result<Batches> {
    if pool.is_empty() && reference.is_none() {
        return Err(Error::Input("empty configuration pool".into()));
    }
    let d = cfg.batch_size;
    let forced = if cfg.include_reference {
        reference
    } else {
        None
    };
    let others: Vec<(Determinant, u64)> = pool
        .iter()
        .filter(|(det, _)| Some(**det) != forced)
        .map(|(&det, &c)| (det, c))
        .collect();
    let room = d - forced.is_some() as usize;
    let undersized = others.len() < room;
    let batches = (0..cfg.k_batches)
        .map(|k| {
            let mut chosen: Vec<Determinant> = if others.len() <= room {
                others.iter().map(|e| e.0).collect()
            } else {
                // Efraimidis-Spirakis keys: ln(u) / w, keep the largest.
                let mut rng = stream(seed, domain::BATCHES, k as u64);
                let mut keyed: Vec<(f64, Determinant)> = others
                    .iter()
                    .map(|&(det, c)| {
                        let u: f64 = 1.0 - rng.random::<f64>();
                        (u.ln() / c as f64, det)
                    })
                    .collect();
                keyed.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
                keyed.into_iter().take(room).map(|e| e.1).collect()
            };
            chosen.extend(forced);
            chosen.sort();
            chosen
        })
        .collect();
    Ok(Batches {
        batches,
        undersized,
    })
}

/// Diagnostics raised during a run.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SqdFlags {
    /// No valid samples at iteration 0; HF occupations seeded recovery.
    pub hf_prior: bool,
    pub uniform_fallbacks: usize,
    pub undersized_batches: bool,
    pub degenerate_filling: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SqdIteration {
    pub iteration: usize,
    pub batch_energies: Vec<f64>,
    pub batch_dims: Vec<usize>,
    pub occupation_delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SqdResult {
    /// Lowest batch energy of the final iteration.
    pub energy: f64,
    /// Batch energies per iteration, iteration 0 first.
    pub per_batch_energies: Vec<Vec<f64>>,
    pub final_occupations: OccupationVector,
    /// Distinct determinants in the batch giving `energy`.
    pub subspace_dim: usize,
    /// Recovery iterations performed.
    pub n_outer: usize,
    pub converged: bool,
    pub trace: Vec<SqdIteration>,
    pub flags: SqdFlags,
}

impl SqdResult {
    /// Lowest batch energy of iteration 0, before any recovery.
    pub fn initial_energy(&self) -> Option<f64> {
        self.per_batch_energies
            .first()
            .and_then(|e| e.iter().copied().reduce(f64::min))
    }

    /// One JSON object per iteration.
    pub fn trace_jsonl(&self) -> String {
        self.trace
            .iter()
            .map(|it| serde_json::to_string(it).expect("serializable") + "\n")
            .collect()
    }
}

struct BatchSolve {
    energies: Vec<f64>,
    dims: Vec<usize>,
    occ: OccupationVector,
}

fn solve_batches(
    heff: &EffectiveHamiltonian,
    batches: &[Vec<Determinant>],
    tol: f64,
) -> Result<BatchSolve> {
    let ham = HamiltonianRef::from(heff);
    let opts = DavidsonOptions {
        tol,
        ..DavidsonOptions::default()
    };
    let solved: Vec<(f64, Vec<f64>)> = batches
        .par_iter()
        .map(|b| solve_subspace(b, ham, &opts).map(|(e, psi)| (e, occupations(&psi))))
        .collect::<Result<_>>()?;
    let n = 2 * heff.n_act;
    let mut mean = vec![0.0; n];
    for (_, occ) in &solved {
        for (m, o) in mean.iter_mut().zip(occ) {
            *m += o;
        }
    }
    let k = solved.len() as f64;
    Ok(BatchSolve {
        energies: solved.iter().map(|s| s.0).collect(),
        dims: batches.iter().map(Vec::len).collect(),
        occ: OccupationVector::new(mean.into_iter().map(|m| m / k).collect()),
    })
}

/// The full self-consistent loop.
pub fn sqd_solve(
    heff: &EffectiveHamiltonian,
    samples: &SampleSet,
    n_alpha: usize,
    n_beta: usize,
    cfg: &SqdConfig,
) -> Result<SqdResult> {
    cfg.validate()?;
    let n = heff.n_act;
    let (valid, invalid) = filter_valid(samples, n, n_alpha, n_beta)?;
    let reference = Determinant::hartree_fock(n_alpha, n_beta);
    let mut flags = SqdFlags::default();
    let mut trace = Vec::new();
    let mut per_batch = Vec::new();

    let batch_seed = |it: usize| derive_seed(cfg.seed, 2 * it as u64);
    let recovery_seed = |it: usize| derive_seed(cfg.seed, 2 * it as u64 + 1);

    let mut occ;
    let mut last: Option<(BatchSolve, Vec<Vec<Determinant>>)> = None;
    if valid.is_empty() {
        if invalid.is_empty() {
            return Err(Error::Unrecoverable);
        }
        flags.hf_prior = true;
        occ = OccupationVector::of_determinant(reference, n);
        per_batch.push(Vec::new());
        trace.push(SqdIteration {
            iteration: 0,
            batch_energies: Vec::new(),
            batch_dims: Vec::new(),
            occupation_delta: None,
        });
    } else {
        let b = make_batches(&valid, cfg, Some(reference), batch_seed(0))?;
        flags.undersized_batches |= b.undersized;
        let s = solve_batches(heff, &b.batches, cfg.davidson_tol)?;
        occ = s.occ.clone();
        per_batch.push(s.energies.clone());
        trace.push(SqdIteration {
            iteration: 0,
            batch_energies: s.energies.clone(),
            batch_dims: s.dims.clone(),
            occupation_delta: None,
        });
        last = Some((s, b.batches));
    }

    let mut converged = false;
    let mut n_outer = 0;
    for it in 1..=cfg.max_outer_iter {
        n_outer = it;
        let rec = recover_configurations(
            &invalid,
            &occ,
            n,
            n_alpha,
            n_beta,
            cfg.delta,
            recovery_seed(it),
        );
        flags.uniform_fallbacks += rec.uniform_fallbacks;
        flags.degenerate_filling |= rec.degenerate_filling;
        let mut pool = valid.clone();
        for (d, c) in rec.dets {
            *pool.entry(d).or_default() += c;
        }
        let mut b = make_batches(&pool, cfg, Some(reference), batch_seed(it))?;
        flags.undersized_batches |= b.undersized;
        if cfg.cumulative {
            if let Some((_, prev)) = &last {
                for (batch, old) in b.batches.iter_mut().zip(prev) {
                    let union: BTreeSet<Determinant> = batch.iter().chain(old).copied().collect();
                    *batch = union.into_iter().collect();
                }
            }
        }
        let s = solve_batches(heff, &b.batches, cfg.davidson_tol)?;
        let delta = s.occ.max_abs_diff(&occ);
        occ = s.occ.clone();
        per_batch.push(s.energies.clone());
        trace.push(SqdIteration {
            iteration: it,
            batch_energies: s.energies.clone(),
            batch_dims: s.dims.clone(),
            occupation_delta: Some(delta),
        });
        log::debug!(
            "sqd iteration {it}: min E = {:.10}, max|dn| = {delta:.2e}",
            s.energies.iter().copied().fold(f64::INFINITY, f64::min)
        );
        last = Some((s, b.batches));
        if delta < cfg.occ_tol {
            converged = true;
            break;
        }
    }

    let (s, _) = last.ok_or(Error::Unrecoverable)?;
    let best = (0..s.energies.len())
        .min_by(|&a, &b| s.energies[a].total_cmp(&s.energies[b]))
        .expect("k_batches >= 1");
    Ok(SqdResult {
        energy: s.energies[best],
        per_batch_energies: per_batch,
        final_occupations: occ,
        subspace_dim: s.dims[best],
        n_outer,
        converged,
        trace,
        flags,
    })
}
