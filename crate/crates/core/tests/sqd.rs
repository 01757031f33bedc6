mod common;

use std::collections::BTreeMap;

use common::{fixture, reference_value};
use obdf_sqd::ci::{
    enumerate_sector, fci_ground, slater_condon, solve_subspace, DavidsonOptions, Determinant,
    HamiltonianRef,
};
use obdf_sqd::downfold::{build_cas_hamiltonian, select_active, EffectiveHamiltonian};
use obdf_sqd::pipeline::{hf_canonical, sample_active, AmplitudeSource, SamplerKind, SamplerSpec};
use obdf_sqd::sampler::{apply_noise, sample_exact, NoiseModel, SampleSet};
use obdf_sqd::sqd::{
    filter_valid, make_batches, recover_configurations, relu_weight, sqd_solve, OccupationVector,
    SqdConfig,
};
use obdf_sqd::Error;
use proptest::prelude::*;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn full_space(name: &str) -> EffectiveHamiltonian {
    let ints = fixture(name);
    let part = select_active(&ints, ints.n_orb, ints.n_elec).unwrap();
    build_cas_hamiltonian(&ints, &part).unwrap()
}

fn three_sigma(count: u64, n: u64, p: f64) -> bool {
    let n = n as f64;
    let sigma = (n * p * (1.0 - p)).sqrt();
    (count as f64 - n * p).abs() <= 3.0 * sigma
}

proptest! {
    #[test]
    fn relu_endpoints_and_monotone(h in 0.001f64..0.999, delta in 0.001f64..0.999) {
        prop_assert_eq!(relu_weight(0.0, h, delta), 0.0);
        prop_assert!((relu_weight(h, h, delta) - delta).abs() < 1e-15);
        prop_assert!((relu_weight(1.0, h, delta) - 1.0).abs() < 1e-15);
        let mut prev = f64::NEG_INFINITY;
        for k in 0..=1000 {
            let w = relu_weight(k as f64 / 1000.0, h, delta);
            prop_assert!(w >= prev - 1e-15);
            prop_assert!((0.0..=1.0 + 1e-15).contains(&w));
            prev = w;
        }
    }

    #[test]
    fn recovery_restores_hamming_weights(
        strings in prop::collection::vec(0u64..1 << 12, 1..40),
        occ in prop::collection::vec(0.0f64..1.0, 12),
        n_alpha in 0usize..=6,
        n_beta in 0usize..=6,
        seed in any::<u64>(),
    ) {
        let mut invalid = BTreeMap::new();
        for x in strings {
            *invalid.entry(x).or_insert(0u64) += 1;
        }
        let total: u64 = invalid.values().sum();
        let rec = recover_configurations(&invalid, &OccupationVector::new(occ), 6, n_alpha, n_beta, 0.01, seed);
        prop_assert_eq!(rec.dets.values().sum::<u64>(), total);
        for d in rec.dets.keys() {
            prop_assert_eq!((d.n_alpha(), d.n_beta()), (n_alpha, n_beta));
        }
    }

    #[test]
    fn larger_subspace_never_raises_the_energy(seed in any::<u64>(), small in 2usize..30, extra in 1usize..30) {
        let heff = full_space("h4_chain_sto3g_r0.70");
        let mut dets = enumerate_sector(4, 2, 2).unwrap().dets;
        dets.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let opts = DavidsonOptions::default();
        let big = (small + extra).min(dets.len());
        let (e_small, _) = solve_subspace(&dets[..small], (&heff).into(), &opts).unwrap();
        let (e_big, _) = solve_subspace(&dets[..big], (&heff).into(), &opts).unwrap();
        prop_assert!(e_big <= e_small + 1e-10, "{} > {}", e_big, e_small);
    }
}

#[test]
fn random_subspaces_are_variational() {
    let heff = full_space("h4_chain_631g_r0.80");
    let e_fci = reference_value("h4_chain_631g_r0.80", "e_fci");
    let dets = enumerate_sector(8, 2, 2).unwrap().dets;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let opts = DavidsonOptions::default();
    for _ in 0..1000 {
        let d = rng.random_range(1..=60);
        let pick: Vec<Determinant> = dets.choose_multiple(&mut rng, d).copied().collect();
        let (e, _) = solve_subspace(&pick, (&heff).into(), &opts).unwrap();
        assert!(e >= e_fci - 1e-10, "{e} below FCI {e_fci}");
    }
}

#[test]
fn flip_frequencies_follow_normalized_weights() {
    // Alpha holds three electrons where two belong; one of orbitals 0, 1, 2 is flipped.
    let n_orb = 4;
    let occ = OccupationVector::new(vec![0.9, 0.6, 0.2, 0.3, 1.0, 1.0, 0.0, 0.0]);
    let x = Determinant::new(0b0111, 0b0011).to_bitstring(n_orb);
    let reps = 100_000u64;
    let invalid = BTreeMap::from([(x, reps)]);
    let rec = recover_configurations(&invalid, &occ, n_orb, 2, 2, 0.01, 11);
    let h = 0.5;
    let w: Vec<f64> = [0.9, 0.6, 0.2]
        .iter()
        .map(|n: &f64| relu_weight(1.0 - n, h, 0.01))
        .collect();
    let total: f64 = w.iter().sum();
    for (p, wp) in w.iter().enumerate() {
        let det = Determinant::new(0b0111 ^ (1 << p), 0b0011);
        let count = rec.dets.get(&det).copied().unwrap_or(0);
        assert!(
            three_sigma(count, reps, wp / total),
            "orbital {p}: {count} of {reps}, p = {}",
            wp / total
        );
    }
    assert_eq!(rec.dets.values().sum::<u64>(), reps);
}

#[test]
fn batches_weight_by_multiplicity() {
    let a = Determinant::new(0b01, 0b01);
    let b = Determinant::new(0b10, 0b01);
    let pool = BTreeMap::from([(a, 9u64), (b, 1u64)]);
    let cfg = SqdConfig {
        k_batches: 10_000,
        batch_size: 1,
        ..Default::default()
    };
    let batches = make_batches(&pool, &cfg, None, 5).unwrap();
    let hits = batches
        .batches
        .iter()
        .filter(|batch| batch == &&vec![a])
        .count() as u64;
    assert!(three_sigma(hits, 10_000, 0.9), "{hits}");
}

#[test]
fn batch_contracts() {
    let dets = enumerate_sector(4, 2, 2).unwrap().dets;
    let pool: BTreeMap<Determinant, u64> = dets.iter().take(10).map(|&d| (d, 3)).collect();
    let whole = make_batches(
        &pool,
        &SqdConfig {
            k_batches: 1,
            batch_size: 10,
            ..Default::default()
        },
        None,
        1,
    )
    .unwrap();
    assert_eq!(whole.batches[0], pool.keys().copied().collect::<Vec<_>>());
    assert!(!whole.undersized);

    let cfg = SqdConfig {
        k_batches: 3,
        batch_size: 4,
        include_reference: true,
        ..Default::default()
    };
    let hf = Determinant::hartree_fock(2, 2);
    let one = make_batches(&pool, &cfg, Some(hf), 9).unwrap();
    assert_eq!(one, make_batches(&pool, &cfg, Some(hf), 9).unwrap());
    for batch in &one.batches {
        assert_eq!(batch.len(), 4);
        assert!(batch.contains(&hf));
    }

    let small = make_batches(
        &pool,
        &SqdConfig {
            batch_size: 20,
            ..Default::default()
        },
        None,
        1,
    )
    .unwrap();
    assert!(small.undersized);
    assert!(small.batches.iter().all(|b| b.len() == 10));
}

#[test]
fn complements_of_valid_strings_are_valid_only_at_half_filling() {
    let n_orb = 4;
    for n_alpha in 0..=n_orb {
        for n_beta in 0..=n_orb {
            for d in enumerate_sector(n_orb, n_alpha, n_beta).unwrap().dets {
                let x = d.to_bitstring(n_orb);
                let clean = SampleSet::from_shots(n_orb, [x]);
                let (valid, _) = filter_valid(&clean, n_orb, n_alpha, n_beta).unwrap();
                assert_eq!(valid.values().sum::<u64>(), 1);
                let flipped = apply_noise(&clean, &NoiseModel::new(1.0, 0).unwrap());
                assert_eq!(flipped.expand(), vec![!x & ((1 << (2 * n_orb)) - 1)]);
                let (valid, invalid) = filter_valid(&flipped, n_orb, n_alpha, n_beta).unwrap();
                let half = 2 * n_alpha == n_orb && 2 * n_beta == n_orb;
                assert_eq!(valid.len() == 1, half, "{n_alpha} {n_beta} {x:b}");
                assert_eq!(valid.len() + invalid.len(), 1);
            }
        }
    }
}

#[test]
fn filter_rejects_wrong_width_and_splits_by_weight() {
    let s = SampleSet::from_shots(3, [0b011_011, 0b011_111, 0b011_011]);
    let (valid, invalid) = filter_valid(&s, 3, 2, 2).unwrap();
    assert_eq!(valid.values().sum::<u64>(), 2);
    assert_eq!(
        invalid.into_iter().collect::<Vec<_>>(),
        vec![(0b011_111, 1)]
    );
    assert!(matches!(
        filter_valid(&s, 2, 1, 1),
        Err(Error::Width { .. })
    ));
}

/// Exact-sampler subspaces that cover every determinant of non-negligible
/// weight. Full-space H4 is left out: two of its FCI weights are ~1e-8 and
/// would need ~1e10 shots to show up.
fn covered_hamiltonians() -> Vec<(&'static str, EffectiveHamiltonian)> {
    let h4 = fixture("h4_chain_sto3g_r0.70");
    let (canon, _) = hf_canonical(&h4).unwrap();
    let cas = build_cas_hamiltonian(&canon, &select_active(&canon, 2, 2).unwrap()).unwrap();
    vec![
        ("h2_631g3_r0.74", full_space("h2_631g3_r0.74")),
        ("h4 cas(2,2)", cas),
    ]
}

#[test]
fn full_sector_exact_samples_reproduce_fci() {
    for (name, heff) in covered_hamiltonians() {
        let (e_fci, psi) = fci_ground(&heff, heff.n_alpha, heff.n_beta).unwrap();
        let samples = sample_exact(&psi, 1_000_000, 3);
        let dim = enumerate_sector(heff.n_act, heff.n_alpha, heff.n_beta)
            .unwrap()
            .len();
        let cfg = SqdConfig {
            k_batches: 1,
            batch_size: dim,
            ..Default::default()
        };
        let res = sqd_solve(&heff, &samples, heff.n_alpha, heff.n_beta, &cfg).unwrap();
        assert!(
            (res.energy - e_fci).abs() < 1e-10,
            "{name}: {:.3e}",
            res.energy - e_fci
        );
        assert!(res.converged);
        assert_eq!(res.n_outer, 1);
    }
}

#[test]
fn hartree_fock_samples_give_the_reference_energy() {
    let heff = full_space("h4_chain_sto3g_r0.70");
    let hf = Determinant::hartree_fock(2, 2);
    let samples = SampleSet::from_shots(4, std::iter::repeat_n(hf.to_bitstring(4), 100));
    let res = sqd_solve(&heff, &samples, 2, 2, &SqdConfig::default()).unwrap();
    let expect = slater_condon(hf, hf, HamiltonianRef::from(&heff));
    assert!((res.energy - expect).abs() < 1e-12);
    assert_eq!(res.subspace_dim, 1);
}

fn noisy_h4_samples(seed: u64) -> (EffectiveHamiltonian, SampleSet) {
    let heff = full_space("h4_chain_sto3g_r0.70");
    let spec = SamplerSpec {
        kind: SamplerKind::Ucj {
            n_modes: 2,
            amplitudes: AmplitudeSource::Mp2,
        },
        shots: 2000,
        p_flip: 0.05,
        seed,
    };
    let (samples, _) = sample_active(&heff, &spec).unwrap();
    (heff, samples)
}

#[test]
fn every_batch_energy_is_variational_and_recovered_sets_are_physical() {
    let (heff, samples) = noisy_h4_samples(1);
    let e_fci = fci_ground(&heff, 2, 2).unwrap().0;
    let cfg = SqdConfig {
        k_batches: 4,
        batch_size: 12,
        ..Default::default()
    };
    let res = sqd_solve(&heff, &samples, 2, 2, &cfg).unwrap();
    for energies in &res.per_batch_energies {
        assert!(energies.iter().all(|&e| e >= e_fci - 1e-10));
    }
    let last = res.per_batch_energies.last().unwrap();
    assert_eq!(
        res.energy,
        last.iter().copied().fold(f64::INFINITY, f64::min)
    );
    let n: f64 = res.final_occupations.0.iter().sum();
    assert!((n - 4.0).abs() < 1e-8);
}

#[test]
fn cumulative_best_energy_never_rises() {
    let (heff, samples) = noisy_h4_samples(2);
    let cfg = SqdConfig {
        k_batches: 3,
        batch_size: 6,
        cumulative: true,
        occ_tol: 0.0,
        ..Default::default()
    };
    let res = sqd_solve(&heff, &samples, 2, 2, &cfg).unwrap();
    assert_eq!(res.per_batch_energies.len(), cfg.max_outer_iter + 1);
    let best: Vec<f64> = res
        .per_batch_energies
        .iter()
        .map(|e| e.iter().copied().fold(f64::INFINITY, f64::min))
        .collect();
    for w in best.windows(2) {
        assert!(w[1] <= w[0] + 1e-12, "{best:?}");
    }
}

#[test]
fn no_samples_is_unrecoverable() {
    let heff = full_space("h2_sto3g_r0.74");
    let res = sqd_solve(&heff, &SampleSet::new(2), 1, 1, &SqdConfig::default());
    assert!(matches!(res, Err(Error::Unrecoverable)));
}

#[test]
fn only_invalid_samples_fall_back_to_the_hartree_fock_prior() {
    let heff = full_space("h4_chain_sto3g_r0.70");
    let samples = SampleSet::from_shots(4, [0b0111_0011, 0b0011_0001, 0b1011_0111]);
    let res = sqd_solve(&heff, &samples, 2, 2, &SqdConfig::default()).unwrap();
    assert!(res.flags.hf_prior);
    assert!(res.per_batch_energies[0].is_empty());
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let (heff, samples) = noisy_h4_samples(3);
    let cfg = SqdConfig {
        k_batches: 5,
        batch_size: 10,
        seed: 17,
        ..Default::default()
    };
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        pool.install(|| sqd_solve(&heff, &samples, 2, 2, &cfg).unwrap())
    };
    let one = run(1);
    let four = run(4);
    assert_eq!(one, four);
    assert_eq!(one.energy.to_bits(), four.energy.to_bits());
}
