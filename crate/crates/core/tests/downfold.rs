mod common;

use common::{fixture, random_integrals};
use fock_oracle::{closed_shell_reference, fci_energy, lowest_eigenpair, restrict, FockSpace};
use obdf_sqd::ci::fci_ground;
use obdf_sqd::downfold::{
    build_cas_hamiltonian, build_obdf_hamiltonian, external_amplitudes, external_correction,
    external_potential, select_active, ActivePartition, HamiltonianKind,
};
use obdf_sqd::integrals::{build_fock, closed_shell_occupations, IntegralSet};
use obdf_sqd::obmp2::{mp2_amplitudes, obmp2_scf, Amplitudes, DoubleCommutator};
use obdf_sqd::pipeline::hf_canonical;
use obdf_sqd::Error;

fn canonical_amplitudes(ints: &IntegralSet) -> Amplitudes {
    let occ = closed_shell_occupations(ints).unwrap();
    let f = build_fock(ints, &occ).unwrap().f;
    let eps: Vec<f64> = (0..ints.n_orb).map(|p| f[[p, p]]).collect();
    let n_occ = ints.n_elec / 2;
    mp2_amplitudes(
        &eps,
        ints,
        &(0..n_occ).collect::<Vec<_>>(),
        &(n_occ..ints.n_orb).collect::<Vec<_>>(),
    )
    .unwrap()
}

#[test]
fn full_space_downfolding_is_the_identity() {
    let r = obmp2_scf(&fixture("h4_chain_sto3g_r0.70"), 50, 1e-9).unwrap();
    let ints = &r.integrals;
    let part = select_active(ints, 4, 4).unwrap();
    assert!(part.is_full_space());
    let t = r.amplitudes(0.0).unwrap();
    assert!(external_amplitudes(&t, &part).is_zero());
    assert!(external_potential(ints, &t, &part)
        .unwrap()
        .iter()
        .all(|&v| v == 0.0));
    let cas = build_cas_hamiltonian(ints, &part).unwrap();
    let obdf = build_obdf_hamiltonian(ints, &t, &part).unwrap();
    assert_eq!(cas.h_eff, ints.h);
    assert_eq!(cas.g_act, ints.g);
    assert_eq!(cas.e_scalar, ints.e_core);
    assert_eq!(obdf.h_eff, cas.h_eff);
    assert_eq!(obdf.g_act, cas.g_act);
    assert_eq!(obdf.e_scalar, cas.e_scalar);
    assert_eq!(obdf.label, HamiltonianKind::Obdf);
}

#[test]
fn full_space_cas_reproduces_parent_fci() {
    for name in [
        "h2_631g3_r0.74",
        "h4_chain_sto3g_r0.70",
        "h6_chain_sto3g_r0.90",
    ] {
        let ints = fixture(name);
        let part = select_active(&ints, ints.n_orb, ints.n_elec).unwrap();
        let cas = build_cas_hamiltonian(&ints, &part).unwrap();
        let e = fci_ground(&cas, cas.n_alpha, cas.n_beta).unwrap().0;
        let want = fci_ground(&ints, ints.n_alpha(), ints.n_beta()).unwrap().0;
        assert!((e - want).abs() < 1e-10, "{name}");
    }
}

#[test]
fn frozen_core_scalar_is_core_determinant_energy() {
    let ints = fixture("h4_chain_sto3g_r0.70");
    let part = ActivePartition::from_lists(&ints, vec![0], vec![1, 2]).unwrap();
    let cas = build_cas_hamiltonian(&ints, &part).unwrap();
    let space = FockSpace::new(8);
    let h = space.hamiltonian(&ints.h, &ints.g, ints.e_core);
    let core_only = closed_shell_reference(4, 1) as usize;
    assert!((cas.e_scalar - h[(core_only, core_only)]).abs() < 1e-12);
}

#[test]
fn frozen_core_cas_matches_restricted_dense_diagonalization() {
    // Determinants with orbital 0 doubly occupied and orbital 3 empty.
    let ints = fixture("h4_chain_sto3g_r0.70");
    let part = ActivePartition::from_lists(&ints, vec![0], vec![1, 2]).unwrap();
    let cas = build_cas_hamiltonian(&ints, &part).unwrap();
    let e = fci_ground(&cas, 1, 1).unwrap().0;
    let states: Vec<u64> = fock_oracle::sector_states(4, 2, 2)
        .into_iter()
        .filter(|s| s & 0b1 != 0 && s & 0b1_0000 != 0 && s & 0b1000 == 0 && s & 0b1000_0000 == 0)
        .collect();
    assert_eq!(states.len(), 4);
    let h = FockSpace::new(8).hamiltonian(&ints.h, &ints.g, ints.e_core);
    let (want, _) = lowest_eigenpair(&restrict(&h, &states));
    assert!((e - want).abs() < 1e-10, "{e} vs {want}");
}

/// External potential and scalar from dense operators with masked amplitudes.
fn dense_external(
    ints: &IntegralSet,
    t: &Amplitudes,
    part: &ActivePartition,
) -> (ndarray::Array2<f64>, f64) {
    let n = ints.n_orb;
    let ext = external_amplitudes(t, part);
    let occ = closed_shell_occupations(ints).unwrap();
    let fock = build_fock(ints, &occ).unwrap();
    let space = FockSpace::new(2 * n);
    let h = space.hamiltonian(&ints.h, &ints.g, ints.e_core);
    let f = space.one_body(&fock.f);
    let big_t = space.singlet_doubles(&ext.t, &ext.occ_list, &ext.virt_list);
    let a = &big_t - big_t.transpose();
    let comm = |x: &nalgebra::DMatrix<f64>, y: &nalgebra::DMatrix<f64>| x * y - y * x;
    let x = &h + comm(&h, &a) + comm(&comm(&f, &a), &a) * 0.5;
    let (x0, x1) = space.one_body_reduction(&x, closed_shell_reference(n, ints.n_elec / 2));
    let m = part.active.len();
    let v = ndarray::Array2::from_shape_fn((m, m), |(u, w)| {
        let (p, q) = (part.active[u], part.active[w]);
        x1[(p, q)] - fock.f[[p, q]]
    });
    let occupied: f64 = part
        .active
        .iter()
        .enumerate()
        .map(|(u, &p)| occ[p] * v[[u, u]])
        .sum();
    (v, x0 - fock.e_hf - occupied)
}

#[test]
fn external_correction_matches_dense_masked_transformation() {
    let h2 = fixture("h2_631g3_r0.74");
    let (h2, _) = hf_canonical(&h2).unwrap();
    let rnd = random_integrals(3, 4, 17);
    let cases = [
        (h2.clone(), vec![], vec![0, 1]),
        (h2.clone(), vec![], vec![0, 2]),
        (h2, vec![], vec![0]),
        (rnd.clone(), vec![0], vec![1, 2]),
        (rnd, vec![], vec![1, 2]),
    ];
    for (ints, core, active) in cases {
        let part = ActivePartition::from_lists(&ints, core, active).unwrap();
        let t = canonical_amplitudes(&ints);
        let corr = external_correction(&ints, &t, &part, DoubleCommutator::Fock).unwrap();
        let (v, scalar) = dense_external(&ints, &t, &part);
        for ((u, w), &x) in corr.v_act.indexed_iter() {
            assert!(
                (x - v[[u, w]]).abs() < 1e-11,
                "{part:?} ({u},{w}): {x} vs {}",
                v[[u, w]]
            );
            assert!((x - corr.v_act[[w, u]]).abs() < 1e-12);
        }
        assert!((corr.scalar - scalar).abs() < 1e-11, "{part:?}");
    }
}

#[test]
fn obdf_only_touches_the_one_body_part() {
    let r = obmp2_scf(&fixture("h4_chain_631g_r0.80"), 50, 1e-9).unwrap();
    let t = r.amplitudes(0.0).unwrap();
    for (n_act, n_act_elec) in [(2, 2), (4, 4), (6, 4), (4, 2)] {
        let part = select_active(&r.integrals, n_act, n_act_elec).unwrap();
        let cas = build_cas_hamiltonian(&r.integrals, &part).unwrap();
        let obdf = build_obdf_hamiltonian(&r.integrals, &t, &part).unwrap();
        assert_eq!(obdf.g_act, cas.g_act);
        assert!(obdf.h_eff != cas.h_eff);
        for ((u, w), &x) in obdf.h_eff.indexed_iter() {
            assert!((x - obdf.h_eff[[w, u]]).abs() < 1e-10);
        }
    }
}

#[test]
fn downfolding_moves_small_active_spaces_toward_fci() {
    for (name, n_act, n_act_elec) in [
        ("h4_chain_sto3g_r0.70", 2, 2),
        ("h4_chain_631g_r0.80", 4, 4),
        ("h6_chain_sto3g_r0.90", 4, 4),
    ] {
        let ints = fixture(name);
        let fci = fci_ground(&ints, ints.n_alpha(), ints.n_beta()).unwrap().0;
        let (canon, _) = hf_canonical(&ints).unwrap();
        let cas = build_cas_hamiltonian(&canon, &select_active(&canon, n_act, n_act_elec).unwrap())
            .unwrap();
        let r = obmp2_scf(&ints, 50, 1e-9).unwrap();
        let part = select_active(&r.integrals, n_act, n_act_elec).unwrap();
        let obdf =
            build_obdf_hamiltonian(&r.integrals, &r.amplitudes(0.0).unwrap(), &part).unwrap();
        let e_cas = fci_ground(&cas, cas.n_alpha, cas.n_beta).unwrap().0;
        let e_obdf = fci_ground(&obdf, obdf.n_alpha, obdf.n_beta).unwrap().0;
        assert!(
            (e_obdf - fci).abs() < (e_cas - fci).abs(),
            "{name}: obdf {e_obdf}, cas {e_cas}, fci {fci}"
        );
    }
}

#[test]
fn active_selection_rules() {
    let h6 = fixture("h6_chain_631g_r1.00");
    let part = select_active(&h6, 6, 6).unwrap();
    assert!(part.core.is_empty());
    assert_eq!(part.active, (0..6).collect::<Vec<_>>());
    assert_eq!(part.virtual_ext, (6..12).collect::<Vec<_>>());
    assert_eq!(part.n_act_elec, 6);
    let part = select_active(&h6, 4, 2).unwrap();
    assert_eq!(part.core, vec![0, 1]);
    assert_eq!(part.active, vec![2, 3, 4, 5]);
    assert!(matches!(
        select_active(&h6, 2, 6),
        Err(Error::InfeasibleActive(_))
    ));
    assert!(matches!(
        select_active(&h6, 13, 6),
        Err(Error::InfeasibleActive(_))
    ));
    assert!(ActivePartition::from_lists(&h6, vec![0], vec![0, 1]).is_err());
}

#[test]
fn effective_hamiltonian_fcidump_round_trip() {
    let ints = fixture("h4_chain_sto3g_r0.70");
    let part = ActivePartition::from_lists(&ints, vec![0], vec![1, 2]).unwrap();
    let cas = build_cas_hamiltonian(&ints, &part).unwrap();
    let back = obdf_sqd::integrals::parse_fcidump(&cas.to_fcidump()).unwrap();
    assert_eq!(back.n_orb, 2);
    assert_eq!(back.n_elec, 2);
    assert!((back.e_core - cas.e_scalar).abs() < 1e-13);
    let e1 = fci_energy(&back.h, &back.g, back.e_core, 1, 1);
    let e2 = fci_ground(&cas, 1, 1).unwrap().0;
    assert!((e1 - e2).abs() < 1e-10);
}
