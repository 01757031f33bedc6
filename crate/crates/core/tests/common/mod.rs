#![allow(dead_code)]

use std::path::PathBuf;

use ndarray::{Array2, Array4};
use obdf_sqd::integrals::{read_fcidump, IntegralSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn fixture(name: &str) -> IntegralSet {
    read_fcidump(fixture_dir().join(format!("{name}.fcidump"))).expect("fixture parses")
}

/// Every shipped fixture name, relative to the fixture directory.
pub fn all_fixtures() -> Vec<String> {
    let mut out = Vec::new();
    for sub in ["", "scan/"] {
        for entry in std::fs::read_dir(fixture_dir().join(sub)).unwrap() {
            let path = entry.unwrap().path();
            if path.extension().is_some_and(|e| e == "fcidump") {
                out.push(format!(
                    "{sub}{}",
                    path.file_stem().unwrap().to_string_lossy()
                ));
            }
        }
    }
    out.sort();
    out
}

pub fn reference() -> serde_json::Value {
    let text = std::fs::read_to_string(fixture_dir().join("reference.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

pub fn reference_value(name: &str, key: &str) -> f64 {
    reference()[name][key]
        .as_f64()
        .unwrap_or_else(|| panic!("{name}/{key} missing"))
}

/// Random integrals with the full 8-fold symmetry and a gapped diagonal.
pub fn random_integrals(n: usize, n_elec: usize, seed: u64) -> IntegralSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut h = Array2::zeros((n, n));
    for p in 0..n {
        for q in 0..=p {
            let v = if p == q {
                -2.0 + 0.7 * p as f64
            } else {
                rng.random_range(-0.2..0.2)
            };
            h[[p, q]] = v;
            h[[q, p]] = v;
        }
    }
    let mut g = Array4::zeros((n, n, n, n));
    for p in 0..n {
        for q in 0..=p {
            for r in 0..n {
                for s in 0..=r {
                    if p * (p + 1) / 2 + q < r * (r + 1) / 2 + s {
                        continue;
                    }
                    let mut v = rng.random_range(-0.04..0.04);
                    if p == q && r == s {
                        v += 0.5;
                    }
                    for [a, b, c, d] in [
                        [p, q, r, s],
                        [q, p, r, s],
                        [p, q, s, r],
                        [q, p, s, r],
                        [r, s, p, q],
                        [s, r, p, q],
                        [r, s, q, p],
                        [s, r, q, p],
                    ] {
                        g[[a, b, c, d]] = v;
                    }
                }
            }
        }
    }
    IntegralSet::new(h, g, 0.5, n_elec, 0).unwrap()
}

/// Random orthogonal matrix from the QR factor of a Gaussian-ish matrix.
pub fn random_orthogonal(n: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = nalgebra::DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let q = m.qr().q();
    Array2::from_shape_fn((n, n), |(i, j)| q[(i, j)])
}
