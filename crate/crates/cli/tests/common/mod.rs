#![allow(dead_code)]

use std::path::PathBuf;

use obdf_sqd::pipeline::{ActiveSpec, Method, SamplerKind, SamplerSpec};
use obdf_sqd_cli::{InputSpec, RunConfig};

pub fn fixture(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures");
    let flat = dir.join(format!("{name}.fcidump"));
    if flat.exists() {
        flat
    } else {
        dir.join("scan").join(format!("{name}.fcidump"))
    }
}

pub fn config(names: &[&str], methods: &[Method]) -> RunConfig {
    RunConfig {
        inputs: names
            .iter()
            .map(|n| InputSpec::new(fixture(n), None))
            .collect(),
        methods: methods.to_vec(),
        ..Default::default()
    }
}

pub fn exact_full_space(mut cfg: RunConfig, shots: u64) -> RunConfig {
    cfg.active = ActiveSpec::Full;
    cfg.sampler = SamplerSpec {
        kind: SamplerKind::Exact,
        shots,
        p_flip: 0.0,
        seed: 0,
    };
    cfg.sqd.k_batches = 1;
    cfg.sqd.batch_size = 1000;
    cfg
}

pub const H4_SCAN: [&str; 5] = [
    "h4_chain_sto3g_r1.00",
    "h4_chain_sto3g_r1.50",
    "h4_chain_sto3g_r2.00",
    "h4_chain_sto3g_r2.50",
    "h4_chain_sto3g_r3.00",
];
