mod common;

use std::path::Path;

use common::{config, fixture, H4_SCAN};
use obdf_sqd::pipeline::{ActiveSpec, Method};
use obdf_sqd_cli::point::Fixed10;
use obdf_sqd_cli::scan::{run_scan, write_outputs, ERRORS_CSV, META_JSON, SCAN_CSV};
use obdf_sqd_cli::{CliError, RunConfig};

fn scan_into(cfg: &RunConfig, dir: &Path) {
    let points = run_scan(cfg).unwrap();
    write_outputs(cfg, &points, dir).unwrap();
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

fn rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn reference_fci(name: &str) -> f64 {
    let path = fixture("h2_sto3g_r0.74")
        .parent()
        .unwrap()
        .join("reference.json");
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    v[format!("scan/{name}")]["e_fci"].as_f64().unwrap()
}

fn all_methods_h4() -> RunConfig {
    let mut cfg = config(&H4_SCAN, &Method::ALL);
    cfg.active = ActiveSpec::Counts {
        n_act: 2,
        n_act_elec: 2,
    };
    cfg.seed = 5;
    cfg
}

#[test]
fn single_point_gives_one_data_row() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(&["h2_sto3g_r0.74"], &[Method::Hf, Method::Fci]);
    scan_into(&cfg, dir.path());
    let scan = rows(&read(dir.path(), SCAN_CSV));
    assert_eq!(scan.len(), 2);
    assert_eq!(scan[0], ["label", "HF", "FCI", "HF_error"]);
    assert_eq!(scan[1][0], "0.74");
    let errs = rows(&read(dir.path(), ERRORS_CSV));
    assert_eq!(errs[0], ["label", "HF_error"]);
    assert_eq!(errs.len(), 2);
}

#[test]
fn h4_fci_column_rises_monotonically_to_the_plateau() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(&H4_SCAN, &[Method::Fci]);
    scan_into(&cfg, dir.path());
    let scan = rows(&read(dir.path(), SCAN_CSV));
    assert_eq!(scan.len(), 6);
    let fci: Vec<f64> = scan[1..].iter().map(|r| r[1].parse().unwrap()).collect();
    for (name, e) in H4_SCAN.iter().zip(&fci) {
        assert!((e - reference_fci(name)).abs() < 1e-9, "{name}: {e}");
    }
    assert!(fci.windows(2).all(|w| w[0] < w[1]), "{fci:?}");
    // Successive gaps shrink towards dissociation.
    let gaps: Vec<f64> = fci.windows(2).map(|w| w[1] - w[0]).collect();
    assert!(gaps.windows(2).all(|g| g[1] < g[0]), "{gaps:?}");
}

#[test]
fn error_columns_are_printed_differences() {
    let dir = tempfile::tempdir().unwrap();
    scan_into(&all_methods_h4(), dir.path());
    let scan = rows(&read(dir.path(), SCAN_CSV));
    let header = &scan[0];
    let col = |name: &str| header.iter().position(|h| h == name).unwrap();
    let mut checked = 0;
    for row in &scan[1..] {
        let fci = Fixed10::parse(&row[col("FCI")]).unwrap();
        for m in ["HF", "OBMP2", "CAS-SQD", "OBDF-SQD"] {
            let e = Fixed10::parse(&row[col(m)]).unwrap();
            let err = &row[col(&format!("{m}_error"))];
            assert_eq!(err, &(e - fci).to_string(), "{m} at {}", row[0]);
            checked += 1;
        }
    }
    assert_eq!(checked, 20);
    // scan_errors.csv repeats the error columns.
    let errs = rows(&read(dir.path(), ERRORS_CSV));
    for (a, b) in errs.iter().zip(&scan) {
        assert_eq!(a[0], b[0]);
        assert_eq!(a[1..], b[b.len() - 4..]);
    }
}

#[test]
fn rerun_and_meta_reexecution_are_byte_identical() {
    let cfg = all_methods_h4();
    let first = tempfile::tempdir().unwrap();
    let second = tempfile::tempdir().unwrap();
    scan_into(&cfg, first.path());
    scan_into(&cfg, second.path());
    for name in [SCAN_CSV, ERRORS_CSV, META_JSON] {
        assert_eq!(
            read(first.path(), name),
            read(second.path(), name),
            "{name}"
        );
    }

    let again = RunConfig::load(&first.path().join(META_JSON)).unwrap();
    assert_eq!(again, cfg);
    let third = tempfile::tempdir().unwrap();
    scan_into(&again, third.path());
    for name in [SCAN_CSV, ERRORS_CSV, META_JSON] {
        assert_eq!(read(first.path(), name), read(third.path(), name), "{name}");
    }
    let traces = std::fs::read_dir(first.path().join("traces"))
        .unwrap()
        .count();
    assert_eq!(traces, 10);
    for entry in std::fs::read_dir(first.path().join("traces")).unwrap() {
        let name = entry.unwrap().file_name();
        let a = std::fs::read(first.path().join("traces").join(&name)).unwrap();
        let b = std::fs::read(third.path().join("traces").join(&name)).unwrap();
        assert_eq!(a, b, "{name:?}");
    }
}

#[test]
fn meta_records_defaults_and_seeds() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = all_methods_h4();
    scan_into(&cfg, dir.path());
    let meta: serde_json::Value = serde_json::from_str(&read(dir.path(), META_JSON)).unwrap();
    assert_eq!(meta["energy_decimals"], 10);
    assert_eq!(meta["config"]["sqd"]["k_batches"], 5);
    assert_eq!(meta["config"]["sqd"]["delta"], 0.01);
    assert_eq!(meta["config"]["sampler"]["shots"], 10_000);
    let points = meta["points"].as_array().unwrap();
    assert_eq!(points.len(), 5);
    for (k, p) in points.iter().enumerate() {
        assert_eq!(p["sampler_seed"], cfg.point_config(k).sampler.seed);
        assert_eq!(p["sqd_seed"], cfg.point_config(k).sqd.seed);
        assert!(p["failures"].as_array().unwrap().is_empty());
    }
}

#[test]
fn failed_points_leave_empty_cells() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(&H4_SCAN[..2], &[Method::Hf, Method::Fci]);
    cfg.inputs[0].path = "missing.fcidump".into();
    scan_into(&cfg, dir.path());
    let scan = rows(&read(dir.path(), SCAN_CSV));
    assert_eq!(scan[1][1..], ["", "", ""]);
    assert!(scan[2][1..].iter().all(|c| !c.is_empty()));
}

#[test]
fn invalid_configs_are_rejected_before_running() {
    let mut cfg = config(&["h2_sto3g_r0.74"], &[]);
    assert!(matches!(run_scan(&cfg), Err(CliError::Config(_))));
    cfg.methods = vec![Method::Hf];
    cfg.inputs.clear();
    assert!(matches!(run_scan(&cfg), Err(CliError::Config(_))));

    let backwards = config(
        &["h4_chain_sto3g_r1.50", "h4_chain_sto3g_r1.00"],
        &[Method::Hf],
    );
    assert!(matches!(backwards.validate(), Err(CliError::Config(_))));
    let mut repeated = config(&["h4_chain_sto3g_r1.50", "h2_sto3g_r0.74"], &[Method::Hf]);
    repeated.inputs[1].label = obdf_sqd_cli::GeometryLabel("1.5".into());
    assert!(repeated.validate().is_err());
    let mut text = config(&["h4_chain_sto3g_r1.50", "h2_sto3g_r0.74"], &[Method::Hf]);
    text.inputs[0].label = obdf_sqd_cli::GeometryLabel("stretched".into());
    text.inputs[1].label = obdf_sqd_cli::GeometryLabel("compressed".into());
    assert!(text.validate().is_ok());
}
