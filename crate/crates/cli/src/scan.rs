//! Series of geometries and the files written for them.

use std::path::{Path, PathBuf};

use obdf_sqd::pipeline::Method;
use rayon::prelude::*;
use serde_json::json;

use crate::config::RunConfig;
use crate::error::{io_err, CliError, Result};
use crate::point::{run_point, PointOutput};

pub const SCAN_CSV: &str = "scan.csv";
pub const ERRORS_CSV: &str = "scan_errors.csv";
pub const META_JSON: &str = "run_meta.json";

/// Every point, in input order. Points run in parallel.
pub fn run_scan(cfg: &RunConfig) -> Result<Vec<PointOutput>> {
    cfg.validate()?;
    Ok(cfg
        .inputs
        .par_iter()
        .enumerate()
        .map(|(k, input)| run_point(cfg, input, k))
        .collect())
}

/// Requested methods in canonical order.
fn methods(cfg: &RunConfig) -> Vec<Method> {
    Method::ALL
        .into_iter()
        .filter(|m| cfg.methods.contains(m))
        .collect()
}

/// Methods that get an error column: everything but FCI, when FCI is requested.
fn error_methods(cfg: &RunConfig) -> Vec<Method> {
    if !cfg.methods.contains(&Method::Fci) {
        return Vec::new();
    }
    methods(cfg)
        .into_iter()
        .filter(|&m| m != Method::Fci)
        .collect()
}

pub fn error_column(m: Method) -> String {
    format!("{}_error", m.name())
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> CliError + '_ {
    move |e| CliError::Csv {
        path: path.to_path_buf(),
        msg: e.to_string(),
    }
}

fn cell(x: Option<impl ToString>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn write_csv(path: &Path, header: Vec<String>, rows: Vec<Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(&header).map_err(csv_err(path))?;
    for r in rows {
        w.write_record(&r).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

fn trace_name(p: &PointOutput, m: Method) -> String {
    let label: String = p
        .record
        .label
        .0
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '.' {
                c
            } else {
                '_'
            }
        })
        .collect();
    format!("{:03}_{label}_{}.jsonl", p.index, m.name())
}

/// Writes scan.csv, scan_errors.csv, run_meta.json and the traces into `dir`.
pub fn write_outputs(cfg: &RunConfig, points: &[PointOutput], dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let methods = methods(cfg);
    let err_methods = error_methods(cfg);
    let mut written = Vec::new();

    let scan_path = dir.join(SCAN_CSV);
    let mut header = vec!["label".to_string()];
    header.extend(methods.iter().map(|m| m.name().to_string()));
    header.extend(err_methods.iter().map(|&m| error_column(m)));
    let rows = points
        .iter()
        .map(|p| {
            let r = &p.record;
            let mut row = vec![r.label.0.clone()];
            row.extend(methods.iter().map(|m| cell(r.energies.get(m))));
            row.extend(err_methods.iter().map(|&m| cell(r.error(m))));
            row
        })
        .collect();
    write_csv(&scan_path, header, rows)?;
    written.push(scan_path);

    let err_path = dir.join(ERRORS_CSV);
    let mut header = vec!["label".to_string()];
    header.extend(err_methods.iter().map(|&m| error_column(m)));
    let rows = points
        .iter()
        .map(|p| {
            let mut row = vec![p.record.label.0.clone()];
            row.extend(err_methods.iter().map(|&m| cell(p.record.error(m))));
            row
        })
        .collect();
    write_csv(&err_path, header, rows)?;
    written.push(err_path);

    let mut trace_files = Vec::new();
    if cfg.traces {
        let tdir = dir.join("traces");
        std::fs::create_dir_all(&tdir).map_err(io_err(&tdir))?;
        for p in points {
            for (m, text) in &p.traces {
                let path = tdir.join(trace_name(p, *m));
                std::fs::write(&path, text).map_err(io_err(&path))?;
                trace_files.push(json!({ "label": p.record.label, "method": m, "file": format!("traces/{}", trace_name(p, *m)) }));
                written.push(path);
            }
        }
    }

    let meta = json!({
        "program": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "config": cfg,
        "energy_rule": "SQD energy = minimum over the final-iteration batch energies",
        "energy_decimals": 10,
        "points": points.iter().map(|p| json!({
            "index": p.index,
            "label": p.record.label,
            "path": p.input.path,
            "sampler_seed": p.sampler_seed,
            "sqd_seed": p.sqd_seed,
            "obmp2": p.record.obmp2,
            "sqd": p.record.sqd,
            "failures": p.record.failures,
        })).collect::<Vec<_>>(),
        "traces": trace_files,
    });
    let meta_path = dir.join(META_JSON);
    std::fs::write(
        &meta_path,
        serde_json::to_string_pretty(&meta).expect("serializable") + "\n",
    )
    .map_err(io_err(&meta_path))?;
    written.push(meta_path);
    Ok(written)
}
