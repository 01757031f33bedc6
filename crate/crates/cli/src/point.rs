//! One geometry: run the requested methods and collect energies and metadata.

use std::collections::BTreeMap;
use std::fmt;

use obdf_sqd::integrals::read_fcidump;
use obdf_sqd::pipeline::{run_methods, Method, SqdRun};
use serde::Serialize;

use crate::config::{GeometryLabel, InputSpec, RunConfig};

/// Energy in units of 1e-10 Hartree, the printed precision. Differences of
/// these are exact, so a printed error is the difference of printed energies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Fixed10(pub i64);

impl Fixed10 {
    const SCALE: f64 = 1e10;

    pub fn from_hartree(e: f64) -> Self {
        // Round through the decimal formatter so this agrees with `{:.10}`.
        let s = format!("{e:.10}");
        Fixed10::parse(&s).expect("formatted float parses")
    }

    pub fn parse(s: &str) -> Option<Self> {
        let s = s.trim();
        let (neg, body) = match s.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, s),
        };
        let (int, frac) = body.split_once('.').unwrap_or((body, ""));
        if frac.len() > 10 || int.is_empty() {
            return None;
        }
        let frac = format!("{frac:0<10}");
        let v = int.parse::<i64>().ok()? * 10_000_000_000 + frac.parse::<i64>().ok()?;
        Some(Fixed10(if neg { -v } else { v }))
    }

    pub fn hartree(self) -> f64 {
        self.0 as f64 / Self::SCALE
    }
}

impl std::ops::Sub for Fixed10 {
    type Output = Fixed10;
    fn sub(self, o: Fixed10) -> Fixed10 {
        Fixed10(self.0 - o.0)
    }
}

impl fmt::Display for Fixed10 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let a = self.0.unsigned_abs();
        write!(f, "{sign}{}.{:010}", a / 10_000_000_000, a % 10_000_000_000)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SqdMeta {
    pub method: Method,
    pub subspace_dim: usize,
    pub batch_dims: Vec<usize>,
    pub n_outer: usize,
    pub converged: bool,
    pub ucj_modes: Option<usize>,
    pub n_active: usize,
    pub shots: u64,
    pub flags: obdf_sqd::sqd::SqdFlags,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Obmp2Meta {
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanRecord {
    pub label: GeometryLabel,
    pub energies: BTreeMap<Method, Fixed10>,
    pub sqd: Vec<SqdMeta>,
    pub obmp2: Option<Obmp2Meta>,
    /// `(stage, message)` for everything that failed at this point.
    pub failures: Vec<(String, String)>,
}

impl ScanRecord {
    /// `energy - E_FCI` when both are present.
    pub fn error(&self, m: Method) -> Option<Fixed10> {
        Some(*self.energies.get(&m)? - *self.energies.get(&Method::Fci)?)
    }
}

impl Serialize for Fixed10 {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_f64(self.hartree())
    }
}

#[derive(Debug, Clone)]
pub struct PointOutput {
    pub index: usize,
    pub input: InputSpec,
    pub sampler_seed: u64,
    pub sqd_seed: u64,
    pub record: ScanRecord,
    /// JSON-lines SQD traces per method.
    pub traces: Vec<(Method, String)>,
}

fn sqd_meta(m: Method, run: &SqdRun) -> SqdMeta {
    let r = &run.result;
    SqdMeta {
        method: m,
        subspace_dim: r.subspace_dim,
        batch_dims: r
            .trace
            .last()
            .map(|t| t.batch_dims.clone())
            .unwrap_or_default(),
        n_outer: r.n_outer,
        converged: r.converged,
        ucj_modes: run.ucj_modes,
        n_active: run.hamiltonian.n_act,
        shots: run.samples.shots,
        flags: r.flags.clone(),
    }
}

/// Failures are recorded in the record; the call itself never fails.
pub fn run_point(cfg: &RunConfig, input: &InputSpec, index: usize) -> PointOutput {
    let pc = cfg.point_config(index);
    let mut out = PointOutput {
        index,
        input: input.clone(),
        sampler_seed: pc.sampler.seed,
        sqd_seed: pc.sqd.seed,
        record: ScanRecord {
            label: input.label.clone(),
            energies: BTreeMap::new(),
            sqd: Vec::new(),
            obmp2: None,
            failures: Vec::new(),
        },
        traces: Vec::new(),
    };
    let ints = match read_fcidump(&input.path) {
        Ok(i) => i,
        Err(e) => {
            out.record.failures.push(("input".into(), e.to_string()));
            return out;
        }
    };
    let res = run_methods(&ints, &pc);
    for m in Method::ALL {
        if let Some(e) = res.energy(m) {
            out.record.energies.insert(m, Fixed10::from_hartree(e));
        }
    }
    for (m, msg) in res.errors() {
        log::warn!("{} at {}: {msg}", m.name(), input.label);
        out.record.failures.push((m.name().to_string(), msg));
    }
    if let Some(Ok(r)) = &res.obmp2 {
        out.record.obmp2 = Some(Obmp2Meta {
            iterations: r.n_iter,
            converged: r.converged,
        });
    }
    for (m, run) in [
        (Method::CasSqd, &res.cas_sqd),
        (Method::ObdfSqd, &res.obdf_sqd),
    ] {
        if let Some(Ok(run)) = run {
            out.record.sqd.push(sqd_meta(m, run));
            out.traces.push((m, run.result.trace_jsonl()));
        }
    }
    out
}
