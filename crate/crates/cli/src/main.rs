use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use obdf_sqd::ci::{fci_ground, sector_dimension};
use obdf_sqd::integrals::{parse_fcidump, read_fcidump, write_fcidump};
use obdf_sqd::obmp2::{obmp2_scf_with, DoubleCommutator};
use obdf_sqd::pipeline::{hf_canonical, ActiveSpec, AmplitudeSource, Method, SamplerKind};
use obdf_sqd_cli::error::{io_err, CliError, Result};
use obdf_sqd_cli::point::{run_point, Fixed10};
use obdf_sqd_cli::report::build_report;
use obdf_sqd_cli::scan::{run_scan, write_outputs};
use obdf_sqd_cli::{GeometryLabel, InputSpec, RunConfig};

#[derive(Parser)]
#[command(
    name = "obdf-sqd",
    version,
    about = "OBMP2 downfolding with sample-based quantum diagonalization"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the requested methods on one FCIDUMP.
    Run {
        fcidump: PathBuf,
        #[arg(long)]
        label: Option<String>,
        #[command(flatten)]
        opts: RunArgs,
    },
    /// Run every geometry of a series and write scan.csv, scan_errors.csv,
    /// run_meta.json and SQD traces.
    Scan {
        /// FCIDUMP files in geometry order (added to those of --config).
        fcidumps: Vec<PathBuf>,
        /// Labels for the positional files, comma separated.
        #[arg(long, value_delimiter = ',')]
        labels: Vec<String>,
        #[command(flatten)]
        opts: RunArgs,
    },
    /// Exact ground-state energy.
    Fci {
        fcidump: PathBuf,
        /// Defaults to the FCIDUMP electron count and spin.
        #[arg(long)]
        n_alpha: Option<usize>,
        #[arg(long)]
        n_beta: Option<usize>,
    },
    /// Self-consistent OBMP2.
    Obmp2 {
        fcidump: PathBuf,
        #[arg(long, default_value_t = 50)]
        max_iter: usize,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long, default_value_t = 0.0)]
        damping: f64,
        #[arg(long, default_value_t = 0.0)]
        level_shift: f64,
        #[arg(long, value_enum, default_value_t = Variant::Fock)]
        variant: Variant,
    },
    /// Comparison table and error summary of a scan directory.
    Report {
        dir: PathBuf,
        /// CSV with a label column and external reference energies.
        #[arg(long)]
        reference: Option<PathBuf>,
    },
    /// Parse an FCIDUMP and print what it contains.
    FcidumpCheck { fcidump: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum Variant {
    Fock,
    Hamiltonian,
}

#[derive(Clone, Copy, ValueEnum)]
enum SamplerArg {
    Exact,
    Ucj,
}

#[derive(Clone, Copy, ValueEnum)]
enum AmplitudeArg {
    Mp2,
    Ccd,
}

/// Configuration file and overrides shared by `run` and `scan`.
#[derive(Args)]
struct RunArgs {
    /// TOML or JSON configuration; a previous run_meta.json also works.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated subset of HF, OBMP2, FCI, CAS-SQD, OBDF-SQD.
    #[arg(long, value_delimiter = ',')]
    methods: Vec<Method>,
    #[arg(long, requires = "n_act_elec")]
    n_act: Option<usize>,
    #[arg(long, requires = "n_act")]
    n_act_elec: Option<usize>,
    /// Explicit core orbitals (with --active).
    #[arg(long, value_delimiter = ',', requires = "active")]
    core: Option<Vec<usize>>,
    /// Explicit active orbitals.
    #[arg(long, value_delimiter = ',')]
    active: Option<Vec<usize>>,
    #[arg(long, conflicts_with_all = ["n_act", "active"])]
    full_space: bool,
    #[arg(long, value_enum)]
    sampler: Option<SamplerArg>,
    #[arg(long)]
    ucj_modes: Option<usize>,
    #[arg(long, value_enum)]
    amplitudes: Option<AmplitudeArg>,
    /// Sample-set text file used instead of a simulated sampler.
    #[arg(long, conflicts_with = "sampler")]
    samples: Option<PathBuf>,
    #[arg(long)]
    shots: Option<u64>,
    #[arg(long)]
    p_flip: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    k_batches: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    max_outer_iter: Option<usize>,
    #[arg(long)]
    occ_tol: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    include_reference: bool,
    #[arg(long)]
    cumulative: bool,
    #[arg(long, value_enum)]
    variant: Option<Variant>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    no_traces: bool,
}

impl RunArgs {
    fn config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if !self.methods.is_empty() {
            cfg.methods = self.methods.clone();
        }
        if let (Some(n_act), Some(n_act_elec)) = (self.n_act, self.n_act_elec) {
            cfg.active = ActiveSpec::Counts { n_act, n_act_elec };
        }
        if let Some(active) = &self.active {
            cfg.active = ActiveSpec::Lists {
                core: self.core.clone().unwrap_or_default(),
                active: active.clone(),
            };
        }
        if self.full_space {
            cfg.active = ActiveSpec::Full;
        }
        let (modes, amps) = match &cfg.sampler.kind {
            SamplerKind::Ucj {
                n_modes,
                amplitudes,
            } => (*n_modes, *amplitudes),
            _ => (2, AmplitudeSource::Mp2),
        };
        let modes = self.ucj_modes.unwrap_or(modes);
        let amps = match self.amplitudes {
            Some(AmplitudeArg::Mp2) => AmplitudeSource::Mp2,
            Some(AmplitudeArg::Ccd) => AmplitudeSource::Ccd,
            None => amps,
        };
        match self.sampler {
            Some(SamplerArg::Exact) => cfg.sampler.kind = SamplerKind::Exact,
            Some(SamplerArg::Ucj) => {
                cfg.sampler.kind = SamplerKind::Ucj {
                    n_modes: modes,
                    amplitudes: amps,
                }
            }
            None => {
                if let SamplerKind::Ucj { .. } = cfg.sampler.kind {
                    cfg.sampler.kind = SamplerKind::Ucj {
                        n_modes: modes,
                        amplitudes: amps,
                    };
                }
            }
        }
        if let Some(path) = &self.samples {
            cfg.sampler.kind = SamplerKind::File {
                path: absolute(path)?,
            };
        }
        set(&mut cfg.sampler.shots, self.shots);
        set(&mut cfg.sampler.p_flip, self.p_flip);
        set(&mut cfg.seed, self.seed);
        set(&mut cfg.sqd.k_batches, self.k_batches);
        set(&mut cfg.sqd.batch_size, self.batch_size);
        set(&mut cfg.sqd.max_outer_iter, self.max_outer_iter);
        set(&mut cfg.sqd.occ_tol, self.occ_tol);
        set(&mut cfg.sqd.delta, self.delta);
        cfg.sqd.include_reference |= self.include_reference;
        cfg.sqd.cumulative |= self.cumulative;
        if let Some(v) = self.variant {
            cfg.obmp2.variant = variant(v);
        }
        if let Some(out) = &self.out {
            cfg.output_dir = out.clone();
        }
        if self.no_traces {
            cfg.traces = false;
        }
        Ok(cfg)
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn variant(v: Variant) -> DoubleCommutator {
    match v {
        Variant::Fock => DoubleCommutator::Fock,
        Variant::Hamiltonian => DoubleCommutator::Hamiltonian,
    }
}

fn absolute(p: &Path) -> Result<PathBuf> {
    std::path::absolute(p).map_err(io_err(p))
}

fn inputs(paths: &[PathBuf], labels: &[String]) -> Result<Vec<InputSpec>> {
    if !labels.is_empty() && labels.len() != paths.len() {
        return Err(CliError::Config(format!(
            "{} labels for {} files",
            labels.len(),
            paths.len()
        )));
    }
    paths
        .iter()
        .enumerate()
        .map(|(k, p)| {
            Ok(InputSpec::new(
                absolute(p)?,
                labels.get(k).map(|l| GeometryLabel(l.clone())),
            ))
        })
        .collect()
}

fn print_written(files: &[PathBuf]) {
    for f in files {
        println!("wrote {}", f.display());
    }
}

/// Text output plus permutational symmetrization on reading costs a few ulps.
const ROUND_TRIP_TOL: f64 = 1e-14;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            fcidump,
            label,
            opts,
        } => {
            let mut cfg = opts.config()?;
            cfg.inputs = inputs(&[fcidump], &label.into_iter().collect::<Vec<_>>())?;
            cfg.validate()?;
            let point = run_point(&cfg, &cfg.inputs[0], 0);
            let r = &point.record;
            for m in Method::ALL.into_iter().filter(|m| cfg.methods.contains(m)) {
                let e = r
                    .energies
                    .get(&m)
                    .map(|e| e.to_string())
                    .unwrap_or_else(|| "failed".into());
                let err = r
                    .error(m)
                    .filter(|_| m != Method::Fci)
                    .map(|d| format!("  error {d}"))
                    .unwrap_or_default();
                println!("{:<9} {e}{err}", m.name());
            }
            for (stage, msg) in &r.failures {
                eprintln!("{stage}: {msg}");
            }
            if opts.out.is_some() {
                print_written(&write_outputs(
                    &cfg,
                    std::slice::from_ref(&point),
                    &cfg.output_dir,
                )?);
            }
            if r.failures.is_empty() {
                Ok(())
            } else {
                Err(CliError::Config(format!(
                    "{} method(s) failed",
                    r.failures.len()
                )))
            }
        }
        Command::Scan {
            fcidumps,
            labels,
            opts,
        } => {
            let mut cfg = opts.config()?;
            cfg.inputs.extend(inputs(&fcidumps, &labels)?);
            let points = run_scan(&cfg)?;
            let failed = points
                .iter()
                .filter(|p| !p.record.failures.is_empty())
                .count();
            print_written(&write_outputs(&cfg, &points, &cfg.output_dir)?);
            if failed > 0 {
                eprintln!(
                    "{failed} of {} points had failures; see run_meta.json",
                    points.len()
                );
            }
            Ok(())
        }
        Command::Fci {
            fcidump,
            n_alpha,
            n_beta,
        } => {
            let ints = read_fcidump(&fcidump)?;
            let (na, nb) = (
                n_alpha.unwrap_or(ints.n_alpha()),
                n_beta.unwrap_or(ints.n_beta()),
            );
            let (e, _) = fci_ground(&ints, na, nb)?;
            println!(
                "sector   ({na}a, {nb}b), {} determinants",
                sector_dimension(ints.n_orb, na, nb)
            );
            println!("E_FCI    {}", Fixed10::from_hartree(e));
            Ok(())
        }
        Command::Obmp2 {
            fcidump,
            max_iter,
            tol,
            damping,
            level_shift,
            variant: v,
        } => {
            let ints = read_fcidump(&fcidump)?;
            let opts = obdf_sqd::obmp2::Obmp2Options {
                max_iter,
                tol,
                damping,
                level_shift,
                variant: variant(v),
            };
            let (_, e_hf) = hf_canonical(&ints)?;
            let r = obmp2_scf_with(&ints, &opts)?;
            println!("E_HF     {}", Fixed10::from_hartree(e_hf));
            print!("{}", r.trace_text());
            println!(
                "E_OBMP2  {}  ({} iterations, converged: {})",
                Fixed10::from_hartree(r.energy),
                r.n_iter,
                r.converged
            );
            Ok(())
        }
        Command::Report { dir, reference } => {
            print!("{}", build_report(&dir, reference.as_deref())?.render());
            Ok(())
        }
        Command::FcidumpCheck { fcidump } => {
            let ints = read_fcidump(&fcidump)?;
            let again = parse_fcidump(&write_fcidump(&ints))?;
            let (_, e_hf) = hf_canonical(&ints)?;
            println!("orbitals        {}", ints.n_orb);
            println!("electrons       {} (ms2 {})", ints.n_elec, ints.ms2);
            println!("core energy     {}", Fixed10::from_hartree(ints.e_core));
            println!("symmetry error  {:.2e}", ints.symmetry_error());
            println!("E_HF            {}", Fixed10::from_hartree(e_hf));
            let dev = (&again.h - &ints.h)
                .iter()
                .chain((&again.g - &ints.g).iter())
                .fold((again.e_core - ints.e_core).abs(), |m, x| m.max(x.abs()));
            let same_header =
                (again.n_orb, again.n_elec, again.ms2) == (ints.n_orb, ints.n_elec, ints.ms2);
            println!("round trip      max deviation {dev:.2e}");
            if !same_header || dev > ROUND_TRIP_TOL {
                return Err(CliError::Config(
                    "FCIDUMP does not survive a write/read round trip".into(),
                ));
            }
            Ok(())
        }
    }
}
