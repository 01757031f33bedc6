//! End-to-end method drivers: HF, OBMP2, FCI, CAS-SQD and OBDF-SQD on one
//! set of integrals.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::cc::{ccd, CcdOptions};
use crate::ci::{enumerate_sector, fci_ground};
use crate::downfold::{
    build_cas_hamiltonian, build_obdf_hamiltonian_with, select_active, ActivePartition,
    EffectiveHamiltonian,
};
use crate::error::{Error, Result};
use crate::integrals::{build_fock, canonical_hf, closed_shell_occupations, IntegralSet};
use crate::obmp2::{mp2_amplitudes, obmp2_scf_with, Obmp2Options, Obmp2Result};
use crate::rng::derive_seed;
use crate::sampler::{
    apply_noise, prepare_ucj_state, sample_exact, ucj_from_t2, NoiseModel, SampleSet,
};
use crate::sqd::{sqd_solve, SqdConfig, SqdResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "HF")]
    Hf,
    #[serde(rename = "OBMP2")]
    Obmp2,
    #[serde(rename = "FCI")]
    Fci,
    #[serde(rename = "CAS-SQD")]
    CasSqd,
    #[serde(rename = "OBDF-SQD")]
    ObdfSqd,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Hf,
        Method::Obmp2,
        Method::Fci,
        Method::CasSqd,
        Method::ObdfSqd,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Hf => "HF",
            Method::Obmp2 => "OBMP2",
            Method::Fci => "FCI",
            Method::CasSqd => "CAS-SQD",
            Method::ObdfSqd => "OBDF-SQD",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Input(format!("unknown method {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActiveSpec {
    /// Orbitals around the Fermi level.
    Counts { n_act: usize, n_act_elec: usize },
    /// Explicit indices in the canonical basis of each method.
    Lists {
        core: Vec<usize>,
        active: Vec<usize>,
    },
    /// Every orbital active.
    Full,
}

impl ActiveSpec {
    pub fn partition(&self, ints: &IntegralSet) -> Result<ActivePartition> {
        match self {
            ActiveSpec::Counts { n_act, n_act_elec } => select_active(ints, *n_act, *n_act_elec),
            ActiveSpec::Lists { core, active } => {
                ActivePartition::from_lists(ints, core.clone(), active.clone())
            }
            ActiveSpec::Full => select_active(ints, ints.n_orb, ints.n_elec),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerKind {
    /// Multinomial draws from the exact ground state of the active Hamiltonian.
    Exact,
    /// Unitary cluster Jastrow state from active-space doubles amplitudes.
    Ucj {
        n_modes: usize,
        #[serde(default)]
        amplitudes: AmplitudeSource,
    },
    /// Counts read from a sample-set text file, e.g. hardware measurements.
    File { path: PathBuf },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AmplitudeSource {
    #[default]
    Mp2,
    Ccd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerSpec {
    pub kind: SamplerKind,
    pub shots: u64,
    pub p_flip: f64,
    pub seed: u64,
}

impl Default for SamplerSpec {
    fn default() -> Self {
        SamplerSpec {
            kind: SamplerKind::Ucj {
                n_modes: 2,
                amplitudes: AmplitudeSource::Mp2,
            },
            shots: 10_000,
            p_flip: 0.0,
            seed: 0,
        }
    }
}

/// Samples for the ground state of `heff`. The UCJ mode count is clamped to
/// the amplitude rank; the count actually used is returned.
pub fn sample_active(
    heff: &EffectiveHamiltonian,
    spec: &SamplerSpec,
) -> Result<(SampleSet, Option<usize>)> {
    let (clean, modes) = match &spec.kind {
        SamplerKind::Exact => {
            let (_, psi) = fci_ground(heff, heff.n_alpha, heff.n_beta)?;
            (
                sample_exact(&psi, spec.shots, derive_seed(spec.seed, 1)),
                None,
            )
        }
        SamplerKind::Ucj {
            n_modes,
            amplitudes,
        } => {
            let ints = heff.to_integral_set();
            let t = match *amplitudes {
                AmplitudeSource::Mp2 => {
                    let occ = closed_shell_occupations(&ints)?;
                    let fock = build_fock(&ints, &occ)?;
                    let eps: Vec<f64> = (0..ints.n_orb).map(|p| fock.f[[p, p]]).collect();
                    let n_occ = ints.n_elec / 2;
                    let (o, v): (Vec<_>, Vec<_>) =
                        ((0..n_occ).collect(), (n_occ..ints.n_orb).collect());
                    mp2_amplitudes(&eps, &ints, &o, &v)?
                }
                AmplitudeSource::Ccd => ccd(&ints, &CcdOptions::default())?.amplitudes,
            };
            let ansatz = match ucj_from_t2(&t, *n_modes) {
                Err(Error::Rank { rank, .. }) => ucj_from_t2(&t, rank)?,
                other => other?,
            };
            let used = ansatz.layers.len() / 2;
            let basis = enumerate_sector(ints.n_orb, heff.n_alpha, heff.n_beta)?;
            let state = prepare_ucj_state(&ansatz, &basis)?;
            (
                state.sample(spec.shots, derive_seed(spec.seed, 1)),
                Some(used),
            )
        }
        SamplerKind::File { path } => {
            let set = SampleSet::parse(&std::fs::read_to_string(path)?)?;
            if set.n_orb != heff.n_act {
                return Err(Error::Width {
                    found: 2 * set.n_orb,
                    expected: 2 * heff.n_act,
                });
            }
            (set, None)
        }
    };
    if spec.p_flip > 0.0 {
        let noise = NoiseModel::new(spec.p_flip, derive_seed(spec.seed, 2))?;
        return Ok((apply_noise(&clean, &noise), modes));
    }
    Ok((clean, modes))
}

/// Integrals in canonical closed-shell HF orbitals and the HF energy.
pub fn hf_canonical(ints: &IntegralSet) -> Result<(IntegralSet, f64)> {
    let hf = canonical_hf(ints)?;
    Ok((hf.integrals, hf.e_hf))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub methods: Vec<Method>,
    pub active: ActiveSpec,
    pub sampler: SamplerSpec,
    pub sqd: SqdConfig,
    pub obmp2: Obmp2Options,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            methods: Method::ALL.to_vec(),
            active: ActiveSpec::Full,
            sampler: SamplerSpec::default(),
            sqd: SqdConfig::default(),
            obmp2: Obmp2Options::default(),
        }
    }
}

/// Outcome of one SQD method.
#[derive(Debug, Clone, PartialEq)]
pub struct SqdRun {
    pub hamiltonian: EffectiveHamiltonian,
    pub partition: ActivePartition,
    pub samples: SampleSet,
    pub ucj_modes: Option<usize>,
    pub result: SqdResult,
}

pub fn cas_sqd(ints: &IntegralSet, cfg: &PipelineConfig) -> Result<SqdRun> {
    let (canon, _) = hf_canonical(ints)?;
    let partition = cfg.active.partition(&canon)?;
    let heff = build_cas_hamiltonian(&canon, &partition)?;
    run_sqd(heff, partition, cfg)
}

/// OBDF-SQD from a finished OBMP2 calculation.
pub fn obdf_sqd(obmp2: &Obmp2Result, cfg: &PipelineConfig) -> Result<SqdRun> {
    let partition = cfg.active.partition(&obmp2.integrals)?;
    let t = obmp2.amplitudes(cfg.obmp2.level_shift)?;
    let heff = build_obdf_hamiltonian_with(&obmp2.integrals, &t, &partition, cfg.obmp2.variant)?;
    run_sqd(heff, partition, cfg)
}

fn run_sqd(
    heff: EffectiveHamiltonian,
    partition: ActivePartition,
    cfg: &PipelineConfig,
) -> Result<SqdRun> {
    let (samples, ucj_modes) = sample_active(&heff, &cfg.sampler)?;
    let result = sqd_solve(&heff, &samples, heff.n_alpha, heff.n_beta, &cfg.sqd)?;
    Ok(SqdRun {
        hamiltonian: heff,
        partition,
        samples,
        ucj_modes,
        result,
    })
}

/// Everything computed for one geometry; failed methods carry their error.
#[derive(Debug, Clone)]
pub struct PointResult {
    pub hf: Option<Result<f64>>,
    pub obmp2: Option<Result<Obmp2Result>>,
    pub fci: Option<Result<f64>>,
    pub cas_sqd: Option<Result<SqdRun>>,
    pub obdf_sqd: Option<Result<SqdRun>>,
}

impl PointResult {
    pub fn energy(&self, m: Method) -> Option<f64> {
        match m {
            Method::Hf => self.hf.as_ref()?.as_ref().ok().copied(),
            Method::Obmp2 => self.obmp2.as_ref()?.as_ref().ok().map(|r| r.energy),
            Method::Fci => self.fci.as_ref()?.as_ref().ok().copied(),
            Method::CasSqd => self
                .cas_sqd
                .as_ref()?
                .as_ref()
                .ok()
                .map(|r| r.result.energy),
            Method::ObdfSqd => self
                .obdf_sqd
                .as_ref()?
                .as_ref()
                .ok()
                .map(|r| r.result.energy),
        }
    }

    pub fn errors(&self) -> Vec<(Method, String)> {
        let mut out = Vec::new();
        let mut note = |m: Method, e: Option<&Error>| {
            if let Some(e) = e {
                out.push((m, e.to_string()));
            }
        };
        note(Method::Hf, self.hf.as_ref().and_then(|r| r.as_ref().err()));
        note(
            Method::Obmp2,
            self.obmp2.as_ref().and_then(|r| r.as_ref().err()),
        );
        note(
            Method::Fci,
            self.fci.as_ref().and_then(|r| r.as_ref().err()),
        );
        note(
            Method::CasSqd,
            self.cas_sqd.as_ref().and_then(|r| r.as_ref().err()),
        );
        note(
            Method::ObdfSqd,
            self.obdf_sqd.as_ref().and_then(|r| r.as_ref().err()),
        );
        out
    }
}

pub fn run_methods(ints: &IntegralSet, cfg: &PipelineConfig) -> PointResult {
    let wants = |m| cfg.methods.contains(&m);
    let hf = wants(Method::Hf).then(|| hf_canonical(ints).map(|(_, e)| e));
    let obmp2 =
        (wants(Method::Obmp2) || wants(Method::ObdfSqd)).then(|| obmp2_scf_with(ints, &cfg.obmp2));
    let fci =
        wants(Method::Fci).then(|| fci_ground(ints, ints.n_alpha(), ints.n_beta()).map(|(e, _)| e));
    let cas = wants(Method::CasSqd).then(|| cas_sqd(ints, cfg));
    let obdf = wants(Method::ObdfSqd).then(|| match obmp2.as_ref().expect("computed above") {
        Ok(r) => obdf_sqd(r, cfg),
        Err(e) => Err(e.clone()),
    });
    PointResult {
        hf,
        obmp2: obmp2.filter(|_| wants(Method::Obmp2)),
        fci,
        cas_sqd: cas,
        obdf_sqd: obdf,
    }
}
