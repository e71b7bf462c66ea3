//! Run configuration, read from TOML. Every field has an explicit default so
//! `--print-config` shows the complete effective configuration.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::action::{derive_constants, CouplingParams};
use crate::error::{Error, Result};
use crate::gibbs::{MetropolisParams, DEFAULT_PROPOSAL_SCALE};
use crate::group::{GroupKind, GroupSpec};
use crate::langevin::{CouplingKind, IntegratorParams, DEFAULT_REUNITARIZE_EVERY};
use crate::lattice::{parse_moves, Lattice, LatticeSpec, LoopWord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Verify,
    Langevin,
    Gibbs,
    Couple,
    Measure,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Verify => "verify",
            ExperimentKind::Langevin => "langevin",
            ExperimentKind::Gibbs => "gibbs",
            ExperimentKind::Couple => "couple",
            ExperimentKind::Measure => "measure",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: ExperimentKind,
    pub seed: u64,
    /// Record file; records go to stdout when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    pub threads: usize,
    /// Adds elapsed seconds to result records. Off by default so that
    /// repeated runs produce identical output.
    pub record_wall_clock: bool,
    pub model: ModelConfig,
    pub langevin: LangevinConfig,
    pub metropolis: MetropolisConfig,
    pub coupling: CouplingConfig,
    pub observables: ObservablesConfig,
    pub checkpoint: CheckpointConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub group: GroupKind,
    pub n: usize,
    pub d: usize,
    #[serde(rename = "L")]
    pub l: usize,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LangevinConfig {
    /// Zero selects `1e-3 min(1, 1 / (N |beta| (d-1)))`.
    pub step_size: f64,
    pub n_steps: u64,
    pub burn_in: u64,
    pub thin: u64,
    pub reunitarize_every: u64,
    /// Start from Haar-random links instead of the identity.
    pub hot_start: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetropolisConfig {
    pub proposal_scale: f64,
    pub sweeps: u64,
    pub burn_in: u64,
    pub thin: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingConfig {
    pub weight_a: f64,
    pub n_pairs: usize,
    pub record_every: u64,
    pub kind: CouplingKind,
    pub bootstrap: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservablesConfig {
    /// Mean plaquette `Re Tr Q_p / N`.
    pub plaquette: bool,
    pub loops: Vec<LoopSpec>,
    /// Separations for the plaquette covariance decay in `measure`.
    pub separations: Vec<usize>,
}

/// A closed path given by its start vertex and a move string such as
/// `"+0 +1 -0 -1"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoopSpec {
    pub name: String,
    pub start: Vec<usize>,
    pub moves: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointConfig {
    /// Steps (or sweeps) between checkpoint records; 0 disables them.
    pub every: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resume_from: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            experiment: ExperimentKind::Langevin,
            seed: 1,
            output: None,
            threads: 1,
            record_wall_clock: false,
            model: ModelConfig {
                group: GroupKind::SO,
                n: 3,
                d: 2,
                l: 4,
                beta: 0.005,
            },
            langevin: LangevinConfig {
                step_size: 0.0,
                n_steps: 20_000,
                burn_in: 2_000,
                thin: 10,
                reunitarize_every: DEFAULT_REUNITARIZE_EVERY,
                hot_start: false,
            },
            metropolis: MetropolisConfig {
                proposal_scale: DEFAULT_PROPOSAL_SCALE,
                sweeps: 20_000,
                burn_in: 2_000,
                thin: 1,
            },
            coupling: CouplingConfig {
                weight_a: 1.2,
                n_pairs: 64,
                record_every: 50,
                kind: CouplingKind::ParallelTransport,
                bootstrap: 1000,
            },
            observables: ObservablesConfig {
                plaquette: true,
                loops: vec![LoopSpec {
                    name: "rect_1x2".into(),
                    start: vec![0, 0],
                    moves: "+0 +1 +1 -0 -1 -1".into(),
                }],
                separations: vec![1, 2],
            },
            checkpoint: CheckpointConfig {
                every: 0,
                resume_from: None,
            },
        }
    }
}

/// The configuration file layer: every key optional, merged over defaults.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let base = toml::Value::try_from(RunConfig::default()).map_err(|e| Error::Config(e.to_string()))?;
    let user: toml::Value = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    let merged = merge(base, user);
    let cfg: RunConfig = merged.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

fn merge(base: toml::Value, over: toml::Value) -> toml::Value {
    match (base, over) {
        (toml::Value::Table(mut b), toml::Value::Table(o)) => {
            for (k, v) in o {
                let merged = match b.remove(&k) {
                    Some(bv) => merge(bv, v),
                    None => v,
                };
                b.insert(k, merged);
            }
            toml::Value::Table(b)
        }
        (_, o) => o,
    }
}

impl RunConfig {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serialises to TOML")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        self.group()?;
        self.lattice_spec()?;
        if !self.model.beta.is_finite() {
            return bad(format!("beta must be finite, got {}", self.model.beta));
        }
        if self.seed > i64::MAX as u64 {
            return bad(format!("seed must be at most {}, got {}", i64::MAX, self.seed));
        }
        if self.threads == 0 {
            return bad("threads must be at least 1".into());
        }
        let lv = &self.langevin;
        if !(lv.step_size >= 0.0 && lv.step_size.is_finite()) {
            return bad(format!("langevin.step_size must be >= 0, got {}", lv.step_size));
        }
        if lv.reunitarize_every == 0 || lv.thin == 0 {
            return bad("langevin.reunitarize_every and langevin.thin must be at least 1".into());
        }
        let mc = &self.metropolis;
        if !(mc.proposal_scale > 0.0 && mc.proposal_scale < std::f64::consts::PI) {
            return bad(format!("metropolis.proposal_scale must lie in (0, pi), got {}", mc.proposal_scale));
        }
        if mc.thin == 0 {
            return bad("metropolis.thin must be at least 1".into());
        }
        let cp = &self.coupling;
        if !(cp.weight_a > 1.0 && cp.weight_a.is_finite()) {
            return bad(format!("coupling.weight_a must exceed 1, got {}", cp.weight_a));
        }
        if cp.n_pairs < 2 || cp.record_every == 0 || cp.bootstrap == 0 {
            return bad("coupling needs n_pairs >= 2, record_every >= 1 and bootstrap >= 1".into());
        }
        let lattice = Lattice::new(self.lattice_spec()?);
        for spec in &self.observables.loops {
            spec.resolve(&lattice).map_err(|e| Error::Config(format!("loop {:?}: {e}", spec.name)))?;
        }
        if let Some(&r) = self.observables.separations.iter().find(|&&r| r == 0 || r > self.model.l / 2) {
            return bad(format!("separation {r} must lie in 1..={}", self.model.l / 2));
        }
        Ok(())
    }

    pub fn group(&self) -> Result<GroupSpec> {
        GroupSpec::new(self.model.group, self.model.n).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn lattice_spec(&self) -> Result<LatticeSpec> {
        LatticeSpec::new(self.model.d, self.model.l).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn coupling_params(&self) -> Result<CouplingParams> {
        derive_constants(self.group()?, self.model.beta, self.model.d)
    }

    pub fn integrator(&self, params: &CouplingParams) -> IntegratorParams {
        let lv = &self.langevin;
        IntegratorParams {
            step_size: if lv.step_size > 0.0 {
                lv.step_size
            } else {
                IntegratorParams::default_step_size(params)
            },
            n_steps: lv.n_steps,
            reunitarize_every: lv.reunitarize_every,
            seed: self.seed,
        }
    }

    pub fn metropolis_params(&self) -> MetropolisParams {
        let mc = &self.metropolis;
        MetropolisParams {
            proposal_scale: mc.proposal_scale,
            sweeps: mc.sweeps,
            burn_in: mc.burn_in,
            thin: mc.thin,
            seed: self.seed,
        }
    }
}

impl LoopSpec {
    pub fn resolve(&self, lattice: &Lattice) -> Result<LoopWord> {
        if self.start.len() != lattice.d() {
            return Err(Error::InvalidArgument(format!(
                "start vertex has {} coordinates, lattice has d = {}",
                self.start.len(),
                lattice.d()
            )));
        }
        if let Some(&x) = self.start.iter().find(|&&x| x >= lattice.l()) {
            return Err(Error::InvalidArgument(format!("coordinate {x} is outside 0..{}", lattice.l())));
        }
        let moves = parse_moves(&self.moves)?;
        let path = lattice.path_from_moves(lattice.vertex_index(&self.start), &moves)?;
        lattice.reduce_loop(&path)
    }
}
