//! Exponential Euler integration of the Langevin dynamics, coupled chains,
//! and the weighted distance used to measure their contraction.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::action::{drift_algebra, CouplingParams, Configuration};
use crate::error::{Error, Result};
use crate::group::{brownian_increment, exp_map, geodesic_distance, log_map, reunitarize, AlgebraElement, GroupKind};
use crate::lattice::Lattice;
use crate::rng::{streams, StreamKey};

pub const DEFAULT_REUNITARIZE_EVERY: u64 = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorParams {
    pub step_size: f64,
    pub n_steps: u64,
    pub reunitarize_every: u64,
    pub seed: u64,
}

impl IntegratorParams {
    /// `1e-3 min(1, 1 / (N |beta| (d-1)))`.
    pub fn default_step_size(params: &CouplingParams) -> f64 {
        let scale = params.group.n() as f64 * params.beta.abs() * (params.d - 1) as f64;
        1e-3 * if scale > 1.0 { 1.0 / scale } else { 1.0 }
    }

    pub fn new(params: &CouplingParams, n_steps: u64, seed: u64) -> Self {
        Self {
            step_size: Self::default_step_size(params),
            n_steps,
            reunitarize_every: DEFAULT_REUNITARIZE_EVERY,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::InvalidArgument(format!("step size must be positive, got {}", self.step_size)));
        }
        if self.reunitarize_every == 0 {
            return Err(Error::InvalidArgument("reunitarize_every must be at least 1".into()));
        }
        Ok(())
    }

    /// A message when `h` times the drift bound exceeds 0.1.
    pub fn drift_warning(&self, params: &CouplingParams) -> Option<String> {
        let bound = drift_bound(params);
        (self.step_size * bound > 0.1).then(|| {
            format!(
                "step size {} times drift bound {bound:.4} exceeds 0.1; expect discretisation bias",
                self.step_size
            )
        })
    }

    pub fn noise_key(&self) -> StreamKey {
        StreamKey::new(self.seed, streams::LANGEVIN_NOISE)
    }
}

/// `2 (d-1) N^{3/2} |beta| gamma / gamma_1`, an upper bound on `|X_e|`,
/// with `gamma / gamma_1 = 1` for SO and `sqrt 2` for SU.
pub fn drift_bound(params: &CouplingParams) -> f64 {
    let n = params.group.n() as f64;
    let ratio = match params.group.kind() {
        GroupKind::SO => 1.0,
        GroupKind::SU => std::f64::consts::SQRT_2,
    };
    2.0 * (params.d - 1) as f64 * n.powf(1.5) * params.beta.abs() * ratio
}

/// Standard algebra Gaussian for edge `e` at `step`.
pub fn noise(params: &CouplingParams, key: StreamKey, step: u64, e: usize) -> AlgebraElement {
    brownian_increment(&params.group, 1.0, &mut key.rng(step, e as u64))
}

/// One step with caller-supplied noise: every edge moves by
/// `exp(h X_e + sqrt(2h) xi_e)` with drifts taken from the current snapshot.
pub fn step_with_noise<F>(cfg: &Configuration, params: &CouplingParams, lattice: &Lattice, h: f64, xi: F) -> Configuration
where
    F: Fn(usize) -> AlgebraElement + Sync,
{
    let s = (2.0 * h).sqrt();
    let links = (0..lattice.edge_count())
        .into_par_iter()
        .map(|e| {
            let x = drift_algebra(cfg, e, params, lattice).scale(h);
            let g = exp_map(&x.add(&xi(e).scale(s)));
            cfg.link(e).left_mul(&g)
        })
        .collect();
    Configuration::from_links(links)
}

pub fn step(cfg: &Configuration, params: &CouplingParams, lattice: &Lattice, h: f64, key: StreamKey, step_index: u64) -> Configuration {
    step_with_noise(cfg, params, lattice, h, |e| noise(params, key, step_index, e))
}

pub fn reunitarize_all(cfg: &Configuration, params: &CouplingParams) -> Result<Configuration> {
    let links = cfg
        .links()
        .iter()
        .map(|q| reunitarize(&params.group, q.matrix()))
        .collect::<Result<Vec<_>>>()?;
    Ok(Configuration::from_links(links))
}

/// A running chain: its configuration and the index of the next step.
#[derive(Debug, Clone)]
pub struct LangevinChain {
    pub cfg: Configuration,
    pub step: u64,
}

impl LangevinChain {
    pub fn new(cfg: Configuration) -> Self {
        Self { cfg, step: 0 }
    }

    pub fn advance(&mut self, params: &CouplingParams, lattice: &Lattice, integ: &IntegratorParams) -> Result<()> {
        self.cfg = step(&self.cfg, params, lattice, integ.step_size, integ.noise_key(), self.step);
        self.step += 1;
        if self.step.is_multiple_of(integ.reunitarize_every) {
            self.cfg = reunitarize_all(&self.cfg, params)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    pub burn_in: u64,
    pub thin: u64,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub steps: u64,
    pub observations: u64,
    pub max_unitarity_defect: f64,
}

/// Advances until `integ.n_steps` total steps, calling `observer` with the
/// step count after every `thin`-th step past `burn_in`.
pub fn run<F>(
    chain: &mut LangevinChain,
    params: &CouplingParams,
    lattice: &Lattice,
    integ: &IntegratorParams,
    schedule: Schedule,
    mut observer: F,
) -> Result<RunSummary>
where
    F: FnMut(u64, &Configuration),
{
    integ.validate()?;
    let thin = schedule.thin.max(1);
    let mut observations = 0;
    let mut max_defect: f64 = 0.0;
    while chain.step < integ.n_steps {
        chain.advance(params, lattice, integ)?;
        if chain.step > schedule.burn_in && (chain.step - schedule.burn_in).is_multiple_of(thin) {
            observer(chain.step, &chain.cfg);
            observations += 1;
            max_defect = max_defect.max(chain.cfg.max_unitarity_defect());
        }
    }
    Ok(RunSummary {
        steps: chain.step,
        observations,
        max_unitarity_defect: max_defect,
    })
}

/// How the second copy's noise is derived from the first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingKind {
    /// Both copies receive the same algebra increment.
    Synchronous,
    /// The increment is parallel-transported along the geodesic between the
    /// copies, `xi' = Ad(exp(Y/2)) xi` with `Y = log(Q' Q^{-1})`.
    ParallelTransport,
}

#[derive(Debug, Clone)]
pub struct CoupledState {
    pub first: Configuration,
    pub second: Configuration,
    pub step: u64,
}

pub fn coupled_step(
    state: &CoupledState,
    params: &CouplingParams,
    lattice: &Lattice,
    integ: &IntegratorParams,
    kind: CouplingKind,
) -> Result<CoupledState> {
    let key = integ.noise_key();
    let h = integ.step_size;
    let t = state.step;
    let first = step(&state.first, params, lattice, h, key, t);
    let second = match kind {
        CouplingKind::Synchronous => step(&state.second, params, lattice, h, key, t),
        CouplingKind::ParallelTransport => {
            let transports: Vec<Option<AlgebraElement>> = (0..lattice.edge_count())
                .into_par_iter()
                .map(|e| {
                    let rel = state.second.link(e).mul(&state.first.link(e).inverse());
                    log_map(&params.group, &rel).ok().map(|y| y.scale(0.5))
                })
                .collect();
            step_with_noise(&state.second, params, lattice, h, |e| {
                let xi = noise(params, key, t, e);
                match &transports[e] {
                    // on the cut locus the geodesic is not unique; fall back to the shared increment
                    None => xi,
                    Some(half) => {
                        let g = exp_map(half);
                        let m = &(g.matrix() * xi.matrix()) * &g.matrix().adjoint();
                        AlgebraElement::from_matrix_unchecked(m)
                    }
                }
            })
        }
    };
    let mut next = CoupledState {
        first,
        second,
        step: t + 1,
    };
    if next.step.is_multiple_of(integ.reunitarize_every) {
        next.first = reunitarize_all(&next.first, params)?;
        next.second = reunitarize_all(&next.second, params)?;
    }
    Ok(next)
}

/// `rho_{inf,a} = sqrt(sum_e a^{-|e|} rho(Q_e, Q'_e)^2)`.
pub fn weighted_distance(cfg: &Configuration, other: &Configuration, params: &CouplingParams, lattice: &Lattice, a: f64) -> Result<f64> {
    Ok(weighted_distance_sq(cfg, other, params, lattice, a)?.sqrt())
}

pub fn weighted_distance_sq(cfg: &Configuration, other: &Configuration, params: &CouplingParams, lattice: &Lattice, a: f64) -> Result<f64> {
    if !(a > 1.0) {
        return Err(Error::InvalidArgument(format!("weight base must exceed 1, got {a}")));
    }
    let mut total = 0.0;
    for e in 0..lattice.edge_count() {
        let rho = geodesic_distance(&params.group, cfg.link(e), other.link(e))?;
        total += a.powi(-(lattice.edge_norm(e) as i32)) * rho * rho;
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ContractionReport {
    pub coupling: CouplingKind,
    pub n_pairs: usize,
    /// Times at which `rho^2` was recorded.
    pub times: Vec<f64>,
    /// Mean over pairs of `log rho^2` at each recorded time.
    pub mean_log_rho_sq: Vec<f64>,
    /// Fitted slope of `log rho^2` against time.
    pub rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// `2 K~_S`, reported for comparison only.
    pub two_tilde_k: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct ContractionSetup {
    pub a: f64,
    pub n_pairs: usize,
    /// Steps between recorded distances.
    pub record_every: u64,
    pub kind: CouplingKind,
    pub bootstrap: usize,
}

/// Runs coupled pairs from independent Haar starts and fits the decay of
/// `log rho_{inf,a}^2`. The confidence interval is a percentile bootstrap
/// over pairs.
pub fn contraction_experiment(
    params: &CouplingParams,
    lattice: &Lattice,
    integ: &IntegratorParams,
    setup: &ContractionSetup,
) -> Result<ContractionReport> {
    let tilde = params.tilde_k(setup.a)?;
    if !(tilde > 0.0) {
        return Err(Error::Inadmissible {
            what: "the contraction experiment",
            beta: params.beta,
            threshold: admissible_beta_for_tilde_k(params, setup.a),
        });
    }
    if setup.n_pairs < 2 {
        return Err(Error::InvalidArgument("need at least two coupled pairs".into()));
    }
    integ.validate()?;
    let record_every = setup.record_every.max(1);
    let init = StreamKey::new(integ.seed, streams::COUPLING_INIT);
    let mut series: Vec<Vec<f64>> = Vec::with_capacity(setup.n_pairs);
    for pair in 0..setup.n_pairs {
        let pair_key = init.child(pair as u64);
        let mut state = CoupledState {
            first: Configuration::haar(lattice, &params.group, pair_key.child(0)),
            second: Configuration::haar(lattice, &params.group, pair_key.child(1)),
            step: 0,
        };
        let pair_integ = IntegratorParams {
            seed: StreamKey::new(integ.seed, pair as u64).child(0).seed,
            ..*integ
        };
        let mut log_rho = vec![weighted_distance_sq(&state.first, &state.second, params, lattice, setup.a)?.ln()];
        while state.step < integ.n_steps {
            state = coupled_step(&state, params, lattice, &pair_integ, setup.kind)?;
            if state.step.is_multiple_of(record_every) {
                let d2 = weighted_distance_sq(&state.first, &state.second, params, lattice, setup.a)?;
                log_rho.push(d2.max(f64::MIN_POSITIVE).ln());
            }
        }
        series.push(log_rho);
    }
    let times: Vec<f64> = (0..series[0].len())
        .map(|i| i as f64 * record_every as f64 * integ.step_size)
        .collect();
    let mean_log = mean_columns(&series, None);
    let rate = slope(&times, &mean_log);
    let mut rng: ChaCha8Rng = StreamKey::new(integ.seed, streams::TESTING).rng(u64::MAX, 0);
    let mut boot: Vec<f64> = (0..setup.bootstrap.max(1))
        .map(|_| {
            let idx: Vec<usize> = (0..series.len()).map(|_| rng.random_range(0..series.len())).collect();
            slope(&times, &mean_columns(&series, Some(&idx)))
        })
        .collect();
    boot.sort_by(|a, b| a.total_cmp(b));
    let q = |p: f64| boot[((p * (boot.len() - 1) as f64).round() as usize).min(boot.len() - 1)];
    Ok(ContractionReport {
        coupling: setup.kind,
        n_pairs: setup.n_pairs,
        times,
        mean_log_rho_sq: mean_log,
        rate,
        ci_low: q(0.025),
        ci_high: q(0.975),
        two_tilde_k: 2.0 * tilde,
    })
}

/// Largest `|beta|` with `K~_S > 0` for the given base `a`.
pub fn admissible_beta_for_tilde_k(params: &CouplingParams, a: f64) -> f64 {
    let n = params.group.n() as f64;
    params.group.ricci() / ((4.0 + 4.0 * a.sqrt()) * n * (params.d - 1) as f64)
}

fn mean_columns(series: &[Vec<f64>], idx: Option<&[usize]>) -> Vec<f64> {
    let len = series[0].len();
    let rows: Vec<&Vec<f64>> = match idx {
        Some(idx) => idx.iter().map(|&i| &series[i]).collect(),
        None => series.iter().collect(),
    };
    (0..len)
        .map(|t| rows.iter().map(|r| r[t]).sum::<f64>() / rows.len() as f64)
        .collect()
}

/// Least-squares slope of `y` on `x`.
pub(crate) fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}
