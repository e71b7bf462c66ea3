//! Samplers of the Gibbs measure that do not go through the Langevin
//! dynamics: a Metropolis chain and one-dimensional quadrature for a single
//! edge in a frozen environment.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::action::{staple, Configuration, CouplingParams};
use crate::error::{Error, Result};
use crate::group::{exp_map, AlgebraElement, GroupKind, GroupSpec};
use crate::lattice::Lattice;
use crate::rng::{streams, StreamKey};

pub const DEFAULT_PROPOSAL_SCALE: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetropolisParams {
    /// Half-width of the uniform step length along a random unit direction.
    pub proposal_scale: f64,
    pub sweeps: u64,
    pub burn_in: u64,
    pub thin: u64,
    pub seed: u64,
}

impl MetropolisParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.proposal_scale > 0.0 && self.proposal_scale < std::f64::consts::PI) {
            return Err(Error::InvalidArgument(format!(
                "proposal scale must lie in (0, pi), got {}",
                self.proposal_scale
            )));
        }
        Ok(())
    }

    pub fn key(&self) -> StreamKey {
        StreamKey::new(self.seed, streams::METROPOLIS)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct AcceptanceStats {
    pub proposed: u64,
    pub accepted: u64,
}

impl AcceptanceStats {
    pub fn rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }

    pub fn merge(&mut self, other: AcceptanceStats) {
        self.proposed += other.proposed;
        self.accepted += other.accepted;
    }

    /// A message when the rate leaves the band `[0.2, 0.6]`.
    pub fn band_warning(&self) -> Option<String> {
        let r = self.rate();
        (self.proposed > 0 && !(0.2..=0.6).contains(&r))
            .then(|| format!("Metropolis acceptance rate {r:.3} is outside [0.2, 0.6]"))
    }
}

/// Uniformly distributed unit vector in the algebra.
pub fn random_unit_direction<R: Rng + ?Sized>(group: &GroupSpec, rng: &mut R) -> AlgebraElement {
    let dim = group.algebra_dim();
    loop {
        let c: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let norm = c.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            let unit: Vec<f64> = c.iter().map(|x| x / norm).collect();
            return AlgebraElement::from_coordinates(group, &unit);
        }
    }
}

/// Change of the action when edge `e` moves to `exp(step) Q_e`, using only
/// the plaquettes that contain `e`.
pub fn local_delta(cfg: &Configuration, e: usize, step: &AlgebraElement, params: &CouplingParams, lattice: &Lattice) -> f64 {
    let a = staple(cfg, e, lattice);
    let q = cfg.link(e).matrix();
    let q_new = exp_map(step).matrix() * q;
    params.n_beta() * (q_new.trace_mul(&a).re - q.trace_mul(&a).re)
}

/// Visits every positive edge once, in index order. Edge `e` of sweep `t`
/// draws from slot `e` of step `t` in the Metropolis stream.
pub fn metropolis_sweep(
    cfg: &mut Configuration,
    params: &CouplingParams,
    lattice: &Lattice,
    mparams: &MetropolisParams,
    sweep_index: u64,
) -> AcceptanceStats {
    let key = mparams.key();
    let mut stats = AcceptanceStats::default();
    for e in 0..lattice.edge_count() {
        let mut rng = key.rng(sweep_index, e as u64);
        let dir = random_unit_direction(&params.group, &mut rng);
        let eps = rng.random_range(-mparams.proposal_scale..=mparams.proposal_scale);
        let u: f64 = rng.random();
        let step = dir.scale(eps);
        stats.proposed += 1;
        if params.beta == 0.0 {
            cfg.set_link(e, cfg.link(e).left_mul(&exp_map(&step)));
            stats.accepted += 1;
            continue;
        }
        let delta = local_delta(cfg, e, &step, params, lattice);
        if delta >= 0.0 || u < delta.exp() {
            cfg.set_link(e, cfg.link(e).left_mul(&exp_map(&step)));
            stats.accepted += 1;
        }
    }
    stats
}

/// Runs `mparams.sweeps` sweeps from `cfg`, calling `observer` after every
/// `thin`-th sweep past `burn_in`.
pub fn run_chain<F>(
    cfg: &mut Configuration,
    params: &CouplingParams,
    lattice: &Lattice,
    mparams: &MetropolisParams,
    first_sweep: u64,
    mut observer: F,
) -> Result<AcceptanceStats>
where
    F: FnMut(u64, &Configuration),
{
    mparams.validate()?;
    let thin = mparams.thin.max(1);
    let mut stats = AcceptanceStats::default();
    for t in first_sweep..mparams.sweeps {
        let s = metropolis_sweep(cfg, params, lattice, mparams, t);
        if t >= mparams.burn_in {
            stats.merge(s);
        }
        let done = t + 1;
        if done > mparams.burn_in && (done - mparams.burn_in).is_multiple_of(thin) {
            observer(done, cfg);
        }
        if done % 64 == 0 {
            *cfg = crate::langevin::reunitarize_all(cfg, params)?;
        }
    }
    Ok(stats)
}

/// Thinned samples of a chain started from the identity configuration.
pub fn sample_chain(params: &CouplingParams, lattice: &Lattice, mparams: &MetropolisParams) -> Result<Vec<Configuration>> {
    let mut cfg = Configuration::identity(lattice, &params.group);
    let mut out = Vec::new();
    run_chain(&mut cfg, params, lattice, mparams, 0, |_, c| out.push(c.clone()))?;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceObservable {
    Tr,
    ReTr,
}

/// Class-function density of the eigenangle for the groups with a single
/// angle, normalised on `[0, pi]`, and the trace as a function of it.
fn weyl_data(group: &GroupSpec) -> Result<(fn(f64) -> f64, fn(f64) -> f64)> {
    use std::f64::consts::PI;
    match (group.kind(), group.n()) {
        (GroupKind::SO, 2) => Ok((|_| 1.0 / PI, |t| 2.0 * t.cos())),
        (GroupKind::SO, 3) => Ok((|t| (1.0 - t.cos()) / PI, |t| 1.0 + 2.0 * t.cos())),
        (GroupKind::SU, 2) => Ok((|t| 2.0 / PI * t.sin().powi(2), |t| 2.0 * t.cos())),
        _ => Err(Error::UnsupportedGroup(group.name())),
    }
}

/// `E[observable]` for one edge with law proportional to
/// `exp(coupling * Re Tr Q)` times Haar measure, where `coupling` is
/// `N beta m` for `m` frozen plaquettes. The trace is real for every
/// supported group, so both observables coincide.
pub fn single_edge_quadrature(group: &GroupSpec, coupling: f64, observable: TraceObservable) -> Result<f64> {
    let _ = observable;
    let (weight, trace) = weyl_data(group)?;
    let tol = 1e-13;
    let z = adaptive_simpson(&|t| weight(t) * (coupling * trace(t)).exp(), 0.0, std::f64::consts::PI, tol);
    let num = adaptive_simpson(
        &|t| weight(t) * trace(t) * (coupling * trace(t)).exp(),
        0.0,
        std::f64::consts::PI,
        tol,
    );
    Ok(num / z)
}

/// Adaptive Simpson rule with Richardson correction.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let diff = left + right - whole;
        if depth == 0 || diff.abs() <= 15.0 * tol {
            return left + right + diff / 15.0;
        }
        recurse(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + recurse(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let (flm, frm) = (f(0.5 * (a + m)), f(0.5 * (m + b)));
    // split once so symmetric integrands cannot fool the first error estimate
    let left = simpson(fa, flm, fm, a, m);
    let right = simpson(fm, frm, fb, m, b);
    recurse(f, a, m, fa, flm, fm, left, tol / 2.0, 40) + recurse(f, m, b, fm, frm, fb, right, tol / 2.0, 40)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::{action_value, derive_constants};
    use crate::lattice::LatticeSpec;

    #[test]
    fn simpson_integrates_smooth_functions() {
        let v = adaptive_simpson(&|x: f64| x.sin(), 0.0, std::f64::consts::PI, 1e-12);
        assert!((v - 2.0).abs() < 1e-11);
        let v = adaptive_simpson(&|x: f64| (-x * x).exp(), -6.0, 6.0, 1e-12);
        assert!((v - std::f64::consts::PI.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn haar_traces_vanish() {
        for g in [GroupSpec::so(2).unwrap(), GroupSpec::so(3).unwrap(), GroupSpec::su(2).unwrap()] {
            let m = single_edge_quadrature(&g, 0.0, TraceObservable::Tr).unwrap();
            assert!(m.abs() < 1e-12, "{g}: {m}");
        }
        assert!(single_edge_quadrature(&GroupSpec::su(3).unwrap(), 0.1, TraceObservable::Tr).is_err());
    }

    #[test]
    fn local_delta_matches_full_action() {
        let g = GroupSpec::so(3).unwrap();
        let lat = Lattice::new(LatticeSpec::new(2, 3).unwrap());
        let p = derive_constants(g, 0.7, 2).unwrap();
        let key = StreamKey::new(3, streams::TESTING);
        let cfg = Configuration::haar(&lat, &g, key);
        let mut rng = key.rng(1, 0);
        for i in 0..50 {
            let e = i % lat.edge_count();
            let step = random_unit_direction(&g, &mut rng).scale(rng.random_range(-1.0..1.0));
            let mut moved = cfg.clone();
            moved.set_link(e, cfg.link(e).left_mul(&exp_map(&step)));
            let full = action_value(&moved, &p, &lat) - action_value(&cfg, &p, &lat);
            assert!((full - local_delta(&cfg, e, &step, &p, &lat)).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_coupling_accepts_everything() {
        let g = GroupSpec::su(2).unwrap();
        let lat = Lattice::new(LatticeSpec::new(2, 2).unwrap());
        let p = derive_constants(g, 0.0, 2).unwrap();
        let mp = MetropolisParams {
            proposal_scale: 0.5,
            sweeps: 0,
            burn_in: 0,
            thin: 1,
            seed: 1,
        };
        let mut cfg = Configuration::identity(&lat, &g);
        let s = metropolis_sweep(&mut cfg, &p, &lat, &mp, 0);
        assert_eq!(s.accepted, s.proposed);
    }
}
