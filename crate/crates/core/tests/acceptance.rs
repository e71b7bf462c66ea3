//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
//! exits non-zero when any criterion fails. Pass criterion numbers as
//! arguments to run a subset, e.g. `cargo test --test acceptance -- 1 3`.

mod common;

use std::time::Instant;

use common::rel_err;
use lattice_ym::action::{
    action_value, derive_constants, drift_algebra, hessian_bound, hessian_quadratic_form, tangent_norm_sq, Configuration,
    CouplingParams,
};
use lattice_ym::gibbs::{run_chain, single_edge_quadrature, MetropolisParams, TraceObservable};
use lattice_ym::group::{brownian_increment, exp_map, orthonormal_basis, AlgebraElement, GroupKind, GroupSpec};
use lattice_ym::langevin::{contraction_experiment, drift_bound, run, ContractionSetup, CouplingKind, IntegratorParams, LangevinChain, Schedule};
use lattice_ym::lattice::{Lattice, LatticeSpec};
use lattice_ym::linalg::Mat;
use lattice_ym::observables::plaquette_traces;
use lattice_ym::rng::{streams, StreamKey};
use lattice_ym::stats::{covariance_decay, estimate, kendall_tau_decreasing, translate_averaged_variance, variance_bound_check, EstimatorResult, Verdict};
use num_complex::Complex64;
use rand::Rng;

struct Outcome {
    passed: bool,
    detail: String,
}

impl Outcome {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Self { passed, detail: detail.into() }
    }
}

fn key(i: u64) -> StreamKey {
    StreamKey::new(0xacc, streams::TESTING).child(i)
}

fn groups(range: std::ops::RangeInclusive<usize>) -> Vec<GroupSpec> {
    range.flat_map(|n| [GroupSpec::so(n).unwrap(), GroupSpec::su(n).unwrap()]).collect()
}

fn lattice(d: usize, l: usize) -> Lattice {
    Lattice::new(LatticeSpec::new(d, l).unwrap())
}

fn plaquette_average(cfg: &Configuration, lat: &Lattice, n: usize) -> f64 {
    let t = plaquette_traces(cfg, lat, n);
    t.iter().sum::<f64>() / t.len() as f64
}

fn agree(a: &EstimatorResult, b: &EstimatorResult, k: f64) -> bool {
    (a.mean - b.mean).abs() <= k * (a.stderr.powi(2) + b.stderr.powi(2)).sqrt()
}

fn metropolis(scale: f64, sweeps: u64, burn_in: u64, thin: u64, seed: u64) -> MetropolisParams {
    MetropolisParams {
        proposal_scale: scale,
        sweeps,
        burn_in,
        thin,
        seed,
    }
}

/// Per-sample plaquette traces `Re Tr Q_p / N` of a Metropolis chain from the identity.
fn metropolis_traces(p: &CouplingParams, lat: &Lattice, mp: &MetropolisParams) -> Vec<Vec<f64>> {
    let mut cfg = Configuration::identity(lat, &p.group);
    let mut out = Vec::new();
    run_chain(&mut cfg, p, lat, mp, 0, |_, c| out.push(plaquette_traces(c, lat, p.group.n()))).unwrap();
    out
}

// 1. Casimir and Ricci constants, K_S and the coupling thresholds.
fn constants() -> Outcome {
    let mut worst_casimir: f64 = 0.0;
    let mut worst_ricci: f64 = 0.0;
    let mut rng = key(1).rng(0, 0);
    for g in groups(2..=8) {
        let n = g.n() as f64;
        let (closed_casimir, alpha) = match g.kind() {
            GroupKind::SO => (-(n - 1.0) / 2.0, 1.0),
            GroupKind::SU => (-(n * n - 1.0) / n, 2.0),
        };
        let basis = orthonormal_basis(&g);
        let mut sum = Mat::zeros(g.n());
        for v in &basis {
            sum += &(v.matrix() * v.matrix());
        }
        let target = Mat::identity(g.n()).scale(closed_casimir);
        worst_casimir = worst_casimir.max(common::max_entry_diff(&sum, &target));
        worst_casimir = worst_casimir.max((g.casimir() - closed_casimir).abs());
        // Ric(u, u) = |ad_u|^2 / 4 for a bi-invariant metric
        let closed_ricci = alpha * (n + 2.0) / 4.0 - 1.0;
        for _ in 0..5 {
            let u = brownian_increment(&g, 1.0, &mut rng);
            let u = u.scale(1.0 / u.norm());
            let ad: f64 = basis.iter().map(|v| u.bracket(v).norm().powi(2)).sum::<f64>() / 4.0;
            worst_ricci = worst_ricci.max((ad - closed_ricci).abs());
        }
        worst_ricci = worst_ricci.max((g.ricci() - closed_ricci).abs());
    }

    let mut arithmetic = true;
    for g in groups(2..=8) {
        let n = g.n() as f64;
        for d in 2..=4 {
            let dm1 = (d - 1) as f64;
            for beta in [0.0, 0.001, -0.004, 0.01, 0.05] {
                let p = derive_constants(g, beta, d).unwrap();
                let k_s = g.ricci() - 8.0 * n * beta.abs() * dm1;
                let threshold = g.ricci().max(0.0) / (8.0 * n * dm1);
                arithmetic &= (p.k_s - k_s).abs() <= 1e-15;
                arithmetic &= (p.beta_threshold - threshold).abs() <= 1e-15;
                arithmetic &= p.admissible == (k_s > 0.0);
            }
        }
    }
    let so3 = derive_constants(GroupSpec::so(3).unwrap(), 0.0, 2).unwrap();
    let example = (so3.beta_threshold - 1.0 / 96.0).abs() <= 1e-17;
    let passed = worst_casimir <= 1e-12 && worst_ricci <= 1e-12 && arithmetic && example;
    Outcome::new(
        passed,
        format!(
            "casimir residual {worst_casimir:.1e}, ricci residual {worst_ricci:.1e}, K_S arithmetic {}, SO(3) d=2 threshold {:.6}",
            if arithmetic { "exact" } else { "MISMATCH" },
            so3.beta_threshold
        ),
    )
}

fn moved(cfg: &Configuration, v: &[AlgebraElement], t: f64) -> Configuration {
    Configuration::from_links(cfg.links().iter().zip(v).map(|(q, x)| q.left_mul(&exp_map(&x.scale(t)))).collect())
}

// 2. Drift against finite differences, Hessian against second differences,
// and the Hessian bound over random probes.
fn gradient_hessian() -> Outcome {
    let beta = 0.3;
    let mut drift_err: f64 = 0.0;
    let mut hess_err: f64 = 0.0;
    let mut probes = 0;
    let mut violations = 0;
    let mut drift_violations = 0;
    for (i, g) in [GroupSpec::so(3), GroupSpec::su(2), GroupSpec::su(3)].map(|g| g.unwrap()).iter().enumerate() {
        for d in [2, 3] {
            let p = derive_constants(*g, beta, d).unwrap();
            let lat = lattice(d, if d == 2 { 3 } else { 2 });
            let case_key = key(200 + 10 * i as u64 + d as u64);
            let mut rng = case_key.rng(0, 0);
            for case in 0..100 {
                let cfg = Configuration::haar(&lat, g, case_key.child(case));
                let e = rng.random_range(0..lat.edge_count());
                let mut v = vec![AlgebraElement::zero(g.n()); lat.edge_count()];
                v[e] = brownian_increment(g, 1.0, &mut rng);
                let h = 1e-4;
                let fd = (action_value(&moved(&cfg, &v, h), &p, &lat) - action_value(&moved(&cfg, &v, -h), &p, &lat)) / (2.0 * h);
                drift_err = drift_err.max(rel_err(drift_algebra(&cfg, e, &p, &lat).inner(&v[e]), fd));
            }
            for case in 0..10 {
                let cfg = Configuration::haar(&lat, g, case_key.child(1000 + case));
                let v: Vec<AlgebraElement> = (0..lat.edge_count()).map(|_| brownian_increment(g, 1.0, &mut rng)).collect();
                let s = |t: f64| action_value(&moved(&cfg, &v, t), &p, &lat);
                let second = |h: f64| (s(h) - 2.0 * s(0.0) + s(-h)) / (h * h);
                let fd = (4.0 * second(5e-3) - second(1e-2)) / 3.0;
                hess_err = hess_err.max(rel_err(hessian_quadratic_form(&cfg, &v, &p, &lat), fd));
            }
            // Hessian bound, with couplings well outside the admissible range
            let bound_drift = drift_bound(&p);
            for case in 0..1700 {
                let probe_beta = rng.random_range(-1.0..1.0);
                let q = derive_constants(*g, probe_beta, d).unwrap();
                let cfg = Configuration::haar(&lat, g, case_key.child(10_000 + case));
                let v: Vec<AlgebraElement> = (0..lat.edge_count()).map(|_| brownian_increment(g, 1.0, &mut rng)).collect();
                if hessian_quadratic_form(&cfg, &v, &q, &lat).abs() > hessian_bound(&q, tangent_norm_sq(&v)) * (1.0 + 1e-12) {
                    violations += 1;
                }
                let e = case as usize % lat.edge_count();
                if drift_algebra(&cfg, e, &p, &lat).norm() > bound_drift * (1.0 + 1e-12) {
                    drift_violations += 1;
                }
                probes += 1;
            }
        }
    }
    let passed = drift_err <= 1e-6 && hess_err <= 1e-5 && violations == 0 && drift_violations == 0 && probes >= 10_000;
    Outcome::new(
        passed,
        format!(
            "drift rel err {drift_err:.1e} (600 cases), Hessian rel err {hess_err:.1e}, bound violations {violations}/{probes}, drift bound violations {drift_violations}"
        ),
    )
}

// 3. Entry covariances of Brownian increments.
fn noise_covariance() -> Outcome {
    let h = 0.01;
    let draws = 1_000_000;
    let mut worst_z: f64 = 0.0;
    let mut checked = 0;
    for (gi, g) in [GroupSpec::so(3), GroupSpec::so(4), GroupSpec::su(2), GroupSpec::su(3)].map(|g| g.unwrap()).iter().enumerate() {
        let n = g.n();
        let delta = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
        let expected = |i: usize, j: usize, k: usize, l: usize| match g.kind() {
            GroupKind::SO => 0.5 * (delta(i, k) * delta(j, l) - delta(i, l) * delta(j, k)) * h,
            GroupKind::SU => (-delta(i, l) * delta(j, k) + delta(i, j) * delta(k, l) / n as f64) * h,
        };
        let quads: Vec<(usize, usize, usize, usize)> = [
            (0, 1, 1, 0),
            (0, 1, 0, 1),
            (0, 0, 1, 1),
            (0, 0, 0, 0),
            (1, 0, 1, 0),
            (0, 1, 1, 1),
            (n - 1, 0, 0, n - 1),
            (0, n - 1, 1, 0),
        ]
        .into_iter()
        .collect();
        let mut sums = vec![(Complex64::new(0.0, 0.0), 0.0f64, 0.0f64); quads.len()];
        let mut rng = key(300 + gi as u64).rng(0, 0);
        for _ in 0..draws {
            let b = brownian_increment(g, h, &mut rng);
            let m = b.matrix();
            for (s, &(i, j, k, l)) in sums.iter_mut().zip(&quads) {
                let prod = m[(i, j)] * m[(k, l)];
                s.0 += prod;
                s.1 += prod.re * prod.re;
                s.2 += prod.im * prod.im;
            }
        }
        let nd = draws as f64;
        for (s, &(i, j, k, l)) in sums.iter().zip(&quads) {
            let mean = s.0 / nd;
            let se_re = ((s.1 / nd - mean.re * mean.re) / nd).sqrt();
            let se_im = ((s.2 / nd - mean.im * mean.im) / nd).sqrt();
            let target = expected(i, j, k, l);
            for (dev, se) in [(mean.re - target, se_re), (mean.im, se_im)] {
                let z = if se > 0.0 { dev.abs() / se } else if dev.abs() < 1e-15 { 0.0 } else { f64::INFINITY };
                worst_z = worst_z.max(z);
            }
            checked += 1;
        }
    }
    Outcome::new(
        worst_z <= 4.0,
        format!("{checked} entry covariances over SO(3), SO(4), SU(2), SU(3), 10^6 increments each, worst deviation {worst_z:.2} se"),
    )
}

// 4. Langevin time averages against Metropolis, and the Haar value at beta = 0.
fn stationarity() -> Outcome {
    let g = GroupSpec::so(3).unwrap();
    let lat = lattice(2, 4);
    let haar = single_edge_quadrature(&g, 0.0, TraceObservable::ReTr).unwrap() / 3.0;
    let mut passed = true;
    let mut parts = Vec::new();
    for (bi, beta) in [0.0, 0.05].into_iter().enumerate() {
        let p = derive_constants(g, beta, 2).unwrap();
        let integ = IntegratorParams {
            step_size: 0.004,
            n_steps: 500_000,
            reunitarize_every: 64,
            seed: 40 + bi as u64,
        };
        let mut chain = LangevinChain::new(Configuration::identity(&lat, &g));
        let mut lv = Vec::new();
        run(&mut chain, &p, &lat, &integ, Schedule { burn_in: 2_500, thin: 25 }, |_, c| lv.push(plaquette_average(c, &lat, 3))).unwrap();
        let lv = estimate(&lv).unwrap();

        let mut cfg = Configuration::identity(&lat, &g);
        let mut mc = Vec::new();
        run_chain(&mut cfg, &p, &lat, &metropolis(2.0, 100_000, 1_000, 5, 50 + bi as u64), 0, |_, c| {
            mc.push(plaquette_average(c, &lat, 3))
        })
        .unwrap();
        let mc = estimate(&mc).unwrap();
        let mut ok = agree(&lv, &mc, 3.0);
        if beta == 0.0 {
            ok &= (lv.mean - haar).abs() <= 3.0 * lv.stderr && (mc.mean - haar).abs() <= 3.0 * mc.stderr;
        }
        passed &= ok;
        parts.push(format!(
            "beta={beta}: langevin {:.5}({:.5}) metropolis {:.5}({:.5})",
            lv.mean, lv.stderr, mc.mean, mc.stderr
        ));
    }
    parts.push(format!("haar {haar:.1e}"));
    Outcome::new(passed, parts.join(", "))
}

// 5. Plaquette variance against the Poincare bound, with L-stability.
fn variance_bound() -> Outcome {
    let beta = 0.005;
    let mut passed = true;
    let mut parts = Vec::new();
    for (gi, g) in [GroupSpec::so(3), GroupSpec::so(5)].map(|g| g.unwrap()).iter().enumerate() {
        let p = derive_constants(*g, beta, 2).unwrap();
        let mut reports = Vec::new();
        for l in [6, 8] {
            let lat = lattice(2, l);
            let traces = metropolis_traces(&p, &lat, &metropolis(1.5, 12_000, 1_000, 2, 60 + 10 * gi as u64 + l as u64));
            reports.push(variance_bound_check(&traces, 4, &p).unwrap());
        }
        let stable = agree(&reports[0].estimate, &reports[1].estimate, 3.0);
        let ok = reports.iter().all(|r| r.verdict == Verdict::Pass) && stable;
        passed &= ok;
        parts.push(format!(
            "{}: var L=6 {:.5}({:.5}) L=8 {:.5}({:.5}) upper {:.5} <= bound {:.3}",
            g.name(),
            reports[0].estimate.mean,
            reports[0].estimate.stderr,
            reports[1].estimate.mean,
            reports[1].estimate.stderr,
            reports[0].upper.max(reports[1].upper),
            reports[0].bound
        ));
    }
    Outcome::new(passed, parts.join("; "))
}

// 6. Contraction of coupled pairs in the weighted distance.
fn contraction() -> Outcome {
    let p = derive_constants(GroupSpec::so(3).unwrap(), 0.005, 2).unwrap();
    let lat = lattice(2, 4);
    let setup = |kind| ContractionSetup {
        a: 1.2,
        n_pairs: 64,
        record_every: 50,
        kind,
        bootstrap: 1000,
    };
    let integ = |n_steps| IntegratorParams {
        step_size: 0.005,
        n_steps,
        reunitarize_every: 64,
        seed: 70,
    };
    let pt = contraction_experiment(&p, &lat, &integ(1000), &setup(CouplingKind::ParallelTransport)).unwrap();
    let sync = contraction_experiment(&p, &lat, &integ(500), &setup(CouplingKind::Synchronous)).unwrap();
    Outcome::new(
        pt.ci_high < 0.0,
        format!(
            "parallel transport rate {:.4} CI [{:.4}, {:.4}]; synchronous rate {:.2e} CI [{:.2e}, {:.2e}]; 2K~_S = {:.4} (not compared)",
            pt.rate, pt.ci_low, pt.ci_high, sync.rate, sync.ci_low, sync.ci_high, pt.two_tilde_k
        ),
    )
}

// 7. Plaquette covariance decay with separation.
fn covariance_decay_check() -> Outcome {
    let p = derive_constants(GroupSpec::so(3).unwrap(), 0.008, 2).unwrap();
    let lat = lattice(2, 12);
    let traces = metropolis_traces(&p, &lat, &metropolis(1.5, 20_000, 1_000, 2, 80));
    let r = covariance_decay(&traces, &lat, &[1, 2, 3, 4, 5, 6]).unwrap();
    let covs: Vec<String> = r
        .separations
        .iter()
        .zip(&r.covariances)
        .map(|(s, c)| format!("r={s}: {:.1e}({:.1e})", c.mean, c.stderr))
        .collect();
    Outcome::new(
        r.verdict != Verdict::Fail,
        format!("verdict {}; {}; fitted {:?}", r.verdict, covs.join(" "), r.fitted),
    )
}

// 8. Plaquette variance falls with N.
fn factorization_trend() -> Outcome {
    let ns = [2usize, 3, 4, 6, 8];
    let lat = lattice(2, 4);
    let mut vars = Vec::new();
    let mut parts = Vec::new();
    for &n in &ns {
        let p = derive_constants(GroupSpec::su(n).unwrap(), 0.005, 2).unwrap();
        let traces = metropolis_traces(&p, &lat, &metropolis(1.5, 6_000, 500, 2, 90 + n as u64));
        let v = translate_averaged_variance(&traces).unwrap();
        parts.push(format!("N={n}: {:.5}({:.5})", v.mean, v.stderr));
        vars.push(v.mean);
    }
    let x: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    let (tau, pv) = kendall_tau_decreasing(&x, &vars).unwrap();
    Outcome::new(
        tau < 0.0 && pv < 0.05,
        format!("SU(N) Var(W/N) {}; Kendall tau {tau:.2}, p = {pv:.4}", parts.join(" ")),
    )
}

fn main() {
    let criteria: [(u32, &str, fn() -> Outcome); 8] = [
        (1, "constants", constants),
        (2, "gradient and Hessian", gradient_hessian),
        (3, "noise covariance", noise_covariance),
        (4, "stationarity cross-validation", stationarity),
        (5, "Poincare variance bound", variance_bound),
        (6, "coupled contraction", contraction),
        (7, "covariance decay", covariance_decay_check),
        (8, "large-N factorization trend", factorization_trend),
    ];
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failures = 0;
    for (id, name, check) in criteria {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Outcome::new(false, format!("panicked: {msg}"))
        });
        if !outcome.passed {
            failures += 1;
        }
        println!(
            "{} criterion {id} {name} ({}) [{:.1}s]",
            if outcome.passed { "PASS" } else { "FAIL" },
            outcome.detail,
            start.elapsed().as_secs_f64()
        );
    }
    if failures > 0 {
        std::process::exit(1);
    }
}
