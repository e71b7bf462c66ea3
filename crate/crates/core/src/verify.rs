//! Deterministic self-checks behind the `verify` subcommand. Each check
//! compares an implemented formula with an independent evaluation: the
//! algebra basis against its defining identities, derivatives against
//! finite differences of the action, quadrature against a Bessel series.

use rand::Rng;

use crate::action::{
    action_value, derive_constants, drift_algebra, hessian_bound, hessian_quadratic_form, tangent_norm_sq, Configuration,
    CouplingParams,
};
use crate::gibbs::{single_edge_quadrature, TraceObservable};
use crate::group::{
    bracket_table_from_basis, brownian_increment, exp_map, log_map, orthonormal_basis, AlgebraElement, GroupKind, GroupSpec,
};
use crate::lattice::{Lattice, LatticeSpec};
use crate::linalg::{Mat, MAX_N};
use crate::observables::{wilson_loop, wilson_loop_gradient};
use crate::rng::{streams, StreamKey};

const SEED: u64 = 0x5eed;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl std::fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {} ({})", self.name, self.detail)
    }
}

/// Deliberate corruptions used to confirm that the checks can fail.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Faults {
    /// Multiplies every basis element before the basis checks.
    pub basis_scale: f64,
}

impl Default for Faults {
    fn default() -> Self {
        Self { basis_scale: 1.0 }
    }
}

fn all_groups() -> Vec<GroupSpec> {
    [GroupKind::SO, GroupKind::SU]
        .into_iter()
        .flat_map(|k| (2..=MAX_N).map(move |n| GroupSpec::new(k, n).expect("supported size")))
        .collect()
}

fn basis(g: &GroupSpec, faults: &Faults) -> Vec<AlgebraElement> {
    orthonormal_basis(g).into_iter().map(|v| v.scale(faults.basis_scale)).collect()
}

fn outcome(name: &'static str, worst: f64, tol: f64, what: &str) -> CheckOutcome {
    CheckOutcome {
        name,
        passed: worst <= tol,
        detail: format!("{what} {worst:.3e}, tolerance {tol:.0e}"),
    }
}

pub fn run_checks(faults: &Faults) -> Vec<CheckOutcome> {
    vec![
        check_basis_orthonormal(faults),
        check_casimir(faults),
        check_ricci(faults),
        check_brackets(faults),
        check_coupling_constants(),
        check_exp_log(),
        check_drift_gradient(),
        check_hessian(),
        check_loop_gradient(),
        check_quadrature(),
    ]
}

fn check_basis_orthonormal(faults: &Faults) -> CheckOutcome {
    let mut worst: f64 = 0.0;
    for g in all_groups() {
        let b = basis(&g, faults);
        for (i, x) in b.iter().enumerate() {
            for (j, y) in b.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((x.inner(y) - target).abs());
            }
        }
    }
    outcome("basis_orthonormality", worst, 1e-12, "max Gram residual")
}

fn check_casimir(faults: &Faults) -> CheckOutcome {
    let mut worst: f64 = 0.0;
    for g in all_groups() {
        let n = g.n();
        let mut sum = Mat::zeros(n);
        for v in basis(&g, faults) {
            sum += &(v.matrix() * v.matrix());
        }
        let target = Mat::identity(n).scale(g.casimir());
        worst = worst.max((&sum - &target).norm_fro());
    }
    outcome("casimir_identity", worst, 1e-12, "max |sum v_a^2 - c I|")
}

/// `Ric(X, X) = 1/4 sum_a |[X, v_a]|^2` for a bi-invariant metric.
fn check_ricci(faults: &Faults) -> CheckOutcome {
    let key = StreamKey::new(SEED, streams::TESTING);
    let mut worst: f64 = 0.0;
    for (i, g) in all_groups().into_iter().enumerate() {
        let alpha = if g.kind() == GroupKind::SO { 1.0 } else { 2.0 };
        let formula = alpha * (g.n() as f64 + 2.0) / 4.0 - 1.0;
        worst = worst.max((formula - g.ricci()).abs());
        let b = basis(&g, faults);
        let mut rng = key.rng(1, i as u64);
        for _ in 0..3 {
            let x = brownian_increment(&g, 1.0, &mut rng);
            let ric: f64 = b.iter().map(|v| x.bracket(v).norm().powi(2)).sum::<f64>() / 4.0;
            worst = worst.max((ric - g.ricci() * x.inner(&x)).abs() / x.inner(&x));
        }
    }
    outcome("ricci_constant", worst, 1e-10, "max relative residual")
}

fn check_brackets(faults: &Faults) -> CheckOutcome {
    let mut worst: f64 = 0.0;
    for g in all_groups().into_iter().filter(|g| g.n() <= 4) {
        let t = bracket_table_from_basis(&basis(&g, faults));
        worst = worst.max(t.antisymmetry_residual()).max(t.jacobi_residual());
    }
    outcome("bracket_structure", worst, 1e-12, "max antisymmetry/Jacobi residual")
}

fn check_coupling_constants() -> CheckOutcome {
    let mut worst: f64 = 0.0;
    let so3 = GroupSpec::so(3).expect("SO(3)");
    let cases = [
        (so3, 0.0, 2, 0.25, 1.0 / 96.0),
        (so3, 0.005, 2, 0.25 - 0.12, 1.0 / 96.0),
        (GroupSpec::su(3).expect("SU(3)"), 0.0, 4, 1.5, 1.0 / 48.0),
        (GroupSpec::so(5).expect("SO(5)"), 0.005, 2, 0.75 - 0.2, 1.0 / 32.0 - 1.0 / 80.0),
    ];
    for (g, beta, d, k_s, threshold) in cases {
        let p = derive_constants(g, beta, d).expect("valid constants");
        worst = worst.max((p.k_s - k_s).abs()).max((p.beta_threshold - threshold).abs());
    }
    outcome("coupling_constants", worst, 1e-15, "max deviation")
}

fn check_exp_log() -> CheckOutcome {
    let key = StreamKey::new(SEED, streams::TESTING);
    let mut worst: f64 = 0.0;
    for (i, g) in all_groups().into_iter().enumerate() {
        let mut rng = key.rng(2, i as u64);
        for _ in 0..10 {
            let x = brownian_increment(&g, 1.0, &mut rng);
            // keep every eigenangle well inside (-pi, pi)
            let x = x.scale(rng.random_range(0.1..2.5) / x.norm());
            match log_map(&g, &exp_map(&x)) {
                Ok(y) => worst = worst.max(y.sub(&x).norm()),
                Err(_) => worst = f64::INFINITY,
            }
        }
    }
    outcome("exp_log_roundtrip", worst, 1e-10, "max |log exp X - X|")
}

fn probe_setups() -> Vec<(CouplingParams, Lattice)> {
    let mut out = Vec::new();
    for g in [GroupSpec::so(3), GroupSpec::su(2), GroupSpec::su(3)] {
        let g = g.expect("supported group");
        for d in [2, 3] {
            let l = if d == 2 { 3 } else { 2 };
            out.push((
                derive_constants(g, 0.3, d).expect("valid constants"),
                Lattice::new(LatticeSpec::new(d, l).expect("valid lattice")),
            ));
        }
    }
    out
}

fn moved(cfg: &Configuration, v: &[AlgebraElement], t: f64) -> Configuration {
    let links = cfg
        .links()
        .iter()
        .zip(v)
        .map(|(q, x)| q.left_mul(&exp_map(&x.scale(t))))
        .collect();
    Configuration::from_links(links)
}

fn check_drift_gradient() -> CheckOutcome {
    let key = StreamKey::new(SEED, streams::TESTING);
    let mut worst: f64 = 0.0;
    for (i, (p, lat)) in probe_setups().into_iter().enumerate() {
        let cfg = Configuration::haar(&lat, &p.group, key.child(i as u64));
        let mut rng = key.rng(3, i as u64);
        for _ in 0..10 {
            let e = rng.random_range(0..lat.edge_count());
            let y = brownian_increment(&p.group, 1.0, &mut rng);
            let mut v = vec![AlgebraElement::zero(p.group.n()); lat.edge_count()];
            v[e] = y;
            let h = 1e-4;
            let fd = (action_value(&moved(&cfg, &v, h), &p, &lat) - action_value(&moved(&cfg, &v, -h), &p, &lat)) / (2.0 * h);
            let an = drift_algebra(&cfg, e, &p, &lat).inner(&y);
            worst = worst.max((fd - an).abs() / an.abs().max(1e-3));
        }
    }
    outcome("drift_gradient", worst, 1e-6, "max relative error vs central differences")
}

fn check_hessian() -> CheckOutcome {
    let key = StreamKey::new(SEED, streams::TESTING);
    let mut worst: f64 = 0.0;
    let mut violations = 0;
    for (i, (p, lat)) in probe_setups().into_iter().enumerate() {
        let mut rng = key.rng(4, i as u64);
        for k in 0..5 {
            let cfg = Configuration::haar(&lat, &p.group, key.child(100 + 10 * i as u64 + k));
            let v: Vec<AlgebraElement> = (0..lat.edge_count()).map(|_| brownian_increment(&p.group, 1.0, &mut rng)).collect();
            let an = hessian_quadratic_form(&cfg, &v, &p, &lat);
            let s = |t: f64| action_value(&moved(&cfg, &v, t), &p, &lat);
            let second = |h: f64| (s(h) - 2.0 * s(0.0) + s(-h)) / (h * h);
            let fd = (4.0 * second(5e-3) - second(1e-2)) / 3.0;
            worst = worst.max((fd - an).abs() / an.abs().max(1e-3));
            if an.abs() > hessian_bound(&p, tangent_norm_sq(&v)) {
                violations += 1;
            }
        }
    }
    let mut o = outcome("hessian_insertion", worst, 1e-5, "max relative error vs second differences");
    if violations > 0 {
        o.passed = false;
        o.detail.push_str(&format!("; {violations} Hessian bound violations"));
    }
    o
}

fn check_loop_gradient() -> CheckOutcome {
    let key = StreamKey::new(SEED, streams::TESTING);
    let mut worst: f64 = 0.0;
    for (i, (p, lat)) in probe_setups().into_iter().enumerate() {
        let cfg = Configuration::haar(&lat, &p.group, key.child(200 + i as u64));
        let word = lat.rectangle(0, 0, 1, 2, 1).expect("rectangle fits");
        let mut rng = key.rng(5, i as u64);
        for &se in word.edges() {
            let y = brownian_increment(&p.group, 1.0, &mut rng);
            let mut v = vec![AlgebraElement::zero(p.group.n()); lat.edge_count()];
            v[se.edge] = y;
            let h = 1e-4;
            let w = |t: f64| wilson_loop(&moved(&cfg, &v, t), &word).re;
            let fd = (w(h) - w(-h)) / (2.0 * h);
            let an = wilson_loop_gradient(&cfg, &p.group, &word, se.edge).inner(&y);
            worst = worst.max((fd - an).abs() / an.abs().max(1e-3));
        }
    }
    outcome("wilson_loop_gradient", worst, 1e-6, "max relative error vs central differences")
}

/// Modified Bessel function of the first kind by its power series.
pub fn bessel_i(nu: u32, x: f64) -> f64 {
    let half = x / 2.0;
    let mut term = half.powi(nu as i32) / (1..=nu).map(f64::from).product::<f64>();
    let mut sum = term;
    for k in 1..200 {
        term *= half * half / (k as f64 * (k + nu) as f64);
        sum += term;
        if term.abs() < 1e-18 * sum.abs() {
            break;
        }
    }
    sum
}

fn check_quadrature() -> CheckOutcome {
    let mut worst: f64 = 0.0;
    for g in [GroupSpec::so(2), GroupSpec::so(3), GroupSpec::su(2)] {
        let g = g.expect("supported group");
        let m = single_edge_quadrature(&g, 0.0, TraceObservable::Tr).unwrap_or(f64::INFINITY);
        worst = worst.max(m.abs());
    }
    let so2 = GroupSpec::so(2).expect("SO(2)");
    for c in [0.05, 0.1, 0.4, 1.0] {
        // density exp(c Tr Q) = exp(2c cos t) on the circle
        let exact = 2.0 * bessel_i(1, 2.0 * c) / bessel_i(0, 2.0 * c);
        let q = single_edge_quadrature(&so2, c, TraceObservable::Tr).unwrap_or(f64::INFINITY);
        worst = worst.max((q - exact).abs());
    }
    outcome("single_edge_quadrature", worst, 1e-10, "max deviation from Haar and Bessel references")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bessel_series_values() {
        assert!((bessel_i(0, 1.0) - 1.266_065_877_752_008_4).abs() < 1e-15);
        assert!((bessel_i(1, 1.0) - 0.565_159_103_992_485).abs() < 1e-15);
        assert_eq!(bessel_i(1, 0.0), 0.0);
    }

    #[test]
    fn all_checks_pass_and_a_bad_basis_is_caught() {
        let good = run_checks(&Faults::default());
        for o in &good {
            println!("{o}");
        }
        assert!(good.iter().all(|o| o.passed));
        let bad = run_checks(&Faults { basis_scale: 1.01 });
        let failed: Vec<_> = bad.iter().filter(|o| !o.passed).map(|o| o.name).collect();
        assert!(failed.contains(&"basis_orthonormality"));
        assert!(failed.contains(&"casimir_identity"));
    }
}
