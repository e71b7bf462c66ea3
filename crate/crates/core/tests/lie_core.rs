mod common;

use common::{mean_se, within};
use lattice_ym::group::{
    bracket_table, brownian_increment, exp_map, geodesic_distance, haar_sample, log_map, orthonormal_basis, reunitarize,
    AlgebraElement, GroupElement, GroupKind, GroupSpec,
};
use lattice_ym::linalg::Mat;
use lattice_ym::rng::{streams, StreamKey};
use proptest::prelude::*;
use rand::Rng;

fn specs() -> Vec<GroupSpec> {
    let mut v = Vec::new();
    for n in 2..=8 {
        v.push(GroupSpec::so(n).unwrap());
        v.push(GroupSpec::su(n).unwrap());
    }
    v
}

fn key(i: u64) -> StreamKey {
    StreamKey::new(0xa11e, streams::TESTING).child(i)
}

#[test]
fn constants_follow_closed_forms() {
    for g in specs() {
        let n = g.n() as f64;
        let (dim, cas, alpha) = match g.kind() {
            GroupKind::SO => (n * (n - 1.0) / 2.0, -(n - 1.0) / 2.0, 1.0),
            GroupKind::SU => (n * n - 1.0, -(n * n - 1.0) / n, 2.0),
        };
        assert_eq!(g.algebra_dim() as f64, dim);
        assert!((g.casimir() - cas).abs() < 1e-15);
        assert!((g.ricci() - (alpha * (n + 2.0) / 4.0 - 1.0)).abs() < 1e-15);
        assert_eq!(orthonormal_basis(&g).len(), g.algebra_dim());
    }
}

#[test]
fn haar_moments_match_weyl_values() {
    let so3 = GroupSpec::so(3).unwrap();
    let su2 = GroupSpec::su(2).unwrap();
    let mut rng = key(1).rng(0, 0);
    let n = 1_000_000;
    let mut q11 = Vec::with_capacity(n);
    let mut q11_sq = Vec::with_capacity(n);
    let mut tr = Vec::with_capacity(n);
    for _ in 0..n {
        let q = haar_sample(&so3, &mut rng);
        let x = q.matrix()[(0, 0)].re;
        q11.push(x);
        q11_sq.push(x * x);
        tr.push(haar_sample(&su2, &mut rng).matrix().trace().re);
    }
    assert!(within(mean_se(&q11), 0.0, 4.0));
    assert!(within(mean_se(&q11_sq), 1.0 / 3.0, 4.0));
    assert!(within(mean_se(&tr), 0.0, 4.0));
}

#[test]
fn haar_is_invariant_under_translation() {
    // E[Re Q_00] and E[|Q_01|^2] for Q, RQ and QR must agree
    let g = GroupSpec::su(3).unwrap();
    let mut rng = key(2).rng(0, 0);
    let r = haar_sample(&g, &mut rng);
    let n = 200_000;
    let (mut plain, mut left, mut right) = (Vec::new(), Vec::new(), Vec::new());
    for _ in 0..n {
        let q = haar_sample(&g, &mut rng);
        let f = |m: &GroupElement| m.matrix()[(0, 1)].norm_sqr();
        plain.push(f(&q));
        left.push(f(&r.mul(&q)));
        right.push(f(&q.mul(&r)));
    }
    for s in [&plain, &left, &right] {
        assert!(within(mean_se(s), 1.0 / 3.0, 4.0));
    }
}

#[test]
fn brownian_increments_are_isotropic() {
    let g = GroupSpec::su(3).unwrap();
    let mut rng = key(3).rng(0, 0);
    let x = brownian_increment(&g, 1.0, &mut rng);
    let y = brownian_increment(&g, 1.0, &mut rng);
    let h = 0.3;
    let n = 200_000;
    let mut prod = Vec::with_capacity(n);
    let mut first = Vec::with_capacity(n);
    for _ in 0..n {
        let b = brownian_increment(&g, h, &mut rng);
        first.push(b.inner(&x));
        prod.push(b.inner(&x) * b.inner(&y));
    }
    assert!(within(mean_se(&first), 0.0, 4.0));
    assert!(within(mean_se(&prod), h * x.inner(&y), 4.0));
}

#[test]
fn exp_log_round_trip_on_small_elements() {
    let mut worst: f64 = 0.0;
    for (i, g) in specs().into_iter().enumerate() {
        let mut rng = key(4).rng(0, i as u64);
        for _ in 0..1000 / 14 + 1 {
            let x = brownian_increment(&g, 1.0, &mut rng);
            let x = x.scale(rng.random_range(0.0..1.0) / x.norm());
            let q = exp_map(&x);
            assert!(q.matrix().unitarity_defect() <= 1e-12);
            worst = worst.max(log_map(&g, &q).unwrap().sub(&x).norm());
        }
    }
    assert!(worst <= 1e-9, "{worst}");
}

/// Length of `t -> exp(tX) Q` measured by summing Frobenius chords.
fn chord_length(x: &AlgebraElement, q: &GroupElement, steps: usize) -> f64 {
    let mut prev = *q.matrix();
    let mut total = 0.0;
    for k in 1..=steps {
        let t = k as f64 / steps as f64;
        let next = *exp_map(&x.scale(t)).mul(q).matrix();
        total += (&next - &prev).norm_fro();
        prev = next;
    }
    total
}

#[test]
fn geodesic_distance_matches_path_length() {
    for (i, g) in [GroupSpec::so(3).unwrap(), GroupSpec::su(2).unwrap(), GroupSpec::su(3).unwrap()].iter().enumerate() {
        let mut rng = key(5).rng(0, i as u64);
        for _ in 0..34 {
            let q = haar_sample(g, &mut rng);
            let x = brownian_increment(g, 1.0, &mut rng);
            let x = x.scale(rng.random_range(0.1..2.0) / x.norm());
            let q2 = exp_map(&x).mul(&q);
            let rho = geodesic_distance(g, &q, &q2).unwrap();
            let y = log_map(g, &q2.mul(&q.inverse())).unwrap();
            let len = chord_length(&y, &q, 10_000);
            assert!((rho - len).abs() <= 0.01 * len, "{rho} vs {len}");
        }
    }
}

#[test]
fn geodesic_distance_is_a_bi_invariant_metric() {
    let g = GroupSpec::so(4).unwrap();
    let mut rng = key(6).rng(0, 0);
    let near = |rng: &mut rand_chacha::ChaCha8Rng, q: &GroupElement| {
        let x = brownian_increment(&g, 1.0, rng);
        exp_map(&x.scale(0.8 / x.norm())).mul(q)
    };
    for _ in 0..100 {
        let a = haar_sample(&g, &mut rng);
        let b = near(&mut rng, &a);
        let c = near(&mut rng, &b);
        let r = haar_sample(&g, &mut rng);
        let d = |p: &GroupElement, q: &GroupElement| geodesic_distance(&g, p, q).unwrap();
        assert_eq!(d(&a, &a), 0.0);
        assert!((d(&a, &b) - d(&b, &a)).abs() < 1e-10);
        assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c) + 1e-10);
        assert!((d(&r.mul(&a), &r.mul(&b)) - d(&a, &b)).abs() < 1e-10);
        assert!((d(&a.mul(&r), &b.mul(&r)) - d(&a, &b)).abs() < 1e-10);
    }
}

#[test]
fn bracket_tables_of_all_groups() {
    for g in specs().into_iter().filter(|g| g.n() <= 5) {
        let t = bracket_table(&g);
        assert!(t.antisymmetry_residual() <= 1e-12);
        assert!(t.jacobi_residual() <= 1e-12);
        for a in 0..t.dim() {
            assert!(t.get(a, a).iter().all(|c| c.abs() < 1e-15));
        }
    }
}

#[test]
fn reunitarize_recovers_perturbed_elements() {
    for (i, g) in specs().into_iter().enumerate() {
        let mut rng = key(7).rng(0, i as u64);
        let q = haar_sample(&g, &mut rng);
        let eps = Mat::from_fn(g.n(), |_, _| num_complex::Complex64::new(rng.random_range(-1e-6..1e-6), 0.0));
        let r = reunitarize(&g, &(q.matrix() + &(q.matrix() * &eps))).unwrap();
        assert!(r.matrix().unitarity_defect() <= 1e-13);
        assert!((r.matrix().det().re - 1.0).abs() < 1e-12);
        assert!((r.matrix() - q.matrix()).norm_fro() < 1e-5);
    }
}

fn group_strategy() -> impl Strategy<Value = GroupSpec> {
    (prop::bool::ANY, 2usize..=8).prop_map(|(so, n)| if so { GroupSpec::so(n).unwrap() } else { GroupSpec::su(n).unwrap() })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn algebra_elements_are_skew_and_traceless(g in group_strategy(), seed in any::<u64>()) {
        let mut rng = StreamKey::new(seed, streams::TESTING).rng(0, 0);
        let x = brownian_increment(&g, 1.0, &mut rng);
        let m = x.matrix();
        prop_assert!((m + &m.adjoint()).norm_fro() <= 1e-12);
        if g.kind() == GroupKind::SU {
            prop_assert!(m.trace().norm() <= 1e-12);
        }
        prop_assert!(AlgebraElement::try_new(&g, *m).is_ok());
    }

    #[test]
    fn exponentials_are_group_elements(g in group_strategy(), seed in any::<u64>(), scale in 0.0f64..10.0) {
        let mut rng = StreamKey::new(seed, streams::TESTING).rng(0, 0);
        let x = brownian_increment(&g, 1.0, &mut rng);
        let q = exp_map(&x.scale(scale / x.norm().max(1e-300)));
        prop_assert!(q.matrix().unitarity_defect() <= 1e-12);
        prop_assert!((q.matrix().det() - num_complex::Complex64::new(1.0, 0.0)).norm() <= 1e-8);
        prop_assert!(GroupElement::try_new(&g, *q.matrix()).is_ok());
    }

    #[test]
    fn coordinates_round_trip(g in group_strategy(), seed in any::<u64>()) {
        let mut rng = StreamKey::new(seed, streams::TESTING).rng(0, 0);
        let x = brownian_increment(&g, 1.0, &mut rng);
        let y = AlgebraElement::from_coordinates(&g, &x.coordinates(&g));
        prop_assert!(y.sub(&x).norm() <= 1e-12);
    }
}
