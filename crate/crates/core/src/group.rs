//! The matrix groups SO(N), SU(N) and their Lie algebras.
//!
//! All inner products are the real Hilbert-Schmidt product
//! `<X, Y> = Re Tr(X Y^*)`. Tangent vectors at `Q` are written `X Q` with
//! `X` in the algebra (right trivialisation), which is the convention used
//! throughout the crate.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Mat, MAX_N};

/// Eigenangles at or beyond `pi - LOG_CUT_TOLERANCE` are outside the domain
/// of [`log_map`].
pub const LOG_CUT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GroupKind {
    SO,
    SU,
}

impl fmt::Display for GroupKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GroupKind::SO => "SO",
            GroupKind::SU => "SU",
        })
    }
}

/// A structure group together with the constants derived from it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupSpec {
    kind: GroupKind,
    n: usize,
    algebra_dim: usize,
    casimir: f64,
    ricci: f64,
}

impl GroupSpec {
    pub fn new(kind: GroupKind, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidGroup(format!("{kind}({n}): need N >= 2")));
        }
        if n > MAX_N {
            return Err(Error::InvalidGroup(format!(
                "{kind}({n}): matrices larger than {MAX_N}x{MAX_N} are not supported"
            )));
        }
        let nf = n as f64;
        let (algebra_dim, casimir, alpha) = match kind {
            GroupKind::SO => (n * (n - 1) / 2, -(nf - 1.0) / 2.0, 1.0),
            GroupKind::SU => (n * n - 1, -(nf * nf - 1.0) / nf, 2.0),
        };
        Ok(Self {
            kind,
            n,
            algebra_dim,
            casimir,
            ricci: alpha * (nf + 2.0) / 4.0 - 1.0,
        })
    }

    pub fn so(n: usize) -> Result<Self> {
        Self::new(GroupKind::SO, n)
    }

    pub fn su(n: usize) -> Result<Self> {
        Self::new(GroupKind::SU, n)
    }

    pub fn kind(&self) -> GroupKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Real dimension of the Lie algebra.
    pub fn algebra_dim(&self) -> usize {
        self.algebra_dim
    }

    /// The scalar `c` with `sum_a v_a^2 = c I` over an orthonormal basis.
    pub fn casimir(&self) -> f64 {
        self.casimir
    }

    /// Ricci curvature constant of the bi-invariant metric.
    pub fn ricci(&self) -> f64 {
        self.ricci
    }

    /// 1 for SO, 2 for SU.
    pub fn alpha(&self) -> f64 {
        match self.kind {
            GroupKind::SO => 1.0,
            GroupKind::SU => 2.0,
        }
    }

    pub fn name(&self) -> String {
        format!("{}({})", self.kind, self.n)
    }
}

impl fmt::Display for GroupSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.kind, self.n)
    }
}

/// An element of so(N) or su(N).
#[derive(Clone, Copy, PartialEq)]
pub struct AlgebraElement(Mat);

/// An element of SO(N) or SU(N).
#[derive(Clone, Copy, PartialEq)]
pub struct GroupElement(Mat);

impl fmt::Debug for AlgebraElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "AlgebraElement {:?}", self.0)
    }
}

impl fmt::Debug for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GroupElement {:?}", self.0)
    }
}

impl AlgebraElement {
    pub fn zero(n: usize) -> Self {
        Self(Mat::zeros(n))
    }

    /// Wraps a matrix after checking skewness (and tracelessness for SU).
    pub fn try_new(spec: &GroupSpec, m: Mat) -> Result<Self> {
        if m.n() != spec.n() {
            return Err(Error::InvalidArgument(format!(
                "matrix is {0}x{0}, group acts on {1}x{1}",
                m.n(),
                spec.n()
            )));
        }
        let skew = (&m + &m.adjoint()).norm_fro();
        if skew > 1e-12 {
            return Err(Error::InvalidArgument(format!("not skew-Hermitian (defect {skew:.3e})")));
        }
        match spec.kind() {
            GroupKind::SO if m.max_abs_imag() > 1e-12 => {
                Err(Error::InvalidArgument("so(N) elements are real".into()))
            }
            GroupKind::SU if m.trace().norm() > 1e-12 => {
                Err(Error::InvalidArgument("su(N) elements are traceless".into()))
            }
            _ => Ok(Self(m)),
        }
    }

    pub fn from_matrix_unchecked(m: Mat) -> Self {
        Self(m)
    }

    pub fn matrix(&self) -> &Mat {
        &self.0
    }

    pub fn into_matrix(self) -> Mat {
        self.0
    }

    pub fn n(&self) -> usize {
        self.0.n()
    }

    pub fn inner(&self, other: &AlgebraElement) -> f64 {
        self.0.inner(&other.0)
    }

    pub fn norm(&self) -> f64 {
        self.0.norm_fro()
    }

    pub fn add(&self, other: &AlgebraElement) -> Self {
        Self(&self.0 + &other.0)
    }

    pub fn sub(&self, other: &AlgebraElement) -> Self {
        Self(&self.0 - &other.0)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self(self.0.scale(s))
    }

    pub fn bracket(&self, other: &AlgebraElement) -> Self {
        Self(&(&self.0 * &other.0) - &(&other.0 * &self.0))
    }

    /// `sum_a c_a v_a` in the basis of [`orthonormal_basis`], filled directly.
    pub fn from_coordinates(spec: &GroupSpec, coords: &[f64]) -> Self {
        assert_eq!(coords.len(), spec.algebra_dim(), "coordinate count");
        let n = spec.n();
        let mut m = Mat::zeros(n);
        let mut it = coords.iter().copied();
        if spec.kind() == GroupKind::SU {
            for k in 1..n {
                let c = it.next().unwrap() / ((k + k * k) as f64).sqrt();
                for i in 0..k {
                    m[(i, i)].im += c;
                }
                m[(k, k)].im -= k as f64 * c;
            }
        }
        for k in 0..n {
            for l in k + 1..n {
                let e = it.next().unwrap() * FRAC_1_SQRT_2;
                m[(k, l)].re += e;
                m[(l, k)].re -= e;
                if spec.kind() == GroupKind::SU {
                    let f = it.next().unwrap() * FRAC_1_SQRT_2;
                    m[(k, l)].im += f;
                    m[(l, k)].im += f;
                }
            }
        }
        Self(m)
    }

    /// Coordinates in the basis of [`orthonormal_basis`].
    pub fn coordinates(&self, spec: &GroupSpec) -> Vec<f64> {
        orthonormal_basis(spec).iter().map(|v| self.inner(v)).collect()
    }
}

impl GroupElement {
    pub fn identity(n: usize) -> Self {
        Self(Mat::identity(n))
    }

    /// Wraps a matrix after checking unitarity and unit determinant.
    pub fn try_new(spec: &GroupSpec, m: Mat) -> Result<Self> {
        if m.n() != spec.n() {
            return Err(Error::InvalidArgument("size mismatch".into()));
        }
        let defect = m.unitarity_defect();
        let det_err = (m.det() - Complex64::new(1.0, 0.0)).norm();
        if defect > 1e-10 || det_err > 1e-8 {
            return Err(Error::NotNearGroup { defect: defect.max(det_err) });
        }
        if spec.kind() == GroupKind::SO && m.max_abs_imag() > 1e-12 {
            return Err(Error::InvalidArgument("SO(N) elements are real".into()));
        }
        Ok(Self(m))
    }

    pub fn from_matrix_unchecked(m: Mat) -> Self {
        Self(m)
    }

    pub fn matrix(&self) -> &Mat {
        &self.0
    }

    pub fn n(&self) -> usize {
        self.0.n()
    }

    pub fn inverse(&self) -> Self {
        Self(self.0.adjoint())
    }

    pub fn mul(&self, other: &GroupElement) -> Self {
        Self(&self.0 * &other.0)
    }

    /// Left action `exp(X) self` for an already exponentiated `X`.
    pub fn left_mul(&self, g: &GroupElement) -> Self {
        Self(&g.0 * &self.0)
    }
}

/// The orthonormal basis `{E_kl}` of so(N), or `{D_k} ∪ {E_kl, F_kl}` of su(N).
pub fn orthonormal_basis(spec: &GroupSpec) -> Vec<AlgebraElement> {
    let d = spec.algebra_dim();
    (0..d)
        .map(|a| {
            let mut c = vec![0.0; d];
            c[a] = 1.0;
            AlgebraElement::from_coordinates(spec, &c)
        })
        .collect()
}

/// Orthogonal projection of an arbitrary matrix onto the algebra.
pub fn project_to_algebra(spec: &GroupSpec, m: &Mat) -> AlgebraElement {
    let n = spec.n();
    assert_eq!(m.n(), n);
    match spec.kind() {
        GroupKind::SO => AlgebraElement(Mat::from_fn(n, |i, j| {
            Complex64::new(0.5 * (m[(i, j)].re - m[(j, i)].re), 0.0)
        })),
        GroupKind::SU => {
            let mut x = (m - &m.adjoint()).scale(0.5);
            let t = x.trace() / n as f64;
            for i in 0..n {
                x[(i, i)] -= t;
            }
            AlgebraElement(x)
        }
    }
}

pub fn exp_map(x: &AlgebraElement) -> GroupElement {
    GroupElement(x.0.exp())
}

/// Largest eigenangle magnitude of a group element, in `[0, pi]`.
pub fn max_eigenangle(q: &GroupElement) -> f64 {
    // (I + Q)^*(I + Q) = 2I + Q + Q^* has eigenvalues |1 + e^{i t}|^2 = 4 cos^2(t/2)
    let n = q.n();
    let mut h = &q.0 + &q.0.adjoint();
    for i in 0..n {
        h[(i, i)] += Complex64::new(2.0, 0.0);
    }
    let lo = h.hermitian_eigenvalues()[0].max(0.0);
    2.0 * (lo.sqrt() / 2.0).min(1.0).acos()
}

/// Principal logarithm. Fails when an eigenangle is within
/// [`LOG_CUT_TOLERANCE`] of `pi`, where the branch is ambiguous.
pub fn log_map(spec: &GroupSpec, q: &GroupElement) -> Result<AlgebraElement> {
    let angle = max_eigenangle(q);
    if angle >= PI - LOG_CUT_TOLERANCE {
        return Err(Error::LogDomain { angle });
    }
    let l = q.0.log().ok_or(Error::LogDomain { angle })?;
    Ok(project_to_algebra(spec, &l))
}

/// Haar-distributed element: Gram-Schmidt on a Gaussian matrix, then a
/// column rotation to land in the determinant-one component.
pub fn haar_sample<R: Rng + ?Sized>(spec: &GroupSpec, rng: &mut R) -> GroupElement {
    let n = spec.n();
    let complex = spec.kind() == GroupKind::SU;
    let mut g = Mat::zeros(n);
    for z in g.entries_mut() {
        let re: f64 = rng.sample(StandardNormal);
        *z = if complex {
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(re, im) * FRAC_1_SQRT_2
        } else {
            Complex64::new(re, 0.0)
        };
    }
    // modified Gram-Schmidt on columns; R has a positive real diagonal
    for j in 0..n {
        for k in 0..j {
            let mut dot = Complex64::new(0.0, 0.0);
            for i in 0..n {
                dot += g[(i, k)].conj() * g[(i, j)];
            }
            for i in 0..n {
                let gik = g[(i, k)];
                g[(i, j)] -= dot * gik;
            }
        }
        let norm = (0..n).map(|i| g[(i, j)].norm_sqr()).sum::<f64>().sqrt();
        for i in 0..n {
            g[(i, j)] /= norm;
        }
    }
    let det = g.det();
    // det has modulus one; rotate the first column by its conjugate phase
    let fix = if complex {
        (det / det.norm()).conj()
    } else if det.re < 0.0 {
        Complex64::new(-1.0, 0.0)
    } else {
        Complex64::new(1.0, 0.0)
    };
    for i in 0..n {
        g[(i, 0)] *= fix;
    }
    GroupElement(g)
}

/// Increment `B(h)` of the algebra Brownian motion: `sqrt(h) sum_a g_a v_a`.
pub fn brownian_increment<R: Rng + ?Sized>(spec: &GroupSpec, h: f64, rng: &mut R) -> AlgebraElement {
    assert!(h > 0.0, "step must be positive");
    let mut coords = [0.0; MAX_N * MAX_N];
    let d = spec.algebra_dim();
    let s = h.sqrt();
    for c in coords.iter_mut().take(d) {
        *c = s * rng.sample::<f64, _>(StandardNormal);
    }
    AlgebraElement::from_coordinates(spec, &coords[..d])
}

/// Bi-invariant Riemannian distance `‖log(Q' Q^{-1})‖`.
pub fn geodesic_distance(spec: &GroupSpec, q: &GroupElement, q_prime: &GroupElement) -> Result<f64> {
    if q.0.entries() == q_prime.0.entries() {
        return Ok(0.0);
    }
    let rel = GroupElement(q_prime.0.mul_adj(&q.0));
    Ok(log_map(spec, &rel)?.norm())
}

/// Nearest group element: unitary polar factor with the determinant
/// normalised to one.
pub fn reunitarize(spec: &GroupSpec, m: &Mat) -> Result<GroupElement> {
    let defect = m.unitarity_defect();
    if !(defect < 0.5) {
        return Err(Error::NotNearGroup { defect });
    }
    let mut u = m.unitary_polar().ok_or(Error::NotNearGroup { defect })?;
    match spec.kind() {
        GroupKind::SO => {
            for z in u.entries_mut() {
                z.im = 0.0;
            }
            if u.det().re < 0.0 {
                return Err(Error::NotNearGroup { defect });
            }
        }
        GroupKind::SU => {
            let det = u.det();
            let phase = Complex64::from_polar(1.0, -det.arg() / spec.n() as f64);
            u = u.scale_c(phase);
        }
    }
    Ok(GroupElement(u))
}

/// Structure constants `[v_a, v_b] = sum_c f_abc v_c`.
#[derive(Debug, Clone)]
pub struct BracketTable {
    dim: usize,
    coeffs: Vec<f64>,
}

impl BracketTable {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Expansion of `[v_a, v_b]`.
    pub fn get(&self, a: usize, b: usize) -> &[f64] {
        let d = self.dim;
        &self.coeffs[(a * d + b) * d..(a * d + b + 1) * d]
    }

    /// Largest `|f_abc + f_bac|`.
    pub fn antisymmetry_residual(&self) -> f64 {
        let d = self.dim;
        let mut worst: f64 = 0.0;
        for a in 0..d {
            for b in 0..d {
                for (x, y) in self.get(a, b).iter().zip(self.get(b, a)) {
                    worst = worst.max((x + y).abs());
                }
            }
        }
        worst
    }

    /// Largest coefficient of `[a,[b,c]] + [b,[c,a]] + [c,[a,b]]` computed
    /// from the table alone.
    pub fn jacobi_residual(&self) -> f64 {
        let d = self.dim;
        let nested = |x: usize, y: usize, z: usize, out: &mut [f64]| {
            // [x, [y, z]] = sum_m f_yzm [x, v_m]
            for (m, fyzm) in self.get(y, z).iter().enumerate() {
                if *fyzm == 0.0 {
                    continue;
                }
                for (o, fxm) in out.iter_mut().zip(self.get(x, m)) {
                    *o += fyzm * fxm;
                }
            }
        };
        let mut worst: f64 = 0.0;
        let mut acc = vec![0.0; d];
        for a in 0..d {
            for b in 0..d {
                for c in 0..d {
                    acc.iter_mut().for_each(|x| *x = 0.0);
                    nested(a, b, c, &mut acc);
                    nested(b, c, a, &mut acc);
                    nested(c, a, b, &mut acc);
                    worst = acc.iter().fold(worst, |w, x| w.max(x.abs()));
                }
            }
        }
        worst
    }
}

pub fn bracket_table(spec: &GroupSpec) -> BracketTable {
    bracket_table_from_basis(&orthonormal_basis(spec))
}

pub(crate) fn bracket_table_from_basis(basis: &[AlgebraElement]) -> BracketTable {
    let d = basis.len();
    let mut coeffs = vec![0.0; d * d * d];
    for a in 0..d {
        for b in 0..d {
            let br = basis[a].bracket(&basis[b]);
            for c in 0..d {
                let v = br.inner(&basis[c]);
                // snap rounding noise; genuine structure constants are O(1)
                coeffs[(a * d + b) * d + c] = if v.abs() < 1e-14 { 0.0 } else { v };
            }
        }
    }
    BracketTable { dim: d, coeffs }
}
