//! Small dense complex matrices.
//!
//! Every group in this crate acts on `n x n` matrices with `n <= MAX_N`, so a
//! matrix lives inline in a fixed array and is `Copy`. Only the leading
//! `n * n` slots (row-major) are meaningful.

use std::fmt;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use num_complex::Complex64;

/// Largest supported matrix size.
pub const MAX_N: usize = 8;

const CAP: usize = MAX_N * MAX_N;
const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Clone, Copy)]
pub struct Mat {
    n: usize,
    a: [Complex64; CAP],
}

impl Mat {
    pub fn zeros(n: usize) -> Self {
        assert!((1..=MAX_N).contains(&n), "matrix size {n} out of range");
        Self { n, a: [ZERO; CAP] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.a[i * n + i] = ONE;
        }
        m
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.a[i * n + j] = f(i, j);
            }
        }
        m
    }

    /// Builds a matrix from real row-major entries.
    pub fn from_real_rows(rows: &[&[f64]]) -> Self {
        let n = rows.len();
        Self::from_fn(n, |i, j| Complex64::new(rows[i][j], 0.0))
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn entries(&self) -> &[Complex64] {
        &self.a[..self.n * self.n]
    }

    #[inline]
    pub fn entries_mut(&mut self) -> &mut [Complex64] {
        let len = self.n * self.n;
        &mut self.a[..len]
    }

    pub fn adjoint(&self) -> Self {
        let n = self.n;
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.a[j * n + i] = self.a[i * n + j].conj();
            }
        }
        m
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.n).map(|i| self.a[i * self.n + i]).sum()
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut m = *self;
        m.entries_mut().iter_mut().for_each(|z| *z *= s);
        m
    }

    pub fn scale_c(&self, s: Complex64) -> Self {
        let mut m = *self;
        m.entries_mut().iter_mut().for_each(|z| *z *= s);
        m
    }

    /// `self * b^*` without forming the adjoint.
    pub fn mul_adj(&self, b: &Mat) -> Self {
        let n = self.n;
        debug_assert_eq!(n, b.n);
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                let mut s = ZERO;
                for k in 0..n {
                    s += self.a[i * n + k] * b.a[j * n + k].conj();
                }
                m.a[i * n + j] = s;
            }
        }
        m
    }

    /// `self^* * b` without forming the adjoint.
    pub fn adj_mul(&self, b: &Mat) -> Self {
        let n = self.n;
        debug_assert_eq!(n, b.n);
        let mut m = Self::zeros(n);
        for k in 0..n {
            for i in 0..n {
                let aki = self.a[k * n + i].conj();
                if aki == ZERO {
                    continue;
                }
                for j in 0..n {
                    m.a[i * n + j] += aki * b.a[k * n + j];
                }
            }
        }
        m
    }

    /// Hilbert-Schmidt inner product `Re Tr(self * other^*)`.
    pub fn inner(&self, other: &Mat) -> f64 {
        self.entries()
            .iter()
            .zip(other.entries())
            .map(|(x, y)| x.re * y.re + x.im * y.im)
            .sum()
    }

    /// `Tr(self * other)` computed without the product.
    pub fn trace_mul(&self, other: &Mat) -> Complex64 {
        let n = self.n;
        let mut s = ZERO;
        for i in 0..n {
            for k in 0..n {
                s += self.a[i * n + k] * other.a[k * n + i];
            }
        }
        s
    }

    pub fn norm_fro(&self) -> f64 {
        self.entries().iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Maximum absolute column sum.
    pub fn norm_1(&self) -> f64 {
        let n = self.n;
        (0..n)
            .map(|j| (0..n).map(|i| self.a[i * n + j].norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn max_abs_imag(&self) -> f64 {
        self.entries().iter().map(|z| z.im.abs()).fold(0.0, f64::max)
    }

    /// LU factorisation with partial pivoting. Returns `None` for an exactly
    /// singular matrix.
    fn lu(&self) -> Option<(Mat, [usize; MAX_N], bool)> {
        let n = self.n;
        let mut lu = *self;
        let mut perm = [0usize; MAX_N];
        for (i, p) in perm.iter_mut().enumerate().take(n) {
            *p = i;
        }
        let mut odd = false;
        for k in 0..n {
            let (piv, best) = (k..n)
                .map(|i| (i, lu.a[i * n + k].norm()))
                .fold((k, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            if best == 0.0 {
                return None;
            }
            if piv != k {
                for j in 0..n {
                    lu.a.swap(k * n + j, piv * n + j);
                }
                perm.swap(k, piv);
                odd = !odd;
            }
            let d = lu.a[k * n + k];
            for i in k + 1..n {
                let f = lu.a[i * n + k] / d;
                lu.a[i * n + k] = f;
                for j in k + 1..n {
                    let t = lu.a[k * n + j];
                    lu.a[i * n + j] -= f * t;
                }
            }
        }
        Some((lu, perm, odd))
    }

    pub fn det(&self) -> Complex64 {
        match self.lu() {
            None => ZERO,
            Some((lu, _, odd)) => {
                let n = self.n;
                let d: Complex64 = (0..n).map(|i| lu.a[i * n + i]).product();
                if odd {
                    -d
                } else {
                    d
                }
            }
        }
    }

    /// Solves `self * X = rhs`.
    pub fn solve(&self, rhs: &Mat) -> Option<Mat> {
        let n = self.n;
        let (lu, perm, _) = self.lu()?;
        let mut x = Mat::zeros(n);
        for col in 0..n {
            let mut y = [ZERO; MAX_N];
            for i in 0..n {
                let mut s = rhs.a[perm[i] * n + col];
                for k in 0..i {
                    s -= lu.a[i * n + k] * y[k];
                }
                y[i] = s;
            }
            for i in (0..n).rev() {
                let mut s = y[i];
                for k in i + 1..n {
                    s -= lu.a[i * n + k] * x.a[k * n + col];
                }
                x.a[i * n + col] = s / lu.a[i * n + i];
            }
        }
        Some(x)
    }

    pub fn inverse(&self) -> Option<Mat> {
        self.solve(&Mat::identity(self.n))
    }

    /// Matrix exponential by scaling and squaring with a diagonal Padé
    /// approximant of degree 3, 5, 7, 9 or 13.
    pub fn exp(&self) -> Mat {
        const THETA: [(usize, f64); 5] = [
            (3, 1.495_585_217_958_292e-2),
            (5, 2.539_398_330_063_23e-1),
            (7, 9.504_178_996_162_932e-1),
            (9, 2.097_847_961_257_068e0),
            (13, 5.371_920_351_148_152e0),
        ];
        let norm = self.norm_1();
        if norm == 0.0 {
            return Mat::identity(self.n);
        }
        for &(m, theta) in &THETA[..4] {
            if norm <= theta {
                return pade(self, m);
            }
        }
        let theta13 = THETA[4].1;
        let s = if norm > theta13 {
            (norm / theta13).log2().ceil() as i32
        } else {
            0
        };
        let mut r = pade(&self.scale(0.5f64.powi(s)), 13);
        for _ in 0..s {
            r = &r * &r;
        }
        r
    }

    /// Principal square root by the Denman-Beavers iteration.
    pub fn sqrt(&self) -> Option<Mat> {
        let mut y = *self;
        let mut z = Mat::identity(self.n);
        for _ in 0..100 {
            let yi = y.inverse()?;
            let zi = z.inverse()?;
            let y_next = (&y + &zi).scale(0.5);
            let z_next = (&z + &yi).scale(0.5);
            let delta = (&y_next - &y).norm_fro();
            y = y_next;
            z = z_next;
            if delta <= 1e-15 * y.norm_fro() {
                return Some(y);
            }
        }
        Some(y)
    }

    /// Principal logarithm by inverse scaling and squaring. The caller is
    /// responsible for keeping the spectrum away from the negative real axis.
    pub fn log(&self) -> Option<Mat> {
        let n = self.n;
        let id = Mat::identity(n);
        let mut a = *self;
        let mut k = 0;
        while (&a - &id).norm_1() > 0.25 {
            a = a.sqrt()?;
            k += 1;
            if k > 60 {
                return None;
            }
        }
        // log A = 2 atanh(Z), Z = (A - I)(A + I)^{-1}
        let z = (&a + &id).solve_right(&(&a - &id))?;
        let z2 = &z * &z;
        let mut term = z;
        let mut acc = z;
        let mut j = 1;
        loop {
            term = &term * &z2;
            j += 2;
            let contrib = term.scale(1.0 / j as f64);
            acc += &contrib;
            if contrib.norm_fro() <= 1e-18 * acc.norm_fro().max(1e-300) || j > 101 {
                break;
            }
        }
        Some(acc.scale(2.0 * f64::powi(2.0, k)))
    }

    /// Solves `X * self = rhs`.
    pub fn solve_right(&self, rhs: &Mat) -> Option<Mat> {
        // X self = rhs  <=>  self^* X^* = rhs^*
        Some(self.adjoint().solve(&rhs.adjoint())?.adjoint())
    }

    /// Unitary polar factor by the scaled Newton iteration `X <- (X + X^{-*}) / 2`.
    pub fn unitary_polar(&self) -> Option<Mat> {
        let mut x = *self;
        for _ in 0..100 {
            let xi = x.inverse()?.adjoint();
            let next = (&x + &xi).scale(0.5);
            let delta = (&next - &x).norm_fro();
            x = next;
            if delta <= 1e-15 {
                break;
            }
        }
        // one more step polishes the last ulp
        let xi = x.inverse()?.adjoint();
        Some((&x + &xi).scale(0.5))
    }

    /// Eigenvalues of a Hermitian matrix, ascending.
    pub fn hermitian_eigenvalues(&self) -> Vec<f64> {
        let n = self.n;
        let h = nalgebra::DMatrix::from_fn(n, n, |i, j| {
            // symmetrise to kill rounding asymmetry
            (self.a[i * n + j] + self.a[j * n + i].conj()) * 0.5
        });
        let mut ev: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// `‖self self^* - I‖_F`.
    pub fn unitarity_defect(&self) -> f64 {
        (&self.mul_adj(self) - &Mat::identity(self.n)).norm_fro()
    }
}

fn pade_coefficients(m: usize) -> Vec<f64> {
    // c_k = (2m-k)! m! / ((2m)! k! (m-k)!), built by the ratio recurrence
    let mut c = vec![1.0; m + 1];
    for k in 1..=m {
        c[k] = c[k - 1] * (m + 1 - k) as f64 / (k * (2 * m + 1 - k)) as f64;
    }
    c
}

fn pade(x: &Mat, m: usize) -> Mat {
    let n = x.n;
    let c = pade_coefficients(m);
    let mut even = Mat::identity(n).scale(c[0]);
    let mut odd = Mat::zeros(n);
    let mut power = Mat::identity(n);
    for (k, ck) in c.iter().enumerate().skip(1) {
        power = &power * x;
        let t = power.scale(*ck);
        if k % 2 == 0 {
            even += &t;
        } else {
            odd += &t;
        }
    }
    let p = &even + &odd;
    let q = &even - &odd;
    q.solve(&p).expect("Padé denominator is nonsingular in its convergence region")
}

impl Index<(usize, usize)> for Mat {
    type Output = Complex64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        debug_assert!(i < self.n && j < self.n);
        &self.a[i * self.n + j]
    }
}

impl IndexMut<(usize, usize)> for Mat {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        debug_assert!(i < self.n && j < self.n);
        &mut self.a[i * self.n + j]
    }
}

impl Mul for &Mat {
    type Output = Mat;
    fn mul(self, b: &Mat) -> Mat {
        let n = self.n;
        debug_assert_eq!(n, b.n);
        let mut m = Mat::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let aik = self.a[i * n + k];
                if aik == ZERO {
                    continue;
                }
                for j in 0..n {
                    m.a[i * n + j] += aik * b.a[k * n + j];
                }
            }
        }
        m
    }
}

impl Add for &Mat {
    type Output = Mat;
    fn add(self, b: &Mat) -> Mat {
        let mut m = *self;
        m += b;
        m
    }
}

impl Sub for &Mat {
    type Output = Mat;
    fn sub(self, b: &Mat) -> Mat {
        let mut m = *self;
        m -= b;
        m
    }
}

impl AddAssign<&Mat> for Mat {
    fn add_assign(&mut self, b: &Mat) {
        debug_assert_eq!(self.n, b.n);
        self.entries_mut()
            .iter_mut()
            .zip(b.entries())
            .for_each(|(x, y)| *x += y);
    }
}

impl SubAssign<&Mat> for Mat {
    fn sub_assign(&mut self, b: &Mat) {
        debug_assert_eq!(self.n, b.n);
        self.entries_mut()
            .iter_mut()
            .zip(b.entries())
            .for_each(|(x, y)| *x -= y);
    }
}

impl Neg for &Mat {
    type Output = Mat;
    fn neg(self) -> Mat {
        self.scale(-1.0)
    }
}

impl PartialEq for Mat {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.entries() == other.entries()
    }
}

impl fmt::Debug for Mat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = self.n;
        writeln!(f, "Mat({n}x{n})[")?;
        for i in 0..n {
            write!(f, "  ")?;
            for j in 0..n {
                let z = self.a[i * n + j];
                write!(f, "{:>10.6}{:+.6}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}
