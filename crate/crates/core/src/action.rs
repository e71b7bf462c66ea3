//! The Wilson action, its gradient, its Hessian, and the coupling constants
//! that decide whether the curvature bounds apply.

use crate::error::{Error, Result};
use crate::group::{haar_sample, project_to_algebra, AlgebraElement, GroupElement, GroupKind, GroupSpec};
use crate::lattice::{Lattice, Plaquette, SignedEdge};
use crate::linalg::Mat;
use crate::rng::StreamKey;

/// Group, coupling and dimension together with the derived constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingParams {
    pub group: GroupSpec,
    pub beta: f64,
    pub d: usize,
    /// Bakry-Emery constant `K_S`.
    pub k_s: f64,
    pub beta_threshold: f64,
    pub admissible: bool,
}

pub fn derive_constants(group: GroupSpec, beta: f64, d: usize) -> Result<CouplingParams> {
    if d < 2 {
        return Err(Error::InvalidLattice(format!("dimension must exceed 1, got {d}")));
    }
    if !beta.is_finite() {
        return Err(Error::InvalidArgument(format!("beta must be finite, got {beta}")));
    }
    let n = group.n() as f64;
    let dm1 = (d - 1) as f64;
    let penalty = 8.0 * n * beta.abs() * dm1;
    let (k_s, beta_threshold) = match group.kind() {
        GroupKind::SO => ((n + 2.0) / 4.0 - 1.0 - penalty, 1.0 / (32.0 * dm1) - 1.0 / (16.0 * n * dm1)),
        GroupKind::SU => ((n + 2.0) / 2.0 - 1.0 - penalty, 1.0 / (16.0 * dm1)),
    };
    Ok(CouplingParams {
        group,
        beta,
        d,
        k_s,
        beta_threshold,
        admissible: beta.abs() < beta_threshold,
    })
}

impl CouplingParams {
    /// `N beta`, the prefactor of the action.
    pub fn n_beta(&self) -> f64 {
        self.group.n() as f64 * self.beta
    }

    /// Contraction constant `K~_S = C_Ric - (4 + 4 sqrt a) N |beta| (d-1)`
    /// for the weighted metric with base `a`.
    pub fn tilde_k(&self, a: f64) -> Result<f64> {
        if !(a > 1.0) {
            return Err(Error::InvalidArgument(format!("weight base must exceed 1, got {a}")));
        }
        let n = self.group.n() as f64;
        Ok(self.group.ricci() - (4.0 + 4.0 * a.sqrt()) * n * self.beta.abs() * (self.d - 1) as f64)
    }

    pub fn require_admissible(&self, what: &'static str) -> Result<()> {
        if self.admissible {
            Ok(())
        } else {
            Err(Error::Inadmissible {
                what,
                beta: self.beta,
                threshold: self.beta_threshold,
            })
        }
    }
}

/// One group element per positive edge, in edge order.
#[derive(Debug, Clone, PartialEq)]
pub struct Configuration {
    links: Vec<GroupElement>,
}

impl Configuration {
    pub fn identity(lattice: &Lattice, group: &GroupSpec) -> Self {
        Self {
            links: vec![GroupElement::identity(group.n()); lattice.edge_count()],
        }
    }

    /// Independent Haar links; link `e` draws from slot `e` of `key`.
    pub fn haar(lattice: &Lattice, group: &GroupSpec, key: StreamKey) -> Self {
        let links = (0..lattice.edge_count())
            .map(|e| haar_sample(group, &mut key.rng(0, e as u64)))
            .collect();
        Self { links }
    }

    pub fn from_links(links: Vec<GroupElement>) -> Self {
        Self { links }
    }

    pub fn links(&self) -> &[GroupElement] {
        &self.links
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    pub fn link(&self, e: usize) -> &GroupElement {
        &self.links[e]
    }

    pub fn set_link(&mut self, e: usize, q: GroupElement) {
        self.links[e] = q;
    }

    /// `Q_e`, or `Q_e^*` for a reversed edge.
    pub fn factor(&self, se: SignedEdge) -> Mat {
        let m = self.links[se.edge].matrix();
        if se.reversed {
            m.adjoint()
        } else {
            *m
        }
    }

    /// Ordered product along a path.
    pub fn holonomy(&self, path: &[SignedEdge]) -> Mat {
        let n = self.links[0].n();
        path.iter().fold(Mat::identity(n), |acc, &se| {
            let m = self.links[se.edge].matrix();
            if se.reversed {
                acc.mul_adj(m)
            } else {
                &acc * m
            }
        })
    }

    pub fn max_unitarity_defect(&self) -> f64 {
        self.links
            .iter()
            .map(|q| q.matrix().unitarity_defect())
            .fold(0.0, f64::max)
    }
}

/// `S(Q) = N beta Re sum_{p in P+} Tr Q_p`.
pub fn action_value(cfg: &Configuration, params: &CouplingParams, lattice: &Lattice) -> f64 {
    let sum: f64 = lattice
        .positive_plaquettes()
        .iter()
        .map(|p| cfg.holonomy(&p.edges).trace().re)
        .sum();
    params.n_beta() * sum
}

/// Sum over the plaquettes rooted at `e` of the path completing `e`, so
/// that `Q_p = Q_e A_e` for each term and the part of the action touching
/// `e` is `N beta Re Tr(Q_e A_e)`.
pub fn staple(cfg: &Configuration, e: usize, lattice: &Lattice) -> Mat {
    let n = cfg.link(e).n();
    let mut a = Mat::zeros(n);
    for p in lattice.plaquettes_starting_at(e) {
        a += &cfg.holonomy(&p.edges[1..]);
    }
    a
}

/// `N beta Re Tr(Q_e A_e)`: the terms of the action that depend on `e`.
pub fn local_action(cfg: &Configuration, e: usize, params: &CouplingParams, lattice: &Lattice) -> f64 {
    params.n_beta() * cfg.link(e).matrix().trace_mul(&staple(cfg, e, lattice)).re
}

/// Algebra factor `X_e` of the gradient, `grad_e S = X_e Q_e`:
/// `X_e = -1/2 N beta sum_{p > e} (Q_p - Q_p^*)`, made traceless for SU.
pub fn drift_algebra(cfg: &Configuration, e: usize, params: &CouplingParams, lattice: &Lattice) -> AlgebraElement {
    let w = cfg.link(e).matrix() * &staple(cfg, e, lattice);
    drift_from_loop_sum(&params.group, &w, params.n_beta())
}

pub(crate) fn drift_from_loop_sum(group: &GroupSpec, w: &Mat, n_beta: f64) -> AlgebraElement {
    let n = group.n();
    let mut x = (w - &w.adjoint()).scale(-0.5 * n_beta);
    match group.kind() {
        GroupKind::SO => {
            for z in x.entries_mut() {
                z.im = 0.0;
            }
        }
        GroupKind::SU => {
            let t = x.trace() / n as f64;
            for i in 0..n {
                x[(i, i)] -= t;
            }
        }
    }
    AlgebraElement::from_matrix_unchecked(x)
}

/// The gradient as a tangent vector at `Q_e`, in the projected form
/// `N beta sum_{p > e} p(Q_p^*) (Q_e^*)^{-1}`.
pub fn gradient_tangent(cfg: &Configuration, e: usize, params: &CouplingParams, lattice: &Lattice) -> Mat {
    let group = &params.group;
    let mut sum = Mat::zeros(group.n());
    for p in lattice.plaquettes_starting_at(e) {
        let qp = cfg.holonomy(&p.edges);
        sum += project_to_algebra(group, &qp.adjoint()).matrix();
    }
    let qe_adj_inv = cfg.link(e).matrix().adjoint().inverse().expect("group elements are invertible");
    &sum.scale(params.n_beta()) * &qe_adj_inv
}

/// `|v|^2 = sum_e |X_e|^2` for a tangent assignment.
pub fn tangent_norm_sq(v: &[AlgebraElement]) -> f64 {
    v.iter().map(|x| x.inner(x)).sum()
}

/// Right-hand side of the Hessian bound, `8 (d-1) N |beta| |v|^2`.
pub fn hessian_bound(params: &CouplingParams, v_norm_sq: f64) -> f64 {
    8.0 * (params.d - 1) as f64 * params.group.n() as f64 * params.beta.abs() * v_norm_sq
}

/// Symmetric Hessian form `sum (X_e Q_e)(Y_f Q_f) S` evaluated by inserting
/// algebra factors into the plaquette traces. Equals the mixed derivative
/// `d^2/ds dt S(exp(sX + tY) Q)` at zero.
pub fn hessian_bilinear(
    cfg: &Configuration,
    v: &[AlgebraElement],
    w: &[AlgebraElement],
    params: &CouplingParams,
    lattice: &Lattice,
) -> f64 {
    assert_eq!(v.len(), cfg.len(), "tangent v has the wrong length");
    assert_eq!(w.len(), cfg.len(), "tangent w has the wrong length");
    if params.beta == 0.0 {
        return 0.0;
    }
    let total: f64 = lattice
        .positive_plaquettes()
        .iter()
        .map(|p| plaquette_hessian(cfg, p, v, w))
        .sum();
    params.n_beta() * total
}

pub fn hessian_quadratic_form(
    cfg: &Configuration,
    v: &[AlgebraElement],
    params: &CouplingParams,
    lattice: &Lattice,
) -> f64 {
    hessian_bilinear(cfg, v, v, params, lattice)
}

fn plaquette_hessian(cfg: &Configuration, p: &Plaquette, v: &[AlgebraElement], w: &[AlgebraElement]) -> f64 {
    let nonzero = |t: &[AlgebraElement]| {
        p.edges
            .iter()
            .any(|se| t[se.edge].matrix().entries().iter().any(|z| z.norm_sqr() != 0.0))
    };
    if !nonzero(v) || !nonzero(w) {
        return 0.0;
    }
    let base: [Mat; 4] = p.edges.map(|se| cfg.factor(se));
    // first-order insertions: Q -> X Q, and Q^* -> -Q^* X for reversed edges
    let first = |t: &[AlgebraElement]| -> [Mat; 4] {
        std::array::from_fn(|i| {
            let se = p.edges[i];
            let x = t[se.edge].matrix();
            if se.reversed {
                -&(&base[i] * x)
            } else {
                x * &base[i]
            }
        })
    };
    let dv = first(v);
    let dw = first(w);
    let mut acc = 0.0;
    for i in 0..4 {
        let se = p.edges[i];
        let x = v[se.edge].matrix();
        let y = w[se.edge].matrix();
        let sym = (&(x * y) + &(y * x)).scale(0.5);
        let second = if se.reversed { &base[i] * &sym } else { &sym * &base[i] };
        acc += trace_with(&base, &[(i, &second)]);
        for j in 0..4 {
            if j != i {
                acc += trace_with(&base, &[(i, &dv[i]), (j, &dw[j])]);
            }
        }
    }
    acc
}

/// `Re Tr` of the four-factor product with some factors replaced.
fn trace_with(base: &[Mat; 4], subs: &[(usize, &Mat)]) -> f64 {
    let pick = |k: usize| subs.iter().find(|(i, _)| *i == k).map_or(&base[k], |(_, m)| *m);
    let left = pick(0) * pick(1);
    let right = pick(2) * pick(3);
    left.trace_mul(&right).re
}
