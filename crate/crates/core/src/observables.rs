//! Wilson loops, their gradients, and per-configuration observables.

use num_complex::Complex64;

use crate::action::Configuration;
use crate::group::{project_to_algebra, AlgebraElement, GroupSpec};
use crate::lattice::{Lattice, LoopWord, SignedEdge};
use crate::linalg::Mat;

/// `W_l = Tr(Q_{e_1} ... Q_{e_n})`.
pub fn wilson_loop(cfg: &Configuration, word: &LoopWord) -> Complex64 {
    cfg.holonomy(word.edges()).trace()
}

/// Algebra factor `X` with `grad_e Re W_l = X Q_e`, summed over every
/// occurrence of `e` in the loop.
pub fn wilson_loop_gradient(cfg: &Configuration, group: &GroupSpec, word: &LoopWord, e: usize) -> AlgebraElement {
    let edges = word.edges();
    let n = group.n();
    let mut sum = Mat::zeros(n);
    for (k, se) in edges.iter().enumerate() {
        if se.edge != e {
            continue;
        }
        // R: product of the remaining factors, read cyclically after position k
        let rest: Vec<SignedEdge> = edges[k + 1..].iter().chain(&edges[..k]).copied().collect();
        let r = cfg.holonomy(&rest);
        let q = cfg.link(e).matrix();
        let m = if se.reversed {
            // Tr(Q_e^* R): derivative along exp(tY) Q_e is -Re Tr(Y R Q_e^*)
            r.mul_adj(q)
        } else {
            (q * &r).adjoint()
        };
        sum += project_to_algebra(group, &m).matrix();
    }
    AlgebraElement::from_matrix_unchecked(sum)
}

/// `Re Tr Q_p / N` for every positive plaquette, in plaquette order.
pub fn plaquette_traces(cfg: &Configuration, lattice: &Lattice, n: usize) -> Vec<f64> {
    lattice
        .positive_plaquettes()
        .iter()
        .map(|p| cfg.holonomy(&p.edges).trace().re / n as f64)
        .collect()
}

/// `<Q_e, E>` with `E` the matrix unit at `(0, 0)`, i.e. `Re (Q_e)_{00}`.
pub fn edge_entries(cfg: &Configuration) -> Vec<f64> {
    cfg.links().iter().map(|q| q.matrix()[(0, 0)].re).collect()
}
