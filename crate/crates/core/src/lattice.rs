//! Finite periodic lattice `(Z / L Z)^d`: edges, plaquettes and loops.
//!
//! Vertices are numbered lexicographically with coordinate 0 most
//! significant; the positive edge from vertex `v` along `axis` has the
//! dense index `v * d + axis`, so configurations are flat arrays.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub d: usize,
    pub l: usize,
}

impl LatticeSpec {
    pub fn new(d: usize, l: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidLattice(format!("dimension must exceed 1, got {d}")));
        }
        if l < 2 {
            return Err(Error::InvalidLattice(format!("side length must be at least 2, got {l}")));
        }
        let vertices = l.checked_pow(d as u32).filter(|v| *v <= 1 << 24);
        if vertices.is_none() {
            return Err(Error::InvalidLattice(format!("{l}^{d} vertices is too many")));
        }
        Ok(Self { d, l })
    }

    pub fn vertex_count(&self) -> usize {
        self.l.pow(self.d as u32)
    }

    pub fn edge_count(&self) -> usize {
        self.d * self.vertex_count()
    }

    pub fn plaquette_count(&self) -> usize {
        self.vertex_count() * self.d * (self.d - 1) / 2
    }
}

/// A lattice edge with orientation: the positive edge `edge`, traversed
/// backwards when `reversed` is set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SignedEdge {
    pub edge: usize,
    pub reversed: bool,
}

impl SignedEdge {
    pub fn forward(edge: usize) -> Self {
        Self { edge, reversed: false }
    }

    pub fn backward(edge: usize) -> Self {
        Self { edge, reversed: true }
    }

    pub fn inverse(self) -> Self {
        Self {
            edge: self.edge,
            reversed: !self.reversed,
        }
    }
}

/// Four signed edges bounding a unit square.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Plaquette {
    pub edges: [SignedEdge; 4],
    /// Lexicographically smallest corner in the unwrapped square.
    pub base: usize,
    /// The two axes spanning the square, ascending.
    pub plane: (usize, usize),
}

/// A cyclically reduced closed path in canonical rotation.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LoopWord {
    edges: Vec<SignedEdge>,
}

impl LoopWord {
    pub fn edges(&self) -> &[SignedEdge] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }
}

/// A unit step `+axis` or `-axis`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Move {
    pub axis: usize,
    pub positive: bool,
}

impl fmt::Display for Move {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", if self.positive { '+' } else { '-' }, self.axis)
    }
}

/// Parses a move string such as `"+0 +1 -0 -1"` (whitespace optional).
pub fn parse_moves(s: &str) -> Result<Vec<Move>> {
    let bytes = s.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() || c == b',' {
            i += 1;
            continue;
        }
        let positive = match c {
            b'+' => true,
            b'-' => false,
            _ => return Err(Error::Parse(format!("expected '+' or '-' at byte {i} of {s:?}"))),
        };
        i += 1;
        let start = i;
        while i < bytes.len() && bytes[i].is_ascii_digit() {
            i += 1;
        }
        if start == i {
            return Err(Error::Parse(format!("missing axis after sign at byte {start}")));
        }
        let axis: usize = s[start..i]
            .parse()
            .map_err(|_| Error::Parse(format!("axis out of range at byte {start}")))?;
        out.push(Move { axis, positive });
    }
    if out.is_empty() {
        return Err(Error::Parse("empty move string".into()));
    }
    Ok(out)
}

/// Precomputed incidence structure of a periodic lattice.
#[derive(Debug, Clone)]
pub struct Lattice {
    spec: LatticeSpec,
    plaquettes: Vec<Plaquette>,
    /// `2(d-1)` plaquette words per positive edge, each starting with it.
    rooted: Vec<Vec<Plaquette>>,
    /// Indices into `plaquettes` of the squares containing each edge.
    incident: Vec<Vec<usize>>,
}

impl Lattice {
    pub fn new(spec: LatticeSpec) -> Self {
        let mut lat = Self {
            spec,
            plaquettes: Vec::new(),
            rooted: Vec::new(),
            incident: Vec::new(),
        };
        lat.plaquettes = lat.build_positive_plaquettes();
        lat.rooted = (0..spec.edge_count()).map(|e| lat.build_rooted(e)).collect();
        let mut incident = vec![Vec::new(); spec.edge_count()];
        for (i, p) in lat.plaquettes.iter().enumerate() {
            for se in p.edges {
                incident[se.edge].push(i);
            }
        }
        lat.incident = incident;
        lat
    }

    pub fn spec(&self) -> LatticeSpec {
        self.spec
    }

    pub fn d(&self) -> usize {
        self.spec.d
    }

    pub fn l(&self) -> usize {
        self.spec.l
    }

    pub fn edge_count(&self) -> usize {
        self.spec.edge_count()
    }

    pub fn vertex_count(&self) -> usize {
        self.spec.vertex_count()
    }

    pub fn vertex_coords(&self, v: usize) -> Vec<usize> {
        let (d, l) = (self.spec.d, self.spec.l);
        let mut c = vec![0; d];
        let mut r = v;
        for i in (0..d).rev() {
            c[i] = r % l;
            r /= l;
        }
        c
    }

    pub fn vertex_index(&self, coords: &[usize]) -> usize {
        let l = self.spec.l;
        coords.iter().fold(0, |acc, &x| acc * l + x % l)
    }

    /// `v` moved by `delta` along `axis`, wrapping.
    pub fn shift(&self, v: usize, axis: usize, delta: isize) -> usize {
        let (d, l) = (self.spec.d, self.spec.l as isize);
        let stride = (self.spec.l).pow((d - 1 - axis) as u32);
        let x = ((v / stride) % self.spec.l) as isize;
        let nx = (x + delta).rem_euclid(l) as usize;
        v - (x as usize) * stride + nx * stride
    }

    pub fn edge_index(&self, vertex: usize, axis: usize) -> usize {
        vertex * self.spec.d + axis
    }

    pub fn edge_base(&self, edge: usize) -> usize {
        edge / self.spec.d
    }

    pub fn edge_axis(&self, edge: usize) -> usize {
        edge % self.spec.d
    }

    pub fn tail(&self, se: SignedEdge) -> usize {
        let base = self.edge_base(se.edge);
        if se.reversed {
            self.shift(base, self.edge_axis(se.edge), 1)
        } else {
            base
        }
    }

    pub fn head(&self, se: SignedEdge) -> usize {
        self.tail(se.inverse())
    }

    /// All positive edges in index order.
    pub fn enumerate_positive_edges(&self) -> Vec<SignedEdge> {
        (0..self.edge_count()).map(SignedEdge::forward).collect()
    }

    /// The representatives summed in the action: one per unit square,
    /// starting at its smallest corner and leaving towards the second
    /// smallest.
    pub fn positive_plaquettes(&self) -> &[Plaquette] {
        &self.plaquettes
    }

    /// The `2(d-1)` plaquettes whose word starts with the positive edge `e`.
    pub fn plaquettes_starting_at(&self, e: usize) -> &[Plaquette] {
        &self.rooted[e]
    }

    /// Indices into [`Self::positive_plaquettes`] of squares containing `e`.
    pub fn plaquettes_containing(&self, e: usize) -> &[usize] {
        &self.incident[e]
    }

    fn build_positive_plaquettes(&self) -> Vec<Plaquette> {
        let d = self.spec.d;
        let mut out = Vec::with_capacity(self.spec.plaquette_count());
        for x in 0..self.vertex_count() {
            for mu in 0..d {
                for nu in mu + 1..d {
                    // x+nu is lexicographically below x+mu when mu < nu
                    let x_nu = self.shift(x, nu, 1);
                    let x_mu = self.shift(x, mu, 1);
                    out.push(Plaquette {
                        edges: [
                            SignedEdge::forward(self.edge_index(x, nu)),
                            SignedEdge::forward(self.edge_index(x_nu, mu)),
                            SignedEdge::backward(self.edge_index(x_mu, nu)),
                            SignedEdge::backward(self.edge_index(x, mu)),
                        ],
                        base: x,
                        plane: (mu, nu),
                    });
                }
            }
        }
        out
    }

    fn build_rooted(&self, e: usize) -> Vec<Plaquette> {
        let d = self.spec.d;
        let x = self.edge_base(e);
        let mu = self.edge_axis(e);
        let x_mu = self.shift(x, mu, 1);
        let mut out = Vec::with_capacity(2 * (d - 1));
        for nu in (0..d).filter(|&nu| nu != mu) {
            let plane = (mu.min(nu), mu.max(nu));
            let x_nu = self.shift(x, nu, 1);
            out.push(Plaquette {
                edges: [
                    SignedEdge::forward(e),
                    SignedEdge::forward(self.edge_index(x_mu, nu)),
                    SignedEdge::backward(self.edge_index(x_nu, mu)),
                    SignedEdge::backward(self.edge_index(x, nu)),
                ],
                base: x,
                plane,
            });
            let x_mnu = self.shift(x, nu, -1);
            let x_mu_mnu = self.shift(x_mu, nu, -1);
            out.push(Plaquette {
                edges: [
                    SignedEdge::forward(e),
                    SignedEdge::backward(self.edge_index(x_mu_mnu, nu)),
                    SignedEdge::backward(self.edge_index(x_mnu, mu)),
                    SignedEdge::forward(self.edge_index(x_mnu, nu)),
                ],
                base: x_mnu,
                plane,
            });
        }
        out
    }

    /// Graph distance between two vertices on the torus.
    pub fn vertex_distance(&self, u: usize, v: usize) -> usize {
        let l = self.spec.l;
        self.vertex_coords(u)
            .iter()
            .zip(self.vertex_coords(v))
            .map(|(a, b)| {
                let t = a.abs_diff(b);
                t.min(l - t)
            })
            .sum()
    }

    /// `|e|`: the smaller distance from the origin to either endpoint.
    pub fn edge_norm(&self, e: usize) -> usize {
        let se = SignedEdge::forward(e);
        self.vertex_distance(0, self.tail(se))
            .min(self.vertex_distance(0, self.head(se)))
    }

    pub fn plaquette_vertices(&self, p: &Plaquette) -> [usize; 4] {
        let mut out = [0; 4];
        for (slot, se) in out.iter_mut().zip(p.edges) {
            *slot = self.tail(se);
        }
        out
    }

    pub fn is_closed_path(&self, word: &[SignedEdge]) -> bool {
        if word.is_empty() || word.iter().any(|se| se.edge >= self.edge_count()) {
            return false;
        }
        let n = word.len();
        (0..n).all(|i| self.head(word[i]) == self.tail(word[(i + 1) % n]))
    }

    /// Path visiting `moves` from `start`.
    pub fn path_from_moves(&self, start: usize, moves: &[Move]) -> Result<Vec<SignedEdge>> {
        let mut v = start;
        let mut out = Vec::with_capacity(moves.len());
        for m in moves {
            if m.axis >= self.spec.d {
                return Err(Error::InvalidArgument(format!(
                    "axis {} out of range for d = {}",
                    m.axis, self.spec.d
                )));
            }
            if m.positive {
                out.push(SignedEdge::forward(self.edge_index(v, m.axis)));
                v = self.shift(v, m.axis, 1);
            } else {
                v = self.shift(v, m.axis, -1);
                out.push(SignedEdge::backward(self.edge_index(v, m.axis)));
            }
        }
        Ok(out)
    }

    /// Cyclic reduction followed by the lexicographically least rotation.
    pub fn reduce_loop(&self, word: &[SignedEdge]) -> Result<LoopWord> {
        if word.is_empty() {
            return Err(Error::EmptyLoop);
        }
        if !self.is_closed_path(word) {
            return Err(Error::OpenPath(format!("{} edges do not close up", word.len())));
        }
        let mut stack: Vec<SignedEdge> = Vec::with_capacity(word.len());
        for &se in word {
            if stack.last() == Some(&se.inverse()) {
                stack.pop();
            } else {
                stack.push(se);
            }
        }
        let mut lo = 0;
        let mut hi = stack.len();
        while hi - lo >= 2 && stack[lo] == stack[hi - 1].inverse() {
            lo += 1;
            hi -= 1;
        }
        let reduced = &stack[lo..hi];
        if reduced.is_empty() {
            return Err(Error::EmptyLoop);
        }
        let n = reduced.len();
        let best = (0..n)
            .min_by(|&a, &b| {
                let ra = reduced[a..].iter().chain(&reduced[..a]);
                let rb = reduced[b..].iter().chain(&reduced[..b]);
                ra.cmp(rb)
            })
            .unwrap_or(0);
        let edges = reduced[best..].iter().chain(&reduced[..best]).copied().collect();
        Ok(LoopWord { edges })
    }

    /// Counter-clockwise `len_a x len_b` rectangle in the `(axis_a, axis_b)`
    /// plane with corner `base`.
    pub fn rectangle(&self, base: usize, axis_a: usize, axis_b: usize, len_a: usize, len_b: usize) -> Result<LoopWord> {
        if axis_a == axis_b || len_a == 0 || len_b == 0 {
            return Err(Error::InvalidArgument("degenerate rectangle".into()));
        }
        let mut moves = Vec::new();
        moves.extend((0..len_a).map(|_| Move { axis: axis_a, positive: true }));
        moves.extend((0..len_b).map(|_| Move { axis: axis_b, positive: true }));
        moves.extend((0..len_a).map(|_| Move { axis: axis_a, positive: false }));
        moves.extend((0..len_b).map(|_| Move { axis: axis_b, positive: false }));
        let path = self.path_from_moves(base, &moves)?;
        self.reduce_loop(&path)
    }

    pub fn plaquette_loop(&self, p: &Plaquette) -> LoopWord {
        self.reduce_loop(&p.edges).expect("plaquette boundary is a reduced closed path")
    }
}
