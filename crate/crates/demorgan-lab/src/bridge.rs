//! Graph and matrix constructions: the frames `P(G)`, their complex matrices `μ`, the
//! neighborhood matrix `γ(G)`, the rules `α_G`, and classification of reduced models.

use std::fmt;

use crate::error::{Error, Result};
use crate::formula::{Formula, RuleInstance};
use crate::frame::{self, complex_matrix, dual_frame, frames_isomorphic, is_reduced_frame, Frame};
use crate::graph::{self, canonical_code, disjoint_union, Graph};
use crate::matrix::FinMatrix;

/// Largest graph accepted by [`gamma`].
pub const GAMMA_MAX_VERTICES: usize = 6;

/// A reduced model presented as `⟨G, H, k⟩`: plus graph, minus graph, and the number of
/// designated fixed singletons.
#[derive(Clone, Debug)]
pub struct TriplePresentation {
    pub plus_graph: Graph,
    pub minus_graph: Graph,
    pub singletons: usize,
}

impl TriplePresentation {
    pub fn new(plus_graph: Graph, minus_graph: Graph, singletons: usize) -> Self {
        TriplePresentation { plus_graph, minus_graph, singletons }
    }

    /// Key equal for two presentations iff their graphs are isomorphic and counts agree.
    pub fn key(&self) -> ((usize, Vec<u64>), (usize, Vec<u64>), usize) {
        (canonical_code(&self.plus_graph), canonical_code(&self.minus_graph), self.singletons)
    }
}

impl PartialEq for TriplePresentation {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}

impl Eq for TriplePresentation {}

impl fmt::Display for TriplePresentation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{}; {}; {}>", self.plus_graph, self.minus_graph, self.singletons)
    }
}

fn graph_frame(g: &Graph, plus: bool) -> Frame {
    let n = g.size();
    let mut labels: Vec<String> = g.labels().to_vec();
    labels.extend(g.labels().iter().map(|l| format!("~{l}")));
    let pairs: Vec<(usize, usize)> = g.edges().into_iter().flat_map(|(u, v)| [(u, n + v), (v, n + u)]).collect();
    let invol = (0..2 * n).map(|x| if x < n { x + n } else { x - n }).collect();
    let designated: Vec<usize> = if plus { (0..2 * n).collect() } else { (n..2 * n).collect() };
    Frame::new(labels, &pairs, invol, &designated).expect("graph frames are valid")
}

/// Points `X ⊔ ∂X` with `u ≤ ∂w` iff `u R w`; every point designated.
pub fn p_plus(g: &Graph) -> Frame {
    graph_frame(g, true)
}

/// As [`p_plus`] but only `∂X` designated.
pub fn p_minus(g: &Graph) -> Frame {
    graph_frame(g, false)
}

fn singleton_frame() -> Frame {
    Frame::new(vec!["s".into()], &[], vec![0], &[0]).expect("valid")
}

/// Disjoint union of `P₊(G)`, `P₋(H)` and `k` designated fixed singletons.
pub fn p_triple(t: &TriplePresentation) -> Result<Frame> {
    let mut parts = Vec::new();
    if !t.plus_graph.is_empty() {
        parts.push(p_plus(&t.plus_graph));
    }
    if !t.minus_graph.is_empty() {
        parts.push(p_minus(&t.minus_graph));
    }
    parts.extend(std::iter::repeat_with(singleton_frame).take(t.singletons));
    frame::disjoint_union(&parts)
}

pub fn mu_plus(g: &Graph) -> Result<FinMatrix> {
    complex_matrix(&p_plus(g))
}

pub fn mu_minus(g: &Graph) -> Result<FinMatrix> {
    complex_matrix(&p_minus(g))
}

pub fn mu_triple(t: &TriplePresentation) -> Result<FinMatrix> {
    complex_matrix(&p_triple(t)?)
}

/// Powerset of the vertices with `~U = X \ R[U]`, designating only the full set.
pub fn gamma(g: &Graph) -> Result<FinMatrix> {
    let n = g.size();
    if n == 0 {
        return Err(Error::InvalidGraph("gamma needs a non-empty graph".into()));
    }
    if n > GAMMA_MAX_VERTICES {
        return Err(Error::Guard(format!("gamma is limited to {GAMMA_MAX_VERTICES} vertices")));
    }
    let size = 1usize << n;
    let full = size - 1;
    let mut meet = Vec::with_capacity(size * size);
    let mut join = Vec::with_capacity(size * size);
    for a in 0..size {
        for b in 0..size {
            meet.push((a & b) as u16);
            join.push((a | b) as u16);
        }
    }
    let neg = (0..size)
        .map(|u| {
            let reach = (0..n).filter(|&x| u >> x & 1 == 1).fold(0u64, |acc, x| acc | g.neighbors(x));
            (full & !(reach as usize)) as u16
        })
        .collect();
    let labels = (0..size)
        .map(|u| {
            let names: Vec<&str> = (0..n).filter(|&x| u >> x & 1 == 1).map(|x| g.label(x)).collect();
            format!("{{{}}}", names.join(","))
        })
        .collect();
    let designated = (0..size).map(|u| u == full).collect();
    FinMatrix::from_raw(labels, meet, join, neg, full, 0, designated)
}

/// Atom names `p_<label>`, sanitized to the formula lexer and made unique.
pub fn vertex_atoms(g: &Graph) -> Vec<String> {
    let mut out: Vec<String> = Vec::with_capacity(g.size());
    for (i, l) in g.labels().iter().enumerate() {
        let clean: String = l
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '_' })
            .collect();
        let mut name = format!("p_{clean}");
        if out.contains(&name) {
            name = format!("p_{clean}_{i}");
        }
        out.push(name);
    }
    out
}

/// `⋁_u φ_u ⊢ ∅` with `φ_u = p_u ∧ ⋀{~p_v : not u R v}`.
pub fn alpha_rule(g: &Graph) -> Result<RuleInstance> {
    if g.is_empty() {
        return Err(Error::Precondition("alpha needs a non-empty graph".into()));
    }
    if g.has_isolated_vertex() {
        return Err(Error::Precondition("alpha needs a graph without isolated vertices".into()));
    }
    let atoms = vertex_atoms(g);
    let n = g.size();
    let phi = |u: usize| {
        Formula::conj(
            std::iter::once(Formula::atom(&atoms[u]))
                .chain((0..n).filter(|&v| !g.adjacent(u, v)).map(|v| Formula::neg(Formula::atom(&atoms[v])))),
        )
    };
    Ok(RuleInstance::explosive([Formula::disj((0..n).map(phi))]))
}

/// Reads `⟨G, H, k⟩` off the components of a reduced frame.
pub fn classify_frame(p: &Frame) -> Result<TriplePresentation> {
    if !is_reduced_frame(p) {
        return Err(Error::Precondition("frame is not reduced".into()));
    }
    let mut plus = Vec::new();
    let mut minus = Vec::new();
    let mut singletons = 0;
    for comp in frame::component_masks(p) {
        let pts: Vec<usize> = (0..p.size()).filter(|&x| comp >> x & 1 == 1).collect();
        if pts.len() == 1 {
            singletons += 1;
            continue;
        }
        let d = p.designated_mask() & comp;
        let is_plus = d == comp;
        let base: Vec<usize> = if is_plus {
            let min = p.minimal(comp);
            if min & p.maximal(comp) == 0 {
                pts.iter().copied().filter(|&x| min >> x & 1 == 1).collect()
            } else {
                // Only an antichain {u, ~u}, an isolated vertex, has a point both minimal and maximal.
                vec![pts[0]]
            }
        } else {
            pts.iter().copied().filter(|&x| d >> x & 1 == 0).collect()
        };
        let not_graph = || Error::Precondition("component is not the frame of a graph".into());
        let image = base.iter().fold(0u64, |acc, &x| acc | 1 << p.invol(x));
        let base_mask = base.iter().fold(0u64, |acc, &x| acc | 1 << x);
        if image & base_mask != 0 || image | base_mask != comp {
            return Err(not_graph());
        }
        let mut edges = Vec::new();
        for (i, &u) in base.iter().enumerate() {
            for (j, &w) in base.iter().enumerate().skip(i) {
                if p.leq(u, p.invol(w)) {
                    edges.push((i, j));
                }
            }
        }
        let g = Graph::new(base.iter().map(|&x| p.labels()[x].clone()).collect(), &edges)?;
        let sub = p.subframe(comp)?;
        if !frames_isomorphic(&sub, &graph_frame(&g, is_plus)) {
            return Err(not_graph());
        }
        if is_plus {
            plus.push(g);
        } else {
            minus.push(g);
        }
    }
    let sorted_union = |mut gs: Vec<Graph>| -> Result<Graph> {
        gs.sort_by_cached_key(canonical_code);
        disjoint_union(&gs)
    };
    Ok(TriplePresentation::new(sorted_union(plus)?, sorted_union(minus)?, singletons))
}

/// Presentation of a reduced De Morgan matrix as `μ(G, H, k)`.
pub fn classify_reduced(m: &FinMatrix) -> Result<TriplePresentation> {
    if !m.is_demorgan() {
        return Err(Error::Precondition("classification needs a De Morgan matrix".into()));
    }
    let p = dual_frame(m)?;
    if !is_reduced_frame(&p) {
        return Err(Error::Precondition("matrix is not reduced".into()));
    }
    classify_frame(&p)
}

/// The matrix map `μ₊(H) → μ₊(G)` induced by a graph homomorphism `f: G → H`, taking an upset to
/// its preimage.
pub fn induced_matrix_map(g: &Graph, h: &Graph, f: &[usize]) -> Result<Vec<usize>> {
    if !graph::is_homomorphism(g, h, f) {
        return Err(Error::Precondition("not a graph homomorphism".into()));
    }
    let (pg, ph) = (p_plus(g), p_plus(h));
    let (ng, nh) = (g.size(), h.size());
    let point_map: Vec<usize> = (0..2 * ng).map(|x| if x < ng { f[x] } else { f[x - ng] + nh }).collect();
    let ups_g = pg.upsets()?;
    let idx: crate::frame::MaskMap<usize> = ups_g.iter().enumerate().map(|(i, &u)| (u, i)).collect();
    Ok(ph
        .upsets()?
        .into_iter()
        .map(|u| {
            let pre = point_map.iter().enumerate().filter(|(_, &y)| u >> y & 1 == 1).fold(0u64, |acc, (x, _)| acc | 1 << x);
            idx[&pre]
        })
        .collect())
}
