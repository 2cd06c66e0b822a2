//! Finite symmetric graphs with loops: homomorphisms, colorings and the S* rewrite steps.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_VERTICES: usize = 64;

/// Default vertex bound for [`homomorphic_images`].
pub const IMAGE_GUARD: usize = 5;

/// A finite graph with a symmetric adjacency relation; loops allowed.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Graph {
    labels: Vec<String>,
    adj: Vec<u64>,
}

fn bits(mask: u64) -> impl Iterator<Item = usize> {
    (0..64).filter(move |&i| mask >> i & 1 == 1)
}

impl Graph {
    /// Builds a graph from vertex labels and index pairs; edges are symmetrized.
    pub fn new(labels: Vec<String>, edges: &[(usize, usize)]) -> Result<Graph> {
        let n = labels.len();
        if n > MAX_VERTICES {
            return Err(Error::Guard(format!("graphs are limited to {MAX_VERTICES} vertices")));
        }
        let mut adj = vec![0u64; n];
        for &(u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::InvalidGraph(format!("edge ({u}, {v}) out of range")));
            }
            adj[u] |= 1 << v;
            adj[v] |= 1 << u;
        }
        Ok(Graph { labels, adj })
    }

    fn unlabeled(n: usize, edges: &[(usize, usize)]) -> Graph {
        Graph::new((0..n).map(|i| format!("v{i}")).collect(), edges).expect("valid")
    }

    pub fn empty() -> Graph {
        Graph { labels: Vec::new(), adj: Vec::new() }
    }

    /// A single vertex without a loop.
    pub fn point() -> Graph {
        Graph::unlabeled(1, &[])
    }

    /// A single vertex with a loop.
    pub fn loop_vertex() -> Graph {
        Graph::unlabeled(1, &[(0, 0)])
    }

    pub fn complete(n: usize) -> Graph {
        let edges: Vec<_> = (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).collect();
        Graph::unlabeled(n, &edges)
    }

    pub fn cycle(n: usize) -> Result<Graph> {
        if n < 3 {
            return Err(Error::InvalidGraph("cycles need at least 3 vertices".into()));
        }
        let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        Ok(Graph::unlabeled(n, &edges))
    }

    /// A loop vertex adjacent to an irreflexive vertex.
    pub fn g2() -> Graph {
        Graph::new(vec!["u".into(), "v".into()], &[(0, 0), (0, 1)]).expect("valid")
    }

    pub fn size(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, u: usize) -> &str {
        &self.labels[u]
    }

    #[inline]
    pub fn adjacent(&self, u: usize, v: usize) -> bool {
        self.adj[u] >> v & 1 == 1
    }

    /// Neighbors of `u` as a bitset, including `u` itself if it has a loop.
    pub fn neighbors(&self, u: usize) -> u64 {
        self.adj[u]
    }

    pub fn has_loop_at(&self, u: usize) -> bool {
        self.adjacent(u, u)
    }

    pub fn has_loop(&self) -> bool {
        (0..self.size()).any(|u| self.has_loop_at(u))
    }

    pub fn is_isolated(&self, u: usize) -> bool {
        self.adj[u] == 0
    }

    pub fn has_isolated_vertex(&self) -> bool {
        (0..self.size()).any(|u| self.is_isolated(u))
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        (0..self.size())
            .flat_map(|u| bits(self.adj[u]).filter(move |&v| v >= u).map(move |v| (u, v)))
            .collect()
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Graph {
        assert_eq!(labels.len(), self.size());
        self.labels = labels;
        self
    }

    /// Induced subgraph on a vertex bitset, vertices kept in order.
    pub fn induced(&self, mask: u64) -> Graph {
        let verts: Vec<usize> = bits(mask).filter(|&v| v < self.size()).collect();
        let adj = verts
            .iter()
            .map(|&u| verts.iter().enumerate().filter(|(_, &v)| self.adjacent(u, v)).fold(0u64, |acc, (i, _)| acc | 1 << i))
            .collect();
        Graph { labels: verts.iter().map(|&u| self.labels[u].clone()).collect(), adj }
    }

    pub fn to_json(&self) -> GraphJson {
        GraphJson {
            vertices: self.labels.clone(),
            edges: self.edges().into_iter().map(|(u, v)| [self.labels[u].clone(), self.labels[v].clone()]).collect(),
        }
    }

    pub fn from_json(j: GraphJson) -> Result<Graph> {
        let mut seen = BTreeSet::new();
        for v in &j.vertices {
            if !seen.insert(v) {
                return Err(Error::InvalidGraph(format!("duplicate vertex `{v}`")));
            }
        }
        let index = |name: &String| {
            j.vertices
                .iter()
                .position(|v| v == name)
                .ok_or_else(|| Error::InvalidGraph(format!("unknown vertex `{name}`")))
        };
        let edges = j.edges.iter().map(|[a, b]| Ok((index(a)?, index(b)?))).collect::<Result<Vec<_>>>()?;
        Graph::new(j.vertices.clone(), &edges)
    }
}

impl fmt::Display for Graph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let edges: Vec<String> = self
            .edges()
            .into_iter()
            .map(|(u, v)| format!("{}-{}", self.labels[u], self.labels[v]))
            .collect();
        write!(f, "V={{{}}} E={{{}}}", self.labels.join(","), edges.join(","))
    }
}

/// Graph file format; edges are symmetrized on load.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GraphJson {
    pub vertices: Vec<String>,
    pub edges: Vec<[String; 2]>,
}

// ---------------------------------------------------------------- unions and components

pub fn disjoint_union(gs: &[Graph]) -> Result<Graph> {
    let total: usize = gs.iter().map(|g| g.size()).sum();
    if total > MAX_VERTICES {
        return Err(Error::Guard(format!("graphs are limited to {MAX_VERTICES} vertices")));
    }
    let mut labels = Vec::with_capacity(total);
    let mut adj = Vec::with_capacity(total);
    let mut offset = 0;
    let nonempty = gs.iter().filter(|g| !g.is_empty()).count();
    for (i, g) in gs.iter().enumerate() {
        for u in 0..g.size() {
            labels.push(if nonempty > 1 { format!("{}.{}", i, g.labels[u]) } else { g.labels[u].clone() });
            adj.push(g.adj[u] << offset);
        }
        offset += g.size();
    }
    Ok(Graph { labels, adj })
}

/// Connected components as vertex bitsets, ordered by least vertex.
pub fn component_masks(g: &Graph) -> Vec<u64> {
    let mut seen = 0u64;
    let mut out = Vec::new();
    for start in 0..g.size() {
        if seen >> start & 1 == 1 {
            continue;
        }
        let mut comp = 1u64 << start;
        loop {
            let next = bits(comp).fold(comp, |acc, u| acc | g.adj[u]);
            if next == comp {
                break;
            }
            comp = next;
        }
        seen |= comp;
        out.push(comp);
    }
    out
}

pub fn components(g: &Graph) -> Vec<Graph> {
    component_masks(g).into_iter().map(|m| g.induced(m)).collect()
}

fn is_isolated_edge(g: &Graph, comp: u64) -> bool {
    comp.count_ones() == 2 && {
        let vs: Vec<usize> = bits(comp).collect();
        g.adjacent(vs[0], vs[1]) && !g.has_loop_at(vs[0]) && !g.has_loop_at(vs[1])
    }
}

/// Replaces the first isolated `K2` component by a single vertex.
pub fn contract_isolated_edge(g: &Graph) -> Option<Graph> {
    let comp = component_masks(g).into_iter().find(|&c| is_isolated_edge(g, c))?;
    let drop = bits(comp).nth(1).expect("two vertices");
    let keep = bits(comp).next().expect("two vertices");
    let mut h = g.clone();
    h.adj[keep] = 0;
    Some(h.induced(h.all_mask() & !(1 << drop)))
}

impl Graph {
    fn all_mask(&self) -> u64 {
        if self.size() == 64 {
            u64::MAX
        } else {
            (1u64 << self.size()) - 1
        }
    }
}

// ---------------------------------------------------------------- homomorphisms

/// Some edge-preserving vertex map from `g` to `h`, found by backtracking.
pub fn hom_search(g: &Graph, h: &Graph) -> Option<Vec<usize>> {
    let n = g.size();
    if n == 0 {
        return Some(Vec::new());
    }
    if h.is_empty() {
        return None;
    }
    let h_loops = (0..h.size()).filter(|&v| h.has_loop_at(v)).fold(0u64, |acc, v| acc | 1 << v);
    let h_all = h.all_mask();
    // Visit vertices so that each one after the first in its component has an assigned neighbor.
    let mut order = Vec::with_capacity(n);
    let mut placed = 0u64;
    for comp in component_masks(g) {
        let start = bits(comp).max_by_key(|&u| g.adj[u].count_ones()).expect("non-empty");
        let mut frontier = vec![start];
        placed |= 1 << start;
        while let Some(u) = frontier.pop() {
            order.push(u);
            for v in bits(g.adj[u]) {
                if placed >> v & 1 == 0 {
                    placed |= 1 << v;
                    frontier.push(v);
                }
            }
        }
    }
    let mut map = vec![usize::MAX; n];
    fn rec(g: &Graph, h: &Graph, order: &[usize], i: usize, map: &mut Vec<usize>, h_loops: u64, h_all: u64) -> bool {
        if i == order.len() {
            return true;
        }
        let u = order[i];
        let mut cand = if g.has_loop_at(u) { h_loops } else { h_all };
        for w in bits(g.adj[u]) {
            if map[w] != usize::MAX {
                cand &= h.adj[map[w]];
            }
        }
        for t in bits(cand) {
            map[u] = t;
            if rec(g, h, order, i + 1, map, h_loops, h_all) {
                return true;
            }
        }
        map[u] = usize::MAX;
        false
    }
    rec(g, h, &order, 0, &mut map, h_loops, h_all).then_some(map)
}

pub fn is_homomorphism(g: &Graph, h: &Graph, map: &[usize]) -> bool {
    map.len() == g.size()
        && map.iter().all(|&t| t < h.size())
        && g.edges().into_iter().all(|(u, v)| h.adjacent(map[u], map[v]))
}

pub fn is_n_colorable(g: &Graph, n: usize) -> bool {
    hom_search(g, &Graph::complete(n)).is_some()
}

/// A partial homomorphism to `K_n` defined on all neighbors of some vertex, as vertex-to-color pairs.
pub fn weak_n_coloring(g: &Graph, n: usize) -> Option<BTreeMap<usize, usize>> {
    let kn = Graph::complete(n);
    (0..g.size()).find_map(|u| {
        let nb = g.adj[u];
        let sub = g.induced(nb);
        hom_search(&sub, &kn).map(|colors| bits(nb).zip(colors).collect())
    })
}

pub fn is_weakly_n_colorable(g: &Graph, n: usize) -> bool {
    weak_n_coloring(g, n).is_some()
}

// ---------------------------------------------------------------- isomorphism and canonical codes

fn vertex_invariant(g: &Graph, u: usize) -> (bool, u32, Vec<u32>) {
    let mut nd: Vec<u32> = bits(g.adj[u]).map(|v| g.adj[v].count_ones()).collect();
    nd.sort_unstable();
    (g.has_loop_at(u), g.adj[u].count_ones(), nd)
}

/// A code equal for two graphs iff they are isomorphic: the least permuted adjacency matrix over
/// orderings that sort vertices by invariant.
pub fn canonical_code(g: &Graph) -> (usize, Vec<u64>) {
    let n = g.size();
    let mut verts: Vec<usize> = (0..n).collect();
    let inv: Vec<_> = (0..n).map(|u| vertex_invariant(g, u)).collect();
    verts.sort_by(|&a, &b| inv[a].cmp(&inv[b]));
    let mut classes: Vec<Vec<usize>> = Vec::new();
    for &v in &verts {
        match classes.last_mut() {
            Some(c) if inv[c[0]] == inv[v] => c.push(v),
            _ => classes.push(vec![v]),
        }
    }
    let mut best: Option<Vec<u64>> = None;
    let mut perm: Vec<usize> = Vec::with_capacity(n);
    fn encode(g: &Graph, perm: &[usize]) -> Vec<u64> {
        perm.iter()
            .map(|&u| perm.iter().enumerate().filter(|(_, &v)| g.adjacent(u, v)).fold(0u64, |acc, (i, _)| acc | 1 << i))
            .collect()
    }
    fn rec(g: &Graph, classes: &[Vec<usize>], ci: usize, used: &mut Vec<bool>, perm: &mut Vec<usize>, best: &mut Option<Vec<u64>>) {
        if ci == classes.len() {
            let code = encode(g, perm);
            if best.as_ref().is_none_or(|b| code < *b) {
                *best = Some(code);
            }
            return;
        }
        let class = &classes[ci];
        let placed_in_class = class.iter().filter(|&&v| used[v]).count();
        if placed_in_class == class.len() {
            return rec(g, classes, ci + 1, used, perm, best);
        }
        for &v in class {
            if !used[v] {
                used[v] = true;
                perm.push(v);
                rec(g, classes, ci, used, perm, best);
                perm.pop();
                used[v] = false;
            }
        }
    }
    let mut used = vec![false; n];
    rec(g, &classes, 0, &mut used, &mut perm, &mut best);
    (n, best.unwrap_or_default())
}

/// Isomorphism test by backtracking over invariant-compatible vertex assignments.
pub fn graph_isomorphism(g: &Graph, h: &Graph) -> Option<Vec<usize>> {
    let n = g.size();
    if n != h.size() {
        return None;
    }
    let ig: Vec<_> = (0..n).map(|u| vertex_invariant(g, u)).collect();
    let ih: Vec<_> = (0..n).map(|u| vertex_invariant(h, u)).collect();
    let (mut sg, mut sh) = (ig.clone(), ih.clone());
    sg.sort();
    sh.sort();
    if sg != sh {
        return None;
    }
    let mut map = vec![usize::MAX; n];
    let mut used = vec![false; n];
    #[allow(clippy::too_many_arguments)]
    fn rec(g: &Graph, h: &Graph, ig: &[(bool, u32, Vec<u32>)], ih: &[(bool, u32, Vec<u32>)], u: usize, map: &mut Vec<usize>, used: &mut Vec<bool>) -> bool {
        if u == map.len() {
            return true;
        }
        for t in 0..map.len() {
            if used[t] || ig[u] != ih[t] {
                continue;
            }
            if (0..u).all(|w| g.adjacent(u, w) == h.adjacent(t, map[w])) && g.has_loop_at(u) == h.has_loop_at(t) {
                map[u] = t;
                used[t] = true;
                if rec(g, h, ig, ih, u + 1, map, used) {
                    return true;
                }
                used[t] = false;
                map[u] = usize::MAX;
            }
        }
        false
    }
    rec(g, h, &ig, &ih, 0, &mut map, &mut used).then_some(map)
}

pub fn graph_isomorphic(g: &Graph, h: &Graph) -> bool {
    graph_isomorphism(g, h).is_some()
}

/// Representatives of all graphs with exactly `n` vertices up to isomorphism, loops allowed,
/// sorted by canonical code.
pub fn all_graphs(n: usize) -> Vec<Graph> {
    assert!(n <= 5, "graph enumeration is limited to 5 vertices");
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
    let mut seen: BTreeMap<(usize, Vec<u64>), Graph> = BTreeMap::new();
    for mask in 0u64..(1 << pairs.len()) {
        let edges: Vec<_> = bits(mask).map(|i| pairs[i]).collect();
        let g = Graph::unlabeled(n, &edges);
        seen.entry(canonical_code(&g)).or_insert(g);
    }
    seen.into_values().collect()
}

// ---------------------------------------------------------------- homomorphic images

/// Images of surjective homomorphisms of `g`, up to isomorphism, sorted by canonical code.
pub fn homomorphic_images(g: &Graph) -> Result<Vec<Graph>> {
    homomorphic_images_bounded(g, IMAGE_GUARD)
}

pub fn homomorphic_images_bounded(g: &Graph, guard: usize) -> Result<Vec<Graph>> {
    let n = g.size();
    if n > guard {
        return Err(Error::Guard(format!("homomorphic images are limited to {guard} vertices")));
    }
    let mut out: BTreeMap<(usize, Vec<u64>), Graph> = BTreeMap::new();
    let mut labels = vec![0usize; n];
    let mut parts = Vec::new();
    set_partitions(0, 0, &mut labels, &mut parts);
    for part in parts {
        let k = part.iter().copied().max().map_or(0, |m| m + 1);
        let mut base = vec![0u64; k];
        for (u, v) in g.edges() {
            base[part[u]] |= 1 << part[v];
            base[part[v]] |= 1 << part[u];
        }
        let free: Vec<(usize, usize)> = (0..k)
            .flat_map(|i| (i..k).map(move |j| (i, j)))
            .filter(|&(i, j)| base[i] >> j & 1 == 0)
            .collect();
        for extra in 0u64..(1 << free.len()) {
            let mut adj = base.clone();
            for i in bits(extra) {
                let (a, b) = free[i];
                adj[a] |= 1 << b;
                adj[b] |= 1 << a;
            }
            let h = Graph { labels: (0..k).map(|i| format!("v{i}")).collect(), adj };
            out.entry(canonical_code(&h)).or_insert(h);
        }
    }
    Ok(out.into_values().collect())
}

/// All set partitions of `0..labels.len()` as restricted growth strings.
fn set_partitions(i: usize, next: usize, labels: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if i == labels.len() {
        out.push(labels.clone());
        return;
    }
    for l in 0..=next {
        labels[i] = l;
        set_partitions(i + 1, next.max(l + 1), labels, out);
    }
}

// ---------------------------------------------------------------- S* steps

/// A graph with a counter of extra designated singletons.
#[derive(Clone, Debug)]
pub struct GraphPair {
    pub graph: Graph,
    pub counter: usize,
}

impl GraphPair {
    pub fn new(graph: Graph, counter: usize) -> Self {
        GraphPair { graph, counter }
    }

    pub fn key(&self) -> ((usize, Vec<u64>), usize) {
        (canonical_code(&self.graph), self.counter)
    }
}

impl PartialEq for GraphPair {
    /// Equality up to graph isomorphism.
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}

impl Eq for GraphPair {}

impl fmt::Display for GraphPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{}, {}>", self.graph, self.counter)
    }
}

/// Pairs reachable by one operation: a homomorphic image; contracting an isolated edge; dropping a
/// non-empty union of components and incrementing the counter; decrementing a counter of at least 2;
/// or going from counter 1 to 0 when the graph has a loop. Sorted and deduplicated up to isomorphism.
pub fn s_star_step(p: &GraphPair) -> Result<Vec<GraphPair>> {
    let g = &p.graph;
    let i = p.counter;
    let mut out: BTreeMap<((usize, Vec<u64>), usize), GraphPair> = BTreeMap::new();
    let mut push = |q: GraphPair| {
        out.entry(q.key()).or_insert(q);
    };
    for h in homomorphic_images(g)? {
        push(GraphPair::new(h, i));
    }
    if let Some(h) = contract_isolated_edge(g) {
        push(GraphPair::new(h, i));
    }
    let comps = component_masks(g);
    for sel in 1u64..(1 << comps.len()) {
        let dropped = bits(sel).fold(0u64, |acc, c| acc | comps[c]);
        push(GraphPair::new(g.induced(g.all_mask() & !dropped), i + 1));
    }
    if i >= 2 {
        push(GraphPair::new(g.clone(), i - 1));
    }
    if i == 1 && g.has_loop() {
        push(GraphPair::new(g.clone(), 0));
    }
    Ok(out.into_values().collect())
}

/// Everything reachable from `p` in at most `steps` operations, including `p`.
pub fn s_star_closure(p: &GraphPair, steps: usize) -> Result<Vec<GraphPair>> {
    let mut seen: BTreeMap<((usize, Vec<u64>), usize), GraphPair> = BTreeMap::new();
    seen.insert(p.key(), p.clone());
    let mut frontier = vec![p.clone()];
    for _ in 0..steps {
        let mut next = Vec::new();
        for q in &frontier {
            for r in s_star_step(q)? {
                if !seen.contains_key(&r.key()) {
                    seen.insert(r.key(), r.clone());
                    next.push(r);
                }
            }
        }
        if next.is_empty() {
            break;
        }
        frontier = next;
    }
    Ok(seen.into_values().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k(n: usize) -> Graph {
        Graph::complete(n)
    }

    /// All vertex maps, checked one by one.
    fn hom_oracle(g: &Graph, h: &Graph) -> bool {
        let (n, m) = (g.size(), h.size());
        if n == 0 {
            return true;
        }
        if m == 0 {
            return false;
        }
        let mut map = vec![0usize; n];
        loop {
            if is_homomorphism(g, h, &map) {
                return true;
            }
            let mut i = 0;
            loop {
                if i == n {
                    return false;
                }
                map[i] += 1;
                if map[i] < m {
                    break;
                }
                map[i] = 0;
                i += 1;
            }
        }
    }

    /// Brute force over partial maps: some domain covering all neighbors of some vertex, with an edge-respecting coloring.
    fn weak_oracle(g: &Graph, n: usize) -> bool {
        let size = g.size();
        for dom in 0u64..(1 << size) {
            if !(0..size).any(|u| g.neighbors(u) & !dom == 0) {
                continue;
            }
            let verts: Vec<usize> = bits(dom).collect();
            let mut colors = vec![0usize; verts.len()];
            loop {
                let ok = verts.iter().enumerate().all(|(i, &u)| {
                    verts.iter().enumerate().all(|(j, &v)| !g.adjacent(u, v) || colors[i] != colors[j])
                });
                if ok {
                    return true;
                }
                let mut i = 0;
                loop {
                    if i == verts.len() {
                        break;
                    }
                    colors[i] += 1;
                    if colors[i] < n {
                        break;
                    }
                    colors[i] = 0;
                    i += 1;
                }
                if i == verts.len() {
                    break;
                }
            }
        }
        false
    }

    #[test]
    fn hom_examples() {
        assert!(hom_search(&k(2), &k(3)).is_some());
        assert!(hom_search(&k(3), &k(2)).is_none());
        let c5 = Graph::cycle(5).unwrap();
        let m = hom_search(&c5, &k(3)).unwrap();
        assert!(is_homomorphism(&c5, &k(3), &m));
        assert!(hom_search(&Graph::empty(), &Graph::empty()).is_some());
        assert!(hom_search(&Graph::point(), &Graph::empty()).is_none());
    }

    #[test]
    fn hom_search_matches_oracle() {
        let mut pool = Vec::new();
        for n in 1..=3 {
            pool.extend(all_graphs(n));
        }
        for g in &pool {
            for h in &pool {
                assert_eq!(hom_search(g, h).is_some(), hom_oracle(g, h), "{g} -> {h}");
            }
        }
    }

    #[test]
    fn coloring_examples() {
        assert!(is_n_colorable(&k(2), 2));
        for n in 1..=4 {
            assert!(!is_n_colorable(&Graph::loop_vertex(), n));
            assert!(!is_n_colorable(&Graph::g2(), n));
        }
        assert!(!is_n_colorable(&k(4), 3));
        assert_eq!(weak_n_coloring(&Graph::point(), 1), Some(BTreeMap::new()));
        for n in 1..=4 {
            assert!(weak_n_coloring(&Graph::g2(), n).is_none());
        }
        for n in [1, 2] {
            assert!(is_n_colorable(&k(n + 2), n + 2));
            assert!(weak_n_coloring(&k(n + 2), n).is_none());
        }
    }

    #[test]
    fn weak_coloring_matches_oracle() {
        for size in 1..=4 {
            for g in all_graphs(size) {
                for n in 1..=3 {
                    assert_eq!(is_weakly_n_colorable(&g, n), weak_oracle(&g, n), "{g} n={n}");
                    if let Some(map) = weak_n_coloring(&g, n) {
                        let dom = map.keys().fold(0u64, |acc, &u| acc | 1 << u);
                        assert!((0..g.size()).any(|u| g.neighbors(u) & !dom == 0));
                        for (&u, &cu) in &map {
                            for (&v, &cv) in &map {
                                assert!(!g.adjacent(u, v) || cu != cv);
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn reflexive_neighbor_characterization() {
        // No weak n-coloring for n <= 5 iff every irreflexive vertex has a reflexive neighbor.
        for size in 1..=4 {
            for g in all_graphs(size) {
                let none = (1..=5).all(|n| !is_weakly_n_colorable(&g, n));
                let cond = (0..g.size()).all(|u| g.has_loop_at(u) || bits(g.neighbors(u)).any(|v| g.has_loop_at(v)));
                assert_eq!(none, cond, "{g}");
                // The bound n = |V| + 1 already decides it.
                assert_eq!(!is_weakly_n_colorable(&g, g.size() + 1), cond, "{g}");
            }
        }
    }

    #[test]
    fn union_contraction_components() {
        let g = disjoint_union(&[k(2), k(3)]).unwrap();
        let c = contract_isolated_edge(&g).unwrap();
        assert!(graph_isomorphic(&c, &disjoint_union(&[Graph::point(), k(3)]).unwrap()));
        assert!(contract_isolated_edge(&k(3)).is_none());
        assert!(Graph::g2().has_loop());
        let h = disjoint_union(&[k(2), Graph::point(), Graph::loop_vertex()]).unwrap();
        assert_eq!(components(&h).len(), 3);
    }

    #[test]
    fn isomorphism_examples() {
        assert!(graph_isomorphic(&k(3), &k(3)));
        assert!(!graph_isomorphic(&k(2), &disjoint_union(&[Graph::point(), Graph::point()]).unwrap()));
        let c6 = Graph::cycle(6).unwrap();
        let two_triangles = disjoint_union(&[k(3), k(3)]).unwrap();
        assert!(!graph_isomorphic(&c6, &two_triangles));
        let relabeled = Graph::new((0..6).map(|i| i.to_string()).collect(), &[(0, 2), (2, 4), (4, 1), (1, 3), (3, 5), (5, 0)]).unwrap();
        assert!(graph_isomorphic(&c6, &relabeled));
        for n in 1..=4 {
            for g in all_graphs(n) {
                for h in all_graphs(n) {
                    assert_eq!(graph_isomorphic(&g, &h), canonical_code(&g) == canonical_code(&h));
                }
            }
        }
    }

    #[test]
    fn graph_counts() {
        // Loops allowed: 2, 6, 20, 90 graphs on 1..4 vertices.
        let counts: Vec<usize> = (1..=4).map(|n| all_graphs(n).len()).collect();
        assert_eq!(counts, vec![2, 6, 20, 90]);
    }

    #[test]
    fn images_of_small_graphs() {
        let imgs = homomorphic_images(&k(2)).unwrap();
        assert!(imgs.iter().any(|h| graph_isomorphic(h, &Graph::loop_vertex())));
        // K2, K2 with one loop, K2 with two loops, and the loop vertex.
        assert_eq!(imgs.len(), 4);
        let two = disjoint_union(&[Graph::point(), Graph::point()]).unwrap();
        assert!(homomorphic_images(&two).unwrap().iter().any(|h| graph_isomorphic(h, &Graph::point())));
        assert!(homomorphic_images(&k(6)).is_err());
        for g in all_graphs(3) {
            for h in homomorphic_images(&g).unwrap() {
                assert!(hom_search(&g, &h).is_some());
            }
        }
    }

    #[test]
    fn s_star_examples() {
        let steps = s_star_step(&GraphPair::new(k(2), 0)).unwrap();
        assert!(steps.contains(&GraphPair::new(Graph::point(), 0)));
        assert!(steps.contains(&GraphPair::new(Graph::empty(), 1)));
        let steps = s_star_step(&GraphPair::new(Graph::loop_vertex(), 1)).unwrap();
        assert!(steps.contains(&GraphPair::new(Graph::loop_vertex(), 0)));
        let steps = s_star_step(&GraphPair::new(k(3), 2)).unwrap();
        assert!(steps.contains(&GraphPair::new(k(3), 1)));
        let steps = s_star_step(&GraphPair::new(k(3), 1)).unwrap();
        assert!(!steps.contains(&GraphPair::new(k(3), 0)));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_graph() -> impl Strategy<Value = Graph> {
            (1usize..=5).prop_flat_map(|n| {
                let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
                prop::collection::vec(any::<bool>(), pairs.len()).prop_map(move |keep| {
                    let edges: Vec<_> = pairs.iter().zip(keep).filter(|(_, k)| *k).map(|(p, _)| *p).collect();
                    Graph::unlabeled(n, &edges)
                })
            })
        }

        proptest! {
            #[test]
            fn homomorphisms_compose(g in arb_graph(), h in arb_graph(), k in arb_graph()) {
                if let (Some(f1), Some(f2)) = (hom_search(&g, &h), hom_search(&h, &k)) {
                    let comp: Vec<usize> = f1.iter().map(|&x| f2[x]).collect();
                    prop_assert!(is_homomorphism(&g, &k, &comp));
                    prop_assert!(hom_search(&g, &k).is_some());
                }
            }

            #[test]
            fn colorability_is_monotone(g in arb_graph(), n in 1usize..5) {
                if is_n_colorable(&g, n) {
                    prop_assert!(is_n_colorable(&g, n + 1));
                }
                if is_weakly_n_colorable(&g, n) {
                    prop_assert!(is_weakly_n_colorable(&g, n + 1));
                }
            }

            #[test]
            fn canonical_code_is_label_invariant(g in arb_graph(), seed in any::<u64>()) {
                let n = g.size();
                let mut perm: Vec<usize> = (0..n).collect();
                let mut s = seed;
                for i in (1..n).rev() {
                    s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    perm.swap(i, (s >> 33) as usize % (i + 1));
                }
                let edges: Vec<_> = g.edges().into_iter().map(|(u, v)| (perm[u], perm[v])).collect();
                let h = Graph::unlabeled(n, &edges);
                prop_assert_eq!(canonical_code(&g), canonical_code(&h));
                prop_assert!(graph_isomorphic(&g, &h));
            }
        }
    }
}
