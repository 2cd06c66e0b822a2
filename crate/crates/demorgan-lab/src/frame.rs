//! Finite involutive posets with a designated upset, and their duality with De Morgan matrices.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::hash::{BuildHasherDefault, Hasher};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formula::{Formula, RuleInstance};
use crate::matrix::{find_isomorphism, FinMatrix, MAX_CARRIER};

pub const MAX_POINTS: usize = 64;

/// A finite poset with an order-inverting involution `∂` and a designated upset `D`.
///
/// Order rows are bitsets: bit `y` of `up[x]` is set iff `x <= y`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frame {
    labels: Vec<String>,
    up: Vec<u64>,
    invol: Vec<usize>,
    designated: u64,
}

fn bits(mask: u64) -> impl Iterator<Item = usize> {
    (0..64).filter(move |&i| mask >> i & 1 == 1)
}

fn full_mask(n: usize) -> u64 {
    if n == 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

impl Frame {
    /// Builds a frame from generating order pairs `(x, y)` meaning `x <= y`; the reflexive-transitive
    /// closure is taken and all frame axioms are checked.
    pub fn new(labels: Vec<String>, pairs: &[(usize, usize)], invol: Vec<usize>, designated: &[usize]) -> Result<Frame> {
        let n = labels.len();
        if n > MAX_POINTS {
            return Err(Error::Guard(format!("frames are limited to {MAX_POINTS} points")));
        }
        let mut up: Vec<u64> = (0..n).map(|x| 1u64 << x).collect();
        for &(x, y) in pairs {
            if x >= n || y >= n {
                return Err(Error::InvalidFrame("order pair out of range".into()));
            }
            up[x] |= 1 << y;
        }
        transitive_close(&mut up);
        let mut d = 0u64;
        for &x in designated {
            if x >= n {
                return Err(Error::InvalidFrame("designated point out of range".into()));
            }
            d |= 1 << x;
        }
        let f = Frame { labels, up, invol, designated: d };
        f.validate()?;
        Ok(f)
    }

    /// Builds a frame from order rows that are already closed.
    pub(crate) fn from_rows(labels: Vec<String>, up: Vec<u64>, invol: Vec<usize>, designated: u64) -> Result<Frame> {
        let f = Frame { labels, up, invol, designated };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.size();
        let bad = |s: &str| Err(Error::InvalidFrame(s.to_string()));
        if self.up.len() != n || self.invol.len() != n {
            return bad("dimension mismatch");
        }
        if n > MAX_POINTS {
            return bad("too many points");
        }
        if self.designated & !full_mask(n) != 0 {
            return bad("designated point out of range");
        }
        for x in 0..n {
            if self.up[x] >> x & 1 == 0 {
                return bad("order is not reflexive");
            }
            if self.invol[x] >= n || self.invol[self.invol[x]] != x {
                return bad("involution is not an involution");
            }
            for y in bits(self.up[x]) {
                if y >= n {
                    return bad("order pair out of range");
                }
                if y != x && self.up[y] >> x & 1 == 1 {
                    return bad("order is not antisymmetric");
                }
                if self.up[y] & !self.up[x] != 0 {
                    return bad("order is not transitive");
                }
                if !self.leq(self.invol[y], self.invol[x]) {
                    return bad("involution is not order-inverting");
                }
                if self.is_designated(x) && !self.is_designated(y) {
                    return bad("designated set is not an upset");
                }
            }
        }
        Ok(())
    }

    pub fn size(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    #[inline]
    pub fn leq(&self, x: usize, y: usize) -> bool {
        self.up[x] >> y & 1 == 1
    }

    /// Bitset of points above `x`.
    pub fn up_set(&self, x: usize) -> u64 {
        self.up[x]
    }

    /// Bitset of points below `x`.
    pub fn down_set(&self, x: usize) -> u64 {
        (0..self.size()).filter(|&y| self.leq(y, x)).fold(0, |acc, y| acc | 1 << y)
    }

    pub fn invol(&self, x: usize) -> usize {
        self.invol[x]
    }

    pub fn is_designated(&self, x: usize) -> bool {
        self.designated >> x & 1 == 1
    }

    pub fn designated_mask(&self) -> u64 {
        self.designated
    }

    pub fn all_mask(&self) -> u64 {
        full_mask(self.size())
    }

    pub fn image(&self, mask: u64) -> u64 {
        bits(mask).fold(0, |acc, x| acc | 1 << self.invol[x])
    }

    pub fn minimal(&self, mask: u64) -> u64 {
        bits(mask)
            .filter(|&x| bits(mask).all(|y| y == x || !self.leq(y, x)))
            .fold(0, |acc, x| acc | 1 << x)
    }

    pub fn maximal(&self, mask: u64) -> u64 {
        bits(mask)
            .filter(|&x| bits(mask).all(|y| y == x || !self.leq(x, y)))
            .fold(0, |acc, x| acc | 1 << x)
    }

    pub fn is_upset(&self, mask: u64) -> bool {
        bits(mask).all(|x| self.up[x] & !mask == 0)
    }

    /// All upsets, sorted by bitmask.
    pub fn upsets(&self) -> Result<Vec<u64>> {
        let n = self.size();
        let down: Vec<u64> = (0..n).map(|x| self.down_set(x)).collect();
        let mut out = Vec::new();
        let mut stack = vec![(0usize, 0u64, 0u64)];
        while let Some((i, inside, outside)) = stack.pop() {
            if i == n {
                out.push(inside);
                if out.len() > MAX_CARRIER {
                    return Err(Error::Guard(format!("more than {MAX_CARRIER} upsets")));
                }
                continue;
            }
            if (inside | outside) >> i & 1 == 1 {
                stack.push((i + 1, inside, outside));
                continue;
            }
            stack.push((i + 1, inside, outside | down[i]));
            stack.push((i + 1, inside | self.up[i], outside));
        }
        out.sort_unstable();
        Ok(out)
    }

    /// Induced subframe on a `∂`-closed point set, points kept in order.
    pub fn subframe(&self, mask: u64) -> Result<Frame> {
        if self.image(mask) != mask {
            return Err(Error::Precondition("subframe point set is not closed under the involution".into()));
        }
        let pts: Vec<usize> = bits(mask).collect();
        let idx: HashMap<usize, usize> = pts.iter().enumerate().map(|(i, &x)| (x, i)).collect();
        let remap = |m: u64| bits(m & mask).fold(0u64, |acc, y| acc | 1 << idx[&y]);
        Frame::from_rows(
            pts.iter().map(|&x| self.labels[x].clone()).collect(),
            pts.iter().map(|&x| remap(self.up[x])).collect(),
            pts.iter().map(|&x| idx[&self.invol[x]]).collect(),
            remap(self.designated),
        )
    }

    pub fn to_json(&self) -> FrameJson {
        let n = self.size();
        FrameJson {
            points: self.labels.clone(),
            leq: (0..n)
                .flat_map(|x| bits(self.up[x]).filter(move |&y| y != x).map(move |y| [x, y]))
                .collect(),
            invol: self.invol.clone(),
            designated: bits(self.designated).collect(),
        }
    }

    pub fn from_json(j: FrameJson) -> Result<Frame> {
        let pairs: Vec<(usize, usize)> = j.leq.iter().map(|p| (p[0], p[1])).collect();
        Frame::new(j.points, &pairs, j.invol, &j.designated)
    }

    pub fn render(&self) -> String {
        let n = self.size();
        let name = |m: u64| bits(m).map(|x| self.labels[x].as_str()).collect::<Vec<_>>().join(" ");
        let mut out = format!("points: {}\n", name(self.all_mask()));
        out += &format!("designated: {}\n", name(self.designated));
        out += "involution:";
        for x in 0..n {
            out += &format!(" {}->{}", self.labels[x], self.labels[self.invol[x]]);
        }
        out += "\norder:";
        for x in 0..n {
            for y in bits(self.up[x]) {
                if y != x && bits(self.up[x]).all(|z| z == x || z == y || !self.leq(z, y)) {
                    out += &format!(" {}<{}", self.labels[x], self.labels[y]);
                }
            }
        }
        out.push('\n');
        out
    }

    // ------------------------------------------------------------ refutation search

    /// Searches for a valuation on the complex matrix refuting `r`, returned as one upset per atom.
    ///
    /// A valuation is an assignment of atom sets `s(x)` to points, monotone along the order. Truth of a
    /// formula at `x` depends only on `s(x)` and `s(∂x)`, so the search runs over `∂`-orbits.
    pub fn refute(&self, r: &RuleInstance) -> Option<BTreeMap<String, u64>> {
        let atoms: Vec<String> = r.atoms().into_iter().collect();
        let k = atoms.len();
        assert!(k <= 12, "refutation search supports at most 12 atoms");
        let prog = PointProgram::compile(r, &atoms);
        let sets = 1usize << k;
        let all_concl: u32 = if prog.conclusions.len() >= 32 { u32::MAX } else { (1u32 << prog.conclusions.len()) - 1 };

        // Per (A, B): whether all premises hold, and which conclusions fail, at a point seeing A and B.
        let mut prem_ok = vec![false; sets * sets];
        let mut fails = vec![0u32; sets * sets];
        let mut buf = vec![(false, false); prog.nodes.len()];
        for a in 0..sets {
            for b in 0..sets {
                prog.eval(a as u32, b as u32, &mut buf);
                prem_ok[a * sets + b] = prog.premises.iter().all(|&p| buf[p].0);
                fails[a * sets + b] = prog
                    .conclusions
                    .iter()
                    .enumerate()
                    .filter(|(_, &c)| !buf[c].0)
                    .fold(0, |acc, (i, _)| acc | 1 << i);
            }
        }

        let n = self.size();
        let orbits: Vec<(usize, usize)> = (0..n).filter(|&x| x <= self.invol[x]).map(|x| (x, self.invol[x])).collect();
        let domains: Vec<Vec<(u32, u32, u32)>> = orbits
            .iter()
            .map(|&(x, y)| {
                let mut dom = Vec::new();
                for a in 0..sets {
                    for b in 0..sets {
                        let (sa, sb) = (a as u32, b as u32);
                        if (x == y && a != b)
                            || (self.leq(x, y) && sa & !sb != 0)
                            || (self.leq(y, x) && sb & !sa != 0)
                        {
                            continue;
                        }
                        let mut ok = true;
                        let mut f = 0;
                        if self.is_designated(x) {
                            ok &= prem_ok[a * sets + b];
                            f |= fails[a * sets + b];
                        }
                        if self.is_designated(y) {
                            ok &= prem_ok[b * sets + a];
                            f |= fails[b * sets + a];
                        }
                        if ok {
                            dom.push((a as u32, b as u32, f));
                        }
                    }
                }
                dom
            })
            .collect();
        let values = OrbitSearch::new(self, &orbits, all_concl).run(domains)?;
        Some(
            atoms
                .iter()
                .enumerate()
                .map(|(i, atom)| {
                    let mask = orbits
                        .iter()
                        .zip(&values)
                        .flat_map(|(&(x, y), &(a, b))| [(x, a), (y, b)])
                        .filter(|&(_, set)| set >> i & 1 == 1)
                        .fold(0u64, |acc, (x, _)| acc | 1 << x);
                    (atom.clone(), mask)
                })
                .collect(),
        )
    }
}

/// Domain entry for an orbit `(x, ∂x)`: atom sets at `x` and `∂x`, and the conclusions failing there.
type Entry = (u32, u32, u32);

/// Backtracking over `∂`-orbits with forward checking of monotonicity.
struct OrbitSearch {
    /// `links[i][j]`: pairs `(side of i, side of j, i below j)` of comparable points.
    links: Vec<Vec<Vec<(usize, usize, bool)>>>,
    all_concl: u32,
}

impl OrbitSearch {
    fn new(frame: &Frame, orbits: &[(usize, usize)], all_concl: u32) -> Self {
        let m = orbits.len();
        let side = |o: (usize, usize), s: usize| if s == 0 { o.0 } else { o.1 };
        let mut links = vec![vec![Vec::new(); m]; m];
        for i in 0..m {
            for j in 0..m {
                if i == j {
                    continue;
                }
                for si in 0..2 {
                    for sj in 0..2 {
                        let (x, y) = (side(orbits[i], si), side(orbits[j], sj));
                        if frame.leq(x, y) {
                            links[i][j].push((si, sj, true));
                        }
                        if frame.leq(y, x) {
                            links[i][j].push((si, sj, false));
                        }
                    }
                }
            }
        }
        OrbitSearch { links, all_concl }
    }

    fn compatible(&self, i: usize, e: Entry, j: usize, g: Entry) -> bool {
        self.links[i][j].iter().all(|&(si, sj, below)| {
            let a = if si == 0 { e.0 } else { e.1 };
            let b = if sj == 0 { g.0 } else { g.1 };
            if below {
                a & !b == 0
            } else {
                b & !a == 0
            }
        })
    }

    /// Values per orbit of a refutation, if one exists.
    ///
    /// Orbits with no order links between them are solved separately: each component reports
    /// which sets of conclusions it can fail, and the components are then combined.
    fn run(&self, domains: Vec<Vec<Entry>>) -> Option<Vec<(u32, u32)>> {
        let m = domains.len();
        let mut out = vec![(0, 0); m];
        let comps = self.components(m);
        if comps.len() == 1 || self.all_concl.count_ones() > 6 {
            let all: Vec<usize> = (0..m).collect();
            return self.solve_target(&domains, &all, self.all_concl, &mut out).then_some(out);
        }
        // reach[mask] = chosen fail mask per component processed so far.
        let mut reach: HashMap<u32, Vec<u32>> = HashMap::from([(0, Vec::new())]);
        let mut witnesses: Vec<HashMap<u32, Vec<(u32, u32)>>> = Vec::with_capacity(comps.len());
        for comp in &comps {
            let mut found = HashMap::new();
            for target in 0..=self.all_concl {
                if target & !self.all_concl != 0 {
                    continue;
                }
                let mut part = vec![(0, 0); m];
                if self.solve_target(&domains, comp, target, &mut part) {
                    found.insert(target, part);
                } else if target == 0 {
                    return None;
                }
            }
            let mut next: HashMap<u32, Vec<u32>> = HashMap::new();
            for (acc, picks) in &reach {
                for &t in found.keys() {
                    next.entry(acc | t).or_insert_with(|| {
                        let mut p = picks.clone();
                        p.push(t);
                        p
                    });
                }
            }
            reach = next;
            witnesses.push(found);
        }
        let picks = reach.get(&self.all_concl)?;
        for ((comp, found), t) in comps.iter().zip(&witnesses).zip(picks) {
            let part = &found[t];
            for &i in comp {
                out[i] = part[i];
            }
        }
        Some(out)
    }

    /// Connected components of the orbits under the link relation.
    fn components(&self, m: usize) -> Vec<Vec<usize>> {
        let mut comp = vec![usize::MAX; m];
        let mut out = Vec::new();
        for start in 0..m {
            if comp[start] != usize::MAX {
                continue;
            }
            let id = out.len();
            let mut members = vec![start];
            comp[start] = id;
            let mut k = 0;
            while k < members.len() {
                let i = members[k];
                k += 1;
                for j in 0..m {
                    if comp[j] == usize::MAX && !self.links[i][j].is_empty() {
                        comp[j] = id;
                        members.push(j);
                    }
                }
            }
            out.push(members);
        }
        out
    }

    /// An assignment to the orbits in `orbits` failing every conclusion in `target`.
    fn solve_target(&self, domains: &[Vec<Entry>], orbits: &[usize], target: u32, out: &mut [(u32, u32)]) -> bool {
        if target == 0 {
            let rem = orbits.iter().map(|&j| (j, domains[j].clone())).collect();
            return self.solve(rem, 0, target, out);
        }
        // Branch on the first orbit at which the lowest targeted conclusion fails.
        let bit = target & target.wrapping_neg();
        for pos in 0..orbits.len() {
            let rem: Vec<(usize, Vec<Entry>)> = orbits
                .iter()
                .enumerate()
                .map(|(k, &j)| {
                    let keep = |e: &&Entry| match k.cmp(&pos) {
                        std::cmp::Ordering::Less => e.2 & bit == 0,
                        std::cmp::Ordering::Equal => e.2 & bit != 0,
                        std::cmp::Ordering::Greater => true,
                    };
                    (j, domains[j].iter().filter(keep).copied().collect())
                })
                .collect();
            if self.solve(rem, 0, target, out) {
                return true;
            }
        }
        false
    }

    fn solve(&self, mut rem: Vec<(usize, Vec<Entry>)>, failed: u32, target: u32, out: &mut [(u32, u32)]) -> bool {
        if rem.is_empty() {
            return failed & target == target;
        }
        let reach = rem.iter().flat_map(|(_, d)| d).fold(failed, |acc, e| acc | e.2);
        if reach & target != target || rem.iter().any(|(_, d)| d.is_empty()) {
            return false;
        }
        let pick = (0..rem.len()).min_by_key(|&k| rem[k].1.len()).expect("non-empty");
        let (i, dom) = rem.swap_remove(pick);
        for e in dom {
            let next: Vec<(usize, Vec<Entry>)> = rem
                .iter()
                .map(|(j, d)| {
                    if self.links[i][*j].is_empty() {
                        (*j, d.clone())
                    } else {
                        (*j, d.iter().copied().filter(|&g| self.compatible(i, e, *j, g)).collect())
                    }
                })
                .collect();
            if next.iter().any(|(_, d)| d.is_empty()) {
                continue;
            }
            if self.solve(next, failed | e.2, target, out) {
                out[i] = (e.0, e.1);
                return true;
            }
        }
        false
    }
}

#[derive(Clone, Copy)]
enum PNode {
    Atom(usize),
    Top,
    Bot,
    Neg(usize),
    And(usize, usize),
    Or(usize, usize),
}

struct PointProgram {
    nodes: Vec<PNode>,
    premises: Vec<usize>,
    conclusions: Vec<usize>,
}

impl PointProgram {
    fn compile(r: &RuleInstance, atoms: &[String]) -> PointProgram {
        let mut p = PointProgram { nodes: Vec::new(), premises: Vec::new(), conclusions: Vec::new() };
        let mut memo = HashMap::new();
        for f in &r.premises {
            let id = p.add(f, atoms, &mut memo);
            p.premises.push(id);
        }
        for f in &r.conclusions {
            let id = p.add(f, atoms, &mut memo);
            p.conclusions.push(id);
        }
        p
    }

    fn add(&mut self, f: &Formula, atoms: &[String], memo: &mut HashMap<Formula, usize>) -> usize {
        if let Some(&id) = memo.get(f) {
            return id;
        }
        let node = match f {
            Formula::Atom(a) => PNode::Atom(atoms.binary_search(a).expect("atom collected")),
            Formula::Top => PNode::Top,
            Formula::Bot => PNode::Bot,
            Formula::Neg(g) => PNode::Neg(self.add(g, atoms, memo)),
            Formula::And(a, b) => {
                let (x, y) = (self.add(a, atoms, memo), self.add(b, atoms, memo));
                PNode::And(x, y)
            }
            Formula::Or(a, b) => {
                let (x, y) = (self.add(a, atoms, memo), self.add(b, atoms, memo));
                PNode::Or(x, y)
            }
        };
        self.nodes.push(node);
        memo.insert(f.clone(), self.nodes.len() - 1);
        self.nodes.len() - 1
    }

    /// Fills `(holds at a point with sets (a, b), holds at a point with sets (b, a))` per node.
    fn eval(&self, a: u32, b: u32, out: &mut [(bool, bool)]) {
        for (i, node) in self.nodes.iter().enumerate() {
            out[i] = match *node {
                PNode::Atom(k) => (a >> k & 1 == 1, b >> k & 1 == 1),
                PNode::Top => (true, true),
                PNode::Bot => (false, false),
                PNode::Neg(x) => (!out[x].1, !out[x].0),
                PNode::And(x, y) => (out[x].0 && out[y].0, out[x].1 && out[y].1),
                PNode::Or(x, y) => (out[x].0 || out[y].0, out[x].1 || out[y].1),
            };
        }
    }
}

fn transitive_close(up: &mut [u64]) {
    let n = up.len();
    loop {
        let mut changed = false;
        for x in 0..n {
            let mut row = up[x];
            for y in bits(up[x]) {
                row |= up[y];
            }
            if row != up[x] {
                up[x] = row;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
}

/// Frame file format; `leq` lists generating pairs.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FrameJson {
    pub points: Vec<String>,
    pub leq: Vec<[usize; 2]>,
    pub invol: Vec<usize>,
    pub designated: Vec<usize>,
}

// ---------------------------------------------------------------- duality

/// Multiplicative hash for point masks; the default hasher dominates complex-matrix construction.
#[derive(Default)]
pub(crate) struct MaskHasher(u64);

impl Hasher for MaskHasher {
    fn finish(&self) -> u64 {
        self.0
    }

    fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 = (self.0.rotate_left(8) ^ b as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        }
    }

    fn write_u64(&mut self, x: u64) {
        self.0 = (x ^ x >> 29).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    }
}

pub(crate) type MaskMap<V> = HashMap<u64, V, BuildHasherDefault<MaskHasher>>;


/// Matrix of upsets: meet and join are intersection and union, `~U = P \ ∂[U]`,
/// and the designated upsets are those containing `D`.
pub fn complex_matrix(p: &Frame) -> Result<FinMatrix> {
    let ups = p.upsets()?;
    let idx: MaskMap<usize> = ups.iter().enumerate().map(|(i, &u)| (u, i)).collect();
    let k = ups.len();
    let mut meet = Vec::with_capacity(k * k);
    let mut join = Vec::with_capacity(k * k);
    for &u in &ups {
        for &v in &ups {
            meet.push(idx[&(u & v)] as u16);
            join.push(idx[&(u | v)] as u16);
        }
    }
    let all = p.all_mask();
    let neg = ups.iter().map(|&u| idx[&(all & !p.image(u))] as u16).collect();
    let label = |u: u64| format!("{{{}}}", bits(u).map(|x| p.labels[x].as_str()).collect::<Vec<_>>().join(","));
    FinMatrix::from_raw(
        ups.iter().map(|&u| label(u)).collect(),
        meet,
        join,
        neg,
        idx[&all],
        idx[&0],
        ups.iter().map(|&u| u & p.designated == p.designated).collect(),
    )
}

/// A dual frame together with the join-irreducible element each point stands for.
#[derive(Clone, Debug)]
pub struct DualFrame {
    pub frame: Frame,
    pub points: Vec<usize>,
}

impl DualFrame {
    /// Inverse of the unit map: the element whose join-irreducibles are the points of `upset`.
    pub fn element_of_upset(&self, m: &FinMatrix, upset: u64) -> usize {
        bits(upset).fold(m.bottom(), |acc, x| m.join(acc, self.points[x]))
    }

    /// Unit map: the upset of points below `a` in the matrix order.
    pub fn upset_of_element(&self, m: &FinMatrix, a: usize) -> u64 {
        self.points
            .iter()
            .enumerate()
            .filter(|(_, &j)| m.leq(j, a))
            .fold(0, |acc, (x, _)| acc | 1 << x)
    }
}

/// Points are the prime filters, represented by their join-irreducible generators.
pub fn dual_frame_with_points(m: &FinMatrix) -> Result<DualFrame> {
    if !m.is_demorgan() {
        return Err(Error::Precondition("dual frames need a De Morgan matrix".into()));
    }
    if !m.designated_is_filter() {
        return Err(Error::Precondition("dual frames need a non-empty designated filter".into()));
    }
    let js = m.join_irreducibles();
    if js.len() > MAX_POINTS {
        return Err(Error::Guard(format!("more than {MAX_POINTS} prime filters")));
    }
    let pos: HashMap<usize, usize> = js.iter().enumerate().map(|(i, &j)| (j, i)).collect();
    let floor = m.designated().into_iter().fold(m.top(), |acc, a| m.meet(acc, a));
    let up: Vec<u64> = js
        .iter()
        .map(|&j| js.iter().enumerate().filter(|(_, &k)| m.leq(k, j)).fold(0u64, |acc, (y, _)| acc | 1 << y))
        .collect();
    let invol = js.iter().map(|&j| pos[&m.ji_partner(j)]).collect();
    let designated = js.iter().enumerate().filter(|(_, &j)| m.leq(j, floor)).fold(0u64, |acc, (x, _)| acc | 1 << x);
    let frame = Frame::from_rows(js.iter().map(|&j| m.label(j).to_string()).collect(), up, invol, designated)?;
    Ok(DualFrame { frame, points: js })
}

pub fn dual_frame(m: &FinMatrix) -> Result<Frame> {
    Ok(dual_frame_with_points(m)?.frame)
}

/// Whether `complex_matrix(dual_frame(m))` is isomorphic to `m`.
///
/// Checks first that the unit map `a ↦ {points below a}` is a bijection onto the upsets that
/// commutes with the operations and designation; falls back to an isomorphism search.
pub fn roundtrip_check(m: &FinMatrix) -> Result<bool> {
    let dual = dual_frame_with_points(m)?;
    let p = &dual.frame;
    let ups = p.upsets()?;
    if ups.len() != m.size() {
        return Ok(false);
    }
    let unit: Vec<u64> = (0..m.size()).map(|a| dual.upset_of_element(m, a)).collect();
    let mut sorted = unit.clone();
    sorted.sort_unstable();
    sorted.dedup();
    let bijective = sorted == ups;
    let all = p.all_mask();
    let commutes = bijective
        && (0..m.size()).all(|a| {
            unit[m.neg(a)] == all & !p.image(unit[a])
                && m.is_designated(a) == (unit[a] & p.designated == p.designated)
                && (0..m.size()).all(|b| {
                    unit[m.meet(a, b)] == unit[a] & unit[b] && unit[m.join(a, b)] == unit[a] | unit[b]
                })
        });
    if commutes {
        return Ok(true);
    }
    let cm = complex_matrix(p)?;
    Ok(find_isomorphism(m, &cm).is_some())
}

/// Restriction to `min D ∪ ∂[min D]`.
pub fn leibniz_subframe(p: &Frame) -> Frame {
    let min_d = p.minimal(p.designated);
    p.subframe(min_d | p.image(min_d)).expect("closed under the involution")
}

pub fn is_reduced_frame(p: &Frame) -> bool {
    let min_d = p.minimal(p.designated);
    min_d | p.image(min_d) == p.all_mask()
}

// ---------------------------------------------------------------- isomorphism

/// Searches for an isomorphism of frames, as a point map from `p` to `q`.
pub fn frame_isomorphism(p: &Frame, q: &Frame) -> Option<Vec<usize>> {
    let n = p.size();
    if n != q.size() || p.designated.count_ones() != q.designated.count_ones() {
        return None;
    }
    let inv = |f: &Frame, x: usize| {
        (f.up[x].count_ones(), f.down_set(x).count_ones(), f.is_designated(x), f.invol[x] == x, f.is_designated(f.invol[x]))
    };
    let ip: Vec<_> = (0..n).map(|x| inv(p, x)).collect();
    let iq: Vec<_> = (0..n).map(|x| inv(q, x)).collect();
    let (mut sp, mut sq) = (ip.clone(), iq.clone());
    sp.sort();
    sq.sort();
    if sp != sq {
        return None;
    }
    let mut assign = vec![usize::MAX; n];
    let mut used = vec![false; n];
    fn ok(p: &Frame, q: &Frame, assign: &[usize], x: usize, t: usize) -> bool {
        (0..assign.len()).all(|y| {
            let s = assign[y];
            s == usize::MAX || (p.leq(x, y) == q.leq(t, s) && p.leq(y, x) == q.leq(s, t))
        })
    }
    fn rec(p: &Frame, q: &Frame, ip: &[(u32, u32, bool, bool, bool)], iq: &[(u32, u32, bool, bool, bool)], x: usize, assign: &mut Vec<usize>, used: &mut Vec<bool>) -> bool {
        let n = assign.len();
        if x == n {
            return true;
        }
        if assign[x] != usize::MAX {
            return rec(p, q, ip, iq, x + 1, assign, used);
        }
        let dx = p.invol[x];
        for t in 0..n {
            if used[t] || ip[x] != iq[t] || !ok(p, q, assign, x, t) {
                continue;
            }
            let dt = q.invol[t];
            assign[x] = t;
            used[t] = true;
            let paired = dx != x;
            if paired {
                if used[dt] || !ok(p, q, assign, dx, dt) {
                    assign[x] = usize::MAX;
                    used[t] = false;
                    continue;
                }
                assign[dx] = dt;
                used[dt] = true;
            }
            if rec(p, q, ip, iq, x + 1, assign, used) {
                return true;
            }
            assign[x] = usize::MAX;
            used[t] = false;
            if paired {
                assign[dx] = usize::MAX;
                used[dt] = false;
            }
        }
        false
    }
    rec(p, q, &ip, &iq, 0, &mut assign, &mut used).then_some(assign)
}

pub fn frames_isomorphic(p: &Frame, q: &Frame) -> bool {
    frame_isomorphism(p, q).is_some()
}

// ---------------------------------------------------------------- components and unions

/// Connected components (under comparability and `∂`) as point bitsets, ordered by least point.
pub fn component_masks(p: &Frame) -> Vec<u64> {
    let n = p.size();
    let mut seen = 0u64;
    let mut out = Vec::new();
    for start in 0..n {
        if seen >> start & 1 == 1 {
            continue;
        }
        let mut comp = 1u64 << start;
        loop {
            let next = bits(comp).fold(comp, |acc, x| acc | p.up[x] | p.down_set(x) | 1 << p.invol[x]);
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

pub fn components(p: &Frame) -> Vec<Frame> {
    component_masks(p).into_iter().map(|c| p.subframe(c).expect("components are closed")).collect()
}

pub fn disjoint_union(ps: &[Frame]) -> Result<Frame> {
    let total: usize = ps.iter().map(|p| p.size()).sum();
    if total > MAX_POINTS {
        return Err(Error::Guard(format!("frames are limited to {MAX_POINTS} points")));
    }
    let mut labels = Vec::new();
    let mut up = Vec::new();
    let mut invol = Vec::new();
    let mut designated = 0u64;
    let mut offset = 0;
    for (i, p) in ps.iter().enumerate() {
        for x in 0..p.size() {
            labels.push(if ps.len() > 1 { format!("{}.{}", i, p.labels[x]) } else { p.labels[x].clone() });
            up.push(p.up[x] << offset);
            invol.push(p.invol[x] + offset);
        }
        designated |= p.designated << offset;
        offset += p.size();
    }
    Frame::from_rows(labels, up, invol, designated)
}

// ---------------------------------------------------------------- compatible preorders

/// A preorder extending the frame order with `x ≲ y ⇒ ∂y ≲ ∂x`. Rows are bitsets of points above.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CompatiblePreorder {
    rows: Vec<u64>,
}

impl CompatiblePreorder {
    pub fn le(&self, x: usize, y: usize) -> bool {
        self.rows[x] >> y & 1 == 1
    }

    pub fn rows(&self) -> &[u64] {
        &self.rows
    }

    pub fn contains(&self, other: &CompatiblePreorder) -> bool {
        self.rows.iter().zip(&other.rows).all(|(a, b)| b & !a == 0)
    }
}

/// The frame order itself as a compatible preorder.
pub fn order_preorder(p: &Frame) -> CompatiblePreorder {
    CompatiblePreorder { rows: p.up.clone() }
}

/// Least compatible preorder containing the order and the given extra pairs.
pub fn generate_preorder_from(p: &Frame, pairs: &[(usize, usize)]) -> CompatiblePreorder {
    let n = p.size();
    let mut rows = p.up.clone();
    for &(u, v) in pairs {
        rows[u] |= 1 << v;
    }
    loop {
        let before = rows.clone();
        for x in 0..n {
            for y in bits(before[x]) {
                rows[p.invol[y]] |= 1 << p.invol[x];
            }
        }
        transitive_close(&mut rows);
        if rows == before {
            break;
        }
    }
    CompatiblePreorder { rows }
}

pub fn generate_preorder(p: &Frame, u: usize, v: usize) -> CompatiblePreorder {
    generate_preorder_from(p, &[(u, v)])
}

/// Quotient by the equivalence `≲ ∩ ≳`; designated classes are those in the `≲`-upward closure of `D`.
pub fn quotient(p: &Frame, q: &CompatiblePreorder) -> Result<Frame> {
    let n = p.size();
    let mut class = vec![usize::MAX; n];
    let mut reps = Vec::new();
    for x in 0..n {
        if class[x] != usize::MAX {
            continue;
        }
        for y in x..n {
            if q.le(x, y) && q.le(y, x) {
                class[y] = reps.len();
            }
        }
        reps.push(x);
    }
    let up_d = bits(p.designated).fold(0u64, |acc, d| acc | q.rows[d]);
    let labels = reps
        .iter()
        .map(|&r| {
            let members: Vec<&str> = (0..n).filter(|&y| class[y] == class[r]).map(|y| p.labels[y].as_str()).collect();
            if members.len() == 1 {
                members[0].to_string()
            } else {
                format!("[{}]", members.join(","))
            }
        })
        .collect();
    let rows = reps.iter().map(|&r| bits(q.rows[r]).fold(0u64, |acc, y| acc | 1 << class[y])).collect();
    let invol = reps.iter().map(|&r| class[p.invol[r]]).collect();
    let designated = reps
        .iter()
        .enumerate()
        .filter(|(_, &r)| (0..n).any(|y| class[y] == class[r] && up_d >> y & 1 == 1))
        .fold(0u64, |acc, (i, _)| acc | 1 << i);
    Frame::from_rows(labels, rows, invol, designated)
}

/// Atoms of the lattice of compatible preorders above the order, each generated by one pair.
pub fn immediate_preorders(p: &Frame) -> Vec<CompatiblePreorder> {
    let n = p.size();
    let base = order_preorder(p);
    let mut cands: BTreeSet<CompatiblePreorder> = BTreeSet::new();
    for u in 0..n {
        for v in 0..n {
            if !p.leq(u, v) {
                cands.insert(generate_preorder(p, u, v));
            }
        }
    }
    let cands: Vec<_> = cands.into_iter().filter(|c| *c != base).collect();
    cands
        .iter()
        .filter(|c| !cands.iter().any(|d| d != *c && c.contains(d)))
        .cloned()
        .collect()
}

pub fn immediate_quotients(p: &Frame) -> Vec<Frame> {
    immediate_preorders(p).iter().map(|q| quotient(p, q).expect("valid quotient")).collect()
}

// ---------------------------------------------------------------- random frames

/// A random frame with `1..=max_points` points: an involution, order pairs added with their
/// duals while antisymmetry survives, and a random designated upset.
pub fn random_frame<R: Rng>(rng: &mut R, max_points: usize) -> Frame {
    let n = rng.gen_range(1..=max_points.clamp(1, MAX_POINTS));
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        order.swap(i, rng.gen_range(0..=i));
    }
    let mut invol: Vec<usize> = (0..n).collect();
    let mut i = 0;
    while i + 1 < n {
        if rng.gen_bool(0.7) {
            let (a, b) = (order[i], order[i + 1]);
            invol[a] = b;
            invol[b] = a;
            i += 2;
        } else {
            i += 1;
        }
    }
    let mut up: Vec<u64> = (0..n).map(|x| 1u64 << x).collect();
    let attempts = rng.gen_range(0..=2 * n);
    for _ in 0..attempts {
        let (x, y) = (rng.gen_range(0..n), rng.gen_range(0..n));
        let mut trial = up.clone();
        trial[x] |= 1 << y;
        trial[invol[y]] |= 1 << invol[x];
        transitive_close(&mut trial);
        let antisymmetric = (0..n).all(|a| bits(trial[a]).all(|b| b == a || trial[b] >> a & 1 == 0));
        if antisymmetric {
            up = trial;
        }
    }
    let seed_mask: u64 = (0..n).filter(|_| rng.gen_bool(0.3)).fold(0, |acc, x| acc | 1 << x);
    let designated = bits(seed_mask).fold(0u64, |acc, x| acc | up[x]);
    Frame::from_rows((0..n).map(|x| format!("x{x}")).collect(), up, invol, designated).expect("valid by construction")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::parse_rule;
    use crate::matrix::{bd4, catalog, cl2, etl4, find_isomorphism, k3, lp3, product};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn complex_examples() {
        let one = Frame::new(s(&["u"]), &[], vec![0], &[0]).unwrap();
        assert!(find_isomorphism(&complex_matrix(&one).unwrap(), &cl2()).is_some());
        let anti = Frame::new(s(&["u", "du"]), &[], vec![1, 0], &[0, 1]).unwrap();
        assert!(find_isomorphism(&complex_matrix(&anti).unwrap(), &etl4()).is_some());
        let chain = Frame::new(s(&["u", "du"]), &[(0, 1)], vec![1, 0], &[0, 1]).unwrap();
        let k = complex_matrix(&chain).unwrap();
        assert_eq!(k.size(), 3);
        assert!(find_isomorphism(&k, &k3()).is_some());
    }

    #[test]
    fn dual_examples() {
        let d = dual_frame(&cl2()).unwrap();
        assert_eq!(d.size(), 1);
        assert!(d.is_designated(0) && d.invol(0) == 0);
        let d = dual_frame(&bd4()).unwrap();
        assert_eq!(d.size(), 2);
        assert!(!d.leq(0, 1) && !d.leq(1, 0));
        assert_eq!(d.invol(0), 1);
        assert_eq!(d.designated_mask().count_ones(), 1);
        let d = dual_frame(&k3()).unwrap();
        assert_eq!(d.size(), 2);
        assert!(d.leq(0, 1) || d.leq(1, 0));
        assert_eq!(d.designated_mask().count_ones(), 2);
        assert!(dual_frame(&bd4().with_designated(&[]).unwrap()).is_err());
    }

    #[test]
    fn catalog_round_trips() {
        for (name, m) in catalog() {
            assert!(roundtrip_check(&m).unwrap(), "{name}");
        }
    }

    #[test]
    fn random_frames_round_trip_and_commute() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..60 {
            let p = random_frame(&mut rng, 8);
            let cm = complex_matrix(&p).unwrap();
            assert!(cm.is_demorgan());
            assert!(frames_isomorphic(&dual_frame(&cm).unwrap(), &p));
            let lhs = cm.leibniz_reduct();
            let rhs = complex_matrix(&leibniz_subframe(&p)).unwrap();
            assert!(find_isomorphism(&lhs, &rhs).is_some());
            assert_eq!(cm.is_reduced(), is_reduced_frame(&p));
        }
    }

    #[test]
    fn leibniz_subframe_drops_undesignated_pair() {
        // Two designated fixed points between an undesignated pair du < a, b < u.
        let p = Frame::new(s(&["a", "b", "u", "du"]), &[(3, 0), (0, 2), (3, 1), (1, 2)], vec![0, 1, 3, 2], &[0, 1, 2]).unwrap();
        let q = leibniz_subframe(&p);
        assert_eq!(q.size(), 2);
        assert!(!is_reduced_frame(&p));
        assert!(is_reduced_frame(&q));
        assert!(is_reduced_frame(&Frame::new(s(&["u"]), &[], vec![0], &[0]).unwrap()));
    }

    #[test]
    fn quotient_by_order_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let p = random_frame(&mut rng, 6);
            let q = quotient(&p, &order_preorder(&p)).unwrap();
            assert!(frames_isomorphic(&p, &q));
            for c in immediate_preorders(&p) {
                assert!(c.contains(&order_preorder(&p)));
                quotient(&p, &c).unwrap().validate().unwrap();
            }
        }
    }

    #[test]
    fn quotients_give_submatrices() {
        // The complex matrix of a quotient embeds strictly into the complex matrix of the frame.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let p = random_frame(&mut rng, 6);
            let big = complex_matrix(&p).unwrap();
            for q in immediate_quotients(&p) {
                let small = complex_matrix(&q).unwrap();
                let found = big.subuniverses().into_iter().any(|s| {
                    let sub = big.submatrix(&s).unwrap();
                    find_isomorphism(&sub, &small).is_some()
                });
                assert!(found);
            }
        }
    }

    #[test]
    fn components_and_unions() {
        let one = Frame::new(s(&["u"]), &[], vec![0], &[0]).unwrap();
        let two = disjoint_union(&[one.clone(), one.clone()]).unwrap();
        assert_eq!(components(&two).len(), 2);
        assert!(find_isomorphism(&complex_matrix(&two).unwrap(), &product(&[cl2(), cl2()]).unwrap()).is_some());
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let p = random_frame(&mut rng, 4);
            let q = random_frame(&mut rng, 4);
            let u = disjoint_union(&[p.clone(), q.clone()]).unwrap();
            let lhs = complex_matrix(&u).unwrap();
            let rhs = product(&[complex_matrix(&p).unwrap(), complex_matrix(&q).unwrap()]).unwrap();
            assert!(find_isomorphism(&lhs, &rhs).is_some());
        }
    }

    #[test]
    fn refutation_agrees_with_enumeration_on_small_frames() {
        let rules = [
            "p, ~p | q |- q",
            "p & ~p |-",
            "|- p | ~p",
            "p | q, ~q | r |- p | r",
            "p | q |- p, q",
            "p & ~p | q |- q | ~q",
            "p, ~p |- q, ~q",
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..40 {
            let p = random_frame(&mut rng, 6);
            let m = complex_matrix(&p).unwrap();
            for r in rules {
                let r = parse_rule(r).unwrap();
                assert_eq!(p.refute(&r).is_none(), m.validates_exhaustive(&r), "{r}");
            }
        }
        assert!(dual_frame(&lp3()).unwrap().refute(&parse_rule("p, ~p |-").unwrap()).is_some());
    }

    #[test]
    fn json_round_trip() {
        let p = dual_frame(&crate::matrix::kminus8()).unwrap();
        let text = serde_json::to_string(&p.to_json()).unwrap();
        let back = Frame::from_json(serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(back, p);
        let bad = FrameJson { points: s(&["a", "b"]), leq: vec![[0, 1]], invol: vec![0, 1], designated: vec![] };
        assert!(Frame::from_json(bad).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::{any, prop_assert, prop_assert_eq, proptest, ProptestConfig};
        use rand::Rng;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]
            #[test]
            fn reduced_connected_frames_have_the_expected_shape(seed in any::<u64>()) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let p = leibniz_subframe(&random_frame(&mut rng, 8));
                prop_assert!(is_reduced_frame(&p));
                for c in components(&p) {
                    if c.size() > 2 {
                        let all = c.all_mask();
                        prop_assert_eq!(c.minimal(all) & c.maximal(all), 0);
                        prop_assert!(c.designated_mask() == all || c.designated_mask() == c.maximal(all));
                    }
                }
            }

            #[test]
            fn generated_preorders_are_compatible(seed in any::<u64>()) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let p = random_frame(&mut rng, 6);
                let n = p.size();
                let u = rng.gen_range(0..n);
                let v = rng.gen_range(0..n);
                let q = generate_preorder(&p, u, v);
                prop_assert!(q.le(u, v));
                for x in 0..n {
                    prop_assert!(q.le(x, x));
                    for y in 0..n {
                        if p.leq(x, y) { prop_assert!(q.le(x, y)); }
                        if q.le(x, y) {
                            prop_assert!(q.le(p.invol(y), p.invol(x)));
                            for z in 0..n {
                                if q.le(y, z) { prop_assert!(q.le(x, z)); }
                            }
                        }
                    }
                }
            }
        }
    }
}
