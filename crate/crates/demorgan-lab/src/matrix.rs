//! Finite logical matrices over the De Morgan signature.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::sync::{Arc, OnceLock};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formula::{Formula, RuleInstance};
use crate::frame::{self, DualFrame};

/// Largest carrier any matrix may have.
pub const MAX_CARRIER: usize = 4096;

/// Above this many valuations, validity on a De Morgan matrix with a filter goes through the dual frame.
const BRUTE_FORCE_LIMIT: u128 = 4096;

/// Assignment of carrier elements to atoms.
pub type Valuation = BTreeMap<String, usize>;

/// A finite algebra with meet, join, negation and constants, plus a designated subset.
#[derive(Clone, Debug)]
pub struct FinMatrix {
    labels: Vec<String>,
    meet: Vec<u16>,
    join: Vec<u16>,
    neg: Vec<u16>,
    top: usize,
    bottom: usize,
    designated: Vec<bool>,
    demorgan: bool,
    dual: OnceLock<Option<Arc<DualFrame>>>,
}

impl PartialEq for FinMatrix {
    /// Structural equality of tables and designation; labels are ignored.
    fn eq(&self, other: &Self) -> bool {
        self.meet == other.meet
            && self.join == other.join
            && self.neg == other.neg
            && self.top == other.top
            && self.bottom == other.bottom
            && self.designated == other.designated
    }
}

impl FinMatrix {
    /// Builds a matrix without checking the lattice laws. Table shapes and indices are still checked.
    pub(crate) fn from_raw(
        labels: Vec<String>,
        meet: Vec<u16>,
        join: Vec<u16>,
        neg: Vec<u16>,
        top: usize,
        bottom: usize,
        designated: Vec<bool>,
    ) -> Result<FinMatrix> {
        let n = labels.len();
        if n == 0 {
            return Err(Error::InvalidMatrix("empty carrier".into()));
        }
        if n > MAX_CARRIER {
            return Err(Error::Guard(format!("carrier of {n} elements exceeds {MAX_CARRIER}")));
        }
        if meet.len() != n * n || join.len() != n * n || neg.len() != n || designated.len() != n {
            return Err(Error::InvalidMatrix("table dimensions do not match the carrier".into()));
        }
        let in_range = |x: &u16| (*x as usize) < n;
        if !meet.iter().all(in_range) || !join.iter().all(in_range) || !neg.iter().all(in_range) {
            return Err(Error::InvalidMatrix("table entry out of range".into()));
        }
        if top >= n || bottom >= n {
            return Err(Error::InvalidMatrix("constant out of range".into()));
        }
        let mut m = FinMatrix {
            labels,
            meet,
            join,
            neg,
            top,
            bottom,
            designated,
            demorgan: false,
            dual: OnceLock::new(),
        };
        m.demorgan = m.check_demorgan_laws().is_ok();
        Ok(m)
    }

    /// Builds a matrix from full tables and verifies the bounded distributive lattice laws.
    pub fn from_tables(
        labels: Vec<String>,
        meet: Vec<Vec<usize>>,
        join: Vec<Vec<usize>>,
        neg: Vec<usize>,
        top: usize,
        bottom: usize,
        designated: &[usize],
    ) -> Result<FinMatrix> {
        let n = labels.len();
        let flatten = |t: Vec<Vec<usize>>, name: &str| -> Result<Vec<u16>> {
            if t.len() != n || t.iter().any(|row| row.len() != n) {
                return Err(Error::InvalidMatrix(format!("{name} table is not {n}x{n}")));
            }
            Ok(t.into_iter().flatten().map(|x| x.min(u16::MAX as usize) as u16).collect())
        };
        let meet = flatten(meet, "meet")?;
        let join = flatten(join, "join")?;
        let neg = neg.into_iter().map(|x| x.min(u16::MAX as usize) as u16).collect();
        let mut des = vec![false; n];
        for &d in designated {
            if d >= n {
                return Err(Error::InvalidMatrix(format!("designated element {d} out of range")));
            }
            des[d] = true;
        }
        let m = FinMatrix::from_raw(labels, meet, join, neg, top, bottom, des)?;
        m.check_lattice_laws()?;
        Ok(m)
    }

    /// Builds a matrix from an order given by covering pairs `(lower, upper)`.
    pub fn from_covers(
        labels: &[&str],
        covers: &[(usize, usize)],
        neg: &[usize],
        designated: &[usize],
    ) -> Result<FinMatrix> {
        let n = labels.len();
        let mut leq = vec![vec![false; n]; n];
        for (i, row) in leq.iter_mut().enumerate() {
            row[i] = true;
        }
        for &(a, b) in covers {
            if a >= n || b >= n {
                return Err(Error::InvalidMatrix("cover out of range".into()));
            }
            leq[a][b] = true;
        }
        for k in 0..n {
            for i in 0..n {
                if leq[i][k] {
                    for j in 0..n {
                        if leq[k][j] {
                            leq[i][j] = true;
                        }
                    }
                }
            }
        }
        let bound = |a: usize, b: usize, lower: bool| -> Result<usize> {
            let below = |x: usize, y: usize| if lower { leq[x][y] } else { leq[y][x] };
            let cands: Vec<usize> = (0..n).filter(|&c| below(c, a) && below(c, b)).collect();
            cands
                .iter()
                .copied()
                .find(|&c| cands.iter().all(|&d| below(d, c)))
                .ok_or_else(|| Error::InvalidMatrix("order is not a lattice".into()))
        };
        let mut meet = vec![vec![0; n]; n];
        let mut join = vec![vec![0; n]; n];
        for a in 0..n {
            for b in 0..n {
                meet[a][b] = bound(a, b, true)?;
                join[a][b] = bound(a, b, false)?;
            }
        }
        let bottom = (0..n).find(|&x| (0..n).all(|y| leq[x][y]));
        let top = (0..n).find(|&x| (0..n).all(|y| leq[y][x]));
        let (Some(top), Some(bottom)) = (top, bottom) else {
            return Err(Error::InvalidMatrix("order is not bounded".into()));
        };
        FinMatrix::from_tables(
            labels.iter().map(|s| s.to_string()).collect(),
            meet,
            join,
            neg.to_vec(),
            top,
            bottom,
            designated,
        )
    }

    pub fn size(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, a: usize) -> &str {
        &self.labels[a]
    }

    pub fn element(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    #[inline]
    pub fn meet(&self, a: usize, b: usize) -> usize {
        self.meet[a * self.size() + b] as usize
    }

    #[inline]
    pub fn join(&self, a: usize, b: usize) -> usize {
        self.join[a * self.size() + b] as usize
    }

    #[inline]
    pub fn neg(&self, a: usize) -> usize {
        self.neg[a] as usize
    }

    pub fn top(&self) -> usize {
        self.top
    }

    pub fn bottom(&self) -> usize {
        self.bottom
    }

    #[inline]
    pub fn leq(&self, a: usize, b: usize) -> bool {
        self.meet(a, b) == a
    }

    #[inline]
    pub fn is_designated(&self, a: usize) -> bool {
        self.designated[a]
    }

    pub fn designated(&self) -> Vec<usize> {
        (0..self.size()).filter(|&a| self.designated[a]).collect()
    }

    pub fn is_demorgan(&self) -> bool {
        self.demorgan
    }

    /// All elements designated.
    pub fn is_trivial(&self) -> bool {
        self.designated.iter().all(|&d| d)
    }

    /// Designated set is a non-empty lattice filter.
    pub fn designated_is_filter(&self) -> bool {
        let n = self.size();
        let des = self.designated();
        !des.is_empty()
            && des.iter().all(|&a| (0..n).all(|b| !self.leq(a, b) || self.designated[b]))
            && des.iter().all(|&a| des.iter().all(|&b| self.designated[self.meet(a, b)]))
    }

    /// A filter such that `a | b` designated implies `a` or `b` designated.
    pub fn designated_is_prime_filter(&self) -> bool {
        let n = self.size();
        self.designated_is_filter()
            && (0..n).all(|a| {
                self.designated[a]
                    || (0..n).all(|b| self.designated[b] || !self.designated[self.join(a, b)])
            })
    }

    pub fn with_designated(&self, designated: &[usize]) -> Result<FinMatrix> {
        let mut des = vec![false; self.size()];
        for &d in designated {
            if d >= self.size() {
                return Err(Error::InvalidMatrix(format!("designated element {d} out of range")));
            }
            des[d] = true;
        }
        let mut m = self.clone();
        m.designated = des;
        m.dual = OnceLock::new();
        Ok(m)
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> FinMatrix {
        assert_eq!(labels.len(), self.size());
        self.labels = labels;
        self
    }

    /// The one-element matrix, designated.
    pub fn trivial() -> FinMatrix {
        FinMatrix::from_raw(vec!["*".into()], vec![0], vec![0], vec![0], 0, 0, vec![true])
            .expect("valid")
    }

    /// Verifies the bounded distributive lattice laws exhaustively.
    pub fn check_lattice_laws(&self) -> Result<()> {
        let n = self.size();
        let bad = |what: &str| Err(Error::InvalidMatrix(format!("{what} fails")));
        for a in 0..n {
            if self.meet(a, a) != a || self.join(a, a) != a {
                return bad("idempotence");
            }
            if self.meet(a, self.top) != a || self.join(a, self.bottom) != a {
                return bad("bounds");
            }
            for b in 0..n {
                if self.meet(a, b) != self.meet(b, a) || self.join(a, b) != self.join(b, a) {
                    return bad("commutativity");
                }
                if self.meet(a, self.join(a, b)) != a || self.join(a, self.meet(a, b)) != a {
                    return bad("absorption");
                }
            }
        }
        for a in 0..n {
            for b in 0..n {
                let ab = self.meet(a, b);
                let jab = self.join(a, b);
                for c in 0..n {
                    if self.meet(ab, c) != self.meet(a, self.meet(b, c))
                        || self.join(jab, c) != self.join(a, self.join(b, c))
                    {
                        return bad("associativity");
                    }
                    if self.meet(a, self.join(b, c)) != self.join(ab, self.meet(a, c)) {
                        return bad("distributivity");
                    }
                }
            }
        }
        Ok(())
    }

    /// Verifies `~~x = x` and `~(x | y) = ~x & ~y`.
    pub fn check_demorgan_laws(&self) -> Result<()> {
        let n = self.size();
        for a in 0..n {
            if self.neg(self.neg(a)) != a {
                return Err(Error::InvalidMatrix("negation is not an involution".into()));
            }
            for b in 0..n {
                if self.neg(self.join(a, b)) != self.meet(self.neg(a), self.neg(b)) {
                    return Err(Error::InvalidMatrix("De Morgan law fails".into()));
                }
            }
        }
        Ok(())
    }

    pub(crate) fn dual_data(&self) -> Option<Arc<DualFrame>> {
        self.dual
            .get_or_init(|| {
                if self.demorgan && self.designated_is_filter() {
                    frame::dual_frame_with_points(self).ok().map(Arc::new)
                } else {
                    None
                }
            })
            .clone()
    }

    // ------------------------------------------------------------ evaluation

    pub fn evaluate(&self, v: &Valuation, f: &Formula) -> Result<usize> {
        Ok(match f {
            Formula::Atom(a) => {
                let x = *v.get(a).ok_or_else(|| Error::MissingAtom(a.clone()))?;
                if x >= self.size() {
                    return Err(Error::InvalidMatrix(format!("value {x} for `{a}` out of range")));
                }
                x
            }
            Formula::Top => self.top,
            Formula::Bot => self.bottom,
            Formula::Neg(g) => self.neg(self.evaluate(v, g)?),
            Formula::And(a, b) => self.meet(self.evaluate(v, a)?, self.evaluate(v, b)?),
            Formula::Or(a, b) => self.join(self.evaluate(v, a)?, self.evaluate(v, b)?),
        })
    }

    /// True iff no valuation designates every premise while leaving every conclusion undesignated.
    pub fn validates(&self, r: &RuleInstance) -> bool {
        self.find_counterexample(r).is_none()
    }

    /// A valuation designating all premises and no conclusion, if one exists.
    pub fn find_counterexample(&self, r: &RuleInstance) -> Option<Valuation> {
        let k = r.atoms().len() as u32;
        if (self.size() as u128).saturating_pow(k) > BRUTE_FORCE_LIMIT {
            if let Some(dual) = self.dual_data() {
                return match dual.frame.refute(r) {
                    None => None,
                    Some(upsets) => {
                        let v: Valuation = upsets
                            .into_iter()
                            .map(|(atom, set)| (atom, dual.element_of_upset(self, set)))
                            .collect();
                        if self.is_counterexample(r, &v) {
                            Some(v)
                        } else {
                            self.counterexample_exhaustive(r)
                        }
                    }
                };
            }
        }
        self.counterexample_exhaustive(r)
    }

    pub fn is_counterexample(&self, r: &RuleInstance, v: &Valuation) -> bool {
        let des = |f: &Formula| self.evaluate(v, f).map(|x| self.designated[x]).unwrap_or(false);
        r.premises.iter().all(des) && !r.conclusions.iter().any(des)
    }

    /// Validity by enumerating every valuation of the rule's atoms.
    pub fn validates_exhaustive(&self, r: &RuleInstance) -> bool {
        self.counterexample_exhaustive(r).is_none()
    }

    pub fn counterexample_exhaustive(&self, r: &RuleInstance) -> Option<Valuation> {
        let prog = Program::compile(r);
        let n = self.size();
        let k = prog.atoms.len();
        let total = (n as u128).saturating_pow(k as u32);
        let found = if k >= 1 && total >= 1 << 15 {
            (0..n).into_par_iter().find_map_first(|first| prog.search(self, Some(first)))
        } else {
            prog.search(self, None)
        };
        found.map(|vals| prog.atoms.iter().cloned().zip(vals).collect())
    }

    // ------------------------------------------------------------ constructions

    /// Induced submatrix on a subuniverse, with elements in the given order.
    pub fn submatrix(&self, elements: &[usize]) -> Result<FinMatrix> {
        let mut index = vec![usize::MAX; self.size()];
        for (i, &e) in elements.iter().enumerate() {
            if e >= self.size() {
                return Err(Error::InvalidMatrix(format!("element {e} out of range")));
            }
            index[e] = i;
        }
        let k = elements.len();
        let look = |x: usize| -> Result<u16> {
            match index[x] {
                usize::MAX => Err(Error::Precondition("subset is not closed under the operations".into())),
                i => Ok(i as u16),
            }
        };
        let mut meet = Vec::with_capacity(k * k);
        let mut join = Vec::with_capacity(k * k);
        for &a in elements {
            for &b in elements {
                meet.push(look(self.meet(a, b))?);
                join.push(look(self.join(a, b))?);
            }
        }
        let neg = elements.iter().map(|&a| look(self.neg(a))).collect::<Result<Vec<_>>>()?;
        FinMatrix::from_raw(
            elements.iter().map(|&a| self.labels[a].clone()).collect(),
            meet,
            join,
            neg,
            look(self.top)? as usize,
            look(self.bottom)? as usize,
            elements.iter().map(|&a| self.designated[a]).collect(),
        )
    }

    /// The subuniverse generated by `gens` together with the constants, sorted.
    pub fn generated_subuniverse(&self, gens: &[usize]) -> Vec<usize> {
        let n = self.size();
        let mut inside = vec![false; n];
        let mut members = Vec::new();
        let mut queue: VecDeque<usize> = VecDeque::new();
        for &g in gens.iter().chain([self.top, self.bottom].iter()) {
            if !inside[g] {
                inside[g] = true;
                queue.push_back(g);
            }
        }
        while let Some(x) = queue.pop_front() {
            members.push(x);
            let mut add = |y: usize, queue: &mut VecDeque<usize>| {
                if !inside[y] {
                    inside[y] = true;
                    queue.push_back(y);
                }
            };
            add(self.neg(x), &mut queue);
            for i in 0..members.len() {
                let y = members[i];
                add(self.meet(x, y), &mut queue);
                add(self.join(x, y), &mut queue);
            }
        }
        members.sort_unstable();
        members
    }

    /// Every subuniverse (containing the constants), sorted by size then lexicographically.
    pub fn subuniverses(&self) -> Vec<Vec<usize>> {
        let start = self.generated_subuniverse(&[]);
        let mut seen: BTreeSet<Vec<usize>> = BTreeSet::new();
        let mut queue = VecDeque::from([start.clone()]);
        seen.insert(start);
        while let Some(s) = queue.pop_front() {
            for a in 0..self.size() {
                if s.binary_search(&a).is_err() {
                    let mut gens = s.clone();
                    gens.push(a);
                    let t = self.generated_subuniverse(&gens);
                    if seen.insert(t.clone()) {
                        queue.push_back(t);
                    }
                }
            }
        }
        let mut out: Vec<_> = seen.into_iter().collect();
        out.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
        out
    }

    pub fn submatrices(&self) -> impl Iterator<Item = FinMatrix> + '_ {
        self.subuniverses()
            .into_iter()
            .map(move |s| self.submatrix(&s).expect("subuniverse is closed"))
    }

    /// Quotient by a partition that must be a congruence; a block is designated if it meets the designated set.
    pub fn quotient(&self, p: &Partition) -> Result<FinMatrix> {
        if p.len() != self.size() {
            return Err(Error::Precondition("partition does not match the carrier".into()));
        }
        if !self.is_congruence(p) {
            return Err(Error::Precondition("partition is not a congruence".into()));
        }
        let blocks = p.blocks();
        let k = blocks.len();
        let rep: Vec<usize> = blocks.iter().map(|b| b[0]).collect();
        let mut meet = Vec::with_capacity(k * k);
        let mut join = Vec::with_capacity(k * k);
        for &a in &rep {
            for &b in &rep {
                meet.push(p.block_of(self.meet(a, b)) as u16);
                join.push(p.block_of(self.join(a, b)) as u16);
            }
        }
        let labels = blocks
            .iter()
            .map(|b| {
                if b.len() == 1 {
                    self.labels[b[0]].clone()
                } else {
                    let names: Vec<&str> = b.iter().map(|&x| self.labels[x].as_str()).collect();
                    format!("{{{}}}", names.join(","))
                }
            })
            .collect();
        FinMatrix::from_raw(
            labels,
            meet,
            join,
            rep.iter().map(|&a| p.block_of(self.neg(a)) as u16).collect(),
            p.block_of(self.top),
            p.block_of(self.bottom),
            blocks.iter().map(|b| b.iter().any(|&x| self.designated[x])).collect(),
        )
    }

    pub fn is_congruence(&self, p: &Partition) -> bool {
        let n = self.size();
        (0..n).all(|x| {
            let r = p.representative(x);
            r == x
                || (p.same(self.neg(x), self.neg(r))
                    && (0..n).all(|c| {
                        p.same(self.meet(x, c), self.meet(r, c)) && p.same(self.join(x, c), self.join(r, c))
                    }))
        })
    }

    /// The largest congruence compatible with the designated set.
    /// Largest congruence compatible with the designated set. De Morgan matrices with a filter are
    /// handled through the dual frame: two elements are identified iff their upsets agree on the
    /// Leibniz subframe.
    pub fn leibniz_congruence(&self) -> Partition {
        if let Some(dual) = self.dual_data() {
            let p = &dual.frame;
            let min_d = p.minimal(p.designated_mask());
            let keep = min_d | p.image(min_d);
            let mut ids: frame::MaskMap<usize> = Default::default();
            let labels: Vec<usize> = (0..self.size())
                .map(|a| {
                    let key = dual.upset_of_element(self, a) & keep;
                    let next = ids.len();
                    *ids.entry(key).or_insert(next)
                })
                .collect();
            return Partition::from_labels(&labels);
        }
        self.leibniz_congruence_by_separation()
    }

    /// Leibniz congruence by refining the designation split until it is a congruence.
    pub fn leibniz_congruence_by_separation(&self) -> Partition {
        let n = self.size();
        let mut sep = vec![false; n * n];
        for a in 0..n {
            for b in 0..n {
                sep[a * n + b] = self.designated[a] != self.designated[b];
            }
        }
        loop {
            let mut changed = false;
            for a in 0..n {
                for b in (a + 1)..n {
                    if sep[a * n + b] {
                        continue;
                    }
                    let split = sep[self.neg(a) * n + self.neg(b)]
                        || (0..n).any(|c| {
                            sep[self.meet(a, c) * n + self.meet(b, c)] || sep[self.join(a, c) * n + self.join(b, c)]
                        });
                    if split {
                        sep[a * n + b] = true;
                        sep[b * n + a] = true;
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        Partition::from_fn(n, |a, b| !sep[a * n + b])
    }

    pub fn leibniz_reduct(&self) -> FinMatrix {
        self.quotient(&self.leibniz_congruence()).expect("Leibniz congruence is a congruence")
    }

    pub fn is_reduced(&self) -> bool {
        self.leibniz_congruence().is_identity()
    }

    /// The smallest congruence identifying `a` and `b`.
    pub fn principal_congruence(&self, a: usize, b: usize) -> Result<Partition> {
        if !self.demorgan {
            return Err(Error::Precondition("principal congruences need a De Morgan matrix".into()));
        }
        let n = self.size();
        if a >= n || b >= n {
            return Err(Error::Precondition("element out of range".into()));
        }
        let mut uf = UnionFind::new(n);
        uf.union(a, b);
        loop {
            let mut changed = false;
            for x in 0..n {
                let r = uf.find(x);
                if r == x {
                    continue;
                }
                changed |= uf.union(self.neg(x), self.neg(r));
                for c in 0..n {
                    changed |= uf.union(self.meet(x, c), self.meet(r, c));
                    changed |= uf.union(self.join(x, c), self.join(r, c));
                }
            }
            if !changed {
                break;
            }
        }
        let roots: Vec<usize> = (0..n).map(|x| uf.find(x)).collect();
        Ok(Partition::from_labels(&roots))
    }

    /// Join-irreducible elements in carrier order.
    pub fn join_irreducibles(&self) -> Vec<usize> {
        let n = self.size();
        (0..n)
            .filter(|&j| {
                j != self.bottom
                    && (0..n)
                        .filter(|&x| x != j && self.leq(x, j))
                        .fold(self.bottom, |acc, x| self.join(acc, x))
                        != j
            })
            .collect()
    }

    /// For a De Morgan matrix: the join-irreducible generating the prime filter `{a : j not <= ~a}`.
    pub(crate) fn ji_partner(&self, j: usize) -> usize {
        (0..self.size())
            .filter(|&a| !self.leq(j, self.neg(a)))
            .fold(self.top, |acc, a| self.meet(acc, a))
    }

    pub fn to_json(&self) -> MatrixJson {
        let n = self.size();
        let mut flags = Vec::new();
        if self.demorgan {
            flags.push("demorgan".to_string());
        }
        if self.designated_is_filter() {
            flags.push("filter".to_string());
        }
        MatrixJson {
            elements: self.labels.clone(),
            meet: (0..n).map(|a| (0..n).map(|b| self.meet(a, b)).collect()).collect(),
            join: (0..n).map(|a| (0..n).map(|b| self.join(a, b)).collect()).collect(),
            neg: (0..n).map(|a| self.neg(a)).collect(),
            top: self.top,
            bottom: self.bottom,
            designated: self.designated(),
            flags,
        }
    }

    pub fn from_json(j: MatrixJson) -> Result<FinMatrix> {
        let m = FinMatrix::from_tables(j.elements, j.meet, j.join, j.neg, j.top, j.bottom, &j.designated)?;
        for flag in &j.flags {
            match flag.as_str() {
                "demorgan" => m.check_demorgan_laws()?,
                "filter" => {
                    if !m.designated_is_filter() {
                        return Err(Error::InvalidMatrix("designated set is not a lattice filter".into()));
                    }
                }
                other => return Err(Error::InvalidMatrix(format!("unknown flag `{other}`"))),
            }
        }
        Ok(m)
    }

    /// Renders the tables as aligned plain text.
    pub fn render(&self) -> String {
        let n = self.size();
        let w = self.labels.iter().map(|l| l.len()).max().unwrap_or(1);
        let mut out = String::new();
        let row = |name: &str, f: &dyn Fn(usize, usize) -> usize| {
            let mut s = format!("{name:>w$} |", w = w);
            for b in 0..n {
                s += &format!(" {:>w$}", self.labels[b], w = w);
            }
            s.push('\n');
            for a in 0..n {
                s += &format!("{:>w$} |", self.labels[a], w = w);
                for b in 0..n {
                    s += &format!(" {:>w$}", self.labels[f(a, b)], w = w);
                }
                s.push('\n');
            }
            s
        };
        out += &format!(
            "elements: {}\ndesignated: {}\ntop: {}  bottom: {}  demorgan: {}\n",
            self.labels.join(" "),
            self.designated().iter().map(|&a| self.labels[a].as_str()).collect::<Vec<_>>().join(" "),
            self.labels[self.top],
            self.labels[self.bottom],
            self.demorgan
        );
        out += "neg:";
        for a in 0..n {
            out += &format!(" {}->{}", self.labels[a], self.labels[self.neg(a)]);
        }
        out.push('\n');
        out += &row("&", &|a, b| self.meet(a, b));
        out += &row("|", &|a, b| self.join(a, b));
        out
    }
}

/// Matrix file format.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct MatrixJson {
    pub elements: Vec<String>,
    pub meet: Vec<Vec<usize>>,
    pub join: Vec<Vec<usize>>,
    pub neg: Vec<usize>,
    pub top: usize,
    pub bottom: usize,
    pub designated: Vec<usize>,
    #[serde(default)]
    pub flags: Vec<String>,
}

// ---------------------------------------------------------------- compiled rules

#[derive(Clone, Copy, Debug)]
enum Node {
    Atom(usize),
    Top,
    Bot,
    Neg(usize),
    And(usize, usize),
    Or(usize, usize),
}

/// A rule flattened into a shared node list, evaluated bottom-up per valuation.
struct Program {
    atoms: Vec<String>,
    nodes: Vec<Node>,
    premises: Vec<usize>,
    conclusions: Vec<usize>,
}

impl Program {
    fn compile(r: &RuleInstance) -> Program {
        let atoms: Vec<String> = r.atoms().into_iter().collect();
        let mut p = Program { atoms, nodes: Vec::new(), premises: Vec::new(), conclusions: Vec::new() };
        let mut memo: HashMap<Formula, usize> = HashMap::new();
        for f in &r.premises {
            let id = p.add(f, &mut memo);
            p.premises.push(id);
        }
        for f in &r.conclusions {
            let id = p.add(f, &mut memo);
            p.conclusions.push(id);
        }
        p
    }

    fn add(&mut self, f: &Formula, memo: &mut HashMap<Formula, usize>) -> usize {
        if let Some(&id) = memo.get(f) {
            return id;
        }
        let node = match f {
            Formula::Atom(a) => Node::Atom(self.atoms.binary_search(a).expect("atom collected")),
            Formula::Top => Node::Top,
            Formula::Bot => Node::Bot,
            Formula::Neg(g) => Node::Neg(self.add(g, memo)),
            Formula::And(a, b) => {
                let (x, y) = (self.add(a, memo), self.add(b, memo));
                Node::And(x, y)
            }
            Formula::Or(a, b) => {
                let (x, y) = (self.add(a, memo), self.add(b, memo));
                Node::Or(x, y)
            }
        };
        self.nodes.push(node);
        memo.insert(f.clone(), self.nodes.len() - 1);
        self.nodes.len() - 1
    }

    /// Odometer search; `first` pins the value of atom 0.
    fn search(&self, m: &FinMatrix, first: Option<usize>) -> Option<Vec<usize>> {
        let n = m.size();
        let k = self.atoms.len();
        let mut vals = vec![0usize; k];
        if let Some(f) = first {
            vals[0] = f;
        }
        let lo = usize::from(first.is_some());
        let mut node_vals = vec![0usize; self.nodes.len()];
        loop {
            for (i, node) in self.nodes.iter().enumerate() {
                node_vals[i] = match *node {
                    Node::Atom(a) => vals[a],
                    Node::Top => m.top,
                    Node::Bot => m.bottom,
                    Node::Neg(x) => m.neg(node_vals[x]),
                    Node::And(x, y) => m.meet(node_vals[x], node_vals[y]),
                    Node::Or(x, y) => m.join(node_vals[x], node_vals[y]),
                };
            }
            if self.premises.iter().all(|&p| m.designated[node_vals[p]])
                && !self.conclusions.iter().any(|&c| m.designated[node_vals[c]])
            {
                return Some(vals);
            }
            let mut i = lo;
            loop {
                if i >= k {
                    return None;
                }
                vals[i] += 1;
                if vals[i] < n {
                    break;
                }
                vals[i] = 0;
                i += 1;
            }
        }
    }
}

// ---------------------------------------------------------------- partitions

/// A partition of `0..n` as normalized block ids: block ids appear in order of first occurrence.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Partition {
    block: Vec<usize>,
}

impl Partition {
    pub fn identity(n: usize) -> Partition {
        Partition { block: (0..n).collect() }
    }

    pub fn full(n: usize) -> Partition {
        Partition { block: vec![0; n] }
    }

    /// Builds a partition from an equivalence relation given as a predicate.
    pub fn from_fn(n: usize, same: impl Fn(usize, usize) -> bool) -> Partition {
        let mut block = vec![usize::MAX; n];
        let mut next = 0;
        for a in 0..n {
            if block[a] != usize::MAX {
                continue;
            }
            for b in a..n {
                if block[b] == usize::MAX && same(a, b) {
                    block[b] = next;
                }
            }
            next += 1;
        }
        Partition { block }
    }

    /// Normalizes arbitrary block labels.
    pub fn from_labels(labels: &[usize]) -> Partition {
        let mut ids: HashMap<usize, usize> = HashMap::new();
        let block = labels
            .iter()
            .map(|&l| {
                let next = ids.len();
                *ids.entry(l).or_insert(next)
            })
            .collect();
        Partition { block }
    }

    pub fn len(&self) -> usize {
        self.block.len()
    }

    pub fn is_empty(&self) -> bool {
        self.block.is_empty()
    }

    pub fn block_of(&self, a: usize) -> usize {
        self.block[a]
    }

    pub fn same(&self, a: usize, b: usize) -> bool {
        self.block[a] == self.block[b]
    }

    pub fn representative(&self, a: usize) -> usize {
        self.block.iter().position(|&b| b == self.block[a]).expect("present")
    }

    pub fn num_blocks(&self) -> usize {
        self.block.iter().max().map_or(0, |m| m + 1)
    }

    pub fn blocks(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_blocks()];
        for (a, &b) in self.block.iter().enumerate() {
            out[b].push(a);
        }
        out
    }

    pub fn is_identity(&self) -> bool {
        self.num_blocks() == self.len()
    }

    pub fn ids(&self) -> &[usize] {
        &self.block
    }
}

pub(crate) struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub(crate) fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect() }
    }

    pub(crate) fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns true if two classes were merged. The smaller root wins.
    pub(crate) fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        let (lo, hi) = (ra.min(rb), ra.max(rb));
        self.parent[hi] = lo;
        true
    }
}

// ---------------------------------------------------------------- maps and isomorphisms

/// Result of checking an element map between two matrices.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MapCheck {
    pub homomorphism: bool,
    pub preserves_designation: bool,
    pub strict: bool,
}

/// A map between matrices that has passed [`check_map`] as a designation-preserving homomorphism.
#[derive(Clone, Debug)]
pub struct MatrixMap {
    pub map: Vec<usize>,
    pub strict: bool,
}

impl MatrixMap {
    pub fn new(source: &FinMatrix, target: &FinMatrix, map: Vec<usize>) -> Result<MatrixMap> {
        let c = check_map(source, target, &map);
        if !c.homomorphism || !c.preserves_designation {
            return Err(Error::Precondition("map is not a matrix homomorphism".into()));
        }
        Ok(MatrixMap { map, strict: c.strict })
    }
}

pub fn check_map(source: &FinMatrix, target: &FinMatrix, map: &[usize]) -> MapCheck {
    let n = source.size();
    if map.len() != n || map.iter().any(|&x| x >= target.size()) {
        return MapCheck { homomorphism: false, preserves_designation: false, strict: false };
    }
    let hom = map[source.top] == target.top
        && map[source.bottom] == target.bottom
        && (0..n).all(|a| {
            map[source.neg(a)] == target.neg(map[a])
                && (0..n).all(|b| {
                    map[source.meet(a, b)] == target.meet(map[a], map[b])
                        && map[source.join(a, b)] == target.join(map[a], map[b])
                })
        });
    let preserves = (0..n).all(|a| !source.designated[a] || target.designated[map[a]]);
    let strict = (0..n).all(|a| source.designated[a] == target.designated[map[a]]);
    MapCheck { homomorphism: hom, preserves_designation: preserves, strict }
}

pub fn is_isomorphism(m1: &FinMatrix, m2: &FinMatrix, map: &[usize]) -> bool {
    if m1.size() != m2.size() {
        return false;
    }
    let mut seen = vec![false; m2.size()];
    for &x in map {
        if x >= m2.size() || seen[x] {
            return false;
        }
        seen[x] = true;
    }
    let c = check_map(m1, m2, map);
    c.homomorphism && c.strict
}

/// Searches for an isomorphism of matrices, returned as an element map from `m1` to `m2`.
pub fn find_isomorphism(m1: &FinMatrix, m2: &FinMatrix) -> Option<Vec<usize>> {
    if m1.size() != m2.size()
        || m1.designated().len() != m2.designated().len()
        || m1.demorgan != m2.demorgan
    {
        return None;
    }
    let j1 = m1.join_irreducibles();
    let j2 = m2.join_irreducibles();
    if j1.len() != j2.len() {
        return None;
    }
    let use_partner = m1.demorgan;
    let info = |m: &FinMatrix, js: &[usize]| -> Vec<(usize, usize, bool, bool)> {
        js.iter()
            .map(|&j| {
                let below = js.iter().filter(|&&k| m.leq(k, j)).count();
                let above = js.iter().filter(|&&k| m.leq(j, k)).count();
                let fixed = use_partner && m.ji_partner(j) == j;
                (below, above, m.designated[j], fixed)
            })
            .collect()
    };
    let inv1 = info(m1, &j1);
    let inv2 = info(m2, &j2);
    let mut sorted1 = inv1.clone();
    let mut sorted2 = inv2.clone();
    sorted1.sort();
    sorted2.sort();
    if sorted1 != sorted2 {
        return None;
    }
    let pos1: HashMap<usize, usize> = j1.iter().enumerate().map(|(i, &j)| (j, i)).collect();
    let pos2: HashMap<usize, usize> = j2.iter().enumerate().map(|(i, &j)| (j, i)).collect();
    let partner1: Vec<usize> = if use_partner {
        j1.iter().map(|&j| pos1[&m1.ji_partner(j)]).collect()
    } else {
        Vec::new()
    };
    let partner2: Vec<usize> = if use_partner {
        j2.iter().map(|&j| pos2[&m2.ji_partner(j)]).collect()
    } else {
        Vec::new()
    };
    let ctx = IsoSearch {
        m1,
        m2,
        j1: &j1,
        j2: &j2,
        inv1: &inv1,
        inv2: &inv2,
        partner1: &partner1,
        partner2: &partner2,
    };
    let mut assign = vec![usize::MAX; j1.len()];
    let mut used = vec![false; j2.len()];
    ctx.backtrack(0, &mut assign, &mut used)
}

struct IsoSearch<'a> {
    m1: &'a FinMatrix,
    m2: &'a FinMatrix,
    j1: &'a [usize],
    j2: &'a [usize],
    inv1: &'a [(usize, usize, bool, bool)],
    inv2: &'a [(usize, usize, bool, bool)],
    partner1: &'a [usize],
    partner2: &'a [usize],
}

impl IsoSearch<'_> {
    fn consistent(&self, i: usize, t: usize, assign: &[usize]) -> bool {
        if self.inv1[i] != self.inv2[t] {
            return false;
        }
        (0..assign.len()).all(|k| {
            let s = assign[k];
            s == usize::MAX
                || (self.m1.leq(self.j1[k], self.j1[i]) == self.m2.leq(self.j2[s], self.j2[t])
                    && self.m1.leq(self.j1[i], self.j1[k]) == self.m2.leq(self.j2[t], self.j2[s]))
        })
    }

    /// Assigns `i -> t` and, for De Morgan inputs, the forced partner pair. Returns the indices set.
    fn place(&self, i: usize, t: usize, assign: &mut [usize], used: &mut [bool]) -> Option<Vec<usize>> {
        if !self.consistent(i, t, assign) {
            return None;
        }
        assign[i] = t;
        used[t] = true;
        let mut placed = vec![i];
        if !self.partner1.is_empty() {
            let (pi, pt) = (self.partner1[i], self.partner2[t]);
            if assign[pi] == usize::MAX {
                if used[pt] || !self.consistent(pi, pt, assign) {
                    assign[i] = usize::MAX;
                    used[t] = false;
                    return None;
                }
                assign[pi] = pt;
                used[pt] = true;
                placed.push(pi);
            } else if assign[pi] != pt {
                assign[i] = usize::MAX;
                used[t] = false;
                return None;
            }
        }
        Some(placed)
    }

    fn backtrack(&self, i: usize, assign: &mut Vec<usize>, used: &mut Vec<bool>) -> Option<Vec<usize>> {
        if i == assign.len() {
            return self.extend(assign);
        }
        if assign[i] != usize::MAX {
            return self.backtrack(i + 1, assign, used);
        }
        for t in 0..self.j2.len() {
            if used[t] {
                continue;
            }
            if let Some(placed) = self.place(i, t, assign, used) {
                if let Some(found) = self.backtrack(i + 1, assign, used) {
                    return Some(found);
                }
                for p in placed {
                    used[assign[p]] = false;
                    assign[p] = usize::MAX;
                }
            }
        }
        None
    }

    fn extend(&self, assign: &[usize]) -> Option<Vec<usize>> {
        let n = self.m1.size();
        let map: Vec<usize> = (0..n)
            .map(|x| {
                (0..self.j1.len())
                    .filter(|&k| self.m1.leq(self.j1[k], x))
                    .fold(self.m2.bottom, |acc, k| self.m2.join(acc, self.j2[assign[k]]))
            })
            .collect();
        is_isomorphism(self.m1, self.m2, &map).then_some(map)
    }
}

pub fn product(ms: &[FinMatrix]) -> Result<FinMatrix> {
    if ms.is_empty() {
        return Err(Error::Precondition("product of an empty list".into()));
    }
    let size = ms.iter().try_fold(1usize, |acc, m| acc.checked_mul(m.size()));
    match size {
        Some(s) if s <= MAX_CARRIER => {}
        _ => return Err(Error::Guard(format!("product exceeds {MAX_CARRIER} elements"))),
    }
    let dims: Vec<usize> = ms.iter().map(|m| m.size()).collect();
    let total: usize = dims.iter().product();
    let decode = |mut x: usize| -> Vec<usize> {
        let mut out = vec![0; dims.len()];
        for i in (0..dims.len()).rev() {
            out[i] = x % dims[i];
            x /= dims[i];
        }
        out
    };
    let encode = |v: &[usize]| v.iter().zip(&dims).fold(0, |acc, (&x, &d)| acc * d + x);
    let tuples: Vec<Vec<usize>> = (0..total).map(decode).collect();
    let mut meet = Vec::with_capacity(total * total);
    let mut join = Vec::with_capacity(total * total);
    let mut buf = vec![0; dims.len()];
    for a in &tuples {
        for b in &tuples {
            for (i, m) in ms.iter().enumerate() {
                buf[i] = m.meet(a[i], b[i]);
            }
            meet.push(encode(&buf) as u16);
            for (i, m) in ms.iter().enumerate() {
                buf[i] = m.join(a[i], b[i]);
            }
            join.push(encode(&buf) as u16);
        }
    }
    let neg = tuples
        .iter()
        .map(|a| encode(&a.iter().zip(ms).map(|(&x, m)| m.neg(x)).collect::<Vec<_>>()) as u16)
        .collect();
    let labels = tuples
        .iter()
        .map(|a| {
            let parts: Vec<&str> = a.iter().zip(ms).map(|(&x, m)| m.label(x)).collect();
            format!("({})", parts.join(","))
        })
        .collect();
    let top = encode(&ms.iter().map(|m| m.top).collect::<Vec<_>>());
    let bottom = encode(&ms.iter().map(|m| m.bottom).collect::<Vec<_>>());
    let designated = tuples.iter().map(|a| a.iter().zip(ms).all(|(&x, m)| m.designated[x])).collect();
    FinMatrix::from_raw(labels, meet, join, neg, top, bottom, designated)
}

pub fn power(m: &FinMatrix, k: usize) -> Result<FinMatrix> {
    product(&vec![m.clone(); k])
}

// ---------------------------------------------------------------- interval splitting

/// Decomposition of a De Morgan matrix along an element `a` with `a | ~a = T`.
#[derive(Clone, Debug)]
pub struct Split {
    /// The interval `[F, a]` with negation `a & ~x`.
    pub left: FinMatrix,
    /// The interval `[F, ~a]` with negation `~a & ~x`.
    pub right: FinMatrix,
    /// `x -> (a & x, ~a & x)` as indices into `product(left, right)`.
    pub map: Vec<usize>,
    /// Whether the designated set corresponds to the product of the two induced designated sets.
    pub designation_is_product: bool,
}

pub fn split_at(m: &FinMatrix, a: usize) -> Result<Split> {
    if !m.demorgan {
        return Err(Error::Precondition("split_at needs a De Morgan matrix".into()));
    }
    if a >= m.size() {
        return Err(Error::Precondition("element out of range".into()));
    }
    let na = m.neg(a);
    if m.join(a, na) != m.top {
        return Err(Error::Precondition(format!("{} | ~{} is not top", m.label(a), m.label(a))));
    }
    let left = interval(m, a)?;
    let right = interval(m, na)?;
    let prod = product(&[left.clone(), right.clone()])?;
    let li: HashMap<usize, usize> = interval_elements(m, a).into_iter().enumerate().map(|(i, x)| (x, i)).collect();
    let ri: HashMap<usize, usize> = interval_elements(m, na).into_iter().enumerate().map(|(i, x)| (x, i)).collect();
    let map: Vec<usize> = (0..m.size())
        .map(|x| li[&m.meet(a, x)] * right.size() + ri[&m.meet(na, x)])
        .collect();
    let structural = {
        let mut seen = vec![false; prod.size()];
        map.iter().all(|&y| !std::mem::replace(&mut seen[y], true)) && check_map(m, &prod, &map).homomorphism
    };
    if !structural {
        return Err(Error::Precondition("interval map is not an isomorphism".into()));
    }
    let designation_is_product = (0..m.size()).all(|x| m.designated[x] == prod.designated[map[x]]);
    Ok(Split { left, right, map, designation_is_product })
}

fn interval_elements(m: &FinMatrix, a: usize) -> Vec<usize> {
    (0..m.size()).filter(|&x| m.leq(x, a)).collect()
}

fn interval(m: &FinMatrix, a: usize) -> Result<FinMatrix> {
    let els = interval_elements(m, a);
    let idx: HashMap<usize, usize> = els.iter().enumerate().map(|(i, &x)| (x, i)).collect();
    let k = els.len();
    let mut meet = Vec::with_capacity(k * k);
    let mut join = Vec::with_capacity(k * k);
    for &x in &els {
        for &y in &els {
            meet.push(idx[&m.meet(x, y)] as u16);
            join.push(idx[&m.join(x, y)] as u16);
        }
    }
    let neg = els.iter().map(|&x| idx[&m.meet(a, m.neg(x))] as u16).collect();
    let designated_sub: BTreeSet<usize> = m.designated().into_iter().map(|f| m.meet(a, f)).collect();
    FinMatrix::from_raw(
        els.iter().map(|&x| m.label(x).to_string()).collect(),
        meet,
        join,
        neg,
        idx[&a],
        idx[&m.bottom],
        els.iter().map(|x| designated_sub.contains(x)).collect(),
    )
}

// ---------------------------------------------------------------- free algebras

/// Largest number of elements a generated free algebra may have.
pub const MAX_FREE_ELEMENTS: usize = 4096;

/// The De Morgan algebra generated by `gens` subject to inequalities `lhs <= rhs`,
/// built inside a power of the four-element De Morgan algebra. Only `T` is designated.
pub fn free_dm_algebra(gens: &[String], relations: &[(Formula, Formula)]) -> Result<FinMatrix> {
    if gens.len() > 3 {
        return Err(Error::Guard("at most 3 generators".into()));
    }
    for (l, r) in relations {
        for a in l.atoms().union(&r.atoms()) {
            if !gens.contains(a) {
                return Err(Error::Precondition(format!("relation mentions non-generator `{a}`")));
            }
        }
    }
    // Four-element algebra as (truth, falsity) bits: T=(1,0), F=(0,1), B=(1,1), N=(0,0).
    let dm4 = FinMatrix::from_covers(&["F", "N", "B", "T"], &[(0, 1), (0, 2), (1, 3), (2, 3)], &[3, 1, 2, 0], &[3])?;
    let mut points: Vec<Vec<usize>> = Vec::new();
    for code in 0..4usize.pow(gens.len() as u32) {
        let vals: Vec<usize> = (0..gens.len()).map(|i| code / 4usize.pow(i as u32) % 4).collect();
        let v: Valuation = gens.iter().cloned().zip(vals.iter().copied()).collect();
        let ok = relations
            .iter()
            .all(|(l, r)| dm4.leq(dm4.evaluate(&v, l).expect("bound"), dm4.evaluate(&v, r).expect("bound")));
        if ok {
            points.push(vals);
        }
    }
    let bits = |x: usize| -> (bool, bool) {
        match x {
            0 => (false, true),
            1 => (false, false),
            2 => (true, true),
            _ => (true, false),
        }
    };
    type Vector = (u64, u64);
    let full: u64 = if points.len() == 64 { u64::MAX } else { (1u64 << points.len()) - 1 };
    let top: Vector = (full, 0);
    let bottom: Vector = (0, full);
    let mut items: Vec<(Vector, Formula)> = vec![(top, Formula::Top), (bottom, Formula::Bot)];
    for (g, name) in gens.iter().enumerate() {
        let mut t = 0u64;
        let mut f = 0u64;
        for (s, p) in points.iter().enumerate() {
            let (bt, bf) = bits(p[g]);
            t |= u64::from(bt) << s;
            f |= u64::from(bf) << s;
        }
        items.push(((t, f), Formula::atom(name.clone())));
        items.push(((f, t), Formula::neg(Formula::atom(name.clone()))));
    }
    let meet = |x: Vector, y: Vector| (x.0 & y.0, x.1 | y.1);
    let join = |x: Vector, y: Vector| (x.0 | y.0, x.1 & y.1);
    let close = |items: Vec<(Vector, Formula)>, op: &dyn Fn(Vector, Vector) -> Vector, conj: bool| -> Result<Vec<(Vector, Formula)>> {
        let mut index: HashMap<Vector, usize> = HashMap::new();
        let mut out: Vec<(Vector, Formula)> = Vec::new();
        for (v, f) in items {
            if let std::collections::hash_map::Entry::Vacant(e) = index.entry(v) {
                e.insert(out.len());
                out.push((v, f));
            }
        }
        let mut i = 0;
        while i < out.len() {
            for j in 0..i {
                let v = op(out[i].0, out[j].0);
                if !index.contains_key(&v) {
                    if out.len() >= MAX_FREE_ELEMENTS {
                        return Err(Error::Guard(format!("free algebra exceeds {MAX_FREE_ELEMENTS} elements")));
                    }
                    let f = if conj {
                        Formula::and(out[j].1.clone(), out[i].1.clone())
                    } else {
                        Formula::or(out[j].1.clone(), out[i].1.clone())
                    };
                    index.insert(v, out.len());
                    out.push((v, f));
                }
            }
            i += 1;
        }
        Ok(out)
    };
    let items = close(items, &meet, true)?;
    let items = close(items, &join, false)?;
    let index: HashMap<Vector, usize> = items.iter().enumerate().map(|(i, (v, _))| (*v, i)).collect();
    let n = items.len();
    let mut mt = Vec::with_capacity(n * n);
    let mut jt = Vec::with_capacity(n * n);
    for (x, _) in &items {
        for (y, _) in &items {
            mt.push(*index.get(&meet(*x, *y)).ok_or_else(|| Error::InvalidMatrix("not meet-closed".into()))? as u16);
            jt.push(*index.get(&join(*x, *y)).ok_or_else(|| Error::InvalidMatrix("not join-closed".into()))? as u16);
        }
    }
    let neg = items
        .iter()
        .map(|((t, f), _)| index.get(&(*f, *t)).map(|&i| i as u16).ok_or_else(|| Error::InvalidMatrix("not closed under negation".into())))
        .collect::<Result<Vec<_>>>()?;
    let top_i = index[&top];
    FinMatrix::from_raw(
        items.iter().map(|(_, f)| f.to_string()).collect(),
        mt,
        jt,
        neg,
        top_i,
        index[&bottom],
        (0..n).map(|i| i == top_i).collect(),
    )
}

// ---------------------------------------------------------------- catalog

/// Four-element De Morgan algebra, designating `b` and `1`.
pub fn bd4() -> FinMatrix {
    FinMatrix::from_covers(&["0", "n", "b", "1"], &[(0, 1), (0, 2), (1, 3), (2, 3)], &[3, 1, 2, 0], &[2, 3])
        .expect("valid")
}

/// Four-element De Morgan algebra, designating `1` only.
pub fn etl4() -> FinMatrix {
    bd4().with_designated(&[3]).expect("valid")
}

pub fn k3() -> FinMatrix {
    FinMatrix::from_covers(&["0", "n", "1"], &[(0, 1), (1, 2)], &[2, 1, 0], &[2]).expect("valid")
}

pub fn lp3() -> FinMatrix {
    FinMatrix::from_covers(&["0", "b", "1"], &[(0, 1), (1, 2)], &[2, 1, 0], &[1, 2]).expect("valid")
}

pub fn cl2() -> FinMatrix {
    FinMatrix::from_covers(&["0", "1"], &[(0, 1)], &[1, 0], &[1]).expect("valid")
}

/// Eight-element matrix of the logic above the n-explosive disjunctive syllogisms.
pub fn kminus8() -> FinMatrix {
    // 0 a b c d e f 1
    let covers = [(0, 1), (0, 2), (1, 3), (1, 4), (2, 4), (3, 5), (4, 5), (4, 6), (5, 7), (6, 7)];
    let neg = [7, 5, 6, 3, 4, 1, 2, 0];
    FinMatrix::from_covers(&["0", "a", "b", "c", "d", "e", "f", "1"], &covers, &neg, &[7]).expect("valid")
}

pub const CATALOG_NAMES: [&str; 6] = ["BD4", "ETL4", "K3", "LP3", "CL2", "Kminus8"];

pub fn catalog() -> Vec<(&'static str, FinMatrix)> {
    vec![
        ("BD4", bd4()),
        ("ETL4", etl4()),
        ("K3", k3()),
        ("LP3", lp3()),
        ("CL2", cl2()),
        ("Kminus8", kminus8()),
    ]
}

/// Case-insensitive catalog lookup.
pub fn catalog_matrix(name: &str) -> Result<FinMatrix> {
    catalog()
        .into_iter()
        .find(|(n, _)| n.eq_ignore_ascii_case(name))
        .map(|(_, m)| m)
        .ok_or_else(|| Error::UnknownName(name.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::{parse, parse_rule};

    fn rule(s: &str) -> RuleInstance {
        parse_rule(s).unwrap()
    }

    fn val(m: &FinMatrix, pairs: &[(&str, &str)]) -> Valuation {
        pairs.iter().map(|(a, l)| (a.to_string(), m.element(l).unwrap())).collect()
    }

    #[test]
    fn catalog_is_well_formed() {
        for (name, m) in catalog() {
            assert!(m.is_demorgan(), "{name}");
            assert!(m.designated_is_filter(), "{name}");
            m.check_lattice_laws().unwrap();
            m.check_demorgan_laws().unwrap();
        }
        assert_eq!(kminus8().size(), 8);
    }

    #[test]
    fn prime_designated_sets() {
        let prime: Vec<&str> = catalog().into_iter().filter(|(_, m)| m.designated_is_prime_filter()).map(|(n, _)| n).collect();
        assert_eq!(prime, ["BD4", "K3", "LP3", "CL2"]);
        let split = rule("p | q |- p, q");
        assert!(!etl4().validates(&split) && !kminus8().validates(&split) && bd4().validates(&split));
    }

    #[test]
    fn evaluation_examples() {
        let bd = bd4();
        let b = bd.element("b").unwrap();
        assert_eq!(bd.evaluate(&val(&bd, &[("p", "b")]), &parse("p & ~p").unwrap()).unwrap(), b);
        let k = k3();
        let n = k.element("n").unwrap();
        assert_eq!(k.evaluate(&val(&k, &[("p", "n")]), &parse("p | ~p").unwrap()).unwrap(), n);
        let c = cl2();
        for x in ["0", "1"] {
            assert_eq!(c.evaluate(&val(&c, &[("p", x)]), &parse("p | ~p").unwrap()).unwrap(), c.top());
        }
        assert!(matches!(bd.evaluate(&Valuation::new(), &parse("q").unwrap()), Err(Error::MissingAtom(_))));
    }

    #[test]
    fn validity_examples() {
        assert!(etl4().validates(&rule("p, ~p|q |- q")));
        let bd = bd4();
        let cx = bd.find_counterexample(&rule("p, ~p|q |- q")).unwrap();
        assert_eq!(cx["p"], bd.element("b").unwrap());
        assert_eq!(cx["q"], bd.element("0").unwrap());
        assert!(lp3().validates(&rule("|- p|~p")));
        assert!(!k3().validates(&rule("|- p|~p")));
        assert!(k3().validates(&rule("p|q, ~q|r |- p|r")));
        assert!(bd4().validates(&rule("p|q |- p, q")));
        assert!(etl4().validates(&rule("p, ~p |-")));
        assert!(!lp3().validates(&rule("p, ~p |-")));
    }

    #[test]
    fn trivial_and_empty_designation() {
        let t = FinMatrix::trivial();
        assert!(t.validates(&rule("p |- q")));
        assert!(!t.validates(&rule("p, ~p |-")));
        let none = cl2().with_designated(&[]).unwrap();
        assert!(none.validates(&rule("p |-")));
        assert!(!none.validates(&rule("|- p | ~p")));
    }

    #[test]
    fn products() {
        let c = product(&[cl2(), cl2()]).unwrap();
        assert_eq!(c.size(), 4);
        assert_eq!(c.designated().len(), 1);
        let e = product(&[etl4(), bd4()]).unwrap();
        assert!(e.validates(&rule("p, ~p |- q")));
        assert!(!e.validates(&rule("p, ~p|q |- q")));
        assert!(product(&[]).is_err());
    }

    #[test]
    fn subuniverses_of_dm4() {
        let bd = bd4();
        let subs = bd.subuniverses();
        assert_eq!(subs.len(), 4);
        let names: Vec<Vec<&str>> = subs.iter().map(|s| s.iter().map(|&x| bd.label(x)).collect()).collect();
        assert!(names.contains(&vec!["0", "1"]));
        assert!(names.contains(&vec!["0", "n", "1"]));
        assert!(names.contains(&vec!["0", "b", "1"]));
        let k_carrier = bd.submatrix(&subs[1]).unwrap().with_designated(&[2]).unwrap();
        assert!(find_isomorphism(&k_carrier, &k3()).is_some() || find_isomorphism(&bd.submatrix(&subs[2]).unwrap().with_designated(&[2]).unwrap(), &k3()).is_some());
        assert_eq!(cl2().submatrices().count(), 1);
    }

    #[test]
    fn leibniz_examples() {
        assert!(etl4().leibniz_congruence().is_identity());
        let t = bd4().with_designated(&[0, 1, 2, 3]).unwrap();
        assert_eq!(t.leibniz_congruence().num_blocks(), 1);
        // 4-chain 0 < a < b < 1, ~a = b, designated {a, b, 1}.
        let chain = FinMatrix::from_covers(&["0", "a", "b", "1"], &[(0, 1), (1, 2), (2, 3)], &[3, 2, 1, 0], &[1, 2, 3]).unwrap();
        let theta = chain.leibniz_congruence();
        assert!(theta.same(1, 2));
        assert_eq!(theta.num_blocks(), 3);
        assert!(find_isomorphism(&chain.leibniz_reduct(), &lp3()).is_some());
        let e = product(&[etl4(), FinMatrix::trivial()]).unwrap();
        assert!(find_isomorphism(&e.leibniz_reduct(), &etl4()).is_some());
        for (_, m) in catalog() {
            assert!(find_isomorphism(&m.leibniz_reduct(), &m).is_some());
        }
    }

    /// Brute-force largest compatible congruence over all partitions of a small carrier.
    fn leibniz_oracle(m: &FinMatrix) -> Partition {
        let n = m.size();
        let mut best: Option<Partition> = None;
        let mut labels = vec![0usize; n];
        fn rec(i: usize, labels: &mut Vec<usize>, max: usize, m: &FinMatrix, best: &mut Option<Partition>) {
            let n = labels.len();
            if i == n {
                let p = Partition::from_labels(labels);
                let compatible = (0..n).all(|a| (0..n).all(|b| !p.same(a, b) || m.is_designated(a) == m.is_designated(b)));
                if compatible && m.is_congruence(&p) && best.as_ref().is_none_or(|b| p.num_blocks() < b.num_blocks()) {
                    *best = Some(p);
                }
                return;
            }
            for l in 0..=max {
                labels[i] = l;
                rec(i + 1, labels, max.max(l + 1), m, best);
            }
        }
        rec(0, &mut labels, 0, m, &mut best);
        best.unwrap()
    }

    #[test]
    fn leibniz_matches_partition_oracle() {
        let mut cases: Vec<FinMatrix> = catalog().into_iter().map(|(_, m)| m).filter(|m| m.size() <= 6).collect();
        cases.push(FinMatrix::from_covers(&["0", "a", "b", "1"], &[(0, 1), (1, 2), (2, 3)], &[3, 2, 1, 0], &[1, 2, 3]).unwrap());
        cases.push(bd4().with_designated(&[1, 3]).unwrap());
        cases.push(bd4().with_designated(&[]).unwrap());
        cases.push(product(&[cl2(), lp3()]).unwrap());
        for m in cases {
            assert_eq!(m.leibniz_congruence(), leibniz_oracle(&m));
        }
    }

    #[test]
    fn leibniz_dual_route_matches_separation() {
        use rand::SeedableRng;
        let mut cases: Vec<FinMatrix> = Vec::new();
        for (_, a) in catalog() {
            for (_, b) in catalog() {
                if a.size() * b.size() <= 32 {
                    cases.push(product(&[a.clone(), b.clone()]).unwrap());
                }
            }
        }
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..40 {
            let p = frame::random_frame(&mut rng, 6);
            cases.push(frame::complex_matrix(&p).unwrap());
        }
        for m in cases {
            assert_eq!(m.leibniz_congruence(), m.leibniz_congruence_by_separation(), "{}", m.render());
        }
    }

    #[test]
    fn principal_congruences() {
        let bd = bd4();
        let (n, t) = (1, 3);
        assert!(bd.principal_congruence(n, n).unwrap().is_identity());
        // The four-element algebra is simple: n ~ 1 forces n ~ 0 through negation, then everything collapses.
        assert_eq!(bd.principal_congruence(n, t).unwrap().num_blocks(), 1);
        let k = product(&[cl2(), k3()]).unwrap();
        let theta = k.principal_congruence(k.element("(0,n)").unwrap(), k.element("(0,1)").unwrap()).unwrap();
        assert_eq!(theta.num_blocks(), 2);
        for m in [bd4(), kminus8(), product(&[bd4(), cl2()]).unwrap()] {
            for a in 0..m.size() {
                for bb in 0..m.size() {
                    if !m.leq(a, bb) {
                        continue;
                    }
                    let theta = m.principal_congruence(a, bb).unwrap();
                    let (na, nb) = (m.neg(a), m.neg(bb));
                    for x in 0..m.size() {
                        for y in 0..m.size() {
                            let eqs = m.meet(m.meet(x, a), nb) == m.meet(m.meet(y, a), nb)
                                && m.join(m.meet(x, a), na) == m.join(m.meet(y, a), na)
                                && m.join(m.join(x, bb), na) == m.join(m.join(y, bb), na)
                                && m.meet(m.join(x, bb), nb) == m.meet(m.join(y, bb), nb);
                            assert_eq!(theta.same(x, y), eqs);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn isomorphism_examples() {
        assert_eq!(find_isomorphism(&cl2(), &cl2()), Some(vec![0, 1]));
        assert!(find_isomorphism(&bd4(), &k3()).is_none());
        assert!(find_isomorphism(&bd4(), &etl4()).is_none());
        let relabeled = FinMatrix::from_covers(&["0", "b", "n", "1"], &[(0, 1), (0, 2), (1, 3), (2, 3)], &[3, 1, 2, 0], &[1, 3]).unwrap();
        let iso = find_isomorphism(&bd4(), &relabeled).unwrap();
        assert_eq!(iso, vec![0, 2, 1, 3]);
    }

    #[test]
    fn splitting() {
        let c2 = product(&[cl2(), cl2()]).unwrap();
        let a = c2.element("(1,0)").unwrap();
        let s = split_at(&c2, a).unwrap();
        assert!(find_isomorphism(&s.left, &cl2()).is_some());
        assert!(find_isomorphism(&s.right, &cl2()).is_some());
        assert!(s.designation_is_product);
        let s = split_at(&bd4(), bd4().top()).unwrap();
        assert!(find_isomorphism(&s.left, &bd4()).is_some());
        assert_eq!(s.right.size(), 1);
        let d2 = product(&[bd4(), bd4()]).unwrap();
        let s = split_at(&d2, d2.element("(1,0)").unwrap()).unwrap();
        assert!(find_isomorphism(&s.left, &bd4()).is_some());
        assert!(find_isomorphism(&s.right, &bd4()).is_some());
        assert!(split_at(&bd4(), 1).is_err());
        for (_, m) in catalog() {
            for a in 0..m.size() {
                if m.join(a, m.neg(a)) == m.top() {
                    let s = split_at(&m, a).unwrap();
                    let prod = product(&[s.left, s.right]).unwrap();
                    assert!(check_map(&m, &prod, &s.map).homomorphism);
                }
            }
        }
    }

    #[test]
    fn free_algebras() {
        let g = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        let r = |a: &str, b: &str| (parse(a).unwrap(), parse(b).unwrap());
        let three = free_dm_algebra(&g(&["a", "b"]), &[r("b", "a"), r("a", "~a | b")]).unwrap();
        assert_eq!(three.size(), 10);
        let ko = free_dm_algebra(&g(&["a", "b"]), &[r("a", "~a"), r("b", "~b")]).unwrap();
        assert_eq!(ko.size(), 20);
        let one = free_dm_algebra(&g(&["a"]), &[]).unwrap();
        assert_eq!(one.size(), 6);
        assert!(one.is_demorgan() && three.is_demorgan() && ko.is_demorgan());
        assert!(free_dm_algebra(&g(&["a", "b", "c", "d"]), &[]).is_err());
    }

    #[test]
    fn json_round_trip_and_flag_checks() {
        let m = kminus8();
        let j = m.to_json();
        let back = FinMatrix::from_json(serde_json::from_str(&serde_json::to_string(&j).unwrap()).unwrap()).unwrap();
        assert_eq!(back, m);
        let mut bad = lp3().to_json();
        bad.designated = vec![1];
        assert!(FinMatrix::from_json(bad).is_err());
        let mut nondistributive = MatrixJson {
            elements: ["0", "a", "b", "c", "1"].iter().map(|s| s.to_string()).collect(),
            meet: vec![],
            join: vec![],
            neg: vec![4, 1, 2, 3, 0],
            top: 4,
            bottom: 0,
            designated: vec![4],
            flags: vec![],
        };
        let m3 = |a: usize, b: usize, meet: bool| -> usize {
            if a == b { a } else if a == 0 || b == 0 { if meet { 0 } else { a.max(b) } } else if a == 4 || b == 4 { if meet { a.min(b) } else { 4 } } else if meet { 0 } else { 4 }
        };
        nondistributive.meet = (0..5).map(|a| (0..5).map(|b| m3(a, b, true)).collect()).collect();
        nondistributive.join = (0..5).map(|a| (0..5).map(|b| m3(a, b, false)).collect()).collect();
        assert!(matches!(FinMatrix::from_json(nondistributive), Err(Error::InvalidMatrix(_))));
    }

    #[test]
    fn dual_route_agrees_with_enumeration() {
        let big = product(&[kminus8(), bd4()]).unwrap();
        for s in ["p, ~p|q |- q", "p & ~p |-", "p | q, ~q | r |- p | r", "p1 & ~p1 | q, ~q | r |- r", "|- p | ~p", "p | q |- p, q"] {
            let r = rule(s);
            assert_eq!(big.validates(&r), big.validates_exhaustive(&r), "{s}");
        }
    }

    mod props {
        use super::*;
        use crate::formula::tests_support::arb_rule;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]
            #[test]
            fn leibniz_reduct_is_idempotent(i in 0usize..6, j in 0usize..6) {
                let cat = catalog();
                let m = product(&[cat[i].1.clone(), cat[j].1.clone()]).unwrap();
                let r = m.leibniz_reduct();
                prop_assert!(find_isomorphism(&r.leibniz_reduct(), &r).is_some());
                prop_assert!(r.is_reduced());
            }

            #[test]
            fn products_satisfy_demorgan_laws(i in 0usize..6, j in 0usize..6) {
                let cat = catalog();
                let m = product(&[cat[i].1.clone(), cat[j].1.clone()]).unwrap();
                prop_assert!(m.check_demorgan_laws().is_ok());
            }

            #[test]
            fn dual_route_matches_enumeration(r in arb_rule(), i in 0usize..6) {
                let m = product(&[catalog()[i].1.clone(), bd4()]).unwrap();
                prop_assert_eq!(m.validates(&r), m.validates_exhaustive(&r));
            }

            #[test]
            fn explosive_validity_is_antitone_in_designation(r in arb_rule(), drop in 0usize..4) {
                let r = RuleInstance::explosive(r.premises);
                let m = bd4();
                let smaller: Vec<usize> = m.designated().into_iter().filter(|&x| x != drop).collect();
                let shrunk = m.with_designated(&smaller).unwrap();
                if m.validates(&r) {
                    prop_assert!(shrunk.validates(&r));
                }
            }
        }
    }
}
