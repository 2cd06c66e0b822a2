//! Acceptance checks shared by `demorgan-lab verify` and the `acceptance` test target.
//!
//! Each check returns a [`CriterionReport`]; a check passes only if every comparison agrees and
//! its time budget holds.

use std::collections::BTreeSet;
use std::fmt;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::bridge::{alpha_rule, gamma, mu_minus, mu_plus, mu_triple, TriplePresentation};
use crate::error::Result;
use crate::formula::{parse_rule, Formula, RuleInstance};
use crate::frame::{
    complex_matrix, dual_frame, frames_isomorphic, leibniz_subframe, random_frame, roundtrip_check,
};
use crate::graph::{all_graphs, component_masks, hom_search, Graph};
use crate::logics::{
    bd_mc_axioms, disjunctive_syllogism, ecq, ecq_rule, etl_plus_rule, excluded_middle, exp_validates,
    kminus_witness, ko_rule, probe_lattice, registry, resolution, PROBE_LOGICS,
};
use crate::matrix::{bd4, catalog, cl2, etl4, find_isomorphism, free_dm_algebra, k3, kminus8, lp3, power, product, FinMatrix};
use crate::pool::rule_pool;

pub const DEFAULT_SEED: u64 = 7;

/// Per-check bound for the catalog validity table.
pub const TABLE_CHECK_BUDGET: Duration = Duration::from_millis(1);
pub const PRODUCT_BUDGET: Duration = Duration::from_secs(10);
pub const ALPHA_BUDGET: Duration = Duration::from_secs(60);
pub const TOTAL_BUDGET: Duration = Duration::from_secs(120);

pub const RANDOM_FRAMES: usize = 100;
pub const RANDOM_FRAME_POINTS: usize = 8;

pub const CRITERIA: [(usize, &str); 13] = [
    (1, "catalog validity table"),
    (2, "explosive-part identities"),
    (3, "product-logic identity"),
    (4, "duality round trips"),
    (5, "Leibniz commutation"),
    (6, "construction identifications"),
    (7, "colorability correspondence"),
    (8, "alpha law"),
    (9, "separation witnesses"),
    (10, "free-algebra counts"),
    (11, "K- witness equivalence"),
    (12, "multiple-conclusion suite"),
    (13, "lattice probe"),
];

#[derive(Clone, Debug, Serialize)]
pub struct CriterionReport {
    pub id: usize,
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub elapsed_ms: f64,
}

impl fmt::Display for CriterionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{status} {:>2} {} ({:.1} ms): {}", self.id, self.name, self.elapsed_ms, self.detail)
    }
}

/// Outcome of a single check before timing is attached.
struct Outcome {
    passed: bool,
    detail: String,
}

impl Outcome {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Outcome { passed, detail: detail.into() }
    }
}

/// Collects failed comparisons, keeping the first few for the report.
#[derive(Default)]
struct Tally {
    checked: usize,
    failures: Vec<String>,
}

impl Tally {
    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.checked += 1;
        if !ok {
            self.failures.push(what());
        }
    }

    fn merge(mut self, other: Tally) -> Tally {
        self.checked += other.checked;
        self.failures.extend(other.failures);
        self
    }

    fn outcome(self, what: &str) -> Outcome {
        if self.failures.is_empty() {
            Outcome::new(true, format!("{} {what}, 0 mismatches", self.checked))
        } else {
            let shown: Vec<&str> = self.failures.iter().take(3).map(String::as_str).collect();
            Outcome::new(
                false,
                format!("{} of {} {what} mismatched; first: {}", self.failures.len(), self.checked, shown.join("; ")),
            )
        }
    }
}

fn rule(text: &str) -> RuleInstance {
    parse_rule(text).expect("built-in rule parses")
}

fn prod(ms: &[FinMatrix]) -> FinMatrix {
    product(ms).expect("small product")
}

fn connected_graphs(max: usize) -> Vec<Graph> {
    (1..=max).flat_map(all_graphs).filter(|g| component_masks(g).len() == 1).collect()
}

fn graphs_without_isolated(max: usize) -> Vec<Graph> {
    (1..=max).flat_map(all_graphs).filter(|g| !g.has_isolated_vertex()).collect()
}

/// Brute-force oracles kept independent of the search code in [`crate::graph`].
pub mod oracles {
    use crate::graph::Graph;

    fn maps(size: usize, n: usize) -> impl Iterator<Item = Vec<usize>> {
        let total = if size == 0 { 1 } else { n.checked_pow(size as u32).unwrap_or(0) };
        (0..total).map(move |mut code| {
            (0..size)
                .map(|_| {
                    let c = code % n.max(1);
                    code /= n.max(1);
                    c
                })
                .collect()
        })
    }

    /// Some map to `{0..n}` colors every edge with two different colors.
    pub fn n_colorable(g: &Graph, n: usize) -> bool {
        let edges = g.edges();
        if n == 0 {
            return g.is_empty();
        }
        maps(g.size(), n).any(|c| edges.iter().all(|&(u, v)| c[u] != c[v]))
    }

    /// Some partial map defined on every neighbor of some vertex colors each edge inside its domain properly.
    pub fn weakly_n_colorable(g: &Graph, n: usize) -> bool {
        let size = g.size();
        (0u64..1 << size).any(|dom| {
            (0..size).any(|u| g.neighbors(u) & !dom == 0) && n_colorable(&g.induced(dom), n)
        })
    }

    /// Some vertex map sends edges to edges.
    pub fn homomorphic(g: &Graph, h: &Graph) -> bool {
        let edges = g.edges();
        if g.is_empty() {
            return true;
        }
        maps(g.size(), h.size()).any(|f| edges.iter().all(|&(u, v)| h.adjacent(f[u], f[v])))
    }
}

fn table_check() -> Outcome {
    let (etl, bd, lp, cl, k) = (etl4(), bd4(), lp3(), cl2(), k3());
    let etl_bd = prod(&[etl.clone(), bd.clone()]);
    let cl_lp = prod(&[cl.clone(), lp.clone()]);
    let ds = disjunctive_syllogism();
    let em = excluded_middle();
    let res = resolution();
    let ecq = ecq();
    let ko = ko_rule();
    let rows: Vec<(&str, &RuleInstance, &str, &FinMatrix, bool)> = vec![
        ("DS", &ds, "ETL4", &etl, true),
        ("DS", &ds, "BD4", &bd, false),
        ("DS", &ds, "LP3", &lp, false),
        ("DS", &ds, "CL2*LP3", &cl_lp, false),
        ("EM", &em, "LP3", &lp, true),
        ("EM", &em, "CL2", &cl, true),
        ("EM", &em, "BD4", &bd, false),
        ("EM", &em, "K3", &k, false),
        ("EM", &em, "ETL4", &etl, false),
        ("resolution", &res, "K3", &k, true),
        ("resolution", &res, "CL2", &cl, true),
        ("resolution", &res, "BD4", &bd, false),
        ("resolution", &res, "LP3", &lp, false),
        ("ECQ", &ecq, "ETL4*BD4", &etl_bd, true),
        ("ECQ", &ecq, "K3", &k, true),
        ("ECQ", &ecq, "CL2", &cl, true),
        ("ECQ", &ecq, "LP3", &lp, false),
        ("ECQ", &ecq, "BD4", &bd, false),
        ("KO", &ko, "K3", &k, true),
        ("KO", &ko, "LP3", &lp, true),
    ];
    let mut tally = Tally::default();
    let mut slowest = Duration::ZERO;
    for (rn, r, mn, m, expected) in &rows {
        let t = Instant::now();
        let got = m.validates(r);
        let dt = t.elapsed();
        slowest = slowest.max(dt);
        tally.check(got == *expected, || format!("{rn} in {mn}: expected {expected}"));
        tally.check(dt < TABLE_CHECK_BUDGET, || format!("{rn} in {mn} took {dt:?}"));
    }
    let mut out = tally.outcome("table checks");
    out.detail.push_str(&format!(", slowest {slowest:.2?} (budget {TABLE_CHECK_BUDGET:?} each)"));
    out
}

fn explosive_parts_check(pool: &[RuleInstance]) -> Result<Outcome> {
    let (bd, lp, etl, cl) = (registry("BD")?, registry("LP")?, registry("ETL")?, registry("CL")?);
    let etl_bd = prod(&[etl4(), bd4()]);
    let cl_bd = prod(&[cl2(), bd4()]);
    let tally = pool
        .par_iter()
        .map(|r| {
            let mut t = Tally::default();
            t.check(exp_validates(&lp, &bd, r) == bd4().validates(r), || format!("Exp(LP) vs BD4 on {r}"));
            t.check(exp_validates(&etl, &bd, r) == etl_bd.validates(r), || format!("Exp(ETL) vs ETL4*BD4 on {r}"));
            t.check(exp_validates(&cl, &bd, r) == cl_bd.validates(r), || format!("Exp(CL) vs CL2*BD4 on {r}"));
            t
        })
        .reduce(Tally::default, Tally::merge);
    Ok(tally.outcome("comparisons"))
}

fn product_check(pool: &[RuleInstance]) -> Outcome {
    let start = Instant::now();
    let cat = catalog();
    let mut tally = Tally::default();
    for (an, a) in &cat {
        for (bn, b) in &cat {
            let ab = prod(&[a.clone(), b.clone()]);
            let t = pool
                .par_iter()
                .map(|r| {
                    let explosive = RuleInstance::new(r.premises.iter().cloned(), []);
                    let expected = (a.validates(r) && b.validates(r)) || a.validates(&explosive) || b.validates(&explosive);
                    let mut t = Tally::default();
                    t.check(ab.validates(r) == expected, || format!("{an}*{bn} on {r}"));
                    t
                })
                .reduce(Tally::default, Tally::merge);
            tally = tally.merge(t);
        }
    }
    let elapsed = start.elapsed();
    let mut out = tally.outcome("product validity checks");
    out.passed &= elapsed < PRODUCT_BUDGET;
    out.detail.push_str(&format!(", {elapsed:.2?} (budget {PRODUCT_BUDGET:?})"));
    out
}

/// Triples `(G, H, k)` with `G` and `H` empty or connected on at most 3 vertices and `k <= 2`.
pub fn roundtrip_triples() -> Vec<TriplePresentation> {
    let mut graphs = vec![Graph::empty()];
    graphs.extend(connected_graphs(3));
    let mut out = Vec::new();
    for g in &graphs {
        for h in &graphs {
            for k in 0..=2 {
                out.push(TriplePresentation::new(g.clone(), h.clone(), k));
            }
        }
    }
    out
}

fn random_frames(seed: u64) -> Vec<crate::frame::Frame> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..RANDOM_FRAMES).map(|_| random_frame(&mut rng, RANDOM_FRAME_POINTS)).collect()
}

fn duality_check(seed: u64) -> Outcome {
    let mut tally = Tally::default();
    for (name, m) in catalog() {
        tally.check(roundtrip_check(&m).unwrap_or(false), || format!("catalog {name}"));
    }
    let triples = roundtrip_triples();
    let t = triples
        .par_iter()
        .map(|t| {
            let ok = mu_triple(t).and_then(|m| roundtrip_check(&m)).unwrap_or(false);
            let mut tally = Tally::default();
            tally.check(ok, || format!("mu{t}"));
            tally
        })
        .reduce(Tally::default, Tally::merge);
    tally = tally.merge(t);
    for (i, p) in random_frames(seed).iter().enumerate() {
        let ok = complex_matrix(p).and_then(|m| dual_frame(&m)).map(|q| frames_isomorphic(p, &q)).unwrap_or(false);
        tally.check(ok, || format!("random frame #{i}"));
    }
    let mut out = tally.outcome("round trips");
    out.detail.push_str(&format!(" ({} triples, {RANDOM_FRAMES} frames, seed {seed})", triples.len()));
    out
}

fn leibniz_check(seed: u64) -> Outcome {
    let mut tally = Tally::default();
    for (i, p) in random_frames(seed).iter().enumerate() {
        let ok = complex_matrix(p)
            .and_then(|m| Ok((m.leibniz_reduct(), complex_matrix(&leibniz_subframe(p))?)))
            .map(|(a, b)| find_isomorphism(&a, &b).is_some())
            .unwrap_or(false);
        tally.check(ok, || format!("random frame #{i}"));
    }
    tally.outcome("frames")
}

fn identification_check() -> Result<Outcome> {
    let mut tally = Tally::default();
    let iso = |a: &FinMatrix, b: &FinMatrix| find_isomorphism(a, b).is_some();
    tally.check(iso(&mu_plus(&Graph::point())?, &etl4()), || "mu+(point) vs ETL4".into());
    tally.check(iso(&mu_plus(&Graph::loop_vertex())?, &k3()), || "mu+(loop) vs K3".into());
    tally.check(iso(&mu_minus(&Graph::point())?, &bd4()), || "mu-(point) vs BD4".into());
    for k in 1..=3 {
        let m = mu_triple(&TriplePresentation::new(Graph::empty(), Graph::empty(), k))?;
        tally.check(iso(&m, &power(&cl2(), k)?), || format!("mu(empty, empty, {k}) vs CL2^{k}"));
    }
    let g2 = mu_plus(&Graph::g2())?;
    tally.check(g2.size() == 8 && iso(&g2, &kminus8()), || "mu+(G2) vs Kminus8".into());
    Ok(tally.outcome("identifications"))
}

fn colorability_check() -> Result<Outcome> {
    let graphs = graphs_without_isolated(4);
    let tallies: Vec<Result<Tally>> = graphs
        .par_iter()
        .map(|g| {
            let ga = gamma(g)?;
            let mut t = Tally::default();
            for n in 1..=3 {
                let valid = ga.validates(&ecq_rule(n)?);
                t.check(valid == !oracles::n_colorable(g, n), || format!("{g}: chi({n}) |-"));
            }
            for n in 1..=2 {
                let valid = ga.validates(&etl_plus_rule(n)?);
                t.check(valid == !oracles::weakly_n_colorable(g, n), || format!("{g}: ETL+{n} rule"));
            }
            Ok(t)
        })
        .collect();
    let mut tally = Tally::default();
    for t in tallies {
        tally = tally.merge(t?);
    }
    let mut out = tally.outcome("gamma checks");
    out.detail.push_str(&format!(" over {} graphs", graphs.len()));
    Ok(out)
}

fn alpha_check() -> Result<Outcome> {
    let start = Instant::now();
    let graphs = graphs_without_isolated(4);
    let plus: Vec<FinMatrix> = graphs.iter().map(mu_plus).collect::<Result<_>>()?;
    let rules: Vec<RuleInstance> = graphs.iter().map(alpha_rule).collect::<Result<_>>()?;
    let pairs: Vec<(usize, usize)> = (0..graphs.len()).flat_map(|i| (0..graphs.len()).map(move |j| (i, j))).collect();
    let tally = pairs
        .par_iter()
        .map(|&(gi, hi)| {
            let (g, h) = (&graphs[gi], &graphs[hi]);
            let valid = plus[hi].validates(&rules[gi]);
            let no_hom = hom_search(h, g).is_none();
            let mut t = Tally::default();
            t.check(valid == no_hom, || format!("G={g} H={h}"));
            t.check(no_hom != oracles::homomorphic(h, g), || format!("hom search vs oracle for {h} -> {g}"));
            t
        })
        .reduce(Tally::default, Tally::merge);
    let elapsed = start.elapsed();
    let mut out = tally.outcome("pair checks");
    out.passed &= elapsed < ALPHA_BUDGET;
    out.detail.push_str(&format!(" over {} graphs, {elapsed:.2?} (budget {ALPHA_BUDGET:?})", graphs.len()));
    Ok(out)
}

fn separation_check() -> Result<Outcome> {
    let mut tally = Tally::default();
    let k4 = mu_plus(&Graph::complete(4))?;
    tally.check(k4.validates(&etl_plus_rule(2)?), || "mu+(K4) refutes the ETL+2 rule".into());
    tally.check(!k4.validates(&ecq_rule(4)?), || "mu+(K4) validates chi(4) |-".into());
    let km = kminus8();
    for n in 1..=4 {
        tally.check(km.validates(&etl_plus_rule(n)?), || format!("Kminus8 refutes the ETL+{n} rule"));
    }
    tally.check(!km.validates(&resolution()), || "Kminus8 validates resolution".into());
    Ok(tally.outcome("witness checks"))
}

fn free_algebra_check() -> Result<Outcome> {
    let gens = ["a".to_string(), "b".to_string()];
    let f = |s: &str| crate::formula::parse(s).expect("built-in formula parses");
    let first = free_dm_algebra(&gens, &[(f("b"), f("a")), (f("a"), f("~a | b"))])?;
    let second = free_dm_algebra(&gens, &[(f("a"), f("~a")), (f("b"), f("~b"))])?;
    let passed = first.size() == 10 && second.size() == 20;
    Ok(Outcome::new(passed, format!("sizes {} and {} (expected 10 and 20)", first.size(), second.size())))
}

fn kminus_check(pool: &[RuleInstance]) -> Outcome {
    let km = kminus8();
    pool.par_iter()
        .map(|r| {
            let phi = if r.conclusions.is_empty() { Formula::Bot } else { r.conclusion_disjunction() };
            let found = kminus_witness(&r.premises, &phi).is_some();
            let mut t = Tally::default();
            t.check(found == km.validates(r), || format!("{r}: witness {found}"));
            t
        })
        .reduce(Tally::default, Tally::merge)
        .outcome("clause rules")
}

fn multiple_conclusion_check(mc_pool: &[RuleInstance]) -> Outcome {
    let mut tally = Tally::default();
    for r in bd_mc_axioms() {
        tally.check(bd4().validates(&r), || format!("BD4 refutes {r}"));
    }
    let em = rule("|- p, ~p");
    let explosion = rule("p, ~p |-");
    let mixed = rule("p, ~p |- q, ~q");
    tally.check(lp3().validates(&em) && !k3().validates(&em), || "|- p, ~p".into());
    tally.check(k3().validates(&explosion) && !lp3().validates(&explosion), || "p, ~p |-".into());
    tally.check(k3().validates(&mixed) && lp3().validates(&mixed), || "p, ~p |- q, ~q".into());
    for (name, m) in catalog() {
        for r in mc_pool {
            let single = RuleInstance::single(r.premises.iter().cloned(), r.conclusion_disjunction());
            tally.check(m.validates(r) == m.validates(&single), || format!("{name}: {r}"));
        }
    }
    tally.outcome("mc checks")
}

/// Covering pairs among the probe logics, as drawn in the reference diagrams.
pub const EXPECTED_PROBE_EDGES: [(&str, &str); 9] = [
    ("BD", "KO"),
    ("BD", "ECQ"),
    ("KO", "LP"),
    ("KO", "K"),
    ("LP", "CL"),
    ("K", "CL"),
    ("ECQ", "ETL"),
    ("ETL", "ETL2"),
    ("ETL2", "K"),
];

fn probe_check(pool: &[RuleInstance]) -> Result<Outcome> {
    let res = probe_lattice(&PROBE_LOGICS, pool)?;
    let got: BTreeSet<(String, String)> = res.hasse.iter().cloned().collect();
    let expected: BTreeSet<(String, String)> =
        EXPECTED_PROBE_EDGES.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect();
    // The reflexive-transitive closure of the expected covers must equal the probed order.
    let n = PROBE_LOGICS.len();
    let pos = |s: &str| PROBE_LOGICS.iter().position(|x| *x == s).expect("probe logic");
    let mut closure = vec![vec![false; n]; n];
    for (i, row) in closure.iter_mut().enumerate() {
        row[i] = true;
    }
    for (a, b) in EXPECTED_PROBE_EDGES {
        closure[pos(a)][pos(b)] = true;
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if closure[i][k] && closure[k][j] {
                    closure[i][j] = true;
                }
            }
        }
    }
    let mut spurious = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if res.leq[i][j] != closure[i][j] {
                spurious.push(format!("{} <= {} is {}", PROBE_LOGICS[i], PROBE_LOGICS[j], res.leq[i][j]));
            }
        }
    }
    let passed = got == expected && spurious.is_empty();
    let detail = if passed {
        format!("{} covering edges over {} pool rules, order matches", got.len(), pool.len())
    } else {
        let missing: Vec<_> = expected.difference(&got).collect();
        let extra: Vec<_> = got.difference(&expected).collect();
        format!("missing {missing:?}, extra {extra:?}, order differences {spurious:?}")
    };
    Ok(Outcome::new(passed, detail))
}

/// Runs one criterion by number.
pub fn run_criterion(id: usize, seed: u64) -> Result<CriterionReport> {
    let name = CRITERIA
        .iter()
        .find(|(i, _)| *i == id)
        .map(|(_, n)| n.to_string())
        .ok_or_else(|| crate::Error::UnknownName(format!("criterion {id}")))?;
    let start = Instant::now();
    let outcome = match id {
        1 => table_check(),
        2 => explosive_parts_check(&rule_pool().single_conclusion())?,
        3 => product_check(&rule_pool().single_conclusion()),
        4 => duality_check(seed),
        5 => leibniz_check(seed),
        6 => identification_check()?,
        7 => colorability_check()?,
        8 => alpha_check()?,
        9 => separation_check()?,
        10 => free_algebra_check()?,
        11 => kminus_check(&rule_pool().clause),
        12 => multiple_conclusion_check(&rule_pool().mc),
        13 => probe_check(&rule_pool().single_conclusion())?,
        _ => unreachable!("criterion ids are checked above"),
    };
    Ok(CriterionReport {
        id,
        name,
        passed: outcome.passed,
        detail: outcome.detail,
        elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

/// Runs every criterion in order. Errors become failing reports.
pub fn run_all(seed: u64) -> Vec<CriterionReport> {
    CRITERIA
        .iter()
        .map(|&(id, name)| {
            run_criterion(id, seed).unwrap_or_else(|e| CriterionReport {
                id,
                name: name.to_string(),
                passed: false,
                detail: format!("error: {e}"),
                elapsed_ms: 0.0,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracles_on_small_graphs() {
        assert!(oracles::n_colorable(&Graph::complete(3), 3));
        assert!(!oracles::n_colorable(&Graph::complete(3), 2));
        assert!(!oracles::n_colorable(&Graph::loop_vertex(), 5));
        assert!(oracles::weakly_n_colorable(&Graph::complete(3), 2));
        assert!(!oracles::weakly_n_colorable(&Graph::complete(4), 2));
        assert!(!oracles::weakly_n_colorable(&Graph::g2(), 3));
        assert!(oracles::homomorphic(&Graph::cycle(5).unwrap(), &Graph::complete(3)));
        assert!(!oracles::homomorphic(&Graph::complete(3), &Graph::complete(2)));
    }

    #[test]
    fn cheap_criteria_pass() {
        for id in [1, 6, 9, 10] {
            let r = run_criterion(id, DEFAULT_SEED).unwrap();
            assert!(r.passed, "{r}");
        }
    }

    #[test]
    fn report_line_format() {
        let r = CriterionReport { id: 3, name: "x".into(), passed: false, detail: "d".into(), elapsed_ms: 1.0 };
        assert_eq!(r.to_string(), "FAIL  3 x (1.0 ms): d");
        assert!(run_criterion(14, DEFAULT_SEED).is_err());
    }
}
