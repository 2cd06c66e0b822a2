//! Named rules and logics, explosive parts, the K⁻ witness construction, and comparisons of
//! logics by finite matrices.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::Serialize;

use crate::bridge::{mu_plus, mu_triple, TriplePresentation};
use crate::error::{Error, Result};
use crate::formula::{
    chi, classical_status, clause_form, clauses_to_formula, fresh_atom, parse_rule, Clause, ClassicalStatus, Formula,
    NfMode, RuleInstance,
};
use crate::frame::{self, frames_isomorphic, immediate_quotients, leibniz_subframe, Frame};
use crate::graph::{all_graphs, is_weakly_n_colorable, Graph};
use crate::matrix::{bd4, cl2, etl4, find_isomorphism, k3, kminus8, lp3, product, FinMatrix};

// ---------------------------------------------------------------- named rules

fn rule(text: &str) -> RuleInstance {
    parse_rule(text).expect("built-in rule parses")
}

pub fn resolution() -> RuleInstance {
    rule("p | q, ~q | r |- p | r")
}

/// `(p & ~p) | q |- q`, an alternative axiom for K.
pub fn k_alt() -> RuleInstance {
    rule("(p & ~p) | q |- q")
}

pub fn excluded_middle() -> RuleInstance {
    rule("|- p | ~p")
}

pub fn ko_rule() -> RuleInstance {
    rule("(p & ~p) | q |- q | ~q")
}

pub fn disjunctive_syllogism() -> RuleInstance {
    rule("p, ~p | q |- q")
}

pub fn ecq() -> RuleInstance {
    rule("p, ~p |-")
}

/// `chi(n) |-`.
pub fn ecq_rule(n: usize) -> Result<RuleInstance> {
    Ok(RuleInstance::explosive([chi(n)?]))
}

/// `chi(n) | q, ~q | r |- r`.
pub fn etl_plus_rule(n: usize) -> Result<RuleInstance> {
    let (q, r) = (Formula::atom("q"), Formula::atom("r"));
    Ok(RuleInstance::single([Formula::or(chi(n)?, q.clone()), Formula::or(Formula::neg(q), r.clone())], r))
}

/// `chi(n) | q, ~q | r | ~r |- r | ~r`.
pub fn kominus_rule(n: usize) -> Result<RuleInstance> {
    let (q, r) = (Formula::atom("q"), Formula::atom("r"));
    let em_r = Formula::or(r.clone(), Formula::neg(r));
    Ok(RuleInstance::single(
        [Formula::or(chi(n)?, q.clone()), Formula::or(Formula::neg(q), em_r.clone())],
        em_r,
    ))
}

pub fn lp_cap_etl_rule() -> RuleInstance {
    rule("p, ~p | q | ~q |- q | ~q")
}

/// Every logic either lies below CL2×ETL4 or validates this rule; it fails in CL2×ETL4 itself.
pub fn etl_omega_split_rule() -> RuleInstance {
    rule("(p & ~p) | q | ~q, (q & ~q) | p | ~p |- p | ~p")
}

/// Largest index used when an infinite schema is cut off.
pub const SCHEMA_CUTOFF: usize = 4;

/// All named single-conclusion rules in a fixed order.
pub fn named_rules() -> Vec<(String, RuleInstance)> {
    let mut out: Vec<(String, RuleInstance)> = vec![
        ("resolution".into(), resolution()),
        ("k-alt".into(), k_alt()),
        ("excluded-middle".into(), excluded_middle()),
        ("ko".into(), ko_rule()),
        ("disjunctive-syllogism".into(), disjunctive_syllogism()),
        ("ecq".into(), ecq()),
        ("lp-cap-etl".into(), lp_cap_etl_rule()),
        ("etl-omega-split".into(), etl_omega_split_rule()),
    ];
    for n in 1..=SCHEMA_CUTOFF {
        out.push((format!("ecq-{n}"), ecq_rule(n).expect("n >= 1")));
        out.push((format!("etl-plus-{n}"), etl_plus_rule(n).expect("n >= 1")));
        out.push((format!("kominus-{n}"), kominus_rule(n).expect("n >= 1")));
    }
    out
}

pub fn named_rule(name: &str) -> Result<RuleInstance> {
    named_rules()
        .into_iter()
        .find(|(n, _)| n.eq_ignore_ascii_case(name))
        .map(|(_, r)| r)
        .ok_or_else(|| Error::UnknownName(name.to_string()))
}

/// Multiple-conclusion rules axiomatizing the four-valued logic.
pub fn bd_mc_axioms() -> Vec<RuleInstance> {
    [
        "p, q |- p & q",
        "p & q |- p",
        "p & q |- q",
        "p | q |- p, q",
        "p |- p | q",
        "q |- p | q",
        "~p, ~q |- ~(p | q)",
        "~(p | q) |- ~p",
        "~(p | q) |- ~q",
        "~(p & q) |- ~p, ~q",
        "~p |- ~(p & q)",
        "~q |- ~(p & q)",
        "p |- ~~p",
        "~~p |- p",
        "|- T",
        "F |-",
    ]
    .iter()
    .map(|t| rule(t))
    .collect()
}

// ---------------------------------------------------------------- registry

/// A logic given by finitely many matrices and the rules that axiomatize it relative to BD.
#[derive(Clone, Debug)]
pub struct NamedLogic {
    pub name: String,
    pub semantics: Vec<(String, FinMatrix)>,
    pub axioms: Vec<(String, RuleInstance)>,
}

impl NamedLogic {
    pub fn validates(&self, r: &RuleInstance) -> bool {
        self.semantics.iter().all(|(_, m)| m.validates(r))
    }

    /// The first semantics matrix refuting `r`, with its name.
    pub fn refuting_matrix(&self, r: &RuleInstance) -> Option<&(String, FinMatrix)> {
        self.semantics.iter().find(|(_, m)| !m.validates(r))
    }

    /// Axioms that fail in some semantics matrix; empty for a consistent entry.
    pub fn inconsistent_axioms(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        for (an, a) in &self.axioms {
            for (mn, m) in &self.semantics {
                if !m.validates(a) {
                    out.push((an.clone(), mn.clone()));
                }
            }
        }
        out
    }
}

pub const REGISTRY_NAMES: [&str; 16] = [
    "BD", "K", "LP", "KO", "ETL", "CL", "ECQ", "ECQomega", "ETLomega", "LPvECQ", "KOvECQ", "Kminus", "KOminus", "ECQn",
    "ETLn", "ETLplusn",
];

/// The graph used for the finite semantics of ECQ_n and ETL_n: C5 for n = 2, K_{n+1} otherwise.
pub fn non_colorable_witness(n: usize) -> Result<Graph> {
    match n {
        0 => Err(Error::Precondition("n must be at least 1".into())),
        2 => Graph::cycle(5),
        _ => Ok(Graph::complete(n + 1)),
    }
}

/// Graphs used for the finite semantics of ETL⁺_n: those without isolated vertices on at most 3
/// vertices that are not weakly n-colorable, and K_{n+2}.
pub fn etl_plus_graphs(n: usize) -> Result<Vec<Graph>> {
    if n == 0 {
        return Err(Error::Precondition("n must be at least 1".into()));
    }
    let mut out: Vec<Graph> = (1..=3)
        .flat_map(all_graphs)
        .filter(|g| !g.has_isolated_vertex() && !is_weakly_n_colorable(g, n))
        .collect();
    out.push(Graph::complete(n + 2));
    Ok(out)
}

fn named(name: &str, m: FinMatrix) -> (String, FinMatrix) {
    (name.to_string(), m)
}

fn prod(a: &FinMatrix, b: &FinMatrix) -> FinMatrix {
    product(&[a.clone(), b.clone()]).expect("small product")
}

fn axioms(list: Vec<(&str, RuleInstance)>) -> Vec<(String, RuleInstance)> {
    list.into_iter().map(|(n, r)| (n.to_string(), r)).collect()
}

fn indexed(prefix: &str, range: std::ops::RangeInclusive<usize>, f: fn(usize) -> Result<RuleInstance>) -> Vec<(String, RuleInstance)> {
    range.map(|n| (format!("{prefix}-{n}"), f(n).expect("n >= 1"))).collect()
}

/// Splits `ECQ3` into `("ECQ", Some(3))`; names without a trailing index give `None`.
fn split_index(name: &str) -> (String, Option<usize>) {
    let digits = name.chars().rev().take_while(|c| c.is_ascii_digit()).count();
    if digits == 0 || digits == name.len() {
        return (name.to_string(), None);
    }
    let (base, num) = name.split_at(name.len() - digits);
    (base.to_string(), num.parse().ok())
}

/// Looks up a logic by case-insensitive name. Indexed families take `n` in `1..=4`, e.g. `ETL2`.
pub fn registry(name: &str) -> Result<NamedLogic> {
    let (base, index) = split_index(name);
    let key = base.to_ascii_lowercase();
    let unknown = || Error::UnknownName(name.to_string());
    let make = |semantics: Vec<(String, FinMatrix)>, ax: Vec<(String, RuleInstance)>| NamedLogic {
        name: name.to_string(),
        semantics,
        axioms: ax,
    };
    if let Some(n) = index {
        if !(1..=SCHEMA_CUTOFF).contains(&n) {
            return Err(unknown());
        }
        return match key.as_str() {
            "ecq" if n == 1 => registry("ECQ").map(|l| NamedLogic { name: name.to_string(), ..l }),
            "etl" if n == 1 => registry("ETL").map(|l| NamedLogic { name: name.to_string(), ..l }),
            "ecq" => {
                let g = non_colorable_witness(n)?;
                let m = prod(&mu_plus(&g)?, &bd4());
                Ok(make(vec![(format!("mu+({g})*BD4"), m)], vec![(format!("ecq-{n}"), ecq_rule(n)?)]))
            }
            "etl" => {
                let g = non_colorable_witness(n)?;
                let m = prod(&mu_plus(&g)?, &etl4());
                Ok(make(
                    vec![(format!("mu+({g})*ETL4"), m)],
                    vec![("disjunctive-syllogism".into(), disjunctive_syllogism()), (format!("ecq-{n}"), ecq_rule(n)?)],
                ))
            }
            "etlplus" => {
                let sem = etl_plus_graphs(n)?
                    .into_iter()
                    .map(|g| Ok((format!("mu+({g})"), mu_plus(&g)?)))
                    .collect::<Result<Vec<_>>>()?;
                Ok(make(sem, vec![(format!("etl-plus-{n}"), etl_plus_rule(n)?)]))
            }
            _ => Err(unknown()),
        };
    }
    let l = match key.as_str() {
        "bd" => make(vec![named("BD4", bd4())], vec![]),
        "k" => make(vec![named("K3", k3())], axioms(vec![("resolution", resolution()), ("k-alt", k_alt())])),
        "lp" => make(vec![named("LP3", lp3())], axioms(vec![("excluded-middle", excluded_middle())])),
        "ko" => make(vec![named("K3", k3()), named("LP3", lp3())], axioms(vec![("ko", ko_rule())])),
        "etl" => make(vec![named("ETL4", etl4())], axioms(vec![("disjunctive-syllogism", disjunctive_syllogism())])),
        "cl" => make(
            vec![named("CL2", cl2())],
            axioms(vec![("disjunctive-syllogism", disjunctive_syllogism()), ("excluded-middle", excluded_middle())]),
        ),
        "ecq" => make(vec![named("ETL4*BD4", prod(&etl4(), &bd4()))], axioms(vec![("ecq", ecq())])),
        "ecqomega" => make(vec![named("CL2*BD4", prod(&cl2(), &bd4()))], indexed("ecq", 1..=SCHEMA_CUTOFF, ecq_rule)),
        "etlomega" => {
            let mut ax = axioms(vec![("disjunctive-syllogism", disjunctive_syllogism())]);
            ax.extend(indexed("ecq", 1..=SCHEMA_CUTOFF, ecq_rule));
            make(vec![named("CL2*ETL4", prod(&cl2(), &etl4()))], ax)
        }
        "lpvecq" => make(
            vec![named("CL2*LP3", prod(&cl2(), &lp3()))],
            axioms(vec![("excluded-middle", excluded_middle()), ("ecq", ecq())]),
        ),
        "kovecq" => make(
            vec![named("CL2*LP3", prod(&cl2(), &lp3())), named("K3", k3())],
            axioms(vec![("ko", ko_rule()), ("ecq", ecq())]),
        ),
        "kminus" => make(vec![named("Kminus8", kminus8())], indexed("etl-plus", 1..=SCHEMA_CUTOFF, etl_plus_rule)),
        "kominus" => make(
            vec![named("LP3", lp3()), named("Kminus8", kminus8())],
            indexed("kominus", 1..=SCHEMA_CUTOFF, kominus_rule),
        ),
        _ => return Err(unknown()),
    };
    Ok(l)
}

/// Every registry name with indexed families expanded over `1..=4`.
pub fn registry_names_expanded() -> Vec<String> {
    let mut out = Vec::new();
    for name in REGISTRY_NAMES {
        if let Some(base) = name.strip_suffix('n') {
            out.extend((1..=SCHEMA_CUTOFF).map(|n| format!("{base}{n}")));
        } else {
            out.push(name.to_string());
        }
    }
    out
}

// ---------------------------------------------------------------- explosive parts

/// Whether no valuation on a semantics matrix designates all of `gamma`, tested as `Γ ⊢ x` for a
/// fresh atom `x`.
pub fn is_antitheorem_of(l: &NamedLogic, gamma: &BTreeSet<Formula>) -> bool {
    let used: BTreeSet<String> = gamma.iter().flat_map(Formula::atoms).collect();
    let x = Formula::atom(fresh_atom(&used));
    let r = RuleInstance::single(gamma.iter().cloned(), x);
    l.validates(&r)
}

/// Validity in the explosive part of `upper` relative to `base`.
pub fn exp_validates(upper: &NamedLogic, base: &NamedLogic, r: &RuleInstance) -> bool {
    base.validates(r) || is_antitheorem_of(upper, &r.premises)
}

// ---------------------------------------------------------------- K⁻ witnesses

/// A pair `(ψ, χ)` with `Γ ⊢ χ ∨ ψ` and `Γ ⊢ ~ψ ∨ φ` in BD and `χ` a classical contradiction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KminusWitness {
    pub psi: Formula,
    pub chi: Formula,
}

fn bd_entails(premise: &Formula, conclusion: &Formula) -> bool {
    bd4().validates(&RuleInstance::single([premise.clone()], conclusion.clone()))
}

fn is_contradiction(f: &Formula) -> bool {
    classical_status(f) == ClassicalStatus::Contradiction
}

fn dnf_formula(cs: &[Clause]) -> Formula {
    clauses_to_formula(cs, NfMode::Dnf)
}

/// Direct witnesses for a premise given as a disjunction of conjunctive clauses and a
/// disjunctive clause `phi`: the premise itself, or its contradictory disjuncts as `χ`.
fn witness_base(disjuncts: &[Clause], phi: &Formula) -> Option<KminusWitness> {
    let gamma = dnf_formula(disjuncts);
    let check = |w: KminusWitness| {
        (bd_entails(&gamma, &Formula::or(w.chi.clone(), w.psi.clone()))
            && bd_entails(&gamma, &Formula::or(Formula::neg(w.psi.clone()), phi.clone()))
            && is_contradiction(&w.chi))
        .then_some(w)
    };
    if is_contradiction(&gamma) {
        if let Some(w) = check(KminusWitness { psi: Formula::neg(gamma.clone()), chi: gamma.clone() }) {
            return Some(w);
        }
    }
    if let Some(w) = check(KminusWitness { psi: gamma.clone(), chi: Formula::Bot }) {
        return Some(w);
    }
    let (contra, rest): (Vec<Clause>, Vec<Clause>) =
        disjuncts.iter().cloned().partition(|c| is_contradiction(&dnf_formula(std::slice::from_ref(c))));
    if contra.is_empty() || rest.is_empty() {
        return None;
    }
    check(KminusWitness { psi: dnf_formula(&rest), chi: dnf_formula(&contra) })
}

fn disj_dropping_bot(items: impl IntoIterator<Item = Formula>) -> Formula {
    Formula::disj(items.into_iter().filter(|f| *f != Formula::Bot))
}

fn witness_for_clause(disjuncts: &[Clause], phi: &Formula) -> Option<KminusWitness> {
    if let Some(w) = witness_base(disjuncts, phi) {
        return Some(w);
    }
    if disjuncts.len() <= 2 {
        return None;
    }
    // Split into three non-empty groups and recurse on the pairwise unions.
    let third = disjuncts.len() / 3;
    let (g1, rest) = disjuncts.split_at(third.max(1));
    let (g2, g3) = rest.split_at(((disjuncts.len() - g1.len()) / 2).max(1));
    let union = |a: &[Clause], b: &[Clause]| a.iter().chain(b).cloned().collect::<Vec<_>>();
    let w1 = witness_for_clause(&union(g2, g3), phi)?;
    let w2 = witness_for_clause(&union(g3, g1), phi)?;
    let w3 = witness_for_clause(&union(g1, g2), phi)?;
    let psi = Formula::conj([
        Formula::or(w1.psi.clone(), w2.psi.clone()),
        Formula::or(w2.psi.clone(), w3.psi.clone()),
        Formula::or(w3.psi, w1.psi),
    ]);
    Some(KminusWitness { psi, chi: disj_dropping_bot([w1.chi, w2.chi, w3.chi]) })
}

/// Builds a witness by recursion on the DNF of `⋀Γ` and the CNF of `φ`, then verifies it in BD4.
/// Use `Formula::Bot` as `φ` for explosive rules.
pub fn kminus_witness(gamma: &BTreeSet<Formula>, phi: &Formula) -> Option<KminusWitness> {
    let premise = Formula::conj(gamma.iter().cloned());
    let disjuncts = clause_form(&premise, NfMode::Dnf);
    let mut parts = Vec::new();
    for clause in clause_form(phi, NfMode::Cnf) {
        let clause_formula = clauses_to_formula(&[clause], NfMode::Cnf);
        parts.push(witness_for_clause(&disjuncts, &clause_formula)?);
    }
    let w = KminusWitness {
        psi: Formula::conj(parts.iter().map(|w| w.psi.clone())),
        chi: disj_dropping_bot(parts.into_iter().map(|w| w.chi)),
    };
    let ok = bd_entails(&premise, &Formula::or(w.chi.clone(), w.psi.clone()))
        && bd_entails(&premise, &Formula::or(Formula::neg(w.psi.clone()), phi.clone()))
        && is_contradiction(&w.chi);
    ok.then_some(w)
}

// ---------------------------------------------------------------- comparing logics

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum LogLeq {
    Yes,
    NotFoundUpToBound,
}

/// Multisets of `k` indices drawn from `0..n`, in lexicographic order.
fn multisets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(n: usize, k: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(n, k, i, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, k, 0, &mut Vec::new(), &mut out);
    out
}

/// Whether some Leibniz subframe of an iterated immediate quotient of `start` is isomorphic to `target`.
fn reaches_dually(start: &Frame, target: &Frame) -> bool {
    let first = leibniz_subframe(start);
    let mut seen: Vec<Frame> = vec![first.clone()];
    let mut frontier = vec![first];
    while let Some(f) = frontier.pop() {
        if f.size() == target.size() && f.designated_mask().count_ones() == target.designated_mask().count_ones() && frames_isomorphic(&f, target) {
            return true;
        }
        for q in immediate_quotients(&f) {
            let l = leibniz_subframe(&q);
            if l.size() < target.size() || seen.iter().any(|s| frames_isomorphic(s, &l)) {
                continue;
            }
            seen.push(l.clone());
            frontier.push(l);
        }
    }
    false
}

fn reaches_directly(start: &FinMatrix, target: &FinMatrix) -> bool {
    start.submatrices().any(|s| {
        let r = s.leibniz_reduct();
        r.size() == target.size() && find_isomorphism(&r, target).is_some()
    })
}

/// Whether the Leibniz reduct of `b` is the Leibniz reduct of a submatrix of a product of at
/// most `max_power` factors from `a`. `max_power` defaults to the size of `b`.
pub fn log_leq(a: &[FinMatrix], b: &FinMatrix, max_power: Option<usize>) -> Result<LogLeq> {
    if a.is_empty() {
        return Err(Error::Precondition("log_leq needs at least one matrix".into()));
    }
    let max_power = max_power.unwrap_or(b.size());
    if max_power == 0 {
        return Err(Error::Precondition("max_power must be at least 1".into()));
    }
    let target = b.leibniz_reduct();
    let duals: Option<Vec<Frame>> = a.iter().map(|m| frame::dual_frame(m).ok()).collect();
    let target_dual = frame::dual_frame(&target).ok();
    for k in 1..=max_power {
        for combo in multisets(a.len(), k) {
            let found = match (&duals, &target_dual) {
                (Some(ds), Some(t)) => {
                    let parts: Vec<Frame> = combo.iter().map(|&i| ds[i].clone()).collect();
                    let start = frame::disjoint_union(&parts)?;
                    reaches_dually(&start, t)
                }
                _ => {
                    let factors: Vec<FinMatrix> = combo.iter().map(|&i| a[i].clone()).collect();
                    reaches_directly(&product(&factors)?, &target)
                }
            };
            if found {
                return Ok(LogLeq::Yes);
            }
        }
    }
    Ok(LogLeq::NotFoundUpToBound)
}

/// The first pool entry validating every rule in `hold` and refuting every rule in `fail`.
pub fn separation_search<'a>(
    hold: &[RuleInstance],
    fail: &[RuleInstance],
    pool: &'a [(String, FinMatrix)],
) -> Option<&'a (String, FinMatrix)> {
    pool.par_iter()
        .find_first(|(_, m)| hold.iter().all(|r| m.validates(r)) && fail.iter().all(|r| !m.validates(r)))
}

/// Pool of `μ₊(G)` for all graphs with `1..=max_vertices` vertices, in order of size.
pub fn plus_matrix_pool(max_vertices: usize) -> Result<Vec<(String, FinMatrix)>> {
    (1..=max_vertices)
        .flat_map(all_graphs)
        .map(|g| Ok((format!("mu+({g})"), mu_plus(&g)?)))
        .collect()
}

/// Pool of `μ(G, H, k)` for single components; used by the CLI `separate --pool triples`.
pub fn triple_matrix_pool(max_vertices: usize, max_k: usize) -> Result<Vec<(String, FinMatrix)>> {
    let mut graphs = vec![Graph::empty()];
    graphs.extend((1..=max_vertices).flat_map(all_graphs));
    let mut out = Vec::new();
    for g in &graphs {
        for h in &graphs {
            for k in 0..=max_k {
                if g.is_empty() && h.is_empty() && k == 0 {
                    continue;
                }
                let t = TriplePresentation::new(g.clone(), h.clone(), k);
                out.push((format!("mu{t}"), mu_triple(&t)?));
            }
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------- lattice probe

/// Logics compared by [`probe_lattice`] by default.
pub const PROBE_LOGICS: [&str; 8] = ["BD", "KO", "LP", "K", "CL", "ECQ", "ETL", "ETL2"];

#[derive(Clone, Debug, Serialize)]
pub struct ProbeResult {
    pub logics: Vec<String>,
    /// `leq[i][j]` iff every pool rule valid in logic `i` is valid in logic `j`.
    pub leq: Vec<Vec<bool>>,
    /// Covering pairs `(lower, upper)` of the induced order, with equivalent logics merged.
    pub hasse: Vec<(String, String)>,
    /// For each non-inclusion `(i, j)`, a pool rule valid in `i` and not in `j`.
    pub separators: BTreeMap<String, String>,
}

impl ProbeResult {
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph logics {\n  rankdir=BT;\n");
        for l in &self.logics {
            out.push_str(&format!("  \"{l}\";\n"));
        }
        for (a, b) in &self.hasse {
            out.push_str(&format!("  \"{a}\" -> \"{b}\";\n"));
        }
        out.push_str("}\n");
        out
    }
}

/// Compares logics by the pool rules they validate and reports the Hasse diagram.
pub fn probe_lattice(names: &[&str], pool: &[RuleInstance]) -> Result<ProbeResult> {
    let logics: Vec<NamedLogic> = names.iter().map(|n| registry(n)).collect::<Result<_>>()?;
    let valid: Vec<Vec<bool>> = logics
        .iter()
        .map(|l| pool.par_iter().map(|r| l.validates(r)).collect())
        .collect();
    let n = logics.len();
    let mut leq = vec![vec![false; n]; n];
    let mut separators = BTreeMap::new();
    for i in 0..n {
        for j in 0..n {
            match (0..pool.len()).find(|&k| valid[i][k] && !valid[j][k]) {
                None => leq[i][j] = true,
                Some(k) => {
                    separators.insert(format!("{} !<= {}", names[i], names[j]), pool[k].to_string());
                }
            }
        }
    }
    // Merge equivalent logics, keeping the first name, then take covers.
    let rep: Vec<usize> = (0..n).map(|i| (0..n).find(|&j| leq[i][j] && leq[j][i]).expect("reflexive")).collect();
    let classes: Vec<usize> = (0..n).filter(|&i| rep[i] == i).collect();
    let mut hasse = Vec::new();
    for &a in &classes {
        for &b in &classes {
            if a == b || !leq[a][b] {
                continue;
            }
            let covered = classes.iter().any(|&c| c != a && c != b && leq[a][c] && leq[c][b] && !leq[c][a] && !leq[b][c]);
            if !covered {
                hasse.push((names[a].to_string(), names[b].to_string()));
            }
        }
    }
    Ok(ProbeResult { logics: names.iter().map(|s| s.to_string()).collect(), leq, hasse, separators })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::parse;

    fn f(s: &str) -> Formula {
        parse(s).unwrap()
    }

    fn set(items: &[&str]) -> BTreeSet<Formula> {
        items.iter().map(|s| f(s)).collect()
    }

    #[test]
    fn registry_lookup() {
        let ecq = registry("ECQ").unwrap();
        assert_eq!(ecq.semantics.len(), 1);
        assert_eq!(ecq.semantics[0].1, product(&[etl4(), bd4()]).unwrap());
        let kov = registry("kovecq").unwrap();
        assert_eq!(kov.semantics[0].1, product(&[cl2(), lp3()]).unwrap());
        assert_eq!(kov.semantics[1].1, k3());
        let km = registry("Kminus").unwrap();
        assert!(find_isomorphism(&km.semantics[0].1, &mu_plus(&Graph::g2()).unwrap()).is_some());
        assert!(registry("nonsense").is_err());
        assert!(registry("ECQ5").is_err());
        assert_eq!(registry("ECQ1").unwrap().semantics[0].1, ecq.semantics[0].1);
    }

    #[test]
    fn registry_axioms_are_sound() {
        for name in registry_names_expanded() {
            let l = registry(&name).unwrap();
            assert!(l.inconsistent_axioms().is_empty(), "{name}: {:?}", l.inconsistent_axioms());
        }
    }

    #[test]
    fn antitheorems() {
        assert!(is_antitheorem_of(&registry("ETL").unwrap(), &set(&["p", "~p"])));
        assert!(!is_antitheorem_of(&registry("LP").unwrap(), &set(&["p", "~p"])));
        assert!(is_antitheorem_of(&registry("CL").unwrap(), &[chi(3).unwrap()].into_iter().collect()));
        assert!(!is_antitheorem_of(&registry("BD").unwrap(), &set(&["p & ~p"])));
    }

    #[test]
    fn explosive_parts() {
        let (etl, bd) = (registry("ETL").unwrap(), registry("BD").unwrap());
        assert!(exp_validates(&etl, &bd, &parse_rule("p, ~p |- q").unwrap()));
        assert!(!exp_validates(&etl, &bd, &disjunctive_syllogism()));
    }

    #[test]
    fn kminus_examples() {
        let g = [Formula::or(chi(1).unwrap(), f("q")), f("~q | r")].into_iter().collect();
        assert!(kminus_witness(&g, &f("r")).is_some());
        assert!(kminus8().validates(&RuleInstance::single(g.clone(), f("r"))));
        let g = set(&["p", "~p | q"]);
        assert!(kminus_witness(&g, &f("q")).is_some());
        let g = set(&["p | q", "~q | r"]);
        assert!(kminus_witness(&g, &f("p | r")).is_none());
        assert!(!kminus8().validates(&RuleInstance::single(g, f("p | r"))));
        for s in ["p", "p & ~q", "(p | q) & ~r", "p | (q & ~q)"] {
            assert!(kminus_witness(&set(&[s]), &f(s)).is_some(), "{s}");
        }
    }

    #[test]
    fn kminus_witness_matches_matrix_on_small_pool() {
        let lits = ["p", "~p", "q", "~q", "r", "~r"];
        let mut clauses: Vec<Formula> = lits.iter().map(|s| f(s)).collect();
        for (a, b) in [("p", "q"), ("~p", "q"), ("p", "~q"), ("~p", "~q"), ("q", "r"), ("~q", "r"), ("p & ~p", "q")] {
            clauses.push(f(&format!("({a}) | ({b})")));
        }
        for i in 0..clauses.len() {
            for j in i..clauses.len() {
                let g: BTreeSet<Formula> = [clauses[i].clone(), clauses[j].clone()].into_iter().collect();
                for phi in clauses.iter().chain([&Formula::Bot]) {
                    let valid = kminus8().validates(&RuleInstance::single(g.clone(), phi.clone()));
                    assert_eq!(kminus_witness(&g, phi).is_some(), valid, "{g:?} |- {phi}");
                }
            }
        }
    }

    #[test]
    fn log_leq_examples() {
        assert_eq!(log_leq(&[bd4()], &k3(), Some(1)).unwrap(), LogLeq::Yes);
        assert_eq!(log_leq(&[kminus8()], &k3(), Some(1)).unwrap(), LogLeq::Yes);
        assert_eq!(log_leq(&[k3()], &lp3(), Some(3)).unwrap(), LogLeq::NotFoundUpToBound);
        assert_eq!(log_leq(&[bd4()], &etl4(), None).unwrap(), LogLeq::Yes);
        assert_eq!(log_leq(&[etl4()], &bd4(), Some(2)).unwrap(), LogLeq::NotFoundUpToBound);
        assert_eq!(log_leq(&[cl2()], &product(&[cl2(), cl2()]).unwrap(), Some(2)).unwrap(), LogLeq::Yes);
    }

    #[test]
    fn log_leq_direct_route_agrees() {
        // Both routes on inputs where both apply.
        let pairs = [(bd4(), k3()), (kminus8(), k3()), (k3(), lp3()), (bd4(), cl2()), (lp3(), k3()), (etl4(), k3())];
        for (a, b) in pairs {
            let dual = log_leq(&[a.clone()], &b, Some(1)).unwrap() == LogLeq::Yes;
            let direct = reaches_directly(&a, &b.leibniz_reduct());
            assert_eq!(dual, direct, "{} / {}", a.render(), b.render());
        }
    }

    #[test]
    fn separation_examples() {
        let pool = plus_matrix_pool(4).unwrap();
        let found = separation_search(&[etl_plus_rule(2).unwrap()], &[ecq_rule(4).unwrap()], &pool).unwrap();
        assert!(find_isomorphism(&found.1, &mu_plus(&Graph::complete(4)).unwrap()).is_some());
        let found = separation_search(&[disjunctive_syllogism()], &[ecq_rule(2).unwrap()], &pool).unwrap();
        assert!(found.1.validates(&disjunctive_syllogism()));
        let cat: Vec<(String, FinMatrix)> = crate::matrix::catalog().into_iter().map(|(n, m)| (n.to_string(), m)).collect();
        let found = separation_search(&[excluded_middle()], &[ecq()], &cat).unwrap();
        assert_eq!(found.0, "LP3");
    }

    #[test]
    fn named_rule_facts() {
        let lp_etl = lp_cap_etl_rule();
        assert!(lp3().validates(&lp_etl) && etl4().validates(&lp_etl));
        assert!(!product(&[cl2(), etl4()]).unwrap().validates(&etl_omega_split_rule()));
        assert!(lp3().validates(&etl_omega_split_rule()) && k3().validates(&etl_omega_split_rule()));
        assert!(k3().validates(&ko_rule()) && lp3().validates(&ko_rule()));
        for n in 1..=4 {
            assert!(kminus8().validates(&etl_plus_rule(n).unwrap()));
        }
        assert!(!kminus8().validates(&resolution()));
        for r in bd_mc_axioms() {
            assert!(bd4().validates(&r), "{r}");
        }
    }

    /// Conjunction of excluded middles over the atoms of `r`.
    fn all_excluded_middles(r: &RuleInstance) -> Vec<Formula> {
        r.atoms().into_iter().map(|a| Formula::or(Formula::atom(&a), Formula::neg(Formula::atom(a)))).collect()
    }

    #[test]
    fn consequence_reductions() {
        let mut pool = Vec::new();
        let lits = ["p", "~p", "q", "~q"];
        for a in lits {
            for b in lits {
                pool.push(parse_rule(&format!("{a} |- {b}")).unwrap());
                pool.push(parse_rule(&format!("{a} | {b} |- {b}")).unwrap());
                pool.push(parse_rule(&format!("{a}, {b} |- q | ~q")).unwrap());
            }
        }
        pool.push(disjunctive_syllogism());
        pool.push(excluded_middle());
        pool.push(ecq());
        for r in &pool {
            // LP: add tautologies to the premises.
            let taut = all_excluded_middles(r);
            let lp_reduced = (0..(1u32 << taut.len())).any(|mask| {
                let extra = taut.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, t)| t.clone());
                bd4().validates(&RuleInstance::new(r.premises.iter().cloned().chain(extra), r.conclusions.iter().cloned()))
            });
            assert_eq!(lp3().validates(r), lp_reduced, "LP {r}");
            // K: weaken the conclusion by a contradiction.
            let contra = Formula::disj(r.atoms().into_iter().map(|a| Formula::and(Formula::atom(&a), Formula::neg(Formula::atom(a)))));
            let k_reduced = bd4().validates(&RuleInstance::single(r.premises.iter().cloned(), Formula::or(contra, r.conclusion_disjunction())));
            assert_eq!(k3().validates(r), k_reduced, "K {r}");
        }
    }

    #[test]
    fn probe_small() {
        let pool: Vec<RuleInstance> = named_rules().into_iter().map(|(_, r)| r).collect();
        let res = probe_lattice(&["BD", "LP", "K", "CL"], &pool).unwrap();
        let edges: BTreeSet<(String, String)> = res.hasse.iter().cloned().collect();
        let expected: BTreeSet<(String, String)> =
            [("BD", "LP"), ("BD", "K"), ("LP", "CL"), ("K", "CL")].iter().map(|(a, b)| (a.to_string(), b.to_string())).collect();
        assert_eq!(edges, expected);
        assert!(res.to_dot().contains("\"BD\" -> \"LP\""));
    }

    #[test]
    fn split_index_names() {
        assert_eq!(split_index("ECQ3"), ("ECQ".to_string(), Some(3)));
        assert_eq!(split_index("ETLplus2"), ("ETLplus".to_string(), Some(2)));
        assert_eq!(split_index("BD"), ("BD".to_string(), None));
    }
}
