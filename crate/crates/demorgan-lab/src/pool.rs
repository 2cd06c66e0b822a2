//! The fixed rule pool used by probes and acceptance checks.
//!
//! The pool lives in `data/rule_pool.txt` so that probe results are reproducible; [`generate`]
//! rebuilds the same text and a unit test keeps the two in sync.

use std::collections::{BTreeMap, BTreeSet};

use crate::formula::{parse_rule, Formula, RuleInstance, Substitution};
use crate::logics::named_rules;

pub const POOL_TEXT: &str = include_str!("../data/rule_pool.txt");

const POOL_ATOMS: [&str; 3] = ["p", "q", "r"];

/// A parsed pool file.
#[derive(Clone, Debug, Default)]
pub struct RulePool {
    /// Rules with at most two clause premises and a clause or empty conclusion.
    pub clause: Vec<RuleInstance>,
    /// Rules with at most two literal premises and two literal conclusions.
    pub mc: Vec<RuleInstance>,
    pub named: Vec<(String, RuleInstance)>,
}

impl RulePool {
    /// Clause rules followed by the named rules.
    pub fn single_conclusion(&self) -> Vec<RuleInstance> {
        self.clause.iter().cloned().chain(self.named.iter().map(|(_, r)| r.clone())).collect()
    }

    pub fn len(&self) -> usize {
        self.clause.len() + self.mc.len() + self.named.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn literals() -> Vec<Formula> {
    POOL_ATOMS
        .iter()
        .flat_map(|a| [Formula::atom(*a), Formula::neg(Formula::atom(*a))])
        .collect()
}

/// Disjunctions of one or two literals on distinct atoms.
fn clauses() -> Vec<Formula> {
    let lits = literals();
    let mut out = lits.clone();
    for i in 0..lits.len() {
        for j in (i + 1)..lits.len() {
            if lits[i].atoms() != lits[j].atoms() {
                out.push(Formula::or(lits[i].clone(), lits[j].clone()));
            }
        }
    }
    out
}

fn atom_permutations() -> Vec<Substitution> {
    let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    perms
        .iter()
        .map(|perm| {
            let map: BTreeMap<String, String> =
                (0..3).map(|i| (POOL_ATOMS[i].to_string(), POOL_ATOMS[perm[i]].to_string())).collect();
            Substitution::renaming(&map)
        })
        .collect()
}

/// Adds the representative of `r` with the smallest printed form, unless its class was seen.
fn push_canonical(r: RuleInstance, perms: &[Substitution], seen: &mut BTreeSet<String>, out: &mut Vec<RuleInstance>) {
    let best = perms
        .iter()
        .map(|s| r.substitute(s))
        .min_by_key(|x| x.to_string())
        .expect("identity permutation present");
    if seen.insert(best.to_string()) {
        out.push(best);
    }
}

/// Premise sets with up to two distinct members of `items`.
fn premise_sets(items: &[Formula]) -> Vec<Vec<Formula>> {
    let mut out = vec![Vec::new()];
    out.extend(items.iter().map(|x| vec![x.clone()]));
    for i in 0..items.len() {
        for j in (i + 1)..items.len() {
            out.push(vec![items[i].clone(), items[j].clone()]);
        }
    }
    out
}

pub fn generate_clause_rules() -> Vec<RuleInstance> {
    let perms = atom_permutations();
    let cs = clauses();
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for premises in premise_sets(&cs) {
        for conclusion in cs.iter().map(Some).chain([None]) {
            let r = RuleInstance::new(premises.iter().cloned(), conclusion.cloned());
            push_canonical(r, &perms, &mut seen, &mut out);
        }
    }
    out
}

pub fn generate_mc_rules() -> Vec<RuleInstance> {
    let perms = atom_permutations();
    let lits = literals();
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for premises in premise_sets(&lits) {
        for i in 0..lits.len() {
            for j in (i + 1)..lits.len() {
                let r = RuleInstance::new(premises.iter().cloned(), [lits[i].clone(), lits[j].clone()]);
                push_canonical(r, &perms, &mut seen, &mut out);
            }
        }
    }
    out
}

/// The pool file contents.
pub fn generate() -> String {
    let mut s = String::from("# Rule pool; regenerate with REGENERATE_RULE_POOL=1 cargo test pool\n");
    s.push_str("[clause]\n");
    for r in generate_clause_rules() {
        s.push_str(&format!("{r}\n"));
    }
    s.push_str("[mc]\n");
    for r in generate_mc_rules() {
        s.push_str(&format!("{r}\n"));
    }
    s.push_str("[named]\n");
    for (name, r) in named_rules() {
        s.push_str(&format!("{name}: {r}\n"));
    }
    s
}

/// Parses pool text in the `[clause]` / `[mc]` / `[named]` section format.
pub fn parse_pool(text: &str) -> crate::Result<RulePool> {
    let mut pool = RulePool::default();
    let mut section = "";
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            section = match name {
                "clause" | "mc" | "named" => name,
                _ => return Err(crate::Error::Input(format!("pool line {}: unknown section `{name}`", lineno + 1))),
            };
            continue;
        }
        let err = |e: crate::formula::ParseError| crate::Error::Input(format!("pool line {}: {e}", lineno + 1));
        match section {
            "clause" => pool.clause.push(parse_rule(line).map_err(err)?),
            "mc" => pool.mc.push(parse_rule(line).map_err(err)?),
            "named" => {
                let (name, rule) = line
                    .split_once(':')
                    .ok_or_else(|| crate::Error::Input(format!("pool line {}: expected `name: rule`", lineno + 1)))?;
                pool.named.push((name.trim().to_string(), parse_rule(rule).map_err(err)?));
            }
            _ => return Err(crate::Error::Input(format!("pool line {}: rule outside a section", lineno + 1))),
        }
    }
    Ok(pool)
}

/// The versioned pool shipped with the crate.
pub fn rule_pool() -> RulePool {
    parse_pool(POOL_TEXT).expect("shipped pool parses")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_pool_matches_generator() {
        let generated = generate();
        if std::env::var("REGENERATE_RULE_POOL").as_deref() == Ok("1") {
            let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/rule_pool.txt");
            std::fs::write(path, &generated).expect("write pool file");
            return;
        }
        assert!(POOL_TEXT == generated, "data/rule_pool.txt is stale; rerun with REGENERATE_RULE_POOL=1");
    }

    #[test]
    fn pool_shape() {
        assert_eq!(clauses().len(), 18);
        let pool = rule_pool();
        assert_eq!(pool.named.len(), named_rules().len());
        assert!(pool.clause.iter().all(|r| r.conclusions.len() <= 1 && r.premises.len() <= 2));
        assert!(pool.mc.iter().all(|r| r.conclusions.len() == 2));
        assert!(pool.clause.iter().all(|r| r.atoms().len() <= 3));
        let distinct: BTreeSet<String> = pool.clause.iter().map(|r| r.to_string()).collect();
        assert_eq!(distinct.len(), pool.clause.len());
    }

    #[test]
    fn canonical_forms_are_closed_under_renaming() {
        let perms = atom_permutations();
        let pool = rule_pool();
        let keys: BTreeSet<String> = pool.clause.iter().map(|r| r.to_string()).collect();
        for r in pool.clause.iter().take(200) {
            let best = perms.iter().map(|s| r.substitute(s).to_string()).min().unwrap();
            assert!(keys.contains(&best));
            assert_eq!(best, r.to_string());
        }
    }

    #[test]
    fn parse_errors() {
        assert!(parse_pool("p |- q").is_err());
        assert!(parse_pool("[bogus]").is_err());
        assert!(parse_pool("[named]\np |- q").is_err());
    }
}
