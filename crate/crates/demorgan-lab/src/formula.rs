//! Formulas over atoms, `~`, `&`, `|`, `T`, `F`; rules; substitutions; normal forms.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::error::{Error, Result};

/// A propositional formula in the De Morgan signature.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Formula {
    Atom(String),
    Neg(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Top,
    Bot,
}

impl Formula {
    pub fn atom(name: impl Into<String>) -> Formula {
        Formula::Atom(name.into())
    }

    pub fn neg(f: Formula) -> Formula {
        Formula::Neg(Box::new(f))
    }

    pub fn and(a: Formula, b: Formula) -> Formula {
        Formula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Formula, b: Formula) -> Formula {
        Formula::Or(Box::new(a), Box::new(b))
    }

    /// Left-associated conjunction; the empty conjunction is `T`.
    pub fn conj(items: impl IntoIterator<Item = Formula>) -> Formula {
        items
            .into_iter()
            .reduce(Formula::and)
            .unwrap_or(Formula::Top)
    }

    /// Left-associated disjunction; the empty disjunction is `F`.
    pub fn disj(items: impl IntoIterator<Item = Formula>) -> Formula {
        items.into_iter().reduce(Formula::or).unwrap_or(Formula::Bot)
    }

    pub fn atoms(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms(&self, out: &mut BTreeSet<String>) {
        match self {
            Formula::Atom(a) => {
                out.insert(a.clone());
            }
            Formula::Neg(g) => g.collect_atoms(out),
            Formula::And(a, b) | Formula::Or(a, b) => {
                a.collect_atoms(out);
                b.collect_atoms(out);
            }
            Formula::Top | Formula::Bot => {}
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Formula::Atom(_) | Formula::Top | Formula::Bot => 0,
            Formula::Neg(g) => 1 + g.depth(),
            Formula::And(a, b) | Formula::Or(a, b) => 1 + a.depth().max(b.depth()),
        }
    }

    pub fn contains_negation(&self) -> bool {
        match self {
            Formula::Neg(_) => true,
            Formula::And(a, b) | Formula::Or(a, b) => a.contains_negation() || b.contains_negation(),
            _ => false,
        }
    }

    /// True if negation is applied to atoms only.
    pub fn is_nnf(&self) -> bool {
        match self {
            Formula::Neg(g) => matches!(**g, Formula::Atom(_)),
            Formula::And(a, b) | Formula::Or(a, b) => a.is_nnf() && b.is_nnf(),
            _ => true,
        }
    }

    /// Pushes negations down to atoms using the De Morgan laws and `~~x = x`.
    pub fn nnf(&self) -> Formula {
        self.nnf_pol(true)
    }

    fn nnf_pol(&self, pos: bool) -> Formula {
        match (self, pos) {
            (Formula::Atom(_), true) => self.clone(),
            (Formula::Atom(_), false) => Formula::neg(self.clone()),
            (Formula::Top, true) | (Formula::Bot, false) => Formula::Top,
            (Formula::Top, false) | (Formula::Bot, true) => Formula::Bot,
            (Formula::Neg(g), _) => g.nnf_pol(!pos),
            (Formula::And(a, b), true) => Formula::and(a.nnf_pol(true), b.nnf_pol(true)),
            (Formula::And(a, b), false) => Formula::or(a.nnf_pol(false), b.nnf_pol(false)),
            (Formula::Or(a, b), true) => Formula::or(a.nnf_pol(true), b.nnf_pol(true)),
            (Formula::Or(a, b), false) => Formula::and(a.nnf_pol(false), b.nnf_pol(false)),
        }
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, level: u8) -> fmt::Result {
        match self {
            Formula::Atom(a) => write!(f, "{a}"),
            Formula::Top => write!(f, "T"),
            Formula::Bot => write!(f, "F"),
            Formula::Neg(g) => {
                write!(f, "~")?;
                g.fmt_prec(f, 2)
            }
            Formula::And(a, b) => {
                if level > 1 {
                    write!(f, "(")?;
                }
                a.fmt_prec(f, 1)?;
                write!(f, " & ")?;
                b.fmt_prec(f, 2)?;
                if level > 1 {
                    write!(f, ")")?;
                }
                Ok(())
            }
            Formula::Or(a, b) => {
                if level > 0 {
                    write!(f, "(")?;
                }
                a.fmt_prec(f, 0)?;
                write!(f, " | ")?;
                b.fmt_prec(f, 1)?;
                if level > 0 {
                    write!(f, ")")?;
                }
                Ok(())
            }
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}

impl std::str::FromStr for Formula {
    type Err = ParseError;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        parse(s)
    }
}

// ---------------------------------------------------------------- parsing

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("syntax error at byte {offset}: expected one of {}, found {found}", .expected.join(" "))]
pub struct ParseError {
    pub offset: usize,
    pub expected: Vec<&'static str>,
    pub found: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Tilde,
    Amp,
    Bar,
    LParen,
    RParen,
    Top,
    Bot,
    Comma,
    Turnstile,
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Tilde => "`~`".into(),
            Tok::Amp => "`&`".into(),
            Tok::Bar => "`|`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Top => "`T`".into(),
            Tok::Bot => "`F`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Turnstile => "`|-`".into(),
            Tok::End => "end of input".into(),
        }
    }
}

const EXPECT_OPERAND: &[&str] = &["~", "atom", "T", "F", "("];

fn lex(text: &str) -> std::result::Result<Vec<(usize, Tok)>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        let tok = match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'~' => Tok::Tilde,
            b'&' => Tok::Amp,
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b',' => Tok::Comma,
            b'T' => Tok::Top,
            b'F' => Tok::Bot,
            b'|' => {
                if bytes.get(i + 1) == Some(&b'-') {
                    i += 1;
                    Tok::Turnstile
                } else {
                    Tok::Bar
                }
            }
            b'a'..=b'z' | b'_' => {
                let mut j = i + 1;
                while j < bytes.len()
                    && (bytes[j].is_ascii_lowercase() || bytes[j].is_ascii_digit() || bytes[j] == b'_')
                {
                    j += 1;
                }
                out.push((start, Tok::Ident(text[start..j].to_string())));
                i = j;
                continue;
            }
            _ => {
                let ch = text[i..].chars().next().unwrap_or('?');
                return Err(ParseError {
                    offset: i,
                    expected: vec!["~", "&", "|", "(", ")", ",", "|-", "T", "F", "atom"],
                    found: format!("`{ch}`"),
                });
            }
        };
        out.push((start, tok));
        i += 1;
    }
    out.push((text.len(), Tok::End));
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].1
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].0
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].1.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, expected: &[&'static str]) -> ParseError {
        ParseError {
            offset: self.offset(),
            expected: expected.to_vec(),
            found: self.peek().describe(),
        }
    }

    fn disj(&mut self) -> std::result::Result<Formula, ParseError> {
        let mut f = self.conj()?;
        while *self.peek() == Tok::Bar {
            self.bump();
            let g = self.conj()?;
            f = Formula::or(f, g);
        }
        Ok(f)
    }

    fn conj(&mut self) -> std::result::Result<Formula, ParseError> {
        let mut f = self.neg()?;
        while *self.peek() == Tok::Amp {
            self.bump();
            let g = self.neg()?;
            f = Formula::and(f, g);
        }
        Ok(f)
    }

    fn neg(&mut self) -> std::result::Result<Formula, ParseError> {
        match self.peek().clone() {
            Tok::Tilde => {
                self.bump();
                Ok(Formula::neg(self.neg()?))
            }
            Tok::Ident(name) => {
                self.bump();
                Ok(Formula::Atom(name))
            }
            Tok::Top => {
                self.bump();
                Ok(Formula::Top)
            }
            Tok::Bot => {
                self.bump();
                Ok(Formula::Bot)
            }
            Tok::LParen => {
                self.bump();
                let f = self.disj()?;
                if *self.peek() != Tok::RParen {
                    return Err(self.error(&["&", "|", ")"]));
                }
                self.bump();
                Ok(f)
            }
            _ => Err(self.error(EXPECT_OPERAND)),
        }
    }

    fn list(&mut self, terminator: Tok, after: &'static str) -> std::result::Result<Vec<Formula>, ParseError> {
        let mut out = Vec::new();
        if *self.peek() == terminator {
            return Ok(out);
        }
        loop {
            out.push(self.disj()?);
            match self.peek() {
                Tok::Comma => {
                    self.bump();
                }
                t if *t == terminator => return Ok(out),
                _ => return Err(self.error(&["&", "|", ",", after])),
            }
        }
    }
}

/// Parses a formula. Precedence: `~` binds tighter than `&`, which binds tighter than `|`.
pub fn parse(text: &str) -> std::result::Result<Formula, ParseError> {
    let mut p = Parser { toks: lex(text)?, pos: 0 };
    let f = p.disj()?;
    if *p.peek() != Tok::End {
        return Err(p.error(&["&", "|", "end of input"]));
    }
    Ok(f)
}

/// Parses `premises |- conclusions` with comma-separated lists on both sides.
pub fn parse_rule(text: &str) -> std::result::Result<RuleInstance, ParseError> {
    let mut p = Parser { toks: lex(text)?, pos: 0 };
    let premises = p.list(Tok::Turnstile, "|-")?;
    p.bump();
    let conclusions = p.list(Tok::End, "end of input")?;
    Ok(RuleInstance::new(premises, conclusions))
}

// ---------------------------------------------------------------- rules

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RuleKind {
    Explosive,
    Single,
    Multiple,
}

/// A rule `premises |- conclusions`; zero conclusions is an explosive rule.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RuleInstance {
    pub premises: BTreeSet<Formula>,
    pub conclusions: BTreeSet<Formula>,
}

impl RuleInstance {
    pub fn new(
        premises: impl IntoIterator<Item = Formula>,
        conclusions: impl IntoIterator<Item = Formula>,
    ) -> Self {
        RuleInstance {
            premises: premises.into_iter().collect(),
            conclusions: conclusions.into_iter().collect(),
        }
    }

    pub fn single(premises: impl IntoIterator<Item = Formula>, conclusion: Formula) -> Self {
        Self::new(premises, [conclusion])
    }

    pub fn explosive(premises: impl IntoIterator<Item = Formula>) -> Self {
        Self::new(premises, [])
    }

    pub fn kind(&self) -> RuleKind {
        match self.conclusions.len() {
            0 => RuleKind::Explosive,
            1 => RuleKind::Single,
            _ => RuleKind::Multiple,
        }
    }

    pub fn atoms(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for f in self.premises.iter().chain(&self.conclusions) {
            f.collect_atoms(&mut out);
        }
        out
    }

    pub fn premise_atoms(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for f in &self.premises {
            f.collect_atoms(&mut out);
        }
        out
    }

    /// The conclusion of a single-conclusion rule, `F` for an explosive one,
    /// and the disjunction of the conclusions otherwise.
    pub fn conclusion_disjunction(&self) -> Formula {
        Formula::disj(self.conclusions.iter().cloned())
    }

    pub fn substitute(&self, s: &Substitution) -> RuleInstance {
        RuleInstance::new(
            self.premises.iter().map(|f| s.apply(f)),
            self.conclusions.iter().map(|f| s.apply(f)),
        )
    }
}

impl fmt::Display for RuleInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |set: &BTreeSet<Formula>| {
            set.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
        };
        let lhs = join(&self.premises);
        let rhs = join(&self.conclusions);
        match (lhs.is_empty(), rhs.is_empty()) {
            (true, true) => write!(f, "|-"),
            (true, false) => write!(f, "|- {rhs}"),
            (false, true) => write!(f, "{lhs} |-"),
            (false, false) => write!(f, "{lhs} |- {rhs}"),
        }
    }
}

impl std::str::FromStr for RuleInstance {
    type Err = ParseError;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        parse_rule(s)
    }
}

// ---------------------------------------------------------------- substitution

/// Atom-to-formula map, identity off its support.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Substitution(pub BTreeMap<String, Formula>);

impl Substitution {
    pub fn identity() -> Self {
        Substitution(BTreeMap::new())
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (String, Formula)>) -> Self {
        Substitution(pairs.into_iter().collect())
    }

    pub fn renaming(map: &BTreeMap<String, String>) -> Self {
        Substitution(
            map.iter()
                .map(|(k, v)| (k.clone(), Formula::Atom(v.clone())))
                .collect(),
        )
    }

    pub fn apply(&self, f: &Formula) -> Formula {
        match f {
            Formula::Atom(a) => self.0.get(a).cloned().unwrap_or_else(|| f.clone()),
            Formula::Neg(g) => Formula::neg(self.apply(g)),
            Formula::And(a, b) => Formula::and(self.apply(a), self.apply(b)),
            Formula::Or(a, b) => Formula::or(self.apply(a), self.apply(b)),
            Formula::Top | Formula::Bot => f.clone(),
        }
    }
}

pub fn substitute(f: &Formula, s: &Substitution) -> Formula {
    s.apply(f)
}

/// Reserved prefix for generated atoms.
pub const FRESH_PREFIX: &str = "_g";

/// First `_gN` name not in `avoid`.
pub fn fresh_atom(avoid: &BTreeSet<String>) -> String {
    (0..)
        .map(|i| format!("{FRESH_PREFIX}{i}"))
        .find(|n| !avoid.contains(n))
        .expect("unbounded")
}

/// Result of [`rename_apart_with_maps`]: both rules and the atom renamings applied to them.
#[derive(Clone, Debug)]
pub struct RenamedApart {
    pub left: RuleInstance,
    pub right: RuleInstance,
    pub left_renaming: BTreeMap<String, String>,
    pub right_renaming: BTreeMap<String, String>,
}

/// Makes two rules variable disjoint by renaming the clashing atoms of the second one.
pub fn rename_apart(r1: &RuleInstance, r2: &RuleInstance) -> (RuleInstance, RuleInstance) {
    let out = rename_apart_with_maps(r1, r2);
    (out.left, out.right)
}

pub fn rename_apart_with_maps(r1: &RuleInstance, r2: &RuleInstance) -> RenamedApart {
    let a1 = r1.atoms();
    let a2 = r2.atoms();
    let identity = |s: &BTreeSet<String>| s.iter().map(|a| (a.clone(), a.clone())).collect();
    let mut used: BTreeSet<String> = a1.union(&a2).cloned().collect();
    let mut right_renaming = BTreeMap::new();
    for a in &a2 {
        if a1.contains(a) {
            let fresh = fresh_atom(&used);
            used.insert(fresh.clone());
            right_renaming.insert(a.clone(), fresh);
        } else {
            right_renaming.insert(a.clone(), a.clone());
        }
    }
    let right = r2.substitute(&Substitution::renaming(&right_renaming));
    RenamedApart {
        left: r1.clone(),
        right,
        left_renaming: identity(&a1),
        right_renaming,
    }
}

// ---------------------------------------------------------------- normal forms

/// An atom or a negated atom. Negative literals sort before positive ones.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Literal {
    pub atom: String,
    pub positive: bool,
}

impl Literal {
    pub fn to_formula(&self) -> Formula {
        let a = Formula::Atom(self.atom.clone());
        if self.positive {
            a
        } else {
            Formula::neg(a)
        }
    }

    pub fn complement(&self) -> Literal {
        Literal { atom: self.atom.clone(), positive: !self.positive }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NfMode {
    /// Conjunction of disjunctive clauses.
    Cnf,
    /// Disjunction of conjunctive clauses.
    Dnf,
}

pub type Clause = Vec<Literal>;

/// Clause list of `f` in the given mode: sorted duplicate-free clauses, subsumed clauses removed,
/// clause list sorted. For CNF the empty list is `T` and an empty clause is `F`; dually for DNF.
pub fn clause_form(f: &Formula, mode: NfMode) -> Vec<Clause> {
    clauses_pol(f, true, mode)
}

fn clauses_pol(f: &Formula, pos: bool, mode: NfMode) -> Vec<Clause> {
    // `outer` is the connective joining clauses, `inner` the one inside a clause.
    let is_top = matches!((f, pos), (Formula::Top, true) | (Formula::Bot, false));
    match f {
        Formula::Atom(a) => vec![vec![Literal { atom: a.clone(), positive: pos }]],
        Formula::Top | Formula::Bot => {
            // Unit of the outer connective: no clauses; absorbing element: one empty clause.
            let unit = match mode {
                NfMode::Cnf => is_top,
                NfMode::Dnf => !is_top,
            };
            if unit {
                vec![]
            } else {
                vec![vec![]]
            }
        }
        Formula::Neg(g) => clauses_pol(g, !pos, mode),
        Formula::And(a, b) | Formula::Or(a, b) => {
            let conj_like = matches!(f, Formula::And(..)) == pos;
            let ca = clauses_pol(a, pos, mode);
            let cb = clauses_pol(b, pos, mode);
            let outer = match mode {
                NfMode::Cnf => conj_like,
                NfMode::Dnf => !conj_like,
            };
            if outer {
                reduce_clauses(ca.into_iter().chain(cb).collect())
            } else {
                let mut out = Vec::with_capacity(ca.len() * cb.len());
                for x in &ca {
                    for y in &cb {
                        out.push(x.iter().chain(y).cloned().collect());
                    }
                }
                reduce_clauses(out)
            }
        }
    }
}

fn reduce_clauses(mut cs: Vec<Clause>) -> Vec<Clause> {
    for c in cs.iter_mut() {
        c.sort();
        c.dedup();
    }
    cs.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    cs.dedup();
    let mut kept: Vec<Clause> = Vec::new();
    for c in cs {
        if !kept.iter().any(|k| is_subset(k, &c)) {
            kept.push(c);
        }
    }
    kept.sort();
    kept
}

fn is_subset(small: &[Literal], big: &[Literal]) -> bool {
    small.iter().all(|l| big.binary_search(l).is_ok())
}

/// Rebuilds a formula from a clause list produced by [`clause_form`].
pub fn clauses_to_formula(cs: &[Clause], mode: NfMode) -> Formula {
    let clause = |c: &Clause| {
        let lits = c.iter().map(Literal::to_formula);
        match mode {
            NfMode::Cnf => Formula::disj(lits),
            NfMode::Dnf => Formula::conj(lits),
        }
    };
    match mode {
        NfMode::Cnf => Formula::conj(cs.iter().map(clause)),
        NfMode::Dnf => Formula::disj(cs.iter().map(clause)),
    }
}

pub fn normal_form(f: &Formula, mode: NfMode) -> Formula {
    clauses_to_formula(&clause_form(f, mode), mode)
}

// ---------------------------------------------------------------- classical status

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClassicalStatus {
    Tautology,
    Contradiction,
    Contingent,
}

pub fn eval_classical(f: &Formula, v: &BTreeMap<String, bool>) -> bool {
    match f {
        Formula::Atom(a) => v.get(a).copied().unwrap_or(false),
        Formula::Neg(g) => !eval_classical(g, v),
        Formula::And(a, b) => eval_classical(a, v) && eval_classical(b, v),
        Formula::Or(a, b) => eval_classical(a, v) || eval_classical(b, v),
        Formula::Top => true,
        Formula::Bot => false,
    }
}

pub fn classical_status(f: &Formula) -> ClassicalStatus {
    let atoms: Vec<String> = f.atoms().into_iter().collect();
    let (mut some_true, mut some_false) = (false, false);
    for bits in 0u64..(1u64 << atoms.len()) {
        let v = atoms
            .iter()
            .enumerate()
            .map(|(i, a)| (a.clone(), bits >> i & 1 == 1))
            .collect();
        if eval_classical(f, &v) {
            some_true = true;
        } else {
            some_false = true;
        }
        if some_true && some_false {
            return ClassicalStatus::Contingent;
        }
    }
    if some_true {
        ClassicalStatus::Tautology
    } else {
        ClassicalStatus::Contradiction
    }
}

/// `(p1 & ~p1) | ... | (pn & ~pn)`.
pub fn chi(n: usize) -> Result<Formula> {
    if n == 0 {
        return Err(Error::Precondition("chi(n) requires n >= 1".into()));
    }
    Ok(Formula::disj((1..=n).map(|i| {
        let p = Formula::atom(format!("p{i}"));
        Formula::and(p.clone(), Formula::neg(p))
    })))
}


#[cfg(test)]
pub(crate) mod tests_support {
    use super::*;
    use proptest::prelude::*;

    pub fn arb_formula_over(atoms: Vec<&'static str>) -> impl Strategy<Value = Formula> {
        let leaf = prop_oneof![
            6 => prop::sample::select(atoms).prop_map(Formula::atom),
            1 => Just(Formula::Top),
            1 => Just(Formula::Bot),
        ];
        leaf.prop_recursive(3, 12, 2, |inner| {
            prop_oneof![
                inner.clone().prop_map(Formula::neg),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::and(a, b)),
                (inner.clone(), inner).prop_map(|(a, b)| Formula::or(a, b)),
            ]
        })
    }

    /// Small rules over p, q, r with up to two premises and up to two conclusions.
    pub fn arb_rule() -> impl Strategy<Value = RuleInstance> {
        let f = || arb_formula_over(vec!["p", "q", "r"]);
        (prop::collection::vec(f(), 0..3), prop::collection::vec(f(), 0..3))
            .prop_map(|(ps, cs)| RuleInstance::new(ps, cs))
    }
}
