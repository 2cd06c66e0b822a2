//! Command-line front end.
//!
//! Exit codes: 0 when the answer is yes or the command succeeded, 1 when the answer is no or
//! nothing was found, 2 on malformed input or any other error.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::io::Write;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use crate::bridge::{alpha_rule, classify_reduced, gamma, mu_triple, TriplePresentation};
use crate::error::{Error, Result};
use crate::formula::{fresh_atom, parse, parse_rule, Formula, RuleInstance};
use crate::frame::{complex_matrix, dual_frame, Frame, FrameJson};
use crate::graph::{self, hom_search, s_star_closure, weak_n_coloring, Graph, GraphJson, GraphPair};
use crate::logics::{
    kminus_witness, log_leq, plus_matrix_pool, probe_lattice, registry, separation_search, triple_matrix_pool,
    LogLeq, PROBE_LOGICS,
};
use crate::matrix::{catalog, catalog_matrix, free_dm_algebra, power, product, FinMatrix, MatrixJson, Valuation};
use crate::pool::rule_pool;
use crate::suite::{self, DEFAULT_SEED};

pub const THREADS_ENV: &str = "DEMORGAN_LAB_THREADS";

#[derive(Parser, Debug)]
#[command(name = "demorgan-lab", version, about = "Finite matrices, dual frames and graphs for Belnap-Dunn logic")]
pub struct Cli {
    /// Print machine-readable JSON instead of text.
    #[arg(long, global = true)]
    pub json: bool,
    /// Seed for randomized sampling.
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Check a rule in a matrix; prints a counterexample valuation when it fails.
    Check {
        #[arg(long)]
        matrix: String,
        #[arg(long)]
        rule: String,
        /// Allow several conclusions.
        #[arg(long)]
        mc: bool,
    },
    /// Whether no valuation on the logic's semantics designates all formulas.
    Antitheorem {
        #[arg(long)]
        logic: String,
        #[arg(long, num_args = 1.., required = true)]
        formulas: Vec<String>,
    },
    /// Leibniz congruence and reduct.
    Leibniz {
        #[arg(long)]
        matrix: String,
    },
    /// Dual frame of a De Morgan matrix with a filter.
    Dual {
        #[arg(long)]
        matrix: String,
    },
    /// Complex matrix of a frame.
    Complex {
        #[arg(long)]
        frame: String,
    },
    /// Matrix of a triple presentation.
    Mu {
        #[arg(long, default_value = "empty")]
        plus: String,
        #[arg(long, default_value = "empty")]
        minus: String,
        #[arg(long, default_value_t = 0)]
        k: usize,
    },
    /// Matrix in which chi(n) is an antitheorem iff the graph is not n-colorable.
    Gamma {
        #[arg(long)]
        graph: String,
    },
    /// Explosive rule valid in mu+(H) iff H has no homomorphism into the graph.
    Alpha {
        #[arg(long)]
        graph: String,
    },
    /// Triple presentation of a reduced De Morgan matrix.
    Classify {
        #[arg(long)]
        matrix: String,
    },
    /// Graph homomorphism search.
    Hom { source: String, target: String },
    /// Proper n-coloring.
    Color { graph: String, n: usize },
    /// Weak n-coloring.
    Weakcolor { graph: String, n: usize },
    /// De Morgan algebra generated subject to inequalities `lhs <= rhs`.
    Free {
        #[arg(long, value_delimiter = ',', required = true)]
        gens: Vec<String>,
        #[arg(long, num_args = 0..)]
        rel: Vec<String>,
    },
    /// Closure of a graph with a singleton counter under the S* operations.
    Sstar {
        #[arg(long)]
        graph: String,
        #[arg(long, default_value_t = 0)]
        k: usize,
        #[arg(long, default_value_t = 2)]
        steps: usize,
    },
    /// Whether the target matrix arises from products of the source matrices.
    Logleq {
        /// Registry logic name or comma-separated matrix references.
        #[arg(long)]
        from: String,
        #[arg(long)]
        to: String,
        #[arg(long)]
        bound: Option<usize>,
    },
    /// Witness that a rule holds in K-.
    WitnessKminus {
        #[arg(long, num_args = 0..)]
        premises: Vec<String>,
        /// Omit for an explosive rule.
        #[arg(long)]
        conclusion: Option<String>,
    },
    /// Compare the standard logics on the rule pool.
    Probe,
    /// Run the acceptance criteria.
    Verify {
        /// A criterion number, or `all`.
        #[arg(long, default_value = "all")]
        suite: String,
    },
    /// First pool matrix validating `hold` and refuting `fail`.
    Separate {
        #[arg(long, num_args = 0..)]
        hold: Vec<String>,
        #[arg(long, num_args = 0..)]
        fail: Vec<String>,
        /// `catalog`, `plus` (mu+ of graphs up to 4 vertices) or `triples`.
        #[arg(long, default_value = "plus")]
        pool: String,
    },
}

// ---------------------------------------------------------------- references

fn read_ref(s: &str) -> Result<Option<String>> {
    if let Some(path) = s.strip_prefix('@') {
        return Ok(Some(std::fs::read_to_string(path)?));
    }
    if s.trim_start().starts_with('{') {
        return Ok(Some(s.to_string()));
    }
    Ok(None)
}

/// Catalog names joined by `*`, each optionally raised to a power with `^k`; `@file`; or inline JSON.
pub fn parse_matrix_ref(s: &str) -> Result<FinMatrix> {
    if let Some(text) = read_ref(s)? {
        let j: MatrixJson = serde_json::from_str(&text)?;
        return FinMatrix::from_json(j);
    }
    let factors = s
        .split('*')
        .map(|part| {
            let part = part.trim();
            match part.split_once('^') {
                Some((name, k)) => {
                    let k: usize = k.trim().parse().map_err(|_| Error::Input(format!("bad exponent in `{part}`")))?;
                    power(&catalog_matrix(name.trim())?, k)
                }
                None => catalog_matrix(part),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    if factors.len() == 1 {
        Ok(factors.into_iter().next().expect("one factor"))
    } else {
        product(&factors)
    }
}

pub fn parse_frame_ref(s: &str) -> Result<Frame> {
    match read_ref(s)? {
        Some(text) => Frame::from_json(serde_json::from_str::<FrameJson>(&text)?),
        None => Err(Error::Input(format!("frame reference `{s}` must be @file or inline JSON"))),
    }
}

fn named_graph(part: &str) -> Result<Graph> {
    let lower = part.to_ascii_lowercase();
    let number = |rest: &str| rest.parse::<usize>().map_err(|_| Error::Input(format!("unknown graph `{part}`")));
    match lower.as_str() {
        "empty" => Ok(Graph::empty()),
        "point" => Ok(Graph::point()),
        "loop" => Ok(Graph::loop_vertex()),
        "g2" => Ok(Graph::g2()),
        _ => {
            if let Some(rest) = lower.strip_prefix('k') {
                Ok(Graph::complete(number(rest)?))
            } else if let Some(rest) = lower.strip_prefix('c') {
                Graph::cycle(number(rest)?)
            } else {
                Err(Error::Input(format!("unknown graph `{part}`")))
            }
        }
    }
}

/// `Kn`, `Cn`, `point`, `loop`, `G2`, `empty`, disjoint unions with `+`, `@file` or inline JSON.
pub fn parse_graph_ref(s: &str) -> Result<Graph> {
    if let Some(text) = read_ref(s)? {
        return Graph::from_json(serde_json::from_str::<GraphJson>(&text)?);
    }
    let parts = s.split('+').map(|p| named_graph(p.trim())).collect::<Result<Vec<_>>>()?;
    if parts.len() == 1 {
        Ok(parts.into_iter().next().expect("one part"))
    } else {
        graph::disjoint_union(&parts)
    }
}

fn parse_formula(s: &str) -> Result<Formula> {
    Ok(parse(s)?)
}

fn parse_rules(items: &[String]) -> Result<Vec<RuleInstance>> {
    items.iter().map(|s| Ok(parse_rule(s)?)).collect()
}

fn render_valuation(m: &FinMatrix, v: &Valuation) -> String {
    v.iter().map(|(a, &x)| format!("{a}={}", m.label(x))).collect::<Vec<_>>().join(", ")
}

fn valuation_json(m: &FinMatrix, v: &Valuation) -> Value {
    v.iter().map(|(a, &x)| (a.clone(), Value::from(m.label(x)))).collect::<serde_json::Map<_, _>>().into()
}

// ---------------------------------------------------------------- execution

/// Text and JSON forms of a result, plus the exit code.
struct Report {
    code: i32,
    text: String,
    json: Value,
}

impl Report {
    fn new(code: i32, text: impl Into<String>, json: Value) -> Self {
        Report { code, text: text.into(), json }
    }
}

fn yes_no(b: bool) -> i32 {
    if b {
        0
    } else {
        1
    }
}

fn execute(cli: &Cli) -> Result<Report> {
    Ok(match &cli.command {
        Command::Check { matrix, rule, mc } => {
            let m = parse_matrix_ref(matrix)?;
            let r = parse_rule(rule)?;
            if r.conclusions.len() > 1 && !mc {
                return Err(Error::Input("rule has several conclusions; pass --mc".into()));
            }
            match m.find_counterexample(&r) {
                None => Report::new(0, format!("valid: {r}"), json!({"valid": true, "rule": r.to_string()})),
                Some(v) => Report::new(
                    1,
                    format!("invalid: {r}\ncounterexample: {}", render_valuation(&m, &v)),
                    json!({"valid": false, "rule": r.to_string(), "counterexample": valuation_json(&m, &v)}),
                ),
            }
        }
        Command::Antitheorem { logic, formulas } => {
            let l = registry(logic)?;
            let gamma: BTreeSet<Formula> = formulas.iter().map(|s| parse_formula(s)).collect::<Result<_>>()?;
            let used: BTreeSet<String> = gamma.iter().flat_map(Formula::atoms).collect();
            let probe = RuleInstance::single(gamma.iter().cloned(), Formula::atom(fresh_atom(&used)));
            let witness = l.semantics.iter().find_map(|(name, m)| {
                m.find_counterexample(&probe).map(|mut v| {
                    v.retain(|a, _| used.contains(a));
                    (name.clone(), render_valuation(m, &v), valuation_json(m, &v))
                })
            });
            match witness {
                None => Report::new(0, format!("antitheorem of {}", l.name), json!({"antitheorem": true})),
                Some((name, text, j)) => Report::new(
                    1,
                    format!("not an antitheorem of {}\ndesignating valuation in {name}: {text}", l.name),
                    json!({"antitheorem": false, "matrix": name, "valuation": j}),
                ),
            }
        }
        Command::Leibniz { matrix } => {
            let m = parse_matrix_ref(matrix)?;
            let blocks: Vec<Vec<String>> = m
                .leibniz_congruence()
                .blocks()
                .into_iter()
                .map(|b| b.into_iter().map(|a| m.label(a).to_string()).collect())
                .collect();
            let reduct = m.leibniz_reduct();
            let text = format!(
                "blocks: {}\nreduced: {}\nreduct:\n{}",
                blocks.iter().map(|b| format!("{{{}}}", b.join(","))).collect::<Vec<_>>().join(" "),
                m.is_reduced(),
                reduct.render()
            );
            Report::new(0, text, json!({"blocks": blocks, "reduced": m.is_reduced(), "reduct": reduct.to_json()}))
        }
        Command::Dual { matrix } => {
            let p = dual_frame(&parse_matrix_ref(matrix)?)?;
            Report::new(0, p.render(), serde_json::to_value(p.to_json())?)
        }
        Command::Complex { frame } => {
            let m = complex_matrix(&parse_frame_ref(frame)?)?;
            Report::new(0, m.render(), serde_json::to_value(m.to_json())?)
        }
        Command::Mu { plus, minus, k } => {
            let t = TriplePresentation::new(parse_graph_ref(plus)?, parse_graph_ref(minus)?, *k);
            let m = mu_triple(&t)?;
            Report::new(0, format!("mu{t}: {} elements\n{}", m.size(), m.render()), serde_json::to_value(m.to_json())?)
        }
        Command::Gamma { graph } => {
            let m = gamma(&parse_graph_ref(graph)?)?;
            Report::new(0, m.render(), serde_json::to_value(m.to_json())?)
        }
        Command::Alpha { graph } => {
            let r = alpha_rule(&parse_graph_ref(graph)?)?;
            Report::new(0, r.to_string(), json!({"rule": r.to_string()}))
        }
        Command::Classify { matrix } => {
            let t = classify_reduced(&parse_matrix_ref(matrix)?)?;
            Report::new(
                0,
                t.to_string(),
                json!({"plus": t.plus_graph.to_json(), "minus": t.minus_graph.to_json(), "k": t.singletons}),
            )
        }
        Command::Hom { source, target } => {
            let (g, h) = (parse_graph_ref(source)?, parse_graph_ref(target)?);
            match hom_search(&g, &h) {
                Some(f) => {
                    let pairs: Vec<(String, String)> =
                        f.iter().enumerate().map(|(u, &v)| (g.label(u).to_string(), h.label(v).to_string())).collect();
                    let text = pairs.iter().map(|(a, b)| format!("{a}->{b}")).collect::<Vec<_>>().join(" ");
                    Report::new(0, format!("homomorphism: {text}"), json!({"homomorphism": pairs}))
                }
                None => Report::new(1, "no homomorphism", json!({"homomorphism": null})),
            }
        }
        Command::Color { graph, n } => {
            let g = parse_graph_ref(graph)?;
            match hom_search(&g, &Graph::complete(*n)) {
                Some(c) => {
                    let pairs: Vec<(String, usize)> = c.iter().enumerate().map(|(u, &k)| (g.label(u).to_string(), k)).collect();
                    let text = pairs.iter().map(|(a, k)| format!("{a}={k}")).collect::<Vec<_>>().join(" ");
                    Report::new(0, format!("{n}-coloring: {text}"), json!({"coloring": pairs}))
                }
                None => Report::new(1, format!("not {n}-colorable"), json!({"coloring": null})),
            }
        }
        Command::Weakcolor { graph, n } => {
            let g = parse_graph_ref(graph)?;
            match weak_n_coloring(&g, *n) {
                Some(c) => {
                    let pairs: Vec<(String, usize)> = c.iter().map(|(&u, &k)| (g.label(u).to_string(), k)).collect();
                    let text = pairs.iter().map(|(a, k)| format!("{a}={k}")).collect::<Vec<_>>().join(" ");
                    Report::new(0, format!("weak {n}-coloring: {text}"), json!({"coloring": pairs}))
                }
                None => Report::new(1, format!("not weakly {n}-colorable"), json!({"coloring": null})),
            }
        }
        Command::Free { gens, rel } => {
            let relations = rel
                .iter()
                .map(|r| {
                    let (l, rhs) =
                        r.split_once("<=").ok_or_else(|| Error::Input(format!("relation `{r}` needs `<=`")))?;
                    Ok((parse_formula(l.trim())?, parse_formula(rhs.trim())?))
                })
                .collect::<Result<Vec<_>>>()?;
            let m = free_dm_algebra(gens, &relations)?;
            Report::new(0, format!("{} elements\n{}", m.size(), m.render()), json!({"size": m.size(), "matrix": m.to_json()}))
        }
        Command::Sstar { graph, k, steps } => {
            let closure = s_star_closure(&GraphPair::new(parse_graph_ref(graph)?, *k), *steps)?;
            let text = closure.iter().map(|p| p.to_string()).collect::<Vec<_>>().join("\n");
            let j: Vec<Value> =
                closure.iter().map(|p| json!({"graph": p.graph.to_json(), "counter": p.counter})).collect();
            Report::new(0, text, json!(j))
        }
        Command::Logleq { from, to, bound } => {
            let sources: Vec<FinMatrix> = match registry(from) {
                Ok(l) => l.semantics.into_iter().map(|(_, m)| m).collect(),
                Err(_) => from.split(',').map(|s| parse_matrix_ref(s.trim())).collect::<Result<_>>()?,
            };
            let target = parse_matrix_ref(to)?;
            let res = log_leq(&sources, &target, *bound)?;
            let text = match res {
                LogLeq::Yes => "yes".to_string(),
                LogLeq::NotFoundUpToBound => format!("not found up to power {}", bound.unwrap_or(target.size())),
            };
            Report::new(yes_no(res == LogLeq::Yes), text, json!({"result": res}))
        }
        Command::WitnessKminus { premises, conclusion } => {
            let gamma: BTreeSet<Formula> = premises.iter().map(|s| parse_formula(s)).collect::<Result<_>>()?;
            let phi = match conclusion {
                Some(c) => parse_formula(c)?,
                None => Formula::Bot,
            };
            match kminus_witness(&gamma, &phi) {
                Some(w) => Report::new(
                    0,
                    format!("psi: {}\nchi: {}", w.psi, w.chi),
                    json!({"psi": w.psi.to_string(), "chi": w.chi.to_string()}),
                ),
                None => {
                    let r = RuleInstance::new(gamma, conclusion.as_ref().map(|_| phi));
                    let m = crate::matrix::kminus8();
                    let cex = m.find_counterexample(&r);
                    let text = match &cex {
                        Some(v) => format!("no witness\ncounterexample in Kminus8: {}", render_valuation(&m, v)),
                        None => "no witness".to_string(),
                    };
                    Report::new(1, text, json!({"witness": null, "counterexample": cex.map(|v| valuation_json(&m, &v))}))
                }
            }
        }
        Command::Probe => {
            let res = probe_lattice(&PROBE_LOGICS, &rule_pool().single_conclusion())?;
            Report::new(0, res.to_dot(), serde_json::to_value(&res)?)
        }
        Command::Verify { suite: which } => {
            let reports = if which.eq_ignore_ascii_case("all") {
                suite::run_all(cli.seed)
            } else {
                let id: usize = which.parse().map_err(|_| Error::Input(format!("unknown suite `{which}`")))?;
                vec![suite::run_criterion(id, cli.seed)?]
            };
            let passed = reports.iter().all(|r| r.passed);
            let text = reports.iter().map(|r| r.to_string()).collect::<Vec<_>>().join("\n");
            Report::new(yes_no(passed), text, serde_json::to_value(&reports)?)
        }
        Command::Separate { hold, fail, pool } => {
            let (hold, fail) = (parse_rules(hold)?, parse_rules(fail)?);
            let candidates: Vec<(String, FinMatrix)> = match pool.to_ascii_lowercase().as_str() {
                "catalog" => catalog().into_iter().map(|(n, m)| (n.to_string(), m)).collect(),
                "plus" => plus_matrix_pool(4)?,
                "triples" => triple_matrix_pool(2, 1)?,
                other => return Err(Error::UnknownName(format!("pool {other}"))),
            };
            match separation_search(&hold, &fail, &candidates) {
                Some((name, m)) => {
                    Report::new(0, format!("{name}\n{}", m.render()), json!({"name": name, "matrix": m.to_json()}))
                }
                None => Report::new(1, "no separating matrix in the pool", json!({"name": null})),
            }
        }
    })
}

/// Caps the global thread pool from the environment; later calls are no-ops.
pub fn configure_threads() {
    if let Some(n) = std::env::var(THREADS_ENV).ok().and_then(|v| v.parse::<usize>().ok()).filter(|&n| n > 0) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

/// Parses `args` (including the program name), runs the command and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let target: &mut dyn Write = if e.use_stderr() { err } else { out };
            let _ = write!(target, "{}", e.render());
            return code;
        }
    };
    match execute(&cli) {
        Ok(report) => {
            let _ = if cli.json {
                writeln!(out, "{}", serde_json::to_string_pretty(&report.json).unwrap_or_default())
            } else {
                writeln!(out, "{}", report.text)
            };
            report.code
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            2
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call(args: &[&str]) -> (i32, String, String) {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let argv = std::iter::once("demorgan-lab").chain(args.iter().copied());
        let code = run(argv, &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn matrix_refs() {
        assert_eq!(parse_matrix_ref("cl2*bd4").unwrap().size(), 8);
        assert_eq!(parse_matrix_ref("CL2^3").unwrap().size(), 8);
        let j = serde_json::to_string(&crate::matrix::k3().to_json()).unwrap();
        assert_eq!(parse_matrix_ref(&j).unwrap(), crate::matrix::k3());
        assert!(parse_matrix_ref("nope").is_err());
    }

    #[test]
    fn graph_refs() {
        assert_eq!(parse_graph_ref("K3").unwrap().size(), 3);
        assert_eq!(parse_graph_ref("C5+point").unwrap().size(), 6);
        assert!(parse_graph_ref("G2").unwrap().has_loop());
        assert!(parse_graph_ref("empty").unwrap().is_empty());
        assert!(parse_graph_ref("X9").is_err());
        assert!(parse_graph_ref("C2").is_err());
    }

    #[test]
    fn check_exit_codes() {
        assert_eq!(call(&["check", "--matrix", "ETL4", "--rule", "p, ~p|q |- q"]).0, 0);
        let (code, out, _) = call(&["check", "--matrix", "BD4", "--rule", "p, ~p|q |- q"]);
        assert_eq!(code, 1);
        assert!(out.contains("counterexample: p=b, q=0"), "{out}");
        let (code, _, err) = call(&["check", "--matrix", "BD4", "--rule", "p |- p, q"]);
        assert_eq!(code, 2);
        assert!(err.contains("--mc"));
        assert_eq!(call(&["check", "--matrix", "BD4", "--rule", "p |- p, q", "--mc"]).0, 0);
        assert_eq!(call(&["check", "--matrix", "BD4", "--rule", "p |- (q"]).0, 2);
    }
}
