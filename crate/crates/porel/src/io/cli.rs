//! Command-line front end.
//!
//! Exit codes: 0 when a command ran to a decision, 2 when a budgeted
//! brute-force strategy was inconclusive, 1 on any error. The
//! `PO_ENGINE_BUDGET` environment variable overrides the brute-force
//! budgets, either as a single world count or as `worlds,nodes`.

use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::algebra::{self, EvalResult, Query};
use crate::decision::{self, Answer, Candidate, DecisionConfig, GroupRow};
use crate::dedup;
use crate::model::{Budget, ListRelation, PoDatabase, TupleValue};
use crate::order;
use crate::testkit::{self, PartitionInstance};

use super::{database, query as query_text, registry};

#[derive(Parser, Debug)]
#[command(name = "porel", version, about = "Query evaluation, possibility and certainty over partially ordered relations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EvalOut {
    Relation,
    Worlds,
    Hasse,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate a query to a po-relation.
    Eval {
        #[arg(short = 'd', long)]
        database: PathBuf,
        #[arg(short = 'q', long)]
        query: String,
        /// relation (JSON), worlds, or hasse (DOT text).
        #[arg(long, value_enum, default_value_t = EvalOut::Relation)]
        out: EvalOut,
        /// Cap on enumerated worlds for --out worlds.
        #[arg(long)]
        limit: Option<usize>,
    },
    /// Enumerate the possible worlds of a query result.
    Worlds {
        #[arg(short = 'd', long)]
        database: PathBuf,
        #[arg(short = 'q', long)]
        query: String,
        #[arg(long)]
        limit: Option<usize>,
    },
    /// Decide whether the candidate is a possible result.
    Poss {
        #[arg(short = 'd', long)]
        database: PathBuf,
        #[arg(short = 'q', long)]
        query: String,
        /// JSON candidate: list of tuples, or a monoid literal for
        /// accumulation roots.
        #[arg(long)]
        candidate: PathBuf,
    },
    /// Decide whether the candidate is the only possible result.
    Cert {
        #[arg(short = 'd', long)]
        database: PathBuf,
        #[arg(short = 'q', long)]
        query: String,
        #[arg(long)]
        candidate: PathBuf,
    },
    /// Width, ia-width, partitions and static bounds of a query result.
    Analyze {
        #[arg(short = 'd', long)]
        database: PathBuf,
        #[arg(short = 'q', long)]
        query: String,
    },
    /// Duplicate elimination of a query result.
    Dedup {
        #[arg(short = 'd', long)]
        database: PathBuf,
        #[arg(short = 'q', long)]
        query: String,
    },
    /// Emit hard POSS instances from 3-partition inputs.
    Gen {
        #[command(subcommand)]
        kind: GenKind,
    },
}

#[derive(Subcommand, Debug)]
enum GenKind {
    /// Parallel chains of s/n/e blocks; query is the identity.
    #[command(name = "3part")]
    ThreePart {
        #[arg(long = "E", value_delimiter = ',', required = true)]
        elements: Vec<u64>,
        #[arg(long = "B")]
        target: u64,
    },
    /// The projected-grid variant over totally ordered inputs.
    Grid {
        #[arg(long = "E", value_delimiter = ',', required = true)]
        elements: Vec<u64>,
        #[arg(long = "B")]
        target: u64,
    },
}

/// Runs one invocation; `out` receives the report, `err` diagnostics.
pub fn run(args: &[String], out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            return if e.use_stderr() {
                let _ = write!(err, "{e}");
                1
            } else {
                let _ = write!(out, "{e}");
                0
            };
        }
    };
    match dispatch(cli, out, err) {
        Ok(code) => code,
        Err(message) => {
            let _ = writeln!(err, "error: {message}");
            1
        }
    }
}

/// Entry point for the binary.
pub fn main_entry() -> i32 {
    let args: Vec<String> = std::env::args().collect();
    let mut stdout = std::io::stdout();
    let mut stderr = std::io::stderr();
    run(&args, &mut stdout, &mut stderr)
}

fn budget_from_env() -> Result<Budget, String> {
    let Ok(raw) = std::env::var("PO_ENGINE_BUDGET") else {
        return Ok(Budget::default());
    };
    let parts: Vec<&str> = raw.split(',').collect();
    let parse = |s: &str| -> Result<u64, String> {
        s.trim().parse().map_err(|_| format!("PO_ENGINE_BUDGET: {s:?} is not a number"))
    };
    match parts.as_slice() {
        [w] => {
            let w = parse(w)?;
            Ok(Budget::new(w as usize, w.saturating_mul(10)))
        }
        [w, n] => Ok(Budget::new(parse(w)? as usize, parse(n)?)),
        _ => Err("PO_ENGINE_BUDGET: expected `worlds` or `worlds,nodes`".into()),
    }
}

fn config() -> Result<DecisionConfig, String> {
    Ok(DecisionConfig { budget: budget_from_env()?, ..DecisionConfig::default() })
}

fn load(database: &PathBuf, query: &str) -> Result<(PoDatabase, Query), String> {
    let text = std::fs::read_to_string(database)
        .map_err(|e| format!("{}: {e}", database.display()))?;
    let db = database::parse_database(&text).map_err(|e| e.to_string())?;
    let q = query_text::parse_query(query).map_err(|e| format!("query: {e}"))?;
    q.check(&db.schema()).map_err(|e| format!("query: {e}"))?;
    Ok((db, q))
}

fn eval_posra(q: &Query, db: &PoDatabase) -> Result<EvalResult, String> {
    algebra::eval(q, db).map_err(|e| e.to_string())
}

fn dispatch(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, String> {
    match cli.command {
        Command::Eval { database, query, out: kind, limit } => {
            let (db, q) = load(&database, &query)?;
            match kind {
                EvalOut::Relation | EvalOut::Hasse => match eval_posra(&q, &db)? {
                    EvalResult::CompleteFailure => {
                        emit(out, &json!({"outcome": "complete-failure"}))?;
                        Ok(0)
                    }
                    EvalResult::Relation(r) => {
                        if kind == EvalOut::Hasse {
                            write_all(out, &database::relation_to_dot(&r))?;
                        } else {
                            emit(
                                out,
                                &json!({"outcome": "relation",
                                        "relation": database::relation_to_json(&r)}),
                            )?;
                        }
                        Ok(0)
                    }
                },
                EvalOut::Worlds => worlds_report(&q, &db, limit, out),
            }
        }
        Command::Worlds { database, query, limit } => {
            let (db, q) = load(&database, &query)?;
            worlds_report(&q, &db, limit, out)
        }
        Command::Poss { database, query, candidate } => {
            let (db, q) = load(&database, &query)?;
            let cfg = config()?;
            warn_static_bound(&q, &db, &cfg, err);
            let candidate = read_candidate(&candidate, &q, &db)?;
            let answer = decision::poss(&q, &db, &candidate, &cfg).map_err(|e| e.to_string())?;
            answer_report(&answer, out)
        }
        Command::Cert { database, query, candidate } => {
            let (db, q) = load(&database, &query)?;
            let cfg = config()?;
            warn_static_bound(&q, &db, &cfg, err);
            let candidate = read_candidate(&candidate, &q, &db)?;
            let answer = decision::cert(&q, &db, &candidate, &cfg).map_err(|e| e.to_string())?;
            answer_report(&answer, out)
        }
        Command::Analyze { database, query } => {
            let (db, q) = load(&database, &query)?;
            match eval_posra(&q, &db)? {
                EvalResult::CompleteFailure => {
                    emit(out, &json!({"outcome": "complete-failure"}))?;
                    Ok(0)
                }
                EvalResult::Relation(r) => {
                    let chains = order::min_chain_partition(&r);
                    let classes = order::ia_partition(&r);
                    let id_lists = |groups: &[Vec<crate::model::Id>]| -> Vec<Vec<String>> {
                        groups
                            .iter()
                            .map(|g| g.iter().map(|id| id.to_string()).collect())
                            .collect()
                    };
                    let db_width =
                        db.relations().map(|(_, r)| order::width(r)).max().unwrap_or(0);
                    let db_ia =
                        db.relations().map(|(_, r)| order::ia_width(r)).max().unwrap_or(0);
                    let report = json!({
                        "outcome": "relation",
                        "size": r.len(),
                        "width": chains.cardinality(),
                        "ia_width": classes.cardinality(),
                        "chain_partition": id_lists(&chains.chains),
                        "ia_partition": id_lists(&classes.classes),
                        "width_bound_lex": order::width_bound_lex(&q, db_width).ok(),
                        "ia_width_bound_noprod":
                            order::ia_width_bound_noprod(&q, db_ia, q.max_chain_const() as usize).ok(),
                    });
                    emit(out, &report)?;
                    Ok(0)
                }
            }
        }
        Command::Dedup { database, query } => {
            let (db, q) = load(&database, &query)?;
            match eval_posra(&q, &db)? {
                EvalResult::CompleteFailure => {
                    emit(out, &json!({"outcome": "complete-failure"}))?;
                    Ok(0)
                }
                EvalResult::Relation(r) => {
                    match dedup::dup_elim(&r) {
                        dedup::DedupOutcome::CompleteFailure => {
                            emit(out, &json!({"outcome": "complete-failure"}))?;
                        }
                        dedup::DedupOutcome::Relation(d) => {
                            emit(
                                out,
                                &json!({"outcome": "relation",
                                        "relation": database::relation_to_json(&d)}),
                            )?;
                        }
                    }
                    Ok(0)
                }
            }
        }
        Command::Gen { kind } => {
            let (instance, grid) = match kind {
                GenKind::ThreePart { elements, target } => {
                    (PartitionInstance::new(elements, target), false)
                }
                GenKind::Grid { elements, target } => {
                    (PartitionInstance::new(elements, target), true)
                }
            };
            let instance = instance.map_err(|e| e.to_string())?;
            let report = if grid {
                let (db, q, l) = testkit::gen_grid_instance(&instance);
                json!({
                    "database": serde_json::from_str::<serde_json::Value>(
                        &database::serialize_database(&db)).expect("valid json"),
                    "query": q.to_string(),
                    "candidate": world_to_json(&l),
                })
            } else {
                let (r, l) = testkit::gen_unary3partition(&instance);
                let mut db = PoDatabase::new();
                db.insert("R", r);
                json!({
                    "database": serde_json::from_str::<serde_json::Value>(
                        &database::serialize_database(&db)).expect("valid json"),
                    "query": "R",
                    "candidate": world_to_json(&l),
                })
            };
            emit(out, &report)?;
            Ok(0)
        }
    }
}

fn worlds_report(q: &Query, db: &PoDatabase, limit: Option<usize>, out: &mut dyn Write) -> Result<i32, String> {
    let mut budget = budget_from_env()?;
    if let Some(limit) = limit {
        budget.max_worlds = limit;
    }
    match eval_posra(q, db)? {
        EvalResult::CompleteFailure => {
            emit(out, &json!({"outcome": "complete-failure", "complete": true, "worlds": []}))?;
            Ok(0)
        }
        EvalResult::Relation(r) => {
            let e = r.possible_worlds(&budget);
            let worlds: Vec<serde_json::Value> = e.worlds.iter().map(world_to_json).collect();
            emit(
                out,
                &json!({"outcome": "worlds", "complete": e.complete, "worlds": worlds}),
            )?;
            Ok(if e.complete { 0 } else { 2 })
        }
    }
}

fn warn_static_bound(q: &Query, db: &PoDatabase, cfg: &DecisionConfig, err: &mut dyn Write) {
    let db_width = db.relations().map(|(_, r)| order::width(r)).max().unwrap_or(1);
    if let Ok(bound) = order::width_bound_lex(q, db_width) {
        if bound > cfg.width_threshold as u64 {
            let _ = writeln!(
                err,
                "warning: static width bound {bound} exceeds the DP threshold {}; \
                 the solver may fall back to brute force",
                cfg.width_threshold
            );
        }
    }
}

fn world_to_json(l: &ListRelation) -> serde_json::Value {
    serde_json::Value::Array(
        l.rows()
            .iter()
            .map(|t| {
                serde_json::Value::Array(
                    t.values()
                        .iter()
                        .map(|v| match v {
                            crate::model::DomainValue::Nat(n) => serde_json::Value::from(*n),
                            crate::model::DomainValue::Str(s) => serde_json::Value::from(s.clone()),
                        })
                        .collect(),
                )
            })
            .collect(),
    )
}

fn world_from_json(v: &serde_json::Value, arity: usize) -> Result<ListRelation, String> {
    let arr = v.as_array().ok_or_else(|| format!("candidate: expected an array, got {v}"))?;
    let mut rows = Vec::with_capacity(arr.len());
    for row in arr {
        let row = row.as_array().ok_or_else(|| format!("candidate row {row} is not an array"))?;
        let values = row
            .iter()
            .map(|v| match v {
                serde_json::Value::String(s) => Ok(crate::model::DomainValue::Str(s.clone())),
                serde_json::Value::Number(n) => n
                    .as_u64()
                    .map(crate::model::DomainValue::Nat)
                    .ok_or_else(|| format!("{n} is not a natural number")),
                other => Err(format!("{other} is not a domain value")),
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(TupleValue::new(values));
    }
    ListRelation::new(arity, rows).map_err(|e| format!("candidate: {e}"))
}

fn read_candidate(path: &PathBuf, q: &Query, db: &PoDatabase) -> Result<Candidate, String> {
    let text =
        std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| format!("candidate: {e}"))?;
    candidate_from_json(&value, q, db)
}

/// Decodes a JSON candidate against the query root: a list of tuples for
/// plain queries, a monoid literal for accumulation, an array of
/// key/value group rows for group-by.
pub fn candidate_from_json(
    value: &serde_json::Value,
    q: &Query,
    db: &PoDatabase,
) -> Result<Candidate, String> {
    let arity = q.check(&db.schema()).map_err(|e| e.to_string())?;
    match q {
        Query::Accum(acc, _) => {
            let element = registry::parse_element(acc, &value).map_err(|e| e.to_string())?;
            Ok(Candidate::Element(element))
        }
        Query::AccumGroupBy(acc, _, _) => {
            let arr = value
                .as_array()
                .ok_or_else(|| "candidate: expected an array of group rows".to_string())?;
            let mut rows = Vec::with_capacity(arr.len());
            for entry in arr {
                let key = entry
                    .get("key")
                    .ok_or_else(|| format!("group row {entry} lacks a key"))?;
                let key_list = world_from_json(&serde_json::Value::Array(vec![key.clone()]), 0)
                    .or_else(|_| {
                        // key is itself a tuple array
                        let wrapped = serde_json::Value::Array(vec![key.clone()]);
                        world_from_json(&wrapped, key.as_array().map_or(0, |a| a.len()))
                    })?;
                let value_lit = entry
                    .get("value")
                    .ok_or_else(|| format!("group row {entry} lacks a value"))?;
                let value = registry::parse_element(acc, value_lit).map_err(|e| e.to_string())?;
                rows.push(GroupRow { key: key_list.rows()[0].clone(), value });
            }
            rows.sort();
            Ok(Candidate::Grouped(rows))
        }
        _ => Ok(Candidate::World(world_from_json(&value, arity)?)),
    }
}

fn answer_report(answer: &Answer, out: &mut dyn Write) -> Result<i32, String> {
    let verdict = if answer.exact {
        serde_json::Value::Bool(answer.verdict)
    } else {
        serde_json::Value::Null
    };
    let report = json!({
        "verdict": verdict,
        "strategy": answer.strategy.to_string(),
        "exact": answer.exact,
        "witness": answer.witness.as_ref().map(world_to_json),
    });
    emit(out, &report)?;
    Ok(if answer.exact { 0 } else { 2 })
}

fn emit(out: &mut dyn Write, value: &serde_json::Value) -> Result<(), String> {
    writeln!(out, "{}", serde_json::to_string_pretty(value).expect("serializable"))
        .map_err(|e| e.to_string())
}

fn write_all(out: &mut dyn Write, text: &str) -> Result<(), String> {
    out.write_all(text.as_bytes()).map_err(|e| e.to_string())
}
