//! The JSON po-database file format.
//!
//! ```json
//! { "relations": { "Rest": {
//!     "arity": 2,
//!     "tuples": [ {"id": "0", "values": ["Gagnaire", "8"]} ],
//!     "order": [ ["0", "1"] ]
//! } } }
//! ```
//!
//! Values are JSON numbers (naturals) or strings; `order` lists pairs
//! below-then-above and may contain any set of pairs whose closure is a
//! strict partial order. An optional `attributes` array may name the
//! columns; it is validated and preserved but queries address attributes
//! by position.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::model::{DomainValue, Id, PoDatabase, PoRelation, RelationBuilder, TupleValue};

#[derive(Debug, Serialize, Deserialize)]
struct DatabaseFile {
    relations: BTreeMap<String, RelationFile>,
}

#[derive(Debug, Serialize, Deserialize)]
struct RelationFile {
    arity: usize,
    tuples: Vec<TupleFile>,
    #[serde(default)]
    order: Vec<(String, String)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    attributes: Option<Vec<String>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TupleFile {
    id: String,
    values: Vec<serde_json::Value>,
}

#[derive(Debug, thiserror::Error)]
pub enum DbError {
    #[error("database JSON: {0}")]
    Syntax(#[from] serde_json::Error),
    #[error("relation {relation}: tuple {id}: {message}")]
    Value { relation: String, id: String, message: String },
    #[error("relation {relation}: attributes list has {found} names for arity {arity}")]
    AttributeCount { relation: String, arity: usize, found: usize },
    #[error("relation {relation}: order pair [{a},{b}] references an undeclared identifier")]
    UnknownOrderId { relation: String, a: String, b: String },
    #[error("relation {relation}: {violations}")]
    Invalid { relation: String, violations: String },
}

fn value_from_json(v: &serde_json::Value) -> Result<DomainValue, String> {
    match v {
        serde_json::Value::String(s) => Ok(DomainValue::Str(s.clone())),
        serde_json::Value::Number(n) => n
            .as_u64()
            .map(DomainValue::Nat)
            .ok_or_else(|| format!("{n} is not a natural number")),
        other => Err(format!("{other} is neither a string nor a natural number")),
    }
}

fn value_to_json(v: &DomainValue) -> serde_json::Value {
    match v {
        DomainValue::Nat(n) => serde_json::Value::from(*n),
        DomainValue::Str(s) => serde_json::Value::from(s.clone()),
    }
}

/// Parses and validates a database document. Identifier strings are
/// interned per relation in order of first appearance.
pub fn parse_database(text: &str) -> Result<PoDatabase, DbError> {
    let file: DatabaseFile = serde_json::from_str(text)?;
    let mut db = PoDatabase::new();
    for (name, rel) in file.relations {
        if let Some(attrs) = &rel.attributes {
            if attrs.len() != rel.arity {
                return Err(DbError::AttributeCount {
                    relation: name,
                    arity: rel.arity,
                    found: attrs.len(),
                });
            }
        }
        let mut builder = RelationBuilder::new(rel.arity);
        let mut intern: BTreeMap<&str, u64> = BTreeMap::new();
        for (i, tuple) in rel.tuples.iter().enumerate() {
            let values = tuple
                .values
                .iter()
                .map(value_from_json)
                .collect::<Result<Vec<_>, _>>()
                .map_err(|message| DbError::Value {
                    relation: name.clone(),
                    id: tuple.id.clone(),
                    message,
                })?;
            intern.insert(tuple.id.as_str(), i as u64);
            builder.push_tuple(Id(i as u64), TupleValue::new(values));
        }
        for (a, b) in &rel.order {
            let (pa, pb) = match (intern.get(a.as_str()), intern.get(b.as_str())) {
                (Some(&pa), Some(&pb)) => (pa, pb),
                _ => {
                    return Err(DbError::UnknownOrderId {
                        relation: name,
                        a: a.clone(),
                        b: b.clone(),
                    });
                }
            };
            builder.push_edge(Id(pa), Id(pb));
        }
        let relation = builder.build().map_err(|violations| DbError::Invalid {
            relation: name.clone(),
            violations: violations
                .iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join("; "),
        })?;
        db.insert(name, relation);
    }
    Ok(db)
}

/// Serializes a relation in the file schema, writing cover edges.
pub fn relation_to_json(r: &PoRelation) -> serde_json::Value {
    serde_json::to_value(relation_file(r)).expect("serializable")
}

fn relation_file(r: &PoRelation) -> RelationFile {
    RelationFile {
        arity: r.arity(),
        tuples: (0..r.len())
            .map(|p| TupleFile {
                id: r.id_at(p).to_string(),
                values: r.tuple_at(p).values().iter().map(value_to_json).collect(),
            })
            .collect(),
        order: r
            .cover_edges()
            .iter()
            .map(|&(a, b)| {
                (r.id_at(a as usize).to_string(), r.id_at(b as usize).to_string())
            })
            .collect(),
        attributes: None,
    }
}

pub fn serialize_database(db: &PoDatabase) -> String {
    let file = DatabaseFile {
        relations: db
            .relations()
            .map(|(name, r)| (name.clone(), relation_file(r)))
            .collect(),
    };
    serde_json::to_string_pretty(&file).expect("serializable")
}

/// DOT rendering of the Hasse diagram, for external graph tools.
pub fn relation_to_dot(r: &PoRelation) -> String {
    let mut out = String::from("digraph hasse {\n  rankdir=BT;\n");
    for p in 0..r.len() {
        out.push_str(&format!(
            "  n{} [label=\"{}\"];\n",
            r.id_at(p),
            r.tuple_at(p).to_string().replace('"', "\\\"")
        ));
    }
    for &(a, b) in r.cover_edges() {
        out.push_str(&format!("  n{} -> n{};\n", r.id_at(a as usize), r.id_at(b as usize)));
    }
    out.push_str("}\n");
    out
}

/// Fig-1 sample database shipped with the crate docs.
pub const SAMPLE_DB: &str = include_str!("../../docs/fig1.json");
