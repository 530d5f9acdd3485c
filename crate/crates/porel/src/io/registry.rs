//! Built-in accumulator registry for the query language, and the parsing
//! of candidate accumulation results into monoid elements.

use std::sync::Arc;

use crate::accum::{self, Accumulator, MonoidValue};
use crate::model::{DomainValue, TupleValue};

/// Resolves an accumulator name. Fixed names: `concat` (word
/// concatenation of attribute 1), `sum` (integer sum of attribute 1),
/// `tuples` (list concatenation), `balanced` (the balanced-word DFA
/// monoid). Parameterized: `topK` and `atK` for a positional digit K.
pub fn lookup(name: &str) -> Option<Arc<Accumulator>> {
    match name {
        "concat" => return Some(Arc::new(accum::string_concat(1))),
        "sum" => return Some(Arc::new(accum::int_sum(1))),
        "tuples" => return Some(Arc::new(accum::tuple_concat())),
        "balanced" => return Some(Arc::new(accum::balanced_word_accumulator())),
        _ => {}
    }
    if let Some(attr) = name.strip_prefix("concat").and_then(|d| d.parse::<usize>().ok()) {
        return (attr >= 1).then(|| Arc::new(accum::string_concat(attr)));
    }
    if let Some(attr) = name.strip_prefix("sum").and_then(|d| d.parse::<usize>().ok()) {
        return (attr >= 1).then(|| Arc::new(accum::int_sum(attr)));
    }
    if let Some(k) = name.strip_prefix("top").and_then(|d| d.parse::<usize>().ok()) {
        return Some(Arc::new(accum::top_k(k)));
    }
    if let Some(k) = name.strip_prefix("at").and_then(|d| d.parse::<usize>().ok()) {
        return Some(Arc::new(accum::select_at(k)));
    }
    None
}

#[derive(Debug, thiserror::Error)]
#[error("candidate for accumulator {accumulator}: {message}")]
pub struct CandidateError {
    pub accumulator: String,
    pub message: String,
}

fn tuple_from_json(v: &serde_json::Value) -> Result<TupleValue, String> {
    let arr = v.as_array().ok_or_else(|| format!("{v} is not a tuple array"))?;
    let values = arr
        .iter()
        .map(|v| match v {
            serde_json::Value::String(s) => Ok(DomainValue::Str(s.clone())),
            serde_json::Value::Number(n) => {
                n.as_u64().map(DomainValue::Nat).ok_or_else(|| format!("{n} is not a natural"))
            }
            other => Err(format!("{other} is not a domain value")),
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(TupleValue::new(values))
}

/// Parses a monoid-specific candidate literal: a string for word
/// concatenation, an integer for sums, an array of tuples for list
/// concatenation and the top-k/select-at-k encodings, and the acceptance
/// token (a boolean, or `"accept"`/`"reject"`) for the balanced-word
/// monoid.
pub fn parse_element(acc: &Accumulator, json: &serde_json::Value) -> Result<MonoidValue, CandidateError> {
    let fail = |message: String| CandidateError { accumulator: acc.key().to_string(), message };
    match acc.monoid().name() {
        "string-concat" => json
            .as_str()
            .map(|s| MonoidValue::Str(s.to_string()))
            .ok_or_else(|| fail(format!("expected a string, got {json}"))),
        "integer-sum" => json
            .as_i64()
            .map(MonoidValue::Int)
            .ok_or_else(|| fail(format!("expected an integer, got {json}"))),
        "tuple-concat" => {
            let arr = json
                .as_array()
                .ok_or_else(|| fail(format!("expected an array of tuples, got {json}")))?;
            let rows = arr
                .iter()
                .map(tuple_from_json)
                .collect::<Result<Vec<_>, _>>()
                .map_err(fail)?;
            Ok(MonoidValue::Rows(rows))
        }
        "dfa-transition" => {
            let accepted = match json {
                serde_json::Value::Bool(b) => *b,
                serde_json::Value::String(s) if s == "accept" => true,
                serde_json::Value::String(s) if s == "reject" => false,
                other => return Err(fail(format!("expected an acceptance token, got {other}"))),
            };
            Ok(if accepted {
                accum::balanced_accepting_value()
            } else {
                accum::balanced_rejecting_value()
            })
        }
        "first-wins" => match json.as_str() {
            Some("top") => Ok(MonoidValue::Mark(Some(true))),
            Some("bottom") => Ok(MonoidValue::Mark(Some(false))),
            Some("neutral") => Ok(MonoidValue::Mark(None)),
            _ => Err(fail(format!("expected top/bottom/neutral, got {json}"))),
        },
        other => Err(fail(format!("no candidate syntax for monoid {other}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_and_parameterized_names() {
        assert_eq!(lookup("concat").unwrap().key(), "concat");
        assert_eq!(lookup("sum").unwrap().key(), "sum");
        assert_eq!(lookup("concat2").unwrap().key(), "concat2");
        assert_eq!(lookup("tuples").unwrap().key(), "tuples");
        assert_eq!(lookup("balanced").unwrap().key(), "balanced");
        assert_eq!(lookup("top3").unwrap().key(), "top3");
        assert_eq!(lookup("at2").unwrap().key(), "at2");
        assert!(lookup("nope").is_none());
        assert!(lookup("topx").is_none());
    }

    #[test]
    fn candidate_literals() {
        let concat = lookup("concat").unwrap();
        assert_eq!(
            parse_element(&concat, &serde_json::json!("ab")).unwrap(),
            MonoidValue::Str("ab".into())
        );
        let sum = lookup("sum").unwrap();
        assert_eq!(
            parse_element(&sum, &serde_json::json!(-3)).unwrap(),
            MonoidValue::Int(-3)
        );
        let top = lookup("top2").unwrap();
        assert_eq!(
            parse_element(&top, &serde_json::json!([["a"], [4]])).unwrap(),
            MonoidValue::Rows(vec![
                TupleValue::new(vec![DomainValue::Str("a".into())]),
                TupleValue::new(vec![DomainValue::Nat(4)]),
            ])
        );
        let balanced = lookup("balanced").unwrap();
        assert_eq!(
            parse_element(&balanced, &serde_json::json!(true)).unwrap(),
            accum::balanced_accepting_value()
        );
        assert!(parse_element(&balanced, &serde_json::json!(7)).is_err());
    }
}
