//! Duplicate elimination over po-relations.
//!
//! Consolidating equal-valued tuple occurrences only makes sense when
//! every possible world can bring the duplicates together; the
//! value-equality quotient graph characterizes this: a cycle means
//! complete failure, acyclicity yields a duplicate-free po-relation whose
//! worlds are exactly the successful consolidations.

use std::collections::BTreeMap;

use crate::algebra::{self, EvalError, EvalResult, Query};
use crate::bits::BitMatrix;
use crate::model::{Id, ListRelation, PoDatabase, PoRelation, TupleValue};

/// The value-equality quotient: one node per distinct tuple value, an
/// edge (c1, c2) when some occurrence in c1 is below some occurrence in
/// c2.
#[derive(Debug, Clone)]
pub struct QuotientGraph {
    /// Classes sorted by least member identifier.
    pub classes: Vec<(TupleValue, Vec<Id>)>,
    /// Directed edges between class indices; no self-loops.
    pub edges: std::collections::BTreeSet<(usize, usize)>,
}

#[derive(Debug, Clone)]
pub enum DedupOutcome {
    Relation(PoRelation),
    CompleteFailure,
}

impl DedupOutcome {
    pub fn into_relation(self) -> Option<PoRelation> {
        match self {
            DedupOutcome::Relation(r) => Some(r),
            DedupOutcome::CompleteFailure => None,
        }
    }

    pub fn failed(&self) -> bool {
        matches!(self, DedupOutcome::CompleteFailure)
    }
}

pub fn value_equality_quotient(r: &PoRelation) -> QuotientGraph {
    let mut by_value: BTreeMap<&TupleValue, Vec<usize>> = BTreeMap::new();
    for pos in 0..r.len() {
        by_value.entry(r.tuple_at(pos)).or_default().push(pos);
    }
    let mut classes: Vec<(TupleValue, Vec<usize>)> = by_value
        .into_iter()
        .map(|(v, ps)| (v.clone(), ps))
        .collect();
    // Deterministic representative: order classes by least identifier.
    classes.sort_by_key(|(_, ps)| r.id_at(ps[0]));
    let mut class_of = vec![0usize; r.len()];
    for (ci, (_, ps)) in classes.iter().enumerate() {
        for &p in ps {
            class_of[p] = ci;
        }
    }
    let mut edges = std::collections::BTreeSet::new();
    for i in 0..r.len() {
        for j in r.above_matrix().iter_row(i) {
            if class_of[i] != class_of[j] {
                edges.insert((class_of[i], class_of[j]));
            }
        }
    }
    QuotientGraph {
        classes: classes
            .into_iter()
            .map(|(v, ps)| (v, ps.into_iter().map(|p| r.id_at(p)).collect()))
            .collect(),
        edges,
    }
}

/// Consolidates duplicates: complete failure iff the quotient has a
/// cycle, otherwise a po-relation with one occurrence per distinct value
/// ordered by the closure of the quotient edges. The representative of
/// each class is its least identifier.
pub fn dup_elim(r: &PoRelation) -> DedupOutcome {
    let q = value_equality_quotient(r);
    let n = q.classes.len();
    let mut closure = BitMatrix::new(n);
    for &(a, b) in &q.edges {
        closure.set(a, b);
    }
    closure.transitive_close();
    if (0..n).any(|i| closure.get(i, i)) {
        return DedupOutcome::CompleteFailure;
    }
    // Class representatives keep their original identifiers, which are
    // distinct and ascending by construction of the classes.
    let mut entries: Vec<(Id, TupleValue, usize)> = q
        .classes
        .iter()
        .enumerate()
        .map(|(ci, (v, ids))| (ids[0], v.clone(), ci))
        .collect();
    entries.sort_by_key(|(id, _, _)| *id);
    let mut above = BitMatrix::new(n);
    for (i, &(_, _, ci)) in entries.iter().enumerate() {
        for (j, &(_, _, cj)) in entries.iter().enumerate() {
            if closure.get(ci, cj) {
                above.set(i, j);
            }
        }
    }
    let ids = entries.iter().map(|(id, _, _)| *id).collect();
    let tuples = entries.into_iter().map(|(_, v, _)| v).collect();
    DedupOutcome::Relation(PoRelation::from_closure(r.arity(), ids, tuples, above))
}

/// POSS for a query rooted at duplicate elimination: the candidate must be
/// duplicate-free with exactly the value set of the consolidated result;
/// it is possible iff adding its consecutive-pair constraints keeps the
/// consolidated order acyclic.
pub fn poss_dupelim(q: &Query, db: &PoDatabase, l: &ListRelation) -> Result<bool, EvalError> {
    let Query::DupElim(inner) = q else {
        return Err(EvalError::AccumulationNotAtRoot);
    };
    let dd = match algebra::eval(inner, db)? {
        EvalResult::CompleteFailure => return Ok(false),
        EvalResult::Relation(r) => match dup_elim(&r) {
            DedupOutcome::CompleteFailure => return Ok(false),
            DedupOutcome::Relation(dd) => dd,
        },
    };
    Ok(poss_on_dedup_result(&dd, l))
}

/// The acyclicity test on an already consolidated relation.
pub fn poss_on_dedup_result(dd: &PoRelation, l: &ListRelation) -> bool {
    if l.len() != dd.len() || l.arity() != dd.arity() {
        return false;
    }
    // Each value occurs exactly once on both sides or we reject.
    let mut pos_of_value: BTreeMap<&TupleValue, usize> = BTreeMap::new();
    for p in 0..dd.len() {
        pos_of_value.insert(dd.tuple_at(p), p);
    }
    let mut matched = Vec::with_capacity(l.len());
    let mut seen = std::collections::BTreeSet::new();
    for row in l.rows() {
        match pos_of_value.get(row) {
            Some(&p) if seen.insert(p) => matched.push(p),
            _ => return false,
        }
    }
    // Add the consecutive-pair edges of l and test for a cycle.
    let n = dd.len();
    let mut closure = BitMatrix::new(n);
    for i in 0..n {
        for j in dd.above_matrix().iter_row(i) {
            closure.set(i, j);
        }
    }
    for w in matched.windows(2) {
        closure.set(w[0], w[1]);
    }
    closure.transitive_close();
    (0..n).all(|i| !closure.get(i, i))
}

/// CERT for a query rooted at duplicate elimination: delegates to the
/// plain-query certainty test on the consolidated relation.
pub fn cert_dupelim(q: &Query, db: &PoDatabase, l: &ListRelation) -> Result<bool, EvalError> {
    let Query::DupElim(inner) = q else {
        return Err(EvalError::AccumulationNotAtRoot);
    };
    let dd = match algebra::eval(inner, db)? {
        EvalResult::CompleteFailure => return Ok(false),
        EvalResult::Relation(r) => match dup_elim(&r) {
            DedupOutcome::CompleteFailure => return Ok(false),
            DedupOutcome::Relation(dd) => dd,
        },
    };
    Ok(crate::decision::cert_posra(&dd, l))
}
