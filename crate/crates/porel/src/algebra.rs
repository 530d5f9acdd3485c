//! Positive relational algebra over po-relations.
//!
//! Each operator consumes and produces po-relations; results are unique up
//! to isomorphism, so identifier bookkeeping (side bits for union, a
//! pairing function for products) is an internal detail. Evaluation of a
//! query over a po-database is bottom-up and polynomial for a fixed query.

use std::sync::Arc;

use crate::accum::Accumulator;
use crate::bits::BitMatrix;
use crate::dedup::{self, DedupOutcome};
use crate::model::{DomainValue, Id, PoDatabase, PoRelation, TupleValue};

/// Boolean tuple predicate over equalities and disequalities of
/// attributes (1-based) and constants.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Predicate {
    True,
    False,
    Atom { lhs: usize, op: CmpOp, rhs: Operand },
    And(Box<Predicate>, Box<Predicate>),
    Or(Box<Predicate>, Box<Predicate>),
    Not(Box<Predicate>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Eq,
    Ne,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Operand {
    Attr(usize),
    Const(DomainValue),
}

impl Predicate {
    pub fn eq_attr(i: usize, j: usize) -> Predicate {
        Predicate::Atom { lhs: i, op: CmpOp::Eq, rhs: Operand::Attr(j) }
    }

    pub fn eq_const(i: usize, v: impl Into<DomainValue>) -> Predicate {
        Predicate::Atom { lhs: i, op: CmpOp::Eq, rhs: Operand::Const(v.into()) }
    }

    pub fn ne_const(i: usize, v: impl Into<DomainValue>) -> Predicate {
        Predicate::Atom { lhs: i, op: CmpOp::Ne, rhs: Operand::Const(v.into()) }
    }

    /// Largest attribute index mentioned; 0 when none.
    pub fn max_attr(&self) -> usize {
        match self {
            Predicate::True | Predicate::False => 0,
            Predicate::Atom { lhs, rhs, .. } => match rhs {
                Operand::Attr(j) => (*lhs).max(*j),
                Operand::Const(_) => *lhs,
            },
            Predicate::And(a, b) | Predicate::Or(a, b) => a.max_attr().max(b.max_attr()),
            Predicate::Not(a) => a.max_attr(),
        }
    }

    pub fn eval(&self, t: &TupleValue) -> Result<bool, EvalError> {
        match self {
            Predicate::True => Ok(true),
            Predicate::False => Ok(false),
            Predicate::Atom { lhs, op, rhs } => {
                let left = t.attr(*lhs).ok_or(EvalError::AttrOutOfRange {
                    attr: *lhs,
                    arity: t.arity(),
                })?;
                let equal = match rhs {
                    Operand::Attr(j) => {
                        let right = t.attr(*j).ok_or(EvalError::AttrOutOfRange {
                            attr: *j,
                            arity: t.arity(),
                        })?;
                        left == right
                    }
                    Operand::Const(v) => left == v,
                };
                Ok(match op {
                    CmpOp::Eq => equal,
                    CmpOp::Ne => !equal,
                })
            }
            Predicate::And(a, b) => Ok(a.eval(t)? && b.eval(t)?),
            Predicate::Or(a, b) => Ok(a.eval(t)? || b.eval(t)?),
            Predicate::Not(a) => Ok(!a.eval(t)?),
        }
    }
}

impl std::fmt::Display for Predicate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Predicate::True => write!(f, "true"),
            Predicate::False => write!(f, "false"),
            Predicate::Atom { lhs, op, rhs } => {
                let op = match op {
                    CmpOp::Eq => "=",
                    CmpOp::Ne => "!=",
                };
                match rhs {
                    Operand::Attr(j) => write!(f, ".{lhs} {op} .{j}"),
                    Operand::Const(v) => write!(f, ".{lhs} {op} {v}"),
                }
            }
            Predicate::And(a, b) => write!(f, "({a} and {b})"),
            Predicate::Or(a, b) => write!(f, "({a} or {b})"),
            Predicate::Not(a) => write!(f, "not ({a})"),
        }
    }
}

/// Query tree. Accumulation (plain or with group-by) may only appear at
/// the root; [`Query::check`] enforces this along with arity consistency.
#[derive(Debug, Clone)]
pub enum Query {
    Relation(String),
    Select(Predicate, Box<Query>),
    Project(Vec<usize>, Box<Query>),
    Union(Box<Query>, Box<Query>),
    ProdDir(Box<Query>, Box<Query>),
    ProdLex(Box<Query>, Box<Query>),
    Concat(Box<Query>, Box<Query>),
    Singleton(TupleValue),
    ChainConst(u64),
    DupElim(Box<Query>),
    Accum(Arc<Accumulator>, Box<Query>),
    AccumGroupBy(Arc<Accumulator>, Vec<usize>, Box<Query>),
}

impl PartialEq for Query {
    fn eq(&self, other: &Self) -> bool {
        use Query::*;
        match (self, other) {
            (Relation(a), Relation(b)) => a == b,
            (Select(p, a), Select(q, b)) => p == q && a == b,
            (Project(x, a), Project(y, b)) => x == y && a == b,
            (Union(a, b), Union(c, d))
            | (ProdDir(a, b), ProdDir(c, d))
            | (ProdLex(a, b), ProdLex(c, d))
            | (Concat(a, b), Concat(c, d)) => a == c && b == d,
            (Singleton(a), Singleton(b)) => a == b,
            (ChainConst(a), ChainConst(b)) => a == b,
            (DupElim(a), DupElim(b)) => a == b,
            (Accum(x, a), Accum(y, b)) => x.key() == y.key() && a == b,
            (AccumGroupBy(x, i, a), AccumGroupBy(y, j, b)) => {
                x.key() == y.key() && i == j && a == b
            }
            _ => false,
        }
    }
}

impl Eq for Query {}

impl Query {
    /// Number of AST nodes; the |Q| of the static width bounds.
    pub fn symbol_count(&self) -> usize {
        use Query::*;
        match self {
            Relation(_) | Singleton(_) | ChainConst(_) => 1,
            Select(_, a) | Project(_, a) | DupElim(a) | Accum(_, a) | AccumGroupBy(_, _, a) => {
                1 + a.symbol_count()
            }
            Union(a, b) | ProdDir(a, b) | ProdLex(a, b) | Concat(a, b) => {
                1 + a.symbol_count() + b.symbol_count()
            }
        }
    }

    pub fn is_dir_free(&self) -> bool {
        use Query::*;
        match self {
            ProdDir(_, _) => false,
            Relation(_) | Singleton(_) | ChainConst(_) => true,
            Select(_, a) | Project(_, a) | DupElim(a) | Accum(_, a) | AccumGroupBy(_, _, a) => {
                a.is_dir_free()
            }
            Union(a, b) | ProdLex(a, b) | Concat(a, b) => a.is_dir_free() && b.is_dir_free(),
        }
    }

    /// Free of both products (and of concatenation, which a lexicographic
    /// product can express).
    pub fn is_product_free(&self) -> bool {
        use Query::*;
        match self {
            ProdDir(_, _) | ProdLex(_, _) | Concat(_, _) => false,
            Relation(_) | Singleton(_) | ChainConst(_) => true,
            Select(_, a) | Project(_, a) | DupElim(a) | Accum(_, a) | AccumGroupBy(_, _, a) => {
                a.is_product_free()
            }
            Union(a, b) => a.is_product_free() && b.is_product_free(),
        }
    }

    /// Largest constant-chain length appearing in the query.
    pub fn max_chain_const(&self) -> u64 {
        use Query::*;
        match self {
            ChainConst(n) => *n,
            Relation(_) | Singleton(_) => 0,
            Select(_, a) | Project(_, a) | DupElim(a) | Accum(_, a) | AccumGroupBy(_, _, a) => {
                a.max_chain_const()
            }
            Union(a, b) | ProdDir(a, b) | ProdLex(a, b) | Concat(a, b) => {
                a.max_chain_const().max(b.max_chain_const())
            }
        }
    }

    /// Validates well-formedness against a schema and returns the arity of
    /// the query result (for accumulation roots, of the inner query).
    pub fn check(&self, schema: &std::collections::BTreeMap<String, usize>) -> Result<usize, EvalError> {
        self.check_inner(schema, true)
    }

    fn check_inner(
        &self,
        schema: &std::collections::BTreeMap<String, usize>,
        root: bool,
    ) -> Result<usize, EvalError> {
        use Query::*;
        match self {
            Relation(name) => schema
                .get(name)
                .copied()
                .ok_or_else(|| EvalError::UnknownRelation(name.clone())),
            Singleton(t) => Ok(t.arity()),
            ChainConst(_) => Ok(1),
            Select(p, a) => {
                let arity = a.check_inner(schema, false)?;
                if p.max_attr() > arity {
                    return Err(EvalError::AttrOutOfRange { attr: p.max_attr(), arity });
                }
                Ok(arity)
            }
            Project(attrs, a) => {
                let arity = a.check_inner(schema, false)?;
                for &attr in attrs {
                    if attr == 0 || attr > arity {
                        return Err(EvalError::AttrOutOfRange { attr, arity });
                    }
                }
                Ok(attrs.len())
            }
            Union(a, b) | Concat(a, b) => {
                let (x, y) = (a.check_inner(schema, false)?, b.check_inner(schema, false)?);
                if x != y {
                    return Err(EvalError::ArityMismatch { left: x, right: y });
                }
                Ok(x)
            }
            ProdDir(a, b) | ProdLex(a, b) => {
                Ok(a.check_inner(schema, false)? + b.check_inner(schema, false)?)
            }
            DupElim(a) => a.check_inner(schema, false),
            Accum(acc, a) => {
                if !root {
                    return Err(EvalError::AccumulationNotAtRoot);
                }
                let arity = a.check_inner(schema, false)?;
                if acc.min_arity() > arity {
                    return Err(EvalError::AttrOutOfRange { attr: acc.min_arity(), arity });
                }
                Ok(arity)
            }
            AccumGroupBy(acc, attrs, a) => {
                if !root {
                    return Err(EvalError::AccumulationNotAtRoot);
                }
                let arity = a.check_inner(schema, false)?;
                for &attr in attrs {
                    if attr == 0 || attr > arity {
                        return Err(EvalError::AttrOutOfRange { attr, arity });
                    }
                }
                if acc.min_arity() > arity {
                    return Err(EvalError::AttrOutOfRange { attr: acc.min_arity(), arity });
                }
                Ok(arity)
            }
        }
    }
}

impl std::fmt::Display for Query {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        use Query::*;
        match self {
            Relation(name) => write!(f, "{name}"),
            Select(p, a) => write!(f, "select {p} ({a})"),
            Project(attrs, a) => {
                write!(f, "project ")?;
                for (i, attr) in attrs.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{attr}")?;
                }
                write!(f, " ({a})")
            }
            Union(a, b) => write!(f, "({a} union {b})"),
            ProdDir(a, b) => write!(f, "({a} dirprod {b})"),
            ProdLex(a, b) => write!(f, "({a} lexprod {b})"),
            Concat(a, b) => write!(f, "({a} concat {b})"),
            Singleton(t) => {
                write!(f, "singleton(")?;
                for (i, v) in t.values().iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{v}")?;
                }
                write!(f, ")")
            }
            ChainConst(n) => write!(f, "chain({n})"),
            DupElim(a) => write!(f, "dupelim({a})"),
            Accum(acc, a) => write!(f, "accum {} ({a})", acc.key()),
            AccumGroupBy(acc, attrs, a) => {
                write!(f, "accumgby {} ", acc.key())?;
                for (i, attr) in attrs.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{attr}")?;
                }
                write!(f, " ({a})")
            }
        }
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("unknown relation {0}")]
    UnknownRelation(String),
    #[error("attribute .{attr} out of range for arity {arity}")]
    AttrOutOfRange { attr: usize, arity: usize },
    #[error("arity mismatch: {left} vs {right}")]
    ArityMismatch { left: usize, right: usize },
    #[error("accumulation is only allowed at the query root")]
    AccumulationNotAtRoot,
}

/// Evaluation outcome: a po-relation, or the empty world set produced by a
/// failed duplicate elimination. Complete failure propagates through every
/// operator above it.
#[derive(Debug, Clone)]
pub enum EvalResult {
    Relation(PoRelation),
    CompleteFailure,
}

impl EvalResult {
    pub fn into_relation(self) -> Option<PoRelation> {
        match self {
            EvalResult::Relation(r) => Some(r),
            EvalResult::CompleteFailure => None,
        }
    }

    pub fn as_relation(&self) -> Option<&PoRelation> {
        match self {
            EvalResult::Relation(r) => Some(r),
            EvalResult::CompleteFailure => None,
        }
    }
}

// Identifier bookkeeping. Union tags a side bit, products pair the two
// component identifiers; operands are renumbered first when their raw
// identifiers would overflow the encoding.

const PAIR_LIMIT: u64 = 1 << 31;
const SIDE_LIMIT: u64 = 1 << 62;

fn szudzik(a: u64, b: u64) -> u64 {
    debug_assert!(a < PAIR_LIMIT && b < PAIR_LIMIT);
    if a >= b {
        a * a + a + b
    } else {
        a + b * b
    }
}

fn compacted_for(r: &PoRelation, limit: u64) -> std::borrow::Cow<'_, PoRelation> {
    if r.max_id() >= limit {
        std::borrow::Cow::Owned(r.compact())
    } else {
        std::borrow::Cow::Borrowed(r)
    }
}

/// Restriction of a po-relation to a subset of its internal positions
/// (which must be ascending).
pub(crate) fn restrict(r: &PoRelation, kept: &[usize]) -> PoRelation {
    debug_assert!(kept.windows(2).all(|w| w[0] < w[1]));
    let ids = kept.iter().map(|&p| r.id_at(p)).collect();
    let tuples = kept.iter().map(|&p| r.tuple_at(p).clone()).collect();
    let mut above = BitMatrix::new(kept.len());
    for (ni, &oi) in kept.iter().enumerate() {
        for (nj, &oj) in kept.iter().enumerate() {
            if r.lt(oi, oj) {
                above.set(ni, nj);
            }
        }
    }
    PoRelation::from_closure(r.arity(), ids, tuples, above)
}

/// Selection: restriction to the identifiers whose tuple satisfies the
/// predicate; the order is restricted alongside.
pub fn op_select(p: &Predicate, r: &PoRelation) -> Result<PoRelation, EvalError> {
    if p.max_attr() > r.arity() {
        return Err(EvalError::AttrOutOfRange { attr: p.max_attr(), arity: r.arity() });
    }
    let mut kept = Vec::new();
    for pos in 0..r.len() {
        if p.eval(r.tuple_at(pos))? {
            kept.push(pos);
        }
    }
    Ok(restrict(r, &kept))
}

/// Projection: remaps tuple values (duplicating and reordering attributes
/// is allowed), keeps identifiers and order untouched.
pub fn op_project(attrs: &[usize], r: &PoRelation) -> Result<PoRelation, EvalError> {
    for &attr in attrs {
        if attr == 0 || attr > r.arity() {
            return Err(EvalError::AttrOutOfRange { attr, arity: r.arity() });
        }
    }
    let tuples = (0..r.len())
        .map(|pos| {
            let t = r.tuple_at(pos);
            TupleValue::new(attrs.iter().map(|&a| t.attr(a).unwrap().clone()).collect())
        })
        .collect();
    Ok(PoRelation::from_closure(
        attrs.len(),
        r.ids().to_vec(),
        tuples,
        r.above_matrix().clone(),
    ))
}

/// Union: parallel composition after disjoint renaming. No comparability
/// across the two sides.
pub fn op_union(r1: &PoRelation, r2: &PoRelation) -> Result<PoRelation, EvalError> {
    if r1.arity() != r2.arity() {
        return Err(EvalError::ArityMismatch { left: r1.arity(), right: r2.arity() });
    }
    let r1 = compacted_for(r1, SIDE_LIMIT);
    let r2 = compacted_for(r2, SIDE_LIMIT);
    let n1 = r1.len();
    let n = n1 + r2.len();
    // Left side gets even identifiers, right side odd; each side stays
    // ascending, so a merge keeps the whole list sorted.
    let mut entries: Vec<(Id, TupleValue, bool, usize)> = Vec::with_capacity(n);
    for pos in 0..n1 {
        entries.push((Id(r1.id_at(pos).0 * 2), r1.tuple_at(pos).clone(), false, pos));
    }
    for pos in 0..r2.len() {
        entries.push((Id(r2.id_at(pos).0 * 2 + 1), r2.tuple_at(pos).clone(), true, pos));
    }
    entries.sort_by_key(|(id, _, _, _)| *id);
    let mut above = BitMatrix::new(n);
    for (i, &(_, _, side_i, pos_i)) in entries.iter().enumerate() {
        for (j, &(_, _, side_j, pos_j)) in entries.iter().enumerate() {
            if side_i == side_j {
                let side = if side_i { &r2 } else { &r1 };
                if side.lt(pos_i, pos_j) {
                    above.set(i, j);
                }
            }
        }
    }
    let ids = entries.iter().map(|(id, _, _, _)| *id).collect();
    let tuples = entries.into_iter().map(|(_, t, _, _)| t).collect();
    Ok(PoRelation::from_closure(r1.arity(), ids, tuples, above))
}

fn product(r1: &PoRelation, r2: &PoRelation, lex: bool) -> PoRelation {
    let r1 = compacted_for(r1, PAIR_LIMIT);
    let r2 = compacted_for(r2, PAIR_LIMIT);
    let mut entries: Vec<(Id, usize, usize)> = Vec::with_capacity(r1.len() * r2.len());
    for p1 in 0..r1.len() {
        for p2 in 0..r2.len() {
            entries.push((Id(szudzik(r1.id_at(p1).0, r2.id_at(p2).0)), p1, p2));
        }
    }
    entries.sort_by_key(|(id, _, _)| *id);
    let n = entries.len();
    let mut above = BitMatrix::new(n);
    for (i, &(_, a, b)) in entries.iter().enumerate() {
        for (j, &(_, c, d)) in entries.iter().enumerate() {
            // Direct product is the product order: componentwise ≤ with at
            // least one strict step.
            let lt = if lex {
                r1.lt(a, c) || (a == c && r2.lt(b, d))
            } else {
                (a == c || r1.lt(a, c))
                    && (b == d || r2.lt(b, d))
                    && !(a == c && b == d)
            };
            if lt {
                above.set(i, j);
            }
        }
    }
    let tuples = entries
        .iter()
        .map(|&(_, a, b)| {
            let mut values = r1.tuple_at(a).values().to_vec();
            values.extend(r2.tuple_at(b).values().iter().cloned());
            TupleValue::new(values)
        })
        .collect();
    let ids = entries.into_iter().map(|(id, _, _)| id).collect();
    PoRelation::from_closure(r1.arity() + r2.arity(), ids, tuples, above)
}

/// Direct product: pairs compare only when both components compare the
/// same way.
pub fn op_prod_dir(r1: &PoRelation, r2: &PoRelation) -> PoRelation {
    product(r1, r2, false)
}

/// Lexicographic (ordinal) product.
pub fn op_prod_lex(r1: &PoRelation, r2: &PoRelation) -> PoRelation {
    product(r1, r2, true)
}

/// Concatenation: series composition, every occurrence of the first
/// relation below every occurrence of the second.
pub fn op_concat(r1: &PoRelation, r2: &PoRelation) -> Result<PoRelation, EvalError> {
    if r1.arity() != r2.arity() {
        return Err(EvalError::ArityMismatch { left: r1.arity(), right: r2.arity() });
    }
    let r1 = compacted_for(r1, SIDE_LIMIT);
    let r2 = compacted_for(r2, SIDE_LIMIT);
    let n1 = r1.len();
    let n = n1 + r2.len();
    let mut entries: Vec<(Id, TupleValue, bool, usize)> = Vec::with_capacity(n);
    for pos in 0..n1 {
        entries.push((Id(r1.id_at(pos).0 * 2), r1.tuple_at(pos).clone(), false, pos));
    }
    for pos in 0..r2.len() {
        entries.push((Id(r2.id_at(pos).0 * 2 + 1), r2.tuple_at(pos).clone(), true, pos));
    }
    entries.sort_by_key(|(id, _, _, _)| *id);
    let mut above = BitMatrix::new(n);
    for (i, &(_, _, side_i, pos_i)) in entries.iter().enumerate() {
        for (j, &(_, _, side_j, pos_j)) in entries.iter().enumerate() {
            let lt = match (side_i, side_j) {
                (false, true) => true,
                (false, false) => r1.lt(pos_i, pos_j),
                (true, true) => r2.lt(pos_i, pos_j),
                (true, false) => false,
            };
            if lt {
                above.set(i, j);
            }
        }
    }
    let ids = entries.iter().map(|(id, _, _, _)| *id).collect();
    let tuples = entries.into_iter().map(|(_, t, _, _)| t).collect();
    Ok(PoRelation::from_closure(r1.arity(), ids, tuples, above))
}

pub fn const_singleton(t: TupleValue) -> PoRelation {
    PoRelation::singleton(t)
}

/// The constant chain `[≤n]`: total order over the values 1..=n, arity 1.
pub fn const_chain(n: u64) -> PoRelation {
    let rows = (1..=n).map(|i| TupleValue::new(vec![DomainValue::Nat(i)])).collect();
    PoRelation::total_order(1, rows).expect("arity-1 rows")
}

/// Bottom-up evaluation of a PosRA query (accumulation roots are handled
/// by the decision module and rejected here). A failed duplicate
/// elimination anywhere yields `CompleteFailure` for the whole query.
pub fn eval(q: &Query, db: &PoDatabase) -> Result<EvalResult, EvalError> {
    use Query::*;
    let result = match q {
        Relation(name) => EvalResult::Relation(
            db.get(name)
                .ok_or_else(|| EvalError::UnknownRelation(name.clone()))?
                .clone(),
        ),
        Singleton(t) => EvalResult::Relation(const_singleton(t.clone())),
        ChainConst(n) => EvalResult::Relation(const_chain(*n)),
        Select(p, a) => match eval(a, db)? {
            EvalResult::Relation(r) => EvalResult::Relation(op_select(p, &r)?),
            failure => failure,
        },
        Project(attrs, a) => match eval(a, db)? {
            EvalResult::Relation(r) => EvalResult::Relation(op_project(attrs, &r)?),
            failure => failure,
        },
        Union(a, b) => eval_binary(a, b, db, |x, y| op_union(x, y))?,
        Concat(a, b) => eval_binary(a, b, db, |x, y| op_concat(x, y))?,
        ProdDir(a, b) => eval_binary(a, b, db, |x, y| Ok(op_prod_dir(x, y)))?,
        ProdLex(a, b) => eval_binary(a, b, db, |x, y| Ok(op_prod_lex(x, y)))?,
        DupElim(a) => match eval(a, db)? {
            EvalResult::Relation(r) => match dedup::dup_elim(&r) {
                DedupOutcome::Relation(d) => EvalResult::Relation(d),
                DedupOutcome::CompleteFailure => EvalResult::CompleteFailure,
            },
            failure => failure,
        },
        Accum(_, _) | AccumGroupBy(_, _, _) => return Err(EvalError::AccumulationNotAtRoot),
    };
    Ok(result)
}

fn eval_binary(
    a: &Query,
    b: &Query,
    db: &PoDatabase,
    op: impl Fn(&PoRelation, &PoRelation) -> Result<PoRelation, EvalError>,
) -> Result<EvalResult, EvalError> {
    let left = eval(a, db)?;
    let right = eval(b, db)?;
    Ok(match (left, right) {
        (EvalResult::Relation(x), EvalResult::Relation(y)) => EvalResult::Relation(op(&x, &y)?),
        _ => EvalResult::CompleteFailure,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Budget, ListRelation};

    fn t(values: &[&str]) -> TupleValue {
        TupleValue::new(values.iter().map(|&v| DomainValue::from(v)).collect())
    }

    pub(crate) fn fig1_db() -> PoDatabase {
        let mut db = PoDatabase::new();
        db.insert(
            "Rest",
            PoRelation::total_order(2, vec![t(&["Gagnaire", "8"]), t(&["TourArgent", "5"])])
                .unwrap(),
        );
        db.insert(
            "Hotel",
            PoRelation::total_order(
                2,
                vec![t(&["Mercure", "5"]), t(&["Balzac", "8"]), t(&["Mercure", "12"])],
            )
            .unwrap(),
        );
        db.insert(
            "Hotel2",
            PoRelation::total_order(
                2,
                vec![t(&["Balzac", "8"]), t(&["Mercure", "5"]), t(&["Mercure", "12"])],
            )
            .unwrap(),
        );
        db
    }

    /// Q := Rest ×DIR σ_{distr≠"12"}(Hotel)
    pub(crate) fn example1_q() -> Query {
        Query::ProdDir(
            Box::new(Query::Relation("Rest".into())),
            Box::new(Query::Select(
                Predicate::ne_const(2, "12"),
                Box::new(Query::Relation("Hotel".into())),
            )),
        )
    }

    /// Q' := Π_{1,3,2}(σ_{.2=.4}(Q)) — projects out the hotel district.
    pub(crate) fn example1_q_prime() -> Query {
        Query::Project(
            vec![1, 3, 2],
            Box::new(Query::Select(Predicate::eq_attr(2, 4), Box::new(example1_q()))),
        )
    }

    pub(crate) fn example1_q_dprime() -> Query {
        Query::Project(
            vec![1, 3, 2],
            Box::new(Query::Select(
                Predicate::eq_attr(2, 4),
                Box::new(Query::ProdLex(
                    Box::new(Query::Relation("Rest".into())),
                    Box::new(Query::Select(
                        Predicate::ne_const(2, "12"),
                        Box::new(Query::Relation("Hotel".into())),
                    )),
                )),
            )),
        )
    }

    fn worlds(q: &Query, db: &PoDatabase) -> Vec<Vec<TupleValue>> {
        let r = eval(q, db).unwrap().into_relation().unwrap();
        r.possible_worlds(&Budget::default())
            .worlds
            .into_iter()
            .map(|w| w.rows().to_vec())
            .collect()
    }

    #[test]
    fn select_on_hotel_keeps_ordered_pair() {
        let db = fig1_db();
        let q = Query::Select(
            Predicate::ne_const(2, "12"),
            Box::new(Query::Relation("Hotel".into())),
        );
        let r = eval(&q, &db).unwrap().into_relation().unwrap();
        assert_eq!(r.len(), 2);
        assert_eq!(r.tuple_at(0), &t(&["Mercure", "5"]));
        assert_eq!(r.tuple_at(1), &t(&["Balzac", "8"]));
        assert!(r.lt(0, 1));
    }

    #[test]
    fn select_true_false() {
        let db = fig1_db();
        let rest = db.get("Rest").unwrap();
        let all = op_select(&Predicate::True, rest).unwrap();
        assert!(all.semantically_equal(rest, &Budget::default()).unwrap());
        let none = op_select(&Predicate::False, rest).unwrap();
        assert!(none.is_empty());
    }

    #[test]
    fn project_hotelname_keeps_order_and_duplicates() {
        let db = fig1_db();
        let q = Query::Project(vec![1], Box::new(Query::Relation("Hotel2".into())));
        let r = eval(&q, &db).unwrap().into_relation().unwrap();
        assert_eq!(r.arity(), 1);
        let e = r.possible_worlds(&Budget::default());
        assert_eq!(e.worlds.len(), 1);
        let w = e.worlds.iter().next().unwrap();
        assert_eq!(
            w.rows().to_vec(),
            vec![t(&["Balzac"]), t(&["Mercure"]), t(&["Mercure"])]
        );
    }

    #[test]
    fn project_can_duplicate_attributes() {
        let r = PoRelation::singleton(t(&["a"]));
        let p = op_project(&[1, 1], &r).unwrap();
        assert_eq!(p.tuple_at(0), &t(&["a", "a"]));
    }

    #[test]
    fn union_is_bag_union() {
        let db = fig1_db();
        let rest = db.get("Rest").unwrap();
        let u = op_union(rest, rest).unwrap();
        assert_eq!(u.len(), 2 * rest.len());
        let empty = PoRelation::empty(2);
        let same = op_union(rest, &empty).unwrap();
        assert!(same.semantically_equal(rest, &Budget::default()).unwrap());
    }

    #[test]
    fn union_of_disjoint_chains_counts_interleavings() {
        let a = PoRelation::total_order(1, vec![t(&["a1"]), t(&["a2"]), t(&["a3"])]).unwrap();
        let b = PoRelation::total_order(1, vec![t(&["b1"]), t(&["b2"]), t(&["b3"])]).unwrap();
        let u = op_union(&a, &b).unwrap();
        assert_eq!(u.possible_worlds(&Budget::default()).worlds.len(), 20);
    }

    #[test]
    fn example1_product_has_two_worlds() {
        let db = fig1_db();
        let ws = worlds(&example1_q(), &db);
        assert_eq!(ws.len(), 2);
        let w1 = vec![
            t(&["Gagnaire", "8", "Mercure", "5"]),
            t(&["Gagnaire", "8", "Balzac", "8"]),
            t(&["TourArgent", "5", "Mercure", "5"]),
            t(&["TourArgent", "5", "Balzac", "8"]),
        ];
        let w2 = vec![
            t(&["Gagnaire", "8", "Mercure", "5"]),
            t(&["TourArgent", "5", "Mercure", "5"]),
            t(&["Gagnaire", "8", "Balzac", "8"]),
            t(&["TourArgent", "5", "Balzac", "8"]),
        ];
        assert!(ws.contains(&w1));
        assert!(ws.contains(&w2));
    }

    #[test]
    fn example1_q_prime_has_two_worlds() {
        let db = fig1_db();
        let ws = worlds(&example1_q_prime(), &db);
        let w1 = vec![t(&["Gagnaire", "Balzac", "8"]), t(&["TourArgent", "Mercure", "5"])];
        let mut w2 = w1.clone();
        w2.reverse();
        assert_eq!(ws.len(), 2);
        assert!(ws.contains(&w1) && ws.contains(&w2));
    }

    #[test]
    fn example1_q_dprime_is_certain() {
        let db = fig1_db();
        let ws = worlds(&example1_q_dprime(), &db);
        assert_eq!(
            ws,
            vec![vec![t(&["Gagnaire", "Balzac", "8"]), t(&["TourArgent", "Mercure", "5"])]]
        );
    }

    #[test]
    fn example2_join_is_certain() {
        let db = fig1_db();
        let q = Query::Select(
            Predicate::eq_attr(2, 4),
            Box::new(Query::ProdDir(
                Box::new(Query::Relation("Rest".into())),
                Box::new(Query::Relation("Hotel2".into())),
            )),
        );
        let ws = worlds(&q, &db);
        assert_eq!(
            ws,
            vec![vec![
                t(&["Gagnaire", "8", "Balzac", "8"]),
                t(&["TourArgent", "5", "Mercure", "5"]),
            ]]
        );
    }

    #[test]
    fn lex_product_of_chains_is_lexicographic() {
        let r = op_prod_lex(&const_chain(2), &const_chain(2));
        let e = r.possible_worlds(&Budget::default());
        assert_eq!(e.worlds.len(), 1);
        let w = e.worlds.iter().next().unwrap();
        let vals: Vec<(u64, u64)> = w
            .rows()
            .iter()
            .map(|t| match (t.attr(1).unwrap(), t.attr(2).unwrap()) {
                (DomainValue::Nat(a), DomainValue::Nat(b)) => (*a, *b),
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(vals, vec![(1, 1), (1, 2), (2, 1), (2, 2)]);
    }

    #[test]
    fn products_agree_on_bags() {
        let db = fig1_db();
        let rest = db.get("Rest").unwrap();
        let hotel = db.get("Hotel").unwrap();
        assert_eq!(
            op_prod_dir(rest, hotel).underlying_bag(),
            op_prod_lex(rest, hotel).underlying_bag()
        );
    }

    #[test]
    fn unordered_lex_product_stays_unordered() {
        let a = PoRelation::unordered(1, vec![t(&["x"]), t(&["y"])]).unwrap();
        let r = op_prod_lex(&a, &a);
        assert_eq!(r.possible_worlds(&Budget::default()).worlds.len(), 24);
    }

    #[test]
    fn product_with_singleton_is_padding() {
        let db = fig1_db();
        let rest = db.get("Rest").unwrap();
        let s = PoRelation::singleton(t(&["pad"]));
        let r = op_prod_dir(rest, &s);
        let stripped = op_project(&[1, 2], &r).unwrap();
        assert!(stripped.semantically_equal(rest, &Budget::default()).unwrap());
    }

    #[test]
    fn constants() {
        let c = const_chain(3);
        let e = c.possible_worlds(&Budget::default());
        assert_eq!(e.worlds.len(), 1);
        assert_eq!(
            e.worlds.iter().next().unwrap().rows()[0],
            TupleValue::new(vec![DomainValue::Nat(1)])
        );
        assert!(const_chain(0).is_empty());
        let s = const_singleton(TupleValue::new(vec![DomainValue::Nat(0)]));
        assert_eq!(s.possible_worlds(&Budget::default()).worlds.len(), 1);
    }

    #[test]
    fn concat_chains_worlds() {
        let a = PoRelation::singleton(t(&["a"]));
        let b = PoRelation::singleton(t(&["b"]));
        let r = op_concat(&a, &b).unwrap();
        let e = r.possible_worlds(&Budget::default());
        assert_eq!(e.worlds.len(), 1);
        assert_eq!(
            e.worlds.iter().next().unwrap().rows().to_vec(),
            vec![t(&["a"]), t(&["b"])]
        );
    }

    #[test]
    fn concat_worlds_are_pairwise_concatenations() {
        let budget = Budget::default();
        let r1 = PoRelation::unordered(1, vec![t(&["a"]), t(&["b"])]).unwrap();
        let r2 = PoRelation::unordered(1, vec![t(&["c"]), t(&["d"])]).unwrap();
        let c = op_concat(&r1, &r2).unwrap();
        let mut expected = std::collections::BTreeSet::new();
        for w1 in &r1.possible_worlds(&budget).worlds {
            for w2 in &r2.possible_worlds(&budget).worlds {
                let mut rows = w1.rows().to_vec();
                rows.extend(w2.rows().iter().cloned());
                expected.insert(ListRelation::new(1, rows).unwrap());
            }
        }
        assert_eq!(c.possible_worlds(&budget).worlds, expected);
    }

    /// The lexicographic-product expansion of concatenation: a query that
    /// computes R concat R' without using concat itself.
    pub(crate) fn concat_via_lex_query(n: usize) -> Query {
        let tag1 = Query::ProdLex(
            Box::new(Query::Singleton(TupleValue::new(vec![DomainValue::Nat(1)]))),
            Box::new(Query::Relation("R".into())),
        );
        let tag2 = Query::ProdLex(
            Box::new(Query::Singleton(TupleValue::new(vec![DomainValue::Nat(2)]))),
            Box::new(Query::Relation("Rp".into())),
        );
        Query::Project(
            (3..n + 3).collect(),
            Box::new(Query::Select(
                Predicate::eq_attr(1, 2),
                Box::new(Query::ProdLex(
                    Box::new(Query::ChainConst(2)),
                    Box::new(Query::Union(Box::new(tag1), Box::new(tag2))),
                )),
            )),
        )
    }

    #[test]
    fn concat_agrees_with_lex_expansion() {
        let budget = Budget::default();
        let r1 = crate::model::tests_support::small_poset_a();
        let r2 = PoRelation::unordered(1, vec![t(&["u"]), t(&["v"])]).unwrap();
        let mut db = PoDatabase::new();
        db.insert("R", r1.clone());
        db.insert("Rp", r2.clone());
        let q = concat_via_lex_query(1);
        let via_query = eval(&q, &db).unwrap().into_relation().unwrap();
        let direct = op_concat(&r1, &r2).unwrap();
        assert!(via_query.semantically_equal(&direct, &budget).unwrap());
    }

    #[test]
    fn eval_relation_ref_returns_stored() {
        let db = fig1_db();
        let q = Query::Relation("Rest".into());
        let r = eval(&q, &db).unwrap().into_relation().unwrap();
        assert!(r
            .semantically_equal(db.get("Rest").unwrap(), &Budget::default())
            .unwrap());
        assert!(matches!(
            eval(&Query::Relation("Nope".into()), &db),
            Err(EvalError::UnknownRelation(name)) if name == "Nope"
        ));
    }

    #[test]
    fn eval_is_repeatable() {
        let db = fig1_db();
        let q = example1_q_prime();
        let a = eval(&q, &db).unwrap().into_relation().unwrap();
        let b = eval(&q, &db).unwrap().into_relation().unwrap();
        assert!(a.semantically_equal(&b, &Budget::default()).unwrap());
    }

    #[test]
    fn arity_checks() {
        let db = fig1_db();
        let bad = Query::Union(
            Box::new(Query::Relation("Rest".into())),
            Box::new(Query::ChainConst(2)),
        );
        assert!(matches!(
            eval(&bad, &db),
            Err(EvalError::ArityMismatch { left: 2, right: 1 })
        ));
        assert_eq!(bad.check(&db.schema()), Err(EvalError::ArityMismatch { left: 2, right: 1 }));
        let bad_attr = Query::Project(vec![5], Box::new(Query::Relation("Rest".into())));
        assert!(matches!(
            eval(&bad_attr, &db),
            Err(EvalError::AttrOutOfRange { attr: 5, arity: 2 })
        ));
    }
}
