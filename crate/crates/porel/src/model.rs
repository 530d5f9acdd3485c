//! Po-relations: bag relations whose tuple occurrences carry a strict
//! partial order.
//!
//! A [`PoRelation`] represents the set of list relations obtained from the
//! linear extensions of its order (its *possible worlds*). Everything in
//! this module is immutable after construction; the order is kept as a
//! cached closure bitmap (for O(1) comparability tests) plus lazily derived
//! cover edges.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;

use crate::bits::BitMatrix;

/// A value from the domain: a natural number or an opaque string token.
/// The two kinds never compare equal.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DomainValue {
    Nat(u64),
    Str(String),
}

impl DomainValue {
    /// Raw token text, without query-literal quoting.
    pub fn token(&self) -> String {
        match self {
            DomainValue::Nat(n) => n.to_string(),
            DomainValue::Str(s) => s.clone(),
        }
    }
}

impl From<u64> for DomainValue {
    fn from(n: u64) -> Self {
        DomainValue::Nat(n)
    }
}

impl From<&str> for DomainValue {
    fn from(s: &str) -> Self {
        DomainValue::Str(s.to_string())
    }
}

impl std::fmt::Display for DomainValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DomainValue::Nat(n) => write!(f, "{n}"),
            DomainValue::Str(s) => write!(f, "\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\"")),
        }
    }
}

/// An ordered sequence of domain values. Attribute positions are 1-based.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TupleValue(Vec<DomainValue>);

impl TupleValue {
    pub fn new(values: Vec<DomainValue>) -> Self {
        TupleValue(values)
    }

    pub fn arity(&self) -> usize {
        self.0.len()
    }

    /// 1-based attribute access.
    pub fn attr(&self, i: usize) -> Option<&DomainValue> {
        if i == 0 {
            return None;
        }
        self.0.get(i - 1)
    }

    pub fn values(&self) -> &[DomainValue] {
        &self.0
    }
}

impl From<Vec<DomainValue>> for TupleValue {
    fn from(values: Vec<DomainValue>) -> Self {
        TupleValue(values)
    }
}

impl std::fmt::Display for TupleValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "⟨")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", v.token())?;
        }
        write!(f, "⟩")
    }
}

/// Opaque tuple-occurrence identifier.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Id(pub u64);

impl std::fmt::Display for Id {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A totally ordered sequence of tuple values: one possible world.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ListRelation {
    arity: usize,
    rows: Vec<TupleValue>,
}

impl ListRelation {
    pub fn new(arity: usize, rows: Vec<TupleValue>) -> Result<Self, ModelError> {
        for row in &rows {
            if row.arity() != arity {
                return Err(ModelError::RowArity {
                    expected: arity,
                    found: row.arity(),
                });
            }
        }
        Ok(ListRelation { arity, rows })
    }

    pub fn empty(arity: usize) -> Self {
        ListRelation { arity, rows: Vec::new() }
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[TupleValue] {
        &self.rows
    }

    pub fn bag(&self) -> Bag {
        let mut bag = Bag::new();
        for row in &self.rows {
            *bag.entry(row.clone()).or_insert(0) += 1;
        }
        bag
    }
}

/// Multiset of tuple values.
pub type Bag = BTreeMap<TupleValue, usize>;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("row arity {found} does not match relation arity {expected}")]
    RowArity { expected: usize, found: usize },
}

/// A violation found while checking the po-relation invariants.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    DuplicateId(Id),
    ArityMismatch { id: Id, expected: usize, found: usize },
    UnknownId(Id),
    Reflexive(Id),
    AntisymmetryCycle(Id),
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::DuplicateId(id) => write!(f, "identifier {id} declared twice"),
            Violation::ArityMismatch { id, expected, found } => {
                write!(f, "tuple {id} has arity {found}, relation declares {expected}")
            }
            Violation::UnknownId(id) => write!(f, "order pair references undeclared identifier {id}"),
            Violation::Reflexive(id) => write!(f, "order contains the reflexive pair ({id},{id})"),
            Violation::AntisymmetryCycle(id) => {
                write!(f, "order closure is not antisymmetric: {id} is on a cycle")
            }
        }
    }
}

/// Raw parts of a po-relation, prior to invariant checking.
#[derive(Debug, Clone, Default)]
pub struct RelationBuilder {
    arity: usize,
    tuples: Vec<(Id, TupleValue)>,
    order: Vec<(Id, Id)>,
}

impl RelationBuilder {
    pub fn new(arity: usize) -> Self {
        RelationBuilder { arity, tuples: Vec::new(), order: Vec::new() }
    }

    pub fn tuple(mut self, id: u64, values: Vec<DomainValue>) -> Self {
        self.tuples.push((Id(id), TupleValue::new(values)));
        self
    }

    pub fn edge(mut self, below: u64, above: u64) -> Self {
        self.order.push((Id(below), Id(above)));
        self
    }

    pub fn push_tuple(&mut self, id: Id, value: TupleValue) {
        self.tuples.push((id, value));
    }

    pub fn push_edge(&mut self, below: Id, above: Id) {
        self.order.push((below, above));
    }

    /// Checks the po-relation invariants and reports every violation
    /// instead of stopping at the first.
    pub fn validate(&self) -> Vec<Violation> {
        let mut violations = Vec::new();
        let mut seen = BTreeSet::new();
        for (id, value) in &self.tuples {
            if !seen.insert(*id) {
                violations.push(Violation::DuplicateId(*id));
            }
            if value.arity() != self.arity {
                violations.push(Violation::ArityMismatch {
                    id: *id,
                    expected: self.arity,
                    found: value.arity(),
                });
            }
        }
        let mut positions = BTreeMap::new();
        for (pos, (id, _)) in self.tuples.iter().enumerate() {
            positions.entry(*id).or_insert(pos);
        }
        let n = self.tuples.len();
        let mut closure = BitMatrix::new(n);
        let mut reflexive = BTreeSet::new();
        for (a, b) in &self.order {
            let (pa, pb) = match (positions.get(a), positions.get(b)) {
                (Some(pa), Some(pb)) => (*pa, *pb),
                (pa, pb) => {
                    if pa.is_none() {
                        violations.push(Violation::UnknownId(*a));
                    }
                    if pb.is_none() && a != b {
                        violations.push(Violation::UnknownId(*b));
                    }
                    continue;
                }
            };
            if pa == pb {
                if reflexive.insert(*a) {
                    violations.push(Violation::Reflexive(*a));
                }
                continue;
            }
            closure.set(pa, pb);
        }
        closure.transitive_close();
        for (pos, (id, _)) in self.tuples.iter().enumerate() {
            if closure.get(pos, pos) && !reflexive.contains(id) {
                violations.push(Violation::AntisymmetryCycle(*id));
            }
        }
        violations
    }

    pub fn build(self) -> Result<PoRelation, Vec<Violation>> {
        let violations = self.validate();
        if !violations.is_empty() {
            return Err(violations);
        }
        let mut order: Vec<(Id, TupleValue)> = self.tuples;
        order.sort_by_key(|(id, _)| *id);
        let ids: Vec<Id> = order.iter().map(|(id, _)| *id).collect();
        let tuples: Vec<TupleValue> = order.into_iter().map(|(_, t)| t).collect();
        let pos: BTreeMap<Id, usize> = ids.iter().enumerate().map(|(p, id)| (*id, p)).collect();
        let mut above = BitMatrix::new(ids.len());
        for (a, b) in &self.order {
            above.set(pos[a], pos[b]);
        }
        above.transitive_close();
        Ok(PoRelation::from_closure(self.arity, ids, tuples, above))
    }
}

/// Immutable po-relation: identifiers, tuple labeling and a strict partial
/// order, with the transitive closure cached in both directions.
#[derive(Clone)]
pub struct PoRelation {
    arity: usize,
    /// Sorted ascending; position in this vector is the internal index.
    ids: Vec<Id>,
    tuples: Vec<TupleValue>,
    /// `above.get(i, j)` iff element at position i is strictly below j.
    above: BitMatrix,
    /// Transpose of `above`: `below.get(i, j)` iff j < i... stored as
    /// `below.row(i)` = ancestors of i.
    below: BitMatrix,
    covers: OnceLock<Vec<(u32, u32)>>,
}

impl std::fmt::Debug for PoRelation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "PoRelation(arity {}, n {};", self.arity, self.len())?;
        for p in 0..self.len() {
            write!(f, " {}:{}", self.ids[p], self.tuples[p])?;
        }
        write!(f, ";")?;
        for &(a, b) in self.cover_edges() {
            write!(f, " {}<{}", self.ids[a as usize], self.ids[b as usize])?;
        }
        write!(f, ")")
    }
}

impl PoRelation {
    pub(crate) fn from_closure(
        arity: usize,
        ids: Vec<Id>,
        tuples: Vec<TupleValue>,
        above: BitMatrix,
    ) -> Self {
        debug_assert!(ids.windows(2).all(|w| w[0] < w[1]));
        debug_assert_eq!(ids.len(), tuples.len());
        debug_assert_eq!(ids.len(), above.size());
        debug_assert!((0..ids.len()).all(|i| !above.get(i, i)));
        let below = above.transpose();
        PoRelation { arity, ids, tuples, above, below, covers: OnceLock::new() }
    }

    pub fn empty(arity: usize) -> Self {
        PoRelation::from_closure(arity, Vec::new(), Vec::new(), BitMatrix::new(0))
    }

    /// Totally ordered relation whose single world is `rows`.
    pub fn total_order(arity: usize, rows: Vec<TupleValue>) -> Result<Self, ModelError> {
        let list = ListRelation::new(arity, rows)?;
        let n = list.len();
        let mut above = BitMatrix::new(n);
        for i in 0..n {
            for j in i + 1..n {
                above.set(i, j);
            }
        }
        let ids = (0..n as u64).map(Id).collect();
        Ok(PoRelation::from_closure(arity, ids, list.rows, above))
    }

    /// Unordered (bag) relation over the given rows.
    pub fn unordered(arity: usize, rows: Vec<TupleValue>) -> Result<Self, ModelError> {
        let list = ListRelation::new(arity, rows)?;
        let n = list.len();
        let ids = (0..n as u64).map(Id).collect();
        Ok(PoRelation::from_closure(arity, ids, list.rows, BitMatrix::new(n)))
    }

    pub fn singleton(value: TupleValue) -> Self {
        let arity = value.arity();
        PoRelation::from_closure(arity, vec![Id(0)], vec![value], BitMatrix::new(1))
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[Id] {
        &self.ids
    }

    pub fn id_at(&self, pos: usize) -> Id {
        self.ids[pos]
    }

    pub fn position(&self, id: Id) -> Option<usize> {
        self.ids.binary_search(&id).ok()
    }

    pub fn tuple_at(&self, pos: usize) -> &TupleValue {
        &self.tuples[pos]
    }

    pub fn tuple_of(&self, id: Id) -> Option<&TupleValue> {
        self.position(id).map(|p| &self.tuples[p])
    }

    pub fn max_id(&self) -> u64 {
        self.ids.last().map_or(0, |id| id.0)
    }

    /// Strict comparability by internal position.
    #[inline]
    pub fn lt(&self, i: usize, j: usize) -> bool {
        self.above.get(i, j)
    }

    pub fn lt_id(&self, a: Id, b: Id) -> Option<bool> {
        Some(self.lt(self.position(a)?, self.position(b)?))
    }

    #[inline]
    pub fn incomparable(&self, i: usize, j: usize) -> bool {
        i != j && !self.lt(i, j) && !self.lt(j, i)
    }

    pub(crate) fn above_matrix(&self) -> &BitMatrix {
        &self.above
    }

    pub(crate) fn below_matrix(&self) -> &BitMatrix {
        &self.below
    }

    pub fn ancestor_count(&self, pos: usize) -> usize {
        self.below.count_row(pos)
    }

    pub fn descendant_count(&self, pos: usize) -> usize {
        self.above.count_row(pos)
    }

    pub fn ancestors(&self, pos: usize) -> Vec<usize> {
        self.below.iter_row(pos).collect()
    }

    pub fn descendants(&self, pos: usize) -> Vec<usize> {
        self.above.iter_row(pos).collect()
    }

    /// Hasse edges as internal position pairs, derived on first use.
    pub fn cover_edges(&self) -> &[(u32, u32)] {
        self.covers.get_or_init(|| {
            let mut covers = Vec::new();
            for i in 0..self.len() {
                for j in self.above.iter_row(i) {
                    // (i, j) is a cover edge when nothing sits strictly between.
                    if !self.above.rows_intersect(i, &self.below, j) {
                        covers.push((i as u32, j as u32));
                    }
                }
            }
            covers
        })
    }

    /// Renumber identifiers to 0..n-1, preserving their relative order.
    /// The result is isomorphic to `self`.
    pub fn compact(&self) -> PoRelation {
        let n = self.len();
        PoRelation::from_closure(
            self.arity,
            (0..n as u64).map(Id).collect(),
            self.tuples.clone(),
            self.above.clone(),
        )
    }

    /// Forgets the order.
    pub fn underlying_bag(&self) -> Bag {
        let mut bag = Bag::new();
        for t in &self.tuples {
            *bag.entry(t.clone()).or_insert(0) += 1;
        }
        bag
    }

    pub fn validate(&self) -> Vec<Violation> {
        let mut violations = Vec::new();
        for (pos, t) in self.tuples.iter().enumerate() {
            if t.arity() != self.arity {
                violations.push(Violation::ArityMismatch {
                    id: self.ids[pos],
                    expected: self.arity,
                    found: t.arity(),
                });
            }
        }
        for i in 0..self.len() {
            if self.above.get(i, i) {
                violations.push(Violation::Reflexive(self.ids[i]));
            }
            for j in self.above.iter_row(i) {
                if i != j && self.above.get(j, i) {
                    violations.push(Violation::AntisymmetryCycle(self.ids[i]));
                    break;
                }
            }
        }
        violations
    }

    fn direct_predecessors(&self) -> Vec<Vec<u32>> {
        let mut preds = vec![Vec::new(); self.len()];
        for &(a, b) in self.cover_edges() {
            preds[b as usize].push(a);
        }
        preds
    }

    /// Enumerates the distinct possible worlds, deduplicated by value
    /// sequence. Enumeration explores extensions in ascending identifier
    /// order and stops early once either budget is hit, in which case
    /// `complete` is false.
    pub fn possible_worlds(&self, budget: &Budget) -> WorldEnumeration {
        let mut worlds = BTreeSet::new();
        let n = self.len();
        let preds = self.direct_predecessors();
        let mut consumed = vec![false; n];
        let mut prefix: Vec<usize> = Vec::with_capacity(n);
        let mut nodes: u64 = 0;
        let mut complete = true;
        self.enumerate_worlds(
            &preds,
            &mut consumed,
            &mut prefix,
            &mut worlds,
            budget,
            &mut nodes,
            &mut complete,
        );
        WorldEnumeration { worlds, complete }
    }

    #[allow(clippy::too_many_arguments)]
    fn enumerate_worlds(
        &self,
        preds: &[Vec<u32>],
        consumed: &mut Vec<bool>,
        prefix: &mut Vec<usize>,
        worlds: &mut BTreeSet<ListRelation>,
        budget: &Budget,
        nodes: &mut u64,
        complete: &mut bool,
    ) {
        if !*complete {
            return;
        }
        *nodes += 1;
        if *nodes > budget.max_nodes {
            *complete = false;
            return;
        }
        if prefix.len() == self.len() {
            let rows = prefix.iter().map(|&p| self.tuples[p].clone()).collect();
            let world = ListRelation { arity: self.arity, rows };
            if !worlds.contains(&world) {
                if worlds.len() >= budget.max_worlds {
                    *complete = false;
                    return;
                }
                worlds.insert(world);
            }
            return;
        }
        for p in 0..self.len() {
            if consumed[p] || !preds[p].iter().all(|&q| consumed[q as usize]) {
                continue;
            }
            consumed[p] = true;
            prefix.push(p);
            self.enumerate_worlds(preds, consumed, prefix, worlds, budget, nodes, complete);
            prefix.pop();
            consumed[p] = false;
            if !*complete {
                return;
            }
        }
    }

    /// Backtracking oracle for `l ∈ pw(self)`. Returns the witnessing
    /// identifier sequence when one exists. Exponential in the worst case;
    /// this is the reference other algorithms are tested against.
    pub fn is_possible_world_witness(
        &self,
        l: &ListRelation,
        budget: &Budget,
    ) -> Result<Option<Vec<Id>>, BudgetExceeded> {
        if l.len() != self.len() || l.arity() != self.arity {
            return Ok(None);
        }
        let preds = self.direct_predecessors();
        let mut consumed = vec![false; self.len()];
        let mut witness = Vec::with_capacity(self.len());
        let mut nodes: u64 = 0;
        let found = self.match_world(l, &preds, &mut consumed, &mut witness, budget, &mut nodes)?;
        Ok(found.then(|| witness.iter().map(|&p| self.ids[p]).collect()))
    }

    pub fn is_possible_world(&self, l: &ListRelation, budget: &Budget) -> Result<bool, BudgetExceeded> {
        Ok(self.is_possible_world_witness(l, budget)?.is_some())
    }

    fn match_world(
        &self,
        l: &ListRelation,
        preds: &[Vec<u32>],
        consumed: &mut Vec<bool>,
        witness: &mut Vec<usize>,
        budget: &Budget,
        nodes: &mut u64,
    ) -> Result<bool, BudgetExceeded> {
        *nodes += 1;
        if *nodes > budget.max_nodes {
            return Err(BudgetExceeded::Nodes(budget.max_nodes));
        }
        let step = witness.len();
        if step == self.len() {
            return Ok(true);
        }
        let target = &l.rows()[step];
        for p in 0..self.len() {
            if consumed[p]
                || self.tuples[p] != *target
                || !preds[p].iter().all(|&q| consumed[q as usize])
            {
                continue;
            }
            consumed[p] = true;
            witness.push(p);
            if self.match_world(l, preds, consumed, witness, budget, nodes)? {
                return Ok(true);
            }
            witness.pop();
            consumed[p] = false;
        }
        Ok(false)
    }

    /// Test-grade equality: equal possible-world sets. Requires both
    /// enumerations to finish within budget.
    pub fn semantically_equal(&self, other: &PoRelation, budget: &Budget) -> Result<bool, BudgetExceeded> {
        if self.arity != other.arity {
            return Ok(false);
        }
        let a = self.possible_worlds(budget);
        if !a.complete {
            return Err(BudgetExceeded::Worlds(budget.max_worlds));
        }
        let b = other.possible_worlds(budget);
        if !b.complete {
            return Err(BudgetExceeded::Worlds(budget.max_worlds));
        }
        Ok(a.worlds == b.worlds)
    }
}

/// Result of world enumeration; `complete` is false when the enumeration
/// was truncated by the budget.
#[derive(Debug, Clone)]
pub struct WorldEnumeration {
    pub worlds: BTreeSet<ListRelation>,
    pub complete: bool,
}

#[derive(Debug, Clone, Copy, thiserror::Error, PartialEq, Eq)]
pub enum BudgetExceeded {
    #[error("world enumeration exceeded the budget of {0} distinct worlds")]
    Worlds(usize),
    #[error("backtracking exceeded the budget of {0} nodes")]
    Nodes(u64),
}

/// Enumeration budgets for the brute-force procedures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Budget {
    pub max_worlds: usize,
    pub max_nodes: u64,
}

impl Default for Budget {
    fn default() -> Self {
        // Desk-scale oracles.
        Budget { max_worlds: 1_000_000, max_nodes: 10_000_000 }
    }
}

impl Budget {
    pub fn new(max_worlds: usize, max_nodes: u64) -> Self {
        Budget { max_worlds, max_nodes }
    }
}

/// A named collection of po-relations with their declared arities.
#[derive(Debug, Clone, Default)]
pub struct PoDatabase {
    relations: BTreeMap<String, PoRelation>,
}

impl PoDatabase {
    pub fn new() -> Self {
        PoDatabase::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, relation: PoRelation) {
        self.relations.insert(name.into(), relation);
    }

    pub fn get(&self, name: &str) -> Option<&PoRelation> {
        self.relations.get(name)
    }

    pub fn schema(&self) -> BTreeMap<String, usize> {
        self.relations.iter().map(|(n, r)| (n.clone(), r.arity())).collect()
    }

    pub fn relations(&self) -> impl Iterator<Item = (&String, &PoRelation)> {
        self.relations.iter()
    }
}
