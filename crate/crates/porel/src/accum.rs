//! Monoid accumulation over list relations and po-relations.
//!
//! An [`Accumulator`] couples an accumulation map `h : (tuple, position) →
//! M` with a [`Monoid`] and capability flags (cancellative, finite,
//! position-invariant). Accumulating a po-relation yields the set of
//! results over its possible worlds; for finite monoids that set is
//! computed exactly by dynamic programs over order ideals instead of world
//! enumeration, and for cancellative monoids certainty reduces to the
//! safe-swaps test.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use crate::model::{
    Bag, Budget, BudgetExceeded, DomainValue, Id, ListRelation, PoRelation, TupleValue,
};
use crate::order::{self, ChainPartition, IaPartition};

/// Element of an accumulation monoid. A single closed representation keeps
/// equality and ordering decidable across the engine.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MonoidValue {
    Int(i64),
    Str(String),
    /// List-relation concatenation (the free monoid over tuples).
    Rows(Vec<TupleValue>),
    /// A total function states → states, for transition monoids.
    Table(Vec<u8>),
    /// First-wins comparison marker: None is neutral.
    Mark(Option<bool>),
}

impl std::fmt::Display for MonoidValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MonoidValue::Int(n) => write!(f, "{n}"),
            MonoidValue::Str(s) => write!(f, "{s:?}"),
            MonoidValue::Rows(rows) => {
                write!(f, "(")?;
                for (i, r) in rows.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{r}")?;
                }
                write!(f, ")")
            }
            MonoidValue::Table(t) => {
                write!(f, "[")?;
                for (i, s) in t.iter().enumerate() {
                    if i > 0 {
                        write!(f, " ")?;
                    }
                    write!(f, "{i}→{s}")?;
                }
                write!(f, "]")
            }
            MonoidValue::Mark(None) => write!(f, "ε"),
            MonoidValue::Mark(Some(true)) => write!(f, "⊤"),
            MonoidValue::Mark(Some(false)) => write!(f, "⊥"),
        }
    }
}

type CombineFn = Arc<dyn Fn(&MonoidValue, &MonoidValue) -> MonoidValue + Send + Sync>;
type MapFn = Arc<dyn Fn(&TupleValue, u64) -> MonoidValue + Send + Sync>;

/// A monoid with its declared capabilities. The flags are declared by the
/// author and spot-verified on samples at construction.
#[derive(Clone)]
pub struct Monoid {
    name: String,
    neutral: MonoidValue,
    combine: CombineFn,
    cancellative: bool,
    /// Element enumeration, present exactly when the monoid is finite.
    elements: Option<Vec<MonoidValue>>,
}

impl Monoid {
    pub fn new(
        name: impl Into<String>,
        neutral: MonoidValue,
        combine: CombineFn,
        cancellative: bool,
        elements: Option<Vec<MonoidValue>>,
    ) -> Self {
        Monoid { name: name.into(), neutral, combine, cancellative, elements }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn neutral(&self) -> &MonoidValue {
        &self.neutral
    }

    pub fn combine(&self, a: &MonoidValue, b: &MonoidValue) -> MonoidValue {
        (self.combine)(a, b)
    }

    pub fn is_cancellative(&self) -> bool {
        self.cancellative
    }

    pub fn is_finite(&self) -> bool {
        self.elements.is_some()
    }

    pub fn elements(&self) -> Option<&[MonoidValue]> {
        self.elements.as_deref()
    }

    /// Sampled property checks: neutrality, associativity, and (when
    /// declared) cancellativity on the given elements.
    pub fn spot_check(&self, samples: &[MonoidValue]) -> Result<(), MonoidPropertyError> {
        for m in samples {
            if self.combine(&self.neutral, m) != *m || self.combine(m, &self.neutral) != *m {
                return Err(MonoidPropertyError::NeutralElement(m.clone()));
            }
        }
        for a in samples {
            for b in samples {
                for c in samples {
                    let left = self.combine(&self.combine(a, b), c);
                    let right = self.combine(a, &self.combine(b, c));
                    if left != right {
                        return Err(MonoidPropertyError::Associativity(a.clone(), b.clone(), c.clone()));
                    }
                }
            }
        }
        if self.cancellative {
            for a in samples {
                for b in samples {
                    for c in samples {
                        if b == c {
                            continue;
                        }
                        if self.combine(a, b) == self.combine(a, c)
                            || self.combine(b, a) == self.combine(c, a)
                        {
                            return Err(MonoidPropertyError::Cancellativity(a.clone()));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

impl std::fmt::Debug for Monoid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Monoid")
            .field("name", &self.name)
            .field("cancellative", &self.cancellative)
            .field("finite", &self.is_finite())
            .finish()
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum MonoidPropertyError {
    #[error("declared neutral element fails on sample {0}")]
    NeutralElement(MonoidValue),
    #[error("combine is not associative on samples {0}, {1}, {2}")]
    Associativity(MonoidValue, MonoidValue, MonoidValue),
    #[error("monoid declared cancellative but combining with {0} is not injective")]
    Cancellativity(MonoidValue),
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum AccumError {
    #[error("accumulator {0} needs arity ≥ {1}, list has arity {2}")]
    Arity(String, usize, usize),
    #[error("accumulation monoid {0} is not finite")]
    NotFinite(String),
    #[error("accumulator {0} is not position-invariant")]
    NotPositionInvariant(String),
    #[error("accumulation monoid {0} is not cancellative")]
    NotCancellative(String),
    #[error("automaton is not deterministic and complete: {0}")]
    IncompleteAutomaton(String),
    #[error(transparent)]
    Budget(#[from] BudgetExceeded),
}

/// An accumulation operator: map plus monoid plus position-invariance flag.
#[derive(Clone)]
pub struct Accumulator {
    key: String,
    monoid: Monoid,
    map: MapFn,
    position_invariant: bool,
    /// Smallest arity the map can be applied to.
    min_arity: usize,
}

impl Accumulator {
    pub fn new(
        key: impl Into<String>,
        monoid: Monoid,
        map: MapFn,
        position_invariant: bool,
        min_arity: usize,
    ) -> Self {
        Accumulator { key: key.into(), monoid, map, position_invariant, min_arity }
    }

    pub fn key(&self) -> &str {
        &self.key
    }

    pub fn monoid(&self) -> &Monoid {
        &self.monoid
    }

    pub fn is_position_invariant(&self) -> bool {
        self.position_invariant
    }

    pub fn min_arity(&self) -> usize {
        self.min_arity
    }

    /// The accumulation map `h`, with a 1-based position.
    pub fn map(&self, t: &TupleValue, position: u64) -> MonoidValue {
        (self.map)(t, position)
    }

    /// Verifies declared position invariance on sampled tuples.
    pub fn spot_check_invariance(&self, samples: &[TupleValue]) -> Result<(), AccumError> {
        if !self.position_invariant {
            return Ok(());
        }
        for t in samples {
            let at1 = self.map(t, 1);
            for p in [2u64, 3, 17, 1000] {
                if self.map(t, p) != at1 {
                    return Err(AccumError::NotPositionInvariant(self.key.clone()));
                }
            }
        }
        Ok(())
    }
}

impl std::fmt::Debug for Accumulator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Accumulator")
            .field("key", &self.key)
            .field("monoid", &self.monoid)
            .field("position_invariant", &self.position_invariant)
            .finish()
    }
}

/// Left fold of the accumulation map over a list relation, ε on empty.
pub fn accum_list(l: &ListRelation, a: &Accumulator) -> Result<MonoidValue, AccumError> {
    if l.arity() < a.min_arity() {
        return Err(AccumError::Arity(a.key.clone(), a.min_arity(), l.arity()));
    }
    Ok(accum_rows(l.rows(), a, 0))
}

/// Fold with positions offset by `offset` (row i gets position offset+i+1).
pub fn accum_rows(rows: &[TupleValue], a: &Accumulator, offset: u64) -> MonoidValue {
    let mut acc = a.monoid.neutral().clone();
    for (i, row) in rows.iter().enumerate() {
        let v = a.map(row, offset + i as u64 + 1);
        acc = a.monoid.combine(&acc, &v);
    }
    acc
}

/// `accum(OR) := {accum(L) | L ∈ pw(OR)}`, by world enumeration.
pub fn accum_results_bruteforce(
    r: &PoRelation,
    a: &Accumulator,
    budget: &Budget,
) -> Result<BTreeSet<MonoidValue>, AccumError> {
    let e = r.possible_worlds(budget);
    if !e.complete {
        return Err(AccumError::Budget(BudgetExceeded::Worlds(budget.max_worlds)));
    }
    let mut out = BTreeSet::new();
    for w in &e.worlds {
        out.insert(accum_list(w, a)?);
    }
    Ok(out)
}

/// Per-chain ancestor requirements: `req[x][j]` is the number of elements
/// of chain j that must be consumed before x becomes enumerable.
pub(crate) struct ChainIndex {
    /// Chain contents as internal positions.
    pub(crate) chains: Vec<Vec<usize>>,
    pub(crate) lengths: Vec<usize>,
    /// For every element position: minimum chain-position vector.
    req: Vec<Vec<u16>>,
    /// strides for mixed-radix state encoding
    pub(crate) strides: Vec<u128>,
}

impl ChainIndex {
    pub(crate) fn new(r: &PoRelation, partition: &ChainPartition) -> Self {
        let k = partition.chains.len();
        let chains: Vec<Vec<usize>> = partition
            .chains
            .iter()
            .map(|c| c.iter().map(|id| r.position(*id).expect("partition id")).collect())
            .collect();
        let lengths: Vec<usize> = chains.iter().map(|c| c.len()).collect();
        let mut chain_pos = vec![(0usize, 0usize); r.len()];
        for (ci, chain) in chains.iter().enumerate() {
            for (pi, &p) in chain.iter().enumerate() {
                chain_pos[p] = (ci, pi);
            }
        }
        let mut req = vec![vec![0u16; k]; r.len()];
        for p in 0..r.len() {
            for anc in r.below_matrix().iter_row(p) {
                let (ci, pi) = chain_pos[anc];
                req[p][ci] = req[p][ci].max(pi as u16 + 1);
            }
        }
        let mut strides = vec![1u128; k];
        for i in 1..k {
            strides[i] = strides[i - 1] * (lengths[i - 1] as u128 + 1);
        }
        ChainIndex { chains, lengths, req, strides }
    }

    #[allow(dead_code)]
    pub(crate) fn encode(&self, m: &[u16]) -> u128 {
        m.iter().zip(&self.strides).map(|(&v, s)| v as u128 * s).sum()
    }

    /// Element x can extend the ideal described by m.
    pub(crate) fn extension_ok(&self, m: &[u16], x: usize) -> bool {
        self.req[x].iter().zip(m).all(|(&need, &have)| need <= have)
    }
}

/// All accumulation results of a finite accumulator over a po-relation,
/// by dynamic programming over the order ideals of a minimum chain
/// partition. Each result carries a witnessing world.
pub fn accum_results_dp_width(
    r: &PoRelation,
    a: &Accumulator,
) -> Result<BTreeMap<MonoidValue, ListRelation>, AccumError> {
    if !a.monoid.is_finite() {
        return Err(AccumError::NotFinite(a.monoid.name.clone()));
    }
    let partition = order::min_chain_partition(r);
    let index = ChainIndex::new(r, &partition);
    let k = index.chains.len();
    let n = r.len();
    // Per ideal: every reachable accumulation value with one witness
    // prefix (tuple sequence). Levels are grouped by ideal size.
    type Level = HashMap<u128, BTreeMap<MonoidValue, Vec<TupleValue>>>;
    let mut level: Level = HashMap::new();
    let mut initial = BTreeMap::new();
    initial.insert(a.monoid.neutral().clone(), Vec::new());
    level.insert(0, initial);
    let mut m_buf = vec![0u16; k];
    for consumed in 0..n {
        let mut next: Level = HashMap::new();
        for (&code, results) in &level {
            decode(code, &index.strides, &index.lengths, &mut m_buf);
            for ci in 0..k {
                let pos_in_chain = m_buf[ci] as usize;
                if pos_in_chain >= index.lengths[ci] {
                    continue;
                }
                let x = index.chains[ci][pos_in_chain];
                if !index.extension_ok(&m_buf, x) {
                    continue;
                }
                let code2 = code + index.strides[ci];
                let entry = next.entry(code2).or_default();
                for (value, prefix) in results {
                    let v2 = a.monoid.combine(
                        value,
                        &a.map(r.tuple_at(x), consumed as u64 + 1),
                    );
                    entry.entry(v2).or_insert_with(|| {
                        let mut p = prefix.clone();
                        p.push(r.tuple_at(x).clone());
                        p
                    });
                }
            }
        }
        level = next;
    }
    let full: u128 = index
        .lengths
        .iter()
        .zip(&index.strides)
        .map(|(&l, s)| l as u128 * s)
        .sum();
    let results = level.remove(&full).unwrap_or_else(|| {
        debug_assert_eq!(n, 0);
        let mut base = BTreeMap::new();
        base.insert(a.monoid.neutral().clone(), Vec::new());
        base
    });
    Ok(results
        .into_iter()
        .map(|(v, rows)| (v, ListRelation::new(r.arity(), rows).expect("witness arity")))
        .collect())
}

pub(crate) fn decode(code: u128, strides: &[u128], lengths: &[usize], out: &mut [u16]) {
    let mut rest = code;
    for i in (0..strides.len()).rev() {
        let v = rest / strides[i];
        debug_assert!(v as usize <= lengths[i]);
        out[i] = v as u16;
        rest %= strides[i];
    }
}

/// State of the almost-unordered side in the mixed dynamic programs: how
/// many elements of each value have been consumed from each class.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub(crate) struct ClassConsumption {
    /// consumed[class][value-index] counts, indexed against `IaIndex`.
    pub(crate) consumed: Vec<Vec<u16>>,
}

pub(crate) struct IaIndex {
    /// Per class: distinct tuple values with their multiplicities.
    pub(crate) class_values: Vec<Vec<(TupleValue, u16)>>,
    pub(crate) class_sizes: Vec<usize>,
    /// Classes whose full consumption unblocks this class.
    pub(crate) ancestor_classes: Vec<Vec<usize>>,
    /// Members per class per value, ascending ids, for witness extraction.
    #[allow(dead_code)]
    pub(crate) members: Vec<BTreeMap<TupleValue, Vec<Id>>>,
}

impl IaIndex {
    pub(crate) fn new(r: &PoRelation, partition: &IaPartition) -> Self {
        let k = partition.classes.len();
        let mut class_of = vec![0usize; r.len()];
        for (ci, class) in partition.classes.iter().enumerate() {
            for id in class {
                class_of[r.position(*id).expect("class id")] = ci;
            }
        }
        let mut class_values = Vec::with_capacity(k);
        let mut class_sizes = Vec::with_capacity(k);
        let mut ancestor_classes = vec![BTreeSet::new(); k];
        let mut members: Vec<BTreeMap<TupleValue, Vec<Id>>> = vec![BTreeMap::new(); k];
        for (ci, class) in partition.classes.iter().enumerate() {
            let mut counts: BTreeMap<TupleValue, u16> = BTreeMap::new();
            for id in class {
                let p = r.position(*id).unwrap();
                *counts.entry(r.tuple_at(p).clone()).or_insert(0) += 1;
                members[ci].entry(r.tuple_at(p).clone()).or_default().push(*id);
                for anc in r.below_matrix().iter_row(p) {
                    ancestor_classes[ci].insert(class_of[anc]);
                }
            }
            class_sizes.push(class.len());
            class_values.push(counts.into_iter().collect());
        }
        IaIndex {
            class_values,
            class_sizes,
            ancestor_classes: ancestor_classes
                .into_iter()
                .map(|s| s.into_iter().collect())
                .collect(),
            members,
        }
    }

    pub(crate) fn initial(&self) -> ClassConsumption {
        ClassConsumption {
            consumed: self.class_values.iter().map(|vs| vec![0u16; vs.len()]).collect(),
        }
    }

    pub(crate) fn class_exhausted(&self, state: &ClassConsumption, ci: usize) -> bool {
        state.consumed[ci].iter().map(|&c| c as usize).sum::<usize>() == self.class_sizes[ci]
    }

    pub(crate) fn class_open(&self, state: &ClassConsumption, ci: usize) -> bool {
        !self.class_exhausted(state, ci)
            && self.ancestor_classes[ci]
                .iter()
                .all(|&anc| anc == ci || self.class_exhausted(state, anc))
    }
}

/// All accumulation results over the union of a bounded-width relation and
/// a bounded-ia-width relation, for a finite position-invariant
/// accumulator. The dynamic program advances either one chain of the first
/// relation or one open class of the second.
pub fn accum_results_mixed(
    rw: &PoRelation,
    ria: &PoRelation,
    a: &Accumulator,
) -> Result<BTreeMap<MonoidValue, ListRelation>, AccumError> {
    if !a.monoid.is_finite() {
        return Err(AccumError::NotFinite(a.monoid.name.clone()));
    }
    if !a.position_invariant {
        return Err(AccumError::NotPositionInvariant(a.key.clone()));
    }
    debug_assert_eq!(rw.arity(), ria.arity());
    let chain_index = ChainIndex::new(rw, &order::min_chain_partition(rw));
    let ia = IaIndex::new(ria, &order::ia_partition(ria));
    let k = chain_index.chains.len();
    let n = rw.len() + ria.len();

    type Key = (u128, ClassConsumption);
    type Level = HashMap<Key, BTreeMap<MonoidValue, Vec<TupleValue>>>;
    let mut level: Level = HashMap::new();
    let mut initial = BTreeMap::new();
    initial.insert(a.monoid.neutral().clone(), Vec::new());
    level.insert((0, ia.initial()), initial);
    let mut m_buf = vec![0u16; k];
    for consumed in 0..n {
        let mut next: Level = HashMap::new();
        for ((code, ia_state), results) in &level {
            decode(*code, &chain_index.strides, &chain_index.lengths, &mut m_buf);
            // Advance one chain of the width-bounded side.
            for ci in 0..k {
                let pos_in_chain = m_buf[ci] as usize;
                if pos_in_chain >= chain_index.lengths[ci] {
                    continue;
                }
                let x = chain_index.chains[ci][pos_in_chain];
                if !chain_index.extension_ok(&m_buf, x) {
                    continue;
                }
                push_results(
                    next.entry((code + chain_index.strides[ci], ia_state.clone())).or_default(),
                    results,
                    a,
                    rw.tuple_at(x),
                    consumed as u64 + 1,
                );
            }
            // Or consume one element from an open class.
            for ci in 0..ia.class_values.len() {
                if !ia.class_open(ia_state, ci) {
                    continue;
                }
                for (vi, (value, total)) in ia.class_values[ci].iter().enumerate() {
                    if ia_state.consumed[ci][vi] >= *total {
                        continue;
                    }
                    let mut state2 = ia_state.clone();
                    state2.consumed[ci][vi] += 1;
                    push_results(
                        next.entry((*code, state2)).or_default(),
                        results,
                        a,
                        value,
                        consumed as u64 + 1,
                    );
                }
            }
        }
        level = next;
    }
    let full_code: u128 = chain_index
        .lengths
        .iter()
        .zip(&chain_index.strides)
        .map(|(&l, s)| l as u128 * s)
        .sum();
    let mut out = BTreeMap::new();
    for ((code, ia_state), results) in level {
        if code != full_code {
            continue;
        }
        debug_assert!((0..ia.class_values.len()).all(|ci| ia.class_exhausted(&ia_state, ci)));
        for (v, rows) in results {
            out.entry(v)
                .or_insert_with(|| ListRelation::new(rw.arity(), rows.clone()).expect("witness arity"));
        }
    }
    if out.is_empty() && n == 0 {
        out.insert(
            a.monoid.neutral().clone(),
            ListRelation::empty(rw.arity()),
        );
    }
    Ok(out)
}

fn push_results(
    entry: &mut BTreeMap<MonoidValue, Vec<TupleValue>>,
    results: &BTreeMap<MonoidValue, Vec<TupleValue>>,
    a: &Accumulator,
    tuple: &TupleValue,
    position: u64,
) {
    for (value, prefix) in results {
        let v2 = a.monoid().combine(value, &a.map(tuple, position));
        entry.entry(v2).or_insert_with(|| {
            let mut p = prefix.clone();
            p.push(tuple.clone());
            p
        });
    }
}

/// The safe-swaps test: for every incomparable pair and every pair of
/// consecutive positions in their joint rank interval, swapping the two
/// elements leaves the accumulated value unchanged. Each side is evaluated
/// by folding a neutral-padded sequence.
pub fn safe_swaps(r: &PoRelation, a: &Accumulator) -> bool {
    for i in 0..r.len() {
        for j in i + 1..r.len() {
            if !r.incomparable(i, j) {
                continue;
            }
            let interval = order::possible_ranks(r, r.id_at(i), r.id_at(j))
                .expect("incomparable pair");
            for p in interval.lo..interval.hi {
                let left = accum_pair_at(a, r.tuple_at(i), r.tuple_at(j), p as u64);
                let right = accum_pair_at(a, r.tuple_at(j), r.tuple_at(i), p as u64);
                if left != right {
                    return false;
                }
            }
        }
    }
    true
}

/// Folds ε at positions 1..p-1, then h(t1, p) ⊕ h(t2, p+1).
fn accum_pair_at(a: &Accumulator, t1: &TupleValue, t2: &TupleValue, p: u64) -> MonoidValue {
    let mut acc = a.monoid.neutral().clone();
    // Padding with the neutral element does not change the fold; only the
    // positions handed to the map matter.
    acc = a.monoid.combine(&acc, &a.map(t1, p));
    a.monoid.combine(&acc, &a.map(t2, p + 1))
}

/// A violating incomparable pair with its swap position, if any.
pub fn find_unsafe_swap(r: &PoRelation, a: &Accumulator) -> Option<(Id, Id, usize)> {
    for i in 0..r.len() {
        for j in i + 1..r.len() {
            if !r.incomparable(i, j) {
                continue;
            }
            let interval = order::possible_ranks(r, r.id_at(i), r.id_at(j)).ok()?;
            for p in interval.lo..interval.hi {
                let left = accum_pair_at(a, r.tuple_at(i), r.tuple_at(j), p as u64);
                let right = accum_pair_at(a, r.tuple_at(j), r.tuple_at(i), p as u64);
                if left != right {
                    return Some((r.id_at(i), r.id_at(j), p));
                }
            }
        }
    }
    None
}

// ---------------------------------------------------------------------
// Built-in accumulators.

/// List concatenation: h(t) = (t), the free monoid over tuples. This is
/// the accumulator that makes POSS/CERT for plain queries a special case
/// of accumulation.
pub fn tuple_concat() -> Accumulator {
    let monoid = Monoid::new(
        "tuple-concat",
        MonoidValue::Rows(Vec::new()),
        Arc::new(|a, b| match (a, b) {
            (MonoidValue::Rows(x), MonoidValue::Rows(y)) => {
                let mut rows = x.clone();
                rows.extend(y.iter().cloned());
                MonoidValue::Rows(rows)
            }
            _ => unreachable!("tuple-concat combines row lists"),
        }),
        true,
        None,
    );
    Accumulator::new(
        "tuples",
        monoid,
        Arc::new(|t, _| MonoidValue::Rows(vec![t.clone()])),
        true,
        0,
    )
}

fn string_monoid() -> Monoid {
    Monoid::new(
        "string-concat",
        MonoidValue::Str(String::new()),
        Arc::new(|a, b| match (a, b) {
            (MonoidValue::Str(x), MonoidValue::Str(y)) => MonoidValue::Str(format!("{x}{y}")),
            _ => unreachable!("string-concat combines strings"),
        }),
        true,
        None,
    )
}

fn attr_key(base: &str, attr: usize) -> String {
    if attr == 1 {
        base.to_string()
    } else {
        format!("{base}{attr}")
    }
}

/// Word concatenation of the token of the given attribute.
pub fn string_concat(attr: usize) -> Accumulator {
    Accumulator::new(
        attr_key("concat", attr),
        string_monoid(),
        Arc::new(move |t, _| {
            MonoidValue::Str(t.attr(attr).map(|v| v.token()).unwrap_or_default())
        }),
        true,
        attr,
    )
}

fn int_value(t: &TupleValue, attr: usize) -> i64 {
    match t.attr(attr) {
        Some(DomainValue::Nat(n)) => *n as i64,
        _ => 0,
    }
}

fn int_monoid() -> Monoid {
    Monoid::new(
        "integer-sum",
        MonoidValue::Int(0),
        Arc::new(|a, b| match (a, b) {
            (MonoidValue::Int(x), MonoidValue::Int(y)) => MonoidValue::Int(x.wrapping_add(*y)),
            _ => unreachable!("integer-sum combines integers"),
        }),
        true,
        None,
    )
}

/// Position-invariant sum of a numeric attribute (group accumulation).
pub fn int_sum(attr: usize) -> Accumulator {
    Accumulator::new(
        attr_key("sum", attr),
        int_monoid(),
        Arc::new(move |t, _| MonoidValue::Int(int_value(t, attr))),
        true,
        attr,
    )
}

/// Sum of a numeric attribute weighted by a user-supplied per-position
/// table (weight 0 past the end of the table).
pub fn weighted_sum(attr: usize, weights: Vec<i64>) -> Accumulator {
    Accumulator::new(
        format!("wsum{attr}x{}", weights.len()),
        int_monoid(),
        Arc::new(move |t, p| {
            let w = weights.get((p - 1) as usize).copied().unwrap_or(0);
            MonoidValue::Int(int_value(t, attr).wrapping_mul(w))
        }),
        false,
        attr,
    )
}

/// First-wins comparison monoid over {ε, ⊤, ⊥}: the earliest non-neutral
/// mark decides the result. h maps `top` to ⊤ and `bottom` to ⊥.
pub fn first_wins(top: TupleValue, bottom: TupleValue) -> Accumulator {
    let monoid = Monoid::new(
        "first-wins",
        MonoidValue::Mark(None),
        Arc::new(|a, b| match a {
            MonoidValue::Mark(None) => b.clone(),
            _ => a.clone(),
        }),
        false,
        Some(vec![
            MonoidValue::Mark(None),
            MonoidValue::Mark(Some(true)),
            MonoidValue::Mark(Some(false)),
        ]),
    );
    let arity = top.arity().max(bottom.arity());
    Accumulator::new(
        "firstwins",
        monoid,
        Arc::new(move |t, _| {
            if *t == top {
                MonoidValue::Mark(Some(true))
            } else if *t == bottom {
                MonoidValue::Mark(Some(false))
            } else {
                MonoidValue::Mark(None)
            }
        }),
        true,
        arity,
    )
}

/// Top-k as accumulation: h(t, n) is (t) for n ≤ k and ε otherwise.
pub fn top_k(k: usize) -> Accumulator {
    let base = tuple_concat();
    Accumulator::new(
        format!("top{k}"),
        base.monoid.clone(),
        Arc::new(move |t, p| {
            if p as usize <= k {
                MonoidValue::Rows(vec![t.clone()])
            } else {
                MonoidValue::Rows(Vec::new())
            }
        }),
        false,
        0,
    )
}

/// Select-at-k as accumulation: h(t, n) is (t) exactly at n = k.
pub fn select_at(k: usize) -> Accumulator {
    let base = tuple_concat();
    Accumulator::new(
        format!("at{k}"),
        base.monoid.clone(),
        Arc::new(move |t, p| {
            if p as usize == k {
                MonoidValue::Rows(vec![t.clone()])
            } else {
                MonoidValue::Rows(Vec::new())
            }
        }),
        false,
        0,
    )
}

/// Description of a deterministic complete automaton over domain-value
/// symbols. `fallback` is the transition table applied to tuples whose
/// symbol is outside the alphabet.
#[derive(Debug, Clone)]
pub struct DfaSpec {
    pub states: usize,
    pub transitions: BTreeMap<DomainValue, Vec<u8>>,
    pub fallback: Vec<u8>,
}

/// Builds the transition-monoid accumulator of a DFA: elements are total
/// functions state → state, combined by composition in reading order; a
/// tuple contributes the table of its designated attribute's symbol.
pub fn dfa_transition_monoid(spec: &DfaSpec, attr: usize) -> Result<Accumulator, AccumError> {
    if spec.states == 0 || spec.states > u8::MAX as usize {
        return Err(AccumError::IncompleteAutomaton(format!(
            "state count {} out of range",
            spec.states
        )));
    }
    let check_table = |name: &str, table: &[u8]| -> Result<(), AccumError> {
        if table.len() != spec.states {
            return Err(AccumError::IncompleteAutomaton(format!(
                "symbol {name} has {} transitions for {} states",
                table.len(),
                spec.states
            )));
        }
        if let Some(bad) = table.iter().find(|&&s| s as usize >= spec.states) {
            return Err(AccumError::IncompleteAutomaton(format!(
                "symbol {name} targets unknown state {bad}"
            )));
        }
        Ok(())
    };
    for (sym, table) in &spec.transitions {
        check_table(&sym.token(), table)?;
    }
    check_table("<fallback>", &spec.fallback)?;

    // Enumerate the generated submonoid: identity plus the closure of the
    // symbol tables under composition. Bounded by |states|^|states|.
    let identity: Vec<u8> = (0..spec.states as u8).collect();
    let mut generators: Vec<Vec<u8>> = spec.transitions.values().cloned().collect();
    generators.push(spec.fallback.clone());
    let mut elements: BTreeSet<Vec<u8>> = BTreeSet::new();
    elements.insert(identity.clone());
    let mut queue: Vec<Vec<u8>> = vec![identity.clone()];
    while let Some(cur) = queue.pop() {
        for g in &generators {
            let composed: Vec<u8> = cur.iter().map(|&s| g[s as usize]).collect();
            if elements.insert(composed.clone()) {
                queue.push(composed);
            }
        }
    }
    let monoid = Monoid::new(
        "dfa-transition",
        MonoidValue::Table(identity),
        Arc::new(|a, b| match (a, b) {
            (MonoidValue::Table(x), MonoidValue::Table(y)) => {
                // Reading order: apply x first, then y.
                MonoidValue::Table(x.iter().map(|&s| y[s as usize]).collect())
            }
            _ => unreachable!("dfa monoid combines tables"),
        }),
        false,
        Some(elements.into_iter().map(MonoidValue::Table).collect()),
    );
    let transitions = spec.transitions.clone();
    let fallback = spec.fallback.clone();
    Ok(Accumulator::new(
        format!("dfa{}a{}", spec.states, attr),
        monoid,
        Arc::new(move |t, _| {
            let table = t
                .attr(attr)
                .and_then(|v| transitions.get(v))
                .unwrap_or(&fallback);
            MonoidValue::Table(table.clone())
        }),
        true,
        attr,
    ))
}

/// The balanced-word automaton: accepts `l (s-s+ | n-n+ | e-e+)* r` over
/// the reserved gadget alphabet. States: 0 initial, 1 inner, 2 final,
/// 3/4/5 after s-/n-/e-, 6 sink.
pub fn balanced_word_dfa() -> DfaSpec {
    let sink = vec![6u8; 7];
    let mut transitions: BTreeMap<DomainValue, Vec<u8>> = BTreeMap::new();
    let table = |pairs: &[(u8, u8)]| -> Vec<u8> {
        let mut t = sink.clone();
        for &(from, to) in pairs {
            t[from as usize] = to;
        }
        t
    };
    transitions.insert("l".into(), table(&[(0, 1)]));
    transitions.insert("r".into(), table(&[(1, 2)]));
    transitions.insert("s-".into(), table(&[(1, 3)]));
    transitions.insert("s+".into(), table(&[(3, 1)]));
    transitions.insert("n-".into(), table(&[(1, 4)]));
    transitions.insert("n+".into(), table(&[(4, 1)]));
    transitions.insert("e-".into(), table(&[(1, 5)]));
    transitions.insert("e+".into(), table(&[(5, 1)]));
    DfaSpec { states: 7, transitions, fallback: sink }
}

/// The accumulator for the balanced-word automaton on attribute 1.
pub fn balanced_word_accumulator() -> Accumulator {
    let mut acc = dfa_transition_monoid(&balanced_word_dfa(), 1).expect("complete automaton");
    acc.key = "balanced".into();
    acc
}

/// The f1 table of the balanced-word automaton: initial ↦ final, all
/// other states to the sink.
pub fn balanced_accepting_value() -> MonoidValue {
    MonoidValue::Table(vec![2, 6, 6, 6, 6, 6, 6])
}

/// The f0 table: everything to the sink.
pub fn balanced_rejecting_value() -> MonoidValue {
    MonoidValue::Table(vec![6; 7])
}

/// Multiset helper shared by decision pre-checks.
pub fn bag_of_rows(rows: &[TupleValue]) -> Bag {
    let mut bag = Bag::new();
    for r in rows {
        *bag.entry(r.clone()).or_insert(0) += 1;
    }
    bag
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::RelationBuilder;

    fn t(values: &[&str]) -> TupleValue {
        TupleValue::new(values.iter().map(|&v| DomainValue::from(v)).collect())
    }

    fn list(values: &[&str]) -> ListRelation {
        ListRelation::new(1, values.iter().map(|v| t(&[v])).collect()).unwrap()
    }

    #[test]
    fn accum_of_empty_list_is_neutral() {
        for acc in [tuple_concat(), string_concat(1), int_sum(1)] {
            let l = ListRelation::empty(1);
            assert_eq!(accum_list(&l, &acc).unwrap(), *acc.monoid().neutral());
        }
    }

    #[test]
    fn concat_accumulates_word() {
        let acc = string_concat(1);
        assert_eq!(
            accum_list(&list(&["a", "b"]), &acc).unwrap(),
            MonoidValue::Str("ab".into())
        );
    }

    #[test]
    fn first_wins_takes_earliest_mark() {
        let acc = first_wins(t(&["t1"]), t(&["t2"]));
        let l = list(&["t2", "t1"]);
        assert_eq!(accum_list(&l, &acc).unwrap(), MonoidValue::Mark(Some(false)));
        let l = list(&["x", "t1", "t2"]);
        assert_eq!(accum_list(&l, &acc).unwrap(), MonoidValue::Mark(Some(true)));
    }

    #[test]
    fn builtin_monoids_pass_spot_checks() {
        let strings: Vec<MonoidValue> =
            ["", "a", "b", "ab"].iter().map(|s| MonoidValue::Str(s.to_string())).collect();
        string_monoid().spot_check(&strings).unwrap();
        let ints: Vec<MonoidValue> = [-2i64, 0, 1, 5].iter().map(|&n| MonoidValue::Int(n)).collect();
        int_monoid().spot_check(&ints).unwrap();
        let acc = first_wins(t(&["t1"]), t(&["t2"]));
        let marks = acc.monoid().elements().unwrap().to_vec();
        acc.monoid().spot_check(&marks).unwrap();
        let dfa = balanced_word_accumulator();
        let elems = dfa.monoid().elements().unwrap().to_vec();
        dfa.monoid().spot_check(&elems).unwrap();
        // The first-wins monoid is genuinely not cancellative.
        let broken = Monoid::new(
            "first-wins-miflagged",
            MonoidValue::Mark(None),
            Arc::new(|a, b| match a {
                MonoidValue::Mark(None) => b.clone(),
                _ => a.clone(),
            }),
            true,
            None,
        );
        assert!(matches!(
            broken.spot_check(&marks),
            Err(MonoidPropertyError::Cancellativity(_))
        ));
    }

    #[test]
    fn position_invariance_spot_check() {
        let samples = vec![t(&["a"]), t(&["b"])];
        tuple_concat().spot_check_invariance(&samples).unwrap();
        let lying = Accumulator::new(
            "lying",
            string_monoid(),
            Arc::new(|_, p| MonoidValue::Str(p.to_string())),
            true,
            0,
        );
        assert!(lying.spot_check_invariance(&samples).is_err());
    }

    #[test]
    fn bruteforce_results() {
        let budget = Budget::default();
        let acc = string_concat(1);
        let chain = PoRelation::total_order(1, vec![t(&["a"]), t(&["b"])]).unwrap();
        assert_eq!(accum_results_bruteforce(&chain, &acc, &budget).unwrap().len(), 1);
        let free = PoRelation::unordered(1, vec![t(&["a"]), t(&["b"])]).unwrap();
        let rs = accum_results_bruteforce(&free, &acc, &budget).unwrap();
        assert_eq!(rs.len(), 2);
        // A commutative accumulator has a single result on any order.
        let sums = accum_results_bruteforce(&free, &int_sum(1), &budget).unwrap();
        assert_eq!(sums.len(), 1);
    }

    #[test]
    fn dp_width_requires_finite() {
        let r = PoRelation::unordered(1, vec![t(&["a"])]).unwrap();
        assert!(matches!(
            accum_results_dp_width(&r, &string_concat(1)),
            Err(AccumError::NotFinite(_))
        ));
    }

    #[test]
    fn dp_width_on_empty_and_chain() {
        let acc = first_wins(t(&["x"]), t(&["y"]));
        let empty = PoRelation::empty(1);
        let rs = accum_results_dp_width(&empty, &acc).unwrap();
        assert_eq!(rs.len(), 1);
        assert!(rs.contains_key(&MonoidValue::Mark(None)));
        let chain = PoRelation::total_order(1, vec![t(&["x"]), t(&["y"])]).unwrap();
        let rs = accum_results_dp_width(&chain, &acc).unwrap();
        assert_eq!(rs.len(), 1);
        assert!(rs.contains_key(&MonoidValue::Mark(Some(true))));
    }

    #[test]
    fn dp_width_matches_bruteforce_on_small_poset() {
        let budget = Budget::default();
        let mut b = RelationBuilder::new(1);
        for (i, v) in ["x", "y", "x", "z"].iter().enumerate() {
            b = b.tuple(i as u64, vec![DomainValue::from(*v)]);
        }
        let r = b.edge(0, 2).edge(1, 2).edge(1, 3).build().unwrap();
        let acc = first_wins(t(&["x"]), t(&["y"]));
        let dp = accum_results_dp_width(&r, &acc).unwrap();
        let brute = accum_results_bruteforce(&r, &acc, &budget).unwrap();
        let dp_values: BTreeSet<MonoidValue> = dp.keys().cloned().collect();
        assert_eq!(dp_values, brute);
        // Witness worlds realize their value.
        for (value, world) in &dp {
            assert!(r.is_possible_world(world, &budget).unwrap());
            assert_eq!(accum_list(world, &acc).unwrap(), *value);
        }
    }

    #[test]
    fn mixed_dp_degenerate_cases() {
        let acc = first_wins(t(&["x"]), t(&["y"]));
        let rw = PoRelation::total_order(1, vec![t(&["x"]), t(&["y"])]).unwrap();
        let empty = PoRelation::empty(1);
        let mixed = accum_results_mixed(&rw, &empty, &acc).unwrap();
        let plain = accum_results_dp_width(&rw, &acc).unwrap();
        assert_eq!(
            mixed.keys().collect::<Vec<_>>(),
            plain.keys().collect::<Vec<_>>()
        );
        let ria = PoRelation::unordered(1, vec![t(&["x"]), t(&["y"])]).unwrap();
        let mixed = accum_results_mixed(&empty, &ria, &acc).unwrap();
        let brute = accum_results_bruteforce(&ria, &acc, &Budget::default()).unwrap();
        assert_eq!(mixed.keys().cloned().collect::<BTreeSet<_>>(), brute);
    }

    #[test]
    fn safe_swaps_basics() {
        let concat = string_concat(1);
        let chain = PoRelation::total_order(1, vec![t(&["a"]), t(&["b"])]).unwrap();
        assert!(safe_swaps(&chain, &concat));
        let same = PoRelation::unordered(1, vec![t(&["a"]), t(&["a"])]).unwrap();
        assert!(safe_swaps(&same, &concat));
        let diff = PoRelation::unordered(1, vec![t(&["a"]), t(&["b"])]).unwrap();
        assert!(!safe_swaps(&diff, &concat));
        assert!(find_unsafe_swap(&diff, &concat).is_some());
    }

    #[test]
    fn cancellative_certainty_characterization_small() {
        // |accum(OR)| = 1 iff safe swaps, for cancellative accumulators.
        let budget = Budget::default();
        let accs = [string_concat(1), weighted_sum(1, vec![1, 2, 3, 4, 5, 6])];
        let relations = vec![
            PoRelation::total_order(1, vec![t(&["1"]), t(&["2"]), t(&["1"])]).unwrap(),
            PoRelation::unordered(1, vec![t(&["1"]), t(&["2"])]).unwrap(),
            PoRelation::unordered(1, vec![t(&["1"]), t(&["1"])]).unwrap(),
            crate::model::tests_support::small_poset_a(),
        ];
        for acc in &accs {
            for r in &relations {
                let brute = accum_results_bruteforce(r, acc, &budget).unwrap();
                assert_eq!(brute.len() == 1, safe_swaps(r, acc), "{:?}", r);
            }
        }
    }

    #[test]
    fn offset_law() {
        let acc = weighted_sum(1, vec![1, 10, 100, 1000]);
        let l1 = vec![t(&["a"]), t(&["b"])];
        let l2 = vec![t(&["c"])];
        let mut all = l1.clone();
        all.extend(l2.iter().cloned());
        let whole = accum_rows(&all, &acc, 0);
        let split = acc.monoid().combine(&accum_rows(&l1, &acc, 0), &accum_rows(&l2, &acc, l1.len() as u64));
        assert_eq!(whole, split);
        // Position-invariant accumulators need no offset.
        let concat = string_concat(1);
        let whole = accum_rows(&all, &concat, 0);
        let split = concat
            .monoid()
            .combine(&accum_rows(&l1, &concat, 0), &accum_rows(&l2, &concat, 0));
        assert_eq!(whole, split);
    }

    #[test]
    fn dfa_single_state_is_trivial() {
        let spec = DfaSpec {
            states: 1,
            transitions: [(DomainValue::from("a"), vec![0u8])].into_iter().collect(),
            fallback: vec![0],
        };
        let acc = dfa_transition_monoid(&spec, 1).unwrap();
        assert_eq!(acc.monoid().elements().unwrap().len(), 1);
    }

    #[test]
    fn dfa_rejects_incomplete_tables() {
        let spec = DfaSpec {
            states: 2,
            transitions: [(DomainValue::from("a"), vec![0u8])].into_iter().collect(),
            fallback: vec![0, 1],
        };
        assert!(matches!(
            dfa_transition_monoid(&spec, 1),
            Err(AccumError::IncompleteAutomaton(_))
        ));
    }

    #[test]
    fn dfa_monoid_size_bound() {
        let acc = balanced_word_accumulator();
        let n = 7usize;
        assert!(acc.monoid().elements().unwrap().len() <= n.pow(n as u32));
    }

    #[test]
    fn balanced_words_map_to_f1() {
        let acc = balanced_word_accumulator();
        let balanced = list(&["l", "s-", "s+", "n-", "n+", "r"]);
        assert_eq!(accum_list(&balanced, &acc).unwrap(), balanced_accepting_value());
        let unbalanced = list(&["l", "s-", "n+", "r"]);
        assert_eq!(accum_list(&unbalanced, &acc).unwrap(), balanced_rejecting_value());
        let also_unbalanced = list(&["l", "s-", "r"]);
        assert_eq!(accum_list(&also_unbalanced, &acc).unwrap(), balanced_rejecting_value());
        let trivially_balanced = list(&["l", "r"]);
        assert_eq!(accum_list(&trivially_balanced, &acc).unwrap(), balanced_accepting_value());
    }
}
