//! Order-theoretic measurements over po-relations: width and minimum
//! chain partitions (Dilworth duality via bipartite matching), minimum
//! indistinguishable-antichain partitions, possible-rank and index
//! intervals, order ideals, and the static width bounds used by the
//! decision dispatcher.

use crate::algebra::Query;
use crate::model::{Id, PoRelation};

/// A partition of the identifiers into chains, each listed in ascending
/// order of the relation's partial order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainPartition {
    pub chains: Vec<Vec<Id>>,
}

impl ChainPartition {
    pub fn cardinality(&self) -> usize {
        self.chains.len()
    }
}

/// A partition of the identifiers into indistinguishable antichains:
/// classes of pairwise incomparable elements that relate identically to
/// everything outside the class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IaPartition {
    pub classes: Vec<Vec<Id>>,
}

impl IaPartition {
    pub fn cardinality(&self) -> usize {
        self.classes.len()
    }
}

/// Closed 1-based position interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RankInterval {
    pub lo: usize,
    pub hi: usize,
}

impl RankInterval {
    pub fn contains(&self, p: usize) -> bool {
        self.lo <= p && p <= self.hi
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum OrderError {
    #[error("identifiers {0} and {1} are not a distinct incomparable pair")]
    ComparablePair(Id, Id),
    #[error("unknown identifier {0}")]
    UnknownId(Id),
    #[error("query contains {0}, outside the required fragment")]
    FragmentViolation(&'static str),
}

/// Minimum chain partition, computed by maximum bipartite matching on the
/// comparability DAG and stitching matched edges into chains. Its
/// cardinality is the poset width.
pub fn min_chain_partition(r: &PoRelation) -> ChainPartition {
    let n = r.len();
    // matching[j] = i when the edge i < j is matched; each element has at
    // most one matched successor and one matched predecessor.
    let mut match_succ: Vec<Option<usize>> = vec![None; n];
    let mut match_pred: Vec<Option<usize>> = vec![None; n];
    let mut seen = vec![false; n];
    for i in 0..n {
        seen.iter_mut().for_each(|s| *s = false);
        augment(r, i, &mut match_succ, &mut match_pred, &mut seen);
    }
    let mut chains = Vec::new();
    for start in 0..n {
        if match_pred[start].is_some() {
            continue;
        }
        let mut chain = vec![r.id_at(start)];
        let mut cur = start;
        while let Some(next) = match_succ[cur] {
            chain.push(r.id_at(next));
            cur = next;
        }
        chains.push(chain);
    }
    ChainPartition { chains }
}

fn augment(
    r: &PoRelation,
    i: usize,
    match_succ: &mut Vec<Option<usize>>,
    match_pred: &mut Vec<Option<usize>>,
    seen: &mut Vec<bool>,
) -> bool {
    for j in r.above_matrix().iter_row(i) {
        if seen[j] {
            continue;
        }
        seen[j] = true;
        let free = match match_pred[j] {
            None => true,
            Some(prev) => augment(r, prev, match_succ, match_pred, seen),
        };
        if free {
            match_succ[i] = Some(j);
            match_pred[j] = Some(i);
            return true;
        }
    }
    false
}

/// Size of the largest antichain; equals the minimum number of chains
/// covering the poset.
pub fn width(r: &PoRelation) -> usize {
    min_chain_partition(r).cardinality()
}

/// Minimum-cardinality partition into indistinguishable antichains,
/// computed by the greedy pairwise class-merge loop. Merge attempts
/// iterate over unordered pairs in ascending identifier order, so the
/// result is deterministic.
pub fn ia_partition(r: &PoRelation) -> IaPartition {
    let n = r.len();
    let mut class_of: Vec<usize> = (0..n).collect();
    let mut members: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    loop {
        let mut merged = false;
        for i in 0..n {
            for j in i + 1..n {
                let (ci, cj) = (class_of[i], class_of[j]);
                if ci == cj {
                    continue;
                }
                if mergeable(r, &members[ci], &members[cj], &class_of, ci, cj) {
                    let moved = std::mem::take(&mut members[cj]);
                    for &m in &moved {
                        class_of[m] = ci;
                    }
                    members[ci].extend(moved);
                    merged = true;
                }
            }
        }
        if !merged {
            break;
        }
    }
    let mut classes: Vec<Vec<Id>> = members
        .into_iter()
        .filter(|m| !m.is_empty())
        .map(|mut m| {
            m.sort_unstable();
            m.into_iter().map(|p| r.id_at(p)).collect()
        })
        .collect();
    classes.sort_by_key(|c| c[0]);
    IaPartition { classes }
}

fn mergeable(
    r: &PoRelation,
    a: &[usize],
    b: &[usize],
    class_of: &[usize],
    ca: usize,
    cb: usize,
) -> bool {
    // The union must be an antichain...
    for &x in a {
        for &y in b {
            if r.lt(x, y) || r.lt(y, x) {
                return false;
            }
        }
    }
    // ...and an indistinguishable set: members agree on every outsider.
    let rep = a[0];
    for &x in a.iter().chain(b) {
        for z in 0..r.len() {
            if class_of[z] == ca || class_of[z] == cb {
                continue;
            }
            if r.lt(x, z) != r.lt(rep, z) || r.lt(z, x) != r.lt(z, rep) {
                return false;
            }
        }
    }
    true
}

pub fn ia_width(r: &PoRelation) -> usize {
    ia_partition(r).cardinality()
}

/// Joint position interval for a pair of distinct incomparable elements:
/// `[|anc(x) ∪ anc(y)| + 1, n − |desc(x) ∪ desc(y)|]`.
pub fn possible_ranks(r: &PoRelation, x: Id, y: Id) -> Result<RankInterval, OrderError> {
    let px = r.position(x).ok_or(OrderError::UnknownId(x))?;
    let py = r.position(y).ok_or(OrderError::UnknownId(y))?;
    if !r.incomparable(px, py) {
        return Err(OrderError::ComparablePair(x, y));
    }
    let a = r.below_matrix().union_count(px, py);
    let d = r.above_matrix().union_count(px, py);
    Ok(RankInterval { lo: a + 1, hi: r.len() - d })
}

/// Achievable position interval of a single element across all linear
/// extensions: `[|anc| + 1, n − |desc|]`.
pub fn index_interval(r: &PoRelation, id: Id) -> Result<RankInterval, OrderError> {
    let p = r.position(id).ok_or(OrderError::UnknownId(id))?;
    Ok(RankInterval {
        lo: r.ancestor_count(p) + 1,
        hi: r.len() - r.descendant_count(p),
    })
}

/// True iff `s` is downward closed.
pub fn is_order_ideal(r: &PoRelation, s: &std::collections::BTreeSet<Id>) -> bool {
    let positions: Vec<usize> = s.iter().filter_map(|id| r.position(*id)).collect();
    if positions.len() != s.len() {
        return false;
    }
    let mut in_set = vec![false; r.len()];
    for &p in &positions {
        in_set[p] = true;
    }
    positions
        .iter()
        .all(|&p| r.below_matrix().iter_row(p).all(|q| in_set[q]))
}

/// Static width bound `k^(|Q|+1)` for queries without the direct product,
/// where `|Q|` counts the AST nodes. Saturates instead of overflowing.
pub fn width_bound_lex(q: &Query, k: usize) -> Result<u64, OrderError> {
    if !q.is_dir_free() {
        return Err(OrderError::FragmentViolation("a direct product"));
    }
    let base = k.max(2) as u128;
    let mut bound: u128 = 1;
    for _ in 0..=q.symbol_count() {
        bound = bound.saturating_mul(base);
        if bound > u64::MAX as u128 {
            return Ok(u64::MAX);
        }
    }
    Ok(bound as u64)
}

/// Static ia-width bound `max(k, qmax) · |Q|` for product-free queries,
/// where `qmax` is the largest constant-chain length appearing in the
/// query.
pub fn ia_width_bound_noprod(q: &Query, k: usize, qmax: usize) -> Result<u64, OrderError> {
    if !q.is_product_free() {
        return Err(OrderError::FragmentViolation("a product"));
    }
    Ok((k.max(qmax).max(1) as u64).saturating_mul(q.symbol_count() as u64))
}
