//! Autonomy and polarization indices.
//!
//! For a nonempty group `V` and a member `i`, the signed strength is
//! `beta_i = sum_{j in V} w_ji - sum_{j not in V} w_ji` (the diagonal counts
//! as internal) and `alpha_i = -sum_j w_ji`. The upper autonomy index is the
//! smallest `beta_i`, the lower one the largest `alpha_i`; the group can move
//! rigidly only when lower <= upper, otherwise its autonomy is `-inf`.
//!
//! The polarization index is the largest `Au(V1) + Au(V2)` over disjoint
//! nonempty pairs. Its sign decides strong consensus.

use std::cmp::Ordering;
use std::fmt;

use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::graph::{NodeSet, WeightedDigraph};

/// Largest `n` the exhaustive enumerations accept without an explicit
/// override.
pub const EXHAUSTIVE_LIMIT: usize = 16;

/// Hard ceiling for forced enumeration (subset tables are `2^n` entries).
pub const EXHAUSTIVE_HARD_LIMIT: usize = 24;

/// A real number or `-inf`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ExtendedReal {
    NegInfinity,
    Finite(f64),
}

impl ExtendedReal {
    pub fn finite(self) -> Option<f64> {
        match self {
            ExtendedReal::Finite(x) => Some(x),
            ExtendedReal::NegInfinity => None,
        }
    }

    pub fn is_neg_infinity(self) -> bool {
        matches!(self, ExtendedReal::NegInfinity)
    }
}

impl PartialOrd for ExtendedReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        use ExtendedReal::*;
        match (self, other) {
            (NegInfinity, NegInfinity) => Some(Ordering::Equal),
            (NegInfinity, Finite(_)) => Some(Ordering::Less),
            (Finite(_), NegInfinity) => Some(Ordering::Greater),
            (Finite(a), Finite(b)) => a.partial_cmp(b),
        }
    }
}

impl fmt::Display for ExtendedReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtendedReal::NegInfinity => f.write_str("-inf"),
            ExtendedReal::Finite(x) => write!(f, "{x}"),
        }
    }
}

impl Serialize for ExtendedReal {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ExtendedReal::NegInfinity => s.serialize_str("-inf"),
            ExtendedReal::Finite(x) => s.serialize_f64(*x),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NodeStrength {
    #[serde(serialize_with = "one_based")]
    pub node: usize,
    pub internal: f64,
    pub external: f64,
    pub beta: f64,
    pub alpha: f64,
}

fn one_based<S: Serializer>(i: &usize, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_u64(*i as u64 + 1)
}

/// Per-member internal and external strength of a group.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AutonomyBreakdown {
    pub members: Vec<NodeStrength>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exhaustive,
    ComplementExhaustive,
    BranchAndBound,
    Hybrid,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SearchStats {
    pub nodes_explored: u64,
    pub wall_time_s: f64,
    pub complete: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PolarizationResult {
    pub value: f64,
    pub v1: NodeSet,
    pub v2: NodeSet,
    pub method: Method,
    /// `true` when `value` is the polarization index itself, `false` when it
    /// is only a certified lower bound.
    pub exact: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stats: Option<SearchStats>,
}

/// `(internal, external)` strength of node `i` with respect to the group
/// given by `member`. Summation runs over `j` in index order so that every
/// caller gets bit-identical values for the same group.
#[inline]
fn strengths(g: &WeightedDigraph, i: usize, member: impl Fn(usize) -> bool) -> (f64, f64) {
    let mut internal = 0.0;
    let mut external = 0.0;
    for j in 0..g.n() {
        let w = g.weight(j, i);
        if member(j) {
            internal += w;
        } else {
            external += w;
        }
    }
    (internal, external)
}

#[inline]
fn beta_mask(g: &WeightedDigraph, i: usize, mask: u64) -> f64 {
    let (internal, external) = strengths(g, i, |j| mask >> j & 1 == 1);
    internal - external
}

/// `Au` of the group encoded by a bitmask (`n <= 64`).
pub(crate) fn autonomy_upper_mask(g: &WeightedDigraph, mask: u64) -> f64 {
    let mut best = f64::INFINITY;
    let mut m = mask;
    while m != 0 {
        let i = m.trailing_zeros() as usize;
        best = best.min(beta_mask(g, i, mask));
        m &= m - 1;
    }
    best
}

fn check_set(g: &WeightedDigraph, v: &NodeSet) -> Result<Vec<bool>> {
    if v.is_empty() {
        return Err(Error::EmptySet);
    }
    v.check_range(g.n())?;
    Ok(v.indicator(g.n()))
}

pub fn autonomy_breakdown(g: &WeightedDigraph, v: &NodeSet) -> Result<AutonomyBreakdown> {
    let ind = check_set(g, v)?;
    let members = v
        .members()
        .iter()
        .map(|&i| {
            let (internal, external) = strengths(g, i, |j| ind[j]);
            NodeStrength {
                node: i,
                internal,
                external,
                beta: internal - external,
                alpha: -g.total_in(i),
            }
        })
        .collect();
    Ok(AutonomyBreakdown { members })
}

/// `Au(V) = min_{i in V} beta_i`.
pub fn autonomy_upper(g: &WeightedDigraph, v: &NodeSet) -> Result<f64> {
    let ind = check_set(g, v)?;
    Ok(v.members()
        .iter()
        .map(|&i| {
            let (internal, external) = strengths(g, i, |j| ind[j]);
            internal - external
        })
        .fold(f64::INFINITY, f64::min))
}

/// `Al(V) = max_{i in V} alpha_i`.
pub fn autonomy_lower(g: &WeightedDigraph, v: &NodeSet) -> Result<f64> {
    check_set(g, v)?;
    Ok(v.members()
        .iter()
        .map(|&i| -g.total_in(i))
        .fold(f64::NEG_INFINITY, f64::max))
}

pub fn autonomy(g: &WeightedDigraph, v: &NodeSet) -> Result<ExtendedReal> {
    let upper = autonomy_upper(g, v)?;
    let lower = autonomy_lower(g, v)?;
    Ok(if lower <= upper {
        ExtendedReal::Finite(upper)
    } else {
        ExtendedReal::NegInfinity
    })
}

/// Every member has strictly more internal than external strength.
pub fn is_strong_community(g: &WeightedDigraph, v: &NodeSet) -> Result<bool> {
    Ok(autonomy_upper(g, v)? > 0.0)
}

/// Members attaining the minimum signed strength.
pub fn key_nodes(g: &WeightedDigraph, v: &NodeSet) -> Result<NodeSet> {
    let breakdown = autonomy_breakdown(g, v)?;
    let min = breakdown.members.iter().map(|s| s.beta).fold(f64::INFINITY, f64::min);
    Ok(NodeSet::new(
        breakdown.members.iter().filter(|s| s.beta == min).map(|s| s.node).collect(),
    ))
}

/// `Au(v1) + Au(v2)`.
pub fn pair_value(g: &WeightedDigraph, v1: &NodeSet, v2: &NodeSet) -> Result<f64> {
    Ok(autonomy_upper(g, v1)? + autonomy_upper(g, v2)?)
}

/// Candidate pair with the canonical tie-break: on equal values the pair
/// whose ternary assignment vector (0 = neither, 1 = first set, 2 = second
/// set, node 1 most significant) is lexicographically smaller wins.
#[derive(Clone, Copy, Debug)]
struct Candidate {
    value: f64,
    v1: u64,
    v2: u64,
}

impl Candidate {
    fn digit(&self, i: usize) -> u8 {
        if self.v1 >> i & 1 == 1 {
            1
        } else if self.v2 >> i & 1 == 1 {
            2
        } else {
            0
        }
    }

    fn precedes(&self, other: &Candidate, n: usize) -> bool {
        for i in 0..n {
            let (a, b) = (self.digit(i), other.digit(i));
            if a != b {
                return a < b;
            }
        }
        false
    }

    fn better(self, other: Option<Candidate>, n: usize) -> Candidate {
        match other {
            None => self,
            Some(o) if self.value > o.value || (self.value == o.value && self.precedes(&o, n)) => self,
            Some(o) => o,
        }
    }
}

fn reduce(a: Option<Candidate>, b: Option<Candidate>, n: usize) -> Option<Candidate> {
    match (a, b) {
        (None, x) | (x, None) => x,
        (Some(a), b) => Some(a.better(b, n)),
    }
}

fn guard(n: usize, limit: usize) -> Result<()> {
    let limit = limit.min(EXHAUSTIVE_HARD_LIMIT);
    if n > limit {
        Err(Error::TooLarge { n, limit })
    } else {
        Ok(())
    }
}

fn finish(g: &WeightedDigraph, best: Candidate, method: Method, exact: bool) -> Result<PolarizationResult> {
    let v1 = NodeSet::from_mask(best.v1);
    let v2 = NodeSet::from_mask(best.v2);
    Ok(PolarizationResult {
        value: pair_value(g, &v1, &v2)?,
        v1,
        v2,
        method,
        exact,
        stats: None,
    })
}

/// Exact polarization index by enumerating every disjoint nonempty pair.
/// Refuses `n > 16`.
pub fn polarization_exhaustive(g: &WeightedDigraph) -> Result<PolarizationResult> {
    polarization_exhaustive_with_limit(g, EXHAUSTIVE_LIMIT)
}

pub fn polarization_exhaustive_with_limit(g: &WeightedDigraph, limit: usize) -> Result<PolarizationResult> {
    let n = g.n();
    guard(n, limit)?;
    let full: u64 = (1 << n) - 1;
    let table: Vec<f64> = (0..=full)
        .into_par_iter()
        .map(|mask| if mask == 0 { f64::NAN } else { autonomy_upper_mask(g, mask) })
        .collect();

    // The lowest member of v1 ∪ v2 sits in v1, which removes the v1 <-> v2
    // mirror image of every pair.
    let best = (1..=full)
        .into_par_iter()
        .map(|v1| {
            let low = v1 & v1.wrapping_neg();
            let allowed = full & !v1 & !(low | (low - 1));
            let mut best: Option<Candidate> = None;
            let mut v2 = allowed;
            while v2 != 0 {
                let cand = Candidate { value: table[v1 as usize] + table[v2 as usize], v1, v2 };
                best = Some(cand.better(best, n));
                v2 = (v2 - 1) & allowed;
            }
            best
        })
        .reduce(|| None, |a, b| reduce(a, b, n))
        .expect("n >= 2 always admits a pair");
    finish(g, best, Method::Exhaustive, true)
}

/// Best complementary split `z*`. Equal to the polarization index when it
/// is nonpositive, otherwise a lower bound.
pub fn complement_z_star(g: &WeightedDigraph) -> Result<PolarizationResult> {
    complement_z_star_with_limit(g, EXHAUSTIVE_LIMIT)
}

pub fn complement_z_star_with_limit(g: &WeightedDigraph, limit: usize) -> Result<PolarizationResult> {
    let n = g.n();
    guard(n, limit)?;
    let full: u64 = (1 << n) - 1;
    let best = best_complementary(g, |v, c| autonomy_upper_mask(g, v) + autonomy_upper_mask(g, c), full);
    let exact = best.value <= 0.0;
    finish(g, best, Method::ComplementExhaustive, exact)
}

fn best_complementary(g: &WeightedDigraph, score: impl Fn(u64, u64) -> f64 + Sync, full: u64) -> Candidate {
    let n = g.n();
    // node 1 always in the first set; v = full is excluded
    let half = 1u64 << (n - 1);
    (0..half - 1)
        .into_par_iter()
        .map(|rest| {
            let v = 1 | rest << 1;
            let c = full & !v;
            Some(Candidate { value: score(v, c), v1: v, v2: c })
        })
        .reduce(|| None, |a, b| reduce(a, b, n))
        .expect("n >= 2 always admits a split")
}

/// Outcome of the satisfactory-partition search: the complementary split
/// maximizing `min(Au(V), Au(V^c))`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PartitionSearch {
    pub score: f64,
    pub v1: NodeSet,
    pub v2: NodeSet,
    pub nodes_explored: u64,
}

impl PartitionSearch {
    pub fn is_satisfactory(&self) -> bool {
        self.score > 0.0
    }
}

/// Complementary pair of strong communities, if any.
pub fn find_satisfactory_partition(g: &WeightedDigraph) -> Option<(NodeSet, NodeSet)> {
    let best = best_partition(g);
    best.is_satisfactory().then_some((best.v1, best.v2))
}

/// Depth-first search over complementary splits with node 1 pinned to the
/// first side. With `v = W^T a`, the first side has `Au = min v` and the
/// second `Au = min(-v)`; partial assignments are bounded by letting every
/// unassigned neighbour take the sign that helps each node most.
pub fn best_partition(g: &WeightedDigraph) -> PartitionSearch {
    let n = g.n();
    let mut search = PartitionDfs {
        g,
        n,
        signs: vec![0; n],
        best_score: f64::NEG_INFINITY,
        best_signs: Vec::new(),
        nodes: 0,
    };
    let assigned = vec![0.0; n];
    let remaining: Vec<f64> = (0..n).map(|i| g.total_in(i)).collect();
    search.signs[0] = 1;
    let (s, r) = apply(g, &assigned, &remaining, 0, 1.0);
    search.visit(1, &s, &r);

    let v1 = NodeSet::new((0..n).filter(|&i| search.best_signs[i] > 0).collect());
    let v2 = v1.complement(n);
    let score = autonomy_upper(g, &v1)
        .expect("nonempty")
        .min(autonomy_upper(g, &v2).expect("nonempty"));
    PartitionSearch { score, v1, v2, nodes_explored: search.nodes }
}

fn apply(g: &WeightedDigraph, assigned: &[f64], remaining: &[f64], j: usize, sign: f64) -> (Vec<f64>, Vec<f64>) {
    let s = assigned.iter().enumerate().map(|(i, &x)| x + sign * g.weight(j, i)).collect();
    let r = remaining.iter().enumerate().map(|(i, &x)| x - g.weight(j, i)).collect();
    (s, r)
}

struct PartitionDfs<'a> {
    g: &'a WeightedDigraph,
    n: usize,
    signs: Vec<i8>,
    best_score: f64,
    best_signs: Vec<i8>,
    nodes: u64,
}

impl PartitionDfs<'_> {
    fn visit(&mut self, depth: usize, assigned: &[f64], remaining: &[f64]) {
        self.nodes += 1;
        if depth == self.n {
            if self.signs.iter().all(|&a| a > 0) {
                return;
            }
            let score = (0..self.n)
                .map(|i| if self.signs[i] > 0 { assigned[i] } else { -assigned[i] })
                .fold(f64::INFINITY, f64::min);
            if score > self.best_score || self.best_signs.is_empty() {
                self.best_score = score;
                self.best_signs = self.signs.clone();
            }
            return;
        }
        let mut bound = f64::INFINITY;
        for i in 0..depth {
            let optimistic = if self.signs[i] > 0 {
                assigned[i] + remaining[i]
            } else {
                -assigned[i] + remaining[i]
            };
            bound = bound.min(optimistic);
        }
        if !self.best_signs.is_empty() && bound <= self.best_score {
            return;
        }
        for sign in [1i8, -1] {
            self.signs[depth] = sign;
            let (s, r) = apply(self.g, assigned, remaining, depth, sign as f64);
            self.visit(depth + 1, &s, &r);
        }
        self.signs[depth] = 0;
    }
}

/// A maximizing pair whose sets both have finite autonomy. A set with
/// `A = -inf` is replaced by the member attaining `Al`, whose singleton
/// autonomy is at least `Au` of the set, so the pair value is unchanged
/// when the input pair was optimal.
pub fn realizing_pair(g: &WeightedDigraph, v1: &NodeSet, v2: &NodeSet) -> Result<(NodeSet, NodeSet)> {
    let fix = |v: &NodeSet| -> Result<NodeSet> {
        if !autonomy(g, v)?.is_neg_infinity() {
            return Ok(v.clone());
        }
        let lower = autonomy_lower(g, v)?;
        let i = v
            .members()
            .iter()
            .copied()
            .find(|&i| -g.total_in(i) == lower)
            .expect("Al is attained");
        Ok(NodeSet::new(vec![i]))
    };
    Ok((fix(v1)?, fix(v2)?))
}

/// Least upper bound `r / |A|` on the consensus time from an initial spread
/// `r`, valid when the polarization index `A` is negative.
pub fn consensus_time_bound(r: f64, polarization: f64) -> Result<f64> {
    if !(r >= 0.0) || !r.is_finite() {
        return Err(Error::InvalidParameter(format!("initial spread {r} must be finite and >= 0")));
    }
    if !(polarization < 0.0) {
        return Err(Error::NoConsensusBound(polarization));
    }
    Ok(r / polarization.abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testing::{example2, k_complete, mutual_pair, two_pairs};

    fn set(members: &[usize]) -> NodeSet {
        NodeSet::from_one_based(members, 64).unwrap()
    }

    #[test]
    fn upper_autonomy_examples() {
        let g = example2();
        assert_eq!(autonomy_upper(&g, &set(&[1, 2])).unwrap(), 2.0);
        assert_eq!(autonomy_upper(&g, &set(&[1, 2, 3])).unwrap(), 1.0);
        for i in 1..=3 {
            assert_eq!(autonomy_upper(&g, &set(&[i])).unwrap(), -g.in_strength(i - 1));
        }
        assert!(matches!(autonomy_upper(&g, &NodeSet::default()), Err(Error::EmptySet)));
        assert!(autonomy_upper(&g, &set(&[4])).is_err());
    }

    #[test]
    fn lower_autonomy_examples() {
        let g = example2();
        assert_eq!(autonomy_lower(&g, &set(&[1, 2])).unwrap(), -2.0);
        assert_eq!(autonomy_lower(&g, &set(&[3])).unwrap(), -1.0);
        let iso = WeightedDigraph::from_rows(&[&[0.0, 1.0], &[0.0, 0.0]]).unwrap();
        assert_eq!(autonomy_lower(&iso, &set(&[1])).unwrap(), 0.0);
    }

    #[test]
    fn autonomy_classification() {
        let g = example2();
        assert_eq!(autonomy(&g, &set(&[1, 2])).unwrap(), ExtendedReal::Finite(2.0));
        let mut w = vec![0.0; 9];
        w[2 * 3] = 10.0; // w_31
        let h = WeightedDigraph::from_matrix(3, w).unwrap();
        assert_eq!(autonomy_upper(&h, &set(&[1, 2])).unwrap(), -10.0);
        assert_eq!(autonomy_lower(&h, &set(&[1, 2])).unwrap(), 0.0);
        assert_eq!(autonomy(&h, &set(&[1, 2])).unwrap(), ExtendedReal::NegInfinity);
        assert_eq!(autonomy(&h, &set(&[2])).unwrap(), ExtendedReal::Finite(0.0));
        assert!(ExtendedReal::NegInfinity < ExtendedReal::Finite(-1e300));
    }

    #[test]
    fn exhaustive_examples() {
        let r = polarization_exhaustive(&example2()).unwrap();
        assert_eq!(r.value, 1.0);
        assert_eq!((r.v1, r.v2), (set(&[1, 2]), set(&[3])));
        assert!(r.exact);

        let r = polarization_exhaustive(&mutual_pair()).unwrap();
        assert_eq!(r.value, -2.0);
        assert_eq!((r.v1, r.v2), (set(&[1]), set(&[2])));

        let r = polarization_exhaustive(&two_pairs()).unwrap();
        assert_eq!(r.value, 2.0);
        assert_eq!((r.v1, r.v2), (set(&[1, 2]), set(&[3, 4])));
    }

    #[test]
    fn exhaustive_refuses_large_graphs() {
        let g = WeightedDigraph::zero(17).unwrap();
        assert!(matches!(polarization_exhaustive(&g), Err(Error::TooLarge { n: 17, limit: 16 })));
        assert!(matches!(complement_z_star(&g), Err(Error::TooLarge { .. })));
        assert!(polarization_exhaustive_with_limit(&WeightedDigraph::zero(5).unwrap(), 4).is_err());
    }

    #[test]
    fn complement_examples() {
        let r = complement_z_star(&example2()).unwrap();
        assert_eq!(r.value, 1.0);
        assert_eq!((r.v1, r.v2), (set(&[1, 2]), set(&[3])));
        assert!(!r.exact);

        let r = complement_z_star(&mutual_pair()).unwrap();
        assert_eq!(r.value, -2.0);
        assert!(r.exact);

        let k3 = k_complete(3);
        let r = complement_z_star(&k3).unwrap();
        assert_eq!(r.value, -2.0);
        assert!(r.exact);
        assert_eq!(polarization_exhaustive(&k3).unwrap().value, -2.0);
    }

    #[test]
    fn strong_community_examples() {
        let g = example2();
        assert!(is_strong_community(&g, &set(&[1, 2])).unwrap());
        assert!(!is_strong_community(&g, &set(&[1])).unwrap());
        let iso = WeightedDigraph::zero(2).unwrap();
        assert!(!is_strong_community(&iso, &set(&[1])).unwrap());
    }

    #[test]
    fn satisfactory_partition_examples() {
        assert_eq!(find_satisfactory_partition(&two_pairs()), Some((set(&[1, 2]), set(&[3, 4]))));
        assert_eq!(find_satisfactory_partition(&example2()), None);
        assert_eq!(find_satisfactory_partition(&k_complete(4)), None);
        assert!(best_partition(&k_complete(4)).score <= -1.0);
    }

    #[test]
    fn key_node_examples() {
        let g = example2();
        assert_eq!(key_nodes(&g, &set(&[1, 2])).unwrap(), set(&[1, 2]));
        assert_eq!(key_nodes(&g, &set(&[1, 3])).unwrap(), set(&[1]));
        assert_eq!(key_nodes(&g, &set(&[2])).unwrap(), set(&[2]));
    }

    #[test]
    fn consensus_time_examples() {
        assert_eq!(consensus_time_bound(3.0, -2.0).unwrap(), 1.5);
        assert_eq!(consensus_time_bound(0.0, -2.0).unwrap(), 0.0);
        assert!(matches!(consensus_time_bound(2.0, 1.0), Err(Error::NoConsensusBound(_))));
        assert!(matches!(consensus_time_bound(2.0, 0.0), Err(Error::NoConsensusBound(_))));
        assert!(consensus_time_bound(-1.0, -2.0).is_err());
    }

    #[test]
    fn breakdown_reports_raw_values() {
        let b = autonomy_breakdown(&example2(), &set(&[1, 3])).unwrap();
        let node1 = &b.members[0];
        assert_eq!((node1.internal, node1.external, node1.beta, node1.alpha), (1.0, 3.0, -2.0, -4.0));
        assert_eq!(b.members[1].beta, -1.0);
    }

    mod properties {
        use super::*;
        use crate::graph::random_graph;
        use proptest::prelude::*;

        fn graph(max_n: usize) -> impl Strategy<Value = WeightedDigraph> {
            (2..=max_n, any::<u64>(), 0.0..=1.0f64, any::<bool>())
                .prop_map(|(n, seed, density, loops)| random_graph(n, 9, density, loops, seed).unwrap())
        }

        fn with_set(max_n: usize) -> impl Strategy<Value = (WeightedDigraph, NodeSet)> {
            graph(max_n).prop_flat_map(|g| {
                let n = g.n();
                (Just(g), 1u64..(1 << n)).prop_map(|(g, m)| (g, NodeSet::from_mask(m)))
            })
        }

        fn strong_nodewise(g: &WeightedDigraph, v: &NodeSet) -> bool {
            v.members().iter().all(|&i| {
                let inside: f64 = (0..g.n()).filter(|&j| v.contains(j)).map(|j| g.weight(j, i)).sum();
                let outside: f64 = (0..g.n()).filter(|&j| !v.contains(j)).map(|j| g.weight(j, i)).sum();
                inside > outside
            })
        }

        fn has_strong_community(g: &WeightedDigraph) -> bool {
            (1u64..(1 << g.n())).any(|m| autonomy_upper_mask(g, m) > 0.0)
        }

        proptest! {
            #[test]
            fn autonomy_never_exceeds_upper((g, v) in with_set(8)) {
                let upper = autonomy_upper(&g, &v).unwrap();
                let lower = autonomy_lower(&g, &v).unwrap();
                let a = autonomy(&g, &v).unwrap();
                prop_assert!(a <= ExtendedReal::Finite(upper));
                prop_assert_eq!(a == ExtendedReal::Finite(upper), lower <= upper);
            }

            #[test]
            fn subsets_through_a_key_node_are_weaker((g, v) in with_set(8), pick in any::<u64>()) {
                let keys = key_nodes(&g, &v).unwrap();
                let key = keys.members()[0];
                let sub = NodeSet::from_mask((pick & v.mask()) | 1 << key);
                prop_assert!(autonomy_upper(&g, &sub).unwrap() <= autonomy_upper(&g, &v).unwrap());
            }

            #[test]
            fn complement_bounds_polarization(g in graph(8)) {
                let full = polarization_exhaustive(&g).unwrap();
                let z = complement_z_star(&g).unwrap();
                prop_assert!(full.value >= z.value);
                if z.value <= 0.0 {
                    prop_assert_eq!(full.value, z.value);
                }
                prop_assert!(!full.v1.is_empty() && !full.v2.is_empty() && full.v1.is_disjoint(&full.v2));
                prop_assert_eq!(pair_value(&g, &full.v1, &full.v2).unwrap(), full.value);
            }

            #[test]
            fn strong_community_matches_nodewise_check((g, v) in with_set(8)) {
                prop_assert_eq!(is_strong_community(&g, &v).unwrap(), strong_nodewise(&g, &v));
            }

            #[test]
            fn community_corollaries(g in graph(8)) {
                let value = polarization_exhaustive(&g).unwrap().value;
                if find_satisfactory_partition(&g).is_some() {
                    prop_assert!(value > 0.0);
                }
                // Without strong communities every group has Au <= 0, which
                // only gives value <= 0; groups with Au = 0 (an agent with no
                // in-edges, say) keep the strict inequality from holding.
                if !has_strong_community(&g) {
                    prop_assert!(value <= 0.0);
                }
                if (1u64..(1 << g.n())).all(|m| autonomy_upper_mask(&g, m) < 0.0) {
                    prop_assert!(value < 0.0);
                }
            }

            #[test]
            fn scaling_is_linear((g, v) in with_set(7), k in -3i32..=3) {
                let c = 2f64.powi(k);
                let h = g.scaled(c).unwrap();
                prop_assert_eq!(autonomy_upper(&h, &v).unwrap(), c * autonomy_upper(&g, &v).unwrap());
                prop_assert_eq!(autonomy_lower(&h, &v).unwrap(), c * autonomy_lower(&g, &v).unwrap());
                prop_assert_eq!(key_nodes(&h, &v).unwrap(), key_nodes(&g, &v).unwrap());
                let (p, q) = (polarization_exhaustive(&g).unwrap(), polarization_exhaustive(&h).unwrap());
                prop_assert_eq!(q.value, c * p.value);
                prop_assert_eq!((q.v1, q.v2), (p.v1, p.v2));
            }

            #[test]
            fn partition_search_is_exhaustive(g in graph(9)) {
                let full: u64 = (1 << g.n()) - 1;
                let best = (1..full)
                    .map(|m| autonomy_upper_mask(&g, m).min(autonomy_upper_mask(&g, full & !m)))
                    .fold(f64::NEG_INFINITY, f64::max);
                prop_assert_eq!(best_partition(&g).score, best);
            }
        }
    }
}
