//! Weighted digraphs, node sets, the JSON edge-list format, seeded random
//! instances and the node-splitting transform.
//!
//! Indices are 0-based in memory and 1-based in every serialized form.
//! Entry `(j, i)` of the weight matrix is the influence of agent `j` on
//! agent `i`; the diagonal entry `(i, i)` is the disturbance bound of `i`.

use std::collections::HashSet;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GraphDocument", into = "GraphDocument")]
pub struct WeightedDigraph {
    n: usize,
    w: Vec<f64>,
}

/// On-disk form: `{"n": 3, "edges": [[j, i, w], ...]}`, 1-based.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphDocument {
    n: usize,
    edges: Vec<(usize, usize, f64)>,
}

impl TryFrom<GraphDocument> for WeightedDigraph {
    type Error = Error;

    fn try_from(doc: GraphDocument) -> Result<Self> {
        if doc.n < 2 {
            return Err(Error::InvalidGraph(format!("n = {} (need n >= 2)", doc.n)));
        }
        let n = doc.n;
        let mut w = vec![0.0; n * n];
        let mut seen = HashSet::with_capacity(doc.edges.len());
        for (j, i, weight) in doc.edges {
            for idx in [j, i] {
                if idx == 0 || idx > n {
                    return Err(Error::IndexOutOfRange { index: idx, n });
                }
            }
            if !weight.is_finite() {
                return Err(Error::InvalidGraph(format!("non-finite weight on edge ({j}, {i})")));
            }
            if weight < 0.0 {
                return Err(Error::InvalidGraph(format!("negative weight {weight} on edge ({j}, {i})")));
            }
            if weight == 0.0 {
                return Err(Error::InvalidGraph(format!("zero weight on edge ({j}, {i})")));
            }
            if !seen.insert((j, i)) {
                return Err(Error::InvalidGraph(format!("duplicate edge ({j}, {i})")));
            }
            w[(j - 1) * n + (i - 1)] = weight;
        }
        Ok(WeightedDigraph { n, w })
    }
}

impl From<WeightedDigraph> for GraphDocument {
    fn from(g: WeightedDigraph) -> Self {
        let edges = g.edges().map(|(j, i, w)| (j + 1, i + 1, w)).collect();
        GraphDocument { n: g.n, edges }
    }
}

impl WeightedDigraph {
    /// Builds a graph from a row-major matrix, row `j` column `i` = `w_ji`.
    pub fn from_matrix(n: usize, w: Vec<f64>) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidGraph(format!("n = {n} (need n >= 2)")));
        }
        if w.len() != n * n {
            return Err(Error::InvalidGraph(format!("expected {} entries, got {}", n * n, w.len())));
        }
        for (k, &x) in w.iter().enumerate() {
            if !x.is_finite() || x < 0.0 {
                return Err(Error::InvalidGraph(format!(
                    "entry ({}, {}) = {x} is not a nonnegative finite number",
                    k / n + 1,
                    k % n + 1
                )));
            }
        }
        Ok(WeightedDigraph { n, w })
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidGraph("matrix is not square".into()));
        }
        Self::from_matrix(n, rows.iter().flat_map(|r| r.iter().copied()).collect())
    }

    pub fn zero(n: usize) -> Result<Self> {
        Self::from_matrix(n, vec![0.0; n * n])
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    /// `w_ji`: influence of `j` on `i`.
    #[inline]
    pub fn weight(&self, j: usize, i: usize) -> f64 {
        self.w[j * self.n + i]
    }

    #[inline]
    pub fn disturbance_bound(&self, i: usize) -> f64 {
        self.w[i * self.n + i]
    }

    pub fn disturbance_bounds(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.disturbance_bound(i)).collect()
    }

    /// Off-diagonal in-strength `sum_{j != i} w_ji`.
    pub fn in_strength(&self, i: usize) -> f64 {
        (0..self.n).filter(|&j| j != i).map(|j| self.weight(j, i)).sum()
    }

    /// Column sum including the diagonal, `sum_j w_ji`.
    pub fn total_in(&self, i: usize) -> f64 {
        (0..self.n).map(|j| self.weight(j, i)).sum()
    }

    pub fn out_strength(&self, j: usize) -> f64 {
        (0..self.n).filter(|&i| i != j).map(|i| self.weight(j, i)).sum()
    }

    /// Largest velocity magnitude any agent can reach: max over `i` of
    /// off-diagonal in-strength plus disturbance bound.
    pub fn max_speed(&self) -> f64 {
        (0..self.n).map(|i| self.total_in(i)).fold(0.0, f64::max)
    }

    /// Nonzero entries as 0-based `(j, i, w_ji)`, row-major.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let n = self.n;
        self.w
            .iter()
            .enumerate()
            .filter(|(_, &w)| w > 0.0)
            .map(move |(k, &w)| (k / n, k % n, w))
    }

    pub fn matrix(&self) -> &[f64] {
        &self.w
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::from_matrix(self.n, self.w.iter().map(|x| x * c).collect())
    }

    /// Relabels nodes: node `k` of the result is node `perm[k]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.n;
        if perm.len() != n {
            return Err(Error::InvalidParameter("permutation length mismatch".into()));
        }
        let mut w = vec![0.0; n * n];
        for a in 0..n {
            for b in 0..n {
                w[a * n + b] = self.weight(perm[a], perm[b]);
            }
        }
        Self::from_matrix(n, w)
    }

    pub fn is_integral(&self) -> bool {
        self.w.iter().all(|x| x.round() == *x)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("graph serialization is infallible")
    }

    pub fn to_matrix_text(&self) -> String {
        let mut out = String::new();
        for j in 0..self.n {
            let row: Vec<String> = (0..self.n).map(|i| self.weight(j, i).to_string()).collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn from_matrix_text(text: &str) -> Result<Self> {
        let rows: Vec<Vec<f64>> = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                l.split_whitespace()
                    .map(|tok| {
                        tok.parse::<f64>()
                            .map_err(|e| Error::InvalidGraph(format!("bad number {tok:?}: {e}")))
                    })
                    .collect()
            })
            .collect::<Result<_>>()?;
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidGraph("matrix is not square".into()));
        }
        Self::from_matrix(n, rows.into_iter().flatten().collect())
    }
}

pub fn load_graph(document: &str) -> Result<WeightedDigraph> {
    Ok(serde_json::from_str(document)?)
}

pub fn save_graph(g: &WeightedDigraph) -> String {
    g.to_json()
}

/// Sorted set of 0-based agent indices; serialized 1-based.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeSet(Vec<usize>);

impl NodeSet {
    pub fn new(mut members: Vec<usize>) -> Self {
        members.sort_unstable();
        members.dedup();
        NodeSet(members)
    }

    /// Parses 1-based indices and checks them against `n`.
    pub fn from_one_based(members: &[usize], n: usize) -> Result<Self> {
        let mut out = Vec::with_capacity(members.len());
        for &m in members {
            if m == 0 || m > n {
                return Err(Error::IndexOutOfRange { index: m, n });
            }
            out.push(m - 1);
        }
        Ok(Self::new(out))
    }

    pub fn from_mask(mask: u64) -> Self {
        NodeSet((0..64).filter(|&k| mask >> k & 1 == 1).collect())
    }

    pub fn full(n: usize) -> Self {
        NodeSet((0..n).collect())
    }

    pub fn members(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0.binary_search(&i).is_ok()
    }

    pub fn mask(&self) -> u64 {
        self.0.iter().fold(0, |m, &i| m | 1 << i)
    }

    /// Membership vector of length `n`.
    pub fn indicator(&self, n: usize) -> Vec<bool> {
        let mut v = vec![false; n];
        for &i in &self.0 {
            v[i] = true;
        }
        v
    }

    pub fn complement(&self, n: usize) -> Self {
        let ind = self.indicator(n);
        NodeSet((0..n).filter(|&i| !ind[i]).collect())
    }

    pub fn is_disjoint(&self, other: &NodeSet) -> bool {
        self.0.iter().all(|&i| !other.contains(i))
    }

    pub fn check_range(&self, n: usize) -> Result<()> {
        match self.0.last() {
            Some(&m) if m >= n => Err(Error::IndexOutOfRange { index: m + 1, n }),
            _ => Ok(()),
        }
    }

    pub fn one_based(&self) -> Vec<usize> {
        self.0.iter().map(|i| i + 1).collect()
    }
}

impl fmt::Display for NodeSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let items: Vec<String> = self.one_based().iter().map(|i| i.to_string()).collect();
        write!(f, "{{{}}}", items.join(","))
    }
}

impl Serialize for NodeSet {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.one_based().serialize(s)
    }
}

impl<'de> Deserialize<'de> for NodeSet {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = Vec::<usize>::deserialize(d)?;
        if raw.contains(&0) {
            return Err(serde::de::Error::custom("node indices are 1-based"));
        }
        Ok(NodeSet::new(raw.into_iter().map(|i| i - 1).collect()))
    }
}

/// Correspondence between original nodes and the subnodes produced by
/// [`split_nodes`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitMap {
    pub forward: Vec<Vec<usize>>,
    pub backward: Vec<usize>,
}

impl SplitMap {
    /// Copies each original state onto all of its subnodes.
    pub fn expand_state(&self, x: &[f64]) -> Vec<f64> {
        self.backward.iter().map(|&orig| x[orig]).collect()
    }

    pub fn is_identity(&self) -> bool {
        self.backward.iter().enumerate().all(|(k, &o)| k == o)
    }
}

impl Serialize for SplitMap {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Doc {
            forward: Vec<Vec<usize>>,
            backward: Vec<usize>,
        }
        Doc {
            forward: self.forward.iter().map(|l| l.iter().map(|k| k + 1).collect()).collect(),
            backward: self.backward.iter().map(|k| k + 1).collect(),
        }
        .serialize(s)
    }
}

/// Converts an integer-weighted graph into one with unit off-diagonal
/// weights. A node whose largest outgoing weight is `p > 1` becomes `p`
/// subnodes; every incoming edge reaches all subnodes and an outgoing edge
/// of weight `k` leaves from the first `k` subnodes. Each subnode keeps the
/// original disturbance bound on its diagonal.
pub fn split_nodes(g: &WeightedDigraph) -> Result<(WeightedDigraph, SplitMap)> {
    let n = g.n();
    for (j, i, w) in g.edges() {
        if j != i && w.round() != w {
            return Err(Error::NonIntegerWeight { from: j + 1, to: i + 1, weight: w });
        }
    }
    let parts: Vec<usize> = (0..n)
        .map(|j| {
            let p = (0..n).filter(|&i| i != j).map(|i| g.weight(j, i)).fold(0.0, f64::max);
            (p as usize).max(1)
        })
        .collect();

    let mut forward = Vec::with_capacity(n);
    let mut backward = Vec::new();
    for (orig, &p) in parts.iter().enumerate() {
        let start = backward.len();
        forward.push((start..start + p).collect::<Vec<_>>());
        backward.extend(std::iter::repeat_n(orig, p));
    }

    let total = backward.len();
    let mut w = vec![0.0; total * total];
    for (j, i, weight) in g.edges() {
        if j == i {
            for &s in &forward[i] {
                w[s * total + s] = weight;
            }
            continue;
        }
        let k = weight as usize;
        for &src in &forward[j][..k] {
            for &dst in &forward[i] {
                w[src * total + dst] = 1.0;
            }
        }
    }
    let split = WeightedDigraph::from_matrix(total, w)?;
    Ok((split, SplitMap { forward, backward }))
}

/// Seeded random digraph: every ordered pair (and every diagonal entry when
/// `self_loops` is set) carries an edge with probability `density`, with an
/// integer weight drawn uniformly from `1..=max_weight`.
pub fn random_graph(
    n: usize,
    max_weight: u32,
    density: f64,
    self_loops: bool,
    seed: u64,
) -> Result<WeightedDigraph> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("n = {n} (need n >= 2)")));
    }
    if max_weight < 1 {
        return Err(Error::InvalidParameter("max_weight must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&density) {
        return Err(Error::InvalidParameter(format!("density {density} outside [0, 1]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = vec![0.0; n * n];
    for j in 0..n {
        for i in 0..n {
            if j == i && !self_loops {
                continue;
            }
            if rng.random::<f64>() < density {
                w[j * n + i] = rng.random_range(1..=max_weight) as f64;
            }
        }
    }
    WeightedDigraph::from_matrix(n, w)
}
