//! Polarization through sign vectors.
//!
//! A complete sign vector `a` in `{-1, +1}^n` splits the agents into
//! `V+ = {a_i = +1}` and `V- = {a_i = -1}`. With `v = W^T a` the inner
//! problem has the closed-form value `min_{V+} v - max_{V-} v`, which is
//! `Au(V+) + Au(V-)`. Maximizing it over sign vectors gives `z†`; when
//! `z† <= 0` it is the polarization index itself.

use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{NodeSet, WeightedDigraph};
use crate::indices::{pair_value, polarization_exhaustive, Method, PolarizationResult, SearchStats, EXHAUSTIVE_LIMIT};

/// Entries in `{-1, 0, +1}`; `0` marks an unassigned agent.
pub type SignVector = Vec<i8>;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InnerDualSolution {
    pub value: f64,
    pub c1: f64,
    pub c2: f64,
    pub slack: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BnbResult {
    pub z_dagger: f64,
    pub witness: SignVector,
    pub nodes_explored: u64,
    #[serde(rename = "wall_time_s", serialize_with = "seconds")]
    pub wall_time: Duration,
    /// `false` when the time budget ran out; `z_dagger` is then the best
    /// value found, still a lower bound on the optimum.
    pub complete: bool,
}

fn seconds<S: serde::Serializer>(d: &Duration, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_f64(d.as_secs_f64())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BnbOptions {
    /// Worker threads; `1` gives a deterministic search order.
    pub threads: usize,
    pub time_budget: Option<Duration>,
}

impl Default for BnbOptions {
    fn default() -> Self {
        BnbOptions { threads: 1, time_budget: None }
    }
}

fn check_signs(g: &WeightedDigraph, a: &[i8], complete: bool) -> Result<()> {
    if a.len() != g.n() {
        return Err(Error::InvalidSignVector(format!("length {} for n = {}", a.len(), g.n())));
    }
    if let Some(x) = a.iter().find(|&&x| !(-1..=1).contains(&x)) {
        return Err(Error::InvalidSignVector(format!("entry {x} is not -1, 0 or +1")));
    }
    if complete && a.contains(&0) {
        return Err(Error::InvalidSignVector("vector has unassigned entries".into()));
    }
    if !a.contains(&0) && (a.iter().all(|&x| x > 0) || a.iter().all(|&x| x < 0)) {
        return Err(Error::InvalidSignVector("all entries have the same sign".into()));
    }
    Ok(())
}

/// `v = W^T a`, i.e. `v_i = sum_j w_ji a_j`.
fn transpose_apply(g: &WeightedDigraph, a: &[i8]) -> Vec<f64> {
    (0..g.n())
        .map(|i| (0..g.n()).map(|j| g.weight(j, i) * a[j] as f64).sum())
        .collect()
}

fn min_max(v: &[f64], a: &[i8]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (&x, &s) in v.iter().zip(a) {
        if s > 0 {
            lo = lo.min(x);
        } else {
            hi = hi.max(x);
        }
    }
    (lo, hi)
}

pub fn inner_value(g: &WeightedDigraph, a: &[i8]) -> Result<f64> {
    check_signs(g, a, true)?;
    let (lo, hi) = min_max(&transpose_apply(g, a), a);
    Ok(lo - hi)
}

/// Optimal point of the inner dual in closed form.
pub fn inner_dual_certificate(g: &WeightedDigraph, a: &[i8]) -> Result<InnerDualSolution> {
    check_signs(g, a, true)?;
    let v = transpose_apply(g, a);
    let (lo, hi) = min_max(&v, a);
    let c1 = (lo + hi) / 2.0;
    let c2 = (lo - hi) / 2.0;
    let slack = v.iter().zip(a).map(|(&vi, &ai)| ai as f64 * (vi - c1) - c2).collect();
    Ok(InnerDualSolution { value: lo - hi, c1, c2, slack })
}

/// Upper bound on `inner_value` over every feasible completion of `a`.
pub fn bound(g: &WeightedDigraph, a: &[i8]) -> Result<f64> {
    check_signs(g, a, false)?;
    if !a.contains(&0) {
        return inner_value(g, a);
    }
    let n = g.n();
    let mut s = vec![0.0; n];
    let mut rem = vec![0.0; n];
    for i in 0..n {
        for j in 0..n {
            let w = g.weight(j, i);
            if a[j] == 0 {
                rem[i] += w;
            } else {
                s[i] += w * a[j] as f64;
            }
        }
    }
    Ok(partial_bound(a, &s, &rem))
}

/// With partial sums `s` and unassigned mass `rem`, every completion has
/// `s - rem <= v <= s + rem`. The smallest `v` on `V+` is at most the
/// optimistic value of any node already in `V+` (or of some unassigned
/// node if `V+` is still empty); symmetrically for `V-`.
fn partial_bound(a: &[i8], s: &[f64], rem: &[f64]) -> f64 {
    let mut hi_plus = f64::INFINITY;
    let mut lo_minus = f64::NEG_INFINITY;
    let mut free_u = f64::NEG_INFINITY;
    let mut free_l = f64::INFINITY;
    let mut any_plus = false;
    let mut any_minus = false;
    for i in 0..a.len() {
        let u = s[i] + rem[i];
        let l = s[i] - rem[i];
        match a[i] {
            1 => {
                any_plus = true;
                hi_plus = hi_plus.min(u);
            }
            -1 => {
                any_minus = true;
                lo_minus = lo_minus.max(l);
            }
            _ => {
                free_u = free_u.max(u);
                free_l = free_l.min(l);
            }
        }
    }
    match (any_plus, any_minus) {
        (true, true) => hi_plus - lo_minus,
        (true, false) => hi_plus - free_l,
        (false, true) => free_u - lo_minus,
        (false, false) => {
            let mut best = f64::NEG_INFINITY;
            for i in 0..a.len() {
                for k in 0..a.len() {
                    if i != k {
                        best = best.max(s[i] + rem[i] - (s[k] - rem[k]));
                    }
                }
            }
            best
        }
    }
}

/// Monotone maximum of an `f64` shared between workers.
struct SharedIncumbent(AtomicU64);

impl SharedIncumbent {
    fn new(x: f64) -> Self {
        SharedIncumbent(AtomicU64::new(x.to_bits()))
    }

    fn get(&self) -> f64 {
        f64::from_bits(self.0.load(Ordering::Relaxed))
    }

    fn raise(&self, x: f64) {
        let mut cur = self.0.load(Ordering::Relaxed);
        while x > f64::from_bits(cur) {
            match self.0.compare_exchange_weak(cur, x.to_bits(), Ordering::Relaxed, Ordering::Relaxed) {
                Ok(_) => return,
                Err(actual) => cur = actual,
            }
        }
    }
}

struct Shared<'a> {
    g: &'a WeightedDigraph,
    order: Vec<usize>,
    incumbent: SharedIncumbent,
    nodes: AtomicU64,
    aborted: AtomicBool,
    deadline: Option<Instant>,
}

struct Worker<'a, 'b> {
    shared: &'b Shared<'a>,
    a: SignVector,
    best: Option<(f64, SignVector)>,
    nodes: u64,
}

impl Worker<'_, '_> {
    fn new<'a, 'b>(shared: &'b Shared<'a>, a: SignVector) -> Worker<'a, 'b> {
        Worker { shared, a, best: None, nodes: 0 }
    }

    fn assign(&self, s: &[f64], rem: &[f64], j: usize, sign: i8) -> (Vec<f64>, Vec<f64>) {
        let g = self.shared.g;
        let mut s = s.to_vec();
        let mut rem = rem.to_vec();
        for i in 0..g.n() {
            let w = g.weight(j, i);
            if w != 0.0 {
                s[i] += w * sign as f64;
                rem[i] -= w;
            }
        }
        (s, rem)
    }

    fn out_of_time(&mut self) -> bool {
        if self.shared.aborted.load(Ordering::Relaxed) {
            return true;
        }
        if self.nodes.is_multiple_of(1024) {
            if let Some(deadline) = self.shared.deadline {
                if Instant::now() >= deadline {
                    self.shared.aborted.store(true, Ordering::Relaxed);
                    return true;
                }
            }
        }
        false
    }

    /// Explores every completion of `self.a` whose first `depth` branching
    /// positions are fixed.
    fn run(&mut self, depth: usize, s: Vec<f64>, rem: Vec<f64>) {
        self.nodes += 1;
        if self.out_of_time() {
            return;
        }
        let order = &self.shared.order;
        if depth == order.len() {
            if self.a.iter().all(|&x| x > 0) {
                return;
            }
            let (lo, hi) = min_max(&s, &self.a);
            let value = lo - hi;
            if value > self.shared.incumbent.get() {
                self.best = Some((value, self.a.clone()));
                self.shared.incumbent.raise(value);
            }
            return;
        }
        if partial_bound(&self.a, &s, &rem) <= self.shared.incumbent.get() {
            return;
        }
        let j = order[depth];
        for sign in [1i8, -1] {
            let (s2, r2) = self.assign(&s, &rem, j, sign);
            self.a[j] = sign;
            self.run(depth + 1, s2, r2);
        }
        self.a[j] = 0;
    }
}

/// Branching order: descending total in-strength, ties by index.
fn branching_order(g: &WeightedDigraph) -> Vec<usize> {
    let mut order: Vec<usize> = (0..g.n()).collect();
    order.sort_by(|&x, &y| g.total_in(y).total_cmp(&g.total_in(x)).then(x.cmp(&y)));
    order
}

/// Net-flow split: `+1` for agents whose outgoing strength exceeds their
/// incoming strength, repaired if one-sided, oriented so the first
/// branching node is `+1`.
fn greedy_split(g: &WeightedDigraph, order: &[usize]) -> SignVector {
    let mut a: SignVector = (0..g.n())
        .map(|i| if g.out_strength(i) - g.in_strength(i) > 0.0 { 1 } else { -1 })
        .collect();
    if a.iter().all(|&x| x == a[0]) {
        let last = order[order.len() - 1];
        a[last] = -a[last];
    }
    if a[order[0]] < 0 {
        a.iter_mut().for_each(|x| *x = -*x);
    }
    a
}

pub fn bnb_solve(g: &WeightedDigraph) -> BnbResult {
    bnb_solve_with(g, BnbOptions::default())
}

pub fn bnb_solve_with(g: &WeightedDigraph, opts: BnbOptions) -> BnbResult {
    let start = Instant::now();
    let n = g.n();
    let order = branching_order(g);
    let greedy = greedy_split(g, &order);
    let greedy_value = inner_value(g, &greedy).expect("greedy split is feasible");
    let shared = Shared {
        g,
        order,
        incumbent: SharedIncumbent::new(greedy_value),
        nodes: AtomicU64::new(0),
        aborted: AtomicBool::new(false),
        deadline: opts.time_budget.map(|b| start + b),
    };

    let root = shared.order[0];
    let a0 = {
        let mut a = vec![0i8; n];
        a[root] = 1;
        a
    };
    let zeros = vec![0.0; n];
    let totals: Vec<f64> = (0..n).map(|i| g.total_in(i)).collect();
    let probe = Worker::new(&shared, vec![0; n]);
    let (s0, r0) = probe.assign(&zeros, &totals, root, 1);

    let threads = opts.threads.max(1);
    let found: Vec<(f64, SignVector)> = if threads == 1 || n < 8 {
        let mut w = Worker::new(&shared, a0);
        w.run(1, s0, r0);
        shared.nodes.fetch_add(w.nodes, Ordering::Relaxed);
        w.best.into_iter().collect()
    } else {
        let prefix_depth = (1 + (4 * threads).next_power_of_two().trailing_zeros() as usize).min(n - 1);
        let mut tasks = vec![(a0, s0, r0)];
        for depth in 1..prefix_depth {
            let j = shared.order[depth];
            tasks = tasks
                .into_iter()
                .flat_map(|(a, s, r)| {
                    [1i8, -1].map(|sign| {
                        let (s2, r2) = probe.assign(&s, &r, j, sign);
                        let mut a2 = a.clone();
                        a2[j] = sign;
                        (a2, s2, r2)
                    })
                })
                .collect();
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .expect("thread pool");
        let per_task: Vec<Option<(f64, SignVector)>> = pool.install(|| {
            tasks
                .into_par_iter()
                .map(|(a, s, r)| {
                    let mut w = Worker::new(&shared, a);
                    w.run(prefix_depth, s, r);
                    shared.nodes.fetch_add(w.nodes, Ordering::Relaxed);
                    w.best
                })
                .collect()
        });
        per_task.into_iter().flatten().collect()
    };

    let mut best = (greedy_value, greedy);
    for (value, a) in found {
        if value > best.0 {
            best = (value, a);
        }
    }
    let z_dagger = inner_value(g, &best.1).expect("witness is feasible");
    BnbResult {
        z_dagger,
        witness: best.1,
        nodes_explored: shared.nodes.load(Ordering::Relaxed),
        wall_time: start.elapsed(),
        complete: !shared.aborted.load(Ordering::Relaxed),
    }
}

fn sides(a: &[i8]) -> (NodeSet, NodeSet) {
    let plus = NodeSet::new((0..a.len()).filter(|&i| a[i] > 0).collect());
    let minus = NodeSet::new((0..a.len()).filter(|&i| a[i] < 0).collect());
    if plus.members()[0] < minus.members()[0] {
        (plus, minus)
    } else {
        (minus, plus)
    }
}

pub fn polarization(g: &WeightedDigraph) -> Result<PolarizationResult> {
    polarization_with(g, BnbOptions::default())
}

/// Branch and bound first; when `z† > 0` the exact value needs the pair
/// enumeration, which is run for `n <= 16`. Larger graphs get `z†` as a
/// certified lower bound.
pub fn polarization_with(g: &WeightedDigraph, opts: BnbOptions) -> Result<PolarizationResult> {
    let r = bnb_solve_with(g, opts);
    let stats = SearchStats {
        nodes_explored: r.nodes_explored,
        wall_time_s: r.wall_time.as_secs_f64(),
        complete: r.complete,
    };
    if r.complete && r.z_dagger <= 0.0 {
        let (v1, v2) = sides(&r.witness);
        return Ok(PolarizationResult {
            value: pair_value(g, &v1, &v2)?,
            v1,
            v2,
            method: Method::BranchAndBound,
            exact: true,
            stats: Some(stats),
        });
    }
    if g.n() <= EXHAUSTIVE_LIMIT {
        let mut exact = polarization_exhaustive(g)?;
        exact.method = Method::Hybrid;
        exact.stats = Some(stats);
        return Ok(exact);
    }
    let (v1, v2) = sides(&r.witness);
    Ok(PolarizationResult {
        value: pair_value(g, &v1, &v2)?,
        v1,
        v2,
        method: Method::BranchAndBound,
        exact: false,
        stats: Some(stats),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::random_graph;
    use crate::indices::{autonomy_upper, complement_z_star};
    use crate::testing::{example2, k_complete, mutual_pair};
    use proptest::prelude::*;

    #[test]
    fn inner_value_examples() {
        let g = example2();
        assert_eq!(inner_value(&g, &[1, 1, -1]).unwrap(), 1.0);
        assert_eq!(inner_value(&g, &[-1, -1, 1]).unwrap(), 1.0);
        assert_eq!(inner_value(&mutual_pair(), &[1, -1]).unwrap(), -2.0);
        assert!(inner_value(&g, &[1, 1, 1]).is_err());
        assert!(inner_value(&g, &[1, 0, -1]).is_err());
        assert!(inner_value(&g, &[1, -1]).is_err());
    }

    #[test]
    fn dual_certificate_examples() {
        let c = inner_dual_certificate(&example2(), &[1, 1, -1]).unwrap();
        assert_eq!((c.c1, c.c2, c.value), (1.5, 0.5, 1.0));
        assert_eq!(c.slack, vec![0.0, 0.0, 0.0]);

        let c = inner_dual_certificate(&mutual_pair(), &[1, -1]).unwrap();
        assert_eq!((c.c1, c.c2, c.value), (0.0, -1.0, -2.0));
        assert_eq!(c.slack, vec![0.0, 0.0]);
    }

    #[test]
    fn bound_examples() {
        let g = example2();
        assert_eq!(bound(&g, &[1, 1, -1]).unwrap(), 1.0);
        assert_eq!(bound(&WeightedDigraph::zero(3).unwrap(), &[0, 0, 0]).unwrap(), 0.0);
        assert!(bound(&g, &[0, 0, 0]).unwrap() >= 1.0);
        assert!(bound(&g, &[1, 1, 1]).is_err());
        assert!(bound(&g, &[1, 2, 0]).is_err());
    }

    #[test]
    fn solver_examples() {
        let r = bnb_solve(&example2());
        assert_eq!(r.z_dagger, 1.0);
        assert!(r.witness == vec![1, 1, -1] || r.witness == vec![-1, -1, 1]);
        assert!(r.complete);
        assert_eq!(bnb_solve(&mutual_pair()).z_dagger, -2.0);
    }

    #[test]
    fn polarization_examples() {
        let r = polarization(&example2()).unwrap();
        assert_eq!((r.value, r.exact, r.method), (1.0, true, Method::Hybrid));
        assert_eq!(r.v1, NodeSet::new(vec![0, 1]));
        let r = polarization(&mutual_pair()).unwrap();
        assert_eq!((r.value, r.exact, r.method), (-2.0, true, Method::BranchAndBound));
        let r = polarization(&k_complete(3)).unwrap();
        assert_eq!((r.value, r.exact), (-2.0, true));
    }

    #[test]
    fn large_graph_gives_lower_bound_or_exact() {
        let g = random_graph(20, 9, 0.3, false, 5).unwrap();
        let r = polarization(&g).unwrap();
        assert!(r.exact || r.value > 0.0);
        assert_eq!(r.method, Method::BranchAndBound);
    }

    #[test]
    fn threads_agree_on_value() {
        for seed in 0..10 {
            let g = random_graph(12, 9, 0.5, true, seed).unwrap();
            let one = bnb_solve(&g);
            let many = bnb_solve_with(&g, BnbOptions { threads: 4, time_budget: None });
            assert_eq!(one.z_dagger, many.z_dagger);
        }
    }

    #[test]
    fn zero_budget_is_incomplete_but_feasible() {
        let g = random_graph(22, 9, 0.6, false, 1).unwrap();
        let r = bnb_solve_with(&g, BnbOptions { threads: 1, time_budget: Some(Duration::ZERO) });
        assert!(!r.complete);
        assert_eq!(r.z_dagger, inner_value(&g, &r.witness).unwrap());
    }

    fn graph_strategy(max_n: usize) -> impl Strategy<Value = WeightedDigraph> {
        (2..=max_n, any::<u64>(), 0.0..=1.0f64, any::<bool>())
            .prop_map(|(n, seed, density, loops)| random_graph(n, 9, density, loops, seed).unwrap())
    }

    fn complete_signs(n: usize) -> impl Strategy<Value = SignVector> {
        prop::collection::vec(prop::bool::ANY, n)
            .prop_filter("mixed", |b| b.iter().any(|&x| x) && b.iter().any(|&x| !x))
            .prop_map(|b| b.into_iter().map(|x| if x { 1 } else { -1 }).collect())
    }

    proptest! {
        #[test]
        fn inner_value_is_pair_of_upper_autonomies(
            (g, a) in graph_strategy(9).prop_flat_map(|g| { let n = g.n(); (Just(g), complete_signs(n)) })
        ) {
            let (v1, v2) = sides(&a);
            let expected = autonomy_upper(&g, &v1).unwrap() + autonomy_upper(&g, &v2).unwrap();
            prop_assert_eq!(inner_value(&g, &a).unwrap(), expected);
            let flipped: SignVector = a.iter().map(|x| -x).collect();
            prop_assert_eq!(inner_value(&g, &flipped).unwrap(), expected);
        }

        #[test]
        fn certificate_is_dual_feasible(
            (g, a) in graph_strategy(9).prop_flat_map(|g| { let n = g.n(); (Just(g), complete_signs(n)) })
        ) {
            let c = inner_dual_certificate(&g, &a).unwrap();
            let v = transpose_apply(&g, &a);
            prop_assert_eq!(c.value, inner_value(&g, &a).unwrap());
            prop_assert!((2.0 * c.c2 - c.value).abs() <= 1e-12);
            for i in 0..g.n() {
                prop_assert!(c.slack[i] >= 0.0);
                let ai = a[i] as f64;
                prop_assert!((c.c1 + ai * c.c2 + ai * c.slack[i] - v[i]).abs() <= 1e-12);
            }
        }

        #[test]
        fn bound_is_admissible(g in graph_strategy(7), mask in any::<u32>(), signs in any::<u32>()) {
            let n = g.n();
            let partial: SignVector = (0..n)
                .map(|i| if mask >> i & 1 == 1 { if signs >> i & 1 == 1 { 1 } else { -1 } } else { 0 })
                .collect();
            let b = match bound(&g, &partial) {
                Ok(b) => b,
                Err(_) => return Ok(()),
            };
            for completion in 0u32..(1 << n) {
                let a: SignVector = (0..n)
                    .map(|i| if partial[i] != 0 { partial[i] } else if completion >> i & 1 == 1 { 1 } else { -1 })
                    .collect();
                if let Ok(v) = inner_value(&g, &a) {
                    prop_assert!(b >= v, "bound {} below completion value {}", b, v);
                }
            }
        }

        #[test]
        fn matches_complement_enumeration(g in graph_strategy(10)) {
            prop_assert_eq!(bnb_solve(&g).z_dagger, complement_z_star(&g).unwrap().value);
        }

        #[test]
        fn invariant_under_relabeling(g in graph_strategy(9), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut perm: Vec<usize> = (0..g.n()).collect();
            perm.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let h = g.permuted(&perm).unwrap();
            prop_assert_eq!(bnb_solve(&g).z_dagger, bnb_solve(&h).z_dagger);
        }
    }
}
