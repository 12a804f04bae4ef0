//! The Filippov set of the protocol as a box of velocity intervals, and
//! checks of sampled trajectories against it.
//!
//! Each sign term `sgn(x_j - x_i)` and each disturbance is selected
//! independently, so `F(t, x)` is a product of intervals:
//! coordinate `i` ranges over `[-w_ii, w_ii]` plus, for every `j != i`,
//! `{w_ji * sgn(x_j - x_i)}` when the states differ and `[-w_ji, w_ji]`
//! when they coincide.

use serde::{Serialize, Serializer};

use crate::dynamics::Trajectory;
use crate::graph::{NodeSet, WeightedDigraph};
use crate::indices::autonomy_upper;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IntervalBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl IntervalBox {
    /// Distance by which `v_i` leaves `[lo_i, hi_i]`, zero inside.
    pub fn excess(&self, i: usize, v: f64) -> f64 {
        (self.lo[i] - v).max(v - self.hi[i]).max(0.0)
    }

    pub fn contains(&self, v: &[f64], tol: f64) -> bool {
        (0..v.len()).all(|i| self.excess(i, v[i]) <= tol)
    }
}

/// States closer than `eq_tol` count as equal.
pub fn filippov_box(g: &WeightedDigraph, x: &[f64], eq_tol: f64) -> IntervalBox {
    let n = g.n();
    let mut lo = vec![0.0; n];
    let mut hi = vec![0.0; n];
    for i in 0..n {
        let b = g.disturbance_bound(i);
        let (mut l, mut h) = (-b, b);
        for j in (0..n).filter(|&j| j != i) {
            let w = g.weight(j, i);
            if w == 0.0 {
                continue;
            }
            let gap = x[j] - x[i];
            if gap.abs() > eq_tol {
                let v = if gap > 0.0 { w } else { -w };
                l += v;
                h += v;
            } else {
                l -= w;
                h += w;
            }
        }
        lo[i] = l;
        hi[i] = h;
    }
    IntervalBox { lo, hi }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Violation {
    /// `x<i>` for a coordinate, `M` or `m` for the extremes.
    pub label: String,
    pub t: f64,
    pub excess: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InclusionReport {
    pub pass: bool,
    pub worst_violation: f64,
    pub tolerance: f64,
    pub checked_samples: usize,
    #[serde(rename = "worst_violations", serialize_with = "ten_worst")]
    pub violations: Vec<Violation>,
}

fn ten_worst<S: Serializer>(v: &[Violation], s: S) -> Result<S::Ok, S::Error> {
    let mut sorted: Vec<&Violation> = v.iter().collect();
    sorted.sort_by(|a, b| b.excess.total_cmp(&a.excess).then(a.t.total_cmp(&b.t)));
    sorted.truncate(10);
    s.collect_seq(sorted)
}

impl InclusionReport {
    fn new(tolerance: f64) -> Self {
        InclusionReport { pass: true, worst_violation: 0.0, tolerance, checked_samples: 0, violations: Vec::new() }
    }

    fn record(&mut self, label: String, t: f64, excess: f64) {
        self.worst_violation = self.worst_violation.max(excess);
        if excess > self.tolerance {
            self.pass = false;
            self.violations.push(Violation { label, t, excess });
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckOptions {
    pub eq_tol: f64,
    pub deriv_tol: f64,
    /// Times where the derivative may jump; samples whose stencil reaches
    /// one are skipped.
    pub breakpoints: Vec<f64>,
    /// Half-width of the difference stencil, in samples.
    pub window: usize,
}

impl CheckOptions {
    pub fn new(eq_tol: f64, deriv_tol: f64) -> Self {
        CheckOptions { eq_tol, deriv_tol, breakpoints: Vec::new(), window: 1 }
    }

    pub fn skipping(mut self, breakpoints: &[f64]) -> Self {
        self.breakpoints = breakpoints.to_vec();
        self
    }

    pub fn window(mut self, window: usize) -> Self {
        self.window = window.max(1);
        self
    }

    fn stencils<'a>(&'a self, times: &'a [f64]) -> impl Iterator<Item = (usize, usize, usize)> + 'a {
        let w = self.window;
        (w..times.len().saturating_sub(w)).filter_map(move |k| {
            let (a, b) = (times[k - w], times[k + w]);
            if self.breakpoints.iter().any(|&p| p >= a && p <= b) {
                None
            } else {
                Some((k - w, k, k + w))
            }
        })
    }
}

/// Equality grouping for discretized data: `10 * h * L` with `h` the
/// largest sample spacing and `L` the largest total in-strength.
pub fn simulated_eq_tol(g: &WeightedDigraph, traj: &Trajectory) -> f64 {
    let h = traj.times.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    10.0 * h * g.max_speed()
}

/// Settings for discretized data: the inclusion check with the `10 h L`
/// grouping and `2 h L` slack, and the extremal check over a stencil of
/// `window` samples each side. Within a grouped extreme set the maximum
/// can move by up to the grouping width without the set moving, so the
/// extremal slack is `eq_tol / (window * h) = 10 L / window`.
pub fn discretized_checks(g: &WeightedDigraph, traj: &Trajectory, window: usize) -> (CheckOptions, CheckOptions) {
    let h = traj.times.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    let eq_tol = simulated_eq_tol(g, traj);
    let window = window.max(1);
    let inclusion = CheckOptions::new(eq_tol, 2.0 * h * g.max_speed());
    let extremal = CheckOptions::new(eq_tol, if h > 0.0 { eq_tol / (window as f64 * h) } else { 0.0 }).window(window);
    (inclusion, extremal)
}

/// Central differences at interior samples must lie in the box at the
/// centre sample, inflated by `deriv_tol`.
pub fn check_inclusion(g: &WeightedDigraph, traj: &Trajectory, eq_tol: f64, deriv_tol: f64) -> InclusionReport {
    check_inclusion_with(g, traj, &CheckOptions::new(eq_tol, deriv_tol))
}

pub fn check_inclusion_with(g: &WeightedDigraph, traj: &Trajectory, opts: &CheckOptions) -> InclusionReport {
    let mut report = InclusionReport::new(opts.deriv_tol);
    for (a, k, b) in opts.stencils(&traj.times) {
        let span = traj.times[b] - traj.times[a];
        let fbox = filippov_box(g, &traj.states[k], opts.eq_tol);
        for i in 0..g.n() {
            let v = (traj.states[b][i] - traj.states[a][i]) / span;
            report.record(format!("x{}", i + 1), traj.times[k], fbox.excess(i, v));
        }
        report.checked_samples += 1;
    }
    report
}

/// Agents within `eq_tol` of the maximum and of the minimum.
pub fn extremal_sets(x: &[f64], eq_tol: f64) -> (NodeSet, NodeSet) {
    let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
    (
        NodeSet::new((0..x.len()).filter(|&i| x[i] >= hi - eq_tol).collect()),
        NodeSet::new((0..x.len()).filter(|&i| x[i] <= lo + eq_tol).collect()),
    )
}

/// `dM/dt <= Au(S_M)` and `-dm/dt <= Au(S_m)`. With a stencil wider than
/// one sample the right-hand side is the largest value over the stencil.
pub fn extremal_derivative_bounds(g: &WeightedDigraph, traj: &Trajectory, opts: &CheckOptions) -> InclusionReport {
    let mut report = InclusionReport::new(opts.deriv_tol);
    let bounds: Vec<(f64, f64)> = traj
        .states
        .iter()
        .map(|x| {
            let (top, bottom) = extremal_sets(x, opts.eq_tol);
            (
                autonomy_upper(g, &top).expect("nonempty"),
                autonomy_upper(g, &bottom).expect("nonempty"),
            )
        })
        .collect();
    for (a, k, b) in opts.stencils(&traj.times) {
        let span = traj.times[b] - traj.times[a];
        let up = (traj.diagnostics[b].max - traj.diagnostics[a].max) / span;
        let down = -(traj.diagnostics[b].min - traj.diagnostics[a].min) / span;
        let (bound_top, bound_bottom) = bounds[a..=b]
            .iter()
            .fold((f64::NEG_INFINITY, f64::NEG_INFINITY), |acc, &(p, q)| (acc.0.max(p), acc.1.max(q)));
        report.record("M".into(), traj.times[k], (up - bound_top).max(0.0));
        report.record("m".into(), traj.times[k], (down - bound_bottom).max(0.0));
        report.checked_samples += 1;
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{build_extremal, extremal_trajectory, simulate, DisturbanceSpec, SimConfig, Trajectory};
    use crate::graph::random_graph;
    use crate::testing::{example2, mutual_pair};
    use proptest::prelude::*;

    /// First Filippov solution of the three-agent example from `[0, 1, 2]`.
    pub(crate) fn converging(t: f64) -> Vec<f64> {
        if t < 1.0 / 6.0 {
            vec![4.0 * t, 1.0 - 2.0 * t, 2.0 - t]
        } else if t < 1.0 {
            let y = 0.6 + 0.4 * t;
            vec![y, y, 2.0 - t]
        } else {
            vec![1.0; 3]
        }
    }

    /// Second solution from the same initial state: agents 1 and 2 merge
    /// and then fall together.
    pub(crate) fn diverging(t: f64) -> Vec<f64> {
        if t < 1.0 / 6.0 {
            vec![4.0 * t, 1.0 - 2.0 * t, 2.0 - t]
        } else {
            vec![1.0 - 2.0 * t, 1.0 - 2.0 * t, 2.0 - t]
        }
    }

    pub(crate) fn sample(f: impl Fn(f64) -> Vec<f64>, t_end: f64, h: f64) -> Trajectory {
        let k = (t_end / h).round() as usize;
        let times: Vec<f64> = (0..=k).map(|i| i as f64 * h).collect();
        let states = times.iter().map(|&t| f(t)).collect();
        Trajectory::from_states(times, states, 1e-9).unwrap()
    }

    #[test]
    fn box_examples() {
        let g = example2();
        let b = filippov_box(&g, &[0.5, 0.5, 2.0], 0.0);
        assert_eq!((b.lo, b.hi), (vec![-2.0, -2.0, -1.0], vec![4.0, 2.0, -1.0]));

        let b = filippov_box(&g, &[0.0, 1.0, 2.0], 0.0);
        assert_eq!((b.lo.clone(), b.hi.clone()), (vec![4.0, -2.0, -1.0], vec![4.0, -2.0, -1.0]));

        let b = filippov_box(&mutual_pair(), &[3.0, 3.0], 0.0);
        assert_eq!((b.lo, b.hi), (vec![-1.0, -1.0], vec![1.0, 1.0]));
    }

    #[test]
    fn analytic_solutions_pass() {
        let g = example2();
        let opts = CheckOptions::new(0.0, 1e-9).skipping(&[1.0 / 6.0, 1.0]);
        for f in [converging as fn(f64) -> Vec<f64>, diverging] {
            let traj = sample(f, 2.0, 1.0 / 1024.0);
            let r = check_inclusion_with(&g, &traj, &opts);
            assert!(r.pass, "{:?}", &r.violations[..r.violations.len().min(3)]);
            assert!(r.checked_samples > 2000);
            assert!(extremal_derivative_bounds(&g, &traj, &opts).pass);
        }
    }

    #[test]
    fn fabricated_slope_fails() {
        let g = example2();
        let traj = sample(|t| vec![5.0 * t, 1.0 - 2.0 * t, 2.0 - t], 0.1, 1.0 / 1024.0);
        let r = check_inclusion(&g, &traj, 0.0, 1e-9);
        assert!(!r.pass);
        assert!((r.worst_violation - 1.0).abs() < 1e-9);
        assert!(r.violations.iter().all(|v| v.label == "x1"));
    }

    #[test]
    fn extremal_bounds_examples() {
        let g = example2();
        let plan = build_extremal(&g, &NodeSet::new(vec![0, 1]), &NodeSet::new(vec![2])).unwrap();
        let cfg = SimConfig { t_end: 2.0, ..SimConfig::default() };
        let traj = extremal_trajectory(&g, &plan, &cfg).unwrap();
        let opts = CheckOptions::new(0.0, 1e-9);
        let r = extremal_derivative_bounds(&g, &traj, &opts);
        assert!(r.pass);
        assert!(check_inclusion_with(&g, &traj, &opts).pass);

        let zero = WeightedDigraph::zero(3).unwrap();
        let flat = sample(|_| vec![1.0, 2.0, 3.0], 1.0, 0.125);
        assert!(extremal_derivative_bounds(&zero, &flat, &opts).pass);

        let rising = sample(|t| vec![0.0, 0.5, 2.0 + 3.0 * t], 1.0, 0.125);
        let r = extremal_derivative_bounds(&g, &rising, &opts);
        assert!(!r.pass);
        assert!(r.violations.iter().any(|v| v.label == "M" && (v.excess - 4.0).abs() < 1e-9));
    }

    #[test]
    fn report_lists_ten_worst() {
        let g = example2();
        let traj = sample(|t| vec![5.0 * t + t * t, 1.0 - 2.0 * t, 2.0 - t], 0.1, 1.0 / 1024.0);
        let r = check_inclusion(&g, &traj, 0.0, 1e-9);
        let json: serde_json::Value = serde_json::to_value(&r).unwrap();
        let worst = json["worst_violations"].as_array().unwrap();
        assert_eq!(worst.len(), 10);
        assert!(worst[0]["excess"].as_f64().unwrap() >= worst[9]["excess"].as_f64().unwrap());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn distinct_states_give_vector_field(n in 2usize..=8, seed in any::<u64>(), density in 0.0..=1.0f64) {
            let g = random_graph(n, 9, density, false, seed).unwrap();
            let x: Vec<f64> = (0..n).map(|i| i as f64 * 1.5 - (seed % 7) as f64).collect();
            let b = filippov_box(&g, &x, 0.0);
            let v = crate::dynamics::vector_field(&g, &DisturbanceSpec::Zero, 0.0, &x).unwrap();
            prop_assert_eq!(&b.lo, &v);
            prop_assert_eq!(&b.hi, &v);
        }

        #[test]
        fn larger_grouping_never_shrinks(
            n in 2usize..=8, seed in any::<u64>(), tol in 0.0..2.0f64, extra in 0.0..2.0f64,
            xs in prop::collection::vec(-4i32..=4, 8),
        ) {
            let g = random_graph(n, 9, 0.6, true, seed).unwrap();
            let x: Vec<f64> = xs[..n].iter().map(|&k| k as f64 * 0.5).collect();
            let (a, b) = (filippov_box(&g, &x, tol), filippov_box(&g, &x, tol + extra));
            for i in 0..n {
                prop_assert!(b.lo[i] <= a.lo[i] && a.hi[i] <= b.hi[i]);
            }
        }

        #[test]
        fn euler_runs_are_included(n in 2usize..=7, seed in any::<u64>(), density in 0.2..=1.0f64, model in 0usize..5) {
            let g = random_graph(n, 9, density, true, seed).unwrap();
            let x0: Vec<f64> = (0..n).map(|i| ((seed >> (3 * i)) % 64) as f64 / 16.0).collect();
            let spec = match model {
                0 => DisturbanceSpec::Zero,
                1 => DisturbanceSpec::BoundedNoise { seed, params: Default::default() },
                2 => DisturbanceSpec::WorstCase { margin: 0.01 },
                3 => DisturbanceSpec::Stubborn { x0_snapshot: None },
                _ => DisturbanceSpec::FixedSources {
                    sources: (0..n).map(|i| vec![(i as f64, g.disturbance_bound(i))]).collect(),
                },
            };
            let cfg = SimConfig { t_end: 1.0, ..SimConfig::default() };
            let traj = simulate(&g, &x0, &spec, &cfg).unwrap();
            let (inclusion, extremal) = discretized_checks(&g, &traj, 16);
            let r = check_inclusion_with(&g, &traj, &inclusion);
            prop_assert!(r.pass, "{:?}", r.violations.first());
            let r = extremal_derivative_bounds(&g, &traj, &extremal);
            prop_assert!(r.pass, "{:?}", r.violations.first());
        }
    }
}
