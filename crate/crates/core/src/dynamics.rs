//! Simulation of `x_i' = d_i(t, x) + sum_j w_ji * sgn(x_j - x_i)` with
//! `sgn(0) = 0`, trajectory diagnostics, and the analytic extremal
//! trajectory that realizes the polarization growth rate.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{NodeSet, WeightedDigraph};
use crate::indices::{autonomy, pair_value, ExtendedReal};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DisturbanceSpec {
    Zero,
    BoundedNoise {
        seed: u64,
        #[serde(default)]
        params: NoiseParams,
    },
    WorstCase {
        #[serde(default = "default_margin")]
        margin: f64,
    },
    Stubborn {
        #[serde(default)]
        x0_snapshot: Option<Vec<f64>>,
    },
    /// Per agent, a list of `(s_j, w'_j)`: external opinion and its weight.
    FixedSources { sources: Vec<Vec<(f64, f64)>> },
}

fn default_margin() -> f64 {
    0.01
}

/// Shape of the bounded noise. Amplitudes are fractions of `w_ii`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseParams {
    pub white_amplitude: f64,
    /// Length of the intervals on which the white component is constant.
    pub white_hold: f64,
    pub harmonics: usize,
    pub harmonic_amplitude: f64,
    pub min_period: f64,
    pub max_period: f64,
    /// Mean impulses per second.
    pub impulse_rate: f64,
    pub impulse_width: f64,
    pub impulse_height: f64,
}

impl Default for NoiseParams {
    fn default() -> Self {
        NoiseParams {
            white_amplitude: 0.5,
            white_hold: 1.0 / 32.0,
            harmonics: 2,
            harmonic_amplitude: 0.15,
            min_period: 1.0,
            max_period: 4.0,
            impulse_rate: 0.5,
            impulse_width: 0.05,
            impulse_height: 1.0,
        }
    }
}

impl NoiseParams {
    fn validate(&self) -> Result<()> {
        let nonneg = [
            self.white_amplitude,
            self.harmonic_amplitude,
            self.impulse_rate,
            self.impulse_width,
            self.impulse_height,
        ];
        if nonneg.iter().any(|x| !(x.is_finite() && *x >= 0.0))
            || !(self.white_hold > 0.0)
            || !(self.min_period > 0.0 && self.min_period <= self.max_period && self.max_period.is_finite())
        {
            return Err(Error::InvalidParameter(format!("noise parameters {self:?}")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
struct AgentNoise {
    white: Vec<f64>,
    harmonics: Vec<(f64, f64, f64)>,
    impulses: Vec<(f64, f64)>,
}

#[derive(Clone, Debug)]
enum Compiled {
    Zero,
    Noise { hold: f64, width: f64, agents: Vec<AgentNoise> },
    WorstCase { margin: f64 },
    Stubborn { anchor: Vec<f64> },
    FixedSources { sources: Vec<Vec<(f64, f64)>> },
}

/// A disturbance model bound to a graph and an initial state.
#[derive(Clone, Debug)]
pub struct Disturbance {
    bounds: Vec<f64>,
    compiled: Compiled,
}

impl Disturbance {
    /// Noise tables are drawn up to `horizon + 1` seconds.
    pub fn new(spec: &DisturbanceSpec, g: &WeightedDigraph, x0: &[f64], horizon: f64) -> Result<Self> {
        let n = g.n();
        let bounds = g.disturbance_bounds();
        let compiled = match spec {
            DisturbanceSpec::Zero => Compiled::Zero,
            DisturbanceSpec::WorstCase { margin } => {
                if !(margin.is_finite() && *margin >= 0.0) {
                    return Err(Error::InvalidParameter(format!("margin {margin}")));
                }
                Compiled::WorstCase { margin: *margin }
            }
            DisturbanceSpec::Stubborn { x0_snapshot } => {
                let anchor = x0_snapshot.clone().unwrap_or_else(|| x0.to_vec());
                check_len(&anchor, n, "x0_snapshot")?;
                Compiled::Stubborn { anchor }
            }
            DisturbanceSpec::FixedSources { sources } => {
                if sources.len() != n {
                    return Err(Error::InvalidParameter(format!("{} source lists for n = {n}", sources.len())));
                }
                for (i, list) in sources.iter().enumerate() {
                    let mut total = 0.0;
                    for &(s, w) in list {
                        if !s.is_finite() || !(w.is_finite() && w >= 0.0) {
                            return Err(Error::InvalidParameter(format!("source ({s}, {w}) of agent {}", i + 1)));
                        }
                        total += w;
                    }
                    if total > bounds[i] {
                        return Err(Error::InvalidParameter(format!(
                            "source weights of agent {} sum to {total}, above the bound {}",
                            i + 1,
                            bounds[i]
                        )));
                    }
                }
                Compiled::FixedSources { sources: sources.clone() }
            }
            DisturbanceSpec::BoundedNoise { seed, params } => {
                params.validate()?;
                if !(horizon.is_finite() && horizon >= 0.0) {
                    return Err(Error::InvalidParameter(format!("horizon {horizon}")));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let span = horizon + 1.0;
                let bins = (span / params.white_hold).ceil() as usize + 1;
                let gaps = (params.impulse_rate > 0.0).then(|| Exp::new(params.impulse_rate).expect("positive rate"));
                let agents = bounds
                    .iter()
                    .map(|&b| {
                        let white = (0..bins)
                            .map(|_| rng.random_range(-1.0..=1.0) * params.white_amplitude * b)
                            .collect();
                        let harmonics = (0..params.harmonics)
                            .map(|_| {
                                let period = rng.random_range(params.min_period..=params.max_period);
                                let phase = rng.random_range(0.0..std::f64::consts::TAU);
                                (params.harmonic_amplitude * b, std::f64::consts::TAU / period, phase)
                            })
                            .collect();
                        let mut impulses = Vec::new();
                        if let Some(exp) = gaps {
                            let mut t = exp.sample(&mut rng);
                            while t < span {
                                impulses.push((t, rng.random_range(-1.0..=1.0) * params.impulse_height * b));
                                t += exp.sample(&mut rng);
                            }
                        }
                        AgentNoise { white, harmonics, impulses }
                    })
                    .collect();
                Compiled::Noise { hold: params.white_hold, width: params.impulse_width, agents }
            }
        };
        Ok(Disturbance { bounds, compiled })
    }

    pub fn eval(&self, t: f64, x: &[f64], out: &mut [f64]) {
        match &self.compiled {
            Compiled::Zero => out.fill(0.0),
            Compiled::WorstCase { margin } => {
                let (hi, lo) = extremes(x);
                for i in 0..x.len() {
                    out[i] = if x[i] >= hi - margin {
                        self.bounds[i]
                    } else if x[i] <= lo + margin {
                        -self.bounds[i]
                    } else {
                        0.0
                    };
                }
            }
            Compiled::Stubborn { anchor } => {
                for i in 0..x.len() {
                    out[i] = self.bounds[i] * sgn(anchor[i] - x[i]);
                }
            }
            Compiled::FixedSources { sources } => {
                for i in 0..x.len() {
                    out[i] = sources[i].iter().map(|&(s, w)| w * sgn(s - x[i])).sum();
                }
            }
            Compiled::Noise { hold, width, agents } => {
                for (i, a) in agents.iter().enumerate() {
                    let bin = ((t / hold).floor().max(0.0) as usize).min(a.white.len() - 1);
                    let mut d = a.white[bin];
                    for &(amp, omega, phase) in &a.harmonics {
                        d += amp * (omega * t + phase).sin();
                    }
                    for &(start, height) in &a.impulses {
                        if start > t {
                            break;
                        }
                        if t < start + width {
                            d += height;
                        }
                    }
                    out[i] = d.clamp(-self.bounds[i], self.bounds[i]);
                }
            }
        }
    }
}

fn check_len(x: &[f64], n: usize, what: &str) -> Result<()> {
    if x.len() != n {
        return Err(Error::InvalidParameter(format!("{what} has length {}, expected {n}", x.len())));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter(format!("{what} has non-finite entries")));
    }
    Ok(())
}

#[inline]
fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn extremes(x: &[f64]) -> (f64, f64) {
    x.iter().fold((f64::NEG_INFINITY, f64::INFINITY), |(hi, lo), &v| (hi.max(v), lo.min(v)))
}

/// `d(t, x)` for a specification. Stubborn agents without a snapshot are
/// anchored at `x` itself.
pub fn eval_disturbance(spec: &DisturbanceSpec, g: &WeightedDigraph, t: f64, x: &[f64]) -> Result<Vec<f64>> {
    check_len(x, g.n(), "state")?;
    let d = Disturbance::new(spec, g, x, t.max(0.0))?;
    let mut out = vec![0.0; g.n()];
    d.eval(t, x, &mut out);
    Ok(out)
}

/// Right-hand side `d(t, x) + sum_j w_ji * sgn(x_j - x_i)`.
pub fn vector_field(g: &WeightedDigraph, spec: &DisturbanceSpec, t: f64, x: &[f64]) -> Result<Vec<f64>> {
    check_len(x, g.n(), "state")?;
    let sys = System::new(g, Disturbance::new(spec, g, x, t.max(0.0))?);
    let mut out = vec![0.0; g.n()];
    sys.field(t, x, &mut out);
    Ok(out)
}

struct System {
    /// In-neighbours of each agent, diagonal excluded, ascending index.
    inbound: Vec<Vec<(usize, f64)>>,
    dist: Disturbance,
    scratch: std::cell::RefCell<Vec<f64>>,
}

impl System {
    fn new(g: &WeightedDigraph, dist: Disturbance) -> Self {
        let n = g.n();
        let inbound = (0..n)
            .map(|i| (0..n).filter(|&j| j != i && g.weight(j, i) > 0.0).map(|j| (j, g.weight(j, i))).collect())
            .collect();
        System { inbound, dist, scratch: std::cell::RefCell::new(vec![0.0; n]) }
    }

    fn field(&self, t: f64, x: &[f64], out: &mut [f64]) {
        let mut d = self.scratch.borrow_mut();
        self.dist.eval(t, x, &mut d);
        for i in 0..x.len() {
            let mut acc = 0.0;
            for &(j, w) in &self.inbound[i] {
                acc += w * sgn(x[j] - x[i]);
            }
            out[i] = d[i] + acc;
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Integrator {
    #[default]
    Euler,
    Rk4,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub dt: f64,
    pub t_end: f64,
    pub integrator: Integrator,
    pub consensus_tol: f64,
    pub record_stride: usize,
    pub record_disturbance: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            dt: 1.0 / 1024.0,
            t_end: 5.0,
            integrator: Integrator::Euler,
            consensus_tol: 1e-9,
            record_stride: 1,
            record_disturbance: false,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("dt = {}", self.dt)));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::InvalidParameter(format!("t_end = {}", self.t_end)));
        }
        if !(self.consensus_tol >= 0.0) {
            return Err(Error::InvalidParameter(format!("consensus_tol = {}", self.consensus_tol)));
        }
        if self.record_stride == 0 {
            return Err(Error::InvalidParameter("record_stride must be >= 1".into()));
        }
        Ok(())
    }

    /// Grid `0, dt, 2 dt, ..., t_end`; the last step is shortened when
    /// `t_end` is not a multiple of `dt`.
    pub fn steps(&self) -> usize {
        let ratio = self.t_end / self.dt;
        if (ratio - ratio.round()).abs() <= 1e-9 * ratio.max(1.0) {
            ratio.round() as usize
        } else {
            ratio.ceil() as usize
        }
    }

    fn time(&self, k: usize) -> f64 {
        if k >= self.steps() {
            self.t_end
        } else {
            k as f64 * self.dt
        }
    }
}

/// Extremes of one state.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Diagnostics {
    #[serde(rename = "M")]
    pub max: f64,
    #[serde(rename = "m")]
    pub min: f64,
    #[serde(rename = "D")]
    pub spread: f64,
    pub argmax: NodeSet,
    pub argmin: NodeSet,
}

impl Diagnostics {
    pub fn of(x: &[f64]) -> Self {
        let (max, min) = extremes(x);
        Diagnostics {
            max,
            min,
            spread: max - min,
            argmax: NodeSet::new((0..x.len()).filter(|&i| x[i] == max).collect()),
            argmin: NodeSet::new((0..x.len()).filter(|&i| x[i] == min).collect()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub diagnostics: Vec<Diagnostics>,
    /// First grid time after which the spread stays within tolerance.
    pub consensus_time: Option<f64>,
    pub disturbance_trace: Option<Vec<Vec<f64>>>,
}

impl Trajectory {
    /// Builds a trajectory from samples; the consensus time is taken over
    /// the samples given.
    pub fn from_states(times: Vec<f64>, states: Vec<Vec<f64>>, consensus_tol: f64) -> Result<Self> {
        if times.len() != states.len() || times.is_empty() {
            return Err(Error::InvalidParameter("times and states must be nonempty and of equal length".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter("times must be strictly increasing".into()));
        }
        let n = states[0].len();
        for x in &states {
            check_len(x, n, "state")?;
        }
        let diagnostics: Vec<Diagnostics> = states.iter().map(|x| Diagnostics::of(x)).collect();
        let mut tracker = ConsensusTracker::new(consensus_tol);
        for (t, d) in times.iter().zip(&diagnostics) {
            tracker.push(*t, d.spread);
        }
        Ok(Trajectory { consensus_time: tracker.finish(), times, states, diagnostics, disturbance_trace: None })
    }

    pub fn n(&self) -> usize {
        self.states.first().map_or(0, Vec::len)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn spreads(&self) -> impl Iterator<Item = f64> + '_ {
        self.diagnostics.iter().map(|d| d.spread)
    }
}

/// Start of the final run of samples whose spread is within tolerance.
struct ConsensusTracker {
    tol: f64,
    since: Option<f64>,
}

impl ConsensusTracker {
    fn new(tol: f64) -> Self {
        ConsensusTracker { tol, since: None }
    }

    fn push(&mut self, t: f64, spread: f64) {
        if spread > self.tol {
            self.since = None;
        } else if self.since.is_none() {
            self.since = Some(t);
        }
    }

    fn finish(&self) -> Option<f64> {
        self.since
    }
}

/// Fixed-step integration over `[0, t_end]`.
pub fn simulate(g: &WeightedDigraph, x0: &[f64], spec: &DisturbanceSpec, cfg: &SimConfig) -> Result<Trajectory> {
    cfg.validate()?;
    check_len(x0, g.n(), "x0")?;
    let n = g.n();
    let sys = System::new(g, Disturbance::new(spec, g, x0, cfg.t_end)?);
    let steps = cfg.steps();
    let mut x = x0.to_vec();
    let mut times = Vec::new();
    let mut states = Vec::new();
    let mut diagnostics = Vec::new();
    let mut trace = cfg.record_disturbance.then(Vec::new);
    let mut tracker = ConsensusTracker::new(cfg.consensus_tol);
    let mut d = vec![0.0; n];
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);

    for k in 0..=steps {
        let t = cfg.time(k);
        let diag = Diagnostics::of(&x);
        tracker.push(t, diag.spread);
        if k % cfg.record_stride == 0 || k == steps {
            if let Some(trace) = trace.as_mut() {
                sys.dist.eval(t, &x, &mut d);
                trace.push(d.clone());
            }
            times.push(t);
            states.push(x.clone());
            diagnostics.push(diag);
        }
        if k == steps {
            break;
        }
        let h = cfg.time(k + 1) - t;
        match cfg.integrator {
            Integrator::Euler => {
                sys.field(t, &x, &mut k1);
                for i in 0..n {
                    x[i] += h * k1[i];
                }
            }
            Integrator::Rk4 => {
                sys.field(t, &x, &mut k1);
                axpy(&mut tmp, &x, 0.5 * h, &k1);
                sys.field(t + 0.5 * h, &tmp, &mut k2);
                axpy(&mut tmp, &x, 0.5 * h, &k2);
                sys.field(t + 0.5 * h, &tmp, &mut k3);
                axpy(&mut tmp, &x, h, &k3);
                sys.field(t + h, &tmp, &mut k4);
                for i in 0..n {
                    x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
                }
            }
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::BlowUp { time: t + h });
        }
    }
    Ok(Trajectory { times, states, diagnostics, consensus_time: tracker.finish(), disturbance_trace: trace })
}

fn axpy(out: &mut [f64], x: &[f64], a: f64, y: &[f64]) {
    for i in 0..x.len() {
        out[i] = x[i] + a * y[i];
    }
}

/// Data for the trajectory whose spread grows at exactly `A(V1) + A(V2)`:
/// `V1` starts at 1 and rises at `A(V1)`, `V2` starts at -1 and falls at
/// `A(V2)`, the rest starts at 0.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExtremalPlan {
    pub v1: NodeSet,
    pub v2: NodeSet,
    pub a1: f64,
    pub a2: f64,
    pub growth_rate: f64,
    pub initial_state: Vec<f64>,
    /// Constant disturbance on `V1 ∪ V2`, zero elsewhere.
    pub constant_disturbance: Vec<f64>,
}

impl ExtremalPlan {
    /// Velocity of each agent in `V1 ∪ V2`; `None` for the others.
    pub fn slopes(&self) -> Vec<Option<f64>> {
        (0..self.initial_state.len())
            .map(|i| {
                if self.v1.contains(i) {
                    Some(self.a1)
                } else if self.v2.contains(i) {
                    Some(-self.a2)
                } else {
                    None
                }
            })
            .collect()
    }

    /// Time at which the two groups meet, when the growth rate is negative.
    pub fn collapse_time(&self) -> Option<f64> {
        (self.growth_rate < 0.0).then(|| 2.0 / -self.growth_rate)
    }

    /// Common value of every agent after the collapse.
    pub fn merge_point(&self) -> f64 {
        (self.a2 - self.a1) / (self.a1 + self.a2)
    }
}

pub fn build_extremal(g: &WeightedDigraph, v1: &NodeSet, v2: &NodeSet) -> Result<ExtremalPlan> {
    if !v1.is_disjoint(v2) {
        return Err(Error::Overlap);
    }
    let finite = |v: &NodeSet| -> Result<f64> {
        match autonomy(g, v)? {
            ExtendedReal::Finite(a) => Ok(a),
            ExtendedReal::NegInfinity => Err(Error::UnboundedAutonomy(v.clone())),
        }
    };
    let a1 = finite(v1)?;
    let a2 = finite(v2)?;
    let n = g.n();
    let mut initial_state = vec![0.0; n];
    let mut constant_disturbance = vec![0.0; n];
    for (set, target, sign) in [(v1, a1, 1.0), (v2, -a2, -1.0)] {
        for &i in set.members() {
            initial_state[i] = sign;
            let mut toward = 0.0;
            let mut away = 0.0;
            let mut all = 0.0;
            for j in (0..n).filter(|&j| j != i) {
                let w = g.weight(j, i);
                all += w;
                if set.contains(j) {
                    toward += w;
                } else {
                    away += w;
                }
            }
            // `W'^T phi(V)` at i, with W' the matrix without its diagonal
            let cohesion = toward - away;
            let (lo, hi) = if sign > 0.0 { (-all, cohesion) } else { (-cohesion, all) };
            let d = target - target.clamp(lo, hi);
            if d.abs() > g.disturbance_bound(i) {
                return Err(Error::InvalidParameter(format!(
                    "disturbance {d} on agent {} exceeds its bound",
                    i + 1
                )));
            }
            constant_disturbance[i] = d;
        }
    }
    Ok(ExtremalPlan {
        v1: v1.clone(),
        v2: v2.clone(),
        a1,
        a2,
        growth_rate: pair_value(g, v1, v2)?,
        initial_state,
        constant_disturbance,
    })
}

/// Piecewise-linear trajectory of a plan on the grid of `cfg`. Agents outside
/// `V1 ∪ V2` follow an Euler step of their own subsystem, where the groups
/// act as moving boundaries, and are clamped between them.
pub fn extremal_trajectory(g: &WeightedDigraph, plan: &ExtremalPlan, cfg: &SimConfig) -> Result<Trajectory> {
    cfg.validate()?;
    let n = g.n();
    check_len(&plan.initial_state, n, "initial_state")?;
    let rest: Vec<usize> = (0..n).filter(|&i| !plan.v1.contains(i) && !plan.v2.contains(i)).collect();
    let upper = |t: f64| 1.0 + plan.a1 * t;
    let lower = |t: f64| -1.0 - plan.a2 * t;
    let collapse = plan.collapse_time();
    let merged = plan.merge_point();

    let steps = cfg.steps();
    let mut x = plan.initial_state.clone();
    let mut times = Vec::new();
    let mut states = Vec::new();
    let mut diagnostics = Vec::new();
    let mut tracker = ConsensusTracker::new(cfg.consensus_tol);
    let mut velocity = vec![0.0; n];
    for k in 0..=steps {
        let t = cfg.time(k);
        if k > 0 {
            if collapse.is_some_and(|tc| t >= tc) {
                x.fill(merged);
            } else {
                let h = t - cfg.time(k - 1);
                for &j in &rest {
                    x[j] += h * velocity[j];
                    x[j] = x[j].clamp(lower(t), upper(t));
                }
                for &i in plan.v1.members() {
                    x[i] = upper(t);
                }
                for &i in plan.v2.members() {
                    x[i] = lower(t);
                }
            }
        }
        let diag = Diagnostics::of(&x);
        tracker.push(t, diag.spread);
        if k % cfg.record_stride == 0 || k == steps {
            times.push(t);
            states.push(x.clone());
            diagnostics.push(diag);
        }
        for &j in &rest {
            let mut v = 0.0;
            for i in (0..n).filter(|&i| i != j) {
                let w = g.weight(i, j);
                if w == 0.0 {
                    continue;
                }
                v += if plan.v1.contains(i) {
                    w * if x[j] > upper(t) { -1.0 } else { 1.0 }
                } else if plan.v2.contains(i) {
                    w * if x[j] < lower(t) { 1.0 } else { -1.0 }
                } else {
                    w * sgn(x[i] - x[j])
                };
            }
            velocity[j] = v;
        }
    }
    Ok(Trajectory { times, states, diagnostics, consensus_time: tracker.finish(), disturbance_trace: None })
}

/// Least-squares slope of the mean state of `nodes` over `[t0, t1]`.
pub fn waveform_velocity(traj: &Trajectory, nodes: &NodeSet, window: (f64, f64)) -> Result<f64> {
    if nodes.is_empty() {
        return Err(Error::EmptySet);
    }
    nodes.check_range(traj.n())?;
    let samples: Vec<(f64, f64)> = traj
        .times
        .iter()
        .zip(&traj.states)
        .filter(|(t, _)| **t >= window.0 && **t <= window.1)
        .map(|(t, x)| (*t, nodes.members().iter().map(|&i| x[i]).sum::<f64>() / nodes.len() as f64))
        .collect();
    if samples.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "window [{}, {}] holds {} samples, need at least 2",
            window.0,
            window.1,
            samples.len()
        )));
    }
    let k = samples.len() as f64;
    let tm = samples.iter().map(|s| s.0).sum::<f64>() / k;
    let ym = samples.iter().map(|s| s.1).sum::<f64>() / k;
    let sxy: f64 = samples.iter().map(|(t, y)| (t - tm) * (y - ym)).sum();
    let sxx: f64 = samples.iter().map(|(t, _)| (t - tm) * (t - tm)).sum();
    Ok(sxy / sxx)
}

/// `max(x) - min(x)`.
pub fn range_seminorm(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    let (hi, lo) = extremes(x);
    hi - lo
}

/// Slack granted to a discretized run against the continuous envelope:
/// `4 * (max total in-strength + max w_ii) * dt`.
pub fn discretization_allowance(g: &WeightedDigraph, dt: f64) -> f64 {
    let n = g.n();
    let strength = (0..n).map(|i| g.total_in(i)).fold(0.0, f64::max);
    let bound = g.disturbance_bounds().into_iter().fold(0.0, f64::max);
    4.0 * (strength + bound) * dt
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnvelopeReport {
    pub pass: bool,
    pub rate: f64,
    pub allowance: f64,
    pub worst_excess: f64,
    pub violations: usize,
}

/// Checks `D(t) <= max(0, D(t0) + rate * (t - t0)) + allowance` on every
/// sample.
pub fn check_envelope(traj: &Trajectory, rate: f64, allowance: f64) -> EnvelopeReport {
    let t0 = traj.times[0];
    let d0 = traj.diagnostics[0].spread;
    let mut worst = f64::NEG_INFINITY;
    let mut violations = 0;
    for (t, d) in traj.times.iter().zip(&traj.diagnostics) {
        let excess = d.spread - ((d0 + rate * (t - t0)).max(0.0) + allowance);
        worst = worst.max(excess);
        if excess > 0.0 {
            violations += 1;
        }
    }
    EnvelopeReport { pass: violations == 0, rate, allowance, worst_excess: worst, violations }
}
