//! Command-line front end.
//!
//! Exit codes: 0 ok, 1 input error, 2 verification failure, 3 result is
//! only a lower bound, 4 numeric failure.

use std::io::Write;
use std::ops::Range;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::bnb::{bnb_solve_with, polarization_with, BnbOptions};
use crate::dynamics::{
    build_extremal, check_envelope, discretization_allowance, extremal_trajectory, range_seminorm, simulate,
    DisturbanceSpec, Integrator, Trajectory,
};
use crate::error::{Error, Result};
use crate::filippov::{check_inclusion_with, discretized_checks, extremal_derivative_bounds, CheckOptions};
use crate::graph::{load_graph, random_graph, save_graph, split_nodes, NodeSet, WeightedDigraph};
use crate::indices::{
    autonomy, autonomy_breakdown, autonomy_lower, autonomy_upper, best_partition, complement_z_star,
    complement_z_star_with_limit, is_strong_community, key_nodes, polarization_exhaustive,
    polarization_exhaustive_with_limit, realizing_pair, Method, PolarizationResult, SearchStats,
    EXHAUSTIVE_HARD_LIMIT,
};
use crate::preset::ScenarioPreset;
use crate::trace;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_VERIFY: i32 = 2;
pub const EXIT_INEXACT: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "polarix", version, about = "Consensus and polarization analysis for the signum protocol")]
pub struct Cli {
    /// Worker threads for searches and batches.
    #[arg(long, global = true, env = "POLARIX_THREADS", default_value_t = 1)]
    pub threads: usize,
    /// Wall-time budget for branch and bound, in seconds.
    #[arg(long, global = true)]
    pub time_budget: Option<f64>,
    /// Consensus tolerance on the spread; for `verify --analytic` also the
    /// derivative tolerance.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum IndexMethod {
    Auto,
    Exhaustive,
    Complement,
    Bnb,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Polarization index of a graph.
    Index {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, value_enum, default_value_t = IndexMethod::Auto)]
        method: IndexMethod,
        /// Allow enumeration above 16 agents (up to 24).
        #[arg(long)]
        force: bool,
    },
    /// Autonomy of a group, or the satisfactory-partition search.
    Communities {
        #[arg(long)]
        graph: PathBuf,
        /// 1-based members, comma separated.
        #[arg(long)]
        set: Option<String>,
    },
    /// Simulate a preset and write the trajectory.
    Simulate {
        #[arg(long)]
        preset: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        svg: Option<PathBuf>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        t_end: Option<f64>,
        /// Seed of the bounded-noise model.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum)]
        integrator: Option<IntegratorArg>,
        /// Write the analytic extremal trajectory instead.
        #[arg(long)]
        extremal: bool,
    },
    /// Check a trajectory CSV against the differential inclusion.
    Verify {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        traj: PathBuf,
        /// Exact data: no equality grouping, tolerance from --tol (1e-9).
        #[arg(long)]
        analytic: bool,
        /// Stencil half-width of the extremal check on discretized data.
        #[arg(long, default_value_t = 16)]
        window: usize,
    },
    /// Convert an integer-weighted graph into an unweighted one.
    Split {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Seeded random graph.
    Generate {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 9)]
        max_weight: u32,
        #[arg(long, default_value_t = 0.5)]
        density: f64,
        #[arg(long)]
        self_loops: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a preset over a range of noise seeds; one JSON line per seed.
    Batch {
        #[arg(long)]
        preset: PathBuf,
        /// Half-open range such as `0..32`.
        #[arg(long, value_parser = parse_range)]
        seeds: Range<u64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum IntegratorArg {
    Euler,
    Rk4,
}

fn parse_range(s: &str) -> std::result::Result<Range<u64>, String> {
    let (a, b) = s.split_once("..").ok_or_else(|| format!("expected START..END, got {s:?}"))?;
    let a: u64 = a.trim().parse().map_err(|e| format!("{e}"))?;
    let b: u64 = b.trim().parse().map_err(|e| format!("{e}"))?;
    if b <= a {
        return Err(format!("empty range {s:?}"));
    }
    Ok(a..b)
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{e}");
                return EXIT_INPUT;
            }
            let _ = write!(out, "{e}");
            return EXIT_OK;
        }
    };
    match execute(&cli, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            match e {
                Error::BlowUp { .. } => EXIT_NUMERIC,
                _ => EXIT_INPUT,
            }
        }
    }
}

fn execute(cli: &Cli, out: &mut dyn Write) -> Result<i32> {
    let opts = BnbOptions {
        threads: cli.threads.max(1),
        time_budget: match cli.time_budget {
            Some(s) if !(s.is_finite() && s >= 0.0) => {
                return Err(Error::InvalidParameter(format!("time budget {s}")));
            }
            s => s.map(Duration::from_secs_f64),
        },
    };
    match &cli.command {
        Command::Index { graph, method, force } => {
            let g = read_graph(graph)?;
            let r = index(&g, *method, *force, opts)?;
            emit(out, &r)?;
            Ok(if r.exact { EXIT_OK } else { EXIT_INEXACT })
        }
        Command::Communities { graph, set } => {
            let g = read_graph(graph)?;
            emit(out, &communities(&g, set.as_deref())?)?;
            Ok(EXIT_OK)
        }
        Command::Simulate { preset, out: csv, svg, dt, t_end, seed, integrator, extremal } => {
            let mut p = ScenarioPreset::load(preset)?;
            if let Some(dt) = dt {
                p.config.dt = *dt;
            }
            if let Some(t) = t_end {
                p.config.t_end = *t;
            }
            if let Some(tol) = cli.tol {
                p.config.consensus_tol = tol;
            }
            if let Some(i) = integrator {
                p.config.integrator = match i {
                    IntegratorArg::Euler => Integrator::Euler,
                    IntegratorArg::Rk4 => Integrator::Rk4,
                };
            }
            if let Some(s) = seed {
                reseed(&mut p.disturbance, *s);
            }
            p.validate()?;
            let summary = simulate_preset(&p, *extremal, csv.as_deref(), svg.as_deref(), opts)?;
            emit(out, &summary)?;
            Ok(EXIT_OK)
        }
        Command::Verify { graph, traj, analytic, window } => {
            let g = read_graph(graph)?;
            let file = std::fs::File::open(traj)?;
            let t = trace::read_csv(file, cli.tol.unwrap_or(1e-9))?;
            if t.n() != g.n() {
                return Err(Error::InvalidParameter(format!(
                    "trajectory has {} agents, graph has {}",
                    t.n(),
                    g.n()
                )));
            }
            let report = verify(&g, &t, *analytic, cli.tol.unwrap_or(1e-9), *window, opts)?;
            let pass = report["pass"].as_bool().unwrap_or(false);
            emit(out, &report)?;
            Ok(if pass { EXIT_OK } else { EXIT_VERIFY })
        }
        Command::Split { graph, out: path } => {
            let g = read_graph(graph)?;
            let (h, map) = split_nodes(&g)?;
            let doc = json!({ "graph": h, "split_map": map });
            std::fs::write(path, serde_json::to_string_pretty(&doc)? + "\n")?;
            emit(out, &json!({ "n": h.n(), "out": path }))?;
            Ok(EXIT_OK)
        }
        Command::Generate { n, max_weight, density, self_loops, seed, out: path } => {
            let g = random_graph(*n, *max_weight, *density, *self_loops, *seed)?;
            match path {
                Some(p) => std::fs::write(p, save_graph(&g) + "\n")?,
                None => writeln!(out, "{}", save_graph(&g))?,
            }
            Ok(EXIT_OK)
        }
        Command::Batch { preset, seeds } => {
            let p = ScenarioPreset::load(preset)?;
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(opts.threads)
                .build()
                .map_err(|e| Error::InvalidParameter(e.to_string()))?;
            let rows: Vec<Result<Value>> = pool.install(|| {
                seeds
                    .clone()
                    .into_par_iter()
                    .map(|seed| {
                        let mut q = p.clone();
                        reseed(&mut q.disturbance, seed);
                        let summary = simulate_preset(&q, false, None, None, BnbOptions { threads: 1, ..opts })?;
                        let mut v = serde_json::to_value(summary)?;
                        v["seed"] = json!(seed);
                        Ok(v)
                    })
                    .collect()
            });
            for row in rows {
                writeln!(out, "{}", serde_json::to_string(&row?)?)?;
            }
            Ok(EXIT_OK)
        }
    }
}

fn emit<T: Serialize>(out: &mut dyn Write, value: &T) -> Result<()> {
    writeln!(out, "{}", serde_json::to_string_pretty(value)?)?;
    Ok(())
}

fn read_graph(path: &Path) -> Result<WeightedDigraph> {
    load_graph(&std::fs::read_to_string(path)?)
}

fn reseed(spec: &mut DisturbanceSpec, new_seed: u64) {
    if let DisturbanceSpec::BoundedNoise { seed, .. } = spec {
        *seed = new_seed;
    }
}

pub fn index(g: &WeightedDigraph, method: IndexMethod, force: bool, opts: BnbOptions) -> Result<PolarizationResult> {
    let limit = if force { EXHAUSTIVE_HARD_LIMIT } else { crate::indices::EXHAUSTIVE_LIMIT };
    match method {
        IndexMethod::Auto => polarization_with(g, opts),
        IndexMethod::Exhaustive if force => polarization_exhaustive_with_limit(g, limit),
        IndexMethod::Exhaustive => polarization_exhaustive(g),
        IndexMethod::Complement if force => complement_z_star_with_limit(g, limit),
        IndexMethod::Complement => complement_z_star(g),
        IndexMethod::Bnb => {
            let r = bnb_solve_with(g, opts);
            let v1 = NodeSet::new((0..g.n()).filter(|&i| r.witness[i] > 0).collect());
            let v2 = v1.complement(g.n());
            let (v1, v2) = if v1.members()[0] == 0 { (v1, v2) } else { (v2, v1) };
            Ok(PolarizationResult {
                value: crate::indices::pair_value(g, &v1, &v2)?,
                v1,
                v2,
                method: Method::BranchAndBound,
                exact: r.complete && r.z_dagger <= 0.0,
                stats: Some(SearchStats {
                    nodes_explored: r.nodes_explored,
                    wall_time_s: r.wall_time.as_secs_f64(),
                    complete: r.complete,
                }),
            })
        }
    }
}

fn parse_set(text: &str, n: usize) -> Result<NodeSet> {
    let members = text
        .split(',')
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<usize>().map_err(|e| Error::InvalidParameter(format!("set member {s:?}: {e}"))))
        .collect::<Result<Vec<usize>>>()?;
    let v = NodeSet::from_one_based(&members, n)?;
    if v.is_empty() {
        return Err(Error::EmptySet);
    }
    Ok(v)
}

pub fn communities(g: &WeightedDigraph, set: Option<&str>) -> Result<Value> {
    match set {
        Some(text) => {
            let v = parse_set(text, g.n())?;
            Ok(json!({
                "set": v,
                "autonomy_upper": autonomy_upper(g, &v)?,
                "autonomy_lower": autonomy_lower(g, &v)?,
                "autonomy": autonomy(g, &v)?,
                "strong_community": is_strong_community(g, &v)?,
                "key_nodes": key_nodes(g, &v)?,
                "breakdown": autonomy_breakdown(g, &v)?.members,
            }))
        }
        None => {
            let best = best_partition(g);
            let found = best.is_satisfactory();
            Ok(json!({
                "satisfactory_partition": if found { json!([best.v1, best.v2]) } else { Value::Null },
                "best_split": { "v1": best.v1, "v2": best.v2, "score": best.score },
                "nodes_explored": best.nodes_explored,
            }))
        }
    }
}

#[derive(Debug, Serialize)]
pub struct SimulationSummary {
    pub label: String,
    pub mode: &'static str,
    pub n: usize,
    pub samples: usize,
    pub initial_spread: f64,
    pub final_spread: f64,
    pub consensus_time: Option<f64>,
    pub polarization: f64,
    pub polarization_exact: bool,
    /// `D(0) / |A|` when the polarization index is negative.
    pub time_bound: Option<f64>,
    pub envelope_pass: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub svg: Option<PathBuf>,
}

pub fn simulate_preset(
    p: &ScenarioPreset,
    extremal: bool,
    csv: Option<&Path>,
    svg: Option<&Path>,
    opts: BnbOptions,
) -> Result<SimulationSummary> {
    let g = &p.graph;
    let pol = polarization_with(g, opts)?;
    let traj: Trajectory = if extremal {
        let (v1, v2) = match &p.extremal {
            Some(groups) => groups.sets(g.n())?,
            None => realizing_pair(g, &pol.v1, &pol.v2)?,
        };
        let plan = build_extremal(g, &v1, &v2)?;
        extremal_trajectory(g, &plan, &p.config)?
    } else {
        simulate(g, &p.x0, &p.disturbance, &p.config)?
    };
    if let Some(path) = csv {
        trace::write_csv(&traj, std::io::BufWriter::new(std::fs::File::create(path)?))?;
    }
    if let Some(path) = svg {
        let rate = pol.exact.then_some(pol.value);
        std::fs::write(path, crate::svg::render(&traj, rate, &p.label))?;
    }
    let initial_spread = range_seminorm(&traj.states[0]);
    let envelope_pass = pol.exact.then(|| {
        let allowance = if extremal { 1e-9 } else { discretization_allowance(g, p.config.dt) };
        check_envelope(&traj, pol.value, allowance).pass
    });
    Ok(SimulationSummary {
        label: p.label.clone(),
        mode: if extremal { "extremal" } else { "simulation" },
        n: g.n(),
        samples: traj.len(),
        initial_spread,
        final_spread: traj.diagnostics.last().map_or(0.0, |d| d.spread),
        consensus_time: traj.consensus_time,
        polarization: pol.value,
        polarization_exact: pol.exact,
        time_bound: (pol.exact && pol.value < 0.0).then(|| initial_spread / -pol.value),
        envelope_pass,
        csv: csv.map(Path::to_path_buf),
        svg: svg.map(Path::to_path_buf),
    })
}

/// Inclusion, extremal-rate and envelope checks combined.
pub fn verify(
    g: &WeightedDigraph,
    traj: &Trajectory,
    analytic: bool,
    tol: f64,
    window: usize,
    opts: BnbOptions,
) -> Result<Value> {
    if traj.len() < 2 {
        return Err(Error::InvalidParameter("trajectory needs at least 2 samples".into()));
    }
    let (inclusion_opts, extremal_opts) = if analytic {
        (CheckOptions::new(0.0, tol), CheckOptions::new(0.0, tol))
    } else {
        discretized_checks(g, traj, window)
    };
    let inclusion = check_inclusion_with(g, traj, &inclusion_opts);
    let extremal = extremal_derivative_bounds(g, traj, &extremal_opts);
    let pol = polarization_with(g, opts)?;
    let envelope = if pol.exact {
        let h = traj.times.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
        let allowance = if analytic { tol } else { discretization_allowance(g, h) };
        Some(check_envelope(traj, pol.value, allowance))
    } else {
        None
    };
    let pass = inclusion.pass && extremal.pass && envelope.as_ref().is_none_or(|e| e.pass);
    Ok(json!({
        "pass": pass,
        "polarization": pol.value,
        "polarization_exact": pol.exact,
        "inclusion": inclusion,
        "extremal_rates": extremal,
        "envelope": envelope,
    }))
}
