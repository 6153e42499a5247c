//! Argument definitions and command implementations of the `rategraph`
//! binary.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;

use rategraph_core::ctmc::{master_steady_state, reachable_space, StateSpace};
use rategraph_core::gluing::minimal_gluings;
use rategraph_core::greg::{is_forbidden, ClosurePolicy, LinearCombination, Observable, Rational};
use rategraph_core::odeint::{integrate_with, steady_state, OdeError, SteadyOptions, DEFAULT_DT};

use crate::dsl::{compile, parse_model, Compiled};
use crate::ensemble::{run_ensemble, sample_grid, EnsembleConfig};
use crate::error::CliError;
use crate::export::{latex, text_terms, write_csv};
use crate::system::{eval_row, expand_model, SystemFile, FORMAT_VERSION};

#[derive(Debug, Parser)]
#[command(name = "rategraph", version, about = "Rate equations for stochastic graph rewriting")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Expand the model's rate equations into a system (sys.json).
    Expand {
        model: PathBuf,
        /// Set observables with more nodes to zero.
        #[arg(long)]
        max_size: Option<usize>,
        /// Give up after this many equations.
        #[arg(long)]
        max_obs: Option<usize>,
        /// Do not substitute declared equivalences.
        #[arg(long)]
        no_equiv: bool,
        /// Do not drop observables containing forbidden patterns.
        #[arg(long)]
        no_prune: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Integrate a system and print its variables and outputs as CSV.
    Integrate {
        system: PathBuf,
        #[arg(long)]
        t_end: f64,
        #[arg(long, default_value_t = DEFAULT_DT)]
        dt: f64,
        /// Print every n-th step.
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
        every: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Integrate a system to steady state and evaluate its outputs.
    Steady {
        system: PathBuf,
        #[arg(long, default_value_t = DEFAULT_DT)]
        dt: f64,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[arg(long, default_value_t = 100)]
        window: usize,
        #[arg(long, default_value_t = 1e4)]
        t_max: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Stochastic simulation of the model from a concrete graph.
    Simulate {
        model: PathBuf,
        /// Start graph; defaults to the model's `start`.
        #[arg(long)]
        init: Option<String>,
        #[arg(long)]
        t_end: f64,
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
        runs: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of evenly spaced sample times, both ends included.
        #[arg(long, default_value_t = 11)]
        samples: usize,
        /// Write the first trajectory as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact expectations from the master equation on the reachable states.
    Master {
        model: PathBuf,
        #[arg(long)]
        init: Option<String>,
        #[arg(long)]
        cap: usize,
        /// Also report expectations at this time.
        #[arg(long)]
        t_end: Option<f64>,
        #[arg(long, default_value_t = DEFAULT_DT)]
        dt: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the minimal gluings of two graphs of a model.
    Gluings {
        model: PathBuf,
        left: String,
        right: String,
        /// Also report how many survive each invariant in turn.
        #[arg(long)]
        prune: bool,
        #[arg(long)]
        json: bool,
    },
    /// Render a system as LaTeX.
    Latex {
        system: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.display().to_string(), source })
}

fn write_to(path: &Option<PathBuf>, out: &mut dyn Write, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|source| CliError::Io { path: p.display().to_string(), source }),
        None => out
            .write_all(text.as_bytes())
            .map_err(|source| CliError::Io { path: "<stdout>".into(), source }),
    }
}

fn json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serialisable");
    s.push('\n');
    s
}

pub fn load_model(path: &Path) -> Result<Compiled, CliError> {
    let text = read(path)?;
    let m = parse_model(&text).map_err(|source| CliError::Model { path: path.display().to_string(), source })?;
    compile(&m).map_err(|source| CliError::Model { path: path.display().to_string(), source })
}

pub fn load_system(path: &Path) -> Result<SystemFile, CliError> {
    let text = read(path)?;
    let sys: SystemFile =
        serde_json::from_str(&text).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?;
    sys.check_version()?;
    Ok(sys)
}

/// Named observables and outputs, evaluated on concrete states.
fn tracked(c: &Compiled) -> Vec<(String, LinearCombination)> {
    let one = Rational::from_integer(1);
    let mut v: Vec<(String, LinearCombination)> = c
        .model
        .observables
        .iter()
        .map(|(n, o)| (n.clone(), LinearCombination::single(one, o.clone())))
        .collect();
    if v.is_empty() {
        for s in &c.seeds {
            let name = c.name_of(s).unwrap_or("F").to_string();
            v.push((name, LinearCombination::single(one, s.clone())));
        }
    }
    v.extend(c.model.outputs.iter().map(|o| (o.name.clone(), o.combination.clone())));
    v
}

fn start_graph(c: &Compiled, init: &Option<String>) -> Result<std::sync::Arc<rategraph_core::graph::Graph>, CliError> {
    match init {
        Some(n) => c.graph(n).cloned().ok_or_else(|| CliError::Invalid(format!("no graph named `{n}`"))),
        None => c.start.clone().ok_or_else(|| CliError::Invalid("no --init given and the model has no `start`".into())),
    }
}

#[derive(Serialize)]
struct SteadyJson {
    format_version: u32,
    model: String,
    values: std::collections::BTreeMap<String, f64>,
    outputs: std::collections::BTreeMap<String, f64>,
    converged: bool,
    t_converged: Option<f64>,
}

#[derive(Serialize)]
struct MasterJson {
    format_version: u32,
    model: String,
    states: usize,
    names: Vec<String>,
    t_end: Option<f64>,
    at_t_end: Option<Vec<f64>>,
    steady: Vec<f64>,
}

#[derive(Serialize)]
struct GluingJson {
    index: usize,
    overlap: usize,
    key: String,
    tip: crate::system::GraphJson,
    left_nodes: Vec<usize>,
    left_edges: Vec<usize>,
    right_nodes: Vec<usize>,
    right_edges: Vec<usize>,
}

fn expectations(space: &StateSpace, p: &[f64], fs: &[(String, LinearCombination)]) -> Result<Vec<f64>, CliError> {
    fs.iter()
        .map(|(_, f)| Ok(space.eval(f)?.iter().zip(p).map(|(a, b)| a * b).sum()))
        .collect()
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Expand { model, max_size, max_obs, no_equiv, no_prune, out: path } => {
            let c = load_model(&model)?;
            if c.model.rules.is_empty() {
                return Err(CliError::Invalid(format!("{}: the model has no rules to expand", model.display())));
            }
            let policy = ClosurePolicy {
                prune_invariants: c.policy.prune_invariants && !no_prune,
                substitute_equivalences: c.policy.substitute_equivalences && !no_equiv,
                max_size: max_size.or(c.policy.max_size),
                max_observables: max_obs.unwrap_or(c.policy.max_observables),
            };
            match expand_model(&c, &policy) {
                Ok(sys) => {
                    for (eq, name) in sys.equations.iter().zip(sys.variable_names()) {
                        eprintln!("d<{name}>/dt = {}", text_terms(&sys, &eq.terms));
                    }
                    eprintln!("{} equations, closed", sys.equations.len());
                    write_to(&path, out, &json(&sys))
                }
                Err((partial, e)) => {
                    if let (Some(p), Some(sys)) = (&path, partial) {
                        write_to(&Some(p.clone()), out, &json(&sys))?;
                    }
                    Err(e.into())
                }
            }
        }
        Command::Integrate { system, t_end, dt, every, out: path } => {
            let sys = load_system(&system)?;
            let p = sys.problem(t_end, dt)?;
            let outputs = sys.output_rows()?;
            let mut names = sys.variable_names();
            names.extend(outputs.iter().map(|o| o.0.clone()));
            let (mut times, mut rows) = (Vec::new(), Vec::new());
            let mut step = 0u64;
            let n_steps = if t_end == 0.0 { 0 } else { (t_end / dt - 1e-9).ceil().max(1.0) as u64 };
            integrate_with(&p, |t, x| {
                if step.is_multiple_of(every) || step == n_steps {
                    let mut row = x.to_vec();
                    row.extend(outputs.iter().map(|(_, r, b)| eval_row(r, *b, x)));
                    times.push(t);
                    rows.push(row);
                }
                step += 1;
            })?;
            let mut buf = Vec::new();
            write_csv(&mut buf, &names, &times, &rows).map_err(|e| CliError::Invalid(e.to_string()))?;
            write_to(&path, out, &String::from_utf8(buf).expect("utf-8"))
        }
        Command::Steady { system, dt, tol, window, t_max, out: path } => {
            let sys = load_system(&system)?;
            let p = sys.problem(0.0, dt)?;
            let outputs = sys.output_rows()?;
            let names = sys.variable_names();
            let opts = SteadyOptions { tol, window, t_max };
            let (values, t, err) = match steady_state(&p, &opts) {
                Ok(s) => (s.values, Some(s.t_converged), None),
                Err(OdeError::NoConvergence { t_max, values }) => {
                    let e = OdeError::NoConvergence { t_max, values: values.clone() };
                    (values, None, Some(e))
                }
                Err(e) => return Err(e.into()),
            };
            let doc = SteadyJson {
                format_version: FORMAT_VERSION,
                model: sys.model.clone(),
                values: names.iter().cloned().zip(values.iter().copied()).collect(),
                outputs: outputs.iter().map(|(n, r, b)| (n.clone(), eval_row(r, *b, &values))).collect(),
                converged: err.is_none(),
                t_converged: t,
            };
            write_to(&path, out, &json(&doc))?;
            err.map_or(Ok(()), |e| Err(e.into()))
        }
        Command::Simulate { model, init, t_end, runs, seed, samples, csv, out: path } => {
            let c = load_model(&model)?;
            let g0 = start_graph(&c, &init)?;
            if !(t_end > 0.0 && t_end.is_finite()) {
                return Err(CliError::Invalid(format!("--t-end must be positive, got {t_end}")));
            }
            let tracked = tracked(&c);
            let config = EnsembleConfig {
                model_name: &c.name,
                model: &c.model,
                start: &g0,
                tracked: tracked.clone(),
                t_end,
                runs: runs as usize,
                seed,
                times: sample_grid(t_end, samples),
            };
            let summary = run_ensemble(&config)?;
            if let Some(p) = &csv {
                let lcs = tracked.iter().map(|t| t.1.clone()).collect();
                let traj = rategraph_core::ctmc::Simulator::new(&c.model, lcs).run(&g0, t_end, seed)?;
                let names: Vec<String> = tracked.iter().map(|t| t.0.clone()).collect();
                let mut buf = Vec::new();
                write_csv(&mut buf, &names, &traj.times, &traj.values).map_err(|e| CliError::Invalid(e.to_string()))?;
                std::fs::write(p, buf).map_err(|source| CliError::Io { path: p.display().to_string(), source })?;
            }
            write_to(&path, out, &json(&summary))
        }
        Command::Master { model, init, cap, t_end, dt, out: path } => {
            let c = load_model(&model)?;
            let g0 = start_graph(&c, &init)?;
            let space = reachable_space(&c.model, &g0, cap)?;
            let p0 = space.point_mass(&g0).ok_or_else(|| CliError::Internal("start state not in its own space".into()))?;
            let fs = tracked(&c);
            let at_t_end = match t_end {
                Some(t) => {
                    let p = space.master_problem(&p0, t, dt)?;
                    let pt = integrate_with(&p, |_, _| {})?;
                    Some(expectations(&space, &pt, &fs)?)
                }
                None => None,
            };
            let ps = master_steady_state(&space, &p0, dt, &SteadyOptions::default())?;
            let doc = MasterJson {
                format_version: FORMAT_VERSION,
                model: c.name.clone(),
                states: space.len(),
                names: fs.iter().map(|f| f.0.clone()).collect(),
                t_end,
                at_t_end,
                steady: expectations(&space, &ps, &fs)?,
            };
            write_to(&path, out, &json(&doc))
        }
        Command::Gluings { model, left, right, prune, json: as_json } => {
            let c = load_model(&model)?;
            let find = |n: &str| c.graph(n).cloned().ok_or_else(|| CliError::Invalid(format!("no graph named `{n}`")));
            let (g1, g2) = (find(&left)?, find(&right)?);
            let gs = minimal_gluings(&g1, &g2);
            if as_json {
                let entries: Vec<GluingJson> = gs
                    .iter()
                    .enumerate()
                    .map(|(i, g)| GluingJson {
                        index: i,
                        overlap: g.overlap_size(),
                        key: g.key.to_string(),
                        tip: crate::system::GraphJson::new(g.tip(), &c.alphabet),
                        left_nodes: g.left.node_map().to_vec(),
                        left_edges: g.left.edge_map().to_vec(),
                        right_nodes: g.right.node_map().to_vec(),
                        right_edges: g.right.edge_map().to_vec(),
                    })
                    .collect();
                return write_to(&None, out, &json(&entries));
            }
            let mut s = format!("{} minimal gluings of {left} and {right}\n", gs.len());
            for (i, g) in gs.iter().enumerate() {
                s.push_str(&format!("{i:>3}  overlap {:>2}  {}\n", g.overlap_size(), c.alphabet.inline(g.tip())));
            }
            if prune {
                let mut left_over: Vec<Observable> = gs.iter().map(|g| Observable::new(g.tip())).collect();
                for inv in &c.model.invariants {
                    let single = rategraph_core::greg::Model { invariants: vec![inv.clone()], ..Default::default() };
                    left_over.retain(|o| !is_forbidden(o, &single));
                    s.push_str(&format!("after {}: {}\n", inv.name, left_over.len()));
                }
            }
            write_to(&None, out, &s)
        }
        Command::Latex { system, out: path } => {
            let sys = load_system(&system)?;
            write_to(&path, out, &latex(&sys))
        }
    }
}
