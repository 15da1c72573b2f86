//! Command-line front end: builds initial data from a config, dispatches the
//! subcommand and writes artifacts plus a `run.log` into the output directory.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::Parser;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::barriers::{build_barrier_pair, sandwich_trials, FlowHistory};
use crate::classify::classify_dichotomy;
use crate::config::{parse_a_grid, parse_config, Command, ExperimentConfig, InitialData};
use crate::error::{Error, Result};
use crate::flow::{evolve, FlowState, SnapshotRecorder};
use crate::geometry::{CylinderGraph, FrameKind, SQRT2};
use crate::io::{fmt17, write_json};
use crate::perturb::{compliant_pairs, run_escape_experiment, separation_audit, EscapeReport};
use crate::spectral::{discrete_spectrum, eigenfunction_eval, eigenvalue, project, EigenIndex};

#[derive(Debug, Parser)]
#[command(name = "neckflow", version, about = "Mean curvature flow experiments near the shrinking cylinder")]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Command,
    /// Experiment config (JSON); defaults are used when absent.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Worker threads for sweeps and randomized trials.
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory, overriding the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Seed amplitude for `escape`.
    #[arg(long, allow_hyphen_values = true)]
    pub a: Option<f64>,
    /// Amplitude grid for `sweep`, e.g. `1e-4:1e-2:log10`.
    #[arg(long = "a-grid")]
    pub a_grid: Option<String>,
}

/// Exit status and the files written by a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub status: i32,
    pub artifacts: Vec<PathBuf>,
    pub notes: Vec<String>,
}

impl Outcome {
    fn new() -> Self {
        Outcome {
            status: 0,
            artifacts: Vec::new(),
            notes: Vec::new(),
        }
    }

    fn hypothesis_failure(&mut self, note: String) {
        self.status = self.status.max(2);
        self.notes.push(note);
    }
}

/// Errors that report a failed hypothesis of an experiment rather than a
/// broken run.
pub fn is_hypothesis_failure(e: &Error) -> bool {
    matches!(
        e.root(),
        Error::HypothesisFailed { .. }
            | Error::LostGraphicality(_)
            | Error::TooShort(_)
            | Error::NoSignChange(_)
            | Error::MatchingFailed(_)
            | Error::MeanConvexityFailed(_)
    )
}

fn error_record(e: &Error) -> serde_json::Value {
    json!({ "error": e.kind(), "message": e.to_string() })
}

pub fn initial_state(cfg: &ExperimentConfig) -> Result<FlowState> {
    let graph = match &cfg.initial {
        InitialData::Csv { path } => CylinderGraph::read_csv(path)?,
        init => {
            let grid = cfg.grid.spec()?;
            let g = match *init {
                InitialData::Cylinder { offset } => CylinderGraph::constant(grid, offset),
                InitialData::Dumbbell { neck, bell, width } => CylinderGraph::from_fn(grid, |y, _| {
                    bell - (bell - neck) * (-(y / width).powi(2)).exp() - SQRT2
                }),
                InitialData::NeckProfile { c, amplitude, length } => CylinderGraph::from_fn(grid, |y, _| {
                    c + amplitude * (y * y - 2.0) / (1.0 + (y / length).powi(2))
                }),
                InitialData::NearDegenerate { eta } => {
                    let idx = EigenIndex::axial(3);
                    CylinderGraph::from_fn(grid, |y, t| eta * eigenfunction_eval(idx, y, t))
                }
                InitialData::Mode { m, n, parity, amplitude } => {
                    let idx = EigenIndex::new(m, n, parity);
                    CylinderGraph::from_fn(grid, |y, t| amplitude * eigenfunction_eval(idx, y, t))
                }
                InitialData::Csv { .. } => unreachable!(),
            };
            g
        }
    };
    graph.check_embedded()?;
    let state = match cfg.frame_kind() {
        FrameKind::Rescaled => FlowState::rescaled(graph),
        FrameKind::Unrescaled => FlowState::unrescaled(graph, 0.0),
    };
    Ok(state.with_params(cfg.step))
}

/// Short stable name for a parameter set.
pub fn parameter_hash<T: Serialize>(value: &T) -> String {
    let text = serde_json::to_string(value).unwrap_or_default();
    let digest = Sha256::digest(text.as_bytes());
    hex::encode(digest)[..16].to_string()
}

/// Runs one subcommand and writes its artifacts under `cfg.output_dir`.
pub fn execute(cfg: &ExperimentConfig, command: Command) -> Result<Outcome> {
    fs::create_dir_all(&cfg.output_dir)?;
    let out = cfg.output_dir.as_path();
    match command {
        Command::Simulate => simulate(cfg, out, false),
        Command::Classify => simulate(cfg, out, true),
        Command::Spectrum => spectrum(cfg, out),
        Command::Escape => escape(cfg, out),
        Command::Sweep => sweep(cfg, out),
        Command::BarrierCheck => barrier_check(cfg, out),
        Command::Audit => audit(cfg, out),
    }
}

fn simulate(cfg: &ExperimentConfig, out: &Path, strict: bool) -> Result<Outcome> {
    let mut res = Outcome::new();
    let state = initial_state(cfg)?;
    let kind = state.frame.kind;
    if strict && kind != FrameKind::Rescaled {
        return Err(Error::InvalidInput("classify needs rescaled initial data".into()));
    }
    let mut rec = SnapshotRecorder::default();
    let (trace, last) = evolve(state, &cfg.stop, &cfg.sampling, &mut [&mut rec])?;
    let trace_path = out.join("trace.csv");
    trace.write_csv(&trace_path)?;
    let profile_path = out.join("final_profile.csv");
    last.graph.write_csv(&profile_path)?;
    let verdict = match kind {
        FrameKind::Rescaled => match classify_dichotomy(&trace, &rec.snapshots) {
            Ok(v) => serde_json::to_value(v)?,
            Err(e) => {
                if strict && is_hypothesis_failure(&e) {
                    res.hypothesis_failure(format!("classification: {e}"));
                } else if strict {
                    return Err(e);
                }
                error_record(&e)
            }
        },
        FrameKind::Unrescaled => {
            let g = &last.graph;
            let (mut rmin, mut at) = (f64::INFINITY, 0.0);
            for i in 0..g.grid.n_y {
                for j in 0..g.grid.n_theta {
                    if g.radius(i, j) < rmin {
                        rmin = g.radius(i, j);
                        at = g.y(i);
                    }
                }
            }
            json!({
                "stop_reason": trace.stop_reason.map(|s| s.as_str()),
                "final_time": last.time,
                "min_radius": rmin,
                "min_radius_y": at,
            })
        }
    };
    let verdict_path = out.join("verdict.json");
    write_json(&verdict_path, &verdict)?;
    res.artifacts.extend([trace_path, profile_path, verdict_path]);
    Ok(res)
}

fn spectrum(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    let mut res = Outcome::new();
    let state = initial_state(cfg)?;
    let coeffs = project(&state.graph, cfg.spectrum.cutoff)?;
    let cpath = out.join("coefficients.csv");
    coeffs.write_csv(&cpath)?;
    let g = &cfg.grid;
    let disc = discrete_spectrum(g.half_length, g.n_y, g.n_theta, cfg.spectrum.cutoff)?;
    let spath = out.join("spectrum.csv");
    let mut w = csv::Writer::from_path(&spath)?;
    w.write_record(["m", "n", "parity", "lambda_exact", "lambda_discrete"])?;
    for (idx, lam) in disc {
        w.write_record([
            idx.m.to_string(),
            idx.n.to_string(),
            format!("{:?}", idx.parity).to_lowercase(),
            fmt17(eigenvalue(idx).value()),
            fmt17(lam),
        ])?;
    }
    w.flush()?;
    res.artifacts.extend([cpath, spath]);
    Ok(res)
}

#[derive(Serialize)]
struct EscapeJob<'a> {
    a: String,
    initial: &'a InitialData,
    grid: &'a crate::config::GridConfig,
    schedule: &'a crate::metrics::ScheduleParams,
    escape: &'a crate::perturb::EscapeOptions,
}

fn escape_job(cfg: &ExperimentConfig, a: f64) -> (String, Result<EscapeReport>) {
    let job = EscapeJob {
        a: fmt17(a),
        initial: &cfg.initial,
        grid: &cfg.grid,
        schedule: &cfg.schedule,
        escape: &cfg.escape,
    };
    let hash = parameter_hash(&job);
    let report = initial_state(cfg).and_then(|base| {
        if base.frame.kind != FrameKind::Rescaled {
            return Err(Error::InvalidInput("escape needs rescaled base data".into()));
        }
        run_escape_experiment(&base, a, &cfg.schedule, &cfg.escape)
    });
    (hash, report)
}

fn escape(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    let mut res = Outcome::new();
    let a = cfg
        .a
        .ok_or_else(|| Error::InvalidInput("escape needs a seed amplitude (--a or \"a\")".into()))?;
    let (_, report) = escape_job(cfg, a);
    let path = out.join("escape_report.json");
    match report {
        Ok(r) => write_json(&path, &r)?,
        Err(e) if is_hypothesis_failure(&e) => {
            write_json(&path, &json!({ "a": a, "failure": error_record(&e) }))?;
            res.hypothesis_failure(format!("escape: {e}"));
        }
        Err(e) => return Err(e),
    }
    res.artifacts.push(path);
    Ok(res)
}

fn sweep(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    let mut res = Outcome::new();
    let grid = cfg
        .a_grid
        .as_deref()
        .ok_or_else(|| Error::InvalidInput("sweep needs an amplitude grid (--a-grid or \"a_grid\")".into()))?;
    let values = parse_a_grid(grid)?;
    let runs: Vec<(f64, String, Result<EscapeReport>)> = values
        .par_iter()
        .map(|&a| {
            let (h, r) = escape_job(cfg, a);
            (a, h, r)
        })
        .collect();
    let agg = out.join("sweep.csv");
    let mut w = csv::Writer::from_path(&agg)?;
    w.write_record(["a", "t_eps", "growth_exponent", "verdict", "report"])?;
    let mut hard = None;
    for (a, hash, r) in runs {
        let name = format!("escape_{hash}.json");
        let path = out.join(&name);
        let (t_eps, rate, verdict) = match &r {
            Ok(rep) => {
                write_json(&path, rep)?;
                let v = if rep.escape_verdict { "escapes" } else { "no-escape" };
                (fmt17(rep.t_eps), fmt17(rep.growth_exponent), v.to_string())
            }
            Err(e) => {
                write_json(&path, &json!({ "a": a, "failure": error_record(e) }))?;
                if is_hypothesis_failure(e) {
                    res.hypothesis_failure(format!("a = {a}: {e}"));
                } else {
                    hard.get_or_insert_with(|| format!("a = {a}: {e}"));
                }
                (String::new(), String::new(), format!("failed:{}", e.kind()))
            }
        };
        w.write_record([fmt17(a), t_eps, rate, verdict, name])?;
        res.artifacts.push(path);
    }
    w.flush()?;
    res.artifacts.push(agg);
    if let Some(msg) = hard {
        res.status = 1;
        res.notes.push(msg);
    }
    Ok(res)
}

fn barrier_check(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    let mut res = Outcome::new();
    let state = initial_state(cfg)?;
    if state.frame.kind != FrameKind::Unrescaled {
        return Err(Error::InvalidInput("barrier-check needs unrescaled initial data".into()));
    }
    let b = &cfg.barrier;
    let count = ((b.spec.t_end + b.eps) / b.interval).ceil() as usize + 4;
    let history = FlowHistory::record(&state, &FlowHistory::uniform_times(0.0, b.interval, count))?;
    let pair = match build_barrier_pair(&history, b.eps, &b.spec) {
        Ok(p) => p,
        Err(e) if is_hypothesis_failure(&e) => {
            let path = out.join("barrier.json");
            write_json(&path, &json!({ "failure": error_record(&e) }))?;
            res.artifacts.push(path);
            res.hypothesis_failure(format!("barrier: {e}"));
            return Ok(res);
        }
        Err(e) => return Err(e),
    };
    pair.write_csv(out)?;
    let trials = sandwich_trials(&pair, b.trials, cfg.seed, cfg.step)?;
    let violations: Vec<_> = trials
        .iter()
        .enumerate()
        .filter_map(|(k, t)| t.violated_at.map(|(time, y)| json!({ "trial": k, "t": time, "y": y })))
        .collect();
    if !violations.is_empty() {
        res.hypothesis_failure(format!("{} of {} trials left the sandwich", violations.len(), trials.len()));
    }
    if !(pair.certificate_margin > 0.0) {
        res.hypothesis_failure(format!("supersolution margin {}", pair.certificate_margin));
    }
    let path = out.join("barrier.json");
    write_json(
        &path,
        &json!({
            "eps": pair.eps,
            "c1": pair.c1,
            "k": pair.k,
            "certificate_margin": pair.certificate_margin,
            "window": [pair.times[0], pair.times[pair.times.len() - 1]],
            "trials": trials.len(),
            "violations": violations,
        }),
    )?;
    res.artifacts.extend([path, out.join("lower.csv"), out.join("upper.csv")]);
    Ok(res)
}

fn audit(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    let mut res = Outcome::new();
    let reports: Vec<_> = cfg
        .audit
        .eps
        .iter()
        .map(|&eps| {
            let pairs = cfg.audit.pairs.clone().unwrap_or_else(|| compliant_pairs(eps));
            separation_audit(&pairs, eps)
        })
        .collect();
    for r in &reports {
        if !r.violations.is_empty() {
            res.hypothesis_failure(format!("eps = {}: {} violating pairs", r.eps, r.violations.len()));
        }
    }
    let path = out.join("audit.json");
    write_json(&path, &reports)?;
    res.artifacts.push(path);
    Ok(res)
}

fn write_run_log(dir: &Path, lines: &[String]) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    let mut f = fs::File::create(dir.join("run.log"))?;
    for l in lines {
        writeln!(f, "{l}")?;
    }
    Ok(())
}

/// Applies command-line overrides to a parsed config.
pub fn resolve_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => parse_config(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(c) = cfg.command {
        if c != cli.command {
            return Err(Error::Validation(vec![format!(
                "command: config says {c:?} but {:?} was requested",
                cli.command
            )]));
        }
    }
    cfg.command = Some(cli.command);
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.output_dir = o.clone();
    }
    if cli.a.is_some() {
        cfg.a = cli.a;
    }
    if cli.a_grid.is_some() {
        cfg.a_grid = cli.a_grid.clone();
    }
    let v = cfg.violations();
    if !v.is_empty() {
        return Err(Error::Validation(v));
    }
    Ok(cfg)
}

/// Full CLI run; returns the process exit status (0 ok, 2 hypothesis
/// failures, 1 errors).
pub fn run(cli: &Cli) -> i32 {
    let fallback_dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    let cfg = match resolve_config(cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("neckflow: {e}");
            let _ = write_run_log(&fallback_dir, &[error_record(&e).to_string()]);
            return 1;
        }
    };
    let mut log = vec![json!({ "command": cli.command, "seed": cfg.seed }).to_string()];
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.jobs.unwrap_or(0)).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("neckflow: {e}");
            return 1;
        }
    };
    let result = pool.install(|| execute(&cfg, cli.command));
    let status = match result {
        Ok(o) => {
            for a in &o.artifacts {
                log.push(json!({ "artifact": a }).to_string());
            }
            for n in &o.notes {
                log::warn!("{n}");
                log.push(json!({ "note": n }).to_string());
            }
            o.status
        }
        Err(e) => {
            eprintln!("neckflow: {e}");
            log.push(error_record(&e).to_string());
            if is_hypothesis_failure(&e) {
                2
            } else {
                1
            }
        }
    };
    log.push(json!({ "status": status }).to_string());
    if let Err(e) = write_run_log(&cfg.output_dir, &log) {
        eprintln!("neckflow: cannot write run.log: {e}");
        return 1;
    }
    status
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_is_stable_and_parameter_sensitive() {
        let a = parameter_hash(&json!({"a": "1e-3"}));
        assert_eq!(a, parameter_hash(&json!({"a": "1e-3"})));
        assert_ne!(a, parameter_hash(&json!({"a": "1e-4"})));
        assert_eq!(a.len(), 16);
    }

    #[test]
    fn command_mismatch_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        fs::write(&p, r#"{"command": "audit"}"#).unwrap();
        let cli = Cli::parse_from(["neckflow", "simulate", "--config", p.to_str().unwrap()]);
        assert!(matches!(resolve_config(&cli), Err(Error::Validation(_))));
    }
}
