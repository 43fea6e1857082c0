use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mipdive::bnb::{solve, SolveResult, SolverConfig};
use mipdive::harness::{
    performance_profile, run_benchmark, summarize, write_csv, BenchInstance, BenchOptions, Setting,
};
use mipdive::heuristics::{HeuristicKind, DEFAULT_KAPPA};
use mipdive::instances::signed_binary_suite;
use mipdive::mps::{read_mps_file, write_mps, MpsError};
use mipdive::Problem;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
enum CliError {
    #[error("{path}: {source}")]
    Mps { path: PathBuf, source: MpsError },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("settings {path}: {msg}")]
    Settings { path: PathBuf, msg: String },
    #[error("{0}")]
    Solve(#[from] mipdive::bnb::SolveError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io: {0}")]
    Stdout(#[from] io::Error),
    #[error("{0}")]
    Metric(#[from] mipdive::harness::MetricError),
    #[error("no .mps files in {0}")]
    NoInstances(PathBuf),
}

#[derive(Parser)]
#[command(name = "mipdive", version, about = "Branch-and-bound MIP solver with diving heuristics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one MPS file.
    Solve {
        file: PathBuf,
        /// Comma separated list of farkas, coef, conflict.
        #[arg(long, value_delimiter = ',')]
        heuristics: Vec<HeuristicKind>,
        #[arg(long, default_value_t = DEFAULT_KAPPA)]
        kappa: f64,
        #[arg(long)]
        time_limit: Option<f64>,
        #[arg(long)]
        node_limit: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10)]
        dive_freq: usize,
        /// Print the result as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Run every setting on every instance of a directory.
    Bench {
        dir: PathBuf,
        /// TOML or JSON file with a `settings` list.
        #[arg(long)]
        settings: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "0")]
        seeds: Vec<u64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[arg(long)]
        time_limit: Option<f64>,
        #[arg(long)]
        node_limit: Option<usize>,
        /// Divides the 10/100/1000 s bracket thresholds.
        #[arg(long, default_value_t = 100.0)]
        bracket_divisor: f64,
        /// Write bound timelines as JSON lines.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Write a suite of random MIPs with randomly signed rows as MPS files.
    Generate {
        dir: PathBuf,
        #[arg(long, default_value_t = 30)]
        count: usize,
        #[arg(long, default_value_t = 30)]
        min_vars: usize,
        #[arg(long, default_value_t = 80)]
        max_vars: usize,
        #[arg(long, default_value_t = 2024)]
        seed: u64,
    },
}

#[derive(Serialize)]
struct SolveReport<'a> {
    instance: &'a str,
    status: String,
    objective: Option<f64>,
    bound: f64,
    nodes: usize,
    lp_iterations: usize,
    time: f64,
    conflicts: usize,
    heuristics: &'a std::collections::BTreeMap<HeuristicKind, mipdive::bnb::HeuristicStats>,
    solution: Option<Vec<(&'a str, f64)>>,
}

fn external_bound(p: &Problem, v: f64) -> f64 {
    if v.is_finite() {
        p.external_objective(v)
    } else if p.is_maximize() {
        -v
    } else {
        v
    }
}

fn report<'a>(p: &'a Problem, res: &'a SolveResult) -> SolveReport<'a> {
    SolveReport {
        instance: p.name(),
        status: res.status.to_string(),
        objective: res.objective().map(|v| p.external_objective(v)),
        bound: external_bound(p, res.bound),
        nodes: res.stats.nodes,
        lp_iterations: res.stats.lp_iterations,
        time: res.stats.time,
        conflicts: res.stats.conflicts(),
        heuristics: &res.stats.heuristics,
        solution: res.incumbent.as_ref().map(|x| {
            p.var_names()
                .iter()
                .zip(&x.values)
                .filter(|(_, &v)| v != 0.0)
                .map(|(n, &v)| (n.as_str(), v))
                .collect()
        }),
    }
}

fn load(path: &Path) -> Result<Problem, CliError> {
    read_mps_file(path).map_err(|source| CliError::Mps {
        path: path.to_path_buf(),
        source,
    })
}

#[allow(clippy::too_many_arguments)]
fn cmd_solve(
    file: &Path,
    heuristics: Vec<HeuristicKind>,
    kappa: f64,
    time_limit: Option<f64>,
    node_limit: Option<usize>,
    seed: u64,
    dive_freq: usize,
    json: bool,
) -> Result<(), CliError> {
    let p = load(file)?;
    let cfg = SolverConfig {
        heuristics,
        kappa,
        time_limit,
        node_limit,
        seed,
        dive_freq,
        ..SolverConfig::default()
    };
    let res = solve(&p, &cfg)?;
    let r = report(&p, &res);
    let mut out = io::stdout().lock();
    if json {
        serde_json::to_writer_pretty(&mut out, &r)?;
        writeln!(out)?;
        return Ok(());
    }
    writeln!(out, "instance     {}", r.instance)?;
    writeln!(out, "status       {}", r.status)?;
    match r.objective {
        Some(v) => writeln!(out, "objective    {v}")?,
        None => writeln!(out, "objective    -")?,
    }
    writeln!(out, "bound        {}", r.bound)?;
    writeln!(out, "nodes        {}", r.nodes)?;
    writeln!(out, "lp iters     {}", r.lp_iterations)?;
    writeln!(out, "conflicts    {}", r.conflicts)?;
    writeln!(out, "time         {:.3}s", r.time)?;
    for (h, s) in r.heuristics {
        writeln!(
            out,
            "{:<9} calls {} depth {:.2} conflicts {} solutions {} improving {}",
            h.name(),
            s.calls,
            s.avg_depth(),
            s.conflicts,
            s.solutions,
            s.improving
        )?;
    }
    if let Some(sol) = r.solution {
        for (n, v) in sol {
            writeln!(out, "  {n} = {v}")?;
        }
    }
    Ok(())
}

#[derive(Deserialize)]
#[serde(untagged)]
enum SettingsFile {
    Table { settings: Vec<Setting> },
    List(Vec<Setting>),
}

fn load_settings(path: &Path) -> Result<Vec<Setting>, CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let err = |msg: String| CliError::Settings {
        path: path.to_path_buf(),
        msg,
    };
    let parsed: SettingsFile = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).map_err(|e| err(e.to_string()))?
    } else {
        toml::from_str(&text).map_err(|e| err(e.to_string()))?
    };
    let settings = match parsed {
        SettingsFile::Table { settings } | SettingsFile::List(settings) => settings,
    };
    if settings.is_empty() {
        return Err(err("no settings given".into()));
    }
    Ok(settings)
}

fn mps_files(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let rd = fs::read_dir(dir).map_err(|source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut files: Vec<PathBuf> = rd
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("mps")))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(CliError::NoInstances(dir.to_path_buf()));
    }
    Ok(files)
}

#[derive(Serialize)]
struct TraceLine<'a> {
    instance: &'a str,
    seed: u64,
    setting: &'a str,
    time: f64,
    primal: Option<f64>,
    dual: f64,
}

#[allow(clippy::too_many_arguments)]
fn cmd_bench(
    dir: &Path,
    settings: &Path,
    seeds: Vec<u64>,
    out: &Path,
    workers: usize,
    time_limit: Option<f64>,
    node_limit: Option<usize>,
    divisor: f64,
    trace: Option<&Path>,
) -> Result<(), CliError> {
    let settings = load_settings(settings)?;
    let instances: Vec<BenchInstance> = mps_files(dir)?
        .into_iter()
        .map(|f| {
            let name = f.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            let problem = read_mps_file(&f).map_err(|e| e.to_string());
            if let Err(e) = &problem {
                log::warn!("{}: {e}", f.display());
            }
            BenchInstance { name, problem }
        })
        .collect();
    let opts = BenchOptions {
        seeds,
        time_limit,
        node_limit,
        workers,
    };
    let open = |path: &Path| {
        File::create(path).map(BufWriter::new).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })
    };
    let mut trace_out = trace.map(open).transpose()?;
    let mut trace_err = None;
    let records = run_benchmark(&instances, &settings, &opts, |run| {
        let r = &run.record;
        eprintln!(
            "{:<24} seed {:<3} {:<12} {:<11} nodes {:<8} time {:.2}s",
            r.instance, r.seed, r.setting, r.status, r.nodes, r.time
        );
        if let Some(w) = trace_out.as_mut() {
            for e in &run.timeline {
                let line = TraceLine {
                    instance: &r.instance,
                    seed: r.seed,
                    setting: &r.setting,
                    time: e.time,
                    primal: e.primal,
                    dual: e.dual,
                };
                let res = serde_json::to_writer(&mut *w, &line)
                    .map_err(CliError::from)
                    .and_then(|_| writeln!(w).map_err(CliError::from));
                if let Err(e) = res {
                    trace_err.get_or_insert(e);
                }
            }
        }
    });
    if let Some(e) = trace_err {
        return Err(e);
    }
    if let Some(mut w) = trace_out {
        w.flush()?;
    }
    write_csv(open(out)?, &records)?;

    let order: Vec<String> = settings.iter().map(|s| s.name.clone()).collect();
    let ok: Vec<_> = records.iter().filter(|r| r.error.is_none()).cloned().collect();
    if ok.is_empty() {
        return Ok(());
    }
    let mut so = io::stdout().lock();
    writeln!(
        so,
        "{:<18} {:<12} {:>6} {:>6} {:>10} {:>10} {:>7} {:>7} {:>9}",
        "group", "setting", "cells", "solved", "time", "nodes", "time_q", "nodes_q", "conflicts"
    )?;
    for s in summarize(&ok, &order, divisor)? {
        writeln!(
            so,
            "{:<18} {:<12} {:>6} {:>6} {:>10.3} {:>10.1} {:>7.3} {:>7.3} {:>9}",
            s.group, s.setting, s.cells, s.solved, s.time, s.nodes, s.time_quotient, s.nodes_quotient, s.conflicts
        )?;
    }
    let prof = performance_profile(&ok)?;
    writeln!(so, "\nperformance profile (tau: fraction per setting)")?;
    for (k, tau) in prof.taus.iter().enumerate() {
        let fr: Vec<String> = order
            .iter()
            .filter_map(|s| prof.curves.get(s).map(|c| format!("{s}={:.3}", c[k])))
            .collect();
        writeln!(so, "{tau:>10.3}  {}", fr.join(" "))?;
    }
    Ok(())
}

fn cmd_generate(dir: &Path, count: usize, lo: usize, hi: usize, seed: u64) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    for p in signed_binary_suite(count, lo, hi, seed) {
        let path = dir.join(format!("{}.mps", p.name()));
        fs::write(&path, write_mps(&p)).map_err(|source| CliError::Io { path, source })?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Solve {
            file,
            heuristics,
            kappa,
            time_limit,
            node_limit,
            seed,
            dive_freq,
            json,
        } => cmd_solve(&file, heuristics, kappa, time_limit, node_limit, seed, dive_freq, json),
        Command::Bench {
            dir,
            settings,
            seeds,
            out,
            workers,
            time_limit,
            node_limit,
            bracket_divisor,
            trace,
        } => cmd_bench(
            &dir,
            &settings,
            seeds,
            &out,
            workers,
            time_limit,
            node_limit,
            bracket_divisor,
            trace.as_deref(),
        ),
        Command::Generate {
            dir,
            count,
            min_vars,
            max_vars,
            seed,
        } => cmd_generate(&dir, count, min_vars, max_vars, seed),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
