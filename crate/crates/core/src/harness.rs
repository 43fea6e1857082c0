//! Benchmark runner and solver performance metrics.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Write;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bnb::{solve, SolverConfig, TimelineEvent};
use crate::heuristics::HeuristicKind;
use crate::problem::Problem;

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("no values to aggregate")]
    Empty,
    #[error("value {0} is negative")]
    Negative(f64),
    #[error("setting '{setting}' does not cover the same instance/seed grid")]
    GridMismatch { setting: String },
}

/// Relative gap of `value` to `reference`, capped at 1.
pub fn gap(value: Option<f64>, reference: Option<f64>) -> f64 {
    let (Some(v), Some(r)) = (value, reference) else {
        return 1.0;
    };
    if !v.is_finite() || !r.is_finite() || v * r < 0.0 {
        return 1.0;
    }
    let d = (v - r).abs();
    if d == 0.0 {
        return 0.0;
    }
    (d / v.abs().max(r.abs()).max(1e-9)).min(1.0)
}

fn gap_integral(events: &[(f64, Option<f64>)], horizon: f64, reference: Option<f64>) -> f64 {
    let mut total = 0.0;
    let mut t = 0.0;
    let mut current = None;
    for &(time, value) in events {
        let time = time.clamp(0.0, horizon);
        total += (time - t) * gap(current, reference);
        t = time;
        current = value;
    }
    total + (horizon - t).max(0.0) * gap(current, reference)
}

/// Integral over `[0, horizon]` of the primal gap; `events` are time-sorted incumbent values.
pub fn primal_integral(events: &[(f64, f64)], horizon: f64, reference: Option<f64>) -> f64 {
    let ev: Vec<_> = events.iter().map(|&(t, v)| (t, Some(v))).collect();
    gap_integral(&ev, horizon, reference)
}

/// Integral over `[0, horizon]` of the gap between the dual bound and `reference`.
pub fn dual_integral(events: &[(f64, f64)], horizon: f64, reference: Option<f64>) -> f64 {
    let ev: Vec<_> = events.iter().map(|&(t, v)| (t, Some(v))).collect();
    gap_integral(&ev, horizon, reference)
}

/// `exp(mean(ln(v + shift))) - shift`.
pub fn shifted_geomean(values: &[f64], shift: f64) -> Result<f64, MetricError> {
    if values.is_empty() {
        return Err(MetricError::Empty);
    }
    let mut s = 0.0;
    for &v in values {
        if v < 0.0 {
            return Err(MetricError::Negative(v));
        }
        s += (v + shift).ln();
    }
    Ok((s / values.len() as f64).exp() - shift)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub instance: String,
    pub seed: u64,
    pub setting: String,
    pub status: String,
    pub time: f64,
    pub nodes: usize,
    pub objective: Option<f64>,
    pub conflicts_node: usize,
    pub conflicts_farkas: usize,
    pub conflicts_coef: usize,
    pub conflicts_conflict: usize,
    pub solutions_farkas: usize,
    pub solutions_coef: usize,
    pub solutions_conflict: usize,
    pub improving_farkas: usize,
    pub improving_coef: usize,
    pub improving_conflict: usize,
    pub depth_farkas: f64,
    pub depth_coef: f64,
    pub depth_conflict: f64,
    pub primal_integral: f64,
    pub dual_integral: f64,
    pub error: Option<String>,
}

impl RunRecord {
    fn failed(instance: &str, seed: u64, setting: &str, msg: String) -> Self {
        RunRecord {
            instance: instance.to_string(),
            seed,
            setting: setting.to_string(),
            status: "error".into(),
            time: 0.0,
            nodes: 0,
            objective: None,
            conflicts_node: 0,
            conflicts_farkas: 0,
            conflicts_coef: 0,
            conflicts_conflict: 0,
            solutions_farkas: 0,
            solutions_coef: 0,
            solutions_conflict: 0,
            improving_farkas: 0,
            improving_coef: 0,
            improving_conflict: 0,
            depth_farkas: 0.0,
            depth_coef: 0.0,
            depth_conflict: 0.0,
            primal_integral: 0.0,
            dual_integral: 0.0,
            error: Some(msg),
        }
    }

    pub fn solved(&self) -> bool {
        matches!(self.status.as_str(), "optimal" | "infeasible" | "unbounded")
    }

    pub fn conflicts(&self, h: HeuristicKind) -> usize {
        match h {
            HeuristicKind::Farkas => self.conflicts_farkas,
            HeuristicKind::Coef => self.conflicts_coef,
            HeuristicKind::Conflict => self.conflicts_conflict,
        }
    }

    pub fn total_conflicts(&self) -> usize {
        self.conflicts_node + HeuristicKind::ALL.iter().map(|&h| self.conflicts(h)).sum::<usize>()
    }
}

/// A named solver configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Setting {
    pub name: String,
    #[serde(flatten)]
    pub config: SolverConfig,
}

#[derive(Debug, Clone)]
pub struct BenchInstance {
    pub name: String,
    /// Load failures are reported as error records.
    pub problem: Result<Problem, String>,
}

#[derive(Debug, Clone)]
pub struct BenchOptions {
    pub seeds: Vec<u64>,
    /// Overrides the settings' own limits when given.
    pub time_limit: Option<f64>,
    pub node_limit: Option<usize>,
    pub workers: usize,
}

/// One finished run with its bound timeline in the original objective sense.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub record: RunRecord,
    pub timeline: Vec<TimelineEvent>,
}

struct Job {
    instance: usize,
    seed: u64,
    setting: usize,
}

fn run_one(inst: &BenchInstance, seed: u64, setting: &Setting, opts: &BenchOptions) -> RunOutput {
    let p = match &inst.problem {
        Ok(p) => p,
        Err(e) => {
            return RunOutput {
                record: RunRecord::failed(&inst.name, seed, &setting.name, e.clone()),
                timeline: Vec::new(),
            }
        }
    };
    let mut cfg = setting.config.clone();
    cfg.seed = seed;
    cfg.time_limit = opts.time_limit.or(cfg.time_limit);
    cfg.node_limit = opts.node_limit.or(cfg.node_limit);
    let res = match solve(p, &cfg) {
        Ok(r) => r,
        Err(e) => {
            return RunOutput {
                record: RunRecord::failed(&inst.name, seed, &setting.name, e.to_string()),
                timeline: Vec::new(),
            }
        }
    };
    let h = |k: HeuristicKind| res.stats.heuristics.get(&k).copied().unwrap_or_default();
    let (f, k, c) = (h(HeuristicKind::Farkas), h(HeuristicKind::Coef), h(HeuristicKind::Conflict));
    let ext = |v: f64| if v.is_finite() { p.external_objective(v) } else if p.is_maximize() { -v } else { v };
    let timeline = res
        .stats
        .timeline
        .iter()
        .map(|e| TimelineEvent {
            time: e.time,
            primal: e.primal.map(ext),
            dual: ext(e.dual),
        })
        .collect();
    RunOutput {
        record: RunRecord {
            instance: inst.name.clone(),
            seed,
            setting: setting.name.clone(),
            status: res.status.to_string(),
            time: res.stats.time,
            nodes: res.stats.nodes,
            objective: res.objective().map(|v| p.external_objective(v)),
            conflicts_node: res.stats.node_conflicts,
            conflicts_farkas: f.conflicts,
            conflicts_coef: k.conflicts,
            conflicts_conflict: c.conflicts,
            solutions_farkas: f.solutions,
            solutions_coef: k.solutions,
            solutions_conflict: c.solutions,
            improving_farkas: f.improving,
            improving_coef: k.improving,
            improving_conflict: c.improving,
            depth_farkas: f.avg_depth(),
            depth_coef: k.avg_depth(),
            depth_conflict: c.avg_depth(),
            primal_integral: 0.0,
            dual_integral: 0.0,
            error: None,
        },
        timeline,
    }
}

/// Fills in the integrals of all runs on one instance. The reference is the best objective any
/// run found; the horizon is the time limit, or the longest run of the same seed without one.
fn finish_instance(runs: &mut [RunOutput], maximize: bool, time_limit: Option<f64>) {
    let objs = runs.iter().filter_map(|r| r.record.objective);
    let reference = if maximize {
        objs.fold(None, |a: Option<f64>, v| Some(a.map_or(v, |a| a.max(v))))
    } else {
        objs.fold(None, |a: Option<f64>, v| Some(a.map_or(v, |a| a.min(v))))
    };
    let mut longest: HashMap<u64, f64> = HashMap::new();
    for r in runs.iter() {
        let e = longest.entry(r.record.seed).or_insert(0.0);
        *e = e.max(r.record.time);
    }
    for r in runs.iter_mut() {
        let horizon = time_limit.unwrap_or(longest[&r.record.seed]).max(r.record.time);
        let primal: Vec<(f64, f64)> = r
            .timeline
            .iter()
            .filter_map(|e| e.primal.map(|v| (e.time, v)))
            .collect();
        let dual: Vec<(f64, f64)> = r.timeline.iter().map(|e| (e.time, e.dual)).collect();
        r.record.primal_integral = primal_integral(&primal, horizon, reference);
        r.record.dual_integral = dual_integral(&dual, horizon, reference);
    }
}

/// Runs every (instance, seed, setting) combination on a pool of `workers` threads. Runs are
/// handed to `sink` from the calling thread, grouped per instance once all of its runs are done.
pub fn run_benchmark(
    instances: &[BenchInstance],
    settings: &[Setting],
    opts: &BenchOptions,
    mut sink: impl FnMut(&RunOutput),
) -> Vec<RunRecord> {
    let mut jobs = Vec::new();
    for i in 0..instances.len() {
        for &seed in &opts.seeds {
            for s in 0..settings.len() {
                jobs.push(Job {
                    instance: i,
                    seed,
                    setting: s,
                });
            }
        }
    }
    let per_instance = opts.seeds.len() * settings.len();
    let mut done: Vec<Vec<(usize, RunOutput)>> = (0..instances.len()).map(|_| Vec::new()).collect();
    let mut records = Vec::with_capacity(jobs.len());
    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel();
    std::thread::scope(|scope| {
        for _ in 0..opts.workers.max(1) {
            let tx = tx.clone();
            let (jobs, next) = (&jobs, &next);
            scope.spawn(move || loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                let Some(job) = jobs.get(k) else { break };
                let out = run_one(&instances[job.instance], job.seed, &settings[job.setting], opts);
                if tx.send((k, out)).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        for (k, out) in rx {
            let i = jobs[k].instance;
            done[i].push((k, out));
            if done[i].len() == per_instance {
                let mut runs = std::mem::take(&mut done[i]);
                runs.sort_by_key(|r| r.0);
                let mut outs: Vec<RunOutput> = runs.into_iter().map(|r| r.1).collect();
                let maximize = instances[i].problem.as_ref().is_ok_and(|p| p.is_maximize());
                finish_instance(&mut outs, maximize, opts.time_limit);
                for o in &outs {
                    sink(o);
                    records.push(o.record.clone());
                }
            }
        }
    });
    records
}

pub fn write_csv<W: Write>(out: W, records: &[RunRecord]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: std::io::Read>(input: R) -> Result<Vec<RunRecord>, csv::Error> {
    csv::Reader::from_reader(input).deserialize().collect()
}

type Cell = (String, u64);

fn grid(records: &[RunRecord]) -> BTreeMap<String, BTreeMap<Cell, &RunRecord>> {
    let mut g: BTreeMap<String, BTreeMap<Cell, &RunRecord>> = BTreeMap::new();
    for r in records {
        g.entry(r.setting.clone())
            .or_default()
            .insert((r.instance.clone(), r.seed), r);
    }
    g
}

fn check_grid(g: &BTreeMap<String, BTreeMap<Cell, &RunRecord>>) -> Result<BTreeSet<Cell>, MetricError> {
    let mut cells: Option<BTreeSet<Cell>> = None;
    for (s, m) in g {
        let keys: BTreeSet<Cell> = m.keys().cloned().collect();
        match &cells {
            None => cells = Some(keys),
            Some(c) if *c != keys => return Err(MetricError::GridMismatch { setting: s.clone() }),
            _ => {}
        }
    }
    cells.ok_or(MetricError::Empty)
}

/// Fraction of instance/seed cells on which each setting is within a factor `tau` of the fastest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerformanceProfile {
    pub taus: Vec<f64>,
    pub curves: BTreeMap<String, Vec<f64>>,
}

const TIME_FLOOR: f64 = 1e-6;

pub fn performance_profile(records: &[RunRecord]) -> Result<PerformanceProfile, MetricError> {
    let g = grid(records);
    let cells = check_grid(&g)?;
    let mut ratios: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for cell in &cells {
        let best = g
            .values()
            .map(|m| m[cell])
            .filter(|r| r.solved())
            .map(|r| r.time.max(TIME_FLOOR))
            .fold(f64::INFINITY, f64::min);
        for (s, m) in &g {
            let r = m[cell];
            let ratio = if r.solved() { r.time.max(TIME_FLOOR) / best } else { f64::INFINITY };
            ratios.entry(s.as_str()).or_default().push(ratio);
        }
    }
    let mut taus: Vec<f64> = ratios
        .values()
        .flatten()
        .copied()
        .filter(|r| r.is_finite())
        .collect();
    taus.push(1.0);
    taus.sort_by(f64::total_cmp);
    taus.dedup();
    let n = cells.len() as f64;
    let curves = ratios
        .into_iter()
        .map(|(s, rs)| {
            let c = taus
                .iter()
                .map(|&t| rs.iter().filter(|&&r| r <= t).count() as f64 / n)
                .collect();
            (s.to_string(), c)
        })
        .collect();
    Ok(PerformanceProfile { taus, curves })
}

/// Aggregate of one setting over a group of instance/seed cells.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub group: String,
    pub setting: String,
    pub cells: usize,
    pub solved: usize,
    pub time: f64,
    pub nodes: f64,
    /// Ratio to the first setting's shifted geometric mean.
    pub time_quotient: f64,
    pub nodes_quotient: f64,
    pub conflicts: usize,
}

/// Cells whose node counts differ between settings.
pub fn affected_cells(records: &[RunRecord]) -> Result<BTreeSet<(String, u64)>, MetricError> {
    let g = grid(records);
    let cells = check_grid(&g)?;
    Ok(cells
        .into_iter()
        .filter(|c| {
            let nodes: BTreeSet<usize> = g.values().map(|m| m[c].nodes).collect();
            nodes.len() > 1
        })
        .collect())
}

/// Cells solved by some setting on which every setting took at least `k` seconds.
pub fn bracket_cells(records: &[RunRecord], k: f64) -> Result<BTreeSet<(String, u64)>, MetricError> {
    let g = grid(records);
    let cells = check_grid(&g)?;
    Ok(cells
        .into_iter()
        .filter(|c| {
            let rs: Vec<&RunRecord> = g.values().map(|m| m[c]).collect();
            rs.iter().any(|r| r.solved()) && rs.iter().all(|r| r.time >= k)
        })
        .collect())
}

/// Tables over all cells, the affected cells and the `[k, tilim]` brackets for
/// `k` in 10, 100, 1000 seconds divided by `divisor`. `order` lists settings with the baseline first.
pub fn summarize(records: &[RunRecord], order: &[String], divisor: f64) -> Result<Vec<Summary>, MetricError> {
    let g = grid(records);
    let all = check_grid(&g)?;
    let mut groups = vec![("all".to_string(), all), ("affected".to_string(), affected_cells(records)?)];
    for k in [10.0, 100.0, 1000.0] {
        let k = k / divisor;
        groups.push((format!("[{k},tilim]"), bracket_cells(records, k)?));
    }
    let mut out = Vec::new();
    for (name, cells) in groups {
        let mut base: Option<(f64, f64)> = None;
        for s in order {
            let Some(m) = g.get(s) else { continue };
            let rs: Vec<&RunRecord> = cells.iter().map(|c| m[c]).collect();
            let (time, nodes) = if rs.is_empty() {
                (f64::NAN, f64::NAN)
            } else {
                let t: Vec<f64> = rs.iter().map(|r| r.time).collect();
                let n: Vec<f64> = rs.iter().map(|r| r.nodes as f64).collect();
                (shifted_geomean(&t, 1.0)?, shifted_geomean(&n, 100.0)?)
            };
            let (bt, bn) = *base.get_or_insert((time, nodes));
            out.push(Summary {
                group: name.clone(),
                setting: s.clone(),
                cells: rs.len(),
                solved: rs.iter().filter(|r| r.solved()).count(),
                time,
                nodes,
                time_quotient: time / bt,
                nodes_quotient: nodes / bn,
                conflicts: rs.iter().map(|r| r.total_conflicts()).sum(),
            });
        }
    }
    Ok(out)
}
