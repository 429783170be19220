//! Monte Carlo sweeps over one configuration axis, with paired seeds across
//! solvers and sweep points.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::asm::{self, AsmMode, AsmOptions, SolverReport};
use crate::error::{Error, Result};
use crate::network::{generate, NetworkConfig, NetworkInstance};
use crate::polyblock::{global_optimum, GlobalOptions, POWER_COORD_CAP};
use crate::rates::{Gains, RateModel};
use crate::robust::solve_robust;

pub const DETAIL_FILE: &str = "detail.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const TRACE_FILE: &str = "trace.csv";

/// z value of a two-sided 95% normal interval.
const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Axis {
    N,
    E,
    F,
    #[serde(rename = "epsilon")]
    Epsilon,
    /// Power mode of the `asm` solver: 0 joint, 1 uniform.
    #[serde(rename = "mode")]
    Mode,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::N => "N",
            Axis::E => "E",
            Axis::F => "F",
            Axis::Epsilon => "epsilon",
            Axis::Mode => "mode",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    Asm,
    AsmBaselineSic,
    Robust,
    Uniform,
    Polyblock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub network: NetworkConfig,
    pub axis: Axis,
    pub values: Vec<f64>,
    pub trials: usize,
    pub solvers: Vec<SolverKind>,
    pub output_dir: PathBuf,
    /// Uncertainty levels of the robust solver. Empty means the network's
    /// own `epsilon`.
    #[serde(default)]
    pub robust_epsilon: Vec<f64>,
    /// Seed of trial 0; defaults to the network seed.
    #[serde(default)]
    pub base_seed: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[serde(default)]
    pub workers: usize,
    /// Record wall-clock times. Off by default so that detail files are
    /// byte-for-byte reproducible.
    #[serde(default)]
    pub timing: bool,
    /// Trial whose convergence traces are written.
    #[serde(default)]
    pub trace_trial: usize,
    #[serde(default)]
    pub asm: AsmOptions,
    #[serde(default)]
    pub global: GlobalOptions,
}

impl ExperimentSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: Self = toml::from_str(text).map_err(|e| Error::schema("experiment", e.message()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn seed(&self, trial: usize) -> u64 {
        self.base_seed.unwrap_or(self.network.seed) + trial as u64
    }

    /// Network configuration at one sweep point, before the trial seed.
    pub fn config_at(&self, value: f64) -> Result<NetworkConfig> {
        let mut c = self.network.clone();
        let count = || -> Result<usize> {
            if value < 0.0 || value.fract() != 0.0 {
                return Err(Error::Config(format!(
                    "axis {} needs whole values, got {value}",
                    self.axis.name()
                )));
            }
            Ok(value as usize)
        };
        match self.axis {
            Axis::N => c.subcarriers = count()?,
            Axis::E => c.eavesdroppers = count()?,
            Axis::F => {
                let f = count()?;
                let users = *c.users_per_bs.last().unwrap_or(&1);
                let power = *c.p_max.last().unwrap_or(&1.0);
                c.users_per_bs.resize(f, users);
                c.p_max.resize(f, power);
                c.bs_count = f;
            }
            Axis::Epsilon => c.epsilon = value,
            Axis::Mode => {
                if value != 0.0 && value != 1.0 {
                    return Err(Error::Config(format!("mode values are 0 (joint) or 1 (uniform), got {value}")));
                }
            }
        }
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.values.is_empty() {
            return Err(Error::Config("the sweep needs at least one value".into()));
        }
        if self.solvers.is_empty() {
            return Err(Error::Config("no solver selected".into()));
        }
        if self.robust_epsilon.iter().any(|&e| !(e >= 0.0)) {
            return Err(Error::Config("robust epsilon values must be non-negative".into()));
        }
        self.asm.validate()?;
        for &v in &self.values {
            let c = self.config_at(v)?;
            c.validate()?;
            if self.solvers.contains(&SolverKind::Polyblock) {
                if c.ell != 2 {
                    return Err(Error::Config("the polyblock solver needs ell = 2".into()));
                }
                if c.coordinate_count() > POWER_COORD_CAP {
                    return Err(Error::Config(format!(
                        "the polyblock solver is capped at {POWER_COORD_CAP} power coordinates, {} = {v} gives {}",
                        self.axis.name(),
                        c.coordinate_count()
                    )));
                }
            }
        }
        Ok(())
    }
}

/// One solver run on one trial instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetailRow {
    pub axis: String,
    pub value: f64,
    pub trial: usize,
    pub seed: u64,
    pub solver: String,
    pub status: String,
    pub objective_bps_hz: Option<f64>,
    pub iterations: Option<usize>,
    pub residual: Option<f64>,
    pub gap: Option<f64>,
    pub wall_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub axis: String,
    pub value: f64,
    pub solver: String,
    pub trials: usize,
    pub ok: usize,
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub ci95_low: Option<f64>,
    pub ci95_high: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub axis: String,
    pub value: f64,
    pub solver: String,
    pub trial: usize,
    pub iteration: usize,
    pub objective_bps_hz: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub detail: Vec<DetailRow>,
    pub summary: Vec<SummaryRow>,
    pub trace: Vec<TraceRow>,
    pub detail_path: PathBuf,
    pub summary_path: PathBuf,
    pub trace_path: PathBuf,
}

/// What a solver hands back to the table writer.
struct Outcome {
    objective: f64,
    iterations: usize,
    residual: f64,
    gap: Option<f64>,
    trace: Vec<f64>,
}

fn from_report(r: &SolverReport) -> Outcome {
    Outcome {
        objective: r.objective,
        iterations: r.iterations,
        residual: r.residuals.max(),
        gap: None,
        trace: r.objective_trace.clone(),
    }
}

/// Solver runs of one sweep point, labelled as they appear in the tables.
fn runs(spec: &ExperimentSpec, config: &NetworkConfig) -> Vec<(String, SolverKind, f64)> {
    let mut out = Vec::new();
    for &s in &spec.solvers {
        match s {
            SolverKind::Robust if !spec.robust_epsilon.is_empty() => {
                for &e in &spec.robust_epsilon {
                    out.push((format!("robust_eps_{e}"), s, e));
                }
            }
            SolverKind::Robust => out.push(("robust".into(), s, config.epsilon)),
            SolverKind::Asm => out.push(("asm".into(), s, 0.0)),
            SolverKind::AsmBaselineSic => out.push(("asm_baseline_sic".into(), s, 0.0)),
            SolverKind::Uniform => out.push(("uniform".into(), s, 0.0)),
            SolverKind::Polyblock => out.push(("polyblock".into(), s, 0.0)),
        }
    }
    out
}

fn solve_one(
    spec: &ExperimentSpec,
    value: f64,
    config: &NetworkConfig,
    inst: &NetworkInstance,
    kind: SolverKind,
    epsilon: f64,
) -> Result<Outcome> {
    let mut options = spec.asm;
    options.budget.seed = config.seed;
    match kind {
        SolverKind::Asm => {
            if spec.axis == Axis::Mode && value == 1.0 {
                options.mode = AsmMode::UniformPower;
            }
            asm::run(inst, &options, Gains::True).map(|r| from_report(&r))
        }
        SolverKind::Uniform => {
            options.mode = AsmMode::UniformPower;
            asm::run(inst, &options, Gains::True).map(|r| from_report(&r))
        }
        SolverKind::AsmBaselineSic => asm::run_baseline_sic_eve(inst, &options).map(|r| from_report(&r)),
        SolverKind::Robust => {
            let shifted;
            let target = if epsilon == config.epsilon {
                inst
            } else {
                shifted = generate(&NetworkConfig {
                    epsilon,
                    ..config.clone()
                })?;
                &shifted
            };
            solve_robust(target, &options).map(|r| from_report(&r.report))
        }
        SolverKind::Polyblock => {
            let g = global_optimum(inst, &spec.global)?;
            let model = RateModel::new(inst, Gains::True);
            Ok(Outcome {
                objective: model.sum_secrecy(&g.power, &g.assignment),
                iterations: g.iterations,
                residual: model.residuals(&g.power, &g.assignment, true).max(),
                gap: Some(g.gap),
                trace: Vec::new(),
            })
        }
    }
}

fn trial_rows(spec: &ExperimentSpec, value: f64, trial: usize) -> Result<(Vec<DetailRow>, Vec<TraceRow>)> {
    let mut config = spec.config_at(value)?;
    config.seed = spec.seed(trial);
    let inst = generate(&config)?;
    let axis = spec.axis.name().to_string();
    let mut detail = Vec::new();
    let mut trace = Vec::new();
    for (label, kind, epsilon) in runs(spec, &config) {
        let start = Instant::now();
        let result = solve_one(spec, value, &config, &inst, kind, epsilon);
        let wall_ms = spec.timing.then(|| start.elapsed().as_secs_f64() * 1e3);
        let row = match result {
            Ok(out) => {
                if trial == spec.trace_trial {
                    trace.extend(out.trace.iter().enumerate().map(|(i, &v)| TraceRow {
                        axis: axis.clone(),
                        value,
                        solver: label.clone(),
                        trial,
                        iteration: i,
                        objective_bps_hz: v,
                    }));
                }
                DetailRow {
                    axis: axis.clone(),
                    value,
                    trial,
                    seed: config.seed,
                    solver: label,
                    status: "ok".into(),
                    objective_bps_hz: Some(out.objective),
                    iterations: Some(out.iterations),
                    residual: Some(out.residual),
                    gap: out.gap,
                    wall_ms,
                }
            }
            Err(e) => DetailRow {
                axis: axis.clone(),
                value,
                trial,
                seed: config.seed,
                solver: label,
                status: e.kind().into(),
                objective_bps_hz: None,
                iterations: None,
                residual: None,
                gap: None,
                wall_ms,
            },
        };
        detail.push(row);
    }
    Ok((detail, trace))
}

/// Sample mean with a 95% normal-approximation interval.
pub fn mean_ci(samples: &[f64]) -> Option<(f64, f64, f64, f64)> {
    if samples.is_empty() {
        return None;
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let std = if samples.len() > 1 {
        (samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let half = Z95 * std / n.sqrt();
    Some((mean, std, mean - half, mean + half))
}

pub fn summarize(detail: &[DetailRow]) -> Vec<SummaryRow> {
    let mut groups: Vec<((String, f64, String), Vec<&DetailRow>)> = Vec::new();
    for row in detail {
        let key = (row.axis.clone(), row.value, row.solver.clone());
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, rows)) => rows.push(row),
            None => groups.push((key, vec![row])),
        }
    }
    groups
        .into_iter()
        .map(|((axis, value, solver), rows)| {
            let ok: Vec<f64> = rows.iter().filter_map(|r| r.objective_bps_hz).collect();
            let stats = mean_ci(&ok);
            SummaryRow {
                axis,
                value,
                solver,
                trials: rows.len(),
                ok: ok.len(),
                mean: stats.map(|s| s.0),
                std: stats.map(|s| s.1),
                ci95_low: stats.map(|s| s.2),
                ci95_high: stats.map(|s| s.3),
            }
        })
        .collect()
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T], header: &[&str]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub const DETAIL_HEADER: [&str; 11] = [
    "axis",
    "value",
    "trial",
    "seed",
    "solver",
    "status",
    "objective_bps_hz",
    "iterations",
    "residual",
    "gap",
    "wall_ms",
];

const SUMMARY_HEADER: [&str; 9] = ["axis", "value", "solver", "trials", "ok", "mean", "std", "ci95_low", "ci95_high"];
const TRACE_HEADER: [&str; 6] = ["axis", "value", "solver", "trial", "iteration", "objective_bps_hz"];

/// Runs every (sweep value, trial, solver) combination and writes the
/// detail, summary and trace tables. Solver failures become rows with a
/// non-`ok` status.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    spec.validate()?;
    std::fs::create_dir_all(&spec.output_dir).map_err(|e| Error::io(&spec.output_dir, e))?;
    let jobs: Vec<(f64, usize)> = spec
        .values
        .iter()
        .flat_map(|&v| (0..spec.trials).map(move |t| (v, t)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.workers)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let results: Vec<Result<(Vec<DetailRow>, Vec<TraceRow>)>> =
        pool.install(|| jobs.par_iter().map(|&(v, t)| trial_rows(spec, v, t)).collect());
    let mut detail = Vec::new();
    let mut trace = Vec::new();
    for r in results {
        let (d, t) = r?;
        detail.extend(d);
        trace.extend(t);
    }
    let summary = summarize(&detail);
    let dir = &spec.output_dir;
    let (detail_path, summary_path, trace_path) = (dir.join(DETAIL_FILE), dir.join(SUMMARY_FILE), dir.join(TRACE_FILE));
    write_csv(&detail_path, &detail, &DETAIL_HEADER)?;
    write_csv(&summary_path, &summary, &SUMMARY_HEADER)?;
    write_csv(&trace_path, &trace, &TRACE_HEADER)?;
    Ok(ExperimentResult {
        detail,
        summary,
        trace,
        detail_path,
        summary_path,
        trace_path,
    })
}

pub fn read_detail(path: impl AsRef<Path>) -> Result<Vec<DetailRow>> {
    let file = std::fs::File::open(path.as_ref()).map_err(|e| Error::io(path.as_ref(), e))?;
    let mut r = csv::Reader::from_reader(file);
    let rows = r.deserialize().collect::<std::result::Result<Vec<DetailRow>, _>>()?;
    Ok(rows)
}

/// Paired t statistic of `a - b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairedT {
    pub n: usize,
    pub mean_diff: f64,
    pub t: f64,
    /// One-sided p-value for `mean(a - b) > 0`.
    pub p_greater: f64,
    pub p_two_sided: f64,
}

pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<PairedT> {
    if a.len() != b.len() {
        return Err(Error::Alignment(format!("{} against {} samples", a.len(), b.len())));
    }
    if a.len() < 2 {
        return Err(Error::Precondition("a paired t-test needs at least two pairs".into()));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let (mean, std, _, _) = mean_ci(&d).expect("non-empty");
    let n = d.len();
    let t = if std > 0.0 {
        mean / (std / (n as f64).sqrt())
    } else if mean == 0.0 {
        0.0
    } else {
        mean.signum() * f64::INFINITY
    };
    let dist = StudentsT::new(0.0, 1.0, (n - 1) as f64).expect("positive degrees of freedom");
    let p_greater = if t.is_infinite() {
        if t > 0.0 { 0.0 } else { 1.0 }
    } else {
        1.0 - dist.cdf(t)
    };
    let p_two_sided = if t.is_infinite() { 0.0 } else { 2.0 * (1.0 - dist.cdf(t.abs())) };
    Ok(PairedT {
        n,
        mean_diff: mean,
        t,
        p_greater,
        p_two_sided,
    })
}

/// Relative gap `(a - b) / a` between two solvers at one sweep point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    pub axis: String,
    pub value: f64,
    pub solver_a: String,
    pub solver_b: String,
    pub pairs: usize,
    /// Pairs left out because `a` is zero while `b` is not.
    pub excluded: usize,
    pub mean_gap: Option<f64>,
    pub ci95_low: Option<f64>,
    pub ci95_high: Option<f64>,
    pub mean_a: f64,
    pub mean_b: f64,
    pub t_stat: Option<f64>,
    pub p_value: Option<f64>,
}

pub const GAP_HEADER: [&str; 13] = [
    "axis",
    "value",
    "solver_a",
    "solver_b",
    "pairs",
    "excluded",
    "mean_gap",
    "ci95_low",
    "ci95_high",
    "mean_a",
    "mean_b",
    "t_stat",
    "p_value",
];

/// Pairs the `ok` rows of two solvers across detail files by sweep point
/// and trial.
pub fn compare(paths: &[PathBuf], solver_a: &str, solver_b: &str) -> Result<Vec<GapRow>> {
    let mut rows = Vec::new();
    for p in paths {
        rows.extend(read_detail(p)?);
    }
    compare_rows(&rows, solver_a, solver_b)
}

pub fn compare_rows(rows: &[DetailRow], solver_a: &str, solver_b: &str) -> Result<Vec<GapRow>> {
    type Key = (String, u64, usize);
    let mut seeds: BTreeMap<Key, u64> = BTreeMap::new();
    let mut side: [BTreeMap<Key, f64>; 2] = [BTreeMap::new(), BTreeMap::new()];
    for r in rows {
        let key = (r.axis.clone(), r.value.to_bits(), r.trial);
        if let Some(&s) = seeds.get(&key) {
            if s != r.seed {
                return Err(Error::Alignment(format!(
                    "{} = {} trial {} has seeds {s} and {}",
                    r.axis, r.value, r.trial, r.seed
                )));
            }
        } else {
            seeds.insert(key.clone(), r.seed);
        }
        if let (true, Some(v)) = (r.status == "ok", r.objective_bps_hz) {
            for (slot, name) in [solver_a, solver_b].into_iter().enumerate() {
                if r.solver == name {
                    side[slot].insert(key.clone(), v);
                }
            }
        }
    }
    if side[0].is_empty() || side[1].is_empty() {
        return Err(Error::Alignment(format!("no successful rows for `{solver_a}` or `{solver_b}`")));
    }
    let keys_a: Vec<&Key> = side[0].keys().collect();
    let keys_b: Vec<&Key> = side[1].keys().collect();
    if keys_a != keys_b {
        return Err(Error::Alignment(format!(
            "`{solver_a}` and `{solver_b}` cover different trials"
        )));
    }
    let mut points: BTreeMap<(String, u64), Vec<(f64, f64)>> = BTreeMap::new();
    for (key, &a) in &side[0] {
        let b = side[1][key];
        points.entry((key.0.clone(), key.1)).or_default().push((a, b));
    }
    let mut out: Vec<GapRow> = points
        .into_iter()
        .map(|((axis, bits), pairs)| {
            let mut gaps = Vec::new();
            let mut excluded = 0;
            for &(a, b) in &pairs {
                if a.abs() > 1e-12 {
                    gaps.push((a - b) / a);
                } else if b.abs() <= 1e-12 {
                    gaps.push(0.0);
                } else {
                    excluded += 1;
                }
            }
            let stats = mean_ci(&gaps);
            let (a, b): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
            let t = paired_t_test(&a, &b).ok();
            GapRow {
                axis,
                value: f64::from_bits(bits),
                solver_a: solver_a.into(),
                solver_b: solver_b.into(),
                pairs: pairs.len(),
                excluded,
                mean_gap: stats.map(|s| s.0),
                ci95_low: stats.map(|s| s.2),
                ci95_high: stats.map(|s| s.3),
                mean_a: a.iter().sum::<f64>() / a.len() as f64,
                mean_b: b.iter().sum::<f64>() / b.len() as f64,
                t_stat: t.map(|t| t.t),
                p_value: t.map(|t| t.p_two_sided),
            }
        })
        .collect();
    out.sort_by(|x, y| x.value.total_cmp(&y.value));
    Ok(out)
}

pub fn write_gaps(path: &Path, rows: &[GapRow]) -> Result<()> {
    write_csv(path, rows, &GAP_HEADER)
}

/// The gap table as CSV text.
pub fn gaps_to_csv(rows: &[GapRow]) -> Result<String> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(GAP_HEADER)?;
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_spec(dir: &Path) -> ExperimentSpec {
        ExperimentSpec {
            network: NetworkConfig::default(),
            axis: Axis::N,
            values: vec![1.0, 2.0],
            trials: 2,
            solvers: vec![SolverKind::Asm, SolverKind::Uniform],
            output_dir: dir.to_path_buf(),
            robust_epsilon: vec![],
            base_seed: Some(40),
            workers: 2,
            timing: false,
            trace_trial: 0,
            asm: AsmOptions::default(),
            global: GlobalOptions::default(),
        }
    }

    #[test]
    fn mean_ci_of_known_sample() {
        let (mean, std, lo, hi) = mean_ci(&[2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]).unwrap();
        assert!((mean - 5.0).abs() < 1e-12);
        let s = (32.0f64 / 7.0).sqrt();
        assert!((std - s).abs() < 1e-12);
        assert!((hi - lo - 2.0 * 1.959963984540054 * s / 8f64.sqrt()).abs() < 1e-12);
        assert_eq!(mean_ci(&[3.0]), Some((3.0, 0.0, 3.0, 3.0)));
        assert!(mean_ci(&[]).is_none());
    }

    #[test]
    fn paired_t_matches_hand_computation() {
        // Differences 1, 2, 3, 4: mean 2.5, sd sqrt(5/3), t = 2.5 / (sd / 2).
        let t = paired_t_test(&[2.0, 4.0, 6.0, 8.0], &[1.0, 2.0, 3.0, 4.0]).unwrap();
        let expected = 2.5 / ((5.0f64 / 3.0).sqrt() / 2.0);
        assert!((t.t - expected).abs() < 1e-12);
        // Two-sided tail of t = 3.873 with 3 degrees of freedom.
        assert!((t.p_two_sided - 0.030466).abs() < 1e-4, "{}", t.p_two_sided);
        assert!((t.p_greater - t.p_two_sided / 2.0).abs() < 1e-12);
        assert!(matches!(paired_t_test(&[1.0], &[1.0]), Err(Error::Precondition(_))));
        assert!(matches!(paired_t_test(&[1.0, 2.0], &[1.0]), Err(Error::Alignment(_))));
        let flat = paired_t_test(&[2.0, 3.0], &[1.0, 2.0]).unwrap();
        assert_eq!(flat.p_greater, 0.0);
    }

    #[test]
    fn axis_values_reach_the_config() {
        let dir = tempfile::tempdir().unwrap();
        let mut spec = small_spec(dir.path());
        assert_eq!(spec.config_at(5.0).unwrap().subcarriers, 5);
        assert!(spec.config_at(1.5).is_err());
        spec.axis = Axis::F;
        let c = spec.config_at(4.0).unwrap();
        assert_eq!((c.bs_count, c.users_per_bs.len(), c.p_max.len()), (4, 4, 4));
        spec.axis = Axis::Epsilon;
        assert_eq!(spec.config_at(0.25).unwrap().epsilon, 0.25);
        spec.axis = Axis::Mode;
        assert!(spec.config_at(2.0).is_err());
    }

    #[test]
    fn validation_rejects_bad_specs() {
        let dir = tempfile::tempdir().unwrap();
        let mut spec = small_spec(dir.path());
        spec.trials = 0;
        assert!(matches!(spec.validate(), Err(Error::Config(_))));
        let mut spec = small_spec(dir.path());
        spec.solvers.push(SolverKind::Polyblock);
        spec.values = vec![6.0];
        assert!(matches!(spec.validate(), Err(Error::Config(_))));
        spec.values = vec![2.0];
        spec.validate().unwrap();
    }

    #[test]
    fn toml_spec_round_trip() {
        let text = r#"
            axis = "N"
            values = [1, 2]
            trials = 3
            solvers = ["asm", "robust"]
            output_dir = "out"
            robust_epsilon = [0.0, 0.1]
            [network]
            E = 1
        "#;
        let spec = ExperimentSpec::from_toml(text).unwrap();
        assert_eq!(spec.network.eavesdroppers, 1);
        assert_eq!(spec.seed(2), spec.network.seed + 2);
        assert!(ExperimentSpec::from_toml("axis = \"Q\"").is_err());
    }

    #[test]
    fn runs_are_reproducible_and_paired() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let first = run_experiment(&small_spec(a.path())).unwrap();
        let mut other = small_spec(b.path());
        other.workers = 1;
        let second = run_experiment(&other).unwrap();
        assert_eq!(first.detail.len(), 2 * 2 * 2);
        assert_eq!(
            std::fs::read(&first.detail_path).unwrap(),
            std::fs::read(&second.detail_path).unwrap()
        );
        let text = std::fs::read_to_string(&first.detail_path).unwrap();
        assert_eq!(text.lines().next().unwrap(), DETAIL_HEADER.join(","));
        for pair in first.detail.chunks(2) {
            assert_eq!(pair[0].seed, pair[1].seed);
        }
        assert_eq!(read_detail(&first.detail_path).unwrap(), first.detail);
        assert_eq!(first.summary.len(), 4);
        assert!(first.trace.iter().all(|t| t.trial == 0));

        let gaps = compare(&[first.detail_path.clone()], "asm", "uniform").unwrap();
        assert_eq!(gaps.len(), 2);
        assert!(gaps.iter().all(|g| g.pairs == 2));
    }

    #[test]
    fn compare_rejects_misaligned_rows() {
        let row = |solver: &str, trial, seed| DetailRow {
            axis: "N".into(),
            value: 1.0,
            trial,
            seed,
            solver: solver.into(),
            status: "ok".into(),
            objective_bps_hz: Some(1.0),
            iterations: Some(1),
            residual: Some(0.0),
            gap: None,
            wall_ms: None,
        };
        let seeds = vec![row("a", 0, 1), row("b", 0, 2)];
        assert!(matches!(compare_rows(&seeds, "a", "b"), Err(Error::Alignment(_))));
        let missing = vec![row("a", 0, 1), row("a", 1, 2), row("b", 0, 1)];
        assert!(matches!(compare_rows(&missing, "a", "b"), Err(Error::Alignment(_))));
        let good = vec![row("a", 0, 1), row("b", 0, 1)];
        let gaps = compare_rows(&good, "a", "b").unwrap();
        assert_eq!(gaps[0].mean_gap, Some(0.0));
    }
}
