//! Experiment harness: builds targets and records, runs reconstructions in a
//! small worker pool and writes the row, best-iterate and summary CSV files.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use mpsvt_core::measure::{add_gaussian_noise, measure_all};
use mpsvt_core::pauli::enumerate_window_strings;
use mpsvt_core::svt::{initialize, reconstruct, svt_step, BackendKind};
use mpsvt_core::targets::{make_target, TargetKind, TargetSpec};
use mpsvt_core::{MeasurementRecord, State, SvtConfig, SvtResult};

use crate::error::{CliError, CliResult};

pub const ROW_COLUMNS: [&str; 13] = [
    "experiment",
    "N",
    "w",
    "instance",
    "realization",
    "iter",
    "x_n",
    "y_n",
    "fidelity",
    "delta0",
    "chi_max",
    "seed",
    "elapsed_ms",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExperimentKind {
    Ising,
    Random,
    WState,
    Custom,
    Oracle,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Ising => "ising",
            ExperimentKind::Random => "random",
            ExperimentKind::WState => "wstate",
            ExperimentKind::Custom => "custom",
            ExperimentKind::Oracle => "oracle",
        }
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub sizes: Vec<usize>,
    pub width: usize,
    pub instances: usize,
    pub realizations: usize,
    /// Noise level; `None` picks 0.005 for even and 0.01 for odd `N` on W
    /// states and no noise otherwise.
    pub noise: Option<f64>,
    pub config: SvtConfig,
    pub seed: u64,
    pub out: PathBuf,
    /// Record file for `Custom`.
    pub record: Option<PathBuf>,
    /// Optional MPS file holding the true state of a `Custom` record.
    pub target: Option<PathBuf>,
    pub workers: usize,
}

impl ExperimentSpec {
    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: &str| Err(CliError::Spec(m.to_string()));
        if self.kind == ExperimentKind::Custom {
            if self.record.is_none() {
                return bad("a custom reconstruction needs a record file");
            }
        } else if self.sizes.is_empty() {
            return bad("empty range of chain lengths");
        }
        if self.sizes.iter().any(|&n| n < 2) {
            return bad("chain lengths must be at least 2");
        }
        if self.width == 0 || self.sizes.iter().any(|&n| self.width > n) {
            return bad("window width must lie between 1 and N");
        }
        if self.instances == 0 || self.realizations == 0 {
            return bad("instances and realizations must be at least 1");
        }
        if let Some(s) = self.noise {
            if !(s >= 0.0 && s.is_finite()) {
                return bad("noise level must be finite and non-negative");
            }
        }
        self.config.validate()?;
        Ok(())
    }

    fn noise_for(&self, n: usize) -> f64 {
        match (self.noise, self.kind) {
            (Some(s), _) => s,
            (None, ExperimentKind::WState) if n % 2 == 0 => 0.005,
            (None, ExperimentKind::WState) => 0.01,
            (None, _) => 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub experiment: String,
    pub n: usize,
    pub w: usize,
    pub instance: usize,
    pub realization: usize,
    pub iter: usize,
    pub x: f64,
    pub y: f64,
    pub fidelity: Option<f64>,
    pub delta0: f64,
    pub chi_max: usize,
    pub seed: u64,
    pub elapsed_ms: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BestRow {
    pub experiment: String,
    pub n: usize,
    pub w: usize,
    pub instance: usize,
    pub realization: usize,
    pub best_iter: usize,
    pub best_x: f64,
    pub best_fidelity: Option<f64>,
    pub noise_sigma: f64,
    pub seed: u64,
    pub elapsed_ms: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub experiment: String,
    pub n: usize,
    pub runs: usize,
    /// Iteration of the rows aggregated in the `final_*` columns.
    pub iter: usize,
    pub final_mean_f: Option<f64>,
    pub final_median_f: Option<f64>,
    pub final_mean_sqrt_1mf: Option<f64>,
    pub final_median_sqrt_1mf: Option<f64>,
    pub best_mean_f: Option<f64>,
    pub best_median_f: Option<f64>,
    pub best_mean_sqrt_1mf: Option<f64>,
    pub best_median_sqrt_1mf: Option<f64>,
}

/// Per-iteration dense/MPS comparison of the oracle mode.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleRow {
    pub n: usize,
    pub iter: usize,
    pub y_dense: f64,
    pub y_mps: f64,
    pub state_fidelity: f64,
}

#[derive(Clone, Debug, Default)]
pub struct ExperimentOutput {
    pub rows: Vec<Row>,
    pub best: Vec<BestRow>,
    pub summary: Vec<SummaryRow>,
    pub oracle: Vec<OracleRow>,
}

/// `results.csv` → `results.<tag>.csv`
pub fn sibling_path(out: &Path, tag: &str) -> PathBuf {
    let name = out.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let stem = name.strip_suffix(".csv").unwrap_or(&name);
    out.with_file_name(format!("{stem}.{tag}.csv"))
}

struct Job {
    n: usize,
    instance: usize,
    realization: usize,
    seed: u64,
}

struct JobOutput {
    rows: Vec<Row>,
    best: BestRow,
    oracle: Vec<OracleRow>,
}

fn table_for(n: usize, w: usize) -> CliResult<Arc<mpsvt_core::StringTable>> {
    Ok(Arc::new(enumerate_window_strings(n, w)?))
}

/// Record and (when known) the true state for one job.
fn prepare(spec: &ExperimentSpec, job: &Job) -> CliResult<(MeasurementRecord, Option<State>)> {
    let kind = match spec.kind {
        ExperimentKind::Ising | ExperimentKind::Oracle => TargetKind::Ising { rotated: true },
        ExperimentKind::Random => TargetKind::Random { seed: job.seed },
        ExperimentKind::WState => TargetKind::WState,
        ExperimentKind::Custom => {
            let record = crate::io::read_record(spec.record.as_ref().expect("validated"))?;
            let target = spec
                .target
                .as_ref()
                .map(|p| crate::io::read_mps(p).map(State::Mps))
                .transpose()?;
            if let Some(t) = &target {
                if t.n_sites() != record.n_sites() {
                    return Err(CliError::Spec(format!(
                        "target has {} sites, record has {}",
                        t.n_sites(),
                        record.n_sites()
                    )));
                }
            }
            let sigma = spec.noise.unwrap_or(0.0);
            return Ok((add_gaussian_noise(&record, sigma, job.seed)?, target));
        }
    };
    let target = make_target(&TargetSpec { kind, n_sites: job.n })?;
    let exact = measure_all(&target.state, table_for(job.n, spec.width)?, target.label.clone())?;
    let record = add_gaussian_noise(&exact, spec.noise_for(job.n), job.seed)?;
    Ok((record, Some(target.state)))
}

fn rows_of(spec: &ExperimentSpec, job: &Job, record: &MeasurementRecord, r: &SvtResult) -> JobOutput {
    let name = spec.kind.name().to_string();
    let config = &r.config;
    // n = 0 is the starting point, not a checkpoint
    let rows = r
        .trajectory
        .iter()
        .zip(&r.checkpoint_elapsed)
        .filter(|(p, _)| p.n > 0)
        .map(|(p, t)| Row {
            experiment: name.clone(),
            n: job.n,
            w: record.table().window_width(),
            instance: job.instance,
            realization: job.realization,
            iter: p.n,
            x: p.x,
            y: p.y,
            fidelity: p.fidelity,
            delta0: config.delta.headline(),
            chi_max: config.chi_max,
            seed: job.seed,
            elapsed_ms: t.as_secs_f64() * 1e3,
        })
        .collect();
    let best = BestRow {
        experiment: name,
        n: job.n,
        w: record.table().window_width(),
        instance: job.instance,
        realization: job.realization,
        best_iter: r.best_iteration,
        best_x: r.best_x,
        best_fidelity: r.best_fidelity,
        noise_sigma: record.noise_sigma(),
        seed: job.seed,
        elapsed_ms: r.elapsed.as_secs_f64() * 1e3,
    };
    JobOutput {
        rows,
        best,
        oracle: Vec::new(),
    }
}

/// Runs the dense and MPS backends side by side from the same start,
/// comparing top eigenvalues and eigenvectors at every iteration.
pub fn oracle_compare(record: &MeasurementRecord, config: &SvtConfig, known_target: Option<&State>) -> CliResult<Vec<OracleRow>> {
    let dense_cfg = SvtConfig {
        backend: BackendKind::Dense,
        ..config.clone()
    };
    let mps_cfg = SvtConfig {
        backend: BackendKind::Mps,
        ..config.clone()
    };
    let mut d = initialize(record, &dense_cfg, known_target)?;
    let mut m = initialize(record, &mps_cfg, known_target)?;
    let mut out = Vec::with_capacity(config.n_max);
    for _ in 0..config.n_max {
        svt_step(&mut d, record, &dense_cfg)?;
        svt_step(&mut m, record, &mps_cfg)?;
        out.push(OracleRow {
            n: record.n_sites(),
            iter: d.n,
            y_dense: d.y,
            y_mps: m.y,
            state_fidelity: d.state.fidelity(&m.state)?,
        });
    }
    Ok(out)
}

fn run_job(spec: &ExperimentSpec, job: &Job) -> CliResult<JobOutput> {
    let (record, target) = prepare(spec, job)?;
    let config = SvtConfig {
        seed: job.seed,
        ..spec.config.clone()
    };
    let result = reconstruct(&record, &config, target.as_ref())?;
    let mut out = rows_of(spec, job, &record, &result);
    if spec.kind == ExperimentKind::Oracle {
        out.oracle = oracle_compare(&record, &config, target.as_ref())?;
    }
    Ok(out)
}

fn jobs(spec: &ExperimentSpec) -> CliResult<Vec<Job>> {
    let sizes = if spec.kind == ExperimentKind::Custom {
        let r = crate::io::read_record(spec.record.as_ref().expect("validated"))?;
        vec![r.n_sites()]
    } else {
        spec.sizes.clone()
    };
    let mut out = Vec::new();
    for &n in &sizes {
        for instance in 0..spec.instances {
            for realization in 0..spec.realizations {
                // master seed plus the run index
                let offset = (instance * spec.realizations + realization) as u64;
                out.push(Job {
                    n,
                    instance,
                    realization,
                    seed: spec.seed.wrapping_add(offset),
                });
            }
        }
    }
    Ok(out)
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn median(v: &[f64]) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let m = s.len() / 2;
    Some(if s.len() % 2 == 1 { s[m] } else { 0.5 * (s[m - 1] + s[m]) })
}

fn sqrt_infidelity(f: f64) -> f64 {
    (1.0 - f).max(0.0).sqrt()
}

/// Per-`N` aggregates: the `final_*` columns use the rows at the last
/// iteration of each run, the `best_*` columns the best-iterate file.
pub fn summarize(rows: &[Row], best: &[BestRow]) -> Vec<SummaryRow> {
    let mut sizes: Vec<usize> = best.iter().map(|b| b.n).collect();
    sizes.dedup();
    sizes
        .into_iter()
        .map(|n| {
            let runs: Vec<&BestRow> = best.iter().filter(|b| b.n == n).collect();
            let last = rows.iter().filter(|r| r.n == n).map(|r| r.iter).max().unwrap_or(0);
            let final_f: Vec<f64> = rows
                .iter()
                .filter(|r| r.n == n && r.iter == last)
                .filter_map(|r| r.fidelity)
                .collect();
            let best_f: Vec<f64> = runs.iter().filter_map(|b| b.best_fidelity).collect();
            let sq = |v: &[f64]| v.iter().map(|&f| sqrt_infidelity(f)).collect::<Vec<_>>();
            SummaryRow {
                experiment: runs[0].experiment.clone(),
                n,
                runs: runs.len(),
                iter: last,
                final_mean_f: mean(&final_f),
                final_median_f: median(&final_f),
                final_mean_sqrt_1mf: mean(&sq(&final_f)),
                final_median_sqrt_1mf: median(&sq(&final_f)),
                best_mean_f: mean(&best_f),
                best_median_f: median(&best_f),
                best_mean_sqrt_1mf: mean(&sq(&best_f)),
                best_median_sqrt_1mf: median(&sq(&best_f)),
            }
        })
        .collect()
}

/// Runs every job and returns the outputs in job order. Jobs that failed
/// are skipped; the first error is returned alongside.
pub fn run_jobs(spec: &ExperimentSpec) -> CliResult<(ExperimentOutput, Option<CliError>)> {
    spec.validate()?;
    let jobs = jobs(spec)?;
    let slots: Vec<Mutex<Option<CliResult<JobOutput>>>> = jobs.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = spec.workers.max(1).min(jobs.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= jobs.len() {
                    break;
                }
                let out = run_job(spec, &jobs[i]);
                *slots[i].lock().expect("worker panicked") = Some(out);
            });
        }
    });
    let mut output = ExperimentOutput::default();
    let mut first_error = None;
    for slot in slots {
        match slot.into_inner().expect("worker panicked").expect("every job ran") {
            Ok(j) => {
                output.rows.extend(j.rows);
                output.best.push(j.best);
                output.oracle.extend(j.oracle);
            }
            Err(e) => {
                first_error.get_or_insert(e);
            }
        }
    }
    output.summary = summarize(&output.rows, &output.best);
    Ok((output, first_error))
}

fn opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| format!("{x:?}"))
}

fn writer(path: &Path) -> CliResult<csv::Writer<std::fs::File>> {
    let f = std::fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    Ok(csv::Writer::from_writer(f))
}

pub fn write_rows(path: &Path, rows: &[Row]) -> CliResult<()> {
    let mut w = writer(path)?;
    w.write_record(ROW_COLUMNS)?;
    for r in rows {
        w.write_record([
            r.experiment.clone(),
            r.n.to_string(),
            r.w.to_string(),
            r.instance.to_string(),
            r.realization.to_string(),
            r.iter.to_string(),
            format!("{:?}", r.x),
            format!("{:?}", r.y),
            opt(r.fidelity),
            format!("{:?}", r.delta0),
            r.chi_max.to_string(),
            r.seed.to_string(),
            format!("{:.3}", r.elapsed_ms),
        ])?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_best(path: &Path, best: &[BestRow]) -> CliResult<()> {
    let mut w = writer(path)?;
    w.write_record([
        "experiment",
        "N",
        "w",
        "instance",
        "realization",
        "best_iter",
        "best_x",
        "best_fidelity",
        "noise_sigma",
        "seed",
        "elapsed_ms",
    ])?;
    for b in best {
        w.write_record([
            b.experiment.clone(),
            b.n.to_string(),
            b.w.to_string(),
            b.instance.to_string(),
            b.realization.to_string(),
            b.best_iter.to_string(),
            format!("{:?}", b.best_x),
            opt(b.best_fidelity),
            format!("{:?}", b.noise_sigma),
            b.seed.to_string(),
            format!("{:.3}", b.elapsed_ms),
        ])?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_summary(path: &Path, summary: &[SummaryRow]) -> CliResult<()> {
    let mut w = writer(path)?;
    w.write_record([
        "experiment",
        "N",
        "runs",
        "iter",
        "final_mean_f",
        "final_median_f",
        "final_mean_sqrt_1mf",
        "final_median_sqrt_1mf",
        "best_mean_f",
        "best_median_f",
        "best_mean_sqrt_1mf",
        "best_median_sqrt_1mf",
    ])?;
    for s in summary {
        w.write_record([
            s.experiment.clone(),
            s.n.to_string(),
            s.runs.to_string(),
            s.iter.to_string(),
            opt(s.final_mean_f),
            opt(s.final_median_f),
            opt(s.final_mean_sqrt_1mf),
            opt(s.final_median_sqrt_1mf),
            opt(s.best_mean_f),
            opt(s.best_median_f),
            opt(s.best_mean_sqrt_1mf),
            opt(s.best_median_sqrt_1mf),
        ])?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_oracle(path: &Path, rows: &[OracleRow]) -> CliResult<()> {
    let mut w = writer(path)?;
    w.write_record(["N", "iter", "y_dense", "y_mps", "abs_dy", "state_fidelity"])?;
    for r in rows {
        w.write_record([
            r.n.to_string(),
            r.iter.to_string(),
            format!("{:?}", r.y_dense),
            format!("{:?}", r.y_mps),
            format!("{:?}", (r.y_dense - r.y_mps).abs()),
            format!("{:?}", r.state_fidelity),
        ])?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Runs the experiment and writes `out`, `out.best.csv`, `out.summary.csv`
/// and, in oracle mode, `out.oracle.csv`. Completed runs are written even
/// when a later one fails.
pub fn run_experiment(spec: &ExperimentSpec) -> CliResult<ExperimentOutput> {
    let (output, error) = run_jobs(spec)?;
    write_rows(&spec.out, &output.rows)?;
    write_best(&sibling_path(&spec.out, "best"), &output.best)?;
    write_summary(&sibling_path(&spec.out, "summary"), &output.summary)?;
    if spec.kind == ExperimentKind::Oracle {
        write_oracle(&sibling_path(&spec.out, "oracle"), &output.oracle)?;
    }
    match error {
        Some(e) => Err(e),
        None => Ok(output),
    }
}
