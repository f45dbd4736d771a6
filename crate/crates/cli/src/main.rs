use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mpsvt_cli::experiment::{run_experiment, sibling_path, ExperimentKind, ExperimentSpec};
use mpsvt_cli::{io, CliError, CliResult};
use mpsvt_core::measure::{add_gaussian_noise, measure_all};
use mpsvt_core::pauli::enumerate_window_strings;
use mpsvt_core::svt::{BackendKind, DeltaSchedule, InitMode, Y0Mode};
use mpsvt_core::targets::{make_target, TargetKind, TargetSpec};
use mpsvt_core::SvtConfig;

#[derive(Parser)]
#[command(name = "mpsvt", version, about = "Pure-state reconstruction from local Pauli expectation values")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Locally rotated critical Ising ground states (default N = 6,8,10).
    Ising(RunArgs),
    /// Ground states of random nearest-neighbour Hamiltonians.
    Random(RunArgs),
    /// W states, noisy records, best-by-x selection.
    Wstate(RunArgs),
    /// Reconstruct from a record file.
    Reconstruct(ReconstructArgs),
    /// Dense and MPS backends side by side on rotated Ising targets.
    Oracle(RunArgs),
    /// Write the exact record of a target state (and the state itself).
    Measure(MeasureArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Backend {
    Dense,
    Mps,
}

#[derive(Clone, Copy, ValueEnum)]
enum Y0 {
    Zero,
    Record,
}

#[derive(Clone, Copy, ValueEnum)]
enum Init {
    Random,
    Target,
}

#[derive(Clone, Copy, ValueEnum)]
enum TargetName {
    Ising,
    Random,
    Wstate,
}

#[derive(Args, Clone)]
struct RunArgs {
    /// Chain lengths, comma separated.
    #[arg(long, value_delimiter = ',')]
    n: Vec<usize>,
    /// Inclusive range of chain lengths, `A..B`.
    #[arg(long, value_name = "A..B")]
    n_range: Option<String>,
    /// Window width of the measured strings.
    #[arg(long, default_value_t = 2)]
    w: usize,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long, default_value_t = 0.5)]
    delta0: f64,
    #[arg(long, default_value_t = 32)]
    chi: usize,
    #[arg(long, default_value_t = 2)]
    sweeps: usize,
    #[arg(long, value_enum, default_value_t = Backend::Mps)]
    backend: Backend,
    #[arg(long, value_enum)]
    y0: Option<Y0>,
    #[arg(long, value_enum)]
    init: Option<Init>,
    /// Gaussian noise σ added to every non-identity value.
    #[arg(long, value_name = "SIGMA")]
    noise: Option<f64>,
    #[arg(long)]
    instances: Option<usize>,
    #[arg(long)]
    realizations: Option<usize>,
    /// Master seed; run k uses seed + k.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    checkpoint_stride: usize,
    /// Row file; best-iterate and summary files are written next to it.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Worker threads (default: available cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Weight of the random MPS mixed into DMRG warm starts.
    #[arg(long, default_value_t = SvtConfig::default().warm_start_noise)]
    warm_noise: f64,
}

#[derive(Args)]
struct ReconstructArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Record file to reconstruct from.
    #[arg(long)]
    record: PathBuf,
    /// MPS file of the true state, for fidelities.
    #[arg(long)]
    target: Option<PathBuf>,
}

#[derive(Args)]
struct MeasureArgs {
    #[arg(long, value_enum)]
    target: TargetName,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 2)]
    w: usize,
    /// Instance seed of random targets.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_name = "SIGMA", default_value_t = 0.0)]
    noise: f64,
    /// Record file to write.
    #[arg(long)]
    out: PathBuf,
    /// Also write the target state as an MPS file.
    #[arg(long)]
    state: Option<PathBuf>,
}

struct Defaults {
    sizes: Vec<usize>,
    iters: usize,
    y0: Y0,
    init: Init,
    instances: usize,
    realizations: usize,
}

fn defaults(kind: ExperimentKind) -> Defaults {
    let d = |sizes: Vec<usize>, iters, y0, init, instances, realizations| Defaults {
        sizes,
        iters,
        y0,
        init,
        instances,
        realizations,
    };
    match kind {
        ExperimentKind::Ising => d(vec![6, 8, 10], 500, Y0::Zero, Init::Random, 1, 1),
        ExperimentKind::Random => d(vec![6, 8], 5, Y0::Zero, Init::Random, 100, 1),
        ExperimentKind::WState => d((4..=20).collect(), 4000, Y0::Record, Init::Target, 1, 20),
        ExperimentKind::Custom => d(Vec::new(), 500, Y0::Zero, Init::Random, 1, 1),
        ExperimentKind::Oracle => d(vec![6], 50, Y0::Zero, Init::Random, 1, 1),
    }
}

fn parse_range(s: &str) -> CliResult<Vec<usize>> {
    let bad = || CliError::Spec(format!("invalid range {s:?}, expected A..B"));
    let (a, b) = s.split_once("..").ok_or_else(bad)?;
    let a: usize = a.trim().parse().map_err(|_| bad())?;
    let b: usize = b.trim().parse().map_err(|_| bad())?;
    if a > b {
        return Err(bad());
    }
    Ok((a..=b).collect())
}

fn spec_from(kind: ExperimentKind, a: &RunArgs) -> CliResult<ExperimentSpec> {
    let d = defaults(kind);
    let mut sizes = a.n.clone();
    if let Some(r) = &a.n_range {
        sizes.extend(parse_range(r)?);
    }
    if sizes.is_empty() {
        sizes = d.sizes;
    }
    let config = SvtConfig {
        backend: match a.backend {
            Backend::Dense => BackendKind::Dense,
            Backend::Mps => BackendKind::Mps,
        },
        delta: DeltaSchedule::Scaled { delta0: a.delta0 },
        n_max: a.iters.unwrap_or(d.iters),
        chi_max: a.chi,
        sweeps: a.sweeps,
        y0: match a.y0.unwrap_or(d.y0) {
            Y0::Zero => Y0Mode::Zero,
            Y0::Record => Y0Mode::Record,
        },
        init: match a.init.unwrap_or(d.init) {
            Init::Random => InitMode::Random,
            Init::Target => InitMode::Target,
        },
        checkpoint_stride: a.checkpoint_stride,
        seed: a.seed,
        warm_start_noise: a.warm_noise,
        ..SvtConfig::default()
    };
    let workers = a
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    Ok(ExperimentSpec {
        kind,
        sizes,
        width: a.w,
        instances: a.instances.unwrap_or(d.instances),
        realizations: a.realizations.unwrap_or(d.realizations),
        noise: a.noise,
        config,
        seed: a.seed,
        out: a.out.clone().unwrap_or_else(|| PathBuf::from(format!("{}.csv", kind.name()))),
        record: None,
        target: None,
        workers,
    })
}

fn measure(a: &MeasureArgs) -> CliResult<()> {
    let kind = match a.target {
        TargetName::Ising => TargetKind::Ising { rotated: true },
        TargetName::Random => TargetKind::Random { seed: a.seed },
        TargetName::Wstate => TargetKind::WState,
    };
    let t = make_target(&TargetSpec { kind, n_sites: a.n })?;
    let table = Arc::new(enumerate_window_strings(a.n, a.w)?);
    let record = add_gaussian_noise(&measure_all(&t.state, table, t.label.clone())?, a.noise, a.seed)?;
    io::write_record(&a.out, &record)?;
    if let Some(p) = &a.state {
        io::write_mps(p, &t.state.to_mps()?)?;
    }
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    let spec = match cli.command {
        Command::Measure(a) => return measure(&a),
        Command::Ising(a) => spec_from(ExperimentKind::Ising, &a)?,
        Command::Random(a) => spec_from(ExperimentKind::Random, &a)?,
        Command::Wstate(a) => spec_from(ExperimentKind::WState, &a)?,
        Command::Oracle(a) => spec_from(ExperimentKind::Oracle, &a)?,
        Command::Reconstruct(a) => ExperimentSpec {
            record: Some(a.record),
            target: a.target,
            ..spec_from(ExperimentKind::Custom, &a.run)?
        },
    };
    let out = run_experiment(&spec)?;
    for s in &out.summary {
        let fmt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.6}"));
        println!(
            "{} N={} runs={} iter={} final mean f={} best mean f={} best median f={}",
            s.experiment,
            s.n,
            s.runs,
            s.iter,
            fmt(s.final_mean_f),
            fmt(s.best_mean_f),
            fmt(s.best_median_f)
        );
    }
    if spec.kind == ExperimentKind::Oracle {
        let dy = out.oracle.iter().map(|r| (r.y_dense - r.y_mps).abs()).fold(0.0, f64::max);
        let f = out.oracle.iter().map(|r| r.state_fidelity).fold(1.0, f64::min);
        println!("oracle: max |y_dense - y_mps| = {dy:.3e}, min state fidelity = {f:.12}");
    }
    println!("wrote {} (+ {})", spec.out.display(), sibling_path(&spec.out, "best").display());
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
