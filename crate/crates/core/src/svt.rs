//! The reconstruction loop, run entirely on Pauli coefficients.
//!
//! With `R = Σ_k p_k P_k / 2^N` and the top eigenpair `(y_n, |y_n>)` of
//! `Y_n = Σ_k a_k P_k`, one step is
//!
//! ```text
//! a_{n+1,k} = a_{n,k} + δ_n (p_k - y_n <y_n|P_k|y_n>) / 2^N
//! ```
//!
//! and the iterate with the smallest `x_n = Σ_k |p_k - <y_n|P_k|y_n>|` is
//! returned. `Y_n` itself is never materialized.

use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dense::{extremal_eigenstate_from, DenseState};
use crate::error::{Error, Result};
use crate::krylov::Extremum;
use crate::measure::MeasurementRecord;
use crate::mps::{dmrg_extremal, mpo_compile, DmrgOptions, Mps};
use crate::pauli::CoefficientVector;
use crate::state::{expectations_from_reductions, State};
use crate::{C64, DEFAULT_DENSE_LIMIT};

/// Bond dimension of the random initial MPS.
const RANDOM_INIT_CHI: usize = 4;
/// Bond dimension of the random admixture added to DMRG warm starts.
const WARM_NOISE_CHI: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BackendKind {
    Dense,
    Mps,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DeltaSchedule {
    /// `δ_n = δ₀ · 2^N / K`
    Scaled { delta0: f64 },
    /// `δ_n = δ`
    Constant { delta: f64 },
    /// `δ_n = δ₀ · 2^N / K · (n + 1)^{-exponent}`
    ScaledDecay { delta0: f64, exponent: f64 },
}

impl DeltaSchedule {
    pub fn delta(&self, n: usize, n_sites: usize, n_strings: usize) -> f64 {
        let scale = (n_sites as f64).exp2() / n_strings as f64;
        match *self {
            DeltaSchedule::Scaled { delta0 } => delta0 * scale,
            DeltaSchedule::Constant { delta } => delta,
            DeltaSchedule::ScaledDecay { delta0, exponent } => delta0 * scale * ((n + 1) as f64).powf(-exponent),
        }
    }

    /// The `δ₀` knob, or the raw constant.
    pub fn headline(&self) -> f64 {
        match *self {
            DeltaSchedule::Scaled { delta0 } | DeltaSchedule::ScaledDecay { delta0, .. } => delta0,
            DeltaSchedule::Constant { delta } => delta,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            DeltaSchedule::Scaled { delta0 } => delta0 > 0.0 && delta0.is_finite(),
            DeltaSchedule::Constant { delta } => delta > 0.0 && delta.is_finite(),
            DeltaSchedule::ScaledDecay { delta0, exponent } => {
                delta0 > 0.0 && delta0.is_finite() && exponent >= 0.0 && exponent.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid step schedule {self:?}")))
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Y0Mode {
    /// `Y_0 = 0`, with `X_0 = 0`.
    Zero,
    /// `Y_0 = R`.
    Record,
    Custom(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq)]
pub enum InitMode {
    /// Seeded random MPS, densified on the dense backend.
    Random,
    /// The known target state.
    Target,
    Custom(State),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SvtConfig {
    pub backend: BackendKind,
    pub delta: DeltaSchedule,
    pub n_max: usize,
    pub chi_max: usize,
    pub sweeps: usize,
    pub y0: Y0Mode,
    pub init: InitMode,
    pub checkpoint_stride: usize,
    pub seed: u64,
    /// Stop once `x_n` falls below this value.
    pub stop_below: Option<f64>,
    pub dense_limit: usize,
    /// Residual target of the eigensolvers.
    pub eig_tol: f64,
    /// Weight of a random MPS mixed into each DMRG warm start, so sweeps
    /// can leave a symmetry sector the previous eigenvector sits in.
    pub warm_start_noise: f64,
}

impl Default for SvtConfig {
    fn default() -> Self {
        SvtConfig {
            backend: BackendKind::Mps,
            delta: DeltaSchedule::Scaled { delta0: 0.5 },
            n_max: 500,
            chi_max: 32,
            sweeps: 2,
            y0: Y0Mode::Zero,
            init: InitMode::Random,
            checkpoint_stride: 1,
            seed: 0,
            stop_below: None,
            dense_limit: DEFAULT_DENSE_LIMIT,
            eig_tol: 1e-10,
            warm_start_noise: 1e-3,
        }
    }
}

impl SvtConfig {
    pub fn validate(&self) -> Result<()> {
        self.delta.validate()?;
        if self.n_max == 0 {
            return Err(Error::InvalidArgument("n_max must be at least 1".into()));
        }
        if self.checkpoint_stride == 0 {
            return Err(Error::InvalidArgument("checkpoint stride must be at least 1".into()));
        }
        if self.chi_max == 0 || self.sweeps == 0 {
            return Err(Error::InvalidArgument("χ_max and sweeps must be at least 1".into()));
        }
        if !(self.eig_tol > 0.0) {
            return Err(Error::InvalidArgument("eigensolver tolerance must be positive".into()));
        }
        if !(self.warm_start_noise >= 0.0 && self.warm_start_noise.is_finite()) {
            return Err(Error::InvalidArgument("warm-start noise must be finite and non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryPoint {
    pub n: usize,
    pub x: f64,
    pub y: f64,
    pub fidelity: Option<f64>,
}

/// Loop state after iteration `n`.
#[derive(Clone, Debug)]
pub struct SvtState {
    pub n: usize,
    /// Coefficients of `Y_n`.
    pub coeffs: CoefficientVector,
    /// Top eigenvalue `y_n`; zero at `n = 0` in zero mode.
    pub y: f64,
    /// `|y_n>`, or the initial state at `n = 0` in zero mode.
    pub state: State,
    /// `<y_n|P_k|y_n>` over the table.
    pub expectations: Vec<f64>,
    pub x: f64,
    pub best_x: f64,
    pub best_state: State,
    pub best_iteration: usize,
    /// Whether `state` is an eigenvector of `Y_n` (false only for the zero
    /// mode bootstrap).
    has_eigenpair: bool,
}

#[derive(Clone, Debug)]
pub struct SvtResult {
    pub best_state: State,
    pub best_x: f64,
    pub best_iteration: usize,
    pub best_fidelity: Option<f64>,
    pub final_state: State,
    pub final_coefficients: CoefficientVector,
    pub trajectory: Vec<TrajectoryPoint>,
    /// Wall time since the start of the run, one entry per trajectory point.
    pub checkpoint_elapsed: Vec<Duration>,
    pub config: SvtConfig,
    pub elapsed: Duration,
}

/// `R = Σ_k p_k P_k / 2^N`
pub fn build_r(record: &MeasurementRecord) -> Result<CoefficientVector> {
    let scale = (record.n_sites() as f64).exp2();
    CoefficientVector::from_values(
        Arc::clone(record.table()),
        record.values().iter().map(|p| p / scale).collect(),
    )
}

/// `Σ_k |p_k - e_k|`
pub fn residual_x(record: &MeasurementRecord, expectations: &[f64]) -> Result<f64> {
    if expectations.len() != record.values().len() {
        return Err(Error::SizeMismatch {
            expected: record.values().len(),
            found: expectations.len(),
        });
    }
    let x: f64 = record.values().iter().zip(expectations).map(|(p, e)| (p - e).abs()).sum();
    if x.is_nan() {
        return Err(Error::NonFinite("residual"));
    }
    Ok(x)
}

fn expectations_of(state: &State, record: &MeasurementRecord) -> Result<Vec<f64>> {
    let table = record.table();
    let rdms = state.window_density_matrices(table.window_width())?;
    expectations_from_reductions(table, &rdms)
}

pub(crate) fn initial_state(record: &MeasurementRecord, config: &SvtConfig, known_target: Option<&State>) -> Result<State> {
    let n = record.n_sites();
    let state = match &config.init {
        InitMode::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            State::Mps(Mps::random(n, config.chi_max.min(RANDOM_INIT_CHI), &mut rng)?)
        }
        InitMode::Target => known_target
            .cloned()
            .ok_or_else(|| Error::InvalidArgument("target initialization needs a known target".into()))?,
        InitMode::Custom(s) => s.clone(),
    };
    if state.n_sites() != n {
        return Err(Error::SizeMismatch {
            expected: n,
            found: state.n_sites(),
        });
    }
    Ok(match config.backend {
        BackendKind::Dense => State::Dense(state.to_dense()?),
        BackendKind::Mps => State::Mps(state.to_mps()?),
    })
}

/// Top eigenpair of `Σ_k a_k P_k` on the configured backend, warm-started
/// from `start`.
fn top_eigenpair(a: &CoefficientVector, start: &State, config: &SvtConfig, n: usize) -> Result<(f64, State)> {
    match config.backend {
        BackendKind::Dense => {
            let start = match start {
                State::Dense(d) => d.clone(),
                other => other.to_dense()?,
            };
            let e = extremal_eigenstate_from(a, Extremum::Max, config.eig_tol, Some(&start), config.dense_limit)?;
            Ok((e.value, State::Dense(e.state)))
        }
        BackendKind::Mps => {
            let mut start = start.to_mps()?.normalized();
            if config.warm_start_noise > 0.0 {
                let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
                rng.set_stream(n as u64 + 1);
                let kick = Mps::random(start.n_sites(), WARM_NOISE_CHI, &mut rng)?;
                start = start.add_scaled(&kick, C64::new(config.warm_start_noise, 0.0))?.normalized();
            }
            let opts = DmrgOptions {
                chi_max: config.chi_max,
                sweeps: config.sweeps,
                tol: config.eig_tol,
                ..DmrgOptions::default()
            };
            let r = dmrg_extremal(&mpo_compile(a)?, Extremum::Max, &start, &opts)?;
            Ok((r.value, State::Mps(r.state)))
        }
    }
}

/// Sets up `Y_0` and, unless `Y_0 = 0`, its top eigenpair.
pub fn initialize(record: &MeasurementRecord, config: &SvtConfig, known_target: Option<&State>) -> Result<SvtState> {
    config.validate()?;
    record.validate()?;
    let table = Arc::clone(record.table());
    let init = initial_state(record, config, known_target)?;
    let (coeffs, has_eigenpair) = match &config.y0 {
        Y0Mode::Zero => (CoefficientVector::zeros(table), false),
        Y0Mode::Record => (build_r(record)?, true),
        Y0Mode::Custom(v) => (CoefficientVector::from_values(table, v.clone())?, true),
    };
    let (y, state) = if has_eigenpair {
        top_eigenpair(&coeffs, &init, config, 0).map_err(|e| e.at_iteration(0))?
    } else {
        (0.0, init)
    };
    let expectations = expectations_of(&state, record)?;
    let x = residual_x(record, &expectations)?;
    let best_x = if has_eigenpair { x } else { f64::INFINITY };
    Ok(SvtState {
        n: 0,
        coeffs,
        y,
        best_state: state.clone(),
        state,
        expectations,
        x,
        best_x,
        best_iteration: 0,
        has_eigenpair,
    })
}

/// Advances `s` from iteration `n` to `n + 1`.
pub fn svt_step(s: &mut SvtState, record: &MeasurementRecord, config: &SvtConfig) -> Result<()> {
    let n_sites = record.n_sites();
    let k = record.values().len();
    let factor = config.delta.delta(s.n, n_sites, k) / (n_sites as f64).exp2();
    // the rank-one term only enters for a positive top eigenvalue
    let y = if s.has_eigenpair && s.y > 0.0 { s.y } else { 0.0 };
    for ((a, p), e) in s.coeffs.values_mut().iter_mut().zip(record.values()).zip(&s.expectations) {
        *a += factor * (p - y * e);
    }
    let n = s.n + 1;
    let (value, state) = top_eigenpair(&s.coeffs, &s.state, config, n).map_err(|e| e.at_iteration(n))?;
    let expectations = expectations_of(&state, record).map_err(|e| e.at_iteration(n))?;
    let x = residual_x(record, &expectations).map_err(|e| e.at_iteration(n))?;
    s.n = n;
    s.y = value;
    s.state = state;
    s.expectations = expectations;
    s.x = x;
    s.has_eigenpair = true;
    if x < s.best_x {
        s.best_x = x;
        s.best_state = s.state.clone();
        s.best_iteration = n;
    }
    Ok(())
}

/// Runs up to `n_max` steps and returns the iterate with the smallest `x_n`.
/// Fidelities with `known_target` are recorded at every checkpoint.
pub fn reconstruct(
    record: &MeasurementRecord,
    config: &SvtConfig,
    known_target: Option<&State>,
) -> Result<SvtResult> {
    let start = Instant::now();
    let mut s = initialize(record, config, known_target)?;
    let fid = |state: &State| -> Result<Option<f64>> { known_target.map(|t| t.fidelity(state)).transpose() };
    let mut trajectory = vec![TrajectoryPoint {
        n: 0,
        x: s.x,
        y: s.y,
        fidelity: fid(&s.state)?,
    }];
    let mut checkpoint_elapsed = vec![start.elapsed()];
    while s.n < config.n_max {
        svt_step(&mut s, record, config)?;
        let stop = config.stop_below.is_some_and(|t| s.x < t);
        if s.n % config.checkpoint_stride == 0 || s.n == config.n_max || stop {
            trajectory.push(TrajectoryPoint {
                n: s.n,
                x: s.x,
                y: s.y,
                fidelity: fid(&s.state)?,
            });
            checkpoint_elapsed.push(start.elapsed());
        }
        if stop {
            break;
        }
    }
    let best_fidelity = fid(&s.best_state)?;
    Ok(SvtResult {
        best_fidelity,
        best_x: s.best_x,
        best_iteration: s.best_iteration,
        best_state: s.best_state,
        final_state: s.state,
        final_coefficients: s.coeffs,
        trajectory,
        checkpoint_elapsed,
        config: config.clone(),
        elapsed: start.elapsed(),
    })
}

/// The dense state of a result, when small enough.
pub fn dense_state(s: &State) -> Result<DenseState> {
    s.to_dense()
}
