//! Exact statevector backend.
//!
//! Everything here materializes `2^N` amplitudes and is guarded by a dense
//! size limit. It is the oracle for the matrix product state backend and
//! hosts the reference shrink operators and the literal dense recursion.

use std::sync::Arc;
use std::time::Instant;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;

use crate::error::{Error, Result};
use crate::krylov::{self, Extremum, KrylovOptions};
use crate::measure::MeasurementRecord;
use crate::pauli::{add_string_to_matrix, parity_sign, y_phase, CoefficientVector, PauliString, Window};
use crate::state::State;
use crate::svt::{initial_state, residual_x, SvtConfig, SvtResult, TrajectoryPoint, Y0Mode};
use crate::{C64, DEFAULT_DENSE_LIMIT};

pub(crate) fn check_limit(n_sites: usize, limit: usize) -> Result<()> {
    if n_sites > limit {
        Err(Error::DenseLimit { n_sites, limit })
    } else {
        Ok(())
    }
}

/// Pure state as `2^N` amplitudes; site 1 is the most significant bit.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseState {
    n_sites: usize,
    amps: Vec<C64>,
}

impl DenseState {
    pub fn new(n_sites: usize, amps: Vec<C64>) -> Result<Self> {
        check_limit(n_sites, DEFAULT_DENSE_LIMIT)?;
        if amps.len() != 1usize << n_sites {
            return Err(Error::SizeMismatch {
                expected: 1 << n_sites,
                found: amps.len(),
            });
        }
        if amps.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(Error::NonFinite("state amplitudes"));
        }
        Ok(DenseState { n_sites, amps })
    }

    /// Computational basis state `|index>`.
    pub fn basis(n_sites: usize, index: usize) -> Result<Self> {
        let mut amps = vec![C64::new(0.0, 0.0); 1 << n_sites];
        if index >= amps.len() {
            return Err(Error::InvalidArgument(format!("basis index {index} out of range")));
        }
        amps[index] = C64::new(1.0, 0.0);
        DenseState::new(n_sites, amps)
    }

    /// Product state from a bit label such as `"0101"` (site 1 first).
    pub fn from_bits(bits: &str) -> Result<Self> {
        let n = bits.len();
        let mut index = 0usize;
        for c in bits.chars() {
            index = index * 2
                + match c {
                    '0' => 0,
                    '1' => 1,
                    _ => return Err(Error::InvalidArgument(format!("invalid bit label {bits:?}"))),
                };
        }
        DenseState::basis(n, index)
    }

    pub fn random<R: Rng>(n_sites: usize, rng: &mut R) -> Result<Self> {
        let amps = (0..1usize << n_sites)
            .map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        Ok(DenseState::new(n_sites, amps)?.normalized())
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amps
    }

    pub fn norm(&self) -> f64 {
        krylov::norm(&self.amps)
    }

    pub fn normalized(mut self) -> Self {
        let n = self.norm();
        if n > 0.0 {
            for a in &mut self.amps {
                *a /= n;
            }
        }
        self
    }

    /// `<self|other>`
    pub fn inner(&self, other: &DenseState) -> Result<C64> {
        if self.n_sites != other.n_sites {
            return Err(Error::SizeMismatch {
                expected: self.n_sites,
                found: other.n_sites,
            });
        }
        Ok(krylov::dot(&self.amps, &other.amps))
    }

    /// `<self|P|self>`; the imaginary part must vanish to 1e-10.
    pub fn expectation(&self, p: &PauliString) -> Result<f64> {
        let applied = apply_string(p, self)?;
        let value = self.inner(&applied)?;
        if value.im.abs() > 1e-10 {
            return Err(Error::InvalidArgument(format!(
                "expectation of {p} has imaginary part {:e}",
                value.im
            )));
        }
        Ok(value.re)
    }
}

/// `P|s>` via the monomial structure of Pauli strings.
pub fn apply_string(p: &PauliString, s: &DenseState) -> Result<DenseState> {
    if p.n_sites() != s.n_sites() {
        return Err(Error::SizeMismatch {
            expected: s.n_sites(),
            found: p.n_sites(),
        });
    }
    let (flip, sign, n_y) = p.masks();
    let phase = y_phase(n_y);
    let mut out = vec![C64::new(0.0, 0.0); s.amps.len()];
    for (b, a) in s.amps.iter().enumerate() {
        out[b ^ flip] = phase * parity_sign(b & sign) * a;
    }
    Ok(DenseState {
        n_sites: s.n_sites,
        amps: out,
    })
}

/// `y += op · x` for an operator on the contiguous block of `width` sites
/// starting at 0-based site `start`.
fn apply_block(n_sites: usize, start: usize, width: usize, op: &[C64], x: &[C64], y: &mut [C64]) {
    let local = 1usize << width;
    let shift = n_sites - start - width;
    let low = 1usize << shift;
    let high = 1usize << start;
    let mut gathered = vec![C64::new(0.0, 0.0); local];
    for h in 0..high {
        for l in 0..low {
            let base = (h << (shift + width)) | l;
            for (j, g) in gathered.iter_mut().enumerate() {
                *g = x[base | (j << shift)];
            }
            for i in 0..local {
                let row = &op[i * local..(i + 1) * local];
                let mut acc = C64::new(0.0, 0.0);
                for (m, g) in row.iter().zip(&gathered) {
                    acc += m * g;
                }
                y[base | (i << shift)] += acc;
            }
        }
    }
}

/// Window-local form of `sum_k a_k P_k`, ready for repeated products.
#[derive(Clone, Debug)]
pub struct SumOperator {
    n_sites: usize,
    width: usize,
    blocks: Vec<Vec<C64>>,
}

impl SumOperator {
    pub fn new(a: &CoefficientVector) -> Self {
        let table = a.table();
        let blocks = a
            .window_operators()
            .into_iter()
            .map(|m| {
                // row-major copy
                let d = m.nrows();
                (0..d * d).map(|i| m[(i / d, i % d)]).collect()
            })
            .collect();
        SumOperator {
            n_sites: table.n_sites(),
            width: table.window_width(),
            blocks,
        }
    }

    pub fn apply(&self, x: &[C64], y: &mut [C64]) {
        y.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
        for (start, op) in self.blocks.iter().enumerate() {
            if op.iter().all(|c| c.re == 0.0 && c.im == 0.0) {
                continue;
            }
            apply_block(self.n_sites, start, self.width, op, x, y);
        }
    }
}

/// `sum_k a_k P_k |s>` (unnormalized).
pub fn apply_sum(a: &CoefficientVector, s: &DenseState) -> Result<Vec<C64>> {
    if a.n_sites() != s.n_sites() {
        return Err(Error::SizeMismatch {
            expected: s.n_sites(),
            found: a.n_sites(),
        });
    }
    let op = SumOperator::new(a);
    let mut out = vec![C64::new(0.0, 0.0); s.amps.len()];
    op.apply(&s.amps, &mut out);
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct DenseEigen {
    pub value: f64,
    pub state: DenseState,
    pub residual: f64,
    /// Set when the operator is identically zero and the state is an
    /// arbitrary (basis) choice.
    pub degenerate: bool,
}

/// Extremal eigenpair of `sum_k a_k P_k` with a cold start.
pub fn extremal_eigenstate(a: &CoefficientVector, which: Extremum, tol: f64) -> Result<DenseEigen> {
    extremal_eigenstate_from(a, which, tol, None, DEFAULT_DENSE_LIMIT)
}

/// Extremal eigenpair, optionally warm-started. The iteration cap is
/// `10 · 2^N` operator products.
pub fn extremal_eigenstate_from(
    a: &CoefficientVector,
    which: Extremum,
    tol: f64,
    start: Option<&DenseState>,
    limit: usize,
) -> Result<DenseEigen> {
    let n = a.n_sites();
    check_limit(n, limit)?;
    if tol <= 0.0 {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    if a.is_zero() {
        return Ok(DenseEigen {
            value: 0.0,
            state: DenseState::basis(n, 0)?,
            residual: 0.0,
            degenerate: true,
        });
    }
    if let Some(s) = start {
        if s.n_sites() != n {
            return Err(Error::SizeMismatch {
                expected: n,
                found: s.n_sites(),
            });
        }
    }
    let dim = 1usize << n;
    let op = SumOperator::new(a);
    let opts = KrylovOptions::new(tol, 10 * dim);
    let pair = krylov::extremal_eigenpair(
        dim,
        |x, y| op.apply(x, y),
        start.map(|s| s.amplitudes()),
        which,
        &opts,
    )?;
    let mut v = pair.vector;
    krylov::fix_phase(&mut v);
    Ok(DenseEigen {
        value: pair.value,
        state: DenseState { n_sites: n, amps: v },
        residual: pair.residual,
        degenerate: false,
    })
}

/// Reduced density matrix on a contiguous block.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    matrix: DMatrix<C64>,
}

impl DensityMatrix {
    pub fn from_matrix(matrix: DMatrix<C64>) -> Result<Self> {
        if !matrix.is_square() || !matrix.nrows().is_power_of_two() {
            return Err(Error::InvalidArgument("density matrix must be 2^w × 2^w".into()));
        }
        Ok(DensityMatrix { matrix })
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn width(&self) -> usize {
        self.matrix.nrows().trailing_zeros() as usize
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    pub fn hermiticity_error(&self) -> f64 {
        (&self.matrix - self.matrix.adjoint()).iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let h = (&self.matrix + self.matrix.adjoint()) * C64::new(0.5, 0.0);
        let mut ev: Vec<f64> = SymmetricEigen::new(h).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// Half the trace norm of the difference.
    pub fn trace_distance(&self, other: &DensityMatrix) -> Result<f64> {
        if self.matrix.shape() != other.matrix.shape() {
            return Err(Error::SizeMismatch {
                expected: self.matrix.nrows(),
                found: other.matrix.nrows(),
            });
        }
        let d = DensityMatrix {
            matrix: &self.matrix - &other.matrix,
        };
        Ok(0.5 * d.eigenvalues().iter().map(|e| e.abs()).sum::<f64>())
    }
}

/// `tr_{outside window} |s><s|`.
pub fn partial_trace(s: &DenseState, keep: Window) -> Result<DensityMatrix> {
    let n = s.n_sites();
    if keep.end() > n {
        return Err(Error::WindowOutOfRange {
            start: keep.start(),
            end: keep.end(),
            n_sites: n,
        });
    }
    let w = keep.width();
    let local = 1usize << w;
    let shift = n - keep.end();
    let low = 1usize << shift;
    let high = 1usize << (keep.start() - 1);
    let mut rho = DMatrix::zeros(local, local);
    let mut block = vec![C64::new(0.0, 0.0); local];
    for h in 0..high {
        for l in 0..low {
            let base = (h << (shift + w)) | l;
            for (j, b) in block.iter_mut().enumerate() {
                *b = s.amps[base | (j << shift)];
            }
            for i in 0..local {
                for j in 0..local {
                    rho[(i, j)] += block[i] * block[j].conj();
                }
            }
        }
    }
    Ok(DensityMatrix { matrix: rho })
}

/// Reductions on every width-`w` window, left to right.
pub fn window_density_matrices(s: &DenseState, width: usize) -> Result<Vec<DensityMatrix>> {
    let n = s.n_sites();
    if width == 0 || width > n {
        return Err(Error::InvalidWindowWidth { width, n_sites: n });
    }
    (1..=n - width + 1)
        .map(|start| partial_trace(s, Window::new(start, width, n)?))
        .collect()
}

/// `|<s|t>|^2`
pub fn fidelity(s: &DenseState, t: &DenseState) -> Result<f64> {
    Ok(s.inner(t)?.norm_sqr())
}

/// Soft-thresholds the singular values of `y` by `tau`.
pub fn shrink_standard(y: &DMatrix<C64>, tau: f64) -> Result<DMatrix<C64>> {
    if !y.is_square() {
        return Err(Error::InvalidArgument("shrink requires a square matrix".into()));
    }
    if tau < 0.0 {
        return Err(Error::InvalidArgument("threshold must be non-negative".into()));
    }
    check_limit(y.nrows().trailing_zeros() as usize, DEFAULT_DENSE_LIMIT)?;
    let svd = y.clone().svd(true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V^†");
    let shrunk = svd.singular_values.map(|s| C64::new((s - tau).max(0.0), 0.0));
    Ok(u * DMatrix::from_diagonal(&shrunk) * v_t)
}

#[derive(Clone, Debug)]
pub struct TopComponent {
    pub value: f64,
    pub vector: DVector<C64>,
    /// The zero matrix, or a top eigenvalue of multiplicity above one.
    pub degenerate: bool,
}

/// Algebraically largest eigenpair of a hermitian matrix. Within a
/// degenerate top eigenspace the vector is the normalized projection of the
/// lowest-index basis vector with non-zero overlap.
pub fn shrink_top(y: &DMatrix<C64>) -> Result<TopComponent> {
    if !y.is_square() || y.nrows() == 0 {
        return Err(Error::InvalidArgument("shrink requires a square matrix".into()));
    }
    let dim = y.nrows();
    if y.iter().all(|c| c.norm() == 0.0) {
        let mut e = DVector::zeros(dim);
        e[0] = C64::new(1.0, 0.0);
        return Ok(TopComponent {
            value: 0.0,
            vector: e,
            degenerate: true,
        });
    }
    let h = (y + y.adjoint()) * C64::new(0.5, 0.0);
    let scale = h.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let eig = SymmetricEigen::new(h);
    let top = eig.eigenvalues.max();
    let tie = 1e-12 * scale.max(1.0);
    let cols: Vec<usize> = (0..dim).filter(|&i| eig.eigenvalues[i] >= top - tie).collect();
    let q = DMatrix::from_fn(dim, cols.len(), |r, c| eig.eigenvectors[(r, cols[c])]);
    let mut vector = None;
    for i in 0..dim {
        // projection of e_i onto the top eigenspace: Q Q^† e_i
        let coeffs = q.row(i).adjoint();
        let v = &q * coeffs;
        let nv = v.norm();
        if nv > 1e-8 {
            vector = Some(v / C64::new(nv, 0.0));
            break;
        }
    }
    let mut vector = vector.expect("eigenspace is non-trivial");
    krylov::fix_phase(vector.as_mut_slice());
    Ok(TopComponent {
        value: top,
        vector,
        degenerate: cols.len() > 1,
    })
}

/// The reconstruction loop with every `Y_n` materialized as a dense matrix
/// and diagonalized exactly by [`shrink_top`]. Cross-validation oracle for
/// [`crate::svt::reconstruct`]; the backend setting of `config` is ignored.
pub fn svt_reference_loop(
    record: &MeasurementRecord,
    config: &SvtConfig,
    known_target: Option<&State>,
) -> Result<SvtResult> {
    svt_reference_loop_with(record, config, known_target, |_, _| {})
}

/// As [`svt_reference_loop`], calling `observe(n, Y_n)` for every iterate.
pub fn svt_reference_loop_with<F>(
    record: &MeasurementRecord,
    config: &SvtConfig,
    known_target: Option<&State>,
    mut observe: F,
) -> Result<SvtResult>
where
    F: FnMut(usize, &DMatrix<C64>),
{
    let start = Instant::now();
    // a zero-iteration run is allowed here and just evaluates the start
    SvtConfig {
        n_max: config.n_max.max(1),
        ..config.clone()
    }
    .validate()?;
    record.validate()?;
    let n = record.n_sites();
    check_limit(n, config.dense_limit)?;
    let table = record.table();
    let dim = 1usize << n;
    let scale = (n as f64).exp2();

    // R = Σ_k p_k P_k / 2^N
    let mut r = DMatrix::<C64>::zeros(dim, dim);
    for (p, &v) in table.strings().iter().zip(record.values()) {
        add_string_to_matrix(&mut r, p, v / scale);
    }
    let projected = |v: &DenseState, weight: f64| -> Result<(DMatrix<C64>, Vec<f64>)> {
        let mut x = DMatrix::<C64>::zeros(dim, dim);
        let mut e = Vec::with_capacity(table.len());
        for p in table.strings() {
            let ev = v.expectation(p)?;
            e.push(ev);
            add_string_to_matrix(&mut x, p, weight * ev / scale);
        }
        Ok((x, e))
    };
    let top_of = |y: &DMatrix<C64>| -> Result<(f64, DenseState)> {
        let top = shrink_top(y)?;
        Ok((top.value, DenseState::new(n, top.vector.as_slice().to_vec())?))
    };
    let fid = |s: &DenseState| -> Result<Option<f64>> {
        known_target.map(|t| t.fidelity(&State::Dense(s.clone()))).transpose()
    };

    let (mut y_mat, has_pair) = match &config.y0 {
        Y0Mode::Zero => (DMatrix::<C64>::zeros(dim, dim), false),
        Y0Mode::Record => (r.clone(), true),
        Y0Mode::Custom(v) => (CoefficientVector::from_values(Arc::clone(table), v.clone())?.to_dense()?, true),
    };
    observe(0, &y_mat);
    let (mut y, mut v) = if has_pair {
        top_of(&y_mat)?
    } else {
        (0.0, initial_state(record, config, known_target)?.to_dense()?)
    };
    let mut e = projected(&v, 1.0)?.1;
    let mut x = residual_x(record, &e)?;
    let (mut best_x, mut best_state, mut best_iteration) = if has_pair {
        (x, v.clone(), 0)
    } else {
        (f64::INFINITY, v.clone(), 0)
    };
    let mut trajectory = vec![TrajectoryPoint {
        n: 0,
        x,
        y,
        fidelity: fid(&v)?,
    }];
    let mut checkpoint_elapsed = vec![start.elapsed()];
    let mut has_pair = has_pair;
    for step in 0..config.n_max {
        let delta = config.delta.delta(step, n, table.len());
        // X_n = y_n Σ_k <y_n|P_k|y_n> P_k / 2^N, dropped unless y_n > 0
        let weight = if has_pair && y > 0.0 { y } else { 0.0 };
        let (x_mat, _) = projected(&v, weight)?;
        y_mat += (&r - x_mat) * C64::new(delta, 0.0);
        let it = step + 1;
        observe(it, &y_mat);
        let (ny, nv) = top_of(&y_mat).map_err(|err| err.at_iteration(it))?;
        y = ny;
        v = nv;
        has_pair = true;
        e = projected(&v, 1.0)?.1;
        x = residual_x(record, &e)?;
        if x < best_x {
            best_x = x;
            best_state = v.clone();
            best_iteration = it;
        }
        if it % config.checkpoint_stride == 0 || it == config.n_max {
            trajectory.push(TrajectoryPoint {
                n: it,
                x,
                y,
                fidelity: fid(&v)?,
            });
            checkpoint_elapsed.push(start.elapsed());
        }
    }
    let coeffs: Vec<f64> = table
        .strings()
        .iter()
        .map(|p| {
            // a_k = tr(P_k Y) / 2^N
            let pm = crate::pauli::dense_of_string(p)?;
            Ok((pm * &y_mat).trace().re / scale)
        })
        .collect::<Result<_>>()?;
    Ok(SvtResult {
        best_fidelity: fid(&best_state)?,
        best_state: State::Dense(best_state),
        best_x,
        best_iteration,
        final_state: State::Dense(v),
        final_coefficients: CoefficientVector::from_values(Arc::clone(table), coeffs)?,
        trajectory,
        checkpoint_elapsed,
        config: config.clone(),
        elapsed: start.elapsed(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pauli::{dense_of_string, enumerate_window_strings, PauliAxis};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn w_state(n: usize) -> DenseState {
        let mut amps = vec![c(0.0, 0.0); 1 << n];
        for j in 0..n {
            amps[1 << j] = c(1.0 / (n as f64).sqrt(), 0.0);
        }
        DenseState::new(n, amps).unwrap()
    }

    #[test]
    fn single_qubit_actions() {
        let zero = DenseState::from_bits("0").unwrap();
        let one = DenseState::from_bits("1").unwrap();
        let x = PauliString::from_label("X").unwrap();
        let y = PauliString::from_label("Y").unwrap();
        let z = PauliString::from_label("Z").unwrap();
        assert_eq!(apply_string(&x, &zero).unwrap(), one);
        assert_eq!(apply_string(&z, &one).unwrap().amplitudes(), &[c(0.0, 0.0), c(-1.0, 0.0)]);
        assert_eq!(apply_string(&y, &zero).unwrap().amplitudes(), &[c(0.0, 0.0), c(0.0, 1.0)]);
        let wide = PauliString::from_label("XX").unwrap();
        assert!(apply_string(&wide, &zero).is_err());
    }

    #[test]
    fn apply_sum_edge_cases_and_oracle() {
        let table = Arc::new(enumerate_window_strings(4, 2).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let s = DenseState::random(4, &mut rng).unwrap();

        let mut a = CoefficientVector::zeros(Arc::clone(&table));
        assert!(apply_sum(&a, &s).unwrap().iter().all(|v| v.norm() == 0.0));
        a.add(&PauliString::identity(4), 1.0).unwrap();
        assert_eq!(apply_sum(&a, &s).unwrap(), s.amplitudes());

        let values: Vec<f64> = (0..table.len()).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let a = CoefficientVector::from_values(Arc::clone(&table), values).unwrap();
        // oracle: explicit sum of dense string matrices
        let mut m = DMatrix::zeros(16, 16);
        for (p, &ak) in table.strings().iter().zip(a.values()) {
            m += dense_of_string(p).unwrap() * c(ak, 0.0);
        }
        let expected = m * DVector::from_column_slice(s.amplitudes());
        let got = apply_sum(&a, &s).unwrap();
        let err = got.iter().zip(expected.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        assert!(err <= 1e-12, "{err}");
    }

    #[test]
    fn extremal_examples() {
        let table = Arc::new(enumerate_window_strings(3, 2).unwrap());
        let mut a = CoefficientVector::zeros(Arc::clone(&table));
        for j in 1..=3 {
            a.add(&PauliString::new(3, [(j, PauliAxis::Z)]).unwrap(), 1.0).unwrap();
        }
        let top = extremal_eigenstate(&a, Extremum::Max, 1e-10).unwrap();
        assert!((top.value - 3.0).abs() < 1e-10);
        assert!(fidelity(&top.state, &DenseState::from_bits("000").unwrap()).unwrap() > 1.0 - 1e-12);
        assert!(top.residual <= 1e-10);

        let t2 = Arc::new(enumerate_window_strings(2, 2).unwrap());
        let mut ising = CoefficientVector::zeros(t2);
        ising.add(&PauliString::from_label("XX").unwrap(), -1.0).unwrap();
        ising.add(&PauliString::from_label("ZI").unwrap(), -1.0).unwrap();
        ising.add(&PauliString::from_label("IZ").unwrap(), -1.0).unwrap();
        let low = extremal_eigenstate(&ising, Extremum::Min, 1e-10).unwrap();
        assert!((low.value + 5f64.sqrt()).abs() < 1e-10);

        let zero = extremal_eigenstate(&CoefficientVector::zeros(table), Extremum::Max, 1e-10).unwrap();
        assert_eq!(zero.value, 0.0);
        assert!(zero.degenerate);
        assert_eq!(zero.state, DenseState::basis(3, 0).unwrap());
    }

    #[test]
    fn extremal_matches_full_diagonalization() {
        let table = Arc::new(enumerate_window_strings(6, 2).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let values = (0..table.len()).map(|_| rng.random::<f64>() - 0.5).collect();
            let a = CoefficientVector::from_values(Arc::clone(&table), values).unwrap();
            let eig = SymmetricEigen::new(a.to_dense().unwrap());
            let top = extremal_eigenstate(&a, Extremum::Max, 1e-10).unwrap();
            assert!((top.value - eig.eigenvalues.max()).abs() < 1e-9);
            let bottom = extremal_eigenstate(&a, Extremum::Min, 1e-10).unwrap();
            assert!((bottom.value - eig.eigenvalues.min()).abs() < 1e-9);
        }
    }

    #[test]
    fn partial_trace_examples() {
        let s2 = std::f64::consts::FRAC_1_SQRT_2;
        let bell = DenseState::new(2, vec![c(s2, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(s2, 0.0)]).unwrap();
        let rho = partial_trace(&bell, Window::new(1, 1, 2).unwrap()).unwrap();
        assert!((rho.matrix() - DMatrix::<C64>::identity(2, 2) * c(0.5, 0.0)).norm() < 1e-15);

        let s01 = DenseState::from_bits("01").unwrap();
        let rho = partial_trace(&s01, Window::new(2, 1, 2).unwrap()).unwrap();
        assert_eq!(rho.matrix()[(1, 1)], c(1.0, 0.0));
        assert_eq!(rho.matrix()[(0, 0)], c(0.0, 0.0));

        // W state on 3 sites, reduction to sites {1,2}.
        let rho = partial_trace(&w_state(3), Window::new(1, 2, 3).unwrap()).unwrap();
        let mut expected = DMatrix::zeros(4, 4);
        expected[(0, 0)] = c(1.0 / 3.0, 0.0);
        for i in [1, 2] {
            for j in [1, 2] {
                expected[(i, j)] = c(1.0 / 3.0, 0.0);
            }
        }
        assert!((rho.matrix() - expected).norm() < 1e-15);

        assert!(partial_trace(&s01, Window::new(2, 2, 3).unwrap()).is_err());
    }

    #[test]
    fn fidelity_examples() {
        let w = w_state(3);
        assert!((fidelity(&w, &w).unwrap() - 1.0).abs() < 1e-15);
        let zero = DenseState::from_bits("0").unwrap();
        let one = DenseState::from_bits("1").unwrap();
        assert_eq!(fidelity(&zero, &one).unwrap(), 0.0);
        let f = fidelity(&w, &DenseState::from_bits("100").unwrap()).unwrap();
        assert!((f - 1.0 / 3.0).abs() < 1e-15);
        assert!(fidelity(&w, &zero).is_err());
    }

    #[test]
    fn shrink_standard_examples() {
        let y = DMatrix::from_diagonal(&DVector::from_vec(vec![c(3.0, 0.0), c(1.0, 0.0)]));
        let s = shrink_standard(&y, 2.0).unwrap();
        let expected = DMatrix::from_diagonal(&DVector::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)]));
        assert!((s - expected).norm() < 1e-14);

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = DMatrix::from_fn(6, 6, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let psd = &a * a.adjoint();
        assert!((shrink_standard(&psd, 0.0).unwrap() - &psd).norm() < 1e-12);
    }

    #[test]
    fn shrink_top_examples() {
        let d = |a: f64, b: f64| DMatrix::from_diagonal(&DVector::from_vec(vec![c(a, 0.0), c(b, 0.0)]));
        let t = shrink_top(&d(3.0, 1.0)).unwrap();
        assert_eq!(t.value, 3.0);
        assert_eq!(t.vector[0], c(1.0, 0.0));
        let t = shrink_top(&d(-5.0, 2.0)).unwrap();
        assert_eq!(t.value, 2.0);
        assert!((t.vector[1] - c(1.0, 0.0)).norm() < 1e-15);
        let t = shrink_top(&d(1.0, 1.0)).unwrap();
        assert_eq!(t.value, 1.0);
        assert!((t.vector[0] - c(1.0, 0.0)).norm() < 1e-15);
        assert!(t.degenerate);
        let t = shrink_top(&DMatrix::zeros(2, 2)).unwrap();
        assert_eq!(t.value, 0.0);
        assert!(t.degenerate);
        assert_eq!(t.vector[0], c(1.0, 0.0));
    }

    fn zero_record(n: usize) -> (MeasurementRecord, State) {
        let target = State::Dense(DenseState::basis(n, 0).unwrap());
        let table = Arc::new(enumerate_window_strings(n, 2).unwrap());
        (crate::measure::measure_all(&target, table, "zeros").unwrap(), target)
    }

    #[test]
    fn reference_loop_recovers_product_state() {
        let (record, target) = zero_record(4);
        let config = SvtConfig {
            n_max: 50,
            ..SvtConfig::default()
        };
        let res = svt_reference_loop(&record, &config, Some(&target)).unwrap();
        let last = res.trajectory.last().unwrap();
        assert_eq!(last.n, 50);
        assert!(last.fidelity.unwrap() >= 1.0 - 1e-6, "{:?}", last.fidelity);
    }

    #[test]
    fn reference_loop_without_iterations() {
        let (record, target) = zero_record(4);
        let config = SvtConfig {
            n_max: 0,
            init: crate::svt::InitMode::Target,
            ..SvtConfig::default()
        };
        let res = svt_reference_loop(&record, &config, Some(&target)).unwrap();
        assert_eq!(res.trajectory.len(), 1);
        assert_eq!(res.trajectory[0].x, 0.0);
        assert!((res.final_state.fidelity(&target).unwrap() - 1.0).abs() < 1e-15);
    }
}
