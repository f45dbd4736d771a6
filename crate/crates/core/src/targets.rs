//! Target states: locally rotated critical Ising ground states, ground states
//! of random nearest-neighbour Hamiltonians and W states.

use std::f64::consts::FRAC_PI_8;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dense::{check_limit, extremal_eigenstate, extremal_eigenstate_from, DenseState};
use crate::error::{Error, Result};
use crate::krylov::{self, Extremum, KrylovOptions};
use crate::mps::w_state_mps;
use crate::pauli::{enumerate_window_strings, CoefficientVector, PauliAxis, PauliString};
use crate::state::State;
use crate::{C64, DEFAULT_DENSE_LIMIT};

/// 2×2 matrix, row-major.
pub type Mat2 = [[C64; 2]; 2];

/// Residual target for exact ground states.
const GROUND_TOL: f64 = 1e-11;
/// Ground levels closer than this count as degenerate.
const GAP_MIN: f64 = 1e-8;
const MAX_RESAMPLES: u64 = 10;

fn mat2_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut out = [[C64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

fn adjoint(a: &Mat2) -> Mat2 {
    [[a[0][0].conj(), a[1][0].conj()], [a[0][1].conj(), a[1][1].conj()]]
}

/// `exp(-i θ σ) = cos θ · 1 - i sin θ · σ`
fn axis_rotation(axis: PauliAxis, theta: f64) -> Mat2 {
    let s = axis.matrix();
    let (c, sn) = (theta.cos(), theta.sin());
    let mut out = [[C64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            let id = if i == j { c } else { 0.0 };
            out[i][j] = C64::new(id, 0.0) + C64::new(0.0, -sn) * s[i][j];
        }
    }
    out
}

/// The same single-qubit unitary on every site.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LocalRotation {
    u: Mat2,
}

impl LocalRotation {
    pub fn new(u: Mat2) -> Result<Self> {
        let p = mat2_mul(&adjoint(&u), &u);
        let mut err: f64 = 0.0;
        for (i, row) in p.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                let id = if i == j { 1.0 } else { 0.0 };
                err = err.max((v - C64::new(id, 0.0)).norm());
            }
        }
        if err > 1e-12 {
            return Err(Error::NotUnitary(err));
        }
        Ok(LocalRotation { u })
    }

    pub fn identity() -> Self {
        LocalRotation {
            u: PauliAxis::I.matrix(),
        }
    }

    pub fn matrix(&self) -> &Mat2 {
        &self.u
    }
}

impl Default for LocalRotation {
    /// `exp(-iπ/8 σz) · exp(-iπ/8 σy) · exp(-iπ/8 σx)`
    fn default() -> Self {
        let z = axis_rotation(PauliAxis::Z, FRAC_PI_8);
        let y = axis_rotation(PauliAxis::Y, FRAC_PI_8);
        let x = axis_rotation(PauliAxis::X, FRAC_PI_8);
        LocalRotation {
            u: mat2_mul(&mat2_mul(&z, &y), &x),
        }
    }
}

/// `U^{⊗N} |s>`
pub fn apply_local_rotation(s: &DenseState, r: &LocalRotation) -> Result<DenseState> {
    let n = s.n_sites();
    let mut amps = s.amplitudes().to_vec();
    let u = r.u;
    for site in 1..=n {
        let bit = 1usize << (n - site);
        for b in 0..amps.len() {
            if b & bit != 0 {
                continue;
            }
            let (a0, a1) = (amps[b], amps[b | bit]);
            amps[b] = u[0][0] * a0 + u[0][1] * a1;
            amps[b | bit] = u[1][0] * a0 + u[1][1] * a1;
        }
    }
    DenseState::new(n, amps)
}

fn nn_table(n_sites: usize) -> Result<Arc<crate::pauli::StringTable>> {
    if n_sites < 2 {
        return Err(Error::InvalidArgument("targets need at least 2 sites".into()));
    }
    Ok(Arc::new(enumerate_window_strings(n_sites, 2)?))
}

/// `-Σ_i σx_i σx_{i+1} - Σ_i σz_i` on an open chain.
pub fn ising_critical(n_sites: usize) -> Result<CoefficientVector> {
    let mut a = CoefficientVector::zeros(nn_table(n_sites)?);
    for i in 1..=n_sites {
        a.add(&PauliString::new(n_sites, [(i, PauliAxis::Z)])?, -1.0)?;
        if i < n_sites {
            a.add(&PauliString::new(n_sites, [(i, PauliAxis::X), (i + 1, PauliAxis::X)])?, -1.0)?;
        }
    }
    Ok(a)
}

fn random_hermitian<R: Rng>(rng: &mut R) -> Mat2 {
    let mut m = [[C64::new(0.0, 0.0); 2]; 2];
    for row in &mut m {
        for v in row.iter_mut() {
            let re = rng.random_range(-1.0..=1.0);
            let im = rng.random_range(-1.0..=1.0);
            *v = C64::new(re, im);
        }
    }
    let h = adjoint(&m);
    let mut out = [[C64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = (m[i][j] + h[i][j]) * 0.5;
        }
    }
    out
}

/// Per-bond factors `(r_i, r'_i)` of the random Hamiltonian `Σ_i r_i ⊗ r'_i`,
/// drawn from the ChaCha8 stream `stream` of `seed`.
pub fn random_bond_factors(n_sites: usize, seed: u64, stream: u64) -> Vec<(Mat2, Mat2)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    (1..n_sites)
        .map(|_| {
            let a = random_hermitian(&mut rng);
            let b = random_hermitian(&mut rng);
            (a, b)
        })
        .collect()
}

/// `tr(r σ) / 2` for each axis; real for hermitian `r`.
fn pauli_components(r: &Mat2) -> [f64; 4] {
    let mut c = [0.0; 4];
    for axis in PauliAxis::ALL {
        let s = axis.matrix();
        let mut tr = C64::new(0.0, 0.0);
        for i in 0..2 {
            for j in 0..2 {
                tr += r[i][j] * s[j][i];
            }
        }
        c[axis.index()] = tr.re / 2.0;
    }
    c
}

fn hamiltonian_from_factors(n_sites: usize, factors: &[(Mat2, Mat2)]) -> Result<CoefficientVector> {
    let mut a = CoefficientVector::zeros(nn_table(n_sites)?);
    for (i, (r1, r2)) in factors.iter().enumerate() {
        let (c1, c2) = (pauli_components(r1), pauli_components(r2));
        for ax in PauliAxis::ALL {
            for bx in PauliAxis::ALL {
                let p = PauliString::new(n_sites, [(i + 1, ax), (i + 2, bx)])?;
                a.add(&p, c1[ax.index()] * c2[bx.index()])?;
            }
        }
    }
    Ok(a)
}

/// Random nearest-neighbour Hamiltonian `Σ_i r_i ⊗ r'_i` with independent
/// hermitian factors whose entries have real and imaginary parts uniform in
/// `[-1, 1]`.
pub fn random_nn_hamiltonian(n_sites: usize, seed: u64) -> Result<CoefficientVector> {
    random_nn_hamiltonian_stream(n_sites, seed, 0)
}

pub fn random_nn_hamiltonian_stream(n_sites: usize, seed: u64, stream: u64) -> Result<CoefficientVector> {
    nn_table(n_sites)?;
    hamiltonian_from_factors(n_sites, &random_bond_factors(n_sites, seed, stream))
}

/// `(|10…0> + |010…0> + … + |0…01>) / √N`
pub fn w_state_dense(n_sites: usize) -> Result<DenseState> {
    if n_sites < 2 {
        return Err(Error::InvalidArgument("W state needs at least 2 sites".into()));
    }
    check_limit(n_sites, DEFAULT_DENSE_LIMIT)?;
    let amp = C64::new(1.0 / (n_sites as f64).sqrt(), 0.0);
    let mut amps = vec![C64::new(0.0, 0.0); 1usize << n_sites];
    for j in 0..n_sites {
        amps[1usize << j] = amp;
    }
    DenseState::new(n_sites, amps)
}

#[derive(Clone, Debug, PartialEq)]
pub enum TargetKind {
    Ising { rotated: bool },
    Random { seed: u64 },
    WState,
    Custom(State),
}

#[derive(Clone, Debug, PartialEq)]
pub struct TargetSpec {
    pub kind: TargetKind,
    pub n_sites: usize,
}

#[derive(Clone, Debug)]
pub struct Target {
    /// Native representation: dense for Hamiltonian targets, MPS for W states.
    pub state: State,
    /// Dense copy when the chain is small enough.
    pub dense: Option<DenseState>,
    pub label: String,
    /// Parent Hamiltonian and its ground energy, for Hamiltonian targets.
    pub hamiltonian: Option<(CoefficientVector, f64)>,
}

/// Lowest two levels of `h`, the second from the operator deflated by the
/// ground state.
fn ground_and_gap(h: &CoefficientVector) -> Result<(DenseState, f64, f64)> {
    let ground = extremal_eigenstate(h, Extremum::Min, GROUND_TOL)?;
    let op = crate::dense::SumOperator::new(h);
    let dim = ground.state.amplitudes().len();
    if dim <= 1 {
        return Ok((ground.state, ground.value, f64::INFINITY));
    }
    let g = ground.state.amplitudes().to_vec();
    let shift = h.values().iter().map(|v| v.abs()).sum::<f64>() * 2.0 + 1.0;
    let apply = |x: &[C64], y: &mut [C64]| {
        op.apply(x, y);
        let c = krylov::dot(&g, x) * shift;
        for (yi, gi) in y.iter_mut().zip(&g) {
            *yi += c * gi;
        }
    };
    let opts = KrylovOptions::new(GROUND_TOL, 10 * dim);
    let second = krylov::extremal_eigenpair(dim, apply, None, Extremum::Min, &opts)?;
    Ok((ground.state, ground.value, second.value - ground.value))
}

pub fn make_target(spec: &TargetSpec) -> Result<Target> {
    let n = spec.n_sites;
    if n < 2 {
        return Err(Error::InvalidArgument("targets need at least 2 sites".into()));
    }
    match &spec.kind {
        TargetKind::Ising { rotated } => {
            check_limit(n, DEFAULT_DENSE_LIMIT)?;
            let h = ising_critical(n)?;
            let g = extremal_eigenstate_from(&h, Extremum::Min, GROUND_TOL, None, DEFAULT_DENSE_LIMIT)?;
            let state = if *rotated {
                apply_local_rotation(&g.state, &LocalRotation::default())?
            } else {
                g.state
            };
            let label = if *rotated { "ising-rotated" } else { "ising" };
            Ok(Target {
                state: State::Dense(state.clone()),
                dense: Some(state),
                label: format!("{label} N={n}"),
                hamiltonian: Some((h, g.value)),
            })
        }
        TargetKind::Random { seed } => {
            check_limit(n, DEFAULT_DENSE_LIMIT)?;
            for stream in 0..=MAX_RESAMPLES {
                let h = random_nn_hamiltonian_stream(n, *seed, stream)?;
                let (state, energy, gap) = ground_and_gap(&h)?;
                if gap >= GAP_MIN {
                    return Ok(Target {
                        state: State::Dense(state.clone()),
                        dense: Some(state),
                        label: format!("random N={n} seed={seed} stream={stream}"),
                        hamiltonian: Some((h, energy)),
                    });
                }
            }
            Err(Error::DegenerateGroundState {
                seed: *seed,
                attempts: MAX_RESAMPLES as usize + 1,
            })
        }
        TargetKind::WState => {
            let dense = if n <= DEFAULT_DENSE_LIMIT {
                Some(w_state_dense(n)?)
            } else {
                None
            };
            Ok(Target {
                state: State::Mps(w_state_mps(n)?),
                dense,
                label: format!("wstate N={n}"),
                hamiltonian: None,
            })
        }
        TargetKind::Custom(state) => {
            if state.n_sites() != n {
                return Err(Error::SizeMismatch {
                    expected: n,
                    found: state.n_sites(),
                });
            }
            let dense = if n <= DEFAULT_DENSE_LIMIT {
                Some(state.to_dense()?)
            } else {
                None
            };
            Ok(Target {
                state: state.clone(),
                dense,
                label: format!("custom N={n}"),
                hamiltonian: None,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::{apply_string, fidelity};
    use nalgebra::DMatrix;

    fn to_dmatrix(m: &Mat2) -> DMatrix<C64> {
        DMatrix::from_fn(2, 2, |i, j| m[i][j])
    }

    #[test]
    fn ising_terms() {
        let a = ising_critical(2).unwrap();
        let nz: Vec<f64> = a.values().iter().copied().filter(|&v| v != 0.0).collect();
        assert_eq!(nz, vec![-1.0; 3]);
        let g = extremal_eigenstate(&a, Extremum::Min, 1e-12).unwrap();
        assert!((g.value + 5f64.sqrt()).abs() < 1e-10);
        assert!(ising_critical(1).is_err());
    }

    #[test]
    fn rotation_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = DenseState::random(4, &mut rng).unwrap();
        let same = apply_local_rotation(&s, &LocalRotation::identity()).unwrap();
        assert!((fidelity(&s, &same).unwrap() - 1.0).abs() < 1e-12);

        let r = LocalRotation::default();
        let rs = apply_local_rotation(&s, &r).unwrap();
        assert!((rs.norm() - 1.0).abs() < 1e-12);

        // <Us|P|Us> = <s|U†PU|s> with U = u^{⊗4}
        let u = to_dmatrix(r.matrix());
        let mut big = DMatrix::from_element(1, 1, C64::new(1.0, 0.0));
        for _ in 0..4 {
            big = big.kronecker(&u);
        }
        let v = nalgebra::DVector::from_column_slice(s.amplitudes());
        let table = enumerate_window_strings(4, 2).unwrap();
        for p in table.strings() {
            let pm = crate::pauli::dense_of_string(p).unwrap();
            let conj = big.adjoint() * pm * &big;
            let expected = (v.adjoint() * conj * &v)[(0, 0)].re;
            assert!((rs.expectation(p).unwrap() - expected).abs() < 1e-10);
        }

        let bad = [[C64::new(2.0, 0.0), C64::new(0.0, 0.0)], [C64::new(0.0, 0.0), C64::new(1.0, 0.0)]];
        assert!(matches!(LocalRotation::new(bad), Err(Error::NotUnitary(_))));
    }

    #[test]
    fn rotation_preserves_fidelity() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = DenseState::random(5, &mut rng).unwrap();
        let b = DenseState::random(5, &mut rng).unwrap();
        let r = LocalRotation::default();
        let before = fidelity(&a, &b).unwrap();
        let after = fidelity(&apply_local_rotation(&a, &r).unwrap(), &apply_local_rotation(&b, &r).unwrap()).unwrap();
        assert!((before - after).abs() < 1e-12);
    }

    #[test]
    fn random_hamiltonian_matches_kronecker() {
        let n = 4;
        let factors = random_bond_factors(n, 17, 0);
        for (a, b) in &factors {
            assert_eq!(*a, adjoint(a));
            assert_eq!(*b, adjoint(b));
        }
        let h = random_nn_hamiltonian(n, 17).unwrap();
        assert_eq!(h, random_nn_hamiltonian(n, 17).unwrap());
        assert_ne!(h, random_nn_hamiltonian(n, 18).unwrap());
        let id2 = DMatrix::<C64>::identity(2, 2);
        let mut oracle = DMatrix::<C64>::zeros(16, 16);
        for (i, (a, b)) in factors.iter().enumerate() {
            let mut term = DMatrix::from_element(1, 1, C64::new(1.0, 0.0));
            for site in 0..n {
                let f = if site == i {
                    to_dmatrix(a)
                } else if site == i + 1 {
                    to_dmatrix(b)
                } else {
                    id2.clone()
                };
                term = term.kronecker(&f);
            }
            oracle += term;
        }
        assert!((h.to_dense().unwrap() - oracle).norm() < 1e-12);
    }

    #[test]
    fn w_state_forms() {
        let w2 = w_state_dense(2).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((w2.amplitudes()[1] - C64::new(s, 0.0)).norm() < 1e-15);
        assert_eq!(w2.amplitudes()[0], C64::new(0.0, 0.0));
        for n in 2..=10 {
            let d = w_state_dense(n).unwrap();
            assert!((d.norm() - 1.0).abs() < 1e-15);
            let m = w_state_mps(n).unwrap().to_dense().unwrap();
            assert!((fidelity(&d, &m).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn make_targets() {
        let t = make_target(&TargetSpec {
            kind: TargetKind::WState,
            n_sites: 20,
        })
        .unwrap();
        match &t.state {
            State::Mps(m) => assert!(m.max_bond() <= 2),
            _ => panic!("W state should be an MPS"),
        }
        assert!(t.dense.is_none());

        let t = make_target(&TargetSpec {
            kind: TargetKind::Ising { rotated: false },
            n_sites: 2,
        })
        .unwrap();
        let (h, e) = t.hamiltonian.clone().unwrap();
        assert!((e + 5f64.sqrt()).abs() < 1e-10);
        let hd = t.dense.as_ref().unwrap();
        let applied = crate::dense::apply_sum(&h, hd).unwrap();
        let energy = crate::krylov::dot(hd.amplitudes(), &applied).re;
        assert!((energy - e).abs() < 1e-10);

        let t = make_target(&TargetSpec {
            kind: TargetKind::Random { seed: 7 },
            n_sites: 6,
        })
        .unwrap();
        let d = t.dense.unwrap();
        assert!((d.norm() - 1.0).abs() < 1e-12);
        let (h, e) = t.hamiltonian.unwrap();
        let exact = extremal_eigenstate(&h, Extremum::Min, 1e-11).unwrap().value;
        assert!((e - exact).abs() < 1e-9);
        let _ = apply_string(&PauliString::identity(6), &d).unwrap();
    }
}
