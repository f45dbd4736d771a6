//! Matrix-free extremal eigensolver for hermitian operators.
//!
//! The search space is grown with the residual of the current extremal Ritz
//! pair and kept fully reorthogonalized (two Gram-Schmidt passes), which spans
//! the same space as Lanczos without its loss of orthogonality. When the
//! basis reaches `max_basis` vectors it is thick-restarted on the `keep`
//! extremal Ritz vectors. Convergence is certified by an explicit residual
//! `|A x - θ x|` computed from a fresh product.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::C64;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Extremum {
    Max,
    Min,
}

#[derive(Clone, Copy, Debug)]
pub struct KrylovOptions {
    pub tol: f64,
    pub max_matvecs: usize,
    pub max_basis: usize,
    pub keep: usize,
    /// Return the best Ritz pair instead of an error when the matvec budget
    /// runs out.
    pub accept_unconverged: bool,
}

impl KrylovOptions {
    pub fn new(tol: f64, max_matvecs: usize) -> Self {
        KrylovOptions {
            tol,
            max_matvecs,
            max_basis: 40,
            keep: 6,
            accept_unconverged: false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Eigenpair {
    pub value: f64,
    pub vector: Vec<C64>,
    pub residual: f64,
    pub matvecs: usize,
}

pub(crate) fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub(crate) fn norm(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

fn axpy(y: &mut [C64], alpha: C64, x: &[C64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn scale(x: &mut [C64], s: f64) {
    for v in x.iter_mut() {
        *v *= s;
    }
}

/// Deterministic pseudo-random unit vector.
pub(crate) fn seeded_vector(dim: usize, seed: u64) -> Vec<C64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<C64> = (0..dim)
        .map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
        .collect();
    let n = norm(&v);
    scale(&mut v, 1.0 / n);
    v
}

/// Orthogonalizes `t` against the orthonormal `basis` twice and returns the
/// remaining norm (before normalization).
fn orthogonalize(basis: &[Vec<C64>], t: &mut [C64]) -> f64 {
    for _ in 0..2 {
        for b in basis {
            let c = dot(b, t);
            axpy(t, -c, b);
        }
    }
    norm(t)
}

fn combine(basis: &[Vec<C64>], coeffs: impl Iterator<Item = C64>, dim: usize) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); dim];
    for (b, c) in basis.iter().zip(coeffs) {
        axpy(&mut out, c, b);
    }
    out
}

/// Extremal eigenpair of the hermitian operator applied by `apply(x, y)`
/// (`y = A x`, `y` zeroed by the caller's contract is not assumed).
pub fn extremal_eigenpair<F>(
    dim: usize,
    mut apply: F,
    start: Option<&[C64]>,
    which: Extremum,
    opts: &KrylovOptions,
) -> Result<Eigenpair>
where
    F: FnMut(&[C64], &mut [C64]),
{
    if dim == 0 {
        return Err(Error::InvalidArgument("empty operator".into()));
    }
    let mut matvecs = 0usize;
    let mut mul = |x: &[C64], matvecs: &mut usize| {
        let mut y = vec![C64::new(0.0, 0.0); dim];
        apply(x, &mut y);
        *matvecs += 1;
        y
    };

    let mut v0 = match start {
        Some(s) if s.len() == dim && norm(s) > 1e-300 => s.to_vec(),
        Some(s) if s.len() != dim => {
            return Err(Error::SizeMismatch {
                expected: dim,
                found: s.len(),
            })
        }
        _ => seeded_vector(dim, 0x5eed),
    };
    let n0 = norm(&v0);
    scale(&mut v0, 1.0 / n0);

    let mut basis: Vec<Vec<C64>> = Vec::new();
    let mut images: Vec<Vec<C64>> = Vec::new();
    let w0 = mul(&v0, &mut matvecs);
    basis.push(v0);
    images.push(w0);

    let max_basis = opts.max_basis.max(opts.keep + 2).min(dim);
    let mut last_residual = f64::INFINITY;

    loop {
        let m = basis.len();
        let h = DMatrix::from_fn(m, m, |i, j| dot(&basis[i], &images[j]));
        let h = (&h + h.adjoint()) * C64::new(0.5, 0.0);
        let eig = SymmetricEigen::new(h);
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| {
            let (ea, eb) = (eig.eigenvalues[a], eig.eigenvalues[b]);
            match which {
                Extremum::Max => eb.total_cmp(&ea),
                Extremum::Min => ea.total_cmp(&eb),
            }
        });
        let top = order[0];
        let theta = eig.eigenvalues[top];
        if !theta.is_finite() {
            return Err(Error::NonFinite("Ritz value"));
        }
        let s = eig.eigenvectors.column(top);
        let x = combine(&basis, s.iter().copied(), dim);
        let ax = combine(&images, s.iter().copied(), dim);
        let mut r = ax.clone();
        axpy(&mut r, C64::new(-theta, 0.0), &x);
        let rnorm = norm(&r);
        last_residual = last_residual.min(rnorm);

        let exhausted = m == dim;
        if rnorm <= opts.tol || exhausted {
            // Certify with a fresh product; accumulated images can drift.
            let mut x = x;
            let xn = norm(&x);
            scale(&mut x, 1.0 / xn);
            let ax = mul(&x, &mut matvecs);
            let value = dot(&x, &ax).re;
            let mut r = ax.clone();
            axpy(&mut r, C64::new(-value, 0.0), &x);
            let residual = norm(&r);
            if residual <= opts.tol || (exhausted && residual <= opts.tol.max(1e-10)) {
                return Ok(Eigenpair {
                    value,
                    vector: x,
                    residual,
                    matvecs,
                });
            }
            if matvecs >= opts.max_matvecs {
                if opts.accept_unconverged {
                    return Ok(Eigenpair {
                        value,
                        vector: x,
                        residual,
                        matvecs,
                    });
                }
                return Err(Error::NoConvergence { matvecs, residual });
            }
            // Restart from the certified vector.
            basis = vec![x];
            images = vec![ax];
            continue;
        }
        if matvecs >= opts.max_matvecs {
            if opts.accept_unconverged {
                let xn = norm(&x);
                let mut x = x;
                scale(&mut x, 1.0 / xn);
                return Ok(Eigenpair {
                    value: theta,
                    vector: x,
                    residual: rnorm / xn,
                    matvecs,
                });
            }
            return Err(Error::NoConvergence {
                matvecs,
                residual: last_residual,
            });
        }

        if m >= max_basis {
            let keep = opts.keep.min(m - 1).max(1);
            let mut nb = Vec::with_capacity(max_basis);
            let mut ni = Vec::with_capacity(max_basis);
            for &col in order.iter().take(keep) {
                let c = eig.eigenvectors.column(col);
                nb.push(combine(&basis, c.iter().copied(), dim));
                ni.push(combine(&images, c.iter().copied(), dim));
            }
            basis = nb;
            images = ni;
        }

        let mut t = r;
        let tn = orthogonalize(&basis, &mut t);
        if tn <= 1e-14 * rnorm.max(1e-300) {
            // Residual already lies in the basis; fall back to a fresh direction.
            t = seeded_vector(dim, matvecs as u64);
            let tn2 = orthogonalize(&basis, &mut t);
            if tn2 <= 1e-12 {
                return Err(Error::NoConvergence {
                    matvecs,
                    residual: rnorm,
                });
            }
            scale(&mut t, 1.0 / tn2);
        } else {
            scale(&mut t, 1.0 / tn);
        }
        let at = mul(&t, &mut matvecs);
        basis.push(t);
        images.push(at);
    }
}

/// Rotates `v` by a global phase so its first largest-magnitude entry is
/// real and positive.
pub fn fix_phase(v: &mut [C64]) {
    let max = v.iter().map(|c| c.norm()).fold(0.0, f64::max);
    if max == 0.0 {
        return;
    }
    if let Some(pivot) = v.iter().find(|c| c.norm() >= max * (1.0 - 1e-9)) {
        let phase = pivot.conj() / pivot.norm();
        for c in v.iter_mut() {
            *c *= phase;
        }
    }
}
