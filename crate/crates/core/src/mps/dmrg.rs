//! Two-site variational extremal eigensolver.

use nalgebra::DMatrix;

use super::mpo::Mpo;
use super::tensor::{svd_truncated, Tensor3, Tensor4};
use super::Mps;
use crate::error::{Error, Result};
use crate::krylov::{extremal_eigenpair, Extremum, KrylovOptions};
use crate::C64;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

#[derive(Clone, Copy, Debug)]
pub struct DmrgOptions {
    pub chi_max: usize,
    pub sweeps: usize,
    /// Sweep-to-sweep improvement (relative) below which the run counts as
    /// converged; also the residual target of the local solves.
    pub tol: f64,
    /// Singular values below `cutoff · s_max` are dropped.
    pub cutoff: f64,
    pub max_local_matvecs: usize,
}

impl Default for DmrgOptions {
    fn default() -> Self {
        DmrgOptions {
            chi_max: 32,
            sweeps: 2,
            tol: 1e-10,
            cutoff: 1e-10,
            max_local_matvecs: 300,
        }
    }
}

#[derive(Clone, Debug)]
pub struct DmrgResult {
    pub value: f64,
    pub state: Mps,
    /// Rayleigh quotient of the initial state followed by one entry per
    /// accepted sweep.
    pub sweep_values: Vec<f64>,
    pub converged: bool,
    pub matvecs: usize,
}

/// Environment block `E[bra, mpo, ket]`.
#[derive(Clone, Debug)]
pub(crate) struct Env {
    bra: usize,
    mpo: usize,
    ket: usize,
    pub(crate) data: Vec<C64>,
}

impl Env {
    pub(crate) fn trivial() -> Env {
        Env {
            bra: 1,
            mpo: 1,
            ket: 1,
            data: vec![C64::new(1.0, 0.0)],
        }
    }
}

/// Absorbs site tensor `a` (as bra and ket) and operator `w` into a left
/// environment.
pub(crate) fn extend_left(env: &Env, a: &Tensor3, w: &Tensor4) -> Env {
    let (al, wl, ar, wr) = (a.left, w.left, a.right, w.right);
    debug_assert_eq!(env.bra, al);
    debug_assert_eq!(env.mpo, wl);
    // t1[a, w1, t, c'] = Σ_a' E[a, w1, a'] A[a', t, c']
    let row = 2 * ar;
    let mut t1 = vec![ZERO; al * wl * row];
    for x in 0..al * wl {
        let dst = &mut t1[x * row..(x + 1) * row];
        for y in 0..env.ket {
            let e = env.data[x * env.ket + y];
            if e == ZERO {
                continue;
            }
            for (d, s) in dst.iter_mut().zip(&a.data[y * row..(y + 1) * row]) {
                *d += e * s;
            }
        }
    }
    // t2[a, s, w2, c'] = Σ W[w1, s, t, w2] t1[a, w1, t, c']
    let mut t2 = vec![ZERO; al * 2 * wr * ar];
    for (w1, s, t, w2, v) in w.nonzeros() {
        for x in 0..al {
            let src = &t1[((x * wl + w1) * 2 + t) * ar..((x * wl + w1) * 2 + t + 1) * ar];
            let off = ((x * 2 + s) * wr + w2) * ar;
            for (d, s) in t2[off..off + ar].iter_mut().zip(src) {
                *d += v * s;
            }
        }
    }
    // E'[c, w2, c'] = Σ_{a, s} conj(A[a, s, c]) t2[a, s, w2, c']
    let blk = wr * ar;
    let mut out = vec![ZERO; ar * blk];
    for xs in 0..al * 2 {
        let src = &t2[xs * blk..(xs + 1) * blk];
        for c in 0..ar {
            let ac = a.data[xs * ar + c].conj();
            if ac == ZERO {
                continue;
            }
            for (d, s) in out[c * blk..(c + 1) * blk].iter_mut().zip(src) {
                *d += ac * s;
            }
        }
    }
    Env {
        bra: ar,
        mpo: wr,
        ket: ar,
        data: out,
    }
}

/// Absorbs site tensor `b` and operator `w` into a right environment.
pub(crate) fn extend_right(env: &Env, b: &Tensor3, w: &Tensor4) -> Env {
    let (al, wl, br, wr) = (b.left, w.left, b.right, w.right);
    debug_assert_eq!(env.bra, br);
    debug_assert_eq!(env.mpo, wr);
    // t1[a', t, b, w2] = Σ_b' B[a', t, b'] E[b, w2, b']
    let mut t1 = vec![ZERO; al * 2 * br * wr];
    for at in 0..al * 2 {
        let brow = &b.data[at * br..(at + 1) * br];
        for bw in 0..br * wr {
            let erow = &env.data[bw * br..(bw + 1) * br];
            t1[at * br * wr + bw] = brow.iter().zip(erow).map(|(x, y)| x * y).sum();
        }
    }
    // t2[a', w1, s, b] = Σ W[w1, s, t, w2] t1[a', t, b, w2]
    let mut t2 = vec![ZERO; al * wl * 2 * br];
    for (w1, s, t, w2, v) in w.nonzeros() {
        for x in 0..al {
            for y in 0..br {
                t2[((x * wl + w1) * 2 + s) * br + y] += v * t1[((x * 2 + t) * br + y) * wr + w2];
            }
        }
    }
    // E'[a, w1, a'] = Σ_{s, b} conj(B[a, s, b]) t2[a', w1, s, b]
    let row = 2 * br;
    let mut out = vec![ZERO; al * wl * al];
    for x in 0..al {
        let brow = &b.data[x * row..(x + 1) * row];
        for w1 in 0..wl {
            for y in 0..al {
                let trow = &t2[(y * wl + w1) * row..(y * wl + w1 + 1) * row];
                out[(x * wl + w1) * al + y] = brow.iter().zip(trow).map(|(p, q)| p.conj() * q).sum();
            }
        }
    }
    Env {
        bra: al,
        mpo: wl,
        ket: al,
        data: out,
    }
}

/// Non-zero entries of the two-site operator `W1 · W2` as
/// `(w1, s1 s2, t1 t2, w3, value)`.
fn two_site_nonzeros(w1: &Tensor4, w2: &Tensor4) -> Vec<(usize, usize, usize, usize, C64)> {
    let (wl, wm, wr) = (w1.left, w1.right, w2.right);
    let mut dense = vec![ZERO; wl * 16 * wr];
    for (l, s1, t1, m, v1) in w1.nonzeros() {
        for r in 0..wr {
            for s2 in 0..2 {
                for t2 in 0..2 {
                    let v2 = w2.get(m, s2, t2, r);
                    if v2 != ZERO {
                        let s = s1 * 2 + s2;
                        let t = t1 * 2 + t2;
                        dense[((l * 4 + s) * 4 + t) * wr + r] += v1 * v2;
                    }
                }
            }
        }
    }
    debug_assert!(wm > 0);
    let mut out = Vec::new();
    for l in 0..wl {
        for s in 0..4 {
            for t in 0..4 {
                for r in 0..wr {
                    let v = dense[((l * 4 + s) * 4 + t) * wr + r];
                    if v != ZERO {
                        out.push((l, s, t, r, v));
                    }
                }
            }
        }
    }
    out
}

/// Effective two-site operator `L · W1 W2 · R` acting on `θ[a', t1 t2, c']`.
struct TwoSite<'a> {
    left: &'a Env,
    right: &'a Env,
    nz: Vec<(usize, usize, usize, usize, C64)>,
    scratch_x: Vec<C64>,
    scratch_y: Vec<C64>,
}

impl<'a> TwoSite<'a> {
    fn new(left: &'a Env, right: &'a Env, w1: &Tensor4, w2: &Tensor4) -> Self {
        TwoSite {
            left,
            right,
            nz: two_site_nonzeros(w1, w2),
            scratch_x: Vec::new(),
            scratch_y: Vec::new(),
        }
    }

    fn dim(&self) -> usize {
        self.left.ket * 4 * self.right.ket
    }

    fn apply(&mut self, theta: &[C64], out: &mut [C64]) {
        let (al, wl) = (self.left.bra, self.left.mpo);
        let (cr, wr) = (self.right.ket, self.right.mpo);
        let row = 4 * cr;
        // x[a, w1, t12, c'] = Σ_a' L[a, w1, a'] θ[a', t12, c']
        let x = &mut self.scratch_x;
        x.clear();
        x.resize(al * wl * row, ZERO);
        for aw in 0..al * wl {
            let dst = &mut x[aw * row..(aw + 1) * row];
            for y in 0..al {
                let e = self.left.data[aw * al + y];
                if e == ZERO {
                    continue;
                }
                for (d, s) in dst.iter_mut().zip(&theta[y * row..(y + 1) * row]) {
                    *d += e * s;
                }
            }
        }
        // y[a, s12, w3, c'] = Σ W12[w1, s12, t12, w3] x[a, w1, t12, c']
        let y = &mut self.scratch_y;
        y.clear();
        y.resize(al * 4 * wr * cr, ZERO);
        for &(w1, s, t, w3, v) in &self.nz {
            for a in 0..al {
                let src = ((a * wl + w1) * 4 + t) * cr;
                let dst = ((a * 4 + s) * wr + w3) * cr;
                for k in 0..cr {
                    y[dst + k] += v * x[src + k];
                }
            }
        }
        // out[a, s12, c] = Σ_{w3, c'} y[a, s12, w3, c'] R[c, w3, c']
        let blk = wr * cr;
        for as_ in 0..al * 4 {
            let yrow = &y[as_ * blk..(as_ + 1) * blk];
            for c in 0..cr {
                let rrow = &self.right.data[c * blk..(c + 1) * blk];
                out[as_ * cr + c] = yrow.iter().zip(rrow).map(|(p, q)| p * q).sum();
            }
        }
    }
}

fn two_site_theta(a: &Tensor3, b: &Tensor3) -> Vec<C64> {
    // θ[l, s, t, r] = Σ_m A[l, s, m] B[m, t, r]
    let row = 2 * b.right;
    let mut out = vec![ZERO; a.left * 2 * row];
    for ls in 0..a.left * 2 {
        let dst = &mut out[ls * row..(ls + 1) * row];
        for m in 0..a.right {
            let v = a.data[ls * a.right + m];
            if v == ZERO {
                continue;
            }
            for (d, s) in dst.iter_mut().zip(&b.data[m * row..(m + 1) * row]) {
                *d += v * s;
            }
        }
    }
    out
}

fn check_compatible(op: &Mpo, init: &Mps) -> Result<()> {
    if op.n_sites() != init.n_sites() {
        return Err(Error::SizeMismatch {
            expected: op.n_sites(),
            found: init.n_sites(),
        });
    }
    Ok(())
}

fn single_site(op: &Mpo, which: Extremum) -> Result<DmrgResult> {
    let w = &op.tensors()[0];
    let m = DMatrix::from_fn(2, 2, |i, j| w.get(0, i, j, 0));
    let apply = |x: &[C64], y: &mut [C64]| {
        for i in 0..2 {
            y[i] = m[(i, 0)] * x[0] + m[(i, 1)] * x[1];
        }
    };
    let pair = extremal_eigenpair(2, apply, None, which, &KrylovOptions::new(1e-12, 50))?;
    let state = Mps::from_tensors(vec![Tensor3 {
        left: 1,
        right: 1,
        data: pair.vector,
    }])?
    .normalized();
    Ok(DmrgResult {
        value: pair.value,
        state,
        sweep_values: vec![pair.value],
        converged: true,
        matvecs: pair.matvecs,
    })
}

/// Extremal eigenpair of `op` within MPS of bond dimension ≤ `chi_max`,
/// starting from `init`.
pub fn dmrg_extremal(op: &Mpo, which: Extremum, init: &Mps, opts: &DmrgOptions) -> Result<DmrgResult> {
    check_compatible(op, init)?;
    if opts.sweeps == 0 || opts.chi_max == 0 {
        return Err(Error::InvalidArgument("sweeps and χ_max must be at least 1".into()));
    }
    let n = op.n_sites();
    if n == 1 {
        return single_site(op, which);
    }
    let ws = op.tensors();
    let mut psi = if init.max_bond() > opts.chi_max {
        init.truncate(opts.chi_max)?.0
    } else {
        init.clone().normalized()
    };
    if psi.norm() == 0.0 || !psi.norm().is_finite() {
        return Err(Error::InvalidArgument("initial state has zero or non-finite norm".into()));
    }
    psi.canonicalize_mut(0);

    let mut lefts: Vec<Env> = vec![Env::trivial(); n + 1];
    let mut rights: Vec<Env> = vec![Env::trivial(); n + 1];
    for j in (1..n).rev() {
        rights[j] = extend_right(&rights[j + 1], &psi.tensors()[j], &ws[j]);
    }
    let energy_at_left = |psi: &Mps, rights: &[Env]| -> f64 {
        extend_right(&rights[1], &psi.tensors()[0], &ws[0]).data[0].re
    };
    let better = |a: f64, b: f64| match which {
        Extremum::Max => a > b,
        Extremum::Min => a < b,
    };

    let mut local = KrylovOptions::new(opts.tol, opts.max_local_matvecs);
    local.accept_unconverged = true;
    local.max_basis = 24;
    local.keep = 4;

    let mut value = energy_at_left(&psi, &rights);
    let mut sweep_values = vec![value];
    let mut best = psi.clone();
    let mut converged = false;
    let mut matvecs = 0usize;

    let solve = |j: usize, psi: &Mps, lefts: &[Env], rights: &[Env], matvecs: &mut usize| -> Result<(Vec<C64>, f64)> {
        let t = &psi.tensors();
        let theta = two_site_theta(&t[j], &t[j + 1]);
        let mut h = TwoSite::new(&lefts[j], &rights[j + 2], &ws[j], &ws[j + 1]);
        let dim = h.dim();
        let pair = extremal_eigenpair(dim, |x, y| h.apply(x, y), Some(&theta), which, &local)?;
        *matvecs += pair.matvecs;
        if !pair.value.is_finite() || pair.vector.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::NonFinite("local eigenvector"));
        }
        Ok((pair.vector, pair.value))
    };

    for _ in 0..opts.sweeps {
        // left to right
        for j in 0..n - 1 {
            let (theta, _) = solve(j, &psi, &lefts, &rights, &mut matvecs)?;
            let (al, cr) = (psi.tensors()[j].left, psi.tensors()[j + 1].right);
            let split = svd_truncated(DMatrix::from_row_slice(al * 2, 2 * cr, &theta), opts.chi_max, opts.cutoff);
            let sv = DMatrix::from_fn(split.s.len(), 2 * cr, |r, c| split.vt[(r, c)] * split.s[r]);
            let norm = split.s.iter().map(|s| s * s).sum::<f64>().sqrt();
            let t = psi.tensors_mut();
            t[j] = Tensor3::from_left_matrix(&split.u);
            t[j + 1] = Tensor3::from_right_matrix(&(sv / C64::new(norm, 0.0)));
            psi.set_center0(Some(j + 1));
            lefts[j + 1] = extend_left(&lefts[j], &psi.tensors()[j], &ws[j]);
        }
        // right to left
        for j in (0..n - 1).rev() {
            let (theta, _) = solve(j, &psi, &lefts, &rights, &mut matvecs)?;
            let (al, cr) = (psi.tensors()[j].left, psi.tensors()[j + 1].right);
            let split = svd_truncated(DMatrix::from_row_slice(al * 2, 2 * cr, &theta), opts.chi_max, opts.cutoff);
            let us = DMatrix::from_fn(al * 2, split.s.len(), |r, c| split.u[(r, c)] * split.s[c]);
            let norm = split.s.iter().map(|s| s * s).sum::<f64>().sqrt();
            let t = psi.tensors_mut();
            t[j + 1] = Tensor3::from_right_matrix(&split.vt);
            t[j] = Tensor3::from_left_matrix(&(us / C64::new(norm, 0.0)));
            psi.set_center0(Some(j));
            rights[j + 1] = extend_right(&rights[j + 2], &psi.tensors()[j + 1], &ws[j + 1]);
        }
        let e = energy_at_left(&psi, &rights);
        if !e.is_finite() {
            return Err(Error::NonFinite("sweep energy"));
        }
        let slack = opts.tol * (1.0 + value.abs());
        if !better(e, value) {
            // truncation can cost more than the sweep gained; keep the best
            converged = true;
            if (e - value).abs() <= slack {
                sweep_values.push(value);
            }
            break;
        }
        let improvement = (e - value).abs();
        value = e;
        best = psi.clone();
        sweep_values.push(value);
        if improvement <= slack {
            converged = true;
            break;
        }
    }
    Ok(DmrgResult {
        value,
        state: best,
        sweep_values,
        converged,
        matvecs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::{extremal_eigenstate, fidelity};
    use crate::mps::mpo_compile;
    use crate::pauli::{enumerate_window_strings, CoefficientVector, PauliAxis, PauliString};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn ising(n: usize) -> CoefficientVector {
        let table = Arc::new(enumerate_window_strings(n, 2).unwrap());
        let mut a = CoefficientVector::zeros(table);
        for i in 1..=n {
            a.add(&PauliString::new(n, [(i, PauliAxis::Z)]).unwrap(), -1.0).unwrap();
            if i < n {
                a.add(&PauliString::new(n, [(i, PauliAxis::X), (i + 1, PauliAxis::X)]).unwrap(), -1.0)
                    .unwrap();
            }
        }
        a
    }

    #[test]
    fn field_maximum() {
        let n = 5;
        let table = Arc::new(enumerate_window_strings(n, 2).unwrap());
        let mut a = CoefficientVector::zeros(table);
        for i in 1..=n {
            a.add(&PauliString::new(n, [(i, PauliAxis::Z)]).unwrap(), 1.0).unwrap();
        }
        let mpo = mpo_compile(&a).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let init = Mps::random(n, 2, &mut rng).unwrap();
        let r = dmrg_extremal(&mpo, Extremum::Max, &init, &DmrgOptions::default()).unwrap();
        assert!((r.value - 5.0).abs() < 1e-10);
        let f = super::super::mps_fidelity(&r.state, &Mps::product_state("00000").unwrap()).unwrap();
        assert!((f - 1.0).abs() < 1e-10);
    }

    #[test]
    fn critical_ising_matches_dense() {
        let n = 10;
        let a = ising(n);
        let exact = extremal_eigenstate(&a, Extremum::Min, 1e-11).unwrap();
        let mpo = mpo_compile(&a).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let init = Mps::random(n, 4, &mut rng).unwrap();
        let opts = DmrgOptions {
            sweeps: 8,
            tol: 1e-12,
            ..DmrgOptions::default()
        };
        let r = dmrg_extremal(&mpo, Extremum::Min, &init, &opts).unwrap();
        let rel = (r.value - exact.value).abs() / exact.value.abs();
        assert!(rel <= 1e-8, "relative error {rel}");
        assert!(r.state.max_bond() <= 32);
        let f = fidelity(&r.state.to_dense().unwrap(), &exact.state).unwrap();
        assert!(f > 1.0 - 1e-8, "{f}");
    }

    #[test]
    fn sweeps_are_monotone_and_variational() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for trial in 0..5 {
            let n = 6 + trial % 3;
            let table = Arc::new(enumerate_window_strings(n, 2).unwrap());
            let values = (0..table.len()).map(|_| rng.random::<f64>() - 0.5).collect();
            let a = CoefficientVector::from_values(table, values).unwrap();
            let top = extremal_eigenstate(&a, Extremum::Max, 1e-11).unwrap().value;
            let init = Mps::random(n, 2, &mut rng).unwrap();
            let opts = DmrgOptions {
                chi_max: 4,
                sweeps: 6,
                ..DmrgOptions::default()
            };
            let r = dmrg_extremal(&mpo_compile(&a).unwrap(), Extremum::Max, &init, &opts).unwrap();
            for pair in r.sweep_values.windows(2) {
                assert!(pair[1] >= pair[0] - 1e-12, "{:?}", r.sweep_values);
            }
            assert!(r.value <= top + 1e-10);
            let check = mpo_compile(&a).unwrap().expectation(&r.state).unwrap();
            assert!((check - r.value).abs() < 1e-9);
            assert!(r.state.max_bond() <= 4);
        }
    }

    #[test]
    fn single_site_chain() {
        let table = Arc::new(enumerate_window_strings(1, 1).unwrap());
        let mut a = CoefficientVector::zeros(table);
        a.add(&PauliString::from_label("X").unwrap(), 2.0).unwrap();
        let r = dmrg_extremal(
            &mpo_compile(&a).unwrap(),
            Extremum::Min,
            &Mps::product_state("0").unwrap(),
            &DmrgOptions::default(),
        )
        .unwrap();
        assert!((r.value + 2.0).abs() < 1e-12);
    }
}
