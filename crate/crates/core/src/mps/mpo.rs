//! Matrix product operators compiled from Pauli coefficient vectors.
//!
//! The compiler is a finite automaton over the bond channels:
//!
//! - `START`: only identities placed so far,
//! - `DONE`: a string has been completed, identities follow,
//! - one channel per open prefix, i.e. the axes placed since the first
//!   non-identity site of a string that has not yet reached its last site.
//!
//! A string spanning at most `w` sites is produced by exactly one path, and
//! its coefficient is attached on the transition into `DONE`. For `w = 2`
//! this gives bond dimension 5 independent of the chain length.

use std::collections::HashMap;

use nalgebra::DMatrix;

use super::tensor::Tensor4;
use super::Mps;
use crate::dense::check_limit;
use crate::error::{Error, Result};
use crate::pauli::{CoefficientVector, PauliAxis, PauliString};
use crate::{C64, DEFAULT_DENSE_LIMIT};

const START: usize = 0;
const DONE: usize = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Mpo {
    tensors: Vec<Tensor4>,
}

impl Mpo {
    pub fn from_tensors(tensors: Vec<Tensor4>) -> Result<Self> {
        if tensors.is_empty() {
            return Err(Error::InvalidArgument("an MPO needs at least one site".into()));
        }
        if tensors[0].left != 1 || tensors[tensors.len() - 1].right != 1 {
            return Err(Error::InvalidArgument("boundary bonds must have dimension 1".into()));
        }
        if tensors.windows(2).any(|p| p[0].right != p[1].left) {
            return Err(Error::InvalidArgument("inconsistent MPO bond dimensions".into()));
        }
        Ok(Mpo { tensors })
    }

    pub fn n_sites(&self) -> usize {
        self.tensors.len()
    }

    pub fn tensors(&self) -> &[Tensor4] {
        &self.tensors
    }

    pub fn bond_dims(&self) -> Vec<usize> {
        self.tensors[..self.tensors.len() - 1].iter().map(|t| t.right).collect()
    }

    pub fn max_bond(&self) -> usize {
        self.bond_dims().into_iter().max().unwrap_or(1)
    }

    pub fn scaled(&self, factor: f64) -> Mpo {
        let mut out = self.clone();
        for v in &mut out.tensors[0].data {
            *v *= factor;
        }
        out
    }

    /// Dense `2^N × 2^N` matrix.
    pub fn to_dense(&self) -> Result<DMatrix<C64>> {
        let n = self.n_sites();
        check_limit(n, DEFAULT_DENSE_LIMIT)?;
        // acc[(row, col), channel] for the sites contracted so far
        let mut acc: Vec<C64> = vec![C64::new(1.0, 0.0)];
        let mut dim = 1usize;
        let mut chans = 1usize;
        for t in &self.tensors {
            let nd = dim * 2;
            let mut next = vec![C64::new(0.0, 0.0); nd * nd * t.right];
            for r in 0..dim {
                for c in 0..dim {
                    for w in 0..chans {
                        let v = acc[(r * dim + c) * chans + w];
                        if v.re == 0.0 && v.im == 0.0 {
                            continue;
                        }
                        for so in 0..2 {
                            for si in 0..2 {
                                for w2 in 0..t.right {
                                    let x = t.get(w, so, si, w2);
                                    if x.re == 0.0 && x.im == 0.0 {
                                        continue;
                                    }
                                    let row = r * 2 + so;
                                    let col = c * 2 + si;
                                    next[(row * nd + col) * t.right + w2] += v * x;
                                }
                            }
                        }
                    }
                }
            }
            acc = next;
            dim = nd;
            chans = t.right;
        }
        Ok(DMatrix::from_fn(dim, dim, |r, c| acc[r * dim + c]))
    }

    /// `<ψ|O|ψ> / <ψ|ψ>`.
    pub fn expectation(&self, psi: &Mps) -> Result<f64> {
        if psi.n_sites() != self.n_sites() {
            return Err(Error::SizeMismatch {
                expected: self.n_sites(),
                found: psi.n_sites(),
            });
        }
        let mut env = super::dmrg::Env::trivial();
        for (a, w) in psi.tensors().iter().zip(&self.tensors) {
            env = super::dmrg::extend_left(&env, a, w);
        }
        let value = env.data[0];
        let norm = psi.overlap(psi)?.re;
        Ok(value.re / norm)
    }
}

/// Open-prefix channels for window width `w`: axis sequences of length
/// `1..w` whose first axis is not the identity.
fn prefix_channels(width: usize) -> Vec<Vec<PauliAxis>> {
    let mut out: Vec<Vec<PauliAxis>> = Vec::new();
    let mut layer: Vec<Vec<PauliAxis>> = PauliAxis::NON_IDENTITY.iter().map(|&a| vec![a]).collect();
    for _ in 1..width {
        out.extend(layer.iter().cloned());
        layer = layer
            .iter()
            .flat_map(|p| {
                PauliAxis::ALL.iter().map(move |&b| {
                    let mut q = p.clone();
                    q.push(b);
                    q
                })
            })
            .collect();
    }
    out
}

/// Compiles `sum_k a_k P_k` into an MPO.
pub fn mpo_compile(a: &CoefficientVector) -> Result<Mpo> {
    let table = a.table();
    let n = table.n_sites();
    let width = table.window_width();
    for p in table.strings() {
        if let Some((lo, hi)) = p.span() {
            if hi - lo + 1 > width {
                return Err(Error::OutsideWindow(p.label()));
            }
        }
    }
    let prefixes = prefix_channels(width);
    let channel: HashMap<&[PauliAxis], usize> = prefixes
        .iter()
        .enumerate()
        .map(|(i, p)| (p.as_slice(), i + 2))
        .collect();
    let d = 2 + prefixes.len();
    let one = C64::new(1.0, 0.0);
    let eye = PauliAxis::I.matrix();
    let identity_coeff = a.get(&PauliString::identity(n));

    let mut tensors = Vec::with_capacity(n);
    for site in 1..=n {
        let mut w = Tensor4::zeros(d, d);
        w.add_block(START, START, &eye, one);
        w.add_block(DONE, DONE, &eye, one);
        if site == 1 {
            w.add_block(START, DONE, &eye, C64::new(identity_coeff, 0.0));
        }
        for &alpha in &PauliAxis::NON_IDENTITY {
            let single = PauliString::new(n, [(site, alpha)])?;
            let c = a.get(&single);
            if c != 0.0 {
                w.add_block(START, DONE, &alpha.matrix(), C64::new(c, 0.0));
            }
            if width > 1 {
                w.add_block(START, channel[&[alpha][..]], &alpha.matrix(), one);
            }
        }
        for p in &prefixes {
            let from = channel[p.as_slice()];
            if p.len() + 1 < width {
                for &beta in &PauliAxis::ALL {
                    let mut q = p.clone();
                    q.push(beta);
                    w.add_block(from, channel[q.as_slice()], &beta.matrix(), one);
                }
            }
            // close the string on this site
            if site > p.len() {
                let first = site - p.len();
                for &beta in &PauliAxis::NON_IDENTITY {
                    let axes = p
                        .iter()
                        .enumerate()
                        .map(|(j, &ax)| (first + j, ax))
                        .chain(std::iter::once((site, beta)));
                    let c = a.get(&PauliString::new(n, axes)?);
                    if c != 0.0 {
                        w.add_block(from, DONE, &beta.matrix(), C64::new(c, 0.0));
                    }
                }
            }
        }
        tensors.push(w);
    }
    // boundary slices: START row on the left, DONE column on the right
    let first = &tensors[0];
    let mut left = Tensor4::zeros(1, if n == 1 { 1 } else { d });
    for so in 0..2 {
        for si in 0..2 {
            for r in 0..left.right {
                let src = if n == 1 { DONE } else { r };
                let i = left.idx(0, so, si, r);
                left.data[i] = first.get(START, so, si, src);
            }
        }
    }
    if n == 1 {
        return Mpo::from_tensors(vec![left]);
    }
    tensors[0] = left;
    let last = &tensors[n - 1];
    let mut right = Tensor4::zeros(d, 1);
    for l in 0..d {
        for so in 0..2 {
            for si in 0..2 {
                let i = right.idx(l, so, si, 0);
                right.data[i] = last.get(l, so, si, DONE);
            }
        }
    }
    tensors[n - 1] = right;
    Mpo::from_tensors(tensors)
}
