//! Matrix product states on an open chain of qubits.
//!
//! Tensors are `A[left, s, right]` with boundary bonds of dimension 1. The
//! state keeps track of its orthogonality center when one is known: tensors
//! left of the center are left-normalized (`Σ_{l,s} A* A = 1`) and tensors to
//! its right are right-normalized.

mod dmrg;
mod mpo;
mod tensor;

pub use dmrg::{dmrg_extremal, DmrgOptions, DmrgResult};
pub use mpo::{mpo_compile, Mpo};
pub use tensor::{Tensor3, Tensor4};

use nalgebra::DMatrix;
use rand::Rng;

use crate::dense::{check_limit, DenseState};
use crate::error::{Error, Result};
use crate::pauli::PauliString;
use crate::{C64, DEFAULT_DENSE_LIMIT};

use tensor::{qr, svd_truncated};

/// Singular values below this fraction of the largest are treated as zero
/// when factorizing exact states.
const EXACT_CUTOFF: f64 = 1e-13;

#[derive(Clone, Debug, PartialEq)]
pub struct Mps {
    tensors: Vec<Tensor3>,
    center: Option<usize>,
}

impl Mps {
    pub fn from_tensors(tensors: Vec<Tensor3>) -> Result<Self> {
        if tensors.is_empty() {
            return Err(Error::InvalidArgument("an MPS needs at least one site".into()));
        }
        if tensors[0].left != 1 || tensors[tensors.len() - 1].right != 1 {
            return Err(Error::InvalidArgument("boundary bonds must have dimension 1".into()));
        }
        for (i, pair) in tensors.windows(2).enumerate() {
            if pair[0].right != pair[1].left {
                return Err(Error::InvalidArgument(format!(
                    "bond {} mismatch: {} vs {}",
                    i + 1,
                    pair[0].right,
                    pair[1].left
                )));
            }
        }
        for t in &tensors {
            if t.data.len() != t.left * 2 * t.right {
                return Err(Error::SizeMismatch {
                    expected: t.left * 2 * t.right,
                    found: t.data.len(),
                });
            }
        }
        Ok(Mps {
            tensors,
            center: None,
        })
    }

    /// Product state from a bit label such as `"0101"`.
    pub fn product_state(bits: &str) -> Result<Self> {
        let tensors = bits
            .chars()
            .map(|c| {
                let s = match c {
                    '0' => 0,
                    '1' => 1,
                    _ => return Err(Error::InvalidArgument(format!("invalid bit label {bits:?}"))),
                };
                let mut t = Tensor3::zeros(1, 1);
                t.set(0, s, 0, C64::new(1.0, 0.0));
                Ok(t)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut m = Mps::from_tensors(tensors)?;
        m.center = Some(0);
        Ok(m)
    }

    /// Random state with bond dimensions `min(chi, 2^j, 2^{N-j})`, normalized.
    pub fn random<R: Rng>(n_sites: usize, chi: usize, rng: &mut R) -> Result<Self> {
        if n_sites == 0 || chi == 0 {
            return Err(Error::InvalidArgument("random MPS needs N ≥ 1 and χ ≥ 1".into()));
        }
        let bond = |j: usize| -> usize {
            // bond to the right of site j-1, j in 0..=N
            let side = j.min(n_sites - j).min(30);
            (1usize << side).min(chi)
        };
        let tensors = (0..n_sites)
            .map(|j| {
                let mut t = Tensor3::zeros(bond(j), bond(j + 1));
                for v in &mut t.data {
                    *v = C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
                }
                t
            })
            .collect();
        let mut m = Mps::from_tensors(tensors)?;
        m.normalize();
        Ok(m)
    }

    /// `self + c·other` as a direct sum; bond dimensions add.
    pub fn add_scaled(&self, other: &Mps, c: C64) -> Result<Mps> {
        let n = self.n_sites();
        if other.n_sites() != n {
            return Err(Error::SizeMismatch {
                expected: n,
                found: other.n_sites(),
            });
        }
        if n == 1 {
            let mut t = self.tensors[0].clone();
            for (a, b) in t.data.iter_mut().zip(&other.tensors[0].data) {
                *a += c * b;
            }
            return Mps::from_tensors(vec![t]);
        }
        let tensors = (0..n)
            .map(|j| {
                let (a, b) = (&self.tensors[j], &other.tensors[j]);
                let (l, r) = match j {
                    0 => (1, a.right + b.right),
                    _ if j == n - 1 => (a.left + b.left, 1),
                    _ => (a.left + b.left, a.right + b.right),
                };
                let (lo, ro) = (if j == 0 { 0 } else { a.left }, if j == n - 1 { 0 } else { a.right });
                let mut t = Tensor3::zeros(l, r);
                for x in 0..a.left {
                    for s in 0..2 {
                        for y in 0..a.right {
                            t.set(x, s, y, a.get(x, s, y));
                        }
                    }
                }
                let f = if j == 0 { c } else { C64::new(1.0, 0.0) };
                for x in 0..b.left {
                    for s in 0..2 {
                        for y in 0..b.right {
                            t.set(lo + x, s, ro + y, f * b.get(x, s, y));
                        }
                    }
                }
                t
            })
            .collect();
        Mps::from_tensors(tensors)
    }

    pub fn n_sites(&self) -> usize {
        self.tensors.len()
    }

    pub fn tensors(&self) -> &[Tensor3] {
        &self.tensors
    }

    pub(crate) fn tensors_mut(&mut self) -> &mut [Tensor3] {
        self.center = None;
        &mut self.tensors
    }

    /// Internal bond dimensions, `N - 1` entries.
    pub fn bond_dims(&self) -> Vec<usize> {
        self.tensors[..self.tensors.len() - 1].iter().map(|t| t.right).collect()
    }

    pub fn max_bond(&self) -> usize {
        self.bond_dims().into_iter().max().unwrap_or(1)
    }

    /// Orthogonality center (1-based), if the gauge is known.
    pub fn canonical_center(&self) -> Option<usize> {
        self.center.map(|c| c + 1)
    }

    pub(crate) fn set_center0(&mut self, c: Option<usize>) {
        self.center = c;
    }

    fn left_normalize_site(&mut self, j: usize) {
        let (q, r) = qr(self.tensors[j].left_matrix());
        self.tensors[j] = Tensor3::from_left_matrix(&q);
        let next = &self.tensors[j + 1];
        let m = &r * next.right_matrix();
        self.tensors[j + 1] = Tensor3::from_right_matrix(&m);
    }

    fn right_normalize_site(&mut self, j: usize) {
        // m = l · q with q having orthonormal rows, from the QR of m^†
        let (q, r) = qr(self.tensors[j].right_matrix().adjoint());
        self.tensors[j] = Tensor3::from_right_matrix(&q.adjoint());
        let prev = &self.tensors[j - 1];
        let m = prev.left_matrix() * r.adjoint();
        self.tensors[j - 1] = Tensor3::from_left_matrix(&m);
    }

    /// Brings the state into mixed-canonical form about 0-based site `c`.
    pub(crate) fn canonicalize_mut(&mut self, c: usize) {
        let n = self.n_sites();
        match self.center {
            None => {
                for j in 0..c {
                    self.left_normalize_site(j);
                }
                for j in (c + 1..n).rev() {
                    self.right_normalize_site(j);
                }
            }
            Some(old) if c > old => {
                for j in old..c {
                    self.left_normalize_site(j);
                }
            }
            Some(old) if c < old => {
                for j in (c + 1..=old).rev() {
                    self.right_normalize_site(j);
                }
            }
            Some(_) => {}
        }
        self.center = Some(c);
    }

    /// Mixed-canonical form about 1-based `center`.
    pub fn canonicalize(&self, center: usize) -> Result<Mps> {
        if center == 0 || center > self.n_sites() {
            return Err(Error::SiteOutOfRange {
                site: center,
                n_sites: self.n_sites(),
            });
        }
        let mut m = self.clone();
        m.canonicalize_mut(center - 1);
        Ok(m)
    }

    pub fn norm(&self) -> f64 {
        match self.center {
            Some(c) => self.tensors[c].norm_sqr().sqrt(),
            None => self.overlap(self).map(|v| v.re.max(0.0).sqrt()).unwrap_or(0.0),
        }
    }

    pub fn normalize(&mut self) {
        let c = self.center.unwrap_or(0);
        self.canonicalize_mut(c);
        let n = self.tensors[c].norm_sqr().sqrt();
        if n > 0.0 {
            self.tensors[c].scale(C64::new(1.0 / n, 0.0));
        }
    }

    pub fn normalized(mut self) -> Self {
        self.normalize();
        self
    }

    /// `<self|other>` by transfer contraction.
    pub fn overlap(&self, other: &Mps) -> Result<C64> {
        self.transfer(other, |_| None)
    }

    /// `<self|O_1 ⊗ … ⊗ O_N|other>` with `site_op(j)` giving the 2×2 operator
    /// on 0-based site `j` (None for identity).
    fn transfer<F>(&self, other: &Mps, site_op: F) -> Result<C64>
    where
        F: Fn(usize) -> Option<[[C64; 2]; 2]>,
    {
        if self.n_sites() != other.n_sites() {
            return Err(Error::SizeMismatch {
                expected: self.n_sites(),
                found: other.n_sites(),
            });
        }
        let mut env = vec![C64::new(1.0, 0.0)];
        let (mut dl, mut dr) = (1usize, 1usize);
        for (j, (a, b)) in self.tensors.iter().zip(&other.tensors).enumerate() {
            // tmp[a, s, b'] = Σ_{a'} env[a, a'] B[a', s, b']
            let mut tmp = vec![C64::new(0.0, 0.0); dl * 2 * b.right];
            for x in 0..dl {
                for y in 0..dr {
                    let e = env[x * dr + y];
                    if e.re == 0.0 && e.im == 0.0 {
                        continue;
                    }
                    let src = &b.data[y * 2 * b.right..(y + 1) * 2 * b.right];
                    let dst = &mut tmp[x * 2 * b.right..(x + 1) * 2 * b.right];
                    for (d, s) in dst.iter_mut().zip(src) {
                        *d += e * s;
                    }
                }
            }
            if let Some(op) = site_op(j) {
                let mut applied = vec![C64::new(0.0, 0.0); tmp.len()];
                for x in 0..dl {
                    for so in 0..2 {
                        for si in 0..2 {
                            let o = op[so][si];
                            if o.re == 0.0 && o.im == 0.0 {
                                continue;
                            }
                            for r in 0..b.right {
                                applied[(x * 2 + so) * b.right + r] += o * tmp[(x * 2 + si) * b.right + r];
                            }
                        }
                    }
                }
                tmp = applied;
            }
            // env'[c, d] = Σ_{a, s} conj(A[a, s, c]) tmp[a, s, d]
            let mut next = vec![C64::new(0.0, 0.0); a.right * b.right];
            for x in 0..dl {
                for s in 0..2 {
                    for c in 0..a.right {
                        let ac = a.get(x, s, c).conj();
                        if ac.re == 0.0 && ac.im == 0.0 {
                            continue;
                        }
                        let row = &tmp[(x * 2 + s) * b.right..(x * 2 + s + 1) * b.right];
                        let dst = &mut next[c * b.right..(c + 1) * b.right];
                        for (d, t) in dst.iter_mut().zip(row) {
                            *d += ac * t;
                        }
                    }
                }
            }
            env = next;
            dl = a.right;
            dr = b.right;
        }
        Ok(env[0])
    }

    /// `<P>` normalized by `<ψ|ψ>`; the imaginary residue must stay below 1e-10.
    pub fn expectation(&self, p: &PauliString) -> Result<f64> {
        if p.n_sites() != self.n_sites() {
            return Err(Error::SizeMismatch {
                expected: self.n_sites(),
                found: p.n_sites(),
            });
        }
        let value = self.transfer(self, |j| {
            let axis = p.axis_at(j + 1);
            (axis != crate::pauli::PauliAxis::I).then(|| axis.matrix())
        })?;
        let norm = self.overlap(self)?.re;
        let value = value / norm;
        if value.im.abs() > 1e-10 {
            return Err(Error::InvalidArgument(format!(
                "expectation of {p} has imaginary part {:e}",
                value.im
            )));
        }
        Ok(value.re)
    }

    /// Reduced density matrices on every width-`w` window, left to right.
    pub fn window_density_matrices(&self, width: usize) -> Result<Vec<DMatrix<C64>>> {
        let n = self.n_sites();
        if width == 0 || width > n {
            return Err(Error::InvalidWindowWidth { width, n_sites: n });
        }
        let mut m = self.clone();
        m.canonicalize_mut(0);
        let local = 1usize << width;
        let mut out = Vec::with_capacity(n - width + 1);
        for start in 0..=n - width {
            if start > 0 {
                m.canonicalize_mut(start);
            }
            // theta[a, σ, b] over the window, σ with first site most significant
            let first = &m.tensors[start];
            let mut theta = first.data.clone();
            let mut right = first.right;
            let left = first.left;
            let mut phys = 2usize;
            for t in &m.tensors[start + 1..start + width] {
                let mut next = vec![C64::new(0.0, 0.0); left * phys * 2 * t.right];
                for ap in 0..left * phys {
                    for b in 0..right {
                        let v = theta[ap * right + b];
                        if v.re == 0.0 && v.im == 0.0 {
                            continue;
                        }
                        let src = &t.data[b * 2 * t.right..(b + 1) * 2 * t.right];
                        let dst = &mut next[ap * 2 * t.right..(ap + 1) * 2 * t.right];
                        for (d, s) in dst.iter_mut().zip(src) {
                            *d += v * s;
                        }
                    }
                }
                theta = next;
                right = t.right;
                phys *= 2;
            }
            let mut rho = DMatrix::<C64>::zeros(local, local);
            for a in 0..left {
                for i in 0..local {
                    let row_i = &theta[(a * local + i) * right..(a * local + i + 1) * right];
                    for j in 0..local {
                        let row_j = &theta[(a * local + j) * right..(a * local + j + 1) * right];
                        let mut acc = C64::new(0.0, 0.0);
                        for (x, y) in row_i.iter().zip(row_j) {
                            acc += x * y.conj();
                        }
                        rho[(i, j)] += acc;
                    }
                }
            }
            let tr = rho.trace().re;
            out.push(rho / C64::new(tr, 0.0));
        }
        Ok(out)
    }

    /// Compresses every bond to at most `chi_max` by discarding the smallest
    /// Schmidt coefficients, sweeping right to left over a left-canonical
    /// state, then renormalizes. Returns the compressed state and the kept
    /// weight `‖Π ψ‖²` of the (normalized) input, which equals the fidelity
    /// between input and output.
    pub fn truncate(&self, chi_max: usize) -> Result<(Mps, f64)> {
        if chi_max == 0 {
            return Err(Error::InvalidArgument("bond cap must be at least 1".into()));
        }
        let n = self.n_sites();
        let mut m = self.clone().normalized();
        m.canonicalize_mut(n - 1);
        for j in (1..n).rev() {
            let split = svd_truncated(m.tensors[j].right_matrix(), chi_max, EXACT_CUTOFF);
            m.tensors[j] = Tensor3::from_right_matrix(&split.vt);
            let us = DMatrix::from_fn(split.u.nrows(), split.s.len(), |r, c| split.u[(r, c)] * split.s[c]);
            let prev = m.tensors[j - 1].left_matrix() * us;
            m.tensors[j - 1] = Tensor3::from_left_matrix(&prev);
        }
        m.center = Some(0);
        let kept = m.tensors[0].norm_sqr();
        m.normalize();
        Ok((m, kept))
    }

    /// Sequential Schmidt factorization of a dense state.
    pub fn from_dense(s: &DenseState, chi_max: usize) -> Result<Mps> {
        let n = s.n_sites();
        if chi_max == 0 {
            return Err(Error::InvalidArgument("bond cap must be at least 1".into()));
        }
        let mut rest = s.amplitudes().to_vec();
        let mut left = 1usize;
        let mut tensors = Vec::with_capacity(n);
        for j in 0..n - 1 {
            let cols = 1usize << (n - j - 1);
            let mat = DMatrix::from_row_slice(left * 2, cols, &rest);
            let split = svd_truncated(mat, chi_max, EXACT_CUTOFF);
            let k = split.s.len();
            tensors.push(Tensor3::from_left_matrix(&split.u));
            let sv = DMatrix::from_fn(k, cols, |r, c| split.vt[(r, c)] * split.s[r]);
            rest = tensor::row_major(&sv);
            left = k;
        }
        tensors.push(Tensor3 {
            left,
            right: 1,
            data: rest,
        });
        let mut m = Mps::from_tensors(tensors)?;
        m.center = Some(n - 1);
        m.normalize();
        Ok(m)
    }

    pub fn to_dense(&self) -> Result<DenseState> {
        let n = self.n_sites();
        check_limit(n, DEFAULT_DENSE_LIMIT)?;
        // psi[idx, r] with idx over the sites contracted so far
        let mut psi = self.tensors[0].data.clone();
        let mut rows = 2usize;
        let mut right = self.tensors[0].right;
        for t in &self.tensors[1..] {
            let mut next = vec![C64::new(0.0, 0.0); rows * 2 * t.right];
            for i in 0..rows {
                for b in 0..right {
                    let v = psi[i * right + b];
                    if v.re == 0.0 && v.im == 0.0 {
                        continue;
                    }
                    let src = &t.data[b * 2 * t.right..(b + 1) * 2 * t.right];
                    let dst = &mut next[i * 2 * t.right..(i + 1) * 2 * t.right];
                    for (d, s) in dst.iter_mut().zip(src) {
                        *d += v * s;
                    }
                }
            }
            psi = next;
            rows *= 2;
            right = t.right;
        }
        DenseState::new(n, psi)
    }
}

/// Exact bond-dimension-2 W state `(|10…0> + … + |0…01>)/√N`.
pub fn w_state_mps(n_sites: usize) -> Result<Mps> {
    if n_sites < 2 {
        return Err(Error::InvalidArgument("W state needs at least 2 sites".into()));
    }
    let amp = C64::new(1.0 / (n_sites as f64).sqrt(), 0.0);
    let one = C64::new(1.0, 0.0);
    let tensors = (0..n_sites)
        .map(|j| {
            // bond channel 0: no excitation yet, 1: excitation placed
            let left = if j == 0 { 1 } else { 2 };
            let right = if j == n_sites - 1 { 1 } else { 2 };
            let mut t = Tensor3::zeros(left, right);
            let done = right - 1;
            if j < n_sites - 1 {
                t.set(0, 0, 0, one);
            }
            t.set(0, 1, done, amp);
            if j > 0 {
                t.set(1, 0, done, one);
            }
            t
        })
        .collect();
    Mps::from_tensors(tensors)
}

/// `|<a|b>|^2 / (<a|a><b|b>)`
pub fn mps_fidelity(a: &Mps, b: &Mps) -> Result<f64> {
    let ab = a.overlap(b)?;
    let aa = a.overlap(a)?.re;
    let bb = b.overlap(b)?.re;
    Ok(ab.norm_sqr() / (aa * bb))
}
