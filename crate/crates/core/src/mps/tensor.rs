use nalgebra::DMatrix;

use crate::C64;

/// Site tensor `A[left, s, right]` with physical dimension 2, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor3 {
    pub left: usize,
    pub right: usize,
    pub data: Vec<C64>,
}

impl Tensor3 {
    pub fn zeros(left: usize, right: usize) -> Self {
        Tensor3 {
            left,
            right,
            data: vec![C64::new(0.0, 0.0); left * 2 * right],
        }
    }

    #[inline]
    pub fn idx(&self, l: usize, s: usize, r: usize) -> usize {
        (l * 2 + s) * self.right + r
    }

    #[inline]
    pub fn get(&self, l: usize, s: usize, r: usize) -> C64 {
        self.data[self.idx(l, s, r)]
    }

    #[inline]
    pub fn set(&mut self, l: usize, s: usize, r: usize, v: C64) {
        let i = self.idx(l, s, r);
        self.data[i] = v;
    }

    /// `(left·2) × right` view as an owned matrix.
    pub fn left_matrix(&self) -> DMatrix<C64> {
        DMatrix::from_row_slice(self.left * 2, self.right, &self.data)
    }

    /// `left × (2·right)` view as an owned matrix.
    pub fn right_matrix(&self) -> DMatrix<C64> {
        DMatrix::from_row_slice(self.left, 2 * self.right, &self.data)
    }

    pub fn from_left_matrix(m: &DMatrix<C64>) -> Self {
        debug_assert_eq!(m.nrows() % 2, 0);
        Tensor3 {
            left: m.nrows() / 2,
            right: m.ncols(),
            data: row_major(m),
        }
    }

    pub fn from_right_matrix(m: &DMatrix<C64>) -> Self {
        debug_assert_eq!(m.ncols() % 2, 0);
        Tensor3 {
            left: m.nrows(),
            right: m.ncols() / 2,
            data: row_major(m),
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn scale(&mut self, f: C64) {
        for v in &mut self.data {
            *v *= f;
        }
    }
}

/// Operator tensor `W[left, out, in, right]`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor4 {
    pub left: usize,
    pub right: usize,
    pub data: Vec<C64>,
}

impl Tensor4 {
    pub fn zeros(left: usize, right: usize) -> Self {
        Tensor4 {
            left,
            right,
            data: vec![C64::new(0.0, 0.0); left * 4 * right],
        }
    }

    #[inline]
    pub fn idx(&self, l: usize, so: usize, si: usize, r: usize) -> usize {
        ((l * 2 + so) * 2 + si) * self.right + r
    }

    #[inline]
    pub fn get(&self, l: usize, so: usize, si: usize, r: usize) -> C64 {
        self.data[self.idx(l, so, si, r)]
    }

    /// Adds a 2×2 block (row-major `[out][in]`) to the `(l, r)` channel.
    pub fn add_block(&mut self, l: usize, r: usize, block: &[[C64; 2]; 2], coeff: C64) {
        for (so, row) in block.iter().enumerate() {
            for (si, v) in row.iter().enumerate() {
                let i = self.idx(l, so, si, r);
                self.data[i] += v * coeff;
            }
        }
    }

    /// Non-zero entries as `(l, out, in, r, value)`.
    pub fn nonzeros(&self) -> Vec<(usize, usize, usize, usize, C64)> {
        let mut out = Vec::new();
        for l in 0..self.left {
            for so in 0..2 {
                for si in 0..2 {
                    for r in 0..self.right {
                        let v = self.get(l, so, si, r);
                        if v.re != 0.0 || v.im != 0.0 {
                            out.push((l, so, si, r, v));
                        }
                    }
                }
            }
        }
        out
    }
}

pub(crate) fn row_major(m: &DMatrix<C64>) -> Vec<C64> {
    let mut out = Vec::with_capacity(m.len());
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            out.push(m[(r, c)]);
        }
    }
    out
}

/// Thin QR, `m = q · r`.
pub(crate) fn qr(m: DMatrix<C64>) -> (DMatrix<C64>, DMatrix<C64>) {
    let qr = m.qr();
    (qr.q(), qr.r())
}

/// Truncated SVD `m ≈ u · diag(s) · vt` with singular values sorted in
/// descending order.
pub(crate) struct Split {
    pub u: DMatrix<C64>,
    pub s: Vec<f64>,
    pub vt: DMatrix<C64>,
}

/// Keeps at most `chi_max` singular values and drops those below
/// `cutoff · s_max`. At least one value is always kept.
pub(crate) fn svd_truncated(m: DMatrix<C64>, chi_max: usize, cutoff: f64) -> Split {
    let svd = m.svd(true, true);
    let u = svd.u.expect("requested U");
    let vt = svd.v_t.expect("requested V^†");
    let sv = svd.singular_values;
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]));
    let smax = sv[order[0]];
    let keep = order
        .iter()
        .take(chi_max.max(1))
        .take_while(|&&i| sv[i] > cutoff * smax)
        .count()
        .max(1);
    let u_k = DMatrix::from_fn(u.nrows(), keep, |r, c| u[(r, order[c])]);
    let vt_k = DMatrix::from_fn(keep, vt.ncols(), |r, c| vt[(order[r], c)]);
    Split {
        u: u_k,
        s: order[..keep].iter().map(|&i| sv[i]).collect(),
        vt: vt_k,
    }
}
