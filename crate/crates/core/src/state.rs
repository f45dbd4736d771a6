//! Backend-agnostic pure state.

use nalgebra::DMatrix;

use crate::dense::{self, DenseState};
use crate::error::{Error, Result};
use crate::mps::{mps_fidelity, Mps};
use crate::pauli::StringTable;
use crate::C64;

#[derive(Clone, Debug, PartialEq)]
pub enum State {
    Dense(DenseState),
    Mps(Mps),
}

impl State {
    pub fn n_sites(&self) -> usize {
        match self {
            State::Dense(s) => s.n_sites(),
            State::Mps(m) => m.n_sites(),
        }
    }

    pub fn to_dense(&self) -> Result<DenseState> {
        match self {
            State::Dense(s) => Ok(s.clone()),
            State::Mps(m) => Ok(m.to_dense()?.normalized()),
        }
    }

    /// Exact MPS form; dense states are factorized without truncation.
    pub fn to_mps(&self) -> Result<Mps> {
        match self {
            State::Dense(s) => Mps::from_dense(s, usize::MAX),
            State::Mps(m) => Ok(m.clone()),
        }
    }

    /// Reduced density matrices on every width-`w` window, left to right.
    pub fn window_density_matrices(&self, width: usize) -> Result<Vec<DMatrix<C64>>> {
        match self {
            State::Dense(s) => Ok(dense::window_density_matrices(s, width)?
                .into_iter()
                .map(|r| r.matrix().clone())
                .collect()),
            State::Mps(m) => m.window_density_matrices(width),
        }
    }

    /// `|<self|other>|^2` for normalized states.
    pub fn fidelity(&self, other: &State) -> Result<f64> {
        if self.n_sites() != other.n_sites() {
            return Err(Error::SizeMismatch {
                expected: self.n_sites(),
                found: other.n_sites(),
            });
        }
        match (self, other) {
            (State::Dense(a), State::Dense(b)) => dense::fidelity(a, b),
            (State::Mps(a), State::Mps(b)) => mps_fidelity(a, b),
            (State::Dense(d), State::Mps(m)) | (State::Mps(m), State::Dense(d)) => {
                dense::fidelity(d, &m.to_dense()?)
            }
        }
    }
}

impl From<DenseState> for State {
    fn from(s: DenseState) -> Self {
        State::Dense(s)
    }
}

impl From<Mps> for State {
    fn from(m: Mps) -> Self {
        State::Mps(m)
    }
}

/// `tr(ρ_win P_local)` for every table string, from the window reductions of
/// a state (one matrix per window of the table's width).
pub fn expectations_from_reductions(table: &StringTable, rdms: &[DMatrix<C64>]) -> Result<Vec<f64>> {
    if rdms.len() != table.n_windows() {
        return Err(Error::SizeMismatch {
            expected: table.n_windows(),
            found: rdms.len(),
        });
    }
    let w = table.window_width();
    let dim = 1usize << w;
    let mut out = Vec::with_capacity(table.len());
    for k in 0..table.len() {
        let pl = table.placement(k);
        let rho = &rdms[pl.window];
        let (flip, sign, n_y) = local_masks(w, pl.pattern);
        // P|x> = i^{n_y} (-1)^{|x ∧ sign|} |x ⊕ flip>
        let mut acc = C64::new(0.0, 0.0);
        for x in 0..dim {
            acc += rho[(x, x ^ flip)] * crate::pauli::parity_sign(x & sign);
        }
        acc *= crate::pauli::y_phase(n_y);
        out.push(acc.re);
    }
    Ok(out)
}

/// Bit masks of a local base-4 pattern (first site most significant):
/// bits flipped by X/Y, bits carrying a sign from Z/Y, and the Y count.
fn local_masks(width: usize, pattern: usize) -> (usize, usize, usize) {
    let mut flip = 0;
    let mut sign = 0;
    let mut n_y = 0;
    for j in 0..width {
        let axis = (pattern >> (2 * (width - 1 - j))) & 3;
        let bit = 1usize << (width - 1 - j);
        match axis {
            1 => flip |= bit,
            2 => {
                flip |= bit;
                sign |= bit;
                n_y += 1;
            }
            3 => sign |= bit,
            _ => {}
        }
    }
    (flip, sign, n_y)
}
