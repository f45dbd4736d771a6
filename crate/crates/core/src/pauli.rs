//! Pauli strings on an open chain and the table of measured observables.
//!
//! Sites are 1-based everywhere in this module's interface. Dense matrices
//! follow the Kronecker convention `P_1 ⊗ P_2 ⊗ … ⊗ P_N`, so site 1 is the
//! most significant bit of a basis index.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::{C64, DEFAULT_DENSE_LIMIT};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PauliAxis {
    I,
    X,
    Y,
    Z,
}

impl PauliAxis {
    pub const ALL: [PauliAxis; 4] = [PauliAxis::I, PauliAxis::X, PauliAxis::Y, PauliAxis::Z];
    pub const NON_IDENTITY: [PauliAxis; 3] = [PauliAxis::X, PauliAxis::Y, PauliAxis::Z];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> PauliAxis {
        Self::ALL[i & 3]
    }

    pub fn as_char(self) -> char {
        match self {
            PauliAxis::I => 'I',
            PauliAxis::X => 'X',
            PauliAxis::Y => 'Y',
            PauliAxis::Z => 'Z',
        }
    }

    pub fn from_char(c: char) -> Option<PauliAxis> {
        match c.to_ascii_uppercase() {
            'I' => Some(PauliAxis::I),
            'X' => Some(PauliAxis::X),
            'Y' => Some(PauliAxis::Y),
            'Z' => Some(PauliAxis::Z),
            _ => None,
        }
    }

    /// Row-major 2×2 matrix `[[m00, m01], [m10, m11]]`.
    pub fn matrix(self) -> [[C64; 2]; 2] {
        let o = C64::new(0.0, 0.0);
        let l = C64::new(1.0, 0.0);
        let i = C64::new(0.0, 1.0);
        match self {
            PauliAxis::I => [[l, o], [o, l]],
            PauliAxis::X => [[o, l], [l, o]],
            PauliAxis::Y => [[o, -i], [i, o]],
            PauliAxis::Z => [[l, o], [o, -l]],
        }
    }
}

/// A tensor product of single-site Pauli matrices, stored by its
/// non-identity support. Equal strings compare equal.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PauliString {
    n_sites: usize,
    support: Vec<(usize, PauliAxis)>,
}

impl PauliString {
    /// Builds the canonical string from a site → axis assignment. Identity
    /// entries are dropped; a later duplicate site overrides an earlier one.
    pub fn new<I>(n_sites: usize, assignments: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, PauliAxis)>,
    {
        let map: BTreeMap<usize, PauliAxis> = assignments.into_iter().collect();
        canonical_string(&map, n_sites)
    }

    pub fn identity(n_sites: usize) -> Self {
        PauliString {
            n_sites,
            support: Vec::new(),
        }
    }

    /// Parses a full-length label such as `"XIZ"` (site 1 first).
    pub fn from_label(label: &str) -> Result<Self> {
        let n_sites = label.chars().count();
        if n_sites == 0 {
            return Err(Error::InvalidArgument("empty Pauli label".into()));
        }
        let mut support = Vec::new();
        for (j, c) in label.chars().enumerate() {
            let axis = PauliAxis::from_char(c).ok_or_else(|| {
                Error::InvalidArgument(format!("invalid Pauli character {c:?} in {label:?}"))
            })?;
            if axis != PauliAxis::I {
                support.push((j + 1, axis));
            }
        }
        Ok(PauliString { n_sites, support })
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    /// Sorted `(site, axis)` pairs with no identity entries.
    pub fn support(&self) -> &[(usize, PauliAxis)] {
        &self.support
    }

    pub fn is_identity(&self) -> bool {
        self.support.is_empty()
    }

    pub fn weight(&self) -> usize {
        self.support.len()
    }

    pub fn axis_at(&self, site: usize) -> PauliAxis {
        match self.support.binary_search_by_key(&site, |&(s, _)| s) {
            Ok(pos) => self.support[pos].1,
            Err(_) => PauliAxis::I,
        }
    }

    /// First and last non-identity site.
    pub fn span(&self) -> Option<(usize, usize)> {
        Some((self.support.first()?.0, self.support.last()?.0))
    }

    pub fn label(&self) -> String {
        (1..=self.n_sites).map(|s| self.axis_at(s).as_char()).collect()
    }

    /// Bit masks over basis indices: sites flipped (X or Y), sites carrying a
    /// sign (Y or Z), and the number of Y factors.
    pub(crate) fn masks(&self) -> (usize, usize, usize) {
        let mut flip = 0usize;
        let mut sign = 0usize;
        let mut n_y = 0usize;
        for &(site, axis) in &self.support {
            let bit = 1usize << (self.n_sites - site);
            match axis {
                PauliAxis::X => flip |= bit,
                PauliAxis::Y => {
                    flip |= bit;
                    sign |= bit;
                    n_y += 1;
                }
                PauliAxis::Z => sign |= bit,
                PauliAxis::I => {}
            }
        }
        (flip, sign, n_y)
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// Canonical form of a site → axis assignment on an `n_sites` chain.
pub fn canonical_string(
    assignments: &BTreeMap<usize, PauliAxis>,
    n_sites: usize,
) -> Result<PauliString> {
    if n_sites == 0 {
        return Err(Error::InvalidArgument("chain must have at least one site".into()));
    }
    let mut support = Vec::with_capacity(assignments.len());
    for (&site, &axis) in assignments {
        if site == 0 || site > n_sites {
            return Err(Error::SiteOutOfRange { site, n_sites });
        }
        if axis != PauliAxis::I {
            support.push((site, axis));
        }
    }
    Ok(PauliString { n_sites, support })
}

/// Contiguous block of sites `start..start + width` (1-based).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Window {
    start: usize,
    width: usize,
}

impl Window {
    pub fn new(start: usize, width: usize, n_sites: usize) -> Result<Self> {
        if width == 0 || start == 0 || start + width - 1 > n_sites {
            return Err(Error::WindowOutOfRange {
                start,
                end: start + width.max(1) - 1,
                n_sites,
            });
        }
        Ok(Window { start, width })
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Last site of the window (inclusive).
    pub fn end(&self) -> usize {
        self.start + self.width - 1
    }

    pub fn contains(&self, p: &PauliString) -> bool {
        match p.span() {
            None => true,
            Some((lo, hi)) => lo >= self.start && hi <= self.end(),
        }
    }
}

/// Position of a table string inside its home window: the window index
/// (0-based) and the base-4 pattern of axes over the window, first site most
/// significant.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Placement {
    pub window: usize,
    pub pattern: usize,
}

/// Ordered, deduplicated dictionary of all measured strings.
#[derive(Clone, Debug)]
pub struct StringTable {
    n_sites: usize,
    window_width: usize,
    strings: Vec<PauliString>,
    index: HashMap<PauliString, usize>,
    placements: Vec<Placement>,
}

impl PartialEq for StringTable {
    fn eq(&self, other: &Self) -> bool {
        self.n_sites == other.n_sites
            && self.window_width == other.window_width
            && self.strings == other.strings
    }
}

impl StringTable {
    /// Table from an explicit list. Every string must fit inside a width-`w`
    /// window and the identity must be present exactly once.
    pub fn from_strings(n_sites: usize, window_width: usize, strings: Vec<PauliString>) -> Result<Self> {
        if window_width == 0 || window_width > n_sites {
            return Err(Error::InvalidWindowWidth {
                width: window_width,
                n_sites,
            });
        }
        let mut index = HashMap::with_capacity(strings.len());
        let mut placements = Vec::with_capacity(strings.len());
        for (k, p) in strings.iter().enumerate() {
            if p.n_sites() != n_sites {
                return Err(Error::SizeMismatch {
                    expected: n_sites,
                    found: p.n_sites(),
                });
            }
            if index.insert(p.clone(), k).is_some() {
                return Err(Error::InvalidArgument(format!("duplicate string {p}")));
            }
            placements.push(place(p, window_width)?);
        }
        if !index.contains_key(&PauliString::identity(n_sites)) {
            return Err(Error::InvalidArgument("table lacks the identity string".into()));
        }
        Ok(StringTable {
            n_sites,
            window_width,
            strings,
            index,
            placements,
        })
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn window_width(&self) -> usize {
        self.window_width
    }

    pub fn len(&self) -> usize {
        self.strings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strings.is_empty()
    }

    pub fn strings(&self) -> &[PauliString] {
        &self.strings
    }

    pub fn get(&self, k: usize) -> &PauliString {
        &self.strings[k]
    }

    pub fn position(&self, p: &PauliString) -> Option<usize> {
        self.index.get(p).copied()
    }

    pub fn identity_index(&self) -> usize {
        self.index[&PauliString::identity(self.n_sites)]
    }

    pub fn placement(&self, k: usize) -> Placement {
        self.placements[k]
    }

    pub fn n_windows(&self) -> usize {
        self.n_sites - self.window_width + 1
    }

    /// The `i`-th window (0-based), starting at site `i + 1`.
    pub fn window(&self, i: usize) -> Window {
        Window {
            start: i + 1,
            width: self.window_width,
        }
    }
}

fn place(p: &PauliString, width: usize) -> Result<Placement> {
    let n = p.n_sites();
    let start = match p.span() {
        None => 1,
        Some((lo, hi)) => {
            if hi - lo + 1 > width {
                return Err(Error::OutsideWindow(p.label()));
            }
            lo.min(n - width + 1)
        }
    };
    let pattern = (start..start + width).fold(0usize, |acc, s| acc * 4 + p.axis_at(s).index());
    Ok(Placement {
        window: start - 1,
        pattern,
    })
}

/// All strings supported on some contiguous width-`w` window of an
/// `n_sites` chain, deduplicated. Windows are visited left to right and each
/// window's `4^w` strings in lexicographic axis order (I < X < Y < Z).
pub fn enumerate_window_strings(n_sites: usize, width: usize) -> Result<StringTable> {
    if width == 0 || width > n_sites {
        return Err(Error::InvalidWindowWidth { width, n_sites });
    }
    let per_window = 1usize << (2 * width);
    let mut seen = HashMap::new();
    let mut strings = Vec::new();
    for start in 1..=n_sites - width + 1 {
        for pattern in 0..per_window {
            let support = (0..width).filter_map(|j| {
                let axis = PauliAxis::from_index(pattern >> (2 * (width - 1 - j)));
                (axis != PauliAxis::I).then_some((start + j, axis))
            });
            let p = PauliString {
                n_sites,
                support: support.collect(),
            };
            if !seen.contains_key(&p) {
                seen.insert(p.clone(), strings.len());
                strings.push(p);
            }
        }
    }
    StringTable::from_strings(n_sites, width, strings)
}

/// Dense `2^N × 2^N` matrix of a string.
pub fn dense_of_string(p: &PauliString) -> Result<DMatrix<C64>> {
    let n = p.n_sites();
    if n > DEFAULT_DENSE_LIMIT {
        return Err(Error::DenseLimit {
            n_sites: n,
            limit: DEFAULT_DENSE_LIMIT,
        });
    }
    let dim = 1usize << n;
    let mut m = DMatrix::zeros(dim, dim);
    add_string_to_matrix(&mut m, p, 1.0);
    Ok(m)
}

/// `m += coeff * P` without materializing `P`.
pub fn add_string_to_matrix(m: &mut DMatrix<C64>, p: &PauliString, coeff: f64) {
    let (flip, sign, n_y) = p.masks();
    let base = y_phase(n_y) * coeff;
    for col in 0..m.ncols() {
        let row = col ^ flip;
        m[(row, col)] += parity_sign(col & sign) * base;
    }
}

/// `i^{n_y}`
pub(crate) fn y_phase(n_y: usize) -> C64 {
    match n_y % 4 {
        0 => C64::new(1.0, 0.0),
        1 => C64::new(0.0, 1.0),
        2 => C64::new(-1.0, 0.0),
        _ => C64::new(0.0, -1.0),
    }
}

pub(crate) fn parity_sign(bits: usize) -> f64 {
    if bits.count_ones() % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Dense `2^w × 2^w` matrix of a base-4 window pattern.
pub fn local_pattern_matrix(width: usize, pattern: usize) -> DMatrix<C64> {
    let axes: Vec<(usize, PauliAxis)> = (0..width)
        .map(|j| (j + 1, PauliAxis::from_index(pattern >> (2 * (width - 1 - j)))))
        .collect();
    let p = PauliString::new(width, axes).expect("pattern sites are in range");
    let dim = 1usize << width;
    let mut m = DMatrix::zeros(dim, dim);
    add_string_to_matrix(&mut m, &p, 1.0);
    m
}

/// Real weights `a_k` of the hermitian operator `sum_k a_k P_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientVector {
    table: Arc<StringTable>,
    values: Vec<f64>,
}

impl CoefficientVector {
    pub fn zeros(table: Arc<StringTable>) -> Self {
        let values = vec![0.0; table.len()];
        CoefficientVector { table, values }
    }

    pub fn from_values(table: Arc<StringTable>, values: Vec<f64>) -> Result<Self> {
        if values.len() != table.len() {
            return Err(Error::SizeMismatch {
                expected: table.len(),
                found: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("coefficient vector"));
        }
        Ok(CoefficientVector { table, values })
    }

    pub fn table(&self) -> &Arc<StringTable> {
        &self.table
    }

    pub fn n_sites(&self) -> usize {
        self.table.n_sites()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn get(&self, p: &PauliString) -> f64 {
        self.table.position(p).map_or(0.0, |k| self.values[k])
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// Adds `coeff` to the weight of `p`; `p` must be in the table.
    pub fn add(&mut self, p: &PauliString, coeff: f64) -> Result<()> {
        let k = self
            .table
            .position(p)
            .ok_or_else(|| Error::OutsideWindow(p.label()))?;
        self.values[k] += coeff;
        Ok(())
    }

    pub fn scaled(&self, factor: f64) -> Self {
        CoefficientVector {
            table: Arc::clone(&self.table),
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    /// Sum of the strings homed in each window, as `2^w × 2^w` matrices.
    pub fn window_operators(&self) -> Vec<DMatrix<C64>> {
        let w = self.table.window_width();
        let dim = 1usize << w;
        let mut ops = vec![DMatrix::zeros(dim, dim); self.table.n_windows()];
        for (k, &a) in self.values.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            let pl = self.table.placement(k);
            ops[pl.window] += local_pattern_matrix(w, pl.pattern) * C64::new(a, 0.0);
        }
        ops
    }

    /// Dense matrix `sum_k a_k P_k`.
    pub fn to_dense(&self) -> Result<DMatrix<C64>> {
        let n = self.n_sites();
        if n > DEFAULT_DENSE_LIMIT {
            return Err(Error::DenseLimit {
                n_sites: n,
                limit: DEFAULT_DENSE_LIMIT,
            });
        }
        let dim = 1usize << n;
        let mut m = DMatrix::zeros(dim, dim);
        for (p, &a) in self.table.strings().iter().zip(&self.values) {
            if a != 0.0 {
                add_string_to_matrix(&mut m, p, a);
            }
        }
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kron_oracle(p: &PauliString) -> DMatrix<C64> {
        let mut m = DMatrix::from_element(1, 1, C64::new(1.0, 0.0));
        for s in 1..=p.n_sites() {
            let a = p.axis_at(s).matrix();
            let local = DMatrix::from_fn(2, 2, |r, c| a[r][c]);
            m = m.kronecker(&local);
        }
        m
    }

    #[test]
    fn canonical_examples() {
        let id = PauliString::new(3, []).unwrap();
        assert!(id.is_identity());
        assert_eq!(id.label(), "III");

        let x2 = PauliString::new(3, [(2, PauliAxis::X)]).unwrap();
        assert_eq!(x2.support(), &[(2, PauliAxis::X)]);

        let zz = PauliString::new(3, [(1, PauliAxis::Z), (2, PauliAxis::I), (3, PauliAxis::Z)]).unwrap();
        assert_eq!(zz.support(), &[(1, PauliAxis::Z), (3, PauliAxis::Z)]);
        assert_eq!(zz, PauliString::from_label("ZIZ").unwrap());
    }

    #[test]
    fn site_out_of_range() {
        assert!(matches!(
            PauliString::new(3, [(4, PauliAxis::X)]),
            Err(Error::SiteOutOfRange { site: 4, n_sites: 3 })
        ));
        assert!(PauliString::new(3, [(0, PauliAxis::X)]).is_err());
    }

    #[test]
    fn table_sizes() {
        assert_eq!(enumerate_window_strings(2, 2).unwrap().len(), 16);
        assert_eq!(enumerate_window_strings(3, 2).unwrap().len(), 28);
        assert_eq!(enumerate_window_strings(5, 1).unwrap().len(), 16);
        assert!(matches!(
            enumerate_window_strings(2, 3),
            Err(Error::InvalidWindowWidth { .. })
        ));
    }

    #[test]
    fn table_size_matches_brute_force_count() {
        // Brute force: all 4^N strings, keep those whose span fits in w sites.
        for n in 1..=6 {
            for w in 1..=n {
                let mut count = 0;
                for code in 0..(1usize << (2 * n)) {
                    let sites: Vec<usize> = (0..n).filter(|j| (code >> (2 * j)) & 3 != 0).collect();
                    let fits = match (sites.first(), sites.last()) {
                        (Some(lo), Some(hi)) => hi - lo < w,
                        _ => true,
                    };
                    if fits {
                        count += 1;
                    }
                }
                let table = enumerate_window_strings(n, w).unwrap();
                assert_eq!(table.len(), count, "n={n} w={w}");
                assert!(table.len() <= (n - w + 1) << (2 * w));
                assert!(table.len() >= 1 << (2 * w));
            }
        }
    }

    #[test]
    fn table_is_deterministic_and_placed() {
        let a = enumerate_window_strings(6, 3).unwrap();
        let b = enumerate_window_strings(6, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.get(0), &PauliString::identity(6));
        assert_eq!(a.identity_index(), 0);
        for (k, p) in a.strings().iter().enumerate() {
            let pl = a.placement(k);
            let win = a.window(pl.window);
            assert!(win.contains(p));
            let local = local_pattern_matrix(3, pl.pattern);
            let label: String = (win.start()..=win.end()).map(|s| p.axis_at(s).as_char()).collect();
            assert_eq!(local, kron_oracle(&PauliString::from_label(&label).unwrap()));
        }
    }

    #[test]
    fn dense_examples() {
        let id = dense_of_string(&PauliString::identity(1)).unwrap();
        assert_eq!(id, DMatrix::identity(2, 2));
        let x = dense_of_string(&PauliString::from_label("X").unwrap()).unwrap();
        assert_eq!(x[(0, 1)], C64::new(1.0, 0.0));
        assert_eq!(x[(1, 0)], C64::new(1.0, 0.0));
        assert_eq!(x[(0, 0)], C64::new(0.0, 0.0));
        let zz = dense_of_string(&PauliString::from_label("ZZ").unwrap()).unwrap();
        let diag: Vec<f64> = (0..4).map(|i| zz[(i, i)].re).collect();
        assert_eq!(diag, vec![1.0, -1.0, -1.0, 1.0]);
        assert!(dense_of_string(&PauliString::identity(15)).is_err());
    }

    #[test]
    fn dense_matches_kronecker_oracle() {
        let table = enumerate_window_strings(4, 2).unwrap();
        for p in table.strings() {
            assert_eq!(dense_of_string(p).unwrap(), kron_oracle(p), "{p}");
        }
    }

    #[test]
    fn strings_square_to_identity() {
        let table = enumerate_window_strings(5, 2).unwrap();
        for p in table.strings() {
            let m = dense_of_string(p).unwrap();
            assert_eq!(&m * &m, DMatrix::identity(32, 32));
        }
    }

    #[test]
    fn coefficient_vector_checks() {
        let t = Arc::new(enumerate_window_strings(3, 2).unwrap());
        assert!(CoefficientVector::from_values(Arc::clone(&t), vec![0.0; 3]).is_err());
        let mut v = vec![0.0; t.len()];
        v[2] = f64::NAN;
        assert!(CoefficientVector::from_values(Arc::clone(&t), v).is_err());
        let mut a = CoefficientVector::zeros(Arc::clone(&t));
        assert!(a.add(&PauliString::from_label("XIX").unwrap(), 1.0).is_err());
        a.add(&PauliString::from_label("XXI").unwrap(), 0.5).unwrap();
        assert_eq!(a.get(&PauliString::from_label("XXI").unwrap()), 0.5);
    }

    #[test]
    fn from_strings_rejects_wide_strings() {
        let strings = vec![PauliString::identity(4), PauliString::from_label("XIIX").unwrap()];
        assert!(matches!(
            StringTable::from_strings(4, 2, strings),
            Err(Error::OutsideWindow(_))
        ));
        let no_identity = vec![PauliString::from_label("XIII").unwrap()];
        assert!(StringTable::from_strings(4, 2, no_identity).is_err());
    }
}
