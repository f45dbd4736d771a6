//! Measurement records: expectation values of every table string.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::pauli::StringTable;
use crate::state::{expectations_from_reductions, State};

/// Slack on top of the `1 + 5σ` sanity bound for rounding.
const BOUND_SLACK: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementRecord {
    table: Arc<StringTable>,
    values: Vec<f64>,
    noise_sigma: f64,
    noise_seed: Option<u64>,
    target_label: String,
}

impl MeasurementRecord {
    pub fn new(
        table: Arc<StringTable>,
        values: Vec<f64>,
        noise_sigma: f64,
        noise_seed: Option<u64>,
        target_label: impl Into<String>,
    ) -> Result<Self> {
        let r = MeasurementRecord {
            table,
            values,
            noise_sigma,
            noise_seed,
            target_label: target_label.into(),
        };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.len() != self.table.len() {
            return Err(Error::SizeMismatch {
                expected: self.table.len(),
                found: self.values.len(),
            });
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!("invalid noise sigma {}", self.noise_sigma)));
        }
        let id = self.table.identity_index();
        if self.values[id] != 1.0 {
            return Err(Error::InvalidArgument(format!(
                "identity string must have value 1, found {}",
                self.values[id]
            )));
        }
        let bound = 1.0 + 5.0 * self.noise_sigma + BOUND_SLACK;
        for (p, &v) in self.table.strings().iter().zip(&self.values) {
            if !v.is_finite() {
                return Err(Error::NonFinite("measurement value"));
            }
            if v.abs() > bound {
                return Err(Error::InvalidArgument(format!("value {v} of {p} exceeds the bound {bound}")));
            }
        }
        Ok(())
    }

    pub fn table(&self) -> &Arc<StringTable> {
        &self.table
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn noise_sigma(&self) -> f64 {
        self.noise_sigma
    }

    pub fn noise_seed(&self) -> Option<u64> {
        self.noise_seed
    }

    pub fn target_label(&self) -> &str {
        &self.target_label
    }

    pub fn n_sites(&self) -> usize {
        self.table.n_sites()
    }
}

/// Exact expectation values of every table string, from the window
/// reductions of `target`.
pub fn measure_all(target: &State, table: Arc<StringTable>, label: impl Into<String>) -> Result<MeasurementRecord> {
    if target.n_sites() != table.n_sites() {
        return Err(Error::SizeMismatch {
            expected: table.n_sites(),
            found: target.n_sites(),
        });
    }
    let rdms = target.window_density_matrices(table.window_width())?;
    let mut values = expectations_from_reductions(&table, &rdms)?;
    values[table.identity_index()] = 1.0;
    MeasurementRecord::new(table, values, 0.0, None, label)
}

/// Adds independent `N(0, σ²)` noise to every non-identity value.
pub fn add_gaussian_noise(record: &MeasurementRecord, sigma: f64, seed: u64) -> Result<MeasurementRecord> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidArgument(format!("invalid noise sigma {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(record.clone());
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let id = record.table.identity_index();
    let values = record
        .values
        .iter()
        .enumerate()
        .map(|(k, &v)| if k == id { v } else { v + normal.sample(&mut rng) })
        .collect();
    Ok(MeasurementRecord {
        table: Arc::clone(&record.table),
        values,
        noise_sigma: (record.noise_sigma.powi(2) + sigma * sigma).sqrt(),
        noise_seed: Some(seed),
        target_label: record.target_label.clone(),
    })
}
