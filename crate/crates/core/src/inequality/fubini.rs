//! Time slices of a space-time observation set.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::domain::Domain;
use crate::error::{invalid, Result};

/// Uniform time slabs on `(0, horizon)`, each carrying a cell mask.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimeMask {
    pub horizon: f64,
    /// `slabs[k][cell]` is the slice on `(k dt, (k+1) dt)`.
    pub slabs: Vec<Vec<bool>>,
}

impl SpaceTimeMask {
    pub fn new(domain: &Domain, horizon: f64, slabs: Vec<Vec<bool>>) -> Result<Self> {
        if !(horizon > 0.0) || slabs.is_empty() {
            return Err(invalid!(
                "space-time mask needs a positive horizon and at least one slab"
            ));
        }
        if slabs.iter().any(|s| s.len() != domain.cell_count()) {
            return Err(invalid!(
                "every slab needs one flag per cell ({})",
                domain.cell_count()
            ));
        }
        Ok(Self { horizon, slabs })
    }

    /// `E x (0, T)`.
    pub fn product(domain: &Domain, mask: &[bool], horizon: f64, slabs: usize) -> Result<Self> {
        Self::new(domain, horizon, alloc::vec![mask.to_vec(); slabs.max(1)])
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.slabs.len() as f64
    }

    pub fn slab_interval(&self, k: usize) -> (f64, f64) {
        let dt = self.dt();
        (k as f64 * dt, (k + 1) as f64 * dt)
    }

    pub fn slice_measure(&self, domain: &Domain, k: usize) -> f64 {
        self.slabs[k].iter().enumerate().filter(|(_, &m)| m).count() as f64 * domain.cell_volume()
    }

    pub fn measure(&self, domain: &Domain) -> f64 {
        (0..self.slabs.len())
            .map(|k| self.slice_measure(domain, k))
            .sum::<f64>()
            * self.dt()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FubiniSlices {
    /// Slabs whose slice has measure at least `|F| / (2T)`.
    pub slabs: Vec<usize>,
    pub slice_measures: Vec<f64>,
    pub threshold: f64,
    pub measure: f64,
    /// `|J|`.
    pub time_measure: f64,
    /// `|F| / (2 Vol)`, implied by slicing.
    pub bound: f64,
    /// `|F| / (2 T Vol)`.
    pub bound_scaled: f64,
    pub holds: bool,
}

pub fn fubini_slices(domain: &Domain, f: &SpaceTimeMask) -> Result<FubiniSlices> {
    let slice_measures: Vec<f64> = (0..f.slabs.len())
        .map(|k| f.slice_measure(domain, k))
        .collect();
    let measure = slice_measures.iter().sum::<f64>() * f.dt();
    if !(measure > 0.0) {
        return Err(invalid!("space-time set has zero measure"));
    }
    let threshold = measure / (2.0 * f.horizon);
    let slabs: Vec<usize> = (0..slice_measures.len())
        .filter(|&k| slice_measures[k] >= threshold * (1.0 - 1e-12))
        .collect();
    let time_measure = slabs.len() as f64 * f.dt();
    let vol = domain.volume();
    let bound = measure / (2.0 * vol);
    Ok(FubiniSlices {
        slabs,
        slice_measures,
        threshold,
        measure,
        time_measure,
        bound,
        bound_scaled: bound / f.horizon,
        holds: time_measure >= bound * (1.0 - 1e-12),
    })
}
