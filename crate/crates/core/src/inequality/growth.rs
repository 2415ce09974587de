use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use super::constants::{constant, ConstantReport, IrlsOptions, NormPair};
use crate::error::{invalid, Error, Result};
use crate::linalg::fit_line;
use crate::obsets::ObservationSet;
use crate::spectrum::Spectrum;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub cutoff: f64,
    pub modes: usize,
    pub constant: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstantSweep {
    pub norm: NormPair,
    pub entries: Vec<SweepEntry>,
}

impl ConstantSweep {
    pub fn from_reports(norm: NormPair, reports: &[ConstantReport]) -> Self {
        let entries = reports
            .iter()
            .map(|r| SweepEntry {
                cutoff: r.cutoff,
                modes: r.modes,
                constant: r.value,
            })
            .collect();
        Self { norm, entries }
    }
}

/// `log C(Lambda) ~ log C + D Lambda`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthFit {
    pub prefactor: f64,
    pub rate: f64,
    pub r_squared: Option<f64>,
    /// All constants equal: the fit carries no growth information.
    pub degenerate_flat: bool,
    pub points: usize,
}

pub fn sweep(
    s: &Spectrum,
    set: &ObservationSet,
    norm: NormPair,
    cutoffs: &[f64],
    opts: &IrlsOptions,
) -> Result<ConstantSweep> {
    let reports: Vec<ConstantReport> = cutoffs
        .iter()
        .map(|&c| constant(s, set, norm, c, opts))
        .collect::<Result<_>>()?;
    Ok(ConstantSweep::from_reports(norm, &reports))
}

pub fn fit_growth(sweep: &ConstantSweep) -> Result<GrowthFit> {
    let e = &sweep.entries;
    if e.len() < 5 {
        return Err(Error::InsufficientData(alloc::format!(
            "{} sweep points, need 5",
            e.len()
        )));
    }
    if e.windows(2).any(|w| !(w[1].cutoff > w[0].cutoff)) {
        return Err(invalid!("sweep cutoffs must be strictly ascending"));
    }
    if let Some(bad) = e
        .iter()
        .find(|x| !x.constant.is_finite() || !(x.constant > 0.0))
    {
        return Err(Error::InsufficientData(alloc::format!(
            "constant at cutoff {} is {}, growth is not measurable",
            bad.cutoff,
            bad.constant
        )));
    }
    let x: Vec<f64> = e.iter().map(|x| x.cutoff).collect();
    let y: Vec<f64> = e.iter().map(|x| x.constant.ln()).collect();
    let f = fit_line(&x, &y);
    let flat = f.r_squared.is_none();
    Ok(GrowthFit {
        prefactor: f.intercept.exp(),
        rate: if flat { 0.0 } else { f.slope },
        r_squared: f.r_squared,
        degenerate_flat: flat,
        points: e.len(),
    })
}
