//! Eigenpairs of the discrete operator, spectral projectors, the heat
//! semigroup, the `sinh` lift and spectral asymptotics.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::domain::BoundaryCondition;
use crate::error::{invalid, Error, Result};
use crate::linalg::{self, fit_line, LineFit, Tridiagonal};
use crate::operator::DiscreteOperator;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "by", content = "value", rename_all = "snake_case")]
pub enum Selection {
    All,
    Count(usize),
    /// All modes with frequency `lambda_k <= value`.
    MaxFrequency(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Solver {
    /// Full symmetric decomposition of `W^{-1/2} K W^{-1/2}`.
    Dense,
    /// Sturm bisection and inverse iteration; 1-D operators only.
    Tridiagonal,
}

/// Ascending eigenpairs `K e_k = lambda_k^2 w e_k`, orthonormal in the
/// weighted inner product.
#[derive(Clone, Debug)]
pub struct Spectrum {
    /// Squared frequencies `lambda_k^2`.
    pub values: Vec<f64>,
    pub modes: Vec<Vec<f64>>,
    pub mass: Vec<f64>,
    pub kappa: Vec<f64>,
    pub volume: Vec<f64>,
    /// True when every eigenpair of the operator is present.
    pub complete: bool,
    /// Frequency of the first omitted mode; every mode below it is present.
    pub band_limit: f64,
    pub bc: BoundaryCondition,
    pub dim: usize,
    pub h_max: f64,
    pub max_residual: f64,
}

pub fn compute_spectrum(
    op: &DiscreteOperator,
    selection: Selection,
    solver: Solver,
) -> Result<Spectrum> {
    let n = op.size();
    let inv_sqrt: Vec<f64> = op.mass.iter().map(|w| 1.0 / w.sqrt()).collect();
    let (mut values, mut modes, band_limit) = match solver {
        Solver::Dense => {
            let mut a = op.stiffness.to_dense();
            for i in 0..n {
                for j in 0..n {
                    a[(i, j)] *= inv_sqrt[i] * inv_sqrt[j];
                }
            }
            let (vals, vecs) = linalg::sym_eigen(a)?;
            let keep = match selection {
                Selection::All => n,
                Selection::Count(c) => c.min(n),
                Selection::MaxFrequency(l) => vals
                    .iter()
                    .take_while(|&&v| v <= l * l * (1.0 + 1e-12))
                    .count(),
            };
            let modes: Vec<Vec<f64>> = (0..keep)
                .map(|k| {
                    vecs.column(k)
                        .iter()
                        .zip(&inv_sqrt)
                        .map(|(v, s)| v * s)
                        .collect()
                })
                .collect();
            let limit = if keep < n {
                vals[keep].max(0.0).sqrt()
            } else {
                f64::INFINITY
            };
            (vals[..keep].to_vec(), modes, limit)
        }
        Solver::Tridiagonal => {
            if op.dim != 1 {
                return Err(invalid!("tridiagonal solver needs a 1-D operator"));
            }
            let t = Tridiagonal {
                diag: (0..n)
                    .map(|i| op.stiffness.get(i, i) * inv_sqrt[i] * inv_sqrt[i])
                    .collect(),
                off: (0..n.saturating_sub(1))
                    .map(|i| op.stiffness.get(i, i + 1) * inv_sqrt[i] * inv_sqrt[i + 1])
                    .collect(),
            };
            let count = match selection {
                Selection::All => n,
                Selection::Count(c) => c.min(n),
                Selection::MaxFrequency(l) => {
                    t.count_below(l * l * (1.0 + 1e-12) + f64::MIN_POSITIVE)
                }
            };
            let (vals, vecs) = t.lowest(count);
            let modes = vecs
                .into_iter()
                .map(|v| v.iter().zip(&inv_sqrt).map(|(a, s)| a * s).collect())
                .collect();
            let limit = if count < n {
                t.eigenvalue(count).max(0.0).sqrt()
            } else {
                f64::INFINITY
            };
            (vals, modes, limit)
        }
    };
    let scale = values.last().copied().unwrap_or(0.0).abs().max(1.0);
    if op.bc == BoundaryCondition::Neumann && !values.is_empty() && values[0].abs() <= 1e-10 * scale
    {
        values[0] = 0.0;
    }
    for m in modes.iter_mut() {
        normalize_sign(m);
    }
    let kmax = op.stiffness.to_dense().amax().max(1.0);
    let mut max_residual = 0.0f64;
    for (lam, e) in values.iter().zip(&modes) {
        let ke = op.stiffness.mul_vec(e);
        let r: f64 = ke
            .iter()
            .zip(e)
            .zip(&op.mass)
            .map(|((k, v), w)| (k - lam * w * v).powi(2))
            .sum();
        max_residual = max_residual.max(r.sqrt() / linalg::norm(e));
    }
    if !(max_residual <= 1e-8 * kmax) {
        return Err(Error::NumericalFailure {
            message: alloc::string::String::from("generalized eigen residual above tolerance"),
            residual: max_residual,
        });
    }
    Ok(Spectrum {
        complete: values.len() == n,
        band_limit,
        values,
        modes,
        mass: op.mass.clone(),
        kappa: op.kappa.clone(),
        volume: op.volume.clone(),
        bc: op.bc,
        dim: op.dim,
        h_max: op.h_max,
        max_residual,
    })
}

/// First clearly non-zero entry made positive.
fn normalize_sign(v: &mut [f64]) {
    let m = linalg::max_abs(v);
    if let Some(first) = v.iter().find(|x| x.abs() > 1e-8 * m) {
        if *first < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

impl Spectrum {
    #[inline]
    pub fn len(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn size(&self) -> usize {
        self.mass.len()
    }

    #[inline]
    pub fn frequency(&self, k: usize) -> f64 {
        self.values[k].max(0.0).sqrt()
    }

    pub fn max_frequency(&self) -> f64 {
        self.values.last().map_or(0.0, |v| v.max(0.0).sqrt())
    }

    /// Number of modes with `lambda_k <= cutoff`.
    pub fn count_below(&self, cutoff: f64) -> usize {
        let c2 = cutoff * cutoff * (1.0 + 1e-12);
        self.values.iter().take_while(|&&v| v <= c2).count()
    }

    pub fn mode(&self, k: usize) -> &[f64] {
        &self.modes[k]
    }

    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        linalg::weighted_dot(&self.mass, u, v)
    }

    pub fn norm(&self, u: &[f64]) -> f64 {
        linalg::weighted_norm(&self.mass, u)
    }

    fn check_len(&self, f: &[f64]) -> Result<()> {
        if f.len() != self.size() {
            return Err(invalid!(
                "field has {} values, spectrum has {} unknowns",
                f.len(),
                self.size()
            ));
        }
        Ok(())
    }

    /// Coefficients `u_k = <f, e_k>_w` over all computed modes.
    pub fn coefficients(&self, f: &[f64]) -> Result<Vec<f64>> {
        self.check_len(f)?;
        Ok(self.modes.iter().map(|e| self.inner(f, e)).collect())
    }

    /// `sum_k c_k e_k` for the leading `c.len()` modes.
    pub fn synthesize(&self, c: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.size()];
        for (ck, e) in c.iter().zip(&self.modes) {
            if *ck != 0.0 {
                out.iter_mut().zip(e).for_each(|(o, v)| *o += ck * v);
            }
        }
        out
    }

    /// Number of modes with `lambda_k <= cutoff`, refusing cutoffs past the band.
    pub fn modes_below(&self, cutoff: f64) -> Result<usize> {
        if !(cutoff >= 0.0) {
            return Err(invalid!("cutoff must be non-negative, got {cutoff}"));
        }
        if cutoff >= self.band_limit {
            return Err(invalid!(
                "cutoff {cutoff} reaches past the computed band (limit {})",
                self.band_limit
            ));
        }
        Ok(self.count_below(cutoff))
    }

    /// Modes `0..m` as columns of a dense matrix.
    pub fn basis(&self, m: usize) -> DMatrix<f64> {
        DMatrix::from_fn(self.size(), m, |i, k| self.modes[k][i])
    }
}

/// `Pi_Lambda f`, the weighted-orthogonal projection on modes with
/// `lambda_k <= cutoff`.
pub fn project_low(s: &Spectrum, f: &[f64], cutoff: f64) -> Result<Vec<f64>> {
    let m = s.modes_below(cutoff)?;
    let c = s.coefficients(f)?;
    Ok(s.synthesize(&c[..m]))
}

/// Heat flow `e^{-lambda_k^2 t}` applied to modal coefficients.
pub fn heat_coefficients(s: &Spectrum, c: &[f64], t: f64) -> Result<Vec<f64>> {
    if !(t >= 0.0) {
        return Err(invalid!("time must be non-negative, got {t}"));
    }
    Ok(c.iter()
        .zip(&s.values)
        .map(|(ck, l)| ck * (-l * t).exp())
        .collect())
}

/// `e^{t Delta} f`; needs the complete basis.
pub fn heat_propagate(s: &Spectrum, f: &[f64], t: f64) -> Result<Vec<f64>> {
    if !s.complete {
        return Err(invalid!(
            "heat flow of a nodal field needs the complete spectrum"
        ));
    }
    let c = s.coefficients(f)?;
    Ok(s.synthesize(&heat_coefficients(s, &c, t)?))
}

/// `sinh(lambda t) / lambda`, equal to `t` at `lambda = 0`.
#[inline]
pub fn sinhc(lambda: f64, t: f64) -> f64 {
    let x = lambda * t;
    if x.abs() < 1e-8 {
        t * (1.0 + x * x / 6.0)
    } else {
        x.sinh() / lambda
    }
}

/// `u(t) = sum_{lambda_k <= cutoff} c_k sinh(lambda_k t)/lambda_k e_k` at each time.
pub fn elliptic_lift(s: &Spectrum, c: &[f64], cutoff: f64, times: &[f64]) -> Result<Vec<Vec<f64>>> {
    if c.len() > s.len() {
        return Err(invalid!("{} coefficients for {} modes", c.len(), s.len()));
    }
    let m = s.count_below(cutoff);
    if let Some(k) = c
        .iter()
        .enumerate()
        .skip(m)
        .find(|(_, v)| **v != 0.0)
        .map(|(k, _)| k)
    {
        return Err(invalid!(
            "coefficient of mode {k} is above the cutoff {cutoff}"
        ));
    }
    Ok(times
        .iter()
        .map(|&t| {
            let ct: Vec<f64> = c
                .iter()
                .take(m)
                .enumerate()
                .map(|(k, v)| v * sinhc(s.frequency(k), t))
                .collect();
            s.synthesize(&ct)
        })
        .collect())
}

/// Indices of positive frequencies inside the resolved band `lambda h <= 1`.
fn resolved(s: &Spectrum) -> Vec<usize> {
    (0..s.len())
        .filter(|&k| s.frequency(k) * s.h_max <= 1.0)
        .collect()
}

/// Slope of `log lambda_k` against `log k` over the resolved band.
pub fn weyl_exponent(s: &Spectrum) -> Result<LineFit> {
    let scale = s.max_frequency().max(1.0);
    let band: Vec<usize> = resolved(s)
        .into_iter()
        .filter(|&k| s.frequency(k) > 1e-9 * scale)
        .collect();
    if band.len() < 30 {
        return Err(Error::InsufficientData(alloc::format!(
            "{} resolved positive frequencies, need 30",
            band.len()
        )));
    }
    let x: Vec<f64> = (1..=band.len()).map(|k| (k as f64).ln()).collect();
    let y: Vec<f64> = band.iter().map(|&k| s.frequency(k).ln()).collect();
    Ok(fit_line(&x, &y))
}

/// Slope of `log ||e_k||_inf` against `log(1 + lambda_k)` over the resolved band.
pub fn eigen_sup_exponent(s: &Spectrum) -> Result<LineFit> {
    let band = resolved(s);
    if band.len() < 30 {
        return Err(Error::InsufficientData(alloc::format!(
            "{} resolved modes, need 30",
            band.len()
        )));
    }
    let x: Vec<f64> = band.iter().map(|&k| (1.0 + s.frequency(k)).ln()).collect();
    let y: Vec<f64> = band
        .iter()
        .map(|&k| linalg::max_abs(&s.modes[k]).ln())
        .collect();
    Ok(fit_line(&x, &y))
}

/// Sharp constant of `||sum u_k e_k||_inf <= C (sum (1+lambda_k)^{2 sigma} u_k^2)^{1/2}`
/// over the computed modes.
pub fn sobolev_constant(s: &Spectrum, sigma: f64) -> f64 {
    let mut acc = vec![0.0; s.size()];
    for k in 0..s.len() {
        let f = (1.0 + s.frequency(k)).powf(-2.0 * sigma);
        acc.iter_mut()
            .zip(&s.modes[k])
            .for_each(|(a, e)| *a += f * e * e);
    }
    acc.iter().fold(0.0f64, |m, v| m.max(*v)).sqrt()
}
