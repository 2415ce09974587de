//! Instance-level check of the interpolation inequality
//! `||e^{t Delta} f|| <= N e^{N/(t-s)} ||e^{t Delta} f||_E^{1-eps} ||e^{s Delta} f||^eps`.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::linalg::{bisect, golden_section};
use crate::obsets::ObservationSet;
use crate::spectrum::Spectrum;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterpolationReport {
    pub lhs: f64,
    /// `||e^{t Delta} f||` on the set (weighted L1 on masks, max on clouds).
    pub observed: f64,
    /// `||e^{s Delta} f||_2`.
    pub earlier: f64,
    /// Smallest `N` for which the inequality holds on this instance.
    pub n_required: f64,
    /// Minimizer of `e^{eps x} a + e^{-(1-eps) x} b` over `x = Lambda^2 (t-s) >= 0`.
    pub cutoff_numeric: f64,
    /// `e^{Lambda^2 (t-s)} = b / a`.
    pub cutoff_explicit: f64,
    /// `|e^{Lambda^2 (t-s)} a / b - 1|` at the numeric minimizer.
    pub minimizer_mismatch: f64,
    /// `||e^{t Delta} (1 - Pi_Lambda) f||` at the numeric minimizer.
    pub high_part: f64,
    /// `e^{-Lambda^2 (t-s)} ||e^{s Delta} f||`.
    pub high_bound: f64,
    pub split_holds: bool,
}

/// Solves `ln N + N / tau = target` for `N > 0`.
pub(crate) fn solve_n(target: f64, tau: f64) -> f64 {
    let g = |x: f64| x + x.exp() / tau - target;
    let lo = (target - 2.0).min(tau.ln());
    let hi = target.max(lo + 1.0);
    bisect(g, lo, hi, 1e-15).exp()
}

fn log_sum_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}

pub fn interpolation_check(
    spec: &Spectrum,
    set: &ObservationSet,
    f: &[f64],
    s: f64,
    t: f64,
    eps: f64,
) -> Result<InterpolationReport> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(invalid!(
            "interpolation exponent must lie in (0, 1), got {eps}"
        ));
    }
    if !(s >= 0.0) || !(t > s) {
        return Err(invalid!("need 0 <= s < t, got s = {s}, t = {t}"));
    }
    if !spec.complete {
        return Err(invalid!("interpolation check needs the complete spectrum"));
    }
    let tau = t - s;
    let c = spec.coefficients(f)?;
    let at = |time: f64| -> Vec<f64> {
        let ct: Vec<f64> = c
            .iter()
            .zip(&spec.values)
            .map(|(v, l)| v * (-l * time).exp())
            .collect();
        ct
    };
    let ct = at(t);
    let cs = at(s);
    let lhs = ct.iter().map(|v| v * v).sum::<f64>().sqrt();
    let earlier = cs.iter().map(|v| v * v).sum::<f64>().sqrt();
    let observed = set.observe(spec, &spec.synthesize(&ct));
    let n_required = if observed > 0.0 && lhs > 0.0 {
        let target = lhs.ln() - (1.0 - eps) * observed.ln() - eps * earlier.ln();
        solve_n(target, tau)
    } else if lhs > 0.0 {
        f64::INFINITY
    } else {
        0.0
    };
    let (la, lb) = (observed.ln(), earlier.ln());
    let objective = |x: f64| log_sum_exp(eps * x + la, -(1.0 - eps) * x + lb);
    let (x_num, mismatch, explicit) = if observed > 0.0 && earlier > 0.0 {
        let hi = 2.0 * (lb - la).abs() + 10.0;
        let x = golden_section(objective, 0.0, hi, 1e-14);
        let x_exp = (lb - la).max(0.0);
        (x, ((x + la - lb).exp() - 1.0).abs(), (x_exp / tau).sqrt())
    } else {
        (0.0, f64::NAN, f64::NAN)
    };
    let cutoff_numeric = (x_num / tau).sqrt();
    let high_part = c
        .iter()
        .zip(&spec.values)
        .filter(|(_, l)| l.max(0.0).sqrt() > cutoff_numeric)
        .map(|(v, l)| (v * (-l * t).exp()).powi(2))
        .sum::<f64>()
        .sqrt();
    let high_bound = (-x_num).exp() * earlier;
    Ok(InterpolationReport {
        lhs,
        observed,
        earlier,
        n_required,
        cutoff_numeric,
        cutoff_explicit: explicit,
        minimizer_mismatch: mismatch,
        high_part,
        high_bound,
        split_holds: high_part <= high_bound * (1.0 + 1e-12) + 1e-300,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterpolationBatch {
    pub reports: Vec<InterpolationReport>,
    /// Supremum of the per-instance `N`.
    pub n_sup: f64,
    /// Every instance satisfies the inequality with `n_sup`.
    pub holds_all: bool,
    pub max_mismatch: f64,
}

pub fn interpolation_batch(
    spec: &Spectrum,
    set: &ObservationSet,
    fields: &[Vec<f64>],
    s: f64,
    t: f64,
    eps: f64,
) -> Result<InterpolationBatch> {
    let reports: Vec<InterpolationReport> = fields
        .iter()
        .map(|f| interpolation_check(spec, set, f, s, t, eps))
        .collect::<Result<_>>()?;
    Ok(summarize(reports, t - s, eps))
}

pub fn summarize(reports: Vec<InterpolationReport>, tau: f64, eps: f64) -> InterpolationBatch {
    let n_sup = reports.iter().fold(0.0f64, |m, r| m.max(r.n_required));
    let holds_all = reports.iter().all(|r| {
        if r.lhs == 0.0 {
            return true;
        }
        let rhs = n_sup.ln() + n_sup / tau + (1.0 - eps) * r.observed.ln() + eps * r.earlier.ln();
        r.lhs.ln() <= rhs + 1e-12
    });
    let max_mismatch = reports
        .iter()
        .fold(0.0f64, |m, r| m.max(r.minimizer_mismatch));
    InterpolationBatch {
        reports,
        n_sup,
        holds_all,
        max_mismatch,
    }
}
