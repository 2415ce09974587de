//! Observability from a geometric sequence of observation times, and the
//! per-step inequality whose telescoped sum produces it.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::inequality::interpolation::solve_n;
use crate::inequality::times::{SequenceKind, TimeSequence};
use crate::obsets::ObservationSet;
use crate::spectrum::Spectrum;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TelescopeReport {
    /// `||e^{T Delta} f||`.
    pub lhs: f64,
    /// `||e^{s_n Delta} f||` for every time of the sequence.
    pub norms: Vec<f64>,
    /// Observation of `e^{s_n Delta} f` on the set, one per gap.
    pub observed: Vec<f64>,
    /// `ln(e^{-D/(s_n - s_{n+1})} observed_n)`.
    pub log_weighted: Vec<f64>,
    /// Smallest `C` with `lhs <= C sup_n e^{-D/gap_n} observed_n`.
    pub constant: f64,
    /// Step attaining the supremum.
    pub argmax: usize,
    /// Smallest interpolation constant `N` on each pair `(s_{n+1}, s_n)`.
    pub interpolation: Vec<f64>,
}

fn check_sequence(seq: &TimeSequence) -> Result<()> {
    seq.validate()?;
    if seq.kind != SequenceKind::LrGeometric || seq.is_increasing() {
        return Err(invalid!(
            "telescoping needs a decreasing geometric observation sequence"
        ));
    }
    if seq.times.len() < 2 {
        return Err(invalid!("telescoping needs at least one gap"));
    }
    Ok(())
}

/// `rate` weights the observations; `eps` is the interpolation exponent used
/// for the per-pair constants.
pub fn telescope_check(
    spec: &Spectrum,
    set: &ObservationSet,
    seq: &TimeSequence,
    f: &[f64],
    rate: f64,
    eps: f64,
) -> Result<TelescopeReport> {
    check_sequence(seq)?;
    if !spec.complete {
        return Err(invalid!("telescope check needs the complete spectrum"));
    }
    if !(rate >= 0.0) {
        return Err(invalid!("rate must be non-negative, got {rate}"));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(invalid!(
            "interpolation exponent must lie in (0, 1), got {eps}"
        ));
    }
    let c = spec.coefficients(f)?;
    let at = |time: f64| -> Vec<f64> {
        c.iter()
            .zip(&spec.values)
            .map(|(v, l)| v * (-l * time).exp())
            .collect()
    };
    let mut norms = Vec::with_capacity(seq.times.len());
    let mut observed = Vec::with_capacity(seq.times.len() - 1);
    for (n, &s) in seq.times.iter().enumerate() {
        let cs = at(s);
        norms.push(cs.iter().map(|v| v * v).sum::<f64>().sqrt());
        if n + 1 < seq.times.len() {
            observed.push(set.observe(spec, &spec.synthesize(&cs)));
        }
    }
    let gaps = seq.gaps();
    let log_weighted: Vec<f64> = observed
        .iter()
        .zip(&gaps)
        .map(|(o, g)| o.ln() - rate / g)
        .collect();
    let (argmax, best) =
        log_weighted
            .iter()
            .enumerate()
            .fold(
                (0, f64::NEG_INFINITY),
                |(i, m), (j, &v)| if v > m { (j, v) } else { (i, m) },
            );
    let lhs = norms[0];
    let constant = if lhs == 0.0 {
        0.0
    } else {
        (lhs.ln() - best).exp()
    };
    let interpolation = gaps
        .iter()
        .enumerate()
        .map(|(n, &g)| {
            let (x, y, o) = (norms[n], norms[n + 1], observed[n]);
            if x == 0.0 {
                0.0
            } else if o == 0.0 {
                f64::INFINITY
            } else {
                solve_n(x.ln() - (1.0 - eps) * o.ln() - eps * y.ln(), g)
            }
        })
        .collect();
    Ok(TelescopeReport {
        lhs,
        norms,
        observed,
        log_weighted,
        constant,
        argmax,
        interpolation,
    })
}

/// Parameters of the per-step inequality
/// `e^{-A/g} X_n - e^{-D' A/g} X_{n+1} <= C e^{-B/g} O_n`, `g = s_n - s_{n+1}`,
/// derived from the interpolation constant `N` by Young's inequality:
/// `D' = 1/ratio`, `eps = ratio/4`, `A = max(2B, 4.4 N)`, `C = (1-eps) N^{1/(1-eps)}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepFit {
    pub interpolation: f64,
    pub eps: f64,
    pub a: f64,
    pub d_multiple: f64,
    pub b: f64,
    pub c: f64,
    /// Smallest constant that works at this `A` on the batch.
    pub c_empirical: f64,
    /// Largest residual `lhs - rhs` over all instances and steps, natural units.
    pub max_residual: f64,
    /// Largest residual relative to `e^{-A/g} X_n`.
    pub max_relative: f64,
    pub nonpositive: bool,
    /// Summed form: `e^{-A/g_0} X_0 <= C sum_n e^{-B/g_n} O_n + e^{-A/g_N} X_N`.
    pub telescoped: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TelescopeBatch {
    pub reports: Vec<TelescopeReport>,
    pub constant_sup: f64,
    pub constant_min: f64,
    /// Every instance satisfies the bound with `constant_sup`.
    pub holds_all: bool,
    pub fit: Option<StepFit>,
}

/// Smallest `C` of the step inequality at a given `A`, over all instances.
fn step_constant(reports: &[TelescopeReport], gaps: &[f64], a: f64, dm: f64, b: f64) -> f64 {
    let mut c = 0.0f64;
    for r in reports {
        for (n, &g) in gaps.iter().enumerate() {
            let (x, y, o) = (r.norms[n], r.norms[n + 1], r.observed[n]);
            let inner = x - (-(dm - 1.0) * a / g).exp() * y;
            if inner <= 0.0 {
                continue;
            }
            if o == 0.0 {
                return f64::INFINITY;
            }
            c = c.max(((b - a) / g + inner.ln() - o.ln()).exp());
        }
    }
    c
}

/// Interpolation exponent for which Young's inequality closes the step.
pub fn step_exponent(ratio: f64) -> f64 {
    0.25 * ratio
}

/// Derives the step inequality from the batch's interpolation constants
/// (computed with `eps = step_exponent(ratio)`) and checks it on every step.
pub fn fit_steps(reports: &[TelescopeReport], seq: &TimeSequence, b: f64) -> Result<StepFit> {
    check_sequence(seq)?;
    if !(b >= 1.0) {
        return Err(invalid!("B must be at least 1, got {b}"));
    }
    if reports.is_empty() {
        return Err(invalid!("no instances to fit"));
    }
    let gaps = seq.gaps();
    let dm = 1.0 / seq.ratio;
    let eps = step_exponent(seq.ratio);
    let n = reports
        .iter()
        .flat_map(|r| r.interpolation.iter().copied())
        .fold(0.0f64, f64::max);
    // Young: A/2 - N >= eps D' A = A/4 and A/(2(1-eps)) >= B.
    let a = (2.0 * b).max(4.4 * n);
    let c = (1.0 - eps) * n.powf(1.0 / (1.0 - eps));
    let c_empirical = step_constant(reports, &gaps, a, dm, b);
    let mut max_residual = f64::NEG_INFINITY;
    let mut max_relative = f64::NEG_INFINITY;
    let mut telescoped = true;
    for r in reports {
        let mut log_terms = Vec::with_capacity(gaps.len());
        for (k, &g) in gaps.iter().enumerate() {
            let (x, y, o) = (r.norms[k], r.norms[k + 1], r.observed[k]);
            let lhs_n = (-a / g).exp() * x - (-dm * a / g).exp() * y;
            let rhs_n = c * (-b / g).exp() * o;
            max_residual = max_residual.max(lhs_n - rhs_n);
            if x > 0.0 {
                let rel = 1.0
                    - (-(dm - 1.0) * a / g).exp() * y / x
                    - (c.ln() + (a - b) / g + o.ln() - x.ln()).exp();
                max_relative = max_relative.max(rel);
            }
            log_terms.push(c.ln() - b / g + o.ln());
        }
        // Compare in units of e^{-A/g_0}.
        let last = gaps.len();
        let shift = a / gaps[0];
        let sum: f64 = log_terms.iter().map(|l| (l + shift).exp()).sum();
        let tail = (shift - a / gaps[last - 1]).exp() * r.norms[last];
        telescoped &= r.norms[0] <= (sum + tail) * (1.0 + 1e-10);
    }
    Ok(StepFit {
        interpolation: n,
        eps,
        a,
        d_multiple: dm,
        b,
        c,
        c_empirical,
        max_residual,
        max_relative,
        nonpositive: n.is_finite() && max_residual <= 0.0 && max_relative <= 1e-10,
        telescoped,
    })
}

pub fn telescope_batch(
    spec: &Spectrum,
    set: &ObservationSet,
    seq: &TimeSequence,
    fields: &[Vec<f64>],
    rate: f64,
    b: f64,
) -> Result<TelescopeBatch> {
    let eps = step_exponent(seq.ratio);
    let reports: Vec<TelescopeReport> = fields
        .iter()
        .map(|f| telescope_check(spec, set, seq, f, rate, eps))
        .collect::<Result<_>>()?;
    summarize_telescope(reports, seq, b)
}

pub fn summarize_telescope(
    reports: Vec<TelescopeReport>,
    seq: &TimeSequence,
    b: f64,
) -> Result<TelescopeBatch> {
    let constant_sup = reports.iter().fold(0.0f64, |m, r| m.max(r.constant));
    let constant_min = reports
        .iter()
        .filter(|r| r.lhs > 0.0)
        .fold(f64::INFINITY, |m, r| m.min(r.constant));
    let holds_all = reports.iter().all(|r| {
        let best = r
            .log_weighted
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        r.lhs == 0.0 || r.lhs.ln() <= constant_sup.ln() + best + 1e-12
    });
    let fit = if reports.is_empty() {
        None
    } else {
        Some(fit_steps(&reports, seq, b)?)
    };
    Ok(TelescopeBatch {
        reports,
        constant_sup,
        constant_min,
        holds_all,
        fit,
    })
}
