//! Sharp constants of `||phi|| <= C ||phi||_E` on the span of low modes.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)]
use num_traits::Float;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg;
use crate::lp::{self, LpOutcome};
use crate::obsets::{ObservationSet, SetKind};
use crate::spectrum::Spectrum;

/// Norm on the whole domain / norm on the observation set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormPair {
    L2L2,
    L2L1,
    SupSup,
}

/// Gram eigenvalues below this are treated as an unobservable direction.
pub const GRAM_FLOOR: f64 = 1e-14;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstantReport {
    pub norm: NormPair,
    pub cutoff: f64,
    pub modes: usize,
    /// `f64::INFINITY` when some low-mode combination is invisible on the set.
    pub value: f64,
    pub observable: bool,
    /// Mode coefficients of an extremal function.
    pub certificate: Vec<f64>,
    /// Best iterate of a local search that hit its iteration cap.
    pub approximate: bool,
    pub gram_min: Option<f64>,
    pub gram_max: Option<f64>,
    /// Node where the sup constant is attained.
    pub argmax: Option<usize>,
    /// Cauchy-Schwarz lower bound for the L1 constant.
    pub floor: Option<f64>,
}

impl ConstantReport {
    fn new(norm: NormPair, cutoff: f64, modes: usize) -> Self {
        Self {
            norm,
            cutoff,
            modes,
            value: f64::INFINITY,
            observable: false,
            certificate: Vec::new(),
            approximate: false,
            gram_min: None,
            gram_max: None,
            argmax: None,
            floor: None,
        }
    }
}

fn low_modes(s: &Spectrum, set: &ObservationSet, cutoff: f64) -> Result<usize> {
    if set.support.is_empty() {
        return Err(Error::EmptySet);
    }
    if set.support.iter().any(|&(u, _)| u >= s.size()) {
        return Err(invalid!("set was built on a different grid"));
    }
    let m = s.modes_below(cutoff)?;
    if m == 0 {
        return Err(invalid!(
            "cutoff {cutoff} is below the lowest frequency {}",
            s.frequency(0)
        ));
    }
    Ok(m)
}

/// Rows `sqrt(w_i) e_k(x_i)` over the set's support.
fn weighted_rows(s: &Spectrum, set: &ObservationSet, m: usize) -> DMatrix<f64> {
    let w = set.weights(s);
    DMatrix::from_fn(w.len(), m, |r, k| w[r].1.sqrt() * s.modes[k][w[r].0])
}

/// Gram matrix `G_jk = <e_j 1_E, e_k 1_E>_w` of the first `m` modes.
pub fn gram_matrix(s: &Spectrum, set: &ObservationSet, m: usize) -> DMatrix<f64> {
    let b = weighted_rows(s, set, m);
    b.transpose() * b
}

pub fn constant_l2(s: &Spectrum, set: &ObservationSet, cutoff: f64) -> Result<ConstantReport> {
    if set.kind != SetKind::CellMask {
        return Err(invalid!("the L2 constant needs a cell mask"));
    }
    let m = low_modes(s, set, cutoff)?;
    let (vals, vecs) = linalg::sym_eigen(gram_matrix(s, set, m))?;
    let mut r = ConstantReport::new(NormPair::L2L2, cutoff, m);
    r.gram_min = Some(vals[0]);
    r.gram_max = Some(vals[m - 1]);
    r.certificate = vecs.column(0).iter().copied().collect();
    if vals[0] >= GRAM_FLOOR {
        r.value = 1.0 / vals[0].sqrt();
        r.observable = true;
    }
    Ok(r)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IrlsOptions {
    pub restarts: usize,
    pub max_iter: usize,
    pub rel_tol: f64,
    /// Floor of `|phi_i|` in the reweighting.
    pub smoothing: f64,
    pub seed: u64,
}

impl Default for IrlsOptions {
    fn default() -> Self {
        Self {
            restarts: 16,
            max_iter: 200,
            rel_tol: 1e-8,
            smoothing: 1e-8,
            seed: 0,
        }
    }
}

/// Upper estimate of `sup ||phi||_2 / ||phi 1_E||_1` by reweighted least
/// squares on the unit sphere of the low-mode span.
pub fn constant_l1(
    s: &Spectrum,
    set: &ObservationSet,
    cutoff: f64,
    opts: &IrlsOptions,
) -> Result<ConstantReport> {
    let l2 = constant_l2(s, set, cutoff)?;
    let m = l2.modes;
    let w = set.weights(s);
    let total: f64 = w.iter().map(|p| p.1).sum();
    let vals = DMatrix::from_fn(w.len(), m, |r, k| s.modes[k][w[r].0]);
    let weights: Vec<f64> = w.iter().map(|p| p.1).collect();
    let mut r = ConstantReport::new(NormPair::L2L1, cutoff, m);
    r.gram_min = l2.gram_min;
    r.gram_max = l2.gram_max;
    r.floor = Some(l2.value / total.sqrt());
    if !l2.observable {
        r.certificate = l2.certificate;
        return Ok(r);
    }
    let objective = |c: &DVector<f64>| -> (f64, DVector<f64>) {
        let phi = &vals * c;
        let j = phi
            .iter()
            .zip(&weights)
            .map(|(p, w)| w * p.abs())
            .sum::<f64>()
            / c.norm();
        (j, phi)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut starts = vec![DVector::from_vec(l2.certificate.clone())];
    for _ in 1..opts.restarts.max(1) {
        let v = DVector::from_fn(m, |_, _| StandardNormal.sample(&mut rng));
        starts.push(v);
    }
    let mut best = (f64::INFINITY, DVector::zeros(m), false);
    for start in starts {
        let mut c = start.normalize();
        let (mut j, mut phi) = objective(&c);
        let mut converged = false;
        let mut local = (j, c.clone());
        for _ in 0..opts.max_iter {
            let om: Vec<f64> = phi
                .iter()
                .zip(&weights)
                .map(|(p, w)| w / p.abs().max(opts.smoothing))
                .collect();
            let mut h = DMatrix::zeros(m, m);
            for (row, o) in om.iter().enumerate() {
                let v = vals.row(row);
                for a in 0..m {
                    let va = o * v[a];
                    for b in a..m {
                        h[(a, b)] += va * v[b];
                    }
                }
            }
            for a in 0..m {
                for b in 0..a {
                    h[(a, b)] = h[(b, a)];
                }
            }
            let (_, vecs) = linalg::sym_eigen(h)?;
            let mut next = DVector::from_iterator(m, vecs.column(0).iter().copied());
            if next.dot(&c) < 0.0 {
                next = -next;
            }
            let (jn, pn) = objective(&next);
            if jn < local.0 {
                local = (jn, next.clone());
            }
            let done = (j - jn).abs() <= opts.rel_tol * j;
            c = next;
            j = jn;
            phi = pn;
            if done {
                converged = true;
                break;
            }
        }
        if local.0 < best.0 {
            best = (local.0, local.1, converged);
        }
    }
    let c = best.1.normalize();
    r.value = 1.0 / best.0;
    r.observable = r.value.is_finite();
    r.approximate = !best.2;
    r.certificate = c.iter().copied().collect();
    Ok(r)
}

/// Exact discrete `sup { ||phi||_inf : |phi(x_i)| <= 1 on the set }` by one
/// linear program per grid node.
pub fn constant_sup(s: &Spectrum, set: &ObservationSet, cutoff: f64) -> Result<ConstantReport> {
    let m = low_modes(s, set, cutoff)?;
    let nodes = set.nodes();
    let p = nodes.len();
    let a = DMatrix::from_fn(p, m, |i, k| s.modes[k][nodes[i]]);
    let mut r = ConstantReport::new(NormPair::SupSup, cutoff, m);
    let sv = a.clone().svd(false, false).singular_values;
    let smax = sv.max();
    let smin = if p >= m { sv.min() } else { 0.0 };
    r.gram_min = Some(smin * smin);
    r.gram_max = Some(smax * smax);
    if !(smin > 1e-12 * smax) {
        return Ok(r);
    }
    // Dual of max phi(y) s.t. |A c| <= 1: min ||alpha||_1 s.t. A^T alpha = e(y).
    let mut lhs = DMatrix::zeros(m, 2 * p);
    for k in 0..m {
        for i in 0..p {
            lhs[(k, i)] = a[(i, k)];
            lhs[(k, p + i)] = -a[(i, k)];
        }
    }
    let cost = vec![1.0; 2 * p];
    let mut best = (f64::NEG_INFINITY, 0usize, Vec::new());
    for y in 0..s.size() {
        let b: Vec<f64> = (0..m).map(|k| s.modes[k][y]).collect();
        match lp::minimize(&cost, &lhs, &b) {
            LpOutcome::Optimal(sol) => {
                if sol.value > best.0 {
                    best = (sol.value, y, sol.duals);
                }
            }
            LpOutcome::Infeasible => {
                r.argmax = Some(y);
                return Ok(r);
            }
            LpOutcome::Unbounded | LpOutcome::Stalled => {
                return Err(Error::NumericalFailure {
                    message: alloc::format!("norm minimization failed at node {y}"),
                    residual: f64::NAN,
                })
            }
        }
    }
    r.value = best.0;
    r.observable = true;
    r.argmax = Some(best.1);
    r.certificate = best.2;
    Ok(r)
}

/// Dispatches on the norm pair.
pub fn constant(
    s: &Spectrum,
    set: &ObservationSet,
    norm: NormPair,
    cutoff: f64,
    opts: &IrlsOptions,
) -> Result<ConstantReport> {
    match norm {
        NormPair::L2L2 => constant_l2(s, set, cutoff),
        NormPair::L2L1 => constant_l1(s, set, cutoff, opts),
        NormPair::SupSup => constant_sup(s, set, cutoff),
    }
}
