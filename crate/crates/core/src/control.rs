//! Null controls to trajectories: impulses at geometric times on a set,
//! distributed controls on a space-time mask, and their cost ledgers.
//!
//! The state is the modal deficit `u - e^{t Delta} v_0` in a Galerkin
//! truncation to the leading modes. A measure `mu` on the set moves mode `k`
//! by `int e_k kappa dmu`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::domain::Domain;
use crate::error::{invalid, Error, Result};
use crate::inequality::fubini::{fubini_slices, SpaceTimeMask};
use crate::inequality::times::{SequenceKind, TimeSequence};
use crate::obsets::{set_from_mask, ObservationSet, SetKind};
use crate::spectrum::Spectrum;

/// `t_j = T (1 - rho^{j+1})`, `j < steps`: gaps shrink by exactly `rho`.
pub fn lr_schedule(horizon: f64, ratio: f64, steps: usize) -> Result<TimeSequence> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(invalid!("ratio must lie in (0, 1), got {ratio}"));
    }
    if steps < 2 {
        return Err(invalid!("a schedule needs at least 2 steps"));
    }
    if !(horizon > 0.0) {
        return Err(invalid!("horizon must be positive"));
    }
    let times = (0..steps)
        .map(|j| horizon * (1.0 - ratio.powi(j as i32 + 1)))
        .collect();
    TimeSequence::new(times, ratio, horizon, SequenceKind::LrGeometric)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthesisOptions {
    /// Galerkin truncation of the state.
    pub modes: usize,
    /// `Lambda_j^2 = c_lambda / gap_j`.
    pub c_lambda: f64,
    /// Smallest admissible `sigma_min / sigma_max` of the moment matrix.
    pub rank_tol: f64,
    /// A mode whose moment row is below this fraction of the largest row
    /// cannot be reached.
    pub blind_tol: f64,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        Self {
            modes: 40,
            c_lambda: 8.0,
            rank_tol: 1e-10,
            blind_tol: 1e-9,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepControl {
    pub step: usize,
    pub time: f64,
    pub kind: SetKind,
    /// Unknowns carrying the payload.
    pub support: Vec<usize>,
    /// Density per support node (masks) or atom weight (clouds).
    pub payload: Vec<f64>,
    /// Volume share of each support node; 1 for atoms.
    pub shares: Vec<f64>,
    pub total_variation: f64,
    /// Modes targeted by the cutoff and modes actually steered.
    pub requested: usize,
    pub controlled: usize,
    pub sigma_min: f64,
    pub sigma_max: f64,
    /// Largest `|moment_k + deficit_k|` over steered modes.
    pub moment_residual: f64,
}

impl StepControl {
    /// `int e_k kappa dmu` for the first `m` modes.
    pub fn moments(&self, spec: &Spectrum, m: usize) -> Vec<f64> {
        (0..m)
            .map(|k| {
                let e = &spec.modes[k];
                self.support
                    .iter()
                    .zip(&self.payload)
                    .zip(&self.shares)
                    .map(|((&u, p), s)| spec.kappa[u] * s * p * e[u])
                    .sum()
            })
            .collect()
    }
}

fn variation(payload: &[f64], shares: &[f64]) -> f64 {
    payload.iter().zip(shares).map(|(p, s)| p.abs() * s).sum()
}

/// Moment rows of the set: `row_k[i]` times the scaled unknown gives mode `k`.
/// Masks are scaled by `sqrt(w_i)` so the minimum-norm solution minimizes the
/// weighted L2 norm of the density.
fn moment_matrix(spec: &Spectrum, set: &ObservationSet, m: usize) -> (DMatrix<f64>, Vec<f64>) {
    let w = set.weights(spec);
    let scale: Vec<f64> = match set.kind {
        SetKind::CellMask => w.iter().map(|&(_, v)| v.sqrt()).collect(),
        SetKind::PointCloud => w.iter().map(|&(_, v)| v).collect(),
    };
    let a = DMatrix::from_fn(m, w.len(), |k, i| scale[i] * spec.modes[k][w[i].0]);
    (a, scale)
}

fn blind_mode(a: &DMatrix<f64>, tol: f64) -> Option<usize> {
    let norms: Vec<f64> = (0..a.nrows()).map(|k| a.row(k).norm()).collect();
    let top = norms.iter().copied().fold(0.0f64, f64::max);
    norms.iter().position(|&r| !(r > tol * top))
}

fn singular_range(a: &DMatrix<f64>) -> (f64, f64) {
    let sv = a.clone().svd(false, false).singular_values;
    let max = sv.iter().copied().fold(0.0f64, f64::max);
    let min = if a.nrows() > a.ncols() {
        0.0
    } else {
        sv.iter().copied().fold(f64::INFINITY, f64::min)
    };
    (min, max)
}

/// Largest prefix of rows whose conditioning passes `tol`; conditioning only
/// worsens as rows are added.
fn conditioned_prefix(a: &DMatrix<f64>, tol: f64) -> (usize, f64, f64) {
    let ok = |p: usize| {
        let (lo, hi) = singular_range(&a.rows(0, p).into_owned());
        (lo >= tol * hi, lo, hi)
    };
    let (mut lo, mut hi) = (1usize, a.nrows());
    if let (true, smin, smax) = ok(hi) {
        return (hi, smin, smax);
    }
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if ok(mid).0 {
            lo = mid
        } else {
            hi = mid
        }
    }
    let (_, smin, smax) = ok(lo);
    (lo, smin, smax)
}

fn min_norm_solve(a: &DMatrix<f64>, b: &[f64]) -> Result<DVector<f64>> {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.iter().copied().fold(0.0f64, f64::max);
    svd.solve(&DVector::from_column_slice(b), 1e-14 * smax)
        .map_err(|e| Error::NumericalFailure {
            message: format!("moment solve: {e}"),
            residual: f64::NAN,
        })
}

/// Impulse on the set that cancels the first `requested` entries of the
/// modal `deficit` (or as many as the moment matrix resolves), with minimal
/// weighted L2 norm.
pub fn step_control(
    spec: &Spectrum,
    set: &ObservationSet,
    requested: usize,
    deficit: &[f64],
    opts: &SynthesisOptions,
) -> Result<StepControl> {
    if set.support.is_empty() {
        return Err(Error::EmptySet);
    }
    if requested > spec.len() || requested > deficit.len() {
        return Err(invalid!(
            "{requested} modes requested, {} available",
            spec.len().min(deficit.len())
        ));
    }
    let support: Vec<usize> = set.nodes();
    let shares: Vec<f64> = match set.kind {
        SetKind::CellMask => set.support.iter().map(|&(_, s)| s).collect(),
        SetKind::PointCloud => vec![1.0; support.len()],
    };
    let mut out = StepControl {
        step: 0,
        time: 0.0,
        kind: set.kind,
        support,
        payload: vec![0.0; shares.len()],
        shares,
        total_variation: 0.0,
        requested,
        controlled: 0,
        sigma_min: f64::NAN,
        sigma_max: f64::NAN,
        moment_residual: 0.0,
    };
    if requested == 0 || deficit[..requested].iter().all(|&d| d == 0.0) {
        return Ok(out);
    }
    let (a, scale) = moment_matrix(spec, set, requested);
    if let Some(k) = blind_mode(&a, opts.blind_tol) {
        return Err(Error::SynthesisFailure {
            step: None,
            mode: k,
            reason: "moment row vanishes on the set".into(),
        });
    }
    let (m, smin, smax) = conditioned_prefix(&a, opts.rank_tol);
    let a = a.rows(0, m).into_owned();
    let b: Vec<f64> = deficit[..m].iter().map(|d| -d).collect();
    let g = min_norm_solve(&a, &b)?;
    out.payload = match set.kind {
        SetKind::CellMask => g.iter().zip(&scale).map(|(g, s)| g / s).collect(),
        SetKind::PointCloud => g.iter().copied().collect(),
    };
    out.total_variation = variation(&out.payload, &out.shares);
    out.controlled = m;
    out.sigma_min = smin;
    out.sigma_max = smax;
    let got = out.moments(spec, m);
    out.moment_residual = got
        .iter()
        .zip(&b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlSchedule {
    pub horizon: f64,
    pub steps: Vec<StepControl>,
    /// Modes in the Galerkin state.
    pub modes: usize,
    pub initial_deficit: f64,
    /// `||u(T) - e^{T Delta} v_0||`.
    pub terminal_deficit: f64,
    /// Terminal deficit over the initial one (0 when both vanish).
    pub relative_deficit: f64,
    /// `||d(t_{j+1}^-)|| / ||d(t_j^+)||` and its bound `e^{-lambda^2 gap}` from the first free mode.
    pub decay: Vec<(f64, f64)>,
    pub decay_holds: bool,
}

fn flow(spec: &Spectrum, d: &mut [f64], dt: f64) {
    d.iter_mut()
        .zip(&spec.values)
        .for_each(|(v, l)| *v *= (-l * dt).exp());
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn ratio_of(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        if a == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        a / b
    }
}

/// Modal coefficients of `u_0 - v_0` on the first `modes` modes.
pub fn initial_deficit(spec: &Spectrum, u0: &[f64], v0: &[f64], modes: usize) -> Result<Vec<f64>> {
    if u0.len() != v0.len() {
        return Err(invalid!("initial and target fields differ in length"));
    }
    let d: Vec<f64> = u0.iter().zip(v0).map(|(a, b)| a - b).collect();
    let mut c = spec.coefficients(&d)?;
    c.truncate(modes);
    Ok(c)
}

fn check_modes(spec: &Spectrum, opts: &SynthesisOptions, d0: &[f64]) -> Result<()> {
    if opts.modes == 0 || opts.modes > spec.len() {
        return Err(invalid!(
            "{} state modes requested, spectrum has {}",
            opts.modes,
            spec.len()
        ));
    }
    if d0.len() != opts.modes {
        return Err(invalid!(
            "deficit has {} modes, state has {}",
            d0.len(),
            opts.modes
        ));
    }
    if !(opts.c_lambda > 0.0) {
        return Err(invalid!("c_lambda must be positive"));
    }
    Ok(())
}

/// Modes with `lambda_k^2 <= c / gap`, within the state.
fn cutoff_modes(spec: &Spectrum, c_lambda: f64, gap: f64, modes: usize) -> usize {
    let l2 = c_lambda / gap;
    spec.values[..modes]
        .iter()
        .take_while(|&&v| v <= l2 * (1.0 + 1e-12))
        .count()
}

/// Impulsive control at the schedule's times steering the modal deficit `d0`
/// (state at time 0) towards zero at the horizon.
pub fn synthesize(
    spec: &Spectrum,
    set: &ObservationSet,
    schedule: &TimeSequence,
    d0: &[f64],
    opts: &SynthesisOptions,
) -> Result<ControlSchedule> {
    check_modes(spec, opts, d0)?;
    schedule.validate()?;
    if !schedule.is_increasing() {
        return Err(invalid!("control times must increase"));
    }
    let times = &schedule.times;
    let horizon = schedule.horizon;
    if times[0] <= 0.0 || *times.last().unwrap() >= horizon {
        return Err(invalid!("control times must lie in (0, T)"));
    }
    let mut d = d0.to_vec();
    let initial = l2(&d);
    flow(spec, &mut d, times[0]);
    let mut steps = Vec::with_capacity(times.len());
    let mut decay = Vec::with_capacity(times.len());
    let mut decay_holds = true;
    for (j, &t) in times.iter().enumerate() {
        let end = times.get(j + 1).copied().unwrap_or(horizon);
        let gap = end - t;
        let requested = cutoff_modes(spec, opts.c_lambda, gap, opts.modes);
        let mut step = step_control(spec, set, requested, &d, opts).map_err(|e| match e {
            Error::SynthesisFailure { mode, reason, .. } => Error::SynthesisFailure {
                step: Some(j),
                mode,
                reason,
            },
            other => other,
        })?;
        step.step = j;
        step.time = t;
        let jump = step.moments(spec, opts.modes);
        d.iter_mut().zip(&jump).for_each(|(x, y)| *x += y);
        let after = l2(&d);
        flow(spec, &mut d, gap);
        let before_next = l2(&d);
        let free = step.controlled;
        let bound = if free < opts.modes {
            (-spec.values[free] * gap).exp()
        } else {
            0.0
        };
        // Steered modes keep a residue at the level of the moment residual.
        let slack = 10.0 * (free as f64).sqrt() * step.moment_residual + 1e-15 * initial;
        decay_holds &= before_next <= bound * after * (1.0 + 1e-9) + slack;
        decay.push((ratio_of(before_next, after), bound));
        steps.push(step);
    }
    let terminal = l2(&d);
    Ok(ControlSchedule {
        horizon,
        steps,
        modes: opts.modes,
        initial_deficit: initial,
        terminal_deficit: terminal,
        relative_deficit: ratio_of(terminal, initial),
        decay,
        decay_holds,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    /// Jump times, with `||u(t^-)||` and `||u(t^+)||` of the Galerkin state.
    pub times: Vec<f64>,
    pub before: Vec<f64>,
    pub after: Vec<f64>,
    /// Modal coefficients of `u(T)`.
    pub terminal: Vec<f64>,
    /// `||u(T) - e^{T Delta} v_0||`.
    pub error: f64,
    /// Error over `||v_0||`, or the error itself when `v_0 = 0`.
    pub relative_error: f64,
}

/// Replays a schedule on modal initial data `u0` and target `v0`.
pub fn simulate(
    spec: &Spectrum,
    u0: &[f64],
    v0: &[f64],
    schedule: &ControlSchedule,
) -> Result<Trajectory> {
    let m = schedule.modes;
    if u0.len() != m || v0.len() != m || m > spec.len() {
        return Err(invalid!("initial data must have {m} modal coefficients"));
    }
    let mut u = u0.to_vec();
    let mut now = 0.0;
    let (mut times, mut before, mut after) = (Vec::new(), Vec::new(), Vec::new());
    for step in &schedule.steps {
        if !(step.time > now || (step.time == now && now == 0.0)) || step.time >= schedule.horizon {
            return Err(invalid!(
                "control time {} outside ({now}, {})",
                step.time,
                schedule.horizon
            ));
        }
        flow(spec, &mut u, step.time - now);
        now = step.time;
        times.push(now);
        before.push(l2(&u));
        u.iter_mut()
            .zip(step.moments(spec, m))
            .for_each(|(x, y)| *x += y);
        after.push(l2(&u));
    }
    flow(spec, &mut u, schedule.horizon - now);
    let mut target = v0.to_vec();
    flow(spec, &mut target, schedule.horizon);
    let error = l2(&u
        .iter()
        .zip(&target)
        .map(|(a, b)| a - b)
        .collect::<Vec<_>>());
    let vn = l2(v0);
    Ok(Trajectory {
        times,
        before,
        after,
        terminal: u,
        error,
        relative_error: if vn > 0.0 { error / vn } else { error },
    })
}

/// One constant-in-time piece of a distributed control.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlPiece {
    pub start: f64,
    pub end: f64,
    pub slab: usize,
    pub support: Vec<usize>,
    pub density: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistributedControl {
    pub horizon: f64,
    pub pieces: Vec<ControlPiece>,
    /// `[start, end]` of each window and the modes steered in it.
    pub windows: Vec<(f64, f64, usize)>,
    pub sup_norm: f64,
    pub initial_deficit: f64,
    pub terminal_deficit: f64,
    pub relative_deficit: f64,
    /// Slabs usable for control and the measure bound they satisfy.
    pub time_measure: f64,
    pub time_bound: f64,
}

/// `int_{a}^{b} e^{-l (end - t)} dt`.
fn smear(l: f64, a: f64, b: f64, end: f64) -> f64 {
    let len = b - a;
    if l * len < 1e-12 {
        (-l * (end - b)).exp() * len * (1.0 - 0.5 * l * len)
    } else {
        (-l * (end - b)).exp() * (-(-l * len).exp_m1()) / l
    }
}

/// Control on the space-time mask built from its good time slices: each
/// window of a geometric schedule acts during its first half on the slabs
/// whose slice is large, steering the low modes to zero at the window's end.
pub fn distributed_control(
    spec: &Spectrum,
    domain: &Domain,
    mask: &SpaceTimeMask,
    d0: &[f64],
    ratio: f64,
    windows: usize,
    opts: &SynthesisOptions,
) -> Result<DistributedControl> {
    check_modes(spec, opts, d0)?;
    let slices = fubini_slices(domain, mask)?;
    let horizon = mask.horizon;
    let sched = lr_schedule(horizon, ratio, windows.max(2))?;
    let mut edges = vec![0.0];
    edges.extend_from_slice(&sched.times);
    edges.push(horizon);
    let sets: Vec<Option<ObservationSet>> = (0..mask.slabs.len())
        .map(|k| {
            if slices.slabs.contains(&k) {
                set_from_mask(domain, &mask.slabs[k]).ok()
            } else {
                None
            }
        })
        .collect();
    let mut d = d0.to_vec();
    let initial = l2(&d);
    let mut pieces = Vec::new();
    let mut win = Vec::new();
    for (j, w) in edges.windows(2).enumerate() {
        let (a, b) = (w[0], w[1]);
        let act_end = a + 0.5 * (b - a);
        let requested = cutoff_modes(spec, opts.c_lambda, b - a, opts.modes);
        // Pieces: good slabs intersected with the acting half.
        let mut parts: Vec<(usize, f64, f64)> = Vec::new();
        for (k, set) in sets.iter().enumerate() {
            if set.is_none() {
                continue;
            }
            let (s0, s1) = mask.slab_interval(k);
            let (p0, p1) = (s0.max(a), s1.min(act_end));
            if p1 > p0 {
                parts.push((k, p0, p1));
            }
        }
        let active = requested > 0 && !parts.is_empty() && d[..requested].iter().any(|&x| x != 0.0);
        let mut steered = 0;
        let mut jump = vec![0.0; opts.modes];
        if active {
            // Columns: every (piece, support node), scaled by sqrt(len * w).
            let mut cols: Vec<(usize, usize, f64, f64)> = Vec::new();
            for (p, &(k, p0, p1)) in parts.iter().enumerate() {
                let set = sets[k].as_ref().unwrap();
                for (u, wgt) in set.weights(spec) {
                    cols.push((p, u, ((p1 - p0) * wgt).sqrt(), wgt));
                }
            }
            let factor = |k: usize, p: usize| {
                let (_, p0, p1) = parts[p];
                smear(spec.values[k], p0, p1, b) / (p1 - p0)
            };
            let full = DMatrix::from_fn(requested, cols.len(), |k, c| {
                let (p, u, s, _) = cols[c];
                factor(k, p) * s * spec.modes[k][u]
            });
            if let Some(k) = blind_mode(&full, opts.blind_tol) {
                return Err(Error::SynthesisFailure {
                    step: Some(j),
                    mode: k,
                    reason: "slices blind to the mode".into(),
                });
            }
            let (m, _, _) = conditioned_prefix(&full, opts.rank_tol);
            let target: Vec<f64> = (0..m)
                .map(|k| -d[k] * (-spec.values[k] * (b - a)).exp())
                .collect();
            let g = min_norm_solve(&full.rows(0, m).into_owned(), &target)?;
            let mut dens: Vec<Vec<f64>> = parts.iter().map(|_| Vec::new()).collect();
            let mut supp: Vec<Vec<usize>> = parts.iter().map(|_| Vec::new()).collect();
            for (c, &(p, u, s, wgt)) in cols.iter().enumerate() {
                let (_, p0, p1) = parts[p];
                dens[p].push(g[c] * s / ((p1 - p0) * wgt));
                supp[p].push(u);
            }
            for (p, &(k, p0, p1)) in parts.iter().enumerate() {
                let set = sets[k].as_ref().unwrap();
                let w = set.weights(spec);
                for kk in 0..opts.modes {
                    let f = smear(spec.values[kk], p0, p1, b);
                    let mom: f64 = w
                        .iter()
                        .zip(&dens[p])
                        .map(|(&(u, wt), h)| wt * h * spec.modes[kk][u])
                        .sum();
                    jump[kk] += f * mom;
                }
                pieces.push(ControlPiece {
                    start: p0,
                    end: p1,
                    slab: k,
                    support: supp[p].clone(),
                    density: dens[p].clone(),
                });
            }
            steered = m;
        }
        flow(spec, &mut d, b - a);
        d.iter_mut().zip(&jump).for_each(|(x, y)| *x += y);
        win.push((a, b, steered));
    }
    let terminal = l2(&d);
    let sup_norm = pieces
        .iter()
        .flat_map(|p| p.density.iter())
        .fold(0.0f64, |m, h| m.max(h.abs()));
    Ok(DistributedControl {
        horizon,
        pieces,
        windows: win,
        sup_norm,
        initial_deficit: initial,
        terminal_deficit: terminal,
        relative_deficit: ratio_of(terminal, initial),
        time_measure: slices.time_measure,
        time_bound: slices.bound,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostStep {
    pub time: f64,
    pub gap: f64,
    pub variation: f64,
    /// `ln(e^{D/gap} |mu_j|)`; `-inf` for a zero impulse.
    pub log_term: f64,
    pub term: f64,
    pub partial: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostLedger {
    pub rate: f64,
    pub steps: Vec<CostStep>,
    pub total: f64,
    /// Last term over the total.
    pub last_share: f64,
    /// Consecutive term ratios.
    pub ratios: Vec<f64>,
    /// Smallest `C` with `|mu_j| <= C e^{-D/(T - t_j)}`.
    pub remark_constant: f64,
    pub remark_holds: bool,
}

pub fn cost_report(schedule: &ControlSchedule, rate: f64) -> CostLedger {
    let n = schedule.steps.len();
    let mut steps = Vec::with_capacity(n);
    let mut partial = 0.0;
    let mut remark = 0.0f64;
    for (j, s) in schedule.steps.iter().enumerate() {
        let end = schedule
            .steps
            .get(j + 1)
            .map_or(schedule.horizon, |x| x.time);
        let gap = end - s.time;
        let log_term = s.total_variation.ln() + rate / gap;
        let term = log_term.exp();
        partial += term;
        if s.total_variation > 0.0 {
            remark =
                remark.max((s.total_variation.ln() + rate / (schedule.horizon - s.time)).exp());
        }
        steps.push(CostStep {
            time: s.time,
            gap,
            variation: s.total_variation,
            log_term,
            term,
            partial,
        });
    }
    let ratios = steps
        .windows(2)
        .map(|w| ratio_of(w[1].term, w[0].term))
        .collect();
    let last_share = steps.last().map_or(0.0, |s| ratio_of(s.term, partial));
    CostLedger {
        rate,
        steps,
        total: partial,
        last_share,
        ratios,
        remark_constant: remark,
        remark_holds: remark <= partial * (1.0 + 1e-12),
    }
}
