//! Time sequences: geometric sequences for telescoping and impulse schedules,
//! and density-point sequences for measurable time sets.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SequenceKind {
    /// Consecutive gaps shrink by at most the ratio.
    LrGeometric,
    /// `l_{m+1} - anchor = z^{-m} (l_1 - anchor)`.
    PhungWang { anchor: f64, z: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeSequence {
    pub times: Vec<f64>,
    pub ratio: f64,
    pub horizon: f64,
    pub kind: SequenceKind,
}

impl TimeSequence {
    pub fn new(times: Vec<f64>, ratio: f64, horizon: f64, kind: SequenceKind) -> Result<Self> {
        let s = Self {
            times,
            ratio,
            horizon,
            kind,
        };
        s.validate()?;
        Ok(s)
    }

    /// `s_n = T rho^n`, `n = 0..=steps`, decreasing to 0.
    pub fn observation(horizon: f64, ratio: f64, steps: usize) -> Result<Self> {
        check_ratio(ratio)?;
        if !(horizon > 0.0) {
            return Err(invalid!("horizon must be positive"));
        }
        let times = (0..=steps)
            .map(|n| horizon * ratio.powi(n as i32))
            .collect();
        Self::new(times, ratio, horizon, SequenceKind::LrGeometric)
    }

    pub fn is_increasing(&self) -> bool {
        self.times.len() < 2 || self.times[1] > self.times[0]
    }

    pub fn gaps(&self) -> Vec<f64> {
        self.times.windows(2).map(|w| (w[1] - w[0]).abs()).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let t = &self.times;
        if t.is_empty() {
            return Err(invalid!("empty time sequence"));
        }
        if t.iter()
            .any(|x| !(x.is_finite() && *x >= 0.0 && *x <= self.horizon * (1.0 + 1e-14)))
        {
            return Err(invalid!("times must lie in [0, {}]", self.horizon));
        }
        let inc = self.is_increasing();
        if t.windows(2)
            .any(|w| if inc { !(w[1] > w[0]) } else { !(w[1] < w[0]) })
        {
            return Err(invalid!("times must be strictly monotone"));
        }
        match self.kind {
            SequenceKind::LrGeometric => {
                check_ratio(self.ratio)?;
                let g = self.gaps();
                for (n, w) in g.windows(2).enumerate() {
                    if w[1] < self.ratio * w[0] * (1.0 - 1e-12) {
                        return Err(invalid!(
                            "gap {} is {} < ratio {} times the previous gap {}",
                            n + 1,
                            w[1],
                            self.ratio,
                            w[0]
                        ));
                    }
                }
            }
            SequenceKind::PhungWang { anchor, z } => {
                let l1 = t[0];
                for (m, &lm) in t.iter().enumerate() {
                    let want = z.powi(-(m as i32)) * (l1 - anchor);
                    if ((lm - anchor) - want).abs() > 1e-12 * (l1 - anchor).abs().max(1.0) {
                        return Err(invalid!("sequence term {m} off the geometric law"));
                    }
                }
            }
        }
        Ok(())
    }
}

fn check_ratio(ratio: f64) -> Result<()> {
    if ratio > 0.0 && ratio < 1.0 {
        Ok(())
    } else {
        Err(invalid!("ratio must lie in (0, 1), got {ratio}"))
    }
}

/// Sorted, merged intervals clipped to `[0, horizon]`.
pub fn normalize_intervals(j: &[(f64, f64)], horizon: f64) -> Result<Vec<(f64, f64)>> {
    let mut v: Vec<(f64, f64)> = Vec::with_capacity(j.len());
    for &(a, b) in j {
        if !(a < b) || !a.is_finite() || !b.is_finite() {
            return Err(invalid!("bad interval ({a}, {b})"));
        }
        let (a, b) = (a.max(0.0), b.min(horizon));
        if a < b {
            v.push((a, b));
        }
    }
    v.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(v.len());
    for (a, b) in v {
        match out.last_mut() {
            Some(last) if a <= last.1 => last.1 = last.1.max(b),
            _ => out.push((a, b)),
        }
    }
    Ok(out)
}

/// `|J intersect (a, b)|` for normalized intervals.
pub fn measure_in(j: &[(f64, f64)], a: f64, b: f64) -> f64 {
    j.iter().map(|&(x, y)| (y.min(b) - x.max(a)).max(0.0)).sum()
}

/// Smith-Volterra-Cantor set on `[a, b]`: at step `n` the middle
/// `4^{-n} (b - a)` of each of the `2^{n-1}` intervals is removed.
pub fn fat_cantor(a: f64, b: f64, levels: usize) -> Vec<(f64, f64)> {
    let len = b - a;
    let mut cur = alloc::vec![(a, b)];
    for n in 1..=levels {
        let gap = len * 0.25f64.powi(n as i32);
        let mut next = Vec::with_capacity(2 * cur.len());
        for (x, y) in cur {
            let mid = 0.5 * (x + y);
            next.push((x, mid - 0.5 * gap));
            next.push((mid + 0.5 * gap, y));
        }
        cur = next;
    }
    cur
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhungWangReport {
    pub sequence: TimeSequence,
    pub first: f64,
    /// `|J intersect (l_{m+1}, l_m)| / (l_m - l_{m+1})` for `m = 1..=depth`.
    pub ratios: Vec<f64>,
}

/// Candidates for `l_1` scanned downward from the horizon.
const SCAN: usize = 4096;

pub fn phung_wang_times(
    j: &[(f64, f64)],
    horizon: f64,
    z: f64,
    anchor: f64,
    depth: usize,
) -> Result<PhungWangReport> {
    if !(z > 1.0) {
        return Err(invalid!("z must exceed 1, got {z}"));
    }
    if depth < 1 {
        return Err(invalid!("depth must be at least 1"));
    }
    let j = normalize_intervals(j, horizon)?;
    if j.is_empty() {
        return Err(invalid!("time set has zero measure"));
    }
    let dist = j
        .iter()
        .map(|&(a, b)| {
            if anchor < a {
                a - anchor
            } else if anchor > b {
                anchor - b
            } else {
                0.0
            }
        })
        .fold(f64::INFINITY, f64::min);
    if dist > 1e-12 * horizon.max(1.0) || !(anchor < horizon) {
        return Err(invalid!(
            "anchor {anchor} is not in the closure of the time set"
        ));
    }
    let mut worst_best = 0.0f64;
    for i in 1..SCAN {
        let l1 = anchor + (horizon - anchor) * (1.0 - i as f64 / SCAN as f64);
        let mut ratios = Vec::with_capacity(depth);
        let mut ok = true;
        for m in 1..=depth {
            let hi = anchor + z.powi(1 - m as i32) * (l1 - anchor);
            let lo = anchor + z.powi(-(m as i32)) * (l1 - anchor);
            let r = measure_in(&j, lo, hi) / (hi - lo);
            ratios.push(r);
            if r < 1.0 / 3.0 {
                ok = false;
                break;
            }
        }
        if ok {
            let times = (0..=depth)
                .map(|m| anchor + z.powi(-(m as i32)) * (l1 - anchor))
                .collect();
            let sequence = TimeSequence::new(
                times,
                1.0 / z,
                horizon,
                SequenceKind::PhungWang { anchor, z },
            )?;
            return Ok(PhungWangReport {
                sequence,
                first: l1,
                ratios,
            });
        }
        worst_best = worst_best.max(ratios.len() as f64);
    }
    Err(Error::SearchFailure(alloc::format!(
        "no l_1 in ({anchor}, {horizon}) meets the 1/3 density condition to depth {depth} (best candidate passed {worst_best} windows)"
    )))
}
