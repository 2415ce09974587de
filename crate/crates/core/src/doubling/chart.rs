//! Unit normal, Poisson-smoothed normal field and the pseudo-geodesic map
//! `phi(s, z) = (0, z) + s m(s, z)`.

use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::domain::Metric;
use crate::error::{invalid, Error, Result};

/// `a(y, z) = base + y dy + |z| dz_abs`; Lipschitz, with a kink at `z = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChartMetric {
    pub base: Metric,
    pub dy: Metric,
    pub dz_abs: Metric,
}

impl ChartMetric {
    pub fn constant(a: Metric) -> Self {
        let zero = Metric {
            xx: 0.0,
            xy: 0.0,
            yy: 0.0,
        };
        Self {
            base: a,
            dy: zero,
            dz_abs: zero,
        }
    }

    pub fn at(&self, y: f64, z: f64) -> Metric {
        self.base
            .add(&self.dy.scale(y))
            .add(&self.dz_abs.scale(z.abs()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Cutoff {
    One,
    Zero,
    /// 1 on `|z| <= inner`, 0 on `|z| >= outer`, smooth in between.
    Bump {
        inner: f64,
        outer: f64,
    },
}

fn smooth_step(t: f64) -> f64 {
    let f = |x: f64| if x > 0.0 { (-1.0 / x).exp() } else { 0.0 };
    let (a, b) = (f(1.0 - t), f(t));
    a / (a + b)
}

impl Cutoff {
    pub fn at(&self, z: f64) -> f64 {
        match *self {
            Cutoff::One => 1.0,
            Cutoff::Zero => 0.0,
            Cutoff::Bump { inner, outer } => {
                let r = z.abs();
                if r <= inner {
                    1.0
                } else if r >= outer {
                    0.0
                } else {
                    smooth_step((r - inner) / (outer - inner))
                }
            }
        }
    }

    /// Where the cutoff is identically one.
    pub fn is_inner(&self, z: f64) -> bool {
        match *self {
            Cutoff::One | Cutoff::Zero => true,
            Cutoff::Bump { inner, .. } => z.abs() <= inner,
        }
    }
}

/// Chart grid: `z` nodes on `[-half_width, half_width]`, `s` nodes on `[0, depth]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryChart {
    pub metric: ChartMetric,
    pub cutoff: Cutoff,
    pub half_width: f64,
    pub z_cells: usize,
    pub depth: f64,
    pub s_cells: usize,
}

impl BoundaryChart {
    pub fn validate(&self) -> Result<()> {
        if !(self.half_width > 0.0 && self.depth > 0.0) || self.z_cells < 4 || self.s_cells < 2 {
            return Err(invalid!(
                "chart grid needs positive extents, at least 4 z cells and 2 s cells"
            ));
        }
        if let Cutoff::Bump { inner, outer } = self.cutoff {
            if !(inner >= 0.0 && outer > inner && outer <= self.half_width) {
                return Err(invalid!("cutoff needs 0 <= inner < outer <= half width"));
            }
        }
        Ok(())
    }

    pub fn hz(&self) -> f64 {
        2.0 * self.half_width / self.z_cells as f64
    }

    pub fn hs(&self) -> f64 {
        self.depth / self.s_cells as f64
    }

    pub fn z_nodes(&self) -> Vec<f64> {
        (0..=self.z_cells)
            .map(|i| -self.half_width + i as f64 * self.hz())
            .collect()
    }

    pub fn s_nodes(&self) -> Vec<f64> {
        (0..=self.s_cells).map(|i| i as f64 * self.hs()).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryNormal {
    pub normal: [f64; 2],
    /// `(a^{-1})_{00}`.
    pub lambda: f64,
}

/// Inward unit normal `n = lambda^{-1/2} a^{-1} e_0`, `lambda = (a^{-1})_{00}`.
pub fn boundary_normal(a: &Metric) -> Result<BoundaryNormal> {
    if !a.is_finite() || !(a.eigenvalues().0 > 0.0) {
        return Err(invalid!(
            "metric is not positive definite (eigenvalues {:?})",
            a.eigenvalues()
        ));
    }
    let inv = a.inverse();
    let lambda = inv.xx;
    let r = 1.0 / lambda.sqrt();
    Ok(BoundaryNormal {
        normal: [r * inv.xx, r * inv.xy],
        lambda,
    })
}

/// Cell-integrated Poisson weights for offsets `-(n-1)..=(n-1)`; at `s = 0`
/// the identity.
fn poisson_weights(s: f64, h: f64, n: usize) -> Vec<f64> {
    (0..2 * n - 1)
        .map(|k| {
            let d = (k as f64 - (n - 1) as f64) * h;
            if s == 0.0 {
                if k == n - 1 {
                    1.0
                } else {
                    0.0
                }
            } else {
                (((d + 0.5 * h) / s).atan() - ((d - 0.5 * h) / s).atan()) / PI
            }
        })
        .collect()
}

/// `e^{-s |D_z|} f` for nodal `f` vanishing outside the grid.
pub fn poisson_smooth(f: &[f64], h: f64, s: f64) -> Result<Vec<f64>> {
    if !(s >= 0.0) {
        return Err(invalid!("smoothing depth must be non-negative, got {s}"));
    }
    let n = f.len();
    let w = poisson_weights(s, h, n);
    Ok((0..n)
        .map(|i| {
            f.iter()
                .enumerate()
                .map(|(j, v)| w[i + n - 1 - j] * v)
                .sum()
        })
        .collect())
}

/// Mass of the discrete kernel over `[-half_width, half_width]` around the
/// centre plus the analytic tail beyond it.
pub fn kernel_mass(s: f64, h: f64, half_width: f64) -> (f64, f64) {
    let n = (half_width / h).round() as usize + 1;
    let grid: f64 = poisson_weights(s, h, n).iter().sum::<f64>();
    // Offsets reach (n-1)h on either side; cells end half a step further.
    let edge = (n as f64 - 0.5) * h;
    let tail = if s == 0.0 {
        0.0
    } else {
        1.0 - 2.0 * (edge / s).atan() / PI
    };
    (grid, grid + tail)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothedNormal {
    pub z: Vec<f64>,
    pub s: Vec<f64>,
    /// `(chi n)(z)` and the normalizer `lambda(z)`.
    pub seed: Vec<[f64; 2]>,
    pub lambda: Vec<f64>,
    /// `m[s_index][z_index]`.
    pub m: Vec<Vec<[f64; 2]>>,
    /// Kernel mass over the grid plus tail, per `s`.
    pub kernel_mass: Vec<f64>,
    pub sup_m: f64,
    pub sup_s_dz_m: f64,
    /// `sup |s |D_z| m| = sup |s d_s m|`.
    pub sup_s_dabs_m: f64,
}

pub fn smooth_normal(chart: &BoundaryChart) -> Result<SmoothedNormal> {
    chart.validate()?;
    let z = chart.z_nodes();
    let s = chart.s_nodes();
    let (hz, hs) = (chart.hz(), chart.hs());
    let mut seed = Vec::with_capacity(z.len());
    let mut lambda = Vec::with_capacity(z.len());
    for &zi in &z {
        let n = boundary_normal(&chart.metric.at(0.0, zi))?;
        let c = chart.cutoff.at(zi);
        seed.push([c * n.normal[0], c * n.normal[1]]);
        lambda.push(n.lambda);
    }
    let c0: Vec<f64> = seed.iter().map(|v| v[0]).collect();
    let c1: Vec<f64> = seed.iter().map(|v| v[1]).collect();
    let mut m = Vec::with_capacity(s.len());
    let mut kernel = Vec::with_capacity(s.len());
    for &sk in &s {
        let (a, b) = (poisson_smooth(&c0, hz, sk)?, poisson_smooth(&c1, hz, sk)?);
        m.push(
            a.into_iter()
                .zip(b)
                .map(|(x, y)| [x, y])
                .collect::<Vec<_>>(),
        );
        kernel.push(kernel_mass(sk, hz, chart.half_width).1);
    }
    let mut sup_m = 0.0f64;
    let mut sup_dz = 0.0f64;
    let mut sup_ds = 0.0f64;
    for (k, row) in m.iter().enumerate() {
        for (i, v) in row.iter().enumerate() {
            sup_m = sup_m.max(v[0].abs()).max(v[1].abs());
            if i > 0 && i + 1 < row.len() {
                for c in 0..2 {
                    sup_dz =
                        sup_dz.max((s[k] * (row[i + 1][c] - row[i - 1][c]) / (2.0 * hz)).abs());
                }
            }
            if k > 0 && k + 1 < m.len() {
                for c in 0..2 {
                    sup_ds =
                        sup_ds.max((s[k] * (m[k + 1][i][c] - m[k - 1][i][c]) / (2.0 * hs)).abs());
                }
            }
        }
    }
    Ok(SmoothedNormal {
        z,
        s,
        seed,
        lambda,
        m,
        kernel_mass: kernel,
        sup_m,
        sup_s_dz_m: sup_dz,
        sup_s_dabs_m: sup_ds,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChartDiagnostics {
    /// Smallest `|det d phi|` at `s = 0` over the region where the cutoff is one.
    pub det_min: f64,
    /// Pulled-back metric `b(0+, z)` on that region.
    pub b0: Vec<Metric>,
    pub b00_error: f64,
    pub b01_max: f64,
    /// Smallest `b'(z)`.
    pub tangential_min: f64,
    /// Largest finite-difference `|d_ss phi|`, `|d_sz phi|`, `|d_zz phi|`.
    pub second: [f64; 3],
    /// `max |phi(s, z) - (s, z)|`.
    pub flat_error: f64,
}

fn pull_back(a: &Metric, c0: [f64; 2], c1: [f64; 2]) -> Metric {
    let dot = |u: [f64; 2], v: [f64; 2]| {
        a.xx * u[0] * v[0] + a.xy * (u[0] * v[1] + u[1] * v[0]) + a.yy * u[1] * v[1]
    };
    Metric {
        xx: dot(c0, c0),
        xy: dot(c0, c1),
        yy: dot(c1, c1),
    }
}

pub fn pseudo_geodesic_diag(
    chart: &BoundaryChart,
    sm: &SmoothedNormal,
) -> Result<ChartDiagnostics> {
    let (hz, hs) = (chart.hz(), chart.hs());
    let (ns, nz) = (sm.s.len(), sm.z.len());
    if sm.m.len() != ns || sm.m.iter().any(|r| r.len() != nz) || ns < 3 {
        return Err(invalid!("smoothed normal does not match the chart grid"));
    }
    let phi = |k: usize, i: usize| -> [f64; 2] {
        let (s, z, m) = (sm.s[k], sm.z[i], sm.m[k][i]);
        [s * m[0], z + s * m[1]]
    };
    let mut det_min = f64::INFINITY;
    let mut b0 = Vec::new();
    let (mut b00_error, mut b01_max, mut tangential_min) = (0.0f64, 0.0f64, f64::INFINITY);
    for i in 0..nz {
        if !chart.cutoff.is_inner(sm.z[i]) {
            continue;
        }
        // d_s phi(0, z) = m(0, z), d_z phi(0, z) = (0, 1).
        let det = sm.m[0][i][0];
        if !(det.abs() >= 1e-12) {
            return Err(Error::DegenerateChart {
                node: i,
                det: det.abs(),
            });
        }
        det_min = det_min.min(det.abs());
        let p0 = phi(0, i);
        let p1 = phi(1, i);
        let ds = [(p1[0] - p0[0]) / hs, (p1[1] - p0[1]) / hs];
        let b = pull_back(&chart.metric.at(0.0, sm.z[i]), ds, [0.0, 1.0]);
        b00_error = b00_error.max((b.xx - 1.0).abs());
        b01_max = b01_max.max(b.xy.abs());
        tangential_min = tangential_min.min(b.yy);
        b0.push(b);
    }
    if b0.is_empty() {
        return Err(invalid!("no chart node lies where the cutoff is one"));
    }
    let mut second = [0.0f64; 3];
    let mut flat_error = 0.0f64;
    for k in 0..ns {
        for i in 0..nz {
            let p = phi(k, i);
            flat_error = flat_error
                .max((p[0] - sm.s[k]).abs())
                .max((p[1] - sm.z[i]).abs());
            if k == 0 || k + 1 == ns || i == 0 || i + 1 == nz {
                continue;
            }
            for c in 0..2 {
                let ss = (phi(k + 1, i)[c] - 2.0 * p[c] + phi(k - 1, i)[c]) / (hs * hs);
                let zz = (phi(k, i + 1)[c] - 2.0 * p[c] + phi(k, i - 1)[c]) / (hz * hz);
                let sz = (phi(k + 1, i + 1)[c] - phi(k + 1, i - 1)[c] - phi(k - 1, i + 1)[c]
                    + phi(k - 1, i - 1)[c])
                    / (4.0 * hs * hz);
                second[0] = second[0].max(ss.abs());
                second[1] = second[1].max(sz.abs());
                second[2] = second[2].max(zz.abs());
            }
        }
    }
    Ok(ChartDiagnostics {
        det_min,
        b0,
        b00_error,
        b01_max,
        tangential_min,
        second,
        flat_error,
    })
}

/// Seed field of the chart without smoothing, for callers that only need
/// the normals.
pub fn normal_field(chart: &BoundaryChart) -> Result<Vec<BoundaryNormal>> {
    chart.validate()?;
    chart
        .z_nodes()
        .iter()
        .map(|&z| boundary_normal(&chart.metric.at(0.0, z)))
        .collect()
}
