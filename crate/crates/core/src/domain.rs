//! Uniform tensor-product grids on intervals and rectangles, with Lipschitz
//! coefficient fields stored at the nodes.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// A point in the plane; 1-D grids leave the second coordinate at zero.
pub type Point = [f64; 2];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryCondition {
    Dirichlet,
    Neumann,
}

/// One uniform axis `origin + i * h`, `i = 0..=cells`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub origin: f64,
    pub length: f64,
    pub cells: usize,
}

impl Axis {
    pub fn new(origin: f64, length: f64, cells: usize) -> Result<Self> {
        if !(length > 0.0) || !length.is_finite() {
            return Err(invalid!("axis length must be positive, got {length}"));
        }
        if cells < 2 {
            return Err(invalid!("need at least 2 cells per axis, got {cells}"));
        }
        if !origin.is_finite() {
            return Err(invalid!("axis origin must be finite"));
        }
        Ok(Self {
            origin,
            length,
            cells,
        })
    }

    #[inline]
    pub fn h(&self) -> f64 {
        self.length / self.cells as f64
    }

    #[inline]
    pub fn nodes(&self) -> usize {
        self.cells + 1
    }

    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        if i == self.cells {
            self.origin + self.length
        } else {
            self.origin + i as f64 * self.h()
        }
    }

    #[inline]
    pub fn end(&self) -> f64 {
        self.origin + self.length
    }

    /// Length of the dual cell around node `i` (half cells at the ends).
    #[inline]
    pub fn dual_length(&self, i: usize) -> f64 {
        if i == 0 || i == self.cells {
            0.5 * self.h()
        } else {
            self.h()
        }
    }
}

/// Discretized interval or rectangle.
///
/// Nodes are numbered `i + j * (nx + 1)`, cells `ci + cj * nx`. Unknowns are
/// the interior nodes under Dirichlet conditions and all nodes under Neumann.
#[derive(Clone, Debug, PartialEq)]
pub struct Domain {
    axes: Vec<Axis>,
    bc: BoundaryCondition,
    unknown_nodes: Vec<usize>,
    node_unknown: Vec<Option<usize>>,
}

impl Domain {
    pub fn build_interval(length: f64, cells: usize, bc: BoundaryCondition) -> Result<Self> {
        Self::from_axes(vec![Axis::new(0.0, length, cells)?], bc)
    }

    pub fn build_rectangle(
        lx: f64,
        ly: f64,
        nx: usize,
        ny: usize,
        bc: BoundaryCondition,
    ) -> Result<Self> {
        Self::from_axes(vec![Axis::new(0.0, lx, nx)?, Axis::new(0.0, ly, ny)?], bc)
    }

    pub fn from_axes(axes: Vec<Axis>, bc: BoundaryCondition) -> Result<Self> {
        if axes.is_empty() || axes.len() > 2 {
            return Err(invalid!("dimension must be 1 or 2, got {}", axes.len()));
        }
        for a in &axes {
            Axis::new(a.origin, a.length, a.cells)?;
        }
        let mut d = Self {
            axes,
            bc,
            unknown_nodes: Vec::new(),
            node_unknown: Vec::new(),
        };
        let n = d.node_count();
        d.node_unknown = vec![None; n];
        for node in 0..n {
            if bc == BoundaryCondition::Neumann || !d.is_boundary_node(node) {
                d.node_unknown[node] = Some(d.unknown_nodes.len());
                d.unknown_nodes.push(node);
            }
        }
        Ok(d)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    #[inline]
    pub fn axis(&self, k: usize) -> &Axis {
        &self.axes[k]
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    #[inline]
    pub fn bc(&self) -> BoundaryCondition {
        self.bc
    }

    pub fn volume(&self) -> f64 {
        self.axes.iter().map(|a| a.length).product()
    }

    pub fn max_cell_width(&self) -> f64 {
        self.axes.iter().map(Axis::h).fold(0.0, f64::max)
    }

    fn nx(&self) -> usize {
        self.axes[0].nodes()
    }

    pub fn node_count(&self) -> usize {
        self.axes.iter().map(Axis::nodes).product()
    }

    pub fn cell_count(&self) -> usize {
        self.axes.iter().map(|a| a.cells).product()
    }

    pub fn unknown_count(&self) -> usize {
        self.unknown_nodes.len()
    }

    /// Grid node behind each unknown.
    pub fn unknown_nodes(&self) -> &[usize] {
        &self.unknown_nodes
    }

    #[inline]
    pub fn node_unknown(&self, node: usize) -> Option<usize> {
        self.node_unknown[node]
    }

    #[inline]
    pub fn node_index(&self, i: usize, j: usize) -> usize {
        i + j * self.nx()
    }

    #[inline]
    pub fn node_grid(&self, node: usize) -> (usize, usize) {
        (node % self.nx(), node / self.nx())
    }

    pub fn node_coords(&self, node: usize) -> Point {
        let (i, j) = self.node_grid(node);
        let y = if self.dim() == 2 {
            self.axes[1].coord(j)
        } else {
            0.0
        };
        [self.axes[0].coord(i), y]
    }

    pub fn unknown_coords(&self, u: usize) -> Point {
        self.node_coords(self.unknown_nodes[u])
    }

    pub fn is_boundary_node(&self, node: usize) -> bool {
        let (i, j) = self.node_grid(node);
        let on_x = i == 0 || i == self.axes[0].cells;
        let on_y = self.dim() == 2 && (j == 0 || j == self.axes[1].cells);
        on_x || on_y
    }

    /// Control volume of a node (half or quarter cells on the boundary).
    pub fn node_volume(&self, node: usize) -> f64 {
        let (i, j) = self.node_grid(node);
        let mut v = self.axes[0].dual_length(i);
        if self.dim() == 2 {
            v *= self.axes[1].dual_length(j);
        }
        v
    }

    pub fn cell_volume(&self) -> f64 {
        self.axes.iter().map(Axis::h).product()
    }

    #[inline]
    pub fn cell_grid(&self, cell: usize) -> (usize, usize) {
        let cx = self.axes[0].cells;
        (cell % cx, cell / cx)
    }

    /// Vertices of a cell: 2 in 1-D, 4 in 2-D ordered (00, 10, 01, 11).
    pub fn cell_nodes(&self, cell: usize) -> ([usize; 4], usize) {
        let (ci, cj) = self.cell_grid(cell);
        if self.dim() == 1 {
            ([ci, ci + 1, 0, 0], 2)
        } else {
            let n00 = self.node_index(ci, cj);
            let n01 = self.node_index(ci, cj + 1);
            ([n00, n00 + 1, n01, n01 + 1], 4)
        }
    }

    pub fn cell_center(&self, cell: usize) -> Point {
        let (ci, cj) = self.cell_grid(cell);
        let x = self.axes[0].coord(ci) + 0.5 * self.axes[0].h();
        let y = if self.dim() == 2 {
            self.axes[1].coord(cj) + 0.5 * self.axes[1].h()
        } else {
            0.0
        };
        [x, y]
    }

    /// Cell `[lo, hi]` bounds per axis.
    pub fn cell_bounds(&self, cell: usize) -> [(f64, f64); 2] {
        let (ci, cj) = self.cell_grid(cell);
        let bx = (self.axes[0].coord(ci), self.axes[0].coord(ci + 1));
        let by = if self.dim() == 2 {
            (self.axes[1].coord(cj), self.axes[1].coord(cj + 1))
        } else {
            (0.0, 0.0)
        };
        [bx, by]
    }

    pub fn contains(&self, p: Point) -> bool {
        let tol = 1e-12 * self.max_cell_width();
        self.axes
            .iter()
            .enumerate()
            .all(|(k, a)| p[k] >= a.origin - tol && p[k] <= a.end() + tol)
    }

    /// Euclidean distance from an interior point to the boundary.
    pub fn boundary_distance(&self, p: Point) -> f64 {
        self.axes
            .iter()
            .enumerate()
            .map(|(k, a)| (p[k] - a.origin).min(a.end() - p[k]))
            .fold(f64::INFINITY, f64::min)
            .max(0.0)
    }

    /// Nearest grid node and the distance to it.
    pub fn nearest_node(&self, p: Point) -> (usize, f64) {
        let mut idx = [0usize; 2];
        for (k, a) in self.axes.iter().enumerate() {
            let t = ((p[k] - a.origin) / a.h()).round();
            idx[k] = t.max(0.0).min(a.cells as f64) as usize;
        }
        let node = self.node_index(idx[0], idx[1]);
        let q = self.node_coords(node);
        let dist = ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt();
        (node, dist)
    }

    /// Adjacent node pairs along every axis, with their spacing.
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        let nx = self.nx();
        let ny = if self.dim() == 2 {
            self.axes[1].nodes()
        } else {
            1
        };
        for j in 0..ny {
            for i in 0..nx {
                let n = self.node_index(i, j);
                if i + 1 < nx {
                    out.push((n, n + 1, self.axes[0].h()));
                }
                if self.dim() == 2 && j + 1 < ny {
                    out.push((n, n + nx, self.axes[1].h()));
                }
            }
        }
        out
    }
}

/// Symmetric 2x2 metric tensor; in 1-D only `xx` is used.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metric {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl Metric {
    pub const IDENTITY: Metric = Metric {
        xx: 1.0,
        xy: 0.0,
        yy: 1.0,
    };

    pub fn scalar(g: f64) -> Self {
        Self {
            xx: g,
            xy: 0.0,
            yy: g,
        }
    }

    pub fn diagonal(a: f64, b: f64) -> Self {
        Self {
            xx: a,
            xy: 0.0,
            yy: b,
        }
    }

    pub fn det(&self) -> f64 {
        self.xx * self.yy - self.xy * self.xy
    }

    pub fn eigenvalues(&self) -> (f64, f64) {
        let m = 0.5 * (self.xx + self.yy);
        let r = (0.25 * (self.xx - self.yy).powi(2) + self.xy * self.xy).sqrt();
        (m - r, m + r)
    }

    pub fn min_eigenvalue(&self, dim: usize) -> f64 {
        if dim == 1 {
            self.xx
        } else {
            self.eigenvalues().0
        }
    }

    pub fn inverse(&self) -> Self {
        let d = self.det();
        Self {
            xx: self.yy / d,
            xy: -self.xy / d,
            yy: self.xx / d,
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            xx: s * self.xx,
            xy: s * self.xy,
            yy: s * self.yy,
        }
    }

    pub fn add(&self, o: &Self) -> Self {
        Self {
            xx: self.xx + o.xx,
            xy: self.xy + o.xy,
            yy: self.yy + o.yy,
        }
    }

    pub fn distance(&self, o: &Self, dim: usize) -> f64 {
        if dim == 1 {
            (self.xx - o.xx).abs()
        } else {
            let (a, b, c) = (self.xx - o.xx, self.xy - o.xy, self.yy - o.yy);
            (a * a + 2.0 * b * b + c * c).sqrt()
        }
    }

    pub fn is_finite(&self) -> bool {
        self.xx.is_finite() && self.xy.is_finite() && self.yy.is_finite()
    }

    /// Quadratic form `v^T M v`.
    pub fn form(&self, v: [f64; 2]) -> f64 {
        self.xx * v[0] * v[0] + 2.0 * self.xy * v[0] * v[1] + self.yy * v[1] * v[1]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CoefficientSpec {
    Constant {
        metric: Metric,
        kappa: f64,
    },
    /// Random piecewise-linear fields with slopes below the given constants.
    PiecewiseLinear {
        lipschitz_metric: f64,
        lipschitz_kappa: f64,
        seed: u64,
    },
    /// Per-node tables; missing constants are replaced by the measured ones.
    Sampled {
        metric: Vec<Metric>,
        kappa: Vec<f64>,
        lipschitz_metric: Option<f64>,
        lipschitz_kappa: Option<f64>,
    },
}

/// Per-node metric and density with verified regularity constants.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientField {
    pub metric: Vec<Metric>,
    pub kappa: Vec<f64>,
    pub lipschitz_metric: f64,
    pub lipschitz_kappa: f64,
    pub measured_lipschitz_metric: f64,
    pub measured_lipschitz_kappa: f64,
    pub metric_min: f64,
    pub kappa_min: f64,
}

impl CoefficientField {
    pub fn is_constant(&self) -> bool {
        self.measured_lipschitz_metric == 0.0 && self.measured_lipschitz_kappa == 0.0
    }
}

pub fn make_coefficients(domain: &Domain, spec: &CoefficientSpec) -> Result<CoefficientField> {
    let n = domain.node_count();
    let (metric, kappa, declared_g, declared_k) = match spec {
        CoefficientSpec::Constant { metric, kappa } => {
            (vec![*metric; n], vec![*kappa; n], Some(0.0), Some(0.0))
        }
        CoefficientSpec::PiecewiseLinear {
            lipschitz_metric,
            lipschitz_kappa,
            seed,
        } => {
            if !(*lipschitz_metric >= 0.0) || !(*lipschitz_kappa >= 0.0) {
                return Err(invalid!("Lipschitz constants must be non-negative"));
            }
            let (m, k) = random_fields(domain, *lipschitz_metric, *lipschitz_kappa, *seed);
            (m, k, Some(*lipschitz_metric), Some(*lipschitz_kappa))
        }
        CoefficientSpec::Sampled {
            metric,
            kappa,
            lipschitz_metric,
            lipschitz_kappa,
        } => {
            if metric.len() != n || kappa.len() != n {
                return Err(invalid!(
                    "tables have {} metric and {} density entries for {n} nodes",
                    metric.len(),
                    kappa.len()
                ));
            }
            (
                metric.clone(),
                kappa.clone(),
                *lipschitz_metric,
                *lipschitz_kappa,
            )
        }
    };
    verify(domain, metric, kappa, declared_g, declared_k)
}

fn verify(
    domain: &Domain,
    metric: Vec<Metric>,
    kappa: Vec<f64>,
    declared_g: Option<f64>,
    declared_k: Option<f64>,
) -> Result<CoefficientField> {
    let dim = domain.dim();
    let mut metric_min = f64::INFINITY;
    let mut kappa_min = f64::INFINITY;
    for (node, (g, &k)) in metric.iter().zip(&kappa).enumerate() {
        let lo = g.min_eigenvalue(dim);
        if !g.is_finite() || !(lo > 0.0) {
            return Err(Error::CoefficientRegularity(alloc::format!(
                "metric not positive definite at node {node} (smallest eigenvalue {lo})"
            )));
        }
        if !k.is_finite() || !(k > 0.0) {
            return Err(Error::CoefficientRegularity(alloc::format!(
                "density not positive at node {node} (value {k})"
            )));
        }
        metric_min = metric_min.min(lo);
        kappa_min = kappa_min.min(k);
    }
    let mut lg = 0.0f64;
    let mut lk = 0.0f64;
    for (a, b, h) in domain.edges() {
        lg = lg.max(metric[a].distance(&metric[b], dim) / h);
        lk = lk.max((kappa[a] - kappa[b]).abs() / h);
    }
    let check = |name: &str, measured: f64, declared: Option<f64>| -> Result<f64> {
        match declared {
            None => Ok(measured),
            Some(l) if measured <= l * (1.0 + 1e-9) + 1e-12 => Ok(l),
            Some(l) => Err(Error::CoefficientRegularity(alloc::format!(
                "{name} difference quotient {measured} exceeds declared Lipschitz constant {l}"
            ))),
        }
    };
    let lipschitz_metric = check("metric", lg, declared_g)?;
    let lipschitz_kappa = check("density", lk, declared_k)?;
    Ok(CoefficientField {
        metric,
        kappa,
        lipschitz_metric,
        lipschitz_kappa,
        measured_lipschitz_metric: lg,
        measured_lipschitz_kappa: lk,
        metric_min,
        kappa_min,
    })
}

/// Piecewise-linear profile along one axis with slopes in `[-slope, slope]`,
/// reflected to stay inside `[lo, hi]`.
fn profile(
    rng: &mut ChaCha8Rng,
    axis: &Axis,
    slope: f64,
    start: f64,
    lo: f64,
    hi: f64,
) -> Vec<f64> {
    let h = axis.h();
    let knot = (axis.cells / 8).max(1);
    let mut v = Vec::with_capacity(axis.nodes());
    v.push(start);
    let mut s = 0.0;
    for i in 0..axis.cells {
        if i % knot == 0 {
            s = slope * rng.random_range(-1.0..=1.0);
        }
        let cur = v[i];
        if cur + s * h > hi || cur + s * h < lo {
            s = -s;
        }
        v.push(cur + s * h);
    }
    v
}

fn random_fields(domain: &Domain, lg: f64, lk: f64, seed: u64) -> (Vec<Metric>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = domain.node_count();
    let ax = *domain.axis(0);
    if domain.dim() == 1 {
        let k = profile(&mut rng, &ax, 0.9 * lk, 1.0, 0.5, 2.0);
        let g = profile(&mut rng, &ax, 0.9 * lg, 1.0, 0.5, 2.0);
        return (g.into_iter().map(Metric::scalar).collect(), k);
    }
    let ay = *domain.axis(1);
    let mut pair = |slope: f64, start: f64, lo: f64, hi: f64| {
        let px = profile(&mut rng, &ax, slope, start, lo, hi);
        let py = profile(&mut rng, &ay, slope, start, lo, hi);
        (px, py)
    };
    // Entry slopes are halved so the Frobenius quotient stays below the bound.
    let (kx, ky) = pair(0.9 * lk, 0.5, 0.25, 1.0);
    let (ax_, ay_) = pair(0.45 * lg, 0.5, 0.25, 1.0);
    let (cx, cy) = pair(0.45 * lg, 0.5, 0.25, 1.0);
    let (bx, by) = pair(0.45 * lg, 0.0, -0.1, 0.1);
    let mut metric = Vec::with_capacity(n);
    let mut kappa = Vec::with_capacity(n);
    for node in 0..n {
        let (i, j) = domain.node_grid(node);
        kappa.push(kx[i] + ky[j]);
        metric.push(Metric {
            xx: ax_[i] + ay_[j],
            xy: bx[i] + by[j],
            yy: cx[i] + cy[j],
        });
    }
    (metric, kappa)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_unknowns() {
        let d =
            Domain::build_interval(core::f64::consts::PI, 4, BoundaryCondition::Dirichlet).unwrap();
        assert_eq!(d.unknown_count(), 3);
        assert!((d.axis(0).h() - core::f64::consts::PI / 4.0).abs() < 1e-15);
        let n = Domain::build_interval(1.0, 1000, BoundaryCondition::Neumann).unwrap();
        assert_eq!(n.unknown_count(), 1001);
        assert!(Domain::build_interval(1.0, 1, BoundaryCondition::Dirichlet).is_err());
        assert!(Domain::build_interval(-1.0, 4, BoundaryCondition::Dirichlet).is_err());
    }

    #[test]
    fn rectangle_unknowns() {
        let d = Domain::build_rectangle(1.0, 1.0, 4, 4, BoundaryCondition::Dirichlet).unwrap();
        assert_eq!(d.unknown_count(), 9);
        let n = Domain::build_rectangle(2.0, 1.0, 4, 2, BoundaryCondition::Neumann).unwrap();
        assert_eq!(n.unknown_count(), 15);
        assert!(Domain::build_rectangle(0.0, 1.0, 4, 4, BoundaryCondition::Dirichlet).is_err());
    }

    #[test]
    fn node_volumes_sum_to_volume() {
        let d = Domain::build_rectangle(2.0, 0.7, 13, 5, BoundaryCondition::Neumann).unwrap();
        let s: f64 = (0..d.node_count()).map(|n| d.node_volume(n)).sum();
        assert!((s - d.volume()).abs() <= 1e-12 * d.volume());
        let c = d.cell_volume() * d.cell_count() as f64;
        assert!((c - d.volume()).abs() <= 1e-12 * d.volume());
    }

    #[test]
    fn constant_coefficients_have_zero_constants() {
        let d = Domain::build_interval(1.0, 10, BoundaryCondition::Neumann).unwrap();
        let c = make_coefficients(
            &d,
            &CoefficientSpec::Constant {
                metric: Metric::IDENTITY,
                kappa: 1.0,
            },
        )
        .unwrap();
        assert_eq!(c.lipschitz_metric, 0.0);
        assert_eq!(c.lipschitz_kappa, 0.0);
    }

    #[test]
    fn zero_density_rejected() {
        let d = Domain::build_interval(1.0, 4, BoundaryCondition::Neumann).unwrap();
        let mut kappa = vec![1.0; 5];
        kappa[2] = 0.0;
        let spec = CoefficientSpec::Sampled {
            metric: vec![Metric::IDENTITY; 5],
            kappa,
            lipschitz_metric: None,
            lipschitz_kappa: None,
        };
        assert!(matches!(
            make_coefficients(&d, &spec),
            Err(Error::CoefficientRegularity(_))
        ));
    }

    #[test]
    fn declared_constant_too_small_rejected() {
        let d = Domain::build_interval(1.0, 4, BoundaryCondition::Neumann).unwrap();
        let spec = CoefficientSpec::Sampled {
            metric: vec![Metric::IDENTITY; 5],
            kappa: vec![1.0, 1.0, 2.0, 1.0, 1.0],
            lipschitz_metric: None,
            lipschitz_kappa: Some(1.0),
        };
        assert!(make_coefficients(&d, &spec).is_err());
    }
}
