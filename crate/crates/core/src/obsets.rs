//! Observation sets: cell masks of positive measure and Cantor-type point
//! clouds, with certified lower bounds on Hausdorff content.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{Axis, BoundaryCondition, Domain, Point};
use crate::error::{invalid, Error, Result};
use crate::spectrum::Spectrum;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SetKind {
    CellMask,
    PointCloud,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CantorInfo {
    pub ratio: f64,
    pub levels: usize,
    pub from: f64,
    pub to: f64,
    /// Segment in the second coordinate for product sets in 2-D.
    pub transverse: Option<(f64, f64)>,
}

impl CantorInfo {
    /// Exponent of the limit set.
    pub fn exponent(&self) -> f64 {
        let s = core::f64::consts::LN_2 / (1.0 / self.ratio).ln();
        if self.transverse.is_some() {
            s + 1.0
        } else {
            s
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservationSet {
    pub kind: SetKind,
    pub frame: Vec<Axis>,
    pub bc: BoundaryCondition,
    /// Member cells of a mask.
    pub cells: Vec<usize>,
    /// Raw points of a cloud, before snapping.
    pub points: Vec<Point>,
    /// `(unknown, share)`: dual-volume share of each node inside a mask, or
    /// one atom per distinct snapped node of a cloud.
    pub support: Vec<(usize, f64)>,
    pub measure: f64,
    /// Declared Hausdorff exponent and certified content lower bound at it.
    pub exponent: f64,
    pub content: f64,
    pub cantor: Option<CantorInfo>,
    pub snap_distance: f64,
    /// Cloud points that landed on eliminated Dirichlet nodes.
    pub dropped: usize,
    pub boundary_distance: f64,
}

fn unit_ball(dim: usize) -> f64 {
    if dim == 1 {
        2.0
    } else {
        core::f64::consts::PI
    }
}

impl ObservationSet {
    #[inline]
    pub fn dim(&self) -> usize {
        self.frame.len()
    }

    pub fn is_cloud(&self) -> bool {
        self.kind == SetKind::PointCloud
    }

    /// Unknowns touched by the set.
    pub fn nodes(&self) -> Vec<usize> {
        self.support.iter().map(|&(u, _)| u).collect()
    }

    /// Weights of the restricted inner product: `kappa_i * share_i` on masks,
    /// `kappa_i` on atoms.
    pub fn weights(&self, s: &Spectrum) -> Vec<(usize, f64)> {
        self.support
            .iter()
            .map(|&(u, v)| (u, s.kappa[u] * v))
            .collect()
    }

    /// `||f 1_E||_{L^1}`, weighted by the density, for masks; `max |f|` on clouds.
    pub fn observe(&self, s: &Spectrum, f: &[f64]) -> f64 {
        match self.kind {
            SetKind::CellMask => self.weights(s).iter().map(|&(u, w)| w * f[u].abs()).sum(),
            SetKind::PointCloud => self
                .support
                .iter()
                .fold(0.0f64, |m, &(u, _)| m.max(f[u].abs())),
        }
    }

    /// `||f 1_E||_{L^2}` on a mask.
    pub fn l2(&self, s: &Spectrum, f: &[f64]) -> f64 {
        self.weights(s)
            .iter()
            .map(|&(u, w)| w * f[u] * f[u])
            .sum::<f64>()
            .sqrt()
    }

    pub fn check_margin(&self, eps: f64) -> Result<()> {
        if self.boundary_distance > eps {
            Ok(())
        } else {
            Err(invalid!(
                "set lies within {} of the boundary, margin {eps} required",
                self.boundary_distance
            ))
        }
    }
}

fn cell_margin(domain: &Domain, cell: usize) -> f64 {
    let b = domain.cell_bounds(cell);
    domain
        .axes()
        .iter()
        .enumerate()
        .map(|(k, a)| (b[k].0 - a.origin).min(a.end() - b[k].1))
        .fold(f64::INFINITY, f64::min)
        .max(0.0)
}

/// Mask from member cells.
pub fn set_from_cells(domain: &Domain, cells: &[usize]) -> Result<ObservationSet> {
    let mut mask = vec![false; domain.cell_count()];
    for &c in cells {
        if c >= mask.len() {
            return Err(invalid!(
                "cell {c} outside the grid of {} cells",
                mask.len()
            ));
        }
        mask[c] = true;
    }
    set_from_mask(domain, &mask)
}

pub fn set_from_mask(domain: &Domain, mask: &[bool]) -> Result<ObservationSet> {
    if mask.len() != domain.cell_count() {
        return Err(invalid!(
            "mask has {} entries for {} cells",
            mask.len(),
            domain.cell_count()
        ));
    }
    let cells: Vec<usize> = (0..mask.len()).filter(|&c| mask[c]).collect();
    if cells.is_empty() {
        return Err(Error::EmptySet);
    }
    let cv = domain.cell_volume();
    let share = cv / (1usize << domain.dim()) as f64;
    let mut acc = vec![0.0; domain.unknown_count()];
    for &c in &cells {
        let (v, nv) = domain.cell_nodes(c);
        for &node in &v[..nv] {
            if let Some(u) = domain.node_unknown(node) {
                acc[u] += share;
            }
        }
    }
    let support = acc
        .into_iter()
        .enumerate()
        .filter(|(_, v)| *v > 0.0)
        .collect();
    let measure = cv * cells.len() as f64;
    let boundary_distance = cells
        .iter()
        .map(|&c| cell_margin(domain, c))
        .fold(f64::INFINITY, f64::min);
    Ok(ObservationSet {
        kind: SetKind::CellMask,
        frame: domain.axes().to_vec(),
        bc: domain.bc(),
        cells,
        points: Vec::new(),
        support,
        measure,
        exponent: domain.dim() as f64,
        content: measure / unit_ball(domain.dim()),
        cantor: None,
        snap_distance: 0.0,
        dropped: 0,
        boundary_distance,
    })
}

/// Cells whose centres lie in the box `[lo, hi]`.
pub fn box_mask(domain: &Domain, lo: Point, hi: Point) -> Vec<bool> {
    (0..domain.cell_count())
        .map(|c| {
            let p = domain.cell_center(c);
            (0..domain.dim()).all(|k| p[k] >= lo[k] && p[k] <= hi[k])
        })
        .collect()
}

/// Point cloud snapped to the nearest grid nodes.
pub fn set_from_points(domain: &Domain, points: &[Point]) -> Result<ObservationSet> {
    if points.is_empty() {
        return Err(Error::EmptySet);
    }
    let mut nodes = Vec::with_capacity(points.len());
    let mut snap: f64 = 0.0;
    let mut dropped = 0;
    for p in points {
        if !domain.contains(*p) {
            return Err(invalid!("point {:?} outside the domain", p));
        }
        let (node, d) = domain.nearest_node(*p);
        snap = snap.max(d);
        match domain.node_unknown(node) {
            Some(u) => nodes.push(u),
            None => dropped += 1,
        }
    }
    nodes.sort_unstable();
    nodes.dedup();
    if nodes.is_empty() {
        return Err(Error::EmptySet);
    }
    let boundary_distance = points
        .iter()
        .map(|p| domain.boundary_distance(*p))
        .fold(f64::INFINITY, f64::min);
    Ok(ObservationSet {
        kind: SetKind::PointCloud,
        frame: domain.axes().to_vec(),
        bc: domain.bc(),
        cells: Vec::new(),
        points: points.to_vec(),
        support: nodes.into_iter().map(|u| (u, 1.0)).collect(),
        measure: 0.0,
        exponent: 0.0,
        content: 0.0,
        cantor: None,
        snap_distance: snap,
        dropped,
        boundary_distance,
    })
}

/// The `2^levels` intervals of the ratio-`r` Cantor construction on `[a, b]`.
pub fn cantor_intervals(ratio: f64, levels: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let mut cur = vec![(a, b)];
    for _ in 0..levels {
        let mut next = Vec::with_capacity(2 * cur.len());
        for (x, y) in cur {
            let l = ratio * (y - x);
            next.push((x, x + l));
            next.push((y - l, y));
        }
        cur = next;
    }
    cur
}

/// Ratio giving exponent `1 - delta` per Cantor factor.
pub fn ratio_for_codimension(delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(invalid!("codimension must lie in (0, 1), got {delta}"));
    }
    Ok(2.0f64.powf(-1.0 / (1.0 - delta)))
}

/// Centres of the level-`levels` Cantor intervals placed in `[from, to]`; in
/// 2-D, product with the grid nodes of a transverse segment.
pub fn cantor_set(domain: &Domain, info: CantorInfo) -> Result<ObservationSet> {
    if !(info.ratio > 0.0 && info.ratio < 0.5) {
        return Err(invalid!(
            "Cantor ratio must lie in (0, 1/2), got {}",
            info.ratio
        ));
    }
    if info.levels < 1 {
        return Err(invalid!("need at least one Cantor level"));
    }
    if !(info.to > info.from) {
        return Err(invalid!("empty placement interval"));
    }
    let xs: Vec<f64> = cantor_intervals(info.ratio, info.levels, info.from, info.to)
        .into_iter()
        .map(|(x, y)| 0.5 * (x + y))
        .collect();
    let points: Vec<Point> = match (domain.dim(), info.transverse) {
        (1, None) => xs.iter().map(|&x| [x, 0.0]).collect(),
        (2, Some((c, d))) => {
            let ay = domain.axis(1);
            let ys: Vec<f64> = (0..ay.nodes())
                .map(|j| ay.coord(j))
                .filter(|&y| y >= c - 1e-9 * ay.h() && y <= d + 1e-9 * ay.h())
                .collect();
            if ys.is_empty() {
                return Err(invalid!("transverse segment contains no grid nodes"));
            }
            xs.iter()
                .flat_map(|&x| ys.iter().map(move |&y| [x, y]))
                .collect()
        }
        (1, Some(_)) => return Err(invalid!("transverse segment given for a 1-D domain")),
        _ => return Err(invalid!("2-D Cantor sets need a transverse segment")),
    };
    let mut set = set_from_points(domain, &points)?;
    set.exponent = info.exponent();
    set.cantor = Some(info);
    set.content = hausdorff_content(&set, set.exponent)?.value;
    Ok(set)
}

/// Uniformly random union of cells with measure closest to `target`.
pub fn random_set(domain: &Domain, target: f64, seed: u64) -> Result<ObservationSet> {
    if !(target > 0.0 && target <= domain.volume() * (1.0 + 1e-12)) {
        return Err(invalid!(
            "target measure {target} outside (0, {}]",
            domain.volume()
        ));
    }
    let cv = domain.cell_volume();
    let k = ((target / cv).round() as usize).clamp(1, domain.cell_count());
    let mut cells: Vec<usize> = (0..domain.cell_count()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    cells.shuffle(&mut rng);
    set_from_cells(domain, &cells[..k])
}

pub fn lebesgue_measure(set: &ObservationSet) -> f64 {
    set.measure
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContentMethod {
    /// Mass distribution with the uniform Cantor measure.
    CantorMass,
    /// Exponent above the dimension of the limit set.
    AboveDimension,
    /// `|E|` over the unit-ball volume at full exponent.
    Volume,
    /// Mass distribution with dyadic maximal masses.
    Dyadic,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContentBound {
    pub value: f64,
    pub method: ContentMethod,
    /// Smallest ball radius covered by the certificate; `None` when the bound
    /// holds for all covers.
    pub resolution: Option<f64>,
}

pub const DYADIC_DEPTH: usize = 12;

/// Certified lower bound on the `s`-dimensional Hausdorff content.
pub fn hausdorff_content(set: &ObservationSet, s: f64) -> Result<ContentBound> {
    hausdorff_content_at_depth(set, s, DYADIC_DEPTH)
}

pub fn hausdorff_content_at_depth(
    set: &ObservationSet,
    s: f64,
    depth: usize,
) -> Result<ContentBound> {
    let d = set.dim() as f64;
    if !(s > 0.0 && s <= d) {
        return Err(invalid!("exponent {s} outside (0, {d}]"));
    }
    if let Some(info) = &set.cantor {
        let s0 = info.exponent();
        if s > s0 + 1e-12 {
            return Ok(ContentBound {
                value: 0.0,
                method: ContentMethod::AboveDimension,
                resolution: None,
            });
        }
        let l0 = info.to - info.from;
        let s_c = s0 - if info.transverse.is_some() { 1.0 } else { 0.0 };
        // Ball mass <= min(1, (2r/l0)^s_c) * min(1, 2r/l1); the ratio to r^s is
        // piecewise a power of r, so its supremum sits at a breakpoint.
        let ratio = |r: f64| {
            let mut m = (2.0 * r / l0).powf(s_c).min(1.0);
            if let Some((c, e)) = info.transverse {
                m *= (2.0 * r / (e - c)).min(1.0);
            }
            m / r.powf(s)
        };
        let mut k = ratio(0.5 * l0);
        if let Some((c, e)) = info.transverse {
            k = k.max(ratio(0.5 * (e - c)));
        }
        return Ok(ContentBound {
            value: 1.0 / k,
            method: ContentMethod::CantorMass,
            resolution: None,
        });
    }
    if set.kind == SetKind::CellMask && (s - d).abs() <= 1e-12 {
        return Ok(ContentBound {
            value: set.measure / unit_ball(set.dim()),
            method: ContentMethod::Volume,
            resolution: None,
        });
    }
    Ok(dyadic_bound(set, s, depth))
}

/// Masses of the dyadic cubes of side `side` anchored at `origin`.
fn dyadic_masses(set: &ObservationSet, origin: [f64; 2], side: f64) -> BTreeMap<(i64, i64), f64> {
    let dim = set.dim();
    let mut out = BTreeMap::new();
    match set.kind {
        SetKind::PointCloud => {
            let w = 1.0 / set.points.len() as f64;
            for p in &set.points {
                let i = ((p[0] - origin[0]) / side).floor() as i64;
                let j = if dim == 2 {
                    ((p[1] - origin[1]) / side).floor() as i64
                } else {
                    0
                };
                *out.entry((i, j)).or_insert(0.0) += w;
            }
        }
        SetKind::CellMask => {
            let total = set.measure;
            let ax = set.frame[0];
            let cx = ax.cells;
            for &c in &set.cells {
                let (ci, cj) = (c % cx, c / cx);
                let bx = (ax.coord(ci), ax.coord(ci + 1));
                let by = if dim == 2 {
                    let ay = set.frame[1];
                    (ay.coord(cj), ay.coord(cj + 1))
                } else {
                    (0.0, 1.0)
                };
                let span = |b: (f64, f64), o: f64| {
                    let lo = ((b.0 - o) / side).floor() as i64;
                    let hi = ((b.1 - o) / side).ceil() as i64 - 1;
                    (lo, hi.max(lo))
                };
                let (ix0, ix1) = span(bx, origin[0]);
                let (iy0, iy1) = if dim == 2 {
                    span(by, origin[1])
                } else {
                    (0, 0)
                };
                for i in ix0..=ix1 {
                    let ox = overlap(bx, origin[0] + i as f64 * side, side);
                    for j in iy0..=iy1 {
                        let oy = if dim == 2 {
                            overlap(by, origin[1] + j as f64 * side, side)
                        } else {
                            1.0
                        };
                        let m = ox * oy / total;
                        if m > 0.0 {
                            *out.entry((i, j)).or_insert(0.0) += m;
                        }
                    }
                }
            }
        }
    }
    out
}

fn overlap(b: (f64, f64), lo: f64, side: f64) -> f64 {
    (b.1.min(lo + side) - b.0.max(lo)).max(0.0)
}

fn dyadic_bound(set: &ObservationSet, s: f64, depth: usize) -> ContentBound {
    let dim = set.dim();
    let d = dim as f64;
    let origin = [
        set.frame[0].origin,
        set.frame.get(1).map_or(0.0, |a| a.origin),
    ];
    let l0 = set.frame.iter().map(|a| a.length).fold(0.0, f64::max);
    let min_cell = set.frame.iter().map(Axis::h).fold(f64::INFINITY, f64::min);
    let cube_factor = (1usize << dim) as f64;
    // Balls larger than the frame carry at most the full mass.
    let mut k_max = (2.0 / l0).powf(s);
    let mut finest = l0;
    for k in 0..=depth {
        let side = l0 / (1u64 << k) as f64;
        if set.kind == SetKind::CellMask && side < min_cell {
            break;
        }
        finest = side;
        let m = dyadic_masses(set, origin, side)
            .values()
            .fold(0.0f64, |a, &b| a.max(b));
        // Balls with side/4 < r <= side/2 meet at most 2^d cubes of this side.
        let mut band = cube_factor * m * (4.0 / side).powf(s);
        if set.kind == SetKind::CellMask {
            band = band.min(unit_ball(dim) * (0.5 * side).powf(d - s) / set.measure);
        }
        k_max = k_max.max(band);
    }
    match set.kind {
        SetKind::CellMask => {
            // Smaller balls: Lebesgue density bound, increasing in r since s <= d.
            let tail = unit_ball(dim) * (0.25 * finest).powf(d - s) / set.measure;
            ContentBound {
                value: 1.0 / k_max.max(tail),
                method: ContentMethod::Dyadic,
                resolution: None,
            }
        }
        SetKind::PointCloud => ContentBound {
            value: 1.0 / k_max,
            method: ContentMethod::Dyadic,
            resolution: Some(0.25 * finest),
        },
    }
}
