//! Reflection of a domain across a flat side, with odd or even extension of
//! one-sided eigenfunctions.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::domain::{
    make_coefficients, Axis, BoundaryCondition, CoefficientField, CoefficientSpec, Domain, Metric,
    Point,
};
use crate::error::{invalid, Error, Result};
use crate::operator::{assemble, DiscreteOperator};
use crate::spectrum::Spectrum;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "side", rename_all = "snake_case")]
pub enum Interface {
    Left,
    Right,
    Bottom,
    Top,
    /// Polyline; accepted only when it runs along one side.
    Curve {
        points: Vec<Point>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parity {
    /// `e(-s) = -e(s)`, the Dirichlet rule.
    Odd,
    /// `e(-s) = e(s)`, the Neumann rule.
    Even,
}

impl Parity {
    pub fn for_bc(bc: BoundaryCondition) -> Self {
        match bc {
            BoundaryCondition::Dirichlet => Parity::Odd,
            BoundaryCondition::Neumann => Parity::Even,
        }
    }
}

#[derive(Clone, Debug)]
pub struct DoubledSystem {
    pub source: Domain,
    pub domain: Domain,
    pub coeffs: CoefficientField,
    pub op: DiscreteOperator,
    /// Reflected axis and the side it was reflected across.
    pub axis: usize,
    pub side: Interface,
    /// Doubled node -> (source node, mirrored).
    pub map: Vec<(usize, bool)>,
    /// Doubled nodes on the glue line.
    pub glue: Vec<usize>,
    /// Grid index of the glue line along the reflected axis.
    pub glue_index: usize,
    /// Largest jump of a metric or density entry across the glue line.
    pub interface_jump: f64,
}

fn resolve(domain: &Domain, side: &Interface) -> Result<(usize, bool)> {
    let dim = domain.dim();
    let flat = |s: &Interface| -> Result<(usize, bool)> {
        match s {
            Interface::Left => Ok((0, true)),
            Interface::Right => Ok((0, false)),
            Interface::Bottom | Interface::Top if dim == 1 => {
                Err(invalid!("an interval has no bottom or top side"))
            }
            Interface::Bottom => Ok((1, true)),
            Interface::Top => Ok((1, false)),
            Interface::Curve { .. } => unreachable!(),
        }
    };
    match side {
        Interface::Curve { points } => {
            if points.len() < 2 {
                return Err(invalid!("interface curve needs at least two points"));
            }
            let tol = 1e-12 * domain.max_cell_width().max(1.0);
            for (k, s) in [
                (0usize, Interface::Left),
                (0, Interface::Right),
                (1, Interface::Bottom),
                (1, Interface::Top),
            ] {
                if k >= dim {
                    continue;
                }
                let a = domain.axis(k);
                let at = if matches!(s, Interface::Left | Interface::Bottom) {
                    a.origin
                } else {
                    a.end()
                };
                if points.iter().all(|p| (p[k] - at).abs() <= tol) {
                    return flat(&s);
                }
            }
            Err(Error::UnsupportedGeometry(
                "doubling is implemented across flat sides only".into(),
            ))
        }
        s => flat(s),
    }
}

pub fn double_domain(
    domain: &Domain,
    coeffs: &CoefficientField,
    side: Interface,
) -> Result<DoubledSystem> {
    let (axis, low) = resolve(domain, &side)?;
    let a = *domain.axis(axis);
    let c = a.cells;
    let doubled = Axis::new(
        if low { a.origin - a.length } else { a.origin },
        2.0 * a.length,
        2 * c,
    )?;
    let mut axes = domain.axes().to_vec();
    axes[axis] = doubled;
    let dd = Domain::from_axes(axes, domain.bc())?;
    let glue_index = c;
    let mut map = Vec::with_capacity(dd.node_count());
    let mut glue = Vec::new();
    for node in 0..dd.node_count() {
        let (i, j) = dd.node_grid(node);
        let mut idx = [i, j];
        let t = idx[axis];
        let (src, mirrored) = if low {
            if t >= c {
                (t - c, false)
            } else {
                (c - t, true)
            }
        } else if t <= c {
            (t, false)
        } else {
            (2 * c - t, true)
        };
        if t == glue_index {
            glue.push(node);
        }
        idx[axis] = src;
        map.push((domain.node_index(idx[0], idx[1]), mirrored));
    }
    let mut jump = 0.0f64;
    for &g in &glue {
        let m = coeffs.metric[map[g].0];
        // The reflected off-diagonal entry changes sign, so it must vanish here.
        jump = jump.max(2.0 * m.xy.abs());
    }
    if domain.dim() == 2 && jump > 1e-12 {
        return Err(Error::CoefficientRegularity(alloc::format!(
            "off-diagonal metric entry must vanish on the interface (jump {jump:e})"
        )));
    }
    let metric: Vec<Metric> = map
        .iter()
        .map(|&(n, mirrored)| {
            let g = coeffs.metric[n];
            if mirrored {
                Metric { xy: -g.xy, ..g }
            } else {
                g
            }
        })
        .collect();
    let kappa: Vec<f64> = map.iter().map(|&(n, _)| coeffs.kappa[n]).collect();
    let spec = CoefficientSpec::Sampled {
        metric,
        kappa,
        lipschitz_metric: None,
        lipschitz_kappa: None,
    };
    let dc = make_coefficients(&dd, &spec)?;
    let op = assemble(&dd, &dc)?;
    Ok(DoubledSystem {
        source: domain.clone(),
        domain: dd,
        coeffs: dc,
        op,
        axis,
        side,
        map,
        glue,
        glue_index,
        interface_jump: jump,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Extension {
    /// Values on the doubled unknowns.
    pub field: Vec<f64>,
    /// `||w^{-1} (K e - lambda^2 w e)||_w / ||e||_w`.
    pub residual: f64,
    /// Largest pointwise `|w^{-1} r|` within one cell of the glue line and elsewhere.
    pub interface_residual: f64,
    pub bulk_residual: f64,
    pub parity_mismatch: bool,
}

/// Extends `values` (on the source unknowns) to the double by `parity` and
/// measures how far it is from an eigenvector with eigenvalue `value`.
pub fn extend_eigenfunction(
    doubled: &DoubledSystem,
    values: &[f64],
    value: f64,
    parity: Parity,
) -> Result<Extension> {
    let src = &doubled.source;
    if values.len() != src.unknown_count() {
        return Err(invalid!(
            "eigenvector has {} entries but the {:?} problem has {} unknowns",
            values.len(),
            src.bc(),
            src.unknown_count()
        ));
    }
    let sign = if parity == Parity::Odd { -1.0 } else { 1.0 };
    let dd = &doubled.domain;
    let field: Vec<f64> = dd
        .unknown_nodes()
        .iter()
        .map(|&node| {
            let (n, mirrored) = doubled.map[node];
            let v = src.node_unknown(n).map_or(0.0, |u| values[u]);
            if mirrored {
                sign * v
            } else {
                v
            }
        })
        .collect();
    let k = doubled.op.apply_stiffness(&field)?;
    let w = &doubled.op.mass;
    let q: Vec<f64> = k
        .iter()
        .zip(w)
        .zip(&field)
        .map(|((r, wi), e)| r / wi - value * e)
        .collect();
    let num: f64 = q
        .iter()
        .zip(w)
        .map(|(x, wi)| wi * x * x)
        .sum::<f64>()
        .sqrt();
    let den: f64 = field
        .iter()
        .zip(w)
        .map(|(x, wi)| wi * x * x)
        .sum::<f64>()
        .sqrt();
    let mut interface = 0.0f64;
    let mut bulk = 0.0f64;
    for (u, &node) in dd.unknown_nodes().iter().enumerate() {
        let (i, j) = dd.node_grid(node);
        let t = if doubled.axis == 0 { i } else { j };
        if t.abs_diff(doubled.glue_index) <= 1 {
            interface = interface.max(q[u].abs());
        } else {
            bulk = bulk.max(q[u].abs());
        }
    }
    Ok(Extension {
        field,
        residual: if den > 0.0 { num / den } else { f64::INFINITY },
        interface_residual: interface,
        bulk_residual: bulk,
        parity_mismatch: interface > 10.0 * bulk + 1e-8,
    })
}

/// Distance from each of the first `count` one-sided eigenvalues to the
/// nearest eigenvalue of the double.
pub fn spectral_inclusion(one_sided: &Spectrum, doubled: &Spectrum, count: usize) -> Vec<f64> {
    one_sided
        .values
        .iter()
        .take(count)
        .map(|v| {
            doubled
                .values
                .iter()
                .map(|d| (d - v).abs())
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}
