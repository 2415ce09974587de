//! Assembly of the weighted Laplacian `-(1/kappa) div(kappa g^{-1} grad)`.
//!
//! The stiffness matrix `K` is the symmetric P1 form with coefficients averaged
//! over each edge (1-D) or triangle (2-D); the mass is lumped, `w = kappa * dual
//! volume`. The discrete operator acting on nodal values is `w^{-1} K`.

use alloc::vec::Vec;

use crate::domain::{BoundaryCondition, CoefficientField, Domain, Metric};
use crate::error::{invalid, Result};
use crate::sparse::CsrMatrix;

#[derive(Clone, Debug)]
pub struct DiscreteOperator {
    pub stiffness: CsrMatrix,
    pub mass: Vec<f64>,
    /// Density at each unknown.
    pub kappa: Vec<f64>,
    /// Dual cell volume at each unknown.
    pub volume: Vec<f64>,
    pub bc: BoundaryCondition,
    pub dim: usize,
    pub h_max: f64,
}

pub fn assemble(domain: &Domain, coeffs: &CoefficientField) -> Result<DiscreteOperator> {
    let nn = domain.node_count();
    if coeffs.kappa.len() != nn || coeffs.metric.len() != nn {
        return Err(invalid!(
            "coefficients sized for {} nodes, domain has {nn}",
            coeffs.kappa.len()
        ));
    }
    let mut trip: Vec<(usize, usize, f64)> = Vec::new();
    let mut push = |a: usize, b: usize, v: f64| {
        if let (Some(i), Some(j)) = (domain.node_unknown(a), domain.node_unknown(b)) {
            trip.push((i, j, v));
        }
    };
    if domain.dim() == 1 {
        let h = domain.axis(0).h();
        for c in 0..domain.cell_count() {
            let (a, b) = (c, c + 1);
            let k = 0.5 * (coeffs.kappa[a] + coeffs.kappa[b]);
            let g = 0.5 * (coeffs.metric[a].xx + coeffs.metric[b].xx);
            let s = k / (g * h);
            push(a, a, s);
            push(b, b, s);
            push(a, b, -s);
            push(b, a, -s);
        }
    } else {
        let (hx, hy) = (domain.axis(0).h(), domain.axis(1).h());
        // Local coordinates of the vertices (00, 10, 01, 11).
        let loc = [[0.0, 0.0], [hx, 0.0], [0.0, hy], [hx, hy]];
        // Both diagonal splits, each weighted by one half.
        let tris = [[0usize, 1, 3], [0, 3, 2], [0, 1, 2], [1, 3, 2]];
        for c in 0..domain.cell_count() {
            let (v, _) = domain.cell_nodes(c);
            for t in &tris {
                let nodes = [v[t[0]], v[t[1]], v[t[2]]];
                let p = [loc[t[0]], loc[t[1]], loc[t[2]]];
                let kap = nodes.iter().map(|&n| coeffs.kappa[n]).sum::<f64>() / 3.0;
                let g = nodes
                    .iter()
                    .fold(
                        Metric {
                            xx: 0.0,
                            xy: 0.0,
                            yy: 0.0,
                        },
                        |acc, &n| acc.add(&coeffs.metric[n]),
                    )
                    .scale(1.0 / 3.0);
                let a = g.inverse().scale(kap);
                let det = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1])
                    - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
                let area = 0.5 * det.abs();
                // Barycentric gradients.
                let grads: [[f64; 2]; 3] = core::array::from_fn(|i| {
                    let (j, k) = ((i + 1) % 3, (i + 2) % 3);
                    [(p[j][1] - p[k][1]) / det, (p[k][0] - p[j][0]) / det]
                });
                for i in 0..3 {
                    for j in 0..3 {
                        let (gi, gj) = (grads[i], grads[j]);
                        let v = a.xx * gi[0] * gj[0]
                            + a.xy * (gi[0] * gj[1] + gi[1] * gj[0])
                            + a.yy * gi[1] * gj[1];
                        push(nodes[i], nodes[j], 0.5 * area * v);
                    }
                }
            }
        }
    }
    let n = domain.unknown_count();
    let stiffness = CsrMatrix::from_triplets(n, trip);
    let mut mass = Vec::with_capacity(n);
    let mut kappa = Vec::with_capacity(n);
    let mut volume = Vec::with_capacity(n);
    for &node in domain.unknown_nodes() {
        let v = domain.node_volume(node);
        mass.push(coeffs.kappa[node] * v);
        kappa.push(coeffs.kappa[node]);
        volume.push(v);
    }
    Ok(DiscreteOperator {
        stiffness,
        mass,
        kappa,
        volume,
        bc: domain.bc(),
        dim: domain.dim(),
        h_max: domain.max_cell_width(),
    })
}

impl DiscreteOperator {
    #[inline]
    pub fn size(&self) -> usize {
        self.mass.len()
    }

    /// The discrete `-Delta u = w^{-1} K u`.
    pub fn apply(&self, u: &[f64]) -> Result<Vec<f64>> {
        let ku = self.apply_stiffness(u)?;
        Ok(ku.iter().zip(&self.mass).map(|(k, w)| k / w).collect())
    }

    pub fn apply_stiffness(&self, u: &[f64]) -> Result<Vec<f64>> {
        if u.len() != self.size() {
            return Err(invalid!(
                "field has {} values, operator has {} unknowns",
                u.len(),
                self.size()
            ));
        }
        Ok(self.stiffness.mul_vec(u))
    }

    /// Energy `u^T K u`.
    pub fn energy(&self, u: &[f64]) -> Result<f64> {
        Ok(self
            .apply_stiffness(u)?
            .iter()
            .zip(u)
            .map(|(a, b)| a * b)
            .sum())
    }

    /// Weighted inner product `sum w_i u_i v_i`.
    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        crate::linalg::weighted_dot(&self.mass, u, v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{make_coefficients, CoefficientSpec};
    use core::f64::consts::PI;
    use num_traits::Float;

    fn unit(domain: &Domain) -> CoefficientField {
        make_coefficients(
            domain,
            &CoefficientSpec::Constant {
                metric: Metric::IDENTITY,
                kappa: 1.0,
            },
        )
        .unwrap()
    }

    #[test]
    fn one_dimensional_stencil() {
        let d = Domain::build_interval(PI, 8, BoundaryCondition::Dirichlet).unwrap();
        let op = assemble(&d, &unit(&d)).unwrap();
        let h = PI / 8.0;
        for i in 0..7 {
            assert!((op.stiffness.get(i, i) - 2.0 / h).abs() < 1e-12);
            assert!((op.mass[i] - h).abs() < 1e-15);
            if i + 1 < 7 {
                assert!((op.stiffness.get(i, i + 1) + 1.0 / h).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sine_is_discrete_eigenvector() {
        let n = 16;
        let d = Domain::build_interval(PI, n, BoundaryCondition::Dirichlet).unwrap();
        let op = assemble(&d, &unit(&d)).unwrap();
        let h = PI / n as f64;
        for k in 1..5 {
            let u: Vec<f64> = (1..n)
                .map(|i| Float::sin(k as f64 * i as f64 * h))
                .collect();
            let lam = (2.0 - 2.0 * Float::cos(k as f64 * h)) / (h * h);
            let au = op.apply(&u).unwrap();
            for (a, b) in au.iter().zip(&u) {
                assert!((a - lam * b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn five_point_stencil_for_identity() {
        let d = Domain::build_rectangle(1.0, 1.0, 4, 4, BoundaryCondition::Dirichlet).unwrap();
        let op = assemble(&d, &unit(&d)).unwrap();
        // Centre unknown 4 couples to its four axis neighbours only.
        assert!((op.stiffness.get(4, 4) - 4.0).abs() < 1e-12);
        for j in [1, 3, 5, 7] {
            assert!((op.stiffness.get(4, j) + 1.0).abs() < 1e-12);
        }
        for j in [0, 2, 6, 8] {
            assert!(op.stiffness.get(4, j).abs() < 1e-12);
        }
    }

    #[test]
    fn wrong_length_rejected() {
        let d = Domain::build_interval(1.0, 4, BoundaryCondition::Neumann).unwrap();
        let op = assemble(&d, &unit(&d)).unwrap();
        assert!(op.apply(&[1.0; 3]).is_err());
    }
}
