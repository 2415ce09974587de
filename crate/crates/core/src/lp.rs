//! Two-phase revised simplex for `min c^T x, A x = b, x >= 0`.
//!
//! The basis is refactorized at every iteration, which keeps the iterates
//! accurate for the short, wide systems used here (few rows, many columns).

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub value: f64,
    /// Multipliers `y` of the equality rows: `A^T y <= c` at optimality.
    pub duals: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum LpOutcome {
    Optimal(LpSolution),
    Infeasible,
    Unbounded,
    /// Iteration cap reached or the basis became singular.
    Stalled,
}

const OPT_TOL: f64 = 1e-10;
const PIVOT_TOL: f64 = 1e-9;
/// Consecutive degenerate pivots before switching to Bland's rule.
const DEGENERATE_RUN: usize = 50;

/// Primal values, duals and the basis factorization of one solve.
type Solved = (
    DVector<f64>,
    DVector<f64>,
    nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
);

struct Revised<'a> {
    /// `[sign * A | I]`.
    a: &'a DMatrix<f64>,
    b: &'a DVector<f64>,
    basis: Vec<usize>,
}

enum Step {
    Optimal,
    Unbounded,
    Stalled,
}

impl Revised<'_> {
    fn basis_matrix(&self) -> DMatrix<f64> {
        let m = self.a.nrows();
        DMatrix::from_fn(m, m, |i, k| self.a[(i, self.basis[k])])
    }

    /// Basic values and row multipliers for the cost `cost`.
    fn solve(&self, cost: &[f64]) -> Option<Solved> {
        let bm = self.basis_matrix();
        let lu = bm.clone().lu();
        let xb = lu.solve(self.b)?;
        let cb = DVector::from_iterator(self.basis.len(), self.basis.iter().map(|&j| cost[j]));
        let y = bm.transpose().lu().solve(&cb)?;
        Some((xb, y, lu))
    }

    /// Simplex iterations with entering columns restricted to `< allowed`.
    fn run(&mut self, cost: &[f64], allowed: usize, fixed_zero: &dyn Fn(usize) -> bool) -> Step {
        let m = self.a.nrows();
        let cap = 50 * (self.a.ncols() + m);
        let cscale = 1.0 + cost.iter().fold(0.0f64, |s, v| s.max(v.abs()));
        let mut degenerate = 0usize;
        for _ in 0..cap {
            let Some((xb, y, lu)) = self.solve(cost) else {
                return Step::Stalled;
            };
            let bland = degenerate >= DEGENERATE_RUN;
            let mut entering: Option<(usize, f64)> = None;
            for j in 0..allowed {
                if self.basis.contains(&j) {
                    continue;
                }
                let d = cost[j] - self.a.column(j).dot(&y);
                if d < -OPT_TOL * cscale {
                    if bland {
                        entering = Some((j, d));
                        break;
                    }
                    if entering.is_none_or(|(_, best)| d < best) {
                        entering = Some((j, d));
                    }
                }
            }
            let Some((q, _)) = entering else {
                return Step::Optimal;
            };
            let Some(u) = lu.solve(&self.a.column(q).clone_owned()) else {
                return Step::Stalled;
            };
            let umax = u.amax();
            // Basic variables pinned at zero leave on any nonzero component.
            let mut leave: Option<(usize, f64, f64)> = None;
            for i in 0..m {
                let ui = u[i];
                let pinned = fixed_zero(self.basis[i]);
                if ui > PIVOT_TOL * umax || (pinned && ui.abs() > PIVOT_TOL * umax) {
                    let ratio = if pinned { 0.0 } else { xb[i].max(0.0) / ui };
                    let better = match leave {
                        None => true,
                        Some((bi, br, bu)) => {
                            let tie = (ratio - br).abs() <= 1e-12 * (1.0 + br.abs());
                            if bland {
                                ratio < br || (tie && self.basis[i] < self.basis[bi])
                            } else {
                                (ratio < br && !tie) || (tie && ui.abs() > bu)
                            }
                        }
                    };
                    if better {
                        leave = Some((i, ratio, ui.abs()));
                    }
                }
            }
            let Some((r, ratio, _)) = leave else {
                return Step::Unbounded;
            };
            degenerate = if ratio <= 1e-14 { degenerate + 1 } else { 0 };
            self.basis[r] = q;
        }
        Step::Stalled
    }
}

pub fn minimize(c: &[f64], a: &DMatrix<f64>, b: &[f64]) -> LpOutcome {
    let (m, n) = a.shape();
    assert_eq!(c.len(), n, "cost length");
    assert_eq!(b.len(), m, "rhs length");
    let sign: Vec<f64> = b
        .iter()
        .map(|v| if *v < 0.0 { -1.0 } else { 1.0 })
        .collect();
    let cols = n + m;
    let full = DMatrix::from_fn(m, cols, |i, j| {
        if j < n {
            sign[i] * a[(i, j)]
        } else if j - n == i {
            1.0
        } else {
            0.0
        }
    });
    let rhs = DVector::from_iterator(m, (0..m).map(|i| sign[i] * b[i]));
    let mut lp = Revised {
        a: &full,
        b: &rhs,
        basis: (n..cols).collect(),
    };

    let phase_one: Vec<f64> = (0..cols).map(|j| if j < n { 0.0 } else { 1.0 }).collect();
    if let Step::Stalled = lp.run(&phase_one, n, &|_| false) {
        return LpOutcome::Stalled;
    }
    let Some((xb, _, _)) = lp.solve(&phase_one) else {
        return LpOutcome::Stalled;
    };
    let scale = 1.0 + b.iter().fold(0.0f64, |s, v| s.max(v.abs()));
    let infeasibility: f64 = lp
        .basis
        .iter()
        .zip(xb.iter())
        .filter(|(j, _)| **j >= n)
        .map(|(_, v)| v.max(0.0))
        .sum();
    if infeasibility > 1e-8 * scale {
        return LpOutcome::Infeasible;
    }

    let mut cost: Vec<f64> = c.to_vec();
    cost.extend(core::iter::repeat_n(0.0, m));
    match lp.run(&cost, n, &|j| j >= n) {
        Step::Optimal => {}
        Step::Unbounded => return LpOutcome::Unbounded,
        Step::Stalled => return LpOutcome::Stalled,
    }
    let Some((xb, y, _)) = lp.solve(&cost) else {
        return LpOutcome::Stalled;
    };
    let mut x = vec![0.0; n];
    for (i, &j) in lp.basis.iter().enumerate() {
        if j < n {
            x[j] = xb[i].max(0.0);
        }
    }
    let value = c.iter().zip(&x).map(|(a, b)| a * b).sum();
    let duals = (0..m).map(|i| sign[i] * y[i]).collect();
    LpOutcome::Optimal(LpSolution { x, value, duals })
}
