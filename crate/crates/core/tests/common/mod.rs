#![allow(dead_code)]

use core::f64::consts::PI;

use heatobs_core::domain::{make_coefficients, BoundaryCondition, CoefficientSpec, Domain, Metric};
use heatobs_core::operator::{assemble, DiscreteOperator};
use heatobs_core::spectrum::{compute_spectrum, Selection, Solver, Spectrum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub struct Setup {
    pub domain: Domain,
    pub op: DiscreteOperator,
    pub spec: Spectrum,
}

pub fn flat(domain: Domain) -> Setup {
    let coeffs = make_coefficients(
        &domain,
        &CoefficientSpec::Constant {
            metric: Metric::IDENTITY,
            kappa: 1.0,
        },
    )
    .unwrap();
    let op = assemble(&domain, &coeffs).unwrap();
    let spec = compute_spectrum(&op, Selection::All, Solver::Dense).unwrap();
    Setup { domain, op, spec }
}

pub fn interval(length: f64, cells: usize, bc: BoundaryCondition) -> Setup {
    flat(Domain::build_interval(length, cells, bc).unwrap())
}

pub fn dirichlet_pi(cells: usize) -> Setup {
    interval(PI, cells, BoundaryCondition::Dirichlet)
}

pub fn gaussian_fields(n: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| (0..n).map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect()
}
