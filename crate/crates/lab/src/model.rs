//! Turns config sections into core objects.

use heatobs_core::domain::{
    make_coefficients, Axis, CoefficientField, CoefficientSpec, Domain, Metric,
};
use heatobs_core::obsets::{
    box_mask, cantor_set, random_set, set_from_cells, set_from_mask, set_from_points, CantorInfo,
    ObservationSet,
};
use heatobs_core::operator::{assemble, DiscreteOperator};
use heatobs_core::spectrum::{compute_spectrum, Selection, Solver, Spectrum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::config::{CoefficientConfig, DomainConfig, ExperimentConfig, SetConfig};
use crate::{Context, RunError};

pub struct Model {
    pub domain: Domain,
    pub coeffs: CoefficientField,
    pub op: DiscreteOperator,
    pub spec: Spectrum,
}

pub fn domain(d: &DomainConfig, refine: usize) -> Result<Domain, RunError> {
    let axes = d
        .lengths()
        .iter()
        .zip(&d.cells)
        .map(|(&l, &c)| Axis::new(0.0, l, c << refine))
        .collect::<heatobs_core::Result<Vec<_>>>()
        .context("domain")?;
    Domain::from_axes(axes, d.bc).context("domain")
}

pub fn coefficients(cfg: &ExperimentConfig, domain: &Domain) -> Result<CoefficientField, RunError> {
    let spec = match &cfg.coefficients {
        CoefficientConfig::Constant { metric, kappa } => CoefficientSpec::Constant {
            metric: metric.metric(),
            kappa: *kappa,
        },
        CoefficientConfig::PiecewiseLinear {
            lipschitz_metric,
            lipschitz_kappa,
        } => CoefficientSpec::PiecewiseLinear {
            lipschitz_metric: *lipschitz_metric,
            lipschitz_kappa: *lipschitz_kappa,
            seed: cfg.seed.ok_or_else(missing_seed)?,
        },
        CoefficientConfig::Table {
            path,
            lipschitz_metric,
            lipschitz_kappa,
        } => {
            let (metric, kappa) =
                crate::io::read_coefficient_table(&cfg.base_dir.join(path), domain)?;
            CoefficientSpec::Sampled {
                metric,
                kappa,
                lipschitz_metric: *lipschitz_metric,
                lipschitz_kappa: *lipschitz_kappa,
            }
        }
    };
    make_coefficients(domain, &spec).context("coefficients")
}

fn missing_seed() -> RunError {
    RunError::Config(crate::ConfigError {
        field: "seed".into(),
        message: "required because the run draws random data".into(),
    })
}

/// Constant scalar coefficients `(g, kappa)`, when the field has them.
pub fn scalar_constant(c: &CoefficientField) -> Option<(f64, f64)> {
    let m = c.metric[0];
    let scalar = |g: &Metric| g.xy == 0.0 && g.xx == g.yy;
    (c.is_constant() && scalar(&m)).then_some((m.xx, c.kappa[0]))
}

pub fn build(
    cfg: &ExperimentConfig,
    selection: Selection,
    solver: Solver,
) -> Result<Model, RunError> {
    let domain = domain(&cfg.domain, 0)?;
    let coeffs = coefficients(cfg, &domain)?;
    let op = assemble(&domain, &coeffs).context("operator")?;
    let spec = compute_spectrum(&op, selection, solver).context("spectrum")?;
    Ok(Model {
        domain,
        coeffs,
        op,
        spec,
    })
}

pub fn set(cfg: &ExperimentConfig, domain: &Domain) -> Result<ObservationSet, RunError> {
    let sc = cfg
        .set
        .as_ref()
        .ok_or_else(|| RunError::Internal("no set configured".into()))?;
    let pt = |v: &[f64]| -> [f64; 2] { [v[0], v.get(1).copied().unwrap_or(0.0)] };
    let set = match sc {
        SetConfig::Whole => set_from_mask(domain, &vec![true; domain.cell_count()]),
        SetConfig::Box { lo, hi } => {
            let mut a = [f64::NEG_INFINITY; 2];
            let mut b = [f64::INFINITY; 2];
            lo.iter().enumerate().for_each(|(k, v)| a[k] = v.0);
            hi.iter().enumerate().for_each(|(k, v)| b[k] = v.0);
            set_from_mask(domain, &box_mask(domain, a, b))
        }
        SetConfig::Cells { cells } => set_from_cells(domain, cells),
        SetConfig::Points { points } => {
            let p: Vec<[f64; 2]> = points
                .iter()
                .map(|p| pt(&p.iter().map(|r| r.0).collect::<Vec<_>>()))
                .collect();
            set_from_points(domain, &p)
        }
        SetConfig::Cantor {
            ratio,
            levels,
            from,
            to,
            transverse,
        } => cantor_set(
            domain,
            CantorInfo {
                ratio: *ratio,
                levels: *levels,
                from: from.0,
                to: to.0,
                transverse: transverse.map(|(a, b)| (a.0, b.0)),
            },
        ),
        SetConfig::Random { measure } => {
            random_set(domain, *measure, cfg.seed.ok_or_else(missing_seed)?)
        }
    };
    set.context("observation set")
}

/// Independent standard normal vectors, drawn in order from one stream.
pub fn gaussian(len: usize, count: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    (0..count)
        .map(|_| (0..len).map(|_| StandardNormal.sample(rng)).collect())
        .collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
