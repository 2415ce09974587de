mod common;

use core::f64::consts::PI;

use common::{dirichlet_pi, interval};
use heatobs_core::domain::BoundaryCondition;
use heatobs_core::inequality::*;
use heatobs_core::obsets::*;
use heatobs_core::spectrum::Spectrum;
use heatobs_core::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn half(s: &common::Setup) -> ObservationSet {
    let d = &s.domain;
    set_from_mask(d, &box_mask(d, [0.0, 0.0], [0.5 * d.axis(0).length, 0.0])).unwrap()
}

fn restricted_l2(spec: &Spectrum, set: &ObservationSet, phi: &[f64]) -> f64 {
    set.weights(spec)
        .iter()
        .map(|&(u, w)| w * phi[u] * phi[u])
        .sum::<f64>()
        .sqrt()
}

fn restricted_l1(spec: &Spectrum, set: &ObservationSet, phi: &[f64]) -> f64 {
    set.weights(spec)
        .iter()
        .map(|&(u, w)| w * phi[u].abs())
        .sum()
}

#[test]
fn whole_domain_is_perfectly_observed() {
    let s = dirichlet_pi(60);
    let all = set_from_mask(&s.domain, &[true; 60]).unwrap();
    for cutoff in [1.5, 7.5, 20.5] {
        let r = constant_l2(&s.spec, &all, cutoff).unwrap();
        assert!((r.value - 1.0).abs() < 1e-10);
        assert!(r.observable);
    }
}

#[test]
fn single_mode_l2_matches_direct_ratio() {
    let s = dirichlet_pi(80);
    let e = set_from_cells(&s.domain, &[3, 4, 5, 40, 41]).unwrap();
    let r = constant_l2(&s.spec, &e, 1.5).unwrap();
    assert_eq!(r.modes, 1);
    let e1 = &s.spec.modes[0];
    let want = s.spec.norm(e1) / restricted_l2(&s.spec, &e, e1);
    assert!((r.value - want).abs() <= 1e-12 * want);
}

#[test]
fn l2_constant_against_sphere_sampling() {
    let s = dirichlet_pi(200);
    let e = half(&s);
    let r = constant_l2(&s.spec, &e, 3.5).unwrap();
    assert_eq!(r.modes, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut best = 0.0f64;
    for _ in 0..20_000 {
        let c: Vec<f64> = (0..3).map(|_| StandardNormal.sample(&mut rng)).collect();
        let phi = s.spec.synthesize(&c);
        best = best.max(s.spec.norm(&phi) / restricted_l2(&s.spec, &e, &phi));
    }
    assert!(best <= r.value * (1.0 + 1e-12));
    assert!(best >= 0.99 * r.value, "oracle {best} vs {}", r.value);
    // The certificate attains it.
    let phi = s.spec.synthesize(&r.certificate);
    let ratio = s.spec.norm(&phi) / restricted_l2(&s.spec, &e, &phi);
    assert!((ratio - r.value).abs() <= 1e-8 * r.value);
}

#[test]
fn blind_set_reports_infinite_constant() {
    let s = dirichlet_pi(40);
    let e = set_from_cells(&s.domain, &[10]).unwrap();
    let r = constant_l2(&s.spec, &e, 5.5).unwrap();
    assert!(!r.observable);
    assert!(r.value.is_infinite());
    assert!(r.gram_min.unwrap() < GRAM_FLOOR);
}

#[test]
fn l1_single_mode_and_constant_mode() {
    let s = dirichlet_pi(60);
    let e = set_from_cells(&s.domain, &[7, 8, 9, 30]).unwrap();
    let r = constant_l1(&s.spec, &e, 1.5, &IrlsOptions::default()).unwrap();
    let e1 = &s.spec.modes[0];
    let want = s.spec.norm(e1) / restricted_l1(&s.spec, &e, e1);
    assert!((r.value - want).abs() <= 1e-9 * want);

    let n = interval(2.5, 50, BoundaryCondition::Neumann);
    let all = set_from_mask(&n.domain, &[true; 50]).unwrap();
    let r = constant_l1(&n.spec, &all, 0.5, &IrlsOptions::default()).unwrap();
    assert_eq!(r.modes, 1);
    assert!((r.value - 2.5f64.powf(-0.5)).abs() < 1e-10);
}

#[test]
fn l1_constant_against_great_circle() {
    let s = dirichlet_pi(40);
    let e = set_from_cells(&s.domain, &[5, 6, 22]).unwrap();
    let r = constant_l1(&s.spec, &e, 2.5, &IrlsOptions::default()).unwrap();
    assert_eq!(r.modes, 2);
    let best = (0..10_000)
        .map(|i| {
            let th = PI * i as f64 / 10_000.0;
            let phi = s.spec.synthesize(&[th.cos(), th.sin()]);
            s.spec.norm(&phi) / restricted_l1(&s.spec, &e, &phi)
        })
        .fold(0.0, f64::max);
    assert!(
        (r.value - best).abs() <= 0.02 * best,
        "{} vs {best}",
        r.value
    );
    assert!(r.value >= r.floor.unwrap() * (1.0 - 1e-12));
    let phi = s.spec.synthesize(&r.certificate);
    let ratio = s.spec.norm(&phi) / restricted_l1(&s.spec, &e, &phi);
    assert!((ratio - r.value).abs() <= 1e-6 * r.value);
}

fn sup_ratio(spec: &Spectrum, nodes: &[usize], c: &[f64]) -> f64 {
    let phi = spec.synthesize(c);
    let top = phi.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let on = nodes.iter().fold(0.0f64, |m, &u| m.max(phi[u].abs()));
    top / on
}

#[test]
fn sup_constant_single_node() {
    let s = dirichlet_pi(50);
    let cloud = set_from_points(&s.domain, &[[0.7, 0.0]]).unwrap();
    let r = constant_sup(&s.spec, &cloud, 1.5).unwrap();
    let e1 = &s.spec.modes[0];
    let u = cloud.nodes()[0];
    let top = e1.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!((r.value - top / e1[u].abs()).abs() <= 1e-9 * r.value);
}

#[test]
fn sup_constant_on_a_nodal_point_is_infinite() {
    let s = dirichlet_pi(50);
    let cloud = set_from_points(&s.domain, &[[PI / 2.0, 0.0]]).unwrap();
    // sin 2x vanishes at the middle node.
    let r = constant_sup(&s.spec, &cloud, 2.5).unwrap();
    assert!(!r.observable);
    assert!(r.value.is_infinite());
}

#[test]
fn sup_constant_against_sampling_and_direction_grid() {
    let s = dirichlet_pi(100);
    let pts: Vec<[f64; 2]> = [0.3, 0.9, 1.4, 2.2, 2.9]
        .iter()
        .map(|&x| [x, 0.0])
        .collect();
    let cloud = set_from_points(&s.domain, &pts).unwrap();
    let r = constant_sup(&s.spec, &cloud, 3.5).unwrap();
    assert_eq!(r.modes, 3);
    let nodes = cloud.nodes();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut sampled = 0.0f64;
    for _ in 0..100_000 {
        let c: Vec<f64> = (0..3).map(|_| rng.random_range(-3.0..3.0)).collect();
        let phi = s.spec.synthesize(&c);
        if nodes.iter().all(|&u| phi[u].abs() <= 1.0) {
            sampled = sampled.max(phi.iter().fold(0.0f64, |m, v| m.max(v.abs())));
        }
    }
    assert!(sampled > 0.0 && sampled <= r.value * (1.0 + 1e-9));
    let (na, nb) = (400, 800);
    let mut grid = 0.0f64;
    for i in 0..=na {
        let th = PI * i as f64 / na as f64;
        for j in 0..nb {
            let ph = 2.0 * PI * j as f64 / nb as f64;
            let c = [th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos()];
            grid = grid.max(sup_ratio(&s.spec, &nodes, &c));
        }
    }
    assert!(grid <= r.value * (1.0 + 1e-9));
    assert!(grid >= 0.98 * r.value, "grid {grid} vs {}", r.value);
}

#[test]
fn sup_constant_is_scale_invariant() {
    let s = dirichlet_pi(60);
    let cloud =
        set_from_points(&s.domain, &[[0.4, 0.0], [1.1, 0.0], [2.0, 0.0], [2.7, 0.0]]).unwrap();
    let r = constant_sup(&s.spec, &cloud, 3.5).unwrap();
    for alpha in [0.01, 3.0, 250.0] {
        let mut scaled = s.spec.clone();
        scaled
            .modes
            .iter_mut()
            .for_each(|e| e.iter_mut().for_each(|v| *v *= alpha));
        let q = constant_sup(&scaled, &cloud, 3.5).unwrap();
        assert!((q.value - r.value).abs() <= 1e-8 * r.value);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn gram_constant_is_monotone(seed in 0u64..1000, lo in 1.5f64..6.0, extra in 0.5f64..4.0) {
        let s = dirichlet_pi(60);
        let small = random_set(&s.domain, 0.8, seed).unwrap();
        let mut cells = small.cells.clone();
        cells.extend(random_set(&s.domain, 0.8, seed + 7).unwrap().cells);
        let big = set_from_cells(&s.domain, &cells).unwrap();
        let a = constant_l2(&s.spec, &small, lo).unwrap().value;
        let b = constant_l2(&s.spec, &big, lo).unwrap().value;
        prop_assert!(a >= b * (1.0 - 1e-10));
        let c = constant_l2(&s.spec, &small, lo + extra).unwrap().value;
        prop_assert!(c >= a * (1.0 - 1e-10));
        prop_assert!(a >= 1.0 - 1e-12);
    }

    #[test]
    fn l1_certificate_is_tight(seed in 0u64..1000) {
        let s = dirichlet_pi(40);
        let e = random_set(&s.domain, 1.0, seed).unwrap();
        let opts = IrlsOptions { seed, ..IrlsOptions::default() };
        let r = constant_l1(&s.spec, &e, 4.5, &opts).unwrap();
        let phi = s.spec.synthesize(&r.certificate);
        let lhs = s.spec.norm(&phi);
        let rhs = r.value * restricted_l1(&s.spec, &e, &phi);
        prop_assert!((lhs - rhs).abs() <= 1e-6 * lhs);
        prop_assert!(r.value >= r.floor.unwrap() * (1.0 - 1e-9));
    }
}

#[test]
fn growth_fit_cases() {
    let s = dirichlet_pi(200);
    let all = set_from_mask(&s.domain, &[true; 200]).unwrap();
    let grid: Vec<f64> = (0..8).map(|k| 1.5 + 1.4 * k as f64).collect();
    let flat = fit_growth(
        &sweep(
            &s.spec,
            &all,
            NormPair::L2L2,
            &grid,
            &IrlsOptions::default(),
        )
        .unwrap(),
    )
    .unwrap();
    assert!(flat.degenerate_flat);
    assert_eq!(flat.rate, 0.0);
    assert!((flat.prefactor - 1.0).abs() < 1e-10);

    let e = half(&s);
    let sw = sweep(&s.spec, &e, NormPair::L2L2, &grid, &IrlsOptions::default()).unwrap();
    assert!(sw
        .entries
        .windows(2)
        .all(|w| w[1].constant >= w[0].constant));
    let fit = fit_growth(&sw).unwrap();
    assert!(fit.rate > 0.0);
    assert!(fit.r_squared.unwrap() >= 0.9, "{fit:?}");

    let few = ConstantSweep {
        norm: NormPair::L2L2,
        entries: sw.entries[..4].to_vec(),
    };
    assert!(matches!(fit_growth(&few), Err(Error::InsufficientData(_))));
    let mut shuffled = sw.clone();
    shuffled.entries.swap(0, 1);
    assert!(matches!(
        fit_growth(&shuffled),
        Err(Error::InvalidArgument(_))
    ));
}

#[test]
fn thin_sets_grow_faster() {
    // Sup constants on a Cantor cloud inside [0, pi/2] against every node of [0, pi/2].
    let s = dirichlet_pi(243);
    let info = CantorInfo {
        ratio: 1.0 / 3.0,
        levels: 5,
        from: 0.0,
        to: 0.5 * PI,
        transverse: None,
    };
    let cantor = cantor_set(&s.domain, info).unwrap();
    let left: Vec<[f64; 2]> = s
        .domain
        .unknown_nodes()
        .iter()
        .map(|&n| s.domain.node_coords(n))
        .filter(|p| p[0] <= 0.5 * PI + 1e-12)
        .collect();
    let left = set_from_points(&s.domain, &left).unwrap();
    let lnodes = left.nodes();
    assert!(cantor.nodes().iter().all(|u| lnodes.contains(u)));
    let grid: Vec<f64> = (0..8).map(|k| 1.5 + k as f64).collect();
    let opts = IrlsOptions::default();
    let sc = sweep(&s.spec, &cantor, NormPair::SupSup, &grid, &opts).unwrap();
    let sl = sweep(&s.spec, &left, NormPair::SupSup, &grid, &opts).unwrap();
    for (a, b) in sc.entries.iter().zip(&sl.entries) {
        assert!(a.constant >= b.constant * (1.0 - 1e-9));
    }
    let (fc, fl) = (fit_growth(&sc).unwrap(), fit_growth(&sl).unwrap());
    assert!(fc.rate > fl.rate, "cantor {} vs half {}", fc.rate, fl.rate);
}
