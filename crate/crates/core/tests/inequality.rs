mod common;

use core::f64::consts::PI;

use common::{dirichlet_pi, gaussian_fields, Setup};
use heatobs_core::inequality::*;
use heatobs_core::obsets::*;
use heatobs_core::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn half(s: &Setup) -> ObservationSet {
    let d = &s.domain;
    set_from_mask(d, &box_mask(d, [0.0, 0.0], [0.5 * d.axis(0).length, 0.0])).unwrap()
}

fn everything(s: &Setup) -> ObservationSet {
    set_from_mask(&s.domain, &vec![true; s.domain.cell_count()]).unwrap()
}

/// Continuum field `sum_{k<modes} c_k sin((k+1) x)` sampled on the grid.
fn sine_series(s: &Setup, c: &[f64]) -> Vec<f64> {
    s.domain
        .unknown_nodes()
        .iter()
        .map(|&n| {
            let x = s.domain.node_coords(n)[0];
            c.iter()
                .enumerate()
                .map(|(k, v)| v * ((k + 1) as f64 * x).sin())
                .sum()
        })
        .collect()
}

#[test]
fn single_mode_interpolation_is_closed_form() {
    let s = dirichlet_pi(80);
    let all = everything(&s);
    let e1 = s.spec.modes[0].clone();
    let (t0, t1, eps) = (0.1, 0.6, 0.5);
    let r = interpolation_check(&s.spec, &all, &e1, t0, t1, eps).unwrap();
    let lam = s.spec.values[0];
    let l1: f64 = all.observe(&s.spec, &e1);
    assert!((r.lhs - (-lam * t1).exp()).abs() < 1e-12);
    assert!((r.earlier - (-lam * t0).exp()).abs() < 1e-12);
    assert!((r.observed - (-lam * t1).exp() * l1).abs() < 1e-12);
    let target = -eps * lam * (t1 - t0) - (1.0 - eps) * l1.ln();
    let n = r.n_required;
    assert!((n.ln() + n / (t1 - t0) - target).abs() < 1e-10);
    // Equality at N.
    let rhs = n * (n / (t1 - t0)).exp() * r.observed.powf(1.0 - eps) * r.earlier.powf(eps);
    assert!((rhs - r.lhs).abs() < 1e-10 * r.lhs);
}

#[test]
fn interpolation_argument_errors() {
    let s = dirichlet_pi(30);
    let e = half(&s);
    let f = s.spec.modes[0].clone();
    assert!(matches!(
        interpolation_check(&s.spec, &e, &f, 0.0, 0.5, 1.0),
        Err(Error::InvalidArgument(_))
    ));
    assert!(matches!(
        interpolation_check(&s.spec, &e, &f, 0.0, 0.5, 0.0),
        Err(Error::InvalidArgument(_))
    ));
    assert!(matches!(
        interpolation_check(&s.spec, &e, &f, 0.5, 0.5, 0.5),
        Err(Error::InvalidArgument(_))
    ));
    assert!(matches!(
        interpolation_check(&s.spec, &e, &f, 0.6, 0.5, 0.5),
        Err(Error::InvalidArgument(_))
    ));
}

#[test]
fn interpolation_batch_on_half_interval() {
    let s = dirichlet_pi(200);
    let e = half(&s);
    let fields = gaussian_fields(s.spec.size(), 50, 5);
    let b = interpolation_batch(&s.spec, &e, &fields, 0.0, 0.5, 0.5).unwrap();
    assert!(b.n_sup.is_finite() && b.n_sup > 0.0);
    assert!(b.holds_all);
    assert!(b.max_mismatch <= 0.01, "{}", b.max_mismatch);
    for r in &b.reports {
        assert!(r.split_holds);
        // Direct evaluation with the batch constant.
        let rhs = b.n_sup * (b.n_sup / 0.5).exp() * r.observed.sqrt() * r.earlier.sqrt();
        assert!(r.lhs <= rhs * (1.0 + 1e-10));
    }
}

#[test]
fn interpolation_constant_stabilizes_under_refinement() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let coeffs: Vec<Vec<f64>> = (0..20)
        .map(|_| {
            (0..30)
                .map(|k| rng.random_range(-1.0..1.0) / (1.0 + k as f64))
                .collect()
        })
        .collect();
    let n_at = |cells: usize| {
        let s = dirichlet_pi(cells);
        let e = half(&s);
        let fields: Vec<Vec<f64>> = coeffs.iter().map(|c| sine_series(&s, c)).collect();
        interpolation_batch(&s.spec, &e, &fields, 0.0, 0.5, 0.5)
            .unwrap()
            .n_sup
    };
    let (a, b, c) = (n_at(100), n_at(200), n_at(400));
    assert!((b - c).abs() < (a - b).abs() + 1e-3 * c, "{a} {b} {c}");
    assert!((b - c).abs() <= 0.02 * c, "{a} {b} {c}");
}

#[test]
fn observation_sequence_law() {
    let seq = TimeSequence::observation(1.0, 0.5, 5).unwrap();
    assert_eq!(seq.times.len(), 6);
    assert!(!seq.is_increasing());
    let g = seq.gaps();
    for w in g.windows(2) {
        assert!((w[1] - 0.5 * w[0]).abs() < 1e-15);
    }
    // Gaps shrinking faster than the ratio are rejected.
    let fast = TimeSequence::new(
        vec![1.0, 0.5, 0.4, 0.39],
        0.5,
        1.0,
        SequenceKind::LrGeometric,
    );
    assert!(matches!(fast, Err(Error::InvalidArgument(_))));
    assert!(TimeSequence::new(vec![1.0, 0.5, 0.6], 0.5, 1.0, SequenceKind::LrGeometric).is_err());
    assert!(TimeSequence::observation(1.0, 1.0, 5).is_err());
}

#[test]
fn telescope_single_mode_closed_form() {
    let s = dirichlet_pi(60);
    let all = everything(&s);
    let seq = TimeSequence::observation(1.0, 0.5, 8).unwrap();
    let e1 = s.spec.modes[0].clone();
    let rate = 0.05;
    let r = telescope_check(&s.spec, &all, &seq, &e1, rate, 0.125).unwrap();
    let lam = s.spec.values[0];
    let l1 = all.observe(&s.spec, &e1);
    let gaps = seq.gaps();
    let best = (0..gaps.len())
        .map(|n| -rate / gaps[n] - lam * seq.times[n])
        .fold(f64::NEG_INFINITY, f64::max);
    let want = (-lam * 1.0 - best).exp() / l1;
    assert!(r.constant.is_finite());
    assert!((r.constant - want).abs() <= 1e-10 * want);
    for (n, x) in r.norms.iter().enumerate() {
        assert!((x - (-lam * seq.times[n]).exp()).abs() < 1e-12);
    }
}

#[test]
fn telescope_rejects_bad_sequences() {
    let s = dirichlet_pi(30);
    let e = half(&s);
    let f = s.spec.modes[0].clone();
    let inc = control_times();
    assert!(matches!(
        telescope_check(&s.spec, &e, &inc, &f, 0.1, 0.1),
        Err(Error::InvalidArgument(_))
    ));
    let seq = TimeSequence::observation(1.0, 0.5, 4).unwrap();
    assert!(matches!(
        telescope_check(&s.spec, &e, &seq, &f, -1.0, 0.1),
        Err(Error::InvalidArgument(_))
    ));
}

fn control_times() -> TimeSequence {
    heatobs_core::control::lr_schedule(1.0, 0.5, 5).unwrap()
}

#[test]
fn telescope_batches_agree_and_steps_close() {
    let s = dirichlet_pi(200);
    let e = half(&s);
    let seq = TimeSequence::observation(1.0, 0.5, 20).unwrap();
    let rate = 0.05;
    let a = telescope_batch(
        &s.spec,
        &e,
        &seq,
        &gaussian_fields(s.spec.size(), 50, 1),
        rate,
        1.0,
    )
    .unwrap();
    let b = telescope_batch(
        &s.spec,
        &e,
        &seq,
        &gaussian_fields(s.spec.size(), 50, 2),
        rate,
        1.0,
    )
    .unwrap();
    assert!(a.holds_all && b.holds_all);
    let ratio = a.constant_sup / b.constant_sup;
    assert!(
        (1.0 / 3.0..=3.0).contains(&ratio),
        "{} vs {}",
        a.constant_sup,
        b.constant_sup
    );
    for batch in [&a, &b] {
        let fit = batch.fit.as_ref().unwrap();
        assert!(fit.nonpositive, "{fit:?}");
        assert!(fit.telescoped);
        assert!((fit.eps - 0.125).abs() < 1e-15);
        assert!(fit.a >= 2.0 * fit.b);
        assert!(fit.c_empirical <= fit.c * (1.0 + 1e-9));
        // Independent recomputation of every step residual.
        for r in &batch.reports {
            for (n, g) in seq.gaps().iter().enumerate() {
                let lhs = (-fit.a / g).exp() * r.norms[n]
                    - (-fit.d_multiple * fit.a / g).exp() * r.norms[n + 1];
                let rhs = fit.c * (-fit.b / g).exp() * r.observed[n];
                assert!(lhs <= rhs * (1.0 + 1e-9) + 1e-300);
            }
        }
    }
}

#[test]
fn phung_wang_on_full_interval() {
    let rep = phung_wang_times(&[(0.0, 1.0)], 1.0, 2.0, 0.3, 6).unwrap();
    assert!(rep.ratios.iter().all(|r| (r - 1.0).abs() < 1e-12));
    let t = &rep.sequence.times;
    for (m, lm) in t.iter().enumerate() {
        assert!(((lm - 0.3) - 2f64.powi(-(m as i32)) * (t[0] - 0.3)).abs() < 1e-14);
    }
    assert!(matches!(
        phung_wang_times(&[(0.0, 1.0)], 1.0, 1.0, 0.3, 6),
        Err(Error::InvalidArgument(_))
    ));
    assert!(matches!(
        phung_wang_times(&[(0.0, 0.2)], 1.0, 2.0, 0.5, 6),
        Err(Error::InvalidArgument(_))
    ));
}

#[test]
fn phung_wang_on_fat_cantor() {
    let j = fat_cantor(0.0, 1.0, 12);
    let total: f64 = j.iter().map(|(a, b)| b - a).sum();
    assert!((total - 0.5).abs() < 1e-3, "{total}");
    let rep = phung_wang_times(&j, 1.0, 2.0, 0.0, 8).unwrap();
    assert_eq!(rep.ratios.len(), 8);
    let t = &rep.sequence.times;
    for m in 0..8 {
        // Direct intersection of the window with every interval.
        let (lo, hi) = (t[m + 1], t[m]);
        let inter: f64 = j
            .iter()
            .map(|&(a, b)| (b.min(hi) - a.max(lo)).max(0.0))
            .sum();
        let r = inter / (hi - lo);
        assert!(r >= 1.0 / 3.0);
        assert!((r - rep.ratios[m]).abs() < 1e-12);
    }
}

#[test]
fn phung_wang_reports_search_failure() {
    let j = [(0.5, 0.50001), (0.9, 1.0)];
    assert!(matches!(
        phung_wang_times(&j, 1.0, 2.0, 0.5, 8),
        Err(Error::SearchFailure(_))
    ));
}

#[test]
fn fubini_product_and_empty() {
    let s = dirichlet_pi(40);
    let mask = box_mask(&s.domain, [0.0, 0.0], [1.0, 0.0]);
    let f = SpaceTimeMask::product(&s.domain, &mask, 2.0, 16).unwrap();
    let sl = fubini_slices(&s.domain, &f).unwrap();
    assert_eq!(sl.slabs, (0..16).collect::<Vec<_>>());
    assert!((sl.time_measure - 2.0).abs() < 1e-12);
    let e = set_from_mask(&s.domain, &mask).unwrap().measure;
    assert!(sl.slice_measures.iter().all(|m| (m - e).abs() < 1e-12));
    assert!(sl.holds);
    let empty = SpaceTimeMask::new(&s.domain, 1.0, vec![vec![false; 40]; 4]).unwrap();
    assert!(matches!(
        fubini_slices(&s.domain, &empty),
        Err(Error::InvalidArgument(_))
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn fubini_bound_on_random_masks(seed in 0u64..10_000, density in 0.05f64..0.95) {
        let s = dirichlet_pi(30);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let slabs: Vec<Vec<bool>> = (0..24).map(|_| (0..30).map(|_| rng.random_bool(density)).collect()).collect();
        prop_assume!(slabs.iter().flatten().any(|b| *b));
        let f = SpaceTimeMask::new(&s.domain, 1.5, slabs.clone()).unwrap();
        let sl = fubini_slices(&s.domain, &f).unwrap();
        // Direct counting.
        let h = PI / 30.0;
        let dt = 1.5 / 24.0;
        let measure: f64 = slabs.iter().map(|m| m.iter().filter(|b| **b).count() as f64 * h * dt).sum();
        prop_assert!((sl.measure - measure).abs() < 1e-12);
        let good = slabs.iter().filter(|m| m.iter().filter(|b| **b).count() as f64 * h >= measure / 3.0 * (1.0 - 1e-12)).count();
        prop_assert_eq!(good, sl.slabs.len());
        prop_assert!(sl.time_measure >= measure / (2.0 * PI) * (1.0 - 1e-12));
        prop_assert!(sl.holds);
    }

    #[test]
    fn interpolation_inequality_holds_at_required_constant(seed in 0u64..10_000, s0 in 0.0f64..0.3, tau in 0.05f64..0.6) {
        let s = dirichlet_pi(40);
        let e = half(&s);
        let f = &gaussian_fields(s.spec.size(), 1, seed)[0];
        let r = interpolation_check(&s.spec, &e, f, s0, s0 + tau, 0.5).unwrap();
        let log_rhs = r.n_required.ln() + r.n_required / tau + 0.5 * r.observed.ln() + 0.5 * r.earlier.ln();
        prop_assert!((r.lhs.ln() - log_rhs).abs() < 1e-9);
        prop_assert!(r.split_holds);
    }
}
