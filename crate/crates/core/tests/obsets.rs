use core::f64::consts::PI;

use heatobs_core::domain::{BoundaryCondition, Domain};
use heatobs_core::obsets::*;
use heatobs_core::Error;
use proptest::prelude::*;

use BoundaryCondition::{Dirichlet, Neumann};

/// Explicit cover by the occupied dyadic intervals of side `side` on
/// `[origin, origin + l0]`; an upper bound on the content.
fn dyadic_cover_sum(intervals: &[(f64, f64)], origin: f64, side: f64, s: f64) -> f64 {
    let mut occupied = std::collections::BTreeSet::new();
    for &(a, b) in intervals {
        let lo = ((a - origin) / side).floor() as i64;
        let hi = (((b - origin) / side).ceil() as i64 - 1).max(lo);
        occupied.extend(lo..=hi);
    }
    occupied.len() as f64 * (0.5 * side).powf(s)
}

fn unit(cells: usize) -> Domain {
    Domain::build_interval(1.0, cells, Neumann).unwrap()
}

#[test]
fn mask_examples() {
    let d = Domain::build_interval(PI, 60, Dirichlet).unwrap();
    let full = set_from_mask(&d, &[true; 60]).unwrap();
    assert!((lebesgue_measure(&full) - PI).abs() < 1e-12);
    let d1 = unit(100);
    let half = set_from_mask(&d1, &box_mask(&d1, [0.0, 0.0], [0.5, 0.0])).unwrap();
    assert!((lebesgue_measure(&half) - 0.5).abs() < 1e-12);
    assert_eq!(set_from_mask(&d1, &[false; 100]), Err(Error::EmptySet));
    assert!(matches!(
        set_from_mask(&d1, &[true; 7]),
        Err(Error::InvalidArgument(_))
    ));
    let member: f64 = half.cells.len() as f64 * d1.cell_volume();
    assert!((member - half.measure).abs() < 1e-15);
}

#[test]
fn rectangle_mask_measure() {
    let d = Domain::build_rectangle(2.0, 1.0, 20, 10, Dirichlet).unwrap();
    let set = set_from_mask(&d, &box_mask(&d, [0.5, 0.25], [1.5, 0.75])).unwrap();
    assert!((set.measure - 0.5).abs() < 1e-12);
    assert!(set.boundary_distance >= 0.2 - 1e-12);
    assert!(set.check_margin(0.1).is_ok());
    assert!(set.check_margin(0.3).is_err());
}

#[test]
fn cantor_examples() {
    let iv = cantor_intervals(1.0 / 3.0, 5, 0.0, 1.0);
    assert_eq!(iv.len(), 32);
    let total: f64 = iv.iter().map(|(a, b)| b - a).sum();
    assert!((total - (2.0f64 / 3.0).powi(5)).abs() < 1e-14);
    assert!(iv.windows(2).all(|w| w[0].1 < w[1].0));
    // Total length (2r)^L for other ratios, shrinking to zero.
    for (r, l) in [(0.2, 4), (0.45, 9), (1.0 / 3.0, 12)] {
        let t: f64 = cantor_intervals(r, l, 0.0, 1.0)
            .iter()
            .map(|(a, b)| b - a)
            .sum();
        let want = (2.0f64 * r).powi(l as i32);
        assert!((t - want).abs() < 1e-9 * want, "{r} {l}: {t} vs {want}");
    }
    let d = unit(243);
    let info = CantorInfo {
        ratio: 1.0 / 3.0,
        levels: 5,
        from: 0.0,
        to: 1.0,
        transverse: None,
    };
    let set = cantor_set(&d, info).unwrap();
    assert_eq!(set.points.len(), 32);
    assert!((set.exponent - 2f64.ln() / 3f64.ln()).abs() < 1e-12);
    assert_eq!(lebesgue_measure(&set), 0.0);
    assert!(set.content > 0.0);
    for delta in [0.1, 0.25, 0.5] {
        let r = ratio_for_codimension(delta).unwrap();
        let info = CantorInfo {
            ratio: r,
            levels: 3,
            from: 0.0,
            to: 1.0,
            transverse: None,
        };
        assert!((info.exponent() - (1.0 - delta)).abs() < 1e-12);
    }
    assert!(ratio_for_codimension(0.0).is_err());
    for bad in [0.0, 0.5, 0.7] {
        let info = CantorInfo {
            ratio: bad,
            levels: 3,
            from: 0.0,
            to: 1.0,
            transverse: None,
        };
        assert!(matches!(
            cantor_set(&d, info),
            Err(Error::InvalidArgument(_))
        ));
    }
}

#[test]
fn planar_cantor_product() {
    let d = Domain::build_rectangle(1.0, 1.0, 81, 20, Dirichlet).unwrap();
    let info = CantorInfo {
        ratio: 1.0 / 3.0,
        levels: 3,
        from: 0.1,
        to: 0.9,
        transverse: Some((0.3, 0.6)),
    };
    let set = cantor_set(&d, info.clone()).unwrap();
    assert!((set.exponent - (1.0 + 2f64.ln() / 3f64.ln())).abs() < 1e-12);
    assert!(set.content > 0.0);
    let ys = (0..=20).filter(|j| {
        let y = *j as f64 / 20.0;
        (0.3..=0.6).contains(&y)
    });
    assert_eq!(set.points.len(), 8 * ys.count());
    assert!(set.points.iter().all(|p| d.contains(*p)));
    let flat = CantorInfo {
        transverse: None,
        ..info
    };
    assert!(cantor_set(&d, flat).is_err());
}

#[test]
fn middle_thirds_content_against_dyadic_covers() {
    let d = unit(729 * 4);
    let info = CantorInfo {
        ratio: 1.0 / 3.0,
        levels: 8,
        from: 0.0,
        to: 1.0,
        transverse: None,
    };
    let set = cantor_set(&d, info).unwrap();
    let s = set.exponent;
    let lower = hausdorff_content(&set, s).unwrap();
    assert_eq!(lower.method, ContentMethod::CantorMass);
    assert!(lower.value >= 0.25, "{}", lower.value);
    let iv = cantor_intervals(1.0 / 3.0, 8, 0.0, 1.0);
    for depth in [3, 6, 9] {
        let cover = dyadic_cover_sum(&iv, 0.0, 0.5f64.powi(depth), s);
        assert!(lower.value <= cover, "depth {depth}: cover {cover}");
    }
    // Natural covers by level intervals: 2^l balls of radius 3^-l / 2.
    for l in 1..=8 {
        let cover = 2f64.powi(l) * (0.5 * 3f64.powi(-l)).powf(s);
        assert!(lower.value <= cover * (1.0 + 1e-12));
    }
    // Exponent above the dimension carries no content.
    assert_eq!(hausdorff_content(&set, 0.9).unwrap().value, 0.0);
}

#[test]
fn full_interval_content() {
    let d = unit(50);
    let set = set_from_mask(&d, &[true; 50]).unwrap();
    let c = hausdorff_content(&set, 1.0).unwrap();
    assert!(c.value >= 0.5 - 1e-12);
    // One ball of radius 1/2 covers it.
    assert!(c.value <= 0.5 + 1e-12);
    assert!(matches!(
        hausdorff_content(&set, 0.0),
        Err(Error::InvalidArgument(_))
    ));
    assert!(matches!(
        hausdorff_content(&set, 1.5),
        Err(Error::InvalidArgument(_))
    ));
    // Lower exponent via dyadic masses, still below the one-ball cover.
    let c7 = hausdorff_content(&set, 0.7).unwrap();
    assert!(c7.value > 0.0 && c7.value <= 0.5f64.powf(0.7));
}

#[test]
fn finite_cloud_content_vanishes_at_full_exponent() {
    let d = unit(1000);
    let pts: Vec<[f64; 2]> = [0.11, 0.37, 0.52, 0.8].iter().map(|&x| [x, 0.0]).collect();
    let set = set_from_points(&d, &pts).unwrap();
    let b: Vec<f64> = [4, 8, 12]
        .iter()
        .map(|&k| hausdorff_content_at_depth(&set, 1.0, k).unwrap().value)
        .collect();
    assert!(b.windows(2).all(|w| w[1] < w[0]), "{b:?}");
    assert!(b[2] < 1e-3);
    assert_eq!(lebesgue_measure(&set), 0.0);
}

#[test]
fn point_cloud_snapping() {
    let d = Domain::build_interval(1.0, 10, Dirichlet).unwrap();
    let set = set_from_points(&d, &[[0.31, 0.0], [0.29, 0.0], [0.01, 0.0]]).unwrap();
    assert_eq!(set.nodes(), vec![2]);
    assert_eq!(set.dropped, 1);
    assert!((set.snap_distance - 0.01).abs() < 1e-12);
    assert!(matches!(
        set_from_points(&d, &[[1.5, 0.0]]),
        Err(Error::InvalidArgument(_))
    ));
    assert_eq!(set_from_points(&d, &[]), Err(Error::EmptySet));
    assert_eq!(set_from_points(&d, &[[0.0, 0.0]]), Err(Error::EmptySet));
}

#[test]
fn random_set_examples() {
    let d = unit(1000);
    let a = random_set(&d, 0.3, 17).unwrap();
    assert!((0.299..=0.301).contains(&a.measure));
    assert_eq!(a, random_set(&d, 0.3, 17).unwrap());
    assert_ne!(a.cells, random_set(&d, 0.3, 18).unwrap().cells);
    assert!(matches!(
        random_set(&d, 2.0, 1),
        Err(Error::InvalidArgument(_))
    ));
    assert!(matches!(
        random_set(&d, 0.0, 1),
        Err(Error::InvalidArgument(_))
    ));
}

/// Image of a mask under `x -> 2x`, on a grid with twice the cells.
fn dilate(d: &Domain, set: &ObservationSet) -> (Domain, ObservationSet) {
    let big = Domain::build_interval(2.0 * d.axis(0).length, 2 * d.cell_count(), Neumann).unwrap();
    let cells: Vec<usize> = set.cells.iter().flat_map(|&c| [2 * c, 2 * c + 1]).collect();
    let image = set_from_cells(&big, &cells).unwrap();
    (big, image)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    // Content of an affine image, bounded below through the inverse map's
    // Lipschitz constant.
    #[test]
    fn affine_images_of_cantor_sets(a in 0.2f64..3.0, b in 0.0f64..1.0, levels in 2usize..7) {
        let d = Domain::build_interval(6.0, 600, Neumann).unwrap();
        let base = CantorInfo { ratio: 0.3, levels, from: 0.5, to: 1.5, transverse: None };
        let image = CantorInfo { from: a * 0.5 + b, to: a * 1.5 + b, ..base.clone() };
        let s = base.exponent();
        let e = hausdorff_content(&cantor_set(&d, base).unwrap(), s).unwrap().value;
        let fe = hausdorff_content(&cantor_set(&d, image).unwrap(), s).unwrap().value;
        prop_assert!(fe >= a.powf(s) * e * (1.0 - 1e-12));
        if a >= 1.0 {
            // Expanding maps: the literal 1/C^s factor with C = a.
            prop_assert!(fe >= a.powf(-s) * e);
        }
    }

    #[test]
    fn dilated_masks(seed in 0u64..500, s in 0.3f64..1.0) {
        let d = unit(64);
        let set = random_set(&d, 0.25, seed).unwrap();
        let (_, image) = dilate(&d, &set);
        let e = hausdorff_content(&set, s).unwrap().value;
        let fe = hausdorff_content(&image, s).unwrap().value;
        prop_assert!(fe >= 2f64.powf(s) * e * (1.0 - 1e-9));
        // Back through the contraction x -> x/2, Lipschitz constant of the inverse 2.
        prop_assert!(e >= 2f64.powf(-s) * fe * (1.0 - 1e-9));
    }

    #[test]
    fn unions_stay_below_explicit_covers(s1 in 0u64..500, s2 in 0u64..500, s in 0.4f64..1.0) {
        let d = unit(64);
        let a = random_set(&d, 0.2, s1).unwrap();
        let b = random_set(&d, 0.1, s2 + 1000).unwrap();
        let mut cells = a.cells.clone();
        cells.extend(&b.cells);
        let u = set_from_cells(&d, &cells).unwrap();
        let iv = |set: &ObservationSet| -> Vec<(f64, f64)> {
            set.cells.iter().map(|&c| (c as f64 / 64.0, (c + 1) as f64 / 64.0)).collect()
        };
        let lower = hausdorff_content(&u, s).unwrap().value;
        for depth in [2, 4, 6] {
            let side = 0.5f64.powi(depth);
            let cover = dyadic_cover_sum(&iv(&a), 0.0, side, s) + dyadic_cover_sum(&iv(&b), 0.0, side, s);
            prop_assert!(lower <= cover * (1.0 + 1e-12));
        }
        // At full exponent the bound is |E| / 2, exactly subadditive.
        let full = |x: &ObservationSet| hausdorff_content(x, 1.0).unwrap().value;
        prop_assert!(full(&u) <= full(&a) + full(&b) + 1e-12);
    }
}
