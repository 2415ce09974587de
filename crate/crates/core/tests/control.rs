mod common;

use core::f64::consts::PI;

use common::{dirichlet_pi, gaussian_fields, Setup};
use heatobs_core::control::*;
use heatobs_core::inequality::SpaceTimeMask;
use heatobs_core::obsets::*;
use heatobs_core::Error;
use nalgebra::{DMatrix, DVector};

fn half(s: &Setup) -> ObservationSet {
    let d = &s.domain;
    set_from_mask(d, &box_mask(d, [0.0, 0.0], [0.5 * PI, 0.0])).unwrap()
}

fn everything(s: &Setup) -> ObservationSet {
    set_from_mask(&s.domain, &vec![true; s.domain.cell_count()]).unwrap()
}

fn opts(modes: usize) -> SynthesisOptions {
    SynthesisOptions {
        modes,
        ..Default::default()
    }
}

/// Moment of a payload against mode `k`, summed directly over the support.
fn moment(s: &Setup, set: &ObservationSet, step: &StepControl, k: usize) -> f64 {
    set.weights(&s.spec)
        .iter()
        .zip(&step.payload)
        .map(|(&(u, w), p)| w * p * s.spec.modes[k][u])
        .sum()
}

#[test]
fn lr_schedule_law() {
    let t = lr_schedule(1.0, 0.5, 4).unwrap();
    assert_eq!(t.times, vec![0.5, 0.75, 0.875, 0.9375]);
    assert!(t.is_increasing());
    let g = lr_schedule(2.0, 0.3, 10).unwrap();
    let gaps: Vec<f64> = g.times.windows(2).map(|w| w[1] - w[0]).collect();
    for w in gaps.windows(2) {
        assert!((w[1] / w[0] - 0.3).abs() < 1e-9);
    }
    for bad in [
        lr_schedule(1.0, 1.0, 4),
        lr_schedule(1.0, 0.5, 1),
        lr_schedule(0.0, 0.5, 4),
    ] {
        assert!(matches!(bad, Err(Error::InvalidArgument(_))));
    }
}

#[test]
fn whole_domain_step_is_the_mode_itself() {
    let s = dirichlet_pi(64);
    let all = everything(&s);
    let mut d = vec![0.0; 4];
    d[0] = 0.7;
    let st = step_control(&s.spec, &all, 1, &d, &opts(4)).unwrap();
    assert_eq!(st.controlled, 1);
    let nodes = all.nodes();
    for (u, p) in nodes.iter().zip(&st.payload) {
        assert!((p + 0.7 * s.spec.modes[0][*u]).abs() < 1e-10);
    }
    assert!((moment(&s, &all, &st, 0) + 0.7).abs() < 1e-12);
    let m = st.moments(&s.spec, 4);
    assert!(m[1..].iter().all(|v| v.abs() < 1e-10));
}

#[test]
fn point_impulses_match_direct_solve() {
    let s = dirichlet_pi(90);
    let pts: Vec<[f64; 2]> = [0.4, 1.3, 2.2].iter().map(|&x| [x, 0.0]).collect();
    let cloud = set_from_points(&s.domain, &pts).unwrap();
    let d = vec![0.3, -1.1, 0.6, 0.0];
    let st = step_control(&s.spec, &cloud, 3, &d, &opts(4)).unwrap();
    assert_eq!(st.controlled, 3);
    let nodes = cloud.nodes();
    let b = DMatrix::from_fn(3, 3, |k, i| {
        s.spec.kappa[nodes[i]] * s.spec.modes[k][nodes[i]]
    });
    let want = b
        .lu()
        .solve(&DVector::from_vec(vec![-0.3, 1.1, -0.6]))
        .unwrap();
    for i in 0..3 {
        assert!(
            (st.payload[i] - want[i]).abs() < 1e-9 * want.amax(),
            "{:?} {want}",
            st.payload
        );
    }
    let tv: f64 = nodes.iter().zip(&st.payload).map(|(_, p)| p.abs()).sum();
    assert!((st.total_variation - tv).abs() < 1e-12 * tv);
    assert!(st.moment_residual < 1e-10);
}

#[test]
fn blind_point_is_reported() {
    let s = dirichlet_pi(40);
    let cloud = set_from_points(&s.domain, &[[0.5 * PI, 0.0]]).unwrap();
    let r = step_control(&s.spec, &cloud, 2, &[1.0, 1.0], &opts(2));
    assert!(
        matches!(
            r,
            Err(Error::SynthesisFailure {
                step: None,
                mode: 1,
                ..
            })
        ),
        "{r:?}"
    );
    let r = step_control(&s.spec, &cloud, 3, &[1.0, 1.0], &opts(2));
    assert!(matches!(r, Err(Error::InvalidArgument(_))));
}

#[test]
fn zero_deficit_needs_no_control() {
    let s = dirichlet_pi(60);
    let e = half(&s);
    let sched = lr_schedule(1.0, 0.5, 6).unwrap();
    let c = synthesize(&s.spec, &e, &sched, &[0.0; 10], &opts(10)).unwrap();
    assert_eq!(c.terminal_deficit, 0.0);
    assert_eq!(c.relative_deficit, 0.0);
    assert!(c.steps.iter().all(|st| st.total_variation == 0.0));
    // The empty schedule replays as free heat flow.
    let u0: Vec<f64> = (0..10).map(|k| 1.0 / (k + 1) as f64).collect();
    let tr = simulate(&s.spec, &u0, &[0.0; 10], &c).unwrap();
    for (k, v) in tr.terminal.iter().enumerate() {
        assert!((v - u0[k] * (-s.spec.values[k]).exp()).abs() < 1e-14);
    }
    let cost = cost_report(&c, 0.5);
    assert_eq!(cost.total, 0.0);
    assert!(cost.remark_holds);
}

#[test]
fn one_mode_is_cancelled() {
    let s = dirichlet_pi(80);
    let e = half(&s);
    let sched = lr_schedule(1.0, 0.5, 3).unwrap();
    let mut d0 = vec![0.0; 5];
    d0[0] = 1.0;
    let c = synthesize(&s.spec, &e, &sched, &d0, &opts(5)).unwrap();
    assert!(c.terminal_deficit < 1e-6, "{}", c.terminal_deficit);
    assert!(c.decay_holds);
}

/// Independent replay of the deficit through explicit heat factors and moments.
fn replay(s: &Setup, set: &ObservationSet, c: &ControlSchedule, d0: &[f64]) -> Vec<f64> {
    let mut d = d0.to_vec();
    let mut now = 0.0;
    for st in &c.steps {
        for (k, v) in d.iter_mut().enumerate() {
            *v = *v * (-s.spec.values[k] * (st.time - now)).exp() + moment(s, set, st, k);
        }
        now = st.time;
    }
    d.iter()
        .enumerate()
        .map(|(k, v)| v * (-s.spec.values[k] * (c.horizon - now)).exp())
        .collect()
}

#[test]
fn many_modes_on_half_interval() {
    let s = dirichlet_pi(200);
    let e = half(&s);
    let sched = lr_schedule(1.0, 0.5, 12).unwrap();
    let d0: Vec<f64> = gaussian_fields(40, 1, 3).remove(0);
    let c = synthesize(&s.spec, &e, &sched, &d0, &opts(40)).unwrap();
    assert!(c.relative_deficit <= 1e-6, "{}", c.relative_deficit);
    assert!(c.decay_holds);
    let d = replay(&s, &e, &c, &d0);
    let n = d.iter().map(|x| x * x).sum::<f64>().sqrt();
    assert!((n - c.terminal_deficit).abs() <= 1e-9 * c.initial_deficit);
    // Replaying on actual data: u(T) - e^{T Delta} v0 is the deficit.
    let v0: Vec<f64> = gaussian_fields(40, 1, 4).remove(0);
    let u0: Vec<f64> = d0.iter().zip(&v0).map(|(a, b)| a + b).collect();
    let tr = simulate(&s.spec, &u0, &v0, &c).unwrap();
    assert!((tr.error - c.terminal_deficit).abs() <= 1e-9 * c.initial_deficit);
    assert_eq!(tr.times.len(), 12);

    let cost = cost_report(&c, 0.01);
    assert_eq!(cost.steps.len(), 12);
    for w in cost.steps.windows(2) {
        assert!(w[1].partial >= w[0].partial);
    }
    let direct: f64 = cost
        .steps
        .iter()
        .map(|st| st.variation * (0.01 / st.gap).exp())
        .sum();
    assert!(
        (direct - cost.total).abs() <= 1e-12 * direct,
        "{direct} {}",
        cost.total
    );
    assert!(cost.total.is_finite());
    assert!(cost.remark_holds);
}

#[test]
fn cost_of_a_single_step() {
    let s = dirichlet_pi(60);
    let e = half(&s);
    let d0 = vec![1.0, 0.0];
    let st = step_control(&s.spec, &e, 1, &d0, &opts(2)).unwrap();
    let mut st = st;
    st.time = 0.6;
    let c = ControlSchedule {
        horizon: 1.0,
        steps: vec![st.clone()],
        modes: 2,
        initial_deficit: 1.0,
        terminal_deficit: 0.0,
        relative_deficit: 0.0,
        decay: vec![],
        decay_holds: true,
    };
    let cost = cost_report(&c, 0.2);
    assert!((cost.total - st.total_variation * (0.2f64 / 0.4).exp()).abs() < 1e-12);
    assert_eq!(cost.last_share, 1.0);
    assert!(cost.ratios.is_empty());
    let empty = ControlSchedule { steps: vec![], ..c };
    let cost = cost_report(&empty, 0.2);
    assert_eq!((cost.total, cost.last_share), (0.0, 0.0));
}

/// Terminal deficit of a distributed control, integrating each piece in time
/// with composite Simpson.
fn distributed_terminal(
    s: &Setup,
    mask: &SpaceTimeMask,
    dc: &DistributedControl,
    d0: &[f64],
) -> Vec<f64> {
    let t = dc.horizon;
    (0..d0.len())
        .map(|k| {
            let l = s.spec.values[k];
            let mut v = d0[k] * (-l * t).exp();
            for p in &dc.pieces {
                let set = set_from_mask(&s.domain, &mask.slabs[p.slab]).unwrap();
                let mom: f64 = set
                    .weights(&s.spec)
                    .iter()
                    .zip(&p.density)
                    .map(|(&(u, w), h)| w * h * s.spec.modes[k][u])
                    .sum();
                let n = 200;
                let h = (p.end - p.start) / n as f64;
                let f = |i: usize| (-l * (t - p.start - i as f64 * h)).exp();
                let simpson: f64 = (0..=n)
                    .map(|i| {
                        f(i) * if i == 0 || i == n {
                            1.0
                        } else if i % 2 == 1 {
                            4.0
                        } else {
                            2.0
                        }
                    })
                    .sum::<f64>()
                    * h
                    / 3.0;
                v += simpson * mom;
            }
            v
        })
        .collect()
}

#[test]
fn distributed_one_mode() {
    let s = dirichlet_pi(60);
    let mask = vec![true; 60];
    let f = SpaceTimeMask::product(&s.domain, &mask, 1.0, 16).unwrap();
    let d0 = vec![1.0];
    let dc = distributed_control(&s.spec, &s.domain, &f, &d0, 0.5, 4, &opts(1)).unwrap();
    assert!(dc.terminal_deficit < 1e-12, "{}", dc.terminal_deficit);
    assert!((dc.time_measure - 1.0).abs() < 1e-12);
    let d = distributed_terminal(&s, &f, &dc, &d0);
    assert!(d[0].abs() < 1e-9, "{d:?}");
    // On the whole domain each piece is a multiple of the mode.
    for p in &dc.pieces {
        let e = &s.spec.modes[0];
        let r = p.density[p.density.len() / 2] / e[p.support[p.density.len() / 2]];
        for (u, h) in p.support.iter().zip(&p.density) {
            assert!((h - r * e[*u]).abs() <= 1e-9 * r.abs());
        }
    }
}

#[test]
fn distributed_on_half_interval() {
    let s = dirichlet_pi(100);
    let mask = box_mask(&s.domain, [0.0, 0.0], [0.5 * PI, 0.0]);
    let f = SpaceTimeMask::product(&s.domain, &mask, 1.0, 64).unwrap();
    let d0: Vec<f64> = gaussian_fields(12, 1, 9).remove(0);
    let dc = distributed_control(&s.spec, &s.domain, &f, &d0, 0.5, 8, &opts(12)).unwrap();
    assert!(dc.relative_deficit < 1e-3, "{}", dc.relative_deficit);
    let d = distributed_terminal(&s, &f, &dc, &d0);
    let n = d.iter().map(|x| x * x).sum::<f64>().sqrt();
    assert!(
        (n - dc.terminal_deficit).abs() <= 1e-7 * dc.initial_deficit,
        "{n} {}",
        dc.terminal_deficit
    );
    assert!(dc.sup_norm.is_finite());
    assert!(dc.time_measure >= dc.time_bound);
    for p in &dc.pieces {
        assert!(p
            .support
            .iter()
            .all(|&u| s.domain.node_coords(s.domain.unknown_nodes()[u])[0] <= 0.5 * PI + 1e-9));
    }
}

#[test]
fn distributed_needs_a_mask() {
    let s = dirichlet_pi(30);
    let f = SpaceTimeMask::new(&s.domain, 1.0, vec![vec![false; 30]; 8]).unwrap();
    let r = distributed_control(&s.spec, &s.domain, &f, &[1.0], 0.5, 4, &opts(1));
    assert!(matches!(r, Err(Error::InvalidArgument(_))));
}
