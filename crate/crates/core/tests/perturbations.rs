use std::f64::consts::{E, FRAC_1_SQRT_2};

use neckflow::barriers::{build_barrier_pair, sandwich_monitor, BarrierSpec, FlowHistory};
use neckflow::flow::{advance_to, FlowState};
use neckflow::geometry::{CylinderGraph, GridSpec};
use neckflow::metrics::ScheduleParams;
use neckflow::perturb::{
    apply_seed_perturbation, cutoff, difference_series, dumbbell_profile, dumbbell_verdict,
    jacobi_fit, near_degenerate_base, neck_location_bisection, run_escape_experiment,
    transform_state, DumbbellSpec, EscapeOptions, PinchVerdict, SpacetimeTransform,
};
use neckflow::spectral::{project, EigenIndex};

/// Composite Simpson rule on `[a, b]` with `n` (even) panels.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for k in 1..n {
        s += if k % 2 == 1 { 4.0 } else { 2.0 } * f(a + k as f64 * h);
    }
    s * h / 3.0
}

#[test]
fn seed_coefficient_matches_quadrature_oracle() {
    let grid = GridSpec::symmetric(12.0, 241, 1).unwrap();
    let r0 = 4.0;
    let a = 1e-3;
    let base = FlowState::rescaled(CylinderGraph::zeros(grid));
    let seeded = apply_seed_perturbation(&base, a, r0).unwrap();
    let got = project(&seeded.graph, (3, 0)).unwrap().get(EigenIndex::axial(1));

    let w = |y: f64| (-y * y / 4.0).exp();
    let num = simpson(|y| cutoff((y * y + 2.0).sqrt(), r0) * y * y * w(y), -30.0, 30.0, 60_000);
    let den = simpson(|y| y * y * w(y), -30.0, 30.0, 60_000);
    let tail = 1.0 - num / den;
    assert!(tail > 1e-3, "cutoff should bite inside the strip: tail {tail}");
    let expected = a * (1.0 - tail);
    assert!((got / expected - 1.0).abs() < 1e-4, "{got} vs {expected}");
}

#[test]
fn seed_grows_at_the_translation_rate() {
    let grid = GridSpec::symmetric(12.0, 241, 1).unwrap();
    let a = 1e-4;
    let base = FlowState::rescaled(CylinderGraph::zeros(grid));
    let seeded = apply_seed_perturbation(&base, a, 16.0).unwrap();
    let c0 = project(&seeded.graph, (3, 0)).unwrap().get(EigenIndex::axial(1));
    let later = advance_to(&seeded, 2.0).unwrap();
    let c2 = project(&later.graph, (3, 0)).unwrap().get(EigenIndex::axial(1));
    assert!((c2 / c0 / E - 1.0).abs() < 0.02, "ratio {}", c2 / c0);
}

fn small_neck(grid: GridSpec) -> FlowState {
    FlowState::rescaled(CylinderGraph::from_fn(grid, |y, _| {
        -0.02 * (-(y * y) / 4.0).exp()
    }))
}

#[test]
fn time_shifts_compose() {
    let grid = GridSpec::symmetric(8.0, 161, 1).unwrap();
    let m0 = small_neck(grid);
    let tau = 1.0;
    for (s1, s2) in [(1e-3, 2e-3), (3e-3, 1e-3), (2e-3, 2e-3)] {
        let second = SpacetimeTransform::time_shift(s2);
        let mid = second.source_time(tau);
        let n1 = transform_state(&m0, &SpacetimeTransform::time_shift(s1), mid).unwrap().state;
        assert!((n1.time - mid).abs() < 1e-12);
        let composed = transform_state(&n1, &second, tau).unwrap().state.graph;
        let direct = transform_state(&m0, &SpacetimeTransform::time_shift(s1 + s2), tau)
            .unwrap()
            .state
            .graph;
        let h2 = grid.h_y() * grid.h_y();
        for i in 10..grid.n_y - 10 {
            let (c, d) = (composed.v(i, 0), direct.v(i, 0));
            assert!((c - d).abs() < 0.1 * h2, "y = {}: {c} vs {d}", grid.y(i));
        }
    }
}

/// Per-unit Jacobi coefficients of the cylinder flow transformed by `phi(gamma)`.
fn fit_per_unit(phi: impl Fn(f64) -> SpacetimeTransform, gamma: f64, unit: f64) -> [f64; 5] {
    let grid = GridSpec::symmetric(6.0, 121, 16).unwrap();
    let mut cur = FlowState::rescaled(CylinderGraph::zeros(grid));
    let mut base = Vec::new();
    let mut other = Vec::new();
    for k in 0..=8 {
        let tau = 0.25 * k as f64;
        cur = advance_to(&cur, tau).unwrap();
        base.push((tau, cur.graph.clone()));
        other.push((tau, transform_state(&cur, &phi(gamma), tau).unwrap().state.graph));
    }
    jacobi_fit(&difference_series(&base, &other, unit).unwrap())
        .unwrap()
        .coefficients()
}

#[test]
fn jacobi_coefficients_are_linear_in_magnitude() {
    let gammas = [1e-4, 1e-3, 1e-2];
    let translation = |g: f64| SpacetimeTransform { x0: [0.0, g, 0.0], ..Default::default() };
    let rotation = |g: f64| SpacetimeTransform { d2: g, ..Default::default() };
    let shift = |g: f64| SpacetimeTransform::time_shift(g * g);
    for (name, slot, target) in [("translation", 1, FRAC_1_SQRT_2), ("rotation", 3, FRAC_1_SQRT_2)] {
        for g in gammas {
            let c = if name == "translation" {
                fit_per_unit(translation, g, g)
            } else {
                fit_per_unit(rotation, g, g)
            };
            assert!((c[slot] / target - 1.0).abs() < 0.02, "{name} at {g}: {}", c[slot]);
        }
    }
    for g in gammas {
        let c = fit_per_unit(shift, g, g * g);
        assert!((c[0] / -FRAC_1_SQRT_2 - 1.0).abs() < 0.02, "shift at {g}: {}", c[0]);
    }
}

#[test]
fn escape_reports_are_consistent() {
    let grid = GridSpec::symmetric(12.0, 241, 1).unwrap();
    let base = near_degenerate_base(grid, 2e-4);
    let params = ScheduleParams::default();
    let opts = EscapeOptions::default();
    let big = run_escape_experiment(&base, 1e-3, &params, &opts).unwrap();
    let half = run_escape_experiment(&base, 5e-4, &params, &opts).unwrap();
    for r in [&big, &half] {
        assert!(r.t_eps <= r.t_eps_bound + 1.0, "T_eps {} bound {}", r.t_eps, r.t_eps_bound);
        assert!(
            (params.lambda1..=0.55).contains(&r.growth_exponent),
            "exponent {}",
            r.growth_exponent
        );
        let first = r.conditions_log.iter().position(|row| row.growth).unwrap();
        assert!(r.conditions_log[first..].iter().all(|row| row.growth));
        assert!(r.escape_verdict);
    }
    assert!(half.t_eps >= big.t_eps);
    let ratio = half.excluded_interval / big.excluded_interval;
    assert!((ratio - 2f64.powf(-0.75)).abs() < 1e-9, "{ratio}");
}

#[test]
fn dumbbell_threshold_separates_center_and_off_center_pinches() {
    let family = |neck: f64| dumbbell_verdict(&DumbbellSpec { neck, ..Default::default() });
    let b = neck_location_bisection(family, 0.2, 1.2, 0.02).unwrap();
    assert_eq!(b.lower.1, PinchVerdict::CenterPinch);
    assert_eq!(b.upper.1, PinchVerdict::OffCenterPinch);
    assert!(b.upper.0 - b.lower.0 <= 0.02);
    assert!(b.a_star > 0.2 && b.a_star < 1.2);
}

fn dumbbell_history() -> FlowHistory {
    let g = dumbbell_profile(&DumbbellSpec { neck: 0.6, ..Default::default() }).unwrap();
    FlowHistory::record(
        &FlowState::unrescaled(g, 0.0),
        &FlowHistory::uniform_times(0.0, 0.0025, 41),
    )
    .unwrap()
}

#[test]
fn barrier_gap_is_linear_in_eps() {
    let history = dumbbell_history();
    let spec = BarrierSpec { t_start: 0.02, t_end: 0.05, ..Default::default() };
    let gaps: Vec<f64> = [1e-4, 1e-3, 1e-2]
        .iter()
        .map(|&eps| {
            let p = build_barrier_pair(&history, eps, &spec).unwrap();
            assert!((p.times[0] - 0.02).abs() < 1e-12);
            let (lo, hi) = (&p.lower[0], &p.upper[0]);
            let n = lo.grid.n_y;
            let mean: f64 = (0..n).map(|i| hi.v(i, 0) - lo.v(i, 0)).sum::<f64>() / n as f64;
            mean / eps
        })
        .collect();
    for g in &gaps[1..] {
        assert!((g / gaps[0] - 1.0).abs() < 0.05, "{gaps:?}");
    }
}

#[test]
fn large_kick_leaves_the_sandwich() {
    let history = dumbbell_history();
    let spec = BarrierSpec { t_start: 0.02, t_end: 0.05, ..Default::default() };
    let p = build_barrier_pair(&history, 1e-3, &spec).unwrap();
    let start = p.base[0].map(|b| b + 10.0 * p.eps);
    let test = FlowHistory::record(&FlowState::unrescaled(start, p.times[0]), &p.times).unwrap();
    let hit = sandwich_monitor(&test, &p).unwrap();
    assert_eq!(hit.map(|h| h.0), Some(p.times[0]));

    let inside = FlowHistory::record(&FlowState::unrescaled(p.base[0].clone(), p.times[0]), &p.times).unwrap();
    assert_eq!(sandwich_monitor(&inside, &p).unwrap(), None);
}
