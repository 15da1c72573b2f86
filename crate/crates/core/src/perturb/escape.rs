//! Co-evolution of a degenerate base flow and a seeded copy of it.

use serde::{Deserialize, Serialize};

use super::seed::apply_seed_perturbation;
use crate::classify::ls_slope;
use crate::error::{Error, Result};
use crate::flow::{step, suggested_dt, FlowState};
use crate::geometry::{c2_size, CylinderGraph, FrameKind, GridSpec};
use crate::metrics::{distance_to_cylinder, gaussian_norm, radius_schedule, ScheduleParams};
use crate::spectral::{eigenfunction_eval, EigenIndex};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EscapeOptions {
    pub sample_interval: f64,
    /// Graphicality bound on the difference of the two flows.
    pub delta1: f64,
    /// `R1`; translations are taken in the window `r1 = R1^{-2}`.
    pub big_r1: f64,
    /// Number of axial offsets checked for escape.
    pub offsets: usize,
    /// Give up if the upper bound has not failed by this time.
    pub t_limit: f64,
    /// Truncation cap of the distance integrand.
    pub cap: f64,
}

impl Default for EscapeOptions {
    fn default() -> Self {
        EscapeOptions {
            sample_interval: 0.25,
            delta1: 0.5,
            big_r1: 8.0,
            offsets: 5,
            t_limit: 30.0,
            cap: 1.0,
        }
    }
}

impl EscapeOptions {
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let steps = 1.0 / self.sample_interval;
        if !(self.sample_interval > 0.0 && (steps - steps.round()).abs() < 1e-9) {
            out.push(format!(
                "escape.sample_interval = {} must divide 1",
                self.sample_interval
            ));
        }
        if !(self.delta1 > 0.0) {
            out.push(format!("escape.delta1 = {} must be positive", self.delta1));
        }
        if !(self.big_r1 > 1.0) {
            out.push(format!("escape.big_r1 = {} must exceed 1", self.big_r1));
        }
        if !(self.t_limit >= 1.0) {
            out.push(format!("escape.t_limit = {} must be at least 1", self.t_limit));
        }
        if !(self.cap > 0.0) {
            out.push(format!("escape.cap = {} must be positive", self.cap));
        }
        out
    }
}

/// Conditions (i)-(iv) at an integer time `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionRow {
    pub t: f64,
    pub d: f64,
    pub graphical: bool,
    pub growth: bool,
    pub lower: bool,
    pub upper: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CeilingCheck {
    pub tau: f64,
    pub max_abs: f64,
    pub bound: f64,
    pub holds: bool,
}

/// Distance growth of the seeded flow seen from an axial offset `y0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TranslatedEscape {
    pub y0: f64,
    pub d_start: f64,
    pub d_end: f64,
    pub ratio: f64,
    pub escapes: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EscapeReport {
    pub a: f64,
    /// `D(0) / c1`.
    pub eps: f64,
    pub conditions_log: Vec<ConditionRow>,
    pub t_eps: f64,
    /// `ln(c1^{-1} eta0^{1/2} / eps) / (1 - kappa4 - kappa1)`.
    pub t_eps_bound: f64,
    pub crossing_bound_check: bool,
    /// Half-width `eps^{3/4}` of the axial interval excluded from the
    /// singular set.
    pub excluded_interval: f64,
    /// Least-squares slope of `ln D` over `[0, max(t_eps, 1)]`.
    pub growth_exponent: f64,
    pub ceiling_checks: Vec<CeilingCheck>,
    pub escapes: Vec<TranslatedEscape>,
    pub escape_verdict: bool,
    /// `(T, D(T))` at every sample.
    pub d_series: Vec<(f64, f64)>,
}

/// Cylinder plus `eta (y^3 - 6y)`, the decaying mode with eigenvalue `-1/2`.
pub fn near_degenerate_base(grid: GridSpec, eta: f64) -> FlowState {
    let idx = EigenIndex::axial(3);
    FlowState::rescaled(CylinderGraph::from_fn(grid, |y, th| {
        eta * eigenfunction_eval(idx, y, th)
    }))
}

fn co_step(base: &FlowState, pert: &FlowState, dt: f64) -> Result<(FlowState, FlowState)> {
    let mut dt = dt;
    let mut last = None;
    for _ in 0..=40 {
        match step(base, dt).and_then(|b| Ok((b, step(pert, dt)?))) {
            Ok(pair) => return Ok(pair),
            Err(e @ (Error::StepRejected { .. } | Error::NonGraphical(_))) => {
                last = Some(e);
                dt *= 0.5;
            }
            Err(e) => return Err(e),
        }
    }
    Err(last.expect("at least one attempt"))
}

struct Sample {
    t: f64,
    d: f64,
    graphical: bool,
    max_abs: f64,
    pert: CylinderGraph,
}

fn measure(
    base: &FlowState,
    pert: &FlowState,
    t: f64,
    params: &ScheduleParams,
    opts: &EscapeOptions,
) -> Result<Sample> {
    let r = radius_schedule(t, params.kappa_i(2), params.r0)?;
    let diff = pert.graph.zip_with(&base.graph, |p, b| p - b)?;
    let d = gaussian_norm(&base.graph, &diff.values, r)?;
    let sizes = c2_size(&diff, base.params.boundary);
    let grid = base.graph.grid;
    let (mut graphical, mut max_abs) = (true, 0.0f64);
    for i in 0..grid.n_y {
        for j in 0..grid.n_theta {
            if base.graph.point_norm(i, j) <= r {
                let k = grid.idx(i, j);
                graphical &= sizes[k] < opts.delta1;
                max_abs = max_abs.max(diff.values[k].abs());
            }
        }
    }
    Ok(Sample {
        t,
        d,
        graphical,
        max_abs,
        pert: pert.graph.clone(),
    })
}

/// Seeds `a chi y` on top of `base` and follows both flows until the
/// perturbation overtakes the decay of the base.
pub fn run_escape_experiment(
    base: &FlowState,
    a: f64,
    params: &ScheduleParams,
    opts: &EscapeOptions,
) -> Result<EscapeReport> {
    params.validate()?;
    let v = opts.violations();
    if !v.is_empty() {
        return Err(Error::Validation(v));
    }
    if base.frame.kind != FrameKind::Rescaled {
        return Err(Error::InvalidInput("escape experiment needs a rescaled base".into()));
    }
    let (k1, k2, k4) = (params.kappa_i(1), params.kappa_i(2), params.kappa_i(4));
    let fail = |condition: &str, at: f64| Error::HypothesisFailed {
        condition: condition.into(),
        at,
    };
    let base_distance = distance_to_cylinder(&base.graph, [0.0; 3], opts.cap);
    if base_distance > params.eta0 {
        return Err(fail("degenerate base", 0.0));
    }

    let tau0 = base.time;
    let mut b = base.clone();
    let mut p = apply_seed_perturbation(base, a, params.r0)?;
    let per_unit = (1.0 / opts.sample_interval).round() as usize;
    let mut samples = vec![measure(&b, &p, 0.0, params, opts)?];
    let d0 = samples[0].d;
    if !(d0 > 0.0) {
        return Err(fail("iii", 0.0));
    }
    let eps = d0 / params.c1;

    let mut rows: Vec<ConditionRow> = Vec::new();
    let mut graphical_so_far = true;
    let mut t_eps = None;
    let mut unit = 0usize;
    while t_eps.is_none() {
        // advance to T = unit + 1
        for k in 1..=per_unit {
            let target = tau0 + unit as f64 + k as f64 * opts.sample_interval;
            while b.time < target - 1e-12 {
                let dt = suggested_dt(&b).min(suggested_dt(&p)).min(target - b.time);
                let at = b.time;
                let (nb, np) = co_step(&b, &p, dt).map_err(|e| e.at_time(at))?;
                b = nb;
                p = np;
            }
            b.time = target;
            p.time = target;
            samples.push(measure(&b, &p, target - tau0, params, opts)?);
        }
        let t = unit as f64;
        let now = &samples[unit * per_unit];
        let next = &samples[(unit + 1) * per_unit];
        graphical_so_far &= samples[unit * per_unit..].iter().all(|s| s.graphical);
        if unit == 0 && !(next.d >= (0.5 - k4).exp() * now.d) {
            return Err(fail("growth", 0.0));
        }
        let row = ConditionRow {
            t,
            d: now.d,
            graphical: graphical_so_far,
            growth: next.d >= params.lambda15().exp() * now.d,
            lower: now.d >= (1.0 - 1e-12) * params.c1 * eps * ((0.5 - k4) * t).exp(),
            upper: now.d <= params.eta0.sqrt() * (-(0.5 - k1) * t).exp(),
        };
        rows.push(row);
        if !row.graphical {
            return Err(Error::LostGraphicality(format!("difference not graphical by T = {}", t + 1.0)));
        }
        if !row.growth {
            return Err(fail("ii", t));
        }
        if !row.lower {
            return Err(fail("iii", t));
        }
        if !row.upper {
            if unit == 0 {
                return Err(fail("iv", 0.0));
            }
            t_eps = Some(t - 1.0);
        } else if t + 1.0 > opts.t_limit {
            return Err(fail("iv", t));
        }
        unit += 1;
    }
    let t_eps = t_eps.expect("set by the loop");

    let fit: Vec<&Sample> = samples.iter().filter(|s| s.t <= t_eps.max(1.0) + 1e-9).collect();
    let xs: Vec<f64> = fit.iter().map(|s| s.t).collect();
    let ys: Vec<f64> = fit.iter().map(|s| s.d.ln()).collect();
    let growth_exponent = ls_slope(&xs, &ys);
    let t_eps_bound = (params.eta0.sqrt() / (params.c1 * eps)).ln() / (1.0 - k4 - k1);

    let ceiling_checks = samples
        .iter()
        .filter_map(|s| {
            let r = radius_schedule(s.t, k2, params.r0).ok()?;
            let bound = params.r0 * r * eps * s.t.exp();
            (bound < 0.01).then_some(CeilingCheck {
                tau: s.t + tau0,
                max_abs: s.max_abs,
                bound,
                holds: s.max_abs <= bound,
            })
        })
        .collect();

    let r1 = opts.big_r1.powi(-2);
    let start = &samples[(t_eps as usize + 1) * per_unit];
    let end = &samples[(t_eps as usize + 2) * per_unit];
    let n = opts.offsets.max(1);
    let escapes: Vec<TranslatedEscape> = (0..n)
        .map(|k| {
            let f = if n == 1 { 0.0 } else { -0.9 + 1.8 * k as f64 / (n - 1) as f64 };
            let y0 = f * r1 * (-0.5 * (t_eps + 2.0)).exp();
            let d_at = |s: &Sample| {
                let shift = (0.5 * (s.t + tau0)).exp() * y0;
                distance_to_cylinder(&s.pert, [-shift, 0.0, 0.0], opts.cap)
            };
            let (d_start, d_end) = (d_at(start), d_at(end));
            let ratio = d_end / d_start;
            TranslatedEscape {
                y0,
                d_start,
                d_end,
                ratio,
                escapes: ratio >= params.lambda1.exp(),
            }
        })
        .collect();
    let escape_verdict = escapes.iter().all(|e| e.escapes);

    Ok(EscapeReport {
        a,
        eps,
        conditions_log: rows,
        t_eps,
        t_eps_bound,
        crossing_bound_check: t_eps <= t_eps_bound + 1.0,
        excluded_interval: eps.powf(0.75),
        growth_exponent,
        ceiling_checks,
        escapes,
        escape_verdict,
        d_series: samples.iter().map(|s| (s.t, s.d)).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_seed_fails_the_lower_bound() {
        let base = near_degenerate_base(GridSpec::symmetric(12.0, 121, 1).unwrap(), 1e-4);
        let r = run_escape_experiment(&base, 0.0, &ScheduleParams::default(), &EscapeOptions::default());
        match r {
            Err(Error::HypothesisFailed { condition, at }) => {
                assert_eq!(condition, "iii");
                assert_eq!(at, 0.0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn far_base_is_refused() {
        let base = near_degenerate_base(GridSpec::symmetric(12.0, 121, 1).unwrap(), 1e-2);
        let r = run_escape_experiment(&base, 1e-3, &ScheduleParams::default(), &EscapeOptions::default());
        assert!(matches!(r, Err(Error::HypothesisFailed { .. })));
    }
}
