//! Time steppers for mean curvature flow of radial graphs and for the
//! linearized drift heat equation, plus the `evolve` run loop.
//!
//! With `W = sqrt(r^2 + r_t^2 + r^2 r_y^2)` the radial speed of the graph is
//! `r_t = -(W/r) H` for the flow itself and
//! `r_tau = -(W/r) H + (r - y r_y)/2` after Huisken rescaling.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    change_frame, curvature_from_derivs, derivs, graphical_radius, Boundary, CylinderGraph,
    FrameKind, FrameTag, GridSpec, SQRT2,
};
use crate::metrics::{self, DistanceTrace, StopReason, TraceRow};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[default]
    Rk4,
    /// Semi-implicit Euler, implicit in the axial second derivative with
    /// frozen coefficients.
    Imex,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StepParams {
    /// Upper bound on the step used by `evolve`.
    pub dt_init: f64,
    /// Fraction of the stability limit actually used.
    pub dt_safety: f64,
    pub scheme: Scheme,
    pub boundary: Boundary,
    /// Radii above this leave the chart.
    pub radius_ceiling: f64,
}

impl Default for StepParams {
    fn default() -> Self {
        StepParams {
            dt_init: 1e-2,
            dt_safety: 0.25,
            scheme: Scheme::Rk4,
            boundary: Boundary::Quadratic,
            radius_ceiling: 1e3,
        }
    }
}

impl StepParams {
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.dt_init > 0.0) {
            out.push(format!("dt_init = {} must be positive", self.dt_init));
        }
        if !(self.dt_safety > 0.0 && self.dt_safety <= 0.25) {
            out.push(format!("dt_safety = {} must lie in (0, 0.25]", self.dt_safety));
        }
        if !(self.radius_ceiling > SQRT2) {
            out.push(format!("radius_ceiling = {} is below sqrt 2", self.radius_ceiling));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowState {
    pub graph: CylinderGraph,
    pub frame: FrameTag,
    /// `tau` in the rescaled frame, `t` otherwise.
    pub time: f64,
    pub params: StepParams,
}

impl FlowState {
    pub fn new(graph: CylinderGraph, frame: FrameTag, time: f64, params: StepParams) -> Self {
        FlowState {
            graph,
            frame,
            time,
            params,
        }
    }

    pub fn rescaled(graph: CylinderGraph) -> Self {
        Self::new(graph, FrameTag::rescaled(), 0.0, StepParams::default())
    }

    pub fn unrescaled(graph: CylinderGraph, t: f64) -> Self {
        Self::new(graph, FrameTag::unrescaled(), t, StepParams::default())
    }

    pub fn with_params(mut self, params: StepParams) -> Self {
        self.params = params;
        self
    }

    /// `(tau, t)` for this slice; the missing one is derived from the frame center.
    pub fn tau_and_t(&self) -> (f64, f64) {
        let big_t = self.frame.center.t;
        match self.frame.kind {
            FrameKind::Rescaled => (self.time, big_t - (-self.time).exp()),
            FrameKind::Unrescaled => {
                let gap = big_t - self.time;
                let tau = if gap > 0.0 { -gap.ln() } else { f64::NAN };
                (tau, self.time)
            }
        }
    }
}

/// Radial velocity of the graph at every node.
pub fn velocity(
    grid: &GridSpec,
    radii: &[f64],
    kind: FrameKind,
    boundary: Boundary,
) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(grid.len());
    for i in 0..grid.n_y {
        let y = grid.y(i);
        for j in 0..grid.n_theta {
            let r = radii[grid.idx(i, j)];
            if !(r > 0.0) {
                return Err(Error::NonGraphical(format!("radius {r} at y = {y}")));
            }
            let d = derivs(grid, radii, i, j, boundary);
            let q = curvature_from_derivs(y, grid.theta(j), &d);
            let mut s = -(q.area_element / r) * q.mean_curvature;
            if kind == FrameKind::Rescaled {
                s += 0.5 * (r - y * d.u_y);
            }
            if !s.is_finite() {
                return Err(Error::StepRejected {
                    time: f64::NAN,
                    reason: format!("non-finite velocity at y = {y}"),
                });
            }
            out.push(s);
        }
    }
    Ok(out)
}

/// Largest coefficients of the axial and angular second derivatives.
fn diffusion_bounds(grid: &GridSpec, radii: &[f64], boundary: Boundary) -> (f64, f64, f64) {
    let (mut dy, mut dt, mut rmin) = (0.0f64, 0.0f64, f64::INFINITY);
    for i in 0..grid.n_y {
        for j in 0..grid.n_theta {
            let d = derivs(grid, radii, i, j, boundary);
            let r = d.u;
            let e = 1.0 + d.u_y * d.u_y;
            let g = r * r + d.u_t * d.u_t;
            let f = d.u_y * d.u_t;
            let det = e * g - f * f;
            dy = dy.max(g / det);
            dt = dt.max(e / det);
            rmin = rmin.min(r);
        }
    }
    (dy, dt, rmin)
}

/// Step size at which the explicit scheme reaches its stability boundary
/// (before the safety factor).
pub fn stability_limit(state: &FlowState) -> f64 {
    let grid = &state.graph.grid;
    let radii = state.graph.radii();
    let (dy, dtheta, rmin) = diffusion_bounds(grid, &radii, state.params.boundary);
    let hy = grid.h_y();
    let mut rate = 1.0 / (rmin * rmin);
    if state.params.scheme == Scheme::Rk4 {
        rate += dy / (hy * hy);
    }
    if grid.n_theta > 1 {
        let ht = grid.h_theta();
        rate += dtheta / (ht * ht);
    }
    if state.frame.kind == FrameKind::Rescaled {
        let ymax = grid.y_min.abs().max(grid.y_max.abs());
        rate += ymax / (2.0 * hy) + 0.5;
    }
    1.0 / rate
}

/// Step size `evolve` would use next.
pub fn suggested_dt(state: &FlowState) -> f64 {
    (state.params.dt_safety * stability_limit(state)).min(state.params.dt_init)
}

fn axpy(u: &[f64], k: &[f64], a: f64) -> Vec<f64> {
    u.iter().zip(k).map(|(x, y)| x + a * y).collect()
}

fn rk4(u: &[f64], dt: f64, f: &dyn Fn(&[f64]) -> Result<Vec<f64>>) -> Result<Vec<f64>> {
    let k1 = f(u)?;
    let k2 = f(&axpy(u, &k1, 0.5 * dt))?;
    let k3 = f(&axpy(u, &k2, 0.5 * dt))?;
    let k4 = f(&axpy(u, &k3, dt))?;
    Ok(u
        .iter()
        .enumerate()
        .map(|(i, x)| x + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

/// Solves a tridiagonal system in place (Thomas algorithm); `sub[0]` and
/// `sup[n-1]` are ignored.
fn solve_tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &mut [f64]) {
    let n = diag.len();
    let mut c = vec![0.0; n];
    c[0] = sup[0] / diag[0];
    rhs[0] /= diag[0];
    for i in 1..n {
        let m = diag[i] - sub[i] * c[i - 1];
        c[i] = sup[i] / m;
        rhs[i] = (rhs[i] - sub[i] * rhs[i - 1]) / m;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= c[i] * rhs[i + 1];
    }
}

fn imex_step(
    grid: &GridSpec,
    radii: &[f64],
    dt: f64,
    kind: FrameKind,
    boundary: Boundary,
) -> Result<Vec<f64>> {
    let vel = velocity(grid, radii, kind, boundary)?;
    let n_y = grid.n_y;
    let hy2 = grid.h_y() * grid.h_y();
    let mut out = radii.to_vec();
    let m = n_y - 2;
    let (mut sub, mut diag, mut sup, mut rhs) =
        (vec![0.0; m], vec![0.0; m], vec![0.0; m], vec![0.0; m]);
    for j in 0..grid.n_theta {
        for k in 0..m {
            let i = k + 1;
            let d = derivs(grid, radii, i, j, boundary);
            let e = 1.0 + d.u_y * d.u_y;
            let g = d.u * d.u + d.u_t * d.u_t;
            let f = d.u_y * d.u_t;
            let coef = g / (e * g - f * f);
            let a = dt * coef / hy2;
            sub[k] = -a;
            sup[k] = -a;
            diag[k] = 1.0 + 2.0 * a;
            rhs[k] = radii[grid.idx(i, j)] + dt * (vel[grid.idx(i, j)] - coef * d.u_yy);
            // boundary rows enter through an explicit predictor
            if k == 0 {
                let b = grid.idx(0, j);
                rhs[k] += a * (radii[b] + dt * vel[b]);
            }
            if k + 1 == m {
                let b = grid.idx(n_y - 1, j);
                rhs[k] += a * (radii[b] + dt * vel[b]);
            }
        }
        solve_tridiagonal(&sub, &diag, &sup, &mut rhs);
        for k in 0..m {
            out[grid.idx(k + 1, j)] = rhs[k];
        }
        let ext = |a: f64, b: f64, c: f64| match boundary {
            Boundary::Quadratic => 3.0 * a - 3.0 * b + c,
            Boundary::Linear => 2.0 * a - b,
        };
        out[grid.idx(0, j)] = ext(out[grid.idx(1, j)], out[grid.idx(2, j)], out[grid.idx(3, j)]);
        out[grid.idx(n_y - 1, j)] = ext(
            out[grid.idx(n_y - 2, j)],
            out[grid.idx(n_y - 3, j)],
            out[grid.idx(n_y - 4, j)],
        );
    }
    Ok(out)
}

fn step_any(state: &FlowState, dt: f64, kind: FrameKind) -> Result<FlowState> {
    if state.frame.kind != kind {
        return Err(Error::InvalidInput(format!(
            "stepper for {kind:?} frame called on a {:?} state",
            state.frame.kind
        )));
    }
    let limit = stability_limit(state);
    if !(dt > 0.0) || dt > limit {
        return Err(Error::StepRejected {
            time: state.time,
            reason: format!("dt = {dt} outside (0, {limit}]"),
        });
    }
    let grid = state.graph.grid;
    let boundary = state.params.boundary;
    let radii = state.graph.radii();
    let next = match state.params.scheme {
        Scheme::Rk4 => rk4(&radii, dt, &|u| velocity(&grid, u, kind, boundary)),
        Scheme::Imex => imex_step(&grid, &radii, dt, kind, boundary),
    }
    .map_err(|e| match e {
        Error::StepRejected { reason, .. } => Error::StepRejected {
            time: state.time,
            reason,
        },
        other => other,
    })?;
    let mut rmin = f64::INFINITY;
    let mut rmax: f64 = 0.0;
    for r in &next {
        if !r.is_finite() {
            return Err(Error::StepRejected {
                time: state.time,
                reason: "non-finite radius".into(),
            });
        }
        rmin = rmin.min(*r);
        rmax = rmax.max(*r);
    }
    if !(rmin > 0.0) {
        return Err(Error::NonGraphical(format!("radius {rmin} after step")));
    }
    if rmax > state.params.radius_ceiling {
        return Err(Error::NonGraphical(format!(
            "radius {rmax} beyond chart bound {}",
            state.params.radius_ceiling
        )));
    }
    let mut out = state.clone();
    out.graph.values = next.into_iter().map(|r| r - SQRT2).collect();
    out.time = state.time + dt;
    Ok(out)
}

/// One step of rescaled mean curvature flow.
pub fn step_rescaled(state: &FlowState, dt: f64) -> Result<FlowState> {
    step_any(state, dt, FrameKind::Rescaled)
}

/// One step of mean curvature flow.
pub fn step_unrescaled(state: &FlowState, dt: f64) -> Result<FlowState> {
    step_any(state, dt, FrameKind::Unrescaled)
}

/// Steps in whichever frame the state is in.
pub fn step(state: &FlowState, dt: f64) -> Result<FlowState> {
    step_any(state, dt, state.frame.kind)
}

/// `L v = v_yy + v_tt / 2 - (y/2) v_y + v` by central differences.
pub fn apply_linear(v: &CylinderGraph, boundary: Boundary) -> Vec<f64> {
    linear_rhs(&v.grid, &v.values, boundary)
}

fn linear_rhs(grid: &GridSpec, u: &[f64], boundary: Boundary) -> Vec<f64> {
    let mut out = Vec::with_capacity(grid.len());
    for i in 0..grid.n_y {
        let y = grid.y(i);
        for j in 0..grid.n_theta {
            let d = derivs(grid, u, i, j, boundary);
            out.push(d.u_yy + 0.5 * d.u_tt - 0.5 * y * d.u_y + d.u);
        }
    }
    out
}

/// Stability limit of RK4 for the linearized equation.
pub fn linear_stability_limit(grid: &GridSpec) -> f64 {
    let hy = grid.h_y();
    let mut rate = 1.0 / (hy * hy) + 1.0;
    if grid.n_theta > 1 {
        rate += 0.5 / (grid.h_theta() * grid.h_theta());
    }
    rate += grid.y_min.abs().max(grid.y_max.abs()) / (2.0 * hy);
    1.0 / rate
}

/// One RK4 step of `v_tau = L v`.
pub fn step_linearized(v: &CylinderGraph, dt: f64, boundary: Boundary) -> Result<CylinderGraph> {
    let limit = linear_stability_limit(&v.grid);
    if !(dt > 0.0) || dt > limit {
        return Err(Error::StepRejected {
            time: f64::NAN,
            reason: format!("dt = {dt} outside (0, {limit}]"),
        });
    }
    let grid = v.grid;
    let next = rk4(&v.values, dt, &|u| Ok(linear_rhs(&grid, u, boundary)))?;
    if next.iter().any(|x| !x.is_finite()) {
        return Err(Error::StepRejected {
            time: f64::NAN,
            reason: "non-finite value".into(),
        });
    }
    Ok(CylinderGraph { grid, values: next })
}

/// Linearized evolution over `duration` with equal steps of at most
/// `safety` times the stability limit.
pub fn evolve_linearized(
    v: &CylinderGraph,
    duration: f64,
    safety: f64,
    boundary: Boundary,
) -> Result<CylinderGraph> {
    if duration <= 0.0 {
        return Ok(v.clone());
    }
    let dt_max = safety * linear_stability_limit(&v.grid);
    let n = (duration / dt_max).ceil().max(1.0) as usize;
    let dt = duration / n as f64;
    let mut cur = v.clone();
    for _ in 0..n {
        cur = step_linearized(&cur, dt, boundary)?;
    }
    Ok(cur)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphicalityStop {
    pub delta: f64,
    /// Stop once the certified radius drops below this.
    pub radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StopCondition {
    /// Final value of the frame's time variable.
    pub tau_max: Option<f64>,
    /// Neck-pinch detector on the minimum radius.
    pub min_radius_floor: Option<f64>,
    pub graphicality: Option<GraphicalityStop>,
    pub max_steps: Option<usize>,
    /// Stop once the minimum radius exceeds `sqrt 2` by this much.
    pub expansion_ceiling: Option<f64>,
}

impl StopCondition {
    pub fn tau_max(tau: f64) -> Self {
        StopCondition {
            tau_max: Some(tau),
            min_radius_floor: Some(1e-3 * SQRT2),
            ..Default::default()
        }
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.tau_max.is_none()
            && self.min_radius_floor.is_none()
            && self.graphicality.is_none()
            && self.max_steps.is_none()
            && self.expansion_ceiling.is_none()
        {
            out.push("stop: no condition set".into());
        }
        if let Some(f) = self.min_radius_floor {
            if !(f > 0.0) {
                out.push(format!("stop.min_radius_floor = {f} must be positive"));
            }
        }
        if let Some(g) = self.graphicality {
            if !(g.delta > 0.0) {
                out.push(format!("stop.graphicality.delta = {} must be positive", g.delta));
            }
        }
        out
    }
}

/// What gets recorded at each sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Sampling {
    /// Spacing of samples in the frame's time variable.
    pub interval: f64,
    pub kappa2: f64,
    pub r0: f64,
    /// Bound used for the graphical radius column.
    pub graph_delta: f64,
    /// Truncation cap of the distance integrand.
    pub cap: f64,
}

impl Default for Sampling {
    fn default() -> Self {
        Sampling {
            interval: 0.25,
            kappa2: 0.09,
            r0: 4.0,
            graph_delta: 0.1,
            cap: 1.0,
        }
    }
}

/// Read-only callback invoked at every sample.
pub trait Observer {
    fn observe(&mut self, state: &FlowState, row: &TraceRow);
}

/// Keeps every sampled state.
#[derive(Debug, Default)]
pub struct SnapshotRecorder {
    pub snapshots: Vec<(f64, CylinderGraph)>,
}

impl Observer for SnapshotRecorder {
    fn observe(&mut self, state: &FlowState, _row: &TraceRow) {
        self.snapshots.push((state.time, state.graph.clone()));
    }
}

/// Trace row for a state; quantities that need the rescaled slice are NaN
/// when it does not exist.
pub fn sample_row(state: &FlowState, sampling: &Sampling) -> TraceRow {
    let (tau, t) = state.tau_and_t();
    let rescaled = match state.frame.kind {
        FrameKind::Rescaled => Some(state.clone()),
        FrameKind::Unrescaled => {
            let target = FrameTag {
                kind: FrameKind::Rescaled,
                center: state.frame.center,
            };
            change_frame(state, target).ok()
        }
    };
    let r_of_tau = metrics::radius_schedule(tau, sampling.kappa2, sampling.r0).unwrap_or(f64::NAN);
    let (d_c, norm_br) = match &rescaled {
        Some(s) => (
            metrics::distance_to_cylinder(&s.graph, [0.0; 3], sampling.cap),
            metrics::graph_norm(&s.graph, r_of_tau).unwrap_or(f64::NAN),
        ),
        None => (f64::NAN, f64::NAN),
    };
    TraceRow {
        tau,
        t,
        d_c,
        norm_br,
        r_of_tau,
        freq_ratio: f64::NAN,
        min_radius: state.graph.min_radius(),
        graph_radius: graphical_radius(&state.graph, sampling.graph_delta).radius,
    }
}

/// Attempts a step, halving on rejection.
pub fn advance(state: &FlowState, dt: f64) -> Result<FlowState> {
    let mut dt = dt;
    let mut last = None;
    for _ in 0..=40 {
        match step(state, dt) {
            Ok(s) => return Ok(s),
            Err(e @ (Error::StepRejected { .. } | Error::NonGraphical(_))) => {
                last = Some(e);
                dt *= 0.5;
            }
            Err(e) => return Err(e),
        }
    }
    Err(last.expect("at least one attempt"))
}

/// Steps until the frame time reaches `target`.
pub fn advance_to(state: &FlowState, target: f64) -> Result<FlowState> {
    let mut cur = state.clone();
    while cur.time < target - 1e-13 {
        let dt = suggested_dt(&cur).min(target - cur.time);
        let at = cur.time;
        cur = advance(&cur, dt).map_err(|e| e.at_time(at))?;
    }
    cur.time = cur.time.max(target);
    Ok(cur)
}

/// Runs the flow until a stop condition fires.
pub fn evolve(
    state: FlowState,
    stop: &StopCondition,
    sampling: &Sampling,
    observers: &mut [&mut dyn Observer],
) -> Result<(DistanceTrace, FlowState)> {
    let v = stop.violations();
    if !v.is_empty() {
        return Err(Error::Validation(v));
    }
    let mut trace = DistanceTrace::new(sampling.kappa2, sampling.r0);
    if stop.max_steps == Some(0) {
        trace.stop_reason = Some(StopReason::MaxSteps);
        return Ok((trace, state));
    }
    let mut cur = state;
    let start = cur.time;
    let record = |s: &FlowState, trace: &mut DistanceTrace, obs: &mut [&mut dyn Observer]| {
        let row = sample_row(s, sampling);
        for o in obs.iter_mut() {
            o.observe(s, &row);
        }
        trace.rows.push(row);
    };
    record(&cur, &mut trace, observers);
    let mut next_sample = start + sampling.interval;
    let mut steps = 0usize;
    let reason = loop {
        let rmin = cur.graph.min_radius();
        if let Some(floor) = stop.min_radius_floor {
            if rmin < floor {
                break StopReason::MinRadius;
            }
        }
        if let Some(c) = stop.expansion_ceiling {
            if rmin > SQRT2 + c {
                break StopReason::Expanded;
            }
        }
        if let Some(tmax) = stop.tau_max {
            if cur.time >= tmax - 1e-12 {
                break StopReason::TauMax;
            }
        }
        if let Some(m) = stop.max_steps {
            if steps >= m {
                break StopReason::MaxSteps;
            }
        }
        let mut dt = suggested_dt(&cur);
        let mut hits_sample = false;
        if cur.time + dt >= next_sample - 1e-12 {
            dt = next_sample - cur.time;
            hits_sample = true;
        }
        if let Some(tmax) = stop.tau_max {
            if cur.time + dt > tmax {
                dt = tmax - cur.time;
                hits_sample = (tmax - next_sample).abs() < 1e-12;
            }
        }
        let at = cur.time;
        let next = advance(&cur, dt).map_err(|e| e.at_time(at))?;
        let exact = next.time - cur.time == dt;
        cur = next;
        steps += 1;
        if hits_sample && exact {
            cur.time = next_sample;
            record(&cur, &mut trace, observers);
            next_sample += sampling.interval;
            if let Some(gs) = stop.graphicality {
                if graphical_radius(&cur.graph, gs.delta).radius < gs.radius {
                    break StopReason::Graphicality;
                }
            }
        }
    };
    let last_time = trace.rows.last().map(|r| match cur.frame.kind {
        FrameKind::Rescaled => r.tau,
        FrameKind::Unrescaled => r.t,
    });
    if last_time != Some(cur.time) {
        record(&cur, &mut trace, observers);
    }
    trace.fill_frequency_ratios(0.25 * sampling.interval.min(1.0));
    trace.stop_reason = Some(reason);
    Ok((trace, cur))
}
