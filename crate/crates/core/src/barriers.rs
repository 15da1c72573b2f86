//! Time-shift barriers around an axisymmetric, mean-convex neck and a
//! monitor that checks whether another flow stays between them.
//!
//! Inside `|y| < y_inner` the barriers are the time-shifted slices
//! `r(t -+ eps)`. Outside they are `r +- eps (V + K (t - t_start))`, and in
//! the annulus `y_inner <= |y| <= y_outer` the smaller of the two offsets is
//! used.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{advance_to, velocity, FlowState, StepParams};
use crate::geometry::{curvature_quantities, CylinderGraph, FrameKind, GridSpec};
use crate::io::fmt17;

/// Snapshots of an unrescaled axisymmetric flow on a uniform time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowHistory {
    pub times: Vec<f64>,
    pub graphs: Vec<CylinderGraph>,
}

impl FlowHistory {
    /// Runs the flow from `state` and keeps a snapshot at every time in
    /// `times` (increasing, none before the state's time).
    pub fn record(state: &FlowState, times: &[f64]) -> Result<Self> {
        if state.frame.kind != FrameKind::Unrescaled {
            return Err(Error::InvalidInput("barriers need an unrescaled flow".into()));
        }
        let mut cur = state.clone();
        let mut graphs = Vec::with_capacity(times.len());
        for &t in times {
            if t < cur.time - 1e-12 {
                return Err(Error::InvalidTime(format!("snapshot time {t} precedes {}", cur.time)));
            }
            cur = advance_to(&cur, t)?;
            graphs.push(cur.graph.clone());
        }
        Ok(FlowHistory {
            times: times.to_vec(),
            graphs,
        })
    }

    pub fn uniform_times(start: f64, interval: f64, count: usize) -> Vec<f64> {
        (0..count).map(|k| start + k as f64 * interval).collect()
    }

    fn index_of(&self, t: f64) -> Option<usize> {
        self.times.iter().position(|&s| (s - t).abs() < 1e-9)
    }

    /// Radii at time `t` by cubic interpolation between snapshots.
    pub fn radii_at(&self, t: f64) -> Result<Vec<f64>> {
        let n = self.times.len();
        if n < 4 {
            return Err(Error::InvalidInput("history needs at least four snapshots".into()));
        }
        let (t0, t1) = (self.times[0], self.times[n - 1]);
        if t < t0 - 1e-12 || t > t1 + 1e-12 {
            return Err(Error::InvalidTime(format!("t = {t} outside [{t0}, {t1}]")));
        }
        if let Some(k) = self.index_of(t) {
            return Ok(self.graphs[k].radii());
        }
        let dt = (t1 - t0) / (n - 1) as f64;
        let s = (t - t0) / dt;
        let base = (s.floor() as isize - 1).clamp(0, n as isize - 4) as usize;
        let x = s - base as f64;
        let (a, b, c, d) = (x, x - 1.0, x - 2.0, x - 3.0);
        let w = [-b * c * d / 6.0, a * c * d / 2.0, -a * b * d / 2.0, a * b * c / 6.0];
        let mut out = vec![0.0; self.graphs[0].grid.len()];
        for (k, wk) in w.iter().enumerate() {
            for (o, r) in out.iter_mut().zip(self.graphs[base + k].radii()) {
                *o += wk * r;
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BarrierSpec {
    /// Half-length of the inner region `U1`.
    pub y_inner: f64,
    /// Half-length of `U2`.
    pub y_outer: f64,
    pub t_start: f64,
    pub t_end: f64,
    /// Slope of the outer offset; twice the measured minimum when absent.
    pub k: Option<f64>,
    /// Halve the window until the matching inequalities hold.
    pub shrink_window: bool,
}

impl Default for BarrierSpec {
    fn default() -> Self {
        BarrierSpec {
            y_inner: 1.0,
            y_outer: 2.5,
            t_start: 0.0,
            t_end: 0.05,
            k: None,
            shrink_window: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarrierPair {
    pub eps: f64,
    pub y_inner: f64,
    pub y_outer: f64,
    pub t_start: f64,
    pub c1: f64,
    pub k: f64,
    /// Smallest supersolution margin over outer nodes and times, divided by
    /// `eps K`.
    pub certificate_margin: f64,
    /// Transition profile `V` at the grid nodes.
    pub v_profile: Vec<f64>,
    pub times: Vec<f64>,
    pub base: Vec<CylinderGraph>,
    pub lower: Vec<CylinderGraph>,
    pub upper: Vec<CylinderGraph>,
    /// Slack allowed by the sandwich monitor.
    pub tolerance: f64,
}

fn smootherstep(s: f64) -> f64 {
    let s = s.clamp(0.0, 1.0);
    s * s * s * (s * (6.0 * s - 15.0) + 10.0)
}

/// `2 C1` at the inner edge down to `1/(2 C1)` at the outer edge.
fn transition(grid: &GridSpec, y_inner: f64, y_outer: f64, c1: f64) -> Vec<f64> {
    (0..grid.len())
        .map(|k| {
            let y = grid.y(k / grid.n_theta).abs();
            let s = (y - y_inner) / (y_outer - y_inner);
            2.0 * c1 + (0.5 / c1 - 2.0 * c1) * smootherstep(s)
        })
        .collect()
}

fn check_mean_convex(history: &FlowHistory, lo: f64, hi: f64, y_outer: f64) -> Result<()> {
    for (t, g) in history.times.iter().zip(&history.graphs) {
        if *t < lo - 1e-12 || *t > hi + 1e-12 {
            continue;
        }
        for i in 0..g.grid.n_y {
            if g.y(i).abs() >= y_outer {
                continue;
            }
            for j in 0..g.grid.n_theta {
                let h = curvature_quantities(g, i, j, Default::default())?.mean_curvature;
                if !(h > 0.0) {
                    return Err(Error::MeanConvexityFailed(format!(
                        "H = {h} at t = {t}, y = {}",
                        g.y(i)
                    )));
                }
            }
        }
    }
    Ok(())
}

struct Slice {
    r: Vec<f64>,
    u_up: Vec<f64>,
    u_down: Vec<f64>,
}

fn slices(history: &FlowHistory, times: &[f64], eps: f64) -> Result<Vec<Slice>> {
    times
        .iter()
        .map(|&t| {
            let r = history.radii_at(t)?;
            let rm = history.radii_at(t - eps)?;
            let rp = history.radii_at(t + eps)?;
            let u_up = rm.iter().zip(&r).map(|(a, b)| a - b).collect();
            let u_down = r.iter().zip(&rp).map(|(a, b)| a - b).collect();
            Ok(Slice { r, u_up, u_down })
        })
        .collect()
}

/// Smallest `min(upper margin, lower margin)` over nodes with
/// `|y| >= y_inner`, and the largest slope needed by the offset `eps V`.
fn supersolution(
    grid: &GridSpec,
    slices: &[Slice],
    times: &[f64],
    t_start: f64,
    eps: f64,
    vprof: &[f64],
    k: f64,
    y_inner: f64,
) -> Result<(f64, f64)> {
    let kind = FrameKind::Unrescaled;
    let b = Default::default();
    let (mut margin, mut need) = (f64::INFINITY, 0.0f64);
    for (s, &t) in slices.iter().zip(times) {
        let w: Vec<f64> = vprof.iter().map(|v| eps * (v + k * (t - t_start))).collect();
        let up: Vec<f64> = s.r.iter().zip(&w).map(|(r, w)| r + w).collect();
        let down: Vec<f64> = s.r.iter().zip(&w).map(|(r, w)| r - w).collect();
        let v0 = velocity(grid, &s.r, kind, b)?;
        let vu = velocity(grid, &up, kind, b)?;
        let vd = velocity(grid, &down, kind, b)?;
        for idx in 0..grid.len() {
            if grid.y(idx / grid.n_theta).abs() < y_inner {
                continue;
            }
            let du = (vu[idx] - v0[idx]) / eps;
            let dd = (v0[idx] - vd[idx]) / eps;
            need = need.max(du).max(dd);
            margin = margin.min(k - du).min(k - dd);
        }
    }
    Ok((margin, need))
}

/// Builds the barrier pair over `[t_start, t_end]` on the snapshot times of
/// `history`.
pub fn build_barrier_pair(history: &FlowHistory, eps: f64, spec: &BarrierSpec) -> Result<BarrierPair> {
    if history.graphs.is_empty() {
        return Err(Error::InvalidInput("empty flow history".into()));
    }
    let grid = history.graphs[0].grid;
    if !grid.is_axisymmetric() || history.graphs.iter().any(|g| !g.grid.same_as(&grid)) {
        return Err(Error::GridMismatch("barriers need one axisymmetric grid".into()));
    }
    if !(eps >= 0.0) || !(spec.y_inner > 0.0 && spec.y_outer > spec.y_inner) || !(spec.t_end > spec.t_start) {
        return Err(Error::InvalidInput(format!(
            "barrier with eps = {eps}, regions {} < {}, window [{}, {}]",
            spec.y_inner, spec.y_outer, spec.t_start, spec.t_end
        )));
    }
    let first = history.times[0];
    let last = *history.times.last().expect("non-empty");
    if spec.t_start - eps < first - 1e-12 || spec.t_end + eps > last + 1e-12 {
        return Err(Error::InvalidInput(format!(
            "eps = {eps} leaves the recorded window [{first}, {last}]"
        )));
    }
    let mut t_end = spec.t_end;
    let mut attempt = 0;
    loop {
        let times: Vec<f64> = history
            .times
            .iter()
            .copied()
            .filter(|&t| t >= spec.t_start - 1e-12 && t <= t_end + 1e-12)
            .collect();
        if times.len() < 2 {
            return Err(Error::MatchingFailed(format!(
                "window shrank below the snapshot spacing at t_end = {t_end}"
            )));
        }
        match build_on(history, eps, spec, &times, grid) {
            Err(Error::MatchingFailed(msg)) if spec.shrink_window && attempt < 30 => {
                log::debug!("barrier matching failed ({msg}); halving window");
                t_end = spec.t_start + 0.5 * (t_end - spec.t_start);
                attempt += 1;
            }
            other => return other,
        }
    }
}

fn build_on(
    history: &FlowHistory,
    eps: f64,
    spec: &BarrierSpec,
    times: &[f64],
    grid: GridSpec,
) -> Result<BarrierPair> {
    let t_hi = times[times.len() - 1];
    check_mean_convex(history, spec.t_start - eps, t_hi + eps, spec.y_outer)?;
    let base: Vec<CylinderGraph> = times
        .iter()
        .map(|&t| Ok(CylinderGraph { grid, values: history.radii_at(t)? }.map(|r| r - crate::geometry::SQRT2)))
        .collect::<Result<_>>()?;
    if eps == 0.0 {
        return Ok(BarrierPair {
            eps,
            y_inner: spec.y_inner,
            y_outer: spec.y_outer,
            t_start: spec.t_start,
            c1: 1.0,
            k: 0.0,
            certificate_margin: f64::INFINITY,
            v_profile: vec![0.0; grid.len()],
            times: times.to_vec(),
            lower: base.clone(),
            upper: base.clone(),
            base,
            tolerance: 1e-8,
        });
    }
    let sl = slices(history, times, eps)?;
    let mut c1 = 1.0f64;
    for s in &sl {
        for idx in 0..grid.len() {
            if grid.y(idx / grid.n_theta).abs() >= spec.y_outer {
                continue;
            }
            for u in [s.u_up[idx], s.u_down[idx]] {
                if !(u > 0.0) {
                    return Err(Error::MeanConvexityFailed(format!(
                        "time shift does not move the surface inward at y = {}",
                        grid.y(idx / grid.n_theta)
                    )));
                }
                c1 = c1.max(u / eps).max(eps / u);
            }
        }
    }
    c1 *= 1.0 + 1e-9;
    let vprof = transition(&grid, spec.y_inner, spec.y_outer, c1);
    let k = match spec.k {
        Some(k) => k,
        None => {
            let (_, need) = supersolution(&grid, &sl, times, spec.t_start, eps, &vprof, 0.0, spec.y_inner)?;
            let mut k = 2.0 * need.max(1e-6);
            for _ in 0..20 {
                let (m, _) = supersolution(&grid, &sl, times, spec.t_start, eps, &vprof, k, spec.y_inner)?;
                if m > 0.0 {
                    break;
                }
                k *= 2.0;
            }
            k
        }
    };
    let (margin, _) = supersolution(&grid, &sl, times, spec.t_start, eps, &vprof, k, spec.y_inner)?;

    let mut lower = Vec::with_capacity(times.len());
    let mut upper = Vec::with_capacity(times.len());
    for (s, &t) in sl.iter().zip(times) {
        let mut lo = vec![0.0; grid.len()];
        let mut up = vec![0.0; grid.len()];
        for idx in 0..grid.len() {
            let y = grid.y(idx / grid.n_theta).abs();
            let v = eps * (vprof[idx] + k * (t - spec.t_start));
            let (du, dd) = if y < spec.y_inner {
                (s.u_up[idx], s.u_down[idx])
            } else if y <= spec.y_outer {
                (s.u_up[idx].min(v), s.u_down[idx].min(v))
            } else {
                (v, v)
            };
            up[idx] = s.r[idx] + du - crate::geometry::SQRT2;
            lo[idx] = s.r[idx] - dd - crate::geometry::SQRT2;
        }
        // matching: the time shift is the smaller offset at the inner edge,
        // the outer offset the smaller one at the outer edge
        for i in 0..grid.n_y {
            let y = grid.y(i).abs();
            let at_inner = y >= spec.y_inner && y < spec.y_inner + grid.h_y();
            let at_outer = y <= spec.y_outer && y > spec.y_outer - grid.h_y();
            for j in 0..grid.n_theta {
                let idx = grid.idx(i, j);
                let v = eps * (vprof[idx] + k * (t - spec.t_start));
                let (a, b) = (s.u_up[idx], s.u_down[idx]);
                if (at_inner && !(v > a && v > b)) || (at_outer && !(v < a && v < b)) {
                    return Err(Error::MatchingFailed(format!(
                        "offsets do not cross at t = {t}, y = {}",
                        grid.y(i)
                    )));
                }
            }
        }
        lower.push(CylinderGraph { grid, values: lo });
        upper.push(CylinderGraph { grid, values: up });
    }
    Ok(BarrierPair {
        eps,
        y_inner: spec.y_inner,
        y_outer: spec.y_outer,
        t_start: spec.t_start,
        c1,
        k,
        certificate_margin: margin / k,
        v_profile: vprof,
        times: times.to_vec(),
        base,
        lower,
        upper,
        tolerance: 1e-8,
    })
}

impl BarrierPair {
    /// One `t, y, theta, v` file per barrier.
    pub fn write_csv(&self, dir: &Path) -> Result<()> {
        for (name, set) in [("lower.csv", &self.lower), ("upper.csv", &self.upper)] {
            let mut w = csv::Writer::from_path(dir.join(name))?;
            w.write_record(["t", "y", "theta", "v"])?;
            for (t, g) in self.times.iter().zip(set) {
                for i in 0..g.grid.n_y {
                    for j in 0..g.grid.n_theta {
                        w.write_record([fmt17(*t), fmt17(g.y(i)), fmt17(g.theta(j)), fmt17(g.v(i, j))])?;
                    }
                }
            }
            w.flush()?;
        }
        Ok(())
    }
}

/// First `(t, y)` where `test` leaves the sandwich, if any.
pub fn sandwich_monitor(test: &FlowHistory, pair: &BarrierPair) -> Result<Option<(f64, f64)>> {
    for (k, &t) in pair.times.iter().enumerate() {
        let idx = test
            .index_of(t)
            .ok_or_else(|| Error::GridMismatch(format!("test flow has no snapshot at t = {t}")))?;
        let g = &test.graphs[idx];
        if !g.grid.same_as(&pair.base[k].grid) {
            return Err(Error::GridMismatch("test flow grid differs from the barriers".into()));
        }
        for i in 0..g.grid.n_y {
            for j in 0..g.grid.n_theta {
                let v = g.v(i, j);
                if v < pair.lower[k].v(i, j) - pair.tolerance || v > pair.upper[k].v(i, j) + pair.tolerance {
                    return Ok(Some((t, g.y(i))));
                }
            }
        }
    }
    Ok(None)
}

/// Smooth random perturbation (three Gaussian bumps) with sup norm
/// `amplitude`.
pub fn bump_perturbation(grid: GridSpec, amplitude: f64, rng: &mut impl Rng) -> CylinderGraph {
    let half = 0.5 * (grid.y_max - grid.y_min);
    let mid = 0.5 * (grid.y_max + grid.y_min);
    let bumps: Vec<(f64, f64, f64)> = (0..3)
        .map(|_| {
            (
                rng.gen_range(-1.0..1.0),
                mid + rng.gen_range(-0.8..0.8) * half,
                rng.gen_range(0.5..2.0),
            )
        })
        .collect();
    let raw = CylinderGraph::from_fn(grid, |y, _| {
        bumps.iter().map(|(a, m, w)| a * (-((y - m) / w).powi(2)).exp()).sum()
    });
    let peak = raw.max_abs();
    if peak == 0.0 {
        return raw;
    }
    raw.map(|v| v * amplitude / peak)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub amplitude: f64,
    pub violated_at: Option<(f64, f64)>,
}

/// Starts `trials` perturbed flows at the first barrier time, each with a
/// random bump of sup norm `u eps / (2 C1)`, `u` uniform in `[0.1, 1)`, and
/// monitors them against the pair.
pub fn sandwich_trials(
    pair: &BarrierPair,
    trials: usize,
    seed: u64,
    params: StepParams,
) -> Result<Vec<TrialOutcome>> {
    let t0 = pair.times[0];
    let base = &pair.base[0];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let starts: Vec<(f64, CylinderGraph)> = (0..trials)
        .map(|_| {
            let amplitude = rng.gen_range(0.1..1.0) * pair.eps / (2.0 * pair.c1);
            (amplitude, bump_perturbation(base.grid, amplitude, &mut rng))
        })
        .collect();
    starts
        .into_par_iter()
        .map(|(amplitude, bump)| {
            let g = base.zip_with(&bump, |b, p| b + p)?;
            let state = FlowState::unrescaled(g, t0).with_params(params);
            let test = FlowHistory::record(&state, &pair.times)?;
            Ok(TrialOutcome {
                amplitude,
                violated_at: sandwich_monitor(&test, pair)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::SQRT2;

    fn cylinder_history(r0: f64) -> FlowHistory {
        let grid = GridSpec::symmetric(4.0, 81, 1).unwrap();
        let g = CylinderGraph::constant(grid, r0 - SQRT2);
        FlowHistory::record(&FlowState::unrescaled(g, 0.0), &FlowHistory::uniform_times(0.0, 0.01, 21)).unwrap()
    }

    #[test]
    fn cylinder_gap_is_eps_over_r() {
        let h = cylinder_history(1.0);
        let eps = 1e-3;
        let spec = BarrierSpec { t_start: 0.02, t_end: 0.15, ..Default::default() };
        let p = build_barrier_pair(&h, eps, &spec).unwrap();
        for (k, &t) in p.times.iter().enumerate() {
            let r = (1.0 - 2.0 * t).sqrt();
            let inner = p.upper[k].radius(40, 0);
            assert!((inner - (1.0 - 2.0 * (t - eps)).sqrt()).abs() < 1e-8);
            let gap = inner - p.base[k].radius(40, 0);
            assert!((gap / (eps / r) - 1.0).abs() < 0.1);
        }
        assert!(p.certificate_margin > 0.0);
    }

    #[test]
    fn zero_eps_collapses() {
        let h = cylinder_history(1.0);
        let spec = BarrierSpec { t_start: 0.02, t_end: 0.1, ..Default::default() };
        let p = build_barrier_pair(&h, 0.0, &spec).unwrap();
        assert_eq!(p.lower, p.upper);
        assert_eq!(p.lower, p.base);
    }

    #[test]
    fn bumpy_profile_is_not_mean_convex() {
        let grid = GridSpec::symmetric(4.0, 81, 1).unwrap();
        let g = CylinderGraph::from_fn(grid, |y, _| 1.0 + 0.3 * (3.0 * y).cos() - SQRT2);
        let h = FlowHistory { times: vec![0.0, 0.01, 0.02, 0.03], graphs: vec![g; 4] };
        let spec = BarrierSpec { t_start: 0.01, t_end: 0.02, ..Default::default() };
        assert!(matches!(
            build_barrier_pair(&h, 1e-3, &spec),
            Err(Error::MeanConvexityFailed(_))
        ));
    }

    #[test]
    fn base_flow_stays_inside() {
        let h = cylinder_history(1.0);
        let spec = BarrierSpec { t_start: 0.02, t_end: 0.15, ..Default::default() };
        let p = build_barrier_pair(&h, 1e-3, &spec).unwrap();
        assert_eq!(sandwich_monitor(&h, &p).unwrap(), None);
    }
}
