//! Gaussian-weighted norms on the numerical surface, the truncated distance
//! to the cylinder, the radius schedule and the non-concentration diagnostic.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{curvature_from_derivs, Boundary, CylinderGraph, SQRT2};
use crate::io::fmt17;

/// Exponent `p0` of the non-concentration weight `e^{|x|^2 / 8 p0}`.
pub const P0: f64 = 1.4;

/// Small parameters of the perturbation argument.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleParams {
    /// Base parameter; `kappa_i = kappa^i`.
    pub kappa: f64,
    pub r0: f64,
    pub c1: f64,
    pub eta0: f64,
    pub lambda1: f64,
    pub lambda2: f64,
}

impl Default for ScheduleParams {
    fn default() -> Self {
        ScheduleParams {
            kappa: 0.3,
            r0: 16.0,
            c1: 6.18,
            eta0: 1e-2,
            lambda1: 0.25,
            lambda2: 0.3,
        }
    }
}

impl ScheduleParams {
    pub fn kappa_i(&self, i: i32) -> f64 {
        self.kappa.powi(i)
    }

    pub fn lambda15(&self) -> f64 {
        0.5 * (self.lambda1 + self.lambda2)
    }

    /// Collects every violated constraint.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.kappa > 0.0 && self.kappa < 1.0) {
            out.push(format!("kappa = {} must lie in (0, 1)", self.kappa));
        }
        if !(self.r0 > 0.0) {
            out.push(format!("r0 = {} must be positive", self.r0));
        }
        if !(self.c1 > 0.0) {
            out.push(format!("c1 = {} must be positive", self.c1));
        }
        if !(self.eta0 > 0.0) {
            out.push(format!("eta0 = {} must be positive", self.eta0));
        }
        if !(self.lambda1 < self.lambda2 && self.lambda2 < 0.5) {
            out.push(format!(
                "need lambda1 < lambda2 < 1/2, got {} and {}",
                self.lambda1, self.lambda2
            ));
        }
        if ((2.0 * self.lambda1).round() - 2.0 * self.lambda1).abs() < 1e-6 {
            out.push(format!("lambda1 = {} is a half-integer", self.lambda1));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(v))
        }
    }
}

/// `R(tau) = (2 + kappa2) sqrt(tau + r0)`.
pub fn radius_schedule(tau: f64, kappa2: f64, r0: f64) -> Result<f64> {
    let s = tau + r0;
    if !(s > 0.0) {
        return Err(Error::InvalidTime(format!("tau + R0 = {s} is not positive")));
    }
    Ok((2.0 + kappa2) * s.sqrt())
}

/// Composite Simpson weights for `n` equally spaced nodes; a 3/8 panel closes
/// an odd number of intervals.
pub fn simpson_weights(n: usize, h: f64) -> Vec<f64> {
    let mut w = vec![0.0; n];
    if n < 2 {
        return w;
    }
    if n == 2 {
        w[0] = 0.5 * h;
        w[1] = 0.5 * h;
        return w;
    }
    let intervals = n - 1;
    let simpson_end = if intervals % 2 == 0 { n - 1 } else { n - 4 };
    let mut k = 0;
    while k + 2 <= simpson_end {
        w[k] += h / 3.0;
        w[k + 1] += 4.0 * h / 3.0;
        w[k + 2] += h / 3.0;
        k += 2;
    }
    if intervals % 2 == 1 {
        let s = simpson_end;
        w[s] += 3.0 * h / 8.0;
        w[s + 1] += 9.0 * h / 8.0;
        w[s + 2] += 9.0 * h / 8.0;
        w[s + 3] += 3.0 * h / 8.0;
    }
    w
}

/// Order-independent sum (sorted), so that permuting the angular nodes gives
/// bit-identical results.
fn ring_sum(vals: &mut [f64]) -> f64 {
    vals.sort_by(|a, b| a.total_cmp(b));
    vals.iter().sum()
}

/// `int_{M} f(x) e^{-|x - o|^2/4} dA` over the part of the graph inside `B_R(0)`,
/// with `f` evaluated per node from `(i, j, r, theta)`.
fn weighted_integral(
    g: &CylinderGraph,
    radius: f64,
    center: [f64; 3],
    f: &dyn Fn(usize, usize, f64, f64) -> f64,
) -> f64 {
    let grid = &g.grid;
    let wy = simpson_weights(grid.n_y, grid.h_y());
    let ht = grid.h_theta();
    let radii = g.radii();
    let r2 = radius * radius;
    let mut rows = Vec::with_capacity(grid.n_y);
    let mut ring = vec![0.0; grid.n_theta];
    for i in 0..grid.n_y {
        let y = grid.y(i);
        for (j, slot) in ring.iter_mut().enumerate() {
            let r = radii[grid.idx(i, j)];
            let th = grid.theta(j);
            *slot = if y * y + r * r < r2 {
                let d = crate::geometry::derivs(grid, &radii, i, j, Boundary::Quadratic);
                let w = curvature_from_derivs(y, th, &d).area_element;
                let dy = y - center[0];
                // axial centers keep the integrand independent of theta
                let q = if center[1] == 0.0 && center[2] == 0.0 {
                    dy * dy + r * r
                } else {
                    let a = r * th.cos() - center[1];
                    let b = r * th.sin() - center[2];
                    dy * dy + a * a + b * b
                };
                f(i, j, r, th) * (-q / 4.0).exp() * w
            } else {
                0.0
            };
        }
        rows.push(wy[i] * ht * ring_sum(&mut ring));
    }
    rows.iter().sum()
}

fn check_ball(g: &CylinderGraph, radius: f64) -> Result<()> {
    let coverage = g.grid.coverage();
    if radius.is_finite() && radius > coverage + 1e-12 {
        return Err(Error::BallExceedsStrip { radius, coverage });
    }
    Ok(())
}

/// Gaussian `L^2` norm of a function on the graph over `B_R`.
///
/// `radius = f64::INFINITY` integrates over the whole strip.
pub fn gaussian_norm(g: &CylinderGraph, values: &[f64], radius: f64) -> Result<f64> {
    if values.len() != g.grid.len() {
        return Err(Error::GridMismatch(format!(
            "{} values on a grid of {} nodes",
            values.len(),
            g.grid.len()
        )));
    }
    check_ball(g, radius)?;
    let n_t = g.grid.n_theta;
    let s = weighted_integral(g, radius, [0.0; 3], &|i, j, _, _| values[i * n_t + j].powi(2));
    Ok(s.max(0.0).sqrt())
}

/// Weighted inner product of two node fields over `M ∩ B_R`.
pub fn gaussian_inner(g: &CylinderGraph, a: &[f64], b: &[f64], radius: f64) -> Result<f64> {
    let n = g.grid.len();
    if a.len() != n || b.len() != n {
        return Err(Error::GridMismatch(format!(
            "fields of {} and {} values on a grid of {n} nodes",
            a.len(),
            b.len()
        )));
    }
    check_ball(g, radius)?;
    let n_t = g.grid.n_theta;
    Ok(weighted_integral(g, radius, [0.0; 3], &|i, j, _, _| {
        a[i * n_t + j] * b[i * n_t + j]
    }))
}

/// Gaussian norm of the graph function itself.
pub fn graph_norm(g: &CylinderGraph, radius: f64) -> Result<f64> {
    gaussian_norm(g, &g.values, radius)
}

/// Distance from `x - offset` to the cylinder for the graph point `(r, theta)`.
fn cylinder_dist(r: f64, theta: f64, offset: [f64; 3]) -> f64 {
    if offset[1] == 0.0 && offset[2] == 0.0 {
        return (r - SQRT2).abs();
    }
    let a = r * theta.cos() - offset[1];
    let b = r * theta.sin() - offset[2];
    ((a * a + b * b).sqrt() - SQRT2).abs()
}

/// Truncated Gaussian distance to the cylinder with the integrand
/// `min{dist(x - o, C), cap}^2 e^{-|x - o|^2/4}`.
pub fn distance_to_cylinder(g: &CylinderGraph, offset: [f64; 3], cap: f64) -> f64 {
    let s = weighted_integral(g, f64::INFINITY, offset, &|_, _, r, th| {
        cylinder_dist(r, th, offset).min(cap).powi(2)
    });
    s.max(0.0).sqrt()
}

/// The same functional with `max{dist, cap}`, kept for comparison: it is
/// bounded below by the Gaussian area and does not vanish on the cylinder.
pub fn distance_to_cylinder_max(g: &CylinderGraph, offset: [f64; 3], cap: f64) -> f64 {
    let s = weighted_integral(g, f64::INFINITY, offset, &|_, _, r, th| {
        cylinder_dist(r, th, offset).max(cap).powi(2)
    });
    s.max(0.0).sqrt()
}

/// `ln(d_now / d_next)`.
pub fn frequency_ratio(d_now: f64, d_next: f64) -> Result<f64> {
    if !(d_now > 0.0 && d_next > 0.0) {
        return Err(Error::ZeroDistance);
    }
    Ok((d_now / d_next).ln())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    TauMax,
    MinRadius,
    Graphicality,
    MaxSteps,
    Expanded,
}

impl StopReason {
    pub fn as_str(self) -> &'static str {
        match self {
            StopReason::TauMax => "tau_max",
            StopReason::MinRadius => "min_radius",
            StopReason::Graphicality => "graphicality",
            StopReason::MaxSteps => "max_steps",
            StopReason::Expanded => "expanded",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "tau_max" => StopReason::TauMax,
            "min_radius" => StopReason::MinRadius,
            "graphicality" => StopReason::Graphicality,
            "max_steps" => StopReason::MaxSteps,
            "expanded" => StopReason::Expanded,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub tau: f64,
    pub t: f64,
    pub d_c: f64,
    pub norm_br: f64,
    pub r_of_tau: f64,
    pub freq_ratio: f64,
    pub min_radius: f64,
    pub graph_radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceTrace {
    pub rows: Vec<TraceRow>,
    pub kappa2: f64,
    pub r0: f64,
    pub stop_reason: Option<StopReason>,
}

impl DistanceTrace {
    pub fn new(kappa2: f64, r0: f64) -> Self {
        DistanceTrace {
            rows: Vec::new(),
            kappa2,
            r0,
            stop_reason: None,
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Fills `freq_ratio` from rows one unit of `tau` apart (within `tol`).
    pub fn fill_frequency_ratios(&mut self, tol: f64) {
        let taus: Vec<f64> = self.rows.iter().map(|r| r.tau).collect();
        let d: Vec<f64> = self.rows.iter().map(|r| r.d_c).collect();
        for (k, row) in self.rows.iter_mut().enumerate() {
            row.freq_ratio = f64::NAN;
            let target = taus[k] + 1.0;
            if let Some(m) = taus.iter().position(|t| (t - target).abs() <= tol) {
                if let Ok(f) = frequency_ratio(d[k], d[m]) {
                    row.freq_ratio = f;
                }
            }
        }
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record([
            "tau",
            "t",
            "d_C",
            "norm_BR",
            "R_of_tau",
            "freq_ratio",
            "min_radius",
            "graph_radius",
            "stop_reason",
        ])?;
        let last = self.rows.len().saturating_sub(1);
        for (k, r) in self.rows.iter().enumerate() {
            let reason = match (k == last, self.stop_reason) {
                (true, Some(s)) => s.as_str(),
                _ => "",
            };
            w.write_record([
                fmt17(r.tau),
                fmt17(r.t),
                fmt17(r.d_c),
                fmt17(r.norm_br),
                fmt17(r.r_of_tau),
                fmt17(r.freq_ratio),
                fmt17(r.min_radius),
                fmt17(r.graph_radius),
                reason.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path, kappa2: f64, r0: f64) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path)?;
        let mut trace = DistanceTrace::new(kappa2, r0);
        for rec in rdr.records() {
            let rec = rec?;
            let f = |k: usize| -> Result<f64> {
                let s = rec
                    .get(k)
                    .ok_or_else(|| Error::InvalidInput(format!("trace row missing column {k}")))?;
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::InvalidInput(format!("bad trace value {s:?}: {e}")))
            };
            trace.rows.push(TraceRow {
                tau: f(0)?,
                t: f(1)?,
                d_c: f(2)?,
                norm_br: f(3)?,
                r_of_tau: f(4)?,
                freq_ratio: f(5)?,
                min_radius: f(6)?,
                graph_radius: f(7)?,
            });
            if let Some(s) = rec.get(8).filter(|s| !s.is_empty()) {
                trace.stop_reason = StopReason::parse(s);
            }
        }
        Ok(trace)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailReport {
    /// `sup |v(x, tau)| e^{-|x|^2 / 8 p0}` over the checked region, `tau in [1, 2]`.
    pub measured: f64,
    /// `(|v(0)|^2_{B_R} + delta^2 e^{-(R - C1 - 1)^2/(4 + kappa3)})^{1/2}`.
    pub rhs: f64,
    /// Smallest constant making the inequality hold.
    pub constant: f64,
    pub ceiling: f64,
    pub pass: bool,
    /// Constant above half the ceiling.
    pub near_violation: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailParams {
    pub radius: f64,
    pub kappa3: f64,
    pub delta: f64,
    pub c1: f64,
    /// Largest acceptable constant.
    pub ceiling: f64,
}

/// Non-concentration check on snapshots `(tau, graph)` of a rescaled flow.
///
/// `initial` is the slice at `tau = 0`; snapshots with `tau` in `[1, 2]` are
/// checked on `|x| < e^{tau/2}(R - C1 - 2)`.
pub fn tail_bound_check(
    initial: &CylinderGraph,
    snapshots: &[(f64, CylinderGraph)],
    p: TailParams,
) -> Result<TailReport> {
    if initial.grid.coverage() < p.radius {
        return Err(Error::InsufficientCoverage(format!(
            "initial strip covers {} < R = {}",
            initial.grid.coverage(),
            p.radius
        )));
    }
    let v0 = graph_norm(initial, p.radius)?;
    let tail = p.delta * p.delta * (-(p.radius - p.c1 - 1.0).powi(2) / (4.0 + p.kappa3)).exp();
    let rhs = (v0 * v0 + tail).sqrt();
    let mut measured: f64 = 0.0;
    let mut checked = 0;
    for (tau, g) in snapshots {
        if !(1.0..=2.0).contains(tau) {
            continue;
        }
        let reach = (tau / 2.0).exp() * (p.radius - p.c1 - 2.0);
        if g.grid.coverage() < reach {
            return Err(Error::InsufficientCoverage(format!(
                "strip covers {} < {} at tau = {}",
                g.grid.coverage(),
                reach,
                tau
            )));
        }
        checked += 1;
        for i in 0..g.grid.n_y {
            let y = g.y(i);
            for j in 0..g.grid.n_theta {
                let r = g.radius(i, j);
                let x2 = y * y + r * r;
                if x2.sqrt() < reach {
                    measured = measured.max(g.v(i, j).abs() * (-x2 / (8.0 * P0)).exp());
                }
            }
        }
    }
    if checked == 0 {
        return Err(Error::InsufficientCoverage("no snapshots with tau in [1, 2]".into()));
    }
    let constant = if measured == 0.0 {
        0.0
    } else if rhs > 0.0 {
        measured / rhs
    } else {
        f64::INFINITY
    };
    Ok(TailReport {
        measured,
        rhs,
        constant,
        ceiling: p.ceiling,
        pass: constant <= p.ceiling,
        near_violation: constant > 0.5 * p.ceiling,
    })
}
