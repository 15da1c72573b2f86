//! Radial graphs over the cylinder `C = R x S^1(sqrt 2)` and their curvature.
//!
//! A surface is stored as `r(y, theta) = sqrt(2) + v(y, theta)` on a uniform
//! strip grid. Points are `x = (y, r cos theta, r sin theta)`, so `y` is the
//! axial coordinate and `(z1, z2) = (r cos theta, r sin theta)`.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::FlowState;
use crate::io::fmt17;

pub const SQRT2: f64 = std::f64::consts::SQRT_2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub y_min: f64,
    pub y_max: f64,
    pub n_y: usize,
    pub n_theta: usize,
}

impl GridSpec {
    pub fn new(y_min: f64, y_max: f64, n_y: usize, n_theta: usize) -> Result<Self> {
        let spec = GridSpec {
            y_min,
            y_max,
            n_y,
            n_theta,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Strip `[-half_length, half_length]`.
    pub fn symmetric(half_length: f64, n_y: usize, n_theta: usize) -> Result<Self> {
        Self::new(-half_length, half_length, n_y, n_theta)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.y_min.is_finite() && self.y_max.is_finite() && self.y_max > self.y_min) {
            return Err(Error::InvalidInput(format!(
                "strip bounds [{}, {}] are not an interval",
                self.y_min, self.y_max
            )));
        }
        if self.n_y < 5 {
            return Err(Error::InvalidInput(format!(
                "n_y = {} is below the 5-point minimum",
                self.n_y
            )));
        }
        if self.n_theta == 0 || (self.n_theta > 1 && self.n_theta < 4) {
            return Err(Error::InvalidInput(format!(
                "n_theta = {} (must be 1 or at least 4)",
                self.n_theta
            )));
        }
        Ok(())
    }

    pub fn h_y(&self) -> f64 {
        (self.y_max - self.y_min) / (self.n_y - 1) as f64
    }

    pub fn h_theta(&self) -> f64 {
        2.0 * PI / self.n_theta as f64
    }

    pub fn y(&self, i: usize) -> f64 {
        if i + 1 == self.n_y {
            self.y_max
        } else {
            self.y_min + i as f64 * self.h_y()
        }
    }

    pub fn theta(&self, j: usize) -> f64 {
        j as f64 * self.h_theta()
    }

    pub fn len(&self) -> usize {
        self.n_y * self.n_theta
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        i * self.n_theta + j
    }

    pub fn is_axisymmetric(&self) -> bool {
        self.n_theta == 1
    }

    /// Largest axial half-length `R` with `[-R, R]` inside the strip.
    pub fn coverage(&self) -> f64 {
        if self.y_min > 0.0 || self.y_max < 0.0 {
            0.0
        } else {
            self.y_min.abs().min(self.y_max.abs())
        }
    }

    pub fn same_as(&self, other: &GridSpec) -> bool {
        self.n_y == other.n_y
            && self.n_theta == other.n_theta
            && (self.y_min - other.y_min).abs() <= 1e-12 * (1.0 + self.y_min.abs())
            && (self.y_max - other.y_max).abs() <= 1e-12 * (1.0 + self.y_max.abs())
    }
}

/// Ghost-point closure at the strip ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// Quadratic continuation (third derivative zero).
    #[default]
    Quadratic,
    /// Linear continuation.
    Linear,
}

impl Boundary {
    #[inline]
    fn ghost(self, u0: f64, u1: f64, u2: f64) -> f64 {
        match self {
            Boundary::Quadratic => 3.0 * u0 - 3.0 * u1 + u2,
            Boundary::Linear => 2.0 * u0 - u1,
        }
    }
}

/// Finite-difference derivatives of a grid field at one node.
#[derive(Debug, Clone, Copy, Default)]
pub struct Derivs {
    pub u: f64,
    pub u_y: f64,
    pub u_t: f64,
    pub u_yy: f64,
    pub u_yt: f64,
    pub u_tt: f64,
}

/// Central differences in `y` and periodic `theta`, ghost closure at the strip ends.
pub fn derivs(grid: &GridSpec, u: &[f64], i: usize, j: usize, boundary: Boundary) -> Derivs {
    let n_y = grid.n_y;
    let n_t = grid.n_theta;
    let hy = grid.h_y();
    let at = |ii: isize, jj: usize| -> f64 {
        if ii < 0 {
            boundary.ghost(u[grid.idx(0, jj)], u[grid.idx(1, jj)], u[grid.idx(2, jj)])
        } else if ii as usize >= n_y {
            boundary.ghost(
                u[grid.idx(n_y - 1, jj)],
                u[grid.idx(n_y - 2, jj)],
                u[grid.idx(n_y - 3, jj)],
            )
        } else {
            u[grid.idx(ii as usize, jj)]
        }
    };
    let ii = i as isize;
    let c = u[grid.idx(i, j)];
    let up = at(ii + 1, j);
    let dn = at(ii - 1, j);
    let mut d = Derivs {
        u: c,
        u_y: (up - dn) / (2.0 * hy),
        u_yy: (up - 2.0 * c + dn) / (hy * hy),
        ..Derivs::default()
    };
    if n_t > 1 {
        let ht = grid.h_theta();
        let jp = (j + 1) % n_t;
        let jm = (j + n_t - 1) % n_t;
        let tp = u[grid.idx(i, jp)];
        let tm = u[grid.idx(i, jm)];
        d.u_t = (tp - tm) / (2.0 * ht);
        d.u_tt = (tp - 2.0 * c + tm) / (ht * ht);
        let ypp = at(ii + 1, jp);
        let ypm = at(ii + 1, jm);
        let ymp = at(ii - 1, jp);
        let ymm = at(ii - 1, jm);
        d.u_yt = (ypp - ypm - ymp + ymm) / (4.0 * hy * ht);
    }
    d
}

/// Curvature data at one point of a radial graph.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvatureQuantities {
    /// Sum of principal curvatures with respect to the outward normal
    /// (positive on a round cylinder).
    pub mean_curvature: f64,
    pub norm_a2: f64,
    /// Outward unit normal in ambient `(y, z1, z2)` coordinates.
    pub normal: [f64; 3],
    /// Area element `|X_y x X_theta|`.
    pub area_element: f64,
    /// `<x, n>`.
    pub support: f64,
}

/// Closed-form geometry of the radial graph from radius derivatives.
///
/// In the frame `(e_y, e_r, e_theta)` the outward normal is
/// `(-r r_y, r, -r_t) / W` with `W = sqrt(r^2 + r_t^2 + r^2 r_y^2)`.
pub fn curvature_from_derivs(y: f64, theta: f64, d: &Derivs) -> CurvatureQuantities {
    let r = d.u;
    let (ry, rt) = (d.u_y, d.u_t);
    let w = (r * r + rt * rt + r * r * ry * ry).sqrt();
    let e = 1.0 + ry * ry;
    let f = ry * rt;
    let g = r * r + rt * rt;
    let det = e * g - f * f;
    let h11 = -r * d.u_yy / w;
    let h12 = -(r * d.u_yt - ry * rt) / w;
    let h22 = (r * r + 2.0 * rt * rt - r * d.u_tt) / w;
    // inverse metric
    let (gi11, gi12, gi22) = (g / det, -f / det, e / det);
    let mean = gi11 * h11 + 2.0 * gi12 * h12 + gi22 * h22;
    // |A|^2 = tr((g^-1 h)^2)
    let m11 = gi11 * h11 + gi12 * h12;
    let m12 = gi11 * h12 + gi12 * h22;
    let m21 = gi12 * h11 + gi22 * h12;
    let m22 = gi12 * h12 + gi22 * h22;
    let norm_a2 = m11 * m11 + 2.0 * m12 * m21 + m22 * m22;
    let (c, s) = (theta.cos(), theta.sin());
    let ny = -r * ry / w;
    let nr = r / w;
    let nt = -rt / w;
    let normal = [ny, nr * c - nt * s, nr * s + nt * c];
    let support = (y * ny) + r * nr;
    CurvatureQuantities {
        mean_curvature: mean,
        norm_a2,
        normal,
        area_element: w,
        support,
    }
}

/// A surface stored as a radial graph `r = sqrt(2) + v` over a strip of `C`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CylinderGraph {
    pub grid: GridSpec,
    /// Offsets `v(y_i, theta_j)` stored at `i * n_theta + j`.
    pub values: Vec<f64>,
}

impl CylinderGraph {
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        grid.validate()?;
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a {}x{} grid",
                values.len(),
                grid.n_y,
                grid.n_theta
            )));
        }
        let g = CylinderGraph { grid, values };
        g.check_embedded()?;
        Ok(g)
    }

    pub fn zeros(grid: GridSpec) -> Self {
        CylinderGraph {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn constant(grid: GridSpec, c: f64) -> Self {
        CylinderGraph {
            grid,
            values: vec![c; grid.len()],
        }
    }

    /// Samples `v(y, theta)`; no embeddedness check (also used for plain grid functions).
    pub fn from_fn(grid: GridSpec, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for i in 0..grid.n_y {
            let y = grid.y(i);
            for j in 0..grid.n_theta {
                values.push(f(y, grid.theta(j)));
            }
        }
        CylinderGraph { grid, values }
    }

    pub fn y(&self, i: usize) -> f64 {
        self.grid.y(i)
    }

    pub fn theta(&self, j: usize) -> f64 {
        self.grid.theta(j)
    }

    pub fn v(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.idx(i, j)]
    }

    pub fn radius(&self, i: usize, j: usize) -> f64 {
        SQRT2 + self.v(i, j)
    }

    pub fn radii(&self) -> Vec<f64> {
        self.values.iter().map(|v| SQRT2 + v).collect()
    }

    pub fn is_axisymmetric(&self) -> bool {
        self.grid.is_axisymmetric()
    }

    pub fn min_radius(&self) -> f64 {
        self.values
            .iter()
            .fold(f64::INFINITY, |m, v| m.min(SQRT2 + v))
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn check_embedded(&self) -> Result<()> {
        for (k, v) in self.values.iter().enumerate() {
            if !(SQRT2 + v > 0.0) {
                let i = k / self.grid.n_theta;
                return Err(Error::NonGraphical(format!(
                    "radius {} at y = {}",
                    SQRT2 + v,
                    self.grid.y(i)
                )));
            }
        }
        Ok(())
    }

    /// `|x|` of the surface point over node `(i, j)`.
    pub fn point_norm(&self, i: usize, j: usize) -> f64 {
        let y = self.y(i);
        let r = self.radius(i, j);
        (y * y + r * r).sqrt()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> CylinderGraph {
        CylinderGraph {
            grid: self.grid,
            values: self.values.iter().map(|v| f(*v)).collect(),
        }
    }

    /// Pointwise combination with another graph on the same grid.
    pub fn zip_with(&self, other: &CylinderGraph, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if !self.grid.same_as(&other.grid) {
            return Err(Error::GridMismatch("zip_with on different grids".into()));
        }
        Ok(CylinderGraph {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| f(*a, *b))
                .collect(),
        })
    }

    /// 4-point Lagrange interpolation in `y` (periodic in `theta`).
    ///
    /// Points up to three cells beyond the strip are extrapolated from the
    /// end stencil; farther points return `None`.
    pub fn sample(&self, y: f64, theta: f64) -> Option<f64> {
        let g = &self.grid;
        let h = g.h_y();
        let s = (y - g.y_min) / h;
        if s < -3.0 || s > (g.n_y - 1) as f64 + 3.0 {
            return None;
        }
        let base = (s.floor() as isize - 1).clamp(0, g.n_y as isize - 4) as usize;
        let wy = lagrange4(s - base as f64);
        if g.n_theta == 1 {
            let mut acc = 0.0;
            for (k, w) in wy.iter().enumerate() {
                acc += w * self.values[base + k];
            }
            return Some(acc);
        }
        let ht = g.h_theta();
        let st = theta.rem_euclid(2.0 * PI) / ht;
        let jb = st.floor() as isize - 1;
        let wt = lagrange4(st - jb as f64);
        let n_t = g.n_theta as isize;
        let mut acc = 0.0;
        for (k, wyk) in wy.iter().enumerate() {
            for (l, wtl) in wt.iter().enumerate() {
                let j = (jb + l as isize).rem_euclid(n_t) as usize;
                acc += wyk * wtl * self.values[g.idx(base + k, j)];
            }
        }
        Some(acc)
    }

    pub fn derivs_at(&self, i: usize, j: usize, boundary: Boundary) -> Derivs {
        derivs(&self.grid, &self.values, i, j, boundary)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["y", "theta", "v"])?;
        for i in 0..self.grid.n_y {
            for j in 0..self.grid.n_theta {
                w.write_record([fmt17(self.y(i)), fmt17(self.theta(j)), fmt17(self.v(i, j))])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a `y, theta, v` profile written by [`CylinderGraph::write_csv`].
    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path)?;
        let mut rows: Vec<(f64, f64, f64)> = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let parse = |k: usize| -> Result<f64> {
                rec.get(k)
                    .ok_or_else(|| Error::InvalidInput(format!("missing column {k}")))?
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::InvalidInput(format!("bad float: {e}")))
            };
            rows.push((parse(0)?, parse(1)?, parse(2)?));
        }
        if rows.is_empty() {
            return Err(Error::InvalidInput("empty profile".into()));
        }
        let y0 = rows[0].0;
        let n_theta = rows.iter().take_while(|r| r.0 == y0).count();
        if rows.len() % n_theta != 0 {
            return Err(Error::InvalidInput("ragged profile".into()));
        }
        let n_y = rows.len() / n_theta;
        let grid = GridSpec::new(y0, rows[rows.len() - 1].0, n_y, n_theta)?;
        CylinderGraph::new(grid, rows.into_iter().map(|r| r.2).collect())
    }
}

fn lagrange4(x: f64) -> [f64; 4] {
    // nodes at 0, 1, 2, 3
    let (a, b, c, d) = (x, x - 1.0, x - 2.0, x - 3.0);
    [
        -b * c * d / 6.0,
        a * c * d / 2.0,
        -a * b * d / 2.0,
        a * b * c / 6.0,
    ]
}

/// Curvature quantities of the graph over node `(i, j)`.
pub fn curvature_quantities(
    g: &CylinderGraph,
    i: usize,
    j: usize,
    boundary: Boundary,
) -> Result<CurvatureQuantities> {
    if i >= g.grid.n_y || j >= g.grid.n_theta {
        return Err(Error::InvalidInput(format!("node ({i}, {j}) outside grid")));
    }
    let lo = i.saturating_sub(1);
    let hi = (i + 1).min(g.grid.n_y - 1);
    for ii in lo..=hi {
        for jj in 0..g.grid.n_theta {
            if g.radius(ii, jj) <= 0.0 {
                return Err(Error::NonGraphical(format!(
                    "radius {} in stencil at y = {}",
                    g.radius(ii, jj),
                    g.y(ii)
                )));
            }
        }
    }
    let radii = g.radii();
    let d = derivs(&g.grid, &radii, i, j, boundary);
    Ok(curvature_from_derivs(g.y(i), g.theta(j), &d))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameKind {
    Rescaled,
    Unrescaled,
}

/// Spacetime point used as the rescaling center.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpacetimePoint {
    pub x: [f64; 3],
    pub t: f64,
}

impl Default for SpacetimePoint {
    fn default() -> Self {
        SpacetimePoint {
            x: [0.0; 3],
            t: 0.0,
        }
    }
}

/// Frame of a flow: `M_tau = e^{tau/2} (L_{T - e^{-tau}} - X)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameTag {
    pub kind: FrameKind,
    pub center: SpacetimePoint,
}

impl FrameTag {
    pub fn rescaled() -> Self {
        FrameTag {
            kind: FrameKind::Rescaled,
            center: SpacetimePoint::default(),
        }
    }

    pub fn unrescaled() -> Self {
        FrameTag {
            kind: FrameKind::Unrescaled,
            center: SpacetimePoint::default(),
        }
    }

    pub fn with_center(mut self, x: [f64; 3], t: f64) -> Self {
        self.center = SpacetimePoint { x, t };
        self
    }
}

/// Scales the strip and the radii by `factor` about axial position `shift`:
/// `y' = factor (y - shift)`, `r' = factor r`.
fn scale_graph(g: &CylinderGraph, factor: f64, shift: f64) -> CylinderGraph {
    let grid = GridSpec {
        y_min: factor * (g.grid.y_min - shift),
        y_max: factor * (g.grid.y_max - shift),
        ..g.grid
    };
    CylinderGraph {
        grid,
        values: g
            .values
            .iter()
            .map(|v| factor * (SQRT2 + v) - SQRT2)
            .collect(),
    }
}

/// Converts a flow state between the unrescaled and rescaled frames.
///
/// Only centers on the axis `(X_y, 0, 0)` keep the radial-graph chart; other
/// centers are rejected.
pub fn change_frame(state: &FlowState, target: FrameTag) -> Result<FlowState> {
    let src = state.frame;
    let on_axis = |c: &SpacetimePoint| c.x[1] == 0.0 && c.x[2] == 0.0;
    if !on_axis(&src.center) || !on_axis(&target.center) {
        return Err(Error::InvalidInput(
            "rescaling centers must lie on the cylinder axis".into(),
        ));
    }
    if src.kind == target.kind {
        if src.center != target.center {
            return Err(Error::InvalidInput(
                "direct conversion between centers of the same frame kind is not supported".into(),
            ));
        }
        return Ok(state.clone());
    }
    let mut out = state.clone();
    match (src.kind, target.kind) {
        (FrameKind::Unrescaled, FrameKind::Rescaled) => {
            let c = target.center;
            let gap = c.t - state.time;
            if !(gap > 0.0) {
                return Err(Error::InvalidTime(format!(
                    "t = {} is not before the center time T = {}",
                    state.time, c.t
                )));
            }
            let tau = -gap.ln();
            out.graph = scale_graph(&state.graph, 1.0 / gap.sqrt(), c.x[0]);
            out.time = tau;
        }
        (FrameKind::Rescaled, FrameKind::Unrescaled) => {
            let c = src.center;
            let tau = state.time;
            let gap = (-tau).exp();
            let factor = gap.sqrt();
            let mut g = scale_graph(&state.graph, factor, 0.0);
            g.grid.y_min += c.x[0];
            g.grid.y_max += c.x[0];
            out.graph = g;
            out.time = c.t - gap;
        }
        _ => unreachable!(),
    }
    out.frame = target;
    if target.kind == FrameKind::Unrescaled {
        out.frame.center = src.center;
    }
    Ok(out)
}

/// Ball on which `|v| + |grad v| + |hess v| < delta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphicalityCertificate {
    /// Axial half-length `R` of the certified region `|y| < R`.
    pub radius: f64,
    pub delta: f64,
    /// The bound is tested on the radial graph; the normal-graph bound agrees
    /// up to this factor.
    pub chart_factor: f64,
}

/// `|v| + |grad v| + |hess v|` at each node, derivatives in the metric of `C`.
pub fn c2_size(g: &CylinderGraph, boundary: Boundary) -> Vec<f64> {
    let grid = &g.grid;
    let mut out = Vec::with_capacity(grid.len());
    for i in 0..grid.n_y {
        for j in 0..grid.n_theta {
            let d = derivs(grid, &g.values, i, j, boundary);
            let grad = (d.u_y * d.u_y + 0.5 * d.u_t * d.u_t).sqrt();
            let hess = (d.u_yy * d.u_yy + d.u_yt * d.u_yt + 0.25 * d.u_tt * d.u_tt).sqrt();
            out.push(d.u.abs() + grad + hess);
        }
    }
    out
}

/// Largest axial half-length on which the graph is `delta`-graphical.
pub fn graphical_radius(g: &CylinderGraph, delta: f64) -> GraphicalityCertificate {
    let coverage = g.grid.coverage();
    let mut radius = coverage;
    if !(delta > 0.0) {
        radius = 0.0;
    } else {
        let size = c2_size(g, Boundary::Quadratic);
        let h = g.grid.h_y();
        for i in 0..g.grid.n_y {
            let y = g.y(i).abs();
            if y >= radius {
                continue;
            }
            let bad = (0..g.grid.n_theta).any(|j| !(size[g.grid.idx(i, j)] < delta));
            if bad {
                radius = if y < 0.5 * h { 0.0 } else { y };
            }
        }
    }
    GraphicalityCertificate {
        radius,
        delta: delta.max(0.0),
        chart_factor: 1.0 + delta.max(0.0),
    }
}

/// JSON header written next to a snapshot CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SnapshotHeader {
    pub grid: GridSpec,
    pub frame: FrameTag,
    pub time: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{FlowState, StepParams};

    fn revolution_h(r: f64, rp: f64, rpp: f64) -> f64 {
        -rpp / (1.0 + rp * rp).powf(1.5) + 1.0 / (r * (1.0 + rp * rp).sqrt())
    }

    #[test]
    fn exact_cylinder_curvature() {
        let grid = GridSpec::symmetric(5.0, 51, 8).unwrap();
        let g = CylinderGraph::zeros(grid);
        let q = curvature_quantities(&g, 25, 3, Boundary::Quadratic).unwrap();
        assert!((q.mean_curvature - 1.0 / SQRT2).abs() < 1e-14);
        assert!((q.norm_a2 - 0.5).abs() < 1e-14);
        let th = g.theta(3);
        assert!((q.normal[1] - th.cos()).abs() < 1e-14);
        assert!((q.normal[2] - th.sin()).abs() < 1e-14);
    }

    #[test]
    fn constant_offset_curvature() {
        let grid = GridSpec::symmetric(5.0, 51, 1).unwrap();
        for c in [-0.5, 0.1, 2.0] {
            let g = CylinderGraph::constant(grid, c);
            let q = curvature_quantities(&g, 0, 0, Boundary::Quadratic).unwrap();
            assert!((q.mean_curvature - 1.0 / (SQRT2 + c)).abs() < 1e-13);
        }
    }

    #[test]
    fn revolution_profile_matches_closed_form() {
        let f = |y: f64| 0.01 * (y * y - 2.0);
        let exact = revolution_h(SQRT2 + f(0.0), 0.0, 0.02);
        for &(n, tol) in &[(101usize, 1e-3), (201, 1e-4)] {
            let grid = GridSpec::symmetric(4.0, n, 1).unwrap();
            let g = CylinderGraph::from_fn(grid, |y, _| f(y));
            let q = curvature_quantities(&g, n / 2, 0, Boundary::Quadratic).unwrap();
            assert!((q.mean_curvature - exact).abs() < tol);
        }
    }

    #[test]
    fn revolution_profile_second_order() {
        let f = |y: f64| 0.3 * (0.7 * y).sin();
        let y0 = 1.3;
        let r = SQRT2 + f(y0);
        let rp = 0.21 * (0.7 * y0).cos();
        let rpp = -0.147 * (0.7 * y0).sin();
        let exact = revolution_h(r, rp, rpp);
        let err = |n: usize| {
            let grid = GridSpec::symmetric(4.0, n, 1).unwrap();
            let g = CylinderGraph::from_fn(grid, |y, _| f(y));
            let i = ((y0 + 4.0) / grid.h_y()).round() as usize;
            assert!((g.y(i) - y0).abs() < 1e-12);
            (curvature_quantities(&g, i, 0, Boundary::Quadratic)
                .unwrap()
                .mean_curvature
                - exact)
                .abs()
        };
        let ratio = err(81) / err(161);
        assert!(ratio > 3.5 && ratio < 4.5, "ratio {ratio}");
    }

    #[test]
    fn mean_curvature_bound_on_norm_a() {
        let grid = GridSpec::symmetric(3.0, 61, 16).unwrap();
        let g = CylinderGraph::from_fn(grid, |y, t| 0.2 * (y).sin() * t.cos() + 0.1 * (2.0 * t).sin());
        for i in 1..60 {
            for j in 0..16 {
                let q = curvature_quantities(&g, i, j, Boundary::Quadratic).unwrap();
                assert!(q.norm_a2 >= 0.5 * q.mean_curvature.powi(2) - 1e-12);
            }
        }
    }

    #[test]
    fn non_graphical_stencil_is_reported() {
        let grid = GridSpec::symmetric(3.0, 31, 1).unwrap();
        let mut g = CylinderGraph::zeros(grid);
        g.values[15] = -2.0;
        assert!(matches!(
            curvature_quantities(&g, 14, 0, Boundary::Quadratic),
            Err(Error::NonGraphical(_))
        ));
        assert!(CylinderGraph::new(grid, g.values.clone()).is_err());
    }

    #[test]
    fn frame_examples() {
        let grid = GridSpec::symmetric(4.0, 41, 1).unwrap();
        // unrescaled radius sqrt(-2t) at t = -1 is the fixed point
        let un = FlowState::new(
            CylinderGraph::constant(grid, (2.0f64).sqrt() - SQRT2),
            FrameTag::unrescaled(),
            -1.0,
            StepParams::default(),
        );
        let re = change_frame(&un, FrameTag::rescaled()).unwrap();
        assert!(re.time.abs() < 1e-15);
        assert!(re.graph.max_abs() < 1e-15);

        let tau = 4.0f64.ln();
        let re = FlowState::new(CylinderGraph::zeros(grid), FrameTag::rescaled(), tau, StepParams::default());
        let un = change_frame(&re, FrameTag::unrescaled()).unwrap();
        assert!((un.time + 0.25).abs() < 1e-15);
        assert!((un.graph.radius(3, 0) - SQRT2 / 2.0).abs() < 1e-15);
        assert!((un.graph.grid.y_max - 2.0).abs() < 1e-14);
    }

    #[test]
    fn frame_rejects_late_time() {
        let grid = GridSpec::symmetric(4.0, 41, 1).unwrap();
        let un = FlowState::new(CylinderGraph::zeros(grid), FrameTag::unrescaled(), 0.5, StepParams::default());
        let target = FrameTag::rescaled().with_center([0.0; 3], 0.5);
        assert!(matches!(change_frame(&un, target), Err(Error::InvalidTime(_))));
    }

    #[test]
    fn graphical_radius_examples() {
        let grid = GridSpec::symmetric(10.0, 401, 1).unwrap();
        let flat = CylinderGraph::zeros(grid);
        assert_eq!(graphical_radius(&flat, 0.1).radius, 10.0);
        assert_eq!(graphical_radius(&flat, 0.0).radius, 0.0);

        // smoothed step 0.2 * 1{|y| > 3}
        let step = CylinderGraph::from_fn(grid, |y, _| 0.1 * (1.0 + ((y.abs() - 3.0) / 0.2).tanh()));
        // direct scan oracle: first |y| where |v| + |v'| + |v''| reaches 0.1
        let oracle = {
            let mut r = 10.0f64;
            for k in 0..200_000 {
                let y = k as f64 * 5e-5;
                let s = (y - 3.0) / 0.2;
                let t = s.tanh();
                let sech2 = 1.0 - t * t;
                let v = 0.1 * (1.0 + t);
                let v1 = 0.1 * sech2 / 0.2;
                let v2 = -0.2 * t * sech2 / 0.04;
                if v.abs() + v1.abs() + v2.abs() >= 0.1 {
                    r = y;
                    break;
                }
            }
            r
        };
        let cert = graphical_radius(&step, 0.1);
        assert!((cert.radius - oracle).abs() < 0.06, "{} vs {}", cert.radius, oracle);
        assert!(cert.radius > 2.3 && cert.radius < 3.0);
        // stricter delta never enlarges the radius
        assert!(graphical_radius(&step, 0.05).radius <= cert.radius);

        // failure at the neck
        let neck = CylinderGraph::from_fn(grid, |y, _| -0.5 * (-y * y).exp());
        assert_eq!(graphical_radius(&neck, 0.1).radius, 0.0);
    }

    #[test]
    fn sample_reproduces_cubics() {
        let grid = GridSpec::symmetric(3.0, 31, 12).unwrap();
        let g = CylinderGraph::from_fn(grid, |y, t| 0.01 * y * y * y - 0.2 * y + 0.05 * t.cos());
        let v = g.sample(0.537, 0.0).unwrap();
        let exact = 0.01 * 0.537f64.powi(3) - 0.2 * 0.537 + 0.05;
        assert!((v - exact).abs() < 1e-12);
        assert!(g.sample(10.0, 0.0).is_none());
    }

    #[test]
    fn csv_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let grid = GridSpec::symmetric(2.0, 11, 4).unwrap();
        let g = CylinderGraph::from_fn(grid, |y, t| 0.1 * y * t.sin());
        let p = dir.path().join("g.csv");
        g.write_csv(&p).unwrap();
        let back = CylinderGraph::read_csv(&p).unwrap();
        assert!(back.grid.same_as(&g.grid));
        for (a, b) in back.values.iter().zip(&g.values) {
            assert_eq!(a, b);
        }
    }
}
