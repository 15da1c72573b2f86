use nalgebra::{Rotation3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{advance_to, FlowState};
use crate::geometry::{CylinderGraph, FrameKind, SQRT2};

/// Parabolic time shift `s`, translation `x0 = (alpha, beta1, beta2)` and
/// a rotation `Q` about the axis `(0, d1, d2)`, orthogonal to the cylinder
/// axis. Coordinates are ordered `(y, x1, x2)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpacetimeTransform {
    pub s: f64,
    pub x0: [f64; 3],
    pub d1: f64,
    pub d2: f64,
}

impl SpacetimeTransform {
    pub fn identity() -> Self {
        Self::default()
    }

    pub fn time_shift(s: f64) -> Self {
        SpacetimeTransform { s, ..Self::default() }
    }

    /// `|beta1| + |beta2| + |s|^{1/2} + |Q - Id|` with `|Q - Id| = |d1| + |d2|`.
    /// The axial translation `alpha` is not part of the magnitude.
    pub fn magnitude(&self) -> f64 {
        self.x0[1].abs() + self.x0[2].abs() + self.s.abs().sqrt() + self.d1.abs() + self.d2.abs()
    }

    pub fn rotation(&self) -> Rotation3<f64> {
        Rotation3::from_scaled_axis(Vector3::new(0.0, self.d1, self.d2))
    }

    /// Source time of `M` feeding the transformed slice at `tau`.
    pub fn source_time(&self, tau: f64) -> f64 {
        tau - (1.0 - tau.exp() * self.s).ln()
    }
}

/// Transformed slice together with the smallness quantity
/// `R e^tau |s| + e^{tau/2} |x0| + R |Q - Id|` that controls it.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformedSlice {
    pub state: FlowState,
    pub smallness: f64,
}

/// Slice at `tau` of `N = (1 - e^tau s)^{1/2} Q M_{tau - log(1 - e^tau s)} + e^{tau/2} x0`,
/// regridded onto the grid of `state`.
///
/// `state` is a rescaled slice no later than the source time; it is
/// advanced by the flow to that time first.
pub fn transform_state(
    state: &FlowState,
    phi: &SpacetimeTransform,
    tau: f64,
) -> Result<TransformedSlice> {
    if state.frame.kind != FrameKind::Rescaled {
        return Err(Error::InvalidInput("transform_state needs a rescaled slice".into()));
    }
    let es = tau.exp() * phi.s;
    if es.abs() >= 1.0 {
        return Err(Error::TimeShiftTooLarge(es));
    }
    let grid = state.graph.grid;
    let reach = grid.coverage();
    let x0n = Vector3::from(phi.x0).norm();
    let smallness = reach * es.abs() + (0.5 * tau).exp() * x0n + reach * (phi.d1.abs() + phi.d2.abs());
    if smallness >= 1.0 {
        return Err(Error::ChartExit(format!(
            "transform smallness {smallness} is not below 1"
        )));
    }
    let sigma = phi.source_time(tau);
    if state.time > sigma + 1e-12 {
        return Err(Error::InvalidTime(format!(
            "slice at {} is later than the source time {sigma}",
            state.time
        )));
    }
    let source = advance_to(state, sigma)?;
    let m = &source.graph;
    let lambda = (1.0 - es).sqrt();
    let qinv = phi.rotation().inverse();
    let shift = Vector3::from(phi.x0) * (0.5 * tau).exp();

    let residual = |y: f64, c: f64, s: f64, r: f64| -> Option<f64> {
        let q = Vector3::new(y, r * c, r * s);
        let p = qinv * ((q - shift) / lambda);
        let pr = (p[1] * p[1] + p[2] * p[2]).sqrt();
        let pt = p[2].atan2(p[1]);
        Some(pr - (SQRT2 + m.sample(p[0], pt)?))
    };

    let mut values = vec![0.0; grid.len()];
    for i in 0..grid.n_y {
        let y = grid.y(i);
        for j in 0..grid.n_theta {
            let th = grid.theta(j);
            let (c, s) = (th.cos(), th.sin());
            let exit = || Error::ChartExit(format!("node (y = {y}, theta = {th}) leaves the strip"));
            let mut r0 = SQRT2 + m.values[grid.idx(i, j)];
            let mut f0 = residual(y, c, s, r0).ok_or_else(exit)?;
            let mut r1 = r0 + 1e-4;
            let mut f1 = residual(y, c, s, r1).ok_or_else(exit)?;
            for _ in 0..60 {
                if f1 == 0.0 || (f1 - f0) == 0.0 {
                    break;
                }
                let r2 = r1 - f1 * (r1 - r0) / (f1 - f0);
                r0 = r1;
                f0 = f1;
                r1 = r2;
                f1 = residual(y, c, s, r1).ok_or_else(exit)?;
                if f1.abs() < 1e-15 || (r1 - r0).abs() < 1e-15 {
                    break;
                }
            }
            if !(r1 > 0.0) || f1.abs() > 1e-9 {
                return Err(Error::ChartExit(format!(
                    "no graph point over (y = {y}, theta = {th})"
                )));
            }
            values[grid.idx(i, j)] = r1 - SQRT2;
        }
    }
    let mut out = source.clone();
    out.graph = CylinderGraph::new(grid, values)?;
    out.time = tau;
    Ok(TransformedSlice {
        state: out,
        smallness,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::GridSpec;

    fn cylinder(n_theta: usize) -> FlowState {
        FlowState::rescaled(CylinderGraph::zeros(
            GridSpec::symmetric(8.0, 81, n_theta).unwrap(),
        ))
    }

    #[test]
    fn identity_is_identity() {
        let g = CylinderGraph::from_fn(GridSpec::symmetric(8.0, 81, 8).unwrap(), |y, t| {
            0.01 * (y * 0.3).sin() * t.cos()
        });
        let s = FlowState::rescaled(g);
        let out = transform_state(&s, &SpacetimeTransform::identity(), 0.0).unwrap();
        for (a, b) in out.state.graph.values.iter().zip(&s.graph.values) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn time_shift_on_cylinder() {
        let s = 1e-3;
        let base = cylinder(1);
        let mut early = base.clone();
        early.time = -1.0;
        let out = transform_state(&early, &SpacetimeTransform::time_shift(s), 0.0).unwrap();
        let exact = SQRT2 * ((1.0 - s).sqrt() - 1.0);
        for v in &out.state.graph.values {
            assert!((v - exact).abs() < 1e-9);
            assert!((v / s + SQRT2 / 2.0).abs() < 1e-3);
        }
    }

    #[test]
    fn rotation_on_cylinder() {
        let d2 = 1e-3;
        let phi = SpacetimeTransform { d2, ..Default::default() };
        let out = transform_state(&cylinder(16), &phi, 0.0).unwrap();
        let g = &out.state.graph;
        for i in (0..81).step_by(10) {
            for j in 0..16 {
                let z1 = SQRT2 * g.theta(j).cos();
                let want = d2 * z1 * g.y(i) / SQRT2;
                assert!((g.v(i, j) - want).abs() < d2 * d2 * (1.0 + g.y(i).powi(2)));
            }
        }
    }

    #[test]
    fn oversized_shift_is_rejected() {
        let r = transform_state(&cylinder(1), &SpacetimeTransform::time_shift(0.5), 1.0);
        assert!(matches!(r, Err(Error::TimeShiftTooLarge(_))));
        let r = transform_state(&cylinder(1), &SpacetimeTransform::time_shift(0.2), 0.0);
        assert!(matches!(r, Err(Error::ChartExit(_))));
    }
}
