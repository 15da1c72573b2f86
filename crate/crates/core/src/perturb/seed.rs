use crate::error::{Error, Result};
use crate::flow::FlowState;

/// C^2 ramp equal to 1 on `[0, R0-1]` and 0 beyond `R0`.
pub fn cutoff(s: f64, r0: f64) -> f64 {
    let x = s - (r0 - 1.0);
    if x <= 0.0 {
        1.0
    } else if x >= 1.0 {
        0.0
    } else {
        let tau = std::f64::consts::TAU;
        1.0 - (x - (tau * x).sin() / tau)
    }
}

/// Adds `a * cutoff(|x|) * y` to the graph function.
pub fn apply_seed_perturbation(state: &FlowState, a: f64, r0: f64) -> Result<FlowState> {
    if !(r0 >= 1.0) || !a.is_finite() {
        return Err(Error::InvalidInput(format!("seed with a = {a}, R0 = {r0}")));
    }
    if a == 0.0 {
        return Ok(state.clone());
    }
    if a.abs() * r0 > 1.0 {
        return Err(Error::NonGraphical(format!(
            "seed amplitude |a| R0 = {} exceeds 1",
            a.abs() * r0
        )));
    }
    let g = &state.graph;
    let grid = g.grid;
    let mut values = g.values.clone();
    for i in 0..grid.n_y {
        let y = grid.y(i);
        for j in 0..grid.n_theta {
            values[grid.idx(i, j)] += a * cutoff(g.point_norm(i, j), r0) * y;
        }
    }
    let mut out = state.clone();
    out.graph = crate::geometry::CylinderGraph::new(grid, values)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{CylinderGraph, GridSpec};

    #[test]
    fn ramp_is_c2() {
        let r0 = 10.0;
        assert_eq!(cutoff(8.5, r0), 1.0);
        assert_eq!(cutoff(10.0, r0), 0.0);
        assert!((cutoff(9.5, r0) - 0.5).abs() < 1e-15);
        let h = 1e-4;
        for s in [9.0, 10.0] {
            let d2 = |x: f64| (cutoff(x + h, r0) - 2.0 * cutoff(x, r0) + cutoff(x - h, r0)) / (h * h);
            assert!(d2(s - 2.0 * h).abs() < 1e-2 && d2(s + 2.0 * h).abs() < 1e-2);
        }
    }

    #[test]
    fn zero_amplitude_is_identity() {
        let g = CylinderGraph::from_fn(GridSpec::symmetric(6.0, 61, 4).unwrap(), |y, t| {
            0.01 * y * t.cos()
        });
        let s = FlowState::rescaled(g);
        assert_eq!(apply_seed_perturbation(&s, 0.0, 10.0).unwrap(), s);
    }

    #[test]
    fn oversized_seed_is_refused() {
        let s = FlowState::rescaled(CylinderGraph::zeros(GridSpec::symmetric(6.0, 61, 1).unwrap()));
        assert!(matches!(
            apply_seed_perturbation(&s, 0.2, 10.0),
            Err(Error::NonGraphical(_))
        ));
    }
}
