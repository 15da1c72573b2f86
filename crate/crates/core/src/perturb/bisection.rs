use std::fmt::Debug;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{evolve, FlowState, Sampling, StopCondition};
use crate::geometry::{CylinderGraph, GridSpec, SQRT2};
use crate::metrics::StopReason;

/// Threshold found by bisection with the verdicts on either side of it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bracket<V> {
    pub a_star: f64,
    pub lower: (f64, V),
    pub upper: (f64, V),
    pub evaluations: usize,
}

/// Bisects `[lo, hi]` on a verdict-valued family down to width `tol`.
///
/// A verdict matching neither endpoint is treated as a change relative to
/// the lower end.
pub fn neck_location_bisection<V, F>(family: F, lo: f64, hi: f64, tol: f64) -> Result<Bracket<V>>
where
    V: PartialEq + Clone + Debug,
    F: Fn(f64) -> Result<V>,
{
    if !(lo < hi) || !(tol > 0.0) {
        return Err(Error::InvalidInput(format!(
            "bisection interval [{lo}, {hi}] with tol {tol}"
        )));
    }
    let mut lower = (lo, family(lo)?);
    let mut upper = (hi, family(hi)?);
    let mut evaluations = 2;
    if lower.1 == upper.1 {
        return Err(Error::NoSignChange(format!(
            "both ends give {:?}",
            lower.1
        )));
    }
    while upper.0 - lower.0 > tol {
        let mid = 0.5 * (lower.0 + upper.0);
        let v = family(mid)?;
        evaluations += 1;
        if v == lower.1 {
            lower = (mid, v);
        } else {
            upper = (mid, v);
        }
    }
    Ok(Bracket {
        a_star: 0.5 * (lower.0 + upper.0),
        lower,
        upper,
        evaluations,
    })
}

/// Axisymmetric dumbbell in the unrescaled frame: radius `bell` far out
/// and `neck` at `y = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DumbbellSpec {
    pub neck: f64,
    pub bell: f64,
    pub width: f64,
    pub half_length: f64,
    pub n_y: usize,
    /// The run stops once the minimum radius drops below this.
    pub floor: f64,
}

impl Default for DumbbellSpec {
    fn default() -> Self {
        DumbbellSpec {
            neck: 0.5,
            bell: 1.0,
            width: 1.5,
            half_length: 6.0,
            n_y: 121,
            floor: 0.1,
        }
    }
}

impl DumbbellSpec {
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.neck > 0.0) {
            out.push(format!("dumbbell.neck = {} must be positive", self.neck));
        }
        if !(self.bell > 0.0) {
            out.push(format!("dumbbell.bell = {} must be positive", self.bell));
        }
        if !(self.width > 0.0) {
            out.push(format!("dumbbell.width = {} must be positive", self.width));
        }
        if !(self.floor > 0.0 && self.floor < self.neck.min(self.bell)) {
            out.push(format!(
                "dumbbell.floor = {} must lie below both radii",
                self.floor
            ));
        }
        if let Err(e) = GridSpec::symmetric(self.half_length, self.n_y, 1) {
            out.push(format!("dumbbell grid: {e}"));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PinchVerdict {
    CenterPinch,
    OffCenterPinch,
    NoPinch,
}

pub fn dumbbell_profile(spec: &DumbbellSpec) -> Result<CylinderGraph> {
    let grid = GridSpec::symmetric(spec.half_length, spec.n_y, 1)?;
    let g = CylinderGraph::from_fn(grid, |y, _| {
        spec.bell - (spec.bell - spec.neck) * (-(y / spec.width).powi(2)).exp() - SQRT2
    });
    g.check_embedded()?;
    Ok(g)
}

/// Where the unrescaled flow of the dumbbell first reaches the floor.
pub fn dumbbell_verdict(spec: &DumbbellSpec) -> Result<PinchVerdict> {
    let v = spec.violations();
    if !v.is_empty() {
        return Err(Error::Validation(v));
    }
    let g = dumbbell_profile(spec)?;
    let r_max = spec.bell.max(spec.neck);
    let stop = StopCondition {
        tau_max: Some(0.5 * r_max * r_max + 1.0),
        min_radius_floor: Some(spec.floor),
        ..Default::default()
    };
    let sampling = Sampling {
        interval: 0.05,
        ..Default::default()
    };
    let (trace, last) = evolve(FlowState::unrescaled(g, 0.0), &stop, &sampling, &mut [])?;
    if trace.stop_reason != Some(StopReason::MinRadius) {
        return Ok(PinchVerdict::NoPinch);
    }
    let g = &last.graph;
    let mut best = (f64::INFINITY, 0.0);
    for i in 0..g.grid.n_y {
        let r = g.radius(i, 0);
        if r < best.0 {
            best = (r, g.y(i));
        }
    }
    Ok(if best.1.abs() < 1.0 {
        PinchVerdict::CenterPinch
    } else {
        PinchVerdict::OffCenterPinch
    })
}
