//! The degenerate/nondegenerate dichotomy and the three-annulus property as
//! decision procedures on traces.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::evolve_linearized;
use crate::geometry::{Boundary, CylinderGraph, SQRT2};
use crate::metrics::{self, DistanceTrace, StopReason, TraceRow};
use crate::spectral::hermite;

/// Rates with `|rate|` at most this count as the zero eigenvalue.
pub const NONDEGENERATE_BAND: f64 = 0.15;
/// Rates at least this count as degenerate decay.
pub const DEGENERATE_THRESHOLD: f64 = 0.35;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VerdictKind {
    Nondegenerate,
    Degenerate,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SingularityVerdict {
    pub kind: VerdictKind,
    /// Least-squares decay rate of `ln d_C` over the window.
    pub fitted_rate: f64,
    /// `|tau v - (y^2 - 2)/sqrt 2|` (Gaussian norm) at the last snapshot.
    pub profile_residual: f64,
    pub window: (f64, f64),
    /// `tau` times the `(y^2 - 2)` coefficient of `v`, at the last snapshot.
    pub profile_coefficient: f64,
    /// Mean of `tau v(0, tau)` over window snapshots.
    pub center_value: f64,
    /// Slope of `tau |v - P v|` over the window, `P` the projection onto `y^2 - 2`.
    pub shape_trend: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonotonicityCheck {
    /// First index from which every later step grows by at least `e^gamma`.
    pub holds_from: Option<usize>,
    /// Step at which growth stopped after having held: a candidate
    /// counterexample to discrete frequency monotonicity.
    pub counterexample: Option<usize>,
}

/// Checks unit-spaced distances `d_k` for persistent growth `d_{k+1} >= e^gamma d_k`.
pub fn check_discrete_monotonicity(d: &[f64], gamma: f64) -> Result<MonotonicityCheck> {
    if d.len() < 3 {
        return Err(Error::TooShort(format!("{} entries, need 3", d.len())));
    }
    if ((2.0 * gamma).round() - 2.0 * gamma).abs() < 1e-6 {
        return Err(Error::InvalidInput(format!("gamma = {gamma} is a half-integer")));
    }
    let grows: Vec<bool> = d.windows(2).map(|w| w[1] >= gamma.exp() * w[0]).collect();
    let mut holds_from = None;
    for k in (0..grows.len()).rev() {
        if grows[k] {
            holds_from = Some(k);
        } else {
            break;
        }
    }
    let mut counterexample = None;
    let mut seen = false;
    for (k, g) in grows.iter().enumerate() {
        if *g {
            seen = true;
        } else if seen {
            counterexample = Some(k);
            break;
        }
    }
    Ok(MonotonicityCheck {
        holds_from,
        counterexample,
    })
}

/// Least-squares slope of `ys` against `xs`.
pub fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    sxy / sxx
}

/// Decay rate `-d ln d_C / d tau` over rows; NaN if a distance vanishes.
pub fn fitted_rate(rows: &[TraceRow]) -> f64 {
    if rows.len() < 2 || rows.iter().any(|r| !(r.d_c > 0.0)) {
        return f64::NAN;
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.tau).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.d_c.ln()).collect();
    -ls_slope(&xs, &ys)
}

struct ProfileFit {
    coefficient: f64,
    remainder: f64,
    paper_residual: f64,
}

/// Fits `v ~ a (y^2 - 2)` in the Gaussian norm on the whole strip.
fn profile_fit(g: &CylinderGraph, tau: f64) -> Result<ProfileFit> {
    let grid = g.grid;
    let mut p2 = Vec::with_capacity(grid.len());
    for i in 0..grid.n_y {
        for _ in 0..grid.n_theta {
            p2.push(hermite(2, grid.y(i)));
        }
    }
    let cyl = CylinderGraph::zeros(grid);
    let pp = metrics::gaussian_norm(&cyl, &p2, f64::INFINITY)?.powi(2);
    let sum: Vec<f64> = g.values.iter().zip(&p2).map(|(v, p)| v + p).collect();
    let diff: Vec<f64> = g.values.iter().zip(&p2).map(|(v, p)| v - p).collect();
    // polarization keeps every integral a sorted ring sum
    let ip = 0.25
        * (metrics::gaussian_norm(&cyl, &sum, f64::INFINITY)?.powi(2)
            - metrics::gaussian_norm(&cyl, &diff, f64::INFINITY)?.powi(2));
    let a = ip / pp;
    let rem: Vec<f64> = g.values.iter().zip(&p2).map(|(v, p)| v - a * p).collect();
    let remainder = metrics::gaussian_norm(&cyl, &rem, f64::INFINITY)?;
    let paper: Vec<f64> = g
        .values
        .iter()
        .zip(&p2)
        .map(|(v, p)| tau * v - p / SQRT2)
        .collect();
    Ok(ProfileFit {
        coefficient: a,
        remainder,
        paper_residual: metrics::gaussian_norm(&cyl, &paper, f64::INFINITY)?,
    })
}

fn center_value(g: &CylinderGraph) -> f64 {
    let n_t = g.grid.n_theta;
    let mut vals: Vec<f64> = (0..n_t).map(|j| g.sample(0.0, g.theta(j)).unwrap_or(f64::NAN)).collect();
    vals.sort_by(|a, b| a.total_cmp(b));
    vals.iter().sum::<f64>() / n_t as f64
}

/// Classifies a rescaled run from its trace and `(tau, v)` snapshots.
pub fn classify_dichotomy(
    trace: &DistanceTrace,
    snapshots: &[(f64, CylinderGraph)],
) -> Result<SingularityVerdict> {
    let rows = &trace.rows;
    if rows.len() < 3 {
        return Err(Error::TooShort(format!("{} trace rows", rows.len())));
    }
    let (t0, t1) = (rows[0].tau, rows[rows.len() - 1].tau);
    if !(t1 - t0 >= 6.0) {
        return Err(Error::TooShort(format!("trace spans tau in [{t0}, {t1}]")));
    }
    let start = t1 - (t1 - t0) / 3.0;
    let window: Vec<TraceRow> = rows.iter().filter(|r| r.tau >= start - 1e-9).copied().collect();
    if matches!(
        trace.stop_reason,
        Some(StopReason::MinRadius | StopReason::Graphicality)
    ) {
        return Err(Error::LostGraphicality(format!(
            "run ended by {}",
            trace.stop_reason.map_or("", |s| s.as_str())
        )));
    }
    if let Some(r) = window.iter().find(|r| r.graph_radius == 0.0) {
        return Err(Error::LostGraphicality(format!(
            "graphical radius 0 at tau = {}",
            r.tau
        )));
    }
    let rate = fitted_rate(&window);
    let snaps: Vec<&(f64, CylinderGraph)> = snapshots
        .iter()
        .filter(|(tau, _)| *tau >= start - 1e-9 && *tau <= t1 + 1e-9)
        .collect();
    let mut taus = Vec::new();
    let mut remainders = Vec::new();
    let mut centers = Vec::new();
    let mut last_fit = None;
    for (tau, g) in &snaps {
        let fit = profile_fit(g, *tau)?;
        taus.push(*tau);
        remainders.push(tau * fit.remainder);
        centers.push(tau * center_value(g));
        last_fit = Some((*tau, fit));
    }
    let shape_trend = if taus.len() >= 2 {
        ls_slope(&taus, &remainders)
    } else {
        f64::NAN
    };
    let (profile_coefficient, profile_residual) = match &last_fit {
        Some((tau, f)) => (tau * f.coefficient, f.paper_residual),
        None => (f64::NAN, f64::NAN),
    };
    let center = if centers.is_empty() {
        f64::NAN
    } else {
        centers.iter().sum::<f64>() / centers.len() as f64
    };
    let kind = if rate.abs() <= NONDEGENERATE_BAND && shape_trend < 0.0 {
        VerdictKind::Nondegenerate
    } else if rate >= DEGENERATE_THRESHOLD {
        VerdictKind::Degenerate
    } else {
        VerdictKind::Inconclusive
    };
    Ok(SingularityVerdict {
        kind,
        fitted_rate: rate,
        profile_residual,
        window: (window[0].tau, t1),
        profile_coefficient,
        center_value: center,
        shape_trend,
    })
}

/// Linearized evolution of `v0` sampled every `interval`, as a trace of the
/// graph `sqrt 2 + v` plus snapshots.
pub fn linearized_run(
    v0: &CylinderGraph,
    tau_end: f64,
    interval: f64,
    kappa2: f64,
    r0: f64,
) -> Result<(DistanceTrace, Vec<(f64, CylinderGraph)>)> {
    let mut trace = DistanceTrace::new(kappa2, r0);
    let mut snaps = Vec::new();
    let mut cur = v0.clone();
    let n = (tau_end / interval).round() as usize;
    for k in 0..=n {
        let tau = k as f64 * interval;
        if k > 0 {
            cur = evolve_linearized(&cur, interval, 0.5, Boundary::Quadratic)?;
        }
        let r_of_tau = metrics::radius_schedule(tau, kappa2, r0)?;
        let min_radius = cur.min_radius();
        let graph_radius = if min_radius > 0.0 {
            crate::geometry::graphical_radius(&cur, 0.1).radius
        } else {
            0.0
        };
        trace.rows.push(TraceRow {
            tau,
            t: -(-tau).exp(),
            d_c: metrics::distance_to_cylinder(&cur, [0.0; 3], 1.0),
            norm_br: metrics::graph_norm(&cur, r_of_tau).unwrap_or(f64::NAN),
            r_of_tau,
            freq_ratio: f64::NAN,
            min_radius,
            graph_radius,
        });
        snaps.push((tau, cur.clone()));
    }
    trace.fill_frequency_ratios(0.25 * interval.min(1.0));
    trace.stop_reason = Some(StopReason::TauMax);
    Ok((trace, snaps))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnulusParams {
    pub lambda1: f64,
    pub lambda2: f64,
    pub kappa3: f64,
    pub radius: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnulusOutcome {
    pub premise_a: bool,
    pub premise_b: bool,
    pub premise_c: bool,
    pub premise_holds: bool,
    pub conclusion_holds: bool,
    /// `ln(|v(1)| / |v(0)|)`.
    pub growth1: f64,
    /// `ln(|v(2)| / |v(1)|)`.
    pub growth2: f64,
    /// Step-one growth between `lambda1` and `lambda2`.
    pub flagged: bool,
}

/// Evaluates the three-annulus hypotheses and conclusion on slices at
/// `tau = 0, 1, 2` of a perturbation `v` over the cylinder.
pub fn three_annulus_slices(
    slices: [&CylinderGraph; 3],
    p: AnnulusParams,
) -> Result<AnnulusOutcome> {
    let mut norms = [0.0; 3];
    let mut sup: f64 = 0.0;
    for (k, v) in slices.iter().enumerate() {
        if v.grid.coverage() < p.radius {
            return Err(Error::InsufficientCoverage(format!(
                "strip covers {} < R = {}",
                v.grid.coverage(),
                p.radius
            )));
        }
        let cyl = CylinderGraph::zeros(v.grid);
        norms[k] = metrics::gaussian_norm(&cyl, &v.values, p.radius)?;
        for i in 0..v.grid.n_y {
            let y = v.y(i);
            if y * y + 2.0 < p.radius * p.radius {
                for j in 0..v.grid.n_theta {
                    sup = sup.max(v.v(i, j).abs());
                }
            }
        }
    }
    let premise_a = sup < p.delta;
    let premise_b = norms[1] >= p.lambda1.exp() * norms[0];
    let premise_c = norms[1] >= p.delta * (-p.radius * p.radius / (8.0 + 2.0 * p.kappa3)).exp();
    let premise_holds = premise_a && premise_b && premise_c;
    let growth1 = (norms[1] / norms[0]).ln();
    let growth2 = (norms[2] / norms[1]).ln();
    Ok(AnnulusOutcome {
        premise_a,
        premise_b,
        premise_c,
        premise_holds,
        conclusion_holds: norms[2] >= p.lambda2.exp() * norms[1],
        growth1,
        growth2,
        flagged: premise_holds && growth1 < p.lambda2,
    })
}

/// Three-annulus check under linearized evolution from `v0`.
pub fn three_annulus_check(v0: &CylinderGraph, p: AnnulusParams) -> Result<AnnulusOutcome> {
    let v1 = evolve_linearized(v0, 1.0, 0.5, Boundary::Quadratic)?;
    let v2 = evolve_linearized(&v1, 1.0, 0.5, Boundary::Quadratic)?;
    three_annulus_slices([v0, &v1, &v2], p)
}
