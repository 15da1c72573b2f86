//! Eigenbasis of the drift operator `L v = v_yy + v_tt / 2 - (y/2) v_y + v`
//! on the cylinder and Gaussian-weighted projections onto it.
//!
//! The `y`-factors are the monic Hermite polynomials orthogonal for
//! `e^{-y^2/4}`: `p_m(y) = 2^{m/2} He_m(y / sqrt 2)`, so `p_1 = y`,
//! `p_2 = y^2 - 2`, `p_3 = y^3 - 6y`.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{CylinderGraph, GridSpec};
use crate::io::fmt17;

/// Strip half-length needed before a projection is trusted.
pub const Y_QUAD_MIN: f64 = 12.0;

/// `e^{-1/2}`: the Gaussian weight's value on the cylinder's cross-section.
const CROSS_SECTION: f64 = 0.606_530_659_712_633_4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parity {
    Cos,
    Sin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EigenIndex {
    pub m: u32,
    pub n: u32,
    pub parity: Parity,
}

impl EigenIndex {
    /// Index with the parity forced to `Cos` when `n = 0`.
    pub fn new(m: u32, n: u32, parity: Parity) -> Self {
        let parity = if n == 0 { Parity::Cos } else { parity };
        EigenIndex { m, n, parity }
    }

    pub fn axial(m: u32) -> Self {
        Self::new(m, 0, Parity::Cos)
    }
}

impl fmt::Display for EigenIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.n, self.parity) {
            (0, _) => write!(f, "({},0)", self.m),
            (n, Parity::Cos) => write!(f, "({},{},cos)", self.m, n),
            (n, Parity::Sin) => write!(f, "({},{},sin)", self.m, n),
        }
    }
}

/// An element of `Z/2`, stored as twice its value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct HalfInt(pub i64);

impl HalfInt {
    pub fn value(self) -> f64 {
        self.0 as f64 / 2.0
    }
}

impl fmt::Display for HalfInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0 % 2 == 0 {
            write!(f, "{}", self.0 / 2)
        } else {
            write!(f, "{}/2", self.0)
        }
    }
}

/// `lambda(m, n) = 1 - m/2 - n^2/2`.
pub fn eigenvalue(idx: EigenIndex) -> HalfInt {
    HalfInt(2 - idx.m as i64 - (idx.n as i64) * (idx.n as i64))
}

/// Monic Hermite polynomial `p_m` for the weight `e^{-y^2/4}`.
pub fn hermite(m: u32, y: f64) -> f64 {
    let (mut prev, mut cur) = (0.0, 1.0);
    for k in 0..m {
        let next = y * cur - 2.0 * k as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// `(p_m, p_m', p_m'')` using `p_m' = m p_{m-1}`.
pub fn hermite_with_derivs(m: u32, y: f64) -> (f64, f64, f64) {
    let p = hermite(m, y);
    let d1 = if m >= 1 { m as f64 * hermite(m - 1, y) } else { 0.0 };
    let d2 = if m >= 2 {
        (m * (m - 1)) as f64 * hermite(m - 2, y)
    } else {
        0.0
    };
    (p, d1, d2)
}

fn trig(idx: EigenIndex, theta: f64) -> f64 {
    match (idx.n, idx.parity) {
        (0, _) => 1.0,
        (n, Parity::Cos) => (n as f64 * theta).cos(),
        (n, Parity::Sin) => (n as f64 * theta).sin(),
    }
}

pub fn eigenfunction_eval(idx: EigenIndex, y: f64, theta: f64) -> f64 {
    hermite(idx.m, y) * trig(idx, theta)
}

/// `int_C phi^2 e^{-|x|^2/4} dA` in closed form.
pub fn norm_sq(idx: EigenIndex) -> f64 {
    let axial = 2.0 * PI.sqrt() * 2f64.powi(idx.m as i32) * factorial(idx.m);
    let angular = if idx.n == 0 { 2.0 * PI } else { PI };
    std::f64::consts::SQRT_2 * CROSS_SECTION * axial * angular
}

fn factorial(m: u32) -> f64 {
    (1..=m).fold(1.0, |acc, k| acc * k as f64)
}

/// Gaussian area of the cylinder, `4 sqrt(2) pi^{3/2} e^{-1/2}`.
pub fn gaussian_area() -> f64 {
    norm_sq(EigenIndex::axial(0))
}

/// Basis indices up to degree `m_max` and frequency `n_max`, ordered by `(m, n, parity)`.
pub fn basis(cutoff: (u32, u32)) -> Vec<EigenIndex> {
    let mut out = Vec::new();
    for m in 0..=cutoff.0 {
        for n in 0..=cutoff.1 {
            out.push(EigenIndex::new(m, n, Parity::Cos));
            if n > 0 {
                out.push(EigenIndex::new(m, n, Parity::Sin));
            }
        }
    }
    out
}

/// Gauss–Hermite rule for `int f(y) e^{-y^2/4} dy` (Golub–Welsch).
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut jac = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let b = (k as f64 / 2.0).sqrt();
        jac[(k, k - 1)] = b;
        jac[(k - 1, k)] = b;
    }
    let eig = SymmetricEigen::new(jac);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|k| {
            let v0 = eig.eigenvectors[(0, k)];
            // physicists' node xi maps to y = 2 xi, dy e^{-y^2/4} = 2 e^{-xi^2} dxi
            (2.0 * eig.eigenvalues[k], 2.0 * PI.sqrt() * v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub index: EigenIndex,
    pub lambda: HalfInt,
    pub coeff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralCoeffs {
    pub cutoff: (u32, u32),
    pub entries: Vec<Coefficient>,
    /// Gaussian norm of `v` minus its projection.
    pub residual_norm: f64,
    /// Gaussian norm of `v` itself, same quadrature.
    pub total_norm: f64,
}

impl SpectralCoeffs {
    pub fn get(&self, idx: EigenIndex) -> f64 {
        let idx = EigenIndex::new(idx.m, idx.n, idx.parity);
        self.entries
            .iter()
            .find(|e| e.index == idx)
            .map_or(0.0, |e| e.coeff)
    }

    /// `sum c_k^2 |phi_k|^2`.
    pub fn projected_norm_sq(&self) -> f64 {
        self.entries
            .iter()
            .map(|e| e.coeff * e.coeff * norm_sq(e.index))
            .sum()
    }

    pub fn synthesize(&self, grid: GridSpec) -> CylinderGraph {
        CylinderGraph::from_fn(grid, |y, t| {
            self.entries
                .iter()
                .map(|e| e.coeff * eigenfunction_eval(e.index, y, t))
                .sum()
        })
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["m", "n", "parity", "lambda", "coeff"])?;
        for e in &self.entries {
            let parity = match e.index.parity {
                Parity::Cos => "cos",
                Parity::Sin => "sin",
            };
            w.write_record([
                e.index.m.to_string(),
                e.index.n.to_string(),
                parity.to_string(),
                fmt17(e.lambda.value()),
                fmt17(e.coeff),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Trapezoid weights in `y` times the Gaussian factor and cylinder area element.
fn axial_weights(grid: &GridSpec) -> Vec<f64> {
    let h = grid.h_y();
    (0..grid.n_y)
        .map(|i| {
            let end = if i == 0 || i + 1 == grid.n_y { 0.5 } else { 1.0 };
            let y = grid.y(i);
            end * h * (-y * y / 4.0).exp() * std::f64::consts::SQRT_2 * CROSS_SECTION
        })
        .collect()
}

/// Gaussian inner products of a grid function against the basis up to `cutoff`.
///
/// The integrand decays like `e^{-y^2/4}`, so the trapezoid rule on the grid
/// nodes converges faster than any power of `h_y`.
pub fn project(v: &CylinderGraph, cutoff: (u32, u32)) -> Result<SpectralCoeffs> {
    let grid = v.grid;
    let coverage = grid.coverage();
    if coverage < Y_QUAD_MIN {
        return Err(Error::QuadratureUnderresolved {
            coverage,
            required: Y_QUAD_MIN,
        });
    }
    let n_t = grid.n_theta;
    if n_t > 1 && (n_t as u32) <= 2 * cutoff.1 {
        return Err(Error::InvalidInput(format!(
            "n_theta = {n_t} aliases angular frequency {}",
            cutoff.1
        )));
    }
    let wy = axial_weights(&grid);
    let ht = grid.h_theta();
    let inner = |f: &dyn Fn(usize, usize) -> f64| -> f64 {
        let mut acc = 0.0;
        for (i, w) in wy.iter().enumerate() {
            let mut ring = 0.0;
            for j in 0..n_t {
                ring += f(i, j);
            }
            acc += w * ring * ht;
        }
        acc
    };
    let mut entries = Vec::new();
    for idx in basis(cutoff) {
        let coeff = if n_t == 1 && idx.n > 0 {
            0.0
        } else {
            let ip = inner(&|i, j| v.v(i, j) * eigenfunction_eval(idx, grid.y(i), grid.theta(j)));
            ip / norm_sq(idx)
        };
        entries.push(Coefficient {
            index: idx,
            lambda: eigenvalue(idx),
            coeff,
        });
    }
    let total = inner(&|i, j| v.v(i, j).powi(2)).sqrt();
    let residual = inner(&|i, j| {
        let y = grid.y(i);
        let t = grid.theta(j);
        let approx: f64 = entries
            .iter()
            .map(|e| e.coeff * eigenfunction_eval(e.index, y, t))
            .sum();
        (v.v(i, j) - approx).powi(2)
    })
    .sqrt();
    Ok(SpectralCoeffs {
        cutoff,
        entries,
        residual_norm: residual,
        total_norm: total,
    })
}

/// Tridiagonal coefficients of the axial part `u'' - (y/2) u' + u` on the
/// interior nodes: `(sub, diag, sup)` with `sub[i]` multiplying `u_{i-1}`.
pub fn axial_stencil(h: f64, y: f64) -> (f64, f64, f64) {
    let d = 1.0 / (h * h);
    (d + y / (4.0 * h), 1.0 - 2.0 * d, d - y / (4.0 * h))
}

/// Eigenvalues of the finite-difference operator on a strip `|y| <= half_length`
/// with `n_y` nodes (Dirichlet truncation) and `n_theta` angular nodes.
///
/// The axial part is symmetrized by the discrete Gaussian weight and solved
/// densely; the angular part is diagonal in Fourier modes. Each returned index
/// `(m, n)` is paired with the `m`-th largest axial eigenvalue plus the
/// angular symbol of frequency `n`.
pub fn discrete_spectrum(
    half_length: f64,
    n_y: usize,
    n_theta: usize,
    cutoff: (u32, u32),
) -> Result<Vec<(EigenIndex, f64)>> {
    let grid = GridSpec::symmetric(half_length, n_y, n_theta)?;
    let h = grid.h_y();
    let n = n_y - 2;
    let mut mat = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        let y = grid.y(k + 1);
        let (_, diag, sup) = axial_stencil(h, y);
        mat[(k, k)] = diag;
        if k + 1 < n {
            let (sub_next, _, _) = axial_stencil(h, grid.y(k + 2));
            let off = (sup * sub_next).sqrt();
            mat[(k, k + 1)] = off;
            mat[(k + 1, k)] = off;
        }
    }
    let mut axial: Vec<f64> = SymmetricEigen::new(mat).eigenvalues.iter().copied().collect();
    axial.sort_by(|a, b| b.total_cmp(a));
    let ht = grid.h_theta();
    let angular = |freq: u32| -> f64 {
        if n_theta == 1 {
            0.0
        } else {
            -(2.0 - 2.0 * (freq as f64 * ht).cos()) / (2.0 * ht * ht)
        }
    };
    let mut out = Vec::new();
    for idx in basis(cutoff) {
        if n_theta == 1 && idx.n > 0 {
            continue;
        }
        out.push((idx, axial[idx.m as usize] + angular(idx.n)));
    }
    Ok(out)
}

/// Weights `w_i` making the finite-difference axial operator symmetric:
/// `w_{i+1} / w_i = sup_i / sub_{i+1}`, close to `e^{-y^2/4}`. Normalized to
/// peak 1.
pub fn discrete_weight(grid: &GridSpec) -> Vec<f64> {
    let h = grid.h_y();
    let mut logw = vec![0.0; grid.n_y];
    for i in 0..grid.n_y - 1 {
        let (_, _, sup) = axial_stencil(h, grid.y(i));
        let (sub, _, _) = axial_stencil(h, grid.y(i + 1));
        logw[i + 1] = logw[i] + (sup / sub).ln();
    }
    let top = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    logw.iter().map(|l| (l - top).exp()).collect()
}

/// Removes the components along modes with `m <= 2` (exact eigenvectors of
/// the discrete operator), using the inner product that makes it symmetric.
/// Cuts the round-off seeds of growing modes out of data meant to decay.
pub fn remove_discrete_modes(v: &CylinderGraph, modes: &[EigenIndex]) -> Result<CylinderGraph> {
    if let Some(m) = modes.iter().find(|m| m.m > 2) {
        return Err(Error::InvalidInput(format!(
            "mode {m} is not an exact discrete eigenvector"
        )));
    }
    let grid = v.grid;
    let w = discrete_weight(&grid);
    let mut out = v.clone();
    let mut basis_vecs: Vec<Vec<f64>> = Vec::new();
    for m in modes {
        if grid.n_theta == 1 && m.n > 0 {
            continue;
        }
        let mut phi: Vec<f64> = (0..grid.len())
            .map(|k| eigenfunction_eval(*m, grid.y(k / grid.n_theta), grid.theta(k % grid.n_theta)))
            .collect();
        for b in &basis_vecs {
            let c = weighted_dot(&grid, &w, &phi, b) / weighted_dot(&grid, &w, b, b);
            phi.iter_mut().zip(b).for_each(|(p, q)| *p -= c * q);
        }
        let c = weighted_dot(&grid, &w, &out.values, &phi) / weighted_dot(&grid, &w, &phi, &phi);
        out.values.iter_mut().zip(&phi).for_each(|(x, q)| *x -= c * q);
        basis_vecs.push(phi);
    }
    Ok(out)
}

fn weighted_dot(grid: &GridSpec, w: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 0..grid.n_y {
        let mut ring = 0.0;
        for j in 0..grid.n_theta {
            let k = grid.idx(i, j);
            ring += a[k] * b[k];
        }
        acc += w[i] * ring;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn listed_eigenvalues() {
        assert_eq!(eigenvalue(EigenIndex::axial(0)), HalfInt(2));
        assert_eq!(eigenvalue(EigenIndex::axial(1)).value(), 0.5);
        assert_eq!(eigenvalue(EigenIndex::new(0, 1, Parity::Sin)).value(), 0.5);
        assert_eq!(eigenvalue(EigenIndex::axial(2)).value(), 0.0);
        assert_eq!(eigenvalue(EigenIndex::new(1, 1, Parity::Cos)).value(), 0.0);
        assert_eq!(eigenvalue(EigenIndex::axial(3)).to_string(), "-1/2");
    }

    #[test]
    fn eigenfunction_values() {
        assert_eq!(eigenfunction_eval(EigenIndex::axial(1), 1.7, 0.3), 1.7);
        let y: f64 = 1.3;
        assert!((eigenfunction_eval(EigenIndex::axial(2), y, 0.0) - (y * y - 2.0)).abs() < 1e-15);
        let t: f64 = 0.7;
        let z1y = (2f64.sqrt() * t.cos()) * y;
        let v = eigenfunction_eval(EigenIndex::new(1, 1, Parity::Cos), y, t);
        assert!((v - z1y / 2f64.sqrt()).abs() < 1e-15);
    }

    fn apply_l(idx: EigenIndex, y: f64, t: f64) -> f64 {
        let (p, d1, d2) = hermite_with_derivs(idx.m, y);
        let n2 = (idx.n * idx.n) as f64;
        let tr = trig(idx, t);
        d2 * tr - 0.5 * n2 * p * tr - 0.5 * y * d1 * tr + p * tr
    }

    proptest! {
        #[test]
        fn eigen_relation(m in 0u32..9, n in 0u32..4, sin in any::<bool>(), y in -6.0f64..6.0, t in 0.0f64..6.3) {
            let idx = EigenIndex::new(m, n, if sin { Parity::Sin } else { Parity::Cos });
            let lhs = apply_l(idx, y, t);
            let rhs = eigenvalue(idx).value() * eigenfunction_eval(idx, y, t);
            prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + rhs.abs()));
        }
    }

    #[test]
    fn hermite_derivative_against_differences() {
        let y = 0.83;
        let h = 1e-5;
        for m in 0..8 {
            let (_, d1, _) = hermite_with_derivs(m, y);
            let fd = (hermite(m, y + h) - hermite(m, y - h)) / (2.0 * h);
            assert!((d1 - fd).abs() < 1e-6 * (1.0 + d1.abs()));
        }
    }

    #[test]
    fn gram_matrix_is_identity() {
        let (nodes, weights) = gauss_hermite(30);
        let idx: Vec<EigenIndex> = basis((6, 3)).into_iter().take(20).collect();
        let nt = 32;
        for a in &idx {
            for b in &idx {
                let mut g = 0.0;
                for (y, w) in nodes.iter().zip(&weights) {
                    for j in 0..nt {
                        let t = 2.0 * PI * j as f64 / nt as f64;
                        g += w * eigenfunction_eval(*a, *y, t) * eigenfunction_eval(*b, *y, t);
                    }
                }
                g *= 2.0 * PI / nt as f64 * std::f64::consts::SQRT_2 * CROSS_SECTION;
                let g = g / (norm_sq(*a) * norm_sq(*b)).sqrt();
                let expect = if a == b { 1.0 } else { 0.0 };
                assert!((g - expect).abs() < 1e-6, "{a} {b} {g}");
            }
        }
    }

    #[test]
    fn gaussian_area_value() {
        let closed = 4.0 * 2f64.sqrt() * PI.powf(1.5) * (-0.5f64).exp();
        assert!((gaussian_area() - closed).abs() < 1e-12);
        assert!((gaussian_area() - 19.105).abs() < 1e-3);
        let (_, w) = gauss_hermite(20);
        let quad: f64 = w.iter().sum::<f64>() * 2.0 * PI * std::f64::consts::SQRT_2 * CROSS_SECTION;
        assert!((quad - closed).abs() < 1e-10);
    }

    fn wide_grid(n_theta: usize) -> GridSpec {
        GridSpec::symmetric(14.0, 561, n_theta).unwrap()
    }

    #[test]
    fn project_single_mode() {
        let g = CylinderGraph::from_fn(wide_grid(1), |y, _| y);
        let c = project(&g, (8, 4)).unwrap();
        assert!((c.get(EigenIndex::axial(1)) - 1.0).abs() < 1e-6);
        for e in &c.entries {
            if e.index != EigenIndex::axial(1) {
                assert!(e.coeff.abs() < 1e-6);
            }
        }
    }

    #[test]
    fn project_affine() {
        let g = CylinderGraph::from_fn(wide_grid(12), |y, _| 3.0 + 2.0 * y);
        let c = project(&g, (8, 4)).unwrap();
        assert!((c.get(EigenIndex::axial(0)) - 3.0).abs() < 1e-9);
        assert!((c.get(EigenIndex::axial(1)) - 2.0).abs() < 1e-9);
        assert!(c.residual_norm < 1e-6);
    }

    #[test]
    fn project_constant_norm() {
        let g = CylinderGraph::constant(wide_grid(1), 1.0);
        let c = project(&g, (2, 0)).unwrap();
        assert!((c.total_norm.powi(2) - gaussian_area()).abs() < 1e-9);
    }

    #[test]
    fn project_requires_coverage() {
        let g = CylinderGraph::zeros(GridSpec::symmetric(8.0, 161, 1).unwrap());
        assert!(matches!(
            project(&g, (4, 0)),
            Err(Error::QuadratureUnderresolved { .. })
        ));
    }

    #[test]
    fn project_synthesize_identity() {
        let grid = wide_grid(16);
        let idx = basis((8, 4));
        let entries: Vec<Coefficient> = idx
            .iter()
            .enumerate()
            .map(|(k, i)| Coefficient {
                index: *i,
                lambda: eigenvalue(*i),
                coeff: ((k as f64) * 0.37).sin() / (norm_sq(*i)).sqrt(),
            })
            .collect();
        let src = SpectralCoeffs {
            cutoff: (8, 4),
            entries,
            residual_norm: 0.0,
            total_norm: 0.0,
        };
        let back = project(&src.synthesize(grid), (8, 4)).unwrap();
        for (a, b) in src.entries.iter().zip(&back.entries) {
            assert!((a.coeff - b.coeff).abs() < 1e-8, "{}", a.index);
        }
    }

    #[test]
    fn parseval() {
        let g = CylinderGraph::from_fn(wide_grid(16), |y, t| (0.3 * y).sin() * (1.0 + 0.2 * t.cos()) + 0.1 * (-y * y).exp());
        let c = project(&g, (8, 4)).unwrap();
        let lhs = c.projected_norm_sq() + c.residual_norm.powi(2);
        assert!((lhs - c.total_norm.powi(2)).abs() < 1e-8 * c.total_norm.powi(2));
    }

    #[test]
    fn discrete_weight_tracks_gaussian() {
        let grid = GridSpec::symmetric(6.0, 121, 1).unwrap();
        let w = discrete_weight(&grid);
        for i in 0..grid.n_y {
            let y = grid.y(i);
            let tol = 2e-3 * (1.0 + y.powi(4));
            assert!((w[i] / (-y * y / 4.0).exp() - 1.0).abs() < tol, "y = {y}");
        }
    }

    #[test]
    fn removal_kills_listed_modes() {
        let grid = GridSpec::symmetric(12.0, 241, 1).unwrap();
        let v = CylinderGraph::from_fn(grid, |y, _| 2.0 + 0.5 * y + hermite(3, y));
        let out = remove_discrete_modes(&v, &[EigenIndex::axial(0), EigenIndex::axial(1)]).unwrap();
        let w = discrete_weight(&grid);
        let ys: Vec<f64> = (0..grid.n_y).map(|i| grid.y(i)).collect();
        let ones = vec![1.0; grid.n_y];
        let scale = weighted_dot(&grid, &w, &out.values, &out.values).sqrt();
        assert!(weighted_dot(&grid, &w, &out.values, &ones).abs() < 1e-12 * scale);
        assert!(weighted_dot(&grid, &w, &out.values, &ys).abs() < 1e-12 * scale);
        let c = project(&out, (4, 0)).unwrap();
        assert!(c.get(EigenIndex::axial(1)).abs() < 1e-2);
        assert!((c.get(EigenIndex::axial(3)) - 1.0).abs() < 1e-3);
        assert!(remove_discrete_modes(&v, &[EigenIndex::axial(3)]).is_err());
    }

    #[test]
    fn discrete_spectrum_listed_modes() {
        let spec = discrete_spectrum(12.0, 401, 64, (2, 1)).unwrap();
        let find = |m, n, p| {
            spec.iter()
                .find(|(i, _)| *i == EigenIndex::new(m, n, p))
                .unwrap()
                .1
        };
        assert!((find(0, 0, Parity::Cos) - 1.0).abs() < 1e-3);
        assert!((find(1, 0, Parity::Cos) - 0.5).abs() < 1e-3);
        assert!((find(0, 1, Parity::Cos) - 0.5).abs() < 1e-3);
        assert!(find(2, 0, Parity::Cos).abs() < 1e-3);
        assert!(find(1, 1, Parity::Sin).abs() < 1e-3);
    }
}
