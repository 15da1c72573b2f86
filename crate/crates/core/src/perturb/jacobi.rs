use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{CylinderGraph, SQRT2};
use crate::metrics::gaussian_inner;

/// Coefficients of `b e^tau + (c1 z1 + c2 z2) e^{tau/2} + d1 z1 y + d2 z2 y`
/// with `z1 = sqrt2 cos theta`, `z2 = sqrt2 sin theta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JacobiFit {
    pub b: f64,
    pub c1: f64,
    pub c2: f64,
    pub d1: f64,
    pub d2: f64,
    /// Gaussian norm of the misfit summed over all samples.
    pub residual: f64,
}

impl JacobiFit {
    pub fn coefficients(&self) -> [f64; 5] {
        [self.b, self.c1, self.c2, self.d1, self.d2]
    }
}

/// `(other - base) / gamma` at matching sample times.
pub fn difference_series(
    base: &[(f64, CylinderGraph)],
    other: &[(f64, CylinderGraph)],
    gamma: f64,
) -> Result<Vec<(f64, CylinderGraph)>> {
    if base.len() != other.len() {
        return Err(Error::GridMismatch(format!(
            "{} base samples against {}",
            base.len(),
            other.len()
        )));
    }
    if !(gamma != 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidInput(format!("normalization gamma = {gamma}")));
    }
    base.iter()
        .zip(other)
        .map(|((tb, gb), (to, go))| {
            if (tb - to).abs() > 1e-9 {
                return Err(Error::GridMismatch(format!("sample times {tb} and {to}")));
            }
            Ok((*tb, go.zip_with(gb, |o, b| (o - b) / gamma)?))
        })
        .collect()
}

fn ansatz(g: &CylinderGraph, tau: f64) -> [Vec<f64>; 5] {
    let grid = g.grid;
    let n = grid.len();
    let mut f: [Vec<f64>; 5] = Default::default();
    for v in f.iter_mut() {
        v.resize(n, 0.0);
    }
    let (e1, eh) = (tau.exp(), (0.5 * tau).exp());
    for i in 0..grid.n_y {
        let y = grid.y(i);
        for j in 0..grid.n_theta {
            let th = grid.theta(j);
            let (z1, z2) = (SQRT2 * th.cos(), SQRT2 * th.sin());
            let k = grid.idx(i, j);
            f[0][k] = e1;
            f[1][k] = eh * z1;
            f[2][k] = eh * z2;
            f[3][k] = z1 * y;
            f[4][k] = z2 * y;
        }
    }
    f
}

/// Least-squares fit of the five-term Jacobi ansatz across all samples.
pub fn jacobi_fit(series: &[(f64, CylinderGraph)]) -> Result<JacobiFit> {
    if series.is_empty() {
        return Err(Error::DegenerateFit("empty series".into()));
    }
    let mut gram = DMatrix::<f64>::zeros(5, 5);
    let mut rhs = DVector::<f64>::zeros(5);
    let mut vv = 0.0;
    for (tau, g) in series {
        let f = ansatz(g, *tau);
        for k in 0..5 {
            for l in k..5 {
                let x = gaussian_inner(g, &f[k], &f[l], f64::INFINITY)?;
                gram[(k, l)] += x;
                if l != k {
                    gram[(l, k)] += x;
                }
            }
            rhs[k] += gaussian_inner(g, &f[k], &g.values, f64::INFINITY)?;
        }
        vv += gaussian_inner(g, &g.values, &g.values, f64::INFINITY)?;
    }
    let scale: Vec<f64> = (0..5).map(|k| gram[(k, k)].max(0.0).sqrt()).collect();
    if scale.iter().any(|s| !(*s > 0.0)) {
        return Err(Error::DegenerateFit("an ansatz term vanishes on the grid".into()));
    }
    let normalized = DMatrix::from_fn(5, 5, |k, l| gram[(k, l)] / (scale[k] * scale[l]));
    let eig = SymmetricEigen::new(normalized.clone()).eigenvalues;
    let (lo, hi) = eig.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &x| (a.min(x), b.max(x)));
    if !(lo > 1e-10 * hi) {
        return Err(Error::DegenerateFit(format!(
            "ansatz Gram matrix condition {}",
            hi / lo
        )));
    }
    let nrhs = DVector::from_fn(5, |k, _| rhs[k] / scale[k]);
    let chol = normalized
        .cholesky()
        .ok_or_else(|| Error::DegenerateFit("Gram matrix is not positive definite".into()))?;
    let y = chol.solve(&nrhs);
    let c: Vec<f64> = (0..5).map(|k| y[k] / scale[k]).collect();
    let cv = DVector::from_vec(c.clone());
    let misfit = vv - 2.0 * cv.dot(&rhs) + (gram * &cv).dot(&cv);
    Ok(JacobiFit {
        b: c[0],
        c1: c[1],
        c2: c[2],
        d1: c[3],
        d2: c[4],
        residual: misfit.max(0.0).sqrt(),
    })
}
