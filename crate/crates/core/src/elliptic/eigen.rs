//! Principal Dirichlet eigenpair of `-Δ` on a ball, in radial form.

use crate::error::{invalid, Error, Result};
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct Eigenpair {
    pub dimension: usize,
    pub radius: f64,
    pub lambda: f64,
    /// Radial nodes `r_i = i R / n`, `i = 0..=n`.
    pub r: Vec<f64>,
    /// `φ(r_i)`, normalized so `φ(0) = 1`; `φ(R) = 0`.
    pub phi: Vec<f64>,
    pub iterations: usize,
    /// Rayleigh quotient of `phi` under the discrete operator.
    pub rayleigh: f64,
}

/// Finite-volume form of `-(r^{N-1} φ')' = λ r^{N-1} φ`: symmetric tridiagonal
/// stiffness `(diag, off)` and diagonal mass `w` over the unknowns `0..n`.
fn radial_operator(dim: usize, radius: f64, n: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let h = radius / n as f64;
    let d = dim as f64;
    let face = |i: usize| ((i as f64 + 0.5) * h).powi(dim as i32 - 1) / h;
    let mut diag = vec![0.0; n];
    let mut off = vec![0.0; n.saturating_sub(1)];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let right = face(i);
        diag[i] += right;
        if i + 1 < n {
            diag[i + 1] += right;
            off[i] = -right;
        }
        w[i] = if i == 0 { (0.5 * h).powi(dim as i32) / d } else { (i as f64 * h).powi(dim as i32 - 1) * h };
    }
    (diag, off, w)
}

/// Solves a symmetric tridiagonal system in place (Thomas algorithm).
fn thomas(diag: &[f64], off: &[f64], rhs: &mut [f64]) -> Result<()> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut m = diag[0];
    if m.abs() < 1e-300 {
        return Err(Error::Singular("tridiagonal pivot 0".into()));
    }
    rhs[0] /= m;
    for i in 1..n {
        c[i - 1] = off[i - 1] / m;
        m = diag[i] - off[i - 1] * c[i - 1];
        if m.abs() < 1e-300 {
            return Err(Error::Singular(format!("tridiagonal pivot {i}")));
        }
        rhs[i] = (rhs[i] - off[i - 1] * rhs[i - 1]) / m;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= c[i] * rhs[i + 1];
    }
    Ok(())
}

fn rayleigh(diag: &[f64], off: &[f64], w: &[f64], x: &[f64]) -> f64 {
    let n = x.len();
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..n {
        let mut ax = diag[i] * x[i];
        if i > 0 {
            ax += off[i - 1] * x[i - 1];
        }
        if i + 1 < n {
            ax += off[i] * x[i + 1];
        }
        num += x[i] * ax;
        den += w[i] * x[i] * x[i];
    }
    num / den
}

/// Smallest eigenvalue and positive eigenfunction of the Dirichlet Laplacian
/// on the ball of radius `radius` in `dim` dimensions, by inverse iteration.
pub fn dirichlet_eigenpair(dim: usize, radius: f64, n: usize) -> Result<Eigenpair> {
    if dim < 1 || n < 32 || !(radius > 0.0 && radius.is_finite()) {
        return invalid("eigenpair needs N >= 1, n >= 32 and R > 0");
    }
    let (diag, off, w) = radial_operator(dim, radius, n);
    let mut x = vec![1.0; n];
    let mut lambda = rayleigh(&diag, &off, &w, &x);
    const MAX_ITER: usize = 500;
    for it in 1..=MAX_ITER {
        let mut y: Vec<f64> = x.iter().zip(&w).map(|(a, b)| a * b).collect();
        thomas(&diag, &off, &mut y)?;
        let norm = y[0];
        y.iter_mut().for_each(|v| *v /= norm);
        let next = rayleigh(&diag, &off, &w, &y);
        let change = (next - lambda).abs();
        x = y;
        lambda = next;
        if change <= 1e-15 * lambda.abs() && it > 2 {
            let h = radius / n as f64;
            let mut phi = x;
            phi.push(0.0);
            return Ok(Eigenpair {
                dimension: dim,
                radius,
                lambda,
                r: (0..=n).map(|i| i as f64 * h).collect(),
                phi,
                iterations: it,
                rayleigh: lambda,
            });
        }
    }
    Err(Error::NonConvergence { what: "inverse iteration", iterations: MAX_ITER, residual: lambda })
}

#[cfg(test)]
mod tests {
    use super::*;

    // Square of the first zero of J0, tabulated.
    const J01_SQ: f64 = 5.783185962946784;

    #[test]
    fn disc_eigenvalue_converges_at_second_order() {
        let a = dirichlet_eigenpair(2, 1.0, 200).unwrap().lambda;
        let b = dirichlet_eigenpair(2, 1.0, 400).unwrap().lambda;
        let rich = (4.0 * b - a) / 3.0;
        assert!((b - J01_SQ).abs() < 1e-3);
        assert!((rich - J01_SQ).abs() < 1e-6, "{rich}");
        let ratio = (a - J01_SQ) / (b - J01_SQ);
        assert!((3.5..4.5).contains(&ratio), "{ratio}");
    }

    #[test]
    fn scaling_and_normalization() {
        let e1 = dirichlet_eigenpair(2, 1.0, 256).unwrap();
        let e2 = dirichlet_eigenpair(2, 2.0, 256).unwrap();
        assert!(((e2.lambda * 4.0 - e1.lambda) / e1.lambda).abs() < 1e-8);
        assert_eq!(e1.phi[0], 1.0);
        assert_eq!(*e1.phi.last().unwrap(), 0.0);
        assert!(e1.phi[..e1.phi.len() - 1].iter().all(|&v| v > 0.0));
        assert!(e1.phi.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn one_dimensional_interval() {
        // N = 1: -φ'' = λφ on (-R, R) with φ(±R) = 0 gives λ = (π / 2R)^2.
        let e = dirichlet_eigenpair(1, 1.0, 400).unwrap();
        let exact = (std::f64::consts::PI / 2.0).powi(2);
        assert!((e.lambda - exact).abs() < 1e-4, "{}", e.lambda);
    }

    #[test]
    fn three_dimensional_ball() {
        // N = 3: λ = (π / R)^2.
        let e = dirichlet_eigenpair(3, 1.0, 400).unwrap();
        assert!((e.lambda - std::f64::consts::PI.powi(2)).abs() < 1e-3, "{}", e.lambda);
    }

    #[test]
    fn rejects_coarse_grids() {
        assert!(dirichlet_eigenpair(2, 1.0, 8).is_err());
    }
}
