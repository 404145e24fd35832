use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const MAX_ITERS: usize = 500;
const GRAD_TOL: f64 = 1e-6;

/// Mode and curvature of a log density.
#[derive(Clone, Debug, PartialEq)]
pub struct LaplaceSummary {
    pub mode: DVector<f64>,
    /// Negative Hessian of the log density at the mode.
    pub neg_hessian: DMatrix<f64>,
}

fn step(theta: f64) -> f64 {
    f64::EPSILON.cbrt() * theta.abs().max(1.0)
}

fn gradient(f: &dyn Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let h = step(x[i]);
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

fn hessian(f: &dyn Fn(&[f64]) -> f64, x: &[f64]) -> DMatrix<f64> {
    let d = x.len();
    let mut h = DMatrix::zeros(d, d);
    let mut probe = x.to_vec();
    let mut eval = |di: f64, dj: f64, i: usize, j: usize| {
        probe[i] += di;
        probe[j] += dj;
        let v = f(&probe);
        probe[i] = x[i];
        probe[j] = x[j];
        v
    };
    for i in 0..d {
        for j in i..d {
            let (hi, hj) = (step(x[i]), step(x[j]));
            let v = (eval(hi, hj, i, j) - eval(hi, -hj, i, j) - eval(-hi, hj, i, j)
                + eval(-hi, -hj, i, j))
                / (4.0 * hi * hj);
            h[(i, j)] = v;
            h[(j, i)] = v;
        }
    }
    h
}

/// Locates the mode of `log_density` by damped Newton ascent on
/// central-difference derivatives and returns the negative Hessian there.
///
/// Fails when no interior maximum with positive-definite curvature is found
/// within the iteration budget (flat or unbounded targets).
pub fn laplace_summary(
    log_density: &dyn Fn(&[f64]) -> f64,
    start: &[f64],
) -> Result<LaplaceSummary> {
    if start.is_empty() {
        return Err(Error::invalid("empty start vector"));
    }
    let mut x = start.to_vec();
    let mut fx = log_density(&x);
    if !fx.is_finite() {
        return Err(Error::Optimization(
            "log density is not finite at the start point".into(),
        ));
    }
    for _ in 0..MAX_ITERS {
        let g = DVector::from_vec(gradient(log_density, &x));
        let neg_h = -hessian(log_density, &x);
        let scale = x.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        if g.norm() < GRAD_TOL * scale {
            if neg_h.clone().cholesky().is_none() {
                return Err(Error::Optimization(
                    "stationary point has no negative-definite curvature (no interior mode)".into(),
                ));
            }
            return Ok(LaplaceSummary {
                mode: DVector::from_vec(x),
                neg_hessian: neg_h,
            });
        }
        let dir = match neg_h.clone().cholesky() {
            Some(c) => c.solve(&g),
            None => g.clone(),
        };
        let mut t = 1.0;
        let mut moved = false;
        for _ in 0..60 {
            let cand: Vec<f64> = x.iter().zip(dir.iter()).map(|(a, d)| a + t * d).collect();
            let fc = log_density(&cand);
            if fc.is_finite() && fc >= fx {
                x = cand;
                fx = fc;
                moved = true;
                break;
            }
            t *= 0.5;
        }
        if !moved {
            return Err(Error::Optimization(
                "line search could not increase the log density".into(),
            ));
        }
    }
    Err(Error::Optimization(format!(
        "gradient norm above tolerance after {MAX_ITERS} iterations"
    )))
}
