use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::error::{Error, Result};

/// Condition number beyond which `XᵀX` is treated as singular.
const MAX_CONDITION: f64 = 1e12;

/// Sufficient statistics of a linear regression on one block of rows.
#[derive(Clone, Debug, PartialEq)]
pub struct LinRegMoments {
    pub xtx: DMatrix<f64>,
    pub xty: DVector<f64>,
    pub yty: f64,
    pub n: usize,
    pub p: usize,
}

impl LinRegMoments {
    /// Accumulates `XᵀX`, `Xᵀy` and `yᵀy` from row-major design rows.
    pub fn from_rows(rows: &[Vec<f64>], y: &[f64]) -> Result<Self> {
        if rows.len() != y.len() {
            return Err(Error::invalid("design rows and response differ in length"));
        }
        let p = rows.first().map_or(0, Vec::len);
        if p == 0 || rows.iter().any(|r| r.len() != p) {
            return Err(Error::invalid(
                "design rows must be non-empty and equal length",
            ));
        }
        let mut xtx = DMatrix::zeros(p, p);
        let mut xty = DVector::zeros(p);
        let mut yty = 0.0;
        for (r, &yi) in rows.iter().zip(y) {
            for a in 0..p {
                xty[a] += r[a] * yi;
                for b in 0..p {
                    xtx[(a, b)] += r[a] * r[b];
                }
            }
            yty += yi * yi;
        }
        Ok(Self {
            xtx,
            xty,
            yty,
            n: y.len(),
            p,
        })
    }

    /// Moments of an intercept-only design.
    pub fn intercept_only(y: &[f64]) -> Self {
        Self {
            xtx: DMatrix::from_element(1, 1, y.len() as f64),
            xty: DVector::from_element(1, y.iter().sum()),
            yty: y.iter().map(|v| v * v).sum(),
            n: y.len(),
            p: 1,
        }
    }

    fn cholesky(&self) -> Result<Cholesky<f64, Dyn>> {
        let eig = SymmetricEigen::new(self.xtx.clone());
        let max = eig.eigenvalues.max();
        let min = eig.eigenvalues.min();
        let cond = if min > 0.0 { max / min } else { f64::INFINITY };
        if cond > MAX_CONDITION {
            return Err(Error::Numerical(format!(
                "XᵀX is singular or ill-conditioned (condition estimate {cond:.3e})"
            )));
        }
        Cholesky::new(self.xtx.clone()).ok_or_else(|| {
            Error::Numerical(format!(
                "XᵀX not positive definite (condition estimate {cond:.3e})"
            ))
        })
    }

    fn check_dof(&self) -> Result<()> {
        if self.n <= self.p {
            return Err(Error::invalid(format!(
                "need more rows than coefficients (n = {}, p = {})",
                self.n, self.p
            )));
        }
        Ok(())
    }

    /// Least-squares coefficients `(XᵀX)⁻¹Xᵀy`.
    pub fn beta_hat(&self) -> Result<DVector<f64>> {
        Ok(self.cholesky()?.solve(&self.xty))
    }

    /// Residual variance estimate `(yᵀy − β̂ᵀXᵀy)/(n − p)`.
    pub fn s2(&self) -> Result<f64> {
        self.check_dof()?;
        let bh = self.beta_hat()?;
        Ok(((self.yty - bh.dot(&self.xty)) / (self.n - self.p) as f64).max(0.0))
    }
}

/// Aligned `(β, σ²)` draws.
#[derive(Clone, Debug, PartialEq)]
pub struct LinRegDraws {
    pub beta: Vec<DVector<f64>>,
    pub sigma2: Vec<f64>,
}

/// Draw from Inv-Gamma(shape, scale), density ∝ x^{-(shape+1)} e^{-scale/x}.
pub fn sample_inv_gamma<R: Rng + ?Sized>(shape: f64, scale: f64, rng: &mut R) -> Result<f64> {
    if !(shape > 0.0 && scale > 0.0 && shape.is_finite() && scale.is_finite()) {
        return Err(Error::InvalidConfiguration(format!(
            "Inv-Gamma parameters must be positive (shape {shape}, scale {scale})"
        )));
    }
    let g: f64 = Gamma::new(shape, 1.0).expect("validated").sample(rng);
    Ok(scale / g)
}

/// Direct two-block sampler for the full-data flat-prior posterior:
/// `σ² ~ Inv-Gamma((N−p)/2, s²(N−p)/2)`, then `β | σ² ~ N(β̂, σ²(XᵀX)⁻¹)`.
pub fn linreg_full_gibbs<R: Rng + ?Sized>(
    moments: &LinRegMoments,
    iters: usize,
    rng: &mut R,
) -> Result<LinRegDraws> {
    linreg_lisa_gibbs(moments, 1, false, iters, rng)
}

/// Sampler for one shard's likelihood-inflated sub-posterior:
/// `σ² ~ Inv-Gamma((Kn−p)/2, K s_j²(n−p)/2)`, then
/// `β | σ² ~ N(β̂_j, (σ²/K)(X_jᵀX_j)⁻¹)`.
///
/// With `modified`, the coefficient draw uses `σ̃² = Kσ²`, i.e. variance
/// `σ²(X_jᵀX_j)⁻¹`. Returned σ² draws are never adjusted.
pub fn linreg_lisa_gibbs<R: Rng + ?Sized>(
    shard: &LinRegMoments,
    k: usize,
    modified: bool,
    iters: usize,
    rng: &mut R,
) -> Result<LinRegDraws> {
    if k == 0 {
        return Err(Error::invalid("K must be positive"));
    }
    shard.check_dof()?;
    let chol = shard.cholesky()?;
    let beta_hat = chol.solve(&shard.xty);
    let s2 = ((shard.yty - beta_hat.dot(&shard.xty)) / (shard.n - shard.p) as f64).max(0.0);
    let kf = k as f64;
    let shape = (kf * shard.n as f64 - shard.p as f64) / 2.0;
    let scale = kf * s2 * (shard.n - shard.p) as f64 / 2.0;
    let l_t = chol.l().transpose();

    let mut out = LinRegDraws {
        beta: Vec::with_capacity(iters),
        sigma2: Vec::with_capacity(iters),
    };
    for _ in 0..iters {
        let sigma2 = sample_inv_gamma(shape, scale, rng)?;
        // modified: σ̃² = Kσ², coefficient variance σ̃²/K
        let working = if modified { kf * sigma2 } else { sigma2 };
        let coef_var = working / kf;
        let z = DVector::from_fn(shard.p, |_, _| rng.sample::<f64, _>(StandardNormal));
        // L⁻ᵀz has covariance (LLᵀ)⁻¹ = (XᵀX)⁻¹
        let noise = l_t
            .solve_upper_triangular(&z)
            .ok_or_else(|| Error::Numerical("triangular solve failed".into()))?;
        out.beta.push(&beta_hat + noise * coef_var.sqrt());
        out.sigma2.push(sigma2);
    }
    Ok(out)
}

/// Draw-by-draw matrix-weighted average `(Σ W_j)⁻¹ Σ W_j β_j⁽ˢ⁾`.
pub fn combine_weighted(
    per_shard: &[Vec<DVector<f64>>],
    weights: &[DMatrix<f64>],
) -> Result<Vec<DVector<f64>>> {
    if per_shard.is_empty() || per_shard.len() != weights.len() {
        return Err(Error::Alignment(format!(
            "{} draw sequences but {} weight matrices",
            per_shard.len(),
            weights.len()
        )));
    }
    let draws = per_shard[0].len();
    if let Some(j) = per_shard.iter().position(|d| d.len() != draws) {
        return Err(Error::Alignment(format!(
            "shard {j} has {} draws, shard 0 has {draws}",
            per_shard[j].len()
        )));
    }
    let p = weights[0].nrows();
    let total = weights.iter().fold(DMatrix::zeros(p, p), |acc, w| acc + w);
    let chol = Cholesky::new(total).ok_or_else(|| {
        Error::Numerical("sum of weight matrices is not positive definite".into())
    })?;
    Ok((0..draws)
        .map(|s| {
            let rhs = per_shard
                .iter()
                .zip(weights)
                .fold(DVector::zeros(p), |acc, (d, w)| acc + w * &d[s]);
            chol.solve(&rhs)
        })
        .collect())
}
