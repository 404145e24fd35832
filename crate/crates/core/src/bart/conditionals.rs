//! Closed-form pieces of the Gibbs sweep: residual-variance conditional,
//! leaf-mean conditional and the integrated node likelihood used by the tree
//! moves, all under a likelihood exponent κ.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::hyper::{BartHyper, InflationSpec};
use crate::conjugate::sample_inv_gamma;
use crate::error::{Error, Result};

/// Count, sum and sum of squares of the partial residuals in one node.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct NodeSufficientStats {
    pub n: usize,
    pub sum_r: f64,
    pub sum_r2: f64,
}

impl NodeSufficientStats {
    pub fn from_residuals<I: IntoIterator<Item = f64>>(r: I) -> Self {
        r.into_iter().fold(Self::default(), |mut s, v| {
            s.push(v);
            s
        })
    }

    #[inline]
    pub fn push(&mut self, r: f64) {
        self.n += 1;
        self.sum_r += r;
        self.sum_r2 += r * r;
    }

    pub fn merge(&self, other: &Self) -> Self {
        Self {
            n: self.n + other.n,
            sum_r: self.sum_r + other.sum_r,
            sum_r2: self.sum_r2 + other.sum_r2,
        }
    }

    pub fn mean(&self) -> f64 {
        self.sum_r / self.n as f64
    }

    /// Statistics of `r - c`: shifting residuals by the prior leaf mean turns
    /// a N(μ_μ, σ_μ²) leaf prior into a zero-mean one.
    pub fn centered(&self, c: f64) -> Self {
        let n = self.n as f64;
        Self {
            n: self.n,
            sum_r: self.sum_r - n * c,
            sum_r2: self.sum_r2 - 2.0 * c * self.sum_r + n * c * c,
        }
    }
}

/// Log of the leaf-integrated likelihood of one node under a zero-mean
/// N(0, σ_μ²) leaf prior, dropping factors that cancel between trees sharing
/// the same rows:
/// `½ log(σ²/(σ²+κnσ_μ²)) + κ²σ_μ² S² / (2σ²(σ²+κnσ_μ²))`.
pub fn node_log_marginal(
    stats: &NodeSufficientStats,
    sigma2: f64,
    sigma_mu2: f64,
    kappa: f64,
) -> f64 {
    let d = sigma2 + kappa * stats.n as f64 * sigma_mu2;
    0.5 * (sigma2 / d).ln()
        + kappa * kappa * sigma_mu2 * stats.sum_r * stats.sum_r / (2.0 * sigma2 * d)
}

/// Log likelihood ratio of splitting `parent` into `left` and `right`, with
/// the shard likelihood raised to the power `kappa`. Statistics must already
/// be centred on the prior leaf mean. The PRUNE ratio is the negation.
pub fn grow_likelihood_log_ratio(
    parent: &NodeSufficientStats,
    left: &NodeSufficientStats,
    right: &NodeSufficientStats,
    sigma2: f64,
    sigma_mu2: f64,
    kappa: f64,
) -> Result<f64> {
    if !(sigma2 > 0.0) {
        return Err(Error::invalid(format!(
            "sigma2 must be positive, got {sigma2}"
        )));
    }
    let dl = sigma2 + kappa * left.n as f64 * sigma_mu2;
    let dr = sigma2 + kappa * right.n as f64 * sigma_mu2;
    let dp = sigma2 + kappa * parent.n as f64 * sigma_mu2;
    let log_det = 0.5 * (sigma2.ln() + dp.ln() - dl.ln() - dr.ln());
    let quad = kappa * kappa * sigma_mu2 / (2.0 * sigma2)
        * (left.sum_r * left.sum_r / dl + right.sum_r * right.sum_r / dr
            - parent.sum_r * parent.sum_r / dp);
    Ok(log_det + quad)
}

/// Mean and variance of a leaf mean given its residual statistics:
/// `N((σ²/σ_μ² μ_μ + κ n R̄)/(σ²/σ_μ² + κ n), σ²/(σ²/σ_μ² + κ n))`, where σ² is
/// first replaced by κσ² when the inflation adjusts the variance.
pub fn leaf_conditional(
    stats: &NodeSufficientStats,
    sigma2: f64,
    hyper: &BartHyper,
    inflation: &InflationSpec,
) -> Result<(f64, f64)> {
    if stats.n == 0 {
        return Err(Error::Numerical(
            "leaf-mean update reached an empty leaf".into(),
        ));
    }
    let s2 = inflation.working_sigma2(sigma2);
    let ratio = s2 / hyper.sigma_mu2();
    let kn = inflation.kappa * stats.n as f64;
    let denom = ratio + kn;
    let mean = (ratio * hyper.mu_mu + kn * stats.mean()) / denom;
    Ok((mean, s2 / denom))
}

pub fn sample_leaf_mean<R: Rng + ?Sized>(
    stats: &NodeSufficientStats,
    sigma2: f64,
    hyper: &BartHyper,
    inflation: &InflationSpec,
    rng: &mut R,
) -> Result<f64> {
    let (mean, var) = leaf_conditional(stats, sigma2, hyper, inflation)?;
    let z: f64 = StandardNormal.sample(rng);
    Ok(mean + var.sqrt() * z)
}

/// Inv-Gamma (shape, scale) of the residual-variance conditional:
/// shape = τ(ν/2 + 1) − 1 + κn/2, scale = τνλ/2 + κ·ssr/2 with τ the prior
/// exponent.
pub fn sigma2_conditional(
    ssr: f64,
    n: usize,
    nu: f64,
    lambda: f64,
    kappa: f64,
    prior_temper: f64,
) -> Result<(f64, f64)> {
    let shape = prior_temper * (nu / 2.0 + 1.0) - 1.0 + kappa * n as f64 / 2.0;
    let scale = prior_temper * nu * lambda / 2.0 + kappa * ssr / 2.0;
    if !(shape > 0.0) || !(scale > 0.0) {
        return Err(Error::InvalidConfiguration(format!(
            "residual-variance conditional is improper (shape {shape}, scale {scale})"
        )));
    }
    Ok((shape, scale))
}

#[allow(clippy::too_many_arguments)]
pub fn sample_sigma2<R: Rng + ?Sized>(
    ssr: f64,
    n: usize,
    nu: f64,
    lambda: f64,
    kappa: f64,
    prior_temper: f64,
    rng: &mut R,
) -> Result<f64> {
    let (shape, scale) = sigma2_conditional(ssr, n, nu, lambda, kappa, prior_temper)?;
    sample_inv_gamma(shape, scale, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bart::BartSettings;
    use proptest::prelude::*;

    fn hyper(mu_mu: f64, sigma_mu: f64) -> BartHyper {
        BartHyper::fixed(BartSettings::default(), mu_mu, sigma_mu, 1.0).unwrap()
    }

    /// The factored form: κ pulled into σ²/κ with unit exponent.
    fn factored_form(
        p: &NodeSufficientStats,
        l: &NodeSufficientStats,
        r: &NodeSufficientStats,
        sigma2: f64,
        smu2: f64,
        kappa: f64,
    ) -> f64 {
        let s = sigma2 / kappa;
        let dl = s + l.n as f64 * smu2;
        let dr = s + r.n as f64 * smu2;
        let dp = s + p.n as f64 * smu2;
        let ratio = (s * dp / (dl * dr)).sqrt()
            * (smu2 / (2.0 * s)
                * (l.sum_r.powi(2) / dl + r.sum_r.powi(2) / dr - p.sum_r.powi(2) / dp))
                .exp();
        ratio.ln()
    }

    #[test]
    fn zero_residual_split() {
        let l = NodeSufficientStats {
            n: 1,
            sum_r: 0.0,
            sum_r2: 0.0,
        };
        let p = l.merge(&l);
        let (s2, smu2, k) = (2.0, 0.3, 4.0);
        let got = grow_likelihood_log_ratio(&p, &l, &l, s2, smu2, k).unwrap();
        let want = ((s2 * (s2 + 2.0 * k * smu2)).sqrt() / (s2 + k * smu2)).ln();
        assert!((got - want).abs() < 1e-15);
    }

    #[test]
    fn pinned_leaves_are_uninformative() {
        let l = NodeSufficientStats::from_residuals([1.0, 2.0, -0.5]);
        let r = NodeSufficientStats::from_residuals([4.0, 3.0]);
        let v = grow_likelihood_log_ratio(&l.merge(&r), &l, &r, 1.0, 1e-18, 3.0).unwrap();
        assert!(v.abs() < 1e-12);
        assert!(grow_likelihood_log_ratio(&l.merge(&r), &l, &r, 0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn marginal_difference_is_grow_ratio() {
        let l = NodeSufficientStats::from_residuals([1.0, 2.0, -0.5]);
        let r = NodeSufficientStats::from_residuals([4.0, 3.0]);
        let p = l.merge(&r);
        let (s2, smu2, k) = (1.7, 0.2, 3.0);
        let a = node_log_marginal(&l, s2, smu2, k) + node_log_marginal(&r, s2, smu2, k)
            - node_log_marginal(&p, s2, smu2, k);
        let b = grow_likelihood_log_ratio(&p, &l, &r, s2, smu2, k).unwrap();
        assert!((a - b).abs() < 1e-13);
    }

    proptest! {
        #[test]
        fn inflated_form_equals_factored_form(
            sigma2 in 0.01f64..20.0,
            smu2 in 1e-4f64..5.0,
            kappa in 1.0f64..50.0,
            nl in 1usize..1000,
            nr in 1usize..1000,
            ml in -10.0f64..10.0,
            mr in -10.0f64..10.0,
        ) {
            let l = NodeSufficientStats { n: nl, sum_r: ml * nl as f64, sum_r2: 0.0 };
            let r = NodeSufficientStats { n: nr, sum_r: mr * nr as f64, sum_r2: 0.0 };
            let p = l.merge(&r);
            let a = grow_likelihood_log_ratio(&p, &l, &r, sigma2, smu2, kappa).unwrap();
            let b = factored_form(&p, &l, &r, sigma2, smu2, kappa);
            prop_assume!(b.is_finite());
            prop_assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0));
        }

        #[test]
        fn centering_preserves_spread(c in -5.0f64..5.0, xs in proptest::collection::vec(-10.0f64..10.0, 1..50)) {
            let s = NodeSufficientStats::from_residuals(xs.iter().copied());
            let direct = NodeSufficientStats::from_residuals(xs.iter().map(|v| v - c));
            let shifted = s.centered(c);
            prop_assert!((direct.sum_r - shifted.sum_r).abs() < 1e-9);
            prop_assert!((direct.sum_r2 - shifted.sum_r2).abs() < 1e-7 * direct.sum_r2.max(1.0));
        }
    }

    #[test]
    fn single_machine_conditionals_match_displays() {
        let (nu, lambda, n, ssr) = (3.0, 0.7, 40, 12.5);
        let (shape, scale) = sigma2_conditional(ssr, n, nu, lambda, 1.0, 1.0).unwrap();
        assert_eq!(shape, (nu + n as f64) / 2.0);
        assert_eq!(scale, 0.5 * (ssr + lambda * nu));

        let h = hyper(0.3, 0.5);
        let stats = NodeSufficientStats::from_residuals([0.1, 0.4, 0.9, -0.2]);
        let sigma2 = 1.3;
        let (mean, var) = leaf_conditional(&stats, sigma2, &h, &InflationSpec::FULL).unwrap();
        let r = sigma2 / (0.5 * 0.5);
        let ni = 4.0;
        assert!((mean - (r * 0.3 + ni * stats.mean()) / (r + ni)).abs() < 1e-15);
        assert!((var - sigma2 / (r + ni)).abs() < 1e-15);
    }

    #[test]
    fn inflated_sigma_shape() {
        let (nu, lambda, n, k) = (3.0, 0.7, 40, 5.0);
        let (shape, scale) = sigma2_conditional(2.0, n, nu, lambda, k, 1.0).unwrap();
        assert_eq!(shape, (nu + k * n as f64) / 2.0);
        assert_eq!(scale, (k * 2.0 + nu * lambda) / 2.0);
        let (shape0, scale0) = sigma2_conditional(0.0, n, nu, lambda, 1.0, 1.0).unwrap();
        assert_eq!((shape0, scale0), ((nu + n as f64) / 2.0, lambda * nu / 2.0));
        // tempering can drive the shape to zero on tiny data
        assert!(sigma2_conditional(0.0, 0, 0.1, 1.0, 1.0, 0.01).is_err());
    }

    #[test]
    fn adjusted_leaf_conditional_equals_single_machine_form() {
        let h = hyper(-0.2, 0.4);
        let stats = NodeSufficientStats::from_residuals([0.3, 0.1, 0.8, 1.1, -0.4]);
        for k in [2usize, 5, 30] {
            let adj = InflationSpec::for_method(crate::config::Method::ModLisa, k);
            let (m1, v1) = leaf_conditional(&stats, 1.7, &h, &adj).unwrap();
            let (m0, v0) = leaf_conditional(&stats, 1.7, &h, &InflationSpec::FULL).unwrap();
            assert!((m1 - m0).abs() < 1e-14 * m0.abs().max(1.0));
            assert!((v1 - v0).abs() < 1e-14 * v0);
        }
    }

    #[test]
    fn data_dominated_limit() {
        let h = hyper(5.0, 1e4);
        let stats = NodeSufficientStats::from_residuals([1.0, 2.0, 3.0]);
        let (mean, _) = leaf_conditional(&stats, 1.0, &h, &InflationSpec::FULL).unwrap();
        assert!((mean - 2.0).abs() < 1e-6);
        assert!(leaf_conditional(
            &NodeSufficientStats::default(),
            1.0,
            &h,
            &InflationSpec::FULL
        )
        .is_err());
    }
}
