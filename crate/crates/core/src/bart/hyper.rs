use statrs::function::gamma::gamma_ur;

use crate::config::Method;
use crate::error::{Error, Result};

/// Proposal probabilities for the four tree moves.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MoveProbs {
    pub grow: f64,
    pub prune: f64,
    pub change: f64,
    pub swap: f64,
}

impl Default for MoveProbs {
    /// GROW/PRUNE/CHANGE at 0.25/0.25/0.4 renormalised with SWAP removed.
    fn default() -> Self {
        Self {
            grow: 0.25 / 0.9,
            prune: 0.25 / 0.9,
            change: 0.4 / 0.9,
            swap: 0.0,
        }
    }
}

impl MoveProbs {
    /// The original four-move mix including SWAP.
    pub fn with_swap() -> Self {
        Self {
            grow: 0.25,
            prune: 0.25,
            change: 0.4,
            swap: 0.1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.grow, self.prune, self.change, self.swap];
        if all.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidConfiguration(format!(
                "move probabilities out of range: {all:?}"
            )));
        }
        if (all.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfiguration(format!(
                "move probabilities must sum to 1: {all:?}"
            )));
        }
        // GROW and PRUNE are each other's reverse move
        if self.grow == 0.0 || self.prune == 0.0 {
            return Err(Error::InvalidConfiguration(
                "GROW and PRUNE must both be possible".into(),
            ));
        }
        Ok(())
    }
}

/// User-facing prior settings; the data-dependent parts are filled in by
/// [`calibrate_hyperparams`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BartSettings {
    pub m: usize,
    pub alpha: f64,
    pub beta_depth: f64,
    pub k: f64,
    pub nu: f64,
    pub q: f64,
    pub move_probs: MoveProbs,
    /// Nodes at this depth or deeper never split. `None` leaves depth unbounded.
    pub max_depth: Option<usize>,
    /// Rescale each shard's response to [-0.5, 0.5] before sampling.
    pub standardize: bool,
}

impl Default for BartSettings {
    fn default() -> Self {
        Self {
            m: 50,
            alpha: 0.95,
            beta_depth: 2.0,
            k: 2.0,
            nu: 3.0,
            q: 0.9,
            move_probs: MoveProbs::default(),
            max_depth: None,
            standardize: false,
        }
    }
}

impl BartSettings {
    pub fn with_trees(mut self, m: usize) -> Self {
        self.m = m;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidConfiguration(what.to_string()));
        if self.m == 0 {
            return bad("tree count must be positive");
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad("alpha must lie in (0, 1)");
        }
        if !(self.beta_depth >= 0.0) {
            return bad("depth penalty must be non-negative");
        }
        if !(self.k > 0.0) || !(self.nu > 0.0) {
            return bad("k and nu must be positive");
        }
        if !(self.q > 0.0 && self.q < 1.0) {
            return bad("q must lie in (0, 1)");
        }
        self.move_probs.validate()
    }
}

/// Fully specified prior: settings plus the leaf-mean and variance-prior
/// scales.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BartHyper {
    pub settings: BartSettings,
    pub mu_mu: f64,
    pub sigma_mu: f64,
    pub lambda: f64,
}

impl BartHyper {
    pub fn fixed(settings: BartSettings, mu_mu: f64, sigma_mu: f64, lambda: f64) -> Result<Self> {
        settings.validate()?;
        if !(sigma_mu > 0.0 && lambda > 0.0 && mu_mu.is_finite()) {
            return Err(Error::InvalidConfiguration(
                "sigma_mu and lambda must be positive".into(),
            ));
        }
        Ok(Self {
            settings,
            mu_mu,
            sigma_mu,
            lambda,
        })
    }

    /// Calibrates against `y` (one worker's own response values).
    pub fn calibrated(settings: BartSettings, y: &[f64]) -> Result<Self> {
        settings.validate()?;
        let c = calibrate_hyperparams(y, settings.m, settings.k, settings.nu, settings.q)?;
        Self::fixed(settings, c.mu_mu, c.sigma_mu, c.lambda)
    }

    pub fn sigma_mu2(&self) -> f64 {
        self.sigma_mu * self.sigma_mu
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Calibration {
    pub mu_mu: f64,
    pub sigma_mu: f64,
    pub lambda: f64,
}

/// P(σ² < x) for σ² ~ Inv-Gamma(shape, scale).
fn inv_gamma_cdf(x: f64, shape: f64, scale: f64) -> f64 {
    gamma_ur(shape, scale / x)
}

/// Solves the leaf-prior system `m μ_μ ∓ k √m σ_μ = y_min, y_max` and picks λ
/// so that `P(σ < σ̂) = q` under `σ² ~ Inv-Gamma(ν/2, νλ/2)`, with σ̂ the
/// sample standard deviation of `y`.
pub fn calibrate_hyperparams(y: &[f64], m: usize, k: f64, nu: f64, q: f64) -> Result<Calibration> {
    if y.len() < 2 {
        return Err(Error::Calibration("need at least two responses".into()));
    }
    if !(q > 0.0 && q < 1.0) || m == 0 || !(k > 0.0) || !(nu > 0.0) {
        return Err(Error::Calibration(format!(
            "invalid settings m={m}, k={k}, nu={nu}, q={q}"
        )));
    }
    let (lo, hi) = y
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
            (a.min(v), b.max(v))
        });
    if !(hi > lo) {
        return Err(Error::Calibration("response is constant".into()));
    }
    let mf = m as f64;
    let mu_mu = (lo + hi) / (2.0 * mf);
    let sigma_mu = (hi - lo) / (2.0 * k * mf.sqrt());

    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let var_hat = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let lambda = solve_lambda(var_hat, nu, q)?;
    Ok(Calibration {
        mu_mu,
        sigma_mu,
        lambda,
    })
}

/// Bisection in log λ on the decreasing map λ ↦ P(σ² < σ̂²).
fn solve_lambda(var_hat: f64, nu: f64, q: f64) -> Result<f64> {
    let cdf = |lambda: f64| inv_gamma_cdf(var_hat, nu / 2.0, nu * lambda / 2.0);
    let (mut lo, mut hi) = (var_hat * 1e-12, var_hat * 1e6);
    if !(cdf(lo) > q && cdf(hi) < q) {
        return Err(Error::Calibration(format!(
            "cannot bracket lambda for q = {q}"
        )));
    }
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if cdf(mid) > q {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi / lo - 1.0 < 1e-14 {
            break;
        }
    }
    Ok((lo * hi).sqrt())
}

/// Likelihood exponent, prior exponent and residual-variance adjustment of a
/// shard sub-posterior.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InflationSpec {
    pub kappa: f64,
    pub prior_temper: f64,
    pub variance_adjust: bool,
}

impl InflationSpec {
    pub const FULL: InflationSpec = InflationSpec {
        kappa: 1.0,
        prior_temper: 1.0,
        variance_adjust: false,
    };

    pub fn for_method(method: Method, k: usize) -> Self {
        let kf = k as f64;
        if k == 1 {
            return Self::FULL;
        }
        match method {
            Method::Full => Self::FULL,
            Method::Lisa => Self {
                kappa: kf,
                prior_temper: 1.0,
                variance_adjust: false,
            },
            Method::ModLisa => Self {
                kappa: kf,
                prior_temper: 1.0,
                variance_adjust: true,
            },
            Method::Cmc => Self {
                kappa: 1.0,
                prior_temper: 1.0 / kf,
                variance_adjust: false,
            },
        }
    }

    /// Residual variance used inside tree and leaf updates.
    pub fn working_sigma2(&self, sigma2: f64) -> f64 {
        if self.variance_adjust {
            self.kappa * sigma2
        } else {
            sigma2
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn leaf_prior_system() {
        let y = [-1.0, 0.3, 1.0];
        let c = calibrate_hyperparams(&y, 50, 2.0, 3.0, 0.9).unwrap();
        assert!(c.mu_mu.abs() < 1e-15);
        assert!((c.sigma_mu - 1.0 / (2.0 * 50f64.sqrt())).abs() < 1e-15);
        assert!((c.sigma_mu - 0.07071).abs() < 1e-5);
    }

    #[test]
    fn constant_response_rejected() {
        assert!(matches!(
            calibrate_hyperparams(&[2.0, 2.0, 2.0], 10, 2.0, 3.0, 0.9),
            Err(Error::Calibration(_))
        ));
    }

    #[test]
    fn lambda_decreases_in_q() {
        let mut prev = f64::INFINITY;
        for q in [0.5, 0.75, 0.9, 0.99, 0.999] {
            let l = solve_lambda(9.0, 3.0, q).unwrap();
            assert!(l < prev);
            prev = l;
        }
        assert!(prev < 0.1);
    }

    /// Inv-Gamma CDF by Simpson quadrature of the density, independent of the
    /// incomplete gamma function used in calibration.
    fn quadrature_cdf(x: f64, shape: f64, scale: f64) -> f64 {
        let ln_norm = shape * scale.ln() - statrs::function::gamma::ln_gamma(shape);
        let dens = |t: f64| {
            if t <= 0.0 {
                0.0
            } else {
                (ln_norm - (shape + 1.0) * t.ln() - scale / t).exp()
            }
        };
        let n = 200_000;
        let h = x / n as f64;
        let mut s = dens(0.0) + dens(x);
        for i in 1..n {
            s += dens(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    #[test]
    fn lambda_matches_quadrature_bisection() {
        let (nu, q, sd) = (3.0, 0.9, 3.0);
        let mut lo = 1e-6;
        let mut hi = 1e3;
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if quadrature_cdf(sd * sd, nu / 2.0, nu * mid / 2.0) > q {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let oracle = 0.5 * (lo + hi);
        let got = solve_lambda(sd * sd, nu, q).unwrap();
        assert!((got - oracle).abs() / oracle < 1e-6, "{got} vs {oracle}");
        assert!((inv_gamma_cdf(9.0, 1.5, 1.5 * got) - 0.9).abs() < 1e-10);
    }

    #[test]
    fn default_moves() {
        let m = MoveProbs::default();
        assert!((m.grow - 0.278).abs() < 1e-3);
        assert!((m.change - 0.444).abs() < 1e-3);
        assert_eq!(m.swap, 0.0);
        m.validate().unwrap();
        MoveProbs::with_swap().validate().unwrap();
    }

    #[test]
    fn inflation_table() {
        assert_eq!(
            InflationSpec::for_method(Method::Full, 1),
            InflationSpec::FULL
        );
        let l = InflationSpec::for_method(Method::Lisa, 5);
        assert_eq!(
            (l.kappa, l.prior_temper, l.variance_adjust),
            (5.0, 1.0, false)
        );
        let m = InflationSpec::for_method(Method::ModLisa, 5);
        assert_eq!(
            (m.kappa, m.prior_temper, m.variance_adjust),
            (5.0, 1.0, true)
        );
        let c = InflationSpec::for_method(Method::Cmc, 5);
        assert_eq!(
            (c.kappa, c.prior_temper, c.variance_adjust),
            (1.0, 0.2, false)
        );
        for m in Method::ALL {
            assert_eq!(InflationSpec::for_method(m, 1), InflationSpec::FULL);
        }
    }
}
