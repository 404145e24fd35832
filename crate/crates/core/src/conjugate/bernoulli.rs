use crate::config::Method;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BetaParams {
    pub alpha: f64,
    pub beta: f64,
}

impl BetaParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && beta > 0.0 && alpha.is_finite() && beta.is_finite()) {
            return Err(Error::InvalidPrior(format!(
                "Beta parameters must be positive, got ({alpha}, {beta})"
            )));
        }
        Ok(Self { alpha, beta })
    }

    pub fn uniform() -> Self {
        Self {
            alpha: 1.0,
            beta: 1.0,
        }
    }

    pub fn mean(&self) -> f64 {
        self.alpha / (self.alpha + self.beta)
    }

    /// Log density up to the normalising constant; `-inf` outside (0, 1).
    pub fn log_kernel(&self, theta: f64) -> f64 {
        if theta <= 0.0 || theta >= 1.0 {
            return f64::NEG_INFINITY;
        }
        (self.alpha - 1.0) * theta.ln() + (self.beta - 1.0) * (1.0 - theta).ln()
    }
}

/// Ones count `ones` out of `n` Bernoulli trials in one batch.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BernoulliBatch {
    pub ones: u64,
    pub n: u64,
}

impl BernoulliBatch {
    pub fn new(ones: u64, n: u64) -> Result<Self> {
        if n == 0 || ones > n {
            return Err(Error::invalid(format!(
                "invalid batch: {ones} ones out of {n}"
            )));
        }
        Ok(Self { ones, n })
    }
}

/// Exact Beta sub-posterior of one batch.
///
/// `Full` treats the batch as the whole sample; LISA and modLISA inflate the
/// counts by `k`; CMC keeps the counts and tempers the prior exponents by `1/k`.
pub fn bernoulli_subposterior(
    method: Method,
    batch: BernoulliBatch,
    k: u64,
    prior: BetaParams,
) -> Result<BetaParams> {
    if k == 0 {
        return Err(Error::invalid("K must be positive"));
    }
    let s = batch.ones as f64;
    let f = (batch.n - batch.ones) as f64;
    let kf = k as f64;
    match method {
        Method::Full if k != 1 => Err(Error::invalid("full-data posterior requires K = 1")),
        Method::Full => Ok(BetaParams {
            alpha: s + prior.alpha,
            beta: f + prior.beta,
        }),
        Method::Lisa | Method::ModLisa => Ok(BetaParams {
            alpha: s * kf + prior.alpha,
            beta: f * kf + prior.beta,
        }),
        Method::Cmc => {
            let a = (prior.alpha - 1.0) / kf + 1.0;
            let b = (prior.beta - 1.0) / kf + 1.0;
            if a <= 0.0 || b <= 0.0 {
                return Err(Error::InvalidPrior(format!(
                    "tempered prior exponents ({a}, {b}) are not positive"
                )));
            }
            BetaParams::new(s + a, f + b)
        }
    }
}

pub fn beta_variance(params: BetaParams) -> f64 {
    let s = params.alpha + params.beta;
    params.alpha * params.beta / (s * s * (s + 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn lisa_balanced_matches_full() {
        let got = bernoulli_subposterior(
            Method::Lisa,
            BernoulliBatch::new(3, 5).unwrap(),
            2,
            BetaParams::uniform(),
        )
        .unwrap();
        assert_eq!(
            got,
            BetaParams {
                alpha: 7.0,
                beta: 5.0
            }
        );
        let full = bernoulli_subposterior(
            Method::Full,
            BernoulliBatch::new(6, 10).unwrap(),
            1,
            BetaParams::uniform(),
        )
        .unwrap();
        assert_eq!(got, full);
    }

    #[test]
    fn cmc_batch() {
        let got = bernoulli_subposterior(
            Method::Cmc,
            BernoulliBatch::new(3, 5).unwrap(),
            2,
            BetaParams::uniform(),
        )
        .unwrap();
        assert_eq!(
            got,
            BetaParams {
                alpha: 4.0,
                beta: 3.0
            }
        );
    }

    #[test]
    fn k_one_is_full_for_every_method() {
        let batch = BernoulliBatch::new(4, 9).unwrap();
        let prior = BetaParams::new(2.0, 3.0).unwrap();
        let full = bernoulli_subposterior(Method::Full, batch, 1, prior).unwrap();
        assert_eq!(
            full,
            BetaParams {
                alpha: 6.0,
                beta: 8.0
            }
        );
        for m in [Method::Lisa, Method::ModLisa, Method::Cmc] {
            assert_eq!(bernoulli_subposterior(m, batch, 1, prior).unwrap(), full);
        }
    }

    #[test]
    fn full_rejects_k() {
        let batch = BernoulliBatch::new(1, 2).unwrap();
        assert!(bernoulli_subposterior(Method::Full, batch, 2, BetaParams::uniform()).is_err());
        assert!(BernoulliBatch::new(3, 2).is_err());
        assert!(BetaParams::new(0.0, 1.0).is_err());
    }

    #[test]
    fn variances() {
        assert!(
            (beta_variance(BetaParams {
                alpha: 7.0,
                beta: 5.0
            }) - 35.0 / (144.0 * 13.0))
                .abs()
                < 1e-15
        );
        assert!(
            (beta_variance(BetaParams {
                alpha: 7.0,
                beta: 5.0
            }) - 0.018696)
                .abs()
                < 1e-6
        );
        assert!(
            (beta_variance(BetaParams {
                alpha: 4.0,
                beta: 3.0
            }) - 0.030612)
                .abs()
                < 1e-6
        );
        assert_eq!(beta_variance(BetaParams::uniform()), 1.0 / 12.0);
    }

    proptest! {
        #[test]
        fn lisa_balanced_identity(k in 1u64..20, per_ones in 0u64..50, per_zeros in 0u64..50, a in 0.1f64..5.0, b in 0.1f64..5.0) {
            prop_assume!(per_ones + per_zeros > 0);
            let prior = BetaParams::new(a, b).unwrap();
            let full = bernoulli_subposterior(
                Method::Full,
                BernoulliBatch::new(per_ones * k, (per_ones + per_zeros) * k).unwrap(),
                1,
                prior,
            ).unwrap();
            let lisa = bernoulli_subposterior(
                Method::Lisa,
                BernoulliBatch::new(per_ones, per_ones + per_zeros).unwrap(),
                k,
                prior,
            ).unwrap();
            prop_assert_eq!(lisa, full);
        }
    }
}
