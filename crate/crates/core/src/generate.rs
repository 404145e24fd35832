//! Synthetic regression benchmarks with known mean functions.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Friedman's five-active-variable test function over ten predictors.
pub fn friedman_f(x: &[f64]) -> f64 {
    10.0 * (PI * x[0] * x[1]).sin() + 20.0 * (x[2] - 0.5).powi(2) + 10.0 * x[3] + 5.0 * x[4]
}

/// Step function of the first predictor: level `k+1` on `[k/5, (k+1)/5)`.
pub fn piecewise_f(x: &[f64]) -> f64 {
    let x1 = x[0];
    if x1 < 0.2 {
        1.0
    } else if x1 < 0.4 {
        2.0
    } else if x1 < 0.6 {
        3.0
    } else if x1 < 0.8 {
        4.0
    } else {
        5.0
    }
}

/// Smooth four-variable surface `3 sqrt(x1) - 2 x2^2 + 5 x3 x4`.
pub fn poly_f(x: &[f64]) -> f64 {
    3.0 * x[0].sqrt() - 2.0 * x[1] * x[1] + 5.0 * x[2] * x[3]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Generator {
    Friedman,
    Piecewise,
    Poly,
}

impl Generator {
    pub fn dimension(self) -> usize {
        match self {
            Generator::Friedman | Generator::Piecewise => 10,
            Generator::Poly => 4,
        }
    }

    pub fn mean_function(self) -> fn(&[f64]) -> f64 {
        match self {
            Generator::Friedman => friedman_f,
            Generator::Piecewise => piecewise_f,
            Generator::Poly => poly_f,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Generator::Friedman => "friedman",
            Generator::Piecewise => "piecewise",
            Generator::Poly => "poly",
        }
    }

    /// Draws `n` rows: predictors iid Uniform(0,1), response `f(x)` plus
    /// Gaussian noise of variance `sigma2`.
    pub fn generate(self, n: usize, sigma2: f64, rng: &mut RngStream) -> Result<Simulated> {
        if n == 0 {
            return Err(Error::invalid("generator needs n >= 1"));
        }
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(Error::invalid(format!(
                "noise variance must be positive, got {sigma2}"
            )));
        }
        let p = self.dimension();
        let f = self.mean_function();
        let noise = Normal::new(0.0, sigma2.sqrt()).expect("positive sd");
        let mut x = Vec::with_capacity(n * p);
        let mut y = Vec::with_capacity(n);
        let mut true_f = Vec::with_capacity(n);
        for _ in 0..n {
            let start = x.len();
            x.extend((0..p).map(|_| rng.random::<f64>()));
            let fx = f(&x[start..]);
            true_f.push(fx);
            y.push(fx + noise.sample(rng));
        }
        Ok(Simulated {
            dataset: Dataset::new(x, y, p)?,
            true_f,
        })
    }
}

impl fmt::Display for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Generator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "friedman" => Ok(Generator::Friedman),
            "piecewise" => Ok(Generator::Piecewise),
            "poly" | "polynomial" => Ok(Generator::Poly),
            other => Err(Error::invalid(format!("unknown generator `{other}`"))),
        }
    }
}

/// A simulated dataset together with the noiseless mean at each row.
#[derive(Clone, Debug)]
pub struct Simulated {
    pub dataset: Dataset,
    pub true_f: Vec<f64>,
}

pub fn generate_friedman(n: usize, sigma2: f64, rng: &mut RngStream) -> Result<Simulated> {
    Generator::Friedman.generate(n, sigma2, rng)
}

pub fn generate_piecewise(n: usize, sigma2: f64, rng: &mut RngStream) -> Result<Simulated> {
    Generator::Piecewise.generate(n, sigma2, rng)
}

pub fn generate_poly(n: usize, sigma2: f64, rng: &mut RngStream) -> Result<Simulated> {
    Generator::Poly.generate(n, sigma2, rng)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn friedman_values() {
        let mut x = [0.5; 10];
        assert!((friedman_f(&x) - 14.5711).abs() < 5e-5);
        x = [0.0; 10];
        x[2] = 0.5;
        assert_eq!(friedman_f(&x), 0.0);
    }

    #[test]
    fn piecewise_values() {
        let mut x = [0.0; 10];
        for (x1, want) in [(0.1, 1.0), (0.99, 5.0), (0.2, 2.0), (0.0, 1.0), (0.6, 4.0)] {
            x[0] = x1;
            assert_eq!(piecewise_f(&x), want, "x1 = {x1}");
        }
    }

    #[test]
    fn poly_values() {
        assert_eq!(poly_f(&[1.0, 0.0, 0.0, 0.0]), 3.0);
        assert_eq!(poly_f(&[0.0, 1.0, 1.0, 1.0]), 3.0);
    }

    #[test]
    fn rejects_bad_arguments() {
        let mut rng = RngStream::new(0, 0);
        assert!(generate_friedman(10, 0.0, &mut rng).is_err());
        assert!(generate_poly(10, -1.0, &mut rng).is_err());
        assert!(generate_piecewise(0, 1.0, &mut rng).is_err());
        assert!("bogus".parse::<Generator>().is_err());
    }

    #[test]
    fn shapes() {
        let mut rng = RngStream::new(1, 0);
        let s = generate_poly(17, 1.0, &mut rng).unwrap();
        assert_eq!(s.dataset.p(), 4);
        assert_eq!(s.dataset.n(), 17);
        assert!(s
            .dataset
            .predictors()
            .iter()
            .all(|&v| (0.0..1.0).contains(&v)));
        let s = generate_piecewise(100, 9.0, &mut rng).unwrap();
        assert!(s
            .true_f
            .iter()
            .all(|f| [1.0, 2.0, 3.0, 4.0, 5.0].contains(f)));
    }

    #[test]
    fn noise_moments() {
        let n = 100_000;
        for (g, sigma2) in [
            (Generator::Friedman, 9.0),
            (Generator::Poly, 1.0),
            (Generator::Piecewise, 9.0),
        ] {
            let s = g.generate(n, sigma2, &mut RngStream::new(42, 7)).unwrap();
            let e: Vec<f64> = s
                .dataset
                .response()
                .iter()
                .zip(&s.true_f)
                .map(|(y, f)| y - f)
                .collect();
            let nf = n as f64;
            let mean = e.iter().sum::<f64>() / nf;
            let var = e.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (nf - 1.0);
            assert!(mean.abs() < 3.0 * (sigma2 / nf).sqrt(), "{g}: mean {mean}");
            // Var(s^2) = 2 sigma^4 / (n-1) for Gaussian noise
            let se_var = (2.0 * sigma2 * sigma2 / (nf - 1.0)).sqrt();
            assert!((var - sigma2).abs() < 3.0 * se_var, "{g}: var {var}");
        }
    }
}
