//! Posterior summaries: error, interval coverage, ECDF distances, move
//! acceptance and timing.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::bart::{MoveCounters, MoveKind};
use crate::draws::DrawMatrix;
use crate::error::{Error, Result};

pub fn rmse(true_f: &[f64], mean_f: &[f64]) -> Result<f64> {
    if true_f.len() != mean_f.len() || true_f.is_empty() {
        return Err(Error::invalid(format!(
            "rmse needs equal non-empty lengths, got {} and {}",
            true_f.len(),
            mean_f.len()
        )));
    }
    let ss: f64 = true_f
        .iter()
        .zip(mean_f)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok((ss / true_f.len() as f64).sqrt())
}

/// Sample quantile by linear interpolation between order statistics
/// (`sorted` must be ascending).
pub fn quantile_sorted(sorted: &[f64], prob: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * prob;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntervalEstimate {
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
}

impl IntervalEstimate {
    pub fn contains(&self, v: f64) -> bool {
        self.lower <= v && v <= self.upper
    }
}

/// Equal-tailed interval from sample quantiles.
pub fn credible_interval(draws: &[f64], level: f64) -> Result<IntervalEstimate> {
    if draws.len() < 2 {
        return Err(Error::invalid("an interval needs at least two draws"));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::invalid("level must lie in (0, 1)"));
    }
    let mut s = draws.to_vec();
    s.sort_unstable_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    Ok(IntervalEstimate {
        lower: quantile_sorted(&s, tail),
        upper: quantile_sorted(&s, 1.0 - tail),
        level,
    })
}

fn check_points(true_f: &[f64], f: &DrawMatrix) -> Result<()> {
    if true_f.len() != f.n_points() || true_f.is_empty() {
        return Err(Error::invalid(
            "true values and draws cover different points",
        ));
    }
    if f.n_draws() < 2 {
        return Err(Error::invalid(
            "coverage needs at least two draws per point",
        ));
    }
    Ok(())
}

/// Fraction of points whose true value lies in its equal-tailed interval.
pub fn ci_coverage(true_f: &[f64], f: &DrawMatrix, level: f64) -> Result<f64> {
    check_points(true_f, f)?;
    let mut hits = 0usize;
    for (j, &t) in true_f.iter().enumerate() {
        if credible_interval(&f.column(j), level)?.contains(t) {
            hits += 1;
        }
    }
    Ok(hits as f64 / true_f.len() as f64)
}

/// Posterior-predictive intervals: draw t pairs f̂ draw `t mod S_f` with σ²
/// draw `t mod S_σ`, over `max(S_f, S_σ)` draws.
pub fn prediction_intervals<R: Rng + ?Sized>(
    f: &DrawMatrix,
    sigma2: &[f64],
    level: f64,
    rng: &mut R,
) -> Result<Vec<IntervalEstimate>> {
    if sigma2.is_empty() || sigma2.iter().any(|s| !(*s >= 0.0)) {
        return Err(Error::invalid(
            "sigma2 draws must be non-negative and non-empty",
        ));
    }
    let sf = f.n_draws();
    let total = sf.max(sigma2.len());
    let mut cols: Vec<Vec<f64>> = vec![Vec::with_capacity(total); f.n_points()];
    for t in 0..total {
        let sd = sigma2[t % sigma2.len()].sqrt();
        for (col, v) in cols.iter_mut().zip(f.draw(t % sf)) {
            let z: f64 = rand_distr::StandardNormal.sample(rng);
            col.push(v + sd * z);
        }
    }
    cols.iter().map(|c| credible_interval(c, level)).collect()
}

/// Average over points of the fraction of `n_rep` fresh draws from
/// N(f(x), σ²_true) falling inside the point's interval.
pub fn interval_hit_rate<R: Rng + ?Sized>(
    true_f: &[f64],
    sigma2_true: f64,
    intervals: &[IntervalEstimate],
    n_rep: usize,
    rng: &mut R,
) -> Result<f64> {
    if true_f.len() != intervals.len() || true_f.is_empty() || n_rep == 0 {
        return Err(Error::invalid("need one interval per point and n_rep > 0"));
    }
    let noise = Normal::new(0.0, sigma2_true.sqrt()).map_err(|e| Error::invalid(e.to_string()))?;
    let mut total = 0.0;
    for (&t, iv) in true_f.iter().zip(intervals) {
        let hits = (0..n_rep)
            .filter(|_| iv.contains(t + noise.sample(rng)))
            .count();
        total += hits as f64 / n_rep as f64;
    }
    Ok(total / true_f.len() as f64)
}

pub fn pi_coverage<R: Rng + ?Sized>(
    true_f: &[f64],
    sigma2_true: f64,
    f: &DrawMatrix,
    sigma2: &[f64],
    level: f64,
    n_rep: usize,
    rng: &mut R,
) -> Result<f64> {
    check_points(true_f, f)?;
    let intervals = prediction_intervals(f, sigma2, level, rng)?;
    interval_hit_rate(true_f, sigma2_true, &intervals, n_rep, rng)
}

/// Empirical distribution function.
#[derive(Clone, Debug, PartialEq)]
pub struct Ecdf {
    sorted: Vec<f64>,
}

impl Ecdf {
    pub fn new(samples: &[f64]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::invalid("an ECDF needs at least one sample"));
        }
        if samples.iter().any(|v| v.is_nan()) {
            return Err(Error::invalid("ECDF samples must not be NaN"));
        }
        let mut sorted = samples.to_vec();
        sorted.sort_unstable_by(f64::total_cmp);
        Ok(Self { sorted })
    }

    /// Fraction of samples `≤ t`.
    pub fn eval(&self, t: f64) -> f64 {
        self.sorted.partition_point(|&v| v <= t) as f64 / self.sorted.len() as f64
    }

    pub fn min(&self) -> f64 {
        self.sorted[0]
    }

    pub fn max(&self) -> f64 {
        self.sorted[self.sorted.len() - 1]
    }

    pub fn samples(&self) -> &[f64] {
        &self.sorted
    }
}

/// `grid` equispaced points spanning both samples, widened by 0.1% of the
/// pooled range on each side.
pub fn cvm_grid(f: &Ecdf, g: &Ecdf, grid: usize) -> Vec<f64> {
    let lo = f.min().min(g.min());
    let hi = f.max().max(g.max());
    let eps = if hi > lo {
        1e-3 * (hi - lo)
    } else {
        1e-3 * lo.abs().max(1.0)
    };
    let (a, b) = (lo - eps, hi + eps);
    if grid == 1 {
        return vec![(a + b) / 2.0];
    }
    (0..grid)
        .map(|i| a + (b - a) * i as f64 / (grid - 1) as f64)
        .collect()
}

/// Mean squared ECDF difference over the grid.
pub fn cvm_distance(f: &Ecdf, g: &Ecdf, grid: usize) -> Result<f64> {
    if grid == 0 {
        return Err(Error::invalid(
            "the evaluation grid needs at least one point",
        ));
    }
    let pts = cvm_grid(f, g, grid);
    Ok(pts
        .iter()
        .map(|&t| (f.eval(t) - g.eval(t)).powi(2))
        .sum::<f64>()
        / grid as f64)
}

/// Accepted/proposed per move kind; `None` when a kind was never proposed.
pub fn acceptance_summary(c: &MoveCounters) -> [Option<f64>; 4] {
    let mut out = [None; 4];
    for k in MoveKind::ALL {
        let i = k.index();
        if c.proposed[i] > 0 {
            out[i] = Some(c.accepted[i] as f64 / c.proposed[i] as f64);
        }
    }
    out
}

/// Relative disagreement `|g − p| / max(g, p)` of two rates.
pub fn grow_prune_imbalance(grow: f64, prune: f64) -> f64 {
    let top = grow.max(prune);
    if top == 0.0 {
        0.0
    } else {
        (grow - prune).abs() / top
    }
}

/// Percentage time saved relative to the single-machine run.
pub fn speedup(t_method: f64, t_single: f64) -> Result<f64> {
    if !(t_single > 0.0) {
        return Err(Error::invalid("single-machine time must be positive"));
    }
    Ok((1.0 - t_method / t_single) * 100.0)
}

/// Mean with equal-tailed interval of a scalar draw sequence.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScalarSummary {
    pub mean: f64,
    pub interval: IntervalEstimate,
}

pub fn summarize(draws: &[f64], level: f64) -> Result<ScalarSummary> {
    let interval = credible_interval(draws, level)?;
    Ok(ScalarSummary {
        mean: draws.iter().sum::<f64>() / draws.len() as f64,
        interval,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use proptest::prelude::*;

    #[test]
    fn rmse_examples() {
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert!((rmse(&[0.0, 0.0], &[3.0, 4.0]).unwrap() - (12.5f64).sqrt()).abs() < 1e-15);
        assert!((rmse(&[0.0, 0.0], &[3.0, 4.0]).unwrap() - 3.5355).abs() < 1e-4);
        assert!(rmse(&[0.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn quantiles_interpolate() {
        let s = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile_sorted(&s, 0.5), 3.0);
        assert_eq!(quantile_sorted(&s, 0.125), 1.5);
        let iv = credible_interval(&[4.0, 1.0, 3.0, 2.0, 5.0], 0.5).unwrap();
        assert_eq!((iv.lower, iv.upper), (2.0, 4.0));
        assert!(credible_interval(&[1.0], 0.9).is_err());
    }

    fn matrix(cols: &[Vec<f64>]) -> DrawMatrix {
        let mut m = DrawMatrix::new(cols.len());
        for s in 0..cols[0].len() {
            m.push(&cols.iter().map(|c| c[s]).collect::<Vec<_>>());
        }
        m
    }

    #[test]
    fn ci_coverage_examples() {
        let truth = [1.0, 2.0];
        let exact = matrix(&[vec![1.0; 5], vec![2.0; 5]]);
        assert_eq!(ci_coverage(&truth, &exact, 0.95).unwrap(), 1.0);
        let far = matrix(&[vec![100.0, 101.0], vec![100.0, 101.0]]);
        assert_eq!(ci_coverage(&truth, &far, 0.95).unwrap(), 0.0);
        let one = matrix(&[vec![1.0]]);
        assert!(ci_coverage(&[1.0], &one, 0.95).is_err());
    }

    #[test]
    fn pi_coverage_extremes() {
        let mut rng = RngStream::new(3, 0);
        let truth = [0.0, 1.0];
        let wide = [
            IntervalEstimate {
                lower: f64::NEG_INFINITY,
                upper: f64::INFINITY,
                level: 0.95,
            },
            IntervalEstimate {
                lower: f64::NEG_INFINITY,
                upper: f64::INFINITY,
                level: 0.95,
            },
        ];
        assert_eq!(
            interval_hit_rate(&truth, 1.0, &wide, 1000, &mut rng).unwrap(),
            1.0
        );
        let f = matrix(&[vec![0.0; 10], vec![1.0; 10]]);
        let zero = pi_coverage(&truth, 1.0, &f, &[0.0; 10], 0.95, 1000, &mut rng).unwrap();
        assert!(zero < 0.01);
    }

    #[test]
    fn nominal_intervals_from_iid_normals_cover_at_level() {
        let mut rng = RngStream::new(9, 0);
        let z = Normal::new(0.0, 1.0).unwrap();
        let draws: Vec<f64> = (0..10_000).map(|_| z.sample(&mut rng)).collect();
        let iv = credible_interval(&draws, 0.95).unwrap();
        let n = 10_000;
        let inside = (0..n).filter(|_| iv.contains(z.sample(&mut rng))).count() as f64 / n as f64;
        let se = (0.95f64 * 0.05 / n as f64).sqrt();
        assert!(
            (inside - 0.95).abs() < 3.0 * se + 0.005,
            "coverage {inside}"
        );
    }

    #[test]
    fn cvm_examples() {
        let f = Ecdf::new(&[0.0]).unwrap();
        let g = Ecdf::new(&[1.0]).unwrap();
        assert_eq!(cvm_distance(&f, &f, 1000).unwrap(), 0.0);
        let d = cvm_distance(&f, &g, 1000).unwrap();
        // only the two padding points at the ends see equal ECDFs
        assert!((d - 0.998).abs() < 1e-12, "{d}");
        assert!(Ecdf::new(&[]).is_err());
    }

    #[test]
    fn ecdf_is_right_continuous() {
        let e = Ecdf::new(&[2.0, 1.0, 2.0, 3.0]).unwrap();
        assert_eq!(e.eval(0.5), 0.0);
        assert_eq!(e.eval(1.0), 0.25);
        assert_eq!(e.eval(2.0), 0.75);
        assert_eq!(e.eval(10.0), 1.0);
    }

    #[test]
    fn acceptance_and_speedup() {
        let mut c = MoveCounters::default();
        c.proposed[0] = 100;
        c.accepted[0] = 20;
        let r = acceptance_summary(&c);
        assert_eq!(r[0], Some(0.2));
        assert_eq!(r[1], None);
        assert_eq!(speedup(17.28, 17.28).unwrap(), 0.0);
        assert_eq!(speedup(11.99, 17.28).unwrap().round(), 31.0);
        assert!((speedup(1.81, 17.28).unwrap() - 89.5).abs() < 0.05);
        assert!(speedup(1.0, 0.0).is_err());
        assert!((grow_prune_imbalance(0.20, 0.26) - 6.0 / 26.0).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn cvm_symmetric_and_bounded(a in prop::collection::vec(-5.0f64..5.0, 1..40), b in prop::collection::vec(-5.0f64..5.0, 1..40)) {
            let (f, g) = (Ecdf::new(&a).unwrap(), Ecdf::new(&b).unwrap());
            let d1 = cvm_distance(&f, &g, 200).unwrap();
            let d2 = cvm_distance(&g, &f, 200).unwrap();
            prop_assert_eq!(d1, d2);
            prop_assert!((0.0..=1.0).contains(&d1));
        }

        #[test]
        fn rmse_triangle(a in prop::collection::vec(-5.0f64..5.0, 5), b in prop::collection::vec(-5.0f64..5.0, 5), c in prop::collection::vec(-5.0f64..5.0, 5)) {
            let ac = rmse(&a, &c).unwrap();
            prop_assert!(ac <= rmse(&a, &b).unwrap() + rmse(&b, &c).unwrap() + 1e-12);
        }

        #[test]
        fn ci_coverage_permutation_invariant(seed in 0u64..1000) {
            let mut rng = RngStream::new(seed, 0);
            let z = Normal::new(0.0, 1.0).unwrap();
            let cols: Vec<Vec<f64>> = (0..6).map(|_| (0..20).map(|_| z.sample(&mut rng)).collect()).collect();
            let truth: Vec<f64> = (0..6).map(|_| z.sample(&mut rng)).collect();
            let base = ci_coverage(&truth, &matrix(&cols), 0.8).unwrap();
            let perm = [3, 0, 5, 1, 4, 2];
            let pc: Vec<Vec<f64>> = perm.iter().map(|&i| { let mut c = cols[i].clone(); c.reverse(); c }).collect();
            let pt: Vec<f64> = perm.iter().map(|&i| truth[i]).collect();
            prop_assert_eq!(base, ci_coverage(&pt, &matrix(&pc), 0.8).unwrap());
        }
    }
}
