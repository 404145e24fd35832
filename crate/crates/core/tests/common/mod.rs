#![allow(dead_code)]

use lisa_core::bart::{
    draw_forest_from_prior, BartHyper, BartSampler, BartSettings, Forest, InflationSpec, MoveProbs,
};
use lisa_core::{Dataset, RngStream};
use rand_distr::{Distribution, Normal};

/// Mean and batch-means standard error of a (possibly autocorrelated) series.
pub fn mean_and_se(xs: &[f64], batches: usize) -> (f64, f64) {
    let n = xs.len();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let size = n / batches;
    let bm: Vec<f64> = (0..batches)
        .map(|b| xs[b * size..(b + 1) * size].iter().sum::<f64>() / size as f64)
        .collect();
    let bmean = bm.iter().sum::<f64>() / batches as f64;
    let var = bm.iter().map(|v| (v - bmean).powi(2)).sum::<f64>() / (batches - 1) as f64;
    (mean, (var / batches as f64).sqrt())
}

/// 30 rows on a 5-point grid in two predictors.
pub fn geweke_design() -> Dataset {
    let grid = [0.0, 0.25, 0.5, 0.75, 1.0];
    let rows: Vec<Vec<f64>> = (0..30)
        .map(|i| vec![grid[i % 5], grid[(i / 5 + i) % 5]])
        .collect();
    Dataset::from_rows(&rows, vec![0.0; 30]).unwrap()
}

pub fn geweke_hyper(swap: bool) -> BartHyper {
    let mut settings = BartSettings::default().with_trees(3);
    settings.nu = 10.0;
    if swap {
        settings.move_probs = MoveProbs::with_swap();
    }
    BartHyper::fixed(settings, 0.0, 0.5, 1.0).unwrap()
}

fn draw_response(forest: &Forest, data: &Dataset, rng: &mut RngStream) -> Vec<f64> {
    let noise = Normal::new(0.0, forest.sigma2.sqrt()).unwrap();
    (0..data.n())
        .map(|i| forest.predict_unchecked(data.row(i)) + noise.sample(rng))
        .collect()
}

pub struct GewekeMoments {
    pub name: &'static str,
    pub successive: (f64, f64),
    pub marginal: (f64, f64),
}

impl GewekeMoments {
    pub fn z(&self) -> f64 {
        (self.successive.0 - self.marginal.0)
            / (self.successive.1.powi(2) + self.marginal.1.powi(2)).sqrt()
    }
}

/// Compares the prior marginals of (σ², σ⁴, mean tree depth) from
/// independent prior draws with those visited by the
/// successive-conditional simulator.
pub fn geweke(sweeps: usize, swap: bool, seed: u64) -> Vec<GewekeMoments> {
    let data = geweke_design();
    let hyper = geweke_hyper(swap);

    let mut rng = RngStream::new(seed, 0);
    let mut mc: [Vec<f64>; 3] = Default::default();
    for _ in 0..sweeps {
        let f = draw_forest_from_prior(&data, &hyper, &mut rng).unwrap();
        mc[0].push(f.sigma2);
        mc[1].push(f.sigma2 * f.sigma2);
        mc[2].push(f.mean_depth());
    }

    let mut rng = RngStream::new(seed, 1);
    let start = draw_forest_from_prior(&data, &hyper, &mut rng).unwrap();
    let mut sampler =
        BartSampler::with_forest(data.clone(), hyper, InflationSpec::FULL, start).unwrap();
    let mut sc: [Vec<f64>; 3] = Default::default();
    for _ in 0..sweeps {
        let y = draw_response(sampler.forest(), &data, &mut rng);
        sampler.set_response(y).unwrap();
        sampler.gibbs_iteration(&mut rng).unwrap();
        let f = sampler.forest();
        sc[0].push(f.sigma2);
        sc[1].push(f.sigma2 * f.sigma2);
        sc[2].push(f.mean_depth());
    }

    ["sigma2", "sigma2^2", "mean depth"]
        .into_iter()
        .enumerate()
        .map(|(i, name)| GewekeMoments {
            name,
            successive: mean_and_se(&sc[i], 50),
            marginal: mean_and_se(&mc[i], 50),
        })
        .collect()
}
