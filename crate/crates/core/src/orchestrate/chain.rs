use std::time::Instant;

use rayon::prelude::*;

use crate::bart::{BartHyper, BartSampler, InflationSpec, MoveCounters};
use crate::config::MethodConfig;
use crate::data::{partition, Dataset};
use crate::draws::DrawMatrix;
use crate::error::{Error, Result};
use crate::rng::{RngStream, STREAM_PARTITION};

/// Predictor rows at which every retained forest is evaluated.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalPoints {
    p: usize,
    train: Vec<f64>,
    test: Vec<f64>,
}

impl EvalPoints {
    pub fn new(p: usize, train: Vec<f64>, test: Vec<f64>) -> Result<Self> {
        if p == 0 || !train.len().is_multiple_of(p) || !test.len().is_multiple_of(p) {
            return Err(Error::invalid(
                "evaluation rows do not match the predictor dimension",
            ));
        }
        Ok(Self { p, train, test })
    }

    /// The first `train_limit` (default: all) training rows and every test row.
    pub fn from_datasets(
        train: &Dataset,
        test: Option<&Dataset>,
        train_limit: Option<usize>,
    ) -> Result<Self> {
        let n = train_limit.map_or(train.n(), |l| l.min(train.n()));
        let x = train.predictors()[..n * train.p()].to_vec();
        let t = match test {
            Some(t) if t.p() != train.p() => {
                return Err(Error::invalid("train and test predictor dimensions differ"));
            }
            Some(t) => t.predictors().to_vec(),
            None => Vec::new(),
        };
        Self::new(train.p(), x, t)
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn n_train(&self) -> usize {
        self.train.len() / self.p
    }

    pub fn n_test(&self) -> usize {
        self.test.len() / self.p
    }
}

/// Retained draws of one chain, aligned by draw index.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ChainDraws {
    pub sigma2: Vec<f64>,
    /// Total leaves across all trees.
    pub leaf_count: Vec<usize>,
    /// Move tallies of the sweep that produced each draw.
    pub moves: Vec<MoveCounters>,
    pub f_train: DrawMatrix,
    pub f_test: DrawMatrix,
}

impl ChainDraws {
    pub fn len(&self) -> usize {
        self.sigma2.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma2.is_empty()
    }

    pub fn total_moves(&self) -> MoveCounters {
        let mut t = MoveCounters::default();
        self.moves.iter().for_each(|m| t.add(m));
        t
    }

    pub fn mean_sigma2(&self) -> f64 {
        self.sigma2.iter().sum::<f64>() / self.sigma2.len() as f64
    }

    pub fn mean_leaf_count(&self) -> f64 {
        self.leaf_count.iter().sum::<usize>() as f64 / self.leaf_count.len() as f64
    }

    pub fn check_aligned(&self) -> Result<()> {
        let n = self.len();
        if self.leaf_count.len() != n
            || self.moves.len() != n
            || self.f_train.n_draws() != n && self.f_train.n_points() > 0
            || self.f_test.n_draws() != n && self.f_test.n_points() > 0
        {
            return Err(Error::Alignment(
                "chain draw sequences have different lengths".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChainOutput {
    pub shard_id: usize,
    /// Rows the chain was fitted on.
    pub n_rows: usize,
    /// Hyperparameters as calibrated on this chain's rows.
    pub hyper: BartHyper,
    pub draws: ChainDraws,
    pub seconds_per_iteration: f64,
}

/// Affine map applied to `y` before sampling when standardizing.
#[derive(Clone, Copy)]
struct Scaling {
    center: f64,
    scale: f64,
}

impl Scaling {
    fn for_response(y: &[f64], standardize: bool) -> Self {
        if !standardize {
            return Self {
                center: 0.0,
                scale: 1.0,
            };
        }
        let lo = y.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let scale = if hi > lo { hi - lo } else { 1.0 };
        Self {
            center: (lo + hi) / 2.0,
            scale,
        }
    }
}

/// Runs one chain on `shard` under `config`'s method and records every
/// post-burn-in draw, evaluated at `eval`.
pub fn run_chain(
    shard: &Dataset,
    shard_id: usize,
    config: &MethodConfig,
    eval: &EvalPoints,
) -> Result<ChainOutput> {
    config.validate()?;
    if eval.p() != shard.p() {
        return Err(Error::invalid(
            "evaluation points and data have different dimensions",
        ));
    }
    let scaling = Scaling::for_response(shard.response(), config.bart.standardize);
    let data = if config.bart.standardize {
        let y = shard
            .response()
            .iter()
            .map(|v| (v - scaling.center) / scaling.scale)
            .collect();
        let mut d = Dataset::new(shard.predictors().to_vec(), y, shard.p())?;
        if let Some(names) = shard.feature_names() {
            d = d.with_feature_names(names.to_vec())?;
        }
        d
    } else {
        shard.clone()
    };
    let hyper = BartHyper::calibrated(config.bart, data.response())?;
    let inflation = InflationSpec::for_method(config.method, config.k);
    let mut sampler = BartSampler::new(data, hyper, inflation)?;
    let mut rng = RngStream::for_chain(config.seed, shard_id);

    let mut draws = ChainDraws {
        f_train: DrawMatrix::new(eval.n_train()),
        f_test: DrawMatrix::new(eval.n_test()),
        ..Default::default()
    };
    let unscale = |v: f64| v * scaling.scale + scaling.center;
    let mut buf = Vec::new();
    let mut sweep_seconds = 0.0;
    for it in 0..config.iterations {
        let start = Instant::now();
        let counters = sampler.gibbs_iteration(&mut rng)?;
        sweep_seconds += start.elapsed().as_secs_f64();
        if it < config.burn_in {
            continue;
        }
        let forest = sampler.forest();
        draws
            .sigma2
            .push(forest.sigma2 * scaling.scale * scaling.scale);
        draws.leaf_count.push(forest.leaf_count());
        draws.moves.push(counters);
        for (rows, out) in [
            (&eval.train, &mut draws.f_train),
            (&eval.test, &mut draws.f_test),
        ] {
            buf.clear();
            buf.extend(
                rows.chunks_exact(eval.p)
                    .map(|x| unscale(forest.predict_unchecked(x))),
            );
            out.push(&buf);
        }
    }
    Ok(ChainOutput {
        shard_id,
        n_rows: shard.n(),
        hyper,
        draws,
        seconds_per_iteration: sweep_seconds / config.iterations as f64,
    })
}

/// Splits `dataset` into `config.k` shards and runs one chain per shard, at
/// most `config.workers` at a time. Draws depend only on the data and
/// `config.seed`, never on the degree of parallelism.
pub fn run_chains(
    dataset: &Dataset,
    config: &MethodConfig,
    eval: &EvalPoints,
) -> Result<Vec<ChainOutput>> {
    config.validate()?;
    let mut rng = RngStream::new(config.seed, STREAM_PARTITION);
    let shards: Vec<Dataset> = partition(dataset, config.k, &mut rng)?
        .iter()
        .map(|s| s.materialize())
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))?;
    pool.install(|| {
        shards
            .par_iter()
            .enumerate()
            .map(|(id, shard)| {
                run_chain(shard, id, config, eval).map_err(|e| Error::Chain {
                    shard_id: id,
                    source: Box::new(e),
                })
            })
            .collect()
    })
}
