use super::chain::ChainOutput;
use crate::config::{CombineRule, Method};
use crate::draws::DrawMatrix;
use crate::error::{Error, Result};

/// Pooled posterior over the K shards.
///
/// Under `Uniform` every shard draw is kept, so there are K·S draws of both
/// f̂ and σ². Under `InverseVariance` the f̂ draws are per-index weighted
/// averages (S draws) while σ² is pooled uniformly for the inflated methods
/// (K·S draws) and weight-averaged for CMC (S draws).
#[derive(Clone, Debug, PartialEq)]
pub struct CombinedPosterior {
    pub method: Method,
    pub rule: CombineRule,
    pub sigma2: Vec<f64>,
    pub f_train: DrawMatrix,
    pub f_test: DrawMatrix,
    /// Normalized per-shard weights: 1/K under `Uniform`, 1/σ̂² for the
    /// inflated methods, the σ² precision weights for CMC (whose f̂ weights
    /// vary by evaluation point and are not listed).
    pub weights: Vec<f64>,
}

/// `1/v` per entry; if any variance is zero those entries share all weight.
fn precision_weights(vars: &[f64]) -> Vec<f64> {
    if vars.iter().any(|&v| v <= 0.0) {
        vars.iter()
            .map(|&v| if v <= 0.0 { 1.0 } else { 0.0 })
            .collect()
    } else {
        vars.iter().map(|v| 1.0 / v).collect()
    }
}

fn normalized(w: &[f64]) -> Vec<f64> {
    let total: f64 = w.iter().sum();
    w.iter().map(|v| v / total).collect()
}

fn sample_variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    xs.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0).max(1.0)
}

/// Per-draw weighted average of aligned shard matrices; `weight(k, j)` is
/// shard k's weight at point j.
fn weighted_draws(parts: &[&DrawMatrix], weight: impl Fn(usize, usize) -> f64) -> DrawMatrix {
    let points = parts[0].n_points();
    let draws = parts[0].n_draws();
    let totals: Vec<f64> = (0..points)
        .map(|j| (0..parts.len()).map(|k| weight(k, j)).sum())
        .collect();
    let mut out = DrawMatrix::new(points);
    let mut row = vec![0.0; points];
    for s in 0..draws {
        row.iter_mut().for_each(|r| *r = 0.0);
        for (k, part) in parts.iter().enumerate() {
            for (j, (r, v)) in row.iter_mut().zip(part.draw(s)).enumerate() {
                *r += weight(k, j) * v;
            }
        }
        for (r, t) in row.iter_mut().zip(&totals) {
            *r /= t;
        }
        out.push(&row);
    }
    out
}

fn check_alignment(outputs: &[ChainOutput]) -> Result<()> {
    let first = outputs
        .first()
        .ok_or_else(|| Error::Alignment("no chain outputs to combine".into()))?;
    let d = &first.draws;
    for o in outputs {
        o.draws.check_aligned()?;
        if o.draws.len() != d.len() {
            return Err(Error::Alignment(format!(
                "shard {} has {} draws, shard {} has {}",
                o.shard_id,
                o.draws.len(),
                first.shard_id,
                d.len()
            )));
        }
        if o.draws.f_train.n_points() != d.f_train.n_points()
            || o.draws.f_test.n_points() != d.f_test.n_points()
        {
            return Err(Error::Alignment(format!(
                "shard {} was evaluated at different points",
                o.shard_id
            )));
        }
    }
    if d.is_empty() {
        return Err(Error::Alignment("chains hold no draws".into()));
    }
    Ok(())
}

/// Weighted f̂ combination with one scalar weight per shard.
pub fn combine_with_shard_weights(
    outputs: &[ChainOutput],
    weights: &[f64],
) -> Result<(DrawMatrix, DrawMatrix)> {
    check_alignment(outputs)?;
    if weights.len() != outputs.len()
        || weights.iter().any(|w| !(*w >= 0.0))
        || weights.iter().sum::<f64>() <= 0.0
    {
        return Err(Error::invalid(
            "need one non-negative weight per shard, not all zero",
        ));
    }
    let train: Vec<&DrawMatrix> = outputs.iter().map(|o| &o.draws.f_train).collect();
    let test: Vec<&DrawMatrix> = outputs.iter().map(|o| &o.draws.f_test).collect();
    Ok((
        weighted_draws(&train, |k, _| weights[k]),
        weighted_draws(&test, |k, _| weights[k]),
    ))
}

/// Combines shard draws into one posterior sample.
pub fn combine(
    outputs: &[ChainOutput],
    method: Method,
    rule: CombineRule,
) -> Result<CombinedPosterior> {
    check_alignment(outputs)?;
    let k = outputs.len();
    if k == 1 {
        let d = &outputs[0].draws;
        return Ok(CombinedPosterior {
            method,
            rule,
            sigma2: d.sigma2.clone(),
            f_train: d.f_train.clone(),
            f_test: d.f_test.clone(),
            weights: vec![1.0],
        });
    }
    let pooled_sigma2 = || {
        outputs
            .iter()
            .flat_map(|o| o.draws.sigma2.iter().copied())
            .collect()
    };
    match (rule, method) {
        (CombineRule::Uniform, _) => {
            let train: Vec<&DrawMatrix> = outputs.iter().map(|o| &o.draws.f_train).collect();
            let test: Vec<&DrawMatrix> = outputs.iter().map(|o| &o.draws.f_test).collect();
            Ok(CombinedPosterior {
                method,
                rule,
                sigma2: pooled_sigma2(),
                f_train: DrawMatrix::concat(&train)?,
                f_test: DrawMatrix::concat(&test)?,
                weights: vec![1.0 / k as f64; k],
            })
        }
        (CombineRule::InverseVariance, Method::Cmc) => {
            let mut parts = Vec::new();
            for select in [
                |o: &ChainOutput| o.draws.f_train.clone(),
                |o: &ChainOutput| o.draws.f_test.clone(),
            ] {
                let mats: Vec<DrawMatrix> = outputs.iter().map(select).collect();
                let w: Vec<Vec<f64>> = {
                    let vars: Vec<Vec<f64>> =
                        mats.iter().map(DrawMatrix::point_variances).collect();
                    let points = mats[0].n_points();
                    let per_point: Vec<Vec<f64>> = (0..points)
                        .map(|j| precision_weights(&vars.iter().map(|v| v[j]).collect::<Vec<_>>()))
                        .collect();
                    // shard-major for lookup
                    (0..k)
                        .map(|s| per_point.iter().map(|p| p[s]).collect())
                        .collect()
                };
                let refs: Vec<&DrawMatrix> = mats.iter().collect();
                parts.push(weighted_draws(&refs, |s, j| w[s][j]));
            }
            let f_test = parts.pop().unwrap();
            let f_train = parts.pop().unwrap();
            let vars: Vec<f64> = outputs
                .iter()
                .map(|o| sample_variance(&o.draws.sigma2))
                .collect();
            let w = precision_weights(&vars);
            let total: f64 = w.iter().sum();
            let n = outputs[0].draws.len();
            let sigma2 = (0..n)
                .map(|s| {
                    outputs
                        .iter()
                        .zip(&w)
                        .map(|(o, wk)| wk * o.draws.sigma2[s])
                        .sum::<f64>()
                        / total
                })
                .collect();
            Ok(CombinedPosterior {
                method,
                rule,
                sigma2,
                f_train,
                f_test,
                weights: normalized(&w),
            })
        }
        (CombineRule::InverseVariance, _) => {
            let means: Vec<f64> = outputs.iter().map(|o| o.draws.mean_sigma2()).collect();
            let w = precision_weights(&means);
            let (f_train, f_test) = combine_with_shard_weights(outputs, &w)?;
            Ok(CombinedPosterior {
                method,
                rule,
                sigma2: pooled_sigma2(),
                f_train,
                f_test,
                weights: normalized(&w),
            })
        }
    }
}
