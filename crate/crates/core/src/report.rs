//! Metrics and tables computed purely from a persisted run directory.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::config::Method;
use crate::diagnostics::{
    acceptance_summary, ci_coverage, cvm_distance, pi_coverage, rmse, speedup, summarize, Ecdf,
    ScalarSummary,
};
use crate::draws::DrawMatrix;
use crate::error::{Error, Result};
use crate::experiment::{read_replication_data, read_run_index, replication_dir, ReplicationData};
use crate::orchestrate::{read_method_dir, MethodRun};
use crate::rng::{RngStream, STREAM_DIAGNOSTICS};

pub const LEVEL: f64 = 0.95;
pub const PI_REPLICATES: usize = 1000;
pub const CVM_GRID: usize = 1000;

/// Everything reported for one method in one replication.
#[derive(Clone, Debug, PartialEq)]
pub struct MethodMetrics {
    pub label: String,
    pub method: Method,
    pub k: usize,
    /// Against the true mean when known, otherwise against observed `y`.
    pub train_rmse: f64,
    pub test_rmse: Option<f64>,
    pub mean_leaves: f64,
    pub sigma2: ScalarSummary,
    pub train_ci: Option<f64>,
    pub test_ci: Option<f64>,
    pub train_pi: Option<f64>,
    pub test_pi: Option<f64>,
    /// grow, prune, change, swap.
    pub acceptance: [Option<f64>; 4],
    pub seconds_per_iteration: f64,
    /// Relative to the full-data method of the same replication.
    pub speedup: Option<f64>,
    /// Mean ω̂² to the full-data f̂ draws over recorded training points.
    pub mean_cvm: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub replications: Vec<Vec<MethodMetrics>>,
}

impl Report {
    pub fn metric(&self, r: usize, label: &str) -> Option<&MethodMetrics> {
        self.replications.get(r)?.iter().find(|m| m.label == label)
    }

    /// Per-method averages across replications (undefined entries are
    /// averaged over the replications that define them).
    pub fn averaged(&self) -> Vec<MethodMetrics> {
        let first = &self.replications[0];
        first
            .iter()
            .map(|m0| {
                let rows: Vec<&MethodMetrics> = self
                    .replications
                    .iter()
                    .filter_map(|rep| rep.iter().find(|m| m.label == m0.label))
                    .collect();
                let avg = |f: &dyn Fn(&MethodMetrics) -> f64| {
                    rows.iter().map(|m| f(m)).sum::<f64>() / rows.len() as f64
                };
                let avg_opt = |f: &dyn Fn(&MethodMetrics) -> Option<f64>| {
                    let v: Vec<f64> = rows.iter().filter_map(|m| f(m)).collect();
                    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
                };
                let mut acc = [None; 4];
                for (i, a) in acc.iter_mut().enumerate() {
                    *a = avg_opt(&|m| m.acceptance[i]);
                }
                MethodMetrics {
                    label: m0.label.clone(),
                    method: m0.method,
                    k: m0.k,
                    train_rmse: avg(&|m| m.train_rmse),
                    test_rmse: avg_opt(&|m| m.test_rmse),
                    mean_leaves: avg(&|m| m.mean_leaves),
                    sigma2: ScalarSummary {
                        mean: avg(&|m| m.sigma2.mean),
                        interval: crate::diagnostics::IntervalEstimate {
                            lower: avg(&|m| m.sigma2.interval.lower),
                            upper: avg(&|m| m.sigma2.interval.upper),
                            level: m0.sigma2.interval.level,
                        },
                    },
                    train_ci: avg_opt(&|m| m.train_ci),
                    test_ci: avg_opt(&|m| m.test_ci),
                    train_pi: avg_opt(&|m| m.train_pi),
                    test_pi: avg_opt(&|m| m.test_pi),
                    acceptance: acc,
                    seconds_per_iteration: avg(&|m| m.seconds_per_iteration),
                    speedup: avg_opt(&|m| m.speedup),
                    mean_cvm: avg_opt(&|m| m.mean_cvm),
                }
            })
            .collect()
    }
}

/// Mean ω̂² between the per-point draws of `a` and `b`, plus the per-point
/// values.
pub fn pointwise_cvm(a: &DrawMatrix, b: &DrawMatrix, grid: usize) -> Result<Vec<f64>> {
    if a.n_points() != b.n_points() {
        return Err(Error::Alignment(
            "draw matrices cover different points".into(),
        ));
    }
    (0..a.n_points())
        .map(|j| cvm_distance(&Ecdf::new(&a.column(j))?, &Ecdf::new(&b.column(j))?, grid))
        .collect()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn method_metrics(
    label: &str,
    run: &MethodRun,
    data: &ReplicationData,
    full: Option<&MethodRun>,
    rng: &mut RngStream,
) -> Result<MethodMetrics> {
    let c = &run.combined;
    let n_eval = c.f_train.n_points();
    let train_truth: Vec<f64> = match &data.train_f {
        Some(f) => f[..n_eval].to_vec(),
        None => data.train.response()[..n_eval].to_vec(),
    };
    let test_truth: Vec<f64> = match &data.test_f {
        Some(f) => f.clone(),
        None => data.test.response().to_vec(),
    };
    let has_test = c.f_test.n_points() > 0;
    let known = data.train_f.is_some();
    let mut total = crate::bart::MoveCounters::default();
    let mut leaves = 0.0;
    for ch in &run.chains {
        total.add(&ch.draws.total_moves());
        leaves += ch.draws.mean_leaf_count();
    }
    let (train_pi, test_pi) = match data.sigma2 {
        Some(s2) if known => (
            Some(pi_coverage(
                &train_truth,
                s2,
                &c.f_train,
                &c.sigma2,
                LEVEL,
                PI_REPLICATES,
                rng,
            )?),
            if has_test {
                Some(pi_coverage(
                    &test_truth,
                    s2,
                    &c.f_test,
                    &c.sigma2,
                    LEVEL,
                    PI_REPLICATES,
                    rng,
                )?)
            } else {
                None
            },
        ),
        _ => (None, None),
    };
    let t = run.seconds_per_iteration();
    let speed = match full {
        Some(f) if f.seconds_per_iteration() > 0.0 => Some(speedup(t, f.seconds_per_iteration())?),
        _ => None,
    };
    let mean_cvm = match full {
        Some(f) if f.combined.f_train.n_points() == n_eval && n_eval > 0 => Some(mean(
            &pointwise_cvm(&c.f_train, &f.combined.f_train, CVM_GRID)?,
        )),
        _ => None,
    };
    Ok(MethodMetrics {
        label: label.to_string(),
        method: run.config.method,
        k: run.config.k,
        train_rmse: rmse(&train_truth, &c.f_train.point_means())?,
        test_rmse: if has_test {
            Some(rmse(&test_truth, &c.f_test.point_means())?)
        } else {
            None
        },
        mean_leaves: leaves / run.chains.len() as f64,
        sigma2: summarize(&c.sigma2, LEVEL)?,
        train_ci: if known {
            Some(ci_coverage(&train_truth, &c.f_train, LEVEL)?)
        } else {
            None
        },
        test_ci: if known && has_test {
            Some(ci_coverage(&test_truth, &c.f_test, LEVEL)?)
        } else {
            None
        },
        train_pi,
        test_pi,
        acceptance: acceptance_summary(&total),
        seconds_per_iteration: t,
        speedup: speed,
        mean_cvm,
    })
}

/// Loads every method of every replication and computes its metrics.
pub fn build_report(run_dir: &Path) -> Result<Report> {
    let (reps, labels) = read_run_index(run_dir)?;
    let mut missing = Vec::new();
    for r in 0..reps {
        for l in &labels {
            missing.extend(crate::orchestrate::missing_method_files(
                &replication_dir(run_dir, r).join(l),
            ));
        }
    }
    if !missing.is_empty() {
        return Err(Error::IncompleteRun {
            dir: run_dir.to_path_buf(),
            missing,
        });
    }
    let mut out = Vec::with_capacity(reps);
    for r in 0..reps {
        let dir = replication_dir(run_dir, r);
        let data = read_replication_data(&dir)?;
        let runs: Vec<MethodRun> = labels
            .iter()
            .map(|l| read_method_dir(&dir.join(l)))
            .collect::<Result<_>>()?;
        let full = runs.iter().find(|m| m.config.method == Method::Full);
        let mut rng = RngStream::new(runs[0].config.seed, STREAM_DIAGNOSTICS);
        let rows = labels
            .iter()
            .zip(&runs)
            .map(|(l, run)| method_metrics(l, run, &data, full, &mut rng))
            .collect::<Result<Vec<_>>>()?;
        out.push(rows);
    }
    Ok(Report { replications: out })
}

fn pct(v: Option<f64>) -> String {
    v.map_or("n/a".into(), |x| format!("{:.2}%", 100.0 * x))
}

fn num(v: Option<f64>, digits: usize) -> String {
    v.map_or("n/a".into(), |x| format!("{x:.digits$}"))
}

pub fn table_fit(rows: &[MethodMetrics]) -> String {
    let mut s = format!(
        "{:<22} {:>10} {:>10} {:>10} {:>10} {:>22}\n",
        "Method", "TrainRMSE", "TestRMSE", "Leaves", "Avg s2", "95% CI for s2"
    );
    for m in rows {
        let _ = writeln!(
            s,
            "{:<22} {:>10.4} {:>10} {:>10.1} {:>10.4} {:>22}",
            m.label,
            m.train_rmse,
            num(m.test_rmse, 4),
            m.mean_leaves,
            m.sigma2.mean,
            format!(
                "({:.4}, {:.4})",
                m.sigma2.interval.lower, m.sigma2.interval.upper
            )
        );
    }
    s
}

pub fn table_coverage(rows: &[MethodMetrics]) -> String {
    let mut s = format!(
        "{:<22} {:>13} {:>13} {:>13} {:>13}\n",
        "Method", "TrainCredCov", "TestCredCov", "TrainPredCov", "TestPredCov"
    );
    for m in rows {
        let _ = writeln!(
            s,
            "{:<22} {:>13} {:>13} {:>13} {:>13}",
            m.label,
            pct(m.train_ci),
            pct(m.test_ci),
            pct(m.train_pi),
            pct(m.test_pi)
        );
    }
    s
}

pub fn table_moves(rows: &[MethodMetrics]) -> String {
    let mut s = format!(
        "{:<22} {:>8} {:>8} {:>8} {:>8} {:>10} {:>10} {:>10}\n",
        "Method", "GROW", "PRUNE", "CHANGE", "SWAP", "s/iter", "speedup", "mean w2"
    );
    for m in rows {
        let _ = writeln!(
            s,
            "{:<22} {:>8} {:>8} {:>8} {:>8} {:>10.5} {:>10} {:>10}",
            m.label,
            pct(m.acceptance[0]),
            pct(m.acceptance[1]),
            pct(m.acceptance[2]),
            pct(m.acceptance[3]),
            m.seconds_per_iteration,
            m.speedup.map_or("n/a".into(), |v| format!("{v:.1}%")),
            num(m.mean_cvm, 5)
        );
    }
    s
}

const METRIC_NAMES: [&str; 17] = [
    "k",
    "train_rmse",
    "test_rmse",
    "mean_leaves",
    "sigma2_mean",
    "sigma2_lower",
    "sigma2_upper",
    "train_ci_coverage",
    "test_ci_coverage",
    "train_pi_coverage",
    "test_pi_coverage",
    "accept_grow",
    "accept_prune",
    "accept_change",
    "seconds_per_iteration",
    "speedup_percent",
    "mean_cvm",
];

fn metric_values(m: &MethodMetrics) -> [Option<f64>; 17] {
    [
        Some(m.k as f64),
        Some(m.train_rmse),
        m.test_rmse,
        Some(m.mean_leaves),
        Some(m.sigma2.mean),
        Some(m.sigma2.interval.lower),
        Some(m.sigma2.interval.upper),
        m.train_ci,
        m.test_ci,
        m.train_pi,
        m.test_pi,
        m.acceptance[0],
        m.acceptance[1],
        m.acceptance[2],
        Some(m.seconds_per_iteration),
        m.speedup,
        m.mean_cvm,
    ]
}

fn write_series(
    path: &Path,
    header: [&str; 3],
    rows: impl Iterator<Item = (String, f64, f64)>,
) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for (a, x, y) in rows {
        w.write_record([a, x.to_string(), y.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `report/` under the run directory: the three text tables
/// (replication averages), `metrics.csv` with (replication, method, metric,
/// value) rows, and plot data: for each requested training point an ECDF
/// series per method, and per replication the ω̂²-versus-full-mean series.
pub fn write_report(run_dir: &Path, report: &Report, ecdf_points: &[usize]) -> Result<PathBuf> {
    let out = run_dir.join("report");
    fs::create_dir_all(&out)?;
    let avg = report.averaged();
    fs::write(out.join("table_fit.txt"), table_fit(&avg))?;
    fs::write(out.join("table_coverage.txt"), table_coverage(&avg))?;
    fs::write(out.join("table_moves.txt"), table_moves(&avg))?;

    let mut w = csv::Writer::from_path(out.join("metrics.csv"))?;
    w.write_record(["replication", "method", "metric", "value"])?;
    let tagged = report
        .replications
        .iter()
        .enumerate()
        .map(|(r, rows)| (r.to_string(), rows))
        .chain(std::iter::once(("mean".to_string(), &avg)));
    for (tag, rows) in tagged {
        for m in rows {
            for (name, v) in METRIC_NAMES.iter().zip(metric_values(m)) {
                if let Some(v) = v {
                    w.write_record([tag.as_str(), m.label.as_str(), name, &v.to_string()])?;
                }
            }
        }
    }
    w.flush()?;

    let (reps, labels) = read_run_index(run_dir)?;
    for r in 0..reps {
        let dir = replication_dir(run_dir, r);
        let runs: Vec<MethodRun> = labels
            .iter()
            .map(|l| read_method_dir(&dir.join(l)))
            .collect::<Result<_>>()?;
        for &j in ecdf_points {
            let mut series = Vec::new();
            for (l, run) in labels.iter().zip(&runs) {
                if j >= run.combined.f_train.n_points() {
                    return Err(Error::invalid(format!("no recorded training point {j}")));
                }
                let e = Ecdf::new(&run.combined.f_train.column(j))?;
                let n = e.samples().len() as f64;
                series.extend(
                    e.samples()
                        .iter()
                        .enumerate()
                        .map(|(i, &t)| (l.clone(), t, (i + 1) as f64 / n)),
                );
            }
            write_series(
                &out.join(format!("ecdf_rep{r}_point{j}.csv")),
                ["method", "t", "F"],
                series.into_iter(),
            )?;
        }
        if let Some(full) = runs.iter().find(|m| m.config.method == Method::Full) {
            let full_mean = full.combined.f_train.point_means();
            let mut series = Vec::new();
            for (l, run) in labels.iter().zip(&runs) {
                if run.config.method == Method::Full {
                    continue;
                }
                let w2 = pointwise_cvm(&run.combined.f_train, &full.combined.f_train, CVM_GRID)?;
                series.extend(full_mean.iter().zip(w2).map(|(&x, y)| (l.clone(), x, y)));
            }
            write_series(
                &out.join(format!("omega_rep{r}.csv")),
                ["method", "full_mean_prediction", "omega2"],
                series.into_iter(),
            )?;
        }
    }
    Ok(out)
}
