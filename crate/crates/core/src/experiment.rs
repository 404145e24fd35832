//! End-to-end studies: data preparation, every method's chains and the
//! persisted run directory.
//!
//! Layout of a run directory:
//!
//! ```text
//! run.txt                      replication count and method labels
//! rep{r}/train.csv, test.csv   data (response column `y`)
//! rep{r}/truth.csv             optional: split,f for every row
//! rep{r}/data.txt              data provenance and noise variance
//! rep{r}/{label}/              one method, see `orchestrate::write_method_dir`
//! ```

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;

use crate::config::{CombineRule, MethodConfig};
use crate::data::{load_csv, read_key_values, write_key_values, CategoricalPolicy, Dataset};
use crate::error::{Error, Result};
use crate::generate::Generator;
use crate::orchestrate::{
    combine, read_method_dir, run_chains, write_method_dir, EvalPoints, MethodRun,
};
use crate::rng::{RngStream, STREAM_TEST_DATA, STREAM_TRAIN_DATA};

pub const RUN_FILE: &str = "run.txt";
pub const DATA_FILE: &str = "data.txt";
pub const TRUTH_FILE: &str = "truth.csv";
pub const RESPONSE: &str = "y";

#[derive(Clone, Debug, PartialEq)]
pub enum DataSource {
    Simulated {
        generator: Generator,
        n_train: usize,
        n_test: usize,
        sigma2: f64,
    },
    Csv {
        path: PathBuf,
        response: String,
        test_fraction: f64,
        policy: CategoricalPolicy,
    },
    /// A directory already holding `train.csv`, `test.csv` and `data.txt`
    /// (and optionally `truth.csv`); every replication reuses it.
    Prepared { dir: PathBuf },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub source: DataSource,
    pub methods: Vec<MethodConfig>,
    pub replications: usize,
    pub out_dir: PathBuf,
    /// Replication r uses data seed `seed + r` and chain seed
    /// `config.seed + r`.
    pub seed: u64,
    /// Caps the number of training rows at which f̂ is recorded.
    pub eval_train_limit: Option<usize>,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::InvalidConfiguration(
                "replication count must be at least 1".into(),
            ));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidConfiguration("no methods to run".into()));
        }
        if let DataSource::Csv { test_fraction, .. } = &self.source {
            if !(*test_fraction > 0.0 && *test_fraction < 1.0) {
                return Err(Error::InvalidConfiguration(format!(
                    "test fraction must lie in (0, 1), got {test_fraction}"
                )));
            }
        }
        let labels: Vec<String> = self.methods.iter().map(method_label).collect();
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return Err(Error::InvalidConfiguration(format!(
                    "method `{l}` listed twice"
                )));
            }
        }
        for m in &self.methods {
            m.validate()?;
        }
        Ok(())
    }
}

/// Directory name of a method: its name, suffixed with the combination rule
/// when that differs from the method's default.
pub fn method_label(c: &MethodConfig) -> String {
    if c.combine == c.method.default_rule() {
        c.method.name().to_string()
    } else {
        format!("{}-{}", c.method.name(), c.combine.name())
    }
}

/// Train/test data of one replication, with the noise-free mean when known.
#[derive(Clone, Debug, PartialEq)]
pub struct ReplicationData {
    pub train: Dataset,
    pub test: Dataset,
    pub train_f: Option<Vec<f64>>,
    pub test_f: Option<Vec<f64>>,
    pub sigma2: Option<f64>,
}

pub fn prepare_replication(source: &DataSource, seed: u64) -> Result<ReplicationData> {
    match source {
        DataSource::Prepared { dir } => read_replication_data(dir),
        DataSource::Simulated {
            generator,
            n_train,
            n_test,
            sigma2,
        } => {
            let train = generator.generate(
                *n_train,
                *sigma2,
                &mut RngStream::new(seed, STREAM_TRAIN_DATA),
            )?;
            let test = generator.generate(
                *n_test,
                *sigma2,
                &mut RngStream::new(seed, STREAM_TEST_DATA),
            )?;
            Ok(ReplicationData {
                train: train.dataset,
                test: test.dataset,
                train_f: Some(train.true_f),
                test_f: Some(test.true_f),
                sigma2: Some(*sigma2),
            })
        }
        DataSource::Csv {
            path,
            response,
            test_fraction,
            policy,
        } => {
            let all = load_csv(path, response, policy)?;
            let n_test = ((all.n() as f64) * test_fraction).round() as usize;
            if n_test == 0 || n_test >= all.n() {
                return Err(Error::invalid(format!(
                    "test fraction {test_fraction} leaves an empty split of {} rows",
                    all.n()
                )));
            }
            let mut perm: Vec<usize> = (0..all.n()).collect();
            perm.shuffle(&mut RngStream::new(seed, STREAM_TEST_DATA));
            let (test_idx, train_idx) = perm.split_at_mut(n_test);
            test_idx.sort_unstable();
            train_idx.sort_unstable();
            Ok(ReplicationData {
                train: all.subset(train_idx),
                test: all.subset(test_idx),
                train_f: None,
                test_f: None,
                sigma2: None,
            })
        }
    }
}

pub fn replication_dir(run_dir: &Path, r: usize) -> PathBuf {
    run_dir.join(format!("rep{r}"))
}

pub fn write_replication_data(
    dir: &Path,
    data: &ReplicationData,
    meta: &[(String, String)],
) -> Result<()> {
    fs::create_dir_all(dir)?;
    data.train.write_csv(&dir.join("train.csv"), RESPONSE)?;
    data.test.write_csv(&dir.join("test.csv"), RESPONSE)?;
    if let (Some(a), Some(b)) = (&data.train_f, &data.test_f) {
        let mut w = csv::Writer::from_path(dir.join(TRUTH_FILE))?;
        w.write_record(["split", "f"])?;
        for v in a {
            w.write_record(["train", &v.to_string()])?;
        }
        for v in b {
            w.write_record(["test", &v.to_string()])?;
        }
        w.flush()?;
    }
    let mut kv = meta.to_vec();
    kv.push(("n_train".into(), data.train.n().to_string()));
    kv.push(("n_test".into(), data.test.n().to_string()));
    if let Some(s) = data.sigma2 {
        kv.push(("sigma2".into(), s.to_string()));
    }
    write_key_values(&dir.join(DATA_FILE), &kv)
}

pub fn read_replication_data(dir: &Path) -> Result<ReplicationData> {
    let missing: Vec<String> = ["train.csv", "test.csv", DATA_FILE]
        .iter()
        .filter(|f| !dir.join(f).is_file())
        .map(|f| dir.join(f).display().to_string())
        .collect();
    if !missing.is_empty() {
        return Err(Error::IncompleteRun {
            dir: dir.to_path_buf(),
            missing,
        });
    }
    let none = CategoricalPolicy::Reject;
    let train = load_csv(&dir.join("train.csv"), RESPONSE, &none)?;
    let test = load_csv(&dir.join("test.csv"), RESPONSE, &none)?;
    let meta = read_key_values(&dir.join(DATA_FILE))?;
    let sigma2 = match meta.iter().find(|(k, _)| k == "sigma2") {
        Some((_, v)) => Some(v.parse::<f64>().map_err(|e| Error::Format {
            path: dir.join(DATA_FILE),
            message: format!("sigma2: {e}"),
        })?),
        None => None,
    };
    let (mut train_f, mut test_f) = (None, None);
    let truth = dir.join(TRUTH_FILE);
    if truth.is_file() {
        let (mut a, mut b) = (Vec::new(), Vec::new());
        for rec in csv::Reader::from_path(&truth)?.records() {
            let rec = rec?;
            let v: f64 = rec[1].parse().map_err(|_| Error::Format {
                path: truth.clone(),
                message: format!("cannot parse `{}`", &rec[1]),
            })?;
            if &rec[0] == "train" {
                a.push(v)
            } else {
                b.push(v)
            }
        }
        train_f = Some(a);
        test_f = Some(b);
    }
    Ok(ReplicationData {
        train,
        test,
        train_f,
        test_f,
        sigma2,
    })
}

/// Runs `config` with chain seed offset by the replication index.
pub fn run_method(
    data: &ReplicationData,
    config: &MethodConfig,
    eval: &EvalPoints,
    r: usize,
) -> Result<MethodRun> {
    let mut cfg = config.clone();
    cfg.seed = config.seed.wrapping_add(r as u64);
    let start = Instant::now();
    let chains = run_chains(&data.train, &cfg, eval)?;
    let combined = combine(&chains, cfg.method, cfg.combine)?;
    Ok(MethodRun {
        config: cfg,
        chains,
        combined,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Runs every method on every replication and persists the results under
/// `spec.out_dir`.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<PathBuf> {
    spec.validate()?;
    fs::create_dir_all(&spec.out_dir)?;
    let labels: Vec<String> = spec.methods.iter().map(method_label).collect();
    for r in 0..spec.replications {
        let seed = spec.seed.wrapping_add(r as u64);
        let data = prepare_replication(&spec.source, seed)?;
        let dir = replication_dir(&spec.out_dir, r);
        let mut meta = vec![("seed".to_string(), seed.to_string())];
        match &spec.source {
            DataSource::Simulated { generator, .. } => {
                meta.push(("generator".into(), generator.name().into()))
            }
            DataSource::Csv { path, .. } => {
                meta.push(("source".into(), path.display().to_string()))
            }
            DataSource::Prepared { dir } => meta.push(("source".into(), dir.display().to_string())),
        }
        let eval = EvalPoints::from_datasets(&data.train, Some(&data.test), spec.eval_train_limit)?;
        meta.push(("eval_train".into(), eval.n_train().to_string()));
        write_replication_data(&dir, &data, &meta)?;
        for (cfg, label) in spec.methods.iter().zip(&labels) {
            let run = run_method(&data, cfg, &eval, r)?;
            write_method_dir(&dir.join(label), &run)?;
        }
    }
    write_key_values(
        &spec.out_dir.join(RUN_FILE),
        &[
            ("replications".into(), spec.replications.to_string()),
            ("methods".into(), labels.join(",")),
            ("seed".into(), spec.seed.to_string()),
        ],
    )?;
    Ok(spec.out_dir.clone())
}

/// Re-merges the stored chains of method `label` under `rule` in every
/// replication, writing a new method directory and registering it in the
/// run index. Returns the new label.
pub fn recombine(run_dir: &Path, label: &str, rule: CombineRule) -> Result<String> {
    let (reps, mut labels) = read_run_index(run_dir)?;
    if !labels.iter().any(|l| l == label) {
        return Err(Error::invalid(format!(
            "run has no method `{label}` (have {})",
            labels.join(", ")
        )));
    }
    let mut new_label = None;
    for r in 0..reps {
        let dir = replication_dir(run_dir, r);
        let mut run = read_method_dir(&dir.join(label))?;
        run.combined = combine(&run.chains, run.config.method, rule)?;
        run.config.combine = rule;
        let l = method_label(&run.config);
        write_method_dir(&dir.join(&l), &run)?;
        new_label = Some(l);
    }
    let new_label = new_label.expect("at least one replication");
    if !labels.contains(&new_label) {
        labels.push(new_label.clone());
    }
    let path = run_dir.join(RUN_FILE);
    let mut kv = read_key_values(&path)?;
    for (k, v) in kv.iter_mut() {
        if k == "methods" {
            *v = labels.join(",");
        }
    }
    write_key_values(&path, &kv)?;
    Ok(new_label)
}

/// Replication count and method labels of a finished run directory.
pub fn read_run_index(run_dir: &Path) -> Result<(usize, Vec<String>)> {
    let path = run_dir.join(RUN_FILE);
    if !path.is_file() {
        return Err(Error::IncompleteRun {
            dir: run_dir.to_path_buf(),
            missing: vec![path.display().to_string()],
        });
    }
    let kv = read_key_values(&path)?;
    let get = |key: &str| {
        kv.iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.clone())
            .ok_or_else(|| Error::Format {
                path: path.clone(),
                message: format!("missing key `{key}`"),
            })
    };
    let reps = get("replications")?.parse().map_err(|e| Error::Format {
        path: path.clone(),
        message: format!("replications: {e}"),
    })?;
    let methods = get("methods")?.split(',').map(str::to_string).collect();
    Ok((reps, methods))
}
