//! Run configuration: TOML file sections merged with command-line flags.
//!
//! Precedence, lowest first: built-in defaults, `[defaults]`, the method's
//! own `[method.<label>]` section, then flags given on the command line.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use lisa_core::bart::{BartSettings, MoveProbs};
use lisa_core::experiment::{DataSource, ExperimentSpec};
use lisa_core::{CategoricalPolicy, CombineRule, Generator, Method, MethodConfig};
use serde::Deserialize;

pub const DEFAULT_K: usize = 4;
pub const DEFAULT_ITERATIONS: usize = 1000;
pub const DEFAULT_BURN_IN: usize = 250;
pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub data: DataSection,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub defaults: MethodSection,
    #[serde(default)]
    pub method: BTreeMap<String, MethodSection>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub generator: Option<String>,
    pub n_train: Option<usize>,
    pub n_test: Option<usize>,
    pub sigma2: Option<f64>,
    /// CSV file split into train/test per replication.
    pub path: Option<PathBuf>,
    pub response: Option<String>,
    pub test_fraction: Option<f64>,
    /// `"auto"` or a list of column names.
    pub one_hot: Option<OneHot>,
    /// Directory written by `simulate`.
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum OneHot {
    Auto(String),
    Columns(Vec<String>),
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub out: Option<PathBuf>,
    pub replications: Option<usize>,
    pub seed: Option<u64>,
    pub eval_train_limit: Option<usize>,
    /// Method labels, in output order.
    pub methods: Option<Vec<String>>,
}

/// Per-method knobs; every field optional so sections can be layered.
#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodSection {
    pub method: Option<String>,
    pub k: Option<usize>,
    pub iterations: Option<usize>,
    pub burn_in: Option<usize>,
    pub seed: Option<u64>,
    pub combine_rule: Option<String>,
    pub workers: Option<usize>,
    pub trees: Option<usize>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub prior_k: Option<f64>,
    pub nu: Option<f64>,
    pub q: Option<f64>,
    pub max_depth: Option<usize>,
    pub standardize: Option<bool>,
    pub swap: Option<bool>,
}

impl MethodSection {
    /// Fields set in `over` replace those in `self`.
    pub fn layered(&self, over: &MethodSection) -> MethodSection {
        macro_rules! pick {
            ($($f:ident),*) => { MethodSection { $($f: over.$f.clone().or_else(|| self.$f.clone())),* } };
        }
        pick!(
            method,
            k,
            iterations,
            burn_in,
            seed,
            combine_rule,
            workers,
            trees,
            alpha,
            beta,
            prior_k,
            nu,
            q,
            max_depth,
            standardize,
            swap
        )
    }

    pub fn to_config(&self, label: &str) -> Result<MethodConfig, String> {
        let method: Method = self
            .method
            .as_deref()
            .unwrap_or(label)
            .parse()
            .map_err(|e| format!("{e}"))?;
        let k = match method {
            Method::Full => 1,
            _ => self.k.unwrap_or(DEFAULT_K),
        };
        let iterations = self.iterations.unwrap_or(DEFAULT_ITERATIONS);
        let burn_in = self
            .burn_in
            .unwrap_or(DEFAULT_BURN_IN.min(iterations.saturating_sub(1)));
        let d = BartSettings::default();
        let bart = BartSettings {
            m: self.trees.unwrap_or(d.m),
            alpha: self.alpha.unwrap_or(d.alpha),
            beta_depth: self.beta.unwrap_or(d.beta_depth),
            k: self.prior_k.unwrap_or(d.k),
            nu: self.nu.unwrap_or(d.nu),
            q: self.q.unwrap_or(d.q),
            move_probs: if self.swap.unwrap_or(false) {
                MoveProbs::with_swap()
            } else {
                d.move_probs
            },
            max_depth: self.max_depth.or(d.max_depth),
            standardize: self.standardize.unwrap_or(d.standardize),
        };
        let mut cfg = MethodConfig::new(
            method,
            k,
            iterations,
            burn_in,
            self.seed.unwrap_or(DEFAULT_SEED),
        )
        .map_err(|e| format!("method `{label}`: {e}"))?
        .with_bart(bart)
        .with_workers(self.workers.unwrap_or(0));
        if let Some(r) = &self.combine_rule {
            cfg = cfg.with_combine(
                r.parse::<CombineRule>()
                    .map_err(|e| format!("method `{label}`: {e}"))?,
            );
        }
        cfg.validate()
            .map_err(|e| format!("method `{label}`: {e}"))?;
        Ok(cfg)
    }
}

pub fn read_config(path: &Path) -> Result<ConfigFile, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
}

pub fn data_source(d: &DataSection) -> Result<DataSource, String> {
    let chosen = [d.generator.is_some(), d.path.is_some(), d.dir.is_some()]
        .iter()
        .filter(|&&b| b)
        .count();
    if chosen > 1 {
        return Err(
            "choose one data source: a generator, a CSV path or a prepared directory".into(),
        );
    }
    if let Some(dir) = &d.dir {
        return Ok(DataSource::Prepared { dir: dir.clone() });
    }
    if let Some(path) = &d.path {
        let policy = match &d.one_hot {
            None => CategoricalPolicy::Reject,
            Some(OneHot::Auto(s)) if s == "auto" => CategoricalPolicy::OneHotDetected,
            Some(OneHot::Auto(s)) => CategoricalPolicy::OneHotColumns(
                s.split(',').map(|c| c.trim().to_string()).collect(),
            ),
            Some(OneHot::Columns(c)) => CategoricalPolicy::OneHotColumns(c.clone()),
        };
        return Ok(DataSource::Csv {
            path: path.clone(),
            response: d.response.clone().unwrap_or_else(|| "y".into()),
            test_fraction: d.test_fraction.unwrap_or(0.2),
            policy,
        });
    }
    let generator: Generator = d
        .generator
        .as_deref()
        .unwrap_or("friedman")
        .parse()
        .map_err(|e| format!("{e}"))?;
    Ok(DataSource::Simulated {
        generator,
        n_train: d.n_train.unwrap_or(1000),
        n_test: d.n_test.unwrap_or(1000),
        sigma2: d.sigma2.unwrap_or(1.0),
    })
}

/// Builds the experiment from a (possibly empty) config file and the
/// command-line overrides.
pub fn experiment_spec(
    file: &ConfigFile,
    data: &DataSection,
    run: &RunSection,
    flags: &MethodSection,
) -> Result<ExperimentSpec, String> {
    // a source named on the command line replaces the file's source
    let cli_source = data.generator.is_some() || data.path.is_some() || data.dir.is_some();
    let base = &file.data;
    let data = DataSection {
        generator: if cli_source {
            data.generator.clone()
        } else {
            base.generator.clone()
        },
        path: if cli_source {
            data.path.clone()
        } else {
            base.path.clone()
        },
        dir: if cli_source {
            data.dir.clone()
        } else {
            base.dir.clone()
        },
        n_train: data.n_train.or(base.n_train),
        n_test: data.n_test.or(base.n_test),
        sigma2: data.sigma2.or(base.sigma2),
        response: data.response.clone().or_else(|| base.response.clone()),
        test_fraction: data.test_fraction.or(base.test_fraction),
        one_hot: data.one_hot.clone().or_else(|| base.one_hot.clone()),
    };
    let source = data_source(&data)?;

    let labels: Vec<String> = match (&run.methods, &file.run.methods) {
        (Some(m), _) | (None, Some(m)) => m.clone(),
        (None, None) if !file.method.is_empty() => file.method.keys().cloned().collect(),
        (None, None) => vec!["full".into()],
    };
    if labels.is_empty() {
        return Err("no methods selected".into());
    }
    let mut methods = Vec::with_capacity(labels.len());
    for label in &labels {
        let own = file.method.get(label).cloned().unwrap_or_default();
        if own.k.is_some_and(|k| k != 1)
            && own
                .method
                .as_deref()
                .unwrap_or(label)
                .parse::<Method>()
                .ok()
                == Some(Method::Full)
        {
            return Err(format!("[method.{label}]: full-data sampling uses K = 1"));
        }
        let merged = file.defaults.layered(&own).layered(flags);
        methods.push(merged.to_config(label)?);
    }
    for name in file.method.keys() {
        if !labels.contains(name) {
            return Err(format!(
                "section [method.{name}] is not among the selected methods ({})",
                labels.join(", ")
            ));
        }
    }
    let out = run
        .out
        .clone()
        .or_else(|| file.run.out.clone())
        .ok_or("an output directory is required (--out or [run] out)")?;
    let spec = ExperimentSpec {
        source,
        methods,
        replications: run.replications.or(file.run.replications).unwrap_or(1),
        out_dir: out,
        seed: run.seed.or(file.run.seed).unwrap_or(DEFAULT_SEED),
        eval_train_limit: run.eval_train_limit.or(file.run.eval_train_limit),
    };
    spec.validate().map_err(|e| e.to_string())?;
    Ok(spec)
}
