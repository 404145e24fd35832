use std::collections::HashMap;
use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::chain::{ChainDraws, ChainOutput};
use super::combine::CombinedPosterior;
use crate::bart::{BartHyper, BartSettings, MoveCounters, MoveKind, MoveProbs};
use crate::config::{CombineRule, MethodConfig};
use crate::data::{read_key_values, write_key_values};
use crate::draws::DrawMatrix;
use crate::error::{Error, Result};

pub const MANIFEST: &str = "manifest.txt";
pub const COMBINED_F: &str = "combined_f.csv";
pub const COMBINED_SIGMA2: &str = "combined_sigma2.csv";

pub fn chain_file(shard_id: usize) -> String {
    format!("chain_{shard_id}.csv")
}

/// Everything persisted for one method in one replication.
#[derive(Clone, Debug, PartialEq)]
pub struct MethodRun {
    pub config: MethodConfig,
    pub chains: Vec<ChainOutput>,
    pub combined: CombinedPosterior,
    pub wall_seconds: f64,
}

impl MethodRun {
    /// Seconds per sweep of the slowest chain, the time a parallel run waits.
    pub fn seconds_per_iteration(&self) -> f64 {
        self.chains
            .iter()
            .map(|c| c.seconds_per_iteration)
            .fold(0.0, f64::max)
    }
}

fn format_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

fn counter_columns() -> Vec<String> {
    MoveKind::ALL
        .iter()
        .flat_map(|k| {
            [
                format!("{}_proposed", k.name()),
                format!("{}_accepted", k.name()),
            ]
        })
        .collect()
}

/// One CSV row per retained draw. Floats use the shortest representation
/// that parses back to the identical value.
pub fn write_chain_csv(path: &Path, draws: &ChainDraws, first_iteration: usize) -> Result<()> {
    draws.check_aligned()?;
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec![
        "iteration".to_string(),
        "sigma2".into(),
        "leaf_count".into(),
    ];
    header.extend(counter_columns());
    header.extend((0..draws.f_train.n_points()).map(|j| format!("ftrain_{j}")));
    header.extend((0..draws.f_test.n_points()).map(|j| format!("ftest_{j}")));
    w.write_record(&header)?;
    for s in 0..draws.len() {
        let mut rec = vec![
            (first_iteration + s).to_string(),
            draws.sigma2[s].to_string(),
            draws.leaf_count[s].to_string(),
        ];
        let m = &draws.moves[s];
        for k in 0..4 {
            rec.push(m.proposed[k].to_string());
            rec.push(m.accepted[k].to_string());
        }
        if draws.f_train.n_points() > 0 {
            rec.extend(draws.f_train.draw(s).iter().map(f64::to_string));
        }
        if draws.f_test.n_points() > 0 {
            rec.extend(draws.f_test.draw(s).iter().map(f64::to_string));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn parse_cell<T: FromStr>(path: &Path, row: usize, cell: &str) -> Result<T> {
    cell.parse()
        .map_err(|_| format_err(path, format!("row {row}: cannot parse `{cell}`")))
}

pub fn read_chain_csv(path: &Path) -> Result<ChainDraws> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.clone();
    let n_train = header.iter().filter(|h| h.starts_with("ftrain_")).count();
    let n_test = header.iter().filter(|h| h.starts_with("ftest_")).count();
    let fixed = 3 + 8;
    if header.len() != fixed + n_train + n_test || header.get(1) != Some("sigma2") {
        return Err(format_err(path, "unexpected chain header"));
    }
    let mut d = ChainDraws {
        f_train: DrawMatrix::new(n_train),
        f_test: DrawMatrix::new(n_test),
        ..Default::default()
    };
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (row, rec) in r.records().enumerate() {
        let rec = rec?;
        d.sigma2.push(parse_cell(path, row, &rec[1])?);
        d.leaf_count.push(parse_cell(path, row, &rec[2])?);
        let mut m = MoveCounters::default();
        for k in 0..4 {
            m.proposed[k] = parse_cell(path, row, &rec[3 + 2 * k])?;
            m.accepted[k] = parse_cell(path, row, &rec[4 + 2 * k])?;
        }
        d.moves.push(m);
        for j in 0..n_train {
            train.push(parse_cell(path, row, &rec[fixed + j])?);
        }
        for j in 0..n_test {
            test.push(parse_cell(path, row, &rec[fixed + n_train + j])?);
        }
    }
    d.f_train = DrawMatrix::from_rows(n_train, train)?;
    d.f_test = DrawMatrix::from_rows(n_test, test)?;
    Ok(d)
}

/// Writes `combined_f.csv` (one row per f̂ draw) and `combined_sigma2.csv`.
pub fn write_combined(dir: &Path, c: &CombinedPosterior) -> Result<()> {
    let mut w = csv::Writer::from_path(dir.join(COMBINED_F))?;
    let mut header = vec!["draw".to_string()];
    header.extend((0..c.f_train.n_points()).map(|j| format!("ftrain_{j}")));
    header.extend((0..c.f_test.n_points()).map(|j| format!("ftest_{j}")));
    w.write_record(&header)?;
    let n = c.f_train.n_draws().max(c.f_test.n_draws());
    for s in 0..n {
        let mut rec = vec![s.to_string()];
        if c.f_train.n_points() > 0 {
            rec.extend(c.f_train.draw(s).iter().map(f64::to_string));
        }
        if c.f_test.n_points() > 0 {
            rec.extend(c.f_test.draw(s).iter().map(f64::to_string));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    let mut w = csv::Writer::from_path(dir.join(COMBINED_SIGMA2))?;
    w.write_record(["draw", "sigma2"])?;
    for (s, v) in c.sigma2.iter().enumerate() {
        w.write_record([s.to_string(), v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads the combined draws; method, rule and weights come from the manifest.
pub fn read_combined(dir: &Path) -> Result<CombinedPosterior> {
    let kv = Manifest::read(&dir.join(MANIFEST))?;
    let path = dir.join(COMBINED_F);
    let mut r = csv::Reader::from_path(&path)?;
    let header = r.headers()?.clone();
    let n_train = header.iter().filter(|h| h.starts_with("ftrain_")).count();
    let n_test = header.iter().filter(|h| h.starts_with("ftest_")).count();
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (row, rec) in r.records().enumerate() {
        let rec = rec?;
        for j in 0..n_train {
            train.push(parse_cell(&path, row, &rec[1 + j])?);
        }
        for j in 0..n_test {
            test.push(parse_cell(&path, row, &rec[1 + n_train + j])?);
        }
    }
    let spath = dir.join(COMBINED_SIGMA2);
    let mut r = csv::Reader::from_path(&spath)?;
    let mut sigma2 = Vec::new();
    for (row, rec) in r.records().enumerate() {
        sigma2.push(parse_cell(&spath, row, &rec?[1])?);
    }
    let k: usize = kv.get("k")?;
    let weights = (0..k)
        .map(|i| kv.get(&format!("combine.weight.{i}")))
        .collect::<Result<Vec<f64>>>()?;
    Ok(CombinedPosterior {
        method: kv.get("method")?,
        rule: kv.get("combine_rule")?,
        sigma2,
        f_train: DrawMatrix::from_rows(n_train, train)?,
        f_test: DrawMatrix::from_rows(n_test, test)?,
        weights,
    })
}

struct Manifest {
    path: PathBuf,
    map: HashMap<String, String>,
}

impl Manifest {
    fn read(path: &Path) -> Result<Self> {
        Ok(Self {
            path: path.to_path_buf(),
            map: read_key_values(path)?.into_iter().collect(),
        })
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: Display,
    {
        let raw = self
            .map
            .get(key)
            .ok_or_else(|| format_err(&self.path, format!("missing key `{key}`")))?;
        raw.parse()
            .map_err(|e| format_err(&self.path, format!("key `{key}`: {e}")))
    }
}

fn manifest_pairs(run: &MethodRun) -> Vec<(String, String)> {
    let c = &run.config;
    let b = &c.bart;
    let mut kv: Vec<(String, String)> = vec![
        ("method".into(), c.method.name().into()),
        ("k".into(), c.k.to_string()),
        ("iterations".into(), c.iterations.to_string()),
        ("burn_in".into(), c.burn_in.to_string()),
        ("seed".into(), c.seed.to_string()),
        ("workers".into(), c.workers.to_string()),
        ("combine_rule".into(), c.combine.name().into()),
        ("trees".into(), b.m.to_string()),
        ("alpha".into(), b.alpha.to_string()),
        ("beta".into(), b.beta_depth.to_string()),
        ("prior_k".into(), b.k.to_string()),
        ("nu".into(), b.nu.to_string()),
        ("q".into(), b.q.to_string()),
        ("move.grow".into(), b.move_probs.grow.to_string()),
        ("move.prune".into(), b.move_probs.prune.to_string()),
        ("move.change".into(), b.move_probs.change.to_string()),
        ("move.swap".into(), b.move_probs.swap.to_string()),
        (
            "max_depth".into(),
            b.max_depth.map_or("none".into(), |d| d.to_string()),
        ),
        ("standardize".into(), b.standardize.to_string()),
        (
            "inverse_variance_weight".into(),
            "1 / posterior-mean sigma2 per shard (per-point 1 / f variance for cmc)".into(),
        ),
        ("wall_seconds".into(), run.wall_seconds.to_string()),
    ];
    for (i, w) in run.combined.weights.iter().enumerate() {
        kv.push((format!("combine.weight.{i}"), w.to_string()));
    }
    for ch in &run.chains {
        let p = format!("chain.{}", ch.shard_id);
        kv.push((format!("{p}.rows"), ch.n_rows.to_string()));
        kv.push((format!("{p}.mu_mu"), ch.hyper.mu_mu.to_string()));
        kv.push((format!("{p}.sigma_mu"), ch.hyper.sigma_mu.to_string()));
        kv.push((format!("{p}.lambda"), ch.hyper.lambda.to_string()));
        kv.push((
            format!("{p}.seconds_per_iteration"),
            ch.seconds_per_iteration.to_string(),
        ));
    }
    kv
}

/// Writes the manifest, one CSV per chain and the combined draws into `dir`.
pub fn write_method_dir(dir: &Path, run: &MethodRun) -> Result<()> {
    fs::create_dir_all(dir)?;
    for ch in &run.chains {
        write_chain_csv(
            &dir.join(chain_file(ch.shard_id)),
            &ch.draws,
            run.config.burn_in + 1,
        )?;
    }
    write_combined(dir, &run.combined)?;
    // manifest last: its presence marks a complete directory
    write_key_values(&dir.join(MANIFEST), &manifest_pairs(run))
}

/// Lists the files a complete method directory must contain.
pub fn missing_method_files(dir: &Path) -> Vec<String> {
    let mut missing = Vec::new();
    let manifest = dir.join(MANIFEST);
    let k = Manifest::read(&manifest).and_then(|m| m.get::<usize>("k"));
    match k {
        Ok(k) => {
            for f in (0..k)
                .map(chain_file)
                .chain([COMBINED_F.to_string(), COMBINED_SIGMA2.to_string()])
            {
                if !dir.join(&f).is_file() {
                    missing.push(dir.join(f).display().to_string());
                }
            }
        }
        Err(_) => missing.push(manifest.display().to_string()),
    }
    missing
}

pub fn read_method_dir(dir: &Path) -> Result<MethodRun> {
    let missing = missing_method_files(dir);
    if !missing.is_empty() {
        return Err(Error::IncompleteRun {
            dir: dir.to_path_buf(),
            missing,
        });
    }
    let kv = Manifest::read(&dir.join(MANIFEST))?;
    let max_depth: String = kv.get("max_depth")?;
    let bart = BartSettings {
        m: kv.get("trees")?,
        alpha: kv.get("alpha")?,
        beta_depth: kv.get("beta")?,
        k: kv.get("prior_k")?,
        nu: kv.get("nu")?,
        q: kv.get("q")?,
        move_probs: MoveProbs {
            grow: kv.get("move.grow")?,
            prune: kv.get("move.prune")?,
            change: kv.get("move.change")?,
            swap: kv.get("move.swap")?,
        },
        max_depth: if max_depth == "none" {
            None
        } else {
            Some(kv.get("max_depth")?)
        },
        standardize: kv.get("standardize")?,
    };
    let config = MethodConfig::new(
        kv.get("method")?,
        kv.get("k")?,
        kv.get("iterations")?,
        kv.get("burn_in")?,
        kv.get("seed")?,
    )?
    .with_bart(bart)
    .with_combine(kv.get::<CombineRule>("combine_rule")?)
    .with_workers(kv.get("workers")?);
    let mut chains = Vec::with_capacity(config.k);
    for id in 0..config.k {
        let p = format!("chain.{id}");
        let hyper = BartHyper::fixed(
            bart,
            kv.get(&format!("{p}.mu_mu"))?,
            kv.get(&format!("{p}.sigma_mu"))?,
            kv.get(&format!("{p}.lambda"))?,
        )?;
        chains.push(ChainOutput {
            shard_id: id,
            n_rows: kv.get(&format!("{p}.rows"))?,
            hyper,
            draws: read_chain_csv(&dir.join(chain_file(id)))?,
            seconds_per_iteration: kv.get(&format!("{p}.seconds_per_iteration"))?,
        });
    }
    Ok(MethodRun {
        config,
        chains,
        combined: read_combined(dir)?,
        wall_seconds: kv.get("wall_seconds")?,
    })
}
