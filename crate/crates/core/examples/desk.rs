//! Desk-scale Friedman study: every method at K = 4 (by default), printed as
//! tables.
//!
//! `cargo run --release -p lisa-core --example desk -- [out_dir] [replications] [k] [n_train]`

use std::path::PathBuf;

use lisa_core::bart::BartSettings;
use lisa_core::experiment::{run_experiment, DataSource, ExperimentSpec};
use lisa_core::report::{build_report, table_coverage, table_fit, table_moves};
use lisa_core::{CombineRule, Generator, Method, MethodConfig};

fn main() -> lisa_core::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "desk-run".into()));
    let reps: usize = args
        .next()
        .map_or(1, |s| s.parse().expect("replication count"));
    let k: usize = args.next().map_or(4, |s| s.parse().expect("shard count"));
    let n_train: usize = args
        .next()
        .map_or(2000, |s| s.parse().expect("training size"));
    let bart = BartSettings::default().with_trees(20);
    let cfg =
        |m: Method, k: usize| MethodConfig::new(m, k, 3000, 2000, 1).map(|c| c.with_bart(bart));
    let methods = vec![
        cfg(Method::Full, 1)?,
        cfg(Method::Lisa, k)?,
        cfg(Method::ModLisa, k)?,
        cfg(Method::Cmc, k)?,
        cfg(Method::Lisa, k)?.with_combine(CombineRule::InverseVariance),
    ];
    let spec = ExperimentSpec {
        source: DataSource::Simulated {
            generator: Generator::Friedman,
            n_train,
            n_test: 1000,
            sigma2: 9.0,
        },
        methods,
        replications: reps,
        out_dir: out,
        seed: 100,
        eval_train_limit: None,
    };
    let t = std::time::Instant::now();
    let dir = run_experiment(&spec)?;
    eprintln!("sampling took {:.1}s", t.elapsed().as_secs_f64());
    let report = build_report(&dir)?;
    for (r, rows) in report.replications.iter().enumerate() {
        println!(
            "replication {r}\n{}\n{}\n{}",
            table_fit(rows),
            table_coverage(rows),
            table_moves(rows)
        );
    }
    Ok(())
}
