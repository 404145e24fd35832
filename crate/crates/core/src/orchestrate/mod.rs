//! Shard-parallel chains and the combination of their draws.

mod chain;
mod combine;
mod record;

pub use chain::{run_chain, run_chains, ChainDraws, ChainOutput, EvalPoints};
pub use combine::{combine, combine_with_shard_weights, CombinedPosterior};
pub use record::{
    chain_file, missing_method_files, read_chain_csv, read_combined, read_method_dir,
    write_chain_csv, write_combined, write_method_dir, MethodRun, COMBINED_F, COMBINED_SIGMA2,
    MANIFEST,
};
