use std::path::PathBuf;

use aptb_core::eval::synth_dataset;
use aptb_core::Universe;
use clap::Args;

use crate::output::write_all_atomic;
use crate::{Failure, EXIT_OK};

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub rows: u32,
    #[arg(long)]
    pub cols: u32,
    #[arg(long)]
    pub slots: u32,
    /// Number of trajectories.
    #[arg(long)]
    pub n: usize,
    /// Longest trajectory; defaults to the number of slots.
    #[arg(long = "max-len")]
    pub max_len: Option<usize>,
    /// Power-law exponent of cell popularity.
    #[arg(long, default_value_t = 1.0)]
    pub skew: f64,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: &SynthArgs) -> Result<i32, Failure> {
    let universe = Universe::new(args.rows, args.cols, args.slots)?;
    let max_len = args.max_len.unwrap_or(args.slots as usize);
    let d = synth_dataset(universe, args.n, max_len, args.skew, args.seed)?;
    write_all_atomic(&[(args.out.clone(), d.to_text().into_bytes())])?;
    println!("wrote {} trajectories to {}", d.len(), args.out.display());
    Ok(EXIT_OK)
}
