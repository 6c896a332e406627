//! Run configuration, single runs, Monte Carlo campaigns and corridor sweeps.

pub mod config;
pub mod io;
pub mod mc;
pub mod sim;

pub use config::{DispersionSpec, EntryConditions, RunConfig};
pub use mc::{
    compute_stats, corridor_sweep, percentile, run_batch, run_monte_carlo, widest_band, Campaign, CorridorBand,
    CorridorPoint, CorridorTable, MonteCarloReport,
};
pub use sim::{fly, sample_run, simulate_once, Flight, RunOutcome, RunResult, SampledRun};
