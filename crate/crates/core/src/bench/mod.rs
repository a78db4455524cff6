//! Monte Carlo coordinated-turn tracking benchmark.
//!
//! A sweep covers every `(q1, sigma2)` pair. For each pair a fresh set of
//! trajectories is drawn from the tracking prior and rolled through the
//! coordinated-turn model; every trajectory is observed by several targets
//! that differ only in measurement noise. All algorithms consume the same
//! data. Randomness is derived from `(master_seed, config, trajectory,
//! target, stream)` so results do not depend on scheduling.

mod config;
mod metrics;
mod report;
mod sim;
mod sweep;

pub use config::SweepSpec;
pub use metrics::{divergence_flag, pooled_rmse, relative_rmse, rmse, ErrorSums, POSITION, VELOCITY};
pub use report::{
    parse_report_csv, render_report, rows_to_csv, AlgorithmResult, ConfigResult, PairCell, PairMatrix, ReportRow,
    RmseReport, HEADER, PAIRS,
};
pub use sim::{sample_gaussian, simulate, stream_seed, Dataset, Stream, Trajectory};
pub use sweep::{run_config, run_sweep, DifSettings};
