//! Training, offline and closed-loop evaluation, latency benchmarking and
//! configuration plumbing for the command-line tool.

pub mod bench;
pub mod closed_loop;
pub mod config;
pub mod gen;
pub mod train;

pub use bench::{bench, bench_frames, concurrent_commands, lockstep_commands, BenchReport, ModelBench, Snapshot};
pub use closed_loop::{autonomy, run_closed_loop, Controllers, Driver, EvalReport, LeadSpawn, ScenarioSpec, DT};
pub use config::{key_value_text, KeyValues};
pub use gen::{balance_and_mirror, cap_for_target, generate, generate_raw, GenConfig};
pub use train::{evaluate_offline, evaluate_predictions, train, EpochStats, OfflineMetrics, TrainConfig, TrainOutcome};
