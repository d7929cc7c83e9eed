//! Desk-scale environments, the training and evaluation loop, seeded-run
//! management, metrics emission, and the value-iteration oracle.

mod bench;
mod catch;
mod chain;
mod config;
mod env;
mod error;
mod report;
mod run;

pub use bench::{run_bench, write_bench_csv, BenchTrace};
pub use catch::{random_policy_baseline, CatchEnv, CATCH_ACTIONS};
pub use chain::{value_iteration, ChainMdp, CHAIN_ACTIONS};
pub use config::{
    AgentSection, AssignmentChoice, EnvConfig, LossChoice, OptimSection, RunConfig, RunSection,
};
pub use env::{Env, EnvStep, FrameStack};
pub use error::{HarnessError, Result};
pub use report::{collect_report, write_report_csv, ReportTable, VariantRow};
pub use run::{
    build_env, evaluate_net, evaluate_run_dir, train_run, write_metrics_csv, EpisodeRecord,
    EvalRecord, RunSummary, TrainLoop, EVAL_EPSILON, METRICS_HEADER,
};
