//! Experiment orchestration: config documents, metric emission, frozen-trace
//! evaluation, policy comparison, and training campaigns.

pub mod campaign;
pub mod config;
pub mod eval;
pub mod metrics;

pub use campaign::{run_training_campaign, CampaignOutput};
pub use config::ExperimentConfig;
pub use eval::{compare, run_eval, EvalPolicy, EvalSummary};
pub use metrics::MetricsWriter;
