//! Dataset ingestion, checkpoint persistence, metrics serialization, and
//! run-configuration parsing.

pub mod checkpoint;
pub mod config;
pub mod dataset;
pub mod idx;
pub mod metrics;
pub mod synthetic;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use config::{DatasetSpec, RunConfig, RunMode};
pub use dataset::{Dataset, Split};
pub use idx::load_mnist_idx;
pub use metrics::{append_metrics, read_metrics, MetricsRow, METRICS_HEADER};
pub use synthetic::{digits_dataset, synthetic_dataset};
