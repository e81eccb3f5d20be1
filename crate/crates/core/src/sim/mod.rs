//! Generative and truncated sampling, and the replication harness.

pub mod replicate;
pub mod spec;
pub mod truncated;

pub use replicate::{replicate, IntervalMetrics, MetricSummary, Replication, ReplicationRow, ReplicationStats, RulePolicy, CI_TABLE_STEP};
pub use spec::{generate, GenerativeSpec, PriorBlock, GENERATION_BLOCK};
pub use truncated::{sample_truncated, sample_truncated_normal, TruncatedSample, MIN_ACCEPTANCE, PROBE_BATCH};
