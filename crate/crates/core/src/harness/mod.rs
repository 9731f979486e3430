//! Batch harness: scenarios, seeded batches, summary statistics and report files.

pub mod batch;
pub mod histogram;
pub mod metrics;
pub mod report;
pub mod scenario;
pub mod stats;
