//! Case files in, datasets and checkpoints out.

pub mod checkpoint;
pub mod dataset;
pub mod matpower;

pub use checkpoint::{Checkpoint, CHECKPOINT_SCHEMA};
pub use dataset::{build_dataset, sample_loads, sha256_hex, Dataset, DATASET_SCHEMA};
pub use matpower::{parse_case, BusRecord, CaseFile, GenCost, GenRecord};
