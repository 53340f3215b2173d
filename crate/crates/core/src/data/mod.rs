//! Datasets, CSV ingestion, sampling, the re-partition schedule and the
//! synthetic generator.

mod csv_io;
mod dataset;
pub mod partition;
mod sampling;
pub mod synthetic;

pub use csv_io::{load_csv, read_csv, write_csv, DEFAULT_MISSING_TOKENS};
pub use dataset::{is_missing, Dataset, MISSING};
pub use partition::{partition_schedule, ManifestEntry, PartitionSpec, PartitionStep};
pub use sampling::{sample_indices, sample_split, SampleMode};
pub use synthetic::{generate, SyntheticConfig, SyntheticData};
