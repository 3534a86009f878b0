//! Interaction logs: loading, validation, chronological splitting, synthesis
//! and per-user grouping.

mod csv_io;
mod record;
mod split;
mod synthetic;

pub use csv_io::{load_interactions, read_interactions, save_interactions, write_interactions, ColumnMap};
pub use record::{Dataset, FeatureSchema, Features, InteractionRecord, EXPLICIT_NAMES, N_EXPLICIT};
pub use split::{chronological_split, day_of, group_by_user, kcore_filter, DatasetSplit, Part, SECONDS_PER_DAY};
pub use synthetic::{generate_synthetic, generate_synthetic_with_truth, SyntheticConfig, SyntheticData};
