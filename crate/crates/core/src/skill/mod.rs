//! Dual-level skill library: reasoning and interaction entries, validation,
//! and canonical on-disk snapshots.

pub mod model;
pub mod store;
pub mod validate;

pub use model::*;
pub use store::{latest_round, library_from_str, library_to_string, load_library, save_library, save_snapshot, snapshot_path};
pub use validate::{validate_entry, validate_library, ValidationReport, Violation};
