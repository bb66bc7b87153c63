//! Dataset ingestion, image-to-field encoding and persistence.

pub mod config;
pub mod encode;
pub mod idx;
pub mod netfile;

pub use config::RunConfig;
pub use encode::{encode_image, EncodingSpec};
pub use idx::{load_idx, load_split_dir, Dataset, Split};
pub use netfile::{load_network, save_network};
