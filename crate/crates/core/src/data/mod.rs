//! Datasets, file formats and logs.

pub mod checkpoint;
pub mod csv;
pub mod dataset;
pub mod idx;
pub mod pgm;

pub use checkpoint::{read_checkpoint, read_codes, write_checkpoint, write_codes};
pub use csv::{append_csv, write_csv, CsvField};
pub use dataset::{make_blob_images, make_ring2d, Dataset};
pub use idx::{load_idx_pair, parse_idx};
pub use pgm::write_ppm_grid;
