//! Data ingestion (CSV, minimal FCS), marker transforms, and result
//! persistence.

pub mod csv;
pub mod fcs;
pub mod results;
pub mod transform;

pub use csv::{read_csv, read_partition_csv, write_csv, write_partition_csv};
pub use fcs::{read_fcs, read_fcs_header, FcsHeader};
pub use results::{
    config_hash, read_draws, read_results, write_draws, write_results, Provenance, ResultBundle,
};
pub use transform::{inverse_transform, transform, Transform};
