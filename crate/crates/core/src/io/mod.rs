//! Panel file I/O, compositional transforms, and result artifacts.

pub mod clr;
pub mod report;
pub mod svg;
pub mod table;

pub use clr::{
    clr_transform, filter_missing, ingest, interpolate_missing, modified_clr_response,
    FilterReport, IngestConfig,
};
pub use report::{write_frequency_csv, write_metrics_csv, write_statistics_csv};
pub use table::{load_panel, write_panel};
