//! Configuration files, matrix exchange files and report output.

pub mod config;
pub mod matrix_market;
pub mod report;

pub use config::{dump_config, load_config, read_config, ExperimentConfig};
pub use matrix_market::{read_matrix_exchange, read_matrix_market, write_matrix_exchange, write_matrix_market};
pub use report::{write_report, CsvReport, ReportFormat};
