//! Configuration, regime scans, figures and the verification suite behind
//! the command-line tool.

pub mod config;
pub mod scan;
pub mod svg;
pub mod verify;

pub use config::ScanConfig;
pub use scan::{run_scan, ScanReport, ScanRow};
pub use verify::{CheckResult, VerifyOptions, VerifyReport};
