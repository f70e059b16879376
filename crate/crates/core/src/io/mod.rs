pub mod analyze;
pub mod cli;
pub mod config;
pub mod record;
pub mod report;
pub mod rng;
pub mod tables;
pub mod units;
