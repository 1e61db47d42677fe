//! Bundled example datasets.

use crate::error::Result;
use crate::io::read_dataset_csv;

use super::bernoulli::binary_from_f64;

const NEWCOMB: &str = include_str!("../../data/newcomb.csv");
const BERNOULLI: &str = include_str!("../../data/bernoulli_gelman.csv");

/// Newcomb's 66 speed-of-light measurements.
pub fn newcomb() -> Vec<f64> {
    read_dataset_csv(NEWCOMB.as_bytes()).expect("bundled dataset parses")
}

/// 100 binary observations, 28 ones and 7 switches.
pub fn bernoulli_gelman() -> Vec<u8> {
    binary_from_f64(&read_dataset_csv(BERNOULLI.as_bytes()).expect("bundled dataset parses"))
        .expect("bundled dataset is binary")
}

pub fn load_binary_csv(text: &str) -> Result<Vec<u8>> {
    binary_from_f64(&read_dataset_csv(text.as_bytes())?)
}
