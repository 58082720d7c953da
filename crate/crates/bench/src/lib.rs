//! Fixed inputs shared by the benchmarks.

use lossrank_core::simbench::{replication_data, SimDesign};
use lossrank_core::{standardize, Dataset, StandardizedDataset};

/// First replication of the small-d design (`d = 8`).
pub fn small_d(n: usize) -> Dataset {
    replication_data(&SimDesign::example1(1.0, n).with_reps(1), 0).expect("valid design")
}

/// First replication of the large-d design (`d = 300`).
pub fn large_d(n: usize) -> Dataset {
    replication_data(&SimDesign::example2(1.0, n).with_reps(1), 0).expect("valid design")
}

pub fn standardized(data: &Dataset) -> StandardizedDataset {
    standardize(data).expect("non-constant columns")
}
