//! Command-line harness for the cel engine: single runs, context-count grid
//! search, λ ablation, Fisher export and all file outputs.

pub mod error;
pub mod fim;
pub mod harness;
pub mod output;

pub use error::{HarnessError, Result};
pub use harness::{ablate, ablate_series, grid_search, run, select_n, Selection};
