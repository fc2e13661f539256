//! Harness around `kfl-core`: profile and tensor files, scenario runs, the
//! worker pool and the acceptance suite.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod fixtures;
pub mod formats;
pub mod pool;
pub mod scenario;
pub mod verify;

pub use error::{HarnessError, Result};
