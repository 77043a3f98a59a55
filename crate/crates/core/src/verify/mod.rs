//! Random feasible instances and the invariant suites run by the
//! acceptance tests and the `verify` command.

mod instances;
mod suites;

pub use instances::*;
pub use suites::*;
