//! Independent ground truth: Monte Carlo simulation of the occupancy chain,
//! exact empty-urn probabilities and a brute-force entropy minimizer.
//!
//! Random numbers come from ChaCha8 (`rand_chacha::ChaCha8Rng`). Trial `t`
//! of a run with seed `s` uses `seed_from_u64(s)` with stream `t`, so every
//! trial is reproducible on its own and results do not depend on the number
//! of worker threads.

mod chain;
mod exact;
mod exponent;
mod oracle;

pub use chain::*;
pub use exact::*;
pub use exponent::*;
pub use oracle::*;
