//! The worked occupancy problems: classical occupancy, overflow and partial
//! coupon collection, plus dispatch for single linear terminal constraints.

mod classical;
mod coupon;
mod overflow;
mod terminal_set;

pub use classical::*;
pub use coupon::*;
pub use overflow::*;
pub use terminal_set::*;
