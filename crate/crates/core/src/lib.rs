//! Residential load aggregator engine: per-step optimal on/off curtailment of
//! air conditioners and water heaters, rolling dispatch over a request
//! window, and tiered reward accounting.

pub mod cost;
pub mod model;
pub mod rewards;
pub mod solver;
pub mod fleet;
pub mod dispatch;
