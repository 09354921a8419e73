//! IO, the Monte Carlo harness and the `gsd` command line on top of `gsd-core`.

pub mod io;
pub mod simulation;
