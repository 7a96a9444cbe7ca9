//! Minimum idle-energy scheduling on a single machine with a fixed task
//! order, release times and deadlines.
//!
//! The crate is organised around a few pieces:
//!
//! * [`instances`]: tasks, window propagation, schedule validation and the
//!   random instance generator.
//! * [`energy`]: the idle energy function contract and its concave
//!   piecewise-linear representation.
//! * [`furnace`]: a bilinear furnace model, its energy-optimal bang-bang
//!   control and the idle energy function it induces.
//! * [`scheduler`]: the energy graph and the `O(n^3)` exact solver.
//! * [`baseline`]: finite transition-graph machine models and the
//!   time-indexed dynamic program used for comparison.
//! * [`io`] and [`bench`]: CSV formats and the benchmark harness.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baseline;
pub mod bench;
pub mod energy;
mod error;
pub mod furnace;
pub mod instances;
pub mod io;
pub mod scheduler;

pub use baseline::{average_idle_power, dp_solve, TransitionGraph};
pub use energy::{check_concavity, ConcavityVerdict, IdleEnergyFunction, Linear, PiecewiseLinearConcave};
pub use error::{Error, Result};
pub use furnace::BilinearFurnaceModel;
pub use instances::{GeneratorConfig, Instance, Schedule, Task};
pub use scheduler::{solve, EnergyGraph, Solution, SupportVertex};

/// Absolute tolerance used when comparing real-valued start times.
pub const TIME_EPS: f64 = 1e-9;
