//! Adaptive allocation of a shared compute pool across the four directional
//! perception subsystems (front, left, right, rear) of a vehicle.
//!
//! The pipeline for one traffic snapshot is:
//!
//! 1. [`context`] turns the scenario into importance factors, weightages,
//!    detection frequencies, image resolutions, network sizes and the size of
//!    the resource pool.
//! 2. [`allocator`] builds the weighted time/precision/energy cost and
//!    minimizes it with the from-scratch Nelder-Mead solver in [`simplex`],
//!    using exterior penalties for the pool and floor constraints.
//! 3. [`safety`] scores the result and provides the constant-allocation
//!    baseline it is compared against.
//!
//! [`journey`] runs a whole scenario list and renders the comparison, and
//! [`cli`] exposes all of it on the command line.

pub mod allocator;
pub mod cli;
pub mod constants;
pub mod context;
pub mod error;
pub mod factor_models;
pub mod journey;
pub mod safety;
pub mod simplex;

pub use allocator::{allocate, AllocationResult};
pub use constants::{default_constants, load_constants, Config, ModelConstants};
pub use context::{build_context, ImportanceCurve, ImportanceCurves, Scenario, Subsystem, SubsystemContext};
pub use error::{Error, Result};
pub use journey::{emit_report, parse_journey, run_journey, ComparisonReport, Journey, ReportFormat};
pub use safety::{ccra_baseline, CcraBaseline};
