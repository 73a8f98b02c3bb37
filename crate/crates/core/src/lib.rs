//! Pinching-antenna ISAC transmit design.
//!
//! A dielectric waveguide carries the base-station signal; pinching
//! antennas placed along it radiate toward a communication user and a
//! sensing target. This crate builds the near-field channels, optimises the
//! antenna positions to maximise the illumination power at the target under
//! a user-rate requirement, evaluates the comparison schemes and runs
//! parameter sweeps.

// NaN-rejecting guards are written as `!(x > 0.0)` on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod channel;
pub mod conic;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod metrics;
pub mod optimizer;
pub mod oracle;
pub mod units;

pub use error::{Error, Result};
pub use geometry::{PinchLayout, Point3, Polar, PowerModel, Scenario};
pub use metrics::MetricReport;
