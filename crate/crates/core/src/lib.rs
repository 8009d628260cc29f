//! Early test termination lab.
//!
//! Subject programs and tests are written in a small deterministic language
//! ([`dsl`]). The [`exec`] interpreter runs tests with JUnit-like
//! abort-on-failure semantics or in Trycatch mode, recording statement and
//! branch coverage. [`transform`] slices multi-assertion tests, [`spectrum`]
//! and [`sbfl`] turn coverage into suspiciousness rankings, and [`metrics`]
//! scores them. [`harness`] ties it together over generated or handwritten
//! scenarios.

pub mod dsl;
pub mod exec;
pub mod par;
pub mod transform;
pub mod spectrum;
pub mod sbfl;
pub mod metrics;
pub mod detector;
pub mod harness;
