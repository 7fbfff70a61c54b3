//! Heat as a connection on a work line bundle.
//!
//! A system is a chart `(U, V_1, ..., V_m)` with work coefficients `P_i`. The
//! heat one-form `ξ = dU - Σ P_i dV_i` defines the adiabatic connection
//! `H = ker ξ`. This crate computes its curvature and Frobenius defect, lifts
//! base curves horizontally to get holonomy and geometric phase, and
//! reconstructs local entropy and temperature when the curvature vanishes.

pub mod bundle;
pub mod connection;
pub mod entropy;
pub mod error;
pub mod expr;
pub mod geometry;
pub mod harness;
pub mod lift;

pub use bundle::{CatalogEntry, GaugeTransform, WorkSystem};
pub use connection::{CurvatureMatrix, FlatnessReport, Verdict};
pub use entropy::{EntropyChart, EntropyNode, ResidualSummary};
pub use error::{Error, Result};
pub use expr::{parse, Expression, Point};
pub use geometry::{Chart, DifferentialForm, Region, VectorField};
pub use harness::{
    EquivalenceReport, Hypothesis, JauchReport, LoopFamily, PhaseReport, Tolerances,
};
pub use lift::{BaseCurve, LiftOptions, LiftResult};
