//! Multifractal analysis of switched Moran cascades through fixed-scale
//! (Hewitt-Stromberg) counting.
//!
//! The crate is generic over the scalar type (`f32` or `f64`); the `*F64`
//! aliases below fix the common choice.
// `!(a < b)` is used on purpose so that NaN fails the test
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod coarse;
pub mod error;
pub mod legendre;
pub mod measures;
pub mod real;
pub mod roots;
pub mod symbolic;
pub mod verify;

pub use analytic::{CurveLabel, DimensionFunctions, Evaluator, SpectrumCurve};
pub use coarse::{DimEstimate, Geometry, LevelSetEstimate, LevelSetEstimator, ScaleSeries};
pub use error::{Error, Result};
pub use legendre::TransformCurve;
pub use measures::{Cascade, Family, MeasureSpec, Metric, Profile, Regime, WeightedCylinder};
pub use real::Real;
pub use symbolic::{CylinderGeom, Letter, MoranSpec, RegimeRule, Schedule, SchedulePhase, Word};
pub use verify::{CheckEntry, CheckStatus, VerificationReport, VerifyOptions};

pub type MeasureSpecF64 = MeasureSpec<f64>;
pub type SpectrumCurveF64 = SpectrumCurve<f64>;
pub type TransformCurveF64 = TransformCurve<f64>;
pub type DimEstimateF64 = DimEstimate<f64>;
pub type VerificationReportF64 = VerificationReport<f64>;
