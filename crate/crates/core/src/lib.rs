//! Last-passage percolation on a marked planar Poisson process.
//!
//! Points of a unit-intensity Poisson process in the plane carry i.i.d.
//! nonnegative weights. The last-passage time `L(p, q)` is the largest total
//! weight collected by an up-right chain of points in the box between `p` and
//! `q`. This crate samples such clouds reproducibly, computes `L` and lowest
//! geodesics exactly, approximates semi-infinite geodesics in a fixed
//! direction, and runs Monte Carlo estimators for the shape constant,
//! fluctuations and geodesic geometry.

pub mod error;
pub mod estimators;
pub mod geometry;
pub mod harness;
pub mod lpp;
pub mod oracle;
pub mod point_process;
pub mod rays;
pub mod report;
pub mod stats;
pub mod weight_laws;

pub use error::{Error, Result};
pub use lpp::{geodesic, last_passage, passage_field, Geodesic, PassageField};
pub use point_process::{sample_cloud, MarkedPoint, Point, PointCloud, Region};
pub use weight_laws::WeightLaw;
