//! Weighted one-dimensional total-variation denoising by generalized taut
//! strings, with explicit radial minimizers, duality certificates, level-set
//! diagnostics, a 1D infimal-convolution (TV + TV^2) solver and the oscillatory
//! counterexample for empty TV subdifferentials.

pub mod certificate;
pub mod counterexample;
pub mod cli;
pub mod data;
pub mod error;
pub mod grid;
pub mod ictv;
pub mod levelset;
pub mod par;
pub mod power;
pub mod radial;
pub mod rof;
pub mod stats;
pub mod sweep;
pub mod taut_string;
pub mod weights;

pub use certificate::{CertificateReport, Check};
pub use data::Data;
pub use error::{Error, Result};
pub use grid::{integrate, log_grid, make_grid, weighted_lp_norm, Grading, Grid, SampledFunction};
pub use taut_string::{derivative_signal, kkt_certificate, solve_tube, Contact, KktReport, TautString};
pub use weights::{antiderivative, build_transform, build_tube, TransformMap, TubeProblem, Weight, WeightPair};
