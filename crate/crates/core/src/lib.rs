// `!(a < b)` style comparisons deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibration;
pub mod cases;
pub mod error;
pub mod io;
pub mod istep;
pub mod mcmc;
pub mod prob;
pub mod quadrature;
pub mod simulators;
pub mod surrogates;
pub mod tstep;

pub use error::{Error, Result};
pub use prob::{log_sum_exp, Dist, DistSpec, Sample, StreamRng};
