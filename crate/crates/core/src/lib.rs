//! Nelson-Aalen and Kaplan-Meier estimation for right-censored data whose
//! observations may be dependent, and Monte Carlo verification of the
//! estimators' functional limit theorems under independence, φ-mixing and
//! long range dependence.
//!
//! ```
//! use survfclt::estimators::{estimate, CensoredSample};
//!
//! let sample = CensoredSample::from_pairs([(1.0, true), (2.0, false), (3.0, true)]).unwrap();
//! let (na, km) = estimate(&sample);
//! assert!((na.eval(3.0) - 4.0 / 3.0).abs() < 1e-15);
//! assert_eq!(km.eval(3.0), 0.0);
//! ```

pub mod cli;
pub mod depgen;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod hermite;
pub mod limits;
pub mod marginal;
pub mod quadrature;
pub mod rng;
pub mod stepfun;

pub use error::{Error, Result};
