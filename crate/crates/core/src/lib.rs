//! Heralded photon-number states from a continuous-wave nondegenerate OPO.
//!
//! The library builds the Gaussian covariance of two trigger modes and one
//! signal mode from the twin-beam correlation functions, evaluates the
//! heralded Wigner function and its two-photon fidelity in closed form,
//! optimises the signal mode, and treats `n` clicks in the weak-pump limit.
//! A Wick-expansion oracle checks the weak-pump state independently.

pub mod cli;
pub mod covariance;
pub mod error;
pub mod fock;
pub mod kernels;
pub mod mode;
pub mod optimizer;
pub mod phase_space;
pub mod two_mode;
pub mod wick;
pub mod wigner;

pub use covariance::{assemble_covariance, CovMatrix6, XBlock};
pub use error::{Error, Result};
pub use fock::{solve_coefficients, GramSolution};
pub use kernels::{ClickTimes, OpoParams};
pub use mode::{SampledModeFunction, TimeGrid};
pub use optimizer::{optimize_mode, OptimizerSettings};
pub use wigner::{fidelity_two_photon, wigner_coefficients, WignerCoefficients};
