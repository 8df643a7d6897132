//! Covariance-matrix and truncated Fock-space simulation of unitary
//! averaging on Gaussian boson sampling circuits.
//!
//! The crate has three layers:
//!
//! * [`gaussian`] / [`circuit`] — Gaussian states as covariance matrices,
//!   symplectic gate transforms, Clements-style meshes, and Gaussian
//!   parameter noise;
//! * [`protocol`] — the averaging pipeline (encode over replicas, noisy
//!   instances, decode, vacuum heralding) and Monte-Carlo ensembles;
//! * [`fock`] / [`analytics`] — a brute-force truncated Fock simulator used
//!   as an independent cross-check, and closed-form single-mode plus
//!   power-law scaling models.

pub mod analytics;
pub mod circuit;
pub mod error;
pub mod fock;
pub mod gaussian;
pub mod protocol;

pub use error::{Result, UaError};
