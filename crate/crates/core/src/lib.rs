//! Elliptic solutions of the BKP equation: Weierstrass functions, the pole
//! equations of motion, the spectral polynomial and its integrals, the
//! Baker–Akhiezer function and an identity-checking engine.

// `!(a < b)` is used on purpose so that NaN fails the check
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baker;
pub mod dynamics;
pub mod elliptic;
pub mod error;
pub mod identities;
pub mod linalg;
pub mod ode;
pub mod spectral;

pub use baker::{psi_eval, wave_data, PsiSample, WaveData};
pub use dynamics::{acceleration, integrate, IntegrateOptions, Model, PoleState, Trajectory};
pub use elliptic::{Lattice, PhiEval};
pub use error::{Error, Result};
pub use identities::{verify_all, verify_identity, IdentityCase, IdentityId, IdentityReport};
pub use num_complex::Complex64 as C64;
pub use spectral::{integrals, spectral_poly, IntegralSet, SpectralPoly};

/// Version of this crate, recorded in run metadata.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
