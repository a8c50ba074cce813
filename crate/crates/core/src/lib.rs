//! Spectral solver for the regularized Zakharov–Kuznetsov equation
//! `u_t + b u_x + Δu_x + g(u)_x - δΔu = f` on a channel
//! `[-X, X) × (0, L1) × (0, L2)`, periodic in `x` with homogeneous Dirichlet
//! walls, together with the diagnostics used to study its decay and
//! conservation properties.

pub mod config;
pub mod diagnostics;
pub mod domain;
pub mod error;
pub mod field;
pub mod forcing;
pub mod linear;
pub mod nonlinearity;
pub mod profile;
pub mod quadrature;
pub mod runner;
pub mod solver;
pub mod spectral;
pub mod weights;

pub use domain::DomainSpec;
pub use error::{Result, ZkError};
pub use field::Field;
pub use spectral::SpectralGrid;
