//! Numerical laboratory for advection-diffusion in two-dimensional cellular
//! flows.
//!
//! The flow is fixed: stream function `H = sin(πx₁) sin(πx₂) / π` and velocity
//! `v = (−∂₂H, ∂₁H)`. On top of it the crate provides
//!
//! * finite-difference assembly of `−Δ + A v·∇` on squares, disks and the
//!   periodic cell ([`grid`]),
//! * preconditioned Krylov solvers for the resulting nonsymmetric systems
//!   ([`linsolve`]),
//! * cell problems, correctors and the effective diffusivity ([`cellproblem`]),
//! * expected exit times ([`exittime`]) and principal Dirichlet eigenpairs
//!   ([`eigen`]),
//! * Euler–Maruyama sampling of the underlying diffusion ([`sde`]),
//! * the two-corrector multiscale approximation on the disk ([`expansion`]),
//! * scans, CSV/SVG output and the verification suite ([`harness`]).

pub mod cellproblem;
pub mod eigen;
pub mod error;
pub mod exittime;
pub mod expansion;
pub mod flow;
pub mod grid;
pub mod harness;
pub mod linsolve;
pub mod sde;
pub mod stats;

pub use error::{Error, Result};
pub use flow::{FlowParams, Point2};
pub use grid::{Grid, ScalarField, Scheme, SparseMatrix, Topology};
