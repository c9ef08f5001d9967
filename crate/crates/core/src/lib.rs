//! Numerical laboratory for the observable (spatially filtered) transport equations
//!
//! ```text
//! ρ_t + ρ̄ u_x + ū ρ_x = 0,     u_t + ū u_x = 0,     f̄ = g^α * f
//! ```
//!
//! and their relation to the pressureless transport system `ρ_t + (ρu)_x = 0`, `u_t + (u²/2)_x = 0`
//! whose Riemann problem develops delta-shocks.
//!
//! * [`kernels`]: admissible averaging kernels, admissibility checks and filtering.
//! * [`riemann`]: exact Riemann solutions and closed-form filtered profiles.
//! * [`characteristics`]: Lagrangian particle maps, blow-up time, density along characteristics.
//! * [`broad`]: broad solutions of the filtered continuity equation by Picard iteration.
//! * [`distribution`]: delta measures on curves, test-function pairings and residual checks.
//! * [`eulerian`]: first-order grid solver, delta-mass and front diagnostics, α sweeps.

pub mod broad;
pub mod characteristics;
pub mod distribution;
pub mod eulerian;
pub mod initial;
pub mod kernels;
pub mod output;
pub mod quadrature;
pub mod riemann;
pub mod tridiag;

pub use kernels::{FilterScale, Kernel, KernelFamily};
pub use riemann::{RiemannData, RiemannSolution};
