//! Spurious local minima of the Burer–Monteiro factorization of the Max-Cut
//! semidefinite program.
//!
//! The crate covers four concerns:
//!
//! * [`manifold`] and [`objective`]: geometry of the product of spheres and the
//!   exact Riemannian derivatives of `Y ↦ ⟨A, YYᵀ⟩`.
//! * [`instances`]: block cost matrices that make the axial position
//!   `[I; −I]` a spurious local minimum, and padding to lower ranks.
//! * [`certify`]: first/second-order criticality, global optimality,
//!   pseudo-PD status, degeneracy and KKT certificates.
//! * [`optimize`] and [`experiments`]: Riemannian gradient descent and trust
//!   region solvers, and seeded basin-of-attraction sweeps.
//!
//! All numerics are generic over [`Scalar`] (`f32`/`f64`); the aliases below
//! fix the usual double-precision types.

pub mod certify;
pub mod error;
pub mod experiments;
pub mod instances;
pub mod linalg;
pub mod manifold;
pub mod objective;
pub mod optimize;
pub mod scalar;

pub use error::{Error, Result};
pub use linalg::{Matrix, SymMatrix};
pub use manifold::{Point, TangentVector};
pub use scalar::Scalar;

pub type Matrix64 = linalg::Matrix<f64>;
pub type SymMatrix64 = linalg::SymMatrix<f64>;
pub type Point64 = manifold::Point<f64>;
pub type TangentVector64 = manifold::TangentVector<f64>;
pub type SolverConfig64 = optimize::SolverConfig<f64>;
pub type Trace64 = optimize::Trace<f64>;
pub type CriticalityReport64 = certify::CriticalityReport<f64>;

pub type Matrix32 = linalg::Matrix<f32>;
pub type SymMatrix32 = linalg::SymMatrix<f32>;
pub type Point32 = manifold::Point<f32>;
