//! Verification workbench and numerical solver for the operator calculus on
//! symmetric tensors over asymptotically hyperbolic model geometries.
//!
//! The crate is organised bottom-up:
//!
//! * [`exact`] — scalar arithmetic in ℚ[√2, √3, …], so every fibre identity
//!   is checkable with zero tolerance.
//! * [`fibre_algebra`] — symmetric tensor algebra on a single fibre:
//!   products, contractions, Lefschetz operators, inner products and the
//!   Minkowski-scale decomposition of Lorentzian tensors.
//! * [`block_operators`] — symbolic assembly of the conjugated d'Alembertian
//!   as an (m+1)×(m+1) block grid, its indicial family, trace-free
//!   restriction, change-of-scale matrix and adjoint pattern.
//! * [`model_geometry`] — concrete model metrics with finite-difference
//!   realizations of the differential operators, the Lorentzian cone lift and
//!   the numerical identity suite.
//! * [`resonator`] — Fourier-mode reduction on the hyperbolic ball models,
//!   spectral collocation of the extended operator on the even coordinate,
//!   resonance scanning and the decoupling pipeline.

pub mod block_operators;
pub mod exact;
pub mod fibre_algebra;
pub mod model_geometry;
pub mod resonator;
