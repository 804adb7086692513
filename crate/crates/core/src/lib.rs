//! Minimal self-adjoint extensions of symmetric operators with deficiency
//! indices (1,1), built from Herglotz-Nevanlinna data `(h0, h, sigma)`.
//!
//! The crate is organised bottom-up:
//!
//! - [`herglotz`]: evaluation, Cayley transform, Stieltjes inversion and
//!   asymptotics of Herglotz functions with finite atomic measures.
//! - [`triplet`]: finite-dimensional boundary-triplet surrogates used for
//!   exact Green's identity and Γ-algebra checks.
//! - [`models`]: the two ODE model operators (`-i d/dx` and a Sturm-Liouville
//!   operator) with their boundary triplets.
//! - [`resolvent`]: generalized resolvents `R_f(λ)` from the boundary
//!   condition `Γ1 y + f(λ) Γ0 y = 0`.
//! - [`assembly`]: the discretized extension on `L² ⊕ L²(dσ) ⊕ C` as a
//!   Hermitian pencil, with spectrum, resolvent, compression and minimality.
//! - [`verify`]: the end-to-end verification run and its report.

pub mod assembly;
pub mod error;
pub mod herglotz;
pub mod models;
pub mod quadrature;
pub mod resolvent;
pub mod triplet;
pub mod verify;

pub use error::{Error, Result};
pub use herglotz::{Atom, FValue, HerglotzData, Omega};
pub use num_complex::Complex64;
