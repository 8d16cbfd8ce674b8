//! Embedding of time-local master equations (TLMEs) into Lindblad master
//! equations on a system ⊗ qubit-ancilla space.
//!
//! A TLME
//!
//! ```text
//! dρ/dt = L_sys(ρ) + Bρ + ρC + Σ_j D_j ρ E_j†
//! ```
//!
//! is in general neither trace- nor positivity-preserving. The [`mapping`]
//! module builds a Lindblad generator on the doubled space together with a
//! constant ancilla weight `w` and a norm-growth rate `α` such that
//! `ρ(t) = e^{αt} Tr_a[(1⊗w) ρ̃(t)]` reproduces the TLME solution exactly.
//!
//! The remaining modules simulate both sides of that correspondence:
//!
//! - [`linalg`]: dense complex matrices, Kronecker products, a Jacobi
//!   eigensolver for Hermitian matrices and PSD square roots.
//! - [`model`]: Lindblad and TLME generators, counting-field tilting.
//! - [`dynamics`]: RK4 integration, quantum-jump Monte Carlo and
//!   large-deviation (θ) estimators.
//! - [`trajstats`]: the micromaser s-ensemble application.
//! - [`qfilter`]: homodyne quantum filters and their efficiency classifier.
//!
//! The crate is `no_std` and only needs `alloc`.
//!
//! # Tensor ordering
//!
//! Composite operators are always `system ⊗ ancilla`, with the ancilla index
//! varying fastest: basis state `|s⟩⊗|a⟩` has index `2·s + a`.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod dynamics;
pub mod error;
pub mod linalg;
pub mod mapping;
pub mod model;
pub mod qfilter;
pub mod trajstats;

pub use error::{Error, Result};
pub use linalg::{ComplexMatrix, C64};
pub use mapping::{MappedSystem, Scheme};
pub use model::{DensityMatrix, Generator, LindbladSpec, TlmeSpec};
