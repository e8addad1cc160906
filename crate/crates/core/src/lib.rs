//! Curvature of almost Hermitian manifolds given by explicit coordinate charts:
//! symbolic expressions, pointwise tensors, Riemannian and Hermitian geometry,
//! the tensors of Bochner type, pointwise classification and a catalog of
//! worked models.

pub mod bochner;
pub mod catalog;
pub mod classify;
pub mod domain;
pub mod error;
pub mod expr;
pub mod geometry;
pub mod linalg;
pub mod tensor;

pub use error::{Error, Result};
