//! Exact computations with the Knizhnik–Zamolodchikov connection in characteristic `p`.
//!
//! The crate builds the KZ connection over finite fields, generates its
//! p-hypergeometric polynomial solutions, computes p-curvature operators at
//! points, solves the system in formal power series, and evaluates the
//! cohomological dictionary of the associated superelliptic curves. Each
//! structural statement is exposed as a check returning a [`cert::Certificate`].

pub mod cert;
pub mod curvecoh;
pub mod error;
pub mod fields;
pub mod hyperg;
pub mod kz_core;
pub mod linalg;
pub mod multipoly;
pub mod pcurv;
pub mod solspace;
pub mod suite;
pub mod upoly;

pub use error::{KzError, Result};
pub use fields::{build_extension, Fe, Field, FieldElement};
