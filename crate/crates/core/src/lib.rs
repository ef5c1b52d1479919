//! Executable IP-set combinatorics over countable semigroups.
//!
//! The crate is organised bottom-up:
//!
//! - [`semigroup`]: concrete semigroups with a canonical enumeration order,
//!   Cayley tables and homomorphisms onto finite semigroups.
//! - [`ip`]: finite-product sets, bounded IP/IIP/DIP witness search, the exact
//!   quotient IP criterion, partition checks and finite Hindman windows.
//! - [`formula`]: the quantifier-free definable language over a semigroup
//!   structure, its canonical encoding and enumeration.
//! - [`forge`]: stage-wise construction of an idempotent type from an IP oracle.
//! - [`extract`]: basis extraction from an idempotent-type oracle.
//! - [`spec`]: JSON specifications for semigroups, homomorphisms and predicates.

pub mod error;
pub mod extract;
pub mod forge;
pub mod formula;
pub mod ip;
pub mod semigroup;
pub mod spec;

pub use error::{Error, Result};
pub use semigroup::{Element, FiniteSemigroup, Homomorphism, SemigroupHandle};

/// Version tag written into every JSON report and transcript.
pub const SCHEMA_VERSION: &str = "hindman-forge/1";
