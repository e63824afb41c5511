//! Covariance-matrix generalized Hartree-Fock for interacting lattice fermions.
//!
//! States are fermionic Gaussian states stored as their real antisymmetric
//! Majorana covariance matrix `G_kl = <(i/2)[c_k, c_l]>` with the pairing
//! `c_k = a_k^+ + a_k`, `c_{k+M} = -i(a_k^+ - a_k)`. Indices are zero-based
//! throughout: Majorana `k` in `0..M` pairs with `k + M`.

pub mod covariance;
pub mod dynamics;
pub mod error;
pub mod ground;
pub mod lattice;
pub mod linalg;
pub mod model;
pub mod observables;
pub mod oracle;
pub mod pfaffian;
pub mod thermal;

pub use covariance::{CovarianceMatrix, SkewMatrix};
pub use error::{Error, Result};
pub use pfaffian::pfaffian;
