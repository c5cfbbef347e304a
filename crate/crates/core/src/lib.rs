//! Numerical free analysis on matrix tuples.
//!
//! Noncommutative polynomials and pencils ([`ncalg`]), noncommutative sets
//! ([`ncdomain`]), truncated Fock models and dilations ([`fock`]), power
//! series of free maps ([`powerseries`]), free-map property checks
//! ([`freemap`]), a dense Hermitian SDP solver ([`sdp`]) and certificate
//! search for LMI domination and the convex Positivstellensatz ([`certs`]).

pub mod certs;
pub mod error;
pub mod fock;
pub mod freemap;
pub mod linalg;
pub mod ncdomain;
pub mod ncalg;
pub mod par;
pub mod powerseries;
pub mod sdp;

pub use error::{Error, Result};
