//! Certificates for LMI domination, unitary equivalence of pencils and the
//! convex Positivstellensatz.
//!
//! Every certificate returned by a search is re-verified by exact expansion
//! in the free algebra, independent of the SDP residuals.

mod dominate;
mod equiv;
mod psatz;
mod witness;

pub use dominate::{
    domination_soundness, lmi_dominate, verify_domination, DominationCertificate, DominationOutcome, SoundnessReport,
};
pub use equiv::{unitary_equiv_check, EquivVerdict};
pub use psatz::{planted_instance, psatz, psatz_soundness, verify_psatz, PsatzCertificate, PsatzCheck, PsatzOutcome};
pub use witness::{search_witness, PointWitness};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::ncalg::{FreePoly, LinearPencil};

/// Self-contained certificate file: problem data plus certificate, so
/// verification needs nothing else.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum CertBundle {
    Domination { l1: LinearPencil, l2: LinearPencil, certificate: DominationCertificate },
    Psatz { p: FreePoly, l: LinearPencil, certificate: PsatzCertificate },
}

/// Symbolic residual tolerated by `verify_bundle`.
pub const VERIFY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Serialize)]
pub struct BundleCheck {
    pub kind: &'static str,
    pub residual: f64,
    pub tol: f64,
    pub passed: bool,
}

pub fn verify_bundle(b: &CertBundle) -> Result<BundleCheck> {
    let (kind, residual) = match b {
        CertBundle::Domination { l1, l2, certificate } => ("domination", verify_domination(l1, l2, &certificate.v)?),
        CertBundle::Psatz { p, l, certificate } => ("psatz", verify_psatz(p, l, certificate)?.residual),
    };
    Ok(BundleCheck { kind, residual, tol: VERIFY_TOL, passed: residual <= VERIFY_TOL })
}
