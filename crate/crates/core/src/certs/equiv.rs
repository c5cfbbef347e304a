use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64};
use crate::ncalg::LinearPencil;
use crate::par::trial_rng;

const RESTARTS: usize = 20;
const EQUIV_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum EquivVerdict {
    Equivalent {
        #[serde(rename = "U", with = "crate::ncalg::json::matrix")]
        u: CMat,
        residual: f64,
    },
    NotEquivalent {
        reason: String,
    },
    /// The intertwiner space is nonzero but no unitary was found in it.
    Inconclusive {
        nullity: usize,
        best_residual: f64,
    },
}

fn sorted_singular_values(m: &CMat) -> Vec<f64> {
    let mut s: Vec<f64> = m.singular_values().iter().copied().collect();
    s.sort_by(f64::total_cmp);
    s
}

fn conj_residual(u: &CMat, a1: &[CMat], a2: &[CMat]) -> f64 {
    a1.iter().zip(a2).map(|(x, y)| (u * x * u.adjoint() - y).norm()).fold(0.0, f64::max)
}

/// Heuristic test for a unitary `U` with `U A_j^(1) U* = A_j^(2)` for all `j`:
/// cheap spectral invariants first, then polar factors of random elements of
/// the intertwiner space `{X : X A_j^(1) = A_j^(2) X}`.
pub fn unitary_equiv_check(l1: &LinearPencil, l2: &LinearPencil, seed: u64) -> Result<EquivVerdict> {
    if l1.d() != l2.d() {
        return Err(Error::Shape(format!("pencil sizes differ: {} vs {}", l1.d(), l2.d())));
    }
    if l1.g() != l2.g() {
        return Err(Error::Arity { expected: l1.g(), found: l2.g() });
    }
    if l1.form() != l2.form() {
        return Err(Error::Invalid("pencil forms differ".into()));
    }
    let d = l1.d();
    let (a1, a2) = (l1.coeffs(), l2.coeffs());
    let scale = 1.0 + a1.iter().chain(a2).map(|m| m.norm()).fold(0.0, f64::max);
    let tol = EQUIV_TOL * scale;
    let mut rng = trial_rng(seed, 0);

    let mut probes: Vec<(String, CMat, CMat)> =
        (0..a1.len()).map(|j| (format!("A_{}", j + 1), a1[j].clone(), a2[j].clone())).collect();
    for k in 0..4 {
        let cs: Vec<f64> = (0..a1.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let comb = |a: &[CMat]| a.iter().zip(&cs).fold(linalg::zeros(d, d), |acc, (m, c)| acc + m * C64::new(*c, 0.0));
        probes.push((format!("random combination {}", k + 1), comb(a1), comb(a2)));
    }
    for (name, m1, m2) in &probes {
        let (s1, s2) = (sorted_singular_values(m1), sorted_singular_values(m2));
        if s1.iter().zip(&s2).any(|(x, y)| (x - y).abs() > tol) {
            return Ok(EquivVerdict::NotEquivalent { reason: format!("singular values of {name} differ") });
        }
        let (h1, h2) = (linalg::hermitian_part(m1), linalg::hermitian_part(m2));
        let (e1, e2) = (linalg::eigh(&h1).0, linalg::eigh(&h2).0);
        if e1.iter().zip(&e2).any(|(x, y)| (x - y).abs() > tol) {
            return Ok(EquivVerdict::NotEquivalent { reason: format!("spectra of {name} differ") });
        }
    }
    if a1.is_empty() {
        return Ok(EquivVerdict::Equivalent { u: linalg::eye(d), residual: 0.0 });
    }

    // vec(X M1 − M2 X) = (M1ᵀ ⊗ I − I ⊗ M2) vec X, for M = A_j and A_j*
    let id = linalg::eye(d);
    let mut rows = Vec::new();
    for (m1, m2) in a1.iter().zip(a2) {
        rows.push(m1.transpose().kronecker(&id) - id.kronecker(m2));
        rows.push(m1.adjoint().transpose().kronecker(&id) - id.kronecker(&m2.adjoint()));
    }
    let dd = d * d;
    let mut big = linalg::zeros(rows.len() * dd, dd);
    for (i, r) in rows.iter().enumerate() {
        big.view_mut((i * dd, 0), (dd, dd)).copy_from(r);
    }
    let svd = big.svd(false, true);
    let v_t = svd.v_t.expect("requested");
    let smax = svd.singular_values.max();
    let null: Vec<CMat> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, s)| **s <= 1e-9 * smax.max(1.0))
        .map(|(i, _)| {
            let v: Vec<C64> = v_t.row(i).iter().map(|z| z.conj()).collect();
            CMat::from_column_slice(d, d, &v)
        })
        .collect();
    if null.is_empty() {
        return Ok(EquivVerdict::NotEquivalent { reason: "no nonzero intertwiner".into() });
    }
    let mut best = f64::INFINITY;
    for _ in 0..RESTARTS {
        let x = null.iter().fold(linalg::zeros(d, d), |acc, n| acc + n * linalg::gaussian(&mut rng));
        let s = x.clone().svd(true, true);
        if s.singular_values.min() < 1e-10 * s.singular_values.max() {
            continue;
        }
        let u = s.u.expect("requested") * s.v_t.expect("requested");
        let r = conj_residual(&u, a1, a2);
        if r <= EQUIV_TOL {
            return Ok(EquivVerdict::Equivalent { u, residual: r });
        }
        best = best.min(r);
    }
    Ok(EquivVerdict::Inconclusive { nullity: null.len(), best_residual: best })
}
