use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::witness::{search_witness, PointWitness};
use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::ncalg::{LinearPencil, MatrixTuple, PencilForm, Word};
use crate::ncdomain::Domain;
use crate::par::{self, Exec};
use crate::sdp::{self, FarkasCertificate, SdpProblem, SdpStatus, SolveOptions};

/// Eigenvalues of the Choi matrix below this (relative to `max(1, λmax)`)
/// are dropped when extracting Kraus operators.
pub const KRAUS_CUTOFF: f64 = 1e-9;

/// `L_2 = Σ_j V_j* L_1 V_j` coefficientwise.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DominationCertificate {
    #[serde(rename = "V", with = "crate::ncalg::json::matrices")]
    pub v: Vec<CMat>,
    #[serde(with = "crate::ncalg::json::matrix")]
    pub choi: CMat,
    pub residual: f64,
    /// Number of Kraus terms; at most `d1·d2`.
    pub mu: usize,
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum DominationOutcome {
    Dominated { certificate: DominationCertificate },
    /// The SDP is infeasible; `witness` is a point of `D_{L1}` where `L2`
    /// fails, when one is found.
    NotDominated { farkas: FarkasCertificate, witness: Option<PointWitness> },
    Inconclusive { status: SdpStatus, detail: String },
}

fn check_pair(l1: &LinearPencil, l2: &LinearPencil) -> Result<()> {
    if l1.g() != l2.g() {
        return Err(Error::Arity { expected: l1.g(), found: l2.g() });
    }
    if l1.form() != l2.form() {
        return Err(Error::Invalid(format!("pencil forms differ: {:?} vs {:?}", l1.form(), l2.form())));
    }
    if l1.form() == PencilForm::Homogeneous {
        return Err(Error::Invalid("domination needs monic or hermitian pencils".into()));
    }
    Ok(())
}

/// `K` with `tr(K C) = Φ(M)[p, q]` for the Choi layout `C[(a,p),(b,q)]`.
fn choi_functional(m: &CMat, d2: usize, p: usize, q: usize) -> CMat {
    let d1 = m.nrows();
    let mut k = linalg::zeros(d1 * d2, d1 * d2);
    for a in 0..d1 {
        for b in 0..d1 {
            k[(b * d2 + q, a * d2 + p)] = m[(a, b)];
        }
    }
    k
}

fn kraus(choi: &CMat, d1: usize, d2: usize) -> Vec<CMat> {
    let (vals, vecs) = linalg::eigh(choi);
    let top = vals.last().copied().unwrap_or(0.0).max(1.0);
    vals.iter()
        .enumerate()
        .filter(|(_, l)| **l > KRAUS_CUTOFF * top)
        .map(|(i, l)| {
            let s = l.sqrt();
            CMat::from_fn(d1, d2, |a, p| (vecs[(a * d2 + p, i)] * s).conj())
        })
        .collect()
}

/// Searches for a completely positive unital map carrying the coefficients
/// of `l1` to those of `l2`. Sound only when `D_{L1}` is bounded, which
/// the caller asserts.
pub fn lmi_dominate(l1: &LinearPencil, l2: &LinearPencil, opts: &SolveOptions) -> Result<DominationOutcome> {
    check_pair(l1, l2)?;
    let (d1, d2) = (l1.d(), l2.d());
    let hermitian_data = l1.form() == PencilForm::Monic;
    let mut prob = SdpProblem::new(vec![d1 * d2]);
    let mut pairs = vec![(linalg::eye(d1), linalg::eye(d2))];
    pairs.extend(l1.coeffs().iter().cloned().zip(l2.coeffs().iter().cloned()));
    for (m1, m2) in &pairs {
        for p in 0..d2 {
            for q in 0..d2 {
                if hermitian_data && q < p {
                    continue;
                }
                prob.add_complex_constraint(vec![(0, choi_functional(m1, d2, p, q))], m2[(p, q)])?;
            }
        }
    }
    let sol = sdp::solve(&prob, opts)?;
    match sol.status {
        SdpStatus::Feasible => {
            let choi = sol.z[0].clone();
            let v = kraus(&choi, d1, d2);
            let residual = verify_domination(l1, l2, &v)?;
            if residual > 1e-6 {
                return Ok(DominationOutcome::Inconclusive {
                    status: sol.status,
                    detail: format!("extracted Kraus operators leave residual {residual:.3e}"),
                });
            }
            let mu = v.len();
            Ok(DominationOutcome::Dominated { certificate: DominationCertificate { v, choi, residual, mu } })
        }
        SdpStatus::Infeasible => {
            let farkas = sol.certificate.expect("infeasible solutions carry a certificate");
            let domain = Domain::lmi(l1.clone())?;
            let witness = search_witness(&domain, |x| Ok(linalg::min_eig(&l2.eval(x)?.matrix)), 0)?;
            Ok(DominationOutcome::NotDominated { farkas, witness })
        }
        status => Ok(DominationOutcome::Inconclusive {
            status,
            detail: format!("elastic slack {:.3e}, no Farkas ray above margin", sol.residuals.elastic),
        }),
    }
}

/// `max_w max_abs(Σ_j V_j* C_w(L1) V_j − C_w(L2))` over the constant term and
/// every variable coefficient.
pub fn verify_domination(l1: &LinearPencil, l2: &LinearPencil, v: &[CMat]) -> Result<f64> {
    check_pair(l1, l2)?;
    for (j, vj) in v.iter().enumerate() {
        if vj.shape() != (l1.d(), l2.d()) {
            return Err(Error::Shape(format!("V_{} is {:?}, expected {}×{}", j + 1, vj.shape(), l1.d(), l2.d())));
        }
    }
    let (p1, p2) = (l1.to_poly(), l2.to_poly());
    let words: BTreeSet<Word> = p1.terms().chain(p2.terms()).map(|(w, _)| w.clone()).collect();
    let mut res: f64 = 0.0;
    for w in words {
        let c1 = p1.coeff_or_zero(&w);
        let pulled = v.iter().fold(linalg::zeros(l2.d(), l2.d()), |acc, vj| acc + vj.adjoint() * &c1 * vj);
        res = res.max(linalg::max_abs(&(pulled - p2.coeff_or_zero(&w))));
    }
    Ok(res)
}

#[derive(Debug, Clone, Serialize)]
pub struct SoundnessReport {
    pub samples: usize,
    /// Smallest eigenvalue of the target over all samples.
    pub min_value: f64,
    pub tol: f64,
    pub passed: bool,
    pub worst: Option<PointWitness>,
}

pub(crate) fn soundness(
    domain: &Domain,
    samples: usize,
    max_n: usize,
    seed: u64,
    exec: Exec,
    value: impl Fn(&MatrixTuple) -> Result<f64> + Sync,
) -> Result<SoundnessReport> {
    let rows = par::map_trials(exec, samples, |i| -> Result<(f64, MatrixTuple, f64)> {
        use rand::Rng;
        let mut rng = par::trial_rng(seed, i as u64);
        let n = rng.random_range(1..=max_n.max(1));
        let x = domain.sample_member(&mut rng, n)?;
        Ok((value(&x)?, x.clone(), domain.margin(&x)?))
    });
    let tol = 1e-7;
    let mut rep = SoundnessReport { samples, min_value: f64::INFINITY, tol, passed: true, worst: None };
    for row in rows {
        let (v, x, m) = row?;
        if v < rep.min_value {
            rep.min_value = v;
            rep.worst = Some(PointWitness { x, domain_margin: m, value: v });
        }
    }
    rep.passed = rep.min_value >= -tol;
    Ok(rep)
}


/// Samples members of `D_{L1}` and records the smallest eigenvalue of
/// `L2(X)`; passes when it is at least `-1e-7`.
pub fn domination_soundness(
    l1: &LinearPencil,
    l2: &LinearPencil,
    samples: usize,
    max_n: usize,
    seed: u64,
    exec: Exec,
) -> Result<SoundnessReport> {
    let domain = Domain::lmi(l1.clone())?;
    soundness(&domain, samples, max_n, seed, exec, |x| Ok(linalg::min_eig(&l2.eval(x)?.matrix)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, from_real};

    fn scalar_monic(coeffs: &[f64]) -> LinearPencil {
        LinearPencil::monic(coeffs.iter().map(|a| from_real(1, 1, &[*a])).collect()).unwrap()
    }

    #[test]
    fn identity_domination() {
        let mut rng = par::trial_rng(21, 0);
        let l = LinearPencil::monic(vec![linalg::random_hermitian(&mut rng, 3), linalg::random_hermitian(&mut rng, 3)]).unwrap();
        let DominationOutcome::Dominated { certificate } = lmi_dominate(&l, &l, &SolveOptions::default()).unwrap() else {
            panic!("expected domination")
        };
        assert_eq!(certificate.mu, 1);
        let v = &certificate.v[0];
        let phase = v[(0, 0)] / v[(0, 0)].norm();
        assert!((v * phase.conj() - linalg::eye(3)).norm() < 1e-6);
        assert!(certificate.residual <= 1e-7);
        assert_eq!(verify_domination(&l, &l, &[linalg::eye(3)]).unwrap(), 0.0);
    }

    #[test]
    fn cube_dominates_half_sum() {
        let l1 = LinearPencil::cube(2);
        let l2 = scalar_monic(&[0.5, 0.5]);
        let h = 0.5f64.sqrt();
        let hand = from_real(4, 1, &[h, 0.0, h, 0.0]);
        assert!(verify_domination(&l1, &l2, &[hand.clone()]).unwrap() <= 1e-15);
        let DominationOutcome::Dominated { certificate } = lmi_dominate(&l1, &l2, &SolveOptions::default()).unwrap() else {
            panic!("expected domination")
        };
        assert!(certificate.residual <= 1e-7);
        assert!(certificate.mu <= 4);
        let snd = domination_soundness(&l1, &l2, 200, 4, 1, Exec::Parallel).unwrap();
        assert!(snd.passed, "{snd:?}");

        let mut rng = par::trial_rng(2, 0);
        let e = linalg::random_matrix(&mut rng, 4, 1) * c(1e-3, 0.0);
        let r = verify_domination(&l1, &l2, &[hand + e]).unwrap();
        assert!(r > 1e-5 && r < 1e-2, "{r}");
    }

    #[test]
    fn cube_does_not_dominate_steep() {
        let l1 = LinearPencil::cube(2);
        let l2 = scalar_monic(&[2.0, 0.0]);
        let DominationOutcome::NotDominated { farkas, witness } = lmi_dominate(&l1, &l2, &SolveOptions::default()).unwrap() else {
            panic!("expected infeasible")
        };
        assert!(farkas.delta > 1e-7);
        let w = witness.unwrap();
        assert!(w.domain_margin > 0.0 && w.value < 0.0);
        let known = MatrixTuple::scalars(&[c(0.6, 0.0), c(0.0, 0.0)]);
        assert!(Domain::lmi(l1).unwrap().is_member(&known));
        assert!((l2.eval(&known).unwrap().matrix[(0, 0)].re + 0.2).abs() < 1e-12);
    }

    #[test]
    fn unbounded_domain_regression() {
        // {X ≺ I} ⊂ {X ≺ 2I} on points, but constants force ΣV*V = 1 while
        // the x-coefficients force ΣV*V = 1/2
        let l1 = scalar_monic(&[1.0]);
        let l2 = scalar_monic(&[0.5]);
        let DominationOutcome::NotDominated { farkas, witness } = lmi_dominate(&l1, &l2, &SolveOptions::default()).unwrap() else {
            panic!("expected infeasible")
        };
        assert!(farkas.delta > 1e-7);
        assert!(witness.is_none());
        let snd = domination_soundness(&l1, &l2, 100, 3, 4, Exec::Sequential).unwrap();
        assert!(snd.passed);
    }

    #[test]
    fn hermitian_form_domination() {
        let l = LinearPencil::disc_example();
        let DominationOutcome::Dominated { certificate } = lmi_dominate(&l, &l, &SolveOptions::default()).unwrap() else {
            panic!("expected domination")
        };
        assert!(certificate.residual <= 1e-7);
    }

    #[test]
    fn verify_rejects_bad_shapes() {
        let l1 = LinearPencil::cube(1);
        assert!(verify_domination(&l1, &l1, &[linalg::eye(3)]).is_err());
        assert!(verify_domination(&l1, &LinearPencil::cube(2), &[]).is_err());
    }

    #[test]
    fn certificate_json() {
        let l1 = LinearPencil::cube(2);
        let l2 = scalar_monic(&[0.5, 0.5]);
        let DominationOutcome::Dominated { certificate } = lmi_dominate(&l1, &l2, &SolveOptions::default()).unwrap() else {
            panic!()
        };
        let text = serde_json::to_string(&certificate).unwrap();
        let back: DominationCertificate = serde_json::from_str(&text).unwrap();
        assert_eq!(verify_domination(&l1, &l2, &back.v).unwrap(), certificate.residual);
    }
}
