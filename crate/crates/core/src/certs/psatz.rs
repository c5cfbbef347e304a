use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::dominate::{soundness, SoundnessReport};
use super::witness::{search_witness, PointWitness};
use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64};
use crate::ncalg::{FreePoly, LinearPencil, PencilForm, Word};
use crate::ncdomain::Domain;
use crate::par::Exec;
use crate::sdp::{self, FarkasCertificate, SdpProblem, SdpStatus, SolveOptions};

/// Gram eigenvalues below this (relative to `max(1, λmax)`) are dropped
/// when factoring into `s` and `f_j`.
pub const FACTOR_CUTOFF: f64 = 1e-9;
const POLISH_ITERS: usize = 50;

/// `p = s*s + Σ_j f_j* L f_j` with `s` a column of polynomials and each
/// `f_j` a `d_L`-vector of polynomials, all of degree at most `degree_cap`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PsatzCertificate {
    pub s: FreePoly,
    pub f: Vec<FreePoly>,
    pub residual: f64,
    pub degree_cap: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct PsatzCheck {
    pub residual: f64,
    /// Nonzero coefficient residuals, largest first.
    pub per_word: Vec<(Word, f64)>,
    pub degree_cap: usize,
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum PsatzOutcome {
    Certified { certificate: PsatzCertificate },
    NotCertified { farkas: FarkasCertificate, witness: Option<PointWitness> },
    Inconclusive { status: SdpStatus, detail: String },
}

/// Validates and symmetrizes `p`, returning it with arity `g(L)` and the
/// degree cap `⌈deg p / 2⌉`.
fn prepare(p: &FreePoly, l: &LinearPencil) -> Result<(FreePoly, usize)> {
    if l.form() != PencilForm::Monic {
        return Err(Error::Invalid("the Positivstellensatz needs a monic pencil".into()));
    }
    if p.shape() != (1, 1) {
        return Err(Error::Shape(format!("p must be scalar, got {:?}", p.shape())));
    }
    if !p.is_plain() {
        return Err(Error::Invalid("p must be in symmetric variables (no starred letters)".into()));
    }
    if p.g() > l.g() {
        return Err(Error::Arity { expected: l.g(), found: p.g() });
    }
    let p = p.clone().with_arity(l.g())?;
    let adj = p.sym_adjoint();
    let asym = p.sub(&adj)?.max_abs_coeff();
    if asym > 1e-12 * (1.0 + p.max_abs_coeff()) {
        return Err(Error::Invalid(format!("p is not symmetric (p − p* has coefficient {asym:.3e})")));
    }
    let p = p.add(&adj)?.scale(C64::new(0.5, 0.0));
    Ok((p.clone(), p.degree().div_ceil(2)))
}

fn localizers(l: &LinearPencil) -> Vec<(Word, CMat)> {
    let mut out = vec![(Word::empty(), linalg::eye(l.d()))];
    for (k, a) in l.coeffs().iter().enumerate() {
        out.push((Word::plain(&[k]), -a));
    }
    out
}

/// Searches for a certificate of `p ⪰ 0` on `D_L`. Sound only for bounded
/// `D_L`, which the caller asserts.
pub fn psatz(p: &FreePoly, l: &LinearPencil, opts: &SolveOptions) -> Result<PsatzOutcome> {
    let (p, d) = prepare(p, l)?;
    let g = l.g();
    let dl = l.d();
    let basis = Word::enumerate_plain(g, d);
    let nb = basis.len();
    let locs = localizers(l);
    let mut kg: BTreeMap<Word, CMat> = BTreeMap::new();
    let mut kh: BTreeMap<Word, CMat> = BTreeMap::new();
    for (iu, u) in basis.iter().enumerate() {
        let ru = u.reversed();
        for (iv, v) in basis.iter().enumerate() {
            kg.entry(ru.concat(v)).or_insert_with(|| linalg::zeros(nb, nb))[(iv, iu)] += C64::new(1.0, 0.0);
            for (a, la) in &locs {
                let k = kh.entry(ru.concat(a).concat(v)).or_insert_with(|| linalg::zeros(nb * dl, nb * dl));
                for al in 0..dl {
                    for be in 0..dl {
                        k[(iv * dl + be, iu * dl + al)] += la[(al, be)];
                    }
                }
            }
        }
    }
    let mut prob = SdpProblem::new(vec![nb, nb * dl]);
    let mut sos = SdpProblem::new(vec![nb]);
    prob.set_trace_weights(vec![1.0, 2.0])?;
    let words: Vec<Word> = kg.keys().chain(kh.keys()).cloned().collect::<BTreeSet<_>>().into_iter().collect();
    for w in words {
        if w.reversed() < w {
            continue;
        }
        let mut terms = Vec::new();
        if let Some(k) = kg.get(&w) {
            terms.push((0, k.clone()));
        }
        if let Some(k) = kh.get(&w) {
            terms.push((1, k.clone()));
        }
        let rhs = p.coeff(&w).map_or(C64::new(0.0, 0.0), |c| c[(0, 0)]);
        prob.add_complex_constraint(terms, rhs)?;
        sos.add_complex_constraint(kg.get(&w).map(|k| vec![(0, k.clone())]).unwrap_or_default(), rhs)?;
    }
    let sol = sdp::solve(&prob, opts)?;
    match sol.status {
        SdpStatus::Feasible => {
            let factor = |z: &[CMat]| -> Result<PsatzCertificate> {
                let mut c = PsatzCertificate {
                    s: factor_rows(&z[0], &basis, g)?,
                    f: factor_columns(&z[1], &basis, dl, g)?,
                    residual: 0.0,
                    degree_cap: d,
                };
                c.residual = verify_psatz(&p, l, &c)?.residual;
                Ok(c)
            };
            let mut cert = factor(&sol.z)?;
            let polished = factor(&prob.polish(&sol.z, POLISH_ITERS)?)?;
            if polished.residual < cert.residual {
                cert = polished;
            }
            // a negligible localizing part: try a plain sum of squares
            if sol.z[1].trace().re <= 1e-6 * (1.0 + sol.z[0].trace().re) {
                let alt = sdp::solve(&sos, opts)?;
                if alt.status == SdpStatus::Feasible {
                    for z in [alt.z.clone(), sos.polish(&alt.z, POLISH_ITERS)?] {
                        let mut c = PsatzCertificate { s: factor_rows(&z[0], &basis, g)?, f: Vec::new(), residual: 0.0, degree_cap: d };
                        c.residual = verify_psatz(&p, l, &c)?.residual;
                        if c.residual <= cert.residual.max(1e-9) {
                            cert = c;
                        }
                    }
                }
            }
            if cert.residual > 1e-6 {
                return Ok(PsatzOutcome::Inconclusive {
                    status: sol.status,
                    detail: format!("factored certificate leaves residual {:.3e}", cert.residual),
                });
            }
            Ok(PsatzOutcome::Certified { certificate: cert })
        }
        SdpStatus::Infeasible => {
            let farkas = sol.certificate.expect("infeasible solutions carry a certificate");
            let domain = Domain::lmi(l.clone())?;
            let witness = search_witness(&domain, |x| Ok(linalg::min_eig(&linalg::hermitian_part(&p.eval(x)?))), 0)?;
            Ok(PsatzOutcome::NotCertified { farkas, witness })
        }
        status => Ok(PsatzOutcome::Inconclusive {
            status,
            detail: format!("elastic slack {:.3e}, no Farkas ray above margin", sol.residuals.elastic),
        }),
    }
}

fn kept_factors(gram: &CMat) -> Vec<(f64, Vec<C64>)> {
    let (vals, vecs) = linalg::eigh(gram);
    let top = vals.last().copied().unwrap_or(0.0).max(1.0);
    vals.iter()
        .enumerate()
        .filter(|(_, l)| **l > FACTOR_CUTOFF * top)
        .map(|(i, l)| (l.sqrt(), vecs.column(i).iter().map(|z| z.conj()).collect()))
        .collect()
}

/// `s` with `s*s = V* G V`: one row per kept eigenvalue.
fn factor_rows(gram: &CMat, basis: &[Word], g: usize) -> Result<FreePoly> {
    let rows = kept_factors(gram);
    if rows.is_empty() {
        return Ok(FreePoly::zero(g, (1, 1)));
    }
    let r = rows.len();
    let terms = basis.iter().enumerate().map(|(iu, u)| {
        (u.clone(), CMat::from_fn(r, 1, |i, _| rows[i].1[iu] * rows[i].0))
    });
    FreePoly::from_terms(g, (r, 1), terms)
}

/// `f_j` with `Σ_j f_j* L f_j` matching the localizing Gram block.
fn factor_columns(gram: &CMat, basis: &[Word], dl: usize, g: usize) -> Result<Vec<FreePoly>> {
    kept_factors(gram)
        .into_iter()
        .map(|(s, v)| {
            let terms = basis.iter().enumerate().map(|(iu, u)| (u.clone(), CMat::from_fn(dl, 1, |b, _| v[iu * dl + b] * s)));
            FreePoly::from_terms(g, (dl, 1), terms)
        })
        .collect()
}

/// Expands `s*s + Σ f_j* L f_j` symbolically and compares with `p`
/// coefficientwise. Certificates exceeding the degree cap are rejected.
pub fn verify_psatz(p: &FreePoly, l: &LinearPencil, cert: &PsatzCertificate) -> Result<PsatzCheck> {
    let (p, d) = prepare(p, l)?;
    let g = l.g();
    let check_poly = |q: &FreePoly, what: String, rows: Option<usize>| -> Result<()> {
        if q.g() > g {
            return Err(Error::Arity { expected: g, found: q.g() });
        }
        if !q.is_plain() {
            return Err(Error::Invalid(format!("{what} has starred letters")));
        }
        if q.shape().1 != 1 || rows.is_some_and(|r| q.shape().0 != r) {
            return Err(Error::Shape(format!("{what} has shape {:?}", q.shape())));
        }
        if q.degree() > d {
            return Err(Error::DegreeCap { what, degree: q.degree(), cap: d });
        }
        Ok(())
    };
    check_poly(&cert.s, "s".into(), None)?;
    for (j, f) in cert.f.iter().enumerate() {
        check_poly(f, format!("f_{}", j + 1), Some(l.d()))?;
    }
    let s = cert.s.clone().with_arity(g)?;
    let mut total = s.sym_adjoint().mul(&s)?;
    let lp = l.to_poly();
    for f in &cert.f {
        let f = f.clone().with_arity(g)?;
        total = total.add(&f.sym_adjoint().mul(&lp)?.mul(&f)?)?;
    }
    let diff = total.sub(&p)?;
    let mut per_word: Vec<(Word, f64)> =
        diff.terms().map(|(w, c)| (w.clone(), c[(0, 0)].norm())).filter(|(_, r)| *r > 0.0).collect();
    per_word.sort_by(|a, b| b.1.total_cmp(&a.1));
    let residual = per_word.first().map_or(0.0, |x| x.1);
    Ok(PsatzCheck { residual, per_word, degree_cap: d })
}

/// Samples members of `D_L`; passes when `p(X) ⪰ −1e-7·I` throughout.
pub fn psatz_soundness(p: &FreePoly, l: &LinearPencil, samples: usize, max_n: usize, seed: u64, exec: Exec) -> Result<SoundnessReport> {
    let (p, _) = prepare(p, l)?;
    let domain = Domain::lmi(l.clone())?;
    soundness(&domain, samples, max_n, seed, exec, |x| Ok(linalg::min_eig(&linalg::hermitian_part(&p.eval(x)?))))
}

/// A random monic pencil and `p = s*s + Σ f_j* L f_j` built from random `s`,
/// `f_j` of degree `deg`, so a certificate exists by construction.
///
/// The `A_j` are traceless, so `D_L` is bounded whenever they are linearly
/// independent (`Σ y_j A_j ⪯ 0` with zero trace forces `Σ y_j A_j = 0`);
/// this needs `d_L ≥ 2`.
pub fn planted_instance(rng: &mut impl Rng, g: usize, dl: usize, deg: usize, n_f: usize) -> Result<(FreePoly, LinearPencil)> {
    if dl < 2 {
        return Err(Error::Invalid("planted instances need d_L ≥ 2 for a bounded domain".into()));
    }
    let a: Vec<CMat> = (0..g)
        .map(|_| {
            let h = linalg::random_hermitian(rng, dl);
            let shift = h.trace() / C64::new(dl as f64, 0.0);
            (h - linalg::eye(dl) * shift) * C64::new(0.5, 0.0)
        })
        .collect();
    let l = LinearPencil::monic(a)?;
    let basis = Word::enumerate_plain(g, deg);
    let rand_vec = |rng: &mut dyn rand::RngCore, rows: usize| -> Result<FreePoly> {
        let mut rng = rng;
        FreePoly::from_terms(g, (rows, 1), basis.iter().map(|w| (w.clone(), linalg::random_matrix(&mut rng, rows, 1))))
    };
    let s = rand_vec(rng, 2)?;
    let mut p = s.sym_adjoint().mul(&s)?;
    let lp = l.to_poly();
    for _ in 0..n_f {
        let f = rand_vec(rng, dl)?;
        p = p.add(&f.sym_adjoint().mul(&lp)?.mul(&f)?)?;
    }
    Ok((p, l))
}
