//! Power-series coefficients of free maps.
//!
//! Coefficients are read off a black-box evaluator at the scaled truncated
//! Fock tuple `δT`: component `i` of `F_w` is `δ^{-|w|} ⟨f(δT)_i e_∅, e_w⟩`,
//! exact for polynomials of degree `≤ ℓ`.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::TruncatedFock;
use crate::freemap::FreeMapHandle;
use crate::linalg::{self, cis, CMat, CVec, C64};
use crate::ncalg::{FreePoly, MatrixTuple, Word};
use crate::ncdomain::Domain;

/// Truncations beyond this order are numerically fragile (`δ^{-ℓ}` growth).
pub const WARN_ELL: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoeffBound {
    #[serde(rename = "C")]
    pub c: f64,
    pub eps: f64,
}

/// `Σ_{|w| ≤ ℓ} F_w w` with `F_w ∈ C^{g̃}` over plain words.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SeriesJson", into = "SeriesJson")]
pub struct PowerSeries {
    g: usize,
    gt: usize,
    ell: usize,
    coeffs: BTreeMap<Word, CVec>,
    bound: Option<CoeffBound>,
}

#[derive(Serialize, Deserialize)]
struct TermJson {
    word: Word,
    #[serde(with = "crate::ncalg::json::vector")]
    coeff: CVec,
}

#[derive(Serialize, Deserialize)]
struct SeriesJson {
    g: usize,
    gt: usize,
    ell: usize,
    terms: Vec<TermJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bound: Option<CoeffBound>,
}

impl TryFrom<SeriesJson> for PowerSeries {
    type Error = Error;

    fn try_from(j: SeriesJson) -> Result<Self> {
        let mut s = PowerSeries::zero(j.g, j.gt, j.ell);
        for t in j.terms {
            s.set(t.word, t.coeff)?;
        }
        match j.bound {
            Some(b) => s.with_bound(b.c, b.eps),
            None => Ok(s),
        }
    }
}

impl From<PowerSeries> for SeriesJson {
    fn from(s: PowerSeries) -> Self {
        SeriesJson {
            g: s.g,
            gt: s.gt,
            ell: s.ell,
            terms: s.coeffs.into_iter().map(|(word, coeff)| TermJson { word, coeff }).collect(),
            bound: s.bound,
        }
    }
}

impl PowerSeries {
    pub fn zero(g: usize, gt: usize, ell: usize) -> Self {
        PowerSeries { g, gt, ell, coeffs: BTreeMap::new(), bound: None }
    }

    /// Coefficients of a column-vector polynomial (`g̃ × 1` coefficients).
    pub fn from_poly(p: &FreePoly, ell: usize) -> Result<Self> {
        if p.shape().1 != 1 {
            return Err(Error::Shape(format!("series coefficients are column vectors, got {:?}", p.shape())));
        }
        let mut s = PowerSeries::zero(p.g(), p.shape().0, ell);
        for (w, c) in p.terms() {
            s.set(w.clone(), c.column(0).into_owned())?;
        }
        Ok(s)
    }

    pub fn set(&mut self, w: Word, f: CVec) -> Result<()> {
        if !w.is_plain() || w.min_arity() > self.g {
            return Err(Error::Invalid(format!("{w} is not a plain word over {} letters", self.g)));
        }
        if w.len() > self.ell {
            return Err(Error::DegreeCap { what: format!("word {w}"), degree: w.len(), cap: self.ell });
        }
        if f.len() != self.gt {
            return Err(Error::Shape(format!("coefficient of {w} has length {}, expected {}", f.len(), self.gt)));
        }
        if f.iter().all(|z| z.re == 0.0 && z.im == 0.0) {
            self.coeffs.remove(&w);
        } else {
            self.coeffs.insert(w, f);
        }
        Ok(())
    }

    /// Attaches `‖F_w‖ ≤ C/ε^{|w|}`, rejecting it if any stored coefficient
    /// violates it beyond a `1e-9` relative margin.
    pub fn with_bound(mut self, c: f64, eps: f64) -> Result<Self> {
        if !(c >= 0.0 && eps > 0.0) {
            return Err(Error::Invalid(format!("bound needs C ≥ 0 and eps > 0, got C = {c}, eps = {eps}")));
        }
        let ratio = self.bound_ratio(c, eps);
        if ratio > 1.0 + 1e-9 {
            return Err(Error::Invalid(format!("coefficients exceed C/eps^|w| by factor {ratio}")));
        }
        self.bound = Some(CoeffBound { c, eps });
        Ok(self)
    }

    /// `max_w ‖F_w‖ ε^{|w|} / C`; at most 1 when the bound holds.
    pub fn bound_ratio(&self, c: f64, eps: f64) -> f64 {
        self.coeffs
            .iter()
            .map(|(w, f)| {
                let lhs = f.norm() * eps.powi(w.len() as i32);
                if c == 0.0 {
                    if lhs == 0.0 { 0.0 } else { f64::INFINITY }
                } else {
                    lhs / c
                }
            })
            .fold(0.0, f64::max)
    }

    pub fn g(&self) -> usize {
        self.g
    }

    pub fn gt(&self) -> usize {
        self.gt
    }

    pub fn ell(&self) -> usize {
        self.ell
    }

    pub fn bound(&self) -> Option<CoeffBound> {
        self.bound
    }

    pub fn coeffs(&self) -> impl Iterator<Item = (&Word, &CVec)> {
        self.coeffs.iter()
    }

    pub fn coeff(&self, w: &Word) -> CVec {
        self.coeffs.get(w).cloned().unwrap_or_else(|| CVec::zeros(self.gt))
    }

    /// Largest coefficient discrepancy against a column-vector polynomial.
    pub fn distance_to_poly(&self, p: &FreePoly) -> Result<f64> {
        let other = PowerSeries::from_poly(p, self.ell.max(p.degree()))?;
        if other.gt != self.gt {
            return Err(Error::Shape(format!("output arity {} vs {}", other.gt, self.gt)));
        }
        let mut d: f64 = 0.0;
        for w in self.coeffs.keys().chain(other.coeffs.keys()) {
            d = d.max((self.coeff(w) - other.coeff(w)).camax());
        }
        Ok(d)
    }

    /// The truncation as a column-vector polynomial.
    pub fn to_poly(&self) -> Result<FreePoly> {
        FreePoly::from_terms(
            self.g,
            (self.gt, 1),
            self.coeffs.iter().map(|(w, f)| (w.clone(), CMat::from_column_slice(self.gt, 1, f.as_slice()))),
        )
    }
}

/// `0.7×` the exit distance of the ray `t·T` from 0, capped at 1. Gives
/// `0.7ε` on `N_ε`.
pub fn default_delta(domain: &Domain, ell: usize) -> Result<f64> {
    let fock = TruncatedFock::build(domain.g(), ell)?;
    let t = fock.creation_ops();
    let exit = domain.chord_end(&MatrixTuple::zeros(domain.g(), fock.dim()), &t, 1.0 / 0.7)?;
    Ok(0.7 * exit)
}

pub fn conditioning_warning(ell: usize, delta: f64) -> Option<String> {
    (ell > WARN_ELL)
        .then(|| format!("truncation order {ell} > {WARN_ELL}: coefficients are amplified by δ^-ℓ = {:.3e}", delta.powi(-(ell as i32))))
}

/// Coefficients of `f` up to order `ℓ` from one evaluation at `δT`.
pub fn extract_coeffs(f: &FreeMapHandle, ell: usize, delta: Option<f64>) -> Result<PowerSeries> {
    let delta = match delta {
        Some(d) => d,
        None => default_delta(f.domain(), ell)?,
    };
    if !(delta > 0.0) {
        return Err(Error::Invalid(format!("delta must be positive, got {delta}")));
    }
    let fock = TruncatedFock::build(f.g(), ell)?;
    let point = fock.creation_ops().scale(C64::new(delta, 0.0));
    let out = f.eval_in_domain(&point)?;
    let mut series = PowerSeries::zero(f.g(), f.gt(), ell);
    for (idx, w) in fock.basis().iter().enumerate() {
        let scale = delta.powi(-(w.len() as i32));
        let v = CVec::from_iterator(f.gt(), out.mats().iter().map(|m| m[(idx, 0)] * scale));
        series.set(w.clone(), v)?;
    }
    Ok(series)
}

/// Default quadrature size `max(2(m+1), 16)`.
pub fn default_samples(m: usize) -> usize {
    (2 * (m + 1)).max(16)
}

/// `f^{(m)}(X) ≈ (1/N) Σ_k f(e^{it_k}X) e^{-imt_k}`, `t_k = 2πk/N`.
pub fn homogeneous_part(f: &FreeMapHandle, m: usize, x: &MatrixTuple, samples: Option<usize>) -> Result<MatrixTuple> {
    let n_s = samples.unwrap_or_else(|| default_samples(m));
    if n_s == 0 {
        return Err(Error::Invalid("quadrature needs at least one sample".into()));
    }
    let mut acc = MatrixTuple::zeros(f.gt(), x.n());
    for k in 0..n_s {
        let t = 2.0 * PI * k as f64 / n_s as f64;
        let val = f.eval_in_domain(&x.scale(cis(t)))?;
        acc = acc.add(&val.scale(cis(-(m as f64) * t)))?;
    }
    Ok(acc.scale(C64::new(1.0 / n_s as f64, 0.0)))
}

#[derive(Debug, Clone, Serialize)]
pub struct SeriesValue {
    pub value: MatrixTuple,
    /// `C r^{M+1}/(1 − r)` with `r = ‖ΣX_jX_j*‖^{1/2}/ε`; absent without bound
    /// metadata or when `r ≥ 1`.
    pub tail_bound: Option<f64>,
}

/// Partial sum `Σ_{|w| ≤ M} F_w ⊗ X^w`.
pub fn eval_series(p: &PowerSeries, x: &MatrixTuple, order: usize) -> Result<SeriesValue> {
    x.check_arity(p.g)?;
    if order > p.ell {
        return Err(Error::DegreeCap { what: "evaluation order".into(), degree: order, cap: p.ell });
    }
    let n = x.n();
    let mut value = vec![linalg::zeros(n, n); p.gt];
    for (w, f) in p.coeffs.iter().filter(|(w, _)| w.len() <= order) {
        let xw = x.eval_word(w)?;
        for (i, out) in value.iter_mut().enumerate() {
            if f[i] != C64::new(0.0, 0.0) {
                *out += &xw * f[i];
            }
        }
    }
    let tail_bound = p.bound.and_then(|b| {
        let r = x.row_norm() / b.eps;
        (r < 1.0).then(|| b.c * r.powi(order as i32 + 1) / (1.0 - r))
    });
    Ok(SeriesValue { value: MatrixTuple::new(value)?, tail_bound })
}

#[derive(Debug, Clone, Serialize)]
pub struct JordanProbe {
    pub ell: usize,
    pub residual: f64,
    pub scale: f64,
}

/// For `f` homogeneous of degree `ℓ`: compares `f(X ⊗ J)` against
/// `(Σ_{|w|=ℓ} F_w X^w) ⊗ J^ℓ` with `J` the `(ℓ+1)`-Jordan block.
pub fn jordan_degree_probe(f: &FreeMapHandle, ell: usize, x: &MatrixTuple, delta: Option<f64>) -> Result<JordanProbe> {
    x.check_arity(f.g())?;
    let j = linalg::nilpotent_jordan(ell + 1);
    let y = x.kron_right(&j);
    let fy = f.eval_in_domain(&y)?;
    let series = extract_coeffs(f, ell, delta)?;
    let jl = (0..ell).fold(linalg::eye(ell + 1), |acc, _| acc * &j);
    let n = x.n();
    let mut residual: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for i in 0..f.gt() {
        let mut top = linalg::zeros(n, n);
        for (w, c) in series.coeffs().filter(|(w, _)| w.len() == ell) {
            top += x.eval_word(w)? * c[i];
        }
        let expect = top.kronecker(&jl);
        residual = residual.max((fy.get(i) - &expect).norm());
        scale = scale.max(expect.norm());
    }
    Ok(JordanProbe { ell, residual, scale })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::freemap::{ftheta, poly_map};
    use crate::linalg::c;
    use crate::ncalg::parse_poly;
    use crate::ncdomain::EpsNeighborhood;
    use crate::par::trial_rng;
    use proptest::prelude::*;
    use rand::Rng;

    fn random_vector_poly(rng: &mut impl Rng, g: usize, gt: usize, deg: usize) -> FreePoly {
        let mut terms = Vec::new();
        for w in Word::enumerate_plain(g, deg) {
            if rng.random_bool(0.6) {
                terms.push((w, linalg::random_matrix(rng, gt, 1)));
            }
        }
        FreePoly::from_terms(g, (gt, 1), terms).unwrap()
    }

    fn geometric(theta: f64, k: usize) -> C64 {
        cis(theta) * (cis(theta) - C64::new(1.0, 0.0)).powu(k as u32 - 1)
    }

    #[test]
    fn linear_recovery() {
        let f = poly_map(parse_poly("x1 + 2 x2", None).unwrap()).unwrap();
        let s = extract_coeffs(&f, 2, Some(0.4)).unwrap();
        for w in Word::enumerate_plain(2, 2) {
            let expect = match w.to_signed().as_slice() {
                [1] => 1.0,
                [2] => 2.0,
                _ => 0.0,
            };
            assert!((s.coeff(&w)[0] - c(expect, 0.0)).norm() < 1e-12, "{w}");
        }
    }

    #[test]
    fn ftheta_geometric_coefficients() {
        for theta in [0.3, 1.0, 2.5] {
            let s = extract_coeffs(&ftheta(theta), 6, Some(0.4)).unwrap();
            assert!(s.coeff(&Word::empty()).norm() < 1e-12);
            for k in 1..=6 {
                let got = s.coeff(&Word::plain(&vec![0; k]))[0];
                assert!((got - geometric(theta, k)).norm() < 1e-8, "θ={theta} k={k}");
            }
        }
    }

    #[test]
    fn half_scaled_fock_point_leaves_disc_domain() {
        // ‖I − T/2‖ ≈ 1.449 exceeds √2 at ℓ = 4
        assert!(matches!(extract_coeffs(&ftheta(1.0), 4, Some(0.5)), Err(Error::OutsideDomain { .. })));
    }

    #[test]
    fn default_delta_on_neighborhood() {
        let d = Domain::Nbhd(EpsNeighborhood::new(2, 0.3).unwrap());
        assert!((default_delta(&d, 3).unwrap() - 0.21).abs() < 1e-7);
        assert!((default_delta(&Domain::Entire { g: 2 }, 3).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn poly_round_trip_degree_three() {
        let mut rng = trial_rng(17, 0);
        for _ in 0..5 {
            let p = random_vector_poly(&mut rng, 2, 2, 3);
            let s = extract_coeffs(&poly_map(p.clone()).unwrap(), 3, Some(0.6)).unwrap();
            assert!(s.distance_to_poly(&p).unwrap() < 1e-10);
        }
    }

    #[test]
    fn neumann_bound_holds() {
        let eps = 0.3;
        for theta in [0.5, 2.0, PI] {
            let a = (C64::new(1.0, 0.0) - cis(theta)).norm();
            let bound = eps / (1.0 - a * eps);
            let f = ftheta(theta).with_domain(Domain::Nbhd(EpsNeighborhood::new(1, eps).unwrap())).unwrap();
            let s = extract_coeffs(&f, 6, None).unwrap();
            assert!(s.bound_ratio(bound, eps) <= 1.0 + 1e-6);
            assert!(s.with_bound(bound, eps).is_ok());
        }
    }

    #[test]
    fn homogeneous_parts() {
        let f = poly_map(parse_poly("2 + 3x", None).unwrap()).unwrap();
        let mut rng = trial_rng(2, 0);
        let x = MatrixTuple::new(vec![linalg::random_matrix(&mut rng, 3, 3)]).unwrap();
        let h0 = homogeneous_part(&f, 0, &x, None).unwrap();
        assert!((h0.get(0) - linalg::eye(3) * c(2.0, 0.0)).norm() < 1e-12);

        let theta = 0.9;
        let h1 = homogeneous_part(&ftheta(theta), 1, &MatrixTuple::scalar(c(0.3, 0.0)), Some(32)).unwrap();
        assert!((h1.get(0)[(0, 0)] - cis(theta) * 0.3).norm() < 1e-10);

        let sq = poly_map(parse_poly("x^2", None).unwrap()).unwrap();
        let h2 = homogeneous_part(&sq, 2, &x, Some(8)).unwrap();
        assert!((h2.get(0) - x.get(0) * x.get(0)).norm() < 1e-12);
        assert!(homogeneous_part(&sq, 1, &x, Some(8)).unwrap().get(0).norm() < 1e-12);
    }

    #[test]
    fn homogeneous_part_outside_domain() {
        let x = MatrixTuple::scalar(c(-0.9, 0.0));
        assert!(matches!(homogeneous_part(&ftheta(1.0), 1, &x, None), Err(Error::OutsideDomain { .. })));
    }

    #[test]
    fn series_evaluation() {
        let theta = PI / 3.0;
        let s = extract_coeffs(&ftheta(theta), 8, None).unwrap();
        let x = MatrixTuple::scalar(c(0.2, 0.0));
        let v = eval_series(&s, &x, 8).unwrap();
        let direct = ftheta(theta).eval(&x).unwrap();
        assert!(v.value.distance(&direct).unwrap() < 5e-6);

        let eps = 0.3;
        let f = ftheta(theta).with_domain(Domain::Nbhd(EpsNeighborhood::new(1, eps).unwrap())).unwrap();
        let bounded = extract_coeffs(&f, 8, None).unwrap().with_bound(eps / (1.0 - eps), eps).unwrap();
        let v = eval_series(&bounded, &x, 8).unwrap();
        let tail = v.tail_bound.unwrap();
        assert!(v.value.distance(&direct).unwrap() <= tail);

        let zero = PowerSeries::zero(1, 1, 3).with_bound(0.0, 1.0).unwrap();
        let v = eval_series(&zero, &x, 3).unwrap();
        assert_eq!(v.tail_bound, Some(0.0));
        assert_eq!(v.value, MatrixTuple::zeros(1, 1));
    }

    #[test]
    fn series_of_quadratic_is_exact() {
        let mut rng = trial_rng(8, 0);
        let p = random_vector_poly(&mut rng, 2, 1, 2);
        let s = PowerSeries::from_poly(&p, 2).unwrap();
        let x = MatrixTuple::new(vec![linalg::random_matrix(&mut rng, 3, 3), linalg::random_matrix(&mut rng, 3, 3)]).unwrap();
        let v = eval_series(&s, &x, 2).unwrap();
        assert!((v.value.get(0) - p.eval(&x).unwrap()).norm() < 1e-12);
        assert!(eval_series(&s, &x, 3).is_err());
    }

    #[test]
    fn jordan_probe() {
        let mut rng = trial_rng(5, 0);
        let sq = poly_map(parse_poly("x^2", None).unwrap()).unwrap();
        let x = MatrixTuple::new(vec![linalg::random_matrix(&mut rng, 2, 2)]).unwrap();
        assert!(jordan_degree_probe(&sq, 2, &x, None).unwrap().residual <= 1e-10);

        let lin = poly_map(parse_poly("3x", None).unwrap()).unwrap();
        assert_eq!(jordan_degree_probe(&lin, 1, &MatrixTuple::scalar(c(0.7, 0.0)), None).unwrap().residual, 0.0);

        let prod = poly_map(parse_poly("x1 x2", None).unwrap()).unwrap();
        let x2 = MatrixTuple::new(vec![linalg::random_matrix(&mut rng, 2, 2), linalg::random_matrix(&mut rng, 2, 2)]).unwrap();
        assert!(jordan_degree_probe(&prod, 2, &x2, None).unwrap().residual <= 1e-10);
    }

    #[test]
    fn json_round_trip() {
        let mut rng = trial_rng(1, 0);
        let p = random_vector_poly(&mut rng, 2, 2, 2);
        let s = PowerSeries::from_poly(&p, 2).unwrap().with_bound(100.0, 0.5).unwrap();
        let text = serde_json::to_string(&s).unwrap();
        let back: PowerSeries = serde_json::from_str(&text).unwrap();
        assert_eq!(back, s);
        let bad = r#"{"g":1,"gt":1,"ell":1,"terms":[{"word":[1,1],"coeff":[1]}]}"#;
        assert!(serde_json::from_str::<PowerSeries>(bad).is_err());
    }

    #[test]
    fn warning_threshold() {
        assert!(conditioning_warning(20, 0.5).is_none());
        assert!(conditioning_warning(21, 0.5).is_some());
    }

    #[test]
    fn homogeneity_under_rotation() {
        let f = ftheta(0.8);
        let mut rng = trial_rng(6, 0);
        let x = f.domain().sample_member(&mut rng, 2).unwrap().scale(c(0.3, 0.0));
        let z = cis(1.3);
        for m in 0..4 {
            let a = homogeneous_part(&f, m, &x.scale(z), Some(32)).unwrap();
            let b = homogeneous_part(&f, m, &x, Some(32)).unwrap().scale(z.powu(m as u32));
            assert!(a.distance(&b).unwrap() < 1e-9);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn extraction_round_trip(seed in any::<u64>(), g in 1usize..=2, deg in 0usize..=3, delta in 0.3f64..0.9) {
            let mut rng = trial_rng(seed, 0);
            let p = random_vector_poly(&mut rng, g, 2, deg);
            let s = extract_coeffs(&poly_map(p.clone()).unwrap(), deg, Some(delta)).unwrap();
            prop_assert!(s.distance_to_poly(&p).unwrap() < 1e-9);
        }

        #[test]
        fn consistency_with_homogeneous_parts(seed in any::<u64>()) {
            let mut rng = trial_rng(seed, 0);
            let p = random_vector_poly(&mut rng, 2, 1, 3);
            let f = poly_map(p.clone()).unwrap();
            let x = MatrixTuple::new(vec![linalg::random_matrix(&mut rng, 2, 2), linalg::random_matrix(&mut rng, 2, 2)]).unwrap();
            let mut total = MatrixTuple::zeros(1, 2);
            for m in 0..=3 {
                total = total.add(&homogeneous_part(&f, m, &x, None).unwrap()).unwrap();
            }
            let s = extract_coeffs(&f, 3, Some(0.7)).unwrap();
            let v = eval_series(&s, &x, 3).unwrap();
            prop_assert!(total.distance(&v.value).unwrap() < 1e-7);
        }
    }
}
