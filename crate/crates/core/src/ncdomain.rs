//! Noncommutative sets: ε-neighbourhoods of 0, LMI domains and pencil-style
//! semialgebraic sets, with membership margins and sampling.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64};
use crate::ncalg::{FreePoly, LinearPencil, MatrixTuple, PencilForm, Word};
use crate::par::{self, Exec};

/// `{X : Σ X_j X_j* ≺ ε²}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsNeighborhood {
    pub g: usize,
    pub eps: f64,
}

impl EpsNeighborhood {
    pub fn new(g: usize, eps: f64) -> Result<Self> {
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(Error::Invalid(format!("radius must be positive, got {eps}")));
        }
        Ok(EpsNeighborhood { g, eps })
    }
}

/// `{X : I + p(X) + p(X)* ≻ 0}`, restricted to the component of the origin
/// by requiring positivity along the segment from 0 to X.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemialgDomain {
    pub p: FreePoly,
    #[serde(default = "default_segment_samples")]
    pub segment_samples: usize,
}

fn default_segment_samples() -> usize {
    64
}

impl SemialgDomain {
    pub fn new(p: FreePoly) -> Result<Self> {
        let (r, c) = p.shape();
        if r != c {
            return Err(Error::Shape(format!("semialgebraic polynomial must be square, got {r}×{c}")));
        }
        if p.coeff(&Word::empty()).is_some() {
            return Err(Error::Invalid("semialgebraic polynomial must vanish at 0".into()));
        }
        Ok(SemialgDomain { p, segment_samples: default_segment_samples() })
    }

    fn matrix_at(&self, x: &MatrixTuple) -> Result<CMat> {
        let v = self.p.eval(x)?;
        Ok(linalg::eye(v.nrows()) + &v + v.adjoint())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "lowercase")]
pub enum Domain {
    Nbhd(EpsNeighborhood),
    Lmi(LinearPencil),
    Semialg(SemialgDomain),
    /// All tuples of the given arity.
    Entire { g: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Member,
    Boundary,
    NonMember,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Membership {
    pub status: Status,
    pub margin: f64,
    pub tol: f64,
}

impl Membership {
    pub fn is_member(&self) -> bool {
        self.status == Status::Member
    }
}

/// Default member/boundary threshold `1e-9·(1 + ‖X‖)`.
pub fn default_tol(x: &MatrixTuple) -> f64 {
    1e-9 * (1.0 + x.max_norm())
}

impl Domain {
    pub fn lmi(pencil: LinearPencil) -> Result<Self> {
        if pencil.form() == PencilForm::Homogeneous {
            return Err(Error::Invalid("an LMI domain needs a hermitian or monic pencil".into()));
        }
        Ok(Domain::Lmi(pencil))
    }

    /// The LMI domain `{X : ‖X − 1‖ < √2}` of the univariate 2×2 disc pencil.
    pub fn disc_example() -> Self {
        Domain::Lmi(LinearPencil::disc_example())
    }

    pub fn g(&self) -> usize {
        match self {
            Domain::Nbhd(nb) => nb.g,
            Domain::Lmi(l) => l.g(),
            Domain::Semialg(s) => s.p.g(),
            Domain::Entire { g } => *g,
        }
    }

    /// Monic pencils live on Hermitian tuples; everything else on arbitrary
    /// complex tuples.
    pub fn hermitian_variables(&self) -> bool {
        matches!(self, Domain::Lmi(l) if l.form() == PencilForm::Monic)
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Domain::Nbhd(_) => "nbhd",
            Domain::Lmi(_) => "lmi",
            Domain::Semialg(_) => "semialg",
            Domain::Entire { .. } => "entire",
        }
    }

    fn check_input(&self, x: &MatrixTuple) -> Result<()> {
        x.check_arity(self.g())?;
        if self.hermitian_variables() && !x.is_hermitian(1e-10) {
            return Err(Error::Invalid("monic LMI domains are defined on Hermitian tuples".into()));
        }
        Ok(())
    }

    /// The Hermitian matrix whose positivity defines membership; `None` for
    /// the entire space.
    pub fn defining_matrix(&self, x: &MatrixTuple) -> Result<Option<CMat>> {
        self.check_input(x)?;
        Ok(match self {
            Domain::Nbhd(nb) => Some(linalg::eye(x.n()) * C64::new(nb.eps * nb.eps, 0.0) - x.row_gram()),
            Domain::Lmi(l) => Some(l.eval(x)?.matrix),
            Domain::Semialg(s) => Some(s.matrix_at(x)?),
            Domain::Entire { .. } => None,
        })
    }

    /// Smallest eigenvalue of the defining matrix (for semialgebraic sets the
    /// minimum along the segment from 0). `+∞` for the entire space.
    pub fn margin(&self, x: &MatrixTuple) -> Result<f64> {
        if let Domain::Semialg(s) = self {
            self.check_input(x)?;
            let k = s.segment_samples.max(1);
            let mut lo = f64::INFINITY;
            for i in 1..=k {
                let t = i as f64 / k as f64;
                lo = lo.min(linalg::min_eig(&s.matrix_at(&x.scale(C64::new(t, 0.0)))?));
            }
            return Ok(lo);
        }
        Ok(self.defining_matrix(x)?.map_or(f64::INFINITY, |m| linalg::min_eig(&m)))
    }

    pub fn contains_with_tol(&self, x: &MatrixTuple, tol: f64) -> Result<Membership> {
        let margin = self.margin(x)?;
        let status = if margin > tol {
            Status::Member
        } else if margin.abs() <= tol {
            Status::Boundary
        } else {
            Status::NonMember
        };
        Ok(Membership { status, margin, tol })
    }

    pub fn contains(&self, x: &MatrixTuple) -> Result<Membership> {
        self.contains_with_tol(x, default_tol(x))
    }

    pub fn is_member(&self, x: &MatrixTuple) -> bool {
        self.contains(x).map(|m| m.is_member()).unwrap_or(false)
    }

    /// Random direction tuple of size `n` suited to this domain.
    pub fn random_direction(&self, rng: &mut impl Rng, n: usize) -> MatrixTuple {
        let herm = self.hermitian_variables();
        let mats: Vec<CMat> = (0..self.g())
            .map(|_| {
                let m = if herm { linalg::random_hermitian(rng, n) } else { linalg::random_matrix(rng, n, n) };
                m * C64::new(1.0 / (n as f64).sqrt(), 0.0)
            })
            .collect();
        MatrixTuple::new(mats).expect("conformal")
    }

    /// Largest `t ≤ t_cap` (up to bisection accuracy) with `x + t·d` a member.
    /// Assumes `x` is a member and the domain is star-shaped about `x` along
    /// `d`.
    pub fn chord_end(&self, x: &MatrixTuple, d: &MatrixTuple, t_cap: f64) -> Result<f64> {
        let at = |t: f64| -> Result<bool> { Ok(self.is_member(&x.add(&d.scale(C64::new(t, 0.0)))?)) };
        if at(t_cap)? {
            return Ok(t_cap);
        }
        let (mut lo, mut hi) = (0.0, t_cap);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if at(mid)? {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-13 * (1.0 + hi) {
                break;
            }
        }
        Ok(lo)
    }

    /// Random member of size `n`: a Gaussian direction is scaled to a uniform
    /// fraction of its exit distance, then shrunk toward 0 until contained.
    pub fn sample_member(&self, rng: &mut impl Rng, n: usize) -> Result<MatrixTuple> {
        let d = self.random_direction(rng, n);
        let zero = MatrixTuple::zeros(self.g(), n);
        let exit = self.chord_end(&zero, &d, 16.0)?;
        let mut x = d.scale(C64::new(rng.random_range(0.0..1.0) * exit, 0.0));
        for _ in 0..200 {
            if self.is_member(&x) {
                return Ok(x);
            }
            x = x.scale(C64::new(0.8, 0.0));
        }
        Ok(zero)
    }

    /// Member within `band` of the boundary along a random ray (margin in
    /// `(0, band]` when one is found by bisection).
    pub fn sample_near_boundary(&self, rng: &mut impl Rng, n: usize, band: f64) -> Result<Option<MatrixTuple>> {
        let d = self.random_direction(rng, n);
        let zero = MatrixTuple::zeros(self.g(), n);
        let cap = 64.0;
        let exit = self.chord_end(&zero, &d, cap)?;
        if exit >= cap {
            return Ok(None);
        }
        let (mut lo, mut hi) = (0.0, exit);
        let point = |t: f64| d.scale(C64::new(t, 0.0));
        for _ in 0..80 {
            let m = self.margin(&point(hi))?;
            if m > 0.0 && m <= band {
                return Ok(Some(point(hi)));
            }
            let mid = 0.5 * (lo + hi);
            if self.margin(&point(mid))? > band {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(None)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EquivReport {
    pub samples: usize,
    pub disagreements: usize,
    pub max_disagreement_margin: f64,
    pub passed: bool,
}

/// Compares membership in the disc-pencil LMI domain with `‖X − I‖ < √2`
/// on random scalar and matrix samples (n ≤ 4).
pub fn scalar_lmi_equiv_check(n_samples: usize, seed: u64, exec: Exec) -> Result<EquivReport> {
    let dom = Domain::disc_example();
    let rows = par::map_trials(exec, n_samples, |i| -> Result<(bool, f64)> {
        let mut rng = par::trial_rng(seed, i as u64);
        let n = if i % 2 == 0 { 1 } else { rng.random_range(2..=4) };
        let g = linalg::random_matrix(&mut rng, n, n);
        let radius = rng.random_range(0.0..2.5);
        let x = linalg::eye(n) + &g * C64::new(radius / linalg::op_norm(&g).max(1e-300), 0.0);
        let xt = MatrixTuple::new(vec![x.clone()])?;
        let lmi = dom.contains(&xt)?;
        let dist = linalg::op_norm(&(x - linalg::eye(n)));
        let norm_margin = 2.0 - dist * dist;
        let norm_member = norm_margin > lmi.tol;
        let decisive = lmi.margin.abs() > lmi.tol && norm_margin.abs() > lmi.tol;
        let disagree = decisive && (lmi.is_member() != norm_member);
        Ok((disagree, if disagree { lmi.margin.abs().max(norm_margin.abs()) } else { 0.0 }))
    });
    let mut disagreements = 0;
    let mut worst: f64 = 0.0;
    for r in rows {
        let (d, m) = r?;
        if d {
            disagreements += 1;
            worst = worst.max(m);
        }
    }
    Ok(EquivReport { samples: n_samples, disagreements, max_disagreement_margin: worst, passed: disagreements == 0 })
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum BoundednessVerdict {
    Violated { witness: MatrixTuple, row_norm: f64 },
    NoViolationFound { samples: usize },
}

/// Hit-and-run sampling of members from 0 looking for `Σ X_j X_j* ⊀ C²`.
/// One chain per size `n = 1..=max_n`. A probe, not a proof.
pub fn boundedness_probe(
    domain: &Domain,
    bound: f64,
    trials: usize,
    max_n: usize,
    seed: u64,
    exec: Exec,
) -> Result<BoundednessVerdict> {
    if !(bound > 0.0) {
        return Err(Error::Invalid(format!("bound must be positive, got {bound}")));
    }
    let max_n = max_n.max(1);
    let steps = trials.div_ceil(max_n);
    let chains = par::map_trials(exec, max_n, |c| -> Result<Option<(MatrixTuple, f64)>> {
        let n = c + 1;
        let mut rng = par::trial_rng(seed, c as u64);
        let mut x = MatrixTuple::zeros(domain.g(), n);
        let violates = |y: &MatrixTuple| y.row_norm() >= bound;
        for _ in 0..steps {
            let d = domain.random_direction(&mut rng, n);
            let d = d.scale(C64::new(1.0 / d.max_norm().max(1e-300), 0.0));
            let reach = 2.0 * bound + x.max_norm();
            let fwd = domain.chord_end(&x, &d, reach)?;
            let bwd = domain.chord_end(&x, &d.scale(C64::new(-1.0, 0.0)), reach)?;
            for t in [fwd * (1.0 - 1e-9), -bwd * (1.0 - 1e-9)] {
                let y = x.add(&d.scale(C64::new(t, 0.0)))?;
                if violates(&y) && domain.is_member(&y) {
                    let r = y.row_norm();
                    return Ok(Some((y, r)));
                }
            }
            let t = rng.random_range(-bwd..=fwd.max(-bwd));
            let y = x.add(&d.scale(C64::new(t, 0.0)))?;
            if domain.is_member(&y) {
                x = y;
            }
        }
        Ok(None)
    });
    for ch in chains {
        if let Some((witness, row_norm)) = ch? {
            return Ok(BoundednessVerdict::Violated { witness, row_norm });
        }
    }
    Ok(BoundednessVerdict::NoViolationFound { samples: steps * max_n })
}

#[derive(Debug, Clone, Serialize)]
pub struct ClosureFailure {
    pub trial: usize,
    pub kind: &'static str,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClosureReport {
    pub trials: usize,
    pub max_unitary_margin_drift: f64,
    pub max_direct_sum_margin_drift: f64,
    pub failures: Vec<ClosureFailure>,
    pub passed: bool,
}

/// For random members X, Y and Haar unitaries U: `U*XU` and `X ⊕ Y` must be
/// members, with margins invariant under conjugation and `margin(X⊕Y) =
/// min(margin X, margin Y)`.
pub fn closure_properties_test(domain: &Domain, trials: usize, seed: u64, exec: Exec) -> Result<ClosureReport> {
    let rows = par::map_trials(exec, trials, |i| -> Result<(f64, f64, Vec<ClosureFailure>)> {
        let mut rng = par::trial_rng(seed, i as u64);
        let (n1, n2) = (rng.random_range(1..=3), rng.random_range(1..=3));
        let x = domain.sample_member(&mut rng, n1)?;
        let y = domain.sample_member(&mut rng, n2)?;
        let u = linalg::random_unitary(&mut rng, n1);
        let mut fails = Vec::new();
        let mx = domain.margin(&x)?;
        let my = domain.margin(&y)?;
        let ux = x.unitary_conj(&u)?;
        let conj = domain.contains(&ux)?;
        if !conj.is_member() {
            fails.push(ClosureFailure { trial: i, kind: "unitary", detail: format!("margin {:.3e}", conj.margin) });
        }
        let sum = domain.contains(&x.direct_sum(&y)?)?;
        if !sum.is_member() {
            fails.push(ClosureFailure { trial: i, kind: "direct-sum", detail: format!("margin {:.3e}", sum.margin) });
        }
        let (du, ds) = if mx.is_finite() {
            ((conj.margin - mx).abs(), (sum.margin - mx.min(my)).abs())
        } else {
            (0.0, 0.0)
        };
        let scale = 1.0 + mx.abs().max(my.abs());
        if du > 1e-10 * scale {
            fails.push(ClosureFailure { trial: i, kind: "unitary-margin", detail: format!("drift {du:.3e}") });
        }
        if ds > 1e-10 * scale {
            fails.push(ClosureFailure { trial: i, kind: "direct-sum-margin", detail: format!("drift {ds:.3e}") });
        }
        Ok((du, ds, fails))
    });
    let mut report = ClosureReport {
        trials,
        max_unitary_margin_drift: 0.0,
        max_direct_sum_margin_drift: 0.0,
        failures: Vec::new(),
        passed: true,
    };
    for r in rows {
        let (du, ds, f) = r?;
        report.max_unitary_margin_drift = report.max_unitary_margin_drift.max(du);
        report.max_direct_sum_margin_drift = report.max_direct_sum_margin_drift.max(ds);
        report.failures.extend(f);
    }
    report.passed = report.failures.is_empty();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;

    fn scalar(x: f64) -> MatrixTuple {
        MatrixTuple::scalar(c(x, 0.0))
    }

    #[test]
    fn origin_is_interior_of_monic_domain() {
        let d = Domain::lmi(LinearPencil::cube(2)).unwrap();
        let m = d.contains(&MatrixTuple::zeros(2, 3)).unwrap();
        assert_eq!(m.status, Status::Member);
        assert!((m.margin - 1.0).abs() < 1e-15);
    }

    #[test]
    fn disc_boundary_point() {
        let d = Domain::disc_example();
        let m = d.contains(&scalar(1.0 + 2f64.sqrt())).unwrap();
        assert_eq!(m.status, Status::Boundary, "{m:?}");
        assert_eq!(d.contains(&scalar(0.0)).unwrap().status, Status::Member);
        assert_eq!(d.contains(&scalar(1.0)).unwrap().status, Status::Member);
        assert_eq!(d.contains(&scalar(-1.0)).unwrap().status, Status::NonMember);
    }

    #[test]
    fn disc_determinant_identity() {
        // det 𝓛(x) = 2 − |x − 1|² for scalar x
        for &(re, im) in &[(0.3, 0.1), (-0.2, 1.1), (2.0, -0.5), (1.0, 1.0)] {
            let x = c(re, im);
            let m = LinearPencil::disc_example().eval(&MatrixTuple::scalar(x)).unwrap().matrix;
            let det = m.determinant().re;
            assert!((det - (2.0 - (x - 1.0).norm_sqr())).abs() < 1e-12);
        }
    }

    #[test]
    fn nbhd_excludes_its_radius() {
        let d = Domain::Nbhd(EpsNeighborhood::new(1, 0.5).unwrap());
        let m = d.contains(&scalar(0.5)).unwrap();
        assert_ne!(m.status, Status::Member);
        assert!(d.contains(&scalar(0.49)).unwrap().is_member());
        assert!(EpsNeighborhood::new(1, 0.0).is_err());
    }

    #[test]
    fn semialg_requires_vanishing_constant() {
        let p = FreePoly::scalar(1, c(1.0, 0.0));
        assert!(SemialgDomain::new(p).is_err());
    }

    #[test]
    fn semialg_segment_rule_cuts_other_components() {
        let p = crate::ncalg::parse_poly("-x^2 + 0.5x^4", None).unwrap();
        let dom = Domain::Semialg(SemialgDomain::new(p.scale(c(0.5, 0.0))).unwrap());
        // 1 − x² + 0.5x⁴ > 0 everywhere, so the only component is everything.
        assert!(dom.is_member(&scalar(3.0)));
        let q = crate::ncalg::parse_poly("-x^2 + 0.2x^4", None).unwrap();
        let dom2 = Domain::Semialg(SemialgDomain::new(q).unwrap());
        // 1 − 2x² + 0.4x⁴ vanishes near 0.74 and 2.14; x = 3 is positive but
        // not in the component of the origin.
        let raw = linalg::min_eig(&dom2.defining_matrix(&scalar(3.0)).unwrap().unwrap());
        assert!(raw > 0.0);
        assert!(!dom2.is_member(&scalar(3.0)));
        assert!(dom2.is_member(&scalar(0.5)));
    }

    #[test]
    fn monic_domain_rejects_non_hermitian_input() {
        let d = Domain::lmi(LinearPencil::cube(1)).unwrap();
        let x = MatrixTuple::scalar(c(0.1, 0.2));
        assert!(d.contains(&x).is_err());
        assert!(matches!(d.contains(&MatrixTuple::zeros(2, 1)), Err(Error::Arity { .. })));
    }

    #[test]
    fn equivalence_on_disc() {
        let r = scalar_lmi_equiv_check(400, 11, Exec::Parallel).unwrap();
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn boundedness_examples() {
        let nb = Domain::Nbhd(EpsNeighborhood::new(2, 0.7).unwrap());
        let v = boundedness_probe(&nb, 0.7, 60, 3, 1, Exec::Sequential).unwrap();
        assert!(matches!(v, BoundednessVerdict::NoViolationFound { .. }), "{v:?}");

        let disc = Domain::disc_example();
        let v = boundedness_probe(&disc, 1.0 + 2f64.sqrt() + 0.1, 60, 1, 2, Exec::Sequential).unwrap();
        assert!(matches!(v, BoundednessVerdict::NoViolationFound { .. }), "{v:?}");

        let half_line = Domain::lmi(LinearPencil::monic(vec![linalg::eye(1)]).unwrap()).unwrap();
        match boundedness_probe(&half_line, 5.0, 40, 2, 3, Exec::Sequential).unwrap() {
            BoundednessVerdict::Violated { witness, row_norm } => {
                assert!(half_line.is_member(&witness));
                assert!(row_norm >= 5.0);
            }
            other => panic!("expected violation, got {other:?}"),
        }
    }

    #[test]
    fn closure_for_each_kind() {
        let zero = Domain::lmi(LinearPencil::cube(2)).unwrap();
        let z = MatrixTuple::zeros(2, 1);
        assert!(zero.is_member(&z.direct_sum(&z).unwrap()));
        for dom in [
            Domain::Nbhd(EpsNeighborhood::new(2, 0.4).unwrap()),
            Domain::disc_example(),
            Domain::lmi(LinearPencil::cube(2)).unwrap(),
        ] {
            let r = closure_properties_test(&dom, 30, 4, Exec::Parallel).unwrap();
            assert!(r.passed, "{} {:?}", dom.kind(), r.failures);
        }
    }

    #[test]
    fn near_boundary_samples_have_small_margin() {
        let dom = Domain::disc_example();
        let mut rng = par::trial_rng(8, 0);
        let x = dom.sample_near_boundary(&mut rng, 2, 1e-4).unwrap().unwrap();
        let m = dom.margin(&x).unwrap();
        assert!(m > 0.0 && m <= 1e-4);
    }

    #[test]
    fn json_descriptor() {
        let d: Domain = serde_json::from_str(r#"{"kind": "nbhd", "payload": {"g": 2, "eps": 0.5}}"#).unwrap();
        assert_eq!(d.g(), 2);
        let l: Domain = serde_json::from_str(&serde_json::to_string(&Domain::disc_example()).unwrap()).unwrap();
        assert_eq!(l, Domain::disc_example());
    }
}
