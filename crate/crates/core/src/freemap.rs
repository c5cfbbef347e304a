//! Black-box free maps and numerical checks of the free-map axioms.
//!
//! A [`FreeMapHandle`] is a size-agnostic evaluator `X ↦ f(X)` on a
//! [`Domain`]. The checkers sample random members (seeded, one ChaCha stream
//! per trial) and report the largest residual together with the witnessing
//! sample.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, cis, CMat, C64};
use crate::ncalg::{FreePoly, MatrixTuple};
use crate::ncdomain::Domain;
use crate::par::{self, Exec};

pub type Evaluator = dyn Fn(&MatrixTuple) -> Result<MatrixTuple> + Send + Sync;

#[derive(Clone)]
pub struct FreeMapHandle {
    name: String,
    g: usize,
    gt: usize,
    domain: Domain,
    eval: Arc<Evaluator>,
    concurrent: bool,
}

impl fmt::Debug for FreeMapHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FreeMapHandle")
            .field("name", &self.name)
            .field("g", &self.g)
            .field("gt", &self.gt)
            .field("domain", &self.domain.kind())
            .finish()
    }
}

/// Resolvents with condition number above this are treated as singular.
pub const SINGULAR_COND: f64 = 1e12;

impl FreeMapHandle {
    /// Wraps an evaluator. Handles are sequential-only unless marked with
    /// [`FreeMapHandle::concurrent`].
    pub fn new(
        name: impl Into<String>,
        g: usize,
        gt: usize,
        domain: Domain,
        eval: impl Fn(&MatrixTuple) -> Result<MatrixTuple> + Send + Sync + 'static,
    ) -> Result<Self> {
        if domain.g() != g {
            return Err(Error::Arity { expected: g, found: domain.g() });
        }
        Ok(FreeMapHandle { name: name.into(), g, gt, domain, eval: Arc::new(eval), concurrent: false })
    }

    /// The same evaluator restricted to (or extended to) another domain.
    pub fn with_domain(mut self, domain: Domain) -> Result<Self> {
        if domain.g() != self.g {
            return Err(Error::Arity { expected: self.g, found: domain.g() });
        }
        self.domain = domain;
        Ok(self)
    }

    pub fn concurrent(mut self, yes: bool) -> Self {
        self.concurrent = yes;
        self
    }

    pub fn is_concurrent(&self) -> bool {
        self.concurrent
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn g(&self) -> usize {
        self.g
    }

    pub fn gt(&self) -> usize {
        self.gt
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    /// Evaluates without a domain check, validating output shape.
    pub fn eval(&self, x: &MatrixTuple) -> Result<MatrixTuple> {
        x.check_arity(self.g)?;
        let out = (self.eval)(x)?;
        if out.g() != self.gt || out.n() != x.n() {
            return Err(Error::Evaluator(format!(
                "{} returned {} matrices of size {}, expected {} of size {}",
                self.name,
                out.g(),
                out.n(),
                self.gt,
                x.n()
            )));
        }
        Ok(out)
    }

    /// Evaluates after checking `x` is a member of the domain.
    pub fn eval_in_domain(&self, x: &MatrixTuple) -> Result<MatrixTuple> {
        let m = self.domain.contains(x)?;
        if !m.is_member() {
            return Err(Error::OutsideDomain { margin: m.margin });
        }
        self.eval(x)
    }

    fn exec(&self, requested: Exec) -> Exec {
        if self.concurrent {
            requested
        } else {
            Exec::Sequential
        }
    }

    /// Parses `ftheta:<θ>`, `poly:<json>` or `identity[:g]`.
    pub fn from_name(spec: &str) -> Result<Self> {
        let (kind, arg) = spec.split_once(':').unwrap_or((spec, ""));
        match kind {
            "ftheta" => {
                let theta: f64 = arg.trim().parse().map_err(|_| Error::Invalid(format!("bad angle `{arg}`")))?;
                Ok(ftheta(theta))
            }
            "identity" => {
                let g = if arg.is_empty() {
                    1
                } else {
                    arg.trim().parse().map_err(|_| Error::Invalid(format!("bad arity `{arg}`")))?
                };
                Ok(identity(g))
            }
            "poly" => poly_map(serde_json::from_str(arg)?),
            other => Err(Error::Invalid(format!("unknown map `{other}` (expected ftheta:<θ>, poly:<json>, identity)"))),
        }
    }
}

/// `f_θ(X) = e^{iθ} X (I + X − e^{iθ} X)^{-1}` on the disc-pencil domain.
pub fn ftheta(theta: f64) -> FreeMapHandle {
    let a = cis(theta);
    FreeMapHandle::new(format!("ftheta:{theta}"), 1, 1, Domain::disc_example(), move |x: &MatrixTuple| {
        let xm = x.get(0);
        let n = x.n();
        let m = linalg::eye(n) + xm * (C64::new(1.0, 0.0) - a);
        let cond = linalg::cond(&m);
        if !(cond <= SINGULAR_COND) {
            return Err(Error::Singular { cond });
        }
        let z = m.lu().solve(xm).ok_or(Error::Singular { cond })?;
        MatrixTuple::new(vec![z * a])
    })
    .expect("arity matches")
    .concurrent(true)
}

pub fn identity(g: usize) -> FreeMapHandle {
    FreeMapHandle::new(format!("identity:{g}"), g, g, Domain::Entire { g }, |x: &MatrixTuple| Ok(x.clone()))
        .expect("arity matches")
        .concurrent(true)
}

/// The free polynomial map `X ↦ (p_1(X), …, p_g̃(X))` of a column-vector
/// polynomial with `g̃ × 1` coefficients.
pub fn poly_map(p: FreePoly) -> Result<FreeMapHandle> {
    if p.shape().1 != 1 {
        return Err(Error::Shape(format!("map polynomial needs column coefficients, got {:?}", p.shape())));
    }
    let (g, gt) = (p.g(), p.shape().0);
    let comps = p.components();
    Ok(FreeMapHandle::new(format!("poly:{p}"), g, gt, Domain::Entire { g }, move |x: &MatrixTuple| {
        MatrixTuple::new(comps.iter().map(|c| c.eval(x)).collect::<Result<_>>()?)
    })?
    .concurrent(true))
}

/// `outer ∘ inner` on the domain of `inner`.
pub fn compose(outer: &FreeMapHandle, inner: &FreeMapHandle) -> Result<FreeMapHandle> {
    if inner.gt != outer.g {
        return Err(Error::Arity { expected: outer.g, found: inner.gt });
    }
    let (o, i) = (outer.clone(), inner.clone());
    Ok(FreeMapHandle::new(format!("{}∘{}", outer.name, inner.name), inner.g, outer.gt, inner.domain.clone(), move |x: &MatrixTuple| {
        o.eval(&i.eval(x)?)
    })?
    .concurrent(outer.concurrent && inner.concurrent))
}

#[derive(Debug, Clone)]
pub struct CheckConfig {
    pub trials: usize,
    pub sizes: Vec<usize>,
    pub seed: u64,
    pub exec: Exec,
}

impl Default for CheckConfig {
    fn default() -> Self {
        CheckConfig { trials: 50, sizes: vec![1, 2, 3, 4], seed: 0, exec: Exec::Parallel }
    }
}

impl CheckConfig {
    fn size(&self, rng: &mut impl Rng) -> usize {
        if self.sizes.is_empty() {
            1
        } else {
            self.sizes[rng.random_range(0..self.sizes.len())]
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Witness {
    pub x: MatrixTuple,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y: Option<MatrixTuple>,
    pub residual: f64,
    pub tol: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub check: &'static str,
    pub map: String,
    pub trials: usize,
    pub rejected: usize,
    pub max_residual: f64,
    /// Largest residual/tolerance ratio; the check passes iff this is ≤ 1.
    pub worst_ratio: f64,
    pub passed: bool,
    /// The sample achieving `worst_ratio`.
    pub witness: Option<Witness>,
}

/// Scale-aware acceptance threshold `1e-8·(1 + ‖inputs‖)`.
pub fn check_tol(norm: f64) -> f64 {
    1e-8 * (1.0 + norm)
}

type Sample = Option<(f64, f64, MatrixTuple, Option<MatrixTuple>)>;

fn summarize(check: &'static str, f: &FreeMapHandle, rows: Vec<Result<Sample>>) -> Result<CheckReport> {
    let mut report = CheckReport {
        check,
        map: f.name.clone(),
        trials: rows.len(),
        rejected: 0,
        max_residual: 0.0,
        worst_ratio: 0.0,
        passed: true,
        witness: None,
    };
    for row in rows {
        match row? {
            None => report.rejected += 1,
            Some((residual, tol, x, y)) => {
                report.max_residual = report.max_residual.max(residual);
                let ratio = residual / tol;
                if report.witness.is_none() || ratio > report.worst_ratio {
                    report.worst_ratio = ratio;
                    report.witness = Some(Witness { x, y, residual, tol });
                }
            }
        }
    }
    report.passed = report.worst_ratio <= 1.0 && report.rejected < report.trials.max(1);
    Ok(report)
}

fn tuple_residual(a: &MatrixTuple, b: &MatrixTuple) -> Result<f64> {
    a.distance(b)
}

/// `max ‖f(X ⊕ Y) − f(X) ⊕ f(Y)‖` over random members.
pub fn check_direct_sums(f: &FreeMapHandle, cfg: &CheckConfig) -> Result<CheckReport> {
    let rows = par::map_trials(f.exec(cfg.exec), cfg.trials, |i| -> Result<Sample> {
        let mut rng = par::trial_rng(cfg.seed, i as u64);
        let dom = f.domain();
        let n_x = cfg.size(&mut rng);
        let x = dom.sample_member(&mut rng, n_x)?;
        let n_y = cfg.size(&mut rng);
        let y = dom.sample_member(&mut rng, n_y)?;
        let s = x.direct_sum(&y)?;
        if !dom.is_member(&s) {
            return Ok(None);
        }
        let lhs = f.eval(&s)?;
        let rhs = f.eval(&x)?.direct_sum(&f.eval(&y)?)?;
        let tol = check_tol(x.max_norm().max(y.max_norm()));
        Ok(Some((tuple_residual(&lhs, &rhs)?, tol, x, Some(y))))
    });
    summarize("direct-sums", f, rows)
}

/// Intertwining: with `XΓ = ΓY`, `‖f(X)Γ − Γf(Y)‖` for invertible square
/// `Γ` (condition ≤ 10, `Y = Γ⁻¹XΓ`) on even trials and for the inclusion
/// `Γ: C^n → C^{n+m}` against `X ⊕ Z` on odd trials.
pub fn check_intertwining(f: &FreeMapHandle, cfg: &CheckConfig) -> Result<CheckReport> {
    let rows = par::map_trials(f.exec(cfg.exec), cfg.trials, |i| -> Result<Sample> {
        let mut rng = par::trial_rng(cfg.seed, i as u64);
        let dom = f.domain();
        let n = cfg.size(&mut rng);
        let x = dom.sample_member(&mut rng, n)?;
        if i % 2 == 1 {
            let n_z = cfg.size(&mut rng);
        let z = dom.sample_member(&mut rng, n_z)?;
            let big = x.direct_sum(&z)?;
            if !dom.is_member(&big) {
                return Ok(None);
            }
            let m = big.n();
            let gamma = CMat::from_fn(m, n, |r, c| if r == c { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) });
            let fb = f.eval(&big)?;
            let fx = f.eval(&x)?;
            let residual = fb.mats().iter().zip(fx.mats()).map(|(a, b)| (a * &gamma - &gamma * b).norm()).fold(0.0, f64::max);
            return Ok(Some((residual, check_tol(big.max_norm()), x, Some(z))));
        }
        if dom.hermitian_variables() {
            // similarities must stay Hermitian: use unitaries
            let u = linalg::random_unitary(&mut rng, n);
            let y = x.unitary_conj(&u)?;
            let (fx, fy) = (f.eval(&x)?, f.eval(&y)?);
            let residual = fx.mats().iter().zip(fy.mats()).map(|(a, b)| (a * &u - &u * b).norm()).fold(0.0, f64::max);
            return Ok(Some((residual, check_tol(x.max_norm() + y.max_norm()), x, Some(y))));
        }
        for _ in 0..10 {
            let gamma = linalg::random_well_conditioned(&mut rng, n, 10.0) * C64::new(0.1, 0.0);
            let Some(inv) = gamma.clone().try_inverse() else { continue };
            let y = x.similarity(&gamma, &inv);
            if !dom.is_member(&y) {
                continue;
            }
            let (fx, fy) = (f.eval(&x)?, f.eval(&y)?);
            let residual =
                fx.mats().iter().zip(fy.mats()).map(|(a, b)| (a * &gamma - &gamma * b).norm()).fold(0.0, f64::max);
            return Ok(Some((residual, check_tol(x.max_norm() + y.max_norm()), x, Some(y))));
        }
        Ok(None)
    });
    summarize("intertwining", f, rows)
}

#[derive(Debug, Clone, Serialize)]
pub struct Derivative {
    pub value: MatrixTuple,
    /// Scaling applied to `H` so the block point lies in the domain.
    pub t: f64,
}

fn block_point(x: &MatrixTuple, h: &MatrixTuple, t: f64) -> Result<MatrixTuple> {
    let n = x.n();
    let mats = x
        .mats()
        .iter()
        .zip(h.mats())
        .map(|(xj, hj)| {
            let mut b = linalg::zeros(2 * n, 2 * n);
            b.view_mut((0, 0), (n, n)).copy_from(xj);
            b.view_mut((n, n), (n, n)).copy_from(xj);
            b.view_mut((0, n), (n, n)).copy_from(&(hj * C64::new(t, 0.0)));
            b
        })
        .collect();
    MatrixTuple::new(mats)
}

/// `f′(X)[H]` read off the (1,2) block of `f([[X, tH], [0, X]])`, divided by
/// `t`. `t` starts at 1 and halves until the block point is a member.
pub fn block_derivative(f: &FreeMapHandle, x: &MatrixTuple, h: &MatrixTuple) -> Result<Derivative> {
    x.check_arity(f.g)?;
    h.check_arity(f.g)?;
    if h.n() != x.n() {
        return Err(Error::Shape(format!("direction size {} differs from point size {}", h.n(), x.n())));
    }
    if f.domain.hermitian_variables() {
        return Err(Error::Invalid("block points are not Hermitian; use finite differences on monic domains".into()));
    }
    let n = x.n();
    let mut t = 1.0;
    for _ in 0..60 {
        let z = block_point(x, h, t)?;
        if f.domain.margin(&z)? > 0.0 {
            let fz = f.eval(&z)?;
            let inv_t = C64::new(1.0 / t, 0.0);
            let value = MatrixTuple::new(fz.mats().iter().map(|m| m.view((0, n), (n, n)) * inv_t).collect())?;
            return Ok(Derivative { value, t });
        }
        t *= 0.5;
    }
    Err(Error::NoAdmissibleScaling)
}

/// Richardson-extrapolated central difference `(4D(h/2) − D(h))/3` with
/// `D(h) = (f(X + hH) − f(X − hH))/2h`.
pub fn finite_difference(f: &FreeMapHandle, x: &MatrixTuple, dir: &MatrixTuple, h: f64) -> Result<MatrixTuple> {
    let central = |s: f64| -> Result<MatrixTuple> {
        let plus = f.eval(&x.add(&dir.scale(C64::new(s, 0.0)))?)?;
        let minus = f.eval(&x.sub(&dir.scale(C64::new(s, 0.0)))?)?;
        Ok(plus.sub(&minus)?.scale(C64::new(0.5 / s, 0.0)))
    };
    let coarse = central(h)?;
    let fine = central(h / 2.0)?;
    fine.scale(C64::new(4.0 / 3.0, 0.0)).sub(&coarse.scale(C64::new(1.0 / 3.0, 0.0)))
}

/// Block derivative against finite differences at random members and
/// directions; tolerance `1e-6·(1 + ‖f′‖)`.
pub fn check_derivative(f: &FreeMapHandle, cfg: &CheckConfig) -> Result<CheckReport> {
    let rows = par::map_trials(f.exec(cfg.exec), cfg.trials, |i| -> Result<Sample> {
        let mut rng = par::trial_rng(cfg.seed, i as u64);
        let dom = f.domain();
        let n = cfg.size(&mut rng);
        let x = dom.sample_member(&mut rng, n)?.scale(C64::new(0.9, 0.0));
        if dom.margin(&x)? < 1e-3 {
            return Ok(None);
        }
        let h = dom.random_direction(&mut rng, n);
        let bd = block_derivative(f, &x, &h)?;
        let fd = finite_difference(f, &x, &h, 1e-3 * dom.margin(&x)?.min(1.0))?;
        let residual = tuple_residual(&bd.value, &fd)?;
        let tol = 1e-6 * (1.0 + bd.value.max_norm());
        Ok(Some((residual, tol, x, Some(h))))
    });
    summarize("derivative", f, rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RotationVerdict {
    /// Residual within tolerance: consistent with a linear (circular) map.
    LinearWitness,
    /// Residual above tolerance: the map does not commute with rotations.
    NonCircularWitness,
}

#[derive(Debug, Clone, Serialize)]
pub struct RotationReport {
    pub check: CheckReport,
    pub verdict: RotationVerdict,
}

/// `max ‖f(e^{iφ}X) − e^{iφ}f(X)‖` over random members and angles; rotated
/// samples leaving the domain are rejected.
pub fn rotation_equivariance_residual(f: &FreeMapHandle, cfg: &CheckConfig) -> Result<RotationReport> {
    let rows = par::map_trials(f.exec(cfg.exec), cfg.trials, |i| -> Result<Sample> {
        let mut rng = par::trial_rng(cfg.seed, i as u64);
        let dom = f.domain();
        let n_x = cfg.size(&mut rng);
        let x = dom.sample_member(&mut rng, n_x)?;
        for _ in 0..10 {
            let phi = rng.random_range(0.0..2.0 * PI);
            let z = cis(phi);
            let xr = x.scale(z);
            if !dom.is_member(&xr) {
                continue;
            }
            let lhs = f.eval(&xr)?;
            let rhs = f.eval(&x)?.scale(z);
            return Ok(Some((tuple_residual(&lhs, &rhs)?, check_tol(x.max_norm()), x, None)));
        }
        Ok(None)
    });
    let check = summarize("rotation", f, rows)?;
    let verdict = if check.passed { RotationVerdict::LinearWitness } else { RotationVerdict::NonCircularWitness };
    Ok(RotationReport { check, verdict })
}

#[derive(Debug, Clone, Serialize)]
pub struct ProperReport {
    pub boundary_samples: usize,
    pub max_domain_margin: f64,
    /// Largest codomain margin among images of near-boundary points; tends to
    /// 0 for proper maps.
    pub max_image_margin: f64,
    pub min_image_margin: f64,
    /// `max |margin_codomain(f(X)) − margin_domain(X)|` over all samples.
    pub max_margin_change: f64,
    pub pairs: usize,
    pub injectivity_violations: usize,
    pub injectivity_witness: Option<(MatrixTuple, MatrixTuple)>,
}

/// Images of near-boundary members should approach the codomain boundary;
/// distinct interior members should have distinct images.
pub fn properness_probe(
    f: &FreeMapHandle,
    codomain: &Domain,
    boundary_eps: f64,
    trials: usize,
    sizes: &[usize],
    seed: u64,
    exec: Exec,
) -> Result<ProperReport> {
    let cfg = CheckConfig { trials, sizes: sizes.to_vec(), seed, exec };
    type Row = (Option<(f64, f64)>, f64, bool, Option<(MatrixTuple, MatrixTuple)>);
    let rows = par::map_trials(f.exec(exec), trials, |i| -> Result<Row> {
        let mut rng = par::trial_rng(seed, i as u64);
        let dom = f.domain();
        let n = cfg.size(&mut rng);
        let boundary = match dom.sample_near_boundary(&mut rng, n, boundary_eps)? {
            Some(b) => {
                let im = codomain.margin(&f.eval(&b)?)?;
                Some((dom.margin(&b)?, im))
            }
            None => None,
        };
        let x = dom.sample_member(&mut rng, n)?;
        let y = dom.sample_member(&mut rng, n)?;
        let (fx, fy) = (f.eval(&x)?, f.eval(&y)?);
        let change = (codomain.margin(&fx)? - dom.margin(&x)?).abs();
        let collide = x.distance(&y)? > 1e-6 && fx.distance(&fy)? < 1e-10;
        let witness = collide.then(|| (x.clone(), y.clone()));
        Ok((boundary, change, collide, witness))
    });
    let mut rep = ProperReport {
        boundary_samples: 0,
        max_domain_margin: 0.0,
        max_image_margin: f64::NEG_INFINITY,
        min_image_margin: f64::INFINITY,
        max_margin_change: 0.0,
        pairs: trials,
        injectivity_violations: 0,
        injectivity_witness: None,
    };
    for row in rows {
        let (b, change, collide, w) = row?;
        if let Some((dm, im)) = b {
            rep.boundary_samples += 1;
            rep.max_domain_margin = rep.max_domain_margin.max(dm);
            rep.max_image_margin = rep.max_image_margin.max(im);
            rep.min_image_margin = rep.min_image_margin.min(im);
        }
        if change.is_finite() {
            rep.max_margin_change = rep.max_margin_change.max(change);
        }
        if collide {
            rep.injectivity_violations += 1;
            if rep.injectivity_witness.is_none() {
                rep.injectivity_witness = w;
            }
        }
    }
    Ok(rep)
}
