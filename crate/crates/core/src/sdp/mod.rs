//! Dense semidefinite feasibility and optimization over Hermitian PSD blocks.
//!
//! Problems are `⟨A_k, Z⟩ = b_k` with `⟨A, Z⟩ = Re tr(AZ)`, Hermitian data,
//! real right-hand sides and `Z = diag(Z_1, …, Z_B) ⪰ 0`. Feasibility is
//! decided in two phases:
//!
//! 1. an elastic problem `min w·tr Z + Σ|slack_k|` whose solution is polished
//!    by alternating affine and PSD projections; it is accepted when the
//!    equality residual is at most `1e-7(1 + ‖b‖)` with eigenvalue floor
//!    `-1e-8`;
//! 2. otherwise a Farkas search `max δ` over `Σ y_k A_k ⪯ −δI`, `b·y ≥ 0`,
//!    `‖y‖∞ ≤ 1`. `δ > 1e-7` proves infeasibility; smaller values are
//!    reported as marginal.
//!
//! Complex blocks go through the real embedding `[[Re, −Im], [Im, Re]]`;
//! blocks whose data is real are solved in real form directly.

mod ipm;
pub mod sdpa;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64};
use ipm::{Data, IpmStatus, Kind, RealSdp, Var};

pub const DEFAULT_DIM_CAP: usize = 400;

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub terms: Vec<(usize, CMat)>,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SdpProblem {
    blocks: Vec<usize>,
    constraints: Vec<Constraint>,
    objective: Option<Vec<(usize, CMat)>>,
    trace_weights: Option<Vec<f64>>,
}

fn herm_tol(a: &CMat) -> f64 {
    1e-12 * (1.0 + a.norm())
}

impl SdpProblem {
    pub fn new(blocks: Vec<usize>) -> Self {
        SdpProblem { blocks, constraints: Vec::new(), objective: None, trace_weights: None }
    }

    pub fn blocks(&self) -> &[usize] {
        &self.blocks
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn objective(&self) -> Option<&[(usize, CMat)]> {
        self.objective.as_deref()
    }

    pub fn dim(&self) -> usize {
        self.blocks.iter().sum()
    }

    fn check_terms(&self, terms: Vec<(usize, CMat)>) -> Result<Vec<(usize, CMat)>> {
        let mut out: Vec<(usize, CMat)> = Vec::new();
        for (b, a) in terms {
            let n = *self.blocks.get(b).ok_or_else(|| Error::Invalid(format!("block {b} does not exist")))?;
            if a.shape() != (n, n) {
                return Err(Error::Shape(format!("block {b} data is {:?}, expected {n}×{n}", a.shape())));
            }
            if linalg::asymmetry(&a) > herm_tol(&a) {
                return Err(Error::Invalid(format!("block {b} data is not Hermitian")));
            }
            let a = linalg::hermitian_part(&a);
            match out.iter_mut().find(|(ob, _)| *ob == b) {
                Some((_, acc)) => *acc += a,
                None => out.push((b, a)),
            }
        }
        out.retain(|(_, a)| a.iter().any(|z| z.re != 0.0 || z.im != 0.0));
        Ok(out)
    }

    /// Adds `Σ_b Re tr(A_b Z_b) = rhs` for Hermitian `A_b`.
    pub fn add_constraint(&mut self, terms: Vec<(usize, CMat)>, rhs: f64) -> Result<()> {
        if !rhs.is_finite() {
            return Err(Error::Invalid("non-finite right-hand side".into()));
        }
        let terms = self.check_terms(terms)?;
        self.constraints.push(Constraint { terms, rhs });
        Ok(())
    }

    /// Adds `Σ_b tr(K_b Z_b) = rhs` for arbitrary square `K_b` as its real
    /// and imaginary parts. Parts with zero data and zero right-hand side are
    /// dropped.
    pub fn add_complex_constraint(&mut self, terms: Vec<(usize, CMat)>, rhs: C64) -> Result<()> {
        let half = C64::new(0.5, 0.0);
        let mi = C64::new(0.0, -0.5);
        let re: Vec<_> = terms.iter().map(|(b, k)| (*b, (k + k.adjoint()) * half)).collect();
        let im: Vec<_> = terms.iter().map(|(b, k)| (*b, (k - k.adjoint()) * mi)).collect();
        for (part, r) in [(re, rhs.re), (im, rhs.im)] {
            let part = self.check_terms(part)?;
            if !part.is_empty() || r != 0.0 {
                self.constraints.push(Constraint { terms: part, rhs: r });
            }
        }
        Ok(())
    }

    /// Relative weights of `tr Z_b` in the feasibility phase; blocks with
    /// larger weight are used only when needed.
    pub fn set_trace_weights(&mut self, w: Vec<f64>) -> Result<()> {
        if w.len() != self.blocks.len() || w.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::Invalid("trace weights must be positive, one per block".into()));
        }
        self.trace_weights = Some(w);
        Ok(())
    }

    pub fn set_objective(&mut self, terms: Vec<(usize, CMat)>) -> Result<()> {
        self.objective = Some(self.check_terms(terms)?);
        Ok(())
    }

    /// `⟨A_k, Z⟩ − b_k` for every constraint.
    pub fn residual(&self, z: &[CMat]) -> Result<Vec<f64>> {
        self.check_point(z)?;
        Ok(self
            .constraints
            .iter()
            .map(|c| c.terms.iter().map(|(b, a)| inner(a, &z[*b])).sum::<f64>() - c.rhs)
            .collect())
    }

    /// Nearest point to `z` (Frobenius norm) on the affine constraint set.
    /// Positivity is not enforced.
    pub fn project(&self, z: &[CMat]) -> Result<Vec<CMat>> {
        self.check_point(z)?;
        Ok(self.apply_projector(&self.projector(), z))
    }

    /// Alternating projections between the affine constraint set and the
    /// PSD cone, starting from `z`. Returns the last PSD iterate.
    pub fn polish(&self, z: &[CMat], iters: usize) -> Result<Vec<CMat>> {
        self.check_point(z)?;
        let proj = self.projector();
        let mut cur = z.to_vec();
        for _ in 0..iters {
            cur = self.apply_projector(&proj, &cur).iter().map(linalg::psd_part).collect();
        }
        Ok(cur)
    }

    fn projector(&self) -> nalgebra::SVD<f64, nalgebra::Dyn, nalgebra::Dyn> {
        let m = self.constraints.len();
        let mut gram = DMatrix::<f64>::zeros(m, m);
        for (k, ck) in self.constraints.iter().enumerate() {
            for (l, cl) in self.constraints.iter().enumerate().skip(k) {
                let v: f64 = ck
                    .terms
                    .iter()
                    .flat_map(|(bk, ak)| cl.terms.iter().filter(move |(bl, _)| bl == bk).map(move |(_, al)| inner(ak, al)))
                    .sum();
                gram[(k, l)] = v;
                gram[(l, k)] = v;
            }
        }
        gram.svd(true, true)
    }

    fn apply_projector(&self, svd: &nalgebra::SVD<f64, nalgebra::Dyn, nalgebra::Dyn>, z: &[CMat]) -> Vec<CMat> {
        let r = self.residual(z).expect("shape checked by caller");
        let rhs = DVector::from_iterator(r.len(), r.iter().map(|v| -v));
        let eps = 1e-13 * svd.singular_values.amax().max(1.0);
        let y = svd.solve(&rhs, eps).expect("both factors were computed");
        let mut out = z.to_vec();
        for (c, yk) in self.constraints.iter().zip(y.iter()) {
            for (b, a) in &c.terms {
                out[*b] += a * C64::new(*yk, 0.0);
            }
        }
        out
    }

    pub fn objective_value(&self, z: &[CMat]) -> Option<f64> {
        self.objective.as_ref().map(|o| o.iter().map(|(b, a)| inner(a, &z[*b])).sum())
    }

    fn check_point(&self, z: &[CMat]) -> Result<()> {
        if z.len() != self.blocks.len() || z.iter().zip(&self.blocks).any(|(m, &n)| m.shape() != (n, n)) {
            return Err(Error::Shape("point does not match block structure".into()));
        }
        Ok(())
    }

    fn rhs_norm(&self) -> f64 {
        self.constraints.iter().map(|c| c.rhs * c.rhs).sum::<f64>().sqrt()
    }

    fn block_is_real(&self, b: usize) -> bool {
        let real = |a: &CMat| a.iter().all(|z| z.im == 0.0);
        self.constraints.iter().flat_map(|c| &c.terms).chain(self.objective.iter().flatten()).filter(|(bb, _)| *bb == b).all(|(_, a)| real(a))
    }
}

/// `Re tr(AZ)`.
pub fn inner(a: &CMat, z: &CMat) -> f64 {
    a.iter().zip(z.transpose().iter()).map(|(x, y)| (x * y).re).sum()
}

/// Real-form layout of one Hermitian block.
#[derive(Debug, Clone, Copy)]
struct Layout {
    n: usize,
    real: bool,
}

impl Layout {
    fn size(&self) -> usize {
        if self.real {
            self.n
        } else {
            2 * self.n
        }
    }

    /// Real data with `tr(Â Ẑ) = Re tr(AZ)`.
    fn data(&self, a: &CMat) -> DMatrix<f64> {
        if self.real {
            return a.map(|z| z.re);
        }
        let n = self.n;
        let mut m = DMatrix::zeros(2 * n, 2 * n);
        for i in 0..n {
            for j in 0..n {
                let z = a[(i, j)] * 0.5;
                m[(i, j)] = z.re;
                m[(n + i, n + j)] = z.re;
                m[(i, n + j)] = -z.im;
                m[(n + i, j)] = z.im;
            }
        }
        m
    }

    fn identity(&self) -> DMatrix<f64> {
        let s = if self.real { 1.0 } else { 0.5 };
        DMatrix::identity(self.size(), self.size()) * s
    }

    fn recover(&self, x: &DMatrix<f64>) -> CMat {
        if self.real {
            return x.map(|v| C64::new(v, 0.0));
        }
        let n = self.n;
        CMat::from_fn(n, n, |i, j| {
            C64::new(0.5 * (x[(i, j)] + x[(n + i, n + j)]), 0.5 * (x[(n + i, j)] - x[(i, n + j)]))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SdpStatus {
    Feasible,
    Infeasible,
    /// Neither feasibility nor a Farkas ray with margin above threshold.
    Marginal,
    MaxIterations,
    IllConditioned,
}

/// `y` with `Σ y_k A_k ⪯ −δI` and `b·y ≥ 0`, `δ > 0` (or `δ = 0` with
/// `b·y > 0` for exactly zero constraint rows).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FarkasCertificate {
    pub y: Vec<f64>,
    pub delta: f64,
    pub by: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FarkasCheck {
    pub delta: f64,
    pub by: f64,
    pub valid: bool,
}

impl FarkasCertificate {
    /// Recomputes `δ = −λmax(Σ y_k A_k)` and `b·y` from the problem data.
    pub fn check(&self, p: &SdpProblem) -> Result<FarkasCheck> {
        farkas_check(p, &self.y)
    }
}

pub fn farkas_check(p: &SdpProblem, y: &[f64]) -> Result<FarkasCheck> {
    if y.len() != p.constraints.len() {
        return Err(Error::Shape(format!("{} multipliers for {} constraints", y.len(), p.constraints.len())));
    }
    let mut sums: Vec<CMat> = p.blocks.iter().map(|&n| linalg::zeros(n, n)).collect();
    for (c, yk) in p.constraints.iter().zip(y) {
        for (b, a) in &c.terms {
            sums[*b] += a * C64::new(*yk, 0.0);
        }
    }
    let lmax = sums.iter().filter(|m| m.nrows() > 0).map(linalg::max_eig).fold(f64::NEG_INFINITY, f64::max);
    let delta = if lmax.is_finite() { -lmax } else { 0.0 };
    let by: f64 = p.constraints.iter().zip(y).map(|(c, yk)| c.rhs * yk).sum();
    let valid = (delta > 0.0 && by >= 0.0) || (delta >= 0.0 && by > 0.0);
    Ok(FarkasCheck { delta, by, valid })
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Residuals {
    /// `‖A(Z) − b‖₂` of the returned point.
    pub primal: f64,
    pub min_eig: f64,
    /// Elastic slack `Σ|u_k − v_k|` left by phase 1.
    pub elastic: f64,
    pub dual: f64,
    pub gap: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub objective: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SdpSolution {
    pub status: SdpStatus,
    #[serde(with = "crate::ncalg::json::matrices")]
    pub z: Vec<CMat>,
    pub certificate: Option<FarkasCertificate>,
    pub residuals: Residuals,
    pub iterations: usize,
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub max_iter: usize,
    pub tol: f64,
    pub dim_cap: usize,
    /// Feasible/infeasible decision margin.
    pub margin: f64,
    /// Weight of `tr Z` in the elastic phase.
    pub trace_weight: f64,
    /// Elastic penalty when an objective is present.
    pub penalty: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { max_iter: 150, tol: 1e-10, dim_cap: DEFAULT_DIM_CAP, margin: 1e-7, trace_weight: 1e-5, penalty: 1e4 }
    }
}

pub fn solve(p: &SdpProblem, opts: &SolveOptions) -> Result<SdpSolution> {
    let dim = p.dim();
    if dim > opts.dim_cap {
        return Err(Error::ResourceCap { what: "SDP dimension", size: dim, cap: opts.dim_cap });
    }
    let zero_z: Vec<CMat> = p.blocks.iter().map(|&n| linalg::zeros(n, n)).collect();
    // an empty row with nonzero rhs is infeasible on its face
    if let Some(k) = p.constraints.iter().position(|c| c.terms.is_empty() && c.rhs != 0.0) {
        let mut y = vec![0.0; p.constraints.len()];
        y[k] = p.constraints[k].rhs.signum();
        let chk = farkas_check(p, &y)?;
        return Ok(SdpSolution {
            status: SdpStatus::Infeasible,
            z: zero_z,
            certificate: Some(FarkasCertificate { y, delta: chk.delta, by: chk.by }),
            residuals: Residuals::default(),
            iterations: 0,
        });
    }
    let layout: Vec<Layout> = p.blocks.iter().enumerate().map(|(b, &n)| Layout { n, real: p.block_is_real(b) }).collect();
    let res_tol = opts.margin * (1.0 + p.rhs_norm());

    let (z, elastic, phase1) = phase_one(p, &layout, opts);
    let mut residuals = Residuals { elastic, dual: phase1.dual_res, gap: phase1.gap, ..Residuals::default() };
    let mut iterations = phase1.iterations;
    if let Some(z) = polish(p, z, res_tol) {
        let r = p.residual(&z)?;
        residuals.primal = norm2(&r);
        residuals.min_eig = z.iter().filter(|m| m.nrows() > 0).map(linalg::min_eig).fold(f64::INFINITY, f64::min);
        residuals.objective = p.objective_value(&z);
        return Ok(SdpSolution { status: SdpStatus::Feasible, z, certificate: None, residuals, iterations });
    }

    let (cert, phase2) = phase_two(p, &layout, opts)?;
    iterations += phase2.iterations;
    let status = match (&cert, phase1.status, phase2.status) {
        (Some(c), _, _) if c.delta > opts.margin => SdpStatus::Infeasible,
        (_, IpmStatus::IllConditioned, IpmStatus::IllConditioned) => SdpStatus::IllConditioned,
        (_, IpmStatus::MaxIterations, IpmStatus::MaxIterations) => SdpStatus::MaxIterations,
        _ => SdpStatus::Marginal,
    };
    let certificate = cert.filter(|_| status == SdpStatus::Infeasible);
    Ok(SdpSolution { status, z: zero_z, certificate, residuals, iterations })
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn user_rows(p: &SdpProblem, layout: &[Layout]) -> Vec<Vec<(usize, Data)>> {
    p.constraints.iter().map(|c| c.terms.iter().map(|(b, a)| (*b, Data::Dense(layout[*b].data(a)))).collect()).collect()
}

fn phase_one(p: &SdpProblem, layout: &[Layout], opts: &SolveOptions) -> (Vec<CMat>, f64, ipm::IpmOutcome) {
    let m = p.constraints.len();
    let nb = layout.len();
    let mut blocks: Vec<(usize, Kind)> = layout.iter().map(|l| (l.size(), Kind::Dense)).collect();
    blocks.push((2 * m, Kind::Diag));
    let mut a = user_rows(p, layout);
    for (k, row) in a.iter_mut().enumerate() {
        row.push((nb, Data::Diag(vec![(k, 1.0), (m + k, -1.0)])));
    }
    let (mut c, penalty): (Vec<Option<Data>>, f64) = match &p.objective {
        Some(obj) => {
            let mut c = vec![None; nb];
            for (b, m) in obj {
                c[*b] = Some(Data::Dense(layout[*b].data(m)));
            }
            (c, opts.penalty)
        }
        None => (
            layout
                .iter()
                .enumerate()
                .map(|(b, l)| {
                    let w = p.trace_weights.as_ref().map_or(1.0, |t| t[b]);
                    Some(Data::Dense(l.identity() * (w * opts.trace_weight)))
                })
                .collect(),
            1.0,
        ),
    };
    c.push(Some(Data::Diag((0..2 * m).map(|i| (i, penalty)).collect())));
    let b = DVector::from_iterator(m, p.constraints.iter().map(|c| c.rhs));
    let real = RealSdp { blocks, a, b, c };
    let out = ipm::solve(&real, opts.max_iter, opts.tol);
    let z = layout
        .iter()
        .zip(&out.x)
        .map(|(l, x)| match x {
            Var::Dense(x) => l.recover(x),
            Var::Diag(_) => unreachable!(),
        })
        .collect();
    let elastic = match &out.x[nb] {
        Var::Diag(uv) => (0..m).map(|k| (uv[k] - uv[m + k]).abs()).sum(),
        Var::Dense(_) => unreachable!(),
    };
    (z, elastic, out)
}

/// Alternating projections onto `{A(Z) = b}` and the PSD cone.
fn polish(p: &SdpProblem, mut z: Vec<CMat>, res_tol: f64) -> Option<Vec<CMat>> {
    let m = p.constraints.len();
    let floor = -1e-8;
    let ok_eig = |z: &[CMat]| z.iter().filter(|b| b.nrows() > 0).all(|b| linalg::min_eig(b) >= floor);
    if m == 0 {
        return ok_eig(&z).then_some(z);
    }
    let mut gram = DMatrix::<f64>::zeros(m, m);
    for k in 0..m {
        for l in 0..=k {
            let v: f64 = p.constraints[k]
                .terms
                .iter()
                .map(|(b, a)| p.constraints[l].terms.iter().filter(|(bl, _)| bl == b).map(|(_, al)| inner(a, al)).sum::<f64>())
                .sum();
            gram[(k, l)] = v;
            gram[(l, k)] = v;
        }
    }
    let eig = SymmetricEigen::new(gram);
    let cut = 1e-12 * eig.eigenvalues.amax().max(1e-300);
    let pinv = |r: &DVector<f64>| -> DVector<f64> {
        let coords = eig.eigenvectors.transpose() * r;
        let scaled = DVector::from_iterator(m, coords.iter().zip(eig.eigenvalues.iter()).map(|(c, l)| if *l > cut { c / l } else { 0.0 }));
        &eig.eigenvectors * scaled
    };
    for _ in 0..60 {
        let r = DVector::from_vec(p.residual(&z).ok()?);
        let corr = pinv(&r);
        for (c, ck) in p.constraints.iter().zip(corr.iter()) {
            for (b, a) in &c.terms {
                z[*b] -= a * C64::new(*ck, 0.0);
            }
        }
        let r = p.residual(&z).ok()?;
        if norm2(&r) <= res_tol && ok_eig(&z) {
            return Some(z);
        }
        z = z.iter().map(|b| if b.nrows() > 0 { linalg::psd_project(b) } else { b.clone() }).collect();
        if norm2(&p.residual(&z).ok()?) <= res_tol {
            return Some(z);
        }
    }
    None
}

fn phase_two(p: &SdpProblem, layout: &[Layout], opts: &SolveOptions) -> Result<(Option<FarkasCertificate>, ipm::IpmOutcome)> {
    let m = p.constraints.len();
    let nb = layout.len();
    // dual variables (y_1..y_m, δ); LP slots: b·y ≥ 0, 1 − y_k, 1 + y_k, 1 − δ
    let lp = nb;
    let n_lp = 2 * m + 2;
    let mut blocks: Vec<(usize, Kind)> = layout.iter().map(|l| (l.size(), Kind::Dense)).collect();
    blocks.push((n_lp, Kind::Diag));
    let mut a = user_rows(p, layout);
    for (k, row) in a.iter_mut().enumerate() {
        row.push((lp, Data::Diag(vec![(0, -p.constraints[k].rhs), (1 + k, 1.0), (1 + m + k, -1.0)])));
    }
    let mut delta_row: Vec<(usize, Data)> =
        layout.iter().enumerate().filter(|(_, l)| l.size() > 0).map(|(b, l)| (b, Data::Dense(DMatrix::identity(l.size(), l.size())))).collect();
    delta_row.push((lp, Data::Diag(vec![(n_lp - 1, 1.0)])));
    a.push(delta_row);
    let mut b = DVector::zeros(m + 1);
    b[m] = 1.0;
    let mut c: Vec<Option<Data>> = vec![None; nb];
    c.push(Some(Data::Diag((1..n_lp).map(|i| (i, 1.0)).collect())));
    let out = ipm::solve(&RealSdp { blocks, a, b, c }, opts.max_iter, opts.tol);
    let mut y: Vec<f64> = out.y.iter().take(m).copied().collect();
    // clean tiny negative b·y left by the inexact dual
    let bvec: Vec<f64> = p.constraints.iter().map(|c| c.rhs).collect();
    let by: f64 = bvec.iter().zip(&y).map(|(b, y)| b * y).sum();
    let bb: f64 = bvec.iter().map(|b| b * b).sum();
    if by < 0.0 && bb > 0.0 {
        let tau = -by / bb;
        y.iter_mut().zip(&bvec).for_each(|(yk, bk)| *yk += tau * bk);
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Ok((None, out));
    }
    let chk = farkas_check(p, &y)?;
    let cert = (chk.valid && chk.delta > 0.0).then(|| FarkasCertificate { y, delta: chk.delta, by: chk.by });
    Ok((cert, out))
}
