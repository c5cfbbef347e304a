//! Primal-dual interior-point kernel for real block-diagonal SDPs
//!
//! ```text
//! min ⟨C, X⟩  s.t.  ⟨A_k, X⟩ = b_k,  X ⪰ 0
//! max b·y     s.t.  S = C − Σ y_k A_k ⪰ 0
//! ```
//!
//! HKM search direction with Mehrotra predictor-corrector from an
//! infeasible start `X = ξI`, `S = ηI`, `y = 0`. Diagonal blocks hold LP
//! variables with sparse data.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Kind {
    Dense,
    Diag,
}

#[derive(Debug, Clone)]
pub(crate) enum Data {
    Dense(DMatrix<f64>),
    Diag(Vec<(usize, f64)>),
}

impl Data {
    fn norm_sq(&self) -> f64 {
        match self {
            Data::Dense(m) => m.norm_squared(),
            Data::Diag(v) => v.iter().map(|(_, a)| a * a).sum(),
        }
    }

    fn scale(&mut self, s: f64) {
        match self {
            Data::Dense(m) => *m *= s,
            Data::Diag(v) => v.iter_mut().for_each(|(_, a)| *a *= s),
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) enum Var {
    Dense(DMatrix<f64>),
    Diag(DVector<f64>),
}

impl Var {
    fn identity(n: usize, kind: Kind, s: f64) -> Var {
        match kind {
            Kind::Dense => Var::Dense(DMatrix::identity(n, n) * s),
            Kind::Diag => Var::Diag(DVector::from_element(n, s)),
        }
    }

    fn zeros_like(&self) -> Var {
        match self {
            Var::Dense(m) => Var::Dense(DMatrix::zeros(m.nrows(), m.ncols())),
            Var::Diag(v) => Var::Diag(DVector::zeros(v.len())),
        }
    }

    fn dot_data(&self, d: &Data) -> f64 {
        match (self, d) {
            (Var::Dense(x), Data::Dense(a)) => x.component_mul(a).sum(),
            (Var::Diag(x), Data::Diag(a)) => a.iter().map(|(i, v)| v * x[*i]).sum(),
            _ => unreachable!("block kinds agree"),
        }
    }

    fn add_data(&mut self, d: &Data, s: f64) {
        match (self, d) {
            (Var::Dense(x), Data::Dense(a)) => *x += a * s,
            (Var::Diag(x), Data::Diag(a)) => a.iter().for_each(|(i, v)| x[*i] += v * s),
            _ => unreachable!("block kinds agree"),
        }
    }

    fn dot(&self, o: &Var) -> f64 {
        match (self, o) {
            (Var::Dense(a), Var::Dense(b)) => a.component_mul(b).sum(),
            (Var::Diag(a), Var::Diag(b)) => a.dot(b),
            _ => unreachable!("block kinds agree"),
        }
    }

    fn axpy(&self, alpha: f64, d: &Var) -> Var {
        match (self, d) {
            (Var::Dense(a), Var::Dense(b)) => Var::Dense(a + b * alpha),
            (Var::Diag(a), Var::Diag(b)) => Var::Diag(a + b * alpha),
            _ => unreachable!("block kinds agree"),
        }
    }

    fn norm_sq(&self) -> f64 {
        match self {
            Var::Dense(m) => m.norm_squared(),
            Var::Diag(v) => v.norm_squared(),
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct RealSdp {
    pub blocks: Vec<(usize, Kind)>,
    /// Constraint `k` as its nonzero blocks.
    pub a: Vec<Vec<(usize, Data)>>,
    pub b: DVector<f64>,
    pub c: Vec<Option<Data>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum IpmStatus {
    Optimal,
    MaxIterations,
    IllConditioned,
}

#[derive(Debug, Clone)]
pub(crate) struct IpmOutcome {
    pub x: Vec<Var>,
    pub y: DVector<f64>,
    pub status: IpmStatus,
    pub iterations: usize,
    pub dual_res: f64,
    pub gap: f64,
}

struct Factors {
    /// `S⁻¹` for dense blocks, `1/s` for diagonal ones.
    sinv: Vec<Var>,
    xchol: Vec<Option<DMatrix<f64>>>,
}

fn sym(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

/// Nonzeros `(i, j, a)` of a dense-block constraint, kept when sparse enough
/// to beat dense products in the Schur complement.
type Triplets = Option<Vec<(usize, usize, f64)>>;

fn triplets(d: &Data) -> Triplets {
    let Data::Dense(m) = d else { return None };
    let nz: Vec<_> = (0..m.ncols())
        .flat_map(|j| (0..m.nrows()).map(move |i| (i, j)))
        .filter_map(|(i, j)| (m[(i, j)] != 0.0).then(|| (i, j, m[(i, j)])))
        .collect();
    (nz.len() * 4 < m.len()).then_some(nz)
}

struct Kernel<'a> {
    p: &'a RealSdp,
    by_block: Vec<Vec<(usize, &'a Data, Triplets)>>,
}

impl<'a> Kernel<'a> {
    fn new(p: &'a RealSdp) -> Self {
        let mut by_block = vec![Vec::new(); p.blocks.len()];
        for (k, row) in p.a.iter().enumerate() {
            for (b, d) in row {
                by_block[*b].push((k, d, triplets(d)));
            }
        }
        Kernel { p, by_block }
    }

    fn a_op(&self, x: &[Var]) -> DVector<f64> {
        DVector::from_iterator(self.p.a.len(), self.p.a.iter().map(|row| row.iter().map(|(b, d)| x[*b].dot_data(d)).sum()))
    }

    fn a_adj(&self, y: &DVector<f64>) -> Vec<Var> {
        let mut out: Vec<Var> = self.p.blocks.iter().map(|&(n, k)| Var::identity(n, k, 0.0)).collect();
        for (k, row) in self.p.a.iter().enumerate() {
            for (b, d) in row {
                out[*b].add_data(d, y[k]);
            }
        }
        out
    }

    fn c_minus(&self, at: &[Var]) -> Vec<Var> {
        at.iter()
            .zip(&self.p.c)
            .map(|(v, c)| {
                let mut r = v.zeros_like().axpy(-1.0, v);
                if let Some(c) = c {
                    r.add_data(c, 1.0);
                }
                r
            })
            .collect()
    }

    fn factor(&self, x: &[Var], s: &[Var]) -> Option<Factors> {
        let mut sinv = Vec::new();
        let mut xchol = Vec::new();
        for (xb, sb) in x.iter().zip(s) {
            match (xb, sb) {
                (Var::Dense(xm), Var::Dense(sm)) => {
                    let cs = Cholesky::new(sm.clone())?;
                    let inv = cs.inverse();
                    sinv.push(Var::Dense(sym(inv)));
                    xchol.push(Some(Cholesky::new(xm.clone())?.l()));
                }
                (Var::Diag(xv), Var::Diag(sv)) => {
                    if xv.iter().chain(sv.iter()).any(|v| !(*v > 0.0)) {
                        return None;
                    }
                    sinv.push(Var::Diag(sv.map(|v| 1.0 / v)));
                    xchol.push(None);
                }
                _ => unreachable!(),
            }
        }
        Some(Factors { sinv, xchol })
    }

    fn schur(&self, x: &[Var], f: &Factors) -> DMatrix<f64> {
        let m = self.p.a.len();
        let mut mm = DMatrix::zeros(m, m);
        for (b, list) in self.by_block.iter().enumerate() {
            match (&x[b], &f.sinv[b]) {
                (Var::Dense(xm), Var::Dense(si)) => {
                    for (l, dl, tl) in list {
                        let Data::Dense(al) = dl else { unreachable!() };
                        let pl = match tl {
                            Some(nz) => sparse_product(xm, nz, si),
                            None => xm * al * si,
                        };
                        for (k, dk, tk) in list {
                            if k > l {
                                continue;
                            }
                            let v = match (tk, dk) {
                                (Some(nz), _) => nz.iter().map(|&(i, j, a)| a * pl[(i, j)]).sum(),
                                (None, Data::Dense(ak)) => ak.component_mul(&pl).sum(),
                                _ => unreachable!(),
                            };
                            mm[(*k, *l)] += v;
                            if k != l {
                                mm[(*l, *k)] += v;
                            }
                        }
                    }
                }
                (Var::Diag(xv), Var::Diag(si)) => {
                    let n = xv.len();
                    let mut at: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
                    for (k, dk, _) in list {
                        let k = *k;
                        let Data::Diag(ak) = dk else { unreachable!() };
                        for &(i, a) in ak {
                            at[i].push((k, a));
                        }
                    }
                    for (i, entries) in at.iter().enumerate() {
                        let d = xv[i] * si[i];
                        for &(k, ak) in entries {
                            for &(l, al) in entries {
                                mm[(k, l)] += ak * al * d;
                            }
                        }
                    }
                }
                _ => unreachable!(),
            }
        }
        mm
    }

    /// Solves for `(ΔX, Δy, ΔS)` with `ΔX = sym(G − X ΔS S⁻¹)`.
    fn direction(
        &self,
        chol: &Cholesky<f64, Dyn>,
        x: &[Var],
        f: &Factors,
        g: &[Var],
        rp: &DVector<f64>,
        rd: &[Var],
    ) -> (Vec<Var>, DVector<f64>, Vec<Var>) {
        let h: Vec<Var> = (0..x.len()).map(|b| sub_xrs(&g[b], &x[b], &rd[b], &f.sinv[b])).collect();
        let rhs = rp - self.a_op(&h);
        let dy = chol.solve(&rhs);
        let ady = self.a_adj(&dy);
        let ds: Vec<Var> = rd.iter().zip(&ady).map(|(r, a)| r.axpy(-1.0, a)).collect();
        let dx = (0..x.len())
            .map(|b| match sub_xrs(&g[b], &x[b], &ds[b], &f.sinv[b]) {
                Var::Dense(m) => Var::Dense(sym(m)),
                v => v,
            })
            .collect();
        (dx, dy, ds)
    }
}

/// `G − X R S⁻¹`.
/// `X A S⁻¹` for `A` given by its nonzeros: one rank-one update per nonzero
/// column of `A`.
fn sparse_product(x: &DMatrix<f64>, nz: &[(usize, usize, f64)], sinv: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows();
    let mut out = DMatrix::zeros(n, sinv.ncols());
    let mut cols: Vec<(usize, DVector<f64>)> = Vec::new();
    for &(i, j, a) in nz {
        match cols.iter_mut().find(|(c, _)| *c == j) {
            Some((_, v)) => v.axpy(a, &x.column(i), 1.0),
            None => cols.push((j, x.column(i) * a)),
        }
    }
    for (j, v) in cols {
        out.ger(1.0, &v, &sinv.row(j).transpose(), 1.0);
    }
    out
}

fn sub_xrs(g: &Var, x: &Var, r: &Var, sinv: &Var) -> Var {
    match (g, x, r, sinv) {
        (Var::Dense(g), Var::Dense(x), Var::Dense(r), Var::Dense(si)) => Var::Dense(g - x * r * si),
        (Var::Diag(g), Var::Diag(x), Var::Diag(r), Var::Diag(si)) => Var::Diag(g - x.component_mul(r).component_mul(si)),
        _ => unreachable!(),
    }
}

fn max_step_dense(l: Option<&DMatrix<f64>>, m: &DMatrix<f64>, d: &DMatrix<f64>) -> f64 {
    let l = match l {
        Some(l) => l.clone(),
        None => match Cholesky::new(m.clone()) {
            Some(c) => c.l(),
            None => return 0.0,
        },
    };
    let Some(w) = l.solve_lower_triangular(d) else { return 0.0 };
    let Some(w) = l.solve_lower_triangular(&w.transpose()) else { return 0.0 };
    let lam = SymmetricEigen::new(sym(w)).eigenvalues.min();
    if lam < 0.0 {
        -1.0 / lam
    } else {
        f64::INFINITY
    }
}

fn max_step(v: &[Var], dv: &[Var], chol: Option<&[Option<DMatrix<f64>>]>) -> f64 {
    let mut a = f64::INFINITY;
    for (b, (x, d)) in v.iter().zip(dv).enumerate() {
        let s = match (x, d) {
            (Var::Dense(m), Var::Dense(dm)) => max_step_dense(chol.and_then(|c| c[b].as_ref()), m, dm),
            (Var::Diag(xv), Var::Diag(dvv)) => xv
                .iter()
                .zip(dvv.iter())
                .filter(|(_, d)| **d < 0.0)
                .map(|(x, d)| -x / d)
                .fold(f64::INFINITY, f64::min),
            _ => unreachable!(),
        };
        a = a.min(s);
    }
    a
}

fn complementarity_g(x: &[Var], f: &Factors, sigma_mu: f64, corr: Option<(&[Var], &[Var])>) -> Vec<Var> {
    (0..x.len())
        .map(|b| match (&x[b], &f.sinv[b]) {
            (Var::Dense(xm), Var::Dense(si)) => {
                let mut g = si * sigma_mu - xm;
                if let Some((dx, ds)) = corr {
                    if let (Var::Dense(a), Var::Dense(c)) = (&dx[b], &ds[b]) {
                        g -= a * c * si;
                    }
                }
                Var::Dense(g)
            }
            (Var::Diag(xv), Var::Diag(si)) => {
                let mut g = si * sigma_mu - xv;
                if let Some((dx, ds)) = corr {
                    if let (Var::Diag(a), Var::Diag(c)) = (&dx[b], &ds[b]) {
                        g -= a.component_mul(c).component_mul(si);
                    }
                }
                Var::Diag(g)
            }
            _ => unreachable!(),
        })
        .collect()
}

fn total_norm(v: &[Var]) -> f64 {
    v.iter().map(Var::norm_sq).sum::<f64>().sqrt()
}

pub(crate) fn solve(problem: &RealSdp, max_iter: usize, tol: f64) -> IpmOutcome {
    // unit-norm constraint rows; y is rescaled back at the end
    let mut p = problem.clone();
    let mut row_scale = DVector::from_element(p.a.len(), 1.0);
    for (k, row) in p.a.iter_mut().enumerate() {
        let nrm = row.iter().map(|(_, d)| d.norm_sq()).sum::<f64>().sqrt();
        if nrm > 0.0 {
            row.iter_mut().for_each(|(_, d)| d.scale(1.0 / nrm));
            p.b[k] /= nrm;
            row_scale[k] = nrm;
        }
    }
    let kern = Kernel::new(&p);
    let dim: usize = p.blocks.iter().map(|b| b.0).sum::<usize>().max(1);
    let nf = dim as f64;
    let c_norm = p.c.iter().flatten().map(Data::norm_sq).sum::<f64>().sqrt();
    let b_norm = p.b.norm();
    let xi = p.b.iter().map(|b| nf * (1.0 + b.abs()) / 2.0).fold(10.0f64.max(nf.sqrt()), f64::max);
    let eta = 10.0f64.max(nf.sqrt()).max(c_norm).max(1.0);

    let mut x: Vec<Var> = p.blocks.iter().map(|&(n, k)| Var::identity(n, k, xi)).collect();
    let mut s: Vec<Var> = p.blocks.iter().map(|&(n, k)| Var::identity(n, k, eta)).collect();
    let mut y = DVector::zeros(p.a.len());

    let out = |x: Vec<Var>, y: &DVector<f64>, status, iterations, _pr: f64, dr, gap| IpmOutcome {
        x,
        y: y.component_div(&row_scale),
        status,
        iterations,
        dual_res: dr,
        gap,
    };

    let (mut pr, mut dr, mut gap) = (f64::INFINITY, f64::INFINITY, f64::INFINITY);
    for it in 0..max_iter {
        let rp = &p.b - kern.a_op(&x);
        let aty = kern.a_adj(&y);
        let rd: Vec<Var> = kern.c_minus(&aty).iter().zip(&s).map(|(c, sb)| c.axpy(-1.0, sb)).collect();
        let pobj: f64 = x.iter().zip(&p.c).map(|(xb, c)| c.as_ref().map_or(0.0, |c| xb.dot_data(c))).sum();
        let dobj = p.b.dot(&y);
        pr = rp.norm() / (1.0 + b_norm);
        dr = total_norm(&rd) / (1.0 + c_norm);
        gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
        if pr < tol && dr < tol && gap < tol {
            return out(x, &y, IpmStatus::Optimal, it, pr, dr, gap);
        }
        if total_norm(&x) > 1e13 || y.amax() > 1e13 {
            return out(x, &y, IpmStatus::MaxIterations, it, pr, dr, gap);
        }
        let mu: f64 = x.iter().zip(&s).map(|(a, b)| a.dot(b)).sum::<f64>() / nf;
        let Some(f) = kern.factor(&x, &s) else {
            return out(x, &y, IpmStatus::IllConditioned, it, pr, dr, gap);
        };
        let mut schur = kern.schur(&x, &f);
        let chol = match Cholesky::new(schur.clone()) {
            Some(c) => c,
            None => {
                let reg = 1e-14 * schur.trace().abs().max(1.0);
                for i in 0..schur.nrows() {
                    schur[(i, i)] += reg;
                }
                match Cholesky::new(schur) {
                    Some(c) => c,
                    None => return out(x, &y, IpmStatus::IllConditioned, it, pr, dr, gap),
                }
            }
        };

        let g = complementarity_g(&x, &f, 0.0, None);
        let (dxa, _, dsa) = kern.direction(&chol, &x, &f, &g, &rp, &rd);
        let ap = max_step(&x, &dxa, Some(&f.xchol)).min(1.0);
        let ad = max_step(&s, &dsa, None).min(1.0);
        let mu_aff: f64 = x.iter().zip(&s).enumerate().map(|(b, (xb, sb))| xb.axpy(ap, &dxa[b]).dot(&sb.axpy(ad, &dsa[b]))).sum::<f64>() / nf;
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

        let g = complementarity_g(&x, &f, sigma * mu, Some((&dxa, &dsa)));
        let (dx, dy, ds) = kern.direction(&chol, &x, &f, &g, &rp, &rd);
        let ap = (0.98 * max_step(&x, &dx, Some(&f.xchol))).min(1.0);
        let ad = (0.98 * max_step(&s, &ds, None)).min(1.0);
        if ap < 1e-12 && ad < 1e-12 {
            return out(x, &y, IpmStatus::IllConditioned, it, pr, dr, gap);
        }
        x = x.iter().zip(&dx).map(|(a, d)| a.axpy(ap, d)).collect();
        s = s.iter().zip(&ds).map(|(a, d)| a.axpy(ad, d)).collect();
        y += dy * ad;
    }
    out(x, &y, IpmStatus::MaxIterations, max_iter, pr, dr, gap)
}
