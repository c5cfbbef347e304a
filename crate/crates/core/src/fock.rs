//! The truncated Fock space `𝒫_ℓ` spanned by plain words of length at most
//! `ℓ`, its compressed creation operators, right multiplications and the
//! dilation of nilpotent row contractions into it.

use std::collections::HashMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64, ONE};
use crate::ncalg::{Letter, MatrixTuple, Word};

pub const DEFAULT_DIM_CAP: usize = 100_000;

/// `σ(ℓ) = Σ_{j=0}^{ℓ} g^j`, or `None` on overflow.
pub fn sigma(g: usize, ell: usize) -> Option<usize> {
    let mut total: usize = 0;
    let mut layer: usize = 1;
    for j in 0..=ell {
        total = total.checked_add(layer)?;
        if j < ell {
            layer = layer.checked_mul(g)?;
        }
    }
    Some(total)
}

#[derive(Debug, Clone)]
pub struct TruncatedFock {
    g: usize,
    ell: usize,
    basis: Vec<Word>,
    index: HashMap<Word, usize>,
    /// `prepend[j][k]`: index of `x_j w_k` when it still has length ≤ ℓ.
    prepend: Vec<Vec<Option<usize>>>,
}

impl TruncatedFock {
    pub fn build(g: usize, ell: usize) -> Result<Self> {
        Self::build_with_cap(g, ell, DEFAULT_DIM_CAP)
    }

    pub fn build_with_cap(g: usize, ell: usize, cap: usize) -> Result<Self> {
        if g == 0 {
            return Err(Error::Invalid("need at least one letter".into()));
        }
        let dim = sigma(g, ell).unwrap_or(usize::MAX);
        if dim > cap {
            return Err(Error::ResourceCap { what: "Fock dimension", size: dim, cap });
        }
        let basis = Word::enumerate_plain(g, ell);
        debug_assert_eq!(basis.len(), dim);
        let index: HashMap<Word, usize> = basis.iter().cloned().enumerate().map(|(k, w)| (w, k)).collect();
        let prepend = (0..g)
            .map(|j| {
                basis
                    .iter()
                    .map(|w| if w.len() < ell { index.get(&w.prepend(Letter::plain(j))).copied() } else { None })
                    .collect()
            })
            .collect();
        Ok(TruncatedFock { g, ell, basis, index, prepend })
    }

    pub fn g(&self) -> usize {
        self.g
    }

    pub fn ell(&self) -> usize {
        self.ell
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[Word] {
        &self.basis
    }

    pub fn index_of(&self, w: &Word) -> Option<usize> {
        self.index.get(w).copied()
    }

    /// `T_j`: `w ↦ x_j w` for `|w| ≤ ℓ − 1`, else 0.
    pub fn creation_op(&self, j: usize) -> CMat {
        let mut t = linalg::zeros(self.dim(), self.dim());
        for (k, target) in self.prepend[j].iter().enumerate() {
            if let Some(r) = target {
                t[(*r, k)] = ONE;
            }
        }
        t
    }

    pub fn creation_ops(&self) -> MatrixTuple {
        MatrixTuple::new((0..self.g).map(|j| self.creation_op(j)).collect()).expect("square")
    }

    /// Projection onto the span of the empty word.
    pub fn vacuum_projection(&self) -> CMat {
        let mut p = linalg::zeros(self.dim(), self.dim());
        p[(0, 0)] = ONE;
        p
    }

    /// `R_u`: `v ↦ vu` when `|v| ≤ ℓ − |u|`, else 0.
    pub fn right_mult(&self, u: &Word) -> Result<CMat> {
        if !u.is_plain() || u.min_arity() > self.g {
            return Err(Error::Invalid(format!("{u} is not a plain word over {} letters", self.g)));
        }
        if u.len() > self.ell {
            return Err(Error::Invalid(format!("|{u}| = {} exceeds truncation {}", u.len(), self.ell)));
        }
        let mut r = linalg::zeros(self.dim(), self.dim());
        for (k, v) in self.basis.iter().enumerate() {
            if v.len() + u.len() <= self.ell {
                r[(self.index[&v.concat(u)], k)] = ONE;
            }
        }
        Ok(r)
    }

    /// Applies `I_n ⊗ T_j*` to the columns of an `(n·σ) × m` matrix laid out
    /// with the Fock index fastest.
    pub fn apply_adjoint_creation(&self, j: usize, v: &CMat) -> CMat {
        let sig = self.dim();
        let n = v.nrows() / sig;
        let mut out = linalg::zeros(v.nrows(), v.ncols());
        for i in 0..n {
            for (k, src) in self.prepend[j].iter().enumerate() {
                if let Some(s) = src {
                    out.row_mut(i * sig + k).copy_from(&v.row(i * sig + s));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DilationResiduals {
    /// `‖V*V − I‖_F`
    pub isometry: f64,
    /// `max_j ‖V X_j* − r (I⊗T_j*) V‖_F`
    pub intertwining: f64,
    /// `‖D² + Σ (X_j/r)(X_j/r)* − I‖_F`
    pub defect: f64,
    /// `‖Σ_{|w|≤ℓ} (X/r)^w D² ((X/r)^w)* − I‖_F`
    pub word_sum: f64,
}

impl DilationResiduals {
    pub fn max(&self) -> f64 {
        self.isometry.max(self.intertwining).max(self.defect).max(self.word_sum)
    }
}

#[derive(Debug, Clone)]
pub struct DilationResult {
    /// Isometry `C^n → C^n ⊗ 𝒫_ℓ`, rows indexed `i·σ(ℓ) + k`.
    pub v: CMat,
    pub defect: CMat,
    pub r: f64,
    pub fock: TruncatedFock,
    pub residuals: DilationResiduals,
}

/// Largest `‖X^w‖` over words of length `ell + 1` must not exceed
/// `1e-10·max(‖X_j‖)^{ell+1}`.
fn check_nilpotent(x: &MatrixTuple, ell: usize) -> Result<()> {
    let g = x.g();
    let len = ell + 1;
    let count = (g as f64).powi(len as i32);
    if count > 2e6 {
        return Err(Error::ResourceCap { what: "nilpotency word check", size: count as usize, cap: 2_000_000 });
    }
    let scale = x.max_norm().max(f64::MIN_POSITIVE).powi(len as i32);
    let tol = 1e-10 * scale;
    let mut stack: Vec<(Vec<usize>, CMat)> = vec![(Vec::new(), linalg::eye(x.n()))];
    while let Some((w, m)) = stack.pop() {
        if w.len() == len {
            let norm = linalg::op_norm(&m);
            if norm > tol {
                return Err(Error::NotNilpotent { order: len, word: Word::plain(&w).to_string(), norm });
            }
            continue;
        }
        for j in 0..g {
            let mut w2 = w.clone();
            w2.push(j);
            stack.push((w2, &m * x.get(j)));
        }
    }
    Ok(())
}

/// Dilates a tuple `X` with `X^w = 0` for `|w| > ℓ` and `Σ X_j X_j* ≺ r²` to
/// the truncated creation operators: returns an isometry `V` with
/// `V X_j* = r (I ⊗ T_j*) V`. The defect is `D = (I − Σ(X_j/r)(X_j/r)*)^{1/2}`
/// and `Vγ = Σ_{|w|≤ℓ} D ((X/r)^w)* γ ⊗ w`.
pub fn dilate(x: &MatrixTuple, r: f64, ell: usize) -> Result<DilationResult> {
    if !(r > 0.0) {
        return Err(Error::Invalid(format!("scale r must be positive, got {r}")));
    }
    let g = x.g();
    let n = x.n();
    let max_eig = linalg::max_eig(&x.row_gram());
    if max_eig >= r * r {
        return Err(Error::RowNormBound { max_eig, bound: r * r });
    }
    check_nilpotent(x, ell)?;
    let fock = TruncatedFock::build(g, ell)?;
    let y = x.scale(C64::new(1.0 / r, 0.0));
    let id = linalg::eye(n);
    let defect_sq = &id - y.row_gram();
    let defect = linalg::psd_sqrt(&defect_sq)?;

    // Y^w along the graded basis: Y^{x_j u} = Y_j Y^u.
    let sig = fock.dim();
    let mut powers: Vec<CMat> = Vec::with_capacity(sig);
    for w in fock.basis() {
        let p = match w.letters().split_first() {
            None => id.clone(),
            Some((first, rest)) => y.get(first.var) * &powers[fock.index[&Word::new(rest.to_vec())]],
        };
        powers.push(p);
    }

    let mut v = linalg::zeros(n * sig, n);
    for (k, p) in powers.iter().enumerate() {
        let block = &defect * p.adjoint();
        for i in 0..n {
            v.row_mut(i * sig + k).copy_from(&block.row(i));
        }
    }

    let isometry = (v.adjoint() * &v - &id).norm();
    let mut intertwining: f64 = 0.0;
    for j in 0..g {
        let lhs = &v * x.get(j).adjoint();
        let rhs = fock.apply_adjoint_creation(j, &v) * C64::new(r, 0.0);
        intertwining = intertwining.max((lhs - rhs).norm());
    }
    let defect_res = (&defect * &defect + y.row_gram() - &id).norm();
    let d2 = &defect * &defect;
    let word_sum = powers.iter().fold(linalg::zeros(n, n), |acc, p| acc + p * &d2 * p.adjoint());
    let word_sum = (word_sum - &id).norm();

    Ok(DilationResult {
        v,
        defect,
        r,
        fock,
        residuals: DilationResiduals { isometry, intertwining, defect: defect_res, word_sum },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, from_real};
    use crate::ncdomain::{Domain, EpsNeighborhood};
    use crate::par::trial_rng;
    use rand::Rng;

    #[test]
    fn dimensions() {
        assert_eq!(TruncatedFock::build(2, 2).unwrap().dim(), 7);
        assert_eq!(TruncatedFock::build(1, 3).unwrap().dim(), 4);
        assert_eq!(TruncatedFock::build(3, 0).unwrap().dim(), 1);
        assert_eq!(TruncatedFock::build(3, 0).unwrap().basis()[0], Word::empty());
        assert!(matches!(TruncatedFock::build(10, 6), Err(Error::ResourceCap { .. })));
        assert_eq!(sigma(usize::MAX, 3), None);
    }

    #[test]
    fn creation_maps_words() {
        let f = TruncatedFock::build(2, 2).unwrap();
        let t1 = f.creation_op(0);
        let x2 = f.index_of(&Word::plain(&[1])).unwrap();
        let x1x2 = f.index_of(&Word::plain(&[0, 1])).unwrap();
        let mut e = linalg::zeros(f.dim(), 1);
        e[(x2, 0)] = ONE;
        let out = &t1 * e;
        assert_eq!(out[(x1x2, 0)], ONE);
        assert_eq!(out.iter().filter(|z| **z != C64::new(0.0, 0.0)).count(), 1);
    }

    #[test]
    fn adjoints_kill_vacuum() {
        let f = TruncatedFock::build(3, 2).unwrap();
        for j in 0..3 {
            let col = f.creation_op(j).adjoint().column(0).into_owned();
            assert!(col.iter().all(|z| *z == C64::new(0.0, 0.0)));
        }
    }

    #[test]
    fn row_sum_is_complement_of_vacuum() {
        let f = TruncatedFock::build(2, 3).unwrap();
        let t = f.creation_ops();
        let lhs = t.row_gram();
        let rhs = linalg::eye(f.dim()) - f.vacuum_projection();
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn right_mult_examples() {
        let f = TruncatedFock::build(1, 2).unwrap();
        assert_eq!(f.right_mult(&Word::empty()).unwrap(), linalg::eye(3));
        let r = f.right_mult(&Word::plain(&[0])).unwrap();
        assert_eq!(r, from_real(3, 3, &[0., 0., 0., 1., 0., 0., 0., 1., 0.]));
        assert!(f.right_mult(&Word::plain(&[0, 0, 0])).is_err());
    }

    #[test]
    fn creation_commutes_with_right_mult() {
        let f = TruncatedFock::build(2, 3).unwrap();
        let t = f.creation_ops();
        for u in Word::enumerate_plain(2, 3) {
            let r = f.right_mult(&u).unwrap();
            for j in 0..2 {
                assert_eq!(t.get(j) * &r, &r * t.get(j), "j={j} u={u}");
            }
        }
    }

    #[test]
    fn compression_is_coinvariant() {
        // p(T) at level ℓ equals the compression of p at level ℓ + deg p,
        // which acts like the full shift on words of length ≤ ℓ.
        let ell = 2;
        let small = TruncatedFock::build(2, ell).unwrap();
        let big = TruncatedFock::build(2, ell + 3).unwrap();
        let (ts, tb) = (small.creation_ops(), big.creation_ops());
        let s = small.dim();
        for w in Word::enumerate_plain(2, 3) {
            let lhs = ts.eval_word(&w).unwrap();
            let rhs = tb.eval_word(&w).unwrap().view((0, 0), (s, s)).into_owned();
            assert_eq!(lhs, rhs, "{w}");
        }
    }

    #[test]
    fn scaled_shift_lies_in_neighbourhood() {
        let f = TruncatedFock::build(2, 3).unwrap();
        let t = f.creation_ops();
        let eps = 0.8;
        let dom = Domain::Nbhd(EpsNeighborhood::new(2, eps).unwrap());
        for delta in [0.1, 0.5, 0.79] {
            let m = dom.contains(&t.scale(c(delta, 0.0))).unwrap();
            assert!(m.is_member());
            assert!((m.margin - (eps * eps - delta * delta)).abs() < 1e-12);
        }
    }

    #[test]
    fn dilate_zero() {
        let x = MatrixTuple::zeros(1, 1);
        let d = dilate(&x, 1.0, 1).unwrap();
        assert_eq!(d.defect, linalg::eye(1));
        assert_eq!(d.v, from_real(2, 1, &[1.0, 0.0]));
        assert_eq!(d.residuals.max(), 0.0);
    }

    #[test]
    fn dilate_jordan_block() {
        let x = MatrixTuple::new(vec![from_real(2, 2, &[0., 0.5, 0., 0.])]).unwrap();
        let d = dilate(&x, 1.0, 1).unwrap();
        assert!(d.residuals.isometry < 1e-12);
        assert!(d.residuals.intertwining < 1e-12);
        // dense cross-check of the intertwining relation
        let dense = linalg::eye(2).kronecker(&d.fock.creation_op(0).adjoint());
        assert!((&d.v * x.get(0).adjoint() - dense * &d.v).norm() < 1e-12);
    }

    #[test]
    fn dilate_rejects_bad_input() {
        let x = MatrixTuple::new(vec![from_real(2, 2, &[0., 2., 0., 0.])]).unwrap();
        assert!(matches!(dilate(&x, 1.0, 1), Err(Error::RowNormBound { .. })));
        let y = MatrixTuple::new(vec![from_real(2, 2, &[0.1, 0.2, 0., 0.])]).unwrap();
        assert!(matches!(dilate(&y, 1.0, 3), Err(Error::NotNilpotent { .. })));
    }

    #[test]
    fn dilate_random_upper_triangular() {
        let mut rng = trial_rng(21, 0);
        for _ in 0..20 {
            let n = rng.random_range(1..=5);
            let g = rng.random_range(1..=3);
            let mats = (0..g)
                .map(|_| CMat::from_fn(n, n, |i, j| if j > i { linalg::gaussian(&mut rng) } else { C64::new(0.0, 0.0) }))
                .collect();
            let x = MatrixTuple::new(mats).unwrap();
            let r = 1.1 * x.row_norm().max(1e-3);
            let d = dilate(&x, r, n.saturating_sub(1)).unwrap();
            assert!(d.residuals.max() < 1e-9, "{:?}", d.residuals);
        }
    }
}
