//! Dense complex linear algebra shared by every module.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn cis(theta: f64) -> C64 {
    C64::from_polar(1.0, theta)
}

pub fn eye(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn zeros(r: usize, c: usize) -> CMat {
    CMat::zeros(r, c)
}

pub fn from_real(r: usize, c: usize, data: &[f64]) -> CMat {
    CMat::from_row_iterator(r, c, data.iter().map(|&x| C64::new(x, 0.0)))
}

pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()) * C64::new(0.5, 0.0)
}

/// Frobenius distance between `m` and its adjoint.
pub fn asymmetry(m: &CMat) -> f64 {
    (m - m.adjoint()).norm()
}

/// Eigenvalues (ascending) and eigenvectors of the Hermitian part of `m`.
pub fn eigh(m: &CMat) -> (Vec<f64>, CMat) {
    let h = hermitian_part(m);
    let eig = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = CMat::from_fn(m.nrows(), order.len(), |r, k| eig.eigenvectors[(r, order[k])]);
    (vals, vecs)
}

/// Nearest PSD matrix to the Hermitian part of `m`.
pub fn psd_part(m: &CMat) -> CMat {
    let eig = SymmetricEigen::new(hermitian_part(m));
    let d = eig.eigenvalues.map(|l| C64::new(l.max(0.0), 0.0));
    let v = &eig.eigenvectors;
    v * CMat::from_diagonal(&d) * v.adjoint()
}

pub fn min_eig(m: &CMat) -> f64 {
    if m.is_empty() {
        return f64::INFINITY;
    }
    SymmetricEigen::new(hermitian_part(m)).eigenvalues.min()
}

pub fn max_eig(m: &CMat) -> f64 {
    if m.is_empty() {
        return f64::NEG_INFINITY;
    }
    SymmetricEigen::new(hermitian_part(m)).eigenvalues.max()
}

/// Spectral norm.
pub fn op_norm(m: &CMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.max()
}

pub fn cond(m: &CMat) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    let lo = sv.min();
    if lo == 0.0 {
        f64::INFINITY
    } else {
        sv.max() / lo
    }
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// Square root of a PSD matrix. Eigenvalues in `[-1e-12, 0]` are clamped to
/// zero; anything more negative is reported as indefinite.
pub fn psd_sqrt(m: &CMat) -> Result<CMat> {
    let (vals, vecs) = eigh(m);
    if let Some(&lo) = vals.first() {
        if lo < -1e-12 {
            return Err(Error::Indefinite { min_eig: lo });
        }
    }
    Ok(from_spectrum(&vecs, vals.iter().map(|&v| v.max(0.0).sqrt())))
}

/// Nearest PSD matrix in Frobenius norm.
pub fn psd_project(m: &CMat) -> CMat {
    let (vals, vecs) = eigh(m);
    from_spectrum(&vecs, vals.iter().map(|&v| v.max(0.0)))
}

fn from_spectrum(vecs: &CMat, vals: impl Iterator<Item = f64>) -> CMat {
    let n = vecs.nrows();
    let mut scaled = vecs.clone();
    for (k, v) in vals.enumerate() {
        let mut col = scaled.column_mut(k);
        col *= C64::new(v, 0.0);
    }
    let out = &scaled * vecs.adjoint();
    debug_assert_eq!(out.nrows(), n);
    hermitian_part(&out)
}

/// Block diagonal `a ⊕ b`.
pub fn block_diag(a: &CMat, b: &CMat) -> CMat {
    let mut out = zeros(a.nrows() + b.nrows(), a.ncols() + b.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((a.nrows(), a.ncols()), b.shape()).copy_from(b);
    out
}

pub fn unitarity_residual(u: &CMat) -> f64 {
    if !u.is_square() {
        return f64::INFINITY;
    }
    (u.adjoint() * u - eye(u.nrows())).norm()
}

pub fn gaussian(rng: &mut impl Rng) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Complex Ginibre matrix with unit-variance entries.
pub fn random_matrix(rng: &mut impl Rng, r: usize, c: usize) -> CMat {
    CMat::from_fn(r, c, |_, _| gaussian(rng))
}

/// Random Hermitian matrix (GUE normalisation up to scale).
pub fn random_hermitian(rng: &mut impl Rng, n: usize) -> CMat {
    hermitian_part(&random_matrix(rng, n, n))
}

/// Haar-distributed unitary via QR of a Ginibre matrix with phase fix.
pub fn random_unitary(rng: &mut impl Rng, n: usize) -> CMat {
    let qr = random_matrix(rng, n, n).qr();
    let (mut q, r) = qr.unpack();
    for k in 0..n {
        let d = r[(k, k)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { ONE };
        let mut col = q.column_mut(k);
        col *= phase;
    }
    q
}

/// Random invertible matrix with condition number at most `max_cond`.
pub fn random_well_conditioned(rng: &mut impl Rng, n: usize, max_cond: f64) -> CMat {
    let u = random_unitary(rng, n);
    let v = random_unitary(rng, n);
    let s = CMat::from_diagonal(&CVec::from_fn(n, |_, _| {
        C64::new(rng.random_range(1.0..=max_cond), 0.0)
    }));
    u * s * v.adjoint()
}

pub fn nilpotent_jordan(size: usize) -> CMat {
    CMat::from_fn(size, size, |r, c| if c == r + 1 { ONE } else { ZERO })
}
