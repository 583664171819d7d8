//! Dense complex matrix helpers shared by the channel, semantic and transceiver code.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type RMat = DMatrix<f64>;

/// Relative tolerance for accepting a matrix as Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-8;

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn real(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn scaled_identity(n: usize, s: f64) -> CMat {
    CMat::from_diagonal_element(n, n, real(s))
}

/// `(M + Mᴴ)/2`.
pub fn hermitian_part(m: &CMat) -> CMat {
    let mut out = m.clone();
    let n = m.nrows();
    for i in 0..n {
        out[(i, i)] = real(m[(i, i)].re);
        for j in (i + 1)..n {
            let v = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
            out[(i, j)] = v;
            out[(j, i)] = v.conj();
        }
    }
    out
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    debug_assert_eq!(a.shape(), b.shape());
    a.iter()
        .zip(b.iter())
        .fold(0.0_f64, |acc, (x, y)| acc.max((x - y).norm()))
}

/// Largest entry of `M − Mᴴ` in absolute value.
pub fn hermitian_defect(m: &CMat) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn frob2(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

pub fn trace_re(m: &CMat) -> f64 {
    (0..m.nrows().min(m.ncols())).map(|i| m[(i, i)].re).sum()
}

/// `Re tr(A·B)` without forming the product.
pub fn trace_of_product_re(a: &CMat, b: &CMat) -> f64 {
    assert_eq!(a.ncols(), b.nrows());
    assert_eq!(a.nrows(), b.ncols());
    let mut acc = 0.0;
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            acc += (a[(i, k)] * b[(k, i)]).re;
        }
    }
    acc
}

/// `M · diag(d)`.
pub fn scale_columns(m: &CMat, d: &[f64]) -> CMat {
    assert_eq!(m.ncols(), d.len());
    let mut out = m.clone();
    for (j, &s) in d.iter().enumerate() {
        out.column_mut(j).scale_mut(s);
    }
    out
}

/// `diag(d) · M`.
pub fn scale_rows(m: &CMat, d: &[f64]) -> CMat {
    assert_eq!(m.nrows(), d.len());
    let mut out = m.clone();
    for (i, &s) in d.iter().enumerate() {
        out.row_mut(i).scale_mut(s);
    }
    out
}

/// Squared Euclidean norm of every row.
pub fn row_energies(m: &CMat) -> Vec<f64> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().map(|z| z.norm_sqr()).sum())
        .collect()
}

/// Entries i.i.d. circularly-symmetric CN(0, 1).
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMat {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    // Column-major fill order so results do not depend on the storage layout of callers.
    let mut data = Vec::with_capacity(rows * cols);
    for _ in 0..rows * cols {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        data.push(c(s * re, s * im));
    }
    CMat::from_vec(rows, cols, data)
}

pub fn real_gaussian<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> RMat {
    let data = (0..rows * cols).map(|_| rng.sample(StandardNormal)).collect();
    RMat::from_vec(rows, cols, data)
}

/// Hermitian eigendecomposition with eigenvalues sorted in non-increasing order.
///
/// The input is symmetrized first. Inputs whose Hermitian defect exceeds
/// [`HERMITIAN_TOL`] relative to their magnitude are rejected.
pub fn eigh_descending(m: &CMat) -> Result<(CMat, Vec<f64>)> {
    if !m.is_square() {
        return Err(Error::domain(format!(
            "eigendecomposition needs a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let scale = max_abs(m).max(f64::MIN_POSITIVE);
    let defect = hermitian_defect(m);
    if defect > HERMITIAN_TOL * scale.max(1.0) {
        return Err(Error::domain(format!(
            "matrix is not Hermitian (defect {defect:.3e})"
        )));
    }
    let n = m.nrows();
    let eig = hermitian_part(m).symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut v = CMat::zeros(n, n);
    let mut values = Vec::with_capacity(n);
    for (dst, &src) in order.iter().enumerate() {
        v.set_column(dst, &eig.eigenvectors.column(src));
        values.push(eig.eigenvalues[src]);
    }
    Ok((v, values))
}

/// Thin SVD `M = U·diag(s)·Vᴴ` with `s` non-increasing; `V` holds right singular vectors as columns.
pub fn svd_descending(m: &CMat) -> Result<(CMat, Vec<f64>, CMat)> {
    let svd = m.clone().svd(true, true);
    let u = svd
        .u
        .ok_or_else(|| Error::Numerical("SVD did not return U".into()))?;
    let v_t = svd
        .v_t
        .ok_or_else(|| Error::Numerical("SVD did not return Vᴴ".into()))?;
    let r = svd.singular_values.len();
    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let mut us = CMat::zeros(u.nrows(), r);
    let mut vs = CMat::zeros(v_t.ncols(), r);
    let mut s = Vec::with_capacity(r);
    for (dst, &src) in order.iter().enumerate() {
        us.set_column(dst, &u.column(src));
        vs.set_column(dst, &v_t.row(src).adjoint());
        s.push(svd.singular_values[src]);
    }
    Ok((us, s, vs))
}

/// Solves `A·X = B` for Hermitian positive definite `A`.
///
/// Falls back to LU when the Cholesky factorization fails on round-off.
pub fn hpd_solve(a: &CMat, b: &CMat) -> Result<CMat> {
    if let Some(ch) = hermitian_part(a).cholesky() {
        return Ok(ch.solve(b));
    }
    a.clone()
        .lu()
        .solve(b)
        .ok_or_else(|| Error::Numerical("singular system matrix".into()))
}

pub fn hpd_inverse(a: &CMat) -> Result<CMat> {
    hpd_solve(a, &identity(a.nrows()))
}

/// `A⁻¹ᐟ²` for Hermitian positive definite `A`, plus the spectral condition number.
pub fn inverse_sqrt_hpd(a: &CMat) -> Result<(CMat, f64)> {
    let (v, lam) = eigh_descending(a)?;
    let max = lam.first().copied().unwrap_or(0.0);
    let min = lam.last().copied().unwrap_or(0.0);
    let condition = if min > 0.0 { max / min } else { f64::INFINITY };
    if !(min > 0.0) {
        return Ok((CMat::zeros(a.nrows(), a.ncols()), condition));
    }
    let d: Vec<f64> = lam.iter().map(|l| 1.0 / l.sqrt()).collect();
    Ok((scale_columns(&v, &d) * v.adjoint(), condition))
}

pub fn column(v: &[C64]) -> CMat {
    CMat::from_column_slice(v.len(), 1, v)
}

pub fn to_dvector(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}
