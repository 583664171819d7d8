//! Closed-form per-link transceiver computations.
//!
//! Pilot convention: transmitter pilots are whitened so that `X·Xᴴ = n·I`
//! (unit sample covariance, which makes `tr(F·Fᴴ)` the average transmit
//! power). Every closed form below is stated against that convention. With
//! `A = H·F`, the pilot objective
//!
//! ```text
//! J(F, G) = (1/n)·‖Y − G·A·X‖²_F + tr(G·Rn·Gᴴ)
//! ```
//!
//! is minimized by `G = (1/n)·P·Aᴴ·(A·Aᴴ + Rn)⁻¹` and its minimum is
//!
//! ```text
//! J*(F) = (1/n)·tr(Y·Yᴴ) − (1/n²)·‖P‖²_F + (1/n²)·tr((n·Fᴴ·R_H·F + I)⁻¹·Pᴴ·P)
//! ```
//!
//! with `R_H = (1/n)·Hᴴ·Rn⁻¹·H`. Written for pilots normalized to `X·Xᴴ = I`
//! instead, the minimizer reads `P·Aᴴ·(A·Aᴴ + n·Rn)⁻¹` and the minimum loses the
//! factors `n` inside the trace; the two forms differ by that rescaling of the
//! pilots only.

use crate::channel::ChannelOp;
use crate::error::{Error, Result};
use crate::linalg::{
    eigh_descending, frob2, hermitian_part, hpd_solve, identity, real, scale_columns, scaled_identity,
    trace_of_product_re, trace_re, CMat,
};
use crate::semantics::Truncation;

fn check_shape(what: &str, m: &CMat, rows: usize, cols: usize) -> Result<()> {
    if m.shape() != (rows, cols) {
        return Err(Error::domain(format!(
            "{what} must be {rows}x{cols}, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

/// `Rn = Σ_j (H_j·F_j)(H_j·F_j)ᴴ + σ²·I` over the rivals `(H_j, F_j)`.
///
/// Any `T_j` with `T_j·T_jᴴ = F_j·F_jᴴ` may stand in for `F_j`.
pub fn muin_covariance<H: ChannelOp>(rivals: &[(&H, &CMat)], sigma2: f64, dim: usize) -> Result<CMat> {
    if !(sigma2 >= 0.0) {
        return Err(Error::domain("noise power must be non-negative"));
    }
    let mut rn = scaled_identity(dim, sigma2);
    for (h, f) in rivals {
        if h.rows() != dim || h.cols() != f.nrows() {
            return Err(Error::domain(format!(
                "rival channel {}x{} does not fit receiver dimension {dim} and precoder with {} rows",
                h.rows(),
                h.cols(),
                f.nrows()
            )));
        }
        let b = h.apply(f);
        rn += &b * b.adjoint();
    }
    Ok(hermitian_part(&rn))
}

/// `R_H = (1/n)·Hᴴ·Rn⁻¹·H`.
pub fn effective_channel_cov<H: ChannelOp>(h: &H, rn: &CMat, n: usize) -> Result<CMat> {
    check_shape("Rn", rn, h.rows(), h.rows())?;
    if n == 0 {
        return Err(Error::domain("pilot count must be positive"));
    }
    let rn_inv_h = hpd_solve(rn, &h.dense())?;
    let r = h.apply_adjoint(&rn_inv_h) / real(n as f64);
    Ok(hermitian_part(&r))
}

/// Eigendecomposition `R = V·diag(Λ)·Vᴴ`, `Λ` non-increasing, round-off negatives clamped to zero.
pub fn eig_descending(r: &CMat) -> Result<(CMat, Vec<f64>)> {
    let (v, mut lam) = eigh_descending(r)?;
    for l in &mut lam {
        if *l < 0.0 {
            *l = 0.0;
        }
    }
    Ok((v, lam))
}

/// `F = V·diag(√φ)·Q̃ᴴ`, where `φ` holds per-mode powers.
pub fn assemble_precoder(v: &CMat, phi: &[f64], q: &CMat) -> Result<CMat> {
    let r = phi.len();
    if let Some(bad) = phi.iter().find(|p| !(**p >= 0.0)) {
        return Err(Error::domain(format!("power entries must be non-negative, got {bad}")));
    }
    if v.ncols() < r || q.ncols() != r {
        return Err(Error::domain(format!(
            "precoder factors do not match {r} modes (V has {} columns, Q has {})",
            v.ncols(),
            q.ncols()
        )));
    }
    let amp: Vec<f64> = phi.iter().map(|p| p.sqrt()).collect();
    Ok(scale_columns(&v.columns(0, r).into_owned(), &amp) * q.adjoint())
}

/// Wiener equalizer for whitened pilots: `G = (1/n)·P·Aᴴ·(A·Aᴴ + Rn)⁻¹`, `A = H·F`.
///
/// This is the exact minimizer of the pilot objective under `X·Xᴴ = n·I`; the
/// `(A·Aᴴ + n·Rn)⁻¹` form corresponds to pilots scaled to `X·Xᴴ = I`.
pub fn wiener_equalizer<H: ChannelOp>(p: &CMat, h: &H, f: &CMat, rn: &CMat, n: usize) -> Result<CMat> {
    if n == 0 {
        return Err(Error::domain("pilot count must be positive"));
    }
    check_shape("F", f, h.cols(), p.ncols())?;
    check_shape("Rn", rn, h.rows(), h.rows())?;
    let a = h.apply(f);
    let system = &a * a.adjoint() + rn;
    let gh = hpd_solve(&system, &(&a * p.adjoint()))? / real(n as f64);
    Ok(gh.adjoint())
}

/// Pilot objective `(1/n)·‖Y − G·H·F·X‖² + tr(G·Rn·Gᴴ)`, the noise expectation taken exactly.
pub fn direct_objective<H: ChannelOp>(
    f: &CMat,
    g: &CMat,
    h: &H,
    rn: &CMat,
    x: &CMat,
    y: &CMat,
    n: usize,
) -> Result<f64> {
    check_shape("F", f, h.cols(), x.nrows())?;
    check_shape("G", g, y.nrows(), h.rows())?;
    check_shape("Rn", rn, h.rows(), h.rows())?;
    if x.ncols() != n || y.ncols() != n {
        return Err(Error::domain("pilot matrices must have n columns"));
    }
    let residual = y - g * h.apply(&(f * x));
    Ok(frob2(&residual) / n as f64 + trace_re(&(g * rn * g.adjoint())))
}

/// [`direct_objective`] evaluated from `P` and `tr(Y·Yᴴ)` alone, valid for whitened pilots.
pub fn pilot_objective<H: ChannelOp>(
    f: &CMat,
    g: &CMat,
    h: &H,
    rn: &CMat,
    p: &CMat,
    sy: f64,
    n: usize,
) -> Result<f64> {
    check_shape("F", f, h.cols(), p.ncols())?;
    check_shape("G", g, p.nrows(), h.rows())?;
    let nf = n as f64;
    let a = h.apply(f);
    let cross = trace_of_product_re(&(g * &a), &p.adjoint());
    let m = &a * a.adjoint() + rn;
    Ok(sy / nf - 2.0 * cross / nf + trace_re(&(g * m * g.adjoint())))
}

/// Minimum of the pilot objective over `G` for a fixed precoder, in closed form.
pub fn analytic_mse<H: ChannelOp>(f: &CMat, h: &H, rn: &CMat, p: &CMat, sy: f64, n: usize) -> Result<f64> {
    check_shape("F", f, h.cols(), p.ncols())?;
    let nf = n as f64;
    let rh = effective_channel_cov(h, rn, n)?;
    let inner = f.adjoint() * &rh * f * real(nf) + identity(f.ncols());
    let php = p.adjoint() * p;
    let t = trace_re(&hpd_solve(&inner, &php)?);
    Ok(sy / nf - frob2(p) / (nf * nf) + t / (nf * nf))
}

/// Minimum pilot objective for `F = V·diag(√φ)·Q̃ᴴ` built on the exact singular vectors of `P`.
///
/// Works at the `K·N_R` scale: `J* = (1/n)·S_y − (1/n²)·tr(D·Cᴴ·M⁻¹·C·D)` with
/// `C = H·V`, `D = diag(√φ·σ̃)` and `M = C·diag(φ)·Cᴴ + Rn`.
pub fn structured_mse<H: ChannelOp>(
    h: &H,
    v: &CMat,
    phi: &[f64],
    trunc: &Truncation,
    rn: &CMat,
    sy: f64,
    n: usize,
) -> Result<f64> {
    let r = phi.len();
    if trunc.rank() != r {
        return Err(Error::domain("power vector length differs from the truncation rank"));
    }
    let nf = n as f64;
    let cmat = h.apply(&v.columns(0, r).into_owned());
    let amp: Vec<f64> = phi.iter().map(|p| p.sqrt()).collect();
    let b = scale_columns(&cmat, &amp);
    let m = &b * b.adjoint() + rn;
    let d: Vec<f64> = amp.iter().zip(&trunc.sigma).map(|(a, s)| a * s).collect();
    let cd = scale_columns(&cmat, &d);
    let t = trace_of_product_re(&cd.adjoint(), &hpd_solve(&m, &cd)?);
    Ok(sy / nf - t / (nf * nf))
}

/// Per-mode gains of the diagonal power-allocation problem.
///
/// The payoff is `p(φ) = (1/n)·Σ φ_m·λ_m·σ²_m / (φ_m·λ_m + 1)`. Under the pilot
/// convention of this module the exact diagonal objective is obtained with
/// `λ_m = n·eig_m(R_H)` and `σ²_m = σ̃²_m / n`; [`ModeGains::from_decompositions`]
/// applies that rescaling.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeGains {
    pub lambda: Vec<f64>,
    pub sigma2: Vec<f64>,
    pub n: usize,
    /// `tr(Y·Yᴴ)`.
    pub sy: f64,
}

impl ModeGains {
    pub fn new(lambda: Vec<f64>, sigma2: Vec<f64>, n: usize, sy: f64) -> Result<Self> {
        if lambda.len() != sigma2.len() {
            return Err(Error::domain(format!(
                "{} eigenvalues but {} semantic gains",
                lambda.len(),
                sigma2.len()
            )));
        }
        if lambda.iter().chain(&sigma2).any(|v| !(*v >= 0.0)) {
            return Err(Error::domain("mode gains must be non-negative"));
        }
        if n == 0 {
            return Err(Error::domain("pilot count must be positive"));
        }
        Ok(ModeGains {
            lambda,
            sigma2,
            n,
            sy,
        })
    }

    /// Pairs the descending eigenvalues of `R_H` index-wise with the descending
    /// singular values of the truncated cross-covariance.
    pub fn from_decompositions(rh_eigenvalues: &[f64], trunc: &Truncation, n: usize, sy: f64) -> Result<Self> {
        let r = trunc.rank();
        if rh_eigenvalues.len() < r {
            return Err(Error::domain(format!(
                "{} channel modes cannot carry rank {r}",
                rh_eigenvalues.len()
            )));
        }
        let nf = n as f64;
        let lambda = rh_eigenvalues[..r].iter().map(|l| l.max(0.0) * nf).collect();
        let sigma2 = trunc.sigma.iter().map(|s| s * s / nf).collect();
        Self::new(lambda, sigma2, n, sy)
    }

    pub fn modes(&self) -> usize {
        self.lambda.len()
    }

    pub fn payoff(&self, phi: &[f64]) -> Result<f64> {
        payoff(phi, &self.lambda, &self.sigma2, self.n)
    }

    /// φ-independent part of the diagonal MSE. Energy outside the kept
    /// singular directions is never recovered, so it stays inside `S_y/n`.
    pub fn constant_part(&self) -> f64 {
        self.sy / self.n as f64
    }

    pub fn approx_mse(&self, phi: &[f64]) -> Result<f64> {
        Ok(self.constant_part() - self.payoff(phi)?)
    }
}

/// `(1/n)·Σ φ_m·λ_m·σ²_m / (φ_m·λ_m + 1)`.
pub fn payoff(phi: &[f64], lambda: &[f64], sigma2: &[f64], n: usize) -> Result<f64> {
    if phi.len() != lambda.len() || phi.len() != sigma2.len() {
        return Err(Error::domain(format!(
            "length mismatch: φ {}, λ {}, σ² {}",
            phi.len(),
            lambda.len(),
            sigma2.len()
        )));
    }
    if phi.iter().any(|p| !(*p >= 0.0)) {
        return Err(Error::domain("power entries must be non-negative"));
    }
    let s: f64 = phi
        .iter()
        .zip(lambda)
        .zip(sigma2)
        .map(|((&p, &l), &s2)| {
            let g = p * l;
            if g.is_infinite() {
                s2
            } else {
                g * s2 / (g + 1.0)
            }
        })
        .sum();
    Ok(s / n as f64)
}

/// Diagonal MSE `(1/n)·S_y − p(φ)`.
pub fn approx_diagonal_mse(phi: &[f64], lambda: &[f64], sigma2: &[f64], n: usize, sy: f64) -> Result<f64> {
    ModeGains::new(lambda.to_vec(), sigma2.to_vec(), n, sy)?.approx_mse(phi)
}

/// Everything one link holds after a design step.
#[derive(Debug, Clone)]
pub struct TransceiverState {
    /// Precoder `F`, `K·N_T × d/2`.
    pub f: CMat,
    /// Equalizer `G`, `m/2 × K·N_R`.
    pub g: CMat,
    /// Per-mode powers.
    pub phi: Vec<f64>,
    /// MUIN covariance the equalizer was designed against.
    pub rn: CMat,
    /// Eigenvectors of `R_H` used by the precoder.
    pub v: CMat,
    /// Eigenvalues of `R_H`, non-increasing.
    pub lambda: Vec<f64>,
}

impl TransceiverState {
    /// Square factor `T = V·diag(√φ)` with `T·Tᴴ = F·Fᴴ`.
    pub fn tx_factor(&self) -> CMat {
        tx_factor(&self.v, &self.phi)
    }

    pub fn power(&self) -> f64 {
        self.phi.iter().sum()
    }
}

pub fn tx_factor(v: &CMat, phi: &[f64]) -> CMat {
    let amp: Vec<f64> = phi.iter().map(|p| p.max(0.0).sqrt()).collect();
    scale_columns(&v.columns(0, phi.len()).into_owned(), &amp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, complex_gaussian, max_abs_diff};
    use crate::semantics::{truncate, whiten};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    /// Small random link: whitened pilots, channel, rivals.
    struct Instance {
        h: CMat,
        f: CMat,
        rn: CMat,
        x: CMat,
        y: CMat,
        p: CMat,
        sy: f64,
        n: usize,
    }

    fn instance(seed: u64, d2: usize, m2: usize, nt: usize, nr: usize, n: usize) -> Instance {
        let mut r = rng(seed);
        let x = whiten(&complex_gaussian(&mut r, d2, n)).unwrap().x;
        let mix = complex_gaussian(&mut r, m2, d2);
        let y = &mix * &x + complex_gaussian(&mut r, m2, n) * real(0.3);
        let p = &y * x.adjoint();
        let h = complex_gaussian(&mut r, nr, nt);
        let f = complex_gaussian(&mut r, nt, d2) * real(0.5);
        let hr = complex_gaussian(&mut r, nr, 2);
        let fr = complex_gaussian(&mut r, 2, 3);
        let rn = muin_covariance(&[(&hr, &fr)], 0.2, nr).unwrap();
        Instance { sy: frob2(&y), h, f, rn, x, y, p, n }
    }

    #[test]
    fn muin_examples() {
        let none: [(&CMat, &CMat); 0] = [];
        assert_eq!(muin_covariance(&none, 0.5, 3).unwrap(), scaled_identity(3, 0.5));
        let i2 = identity(2);
        let rn = muin_covariance(&[(&i2, &i2)], 0.5, 2).unwrap();
        assert!(max_abs_diff(&rn, &scaled_identity(2, 1.5)) < 1e-15);

        let mut r = rng(1);
        let (h1, f1) = (complex_gaussian(&mut r, 4, 3), complex_gaussian(&mut r, 3, 5));
        let (h2, f2) = (complex_gaussian(&mut r, 4, 2), complex_gaussian(&mut r, 2, 5));
        let rn = muin_covariance(&[(&h1, &f1), (&h2, &f2)], 0.1, 4).unwrap();
        let mut brute = scaled_identity(4, 0.1);
        for (h, f) in [(&h1, &f1), (&h2, &f2)] {
            let a = h * f;
            for i in 0..4 {
                for j in 0..4 {
                    for k in 0..5 {
                        brute[(i, j)] += a[(i, k)] * a[(j, k)].conj();
                    }
                }
            }
        }
        assert!(max_abs_diff(&rn, &brute) < 1e-12);
        assert!(muin_covariance(&[(&h1, &f2)], 0.1, 4).is_err());
    }

    #[test]
    fn muin_grows_with_every_rival() {
        let mut r = rng(2);
        let hs: Vec<CMat> = (0..3).map(|_| complex_gaussian(&mut r, 4, 3)).collect();
        let fs: Vec<CMat> = (0..3).map(|_| complex_gaussian(&mut r, 3, 3)).collect();
        let mut prev = trace_re(&scaled_identity(4, 0.1));
        for k in 1..=3 {
            let rivals: Vec<(&CMat, &CMat)> = hs.iter().zip(&fs).take(k).collect();
            let t = trace_re(&muin_covariance(&rivals, 0.1, 4).unwrap());
            assert!(t > prev);
            prev = t;
        }
    }

    #[test]
    fn effective_channel_examples() {
        let rh = effective_channel_cov(&identity(3), &scaled_identity(3, 0.25), 1).unwrap();
        assert!(max_abs_diff(&rh, &scaled_identity(3, 4.0)) < 1e-14);
        let zero = CMat::zeros(3, 2);
        assert_eq!(effective_channel_cov(&zero, &identity(3), 5).unwrap(), CMat::zeros(2, 2));

        let inst = instance(3, 4, 3, 3, 4, 50);
        let rh = effective_channel_cov(&inst.h, &inst.rn, inst.n).unwrap();
        assert!(max_abs_diff(&rh, &rh.adjoint()) < 1e-12);
        let (_, lam) = eigh_descending(&rh).unwrap();
        assert!(lam.iter().all(|&l| l >= -1e-12));
    }

    #[test]
    fn eig_examples() {
        let (v, lam) = eig_descending(&identity(3)).unwrap();
        assert_eq!(lam, vec![1.0; 3]);
        assert!(max_abs_diff(&(v.adjoint() * &v), &identity(3)) < 1e-12);

        let d = CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![real(1.0), real(4.0)]));
        assert_eq!(eig_descending(&d).unwrap().1, vec![4.0, 1.0]);

        let b = complex_gaussian(&mut rng(4), 6, 3);
        let r = &b * b.adjoint();
        let (v, lam) = eig_descending(&r).unwrap();
        let back = scale_columns(&v, &lam) * v.adjoint();
        assert!(max_abs_diff(&back, &r) < 1e-9);
        assert!(lam.iter().all(|&l| l >= 0.0));
    }

    #[test]
    fn precoder_examples() {
        let v = identity(2);
        let q = identity(2);
        assert_eq!(assemble_precoder(&v, &[0.0, 0.0], &q).unwrap(), CMat::zeros(2, 2));
        let f = assemble_precoder(&identity(1), &[4.0], &identity(1)).unwrap();
        assert_eq!(f[(0, 0)], real(2.0));
        assert!(assemble_precoder(&v, &[-1.0, 1.0], &q).is_err());

        let mut r = rng(5);
        let (v, _) = eig_descending(&{
            let b = complex_gaussian(&mut r, 4, 4);
            &b * b.adjoint()
        })
        .unwrap();
        let q = truncate(&complex_gaussian(&mut r, 7, 6), 4).unwrap().q;
        let phi: Vec<f64> = (0..4).map(|_| r.random::<f64>() * 3.0).collect();
        let f = assemble_precoder(&v, &phi, &q).unwrap();
        assert!((trace_re(&(&f * f.adjoint())) - phi.iter().sum::<f64>()).abs() < 1e-10);
    }

    #[test]
    fn scalar_wiener() {
        // J(g) = (1 - g)² + g²σ² is minimized at g = 1/(1 + σ²).
        let sigma2 = 0.3;
        let one = identity(1);
        let g = wiener_equalizer(&one, &one, &one, &scaled_identity(1, sigma2), 1).unwrap();
        assert!((g[(0, 0)] - c(1.0 / (1.0 + sigma2), 0.0)).norm() < 1e-15);
        let p = 2.5;
        let g = wiener_equalizer(&scaled_identity(1, p), &one, &one, &scaled_identity(1, sigma2), 1).unwrap();
        assert!((g[(0, 0)].re - p / (1.0 + sigma2)).abs() < 1e-15);
    }

    #[test]
    fn wiener_without_signal_path_is_zero() {
        let inst = instance(6, 3, 2, 2, 3, 20);
        let g = wiener_equalizer(&inst.p, &CMat::zeros(3, 2), &inst.f, &inst.rn, inst.n).unwrap();
        assert!(g.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn wiener_is_a_minimizer() {
        let inst = instance(7, 4, 3, 3, 4, 60);
        let g = wiener_equalizer(&inst.p, &inst.h, &inst.f, &inst.rn, inst.n).unwrap();
        let base = direct_objective(&inst.f, &g, &inst.h, &inst.rn, &inst.x, &inst.y, inst.n).unwrap();
        let mut r = rng(70);
        let scale = crate::linalg::max_abs(&g);
        for _ in 0..1000 {
            let delta = complex_gaussian(&mut r, g.nrows(), g.ncols()) * real(1e-3 * scale);
            let j = direct_objective(&inst.f, &(&g + delta), &inst.h, &inst.rn, &inst.x, &inst.y, inst.n)
                .unwrap();
            assert!(j >= base - 1e-12);
        }
    }

    #[test]
    fn direct_objective_examples() {
        let inst = instance(8, 3, 2, 2, 3, 25);
        let g0 = CMat::zeros(2, 3);
        let j = direct_objective(&inst.f, &g0, &inst.h, &inst.rn, &inst.x, &inst.y, inst.n).unwrap();
        assert!((j - inst.sy / inst.n as f64).abs() < 1e-12);

        let one = identity(1);
        let x = CMat::from_element(1, 1, real(1.0));
        let j = direct_objective(&one, &one, &one, &CMat::zeros(1, 1), &x, &x, 1).unwrap();
        assert_eq!(j, 0.0);
    }

    #[test]
    fn evaluators_agree() {
        for seed in 0..10 {
            let inst = instance(100 + seed, 5, 4, 3, 4, 80);
            let g = wiener_equalizer(&inst.p, &inst.h, &inst.f, &inst.rn, inst.n).unwrap();
            let direct = direct_objective(&inst.f, &g, &inst.h, &inst.rn, &inst.x, &inst.y, inst.n).unwrap();
            let pilot = pilot_objective(&inst.f, &g, &inst.h, &inst.rn, &inst.p, inst.sy, inst.n).unwrap();
            let analytic = analytic_mse(&inst.f, &inst.h, &inst.rn, &inst.p, inst.sy, inst.n).unwrap();
            assert!((direct - analytic).abs() < 1e-8, "{direct} vs {analytic}");
            assert!((direct - pilot).abs() < 1e-8);
        }
    }

    #[test]
    fn analytic_mse_without_transmission() {
        let inst = instance(9, 3, 2, 2, 3, 30);
        let f0 = CMat::zeros(2, 3);
        let mse = analytic_mse(&f0, &inst.h, &inst.rn, &inst.p, inst.sy, inst.n).unwrap();
        // (1/n)S_y − (1/n²)‖P‖² + (1/n²)tr(PᴴP)
        assert!((mse - inst.sy / inst.n as f64).abs() < 1e-10);
    }

    #[test]
    fn scalar_cross_evaluator_agreement() {
        let one = identity(1);
        let rn = scaled_identity(1, 0.3);
        let x = CMat::from_element(1, 1, real(1.0));
        let y = CMat::from_element(1, 1, real(1.7));
        let p = &y * x.adjoint();
        let g = wiener_equalizer(&p, &one, &one, &rn, 1).unwrap();
        let d = direct_objective(&one, &g, &one, &rn, &x, &y, 1).unwrap();
        let a = analytic_mse(&one, &one, &rn, &p, frob2(&y), 1).unwrap();
        assert!((d - a).abs() < 1e-14);
    }

    #[test]
    fn payoff_examples() {
        let lam = [2.0, 0.5];
        let s2 = [1.0, 1.0];
        assert_eq!(payoff(&[0.0, 0.0], &lam, &s2, 1).unwrap(), 0.0);
        let p = payoff(&[2.0 / 3.0, 1.0 / 3.0], &lam, &s2, 1).unwrap();
        assert!((p - 5.0 / 7.0).abs() < 1e-15);
        let sat = payoff(&[1e18, 1e18], &lam, &s2, 4).unwrap();
        assert!((sat - 0.5).abs() < 1e-12);
        assert!(payoff(&[1.0], &lam, &s2, 1).is_err());
        assert!(approx_diagonal_mse(&[0.0, 0.0], &lam, &s2, 2, 3.0).unwrap() == 1.5);
    }

    #[test]
    fn diagonal_mse_is_exact_without_compression() {
        // K·N_T = d/2: the precoder spans the whole transmit latent space.
        let (d2, m2, nt, nr, n) = (4, 5, 4, 5, 120);
        let inst = instance(11, d2, m2, nt, nr, n);
        let trunc = truncate(&inst.p, nt).unwrap();
        let rh = effective_channel_cov(&inst.h, &inst.rn, n).unwrap();
        let (v, lam) = eig_descending(&rh).unwrap();
        let gains = ModeGains::from_decompositions(&lam, &trunc, n, inst.sy).unwrap();
        let mut r = rng(12);
        for _ in 0..20 {
            let phi: Vec<f64> = (0..nt).map(|_| r.random::<f64>() * 2.0).collect();
            let f = assemble_precoder(&v, &phi, &trunc.q).unwrap();
            let exact = analytic_mse(&f, &inst.h, &inst.rn, &inst.p, inst.sy, n).unwrap();
            let approx = gains.approx_mse(&phi).unwrap();
            let structured = structured_mse(&inst.h, &v, &phi, &trunc, &inst.rn, inst.sy, n).unwrap();
            assert!((exact - approx).abs() < 1e-8, "{exact} vs {approx}");
            assert!((exact - structured).abs() < 1e-8);
        }
    }

    #[test]
    fn diagonal_mse_is_exact_with_compression() {
        let (d2, m2, nt, nr, n) = (6, 5, 2, 3, 150);
        let inst = instance(13, d2, m2, nt, nr, n);
        let trunc = truncate(&inst.p, nt).unwrap();
        let rh = effective_channel_cov(&inst.h, &inst.rn, n).unwrap();
        let (v, lam) = eig_descending(&rh).unwrap();
        let gains = ModeGains::from_decompositions(&lam, &trunc, n, inst.sy).unwrap();
        let phi = [0.7, 0.4];
        let f = assemble_precoder(&v, &phi, &trunc.q).unwrap();
        let exact = analytic_mse(&f, &inst.h, &inst.rn, &inst.p, inst.sy, n).unwrap();
        assert!((exact - gains.approx_mse(&phi).unwrap()).abs() < 1e-8);
    }
}
