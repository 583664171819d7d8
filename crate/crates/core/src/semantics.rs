//! Semantic latent spaces: real/complex pairing, pilot whitening,
//! cross-covariance and its best low-rank approximation, plus a synthetic
//! Gaussian-mixture generator standing in for pretrained encoders.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    c, complex_gaussian, frob2, inverse_sqrt_hpd, real_gaussian, scale_columns, svd_descending, CMat,
    RMat, C64,
};

/// Largest accepted condition number of the pilot Gram matrix.
pub const MAX_GRAM_CONDITION: f64 = 1e12;

/// Pairs the first half of `s` with the second half: `x_i = s_i + j·s_{i+d/2}`.
pub fn pair_real_to_complex(s: &[f64]) -> Result<Vec<C64>> {
    if !s.len().is_multiple_of(2) {
        return Err(Error::domain(format!(
            "cannot pair a real vector of odd length {}",
            s.len()
        )));
    }
    let h = s.len() / 2;
    Ok((0..h).map(|i| c(s[i], s[i + h])).collect())
}

/// Inverse of [`pair_real_to_complex`].
pub fn unpair_complex_to_real(y: &[C64]) -> Vec<f64> {
    y.iter().map(|z| z.re).chain(y.iter().map(|z| z.im)).collect()
}

/// Column-wise pairing of a `d × n` real matrix into `d/2 × n` complex.
pub fn pair_columns(s: &RMat) -> Result<CMat> {
    if !s.nrows().is_multiple_of(2) {
        return Err(Error::domain(format!(
            "cannot pair latent vectors of odd length {}",
            s.nrows()
        )));
    }
    let h = s.nrows() / 2;
    Ok(CMat::from_fn(h, s.ncols(), |i, j| c(s[(i, j)], s[(i + h, j)])))
}

pub fn unpair_columns(y: &CMat) -> RMat {
    let h = y.nrows();
    RMat::from_fn(2 * h, y.ncols(), |i, j| {
        if i < h {
            y[(i, j)].re
        } else {
            y[(i - h, j)].im
        }
    })
}

#[derive(Debug, Clone)]
pub struct Whitening {
    /// Whitened pilots, `(1/n)·X·Xᴴ = I`.
    pub x: CMat,
    /// Inverse principal square root of the sample Gram.
    pub w: CMat,
    pub condition: f64,
}

/// Whitens pilot columns so their sample Gram is the identity.
pub fn whiten(xraw: &CMat) -> Result<Whitening> {
    let (dim, n) = xraw.shape();
    if n < dim || n == 0 {
        return Err(Error::SingularPilots {
            link: None,
            condition: f64::INFINITY,
        });
    }
    let gram = (xraw * xraw.adjoint()) / c(n as f64, 0.0);
    let (w, condition) = inverse_sqrt_hpd(&gram)?;
    if !(condition <= MAX_GRAM_CONDITION) {
        return Err(Error::SingularPilots {
            link: None,
            condition,
        });
    }
    Ok(Whitening {
        x: &w * xraw,
        w,
        condition,
    })
}

/// `P = Y·Xᴴ`.
pub fn cross_covariance(x: &CMat, y: &CMat) -> Result<CMat> {
    if x.ncols() != y.ncols() {
        return Err(Error::domain(format!(
            "pilot count mismatch: X has {} columns, Y has {}",
            x.ncols(),
            y.ncols()
        )));
    }
    Ok(y * x.adjoint())
}

/// Thin SVD of a cross-covariance, kept so several truncation ranks can be taken.
#[derive(Debug, Clone)]
pub struct CrossCovarianceSvd {
    pub u: CMat,
    pub sigma: Vec<f64>,
    pub q: CMat,
}

impl CrossCovarianceSvd {
    pub fn new(p: &CMat) -> Result<Self> {
        let (u, sigma, q) = svd_descending(p)?;
        Ok(CrossCovarianceSvd { u, sigma, q })
    }

    pub fn max_rank(&self) -> usize {
        self.sigma.len()
    }

    pub fn truncate(&self, r: usize) -> Result<Truncation> {
        if r == 0 || r > self.max_rank() {
            return Err(Error::domain(format!(
                "truncation rank {r} outside 1..={}",
                self.max_rank()
            )));
        }
        Ok(Truncation {
            u: self.u.columns(0, r).into_owned(),
            sigma: self.sigma[..r].to_vec(),
            q: self.q.columns(0, r).into_owned(),
            discarded_energy: self.sigma[r..].iter().map(|s| s * s).sum(),
        })
    }
}

/// Best rank-`r` approximation `Ũ·diag(σ̃)·Q̃ᴴ`.
#[derive(Debug, Clone)]
pub struct Truncation {
    pub u: CMat,
    pub sigma: Vec<f64>,
    pub q: CMat,
    /// Sum of the squared discarded singular values.
    pub discarded_energy: f64,
}

impl Truncation {
    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    pub fn sigma2(&self) -> Vec<f64> {
        self.sigma.iter().map(|s| s * s).collect()
    }

    pub fn reconstruct(&self) -> CMat {
        scale_columns(&self.u, &self.sigma) * self.q.adjoint()
    }
}

pub fn truncate(p: &CMat, r: usize) -> Result<Truncation> {
    let limit = p.nrows().min(p.ncols());
    if r == 0 || r > limit {
        return Err(Error::domain(format!("truncation rank {r} outside 1..={limit}")));
    }
    CrossCovarianceSvd::new(p)?.truncate(r)
}

/// Pilot set of one link.
#[derive(Debug, Clone)]
pub struct SemanticPilots {
    /// Whitened transmitter pilots, `d/2 × n`.
    pub x: CMat,
    /// Receiver pilots, `m/2 × n` (not whitened).
    pub y: CMat,
    /// `P = Y·Xᴴ`.
    pub p: CMat,
    pub n: usize,
    pub labels: Option<Vec<usize>>,
    /// Transmitter whitening matrix; it acts as the right factor of the precoder.
    pub whitening: CMat,
    /// `tr(Y·Yᴴ)`.
    pub sy: f64,
}

impl SemanticPilots {
    /// Whitens raw paired pilots of link `link` and forms the cross-covariance.
    pub fn from_raw(xraw: &CMat, yraw: CMat, labels: Option<Vec<usize>>, link: usize) -> Result<Self> {
        let wh = whiten(xraw).map_err(|e| match e {
            Error::SingularPilots { condition, .. } => Error::SingularPilots {
                link: Some(link),
                condition,
            },
            other => other,
        })?;
        let p = cross_covariance(&wh.x, &yraw)?;
        if let Some(l) = &labels {
            if l.len() != xraw.ncols() {
                return Err(Error::domain("label count does not match pilot count"));
            }
        }
        Ok(SemanticPilots {
            n: xraw.ncols(),
            sy: frob2(&yraw),
            x: wh.x,
            y: yraw,
            p,
            labels,
            whitening: wh.w,
        })
    }
}

/// Shape of the shared latent mixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LatentParams {
    /// Dimension of the shared latent `z`.
    pub true_dim: usize,
    pub class_count: usize,
    /// Radius of the sphere carrying the class means.
    pub class_separation: f64,
    /// Observation noise added in each encoder's space.
    pub noise_std: f64,
}

impl Default for LatentParams {
    fn default() -> Self {
        LatentParams {
            true_dim: 48,
            class_count: 10,
            class_separation: 3.5,
            noise_std: 0.3,
        }
    }
}

impl LatentParams {
    pub fn validate(&self, path: &str) -> Result<()> {
        if self.true_dim == 0 {
            return Err(Error::config(format!("{path}.true_dim"), "must be at least 1"));
        }
        if self.class_count == 0 {
            return Err(Error::config(format!("{path}.class_count"), "must be at least 1"));
        }
        if !(self.class_separation >= 0.0) {
            return Err(Error::config(format!("{path}.class_separation"), "must be non-negative"));
        }
        if !(self.noise_std >= 0.0) {
            return Err(Error::config(format!("{path}.noise_std"), "must be non-negative"));
        }
        Ok(())
    }

    /// Class means, one column per class, on the sphere of radius `class_separation`.
    pub fn class_means<R: Rng + ?Sized>(&self, rng: &mut R) -> RMat {
        let mut means = real_gaussian(rng, self.true_dim, self.class_count);
        for mut col in means.column_iter_mut() {
            let norm = col.norm();
            if norm > 0.0 {
                col *= self.class_separation / norm;
            }
        }
        means
    }
}

/// Two encoders observing a shared Gaussian-mixture latent through different linear maps.
///
/// A sample of class `c` is `z = μ_c + N(0, I)`; the transmitter sees `A·z + noise`
/// and the receiver `B·z + noise`.
#[derive(Debug, Clone)]
pub struct LatentModel {
    pub params: LatentParams,
    pub tx_dim: usize,
    pub rx_dim: usize,
    /// `true_dim × class_count`.
    pub class_means: RMat,
    /// `A`, `tx_dim × true_dim`.
    pub tx_mix: RMat,
    /// `B`, `rx_dim × true_dim`.
    pub rx_mix: RMat,
}

impl LatentModel {
    pub fn new(params: LatentParams, class_means: RMat, tx_mix: RMat, rx_mix: RMat) -> Result<Self> {
        params.validate("latent")?;
        let (tx_dim, rx_dim) = (tx_mix.nrows(), rx_mix.nrows());
        if tx_dim % 2 != 0 || rx_dim % 2 != 0 || tx_dim == 0 || rx_dim == 0 {
            return Err(Error::domain("latent dimensions must be even and positive"));
        }
        if tx_mix.ncols() != params.true_dim
            || rx_mix.ncols() != params.true_dim
            || class_means.shape() != (params.true_dim, params.class_count)
        {
            return Err(Error::domain("mixing matrices do not match the latent dimension"));
        }
        Ok(LatentModel {
            params,
            tx_dim,
            rx_dim,
            class_means,
            tx_mix,
            rx_mix,
        })
    }

    /// Random Gaussian mixing matrices scaled by `1/√true_dim`.
    pub fn random<R: Rng + ?Sized>(
        params: LatentParams,
        class_means: RMat,
        tx_dim: usize,
        rx_dim: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let s = 1.0 / (params.true_dim as f64).sqrt();
        let a = real_gaussian(rng, tx_dim, params.true_dim) * s;
        let b = real_gaussian(rng, rx_dim, params.true_dim) * s;
        Self::new(params, class_means, a, b)
    }

    /// Class means mapped into the receiver's real latent space, `rx_dim × class_count`.
    pub fn rx_class_means(&self) -> RMat {
        &self.rx_mix * &self.class_means
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R, count: usize) -> (RMat, RMat, Vec<usize>) {
        let p = &self.params;
        let labels: Vec<usize> = (0..count).map(|_| rng.random_range(0..p.class_count)).collect();
        let mut z = real_gaussian(rng, p.true_dim, count);
        for (j, &lab) in labels.iter().enumerate() {
            let mut col = z.column_mut(j);
            col += self.class_means.column(lab);
        }
        let tx = &self.tx_mix * &z + real_gaussian(rng, self.tx_dim, count) * p.noise_std;
        let rx = &self.rx_mix * &z + real_gaussian(rng, self.rx_dim, count) * p.noise_std;
        (tx, rx, labels)
    }
}

/// Held-out transmitter latents, already whitened with the pilot whitening matrix.
#[derive(Debug, Clone)]
pub struct TestSet {
    pub x: CMat,
    pub labels: Vec<usize>,
}

impl TestSet {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Draws `n` pilot pairs and `n_test` held-out samples for one link.
pub fn synthesize_latents<R: Rng + ?Sized>(
    model: &LatentModel,
    n: usize,
    n_test: usize,
    link: usize,
    rng: &mut R,
) -> Result<(SemanticPilots, TestSet)> {
    let need = model.tx_dim.max(model.rx_dim);
    if n < need {
        return Err(Error::config(
            "latent.pilots",
            format!("{n} pilots are fewer than max(d, m) = {need}"),
        ));
    }
    let (tx, rx, labels) = model.draw(rng, n);
    let pilots = SemanticPilots::from_raw(&pair_columns(&tx)?, pair_columns(&rx)?, Some(labels), link)?;
    let (tx_test, _, test_labels) = model.draw(rng, n_test);
    let test = TestSet {
        x: &pilots.whitening * pair_columns(&tx_test)?,
        labels: test_labels,
    };
    Ok((pilots, test))
}

/// Complex Gaussian raw pilots, handy for tests that only need generic full-rank data.
pub fn random_raw_pilots<R: Rng + ?Sized>(rng: &mut R, dim: usize, n: usize) -> CMat {
    complex_gaussian(rng, dim, n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{identity, max_abs_diff, real, scaled_identity};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn pairing_examples() {
        assert_eq!(
            pair_real_to_complex(&[1.0, 2.0, 3.0, 4.0]).unwrap(),
            vec![c(1.0, 3.0), c(2.0, 4.0)]
        );
        assert_eq!(pair_real_to_complex(&[0.0; 6]).unwrap(), vec![c(0.0, 0.0); 3]);
        assert!(pair_real_to_complex(&[1.0, 2.0, 3.0]).is_err());
        assert_eq!(
            unpair_complex_to_real(&[c(1.0, 3.0), c(2.0, 4.0)]),
            vec![1.0, 2.0, 3.0, 4.0]
        );
        assert_eq!(unpair_complex_to_real(&[c(0.0, 1.0)]), vec![0.0, 1.0]);
    }

    proptest! {
        #[test]
        fn pairing_is_a_bijection(half in prop::collection::vec(-1e6f64..1e6, 0..16),
                                  other in prop::collection::vec(-1e6f64..1e6, 0..16)) {
            let h = half.len().min(other.len());
            let s: Vec<f64> = half[..h].iter().chain(other[..h].iter()).copied().collect();
            prop_assert_eq!(unpair_complex_to_real(&pair_real_to_complex(&s).unwrap()), s.clone());
            let y: Vec<C64> = (0..h).map(|i| c(half[i], other[i])).collect();
            prop_assert_eq!(pair_real_to_complex(&unpair_complex_to_real(&y)).unwrap(), y);
        }
    }

    #[test]
    fn column_pairing_matches_vector_pairing() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = real_gaussian(&mut rng, 6, 4);
        let p = pair_columns(&s).unwrap();
        for j in 0..4 {
            let col: Vec<f64> = s.column(j).iter().copied().collect();
            let expect = pair_real_to_complex(&col).unwrap();
            assert_eq!(p.column(j).iter().copied().collect::<Vec<_>>(), expect);
        }
        assert_eq!(unpair_columns(&p), s);
    }

    #[test]
    fn whitening_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let raw = random_raw_pilots(&mut rng, 5, 200);
        let white = whiten(&raw).unwrap();
        let gram = (&white.x * white.x.adjoint()) / real(200.0);
        assert!(max_abs_diff(&gram, &identity(5)) < 1e-8);

        // Already white input: W = I.
        let again = whiten(&white.x).unwrap();
        assert!(max_abs_diff(&again.w, &identity(5)) < 1e-8);
        // Twice a white matrix: W = I/2.
        let doubled = whiten(&(&white.x * real(2.0))).unwrap();
        assert!(max_abs_diff(&doubled.w, &scaled_identity(5, 0.5)) < 1e-8);
    }

    #[test]
    fn whitening_rejects_rank_deficiency() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let base = random_raw_pilots(&mut rng, 2, 50);
        // Third row duplicates the first.
        let raw = CMat::from_fn(3, 50, |i, j| base[(i % 2, j)]);
        assert!(matches!(whiten(&raw), Err(Error::SingularPilots { .. })));
        let err = SemanticPilots::from_raw(&raw, raw.clone(), None, 4).unwrap_err();
        assert!(err.to_string().contains("link 4"), "{err}");
        assert!(whiten(&random_raw_pilots(&mut rng, 4, 3)).is_err());
    }

    #[test]
    fn cross_covariance_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let n = 300;
        let x = whiten(&random_raw_pilots(&mut rng, 4, n)).unwrap().x;
        let p = cross_covariance(&x, &x).unwrap();
        assert!(max_abs_diff(&p, &scaled_identity(4, n as f64)) < 1e-8 * n as f64);
        assert_eq!(cross_covariance(&x, &CMat::zeros(3, n)).unwrap(), CMat::zeros(3, 4));

        let y = random_raw_pilots(&mut rng, 3, n);
        let p = cross_covariance(&x, &y).unwrap();
        // Entry-wise brute force over pilots.
        for a in 0..3 {
            for b in 0..4 {
                let mut acc = c(0.0, 0.0);
                for i in 0..n {
                    acc += y[(a, i)] * x[(b, i)].conj();
                }
                assert!((acc - p[(a, b)]).norm() < 1e-9);
            }
        }
        assert!(cross_covariance(&x, &random_raw_pilots(&mut rng, 3, n + 1)).is_err());
    }

    #[test]
    fn truncation_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let p = random_raw_pilots(&mut rng, 6, 4);
        let full = truncate(&p, 4).unwrap();
        assert!(max_abs_diff(&full.reconstruct(), &p) < 1e-10);
        assert!(full.discarded_energy < 1e-20);

        let d = CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![real(3.0), real(1.0)]));
        let t = truncate(&d, 1).unwrap();
        assert!((t.sigma[0] - 3.0).abs() < 1e-12);
        assert!(((frob2(&(&d - t.reconstruct()))).sqrt() - 1.0).abs() < 1e-12);

        // Squared residual equals the discarded energy from the full decomposition.
        let all = svd_descending(&p).unwrap().1;
        for r in 1..=4 {
            let t = truncate(&p, r).unwrap();
            let resid = frob2(&(&p - t.reconstruct()));
            let tail: f64 = all[r..].iter().map(|s| s * s).sum();
            assert!((resid - tail).abs() < 1e-10, "rank {r}");
            assert!((t.discarded_energy - tail).abs() < 1e-10);
            assert!(max_abs_diff(&(t.u.adjoint() * &t.u), &identity(r)) < 1e-10);
            assert!(max_abs_diff(&(t.q.adjoint() * &t.q), &identity(r)) < 1e-10);
        }
        assert!(truncate(&p, 0).is_err());
        assert!(truncate(&p, 5).is_err());
    }

    #[test]
    fn truncation_beats_random_rank_r_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let p = random_raw_pilots(&mut rng, 5, 4);
        for r in 1..4 {
            let best = frob2(&(&p - truncate(&p, r).unwrap().reconstruct()));
            for _ in 0..200 {
                let m = random_raw_pilots(&mut rng, 5, r) * random_raw_pilots(&mut rng, r, 4);
                assert!(best <= frob2(&(&p - m)) + 1e-12);
            }
        }
    }

    #[test]
    fn tied_singular_values_still_give_best_approximation() {
        // diag(2, 2, 1): any unit vector in the leading 2-d subspace is a valid basis.
        let d = CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![real(2.0), real(2.0), real(1.0)]));
        let t = truncate(&d, 2).unwrap();
        let expect = CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![real(2.0), real(2.0), real(0.0)]));
        assert!(max_abs_diff(&t.reconstruct(), &expect) < 1e-10);
    }

    fn small_params() -> LatentParams {
        LatentParams { true_dim: 8, class_count: 3, class_separation: 4.0, noise_std: 0.2 }
    }

    #[test]
    fn synthesized_pilots_are_white_and_deterministic() {
        let params = small_params();
        let build = || {
            let mut rng = ChaCha8Rng::seed_from_u64(77);
            let means = params.class_means(&mut rng);
            let model = LatentModel::random(params.clone(), means, 12, 10, &mut rng).unwrap();
            synthesize_latents(&model, 400, 50, 0, &mut rng).unwrap()
        };
        let (a, ta) = build();
        let (b, tb) = build();
        assert_eq!(a.x, b.x);
        assert_eq!(a.y, b.y);
        assert_eq!(ta.x, tb.x);
        assert_eq!(ta.labels, tb.labels);
        let gram = (&a.x * a.x.adjoint()) / real(400.0);
        assert!(max_abs_diff(&gram, &identity(6)) < 1e-8);
        assert!(max_abs_diff(&a.p, &(&a.y * a.x.adjoint())) == 0.0);
        assert_eq!(a.p.shape(), (5, 6));
    }

    #[test]
    fn single_class_labels_are_zero() {
        let params = LatentParams { class_count: 1, ..small_params() };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let means = params.class_means(&mut rng);
        let model = LatentModel::random(params, means, 8, 8, &mut rng).unwrap();
        let (p, t) = synthesize_latents(&model, 100, 10, 0, &mut rng).unwrap();
        assert!(p.labels.unwrap().iter().all(|&l| l == 0));
        assert!(t.labels.iter().all(|&l| l == 0));
    }

    #[test]
    fn identical_noiseless_encoders_align_up_to_whitening() {
        let params = LatentParams { true_dim: 8, class_count: 2, class_separation: 1.0, noise_std: 0.0 };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let means = params.class_means(&mut rng);
        let a = real_gaussian(&mut rng, 8, 8);
        let model = LatentModel::new(params, means, a.clone(), a).unwrap();
        let (p, _) = synthesize_latents(&model, 200, 1, 0, &mut rng).unwrap();
        // Y = W⁻¹·X.
        let winv = p.whitening.clone().try_inverse().unwrap();
        assert!(max_abs_diff(&p.y, &(winv * &p.x)) < 1e-9);
    }

    #[test]
    fn too_few_pilots_rejected() {
        let params = small_params();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let means = params.class_means(&mut rng);
        let model = LatentModel::random(params, means, 12, 10, &mut rng).unwrap();
        assert!(matches!(
            synthesize_latents(&model, 11, 5, 0, &mut rng),
            Err(Error::Config { .. })
        ));
    }
}
