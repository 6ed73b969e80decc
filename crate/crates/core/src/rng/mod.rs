//! Seeded random streams and the samplers the Gibbs algorithm needs.
//!
//! Every random quantity in the crate is drawn from an [`RngStream`]
//! identified by (root seed, stream id). Distinct ids give independent
//! ChaCha streams, so chains, replications, and forecast points can run
//! concurrently while the overall output stays bit-reproducible.

pub mod arms;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, Gamma, Poisson, StandardNormal};

use crate::error::{Error, Result};

pub use arms::{sample_arms, ArmsTarget};

/// Stream purpose tags. Combined with chain / replication / point indices
/// through [`stream_id`], they keep every consumer on its own substream.
pub mod purpose {
    pub const CHAIN_INIT: u64 = 1;
    pub const CHAIN_SWEEP: u64 = 2;
    pub const FORECAST_POINT: u64 = 3;
    pub const STUDY_DATA: u64 = 4;
    pub const STUDY_FIT: u64 = 5;
    pub const STUDY_FORECAST: u64 = 6;
    pub const CV_FIT: u64 = 7;
    pub const CV_FORECAST: u64 = 8;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds purpose and index parts into a single stream id.
pub fn stream_id(parts: &[u64]) -> u64 {
    let mut h = 0x51_7C_C1_B7_27_22_0A_95u64;
    for &p in parts {
        h = splitmix64(h ^ splitmix64(p));
    }
    h
}

/// A seeded, single-owner random stream.
#[derive(Debug, Clone)]
pub struct RngStream {
    root_seed: u64,
    id: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(root_seed: u64, id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(root_seed);
        rng.set_stream(id);
        Self { root_seed, id, rng }
    }

    /// Stream for a (purpose, indices...) tuple under a namespace. The
    /// namespace separates independent fits that share one root seed, such
    /// as the per-phi fits of a cross-validation grid.
    pub fn derive(root_seed: u64, namespace: u64, parts: &[u64]) -> Self {
        let mut all = Vec::with_capacity(parts.len() + 1);
        all.push(namespace);
        all.extend_from_slice(parts);
        Self::new(root_seed, stream_id(&all))
    }

    pub fn root_seed(&self) -> u64 {
        self.root_seed
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    /// Uniform draw on [0, 1).
    pub fn uniform(&mut self) -> f64 {
        self.rng.random()
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    pub fn normal_vector(&mut self, n: usize) -> DVector<f64> {
        DVector::from_fn(n, |_, _| self.standard_normal())
    }

    pub(crate) fn inner(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}

/// Draw from the inverse gamma distribution with density proportional to
/// x^(-shape-1) exp(-scale/x), realized as scale / Gamma(shape, 1).
pub fn sample_inverse_gamma(rng: &mut RngStream, shape: f64, scale: f64) -> Result<f64> {
    if !(shape > 0.0 && scale > 0.0) || !shape.is_finite() || !scale.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "inverse gamma needs positive shape and scale (got {shape}, {scale})"
        )));
    }
    let gamma = Gamma::new(shape, 1.0)
        .map_err(|e| Error::InvalidParameter(format!("gamma sampler: {e}")))?;
    let g: f64 = gamma.sample(rng.inner());
    Ok(scale / g)
}

/// Draw mean + L z with z iid standard normal, for a lower-triangular L with
/// covariance L L'.
pub fn sample_mvn(
    rng: &mut RngStream,
    mean: &DVector<f64>,
    chol_lower: &DMatrix<f64>,
) -> Result<DVector<f64>> {
    let n = mean.len();
    if chol_lower.nrows() != n || chol_lower.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: chol_lower.nrows(),
        });
    }
    let z = rng.normal_vector(n);
    Ok(mean + chol_lower * z)
}

/// Poisson draw; a zero rate is the point mass at zero.
pub fn sample_poisson(rng: &mut RngStream, rate: f64) -> Result<u64> {
    if rate.is_nan() || rate < 0.0 || rate.is_infinite() {
        return Err(Error::InvalidParameter(format!(
            "Poisson rate must be finite and nonnegative (got {rate})"
        )));
    }
    if rate == 0.0 {
        return Ok(0);
    }
    let dist = Poisson::new(rate)
        .map_err(|e| Error::InvalidParameter(format!("Poisson sampler: {e}")))?;
    let draw: f64 = dist.sample(rng.inner());
    Ok(draw as u64)
}

/// Student-t draw as normal / sqrt(chi2_df / df).
pub fn sample_student_t(rng: &mut RngStream, df: f64) -> Result<f64> {
    if !(df > 0.0) || !df.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "Student-t degrees of freedom must be positive (got {df})"
        )));
    }
    let chi = ChiSquared::new(df)
        .map_err(|e| Error::InvalidParameter(format!("chi-squared sampler: {e}")))?;
    let z = rng.standard_normal();
    let c: f64 = chi.sample(rng.inner());
    Ok(z / (c / df).sqrt())
}

/// Innovation law for simulated autoregressions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Innovations {
    Gaussian { sd: f64 },
    StudentT { df: f64 },
}

impl Innovations {
    fn draw(&self, rng: &mut RngStream) -> Result<f64> {
        match *self {
            Innovations::Gaussian { sd } => Ok(sd * rng.standard_normal()),
            Innovations::StudentT { df } => sample_student_t(rng, df),
        }
    }
}

/// Burn-in discarded before a simulated AR path is returned. With all DGP
/// coefficient sets the slowest root is well inside the unit circle, so 512
/// steps leave initial-condition bias below 1e-6 of the stationary variance.
pub const AR_BURN_IN: usize = 512;

/// Simulates a stationary AR(p) path of the requested length; empty
/// coefficients return pure innovations.
pub fn simulate_ar(
    rng: &mut RngStream,
    coeffs: &[f64],
    innovations: Innovations,
    len: usize,
) -> Result<Vec<f64>> {
    if !coeffs.is_empty() && !is_stationary(coeffs) {
        return Err(Error::NonStationaryCoefficients);
    }
    let p = coeffs.len();
    let total = len + if p == 0 { 0 } else { AR_BURN_IN };
    let mut path = Vec::with_capacity(total);
    for t in 0..total {
        let mut x = innovations.draw(rng)?;
        for (i, &c) in coeffs.iter().enumerate() {
            if t > i {
                x += c * path[t - 1 - i];
            }
        }
        path.push(x);
    }
    Ok(path.split_off(total - len))
}

/// Stationarity check through the companion-matrix eigenvalues: the process
/// is stationary iff they all lie strictly inside the unit circle.
fn is_stationary(coeffs: &[f64]) -> bool {
    let p = coeffs.len();
    if p == 1 {
        return coeffs[0].abs() < 1.0;
    }
    let companion = DMatrix::from_fn(p, p, |i, j| {
        if i == 0 {
            coeffs[j]
        } else if j == i - 1 {
            1.0
        } else {
            0.0
        }
    });
    companion
        .complex_eigenvalues()
        .iter()
        .all(|l| l.norm() < 1.0 - 1e-12)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_streams_reproduce_identical_sequences() {
        let mut a = RngStream::new(42, 7);
        let mut b = RngStream::new(42, 7);
        for _ in 0..100 {
            assert_eq!(a.uniform(), b.uniform());
        }
        let mut c = RngStream::new(42, 8);
        assert_ne!(a.uniform(), c.uniform());
    }

    #[test]
    fn derive_separates_namespaces() {
        let a = RngStream::derive(1, 0, &[purpose::CHAIN_SWEEP, 0]);
        let b = RngStream::derive(1, 1, &[purpose::CHAIN_SWEEP, 0]);
        assert_ne!(a.id(), b.id());
        assert_eq!(a.root_seed(), b.root_seed());
    }

    #[test]
    fn inverse_gamma_moments() {
        // IG(5, 2): mean = 2/4 = 0.5, variance = 4/(16*3) = 1/12
        let mut rng = RngStream::new(11, 0);
        let n = 1_000_000;
        let draws: Vec<f64> = (0..n)
            .map(|_| sample_inverse_gamma(&mut rng, 5.0, 2.0).unwrap())
            .collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
        // 3 standard errors of the mean; IG(5,2) has sd sqrt(1/12)
        let se_mean = (1.0f64 / 12.0).sqrt() / (n as f64).sqrt();
        assert!((mean - 0.5).abs() < 3.0 * se_mean, "mean {mean}");
        // variance of the sample variance needs the 4th moment; use a loose 5% band
        assert!((var - 1.0 / 12.0).abs() < 0.05 * (1.0 / 12.0), "var {var}");
        assert!(sample_inverse_gamma(&mut rng, 0.0, 1.0).is_err());
        assert!(sample_inverse_gamma(&mut rng, 1.0, -1.0).is_err());
    }

    #[test]
    fn mvn_zero_factor_returns_mean() {
        let mut rng = RngStream::new(3, 0);
        let mean = DVector::from_vec(vec![1.5, -2.0]);
        let l = DMatrix::zeros(2, 2);
        assert_eq!(sample_mvn(&mut rng, &mean, &l).unwrap(), mean);
        let bad = DMatrix::zeros(3, 3);
        assert!(sample_mvn(&mut rng, &mean, &bad).is_err());
    }

    #[test]
    fn poisson_edge_cases() {
        let mut rng = RngStream::new(5, 0);
        for _ in 0..50 {
            assert_eq!(sample_poisson(&mut rng, 0.0).unwrap(), 0);
        }
        assert!(sample_poisson(&mut rng, -1.0).is_err());
        assert!(sample_poisson(&mut rng, f64::NAN).is_err());
        assert!(sample_poisson(&mut rng, f64::INFINITY).is_err());
        // mean and variance both equal the rate
        let n = 1_000_000;
        let draws: Vec<f64> = (0..n)
            .map(|_| sample_poisson(&mut rng, 4.0).unwrap() as f64)
            .collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
        let se = 2.0 / (n as f64).sqrt();
        assert!((mean - 4.0).abs() < 3.0 * se, "mean {mean}");
        assert!((var - 4.0).abs() < 0.05 * 4.0, "var {var}");
    }

    #[test]
    fn empty_coefficients_return_pure_innovations() {
        let mut a = RngStream::new(9, 1);
        let path = simulate_ar(&mut a, &[], Innovations::Gaussian { sd: 1.0 }, 5).unwrap();
        let mut b = RngStream::new(9, 1);
        let direct: Vec<f64> = (0..5).map(|_| b.standard_normal()).collect();
        assert_eq!(path, direct);
    }

    #[test]
    fn nonstationary_coefficients_rejected() {
        let mut rng = RngStream::new(1, 0);
        assert!(matches!(
            simulate_ar(&mut rng, &[1.01], Innovations::Gaussian { sd: 1.0 }, 10),
            Err(Error::NonStationaryCoefficients)
        ));
        assert!(simulate_ar(&mut rng, &[0.5, 0.5], Innovations::Gaussian { sd: 1.0 }, 10).is_err());
        // the study's AR(3) coefficients are fine
        assert!(simulate_ar(&mut rng, &[0.2, -0.3, 0.1], Innovations::Gaussian { sd: 1.0 }, 10).is_ok());
    }
}
