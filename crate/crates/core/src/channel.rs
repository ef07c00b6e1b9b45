//! Quasi-static flat Rayleigh fading with additive white Gaussian noise.

use num_complex::Complex;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{DstmError, Result};
use crate::matrix::ComplexMatrix;
use crate::scalar::Real;

/// One channel draw `H`, `N_R × N_T`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelRealization<T> {
    pub h: ComplexMatrix<T>,
}

/// Variance of each complex noise entry.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseParams<T> {
    sigma2: T,
}

impl<T: Real> NoiseParams<T> {
    pub fn new(sigma2: T) -> Result<Self> {
        if !sigma2.is_finite() || sigma2 < T::zero() {
            return Err(DstmError::InvalidParameter(format!("noise variance must be finite and non-negative, got {sigma2}")));
        }
        Ok(Self { sigma2 })
    }

    pub fn sigma2(&self) -> T {
        self.sigma2
    }
}

/// Draws one `CN(0, variance)` sample.
pub fn complex_gaussian<T, R>(rng: &mut R, variance: T) -> Complex<T>
where
    T: Real,
    StandardNormal: Distribution<T>,
    R: Rng + ?Sized,
{
    let s = (variance * T::lit(0.5)).sqrt();
    let re: T = StandardNormal.sample(rng);
    let im: T = StandardNormal.sample(rng);
    Complex::new(re * s, im * s)
}

pub fn sample_rayleigh<T, R>(n_r: usize, n_t: usize, rng: &mut R) -> ChannelRealization<T>
where
    T: Real,
    StandardNormal: Distribution<T>,
    R: Rng + ?Sized,
{
    assert!(n_r >= 1 && n_t >= 1, "channel dimensions must be at least 1");
    let h = ComplexMatrix::from_fn(n_r, n_t, |_, _| complex_gaussian(rng, T::one()));
    ChannelRealization { h }
}

/// `R = H·C + N`. No noise samples are drawn when the variance is zero.
pub fn transmit<T, R>(h: &ComplexMatrix<T>, c: &ComplexMatrix<T>, noise: &NoiseParams<T>, rng: &mut R) -> Result<ComplexMatrix<T>>
where
    T: Real,
    StandardNormal: Distribution<T>,
    R: Rng + ?Sized,
{
    let mut r = h.matmul(c)?;
    if noise.sigma2 > T::zero() {
        for i in 0..r.rows() {
            for j in 0..r.cols() {
                r[(i, j)] += complex_gaussian(rng, noise.sigma2);
            }
        }
    }
    Ok(r)
}

/// `σ² = 10^(−snr/10)`: unit received signal power per receive antenna.
pub fn snr_db_to_sigma2(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 10.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    type M = ComplexMatrix<f64>;

    #[test]
    fn snr_conversion() {
        assert_eq!(snr_db_to_sigma2(0.0), 1.0);
        assert!((snr_db_to_sigma2(10.0) - 0.1).abs() < 1e-15);
        assert!((snr_db_to_sigma2(20.0) - 0.01).abs() < 1e-15);
    }

    #[test]
    fn noise_rejects_negative_variance() {
        assert!(NoiseParams::new(-1e-3).is_err());
        assert!(NoiseParams::new(f64::NAN).is_err());
        assert!(NoiseParams::new(0.0).is_ok());
    }

    #[test]
    fn rayleigh_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000;
        let mut sum = [Complex::new(0.0, 0.0); 4];
        let mut sq = [0.0; 4];
        for _ in 0..n {
            let h = sample_rayleigh::<f64, _>(2, 2, &mut rng).h;
            for (k, z) in h.as_slice().iter().enumerate() {
                sum[k] += z;
                sq[k] += z.norm_sqr();
            }
        }
        for k in 0..4 {
            let mean = sum[k] / n as f64;
            assert!(mean.norm() < 0.02, "entry {k} mean {mean}");
            let var = sq[k] / n as f64 - mean.norm_sqr();
            assert!((var - 1.0).abs() < 0.03, "entry {k} variance {var}");
        }
    }

    #[test]
    fn rayleigh_is_seeded() {
        let a = sample_rayleigh::<f64, _>(3, 4, &mut ChaCha8Rng::seed_from_u64(4)).h;
        let b = sample_rayleigh::<f64, _>(3, 4, &mut ChaCha8Rng::seed_from_u64(4)).h;
        let bits = |m: &M| m.as_slice().iter().flat_map(|z| [z.re.to_bits(), z.im.to_bits()]).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn noiseless_transmission_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let quiet = NoiseParams::new(0.0).unwrap();
        assert_eq!(transmit(&M::identity(3), &M::identity(3), &quiet, &mut rng).unwrap(), M::identity(3));
        let h = sample_rayleigh::<f64, _>(2, 4, &mut rng).h;
        let c = M::from_fn(4, 4, |i, j| Complex::new((i * 4 + j) as f64, 1.0));
        assert_eq!(transmit(&h, &c, &quiet, &mut rng).unwrap(), &h * &c);
        assert!(transmit(&h, &M::identity(3), &quiet, &mut rng).is_err());
    }

    #[test]
    fn received_power_is_one_plus_sigma2() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let sigma2 = 0.4;
        let noise = NoiseParams::new(sigma2).unwrap();
        let (nr, nt) = (2, 4);
        let s = 0.5;
        let c = M::from_rows(&[
            vec![Complex::new(s, 0.0), Complex::new(s, 0.0), Complex::new(s, 0.0), Complex::new(s, 0.0)],
            vec![Complex::new(s, 0.0), Complex::new(-s, 0.0), Complex::new(s, 0.0), Complex::new(-s, 0.0)],
            vec![Complex::new(s, 0.0), Complex::new(s, 0.0), Complex::new(-s, 0.0), Complex::new(-s, 0.0)],
            vec![Complex::new(s, 0.0), Complex::new(-s, 0.0), Complex::new(-s, 0.0), Complex::new(s, 0.0)],
        ])
        .unwrap();
        assert!(c.unitarity_defect().unwrap() < 1e-15);
        let n = 100_000;
        let mut total = 0.0;
        for _ in 0..n {
            let h = sample_rayleigh::<f64, _>(nr, nt, &mut rng).h;
            total += transmit(&h, &c, &noise, &mut rng).unwrap().frobenius_norm_sqr();
        }
        let per_entry = total / (n * nr * nt) as f64;
        assert!((per_entry / (1.0 + sigma2) - 1.0).abs() < 0.03, "{per_entry}");
    }

    #[test]
    fn noise_is_white() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let noise = NoiseParams::new(1.0).unwrap();
        let zero = M::zeros(1, 1);
        let samples: Vec<Complex<f64>> = (0..1_000_000)
            .map(|_| transmit(&zero, &zero, &noise, &mut rng).unwrap()[(0, 0)])
            .collect();
        let power: f64 = samples.iter().map(|z| z.norm_sqr()).sum::<f64>() / samples.len() as f64;
        for lag in 1..4 {
            let acc: Complex<f64> = samples.windows(lag + 1).map(|w| w[lag] * w[0].conj()).sum();
            let rho = acc.norm() / (samples.len() - lag) as f64 / power;
            assert!(rho < 0.01, "lag {lag}: {rho}");
        }
    }
}
