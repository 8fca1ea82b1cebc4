//! Channel configuration and block sampling for `Y = √(snr/n_t)·H·X + N`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::matops::ComplexMatrix;

/// Random substream type used for every sampling path in the crate.
pub type Substream = ChaCha8Rng;

/// Antenna counts, coherence blocklength and per-receive-antenna SNR.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelConfig {
    n_t: usize,
    n_r: usize,
    n_b: usize,
    snr: f64,
}

impl ChannelConfig {
    /// Validates `n_t ≥ n_r ≥ 1`, `n_b ≥ n_t` and a finite positive `snr` (linear).
    pub fn new(n_t: usize, n_r: usize, n_b: usize, snr: f64) -> Result<Self> {
        if n_r == 0 || n_t == 0 || n_b == 0 {
            return Err(Error::InvalidArgument(
                "antenna counts and blocklength must be at least 1".into(),
            ));
        }
        if n_t < n_r {
            return Err(Error::InvalidArgument(format!(
                "need n_t >= n_r, got n_t = {n_t}, n_r = {n_r}"
            )));
        }
        if n_b < n_t {
            return Err(Error::InvalidArgument(format!(
                "need n_b >= n_t, got n_b = {n_b}, n_t = {n_t}"
            )));
        }
        if !(snr.is_finite() && snr > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "snr must be finite and positive, got {snr}"
            )));
        }
        Ok(Self { n_t, n_r, n_b, snr })
    }

    /// Like [`ChannelConfig::new`] but only requires `n_b ≥ n_r`, admitting
    /// blocks shorter than the transmit array (for example `(2, 1, 1)`).
    /// The pilot baselines reject such configurations.
    pub fn short_block(n_t: usize, n_r: usize, n_b: usize, snr: f64) -> Result<Self> {
        if n_b >= n_t {
            return Self::new(n_t, n_r, n_b, snr);
        }
        Self::new(n_t, n_r, n_t, snr)?;
        if n_b < n_r {
            return Err(Error::InvalidArgument(format!(
                "need n_b >= n_r, got n_b = {n_b}, n_r = {n_r}"
            )));
        }
        Ok(Self { n_t, n_r, n_b, snr })
    }

    /// Whether `n_b ≥ n_t` (always true unless built by `short_block`).
    pub fn is_full_block(&self) -> bool {
        self.n_b >= self.n_t
    }

    pub fn n_t(&self) -> usize {
        self.n_t
    }

    pub fn n_r(&self) -> usize {
        self.n_r
    }

    pub fn n_b(&self) -> usize {
        self.n_b
    }

    pub fn snr(&self) -> f64 {
        self.snr
    }

    /// Per-transmit-antenna ratio `snr / n_t`.
    pub fn rho(&self) -> f64 {
        self.snr / self.n_t as f64
    }

    /// Same antennas and blocklength at another SNR.
    pub fn with_snr(&self, snr: f64) -> Result<Self> {
        Self::short_block(self.n_t, self.n_r, self.n_b, snr)
    }
}

/// One fading block: channel, input and output.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockSample {
    pub h: ComplexMatrix<f64>,
    pub x: ComplexMatrix<f64>,
    pub y: ComplexMatrix<f64>,
}

/// Circularly-symmetric complex Gaussian with unit total variance.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn complex_normal_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> ComplexMatrix<f64> {
    ComplexMatrix::from_fn(rows, cols, |_, _| complex_normal(rng))
}

/// Draws `H`, `X` and `N` with IID unit-variance complex Gaussian entries and
/// forms the output block.
pub fn sample_block<R: Rng + ?Sized>(config: &ChannelConfig, rng: &mut R) -> BlockSample {
    let h = complex_normal_matrix(config.n_r, config.n_t, rng);
    let x = complex_normal_matrix(config.n_t, config.n_b, rng);
    let gain = config.rho().sqrt();
    let hx = h.matmul(&x).expect("conformant by construction");
    let y = ComplexMatrix::from_fn(config.n_r, config.n_b, |i, j| {
        hx[(i, j)] * gain + complex_normal(rng)
    });
    BlockSample { h, x, y }
}

/// Independent substream `index` of the generator seeded by `master`.
pub fn substream(master: u64, index: u64) -> Substream {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng
}

/// SplitMix64 finalizer over `(master, index)`; used for per-point seeds.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master
        .wrapping_add(index.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Coherence blocklength `⌊1/(2·f_m·t_s)⌋`, at least 1.
pub fn coherence_blocklength(doppler_hz: f64, symbol_period_s: f64) -> Result<usize> {
    if !(doppler_hz > 0.0 && doppler_hz.is_finite()) || !(symbol_period_s > 0.0 && symbol_period_s.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "Doppler frequency and symbol period must be positive, got {doppler_hz} Hz, {symbol_period_s} s"
        )));
    }
    let n = (1.0 / (2.0 * doppler_hz * symbol_period_s)).floor();
    Ok(if n < 1.0 { 1 } else { n as usize })
}

/// Maximum Doppler shift `(v/c)·f_c` for speed in m/s and carrier in Hz.
pub fn doppler_frequency(speed_mps: f64, carrier_hz: f64) -> f64 {
    const SPEED_OF_LIGHT: f64 = 299_792_458.0;
    speed_mps / SPEED_OF_LIGHT * carrier_hz
}

pub fn snr_db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> Result<f64> {
    if x > 0.0 {
        Ok(10.0 * x.log10())
    } else {
        Err(Error::InvalidArgument(format!(
            "decibels of non-positive ratio {x}"
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn config_validation() {
        assert!(ChannelConfig::new(2, 2, 4, 1.0).is_ok());
        assert!(ChannelConfig::new(1, 2, 4, 1.0).is_err());
        assert!(ChannelConfig::new(3, 1, 2, 1.0).is_err());
        assert!(ChannelConfig::new(1, 1, 1, 0.0).is_err());
        assert!(ChannelConfig::new(1, 1, 1, f64::INFINITY).is_err());
        assert!(ChannelConfig::new(0, 0, 1, 1.0).is_err());
        let short = ChannelConfig::short_block(2, 1, 1, 1.0).unwrap();
        assert!(!short.is_full_block());
        assert!(ChannelConfig::short_block(3, 2, 1, 1.0).is_err());
        assert!(ChannelConfig::short_block(1, 2, 4, 1.0).is_err());
    }

    #[test]
    fn block_shapes() {
        let cfg = ChannelConfig::new(2, 2, 4, 1.0).unwrap();
        let s = sample_block(&cfg, &mut substream(7, 0));
        assert_eq!((s.h.rows(), s.h.cols()), (2, 2));
        assert_eq!((s.x.rows(), s.x.cols()), (2, 4));
        assert_eq!((s.y.rows(), s.y.cols()), (2, 4));
    }

    #[test]
    fn sampling_is_deterministic() {
        let cfg = ChannelConfig::new(2, 1, 3, 2.0).unwrap();
        let a = sample_block(&cfg, &mut substream(11, 3));
        let b = sample_block(&cfg, &mut substream(11, 3));
        assert_eq!(a, b);
        let c = sample_block(&cfg, &mut substream(11, 4));
        assert_ne!(a, c);
    }

    #[test]
    fn output_power_siso() {
        // |y|² has mean 1 + snr = 2 and variance 6 at snr = 1.
        let cfg = ChannelConfig::new(1, 1, 1, 1.0).unwrap();
        let mut rng = substream(2024, 0);
        let n = 100_000;
        let mean = (0..n)
            .map(|_| sample_block(&cfg, &mut rng).y[(0, 0)].norm_sqr())
            .sum::<f64>()
            / n as f64;
        assert!((1.98..=2.02).contains(&mean), "mean {mean}");
    }

    #[test]
    fn blocklength_mapping() {
        assert_eq!(coherence_blocklength(50.0, 100e-6).unwrap(), 100);
        let fm = doppler_frequency(120.0 / 3.6, 2e9);
        assert_relative_eq!(fm, 222.222, max_relative = 1e-3);
        assert_eq!(coherence_blocklength(fm, 100e-6).unwrap(), 22);
        assert_eq!(coherence_blocklength(10e3, 100e-6).unwrap(), 1);
        assert!(coherence_blocklength(0.0, 1e-4).is_err());
        assert!(coherence_blocklength(10.0, -1e-4).is_err());
    }

    #[test]
    fn decibels() {
        assert_eq!(snr_db_to_linear(0.0), 1.0);
        assert_relative_eq!(snr_db_to_linear(10.0), 10.0, max_relative = 1e-15);
        for db in [-30.0, -3.3, 0.0, 7.5, 40.0] {
            let back = linear_to_db(snr_db_to_linear(db)).unwrap();
            assert!((back - db).abs() <= 1e-12 * db.abs().max(1.0));
        }
        assert!(linear_to_db(0.0).is_err());
    }
}
