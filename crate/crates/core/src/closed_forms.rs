//! Closed-form scalars: the conditional output entropy, the perfect-CSI
//! ergodic capacity, high-SNR slopes and the blocklength lower bound.
//!
//! Entropies are total bits per fading block; rates are bits/s/Hz.

use std::f64::consts::{E, LOG2_E, PI};

use crate::dd::DoubleDouble;
use crate::error::{Error, Result};
use crate::model::ChannelConfig;
use crate::quadrature::{integrate_vec, QuadSettings};
use crate::specfun::{log_factorial_u, scaled_exp_integral_table_dd};

/// Largest Wishart dimension `m` the closed form accepts.
pub const MAX_WISHART_DIM: usize = 8;
/// Largest sample count `n` the closed form accepts.
pub const MAX_WISHART_SAMPLES: usize = 1024;

/// Rounding budget of the double-double accumulation, relative to the
/// largest term of the alternating sum.
const DD_EPS: f64 = 1e-31;
const MAX_RELATIVE_ERROR: f64 = 1e-12;

/// `C(n, k)` as a double-double product of ratios.
fn binomial_dd(n: usize, k: usize) -> DoubleDouble {
    if k > n {
        return DoubleDouble::ZERO;
    }
    let k = k.min(n - k);
    (0..k).fold(DoubleDouble::ONE, |acc, t| acc * ((n - t) as f64) / ((t + 1) as f64))
}

/// `a! / b!` in double-double.
fn factorial_ratio_dd(a: usize, b: usize) -> DoubleDouble {
    if a >= b {
        ((b + 1)..=a).fold(DoubleDouble::ONE, |acc, t| acc * t as f64)
    } else {
        ((a + 1)..=b).fold(DoubleDouble::ONE, |acc, t| acc / t as f64)
    }
}

/// `E[log₂ det(I + rho·W)]` for a complex Wishart `W` of dimension `m` with `n`
/// degrees of freedom (`W = G·G†`, `G` an `m × n` standard complex Gaussian).
///
/// The alternating triple sum cancels roughly `n^(m−1)` worth of leading
/// digits, so the coefficients, exponential integrals and accumulation all run
/// in double-double arithmetic. The call fails if the measured cancellation
/// would still leave less than twelve correct digits.
pub fn wishart_logdet_mean(m: usize, n: usize, rho: f64) -> Result<f64> {
    if m == 0 || n < m {
        return Err(Error::InvalidArgument(format!(
            "Wishart mean needs n >= m >= 1, got m = {m}, n = {n}"
        )));
    }
    if m > MAX_WISHART_DIM || n > MAX_WISHART_SAMPLES {
        return Err(Error::UnsupportedSize(format!(
            "Wishart mean supports m <= {MAX_WISHART_DIM}, n <= {MAX_WISHART_SAMPLES}; got m = {m}, n = {n}"
        )));
    }
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "rho must be finite and positive, got {rho}"
        )));
    }
    let x = rho.recip();
    let free = n - m;
    let top = free + 2 * (m - 1);
    let scaled = scaled_exp_integral_table_dd(top + 1, x)?;
    // prefix[L] = Σ_{q=0}^{L} e^x E_{q+1}(x)
    let mut prefix = Vec::with_capacity(top + 1);
    let mut acc = DoubleDouble::ZERO;
    for q in 0..=top {
        acc += scaled[q + 1];
        prefix.push(acc);
    }

    let mut total = DoubleDouble::ZERO;
    let mut magnitude = 0.0f64;
    for i in 0..m {
        for j in 0..=i {
            let outer = binomial_dd(2 * i - 2 * j, i - j) * factorial_ratio_dd(2 * j, j);
            for l in 0..=2 * j {
                let coef = outer
                    * binomial_dd(2 * j + 2 * free, 2 * j - l)
                    * factorial_ratio_dd(free + l, free + j)
                    / factorial_ratio_dd(l, 0)
                    / 2f64.powi((2 * i - l) as i32);
                let term = coef * prefix[free + l];
                magnitude += term.hi.abs();
                total += if l % 2 == 0 { term } else { -term };
            }
        }
    }
    let value = total.to_f64();
    if !(value > 0.0) || magnitude * DD_EPS > MAX_RELATIVE_ERROR * value {
        return wishart_logdet_mean_kernel(m, n, rho);
    }
    Ok(value * LOG2_E)
}

/// `ln(N!) − (N ln N − N)` without the cancellation of the direct difference.
fn log_factorial_remainder(big_n: usize) -> Result<f64> {
    if big_n < 16 {
        let nf = big_n as f64;
        let base = if big_n == 0 { 0.0 } else { nf * nf.ln() - nf };
        return Ok(log_factorial_u(big_n as u64) - base);
    }
    let x = big_n as f64;
    let inv = x.recip();
    let inv2 = inv * inv;
    let series = inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 / 1680.0)));
    Ok(0.5 * (2.0 * PI * x).ln() + series)
}

/// Same expectation through the one-point density of an unordered Wishart
/// eigenvalue, `Σ_k k!/(k+N)!·[L_k^N(λ)]²·λ^N·e^{−λ}` with `N = n − m`.
///
/// Every term is positive, so there is no cancellation; accuracy is limited
/// by the quadrature tolerance (about 1e-13 relative). Used where the
/// alternating closed form runs out of double-double headroom.
pub fn wishart_logdet_mean_kernel(m: usize, n: usize, rho: f64) -> Result<f64> {
    if m == 0 || n < m {
        return Err(Error::InvalidArgument(format!(
            "Wishart mean needs n >= m >= 1, got m = {m}, n = {n}"
        )));
    }
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "rho must be finite and positive, got {rho}"
        )));
    }
    let big_n = n - m;
    let nf = big_n as f64;
    // ln[k!/(k+N)!] − (N ln N − N), so the λ-dependent part stays O(1).
    let mut offsets = Vec::with_capacity(m);
    let base = -log_factorial_remainder(big_n)?;
    let mut shift = 0.0;
    for k in 0..m {
        if k > 0 {
            shift += ((big_n + k) as f64).ln() - (k as f64).ln();
        }
        offsets.push(base - shift);
    }
    let density = |lam: f64| -> f64 {
        if lam <= 0.0 {
            return if big_n == 0 { offsets[0].exp() } else { 0.0 };
        }
        let log_weight = if big_n == 0 {
            -lam
        } else {
            let t = lam - nf;
            nf * (t / nf).ln_1p() - t
        };
        let (mut prev, mut cur) = (0.0f64, 1.0f64);
        let mut sum = 0.0;
        for (k, off) in offsets.iter().enumerate() {
            if k > 0 {
                let kf = (k - 1) as f64;
                let next = ((2.0 * kf + 1.0 + nf - lam) * cur - (kf + nf) * prev) / (kf + 1.0);
                prev = cur;
                cur = next;
            }
            if cur != 0.0 {
                sum += (off + log_weight + 2.0 * cur.abs().ln()).exp();
            }
        }
        sum
    };
    let (sqrt_n, sqrt_m) = ((n as f64).sqrt(), (m as f64).sqrt());
    let lo = (sqrt_n - sqrt_m - 7.0).max(0.0).powi(2);
    let hi = (sqrt_n + sqrt_m + 7.0).powi(2);
    let panels = 32;
    let breaks: Vec<f64> = (1..panels)
        .map(|i| lo + (hi - lo) * i as f64 / panels as f64)
        .collect();
    let settings = QuadSettings {
        rel_tol: 1e-13,
        abs_tol: 0.0,
        max_subdivisions: 2000,
    };
    let out = integrate_vec(
        |lam, o: &mut [f64]| o[0] = (rho * lam).ln_1p() * density(lam),
        1,
        lo,
        hi,
        &breaks,
        &settings,
    )?;
    Ok(out.values[0] * LOG2_E)
}

/// `log₂(π e)`, the entropy in bits of one unit-variance complex Gaussian entry.
pub fn log2_pi_e() -> f64 {
    (PI * E).log2()
}

/// Entropy `h(Y|X)` in bits per block.
pub fn cond_entropy(config: &ChannelConfig) -> Result<f64> {
    let n_b = config.n_b() as f64;
    let per_row = n_b * log2_pi_e() + wishart_logdet_mean(
        config.n_t().min(config.n_b()),
        config.n_t().max(config.n_b()),
        config.rho(),
    )?;
    Ok(config.n_r() as f64 * per_row)
}

/// Perfect-CSI ergodic capacity `E[log₂ det(I + (snr/n_t)·H·H†)]` in bits/s/Hz
/// for `n_t` transmit and `n_r` receive antennas.
pub fn perfect_csi_capacity_at(n_t: usize, n_r: usize, snr: f64) -> Result<f64> {
    if snr == 0.0 {
        return Ok(0.0);
    }
    if n_t == 0 || n_r == 0 {
        return Err(Error::InvalidArgument("antenna counts must be positive".into()));
    }
    wishart_logdet_mean(n_t.min(n_r), n_t.max(n_r), snr / n_t as f64)
}

/// Perfect-CSI ergodic capacity at the configuration's SNR; independent of `n_b`.
pub fn perfect_csi_capacity(config: &ChannelConfig) -> Result<f64> {
    perfect_csi_capacity_at(config.n_t(), config.n_r(), config.snr())
}

/// High-SNR slope without CSI, bits/s/Hz per 3 dB: `M·(1 − M/n_b)`, `M = min(n_t, n_r)`.
pub fn high_snr_slope_capacity(config: &ChannelConfig) -> f64 {
    let m = config.n_t().min(config.n_r()) as f64;
    m * (1.0 - m / config.n_b() as f64)
}

/// High-SNR slope of pilot-based transmission with power boosting: `M·(1 − n_t/n_b)`.
pub fn high_snr_slope_pilot(config: &ChannelConfig) -> f64 {
    let m = config.n_t().min(config.n_r()) as f64;
    m * (1.0 - config.n_t() as f64 / config.n_b() as f64)
}

/// `C − (n_t·n_r/n_b)·log₂(1 + snr·n_b/n_t)`; may be negative.
pub fn mi_lower_bound(config: &ChannelConfig) -> Result<f64> {
    let n_t = config.n_t() as f64;
    let n_b = config.n_b() as f64;
    let penalty = n_t * config.n_r() as f64 / n_b * (1.0 + config.snr() * n_b / n_t).log2();
    Ok(perfect_csi_capacity(config)? - penalty)
}
