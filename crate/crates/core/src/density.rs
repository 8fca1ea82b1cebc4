//! Output density `p(Y)` of the block-fading channel.
//!
//! Column `j` of the determinant matrix is scaled by `e^{-d_j}`, which turns
//! every entry into the bounded integral
//! `f̃_k(x) = ∫₀^∞ exp{−x/(ρz+1) − z}·z^{k−1+n_t−n_r}·ρ^{−(k−1)}·(ρz+1)^{−(n_b+1−n_r)} dz`
//! with `ρ = snr/n_t`, and cancels the `e^{−‖Y‖²}` prefactor exactly.

use std::f64::consts::PI;

use rand::Rng;

use crate::error::{Error, Result};
use crate::matops::{gram_eigenvalues, signed_log_det, GramSpectrum, RealMatrix};
use crate::model::{complex_normal_matrix, ChannelConfig};
use crate::quadrature::{integrate_vec, QuadSettings};
use crate::specfun::log_factorial_u;
use crate::stats::StreamingMoments;

/// `ln p(Y)` with diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogDensity {
    pub log_p: f64,
    /// The determinant ratio was strictly positive before the log.
    pub sign_consistent: bool,
    pub min_gap: f64,
}

/// Tables of `ln f̃_k` on `u = ln(1 + x)`, uniformly spaced, with PCHIP slopes.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityGrid {
    x_max: f64,
    step: f64,
    values: Vec<Vec<f64>>,
    slopes: Vec<Vec<f64>>,
}

impl DensityGrid {
    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn points(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    fn covers(&self, x: f64) -> bool {
        x <= self.x_max
    }

    fn eval(&self, k: usize, x: f64) -> f64 {
        let u = x.ln_1p();
        let last = self.points() - 1;
        let i = ((u / self.step) as usize).min(last - 1);
        let t = (u - i as f64 * self.step) / self.step;
        let (y0, y1) = (self.values[k][i], self.values[k][i + 1]);
        let (m0, m1) = (self.slopes[k][i] * self.step, self.slopes[k][i + 1] * self.step);
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * y0 + (t3 - 2.0 * t2 + t) * m0 + (-2.0 * t3 + 3.0 * t2) * y1 + (t3 - t2) * m1
    }
}

/// Fritsch–Carlson monotone slopes for uniformly spaced samples.
fn pchip_slopes(y: &[f64], h: f64) -> Vec<f64> {
    let n = y.len();
    let delta: Vec<f64> = y.windows(2).map(|w| (w[1] - w[0]) / h).collect();
    let mut m = vec![0.0; n];
    for i in 1..n - 1 {
        let (a, b) = (delta[i - 1], delta[i]);
        m[i] = if a * b <= 0.0 { 0.0 } else { 2.0 / (1.0 / a + 1.0 / b) };
    }
    let end = |d0: f64, d1: f64| {
        let s = (3.0 * d0 - d1) / 2.0;
        if s * d0 <= 0.0 {
            0.0
        } else if d0 * d1 <= 0.0 && s.abs() > 3.0 * d0.abs() {
            3.0 * d0
        } else {
            s
        }
    };
    if n == 2 {
        m[0] = delta[0];
        m[1] = delta[0];
    } else {
        m[0] = end(delta[0], delta[1]);
        m[n - 1] = end(delta[n - 2], delta[n - 3]);
    }
    m
}

/// Evaluator of `ln p(Y)` for one channel configuration; immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityEvaluator {
    config: ChannelConfig,
    rho: f64,
    quad: QuadSettings<f64>,
    grid: Option<DensityGrid>,
    // Exponent of z for k = 1, and of (ρz + 1) in the denominator.
    base_power: f64,
    denom_power: f64,
    constant: f64,
}

/// Importance-sampling estimate of `∫ p(Y) dY`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizationEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub samples: u64,
}

impl DensityEvaluator {
    pub fn new(config: ChannelConfig) -> Self {
        Self::with_quadrature(
            config,
            QuadSettings {
                rel_tol: 1e-10,
                abs_tol: 0.0,
                max_subdivisions: 400,
            },
        )
    }

    pub fn with_quadrature(config: ChannelConfig, quad: QuadSettings<f64>) -> Self {
        let (n_t, n_r, n_b) = (config.n_t(), config.n_r(), config.n_b());
        let constant = -((n_b * n_r) as f64) * PI.ln()
            - (1..=n_r).map(|k| log_factorial_u((n_t - k) as u64)).sum::<f64>();
        Self {
            config,
            rho: config.rho(),
            quad,
            grid: None,
            base_power: (n_t - n_r) as f64,
            denom_power: (n_b + 1 - n_r) as f64,
            constant,
        }
    }

    pub fn config(&self) -> &ChannelConfig {
        &self.config
    }

    /// `snr / n_t`.
    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn quadrature(&self) -> &QuadSettings<f64> {
        &self.quad
    }

    pub fn grid(&self) -> Option<&DensityGrid> {
        self.grid.as_ref()
    }

    /// Shared part of the log-integrand, `−x/(ρz+1) − z + a·ln z − β·ln(ρz+1)`.
    fn log_kernel(&self, x: f64, z: f64) -> f64 {
        let w = self.rho * z;
        let power = if self.base_power == 0.0 { 0.0 } else { self.base_power * z.ln() };
        -x / (w + 1.0) - z + power - self.denom_power * w.ln_1p()
    }

    fn log_kernel_slope(&self, x: f64, z: f64) -> f64 {
        let w = 1.0 + self.rho * z;
        x * self.rho / (w * w) - 1.0 + self.base_power / z - self.denom_power * self.rho / w
    }

    fn log_kernel_curvature(&self, x: f64, z: f64) -> f64 {
        let w = 1.0 + self.rho * z;
        let r2 = self.rho * self.rho;
        -2.0 * x * r2 / (w * w * w) - self.base_power / (z * z) + self.denom_power * r2 / (w * w)
    }

    /// Location and width of the bulk of the `k = 1` integrand.
    fn peak(&self, x: f64) -> (f64, f64) {
        let slope0 = if self.base_power > 0.0 {
            f64::INFINITY
        } else {
            x * self.rho - 1.0 - self.denom_power * self.rho
        };
        if slope0 <= 0.0 {
            // Maximum at the origin; the integrand decays at rate ≥ |slope0|.
            return (0.0, if slope0 < -1.0 { -1.0 / slope0 } else { 1.0 });
        }
        let mut hi = 1.0;
        while self.log_kernel_slope(x, hi) > 0.0 {
            hi *= 2.0;
        }
        let mut lo = 0.0;
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if self.log_kernel_slope(x, mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-12 * hi {
                break;
            }
        }
        let center = 0.5 * (lo + hi);
        let curv = self.log_kernel_curvature(x, center);
        let width = if curv < 0.0 { (-curv).sqrt().recip() } else { center.max(1.0) };
        (center, width.min(center.max(1.0)))
    }

    /// `ln f̃_k(x)` for every `k = 1..=n_r` by direct quadrature.
    pub fn ln_f_tilde_direct(&self, x: f64) -> Result<Vec<f64>> {
        if !(x >= 0.0 && x.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "f̃ argument must be finite and nonnegative, got {x}"
            )));
        }
        let n_r = self.config.n_r();
        let ln_rho = self.rho.ln();
        let (center, width) = self.peak(x);

        let mut cuts: Vec<f64> = Vec::with_capacity(8);
        if center > 0.0 {
            cuts.extend([0.25 * center, center - 3.0 * width, center + 3.0 * width, center + 10.0 * width]);
        } else {
            cuts.extend([4.0 * width, 16.0 * width, 64.0 * width]);
        }
        cuts.retain(|&c| c > 0.0);
        cuts.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        let mut upper = center + 40.0 * width + self.base_power + n_r as f64 + 10.0;

        // Per-component log shift: the largest log-integrand among the cuts.
        let shifts: Vec<f64> = (0..n_r)
            .map(|k| {
                cuts.iter()
                    .chain(std::iter::once(&upper))
                    .map(|&z| self.log_kernel(x, z) + k as f64 * (z.ln() - ln_rho))
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();
        // Component k is component k−1 times (z/ρ)·e^{s_{k−1} − s_k}.
        let ratios: Vec<f64> = shifts.windows(2).map(|w| (w[0] - w[1] - ln_rho).exp()).collect();
        let integrand = |z: f64, out: &mut [f64]| {
            let e = self.log_kernel(x, z) - shifts[0];
            out[0] = if e.is_nan() { 0.0 } else { e.exp() };
            for k in 1..out.len() {
                out[k] = out[k - 1] * z * ratios[k - 1];
            }
        };
        let cuts_in: Vec<f64> = cuts.iter().copied().filter(|&c| c < upper).collect();
        let o = integrate_vec(integrand, n_r, 0.0, upper, &cuts_in, &self.quad)?; let mut sums = o.values;

        // Tail: for z ≥ U the integrand is at most e^{−z}·z^{a_k}·ρ^{−(k−1)}·(ρU+1)^{−β}.
        for _ in 0..64 {
            let tail_ok = (0..n_r).all(|k| {
                let a = self.base_power + k as f64;
                if upper <= a + 1.0 {
                    return false;
                }
                let log_tail = -upper + a * upper.ln() - k as f64 * ln_rho
                    - self.denom_power * (self.rho * upper).ln_1p()
                    - shifts[k]
                    - (1.0 - a / upper).ln();
                log_tail <= (1e-3 * self.quad.rel_tol * sums[k]).ln()
            });
            if tail_ok {
                break;
            }
            let next = 2.0 * upper;
            let extra = integrate_vec(integrand, n_r, upper, next, &[], &self.quad)?;
            for (s, e) in sums.iter_mut().zip(&extra.values) {
                *s += e;
            }
            upper = next;
        }
        let out: Vec<f64> = sums.iter().zip(&shifts).map(|(s, c)| s.ln() + c).collect();
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalFailure(format!(
                "f̃ underflowed or vanished at x = {x:e}"
            )));
        }
        Ok(out)
    }

    /// `ln f̃_k(x)` for all `k`, from the grid when it covers `x`.
    pub fn ln_f_tilde_all(&self, x: f64) -> Result<Vec<f64>> {
        match &self.grid {
            Some(g) if x >= 0.0 && g.covers(x) => Ok((0..self.config.n_r()).map(|k| g.eval(k, x)).collect()),
            _ => self.ln_f_tilde_direct(x),
        }
    }

    /// `f̃_k(x) = e^{−x}·f_k(x)` for `1 ≤ k ≤ n_r`.
    pub fn f_tilde(&self, k: usize, x: f64) -> Result<f64> {
        Ok(self.ln_f_tilde(k, x)?.exp())
    }

    pub fn ln_f_tilde(&self, k: usize, x: f64) -> Result<f64> {
        if k == 0 || k > self.config.n_r() {
            return Err(Error::InvalidArgument(format!(
                "f̃ index must lie in [1, {}], got {k}",
                self.config.n_r()
            )));
        }
        Ok(self.ln_f_tilde_all(x)?[k - 1])
    }

    /// `ln p(Y)` from the spectrum of `Y·Y†`.
    pub fn log_density(&self, d: &GramSpectrum<f64>) -> Result<LogDensity> {
        let n = self.config.n_r();
        if d.len() != n {
            return Err(Error::InvalidArgument(format!(
                "spectrum has {} values, expected n_r = {n}",
                d.len()
            )));
        }
        let gap = d.min_gap();
        let threshold = d.gap_threshold();
        if gap < threshold {
            return Err(Error::DegenerateSpectrum { gap, threshold });
        }
        let vals = d.values();
        // logs[k][j] = ln f̃_{k+1}(d_j)
        let mut logs = vec![vec![0.0; n]; n];
        for (j, &x) in vals.iter().enumerate() {
            for (k, v) in self.ln_f_tilde_all(x)?.into_iter().enumerate() {
                logs[k][j] = v;
            }
        }
        let row_scale: Vec<f64> = logs
            .iter()
            .map(|r| r.iter().copied().fold(f64::NEG_INFINITY, f64::max))
            .collect();
        let mut data = vec![0.0; n * n];
        for k in 0..n {
            for j in 0..n {
                data[k * n + j] = (logs[k][j] - row_scale[k]).exp();
            }
        }
        let mut col_scale = vec![0.0; n];
        for (j, cs) in col_scale.iter_mut().enumerate() {
            let m = (0..n).map(|k| data[k * n + j]).fold(0.0, f64::max);
            for k in 0..n {
                data[k * n + j] /= m;
            }
            *cs = m.ln();
        }
        let det = signed_log_det(&RealMatrix::square(n, data)?);
        if det.sign <= 0 {
            return Err(Error::NumericalFailure(format!(
                "determinant ratio not positive for spectrum {vals:?}"
            )));
        }
        let mut log_vandermonde = 0.0;
        for j in 0..n {
            for i in 0..j {
                log_vandermonde += (vals[j] - vals[i]).ln();
            }
        }
        let log_p = det.log_magnitude + row_scale.iter().sum::<f64>() + col_scale.iter().sum::<f64>()
            - log_vandermonde
            + self.constant;
        if !log_p.is_finite() {
            return Err(Error::NumericalFailure(format!(
                "non-finite log density for spectrum {vals:?}"
            )));
        }
        Ok(LogDensity {
            log_p,
            sign_consistent: true,
            min_gap: gap,
        })
    }

    /// Tabulates `ln f̃_k` on `points` log-spaced abscissae over `[0, x_max]`.
    pub fn build_grid(&self, x_max: f64, points: usize) -> Result<Self> {
        if !(x_max > 0.0 && x_max.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "grid range must be finite and positive, got {x_max}"
            )));
        }
        if points < 16 {
            return Err(Error::InvalidArgument(format!(
                "grid needs at least 16 points, got {points}"
            )));
        }
        let n = self.config.n_r();
        let step = x_max.ln_1p() / (points - 1) as f64;
        let mut values = vec![Vec::with_capacity(points); n];
        for i in 0..points {
            let x = if i == points - 1 { x_max } else { (i as f64 * step).exp_m1() };
            for (k, v) in self.ln_f_tilde_direct(x)?.into_iter().enumerate() {
                values[k].push(v);
            }
        }
        let slopes = values.iter().map(|v| pchip_slopes(v, step)).collect();
        Ok(Self {
            grid: Some(DensityGrid {
                x_max,
                step,
                values,
                slopes,
            }),
            ..self.clone()
        })
    }

    /// Drops the grid, returning the direct-quadrature evaluator.
    pub fn without_grid(&self) -> Self {
        Self {
            grid: None,
            ..self.clone()
        }
    }

    /// Averages `p(Y)/q(Y)` over `Y ~ q`, `q` having IID `CN(0, scale)` entries.
    pub fn normalization_check<R: Rng + ?Sized>(
        &self,
        scale: f64,
        samples: u64,
        rng: &mut R,
    ) -> Result<NormalizationEstimate> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "reference scale must be finite and positive, got {scale}"
            )));
        }
        if samples < 1000 {
            return Err(Error::InvalidArgument(format!(
                "normalization check needs at least 1000 samples, got {samples}"
            )));
        }
        let (n_r, n_b) = (self.config.n_r(), self.config.n_b());
        let amp = scale.sqrt();
        let log_q_const = -((n_r * n_b) as f64) * (PI * scale).ln();
        let mut moments = StreamingMoments::new();
        while moments.count() < samples {
            let mut y = complex_normal_matrix(n_r, n_b, rng);
            y.entries_mut().iter_mut().for_each(|v| *v *= amp);
            let d = gram_eigenvalues(&y)?;
            let lp = match self.log_density(&d) {
                Ok(v) => v.log_p,
                Err(Error::DegenerateSpectrum { .. }) => continue,
                Err(e) => return Err(e),
            };
            let log_q = log_q_const - d.sum() / scale;
            moments.push((lp - log_q).exp())?;
        }
        Ok(NormalizationEstimate {
            mean: moments.mean(),
            stderr: moments.stderr(),
            samples: moments.count(),
        })
    }
}
