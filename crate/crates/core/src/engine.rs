//! Monte-Carlo estimation of `h(Y)` and the mutual information
//! `Ī = (h(Y) − h(Y|X))/n_b`.
//!
//! Worker `w` owns substream `w` of the master seed and draws a fixed quota
//! per round; partial moments are merged in worker order after every round,
//! so results depend only on `(seed, workers)`.

use std::f64::consts::LOG2_E;

use crate::closed_forms::cond_entropy;
use crate::density::DensityEvaluator;
use crate::error::{Error, Result};
use crate::matops::gram_eigenvalues;
use crate::model::{sample_block, substream, ChannelConfig, Substream};
use crate::stats::{StoppingRule, StreamingMoments};

/// Samples per worker per round.
pub const ROUND_QUOTA: u64 = 256;
/// Largest tolerated share of samples whose density evaluation failed.
pub const MAX_FAILURE_RATE: f64 = 1e-3;

/// Output entropy estimate, total bits per block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutputEntropy {
    pub bits: f64,
    pub stderr_bits: f64,
    pub n_samples: u64,
    pub degenerate_resamples: u64,
    pub numerical_failures: u64,
    /// Stopped on `max_samples` before meeting the halfwidth target.
    pub reached_max_samples: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MIEstimate {
    /// Bits/s/Hz.
    pub mi_bits: f64,
    pub out_entropy_bits: f64,
    pub cond_entropy_bits: f64,
    /// Standard error of `mi_bits`.
    pub stderr_bits: f64,
    pub n_samples: u64,
    pub confidence: f64,
    pub halfwidth_target: f64,
    pub degenerate_resamples: u64,
    pub numerical_failures: u64,
    pub reached_max_samples: bool,
}

struct Worker {
    rng: Substream,
    // −ln p(Y) in nats.
    moments: StreamingMoments<f64>,
    degenerate: u64,
    failures: u64,
}

impl Worker {
    fn run(&mut self, eval: &DensityEvaluator, quota: u64) {
        let config = eval.config();
        let mut done = 0;
        let mut local_failures = 0;
        while done < quota {
            let block = sample_block(config, &mut self.rng);
            let outcome = gram_eigenvalues(&block.y).and_then(|d| eval.log_density(&d));
            match outcome {
                Ok(ld) => {
                    if self.moments.push(-ld.log_p).is_ok() {
                        done += 1;
                    } else {
                        self.failures += 1;
                        local_failures += 1;
                    }
                }
                Err(Error::DegenerateSpectrum { .. }) => self.degenerate += 1,
                Err(_) => {
                    self.failures += 1;
                    local_failures += 1;
                }
            }
            // A round this unhealthy is reported by the caller.
            if local_failures > quota / 8 + 8 || self.degenerate > 16 * (self.moments.count() + quota) {
                break;
            }
        }
    }
}

/// Estimates `h(Y) = −E[log₂ p(Y)]` until the rate CI meets `rule`.
pub fn estimate_output_entropy(
    eval: &DensityEvaluator,
    rule: &StoppingRule,
    seed: u64,
    workers: usize,
) -> Result<OutputEntropy> {
    if workers == 0 {
        return Err(Error::InvalidArgument("need at least one worker".into()));
    }
    let n_b = eval.config().n_b();
    let mut pool: Vec<Worker> = (0..workers)
        .map(|w| Worker {
            rng: substream(seed, w as u64),
            moments: StreamingMoments::new(),
            degenerate: 0,
            failures: 0,
        })
        .collect();
    let mut total = StreamingMoments::new();
    let mut reached_max = false;
    loop {
        let remaining = rule.max_samples() - total.count();
        let chunk = remaining.min(ROUND_QUOTA * workers as u64);
        let (base, extra) = (chunk / workers as u64, chunk % workers as u64);
        let quota = |w: usize| base + u64::from((w as u64) < extra);
        if workers == 1 {
            pool[0].run(eval, quota(0));
        } else {
            std::thread::scope(|s| {
                for (w, worker) in pool.iter_mut().enumerate() {
                    let q = quota(w);
                    s.spawn(move || worker.run(eval, q));
                }
            });
        }
        total = StreamingMoments::new();
        for w in &pool {
            total.merge(&w.moments);
        }
        let failures: u64 = pool.iter().map(|w| w.failures).sum();
        let degenerate: u64 = pool.iter().map(|w| w.degenerate).sum();
        let attempts = total.count() + failures;
        if failures as f64 > MAX_FAILURE_RATE * attempts as f64 && failures > 1 {
            return Err(Error::NumericalHealth(format!(
                "{failures} of {attempts} density evaluations failed (limit {:.1}%)",
                100.0 * MAX_FAILURE_RATE
            )));
        }
        if degenerate > 16 * total.count() + 1024 {
            return Err(Error::NumericalHealth(format!(
                "{degenerate} degenerate spectra against {} usable samples",
                total.count()
            )));
        }
        if total.count() >= 2 && rule.satisfied(total.count(), total.stderr() * LOG2_E, n_b) {
            break;
        }
        if total.count() >= rule.max_samples() {
            reached_max = true;
            break;
        }
    }
    Ok(OutputEntropy {
        bits: total.mean() * LOG2_E,
        stderr_bits: total.stderr() * LOG2_E,
        n_samples: total.count(),
        degenerate_resamples: pool.iter().map(|w| w.degenerate).sum(),
        numerical_failures: pool.iter().map(|w| w.failures).sum(),
        reached_max_samples: reached_max,
    })
}

/// `Ī` with the direct-quadrature density.
pub fn mutual_information(
    config: &ChannelConfig,
    rule: &StoppingRule,
    seed: u64,
    workers: usize,
) -> Result<MIEstimate> {
    mutual_information_with(&DensityEvaluator::new(*config), rule, seed, workers)
}

/// `Ī` with a caller-supplied evaluator (for example one carrying a grid).
pub fn mutual_information_with(
    eval: &DensityEvaluator,
    rule: &StoppingRule,
    seed: u64,
    workers: usize,
) -> Result<MIEstimate> {
    let config = eval.config();
    let cond = cond_entropy(config)?;
    let out = estimate_output_entropy(eval, rule, seed, workers)?;
    let n_b = config.n_b() as f64;
    Ok(MIEstimate {
        mi_bits: (out.bits - cond) / n_b,
        out_entropy_bits: out.bits,
        cond_entropy_bits: cond,
        stderr_bits: out.stderr_bits / n_b,
        n_samples: out.n_samples,
        confidence: rule.confidence(),
        halfwidth_target: rule.halfwidth(),
        degenerate_resamples: out.degenerate_resamples,
        numerical_failures: out.numerical_failures,
        reached_max_samples: out.reached_max_samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closed_forms::{log2_pi_e, perfect_csi_capacity};

    fn quick() -> StoppingRule {
        StoppingRule::new(0.9, 0.02, 1000, 200_000).unwrap()
    }

    #[test]
    fn invariants_hold() {
        let c = ChannelConfig::new(1, 1, 4, 1.0).unwrap();
        let est = mutual_information(&c, &quick(), 3, 2).unwrap();
        assert_eq!(est.mi_bits, (est.out_entropy_bits - est.cond_entropy_bits) / 4.0);
        assert!(est.n_samples >= 1000);
        assert!(!est.reached_max_samples);
        assert!(1.645 * est.stderr_bits <= 0.02 * 1.0001);
        assert!(est.mi_bits > 0.0 && est.mi_bits < perfect_csi_capacity(&c).unwrap());
        assert_eq!(est.confidence, 0.9);
    }

    #[test]
    fn deterministic_given_seed_and_workers() {
        let c = ChannelConfig::new(2, 2, 3, 2.0).unwrap();
        let a = mutual_information(&c, &quick(), 11, 3).unwrap();
        let b = mutual_information(&c, &quick(), 11, 3).unwrap();
        assert_eq!(a, b);
        let other = mutual_information(&c, &quick(), 12, 3).unwrap();
        assert_ne!(a.mi_bits, other.mi_bits);
    }

    #[test]
    fn max_samples_cap_is_flagged() {
        let c = ChannelConfig::new(1, 1, 2, 1.0).unwrap();
        let rule = StoppingRule::new(0.9, 1e-6, 100, 700).unwrap();
        let out = estimate_output_entropy(&DensityEvaluator::new(c), &rule, 1, 3).unwrap();
        assert_eq!(out.n_samples, 700);
        assert!(out.reached_max_samples);
    }

    #[test]
    fn pure_noise_limit() {
        let c = ChannelConfig::new(1, 1, 3, 1e-9).unwrap();
        let out = estimate_output_entropy(&DensityEvaluator::new(c), &quick(), 5, 1).unwrap();
        let want = 3.0 * log2_pi_e();
        assert!((out.bits - want).abs() < 3.0 * out.stderr_bits + 1e-4, "{out:?}");
    }

    #[test]
    fn zero_workers_rejected() {
        let c = ChannelConfig::new(1, 1, 1, 1.0).unwrap();
        assert!(estimate_output_entropy(&DensityEvaluator::new(c), &quick(), 0, 0).is_err());
    }
}
