//! Pilot-assisted spectral efficiencies: uniform pilot power with an
//! optimized pilot count, and boosted pilot power with `n_p = n_t`.

use crate::closed_forms::perfect_csi_capacity_at;
use crate::error::{Error, Result};
use crate::model::ChannelConfig;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PilotResult {
    /// Bits/s/Hz.
    pub se_bits: f64,
    pub n_p: usize,
    /// SNR handed to the perfect-CSI capacity.
    pub effective_snr: f64,
    pub boosted: bool,
}

fn require_full_block(config: &ChannelConfig) -> Result<()> {
    if config.is_full_block() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "pilot schemes need n_b >= n_t, got n_b = {}, n_t = {}",
            config.n_b(),
            config.n_t()
        )))
    }
}

/// Effective SNR of the uniform-power scheme with `n_p` pilot symbols.
pub fn uniform_effective_snr(config: &ChannelConfig, n_p: usize) -> f64 {
    let snr = config.snr();
    let ratio = n_p as f64 / config.n_t() as f64;
    snr * snr * ratio / (1.0 + snr * (1.0 + ratio))
}

/// Rate of the uniform-power scheme at a fixed pilot count.
pub fn pilot_se_uniform_at(config: &ChannelConfig, n_p: usize) -> Result<PilotResult> {
    require_full_block(config)?;
    if n_p < config.n_t() || n_p > config.n_b() {
        return Err(Error::InvalidArgument(format!(
            "pilot count must lie in [n_t, n_b] = [{}, {}], got {n_p}",
            config.n_t(),
            config.n_b()
        )));
    }
    let effective_snr = uniform_effective_snr(config, n_p);
    let overhead = 1.0 - n_p as f64 / config.n_b() as f64;
    Ok(PilotResult {
        se_bits: overhead * perfect_csi_capacity_at(config.n_t(), config.n_r(), effective_snr)?,
        n_p,
        effective_snr,
        boosted: false,
    })
}

/// Best uniform-power rate over every pilot count in `[n_t, n_b]`; ties go to
/// the smaller count.
pub fn pilot_se_uniform(config: &ChannelConfig) -> Result<PilotResult> {
    let mut best = pilot_se_uniform_at(config, config.n_t())?;
    for n_p in config.n_t() + 1..=config.n_b() {
        let candidate = pilot_se_uniform_at(config, n_p)?;
        if candidate.se_bits > best.se_bits {
            best = candidate;
        }
    }
    Ok(best)
}

/// Optimal pilot boost `γ = (n_b·snr + n_t) / (n_b·snr·(n_b − 2n_t)/(n_b − n_t))`.
pub fn boost_factor(config: &ChannelConfig) -> Result<f64> {
    let (n_t, n_b) = (config.n_t(), config.n_b());
    if n_b <= 2 * n_t {
        return Err(Error::UnsupportedRegime(format!(
            "power-boosted pilots need n_b > 2 n_t (got n_b = {n_b}, n_t = {n_t}); \
             the shorter-block variants are not implemented"
        )));
    }
    let (nt, nb, snr) = (n_t as f64, n_b as f64, config.snr());
    Ok((nb * snr + nt) / (nb * snr * (nb - 2.0 * nt) / (nb - nt)))
}

/// Rate of the power-boosted scheme with `n_p = n_t`.
pub fn pilot_se_boosted(config: &ChannelConfig) -> Result<PilotResult> {
    require_full_block(config)?;
    let gamma = boost_factor(config)?;
    let (nt, nb, snr) = (config.n_t() as f64, config.n_b() as f64, config.snr());
    let root_gap = gamma.sqrt() - (gamma - 1.0).sqrt();
    let effective_snr = nb * snr / (nb - 2.0 * nt) * root_gap * root_gap;
    Ok(PilotResult {
        se_bits: (1.0 - nt / nb) * perfect_csi_capacity_at(config.n_t(), config.n_r(), effective_snr)?,
        n_p: config.n_t(),
        effective_snr,
        boosted: true,
    })
}

/// Grid point minimizing `snr/mi` over points with `mi > 0`, and that ratio
/// in dB. No extrapolation beyond the grid.
pub fn min_energy_per_bit(curve: &[(f64, f64)]) -> Result<(f64, f64)> {
    if curve.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "energy-per-bit search needs at least 2 points, got {}",
            curve.len()
        )));
    }
    let best = curve
        .iter()
        .filter(|(snr, mi)| *mi > 0.0 && *snr > 0.0)
        .map(|&(snr, mi)| (snr, snr / mi))
        .fold(None, |acc: Option<(f64, f64)>, cur| match acc {
            Some(a) if a.1 <= cur.1 => Some(a),
            _ => Some(cur),
        });
    let (snr, ratio) = best.ok_or(Error::NoPositiveRate)?;
    Ok((snr, 10.0 * ratio.log10()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closed_forms::perfect_csi_capacity;
    use crate::model::snr_db_to_linear;
    use approx::assert_relative_eq;

    // e^{1/s}·E_1(1/s)·log₂e, 30-digit references.
    const C_HALF: f64 = 0.521_287_003_715_906_875_8;
    const C_BOOST_SISO: f64 = 0.460_781_252_629_477_152_5 / 0.9;

    fn siso10() -> ChannelConfig {
        ChannelConfig::new(1, 1, 10, 1.0).unwrap()
    }

    #[test]
    fn uniform_checkpoint() {
        let r = pilot_se_uniform_at(&siso10(), 2).unwrap();
        assert_relative_eq!(r.effective_snr, 0.5, max_relative = 1e-15);
        assert_relative_eq!(r.se_bits, 0.8 * C_HALF, max_relative = 1e-12);
        assert!(pilot_se_uniform_at(&siso10(), 0).is_err());
        assert!(pilot_se_uniform_at(&siso10(), 11).is_err());
    }

    #[test]
    fn uniform_matches_enumeration() {
        for (n_t, n_r, n_b, snr) in [(1, 1, 10, 1.0), (2, 1, 10, 10.0), (2, 2, 7, 0.3), (3, 2, 30, 100.0)] {
            let c = ChannelConfig::new(n_t, n_r, n_b, snr).unwrap();
            let mut best = (f64::NEG_INFINITY, 0);
            for n_p in n_t..=n_b {
                let v = pilot_se_uniform_at(&c, n_p).unwrap().se_bits;
                if v > best.0 {
                    best = (v, n_p);
                }
            }
            let got = pilot_se_uniform(&c).unwrap();
            assert_eq!((got.se_bits, got.n_p), best);
        }
        // Reference optimum for (1,1,10) at 0 dB: n_p = 3.
        let r = pilot_se_uniform(&siso10()).unwrap();
        assert_eq!(r.n_p, 3);
        assert_relative_eq!(r.se_bits, 0.418_835_858_659_496_917, max_relative = 1e-12);
    }

    #[test]
    fn uniform_low_snr_collapse() {
        let c = ChannelConfig::new(1, 1, 10, 1e-4).unwrap();
        let r = pilot_se_uniform(&c).unwrap();
        assert!(r.se_bits < 1e-7);
        assert!(r.effective_snr < 1e-7 && r.effective_snr > 1e-9);
    }

    #[test]
    fn boosted_example() {
        assert_relative_eq!(boost_factor(&siso10()).unwrap(), 1.2375, max_relative = 1e-15);
        let r = pilot_se_boosted(&siso10()).unwrap();
        assert_relative_eq!(r.effective_snr, 0.488_421_972_362_409_97, max_relative = 1e-13);
        assert_relative_eq!(r.se_bits, 0.9 * C_BOOST_SISO, max_relative = 1e-12);
        assert_eq!(r.n_p, 1);
        assert!(r.boosted);
    }

    #[test]
    fn boosted_precondition_edge() {
        let ok = ChannelConfig::new(2, 1, 5, 1.0).unwrap();
        assert!(pilot_se_boosted(&ok).is_ok());
        let edge = ChannelConfig::new(2, 1, 4, 1.0).unwrap();
        assert!(matches!(pilot_se_boosted(&edge), Err(Error::UnsupportedRegime(_))));
        let short = ChannelConfig::short_block(2, 1, 1, 1.0).unwrap();
        assert!(pilot_se_uniform(&short).is_err());
    }

    #[test]
    fn dominance_and_capacity_ceiling() {
        for (n_t, n_r, n_b) in [(1, 1, 10), (2, 2, 10), (2, 1, 20), (1, 1, 3)] {
            for db in [-10.0, 0.0, 10.0, 20.0, 30.0] {
                let c = ChannelConfig::new(n_t, n_r, n_b, snr_db_to_linear(db)).unwrap();
                let u = pilot_se_uniform(&c).unwrap();
                let b = pilot_se_boosted(&c).unwrap();
                let cap = perfect_csi_capacity(&c).unwrap();
                assert!(b.se_bits >= u.se_bits, "{c:?}");
                assert!(u.se_bits >= 0.0 && b.se_bits <= cap);
            }
        }
    }

    #[test]
    fn boosted_high_snr_slope() {
        let at = |db: f64| pilot_se_boosted(&ChannelConfig::new(1, 1, 10, snr_db_to_linear(db)).unwrap()).unwrap().se_bits;
        let slope = (at(40.0) - at(30.0)) / (10.0 / (10.0 * 2f64.log10()));
        assert!((slope - 0.9).abs() <= 0.09, "slope {slope}");
    }

    #[test]
    fn energy_per_bit() {
        let (s, e) = min_energy_per_bit(&[(1.0, 0.5), (2.0, 0.8)]).unwrap();
        assert_eq!(s, 1.0);
        assert_relative_eq!(e, 3.010_299_956_639_812, max_relative = 1e-14);
        let (s, _) = min_energy_per_bit(&[(1.0, 0.0), (2.0, 0.3), (3.0, -0.1)]).unwrap();
        assert_eq!(s, 2.0);
        let (s, _) = min_energy_per_bit(&[(1.0, 0.1), (2.0, 0.3), (3.0, 0.6)]).unwrap();
        assert_eq!(s, 3.0);
        assert_eq!(min_energy_per_bit(&[(1.0, 0.0), (2.0, -1.0)]), Err(Error::NoPositiveRate));
        assert!(min_energy_per_bit(&[(1.0, 0.5)]).is_err());
    }
}
