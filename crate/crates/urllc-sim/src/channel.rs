//! Radio propagation: path loss, log-normal shadowing, Rayleigh fading,
//! composite link gains and receiver noise power.
//!
//! The large-scale part (path loss + shadowing) is refreshed once per
//! episode, the small-scale part once per slot; both are drawn from labeled
//! streams (see [`crate::rng`]) so every realization is reproducible.

use rand::Rng;
use rand_distr::{Distribution, Exp1, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::units::db_to_linear;

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("non-finite input: {0}")]
    NonFinite(&'static str),
    #[error("fading gain must be strictly positive, got {0}")]
    NonPositiveFading(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
}

/// Log-distance path-loss model, `a·log10(d) + b + c·log10(fc/5)` with the
/// distance clamped below `min_distance_m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathLossParams {
    pub carrier_freq_ghz: f64,
    pub a_coeff: f64,
    pub b_coeff: f64,
    pub c_coeff: f64,
    pub min_distance_m: f64,
}

impl PathLossParams {
    /// Indoor A1 line-of-sight coefficients at the given carrier frequency.
    pub fn indoor_a1_los(carrier_freq_ghz: f64) -> Self {
        Self {
            carrier_freq_ghz,
            a_coeff: 18.7,
            b_coeff: 46.8,
            c_coeff: 20.0,
            min_distance_m: 1.0,
        }
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        if !(self.carrier_freq_ghz > 0.0) {
            return Err(ChannelError::InvalidParameter("carrier_freq_ghz must be > 0"));
        }
        if !(self.min_distance_m > 0.0) {
            return Err(ChannelError::InvalidParameter("min_distance_m must be > 0"));
        }
        Ok(())
    }
}

/// Log-normal shadowing, parameterized by its dB standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShadowingParams {
    pub std_db: f64,
}

impl ShadowingParams {
    pub fn validate(&self) -> Result<(), ChannelError> {
        if self.std_db < 0.0 {
            return Err(ChannelError::InvalidParameter("std_db must be >= 0"));
        }
        Ok(())
    }
}

/// Receiver noise: PSD, noise figure and the sub-band width they apply to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub psd_dbm_per_hz: f64,
    pub noise_figure_db: f64,
    pub bandwidth_hz: f64,
}

impl NoiseModel {
    pub fn validate(&self) -> Result<(), ChannelError> {
        if !(self.bandwidth_hz > 0.0) {
            return Err(ChannelError::InvalidParameter("bandwidth_hz must be > 0"));
        }
        Ok(())
    }
}

/// Channel state of one transmitter→receiver pair for one slot: the
/// large-scale gain (path loss + shadowing, linear) and one small-scale gain
/// per sub-band.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkGain {
    pub large_scale_linear: f64,
    pub small_scale_linear: Vec<f64>,
}

impl LinkGain {
    /// Composite power gain `L·g[m]` on sub-band `m`.
    #[inline]
    pub fn composite(&self, subband: usize) -> f64 {
        self.large_scale_linear * self.small_scale_linear[subband]
    }
}

/// Path loss in dB at `distance_m`, clamped below `min_distance_m`.
pub fn path_loss_db(params: &PathLossParams, distance_m: f64) -> f64 {
    let d = distance_m.max(params.min_distance_m);
    params.a_coeff * d.log10()
        + params.b_coeff
        + params.c_coeff * (params.carrier_freq_ghz / 5.0).log10()
}

/// One zero-mean Gaussian shadowing sample in dB.
pub fn draw_shadowing_db<R: Rng>(params: &ShadowingParams, rng: &mut R) -> f64 {
    if params.std_db == 0.0 {
        return 0.0;
    }
    Normal::new(0.0, params.std_db)
        .expect("validated std_db")
        .sample(rng)
}

/// One Rayleigh fading power sample `|h|²`: unit-mean exponential.
pub fn draw_rayleigh_power<R: Rng>(rng: &mut R) -> f64 {
    let x: f64 = Exp1.sample(rng);
    x
}

/// Total noise power over one sub-band in dBm.
pub fn noise_power_dbm(model: &NoiseModel) -> f64 {
    model.psd_dbm_per_hz + 10.0 * model.bandwidth_hz.log10() + model.noise_figure_db
}

/// Combines path loss, shadowing and per-sub-band fading into a [`LinkGain`].
pub fn composite_link_gain(
    pl_db: f64,
    shadow_db: f64,
    fading_linear: Vec<f64>,
) -> Result<LinkGain, ChannelError> {
    if !pl_db.is_finite() {
        return Err(ChannelError::NonFinite("pl_db"));
    }
    if !shadow_db.is_finite() {
        return Err(ChannelError::NonFinite("shadow_db"));
    }
    for &g in &fading_linear {
        if !g.is_finite() {
            return Err(ChannelError::NonFinite("fading_linear"));
        }
        if g <= 0.0 {
            return Err(ChannelError::NonPositiveFading(g));
        }
    }
    Ok(LinkGain {
        large_scale_linear: db_to_linear(-(pl_db + shadow_db)),
        small_scale_linear: fading_linear,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedSplitter;
    use crate::units::{dbm_to_mw, linear_to_db, mw_to_dbm};
    use approx::assert_abs_diff_eq;

    fn a1_3ghz() -> PathLossParams {
        PathLossParams::indoor_a1_los(3.0)
    }

    #[test]
    fn a1_los_at_10m() {
        // 18.7·log10(10) + 46.8 + 20·log10(0.6) = 61.063
        assert_abs_diff_eq!(path_loss_db(&a1_3ghz(), 10.0), 61.06, epsilon = 0.01);
    }

    #[test]
    fn distance_clamped_at_floor() {
        let p = a1_3ghz();
        let at_min = path_loss_db(&p, p.min_distance_m);
        assert_eq!(path_loss_db(&p, p.min_distance_m / 2.0), at_min);
        assert_eq!(path_loss_db(&p, 0.0), at_min);
    }

    #[test]
    fn one_decade_adds_slope() {
        let p = a1_3ghz();
        let delta = path_loss_db(&p, 100.0) - path_loss_db(&p, 10.0);
        assert_abs_diff_eq!(delta, 18.7, epsilon = 1e-12);
    }

    #[test]
    fn monotone_beyond_clamp() {
        let p = a1_3ghz();
        let mut prev = f64::NEG_INFINITY;
        for i in 0..400 {
            let d = 1.0 + i as f64 * 0.25;
            let pl = path_loss_db(&p, d);
            assert!(pl >= prev);
            prev = pl;
        }
    }

    #[test]
    fn shadowing_zero_std_is_zero() {
        let mut rng = SeedSplitter::new(1).stream("t", &[]);
        for _ in 0..100 {
            assert_eq!(draw_shadowing_db(&ShadowingParams { std_db: 0.0 }, &mut rng), 0.0);
        }
    }

    #[test]
    fn shadowing_sample_moments() {
        let params = ShadowingParams { std_db: 3.0 };
        let mut rng = SeedSplitter::new(7).stream("shadow-moments", &[]);
        let n = 100_000;
        let samples: Vec<f64> = (0..n).map(|_| draw_shadowing_db(&params, &mut rng)).collect();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = samples.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.03, "mean {mean}");
        let std = var.sqrt();
        assert!((2.94..=3.06).contains(&std), "std {std}");
    }

    #[test]
    fn shadowing_deterministic_per_stream() {
        let params = ShadowingParams { std_db: 3.0 };
        let split = SeedSplitter::new(3);
        let a: Vec<f64> = {
            let mut rng = split.stream("shadow", &[5]);
            (0..16).map(|_| draw_shadowing_db(&params, &mut rng)).collect()
        };
        let b: Vec<f64> = {
            let mut rng = split.stream("shadow", &[5]);
            (0..16).map(|_| draw_shadowing_db(&params, &mut rng)).collect()
        };
        assert_eq!(a, b);
    }

    #[test]
    fn rayleigh_power_unit_mean_and_median() {
        let mut rng = SeedSplitter::new(11).stream("rayleigh", &[]);
        let n = 100_000;
        let samples: Vec<f64> = (0..n).map(|_| draw_rayleigh_power(&mut rng)).collect();
        assert!(samples.iter().all(|&s| s >= 0.0));
        let mean = samples.iter().sum::<f64>() / n as f64;
        assert!((0.98..=1.02).contains(&mean), "mean {mean}");
        let above_ln2 = samples.iter().filter(|&&s| s > std::f64::consts::LN_2).count();
        let frac = above_ln2 as f64 / n as f64;
        assert!((0.49..=0.51).contains(&frac), "median check {frac}");
    }

    #[test]
    fn rayleigh_power_cdf_matches_exponential() {
        // Kolmogorov-Smirnov against 1 - e^{-x}.
        let mut rng = SeedSplitter::new(13).stream("rayleigh-ks", &[]);
        let n = 100_000;
        let mut samples: Vec<f64> = (0..n).map(|_| draw_rayleigh_power(&mut rng)).collect();
        samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut ks: f64 = 0.0;
        for (i, &x) in samples.iter().enumerate() {
            let cdf = 1.0 - (-x).exp();
            let lo = i as f64 / n as f64;
            let hi = (i + 1) as f64 / n as f64;
            ks = ks.max((cdf - lo).abs()).max((cdf - hi).abs());
        }
        assert!(ks < 0.01, "KS statistic {ks}");
    }

    #[test]
    fn noise_power_reference_values() {
        let dbm = noise_power_dbm(&NoiseModel {
            psd_dbm_per_hz: -169.0,
            noise_figure_db: 5.0,
            bandwidth_hz: 1e6,
        });
        assert_abs_diff_eq!(dbm, -104.0, epsilon = 1e-12);

        let identity = noise_power_dbm(&NoiseModel {
            psd_dbm_per_hz: -169.0,
            noise_figure_db: 0.0,
            bandwidth_hz: 1.0,
        });
        assert_abs_diff_eq!(identity, -169.0, epsilon = 1e-12);
    }

    #[test]
    fn noise_power_doubling_bandwidth() {
        let base = NoiseModel { psd_dbm_per_hz: -169.0, noise_figure_db: 5.0, bandwidth_hz: 1e6 };
        let double = NoiseModel { bandwidth_hz: 2e6, ..base };
        let delta = noise_power_dbm(&double) - noise_power_dbm(&base);
        assert_abs_diff_eq!(delta, 10.0 * 2f64.log10(), epsilon = 1e-12);
    }

    #[test]
    fn composite_gain_reference_values() {
        let g = composite_link_gain(60.0, 0.0, vec![1.0, 1.0]).unwrap();
        assert_abs_diff_eq!(g.large_scale_linear, 1e-6, epsilon = 1e-18);

        let g = composite_link_gain(60.0, -10.0, vec![1.0]).unwrap();
        assert_abs_diff_eq!(g.large_scale_linear, 1e-5, epsilon = 1e-17);
    }

    #[test]
    fn composite_gain_received_power() {
        // 30 dBm through a -104 dB composite gain lands at -74 dBm.
        let g = composite_link_gain(104.0, 0.0, vec![1.0]).unwrap();
        let rx_mw = dbm_to_mw(30.0) * g.composite(0);
        assert_abs_diff_eq!(mw_to_dbm(rx_mw), -74.0, epsilon = 1e-9);
    }

    #[test]
    fn composite_gain_rejects_bad_inputs() {
        assert!(composite_link_gain(f64::NAN, 0.0, vec![1.0]).is_err());
        assert!(composite_link_gain(60.0, f64::INFINITY, vec![1.0]).is_err());
        assert!(composite_link_gain(60.0, 0.0, vec![0.0]).is_err());
        assert!(composite_link_gain(60.0, 0.0, vec![-1.0]).is_err());
        assert!(composite_link_gain(60.0, 0.0, vec![1.0, f64::NAN]).is_err());
    }

    #[test]
    fn composite_gain_db_identity() {
        let mut rng = SeedSplitter::new(17).stream("composite-prop", &[]);
        for _ in 0..1000 {
            let pl: f64 = rng.random_range(30.0..110.0);
            let sh: f64 = rng.random_range(-9.0..9.0);
            let fading: Vec<f64> = (0..4).map(|_| draw_rayleigh_power(&mut rng).max(1e-12)).collect();
            let g = composite_link_gain(pl, sh, fading.clone()).unwrap();
            for (m, &f) in fading.iter().enumerate() {
                let db = linear_to_db(g.composite(m));
                let expect = -(pl + sh) + linear_to_db(f);
                assert!((db - expect).abs() / expect.abs().max(1.0) < 1e-9);
            }
        }
    }
}
