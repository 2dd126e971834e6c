//! Physical-layer primitives shared by the analytic and Monte Carlo engines:
//! sectorized antenna gain, mini-slot duration, path loss, blockage, and the
//! normalized noise power.
//!
//! All dB/dBm quantities are converted to linear exactly once, in
//! [`DerivedConstants::from_params`]. Every downstream consumer works with
//! linear quantities only.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Nominal speed of light in m/s, as used in RF link-budget practice.
pub const SPEED_OF_LIGHT_M_PER_S: f64 = 3.0e8;

/// Sector-count product at which the mini-slot duration reaches its floor:
/// with `n_bs * n_ue >= 48` a pilot fits in the minimum symbol duration `t0`.
pub const SLOT_FLOOR_SECTOR_PRODUCT: f64 = 48.0;

/// All physical and protocol parameters in one validated record.
///
/// Angles are derived from the integer sector counts (`theta = 2*pi/n`), so
/// the sectors partition the circle exactly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkParams {
    /// Base-station density in BS per square meter.
    pub lambda: f64,
    /// Number of BS beam sectors; the BS beamwidth is `2*pi/n_bs`.
    pub n_bs: u32,
    /// Number of UE beam sectors; the UE beamwidth is `2*pi/n_ue`.
    pub n_ue: u32,
    /// Path-loss exponent (must exceed 2).
    pub alpha: f64,
    /// Blockage exponent in 1/m; `1/beta` is the mean LoS-link length.
    pub beta: f64,
    /// SINR detection threshold, linear.
    pub sinr_threshold: f64,
    /// BS transmit power in dBm.
    pub p_bs_dbm: f64,
    /// Carrier frequency in Hz.
    pub fc_hz: f64,
    /// Control-plane bandwidth in Hz.
    pub bandwidth_hz: f64,
    /// Thermal noise power spectral density in dBm/Hz.
    pub noise_psd_dbm_hz: f64,
    /// Receiver noise figure in dB.
    pub noise_figure_db: f64,
    /// Minimum mini-slot duration in seconds. Latency outputs are reported in
    /// units of `t0` when this is absent; supplying it additionally enables
    /// outputs in seconds.
    pub t0_seconds: Option<f64>,
    /// Sidelobe gain of the sectorized antenna pattern, linear. The analytic
    /// engine requires 0; the Monte Carlo engine accepts any value in [0, 1).
    pub epsilon: f64,
}

impl Default for NetworkParams {
    /// Baseline parameter set: 28 GHz carrier, 1 MHz control bandwidth,
    /// 30 dBm transmit power, 7 dB noise figure, -174 dBm/Hz thermal noise,
    /// path-loss exponent 3, blockage exponent 0.02/m, 0 dB SINR threshold,
    /// density 1e-3 BS/m^2, 12 BS sectors, 4 UE sectors, zero sidelobe gain.
    fn default() -> Self {
        NetworkParams {
            lambda: 1e-3,
            n_bs: 12,
            n_ue: 4,
            alpha: 3.0,
            beta: 0.02,
            sinr_threshold: 1.0,
            p_bs_dbm: 30.0,
            fc_hz: 28e9,
            bandwidth_hz: 1e6,
            noise_psd_dbm_hz: -174.0,
            noise_figure_db: 7.0,
            t0_seconds: None,
            epsilon: 0.0,
        }
    }
}

impl NetworkParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return Err(Error::invalid("lambda", "must be finite and > 0"));
        }
        if self.n_bs < 1 {
            return Err(Error::invalid("n_bs", "must be >= 1"));
        }
        if self.n_ue < 1 {
            return Err(Error::invalid("n_ue", "must be >= 1"));
        }
        if !(self.alpha > 2.0) || !self.alpha.is_finite() {
            return Err(Error::invalid("alpha", "must be finite and > 2"));
        }
        if !(self.beta > 0.0) || !self.beta.is_finite() {
            return Err(Error::invalid("beta", "must be finite and > 0"));
        }
        if !(self.sinr_threshold > 0.0) || !self.sinr_threshold.is_finite() {
            return Err(Error::invalid("sinr_threshold", "must be finite and > 0"));
        }
        if !(self.fc_hz > 0.0) {
            return Err(Error::invalid("fc_hz", "must be > 0"));
        }
        if !(self.bandwidth_hz > 0.0) {
            return Err(Error::invalid("bandwidth_hz", "must be > 0"));
        }
        if !self.p_bs_dbm.is_finite() || !self.noise_psd_dbm_hz.is_finite() || !self.noise_figure_db.is_finite() {
            return Err(Error::invalid("power/noise", "dB quantities must be finite"));
        }
        if let Some(t0) = self.t0_seconds {
            if !(t0 > 0.0) {
                return Err(Error::invalid("t0_seconds", "must be > 0 when present"));
            }
        }
        if !(0.0..1.0).contains(&self.epsilon) {
            return Err(Error::invalid("epsilon", "must lie in [0, 1)"));
        }
        Ok(())
    }

    /// BS beamwidth in radians.
    pub fn theta_bs(&self) -> f64 {
        TAU / self.n_bs as f64
    }

    /// UE beamwidth in radians.
    pub fn theta_ue(&self) -> f64 {
        TAU / self.n_ue as f64
    }

    /// `n_bs * n_ue` as a float.
    pub fn sector_product(&self) -> f64 {
        self.n_bs as f64 * self.n_ue as f64
    }

    pub fn derive(&self) -> Result<DerivedConstants> {
        DerivedConstants::from_params(self)
    }
}

/// Main- and side-lobe gains of the ideal sectorized antenna pattern.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AntennaGain {
    pub main_lobe: f64,
    pub side_lobe: f64,
}

/// Sectorized antenna gain for beamwidth `theta_rad` and sidelobe gain
/// `epsilon`: the main lobe carries `(2*pi - (2*pi - theta) * epsilon) / theta`
/// and the side lobe carries `epsilon`, so the pattern integrates to `2*pi`
/// over the circle.
pub fn antenna_gain(theta_rad: f64, epsilon: f64) -> Result<AntennaGain> {
    if !(theta_rad > 0.0 && theta_rad <= TAU) {
        return Err(Error::invalid("theta", "beamwidth must lie in (0, 2*pi]"));
    }
    if !(0.0..1.0).contains(&epsilon) {
        return Err(Error::invalid("epsilon", "sidelobe gain must lie in [0, 1)"));
    }
    Ok(AntennaGain {
        main_lobe: (TAU - (TAU - theta_rad) * epsilon) / theta_rad,
        side_lobe: epsilon,
    })
}

/// Mini-slot duration in the same unit as `t0`:
/// `max(t0, 48 * t0 / (n_bs * n_ue))`.
///
/// Narrower beams (higher gain) need less time per pilot, down to the symbol
/// floor `t0` reached at `n_bs * n_ue = 48`.
pub fn mini_slot_duration(n_bs: u32, n_ue: u32, t0: f64) -> f64 {
    debug_assert!(n_bs >= 1 && n_ue >= 1 && t0 > 0.0);
    let product = n_bs as f64 * n_ue as f64;
    t0.max(SLOT_FLOOR_SECTOR_PRODUCT * t0 / product)
}

/// Distance-dependent attenuation `(c / (4*pi*r*fc))^alpha`, linear.
pub fn path_loss(r_m: f64, params: &NetworkParams) -> Result<f64> {
    if !(r_m > 0.0) {
        return Err(Error::invalid("r", "distance must be > 0"));
    }
    Ok(pathloss_constant(params) * r_m.powf(-params.alpha))
}

/// Probability that a link of length `r_m` is line-of-sight: `exp(-beta * r)`.
pub fn los_probability(r_m: f64, beta: f64) -> f64 {
    debug_assert!(r_m >= 0.0 && beta > 0.0);
    (-beta * r_m).exp()
}

fn pathloss_constant(params: &NetworkParams) -> f64 {
    (SPEED_OF_LIGHT_M_PER_S / (4.0 * std::f64::consts::PI * params.fc_hz)).powf(params.alpha)
}

fn dbm_to_linear_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

/// Linear constants derived from a [`NetworkParams`] record. This is the only
/// place where dB/dBm inputs are converted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedConstants {
    /// BS main-lobe gain, linear (`n_bs` when epsilon = 0).
    pub g_bs: f64,
    /// UE main-lobe gain, linear (`n_ue` when epsilon = 0).
    pub g_ue: f64,
    /// Distance-independent path-loss factor `K = (c/(4*pi*fc))^alpha`, so
    /// that the attenuation at range `r` is `K * r^-alpha`.
    pub pathloss_const: f64,
    /// Noise power normalized by transmit power and antenna gains:
    /// `W * B * NF / (p_bs * g_bs * g_ue)`, linear and dimensionless.
    pub sigma2_norm: f64,
    /// `sigma2_norm / K`: the effective noise to use wherever path loss is
    /// written as a bare `r^-alpha` with `K` factored out.
    pub sigma2_eff: f64,
    /// Mini-slot duration in units of `t0`: `max(1, 48 / (n_bs * n_ue))`.
    pub t_slot_t0: f64,
    /// Mini-slot duration in seconds, when `t0_seconds` was supplied.
    pub t_slot_seconds: Option<f64>,
}

impl DerivedConstants {
    pub fn from_params(params: &NetworkParams) -> Result<Self> {
        params.validate()?;
        let gain_bs = antenna_gain(params.theta_bs(), params.epsilon)?;
        let gain_ue = antenna_gain(params.theta_ue(), params.epsilon)?;
        let g_bs = gain_bs.main_lobe;
        let g_ue = gain_ue.main_lobe;

        let noise_dbm = params.noise_psd_dbm_hz
            + 10.0 * params.bandwidth_hz.log10()
            + params.noise_figure_db;
        let sigma2_norm =
            dbm_to_linear_mw(noise_dbm) / (dbm_to_linear_mw(params.p_bs_dbm) * g_bs * g_ue);

        let pathloss_const = pathloss_constant(params);
        Ok(DerivedConstants {
            g_bs,
            g_ue,
            pathloss_const,
            sigma2_norm,
            sigma2_eff: sigma2_norm / pathloss_const,
            t_slot_t0: mini_slot_duration(params.n_bs, params.n_ue, 1.0),
            t_slot_seconds: params
                .t0_seconds
                .map(|t0| mini_slot_duration(params.n_bs, params.n_ue, t0)),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use std::f64::consts::PI;

    #[test]
    fn antenna_gain_omnidirectional_identity() {
        let g = antenna_gain(TAU, 0.0).unwrap();
        assert_eq!(g.main_lobe, 1.0);
        assert_eq!(g.side_lobe, 0.0);
    }

    #[test]
    fn antenna_gain_twelve_sectors() {
        let g = antenna_gain(PI / 6.0, 0.0).unwrap();
        assert_relative_eq!(g.main_lobe, 12.0, max_relative = 1e-12);
    }

    #[test]
    fn antenna_gain_with_sidelobe() {
        // (2*pi - (3*pi/2)*0.1) / (pi/2) = 1.85*pi / 0.5*pi = 3.7 exactly
        let g = antenna_gain(PI / 2.0, 0.1).unwrap();
        assert_relative_eq!(g.main_lobe, 3.7, max_relative = 1e-12);
        assert_eq!(g.side_lobe, 0.1);
    }

    #[test]
    fn antenna_gain_rejects_bad_theta() {
        assert!(antenna_gain(0.0, 0.0).is_err());
        assert!(antenna_gain(TAU + 1e-9, 0.0).is_err());
        assert!(antenna_gain(PI, 1.0).is_err());
        assert!(antenna_gain(PI, -0.1).is_err());
    }

    #[test]
    fn mini_slot_branches() {
        assert_eq!(mini_slot_duration(12, 4, 1.0), 1.0);
        assert_eq!(mini_slot_duration(1, 4, 1.0), 12.0);
        assert_eq!(mini_slot_duration(20, 4, 1.0), 1.0);
        assert_eq!(mini_slot_duration(12, 4, 2.5e-5), 2.5e-5);
    }

    #[test]
    fn path_loss_power_law() {
        let params = NetworkParams::default();
        let a = path_loss(30.0, &params).unwrap();
        let b = path_loss(60.0, &params).unwrap();
        assert_relative_eq!(b / a, 2f64.powf(-params.alpha), max_relative = 1e-12);
    }

    #[test]
    fn path_loss_constant_at_one_meter() {
        // (c / (4*pi*28e9))^3 with the nominal c = 3e8.
        let params = NetworkParams::default();
        assert_relative_eq!(
            path_loss(1.0, &params).unwrap(),
            6.198121396230884e-10,
            max_relative = 1e-12
        );
    }

    #[test]
    fn path_loss_rejects_nonpositive_range() {
        let params = NetworkParams::default();
        assert!(path_loss(0.0, &params).is_err());
        assert!(path_loss(-1.0, &params).is_err());
    }

    #[test]
    fn alpha_at_most_two_rejected() {
        let params = NetworkParams {
            alpha: 2.0,
            ..NetworkParams::default()
        };
        assert!(params.validate().is_err());
    }

    #[test]
    fn los_probability_values() {
        assert_eq!(los_probability(0.0, 0.02), 1.0);
        assert_relative_eq!(los_probability(50.0, 0.02), (-1f64).exp(), max_relative = 1e-15);
        for beta in [0.005, 0.02, 0.3] {
            assert_relative_eq!(los_probability(1.0 / beta, beta), (-1f64).exp(), max_relative = 1e-12);
        }
    }

    #[test]
    fn derived_constants_baseline() {
        let params = NetworkParams::default();
        let d = params.derive().unwrap();
        assert_eq!(d.g_bs, 12.0);
        assert_eq!(d.g_ue, 4.0);
        assert_eq!(d.t_slot_t0, 1.0);
        assert_eq!(d.t_slot_seconds, None);
        // W*B*NF = -174 + 60 + 7 = -107 dBm; sigma2 = 10^((-107-30)/10) / 48.
        assert_relative_eq!(d.sigma2_norm, 4.1567964895185057e-16, max_relative = 1e-12);
        assert_relative_eq!(d.sigma2_eff, 6.706542553436077e-7, max_relative = 1e-12);
    }

    #[test]
    fn derived_constants_pure() {
        let params = NetworkParams::default();
        let a = params.derive().unwrap();
        let b = params.derive().unwrap();
        // bit-identical outputs for equal inputs
        assert_eq!(a, b);
    }

    #[test]
    fn derived_constants_seconds_when_t0_given() {
        let params = NetworkParams {
            t0_seconds: Some(1e-5),
            n_bs: 6,
            ..NetworkParams::default()
        };
        let d = params.derive().unwrap();
        assert_eq!(d.t_slot_t0, 2.0);
        assert_abs_diff_eq!(d.t_slot_seconds.unwrap(), 2e-5, epsilon = 1e-18);
    }

    #[test]
    fn gain_beamwidth_conservation() {
        // main-lobe gain times beamwidth is 2*pi for every theta when eps = 0
        for n in 1..=64u32 {
            let theta = TAU / n as f64;
            let g = antenna_gain(theta, 0.0).unwrap();
            assert_relative_eq!(g.main_lobe * theta, TAU, max_relative = 1e-12);
        }
    }
}
