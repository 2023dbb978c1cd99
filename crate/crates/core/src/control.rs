//! Intelligent PID law on top of an ultra-local model:
//!
//! ```text
//! u = (y*^(n) - F + K_P e + K_I int e + K_D e') / alpha
//! ```
//!
//! With an exact `F`, the term in parentheses cancels the unknown dynamics and
//! the tracking error obeys the homogeneous ODE fixed by the gains.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ultra_local::UltraLocalChannel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PidGains {
    pub kp: f64,
    #[serde(default)]
    pub ki: f64,
    #[serde(default)]
    pub kd: f64,
}

impl PidGains {
    pub fn new(kp: f64, ki: f64, kd: f64) -> Self {
        Self { kp, ki, kd }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.kp, self.ki, self.kd];
        if all.iter().any(|g| !g.is_finite() || *g < 0.0) {
            return Err(Error::config(format!(
                "gains must be finite and nonnegative: {self:?}"
            )));
        }
        if self.kp <= 0.0 {
            return Err(Error::config("proportional gain must be positive"));
        }
        Ok(())
    }
}

/// Actuator limits applied to the computed control.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bounds {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
}

impl Bounds {
    pub fn new(min: Option<f64>, max: Option<f64>) -> Self {
        Self { min, max }
    }

    pub fn validate(&self) -> Result<()> {
        if let (Some(lo), Some(hi)) = (self.min, self.max) {
            if lo.partial_cmp(&hi) != Some(std::cmp::Ordering::Less) {
                return Err(Error::config(format!(
                    "control bounds must satisfy min < max, got [{lo}, {hi}]"
                )));
            }
        }
        Ok(())
    }

    pub fn clamp(&self, u: f64) -> f64 {
        let u = self.max.map_or(u, |hi| u.min(hi));
        self.min.map_or(u, |lo| u.max(lo))
    }
}

/// Per-channel controller memory.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelController {
    gains: PidGains,
    bounds: Bounds,
    integral_e: f64,
    prev_e: Option<f64>,
    last_u: f64,
    saturated: bool,
}

impl ChannelController {
    pub fn new(gains: PidGains, bounds: Bounds) -> Result<Self> {
        gains.validate()?;
        bounds.validate()?;
        Ok(Self {
            gains,
            bounds,
            integral_e: 0.0,
            prev_e: None,
            last_u: 0.0,
            saturated: false,
        })
    }

    pub fn gains(&self) -> &PidGains {
        &self.gains
    }

    pub fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    pub fn integral(&self) -> f64 {
        self.integral_e
    }

    pub fn last_u(&self) -> f64 {
        self.last_u
    }

    /// Whether the last computed control hit a bound.
    pub fn saturated(&self) -> bool {
        self.saturated
    }

    pub fn reset(&mut self) {
        self.integral_e = 0.0;
        self.prev_e = None;
        self.last_u = 0.0;
        self.saturated = false;
    }

    /// One control update. `ref_derivative` is the `n`-th derivative of the
    /// reference, `f_hat` the current ultra-local estimate, `e = y* - y`.
    ///
    /// The error integral is a trapezoid over the sampled errors; when the
    /// output is clamped, this step's increment is discarded.
    pub fn compute(
        &mut self,
        channel: &UltraLocalChannel,
        ref_derivative: f64,
        f_hat: f64,
        e: f64,
        e_dot: f64,
        dt: f64,
    ) -> Result<f64> {
        let alpha = channel.control_gain();
        if alpha == 0.0 || !alpha.is_finite() {
            return Err(Error::config("channel actuator gain alpha must be nonzero"));
        }
        let increment = self.prev_e.map_or(0.0, |prev| 0.5 * (prev + e) * dt);
        let integral = self.integral_e + increment;
        let g = &self.gains;
        let raw = (ref_derivative - f_hat + g.kp * e + g.ki * integral + g.kd * e_dot) / alpha;
        let u = self.bounds.clamp(raw);
        self.saturated = u != raw;
        if !self.saturated {
            self.integral_e = integral;
        }
        self.prev_e = Some(e);
        self.last_u = u;
        Ok(u)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn channel(alpha: f64) -> UltraLocalChannel {
        UltraLocalChannel::new(1, vec![alpha], 0.0, 0).unwrap()
    }

    #[test]
    fn equilibrium_gives_zero() {
        let mut c =
            ChannelController::new(PidGains::new(1.0, 2.0, 3.0), Bounds::default()).unwrap();
        let u = c.compute(&channel(10.0), 0.7, 0.7, 0.0, 0.0, 0.01).unwrap();
        assert_eq!(u, 0.0);
    }

    #[test]
    fn linear_example_channel_one() {
        let mut c =
            ChannelController::new(PidGains::new(1.0, 0.0, 0.0), Bounds::default()).unwrap();
        let u = c.compute(&channel(10.0), 0.0, 2.5, 0.3, 0.0, 0.01).unwrap();
        assert_abs_diff_eq!(u, -0.22, epsilon = 1e-12);
    }

    #[test]
    fn three_tank_pi() {
        let mut c =
            ChannelController::new(PidGains::new(10.0, 0.02, 0.0), Bounds::default()).unwrap();
        let u = c
            .compute(&channel(200.0), 0.001, 0.0005, 0.01, 0.0, 0.1)
            .unwrap();
        assert_abs_diff_eq!(u, 5.025e-4, epsilon = 1e-15);
    }

    #[test]
    fn zero_alpha_is_config_error() {
        let ch = UltraLocalChannel::new(1, vec![0.0, 1.0], 0.0, 0).unwrap();
        let mut c =
            ChannelController::new(PidGains::new(1.0, 0.0, 0.0), Bounds::default()).unwrap();
        assert!(matches!(
            c.compute(&ch, 0.0, 0.0, 0.0, 0.0, 0.1),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn invalid_gains_and_bounds() {
        assert!(ChannelController::new(PidGains::new(0.0, 1.0, 0.0), Bounds::default()).is_err());
        assert!(ChannelController::new(PidGains::new(1.0, -1.0, 0.0), Bounds::default()).is_err());
        assert!(ChannelController::new(
            PidGains::new(1.0, 0.0, 0.0),
            Bounds::new(Some(1.0), Some(1.0))
        )
        .is_err());
    }

    #[test]
    fn reset_is_idempotent() {
        let ch = channel(10.0);
        let mut c =
            ChannelController::new(PidGains::new(1.0, 1.0, 0.0), Bounds::default()).unwrap();
        for _ in 0..5 {
            c.compute(&ch, 0.0, 0.0, 1.0, 0.0, 0.1).unwrap();
        }
        c.reset();
        let once = c.clone();
        c.reset();
        assert_eq!(c, once);
        assert_eq!(c.compute(&ch, 0.3, 0.3, 0.0, 0.0, 0.1).unwrap(), 0.0);
    }

    #[test]
    fn trapezoid_integral_of_constant_error() {
        let ch = channel(1.0);
        let mut c =
            ChannelController::new(PidGains::new(1.0, 1.0, 0.0), Bounds::default()).unwrap();
        let (e, dt, k) = (0.4, 0.05, 30);
        for _ in 0..k {
            c.compute(&ch, 0.0, 0.0, e, 0.0, dt).unwrap();
        }
        // k samples span k - 1 intervals
        assert_abs_diff_eq!(c.integral(), (k - 1) as f64 * e * dt, epsilon = 1e-12);
    }

    #[test]
    fn saturation_and_anti_windup() {
        let ch = channel(1.0);
        let bounds = Bounds::new(Some(0.0), Some(0.5));
        let mut c = ChannelController::new(PidGains::new(1.0, 5.0, 0.0), bounds).unwrap();
        let u = c.compute(&ch, 0.0, 0.0, 0.2, 0.0, 0.1).unwrap();
        assert!(!c.saturated());
        assert_abs_diff_eq!(u, 0.2, epsilon = 1e-12);
        for _ in 0..1000 {
            let u = c.compute(&ch, 0.0, 0.0, 10.0, 0.0, 0.1).unwrap();
            assert!((0.0..=0.5).contains(&u));
            assert!(c.saturated());
        }
        assert_eq!(c.integral(), 0.0);
        let u = c.compute(&ch, 0.0, 0.0, -10.0, 0.0, 0.1).unwrap();
        assert_eq!(u, 0.0);
    }

    #[test]
    fn proportional_only_matches_channel_one_form() {
        let ch = channel(10.0);
        let mut c =
            ChannelController::new(PidGains::new(1.0, 0.0, 0.0), Bounds::default()).unwrap();
        for k in 0..50 {
            let (r, f, e) = (0.1 * k as f64, (k as f64).cos(), (k as f64 * 0.3).sin());
            let u = c.compute(&ch, r, f, e, 123.0, 0.01).unwrap();
            assert_abs_diff_eq!(u, (r - f + e) / 10.0, epsilon = 1e-14);
        }
    }

    /// Matched plant y^(n) = F + alpha u with exact F: the error follows the
    /// linear ODE fixed by the gains. n = 1, K_P only: e' = -K_P e.
    #[test]
    fn cancellation_first_order() {
        let (alpha, kp, f_true, h) = (10.0, 3.0, 0.7, 1e-3);
        let ch = channel(alpha);
        let mut c = ChannelController::new(PidGains::new(kp, 0.0, 0.0), Bounds::default()).unwrap();
        let mut y = 0.0;
        let target = 1.0;
        let mut errors = Vec::new();
        for _ in 0..3000 {
            let e = target - y;
            errors.push(e);
            let u = c.compute(&ch, 0.0, f_true, e, 0.0, h).unwrap();
            y += h * (f_true + alpha * u);
        }
        let t_end = (errors.len() - 1) as f64 * h;
        let rate = -(errors.last().unwrap() / errors[0]).ln() / t_end;
        assert!((rate - kp).abs() / kp < 0.05, "rate {rate}");
    }

    /// n = 2 with PID: e'' + K_D e' + K_P e + K_I int e = 0. Characteristic
    /// polynomial s^3 + K_D s^2 + K_P s + K_I = (s + 1)(s + 2)(s + 3).
    #[test]
    fn cancellation_second_order() {
        let (kp, ki, kd) = (11.0, 6.0, 6.0);
        let (alpha, f_true, h) = (10.0, -0.4, 1e-4);
        let ch = UltraLocalChannel::new(2, vec![alpha], 0.0, 0).unwrap();
        let mut c = ChannelController::new(PidGains::new(kp, ki, kd), Bounds::default()).unwrap();
        let (mut y, mut v) = (0.0, 0.0);
        let mut errors = Vec::new();
        let steps = 100_000;
        for _ in 0..steps {
            let e = 1.0 - y;
            errors.push(e);
            let u = c.compute(&ch, 0.0, f_true, e, -v, h).unwrap();
            let a = f_true + alpha * u;
            y += h * v + 0.5 * h * h * a;
            v += h * a;
        }
        // slowest mode is e^{-t}; fit the decay over the tail
        let (t0, t1) = (6.0, 10.0);
        let (i0, i1) = ((t0 / h) as usize, (t1 / h) as usize - 1);
        let rate = -(errors[i1].abs() / errors[i0].abs()).ln() / ((i1 - i0) as f64 * h);
        assert!((rate - 1.0).abs() < 0.05, "rate {rate}");
    }
}
