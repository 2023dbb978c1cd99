use serde::{Deserialize, Serialize};

use super::{check_inputs, OutputMetadata, Plant};
use crate::error::{Error, Result};

/// Physical constants of the three-tank rig. Areas in m^2, levels in m,
/// pump flows in m^3/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ThreeTankParams {
    /// Tank cross-section `S`.
    pub area: f64,
    /// Inter-tank pipe cross-section `S_p`.
    pub pipe_area: f64,
    pub gravity: f64,
    /// Outflow coefficients `mu_1, mu_2, mu_3`.
    pub mu: [f64; 3],
    /// Initial levels.
    pub initial: [f64; 3],
}

impl Default for ThreeTankParams {
    fn default() -> Self {
        Self {
            area: 0.0154,
            pipe_area: 5e-5,
            gravity: 9.81,
            mu: [0.5, 0.675, 0.5],
            initial: [0.1, 0.1, 0.1],
        }
    }
}

impl ThreeTankParams {
    /// `C_n = mu_n S_p sqrt(2 g) / S`.
    pub fn flow_coefficients(&self) -> [f64; 3] {
        let k = self.pipe_area * (2.0 * self.gravity).sqrt() / self.area;
        self.mu.map(|m| m * k)
    }

    fn validate(&self) -> Result<()> {
        let positive = [self.area, self.pipe_area, self.gravity];
        if positive
            .iter()
            .chain(&self.mu)
            .any(|v| !v.is_finite() || *v <= 0.0)
        {
            return Err(Error::config("three-tank constants must be positive"));
        }
        if self.initial.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::config(
                "three-tank initial levels must be nonnegative",
            ));
        }
        Ok(())
    }
}

/// Torricelli flow term `sign(d) sqrt(|d|)`.
fn torricelli(d: f64) -> f64 {
    d.signum() * d.abs().sqrt()
}

/// Level rates for levels `x` and pump flows `u`:
///
/// ```text
/// x1' = -C1 q(x1 - x3) + u1 / S
/// x2' =  C3 q(x3 - x2) - C2 q(x2) + u2 / S
/// x3' =  C1 q(x1 - x3) - C3 q(x3 - x2)
/// ```
/// with `q(d) = sign(d) sqrt(|d|)`.
pub fn three_tank_field(params: &ThreeTankParams, x: &[f64; 3], u: &[f64; 2]) -> [f64; 3] {
    let [c1, c2, c3] = params.flow_coefficients();
    let q13 = c1 * torricelli(x[0] - x[2]);
    let q32 = c3 * torricelli(x[2] - x[1]);
    let q20 = c2 * torricelli(x[1]);
    [
        -q13 + u[0] / params.area,
        q32 - q20 + u[1] / params.area,
        q13 - q32,
    ]
}

#[derive(Debug, Clone)]
pub struct ThreeTankPlant {
    params: ThreeTankParams,
    levels: [f64; 3],
    clamp_events: usize,
    crossings: usize,
}

impl ThreeTankPlant {
    pub const KIND: &'static str = "three-tank";

    pub fn new(params: ThreeTankParams) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            levels: params.initial,
            params,
            clamp_events: 0,
            crossings: 0,
        })
    }

    pub fn from_params(params: ThreeTankParams) -> Result<Self> {
        Self::new(params)
    }

    pub fn params(&self) -> &ThreeTankParams {
        &self.params
    }

    pub fn levels(&self) -> [f64; 3] {
        self.levels
    }

    pub fn set_levels(&mut self, levels: [f64; 3]) {
        self.levels = levels;
    }

    /// Number of steps after which some level had to be clamped at zero.
    pub fn clamp_events(&self) -> usize {
        self.clamp_events
    }

    /// Number of sign changes of the inter-tank level differences.
    pub fn crossings(&self) -> usize {
        self.crossings
    }

    /// One RK4 step without the non-negativity clamp.
    pub fn rk4(&self, x: &[f64; 3], u: &[f64; 2], dt: f64) -> [f64; 3] {
        let f = |x: &[f64; 3]| three_tank_field(&self.params, x, u);
        let add = |x: &[f64; 3], k: &[f64; 3], s: f64| {
            [x[0] + s * k[0], x[1] + s * k[1], x[2] + s * k[2]]
        };
        let k1 = f(x);
        let k2 = f(&add(x, &k1, 0.5 * dt));
        let k3 = f(&add(x, &k2, 0.5 * dt));
        let k4 = f(&add(x, &k3, dt));
        let mut out = *x;
        for i in 0..3 {
            out[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        out
    }
}

impl Plant for ThreeTankPlant {
    fn kind(&self) -> &'static str {
        Self::KIND
    }

    fn inputs(&self) -> usize {
        2
    }

    fn outputs(&self) -> usize {
        3
    }

    fn output(&self) -> Vec<f64> {
        self.levels.to_vec()
    }

    fn step(&mut self, u: &[f64], dt: f64) -> Result<()> {
        check_inputs(u, 2)?;
        let before = self.levels;
        let mut next = self.rk4(&before, &[u[0], u[1]], dt);
        if next.iter().any(|&x| x < 0.0) {
            log::debug!("three-tank: clamping negative level {next:?}");
            self.clamp_events += 1;
            for x in &mut next {
                *x = x.max(0.0);
            }
        }
        let sign_changed = |a: f64, b: f64| a.signum() != b.signum() && a != 0.0 && b != 0.0;
        if sign_changed(before[0] - before[2], next[0] - next[2])
            || sign_changed(before[2] - before[1], next[2] - next[1])
        {
            log::trace!("three-tank: inter-tank flow reversed");
            self.crossings += 1;
        }
        self.levels = next;
        Ok(())
    }

    fn metadata(&self) -> Vec<OutputMetadata> {
        vec![
            OutputMetadata {
                order: Some(1),
                input_nonlinear: false,
            };
            3
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn default_constants() {
        let p = ThreeTankParams::default();
        assert_eq!(p.area, 0.0154);
        assert_eq!(p.pipe_area, 5e-5);
        assert_eq!(p.gravity, 9.81);
        assert_eq!(p.mu, [0.5, 0.675, 0.5]);
        let c = p.flow_coefficients();
        assert_abs_diff_eq!(
            c[0],
            0.5 * 5e-5 * (19.62f64).sqrt() / 0.0154,
            epsilon = 1e-15
        );
        assert_eq!(c[0], c[2]);
    }

    #[test]
    fn dry_equilibrium() {
        let p = ThreeTankParams::default();
        assert_eq!(three_tank_field(&p, &[0.0; 3], &[0.0; 2]), [0.0; 3]);
    }

    #[test]
    fn direct_evaluation() {
        let p = ThreeTankParams::default();
        let [c1, c2, c3] = p.flow_coefficients();
        let r = three_tank_field(&p, &[0.4, 0.2, 0.3], &[0.0, 0.0]);
        let s01 = 0.1f64.sqrt();
        assert_abs_diff_eq!(r[0], -c1 * s01, epsilon = 1e-15);
        assert!(r[0] < 0.0);
        assert_abs_diff_eq!(r[2], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r[1], c3 * s01 - c2 * 0.2f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn levels_stay_nonnegative() {
        let mut plant = ThreeTankPlant::new(ThreeTankParams {
            initial: [0.01, 0.001, 0.0],
            ..Default::default()
        })
        .unwrap();
        for _ in 0..20_000 {
            plant.step(&[0.0, 0.0], 0.01).unwrap();
            assert!(plant.levels().iter().all(|&x| x >= 0.0));
        }
    }

    #[test]
    fn invalid_params() {
        let p = ThreeTankParams {
            area: 0.0,
            ..Default::default()
        };
        assert!(ThreeTankPlant::new(p).is_err());
        let p = ThreeTankParams {
            initial: [-0.1, 0.0, 0.0],
            ..Default::default()
        };
        assert!(ThreeTankPlant::new(p).is_err());
    }

    proptest! {
        #[test]
        fn mass_balance(x1 in -1.0..1.0f64, x2 in -1.0..1.0f64, x3 in -1.0..1.0f64,
                        u1 in 0.0..1e-3f64, u2 in 0.0..1e-3f64) {
            let p = ThreeTankParams::default();
            let r = three_tank_field(&p, &[x1, x2, x3], &[u1, u2]);
            let c2 = p.flow_coefficients()[1];
            let lhs = p.area * (r[0] + r[1] + r[2]);
            let rhs = u1 + u2 - p.area * c2 * torricelli(x2);
            prop_assert!((lhs - rhs).abs() <= 1e-12);
        }
    }
}
