use serde::{Deserialize, Serialize};

use super::{check_inputs, OutputMetadata, Plant};
use crate::error::{Error, Result};

/// Per-channel parameters of `y_j' = c_j - a_j y_j + b_j u_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatchedParams {
    /// Constant drift `c_j`.
    #[serde(default)]
    pub offset: Vec<f64>,
    /// Input gain `b_j`.
    pub gain: Vec<f64>,
    /// Self-decay rate `a_j`.
    #[serde(default)]
    pub decay: Vec<f64>,
    #[serde(default)]
    pub initial: Vec<f64>,
}

/// Decoupled first-order plant with the structure of an ultra-local model.
/// Exposes exact derivatives for the perfect-derivative estimator.
#[derive(Debug, Clone)]
pub struct MatchedPlant {
    offset: Vec<f64>,
    gain: Vec<f64>,
    decay: Vec<f64>,
    y: Vec<f64>,
    last_u: Vec<f64>,
}

impl MatchedPlant {
    pub const KIND: &'static str = "first-order";

    pub fn new(
        offset: Vec<f64>,
        gain: Vec<f64>,
        decay: Vec<f64>,
        initial: Vec<f64>,
    ) -> Result<Self> {
        let n = gain.len();
        if n == 0 {
            return Err(Error::config(
                "first-order plant needs at least one channel",
            ));
        }
        let fill = |v: Vec<f64>, name: &str| -> Result<Vec<f64>> {
            match v.len() {
                0 => Ok(vec![0.0; n]),
                l if l == n => Ok(v),
                l => Err(Error::config(format!(
                    "first-order plant: `{name}` has {l} entries, expected {n}"
                ))),
            }
        };
        Ok(Self {
            offset: fill(offset, "offset")?,
            decay: fill(decay, "decay")?,
            y: fill(initial, "initial")?,
            gain,
            last_u: vec![0.0; n],
        })
    }

    pub fn from_params(p: MatchedParams) -> Result<Self> {
        Self::new(p.offset, p.gain, p.decay, p.initial)
    }

    fn rate(&self, j: usize, y: f64, u: f64) -> f64 {
        self.offset[j] - self.decay[j] * y + self.gain[j] * u
    }
}

impl Plant for MatchedPlant {
    fn kind(&self) -> &'static str {
        Self::KIND
    }

    fn inputs(&self) -> usize {
        self.gain.len()
    }

    fn outputs(&self) -> usize {
        self.gain.len()
    }

    fn output(&self) -> Vec<f64> {
        self.y.clone()
    }

    fn step(&mut self, u: &[f64], dt: f64) -> Result<()> {
        check_inputs(u, self.gain.len())?;
        for (j, &uj) in u.iter().enumerate() {
            let y = self.y[j];
            let k1 = self.rate(j, y, uj);
            let k2 = self.rate(j, y + 0.5 * dt * k1, uj);
            let k3 = self.rate(j, y + 0.5 * dt * k2, uj);
            let k4 = self.rate(j, y + dt * k3, uj);
            self.y[j] = y + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        self.last_u.copy_from_slice(u);
        Ok(())
    }

    fn metadata(&self) -> Vec<OutputMetadata> {
        vec![
            OutputMetadata {
                order: Some(1),
                input_nonlinear: false,
            };
            self.gain.len()
        ]
    }

    /// Derivatives with the last applied input held: `y^(k) = (-a)^(k-1) y'`.
    fn exact_derivatives(&self, order: usize) -> Option<Vec<Vec<f64>>> {
        Some(
            (0..self.y.len())
                .map(|j| {
                    let mut d = vec![self.y[j]];
                    let first = self.rate(j, self.y[j], self.last_u[j]);
                    let mut cur = first;
                    for _ in 1..=order {
                        d.push(cur);
                        cur *= -self.decay[j];
                    }
                    d
                })
                .collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn exact_derivatives_follow_last_input() {
        let mut p = MatchedPlant::new(vec![0.5], vec![2.0], vec![1.0], vec![1.0]).unwrap();
        let d = p.exact_derivatives(2).unwrap();
        assert_eq!(d[0], vec![1.0, -0.5, 0.5]);
        p.step(&[1.0], 0.1).unwrap();
        let d = p.exact_derivatives(1).unwrap();
        assert_abs_diff_eq!(d[0][1], 0.5 - d[0][0] + 2.0, epsilon = 1e-15);
    }

    #[test]
    fn constant_drift_is_integrated_exactly() {
        let mut p = MatchedPlant::new(vec![0.3], vec![10.0], vec![], vec![]).unwrap();
        for _ in 0..100 {
            p.step(&[0.01], 0.01).unwrap();
        }
        assert_abs_diff_eq!(p.output()[0], 0.4, epsilon = 1e-12);
    }

    #[test]
    fn length_mismatch() {
        assert!(MatchedPlant::new(vec![0.0; 2], vec![1.0], vec![], vec![]).is_err());
        assert!(MatchedPlant::new(vec![], vec![], vec![], vec![]).is_err());
    }
}
