//! Ultra-local models `y^(n) = F + alpha . u + beta`, one per controlled output.
//!
//! `alpha` and `beta` are tuning constants, not physical parameters. `F` lumps
//! everything else together and is re-estimated every control period from the
//! measured output derivative and the control applied over the previous period.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::plants::OutputMetadata;

#[derive(Debug, Clone, PartialEq)]
pub struct UltraLocalChannel {
    order: usize,
    alpha: Vec<f64>,
    beta: f64,
    actuator: usize,
    last_f: f64,
}

impl UltraLocalChannel {
    /// `alpha` holds one gain per plant input; `actuator` is the input this
    /// channel's control law drives.
    pub fn new(order: usize, alpha: Vec<f64>, beta: f64, actuator: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::config("ultra-local derivative order must be >= 1"));
        }
        if actuator >= alpha.len() {
            return Err(Error::config(format!(
                "actuator index {actuator} out of range for {} inputs",
                alpha.len()
            )));
        }
        if alpha.iter().any(|a| !a.is_finite()) || !beta.is_finite() {
            return Err(Error::config("ultra-local parameters must be finite"));
        }
        if alpha.iter().all(|&a| a == 0.0) {
            return Err(Error::config(
                "channel has no control authority: every alpha is zero",
            ));
        }
        Ok(Self {
            order,
            alpha,
            beta,
            actuator,
            last_f: 0.0,
        })
    }

    /// Channel whose only nonzero gain is on its own actuator.
    pub fn decoupled(
        order: usize,
        inputs: usize,
        actuator: usize,
        gain: f64,
        beta: f64,
    ) -> Result<Self> {
        let mut alpha = vec![0.0; inputs];
        if actuator < inputs {
            alpha[actuator] = gain;
        }
        Self::new(order, alpha, beta, actuator)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn actuator(&self) -> usize {
        self.actuator
    }

    /// Gain of the channel's own actuator.
    pub fn control_gain(&self) -> f64 {
        self.alpha[self.actuator]
    }

    pub fn is_decoupled(&self) -> bool {
        self.alpha
            .iter()
            .enumerate()
            .all(|(i, &a)| i == self.actuator || a == 0.0)
    }

    pub fn last_f(&self) -> f64 {
        self.last_f
    }

    /// Forces the stored estimate, e.g. to zero during estimator warm-up.
    pub fn set_last_f(&mut self, f: f64) {
        self.last_f = f;
    }

    /// `F = [y^(n)]_e - sum_i alpha_i u_i(k-1) - beta`.
    ///
    /// `u_prev` must be the control held over the previous sampling interval.
    pub fn estimate_f(&mut self, y_derivative: f64, u_prev: &[f64]) -> Result<f64> {
        if u_prev.len() != self.alpha.len() {
            return Err(Error::Dimension {
                expected: self.alpha.len(),
                got: u_prev.len(),
            });
        }
        let drive: f64 = self.alpha.iter().zip(u_prev).map(|(a, u)| a * u).sum();
        self.last_f = y_derivative - drive - self.beta;
        Ok(self.last_f)
    }

    /// Advisory checks against whatever the plant declares about itself.
    pub fn validate(&self, meta: &OutputMetadata) -> Vec<ChannelWarning> {
        let mut warnings = Vec::new();
        if let Some(declared) = meta.order {
            if self.order > declared {
                warnings.push(ChannelWarning::OrderExceedsPlant {
                    order: self.order,
                    declared,
                });
            }
        }
        if meta.input_nonlinear && self.beta == 0.0 {
            warnings.push(ChannelWarning::ZeroBetaOnNonlinearInput);
        }
        warnings
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ChannelWarning {
    OrderExceedsPlant { order: usize, declared: usize },
    ZeroBetaOnNonlinearInput,
}

impl fmt::Display for ChannelWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChannelWarning::OrderExceedsPlant { order, declared } => write!(
                f,
                "derivative order {order} exceeds the plant's declared input-output order {declared}"
            ),
            ChannelWarning::ZeroBetaOnNonlinearInput => write!(
                f,
                "beta is zero but the input does not enter the output equation linearly at u = 0"
            ),
        }
    }
}

/// Outputs retained to make a plant with more outputs than inputs square.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SquareSelection {
    selected: Vec<usize>,
}

impl SquareSelection {
    pub fn new(selected: Vec<usize>, outputs: usize, inputs: usize) -> Result<Self> {
        if selected.len() != inputs {
            return Err(Error::config(format!(
                "need exactly {inputs} controlled outputs for a square system, got {}",
                selected.len()
            )));
        }
        for (k, &j) in selected.iter().enumerate() {
            if j >= outputs {
                return Err(Error::config(format!(
                    "output index {j} out of range ({outputs} outputs)"
                )));
            }
            if selected[..k].contains(&j) {
                return Err(Error::config(format!("output {j} selected twice")));
            }
        }
        Ok(Self { selected })
    }

    pub fn outputs(&self) -> &[usize] {
        &self.selected
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn zero_case() {
        let mut ch = UltraLocalChannel::decoupled(1, 2, 0, 10.0, 0.0).unwrap();
        assert_eq!(ch.estimate_f(0.0, &[0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn linear_example_channel() {
        let mut ch = UltraLocalChannel::new(1, vec![10.0], 0.0, 0).unwrap();
        assert_abs_diff_eq!(ch.estimate_f(3.5, &[0.1]).unwrap(), 2.5, epsilon = 1e-12);
        assert_abs_diff_eq!(ch.last_f(), 2.5, epsilon = 1e-12);
    }

    #[test]
    fn three_tank_channel() {
        let mut ch = UltraLocalChannel::new(1, vec![200.0], 0.0, 0).unwrap();
        assert_abs_diff_eq!(
            ch.estimate_f(0.004, &[1e-5]).unwrap(),
            0.002,
            epsilon = 1e-15
        );
    }

    #[test]
    fn coupled_row_and_beta() {
        let mut ch = UltraLocalChannel::new(2, vec![1.0, -2.0, 0.5], 0.25, 1).unwrap();
        assert!(!ch.is_decoupled());
        assert_eq!(ch.control_gain(), -2.0);
        let f = ch.estimate_f(4.0, &[1.0, 1.0, 2.0]).unwrap();
        assert_abs_diff_eq!(f, 4.0 - (1.0 - 2.0 + 1.0) - 0.25, epsilon = 1e-12);
    }

    #[test]
    fn invalid_channels() {
        assert!(UltraLocalChannel::new(0, vec![1.0], 0.0, 0).is_err());
        assert!(UltraLocalChannel::new(1, vec![0.0, 0.0], 0.0, 0).is_err());
        assert!(UltraLocalChannel::new(1, vec![1.0], 0.0, 1).is_err());
        let mut ch = UltraLocalChannel::new(1, vec![1.0, 0.0], 0.0, 0).unwrap();
        assert!(matches!(
            ch.estimate_f(0.0, &[0.0]),
            Err(Error::Dimension {
                expected: 2,
                got: 1
            })
        ));
    }

    #[test]
    fn warnings() {
        let tank = OutputMetadata {
            order: Some(1),
            input_nonlinear: false,
        };
        let ch1 = UltraLocalChannel::decoupled(1, 2, 0, 200.0, 0.0).unwrap();
        assert!(ch1.validate(&tank).is_empty());

        let order2 = OutputMetadata {
            order: Some(2),
            input_nonlinear: false,
        };
        let ch3 = UltraLocalChannel::decoupled(3, 2, 0, 1.0, 0.0).unwrap();
        assert_eq!(
            ch3.validate(&order2),
            vec![ChannelWarning::OrderExceedsPlant {
                order: 3,
                declared: 2
            }]
        );

        let nonlinear = OutputMetadata {
            order: None,
            input_nonlinear: true,
        };
        assert_eq!(
            ch1.validate(&nonlinear),
            vec![ChannelWarning::ZeroBetaOnNonlinearInput]
        );
        let with_beta = UltraLocalChannel::decoupled(1, 2, 0, 1.0, 0.1).unwrap();
        assert!(with_beta.validate(&nonlinear).is_empty());
    }

    #[test]
    fn square_selection() {
        assert_eq!(
            SquareSelection::new(vec![0, 1], 3, 2).unwrap().outputs(),
            &[0, 1]
        );
        assert!(SquareSelection::new(vec![0], 3, 2).is_err());
        assert!(SquareSelection::new(vec![1, 1], 3, 2).is_err());
        assert!(SquareSelection::new(vec![0, 3], 3, 2).is_err());
    }

    /// Known channel y' = -y + a u with u piecewise constant: feeding the exact
    /// derivative recovers f(y) = -y.
    #[test]
    fn recovers_known_dynamics() {
        let a = 3.0;
        let mut ch = UltraLocalChannel::decoupled(1, 1, 0, a, 0.0).unwrap();
        let (h, mut y, mut u_prev) = (0.01f64, 0.5, 0.0);
        for k in 0..200 {
            let ydot = -y + a * u_prev;
            let f = ch.estimate_f(ydot, &[u_prev]).unwrap();
            assert_abs_diff_eq!(f, -y, epsilon = 1e-12);
            let u = (k as f64 * 0.1).sin();
            // exact solution of y' = -y + a u over one interval
            let eq = a * u;
            y = eq + (y - eq) * (-h).exp();
            u_prev = u;
        }
    }

    proptest! {
        #[test]
        fn estimate_is_affine(y in -1e3..1e3f64, u0 in -1e3..1e3f64, u1 in -1e3..1e3f64,
                              a0 in -50.0..50.0f64, a1 in 0.1..50.0f64, beta in -10.0..10.0f64) {
            let mut ch = UltraLocalChannel::new(1, vec![a0, a1], beta, 1).unwrap();
            let f = ch.estimate_f(y, &[u0, u1]).unwrap();
            let expected = y - a0 * u0 - a1 * u1 - beta;
            prop_assert!((f - expected).abs() <= 1e-9 * (1.0 + expected.abs()));
        }
    }
}
