//! Smooth set-point transitions for the reference outputs.
//!
//! Between two breakpoints with different values the reference follows a
//! polynomial smoothstep of degree `2r + 1` whose first `r` derivatives vanish
//! at both ends; elsewhere it is constant.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Coefficients (ascending powers) of `S_r(x) = x^(r+1) sum_k C(r+k, k) (1-x)^k`.
fn smoothstep_coeffs(r: usize) -> Vec<f64> {
    let mut coeffs = vec![0.0; 2 * r + 2];
    for k in 0..=r {
        let c = binomial(r + k, k);
        // (1 - x)^k = sum_j C(k, j) (-x)^j
        for j in 0..=k {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            coeffs[r + 1 + j] += c * sign * binomial(k, j);
        }
    }
    coeffs
}

fn derive(coeffs: &[f64]) -> Vec<f64> {
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(p, c)| c * p as f64)
        .collect()
}

fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Segment {
    t0: f64,
    t1: f64,
    v0: f64,
    v1: f64,
}

/// Piecewise-smooth reference built from `(time, value)` breakpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceProfile {
    initial: f64,
    segments: Vec<Segment>,
    smoothness: usize,
    /// Derivatives of the unit smoothstep, index `d` = order.
    shape: Vec<Vec<f64>>,
}

/// Serialized form of a profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileConfig {
    pub breakpoints: Vec<(f64, f64)>,
    #[serde(default = "default_smoothness")]
    pub smoothness: usize,
}

fn default_smoothness() -> usize {
    2
}

impl ReferenceProfile {
    /// Breakpoints must be strictly increasing in time. Consecutive breakpoints
    /// with equal values hold the value; otherwise they define a transition.
    pub fn from_breakpoints(breakpoints: &[(f64, f64)], smoothness: usize) -> Result<Self> {
        let first = breakpoints
            .first()
            .ok_or_else(|| Error::config("reference needs at least one breakpoint"))?;
        if breakpoints
            .iter()
            .any(|(t, v)| !t.is_finite() || !v.is_finite())
        {
            return Err(Error::config("reference breakpoints must be finite"));
        }
        let mut segments = Vec::new();
        for pair in breakpoints.windows(2) {
            let ((t0, v0), (t1, v1)) = (pair[0], pair[1]);
            if t1 <= t0 {
                return Err(Error::config(format!(
                    "reference breakpoints must be strictly increasing in time ({t0} then {t1})"
                )));
            }
            if v0 != v1 {
                segments.push(Segment { t0, t1, v0, v1 });
            }
        }
        let mut shape = vec![smoothstep_coeffs(smoothness)];
        for d in 0..smoothness + 1 {
            let next = derive(&shape[d]);
            shape.push(next);
        }
        Ok(Self {
            initial: first.1,
            segments,
            smoothness,
            shape,
        })
    }

    pub fn from_config(cfg: &ProfileConfig) -> Result<Self> {
        Self::from_breakpoints(&cfg.breakpoints, cfg.smoothness)
    }

    pub fn constant(value: f64) -> Self {
        Self::from_breakpoints(&[(0.0, value)], default_smoothness()).expect("single breakpoint")
    }

    pub fn smoothness(&self) -> usize {
        self.smoothness
    }

    /// Difference between the largest and smallest reference value.
    pub fn span(&self) -> f64 {
        let values =
            std::iter::once(self.initial).chain(self.segments.iter().flat_map(|s| [s.v0, s.v1]));
        let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
        hi - lo
    }

    /// `(y*, y*', ..., y*^(r))` at time `t`.
    pub fn eval(&self, t: f64) -> Vec<f64> {
        self.eval_to(t, self.smoothness)
    }

    /// Reference and its derivatives up to `order`. Orders above the
    /// smoothness are still returned (they are the polynomial's derivatives).
    pub fn eval_to(&self, t: f64, order: usize) -> Vec<f64> {
        let mut out = vec![0.0; order + 1];
        let mut value = self.initial;
        for s in &self.segments {
            if t < s.t0 {
                break;
            }
            if t >= s.t1 {
                value = s.v1;
                continue;
            }
            let dur = s.t1 - s.t0;
            let x = (t - s.t0) / dur;
            let amp = s.v1 - s.v0;
            out[0] = s.v0 + amp * horner(&self.shape[0], x);
            for (d, o) in out.iter_mut().enumerate().skip(1) {
                let coeffs = self.shape.get(d).map(Vec::as_slice).unwrap_or(&[]);
                *o = amp * horner(coeffs, x) / dur.powi(d as i32);
            }
            return out;
        }
        out[0] = value;
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn smoothstep_known_forms() {
        assert_eq!(smoothstep_coeffs(0), vec![0.0, 1.0]);
        assert_eq!(smoothstep_coeffs(1), vec![0.0, 0.0, 3.0, -2.0]);
        assert_eq!(smoothstep_coeffs(2), vec![0.0, 0.0, 0.0, 10.0, -15.0, 6.0]);
    }

    #[test]
    fn before_first_segment() {
        let p =
            ReferenceProfile::from_breakpoints(&[(0.0, 0.2), (5.0, 0.2), (10.0, 1.0)], 2).unwrap();
        assert_eq!(p.eval(1.0), vec![0.2, 0.0, 0.0]);
        assert_eq!(p.eval(20.0), vec![1.0, 0.0, 0.0]);
        assert_abs_diff_eq!(p.span(), 0.8, epsilon = 1e-15);
    }

    #[test]
    fn quintic_midpoint_and_ends() {
        let p = ReferenceProfile::from_breakpoints(&[(0.0, 0.0), (1.0, 1.0)], 2).unwrap();
        assert_abs_diff_eq!(p.eval(0.5)[0], 0.5, epsilon = 1e-15);
        let start = p.eval(0.0);
        assert_eq!(start[0], 0.0);
        assert_abs_diff_eq!(start[1], 0.0, epsilon = 1e-15);
        let end = p.eval(1.0 - 1e-12);
        assert_abs_diff_eq!(end[1], 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(end[2], 0.0, epsilon = 1e-9);
    }

    #[test]
    fn rejects_unordered_breakpoints() {
        assert!(ReferenceProfile::from_breakpoints(&[(1.0, 0.0), (1.0, 1.0)], 2).is_err());
        assert!(ReferenceProfile::from_breakpoints(&[], 2).is_err());
    }

    fn staircase() -> ReferenceProfile {
        ReferenceProfile::from_breakpoints(
            &[(0.0, 0.0), (2.0, 0.0), (6.0, 1.5), (9.0, 1.5), (12.0, -0.5)],
            2,
        )
        .unwrap()
    }

    #[test]
    fn finite_differences_match_derivatives() {
        let p = staircase();
        let dt = 1e-4;
        let mut t = 0.05;
        while t < 14.0 {
            let (a, b) = (p.eval(t - dt), p.eval(t + dt));
            let mid = p.eval(t);
            assert_abs_diff_eq!((b[0] - a[0]) / (2.0 * dt), mid[1], epsilon = 1e-6);
            assert_abs_diff_eq!((b[1] - a[1]) / (2.0 * dt), mid[2], epsilon = 1e-5);
            t += 0.0371;
        }
    }

    #[test]
    fn continuity_at_boundaries() {
        let p = staircase();
        for &tb in &[2.0, 6.0, 9.0, 12.0] {
            let (l, r) = (p.eval(tb - 1e-12), p.eval(tb));
            for d in 0..=2 {
                assert!((l[d] - r[d]).abs() < 1e-9, "t = {tb}, d = {d}");
            }
        }
    }

    #[test]
    fn monotone_transitions() {
        for r in 0..=2 {
            let p = ReferenceProfile::from_breakpoints(&[(0.0, 0.1), (3.0, 0.3)], r).unwrap();
            let mut last = p.eval(0.0)[0];
            for k in 1..=3000 {
                let v = p.eval(k as f64 * 1e-3)[0];
                assert!(v >= last - 1e-15 && v <= 0.3 + 1e-15);
                last = v;
            }
        }
    }

    #[test]
    fn higher_orders_available() {
        let p = ReferenceProfile::from_breakpoints(&[(0.0, 0.0), (1.0, 1.0)], 3).unwrap();
        assert_eq!(p.eval(0.3).len(), 4);
        assert_eq!(p.eval_to(0.3, 1).len(), 2);
    }
}
