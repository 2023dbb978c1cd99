//! Algebraic estimation of the derivatives of a noisy sampled signal.
//!
//! A truncated Taylor expansion `x_N(t) = sum a_i t^i / i!` on an estimation
//! window satisfies `d^{N+1} x_N / dt^{N+1} = 0`. In the operational domain this
//! gives, for every `m = 0..=N` and an integration order `nu >= N + 1`,
//!
//! ```text
//! s^-nu d^m/ds^m { x^(N)(0) + x^(N-1)(0) s + ... + x(0) s^N } = s^-nu d^m/ds^m { s^(N+1) x }
//! ```
//!
//! Back in the time domain every term becomes either a power of the window
//! length (left side) or an iterated integral of the signal (right side):
//!
//! ```text
//! c / s^a            ->  c t^(a-1) / (a-1)!
//! s^-a d^n x / ds^n  ->  (-1)^n / (a-1)! * int_0^t (t - tau)^(a-1) tau^n x(tau) dtau
//! ```
//!
//! The right side is linear in the samples, so solving the `(N+1) x (N+1)`
//! system once yields one FIR row per derivative order. The iterated integrals
//! average the signal, which is where the noise attenuation comes from.
//!
//! The left-hand coefficients are evaluated with the same trapezoidal quadrature
//! as the right-hand functionals (see [`discrete_lhs`]); this keeps polynomials of
//! degree `<= N` reproduced to round-off on the sampled grid. The closed-form
//! coefficients are available from [`closed_form_lhs`] and are the `h -> 0`
//! limit of the discrete ones.

use std::collections::VecDeque;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reciprocal-condition threshold under which the moment system is rejected.
const MAX_CONDITION: f64 = 1e12;

/// Parameters of an algebraic derivative estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSpec {
    /// Truncation order `N` of the local Taylor polynomial.
    pub taylor_order: usize,
    /// Number of integrations `nu` applied to both sides, `nu >= N + 1`.
    pub integration_order: usize,
    /// Estimation window length in seconds.
    pub window: f64,
    /// Sampling period in seconds.
    pub period: f64,
}

impl EstimatorSpec {
    /// Spec with the default integration order `nu = N + 2`.
    pub fn new(taylor_order: usize, window: f64, period: f64) -> Self {
        Self {
            taylor_order,
            integration_order: taylor_order + 2,
            window,
            period,
        }
    }

    pub fn with_integration_order(mut self, nu: usize) -> Self {
        self.integration_order = nu;
        self
    }

    /// Number of samples `M = round(T/h) + 1` spanned by the window.
    pub fn sample_count(&self) -> usize {
        (self.window / self.period).round() as usize + 1
    }

    /// Window length actually realized on the sampling grid, `(M - 1) h`.
    pub fn effective_window(&self) -> f64 {
        (self.sample_count() - 1) as f64 * self.period
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.taylor_order;
        if !(self.period.is_finite() && self.period > 0.0) {
            return Err(Error::EstimatorSpec(format!(
                "sample period must be positive, got {}",
                self.period
            )));
        }
        if !(self.window.is_finite() && self.window > 0.0) {
            return Err(Error::EstimatorSpec(format!(
                "window length must be positive, got {}",
                self.window
            )));
        }
        if self.integration_order < n + 1 {
            return Err(Error::EstimatorSpec(format!(
                "integration order {} is below taylor order + 1 = {}",
                self.integration_order,
                n + 1
            )));
        }
        let m = self.sample_count();
        if m < n + 2 {
            return Err(Error::EstimatorSpec(format!(
                "window of {m} samples cannot resolve {} derivatives (need at least {})",
                n + 1,
                n + 2
            )));
        }
        Ok(())
    }
}

/// Samples of a signal over one estimation window, oldest first.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalWindow {
    pub samples: Vec<f64>,
    pub period: f64,
}

impl SignalWindow {
    pub fn new(samples: Vec<f64>, period: f64) -> Self {
        Self { samples, period }
    }

    /// Samples `f(k h)` for `k = 0..count`.
    pub fn sample_fn(count: usize, period: f64, f: impl Fn(f64) -> f64) -> Self {
        let samples = (0..count).map(|k| f(k as f64 * period)).collect();
        Self { samples, period }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// The same window read backwards in time.
    pub fn reversed(&self) -> Self {
        let mut samples = self.samples.clone();
        samples.reverse();
        Self {
            samples,
            period: self.period,
        }
    }
}

/// Precomputed FIR weights: row `i` estimates the `i`-th derivative at the
/// oldest sample of a window.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorKernel {
    spec: EstimatorSpec,
    window: f64,
    weights: Vec<Vec<f64>>,
}

impl EstimatorKernel {
    pub fn spec(&self) -> &EstimatorSpec {
        &self.spec
    }

    /// Window length realized on the grid; may differ from the requested one
    /// when the period does not divide it.
    pub fn window(&self) -> f64 {
        self.window
    }

    pub fn sample_count(&self) -> usize {
        self.weights[0].len()
    }

    pub fn order(&self) -> usize {
        self.spec.taylor_order
    }

    /// Rows indexed by derivative order, columns by sample index (oldest first).
    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn row(&self, order: usize) -> &[f64] {
        &self.weights[order]
    }

    fn check(&self, window: &SignalWindow) -> Result<()> {
        if window.len() != self.sample_count() {
            return Err(Error::WindowLength {
                expected: self.sample_count(),
                got: window.len(),
            });
        }
        let rel = (window.period - self.spec.period).abs() / self.spec.period;
        if rel > 1e-9 {
            return Err(Error::EstimatorSpec(format!(
                "window sampled at {} s, kernel built for {} s",
                window.period, self.spec.period
            )));
        }
        Ok(())
    }

    fn apply(&self, samples: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .map(|row| row.iter().zip(samples).map(|(w, x)| w * x).sum())
            .collect()
    }

    /// Estimates `x(0), x'(0), ..., x^(N)(0)` at the oldest sample.
    pub fn estimate_at_origin(&self, window: &SignalWindow) -> Result<Vec<f64>> {
        self.check(window)?;
        Ok(self.apply(&window.samples))
    }

    /// Estimates anchored at the newest sample.
    ///
    /// Reading the window backwards turns `x(T - tau)` into a signal whose
    /// `i`-th derivative at its origin is `(-1)^i x^(i)(T)`.
    pub fn estimate_at_now(&self, window: &SignalWindow) -> Result<Vec<f64>> {
        self.check(window)?;
        let reversed: Vec<f64> = window.samples.iter().rev().copied().collect();
        let mut est = self.apply(&reversed);
        for v in est.iter_mut().skip(1).step_by(2) {
            *v = -*v;
        }
        Ok(est)
    }

    /// Low-pass filtered value of the signal at the newest sample.
    pub fn denoise(&self, window: &SignalWindow) -> Result<f64> {
        Ok(self.estimate_at_now(window)?[0])
    }

    /// Writes the weights as CSV: one row per derivative order.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        let mut header = vec!["order".to_string()];
        header.extend((0..self.sample_count()).map(|k| format!("w{k}")));
        wtr.write_record(&header)?;
        for (i, row) in self.weights.iter().enumerate() {
            let mut rec = vec![i.to_string()];
            rec.extend(row.iter().map(|w| format!("{w:.16e}")));
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

fn binomial(n: usize, k: usize) -> f64 {
    factorial(n) / (factorial(k) * factorial(n - k))
}

/// Unit-window grid `u_k = k / (M - 1)`.
fn unit_grid(m: usize) -> Vec<f64> {
    let step = 1.0 / (m - 1) as f64;
    (0..m).map(|k| k as f64 * step).collect()
}

/// Discrete weights of `s^-a d^n x / ds^n` evaluated at `t = 1` on the unit
/// window. `a = 0` is the plain multiplication `(-t)^n x(t)` at the window end.
fn iterated_integral(a: usize, n: usize, grid: &[f64]) -> Vec<f64> {
    let m = grid.len();
    let sign = if n.is_multiple_of(2) { 1.0 } else { -1.0 };
    let mut w = vec![0.0; m];
    if a == 0 {
        w[m - 1] = sign;
        return w;
    }
    let step = 1.0 / (m - 1) as f64;
    let scale = sign / factorial(a - 1);
    for (k, (wk, &u)) in w.iter_mut().zip(grid).enumerate() {
        let trap = if k == 0 || k == m - 1 { 0.5 } else { 1.0 };
        *wk = scale * (1.0 - u).powi(a as i32 - 1) * u.powi(n as i32) * trap * step;
    }
    w
}

/// Right-hand functionals, one row per equation `m = 0..=N`, on the unit window.
///
/// Leibniz on `d^m/ds^m (s^(N+1) x)` gives terms
/// `C(m, j) (N+1)! / (N+1-m+j)! s^(N+1-m+j) d^j x/ds^j`, each then divided by `s^nu`.
pub fn rhs_functionals(spec: &EstimatorSpec) -> DMatrix<f64> {
    let n = spec.taylor_order;
    let nu = spec.integration_order;
    let m_samples = spec.sample_count();
    let grid = unit_grid(m_samples);
    let mut q = DMatrix::zeros(n + 1, m_samples);
    for m in 0..=n {
        for j in 0..=m {
            let coeff = binomial(m, j) * factorial(n + 1) / factorial(n + 1 - m + j);
            let a = nu - n - 1 + m - j;
            let w = iterated_integral(a, j, &grid);
            for (k, wk) in w.iter().enumerate() {
                q[(m, k)] += coeff * wk;
            }
        }
    }
    q
}

/// Closed-form left-hand coefficients on the unit window: equation `m`,
/// unknown `x^(i)(0)`. Anti-triangular with nonzero anti-diagonal.
pub fn closed_form_lhs(spec: &EstimatorSpec) -> DMatrix<f64> {
    let n = spec.taylor_order;
    let nu = spec.integration_order;
    DMatrix::from_fn(n + 1, n + 1, |m, i| {
        if i + m > n {
            0.0
        } else {
            factorial(n - i) / factorial(n - i - m) / factorial(nu + i + m - n - 1)
        }
    })
}

/// Left-hand coefficients obtained by applying the discrete right-hand
/// functionals to the monomials `u^i / i!`. Converges to [`closed_form_lhs`].
pub fn discrete_lhs(spec: &EstimatorSpec, q: &DMatrix<f64>) -> DMatrix<f64> {
    let n = spec.taylor_order;
    let grid = unit_grid(spec.sample_count());
    let mut c = DMatrix::zeros(n + 1, n + 1);
    for i in 0..=n {
        let basis = DVector::from_iterator(
            grid.len(),
            grid.iter().map(|u| u.powi(i as i32) / factorial(i)),
        );
        let col = q * basis;
        c.set_column(i, &col);
    }
    c
}

fn invert_checked(c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let inv = c
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::EstimatorSpec("moment system is singular".into()))?;
    let norm1 = |a: &DMatrix<f64>| {
        a.column_iter()
            .map(|col| col.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    };
    let cond = norm1(c) * norm1(&inv);
    if !cond.is_finite() || cond > MAX_CONDITION {
        return Err(Error::EstimatorSpec(format!(
            "moment system is numerically singular (condition {cond:.3e})"
        )));
    }
    Ok(inv)
}

/// Builds the FIR kernel for `spec`.
pub fn build_kernel(spec: EstimatorSpec) -> Result<EstimatorKernel> {
    spec.validate()?;
    let window = spec.effective_window();
    if (window - spec.window).abs() > 1e-9 * spec.window {
        log::debug!(
            "window {} s is not a multiple of {} s, using {} s",
            spec.window,
            spec.period,
            window
        );
    }
    let q = rhs_functionals(&spec);
    let c = discrete_lhs(&spec, &q);
    let unit = invert_checked(&c)? * q;
    let weights = unit
        .row_iter()
        .enumerate()
        .map(|(i, row)| {
            let scale = window.powi(i as i32);
            row.iter().map(|w| w / scale).collect::<Vec<_>>()
        })
        .collect::<Vec<_>>();
    if weights.iter().flatten().any(|w| !w.is_finite()) {
        return Err(Error::EstimatorSpec("kernel has non-finite weights".into()));
    }
    Ok(EstimatorKernel {
        spec,
        window,
        weights,
    })
}

/// Solves the moment system for one window directly, without a precomputed
/// kernel. Mathematically identical to [`EstimatorKernel::estimate_at_origin`].
pub fn solve_direct(spec: EstimatorSpec, window: &SignalWindow) -> Result<Vec<f64>> {
    spec.validate()?;
    if window.len() != spec.sample_count() {
        return Err(Error::WindowLength {
            expected: spec.sample_count(),
            got: window.len(),
        });
    }
    let q = rhs_functionals(&spec);
    let rhs = &q * DVector::from_column_slice(&window.samples);
    let c = discrete_lhs(&spec, &q);
    let unit = c
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::EstimatorSpec("moment system is singular".into()))?;
    let t = spec.effective_window();
    Ok(unit
        .iter()
        .enumerate()
        .map(|(i, z)| z / t.powi(i as i32))
        .collect())
}

/// Fixed-capacity sample history feeding a kernel in real time.
#[derive(Debug, Clone)]
pub struct SampleBuffer {
    capacity: usize,
    period: f64,
    samples: VecDeque<f64>,
}

impl SampleBuffer {
    pub fn new(capacity: usize, period: f64) -> Self {
        Self {
            capacity,
            period,
            samples: VecDeque::with_capacity(capacity),
        }
    }

    pub fn for_kernel(kernel: &EstimatorKernel) -> Self {
        Self::new(kernel.sample_count(), kernel.spec().period)
    }

    pub fn push(&mut self, x: f64) {
        if self.samples.len() == self.capacity {
            self.samples.pop_front();
        }
        self.samples.push_back(x);
    }

    pub fn is_full(&self) -> bool {
        self.samples.len() == self.capacity
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn clear(&mut self) {
        self.samples.clear();
    }

    /// Current contents, oldest first. `None` until the buffer is full.
    pub fn window(&self) -> Option<SignalWindow> {
        self.is_full().then(|| SignalWindow {
            samples: self.samples.iter().copied().collect(),
            period: self.period,
        })
    }
}
