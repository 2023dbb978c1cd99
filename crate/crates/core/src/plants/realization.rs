//! Controllable canonical realizations of SISO transfer functions.

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};

/// Real polynomial, coefficients in ascending powers of `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly(pub Vec<f64>);

impl Poly {
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.len() > 1 && coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        Poly(coeffs)
    }

    /// `prod_k (s - r_k)`.
    pub fn from_roots(roots: &[f64]) -> Self {
        roots
            .iter()
            .fold(Poly(vec![1.0]), |acc, &r| acc.mul(&Poly(vec![-r, 1.0])))
    }

    /// `s^k`
    pub fn monomial(k: usize) -> Self {
        let mut c = vec![0.0; k + 1];
        c[k] = 1.0;
        Poly(c)
    }

    pub fn degree(&self) -> usize {
        self.0.len() - 1
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0.0)
    }

    pub fn leading(&self) -> f64 {
        *self.0.last().expect("non-empty")
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = vec![0.0; self.0.len() + other.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in other.0.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly::new(out)
    }

    pub fn eval(&self, s: Complex<f64>) -> Complex<f64> {
        self.0
            .iter()
            .rev()
            .fold(Complex::new(0.0, 0.0), |acc, &c| acc * s + c)
    }
}

/// `x' = A x + B u`, `y = C x + D u`, single input and output.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: DVector<f64>,
    pub d: f64,
}

impl StateSpace {
    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    pub fn derivative(&self, x: &DVector<f64>, u: f64) -> DVector<f64> {
        &self.a * x + &self.b * u
    }

    pub fn output(&self, x: &DVector<f64>, u: f64) -> f64 {
        self.c.dot(x) + self.d * u
    }

    /// Eigenvalues of `A`.
    pub fn poles(&self) -> Vec<Complex<f64>> {
        if self.order() == 0 {
            return Vec::new();
        }
        self.a.complex_eigenvalues().iter().copied().collect()
    }

    /// `C (j w I - A)^-1 B + D`.
    pub fn frequency_response(&self, omega: f64) -> Complex<f64> {
        let n = self.order();
        let d = Complex::new(self.d, 0.0);
        if n == 0 {
            return d;
        }
        let jw = Complex::new(0.0, omega);
        let m = DMatrix::from_fn(n, n, |i, k| {
            let diag = if i == k { jw } else { Complex::new(0.0, 0.0) };
            diag - self.a[(i, k)]
        });
        let b = DVector::from_iterator(n, self.b.iter().map(|&v| Complex::new(v, 0.0)));
        let x = m.lu().solve(&b).expect("j w is not an eigenvalue");
        x.iter()
            .zip(self.c.iter())
            .fold(d, |acc, (xi, &ci)| acc + xi * ci)
    }

    /// Integrates one RK4 step with `u` held constant.
    pub fn rk4_step(&self, x: &mut DVector<f64>, u: f64, dt: f64) {
        if self.order() == 0 {
            return;
        }
        let k1 = self.derivative(x, u);
        let k2 = self.derivative(&(&*x + &k1 * (0.5 * dt)), u);
        let k3 = self.derivative(&(&*x + &k2 * (0.5 * dt)), u);
        let k4 = self.derivative(&(&*x + &k3 * dt), u);
        *x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
    }
}

/// Controllable canonical realization of `num / den`.
pub fn realize_tf(num: &Poly, den: &Poly) -> Result<StateSpace> {
    if den.is_zero() {
        return Err(Error::TransferFunction("zero denominator".into()));
    }
    let (num, den) = (Poly::new(num.0.clone()), Poly::new(den.0.clone()));
    if !num.is_zero() && num.degree() > den.degree() {
        return Err(Error::TransferFunction(format!(
            "improper: numerator degree {} exceeds denominator degree {}",
            num.degree(),
            den.degree()
        )));
    }
    let n = den.degree();
    let lead = den.leading();
    let a_coeffs: Vec<f64> = den.0.iter().map(|c| c / lead).collect();
    let mut b_coeffs: Vec<f64> = num.0.iter().map(|c| c / lead).collect();
    b_coeffs.resize(n + 1, 0.0);

    // strip the direct feedthrough: num = d den + remainder
    let d = b_coeffs[n];
    let rem: Vec<f64> = (0..n).map(|k| b_coeffs[k] - d * a_coeffs[k]).collect();

    let mut a = DMatrix::zeros(n, n);
    for i in 0..n.saturating_sub(1) {
        a[(i, i + 1)] = 1.0;
    }
    for k in 0..n {
        a[(n - 1, k)] = -a_coeffs[k];
    }
    let mut b = DVector::zeros(n);
    if n > 0 {
        b[n - 1] = 1.0;
    }
    Ok(StateSpace {
        a,
        b,
        c: DVector::from_vec(rem),
        d,
    })
}
