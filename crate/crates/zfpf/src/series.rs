//! Finite Taylor expansions about the origin.
//!
//! A [`TaylorSeries`] holds coefficients `c_0..c_m` of a function at 0 and
//! supports the truncated arithmetic the estimators need: Cauchy products,
//! composition with a series vanishing at 0, pointwise (Horner)
//! evaluation, and log/exp through the Newton recurrence
//! `n*g_n = n*f_n - sum_{k=1}^{n-1} k*g_k*f_{n-k}`.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Relative slack used when deciding whether a constant term is real.
const REALNESS_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct TaylorSeries {
    coeffs: Vec<Complex64>,
}

impl TaylorSeries {
    /// Wraps coefficients `c_0..c_m` (so the vector length is `m + 1`).
    pub fn new(coeffs: Vec<Complex64>) -> Self {
        assert!(!coeffs.is_empty(), "a series has at least a constant term");
        TaylorSeries { coeffs }
    }

    pub fn from_real(coeffs: &[f64]) -> Self {
        Self::new(coeffs.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    /// The zero series of the given truncation order.
    pub fn zero(order: usize) -> Self {
        TaylorSeries {
            coeffs: vec![Complex64::ZERO; order + 1],
        }
    }

    /// Truncation order `m`.
    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Coefficient `c_k`, zero beyond the truncation order.
    pub fn coeff(&self, k: usize) -> Complex64 {
        self.coeffs.get(k).copied().unwrap_or(Complex64::ZERO)
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// Reinterprets the series at truncation order `m`, padding with zeros
    /// or dropping high coefficients as needed.
    pub fn resized(&self, m: usize) -> TaylorSeries {
        let mut coeffs = self.coeffs.clone();
        coeffs.resize(m + 1, Complex64::ZERO);
        TaylorSeries { coeffs }
    }

    pub fn add(&self, other: &TaylorSeries) -> TaylorSeries {
        let m = self.order().max(other.order());
        let coeffs = (0..=m).map(|k| self.coeff(k) + other.coeff(k)).collect();
        TaylorSeries { coeffs }
    }

    /// Truncated Cauchy product to order `m`.
    pub fn multiply(&self, other: &TaylorSeries, m: usize) -> TaylorSeries {
        let mut coeffs = vec![Complex64::ZERO; m + 1];
        for i in 0..=m.min(self.order()) {
            let a = self.coeffs[i];
            if a == Complex64::ZERO {
                continue;
            }
            for j in 0..=(m - i).min(other.order()) {
                coeffs[i + j] += a * other.coeffs[j];
            }
        }
        TaylorSeries { coeffs }
    }

    /// Truncated composition `self(inner(z))` to order `m`; `inner` must
    /// vanish at the origin.
    pub fn compose(&self, inner: &TaylorSeries, m: usize) -> Result<TaylorSeries> {
        if inner.coeff(0) != Complex64::ZERO {
            return Err(Error::Domain(
                "composition requires the inner series to vanish at 0".into(),
            ));
        }
        // Horner over the outer coefficients: keeps everything at order m.
        let mut acc = TaylorSeries::zero(m);
        for k in (0..=self.order()).rev() {
            acc = acc.multiply(inner, m);
            acc.coeffs[0] += self.coeffs[k];
        }
        Ok(acc)
    }

    /// Horner evaluation at `z`.
    pub fn evaluate(&self, z: Complex64) -> Complex64 {
        let mut acc = Complex64::ZERO;
        for &c in self.coeffs.iter().rev() {
            acc = acc * z + c;
        }
        acc
    }

    /// Log series via Newton's identity, normalizing by the constant term:
    /// `g_0 = ln c_0` and `n g_n = n f_n - sum k g_k f_{n-k}` on `f / c_0`.
    ///
    /// The constant term must be real and positive.
    pub fn newton_log(&self) -> Result<TaylorSeries> {
        let c0 = self.coeffs[0];
        if c0.im.abs() > REALNESS_TOL * c0.re.abs().max(1.0) {
            return Err(Error::Domain(format!(
                "newton_log requires a real constant term, got {c0}"
            )));
        }
        if c0.re <= 0.0 {
            return Err(Error::Domain(format!(
                "newton_log requires a positive constant term, got {}",
                c0.re
            )));
        }
        let m = self.order();
        let f: Vec<Complex64> = self.coeffs.iter().map(|&c| c / c0.re).collect();
        let mut g = vec![Complex64::ZERO; m + 1];
        g[0] = Complex64::new(c0.re.ln(), 0.0);
        for n in 1..=m {
            let mut acc = Complex64::new(n as f64, 0.0) * f[n];
            for k in 1..n {
                acc -= Complex64::new(k as f64, 0.0) * g[k] * f[n - k];
            }
            g[n] = acc / n as f64;
        }
        Ok(TaylorSeries { coeffs: g })
    }

    /// Exp series through the adjoint recurrence
    /// `n h_n = sum_{k=1}^{n} k f_k h_{n-k}` with `h_0 = exp(f_0)`.
    pub fn exp(&self) -> TaylorSeries {
        let m = self.order();
        let mut h = vec![Complex64::ZERO; m + 1];
        h[0] = self.coeffs[0].exp();
        for n in 1..=m {
            let mut acc = Complex64::ZERO;
            for k in 1..=n {
                acc += Complex64::new(k as f64, 0.0) * self.coeffs[k] * h[n - k];
            }
            h[n] = acc / n as f64;
        }
        TaylorSeries { coeffs: h }
    }
}
