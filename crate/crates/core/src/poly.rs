//! Polynomials in the Chebyshev basis of a home interval.
//!
//! All polynomial symbols of the construction (denominators, numerators,
//! node polynomials) are stored this way; raw monomial coefficients are
//! only used for small-degree conversions and tests. Zeros are found via
//! the colleague matrix of the Chebyshev coefficients followed by one
//! Newton step.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::measures::Interval;

/// Magnitude below which a trailing coefficient does not count towards
/// the degree.
const DEGREE_EPS: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialRep {
    basis_interval: Interval,
    /// Chebyshev coefficients on `basis_interval`, low to high.
    coeffs: Vec<f64>,
}

impl PolynomialRep {
    pub fn new(basis_interval: Interval, mut coeffs: Vec<f64>) -> Self {
        while coeffs.len() > 1 && coeffs.last().map_or(false, |c| c.abs() <= DEGREE_EPS) {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        Self {
            basis_interval,
            coeffs,
        }
    }

    pub fn constant(basis_interval: Interval, c: f64) -> Self {
        Self::new(basis_interval, vec![c])
    }

    pub fn zero(basis_interval: Interval) -> Self {
        Self::constant(basis_interval, 0.0)
    }

    /// The identity polynomial `x` on the given interval.
    pub fn identity(basis_interval: Interval) -> Self {
        Self::new(
            basis_interval,
            vec![basis_interval.midpoint(), basis_interval.halfwidth()],
        )
    }

    /// Monic polynomial with the given real roots.
    pub fn from_roots(basis_interval: Interval, roots: &[f64]) -> Self {
        let mut p = Self::constant(basis_interval, 1.0);
        for &r in roots {
            let factor = Self::new(
                basis_interval,
                vec![
                    basis_interval.midpoint() - r,
                    basis_interval.halfwidth(),
                ],
            );
            p = p.mul(&factor);
        }
        p
    }

    /// Interpolant of the given values at the `n` Chebyshev points (first
    /// kind) of the interval, as returned by `Interval::chebyshev_points`.
    pub fn interpolate_at_chebyshev(basis_interval: Interval, values: &[f64]) -> Self {
        let n = values.len();
        assert!(n >= 1);
        // chebyshev_points returns nodes sorted increasing; node i has
        // angle theta_{n-i} = (2(n-i)-1) pi / (2n).
        let mut coeffs = vec![0.0; n];
        for (k, c) in coeffs.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (i, &v) in values.iter().enumerate() {
                let theta = (2 * (n - i) - 1) as f64 / (2 * n) as f64 * std::f64::consts::PI;
                acc += v * (k as f64 * theta).cos();
            }
            *c = acc * 2.0 / n as f64;
        }
        coeffs[0] *= 0.5;
        Self::new(basis_interval, coeffs)
    }

    pub fn basis_interval(&self) -> Interval {
        self.basis_interval
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.abs() <= DEGREE_EPS)
    }

    /// Clenshaw evaluation.
    pub fn eval(&self, x: f64) -> f64 {
        let t = self.basis_interval.to_local(x);
        let mut b1 = 0.0;
        let mut b2 = 0.0;
        for &c in self.coeffs.iter().skip(1).rev() {
            let b0 = 2.0 * t * b1 - b2 + c;
            b2 = b1;
            b1 = b0;
        }
        t * b1 - b2 + self.coeffs[0]
    }

    pub fn eval_complex(&self, z: Complex64) -> Complex64 {
        let c0 = self.basis_interval.midpoint();
        let h = self.basis_interval.halfwidth();
        let t = (z - c0) / h;
        let mut b1 = Complex64::new(0.0, 0.0);
        let mut b2 = Complex64::new(0.0, 0.0);
        for &c in self.coeffs.iter().skip(1).rev() {
            let b0 = 2.0 * t * b1 - b2 + c;
            b2 = b1;
            b1 = b0;
        }
        t * b1 - b2 + self.coeffs[0]
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::new(
            self.basis_interval,
            self.coeffs.iter().map(|c| c * s).collect(),
        )
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.basis_interval, other.basis_interval);
        let n = self.coeffs.len().max(other.coeffs.len());
        let mut coeffs = vec![0.0; n];
        for (i, c) in self.coeffs.iter().enumerate() {
            coeffs[i] += c;
        }
        for (i, c) in other.coeffs.iter().enumerate() {
            coeffs[i] += c;
        }
        Self::new(self.basis_interval, coeffs)
    }

    /// Product via `T_i T_j = (T_{i+j} + T_{|i-j|}) / 2`.
    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.basis_interval, other.basis_interval);
        let (a, b) = (&self.coeffs, &other.coeffs);
        let mut coeffs = vec![0.0; a.len() + b.len() - 1];
        for (i, &ai) in a.iter().enumerate() {
            for (j, &bj) in b.iter().enumerate() {
                let half = 0.5 * ai * bj;
                coeffs[i + j] += half;
                coeffs[i.abs_diff(j)] += half;
            }
        }
        Self::new(self.basis_interval, coeffs)
    }

    /// Derivative, with the chain-rule factor of the interval scaling.
    pub fn derivative(&self) -> Self {
        let n = self.coeffs.len();
        if n <= 1 {
            return Self::zero(self.basis_interval);
        }
        let mut d = vec![0.0; n - 1];
        let mut acc_even = 0.0;
        let mut acc_odd = 0.0;
        // d_{k-1} = d_{k+1} + 2k c_k, descending k.
        for k in (1..n).rev() {
            let acc = if (n - 1 - k) % 2 == 0 {
                &mut acc_even
            } else {
                &mut acc_odd
            };
            *acc += 2.0 * k as f64 * self.coeffs[k];
            d[k - 1] = *acc;
        }
        d[0] *= 0.5;
        let scale = 1.0 / self.basis_interval.halfwidth();
        Self::new(self.basis_interval, d.iter().map(|c| c * scale).collect())
    }

    /// Leading coefficient in the monomial basis of `x`.
    pub fn leading_monomial_coeff(&self) -> f64 {
        let n = self.degree();
        let c = *self.coeffs.last().unwrap();
        if n == 0 {
            c
        } else {
            c * 2f64.powi(n as i32 - 1) / self.basis_interval.halfwidth().powi(n as i32)
        }
    }

    pub fn is_monic(&self, tol: f64) -> bool {
        (self.leading_monomial_coeff() - 1.0).abs() <= tol
    }

    pub fn into_monic(self) -> Self {
        let lead = self.leading_monomial_coeff();
        self.scale(1.0 / lead)
    }

    /// Re-express on a different home interval (same polynomial).
    pub fn rebase(&self, interval: Interval) -> Self {
        let d = self.degree();
        let pts = interval.chebyshev_points(d + 1);
        let vals: Vec<f64> = pts.iter().map(|&x| self.eval(x)).collect();
        Self::interpolate_at_chebyshev(interval, &vals)
    }

    /// Monomial coefficients in the local variable `t in [-1, 1]`.
    pub fn to_monomial_local(&self) -> Vec<f64> {
        let n = self.coeffs.len();
        // rows of Chebyshev polynomials in monomial-t coefficients
        let mut tk_prev = vec![0.0; n];
        let mut tk = vec![0.0; n];
        tk_prev[0] = 1.0; // T_0
        let mut out = vec![0.0; n];
        out[0] += self.coeffs[0];
        if n > 1 {
            tk[1] = 1.0; // T_1
            for (i, &t) in tk.iter().enumerate() {
                out[i] += self.coeffs[1] * t;
            }
            for k in 2..n {
                let mut next = vec![0.0; n];
                for i in 0..(n - 1) {
                    next[i + 1] += 2.0 * tk[i];
                }
                for i in 0..n {
                    next[i] -= tk_prev[i];
                }
                for i in 0..n {
                    out[i] += self.coeffs[k] * next[i];
                }
                tk_prev = tk;
                tk = next;
            }
        }
        out
    }

    /// Build from monomial coefficients in the local variable `t`.
    pub fn from_monomial_local(basis_interval: Interval, mono: &[f64]) -> Self {
        let t = Self::new(basis_interval, vec![0.0, 1.0]);
        let mut p = Self::zero(basis_interval);
        for &c in mono.iter().rev() {
            p = p.mul(&t).add(&Self::constant(basis_interval, c));
        }
        p
    }

    /// Build from monomial coefficients in `x` (low to high) by Horner
    /// recursion in the Chebyshev basis.
    pub fn from_monomial_x(basis_interval: Interval, mono: &[f64]) -> Self {
        let x = Self::identity(basis_interval);
        let mut p = Self::zero(basis_interval);
        for &c in mono.iter().rev() {
            p = p.mul(&x).add(&Self::constant(basis_interval, c));
        }
        p
    }

    /// All zeros, asserted real: eigenvalues of the colleague matrix of
    /// the Chebyshev coefficients, one Newton step each, sorted.
    pub fn zeros(&self) -> Result<Vec<f64>> {
        let d = self.degree();
        if d == 0 {
            return if self.is_zero() {
                Err(Error::Invalid("zero polynomial has no well-defined zeros".into()))
            } else {
                Ok(Vec::new())
            };
        }
        let c = &self.coeffs;
        let cn = c[d];
        let mut m = nalgebra::DMatrix::<f64>::zeros(d, d);
        if d == 1 {
            m[(0, 0)] = -c[0] / cn;
        } else {
            m[(0, 1)] = 1.0;
            for i in 1..(d - 1) {
                m[(i, i - 1)] = 0.5;
                m[(i, i + 1)] = 0.5;
            }
            for k in 0..d {
                m[(d - 1, k)] -= c[k] / (2.0 * cn);
            }
            m[(d - 1, d - 2)] += 0.5;
        }
        let eig = m.complex_eigenvalues();
        let im_tol = 1e-8;
        let mut roots = Vec::with_capacity(d);
        let deriv = self.derivative();
        for lam in eig.iter() {
            if lam.im.abs() > im_tol * lam.norm().max(1.0) {
                return Err(Error::NonrealZero(format!(
                    "colleague eigenvalue {lam} has non-negligible imaginary part"
                )));
            }
            let mut x = self.basis_interval.from_local(lam.re);
            // one Newton polish
            let fp = deriv.eval(x);
            if fp.abs() > 0.0 {
                let step = self.eval(x) / fp;
                if step.is_finite() {
                    x -= step;
                }
            }
            roots.push(x);
        }
        roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Ok(roots)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn unit() -> Interval {
        Interval::new(-1.0, 1.0).unwrap()
    }

    #[test]
    fn t2_zeros() {
        let p = PolynomialRep::new(unit(), vec![0.0, 0.0, 1.0]);
        let z = p.zeros().unwrap();
        let r = 1.0 / 2f64.sqrt();
        assert_abs_diff_eq!(z[0], -r, epsilon = 1e-12);
        assert_abs_diff_eq!(z[1], r, epsilon = 1e-12);
    }

    #[test]
    fn monic_quadratic_on_shifted_interval() {
        // x^2 - 5x + 6 on [1, 4]
        let iv = Interval::new(1.0, 4.0).unwrap();
        let p = PolynomialRep::from_monomial_x(iv, &[6.0, -5.0, 1.0]);
        assert!(p.is_monic(1e-12));
        let z = p.zeros().unwrap();
        assert_abs_diff_eq!(z[0], 2.0, epsilon = 1e-10);
        assert_abs_diff_eq!(z[1], 3.0, epsilon = 1e-10);
    }

    #[test]
    fn chebyshev_l5_zeros() {
        // zeros of T_5: cos((2i-1) pi / 10)
        let p = PolynomialRep::new(unit(), vec![0.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        let z = p.zeros().unwrap();
        for (i, &zi) in z.iter().enumerate() {
            let expected = ((2.0 * (5 - i) as f64 - 1.0) * std::f64::consts::PI / 10.0).cos();
            assert_abs_diff_eq!(zi, expected, epsilon = 1e-12);
        }
    }

    #[test]
    fn from_roots_is_monic_and_vanishes() {
        let iv = Interval::new(-2.0, 3.0).unwrap();
        let roots = [-1.5, 0.25, 2.0];
        let p = PolynomialRep::from_roots(iv, &roots);
        assert!(p.is_monic(1e-12));
        for &r in &roots {
            assert_abs_diff_eq!(p.eval(r), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn derivative_of_t3() {
        // T_3' = 3 U_2, at x=1: 3*3 = 9; scaled interval halves slope
        let p = PolynomialRep::new(unit(), vec![0.0, 0.0, 0.0, 1.0]);
        assert_abs_diff_eq!(p.derivative().eval(1.0), 9.0, epsilon = 1e-12);
    }

    #[test]
    fn interpolation_reproduces_polynomial() {
        let iv = Interval::new(0.0, 2.0).unwrap();
        let p = PolynomialRep::from_monomial_x(iv, &[1.0, -2.0, 0.5, 3.0]);
        let pts = iv.chebyshev_points(4);
        let vals: Vec<f64> = pts.iter().map(|&x| p.eval(x)).collect();
        let q = PolynomialRep::interpolate_at_chebyshev(iv, &vals);
        for (a, b) in p.coeffs().iter().zip(q.coeffs()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    proptest! {
        // monomial -> Chebyshev -> monomial round-trip, degree <= 30
        #[test]
        fn monomial_round_trip(coeffs in proptest::collection::vec(-1.0f64..1.0, 1..31)) {
            let p = PolynomialRep::from_monomial_local(unit(), &coeffs);
            let back = p.to_monomial_local();
            for (i, &c) in coeffs.iter().enumerate() {
                prop_assert!((back[i] - c).abs() < 1e-12 * (1.0 + c.abs()));
            }
        }

        #[test]
        fn eval_matches_monomial_horner(coeffs in proptest::collection::vec(-1.0f64..1.0, 1..12),
                                        t in -1.0f64..1.0) {
            let p = PolynomialRep::from_monomial_local(unit(), &coeffs);
            let horner = coeffs.iter().rev().fold(0.0, |acc, &c| acc * t + c);
            prop_assert!((p.eval(t) - horner).abs() < 1e-10);
        }
    }
}
