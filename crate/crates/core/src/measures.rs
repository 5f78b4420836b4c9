//! Measure systems on disjoint intervals, Gauss quadrature and Markov
//! functions.
//!
//! A measure is an interval together with a weight family: a Jacobi
//! weight `(hi - x)^alpha (x - lo)^beta` up to the affine scaling of the
//! interval, or a strictly positive tabulated density on a uniform grid.
//! Both families consist of regular measures, which is what the rate
//! theory requires.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::orthopoly::{self, RecurrenceTable};

/// A closed bounded interval of the real line.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Interval {
    lo: f64,
    hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::Invalid(format!(
                "interval [{lo}, {hi}] must satisfy lo < hi with both finite"
            )));
        }
        Ok(Self { lo, hi })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn halfwidth(&self) -> f64 {
        0.5 * (self.hi - self.lo)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn contains_interior(&self, x: f64) -> bool {
        self.lo < x && x < self.hi
    }

    /// Map `x` to the reference variable `t in [-1, 1]`.
    pub fn to_local(&self, x: f64) -> f64 {
        (2.0 * x - self.lo - self.hi) / (self.hi - self.lo)
    }

    /// Map the reference variable `t in [-1, 1]` to a point of the interval.
    pub fn from_local(&self, t: f64) -> f64 {
        self.midpoint() + self.halfwidth() * t
    }

    /// Euclidean distance from a real point to the interval.
    pub fn distance(&self, x: f64) -> f64 {
        if x < self.lo {
            self.lo - x
        } else if x > self.hi {
            x - self.hi
        } else {
            0.0
        }
    }

    /// Euclidean distance from a complex point to the interval.
    pub fn distance_complex(&self, z: Complex64) -> f64 {
        let dx = if z.re < self.lo {
            self.lo - z.re
        } else if z.re > self.hi {
            z.re - self.hi
        } else {
            0.0
        };
        (dx * dx + z.im * z.im).sqrt()
    }

    /// Gap between two disjoint intervals (0 if they touch or overlap).
    pub fn gap(&self, other: &Interval) -> f64 {
        if self.hi < other.lo {
            other.lo - self.hi
        } else if other.hi < self.lo {
            self.lo - other.hi
        } else {
            0.0
        }
    }

    /// Smallest interval containing both.
    pub fn hull(&self, other: &Interval) -> Interval {
        Interval {
            lo: self.lo.min(other.lo),
            hi: self.hi.max(other.hi),
        }
    }

    /// `n` Chebyshev points of the first kind, sorted increasing.
    pub fn chebyshev_points(&self, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| {
                let theta = (2 * (n - i) - 1) as f64 / (2 * n) as f64 * std::f64::consts::PI;
                self.from_local(theta.cos())
            })
            .collect()
    }
}

/// Weight family of a measure.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weight {
    /// `(hi - x)^alpha (x - lo)^beta dx`, parameters `(alpha, beta)`.
    Jacobi(f64, f64),
    /// Strictly positive density samples on the uniform grid of the
    /// interval (endpoints included), linearly interpolated.
    TabulatedDensity(Vec<f64>),
}

/// A positive measure on an interval.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MeasureSpec {
    pub interval: Interval,
    pub weight: Weight,
}

impl MeasureSpec {
    pub fn new(interval: Interval, weight: Weight) -> Result<Self> {
        match &weight {
            Weight::Jacobi(alpha, beta) => {
                if !(*alpha > -1.0 && *beta > -1.0) {
                    return Err(Error::Invalid(format!(
                        "Jacobi parameters ({alpha}, {beta}) must both exceed -1"
                    )));
                }
            }
            Weight::TabulatedDensity(samples) => {
                if samples.len() < 2 {
                    return Err(Error::Invalid(
                        "tabulated density needs at least two samples".into(),
                    ));
                }
                if samples.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
                    return Err(Error::Invalid(
                        "tabulated density samples must be strictly positive and finite".into(),
                    ));
                }
            }
        }
        Ok(Self { interval, weight })
    }

    pub fn jacobi(lo: f64, hi: f64, alpha: f64, beta: f64) -> Result<Self> {
        Self::new(Interval::new(lo, hi)?, Weight::Jacobi(alpha, beta))
    }

    /// Total mass of the measure.
    pub fn mass(&self) -> f64 {
        match &self.weight {
            Weight::Jacobi(alpha, beta) => {
                let h = self.interval.halfwidth();
                let ln = (alpha + beta + 1.0) * std::f64::consts::LN_2
                    + ln_gamma(alpha + 1.0)
                    + ln_gamma(beta + 1.0)
                    - ln_gamma(alpha + beta + 2.0);
                h.powf(alpha + beta + 1.0) * ln.exp()
            }
            Weight::TabulatedDensity(_) => {
                let (nodes, weights) = tabulated_composite_rule(self);
                let _ = nodes;
                weights.iter().sum()
            }
        }
    }
}

/// The system `(sigma_0; sigma_1, ..., sigma_m)` on pairwise disjoint
/// intervals.
#[derive(Debug, Clone)]
pub struct AngelescoSystem {
    sigma0: MeasureSpec,
    sigmas: Vec<MeasureSpec>,
}

impl AngelescoSystem {
    pub fn new(sigma0: MeasureSpec, sigmas: Vec<MeasureSpec>) -> Result<Self> {
        if sigmas.is_empty() {
            return Err(Error::Invalid("need at least one measure sigma_j".into()));
        }
        let mut intervals = vec![sigma0.interval];
        intervals.extend(sigmas.iter().map(|s| s.interval));
        for i in 0..intervals.len() {
            for j in (i + 1)..intervals.len() {
                if intervals[i].gap(&intervals[j]) <= 0.0 {
                    return Err(Error::Invalid(format!(
                        "supports Delta_{i} = [{}, {}] and Delta_{j} = [{}, {}] must be \
                         disjoint with positive gap",
                        intervals[i].lo, intervals[i].hi, intervals[j].lo, intervals[j].hi
                    )));
                }
            }
        }
        Ok(Self { sigma0, sigmas })
    }

    pub fn sigma0(&self) -> &MeasureSpec {
        &self.sigma0
    }

    /// Branch measures, 1-based access via `sigma(j)`.
    pub fn sigmas(&self) -> &[MeasureSpec] {
        &self.sigmas
    }

    /// `sigma_j` for `1 <= j <= m`.
    pub fn sigma(&self, j: usize) -> &MeasureSpec {
        &self.sigmas[j - 1]
    }

    pub fn num_branches(&self) -> usize {
        self.sigmas.len()
    }

    /// Smallest interval containing all supports; home basis for the
    /// common denominators.
    pub fn hull(&self) -> Interval {
        self.sigmas
            .iter()
            .fold(self.sigma0.interval, |acc, s| acc.hull(&s.interval))
    }
}

/// Minimum gap over all pairs of supports; strictly positive by
/// construction of the system.
pub fn min_gap(system: &AngelescoSystem) -> f64 {
    let mut intervals = vec![system.sigma0.interval];
    intervals.extend(system.sigmas.iter().map(|s| s.interval));
    let mut gap = f64::INFINITY;
    for i in 0..intervals.len() {
        for j in (i + 1)..intervals.len() {
            gap = gap.min(intervals[i].gap(&intervals[j]));
        }
    }
    gap
}

/// A Gauss rule discretizing a measure: exact for polynomials of degree
/// `<= 2N - 1`.
#[derive(Debug, Clone)]
pub struct Quadrature {
    pub interval: Interval,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Quadrature {
    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    pub fn mass(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Gauss rule of the given order for a measure, via the eigenvalues and
/// first eigenvector components of the Jacobi matrix.
pub fn gauss_quadrature(spec: &MeasureSpec, order: usize) -> Result<Quadrature> {
    assert!(order >= 1, "quadrature order must be at least 1");
    let table = orthopoly::recurrence_coefficients(spec, order)?;
    Ok(gauss_from_table(&table, spec.interval, order))
}

/// Golub-Welsch step shared with callers that already hold a table.
pub(crate) fn gauss_from_table(
    table: &RecurrenceTable,
    interval: Interval,
    order: usize,
) -> Quadrature {
    use nalgebra::DMatrix;
    let n = order;
    let mut jac = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        jac[(i, i)] = table.a[i];
        if i + 1 < n {
            jac[(i, i + 1)] = table.b[i];
            jac[(i + 1, i)] = table.b[i];
        }
    }
    let eig = jac.symmetric_eigen();
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|k| {
            let v0 = eig.eigenvectors[(0, k)];
            (eig.eigenvalues[k], table.norm0 * v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    Quadrature {
        interval,
        nodes: pairs.iter().map(|p| p.0).collect(),
        weights: pairs.iter().map(|p| p.1).collect(),
    }
}

// The doubling loops stop at the first of: relative change below
// MARKOV_TOL, the change no longer shrinking (roundoff plateau), or
// the order cap.
const MARKOV_TOL: f64 = 4e-16;
const MARKOV_MAX_ORDER: usize = 8192;

/// Markov function `sigma_hat(z) = \int d sigma(x) / (z - x)` at a
/// complex point off the support, by Gauss quadrature with order
/// doubling.
pub fn markov_transform_c(spec: &MeasureSpec, z: Complex64) -> Result<Complex64> {
    let dist = spec.interval.distance_complex(z);
    if dist <= 1e-12 * spec.interval.length().max(1.0) {
        return Err(Error::Domain(format!(
            "point {z} lies on (or too close to) the support [{}, {}]",
            spec.interval.lo, spec.interval.hi
        )));
    }
    let mut order = 16usize;
    let mut prev: Option<Complex64> = None;
    let mut prev_diff = f64::INFINITY;
    loop {
        let quad = gauss_quadrature(spec, order)?;
        let val: Complex64 = quad
            .nodes
            .iter()
            .zip(&quad.weights)
            .map(|(&x, &w)| w / (z - x))
            .sum();
        if let Some(p) = prev {
            let diff = (val - p).norm() / val.norm().max(1e-300);
            if diff <= MARKOV_TOL || diff >= prev_diff {
                return Ok(val);
            }
            prev_diff = diff;
        }
        if order >= MARKOV_MAX_ORDER {
            return Ok(val);
        }
        prev = Some(val);
        order *= 2;
    }
}

/// Markov function at a real point off the support.
pub fn markov_transform(spec: &MeasureSpec, z: f64) -> Result<f64> {
    markov_transform_c(spec, Complex64::new(z, 0.0)).map(|v| v.re)
}

/// Markov function at many real points simultaneously, with a shared
/// doubling schedule; all points must be off the support.
pub fn markov_at_points(spec: &MeasureSpec, points: &[f64]) -> Result<Vec<f64>> {
    if points.is_empty() {
        return Ok(Vec::new());
    }
    for &x in points {
        if spec.interval.distance(x) <= 1e-12 * spec.interval.length().max(1.0) {
            return Err(Error::Domain(format!(
                "point {x} lies on the support [{}, {}]",
                spec.interval.lo, spec.interval.hi
            )));
        }
    }
    let mut order = 32usize;
    let mut prev: Option<Vec<f64>> = None;
    let mut prev_diff = f64::INFINITY;
    loop {
        let quad = gauss_quadrature(spec, order)?;
        let vals: Vec<f64> = points
            .iter()
            .map(|&z| {
                quad.nodes
                    .iter()
                    .zip(&quad.weights)
                    .map(|(&x, &w)| w / (z - x))
                    .sum()
            })
            .collect();
        if let Some(p) = prev {
            let worst = vals
                .iter()
                .zip(&p)
                .map(|(v, q)| (v - q).abs() / v.abs().max(1e-300))
                .fold(0.0f64, f64::max);
            if worst <= MARKOV_TOL || worst >= prev_diff {
                return Ok(vals);
            }
            prev_diff = worst;
        }
        if order >= MARKOV_MAX_ORDER {
            return Ok(vals);
        }
        prev = Some(vals);
        order *= 2;
    }
}

/// Composite Gauss-Legendre rule integrating against a linearly
/// interpolated tabulated density.
pub(crate) fn tabulated_composite_rule(spec: &MeasureSpec) -> (Vec<f64>, Vec<f64>) {
    let samples = match &spec.weight {
        Weight::TabulatedDensity(s) => s,
        _ => unreachable!("composite rule only applies to tabulated densities"),
    };
    // 8-point Gauss-Legendre per sample cell.
    let cell_spec = MeasureSpec::jacobi(-1.0, 1.0, 0.0, 0.0).unwrap();
    let base = gauss_quadrature(&cell_spec, 8).unwrap();
    let n = samples.len();
    let step = spec.interval.length() / (n - 1) as f64;
    let mut nodes = Vec::with_capacity(8 * (n - 1));
    let mut weights = Vec::with_capacity(8 * (n - 1));
    for cell in 0..(n - 1) {
        let a = spec.interval.lo + cell as f64 * step;
        let (d0, d1) = (samples[cell], samples[cell + 1]);
        for (&t, &w) in base.nodes.iter().zip(&base.weights) {
            let frac = 0.5 * (t + 1.0);
            let x = a + frac * step;
            let density = d0 + (d1 - d0) * frac;
            nodes.push(x);
            weights.push(w * 0.5 * step * density);
        }
    }
    (nodes, weights)
}

/// Log-gamma by the Lanczos approximation (g = 7, n = 9), accurate to
/// about 1e-14 for positive arguments.
pub(crate) fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 9] = [
        0.99999999999980993,
        676.5203681218851,
        -1259.1392167224028,
        771.32342877765313,
        -176.61502916214059,
        12.507343278686905,
        -0.13857109526572012,
        9.9843695780195716e-6,
        1.5056327351493116e-7,
    ];
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = COEF[0];
    for (i, &c) in COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn chebyshev() -> MeasureSpec {
        MeasureSpec::jacobi(-1.0, 1.0, -0.5, -0.5).unwrap()
    }

    #[test]
    fn chebyshev_gauss_order_3() {
        let quad = gauss_quadrature(&chebyshev(), 3).unwrap();
        let r = 3f64.sqrt() / 2.0;
        let third = std::f64::consts::PI / 3.0;
        for (node, expected) in quad.nodes.iter().zip([-r, 0.0, r]) {
            assert_abs_diff_eq!(node, &expected, epsilon = 1e-14);
        }
        for w in &quad.weights {
            assert_abs_diff_eq!(w, &third, epsilon = 1e-14);
        }
    }

    #[test]
    fn gauss_legendre_order_2() {
        let spec = MeasureSpec::jacobi(-1.0, 1.0, 0.0, 0.0).unwrap();
        let quad = gauss_quadrature(&spec, 2).unwrap();
        let r = 1.0 / 3f64.sqrt();
        assert_abs_diff_eq!(quad.nodes[0], -r, epsilon = 1e-14);
        assert_abs_diff_eq!(quad.nodes[1], r, epsilon = 1e-14);
        assert_abs_diff_eq!(quad.weights[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(quad.weights[1], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn gauss_legendre_shifted_interval() {
        let spec = MeasureSpec::jacobi(2.0, 3.0, 0.0, 0.0).unwrap();
        let quad = gauss_quadrature(&spec, 2).unwrap();
        let r = 1.0 / (2.0 * 3f64.sqrt());
        assert_abs_diff_eq!(quad.nodes[0], 2.5 - r, epsilon = 1e-14);
        assert_abs_diff_eq!(quad.nodes[1], 2.5 + r, epsilon = 1e-14);
        assert_abs_diff_eq!(quad.weights[0], 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(quad.weights[1], 0.5, epsilon = 1e-14);
    }

    #[test]
    fn nodes_strictly_inside_and_mass_preserved() {
        for spec in [
            chebyshev(),
            MeasureSpec::jacobi(2.0, 3.0, 0.3, -0.2).unwrap(),
        ] {
            let quad = gauss_quadrature(&spec, 24).unwrap();
            for &x in &quad.nodes {
                assert!(spec.interval.contains_interior(x));
            }
            assert_abs_diff_eq!(quad.mass(), spec.mass(), epsilon = 1e-12 * spec.mass());
        }
    }

    #[test]
    fn jacobi_moment_exactness() {
        // Legendre moments 2/(k+1) (even), Chebyshev moments pi (k-1)!!/k!!
        let legendre = MeasureSpec::jacobi(-1.0, 1.0, 0.0, 0.0).unwrap();
        let cheb = chebyshev();
        for n in [1usize, 2, 4, 8, 16, 32, 64] {
            let ql = gauss_quadrature(&legendre, n).unwrap();
            let qc = gauss_quadrature(&cheb, n).unwrap();
            let mut cheb_moment = std::f64::consts::PI;
            for k in 0..(2 * n) {
                let lm = ql.integrate(|x| x.powi(k as i32));
                let exact_l = if k % 2 == 0 { 2.0 / (k as f64 + 1.0) } else { 0.0 };
                assert_abs_diff_eq!(lm, exact_l, epsilon = 1e-12 * (1.0 + exact_l.abs()));
                let cm = qc.integrate(|x| x.powi(k as i32));
                let exact_c = if k % 2 == 0 { cheb_moment } else { 0.0 };
                assert_abs_diff_eq!(cm, exact_c, epsilon = 1e-12 * (1.0 + exact_c.abs()));
                if k % 2 == 0 {
                    // advance (k-1)!!/k!! ratio to the next even power
                    cheb_moment *= (k as f64 + 1.0) / (k as f64 + 2.0);
                }
            }
        }
    }

    #[test]
    fn markov_log_examples() {
        let spec = MeasureSpec::jacobi(2.0, 3.0, 0.0, 0.0).unwrap();
        let val = markov_transform(&spec, 0.0).unwrap();
        assert_abs_diff_eq!(val, -(1.5f64.ln()), epsilon = 1e-12);

        let mirror = MeasureSpec::jacobi(-3.0, -2.0, 0.0, 0.0).unwrap();
        let val = markov_transform(&mirror, 0.0).unwrap();
        assert_abs_diff_eq!(val, 1.5f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn markov_chebyshev_closed_form() {
        // closed form pi / sqrt(z^2 - 1); brute-force oracle: trapezoid in
        // theta for int_0^pi dtheta / (z - cos theta)
        let z = 2.0;
        let val = markov_transform(&chebyshev(), z).unwrap();
        let closed = std::f64::consts::PI / (z * z - 1.0f64).sqrt();
        assert_abs_diff_eq!(val, closed, epsilon = 1e-12);
        let n = 200_000usize;
        let h = std::f64::consts::PI / n as f64;
        let mut acc = 0.5 * (1.0 / (z - 1.0) + 1.0 / (z + 1.0));
        for i in 1..n {
            acc += 1.0 / (z - (i as f64 * h).cos());
        }
        assert_abs_diff_eq!(val, acc * h, epsilon = 1e-10);
    }

    #[test]
    fn markov_rejects_point_on_support() {
        let spec = MeasureSpec::jacobi(2.0, 3.0, 0.0, 0.0).unwrap();
        assert!(matches!(markov_transform(&spec, 2.5), Err(Error::Domain(_))));
    }

    #[test]
    fn markov_positive_decreasing_right_of_support() {
        let spec = MeasureSpec::jacobi(-1.0, 1.0, 0.3, -0.2).unwrap();
        let mut prev = f64::INFINITY;
        for i in 0..20 {
            let z = 1.2 + 0.35 * i as f64;
            let v = markov_transform(&spec, z).unwrap();
            assert!(v > 0.0);
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn markov_affine_conjugation() {
        // sigma on [lo,hi] vs its image under x -> s x + t
        let spec = MeasureSpec::jacobi(-1.0, 1.0, -0.5, -0.5).unwrap();
        let mapped = MeasureSpec::jacobi(1.0, 5.0, -0.5, -0.5).unwrap(); // x -> 2x + 3
        let z = -2.0;
        let zt = 2.0 * z + 3.0;
        // d(mapped) = 2^{a+b+1} d(spec) composed with the map; here a+b+1 = 0
        let lhs = markov_transform(&mapped, zt).unwrap();
        let rhs = markov_transform(&spec, z).unwrap() / 2.0;
        assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-12);
    }

    #[test]
    fn min_gap_examples() {
        let sys = AngelescoSystem::new(
            chebyshev(),
            vec![
                MeasureSpec::jacobi(-3.0, -2.0, 0.0, 0.0).unwrap(),
                MeasureSpec::jacobi(2.0, 3.0, 0.0, 0.0).unwrap(),
            ],
        )
        .unwrap();
        assert_abs_diff_eq!(min_gap(&sys), 1.0, epsilon = 1e-15);

        let sys = AngelescoSystem::new(
            chebyshev(),
            vec![MeasureSpec::jacobi(1.25, 2.0, 0.0, 0.0).unwrap()],
        )
        .unwrap();
        assert_abs_diff_eq!(min_gap(&sys), 0.25, epsilon = 1e-15);
    }

    #[test]
    fn overlapping_system_rejected() {
        let err = AngelescoSystem::new(
            chebyshev(),
            vec![MeasureSpec::jacobi(0.5, 2.0, 0.0, 0.0).unwrap()],
        )
        .unwrap_err();
        assert!(matches!(err, Error::Invalid(_)));
    }

    #[test]
    fn tabulated_density_mass_and_quadrature() {
        let iv = Interval::new(0.0, 1.0).unwrap();
        let spec = MeasureSpec::new(iv, Weight::TabulatedDensity(vec![2.0; 11])).unwrap();
        assert_abs_diff_eq!(spec.mass(), 2.0, epsilon = 1e-12);
        let quad = gauss_quadrature(&spec, 6).unwrap();
        // weight is 2 dx on [0,1]
        assert_abs_diff_eq!(quad.integrate(|x| x * x), 2.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn ln_gamma_spot_values() {
        assert_abs_diff_eq!(ln_gamma(0.5), std::f64::consts::PI.sqrt().ln(), epsilon = 1e-13);
        assert_abs_diff_eq!(ln_gamma(5.0), 24.0f64.ln(), epsilon = 1e-13);
        assert_abs_diff_eq!(ln_gamma(1.0), 0.0, epsilon = 1e-13);
    }
}
