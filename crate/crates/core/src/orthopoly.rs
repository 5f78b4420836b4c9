//! Orthonormal polynomials of `sigma_0` and monic orthogonal polynomials
//! with respect to varying (weighted) measures.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::measures::{self, Interval, MeasureSpec, Quadrature, Weight};
use crate::poly::PolynomialRep;

/// Three-term recurrence of a measure's orthogonal polynomials.
///
/// `a` are the Jacobi-matrix diagonal entries, `b` the (positive)
/// off-diagonal entries, `norm0` the total mass.
#[derive(Debug, Clone)]
pub struct RecurrenceTable {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub norm0: f64,
    pub interval: Interval,
}

impl RecurrenceTable {
    pub fn max_degree(&self) -> usize {
        self.a.len() - 1
    }
}

/// Recurrence coefficients supporting degrees `0..=n_max`: closed form
/// for Jacobi weights, discretized Stieltjes for tabulated densities.
pub fn recurrence_coefficients(spec: &MeasureSpec, n_max: usize) -> Result<RecurrenceTable> {
    match &spec.weight {
        Weight::Jacobi(alpha, beta) => Ok(jacobi_recurrence(spec, *alpha, *beta, n_max)),
        Weight::TabulatedDensity(_) => {
            let (nodes, weights) = measures::tabulated_composite_rule(spec);
            stieltjes(&nodes, &weights, n_max, spec.interval)
        }
    }
}

fn jacobi_recurrence(spec: &MeasureSpec, alpha: f64, beta: f64, n_max: usize) -> RecurrenceTable {
    let n = n_max + 1;
    let mut a = vec![0.0; n];
    let mut b = vec![0.0; n.saturating_sub(1).max(1)];
    let s = alpha + beta;
    a[0] = (beta - alpha) / (s + 2.0);
    for k in 1..n {
        let kf = k as f64;
        let den = (2.0 * kf + s) * (2.0 * kf + s + 2.0);
        a[k] = if den != 0.0 { (beta * beta - alpha * alpha) / den } else { 0.0 };
    }
    for k in 1..n {
        let kf = k as f64;
        let b2 = if k == 1 {
            4.0 * (alpha + 1.0) * (beta + 1.0) / ((s + 2.0) * (s + 2.0) * (s + 3.0))
        } else {
            4.0 * kf * (kf + alpha) * (kf + beta) * (kf + s)
                / ((2.0 * kf + s).powi(2) * (2.0 * kf + s + 1.0) * (2.0 * kf + s - 1.0))
        };
        b[k - 1] = b2.sqrt();
    }
    // affine map to the home interval
    let c = spec.interval.midpoint();
    let h = spec.interval.halfwidth();
    for ak in a.iter_mut() {
        *ak = c + h * *ak;
    }
    for bk in b.iter_mut() {
        *bk *= h;
    }
    RecurrenceTable {
        a,
        b,
        norm0: spec.mass(),
        interval: spec.interval,
    }
}

/// Stieltjes procedure over a discrete inner product.
fn stieltjes(
    nodes: &[f64],
    weights: &[f64],
    n_max: usize,
    interval: Interval,
) -> Result<RecurrenceTable> {
    let n = n_max + 1;
    if n > nodes.len() {
        return Err(Error::Recurrence {
            degree: nodes.len(),
            detail: format!(
                "discrete inner product with {} nodes supports at most degree {}; \
                 tabulated density has too few samples for degree {n_max}",
                nodes.len(),
                nodes.len() - 1
            ),
        });
    }
    let mut a = vec![0.0; n];
    let mut b = vec![0.0; n.saturating_sub(1).max(1)];
    let norm0: f64 = weights.iter().sum();
    let mut p_prev = vec![0.0; nodes.len()];
    let mut p_cur = vec![1.0; nodes.len()];
    let mut norm_prev = 0.0;
    let mut norm_cur = norm0;
    for k in 0..n {
        let xp: f64 = nodes
            .iter()
            .zip(weights)
            .zip(&p_cur)
            .map(|((&x, &w), &p)| w * x * p * p)
            .sum();
        a[k] = xp / norm_cur;
        if k + 1 < n {
            let b2 = if k == 0 { 0.0 } else { norm_cur / norm_prev };
            let next: Vec<f64> = nodes
                .iter()
                .zip(p_cur.iter().zip(&p_prev))
                .map(|(&x, (&pc, &pp))| (x - a[k]) * pc - b2 * pp)
                .collect();
            let norm_next: f64 = next
                .iter()
                .zip(weights)
                .map(|(&p, &w)| w * p * p)
                .sum();
            if !(norm_next > norm_cur * 1e-28) || !norm_next.is_finite() {
                return Err(Error::Recurrence {
                    degree: k + 1,
                    detail: format!(
                        "lost positivity in norm ratio ({norm_next}); \
                         tabulated density too coarse for this degree"
                    ),
                });
            }
            let b2_next = norm_next / norm_cur;
            b[k] = b2_next.sqrt();
            p_prev = p_cur;
            p_cur = next;
            norm_prev = norm_cur;
            norm_cur = norm_next;
        }
    }
    Ok(RecurrenceTable {
        a,
        b,
        norm0,
        interval,
    })
}

/// Orthonormal polynomial value by forward recurrence.
pub fn eval_orthonormal(table: &RecurrenceTable, k: usize, x: f64) -> f64 {
    assert!(k < table.a.len(), "degree {k} outside recurrence table");
    let mut prev = 0.0;
    let mut cur = 1.0 / table.norm0.sqrt();
    for i in 0..k {
        let next = ((x - table.a[i]) * cur - if i > 0 { table.b[i - 1] * prev } else { 0.0 })
            / table.b[i];
        prev = cur;
        cur = next;
    }
    cur
}

/// Orthonormal values `l_0(x), ..., l_{k_max}(x)` in one sweep.
pub fn eval_orthonormal_all(table: &RecurrenceTable, k_max: usize, x: f64) -> Vec<f64> {
    assert!(k_max < table.a.len(), "degree {k_max} outside recurrence table");
    let mut out = Vec::with_capacity(k_max + 1);
    let mut prev = 0.0;
    let mut cur = 1.0 / table.norm0.sqrt();
    out.push(cur);
    for i in 0..k_max {
        let next = ((x - table.a[i]) * cur - if i > 0 { table.b[i - 1] * prev } else { 0.0 })
            / table.b[i];
        prev = cur;
        cur = next;
        out.push(cur);
    }
    out
}

/// Orthonormal polynomial `l_k` as a Chebyshev-basis polynomial on the
/// measure's interval, by running the recurrence in coefficient space.
pub fn orthonormal_poly(table: &RecurrenceTable, k: usize) -> PolynomialRep {
    assert!(k < table.a.len(), "degree {k} outside recurrence table");
    let iv = table.interval;
    let x = PolynomialRep::identity(iv);
    let mut prev = PolynomialRep::zero(iv);
    let mut cur = PolynomialRep::constant(iv, 1.0 / table.norm0.sqrt());
    for i in 0..k {
        let shifted = x.add(&PolynomialRep::constant(iv, -table.a[i]));
        let mut next = shifted.mul(&cur);
        if i > 0 {
            next = next.add(&prev.scale(-table.b[i - 1]));
        }
        next = next.scale(1.0 / table.b[i]);
        prev = cur;
        cur = next;
    }
    cur
}

/// Monic polynomial of the requested degree orthogonal to all lower
/// powers against `weight_samples * d(quad)`.
///
/// The `degree + 1`-sized moment system is solved directly; varying
/// weights break the three-term recurrence.
pub fn varying_monic_orthogonal(
    quad: &Quadrature,
    weight_samples: &[f64],
    degree: usize,
) -> Result<PolynomialRep> {
    assert_eq!(quad.nodes.len(), weight_samples.len());
    if weight_samples.iter().any(|&w| !(w > 0.0)) {
        return Err(Error::Invalid(
            "varying-measure weight samples must be strictly positive".into(),
        ));
    }
    let iv = quad.interval;
    if degree == 0 {
        return Ok(PolynomialRep::constant(iv, 1.0));
    }
    // basis values T_0..T_degree at the nodes (local variable)
    let n = quad.nodes.len();
    let mut tvals = vec![vec![0.0; n]; degree + 1];
    for (s, &x) in quad.nodes.iter().enumerate() {
        let t = iv.to_local(x);
        tvals[0][s] = 1.0;
        if degree >= 1 {
            tvals[1][s] = t;
        }
        for k in 2..=degree {
            tvals[k][s] = 2.0 * t * tvals[k - 1][s] - tvals[k - 2][s];
        }
    }
    let ip = |a: &[f64], b: &[f64]| -> f64 {
        quad.weights
            .iter()
            .zip(weight_samples)
            .zip(a.iter().zip(b))
            .map(|((&w, &rho), (&x, &y))| w * rho * x * y)
            .sum()
    };
    // pi = lead * T_degree + sum_{i<degree} a_i T_i, monic in x
    let lead = iv.halfwidth().powi(degree as i32) / 2f64.powi(degree as i32 - 1);
    let mut gram = DMatrix::<f64>::zeros(degree, degree);
    let mut rhs = nalgebra::DVector::<f64>::zeros(degree);
    for k in 0..degree {
        for i in 0..degree {
            gram[(k, i)] = ip(&tvals[k], &tvals[i]);
        }
        rhs[k] = -lead * ip(&tvals[k], &tvals[degree]);
    }
    let lu = gram.full_piv_lu();
    let sol = lu.solve(&rhs).ok_or_else(|| {
        Error::Singular(
            "Gram matrix of the varying-measure moment system is singular; \
             raise the quadrature order or lower the degree"
                .into(),
        )
    })?;
    let mut coeffs: Vec<f64> = sol.iter().copied().collect();
    coeffs.push(lead);
    Ok(PolynomialRep::new(iv, coeffs))
}

/// Zeros of the orthogonal polynomial of the given degree with respect
/// to the discrete measure placing mass `quad.weights[i] *
/// weight_samples[i]` at `quad.nodes[i]`.
///
/// Runs the Stieltjes procedure on the discrete measure to build the
/// three-term recurrence, then takes the eigenvalues of the associated
/// Jacobi matrix (Golub-Welsch), so the zeros are guaranteed real and
/// inside the convex hull of the nodes. This stays accurate at degrees
/// where a moment-system formulation loses the polynomial entirely.
pub fn varying_orthogonal_zeros(
    quad: &Quadrature,
    weight_samples: &[f64],
    degree: usize,
) -> Result<Vec<f64>> {
    assert_eq!(quad.nodes.len(), weight_samples.len());
    if weight_samples.iter().any(|&w| !(w > 0.0)) {
        return Err(Error::Invalid(
            "varying-measure weight samples must be strictly positive".into(),
        ));
    }
    if degree == 0 {
        return Ok(Vec::new());
    }
    let n = quad.nodes.len();
    if degree >= n {
        return Err(Error::Invalid(format!(
            "quadrature with {n} nodes cannot resolve an orthogonal polynomial of degree {degree}"
        )));
    }
    let iv = quad.interval;
    let xs: Vec<f64> = quad.nodes.iter().map(|&x| iv.to_local(x)).collect();
    let ws: Vec<f64> = quad
        .weights
        .iter()
        .zip(weight_samples)
        .map(|(&a, &b)| a * b)
        .collect();
    let mass: f64 = ws.iter().sum();
    if !(mass > 0.0) {
        return Err(Error::Singular("discrete measure has no mass".into()));
    }
    let mut alpha = vec![0.0f64; degree];
    let mut beta = vec![0.0f64; degree.saturating_sub(1)];
    let mut p_prev = vec![0.0f64; n];
    let mut p_cur = vec![1.0 / mass.sqrt(); n];
    for k in 0..degree {
        let ak: f64 = xs
            .iter()
            .zip(&ws)
            .zip(&p_cur)
            .map(|((&x, &w), &p)| w * x * p * p)
            .sum();
        alpha[k] = ak;
        if k + 1 == degree {
            break;
        }
        let bprev = if k == 0 { 0.0 } else { beta[k - 1] };
        let r: Vec<f64> = xs
            .iter()
            .zip(p_cur.iter().zip(&p_prev))
            .map(|(&x, (&pc, &pp))| (x - ak) * pc - bprev * pp)
            .collect();
        let bk = r
            .iter()
            .zip(&ws)
            .map(|(&v, &w)| w * v * v)
            .sum::<f64>()
            .sqrt();
        if !(bk > 0.0) {
            return Err(Error::Singular(
                "Stieltjes recurrence broke down; the discrete measure is too coarse \
                 for the requested degree"
                    .into(),
            ));
        }
        beta[k] = bk;
        p_prev = p_cur;
        p_cur = r.iter().map(|&v| v / bk).collect();
    }
    let mut jm = DMatrix::<f64>::zeros(degree, degree);
    for k in 0..degree {
        jm[(k, k)] = alpha[k];
        if k + 1 < degree {
            jm[(k, k + 1)] = beta[k];
            jm[(k + 1, k)] = beta[k];
        }
    }
    let eig = jm.symmetric_eigen();
    let mut zeros: Vec<f64> = eig.eigenvalues.iter().map(|&t| iv.from_local(t)).collect();
    zeros.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(zeros)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::gauss_quadrature;
    use approx::assert_abs_diff_eq;

    fn chebyshev_spec() -> MeasureSpec {
        MeasureSpec::jacobi(-1.0, 1.0, -0.5, -0.5).unwrap()
    }

    fn legendre_spec() -> MeasureSpec {
        MeasureSpec::jacobi(-1.0, 1.0, 0.0, 0.0).unwrap()
    }

    #[test]
    fn chebyshev_orthonormal_family() {
        // l_0 = 1/sqrt(pi), l_k(x) = sqrt(2/pi) cos(k arccos x)
        let table = recurrence_coefficients(&chebyshev_spec(), 10).unwrap();
        let inv_sqrt_pi = 1.0 / std::f64::consts::PI.sqrt();
        assert_abs_diff_eq!(eval_orthonormal(&table, 0, 0.3), inv_sqrt_pi, epsilon = 1e-14);
        let s = (2.0 / std::f64::consts::PI).sqrt();
        for k in 1..=10usize {
            for &x in &[-0.9f64, -0.25, 0.1, 0.77] {
                let expected = s * (k as f64 * x.acos()).cos();
                assert_abs_diff_eq!(eval_orthonormal(&table, k, x), expected, epsilon = 1e-12);
            }
        }
        // T_3(1) = 1
        assert_abs_diff_eq!(eval_orthonormal(&table, 3, 1.0), s, epsilon = 1e-12);
    }

    #[test]
    fn legendre_recurrence_symmetry_and_b1() {
        let table = recurrence_coefficients(&legendre_spec(), 8).unwrap();
        for &ak in &table.a {
            assert_abs_diff_eq!(ak, 0.0, epsilon = 1e-14);
        }
        // oracle: Gram-Schmidt on monomials with exact moments gives b_1^2 = 1/3
        assert_abs_diff_eq!(table.b[0] * table.b[0], 1.0 / 3.0, epsilon = 1e-14);
    }

    #[test]
    fn legendre_l2_at_zero() {
        let table = recurrence_coefficients(&legendre_spec(), 4).unwrap();
        // normalized Legendre: P_2(0) = -1/2, norm sqrt(2/5)
        let expected = -0.5 * (5.0f64 / 2.0).sqrt();
        assert_abs_diff_eq!(eval_orthonormal(&table, 2, 0.0), expected, epsilon = 1e-13);
    }

    #[test]
    fn orthonormality_under_quadrature() {
        for spec in [chebyshev_spec(), legendre_spec()] {
            let n_max = 40;
            let table = recurrence_coefficients(&spec, n_max).unwrap();
            let quad = gauss_quadrature(&spec, n_max + 8).unwrap();
            for i in (0..=n_max).step_by(5) {
                for j in (0..=n_max).step_by(7) {
                    let val = quad.integrate(|x| {
                        eval_orthonormal(&table, i, x) * eval_orthonormal(&table, j, x)
                    });
                    let expected = if i == j { 1.0 } else { 0.0 };
                    assert_abs_diff_eq!(val, expected, epsilon = 1e-10);
                }
            }
        }
    }

    #[test]
    fn orthonormal_poly_matches_pointwise() {
        let table = recurrence_coefficients(&legendre_spec(), 12).unwrap();
        let p = orthonormal_poly(&table, 7);
        for &x in &[-0.8, -0.1, 0.45, 0.99] {
            assert_abs_diff_eq!(p.eval(x), eval_orthonormal(&table, 7, x), epsilon = 1e-11);
        }
    }

    #[test]
    fn varying_unit_weight_chebyshev_gives_monic_t2() {
        let spec = chebyshev_spec();
        let quad = gauss_quadrature(&spec, 16).unwrap();
        let w = vec![1.0; quad.nodes.len()];
        let p = varying_monic_orthogonal(&quad, &w, 2).unwrap();
        // monic T_2 / 2 = x^2 - 1/2
        assert_abs_diff_eq!(p.eval(0.0), -0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(p.eval(1.0), 0.5, epsilon = 1e-12);
        assert!(p.is_monic(1e-12));
    }

    #[test]
    fn varying_unit_weight_legendre_degree_one() {
        let quad = gauss_quadrature(&legendre_spec(), 16).unwrap();
        let w = vec![1.0; quad.nodes.len()];
        let p = varying_monic_orthogonal(&quad, &w, 1).unwrap();
        assert_abs_diff_eq!(p.eval(0.0), 0.0, epsilon = 1e-14);
        assert!(p.is_monic(1e-12));
    }

    #[test]
    fn varying_rational_weight_degree_one() {
        // weight 1/(5-x) on [-1,1]: pi_1 = x - c with
        // c = (int x/(5-x) dx) / (int 1/(5-x) dx)
        let quad = gauss_quadrature(&legendre_spec(), 48).unwrap();
        let w: Vec<f64> = quad.nodes.iter().map(|&x| 1.0 / (5.0 - x)).collect();
        let p = varying_monic_orthogonal(&quad, &w, 1).unwrap();
        let log = (6.0f64 / 4.0).ln();
        let num = 5.0 * log - 2.0; // int_{-1}^{1} x/(5-x) dx
        let c = num / log;
        assert_abs_diff_eq!(-p.eval(0.0), c, epsilon = 1e-12);
    }

    #[test]
    fn varying_zeros_inside_interval() {
        let quad = gauss_quadrature(&legendre_spec(), 64).unwrap();
        let w: Vec<f64> = quad.nodes.iter().map(|&x| (2.0 + x).sqrt()).collect();
        let p = varying_monic_orthogonal(&quad, &w, 9).unwrap();
        let zeros = p.zeros().unwrap();
        assert_eq!(zeros.len(), 9);
        for pair in zeros.windows(2) {
            assert!(pair[0] < pair[1]);
        }
        for z in zeros {
            assert!(z > -1.0 && z < 1.0);
        }
    }

    #[test]
    fn stieltjes_matches_legendre_for_flat_density() {
        let iv = Interval::new(-1.0, 1.0).unwrap();
        let spec = MeasureSpec::new(iv, Weight::TabulatedDensity(vec![1.0; 41])).unwrap();
        let table = recurrence_coefficients(&spec, 10).unwrap();
        let exact = recurrence_coefficients(&legendre_spec(), 10).unwrap();
        for k in 0..=10 {
            assert_abs_diff_eq!(table.a[k], exact.a[k], epsilon = 1e-12);
        }
        for k in 0..10 {
            assert_abs_diff_eq!(table.b[k], exact.b[k], epsilon = 1e-12);
        }
    }

    #[test]
    fn stieltjes_too_coarse_errors() {
        let iv = Interval::new(-1.0, 1.0).unwrap();
        let spec = MeasureSpec::new(iv, Weight::TabulatedDensity(vec![1.0, 1.0])).unwrap();
        let err = recurrence_coefficients(&spec, 40).unwrap_err();
        match err {
            Error::Recurrence { degree, .. } => assert!(degree > 0),
            other => panic!("expected recurrence error, got {other}"),
        }
    }
}
