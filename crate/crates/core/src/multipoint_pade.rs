//! Simultaneous multipoint Pade approximants.
//!
//! Given node polynomials `w_j` of degree `|n| + n_j` with zeros on
//! `Delta_0`, the common denominator `q` of degree `|n|` is orthogonal
//! to all powers `x^k`, `k < n_j`, against `dsigma_j / w_j`, and each
//! numerator `p_j` interpolates `q sigma_hat_j` at the nodes of `w_j`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linear_fp::{self, converged_markov_rule, MultiIndex};
use crate::measures::{gauss_quadrature, markov_transform_c, AngelescoSystem, Quadrature};
use crate::orthopoly;
use crate::poly::PolynomialRep;

/// Interpolation nodes for one branch: `|n| + n_j` points on `Delta_0`.
#[derive(Debug, Clone)]
pub struct NodeSet {
    pub j: usize,
    nodes: Vec<f64>,
    w: PolynomialRep,
}

impl NodeSet {
    pub fn new(system: &AngelescoSystem, j: usize, mut nodes: Vec<f64>) -> Result<Self> {
        if j < 1 || j > system.num_branches() {
            return Err(Error::Invalid(format!("branch index {j} out of range")));
        }
        let iv = system.sigma0().interval;
        for &x in &nodes {
            if !iv.contains(x) {
                return Err(Error::Invalid(format!(
                    "node {x} lies outside Delta_0 = [{}, {}]",
                    iv.lo(),
                    iv.hi()
                )));
            }
        }
        nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let w = PolynomialRep::from_roots(iv, &nodes);
        Ok(Self { j, nodes, w })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Monic node polynomial `w_j`.
    pub fn node_polynomial(&self) -> &PolynomialRep {
        &self.w
    }
}

/// Solved simultaneous multipoint Pade approximant.
#[derive(Debug, Clone)]
pub struct MultipointPade {
    pub n: MultiIndex,
    /// Monic common denominator, degree `|n|`, on the hull basis.
    pub q: PolynomialRep,
    /// Numerators, degree `<= |n| - 1`, on the `Delta_0` basis.
    pub p: Vec<PolynomialRep>,
    pub node_sets: Vec<NodeSet>,
    /// `(q_{n,j}, q-tilde_{n,j})` per branch; the first factor is monic
    /// of degree `n_j` and collects the zeros of `q` inside `Delta_j`.
    pub splits: Vec<(PolynomialRep, PolynomialRep)>,
    /// All zeros of `q`, sorted; downstream weights evaluate the
    /// factors in product form over these to keep relative accuracy
    /// near the zeros.
    pub q_zeros: Vec<f64>,
    /// Orthogonality residuals `|int x^k q / w_j dsigma_j|`, `k < n_j`.
    pub orthogonality_residuals: Vec<Vec<f64>>,
}

impl MultipointPade {
    pub fn max_orthogonality_residual(&self) -> f64 {
        self.orthogonality_residuals
            .iter()
            .flatten()
            .fold(0.0f64, |acc, &r| acc.max(r))
    }
}

/// Gauss rule on `Delta_j` whose order suffices for analytic integrands
/// of the given polynomial degree with singularities no closer than the
/// gap to `Delta_0` (node-polynomial poles live on `Delta_0`).
fn branch_rule(system: &AngelescoSystem, j: usize, poly_degree: usize) -> Result<Quadrature> {
    // doubling on a probe integral representative of 1/w_j
    let spec = system.sigma(j);
    let probe = system.sigma0().interval.midpoint();
    let mut order = (poly_degree + 8).max(24);
    let mut prev: Option<f64> = None;
    loop {
        let quad = gauss_quadrature(spec, order)?;
        let val: f64 = quad
            .nodes
            .iter()
            .zip(&quad.weights)
            .map(|(&x, &w)| w / (x - probe))
            .sum();
        if let Some(p) = prev {
            if (val - p).abs() <= 1e-13 * val.abs().max(1e-300) {
                return Ok(quad);
            }
        }
        if order >= 2048 {
            return Ok(quad);
        }
        prev = Some(val);
        order *= 2;
    }
}

/// Solve the multipoint Pade problem for the given node sets.
pub fn solve_multipoint(
    system: &AngelescoSystem,
    n: &MultiIndex,
    node_sets: Vec<NodeSet>,
) -> Result<MultipointPade> {
    let m = system.num_branches();
    assert_eq!(n.len(), m, "multi-index length must match the number of branches");
    if node_sets.len() != m {
        return Err(Error::Invalid(format!(
            "expected {m} node sets, got {}",
            node_sets.len()
        )));
    }
    let total = n.total();
    if total > linear_fp::DEGREE_CEILING {
        return Err(Error::Ceiling(format!(
            "|n| = {total} exceeds the supported ceiling {}",
            linear_fp::DEGREE_CEILING
        )));
    }
    for (idx, ns) in node_sets.iter().enumerate() {
        let j = idx + 1;
        if ns.j != j {
            return Err(Error::Invalid(format!(
                "node set at position {idx} is labeled for branch {}, expected {j}",
                ns.j
            )));
        }
        let expected = total + n.get(j);
        if ns.nodes.len() != expected {
            return Err(Error::Invalid(format!(
                "node set for branch {j} has {} nodes, expected {expected}",
                ns.nodes.len()
            )));
        }
    }

    let hull = system.hull();
    if total == 0 {
        let splits = (0..m)
            .map(|_| {
                (
                    PolynomialRep::constant(hull, 1.0),
                    PolynomialRep::constant(hull, 1.0),
                )
            })
            .collect();
        return Ok(MultipointPade {
            n: n.clone(),
            q: PolynomialRep::constant(hull, 1.0),
            p: vec![PolynomialRep::zero(system.sigma0().interval); m],
            node_sets,
            splits,
            q_zeros: Vec::new(),
            orthogonality_residuals: vec![Vec::new(); m],
        });
    }

    // The denominator splits over the branches, q = prod_j q_j with
    // q_j of degree n_j and zeros in Delta_j, and each factor is the
    // monic orthogonal polynomial against the positive varying measure
    // (|q~_j| / |w_j|) dsigma_j on Delta_j (w_j keeps constant sign
    // there since its zeros lie on Delta_0). Iterate the coupled
    // orthogonality with the Stieltjes / Golub-Welsch kernel; every
    // half-step is well conditioned, unlike the moment matrix of the
    // full system.
    let rules: Vec<Quadrature> = (1..=m)
        .map(|j| branch_rule(system, j, 2 * (total + n.get(j)) + 16))
        .collect::<Result<_>>()?;
    let eval_prod =
        |roots: &[f64], x: f64| -> f64 { roots.iter().fold(1.0f64, |acc, &r| acc * (x - r)) };
    let mut xq: Vec<Vec<f64>> = (1..=m)
        .map(|j| {
            if n.get(j) == 0 {
                Ok(Vec::new())
            } else {
                gauss_quadrature(system.sigma(j), n.get(j)).map(|q| q.nodes)
            }
        })
        .collect::<Result<_>>()?;
    let tol = 1e-13;
    let mut converged = false;
    for _ in 0..200 {
        let mut disp = 0.0f64;
        for j in 1..=m {
            if n.get(j) == 0 {
                continue;
            }
            let quad = &rules[j - 1];
            let weights: Vec<f64> = quad
                .nodes
                .iter()
                .map(|&x| {
                    let qt: f64 = (1..=m)
                        .filter(|&i| i != j)
                        .map(|i| eval_prod(&xq[i - 1], x).abs())
                        .product();
                    qt / eval_prod(node_sets[j - 1].nodes(), x).abs()
                })
                .collect();
            let fresh = orthopoly::varying_orthogonal_zeros(quad, &weights, n.get(j))?;
            let iv = system.sigma(j).interval;
            if fresh.len() != n.get(j) || fresh.iter().any(|&z| !iv.contains_interior(z)) {
                return Err(Error::Structural(format!(
                    "branch factor for Delta_{j} lost a zero during the iteration"
                )));
            }
            for (old, new) in xq[j - 1].iter().zip(&fresh) {
                disp = disp.max((old - new).abs());
            }
            xq[j - 1] = fresh;
        }
        if disp < tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NonConvergence {
            detail: format!("coupled orthogonality did not reach {tol:.1e}"),
            trace: Vec::new(),
        });
    }
    let mut q_zeros: Vec<f64> = xq.iter().flatten().copied().collect();
    q_zeros.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let q = PolynomialRep::from_roots(hull, &q_zeros).into_monic();
    linear_fp::verify_zero_localization(system, n, &q_zeros)?;

    let mut splits = Vec::with_capacity(m);
    for j in 1..=m {
        splits.push(split_zeros(system, j, &q_zeros, hull)?);
    }

    // Numerators: interpolate q sigma_hat_j at the nodes of w_j
    // (Newton form with confluency support), then resample on Delta_0.
    let mut p = Vec::with_capacity(m);
    for j in 1..=m {
        p.push(numerator_from_nodes(system, j, &q, &node_sets[j - 1], total)?);
    }

    // residuals of the defining orthogonality, normalized per row
    let mut orthogonality_residuals = Vec::with_capacity(m);
    for j in 1..=m {
        let quad = &rules[j - 1];
        let mut res = Vec::with_capacity(n.get(j));
        let norm: f64 = quad.integrate(|x| (q.eval(x) / node_sets[j - 1].w.eval(x)).abs());
        for k in 0..n.get(j) {
            let val = quad.integrate(|x| x.powi(k as i32) * q.eval(x) / node_sets[j - 1].w.eval(x));
            res.push(val.abs() / norm.max(1e-300));
        }
        orthogonality_residuals.push(res);
    }

    Ok(MultipointPade {
        n: n.clone(),
        q,
        p,
        node_sets,
        splits,
        q_zeros,
        orthogonality_residuals,
    })
}

fn split_zeros(
    system: &AngelescoSystem,
    j: usize,
    q_zeros: &[f64],
    hull: crate::measures::Interval,
) -> Result<(PolynomialRep, PolynomialRep)> {
    let iv = system.sigma(j).interval;
    let mut inside = Vec::new();
    let mut outside = Vec::new();
    for &z in q_zeros {
        if iv.distance(z) < 1e-12 && !iv.contains_interior(z) {
            return Err(Error::Boundary(format!(
                "denominator zero {z} within 1e-12 of an endpoint of Delta_{j}"
            )));
        }
        if iv.contains_interior(z) {
            inside.push(z);
        } else {
            outside.push(z);
        }
    }
    Ok((
        PolynomialRep::from_roots(hull, &inside),
        PolynomialRep::from_roots(hull, &outside),
    ))
}

/// Factor pair `(q_{n,j}, q-tilde_{n,j})` of the common denominator.
pub fn split_denominator(mp: &MultipointPade, j: usize) -> (PolynomialRep, PolynomialRep) {
    mp.splits[j - 1].clone()
}

/// Degree-(|n|-1) numerator from Newton divided differences of
/// `f = q sigma_hat_j` at the nodes, resampled at `|n|` Chebyshev
/// points of `Delta_0`. Coincident nodes fall back to the derivative
/// of the Markov transform.
fn numerator_from_nodes(
    system: &AngelescoSystem,
    j: usize,
    q: &PolynomialRep,
    ns: &NodeSet,
    total: usize,
) -> Result<PolynomialRep> {
    let inner = converged_markov_rule(system, j)?;
    let sigma_at = |x: f64| -> f64 {
        inner
            .nodes
            .iter()
            .zip(&inner.weights)
            .map(|(&t, &w)| w / (x - t))
            .sum()
    };
    let dsigma_at = |x: f64| -> f64 {
        inner
            .nodes
            .iter()
            .zip(&inner.weights)
            .map(|(&t, &w)| -w / ((x - t) * (x - t)))
            .sum()
    };
    let f = |x: f64| q.eval(x) * sigma_at(x);
    let df = |x: f64| q.derivative().eval(x) * sigma_at(x) + q.eval(x) * dsigma_at(x);

    // Newton table with first-order confluency
    let xs = &ns.nodes;
    let k = xs.len();
    let mut table = vec![vec![0.0f64; k]; k];
    for (i, &x) in xs.iter().enumerate() {
        table[0][i] = f(x);
    }
    for order in 1..k {
        for i in 0..(k - order) {
            let dx = xs[i + order] - xs[i];
            table[order][i] = if dx.abs() < 1e-13 {
                if order == 1 {
                    df(xs[i])
                } else {
                    return Err(Error::Degenerate(format!(
                        "more than two coincident interpolation nodes near {}",
                        xs[i]
                    )));
                }
            } else {
                (table[order - 1][i + 1] - table[order - 1][i]) / dx
            };
        }
    }
    let newton_eval = |z: f64| -> f64 {
        let mut acc = table[k - 1][0];
        for i in (0..k - 1).rev() {
            acc = acc * (z - xs[i]) + table[i][0];
        }
        acc
    };
    let iv0 = system.sigma0().interval;
    let values: Vec<f64> = iv0
        .chebyshev_points(total)
        .iter()
        .map(|&z| newton_eval(z))
        .collect();
    Ok(PolynomialRep::interpolate_at_chebyshev(iv0, &values))
}

/// Both sides of the remainder integral identity:
/// direct `sigma_hat_j(z) - p_j(z)/q(z)` and the weighted integral
/// `w_j(z) / (q_{n,j}^2(z) q-tilde_{n,j}(z)) *
///  int q_{n,j}^2(x) q-tilde_{n,j}(x) / ((z - x) w_j(x)) dsigma_j(x)`.
pub fn remainder_identity_residual(
    mp: &MultipointPade,
    system: &AngelescoSystem,
    j: usize,
    z: Complex64,
) -> Result<(Complex64, Complex64)> {
    let qz = mp.q.eval_complex(z);
    let scale: f64 = mp.q.coeffs().iter().map(|c| c.abs()).sum();
    if qz.norm() <= 1e-13 * scale.max(1e-300) {
        return Err(Error::Pole(format!("z = {z} is numerically a zero of q")));
    }
    let sigma = markov_transform_c(system.sigma(j), z)?;
    let direct = sigma - mp.p[j - 1].eval_complex(z) / qz;

    let (qj, qt) = &mp.splits[j - 1];
    let w = mp.node_sets[j - 1].node_polynomial();
    let prefactor = w.eval_complex(z)
        / (qj.eval_complex(z) * qj.eval_complex(z) * qt.eval_complex(z));
    let mut order = (2 * (mp.n.total() + mp.node_sets[j - 1].nodes.len()) + 16).max(32);
    let mut prev: Option<Complex64> = None;
    let integral = loop {
        let quad = gauss_quadrature(system.sigma(j), order)?;
        let mut acc = Complex64::new(0.0, 0.0);
        for (&x, &wt) in quad.nodes.iter().zip(&quad.weights) {
            let qjx = qj.eval(x);
            acc += wt * qjx * qjx * qt.eval(x) / ((z - x) * w.eval(x));
        }
        if let Some(p) = prev {
            if (acc - p).norm() <= (1e-13 * acc.norm()).max(1e-16) {
                break acc;
            }
        }
        if order >= 2048 {
            break acc;
        }
        prev = Some(acc);
        order *= 2;
    };
    Ok((direct, prefactor * integral))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linear_fp::{sign_change_polynomial, solve_linear_fp};
    use crate::measures::MeasureSpec;
    use approx::assert_abs_diff_eq;

    fn reference_system() -> AngelescoSystem {
        AngelescoSystem::new(
            MeasureSpec::jacobi(-1.0, 1.0, -0.5, -0.5).unwrap(),
            vec![
                MeasureSpec::jacobi(-3.0, -2.0, 0.0, 0.0).unwrap(),
                MeasureSpec::jacobi(2.0, 3.0, 0.0, 0.0).unwrap(),
            ],
        )
        .unwrap()
    }

    fn single_branch_system() -> AngelescoSystem {
        AngelescoSystem::new(
            MeasureSpec::jacobi(-1.0, 1.0, -0.5, -0.5).unwrap(),
            vec![MeasureSpec::jacobi(2.0, 3.0, 0.0, 0.0).unwrap()],
        )
        .unwrap()
    }

    fn chebyshev_node_sets(system: &AngelescoSystem, n: &MultiIndex) -> Vec<NodeSet> {
        let iv0 = system.sigma0().interval;
        (1..=n.len())
            .map(|j| {
                NodeSet::new(system, j, iv0.chebyshev_points(n.total() + n.get(j))).unwrap()
            })
            .collect()
    }

    #[test]
    fn single_branch_first_order_against_moment_oracle() {
        let sys = single_branch_system();
        let n = MultiIndex::new(vec![1]);
        let ns = chebyshev_node_sets(&sys, &n);
        let w = ns[0].node_polynomial().clone();
        let mp = solve_multipoint(&sys, &n, ns).unwrap();
        // q(x) = x - m1/m0 with dnu = dsigma_1 / w
        let quad = gauss_quadrature(sys.sigma(1), 200).unwrap();
        let m0 = quad.integrate(|x| 1.0 / w.eval(x));
        let m1 = quad.integrate(|x| x / w.eval(x));
        let root = mp.q.zeros().unwrap()[0];
        assert_abs_diff_eq!(root, m1 / m0, epsilon = 1e-11);
    }

    #[test]
    fn mirror_symmetric_nodes_give_even_q() {
        let sys = reference_system();
        let n = MultiIndex::new(vec![1, 1]);
        let mp = solve_multipoint(&sys, &n, chebyshev_node_sets(&sys, &n)).unwrap();
        for &x in &[0.3f64, 1.2, 2.4] {
            assert_abs_diff_eq!(mp.q.eval(-x), mp.q.eval(x), epsilon = 1e-9);
        }
    }

    #[test]
    fn consistency_with_linear_fp() {
        let sys = reference_system();
        for n in [vec![1, 1], vec![2, 1]] {
            let n = MultiIndex::new(n);
            let approx = solve_linear_fp(&sys, &n).unwrap();
            let node_sets: Vec<NodeSet> = (1..=2usize)
                .map(|j| {
                    let w = sign_change_polynomial(&approx, &sys, j).unwrap();
                    NodeSet::new(&sys, j, w.zeros().unwrap()).unwrap()
                })
                .collect();
            let mp = solve_multipoint(&sys, &n, node_sets).unwrap();
            for (a, b) in mp.q.coeffs().iter().zip(approx.q.coeffs()) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn orthogonality_residuals_small() {
        let sys = reference_system();
        let n = MultiIndex::new(vec![3, 2]);
        let mp = solve_multipoint(&sys, &n, chebyshev_node_sets(&sys, &n)).unwrap();
        assert!(mp.max_orthogonality_residual() < 1e-9);
    }

    #[test]
    fn remainder_identity_first_order() {
        let sys = single_branch_system();
        let n = MultiIndex::new(vec![1]);
        let mp = solve_multipoint(&sys, &n, chebyshev_node_sets(&sys, &n)).unwrap();
        let (direct, integral) =
            remainder_identity_residual(&mp, &sys, 1, Complex64::new(10.0, 0.0)).unwrap();
        assert!(
            (direct - integral).norm() < 1e-9 * direct.norm(),
            "direct {direct} vs integral {integral}"
        );
    }

    #[test]
    fn remainder_identity_trivial_index() {
        let sys = single_branch_system();
        let n = MultiIndex::new(vec![0]);
        let mp = solve_multipoint(&sys, &n, vec![NodeSet::new(&sys, 1, vec![]).unwrap()]).unwrap();
        let z = Complex64::new(0.0, 2.0);
        let (direct, integral) = remainder_identity_residual(&mp, &sys, 1, z).unwrap();
        let sigma = markov_transform_c(sys.sigma(1), z).unwrap();
        assert!((direct - sigma).norm() < 1e-12);
        assert!((integral - sigma).norm() < 1e-12);
    }

    #[test]
    fn remainder_identity_far_field() {
        let sys = reference_system();
        let n = MultiIndex::new(vec![2, 1]);
        let mp = solve_multipoint(&sys, &n, chebyshev_node_sets(&sys, &n)).unwrap();
        let (direct, integral) =
            remainder_identity_residual(&mp, &sys, 2, Complex64::new(1.0e4, 0.0)).unwrap();
        let ratio = direct / integral;
        assert!((ratio - Complex64::new(1.0, 0.0)).norm() < 1e-6, "ratio {ratio}");
    }

    #[test]
    fn split_degrees_and_reconstruction() {
        let sys = reference_system();
        let n = MultiIndex::new(vec![1, 1]);
        let mp = solve_multipoint(&sys, &n, chebyshev_node_sets(&sys, &n)).unwrap();
        let (q1, _) = split_denominator(&mp, 1);
        let (q2, _) = split_denominator(&mp, 2);
        assert_eq!(q1.degree(), 1);
        assert_eq!(q2.degree(), 1);
        for j in 1..=2usize {
            let (a, b) = split_denominator(&mp, j);
            let prod = a.mul(&b);
            for (c, d) in prod.coeffs().iter().zip(mp.q.coeffs()) {
                assert_abs_diff_eq!(c, d, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn split_with_zero_entry() {
        let sys = reference_system();
        let n = MultiIndex::new(vec![2, 0]);
        let mp = solve_multipoint(&sys, &n, chebyshev_node_sets(&sys, &n)).unwrap();
        let (q2, qt2) = split_denominator(&mp, 2);
        assert_eq!(q2.degree(), 0);
        assert!(q2.is_monic(1e-12));
        assert_eq!(qt2.degree(), 2);
    }

    #[test]
    fn tilde_over_w_constant_sign() {
        let sys = reference_system();
        let n = MultiIndex::new(vec![2, 2]);
        let mp = solve_multipoint(&sys, &n, chebyshev_node_sets(&sys, &n)).unwrap();
        for j in 1..=2usize {
            let (_, qt) = split_denominator(&mp, j);
            let w = mp.node_sets[j - 1].node_polynomial();
            let samples = sys.sigma(j).interval.chebyshev_points(257);
            let signs: Vec<f64> = samples
                .iter()
                .map(|&x| (qt.eval(x) / w.eval(x)).signum())
                .collect();
            assert!(signs.windows(2).all(|s| s[0] == s[1]), "sign flip on Delta_{j}");
        }
    }
}
