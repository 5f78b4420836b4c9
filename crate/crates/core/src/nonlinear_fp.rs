//! Non-linear Fourier-Pade approximants via the fixed-point node map.
//!
//! Starting from nodes on `Delta_0`, each iteration solves the
//! multipoint Pade problem, forms for every branch the polynomial
//! `Omega_j` orthogonal against the induced varying measure on
//! `Delta_0`, and moves the nodes toward the zeros of `Omega_j`. At a
//! fixed point the node polynomials coincide with the `Omega_j` and
//! the approximant satisfies the non-linear Fourier conditions.

use crate::error::{Error, Result};
use crate::linear_fp::{converged_markov_rule, MultiIndex};
use crate::measures::{gauss_quadrature, AngelescoSystem, Quadrature};
use crate::multipoint_pade::{solve_multipoint, MultipointPade, NodeSet};
use crate::orthopoly;
use crate::poly::PolynomialRep;

/// Options of the damped fixed-point iteration.
#[derive(Debug, Clone, Copy)]
pub struct FixedPointOpts {
    /// Step fraction toward the new nodes, in `(0, 1]`.
    pub damping: f64,
    pub max_iter: usize,
    /// Convergence threshold on the maximum node displacement.
    pub tol: f64,
}

impl Default for FixedPointOpts {
    fn default() -> Self {
        Self {
            damping: 1.0,
            max_iter: 200,
            tol: 1e-10,
        }
    }
}

/// Solved non-linear Fourier-Pade approximant.
#[derive(Debug, Clone)]
pub struct NonlinearFPApproximant {
    pub n: MultiIndex,
    /// Monic common denominator `T_n`, degree `|n|`.
    pub t: PolynomialRep,
    /// Numerators `S_{n,j}`, degree `<= |n| - 1`.
    pub s: Vec<PolynomialRep>,
    /// Fixed-point node sets (the zeros of the `Omega_j`).
    pub node_sets: Vec<NodeSet>,
    /// `(T_{n,j}, T-tilde_{n,j})` factor pairs of `t`.
    pub splits: Vec<(PolynomialRep, PolynomialRep)>,
    /// Maximum node displacement per iteration.
    pub trace: Vec<f64>,
    /// Iterations at which oscillation triggered a damping halving.
    pub damping_halvings: Vec<usize>,
}

/// Monic `Omega_j` of degree `|n| + n_j`, orthogonal on `Delta_0` to
/// all lower powers against the density
/// `rho_j(y) = (1 / (q_j^2(y) |q~_j(y)|)) int q_j^2(x) |q~_j(x)| /
/// (|y - x| |w_j(x)|) dsigma_j(x)`;
/// the signed version of the density must have constant sign.
pub fn omega_polynomial(
    mp: &MultipointPade,
    system: &AngelescoSystem,
    j: usize,
) -> Result<PolynomialRep> {
    let degree = mp.n.total() + mp.n.get(j);
    // evaluate every polynomial factor in product form over its zeros:
    // near a zero the basis-coefficient evaluation keeps only absolute
    // accuracy, and the resulting relative noise in q_j^2 would put a
    // floor of ~1e-8 under the fixed-point displacement
    let iv = system.sigma(j).interval;
    let (zj, zt): (Vec<f64>, Vec<f64>) = mp
        .q_zeros
        .iter()
        .partition(|&&z| iv.contains_interior(z));
    let wn = mp.node_sets[j - 1].nodes();
    let prod = |roots: &[f64], x: f64| -> f64 {
        roots.iter().fold(1.0f64, |acc, &r| acc * (x - r))
    };

    // fixed inner rule on Delta_j: the integrand is analytic there
    // (its poles sit on Delta_0) and decays geometrically in the order
    let inner = branch_rule_for_density(system, j, degree)?;
    let signed_density = |y: f64| -> f64 {
        let integral: f64 = inner
            .nodes
            .iter()
            .zip(&inner.weights)
            .map(|(&x, &wt)| {
                let qx = prod(&zj, x);
                wt * qx * qx * prod(&zt, x) / ((y - x) * prod(wn, x))
            })
            .sum();
        let qy = prod(&zj, y);
        integral / (qy * qy * prod(&zt, y))
    };

    let iv0 = system.sigma0().interval;
    let mut order = (4 * degree + 32).max(48);
    let mut prev: Option<Vec<f64>> = None;
    loop {
        let quad = gauss_quadrature(system.sigma0(), order)?;
        let samples: Vec<f64> = quad.nodes.iter().map(|&y| signed_density(y)).collect();
        let peak = samples.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
        let has_pos = samples.iter().any(|&v| v > 1e-13 * peak);
        let has_neg = samples.iter().any(|&v| v < -1e-13 * peak);
        if has_pos && has_neg {
            return Err(Error::Structural(format!(
                "induced density for branch {j} changes sign on Delta_0"
            )));
        }
        let weights: Vec<f64> = samples.iter().map(|v| v.abs()).collect();
        let zeros = orthopoly::varying_orthogonal_zeros(&quad, &weights, degree)?;
        let done = prev
            .map(|p| {
                zeros
                    .iter()
                    .zip(&p)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0f64, f64::max)
                    <= 1e-12
            })
            .unwrap_or(false);
        if done || order >= 2048 {
            return Ok(PolynomialRep::from_roots(iv0, &zeros).into_monic());
        }
        prev = Some(zeros);
        order *= 2;
    }
}

/// Gauss rule on `Delta_j` converged for the Cauchy-type density
/// integrand, probed at the midpoint of `Delta_0`.
fn branch_rule_for_density(
    system: &AngelescoSystem,
    j: usize,
    degree: usize,
) -> Result<Quadrature> {
    let spec = system.sigma(j);
    let probe = system.sigma0().interval.midpoint();
    let mut order = (2 * degree + 16).max(32);
    let mut prev: Option<f64> = None;
    loop {
        let quad = gauss_quadrature(spec, order)?;
        let val: f64 = quad
            .nodes
            .iter()
            .zip(&quad.weights)
            .map(|(&x, &wt)| wt / (probe - x))
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

/// Damped fixed-point iteration on the node map.
pub fn fixed_point_solve(
    system: &AngelescoSystem,
    n: &MultiIndex,
    opts: FixedPointOpts,
) -> Result<NonlinearFPApproximant> {
    let m = system.num_branches();
    assert_eq!(n.len(), m, "multi-index length must match the number of branches");
    assert!(
        opts.damping > 0.0 && opts.damping <= 1.0,
        "damping must lie in (0, 1]"
    );
    let total = n.total();
    if total == 0 {
        let mp = solve_multipoint(
            system,
            n,
            (1..=m)
                .map(|j| NodeSet::new(system, j, Vec::new()))
                .collect::<Result<_>>()?,
        )?;
        return Ok(NonlinearFPApproximant {
            n: n.clone(),
            t: mp.q,
            s: mp.p,
            node_sets: mp.node_sets,
            splits: mp.splits,
            trace: Vec::new(),
            damping_halvings: Vec::new(),
        });
    }

    // initial nodes: zeros of sigma_0's own orthogonal polynomials,
    // i.e. Gauss nodes of the matching order; denominator factors
    // start from the Gauss nodes of each sigma_j
    let mut nodes: Vec<Vec<f64>> = (1..=m)
        .map(|j| gauss_quadrature(system.sigma0(), total + n.get(j)).map(|q| q.nodes))
        .collect::<Result<_>>()?;
    let mut zt: Vec<Vec<f64>> = (1..=m)
        .map(|j| {
            if n.get(j) == 0 {
                Ok(Vec::new())
            } else {
                gauss_quadrature(system.sigma(j), n.get(j)).map(|q| q.nodes)
            }
        })
        .collect::<Result<_>>()?;

    // fixed quadrature rules; the node map stays a deterministic map
    // of the zero coordinates, so the iteration contracts all the way
    // to roundoff instead of stalling on re-discretization noise
    let max_nj = (1..=m).map(|j| n.get(j)).max().unwrap();
    let quad_j: Vec<Quadrature> = (1..=m)
        .map(|j| gauss_quadrature(system.sigma(j), (2 * total + 32).max(64)))
        .collect::<Result<_>>()?;
    let quad_0 = gauss_quadrature(system.sigma0(), (2 * (total + max_nj) + 32).max(64))?;
    let inner: Vec<Quadrature> = (1..=m)
        .map(|j| gauss_quadrature(system.sigma(j), (2 * total + 24).max(48)))
        .collect::<Result<_>>()?;
    let prod =
        |roots: &[f64], x: f64| -> f64 { roots.iter().fold(1.0f64, |acc, &z| acc * (x - z)) };

    let mut damping = opts.damping;
    let mut trace = Vec::new();
    let mut damping_halvings = Vec::new();
    let mut increases = 0usize;

    for it in 0..opts.max_iter {
        let mut displacement = 0.0f64;
        for j in 1..=m {
            // denominator half-step: T_j orthogonal against
            // (|T~_j| / |w_j|) dsigma_j
            if n.get(j) > 0 {
                let quad = &quad_j[j - 1];
                let weights: Vec<f64> = quad
                    .nodes
                    .iter()
                    .map(|&x| {
                        let tt: f64 = (1..=m)
                            .filter(|&i| i != j)
                            .map(|i| prod(&zt[i - 1], x).abs())
                            .product();
                        tt / prod(&nodes[j - 1], x).abs()
                    })
                    .collect();
                let fresh = orthopoly::varying_orthogonal_zeros(quad, &weights, n.get(j))?;
                let iv = system.sigma(j).interval;
                if fresh.len() != n.get(j) || fresh.iter().any(|&z| !iv.contains_interior(z)) {
                    return Err(Error::Structural(format!(
                        "denominator factor for Delta_{j} lost a zero during the iteration"
                    )));
                }
                for (old, new) in zt[j - 1].iter().zip(&fresh) {
                    displacement = displacement.max((old - new).abs());
                }
                zt[j - 1] = zt[j - 1]
                    .iter()
                    .zip(&fresh)
                    .map(|(&o, &f)| o + damping * (f - o))
                    .collect();
                zt[j - 1].sort_by(|a, b| a.partial_cmp(b).unwrap());
            }

            // node half-step: Omega_j orthogonal on Delta_0 against the
            // induced density K_j(y) / (T_j^2(y) |T~_j(y)|), with
            // K_j(y) = int T_j^2 |T~_j| / (|y - x| |w_j|) dsigma_j
            let rule = &inner[j - 1];
            let kernel: Vec<(f64, f64)> = rule
                .nodes
                .iter()
                .zip(&rule.weights)
                .map(|(&x, &wt)| {
                    let tj = prod(&zt[j - 1], x);
                    let tt: f64 = (1..=m)
                        .filter(|&i| i != j)
                        .map(|i| prod(&zt[i - 1], x).abs())
                        .product();
                    (x, wt * tj * tj * tt / prod(&nodes[j - 1], x).abs())
                })
                .collect();
            let weights0: Vec<f64> = quad_0
                .nodes
                .iter()
                .map(|&y| {
                    let k: f64 = kernel
                        .iter()
                        .map(|&(x, kv)| kv / (y - x).abs())
                        .sum();
                    let tj = prod(&zt[j - 1], y);
                    let tt: f64 = (1..=m)
                        .filter(|&i| i != j)
                        .map(|i| prod(&zt[i - 1], y).abs())
                        .product();
                    k / (tj * tj * tt)
                })
                .collect();
            let ys =
                orthopoly::varying_orthogonal_zeros(&quad_0, &weights0, total + n.get(j))?;
            let iv0 = system.sigma0().interval;
            if ys.len() != total + n.get(j)
                || ys.iter().any(|&y| !iv0.contains_interior(y))
            {
                return Err(Error::Structural(format!(
                    "Omega for branch {j} does not have {} simple zeros inside Delta_0",
                    total + n.get(j)
                )));
            }
            for (x, y) in nodes[j - 1].iter().zip(&ys) {
                displacement = displacement.max((y - x).abs());
            }
            nodes[j - 1] = nodes[j - 1]
                .iter()
                .zip(&ys)
                .map(|(&x, &y)| x + damping * (y - x))
                .collect();
            nodes[j - 1].sort_by(|a, b| a.partial_cmp(b).unwrap());
        }

        // oscillation guard: three consecutive increases halve the step
        if let Some(&last) = trace.last() {
            if displacement > last {
                increases += 1;
                if increases >= 3 {
                    damping *= 0.5;
                    damping_halvings.push(it);
                    increases = 0;
                }
            } else {
                increases = 0;
            }
        }
        trace.push(displacement);

        if displacement < opts.tol {
            let node_sets = nodes
                .iter()
                .enumerate()
                .map(|(idx, xs)| NodeSet::new(system, idx + 1, xs.clone()))
                .collect::<Result<Vec<_>>>()?;
            let mp = solve_multipoint(system, n, node_sets)?;
            return Ok(NonlinearFPApproximant {
                n: n.clone(),
                t: mp.q,
                s: mp.p,
                node_sets: mp.node_sets,
                splits: mp.splits,
                trace,
                damping_halvings,
            });
        }
    }

    Err(Error::NonConvergence {
        detail: format!(
            "node map did not converge below {:.3e} within {} iterations",
            opts.tol, opts.max_iter
        ),
        trace,
    })
}

/// Maximum non-linear Fourier residual
/// `|c_k(sigma_hat_j - S_j / T)|` over `j` and `k <= |n| + n_j - 1`.
pub fn residual_check(
    approx: &NonlinearFPApproximant,
    system: &AngelescoSystem,
) -> Result<f64> {
    let m = system.num_branches();
    let total = approx.n.total();
    if total == 0 {
        return Ok(0.0);
    }
    let k_max = total + approx.n.entries().iter().max().unwrap() - 1;
    let table = orthopoly::recurrence_coefficients(system.sigma0(), k_max)?;
    let inner: Vec<Quadrature> = (1..=m)
        .map(|j| converged_markov_rule(system, j))
        .collect::<Result<_>>()?;

    let mut order = (2 * (total + k_max) + 16).max(64);
    let mut prev: Option<f64> = None;
    loop {
        let quad = gauss_quadrature(system.sigma0(), order)?;
        let mut worst = 0.0f64;
        for j in 1..=m {
            let rule = &inner[j - 1];
            let values: Vec<f64> = quad
                .nodes
                .iter()
                .map(|&x| {
                    let sigma: f64 = rule
                        .nodes
                        .iter()
                        .zip(&rule.weights)
                        .map(|(&t, &wt)| wt / (x - t))
                        .sum();
                    sigma - approx.s[j - 1].eval(x) / approx.t.eval(x)
                })
                .collect();
            for k in 0..(total + approx.n.get(j)) {
                let c: f64 = quad
                    .nodes
                    .iter()
                    .enumerate()
                    .map(|(t, &x)| {
                        quad.weights[t]
                            * values[t]
                            * orthopoly::eval_orthonormal_all(&table, k, x)[k]
                    })
                    .sum();
                worst = worst.max(c.abs());
            }
        }
        // deep below any tolerance of interest the successive-order
        // comparison only sees quadrature noise; stop immediately
        if worst < 1e-12 {
            return Ok(worst);
        }
        if let Some(p) = prev {
            if (worst - p).abs() <= (1e-11 * worst).max(1e-14) {
                return Ok(worst);
            }
        }
        if order >= 2048 {
            return Ok(worst);
        }
        prev = Some(worst);
        order *= 2;
    }
}
