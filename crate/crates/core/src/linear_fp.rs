//! Linear Fourier-Pade approximants.
//!
//! The common denominator `Q_n` is the null vector of the homogeneous
//! moment system `c_k(Q_n sigma_hat_j) = 0`, `k = |n|, ..., |n|+n_j-1`,
//! and each numerator is the truncated Fourier expansion of
//! `Q_n sigma_hat_j` in the orthonormal family of `sigma_0`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::measures::{
    gauss_quadrature, markov_at_points, markov_transform_c, AngelescoSystem, Quadrature,
};
use crate::orthopoly::{self, RecurrenceTable};
use crate::poly::PolynomialRep;

/// Largest supported total degree of the common denominator.
pub const DEGREE_CEILING: usize = 50;

/// A multi-index `(n_1, ..., n_m)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultiIndex(Vec<usize>);

impl MultiIndex {
    pub fn new(n: Vec<usize>) -> Self {
        assert!(!n.is_empty(), "multi-index must have at least one entry");
        Self(n)
    }

    pub fn entries(&self) -> &[usize] {
        &self.0
    }

    /// `n_j`, 1-based.
    pub fn get(&self, j: usize) -> usize {
        self.0[j - 1]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `|n|`.
    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }
}

impl std::fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(")?;
        for (i, n) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{n}")?;
        }
        write!(f, ")")
    }
}

/// Solved linear Fourier-Pade approximant.
#[derive(Debug, Clone)]
pub struct LinearFPApproximant {
    pub n: MultiIndex,
    /// Monic common denominator of degree `|n|`, on the hull basis.
    pub q: PolynomialRep,
    /// Numerators `P_{n,j}`, degree `<= |n| - 1`, on the `Delta_0` basis.
    pub p: Vec<PolynomialRep>,
    /// `|c_k(Q sigma_hat_j - P_j)|` over the constrained rows
    /// `k = |n|, ..., |n|+n_j-1`, per branch (`fourier_residuals[j-1]`
    /// has `n_j` entries). Lower coefficients define `P_j` and carry no
    /// constraint.
    pub fourier_residuals: Vec<Vec<f64>>,
    /// All zeros of `q`, sorted.
    pub q_zeros: Vec<f64>,
}

impl LinearFPApproximant {
    /// Zeros of `q` lying in the open interval `Delta_j` (1-based).
    pub fn denominator_zeros_in(&self, system: &AngelescoSystem, j: usize) -> Vec<f64> {
        let iv = system.sigma(j).interval;
        self.q_zeros
            .iter()
            .copied()
            .filter(|&z| iv.contains_interior(z))
            .collect()
    }

    pub fn max_fourier_residual(&self) -> f64 {
        self.fourier_residuals
            .iter()
            .flatten()
            .fold(0.0f64, |acc, &r| acc.max(r))
    }
}

/// Evaluation data for one outer quadrature order: `sigma_hat_j` and
/// orthonormal values at the nodes of a Gauss rule for `sigma_0`.
struct OuterData {
    quad: Quadrature,
    /// `markov[j-1][t]`
    markov: Vec<Vec<f64>>,
    /// `ortho[t][k]`
    ortho: Vec<Vec<f64>>,
}

fn outer_data(
    system: &AngelescoSystem,
    table: &RecurrenceTable,
    inner: &[Quadrature],
    k_max: usize,
    order: usize,
) -> Result<OuterData> {
    let quad = gauss_quadrature(system.sigma0(), order)?;
    let markov = inner
        .iter()
        .map(|rule| {
            quad.nodes
                .iter()
                .map(|&x| {
                    rule.nodes
                        .iter()
                        .zip(&rule.weights)
                        .map(|(&t, &w)| w / (x - t))
                        .sum()
                })
                .collect()
        })
        .collect();
    let ortho = quad
        .nodes
        .iter()
        .map(|&x| orthopoly::eval_orthonormal_all(table, k_max, x))
        .collect();
    Ok(OuterData {
        quad,
        markov,
        ortho,
    })
}

impl OuterData {
    /// `c_k(f sigma_hat_j)` for a polynomial factor `f`.
    fn coefficient<F: Fn(f64) -> f64>(&self, j: usize, k: usize, f: F) -> f64 {
        self.quad
            .nodes
            .iter()
            .enumerate()
            .map(|(t, &x)| self.quad.weights[t] * f(x) * self.markov[j - 1][t] * self.ortho[t][k])
            .sum()
    }
}

/// Fourier coefficient `c_k(Q sigma_hat_j)` with order doubling until the
/// relative change drops below 1e-12.
pub fn fourier_coefficient(
    system: &AngelescoSystem,
    q: &PolynomialRep,
    j: usize,
    k: usize,
) -> Result<f64> {
    assert!(j >= 1 && j <= system.num_branches(), "branch index {j} out of range");
    let table = orthopoly::recurrence_coefficients(system.sigma0(), k)?;
    let inner: Vec<Quadrature> = (1..=system.num_branches())
        .map(|b| converged_markov_rule(system, b))
        .collect::<Result<_>>()?;
    let mut order = (2 * (q.degree() + k + 1) + 8).max(32);
    let mut prev: Option<f64> = None;
    loop {
        let data = outer_data(system, &table, &inner, k, order)?;
        let val = data.coefficient(j, k, |x| q.eval(x));
        if let Some(p) = prev {
            // absolute floor: quadrature roundoff makes ~1e-15 the best
            // attainable absolute accuracy for these coefficients
            if (val - p).abs() <= (1e-12 * val.abs()).max(1e-15) {
                return Ok(val);
            }
        }
        if order >= 2048 {
            return Ok(val);
        }
        prev = Some(val);
        order *= 2;
    }
}

/// Solve the linear Fourier-Pade problem for the given multi-index.
pub fn solve_linear_fp(system: &AngelescoSystem, n: &MultiIndex) -> Result<LinearFPApproximant> {
    solve_linear_fp_with_order(system, n, 0)
}

/// Same as [`solve_linear_fp`] with an explicit starting quadrature
/// order (0 picks the default); used to check order-independence.
pub fn solve_linear_fp_with_order(
    system: &AngelescoSystem,
    n: &MultiIndex,
    base_order: usize,
) -> Result<LinearFPApproximant> {
    let m = system.num_branches();
    assert_eq!(n.len(), m, "multi-index length must match the number of branches");
    let total = n.total();
    if total > DEGREE_CEILING {
        return Err(Error::Ceiling(format!(
            "|n| = {total} exceeds the supported ceiling {DEGREE_CEILING}"
        )));
    }
    let hull = system.hull();
    if total == 0 {
        // vacuous conditions: Q = 1, P_j = 0
        return Ok(LinearFPApproximant {
            n: n.clone(),
            q: PolynomialRep::constant(hull, 1.0),
            p: vec![PolynomialRep::zero(system.sigma0().interval); m],
            fourier_residuals: vec![Vec::new(); m],
            q_zeros: Vec::new(),
        });
    }

    solve_iterative(system, n, base_order)
}

/// Solve by both internal paths (moment matrix and orthogonality fixed
/// point) regardless of `|n|`; exposed for cross-validation only.
#[doc(hidden)]
pub fn solve_linear_fp_paths(
    system: &AngelescoSystem,
    n: &MultiIndex,
) -> Result<(LinearFPApproximant, LinearFPApproximant)> {
    Ok((solve_direct(system, n, 0)?, solve_iterative(system, n, 0)?))
}

/// Extra tail coefficients carried beyond `|n| + n_j` when evaluating
/// the remainder through its Fourier series; the terms decay by the
/// exterior conformal radius of the nearest branch per index.
const TAIL_EXTRA: usize = 32;

fn solve_direct(
    system: &AngelescoSystem,
    n: &MultiIndex,
    base_order: usize,
) -> Result<LinearFPApproximant> {
    let m = system.num_branches();
    let total = n.total();
    let hull = system.hull();
    let k_max = total + n.entries().iter().max().unwrap() - 1;
    let engine = TailEngine::new(system, total, total, k_max, base_order)?;
    let mut mat = nalgebra::DMatrix::<f64>::zeros(total, total + 1);
    let mut row = 0;
    for j in 1..=m {
        for k in total..(total + n.get(j)) {
            for i in 0..=total {
                mat[(row, i)] = engine.entry(j, k, i);
            }
            row += 1;
        }
    }

    // null vector in orthonormal-family coordinates; rebuild on the
    // hull Chebyshev basis (stable for zeros off Delta_0) by sampling
    let d = null_vector_raw(&mat)?;
    let pts = hull.chebyshev_points(total + 1);
    let values: Vec<f64> = pts
        .iter()
        .map(|&x| {
            let l = orthopoly::eval_orthonormal_all(&engine.table, total, x);
            d.iter().zip(&l).map(|(a, b)| a * b).sum()
        })
        .collect();
    let q = PolynomialRep::interpolate_at_chebyshev(hull, &values).into_monic();
    if q.degree() != total {
        return Err(Error::Structural(format!(
            "denominator degree {} differs from |n| = {total}",
            q.degree()
        )));
    }
    let q_zeros = q.zeros()?;
    verify_zero_localization(system, n, &q_zeros)?;
    finalize(system, n, q, q_zeros, &engine)
}

/// Coupled orthogonality fixed point for large `|n|`.
///
/// The denominator's branch factor `Q_j` (degree `n_j`, zeros in
/// `Delta_j`) is the monic orthogonal polynomial against the varying
/// measure `(|Qhat_j| / |W_j|) dsigma_j`, where `Qhat_j` collects the
/// other branches' factors, while the remainder's sign-change
/// polynomial `W_j` (degree `|n| + n_j`, zeros in `Delta_0`) is
/// itself the monic orthogonal polynomial on `Delta_0` against
/// `(K_j(t) / |Q_j(t)|) dsigma_0(t)` with the positive kernel
/// `K_j(t) = int Q_j(x)^2 |Qhat_j(x)| / (|t - x| |W_j(x)|) dsigma_j(x)`.
/// Every half-step is an orthogonal-polynomial computation with a
/// smooth strictly positive weight, so the scheme stays
/// well-conditioned at degrees where the moment matrix is hopeless,
/// and the degree of each `W_j` is enforced by construction.
fn solve_iterative(
    system: &AngelescoSystem,
    n: &MultiIndex,
    base_order: usize,
) -> Result<LinearFPApproximant> {
    let m = system.num_branches();
    let total = n.total();
    let hull = system.hull();
    let max_nj = *n.entries().iter().max().unwrap();
    let engine = TailEngine::new(system, total, total, total + max_nj + TAIL_EXTRA, base_order)?;

    // initial zeros: Gauss nodes of sigma_j for Q_j, of sigma_0 for W_j
    let mut xq: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut xw: Vec<Vec<f64>> = Vec::with_capacity(m);
    for j in 1..=m {
        if n.get(j) == 0 {
            xq.push(Vec::new());
            xw.push(Vec::new());
        } else {
            xq.push(gauss_quadrature(system.sigma(j), n.get(j))?.nodes);
            xw.push(gauss_quadrature(system.sigma0(), total + n.get(j))?.nodes);
        }
    }

    // quadrature rules are fixed across iterations; the integrands are
    // polynomials of known degree times analytic weights
    let quad_j: Vec<Quadrature> = (1..=m)
        .map(|j| gauss_quadrature(system.sigma(j), (2 * total + 32).max(64)))
        .collect::<Result<_>>()?;
    let quad_0 = gauss_quadrature(system.sigma0(), (2 * (total + max_nj) + 32).max(64))?;
    let inner: Vec<Quadrature> = (1..=m)
        .map(|j| gauss_quadrature(system.sigma(j), (2 * total + 24).max(48)))
        .collect::<Result<_>>()?;

    let tol = 1e-12;
    // accept a stall slightly above the nominal tolerance: the
    // half-steps carry a small roundoff noise floor
    let stall_ceiling = 1e-8;
    let stall_window = 25;
    let max_iter = 500;
    let mut damping: f64 = 1.0;
    let mut trace: Vec<f64> = Vec::new();
    let mut best = f64::INFINITY;
    let mut since_best = 0usize;
    let mut converged = false;
    let eval_prod = |roots: &[f64], t: f64| -> f64 {
        roots.iter().fold(1.0f64, |acc, &z| acc * (t - z))
    };
    for _ in 0..max_iter {
        let mut disp = 0.0f64;
        let mut yq: Vec<Vec<f64>> = Vec::with_capacity(m);
        let mut yw: Vec<Vec<f64>> = Vec::with_capacity(m);
        for j in 1..=m {
            let nj = n.get(j);
            if nj == 0 {
                yq.push(Vec::new());
                yw.push(Vec::new());
                continue;
            }
            let iv = system.sigma(j).interval;
            let others: Vec<f64> = xq
                .iter()
                .enumerate()
                .filter(|&(l, _)| l + 1 != j)
                .flat_map(|(_, xs)| xs.iter().copied())
                .collect();

            // Q-step: Q_j orthogonal against |Qhat_j / W_j| dsigma_j
            let weights: Vec<f64> = quad_j[j - 1]
                .nodes
                .iter()
                .map(|&t| (eval_prod(&others, t) / eval_prod(&xw[j - 1], t)).abs())
                .collect();
            let zq = orthopoly::varying_orthogonal_zeros(&quad_j[j - 1], &weights, nj)?;
            if zq.len() != nj || zq.iter().any(|&zz| !iv.contains_interior(zz)) {
                return Err(Error::Structural(format!(
                    "orthogonality step produced {} admissible zeros in Delta_{j}, expected {nj}",
                    zq.iter().filter(|&&zz| iv.contains_interior(zz)).count()
                )));
            }
            for (a, b) in zq.iter().zip(&xq[j - 1]) {
                disp = disp.max((a - b).abs());
            }

            // W-step: W_j orthogonal on Delta_0 against K_j / |Q_j|
            let iq = &inner[j - 1];
            let kernel: Vec<(f64, f64)> = iq
                .nodes
                .iter()
                .zip(&iq.weights)
                .map(|(&x, &wt)| {
                    let qj = eval_prod(&zq, x);
                    let num = qj * qj * eval_prod(&others, x).abs()
                        / eval_prod(&xw[j - 1], x).abs();
                    (x, wt * num)
                })
                .collect();
            let weights0: Vec<f64> = quad_0
                .nodes
                .iter()
                .map(|&t| {
                    let k: f64 = kernel.iter().map(|&(x, v)| v / (t - x).abs()).sum();
                    k / eval_prod(&zq, t).abs()
                })
                .collect();
            let zw = orthopoly::varying_orthogonal_zeros(&quad_0, &weights0, total + nj)?;
            let iv0 = system.sigma0().interval;
            if zw.len() != total + nj || zw.iter().any(|&zz| !iv0.contains_interior(zz)) {
                return Err(Error::Structural(format!(
                    "sign-change step produced {} admissible zeros in Delta_0 for branch {j}, \
                     expected {}",
                    zw.iter().filter(|&&zz| iv0.contains_interior(zz)).count(),
                    total + nj
                )));
            }
            for (a, b) in zw.iter().zip(&xw[j - 1]) {
                disp = disp.max((a - b).abs());
            }
            yq.push(zq);
            yw.push(zw);
        }
        trace.push(disp);
        // oscillation guard: halve damping on three consecutive rises
        let t = trace.len();
        if t >= 4 && trace[t - 1] > trace[t - 2] && trace[t - 2] > trace[t - 3] && trace[t - 3] > trace[t - 4] {
            damping *= 0.5;
        }
        for (xs, ys) in xq.iter_mut().zip(&yq).chain(xw.iter_mut().zip(&yw)) {
            for (a, b) in xs.iter_mut().zip(ys) {
                *a += damping * (b - *a);
            }
            xs.sort_by(|p, q| p.partial_cmp(q).unwrap());
        }
        if disp < 0.5 * best {
            since_best = 0;
        } else {
            since_best += 1;
        }
        best = best.min(disp);
        if disp < tol || (since_best >= stall_window && best < stall_ceiling) {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NonConvergence {
            detail: format!(
                "linear Fourier-Pade orthogonality fixed point for n = {n} stalled at \
                 displacement {:.3e} after {max_iter} iterations",
                trace.last().copied().unwrap_or(f64::NAN)
            ),
            trace,
        });
    }

    let mut q_zeros: Vec<f64> = xq.iter().flatten().copied().collect();
    q_zeros.sort_by(|a, b| a.partial_cmp(b).unwrap());
    // the zeros come straight from the Jacobi-matrix eigenvalues, so
    // build Q from them instead of re-extracting roots from a
    // coefficient representation with a huge dynamic range
    let q = PolynomialRep::from_roots(hull, &q_zeros);
    verify_zero_localization(system, n, &q_zeros)?;
    finalize(system, n, q, q_zeros, &engine)
}

/// Numerators by the truncated Fourier expansion over `Delta_0` and
/// per-condition residuals: the low coefficients come from a direct
/// quadrature (an independent check on the swapped-order tail engine),
/// the tail rows from the engine so their tiny true magnitudes are not
/// drowned by quadrature cancellation noise.
fn finalize(
    system: &AngelescoSystem,
    n: &MultiIndex,
    q: PolynomialRep,
    q_zeros: Vec<f64>,
    engine: &TailEngine,
) -> Result<LinearFPApproximant> {
    let m = system.num_branches();
    let total = n.total();
    // evaluate Q in product form over its zeros: full relative
    // accuracy on Delta_0, unlike the hull-basis coefficients
    let qe = |x: f64| q_zeros.iter().fold(1.0f64, |acc, &z| acc * (x - z));
    // sigma_0 rule exact through degree (|n| - 1) + |n| for the
    // divided-difference part of the numerator coefficients
    let quad_a = gauss_quadrature(system.sigma0(), (2 * total + 16).max(48))?;
    let ortho_a: Vec<Vec<f64>> = quad_a
        .nodes
        .iter()
        .map(|&x| orthopoly::eval_orthonormal_all(&engine.table, total, x))
        .collect();
    let ell: Vec<PolynomialRep> = (0..total)
        .map(|i| orthopoly::orthonormal_poly(&engine.table, i))
        .collect();
    let mut p = Vec::with_capacity(m);
    for j in 1..=m {
        let mut pj = PolynomialRep::zero(system.sigma0().interval);
        for (i, li) in ell.iter().enumerate() {
            let ci = engine.coefficient_full(j, i, &qe, &quad_a, &ortho_a);
            pj = pj.add(&li.scale(ci));
        }
        p.push(pj);
    }
    let fourier_residuals: Vec<Vec<f64>> = (1..=m)
        .map(|j| {
            (total..total + n.get(j))
                .map(|k| engine.coefficient(j, k, &qe).abs())
                .collect()
        })
        .collect();

    Ok(LinearFPApproximant {
        n: n.clone(),
        q,
        p,
        fourier_residuals,
        q_zeros,
    })
}

/// Cancellation-free Fourier coefficients `c_k(Q sigma_hat_j)` for `k`
/// in a prescribed tail window.
///
/// The coefficients decay geometrically in `k`, so a quadrature over
/// `Delta_0` (absolute error ~1e-15 from cancellation in the Gauss sum)
/// Tail-coefficient engine.
///
/// Evaluating `c_k(f sigma_hat_j)` by quadrature over `Delta_0` loses
/// all relative accuracy once `k` is moderately large, because the
/// coefficient is geometrically small against the integrand. The
/// engine instead swaps the order of integration and uses the
/// second-kind functions of `sigma_0`,
///
///   `M_k(t) = int l_k(x) dsigma_0(x) / (t - x)`, `t` off `Delta_0`,
///
/// computed at the `sigma_j` Gauss nodes by the backward (minimal
/// solution) recurrence. For any polynomial `f` with `deg f < k` the
/// divided difference `(f(x) - f(t)) / (x - t)` has degree `< k` in
/// `x` and integrates to zero against `l_k dsigma_0`, which leaves
///
///   `c_k(f sigma_hat_j) = -int_{Delta_j} f(t) M_k(t) dsigma_j(t)`.
///
/// The geometric smallness of the coefficient now lives analytically
/// in `M_k`, so the evaluation keeps full relative accuracy; `f` is
/// supplied as an evaluator and should be computed in product form
/// over its zeros when those are known.
pub(crate) struct TailEngine {
    pub(crate) table: RecurrenceTable,
    deg: usize,
    k_lo: usize,
    pub(crate) k_hi: usize,
    /// per branch `j-1`: `sigma_j` Gauss rule and second-kind values
    branches: Vec<BranchTail>,
}

struct BranchTail {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    /// `qvals[node][r]`, `r = 0..=k_hi`
    qvals: Vec<Vec<f64>>,
    /// `lvals[node][i]`, `i = 0..=deg`
    lvals: Vec<Vec<f64>>,
}

impl TailEngine {
    /// `deg` bounds the degree of the polynomial factors, `k_lo..=k_hi`
    /// the coefficient window; `base_order` (0 = default) seeds the
    /// branch quadrature, doubled until a probe entry stabilizes.
    pub(crate) fn new(
        system: &AngelescoSystem,
        deg: usize,
        k_lo: usize,
        k_hi: usize,
        base_order: usize,
    ) -> Result<Self> {
        assert!(k_lo <= k_hi && k_lo >= deg, "coefficient window must sit in the tail");
        let m = system.num_branches();
        let table =
            orthopoly::recurrence_coefficients(system.sigma0(), k_hi + MILLER_BUFFER + 1)?;
        let norm0_sqrt = table.norm0.sqrt();
        let start = if base_order > 0 {
            base_order
        } else {
            (2 * (deg + k_hi) + 8).max(64)
        };
        let mut branches = Vec::with_capacity(m);
        for j in 1..=m {
            let mut order = start;
            let mut prev: Option<f64> = None;
            loop {
                let quad = gauss_quadrature(system.sigma(j), order)?;
                let hat0 = markov_at_points(system.sigma0(), &quad.nodes)?;
                let qvals: Vec<Vec<f64>> = quad
                    .nodes
                    .iter()
                    .zip(&hat0)
                    .map(|(&t, &h)| second_kind_all(&table, h / norm0_sqrt, t, k_hi))
                    .collect();
                let lvals: Vec<Vec<f64>> = quad
                    .nodes
                    .iter()
                    .map(|&t| orthopoly::eval_orthonormal_all(&table, deg, t))
                    .collect();
                let branch = BranchTail {
                    nodes: quad.nodes,
                    weights: quad.weights,
                    qvals,
                    lvals,
                };
                // probe the hardest entry (fastest-varying integrand)
                let probe = Self::raw_entry(&branch, k_hi, deg);
                let done = prev
                    .map(|p| (probe - p).abs() <= 1e-13 * probe.abs().max(1e-300))
                    .unwrap_or(false);
                if done || order >= 1024 {
                    branches.push(branch);
                    break;
                }
                prev = Some(probe);
                order *= 2;
            }
        }
        Ok(Self {
            table,
            deg,
            k_lo,
            k_hi,
            branches,
        })
    }

    fn raw_entry(branch: &BranchTail, k: usize, i: usize) -> f64 {
        -branch
            .weights
            .iter()
            .zip(branch.qvals.iter().zip(&branch.lvals))
            .map(|(&w, (qv, lv))| w * lv[i] * qv[k])
            .sum::<f64>()
    }

    /// `c_k(l_i sigma_hat_j)`; requires `i <= k` so the divided
    /// difference (degree `i - 1 < k`) vanishes under the
    /// orthogonality.
    pub(crate) fn entry(&self, j: usize, k: usize, i: usize) -> f64 {
        assert!(k >= self.k_lo && k <= self.k_hi && i <= self.deg && i <= k);
        Self::raw_entry(&self.branches[j - 1], k, i)
    }

    /// `c_k(f sigma_hat_j)` for a polynomial evaluator `f` of degree
    /// `<= deg` (hence `< k_lo <= k`).
    pub(crate) fn coefficient<F: Fn(f64) -> f64>(&self, j: usize, k: usize, f: F) -> f64 {
        assert!(k >= self.k_lo && k <= self.k_hi);
        let branch = &self.branches[j - 1];
        -branch
            .weights
            .iter()
            .zip(branch.nodes.iter().zip(&branch.qvals))
            .map(|(&w, (&t, qv))| w * f(t) * qv[k])
            .sum::<f64>()
    }

    /// `c_k(f sigma_hat_j)` for any `k <= k_hi`, including `k` below
    /// the degree of `f`. Splitting off the divided difference,
    ///
    ///   `c_k(f sigma_hat_j) = int dsigma_j(t) int l_k(x)
    ///        (f(x) - f(t)) / (x - t) dsigma_0(x)
    ///        - int f(t) M_k(t) dsigma_j(t)`,
    ///
    /// both parts are quadratures of smooth integrands with no
    /// reference to `sigma_hat_j` on `Delta_0`, so the result keeps
    /// absolute accuracy ~eps * max |f| even where the direct
    /// projection is swamped by cancellation. `outer` must integrate
    /// polynomials of degree `deg f + k` exactly and `ortho[t][k]`
    /// holds the orthonormal family at its nodes.
    pub(crate) fn coefficient_full<F: Fn(f64) -> f64>(
        &self,
        j: usize,
        k: usize,
        f: F,
        outer: &Quadrature,
        ortho: &[Vec<f64>],
    ) -> f64 {
        assert!(k <= self.k_hi);
        let branch = &self.branches[j - 1];
        let fx: Vec<f64> = outer.nodes.iter().map(|&x| f(x)).collect();
        let mut val = 0.0f64;
        for ((&w, &t), qv) in branch
            .weights
            .iter()
            .zip(&branch.nodes)
            .zip(&branch.qvals)
        {
            let ft = f(t);
            let inner: f64 = outer
                .nodes
                .iter()
                .enumerate()
                .map(|(s, &x)| outer.weights[s] * ortho[s][k] * (fx[s] - ft) / (x - t))
                .sum();
            val += w * (inner - ft * qv[k]);
        }
        val
    }
}

/// Extra backward-recurrence steps before the highest index actually
/// used; the contamination from the dominant solution shrinks by the
/// square of the exterior conformal radius per step.
const MILLER_BUFFER: usize = 30;

/// Second-kind functions `q_r(t) = int l_r(x) dsigma_0(x) / (t - x)`,
/// `r = 0..=r_max`, at a point `t` off the support of `sigma_0`.
///
/// The `q_r` are the minimal solution of the three-term recurrence of
/// the orthonormal family, so the forward sweep loses all relative
/// accuracy to the dominant (polynomial) solution; Miller's backward
/// sweep keeps it.  `q0` is the already-known value of `q_0(t)`.
pub(crate) fn second_kind_all(
    table: &RecurrenceTable,
    q0: f64,
    t: f64,
    r_max: usize,
) -> Vec<f64> {
    let start = r_max + MILLER_BUFFER;
    assert!(
        start < table.b.len() && start < table.a.len(),
        "recurrence table too shallow for backward sweep to {start}"
    );
    let mut v = vec![0.0f64; start + 2];
    v[start] = 1.0;
    for r in (1..=start).rev() {
        let next = ((t - table.a[r]) * v[r] - table.b[r] * v[r + 1]) / table.b[r - 1];
        v[r - 1] = next;
        if next.abs() > 1e250 {
            for w in v[r - 1..].iter_mut() {
                *w *= 1e-250;
            }
        }
    }
    let scale = q0 / v[0];
    v.truncate(r_max + 1);
    for w in v.iter_mut() {
        *w *= scale;
    }
    v
}

/// `T_0(t), ..., T_deg(t)`.
pub(crate) fn chebyshev_values(t: f64, deg: usize) -> Vec<f64> {
    let mut v = Vec::with_capacity(deg + 1);
    v.push(1.0);
    if deg >= 1 {
        v.push(t);
    }
    for k in 2..=deg {
        let next = 2.0 * t * v[k - 1] - v[k - 2];
        v.push(next);
    }
    v
}

/// [`null_vector_raw`] interpreted as Chebyshev coefficients on the
/// given basis interval and rescaled monic.
pub(crate) fn null_vector_monic(
    mat: &nalgebra::DMatrix<f64>,
    basis: crate::measures::Interval,
) -> Result<PolynomialRep> {
    let coeffs = null_vector_raw(mat)?;
    Ok(PolynomialRep::new(basis, coeffs).into_monic())
}

/// Smallest right singular vector of the homogeneous system, with a
/// degeneracy witness on the second-smallest singular value.
pub(crate) fn null_vector_raw(mat: &nalgebra::DMatrix<f64>) -> Result<Vec<f64>> {
    // equilibrate rows, then columns, to unit norm (scaling equations
    // and unknowns leaves the null space unchanged while taming the
    // geometric scale spread of the moment entries), then pad with zero
    // rows to square so the SVD returns a full V^T whose rows include
    // the null-space direction
    let mut scaled = mat.clone();
    for r in 0..scaled.nrows() {
        let s = scaled.row(r).norm().max(1e-300);
        for c in 0..scaled.ncols() {
            scaled[(r, c)] /= s;
        }
    }
    let col_scales: Vec<f64> = (0..scaled.ncols())
        .map(|c| scaled.column(c).norm().max(1e-300))
        .collect();
    let mut padded = nalgebra::DMatrix::<f64>::zeros(scaled.ncols(), scaled.ncols());
    padded.rows_mut(0, scaled.nrows()).copy_from(&scaled);
    for (c, &s) in col_scales.iter().enumerate() {
        for r in 0..padded.nrows() {
            padded[(r, c)] /= s;
        }
    }
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.as_ref().expect("requested V^T");
    let mut sv: Vec<(f64, usize)> = svd
        .singular_values
        .iter()
        .enumerate()
        .map(|(i, &s)| (s, i))
        .collect();
    sv.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let smax = sv.last().unwrap().0.max(1e-300);
    // the padded system always carries one structural zero; the second
    // smallest singular value measures how well the null direction is
    // separated, and must clear the ~1e-12 relative noise of the entries
    if sv.len() >= 2 && sv[1].0 <= 1e-11 * smax {
        return Err(Error::Degenerate(format!(
            "two smallest singular values {:.3e}, {:.3e} both negligible against {:.3e}; \
             quadrature is likely broken",
            sv[0].0, sv[1].0, smax
        )));
    }
    let row = sv[0].1;
    Ok((0..v_t.ncols())
        .map(|c| v_t[(row, c)] / col_scales[c])
        .collect())
}

pub(crate) fn verify_zero_localization(
    system: &AngelescoSystem,
    n: &MultiIndex,
    zeros: &[f64],
) -> Result<()> {
    let m = system.num_branches();
    let mut assigned = 0;
    for j in 1..=m {
        let iv = system.sigma(j).interval;
        let count = zeros.iter().filter(|&&z| iv.contains_interior(z)).count();
        if count != n.get(j) {
            return Err(Error::Structural(format!(
                "found {count} denominator zeros in Delta_{j} = [{}, {}], expected {}",
                iv.lo(),
                iv.hi(),
                n.get(j)
            )));
        }
        assigned += count;
    }
    if assigned != zeros.len() {
        return Err(Error::Structural(format!(
            "{} of {} denominator zeros fall outside every branch interval",
            zeros.len() - assigned,
            zeros.len()
        )));
    }
    // simplicity: strictly increasing with a resolvable separation
    for w in zeros.windows(2) {
        if w[1] - w[0] <= 1e-10 {
            return Err(Error::Structural(format!(
                "denominator zeros {} and {} are not numerically simple",
                w[0], w[1]
            )));
        }
    }
    Ok(())
}

/// Remainder `sigma_hat_j(z) - P_j(z) / Q(z)` at a complex point.
pub fn remainder(
    approx: &LinearFPApproximant,
    system: &AngelescoSystem,
    j: usize,
    z: Complex64,
) -> Result<Complex64> {
    let qz = approx.q.eval_complex(z);
    let scale: f64 = approx.q.coeffs().iter().map(|c| c.abs()).sum();
    if qz.norm() <= 1e-13 * scale {
        return Err(Error::Pole(format!("z = {z} is numerically a zero of Q")));
    }
    let sigma = markov_transform_c(system.sigma(j), z)?;
    Ok(sigma - approx.p[j - 1].eval_complex(z) / qz)
}

/// Monic polynomial of the sign changes of `Q sigma_hat_j - P_j` on
/// `Delta_0`; its degree must be exactly `|n| + n_j`.
///
/// The remainder is evaluated through its Fourier tail series
/// `sum_{k >= |n|} c_k(Q sigma_hat_j) l_k`: on `Delta_0` its magnitude
/// is geometrically below `Q sigma_hat_j`, so forming the difference
/// directly would cancel catastrophically at large `|n|`.
pub fn sign_change_polynomial(
    approx: &LinearFPApproximant,
    system: &AngelescoSystem,
    j: usize,
) -> Result<PolynomialRep> {
    let total = approx.n.total();
    let expected = total + approx.n.get(j);
    let iv = system.sigma0().interval;
    let engine = TailEngine::new(system, total, total, expected + TAIL_EXTRA, 0)?;
    let qe = |x: f64| approx.q_zeros.iter().fold(1.0f64, |acc, &z| acc * (x - z));
    let coeffs: Vec<f64> = (total..=engine.k_hi)
        .map(|k| engine.coefficient(j, k, &qe))
        .collect();
    let peak = coeffs.iter().fold(0.0f64, |a, &c| a.max(c.abs()));
    let last = coeffs.last().map(|c| c.abs()).unwrap_or(0.0);
    if peak > 0.0 && last > 1e-8 * peak {
        return Err(Error::Structural(format!(
            "remainder series for branch {j} has not decayed at truncation \
             (last/peak = {:.3e}); geometry too tight for the carried tail",
            last / peak
        )));
    }
    let roots = tail_series_roots(&engine.table, total, &coeffs, iv, expected);
    if roots.len() != expected {
        return Err(Error::Structural(format!(
            "detected {} sign changes of the remainder on Delta_0, expected {expected}",
            roots.len()
        )));
    }
    Ok(PolynomialRep::from_roots(iv, &roots))
}

/// Sign changes on `iv` of `sum_k coeffs[k - k_lo] l_k`, located by
/// dense Chebyshev sampling and bisection.
fn tail_series_roots(
    table: &RecurrenceTable,
    k_lo: usize,
    coeffs: &[f64],
    iv: crate::measures::Interval,
    density_deg: usize,
) -> Vec<f64> {
    let k_hi = k_lo + coeffs.len() - 1;
    let r_at = |x: f64| -> f64 {
        let l = orthopoly::eval_orthonormal_all(table, k_hi, x);
        coeffs
            .iter()
            .enumerate()
            .map(|(off, &c)| c * l[k_lo + off])
            .sum()
    };
    let samples = iv.chebyshev_points(64 * density_deg.max(1));
    let values: Vec<f64> = samples.iter().map(|&x| r_at(x)).collect();
    let mut roots = Vec::new();
    for i in 1..samples.len() {
        if values[i - 1] == 0.0 {
            roots.push(samples[i - 1]);
            continue;
        }
        if values[i - 1] * values[i] < 0.0 {
            let (mut a, mut b) = (samples[i - 1], samples[i]);
            let mut fa = values[i - 1];
            while b - a > 1e-13 {
                let mid = 0.5 * (a + b);
                let fm = r_at(mid);
                if fm == 0.0 {
                    a = mid;
                    b = mid;
                    break;
                }
                if fa * fm < 0.0 {
                    b = mid;
                } else {
                    a = mid;
                    fa = fm;
                }
            }
            roots.push(0.5 * (a + b));
        }
    }
    roots
}

/// A Gauss rule for `sigma_j` dense enough to evaluate `sigma_hat_j`
/// to ~1e-13 everywhere on `Delta_0` (checked at the nearest endpoint).
pub(crate) fn converged_markov_rule(system: &AngelescoSystem, j: usize) -> Result<Quadrature> {
    let spec = system.sigma(j);
    let iv0 = system.sigma0().interval;
    let worst = if spec.interval.distance(iv0.lo()) < spec.interval.distance(iv0.hi()) {
        iv0.lo()
    } else {
        iv0.hi()
    };
    let mut order = 32usize;
    let mut prev: Option<f64> = None;
    loop {
        let quad = gauss_quadrature(spec, order)?;
        let val: f64 = quad
            .nodes
            .iter()
            .zip(&quad.weights)
            .map(|(&x, &w)| w / (worst - x))
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{markov_transform, MeasureSpec};
    use approx::assert_abs_diff_eq;

    pub(crate) fn reference_system() -> AngelescoSystem {
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

    #[test]
    fn trivial_multi_index() {
        let sys = single_branch_system();
        let approx = solve_linear_fp(&sys, &MultiIndex::new(vec![0])).unwrap();
        assert_eq!(approx.q.degree(), 0);
        assert_abs_diff_eq!(approx.q.eval(0.3), 1.0, epsilon = 1e-15);
        assert!(approx.p[0].is_zero());
        // remainder equals sigma_hat exactly
        let z = Complex64::new(5.0, 0.0);
        let r = remainder(&approx, &sys, 1, z).unwrap();
        let direct = markov_transform(sys.sigma(1), 5.0).unwrap();
        assert_abs_diff_eq!(r.re, direct, epsilon = 1e-13);
    }

    #[test]
    fn fourier_coefficient_against_oracle() {
        // c_0(sigma_hat_1) with sigma_1 Lebesgue on [2,3], sigma_0 the
        // Chebyshev weight: (1/sqrt(pi)) int ln((x-2)/(x-3)) dsigma_0(x),
        // oracle by periodic trapezoid in theta.
        let sys = single_branch_system();
        let one = PolynomialRep::constant(sys.hull(), 1.0);
        let c0 = fourier_coefficient(&sys, &one, 1, 0).unwrap();
        let n = 400_000usize;
        let h = std::f64::consts::PI / n as f64;
        let integrand = |x: f64| ((2.0 - x) / (3.0 - x)).ln();
        let mut acc = 0.5 * (integrand(1.0) + integrand(-1.0));
        for i in 1..n {
            acc += integrand((i as f64 * h).cos());
        }
        let oracle = acc * h / std::f64::consts::PI.sqrt();
        assert_abs_diff_eq!(c0, oracle, epsilon = 1e-11);
    }

    #[test]
    fn fourier_coefficient_mirror_parity() {
        // mirror branches: c_k(sigma_hat_1) = (-1)^{k+1} c_k(sigma_hat_2)
        let sys = reference_system();
        let one = PolynomialRep::constant(sys.hull(), 1.0);
        for k in 0..5 {
            let c1 = fourier_coefficient(&sys, &one, 1, k).unwrap();
            let c2 = fourier_coefficient(&sys, &one, 2, k).unwrap();
            let sign = if k % 2 == 0 { -1.0 } else { 1.0 };
            assert_abs_diff_eq!(c1, sign * c2, epsilon = 1e-11 * c1.abs().max(1.0));
        }
    }

    #[test]
    fn reference_one_one_structure_and_symmetry() {
        let sys = reference_system();
        let approx = solve_linear_fp(&sys, &MultiIndex::new(vec![1, 1])).unwrap();
        assert_eq!(approx.q.degree(), 2);
        assert_eq!(approx.denominator_zeros_in(&sys, 1).len(), 1);
        assert_eq!(approx.denominator_zeros_in(&sys, 2).len(), 1);
        // even symmetry of Q under x -> -x
        for &x in &[0.1f64, 0.7, 1.9, 2.6] {
            assert_abs_diff_eq!(approx.q.eval(-x), approx.q.eval(x), epsilon = 1e-9);
        }
    }

    #[test]
    fn determinism_across_quadrature_orders() {
        let sys = reference_system();
        let n = MultiIndex::new(vec![2, 1]);
        let a = solve_linear_fp_with_order(&sys, &n, 96).unwrap();
        let b = solve_linear_fp_with_order(&sys, &n, 160).unwrap();
        for (ca, cb) in a.q.coeffs().iter().zip(b.q.coeffs()) {
            assert_abs_diff_eq!(ca, cb, epsilon = 1e-8);
        }
    }

    #[test]
    fn fourier_residuals_small() {
        let sys = reference_system();
        for n in [vec![1, 1], vec![2, 1], vec![2, 2]] {
            let approx = solve_linear_fp(&sys, &MultiIndex::new(n)).unwrap();
            assert!(
                approx.max_fourier_residual() < 1e-9,
                "residual {} too large",
                approx.max_fourier_residual()
            );
        }
    }

    #[test]
    fn remainder_decreases_along_diagonal() {
        let sys = reference_system();
        let z = Complex64::new(5.0, 0.0);
        let mut prev = f64::INFINITY;
        for k in 1..=6usize {
            let approx = solve_linear_fp(&sys, &MultiIndex::new(vec![k, k])).unwrap();
            let r = remainder(&approx, &sys, 2, z).unwrap().norm();
            assert!(r < prev, "no decrease at k = {k}: {r} vs {prev}");
            prev = r;
        }
    }

    #[test]
    fn sign_change_counts() {
        let sys1 = single_branch_system();
        let a = solve_linear_fp(&sys1, &MultiIndex::new(vec![1])).unwrap();
        let w = sign_change_polynomial(&a, &sys1, 1).unwrap();
        assert_eq!(w.degree(), 2);

        let sys = reference_system();
        let a = solve_linear_fp(&sys, &MultiIndex::new(vec![2, 1])).unwrap();
        assert_eq!(sign_change_polynomial(&a, &sys, 1).unwrap().degree(), 5);
        assert_eq!(sign_change_polynomial(&a, &sys, 2).unwrap().degree(), 4);
    }

    #[test]
    fn sign_changes_mirror_symmetric() {
        let sys = reference_system();
        let a = solve_linear_fp(&sys, &MultiIndex::new(vec![1, 1])).unwrap();
        let w1 = sign_change_polynomial(&a, &sys, 1).unwrap().zeros().unwrap();
        let w2 = sign_change_polynomial(&a, &sys, 2).unwrap().zeros().unwrap();
        for (z1, z2) in w1.iter().zip(w2.iter().rev()) {
            assert_abs_diff_eq!(*z1, -*z2, epsilon = 1e-9);
        }
    }

    #[test]
    fn orthogonality_transfer() {
        // int x^k Q / W_j dsigma_j = 0 for k < n_j
        let sys = reference_system();
        let n = MultiIndex::new(vec![2, 2]);
        let a = solve_linear_fp(&sys, &n).unwrap();
        for j in 1..=2usize {
            let w = sign_change_polynomial(&a, &sys, j).unwrap();
            let quad = gauss_quadrature(sys.sigma(j), 200).unwrap();
            let norm = quad.integrate(|x| (a.q.eval(x) / w.eval(x)).abs());
            for k in 0..n.get(j) {
                let val = quad.integrate(|x| x.powi(k as i32) * a.q.eval(x) / w.eval(x));
                assert!(
                    val.abs() < 1e-9 * norm.max(1.0),
                    "transfer residual {val} at j={j}, k={k}"
                );
            }
        }
    }

    #[test]
    fn iterative_path_matches_direct() {
        // the orthogonality fixed point must reproduce the moment-matrix
        // solution where both are applicable
        let sys = reference_system();
        for n in [vec![3, 2], vec![4, 0]] {
            let n = MultiIndex::new(n);
            let a = solve_direct(&sys, &n, 0).unwrap();
            let b = solve_iterative(&sys, &n, 0).unwrap();
            assert_eq!(a.q_zeros.len(), b.q_zeros.len());
            for (za, zb) in a.q_zeros.iter().zip(&b.q_zeros) {
                // the fixed point carries a ~1e-8 roundoff noise floor
                assert_abs_diff_eq!(za, zb, epsilon = 2e-6);
            }
        }
    }

    #[test]
    fn ceiling_enforced() {
        let sys = single_branch_system();
        let err = solve_linear_fp(&sys, &MultiIndex::new(vec![51])).unwrap_err();
        assert!(matches!(err, Error::Ceiling(_)));
    }
}
