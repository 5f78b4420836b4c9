//! Vector logarithmic-potential equilibrium problems.
//!
//! The interaction matrices couple `2m` measure components: the first
//! `m` live on the branch intervals, the last `m` on `Delta_0`. The
//! equilibrium vector measure minimizes the discrete logarithmic
//! energy over a product of probability simplices; the combined
//! potentials are constant on each component's support (Frostman
//! conditions), and the constants feed the nth-root rate functions.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::measures::Interval;

/// Limit direction `p = (p_1, ..., p_m)` of a multi-index sequence,
/// `p_j = lim n_j / |n|`.
#[derive(Debug, Clone, PartialEq)]
pub struct RayVector(Vec<f64>);

impl RayVector {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::Invalid("ray vector must be non-empty".into()));
        }
        for &v in &p {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::Invalid(format!("ray entry {v} outside (0, 1]")));
            }
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > 1e-10 {
            return Err(Error::Invalid(format!("ray entries sum to {sum}, expected 1")));
        }
        Ok(Self(p))
    }

    pub fn entries(&self) -> &[f64] {
        &self.0
    }

    /// `p_j`, 1-based.
    pub fn get(&self, j: usize) -> f64 {
        self.0[j - 1]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixKind {
    C1,
    C2,
}

/// Symmetric coupling matrix of a vector equilibrium problem.
#[derive(Debug, Clone)]
pub struct InteractionMatrix {
    pub kind: MatrixKind,
    pub entries: DMatrix<f64>,
}

impl InteractionMatrix {
    pub fn from_entries(kind: MatrixKind, entries: DMatrix<f64>) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::Invalid("interaction matrix must be square".into()));
        }
        let sym = (&entries - entries.transpose()).amax();
        if sym > 1e-12 * entries.amax().max(1.0) {
            return Err(Error::Invalid("interaction matrix must be symmetric".into()));
        }
        Ok(Self { kind, entries })
    }

    pub fn size(&self) -> usize {
        self.entries.nrows()
    }
}

fn coupling_blocks(p: &RayVector) -> DMatrix<f64> {
    let m = p.len();
    let mut c = DMatrix::<f64>::zeros(2 * m, 2 * m);
    for j in 0..m {
        let pj = p.0[j];
        for k in 0..m {
            c[(j, k)] = if j == k { 2.0 * pj * pj } else { pj * p.0[k] };
        }
        c[(j, m + j)] = -pj * (1.0 + pj);
        c[(m + j, j)] = -pj * (1.0 + pj);
    }
    c
}

/// Coupling matrix of the linear-approximant equilibrium problem.
pub fn interaction_matrix_linear(p: &RayVector) -> InteractionMatrix {
    let m = p.len();
    let mut c = coupling_blocks(p);
    for j in 0..m {
        let f = 1.0 + p.0[j];
        c[(m + j, m + j)] = 2.0 * f * f;
    }
    InteractionMatrix {
        kind: MatrixKind::C1,
        entries: c,
    }
}

/// Coupling matrix of the non-linear-approximant equilibrium problem;
/// the lower-right block carries negative couplings between the
/// `Delta_0` components.
pub fn interaction_matrix_nonlinear(p: &RayVector) -> InteractionMatrix {
    let m = p.len();
    let mf = m as f64;
    let mut c = coupling_blocks(p);
    for j in 0..m {
        for k in 0..m {
            let fj = 1.0 + p.0[j];
            let fk = 1.0 + p.0[k];
            c[(m + j, m + k)] = if j == k {
                2.0 * mf * fj * fj / (mf + 1.0)
            } else {
                -2.0 * fj * fk / (mf + 1.0)
            };
        }
    }
    InteractionMatrix {
        kind: MatrixKind::C2,
        entries: c,
    }
}

/// All `2m` leading principal minors, numerically and via the closed
/// forms `(p_1...p_j)^2 (j+1)` for `j <= m`,
/// `[p_1...p_m (1+p_1)...(1+p_{j-m})]^2 (j+1)` for the linear matrix,
/// and `[...]^2 (2m+1-j)` for the non-linear one.
pub fn principal_minor_check(
    c: &InteractionMatrix,
    p: &RayVector,
) -> Result<Vec<(f64, f64)>> {
    let m = p.len();
    if c.size() != 2 * m {
        return Err(Error::Invalid(format!(
            "matrix of size {} does not match ray of length {m}",
            c.size()
        )));
    }
    let mut pairs = Vec::with_capacity(2 * m);
    for j in 1..=2 * m {
        let sub = c.entries.view((0, 0), (j, j)).clone_owned();
        let computed = sub.lu().determinant();
        let closed = if j <= m {
            let prod: f64 = p.0[..j].iter().product();
            prod * prod * (j as f64 + 1.0)
        } else {
            let prod: f64 = p.0.iter().product::<f64>()
                * p.0[..j - m].iter().map(|&v| 1.0 + v).product::<f64>();
            let factor = match c.kind {
                MatrixKind::C1 => j as f64 + 1.0,
                MatrixKind::C2 => (2 * m + 1 - j) as f64,
            };
            prod * prod * factor
        };
        if (computed - closed).abs() > 1e-9 * closed.abs().max(1.0) {
            return Err(Error::Structural(format!(
                "principal minor {j} is {computed:.12e}, closed form gives {closed:.12e}"
            )));
        }
        pairs.push((computed, closed));
    }
    Ok(pairs)
}

/// A nonnegative measure on a discrete grid.
#[derive(Debug, Clone, Serialize)]
pub struct DiscreteMeasure {
    pub grid: Vec<f64>,
    pub masses: Vec<f64>,
    pub total: f64,
}

impl DiscreteMeasure {
    pub fn new(grid: Vec<f64>, masses: Vec<f64>, total: f64) -> Result<Self> {
        if grid.len() != masses.len() {
            return Err(Error::Invalid("grid and masses lengths differ".into()));
        }
        if grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Invalid("grid must be strictly increasing".into()));
        }
        if masses.iter().any(|&v| v < -1e-14) {
            return Err(Error::Invalid("masses must be nonnegative".into()));
        }
        let sum: f64 = masses.iter().sum();
        if (sum - total).abs() > 1e-12 * total.max(1.0) {
            return Err(Error::Invalid(format!(
                "masses sum to {sum}, declared total {total}"
            )));
        }
        Ok(Self {
            grid,
            masses,
            total,
        })
    }

    /// Cumulative mass up to `x` (inclusive).
    pub fn cdf(&self, x: f64) -> f64 {
        self.grid
            .iter()
            .zip(&self.masses)
            .filter(|(&g, _)| g <= x)
            .map(|(_, &w)| w)
            .sum()
    }

    /// Indices carrying more than the numerical-support threshold
    /// `(total / len) * 1e-3`.
    pub fn support_indices(&self) -> Vec<usize> {
        let thr = self.total / self.grid.len() as f64 * 1e-3;
        (0..self.grid.len())
            .filter(|&i| self.masses[i] > thr)
            .collect()
    }
}

/// Solved vector equilibrium problem.
#[derive(Debug, Clone)]
pub struct EquilibriumSolution {
    pub components: Vec<DiscreteMeasure>,
    /// Equilibrium constants `omega_j`, the minimum of `W_j` on the grid.
    pub constants: Vec<f64>,
    pub kkt_violation: f64,
    pub energy: f64,
    pub iterations: usize,
}

/// Half the local grid spacing, the desingularization radius of the
/// logarithmic kernel.
fn local_deltas(grid: &[f64]) -> Vec<f64> {
    let n = grid.len();
    (0..n)
        .map(|i| {
            let left = if i > 0 { grid[i] - grid[i - 1] } else { f64::INFINITY };
            let right = if i + 1 < n { grid[i + 1] - grid[i] } else { f64::INFINITY };
            0.5 * left.min(right)
        })
        .collect()
}

fn log_kernel(dist: f64, delta: f64) -> f64 {
    -dist.max(delta).ln()
}

/// Euclidean projection of `v` onto the simplex of total mass `s`.
fn project_simplex(v: &mut [f64], s: f64) {
    let mut u: Vec<f64> = v.to_vec();
    u.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (i, &ui) in u.iter().enumerate() {
        cum += ui;
        let t = (cum - s) / (i as f64 + 1.0);
        if ui - t > 0.0 {
            theta = t;
        }
    }
    for x in v.iter_mut() {
        *x = (*x - theta).max(0.0);
    }
}

/// Minimize the discrete energy `x^T A x` over the product of unit
/// simplices by projected gradient with Barzilai-Borwein steps and a
/// proximal backtracking line search.
pub fn solve_equilibrium(
    c: &InteractionMatrix,
    intervals: &[Interval],
    grid_size: usize,
    tol: f64,
) -> Result<EquilibriumSolution> {
    let ncomp = c.size();
    if intervals.len() != ncomp {
        return Err(Error::Invalid(format!(
            "{} intervals for a {ncomp}-component matrix",
            intervals.len()
        )));
    }
    if grid_size < 8 {
        return Err(Error::Invalid("grid size must be at least 8".into()));
    }

    let grids: Vec<Vec<f64>> = intervals
        .iter()
        .map(|iv| iv.chebyshev_points(grid_size))
        .collect();
    let deltas: Vec<Vec<f64>> = grids.iter().map(|g| local_deltas(g)).collect();

    // full coupled kernel: A[(a,i),(b,l)] = c_ab * k(|x_i^a - x_l^b|)
    let n_tot = ncomp * grid_size;
    let mut a = DMatrix::<f64>::zeros(n_tot, n_tot);
    for ca in 0..ncomp {
        for cb in ca..ncomp {
            let coup = c.entries[(ca, cb)];
            for i in 0..grid_size {
                for l in 0..grid_size {
                    let d = (grids[ca][i] - grids[cb][l]).abs();
                    let delta = 0.5 * (deltas[ca][i] + deltas[cb][l]);
                    let val = coup * log_kernel(d, delta);
                    a[(ca * grid_size + i, cb * grid_size + l)] = val;
                    a[(cb * grid_size + l, ca * grid_size + i)] = val;
                }
            }
        }
    }

    let mut x = nalgebra::DVector::<f64>::from_element(n_tot, 1.0 / grid_size as f64);
    let mut ax = &a * &x;
    let mut energy = x.dot(&ax);
    let mut grad = 2.0 * &ax;
    let mut step = 1.0 / (2.0 * a.amax() * grid_size as f64).max(1.0);
    let mut prev_x: Option<nalgebra::DVector<f64>> = None;
    let mut prev_grad: Option<nalgebra::DVector<f64>> = None;
    let max_iter = 20_000usize;
    let support_thr = 1e-3 / grid_size as f64;

    let kkt_of = |w: &nalgebra::DVector<f64>, x: &nalgebra::DVector<f64>| -> (Vec<f64>, f64) {
        let mut omegas = Vec::with_capacity(ncomp);
        let mut viol = 0.0f64;
        for comp in 0..ncomp {
            let slice = comp * grid_size..(comp + 1) * grid_size;
            let omega = w
                .as_slice()[slice.clone()]
                .iter()
                .fold(f64::INFINITY, |m, &v| m.min(v));
            for i in slice.clone() {
                if x[i] > support_thr {
                    viol = viol.max((w[i] - omega).abs());
                }
            }
            omegas.push(omega);
        }
        (omegas, viol)
    };

    let mut iterations = 0;
    let mut last_kkt = f64::INFINITY;
    for it in 0..max_iter {
        iterations = it + 1;
        // BB step from the previous displacement
        if let (Some(px), Some(pg)) = (&prev_x, &prev_grad) {
            let s = &x - px;
            let y = &grad - pg;
            let sy = s.dot(&y);
            if sy > 1e-300 {
                step = (s.dot(&s) / sy).clamp(1e-12, 1e4);
            }
        }
        // proximal backtracking on the projection arc
        let mut t = step;
        let (xnew, axnew, enew) = loop {
            let mut cand = &x - t * &grad;
            for comp in 0..ncomp {
                project_simplex(
                    &mut cand.as_mut_slice()[comp * grid_size..(comp + 1) * grid_size],
                    1.0,
                );
            }
            let axc = &a * &cand;
            let ec = cand.dot(&axc);
            let d = &cand - &x;
            let model = energy + grad.dot(&d) + d.dot(&d) / (2.0 * t);
            if ec <= model + 1e-15 * energy.abs() || t < 1e-14 {
                break (cand, axc, ec);
            }
            t *= 0.5;
        };
        prev_x = Some(x.clone());
        prev_grad = Some(grad.clone());
        let moved = (&xnew - &x).amax();
        x = xnew;
        ax = axnew;
        energy = enew;
        grad = 2.0 * &ax;

        if it % 10 == 9 || moved < 1e-15 {
            let (_, viol) = kkt_of(&ax, &x);
            last_kkt = viol;
            if viol < tol {
                break;
            }
            if moved < 1e-15 {
                break;
            }
        }
    }

    let (omegas, viol) = kkt_of(&ax, &x);
    if viol > tol {
        return Err(Error::NonConvergence {
            detail: format!(
                "KKT violation {viol:.3e} above tolerance {tol:.3e} after {iterations} iterations \
                 (last checkpoint {last_kkt:.3e})"
            ),
            trace: omegas,
        });
    }

    let components = (0..ncomp)
        .map(|comp| {
            let masses: Vec<f64> =
                x.as_slice()[comp * grid_size..(comp + 1) * grid_size].to_vec();
            let sum: f64 = masses.iter().sum();
            DiscreteMeasure {
                grid: grids[comp].clone(),
                masses,
                total: sum,
            }
        })
        .collect();

    Ok(EquilibriumSolution {
        components,
        constants: omegas,
        kkt_violation: viol,
        energy,
        iterations,
    })
}

/// Logarithmic potential `V^mu(z) = sum_i m_i log(1 / max(|z - x_i|, delta_i))`.
fn potential(measure: &DiscreteMeasure, z: Complex64) -> f64 {
    let deltas = local_deltas(&measure.grid);
    measure
        .grid
        .iter()
        .zip(&measure.masses)
        .zip(&deltas)
        .map(|((&x, &m), &d)| m * log_kernel((z - x).norm(), d))
        .sum()
}

/// Combined potential `W_j(z) = sum_k c_{j,k} V^{mu_k}(z)` (j 1-based).
pub fn combined_potential(
    sol: &EquilibriumSolution,
    c: &InteractionMatrix,
    j: usize,
    z: Complex64,
) -> f64 {
    assert!(j >= 1 && j <= sol.components.len(), "component index {j} out of range");
    sol.components
        .iter()
        .enumerate()
        .map(|(k, mu)| c.entries[(j - 1, k)] * potential(mu, z))
        .sum()
}

/// Rate function `exp((W_j(z) - omega_j) / p_j)`: this is `G_j` for the
/// linear matrix and `H_j` for the non-linear one.
pub fn rate_function(
    sol: &EquilibriumSolution,
    c: &InteractionMatrix,
    p: &RayVector,
    j: usize,
    z: Complex64,
) -> f64 {
    assert!(j >= 1 && j <= p.len(), "branch index {j} out of range");
    let w = combined_potential(sol, c, j, z);
    ((w - sol.constants[j - 1]) / p.get(j)).exp()
}

/// Sidecar metadata accompanying a CSV export.
#[derive(Debug, Serialize)]
pub struct SolutionSidecar {
    pub constants: Vec<f64>,
    pub kkt_violation: f64,
    pub energy: f64,
    pub iterations: usize,
}

impl EquilibriumSolution {
    /// CSV rows `component,grid_point,mass` (1-based component index).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("component,grid_point,mass\n");
        for (comp, mu) in self.components.iter().enumerate() {
            for (&x, &m) in mu.grid.iter().zip(&mu.masses) {
                out.push_str(&format!("{},{:.16e},{:.16e}\n", comp + 1, x, m));
            }
        }
        out
    }

    pub fn sidecar(&self) -> SolutionSidecar {
        SolutionSidecar {
            constants: self.constants.clone(),
            kkt_violation: self.kkt_violation,
            energy: self.energy,
            iterations: self.iterations,
        }
    }
}
