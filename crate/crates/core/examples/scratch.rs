use angelesco::linear_fp::{solve_linear_fp, solve_linear_fp_paths, MultiIndex};
use angelesco::{AngelescoSystem, MeasureSpec};

fn main() {
    let sys = AngelescoSystem::new(
        MeasureSpec::jacobi(-1.0, 1.0, -0.5, -0.5).unwrap(),
        vec![
            MeasureSpec::jacobi(-3.0, -2.0, 0.0, 0.0).unwrap(),
            MeasureSpec::jacobi(2.0, 3.0, 0.0, 0.0).unwrap(),
        ],
    )
    .unwrap();
    // cross-validate both paths where the direct one is healthy
    for total in [4usize, 6, 8, 10] {
        for a in 0..=total {
            let n = MultiIndex::new(vec![a, total - a]);
            match solve_linear_fp_paths(&sys, &n) {
                Ok((da, ia)) => {
                    let diff = da
                        .q_zeros
                        .iter()
                        .zip(&ia.q_zeros)
                        .map(|(x, y)| (x - y).abs())
                        .fold(0.0f64, f64::max);
                    let rd = da.fourier_residuals.iter().flatten().fold(0.0f64, |u, &v| u.max(v.abs()));
                    let ri = ia.fourier_residuals.iter().flatten().fold(0.0f64, |u, &v| u.max(v.abs()));
                    println!("({a},{}) zdiff {diff:.3e}  res direct {rd:.3e} iter {ri:.3e}", total - a);
                }
                Err(e) => println!("({a},{}) ERR {e}", total - a),
            }
        }
    }
    // criterion-2 scale plus asymptotic sizes
    let t0 = std::time::Instant::now();
    let mut worst = (0.0f64, vec![]);
    for total in 0..=12usize {
        for a in 0..=total {
            let n = MultiIndex::new(vec![a, total - a]);
            match solve_linear_fp(&sys, &n) {
                Ok(ap) => {
                    let r = ap.fourier_residuals.iter().flatten().fold(0.0f64, |u, &v| u.max(v.abs()));
                    if r > worst.0 { worst = (r, vec![a, total - a]); }
                }
                Err(e) => println!("({a},{}) ERR {e}", total - a),
            }
        }
    }
    println!("all |n|<=12: worst residual {:.3e} at {:?}, elapsed {:?}", worst.0, worst.1, t0.elapsed());
    for n in [[12usize, 12], [14, 10], [24, 0], [1, 23], [12, 13]] {
        let idx = MultiIndex::new(n.to_vec());
        let t = std::time::Instant::now();
        match solve_linear_fp(&sys, &idx) {
            Ok(ap) => {
                let rmax = ap.fourier_residuals.iter().flatten().fold(0.0f64, |a, &b| a.max(b.abs()));
                println!("{:?}: ok, max residual {:.3e}, {:?}", n, rmax, t.elapsed());
            }
            Err(e) => println!("{:?}: ERR {e}", n),
        }
    }
}
