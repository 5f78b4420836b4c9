use angelesco::linear_fp::MultiIndex;
use angelesco::nonlinear_fp::{fixed_point_solve, residual_check, FixedPointOpts};
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
    let t0 = std::time::Instant::now();
    let mut worst = 0.0f64;
    let mut worst_last = 0.0f64;
    for total in 0..=10usize {
        for a in 0..=total {
            let n = MultiIndex::new(vec![a, total - a]);
            match fixed_point_solve(&sys, &n, FixedPointOpts::default()) {
                Ok(ap) => {
                    let r = residual_check(&ap, &sys).unwrap();
                    worst = worst.max(r);
                    worst_last = worst_last.max(ap.trace.last().copied().unwrap_or(0.0));
                }
                Err(e) => println!("({a},{}) ERR {e}", total - a),
            }
        }
    }
    println!(
        "all |n|<=10: worst residual {worst:.3e}, worst final displacement {worst_last:.3e}, elapsed {:?}",
        t0.elapsed()
    );
}
