// The constant C(Λ) by numerical inversion of the hitting-time transform.

use ptlab::laplace::{c_analytic_bound_default, default_t_grid, CCurve, LaplaceParams};

pub fn run_example() -> ptlab::Result<()> {
    let grid = default_t_grid();
    for lambda in [1.0, 4.0, 64.0] {
        let curve = CCurve::compute(&LaplaceParams::new(lambda)?, &grid)?;
        let (c, t) = curve.supremum();
        let analytic = c_analytic_bound_default(lambda)?;
        println!("Λ={lambda:>5}: C = {c:.3} (at t = {t:.3}), analytic bound {analytic:.1}");
        assert!(c <= analytic);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
