// Communication barrier of Gaussian paths: closed form, Monte Carlo and the
// generic upper bounds.

use ptlab::anneal::RngSeed;
use ptlab::gcb::{
    gaussian_shift_gcb, gaussian_shift_kl, gaussian_shift_tv, gcb_direct_mc, gcb_kl_bound, gcb_product_bound,
    gcb_tv_bound,
};
use ptlab::models::GaussianPair;

pub fn run_example() -> ptlab::Result<()> {
    let mu = 2.0;
    let model = GaussianPair::mean_shift(vec![mu])?;
    let mc = gcb_direct_mc(&model, 50, 4_000, RngSeed(1))?;
    let exact = gaussian_shift_gcb(mu);
    println!("Λ exact {exact:.4}, direct MC {:.4} ± {:.4}", mc.value, mc.stderr);
    assert!(mc.within(exact, 4.0));

    let tv = gcb_tv_bound(&[gaussian_shift_tv(mu)])?;
    let kl = gcb_kl_bound(gaussian_shift_kl(mu), gaussian_shift_kl(mu))?;
    println!("TV bound {tv:.3}, KL bound {kl:.3}");
    assert!(exact <= tv && exact <= kl);

    let product = GaussianPair::mean_shift(vec![mu; 3])?;
    let mc3 = gcb_direct_mc(&product, 50, 4_000, RngSeed(2))?;
    println!(
        "3 independent shifts: {:.3} ≤ {:.3}",
        mc3.value,
        gcb_product_bound(&[exact; 3])
    );
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
