//! Prints the closed-form constants for a table-style configuration:
//! optimal aggregation probabilities, theoretical stepsizes, iteration and
//! communication bounds, and the penalty threshold lambda* below which the
//! rate is dominated by the local term.

use fedmix::theory::{l2gd_rates, l2sgd_plus_rates, lambda_threshold, vr_local_gd_rates};

fn main() -> fedmix::Result<()> {
    let (l, mu, m, n) = (1.0, 1e-4, 321usize, 5usize);
    let eps = 1e-5;
    println!("instance: L = {l}, mu = {mu:.0e}, m = {m}, n = {n}, eps = {eps:.0e}\n");

    for lambda in [1.0 / 9.0, 0.1, 1.0] {
        println!("lambda = {lambda:.4}");
        let p_gd = lambda / (l + lambda);
        let gd = l2gd_rates(l, mu, lambda, p_gd, eps, n)?;
        println!(
            "  l2gd         p* = {:.4}   alpha = {:.4}   iters <= {:.3e}   rounds <= {:.3e}",
            gd.p_star.unwrap(),
            gd.alpha,
            gd.iter_bound,
            gd.comm_bound
        );
        let plus_star = l2sgd_plus_rates(l, mu, lambda, m, 0.5, eps, n)?.p_star.unwrap();
        let plus = l2sgd_plus_rates(l, mu, lambda, m, plus_star, eps, n)?;
        println!(
            "  l2sgd+       p* = {:.4}   alpha = {:.4}   iters <= {:.3e}   rounds <= {:.3e}",
            plus_star, plus.alpha, plus.iter_bound, plus.comm_bound
        );
        let vr_star = vr_local_gd_rates(l, mu, lambda, 0.5, eps, n)?.p_star.unwrap();
        let vr = vr_local_gd_rates(l, mu, lambda, vr_star, eps, n)?;
        println!(
            "  vr-local-gd  p* = {:.4}   alpha = {:.4}   iters <= {:.3e}   rounds <= {:.3e}",
            vr_star, vr.alpha, vr.iter_bound, vr.comm_bound
        );
    }

    for p in [0.1, 0.5] {
        println!("\nlambda*(L = 1, p = {p}) = {:.4}", lambda_threshold(1.0, p)?);
    }
    println!("penalties below lambda* keep the local term dominant: no rate is lost by personalizing harder");
    Ok(())
}
