//! Monte-Carlo expected cost converging on the closed-form oracle.
//!
//!     cargo run --example oracle_check

use decical::decision::expected_cost;
use decical::synthetic::{oracle_cost_variance, oracle_expected_cost, LatentParams};
use decical::tasks::{frost_cost, FrostTaskParams, NO_PROTECT, PROTECT};
use rand::{Rng, SeedableRng};
use statrs::distribution::{ContinuousCDF, Normal};

fn normal_members(rng: &mut impl Rng, mu: f64, sigma: f64, m: usize) -> Vec<f64> {
    let n = Normal::new(mu, sigma).unwrap();
    (0..m).map(|_| n.inverse_cdf(rng.random_range(1e-12..1.0))).collect()
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cost = frost_cost(&FrostTaskParams { theta: 0.0, cost_ratio: 0.5 })?;
    let law = LatentParams::normal(1.0, 2.0);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);

    for action in [NO_PROTECT, PROTECT] {
        let exact = oracle_expected_cost(&law, &cost, action)?;
        let sd = oracle_cost_variance(&law, &cost, action)?.sqrt();
        println!("action {action}: exact {exact:.4}, cost sd {sd:.4}");
        for m in [10, 100, 1_000, 10_000, 100_000] {
            let members = normal_members(&mut rng, law.mu, law.sigma, m);
            let mc = expected_cost(&members, action, &cost)?;
            println!(
                "  M = {m:6}: {mc:.4}  error {:+.4}  (σ/√M = {:.4})",
                mc - exact,
                sd / (m as f64).sqrt()
            );
        }
    }
    Ok(())
}
