//! The `m`-means between the logarithmic (`m = 1`) and arithmetic (`m = 2`)
//! means, checked against their integral representation, with the chain
//! identity `θ_m (U'_m(s) - U'_m(t)) = s^m - t^m`.
//!
//! Run with `cargo run --release --example theta_means`.

use fpme::entropy::u_m_prime;
use fpme::means::{theta_m, Nonlinearity};
use fpme::oracles::theta_quadrature;

fn main() -> fpme::Result<()> {
    let (s, t) = (3.0, 0.5);
    println!("s = {s}, t = {t}");
    println!("   m      theta_m   quadrature   chain residual");
    for m in [0.25, 0.5, 1.0, 1.5, 2.0] {
        let th = theta_m(s, t, m)?;
        let chain = th * (u_m_prime(s, m)? - u_m_prime(t, m)?) - (s.powf(m) - t.powf(m));
        println!("{m:>4}  {th:>11.8}  {:>11.8}  {chain:>15.2e}", theta_quadrature(s, t, m)?);
    }
    println!("near the diagonal, theta_m(1, 1 + e, 1.5):");
    for e in [1e-2, 1e-5, 1e-8, 1e-12] {
        println!("  e = {e:.0e}: {:.17}", theta_m(1.0, 1.0 + e, 1.5)?);
    }
    println!("vacuum values theta_m(s, 0): m = 1.5 -> {}, m = 0.5 -> {}", theta_m(2.0, 0.0, 1.5)?, theta_m(2.0, 0.0, 0.5)?);
    for (d, sigma) in [(1, 0.5), (2, 0.25)] {
        let nl = Nonlinearity::new(0.5, sigma, d)?;
        println!(
            "d = {d}, sigma = {sigma}: critical exponent {}, m = 0.5 below it: {}",
            nl.critical_exponent(),
            nl.below_critical()
        );
    }
    Ok(())
}
