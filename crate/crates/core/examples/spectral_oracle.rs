//! Reference solutions: the exact linear flow by FFT in one and two
//! dimensions, and RK4 on the semidiscrete equation for several exponents.
//!
//! Run with `cargo run --release --example spectral_oracle`.

use fpme::entropy::entropy;
use fpme::init::InitialCondition;
use fpme::oracles::{integrate_semidiscrete, spectral_heat_flow, stable_time_step};
use fpme::{kernel_matrix, make_grid, KernelConfig};

fn main() -> fpme::Result<()> {
    let t = 0.02;
    for (d, n) in [(1, 64), (2, 16)] {
        let grid = make_grid(d, n)?;
        let rho0 = InitialCondition::Bump { width: 0.1 }.build(grid)?;
        let exact = spectral_heat_flow(&rho0, 0.5, t)?;
        let kernel = kernel_matrix(&grid, 0.5, &KernelConfig::default())?;
        println!("d = {d}, n = {n}, bump, t = {t}:");
        for m in [0.5, 1.0, 2.0] {
            let dt = stable_time_step(&rho0, m, &kernel)? / 4.0;
            let rk = integrate_semidiscrete(&rho0, m, &kernel, t, dt)?;
            let gap = if m == 1.0 { format!(", L1 gap to FFT {:.2e}", rk.l1_distance(&exact)?) } else { String::new() };
            println!(
                "  m = {m}: dt = {dt:.2e}, max {:.4} -> {:.4}, entropy {:.5} -> {:.5}{gap}",
                rho0.max_value(),
                rk.max_value(),
                entropy(&rho0, m)?,
                entropy(&rk, m)?
            );
        }
    }
    Ok(())
}
