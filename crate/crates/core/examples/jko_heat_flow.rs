//! Minimizing movements for the fractional heat flow (m = 1) compared with the
//! exact spectral solution.
//!
//! Run with `cargo run --release --example jko_heat_flow`.

use std::f64::consts::PI;
use std::time::Instant;

use fpme::jko::{jko_flow, JkoConfig};
use fpme::oracles::spectral_heat_flow;
use fpme::{kernel_matrix, make_grid, DensityField, KernelConfig};

fn main() -> fpme::Result<()> {
    let grid = make_grid(1, 64)?;
    let sigma = 0.5;
    let kernel = kernel_matrix(&grid, sigma, &KernelConfig::default())?;
    let rho0 = DensityField::from_fn(grid, |x| 1.0 + 0.5 * (2.0 * PI * x[0]).cos())?;
    let t_final = 0.05;
    let exact = spectral_heat_flow(&rho0, sigma, t_final)?;

    println!("{:>8} {:>6} {:>12} {:>10}", "tau", "steps", "L1 gap", "seconds");
    for tau in [4e-3, 2e-3, 1e-3] {
        let steps = (t_final / tau + 1e-9).floor() as usize;
        let start = Instant::now();
        let traj = jko_flow(&rho0, &kernel, &JkoConfig::new(tau, steps, 1.0))?;
        let gap = traj.at_time(t_final).l1_distance(&exact)?;
        println!("{tau:>8.0e} {steps:>6} {gap:>12.4e} {:>10.2}", start.elapsed().as_secs_f64());
    }
    Ok(())
}
