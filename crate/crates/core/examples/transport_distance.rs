//! Non-local transport distance between two densities: metric axioms,
//! invariance under the time horizon, and convergence in the number of
//! time intervals.
//!
//! Run with `cargo run --release --example transport_distance`.

use std::f64::consts::PI;

use fpme::transport::{solve_distance, triangle_inequality_probe, SolverConfig};
use fpme::{kernel_matrix, make_grid, DensityField, KernelConfig};

fn main() -> fpme::Result<()> {
    let grid = make_grid(1, 16)?;
    let kernel = kernel_matrix(&grid, 0.5, &KernelConfig::default())?;
    let a = DensityField::from_fn(grid, |x| 1.0 + 0.8 * (2.0 * PI * x[0]).cos())?;
    let b = DensityField::from_fn(grid, |x| 1.0 + 0.8 * (2.0 * PI * x[0]).sin())?;
    let c = DensityField::uniform(grid);

    for m in [0.5, 1.0, 2.0] {
        let r = solve_distance(&a, &b, &kernel, m, &SolverConfig::default())?;
        println!(
            "m = {m}: W = {:.10}, {} Newton iterations, continuity residual {:.1e}, converged {}",
            r.distance, r.iterations, r.constraint_residual, r.converged
        );
    }
    let m = 2.0;
    let cfg = SolverConfig::default();
    let ab = solve_distance(&a, &b, &kernel, m, &cfg)?.distance;
    let ba = solve_distance(&b, &a, &kernel, m, &cfg)?.distance;
    println!("symmetry gap {:.1e}", (ab - ba).abs());
    println!("triangle margin W(a,c) + W(c,b) - W(a,b) = {:.4e}", triangle_inequality_probe(&a, &c, &b, &kernel, m, &cfg)?);
    for horizon in [0.5, 2.0] {
        let w = solve_distance(&a, &b, &kernel, m, &SolverConfig { horizon, ..cfg })?.distance;
        println!("horizon T = {horizon}: W = {w:.10}");
    }
    println!("refinement in the number of intervals L (m = 1):");
    for l in [4, 8, 16, 32, 64] {
        let w = solve_distance(&a, &b, &kernel, 1.0, &cfg.with_intervals(l))?.distance;
        println!("  L = {l:>2}: W = {w:.10}");
    }
    Ok(())
}
