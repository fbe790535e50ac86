//! Kantorovich–Rubinstein distance by the transportation simplex, and the
//! bound `W_1 ≤ (C/2) W` against the non-local distance.
//!
//! Run with `cargo run --release --example w1_bound`.

use fpme::kernel::comp_estimate_constant;
use fpme::transport::{solve_distance, w1_kantorovich, SolverConfig};
use fpme::{kernel_matrix, make_grid, DensityField, KernelConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> fpme::Result<()> {
    let grid = make_grid(1, 16)?;
    let kernel = kernel_matrix(&grid, 0.5, &KernelConfig::default())?;
    let c = comp_estimate_constant(&kernel);
    println!("C = {c:.4}");
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for i in 0..10 {
        let mut random = || {
            let v = (0..16).map(|_| rng.random_range(0.2..2.0)).collect();
            DensityField::new(grid, v).and_then(|f| f.normalized())
        };
        let (a, b) = (random()?, random()?);
        let w1 = w1_kantorovich(&a, &b)?;
        let w = solve_distance(&a, &b, &kernel, 1.0, &SolverConfig::default())?.distance;
        worst = worst.max(w1 / (0.5 * c * w));
        println!("pair {i}: W1 = {w1:.5}, W = {w:.5}, W1 / (C W / 2) = {:.3}", w1 / (0.5 * c * w));
    }
    println!("worst ratio {worst:.3}");
    Ok(())
}
