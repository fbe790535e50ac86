//! Periodized kernel: truncated lattice sums, the tail correction, and the
//! closed form `K(1/2) = π` for `d = 1`, `σ = 1/2`.
//!
//! Run with `cargo run --release --example kernel_lattice_sum`.

use std::f64::consts::PI;

use fpme::kernel::{comp_estimate_constant, fractional_constant, periodized_kernel, tail_bound};
use fpme::{kernel_matrix, make_grid, KernelConfig};

fn main() -> fpme::Result<()> {
    println!("C_(1,1/2) = {:.15} (1/pi = {:.15})", fractional_constant(1, 0.5)?, 1.0 / PI);
    println!("  R   plain sum error   corrected error   tail bound");
    for r in [4, 8, 16, 32, 64] {
        let plain = periodized_kernel(&[0.5], 0.5, &KernelConfig::new(r, false)?)?;
        let corrected = periodized_kernel(&[0.5], 0.5, &KernelConfig::new(r, true)?)?;
        println!(
            "{r:>3}   {:>15.3e}   {:>15.3e}   {:>10.3e}",
            (plain - PI).abs(),
            (corrected - PI).abs(),
            tail_bound(1, 0.5, r)?
        );
    }
    for (d, n, sigma) in [(1, 64, 0.5), (2, 16, 0.3)] {
        let grid = make_grid(d, n)?;
        let k = kernel_matrix(&grid, sigma, &KernelConfig::default())?;
        println!(
            "d = {d}, n = {n}, sigma = {sigma}: {} pairs, max K = {:.3e}, transport constant C = {:.4}",
            grid.pair_count(),
            k.upper().iter().cloned().fold(0.0, f64::max),
            comp_estimate_constant(&k)
        );
    }
    Ok(())
}
