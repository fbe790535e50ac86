//! The kernel operator reproduces the Fourier symbol `|2πk|^{2σ}` on
//! trigonometric modes, with first-order convergence in the grid size.
//!
//! Run with `cargo run --release --example fractional_operator`.

use std::f64::consts::PI;

use fpme::kernel::apply_fractional_operator;
use fpme::{kernel_matrix, make_grid, KernelConfig, NodeField};

fn main() -> fpme::Result<()> {
    for sigma in [0.25, 0.5, 0.75] {
        println!("sigma = {sigma}");
        for freq in [1.0, 2.0] {
            let symbol = (2.0 * PI * freq).powf(2.0 * sigma);
            for n in [32, 64, 128] {
                let grid = make_grid(1, n)?;
                let k = kernel_matrix(&grid, sigma, &KernelConfig::default())?;
                let f = NodeField::from_fn(grid, |x| (2.0 * PI * freq * x[0]).cos())?;
                let lf = apply_fractional_operator(&f, &k)?;
                let ratio = lf.values()[0] / f.values()[0];
                println!(
                    "  k = {freq}, n = {n:>3}: ratio {ratio:.6}, symbol {symbol:.6}, relative error {:.2e}",
                    (ratio - symbol).abs() / symbol
                );
            }
        }
    }
    Ok(())
}
