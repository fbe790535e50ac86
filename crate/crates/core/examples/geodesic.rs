//! A geodesic between two bumps: the interval actions are constant in time
//! and the intermediate densities are written to a directory.
//!
//! Run with `cargo run --release --example geodesic [OUT_DIR]`.

use fpme::io::store_density;
use fpme::transport::{solve_distance, speed_flatness, SolverConfig};
use fpme::{kernel_matrix, make_grid, DensityField, KernelConfig};

fn bump(grid: fpme::GridSpec, center: f64) -> fpme::Result<DensityField> {
    DensityField::from_fn(grid, |x| {
        let d = (x[0] - center + 0.5).rem_euclid(1.0) - 0.5;
        0.05 + (-d * d / 0.01).exp()
    })?
    .normalized()
}

fn main() -> fpme::Result<()> {
    let grid = make_grid(1, 32)?;
    let kernel = kernel_matrix(&grid, 0.5, &KernelConfig::default())?;
    let (a, b) = (bump(grid, 0.3)?, bump(grid, 0.7)?);
    let res = solve_distance(&a, &b, &kernel, 2.0, &SolverConfig::default().with_intervals(32))?;
    println!("W = {:.8}, flatness {:.2e}", res.distance, speed_flatness(&res.speed_profile));
    for k in (0..=32).step_by(8) {
        let node = &res.path.nodes[k];
        let peak = node.values().iter().enumerate().max_by(|x, y| x.1.total_cmp(y.1)).unwrap();
        println!(
            "  t = {:.2}: max {:.3} at x = {:.3}, min {:.3}",
            k as f64 / 32.0,
            peak.1,
            grid.center(peak.0)[0],
            node.min_value()
        );
    }
    if let Some(dir) = std::env::args().nth(1) {
        let dir = std::path::PathBuf::from(dir);
        std::fs::create_dir_all(&dir)?;
        for (k, node) in res.path.nodes.iter().enumerate() {
            store_density(node, &dir.join(format!("node_{k:06}.csv")))?;
        }
        println!("wrote {} nodes to {}", res.path.nodes.len(), dir.display());
    }
    Ok(())
}
