//! Kantorovich–Rubinstein distance with torus cost by the transportation
//! simplex method.

use std::collections::VecDeque;

use crate::error::{FpmeError, Result};
use crate::grid::{cell_distance, check_grids, DensityField};

/// Largest grid accepted by [`w1_kantorovich`].
pub const W1_MAX_CELLS: usize = 1024;

/// `W_1(ρ0, ρ1)` with cost `d_T`, exact up to roundoff.
///
/// Since the cost is a metric, only the net excess `(ρ0 - ρ1)^±` has to be
/// moved, which keeps the program small.
pub fn w1_kantorovich(rho0: &DensityField, rho1: &DensityField) -> Result<f64> {
    check_grids(rho0.grid(), rho1.grid())?;
    let grid = *rho0.grid();
    let n = grid.cells();
    if n > W1_MAX_CELLS {
        return Err(FpmeError::TooLarge(format!(
            "{n} cells exceeds the W1 limit of {W1_MAX_CELLS}"
        )));
    }
    let hd = grid.cell_volume();
    let mut sources = Vec::new();
    let mut sinks = Vec::new();
    for (i, (a, b)) in rho0.values().iter().zip(rho1.values()).enumerate() {
        let e = (a - b) * hd;
        if e > 0.0 {
            sources.push((i, e));
        } else if e < 0.0 {
            sinks.push((i, -e));
        }
    }
    let supply: f64 = sources.iter().map(|s| s.1).sum();
    let demand: f64 = sinks.iter().map(|s| s.1).sum();
    if (supply - demand).abs() > 1e-9 * supply.max(demand).max(1.0) {
        return Err(FpmeError::MassMismatch(format!("{} vs {}", rho0.mass(), rho1.mass())));
    }
    if sources.is_empty() || sinks.is_empty() {
        return Ok(0.0);
    }
    // balance roundoff on the largest sink
    let big = (0..sinks.len()).max_by(|&x, &y| sinks[x].1.total_cmp(&sinks[y].1)).unwrap();
    sinks[big].1 += supply - demand;
    let cost: Vec<Vec<f64>> = sources
        .iter()
        .map(|&(i, _)| sinks.iter().map(|&(j, _)| cell_distance(&grid, i, j)).collect())
        .collect();
    let s: Vec<f64> = sources.iter().map(|x| x.1).collect();
    let t: Vec<f64> = sinks.iter().map(|x| x.1).collect();
    transportation_simplex(&cost, &s, &t)
}

/// Minimum of `Σ c_ij x_ij` over transport plans between balanced `supply`
/// and `demand`.
pub(crate) fn transportation_simplex(cost: &[Vec<f64>], supply: &[f64], demand: &[f64]) -> Result<f64> {
    let (m, n) = (supply.len(), demand.len());
    let mut basis: Vec<(usize, usize, f64)> = Vec::with_capacity(m + n - 1);
    // northwest corner start with exactly m + n - 1 basic cells
    let (mut s, mut t) = (supply.to_vec(), demand.to_vec());
    let (mut i, mut j) = (0, 0);
    loop {
        let q = s[i].min(t[j]);
        basis.push((i, j, q));
        s[i] -= q;
        t[j] -= q;
        if i == m - 1 && j == n - 1 {
            break;
        }
        if (s[i] <= t[j] && i < m - 1) || j == n - 1 {
            i += 1;
        } else {
            j += 1;
        }
    }
    let cmax = cost.iter().flatten().fold(0.0f64, |a, &c| a.max(c));
    let tol = 1e-13 * cmax.max(1e-300);
    let cap = 100 * (m + n) * (m + n) + 1000;
    for _ in 0..cap {
        let adj = adjacency(&basis, m, n);
        let (u, v) = potentials(&basis, &adj, cost, m, n);
        let mut best = (0.0, 0, 0);
        for (r, row) in cost.iter().enumerate() {
            for (c, &cij) in row.iter().enumerate() {
                let red = cij - u[r] - v[c];
                if red < best.0 {
                    best = (red, r, c);
                }
            }
        }
        if best.0 >= -tol {
            return Ok(basis.iter().map(|&(r, c, x)| x * cost[r][c]).sum());
        }
        let (_, er, ec) = best;
        // tree path from row er to column ec, as basis positions
        let path = tree_path(&adj, er, m + ec, m + n);
        // signs along the path alternate starting with '-' at the row end
        let mut theta = f64::INFINITY;
        let mut leave = usize::MAX;
        for (k, &b) in path.iter().enumerate() {
            if k % 2 == 0 && basis[b].2 < theta {
                theta = basis[b].2;
                leave = b;
            }
        }
        for (k, &b) in path.iter().enumerate() {
            if k % 2 == 0 {
                basis[b].2 -= theta;
            } else {
                basis[b].2 += theta;
            }
        }
        basis[leave] = (er, ec, theta);
    }
    Err(FpmeError::Numerical("transportation simplex hit its iteration cap".into()))
}

fn adjacency(basis: &[(usize, usize, f64)], m: usize, n: usize) -> Vec<Vec<(usize, usize)>> {
    let mut adj = vec![Vec::new(); m + n];
    for (b, &(r, c, _)) in basis.iter().enumerate() {
        adj[r].push((m + c, b));
        adj[m + c].push((r, b));
    }
    adj
}

fn potentials(
    basis: &[(usize, usize, f64)],
    adj: &[Vec<(usize, usize)>],
    cost: &[Vec<f64>],
    m: usize,
    n: usize,
) -> (Vec<f64>, Vec<f64>) {
    let mut pot = vec![f64::NAN; m + n];
    pot[0] = 0.0;
    let mut queue = VecDeque::from([0usize]);
    while let Some(node) = queue.pop_front() {
        for &(next, b) in &adj[node] {
            if pot[next].is_nan() {
                let (r, c, _) = basis[b];
                // u_r + v_c = c_rc on basic cells
                pot[next] = cost[r][c] - pot[node];
                queue.push_back(next);
            }
        }
    }
    (pot[..m].to_vec(), pot[m..].to_vec())
}

/// Basis positions on the tree path between `from` and `to`, ordered from the
/// `from` end.
fn tree_path(
    adj: &[Vec<(usize, usize)>],
    from: usize,
    to: usize,
    nodes: usize,
) -> Vec<usize> {
    let mut parent = vec![(usize::MAX, usize::MAX); nodes];
    let mut seen = vec![false; nodes];
    seen[from] = true;
    let mut queue = VecDeque::from([from]);
    while let Some(node) = queue.pop_front() {
        if node == to {
            break;
        }
        for &(next, b) in &adj[node] {
            if !seen[next] {
                seen[next] = true;
                parent[next] = (node, b);
                queue.push_back(next);
            }
        }
    }
    let mut path = Vec::new();
    let mut node = to;
    while node != from {
        let (p, b) = parent[node];
        path.push(b);
        node = p;
    }
    path.reverse();
    path
}
