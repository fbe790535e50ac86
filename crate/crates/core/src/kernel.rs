//! The `Z^d`-periodized fractional kernel and the dense pair-weight matrix.
//!
//! `K(x) = C_{d,σ} Σ_{k∈Z^d} |x + k|^{-d-2σ}` with
//! `C_{d,σ} = 4^σ Γ(d/2 + σ) / (π^{d/2} |Γ(-σ)|)`.
//!
//! The lattice sum is taken exactly over the cube `|k|_∞ ≤ R`. The remainder
//! is approximated by the integral of `|y|^{-d-2σ}` over the complement of
//! the union of unit cells around the summed lattice points, plus the
//! first Euler–Maclaurin (midpoint) correction. Both are written as boundary
//! integrals over the cube faces via the divergence theorem, which makes them
//! one-dimensional.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{FpmeError, Result};
use crate::grid::{cell_distance, check_grids, pair_index, GridSpec, NodeField};
use crate::special::{gamma, gauss_legendre, integrate};

/// Truncation settings for the lattice sum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    /// Lattice shells `|k|_∞ ≤ R` summed exactly.
    pub truncation_radius: usize,
    /// Add the integral estimate of the `|k|_∞ > R` remainder.
    pub tail_correction: bool,
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig {
            truncation_radius: 8,
            tail_correction: true,
        }
    }
}

impl KernelConfig {
    pub fn new(truncation_radius: usize, tail_correction: bool) -> Result<Self> {
        let cfg = KernelConfig {
            truncation_radius,
            tail_correction,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if self.truncation_radius < 1 {
            return Err(FpmeError::InvalidKernelConfig(
                "truncation radius must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

pub(crate) fn check_sigma(sigma: f64) -> Result<()> {
    if !(sigma > 0.0 && sigma < 1.0) {
        return Err(FpmeError::InvalidSigma(sigma));
    }
    Ok(())
}

/// `C_{d,σ} = 4^σ Γ(d/2+σ) / (π^{d/2} |Γ(-σ)|)`.
pub fn fractional_constant(d: usize, sigma: f64) -> Result<f64> {
    check_sigma(sigma)?;
    if d == 0 {
        return Err(FpmeError::UnsupportedDimension(d));
    }
    let half_d = d as f64 / 2.0;
    let num = 4f64.powf(sigma) * gamma(half_d + sigma);
    let den = PI.powf(half_d) * gamma(-sigma).abs();
    Ok(num / den)
}

fn wrap_component(v: f64) -> f64 {
    // into (-1/2, 1/2]
    let w = v - v.round();
    if w <= -0.5 {
        w + 1.0
    } else {
        w
    }
}

fn wrapped(delta: &[f64]) -> Result<[f64; 2]> {
    match delta.len() {
        1 => Ok([wrap_component(delta[0]), 0.0]),
        2 => Ok([wrap_component(delta[0]), wrap_component(delta[1])]),
        d => Err(FpmeError::UnsupportedDimension(d)),
    }
}

/// `Σ_{|k|_∞ ≤ R} |δ + k|^{-d-2σ}` (without the constant `C_{d,σ}`).
pub fn lattice_partial_sum(delta: &[f64], sigma: f64, radius: usize) -> Result<f64> {
    check_sigma(sigma)?;
    let d = delta.len();
    let x = wrapped(delta)?;
    if x[..d].iter().all(|c| c.abs() < 1e-14) {
        return Err(FpmeError::KernelSingularity);
    }
    let r = radius as i64;
    let half_p = (d as f64 + 2.0 * sigma) / 2.0;
    let mut total = 0.0;
    match d {
        1 => {
            for k in -r..=r {
                let z = x[0] + k as f64;
                total += (z * z).powf(-half_p);
            }
        }
        _ => {
            for k0 in -r..=r {
                let z0 = x[0] + k0 as f64;
                let mut row = 0.0;
                for k1 in -r..=r {
                    let z1 = x[1] + k1 as f64;
                    row += (z0 * z0 + z1 * z1).powf(-half_p);
                }
                total += row;
            }
        }
    }
    Ok(total)
}

/// Estimate of `Σ_{|k|_∞ > R} |δ + k|^{-d-2σ}` (without `C_{d,σ}`).
///
/// Midpoint rule over the unit cells of the omitted lattice points, with the
/// leading `(1/24) Δf` correction, integrated through the faces of the cube
/// `δ + [-R-½, R+½]^d`.
pub fn tail_estimate(delta: &[f64], sigma: f64, radius: usize) -> Result<f64> {
    check_sigma(sigma)?;
    let d = delta.len();
    let x = wrapped(delta)?;
    let p = d as f64 + 2.0 * sigma;
    let a = radius as f64 + 0.5;
    // integrand of the face integral: (z·n) |z|^{-p} [1/(2σ) - p/(24 |z|^2)]
    let face = |normal_offset: f64, r2: f64| {
        normal_offset * r2.powf(-p / 2.0) * (1.0 / (2.0 * sigma) - p / (24.0 * r2))
    };
    match d {
        1 => {
            let right = a + x[0];
            let left = a - x[0];
            Ok(face(right, right * right) + face(left, left * left))
        }
        _ => {
            let rule = gauss_legendre(16);
            let mut total = 0.0;
            // faces normal to axis 0 and axis 1
            for axis in 0..2 {
                let other = 1 - axis;
                for sign in [1.0, -1.0] {
                    let offset = a + sign * x[axis];
                    let lo = x[other] - a;
                    let hi = x[other] + a;
                    total += integrate(|t| face(offset, offset * offset + t * t), lo, hi, 8, &rule);
                }
            }
            Ok(total)
        }
    }
}

/// Rigorous upper bound on `Σ_{|k|_∞ > R} |δ + k|^{-d-2σ}` (without `C_{d,σ}`):
/// `∫_{|y| ≥ R} (|y| - √d/2)^{-d-2σ} dy`.
pub fn tail_bound(d: usize, sigma: f64, radius: usize) -> Result<f64> {
    check_sigma(sigma)?;
    let r = radius as f64;
    match d {
        1 => Ok((r - 0.5).powf(-2.0 * sigma) / sigma),
        2 => {
            let c = 0.5 * 2f64.sqrt();
            let u = r - c;
            Ok(2.0 * PI * (u.powf(-2.0 * sigma) / (2.0 * sigma) + c * u.powf(-1.0 - 2.0 * sigma) / (1.0 + 2.0 * sigma)))
        }
        _ => Err(FpmeError::UnsupportedDimension(d)),
    }
}

/// `K^σ(δ)` with lattice truncation `cfg`. The difference `δ` is wrapped into
/// the unit cube first and must not vanish there.
pub fn periodized_kernel(delta: &[f64], sigma: f64, cfg: &KernelConfig) -> Result<f64> {
    cfg.validate()?;
    let c = fractional_constant(delta.len(), sigma)?;
    let mut s = lattice_partial_sum(delta, sigma, cfg.truncation_radius)?;
    if cfg.tail_correction {
        s += tail_estimate(delta, sigma, cfg.truncation_radius)?;
    }
    Ok(c * s)
}

/// Dense symmetric pair weights `K_ij = K^σ(x_i - x_j)`, `i ≠ j`.
#[derive(Clone, Debug)]
pub struct KernelMatrix {
    grid: GridSpec,
    sigma: f64,
    config: KernelConfig,
    /// Kernel value per wrapped lattice difference (entry 0 unused).
    by_difference: Vec<f64>,
    upper: Vec<f64>,
}

impl KernelMatrix {
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn config(&self) -> &KernelConfig {
        &self.config
    }

    /// Packed upper triangle, same layout as [`crate::grid::PairField`].
    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match i.cmp(&j) {
            std::cmp::Ordering::Equal => 0.0,
            std::cmp::Ordering::Less => self.upper[pair_index(i, j, self.grid.cells())],
            std::cmp::Ordering::Greater => self.upper[pair_index(j, i, self.grid.cells())],
        }
    }

    /// Row-major `N×N` copy with a zero diagonal.
    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.grid.cells();
        let mut dense = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    dense[i * n + j] = self.by_difference[self.grid.difference_index(i, j)];
                }
            }
        }
        dense
    }

    /// Rebuilds a matrix from stored upper-triangle values (file input).
    pub fn from_upper(grid: GridSpec, sigma: f64, config: KernelConfig, upper: Vec<f64>) -> Result<Self> {
        check_sigma(sigma)?;
        if upper.len() != grid.pair_count() {
            return Err(FpmeError::LengthMismatch {
                expected: grid.pair_count(),
                got: upper.len(),
            });
        }
        if upper.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(FpmeError::Domain("kernel weights must be finite and positive".into()));
        }
        let n = grid.cells();
        let mut by_difference = vec![0.0; n];
        for j in 1..n {
            by_difference[grid.difference_index(0, j)] = upper[pair_index(0, j, n)];
        }
        Ok(KernelMatrix {
            grid,
            sigma,
            config,
            by_difference,
            upper,
        })
    }
}

/// Assembles the kernel matrix on `grid`.
pub fn kernel_matrix(grid: &GridSpec, sigma: f64, cfg: &KernelConfig) -> Result<KernelMatrix> {
    cfg.validate()?;
    check_sigma(sigma)?;
    let grid = *grid;
    let n = grid.cells();
    let d = grid.dim();
    let by_difference: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|k| {
            if k == 0 {
                Ok(0.0)
            } else {
                // canonical representative under the symmetries of the lattice
                let v = grid.difference_vector(k);
                let mut c = [v[0].abs(), v[1].abs()];
                if c[1] > c[0] {
                    c.swap(0, 1);
                }
                periodized_kernel(&c[..d], sigma, cfg)
            }
        })
        .collect::<Result<_>>()?;
    let mut upper = Vec::with_capacity(grid.pair_count());
    for i in 0..n {
        for j in i + 1..n {
            upper.push(by_difference[grid.difference_index(i, j)]);
        }
    }
    Ok(KernelMatrix {
        grid,
        sigma,
        config: *cfg,
        by_difference,
        upper,
    })
}

/// `Σ_j d_T(x_i,x_j)^2 K_ij h^d` for every row `i`.
pub fn second_moment_rows(kernel: &KernelMatrix) -> Vec<f64> {
    let grid = *kernel.grid();
    let n = grid.cells();
    let hd = grid.cell_volume();
    (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| j != i)
                .map(|j| {
                    let dist = cell_distance(&grid, i, j);
                    dist * dist * kernel.get(i, j)
                })
                .sum::<f64>()
                * hd
        })
        .collect()
}

/// Constant of the transport estimate `∫ d_T d|ν| ≤ C √A`:
/// `C = √(2 · sup_i Σ_j d_T(x_i,x_j)^2 K_ij h^d)`.
pub fn comp_estimate_constant(kernel: &KernelMatrix) -> f64 {
    let sup = second_moment_rows(kernel)
        .into_iter()
        .fold(0.0, f64::max);
    (2.0 * sup).sqrt()
}

/// `(L f)_i = Σ_{j≠i} (f_i - f_j) K_ij h^d`, the discrete fractional Laplacian.
pub fn apply_fractional_operator(f: &NodeField, kernel: &KernelMatrix) -> Result<NodeField> {
    check_grids(f.grid(), kernel.grid())?;
    let grid = *f.grid();
    let n = grid.cells();
    let hd = grid.cell_volume();
    let v = f.values();
    let mut out = vec![0.0; n];
    let upper = kernel.upper();
    let mut p = 0;
    for i in 0..n {
        for j in i + 1..n {
            let flux = (v[i] - v[j]) * upper[p];
            out[i] += flux;
            out[j] -= flux;
            p += 1;
        }
    }
    for o in &mut out {
        *o *= hd;
    }
    NodeField::new(grid, out)
}
