//! Reference solutions independent of the transport machinery: the exact
//! spectral fractional heat flow, RK4 on the semidiscrete equation
//! `ρ̇_i = Σ_j (ρ_j^m - ρ_i^m) K_ij h^d`, and a quadrature form of `θ_m`.

use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{FpmeError, Result};
use crate::grid::{check_grids, DensityField, GridSpec, NodeField};
use crate::kernel::{apply_fractional_operator, check_sigma, KernelMatrix};
use crate::means::check_exponent;
use crate::special::{gauss_legendre, integrate};

/// Continuum symbol `|2πk|^{2σ}` of the fractional Laplacian on the grid's
/// retained frequencies.
#[derive(Clone, Debug)]
pub struct SpectralPlan {
    grid: GridSpec,
    sigma: f64,
    symbol: Vec<f64>,
}

fn wrapped_frequency(q: usize, n: usize) -> f64 {
    if 2 * q <= n {
        q as f64
    } else {
        q as f64 - n as f64
    }
}

impl SpectralPlan {
    pub fn new(grid: GridSpec, sigma: f64) -> Result<Self> {
        check_sigma(sigma)?;
        let n = grid.resolution();
        let symbol = (0..grid.cells())
            .map(|c| {
                let q = grid.multi_index(c);
                let k2: f64 = (0..grid.dim()).map(|a| wrapped_frequency(q[a], n).powi(2)).sum();
                (2.0 * PI * k2.sqrt()).powf(2.0 * sigma)
            })
            .collect();
        Ok(SpectralPlan { grid, sigma, symbol })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Symbol values in FFT order.
    pub fn symbol(&self) -> &[f64] {
        &self.symbol
    }

    /// Multiplies every Fourier mode of `values` by `exp(-λ_k t)`.
    pub fn evolve(&self, values: &[f64], t: f64) -> Vec<f64> {
        let n = self.grid.resolution();
        let mut data: Vec<Complex<f64>> = values.iter().map(|&v| Complex::new(v, 0.0)).collect();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        transform(&mut data, self.grid, |row| forward.process(row));
        for (z, lam) in data.iter_mut().zip(&self.symbol) {
            *z *= (-lam * t).exp();
        }
        transform(&mut data, self.grid, |row| inverse.process(row));
        let scale = 1.0 / self.grid.cells() as f64;
        data.iter().map(|z| z.re * scale).collect()
    }
}

/// Applies a 1D transform along every axis.
fn transform(data: &mut [Complex<f64>], grid: GridSpec, mut f: impl FnMut(&mut [Complex<f64>])) {
    let n = grid.resolution();
    match grid.dim() {
        1 => f(data),
        _ => {
            for row in data.chunks_exact_mut(n) {
                f(row);
            }
            let mut col = vec![Complex::new(0.0, 0.0); n];
            for b in 0..n {
                for a in 0..n {
                    col[a] = data[a * n + b];
                }
                f(&mut col);
                for a in 0..n {
                    data[a * n + b] = col[a];
                }
            }
        }
    }
}

fn clip_roundoff(values: Vec<f64>) -> Result<Vec<f64>> {
    values
        .into_iter()
        .map(|v| {
            if v >= 0.0 {
                Ok(v)
            } else if v >= -1e-12 {
                Ok(0.0)
            } else {
                Err(FpmeError::Instability(format!("density value {v} below -1e-12")))
            }
        })
        .collect()
}

/// Exact solution of `∂_t ρ + (-Δ)^σ ρ = 0` on the grid's Fourier modes.
pub fn spectral_heat_flow(rho0: &DensityField, sigma: f64, t: f64) -> Result<DensityField> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(FpmeError::Domain(format!("time must be nonnegative, got {t}")));
    }
    if t == 0.0 {
        return Ok(rho0.clone());
    }
    let plan = SpectralPlan::new(*rho0.grid(), sigma)?;
    DensityField::new(*rho0.grid(), clip_roundoff(plan.evolve(rho0.values(), t))?)
}

/// `ρ̇_i = Σ_{j≠i} (ρ_j^m - ρ_i^m) K_ij h^d`.
pub fn semidiscrete_rhs(rho: &DensityField, m: f64, kernel: &KernelMatrix) -> Result<NodeField> {
    check_exponent(m)?;
    check_grids(rho.grid(), kernel.grid())?;
    if m < 1.0 && rho.min_value() <= 0.0 {
        return Err(FpmeError::Domain(
            "vacuum in the density requires flooring for m < 1".into(),
        ));
    }
    rhs_values(rho.values(), *rho.grid(), m, kernel)
}

fn rhs_values(values: &[f64], grid: GridSpec, m: f64, kernel: &KernelMatrix) -> Result<NodeField> {
    let pm = NodeField::new(grid, values.iter().map(|s| s.max(0.0).powf(m)).collect())?;
    let lp = apply_fractional_operator(&pm, kernel)?;
    NodeField::new(grid, lp.values().iter().map(|v| -v).collect())
}

/// `1/(2 max_i Σ_j m s*^{m-1} K_ij h^d)`, with `s*` the density value that
/// maximizes `m s^{m-1}`.
pub fn stable_time_step(rho: &DensityField, m: f64, kernel: &KernelMatrix) -> Result<f64> {
    check_exponent(m)?;
    check_grids(rho.grid(), kernel.grid())?;
    let grid = rho.grid();
    let n = grid.cells();
    let hd = grid.cell_volume();
    let row_sum = (0..n).map(|j| kernel.get(0, j)).sum::<f64>() * hd;
    let s = if m >= 1.0 { rho.max_value() } else { rho.min_value() };
    let slope = if m == 1.0 { 1.0 } else { m * s.powf(m - 1.0) };
    if !slope.is_finite() {
        return Err(FpmeError::Domain("no stable step at vacuum for m < 1".into()));
    }
    Ok(if slope > 0.0 { 1.0 / (2.0 * row_sum * slope) } else { f64::INFINITY })
}

/// Classic RK4 for the semidiscrete equation with steps of at most `dt`.
pub fn integrate_semidiscrete(
    rho0: &DensityField,
    m: f64,
    kernel: &KernelMatrix,
    t_final: f64,
    dt: f64,
) -> Result<DensityField> {
    if !(t_final >= 0.0) || !(dt > 0.0) {
        return Err(FpmeError::InvalidConfig("t_final must be ≥ 0 and dt > 0".into()));
    }
    semidiscrete_rhs(rho0, m, kernel)?;
    let bound = stable_time_step(rho0, m, kernel)?;
    let steps = (t_final / dt).ceil() as usize;
    if steps == 0 {
        return Ok(rho0.clone());
    }
    let h = t_final / steps as f64;
    if h > bound {
        return Err(FpmeError::InvalidConfig(format!(
            "time step {h:e} exceeds the stability bound {bound:e}"
        )));
    }
    let grid = *rho0.grid();
    let mut y = rho0.values().to_vec();
    let axpy = |y: &[f64], a: f64, k: &[f64]| -> Vec<f64> { y.iter().zip(k).map(|(u, v)| u + a * v).collect() };
    for _ in 0..steps {
        let k1 = rhs_values(&y, grid, m, kernel)?;
        let k2 = rhs_values(&axpy(&y, 0.5 * h, k1.values()), grid, m, kernel)?;
        let k3 = rhs_values(&axpy(&y, 0.5 * h, k2.values()), grid, m, kernel)?;
        let k4 = rhs_values(&axpy(&y, h, k3.values()), grid, m, kernel)?;
        for i in 0..y.len() {
            y[i] += h / 6.0 * (k1.values()[i] + 2.0 * k2.values()[i] + 2.0 * k3.values()[i] + k4.values()[i]);
        }
        y = clip_roundoff(y)?;
    }
    DensityField::new(grid, y)
}

/// `θ_m(s,t) = ∫ x^{m-1} dλ / ∫ x^{m-2} dλ` with `x = t + λ(s - t)`, by
/// Gauss–Legendre quadrature; `s, t > 0`.
pub fn theta_quadrature(s: f64, t: f64, m: f64) -> Result<f64> {
    check_exponent(m)?;
    if !(s > 0.0 && t > 0.0) {
        return Err(FpmeError::Domain("quadrature form needs s, t > 0".into()));
    }
    let rule = gauss_legendre(20);
    // graded panels toward the smaller endpoint
    let (lo, hi) = if s < t { (s, t) } else { (t, s) };
    let x = |l: f64| lo + l * (hi - lo);
    let mut num = 0.0;
    let mut den = 0.0;
    let mut a = 0.0;
    let mut b = 1e-12_f64.max(lo / hi * 1e-3).min(1.0);
    while a < 1.0 {
        num += integrate(|l| x(l).powf(m - 1.0), a, b, 2, &rule);
        den += integrate(|l| x(l).powf(m - 2.0), a, b, 2, &rule);
        a = b;
        b = (b * 4.0).min(1.0);
    }
    Ok(num / den)
}
