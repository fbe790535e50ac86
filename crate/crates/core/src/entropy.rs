//! Rényi entropy `U_m(ρ) = ∫ U_m(ρ(x)) dx` and the associated Fisher
//! information.
//!
//! `U_1(s) = s log s`, `U_m(s) = s^m/(m-1)` for `m ≠ 1`. The Fisher
//! information carries the factor `½` over ordered pairs for every `m`,
//! so that `d/dt U_m = -I_m` along the semidiscrete flow.

use crate::error::{FpmeError, Result};
use crate::grid::{check_grids, DensityField};
use crate::kernel::KernelMatrix;
use crate::means::check_exponent;

/// Entropy density `U_m(s)`.
pub fn u_m(s: f64, m: f64) -> Result<f64> {
    check_exponent(m)?;
    if !(s >= 0.0) {
        return Err(FpmeError::Domain(format!("U_m requires s ≥ 0, got {s}")));
    }
    Ok(u_m_unchecked(s, m))
}

#[inline]
pub(crate) fn u_m_unchecked(s: f64, m: f64) -> f64 {
    if m == 1.0 {
        if s == 0.0 {
            0.0
        } else {
            s * s.ln()
        }
    } else {
        s.powf(m) / (m - 1.0)
    }
}

/// `U_m'(s)`: `log s + 1` for `m = 1`, `(m/(m-1)) s^{m-1}` otherwise.
pub fn u_m_prime(s: f64, m: f64) -> Result<f64> {
    check_exponent(m)?;
    if !(s >= 0.0) || (s == 0.0 && m <= 1.0) {
        return Err(FpmeError::Domain(format!(
            "U_m' is singular or undefined at s = {s} for m = {m}"
        )));
    }
    Ok(u_m_prime_unchecked(s, m))
}

#[inline]
pub(crate) fn u_m_prime_unchecked(s: f64, m: f64) -> f64 {
    if m == 1.0 {
        s.ln() + 1.0
    } else {
        m / (m - 1.0) * s.powf(m - 1.0)
    }
}

/// `U_m''(s) = m s^{m-2}` (`1/s` for `m = 1`).
#[inline]
pub(crate) fn u_m_second_unchecked(s: f64, m: f64) -> f64 {
    if m == 1.0 {
        1.0 / s
    } else {
        m * s.powf(m - 2.0)
    }
}

/// `Σ_i U_m(ρ_i) h^d`.
pub fn entropy(rho: &DensityField, m: f64) -> Result<f64> {
    check_exponent(m)?;
    let hd = rho.grid().cell_volume();
    Ok(rho.values().iter().map(|&s| u_m_unchecked(s, m)).sum::<f64>() * hd)
}

/// `I_m(ρ) = ½ Σ_{i≠j} (m/(m-1)) ∇̄(ρ^{m-1}) ∇̄(ρ^m) K_ij h^{2d}`, with
/// `∇̄ρ ∇̄log ρ` in place of the product for `m = 1`.
pub fn fisher_information(rho: &DensityField, m: f64, kernel: &KernelMatrix) -> Result<f64> {
    check_exponent(m)?;
    check_grids(rho.grid(), kernel.grid())?;
    if m <= 1.0 && rho.min_value() <= 0.0 {
        return Err(FpmeError::Domain(
            "Fisher information requires a strictly positive density for m ≤ 1".into(),
        ));
    }
    let grid = rho.grid();
    let n = grid.cells();
    let hd = grid.cell_volume();
    let v = rho.values();
    let (a, b): (Vec<f64>, Vec<f64>) = if m == 1.0 {
        (v.to_vec(), v.iter().map(|s| s.ln()).collect())
    } else {
        (
            v.iter().map(|s| s.powf(m - 1.0)).collect(),
            v.iter().map(|s| s.powf(m)).collect(),
        )
    };
    let prefactor = if m == 1.0 { 1.0 } else { m / (m - 1.0) };
    let upper = kernel.upper();
    let mut total = 0.0;
    let mut p = 0;
    for i in 0..n {
        for j in i + 1..n {
            total += (a[j] - a[i]) * (b[j] - b[i]) * upper[p];
            p += 1;
        }
    }
    Ok(prefactor * total * hd * hd)
}
