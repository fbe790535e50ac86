//! The non-local kinetic action.
//!
//! A momentum field `V` is the density of `ν` with respect to the kernel pair
//! measure `K_ij h^{2d}`. The action is
//!
//! `A(ρ, V) = ½ Σ_{i≠j} V_ij² / θ_m(ρ_i, ρ_j) · K_ij h^{2d}`
//!
//! with `0²/0 = 0`; a nonzero flux across a pair with `θ_m = 0` has infinite
//! action.

use crate::error::{FpmeError, Result};
use crate::grid::{cell_distance, check_grids, DensityField, NodeField, PairField};
use crate::kernel::{comp_estimate_constant, KernelMatrix};
use crate::means::{check_exponent, theta_jet, theta_unchecked};

/// Action value, possibly infinite.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ActionValue {
    value: f64,
    finite: bool,
}

impl ActionValue {
    pub fn finite(value: f64) -> Self {
        ActionValue { value, finite: true }
    }

    pub fn infinite() -> Self {
        ActionValue {
            value: f64::INFINITY,
            finite: false,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.finite
    }

    /// The value, `None` when infinite.
    pub fn value(&self) -> Option<f64> {
        self.finite.then_some(self.value)
    }

    pub fn value_or_inf(&self) -> f64 {
        self.value
    }
}

fn check_inputs(rho: &DensityField, v: &PairField, kernel: &KernelMatrix, m: f64) -> Result<()> {
    check_exponent(m)?;
    check_grids(rho.grid(), v.grid())?;
    check_grids(rho.grid(), kernel.grid())
}

/// `A(ρ, V)` for the grid density `ρ` and momentum `V`.
pub fn action(rho: &DensityField, v: &PairField, kernel: &KernelMatrix, m: f64) -> Result<ActionValue> {
    check_inputs(rho, v, kernel, m)?;
    let grid = rho.grid();
    let n = grid.cells();
    let hd = grid.cell_volume();
    let r = rho.values();
    let (vu, ku) = (v.upper(), kernel.upper());
    let mut total = 0.0;
    let mut p = 0;
    for i in 0..n {
        for j in i + 1..n {
            let flux = vu[p];
            if flux != 0.0 {
                let theta = theta_unchecked(r[i], r[j], m);
                if theta == 0.0 {
                    return Ok(ActionValue::infinite());
                }
                total += flux * flux / theta * ku[p];
            }
            p += 1;
        }
    }
    Ok(ActionValue::finite(total * hd * hd))
}

/// Gradients of `A` with respect to `ρ` (per cell) and to the stored
/// upper-triangle momenta `V_ij`, `i < j`.
pub fn action_gradients(
    rho: &DensityField,
    v: &PairField,
    kernel: &KernelMatrix,
    m: f64,
) -> Result<(NodeField, PairField)> {
    check_inputs(rho, v, kernel, m)?;
    let grid = *rho.grid();
    let n = grid.cells();
    let hd2 = grid.cell_volume() * grid.cell_volume();
    let r = rho.values();
    let (vu, ku) = (v.upper(), kernel.upper());
    let mut grad_rho = vec![0.0; n];
    let mut grad_v = vec![0.0; vu.len()];
    let mut p = 0;
    for i in 0..n {
        for j in i + 1..n {
            let flux = vu[p];
            if flux != 0.0 {
                let jet = theta_jet(r[i], r[j], m)?;
                if jet.value == 0.0 {
                    return Err(FpmeError::Domain(format!(
                        "nonzero momentum across vacuum pair ({i}, {j})"
                    )));
                }
                let w = ku[p] * hd2;
                grad_v[p] = 2.0 * flux / jet.value * w;
                let q = flux * flux / (jet.value * jet.value) * w;
                grad_rho[i] -= q * jet.ds;
                grad_rho[j] -= q * jet.dt;
            }
            p += 1;
        }
    }
    Ok((NodeField::new(grid, grad_rho)?, PairField::from_upper(grid, grad_v)?))
}

/// Both sides of `Σ_{i≠j} d_T(x_i,x_j) |V_ij| K_ij h^{2d} ≤ C √A`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TransportEstimate {
    pub lhs: f64,
    pub rhs: f64,
}

impl TransportEstimate {
    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs * (1.0 + 1e-12) + 1e-300
    }
}

/// First moment of `|ν|` against the torus distance, and its bound by the
/// square root of the action.
pub fn transport_estimate(
    rho: &DensityField,
    v: &PairField,
    kernel: &KernelMatrix,
    m: f64,
) -> Result<TransportEstimate> {
    let a = action(rho, v, kernel, m)?;
    let c = comp_estimate_constant(kernel);
    Ok(transport_estimate_with_constant(v, kernel, a, c))
}

pub(crate) fn transport_estimate_with_constant(
    v: &PairField,
    kernel: &KernelMatrix,
    a: ActionValue,
    c: f64,
) -> TransportEstimate {
    let grid = *kernel.grid();
    let n = grid.cells();
    let hd2 = grid.cell_volume() * grid.cell_volume();
    let (vu, ku) = (v.upper(), kernel.upper());
    let mut lhs = 0.0;
    let mut p = 0;
    for i in 0..n {
        for j in i + 1..n {
            if vu[p] != 0.0 {
                lhs += cell_distance(&grid, i, j) * vu[p].abs() * ku[p];
            }
            p += 1;
        }
    }
    // ordered pairs count each unordered pair twice
    TransportEstimate {
        lhs: 2.0 * lhs * hd2,
        rhs: c * a.value_or_inf().sqrt(),
    }
}
