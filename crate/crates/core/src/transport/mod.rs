//! The non-local transport distance `W(μ0, μ1)` and its geodesics.
//!
//! A discrete path has node densities `ρ^0..ρ^L` and interval momenta
//! `V^1..V^L` linked by the continuity equation
//! `(ρ^k - ρ^{k-1})/Δt + div V^k = 0`, with `div V_i = Σ_j V_ij K_ij h^d`. The
//! squared distance is the minimum of `T·Σ_k Δt A(ρ̄^k, V^k)` over such paths on
//! `[0, T]`, where `ρ̄^k` is the interval average. The result is independent of
//! `T`.

mod newton;
mod w1;

use serde::{Deserialize, Serialize};

use crate::action::ActionValue;
use crate::error::{FpmeError, Result};
use crate::grid::{check_grids, DensityField, GridSpec, PairField};
use crate::kernel::KernelMatrix;
use crate::means::{check_exponent, theta_unchecked};

pub(crate) use newton::{initial_nodes, minimize, NewtonSettings, PathProblem};
pub use w1::{w1_kantorovich, W1_MAX_CELLS};

/// Mass agreement required between endpoints.
pub const MASS_TOLERANCE: f64 = 1e-9;

/// Starting path for the optimizer.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitMode {
    /// `ρ^k = (1 - k/L) ρ0 + (k/L) ρ1`.
    Linear,
    /// Every node equal to the start density.
    StayPut,
    /// Linear interpolation with seeded multiplicative noise on free nodes.
    Perturbed { seed: u64, amplitude: f64 },
}

/// Discretization and stopping parameters for path optimization.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Number of time intervals `L`.
    pub intervals: usize,
    pub max_iterations: usize,
    /// Required `ℓ∞` continuity residual of the returned path.
    pub constraint_tol: f64,
    /// Newton stop: half the squared decrement relative to the objective.
    pub objective_tol: f64,
    /// Lower bound kept on every density.
    pub floor: f64,
    pub init: InitMode,
    /// Time horizon `T`.
    pub horizon: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            intervals: 16,
            max_iterations: 5000,
            constraint_tol: 1e-9,
            objective_tol: 1e-12,
            floor: 1e-10,
            init: InitMode::Linear,
            horizon: 1.0,
        }
    }
}

impl SolverConfig {
    pub fn with_intervals(mut self, intervals: usize) -> Self {
        self.intervals = intervals;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if self.intervals == 0 {
            return Err(FpmeError::InvalidConfig("at least one time interval is required".into()));
        }
        if !positive(self.constraint_tol) || !positive(self.objective_tol) || !positive(self.horizon) {
            return Err(FpmeError::InvalidConfig(
                "tolerances and horizon must be positive".into(),
            ));
        }
        if !(self.floor >= 0.0) || self.floor >= 1e-3 {
            return Err(FpmeError::InvalidConfig(format!("density floor {} out of range", self.floor)));
        }
        if let InitMode::Perturbed { amplitude, .. } = self.init {
            if !(0.0..1.0).contains(&amplitude) {
                return Err(FpmeError::InvalidConfig("perturbation amplitude must lie in [0, 1)".into()));
            }
        }
        Ok(())
    }

    pub(crate) fn newton(&self) -> NewtonSettings {
        NewtonSettings {
            max_iterations: self.max_iterations,
            objective_tol: self.objective_tol,
            floor: self.floor,
        }
    }
}

/// A discrete path: node densities and interval momenta.
#[derive(Clone, Debug, PartialEq)]
pub struct PathVariables {
    pub nodes: Vec<DensityField>,
    pub momenta: Vec<PairField>,
    pub dt: f64,
}

impl PathVariables {
    pub fn grid(&self) -> &GridSpec {
        self.nodes[0].grid()
    }

    pub fn intervals(&self) -> usize {
        self.momenta.len()
    }

    /// `max_{k,i} |(ρ^k_i - ρ^{k-1}_i)/Δt + (div V^k)_i|`.
    pub fn continuity_residual(&self, kernel: &KernelMatrix) -> Result<f64> {
        check_grids(self.grid(), kernel.grid())?;
        let mut worst: f64 = 0.0;
        for k in 1..self.nodes.len() {
            let div = crate::grid::discrete_divergence(&self.momenta[k - 1], kernel)?;
            let (a, c) = (self.nodes[k - 1].values(), self.nodes[k].values());
            for i in 0..a.len() {
                worst = worst.max(((c[i] - a[i]) / self.dt + div.values()[i]).abs());
            }
        }
        Ok(worst)
    }

    /// Per-interval action `A(ρ̄^k, V^k)`.
    pub fn actions(&self, kernel: &KernelMatrix, m: f64) -> Result<Vec<ActionValue>> {
        (1..self.nodes.len())
            .map(|k| {
                let rbar = midpoint(&self.nodes[k - 1], &self.nodes[k])?;
                crate::action::action(&rbar, &self.momenta[k - 1], kernel, m)
            })
            .collect()
    }
}

fn midpoint(a: &DensityField, b: &DensityField) -> Result<DensityField> {
    DensityField::new(
        *a.grid(),
        a.values().iter().zip(b.values()).map(|(x, y)| 0.5 * (x + y)).collect(),
    )
}

/// Outcome of a distance computation.
#[derive(Clone, Debug)]
pub struct TransportResult {
    pub distance: f64,
    /// Optimal value of `T·Σ Δt A^k`, equal to `distance²`.
    pub objective: f64,
    pub path: PathVariables,
    /// Action per interval, reparametrized to unit time so that its mean is
    /// `distance²`.
    pub speed_profile: Vec<f64>,
    pub iterations: usize,
    /// Largest reduced gradient entry at the returned iterate.
    pub stationarity: f64,
    pub constraint_residual: f64,
    pub converged: bool,
    /// Objective after each accepted iteration.
    pub history: Vec<f64>,
}

pub(crate) fn check_pair(rho0: &DensityField, rho1: &DensityField, kernel: &KernelMatrix) -> Result<()> {
    check_grids(rho0.grid(), rho1.grid())?;
    check_grids(rho0.grid(), kernel.grid())?;
    for (name, r) in [("start", rho0), ("end", rho1)] {
        if (r.mass() - 1.0).abs() > MASS_TOLERANCE {
            return Err(FpmeError::MassMismatch(format!(
                "{name} density has mass {} (unit mass required)",
                r.mass()
            )));
        }
    }
    Ok(())
}

/// Builds momenta `V = θ_m(ρ̄) ∇̄φ` from interval potentials.
pub(crate) fn momenta_from_potentials(
    nodes: &[DensityField],
    potentials: &[Vec<f64>],
    m: f64,
) -> Vec<PairField> {
    potentials
        .iter()
        .enumerate()
        .map(|(k, phi)| {
            let (a, c) = (nodes[k].values(), nodes[k + 1].values());
            PairField::from_fn(*nodes[0].grid(), |i, j| {
                let theta = theta_unchecked(0.5 * (a[i] + c[i]), 0.5 * (a[j] + c[j]), m);
                theta * (phi[j] - phi[i])
            })
        })
        .collect()
}

/// `W(ρ0, ρ1)` by minimizing the discrete path action.
pub fn solve_distance(
    rho0: &DensityField,
    rho1: &DensityField,
    kernel: &KernelMatrix,
    m: f64,
    cfg: &SolverConfig,
) -> Result<TransportResult> {
    cfg.validate()?;
    check_exponent(m)?;
    check_pair(rho0, rho1, kernel)?;
    let grid = *rho0.grid();
    let a = rho0.floored(cfg.floor)?;
    let b = rho1.floored(cfg.floor)?;
    let l = cfg.intervals;
    let horizon = cfg.horizon;
    let dt = horizon / l as f64;
    let problem = PathProblem {
        kernel,
        m,
        intervals: l,
        dt,
        weight: horizon,
        free_end: false,
    };
    let mut nodes = initial_nodes(a.values(), b.values(), l, cfg.init, grid.cell_volume());
    nodes[0] = a.values().to_vec();
    nodes[l] = b.values().to_vec();
    let out = minimize(&problem, nodes, &cfg.newton())?;

    let (_, interval_values) = problem.evaluate(&out.nodes)?;
    let potentials = problem.potentials(&out.nodes)?;
    let fields: Vec<DensityField> = out
        .nodes
        .into_iter()
        .map(|v| DensityField::new(grid, v))
        .collect::<Result<_>>()?;
    let momenta = momenta_from_potentials(&fields, &potentials, m);
    let path = PathVariables {
        nodes: fields,
        momenta,
        dt,
    };
    let constraint_residual = path.continuity_residual(kernel)?;
    // Δt·A on [0,T] becomes A·T² on [0,1]
    let speed_profile = interval_values.iter().map(|v| v / dt * horizon * horizon).collect();
    let objective = out.objective.max(0.0);
    Ok(TransportResult {
        distance: objective.sqrt(),
        objective,
        path,
        speed_profile,
        iterations: out.iterations,
        stationarity: out.gradient_norm,
        constraint_residual,
        converged: out.converged && constraint_residual <= cfg.constraint_tol,
        history: out.history,
    })
}

/// The per-interval actions of a solved path.
pub fn geodesic_speed_profile(result: &TransportResult) -> Vec<f64> {
    result.speed_profile.clone()
}

/// `max_k |a_k - mean| / mean`; zero for a constant or vanishing profile.
pub fn speed_flatness(profile: &[f64]) -> f64 {
    if profile.is_empty() {
        return 0.0;
    }
    let mean = profile.iter().sum::<f64>() / profile.len() as f64;
    if mean <= 0.0 {
        return 0.0;
    }
    profile.iter().map(|a| (a - mean).abs()).fold(0.0, f64::max) / mean
}

/// Distances computed on the horizon `T` and on `[0, 1]`.
pub fn rescaling_check(
    rho0: &DensityField,
    rho1: &DensityField,
    kernel: &KernelMatrix,
    m: f64,
    cfg: &SolverConfig,
    horizon: f64,
) -> Result<(f64, f64)> {
    let scaled = SolverConfig { horizon, ..*cfg };
    let unit = SolverConfig { horizon: 1.0, ..*cfg };
    let wt = solve_distance(rho0, rho1, kernel, m, &scaled)?.distance;
    let w1 = solve_distance(rho0, rho1, kernel, m, &unit)?.distance;
    Ok((wt, w1))
}

/// `W(a,b) + W(b,c) - W(a,c)`.
pub fn triangle_inequality_probe(
    a: &DensityField,
    b: &DensityField,
    c: &DensityField,
    kernel: &KernelMatrix,
    m: f64,
    cfg: &SolverConfig,
) -> Result<f64> {
    let ab = solve_distance(a, b, kernel, m, cfg)?.distance;
    let bc = solve_distance(b, c, kernel, m, cfg)?.distance;
    let ac = solve_distance(a, c, kernel, m, cfg)?.distance;
    Ok(ab + bc - ac)
}
