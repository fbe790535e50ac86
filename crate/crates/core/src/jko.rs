//! Minimizing movements for the entropy `U_m` in the distance `W`.
//!
//! Each step solves
//! `ρ^{n+1} ∈ argmin_ρ W²(ρ^n, ρ)/(2τ) + U_m(ρ)`
//! as a single space-time program whose last node is free.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::entropy::{entropy, fisher_information};
use crate::error::{FpmeError, Result};
use crate::grid::{check_grids, DensityField};
use crate::io::store_density;
use crate::kernel::KernelMatrix;
use crate::means::check_exponent;
use crate::transport::{
    check_pair, initial_nodes, minimize, solve_distance, InitMode, PathProblem, SolverConfig,
};

/// Step size, step count and inner solver settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JkoConfig {
    pub tau: f64,
    pub steps: usize,
    pub m: f64,
    pub inner: SolverConfig,
    /// Allowed violation of the per-step energy inequality.
    pub entropy_tol: f64,
}

impl JkoConfig {
    /// Defaults: 8 inner intervals started from the stay-put path.
    pub fn new(tau: f64, steps: usize, m: f64) -> Self {
        JkoConfig {
            tau,
            steps,
            m,
            inner: SolverConfig {
                intervals: 8,
                init: InitMode::StayPut,
                ..SolverConfig::default()
            },
            entropy_tol: 1e-6,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return Err(FpmeError::InvalidConfig(format!("tau must be positive, got {}", self.tau)));
        }
        if self.steps == 0 {
            return Err(FpmeError::InvalidConfig("at least one step is required".into()));
        }
        if !(self.entropy_tol >= 0.0) {
            return Err(FpmeError::InvalidConfig("entropy tolerance must be nonnegative".into()));
        }
        check_exponent(self.m)?;
        self.inner.validate()
    }
}

/// Diagnostics of one step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    pub step: usize,
    pub time: f64,
    pub mass: f64,
    /// Entropy after the step.
    pub entropy: f64,
    pub entropy_before: f64,
    pub fisher: f64,
    /// `W²` between consecutive iterates.
    pub w2_step: f64,
    pub min_density: f64,
    pub inner_iterations: usize,
    /// Largest reduced gradient entry of the inner program.
    pub residual: f64,
    pub converged: bool,
}

impl StepDiagnostics {
    /// `U(ρ^{n+1}) + W²/(2τ) - U(ρ^n)`; nonpositive for an exact minimizer.
    pub fn energy_excess(&self, tau: f64) -> f64 {
        self.entropy + self.w2_step / (2.0 * tau) - self.entropy_before
    }
}

/// The piecewise-constant minimizing-movement curve.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub tau: f64,
    pub m: f64,
    /// `ρ^0..ρ^S` at times `nτ`.
    pub snapshots: Vec<DensityField>,
    /// One row per step, plus a row for the initial datum at index 0.
    pub diagnostics: Vec<StepDiagnostics>,
    /// Error message of the step that aborted the flow, if any.
    pub failure: Option<String>,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        (0..self.snapshots.len()).map(|n| n as f64 * self.tau).collect()
    }

    pub fn completed(&self) -> bool {
        self.failure.is_none()
    }

    /// The interpolant `ρ_τ(t) = ρ^n` for `t ∈ [nτ, (n+1)τ)`.
    pub fn at_time(&self, t: f64) -> &DensityField {
        let n = (t / self.tau + 1e-9).floor().max(0.0) as usize;
        &self.snapshots[n.min(self.snapshots.len() - 1)]
    }

    /// Writes `step_%06d.fpme` snapshots and `diagnostics.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        for (n, s) in self.snapshots.iter().enumerate() {
            store_density(s, &dir.join(format!("step_{n:06}.fpme")))?;
        }
        let mut csv = String::from("step,time,mass,entropy,fisher,w2_step,min_density,inner_iterations,residual\n");
        for d in &self.diagnostics {
            writeln!(
                csv,
                "{},{:e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{},{:e}",
                d.step, d.time, d.mass, d.entropy, d.fisher, d.w2_step, d.min_density, d.inner_iterations, d.residual
            )
            .expect("writing to a string");
        }
        fs::write(dir.join("diagnostics.csv"), csv)?;
        Ok(())
    }
}

/// `Φ(τ, ρ_prev; ρ) = W²(ρ_prev, ρ)/(2τ) + U_m(ρ)`.
pub fn phi(
    tau: f64,
    rho_prev: &DensityField,
    rho: &DensityField,
    kernel: &KernelMatrix,
    m: f64,
    cfg: &SolverConfig,
) -> Result<f64> {
    if !(tau > 0.0) {
        return Err(FpmeError::InvalidConfig(format!("tau must be positive, got {tau}")));
    }
    let w = solve_distance(rho_prev, rho, kernel, m, cfg)?;
    Ok(w.objective / (2.0 * tau) + entropy(rho, m)?)
}

fn initial_row(rho: &DensityField, kernel: &KernelMatrix, m: f64) -> Result<StepDiagnostics> {
    let u = entropy(rho, m)?;
    Ok(StepDiagnostics {
        step: 0,
        time: 0.0,
        mass: rho.mass(),
        entropy: u,
        entropy_before: u,
        fisher: fisher_information(rho, m, kernel)?,
        w2_step: 0.0,
        min_density: rho.min_value(),
        inner_iterations: 0,
        residual: 0.0,
        converged: true,
    })
}

/// One minimizing-movement step from `rho_prev`.
pub fn jko_step(
    rho_prev: &DensityField,
    kernel: &KernelMatrix,
    cfg: &JkoConfig,
) -> Result<(DensityField, StepDiagnostics)> {
    cfg.validate()?;
    check_pair(rho_prev, rho_prev, kernel)?;
    let grid = *rho_prev.grid();
    let start = rho_prev.floored(cfg.inner.floor)?;
    let l = cfg.inner.intervals;
    let problem = PathProblem {
        kernel,
        m: cfg.m,
        intervals: l,
        dt: 1.0 / l as f64,
        weight: 1.0 / (2.0 * cfg.tau),
        free_end: true,
    };
    let mut nodes = initial_nodes(start.values(), start.values(), l, cfg.inner.init, grid.cell_volume());
    nodes[0] = start.values().to_vec();
    let out = minimize(&problem, nodes, &cfg.inner.newton())?;
    let (_, values) = problem.evaluate(&out.nodes)?;
    let next = DensityField::new(grid, out.nodes[l].clone())?;
    let u_next = entropy(&next, cfg.m)?;
    let diag = StepDiagnostics {
        step: 1,
        time: cfg.tau,
        mass: next.mass(),
        entropy: u_next,
        entropy_before: entropy(&start, cfg.m)?,
        fisher: fisher_information(&next, cfg.m, kernel)?,
        w2_step: values.iter().sum(),
        min_density: next.min_value(),
        inner_iterations: out.iterations,
        residual: out.gradient_norm,
        converged: out.converged,
    };
    Ok((next, diag))
}

/// Runs `cfg.steps` steps. A failing step ends the run early; the partial
/// trajectory is returned with [`Trajectory::failure`] set.
pub fn jko_flow(rho0: &DensityField, kernel: &KernelMatrix, cfg: &JkoConfig) -> Result<Trajectory> {
    cfg.validate()?;
    check_grids(rho0.grid(), kernel.grid())?;
    let start = rho0.floored(cfg.inner.floor)?;
    let mut traj = Trajectory {
        tau: cfg.tau,
        m: cfg.m,
        diagnostics: vec![initial_row(&start, kernel, cfg.m)?],
        snapshots: vec![start],
        failure: None,
    };
    for step in 1..=cfg.steps {
        let prev = traj.snapshots.last().expect("nonempty");
        match jko_step(prev, kernel, cfg) {
            Ok((next, mut diag)) => {
                diag.step = step;
                diag.time = step as f64 * cfg.tau;
                traj.snapshots.push(next);
                traj.diagnostics.push(diag);
            }
            Err(e) => {
                traj.failure = Some(format!("step {step}: {e}"));
                break;
            }
        }
    }
    Ok(traj)
}

/// Entropy decrement rate against the Fisher information, per step.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DissipationRow {
    pub step: usize,
    /// `(U(ρ^n) - U(ρ^{n+1}))/τ`.
    pub decrement_rate: f64,
    /// `I_m(ρ^n)`.
    pub fisher: f64,
}

impl DissipationRow {
    /// `decrement_rate / fisher`, `None` when the Fisher information vanishes.
    pub fn ratio(&self) -> Option<f64> {
        (self.fisher > 0.0).then(|| self.decrement_rate / self.fisher)
    }
}

/// Compares the discrete entropy decay with the Fisher information; the
/// numbers are reported, not asserted.
pub fn dissipation_check(traj: &Trajectory) -> Result<Vec<DissipationRow>> {
    if traj.snapshots.len() < 3 {
        return Err(FpmeError::InvalidConfig(
            "dissipation check needs at least three snapshots".into(),
        ));
    }
    Ok(traj
        .diagnostics
        .windows(2)
        .map(|w| DissipationRow {
            step: w[1].step,
            decrement_rate: (w[0].entropy - w[1].entropy) / traj.tau,
            fisher: w[0].fisher,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use crate::kernel::{kernel_matrix, KernelConfig};
    use std::f64::consts::PI;

    fn cosine(n: usize) -> DensityField {
        let g = make_grid(1, n).unwrap();
        DensityField::from_fn(g, |x| 1.0 + 0.5 * (2.0 * PI * x[0]).cos()).unwrap()
    }

    #[test]
    fn uniform_is_a_fixed_point() {
        let g = make_grid(1, 12).unwrap();
        let k = kernel_matrix(&g, 0.5, &KernelConfig::default()).unwrap();
        for &m in &[0.5, 1.0, 2.0] {
            let u = DensityField::uniform(g);
            let (next, d) = jko_step(&u, &k, &JkoConfig::new(1e-2, 1, m)).unwrap();
            assert!(next.max_abs_difference(&u).unwrap() <= 1e-12);
            assert_eq!(d.w2_step, 0.0);
        }
    }

    #[test]
    fn energy_inequality_and_conservation() {
        let rho = cosine(12);
        let k = kernel_matrix(rho.grid(), 0.5, &KernelConfig::default()).unwrap();
        for &m in &[0.5, 1.0, 1.5, 2.0] {
            let cfg = JkoConfig::new(5e-3, 4, m);
            let traj = jko_flow(&rho, &k, &cfg).unwrap();
            assert!(traj.completed());
            assert_eq!(traj.snapshots.len(), 5);
            for d in &traj.diagnostics[1..] {
                assert!(d.converged);
                assert!((d.mass - 1.0).abs() < 1e-12);
                assert!(d.energy_excess(cfg.tau) <= 0.0, "m={m}: {}", d.energy_excess(cfg.tau));
                assert!(d.min_density > 0.0);
            }
            assert!(traj.diagnostics.windows(2).all(|w| w[1].entropy <= w[0].entropy));
            let rows = dissipation_check(&traj).unwrap();
            assert!(rows.iter().all(|r| r.decrement_rate >= 0.0 && r.fisher >= 0.0));
        }
    }

    #[test]
    fn step_matches_phi_minimum() {
        let rho = cosine(8);
        let k = kernel_matrix(rho.grid(), 0.5, &KernelConfig::default()).unwrap();
        let cfg = JkoConfig::new(1e-2, 1, 1.0);
        let (next, d) = jko_step(&rho, &k, &cfg).unwrap();
        let at_min = phi(cfg.tau, &rho, &next, &k, 1.0, &cfg.inner.with_intervals(8)).unwrap();
        let stay = phi(cfg.tau, &rho, &rho, &k, 1.0, &cfg.inner).unwrap();
        assert!(at_min <= stay);
        assert!((at_min - (d.entropy + d.w2_step / (2.0 * cfg.tau))).abs() < 1e-9);
        assert!((stay - entropy(&rho, 1.0).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn random_inner_starts_agree() {
        let rho = cosine(8);
        let k = kernel_matrix(rho.grid(), 0.5, &KernelConfig::default()).unwrap();
        let mut a = JkoConfig::new(1e-2, 1, 2.0);
        let mut b = a;
        a.inner.init = InitMode::Perturbed { seed: 1, amplitude: 0.3 };
        b.inner.init = InitMode::Perturbed { seed: 2, amplitude: 0.3 };
        let (ra, _) = jko_step(&rho, &k, &a).unwrap();
        let (rb, _) = jko_step(&rho, &k, &b).unwrap();
        assert!(ra.l1_distance(&rb).unwrap() < 1e-8);
    }

    #[test]
    fn interpolant_and_output() {
        let rho = cosine(8);
        let k = kernel_matrix(rho.grid(), 0.5, &KernelConfig::default()).unwrap();
        let cfg = JkoConfig::new(4e-3, 3, 1.0);
        let traj = jko_flow(&rho, &k, &cfg).unwrap();
        assert_eq!(traj.times(), vec![0.0, 4e-3, 8e-3, 3.0 * 4e-3]);
        assert!(std::ptr::eq(traj.at_time(0.0079), &traj.snapshots[1]));
        assert!(std::ptr::eq(traj.at_time(0.008), &traj.snapshots[2]));
        assert!(std::ptr::eq(traj.at_time(1.0), &traj.snapshots[3]));
        let dir = tempfile::tempdir().unwrap();
        traj.write(dir.path()).unwrap();
        let csv = std::fs::read_to_string(dir.path().join("diagnostics.csv")).unwrap();
        assert_eq!(csv.lines().count(), 5);
        assert!(csv.starts_with("step,time,mass,entropy,fisher,w2_step,min_density,inner_iterations,residual"));
        assert!(dir.path().join("step_000003.fpme").exists());
    }

    #[test]
    fn config_validation() {
        assert!(JkoConfig::new(0.0, 1, 1.0).validate().is_err());
        assert!(JkoConfig::new(1e-3, 0, 1.0).validate().is_err());
        assert!(JkoConfig::new(1e-3, 1, 2.5).validate().is_err());
    }
}
