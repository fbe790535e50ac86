//! Reduced Newton method for discrete space-time paths.
//!
//! For fixed node densities the momentum on each interval is eliminated
//! exactly: with `ρ̄ = (a + c)/2`, `b = (c - a)/Δt` and the weighted graph
//! Laplacian `W(ρ̄)` built from `w_ij = θ_m(ρ̄_i, ρ̄_j) K_ij h^{2d}`, the optimal
//! momentum is `V = θ_m ∇̄φ` with `W φ = b h^d`, and the interval action is
//! `A = φ·b h^d`. The remaining objective in the node densities is convex and
//! smooth in the interior; it is minimized by Newton's method with a
//! block-tridiagonal Hessian, one block per node, after eliminating the last
//! cell of every node to enforce mass conservation.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::entropy::{u_m_prime_unchecked, u_m_second_unchecked, u_m_unchecked};
use crate::error::{FpmeError, Result};
use crate::kernel::KernelMatrix;
use crate::means::{theta_jet_unchecked, theta_unchecked};

use super::InitMode;

/// The discrete path problem
/// `min weight·Σ_k Δt A(ρ̄^k, V^k) [+ U_m(ρ^L)]`.
pub(crate) struct PathProblem<'a> {
    pub kernel: &'a KernelMatrix,
    pub m: f64,
    pub intervals: usize,
    pub dt: f64,
    pub weight: f64,
    /// Free last node carrying the entropy term.
    pub free_end: bool,
}

pub(crate) struct NewtonSettings {
    pub max_iterations: usize,
    pub objective_tol: f64,
    pub floor: f64,
}

pub(crate) struct NewtonOutcome {
    pub nodes: Vec<Vec<f64>>,
    pub objective: f64,
    pub history: Vec<f64>,
    pub iterations: usize,
    pub gradient_norm: f64,
    pub converged: bool,
}

struct IntervalSolve {
    rbar: Vec<f64>,
    phi: Vec<f64>,
    chol: Cholesky<f64, Dyn>,
    /// `Δt·A` for this interval.
    value: f64,
}

impl<'a> PathProblem<'a> {
    fn cells(&self) -> usize {
        self.kernel.grid().cells()
    }

    fn hd(&self) -> f64 {
        self.kernel.grid().cell_volume()
    }

    /// `K_ij h^{2d}` over the packed upper triangle.
    fn pair_weights(&self) -> Vec<f64> {
        let hd = self.hd();
        self.kernel.upper().iter().map(|k| k * hd * hd).collect()
    }

    fn solve_interval(&self, kh2: &[f64], a: &[f64], c: &[f64]) -> Result<IntervalSolve> {
        let n = self.cells();
        let hd = self.hd();
        let rbar: Vec<f64> = a.iter().zip(c).map(|(x, y)| 0.5 * (x + y)).collect();
        let mut w = DMatrix::<f64>::zeros(n, n);
        let mut p = 0;
        for i in 0..n {
            for j in i + 1..n {
                let wij = theta_unchecked(rbar[i], rbar[j], self.m) * kh2[p];
                w[(i, j)] = -wij;
                w[(j, i)] = -wij;
                w[(i, i)] += wij;
                w[(j, j)] += wij;
                p += 1;
            }
        }
        // the constant mode is the kernel of W; shift it away
        let alpha = w.trace() / n as f64;
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(FpmeError::Numerical("degenerate interval weights".into()));
        }
        w.add_scalar_mut(alpha);
        let chol = w
            .cholesky()
            .ok_or_else(|| FpmeError::Numerical("interval Laplacian is not positive definite".into()))?;
        let rhs = DVector::from_iterator(n, a.iter().zip(c).map(|(x, y)| (y - x) * hd / self.dt));
        let phi = chol.solve(&rhs);
        let value = phi.iter().zip(a.iter().zip(c)).map(|(f, (x, y))| f * (y - x)).sum::<f64>() * hd;
        Ok(IntervalSolve {
            rbar,
            phi: phi.as_slice().to_vec(),
            chol,
            value,
        })
    }

    fn solve_all(&self, kh2: &[f64], nodes: &[Vec<f64>]) -> Result<Vec<IntervalSolve>> {
        (1..=self.intervals)
            .into_par_iter()
            .map(|k| self.solve_interval(kh2, &nodes[k - 1], &nodes[k]))
            .collect()
    }

    fn entropy_term(&self, end: &[f64]) -> f64 {
        if self.free_end {
            end.iter().map(|&s| u_m_unchecked(s, self.m)).sum::<f64>() * self.hd()
        } else {
            0.0
        }
    }

    fn objective_from(&self, solves: &[IntervalSolve], nodes: &[Vec<f64>]) -> f64 {
        let transport: f64 = solves.iter().map(|s| s.value).sum();
        self.weight * transport + self.entropy_term(&nodes[self.intervals])
    }

    /// Objective and per-interval `Δt·A^k` values.
    pub fn evaluate(&self, nodes: &[Vec<f64>]) -> Result<(f64, Vec<f64>)> {
        let kh2 = self.pair_weights();
        let solves = self.solve_all(&kh2, nodes)?;
        let j = self.objective_from(&solves, nodes);
        Ok((j, solves.iter().map(|s| s.value).collect()))
    }

    /// Potentials `φ^k` of the optimal momenta.
    pub fn potentials(&self, nodes: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let kh2 = self.pair_weights();
        Ok(self.solve_all(&kh2, nodes)?.into_iter().map(|s| s.phi).collect())
    }

    /// Gradient and Hessian blocks `(g_a, g_c, H_aa, H_ac, H_cc)` of one
    /// interval in full (unreduced) coordinates.
    fn interval_derivatives(&self, kh2: &[f64], s: &IntervalSolve) -> [DMatrix<f64>; 5] {
        let n = self.cells();
        let hd = self.hd();
        let dt = self.dt;
        let phi = &s.phi;
        let mut dvec = DMatrix::<f64>::zeros(n, 1);
        let mut smat = DMatrix::<f64>::zeros(n, n);
        let mut emat = DMatrix::<f64>::zeros(n, n);
        let mut p = 0;
        for i in 0..n {
            for j in i + 1..n {
                let jet = theta_jet_unchecked(s.rbar[i], s.rbar[j], self.m);
                let diff = phi[j] - phi[i];
                let q = diff * diff * kh2[p];
                dvec[i] += jet.ds * q;
                dvec[j] += jet.dt * q;
                smat[(i, i)] += jet.dss * q;
                smat[(j, j)] += jet.dtt * q;
                smat[(i, j)] += jet.dst * q;
                smat[(j, i)] += jet.dst * q;
                let eij = 2.0 * jet.ds * diff * kh2[p];
                let eji = -2.0 * jet.dt * diff * kh2[p];
                emat[(i, j)] += eij;
                emat[(i, i)] -= eij;
                emat[(j, i)] += eji;
                emat[(j, j)] -= eji;
                p += 1;
            }
        }
        let w = self.weight;
        let mut ga = DMatrix::<f64>::zeros(n, 1);
        let mut gc = DMatrix::<f64>::zeros(n, 1);
        for i in 0..n {
            ga[i] = w * (-2.0 * phi[i] * hd - 0.5 * dt * dvec[i]);
            gc[i] = w * (2.0 * phi[i] * hd - 0.5 * dt * dvec[i]);
        }
        // mixed derivatives of the Lagrangian with respect to (φ, x)
        let et = emat.transpose() * (-0.5 * dt);
        let mut g_a = et.clone();
        let mut g_c = et;
        for i in 0..n {
            g_a[(i, i)] -= 2.0 * hd;
            g_c[(i, i)] += 2.0 * hd;
        }
        let scale = 1.0 / (2.0 * dt);
        let pa = s.chol.solve(&g_a) * scale;
        let pc = s.chol.solve(&g_c) * scale;
        let lxx = smat * (-0.25 * dt);
        let haa = (&lxx + g_a.transpose() * &pa) * w;
        let hac = (&lxx + g_a.transpose() * &pc) * w;
        let hcc = (&lxx + g_c.transpose() * &pc) * w;
        [ga, gc, haa, hac, hcc]
    }
}

fn reduce_vector(g: &DMatrix<f64>) -> DVector<f64> {
    let n = g.nrows();
    let last = g[n - 1];
    DVector::from_iterator(n - 1, (0..n - 1).map(|p| g[p] - last))
}

fn reduce_matrix(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let l = n - 1;
    DMatrix::from_fn(l, l, |p, q| a[(p, q)] - a[(p, l)] - a[(l, q)] + a[(l, l)])
}

fn expand(x: &DVector<f64>) -> Vec<f64> {
    let mut full: Vec<f64> = x.iter().copied().collect();
    full.push(-x.iter().sum::<f64>());
    full
}

/// Solves the SPD block-tridiagonal system `H x = r`.
fn block_tridiagonal_solve(
    diag: &[DMatrix<f64>],
    upper: &[DMatrix<f64>],
    rhs: &[DVector<f64>],
) -> Option<Vec<DVector<f64>>> {
    let u = diag.len();
    let mut factors: Vec<Cholesky<f64, Dyn>> = Vec::with_capacity(u);
    let mut y: Vec<DVector<f64>> = Vec::with_capacity(u);
    for t in 0..u {
        let (d, r) = if t == 0 {
            (diag[0].clone(), rhs[0].clone())
        } else {
            let b = &upper[t - 1];
            let prev = &factors[t - 1];
            let dinv_b = prev.solve(b);
            let dinv_y = prev.solve(&y[t - 1]);
            (&diag[t] - b.transpose() * dinv_b, &rhs[t] - b.transpose() * dinv_y)
        };
        factors.push(d.cholesky()?);
        y.push(r);
    }
    let mut x = vec![DVector::zeros(0); u];
    for t in (0..u).rev() {
        let r = if t + 1 < u { &y[t] - &upper[t] * &x[t + 1] } else { y[t].clone() };
        x[t] = factors[t].solve(&r);
    }
    Some(x)
}

/// Initial node densities `ρ^0..ρ^L` for the given endpoints. The caller
/// pins any fixed end node afterwards.
pub(crate) fn initial_nodes(
    start: &[f64],
    end: &[f64],
    intervals: usize,
    mode: InitMode,
    hd: f64,
) -> Vec<Vec<f64>> {
    let linear = |k: usize| -> Vec<f64> {
        let s = k as f64 / intervals as f64;
        start.iter().zip(end).map(|(a, b)| (1.0 - s) * a + s * b).collect()
    };
    match mode {
        InitMode::Linear => (0..=intervals).map(linear).collect(),
        InitMode::StayPut => vec![start.to_vec(); intervals + 1],
        InitMode::Perturbed { seed, amplitude } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mass: f64 = start.iter().sum::<f64>() * hd;
            (0..=intervals)
                .map(|k| {
                    let mut node = linear(k);
                    if k > 0 {
                        for v in node.iter_mut() {
                            *v *= 1.0 + amplitude * rng.random_range(-1.0..1.0);
                        }
                        let now: f64 = node.iter().sum::<f64>() * hd;
                        node.iter_mut().for_each(|v| *v *= mass / now);
                    }
                    node
                })
                .collect()
        }
    }
}

/// Newton iterations on the free nodes; `nodes[0]` is fixed and so is the last
/// node unless the end is free.
pub(crate) fn minimize(
    problem: &PathProblem<'_>,
    mut nodes: Vec<Vec<f64>>,
    settings: &NewtonSettings,
) -> Result<NewtonOutcome> {
    let l = problem.intervals;
    let n = problem.cells();
    if n < 2 {
        return Err(FpmeError::InvalidConfig("at least two cells are required".into()));
    }
    let unknowns = if problem.free_end { l } else { l - 1 };
    let kh2 = problem.pair_weights();
    let hd = problem.hd();

    let mut solves = problem.solve_all(&kh2, &nodes)?;
    let mut objective = problem.objective_from(&solves, &nodes);
    let mut history = vec![objective];
    let mut gradient_norm = 0.0;
    let mut converged = unknowns == 0;
    let mut iterations = 0;

    while !converged && iterations < settings.max_iterations {
        let derivs: Vec<[DMatrix<f64>; 5]> = solves
            .par_iter()
            .map(|s| problem.interval_derivatives(&kh2, s))
            .collect();
        // assemble the reduced block-tridiagonal system over nodes 1..=unknowns
        let mut diag = Vec::with_capacity(unknowns);
        let mut upper = Vec::with_capacity(unknowns.saturating_sub(1));
        let mut grad = Vec::with_capacity(unknowns);
        for t in 1..=unknowns {
            let [_, gc, _, _, hcc] = &derivs[t - 1];
            let mut g = gc.clone();
            let mut h = hcc.clone();
            if t < l {
                let [ga, _, haa, hac, _] = &derivs[t];
                g += ga;
                h += haa;
                if t < unknowns {
                    upper.push(reduce_matrix(hac));
                }
            } else {
                // free end node: entropy term
                for i in 0..n {
                    let s = nodes[l][i];
                    g[i] += u_m_prime_unchecked(s, problem.m) * hd;
                    h[(i, i)] += u_m_second_unchecked(s, problem.m) * hd;
                }
            }
            grad.push(reduce_vector(&g));
            diag.push(reduce_matrix(&h));
        }
        gradient_norm = grad.iter().map(|g| g.amax()).fold(0.0, f64::max);
        let rhs: Vec<DVector<f64>> = grad.iter().map(|g| -g).collect();

        let mut step = block_tridiagonal_solve(&diag, &upper, &rhs);
        let mut shift = 0.0;
        while step.is_none() {
            let scale = diag.iter().map(|d| d.diagonal().amax()).fold(0.0, f64::max);
            shift = if shift == 0.0 { 1e-12 * scale } else { shift * 10.0 };
            if !(shift < scale * 1e6) || !shift.is_finite() {
                return Err(FpmeError::Numerical("Newton system could not be factored".into()));
            }
            let shifted: Vec<DMatrix<f64>> = diag
                .iter()
                .map(|d| d + DMatrix::<f64>::identity(d.nrows(), d.ncols()) * shift)
                .collect();
            step = block_tridiagonal_solve(&shifted, &upper, &rhs);
        }
        let step = step.expect("factored");
        let slope: f64 = grad.iter().zip(&step).map(|(g, x)| g.dot(x)).sum();
        let decrement = -slope;
        if !(decrement > 0.0) {
            converged = decrement == 0.0 || decrement.abs() <= settings.objective_tol * objective.abs();
            break;
        }
        let polish = 0.5 * decrement <= settings.objective_tol * objective.abs().max(1e-300);

        // full-space directions and the positivity cap
        let dirs: Vec<Vec<f64>> = step.iter().map(expand).collect();
        let mut smax: f64 = 1.0;
        for (t, d) in dirs.iter().enumerate() {
            for (v, dv) in nodes[t + 1].iter().zip(d) {
                if *dv < 0.0 {
                    smax = smax.min(0.95 * (v - settings.floor).max(0.0) / -dv);
                }
            }
        }
        let trial_at = |alpha: f64| -> Vec<Vec<f64>> {
            nodes
                .iter()
                .enumerate()
                .map(|(k, node)| {
                    if k == 0 || k > unknowns {
                        node.clone()
                    } else {
                        node.iter().zip(&dirs[k - 1]).map(|(v, d)| v + alpha * d).collect()
                    }
                })
                .collect()
        };
        if polish {
            // within tolerance: one last full step, kept only if it does not
            // increase the objective
            if smax >= 1.0 {
                let trial = trial_at(1.0);
                if let Ok(trial_solves) = problem.solve_all(&kh2, &trial) {
                    let value = problem.objective_from(&trial_solves, &trial);
                    if value <= objective {
                        nodes = trial;
                        objective = value;
                        history.push(objective);
                        iterations += 1;
                    }
                }
            }
            converged = true;
            break;
        }
        let mut alpha = smax;
        let mut accepted = None;
        for _ in 0..60 {
            if alpha <= 0.0 {
                break;
            }
            let trial = trial_at(alpha);
            if let Ok(trial_solves) = problem.solve_all(&kh2, &trial) {
                let value = problem.objective_from(&trial_solves, &trial);
                if value.is_finite() && value <= objective + 1e-4 * alpha * slope {
                    accepted = Some((trial, trial_solves, value));
                    break;
                }
            }
            alpha *= 0.5;
        }
        iterations += 1;
        match accepted {
            Some((trial, trial_solves, value)) => {
                nodes = trial;
                solves = trial_solves;
                objective = value;
                history.push(objective);
            }
            None => {
                // no representable decrease left: roundoff plateau
                converged = 0.5 * decrement <= 1e-8 * objective.abs().max(1e-300);
                break;
            }
        }
    }

    Ok(NewtonOutcome {
        nodes,
        objective,
        history,
        iterations,
        gradient_norm,
        converged,
    })
}
