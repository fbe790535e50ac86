//! Self-check suite over sampled instances, used by `fpme validate`.

use std::f64::consts::PI;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::action::{action, transport_estimate};
use crate::entropy::{entropy, u_m_prime};
use crate::error::Result;
use crate::grid::{discrete_divergence, discrete_gradient, make_grid, DensityField, GridSpec, NodeField, PairField};
use crate::jko::{jko_flow, jko_step, JkoConfig};
use crate::kernel::{apply_fractional_operator, fractional_constant, kernel_matrix, periodized_kernel, KernelConfig};
use crate::means::theta_m;
use crate::oracles::{integrate_semidiscrete, spectral_heat_flow, theta_quadrature};
use crate::transport::{rescaling_check, solve_distance, speed_flatness, SolverConfig};

/// Outcome of one check.
#[derive(Clone, Debug, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

/// Suite size and sampling seed.
#[derive(Clone, Copy, Debug)]
pub struct ValidateOptions {
    pub quick: bool,
    pub seed: u64,
}

type Check = fn(&ValidateOptions, &mut ChaCha8Rng) -> Result<(bool, String)>;

const CHECKS: &[(&str, Check)] = &[
    ("theta_m properties", theta_properties),
    ("theta_m quadrature form", theta_quadrature_check),
    ("kernel closed form", kernel_closed_form),
    ("kernel symmetry and positivity", kernel_symmetry),
    ("fractional multiplier", multiplier),
    ("duality identity", duality),
    ("action homogeneity and convexity", action_probes),
    ("transport estimate", transport_estimate_check),
    ("metric axioms", metric_axioms),
    ("horizon rescaling", rescaling),
    ("constant speed", constant_speed),
    ("jko energy inequality", jko_energy),
    ("oracle agreement", oracle_agreement),
];

/// Runs every check; errors inside a check count as failures.
pub fn run_suite(opts: &ValidateOptions) -> Vec<CheckOutcome> {
    CHECKS
        .iter()
        .enumerate()
        .map(|(k, (name, check))| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(k as u64));
            let start = Instant::now();
            let (passed, detail) = match check(opts, &mut rng) {
                Ok(r) => r,
                Err(e) => (false, format!("error: {e}")),
            };
            CheckOutcome {
                name: name.to_string(),
                passed,
                detail,
                seconds: start.elapsed().as_secs_f64(),
            }
        })
        .collect()
}

/// Plain-text table of outcomes.
pub fn format_table(outcomes: &[CheckOutcome]) -> String {
    let width = outcomes.iter().map(|o| o.name.len()).max().unwrap_or(0);
    let mut out = String::new();
    for o in outcomes {
        out.push_str(&format!(
            "{:<6} {:<width$}  {:>7.2}s  {}\n",
            if o.passed { "PASS" } else { "FAIL" },
            o.name,
            o.seconds,
            o.detail
        ));
    }
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    out.push_str(&format!("{} checks, {} failed\n", outcomes.len(), failed));
    out
}

fn random_density(g: GridSpec, rng: &mut ChaCha8Rng) -> Result<DensityField> {
    let v = (0..g.cells()).map(|_| rng.random_range(0.3..2.0)).collect();
    DensityField::new(g, v)?.normalized()
}

fn theta_properties(opts: &ValidateOptions, rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let samples = if opts.quick { 2000 } else { 10_000 };
    let mut worst: f64 = 0.0;
    for &m in &[0.5, 1.0, 1.5, 2.0] {
        for _ in 0..samples {
            let s: f64 = rng.random_range(1e-3..10.0);
            let t: f64 = rng.random_range(1e-3..10.0);
            let th = theta_m(s, t, m)?;
            let scale = s.max(t);
            // symmetry, mean bounds, homogeneity, monotonicity, concavity, chain identity
            worst = worst.max((th - theta_m(t, s, m)?).abs() / scale);
            worst = worst.max((s.min(t) - th).max(0.0) / scale);
            worst = worst.max((th - s.max(t)).max(0.0) / scale);
            let lam: f64 = rng.random_range(0.1..5.0);
            worst = worst.max((theta_m(lam * s, lam * t, m)? - lam * th).abs() / (lam * scale));
            worst = worst.max((th - theta_m(s + 0.5, t, m)?).max(0.0) / scale);
            let (s2, t2) = (rng.random_range(1e-3..10.0), rng.random_range(1e-3..10.0));
            let mid = theta_m(0.5 * (s + s2), 0.5 * (t + t2), m)?;
            let avg = 0.5 * (th + theta_m(s2, t2, m)?);
            worst = worst.max((avg - mid).max(0.0) / scale.max(s2).max(t2));
            let chain = th * (u_m_prime(s, m)? - u_m_prime(t, m)?) - (s.powf(m) - t.powf(m));
            worst = worst.max(chain.abs() / s.powf(m).max(t.powf(m)));
        }
    }
    Ok((worst <= 1e-11, format!("max violation {worst:.2e}")))
}

fn theta_quadrature_check(_: &ValidateOptions, rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let s: f64 = rng.random_range(1e-2..10.0);
        let t: f64 = rng.random_range(1e-2..10.0);
        let m: f64 = rng.random_range(0.1..2.0);
        let c = theta_m(s, t, m)?;
        worst = worst.max((theta_quadrature(s, t, m)? - c).abs() / c);
    }
    Ok((worst <= 1e-10, format!("max relative gap {worst:.2e}")))
}

fn kernel_closed_form(_: &ValidateOptions, _: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let k = periodized_kernel(&[0.5], 0.5, &KernelConfig::new(64, true)?)?;
    let c = fractional_constant(1, 0.5)?;
    let (ek, ec) = ((k - PI).abs(), (c - 1.0 / PI).abs());
    Ok((ek <= 1e-6 && ec <= 1e-10, format!("|K(1/2) - π| = {ek:.1e}, |C - 1/π| = {ec:.1e}")))
}

fn kernel_symmetry(_: &ValidateOptions, rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let sigma = rng.random_range(0.1..0.9);
    let mut ok = true;
    for (d, n) in [(1, 16), (2, 6)] {
        let g = make_grid(d, n)?;
        let k = kernel_matrix(&g, sigma, &KernelConfig::default())?;
        let dense = k.to_dense();
        let nc = g.cells();
        for i in 0..nc {
            for j in 0..nc {
                ok &= dense[i * nc + j] == dense[j * nc + i];
                ok &= i == j || dense[i * nc + j] > 0.0;
            }
        }
    }
    Ok((ok, format!("sigma = {sigma:.3}")))
}

fn multiplier(opts: &ValidateOptions, _: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let sizes: &[usize] = if opts.quick { &[32, 64] } else { &[32, 64, 128] };
    let mut errs = Vec::new();
    for &n in sizes {
        let g = make_grid(1, n)?;
        let k = kernel_matrix(&g, 0.5, &KernelConfig::default())?;
        let f = NodeField::from_fn(g, |x| (2.0 * PI * x[0]).cos())?;
        let lf = apply_fractional_operator(&f, &k)?;
        let ratio = lf.values()[0] / f.values()[0];
        errs.push((ratio - 2.0 * PI).abs() / (2.0 * PI));
    }
    let ok = errs[sizes.iter().position(|&n| n == 64).unwrap()] <= 0.05 && errs.windows(2).all(|w| w[1] < w[0]);
    Ok((ok, format!("relative errors {:?}", errs.iter().map(|e| format!("{e:.2e}")).collect::<Vec<_>>())))
}

fn duality(_: &ValidateOptions, rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let g = make_grid(1, 32)?;
    let k = kernel_matrix(&g, 0.5, &KernelConfig::default())?;
    let hd = g.cell_volume();
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let phi = NodeField::new(g, (0..32).map(|_| rng.random_range(-1.0..1.0)).collect())?;
        let v = PairField::from_fn(g, |_, _| rng.random_range(-1.0..1.0));
        let div = discrete_divergence(&v, &k)?;
        let grad = discrete_gradient(&phi);
        let lhs: f64 = phi.values().iter().zip(div.values()).map(|(a, b)| a * b).sum::<f64>() * hd;
        let pairs: f64 = grad
            .upper()
            .iter()
            .zip(v.upper())
            .zip(k.upper())
            .map(|((a, b), c)| a * b * c)
            .sum::<f64>()
            * hd
            * hd;
        // ordered pairs double the upper sum, which the ½ cancels
        worst = worst.max((lhs + pairs).abs());
    }
    Ok((worst <= 1e-12, format!("max residual {worst:.2e}")))
}

fn action_probes(_: &ValidateOptions, rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let g = make_grid(1, 8)?;
    let k = kernel_matrix(&g, 0.5, &KernelConfig::default())?;
    let mut ok = true;
    for _ in 0..200 {
        let m = [0.5, 1.0, 1.5, 2.0][rng.random_range(0..4)];
        let (r0, r1) = (random_density(g, rng)?, random_density(g, rng)?);
        let v0 = PairField::from_fn(g, |_, _| rng.random_range(-1.0..1.0));
        let v1 = PairField::from_fn(g, |_, _| rng.random_range(-1.0..1.0));
        let a0 = action(&r0, &v0, &k, m)?.value_or_inf();
        let a1 = action(&r1, &v1, &k, m)?.value_or_inf();
        let a2 = action(&r0, &v0.scaled(2.0), &k, m)?.value_or_inf();
        ok &= (a2 - 4.0 * a0).abs() <= 1e-12 * a2;
        let rm = DensityField::new(g, r0.values().iter().zip(r1.values()).map(|(a, b)| 0.5 * (a + b)).collect())?;
        let vm = PairField::from_upper(g, v0.upper().iter().zip(v1.upper()).map(|(a, b)| 0.5 * (a + b)).collect())?;
        ok &= action(&rm, &vm, &k, m)?.value_or_inf() <= 0.5 * (a0 + a1) + 1e-10;
    }
    Ok((ok, "200 samples".into()))
}

fn transport_estimate_check(_: &ValidateOptions, rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let g = make_grid(1, 16)?;
    let k = kernel_matrix(&g, 0.5, &KernelConfig::default())?;
    let mut worst: f64 = 0.0;
    for _ in 0..500 {
        let m = [0.5, 1.0, 2.0][rng.random_range(0..3)];
        let r = random_density(g, rng)?;
        let v = PairField::from_fn(g, |_, _| rng.random_range(-1.0..1.0));
        let e = transport_estimate(&r, &v, &k, m)?;
        worst = worst.max(e.lhs / e.rhs);
    }
    Ok((worst <= 1.0, format!("max lhs/rhs {worst:.3}")))
}

fn metric_axioms(opts: &ValidateOptions, rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let (n, trials) = if opts.quick { (8, 3) } else { (16, 10) };
    let g = make_grid(1, n)?;
    let k = kernel_matrix(&g, 0.5, &KernelConfig::default())?;
    let cfg = SolverConfig::default();
    let (mut zero, mut sym, mut tri): (f64, f64, f64) = (0.0, 0.0, f64::INFINITY);
    for _ in 0..trials {
        let (a, b, c) = (random_density(g, rng)?, random_density(g, rng)?, random_density(g, rng)?);
        zero = zero.max(solve_distance(&a, &a, &k, 2.0, &cfg)?.distance);
        let ab = solve_distance(&a, &b, &k, 2.0, &cfg)?.distance;
        let ba = solve_distance(&b, &a, &k, 2.0, &cfg)?.distance;
        let bc = solve_distance(&b, &c, &k, 2.0, &cfg)?.distance;
        let ac = solve_distance(&a, &c, &k, 2.0, &cfg)?.distance;
        sym = sym.max((ab - ba).abs());
        tri = tri.min(ab + bc - ac);
    }
    let ok = zero <= 1e-6 && sym <= 1e-4 && tri >= -1e-4;
    Ok((ok, format!("zero {zero:.1e}, symmetry {sym:.1e}, triangle margin {tri:.2e}")))
}

fn rescaling(opts: &ValidateOptions, rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let g = make_grid(1, if opts.quick { 8 } else { 16 })?;
    let k = kernel_matrix(&g, 0.5, &KernelConfig::default())?;
    let (a, b) = (random_density(g, rng)?, random_density(g, rng)?);
    let mut worst: f64 = 0.0;
    for t in [0.5, 2.0] {
        let (wt, w1) = rescaling_check(&a, &b, &k, 1.5, &SolverConfig::default(), t)?;
        worst = worst.max((wt - w1).abs());
    }
    Ok((worst <= 1e-4, format!("max gap {worst:.1e}")))
}

fn constant_speed(opts: &ValidateOptions, rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let (n, l) = if opts.quick { (12, 16) } else { (32, 32) };
    let g = make_grid(1, n)?;
    let k = kernel_matrix(&g, 0.5, &KernelConfig::default())?;
    let (a, b) = (random_density(g, rng)?, random_density(g, rng)?);
    let res = solve_distance(&a, &b, &k, 2.0, &SolverConfig::default().with_intervals(l))?;
    let flat = speed_flatness(&res.speed_profile);
    Ok((res.converged && flat <= 0.02, format!("flatness {flat:.2e}")))
}

fn jko_energy(_: &ValidateOptions, _: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let g = make_grid(1, 16)?;
    let k = kernel_matrix(&g, 0.5, &KernelConfig::default())?;
    let rho = DensityField::from_fn(g, |x| 1.0 + 0.5 * (2.0 * PI * x[0]).cos())?;
    let mut worst = f64::NEG_INFINITY;
    for &m in &[1.0, 2.0] {
        let cfg = JkoConfig::new(2e-3, 5, m);
        let traj = jko_flow(&rho, &k, &cfg)?;
        for d in &traj.diagnostics[1..] {
            worst = worst.max(d.energy_excess(cfg.tau));
        }
    }
    let u = DensityField::uniform(g);
    let (next, _) = jko_step(&u, &k, &JkoConfig::new(1e-3, 1, 2.0))?;
    let drift = next.max_abs_difference(&u)?;
    Ok((
        worst <= 1e-6 && drift <= 1e-6,
        format!("max excess {worst:.1e}, uniform drift {drift:.1e}"),
    ))
}

fn oracle_agreement(_: &ValidateOptions, _: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let g = make_grid(1, 64)?;
    let k = kernel_matrix(&g, 0.5, &KernelConfig::default())?;
    let rho = DensityField::from_fn(g, |x| 1.0 + 0.5 * (2.0 * PI * x[0]).cos())?;
    let exact = spectral_heat_flow(&rho, 0.5, 0.05)?;
    let ode = integrate_semidiscrete(&rho, 1.0, &k, 0.05, 1e-3)?;
    let gap = ode.l1_distance(&exact)?;
    let entropy_drop = entropy(&rho, 1.0)? - entropy(&ode, 1.0)?;
    Ok((gap <= 0.02 && entropy_drop >= 0.0, format!("L1 gap {gap:.2e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quick_suite_passes() {
        let out = run_suite(&ValidateOptions { quick: true, seed: 7 });
        let table = format_table(&out);
        assert!(out.iter().all(|o| o.passed), "{table}");
        assert!(table.ends_with("0 failed\n"));
    }
}
