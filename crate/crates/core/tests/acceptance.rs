//! Acceptance suite: one pass/fail line per criterion, nonzero exit on any
//! failure. Run with `cargo test --release --test acceptance`.

mod common;

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use fpme::action::transport_estimate;
use fpme::entropy::u_m_prime;
use fpme::grid::{discrete_divergence, discrete_gradient};
use fpme::jko::{jko_flow, jko_step, JkoConfig, Trajectory};
use fpme::kernel::{apply_fractional_operator, comp_estimate_constant, fractional_constant, periodized_kernel};
use fpme::means::theta_m;
use fpme::oracles::{integrate_semidiscrete, spectral_heat_flow, stable_time_step};
use fpme::transport::{solve_distance, speed_flatness, w1_kantorovich, SolverConfig};
use fpme::{kernel_matrix, make_grid, DensityField, GridSpec, KernelConfig, KernelMatrix, NodeField, PairField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<(bool, String), fpme::FpmeError>;

struct Criterion {
    name: &'static str,
    budget: Duration,
    run: fn(&mut ChaCha8Rng) -> Outcome,
}

fn random_density(g: GridSpec, rng: &mut ChaCha8Rng) -> fpme::Result<DensityField> {
    let v = (0..g.cells()).map(|_| rng.random_range(0.3..2.0)).collect();
    DensityField::new(g, v)?.normalized()
}

fn kernel_1d(n: usize) -> fpme::Result<KernelMatrix> {
    kernel_matrix(&make_grid(1, n)?, 0.5, &KernelConfig::default())
}

fn cosine(n: usize) -> fpme::Result<DensityField> {
    DensityField::from_fn(make_grid(1, n)?, |x| 1.0 + 0.5 * (2.0 * PI * x[0]).cos())
}

fn theta_suite(rng: &mut ChaCha8Rng) -> Outcome {
    let mut worst: f64 = 0.0;
    for m in [0.5, 1.0, 1.5, 2.0] {
        for _ in 0..10_000 {
            let s: f64 = rng.random_range(1e-3..10.0);
            let t: f64 = rng.random_range(1e-3..10.0);
            let th = theta_m(s, t, m)?;
            let scale = s.max(t);
            worst = worst.max((th - theta_m(t, s, m)?).abs() / scale);
            worst = worst.max((s.min(t) - th).max(0.0) / scale);
            worst = worst.max((th - s.max(t)).max(0.0) / scale);
            let lam: f64 = rng.random_range(0.1..5.0);
            worst = worst.max((theta_m(lam * s, lam * t, m)? - lam * th).abs() / (lam * scale));
            worst = worst.max((th - theta_m(s + 0.5, t, m)?).max(0.0) / scale);
            worst = worst.max((th - theta_m(s, t + 0.5, m)?).max(0.0) / scale);
            let (s2, t2) = (rng.random_range(1e-3..10.0), rng.random_range(1e-3..10.0));
            let mid = theta_m(0.5 * (s + s2), 0.5 * (t + t2), m)?;
            let avg = 0.5 * (th + theta_m(s2, t2, m)?);
            worst = worst.max((avg - mid).max(0.0) / scale.max(s2).max(t2));
            let chain = th * (u_m_prime(s, m)? - u_m_prime(t, m)?) - (s.powf(m) - t.powf(m));
            worst = worst.max(chain.abs() / s.powf(m).max(t.powf(m)));
        }
    }
    Ok((worst <= 1e-11, format!("max violation {worst:.2e} over 4 x 10^4 samples")))
}

fn kernel_closed_form(_: &mut ChaCha8Rng) -> Outcome {
    let k = periodized_kernel(&[0.5], 0.5, &KernelConfig::new(64, true)?)?;
    let c = fractional_constant(1, 0.5)?;
    let (ek, ec) = ((k - PI).abs(), (c - 1.0 / PI).abs());
    Ok((ek <= 1e-6 && ec <= 1e-10, format!("|K(1/2) - pi| = {ek:.2e}, |C - 1/pi| = {ec:.2e}")))
}

fn multiplier(_: &mut ChaCha8Rng) -> Outcome {
    let mut errs = Vec::new();
    for n in [32, 64, 128] {
        let k = kernel_1d(n)?;
        let f = NodeField::from_fn(*k.grid(), |x| (2.0 * PI * x[0]).cos())?;
        let lf = apply_fractional_operator(&f, &k)?;
        // worst cell ratio against the symbol 2π
        let err = f
            .values()
            .iter()
            .zip(lf.values())
            .filter(|(a, _)| a.abs() > 0.1)
            .map(|(a, b)| (b / a - 2.0 * PI).abs() / (2.0 * PI))
            .fold(0.0, f64::max);
        errs.push(err);
    }
    let ok = errs[1] <= 0.05 && errs.windows(2).all(|w| w[1] < w[0]);
    Ok((ok, format!("relative errors at n = 32, 64, 128: {:.3e}, {:.3e}, {:.3e}", errs[0], errs[1], errs[2])))
}

fn duality(rng: &mut ChaCha8Rng) -> Outcome {
    let k = kernel_1d(32)?;
    let g = *k.grid();
    let hd = g.cell_volume();
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let phi = NodeField::new(g, (0..32).map(|_| rng.random_range(-1.0..1.0)).collect())?;
        let v = PairField::from_fn(g, |_, _| rng.random_range(-1.0..1.0));
        let lhs = phi.inner(&discrete_divergence(&v, &k)?)?;
        let grad = discrete_gradient(&phi);
        let pairs: f64 = grad.upper().iter().zip(v.upper()).zip(k.upper()).map(|((a, b), c)| a * b * c).sum();
        worst = worst.max((lhs + pairs * hd * hd).abs());
    }
    Ok((worst <= 1e-12, format!("max residual {worst:.2e} over 100 samples")))
}

fn metric_axioms(rng: &mut ChaCha8Rng) -> Outcome {
    let k = kernel_1d(16)?;
    let g = *k.grid();
    let cfg = SolverConfig::default();
    let (mut zero, mut sym, mut tri): (f64, f64, f64) = (0.0, 0.0, f64::INFINITY);
    let mut converged = true;
    for _ in 0..20 {
        let (a, b, c) = (random_density(g, rng)?, random_density(g, rng)?, random_density(g, rng)?);
        let mut solve = |x: &DensityField, y: &DensityField| -> fpme::Result<f64> {
            let r = solve_distance(x, y, &k, 2.0, &cfg)?;
            converged &= r.converged;
            Ok(r.distance)
        };
        zero = zero.max(solve(&a, &a)?);
        let ab = solve(&a, &b)?;
        let ba = solve(&b, &a)?;
        let bc = solve(&b, &c)?;
        let ac = solve(&a, &c)?;
        sym = sym.max((ab - ba).abs());
        tri = tri.min(ab + bc - ac);
    }
    let ok = converged && zero <= 1e-6 && sym <= 1e-4 && tri >= -1e-4;
    Ok((ok, format!("W(a,a) <= {zero:.1e}, symmetry gap {sym:.1e}, min triangle margin {tri:.3e}")))
}

fn rescaling(rng: &mut ChaCha8Rng) -> Outcome {
    let k = kernel_1d(16)?;
    let g = *k.grid();
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let (a, b) = (random_density(g, rng)?, random_density(g, rng)?);
        let w: Vec<f64> = [0.5, 1.0, 2.0]
            .iter()
            .map(|&t| solve_distance(&a, &b, &k, 2.0, &SolverConfig { horizon: t, ..SolverConfig::default() }).map(|r| r.distance))
            .collect::<fpme::Result<_>>()?;
        worst = worst.max((w[0] - w[1]).abs()).max((w[2] - w[1]).abs());
    }
    Ok((worst <= 1e-4, format!("max gap across T = 0.5, 1, 2: {worst:.2e}")))
}

fn constant_speed(rng: &mut ChaCha8Rng) -> Outcome {
    let k = kernel_1d(32)?;
    let g = *k.grid();
    let cfg = SolverConfig::default().with_intervals(32);
    let mut worst: f64 = 0.0;
    let mut converged = true;
    for _ in 0..5 {
        let (a, b) = (random_density(g, rng)?, random_density(g, rng)?);
        let r = solve_distance(&a, &b, &k, 2.0, &cfg)?;
        converged &= r.converged;
        worst = worst.max(speed_flatness(&r.speed_profile));
    }
    Ok((converged && worst <= 0.02, format!("max flatness {worst:.2e} on 5 geodesics")))
}

fn two_cell(_: &mut ChaCha8Rng) -> Outcome {
    let grid = make_grid(1, 2)?;
    let kernel = kernel_matrix(&grid, 0.5, &KernelConfig::default())?;
    let kv = kernel.get(0, 1);
    let rho0 = DensityField::new(grid, vec![1.6, 0.4])?;
    let rho1 = DensityField::new(grid, vec![0.4, 1.6])?;
    let mut worst: f64 = 0.0;
    for m in [0.5, 1.0, 1.5, 2.0] {
        let oracle = common::two_cell_direct(m, kv, 1.6, 0.4, 4096);
        let r = solve_distance(&rho0, &rho1, &kernel, m, &SolverConfig::default())?;
        worst = worst.max((r.distance - oracle).abs() / oracle);
    }
    Ok((worst <= 5e-3, format!("max relative gap {worst:.2e} for m = 0.5, 1, 1.5, 2")))
}

fn w1_bound(rng: &mut ChaCha8Rng) -> Outcome {
    let k = kernel_1d(16)?;
    let g = *k.grid();
    let c = comp_estimate_constant(&k);
    let (mut est, mut bound): (f64, f64) = (0.0, 0.0);
    for i in 0..100 {
        let m = [0.5, 1.0, 1.5, 2.0][i % 4];
        let (a, b) = (random_density(g, rng)?, random_density(g, rng)?);
        let v = PairField::from_fn(g, |_, _| rng.random_range(-1.0..1.0));
        let e = transport_estimate(&a, &v, &k, m)?;
        est = est.max(e.lhs / e.rhs);
        let w = solve_distance(&a, &b, &k, m, &SolverConfig::default())?.distance;
        bound = bound.max(w1_kantorovich(&a, &b)? / (0.5 * c * w));
    }
    Ok((
        est <= 1.0 && bound <= 1.0,
        format!("max lhs/rhs {est:.3}, max W1 / (C W / 2) {bound:.3}"),
    ))
}

fn max_excess(traj: &Trajectory) -> f64 {
    traj.diagnostics[1..]
        .iter()
        .map(|d| d.energy_excess(traj.tau))
        .fold(f64::NEG_INFINITY, f64::max)
}

fn jko_energy(_: &mut ChaCha8Rng) -> Outcome {
    let k = kernel_1d(32)?;
    let rho = cosine(32)?;
    let bump = fpme::init::InitialCondition::Bump { width: 0.1 }.build(*k.grid())?;
    let mut worst = f64::NEG_INFINITY;
    let mut complete = true;
    for m in [0.5, 1.0, 1.5, 2.0] {
        for start in [&rho, &bump] {
            let traj = jko_flow(start, &k, &JkoConfig::new(2e-3, 10, m))?;
            complete &= traj.completed();
            worst = worst.max(max_excess(&traj));
        }
    }
    let u = DensityField::uniform(*k.grid());
    let mut drift: f64 = 0.0;
    for m in [0.5, 1.0, 2.0] {
        let (next, _) = jko_step(&u, &k, &JkoConfig::new(1e-3, 1, m))?;
        drift = drift.max(next.max_abs_difference(&u)?);
    }
    Ok((
        complete && worst <= 1e-6 && drift <= 1e-6,
        format!("max energy excess {worst:.2e} over 80 steps, uniform drift {drift:.1e}"),
    ))
}

const TAUS: [f64; 3] = [4e-3, 2e-3, 1e-3];
const T_FINAL: f64 = 0.05;

/// JKO at `t = 0.05` against `reference` for each step size; also returns
/// the worst energy excess of the runs.
fn gradient_flow_gaps(m: f64, reference: &DensityField) -> fpme::Result<(Vec<f64>, f64, bool)> {
    let k = kernel_1d(64)?;
    let rho0 = cosine(64)?;
    let mut gaps = Vec::new();
    let mut excess = f64::NEG_INFINITY;
    let mut complete = true;
    for tau in TAUS {
        let steps = (T_FINAL / tau + 1e-9).floor() as usize;
        let traj = jko_flow(&rho0, &k, &JkoConfig::new(tau, steps, m))?;
        complete &= traj.completed();
        excess = excess.max(max_excess(&traj));
        gaps.push(traj.at_time(T_FINAL).l1_distance(reference)?);
    }
    Ok((gaps, excess, complete))
}

fn flow_outcome(gaps: &[f64], excess: f64, complete: bool) -> (bool, String) {
    let ok = complete && gaps[2] <= 0.05 && gaps.windows(2).all(|w| w[1] < w[0]) && excess <= 1e-6;
    let detail = format!(
        "L1 gaps at tau = 4e-3, 2e-3, 1e-3: {:.3e}, {:.3e}, {:.3e}; max energy excess {excess:.1e}",
        gaps[0], gaps[1], gaps[2]
    );
    (ok, detail)
}

fn heat_oracle(_: &mut ChaCha8Rng) -> Outcome {
    let exact = spectral_heat_flow(&cosine(64)?, 0.5, T_FINAL)?;
    let (gaps, excess, complete) = gradient_flow_gaps(1.0, &exact)?;
    Ok(flow_outcome(&gaps, excess, complete))
}

fn porous_oracle(_: &mut ChaCha8Rng) -> Outcome {
    let k = kernel_1d(64)?;
    let rho0 = cosine(64)?;
    let dt = stable_time_step(&rho0, 2.0, &k)? / 4.0;
    let endpoint = integrate_semidiscrete(&rho0, 2.0, &k, T_FINAL, dt)?;
    let (gaps, excess, complete) = gradient_flow_gaps(2.0, &endpoint)?;
    Ok(flow_outcome(&gaps, excess, complete))
}

const CRITERIA: &[Criterion] = &[
    Criterion { name: "theta_m algebra", budget: Duration::from_secs(1), run: theta_suite },
    Criterion { name: "kernel closed form", budget: Duration::from_secs(1), run: kernel_closed_form },
    Criterion { name: "fractional multiplier", budget: Duration::from_secs(10), run: multiplier },
    Criterion { name: "duality identity", budget: Duration::from_secs(5), run: duality },
    Criterion { name: "metric axioms", budget: Duration::from_secs(300), run: metric_axioms },
    Criterion { name: "horizon rescaling", budget: Duration::from_secs(120), run: rescaling },
    Criterion { name: "constant-speed geodesics", budget: Duration::from_secs(300), run: constant_speed },
    Criterion { name: "two-cell oracle", budget: Duration::from_secs(60), run: two_cell },
    Criterion { name: "transport estimate and W1 bound", budget: Duration::from_secs(600), run: w1_bound },
    Criterion { name: "JKO energy inequality and fixed point", budget: Duration::from_secs(120), run: jko_energy },
    Criterion { name: "gradient flow vs spectral oracle, m = 1", budget: Duration::from_secs(1200), run: heat_oracle },
    Criterion { name: "gradient flow vs RK4 oracle, m = 2", budget: Duration::from_secs(1200), run: porous_oracle },
];

fn main() -> ExitCode {
    let mut failed = 0;
    for (i, c) in CRITERIA.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + i as u64);
        let start = Instant::now();
        let (passed, detail) = match (c.run)(&mut rng) {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        let elapsed = start.elapsed();
        let in_time = elapsed <= c.budget;
        let passed = passed && in_time;
        if !passed {
            failed += 1;
        }
        println!(
            "[{}] criterion {:>2}: {}: {detail} ({:.2} s{})",
            if passed { "PASS" } else { "FAIL" },
            i + 1,
            c.name,
            elapsed.as_secs_f64(),
            if in_time { String::new() } else { format!(", budget {} s", c.budget.as_secs()) },
        );
    }
    println!("{} criteria, {failed} failed", CRITERIA.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
