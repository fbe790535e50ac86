//! Oracles shared by the integration tests.

#![allow(dead_code)]

use fpme::means::{theta_jet, theta_m};
use fpme::special::{gauss_legendre, integrate};

/// Two-cell problem on the circle with `n = 2`: with `ρ = (u, 2 - u)` the
/// only pair carries `V = -u̇ / (K h)`, so the action is `u̇² / (K θ(u, 2-u))`
/// and the distance is the length `∫ du / √(K θ)`.
pub fn two_cell_length(m: f64, k: f64, u0: f64, u1: f64) -> f64 {
    let rule = gauss_legendre(20);
    let (a, b) = if u0 <= u1 { (u0, u1) } else { (u1, u0) };
    integrate(
        |u| 1.0 / (k * theta_m(u, 2.0 - u, m).unwrap()).sqrt(),
        a,
        b,
        64,
        &rule,
    )
}

/// The same distance by direct minimization of the time-discrete energy
/// `Σ (Δu)² / (Δt K θ(ū))` over `intervals` steps, by Newton's method on
/// the tridiagonal Hessian. Returns `√(minimum)`.
pub fn two_cell_direct(m: f64, k: f64, u0: f64, u1: f64, intervals: usize) -> f64 {
    let l = intervals;
    let dt = 1.0 / l as f64;
    let c = dt * k;
    let mut u: Vec<f64> = (0..=l).map(|i| u0 + (u1 - u0) * i as f64 / l as f64).collect();
    // g(x) = 1 / θ(x, 2 - x) and its first two derivatives
    let g = |x: f64| {
        let j = theta_jet(x, 2.0 - x, m).unwrap();
        let d1 = j.ds - j.dt;
        let d2 = j.dss - 2.0 * j.dst + j.dtt;
        let t = j.value;
        (1.0 / t, -d1 / (t * t), 2.0 * d1 * d1 / (t * t * t) - d2 / (t * t))
    };
    let energy = |u: &[f64]| -> f64 {
        u.windows(2)
            .map(|w| {
                let d = w[1] - w[0];
                d * d * g(0.5 * (w[0] + w[1])).0 / c
            })
            .sum()
    };
    let mut value = energy(&u);
    for _ in 0..100 {
        let mut grad = vec![0.0; l + 1];
        let mut diag = vec![0.0; l + 1];
        let mut off = vec![0.0; l];
        for k in 0..l {
            let d = u[k + 1] - u[k];
            let (g0, g1, g2) = g(0.5 * (u[k] + u[k + 1]));
            grad[k] += (-2.0 * d * g0 + 0.5 * d * d * g1) / c;
            grad[k + 1] += (2.0 * d * g0 + 0.5 * d * d * g1) / c;
            diag[k] += (2.0 * g0 - 2.0 * d * g1 + 0.25 * d * d * g2) / c;
            diag[k + 1] += (2.0 * g0 + 2.0 * d * g1 + 0.25 * d * d * g2) / c;
            off[k] += (-2.0 * g0 + 0.25 * d * d * g2) / c;
        }
        // Thomas algorithm on the interior unknowns 1..l-1
        let n = l - 1;
        let mut cp = vec![0.0; n];
        let mut dp = vec![0.0; n];
        for i in 0..n {
            let (a, b, r) = (if i > 0 { off[i] } else { 0.0 }, diag[i + 1], -grad[i + 1]);
            let denom = b - a * if i > 0 { cp[i - 1] } else { 0.0 };
            cp[i] = if i + 1 < n { off[i + 1] / denom } else { 0.0 };
            dp[i] = (r - a * if i > 0 { dp[i - 1] } else { 0.0 }) / denom;
        }
        let mut step = vec![0.0; n];
        for i in (0..n).rev() {
            step[i] = dp[i] - if i + 1 < n { cp[i] * step[i + 1] } else { 0.0 };
        }
        let decrement: f64 = step.iter().zip(&grad[1..l]).map(|(s, g)| -s * g).sum();
        if decrement <= 1e-15 * value {
            break;
        }
        let mut t = 1.0;
        loop {
            let mut trial = u.clone();
            for i in 0..n {
                trial[i + 1] += t * step[i];
            }
            let ok = trial.iter().all(|&x| x > 0.0 && x < 2.0);
            if ok {
                let e = energy(&trial);
                if e <= value - 1e-4 * t * decrement {
                    u = trial;
                    value = e;
                    break;
                }
            }
            t *= 0.5;
            assert!(t > 1e-12, "line search failed");
        }
    }
    value.sqrt()
}
