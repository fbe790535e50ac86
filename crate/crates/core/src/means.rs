//! The m-mean `θ_m(s,t)`.
//!
//! For `s ≠ t`:
//! `θ_1(s,t) = (s - t)/(log s - log t)` and
//! `θ_m(s,t) = ((m-1)/m) (s^m - t^m)/(s^{m-1} - t^{m-1})` otherwise.
//!
//! Every branch is evaluated through one formula. Writing `t > 0`,
//! `u = log(s/t)` and `E(x) = (e^x - 1)/x` (with `E(0) = 1`),
//!
//! `θ_m(s,t) = t · E(m u) / E((m-1) u)`,
//!
//! which is smooth across the diagonal `s = t` and across `m = 1`. `E` and its
//! first two derivatives are computed from `expm1` away from zero and from
//! their Taylor series near zero, so no 0/0 cancellation occurs.

use serde::{Deserialize, Serialize};

use crate::error::{FpmeError, Result};

/// The exponent `m` together with the data needed to check the
/// mass-conserving range `m > m_* = (d - 2σ)_+ / d`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Nonlinearity {
    pub m: f64,
    pub sigma: f64,
    pub d: usize,
}

impl Nonlinearity {
    pub fn new(m: f64, sigma: f64, d: usize) -> Result<Self> {
        check_exponent(m)?;
        if !(sigma > 0.0 && sigma < 1.0) {
            return Err(FpmeError::InvalidSigma(sigma));
        }
        if d != 1 && d != 2 {
            return Err(FpmeError::UnsupportedDimension(d));
        }
        Ok(Nonlinearity { m, sigma, d })
    }

    /// `m_* = (d - 2σ)_+ / d`.
    pub fn critical_exponent(&self) -> f64 {
        (self.d as f64 - 2.0 * self.sigma).max(0.0) / self.d as f64
    }

    /// True when `m ≤ m_*`, outside the range where the theory guarantees
    /// mass conservation.
    pub fn below_critical(&self) -> bool {
        self.m <= self.critical_exponent()
    }
}

pub(crate) fn check_exponent(m: f64) -> Result<()> {
    if !(m > 0.0 && m <= 2.0) {
        return Err(FpmeError::InvalidExponent(m));
    }
    Ok(())
}

const SERIES_RADIUS: f64 = 1.0;
const SERIES_TERMS: usize = 28;

/// `(E(x), E'(x), E''(x))` for `E(x) = (e^x - 1)/x`.
fn expm1_ratio(x: f64) -> (f64, f64, f64) {
    if x.abs() < SERIES_RADIUS {
        // E = Σ x^k/(k+1)!, E' = Σ (k+1) x^k/(k+2)!, E'' = Σ (k+1)(k+2) x^k/(k+3)!
        let (mut e, mut e1, mut e2) = (0.0, 0.0, 0.0);
        let (mut f1, mut f2, mut f3) = (1.0, 0.5, 1.0 / 6.0);
        let mut xk = 1.0;
        for k in 0..SERIES_TERMS {
            let kf = k as f64;
            e += xk * f1;
            e1 += (kf + 1.0) * xk * f2;
            e2 += (kf + 1.0) * (kf + 2.0) * xk * f3;
            xk *= x;
            f1 = f2;
            f2 = f3;
            f3 /= kf + 4.0;
        }
        (e, e1, e2)
    } else {
        let em1 = x.exp_m1();
        let ex = em1 + 1.0;
        let e = em1 / x;
        let e1 = (ex * (x - 1.0) + 1.0) / (x * x);
        let e2 = (ex * (x * x - 2.0 * x + 2.0) - 2.0) / (x * x * x);
        (e, e1, e2)
    }
}

/// `G(u) = E(m u)/E((m-1) u)` and its first two derivatives in `u`.
fn ratio_profile(u: f64, m: f64) -> (f64, f64, f64) {
    let b = m - 1.0;
    let (p0, p1, p2) = expm1_ratio(m * u);
    let (q0, q1, q2) = expm1_ratio(b * u);
    let (dp, ddp) = (m * p1, m * m * p2);
    let (dq, ddq) = (b * q1, b * b * q2);
    let g = p0 / q0;
    let g1 = dp / q0 - p0 * dq / (q0 * q0);
    let g2 = ddp / q0 - 2.0 * dp * dq / (q0 * q0) - p0 * ddq / (q0 * q0) + 2.0 * p0 * dq * dq / (q0 * q0 * q0);
    (g, g1, g2)
}

fn check_arguments(s: f64, t: f64) -> Result<()> {
    if s < 0.0 || t < 0.0 || s.is_nan() || t.is_nan() {
        return Err(FpmeError::NegativeArgument(s, t));
    }
    Ok(())
}

/// `θ_m(0, t)`: zero for `m ≤ 1`, `((m-1)/m) t` for `1 < m ≤ 2`.
fn boundary_value(t: f64, m: f64) -> f64 {
    if m <= 1.0 {
        0.0
    } else {
        (m - 1.0) / m * t
    }
}

/// The m-mean `θ_m(s, t)` for `s, t ≥ 0`.
pub fn theta_m(s: f64, t: f64, m: f64) -> Result<f64> {
    check_arguments(s, t)?;
    check_exponent(m)?;
    Ok(theta_unchecked(s, t, m))
}

#[inline]
pub(crate) fn theta_unchecked(s: f64, t: f64, m: f64) -> f64 {
    // symmetric by construction: always evaluate with lo ≤ hi
    let (lo, hi) = if s <= t { (s, t) } else { (t, s) };
    if hi == 0.0 {
        return 0.0;
    }
    if lo == 0.0 {
        return boundary_value(hi, m);
    }
    if lo == hi {
        return lo;
    }
    let u = (lo / hi).ln();
    hi * ratio_profile(u, m).0
}

/// Value and derivatives of `θ_m` at a point with `s, t > 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThetaJet {
    pub value: f64,
    pub ds: f64,
    pub dt: f64,
    pub dss: f64,
    pub dst: f64,
    pub dtt: f64,
}

/// `θ_m` with first and second partial derivatives. Uses the 1-homogeneity
/// `θ(s,t) = t g(s/t)`.
#[inline]
pub(crate) fn theta_jet_unchecked(s: f64, t: f64, m: f64) -> ThetaJet {
    // evaluate with r = s/t ≤ 1 and swap back
    let swap = s > t;
    let (a, c) = if swap { (t, s) } else { (s, t) };
    let r = a / c;
    let u = r.ln();
    let (g, g1u, g2u) = ratio_profile(u, m);
    let gp = g1u / r;
    let gpp = (g2u - g1u) / (r * r);
    let value = c * g;
    let da = gp;
    let dc = g - r * gp;
    let daa = gpp / c;
    let dac = -r * gpp / c;
    let dcc = r * r * gpp / c;
    if swap {
        ThetaJet {
            value,
            ds: dc,
            dt: da,
            dss: dcc,
            dst: dac,
            dtt: daa,
        }
    } else {
        ThetaJet {
            value,
            ds: da,
            dt: dc,
            dss: daa,
            dst: dac,
            dtt: dcc,
        }
    }
}

/// `θ_m` with first and second derivatives; requires `s, t > 0` unless `m = 2`.
pub fn theta_jet(s: f64, t: f64, m: f64) -> Result<ThetaJet> {
    check_arguments(s, t)?;
    check_exponent(m)?;
    if s == 0.0 || t == 0.0 {
        if m == 2.0 {
            return Ok(ThetaJet {
                value: 0.5 * (s + t),
                ds: 0.5,
                dt: 0.5,
                dss: 0.0,
                dst: 0.0,
                dtt: 0.0,
            });
        }
        return Err(FpmeError::VacuumDerivative { s, t, m });
    }
    Ok(theta_jet_unchecked(s, t, m))
}

/// `(∂θ/∂s, ∂θ/∂t)`.
pub fn theta_m_partials(s: f64, t: f64, m: f64) -> Result<(f64, f64)> {
    let j = theta_jet(s, t, m)?;
    Ok((j.ds, j.dt))
}
