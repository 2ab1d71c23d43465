//! Orlicz functions `Phi(t) = t^p ln^lambda(e + t)` and, for `lambda < 0`,
//! the convex modification `Psi` that equals `t^p` near zero, is affine on
//! `[t1, t2)` and equals `Phi` from `t2` on.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::E;

/// Upper limit for the search of `t2`.
pub const T2_LIMIT: f64 = 1e9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrliczSpec {
    pub p: f64,
    pub lambda: f64,
    pub t1: Option<f64>,
    pub t2: Option<f64>,
    pub k_slope: Option<f64>,
}

impl OrliczSpec {
    /// Spec for `(p, lambda)`, with breakpoints resolved when `lambda < 0`.
    pub fn new(p: f64, lambda: f64) -> Result<Self> {
        if !(p > 1.0) || !lambda.is_finite() {
            return Err(Error::Domain(format!(
                "need p > 1 and finite lambda, got ({p}, {lambda})"
            )));
        }
        if lambda < 0.0 {
            resolve_breakpoints(p, lambda)
        } else {
            Ok(Self::unresolved(p, lambda))
        }
    }

    /// Spec without breakpoints (`psi` fails on it when `lambda < 0`).
    pub fn unresolved(p: f64, lambda: f64) -> Self {
        Self {
            p,
            lambda,
            t1: None,
            t2: None,
            k_slope: None,
        }
    }

    pub fn phi(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        t.powf(self.p) * (E + t).ln().powf(self.lambda)
    }

    pub fn phi_prime(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let (p, l) = (self.p, self.lambda);
        let lg = (E + t).ln();
        (p * lg + l * t / (E + t)) * t.powf(p - 1.0) * lg.powf(l - 1.0)
    }

    pub fn phi_second(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return if self.p < 2.0 {
                f64::INFINITY
            } else if self.p == 2.0 {
                2.0
            } else {
                0.0
            };
        }
        let (p, l) = (self.p, self.lambda);
        let lg = (E + t).ln();
        let u = t / (E + t);
        let r = l * (l - 1.0) * u * u + l * (2.0 * p - 1.0) * u * lg;
        (p * (p - 1.0) * lg * lg + l * E * t / ((E + t) * (E + t)) * lg + r)
            * t.powf(p - 2.0)
            * lg.powf(l - 2.0)
    }

    fn breakpoints(&self) -> Result<(f64, f64, f64)> {
        match (self.t1, self.t2, self.k_slope) {
            (Some(a), Some(b), Some(k)) => Ok((a, b, k)),
            _ => Err(Error::Unresolved),
        }
    }

    /// `Psi`; equals `phi` when `lambda >= 0`.
    pub fn psi(&self, t: f64) -> Result<f64> {
        if self.lambda >= 0.0 {
            return Ok(self.phi(t));
        }
        let (t1, t2, k) = self.breakpoints()?;
        Ok(if t <= 0.0 {
            0.0
        } else if t < t1 {
            t.powf(self.p)
        } else if t < t2 {
            k * (t - t1) + t1.powf(self.p)
        } else {
            self.phi(t)
        })
    }

    pub fn psi_prime(&self, t: f64) -> Result<f64> {
        if self.lambda >= 0.0 {
            return Ok(self.phi_prime(t));
        }
        let (t1, t2, k) = self.breakpoints()?;
        Ok(if t <= 0.0 {
            0.0
        } else if t < t1 {
            self.p * t.powf(self.p - 1.0)
        } else if t < t2 {
            k
        } else {
            self.phi_prime(t)
        })
    }
}

fn log_grid(from: f64, to: f64, per_octave: usize) -> impl Iterator<Item = f64> {
    let steps = ((to / from).log2() * per_octave as f64).ceil() as usize;
    (0..=steps).map(move |i| from * (i as f64 / per_octave as f64).exp2())
}

fn t2_conditions(spec: &OrliczSpec, t: f64) -> bool {
    (spec.p + 1.0) * spec.phi(t) / (2.0 * t) <= spec.phi_prime(t)
        && spec.phi_prime(t) > 0.0
        && spec.phi_second(t) >= 0.0
}

/// Resolves `t1 < t2` and the slope `k` of the modified function.
///
/// `t2` is the first point of the doubling grid from `e` past which every
/// tested point of a finer log grid satisfies the growth and convexity
/// conditions, refined downward by bisection. `t1` is the largest `2^-m`
/// satisfying `p t1^(p-1) <= k <= Phi'(t2)`.
pub fn resolve_breakpoints(p: f64, lambda: f64) -> Result<OrliczSpec> {
    let fail = Error::Resolution { p, lambda };
    if !(p > 1.0) || !(lambda < 0.0) {
        return Err(Error::Domain(format!(
            "breakpoints need p > 1, lambda < 0, got ({p}, {lambda})"
        )));
    }
    let base = OrliczSpec::unresolved(p, lambda);
    let tail_ok = |t: f64| log_grid(t, 1e3 * T2_LIMIT, 8).all(|u| t2_conditions(&base, u));
    let mut hi = None;
    let mut t = E;
    let mut prev = None;
    while t <= T2_LIMIT {
        if tail_ok(t) {
            hi = Some(t);
            break;
        }
        prev = Some(t);
        t *= 2.0;
    }
    let mut t2 = hi.ok_or(fail.clone())?;
    if let Some(mut lo) = prev {
        for _ in 0..60 {
            let mid = 0.5 * (lo + t2);
            if t2_conditions(&base, mid) && tail_ok(mid) {
                t2 = mid;
            } else {
                lo = mid;
            }
        }
    }
    let phi2 = base.phi(t2);
    let d2 = base.phi_prime(t2);
    let t1 = (0..1100)
        .map(|m| (-(m as f64)).exp2())
        .filter(|&t1| t1 < t2)
        .find(|&t1| {
            let k = (phi2 - t1.powf(p)) / (t2 - t1);
            p * t1.powf(p - 1.0) <= k && k <= d2
        })
        .ok_or(fail.clone())?;
    let k = (phi2 - t1.powf(p)) / (t2 - t1);
    let spec = OrliczSpec {
        p,
        lambda,
        t1: Some(t1),
        t2: Some(t2),
        k_slope: Some(k),
    };
    if !(0.0 < t1 && t1 < t2 && p * t1.powf(p - 1.0) <= k && k <= d2) {
        return Err(fail);
    }
    Ok(spec)
}

/// Which function a property scan examines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OrliczFunction {
    Phi,
    Psi,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyReport {
    pub function: OrliczFunction,
    pub p: f64,
    pub lambda: f64,
    pub grid_points: usize,
    pub grid_max: f64,
    pub monotonicity_violations: usize,
    pub convexity_violations: usize,
    /// `sup f(2t) / f(t)`.
    pub delta2_sup: f64,
    /// `sup t f'(t) / f(t)`.
    pub growth_index_sup: f64,
    /// `sup f(s t) / (s^r f(t))` over `s` in `(0, 1]`, for `r = p/2`.
    pub scaling_sup_half: f64,
    /// Same for `r = 0.9 p`.
    pub scaling_sup_ninety: f64,
}

/// Uniform grid on `[0, t_max]` with `n` intervals.
pub fn uniform_grid(t_max: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|i| t_max * i as f64 / n as f64).collect()
}

/// Scans monotonicity, convexity (second differences), the doubling
/// ratio, the growth index and the scaling bound on `grid` (sorted).
pub fn verify_properties(
    spec: &OrliczSpec,
    function: OrliczFunction,
    grid: &[f64],
) -> Result<PropertyReport> {
    let f = |t: f64| -> Result<f64> {
        match function {
            OrliczFunction::Phi => Ok(spec.phi(t)),
            OrliczFunction::Psi => spec.psi(t),
        }
    };
    let df = |t: f64| -> Result<f64> {
        match function {
            OrliczFunction::Phi => Ok(spec.phi_prime(t)),
            OrliczFunction::Psi => spec.psi_prime(t),
        }
    };
    let vals = grid.iter().map(|&t| f(t)).collect::<Result<Vec<f64>>>()?;
    let mut mono = 0;
    for w in vals.windows(2) {
        if !(w[1] > w[0]) {
            mono += 1;
        }
    }
    let mut conv = 0;
    for i in 1..grid.len().saturating_sub(1) {
        let s0 = (vals[i] - vals[i - 1]) / (grid[i] - grid[i - 1]);
        let s1 = (vals[i + 1] - vals[i]) / (grid[i + 1] - grid[i]);
        let scale = s0.abs().max(s1.abs());
        if s1 - s0 < -1e-9 * scale {
            conv += 1;
        }
    }
    let mut delta2: f64 = 0.0;
    let mut growth: f64 = 0.0;
    let mut half: f64 = 0.0;
    let mut ninety: f64 = 0.0;
    let svals: Vec<f64> = (0..=40).map(|i| (-(i as f64) / 2.0).exp2()).collect();
    for (&t, &v) in grid.iter().zip(&vals) {
        if t <= 0.0 || v <= 0.0 {
            continue;
        }
        delta2 = delta2.max(f(2.0 * t)? / v);
        growth = growth.max(t * df(t)? / v);
        for &s in &svals {
            let fs = f(s * t)?;
            half = half.max(fs / (s.powf(0.5 * spec.p) * v));
            ninety = ninety.max(fs / (s.powf(0.9 * spec.p) * v));
        }
    }
    Ok(PropertyReport {
        function,
        p: spec.p,
        lambda: spec.lambda,
        grid_points: grid.len(),
        grid_max: grid.last().copied().unwrap_or(0.0),
        monotonicity_violations: mono,
        convexity_violations: conv,
        delta2_sup: delta2,
        growth_index_sup: growth,
        scaling_sup_half: half,
        scaling_sup_ninety: ninety,
    })
}

/// `(min, max)` of `psi / phi` on a log grid over `[lo, hi]`.
pub fn psi_phi_ratio_bounds(spec: &OrliczSpec, lo: f64, hi: f64) -> Result<(f64, f64)> {
    let mut min = f64::INFINITY;
    let mut max: f64 = 0.0;
    for t in log_grid(lo, hi, 16) {
        let r = spec.psi(t)? / spec.phi(t);
        min = min.min(r);
        max = max.max(r);
    }
    Ok((min, max))
}
