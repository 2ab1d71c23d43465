//! The radial weight `w(x) = delta^alpha ln^lambda(2 / delta)`, with
//! `delta = |1 - |x||`, its Jones factors and an empirical `A_p` estimator.

use crate::error::{Error, Result};
use crate::quad::adaptive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightRole {
    Main,
    JonesW1,
    JonesW2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightSpec {
    pub alpha: f64,
    pub lambda: f64,
    pub role: WeightRole,
}

impl WeightSpec {
    pub fn main(alpha: f64, lambda: f64) -> Self {
        Self {
            alpha,
            lambda,
            role: WeightRole::Main,
        }
    }

    /// Weight as a function of `delta` for `|x| <= 2`.
    pub fn profile(&self, delta: f64) -> f64 {
        if delta <= 0.0 {
            // limit at the circle
            return if self.alpha < 0.0 || (self.alpha == 0.0 && self.lambda > 0.0) {
                f64::INFINITY
            } else if self.alpha == 0.0 && self.lambda == 0.0 {
                1.0
            } else {
                0.0
            };
        }
        let l = (2.0 / delta).ln();
        let log_part = if self.lambda == 0.0 {
            1.0
        } else {
            l.powf(self.lambda)
        };
        let pow_part = if self.alpha == 0.0 {
            1.0
        } else {
            delta.powf(self.alpha)
        };
        pow_part * log_part
    }

    /// `w` at a point of the plane given by its modulus.
    pub fn at_modulus(&self, r: f64) -> f64 {
        self.at_modulus_delta(r, (1.0 - r).abs())
    }

    /// As [`Self::at_modulus`] with `delta = |1 - r|` supplied exactly, for
    /// points closer to the circle than `r` can resolve.
    pub fn at_modulus_delta(&self, r: f64, delta: f64) -> f64 {
        if r >= 2.0 {
            return if self.lambda == 0.0 {
                1.0
            } else {
                std::f64::consts::LN_2.powf(self.lambda)
            };
        }
        self.profile(delta)
    }

    pub fn weight(&self, x: (f64, f64)) -> f64 {
        self.at_modulus(x.0.hypot(x.1))
    }

    /// `d/dt [t^alpha ln^lambda(2/t)]`.
    pub fn profile_derivative(&self, t: f64) -> f64 {
        let l = (2.0 / t).ln();
        t.powf(self.alpha - 1.0) * l.powf(self.lambda) * (self.alpha - self.lambda / l)
    }

    /// For `alpha < 0`: the scale below which the profile strictly
    /// decreases in `t` (grows toward the circle).
    pub fn blow_up_scale(&self) -> Option<f64> {
        if self.alpha >= 0.0 {
            return None;
        }
        if self.lambda >= 0.0 {
            Some(2.0)
        } else {
            Some(2.0 * (-(self.lambda / self.alpha).abs()).exp())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JonesFactors {
    pub a1: f64,
    pub a2: f64,
    pub w1: WeightSpec,
    pub w2: WeightSpec,
}

/// `w_{alpha,lambda} = w1 * w2^(1-p)` with `w1`, `w2` of `A_1` type and
/// `a1 + a2 = 1`, `alpha = -a1 + a2 (p - 1)`.
pub fn jones_factors(p: f64, alpha: f64, lambda: f64) -> Result<JonesFactors> {
    if !(p > 1.0) || !(alpha > -1.0 && alpha < p - 1.0) || !lambda.is_finite() {
        return Err(Error::Domain(format!(
            "Jones factors need p > 1 and -1 < alpha < p - 1, got p = {p}, alpha = {alpha}"
        )));
    }
    let a1 = (p - 1.0 - alpha) / p;
    let a2 = 1.0 - a1;
    let (l1, l2) = if lambda >= 0.0 {
        (p * lambda, lambda)
    } else {
        (-lambda, 2.0 * lambda / (1.0 - p))
    };
    Ok(JonesFactors {
        a1,
        a2,
        w1: WeightSpec {
            alpha: -a1,
            lambda: l1,
            role: WeightRole::JonesW1,
        },
        w2: WeightSpec {
            alpha: -a2,
            lambda: l2,
            role: WeightRole::JonesW2,
        },
    })
}

/// Angle of the circle `|x| = rho` inside the disk of radius `r` whose
/// center is at distance `d` from the origin.
fn arc_angle(rho: f64, d: f64, r: f64) -> f64 {
    if rho + d <= r {
        return 2.0 * PI;
    }
    if rho <= 0.0 || d == 0.0 {
        return if rho < r { 2.0 * PI } else { 0.0 };
    }
    // half-angle forms of the law of cosines avoid cancellation
    let one_minus_c = (r - rho + d) * (r + rho - d) / (2.0 * rho * d);
    let one_plus_c = (rho + d - r) * (rho + d + r) / (2.0 * rho * d);
    if one_minus_c <= 0.0 {
        0.0
    } else if one_plus_c <= 0.0 {
        2.0 * PI
    } else if one_minus_c <= 1.0 {
        4.0 * (0.5 * one_minus_c).sqrt().asin()
    } else {
        2.0 * PI - 4.0 * (0.5 * one_plus_c).sqrt().min(1.0).asin()
    }
}

const SHELL_LIMIT: usize = 1000;

/// `int_a^b g(rho, |1 - rho|) theta(rho) rho d rho` for a radial `g` that
/// may be singular at `rho = 1`; geometric shells toward the circle detect
/// non-integrable singularities.
fn radial_integral<G: Fn(f64, f64) -> f64>(g: &G, a: f64, b: f64, d: f64, r: f64) -> Result<f64> {
    let f = |rho: f64| g(rho, (1.0 - rho).abs()) * arc_angle(rho, d, r) * rho;
    let tol = 1e-11;
    if b <= a {
        return Ok(0.0);
    }
    // callers split at the circle, so [a, b] never straddles it
    if a != 1.0 && b != 1.0 {
        return Ok(adaptive(f, a, b, tol, 0.0));
    }
    // shells in delta = |1 - rho| on each side of the circle
    let side = |lo_delta: f64, sign: f64| -> Result<f64> {
        // integrate delta in (0, lo_delta]
        // delta is passed on exactly: 1 - delta rounds to 1 deep in the shells
        let h = |delta: f64| {
            let rho = 1.0 + sign * delta;
            g(rho, delta) * arc_angle(rho, d, r) * rho
        };
        let mut total = 0.0;
        let mut prev = f64::INFINITY;
        let mut hi = lo_delta;
        let mut small_run = 0;
        for k in 0..SHELL_LIMIT {
            let lo = 0.5 * hi;
            let c = adaptive(h, lo, hi, tol, 0.0);
            if !c.is_finite() {
                return Err(Error::QuadratureOverflow(
                    "non-finite shell contribution".into(),
                ));
            }
            total += c;
            if k > 40 && c >= prev && c > 0.0 {
                return Err(Error::QuadratureOverflow(format!(
                    "shell contributions do not decay near the circle (shell {k})"
                )));
            }
            if c <= 1e-15 * total.abs() {
                small_run += 1;
                if small_run >= 3 {
                    return Ok(total);
                }
            } else {
                small_run = 0;
            }
            prev = c;
            hi = lo;
        }
        Err(Error::QuadratureOverflow("shells did not converge".into()))
    };
    let mut total = 0.0;
    if a < 1.0 {
        total += side(1.0 - a, -1.0)?;
    }
    if b > 1.0 {
        total += side(b - 1.0, 1.0)?;
    }
    Ok(total)
}

/// Average of a radial function over the disk with center at distance `d`
/// from the origin and radius `r`.
pub fn disk_average<G: Fn(f64) -> f64>(g: G, d: f64, r: f64) -> Result<f64> {
    disk_average_by_delta(|rho, _| g(rho), d, r)
}

/// [`disk_average`] for `g(rho, delta)` with `delta = |1 - rho|` exact.
pub fn disk_average_by_delta<G: Fn(f64, f64) -> f64>(g: G, d: f64, r: f64) -> Result<f64> {
    let lo = (d - r).max(0.0);
    let hi = d + r;
    let mut breaks = vec![lo, hi];
    for b in [(r - d).abs(), 1.0, 2.0] {
        if b > lo && b < hi {
            breaks.push(b);
        }
    }
    breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    breaks.dedup();
    let mut total = 0.0;
    for w in breaks.windows(2) {
        total += radial_integral(&g, w[0], w[1], d, r)?;
    }
    Ok(total / (PI * r * r))
}

/// `A_p` characteristic of one disk.
pub fn ap_ratio(spec: &WeightSpec, p: f64, d: f64, r: f64) -> Result<f64> {
    let a = disk_average_by_delta(|rho, delta| spec.at_modulus_delta(rho, delta), d, r)?;
    let e = 1.0 / (1.0 - p);
    let b = disk_average_by_delta(|rho, delta| spec.at_modulus_delta(rho, delta).powf(e), d, r)?;
    Ok(a * b.powf(p - 1.0))
}

/// Disk `(center, radius)` of trial `i`: center uniform in `[-4, 4]^2`,
/// radius log-uniform in `[1e-4, 4]`.
pub fn trial_disk(seed: u64, trial: u64) -> ((f64, f64), f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    let c = (rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0));
    let r = (rng.gen_range((1e-4f64).ln()..(4.0f64).ln())).exp();
    (c, r)
}

/// Largest sampled `A_p` characteristic.
pub fn estimate_ap_constant(spec: &WeightSpec, p: f64, trials: usize, seed: u64) -> Result<f64> {
    if !(p > 1.0) || trials == 0 {
        return Err(Error::Domain(format!(
            "need p > 1 and trials >= 1, got p = {p}, trials = {trials}"
        )));
    }
    let ratios = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let (c, r) = trial_disk(seed, t);
            ap_ratio(spec, p, c.0.hypot(c.1), r)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(ratios.into_iter().fold(0.0, f64::max))
}

/// Largest sampled `avg_B w / min_S w`, with `S` a 64-point sample of `B`.
pub fn estimate_a1_constant(spec: &WeightSpec, trials: usize, seed: u64) -> Result<f64> {
    let ratios = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let (c, r) = trial_disk(seed, t);
            let avg = disk_average_by_delta(
                |rho, delta| spec.at_modulus_delta(rho, delta),
                c.0.hypot(c.1),
                r,
            )?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
            rng.set_stream(t);
            let min = (0..64)
                .map(|_| {
                    let rad = r * rng.gen::<f64>().sqrt();
                    let a = 2.0 * PI * rng.gen::<f64>();
                    spec.weight((c.0 + rad * a.cos(), c.1 + rad * a.sin()))
                })
                .fold(f64::INFINITY, f64::min);
            Ok(avg / min)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(ratios.into_iter().fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn weight_examples() {
        assert_eq!(WeightSpec::main(0.0, 0.0).weight((0.3, -0.2)), 1.0);
        assert_eq!(WeightSpec::main(1.0, 0.0).weight((0.0, 0.0)), 1.0);
        let w = WeightSpec::main(0.0, 2.0).weight((3.0, 0.0));
        assert!((w - 0.4805).abs() < 1e-4);
        assert_eq!(
            WeightSpec::main(-0.5, 0.0).weight((1.0, 0.0)),
            f64::INFINITY
        );
        assert_eq!(WeightSpec::main(0.5, 0.0).weight((0.0, 1.0)), 0.0);
    }

    #[test]
    fn jones_examples() {
        let j = jones_factors(2.0, 0.0, 0.0).unwrap();
        assert!((j.a1 - 0.5).abs() < 1e-15 && (j.a2 - 0.5).abs() < 1e-15);
        let j = jones_factors(2.0, 0.5, 1.0).unwrap();
        assert_eq!((j.w1.lambda, j.w2.lambda), (2.0, 1.0));
        let j = jones_factors(3.0, 0.0, -1.0).unwrap();
        assert_eq!((j.w1.lambda, j.w2.lambda), (1.0, 1.0));
        assert!(jones_factors(2.0, 1.5, 0.0).is_err());
    }

    #[test]
    fn disk_average_of_constant() {
        for (d, r) in [(0.0, 0.5), (1.0, 0.3), (0.2, 3.0), (3.0, 1e-4), (1.5, 0.6)] {
            let a = disk_average(|_| 1.0, d, r).unwrap();
            assert!((a - 1.0).abs() < 1e-9, "({d}, {r}): {a}");
        }
    }

    #[test]
    fn disk_average_of_modulus_squared() {
        // oracle: average of |x|^2 over a disk is d^2 + r^2 / 2
        for (d, r) in [(0.0, 0.5), (1.0, 0.3), (0.2, 3.0), (2.5, 0.7)] {
            let a = disk_average(|rho| rho * rho, d, r).unwrap();
            assert!((a - (d * d + 0.5 * r * r)).abs() < 1e-9, "({d}, {r})");
        }
    }

    #[test]
    fn constant_weight_has_unit_constant() {
        let c = estimate_ap_constant(&WeightSpec::main(0.0, 0.0), 2.0, 50, 3).unwrap();
        assert!((c - 1.0).abs() < 1e-9);
    }

    #[test]
    fn non_integrable_weight_overflows() {
        let r = ap_ratio(&WeightSpec::main(-1.5, 0.0), 2.0, 1.0, 0.1);
        assert!(matches!(r, Err(Error::QuadratureOverflow(_))), "{r:?}");
    }

    #[test]
    fn blow_up_sign() {
        for (a, l) in [(-0.5, 0.0), (-0.5, 2.0), (-0.5, -2.0), (-0.9, -0.3)] {
            let w = WeightSpec::main(a, l);
            let t0 = w.blow_up_scale().unwrap();
            for i in 1..200 {
                let t = t0.min(1.0) * (-(i as f64) / 4.0).exp2();
                assert!(w.profile_derivative(t) < 0.0, "({a}, {l}) t = {t}");
            }
        }
    }

    proptest! {
        #[test]
        fn factorization_identity(p in 1.1f64..4.0, af in 0.01f64..0.99, l in -3.0f64..3.0, r in 0.0f64..3.0) {
            let alpha = -1.0 + af * p;
            let j = jones_factors(p, alpha, l).unwrap();
            prop_assume!((1.0 - r).abs() > 1e-6);
            let w = WeightSpec::main(alpha, l).at_modulus(r);
            let prod = j.w1.at_modulus(r) * j.w2.at_modulus(r).powf(1.0 - p);
            prop_assert!((w - prod).abs() <= 1e-9 * w);
        }
    }
}
