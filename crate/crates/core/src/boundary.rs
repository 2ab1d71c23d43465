//! Boundary double integrals `U` and `V` and the kernel
//! `A(t) = int_1^t -x^(1+alpha-p) log2^lambda(1/x) dx`.
//!
//! With `c = 2 + alpha - p` and `y = log2(1/x)`,
//! `A(t) = ln 2 int_0^Y y^lambda 2^(-c y) dy`, `Y = log2(1/t)`, for `t <= 1`.
//! For `t > 1` the logarithm is negative; its absolute value is used, so
//! `A(t) = -ln 2 int_0^Y y^lambda 2^(c y) dy`, `Y = log2 t`.

use crate::circle_map::CircleMap;
use crate::energy::{Classification, EnergyParams, EnergyReport, GrowthConfig};
use crate::error::{Error, Result};
use crate::orlicz::OrliczSpec;
use crate::quad::{adaptive, GaussLegendre};
use crate::sum::CompensatedSum;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::{LN_2, PI};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    /// Outer nodes.
    pub n_outer: usize,
    /// Inner nodes per separation ring and side.
    pub n_inner: usize,
    /// Separation rings resolved toward the diagonal.
    pub diagonal_rings: u32,
    /// Relative change under refinement accepted as converged.
    pub tol: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            n_outer: 512,
            n_inner: 16,
            diagonal_rings: 30,
            tol: 0.02,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_outer < 8 || self.n_inner < 8 || self.diagonal_rings < 4 {
            return Err(Error::Domain(format!(
                "quadrature needs n_outer, n_inner >= 8 and diagonal_rings >= 4, got {self:?}"
            )));
        }
        Ok(())
    }

    /// Both grids doubled.
    pub fn refined(&self) -> Self {
        Self {
            n_outer: 2 * self.n_outer,
            n_inner: 2 * self.n_inner,
            ..*self
        }
    }
}

fn integrand_exponent(params: &EnergyParams) -> f64 {
    2.0 + params.alpha - params.p
}

/// `ln 2 int_0^y w^lambda 2^(-sign c w) dw` by adaptive quadrature.
fn log_side_integral(c: f64, lambda: f64, sign: f64, y: f64) -> f64 {
    if y <= 0.0 {
        return 0.0;
    }
    if lambda <= -1.0 {
        return f64::INFINITY;
    }
    let rate = -sign * c * LN_2;
    if rate > 0.0 && rate * y + lambda * y.max(1.0).ln() > 700.0 {
        return f64::INFINITY;
    }
    if lambda < 0.0 {
        // w = v^kappa removes the endpoint singularity
        let kappa = 1.0 / (1.0 + lambda);
        let v_max = y.powf(1.0 + lambda);
        let f = |v: f64| LN_2 * kappa * (rate * v.powf(kappa)).exp();
        return chunked(f, v_max);
    }
    let f = |w: f64| LN_2 * if lambda == 0.0 { 1.0 } else { w.powf(lambda) } * (rate * w).exp();
    chunked(f, y)
}

/// Integral over `[0, hi]` in unit chunks, stopping once chunks vanish.
fn chunked<F: Fn(f64) -> f64>(f: F, hi: f64) -> f64 {
    if hi.is_infinite() {
        let mut s = CompensatedSum::new();
        let mut a = 0.0;
        loop {
            let c = adaptive(&f, a, a + 1.0, 1e-12, 0.0);
            s.add(c);
            if !s.value().is_finite() {
                return f64::INFINITY;
            }
            if c <= 1e-17 * s.value() && a > 1.0 {
                return s.value();
            }
            a += 1.0;
            if a > 1e5 {
                return f64::INFINITY;
            }
        }
    }
    let mut s = CompensatedSum::new();
    let mut a = 0.0;
    while a < hi {
        let b = (a + 16.0).min(hi);
        s.add(adaptive(&f, a, b, 1e-12, 0.0));
        a = b;
    }
    s.value()
}

/// `A(t)` by adaptive quadrature; `+inf` at `t = 0` when the integral
/// diverges, and `+-inf` for `t != 1` when `lambda <= -1`.
pub fn kernel_a(params: &EnergyParams, t: f64) -> f64 {
    let c = integrand_exponent(params);
    if t == 1.0 {
        return 0.0;
    }
    if t < 1.0 {
        if t <= 0.0 && (c <= 0.0 || params.lambda <= -1.0) {
            return f64::INFINITY;
        }
        let y = if t <= 0.0 { f64::INFINITY } else { -t.log2() };
        log_side_integral(c, params.lambda, 1.0, y)
    } else {
        -log_side_integral(c, params.lambda, -1.0, t.log2())
    }
}

/// Cubic Hermite table of one side of the kernel.
#[derive(Debug, Clone)]
struct HermiteTable {
    h: f64,
    kappa: f64,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl HermiteTable {
    fn build(c: f64, lambda: f64, sign: f64, y_max: f64) -> Self {
        let rate = -sign * c * LN_2;
        let (kappa, deriv): (f64, Box<dyn Fn(f64) -> f64 + Sync>) = if lambda < 0.0 {
            let kappa = 1.0 / (1.0 + lambda);
            (
                kappa,
                Box::new(move |v: f64| LN_2 * kappa * (rate * v.powf(kappa)).exp()),
            )
        } else {
            (
                1.0,
                Box::new(move |w: f64| {
                    LN_2 * if lambda == 0.0 { 1.0 } else { w.powf(lambda) } * (rate * w).exp()
                }),
            )
        };
        let v_max = y_max.powf(1.0 / kappa);
        let h = 1.0 / 256.0;
        let n = (v_max / h).ceil() as usize + 1;
        let cells: Vec<f64> = (0..n - 1)
            .into_par_iter()
            .map(|i| adaptive(&deriv, i as f64 * h, (i + 1) as f64 * h, 1e-13, 0.0))
            .collect();
        let mut values = Vec::with_capacity(n);
        let mut acc = CompensatedSum::new();
        values.push(0.0);
        for c in cells {
            acc.add(c);
            values.push(acc.value());
        }
        let slopes = (0..n).map(|i| deriv(i as f64 * h)).collect();
        Self {
            h,
            kappa,
            values,
            slopes,
        }
    }

    fn v_max(&self) -> f64 {
        (self.values.len() - 1) as f64 * self.h
    }

    /// Integral up to `y` in the original variable, `None` past the table.
    fn eval(&self, y: f64) -> Option<f64> {
        let v = if self.kappa == 1.0 {
            y
        } else {
            y.powf(1.0 / self.kappa)
        };
        if v > self.v_max() {
            return None;
        }
        let x = v / self.h;
        let i = (x.floor() as usize).min(self.values.len() - 2);
        let t = x - i as f64;
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let (m0, m1) = (self.slopes[i] * self.h, self.slopes[i + 1] * self.h);
        let t2 = t * t;
        let t3 = t2 * t;
        Some(
            (2.0 * t3 - 3.0 * t2 + 1.0) * y0
                + (t3 - 2.0 * t2 + t) * m0
                + (-2.0 * t3 + 3.0 * t2) * y1
                + (t3 - t2) * m1,
        )
    }
}

/// Fast tabulated kernel for one parameter triple.
#[derive(Debug, Clone)]
pub struct Kernel {
    pub params: EnergyParams,
    below: Option<HermiteTable>,
    above: Option<HermiteTable>,
}

/// Table range in `log2(1/t)`; covers every positive double.
const Y_TABLE_MAX: f64 = 1100.0;
/// Table range in `log2 t` above one.
const Y_ABOVE_MAX: f64 = 4.0;

impl Kernel {
    pub fn new(params: &EnergyParams) -> Self {
        let c = integrand_exponent(params);
        let l = params.lambda;
        if l <= -1.0 {
            return Self {
                params: *params,
                below: None,
                above: None,
            };
        }
        // keep the table where the integral stays representable
        let y_max = if c < 0.0 {
            (900.0 / (-c)).min(Y_TABLE_MAX)
        } else {
            Y_TABLE_MAX
        };
        Self {
            params: *params,
            below: Some(HermiteTable::build(c, l, 1.0, y_max)),
            above: Some(HermiteTable::build(c, l, -1.0, Y_ABOVE_MAX)),
        }
    }

    /// Whether `A` is finite away from `t = 0`.
    pub fn is_finite(&self) -> bool {
        self.below.is_some()
    }

    pub fn eval(&self, t: f64) -> f64 {
        if t == 1.0 {
            return 0.0;
        }
        let (Some(below), Some(above)) = (&self.below, &self.above) else {
            return if t < 1.0 {
                f64::INFINITY
            } else {
                f64::NEG_INFINITY
            };
        };
        if t < 1.0 && t > 0.0 {
            below
                .eval(-t.log2())
                .unwrap_or_else(|| kernel_a(&self.params, t))
        } else if t > 1.0 {
            above
                .eval(t.log2())
                .map(|v| -v)
                .unwrap_or_else(|| kernel_a(&self.params, t))
        } else {
            kernel_a(&self.params, t)
        }
    }

    /// Mean of `A(2 sin(pi x))` over `0 < x < r`.
    pub fn mean_near_zero(&self, r: f64) -> f64 {
        if !self.is_finite() {
            return f64::INFINITY;
        }
        // x = r 2^-w resolves the logarithmic end
        let f = |w: f64| {
            let x = r * (-w).exp2();
            self.eval(2.0 * (PI * x).sin()) * x * LN_2
        };
        chunked(f, f64::INFINITY) / r
    }
}

/// `U(x) = floor(x) + u(x - floor(x))`.
fn wrapped_lift(map: &CircleMap, x: f64) -> f64 {
    let w = x.floor();
    w + map.lift_value(x - w)
}

fn chord(turns: f64) -> f64 {
    2.0 * (PI * turns).sin().abs()
}

/// `U` for several parameter triples from one pass over the quadrature
/// nodes. Level `j` of each report is the separation ring
/// `2^-(j+1) < |Delta| <= 2^-j` (in turns); the innermost disk is reported
/// as `tail_estimate`.
pub fn u_energy_multi(
    map: &CircleMap,
    params: &[EnergyParams],
    quad: &QuadratureSpec,
    cfg: &GrowthConfig,
) -> Result<Vec<UReport>> {
    quad.validate()?;
    let specs: Vec<OrliczSpec> = params
        .iter()
        .map(|p| OrliczSpec::unresolved(p.p, p.lambda))
        .collect();
    let gl = GaussLegendre::new(quad.n_inner);
    let rings = quad.diagonal_rings;
    // s-grid resolves the ring width, capped for deep rings
    const MAX_S_NODES: usize = 1 << 20;
    let mut per_ring: Vec<Vec<f64>> = vec![Vec::with_capacity(rings as usize); params.len()];
    for j in 1..=rings {
        let n_s = quad
            .n_outer
            .max(1usize << (j + 3).min(20))
            .min(MAX_S_NODES.max(quad.n_outer));
        let lo = (-(j as f64) - 1.0).exp2();
        let hi = (-(j as f64)).exp2();
        let nodes: Vec<(f64, f64)> = gl.mapped(lo, hi).collect();
        let sums = (0..n_s)
            .into_par_iter()
            .fold(
                || vec![0.0f64; params.len()],
                |mut acc, i| {
                    let s = (i as f64 + 0.5) / n_s as f64;
                    let us = wrapped_lift(map, s);
                    for &(d, w) in &nodes {
                        let dist = chord(d);
                        let ratio = chord(wrapped_lift(map, s + d) - us) / dist;
                        for (k, (pr, spec)) in params.iter().zip(&specs).enumerate() {
                            acc[k] += w * spec.phi(ratio) * dist.powf(pr.alpha);
                        }
                    }
                    acc
                },
            )
            .reduce(
                || vec![0.0f64; params.len()],
                |mut a, b| {
                    for (x, y) in a.iter_mut().zip(b) {
                        *x += y;
                    }
                    a
                },
            );
        for (k, v) in sums.into_iter().enumerate() {
            // both signs of Delta, |d xi| |d eta| = 4 pi^2 ds dDelta
            let c = 8.0 * PI * PI * v / n_s as f64;
            if !c.is_finite() {
                return Err(Error::NonFinite(format!("ring {j} of U")));
            }
            per_ring[k].push(c);
        }
    }
    // innermost disk from the local ratio at its edge
    let r = (-(rings as f64) - 1.0).exp2();
    let n_s = quad.n_outer.max(1usize << (rings + 3).min(20));
    let local: Vec<f64> = (0..n_s)
        .into_par_iter()
        .map(|i| {
            let s = (i as f64 + 0.5) / n_s as f64;
            chord(wrapped_lift(map, s + r) - wrapped_lift(map, s - r)) / chord(2.0 * r)
        })
        .collect();
    Ok(params
        .iter()
        .zip(&specs)
        .zip(per_ring)
        .map(|((pr, spec), levels)| {
            let tail = if pr.alpha > -1.0 {
                let m: f64 = local.iter().map(|&q| spec.phi(q)).sum::<f64>() / n_s as f64;
                let disk =
                    2.0 * (2.0 * PI).powf(pr.alpha) * r.powf(pr.alpha + 1.0) / (pr.alpha + 1.0);
                Some(4.0 * PI * PI * m * disk)
            } else {
                None
            };
            UReport {
                report: EnergyReport::from_levels("u", *pr, levels, cfg),
                tail_estimate: tail,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UReport {
    pub report: EnergyReport,
    /// Contribution of separations below the last ring.
    pub tail_estimate: Option<f64>,
}

impl UReport {
    pub fn total(&self) -> f64 {
        self.report.value_at_j + self.tail_estimate.unwrap_or(f64::INFINITY)
    }
}

pub fn u_energy(
    map: &CircleMap,
    params: &EnergyParams,
    quad: &QuadratureSpec,
    cfg: &GrowthConfig,
) -> Result<UReport> {
    Ok(u_energy_multi(map, std::slice::from_ref(params), quad, cfg)?.remove(0))
}

/// `V` under the three conventions for a negative inner integral.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VValues {
    /// Kernel cut to `max(A, 0)`: the inner integral is then nonnegative.
    pub truncated: f64,
    /// Inner integral with the full kernel, negative values clipped to zero.
    pub positive_part: f64,
    /// Full kernel, defined only when no inner integral is negative or
    /// `p - 1` is an integer.
    pub raw: Option<f64>,
    /// Outer nodes where the full-kernel inner integral is negative.
    pub negative_inner_nodes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VReport {
    pub params: EnergyParams,
    pub quad: QuadratureSpec,
    pub values: VValues,
    /// Same quantities on the doubled grids.
    pub refined: VValues,
    /// Relative change of the truncated value under refinement.
    pub relative_change: f64,
    pub classification: Classification,
}

/// Offsets of the inner cells from the outer node, in turns: rings
/// `2^-(m+1) < |x| <= 2^-m` split into `n_inner` cells per side.
fn inner_cell_edges(quad: &QuadratureSpec) -> Vec<(f64, f64)> {
    let m = quad.n_inner;
    let mut edges = Vec::with_capacity(2 * m * quad.diagonal_rings as usize);
    for ring in 1..=quad.diagonal_rings {
        let lo = (-(ring as f64) - 1.0).exp2();
        let width = lo / m as f64;
        for side in [-1.0, 1.0] {
            for i in 0..m {
                let x0 = lo + i as f64 * width;
                edges.push((side * x0, side * (x0 + width)));
            }
        }
    }
    edges
}

/// Image measure of each inner cell around preimage `a`, then of the
/// innermost disk.
fn inner_masses(map: &CircleMap, a: f64, edges: &[(f64, f64)], r: f64) -> (Vec<f64>, f64) {
    let masses = edges
        .iter()
        .map(|&(x0, x1)| (wrapped_lift(map, a + x1) - wrapped_lift(map, a + x0)).abs())
        .collect();
    (masses, wrapped_lift(map, a + r) - wrapped_lift(map, a - r))
}

/// Mean of `A(2 sin(pi |x|))` and of its positive part over each cell.
fn cell_kernel_means(k: &Kernel, edges: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let gl = GaussLegendre::new(4);
    edges
        .iter()
        .map(|&(x0, x1)| {
            let (lo, hi) = (x0.abs().min(x1.abs()), x0.abs().max(x1.abs()));
            let mut full = 0.0;
            let mut trunc = 0.0;
            for (x, w) in gl.mapped(lo, hi) {
                let v = k.eval(chord(x));
                full += w * v;
                trunc += w * v.max(0.0);
            }
            (full / (hi - lo), trunc / (hi - lo))
        })
        .collect()
}

fn v_values(inner_full: &[f64], inner_trunc: &[f64], p: f64) -> VValues {
    let n = inner_full.len() as f64;
    let e = p - 1.0;
    let integer_power = e.fract() == 0.0;
    let negative = inner_full.iter().filter(|&&v| v < 0.0).count();
    let mean = |f: &dyn Fn(f64) -> f64, xs: &[f64]| {
        let mut s = CompensatedSum::new();
        for &x in xs {
            s.add(f(x));
        }
        2.0 * PI * s.value() / n
    };
    VValues {
        truncated: mean(&|v: f64| v.max(0.0).powf(e), inner_trunc),
        positive_part: mean(&|v: f64| v.max(0.0).powf(e), inner_full),
        raw: (negative == 0 || integer_power).then(|| mean(&|v: f64| v.powf(e), inner_full)),
        negative_inner_nodes: negative,
    }
}

/// `V` values for several parameter triples on one grid.
fn v_grid(map: &CircleMap, kernels: &[Kernel], quad: &QuadratureSpec) -> Result<Vec<VValues>> {
    let n = quad.n_outer;
    let tol = 1e-13f64;
    let preimages = (0..n)
        .into_par_iter()
        .map(|i| map.invert((i as f64 + 0.5) / n as f64, tol.max(map.eval_tolerance)))
        .collect::<Result<Vec<f64>>>()?;
    let edges = inner_cell_edges(quad);
    let r = (-(quad.diagonal_rings as f64) - 1.0).exp2();
    let means: Vec<(Vec<(f64, f64)>, f64)> = kernels
        .iter()
        .map(|k| (cell_kernel_means(k, &edges), k.mean_near_zero(r)))
        .collect();
    // (node, kernel) -> (full, truncated)
    let inner: Vec<Vec<(f64, f64)>> = preimages
        .par_iter()
        .map(|&a| {
            let (masses, rem) = inner_masses(map, a, &edges, r);
            means
                .iter()
                .map(|(cells, near)| {
                    let mut full = CompensatedSum::new();
                    let mut trunc = CompensatedSum::new();
                    for (&(f, t), &w) in cells.iter().zip(&masses) {
                        full.add(f * w);
                        trunc.add(t * w);
                    }
                    // chords below one: the truncated kernel equals A there
                    full.add(near * rem);
                    trunc.add(near.max(0.0) * rem);
                    (2.0 * PI * full.value(), 2.0 * PI * trunc.value())
                })
                .collect()
        })
        .collect();
    Ok(kernels
        .iter()
        .enumerate()
        .map(|(ki, k)| {
            let full: Vec<f64> = inner.iter().map(|row| row[ki].0).collect();
            let trunc: Vec<f64> = inner.iter().map(|row| row[ki].1).collect();
            v_values(&full, &trunc, k.params.p)
        })
        .collect())
}

/// `V` for several parameter triples, with a refinement check.
///
/// Outer nodes are uniform on the image circle and pulled back with
/// [`CircleMap::invert`]. The inner integral over `eta` is written in the
/// preimage variable, `|d eta| = 2 pi du`, and summed over cells graded
/// toward the diagonal with exact lift increments as weights.
pub fn v_energy_multi(
    map: &CircleMap,
    params: &[EnergyParams],
    quad: &QuadratureSpec,
) -> Result<Vec<VReport>> {
    quad.validate()?;
    for pr in params {
        if pr.lambda <= -1.0 {
            return Err(Error::Domain(format!(
                "the kernel is infinite for lambda = {} <= -1",
                pr.lambda
            )));
        }
    }
    let kernels: Vec<Kernel> = params.iter().map(Kernel::new).collect();
    let coarse = v_grid(map, &kernels, quad)?;
    let fine_quad = quad.refined();
    let fine = v_grid(map, &kernels, &fine_quad)?;
    Ok(params
        .iter()
        .zip(coarse)
        .zip(fine)
        .map(|((pr, values), refined)| {
            let change =
                (refined.truncated - values.truncated).abs() / refined.truncated.abs().max(1e-300);
            let classification = if !refined.truncated.is_finite() {
                Classification::Diverging
            } else if change <= quad.tol {
                Classification::Converged
            } else {
                Classification::Inconclusive
            };
            VReport {
                params: *pr,
                quad: *quad,
                values,
                refined,
                relative_change: change,
                classification,
            }
        })
        .collect())
}

pub fn v_energy(map: &CircleMap, params: &EnergyParams, quad: &QuadratureSpec) -> Result<VReport> {
    Ok(v_energy_multi(map, std::slice::from_ref(params), quad)?.remove(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params(p: f64, a: f64, l: f64) -> EnergyParams {
        EnergyParams::new(p, a, l).unwrap()
    }

    #[test]
    fn kernel_examples() {
        let pr = params(2.0, 0.0, 0.0);
        assert_eq!(kernel_a(&pr, 1.0), 0.0);
        assert!((kernel_a(&pr, 0.5) - LN_2).abs() < 1e-10);
        assert!((kernel_a(&pr, 2.0) + LN_2).abs() < 1e-10);
        assert_eq!(kernel_a(&pr, 0.0), f64::INFINITY);
        // c = 1: A(t) = 1 - t
        let pr = params(2.0, 1.0, 0.0);
        assert!((kernel_a(&pr, 0.25) - 0.75).abs() < 1e-10);
        assert!((kernel_a(&pr, 0.0) - 1.0).abs() < 1e-10);
        assert_eq!(kernel_a(&params(2.0, 0.0, -1.0), 0.5), f64::INFINITY);
    }

    fn closed_form_lambda_zero(c: f64, t: f64) -> f64 {
        if c == 0.0 {
            -t.ln()
        } else {
            (1.0 - t.powf(c)) / c
        }
    }

    #[test]
    fn table_matches_direct_quadrature() {
        for (p, a, l) in [
            (2.0, 0.0, 0.0),
            (1.5, -0.5, 2.0),
            (3.0, 1.5, -0.5),
            (3.0, -0.5, 2.0),
            (2.0, 0.5, -0.9),
        ] {
            let pr = params(p, a, l);
            let k = Kernel::new(&pr);
            for t in [
                1e-300, 1e-30, 1e-6, 0.013, 0.3, 0.77, 0.999, 1.001, 1.4, 2.0,
            ] {
                let want = kernel_a(&pr, t);
                let got = k.eval(t);
                assert!(
                    got == want || (got - want).abs() <= 1e-9 * want.abs().max(1e-2),
                    "({p},{a},{l}) t={t}: {got} vs {want}"
                );
            }
        }
    }

    proptest! {
        #[test]
        fn kernel_lambda_zero_closed_form(p in 1.2f64..3.5, a in -0.9f64..2.0, t in 1e-8f64..2.0) {
            let pr = params(p, a, 0.0);
            let want = closed_form_lambda_zero(2.0 + a - p, t);
            let got = kernel_a(&pr, t);
            prop_assert!((got - want).abs() <= 1e-9 * want.abs().max(1e-6));
        }

        #[test]
        fn kernel_sign(p in 1.2f64..3.5, a in -0.9f64..2.0, l in -0.9f64..3.0, t in 1e-6f64..2.0) {
            let v = kernel_a(&params(p, a, l), t);
            if t < 1.0 { prop_assert!(v > 0.0) } else if t > 1.0 { prop_assert!(v < 0.0) }
        }
    }

    #[test]
    fn identity_u_anchor() {
        let cfg = GrowthConfig::default();
        let q = QuadratureSpec {
            diagonal_rings: 12,
            ..Default::default()
        };
        let r = u_energy(&CircleMap::identity(), &params(2.0, 0.0, 0.0), &q, &cfg).unwrap();
        assert!(
            (r.total() - 4.0 * PI * PI).abs() < 1e-3 * 4.0 * PI * PI,
            "{}",
            r.total()
        );
        let rot = u_energy(
            &CircleMap::rotation(0.37).unwrap(),
            &params(2.0, 0.0, 0.0),
            &q,
            &cfg,
        )
        .unwrap();
        assert!((rot.total() - r.total()).abs() < 1e-9);
    }

    #[test]
    fn identity_u_dimension_reduction() {
        // oracle: U = 4 pi^2 int_0^1 (2 sin(pi x))^alpha dx
        let cfg = GrowthConfig::default();
        let q = QuadratureSpec {
            diagonal_rings: 14,
            ..Default::default()
        };
        let r = u_energy(&CircleMap::identity(), &params(2.0, 0.5, 0.0), &q, &cfg).unwrap();
        let want = 4.0
            * PI
            * PI
            * adaptive(
                |x: f64| (2.0 * (PI * x).sin()).powf(0.5),
                0.0,
                1.0,
                1e-12,
                0.0,
            );
        assert!(
            (r.total() - want).abs() < 1e-4 * want,
            "{} vs {want}",
            r.total()
        );
    }

    #[test]
    fn identity_v_vanishes() {
        let q = QuadratureSpec {
            n_outer: 64,
            ..Default::default()
        };
        let r = v_energy(&CircleMap::identity(), &params(2.0, 0.0, 0.0), &q).unwrap();
        assert!(r.values.raw.unwrap().abs() < 1e-3, "{:?}", r.values);
        assert!(r.values.positive_part.abs() < 1e-3);
        assert!(r.values.truncated > 0.0);
    }

    #[test]
    fn identity_v_converges() {
        let q = QuadratureSpec {
            n_outer: 64,
            ..Default::default()
        };
        let r = v_energy(&CircleMap::identity(), &params(2.0, 0.5, 0.0), &q).unwrap();
        assert_eq!(r.classification, Classification::Converged);
        assert!(r.values.truncated > 0.0);
        assert!(r.relative_change < 0.01);
    }

    #[test]
    fn v_rejects_infinite_kernel() {
        let q = QuadratureSpec::default();
        assert!(v_energy(&CircleMap::identity(), &params(2.0, 0.0, -2.0), &q).is_err());
    }
}
