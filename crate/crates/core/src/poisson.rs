//! Poisson extension `h = P[phi]` to the unit disk, `|Dh|`, and the disk
//! integrals `I1`, `I2` over the dyadic cells.
//!
//! The boundary is sampled at `M` uniform nodes and its discrete Fourier
//! coefficients `c_m`, `|m| < M/2`, define the extension
//! `h(z) = sum_{m >= 0} c_m z^m + sum_{m >= 1} c_{-m} conj(z)^m`. This is the
//! trapezoidal rule for the Poisson integral with the aliasing of the
//! kernel removed; both agree up to `|z|^(M/2)`.

use crate::circle_map::CircleMap;
use crate::energy::{EnergyParams, EnergyReport, GrowthConfig};
use crate::error::{Error, Result};
use crate::orlicz::OrliczSpec;
use crate::quad::GaussLegendre;
use crate::sum::CompensatedSum;
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::{Arc, Mutex};

/// Series terms kept once `|z|^m` drops below this.
const SERIES_CUTOFF: f64 = 1e-17;
/// Largest boundary sample count.
pub const MAX_NODES: usize = 1 << 24;
/// Smallest allowed `1 - |z|`.
pub const MIN_DELTA: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DerivativeMode {
    AnalyticKernel,
    FiniteDifference,
}

/// Fourier coefficients from `m` boundary samples.
#[derive(Debug)]
struct Coefficients {
    nodes: usize,
    /// `c_0, c_1, ..., c_{M/2 - 1}`.
    pos: Vec<Complex64>,
    /// `c_{-1}, c_{-2}, ..., c_{-(M/2 - 1)}` at index `m - 1`.
    neg: Vec<Complex64>,
}

impl Coefficients {
    fn build(map: &CircleMap, nodes: usize) -> Self {
        let mut buf: Vec<Complex64> = (0..nodes)
            .into_par_iter()
            .map(|k| {
                let (x, y) = map.image_point(k as f64 / nodes as f64);
                Complex64::new(x, y)
            })
            .collect();
        FftPlanner::new().plan_fft_forward(nodes).process(&mut buf);
        let scale = 1.0 / nodes as f64;
        let half = nodes / 2;
        let pos = buf[..half].iter().map(|c| c * scale).collect();
        let neg = (1..half).map(|m| buf[nodes - m] * scale).collect();
        Self { nodes, pos, neg }
    }

    /// Terms needed at modulus `r`; `None` past the available band.
    fn terms(&self, r: f64) -> Option<usize> {
        if r == 0.0 {
            return Some(2);
        }
        let k = (SERIES_CUTOFF.ln() / r.ln()).ceil() as usize + 1;
        (k <= self.pos.len()).then_some(k.max(2))
    }

    fn value(&self, z: Complex64, k: usize) -> Complex64 {
        let zc = z.conj();
        let mut acc = Complex64::new(0.0, 0.0);
        for m in (1..k.min(self.pos.len())).rev() {
            acc = acc * z + self.pos[m];
        }
        let mut h = acc * z + self.pos[0];
        let mut acc = Complex64::new(0.0, 0.0);
        for m in (1..k.min(self.neg.len() + 1)).rev() {
            acc = acc * zc + self.neg[m - 1];
        }
        h += acc * zc;
        h
    }

    /// `(h_z, conj(h_zbar))`, both as power series in `z`.
    fn derivatives(&self, z: Complex64, k: usize) -> (Complex64, Complex64) {
        let mut a = Complex64::new(0.0, 0.0);
        for m in (1..k.min(self.pos.len())).rev() {
            a = a * z + self.pos[m] * m as f64;
        }
        let mut b = Complex64::new(0.0, 0.0);
        for m in (1..k.min(self.neg.len() + 1)).rev() {
            b = b * z + self.neg[m - 1].conj() * m as f64;
        }
        (a, b)
    }
}

/// Harmonic extension of a circle map.
#[derive(Debug)]
pub struct PoissonExtension {
    pub boundary: CircleMap,
    /// Boundary nodes of the base rule (a power of two).
    pub kernel_nodes: usize,
    pub derivative_mode: DerivativeMode,
    /// Base of the doubling tolerance `tol / (1 - |z|)` in [`Self::extend`].
    pub tolerance: f64,
    cache: Mutex<Vec<Arc<Coefficients>>>,
}

fn check_point(z: Complex64) -> Result<f64> {
    let r = z.norm();
    if !r.is_finite() || r > 1.0 - MIN_DELTA {
        return Err(Error::Domain(format!(
            "need |z| <= 1 - {MIN_DELTA}, got |z| = {r}"
        )));
    }
    Ok(r)
}

impl PoissonExtension {
    pub fn new(boundary: CircleMap) -> Self {
        Self {
            boundary,
            kernel_nodes: 1 << 12,
            derivative_mode: DerivativeMode::AnalyticKernel,
            tolerance: 1e-9,
            cache: Mutex::new(Vec::new()),
        }
    }

    pub fn with_nodes(mut self, nodes: usize) -> Result<Self> {
        if !nodes.is_power_of_two() || !(16..=MAX_NODES).contains(&nodes) {
            return Err(Error::Domain(format!(
                "kernel nodes must be a power of two in [16, {MAX_NODES}], got {nodes}"
            )));
        }
        self.kernel_nodes = nodes;
        Ok(self)
    }

    pub fn with_mode(mut self, mode: DerivativeMode) -> Self {
        self.derivative_mode = mode;
        self
    }

    fn coefficients(&self, nodes: usize) -> Arc<Coefficients> {
        let mut cache = self.cache.lock().expect("coefficient cache poisoned");
        if let Some(c) = cache.iter().find(|c| c.nodes == nodes) {
            return c.clone();
        }
        let c = Arc::new(Coefficients::build(&self.boundary, nodes));
        cache.push(c.clone());
        c
    }

    /// Smallest node count from the base one whose band covers modulus `r`.
    fn nodes_for(&self, r: f64) -> Result<usize> {
        let need = if r == 0.0 {
            2
        } else {
            2 * ((SERIES_CUTOFF.ln() / r.ln()).ceil() as usize + 2)
        };
        let n = need.next_power_of_two().max(self.kernel_nodes);
        if n > MAX_NODES {
            return Err(Error::Precision(format!(
                "|z| = {r} needs {n} boundary nodes, budget is {MAX_NODES}"
            )));
        }
        Ok(n)
    }

    /// Rule used for fixed evaluations at modulus `r`: wide enough for the
    /// finite-difference stencil, so both derivative modes see one function.
    fn fixed_rule(&self, r: f64) -> Result<Arc<Coefficients>> {
        Ok(self.coefficients(self.nodes_for(r + (1.0 - r) / 50.0)?))
    }

    /// `h(z)`, doubling the boundary nodes until the change is below
    /// `tolerance / (1 - |z|)`.
    pub fn extend(&self, z: Complex64) -> Result<Complex64> {
        Ok(self.extend_with_error(z)?.0)
    }

    /// `h(z)` with the size of the last doubling change.
    pub fn extend_with_error(&self, z: Complex64) -> Result<(Complex64, f64)> {
        let r = check_point(z)?;
        let tol = self.tolerance / (1.0 - r);
        let mut n = self.nodes_for(r)?;
        let c = self.coefficients(n);
        let mut prev = c.value(z, c.terms(r).expect("band covers r"));
        while 2 * n <= MAX_NODES {
            n *= 2;
            let c = self.coefficients(n);
            let next = c.value(z, c.terms(r).expect("band covers r"));
            let change = (next - prev).norm();
            if change < tol {
                return Ok((next, change));
            }
            prev = next;
        }
        Err(Error::Precision(format!(
            "extension at |z| = {r} did not settle within {MAX_NODES} nodes"
        )))
    }

    /// `h(z)` from the base rule only (a fixed harmonic function).
    pub fn extend_fixed(&self, z: Complex64) -> Result<Complex64> {
        let r = check_point(z)?;
        let c = self.fixed_rule(r)?;
        Ok(c.value(z, c.terms(r).expect("band covers r")))
    }

    /// `(h_z, h_zbar)` from the base rule, by the configured mode.
    pub fn derivatives(&self, z: Complex64) -> Result<(Complex64, Complex64)> {
        let r = check_point(z)?;
        let c = self.fixed_rule(r)?;
        match self.derivative_mode {
            DerivativeMode::AnalyticKernel => {
                let (a, b) = c.derivatives(z, c.terms(r).expect("band covers r"));
                Ok((a, b.conj()))
            }
            DerivativeMode::FiniteDifference => {
                let h = (1.0 - r) / 100.0;
                let k = c.terms(r + 2.0 * h).expect("band covers the stencil");
                let f = |dz: Complex64| c.value(z + dz, k);
                let d =
                    |e: Complex64| (f(e * -2.0) - f(e * 2.0) + (f(e) - f(-e)) * 8.0) / (12.0 * h);
                let hx = d(Complex64::new(h, 0.0));
                let hy = d(Complex64::new(0.0, h));
                let i = Complex64::i();
                Ok(((hx - i * hy) * 0.5, (hx + i * hy) * 0.5))
            }
        }
    }

    /// `|Dh(z)| = |h_z| + |h_zbar|`.
    pub fn derivative_norm(&self, z: Complex64) -> Result<f64> {
        let (a, b) = self.derivatives(z)?;
        Ok(a.norm() + b.norm())
    }

    /// `|Dh|` at the Gauss nodes of every dyadic cell up to level `levels`.
    pub fn disk_samples(&self, levels: u32, gauss: usize) -> Result<DiskSamples> {
        if levels == 0 {
            return Err(Error::Domain("truncation level must be at least 1".into()));
        }
        if levels > MAX_DISK_LEVEL {
            return Err(Error::Resource(format!(
                "level {levels} exceeds the disk budget {MAX_DISK_LEVEL}"
            )));
        }
        let nodes = (1usize << (levels + 7)).max(self.kernel_nodes);
        if nodes > MAX_NODES {
            return Err(Error::Resource(format!(
                "level {levels} needs {nodes} boundary nodes"
            )));
        }
        let c = self.coefficients(nodes);
        let gl = GaussLegendre::new(gauss);
        let unit: Vec<(f64, f64)> = gl.mapped(0.0, 1.0).collect();
        let levels = (1..=levels)
            .map(|j| level_samples(&c, j, &unit))
            .collect::<Result<Vec<_>>>()?;
        Ok(DiskSamples {
            gauss,
            nodes,
            levels,
        })
    }
}

/// Deepest level of [`PoissonExtension::disk_samples`].
pub const MAX_DISK_LEVEL: u32 = 17;

/// `|Dh|` samples on one annulus `1 - 2^(1-j) <= r <= 1 - 2^-j`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LevelSamples {
    pub j: u32,
    /// Radial nodes with weights (`r dr` included).
    pub radial: Vec<(f64, f64)>,
    /// Angular offsets in units of one cell, with weights summing to one.
    pub angular: Vec<(f64, f64)>,
    /// `|Dh|` indexed `[radial][angular][cell]`, flattened.
    pub values: Vec<f64>,
}

impl LevelSamples {
    fn cells(&self) -> usize {
        1usize << self.j
    }

    /// Integral of `g(|Dh|, delta)` over the annulus.
    pub fn integrate<G: Fn(f64, f64) -> f64 + Sync>(&self, g: G) -> f64 {
        let n = self.cells();
        let cell_angle = 2.0 * PI / n as f64;
        let mut s = CompensatedSum::new();
        for (ri, &(r, wr)) in self.radial.iter().enumerate() {
            let delta = 1.0 - r;
            for (ai, &(_, wa)) in self.angular.iter().enumerate() {
                let base = (ri * self.angular.len() + ai) * n;
                let row: f64 = self.values[base..base + n]
                    .iter()
                    .map(|&d| g(d, delta))
                    .sum();
                s.add(wr * wa * cell_angle * row);
            }
        }
        s.value()
    }

    /// `(r, theta, |Dh|)` for every sample.
    pub fn points(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        let n = self.cells();
        self.radial
            .iter()
            .enumerate()
            .flat_map(move |(ri, &(r, _))| {
                self.angular
                    .iter()
                    .enumerate()
                    .flat_map(move |(ai, &(x, _))| {
                        let base = (ri * self.angular.len() + ai) * n;
                        (0..n).map(move |k| {
                            (
                                r,
                                2.0 * PI * (k as f64 + x) / n as f64,
                                self.values[base + k],
                            )
                        })
                    })
            })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiskSamples {
    pub gauss: usize,
    /// Boundary nodes behind the samples.
    pub nodes: usize,
    pub levels: Vec<LevelSamples>,
}

fn level_samples(c: &Coefficients, j: u32, unit: &[(f64, f64)]) -> Result<LevelSamples> {
    let (r0, r1) = if j == 1 {
        (0.0, 0.5)
    } else {
        (1.0 - (1.0 - j as f64).exp2(), 1.0 - (-(j as f64)).exp2())
    };
    let radial: Vec<(f64, f64)> = unit
        .iter()
        .map(|&(x, w)| {
            let r = r0 + (r1 - r0) * x;
            (r, w * (r1 - r0) * r)
        })
        .collect();
    let n = 1usize << j;
    let fft = FftPlanner::new().plan_fft_inverse(n);
    let jobs: Vec<(f64, f64)> = radial
        .iter()
        .flat_map(|&(r, _)| unit.iter().map(move |&(x, _)| (r, x)))
        .collect();
    let rows = jobs
        .par_iter()
        .map(|&(r, x)| {
            let k = c.terms(r).ok_or_else(|| {
                Error::Precision(format!(
                    "radius {r} needs more than {} boundary nodes",
                    c.nodes
                ))
            })?;
            let theta0 = 2.0 * PI * x / n as f64;
            // fold the derivative series onto the n-point angular grid
            let mut a = vec![Complex64::new(0.0, 0.0); n];
            let mut b = vec![Complex64::new(0.0, 0.0); n];
            let step = Complex64::from_polar(r, theta0);
            let mut pw = Complex64::new(1.0, 0.0);
            for m in 0..k.saturating_sub(1) {
                let q = m % n;
                if m + 1 < c.pos.len() {
                    a[q] += c.pos[m + 1] * ((m + 1) as f64) * pw;
                }
                if m < c.neg.len() {
                    b[q] += c.neg[m].conj() * ((m + 1) as f64) * pw;
                }
                pw *= step;
            }
            fft.process(&mut a);
            fft.process(&mut b);
            Ok(a.iter()
                .zip(&b)
                .map(|(x, y)| x.norm() + y.norm())
                .collect::<Vec<f64>>())
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    Ok(LevelSamples {
        j,
        radial,
        angular: unit.to_vec(),
        values: rows.concat(),
    })
}

/// `I1` level sums: `|Dh|^p delta^alpha log^lambda(2 / delta)`.
pub fn i1_levels(samples: &DiskSamples, params: &EnergyParams) -> Vec<f64> {
    let (p, a, l) = (params.p, params.alpha, params.lambda);
    samples
        .levels
        .iter()
        .map(|lv| lv.integrate(|d, delta| d.powf(p) * delta.powf(a) * (2.0 / delta).ln().powf(l)))
        .collect()
}

/// `I2` level sums: `Phi(|Dh|) delta^alpha`.
pub fn i2_levels(samples: &DiskSamples, params: &EnergyParams) -> Vec<f64> {
    let spec = OrliczSpec::unresolved(params.p, params.lambda);
    let a = params.alpha;
    samples
        .levels
        .iter()
        .map(|lv| lv.integrate(|d, delta| spec.phi(d) * delta.powf(a)))
        .collect()
}

pub fn i1(samples: &DiskSamples, params: &EnergyParams, cfg: &GrowthConfig) -> EnergyReport {
    EnergyReport::from_levels("i1", *params, i1_levels(samples, params), cfg)
}

pub fn i2(samples: &DiskSamples, params: &EnergyParams, cfg: &GrowthConfig) -> EnergyReport {
    EnergyReport::from_levels("i2", *params, i2_levels(samples, params), cfg)
}

/// Writes `r,theta,|Dh|` rows.
pub fn write_samples_csv<W: std::io::Write>(
    samples: &DiskSamples,
    mut out: W,
) -> std::io::Result<()> {
    writeln!(out, "r,theta,dh")?;
    for lv in &samples.levels {
        for (r, t, d) in lv.points() {
            writeln!(out, "{r},{t},{d}")?;
        }
    }
    Ok(())
}

/// Outcome of the validity checks on one extension.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidityReport {
    /// `|h(0) - mean of phi|` and the tolerance it is held to.
    pub mean_value_error: f64,
    pub mean_value_tolerance: f64,
    /// Largest 5-point Laplacian of `Re h`, `Im h`.
    pub max_laplacian: f64,
    /// Largest relative gap between the two derivative modes.
    pub max_mode_gap: f64,
    pub points: usize,
}

impl ValidityReport {
    pub const LAPLACIAN_TOLERANCE: f64 = 1e-4;
    pub const MODE_TOLERANCE: f64 = 1e-5;

    pub fn passed(&self) -> bool {
        self.mean_value_error <= self.mean_value_tolerance
            && self.max_laplacian <= Self::LAPLACIAN_TOLERANCE
            && self.max_mode_gap <= Self::MODE_TOLERANCE
    }
}

/// Boundary mean of `phi` by the midpoint rule on `2^k` nodes, doubled
/// until two successive changes are below `tol`; returns the value and the
/// larger of those changes. One small change is not enough: on maps with
/// dyadic plateaus the midpoint sums can stall for a single doubling.
pub fn boundary_mean(map: &CircleMap, tol: f64) -> Result<(Complex64, f64)> {
    let mean = |n: usize| -> Complex64 {
        let (re, im): (Vec<f64>, Vec<f64>) = (0..n)
            .into_par_iter()
            .map(|k| map.image_point((k as f64 + 0.5) / n as f64))
            .unzip();
        Complex64::new(crate::sum::sum(&re), crate::sum::sum(&im)) / n as f64
    };
    let mut n = 1 << 10;
    let mut prev = mean(n);
    let mut last_change = f64::INFINITY;
    while n < MAX_NODES {
        n *= 2;
        let next = mean(n);
        let change = (next - prev).norm();
        if change < tol && last_change < tol {
            return Ok((next, change.max(last_change)));
        }
        last_change = change;
        prev = next;
    }
    Err(Error::Precision(format!(
        "boundary mean did not settle within {MAX_NODES} nodes"
    )))
}

/// Mean-value, harmonicity and derivative-mode checks at seeded random
/// points: harmonicity in `|z| <= 0.5`, mode agreement in `|z| <= 0.99`.
pub fn validity_checks(map: &CircleMap, points: usize, seed: u64) -> Result<ValidityReport> {
    use rand::{Rng, SeedableRng};
    let ext = PoissonExtension::new(map.clone());
    let (h0, e0) = ext.extend_with_error(Complex64::new(0.0, 0.0))?;
    let (avg, e1) = boundary_mean(map, 1e-9)?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut disk_point = |rmax: f64| {
        let r = rmax * rng.gen::<f64>().sqrt();
        Complex64::from_polar(r, 2.0 * PI * rng.gen::<f64>())
    };
    let step = 1e-3;
    let mut max_lap = 0.0f64;
    for _ in 0..points {
        let z = disk_point(0.5);
        let f = |dz: Complex64| ext.extend_fixed(z + dz);
        let c = f(Complex64::new(0.0, 0.0))?;
        let sum = f(Complex64::new(step, 0.0))?
            + f(Complex64::new(-step, 0.0))?
            + f(Complex64::new(0.0, step))?
            + f(Complex64::new(0.0, -step))?;
        let lap = (sum - c * 4.0) / (step * step);
        max_lap = max_lap.max(lap.re.abs()).max(lap.im.abs());
    }
    let fd = PoissonExtension::new(map.clone()).with_mode(DerivativeMode::FiniteDifference);
    let mut max_gap = 0.0f64;
    for _ in 0..points {
        let z = disk_point(0.99);
        let a = ext.derivative_norm(z)?;
        let b = fd.derivative_norm(z)?;
        max_gap = max_gap.max((a - b).abs() / a.abs().max(1e-300));
    }
    Ok(ValidityReport {
        mean_value_error: (h0 - avg).norm(),
        mean_value_tolerance: 1e-9 + 10.0 * (e0 + e1),
        max_laplacian: max_lap,
        max_mode_gap: max_gap,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64, y: f64) -> Complex64 {
        Complex64::new(x, y)
    }

    #[test]
    fn identity_and_rotation() {
        let ext = PoissonExtension::new(CircleMap::identity());
        let z = c(0.3, 0.4);
        assert!((ext.extend(z).unwrap() - z).norm() < 1e-12);
        assert!((ext.derivative_norm(c(0.9, -0.2)).unwrap() - 1.0).abs() < 1e-12);
        let rot = PoissonExtension::new(CircleMap::rotation(0.2).unwrap());
        let w = Complex64::from_polar(1.0, 2.0 * PI * 0.2) * z;
        assert!((rot.extend(z).unwrap() - w).norm() < 1e-12);
        assert!((rot.derivative_norm(z).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_boundary_points() {
        let ext = PoissonExtension::new(CircleMap::identity());
        assert!(ext.extend(c(1.0, 0.0)).is_err());
        assert!(ext.with_nodes(100).is_err());
    }

    #[test]
    fn direct_kernel_oracle() {
        // oracle: the Poisson integral by a fine direct trapezoid sum
        let map = CircleMap::piecewise_linear(vec![(0.0, 0.0), (0.5, 0.25), (1.0, 1.0)]).unwrap();
        let ext = PoissonExtension::new(map.clone());
        let z = c(0.2, -0.35);
        let n = 1 << 16;
        let mut re = CompensatedSum::new();
        let mut im = CompensatedSum::new();
        for k in 0..n {
            let t = k as f64 / n as f64;
            let w = Complex64::from_polar(1.0, 2.0 * PI * t);
            let p = (1.0 - z.norm_sqr()) / (w - z).norm_sqr();
            let (x, y) = map.image_point(t);
            re.add(p * x / n as f64);
            im.add(p * y / n as f64);
        }
        let got = ext.extend(z).unwrap();
        assert!((got - c(re.value(), im.value())).norm() < 1e-8);
        assert!(got.norm() <= 1.0);
    }

    #[test]
    fn modes_agree_on_pl_map() {
        let map = CircleMap::piecewise_linear(vec![(0.0, 0.0), (0.2, 0.5), (0.7, 0.6), (1.0, 1.0)])
            .unwrap();
        let a = PoissonExtension::new(map.clone());
        let b = PoissonExtension::new(map).with_mode(DerivativeMode::FiniteDifference);
        for z in [c(0.0, 0.0), c(0.5, 0.5), c(-0.98, 0.1)] {
            let (x, y) = (a.derivative_norm(z).unwrap(), b.derivative_norm(z).unwrap());
            assert!((x - y).abs() < 1e-5 * x, "{z}: {x} vs {y}");
        }
    }

    #[test]
    fn identity_disk_integrals() {
        let cfg = GrowthConfig::default();
        let ext = PoissonExtension::new(CircleMap::identity());
        let s = ext.disk_samples(16, 4).unwrap();
        let r = i1(&s, &EnergyParams::new(2.0, 0.0, 0.0).unwrap(), &cfg);
        let covered = PI * (1.0 - (-16f64).exp2()).powi(2);
        assert!((r.value_at_j - covered).abs() < 1e-10);
        assert!((r.extrapolated_total.unwrap() - PI).abs() < 1e-6);
        let r = i1(&s, &EnergyParams::new(2.0, 1.0, 0.0).unwrap(), &cfg);
        assert!((r.extrapolated_total.unwrap() - PI / 3.0).abs() < 1e-4);
        let r = i1(&s, &EnergyParams::new(2.0, -1.0, 0.0).unwrap(), &cfg);
        // 2 pi (ln 2 - 2^-j) per level
        for (j, &v) in r.per_level.iter().enumerate().skip(1) {
            let want = 2.0 * PI * (2f64.ln() - (-(j as f64) - 1.0).exp2());
            assert!(
                (v - want).abs() < 1e-5 * want,
                "level {}: {v} vs {want}",
                j + 1
            );
        }
        assert_eq!(r.classification, crate::energy::Classification::Diverging);
        let r = i2(&s, &EnergyParams::new(2.0, 0.0, 3.0).unwrap(), &cfg);
        let want = PI * (std::f64::consts::E + 1.0).ln().powi(3);
        assert!((r.extrapolated_total.unwrap() - want).abs() < 1e-5 * want);
    }

    #[test]
    fn samples_match_pointwise_derivative() {
        let map = CircleMap::piecewise_linear(vec![(0.0, 0.0), (0.5, 0.25), (1.0, 1.0)]).unwrap();
        let s = PoissonExtension::new(map.clone())
            .disk_samples(6, 4)
            .unwrap();
        // same discretisation, so only the evaluation path differs
        let ext = PoissonExtension::new(map).with_nodes(s.nodes).unwrap();
        for lv in &s.levels {
            for (r, t, d) in lv.points().step_by(7) {
                let want = ext.derivative_norm(Complex64::from_polar(r, t)).unwrap();
                assert!(
                    (d - want).abs() < 1e-9 * want,
                    "j={} r={r} t={t}: {d} vs {want}",
                    lv.j
                );
            }
        }
    }

    #[test]
    fn validity_on_pl_map() {
        let map = CircleMap::piecewise_linear(vec![(0.0, 0.0), (0.5, 0.25), (1.0, 1.0)]).unwrap();
        let r = validity_checks(&map, 20, 3).unwrap();
        assert!(r.passed(), "{r:?}");
    }
}
