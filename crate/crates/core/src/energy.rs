//! Truncated dyadic energies `E1`, `E2`, the report type shared by every
//! functional, growth classification and parameter-region labels.

use crate::circle_map::CircleMap;
use crate::error::{Error, Result};
use crate::orlicz::OrliczSpec;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyParams {
    pub p: f64,
    pub alpha: f64,
    pub lambda: f64,
}

impl EnergyParams {
    pub fn new(p: f64, alpha: f64, lambda: f64) -> Result<Self> {
        if !(p > 1.0 && p.is_finite()) || !alpha.is_finite() || !lambda.is_finite() {
            return Err(Error::Domain(format!(
                "need p > 1 and finite alpha, lambda; got ({p}, {alpha}, {lambda})"
            )));
        }
        Ok(Self { p, alpha, lambda })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Converged,
    Diverging,
    Inconclusive,
}

impl std::fmt::Display for Classification {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Classification::Converged => "converged",
            Classification::Diverging => "diverging",
            Classification::Inconclusive => "inconclusive",
        })
    }
}

/// Thresholds of [`classify_growth`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthConfig {
    pub window: usize,
    /// Largest per-level tail ratio counted as geometric decay.
    pub decay_ratio: f64,
    /// Smallest relative growth of the cumulative value per window counted
    /// as divergence.
    pub growth_per_window: f64,
}

impl Default for GrowthConfig {
    fn default() -> Self {
        Self {
            window: 4,
            decay_ratio: 0.9,
            growth_per_window: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub functional: String,
    pub params: EnergyParams,
    /// Sum of `per_level`.
    pub value_at_j: f64,
    /// `S_1, ..., S_J`.
    pub per_level: Vec<f64>,
    pub levels: u32,
    pub classification: Classification,
    /// Least-squares slope of `log2 S_j` over the last two windows.
    pub growth_exponent: Option<f64>,
    /// Per-level ratio of the last window sum to the one before.
    pub tail_ratio: Option<f64>,
    /// Truncated value plus the tail of the fitted level trend, when the
    /// trend decays.
    pub extrapolated_total: Option<f64>,
}

impl EnergyReport {
    pub fn from_levels(
        functional: &str,
        params: EnergyParams,
        per_level: Vec<f64>,
        cfg: &GrowthConfig,
    ) -> Self {
        let value = crate::sum::sum(&per_level);
        let g = classify_growth(&per_level, cfg);
        let extrapolated_total = extrapolate_tail(&per_level, 2 * cfg.window).map(|t| value + t);
        Self {
            functional: functional.to_string(),
            params,
            value_at_j: value,
            levels: per_level.len() as u32,
            per_level,
            classification: g.classification,
            growth_exponent: g.growth_exponent,
            tail_ratio: g.tail_ratio,
            extrapolated_total,
        }
    }

    /// Cumulative sums `sum_{i <= j} S_i`.
    pub fn cumulative(&self) -> Vec<f64> {
        let mut acc = crate::sum::CompensatedSum::new();
        self.per_level
            .iter()
            .map(|&s| {
                acc.add(s);
                acc.value()
            })
            .collect()
    }

    /// The report recomputed from the first `j` levels.
    pub fn truncated(&self, j: u32, cfg: &GrowthConfig) -> Self {
        let n = (j as usize).min(self.per_level.len());
        Self::from_levels(
            &self.functional,
            self.params,
            self.per_level[..n].to_vec(),
            cfg,
        )
    }

    /// Value truncated at level `j` (`j <= levels`).
    pub fn value_at(&self, j: u32) -> f64 {
        crate::sum::sum(&self.per_level[..(j as usize).min(self.per_level.len())])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthDiagnosis {
    pub classification: Classification,
    pub growth_exponent: Option<f64>,
    pub tail_ratio: Option<f64>,
}

/// Least-squares slope of `ys` against `xs`.
pub fn ls_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Least-squares fit of `ln S_j = a + b j + c ln j` over the last `window`
/// levels, summed past the last level. `None` unless the fitted trend
/// decays.
pub fn extrapolate_tail(per_level: &[f64], window: usize) -> Option<f64> {
    let n = per_level.len();
    let window = window.max(3);
    if n < window
        || per_level[n - window..]
            .iter()
            .any(|&s| !(s > 0.0) || !s.is_finite())
    {
        return None;
    }
    let rows: Vec<[f64; 4]> = (n - window..n)
        .map(|i| {
            let j = (i + 1) as f64;
            [1.0, j, j.ln(), per_level[i].ln()]
        })
        .collect();
    let mut m = [[0.0f64; 4]; 3];
    for r in &rows {
        for a in 0..3 {
            for b in 0..4 {
                m[a][b] += r[a] * r[b];
            }
        }
    }
    let coef = solve3(m)?;
    let (a, b, c) = (coef[0], coef[1], coef[2]);
    if !(b < 0.0) {
        return None;
    }
    const MAX_TERMS: usize = 1_000_000;
    let mut tail = crate::sum::CompensatedSum::new();
    for k in (n + 1)..(n + 1 + MAX_TERMS) {
        let kf = k as f64;
        let t = (a + b * kf + c * kf.ln()).exp();
        tail.add(t);
        // past the peak of k^c e^(bk) the terms decay at least geometrically
        if kf > -c / b && t <= 1e-17 * tail.value() {
            return Some(tail.value());
        }
    }
    None
}

/// Gaussian elimination with partial pivoting on an augmented 3x4 system.
fn solve3(mut m: [[f64; 4]; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let piv = (col..3).max_by(|&x, &y| m[x][col].abs().total_cmp(&m[y][col].abs()))?;
        if m[piv][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, piv);
        for row in 0..3 {
            if row != col {
                let f = m[row][col] / m[col][col];
                for k in col..4 {
                    m[row][k] -= f * m[col][k];
                }
            }
        }
    }
    let out = [m[0][3] / m[0][0], m[1][3] / m[1][1], m[2][3] / m[2][2]];
    out.iter().all(|v| v.is_finite()).then_some(out)
}

/// Converged when the tail decays geometrically, diverging when the
/// cumulative value keeps growing over each of the last two windows.
pub fn classify_growth(per_level: &[f64], cfg: &GrowthConfig) -> GrowthDiagnosis {
    let w = cfg.window.max(1);
    let n = per_level.len();
    if n < 2 * w {
        return GrowthDiagnosis {
            classification: Classification::Inconclusive,
            growth_exponent: None,
            tail_ratio: None,
        };
    }
    let last: f64 = per_level[n - w..].iter().sum();
    let prev: f64 = per_level[n - 2 * w..n - w].iter().sum();
    let tail_ratio = if prev > 0.0 {
        Some((last / prev).powf(1.0 / w as f64))
    } else if last == 0.0 {
        Some(0.0)
    } else {
        None
    };
    let (xs, ys): (Vec<f64>, Vec<f64>) = (n - 2 * w..n)
        .filter(|&i| per_level[i] > 0.0)
        .map(|i| ((i + 1) as f64, per_level[i].log2()))
        .unzip();
    let growth_exponent = ls_slope(&xs, &ys);
    let cum = |m: usize| -> f64 { per_level[..m].iter().sum() };
    let grows = |hi: usize, lo: usize| {
        let (a, b) = (cum(hi), cum(lo));
        if b > 0.0 {
            a / b - 1.0 >= cfg.growth_per_window
        } else {
            a > 0.0
        }
    };
    let classification = if tail_ratio.is_some_and(|r| r <= cfg.decay_ratio) {
        Classification::Converged
    } else if grows(n, n - w) && grows(n - w, n - 2 * w) {
        Classification::Diverging
    } else {
        Classification::Inconclusive
    };
    GrowthDiagnosis {
        classification,
        growth_exponent,
        tail_ratio,
    }
}

fn check_levels(levels: u32) -> Result<()> {
    if levels == 0 {
        return Err(Error::Domain("truncation level must be at least 1".into()));
    }
    Ok(())
}

/// `ell(Gamma_j) = 2 pi 2^-j`.
pub fn arc_length(j: u32) -> f64 {
    2.0 * PI * (-(j as f64)).exp2()
}

/// Level sums of `E1`: `sum_k ell(phi Gamma_{j,k})^p ell(Gamma_j)^(2+alpha-p) j^lambda`.
pub fn e1_levels(map: &CircleMap, params: &EnergyParams, levels: u32) -> Result<Vec<f64>> {
    check_levels(levels)?;
    map.check_level(levels)?;
    let p = params.p;
    (1..=levels)
        .into_par_iter()
        .map(|j| {
            let s = map.level_sum(j, |d| d.powf(p))?;
            let scale = (2.0 * PI).powf(p)
                * arc_length(j).powf(2.0 + params.alpha - p)
                * (j as f64).powf(params.lambda);
            Ok(scale * s)
        })
        .collect()
}

/// Level sums of `E2`: `sum_k Phi(ell(phi Gamma) / ell(Gamma)) ell(Gamma)^(2+alpha)`.
pub fn e2_levels(
    map: &CircleMap,
    params: &EnergyParams,
    spec: &OrliczSpec,
    levels: u32,
) -> Result<Vec<f64>> {
    check_levels(levels)?;
    check_spec(params, spec)?;
    map.check_level(levels)?;
    (1..=levels)
        .into_par_iter()
        .map(|j| {
            let n = (j as f64).exp2();
            let s = map.level_sum(j, |d| spec.phi(d * n))?;
            Ok(arc_length(j).powf(2.0 + params.alpha) * s)
        })
        .collect()
}

pub(crate) fn check_spec(params: &EnergyParams, spec: &OrliczSpec) -> Result<()> {
    if spec.p != params.p || spec.lambda != params.lambda {
        return Err(Error::Domain(format!(
            "Orlicz spec ({}, {}) does not match params ({}, {})",
            spec.p, spec.lambda, params.p, params.lambda
        )));
    }
    Ok(())
}

pub fn e1(
    map: &CircleMap,
    params: &EnergyParams,
    levels: u32,
    cfg: &GrowthConfig,
) -> Result<EnergyReport> {
    Ok(EnergyReport::from_levels(
        "e1",
        *params,
        e1_levels(map, params, levels)?,
        cfg,
    ))
}

pub fn e2(
    map: &CircleMap,
    params: &EnergyParams,
    spec: &OrliczSpec,
    levels: u32,
    cfg: &GrowthConfig,
) -> Result<EnergyReport> {
    Ok(EnergyReport::from_levels(
        "e2",
        *params,
        e2_levels(map, params, spec, levels)?,
        cfg,
    ))
}

/// Parameter regions of the main trichotomy for harmonic extensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Region {
    /// Both disk integrals are finite for every boundary homeomorphism.
    FiniteRegion,
    /// Both disk integrals are comparable to the boundary energy `U`.
    ComparableRegion,
    /// No homeomorphic extension has finite `I1`.
    DivergentRegion,
    /// `alpha = -1`, `lambda < -1`: not settled.
    Uncovered,
}

impl std::fmt::Display for Region {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Region::FiniteRegion => "finite-region",
            Region::ComparableRegion => "comparable-region",
            Region::DivergentRegion => "divergent-region",
            Region::Uncovered => "uncovered",
        })
    }
}

pub fn region(params: &EnergyParams) -> Region {
    let EnergyParams { p, alpha, lambda } = *params;
    let crit = p - 2.0;
    if alpha > crit || (alpha == crit && lambda < -1.0) {
        Region::FiniteRegion
    } else if alpha > -1.0 {
        Region::ComparableRegion
    } else if alpha < -1.0 || lambda >= -1.0 {
        Region::DivergentRegion
    } else {
        Region::Uncovered
    }
}
