//! Map fleet, parameter grids, cross-functional comparisons and the
//! finite/divergent signatures of the Cantor-type examples.

use crate::boundary::{u_energy_multi, v_energy_multi, QuadratureSpec, VReport};
use crate::circle_map::CircleMap;
use crate::constructions::{build_schedule, CantorSchedule, ScheduleKind, FIXED_BITS};
use crate::energy::{e1, e2, ls_slope, Classification, EnergyParams, EnergyReport, GrowthConfig};
use crate::error::{Error, Result};
use crate::orlicz::OrliczSpec;
use crate::poisson::{i1, i2, PoissonExtension};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Maps every comparison study runs over.
pub const FLEET: [&str; 5] = [
    "identity",
    "rotation:rho=0.3",
    "piecewise_linear:points=0/0;0.5/0.25;1/1",
    "piecewise_linear:points=0/0;0.2/0.5;0.7/0.6;1/1",
    "cantor_log:s=2",
];

pub fn fleet() -> Result<Vec<CircleMap>> {
    FLEET.iter().map(|d| CircleMap::parse(d)).collect()
}

/// `p` in `{1.5, 2, 3}`, `alpha` in `{-0.5, p - 1.5}`, `lambda` in `{-2, 0, 2}`.
pub fn comparison_grid() -> Vec<EnergyParams> {
    let mut out = Vec::new();
    for p in [1.5, 2.0, 3.0] {
        for alpha in [-0.5, p - 1.5] {
            for lambda in [-2.0, 0.0, 2.0] {
                out.push(EnergyParams { p, alpha, lambda });
            }
        }
    }
    out
}

/// `max / min - 1`; `None` unless every value is finite and positive.
pub fn drift(values: &[f64]) -> Option<f64> {
    if values.is_empty() || values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return None;
    }
    let max = values.iter().copied().fold(f64::MIN, f64::max);
    let min = values.iter().copied().fold(f64::MAX, f64::min);
    Some(max / min - 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Functional {
    E1,
    E2,
    U,
    V,
    I1,
    I2,
}

impl Functional {
    pub const ALL: [Functional; 6] = [
        Functional::E1,
        Functional::E2,
        Functional::U,
        Functional::V,
        Functional::I1,
        Functional::I2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Functional::E1 => "e1",
            Functional::E2 => "e2",
            Functional::U => "u",
            Functional::V => "v",
            Functional::I1 => "i1",
            Functional::I2 => "i2",
        }
    }
}

impl fmt::Display for Functional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Functional {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Functional::ALL
            .into_iter()
            .find(|f| f.name() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| Error::Parse {
                token: s.to_string(),
                reason: "expected one of e1, e2, u, v, i1, i2".into(),
            })
    }
}

/// Results of one parameter point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub params: EnergyParams,
    /// Level-resolved functionals in the order requested.
    pub reports: Vec<EnergyReport>,
    pub v: Option<VReport>,
}

impl Evaluation {
    pub fn report(&self, f: Functional) -> Option<&EnergyReport> {
        self.reports.iter().find(|r| r.functional == f.name())
    }

    /// Ratios of `I1`, `I2`, `U` and `V^(1/(p-1))` to `E1`, both at the
    /// truncation level and between extrapolated totals.
    pub fn ratios(&self) -> Vec<Ratio> {
        let Some(e) = self.report(Functional::E1) else {
            return Vec::new();
        };
        let div = |a: Option<f64>, b: Option<f64>| match (a, b) {
            (Some(a), Some(b)) if b != 0.0 => Some(a / b),
            _ => None,
        };
        let mut out = Vec::new();
        for f in [Functional::I1, Functional::I2, Functional::U] {
            if let Some(r) = self.report(f) {
                out.push(Ratio {
                    name: format!("{f}/e1"),
                    at_j: div(Some(r.value_at_j), Some(e.value_at_j)),
                    extrapolated: div(r.extrapolated_total, e.extrapolated_total),
                });
            }
        }
        if let Some(v) = &self.v {
            let root = v.refined.truncated.powf(1.0 / (self.params.p - 1.0));
            let root = root.is_finite().then_some(root);
            out.push(Ratio {
                name: "v^(1/(p-1))/e1".into(),
                at_j: div(root, Some(e.value_at_j)),
                extrapolated: div(root, e.extrapolated_total),
            });
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ratio {
    pub name: String,
    pub at_j: Option<f64>,
    pub extrapolated: Option<f64>,
}

/// Computes the requested functionals for one map at every parameter point.
///
/// `U` uses `levels` diagonal rings so that its levels line up with the
/// dyadic ones; `V` does not depend on `levels`.
pub fn evaluate(
    map: &CircleMap,
    params: &[EnergyParams],
    functionals: &[Functional],
    levels: u32,
    quad: &QuadratureSpec,
    cfg: &GrowthConfig,
) -> Result<Vec<Evaluation>> {
    let wants = |f: Functional| functionals.contains(&f);
    let tag = |f: Functional| move |e: Error| e.in_functional(f.name());
    let u = if wants(Functional::U) {
        let q = QuadratureSpec {
            diagonal_rings: levels,
            ..*quad
        };
        Some(u_energy_multi(map, params, &q, cfg).map_err(tag(Functional::U))?)
    } else {
        None
    };
    let v = if wants(Functional::V) {
        Some(v_energy_multi(map, params, quad).map_err(tag(Functional::V))?)
    } else {
        None
    };
    let disk = if wants(Functional::I1) || wants(Functional::I2) {
        let f = if wants(Functional::I1) {
            Functional::I1
        } else {
            Functional::I2
        };
        Some(
            PoissonExtension::new(map.clone())
                .disk_samples(levels, 4)
                .map_err(tag(f))?,
        )
    } else {
        None
    };
    let mut out = Vec::with_capacity(params.len());
    for (i, pr) in params.iter().enumerate() {
        let mut reports = Vec::new();
        for &f in functionals {
            let r = match f {
                Functional::E1 => e1(map, pr, levels, cfg).map_err(tag(f))?,
                Functional::E2 => {
                    let spec = OrliczSpec::new(pr.p, pr.lambda).map_err(tag(f))?;
                    e2(map, pr, &spec, levels, cfg).map_err(tag(f))?
                }
                Functional::U => u.as_ref().expect("computed above")[i].report.clone(),
                Functional::I1 => i1(disk.as_ref().expect("computed above"), pr, cfg),
                Functional::I2 => i2(disk.as_ref().expect("computed above"), pr, cfg),
                Functional::V => continue,
            };
            reports.push(r);
        }
        out.push(Evaluation {
            params: *pr,
            reports,
            v: v.as_ref().map(|v| v[i].clone()),
        });
    }
    Ok(out)
}

/// How a [`RatioStudy`] was decided.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RatioBasis {
    /// Both functionals show a convergent trend at every level; their
    /// extrapolated totals are compared.
    Extrapolated,
    /// Some trend does not converge; partial sums are compared.
    PartialSums,
    /// Partial sums drift; both functionals must then fail to converge.
    BothDivergent,
}

/// Stability of `num / den` across truncation levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioStudy {
    pub numerator: String,
    pub denominator: String,
    pub params: EnergyParams,
    pub levels: Vec<u32>,
    pub basis: RatioBasis,
    /// Ratios of extrapolated totals, or of partial sums for divergent
    /// points (informational there).
    pub ratios: Vec<f64>,
    pub drift: Option<f64>,
    pub passed: bool,
}

/// Ratio of two level-resolved reports truncated at each of `levels`.
///
/// When both have extrapolated totals at every level their ratio must
/// drift by less than `max_drift`. Otherwise the ratio of partial sums must,
/// unless neither report is classified converged at the largest level:
/// two infinite energies are comparable.
pub fn compare_across_levels(
    num: &EnergyReport,
    den: &EnergyReport,
    levels: &[u32],
    cfg: &GrowthConfig,
    max_drift: f64,
) -> RatioStudy {
    let pairs: Vec<(EnergyReport, EnergyReport)> = levels
        .iter()
        .map(|&j| (num.truncated(j, cfg), den.truncated(j, cfg)))
        .collect();
    let extrapolated: Option<Vec<f64>> = pairs
        .iter()
        .map(|(a, b)| Some(a.extrapolated_total? / b.extrapolated_total?))
        .collect();
    let stable = |r: &[f64]| drift(r).is_some_and(|d| d < max_drift);
    let (basis, ratios, passed) = match extrapolated {
        Some(r) => {
            let ok = stable(&r);
            (RatioBasis::Extrapolated, r, ok)
        }
        None => {
            let r: Vec<f64> = pairs
                .iter()
                .map(|(a, b)| a.value_at_j / b.value_at_j)
                .collect();
            if stable(&r) {
                (RatioBasis::PartialSums, r, true)
            } else {
                let (a, b) = pairs.last().expect("at least one level");
                let ok = a.classification != Classification::Converged
                    && b.classification != Classification::Converged;
                (RatioBasis::BothDivergent, r, ok)
            }
        }
    };
    RatioStudy {
        numerator: num.functional.clone(),
        denominator: den.functional.clone(),
        params: num.params,
        levels: levels.to_vec(),
        basis,
        drift: drift(&ratios),
        ratios,
        passed,
    }
}

/// Which side of the comparison between `V^(1/(p-1))` and `E1` is tested.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    /// `V^(1/(p-1)) <= C E1`.
    VBelow,
    /// `E1 <= C V^(1/(p-1))`.
    VAbove,
}

/// Sides expected at exponent `p`: below for `p < 2`, above for `p > 2`.
pub fn expected_sides(p: f64) -> Vec<Side> {
    if p < 2.0 {
        vec![Side::VBelow]
    } else if p > 2.0 {
        vec![Side::VAbove]
    } else {
        vec![Side::VBelow, Side::VAbove]
    }
}

/// Boundedness of one side of the `V` against `E1` comparison across levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneSidedStudy {
    pub params: EnergyParams,
    pub side: Side,
    pub levels: Vec<u32>,
    /// Bounded quantity at each level: `V^(1/(p-1)) / E1` or its inverse.
    /// Empty when `V` is not settled.
    pub ratios: Vec<f64>,
    /// `V` is finite and stable under quadrature refinement.
    pub v_settled: bool,
    pub passed: bool,
}

/// Checks that the ratio of the smaller side to the larger side does not
/// grow by more than `max_growth` between consecutive `levels`.
///
/// `E1` is measured by its extrapolated total where available and by its
/// partial sum otherwise. A `V` that is infinite or does not settle under
/// refinement satisfies the lower side outright and the upper side only when
/// `E1` is not classified converged either.
pub fn compare_v_one_sided(
    v: &VReport,
    e1: &EnergyReport,
    side: Side,
    levels: &[u32],
    cfg: &GrowthConfig,
    max_growth: f64,
) -> OneSidedStudy {
    let root = v.refined.truncated.powf(1.0 / (v.params.p - 1.0));
    let v_settled = root.is_finite() && v.classification == Classification::Converged;
    let truncated: Vec<EnergyReport> = levels.iter().map(|&j| e1.truncated(j, cfg)).collect();
    let (ratios, passed) = if v_settled {
        let r: Vec<f64> = truncated
            .iter()
            .map(|e| {
                let m = e.extrapolated_total.unwrap_or(e.value_at_j);
                match side {
                    Side::VBelow => root / m,
                    Side::VAbove => m / root,
                }
            })
            .collect();
        let ok = r.iter().all(|x| x.is_finite())
            && r.windows(2).all(|w| w[1] <= (1.0 + max_growth) * w[0]);
        (r, ok)
    } else {
        let top = truncated.last().expect("at least one level");
        let ok = match side {
            Side::VAbove => true,
            Side::VBelow => top.classification != Classification::Converged,
        };
        (Vec::new(), ok)
    };
    OneSidedStudy {
        params: v.params,
        side,
        levels: levels.to_vec(),
        ratios,
        v_settled,
        passed,
    }
}

/// Deepest level whose sparse level sums a Cantor tree can resolve.
pub const MAX_BLOCK_LEVEL: u64 = FIXED_BITS as u64 - 1;

/// Level sums over the schedule block `j_n < j <= j_{n+1}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub n: usize,
    pub from: u64,
    pub to: u64,
    pub sum: f64,
}

/// Blocks `n >= n0` with `j_{n+1} <= MAX_BLOCK_LEVEL`.
pub fn resolvable_blocks(schedule: &CantorSchedule) -> Vec<usize> {
    (schedule.n0..schedule.j.len() - 1)
        .filter(|&n| schedule.j[n + 1] <= MAX_BLOCK_LEVEL && schedule.j[n + 1] > schedule.j[n])
        .collect()
}

/// Sums `per_level` (level `j` at index `j - 1`) over the given blocks.
pub fn block_sums(
    per_level: &[f64],
    schedule: &CantorSchedule,
    blocks: &[usize],
) -> Result<Vec<Block>> {
    blocks
        .iter()
        .map(|&n| {
            let (from, to) = (schedule.j[n], schedule.j[n + 1]);
            if to as usize > per_level.len() {
                return Err(Error::Resource(format!(
                    "block {n} needs level {to}, only {} computed",
                    per_level.len()
                )));
            }
            Ok(Block {
                n,
                from,
                to,
                sum: crate::sum::sum(&per_level[from as usize..to as usize]),
            })
        })
        .collect()
}

/// Least-squares slope of `log2` block sums against the block index.
pub fn block_exponent(blocks: &[Block]) -> Option<f64> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = blocks
        .iter()
        .filter(|b| b.sum > 0.0)
        .map(|b| (b.n as f64, b.sum.log2()))
        .unzip();
    if xs.len() < blocks.len() {
        return None;
    }
    ls_slope(&xs, &ys)
}

/// Trend of a level-resolved report over whole schedule blocks.
///
/// Level sums of a Cantor-type map are flat inside a block, so windowed
/// per-level trends cannot tell a slowly growing energy from a converging
/// one; block sums can.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockTrend {
    pub blocks: Vec<Block>,
    /// `B_{n+1} / B_n` for consecutive blocks.
    pub ratios: Vec<f64>,
    pub exponent: Option<f64>,
    /// Converged when every ratio is at most the decay ratio, diverging
    /// when none is below 1.
    pub classification: Classification,
}

/// Trend over the last (up to four) complete blocks within the report's
/// levels; `None` with fewer than three.
pub fn block_trend(
    report: &EnergyReport,
    schedule: &CantorSchedule,
    cfg: &GrowthConfig,
) -> Option<BlockTrend> {
    let all: Vec<usize> = resolvable_blocks(schedule)
        .into_iter()
        .filter(|&n| schedule.j[n + 1] <= report.levels as u64)
        .collect();
    if all.len() < 3 {
        return None;
    }
    let picked = &all[all.len().saturating_sub(4)..];
    let blocks = block_sums(&report.per_level, schedule, picked).ok()?;
    let ratios: Vec<f64> = blocks.windows(2).map(|w| w[1].sum / w[0].sum).collect();
    let classification = if ratios.iter().all(|&r| r <= cfg.decay_ratio) {
        Classification::Converged
    } else if ratios.iter().all(|&r| r >= 1.0) {
        Classification::Diverging
    } else {
        Classification::Inconclusive
    };
    Some(BlockTrend {
        exponent: block_exponent(&blocks),
        blocks,
        ratios,
        classification,
    })
}

/// One expected property of an example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignatureCheck {
    pub name: String,
    pub functional: String,
    pub value: f64,
    pub requirement: String,
    pub passed: bool,
}

impl SignatureCheck {
    fn new(name: &str, functional: &str, value: f64, requirement: String, passed: bool) -> Self {
        Self {
            name: name.into(),
            functional: functional.into(),
            value,
            requirement,
            passed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleReport {
    pub example: String,
    pub p: f64,
    pub s: Option<f64>,
    pub map: String,
    pub checks: Vec<SignatureCheck>,
    /// Blocks used by the block-level checks.
    pub blocks: Vec<Block>,
    pub passed: bool,
}

impl ExampleReport {
    fn new(
        example: &str,
        p: f64,
        s: Option<f64>,
        map: String,
        checks: Vec<SignatureCheck>,
        blocks: Vec<Block>,
    ) -> Self {
        let passed = checks.iter().all(|c| c.passed);
        Self {
            example: example.into(),
            p,
            s,
            map,
            checks,
            blocks,
            passed,
        }
    }

    /// Names of the failed checks.
    pub fn failures(&self) -> Vec<String> {
        self.checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| {
                format!(
                    "{}: {} ({}) = {}, need {}",
                    self.example, c.name, c.functional, c.value, c.requirement
                )
            })
            .collect()
    }
}

/// `s` with `1/s` at the midpoint of the admissible interval between
/// `p - 1` and `1`, i.e. `s = 2 / p`.
pub fn midpoint_s(p: f64) -> f64 {
    2.0 / p
}

/// Largest schedule depth probed when looking for blocks.
const SCHEDULE_DEPTH: usize = 30;

fn schedule_up_to_budget(kind: ScheduleKind) -> Result<CantorSchedule> {
    let mut depth = SCHEDULE_DEPTH;
    loop {
        match build_schedule(kind, depth) {
            Err(Error::Overflow { .. }) if depth > 1 => depth -= 1,
            other => return other,
        }
    }
}

/// Up to `max` resolvable blocks, the last ones when `from_end`, failing
/// when fewer than `min` exist.
fn pick_blocks(
    schedule: &CantorSchedule,
    min: usize,
    max: usize,
    from_end: bool,
    what: &str,
) -> Result<Vec<usize>> {
    let all = resolvable_blocks(schedule);
    if all.len() < min {
        return Err(Error::Resource(format!(
            "{what} needs {min} schedule blocks below level {MAX_BLOCK_LEVEL}, found {}",
            all.len()
        )));
    }
    let k = all.len().min(max);
    Ok(if from_end {
        all[all.len() - k..].to_vec()
    } else {
        all[..k].to_vec()
    })
}

/// Cantor map with `1 < p < 2`: `V(p, p-2, 0)` finite while `E1` diverges
/// with block sums growing like `2^(n (1 - p + 1/s))`.
pub fn small_p_signature(p: f64, quad: &QuadratureSpec) -> Result<ExampleReport> {
    if !(p > 1.0 && p < 2.0) {
        return Err(Error::Domain(format!(
            "this example needs 1 < p < 2, got {p}"
        )));
    }
    let s = midpoint_s(p);
    let desc = format!("cantor_log:s={s}");
    let map = CircleMap::parse(&desc)?;
    let params = EnergyParams::new(p, p - 2.0, 0.0)?;
    let sched = schedule_up_to_budget(ScheduleKind::Power { s })?;
    let blocks = pick_blocks(&sched, 3, 3, true, "the growth fit")?;
    let top = sched.j[blocks[blocks.len() - 1] + 1] as u32;
    let report =
        e1(&map, &params, top, &GrowthConfig::default()).map_err(|e| e.in_functional("e1"))?;
    let sums = block_sums(&report.per_level, &sched, &blocks)?;
    let predicted = 1.0 - p + 1.0 / s;
    let slope = block_exponent(&sums).unwrap_or(f64::NAN);
    let v = v_energy_multi(&map, &[params], quad)
        .map_err(|e| e.in_functional("v"))?
        .remove(0);
    let checks = vec![
        SignatureCheck::new(
            "v_converges",
            "v",
            v.relative_change,
            "relative change under grid doubling < 0.02".into(),
            v.classification == Classification::Converged && v.relative_change < 0.02,
        ),
        SignatureCheck::new(
            "e1_diverges",
            "e1",
            slope,
            "block-sum exponent > 0".into(),
            slope > 0.0,
        ),
        SignatureCheck::new(
            "e1_block_exponent",
            "e1",
            slope,
            format!("within 25% of {predicted}"),
            (slope - predicted).abs() <= 0.25 * predicted.abs(),
        ),
    ];
    Ok(ExampleReport::new(
        "log_cantor_small_p",
        p,
        Some(s),
        desc,
        checks,
        sums,
    ))
}

/// Partial sums of `j_n 2^-n` from `n0` up to each of the first blocks.
pub fn log_integral_surrogate(schedule: &CantorSchedule, count: usize) -> Vec<f64> {
    let mut acc = 0.0;
    (schedule.n0..schedule.j.len())
        .take(count)
        .map(|n| {
            acc += schedule.j[n] as f64 * (-(n as f64)).exp2();
            acc
        })
        .collect()
}

/// Cantor map with `p > 2`: the log double integral of the inverse map
/// (hence `V(p, p-2, 0)`) diverges while `E1` converges.
///
/// Divergence is read off the lower bound `sum_n j_n 2^-n`: its partial
/// sums must grow by at least half over each of the first three blocks
/// after `n0`, and its terms must not decrease over the schedule.
pub fn large_p_signature(p: f64) -> Result<ExampleReport> {
    if !(p > 2.0) {
        return Err(Error::Domain(format!("this example needs p > 2, got {p}")));
    }
    let s = midpoint_s(p);
    let desc = format!("cantor_log:s={s}");
    let map = CircleMap::parse(&desc)?;
    let params = EnergyParams::new(p, p - 2.0, 0.0)?;
    let sched = schedule_up_to_budget(ScheduleKind::Power { s })?;
    let partial = log_integral_surrogate(&sched, 4);
    let min_growth = partial
        .windows(2)
        .map(|w| w[1] / w[0] - 1.0)
        .fold(f64::INFINITY, f64::min);
    let terms: Vec<f64> = (sched.n0..sched.j.len())
        .map(|n| sched.j[n] as f64 * (-(n as f64)).exp2())
        .collect();
    let nondecreasing = terms.windows(2).all(|w| w[1] >= w[0]);
    let blocks = pick_blocks(&sched, 2, 3, true, "the tail ratio")?;
    let top = sched.j[*blocks.last().expect("nonempty") + 1] as u32;
    let report =
        e1(&map, &params, top, &GrowthConfig::default()).map_err(|e| e.in_functional("e1"))?;
    let sums = block_sums(&report.per_level, &sched, &blocks)?;
    let tail = sums
        .windows(2)
        .map(|w| w[1].sum / w[0].sum)
        .fold(0.0f64, f64::max);
    let checks = vec![
        SignatureCheck::new(
            "log_integral_growth",
            "v",
            if partial.len() == 4 {
                min_growth
            } else {
                f64::NAN
            },
            "partial sums grow >= 50% per block over 3 blocks".into(),
            partial.len() == 4 && min_growth >= 0.5,
        ),
        SignatureCheck::new(
            "log_integral_terms_nondecreasing",
            "v",
            terms.last().copied().unwrap_or(f64::NAN),
            format!(
                "j_n 2^-n nondecreasing for n0 <= n <= {}",
                sched.j.len() - 1
            ),
            nondecreasing && terms.len() >= 2,
        ),
        SignatureCheck::new(
            "e1_converges",
            "e1",
            tail,
            "block tail ratio <= 0.9".into(),
            tail <= 0.9,
        ),
    ];
    Ok(ExampleReport::new(
        "log_cantor_large_p",
        p,
        Some(s),
        desc,
        checks,
        sums,
    ))
}

/// Identity map finite for `-1 < alpha < p - 1` and logarithmically
/// divergent at `alpha = -1, lambda = 0`.
pub fn identity_signature(p: f64, levels: u32) -> Result<ExampleReport> {
    let cfg = GrowthConfig::default();
    let id = CircleMap::identity();
    let mut checks = Vec::new();
    let mut finite = Vec::new();
    for alpha in [-0.5, p - 1.5, 0.5 * (p - 2.0)] {
        if alpha > -1.0 && alpha < p - 1.0 {
            for lambda in [-2.0, 0.0, 2.0] {
                finite.push(EnergyParams::new(p, alpha, lambda)?);
            }
        }
    }
    let divergent = EnergyParams::new(p, -1.0, 0.0)?;
    let mut all = finite.clone();
    all.push(divergent);
    let evals = evaluate(
        &id,
        &all,
        &[Functional::E1, Functional::I1],
        levels,
        &QuadratureSpec::default(),
        &cfg,
    )?;
    for ev in &evals[..finite.len()] {
        for r in &ev.reports {
            let ok = r.classification == Classification::Converged;
            checks.push(SignatureCheck::new(
                &format!(
                    "identity_finite(alpha={}, lambda={})",
                    ev.params.alpha, ev.params.lambda
                ),
                &r.functional,
                r.tail_ratio.unwrap_or(f64::NAN),
                "classified converged".into(),
                ok,
            ));
        }
    }
    // the first levels carry an exact 2^-j area correction
    let i1_div = evals[finite.len()]
        .report(Functional::I1)
        .expect("requested");
    let half = i1_div.per_level.len() / 2;
    let flat = drift(&i1_div.per_level[half..]).unwrap_or(f64::INFINITY);
    checks.push(SignatureCheck::new(
        "identity_log_divergence",
        "i1",
        flat,
        "classified diverging, levels J/2 < j <= J flat within 5%".into(),
        i1_div.classification == Classification::Diverging && flat <= 0.05,
    ));
    Ok(ExampleReport::new(
        "identity",
        p,
        None,
        "identity".into(),
        checks,
        Vec::new(),
    ))
}

/// Log-log Cantor map at `(p, p-2, -1)`: `E1` block sums do not decay.
/// Needs two schedule blocks below the resolvable depth, which holds for
/// `p` close to 1 only.
pub fn loglog_signature(p: f64) -> Result<ExampleReport> {
    let cfg = GrowthConfig::default();
    let mut checks = Vec::new();
    let kind = ScheduleKind::DoubleExp { p };
    let sched = schedule_up_to_budget(kind)?;
    let blocks = pick_blocks(&sched, 2, 3, false, "the log-log map")?;
    let top = sched.j[*blocks.last().expect("nonempty") + 1] as u32;
    let desc = format!("cantor_loglog:p={p}");
    let map = CircleMap::parse(&desc)?;
    let params = EnergyParams::new(p, p - 2.0, -1.0)?;
    let report = e1(&map, &params, top, &cfg).map_err(|e| e.in_functional("e1"))?;
    let sums = block_sums(&report.per_level, &sched, &blocks)?;
    let first = sums[0].sum;
    let worst = sums
        .iter()
        .map(|b| b.sum / first)
        .fold(f64::INFINITY, f64::min);
    checks.push(SignatureCheck::new(
        "loglog_blocks_nondecaying",
        "e1",
        worst,
        "every block sum >= half the first".into(),
        worst >= 0.5,
    ));
    Ok(ExampleReport::new(
        "loglog_cantor",
        p,
        None,
        desc,
        checks,
        sums,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_shape() {
        let g = comparison_grid();
        assert_eq!(g.len(), 18);
        assert!(g.iter().all(|pr| pr.alpha > -1.0 && pr.alpha < pr.p - 1.0));
        assert_eq!(fleet().unwrap().len(), 5);
    }

    #[test]
    fn drift_examples() {
        assert_eq!(drift(&[2.0, 2.0]), Some(0.0));
        assert_eq!(drift(&[1.0, 1.5, 1.2]), Some(0.5));
        assert_eq!(drift(&[1.0, -1.0]), None);
        assert_eq!(drift(&[]), None);
    }

    #[test]
    fn functional_names_round_trip() {
        for f in Functional::ALL {
            assert_eq!(f.name().parse::<Functional>().unwrap(), f);
        }
        assert!(matches!(
            "e3".parse::<Functional>(),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn ratio_basis_follows_convergence() {
        let cfg = GrowthConfig::default();
        let pr = EnergyParams::new(2.0, 0.0, 0.0).unwrap();
        let levels: Vec<f64> = (1..=14).map(|j| (-(j as f64)).exp2()).collect();
        let a = EnergyReport::from_levels("a", pr, levels.clone(), &cfg);
        let b = EnergyReport::from_levels("b", pr, levels.iter().map(|v| 3.0 * v).collect(), &cfg);
        let st = compare_across_levels(&a, &b, &[10, 12, 14], &cfg, 0.1);
        assert!(st.passed && st.basis == RatioBasis::Extrapolated);
        assert!(st.ratios.iter().all(|r| (r - 1.0 / 3.0).abs() < 1e-12));
        // divergent sums with a fixed ratio of partial sums
        let flat = EnergyReport::from_levels("c", pr, vec![1.0; 14], &cfg);
        let flat2 = EnergyReport::from_levels("d", pr, vec![2.0; 14], &cfg);
        let st = compare_across_levels(&flat2, &flat, &[10, 12, 14], &cfg, 0.1);
        assert!(st.passed && st.basis == RatioBasis::PartialSums);
        assert_eq!(st.ratios, vec![2.0; 3]);
        // two divergent sums are comparable whatever their partial ratios
        let growing =
            EnergyReport::from_levels("e", pr, (1..=14).map(|j| j as f64).collect(), &cfg);
        let st = compare_across_levels(&growing, &flat, &[10, 12, 14], &cfg, 0.1);
        assert!(st.passed && st.basis == RatioBasis::BothDivergent);
        // a convergent sum against a divergent one is not
        let st = compare_across_levels(&a, &flat, &[10, 12, 14], &cfg, 0.1);
        assert!(!st.passed && st.basis == RatioBasis::BothDivergent);
    }

    #[test]
    fn one_sided_v_sides() {
        let cfg = GrowthConfig::default();
        assert_eq!(expected_sides(1.5), vec![Side::VBelow]);
        assert_eq!(expected_sides(2.0), vec![Side::VBelow, Side::VAbove]);
        assert_eq!(expected_sides(3.0), vec![Side::VAbove]);
        let pr = EnergyParams::new(2.0, 0.0, 0.0).unwrap();
        let map = CircleMap::parse("rotation:rho=0.3").unwrap();
        let quad = QuadratureSpec {
            n_outer: 64,
            ..QuadratureSpec::default()
        };
        let mut v = crate::boundary::v_energy(&map, &pr, &quad).unwrap();
        v.classification = Classification::Converged;
        v.refined.truncated = 4.0;
        let conv = EnergyReport::from_levels(
            "e1",
            pr,
            (1..=14).map(|j| (-(j as f64)).exp2()).collect(),
            &cfg,
        );
        let flat = EnergyReport::from_levels("e1", pr, vec![1.0; 14], &cfg);
        for side in [Side::VBelow, Side::VAbove] {
            let st = compare_v_one_sided(&v, &conv, side, &[10, 12, 14], &cfg, 0.15);
            assert!(st.passed && st.v_settled);
        }
        // growing E1 leaves V below it but not above
        assert!(compare_v_one_sided(&v, &flat, Side::VBelow, &[10, 12, 14], &cfg, 0.15).passed);
        assert!(!compare_v_one_sided(&v, &flat, Side::VAbove, &[10, 12, 14], &cfg, 0.15).passed);
        v.refined.truncated = f64::INFINITY;
        assert!(compare_v_one_sided(&v, &conv, Side::VAbove, &[10, 12, 14], &cfg, 0.15).passed);
        assert!(!compare_v_one_sided(&v, &conv, Side::VBelow, &[10, 12, 14], &cfg, 0.15).passed);
        assert!(compare_v_one_sided(&v, &flat, Side::VBelow, &[10, 12, 14], &cfg, 0.15).passed);
    }

    #[test]
    fn block_trend_reads_block_sums() {
        let cfg = GrowthConfig::default();
        let sched = build_schedule(ScheduleKind::Power { s: 4.0 / 3.0 }, 12).unwrap();
        let pr = EnergyParams::new(1.5, -0.5, 0.0).unwrap();
        // n0 = 6: blocks (22, 38], (38, 63], (63, 107] with growing sums
        let per_level: Vec<f64> = (1..=107).map(|j| 1.0 + j as f64).collect();
        let r = EnergyReport::from_levels("e1", pr, per_level, &cfg);
        let t = block_trend(&r, &sched, &cfg).unwrap();
        assert_eq!(
            t.blocks.iter().map(|b| (b.from, b.to)).collect::<Vec<_>>(),
            vec![(22, 38), (38, 63), (63, 107)]
        );
        assert_eq!(t.classification, Classification::Diverging);
        let decaying: Vec<f64> = (1..=107).map(|j| (-(j as f64)).exp2()).collect();
        let r = EnergyReport::from_levels("e1", pr, decaying, &cfg);
        assert_eq!(
            block_trend(&r, &sched, &cfg).unwrap().classification,
            Classification::Converged
        );
        let short = r.truncated(100, &cfg);
        assert!(block_trend(&short, &sched, &cfg).is_none());
    }

    #[test]
    fn surrogate_partial_sums() {
        // j_n = [2^(3n/2)] = 0, 2, 7, 22, ...; n0 = 1
        let sched = build_schedule(ScheduleKind::Power { s: 2.0 / 3.0 }, 6).unwrap();
        let got = log_integral_surrogate(&sched, 3);
        assert_eq!(got, vec![1.0, 2.75, 5.5]);
    }

    #[test]
    fn blocks_follow_the_schedule() {
        let sched = build_schedule(ScheduleKind::Power { s: 4.0 / 3.0 }, 12).unwrap();
        let blocks = resolvable_blocks(&sched);
        assert_eq!(blocks, vec![6, 7, 8]);
        let levels: Vec<f64> = (1..=107).map(|j| j as f64).collect();
        let b = block_sums(&levels, &sched, &blocks).unwrap();
        // levels 23..=38 sum to (23 + 38) * 16 / 2
        assert_eq!((b[0].from, b[0].to, b[0].sum), (22, 38, 488.0));
        assert!(block_sums(&levels[..50], &sched, &blocks).is_err());
    }

    #[test]
    fn signature_domains() {
        let q = QuadratureSpec::default();
        assert!(matches!(small_p_signature(2.5, &q), Err(Error::Domain(_))));
        assert!(matches!(large_p_signature(1.5), Err(Error::Domain(_))));
        // the double-exponential schedule outgrows the resolvable depth
        assert!(matches!(loglog_signature(3.0), Err(Error::Resource(_))));
    }
}
