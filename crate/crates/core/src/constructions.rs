//! Cantor-type boundary maps built by nested interval removal.
//!
//! Step `n` removes one open interval from the middle of every gap left by
//! step `n - 1`, leaving two child gaps of width `m_n` at its ends. All
//! margins are powers of two, `m_n = 2^-e_n`, so a point can be located in
//! the gap tree using only exact operations: the descent tracks the distance
//! to the nearer end of the current gap, and `m - d` with `d` in
//! `(m/2, m]` is exact in binary floating point.

use crate::circle_map::{CircleMap, Lift};
use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Largest step count an [`IntervalTree`] may hold; plateau values are
/// tracked exactly as multiples of `2^-127`.
pub const MAX_DEPTH: usize = 120;

/// Largest admissible schedule index.
const J_BUDGET: f64 = 4.0e18;

/// Deepest gap level enumerated by [`IntervalTree::level_increments`].
const MAX_SPARSE_STEPS: usize = 22;

/// Fixed-point exponent of [`Dyadic`] coordinates.
pub const FIXED_BITS: u32 = 127;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScheduleKind {
    /// `j_n = [2^(n/s)]`
    Power { s: f64 },
    /// `j_n = [e^(2^(n(p-1)))]`
    DoubleExp { p: f64 },
}

/// Largest integer strictly less than `x` (for `x >= 1`).
///
/// Values within a relative `1e-12` of an integer are treated as that
/// integer so that e.g. `2^(4 / (4/3))` maps to 7 and not 8.
pub fn largest_integer_below(x: f64) -> u64 {
    let r = x.round();
    if (x - r).abs() <= 1e-12 * x.abs().max(1.0) {
        (r as u64).saturating_sub(1)
    } else {
        x.floor() as u64
    }
}

/// The integer sequence `j_n` together with the threshold index `n0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CantorSchedule {
    pub kind: ScheduleKind,
    /// `j[n]` for `n = 0..=depth + 1`.
    pub j: Vec<u64>,
    pub n0: usize,
}

impl CantorSchedule {
    pub fn depth(&self) -> usize {
        self.j.len() - 2
    }

    /// Margin exponent `e_n`: `2n` before `n0`, `j_n` from `n0` on.
    pub fn margin_exponent(&self, n: usize) -> u64 {
        if n < self.n0 {
            2 * n as u64
        } else {
            self.j[n]
        }
    }
}

fn schedule_value(kind: ScheduleKind, n: usize) -> Result<u64> {
    let x = match kind {
        ScheduleKind::Power { s } => {
            let e = n as f64 / s;
            let er = e.round();
            let e = if (e - er).abs() < 1e-12 { er } else { e };
            e.exp2()
        }
        ScheduleKind::DoubleExp { p } => (n as f64 * (p - 1.0)).exp2().exp(),
    };
    if !x.is_finite() || x > J_BUDGET {
        return Err(Error::Overflow { n });
    }
    Ok(largest_integer_below(x))
}

/// Computes `j_0..=j_{depth+1}` and the least `n0 >= 1` such that
/// `j_{n+1} >= j_n + 2` and `j_n >= 2n` for every `n0 - 1 <= n <= depth`.
pub fn build_schedule(kind: ScheduleKind, depth: usize) -> Result<CantorSchedule> {
    match kind {
        ScheduleKind::Power { s } if !(s > 0.0 && s.is_finite()) => {
            return Err(Error::Domain(format!(
                "power schedule needs s > 0, got {s}"
            )))
        }
        ScheduleKind::DoubleExp { p } if !(p > 1.0 && p.is_finite()) => {
            return Err(Error::Domain(format!(
                "double_exp schedule needs p > 1, got {p}"
            )))
        }
        _ => {}
    }
    if depth == 0 {
        return Err(Error::Domain("schedule depth must be at least 1".into()));
    }
    let j = (0..=depth + 1)
        .map(|n| schedule_value(kind, n))
        .collect::<Result<Vec<u64>>>()?;
    let holds = |n: usize| j[n + 1] >= j[n] + 2 && j[n] >= 2 * n as u64;
    let mut first = depth + 1;
    while first > 0 && holds(first - 1) {
        first -= 1;
    }
    if first > depth {
        return Err(Error::Construction(format!(
            "no threshold index up to depth {depth}"
        )));
    }
    Ok(CantorSchedule {
        kind,
        j,
        n0: (first + 1).max(1),
    })
}

/// Implicit representation of the removed intervals up to `depth` steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalTree {
    pub schedule: CantorSchedule,
    pub depth: usize,
    /// `margin_exp[n]` is `e_n`; entry 0 is the root gap `[0, 1]`.
    pub margin_exp: Vec<u64>,
}

/// Verifies gap nesting and returns the tree for steps `1..=depth`.
pub fn build_intervals(schedule: &CantorSchedule, depth: usize) -> Result<IntervalTree> {
    if depth == 0 || depth > MAX_DEPTH {
        return Err(Error::Domain(format!(
            "tree depth must be in 1..={MAX_DEPTH}, got {depth}"
        )));
    }
    if depth > schedule.depth() {
        return Err(Error::DepthBudget {
            needed: depth,
            built: schedule.depth(),
        });
    }
    let mut margin_exp = vec![0u64];
    for n in 1..=depth {
        let e = schedule.margin_exponent(n);
        // the removed interval has length 2^-e_{n-1} - 2^(1-e_n) > 0
        if e < margin_exp[n - 1] + 2 {
            return Err(Error::Construction(format!(
                "step {n} interval is empty: margin 2^-{e} inside gap 2^-{}",
                margin_exp[n - 1]
            )));
        }
        margin_exp.push(e);
    }
    Ok(IntervalTree {
        schedule: schedule.clone(),
        depth,
        margin_exp,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    Left,
    Right,
}

/// Coordinates the gap descent can run in.
trait Coord: Copy + PartialOrd {
    fn zero() -> Self;
    fn one() -> Self;
    /// `2^-e`, or `None` when that is below the resolution of the type.
    fn margin(e: u64) -> Option<Self>;
    fn sub(self, other: Self) -> Self;
    fn twice(self) -> Self;
    fn ratio(self, m: Self) -> f64;
}

impl Coord for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn margin(e: u64) -> Option<Self> {
        pow2_neg(e)
    }
    fn sub(self, other: Self) -> Self {
        self - other
    }
    fn twice(self) -> Self {
        2.0 * self
    }
    fn ratio(self, m: Self) -> f64 {
        self / m
    }
}

/// Fixed-point coordinate in units of `2^-127`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Dyadic(pub u128);

impl Dyadic {
    pub const ONE: Dyadic = Dyadic(1u128 << FIXED_BITS);

    /// `k * 2^-j`.
    pub fn from_grid(k: u128, j: u32) -> Dyadic {
        assert!(j <= FIXED_BITS);
        Dyadic(k << (FIXED_BITS - j))
    }

    pub fn to_f64(self) -> f64 {
        self.0 as f64 * (-(FIXED_BITS as f64)).exp2()
    }
}

impl Coord for Dyadic {
    fn zero() -> Self {
        Dyadic(0)
    }
    fn one() -> Self {
        Dyadic::ONE
    }
    fn margin(e: u64) -> Option<Self> {
        (e <= FIXED_BITS as u64).then(|| Dyadic(1u128 << (FIXED_BITS as u64 - e)))
    }
    fn sub(self, other: Self) -> Self {
        Dyadic(self.0 - other.0)
    }
    fn twice(self) -> Self {
        Dyadic(self.0 << 1)
    }
    fn ratio(self, m: Self) -> f64 {
        self.0 as f64 / m.0 as f64
    }
}

/// Exact `2^-e` as an f64 (subnormals included), `None` below `2^-1074`.
pub fn pow2_neg(e: u64) -> Option<f64> {
    if e <= 1022 {
        Some(f64::from_bits((1023 - e) << 52))
    } else if e <= 1074 {
        Some(f64::from_bits(1u64 << (1074 - e)))
    } else {
        None
    }
}

/// Plateau values are multiples of `2^-steps`; accumulate them exactly.
fn value_unit(n: usize) -> u128 {
    1u128 << (FIXED_BITS as usize - n)
}

fn value_to_f64(v: u128) -> f64 {
    v as f64 * (-(FIXED_BITS as f64)).exp2()
}

impl IntervalTree {
    /// Width exponent of gaps at step `n` (`e_n`).
    pub fn margin_exponent(&self, n: usize) -> u64 {
        self.margin_exp[n]
    }

    fn descend<C: Coord>(&self, x: C, steps: usize) -> f64 {
        let (mut side, mut d) = if x <= C::one().sub(x) {
            (Side::Left, x)
        } else {
            (Side::Right, C::one().sub(x))
        };
        let mut v: u128 = 0;
        for n in 1..=steps {
            let m = match C::margin(self.margin_exp[n]) {
                Some(m) => m,
                None => {
                    // gap widths from here on are below the coordinate
                    // resolution: x is either a gap end or inside a plateau
                    if d == C::zero() {
                        return value_to_f64(match side {
                            Side::Left => v,
                            Side::Right => v + value_unit(n - 1),
                        });
                    }
                    return value_to_f64(v + value_unit(n));
                }
            };
            if d > m {
                return value_to_f64(v + value_unit(n));
            }
            if side == Side::Right {
                v += value_unit(n);
            }
            if d.twice() > m {
                side = match side {
                    Side::Left => Side::Right,
                    Side::Right => Side::Left,
                };
                d = m.sub(d);
            }
        }
        // inside a gap of the last step: the approximant is affine there
        let m = match C::margin(self.margin_exp[steps]) {
            Some(m) => m,
            None => unreachable!("sub-resolution margins return inside the loop"),
        };
        let offset = match side {
            Side::Left => d.ratio(m),
            Side::Right => 1.0 - d.ratio(m),
        };
        value_to_f64(v) + value_to_f64(value_unit(steps)) * offset
    }

    /// Approximant `f_{n,s}(x)` at the smallest `n` with `2^-n <= tol`.
    pub fn f_eval(&self, x: f64, tol: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::Domain(format!("f_eval needs x in [0, 1], got {x}")));
        }
        if !(tol > 0.0) {
            return Err(Error::Domain(format!(
                "tolerance must be positive, got {tol}"
            )));
        }
        let needed = (-tol.log2()).ceil().max(1.0) as usize;
        if needed > self.depth {
            return Err(Error::DepthBudget {
                needed,
                built: self.depth,
            });
        }
        Ok(self.descend(x, needed))
    }

    /// Approximant at the full built depth.
    pub fn f(&self, x: f64) -> f64 {
        self.descend(x.clamp(0.0, 1.0), self.depth)
    }

    /// Approximant at a fixed-point dyadic coordinate.
    pub fn f_dyadic(&self, x: Dyadic) -> f64 {
        self.descend(x, self.depth)
    }

    /// Open intervals removed at step `n`, as f64 (rounded for deep steps).
    pub fn intervals(&self, n: usize) -> Result<Vec<(f64, f64)>> {
        if n == 0 || n > self.depth {
            return Err(Error::DepthBudget {
                needed: n,
                built: self.depth,
            });
        }
        if n > 20 {
            return Err(Error::Resource(format!(
                "step {n} has 2^{} intervals",
                n - 1
            )));
        }
        let mut gaps = vec![(0.0f64, 1.0f64)];
        for step in 1..n {
            let m = pow2_neg(self.margin_exp[step]).unwrap_or(0.0);
            gaps = gaps
                .iter()
                .flat_map(|&(a, b)| [(a, a + m), (b - m, b)])
                .collect();
        }
        let m = pow2_neg(self.margin_exp[n]).unwrap_or(0.0);
        Ok(gaps.iter().map(|&(a, b)| (a + m, b - m)).collect())
    }

    /// Sorted endpoint set `T_n` (including 0 and 1).
    pub fn endpoints(&self, n: usize) -> Result<Vec<f64>> {
        let mut pts = vec![0.0, 1.0];
        for step in 1..=n {
            for (a, b) in self.intervals(step)? {
                pts.push(a);
                pts.push(b);
            }
        }
        pts.sort_by(f64::total_cmp);
        Ok(pts)
    }

    /// Smallest ratio `|I_{n,k}| / 2^-j_{n-1}` over the built steps.
    pub fn length_bound_constant(&self) -> f64 {
        (1..=self.depth)
            .map(|n| {
                let e_prev = self.margin_exp[n - 1] as f64;
                let e = self.margin_exp[n] as f64;
                let j_prev = self.schedule.j[n - 1] as f64;
                (j_prev - e_prev).exp2() * (1.0 - (1.0 + e_prev - e).exp2())
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Steps to descend for the sparse enumeration of level `j`.
    fn sparse_steps(&self, j: u32) -> Option<usize> {
        if j == 0 || j > FIXED_BITS - 1 {
            return None;
        }
        let n_star = (1..=self.depth).find(|&n| self.margin_exp[n] >= j as u64)?;
        (n_star <= MAX_SPARSE_STEPS).then_some(n_star)
    }

    /// Whether [`Self::level_increments`] handles level `j`.
    pub fn resolves_level(&self, j: u32) -> bool {
        self.sparse_steps(j).is_some()
    }

    /// Level `j` cells whose lift increment may be nonzero, with those
    /// increments; every other cell lies inside a single plateau.
    ///
    /// Returns `None` when the built depth does not resolve level `j`.
    pub fn level_increments(&self, j: u32) -> Option<LevelIncrements> {
        let n_star = self.sparse_steps(j)?;
        let cell = 1u128 << (FIXED_BITS - j);
        let mut ks: Vec<u128> = Vec::with_capacity(1 << (n_star.min(20) + 1));
        let mut stack = vec![(0usize, 0u128, Dyadic::ONE.0)];
        while let Some((depth, lo, hi)) = stack.pop() {
            if depth == n_star {
                let first = lo.div_ceil(cell).max(1);
                let last = (hi / cell + 1).min(1u128 << j);
                ks.extend(first..=last);
                continue;
            }
            let e = self.margin_exp[depth + 1];
            // sub-resolution children are pinned to the parent's ends
            let m = Dyadic::margin(e).map(|d| d.0).unwrap_or(0);
            stack.push((depth + 1, hi - m, hi));
            stack.push((depth + 1, lo, lo + m));
        }
        ks.sort_unstable();
        ks.dedup();
        let increments: Vec<f64> = ks
            .iter()
            .map(|&k| {
                let a = self.f_dyadic(Dyadic((k - 1) * cell));
                let b = self.f_dyadic(Dyadic(k * cell));
                b - a
            })
            .collect();
        Some(LevelIncrements {
            j,
            flat_cells: (1u128 << j) - ks.len() as u128,
            increments,
        })
    }
}

/// Sparse description of the increments of `f` over the level-`j` cells.
#[derive(Debug, Clone)]
pub struct LevelIncrements {
    pub j: u32,
    /// Cells on which `f` is constant.
    pub flat_cells: u128,
    /// Increments of `f` on the remaining cells.
    pub increments: Vec<f64>,
}

/// Lift built from a Cantor tree: either `f` itself or `(f + x) / 2`.
#[derive(Debug, Clone)]
pub struct CantorLift {
    pub tree: Arc<IntervalTree>,
    pub averaged: bool,
}

impl CantorLift {
    pub fn eval(&self, t: f64) -> f64 {
        let f = self.tree.f(t);
        if self.averaged {
            0.5 * (f + t)
        } else {
            f
        }
    }

    /// Sum over level-`j` cells of `term(lift increment)`, using the sparse
    /// increment list. `None` if the tree does not resolve the level.
    pub fn level_sum<F: Fn(f64) -> f64>(&self, j: u32, term: F) -> Option<f64> {
        let inc = self.tree.level_increments(j)?;
        let width = (-(j as f64)).exp2();
        let lift_inc = |df: f64| {
            if self.averaged {
                0.5 * (df + width)
            } else {
                df
            }
        };
        let mut s = crate::sum::CompensatedSum::new();
        for &df in &inc.increments {
            s.add(term(lift_inc(df)));
        }
        s.add(inc.flat_cells as f64 * term(lift_inc(0.0)));
        Some(s.value())
    }
}

/// Tree depth used for map descriptions that do not fix one: the first
/// step whose margin drops below the f64 resolution, capped by the budget.
pub fn default_depth(kind: ScheduleKind) -> usize {
    let mut best = None;
    for depth in 1..MAX_DEPTH {
        match build_schedule(kind, depth) {
            Ok(s) => {
                best = Some(depth);
                if s.margin_exponent(depth) > 1074 {
                    break;
                }
            }
            Err(Error::Overflow { .. }) => break,
            Err(_) => continue,
        }
    }
    best.unwrap_or(1)
}

/// Builds the circle homeomorphism with lift `(f_s + x) / 2`, rotated so that
/// the point at angle `pi` is fixed.
pub fn make_phi(schedule: &CantorSchedule, depth: usize) -> Result<CircleMap> {
    let tree = Arc::new(build_intervals(schedule, depth)?);
    let lift = CantorLift {
        tree,
        averaged: true,
    };
    let g_half = lift.eval(0.5);
    let rotation = (0.5 - g_half).rem_euclid(1.0);
    CircleMap::new(Lift::Cantor(lift), rotation)
}

/// Lift `f_s` alone (not a homeomorphism: it has plateaus).
pub fn make_f_map(schedule: &CantorSchedule, depth: usize) -> Result<CircleMap> {
    let tree = Arc::new(build_intervals(schedule, depth)?);
    CircleMap::new(
        Lift::Cantor(CantorLift {
            tree,
            averaged: false,
        }),
        0.0,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum ModulusForm {
    /// `omega(d) = ln^s(1/d)`
    LogPower { s: f64 },
    /// `omega(d) = ln^q(ln(1/d))`, `q = 1/(p-1)`
    LogLogPower { q: f64 },
}

impl ModulusForm {
    pub fn omega(&self, d: f64) -> f64 {
        if !(d > 0.0) {
            return 0.0;
        }
        let l = -d.ln();
        match *self {
            ModulusForm::LogPower { s } => {
                if l > 0.0 {
                    l.powf(s)
                } else {
                    0.0
                }
            }
            ModulusForm::LogLogPower { q } => {
                if l > 1.0 {
                    l.ln().powf(q)
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModulusCertificate {
    pub sup: f64,
    pub x: f64,
    pub y: f64,
}

/// Largest sampled value of `|f(x) - f(y)| * omega(|x - y|)`.
///
/// Samples are uniform pairs, pairs with log-uniform separation, and the
/// caller's adversarial pairs. Deterministic for a given seed.
pub fn certify_modulus<F: Fn(f64) -> f64 + Sync>(
    f: F,
    form: ModulusForm,
    samples: usize,
    seed: u64,
    adversarial: &[(f64, f64)],
) -> ModulusCertificate {
    use rayon::prelude::*;
    let score = |x: f64, y: f64| {
        if x == y {
            return ModulusCertificate { sup: 0.0, x, y };
        }
        let v = (f(x) - f(y)).abs() * form.omega((x - y).abs());
        ModulusCertificate { sup: v, x, y }
    };
    let better = |a: ModulusCertificate, b: ModulusCertificate| {
        if b.sup > a.sup || (b.sup == a.sup && (b.x, b.y) < (a.x, a.y)) {
            b
        } else {
            a
        }
    };
    const CHUNK: usize = 1024;
    let chunks = samples.div_ceil(CHUNK);
    let none = ModulusCertificate {
        sup: 0.0,
        x: 0.0,
        y: 0.0,
    };
    let sampled = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let count = CHUNK.min(samples - c * CHUNK);
            let mut best = none;
            for i in 0..count {
                let (x, y) = if i % 2 == 0 {
                    (rng.gen::<f64>(), rng.gen::<f64>())
                } else {
                    let d = 10f64.powf(-rng.gen_range(0.5..15.0));
                    let x = rng.gen::<f64>() * (1.0 - d);
                    (x, x + d)
                };
                best = better(best, score(x, y));
            }
            best
        })
        .reduce(|| none, better);
    adversarial
        .iter()
        .map(|&(x, y)| score(x, y))
        .fold(sampled, better)
}

/// Pairs spanning whole gaps at each step: across the leftmost gap
/// `[0, 2^-e_n]` and, while representable, the rightmost one.
pub fn gap_spanning_pairs(tree: &IntervalTree) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for n in 1..=tree.depth {
        if let Some(m) = pow2_neg(tree.margin_exp[n]) {
            out.push((0.0, m));
            if 1.0 - m < 1.0 {
                out.push((1.0 - m, 1.0));
            }
            // from a gap end to the far end of the neighbouring plateau
            if let Some(parent) = pow2_neg(tree.margin_exp[n - 1]) {
                let far = parent - m;
                if far > m {
                    out.push((0.0, far));
                    out.push((m, far));
                }
            }
        }
    }
    out
}

/// Lower-bound contributions to the log double integral of the inverse map
/// from the paired arcs at the two ends of each step-`n` gap, for
/// `n = from..=to` (needs `to + 1 <= depth`).
///
/// Each gap of step `n` contributes `l' * l'' * ln(1 / (2 pi 2^-e_n))`,
/// where `l'` and `l''` are the image lengths of its end sub-gaps
/// (`pi (2^-(n+1) + 2^-e_{n+1})` each under the averaged lift).
pub fn log_energy_block_bounds(tree: &IntervalTree, from: usize, to: usize) -> Result<Vec<f64>> {
    use std::f64::consts::PI;
    if to + 1 > tree.depth {
        return Err(Error::DepthBudget {
            needed: to + 1,
            built: tree.depth,
        });
    }
    Ok((from..=to)
        .map(|n| {
            let e = tree.margin_exp[n] as f64;
            let e_next = tree.margin_exp[n + 1] as f64;
            let arc = PI * ((-(n as f64 + 1.0)).exp2() + (-e_next).exp2());
            let log = (e * std::f64::consts::LN_2 - (2.0 * PI).ln()).max(0.0);
            (n as f64).exp2() * arc * arc * log
        })
        .collect())
}
