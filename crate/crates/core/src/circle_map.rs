//! Orientation-preserving circle homeomorphisms given by a lift on [0, 1].
//!
//! A map sends `e^{2 pi i t}` to `e^{2 pi i (u(t) + rho)}` where `u` is
//! nondecreasing with `u(0) = 0`, `u(1) = 1`.
//!
//! # Description grammar
//!
//! ```text
//! desc   := kind [ ":" param ("," param)* ]
//! param  := key "=" value
//! kind   := identity | rotation | piecewise_linear | cantor_log | cantor_loglog
//! ```
//!
//! | kind               | keys                                              |
//! |--------------------|---------------------------------------------------|
//! | `identity`         | `rho`                                             |
//! | `rotation`         | `rho` (required)                                  |
//! | `piecewise_linear` | `points=x/y;x/y;...` (required), `rho`            |
//! | `cantor_log`       | `s` (required), `depth`, `lift=average\|plain`, `rho` |
//! | `cantor_loglog`    | `p` (required), `depth`, `lift=average\|plain`, `rho` |
//!
//! `cantor_log` uses the schedule `j_n = [2^(n/s)]`, `cantor_loglog` uses
//! `j_n = [e^(2^(n(p-1)))]`. With `lift=average` (the default) the lift is
//! `(f + t) / 2` and `rho` defaults to the value fixing the point at angle pi;
//! `lift=plain` uses `f` itself, which has plateaus.

use crate::constructions::{
    build_intervals, build_schedule, default_depth, CantorLift, Dyadic, ScheduleKind,
};
use crate::error::{Error, Result};
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

/// Default accuracy of closed-form and piecewise-linear lifts.
pub const DEFAULT_EVAL_TOLERANCE: f64 = 1e-10;

/// Largest level evaluated cell by cell.
pub const DENSE_LEVEL_BUDGET: u32 = 30;

#[derive(Clone)]
pub enum Lift {
    Identity,
    /// Breakpoints `(x, u(x))` from `(0, 0)` to `(1, 1)`.
    PiecewiseLinear(Vec<(f64, f64)>),
    Cantor(CantorLift),
    /// Any monotone callable with `u(0) = 0`, `u(1) = 1`.
    Closure(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for Lift {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Lift::Identity => write!(f, "Identity"),
            Lift::PiecewiseLinear(p) => f.debug_tuple("PiecewiseLinear").field(p).finish(),
            Lift::Cantor(c) => write!(
                f,
                "Cantor(depth = {}, averaged = {})",
                c.tree.depth, c.averaged
            ),
            Lift::Closure(_) => write!(f, "Closure"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CircleMap {
    pub lift: Lift,
    /// Rotation offset in turns, in [0, 1).
    pub rotation: f64,
    pub eval_tolerance: f64,
    /// Description the map was parsed from, if any.
    pub label: Option<String>,
}

impl CircleMap {
    pub fn new(lift: Lift, rotation: f64) -> Result<Self> {
        if !rotation.is_finite() {
            return Err(Error::Domain(format!(
                "rotation must be finite, got {rotation}"
            )));
        }
        let eval_tolerance = match &lift {
            Lift::PiecewiseLinear(points) => {
                validate_breakpoints(points)?;
                DEFAULT_EVAL_TOLERANCE
            }
            Lift::Cantor(c) => (-(c.tree.depth as f64)).exp2(),
            _ => DEFAULT_EVAL_TOLERANCE,
        };
        Ok(Self {
            lift,
            rotation: rotation.rem_euclid(1.0),
            eval_tolerance,
            label: None,
        })
    }

    pub fn identity() -> Self {
        Self::new(Lift::Identity, 0.0).expect("identity is valid")
    }

    pub fn rotation(rho: f64) -> Result<Self> {
        Self::new(Lift::Identity, rho)
    }

    pub fn piecewise_linear(points: Vec<(f64, f64)>) -> Result<Self> {
        Self::new(Lift::PiecewiseLinear(points), 0.0)
    }

    /// Parses a map description (see the module docs for the grammar).
    pub fn parse(desc: &str) -> Result<Self> {
        parse_description(desc)
    }

    /// Lift value without the domain check; `t` is clamped to [0, 1].
    pub fn lift_value(&self, t: f64) -> f64 {
        let t = t.clamp(0.0, 1.0);
        match &self.lift {
            Lift::Identity => t,
            Lift::PiecewiseLinear(points) => pl_eval(points, t),
            Lift::Cantor(c) => c.eval(t),
            Lift::Closure(f) => f(t),
        }
    }

    /// `u(t)`.
    pub fn eval(&self, t: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::Domain(format!(
                "lift argument must lie in [0, 1], got {t}"
            )));
        }
        Ok(self.lift_value(t))
    }

    /// Image angle in turns of the point at `t` turns (any real `t`).
    pub fn image_turns(&self, t: f64) -> f64 {
        let w = t.floor();
        w + self.lift_value(t - w) + self.rotation
    }

    /// Image point of `e^{2 pi i t}` as `(x, y)`.
    pub fn image_point(&self, t: f64) -> (f64, f64) {
        let a = 2.0 * PI * (self.lift_value(t.rem_euclid(1.0)) + self.rotation);
        (a.cos(), a.sin())
    }

    /// `x` with `|u(x) - y| <= tol`; the midpoint of the preimage when `u`
    /// is constant at level `y`.
    pub fn invert(&self, y: f64, tol: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&y) {
            return Err(Error::Domain(format!(
                "inverse argument must lie in [0, 1], got {y}"
            )));
        }
        if !(tol > 0.0) {
            return Err(Error::Domain(format!(
                "tolerance must be positive, got {tol}"
            )));
        }
        match &self.lift {
            Lift::Identity => Ok(y),
            Lift::PiecewiseLinear(points) => Ok(pl_invert(points, y)),
            _ => self.bisect_inverse(y, tol),
        }
    }

    fn bisect_inverse(&self, y: f64, tol: f64) -> Result<f64> {
        const MAX_ITER: usize = 200;
        let u = |x: f64| self.lift_value(x);
        // smallest x with u(x) >= y
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        let mut iters = 0;
        while iters < MAX_ITER {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if u(mid) < y {
                lo = mid;
            } else {
                hi = mid;
            }
            iters += 1;
        }
        let a = hi;
        // largest x with u(x) <= y
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        while iters < 2 * MAX_ITER {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if u(mid) <= y {
                lo = mid;
            } else {
                hi = mid;
            }
            iters += 1;
        }
        let b = lo;
        let x = if b > a {
            0.5 * (a + b)
        } else {
            a.min(b).max(0.0)
        };
        if (u(x) - y).abs() <= tol {
            return Ok(x);
        }
        // a jump in u straddles y: fall back to the closer side
        if (u(a) - y).abs() <= tol {
            return Ok(a);
        }
        // the jump sits between adjacent doubles, so `a` is the preimage to
        // coordinate precision (gaps narrower than an ulp look like jumps)
        let below = f64::from_bits(a.to_bits().saturating_sub(1));
        if a > 0.0 && u(below) < y && u(a) >= y {
            return Ok(a);
        }
        Err(Error::NonConvergence { target: y })
    }

    /// Length of the image of the dyadic arc `Gamma_{j,k}`, in radians.
    pub fn arc_image_length(&self, j: u32, k: u64) -> Result<f64> {
        if j == 0 || j > 63 || k == 0 || k > (1u64 << j) {
            return Err(Error::Index { j, k });
        }
        Ok(2.0 * PI * self.cell_increment(j, k))
    }

    fn cell_increment(&self, j: u32, k: u64) -> f64 {
        match &self.lift {
            Lift::Identity => (-(j as f64)).exp2(),
            Lift::Cantor(c) if j > 52 && j < crate::constructions::FIXED_BITS => {
                let f = |k: u64| c.tree.f_dyadic(Dyadic::from_grid(k as u128, j));
                let df = f(k) - f(k - 1);
                if c.averaged {
                    0.5 * (df + (-(j as f64)).exp2())
                } else {
                    df
                }
            }
            _ => {
                let n = (1u64 << j) as f64;
                self.lift_value(k as f64 / n) - self.lift_value((k - 1) as f64 / n)
            }
        }
    }

    /// `sum_k term(u(k 2^-j) - u((k-1) 2^-j))` over the level-`j` cells.
    pub fn level_sum<F: Fn(f64) -> f64 + Sync>(&self, j: u32, term: F) -> Result<f64> {
        if j == 0 {
            return Err(Error::Index { j, k: 0 });
        }
        match &self.lift {
            Lift::Identity => Ok((j as f64).exp2() * term((-(j as f64)).exp2())),
            Lift::Cantor(c) => match c.level_sum(j, &term) {
                Some(v) => Ok(v),
                None => self.dense_level_sum(j, term),
            },
            _ => self.dense_level_sum(j, term),
        }
    }

    /// Fails exactly when [`Self::level_sum`] would fail at level `j`,
    /// without doing the work.
    pub fn check_level(&self, j: u32) -> Result<()> {
        if j == 0 {
            return Err(Error::Index { j, k: 0 });
        }
        let sparse = match &self.lift {
            Lift::Identity => true,
            Lift::Cantor(c) => c.tree.resolves_level(j),
            _ => false,
        };
        if !sparse && j > DENSE_LEVEL_BUDGET {
            return Err(Error::Resource(format!(
                "level {j} has 2^{j} cells, budget is 2^{DENSE_LEVEL_BUDGET}"
            )));
        }
        Ok(())
    }

    fn dense_level_sum<F: Fn(f64) -> f64 + Sync>(&self, j: u32, term: F) -> Result<f64> {
        if j > DENSE_LEVEL_BUDGET {
            return Err(Error::Resource(format!(
                "level {j} has 2^{j} cells, budget is 2^{DENSE_LEVEL_BUDGET}"
            )));
        }
        let n = 1u64 << j;
        let nf = n as f64;
        Ok(crate::sum::par_sum(n, |i| {
            let a = self.lift_value(i as f64 / nf);
            let b = self.lift_value((i + 1) as f64 / nf);
            term(b - a)
        }))
    }

    /// Level schedule of a Cantor-type lift.
    pub fn cantor_schedule(&self) -> Option<&crate::constructions::CantorSchedule> {
        match &self.lift {
            Lift::Cantor(c) => Some(&c.tree.schedule),
            _ => None,
        }
    }

    /// True when the lift is the identity (rotation allowed).
    pub fn is_rigid(&self) -> bool {
        matches!(self.lift, Lift::Identity)
    }
}

fn validate_breakpoints(points: &[(f64, f64)]) -> Result<()> {
    if points.len() < 2 {
        return Err(Error::Domain(
            "piecewise-linear lift needs at least two points".into(),
        ));
    }
    if points[0] != (0.0, 0.0) || points[points.len() - 1] != (1.0, 1.0) {
        return Err(Error::Domain(
            "piecewise-linear lift must start at (0, 0) and end at (1, 1)".into(),
        ));
    }
    for w in points.windows(2) {
        if !(w[1].0 > w[0].0) || !(w[1].1 >= w[0].1) {
            return Err(Error::Domain(format!(
                "breakpoints must increase: ({}, {}) then ({}, {})",
                w[0].0, w[0].1, w[1].0, w[1].1
            )));
        }
    }
    Ok(())
}

fn pl_eval(points: &[(f64, f64)], t: f64) -> f64 {
    let i = points.partition_point(|&(x, _)| x <= t);
    if i == 0 {
        return points[0].1;
    }
    if i >= points.len() {
        return points[points.len() - 1].1;
    }
    let (x0, y0) = points[i - 1];
    let (x1, y1) = points[i];
    y0 + (y1 - y0) * (t - x0) / (x1 - x0)
}

fn pl_invert(points: &[(f64, f64)], y: f64) -> f64 {
    // preimage of y is [first x with u >= y, last x with u <= y]
    let lo = {
        let i = points.partition_point(|&(_, v)| v < y);
        if i == 0 {
            points[0].0
        } else {
            let (x0, y0) = points[i - 1];
            let (x1, y1) = points[i];
            x0 + (x1 - x0) * (y - y0) / (y1 - y0)
        }
    };
    let hi = {
        let i = points.partition_point(|&(_, v)| v <= y);
        if i >= points.len() {
            points[points.len() - 1].0
        } else {
            let (x0, y0) = points[i - 1];
            let (x1, y1) = points[i];
            x0 + (x1 - x0) * (y - y0) / (y1 - y0)
        }
    };
    0.5 * (lo + hi)
}

fn parse_err(token: &str, reason: impl Into<String>) -> Error {
    Error::Parse {
        token: token.to_string(),
        reason: reason.into(),
    }
}

fn parse_description(desc: &str) -> Result<CircleMap> {
    let desc_trim = desc.trim();
    let (kind, rest) = match desc_trim.split_once(':') {
        Some((k, r)) => (k.trim(), r.trim()),
        None => (desc_trim, ""),
    };
    let mut params: Vec<(&str, &str)> = Vec::new();
    if !rest.is_empty() {
        for item in rest.split(',') {
            let item = item.trim();
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| parse_err(item, "expected key=value"))?;
            params.push((k.trim(), v.trim()));
        }
    }
    let allowed: &[&str] = match kind {
        "identity" => &["rho"],
        "rotation" => &["rho"],
        "piecewise_linear" => &["points", "rho"],
        "cantor_log" => &["s", "depth", "lift", "rho"],
        "cantor_loglog" => &["p", "depth", "lift", "rho"],
        _ => return Err(parse_err(kind, "unknown map kind")),
    };
    for (k, _) in &params {
        if !allowed.contains(k) {
            return Err(parse_err(k, format!("unknown key for {kind}")));
        }
    }
    let get = |key: &str| params.iter().find(|(k, _)| *k == key).map(|(_, v)| *v);
    let num = |key: &str| -> Result<Option<f64>> {
        get(key)
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|_| parse_err(v, format!("{key} must be a number")))
            })
            .transpose()
    };
    let require = |key: &str| -> Result<f64> {
        num(key)?.ok_or_else(|| parse_err(kind, format!("missing required key `{key}`")))
    };
    let rho = num("rho")?;
    let mut map = match kind {
        "identity" => CircleMap::rotation(rho.unwrap_or(0.0))?,
        "rotation" => CircleMap::rotation(require("rho")?)?,
        "piecewise_linear" => {
            let raw =
                get("points").ok_or_else(|| parse_err(kind, "missing required key `points`"))?;
            let mut points = Vec::new();
            for pair in raw.split(';') {
                let (x, y) = pair
                    .split_once('/')
                    .ok_or_else(|| parse_err(pair, "expected x/y"))?;
                let x: f64 = x
                    .trim()
                    .parse()
                    .map_err(|_| parse_err(pair, "bad x coordinate"))?;
                let y: f64 = y
                    .trim()
                    .parse()
                    .map_err(|_| parse_err(pair, "bad y coordinate"))?;
                points.push((x, y));
            }
            CircleMap::new(Lift::PiecewiseLinear(points), rho.unwrap_or(0.0))
                .map_err(|e| parse_err(raw, e.to_string()))?
        }
        _ => {
            let sched_kind = if kind == "cantor_log" {
                ScheduleKind::Power { s: require("s")? }
            } else {
                ScheduleKind::DoubleExp { p: require("p")? }
            };
            let depth = match get("depth") {
                Some(v) => v
                    .parse::<usize>()
                    .map_err(|_| parse_err(v, "depth must be a positive integer"))?,
                None => default_depth(sched_kind),
            };
            let averaged = match get("lift").unwrap_or("average") {
                "average" => true,
                "plain" => false,
                other => return Err(parse_err(other, "lift must be `average` or `plain`")),
            };
            let schedule = build_schedule(sched_kind, depth)
                .map_err(|e| parse_err(desc_trim, e.to_string()))?;
            let tree = build_intervals(&schedule, depth)
                .map_err(|e| parse_err(desc_trim, e.to_string()))?;
            let lift = CantorLift {
                tree: Arc::new(tree),
                averaged,
            };
            let rotation = match rho {
                Some(r) => r,
                None if averaged => 0.5 - lift.eval(0.5),
                None => 0.0,
            };
            CircleMap::new(Lift::Cantor(lift), rotation)?
        }
    };
    map.label = Some(desc_trim.to_string());
    Ok(map)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pl() -> CircleMap {
        CircleMap::piecewise_linear(vec![(0.0, 0.0), (0.5, 0.25), (1.0, 1.0)]).unwrap()
    }

    #[test]
    fn eval_examples() {
        assert_eq!(CircleMap::identity().eval(0.25).unwrap(), 0.25);
        assert_eq!(pl().eval(0.5).unwrap(), 0.25);
        let cantor = CircleMap::parse("cantor_log:s=2,depth=12,lift=plain").unwrap();
        assert_eq!(cantor.eval(0.5).unwrap(), 0.5);
        assert!(matches!(pl().eval(1.5), Err(Error::Domain(_))));
    }

    #[test]
    fn invert_examples() {
        assert_eq!(CircleMap::identity().invert(0.7, 1e-12).unwrap(), 0.7);
        assert_eq!(pl().invert(0.25, 1e-12).unwrap(), 0.5);
        let cantor = CircleMap::parse("cantor_log:s=2,depth=12,lift=plain").unwrap();
        let x = cantor.invert(0.5, 1e-9).unwrap();
        assert!((x - 0.5).abs() < 1e-12);
    }

    #[test]
    fn plateau_inverse_matches_grid_scan() {
        // oracle: preimage of a plateau value located by a dense scan
        let cantor = CircleMap::parse("cantor_log:s=2,depth=12,lift=plain").unwrap();
        let n = 1 << 12;
        for y in [0.25, 0.75, 0.125, 0.625] {
            let hits: Vec<f64> = (0..=n)
                .map(|i| i as f64 / n as f64)
                .filter(|&t| cantor.lift_value(t) == y)
                .collect();
            let mid = 0.5 * (hits[0] + hits[hits.len() - 1]);
            let x = cantor.invert(y, 1e-9).unwrap();
            assert!((x - mid).abs() <= 1.0 / n as f64, "y = {y}: {x} vs {mid}");
        }
    }

    #[test]
    fn flat_piecewise_segment_inverts_to_midpoint() {
        let m = CircleMap::piecewise_linear(vec![(0.0, 0.0), (0.2, 0.5), (0.6, 0.5), (1.0, 1.0)])
            .unwrap();
        assert!((m.invert(0.5, 1e-12).unwrap() - 0.4).abs() < 1e-15);
    }

    #[test]
    fn arc_lengths() {
        let id = CircleMap::identity();
        assert!((id.arc_image_length(3, 5).unwrap() - 2.0 * PI / 8.0).abs() < 1e-15);
        assert!((pl().arc_image_length(1, 1).unwrap() - PI / 2.0).abs() < 1e-15);
        assert!(matches!(
            id.arc_image_length(2, 5),
            Err(Error::Index { .. })
        ));
        assert!(matches!(
            id.arc_image_length(2, 0),
            Err(Error::Index { .. })
        ));
    }

    #[test]
    fn parse_errors_name_the_token() {
        match CircleMap::parse("spiral:s=2") {
            Err(Error::Parse { token, .. }) => assert_eq!(token, "spiral"),
            other => panic!("{other:?}"),
        }
        match CircleMap::parse("cantor_log:s=two") {
            Err(Error::Parse { token, .. }) => assert_eq!(token, "two"),
            other => panic!("{other:?}"),
        }
        match CircleMap::parse("rotation:theta=1") {
            Err(Error::Parse { token, .. }) => assert_eq!(token, "theta"),
            other => panic!("{other:?}"),
        }
        assert!(CircleMap::parse("piecewise_linear:points=0/0;0.5/0.9;0.7/0.2;1/1").is_err());
    }

    #[test]
    fn parse_roundtrip() {
        let m = CircleMap::parse("piecewise_linear:points=0/0;0.5/0.25;1/1,rho=0.1").unwrap();
        assert_eq!(m.eval(0.5).unwrap(), 0.25);
        assert!((m.rotation - 0.1).abs() < 1e-15);
        assert_eq!(
            m.label.as_deref(),
            Some("piecewise_linear:points=0/0;0.5/0.25;1/1,rho=0.1")
        );
        let d = CircleMap::parse("cantor_loglog:p=2").unwrap();
        assert_eq!(d.eval(0.5).unwrap(), 0.5);
    }

    fn fleet() -> Vec<CircleMap> {
        vec![
            CircleMap::identity(),
            CircleMap::rotation(0.3).unwrap(),
            pl(),
            CircleMap::parse("piecewise_linear:points=0/0;0.2/0.5;0.7/0.6;1/1").unwrap(),
            CircleMap::parse("cantor_log:s=2").unwrap(),
        ]
    }

    #[test]
    fn level_sums_telescope() {
        for map in fleet() {
            for j in [1u32, 4, 9] {
                let total = map.level_sum(j, |d| d).unwrap();
                assert!((total - 1.0).abs() < 1e-12, "{map:?} level {j}: {total}");
            }
        }
    }

    #[test]
    fn cantor_sparse_level_sum_matches_dense() {
        let map = CircleMap::parse("cantor_log:s=2").unwrap();
        for j in [3u32, 10, 16] {
            let sparse = map.level_sum(j, |d| d.powf(1.5)).unwrap();
            let dense = map.dense_level_sum(j, |d| d.powf(1.5)).unwrap();
            assert!((sparse - dense).abs() <= 1e-12 * dense, "level {j}");
        }
    }

    proptest! {
        #[test]
        fn refinement_consistency(j in 1u32..12, k_frac in 0.0f64..1.0, idx in 0usize..5) {
            let map = &fleet()[idx];
            let k = 1 + ((k_frac * (1u64 << j) as f64) as u64).min((1u64 << j) - 1);
            let whole = map.arc_image_length(j, k).unwrap();
            let halves = map.arc_image_length(j + 1, 2 * k - 1).unwrap()
                + map.arc_image_length(j + 1, 2 * k).unwrap();
            prop_assert!((whole - halves).abs() <= 1e-12);
        }

        #[test]
        fn inverse_of_eval(t in 0.0f64..1.0, idx in 0usize..5) {
            let map = &fleet()[idx];
            let y = map.eval(t).unwrap();
            let x = map.invert(y, 1e-12).unwrap();
            prop_assert!((map.eval(x).unwrap() - y).abs() <= 1e-12);
            prop_assert!((x - t).abs() <= 1e-9);
        }

        #[test]
        fn rotation_does_not_change_arc_lengths(rho in 0.0f64..1.0, j in 1u32..10, k_frac in 0.0f64..1.0) {
            let k = 1 + ((k_frac * (1u64 << j) as f64) as u64).min((1u64 << j) - 1);
            let a = CircleMap::new(Lift::PiecewiseLinear(vec![(0.0, 0.0), (0.5, 0.25), (1.0, 1.0)]), 0.0).unwrap();
            let b = CircleMap::new(Lift::PiecewiseLinear(vec![(0.0, 0.0), (0.5, 0.25), (1.0, 1.0)]), rho).unwrap();
            prop_assert_eq!(a.arc_image_length(j, k).unwrap(), b.arc_image_length(j, k).unwrap());
        }

        #[test]
        fn lift_is_monotone(a in 0.0f64..1.0, b in 0.0f64..1.0, idx in 0usize..5) {
            let map = &fleet()[idx];
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(map.eval(lo).unwrap() <= map.eval(hi).unwrap());
        }
    }
}
