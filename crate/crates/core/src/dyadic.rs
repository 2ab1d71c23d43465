//! Dyadic boundary arcs and the annular cells of the disk above them.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DyadicIndex {
    pub j: u32,
    pub k: u64,
}

impl DyadicIndex {
    pub fn new(j: u32, k: u64) -> Result<Self> {
        if j == 0 || j > 62 || k == 0 || k > (1u64 << j) {
            return Err(Error::Index { j, k });
        }
        Ok(Self { j, k })
    }

    /// Arc `Gamma_{j,k}` in turns.
    pub fn arc(&self) -> (f64, f64) {
        let w = (-(self.j as f64)).exp2();
        ((self.k - 1) as f64 * w, self.k as f64 * w)
    }
}

/// Annular cell `Q_{j,k}`: `1 - 2^(1-j) <= r <= 1 - 2^-j` over the arc.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DyadicCell {
    pub index: DyadicIndex,
    pub r_min: f64,
    pub r_max: f64,
    pub theta_min: f64,
    pub theta_max: f64,
}

impl DyadicCell {
    pub fn area(&self) -> f64 {
        0.5 * (self.theta_max - self.theta_min)
            * (self.r_max * self.r_max - self.r_min * self.r_min)
    }

    pub fn contains_polar(&self, r: f64, theta: f64) -> bool {
        (self.r_min..=self.r_max).contains(&r) && (self.theta_min..=self.theta_max).contains(&theta)
    }

    fn center_polar(&self) -> (f64, f64) {
        (
            0.5 * (self.r_min + self.r_max),
            0.5 * (self.theta_min + self.theta_max),
        )
    }

    /// Euclidean diameter of the cell.
    pub fn diameter(&self) -> f64 {
        let half = PI * (-(self.index.j as f64)).exp2();
        let (a, b) = (self.r_min, self.r_max);
        // opposite corners, written to avoid cancellation
        let corners = ((b - a).powi(2) + 4.0 * a * b * half.sin().powi(2)).sqrt();
        let width = if half >= PI / 2.0 {
            2.0 * b
        } else {
            2.0 * b * half.sin()
        };
        width.max(corners).max(b - a)
    }
}

pub fn cell(j: u32, k: u64) -> Result<DyadicCell> {
    let index = DyadicIndex::new(j, k)?;
    let (a, b) = index.arc();
    Ok(DyadicCell {
        index,
        r_min: 1.0 - (1.0 - j as f64).exp2(),
        r_max: 1.0 - (-(j as f64)).exp2(),
        theta_min: 2.0 * PI * a,
        theta_max: 2.0 * PI * b,
    })
}

/// Cells of level `j`, generated lazily.
pub fn level_cells(j: u32) -> Result<impl Iterator<Item = DyadicCell>> {
    DyadicIndex::new(j, 1)?;
    Ok((1..=(1u64 << j)).map(move |k| cell(j, k).expect("index in range")))
}

/// Disk inside a cell, centred at its polar midpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InscribedDisk {
    pub center: (f64, f64),
    pub radius: f64,
    /// Smallest `C` with the cell inside the `C`-dilate of the disk.
    pub dilation: f64,
}

pub fn inscribed_disk(c: &DyadicCell) -> InscribedDisk {
    let (r_mid, t_mid) = c.center_polar();
    let half_r = 0.5 * (c.r_max - c.r_min);
    let half_t = PI * (-(c.index.j as f64)).exp2();
    let radius = half_r.min(r_mid * half_t) / std::f64::consts::SQRT_2;
    let center = (r_mid * t_mid.cos(), r_mid * t_mid.sin());
    // farthest point of the cell from the center is a corner
    let s2 = (0.5 * half_t).sin().powi(2);
    let far = [c.r_min, c.r_max]
        .iter()
        .map(|&r| ((r - r_mid).powi(2) + 4.0 * r * r_mid * s2).sqrt())
        .fold(0.0, f64::max);
    InscribedDisk {
        center,
        radius,
        dilation: far / radius,
    }
}

/// Largest dilation constant over all cells with level at most `max_j`.
/// Cells of one level are rotations of each other, so `k = 1` suffices.
pub fn uniform_dilation(max_j: u32) -> Result<f64> {
    (1..=max_j)
        .map(|j| cell(j, 1).map(|c| inscribed_disk(&c).dilation))
        .try_fold(0.0f64, |m, d| d.map(|d| m.max(d)))
}

/// Sup of diameter over inscribed radius for levels up to `max_j`.
pub fn roundness(max_j: u32) -> Result<f64> {
    (1..=max_j)
        .map(|j| {
            cell(j, 1).map(|c| {
                let d = inscribed_disk(&c);
                c.diameter() / d.radius
            })
        })
        .try_fold(0.0f64, |m, d| d.map(|d| m.max(d)))
}
