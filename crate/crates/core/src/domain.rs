//! Box domains and the affine map onto the normalized cube `[-1, 1]^d`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned box `[lower, upper]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Domain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() {
            return Err(Error::InvalidDomain("dimension must be at least 1".into()));
        }
        if lower.len() != upper.len() {
            return Err(Error::InvalidDomain(format!(
                "bound lengths differ ({} vs {})",
                lower.len(),
                upper.len()
            )));
        }
        for (k, (l, u)) in lower.iter().zip(&upper).enumerate() {
            if !(l.is_finite() && u.is_finite() && l < u) {
                return Err(Error::InvalidDomain(format!(
                    "dimension {k}: need finite lower < upper, got [{l}, {u}]"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    /// The cube `[-1, 1]^d`.
    pub fn symmetric_unit(dim: usize) -> Self {
        Self::new(vec![-1.0; dim], vec![1.0; dim]).expect("dim >= 1")
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn width(&self, k: usize) -> f64 {
        self.upper[k] - self.lower[k]
    }

    pub fn half_width(&self, k: usize) -> f64 {
        0.5 * self.width(k)
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| 0.5 * (l + u))
            .collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (l, u))| *v >= *l && *v <= *u)
    }

    pub fn clamp(&self, x: &mut [f64]) {
        for (k, v) in x.iter_mut().enumerate() {
            *v = v.clamp(self.lower[k], self.upper[k]);
        }
    }

    pub fn clamped(&self, x: &[f64]) -> Vec<f64> {
        let mut out = x.to_vec();
        self.clamp(&mut out);
        out
    }

    /// Whether coordinate `k` of `x` sits on (or numerically at) a bound.
    pub fn on_boundary(&self, x: &[f64], k: usize) -> bool {
        let tol = 1e-12 * self.width(k);
        x[k] <= self.lower[k] + tol || x[k] >= self.upper[k] - tol
    }

    pub fn to_normalized(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(k, v)| (v - self.lower[k]) / self.half_width(k) - 1.0)
            .collect()
    }

    pub fn from_normalized(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .enumerate()
            .map(|(k, v)| self.lower[k] + (v + 1.0) * self.half_width(k))
            .collect()
    }

    /// Euclidean distance measured in normalized coordinates.
    pub fn normalized_distance(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .enumerate()
            .map(|(k, (p, q))| {
                let t = (p - q) / self.half_width(k);
                t * t
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Distance (normalized units) from `x` to the farthest corner of the box.
    pub fn farthest_corner_distance(&self, x: &[f64]) -> f64 {
        let z = self.to_normalized(x);
        z.iter()
            .map(|v| {
                let t = 1.0 + v.abs();
                t * t
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Largest `r >= 0` such that `x + r u` (normalized units) stays inside the box.
    pub fn ray_exit_distance(&self, x: &[f64], u: &[f64]) -> f64 {
        let z = self.to_normalized(x);
        let mut t = f64::INFINITY;
        for (zk, uk) in z.iter().zip(u) {
            if *uk > 0.0 {
                t = t.min((1.0 - zk) / uk);
            } else if *uk < 0.0 {
                t = t.min((-1.0 - zk) / uk);
            }
        }
        t.max(0.0)
    }

    /// `x + r u` with `u` a direction in normalized coordinates.
    pub fn step_normalized(&self, x: &[f64], u: &[f64], r: f64) -> Vec<f64> {
        let mut out: Vec<f64> = x
            .iter()
            .enumerate()
            .map(|(k, v)| v + r * u[k] * self.half_width(k))
            .collect();
        self.clamp(&mut out);
        out
    }
}

/// One noiseless objective evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub x: Vec<f64>,
    pub y: f64,
}

impl Observation {
    pub fn new(x: Vec<f64>, y: f64) -> Self {
        Self { x, y }
    }
}
