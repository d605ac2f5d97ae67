//! Deterministic low-discrepancy sampling of `(x, t)` pairs.
//!
//! Points come from a Halton sequence with a Cranley-Patterson shift drawn
//! from a seeded ChaCha stream, so every sweep is reproducible from its seed.

use std::ops::RangeInclusive;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::sector::OptimumTrajectory;

pub const DEFAULT_SAMPLES: usize = 10_000;
pub const DEFAULT_SEED: u64 = 0x5eed;

const PRIMES: [u32; 24] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89,
];

fn radical_inverse(mut index: u64, base: u32) -> f64 {
    let base = base as u64;
    let inv = 1.0 / base as f64;
    let mut scale = inv;
    let mut acc = 0.0;
    while index > 0 {
        acc += (index % base) as f64 * scale;
        index /= base;
        scale *= inv;
    }
    acc
}

/// Shifted Halton sequence on the unit cube `[0, 1)^dims`.
#[derive(Debug, Clone)]
pub struct HaltonSampler {
    shift: Vec<f64>,
    index: u64,
}

impl HaltonSampler {
    pub fn new(dims: usize, seed: u64) -> Result<Self> {
        if dims == 0 || dims > PRIMES.len() {
            return Err(Error::invalid(format!(
                "Halton sampler supports 1..={} dimensions, got {dims}",
                PRIMES.len()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shift = (0..dims).map(|_| rng.random::<f64>()).collect();
        // index 0 is the origin in every base; start at 1
        Ok(Self { shift, index: 1 })
    }

    pub fn dims(&self) -> usize {
        self.shift.len()
    }

    pub fn next_point(&mut self) -> Vec<f64> {
        let i = self.index;
        self.index += 1;
        self.shift
            .iter()
            .zip(PRIMES)
            .map(|(s, p)| (radical_inverse(i, p) + s).fract())
            .collect()
    }
}

/// Axis-aligned box `[lower, upper]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxRegion {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BoxRegion {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        check_dim(lower.len(), upper.len())?;
        if lower.is_empty() {
            return Err(Error::invalid("box must have at least one dimension"));
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l <= u) || !l.is_finite() || !u.is_finite()) {
            return Err(Error::invalid("box requires finite lower <= upper in every coordinate"));
        }
        Ok(Self { lower, upper })
    }

    /// Cube of half-width `radius` around `center`.
    pub fn centered(center: &[f64], radius: f64) -> Result<Self> {
        Self::new(
            center.iter().map(|c| c - radius).collect(),
            center.iter().map(|c| c + radius).collect(),
        )
    }

    pub fn dimension(&self) -> usize {
        self.lower.len()
    }

    fn map_unit(&self, u: &[f64]) -> DVector<f64> {
        DVector::from_iterator(
            self.lower.len(),
            self.lower
                .iter()
                .zip(&self.upper)
                .zip(u)
                .map(|((l, h), u)| l + (h - l) * u),
        )
    }
}

/// Where the spatial part of each sample is drawn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleRegion {
    /// Fixed box in absolute coordinates.
    Absolute(BoxRegion),
    /// Cube of the given half-width centred on `x*(t)` for each sampled `t`.
    AroundOptimum { radius: f64 },
}

/// Draws `samples` deterministic `(x, t)` pairs.
pub fn sample_points(
    region: &SampleRegion,
    trajectory: &OptimumTrajectory,
    t_range: RangeInclusive<usize>,
    samples: usize,
    seed: u64,
) -> Result<Vec<(DVector<f64>, usize)>> {
    if samples == 0 {
        return Err(Error::invalid("samples must be >= 1"));
    }
    if t_range.is_empty() {
        return Err(Error::invalid("empty time range"));
    }
    let n = trajectory.dimension();
    match region {
        SampleRegion::Absolute(b) => check_dim(n, b.dimension())?,
        SampleRegion::AroundOptimum { radius } => {
            if !(radius.is_finite() && *radius >= 0.0) {
                return Err(Error::invalid("radius must be finite and non-negative"));
            }
        }
    }
    let (t_lo, t_hi) = (*t_range.start(), *t_range.end());
    let span = (t_hi - t_lo + 1) as f64;
    let mut sampler = HaltonSampler::new(n + 1, seed)?;
    let points = (0..samples)
        .map(|_| {
            let u = sampler.next_point();
            let t = (t_lo + (u[n] * span) as usize).min(t_hi);
            let x = match region {
                SampleRegion::Absolute(b) => b.map_unit(&u[..n]),
                SampleRegion::AroundOptimum { radius } => {
                    let centre = trajectory.optimum_at(t);
                    DVector::from_iterator(
                        n,
                        centre.iter().zip(&u[..n]).map(|(c, u)| c + radius * (2.0 * u - 1.0)),
                    )
                }
            };
            (x, t)
        })
        .collect();
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radical_inverse_base_two() {
        assert_eq!(radical_inverse(1, 2), 0.5);
        assert_eq!(radical_inverse(2, 2), 0.25);
        assert_eq!(radical_inverse(3, 2), 0.75);
        assert!((radical_inverse(5, 3) - (2.0 / 3.0 + 1.0 / 9.0)).abs() < 1e-15);
    }

    #[test]
    fn sampler_is_reproducible_and_in_unit_cube() {
        let mut a = HaltonSampler::new(3, 11).unwrap();
        let mut b = HaltonSampler::new(3, 11).unwrap();
        for _ in 0..500 {
            let p = a.next_point();
            assert_eq!(p, b.next_point());
            assert!(p.iter().all(|u| (0.0..1.0).contains(u)));
        }
    }

    #[test]
    fn samples_stay_inside_region_and_time_range() {
        let traj = OptimumTrajectory::new(vec![1.0, -1.0], vec![0.5, 0.0]).unwrap();
        let b = BoxRegion::new(vec![-2.0, 0.0], vec![2.0, 3.0]).unwrap();
        let pts = sample_points(&SampleRegion::Absolute(b), &traj, 3..=9, 1000, 1).unwrap();
        assert_eq!(pts.len(), 1000);
        for (x, t) in &pts {
            assert!((3..=9).contains(t));
            assert!((-2.0..=2.0).contains(&x[0]) && (0.0..=3.0).contains(&x[1]));
        }
        // every time index gets hit
        for t in 3..=9 {
            assert!(pts.iter().any(|(_, s)| *s == t));
        }
        let near = sample_points(&SampleRegion::AroundOptimum { radius: 0.1 }, &traj, 0..=100, 200, 1)
            .unwrap();
        for (x, t) in &near {
            assert!((x - traj.optimum_at(*t)).amax() <= 0.1 + 1e-15);
        }
    }

    #[test]
    fn rejects_bad_input() {
        let traj = OptimumTrajectory::stationary(vec![0.0]);
        let b = BoxRegion::new(vec![0.0], vec![1.0]).unwrap();
        assert!(sample_points(&SampleRegion::Absolute(b.clone()), &traj, 0..=1, 0, 0).is_err());
        #[allow(clippy::reversed_empty_ranges)]
        let empty = 5..=1;
        assert!(sample_points(&SampleRegion::Absolute(b), &traj, empty, 10, 0).is_err());
        assert!(BoxRegion::new(vec![1.0], vec![0.0]).is_err());
        assert!(BoxRegion::new(vec![], vec![]).is_err());
    }
}
