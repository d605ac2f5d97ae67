//! Time-of-arrival localisation of a source moving at constant velocity.
//!
//! Sensor `i` at `s_i` measures the range `r_i(t) = |x*(t) - s_i| + eps_i(t)`
//! and the estimate minimises
//!
//! ```text
//! f(x, t) = sum_i (|x - s_i| - r_i(t))^2
//! ```
//!
//! The cost is not globally in any sector class; the declared bounds
//! (default `m = 0.1`, `L = 6`) are only meant for the horizon of interest.

use std::ops::RangeInclusive;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::baselines::{run_baseline, BaselineParams};
use crate::cert::design_optimal;
use crate::error::{check_dim, Error, Result};
use crate::sampling::{sample_points, SampleRegion};
use crate::sector::{CostOracle, OptimumTrajectory, SectorBounds};
use crate::tracker::{self, RunOptions, TrackerParams};
use crate::trajectory::RunResult;

/// Estimates closer than this to a sensor are treated as singular.
pub const SINGULARITY_RADIUS: f64 = 1e-9;

fn default_sensors() -> Vec<Vec<f64>> {
    vec![vec![1.0, 0.8], vec![1.0, -1.0], vec![0.0, -0.5]]
}
fn default_x_star0() -> Vec<f64> {
    vec![-9.0, 10.0]
}
fn default_velocity() -> Vec<f64> {
    vec![0.01, -0.01]
}
fn default_horizon() -> usize {
    3000
}
fn default_bounds() -> SectorBounds {
    SectorBounds::new(0.1, 6.0).expect("valid default bounds")
}
fn default_x_init() -> Vec<f64> {
    vec![-8.0, -10.0]
}

/// Experiment definition; every field has a default so `{}` is a valid config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default = "default_sensors")]
    pub sensors: Vec<Vec<f64>>,
    #[serde(default = "default_x_star0")]
    pub x_star0: Vec<f64>,
    #[serde(default = "default_velocity")]
    pub velocity: Vec<f64>,
    #[serde(default)]
    pub noise_std: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default = "default_bounds")]
    pub declared_bounds: SectorBounds,
    #[serde(default = "default_x_init")]
    pub x_init: Vec<f64>,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            sensors: default_sensors(),
            x_star0: default_x_star0(),
            velocity: default_velocity(),
            noise_std: 0.0,
            seed: 0,
            horizon: default_horizon(),
            declared_bounds: default_bounds(),
            x_init: default_x_init(),
        }
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.sensors.is_empty() {
            return Err(Error::invalid("scenario needs at least one sensor"));
        }
        let n = self.x_star0.len();
        if n == 0 {
            return Err(Error::invalid("scenario dimension must be >= 1"));
        }
        check_dim(n, self.velocity.len())?;
        check_dim(n, self.x_init.len())?;
        for s in &self.sensors {
            check_dim(n, s.len())?;
        }
        if !(self.noise_std.is_finite() && self.noise_std >= 0.0) {
            return Err(Error::invalid("noise_std must be finite and >= 0"));
        }
        Ok(())
    }

    pub fn oracle(&self) -> Result<ToaOracle> {
        ToaOracle::new(self)
    }
}

/// Least-squares TOA cost as a [`CostOracle`].
#[derive(Debug, Clone)]
pub struct ToaOracle {
    sensors: Vec<DVector<f64>>,
    trajectory: OptimumTrajectory,
    noise: Option<Normal<f64>>,
    seed: u64,
    bounds: SectorBounds,
    label: String,
}

impl ToaOracle {
    pub fn new(scenario: &Scenario) -> Result<Self> {
        scenario.validate()?;
        let noise = if scenario.noise_std > 0.0 {
            Some(Normal::new(0.0, scenario.noise_std).map_err(|e| Error::invalid(e.to_string()))?)
        } else {
            None
        };
        Ok(Self {
            sensors: scenario.sensors.iter().map(|s| DVector::from_column_slice(s)).collect(),
            trajectory: OptimumTrajectory::new(scenario.x_star0.clone(), scenario.velocity.clone())?,
            noise,
            seed: scenario.seed,
            bounds: scenario.declared_bounds,
            label: format!("toa({} sensors)", scenario.sensors.len()),
        })
    }

    pub fn sensors(&self) -> &[DVector<f64>] {
        &self.sensors
    }

    /// Measured ranges at time `t`. Noise draws depend only on `(seed, t)`.
    pub fn range_measurements(&self, t: usize) -> Vec<f64> {
        let source = self.trajectory.optimum_at(t);
        let mut ranges: Vec<f64> = self.sensors.iter().map(|s| (&source - s).norm()).collect();
        if let Some(noise) = &self.noise {
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
            rng.set_stream(t as u64);
            for r in &mut ranges {
                *r += noise.sample(&mut rng);
            }
        }
        ranges
    }

    /// `(x - s_i, |x - s_i|)` per sensor, rejecting points on a sensor.
    fn offsets(&self, x: &DVector<f64>, t: usize) -> Result<Vec<(DVector<f64>, f64)>> {
        check_dim(self.dimension(), x.len())?;
        self.sensors
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let d = x - s;
                let n = d.norm();
                if n < SINGULARITY_RADIUS {
                    Err(Error::SensorSingularity {
                        sensor: i,
                        t,
                        radius: SINGULARITY_RADIUS,
                    })
                } else {
                    Ok((d, n))
                }
            })
            .collect()
    }

    pub fn toa_cost(&self, x: &DVector<f64>, t: usize) -> Result<f64> {
        let r = self.range_measurements(t);
        Ok(self
            .offsets(x, t)?
            .iter()
            .zip(&r)
            .map(|((_, d), r)| (d - r).powi(2))
            .sum())
    }

    /// `sum_i 2 (|x - s_i| - r_i) (x - s_i) / |x - s_i|`.
    pub fn toa_gradient(&self, x: &DVector<f64>, t: usize) -> Result<DVector<f64>> {
        let r = self.range_measurements(t);
        let mut g = DVector::zeros(x.len());
        for ((d, n), r) in self.offsets(x, t)?.iter().zip(&r) {
            g += d * (2.0 * (n - r) / n);
        }
        Ok(g)
    }

    /// `sum_i 2 (I - r_i (I / |d_i| - d_i d_i^T / |d_i|^3))`, `d_i = x - s_i`.
    pub fn toa_hessian(&self, x: &DVector<f64>, t: usize) -> Result<DMatrix<f64>> {
        let r = self.range_measurements(t);
        let dim = x.len();
        let eye = DMatrix::<f64>::identity(dim, dim);
        let mut h = DMatrix::zeros(dim, dim);
        for ((d, n), r) in self.offsets(x, t)?.iter().zip(&r) {
            let outer = d * d.transpose();
            h += (&eye - (&eye / *n - outer / n.powi(3)) * *r) * 2.0;
        }
        Ok(h)
    }
}

impl CostOracle for ToaOracle {
    fn bounds(&self) -> SectorBounds {
        self.bounds
    }

    fn trajectory(&self) -> &OptimumTrajectory {
        &self.trajectory
    }

    fn label(&self) -> &str {
        &self.label
    }

    fn value(&self, x: &DVector<f64>, t: usize) -> Result<f64> {
        self.toa_cost(x, t)
    }

    fn gradient(&self, x: &DVector<f64>, t: usize) -> Result<DVector<f64>> {
        self.toa_gradient(x, t)
    }

    fn hessian(&self, x: &DVector<f64>, t: usize) -> Option<Result<DMatrix<f64>>> {
        Some(self.toa_hessian(x, t))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HessianScan {
    pub evaluated: usize,
    pub skipped_singular: usize,
    pub min_eig: f64,
    pub max_eig: f64,
    pub min_at: (Vec<f64>, usize),
    pub max_at: (Vec<f64>, usize),
}

/// Extreme Hessian eigenvalues over explicit `(x, t)` points.
///
/// Points where the oracle faults are skipped and counted. Informational:
/// nothing is asserted against the declared bounds.
pub fn hessian_scan_points(oracle: &dyn CostOracle, points: &[(DVector<f64>, usize)]) -> Result<HessianScan> {
    let mut scan = HessianScan {
        evaluated: 0,
        skipped_singular: 0,
        min_eig: f64::INFINITY,
        max_eig: f64::NEG_INFINITY,
        min_at: (Vec::new(), 0),
        max_at: (Vec::new(), 0),
    };
    for (x, t) in points {
        let h = match oracle.hessian(x, *t) {
            None => return Err(Error::invalid(format!("oracle {} has no Hessian", oracle.label()))),
            Some(Err(_)) => {
                scan.skipped_singular += 1;
                continue;
            }
            Some(Ok(h)) => h,
        };
        scan.evaluated += 1;
        let eig = h.symmetric_eigenvalues();
        let (lo, hi) = (eig.min(), eig.max());
        if lo < scan.min_eig {
            scan.min_eig = lo;
            scan.min_at = (x.iter().copied().collect(), *t);
        }
        if hi > scan.max_eig {
            scan.max_eig = hi;
            scan.max_at = (x.iter().copied().collect(), *t);
        }
    }
    Ok(scan)
}

/// Sampled version of [`hessian_scan_points`].
pub fn hessian_bound_scan(
    oracle: &dyn CostOracle,
    region: &SampleRegion,
    t_range: RangeInclusive<usize>,
    samples: usize,
    seed: u64,
) -> Result<HessianScan> {
    let points = sample_points(region, oracle.trajectory(), t_range, samples, seed)?;
    hessian_scan_points(oracle, &points)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComparisonMethod {
    Tracker,
    #[serde(rename = "gd")]
    GradientDescent,
    HeavyBall,
    #[serde(rename = "tmm")]
    TripleMomentum,
}

impl ComparisonMethod {
    pub const DEFAULT_SET: [ComparisonMethod; 3] = [
        ComparisonMethod::Tracker,
        ComparisonMethod::GradientDescent,
        ComparisonMethod::TripleMomentum,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ComparisonMethod::Tracker => "tracker",
            ComparisonMethod::GradientDescent => "gd",
            ComparisonMethod::HeavyBall => "heavy_ball",
            ComparisonMethod::TripleMomentum => "tmm",
        }
    }
}

#[derive(Debug, Clone)]
pub struct MethodRun {
    pub method: ComparisonMethod,
    pub outcome: RunResult,
}

/// Runs each method on the scenario with its default coefficients for the
/// declared bounds. A fault in one method does not stop the others.
pub fn run_comparison(
    scenario: &Scenario,
    methods: &[ComparisonMethod],
    horizon: usize,
    x_init: &[f64],
) -> Result<Vec<MethodRun>> {
    if methods.is_empty() {
        return Err(Error::invalid("no methods to compare"));
    }
    let oracle = scenario.oracle()?;
    check_dim(oracle.dimension(), x_init.len())?;
    let bounds = scenario.declared_bounds;
    let tracker_params: TrackerParams = design_optimal(&bounds)?.params();
    let x0 = DVector::from_column_slice(x_init);
    Ok(methods
        .iter()
        .map(|&method| {
            let outcome = match method {
                ComparisonMethod::Tracker => {
                    tracker::run(&oracle, &tracker_params, x0.clone(), None, horizon, RunOptions::default())
                }
                ComparisonMethod::GradientDescent => {
                    run_baseline(&oracle, &BaselineParams::gradient_descent(&bounds), x0.clone(), horizon)
                }
                ComparisonMethod::HeavyBall => {
                    run_baseline(&oracle, &BaselineParams::polyak(&bounds), x0.clone(), horizon)
                }
                ComparisonMethod::TripleMomentum => {
                    run_baseline(&oracle, &BaselineParams::triple_momentum(&bounds), x0.clone(), horizon)
                }
            };
            MethodRun { method, outcome }
        })
        .collect())
}
