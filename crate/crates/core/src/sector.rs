//! Cost oracles and the sector-bounded class `F(m, L)`.
//!
//! A member of the class has the form `f(x, t) = g(x - x*(0) - a t)` and a
//! gradient that satisfies, for every `x` and `t`,
//!
//! ```text
//! (m e - grad f)^T (L e - grad f) <= 0,   e = x - x*(t).
//! ```
//!
//! Global membership cannot be decided for a black-box oracle, so
//! [`verify_sector_membership`] checks the inequality on a deterministic
//! low-discrepancy sample.

use std::ops::RangeInclusive;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::sampling::{sample_points, SampleRegion};

/// Residual tolerance for sector membership.
pub const SECTOR_TOLERANCE: f64 = 1e-12;

/// Linear optimum path `x*(t) = x*(0) + a t`.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimumTrajectory {
    x_star0: DVector<f64>,
    velocity: DVector<f64>,
}

impl OptimumTrajectory {
    pub fn new(x_star0: Vec<f64>, velocity: Vec<f64>) -> Result<Self> {
        check_dim(x_star0.len(), velocity.len())?;
        if x_star0.is_empty() {
            return Err(Error::invalid("optimum trajectory needs dimension >= 1"));
        }
        if x_star0.iter().chain(&velocity).any(|v| !v.is_finite()) {
            return Err(Error::invalid("optimum trajectory must be finite"));
        }
        Ok(Self {
            x_star0: DVector::from_vec(x_star0),
            velocity: DVector::from_vec(velocity),
        })
    }

    /// Fixed optimum (zero velocity). Panics on an empty vector.
    pub fn stationary(x_star: Vec<f64>) -> Self {
        let n = x_star.len();
        Self::new(x_star, vec![0.0; n]).expect("stationary optimum must be non-empty and finite")
    }

    pub fn dimension(&self) -> usize {
        self.x_star0.len()
    }

    pub fn x_star0(&self) -> &DVector<f64> {
        &self.x_star0
    }

    pub fn velocity(&self) -> &DVector<f64> {
        &self.velocity
    }

    /// Evaluated affinely from `t`, never by accumulation.
    pub fn optimum_at(&self, t: usize) -> DVector<f64> {
        &self.x_star0 + &self.velocity * (t as f64)
    }

    /// `x - x*(t)`.
    pub fn error_at(&self, x: &DVector<f64>, t: usize) -> DVector<f64> {
        let tf = t as f64;
        DVector::from_iterator(
            x.len(),
            x.iter()
                .zip(self.x_star0.iter().zip(self.velocity.iter()))
                .map(|(x, (x0, a))| x - (x0 + a * tf)),
        )
    }
}

#[derive(Serialize, Deserialize)]
struct SectorBoundsRepr {
    m: f64,
    #[serde(rename = "L")]
    l: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    kappa: Option<f64>,
}

/// Sector constants `0 < m <= L`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SectorBoundsRepr", into = "SectorBoundsRepr")]
pub struct SectorBounds {
    m: f64,
    l: f64,
}

impl SectorBounds {
    pub fn new(m: f64, l: f64) -> Result<Self> {
        if !(m.is_finite() && l.is_finite() && m > 0.0 && l >= m) {
            return Err(Error::InvalidBounds { m, l });
        }
        Ok(Self { m, l })
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn l(&self) -> f64 {
        self.l
    }

    /// Condition number `L / m`.
    pub fn kappa(&self) -> f64 {
        self.l / self.m
    }

    pub fn contains(&self, lambda: f64) -> bool {
        (self.m..=self.l).contains(&lambda)
    }
}

impl TryFrom<SectorBoundsRepr> for SectorBounds {
    type Error = Error;

    fn try_from(r: SectorBoundsRepr) -> Result<Self> {
        Self::new(r.m, r.l)
    }
}

impl From<SectorBounds> for SectorBoundsRepr {
    fn from(b: SectorBounds) -> Self {
        Self {
            m: b.m,
            l: b.l,
            kappa: Some(b.kappa()),
        }
    }
}

/// Time-varying cost with first-order (and optionally second-order) access.
///
/// Implementations are immutable after construction and may be shared across
/// threads. The gradient must vanish on the declared optimum trajectory.
pub trait CostOracle: Send + Sync {
    fn bounds(&self) -> SectorBounds;

    fn trajectory(&self) -> &OptimumTrajectory;

    fn label(&self) -> &str;

    fn value(&self, x: &DVector<f64>, t: usize) -> Result<f64>;

    fn gradient(&self, x: &DVector<f64>, t: usize) -> Result<DVector<f64>>;

    /// `None` when the oracle has no second-order information.
    fn hessian(&self, _x: &DVector<f64>, _t: usize) -> Option<Result<DMatrix<f64>>> {
        None
    }

    fn dimension(&self) -> usize {
        self.trajectory().dimension()
    }
}

/// `(m e - g)^T (L e - g)` with `e = x - x*(t)` and `g = grad f(x, t)`.
///
/// Non-positive values mean the sector inequality holds at `(x, t)`.
pub fn sector_residual(oracle: &dyn CostOracle, x: &DVector<f64>, t: usize) -> Result<f64> {
    check_dim(oracle.dimension(), x.len())?;
    let e = oracle.trajectory().error_at(x, t);
    let g = oracle.gradient(x, t)?;
    let b = oracle.bounds();
    Ok((&e * b.m() - &g).dot(&(&e * b.l() - &g)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MembershipReport {
    pub samples: usize,
    /// Samples whose gradient evaluation failed (e.g. singular points).
    pub skipped: usize,
    pub worst_residual: f64,
    pub worst_point: Vec<f64>,
    pub worst_t: usize,
    pub tolerance: f64,
    pub passed: bool,
}

/// Samples the sector inequality over `region x t_range`.
pub fn verify_sector_membership(
    oracle: &dyn CostOracle,
    region: &SampleRegion,
    t_range: RangeInclusive<usize>,
    samples: usize,
    seed: u64,
) -> Result<MembershipReport> {
    let points = sample_points(region, oracle.trajectory(), t_range, samples, seed)?;
    let mut report = MembershipReport {
        samples,
        skipped: 0,
        worst_residual: f64::NEG_INFINITY,
        worst_point: Vec::new(),
        worst_t: 0,
        tolerance: SECTOR_TOLERANCE,
        passed: false,
    };
    for (x, t) in points {
        match sector_residual(oracle, &x, t) {
            Ok(r) if r > report.worst_residual || report.worst_point.is_empty() => {
                report.worst_residual = r;
                report.worst_point = x.iter().copied().collect();
                report.worst_t = t;
            }
            Ok(_) => {}
            Err(_) => report.skipped += 1,
        }
    }
    report.passed = !report.worst_point.is_empty() && report.worst_residual <= SECTOR_TOLERANCE;
    Ok(report)
}

/// `f(x, t) = 1/2 (x - x*(t))^T H (x - x*(t))` with `H = R^T diag(eig) R`.
#[derive(Debug, Clone)]
pub struct QuadraticOracle {
    hessian: DMatrix<f64>,
    eigenvalues: Vec<f64>,
    trajectory: OptimumTrajectory,
    bounds: SectorBounds,
    label: String,
}

impl QuadraticOracle {
    pub fn hessian_matrix(&self) -> &DMatrix<f64> {
        &self.hessian
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }
}

/// Builds a quadratic member of `F(m, L)`.
///
/// `rotation` must be orthogonal; `None` means the identity.
pub fn make_quadratic(
    eigenvalues: &[f64],
    rotation: Option<&DMatrix<f64>>,
    trajectory: OptimumTrajectory,
    bounds: SectorBounds,
) -> Result<QuadraticOracle> {
    let n = trajectory.dimension();
    check_dim(n, eigenvalues.len())?;
    if let Some(&value) = eigenvalues.iter().find(|v| !bounds.contains(**v)) {
        return Err(Error::EigenvalueOutOfSector {
            value,
            m: bounds.m(),
            l: bounds.l(),
        });
    }
    let diag = DMatrix::from_diagonal(&DVector::from_column_slice(eigenvalues));
    let hessian = match rotation {
        None => diag,
        Some(r) => {
            if r.nrows() != n || r.ncols() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: r.nrows().max(r.ncols()),
                });
            }
            let defect = (r.transpose() * r - DMatrix::identity(n, n)).amax();
            if defect > 1e-10 {
                return Err(Error::invalid(format!(
                    "rotation is not orthogonal (|R^T R - I|max = {defect:e})"
                )));
            }
            let h = r.transpose() * diag * r;
            // symmetrise away rounding
            (&h + h.transpose()) * 0.5
        }
    };
    Ok(QuadraticOracle {
        hessian,
        eigenvalues: eigenvalues.to_vec(),
        label: format!("quadratic(n={n})"),
        trajectory,
        bounds,
    })
}

impl CostOracle for QuadraticOracle {
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
        check_dim(self.dimension(), x.len())?;
        let e = self.trajectory.error_at(x, t);
        Ok(0.5 * e.dot(&(&self.hessian * &e)))
    }

    fn gradient(&self, x: &DVector<f64>, t: usize) -> Result<DVector<f64>> {
        check_dim(self.dimension(), x.len())?;
        Ok(&self.hessian * self.trajectory.error_at(x, t))
    }

    fn hessian(&self, x: &DVector<f64>, _t: usize) -> Option<Result<DMatrix<f64>>> {
        Some(check_dim(self.dimension(), x.len()).map(|_| self.hessian.clone()))
    }
}

/// Separable, generally nonconvex member of `F(m, L)`.
///
/// Each coordinate of the gradient is `e_i (c + r sin(w e_i))` with
/// `c = (m + L) / 2` and `r = (L - m) / 2`, so the local gain stays in
/// `[m, L]` while the curvature goes negative once `|w e_i|` is large.
#[derive(Debug, Clone)]
pub struct SinusoidalSectorOracle {
    frequency: f64,
    trajectory: OptimumTrajectory,
    bounds: SectorBounds,
    label: String,
}

pub fn make_sinusoidal_sector(
    frequency: f64,
    trajectory: OptimumTrajectory,
    bounds: SectorBounds,
) -> Result<SinusoidalSectorOracle> {
    if !(frequency.is_finite() && frequency > 0.0) {
        return Err(Error::invalid("frequency must be positive"));
    }
    Ok(SinusoidalSectorOracle {
        frequency,
        label: format!("sinusoidal-sector(n={}, w={frequency})", trajectory.dimension()),
        trajectory,
        bounds,
    })
}

impl SinusoidalSectorOracle {
    fn centre_radius(&self) -> (f64, f64) {
        let b = self.bounds;
        (0.5 * (b.m() + b.l()), 0.5 * (b.l() - b.m()))
    }
}

impl CostOracle for SinusoidalSectorOracle {
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
        check_dim(self.dimension(), x.len())?;
        let (c, r) = self.centre_radius();
        let w = self.frequency;
        Ok(self
            .trajectory
            .error_at(x, t)
            .iter()
            .map(|e| 0.5 * c * e * e + r * ((w * e).sin() / (w * w) - e * (w * e).cos() / w))
            .sum())
    }

    fn gradient(&self, x: &DVector<f64>, t: usize) -> Result<DVector<f64>> {
        check_dim(self.dimension(), x.len())?;
        let (c, r) = self.centre_radius();
        let w = self.frequency;
        Ok(self
            .trajectory
            .error_at(x, t)
            .map(|e| e * (c + r * (w * e).sin())))
    }

    fn hessian(&self, x: &DVector<f64>, t: usize) -> Option<Result<DMatrix<f64>>> {
        if let Err(e) = check_dim(self.dimension(), x.len()) {
            return Some(Err(e));
        }
        let (c, r) = self.centre_radius();
        let w = self.frequency;
        let d = self
            .trajectory
            .error_at(x, t)
            .map(|e| c + r * (w * e).sin() + r * w * e * (w * e).cos());
        Some(Ok(DMatrix::from_diagonal(&d)))
    }
}
