//! Reference methods with a single integrator: gradient descent, Polyak's
//! heavy ball, and the triple momentum method (TMM).
//!
//! All of them evaluate the gradient at the current time index only. On a
//! linearly drifting optimum each settles to a nonzero steady-state error.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::sector::{CostOracle, SectorBounds};
use crate::tracker::RecursionState;
use crate::trajectory::{finite_or_fault, Interrupted, Method, RunResult, Trajectory};

/// Coefficients of the classic TMM recursion
///
/// ```text
/// xi(k+1) = (1 + beta) xi(k) - beta xi(k-1) - alpha g(y(k))
/// y(k)    = (1 + gamma) xi(k) - gamma xi(k-1)
/// x(k)    = (1 + delta) xi(k) - delta xi(k-1)
/// ```
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TmmCoefficients {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
}

impl TmmCoefficients {
    /// Standard closed form: `r = 1 - 1/sqrt(kappa)`, `alpha = (1 + r)/L`,
    /// `beta = r^2/(2 - r)`, `gamma = r^2/((1 + r)(2 - r))`, `delta = r^2/(1 - r^2)`.
    pub fn standard(bounds: &SectorBounds) -> Self {
        let r = 1.0 - 1.0 / bounds.kappa().sqrt();
        let r2 = r * r;
        Self {
            alpha: (1.0 + r) / bounds.l(),
            beta: r2 / (2.0 - r),
            gamma: r2 / ((1.0 + r) * (2.0 - r)),
            delta: r2 / (1.0 - r2),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum BaselineParams {
    #[serde(rename = "gd")]
    GradientDescent { step: f64 },
    HeavyBall { step: f64, momentum: f64 },
    #[serde(rename = "tmm")]
    TripleMomentum(TmmCoefficients),
}

impl BaselineParams {
    pub fn name(&self) -> &'static str {
        match self {
            BaselineParams::GradientDescent { .. } => "gd",
            BaselineParams::HeavyBall { .. } => "heavy_ball",
            BaselineParams::TripleMomentum(_) => "tmm",
        }
    }

    /// Step `2 / (L + m)`.
    pub fn gradient_descent(bounds: &SectorBounds) -> Self {
        BaselineParams::GradientDescent {
            step: 2.0 / (bounds.l() + bounds.m()),
        }
    }

    /// Polyak's `alpha = 4/(sqrt L + sqrt m)^2`, `beta = ((sqrt L - sqrt m)/(sqrt L + sqrt m))^2`.
    pub fn polyak(bounds: &SectorBounds) -> Self {
        let (sl, sm) = (bounds.l().sqrt(), bounds.m().sqrt());
        BaselineParams::HeavyBall {
            step: 4.0 / (sl + sm).powi(2),
            momentum: ((sl - sm) / (sl + sm)).powi(2),
        }
    }

    pub fn triple_momentum(bounds: &SectorBounds) -> Self {
        BaselineParams::TripleMomentum(TmmCoefficients::standard(bounds))
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            BaselineParams::GradientDescent { step } => {
                if !(step.is_finite() && step > 0.0) {
                    return Err(Error::invalid(format!("gd step must be > 0, got {step}")));
                }
            }
            BaselineParams::HeavyBall { step, momentum } => {
                if !(step.is_finite() && step > 0.0) {
                    return Err(Error::invalid(format!("heavy-ball step must be > 0, got {step}")));
                }
                if !(0.0..1.0).contains(&momentum) {
                    return Err(Error::invalid(format!("heavy-ball momentum must lie in [0, 1), got {momentum}")));
                }
            }
            BaselineParams::TripleMomentum(c) => {
                if ![c.alpha, c.beta, c.gamma, c.delta].iter().all(|v| v.is_finite()) {
                    return Err(Error::invalid("TMM coefficients must be finite"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointState {
    pub x: DVector<f64>,
    pub t: usize,
}

pub fn gd_step(state: &PointState, oracle: &dyn CostOracle, step: f64) -> Result<PointState> {
    check_dim(oracle.dimension(), state.x.len())?;
    if !(step > 0.0) {
        return Err(Error::invalid("gd step must be > 0"));
    }
    let g = finite_or_fault(oracle.gradient(&state.x, state.t)?, state.t)?;
    Ok(PointState {
        x: &state.x - g * step,
        t: state.t + 1,
    })
}

pub fn heavy_ball_step(
    state: &RecursionState,
    oracle: &dyn CostOracle,
    step: f64,
    momentum: f64,
) -> Result<RecursionState> {
    check_dim(oracle.dimension(), state.x_curr.len())?;
    let t = state.t;
    let g = finite_or_fault(oracle.gradient(&state.x_curr, t)?, t)?;
    let x_next = &state.x_curr - g * step + (&state.x_curr - &state.x_prev) * momentum;
    Ok(RecursionState {
        x_prev: state.x_curr.clone(),
        x_curr: x_next,
        t: t + 1,
    })
}

/// TMM state: the two most recent `xi` iterates at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct TmmState {
    pub xi: DVector<f64>,
    pub xi_prev: DVector<f64>,
    pub t: usize,
}

impl TmmState {
    /// All sequences start at `x(0)`.
    pub fn new(x0: DVector<f64>) -> Self {
        Self {
            xi_prev: x0.clone(),
            xi: x0,
            t: 0,
        }
    }

    /// The reported estimate `x(t)`.
    pub fn output(&self, c: &TmmCoefficients) -> DVector<f64> {
        &self.xi * (1.0 + c.delta) - &self.xi_prev * c.delta
    }
}

pub fn tmm_step(state: &TmmState, oracle: &dyn CostOracle, c: &TmmCoefficients) -> Result<TmmState> {
    check_dim(oracle.dimension(), state.xi.len())?;
    let y = &state.xi * (1.0 + c.gamma) - &state.xi_prev * c.gamma;
    let g = finite_or_fault(oracle.gradient(&y, state.t)?, state.t)?;
    let xi_next = &state.xi * (1.0 + c.beta) - &state.xi_prev * c.beta - g * c.alpha;
    Ok(TmmState {
        xi_prev: state.xi.clone(),
        xi: xi_next,
        t: state.t + 1,
    })
}

/// Runs a baseline from `x0` for `horizon` steps (`horizon + 1` iterates).
pub fn run_baseline(oracle: &dyn CostOracle, params: &BaselineParams, x0: DVector<f64>, horizon: usize) -> RunResult {
    let mut traj = Trajectory::new(Method::Baseline(*params), oracle.label());
    let path = oracle.trajectory();
    let fail = |e: Error, traj: Trajectory| Err(Interrupted::new(e, traj));
    if let Err(e) = params.validate().and_then(|_| check_dim(oracle.dimension(), x0.len())) {
        return fail(e, traj);
    }
    match *params {
        BaselineParams::GradientDescent { step } => {
            let mut s = PointState { x: x0, t: 0 };
            traj.push(s.x.clone(), path);
            while s.t < horizon {
                match gd_step(&s, oracle, step) {
                    Ok(n) => s = n,
                    Err(e) => return fail(e, traj),
                }
                traj.push(s.x.clone(), path);
            }
        }
        BaselineParams::HeavyBall { step, momentum } => {
            traj.push(x0.clone(), path);
            // x(-1) = x(0): the first step has no momentum
            let mut s = RecursionState {
                x_prev: x0.clone(),
                x_curr: x0,
                t: 0,
            };
            while s.t < horizon {
                match heavy_ball_step(&s, oracle, step, momentum) {
                    Ok(n) => s = n,
                    Err(e) => return fail(e, traj),
                }
                traj.push(s.x_curr.clone(), path);
            }
        }
        BaselineParams::TripleMomentum(c) => {
            let mut s = TmmState::new(x0);
            traj.push(s.output(&c), path);
            while s.t < horizon {
                match tmm_step(&s, oracle, &c) {
                    Ok(n) => s = n,
                    Err(e) => return fail(e, traj),
                }
                traj.push(s.output(&c), path);
            }
        }
    }
    Ok(traj)
}
