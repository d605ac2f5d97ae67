//! The ramp-tracking recursion and its Luré realisation.
//!
//! Recursion form, one step:
//!
//! ```text
//! x(t+1) = x(t) - alpha g(x(t), t) + gamma g(x(t-1), t-1) + x(t) - x(t-1)
//! ```
//!
//! Luré form with state `X = [w; x]`, `u(t) = -g(x(t), t)`:
//!
//! ```text
//! w(t+1) = x(t) + gamma u(t)
//! x(t+1) = -w(t) + 2 x(t) + alpha u(t)
//! ```
//!
//! The two agree when `w(1) = x(0) + gamma u(0)`. The linear part is
//! `G0(z) = (alpha z - gamma) / (z - 1)^2`; the double pole at `z = 1` is what
//! removes the steady-state error on a linearly moving optimum.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::sector::CostOracle;
use crate::trajectory::{finite_or_fault, Interrupted, Method, RunResult, Trajectory};

/// Step size `alpha` and delayed-gradient weight `gamma`; momentum is fixed at 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackerParams {
    pub alpha: f64,
    pub gamma: f64,
}

impl TrackerParams {
    /// `alpha` must be positive and `gamma` finite. Stability is not checked
    /// here; see [`crate::cert::certify`].
    pub fn new(alpha: f64, gamma: f64) -> Result<Self> {
        if !(alpha.is_finite() && gamma.is_finite()) {
            return Err(Error::invalid("tracker parameters must be finite"));
        }
        if alpha <= 0.0 {
            return Err(Error::invalid(format!("alpha must be > 0, got {alpha}")));
        }
        Ok(Self { alpha, gamma })
    }

    /// Unchecked constructor for certification sweeps, where `alpha = 0` and
    /// other degenerate points are legitimate inputs.
    pub const fn raw(alpha: f64, gamma: f64) -> Self {
        Self { alpha, gamma }
    }
}

/// Time index at which the delayed gradient is evaluated.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DelayedGradientTime {
    /// `g(x(t-1), t-1)`: the gradient the previous step already saw. Matches the
    /// Luré realisation and gives zero steady-state error on ramps.
    #[default]
    Lagged,
    /// `g(x(t-1), t)`: previous point, current time. Leaves a constant forcing
    /// `-gamma * lambda * a` in error coordinates, hence a bias on ramps.
    Current,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecursionState {
    pub x_prev: DVector<f64>,
    pub x_curr: DVector<f64>,
    pub t: usize,
}

impl RecursionState {
    pub fn new(x0: DVector<f64>, x1: DVector<f64>) -> Result<Self> {
        check_dim(x0.len(), x1.len())?;
        Ok(Self {
            x_prev: x0,
            x_curr: x1,
            t: 1,
        })
    }
}

/// Advances the recursion by one step.
pub fn step_recursion(
    state: &RecursionState,
    oracle: &dyn CostOracle,
    params: &TrackerParams,
    delay: DelayedGradientTime,
) -> Result<RecursionState> {
    check_dim(oracle.dimension(), state.x_curr.len())?;
    check_dim(oracle.dimension(), state.x_prev.len())?;
    let t = state.t;
    if t == 0 {
        return Err(Error::invalid("recursion state needs t >= 1"));
    }
    let g_curr = finite_or_fault(oracle.gradient(&state.x_curr, t)?, t)?;
    let delayed_t = match delay {
        DelayedGradientTime::Lagged => t - 1,
        DelayedGradientTime::Current => t,
    };
    let g_prev = finite_or_fault(oracle.gradient(&state.x_prev, delayed_t)?, delayed_t)?;
    let x_next = &state.x_curr * 2.0 - &state.x_prev - g_curr * params.alpha + g_prev * params.gamma;
    Ok(RecursionState {
        x_prev: state.x_curr.clone(),
        x_curr: x_next,
        t: t + 1,
    })
}

/// State `X(t) = [w(t); x(t)]` of the Luré system.
#[derive(Debug, Clone, PartialEq)]
pub struct LureState {
    pub w: DVector<f64>,
    pub x: DVector<f64>,
    pub t: usize,
}

impl LureState {
    /// State at `t = 1` equivalent to the recursion started from `x(0), x(1)`:
    /// `w(1) = x(0) - gamma g(x(0), 0)`.
    pub fn from_initial(
        oracle: &dyn CostOracle,
        params: &TrackerParams,
        x0: &DVector<f64>,
        x1: DVector<f64>,
    ) -> Result<Self> {
        check_dim(oracle.dimension(), x0.len())?;
        check_dim(oracle.dimension(), x1.len())?;
        let u0 = -finite_or_fault(oracle.gradient(x0, 0)?, 0)?;
        Ok(Self {
            w: x0 + u0 * params.gamma,
            x: x1,
            t: 1,
        })
    }

    /// Stacked vector `[w; x]`.
    pub fn stacked(&self) -> DVector<f64> {
        let n = self.x.len();
        DVector::from_iterator(2 * n, self.w.iter().chain(self.x.iter()).copied())
    }
}

pub fn step_lure(state: &LureState, oracle: &dyn CostOracle, params: &TrackerParams) -> Result<LureState> {
    check_dim(oracle.dimension(), state.x.len())?;
    check_dim(oracle.dimension(), state.w.len())?;
    let u = -finite_or_fault(oracle.gradient(&state.x, state.t)?, state.t)?;
    let w_next = &state.x + &u * params.gamma;
    let x_next = &state.x * 2.0 - &state.w + u * params.alpha;
    Ok(LureState {
        w: w_next,
        x: x_next,
        t: state.t + 1,
    })
}

/// `A = A0 (x) I_n`, `B = B0 (x) I_n`, `C = C0 (x) I_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct LureMatrices {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
}

pub fn lure_matrices(params: &TrackerParams, n: usize) -> Result<LureMatrices> {
    if n == 0 {
        return Err(Error::invalid("state dimension must be >= 1"));
    }
    let eye = DMatrix::<f64>::identity(n, n);
    let a0 = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 2.0]);
    let b0 = DMatrix::from_column_slice(2, 1, &[params.gamma, params.alpha]);
    let c0 = DMatrix::from_row_slice(1, 2, &[0.0, 1.0]);
    Ok(LureMatrices {
        a: a0.kronecker(&eye),
        b: b0.kronecker(&eye),
        c: c0.kronecker(&eye),
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    #[default]
    Recursion,
    Lure,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunOptions {
    #[serde(default)]
    pub engine: Engine,
    #[serde(default)]
    pub delayed_gradient: DelayedGradientTime,
}

/// Runs the tracker from `x(0)` and `x(1)` (defaulting to `x(0)`) through
/// time `horizon`, returning `horizon + 1` iterates.
///
/// Divergence is not an error; only non-finite gradients or oracle faults
/// stop the run, and the partial trajectory is returned with the fault.
pub fn run(
    oracle: &dyn CostOracle,
    params: &TrackerParams,
    x0: DVector<f64>,
    x1: Option<DVector<f64>>,
    horizon: usize,
    options: RunOptions,
) -> RunResult {
    let mut traj = Trajectory::new(Method::Tracker(*params), oracle.label());
    let path = oracle.trajectory();
    let fail = |e: Error, traj: Trajectory| Err(Interrupted::new(e, traj));

    if horizon < 2 {
        return fail(Error::invalid("horizon must be >= 2"), traj);
    }
    if options.engine == Engine::Lure && options.delayed_gradient == DelayedGradientTime::Current {
        return fail(
            Error::invalid("the Luré engine realises only the lagged delayed gradient"),
            traj,
        );
    }
    if let Err(e) = check_dim(oracle.dimension(), x0.len()) {
        return fail(e, traj);
    }
    let x1 = x1.unwrap_or_else(|| x0.clone());
    traj.push(x0.clone(), path);

    match options.engine {
        Engine::Recursion => {
            let mut state = match RecursionState::new(x0, x1) {
                Ok(s) => s,
                Err(e) => return fail(e, traj),
            };
            traj.push(state.x_curr.clone(), path);
            while state.t < horizon {
                match step_recursion(&state, oracle, params, options.delayed_gradient) {
                    Ok(next) => state = next,
                    Err(e) => return fail(e, traj),
                }
                traj.push(state.x_curr.clone(), path);
            }
        }
        Engine::Lure => {
            let mut state = match LureState::from_initial(oracle, params, &x0, x1) {
                Ok(s) => s,
                Err(e) => return fail(e, traj),
            };
            traj.push(state.x.clone(), path);
            while state.t < horizon {
                match step_lure(&state, oracle, params) {
                    Ok(next) => state = next,
                    Err(e) => return fail(e, traj),
                }
                traj.push(state.x.clone(), path);
            }
        }
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cert::{design_optimal, spectral_radius, char_poly};
    use crate::sector::{make_quadratic, make_sinusoidal_sector, OptimumTrajectory, SectorBounds};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    fn quad_1d(lambda: f64, x_star0: f64, a: f64) -> impl CostOracle {
        let b = SectorBounds::new(lambda.min(0.1), lambda.max(6.0)).unwrap();
        make_quadratic(&[lambda], None, OptimumTrajectory::new(vec![x_star0], vec![a]).unwrap(), b).unwrap()
    }

    #[test]
    fn params_validation() {
        assert!(TrackerParams::new(0.0, 0.1).is_err());
        assert!(TrackerParams::new(0.1, f64::NAN).is_err());
        assert!(TrackerParams::new(0.1, -0.3).is_ok());
    }

    #[test]
    fn fixed_point_at_static_optimum() {
        let o = quad_1d(2.0, 3.0, 0.0);
        let p = TrackerParams::new(0.3, 0.2).unwrap();
        let s = RecursionState::new(v(&[3.0]), v(&[3.0])).unwrap();
        let next = step_recursion(&s, &o, &p, DelayedGradientTime::Lagged).unwrap();
        assert_eq!(next.x_curr, v(&[3.0]));
        let l = LureState::from_initial(&o, &p, &v(&[3.0]), v(&[3.0])).unwrap();
        assert_eq!(step_lure(&l, &o, &p).unwrap().x, v(&[3.0]));
    }

    #[test]
    fn hand_evaluated_step() {
        let o = quad_1d(1.0, 0.0, 0.0);
        let p = TrackerParams::new(0.5, 0.25).unwrap();
        let s = RecursionState::new(v(&[1.0]), v(&[1.0])).unwrap();
        for delay in [DelayedGradientTime::Lagged, DelayedGradientTime::Current] {
            let next = step_recursion(&s, &o, &p, delay).unwrap();
            assert_abs_diff_eq!(next.x_curr[0], 0.75, epsilon = 1e-15);
            assert_eq!(next.t, 2);
        }
        let l = LureState::from_initial(&o, &p, &v(&[1.0]), v(&[1.0])).unwrap();
        assert_abs_diff_eq!(step_lure(&l, &o, &p).unwrap().x[0], 0.75, epsilon = 1e-15);
    }

    #[test]
    fn lure_matrices_pattern() {
        let p = TrackerParams::new(0.4, 0.3).unwrap();
        let m1 = lure_matrices(&p, 1).unwrap();
        assert_eq!(m1.a, DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 2.0]));
        assert_eq!(m1.b, DMatrix::from_column_slice(2, 1, &[0.3, 0.4]));
        assert_eq!(m1.c, DMatrix::from_row_slice(1, 2, &[0.0, 1.0]));

        let m2 = lure_matrices(&p, 2).unwrap();
        #[rustfmt::skip]
        let a2 = DMatrix::from_row_slice(4, 4, &[
            0.0, 0.0, 1.0, 0.0,
            0.0, 0.0, 0.0, 1.0,
            -1.0, 0.0, 2.0, 0.0,
            0.0, -1.0, 0.0, 2.0,
        ]);
        assert_eq!(m2.a, a2);
        assert_eq!(m2.b.shape(), (4, 2));

        for n in 1..5 {
            let m = lure_matrices(&p, n).unwrap();
            let s = LureState {
                w: DVector::from_fn(n, |i, _| i as f64 + 0.5),
                x: DVector::from_fn(n, |i, _| -(i as f64) * 2.0),
                t: 1,
            };
            assert_eq!(&m.c * s.stacked(), s.x);
        }
        assert!(lure_matrices(&p, 0).is_err());
    }

    #[test]
    fn lure_step_matches_state_space_form() {
        let b = SectorBounds::new(0.1, 6.0).unwrap();
        let o = make_sinusoidal_sector(2.0, OptimumTrajectory::new(vec![1.0, -2.0], vec![0.02, 0.01]).unwrap(), b)
            .unwrap();
        let p = design_optimal(&b).unwrap().params();
        let m = lure_matrices(&p, 2).unwrap();
        let mut s = LureState::from_initial(&o, &p, &v(&[4.0, 4.0]), v(&[3.0, -1.0])).unwrap();
        for _ in 0..50 {
            let u = -o.gradient(&s.x, s.t).unwrap();
            let expected = &m.a * s.stacked() + &m.b * u;
            s = step_lure(&s, &o, &p).unwrap();
            assert!((s.stacked() - expected).amax() < 1e-12);
        }
    }

    #[test]
    fn run_lengths_and_constant_trajectory() {
        let o = quad_1d(1.5, -2.0, 0.0);
        let p = TrackerParams::new(0.3, 0.2).unwrap();
        for engine in [Engine::Recursion, Engine::Lure] {
            let opts = RunOptions { engine, ..Default::default() };
            let tr = run(&o, &p, v(&[-2.0]), None, 10, opts).unwrap();
            assert_eq!(tr.len(), 11);
            assert!(tr.errors.iter().all(|e| *e == 0.0));
        }
        assert!(run(&o, &p, v(&[0.0]), None, 1, RunOptions::default()).is_err());
        let bad = RunOptions { engine: Engine::Lure, delayed_gradient: DelayedGradientTime::Current };
        assert!(run(&o, &p, v(&[0.0]), None, 10, bad).is_err());
        assert!(run(&o, &p, v(&[0.0, 1.0]), None, 10, RunOptions::default()).is_err());
    }

    #[test]
    fn divergent_run_is_returned_then_faults_on_overflow() {
        let o = quad_1d(1.0, 0.0, 0.0);
        let p = TrackerParams::new(10.0, 0.0).unwrap();
        let tr = run(&o, &p, v(&[1.0]), None, 20, RunOptions::default()).unwrap();
        assert!(tr.final_error().unwrap() > 1e6);
        let err = run(&o, &p, v(&[1.0]), None, 2000, RunOptions::default()).unwrap_err();
        assert!(matches!(err.source, Error::NonFiniteGradient { .. }));
        assert!(err.partial.len() > 2);
    }

    #[test]
    fn engines_agree_on_random_quadratics() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let b = SectorBounds::new(0.1, 6.0).unwrap();
        let p = design_optimal(&b).unwrap().params();
        for _ in 0..5 {
            let n = 3;
            let eig: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..6.0)).collect();
            let q = nalgebra::DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0)).qr().q();
            let path = OptimumTrajectory::new(
                (0..n).map(|_| rng.random_range(-5.0..5.0)).collect(),
                (0..n).map(|_| rng.random_range(-0.05..0.05)).collect(),
            )
            .unwrap();
            let o = make_quadratic(&eig, Some(&q), path, b).unwrap();
            let x0 = DVector::from_fn(n, |_, _| rng.random_range(-10.0..10.0));
            let x1 = DVector::from_fn(n, |_, _| rng.random_range(-10.0..10.0));
            let a = run(&o, &p, x0.clone(), Some(x1.clone()), 1000, RunOptions::default()).unwrap();
            let l = run(&o, &p, x0, Some(x1), 1000, RunOptions { engine: Engine::Lure, ..Default::default() })
                .unwrap();
            for (xa, xl) in a.iterates.iter().zip(&l.iterates) {
                assert!((xa - xl).amax() <= 1e-10);
            }
        }
    }

    #[test]
    fn error_coordinates_follow_time_invariant_recursion() {
        // e(t+1) = 2e(t) - e(t-1) - alpha H e(t) + gamma H e(t-1)
        let b = SectorBounds::new(0.1, 6.0).unwrap();
        let p = design_optimal(&b).unwrap().params();
        let o = make_quadratic(&[0.3, 4.0], None, OptimumTrajectory::new(vec![2.0, 1.0], vec![0.01, -0.03]).unwrap(), b)
            .unwrap();
        let h = o.hessian_matrix().clone();
        let tr = run(&o, &p, v(&[-1.0, 5.0]), Some(v(&[0.0, 4.0])), 1500, RunOptions::default()).unwrap();
        let mut e_prev = &tr.iterates[0] - &tr.optima[0];
        let mut e = &tr.iterates[1] - &tr.optima[1];
        for t in 2..tr.len() {
            let e_next = &e * 2.0 - &e_prev - &h * &e * p.alpha + &h * &e_prev * p.gamma;
            let actual = &tr.iterates[t] - &tr.optima[t];
            assert!((&e_next - &actual).amax() <= 1e-10, "t = {t}");
            e_prev = e;
            e = e_next;
        }
    }

    #[test]
    fn verbatim_delay_leaves_kappa_times_velocity_bias() {
        // steady state of e = 2e - e - alpha*lam*e + gamma*lam*(e - a): e = gamma a / (gamma - alpha)
        let b = SectorBounds::new(0.1, 6.0).unwrap();
        let p = design_optimal(&b).unwrap().params();
        let a = 0.01;
        for lambda in [0.1, 3.05, 6.0] {
            let o = make_quadratic(&[lambda], None, OptimumTrajectory::new(vec![1.0], vec![a]).unwrap(), b).unwrap();
            let opts = RunOptions { delayed_gradient: DelayedGradientTime::Current, ..Default::default() };
            let tr = run(&o, &p, v(&[0.0]), None, 5000, opts).unwrap();
            let e = tr.iterates[5000][0] - tr.optima[5000][0];
            let expected = p.gamma * a / (p.gamma - p.alpha);
            assert_abs_diff_eq!(expected, -b.kappa() * a, epsilon = 1e-9);
            assert_abs_diff_eq!(e, expected, epsilon = 1e-8);

            let lagged = run(&o, &p, v(&[0.0]), None, 5000, RunOptions::default()).unwrap();
            assert!(lagged.final_error().unwrap() <= 1e-8);
        }
    }

    #[test]
    fn observed_rate_bounded_by_spectral_radius() {
        let b = SectorBounds::new(0.1, 6.0).unwrap();
        let p = design_optimal(&b).unwrap().params();
        for lambda in [0.1, 0.5, 2.0, 6.0] {
            let o = make_quadratic(&[lambda], None, OptimumTrajectory::stationary(vec![0.0]), b).unwrap();
            let radius = spectral_radius(&char_poly(&p, lambda));
            let tr = run(&o, &p, v(&[1.0]), Some(v(&[-0.5])), 2000, RunOptions::default()).unwrap();
            let worst = (500..=2000)
                .filter(|&t| tr.errors[t] > 0.0)
                .map(|t| tr.errors[t].powf(1.0 / t as f64))
                .fold(0.0, f64::max);
            assert!(worst <= radius + 0.01, "lambda {lambda}: {worst} vs {radius}");
        }
    }
}
