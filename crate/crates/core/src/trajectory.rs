use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::BaselineParams;
use crate::error::Error;
use crate::sector::OptimumTrajectory;
use crate::tracker::TrackerParams;

/// Which algorithm produced a trajectory, with its coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Method {
    Tracker(TrackerParams),
    #[serde(untagged)]
    Baseline(BaselineParams),
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Tracker(_) => "tracker",
            Method::Baseline(b) => b.name(),
        }
    }
}

/// Iterates of one run with their tracking errors `|x(t) - x*(t)|`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub method: Method,
    pub oracle_label: String,
    pub iterates: Vec<DVector<f64>>,
    pub optima: Vec<DVector<f64>>,
    pub errors: Vec<f64>,
}

impl Trajectory {
    pub fn new(method: Method, oracle_label: impl Into<String>) -> Self {
        Self {
            method,
            oracle_label: oracle_label.into(),
            iterates: Vec::new(),
            optima: Vec::new(),
            errors: Vec::new(),
        }
    }

    /// Appends the iterate for time index `len()`.
    pub fn push(&mut self, x: DVector<f64>, path: &OptimumTrajectory) {
        let t = self.iterates.len();
        let opt = path.optimum_at(t);
        self.errors.push((&x - &opt).norm());
        self.optima.push(opt);
        self.iterates.push(x);
    }

    pub fn len(&self) -> usize {
        self.iterates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.iterates.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.iterates.first().map_or(0, |x| x.len())
    }

    pub fn final_error(&self) -> Option<f64> {
        self.errors.last().copied()
    }

    /// Mean error over the inclusive window `[from, to]`, clipped to the run.
    pub fn mean_error(&self, from: usize, to: usize) -> Option<f64> {
        let to = to.min(self.errors.len().checked_sub(1)?);
        if from > to {
            return None;
        }
        let w = &self.errors[from..=to];
        Some(w.iter().sum::<f64>() / w.len() as f64)
    }

    pub fn min_error(&self, from: usize, to: usize) -> Option<f64> {
        let to = to.min(self.errors.len().checked_sub(1)?);
        if from > to {
            return None;
        }
        self.errors[from..=to].iter().copied().reduce(f64::min)
    }
}

/// A run stopped by a fault; the iterates computed so far are kept.
#[derive(Debug, Clone, Error)]
#[error("{source} after {} iterates", partial.len())]
pub struct Interrupted {
    pub source: Error,
    pub partial: Box<Trajectory>,
}

impl Interrupted {
    pub(crate) fn new(source: Error, partial: Trajectory) -> Self {
        Self {
            source,
            partial: Box::new(partial),
        }
    }
}

pub type RunResult = Result<Trajectory, Interrupted>;

pub(crate) fn finite_or_fault(g: DVector<f64>, t: usize) -> Result<DVector<f64>, Error> {
    if g.iter().all(|v| v.is_finite()) {
        Ok(g)
    } else {
        Err(Error::NonFiniteGradient { t })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn errors_recomputable_from_iterates() {
        let path = OptimumTrajectory::new(vec![0.0, 1.0], vec![1.0, 0.0]).unwrap();
        let params = TrackerParams::new(0.1, 0.05).unwrap();
        let mut tr = Trajectory::new(Method::Tracker(params), "test");
        for t in 0..5 {
            tr.push(DVector::from_vec(vec![t as f64 + 3.0, 5.0]), &path);
        }
        for (t, e) in tr.errors.iter().enumerate() {
            assert_eq!(*e, (&tr.iterates[t] - path.optimum_at(t)).norm());
            assert_eq!(*e, 5.0);
        }
        assert_eq!(tr.mean_error(1, 100), Some(5.0));
        assert_eq!(tr.mean_error(7, 9), None);
        assert_eq!(tr.final_error(), Some(5.0));
    }

    #[test]
    fn method_serialises_with_tag() {
        let params = TrackerParams::new(0.5, 0.25).unwrap();
        let s = serde_json::to_string(&Method::Tracker(params)).unwrap();
        assert_eq!(s, r#"{"method":"tracker","alpha":0.5,"gamma":0.25}"#);
        let gd = Method::Baseline(BaselineParams::GradientDescent { step: 0.1 });
        let s = serde_json::to_string(&gd).unwrap();
        assert_eq!(s, r#"{"method":"gd","step":0.1}"#);
        assert_eq!(serde_json::from_str::<Method>(&s).unwrap(), gd);
    }
}
