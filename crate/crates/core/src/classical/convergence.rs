use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trajectory::Trajectory;

/// Energy is considered settled once every later drop over a window of
/// length `dt_check` stays within `threshold * dt_check`, i.e. the descent
/// rate never again exceeds `threshold`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceCriterion {
    pub threshold: f64,
    pub dt_check: f64,
}

impl Default for ConvergenceCriterion {
    fn default() -> Self {
        Self { threshold: 1e-2, dt_check: 1e-3 }
    }
}

impl ConvergenceCriterion {
    pub fn detect(&self, traj: &Trajectory) -> Result<Option<f64>> {
        detect_convergence(traj, self.threshold, self.dt_check)
    }
}

/// Converged time and the energy recorded there.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergencePoint {
    pub time: f64,
    pub energy: f64,
}

/// Earliest recorded time after which the energy never drops faster than
/// `threshold` per unit time, measured over windows of `dt_check`.
/// `None` when the last window of the trace still violates the bound.
pub fn detect_convergence(traj: &Trajectory, threshold: f64, dt_check: f64) -> Result<Option<f64>> {
    if !(threshold >= 0.0) || !(dt_check > 0.0) {
        return Err(Error::InvalidArgument("threshold must be >= 0 and dt_check > 0".into()));
    }
    let times = &traj.times;
    if times.is_empty() {
        return Ok(None);
    }
    let spacing = times.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    if spacing > dt_check * (1.0 + 1e-9) {
        return Err(Error::TraceTooCoarse { spacing, check: dt_check });
    }
    let mut tracker = ConvergenceTracker::new(threshold, dt_check);
    for (&t, &e) in times.iter().zip(&traj.energies) {
        tracker.observe(t, e);
    }
    Ok(tracker.converged_at())
}

/// Streaming form of [`detect_convergence`] for runs too long to keep in memory.
#[derive(Debug, Clone)]
pub struct ConvergenceTracker {
    threshold: f64,
    dt_check: f64,
    window: std::collections::VecDeque<(f64, f64)>,
    first: Option<f64>,
    candidate: Option<ConvergencePoint>,
    violated_last: bool,
}

impl ConvergenceTracker {
    pub fn new(threshold: f64, dt_check: f64) -> Self {
        Self {
            threshold,
            dt_check,
            window: Default::default(),
            first: None,
            candidate: None,
            violated_last: false,
        }
    }

    pub fn observe(&mut self, t: f64, energy: f64) {
        if self.first.is_none() {
            self.first = Some(t);
            self.candidate = Some(ConvergencePoint { time: t, energy });
        }
        let tol = 1e-9 * self.dt_check;
        self.window.push_back((t, energy));
        // Close every window whose span has now been reached.
        while let Some(&(t0, e0)) = self.window.front() {
            if t - t0 < self.dt_check - tol {
                break;
            }
            let drop = e0 - energy;
            let violated = drop > self.threshold * (t - t0) * (1.0 + 1e-12);
            self.window.pop_front();
            if violated {
                let (time, energy) = self.window.front().copied().unwrap_or((t, energy));
                self.candidate = Some(ConvergencePoint { time, energy });
                self.violated_last = true;
            } else {
                self.violated_last = false;
            }
        }
    }

    /// Current answer given everything observed so far.
    pub fn converged_at(&self) -> Option<f64> {
        self.converged_point().map(|p| p.time)
    }

    pub fn converged_point(&self) -> Option<ConvergencePoint> {
        if self.violated_last {
            None
        } else {
            self.candidate
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classical::ControlNorms;

    fn trace(dt: f64, len: usize, f: impl Fn(f64) -> f64) -> Trajectory {
        let mut tr = Trajectory::new(1, None);
        for i in 0..len {
            let t = i as f64 * dt;
            tr.push(t, f(t), ControlNorms::default(), None);
        }
        tr
    }

    #[test]
    fn constant_energy_converges_immediately() {
        let tr = trace(1e-3, 50, |_| 3.0);
        assert_eq!(detect_convergence(&tr, 1e-2, 1e-3).unwrap(), Some(0.0));
    }

    #[test]
    fn steep_slope_never_converges() {
        let tr = trace(1e-3, 200, |t| 10.0 - 100.0 * t);
        assert_eq!(detect_convergence(&tr, 1e-2, 1e-3).unwrap(), None);
    }

    #[test]
    fn knee_is_located() {
        let tr = trace(1e-3, 4001, |t| if t < 2.0 { 5.0 - t } else { 3.0 });
        let at = detect_convergence(&tr, 1e-2, 1e-3).unwrap().unwrap();
        assert!((at - 2.0).abs() < 2e-3, "{at}");
        let mut tracker = ConvergenceTracker::new(1e-2, 1e-3);
        for (&t, &e) in tr.times.iter().zip(&tr.energies) {
            tracker.observe(t, e);
        }
        let p = tracker.converged_point().unwrap();
        assert_eq!(p.time, at);
        assert!((p.energy - 3.0).abs() < 3e-3);
    }

    #[test]
    fn window_longer_than_spacing() {
        let tr = trace(1e-3, 6001, |t| (-t).exp());
        let at = detect_convergence(&tr, 1e-2, 1e-2).unwrap().unwrap();
        // rate e^{-t} averaged over the window drops below 1e-2 near ln(100)
        assert!((at - 100f64.ln()).abs() < 2e-2, "{at}");
    }

    #[test]
    fn coarse_trace_rejected() {
        let tr = trace(1e-2, 10, |_| 0.0);
        assert!(matches!(detect_convergence(&tr, 1e-2, 1e-3), Err(Error::TraceTooCoarse { .. })));
    }
}
