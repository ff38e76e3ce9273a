//! RK4 integration of `dm_i/dt = 2 m_i × h_i` under piecewise-constant feedback.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::classical::controls::{
    control_strengths, fill_controls, field_into, symmetric_pair_weights, AlgorithmKind,
    ControlSnapshot, FrozenControls, PairScope, PairSet,
};
use crate::classical::convergence::{ConvergenceCriterion, ConvergencePoint, ConvergenceTracker};
use crate::classical::ClassicalSpinState;
use crate::error::{Error, Result};
use crate::problem::HuboPolynomial;
use crate::trajectory::{SpinSnapshot, Trajectory};

/// When feedback values are re-evaluated inside a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ControlUpdate {
    /// Once per `dt`, at the start of the step; held over all four stages.
    #[default]
    PerStep,
    /// At every RK4 stage (continuous-feedback limit).
    PerStage,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub t_total: f64,
    pub renormalize: bool,
    /// Largest acceptable pre-renormalisation `||m_i| - 1|` in one step.
    pub drift_tolerance: f64,
    pub abort_on_drift: bool,
    pub control_update: ControlUpdate,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            t_total: 64.0,
            renormalize: true,
            drift_tolerance: 1e-6,
            abort_on_drift: true,
            control_update: ControlUpdate::PerStep,
        }
    }
}

impl IntegratorConfig {
    pub fn new(dt: f64, t_total: f64) -> Self {
        Self { dt, t_total, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_total >= 0.0 && self.t_total.is_finite()) {
            return Err(Error::InvalidArgument(format!("T must be >= 0, got {}", self.t_total)));
        }
        Ok(())
    }

    /// Step lengths covering `[0, T]`: whole steps of `dt` and, when `T` is not
    /// a multiple of `dt`, one shorter final step.
    pub(crate) fn schedule(&self) -> (usize, Option<f64>) {
        let ratio = self.t_total / self.dt;
        let whole = (ratio + 1e-9).floor() as usize;
        let rest = self.t_total - whole as f64 * self.dt;
        if rest > 1e-12 * self.t_total.max(1.0) {
            (whole, Some(rest))
        } else {
            (whole, None)
        }
    }
}

#[inline]
fn torque(m: &[f64; 3], h: &[f64; 3]) -> [f64; 3] {
    [
        2.0 * (m[1] * h[2] - m[2] * h[1]),
        2.0 * (m[2] * h[0] - m[0] * h[2]),
        2.0 * (m[0] * h[1] - m[1] * h[0]),
    ]
}

/// `dm_i/dt = 2 m_i × h_i`.
pub fn eom_rhs(spins: &[[f64; 3]], fields: &[[f64; 3]]) -> Result<Vec<[f64; 3]>> {
    if spins.len() != fields.len() {
        return Err(Error::DimensionMismatch { expected: spins.len(), got: fields.len() });
    }
    Ok(spins.iter().zip(fields).map(|(m, h)| torque(m, h)).collect())
}

/// Reusable RK4 workspace for one algorithm on one problem.
///
/// Call [`Stepper::prepare`] at the current state (evaluates energy,
/// gradient and the feedback values), then [`Stepper::advance`].
pub struct Stepper<'a> {
    kind: AlgorithmKind,
    hubo: &'a HuboPolynomial,
    update: ControlUpdate,
    controls: ControlSnapshot,
    stage_controls: ControlSnapshot,
    sym: Vec<f64>,
    stage_sym: Vec<f64>,
    energy: f64,
    z: Vec<f64>,
    grad: Vec<f64>,
    stage_grad: Vec<f64>,
    start: Vec<[f64; 3]>,
    stage: Vec<[f64; 3]>,
    field: Vec<[f64; 3]>,
    k: [Vec<[f64; 3]>; 4],
}

impl<'a> Stepper<'a> {
    pub fn new(kind: AlgorithmKind, hubo: &'a HuboPolynomial, scope: PairScope) -> Self {
        let pairs = kind.has_pairs().then(|| Arc::new(PairSet::new(hubo, scope)));
        Self::with_pairs(kind, hubo, pairs)
    }

    pub fn with_pairs(
        kind: AlgorithmKind,
        hubo: &'a HuboPolynomial,
        pairs: Option<Arc<PairSet>>,
    ) -> Self {
        let n = hubo.n_vars();
        let mut controls = ControlSnapshot::empty(0.0);
        controls.pairs = pairs.filter(|_| kind.has_pairs());
        let stage_controls = controls.clone();
        Self {
            kind,
            hubo,
            update: ControlUpdate::PerStep,
            controls,
            stage_controls,
            sym: Vec::new(),
            stage_sym: Vec::new(),
            energy: f64::NAN,
            z: vec![0.0; n],
            grad: vec![0.0; n],
            stage_grad: vec![0.0; n],
            start: vec![[0.0; 3]; n],
            stage: vec![[0.0; 3]; n],
            field: vec![[0.0; 3]; n],
            k: std::array::from_fn(|_| vec![[0.0; 3]; n]),
        }
    }

    pub fn set_control_update(&mut self, update: ControlUpdate) {
        self.update = update;
    }

    pub fn kind(&self) -> AlgorithmKind {
        self.kind
    }

    /// Evaluates `E_P`, `∂E_P/∂m^Z` and the feedback values at `state`.
    pub fn prepare(&mut self, state: &ClassicalSpinState, t: f64) -> f64 {
        let m = state.spins();
        for (z, s) in self.z.iter_mut().zip(m) {
            *z = s[2];
        }
        self.energy = self.hubo.energy_gradient_into(&self.z, &mut self.grad);
        fill_controls(self.kind, m, &self.grad, &mut self.controls);
        self.controls.time = t;
        if let (Some(p), Some(b)) = (&self.controls.pairs, &self.controls.beta_pair) {
            symmetric_pair_weights(p, b, &mut self.sym);
        }
        self.energy
    }

    /// Energy at the last prepared state.
    pub fn energy(&self) -> f64 {
        self.energy
    }

    pub fn gradient(&self) -> &[f64] {
        &self.grad
    }

    pub fn controls(&self) -> &ControlSnapshot {
        &self.controls
    }

    /// Stage derivative into `k[which]`, evaluated at the step start state or
    /// at the current stage state.
    fn derivative(&mut self, at_start: bool, which: usize) {
        let per_stage = self.update == ControlUpdate::PerStage && !at_start;
        let m: &[[f64; 3]] = if at_start { &self.start } else { &self.stage };
        if !at_start && (self.kind.includes_problem() || per_stage) {
            for (z, s) in self.z.iter_mut().zip(m) {
                *z = s[2];
            }
            self.hubo.gradient_into(&self.z, &mut self.stage_grad);
        }
        let grad: &[f64] = if at_start { &self.grad } else { &self.stage_grad };
        let (controls, sym) = if per_stage {
            fill_controls(self.kind, m, grad, &mut self.stage_controls);
            if let (Some(p), Some(b)) = (&self.stage_controls.pairs, &self.stage_controls.beta_pair) {
                symmetric_pair_weights(p, b, &mut self.stage_sym);
            }
            (&self.stage_controls, &self.stage_sym)
        } else {
            (&self.controls, &self.sym)
        };
        let frozen = FrozenControls {
            beta_x: controls.beta_x.as_deref(),
            beta_y: controls.beta_y.as_deref(),
            pairs: controls.pairs.as_deref(),
            sym_weights: sym,
        };
        field_into(self.kind, m, grad, &frozen, &mut self.field);
        for ((o, mi), h) in self.k[which].iter_mut().zip(m).zip(&self.field) {
            *o = torque(mi, h);
        }
    }

    /// One RK4 step of length `dt` from the prepared state. Returns the
    /// pre-renormalisation drift `max_i ||m_i| - 1|`.
    pub fn advance(&mut self, state: &mut ClassicalSpinState, dt: f64, renormalize: bool) -> f64 {
        self.start.copy_from_slice(state.spins());
        self.derivative(true, 0);
        self.stage_from(0, 0.5 * dt);
        self.derivative(false, 1);
        self.stage_from(1, 0.5 * dt);
        self.derivative(false, 2);
        self.stage_from(2, dt);
        self.derivative(false, 3);

        let w = dt / 6.0;
        let [k1, k2, k3, k4] = &self.k;
        for (i, m) in state.spins_mut().iter_mut().enumerate() {
            for c in 0..3 {
                m[c] = self.start[i][c] + w * (k1[i][c] + 2.0 * k2[i][c] + 2.0 * k3[i][c] + k4[i][c]);
            }
        }
        if renormalize {
            state.renormalize()
        } else {
            state.max_norm_deviation()
        }
    }

    fn stage_from(&mut self, which: usize, h: f64) {
        for ((s, m0), d) in self.stage.iter_mut().zip(&self.start).zip(&self.k[which]) {
            for c in 0..3 {
                s[c] = m0[c] + h * d[c];
            }
        }
    }
}

/// One step from `spins`: controls from the initial state, frozen across stages.
pub fn rk4_step(
    spins: &ClassicalSpinState,
    hubo: &HuboPolynomial,
    kind: AlgorithmKind,
    dt: f64,
    scope: PairScope,
) -> Result<(ClassicalSpinState, ControlSnapshot, f64)> {
    if hubo.n_vars() != spins.len() {
        return Err(Error::DimensionMismatch { expected: hubo.n_vars(), got: spins.len() });
    }
    let mut stepper = Stepper::new(kind, hubo, scope);
    stepper.prepare(spins, 0.0);
    let controls = stepper.controls().clone();
    let mut next = spins.clone();
    let drift = stepper.advance(&mut next, dt, true);
    Ok((next, controls, drift))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    pub pair_scope: PairScope,
    /// Record every `trace_stride`-th step (the final state is always recorded).
    pub trace_stride: usize,
    pub snapshot_stride: Option<usize>,
    /// Tracks convergence at every step, independent of `trace_stride`.
    pub convergence: Option<ConvergenceCriterion>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { pair_scope: PairScope::Graph, trace_stride: 1, snapshot_stride: None, convergence: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalRun {
    pub kind: AlgorithmKind,
    pub trajectory: Trajectory,
    pub final_state: ClassicalSpinState,
    pub final_energy: f64,
    pub max_drift: f64,
    pub steps: usize,
    /// Largest step-to-step energy increase over every step taken.
    pub max_energy_increase: f64,
    pub converged: Option<ConvergencePoint>,
}

/// Integrates from `t = 0` to `T`, recording energy and control strengths.
pub fn run(
    kind: AlgorithmKind,
    hubo: &HuboPolynomial,
    init: &ClassicalSpinState,
    cfg: &IntegratorConfig,
    opts: &RunOptions,
) -> Result<ClassicalRun> {
    cfg.validate()?;
    if hubo.n_vars() != init.len() {
        return Err(Error::DimensionMismatch { expected: hubo.n_vars(), got: init.len() });
    }
    let stride = opts.trace_stride.max(1);
    let mut stepper = Stepper::new(kind, hubo, opts.pair_scope);
    stepper.set_control_update(cfg.control_update);
    let extra = (kind == AlgorithmKind::CcFalqon).then_some("beta");
    let mut traj = Trajectory::new(init.len(), extra);
    let mut state = init.clone();
    let (whole, partial) = cfg.schedule();
    let total_steps = whole + partial.is_some() as usize;
    let mut max_drift = 0.0f64;
    let mut tracker = match opts.convergence {
        Some(c) => {
            if cfg.dt > c.dt_check * (1.0 + 1e-9) {
                return Err(Error::TraceTooCoarse { spacing: cfg.dt, check: c.dt_check });
            }
            Some(ConvergenceTracker::new(c.threshold, c.dt_check))
        }
        None => None,
    };
    let mut max_increase = f64::NEG_INFINITY;
    let mut last_energy: Option<f64> = None;
    let mut observe = |t: f64, e: f64| {
        if let Some(prev) = last_energy {
            max_increase = max_increase.max(e - prev);
        }
        last_energy = Some(e);
        if let Some(tr) = tracker.as_mut() {
            tr.observe(t, e);
        }
    };

    let record = |traj: &mut Trajectory, stepper: &Stepper<'_>, t: f64| {
        let c = stepper.controls();
        traj.push(t, stepper.energy(), control_strengths(c), c.shared_beta_x());
    };

    for step in 0..total_steps {
        let t = step as f64 * cfg.dt;
        observe(t, stepper.prepare(&state, t));
        if step % stride == 0 {
            record(&mut traj, &stepper, t);
        }
        if let Some(s) = opts.snapshot_stride {
            if step % s.max(1) == 0 {
                traj.snapshots.push(SpinSnapshot { time: t, spins: state.spins().to_vec() });
            }
        }
        let dt = if step < whole { cfg.dt } else { partial.unwrap_or(cfg.dt) };
        let drift = stepper.advance(&mut state, dt, cfg.renormalize);
        max_drift = max_drift.max(drift);
        if drift > cfg.drift_tolerance && cfg.abort_on_drift {
            return Err(Error::StepFailure { t, drift, tolerance: cfg.drift_tolerance });
        }
    }
    let t_end = if total_steps == 0 { 0.0 } else { cfg.t_total };
    let final_energy = stepper.prepare(&state, t_end);
    observe(t_end, final_energy);
    if traj.final_time().is_none_or(|t| t < t_end) {
        record(&mut traj, &stepper, t_end);
    }
    if opts.snapshot_stride.is_some()
        && traj.snapshots.last().is_none_or(|s| s.time < t_end)
    {
        traj.snapshots.push(SpinSnapshot { time: t_end, spins: state.spins().to_vec() });
    }
    Ok(ClassicalRun {
        kind,
        trajectory: traj,
        final_state: state,
        final_energy,
        max_drift,
        steps: total_steps,
        max_energy_increase: max_increase,
        converged: tracker.and_then(|t| t.converged_point()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classical::{descent_rate, init_fixed, init_random};
    use crate::problem::{cnf_to_hubo, generate_random_ksat, CnfFormula, HuboTerm};

    fn small(n: usize, k: usize, m: usize, seed: u64) -> HuboPolynomial {
        cnf_to_hubo(&generate_random_ksat(n, k, m, seed).unwrap())
    }

    #[test]
    fn eom_examples() {
        let d = eom_rhs(&[[1.0, 0.0, 0.0]], &[[0.0, 0.0, 1.0]]).unwrap();
        assert_eq!(d, vec![[0.0, -2.0, 0.0]]);
        let d = eom_rhs(&[[0.0, 0.6, 0.8]], &[[0.0, 1.2, 1.6]]).unwrap();
        assert!(d[0].iter().all(|x| x.abs() < 1e-15));
        assert!(eom_rhs(&[[1.0, 0.0, 0.0]], &[]).is_err());
    }

    #[test]
    fn empty_formula_is_static() {
        let hubo = cnf_to_hubo(&CnfFormula::new(3, 2, vec![]).unwrap());
        let init = init_random(3, 1, false).unwrap();
        for kind in AlgorithmKind::ALL {
            let (next, _, drift) = rk4_step(&init, &hubo, kind, 1e-2, PairScope::Full).unwrap();
            assert!(drift < 1e-15);
            for (a, b) in next.spins().iter().zip(init.spins()) {
                for c in 0..3 {
                    assert!((a[c] - b[c]).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn first_step_tilts_towards_y() {
        let hubo = small(5, 2, 6, 3);
        let init = init_fixed(5).unwrap();
        let grad = hubo.gradient_z(&init.mz()).unwrap();
        let dt = 1e-4;
        let (next, _, _) = rk4_step(&init, &hubo, AlgorithmKind::CcFalqon, dt, PairScope::Graph).unwrap();
        for (m, g) in next.spins().iter().zip(&grad) {
            assert!((m[1] - 2.0 * g * dt).abs() < 1e-6 * dt.max(g.abs() * dt), "{} vs {}", m[1], g);
            if g.abs() > 1e-12 {
                assert!(m[1] != 0.0);
            }
        }
    }

    #[test]
    fn zero_time_run_has_one_sample() {
        let hubo = small(6, 2, 7, 2);
        let init = init_random(6, 4, false).unwrap();
        let r = run(AlgorithmKind::Cacao, &hubo, &init, &IntegratorConfig::new(1e-3, 0.0), &RunOptions::default())
            .unwrap();
        assert_eq!(r.trajectory.len(), 1);
        assert_eq!(r.trajectory.times[0], 0.0);
        assert_eq!(r.final_energy, hubo.energy(&init.mz()).unwrap());
        assert_eq!(r.steps, 0);
    }

    #[test]
    fn partial_final_step_lands_on_t() {
        let hubo = small(4, 2, 5, 9);
        let init = init_fixed(4).unwrap();
        let cfg = IntegratorConfig::new(0.1, 0.25);
        let opts = RunOptions { trace_stride: 1, ..Default::default() };
        let r = run(AlgorithmKind::CcIfalqon, &hubo, &init, &cfg, &opts).unwrap();
        assert_eq!(r.steps, 3);
        assert_eq!(r.trajectory.final_time(), Some(0.25));
        assert_eq!(r.trajectory.len(), 4);
    }

    #[test]
    fn rk4_is_fourth_order() {
        let hubo = HuboPolynomial::from_terms(
            2,
            [
                HuboTerm { coefficient: 0.7, variables: vec![0, 1] },
                HuboTerm { coefficient: -0.4, variables: vec![0] },
                HuboTerm { coefficient: 0.3, variables: vec![1] },
            ],
        )
        .unwrap();
        let init = ClassicalSpinState::new(vec![[0.6, 0.0, 0.8], [0.0, 0.8, -0.6]]).unwrap();
        let end = |dt: f64| {
            let mut cfg = IntegratorConfig::new(dt, 0.4);
            cfg.control_update = ControlUpdate::PerStage;
            run(AlgorithmKind::CcIfalqon, &hubo, &init, &cfg, &RunOptions::default())
                .unwrap()
                .final_state
        };
        let reference = end(1e-5);
        let err = |s: &ClassicalSpinState| {
            s.spins()
                .iter()
                .zip(reference.spins())
                .flat_map(|(a, b)| (0..3).map(move |c| (a[c] - b[c]).abs()))
                .fold(0.0, f64::max)
        };
        let coarse = err(&end(4e-2));
        let fine = err(&end(2e-2));
        let ratio = coarse / fine;
        assert!(ratio > 11.0 && ratio < 22.0, "ratio {ratio}, {coarse:e} {fine:e}");
    }

    #[test]
    fn runs_are_deterministic() {
        let hubo = small(10, 3, 30, 5);
        let init = init_random(10, 8, false).unwrap();
        let cfg = IntegratorConfig::new(1e-3, 0.5);
        for kind in AlgorithmKind::ALL {
            let a = run(kind, &hubo, &init, &cfg, &RunOptions::default()).unwrap();
            let b = run(kind, &hubo, &init, &cfg, &RunOptions::default()).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn energy_never_increases() {
        let hubo = small(12, 2, 14, 21);
        for kind in AlgorithmKind::ALL {
            let init = if kind.requires_planar_init() {
                init_random(12, 1, true).unwrap()
            } else {
                init_fixed(12).unwrap()
            };
            let r = run(kind, &hubo, &init, &IntegratorConfig::new(1e-3, 4.0), &RunOptions::default()).unwrap();
            assert!(r.trajectory.max_energy_increase() <= 1e-8, "{kind}");
            assert!(r.max_drift <= 1e-6, "{kind}");
        }
    }

    #[test]
    fn measured_rate_matches_feedback_rate() {
        let hubo = small(4, 2, 5, 17);
        let init = init_random(4, 2, false).unwrap();
        let dt = 1e-4;
        for kind in AlgorithmKind::ALL {
            let mut stepper = Stepper::new(kind, &hubo, PairScope::Full);
            let mut state = init.clone();
            stepper.prepare(&state, 0.0);
            for _ in 0..50 {
                stepper.advance(&mut state, dt, true);
                stepper.prepare(&state, 0.0);
            }
            let rate = descent_rate(kind, stepper.controls()).unwrap();
            let e0 = stepper.energy();
            let mut fwd = state.clone();
            stepper.advance(&mut fwd, dt, true);
            let mut back = state.clone();
            stepper.advance(&mut back, -dt, true);
            let e = |s: &ClassicalSpinState| hubo.energy(&s.mz()).unwrap();
            let measured = (e(&fwd) - e(&back)) / (2.0 * dt);
            assert!(rate <= 0.0);
            assert!((measured - rate).abs() <= 1e-3 * rate.abs().max(1e-12), "{kind}: {measured} vs {rate} (E {e0})");
        }
    }

    #[test]
    fn invalid_configs_rejected() {
        assert!(IntegratorConfig::new(0.0, 1.0).validate().is_err());
        assert!(IntegratorConfig::new(1e-3, -1.0).validate().is_err());
        let hubo = small(4, 2, 5, 1);
        let init = init_fixed(3).unwrap();
        assert!(run(AlgorithmKind::Cacao, &hubo, &init, &IntegratorConfig::default(), &RunOptions::default()).is_err());
    }
}
