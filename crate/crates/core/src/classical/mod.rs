//! Classical spin-dynamics solvers.
//!
//! Unit spins evolve under `dm_i/dt = 2 m_i × h_i`, `h_i = -∂H_t/∂m_i`,
//! where the time-dependent Hamiltonian `H_t` carries feedback controls
//! chosen from the current state so the problem energy never increases.

mod controls;
mod convergence;
mod integrate;
mod state;

pub use controls::{
    compute_controls, control_strengths, descent_rate, effective_field, AlgorithmKind,
    ControlNorms, ControlSnapshot, PairScope, PairSet,
};
pub use convergence::{
    detect_convergence, ConvergenceCriterion, ConvergencePoint, ConvergenceTracker,
};
pub use integrate::{
    eom_rhs, rk4_step, run, ClassicalRun, ControlUpdate, IntegratorConfig, RunOptions, Stepper,
};
pub use state::{init_fixed, init_random, ClassicalSpinState, UNIT_NORM_TOLERANCE};
