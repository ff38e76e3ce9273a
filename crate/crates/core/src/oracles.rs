//! Independent checks used by the test suite and `selftest`.
//!
//! The canonical chart writes each spin as
//! `m = (sqrt(1 - 4p²) cos q, sqrt(1 - 4p²) sin q, 2p)`, under which the spin
//! dynamics become Hamilton's equations `q' = ∂H/∂p`, `p' = -∂H/∂q`.

use std::sync::Arc;

use crate::classical::{
    compute_controls, AlgorithmKind, ClassicalSpinState, ControlSnapshot, IntegratorConfig,
    PairScope, PairSet,
};
use crate::error::{Error, Result};
use crate::problem::HuboPolynomial;

/// Closest approach to a pole the chart integrator accepts.
pub const POLE_BAND: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct ChartState {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
}

impl ChartState {
    pub fn new(q: Vec<f64>, p: Vec<f64>) -> Result<Self> {
        if q.len() != p.len() {
            return Err(Error::DimensionMismatch { expected: q.len(), got: p.len() });
        }
        let chart = Self { q, p };
        chart.check(0.0)?;
        Ok(chart)
    }

    /// Inverse chart; fails for spins at a pole.
    pub fn from_spins(spins: &ClassicalSpinState) -> Result<Self> {
        let q = spins.spins().iter().map(|m| m[1].atan2(m[0])).collect();
        let p = spins.spins().iter().map(|m| m[2] / 2.0).collect();
        let chart = Self { q, p };
        chart.check(POLE_BAND)?;
        Ok(chart)
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    fn check(&self, band: f64) -> Result<()> {
        for (site, &p) in self.p.iter().enumerate() {
            let u = 2.0 * p;
            if !(u.abs() <= 1.0 - band) {
                return Err(Error::ChartDomain { site, value: u });
            }
        }
        Ok(())
    }
}

#[inline]
fn chart_point(q: f64, p: f64) -> [f64; 3] {
    let r = (1.0 - 4.0 * p * p).max(0.0).sqrt();
    [r * q.cos(), r * q.sin(), 2.0 * p]
}

/// `∂m/∂q` and `∂m/∂p` of the chart map at one site.
#[inline]
fn chart_jacobian(q: f64, p: f64) -> ([f64; 3], [f64; 3]) {
    let r = (1.0 - 4.0 * p * p).sqrt();
    let dr = -4.0 * p / r;
    ([-r * q.sin(), r * q.cos(), 0.0], [dr * q.cos(), dr * q.sin(), 2.0])
}

pub fn spin_from_chart(chart: &ChartState) -> Result<ClassicalSpinState> {
    chart.check(0.0)?;
    ClassicalSpinState::new(chart.q.iter().zip(&chart.p).map(|(&q, &p)| chart_point(q, p)).collect())
}

#[derive(Debug, Clone)]
pub struct ChartTrajectory {
    pub times: Vec<f64>,
    pub charts: Vec<ChartState>,
    pub energies: Vec<f64>,
}

impl ChartTrajectory {
    pub fn spins(&self) -> Result<Vec<ClassicalSpinState>> {
        self.charts.iter().map(spin_from_chart).collect()
    }
}

/// `∂H_t/∂m` written out term by term from the time-dependent Hamiltonian
/// `H_t = [H_P] + Σ β^X m^X + Σ β^Y m^Y + Σ_(i,j) β_ij (m_i^Y m_j^Z + m_i^Z m_j^Y)`.
fn hamiltonian_gradient(
    kind: AlgorithmKind,
    hubo: &HuboPolynomial,
    m: &[[f64; 3]],
    c: &ControlSnapshot,
) -> Vec<[f64; 3]> {
    let n = m.len();
    let mut d = vec![[0.0; 3]; n];
    if kind.includes_problem() {
        let z: Vec<f64> = m.iter().map(|s| s[2]).collect();
        for (i, di) in d.iter_mut().enumerate() {
            di[2] += hubo.partial(i, &z);
        }
    }
    if let Some(bx) = &c.beta_x {
        for (di, b) in d.iter_mut().zip(bx) {
            di[0] += b;
        }
    }
    if let Some(by) = &c.beta_y {
        for (di, b) in d.iter_mut().zip(by) {
            di[1] += b;
        }
    }
    for ((i, j), b) in c.pair_entries() {
        d[i][1] += b * m[j][2];
        d[j][2] += b * m[i][1];
        d[i][2] += b * m[j][1];
        d[j][1] += b * m[i][2];
    }
    d
}

fn hamilton_rhs(
    kind: AlgorithmKind,
    hubo: &HuboPolynomial,
    chart: &ChartState,
    c: &ControlSnapshot,
) -> (Vec<f64>, Vec<f64>) {
    let m: Vec<[f64; 3]> = chart.q.iter().zip(&chart.p).map(|(&q, &p)| chart_point(q, p)).collect();
    let dh = hamiltonian_gradient(kind, hubo, &m, c);
    let mut qdot = vec![0.0; m.len()];
    let mut pdot = vec![0.0; m.len()];
    for i in 0..m.len() {
        let (jq, jp) = chart_jacobian(chart.q[i], chart.p[i]);
        let dh_dq: f64 = (0..3).map(|a| dh[i][a] * jq[a]).sum();
        let dh_dp: f64 = (0..3).map(|a| dh[i][a] * jp[a]).sum();
        qdot[i] = dh_dp;
        pdot[i] = -dh_dq;
    }
    (qdot, pdot)
}

fn shifted(chart: &ChartState, k: &(Vec<f64>, Vec<f64>), h: f64) -> ChartState {
    ChartState {
        q: chart.q.iter().zip(&k.0).map(|(q, d)| q + h * d).collect(),
        p: chart.p.iter().zip(&k.1).map(|(p, d)| p + h * d).collect(),
    }
}

/// RK4 in `(q, p)` with the feedback values computed from the mapped spin
/// state at the start of each step and held for the step.
pub fn hamilton_chart_integrate(
    hubo: &HuboPolynomial,
    kind: AlgorithmKind,
    chart0: &ChartState,
    cfg: &IntegratorConfig,
    scope: PairScope,
) -> Result<ChartTrajectory> {
    cfg.validate()?;
    let n = hubo.n_vars();
    if chart0.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: chart0.len() });
    }
    chart0.check(POLE_BAND)?;
    let pairs = kind.has_pairs().then(|| Arc::new(PairSet::new(hubo, scope)));

    let steps = (cfg.t_total / cfg.dt + 1e-9).floor() as usize;
    let mut out = ChartTrajectory { times: Vec::new(), charts: Vec::new(), energies: Vec::new() };
    let mut chart = chart0.clone();
    for step in 0..=steps {
        let spins = spin_from_chart(&chart)?;
        let z = spins.mz();
        let energy = hubo.energy_unchecked(&z);
        let t = step as f64 * cfg.dt;
        out.times.push(t);
        out.energies.push(energy);
        out.charts.push(chart.clone());
        if step == steps {
            break;
        }
        let grad = hubo.gradient_z(&z)?;
        let controls = compute_controls(kind, &spins, &grad, pairs.as_ref())?;
        let h = cfg.dt;
        let k1 = hamilton_rhs(kind, hubo, &chart, &controls);
        let s2 = shifted(&chart, &k1, h / 2.0);
        s2.check(POLE_BAND)?;
        let k2 = hamilton_rhs(kind, hubo, &s2, &controls);
        let s3 = shifted(&chart, &k2, h / 2.0);
        s3.check(POLE_BAND)?;
        let k3 = hamilton_rhs(kind, hubo, &s3, &controls);
        let s4 = shifted(&chart, &k3, h);
        s4.check(POLE_BAND)?;
        let k4 = hamilton_rhs(kind, hubo, &s4, &controls);
        for i in 0..n {
            chart.q[i] += h / 6.0 * (k1.0[i] + 2.0 * k2.0[i] + 2.0 * k3.0[i] + k4.0[i]);
            chart.p[i] += h / 6.0 * (k1.1[i] + 2.0 * k2.1[i] + 2.0 * k3.1[i] + k4.1[i]);
        }
        chart.check(POLE_BAND)?;
    }
    Ok(out)
}

/// `∂m_i/∂q_k` and `∂m_i/∂p_k`.
fn site_derivative(chart: &ChartState, i: usize, k: usize) -> ([f64; 3], [f64; 3]) {
    if i == k {
        chart_jacobian(chart.q[i], chart.p[i])
    } else {
        ([0.0; 3], [0.0; 3])
    }
}

/// `{m_i^a, m_j^b} = Σ_k ∂_q m_i^a ∂_p m_j^b - ∂_p m_i^a ∂_q m_j^b`.
fn bracket(chart: &ChartState, (i, a): (usize, usize), (j, b): (usize, usize)) -> f64 {
    (0..chart.len())
        .map(|k| {
            let (qi, pi) = site_derivative(chart, i, k);
            let (qj, pj) = site_derivative(chart, j, k);
            qi[a] * pj[b] - pi[a] * qj[b]
        })
        .sum()
}

/// Largest violation of `{m^X, m^Y} = 2m^Z` (and cyclic) over all sites of
/// all samples, together with brackets between neighbouring sites, which
/// must vanish.
pub fn poisson_bracket_residuals(samples: &[ChartState]) -> f64 {
    let mut worst = 0.0f64;
    for chart in samples {
        for i in 0..chart.len() {
            let m = chart_point(chart.q[i], chart.p[i]);
            for (a, b, c) in [(0, 1, 2), (1, 2, 0), (2, 0, 1)] {
                worst = worst.max((bracket(chart, (i, a), (i, b)) - 2.0 * m[c]).abs());
            }
            if i + 1 < chart.len() {
                for a in 0..3 {
                    for b in 0..3 {
                        worst = worst.max(bracket(chart, (i, a), (i + 1, b)).abs());
                    }
                }
            }
        }
    }
    worst
}

/// Central differences `(E(z + εe_i) - E(z - εe_i)) / 2ε`.
pub fn finite_diff_gradient(hubo: &HuboPolynomial, z: &[f64], eps: f64) -> Result<Vec<f64>> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("epsilon must be positive, got {eps}")));
    }
    if z.len() != hubo.n_vars() {
        return Err(Error::DimensionMismatch { expected: hubo.n_vars(), got: z.len() });
    }
    let mut x = z.to_vec();
    Ok((0..z.len())
        .map(|i| {
            x[i] = z[i] + eps;
            let up = hubo.energy_unchecked(&x);
            x[i] = z[i] - eps;
            let down = hubo.energy_unchecked(&x);
            x[i] = z[i];
            (up - down) / (2.0 * eps)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classical::{init_fixed, run, RunOptions};
    use crate::problem::{cnf_to_hubo, generate_random_ksat, HuboTerm};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn chart_points() {
        let s = spin_from_chart(&ChartState::new(vec![0.0, 0.0], vec![0.0, 0.5]).unwrap()).unwrap();
        assert_eq!(s.spins(), &[[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]]);
        assert!(ChartState::new(vec![0.0], vec![0.6]).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let q = (0..200).map(|_| rng.gen_range(-4.0..4.0)).collect();
        let p = (0..200).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let s = spin_from_chart(&ChartState::new(q, p).unwrap()).unwrap();
        assert!(s.max_norm_deviation() < 1e-14);
    }

    #[test]
    fn brackets_at_origin() {
        let c = ChartState::new(vec![0.0, 1.0], vec![0.0, -0.2]).unwrap();
        assert!(poisson_bracket_residuals(&[c]) < 1e-15);
    }

    #[test]
    fn finite_differences_exact_on_linear() {
        let hubo = HuboPolynomial::from_terms(
            3,
            [
                HuboTerm { coefficient: 0.3, variables: vec![0] },
                HuboTerm { coefficient: -1.1, variables: vec![2] },
            ],
        )
        .unwrap();
        let z = [0.2, -0.4, 0.9];
        let fd = finite_diff_gradient(&hubo, &z, 1e-3).unwrap();
        let g = hubo.gradient_z(&z).unwrap();
        for (a, b) in fd.iter().zip(&g) {
            assert!((a - b).abs() < 1e-12);
        }
        let zero = HuboPolynomial::from_terms(2, [HuboTerm { coefficient: 2.0, variables: vec![] }]).unwrap();
        assert_eq!(finite_diff_gradient(&zero, &[0.1, 0.2], 1e-5).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn chart_constant_without_gradient() {
        let hubo = HuboPolynomial::from_terms(2, std::iter::empty()).unwrap();
        let c0 = ChartState::new(vec![0.3, -1.0], vec![0.1, 0.0]).unwrap();
        let tr = hamilton_chart_integrate(&hubo, AlgorithmKind::Cacao, &c0, &IntegratorConfig::new(1e-2, 1.0), PairScope::Graph).unwrap();
        assert_eq!(tr.charts.last().unwrap(), &c0);
    }

    #[test]
    fn chart_tracks_spin_integration() {
        let f = generate_random_ksat(3, 2, 3, 5).unwrap();
        let hubo = cnf_to_hubo(&f);
        let init = init_fixed(3).unwrap();
        let cfg = IntegratorConfig::new(1e-3, 1.0);
        for kind in AlgorithmKind::ALL {
            let spin = run(kind, &hubo, &init, &cfg, &RunOptions { snapshot_stride: Some(1), ..Default::default() }).unwrap();
            let chart = hamilton_chart_integrate(&hubo, kind, &ChartState::from_spins(&init).unwrap(), &cfg, PairScope::Graph).unwrap();
            let mapped = chart.spins().unwrap();
            assert_eq!(mapped.len(), spin.trajectory.snapshots.len());
            let mut dev = 0.0f64;
            for (a, b) in mapped.iter().zip(&spin.trajectory.snapshots) {
                for (x, y) in a.spins().iter().zip(&b.spins) {
                    for c in 0..3 {
                        dev = dev.max((x[c] - y[c]).abs());
                    }
                }
            }
            assert!(dev < 1e-8, "{kind}: {dev:e}");
        }
    }
}
