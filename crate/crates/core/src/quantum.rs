//! Dense statevector reference engine for FALQON and iFALQON.
//!
//! Basis index `b` encodes qubit `i` in bit `i`; a clear bit is `z = +1`.
//! The problem Hamiltonian is diagonal and the driver is `Σ β_i X_i`, so
//! propagation alternates exact diagonal phases with exact single-qubit
//! X rotations inside a fourth-order composition.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::classical::{ConvergenceCriterion, ConvergencePoint, ConvergenceTracker, ControlNorms};
use crate::error::{Error, Result};
use crate::problem::{HuboPolynomial, SpinAssignment};
use crate::trajectory::Trajectory;

pub const DEFAULT_QUBIT_CAP: usize = 16;
pub const MAX_QUBIT_CAP: usize = 20;

/// Largest norm drift accepted for an input state.
pub const NORM_REPAIR_TOLERANCE: f64 = 1e-9;
/// Norm drift treated as a propagation failure.
pub const NORM_FAILURE_TOLERANCE: f64 = 1e-6;

fn check_cap(n: usize, cap: usize) -> Result<()> {
    let cap = cap.min(MAX_QUBIT_CAP);
    if n > cap {
        return Err(Error::QuantumCapExceeded { n, cap });
    }
    Ok(())
}

/// Splits `v` into the halves of every block of `2 * stride`, i.e. the
/// entries with bit `log2(stride)` clear and set.
#[inline]
fn halves(v: &[f64], stride: usize) -> impl Iterator<Item = (&[f64], &[f64])> {
    v.chunks_exact(2 * stride).map(move |b| b.split_at(stride))
}

#[inline]
fn halves_mut(v: &mut [f64], stride: usize) -> impl Iterator<Item = (&mut [f64], &mut [f64])> {
    v.chunks_exact_mut(2 * stride).map(move |b| b.split_at_mut(stride))
}

/// Amplitudes stored as separate real and imaginary parts.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n: usize,
    re: Vec<f64>,
    im: Vec<f64>,
}

impl StateVector {
    pub fn new(n: usize, amps: Vec<Complex64>) -> Result<Self> {
        check_cap(n, MAX_QUBIT_CAP)?;
        if amps.len() != 1 << n {
            return Err(Error::DimensionMismatch { expected: 1 << n, got: amps.len() });
        }
        let state = Self {
            n,
            re: amps.iter().map(|a| a.re).collect(),
            im: amps.iter().map(|a| a.im).collect(),
        };
        let dev = (state.norm() - 1.0).abs();
        if dev > NORM_REPAIR_TOLERANCE {
            return Err(Error::InvalidArgument(format!("state norm off by {dev:e}")));
        }
        Ok(state)
    }

    /// Computational basis state; bit `i` of `bits` set means qubit `i` has `z = -1`.
    pub fn basis(n: usize, bits: usize) -> Result<Self> {
        check_cap(n, MAX_QUBIT_CAP)?;
        if bits >> n != 0 {
            return Err(Error::InvalidArgument(format!("basis index {bits} needs more than {n} qubits")));
        }
        let mut re = vec![0.0; 1 << n];
        re[bits] = 1.0;
        Ok(Self { n, re, im: vec![0.0; 1 << n] })
    }

    /// Normalizes arbitrary amplitudes.
    pub fn from_unnormalized(n: usize, amps: Vec<Complex64>) -> Result<Self> {
        if amps.len() != 1 << n {
            return Err(Error::DimensionMismatch { expected: 1 << n, got: amps.len() });
        }
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::InvalidArgument("zero or non-finite state".into()));
        }
        Self::new(n, amps.into_iter().map(|a| a / norm).collect())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn amplitude(&self, b: usize) -> Complex64 {
        Complex64::new(self.re[b], self.im[b])
    }

    pub fn amplitudes(&self) -> Vec<Complex64> {
        self.re.iter().zip(&self.im).map(|(&r, &i)| Complex64::new(r, i)).collect()
    }

    pub fn norm(&self) -> f64 {
        self.re.iter().zip(&self.im).map(|(r, i)| r * r + i * i).sum::<f64>().sqrt()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.re.iter().zip(&self.im).map(|(r, i)| r * r + i * i).collect()
    }

    /// `|| self - other ||_2`.
    pub fn distance(&self, other: &StateVector) -> f64 {
        let dr: f64 = self.re.iter().zip(&other.re).map(|(a, b)| (a - b) * (a - b)).sum();
        let di: f64 = self.im.iter().zip(&other.im).map(|(a, b)| (a - b) * (a - b)).sum();
        (dr + di).sqrt()
    }

    fn renormalize(&mut self) {
        let inv = 1.0 / self.norm();
        self.re.iter_mut().chain(self.im.iter_mut()).for_each(|a| *a *= inv);
    }
}

pub fn init_uniform_superposition(n: usize) -> Result<StateVector> {
    check_cap(n, MAX_QUBIT_CAP)?;
    let amp = 0.5f64.powf(n as f64 / 2.0);
    Ok(StateVector { n, re: vec![amp; 1 << n], im: vec![0.0; 1 << n] })
}

/// `H_P` evaluated on every computational basis state.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalProblem {
    n: usize,
    energies: Vec<f64>,
}

impl DiagonalProblem {
    pub fn from_energies(n: usize, energies: Vec<f64>) -> Result<Self> {
        check_cap(n, MAX_QUBIT_CAP)?;
        if energies.len() != 1 << n {
            return Err(Error::DimensionMismatch { expected: 1 << n, got: energies.len() });
        }
        Ok(Self { n, energies })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn min(&self) -> f64 {
        self.energies.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.energies.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest energy change from flipping qubit `i`.
    fn flip_spread(&self, i: usize) -> f64 {
        halves(&self.energies, 1 << i)
            .flat_map(|(e0, e1)| e0.iter().zip(e1).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max)
    }
}

pub fn diagonal_problem_operator(hubo: &HuboPolynomial, cap: usize) -> Result<DiagonalProblem> {
    let n = hubo.n_vars();
    check_cap(n, cap)?;
    let mut z = vec![1.0; n];
    let energies = (0..1usize << n)
        .map(|b| {
            for (i, zi) in z.iter_mut().enumerate() {
                *zi = if b >> i & 1 == 1 { -1.0 } else { 1.0 };
            }
            hubo.energy_unchecked(&z)
        })
        .collect();
    Ok(DiagonalProblem { n, energies })
}

fn check_dims(state: &StateVector, diag: &DiagonalProblem) -> Result<()> {
    if state.n != diag.n {
        return Err(Error::DimensionMismatch { expected: diag.n, got: state.n });
    }
    Ok(())
}

pub fn expectation_energy(state: &StateVector, diag: &DiagonalProblem) -> Result<f64> {
    check_dims(state, diag)?;
    Ok(energy_kernel(&state.re, &state.im, &diag.energies))
}

fn energy_kernel(re: &[f64], im: &[f64], e: &[f64]) -> f64 {
    let mut acc = 0.0;
    for ((r, i), e) in re.iter().zip(im).zip(e) {
        acc += (r * r + i * i) * e;
    }
    acc
}

fn check_site(state: &StateVector, i: usize) -> Result<()> {
    if i >= state.n {
        return Err(Error::InvalidArgument(format!("qubit {i} out of range for n = {}", state.n)));
    }
    Ok(())
}

pub fn expectation_z(state: &StateVector, i: usize) -> Result<f64> {
    check_site(state, i)?;
    let stride = 1 << i;
    let mut acc = 0.0;
    for ((r0, r1), (i0, i1)) in halves(&state.re, stride).zip(halves(&state.im, stride)) {
        for k in 0..stride {
            acc += r0[k] * r0[k] + i0[k] * i0[k] - r1[k] * r1[k] - i1[k] * i1[k];
        }
    }
    Ok(acc)
}

/// `<Z_i>` for every qubit.
pub fn expectations_z(state: &StateVector) -> Vec<f64> {
    (0..state.n).map(|i| expectation_z(state, i).expect("site in range")).collect()
}

/// `Σ_{b: bit i clear} conj(ψ_b) ψ_{b ^ 2^i}`; its real and imaginary parts
/// are half of `<X_i>` and `<Y_i>`.
fn flip_overlap(state: &StateVector, i: usize) -> Complex64 {
    let stride = 1 << i;
    let (mut ar, mut ai) = (0.0, 0.0);
    for ((r0, r1), (i0, i1)) in halves(&state.re, stride).zip(halves(&state.im, stride)) {
        for k in 0..stride {
            ar += r0[k] * r1[k] + i0[k] * i1[k];
            ai += r0[k] * i1[k] - i0[k] * r1[k];
        }
    }
    Complex64::new(ar, ai)
}

pub fn expectation_x(state: &StateVector, i: usize) -> Result<f64> {
    check_site(state, i)?;
    Ok(2.0 * flip_overlap(state, i).re)
}

pub fn expectation_y(state: &StateVector, i: usize) -> Result<f64> {
    check_site(state, i)?;
    Ok(2.0 * flip_overlap(state, i).im)
}

/// `(<X_i>, <Y_i>, <Z_i>)`.
pub fn bloch_vector(state: &StateVector, i: usize) -> Result<[f64; 3]> {
    check_site(state, i)?;
    let o = flip_overlap(state, i);
    Ok([2.0 * o.re, 2.0 * o.im, expectation_z(state, i)?])
}

/// `i<[H_P, Σ_i X_i]>`, evaluated as `-2 Im <ψ| H_P (Σ_i X_i) |ψ>`.
pub fn measure_beta_falqon(state: &StateVector, diag: &DiagonalProblem) -> Result<f64> {
    check_dims(state, diag)?;
    let len = state.re.len();
    let mut sr = vec![0.0; len];
    let mut si = vec![0.0; len];
    for i in 0..state.n {
        let stride = 1 << i;
        let src = halves(&state.re, stride).zip(halves(&state.im, stride));
        let dst = halves_mut(&mut sr, stride).zip(halves_mut(&mut si, stride));
        for (((r0, r1), (i0, i1)), ((sr0, sr1), (si0, si1))) in src.zip(dst) {
            for k in 0..stride {
                sr0[k] += r1[k];
                si0[k] += i1[k];
                sr1[k] += r0[k];
                si1[k] += i0[k];
            }
        }
    }
    let mut acc = 0.0;
    for b in 0..len {
        acc += diag.energies[b] * (state.re[b] * si[b] - state.im[b] * sr[b]);
    }
    Ok(-2.0 * acc)
}

/// `i<[H_P, X_i]>`.
pub fn measure_beta_ifalqon(state: &StateVector, diag: &DiagonalProblem, i: usize) -> Result<f64> {
    check_dims(state, diag)?;
    check_site(state, i)?;
    Ok(site_beta(state, diag, i))
}

fn site_beta(state: &StateVector, diag: &DiagonalProblem, i: usize) -> f64 {
    // Pairing b with b ^ 2^i, the commutator reduces to
    // (E_0 - E_1) Im(conj(ψ_0) ψ_1) per pair.
    let stride = 1 << i;
    let mut acc = 0.0;
    let amps = halves(&state.re, stride).zip(halves(&state.im, stride));
    for (((r0, r1), (i0, i1)), (e0, e1)) in amps.zip(halves(&diag.energies, stride)) {
        for k in 0..stride {
            acc += (e0[k] - e1[k]) * (r0[k] * i1[k] - i0[k] * r1[k]);
        }
    }
    -2.0 * acc
}

/// Per-site feedback values for every qubit.
pub fn measure_betas(state: &StateVector, diag: &DiagonalProblem) -> Result<Vec<f64>> {
    check_dims(state, diag)?;
    Ok((0..state.n).map(|i| site_beta(state, diag, i)).collect())
}

/// Driver amplitudes frozen over one interval.
#[derive(Debug, Clone, PartialEq)]
pub enum DriveField {
    Shared(f64),
    PerSite(Vec<f64>),
}

impl DriveField {
    fn site_values(&self, n: usize) -> Result<Vec<f64>> {
        match self {
            DriveField::Shared(b) => Ok(vec![*b; n]),
            DriveField::PerSite(v) if v.len() == n => Ok(v.clone()),
            DriveField::PerSite(v) => Err(Error::DimensionMismatch { expected: n, got: v.len() }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PropagationMethod {
    /// Fourth-order composition of exact diagonal and X-rotation factors.
    #[default]
    Splitting,
    /// Truncated Taylor series of the full generator, sub-stepped.
    Taylor,
    /// One unchecked second-order step (calibration only).
    SingleStrang,
    /// One unchecked fourth-order step (calibration only).
    SingleForestRuth,
}

impl std::str::FromStr for PropagationMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "splitting" => Ok(Self::Splitting),
            "taylor" => Ok(Self::Taylor),
            _ => Err(Error::InvalidArgument(format!("unknown propagation method `{s}`"))),
        }
    }
}

const CBRT2: f64 = 1.259_921_049_894_873_2;
const FR_OUTER: f64 = 1.0 / (2.0 - CBRT2);
const FR_INNER: f64 = -CBRT2 / (2.0 - CBRT2);
/// Local error constants of the two compositions, calibrated against the
/// Taylor propagator with a safety margin of about three; see tests.
const SPLITTING_ERROR_CONSTANT: f64 = 0.005;
const STRANG_ERROR_CONSTANT: f64 = 0.05;

#[derive(Debug, Clone, Default)]
struct PhaseTable {
    key: usize,
    outer_re: Vec<f64>,
    outer_im: Vec<f64>,
    inner_re: Vec<f64>,
    inner_im: Vec<f64>,
}

/// Reusable `exp(-i H dt)` for one diagonal and one interval length.
#[derive(Debug, Clone)]
pub struct Propagator<'a> {
    diag: &'a DiagonalProblem,
    dt: f64,
    tol: f64,
    method: PropagationMethod,
    flip_spread: Vec<f64>,
    spread: f64,
    shift: f64,
    phases: PhaseTable,
}

impl<'a> Propagator<'a> {
    pub fn new(diag: &'a DiagonalProblem, dt: f64, tol: f64, method: PropagationMethod) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
        }
        if !(tol > 0.0) {
            return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
        }
        let (lo, hi) = (diag.min(), diag.max());
        Ok(Self {
            diag,
            dt,
            tol,
            method,
            flip_spread: (0..diag.n).map(|i| diag.flip_spread(i)).collect(),
            spread: (hi - lo) / 2.0,
            shift: (hi + lo) / 2.0,
            phases: PhaseTable::default(),
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Cheapest composition meeting the tolerance: `(fourth_order, substeps)`.
    pub fn splitting_plan(&self, beta: &[f64]) -> (bool, usize) {
        // Every error term of either composition is a nested commutator holding
        // at least one [H_P, X_i]; bound them by the local scales below.
        let drive: f64 = beta.iter().map(|b| b.abs()).sum();
        let coupling: f64 = beta.iter().zip(&self.flip_spread).map(|(b, s)| b.abs() * s).sum();
        if coupling == 0.0 {
            return (false, 1);
        }
        let scale = self.spread.max(drive);
        let h = self.dt;
        let second = STRANG_ERROR_CONSTANT * coupling * scale * h.powi(3) / self.tol;
        let fourth = SPLITTING_ERROR_CONSTANT * coupling * scale.powi(3) * h.powi(5) / self.tol;
        let s2 = (second.sqrt().ceil() as usize).max(1);
        let s4 = (fourth.powf(0.25).ceil() as usize).max(1);
        // one X sweep per second-order substep, three per fourth-order one
        if s2 <= 3 * s4 {
            (false, s2)
        } else {
            (true, s4)
        }
    }

    fn ensure_phases(&mut self, fourth: bool, substeps: usize) {
        let key = if fourth { substeps } else { usize::MAX - substeps };
        if self.phases.key == key {
            return;
        }
        let h = self.dt / substeps as f64;
        let (outer, inner) = if fourth {
            (0.5 * FR_OUTER * h, 0.5 * (FR_OUTER + FR_INNER) * h)
        } else {
            (0.5 * h, 0.0)
        };
        let e = &self.diag.energies;
        self.phases = PhaseTable {
            key,
            outer_re: e.iter().map(|e| (e * outer).cos()).collect(),
            outer_im: e.iter().map(|e| -(e * outer).sin()).collect(),
            inner_re: e.iter().map(|e| (e * inner).cos()).collect(),
            inner_im: e.iter().map(|e| -(e * inner).sin()).collect(),
        };
    }

    /// Applies `exp(-i (H_P + Σ β_i X_i) dt)` in place and renormalizes.
    /// Returns the norm deviation found before renormalization.
    pub fn apply(&mut self, state: &mut StateVector, drive: &DriveField) -> Result<f64> {
        check_dims(state, self.diag)?;
        let beta = drive.site_values(state.n)?;
        match self.method {
            PropagationMethod::Splitting => self.apply_splitting(state, &beta, None),
            PropagationMethod::Taylor => self.apply_taylor(state, &beta),
            PropagationMethod::SingleStrang => self.apply_splitting(state, &beta, Some(false)),
            PropagationMethod::SingleForestRuth => self.apply_splitting(state, &beta, Some(true)),
        }
        let dev = (state.norm() - 1.0).abs();
        if !(dev <= NORM_FAILURE_TOLERANCE) {
            return Err(Error::PropagationFailure(dev));
        }
        if dev > 0.0 {
            state.renormalize();
        }
        Ok(dev)
    }

    fn apply_splitting(&mut self, state: &mut StateVector, beta: &[f64], forced: Option<bool>) {
        let (fourth, substeps) = match forced {
            Some(fourth) => (fourth, 1),
            None => self.splitting_plan(beta),
        };
        self.ensure_phases(fourth, substeps);
        let h = self.dt / substeps as f64;
        let p = &self.phases;
        let (re, im) = (&mut state.re, &mut state.im);
        let mut scale = 1.0;
        for _ in 0..substeps {
            multiply(re, im, &p.outer_re, &p.outer_im);
            if fourth {
                scale *= rotate_all(re, im, beta, FR_OUTER * h);
                multiply(re, im, &p.inner_re, &p.inner_im);
                scale *= rotate_all(re, im, beta, FR_INNER * h);
                multiply(re, im, &p.inner_re, &p.inner_im);
                scale *= rotate_all(re, im, beta, FR_OUTER * h);
            } else {
                scale *= rotate_all(re, im, beta, h);
            }
            multiply(re, im, &p.outer_re, &p.outer_im);
        }
        if scale != 1.0 {
            re.iter_mut().chain(im.iter_mut()).for_each(|a| *a *= scale);
        }
    }

    fn apply_taylor(&mut self, state: &mut StateVector, beta: &[f64]) {
        let norm_bound = self.spread + beta.iter().map(|b| b.abs()).sum::<f64>();
        let substeps = ((norm_bound * self.dt / 0.5).ceil() as usize).max(1);
        let h = self.dt / substeps as f64;
        let shifted: Vec<f64> = self.diag.energies.iter().map(|e| e - self.shift).collect();
        let term_tol = self.tol * 1e-3 / substeps as f64;
        let len = state.re.len();
        let (mut tr, mut ti) = (vec![0.0; len], vec![0.0; len]);
        let (mut nr, mut ni) = (vec![0.0; len], vec![0.0; len]);
        for _ in 0..substeps {
            tr.copy_from_slice(&state.re);
            ti.copy_from_slice(&state.im);
            for k in 1..=60 {
                apply_generator(&tr, &ti, &shifted, beta, &mut nr, &mut ni);
                // term <- (-i h / k) H term
                let c = h / k as f64;
                let mut size = 0.0;
                for b in 0..len {
                    tr[b] = c * ni[b];
                    ti[b] = -c * nr[b];
                    state.re[b] += tr[b];
                    state.im[b] += ti[b];
                    size += tr[b] * tr[b] + ti[b] * ti[b];
                }
                if size.sqrt() < term_tol {
                    break;
                }
            }
        }
        let (s, c) = (-self.shift * self.dt).sin_cos();
        for (r, i) in state.re.iter_mut().zip(state.im.iter_mut()) {
            let (a, b) = (*r, *i);
            *r = c * a - s * b;
            *i = c * b + s * a;
        }
    }
}

/// `out = diag(e) x + Σ_i β_i X_i x`.
fn apply_generator(xr: &[f64], xi: &[f64], e: &[f64], beta: &[f64], or: &mut [f64], oi: &mut [f64]) {
    for b in 0..xr.len() {
        or[b] = e[b] * xr[b];
        oi[b] = e[b] * xi[b];
    }
    for (i, &w) in beta.iter().enumerate() {
        let stride = 1 << i;
        let src = halves(xr, stride).zip(halves(xi, stride));
        let dst = halves_mut(or, stride).zip(halves_mut(oi, stride));
        for (((r0, r1), (i0, i1)), ((o0, o1), (p0, p1))) in src.zip(dst) {
            for k in 0..stride {
                o0[k] += w * r1[k];
                p0[k] += w * i1[k];
                o1[k] += w * r0[k];
                p1[k] += w * i0[k];
            }
        }
    }
}

fn multiply(re: &mut [f64], im: &mut [f64], pr: &[f64], pi: &[f64]) {
    let len = re.len();
    let (im, pr, pi) = (&mut im[..len], &pr[..len], &pi[..len]);
    for b in 0..len {
        let (a, c) = (re[b], im[b]);
        re[b] = a * pr[b] - c * pi[b];
        im[b] = a * pi[b] + c * pr[b];
    }
}

/// `Π_i exp(-i θ β_i X_i)` up to the scalar factor `Π_i cos(θ β_i)`, which is
/// returned instead of applied. The factors commute.
fn rotate_all(re: &mut [f64], im: &mut [f64], beta: &[f64], theta: f64) -> f64 {
    let mut scale = 1.0;
    for (i, &b) in beta.iter().enumerate() {
        if b == 0.0 {
            continue;
        }
        let (s, c) = (b * theta).sin_cos();
        if c.abs() > 0.5 {
            rotate_x_unscaled(re, im, i, s / c);
            scale *= c;
        } else {
            rotate_x(re, im, i, s, c);
        }
    }
    scale
}

/// `I - i t X_i`.
fn rotate_x_unscaled(re: &mut [f64], im: &mut [f64], i: usize, t: f64) {
    let stride = 1 << i;
    match stride {
        1 => {
            for (r, m) in re.chunks_exact_mut(2).zip(im.chunks_exact_mut(2)) {
                let (a0, b0, a1, b1) = (r[0], m[0], r[1], m[1]);
                r[0] = a0 + t * b1;
                m[0] = b0 - t * a1;
                r[1] = a1 + t * b0;
                m[1] = b1 - t * a0;
            }
        }
        2 => {
            for (r, m) in re.chunks_exact_mut(4).zip(im.chunks_exact_mut(4)) {
                for k in 0..2 {
                    let (a0, b0, a1, b1) = (r[k], m[k], r[k + 2], m[k + 2]);
                    r[k] = a0 + t * b1;
                    m[k] = b0 - t * a1;
                    r[k + 2] = a1 + t * b0;
                    m[k + 2] = b1 - t * a0;
                }
            }
        }
        _ => {
            for ((r0, r1), (i0, i1)) in halves_mut(re, stride).zip(halves_mut(im, stride)) {
                let (r1, i0, i1) = (&mut r1[..stride], &mut i0[..stride], &mut i1[..stride]);
                for k in 0..stride {
                    let (a0, b0, a1, b1) = (r0[k], i0[k], r1[k], i1[k]);
                    r0[k] = a0 + t * b1;
                    i0[k] = b0 - t * a1;
                    r1[k] = a1 + t * b0;
                    i1[k] = b1 - t * a0;
                }
            }
        }
    }
}

/// `exp(-i θ X_i)` given `sin θ`, `cos θ`.
fn rotate_x(re: &mut [f64], im: &mut [f64], i: usize, s: f64, c: f64) {
    let stride = 1 << i;
    for ((r0, r1), (i0, i1)) in halves_mut(re, stride).zip(halves_mut(im, stride)) {
        let (r1, i0, i1) = (&mut r1[..stride], &mut i0[..stride], &mut i1[..stride]);
        for k in 0..stride {
            // (c, -i s; -i s, c)
            let (a0, b0, a1, b1) = (r0[k], i0[k], r1[k], i1[k]);
            r0[k] = c * a0 + s * b1;
            i0[k] = c * b0 - s * a1;
            r1[k] = c * a1 + s * b0;
            i1[k] = c * b1 - s * a0;
        }
    }
}

/// One-shot propagation; prefer [`Propagator`] inside loops.
pub fn propagate(
    state: &StateVector,
    drive: &DriveField,
    diag: &DiagonalProblem,
    dt: f64,
    tol: f64,
) -> Result<StateVector> {
    let dev = (state.norm() - 1.0).abs();
    if dev > NORM_REPAIR_TOLERANCE {
        return Err(Error::InvalidArgument(format!("input state norm off by {dev:e}")));
    }
    let mut out = state.clone();
    Propagator::new(diag, dt, tol, PropagationMethod::default())?.apply(&mut out, drive)?;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuantumAlgorithm {
    Falqon,
    Ifalqon,
}

impl QuantumAlgorithm {
    pub const ALL: [QuantumAlgorithm; 2] = [QuantumAlgorithm::Falqon, QuantumAlgorithm::Ifalqon];

    pub fn name(self) -> &'static str {
        match self {
            QuantumAlgorithm::Falqon => "falqon",
            QuantumAlgorithm::Ifalqon => "ifalqon",
        }
    }

    fn extra_column(self) -> &'static str {
        match self {
            QuantumAlgorithm::Falqon => "beta",
            QuantumAlgorithm::Ifalqon => "beta_l1",
        }
    }
}

impl std::fmt::Display for QuantumAlgorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for QuantumAlgorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "falqon" => Ok(QuantumAlgorithm::Falqon),
            "ifalqon" => Ok(QuantumAlgorithm::Ifalqon),
            _ => Err(Error::InvalidArgument(format!("unknown quantum algorithm `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuantumRunConfig {
    pub dt: f64,
    pub t_total: f64,
    pub propagation_tolerance: f64,
    pub qubit_cap: usize,
    pub method: PropagationMethod,
    /// Re-prepare and replay the whole control schedule before every
    /// measurement, as hardware would. Quadratic in the step count.
    pub emulate_restart: bool,
    /// Record `<Z_i>` every this many steps (0 keeps only the endpoints).
    pub z_stride: usize,
    /// Measure both the shared and the per-site feedback at every step and
    /// track how far their sum identity drifts.
    pub audit_beta_sum: bool,
    /// Record every this many steps in the trajectory (the final sample is always kept).
    pub trace_stride: usize,
    /// Tracks convergence at every step, independent of `trace_stride`.
    pub convergence: Option<ConvergenceCriterion>,
}

impl Default for QuantumRunConfig {
    fn default() -> Self {
        Self {
            dt: 1e-2,
            t_total: 64.0,
            propagation_tolerance: 1e-9,
            qubit_cap: DEFAULT_QUBIT_CAP,
            method: PropagationMethod::Splitting,
            emulate_restart: false,
            z_stride: 1,
            audit_beta_sum: false,
            trace_stride: 1,
            convergence: None,
        }
    }
}

impl QuantumRunConfig {
    pub fn new(dt: f64, t_total: f64) -> Self {
        Self { dt, t_total, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_total >= 0.0) || !self.t_total.is_finite() {
            return Err(Error::InvalidArgument(format!("T must be >= 0, got {}", self.t_total)));
        }
        if !(self.propagation_tolerance > 0.0) {
            return Err(Error::InvalidArgument("propagation tolerance must be positive".into()));
        }
        if let Some(c) = &self.convergence {
            if self.dt > c.dt_check * (1.0 + 1e-9) {
                return Err(Error::TraceTooCoarse { spacing: self.dt, check: c.dt_check });
            }
        }
        if self.qubit_cap > MAX_QUBIT_CAP {
            return Err(Error::InvalidArgument(format!(
                "qubit cap {} above hard limit {MAX_QUBIT_CAP}",
                self.qubit_cap
            )));
        }
        Ok(())
    }

    /// Whole intervals of length `dt` plus an optional shorter final one.
    fn schedule(&self) -> (usize, Option<f64>) {
        let ratio = self.t_total / self.dt;
        let whole = (ratio + 1e-9).floor();
        let rest = self.t_total - whole * self.dt;
        let last = (rest > 1e-9 * self.dt.max(1.0)).then_some(rest);
        (whole as usize, last)
    }
}

#[derive(Debug, Clone)]
pub struct QuantumRun {
    pub algorithm: QuantumAlgorithm,
    pub trajectory: Trajectory,
    /// `(t, <Z_i>)` samples.
    pub z_trace: Vec<(f64, Vec<f64>)>,
    pub final_state: StateVector,
    pub final_energy: f64,
    pub solution: SpinAssignment,
    pub steps: usize,
    /// Largest pre-repair norm deviation over the run.
    pub max_norm_deviation: f64,
    /// Largest `|Σ_i β_i - β|` seen; only tracked with `audit_beta_sum`.
    pub max_beta_sum_residual: f64,
    /// Largest step-to-step energy increase over every step taken.
    pub max_energy_increase: f64,
    pub converged: Option<ConvergencePoint>,
}

/// Feedback loop: measure β on the current state, hold it for one interval,
/// repeat. The final sample is recorded at `T` with the controls measured there.
pub fn run_feedback(
    algorithm: QuantumAlgorithm,
    hubo: &HuboPolynomial,
    cfg: &QuantumRunConfig,
) -> Result<QuantumRun> {
    cfg.validate()?;
    let diag = diagonal_problem_operator(hubo, cfg.qubit_cap)?;
    run_feedback_on(algorithm, &diag, cfg)
}

pub fn run_feedback_on(
    algorithm: QuantumAlgorithm,
    diag: &DiagonalProblem,
    cfg: &QuantumRunConfig,
) -> Result<QuantumRun> {
    cfg.validate()?;
    check_cap(diag.n, cfg.qubit_cap)?;
    let n = diag.n;
    let (whole, last) = cfg.schedule();
    let total_steps = whole + usize::from(last.is_some());

    let initial = init_uniform_superposition(n)?;
    let mut state = initial.clone();
    let mut prop = Propagator::new(diag, cfg.dt, cfg.propagation_tolerance, cfg.method)?;
    let mut tail = match last {
        Some(h) => Some(Propagator::new(diag, h, cfg.propagation_tolerance, cfg.method)?),
        None => None,
    };
    let mut trajectory = Trajectory::new(n, Some(algorithm.extra_column()));
    let mut z_trace = Vec::new();
    let mut schedule: Vec<DriveField> = Vec::new();
    let mut max_dev = 0.0f64;
    let mut max_residual = 0.0f64;
    let mut tracker = cfg.convergence.map(|c| ConvergenceTracker::new(c.threshold, c.dt_check));
    let mut max_increase = f64::NEG_INFINITY;
    let mut last_energy: Option<f64> = None;
    let stride = cfg.trace_stride.max(1);

    let mut t = 0.0;
    for step in 0..=total_steps {
        if cfg.emulate_restart && step > 0 {
            state = initial.clone();
            for (k, drive) in schedule.iter().enumerate() {
                let p = if k == whole { tail.as_mut().unwrap() } else { &mut prop };
                max_dev = max_dev.max(p.apply(&mut state, drive)?);
            }
        }
        let energy = expectation_energy(&state, diag)?;
        let (drive, norms, extra) = match algorithm {
            QuantumAlgorithm::Falqon => {
                let site = measure_betas(&state, diag)?;
                let shared = site.iter().sum::<f64>();
                if cfg.audit_beta_sum {
                    let direct = measure_beta_falqon(&state, diag)?;
                    max_residual = max_residual.max((direct - shared).abs());
                }
                let norms = ControlNorms { beta_x: n as f64 * shared.abs(), ..Default::default() };
                (DriveField::Shared(shared), norms, shared)
            }
            QuantumAlgorithm::Ifalqon => {
                let site = measure_betas(&state, diag)?;
                if cfg.audit_beta_sum {
                    let shared = measure_beta_falqon(&state, diag)?;
                    max_residual = max_residual.max((site.iter().sum::<f64>() - shared).abs());
                }
                let l1: f64 = site.iter().map(|b| b.abs()).sum();
                (DriveField::PerSite(site), ControlNorms { beta_x: l1, ..Default::default() }, l1)
            }
        };
        if let Some(prev) = last_energy {
            max_increase = max_increase.max(energy - prev);
        }
        last_energy = Some(energy);
        if let Some(tr) = tracker.as_mut() {
            tr.observe(t, energy);
        }
        if step % stride == 0 || step == total_steps {
            trajectory.push(t, energy, norms, Some(extra));
        }
        let record_z = step == total_steps || step == 0 || (cfg.z_stride > 0 && step % cfg.z_stride == 0);
        if record_z {
            z_trace.push((t, expectations_z(&state)));
        }
        if step == total_steps {
            break;
        }
        let p = if step == whole { tail.as_mut().unwrap() } else { &mut prop };
        if !cfg.emulate_restart {
            max_dev = max_dev.max(p.apply(&mut state, &drive)?);
        }
        t = if step + 1 == total_steps { cfg.t_total } else { (step + 1) as f64 * cfg.dt };
        schedule.push(drive);
    }
    let final_z = z_trace.last().map(|(_, z)| z.clone()).unwrap_or_default();
    let solution = SpinAssignment::from_signs(&final_z);
    let final_energy = trajectory.final_energy().unwrap_or(0.0);
    Ok(QuantumRun {
        algorithm,
        trajectory,
        z_trace,
        final_state: state,
        final_energy,
        solution,
        steps: total_steps,
        max_norm_deviation: max_dev,
        max_beta_sum_residual: max_residual,
        max_energy_increase: max_increase,
        converged: tracker.and_then(|t| t.converged_point()),
    })
}
