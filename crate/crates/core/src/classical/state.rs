use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Accepted deviation of `|m_i|` from one when constructing a state.
pub const UNIT_NORM_TOLERANCE: f64 = 1e-9;

/// `N` classical unit spins `(m^X, m^Y, m^Z)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassicalSpinState {
    spins: Vec<[f64; 3]>,
}

impl ClassicalSpinState {
    pub fn new(spins: Vec<[f64; 3]>) -> Result<Self> {
        if spins.is_empty() {
            return Err(Error::InvalidArgument("spin state needs at least one spin".into()));
        }
        for (i, m) in spins.iter().enumerate() {
            let dev = (norm(m) - 1.0).abs();
            if !(dev <= UNIT_NORM_TOLERANCE) {
                return Err(Error::InvalidArgument(format!(
                    "spin {i} has norm deviation {dev:e}"
                )));
            }
        }
        Ok(Self { spins })
    }

    /// Spins in the X–Z plane with the given `m^Z` and `m^X >= 0`.
    pub fn from_z(z: &[f64]) -> Self {
        let spins = z
            .iter()
            .map(|&mz| {
                let mz = mz.clamp(-1.0, 1.0);
                [(1.0 - mz * mz).sqrt(), 0.0, mz]
            })
            .collect();
        Self { spins }
    }

    #[cfg(test)]
    pub(crate) fn from_raw(spins: Vec<[f64; 3]>) -> Self {
        Self { spins }
    }

    pub fn len(&self) -> usize {
        self.spins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spins.is_empty()
    }

    pub fn spins(&self) -> &[[f64; 3]] {
        &self.spins
    }

    pub(crate) fn spins_mut(&mut self) -> &mut [[f64; 3]] {
        &mut self.spins
    }

    pub fn spin(&self, i: usize) -> [f64; 3] {
        self.spins[i]
    }

    pub fn mx(&self) -> Vec<f64> {
        self.spins.iter().map(|m| m[0]).collect()
    }

    pub fn my(&self) -> Vec<f64> {
        self.spins.iter().map(|m| m[1]).collect()
    }

    pub fn mz(&self) -> Vec<f64> {
        self.spins.iter().map(|m| m[2]).collect()
    }

    /// `max_i ||m_i| - 1|`.
    pub fn max_norm_deviation(&self) -> f64 {
        self.spins.iter().map(|m| (norm(m) - 1.0).abs()).fold(0.0, f64::max)
    }

    /// Rescales every spin to unit length and returns the largest deviation seen before.
    pub fn renormalize(&mut self) -> f64 {
        let mut drift = 0.0f64;
        for m in &mut self.spins {
            let r = norm(m);
            drift = drift.max((r - 1.0).abs());
            m.iter_mut().for_each(|c| *c /= r);
        }
        drift
    }
}

#[inline]
pub(crate) fn norm(m: &[f64; 3]) -> f64 {
    (m[0] * m[0] + m[1] * m[1] + m[2] * m[2]).sqrt()
}

/// All spins along +X, the ground state of the transverse field `-Σ m^X`.
pub fn init_fixed(n: usize) -> Result<ClassicalSpinState> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    Ok(ClassicalSpinState { spins: vec![[1.0, 0.0, 0.0]; n] })
}

/// Spins `(sinθ cosφ, sinθ sinφ, cosθ)` with `θ ~ U[0, π]`, `φ ~ U[0, 2π)`;
/// `planar` pins `φ = 0`.
pub fn init_random(n: usize, seed: u64, planar: bool) -> Result<ClassicalSpinState> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spins = (0..n)
        .map(|_| {
            let theta = rng.gen::<f64>() * PI;
            let phi = if planar { 0.0 } else { rng.gen::<f64>() * 2.0 * PI };
            let (st, ct) = theta.sin_cos();
            let (sp, cp) = phi.sin_cos();
            [st * cp, st * sp, ct]
        })
        .collect();
    Ok(ClassicalSpinState { spins })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_init_points_along_x() {
        let s = init_fixed(3).unwrap();
        assert_eq!(s.spins(), &[[1.0, 0.0, 0.0]; 3]);
        assert_eq!(s.max_norm_deviation(), 0.0);
        assert!(init_fixed(0).is_err());
    }

    #[test]
    fn random_init_is_unit_and_seeded() {
        let a = init_random(50, 9, false).unwrap();
        assert!(a.max_norm_deviation() < 1e-12);
        assert_eq!(a, init_random(50, 9, false).unwrap());
        assert_ne!(a, init_random(50, 10, false).unwrap());
        let p = init_random(50, 9, true).unwrap();
        assert!(p.my().iter().all(|&y| y == 0.0));
    }

    #[test]
    fn new_rejects_non_unit() {
        assert!(ClassicalSpinState::new(vec![[1.0, 1.0, 0.0]]).is_err());
        assert!(ClassicalSpinState::new(vec![]).is_err());
        assert!(ClassicalSpinState::new(vec![[0.0, 0.6, 0.8]]).is_ok());
    }

    #[test]
    fn renormalize_reports_drift() {
        let mut s = ClassicalSpinState::from_raw(vec![[2.0, 0.0, 0.0], [0.0, 0.5, 0.0]]);
        assert_eq!(s.renormalize(), 1.0);
        assert_eq!(s.spins(), &[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]);
    }
}
