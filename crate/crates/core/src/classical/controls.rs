//! Feedback laws and effective fields of the five classical algorithms.
//!
//! Each algorithm adds driving terms to the classical Hamiltonian whose
//! coefficients are chosen from the current state so that `dE_P/dt <= 0`:
//!
//! | kind             | driving terms                                   |
//! |------------------|-------------------------------------------------|
//! | `CcFalqon`       | `H_P + β^X Σ m_i^X`                             |
//! | `CcIfalqon`      | `H_P + Σ β_i^X m_i^X`                           |
//! | `Cacao`          | `Σ β_i^Y m_i^Y`                                 |
//! | `HotCacao`       | `Σ β_i^Y m_i^Y + Σ_{i≠j} β_ij (m_i^Y m_j^Z + m_i^Z m_j^Y)` |
//! | `HotCacaoPlus`   | all of the above together with `H_P`            |
//!
//! Controls are feedback values: when the effective field `-∂H_t/∂m_i` is
//! formed they are held fixed, not differentiated.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::classical::ClassicalSpinState;
use crate::error::{Error, Result};
use crate::problem::{HuboPolynomial, InteractionGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlgorithmKind {
    CcFalqon,
    CcIfalqon,
    Cacao,
    HotCacao,
    HotCacaoPlus,
}

impl AlgorithmKind {
    pub const ALL: [AlgorithmKind; 5] = [
        AlgorithmKind::CcFalqon,
        AlgorithmKind::CcIfalqon,
        AlgorithmKind::Cacao,
        AlgorithmKind::HotCacao,
        AlgorithmKind::HotCacaoPlus,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AlgorithmKind::CcFalqon => "cc-falqon",
            AlgorithmKind::CcIfalqon => "cc-ifalqon",
            AlgorithmKind::Cacao => "cacao",
            AlgorithmKind::HotCacao => "hot-cacao",
            AlgorithmKind::HotCacaoPlus => "hot-cacao-plus",
        }
    }

    /// Whether the Hamiltonian carries the problem term `H_P` (so stage
    /// derivatives need a fresh gradient).
    pub fn includes_problem(self) -> bool {
        matches!(self, AlgorithmKind::CcFalqon | AlgorithmKind::CcIfalqon | AlgorithmKind::HotCacaoPlus)
    }

    pub fn has_x(self) -> bool {
        matches!(self, AlgorithmKind::CcFalqon | AlgorithmKind::CcIfalqon | AlgorithmKind::HotCacaoPlus)
    }

    pub fn has_y(self) -> bool {
        matches!(self, AlgorithmKind::Cacao | AlgorithmKind::HotCacao | AlgorithmKind::HotCacaoPlus)
    }

    pub fn has_pairs(self) -> bool {
        matches!(self, AlgorithmKind::HotCacao | AlgorithmKind::HotCacaoPlus)
    }

    /// CACAO and HOT-CACAO start from `φ = 0` when initialised randomly.
    pub fn requires_planar_init(self) -> bool {
        matches!(self, AlgorithmKind::Cacao | AlgorithmKind::HotCacao)
    }
}

impl fmt::Display for AlgorithmKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AlgorithmKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AlgorithmKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown classical algorithm `{s}`")))
    }
}

/// Which ordered pairs carry second-order controls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairScope {
    /// Pairs `(i, j)` where `{i, j}` is an edge of the interaction graph.
    #[default]
    Graph,
    /// All ordered pairs `i != j`.
    Full,
}

impl fmt::Display for PairScope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PairScope::Graph => "graph",
            PairScope::Full => "full",
        })
    }
}

impl FromStr for PairScope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "graph" => Ok(PairScope::Graph),
            "full" => Ok(PairScope::Full),
            _ => Err(Error::InvalidArgument(format!("unknown pair scope `{s}`"))),
        }
    }
}

/// Ordered pairs in CSR layout. Entry `e` is `(i, partner(e))` for `e` in
/// `row(i)`; `reverse(e)` is the index of `(partner(e), i)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairSet {
    scope: PairScope,
    offsets: Vec<usize>,
    partners: Vec<usize>,
    reverse: Vec<usize>,
}

impl PairSet {
    pub fn new(hubo: &HuboPolynomial, scope: PairScope) -> Self {
        match scope {
            PairScope::Graph => Self::from_graph(&hubo.interaction_graph(), scope),
            PairScope::Full => Self::from_graph(&InteractionGraph::complete(hubo.n_vars()), scope),
        }
    }

    pub fn from_graph(graph: &InteractionGraph, scope: PairScope) -> Self {
        let offsets = graph.offsets().to_vec();
        let partners = graph.flat_neighbors().to_vec();
        let mut reverse = vec![0usize; partners.len()];
        for i in 0..graph.num_vertices() {
            for e in offsets[i]..offsets[i + 1] {
                let j = partners[e];
                let row = &partners[offsets[j]..offsets[j + 1]];
                let pos = row.binary_search(&i).expect("interaction graph must be symmetric");
                reverse[e] = offsets[j] + pos;
            }
        }
        Self { scope, offsets, partners, reverse }
    }

    pub fn scope(&self) -> PairScope {
        self.scope
    }

    pub fn num_sites(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Number of ordered pairs.
    pub fn len(&self) -> usize {
        self.partners.len()
    }

    pub fn is_empty(&self) -> bool {
        self.partners.is_empty()
    }

    pub fn row(&self, i: usize) -> Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }

    /// Partners of site `i` in storage order.
    pub fn partners_of(&self, i: usize) -> &[usize] {
        &self.partners[self.row(i)]
    }

    pub fn partner(&self, e: usize) -> usize {
        self.partners[e]
    }

    pub fn reverse(&self, e: usize) -> usize {
        self.reverse[e]
    }

    pub fn index_of(&self, i: usize, j: usize) -> Option<usize> {
        let r = self.row(i);
        self.partners[r.clone()].binary_search(&j).ok().map(|p| r.start + p)
    }

    /// Ordered pairs `(i, j)` in storage order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.num_sites()).flat_map(move |i| self.row(i).map(move |e| (i, self.partners[e])))
    }
}

/// Feedback parameters at one instant. Populated families depend on the
/// algorithm; CC-FALQON's single `β^X` is stored replicated on every site.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSnapshot {
    pub time: f64,
    pub beta_x: Option<Vec<f64>>,
    pub beta_y: Option<Vec<f64>>,
    /// Values aligned with `pairs`.
    pub beta_pair: Option<Vec<f64>>,
    pub pairs: Option<Arc<PairSet>>,
    shared_x: bool,
}

impl ControlSnapshot {
    pub fn empty(time: f64) -> Self {
        Self { time, beta_x: None, beta_y: None, beta_pair: None, pairs: None, shared_x: false }
    }

    /// The single CC-FALQON parameter, if this snapshot carries one.
    pub fn shared_beta_x(&self) -> Option<f64> {
        if self.shared_x {
            self.beta_x.as_ref().and_then(|b| b.first().copied())
        } else {
            None
        }
    }

    pub fn beta_ij(&self, i: usize, j: usize) -> Option<f64> {
        let pairs = self.pairs.as_ref()?;
        let e = pairs.index_of(i, j)?;
        self.beta_pair.as_ref().map(|b| b[e])
    }

    /// `((i, j), β_ij)` over the populated ordered pairs.
    pub fn pair_entries(&self) -> Vec<((usize, usize), f64)> {
        match (&self.pairs, &self.beta_pair) {
            (Some(p), Some(b)) => p.pairs().zip(b.iter().copied()).collect(),
            _ => Vec::new(),
        }
    }

    /// Checks that the populated families are exactly those of `kind`.
    pub fn check(&self, kind: AlgorithmKind, n: usize) -> Result<()> {
        let bad = |msg: &str| Err(Error::InconsistentControls(format!("{kind}: {msg}")));
        if kind.has_x() != self.beta_x.is_some() {
            return bad("beta_x presence");
        }
        if kind.has_y() != self.beta_y.is_some() {
            return bad("beta_y presence");
        }
        if kind.has_pairs() != self.beta_pair.is_some() {
            return bad("beta_pair presence");
        }
        if (kind == AlgorithmKind::CcFalqon) != self.shared_x {
            return bad("shared beta_x flag");
        }
        for v in [&self.beta_x, &self.beta_y].into_iter().flatten() {
            if v.len() != n {
                return bad("per-site control length");
            }
        }
        if let Some(b) = &self.beta_pair {
            match &self.pairs {
                Some(p) if p.len() == b.len() && p.num_sites() == n => {}
                _ => return bad("pair controls not aligned with pair set"),
            }
        }
        Ok(())
    }
}

/// L1 control strengths `(‖β^X‖, ‖β^Y‖, ‖β‖)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlNorms {
    pub beta_x: f64,
    pub beta_y: f64,
    pub beta_pair: f64,
}

/// Feedback law evaluated at `spins` given `grad = ∂H_P/∂m^Z`.
pub fn compute_controls(
    kind: AlgorithmKind,
    spins: &ClassicalSpinState,
    grad: &[f64],
    pairs: Option<&Arc<PairSet>>,
) -> Result<ControlSnapshot> {
    let n = spins.len();
    if grad.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: grad.len() });
    }
    let mut snap = ControlSnapshot::empty(0.0);
    if kind.has_pairs() {
        let p = pairs.ok_or_else(|| {
            Error::InvalidArgument(format!("{kind} requires a pair scope"))
        })?;
        if p.num_sites() != n {
            return Err(Error::DimensionMismatch { expected: n, got: p.num_sites() });
        }
        snap.pairs = Some(Arc::clone(p));
    }
    fill_controls(kind, spins.spins(), grad, &mut snap);
    Ok(snap)
}

/// Writes the feedback values into `snap`, reusing its buffers. `snap.pairs`
/// must already be set for the HOT variants.
pub(crate) fn fill_controls(
    kind: AlgorithmKind,
    m: &[[f64; 3]],
    grad: &[f64],
    snap: &mut ControlSnapshot,
) {
    let n = m.len();
    snap.shared_x = kind == AlgorithmKind::CcFalqon;
    match kind {
        AlgorithmKind::CcFalqon => {
            let beta = -2.0 * m.iter().zip(grad).map(|(s, g)| s[1] * g).sum::<f64>();
            let bx = snap.beta_x.get_or_insert_with(Vec::new);
            bx.clear();
            bx.resize(n, beta);
        }
        AlgorithmKind::CcIfalqon | AlgorithmKind::HotCacaoPlus => {
            let bx = snap.beta_x.get_or_insert_with(Vec::new);
            bx.clear();
            bx.extend(m.iter().zip(grad).map(|(s, g)| -2.0 * s[1] * g));
        }
        _ => snap.beta_x = None,
    }
    if kind.has_y() {
        let by = snap.beta_y.get_or_insert_with(Vec::new);
        by.clear();
        by.extend(m.iter().zip(grad).map(|(s, g)| 2.0 * s[0] * g));
    } else {
        snap.beta_y = None;
    }
    if kind.has_pairs() {
        let pairs = snap.pairs.clone().expect("pair set attached for HOT variants");
        let bp = snap.beta_pair.get_or_insert_with(Vec::new);
        bp.clear();
        bp.reserve(pairs.len());
        for i in 0..n {
            let a = 2.0 * m[i][0] * grad[i];
            bp.extend(pairs.partners_of(i).iter().map(|&j| a * m[j][2]));
        }
    } else {
        snap.beta_pair = None;
        snap.pairs = None;
    }
}

/// `β_ij + β_ji` per stored pair: the coefficient of the symmetric operator
/// `m_i^Y m_j^Z + m_i^Z m_j^Y`.
pub(crate) fn symmetric_pair_weights(pairs: &PairSet, beta_pair: &[f64], out: &mut Vec<f64>) {
    out.clear();
    out.extend((0..pairs.len()).map(|e| beta_pair[e] + beta_pair[pairs.reverse(e)]));
}

/// Effective fields `h_i = -∂H_t/∂m_i` with controls frozen.
pub fn effective_field(
    kind: AlgorithmKind,
    spins: &ClassicalSpinState,
    controls: &ControlSnapshot,
    grad: &[f64],
) -> Result<Vec<[f64; 3]>> {
    let n = spins.len();
    if grad.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: grad.len() });
    }
    controls.check(kind, n)?;
    let mut sym = Vec::new();
    if let (Some(p), Some(b)) = (&controls.pairs, &controls.beta_pair) {
        symmetric_pair_weights(p, b, &mut sym);
    }
    let frozen = FrozenControls {
        beta_x: controls.beta_x.as_deref(),
        beta_y: controls.beta_y.as_deref(),
        pairs: controls.pairs.as_deref(),
        sym_weights: &sym,
    };
    let mut out = vec![[0.0; 3]; n];
    field_into(kind, spins.spins(), grad, &frozen, &mut out);
    Ok(out)
}

pub(crate) struct FrozenControls<'a> {
    pub beta_x: Option<&'a [f64]>,
    pub beta_y: Option<&'a [f64]>,
    pub pairs: Option<&'a PairSet>,
    pub sym_weights: &'a [f64],
}

/// Effective field at state `m`. `grad` is only read when `kind` includes `H_P`.
pub(crate) fn field_into(
    kind: AlgorithmKind,
    m: &[[f64; 3]],
    grad: &[f64],
    c: &FrozenControls<'_>,
    out: &mut [[f64; 3]],
) {
    let with_problem = kind.includes_problem();
    for (i, h) in out.iter_mut().enumerate() {
        h[0] = c.beta_x.map_or(0.0, |b| -b[i]);
        h[1] = c.beta_y.map_or(0.0, |b| -b[i]);
        h[2] = if with_problem { -grad[i] } else { 0.0 };
    }
    if let Some(pairs) = c.pairs {
        for (i, h) in out.iter_mut().enumerate() {
            let mut sy = 0.0;
            let mut sz = 0.0;
            for (&j, &w) in pairs.partners_of(i).iter().zip(&c.sym_weights[pairs.row(i)]) {
                let mj = &m[j];
                sy += w * mj[2];
                sz += w * mj[1];
            }
            h[1] -= sy;
            h[2] -= sz;
        }
    }
}

pub fn control_strengths(snapshot: &ControlSnapshot) -> ControlNorms {
    let l1 = |v: &Option<Vec<f64>>| v.as_ref().map_or(0.0, |b| b.iter().map(|x| x.abs()).sum());
    ControlNorms {
        beta_x: l1(&snapshot.beta_x),
        beta_y: l1(&snapshot.beta_y),
        beta_pair: l1(&snapshot.beta_pair),
    }
}

/// Instantaneous `dE_P/dt` implied by the feedback law; never positive.
pub fn descent_rate(kind: AlgorithmKind, snapshot: &ControlSnapshot) -> Result<f64> {
    let sq = |v: &Option<Vec<f64>>| v.as_ref().map_or(0.0, |b| b.iter().map(|x| x * x).sum::<f64>());
    let mut rate = 0.0;
    if kind == AlgorithmKind::CcFalqon {
        let b = snapshot.shared_beta_x().ok_or_else(|| {
            Error::InconsistentControls("cc-falqon snapshot without shared beta_x".into())
        })?;
        rate -= b * b;
    } else if kind.has_x() {
        rate -= sq(&snapshot.beta_x);
    }
    if kind.has_y() {
        rate -= sq(&snapshot.beta_y);
    }
    if kind.has_pairs() {
        let (p, b) = match (&snapshot.pairs, &snapshot.beta_pair) {
            (Some(p), Some(b)) => (p, b),
            _ => return Err(Error::InconsistentControls(format!("{kind} snapshot without pairs"))),
        };
        // each unordered pair appears twice in storage
        let s: f64 = (0..p.len()).map(|e| (b[e] + b[p.reverse(e)]).powi(2)).sum();
        rate -= 0.5 * s;
    }
    Ok(rate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classical::{init_fixed, init_random};
    use crate::problem::{cnf_to_hubo, generate_random_ksat, HuboTerm};

    fn pair_set(hubo: &HuboPolynomial, scope: PairScope) -> Arc<PairSet> {
        Arc::new(PairSet::new(hubo, scope))
    }

    #[test]
    fn fixed_init_controls() {
        let s = init_fixed(3).unwrap();
        let g = [0.5, -1.0, 0.25];
        let c = compute_controls(AlgorithmKind::CcFalqon, &s, &g, None).unwrap();
        assert_eq!(c.shared_beta_x(), Some(0.0));
        let c = compute_controls(AlgorithmKind::Cacao, &s, &g, None).unwrap();
        assert_eq!(c.beta_y.unwrap(), vec![1.0, -2.0, 0.5]);
    }

    #[test]
    fn zero_gradient_means_zero_controls() {
        let hubo = cnf_to_hubo(&generate_random_ksat(4, 2, 5, 1).unwrap());
        let pairs = pair_set(&hubo, PairScope::Full);
        let s = init_random(4, 3, false).unwrap();
        for kind in AlgorithmKind::ALL {
            let c = compute_controls(kind, &s, &[0.0; 4], Some(&pairs)).unwrap();
            assert_eq!(control_strengths(&c), ControlNorms::default());
            assert_eq!(descent_rate(kind, &c).unwrap(), 0.0);
        }
    }

    #[test]
    fn hot_variants_need_pairs() {
        let s = init_fixed(2).unwrap();
        assert!(compute_controls(AlgorithmKind::HotCacao, &s, &[1.0, 1.0], None).is_err());
        assert!(compute_controls(AlgorithmKind::HotCacaoPlus, &s, &[1.0, 1.0], None).is_err());
    }

    #[test]
    fn two_spin_controls_by_hand() {
        let m = vec![[0.6, 0.0, 0.8], [0.0, 0.6, -0.8]];
        let s = ClassicalSpinState::new(m).unwrap();
        let g = [0.3, -0.7];
        let pairs = Arc::new(PairSet::from_graph(&InteractionGraph::complete(2), PairScope::Full));

        let c = compute_controls(AlgorithmKind::CcFalqon, &s, &g, None).unwrap();
        assert!((c.shared_beta_x().unwrap() - (-2.0 * (0.0 * 0.3 + 0.6 * -0.7))).abs() < 1e-15);

        let c = compute_controls(AlgorithmKind::CcIfalqon, &s, &g, None).unwrap();
        assert_eq!(c.beta_x.unwrap(), vec![-0.0, -2.0 * 0.6 * -0.7]);

        let c = compute_controls(AlgorithmKind::HotCacaoPlus, &s, &g, Some(&pairs)).unwrap();
        assert_eq!(c.beta_y.clone().unwrap(), vec![2.0 * 0.6 * 0.3, 0.0]);
        assert!((c.beta_ij(0, 1).unwrap() - 2.0 * 0.6 * -0.8 * 0.3).abs() < 1e-15);
        assert_eq!(c.beta_ij(1, 0).unwrap(), 0.0);
    }

    #[test]
    fn linear_hamiltonian_counterpart_formula() {
        let h = [0.4, -0.9, 0.3];
        let hubo = HuboPolynomial::from_terms(
            3,
            h.iter().enumerate().map(|(i, &c)| HuboTerm { coefficient: c, variables: vec![i] }),
        )
        .unwrap();
        let s = init_random(3, 5, false).unwrap();
        let grad = hubo.gradient_z(&s.mz()).unwrap();
        let c = compute_controls(AlgorithmKind::CcFalqon, &s, &grad, None).unwrap();
        let closed: f64 = -2.0 * h.iter().zip(s.my()).map(|(h, y)| h * y).sum::<f64>();
        assert!((c.shared_beta_x().unwrap() - closed).abs() < 1e-14);
    }

    #[test]
    fn field_shapes() {
        let hubo = cnf_to_hubo(&generate_random_ksat(5, 3, 8, 2).unwrap());
        let pairs = pair_set(&hubo, PairScope::Graph);
        let s = init_random(5, 1, false).unwrap();
        let g = hubo.gradient_z(&s.mz()).unwrap();
        let c = compute_controls(AlgorithmKind::Cacao, &s, &g, None).unwrap();
        for h in effective_field(AlgorithmKind::Cacao, &s, &c, &g).unwrap() {
            assert_eq!((h[0], h[2]), (0.0, 0.0));
        }
        let planar = init_random(5, 1, true).unwrap();
        let g = hubo.gradient_z(&planar.mz()).unwrap();
        let c = compute_controls(AlgorithmKind::HotCacao, &planar, &g, Some(&pairs)).unwrap();
        for h in effective_field(AlgorithmKind::HotCacao, &planar, &c, &g).unwrap() {
            assert_eq!(h[2], 0.0);
        }
        // mismatched snapshot
        assert!(effective_field(AlgorithmKind::HotCacao, &planar, &ControlSnapshot::empty(0.0), &g).is_err());
    }

    #[test]
    fn strengths_and_rates() {
        let mut c = ControlSnapshot::empty(0.0);
        assert_eq!(control_strengths(&c), ControlNorms::default());
        c.beta_y = Some(vec![1.0, -2.0]);
        assert_eq!(control_strengths(&c).beta_y, 3.0);
        assert_eq!(descent_rate(AlgorithmKind::Cacao, &c).unwrap(), -5.0);

        let mut c = ControlSnapshot::empty(0.0);
        c.beta_x = Some(vec![3.0, 4.0]);
        assert_eq!(descent_rate(AlgorithmKind::CcIfalqon, &c).unwrap(), -25.0);
        assert!(descent_rate(AlgorithmKind::CcFalqon, &c).is_err());
    }

    #[test]
    fn pair_set_reverse_indices() {
        let hubo = cnf_to_hubo(&generate_random_ksat(8, 3, 10, 4).unwrap());
        for scope in [PairScope::Graph, PairScope::Full] {
            let p = PairSet::new(&hubo, scope);
            for (e, (i, j)) in p.pairs().enumerate() {
                let r = p.reverse(e);
                assert_eq!(p.partner(r), i);
                assert_eq!(p.index_of(j, i), Some(r));
                assert_eq!(p.reverse(r), e);
            }
        }
        assert_eq!(PairSet::new(&hubo, PairScope::Full).len(), 8 * 7);
    }

    #[test]
    fn names_round_trip() {
        for k in AlgorithmKind::ALL {
            assert_eq!(k.name().parse::<AlgorithmKind>().unwrap(), k);
        }
        assert!("falqon".parse::<AlgorithmKind>().is_err());
        assert_eq!("full".parse::<PairScope>().unwrap(), PairScope::Full);
    }
}
