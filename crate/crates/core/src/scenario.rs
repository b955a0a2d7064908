//! Scenario maps, exact Born-rule statistics for both probing schemes, and
//! seeded finite-shot sampling.
//!
//! Interventionist data are indexed by the conditioning tuple `(s, t, u, l)`
//! and the outcome pair `(k, m)`; passive data by `(s, u)` and `(k, m)`.
//! Every conditioning tuple receives the same number of shots.

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution as _};
use serde::{Deserialize, Serialize};

use crate::causal_map::{make_cc_map, make_dc_map, mix_maps, CausalMap, MAP_TOL};
use crate::error::{Error, Result};
use crate::linalg::{kron, kron_all, partial_trace, permute, CMatrix, Layout, Sys, C64};
use crate::qubit::{
    bell_state, jamiolkowski, pauli_projector, Bell, ChannelOperator, DensityOperator, Outcome,
    PauliIndex,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Interventionist,
    Passive,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Self::Interventionist => "interventionist",
            Self::Passive => "passive",
        }
    }

    /// Number of conditioning tuples: 54 for (s,t,u,l), 9 for (s,u).
    pub fn tuple_count(self) -> usize {
        match self {
            Self::Interventionist => 54,
            Self::Passive => 9,
        }
    }

    pub fn cell_count(self) -> usize {
        4 * self.tuple_count()
    }

    pub fn tuples(self) -> Vec<Tuple> {
        (0..self.tuple_count())
            .map(|i| Tuple::from_index(self, i))
            .collect()
    }

    pub(crate) fn expect(self, expected: Scheme) -> Result<()> {
        if self != expected {
            return Err(Error::WrongScheme {
                expected: expected.name(),
                found: self.name(),
            });
        }
        Ok(())
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "interventionist" => Ok(Self::Interventionist),
            "passive" => Ok(Self::Passive),
            other => Err(Error::Format(format!("unknown scheme {other:?}"))),
        }
    }
}

/// Settings (and preparation outcome) that a block of four cells is
/// conditioned on. For passive data `t` and `l` are absent: the
/// repreparation reuses `s` and the observed `k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Tuple {
    pub s: PauliIndex,
    pub t: Option<PauliIndex>,
    pub u: PauliIndex,
    pub l: Option<Outcome>,
}

impl Tuple {
    pub fn intervention(s: PauliIndex, t: PauliIndex, u: PauliIndex, l: Outcome) -> Self {
        Self {
            s,
            t: Some(t),
            u,
            l: Some(l),
        }
    }

    pub fn passive(s: PauliIndex, u: PauliIndex) -> Self {
        Self {
            s,
            t: None,
            u,
            l: None,
        }
    }

    pub fn scheme(&self) -> Scheme {
        if self.t.is_some() {
            Scheme::Interventionist
        } else {
            Scheme::Passive
        }
    }

    pub fn index(&self) -> usize {
        let s = self.s.index() - 1;
        let u = self.u.index() - 1;
        match (self.t, self.l) {
            (Some(t), Some(l)) => ((s * 3 + t.index() - 1) * 3 + u) * 2 + l.index(),
            _ => s * 3 + u,
        }
    }

    pub fn from_index(scheme: Scheme, i: usize) -> Self {
        let setting = |v: usize| PauliIndex::SETTINGS[v];
        match scheme {
            Scheme::Interventionist => {
                let l = Outcome::BOTH[i % 2];
                let r = i / 2;
                Self::intervention(setting(r / 9), setting((r / 3) % 3), setting(r % 3), l)
            }
            Scheme::Passive => Self::passive(setting(i / 3), setting(i % 3)),
        }
    }

    /// Preparation on D: (t, l) for interventions, (s, k) when passive.
    pub fn preparation(&self, k: Outcome) -> (PauliIndex, Outcome) {
        match (self.t, self.l) {
            (Some(t), Some(l)) => (t, l),
            _ => (self.s, k),
        }
    }
}

/// Flat position of cell `(tuple, k, m)`.
pub fn cell_index(tuple: &Tuple, k: Outcome, m: Outcome) -> usize {
    tuple.index() * 4 + k.index() * 2 + m.index()
}

/// Conditional outcome probabilities, exact or estimated from counts.
#[derive(Clone, Debug, PartialEq)]
pub struct Distribution {
    scheme: Scheme,
    probs: Vec<f64>,
}

pub type ExactDistribution = Distribution;

impl Distribution {
    pub fn new(scheme: Scheme, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != scheme.cell_count() {
            return Err(Error::DimensionMismatch {
                expected: scheme.cell_count(),
                actual: probs.len(),
            });
        }
        if let Some(&bad) = probs.iter().find(|&&p| !(0.0..=1.0 + 1e-12).contains(&p)) {
            return Err(Error::OutOfRange {
                what: "probability",
                value: bad,
            });
        }
        let d = Self { scheme, probs };
        let deviation = d.normalization_error();
        if deviation > 1e-9 {
            return Err(Error::NotNormalized { deviation });
        }
        Ok(d)
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn get(&self, tuple: &Tuple, k: Outcome, m: Outcome) -> f64 {
        debug_assert_eq!(tuple.scheme(), self.scheme);
        self.probs[cell_index(tuple, k, m)]
    }

    /// P(km|lstu)
    pub fn intervention(
        &self,
        s: PauliIndex,
        t: PauliIndex,
        u: PauliIndex,
        l: Outcome,
        k: Outcome,
        m: Outcome,
    ) -> f64 {
        self.get(&Tuple::intervention(s, t, u, l), k, m)
    }

    /// P(km|su)
    pub fn passive(&self, s: PauliIndex, u: PauliIndex, k: Outcome, m: Outcome) -> f64 {
        self.get(&Tuple::passive(s, u), k, m)
    }

    /// Worst deviation of a conditional block sum from one.
    pub fn normalization_error(&self) -> f64 {
        self.probs
            .chunks(4)
            .map(|c| (c.iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Σ_km km P(km|su) for passive data.
    pub fn passive_correlation(&self, s: PauliIndex, u: PauliIndex) -> f64 {
        let tuple = Tuple::passive(s, u);
        let mut acc = 0.0;
        for k in Outcome::BOTH {
            for m in Outcome::BOTH {
                acc += k.sign() * m.sign() * self.get(&tuple, k, m);
            }
        }
        acc
    }
}

fn check_map(map: &CausalMap) -> Result<()> {
    let report = map.validate();
    if !report.is_valid(MAP_TOL) {
        return Err(Error::InvalidMap(format!("{report:?}")));
    }
    Ok(())
}

fn born(map: &CausalMap, tuple: &Tuple, k: Outcome, m: Outcome) -> f64 {
    // projector entries are dyadic, so extremal scenarios give exact values
    let (t, l) = tuple.preparation(k);
    let proj = |s, o| pauli_projector(s, o).expect("nonzero setting");
    let op = kron_all(&[&proj(tuple.s, k), &proj(tuple.u, m), &proj(t, l)]);
    // rounding can leave -1e-17 on impossible outcomes
    map.matrix().trace_product(&op).re.max(0.0)
}

pub fn exact_probabilities(map: &CausalMap, scheme: Scheme) -> Result<Distribution> {
    check_map(map)?;
    let mut probs = vec![0.0; scheme.cell_count()];
    for tuple in scheme.tuples() {
        for k in Outcome::BOTH {
            for m in Outcome::BOTH {
                probs[cell_index(&tuple, k, m)] = born(map, &tuple, k, m);
            }
        }
    }
    Distribution::new(scheme, probs)
}

/// P(km|lstu) = Tr[ρ_{CB|D} (Π_sk ⊗ Π_um ⊗ Π_tl)] for all 216 cells.
pub fn exact_probabilities_intervention(map: &CausalMap) -> Result<Distribution> {
    exact_probabilities(map, Scheme::Interventionist)
}

/// P(km|su) = Tr[ρ_{CB|D} (Π_sk ⊗ Π_um ⊗ Π_sk)]: D is reprepared in the
/// projector found on C.
pub fn exact_probabilities_passive(map: &CausalMap) -> Result<Distribution> {
    exact_probabilities(map, Scheme::Passive)
}

/// Integer counts per cell; each conditioning tuple sums to `n`.
#[derive(Clone, Debug, PartialEq)]
pub struct CountTable {
    scheme: Scheme,
    n: u64,
    seed: u64,
    counts: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountEntry {
    pub s: u8,
    pub t: Option<u8>,
    pub u: u8,
    pub l: Option<i8>,
    pub k: i8,
    pub m: i8,
    pub count: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountTableJson {
    pub scheme: Scheme,
    #[serde(rename = "N")]
    pub n: u64,
    pub seed: u64,
    pub entries: Vec<CountEntry>,
}

impl CountTable {
    pub fn new(scheme: Scheme, n: u64, seed: u64, counts: Vec<u64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::ZeroShots);
        }
        if counts.len() != scheme.cell_count() {
            return Err(Error::DimensionMismatch {
                expected: scheme.cell_count(),
                actual: counts.len(),
            });
        }
        if let Some(block) = counts.chunks(4).find(|c| c.iter().sum::<u64>() != n) {
            return Err(Error::Format(format!(
                "conditioning tuple sums to {} instead of N = {n}",
                block.iter().sum::<u64>()
            )));
        }
        Ok(Self {
            scheme,
            n,
            seed,
            counts,
        })
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn shots(&self) -> u64 {
        self.n
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn get(&self, tuple: &Tuple, k: Outcome, m: Outcome) -> u64 {
        self.counts[cell_index(tuple, k, m)]
    }

    /// Relative frequencies.
    pub fn frequencies(&self) -> Distribution {
        let n = self.n as f64;
        Distribution {
            scheme: self.scheme,
            probs: self.counts.iter().map(|&c| c as f64 / n).collect(),
        }
    }

    pub fn to_json_value(&self) -> CountTableJson {
        let mut entries = Vec::with_capacity(self.counts.len());
        for tuple in self.scheme.tuples() {
            for k in Outcome::BOTH {
                for m in Outcome::BOTH {
                    entries.push(CountEntry {
                        s: tuple.s.value(),
                        t: tuple.t.map(|t| t.value()),
                        u: tuple.u.value(),
                        l: tuple.l.map(|l| l.value()),
                        k: k.value(),
                        m: m.value(),
                        count: self.get(&tuple, k, m),
                    });
                }
            }
        }
        CountTableJson {
            scheme: self.scheme,
            n: self.n,
            seed: self.seed,
            entries,
        }
    }

    pub fn from_json_value(j: &CountTableJson) -> Result<Self> {
        let mut counts = vec![None; j.scheme.cell_count()];
        let setting = |v: u8| -> Result<PauliIndex> {
            let p = PauliIndex::new(v)?;
            if p == PauliIndex::I {
                return Err(Error::Format("setting 0 is not a measurement".into()));
            }
            Ok(p)
        };
        for e in &j.entries {
            let tuple = match (j.scheme, e.t, e.l) {
                (Scheme::Interventionist, Some(t), Some(l)) => {
                    Tuple::intervention(setting(e.s)?, setting(t)?, setting(e.u)?, Outcome::new(l)?)
                }
                (Scheme::Passive, None, None) => Tuple::passive(setting(e.s)?, setting(e.u)?),
                _ => {
                    return Err(Error::Format(format!(
                        "entry {e:?} does not match scheme {}",
                        j.scheme
                    )))
                }
            };
            let idx = cell_index(&tuple, Outcome::new(e.k)?, Outcome::new(e.m)?);
            if counts[idx].replace(e.count).is_some() {
                return Err(Error::Format(format!("duplicate entry {e:?}")));
            }
        }
        let counts = counts
            .into_iter()
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| Error::Format("missing entries".into()))?;
        Self::new(j.scheme, j.n, j.seed, counts)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_json_value()).expect("plain data")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let j: CountTableJson =
            serde_json::from_str(s).map_err(|e| Error::Format(e.to_string()))?;
        Self::from_json_value(&j)
    }
}

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the independent random stream for item `index` under `seed`:
/// `splitmix64(seed + (index + 1) * 0x9E3779B97F4A7C15)`.
pub fn substream_seed(seed: u64, index: u64) -> u64 {
    mix64(seed.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15)))
}

/// Draw `n` categorical samples per conditioning tuple. Tuple `i` uses a
/// ChaCha8 stream seeded with [`substream_seed`]`(seed, i)`, so the table does
/// not depend on the order in which tuples are generated.
pub fn sample_counts(dist: &Distribution, n: u64, seed: u64) -> Result<CountTable> {
    if n == 0 {
        return Err(Error::ZeroShots);
    }
    let mut counts = Vec::with_capacity(dist.probs.len());
    for (i, block) in dist.probs.chunks(4).enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(substream_seed(seed, i as u64));
        let mut remaining = n;
        let mut mass = 1.0;
        for (j, &p) in block.iter().enumerate() {
            let c = if j == 3 || remaining == 0 {
                remaining
            } else {
                let q = if mass > 0.0 {
                    (p / mass).clamp(0.0, 1.0)
                } else {
                    0.0
                };
                Binomial::new(remaining, q)
                    .expect("probability in [0, 1]")
                    .sample(&mut rng)
            };
            counts.push(c);
            remaining -= c;
            mass -= p;
        }
    }
    CountTable::new(dist.scheme, n, seed, counts)
}

/// Residuals of the marginal-independence conditions for passive data.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NoSignallingReport {
    /// max_{s,u,k} |P(k|su) - P(k|s)|
    pub k_residual: f64,
    /// max_{s,u,m} |P(m|su) - P(m|u)|
    pub m_residual: f64,
}

impl NoSignallingReport {
    pub fn signalling(&self, tol: f64) -> bool {
        self.k_residual > tol || self.m_residual > tol
    }
}

/// Compare each setting-conditioned marginal with its average over the
/// other party's setting.
pub fn no_signalling_report(dist: &Distribution) -> Result<NoSignallingReport> {
    dist.scheme.expect(Scheme::Passive)?;
    let s3 = PauliIndex::SETTINGS;
    let pk = |s, u, k| {
        Outcome::BOTH
            .iter()
            .map(|&m| dist.passive(s, u, k, m))
            .sum::<f64>()
    };
    let pm = |s, u, m| {
        Outcome::BOTH
            .iter()
            .map(|&k| dist.passive(s, u, k, m))
            .sum::<f64>()
    };
    let mut k_residual: f64 = 0.0;
    let mut m_residual: f64 = 0.0;
    for x in s3 {
        for o in Outcome::BOTH {
            let k_avg = s3.iter().map(|&u| pk(x, u, o)).sum::<f64>() / 3.0;
            let m_avg = s3.iter().map(|&s| pm(s, x, o)).sum::<f64>() / 3.0;
            for y in s3 {
                k_residual = k_residual.max((pk(x, y, o) - k_avg).abs());
                m_residual = m_residual.max((pm(y, x, o) - m_avg).abs());
            }
        }
    }
    Ok(NoSignallingReport {
        k_residual,
        m_residual,
    })
}

/// Causal map of the circuit: |Φ+> on (C, E), then a gate on (D, E) drawn
/// from `branches` (weight, 4x4 unitary), output B is the first gate
/// output, the second output F is discarded.
pub fn circuit_map(branches: &[(f64, CMatrix)]) -> Result<CausalMap> {
    let total: f64 = branches.iter().map(|(w, _)| w).sum();
    if (total - 1.0).abs() > 1e-12 || branches.iter().any(|(w, _)| *w < 0.0) {
        return Err(Error::Format(
            "branch weights must form a distribution".into(),
        ));
    }
    let phi = bell_state(Bell::PhiPlus).into_matrix();
    let ced = Layout::qubits(&[Sys::C, Sys::E, Sys::D]);
    let out_layout = Layout::qubits(&[Sys::C, Sys::B, Sys::F]);
    let action = |x: &CMatrix| -> CMatrix {
        let (state, _) = permute(&kron(&phi, x), &ced, &[Sys::C, Sys::D, Sys::E]).expect("8x8");
        let mut acc = CMatrix::zeros(8, 8);
        for (w, u) in branches {
            let g = kron(&CMatrix::identity(2), u);
            acc = &acc + &(&(&g * &state) * &g.dagger()).scale(*w);
        }
        partial_trace(&acc, &out_layout, Sys::F).expect("8x8").0
    };
    CausalMap::new(jamiolkowski(2, action))
}

fn swap_gate() -> CMatrix {
    let mut m = CMatrix::zeros(4, 4);
    for (i, j) in [(0, 0), (1, 2), (2, 1), (3, 3)] {
        m[(i, j)] = C64::new(1.0, 0.0);
    }
    m
}

/// Identity with probability 1-p, swap with probability p.
pub fn swap_mixture_scenario(p: f64) -> Result<CausalMap> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::OutOfRange {
            what: "mixing probability",
            value: p,
        });
    }
    circuit_map(&[(1.0 - p, CMatrix::identity(4)), (p, swap_gate())])
}

/// The same mixture assembled from its components, for cross-checks.
pub fn swap_mixture_components(p: f64) -> Result<CausalMap> {
    let cc = make_cc_map(&bell_state(Bell::PhiPlus))?;
    let dc = make_dc_map(
        &DensityOperator::maximally_mixed(&[Sys::C]),
        &ChannelOperator::identity(),
    )?;
    mix_maps(p, &cc, &dc)
}

/// Coherent interpolation: the gate is cos θ·1 + i sin θ·SWAP.
pub fn partial_swap_scenario(theta: f64) -> Result<CausalMap> {
    if !theta.is_finite() {
        return Err(Error::OutOfRange {
            what: "theta",
            value: theta,
        });
    }
    let u =
        &CMatrix::identity(4).scale(theta.cos()) + &swap_gate().scale_c(C64::new(0.0, theta.sin()));
    circuit_map(&[(1.0, u)])
}

/// Pure common cause with a two-qubit state.
pub fn common_cause_scenario(rho_cb: &DensityOperator) -> Result<CausalMap> {
    make_cc_map(rho_cb)
}

/// Pure direct cause through `channel` with a maximally mixed C.
pub fn direct_cause_scenario(channel: &ChannelOperator) -> Result<CausalMap> {
    make_dc_map(&DensityOperator::maximally_mixed(&[Sys::C]), channel)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qubit::pauli;
    use std::f64::consts::FRAC_PI_2;

    const X: PauliIndex = PauliIndex::X;
    const Y: PauliIndex = PauliIndex::Y;
    const Z: PauliIndex = PauliIndex::Z;
    const P: Outcome = Outcome::Plus;
    const M: Outcome = Outcome::Minus;

    #[test]
    fn tuple_indexing_round_trips() {
        for scheme in [Scheme::Interventionist, Scheme::Passive] {
            for i in 0..scheme.tuple_count() {
                assert_eq!(Tuple::from_index(scheme, i).index(), i);
            }
        }
    }

    #[test]
    fn circuit_matches_component_mixture() {
        for p in [0.0, 0.2, 0.5, 0.85, 1.0] {
            let a = swap_mixture_scenario(p).unwrap();
            let b = swap_mixture_components(p).unwrap();
            assert!(a.matrix().max_abs_diff(b.matrix()) < 1e-14, "p = {p}");
        }
        assert!(swap_mixture_scenario(-0.1).is_err());
    }

    #[test]
    fn partial_swap_endpoints() {
        let a = partial_swap_scenario(0.0).unwrap();
        assert!(
            a.matrix()
                .max_abs_diff(swap_mixture_scenario(0.0).unwrap().matrix())
                < 1e-14
        );
        let b = partial_swap_scenario(FRAC_PI_2).unwrap();
        assert!(
            b.matrix()
                .max_abs_diff(swap_mixture_scenario(1.0).unwrap().matrix())
                < 1e-14
        );
        assert!(partial_swap_scenario(std::f64::consts::FRAC_PI_4)
            .unwrap()
            .validate()
            .is_valid(1e-12));
    }

    #[test]
    fn identity_copies_preparation() {
        let d = exact_probabilities_intervention(&swap_mixture_scenario(0.0).unwrap()).unwrap();
        assert!((d.intervention(X, Z, Z, P, P, P) - 0.5).abs() < 1e-15);
        assert!(d.intervention(X, Z, Z, P, P, M).abs() < 1e-15);
        assert!(d.normalization_error() < 1e-12);
        assert_eq!(d.probs().len(), 216);
    }

    #[test]
    fn common_cause_ignores_preparation() {
        let d = exact_probabilities_intervention(&swap_mixture_scenario(1.0).unwrap()).unwrap();
        for s in PauliIndex::SETTINGS {
            for u in PauliIndex::SETTINGS {
                for k in Outcome::BOTH {
                    for m in Outcome::BOTH {
                        let base = d.intervention(s, X, u, P, k, m);
                        for t in PauliIndex::SETTINGS {
                            for l in Outcome::BOTH {
                                assert!((d.intervention(s, t, u, l, k, m) - base).abs() < 1e-15);
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn passive_table1_examples() {
        let singlet = common_cause_scenario(&bell_state(Bell::PsiMinus)).unwrap();
        let d = exact_probabilities_passive(&singlet).unwrap();
        assert_eq!(d.probs().len(), 36);
        for s in PauliIndex::SETTINGS {
            assert!(d.passive(s, s, P, P).abs() < 1e-15);
            assert!(d.passive(s, s, M, M).abs() < 1e-15);
            assert!((d.passive(s, s, P, M) - 0.5).abs() < 1e-15);
        }
        let phi = common_cause_scenario(&bell_state(Bell::PhiPlus)).unwrap();
        let d = exact_probabilities_passive(&phi).unwrap();
        assert!(d.passive(Y, Y, P, P).abs() < 1e-15 && d.passive(Y, Y, M, M).abs() < 1e-15);
        let id = direct_cause_scenario(&ChannelOperator::identity()).unwrap();
        let d = exact_probabilities_passive(&id).unwrap();
        for s in PauliIndex::SETTINGS {
            assert!((d.passive(s, s, P, P) - 0.5).abs() < 1e-15);
            assert!(d.passive(s, s, P, M).abs() < 1e-15);
        }
    }

    #[test]
    fn passive_diagonal_correlations_of_mixture() {
        for p in [0.0, 0.3, 0.5, 0.9] {
            let d = exact_probabilities_passive(&swap_mixture_scenario(p).unwrap()).unwrap();
            assert!((d.passive_correlation(X, X) - 1.0).abs() < 1e-12);
            assert!((d.passive_correlation(Y, Y) - (1.0 - 2.0 * p)).abs() < 1e-12);
            assert!((d.passive_correlation(Z, Z) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn sampling_is_deterministic_and_normalized() {
        let d = exact_probabilities_intervention(&swap_mixture_scenario(0.4).unwrap()).unwrap();
        let a = sample_counts(&d, 100, 7).unwrap();
        let b = sample_counts(&d, 100, 7).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, sample_counts(&d, 100, 8).unwrap());
        for block in a.counts().chunks(4) {
            assert_eq!(block.iter().sum::<u64>(), 100);
        }
        let one = sample_counts(&d, 1, 3).unwrap();
        assert!(one.counts().chunks(4).all(|b| b.iter().sum::<u64>() == 1));
        assert!(matches!(sample_counts(&d, 0, 1), Err(Error::ZeroShots)));
    }

    #[test]
    fn impossible_cells_never_sampled() {
        let d = exact_probabilities_intervention(&swap_mixture_scenario(0.0).unwrap()).unwrap();
        let t = sample_counts(&d, 1000, 11).unwrap();
        for (c, p) in t.counts().iter().zip(d.probs()) {
            if *p == 0.0 {
                assert_eq!(*c, 0);
            }
        }
    }

    #[test]
    fn count_table_json_round_trip() {
        let d = exact_probabilities_passive(&swap_mixture_scenario(0.7).unwrap()).unwrap();
        let t = sample_counts(&d, 500, 99).unwrap();
        let text = t.to_json();
        assert!(text.contains("\"t\": null"));
        assert_eq!(CountTable::from_json(&text).unwrap(), t);
        assert!(CountTable::from_json("{\"scheme\":\"passive\"").is_err());

        let mut j = t.to_json_value();
        j.entries[0].count += 1;
        assert!(CountTable::from_json_value(&j).is_err());
    }

    #[test]
    fn no_signalling_for_mixtures() {
        for p in [0.0, 0.25, 0.5, 1.0] {
            let d = exact_probabilities_passive(&swap_mixture_scenario(p).unwrap()).unwrap();
            let r = no_signalling_report(&d).unwrap();
            assert!(r.k_residual < 1e-12 && r.m_residual < 1e-12);
        }
        let ex = exact_probabilities_intervention(&swap_mixture_scenario(0.5).unwrap()).unwrap();
        assert!(matches!(
            no_signalling_report(&ex),
            Err(Error::WrongScheme { .. })
        ));
    }

    #[test]
    fn cc_with_biased_marginal_keeps_k_independent() {
        // |ψ> = cos a|00> + sin a|11>: ρ_C not maximally mixed
        let (c, s) = (0.3f64.cos(), 0.3f64.sin());
        let v = [
            C64::new(c, 0.0),
            C64::new(0.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(s, 0.0),
        ];
        let rho = DensityOperator::pure(&v, Layout::qubits(&[Sys::C, Sys::B])).unwrap();
        let d = exact_probabilities_passive(&common_cause_scenario(&rho).unwrap()).unwrap();
        let r = no_signalling_report(&d).unwrap();
        assert!(r.k_residual < 1e-12);
    }

    #[test]
    fn signalling_distribution_flagged() {
        // direct cause with a biased C: P(m|su) depends on s
        let rho_c = DensityOperator::from_bloch([0.0, 0.0, 0.8], Sys::C).unwrap();
        let m = make_dc_map(&rho_c, &ChannelOperator::identity()).unwrap();
        let d = exact_probabilities_passive(&m).unwrap();
        let r = no_signalling_report(&d).unwrap();
        assert!(r.k_residual < 1e-12);
        assert!(r.signalling(1e-6));
    }

    #[test]
    fn hand_built_signalling_table() {
        let mut probs = vec![0.25; 36];
        // (s=1,u=1): k always +1
        probs[0] = 0.5;
        probs[1] = 0.5;
        probs[2] = 0.0;
        probs[3] = 0.0;
        let d = Distribution::new(Scheme::Passive, probs).unwrap();
        assert!(no_signalling_report(&d).unwrap().signalling(1e-3));
    }

    #[test]
    fn pauli_sanity() {
        assert_eq!(pauli(Z)[(1, 1)], C64::new(-1.0, 0.0));
    }
}
