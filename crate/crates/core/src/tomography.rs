//! Causal tomography from interventionist statistics: Pauli correlators,
//! linear reconstruction of ρ_{CB|D}, and the reductions to two-qubit state
//! tomography and single-qubit process tomography.

use std::fmt::Write as _;

use crate::causal_map::{CausalMap, ValidityReport};
use crate::error::{Error, Result};
use crate::linalg::{kron, kron_all, CMatrix, Layout, Sys};
use crate::qubit::{pauli, ChannelOperator, DensityOperator, Outcome, PauliIndex};
use crate::scenario::{CountTable, Distribution, Scheme};

pub use crate::causal_map::choi_fidelity;

/// Guard tolerance when no shot count is known.
pub const EXACT_GUARD_TOL: f64 = 1e-6;

/// Joint distribution P(klm|stu) over the 27 measurement settings.
#[derive(Clone, Debug, PartialEq)]
pub struct JointDistribution {
    probs: Vec<f64>,
    shots: Option<u64>,
}

fn joint_index(
    s: PauliIndex,
    t: PauliIndex,
    u: PauliIndex,
    k: Outcome,
    l: Outcome,
    m: Outcome,
) -> usize {
    let setting = ((s.index() - 1) * 3 + t.index() - 1) * 3 + u.index() - 1;
    setting * 8 + k.index() * 4 + l.index() * 2 + m.index()
}

impl JointDistribution {
    pub fn get(
        &self,
        s: PauliIndex,
        t: PauliIndex,
        u: PauliIndex,
        k: Outcome,
        l: Outcome,
        m: Outcome,
    ) -> f64 {
        self.probs[joint_index(s, t, u, k, l, m)]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Shots per conditioning tuple, when the source was a count table.
    pub fn shots(&self) -> Option<u64> {
        self.shots
    }

    pub fn normalization_error(&self) -> f64 {
        self.probs
            .chunks(8)
            .map(|c| (c.iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// P(klm|stu) = ½ P(km|lstu); the preparation outcome l is uniform.
pub fn intervention_to_joint(dist: &Distribution) -> Result<JointDistribution> {
    dist.scheme().expect(Scheme::Interventionist)?;
    let mut probs = vec![0.0; 216];
    for tuple in Scheme::Interventionist.tuples() {
        let (t, l) = (
            tuple.t.expect("interventionist"),
            tuple.l.expect("interventionist"),
        );
        for k in Outcome::BOTH {
            for m in Outcome::BOTH {
                probs[joint_index(tuple.s, t, tuple.u, k, l, m)] = 0.5 * dist.get(&tuple, k, m);
            }
        }
    }
    Ok(JointDistribution { probs, shots: None })
}

pub fn counts_to_joint(counts: &CountTable) -> Result<JointDistribution> {
    let mut j = intervention_to_joint(&counts.frequencies())?;
    j.shots = Some(counts.shots());
    Ok(j)
}

/// C_{s't'u'} with index 0 the identity.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelatorTensor {
    values: [[[f64; 4]; 4]; 4],
    shots: Option<u64>,
}

impl CorrelatorTensor {
    pub fn new(values: [[[f64; 4]; 4]; 4]) -> Self {
        Self {
            values,
            shots: None,
        }
    }

    pub fn with_shots(mut self, shots: Option<u64>) -> Self {
        self.shots = shots;
        self
    }

    /// Tr[ρ σ_s' ⊗ σ_u' ⊗ σ_t'] for every index triple.
    pub fn from_map(map: &CausalMap) -> Self {
        let mut values = [[[0.0; 4]; 4]; 4];
        for s in PauliIndex::ALL {
            for t in PauliIndex::ALL {
                for u in PauliIndex::ALL {
                    values[s.index()][t.index()][u.index()] = map.pauli_component(s, t, u);
                }
            }
        }
        Self::new(values)
    }

    pub fn get(&self, s: PauliIndex, t: PauliIndex, u: PauliIndex) -> f64 {
        self.values[s.index()][t.index()][u.index()]
    }

    pub fn values(&self) -> &[[[f64; 4]; 4]; 4] {
        &self.values
    }

    pub fn shots(&self) -> Option<u64> {
        self.shots
    }

    /// 10/√N for finite data, otherwise [`EXACT_GUARD_TOL`].
    pub fn default_tolerance(&self) -> f64 {
        match self.shots {
            Some(n) => 10.0 / (n as f64).sqrt(),
            None => EXACT_GUARD_TOL,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("s',t',u',value\n");
        for s in 0..4 {
            for t in 0..4 {
                for u in 0..4 {
                    writeln!(out, "{s},{t},{u},{}", self.values[s][t][u]).expect("string write");
                }
            }
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut values = [[[f64::NAN; 4]; 4]; 4];
        for (n, line) in text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            let bad = || Error::Format(format!("line {}: {line:?}", n + 1));
            if f.len() != 4 {
                return Err(bad());
            }
            let idx = |v: &str| v.parse::<usize>().ok().filter(|&i| i < 4).ok_or_else(bad);
            let (s, t, u) = (idx(f[0])?, idx(f[1])?, idx(f[2])?);
            values[s][t][u] = f[3].parse().map_err(|_| bad())?;
        }
        if values.iter().flatten().flatten().any(|v| v.is_nan()) {
            return Err(Error::Format(
                "correlator table must list all 64 entries".into(),
            ));
        }
        Ok(Self::new(values))
    }
}

/// All 64 correlators. Entries with zeros are computed from marginals of the
/// joint, averaged over the settings of the marginalised parties.
pub fn correlators(joint: &JointDistribution) -> Result<CorrelatorTensor> {
    let deviation = joint.normalization_error();
    if deviation > 1e-9 {
        return Err(Error::NotNormalized { deviation });
    }
    let mut values = [[[0.0; 4]; 4]; 4];
    for s0 in PauliIndex::ALL {
        for t0 in PauliIndex::ALL {
            for u0 in PauliIndex::ALL {
                let pick = |fixed: PauliIndex, free: PauliIndex| {
                    if fixed == PauliIndex::I {
                        free
                    } else {
                        fixed
                    }
                };
                let sign =
                    |idx: PauliIndex, o: Outcome| if idx == PauliIndex::I { 1.0 } else { o.sign() };
                let mut acc = 0.0;
                let mut settings = 0usize;
                for s in PauliIndex::SETTINGS {
                    for t in PauliIndex::SETTINGS {
                        for u in PauliIndex::SETTINGS {
                            if pick(s0, s) != s || pick(t0, t) != t || pick(u0, u) != u {
                                continue;
                            }
                            settings += 1;
                            for k in Outcome::BOTH {
                                for l in Outcome::BOTH {
                                    for m in Outcome::BOTH {
                                        acc += sign(s0, k)
                                            * sign(t0, l)
                                            * sign(u0, m)
                                            * joint.get(s, t, u, k, l, m);
                                    }
                                }
                            }
                        }
                    }
                }
                values[s0.index()][t0.index()][u0.index()] = 2.0 * acc / settings as f64;
            }
        }
    }
    values[0][0][0] = 2.0;
    Ok(CorrelatorTensor {
        values,
        shots: joint.shots,
    })
}

/// Correlators straight from an interventionist distribution.
pub fn correlators_from_distribution(dist: &Distribution) -> Result<CorrelatorTensor> {
    correlators(&intervention_to_joint(dist)?)
}

pub fn correlators_from_counts(counts: &CountTable) -> Result<CorrelatorTensor> {
    correlators(&counts_to_joint(counts)?)
}

/// ρ_{CB|D} = ⅛ Σ C_{s't'u'} σ_s' ⊗ σ_u' ⊗ σ_t'. The result is not projected
/// onto valid maps; the report says how far it is from one.
pub fn reconstruct_causal_map(c: &CorrelatorTensor) -> (CausalMap, ValidityReport) {
    let mut m = CMatrix::zeros(8, 8);
    for s in PauliIndex::ALL {
        for t in PauliIndex::ALL {
            for u in PauliIndex::ALL {
                let v = c.get(s, t, u);
                if v != 0.0 {
                    let op = kron_all(&[&pauli(s), &pauli(u), &pauli(t)]);
                    m = &m + &op.scale(v / 8.0);
                }
            }
        }
    }
    let map = CausalMap::from_raw(m).expect("Pauli sums are Hermitian");
    let report = map.validate();
    (map, report)
}

fn max_direct_dependence(c: &CorrelatorTensor) -> f64 {
    let mut worst: f64 = 0.0;
    for s in 0..4 {
        for t in 1..4 {
            for u in 0..4 {
                worst = worst.max(c.values[s][t][u].abs());
            }
        }
    }
    worst
}

/// Two-qubit state tomography: ρ_CB = ¼ Σ (C_{s'0u'}/2) σ_s' ⊗ σ_u'.
/// Fails when any correlator involving D exceeds `tol`
/// (default [`CorrelatorTensor::default_tolerance`]).
pub fn reduce_to_state_tomography(
    c: &CorrelatorTensor,
    tol: Option<f64>,
) -> Result<DensityOperator> {
    let tol = tol.unwrap_or_else(|| c.default_tolerance());
    let worst = max_direct_dependence(c);
    if worst > tol {
        return Err(Error::DirectCauseDependence {
            max_dependence: worst,
            tolerance: tol,
        });
    }
    let mut m = CMatrix::zeros(4, 4);
    for s in PauliIndex::ALL {
        for u in PauliIndex::ALL {
            let v = 0.5 * c.get(s, PauliIndex::I, u);
            m = &m + &kron(&pauli(s), &pauli(u)).scale(v / 4.0);
        }
    }
    DensityOperator::with_tolerance(m, Layout::qubits(&[Sys::C, Sys::B]), tol)
}

/// Single-qubit process tomography for a tensor of the form C_s'·C_{t'u'}.
/// Returns ρ_C = ½ Σ C_s' σ_s' and ρ_{B|D} = ¼ Σ C_{t'u'} σ_u' ⊗ σ_t'.
pub fn reduce_to_process_tomography(
    c: &CorrelatorTensor,
    tol: Option<f64>,
) -> Result<(DensityOperator, ChannelOperator)> {
    let tol = tol.unwrap_or_else(|| c.default_tolerance());
    let cs: Vec<f64> = (0..4).map(|s| c.values[s][0][0] / 2.0).collect();
    let mut residual: f64 = 0.0;
    for s in 0..4 {
        for t in 0..4 {
            for u in 0..4 {
                residual = residual.max((c.values[s][t][u] - cs[s] * c.values[0][t][u]).abs());
            }
        }
    }
    if residual > tol {
        return Err(Error::NotFactorizable {
            residual,
            tolerance: tol,
        });
    }
    let mut rho_c = CMatrix::zeros(2, 2);
    for s in PauliIndex::ALL {
        rho_c = &rho_c + &pauli(s).scale(cs[s.index()] / 2.0);
    }
    let mut rho_bd = CMatrix::zeros(4, 4);
    for t in PauliIndex::ALL {
        for u in PauliIndex::ALL {
            rho_bd = &rho_bd + &kron(&pauli(u), &pauli(t)).scale(c.get(PauliIndex::I, t, u) / 4.0);
        }
    }
    Ok((
        DensityOperator::with_tolerance(rho_c, Layout::qubits(&[Sys::C]), tol)?,
        ChannelOperator::with_tolerance(rho_bd, tol)?,
    ))
}

/// Estimated map from interventionist counts, with its validity report.
pub fn reconstruct_from_counts(counts: &CountTable) -> Result<(CausalMap, ValidityReport)> {
    Ok(reconstruct_causal_map(&correlators_from_counts(counts)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::causal_map::{make_cc_map, make_dc_map};
    use crate::linalg::C64;
    use crate::qubit::{bell_state, Bell};
    use crate::scenario::{exact_probabilities_intervention, sample_counts, swap_mixture_scenario};

    const X: PauliIndex = PauliIndex::X;
    const Z: PauliIndex = PauliIndex::Z;

    fn exact_corr(map: &CausalMap) -> CorrelatorTensor {
        correlators_from_distribution(&exact_probabilities_intervention(map).unwrap()).unwrap()
    }

    /// Direct trace against explicit 8x8 Pauli products.
    fn oracle(map: &CausalMap, s: usize, t: usize, u: usize) -> f64 {
        let p = |i: usize| pauli(PauliIndex::ALL[i]);
        let op = kron(&kron(&p(s), &p(u)), &p(t));
        let m = map.matrix();
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..8 {
            for j in 0..8 {
                acc += m[(i, j)] * op[(j, i)];
            }
        }
        acc.re
    }

    #[test]
    fn joint_examples() {
        let d = exact_probabilities_intervention(&swap_mixture_scenario(0.0).unwrap()).unwrap();
        let j = intervention_to_joint(&d).unwrap();
        assert!(j.normalization_error() < 1e-12);
        for l in Outcome::BOTH {
            for m in Outcome::BOTH {
                let want = if l == m { 0.25 } else { 0.0 };
                for k in Outcome::BOTH {
                    assert!((j.get(X, Z, Z, k, l, m) - want).abs() < 1e-14);
                }
            }
        }
        let uniform = Distribution::new(Scheme::Interventionist, vec![0.25; 216]).unwrap();
        let j = intervention_to_joint(&uniform).unwrap();
        assert!(j.probs().iter().all(|&p| (p - 0.125).abs() < 1e-15));
    }

    #[test]
    fn identity_correlators_match_oracle() {
        let map = swap_mixture_scenario(0.0).unwrap();
        let c = exact_corr(&map);
        for t in 1..4 {
            for u in 1..4 {
                let want = if t == u { 2.0 } else { 0.0 };
                assert!((c.values()[0][t][u] - want).abs() < 1e-12);
            }
        }
        for s in 1..4 {
            assert!(c.values()[s][0][0].abs() < 1e-12);
            for t in 1..4 {
                for u in 0..4 {
                    assert!(c.values()[s][t][u].abs() < 1e-12);
                }
            }
        }
        assert_eq!(c.values()[0][0][0], 2.0);
    }

    #[test]
    fn all_entries_match_oracle() {
        for p in [0.0, 0.35, 1.0] {
            let map = swap_mixture_scenario(p).unwrap();
            let c = exact_corr(&map);
            for s in 0..4 {
                for t in 0..4 {
                    for u in 0..4 {
                        assert!((c.values()[s][t][u] - oracle(&map, s, t, u)).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn phi_plus_pair_pattern() {
        let c = exact_corr(&swap_mixture_scenario(1.0).unwrap());
        for (s, want) in [(1, 2.0), (2, -2.0), (3, 2.0)] {
            assert!((c.values()[s][0][s] - want).abs() < 1e-12);
        }
        for t in 1..4 {
            for u in 0..4 {
                assert!(c.values()[0][t][u].abs() < 1e-12);
            }
        }
    }

    #[test]
    fn round_trip_mixtures() {
        for p in [0.0, 0.5, 1.0] {
            let map = swap_mixture_scenario(p).unwrap();
            let (back, report) = reconstruct_causal_map(&exact_corr(&map));
            assert!(back.matrix().max_abs_diff(map.matrix()) < 1e-12);
            assert!(report.is_valid(1e-10));
            assert!((choi_fidelity(&back, &map).unwrap() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn identity_only_tensor() {
        let mut v = [[[0.0; 4]; 4]; 4];
        v[0][0][0] = 2.0;
        let (m, report) = reconstruct_causal_map(&CorrelatorTensor::new(v));
        assert!(m.matrix().max_abs_diff(&CMatrix::identity(8).scale(0.25)) < 1e-15);
        assert!(report.is_valid(1e-12));
    }

    #[test]
    fn corrupted_tensor_flagged() {
        let mut v = [[[0.0; 4]; 4]; 4];
        v[0][0][0] = 2.0;
        v[3][0][3] = 1.7;
        v[1][0][1] = 1.9;
        v[2][0][2] = 1.8;
        let (_, report) = reconstruct_causal_map(&CorrelatorTensor::new(v));
        assert!(report.choi_min_eigenvalue < -0.1);
        assert!(!report.is_valid(1e-6));
    }

    #[test]
    fn state_tomography_reduction() {
        let c = exact_corr(&swap_mixture_scenario(1.0).unwrap());
        let rho = reduce_to_state_tomography(&c, None).unwrap();
        assert!(
            rho.matrix()
                .max_abs_diff(bell_state(Bell::PhiPlus).matrix())
                < 1e-10
        );
        let c0 = exact_corr(&swap_mixture_scenario(0.0).unwrap());
        assert!(matches!(
            reduce_to_state_tomography(&c0, None),
            Err(Error::DirectCauseDependence { .. })
        ));
        let mixed = make_cc_map(&DensityOperator::maximally_mixed(&[Sys::C, Sys::B])).unwrap();
        let rho = reduce_to_state_tomography(&exact_corr(&mixed), None).unwrap();
        assert!(rho.matrix().max_abs_diff(&CMatrix::identity(4).scale(0.25)) < 1e-12);
    }

    #[test]
    fn process_tomography_reduction() {
        let c = exact_corr(&swap_mixture_scenario(0.0).unwrap());
        let (rho_c, ch) = reduce_to_process_tomography(&c, None).unwrap();
        assert!(
            rho_c
                .matrix()
                .max_abs_diff(&CMatrix::identity(2).scale(0.5))
                < 1e-10
        );
        assert!(
            ch.matrix()
                .max_abs_diff(ChannelOperator::identity().matrix())
                < 1e-10
        );

        let zero = DensityOperator::from_bloch([0.0, 0.0, 1.0], Sys::C).unwrap();
        let flip = ChannelOperator::unitary(&pauli(X)).unwrap();
        let map = make_dc_map(&zero, &flip).unwrap();
        let (rho_c, ch) = reduce_to_process_tomography(&exact_corr(&map), None).unwrap();
        assert!(rho_c.matrix().max_abs_diff(zero.matrix()) < 1e-10);
        assert!(ch.matrix().max_abs_diff(flip.matrix()) < 1e-10);

        let c1 = exact_corr(&swap_mixture_scenario(1.0).unwrap());
        assert!(matches!(
            reduce_to_process_tomography(&c1, None),
            Err(Error::NotFactorizable { .. })
        ));
    }

    #[test]
    fn shot_tolerance_scales() {
        let d = exact_probabilities_intervention(&swap_mixture_scenario(1.0).unwrap()).unwrap();
        let counts = sample_counts(&d, 10_000, 5).unwrap();
        let c = correlators_from_counts(&counts).unwrap();
        assert_eq!(c.shots(), Some(10_000));
        assert!((c.default_tolerance() - 0.1).abs() < 1e-15);
        let rho = reduce_to_state_tomography(&c, None).unwrap();
        assert!(
            rho.matrix()
                .max_abs_diff(bell_state(Bell::PhiPlus).matrix())
                < 0.05
        );
    }

    #[test]
    fn csv_round_trip() {
        let c = exact_corr(&swap_mixture_scenario(0.3).unwrap());
        let text = c.to_csv();
        assert_eq!(text.lines().count(), 65);
        assert!(text.starts_with("s',t',u',value\n0,0,0,2\n"));
        assert_eq!(
            CorrelatorTensor::from_csv(&text).unwrap().values(),
            c.values()
        );
        assert!(CorrelatorTensor::from_csv("s',t',u',value\n0,0,0,2\n").is_err());
    }

    #[test]
    fn unnormalized_joint_rejected() {
        let j = JointDistribution {
            probs: vec![0.2; 216],
            shots: None,
        };
        assert!(matches!(correlators(&j), Err(Error::NotNormalized { .. })));
    }
}
