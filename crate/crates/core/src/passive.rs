//! Inference from passive observation: the observed conditional operator,
//! positivity and PPT witnesses, the Bloch-ellipsoid picture, and recovery of
//! a promised mixture of one unitary channel and one maximally entangled
//! state.

use std::f64::consts::PI;

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg::{self, kron, partial_transpose, CMatrix, Layout, Sys};
use crate::qubit::{pauli, Outcome, PauliIndex};
use crate::scenario::{CountTable, Distribution, Scheme};

/// Witness tolerance on exact statistics.
pub const EXACT_WITNESS_TOL: f64 = 1e-9;
/// Axis-degeneracy tolerance on exact statistics.
pub const EXACT_AXIS_TOL: f64 = 1e-6;
/// Below this |1-2p| the factor matrices are not recovered.
pub const MIN_FACTOR_SCALE: f64 = 1e-3;

/// X = ¼ Σ Θ_{s'u'} σ_s' ⊗ σ_u' built from passive data, with layout
/// (first, B). It is the candidate ρ_{B|C} and the candidate ρ_{B|D} at once.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservedConditionalOperator {
    matrix: CMatrix,
    theta: [[f64; 4]; 4],
    shots: Option<u64>,
}

impl ObservedConditionalOperator {
    /// Requires uniform P(k|s): a biased early marginal signals the
    /// structure directly and is reported as [`Error::SignallingRegime`].
    pub fn from_distribution(dist: &Distribution) -> Result<Self> {
        Self::build(dist, None)
    }

    pub fn from_counts(counts: &CountTable) -> Result<Self> {
        Self::build(&counts.frequencies(), Some(counts.shots()))
    }

    fn build(dist: &Distribution, shots: Option<u64>) -> Result<Self> {
        dist.scheme().expect(Scheme::Passive)?;
        let tol = shots.map_or(EXACT_AXIS_TOL, |n| 3.0 / (n as f64).sqrt());
        let settings = PauliIndex::SETTINGS;
        let mut theta = [[0.0; 4]; 4];
        theta[0][0] = 2.0;
        let mut worst: f64 = 0.0;
        for s in settings {
            for u in settings {
                theta[s.index()][u.index()] = 2.0 * dist.passive_correlation(s, u);
            }
            // Θ_s0 = 2 Σ_k k P(k|s), P(k|s) averaged over u
            let mut acc = 0.0;
            let mut plus = 0.0;
            for u in settings {
                for k in Outcome::BOTH {
                    for m in Outcome::BOTH {
                        let p = dist.passive(s, u, k, m);
                        acc += k.sign() * p;
                        if k == Outcome::Plus {
                            plus += p;
                        }
                    }
                }
            }
            theta[s.index()][0] = 2.0 * acc / 3.0;
            worst = worst.max((plus / 3.0 - 0.5).abs());
        }
        for u in settings {
            let mut acc = 0.0;
            for s in settings {
                for k in Outcome::BOTH {
                    for m in Outcome::BOTH {
                        acc += m.sign() * dist.passive(s, u, k, m);
                    }
                }
            }
            theta[0][u.index()] = 2.0 * acc / 3.0;
        }
        if worst > tol {
            return Err(Error::SignallingRegime { deviation: worst });
        }
        Ok(Self::from_theta(theta).with_shots(shots))
    }

    pub fn from_theta(theta: [[f64; 4]; 4]) -> Self {
        let mut matrix = CMatrix::zeros(4, 4);
        for s in PauliIndex::ALL {
            for u in PauliIndex::ALL {
                let v = theta[s.index()][u.index()];
                if v != 0.0 {
                    matrix = &matrix + &kron(&pauli(s), &pauli(u)).scale(v / 4.0);
                }
            }
        }
        Self {
            matrix,
            theta,
            shots: None,
        }
    }

    fn with_shots(mut self, shots: Option<u64>) -> Self {
        self.shots = shots;
        self
    }

    pub fn layout() -> Layout {
        Layout::qubits(&[Sys::C, Sys::B])
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn theta(&self) -> &[[f64; 4]; 4] {
        &self.theta
    }

    pub fn shots(&self) -> Option<u64> {
        self.shots
    }

    /// 1e-9 on exact data, 3/√N on sampled data.
    pub fn witness_tolerance(&self) -> f64 {
        self.shots
            .map_or(EXACT_WITNESS_TOL, |n| 3.0 / (n as f64).sqrt())
    }

    /// 1e-6 on exact data, 3/√N on sampled data.
    pub fn axis_tolerance(&self) -> f64 {
        self.shots
            .map_or(EXACT_AXIS_TOL, |n| 3.0 / (n as f64).sqrt())
    }

    /// Smallest eigenvalue of X.
    pub fn positivity_margin(&self) -> f64 {
        linalg::min_eigenvalue(&self.matrix).expect("Hermitian by construction")
    }

    /// Smallest eigenvalue of X with the first factor transposed.
    pub fn ppt_margin(&self) -> f64 {
        let pt = partial_transpose(&self.matrix, &Self::layout(), Sys::C).expect("4x4");
        linalg::min_eigenvalue(&pt).expect("Hermitian by construction")
    }
}

pub fn conditional_operator_from_passive(
    dist: &Distribution,
) -> Result<ObservedConditionalOperator> {
    ObservedConditionalOperator::from_distribution(dist)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CausalVerdict {
    pub common_cause_explanation: bool,
    pub positivity_margin: f64,
    pub direct_cause_explanation: bool,
    pub ppt_margin: f64,
    /// C_11, C_22, C_33 with C_ss = Θ_ss/2
    pub correlations: [f64; 3],
    pub signature_product: f64,
}

/// Common cause needs X ⪰ 0; direct cause needs X^{T_first} ⪰ 0.
pub fn causal_verdict(x: &ObservedConditionalOperator) -> CausalVerdict {
    causal_verdict_with_tolerance(x, x.witness_tolerance())
}

pub fn causal_verdict_with_tolerance(x: &ObservedConditionalOperator, tol: f64) -> CausalVerdict {
    let positivity_margin = x.positivity_margin();
    let ppt_margin = x.ppt_margin();
    let correlations = [1, 2, 3].map(|s| x.theta[s][s] / 2.0);
    CausalVerdict {
        common_cause_explanation: positivity_margin >= -tol,
        positivity_margin,
        direct_cause_explanation: ppt_margin >= -tol,
        ppt_margin,
        correlations,
        signature_product: correlations.iter().product(),
    }
}

/// Outcome of the witness test under the promise that the mechanism is
/// purely one type.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WitnessVerdict {
    Common,
    Direct,
    /// Separable state or entanglement-breaking channel.
    Indistinguishable,
}

/// Entanglement forces a PPT failure and a coherent (non
/// entanglement-breaking) channel forces a positivity failure; whichever
/// fails names the mechanism.
pub fn entanglement_coherence_witness(x: &ObservedConditionalOperator) -> Result<WitnessVerdict> {
    let v = causal_verdict(x);
    match (v.common_cause_explanation, v.direct_cause_explanation) {
        (true, true) => Ok(WitnessVerdict::Indistinguishable),
        (true, false) => Ok(WitnessVerdict::Common),
        (false, true) => Ok(WitnessVerdict::Direct),
        (false, false) => Err(Error::NoExplanation {
            positivity_margin: v.positivity_margin,
            ppt_margin: v.ppt_margin,
        }),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Axis {
    pub dir: [f64; 3],
    pub len: f64,
}

/// Image of the early Bloch sphere: v ↦ c + T v. Rows of `t` index the
/// B-side Pauli, columns the early-side Pauli, so T[u][s] = Θ_su / 2.
#[derive(Clone, Debug, PartialEq)]
pub struct EllipsoidModel {
    pub c: [f64; 3],
    pub t: [[f64; 3]; 3],
    /// Principal axes from T Tᵀ, longest first.
    pub axes: [Axis; 3],
    pub det: f64,
    shots: Option<u64>,
}

fn to_m3(t: &[[f64; 3]; 3]) -> Matrix3<f64> {
    Matrix3::from_fn(|i, j| t[i][j])
}

fn from_m3(m: &Matrix3<f64>) -> [[f64; 3]; 3] {
    std::array::from_fn(|i| std::array::from_fn(|j| m[(i, j)]))
}

/// Flip `v` so that its first component above 1e-12 in magnitude is positive.
fn orient(v: Vector3<f64>) -> Vector3<f64> {
    match v.iter().find(|x| x.abs() > 1e-12) {
        Some(&x) if x < 0.0 => -v,
        _ => v,
    }
}

impl EllipsoidModel {
    pub fn new(c: [f64; 3], t: [[f64; 3]; 3]) -> Self {
        let m = to_m3(&t);
        let eig = SymmetricEigen::new(m * m.transpose());
        let mut order = [0, 1, 2];
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let axes = order.map(|k| {
            let v = orient(eig.eigenvectors.column(k).into_owned());
            Axis {
                dir: [v[0], v[1], v[2]],
                len: eig.eigenvalues[k].max(0.0).sqrt(),
            }
        });
        Self {
            c,
            t,
            axes,
            det: m.determinant(),
            shots: None,
        }
    }

    pub fn from_conditional(x: &ObservedConditionalOperator) -> Self {
        let th = x.theta();
        let c = [1, 2, 3].map(|u| th[0][u] / 2.0);
        let t = std::array::from_fn(|u| std::array::from_fn(|s| th[s + 1][u + 1] / 2.0));
        let mut e = Self::new(c, t);
        e.shots = x.shots();
        e
    }

    pub fn axis_tolerance(&self) -> f64 {
        self.shots
            .map_or(EXACT_AXIS_TOL, |n| 3.0 / (n as f64).sqrt())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data")
    }
}

impl Serialize for EllipsoidModel {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Out<'a> {
            c: &'a [f64; 3],
            #[serde(rename = "T")]
            t: &'a [[f64; 3]; 3],
            axes: &'a [Axis; 3],
            det: f64,
        }
        Out {
            c: &self.c,
            t: &self.t,
            axes: &self.axes,
            det: self.det,
        }
        .serialize(ser)
    }
}

pub fn ellipsoid_from_conditional(x: &ObservedConditionalOperator) -> EllipsoidModel {
    EllipsoidModel::from_conditional(x)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Extremal {
    Direct,
    Common,
    NotExtremal,
}

/// Unit sphere centred at the origin: a unitary channel (det T = +1) or a
/// pure maximally entangled state (det T = -1).
pub fn classify_extremal(e: &EllipsoidModel) -> Extremal {
    classify_extremal_with_tolerance(e, e.axis_tolerance())
}

pub fn classify_extremal_with_tolerance(e: &EllipsoidModel, tol: f64) -> Extremal {
    let unit = e.axes.iter().all(|a| (a.len - 1.0).abs() <= tol);
    let centred = e.c.iter().all(|x| x.abs() <= tol);
    if !(unit && centred) {
        Extremal::NotExtremal
    } else if e.det > 0.0 {
        Extremal::Direct
    } else {
        Extremal::Common
    }
}

/// Rotation by `angle` about unit axis `n` (right-handed).
pub fn rotation(n: &Vector3<f64>, angle: f64) -> Matrix3<f64> {
    let k = n.cross_matrix();
    Matrix3::identity() + k * angle.sin() + k * k * (1.0 - angle.cos())
}

/// Scaling by `a` along `n`.
fn scale_along(n: &Vector3<f64>, a: f64) -> Matrix3<f64> {
    Matrix3::identity() + n * n.transpose() * (a - 1.0)
}

/// Scaling by `a` in the plane orthogonal to `n`.
fn scale_across(n: &Vector3<f64>, a: f64) -> Matrix3<f64> {
    Matrix3::identity() * a + n * n.transpose() * (1.0 - a)
}

/// Solution of the promise problem T_m = (1-p) T_dc + p T_cc.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PromiseFit {
    pub p: f64,
    /// Short axis of the ellipsoid; `None` when all three axes coincide.
    pub n_hat: Option<[f64; 3]>,
    pub gamma: f64,
    pub gamma_prime: f64,
    /// Length of the two degenerate axes.
    pub r: f64,
    pub t_dc: Option<[[f64; 3]; 3]>,
    pub t_cc: Option<[[f64; 3]; 3]>,
    /// Both orientations of n̂ fit the data.
    pub ambiguous: bool,
    /// All axes equal: T_cc = -T_dc.
    pub degenerate: bool,
    /// |1-2p| too small to recover T_dc and T_cc.
    pub factors_refused: bool,
    #[serde(rename = "T_m")]
    pub t_m: [[f64; 3]; 3],
}

impl PromiseFit {
    /// ‖(1-p) T_dc + p T_cc - T_m‖_F, if the factors were recovered.
    pub fn residual(&self) -> Option<f64> {
        let (dc, cc) = (self.t_dc?, self.t_cc?);
        let m = to_m3(&dc) * (1.0 - self.p) + to_m3(&cc) * self.p - to_m3(&self.t_m);
        Some(m.norm())
    }

    /// The other branch: same (p, γ, γ′) with n̂ reversed, i.e.
    /// T_dc′ = R(n̂, 2γ′) T_dc and T_cc′ = R(n̂, -γ) H_n̂ T_dc′ where H_n̂
    /// reflects along n̂. Only defined when the fit is ambiguous.
    pub fn alternate(&self) -> Option<PromiseFit> {
        if !self.ambiguous {
            return None;
        }
        let n = Vector3::from(self.n_hat?);
        let mut alt = self.clone();
        alt.n_hat = Some((-n).into());
        if let Some(dc) = self.t_dc {
            let dc2 = rotation(&n, 2.0 * self.gamma_prime) * to_m3(&dc);
            let cc2 = rotation(&n, -self.gamma) * scale_along(&n, -1.0) * dc2;
            alt.t_dc = Some(from_m3(&dc2));
            alt.t_cc = Some(from_m3(&cc2));
        }
        Some(alt)
    }
}

/// Recover (p, n̂, γ, γ′, T_dc, T_cc) from the ellipsoid of a promised
/// mixture. The short axis gives n̂ and |1-2p|, the sign of det T picks the
/// branch p < ½ or p > ½, the degenerate pair has length r with
/// sin²(γ/2) = (1 - r²) / (4p(1-p)), and
/// T_dc = R(n̂,-γ′) S⊥(1/r) Sn̂(1/(1-2p)) T_m,
/// T_cc = R(n̂,γ-γ′) S⊥(1/r) Sn̂(1/(2p-1)) T_m.
pub fn recover_promise_mixture(e: &EllipsoidModel) -> Result<PromiseFit> {
    recover_promise_mixture_with_tolerance(e, e.axis_tolerance())
}

pub fn recover_promise_mixture_with_tolerance(e: &EllipsoidModel, tol: f64) -> Result<PromiseFit> {
    if let Some(x) = e.c.iter().find(|x| x.abs() > tol) {
        return Err(Error::PromiseViolation(format!(
            "ellipsoid centre is off the origin by {x:.3e}"
        )));
    }
    let [long, mid, short] = e.axes;
    if long.len - mid.len > tol {
        return Err(Error::PromiseViolation(format!(
            "no degenerate pair of axes: lengths {:.6}, {:.6}, {:.6}",
            long.len, mid.len, short.len
        )));
    }
    let t_m = to_m3(&e.t);
    let scale = short.len;
    let p = if e.det > 0.0 {
        (1.0 - scale) / 2.0
    } else if e.det < 0.0 {
        (1.0 + scale) / 2.0
    } else {
        0.5
    };
    let r = (0.5 * (long.len * long.len + mid.len * mid.len)).sqrt();
    let degenerate = r - scale <= tol;
    let factors_refused = (1.0 - 2.0 * p).abs() < MIN_FACTOR_SCALE.max(tol);

    let pq = p * (1.0 - p);
    let (gamma, gamma_prime) = if degenerate {
        (PI, if p < 0.5 { 0.0 } else { PI })
    } else if pq > 0.0 {
        let s2 = ((1.0 - r * r) / (4.0 * pq)).clamp(0.0, 1.0);
        let g = 2.0 * s2.sqrt().asin();
        // r cos γ′ = (1-p) + p cos γ, r sin γ′ = p sin γ
        (g, (p * g.sin()).atan2(1.0 - p + p * g.cos()))
    } else {
        (0.0, 0.0)
    };
    let n = Vector3::from(short.dir);

    let (t_dc, t_cc) = if factors_refused {
        (None, None)
    } else if degenerate {
        let dc = t_m / (1.0 - 2.0 * p);
        (Some(from_m3(&dc)), Some(from_m3(&-dc)))
    } else {
        let a = scale_across(&n, 1.0 / r) * scale_along(&n, 1.0 / (1.0 - 2.0 * p)) * t_m;
        let dc = rotation(&n, -gamma_prime) * a;
        let cc = rotation(&n, gamma - gamma_prime) * scale_along(&n, -1.0) * a;
        (Some(from_m3(&dc)), Some(from_m3(&cc)))
    };

    Ok(PromiseFit {
        p,
        n_hat: (!degenerate).then(|| short.dir),
        gamma,
        gamma_prime,
        r,
        t_dc,
        t_cc,
        ambiguous: !degenerate && gamma > tol && gamma < PI - tol,
        degenerate,
        factors_refused,
        t_m: e.t,
    })
}

/// T (rows B, columns early system) of the unitary channel ρ ↦ UρU†:
/// R_us = ½ Tr[σ_u U σ_s U†].
pub fn unitary_bloch_matrix(u: &CMatrix) -> [[f64; 3]; 3] {
    let ud = u.dagger();
    std::array::from_fn(|i| {
        std::array::from_fn(|j| {
            let su = pauli(PauliIndex::SETTINGS[i]);
            let ss = pauli(PauliIndex::SETTINGS[j]);
            0.5 * su.trace_product(&(&(u * &ss) * &ud)).re
        })
    })
}
