//! Constrained least-squares fit of the mixture model
//! `p·ρ_CB ⊗ 1_D + (1-p)·ρ_C ⊗ ρ_{B|D}` to count tables of either scheme.
//!
//! The model is parametrized by unnormalized ρ̃_CB = pNρ_CB and
//! ρ̃_C = (1-p)Nρ_C (Cholesky forms) and a PPT ρ_{B|D}. The objective is the
//! Pearson residue between predicted and observed counts plus two penalties:
//! λ(|r_CB|²/(|r_CB|²+|r_C|²) - p)² and λ Σ|(Tr_B ρ_{B|D} - 1_D)_ij|².

mod optimize;
mod param;

use std::fmt::Write as _;
use std::sync::OnceLock;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

pub use optimize::{levenberg_marquardt, nelder_mead, Minimum};
pub use param::{
    cholesky_build, cholesky_params, lower_triangular, ppt_channel_build, ParamVector, BD_LEN,
    CB_LEN, C_LEN, PARAM_LEN,
};

use crate::causal_map::CausalMap;
use crate::error::{Error, Result};
use crate::linalg::{self, kron, partial_transpose, CMatrix, Sys, C64};
use crate::passive::{
    ellipsoid_from_conditional, recover_promise_mixture_with_tolerance, ObservedConditionalOperator,
};
use crate::qubit::{pauli, ChannelOperator, DensityOperator, PauliIndex};
use crate::scenario::{substream_seed, CountTable, Distribution, Scheme};
use crate::serial::OperatorJson;
use crate::tomography::correlators_from_distribution;

/// Floor on predicted counts in the χ² denominator.
pub const PREDICTION_FLOOR: f64 = 1e-9;
pub const DEFAULT_LAMBDA: f64 = 1e7;
const POLISH_ITERATIONS: usize = 20;
const FROZEN_ROUNDS: usize = 10;
const ROUND_ITERATIONS: usize = 15;

/// Observed counts per cell; either integer counts or N times exact
/// probabilities.
#[derive(Clone, Debug, PartialEq)]
pub struct Observations {
    scheme: Scheme,
    n: f64,
    counts: Vec<f64>,
}

impl Observations {
    pub fn from_counts(table: &CountTable) -> Self {
        Self {
            scheme: table.scheme(),
            n: table.shots() as f64,
            counts: table.counts().iter().map(|&c| c as f64).collect(),
        }
    }

    /// Noise-free counts N·P.
    pub fn exact(dist: &Distribution, n: f64) -> Result<Self> {
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::ZeroShots);
        }
        Ok(Self {
            scheme: dist.scheme(),
            n,
            counts: dist.probs().iter().map(|p| p * n).collect(),
        })
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn shots(&self) -> f64 {
        self.n
    }

    pub fn counts(&self) -> &[f64] {
        &self.counts
    }

    pub fn frequencies(&self) -> Result<Distribution> {
        Distribution::new(
            self.scheme,
            self.counts.iter().map(|c| c / self.n).collect(),
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    /// Damped Gauss-Newton on the residual vector.
    LevenbergMarquardt,
    /// Derivative-free simplex search on the scalar objective.
    NelderMead,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FitConfig {
    pub p_target: f64,
    pub lambda: f64,
    /// Iterations for Levenberg-Marquardt, objective evaluations for
    /// Nelder-Mead.
    pub max_iterations: usize,
    /// Improvement, relative to max(objective, 1), below which a run counts
    /// as converged.
    pub tolerance: f64,
    pub seed: u64,
    /// Perturbed restarts on top of the deterministic starting points.
    pub restarts: usize,
    pub optimizer: Optimizer,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            p_target: 0.5,
            lambda: DEFAULT_LAMBDA,
            max_iterations: 100,
            tolerance: 1e-4,
            seed: 0,
            restarts: 2,
            optimizer: Optimizer::LevenbergMarquardt,
        }
    }
}

impl FitConfig {
    pub fn with_p(p_target: f64) -> Self {
        Self {
            p_target,
            ..Self::default()
        }
    }

    fn check(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p_target) {
            return Err(Error::OutOfRange {
                what: "p_target",
                value: self.p_target,
            });
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::OutOfRange {
                what: "lambda",
                value: self.lambda,
            });
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug)]
struct Cell {
    s: usize,
    t: usize,
    u: usize,
    k: f64,
    l: f64,
    m: f64,
}

fn cells(scheme: Scheme) -> Vec<Cell> {
    let mut out = Vec::with_capacity(scheme.cell_count());
    for tuple in scheme.tuples() {
        for k in crate::qubit::Outcome::BOTH {
            for m in crate::qubit::Outcome::BOTH {
                let (t, l) = tuple.preparation(k);
                out.push(Cell {
                    s: tuple.s.index(),
                    t: t.index(),
                    u: tuple.u.index(),
                    k: k.sign(),
                    l: l.sign(),
                    m: m.sign(),
                });
            }
        }
    }
    out
}

fn pauli_pairs() -> &'static [CMatrix] {
    static PAIRS: OnceLock<Vec<CMatrix>> = OnceLock::new();
    PAIRS.get_or_init(|| {
        let mut v = Vec::with_capacity(16);
        for a in PauliIndex::ALL {
            for b in PauliIndex::ALL {
                v.push(kron(&pauli(a), &pauli(b)));
            }
        }
        v
    })
}

/// σ_a ⊗ σ_b has one nonzero entry per row: (column, value) for each row.
fn pauli_pair_entries() -> &'static [[(usize, C64); 4]; 16] {
    static ENTRIES: OnceLock<[[(usize, C64); 4]; 16]> = OnceLock::new();
    ENTRIES.get_or_init(|| {
        let pairs = pauli_pairs();
        std::array::from_fn(|k| {
            std::array::from_fn(|r| {
                (0..4)
                    .map(|c| (c, pairs[k][(r, c)]))
                    .find(|(_, v)| v.norm() > 0.0)
                    .expect("one entry per row")
            })
        })
    })
}

/// Tr[M σ_a ⊗ σ_b], indexed [a][b].
fn components2(m: &CMatrix) -> [[f64; 4]; 4] {
    let entries = pauli_pair_entries();
    std::array::from_fn(|a| {
        std::array::from_fn(|b| {
            entries[a * 4 + b]
                .iter()
                .enumerate()
                .map(|(r, &(c, v))| (m[(c, r)] * v).re)
                .sum()
        })
    })
}

fn components1(m: &CMatrix) -> [f64; 4] {
    let (a, b, c, d) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
    [(a + d).re, (b + c).re, (c - b).im, (a - d).re]
}

struct Blocks {
    cb: [[f64; 4]; 4],
    c: [f64; 4],
    /// [u][t]: B index first
    bd: [[f64; 4]; 4],
}

fn blocks(x: &[f64]) -> Blocks {
    let (r_cb, rest) = x.split_at(CB_LEN);
    let (r_c, r_bd) = rest.split_at(C_LEN);
    Blocks {
        cb: components2(&cholesky_build(r_cb, 4).expect("fixed length")),
        c: components1(&cholesky_build(r_c, 2).expect("fixed length")),
        bd: components2(&ppt_channel_build(r_bd).expect("fixed length")),
    }
}

fn predict_into(cells: &[Cell], b: &Blocks, out: &mut [f64]) {
    for (cell, o) in cells.iter().zip(out.iter_mut()) {
        let Cell { s, t, u, k, l, m } = *cell;
        let cc = 0.25 * (b.cb[0][0] + k * b.cb[s][0] + m * b.cb[0][u] + k * m * b.cb[s][u]);
        let c = 0.5 * (b.c[0] + k * b.c[s]);
        let bd = 0.25 * (b.bd[0][0] + m * b.bd[u][0] + l * b.bd[0][t] + m * l * b.bd[u][t]);
        *o = cc + c * bd;
    }
}

/// Predicted counts P̃ for every cell of `scheme`, in the cell order of
/// [`crate::scenario::cell_index`]. Passive cells use (t, l) = (s, k).
pub fn predicted_counts(params: &ParamVector, scheme: Scheme) -> Vec<f64> {
    let cells = cells(scheme);
    let mut out = vec![0.0; cells.len()];
    predict_into(&cells, &blocks(&params.to_vec()), &mut out);
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ChiSquared {
    pub principal: f64,
    pub ratio_penalty: f64,
    pub total_probability_penalty: f64,
    pub total: f64,
}

/// Penalty residuals before weighting by λ.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PenaltyResiduals {
    /// |r_CB|²/(|r_CB|²+|r_C|²) - p_target
    pub trace_ratio: f64,
    /// Frobenius norm of Tr_B ρ_{B|D} - 1_D
    pub total_probability: f64,
}

struct Model<'a> {
    cells: Vec<Cell>,
    observed: &'a [f64],
    lambda: f64,
    p_target: f64,
    /// Fixed χ² denominators; `None` uses the current predictions.
    weights: Option<Vec<f64>>,
}

impl<'a> Model<'a> {
    fn new(obs: &'a Observations, config: &FitConfig) -> Self {
        Self {
            cells: cells(obs.scheme),
            observed: &obs.counts,
            lambda: config.lambda,
            p_target: config.p_target,
            weights: None,
        }
    }

    fn predictions(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cells.len()];
        predict_into(&self.cells, &blocks(x), &mut out);
        out
    }

    /// Same objective with denominators frozen at the predictions for `x`.
    fn frozen_at(&self, x: &[f64]) -> Self {
        let w = self
            .predictions(x)
            .into_iter()
            .map(|f| f.max(PREDICTION_FLOOR))
            .collect();
        Self {
            cells: self.cells.clone(),
            observed: self.observed,
            lambda: self.lambda,
            p_target: self.p_target,
            weights: Some(w),
        }
    }

    fn cost(&self, x: &[f64]) -> f64 {
        let mut r = vec![0.0; self.residual_len()];
        self.residuals(x, &mut r);
        r.iter().map(|v| v * v).sum()
    }

    fn residual_len(&self) -> usize {
        self.cells.len() + 5
    }

    fn residuals(&self, x: &[f64], out: &mut [f64]) {
        let ratio = param::trace_ratio(&x[..CB_LEN], &x[CB_LEN..CB_LEN + C_LEN]);
        self.residuals_from(&blocks(x), ratio, out);
    }

    fn residuals_from(&self, b: &Blocks, ratio: f64, out: &mut [f64]) {
        let n = self.cells.len();
        predict_into(&self.cells, b, &mut out[..n]);
        match &self.weights {
            None => {
                for (r, &o) in out[..n].iter_mut().zip(self.observed) {
                    let f = *r;
                    *r = (f - o) / f.max(PREDICTION_FLOOR).sqrt();
                }
            }
            Some(w) => {
                for ((r, &o), &w) in out[..n].iter_mut().zip(self.observed).zip(w) {
                    *r = (*r - o) / w.sqrt();
                }
            }
        }
        out[n] = self.lambda.sqrt() * (ratio - self.p_target);
        // Σ|(Tr_B ρ - 1)_ij|² = ½[(C_00 - 2)² + Σ_t C_0t²]
        let h = (self.lambda / 2.0).sqrt();
        out[n + 1] = h * (b.bd[0][0] - 2.0);
        for t in 1..4 {
            out[n + 1 + t] = h * b.bd[0][t];
        }
    }

    fn breakdown(&self, x: &[f64]) -> (ChiSquared, PenaltyResiduals) {
        let mut r = vec![0.0; self.residual_len()];
        self.residuals(x, &mut r);
        let n = self.cells.len();
        let principal: f64 = r[..n].iter().map(|v| v * v).sum();
        let ratio_penalty = r[n] * r[n];
        let total_probability_penalty: f64 = r[n + 1..].iter().map(|v| v * v).sum();
        let tp_norm = (total_probability_penalty / self.lambda).sqrt();
        (
            ChiSquared {
                principal,
                ratio_penalty,
                total_probability_penalty,
                total: principal + ratio_penalty + total_probability_penalty,
            },
            PenaltyResiduals {
                trace_ratio: r[n] / self.lambda.sqrt(),
                total_probability: tp_norm,
            },
        )
    }
}

/// Search space in which both penalized constraints hold exactly:
/// (u, v, s, w) gives r_CB = s√p·u/|u|, r_C = s√(1-p)·v/|v|, and the channel
/// (1⊗K)(R_w†R_w)(1⊗K) partially transposed, K = (Tr_B R_w†R_w)^{-1/2}.
struct Reduced<'m, 'a> {
    model: &'m Model<'a>,
    p: f64,
}

const REDUCED_LEN: usize = PARAM_LEN + 1;
const SCALE_AT: usize = CB_LEN + C_LEN;

fn inverse_sqrt2(m: &CMatrix) -> CMatrix {
    let tr = m.trace().re;
    let det = (m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)]).re;
    let det = det.max(1e-24 * tr * tr).max(1e-300);
    let sd = det.sqrt();
    // √M = (M + √det·1)/√(Tr M + 2√det)
    let root = (m + &CMatrix::identity(2).scale(sd)).scale(1.0 / (tr + 2.0 * sd).sqrt());
    let rd = (root[(0, 0)] * root[(1, 1)] - root[(0, 1)] * root[(1, 0)]).re;
    let mut inv = CMatrix::zeros(2, 2);
    inv[(0, 0)] = root[(1, 1)] / rd;
    inv[(1, 1)] = root[(0, 0)] / rd;
    inv[(0, 1)] = -root[(0, 1)] / rd;
    inv[(1, 0)] = -root[(1, 0)] / rd;
    inv
}

impl Reduced<'_, '_> {
    /// ρ̃_CB, ρ̃_C and the pre-transpose channel factor (R†R on (B, D)).
    fn operators(&self, y: &[f64]) -> (CMatrix, CMatrix, CMatrix) {
        let u = &y[..CB_LEN];
        let v = &y[CB_LEN..SCALE_AT];
        let s2 = y[SCALE_AT] * y[SCALE_AT];
        let nu: f64 = u.iter().map(|a| a * a).sum();
        let nv: f64 = v.iter().map(|a| a * a).sum();
        let cb = cholesky_build(u, 4).expect("fixed length");
        let cb = if nu > 0.0 {
            cb.scale(self.p * s2 / nu)
        } else {
            cb
        };
        let c = cholesky_build(v, 2).expect("fixed length");
        let c = if nv > 0.0 {
            c.scale((1.0 - self.p) * s2 / nv)
        } else {
            c
        };
        let a = cholesky_build(&y[SCALE_AT + 1..], 4).expect("fixed length");
        let layout = ChannelOperator::layout();
        let (m, _) = linalg::partial_trace(&a, &layout, Sys::B).expect("4x4");
        let k = kron(&CMatrix::identity(2), &inverse_sqrt2(&m));
        (cb, c, &(&k * &a) * &k)
    }

    fn residuals(&self, y: &[f64], out: &mut [f64]) {
        let (cb, c, a) = self.operators(y);
        let mut bd = components2(&a);
        for row in &mut bd {
            // Tr[A^{T_D} σ_u⊗σ_t] = Tr[A σ_u⊗σ_t^T]
            row[2] = -row[2];
        }
        let tcb = cb.trace().re;
        let tc = c.trace().re;
        let ratio = if tcb + tc > 0.0 {
            tcb / (tcb + tc)
        } else {
            0.5
        };
        let b = Blocks {
            cb: components2(&cb),
            c: components1(&c),
            bd,
        };
        self.model.residuals_from(&b, ratio, out);
    }

    fn from_full(x: &[f64]) -> Vec<f64> {
        let norm: f64 = x[..SCALE_AT].iter().map(|a| a * a).sum();
        let mut y = Vec::with_capacity(REDUCED_LEN);
        y.extend_from_slice(&x[..SCALE_AT]);
        y.push(norm.sqrt());
        y.extend_from_slice(&x[SCALE_AT..]);
        y
    }

    fn to_full(&self, y: &[f64]) -> Option<Vec<f64>> {
        let (cb, c, a) = self.operators(y);
        let mut x = cholesky_params(&cb).ok()?;
        x.extend(cholesky_params(&c).ok()?);
        x.extend(cholesky_params(&a).ok()?);
        Some(x)
    }
}

/// Objective value and its parts for given parameters.
pub fn chi_squared(
    params: &ParamVector,
    observed: &Observations,
    config: &FitConfig,
) -> ChiSquared {
    Model::new(observed, config).breakdown(&params.to_vec()).0
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitResult {
    pub scheme: Scheme,
    pub config: FitConfig,
    /// Total objective (principal residue plus penalties).
    pub chi2: f64,
    pub breakdown: ChiSquared,
    pub penalty_residuals: PenaltyResiduals,
    pub params: ParamVector,
    /// |r_CB|²/(|r_CB|²+|r_C|²)
    pub p_reported: f64,
    pub rho_cb: CMatrix,
    pub rho_c: CMatrix,
    pub rho_bd: CMatrix,
    pub converged: bool,
    pub iterations: usize,
    pub evaluations: usize,
    /// Index of the winning start (0 is the unperturbed initial point).
    pub start: usize,
}

fn normalized(m: &CMatrix, fallback_dim: usize) -> CMatrix {
    let tr = m.trace().re;
    if tr > 1e-300 {
        m.scale(1.0 / tr)
    } else {
        CMatrix::identity(fallback_dim).scale(1.0 / fallback_dim as f64)
    }
}

impl FitResult {
    fn from_minimum(
        model: &Model,
        scheme: Scheme,
        config: &FitConfig,
        min: &Minimum,
        start: usize,
    ) -> Self {
        let params = ParamVector::from_slice(&min.x).expect("optimizer keeps length");
        let (breakdown, penalty_residuals) = model.breakdown(&min.x);
        Self {
            scheme,
            config: config.clone(),
            chi2: breakdown.total,
            breakdown,
            penalty_residuals,
            p_reported: params.trace_ratio(),
            rho_cb: normalized(&params.rho_cb_tilde(), 4),
            rho_c: normalized(&params.rho_c_tilde(), 2),
            rho_bd: params.rho_bd(),
            params,
            converged: min.converged,
            iterations: min.iterations,
            evaluations: min.evaluations,
            start,
        }
    }

    /// χ² of the principal residue per observed cell.
    pub fn chi2_per_cell(&self) -> f64 {
        self.breakdown.principal / self.scheme.cell_count() as f64
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        let op = |m: &CMatrix, labels: &[Sys]| {
            serde_json::to_value(OperatorJson::from_matrix(
                m,
                &crate::linalg::Layout::qubits(labels),
            ))
            .expect("plain data")
        };
        serde_json::json!({
            "scheme": self.scheme,
            "config": self.config,
            "chi2": self.chi2,
            "breakdown": self.breakdown,
            "penalty_residuals": self.penalty_residuals,
            "p_reported": self.p_reported,
            "params": self.params,
            "rho_cb": op(&self.rho_cb, &[Sys::C, Sys::B]),
            "rho_c": op(&self.rho_c, &[Sys::C]),
            "rho_bd": op(&self.rho_bd, &[Sys::B, Sys::D]),
            "converged": self.converged,
            "iterations": self.iterations,
            "evaluations": self.evaluations,
            "start": self.start,
        })
    }
}

fn state_from_components(comp: &[[f64; 4]; 4]) -> CMatrix {
    let pairs = pauli_pairs();
    let mut m = CMatrix::zeros(4, 4);
    for a in 0..4 {
        for b in 0..4 {
            if comp[a][b] != 0.0 {
                m = &m + &pairs[a * 4 + b].scale(comp[a][b] / 4.0);
            }
        }
    }
    m
}

/// Nearest PSD operator with the given trace, mixed with a little of the
/// identity so that the Cholesky factor starts at full rank.
fn regularize(m: &CMatrix, trace: f64) -> CMatrix {
    let d = m.rows();
    let p = linalg::psd_projection(&m.hermitian_part()).expect("Hermitian");
    let tr = p.trace().re;
    let base = if tr > 1e-12 {
        p.scale(1.0 / tr)
    } else {
        CMatrix::identity(d).scale(1.0 / d as f64)
    };
    let eta = 1e-6;
    (&base.scale(1.0 - eta) + &CMatrix::identity(d).scale(eta / d as f64)).scale(trace)
}

/// Start parameters from a normalized ρ_CB, ρ_C and an estimated channel
/// operator (B, D).
fn start_from(p: f64, n: f64, rho_cb: &CMatrix, rho_c: &CMatrix, rho_bd: &CMatrix) -> Vec<f64> {
    let pw = p.max(1e-4);
    let cb = regularize(rho_cb, pw * n);
    let c = regularize(rho_c, (1.0 - p).max(1e-4) * n);
    let layout = ChannelOperator::layout();
    let a = partial_transpose(rho_bd, &layout, Sys::D).expect("4x4");
    let a = regularize(&a, 2.0);
    let bd = partial_transpose(&a, &layout, Sys::D).expect("4x4");
    ParamVector::from_operators(&cb, &c, &bd)
        .expect("regularized operators are positive")
        .to_vec()
}

fn bloch_state(v: [f64; 3]) -> CMatrix {
    let mut m = CMatrix::identity(2);
    for (i, s) in PauliIndex::SETTINGS.into_iter().enumerate() {
        m = &m + &pauli(s).scale(v[i]);
    }
    m.scale(0.5)
}

fn channel_from_components(bd: &[[f64; 4]; 4]) -> CMatrix {
    // bd is [u][t]; the pair basis is (B, D)
    state_from_components(bd)
}

/// Deterministic starting points derived from linear estimates.
fn initial_points(obs: &Observations, p: f64) -> Result<Vec<Vec<f64>>> {
    let freq = obs.frequencies()?;
    let n = obs.n;
    let mut starts = Vec::new();
    match obs.scheme {
        Scheme::Interventionist => {
            let c = correlators_from_distribution(&freq)?;
            let v = c.values();
            let cs = [1, 2, 3].map(|s| v[s][0][0] / 2.0);
            let mut bd = [[0.0; 4]; 4];
            bd[0][0] = 2.0;
            for u in 1..4 {
                bd[u][0] = v[0][0][u];
            }
            let q = 1.0 - p;
            for t in 1..4 {
                for u in 0..4 {
                    bd[u][t] = if q > 0.02 { v[0][t][u] / q } else { 0.0 };
                }
            }
            let mut cb = [[0.0; 4]; 4];
            for s in 0..4 {
                for u in 0..4 {
                    let cs_s = if s == 0 { 1.0 } else { cs[s - 1] };
                    cb[s][u] = if p > 0.02 {
                        (v[s][0][u] - q * cs_s * bd[u][0]) / (2.0 * p)
                    } else {
                        0.0
                    };
                }
            }
            cb[0][0] = 1.0;
            starts.push(start_from(
                p,
                n,
                &state_from_components(&cb),
                &bloch_state(cs),
                &channel_from_components(&bd),
            ));
        }
        Scheme::Passive => {
            let x = ObservedConditionalOperator::from_distribution(&freq).or_else(|_| {
                Ok::<_, Error>(ObservedConditionalOperator::from_theta(theta_unchecked(
                    &freq,
                )))
            })?;
            let th = *x.theta();
            let cs = [1, 2, 3].map(|s| th[s][0] / 2.0);
            // naive split: both components carry the observed T
            let mut cb = [[0.0; 4]; 4];
            let mut bd = [[0.0; 4]; 4];
            for a in 0..4 {
                for b in 0..4 {
                    cb[a][b] = th[a][b] / 2.0;
                }
            }
            bd[0][0] = 2.0;
            for u in 1..4 {
                bd[u][0] = th[0][u];
                for t in 1..4 {
                    bd[u][t] = th[t][u];
                }
            }
            let e = ellipsoid_from_conditional(&x);
            let tol = (3.0 / n.sqrt()).max(1e-6);
            if let Ok(fit) = recover_promise_mixture_with_tolerance(&e, tol) {
                let branches = std::iter::once(fit.clone()).chain(fit.alternate());
                for b in branches {
                    if let (Some(dc), Some(cc)) = (b.t_dc, b.t_cc) {
                        let mut cb2 = cb;
                        let mut bd2 = bd;
                        for u in 0..3 {
                            for s in 0..3 {
                                cb2[s + 1][u + 1] = cc[u][s];
                                bd2[u + 1][s + 1] = 2.0 * dc[u][s];
                            }
                        }
                        starts.push(start_from(
                            p,
                            n,
                            &state_from_components(&cb2),
                            &bloch_state(cs),
                            &channel_from_components(&bd2),
                        ));
                    }
                }
            }
            starts.push(start_from(
                p,
                n,
                &state_from_components(&cb),
                &bloch_state(cs),
                &channel_from_components(&bd),
            ));
        }
    }
    Ok(starts)
}

/// Θ without the uniform-marginal check, for starting points only.
fn theta_unchecked(freq: &Distribution) -> [[f64; 4]; 4] {
    let s3 = PauliIndex::SETTINGS;
    let mut th = [[0.0; 4]; 4];
    th[0][0] = 2.0;
    for s in s3 {
        for u in s3 {
            th[s.index()][u.index()] = 2.0 * freq.passive_correlation(s, u);
        }
    }
    for x in s3 {
        let mut ks = 0.0;
        let mut ms = 0.0;
        for y in s3 {
            for k in crate::qubit::Outcome::BOTH {
                for m in crate::qubit::Outcome::BOTH {
                    ks += k.sign() * freq.passive(x, y, k, m);
                    ms += m.sign() * freq.passive(y, x, k, m);
                }
            }
        }
        th[x.index()][0] = 2.0 * ks / 3.0;
        th[0][x.index()] = 2.0 * ms / 3.0;
    }
    th
}

fn perturb(x: &[f64], seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = x.to_vec();
    for (lo, hi) in [
        (0, CB_LEN),
        (CB_LEN, CB_LEN + C_LEN),
        (CB_LEN + C_LEN, PARAM_LEN),
    ] {
        let norm = x[lo..hi].iter().map(|v| v * v).sum::<f64>().sqrt();
        let scale = 0.2 * norm / ((hi - lo) as f64).sqrt();
        for v in &mut out[lo..hi] {
            let z: f64 = StandardNormal.sample(&mut rng);
            *v += scale * z;
        }
    }
    out
}

/// Levenberg-Marquardt in the constraint-satisfying search space, then a
/// short run on the penalized objective itself. The large penalty weight
/// makes the penalized landscape a narrow curved valley in which plain
/// damped steps crawl. Inside the search space the χ² denominators are
/// first frozen at the current predictions and refreshed between rounds:
/// near cells predicted at zero the Pearson residual behaves like a norm and
/// Gauss-Newton steps stall, while the frozen form stays polynomial.
fn staged_lm(model: &Model, x0: &[f64], config: &FitConfig) -> Minimum {
    let m = model.residual_len();
    let mut y = Reduced::from_full(x0);
    let exact = Reduced {
        model,
        p: config.p_target,
    };
    let cost_of = |y: &[f64]| {
        let mut r = vec![0.0; m];
        exact.residuals(y, &mut r);
        r.iter().map(|v| v * v).sum::<f64>()
    };
    let mut cost = cost_of(&y);
    let mut iterations = 0;
    let mut evaluations = 0;
    let mut settled = false;
    for _ in 0..FROZEN_ROUNDS {
        let budget = config.max_iterations.saturating_sub(iterations);
        if budget == 0 {
            break;
        }
        let frozen_model = model.frozen_at(&exact.to_full(&y).unwrap_or_else(|| x0.to_vec()));
        let frozen = Reduced {
            model: &frozen_model,
            p: config.p_target,
        };
        let run = levenberg_marquardt(
            |y, out| frozen.residuals(y, out),
            &y,
            m,
            budget.min(ROUND_ITERATIONS),
            config.tolerance,
        );
        iterations += run.iterations;
        evaluations += run.evaluations;
        let c = cost_of(&run.x);
        if !(c < cost) {
            settled = true;
            break;
        }
        let gain = (cost - c) / cost.max(1.0);
        y = run.x;
        cost = c;
        if gain < config.tolerance {
            settled = true;
            break;
        }
    }
    let inner = levenberg_marquardt(
        |y, out| exact.residuals(y, out),
        &y,
        m,
        config.max_iterations.saturating_sub(iterations).max(1),
        config.tolerance,
    );
    iterations += inner.iterations;
    evaluations += inner.evaluations;
    let start = exact
        .to_full(&inner.x)
        .filter(|x| model.cost(x) <= model.cost(x0))
        .unwrap_or_else(|| x0.to_vec());
    let polish = levenberg_marquardt(
        |x, out| model.residuals(x, out),
        &start,
        m,
        POLISH_ITERATIONS,
        config.tolerance,
    );
    Minimum {
        iterations: iterations + polish.iterations,
        evaluations: evaluations + polish.evaluations,
        converged: settled || inner.converged,
        ..polish
    }
}

/// Local minimization from each deterministic start and from `restarts`
/// perturbations of the first one; the lowest objective wins. Restart `i`
/// draws its perturbation from [`substream_seed`]`(config.seed, i)`.
pub fn fit(observed: &Observations, config: &FitConfig) -> Result<FitResult> {
    config.check()?;
    let model = Model::new(observed, config);
    let mut starts = initial_points(observed, config.p_target)?;
    let base = starts[0].clone();
    for i in 0..config.restarts {
        starts.push(perturb(&base, substream_seed(config.seed, i as u64)));
    }
    let m = model.residual_len();
    let mut best: Option<(Minimum, usize)> = None;
    for (i, x0) in starts.iter().enumerate() {
        let min = match config.optimizer {
            Optimizer::LevenbergMarquardt => staged_lm(&model, x0, config),
            Optimizer::NelderMead => {
                let mut buf = vec![0.0; m];
                nelder_mead(
                    |x| {
                        model.residuals(x, &mut buf);
                        buf.iter().map(|v| v * v).sum()
                    },
                    x0,
                    config.max_iterations,
                    config.tolerance,
                )
            }
        };
        if best.as_ref().is_none_or(|(b, _)| min.cost < b.cost) {
            best = Some((min, i));
        }
    }
    let (min, start) = best.expect("at least one start");
    Ok(FitResult::from_minimum(
        &model,
        observed.scheme,
        config,
        &min,
        start,
    ))
}

pub fn fit_counts(table: &CountTable, config: &FitConfig) -> Result<FitResult> {
    fit(&Observations::from_counts(table), config)
}

/// p·ρ_CB ⊗ 1_D + (1-p)·ρ_C ⊗ ρ_{B|D} with p the reported trace ratio.
/// Constituents must be valid within `tol` (the law of total probability is
/// only enforced by the penalty).
pub fn assemble_map(result: &FitResult, tol: f64) -> Result<CausalMap> {
    let cb = DensityOperator::with_tolerance(result.rho_cb.clone(), param::cb_layout(), tol)?;
    let c = DensityOperator::with_tolerance(
        result.rho_c.clone(),
        crate::linalg::Layout::qubits(&[Sys::C]),
        tol,
    )?;
    let ch = ChannelOperator::with_tolerance(result.rho_bd.clone(), tol)?;
    let p = result.p_reported;
    let m = &kron(cb.matrix(), &CMatrix::identity(2)).scale(p)
        + &kron(c.matrix(), ch.matrix()).scale(1.0 - p);
    CausalMap::from_raw(m)
}

/// One grid point of a p sweep.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepPoint {
    pub p_fit: f64,
    pub chi2: f64,
    pub seed: u64,
    pub converged: bool,
}

/// Independent fits at each grid value of p; point `i` is seeded with
/// [`substream_seed`]`(config.seed, i)`. Runs on the current rayon pool.
pub fn sweep_p(
    observed: &Observations,
    grid: &[f64],
    config: &FitConfig,
) -> Result<Vec<SweepPoint>> {
    grid.par_iter()
        .enumerate()
        .map(|(i, &p)| {
            let seed = substream_seed(config.seed, i as u64);
            let cfg = FitConfig {
                p_target: p,
                seed,
                ..config.clone()
            };
            let r = fit(observed, &cfg)?;
            Ok(SweepPoint {
                p_fit: p,
                chi2: r.chi2,
                seed,
                converged: r.converged,
            })
        })
        .collect()
}

/// Grid point with the smallest objective (first one on ties).
pub fn best_point(points: &[SweepPoint]) -> Option<&SweepPoint> {
    points
        .iter()
        .reduce(|a, b| if b.chi2 < a.chi2 { b } else { a })
}

/// `n + 1` evenly spaced values on [0, 1].
pub fn unit_grid(n: usize) -> Vec<f64> {
    (0..=n).map(|i| i as f64 / n as f64).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub p_exp: f64,
    pub p_fit: f64,
    pub chi2: f64,
    pub seed: u64,
    #[serde(rename = "N")]
    pub n: u64,
    pub scheme: Scheme,
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("p_exp,p_fit,chi2,seed,N,scheme\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.p_exp, r.p_fit, r.chi2, r.seed, r.n, r.scheme
        )
        .expect("string write");
    }
    out
}
