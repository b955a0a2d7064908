//! The causal map E_{CB|D}, held as its Jamiołkowski operator ρ_{CB|D}.
//!
//! Factor order is always C ⊗ B ⊗ D. The map acts on an input state by
//! `E(ρ_D) = Tr_D[ρ_{CB|D} (1_CB ⊗ ρ_D)]`; a valid operator has total trace 2,
//! `Tr_CB ρ_{CB|D} = 1_D`, a C-marginal of the form `ρ_C ⊗ 1_D`, and a
//! positive Choi state `τ = ρ^{T_D} / 2`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{
    self, kron, kron_all, partial_trace, partial_transpose, CMatrix, Layout, Sys, HERMITIAN_TOL,
    PSD_TOL,
};
use crate::qubit::{pauli, ChannelOperator, DensityOperator, PauliIndex};

/// Residual threshold used by [`CausalMap::new`] and [`ValidityReport::is_valid`].
pub const MAP_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct CausalMap {
    matrix: CMatrix,
}

/// Distances of an operator from the causal-map constraints.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ValidityReport {
    /// max |Tr_CB ρ - 1_D|
    pub trace_preservation: f64,
    /// |Tr ρ - 2|
    pub total_trace: f64,
    /// max |Tr_B ρ - ρ_C ⊗ 1_D| for the closest ρ_C
    pub retrocausation: f64,
    /// smallest eigenvalue of the Choi matrix ρ^{T_D}/2
    pub choi_min_eigenvalue: f64,
}

impl ValidityReport {
    pub fn is_valid(&self, tol: f64) -> bool {
        self.trace_preservation <= tol
            && self.total_trace <= tol
            && self.retrocausation <= tol
            && self.choi_min_eigenvalue >= -tol
    }

    /// Linear constraints only; positivity is not checked.
    pub fn is_causal(&self, tol: f64) -> bool {
        self.trace_preservation <= tol && self.total_trace <= tol && self.retrocausation <= tol
    }
}

impl CausalMap {
    pub fn layout() -> Layout {
        Layout::qubits(&[Sys::C, Sys::B, Sys::D])
    }

    /// Validated constructor; every residual must be within [`MAP_TOL`].
    pub fn new(matrix: CMatrix) -> Result<Self> {
        let map = Self::from_raw(matrix)?;
        let report = map.validate();
        if !report.is_valid(MAP_TOL) {
            return Err(Error::InvalidMap(format!("{report:?}")));
        }
        Ok(map)
    }

    /// Accepts any Hermitian 8x8 operator; for estimates that may violate the
    /// constraints. Inspect [`CausalMap::validate`] before trusting it.
    pub fn from_raw(matrix: CMatrix) -> Result<Self> {
        if matrix.rows() != 8 || !matrix.is_square() {
            return Err(Error::LayoutMismatch {
                layout: 8,
                matrix: matrix.rows(),
            });
        }
        let deviation = matrix.hermiticity_error();
        if deviation > HERMITIAN_TOL {
            return Err(Error::NonHermitian { deviation });
        }
        Ok(Self {
            matrix: matrix.hermitian_part(),
        })
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// Tr[ρ (σ_s ⊗ σ_u ⊗ σ_t)]: the correlator C_{s't'u'} for this map.
    pub fn pauli_component(&self, s: PauliIndex, t: PauliIndex, u: PauliIndex) -> f64 {
        let op = kron_all(&[&pauli(s), &pauli(u), &pauli(t)]);
        self.matrix.trace_product(&op).re
    }

    pub fn validate(&self) -> ValidityReport {
        let layout = Self::layout();
        let (tr_c, l) = partial_trace(&self.matrix, &layout, Sys::C).expect("8x8");
        let (tr_cb, _) = partial_trace(&tr_c, &l, Sys::B).expect("4x4");
        let trace_preservation = tr_cb.max_abs_diff(&CMatrix::identity(2));
        let total_trace = (self.matrix.trace().re - 2.0).abs();

        let (c_d, l) = partial_trace(&self.matrix, &layout, Sys::B).expect("8x8");
        let (c_only, _) = partial_trace(&c_d, &l, Sys::D).expect("4x4");
        let product = kron(&c_only.scale(0.5), &CMatrix::identity(2));
        let retrocausation = c_d.max_abs_diff(&product);

        let choi_min_eigenvalue = linalg::min_eigenvalue(&self.choi_matrix()).unwrap_or(f64::NAN);
        ValidityReport {
            trace_preservation,
            total_trace,
            retrocausation,
            choi_min_eigenvalue,
        }
    }

    /// τ = ρ^{T_D} / 2, without any positivity check.
    pub fn choi_matrix(&self) -> CMatrix {
        partial_transpose(&self.matrix, &Self::layout(), Sys::D)
            .expect("8x8")
            .scale(0.5)
    }

    pub fn to_choi(&self) -> Result<ChoiState> {
        ChoiState::new(self.choi_matrix())
    }

    pub fn from_choi(choi: &ChoiState) -> Result<Self> {
        let m = partial_transpose(&choi.matrix, &Self::layout(), Sys::D)?.scale(2.0);
        Self::from_raw(m)
    }

    /// `E(ρ_D) = Tr_D[ρ_{CB|D} (1_CB ⊗ ρ_D)]`, an operator on C ⊗ B.
    pub fn apply_matrix(&self, rho_d: &CMatrix) -> Result<CMatrix> {
        if rho_d.rows() != 2 || !rho_d.is_square() {
            return Err(Error::DimensionMismatch {
                expected: 2,
                actual: rho_d.rows(),
            });
        }
        let full = &self.matrix * &kron(&CMatrix::identity(4), rho_d);
        Ok(partial_trace(&full, &Self::layout(), Sys::D)?.0)
    }

    pub fn apply(&self, rho_d: &DensityOperator) -> Result<DensityOperator> {
        if rho_d.layout().dim() != 2 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                actual: rho_d.layout().dim(),
            });
        }
        DensityOperator::new(
            self.apply_matrix(rho_d.matrix())?,
            Layout::qubits(&[Sys::C, Sys::B]),
        )
    }

    /// Tr_D ρ / 2: the CB state produced from a maximally mixed input.
    pub fn average_output(&self) -> CMatrix {
        partial_trace(&self.matrix, &Self::layout(), Sys::D)
            .expect("8x8")
            .0
            .scale(0.5)
    }
}

/// Unit-trace positive Choi state τ_CBD.
#[derive(Clone, Debug, PartialEq)]
pub struct ChoiState {
    matrix: CMatrix,
}

impl ChoiState {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        if matrix.rows() != 8 || !matrix.is_square() {
            return Err(Error::LayoutMismatch {
                layout: 8,
                matrix: matrix.rows(),
            });
        }
        let st = DensityOperator::new(matrix, CausalMap::layout())?;
        Ok(Self {
            matrix: st.into_matrix(),
        })
    }

    /// Closest Choi state to an estimated map: negative eigenvalues of
    /// `ρ^{T_D}/2` are clipped and the trace restored to one.
    pub fn nearest(map: &CausalMap) -> Result<Self> {
        let m = map.choi_matrix();
        let min = linalg::min_eigenvalue(&m)?;
        if min >= -PSD_TOL && (m.trace().re - 1.0).abs() <= 1e-9 {
            return Self::new(m);
        }
        let p = linalg::psd_projection(&m)?;
        let tr = p.trace().re;
        if tr <= 0.0 {
            return Err(Error::InvalidMap("Choi matrix has no positive part".into()));
        }
        Self::new(p.scale(1.0 / tr))
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn fidelity(&self, other: &Self) -> Result<f64> {
        linalg::fidelity(&self.matrix, &other.matrix)
    }
}

/// ρ_{CB|D} = ρ_CB ⊗ 1_D
pub fn make_cc_map(rho_cb: &DensityOperator) -> Result<CausalMap> {
    if rho_cb.layout().dim() != 4 {
        return Err(Error::InvalidState(
            "common cause needs a two-qubit state".into(),
        ));
    }
    CausalMap::new(kron(rho_cb.matrix(), &CMatrix::identity(2)))
}

/// ρ_{CB|D} = ρ_C ⊗ ρ_{B|D}
pub fn make_dc_map(rho_c: &DensityOperator, channel: &ChannelOperator) -> Result<CausalMap> {
    if rho_c.layout().dim() != 2 {
        return Err(Error::InvalidState(
            "ρ_C must be a single-qubit state".into(),
        ));
    }
    CausalMap::new(kron(rho_c.matrix(), channel.matrix()))
}

/// p·cc + (1-p)·dc
pub fn mix_maps(p: f64, cc: &CausalMap, dc: &CausalMap) -> Result<CausalMap> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::OutOfRange {
            what: "mixing probability",
            value: p,
        });
    }
    if p == 0.0 {
        return Ok(dc.clone());
    }
    if p == 1.0 {
        return Ok(cc.clone());
    }
    CausalMap::new(&cc.matrix.scale(p) + &dc.matrix.scale(1.0 - p))
}

/// Fidelity between the unit-trace Choi states of two maps. Estimated maps
/// whose Choi matrix is not positive are first replaced by the nearest Choi
/// state (see [`ChoiState::nearest`]).
pub fn choi_fidelity(a: &CausalMap, b: &CausalMap) -> Result<f64> {
    ChoiState::nearest(a)?.fidelity(&ChoiState::nearest(b)?)
}
