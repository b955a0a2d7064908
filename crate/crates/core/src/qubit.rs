//! Qubit primitives: Pauli basis, measurement projectors, Bell states, and the
//! validated state and channel operators built from them.

use std::f64::consts::FRAC_1_SQRT_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    self, kron, partial_trace, partial_transpose, CMatrix, Layout, Sys, C64, HERMITIAN_TOL, ONE,
    PSD_TOL, ZERO,
};

/// Index into `{1, σ1, σ2, σ3}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct PauliIndex(u8);

impl PauliIndex {
    pub const I: Self = Self(0);
    pub const X: Self = Self(1);
    pub const Y: Self = Self(2);
    pub const Z: Self = Self(3);

    /// All four indices, identity first.
    pub const ALL: [Self; 4] = [Self::I, Self::X, Self::Y, Self::Z];
    /// The measurement settings 1, 2, 3.
    pub const SETTINGS: [Self; 3] = [Self::X, Self::Y, Self::Z];

    pub fn new(v: u8) -> Result<Self> {
        if v > 3 {
            return Err(Error::OutOfRange {
                what: "Pauli index",
                value: v as f64,
            });
        }
        Ok(Self(v))
    }

    pub fn value(self) -> u8 {
        self.0
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl TryFrom<u8> for PauliIndex {
    type Error = Error;
    fn try_from(v: u8) -> Result<Self> {
        Self::new(v)
    }
}

impl From<PauliIndex> for u8 {
    fn from(p: PauliIndex) -> u8 {
        p.0
    }
}

/// Measurement or preparation outcome, ±1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "i8", into = "i8")]
pub enum Outcome {
    Plus,
    Minus,
}

impl Outcome {
    pub const BOTH: [Self; 2] = [Self::Plus, Self::Minus];

    pub fn new(v: i8) -> Result<Self> {
        match v {
            1 => Ok(Self::Plus),
            -1 => Ok(Self::Minus),
            _ => Err(Error::OutOfRange {
                what: "outcome",
                value: v as f64,
            }),
        }
    }

    pub fn value(self) -> i8 {
        match self {
            Self::Plus => 1,
            Self::Minus => -1,
        }
    }

    pub fn sign(self) -> f64 {
        self.value() as f64
    }

    /// 0 for +1, 1 for -1.
    pub fn index(self) -> usize {
        match self {
            Self::Plus => 0,
            Self::Minus => 1,
        }
    }
}

impl TryFrom<i8> for Outcome {
    type Error = Error;
    fn try_from(v: i8) -> Result<Self> {
        Self::new(v)
    }
}

impl From<Outcome> for i8 {
    fn from(o: Outcome) -> i8 {
        o.value()
    }
}

pub fn pauli(i: PauliIndex) -> CMatrix {
    let im = C64::new(0.0, 1.0);
    match i.0 {
        0 => CMatrix::identity(2),
        1 => CMatrix::from_rows([[ZERO, ONE], [ONE, ZERO]]),
        2 => CMatrix::from_rows([[ZERO, -im], [im, ZERO]]),
        _ => CMatrix::from_rows([[ONE, ZERO], [ZERO, -ONE]]),
    }
}

/// Π_{sk} = (1 + k σ_s)/2.
pub fn pauli_projector(s: PauliIndex, k: Outcome) -> Result<CMatrix> {
    if s == PauliIndex::I {
        return Err(Error::OutOfRange {
            what: "measurement setting",
            value: 0.0,
        });
    }
    Ok((&CMatrix::identity(2) + &pauli(s).scale(k.sign())).scale(0.5))
}

/// Unit eigenvector of σ_s with eigenvalue k; Π_{sk} = |v><v|.
pub fn pauli_eigenvector(s: PauliIndex, k: Outcome) -> Result<[C64; 2]> {
    let a = C64::new(FRAC_1_SQRT_2, 0.0);
    let sgn = k.sign();
    match s.0 {
        1 => Ok([a, a * sgn]),
        2 => Ok([a, C64::new(0.0, FRAC_1_SQRT_2 * sgn)]),
        3 => Ok(match k {
            Outcome::Plus => [ONE, ZERO],
            Outcome::Minus => [ZERO, ONE],
        }),
        _ => Err(Error::OutOfRange {
            what: "measurement setting",
            value: 0.0,
        }),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Bell {
    PhiPlus,
    PhiMinus,
    PsiPlus,
    PsiMinus,
}

impl Bell {
    pub const ALL: [Self; 4] = [Self::PhiPlus, Self::PhiMinus, Self::PsiPlus, Self::PsiMinus];

    pub fn vector(self) -> [C64; 4] {
        let a = C64::new(FRAC_1_SQRT_2, 0.0);
        match self {
            Self::PhiPlus => [a, ZERO, ZERO, a],
            Self::PhiMinus => [a, ZERO, ZERO, -a],
            Self::PsiPlus => [ZERO, a, a, ZERO],
            Self::PsiMinus => [ZERO, a, -a, ZERO],
        }
    }
}

pub fn bell_state(which: Bell) -> DensityOperator {
    // unnormalized ±1 amplitudes keep every entry exactly 0 or ±½
    let v = which.vector().map(|z| {
        if z.re == 0.0 {
            ZERO
        } else {
            C64::new(z.re.signum(), 0.0)
        }
    });
    DensityOperator::new(
        CMatrix::outer(&v).scale(0.5),
        Layout::qubits(&[Sys::C, Sys::B]),
    )
    .expect("Bell states are valid")
}

/// Hermitian, unit-trace, positive semi-definite operator.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityOperator {
    matrix: CMatrix,
    layout: Layout,
}

impl DensityOperator {
    pub fn new(matrix: CMatrix, layout: Layout) -> Result<Self> {
        Self::with_tolerance(matrix, layout, PSD_TOL)
    }

    /// Like [`DensityOperator::new`] with a custom floor on the smallest
    /// eigenvalue; used for estimates from finite data.
    pub fn with_tolerance(matrix: CMatrix, layout: Layout, psd_tol: f64) -> Result<Self> {
        if layout.dim() != matrix.rows() || !matrix.is_square() {
            return Err(Error::LayoutMismatch {
                layout: layout.dim(),
                matrix: matrix.rows(),
            });
        }
        let deviation = matrix.hermiticity_error();
        if deviation > HERMITIAN_TOL.max(psd_tol * 1e-2) {
            return Err(Error::NonHermitian { deviation });
        }
        let tr = matrix.trace();
        if (tr - ONE).norm() > 1e-9_f64.max(psd_tol * 1e-2) {
            return Err(Error::InvalidState(format!("trace {:.12} != 1", tr.re)));
        }
        let matrix = matrix.hermitian_part();
        let min = linalg::min_eigenvalue(&matrix)?;
        if min < -psd_tol {
            return Err(Error::NotPsd {
                min_eigenvalue: min,
            });
        }
        Ok(Self { matrix, layout })
    }

    pub fn pure(v: &[C64], layout: Layout) -> Result<Self> {
        let norm: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidState(format!("vector norm^2 {norm} != 1")));
        }
        Self::new(CMatrix::outer(v), layout)
    }

    pub fn maximally_mixed(labels: &[Sys]) -> Self {
        let layout = Layout::qubits(labels);
        let d = layout.dim();
        Self {
            matrix: CMatrix::identity(d).scale(1.0 / d as f64),
            layout,
        }
    }

    /// (1 + r·σ)/2 for a Bloch vector with |r| <= 1.
    pub fn from_bloch(r: [f64; 3], label: Sys) -> Result<Self> {
        let mut m = CMatrix::identity(2);
        for (i, s) in PauliIndex::SETTINGS.into_iter().enumerate() {
            m = &m + &crate::qubit::pauli(s).scale(r[i]);
        }
        Self::new(m.scale(0.5), Layout::qubits(&[label]))
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn partial_trace(&self, over: Sys) -> Result<DensityOperator> {
        let (m, l) = partial_trace(&self.matrix, &self.layout, over)?;
        Ok(Self {
            matrix: m.hermitian_part(),
            layout: l,
        })
    }

    /// Same matrix with the factor labels replaced.
    pub fn relabel(&self, labels: &[Sys]) -> Result<Self> {
        Ok(Self {
            matrix: self.matrix.clone(),
            layout: Layout::new(self.layout.dims().to_vec(), labels.to_vec())?,
        })
    }

    pub fn fidelity(&self, other: &Self) -> Result<f64> {
        linalg::fidelity(&self.matrix, &other.matrix)
    }
}

/// Jamiołkowski operator ρ_{B|D} of a single-qubit channel, ordered B ⊗ D.
///
/// The channel acts as `ρ_D ↦ Tr_D[ρ_{B|D} (1_B ⊗ ρ_D)]`. Valid operators
/// have a PSD partial transpose on D and satisfy `Tr_B ρ_{B|D} = 1_D`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelOperator {
    matrix: CMatrix,
}

impl ChannelOperator {
    pub fn layout() -> Layout {
        Layout::qubits(&[Sys::B, Sys::D])
    }

    pub fn new(matrix: CMatrix) -> Result<Self> {
        Self::with_tolerance(matrix, PSD_TOL)
    }

    pub fn with_tolerance(matrix: CMatrix, tol: f64) -> Result<Self> {
        if matrix.rows() != 4 || !matrix.is_square() {
            return Err(Error::LayoutMismatch {
                layout: 4,
                matrix: matrix.rows(),
            });
        }
        let deviation = matrix.hermiticity_error();
        if deviation > HERMITIAN_TOL.max(tol * 1e-2) {
            return Err(Error::NonHermitian { deviation });
        }
        let matrix = matrix.hermitian_part();
        let layout = Self::layout();
        let (tr_b, _) = partial_trace(&matrix, &layout, Sys::B)?;
        let tp = tr_b.max_abs_diff(&CMatrix::identity(2));
        if tp > tol {
            return Err(Error::InvalidChannel(format!(
                "Tr_B deviates from the identity by {tp:.3e}"
            )));
        }
        let min = linalg::min_eigenvalue(&partial_transpose(&matrix, &layout, Sys::D)?)?;
        if min < -tol {
            return Err(Error::InvalidChannel(format!(
                "partial transpose has eigenvalue {min:.3e}"
            )));
        }
        Ok(Self { matrix })
    }

    /// Jamiołkowski operator `Σ_ij f(|i><j|) ⊗ |j><i|` of a linear map on
    /// single-qubit operators.
    pub fn from_action(f: impl Fn(&CMatrix) -> CMatrix) -> Result<Self> {
        Self::new(jamiolkowski(2, f))
    }

    pub fn identity() -> Self {
        Self::unitary(&CMatrix::identity(2)).expect("identity is unitary")
    }

    /// ρ ↦ u ρ u^dag
    pub fn unitary(u: &CMatrix) -> Result<Self> {
        if u.rows() != 2 || !u.is_square() {
            return Err(Error::DimensionMismatch {
                expected: 2,
                actual: u.rows(),
            });
        }
        let deviation = (&u.dagger() * u).max_abs_diff(&CMatrix::identity(2));
        if deviation > 1e-10 {
            return Err(Error::NonUnitary { deviation });
        }
        let ud = u.dagger();
        Self::from_action(|rho| &(u * rho) * &ud)
    }

    /// ρ ↦ (1 - q) ρ + q 1/2
    pub fn depolarizing(q: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::OutOfRange {
                what: "depolarizing strength",
                value: q,
            });
        }
        Self::from_action(|rho| {
            &rho.scale(1.0 - q) + &CMatrix::identity(2).scale_c(rho.trace() * (0.5 * q))
        })
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn apply(&self, rho: &CMatrix) -> CMatrix {
        let (out, _) = partial_trace(
            &(&self.matrix * &kron(&CMatrix::identity(2), rho)),
            &Self::layout(),
            Sys::D,
        )
        .expect("4x4 channel operator");
        out
    }
}

/// `Σ_ij f(|i><j|) ⊗ |j><i|` for a map on `d_in`-dimensional operators.
pub(crate) fn jamiolkowski(d_in: usize, f: impl Fn(&CMatrix) -> CMatrix) -> CMatrix {
    let mut acc: Option<CMatrix> = None;
    for i in 0..d_in {
        for j in 0..d_in {
            let mut eij = CMatrix::zeros(d_in, d_in);
            eij[(i, j)] = ONE;
            let term = kron(&f(&eij), &eij.transpose());
            acc = Some(match acc {
                Some(a) => &a + &term,
                None => term,
            });
        }
    }
    acc.expect("d_in > 0")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{fidelity, min_eigenvalue};

    #[test]
    fn pauli_matrices() {
        assert_eq!(pauli(PauliIndex::I), CMatrix::identity(2));
        assert_eq!(
            pauli(PauliIndex::Z),
            CMatrix::from_real_diagonal(&[1.0, -1.0])
        );
        let y = pauli(PauliIndex::Y);
        assert!((&y * &y).max_abs_diff(&CMatrix::identity(2)) < 1e-15);
        assert!(PauliIndex::new(4).is_err());
        assert!(Outcome::new(0).is_err());
    }

    #[test]
    fn projectors() {
        let p = pauli_projector(PauliIndex::Z, Outcome::Plus).unwrap();
        assert_eq!(p, CMatrix::from_real_diagonal(&[1.0, 0.0]));
        let p = pauli_projector(PauliIndex::X, Outcome::Minus).unwrap();
        let h = C64::new(0.5, 0.0);
        assert!(p.max_abs_diff(&CMatrix::from_rows([[h, -h], [-h, h]])) < 1e-15);
        for s in PauliIndex::SETTINGS {
            let plus = pauli_projector(s, Outcome::Plus).unwrap();
            let minus = pauli_projector(s, Outcome::Minus).unwrap();
            assert!((&plus + &minus).max_abs_diff(&CMatrix::identity(2)) < 1e-15);
            assert!((&plus * &plus).max_abs_diff(&plus) < 1e-15);
            for k in Outcome::BOTH {
                let v = pauli_eigenvector(s, k).unwrap();
                let p = pauli_projector(s, k).unwrap();
                assert!(CMatrix::outer(&v).max_abs_diff(&p) < 1e-15);
            }
        }
        assert!(pauli_projector(PauliIndex::I, Outcome::Plus).is_err());
    }

    #[test]
    fn bell_states() {
        let phi = bell_state(Bell::PhiPlus);
        for over in [Sys::C, Sys::B] {
            let m = phi.partial_trace(over).unwrap();
            assert!(m.matrix().max_abs_diff(&CMatrix::identity(2).scale(0.5)) < 1e-15);
        }
        let overlap: C64 = Bell::PsiMinus
            .vector()
            .iter()
            .zip(Bell::PhiPlus.vector())
            .map(|(a, b)| a.conj() * b)
            .sum();
        assert!(overlap.norm() < 1e-15);
        assert!((fidelity(phi.matrix(), phi.matrix()).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identity_channel_is_swap() {
        let id = ChannelOperator::identity();
        let m = id.matrix();
        assert_eq!(m[(0, 0)], ONE);
        assert_eq!(m[(1, 2)], ONE);
        assert_eq!(m[(2, 1)], ONE);
        assert_eq!(m[(3, 3)], ONE);
        assert!((min_eigenvalue(m).unwrap() + 1.0).abs() < 1e-12);
        let rho = pauli_projector(PauliIndex::Y, Outcome::Minus).unwrap();
        assert!(id.apply(&rho).max_abs_diff(&rho) < 1e-15);
    }

    #[test]
    fn channel_validation() {
        assert!(ChannelOperator::new(CMatrix::identity(4)).is_err());
        assert!(ChannelOperator::new(CMatrix::identity(4).scale(0.5)).is_ok());
        assert!(ChannelOperator::depolarizing(0.3).is_ok());
        let bad = CMatrix::from_rows([[ONE, ONE], [ZERO, ONE]]);
        assert!(matches!(
            ChannelOperator::unitary(&bad),
            Err(Error::NonUnitary { .. })
        ));
    }

    #[test]
    fn density_validation() {
        let l = Layout::qubits(&[Sys::C]);
        assert!(DensityOperator::new(CMatrix::from_real_diagonal(&[1.0, 1.0]), l.clone()).is_err());
        assert!(
            DensityOperator::new(CMatrix::from_real_diagonal(&[1.5, -0.5]), l.clone()).is_err()
        );
        assert!(DensityOperator::new(CMatrix::from_real_diagonal(&[0.25, 0.75]), l).is_ok());
        assert!(DensityOperator::from_bloch([0.0, 0.6, 0.8], Sys::C).is_ok());
        assert!(DensityOperator::from_bloch([0.0, 0.9, 0.8], Sys::C).is_err());
    }
}
