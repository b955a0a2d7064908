//! Dense complex linear algebra for the small operators (dimension 2, 4 or 8)
//! that appear throughout the toolkit.
//!
//! Matrices are stored row-major. Multi-qubit operators carry a [`Layout`]
//! that names each tensor factor, so partial traces and partial transposes
//! can be requested by subsystem rather than by position.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Maximum entrywise deviation from Hermiticity accepted by the eigen-solver.
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Eigenvalues down to `-PSD_TOL` are treated as zero.
pub const PSD_TOL: f64 = 1e-8;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);

/// Named tensor factor.
///
/// `C` is the early system before the measurement, `D` the same system after
/// the repreparation and `B` the late system. `E` and `F` are the ancilla
/// input and the discarded output of the scenario circuits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sys {
    C,
    B,
    D,
    E,
    F,
}

impl fmt::Display for Sys {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// Ordered tensor-factor structure of an operator.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    dims: Vec<usize>,
    labels: Vec<Sys>,
}

impl Layout {
    pub fn new(dims: Vec<usize>, labels: Vec<Sys>) -> Result<Self> {
        if dims.len() != labels.len() {
            return Err(Error::Format(format!(
                "{} dims but {} labels",
                dims.len(),
                labels.len()
            )));
        }
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::Format("zero-dimensional factor".into()));
        }
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return Err(Error::Format(format!("duplicate label {l}")));
            }
        }
        Ok(Self { dims, labels })
    }

    /// Layout made only of qubits.
    pub fn qubits(labels: &[Sys]) -> Self {
        Self::new(vec![2; labels.len()], labels.to_vec()).expect("distinct qubit labels")
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn labels(&self) -> &[Sys] {
        &self.labels
    }

    pub fn dim(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn position(&self, label: Sys) -> Result<usize> {
        self.labels
            .iter()
            .position(|&l| l == label)
            .ok_or(Error::UnknownSubsystem(label))
    }

    /// The layout with one factor removed.
    pub fn without(&self, label: Sys) -> Result<Self> {
        let k = self.position(label)?;
        let mut dims = self.dims.clone();
        let mut labels = self.labels.clone();
        dims.remove(k);
        labels.remove(k);
        Ok(Self { dims, labels })
    }

    fn check(&self, m: &CMatrix) -> Result<()> {
        if !m.is_square() || m.rows() != self.dim() {
            return Err(Error::LayoutMismatch {
                layout: self.dim(),
                matrix: m.rows(),
            });
        }
        Ok(())
    }

    /// (outer, inner, d) so that a flat index splits as
    /// `(outer_idx * d + digit) * inner + inner_idx`.
    fn split(&self, k: usize) -> (usize, usize, usize) {
        let outer = self.dims[..k].iter().product();
        let inner = self.dims[k + 1..].iter().product();
        (outer, inner, self.dims[k])
    }
}

/// Dense complex matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Format("empty matrix".into()));
        }
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                actual: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// Square matrix from nested rows; panics on ragged input.
    pub fn from_rows<const N: usize>(rows: [[C64; N]; N]) -> Self {
        Self {
            rows: N,
            cols: N,
            data: rows.into_iter().flatten().collect(),
        }
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = C64::new(d, 0.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// |v><v|
    pub fn outer(v: &[C64]) -> Self {
        Self::from_fn(v.len(), v.len(), |i, j| v[i] * v[j].conj())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn dim(&self) -> usize {
        self.rows
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn dagger(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|z| z * s)
    }

    pub fn scale_c(&self, s: C64) -> Self {
        self.map(|z| z * s)
    }

    pub fn map(&self, f: impl Fn(C64) -> C64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| f(z)).collect(),
        }
    }

    /// Largest entrywise modulus.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn hermiticity_error(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut worst: f64 = 0.0;
        for i in 0..self.rows {
            for j in i..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_error() <= tol
    }

    /// Hermitian part, (m + m^dag)/2.
    pub fn hermitian_part(&self) -> Self {
        (self + &self.dagger()).scale(0.5)
    }

    /// Tr(self * other).
    pub fn trace_product(&self, other: &Self) -> C64 {
        assert_eq!(self.cols, other.rows);
        assert_eq!(self.rows, other.cols);
        let mut acc = ZERO;
        for i in 0..self.rows {
            for k in 0..self.cols {
                acc += self[(i, k)] * other[(k, i)];
            }
        }
        acc
    }

    /// <v| self |v>
    pub fn expectation(&self, v: &[C64]) -> C64 {
        let mut acc = ZERO;
        for i in 0..self.rows {
            let mut row = ZERO;
            for j in 0..self.cols {
                row += self[(i, j)] * v[j];
            }
            acc += v[i].conj() * row;
        }
        acc
    }

    fn to_nalgebra(&self) -> DMatrix<C64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.cols + j]
    }
}

impl Add for &CMatrix {
    type Output = CMatrix;
    fn add(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl Sub for &CMatrix {
    type Output = CMatrix;
    fn sub(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

impl Mul for &CMatrix {
    type Output = CMatrix;
    fn mul(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(self.cols, rhs.rows);
        let mut out = CMatrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == ZERO {
                    continue;
                }
                for j in 0..rhs.cols {
                    out.data[i * rhs.cols + j] += a * rhs[(k, j)];
                }
            }
        }
        out
    }
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (br, bc) = (b.rows, b.cols);
    CMatrix::from_fn(a.rows * br, a.cols * bc, |i, j| {
        a[(i / br, j / bc)] * b[(i % br, j % bc)]
    })
}

/// Kronecker product of a list of factors, left to right.
pub fn kron_all(factors: &[&CMatrix]) -> CMatrix {
    let mut it = factors.iter();
    let first = (*it.next().expect("at least one factor")).clone();
    it.fold(first, |acc, f| kron(&acc, f))
}

/// Trace over the factor `over`, returning the reduced operator and layout.
pub fn partial_trace(m: &CMatrix, layout: &Layout, over: Sys) -> Result<(CMatrix, Layout)> {
    layout.check(m)?;
    let k = layout.position(over)?;
    let (outer, inner, d) = layout.split(k);
    let n = outer * inner;
    let mut out = CMatrix::zeros(n, n);
    for ro in 0..outer {
        for ri in 0..inner {
            for co in 0..outer {
                for ci in 0..inner {
                    let mut acc = ZERO;
                    for j in 0..d {
                        acc += m[((ro * d + j) * inner + ri, (co * d + j) * inner + ci)];
                    }
                    out[(ro * inner + ri, co * inner + ci)] = acc;
                }
            }
        }
    }
    Ok((out, layout.without(over)?))
}

/// Transpose on the factor `on` only.
pub fn partial_transpose(m: &CMatrix, layout: &Layout, on: Sys) -> Result<CMatrix> {
    layout.check(m)?;
    let k = layout.position(on)?;
    let (_, inner, d) = layout.split(k);
    let n = m.rows;
    let digit = |i: usize| (i / inner) % d;
    Ok(CMatrix::from_fn(n, n, |r, c| {
        let (dr, dc) = (digit(r), digit(c));
        let r2 = r - dr * inner + dc * inner;
        let c2 = c - dc * inner + dr * inner;
        m[(r2, c2)]
    }))
}

/// Reorder tensor factors so that the result has factor order `order`.
pub fn permute(m: &CMatrix, layout: &Layout, order: &[Sys]) -> Result<(CMatrix, Layout)> {
    layout.check(m)?;
    if order.len() != layout.labels.len() {
        return Err(Error::Format("permutation must name every factor".into()));
    }
    let src: Vec<usize> = order
        .iter()
        .map(|&l| layout.position(l))
        .collect::<Result<_>>()?;
    let new_dims: Vec<usize> = src.iter().map(|&k| layout.dims[k]).collect();
    let new_layout = Layout::new(new_dims.clone(), order.to_vec())?;
    let n = m.rows;
    let nf = layout.dims.len();

    // maps an index in the new ordering to the old flat index
    let to_old = |idx: usize| {
        let mut digits = vec![0usize; nf];
        let mut rem = idx;
        for p in (0..nf).rev() {
            digits[src[p]] = rem % new_dims[p];
            rem /= new_dims[p];
        }
        digits
            .iter()
            .zip(&layout.dims)
            .fold(0, |acc, (&dg, &dm)| acc * dm + dg)
    };
    let map: Vec<usize> = (0..n).map(to_old).collect();
    Ok((
        CMatrix::from_fn(n, n, |i, j| m[(map[i], map[j])]),
        new_layout,
    ))
}

/// Eigen-decomposition of a Hermitian matrix.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    /// Sorted descending.
    pub values: Vec<f64>,
    /// Column `i` is the eigenvector for `values[i]`; first non-negligible
    /// entry of each column is real and positive.
    pub vectors: CMatrix,
}

impl HermitianEigen {
    pub fn vector(&self, i: usize) -> Vec<C64> {
        (0..self.vectors.rows)
            .map(|r| self.vectors[(r, i)])
            .collect()
    }

    /// V f(Λ) V^dag
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        let n = self.values.len();
        let mut out = CMatrix::zeros(n, n);
        for (k, &lam) in self.values.iter().enumerate() {
            let w = f(lam);
            if w == 0.0 {
                continue;
            }
            for i in 0..n {
                let vik = self.vectors[(i, k)] * w;
                for j in 0..n {
                    out[(i, j)] += vik * self.vectors[(j, k)].conj();
                }
            }
        }
        out
    }
}

pub fn hermitian_eig(m: &CMatrix) -> Result<HermitianEigen> {
    let deviation = m.hermiticity_error();
    if deviation > HERMITIAN_TOL {
        return Err(Error::NonHermitian { deviation });
    }
    let n = m.rows;
    let eig = m.hermitian_part().to_nalgebra().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let mut vectors = CMatrix::zeros(n, n);
    for (col, &k) in order.iter().enumerate() {
        let v = eig.eigenvectors.column(k);
        let phase = v
            .iter()
            .find(|z| z.norm() > 1e-12)
            .map(|z| z.conj() / z.norm())
            .unwrap_or(ONE);
        for r in 0..n {
            vectors[(r, col)] = v[r] * phase;
        }
    }
    Ok(HermitianEigen {
        values: order.iter().map(|&k| eig.eigenvalues[k]).collect(),
        vectors,
    })
}

pub fn min_eigenvalue(m: &CMatrix) -> Result<f64> {
    Ok(*hermitian_eig(m)?.values.last().expect("non-empty"))
}

/// Principal square root of a positive semi-definite matrix.
pub fn psd_sqrt(m: &CMatrix) -> Result<CMatrix> {
    let eig = hermitian_eig(m)?;
    let min = *eig.values.last().expect("non-empty");
    if min < -PSD_TOL {
        return Err(Error::NotPsd {
            min_eigenvalue: min,
        });
    }
    Ok(eig.reconstruct_with(|l| l.max(0.0).sqrt()))
}

/// Nearest PSD matrix in Frobenius norm (negative eigenvalues clipped).
pub fn psd_projection(m: &CMatrix) -> Result<CMatrix> {
    Ok(hermitian_eig(m)?.reconstruct_with(|l| l.max(0.0)))
}

fn check_state(m: &CMatrix) -> Result<()> {
    let tr = m.trace();
    if (tr - ONE).norm() > 1e-9 {
        return Err(Error::InvalidState(format!("trace {tr} != 1")));
    }
    let min = min_eigenvalue(m)?;
    if min < -PSD_TOL {
        return Err(Error::NotPsd {
            min_eigenvalue: min,
        });
    }
    Ok(())
}

/// Uhlmann-Jozsa fidelity `Tr sqrt(sqrt(rho) sigma sqrt(rho))` (not squared).
pub fn fidelity(rho: &CMatrix, sigma: &CMatrix) -> Result<f64> {
    if rho.rows != sigma.rows || !rho.is_square() || !sigma.is_square() {
        return Err(Error::DimensionMismatch {
            expected: rho.rows,
            actual: sigma.rows,
        });
    }
    check_state(rho)?;
    check_state(sigma)?;
    // F = ||sqrt(rho) sqrt(sigma)||_1. Eigenvalues at rounding level are
    // zeroed first; their square roots would otherwise leak ~1e-8 into F.
    let root = |m: &CMatrix| -> Result<CMatrix> {
        let eig = hermitian_eig(m)?;
        let cut = 1e-13 * eig.values[0].abs().max(1.0);
        Ok(eig.reconstruct_with(|l| if l > cut { l.sqrt() } else { 0.0 }))
    };
    let prod = &root(rho)? * &root(sigma)?;
    let f: f64 = prod.to_nalgebra().singular_values().iter().sum();
    Ok(f.clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn sx() -> CMatrix {
        CMatrix::from_rows([[ZERO, ONE], [ONE, ZERO]])
    }

    fn sz() -> CMatrix {
        CMatrix::from_real_diagonal(&[1.0, -1.0])
    }

    fn phi_plus() -> CMatrix {
        let a = 1.0 / 2f64.sqrt();
        CMatrix::outer(&[c(a, 0.0), ZERO, ZERO, c(a, 0.0)])
    }

    fn singlet() -> CMatrix {
        let a = 1.0 / 2f64.sqrt();
        CMatrix::outer(&[ZERO, c(a, 0.0), c(-a, 0.0), ZERO])
    }

    fn ab() -> Layout {
        Layout::qubits(&[Sys::C, Sys::B])
    }

    #[test]
    fn kron_basics() {
        let i2 = CMatrix::identity(2);
        assert_eq!(kron(&i2, &i2), CMatrix::identity(4));
        assert_eq!(
            kron(&sz(), &i2),
            CMatrix::from_real_diagonal(&[1.0, 1.0, -1.0, -1.0])
        );
        let xx = kron(&sx(), &sx());
        assert!((&xx * &xx).max_abs_diff(&CMatrix::identity(4)) < 1e-15);
    }

    #[test]
    fn partial_trace_examples() {
        let (r, l) = partial_trace(&phi_plus(), &ab(), Sys::B).unwrap();
        assert!(r.max_abs_diff(&CMatrix::identity(2).scale(0.5)) < 1e-15);
        assert_eq!(l.labels(), &[Sys::C]);

        let rho = CMatrix::from_rows([[c(0.7, 0.0), c(0.1, 0.2)], [c(0.1, -0.2), c(0.3, 0.0)]]);
        let sigma = CMatrix::from_rows([[c(2.0, 0.0), c(0.0, 1.0)], [c(0.0, -1.0), c(1.0, 0.0)]]);
        let (r, _) = partial_trace(&kron(&rho, &sigma), &ab(), Sys::B).unwrap();
        assert!(r.max_abs_diff(&rho.scale(3.0)) < 1e-14);
        let (r, _) = partial_trace(&kron(&rho, &sigma), &ab(), Sys::C).unwrap();
        assert!(r.max_abs_diff(&sigma) < 1e-14);
    }

    #[test]
    fn partial_trace_errors() {
        assert!(matches!(
            partial_trace(&phi_plus(), &ab(), Sys::D),
            Err(Error::UnknownSubsystem(Sys::D))
        ));
        assert!(matches!(
            partial_trace(&CMatrix::identity(8), &ab(), Sys::C),
            Err(Error::LayoutMismatch { .. })
        ));
    }

    #[test]
    fn partial_transpose_examples() {
        let rho = CMatrix::from_rows([[c(0.7, 0.0), c(0.1, 0.2)], [c(0.1, -0.2), c(0.3, 0.0)]]);
        let sigma = CMatrix::from_rows([[c(0.5, 0.0), c(0.2, 0.4)], [c(0.2, -0.4), c(0.5, 0.0)]]);
        let pt = partial_transpose(&kron(&rho, &sigma), &ab(), Sys::B).unwrap();
        assert!(pt.max_abs_diff(&kron(&rho, &sigma.transpose())) < 1e-15);

        let pt = partial_transpose(&singlet(), &ab(), Sys::C).unwrap();
        assert!((min_eigenvalue(&pt).unwrap() + 0.5).abs() < 1e-12);
        let back = partial_transpose(&pt, &ab(), Sys::C).unwrap();
        assert_eq!(back, singlet());
    }

    #[test]
    fn permute_swaps_factors() {
        let rho = CMatrix::from_rows([[c(0.7, 0.0), c(0.1, 0.2)], [c(0.1, -0.2), c(0.3, 0.0)]]);
        let sigma = sz();
        let (p, l) = permute(&kron(&rho, &sigma), &ab(), &[Sys::B, Sys::C]).unwrap();
        assert_eq!(l.labels(), &[Sys::B, Sys::C]);
        assert!(p.max_abs_diff(&kron(&sigma, &rho)) < 1e-15);
    }

    #[test]
    fn eig_examples() {
        let e = hermitian_eig(&sz()).unwrap();
        assert_eq!(e.values, vec![1.0, -1.0]);
        let e = hermitian_eig(&CMatrix::identity(4)).unwrap();
        assert!(e.values.iter().all(|&v| (v - 1.0).abs() < 1e-15));
        let e = hermitian_eig(&phi_plus()).unwrap();
        let expect = [1.0, 0.0, 0.0, 0.0];
        for (v, x) in e.values.iter().zip(expect) {
            assert!((v - x).abs() < 1e-14);
        }
        // phase convention
        for k in 0..4 {
            let v = e.vector(k);
            let first = v.iter().find(|z| z.norm() > 1e-12).unwrap();
            assert!(first.im.abs() < 1e-14 && first.re > 0.0);
        }
    }

    #[test]
    fn eig_rejects_non_hermitian() {
        let m = CMatrix::from_rows([[ONE, ONE], [ZERO, ONE]]);
        assert!(matches!(hermitian_eig(&m), Err(Error::NonHermitian { .. })));
    }

    #[test]
    fn psd_sqrt_examples() {
        assert!(
            psd_sqrt(&CMatrix::identity(2))
                .unwrap()
                .max_abs_diff(&CMatrix::identity(2))
                < 1e-14
        );
        let m = CMatrix::from_real_diagonal(&[4.0, 0.0]);
        assert!(
            psd_sqrt(&m)
                .unwrap()
                .max_abs_diff(&CMatrix::from_real_diagonal(&[2.0, 0.0]))
                < 1e-14
        );
        let q = CMatrix::identity(4).scale(0.25);
        assert!(
            psd_sqrt(&q)
                .unwrap()
                .max_abs_diff(&CMatrix::identity(4).scale(0.5))
                < 1e-14
        );
        assert!(matches!(psd_sqrt(&sz()), Err(Error::NotPsd { .. })));
    }

    #[test]
    fn fidelity_examples() {
        let zero = CMatrix::from_real_diagonal(&[1.0, 0.0]);
        let one = CMatrix::from_real_diagonal(&[0.0, 1.0]);
        assert!((fidelity(&zero, &zero).unwrap() - 1.0).abs() < 1e-12);
        assert!(fidelity(&zero, &one).unwrap().abs() < 1e-12);
        assert!((fidelity(&phi_plus(), &phi_plus()).unwrap() - 1.0).abs() < 1e-12);
        assert!(matches!(
            fidelity(&sz(), &zero),
            Err(Error::InvalidState(_))
        ));
    }

    #[test]
    fn min_eigenvalue_examples() {
        assert_eq!(min_eigenvalue(&CMatrix::identity(3)).unwrap(), 1.0);
        assert_eq!(min_eigenvalue(&sz()).unwrap(), -1.0);
    }
}
