//! Cholesky parametrization of the model operators.
//!
//! A real vector fills a lower-triangular R with real diagonal; the operator
//! is R†R, whose trace is the squared norm of the vector. For four
//! dimensions the layout is
//!
//! ```text
//! r1
//! r5+i r6   r2
//! r11+i r12 r7+i r8   r3
//! r15+i r16 r13+i r14 r9+i r10 r4
//! ```
//!
//! and for two dimensions `[[r1, 0], [r3 + i r4, r2]]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, partial_transpose, CMatrix, Layout, Sys, C64};
use crate::qubit::{ChannelOperator, DensityOperator};

pub const CB_LEN: usize = 16;
pub const C_LEN: usize = 4;
pub const BD_LEN: usize = 16;
pub const PARAM_LEN: usize = CB_LEN + C_LEN + BD_LEN;

/// (row, col, index of real part) for the strictly lower entries.
const OFF4: [(usize, usize, usize); 6] = [
    (1, 0, 4),
    (2, 1, 6),
    (3, 2, 8),
    (2, 0, 10),
    (3, 1, 12),
    (3, 0, 14),
];
const OFF2: [(usize, usize, usize); 1] = [(1, 0, 2)];

fn offdiag(dim: usize) -> &'static [(usize, usize, usize)] {
    if dim == 4 {
        &OFF4
    } else {
        &OFF2
    }
}

fn check_len(r: &[f64], dim: usize) -> Result<()> {
    if dim != 2 && dim != 4 {
        return Err(Error::DimensionMismatch {
            expected: 4,
            actual: dim,
        });
    }
    if r.len() != dim * dim {
        return Err(Error::DimensionMismatch {
            expected: dim * dim,
            actual: r.len(),
        });
    }
    Ok(())
}

/// The lower-triangular factor R.
pub fn lower_triangular(r: &[f64], dim: usize) -> Result<CMatrix> {
    check_len(r, dim)?;
    let mut m = CMatrix::zeros(dim, dim);
    for i in 0..dim {
        m[(i, i)] = C64::new(r[i], 0.0);
    }
    for &(i, j, k) in offdiag(dim) {
        m[(i, j)] = C64::new(r[k], r[k + 1]);
    }
    Ok(m)
}

/// R†R; positive semi-definite with trace |r|².
pub fn cholesky_build(r: &[f64], dim: usize) -> Result<CMatrix> {
    let l = lower_triangular(r, dim)?;
    Ok(&l.dagger() * &l)
}

/// (R†R)^{T_D} on (B, D): positive partial transpose by construction.
pub fn ppt_channel_build(r: &[f64]) -> Result<CMatrix> {
    let a = cholesky_build(r, 4)?;
    partial_transpose(&a, &ChannelOperator::layout(), Sys::D)
}

/// Parameters of a positive semi-definite `a`, the inverse of
/// [`cholesky_build`]. With J the reversal permutation, JaJ = LL† and
/// R = J L† J. Pivots below `1e-14·Tr a` are treated as zero.
pub fn cholesky_params(a: &CMatrix) -> Result<Vec<f64>> {
    let n = a.rows();
    check_len(&vec![0.0; n * n], n)?;
    let min = linalg::min_eigenvalue(a)?;
    let tiny = 1e-14 * a.trace().re.abs().max(1e-300);
    if min < -1e-9 * a.trace().re.abs().max(1.0) {
        return Err(Error::NotPsd {
            min_eigenvalue: min,
        });
    }
    let rev = |i: usize| n - 1 - i;
    let b = CMatrix::from_fn(n, n, |i, j| a[(rev(i), rev(j))]);
    let mut l = CMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = b[(j, j)].re;
        for k in 0..j {
            d -= l[(j, k)].norm_sqr();
        }
        if d <= tiny {
            continue;
        }
        let pivot = d.sqrt();
        l[(j, j)] = C64::new(pivot, 0.0);
        for i in j + 1..n {
            let mut v = b[(i, j)];
            for k in 0..j {
                v -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = v / pivot;
        }
    }
    // R = J L† J is lower triangular
    let r = CMatrix::from_fn(n, n, |i, j| l[(rev(j), rev(i))].conj());
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        out[i] = r[(i, i)].re;
    }
    for &(i, j, k) in offdiag(n) {
        out[k] = r[(i, j)].re;
        out[k + 1] = r[(i, j)].im;
    }
    Ok(out)
}

/// Parameters (r_CB, r_C, r_{B|D}) of the mixture model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    pub r_cb: [f64; CB_LEN],
    pub r_c: [f64; C_LEN],
    pub r_bd: [f64; BD_LEN],
}

impl ParamVector {
    pub fn from_slice(x: &[f64]) -> Result<Self> {
        if x.len() != PARAM_LEN {
            return Err(Error::DimensionMismatch {
                expected: PARAM_LEN,
                actual: x.len(),
            });
        }
        if let Some(&bad) = x.iter().find(|v| !v.is_finite()) {
            return Err(Error::OutOfRange {
                what: "parameter",
                value: bad,
            });
        }
        Ok(Self {
            r_cb: x[..CB_LEN].try_into().expect("length checked"),
            r_c: x[CB_LEN..CB_LEN + C_LEN]
                .try_into()
                .expect("length checked"),
            r_bd: x[CB_LEN + C_LEN..].try_into().expect("length checked"),
        })
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(PARAM_LEN);
        v.extend_from_slice(&self.r_cb);
        v.extend_from_slice(&self.r_c);
        v.extend_from_slice(&self.r_bd);
        v
    }

    /// Parameters of given unnormalized ρ̃_CB, ρ̃_C and a channel operator.
    pub fn from_operators(rho_cb: &CMatrix, rho_c: &CMatrix, rho_bd: &CMatrix) -> Result<Self> {
        let a = partial_transpose(rho_bd, &ChannelOperator::layout(), Sys::D)?;
        let mut x = cholesky_params(rho_cb)?;
        x.extend(cholesky_params(rho_c)?);
        x.extend(cholesky_params(&a)?);
        Self::from_slice(&x)
    }

    /// ρ̃_CB = pN ρ_CB, ρ̃_C = (1-p)N ρ_C, and the channel as given.
    pub fn ground_truth(
        p: f64,
        n: f64,
        rho_cb: &DensityOperator,
        rho_c: &DensityOperator,
        channel: &ChannelOperator,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::OutOfRange {
                what: "mixing probability",
                value: p,
            });
        }
        Self::from_operators(
            &rho_cb.matrix().scale(p * n),
            &rho_c.matrix().scale((1.0 - p) * n),
            channel.matrix(),
        )
    }

    pub fn rho_cb_tilde(&self) -> CMatrix {
        cholesky_build(&self.r_cb, 4).expect("fixed length")
    }

    pub fn rho_c_tilde(&self) -> CMatrix {
        cholesky_build(&self.r_c, 2).expect("fixed length")
    }

    pub fn rho_bd(&self) -> CMatrix {
        ppt_channel_build(&self.r_bd).expect("fixed length")
    }

    /// |r_CB|² / (|r_CB|² + |r_C|²), in [0, 1]; ½ when both vanish.
    pub fn trace_ratio(&self) -> f64 {
        trace_ratio(&self.r_cb, &self.r_c)
    }
}

pub(crate) fn trace_ratio(r_cb: &[f64], r_c: &[f64]) -> f64 {
    let a: f64 = r_cb.iter().map(|v| v * v).sum();
    let b: f64 = r_c.iter().map(|v| v * v).sum();
    if a + b == 0.0 {
        0.5
    } else {
        a / (a + b)
    }
}

pub(crate) fn cb_layout() -> Layout {
    Layout::qubits(&[Sys::C, Sys::B])
}
