//! JSON form of operators: `{"dims", "labels", "re", "im"}`.
//!
//! Floats are written in shortest round-trip form and parsed exactly, so a
//! write/read cycle reproduces every entry bit for bit.

use serde::{Deserialize, Serialize};

use crate::causal_map::CausalMap;
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, Layout, Sys, C64};
use crate::qubit::{ChannelOperator, DensityOperator};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorJson {
    pub dims: Vec<usize>,
    pub labels: Vec<Sys>,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl OperatorJson {
    pub fn from_matrix(m: &CMatrix, layout: &Layout) -> Self {
        let n = m.rows();
        let re = (0..n)
            .map(|i| (0..n).map(|j| m[(i, j)].re).collect())
            .collect();
        let im = (0..n)
            .map(|i| (0..n).map(|j| m[(i, j)].im).collect())
            .collect();
        Self {
            dims: layout.dims().to_vec(),
            labels: layout.labels().to_vec(),
            re,
            im,
        }
    }

    pub fn to_matrix(&self) -> Result<(CMatrix, Layout)> {
        let layout = Layout::new(self.dims.clone(), self.labels.clone())?;
        let n = layout.dim();
        if self.re.len() != n || self.im.len() != n {
            return Err(Error::Format(format!("expected {n} rows")));
        }
        let mut data = Vec::with_capacity(n * n);
        for (r, i) in self.re.iter().zip(&self.im) {
            if r.len() != n || i.len() != n {
                return Err(Error::Format(format!("expected {n} columns")));
            }
            data.extend(r.iter().zip(i).map(|(&a, &b)| C64::new(a, b)));
        }
        Ok((CMatrix::from_vec(n, n, data)?, layout))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("plain data")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Format(e.to_string()))
    }
}

impl From<&CausalMap> for OperatorJson {
    fn from(m: &CausalMap) -> Self {
        Self::from_matrix(m.matrix(), &CausalMap::layout())
    }
}

impl From<&DensityOperator> for OperatorJson {
    fn from(d: &DensityOperator) -> Self {
        Self::from_matrix(d.matrix(), d.layout())
    }
}

impl From<&ChannelOperator> for OperatorJson {
    fn from(c: &ChannelOperator) -> Self {
        Self::from_matrix(c.matrix(), &ChannelOperator::layout())
    }
}

impl TryFrom<&OperatorJson> for CausalMap {
    type Error = Error;
    /// Reads without enforcing the causal-map constraints, so estimates survive
    /// a round trip; call [`CausalMap::validate`] afterwards.
    fn try_from(j: &OperatorJson) -> Result<Self> {
        let (m, layout) = j.to_matrix()?;
        if layout != CausalMap::layout() {
            return Err(Error::Format(
                "causal map must have layout C,B,D of qubits".into(),
            ));
        }
        CausalMap::from_raw(m)
    }
}

impl TryFrom<&OperatorJson> for DensityOperator {
    type Error = Error;
    fn try_from(j: &OperatorJson) -> Result<Self> {
        let (m, layout) = j.to_matrix()?;
        DensityOperator::new(m, layout)
    }
}
